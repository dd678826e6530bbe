import json
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phpp.errors import CapacityError, DomainError, InputError
from phpp.lattice import ScenarioTree, build_binomial, cond_expectation, cond_quantile

import oracles
from strategies import random_tree, tree_from_spec, trees


def test_binomial_paths():
    t = build_binomial(10000, 1.02, 1.06, 0.5, 2)
    np.testing.assert_allclose(t.s[t.path(t.offsets[2])], [10000, 10200, 10404])
    t10 = build_binomial(10000, 1.02, 1.06, 0.5, 10)
    assert t10.n_at(10) == 1024
    assert t10.s[-1] == pytest.approx(17908.48, abs=0.005)
    root = build_binomial(5.0, 1.0, 2.0, 0.3, 0)
    assert root.n_nodes == 1 and root.K == 0


def test_binomial_capacity_and_domain():
    with pytest.raises(CapacityError):
        build_binomial(1, 1.0, 2.0, 0.5, 10, max_nodes=1000)
    with pytest.raises(DomainError):
        build_binomial(1, 2.0, 1.0, 0.5, 2)
    with pytest.raises(DomainError):
        build_binomial(1, 1.0, 2.0, 1.0, 2)


def test_validation():
    with pytest.raises(InputError):
        ScenarioTree([-1, 0, 0], [1.0, 0.5, 0.4], [1, 1, 1])
    with pytest.raises(DomainError):
        ScenarioTree([-1, 0], [1.0, 1.0], [1, -1])
    with pytest.raises(InputError):
        # leaf at epoch 1 while another branch reaches epoch 2
        ScenarioTree([-1, 0, 0, 1], [1.0, 0.5, 0.5, 1.0], [1, 1, 1, 1])
    with pytest.raises(InputError):
        ScenarioTree([-1, 0, 0, 0], [1.0, 0.5, 0.5, 0.0], [1, 1, 1, 1])


def test_expectation_examples():
    t = build_binomial(10000, 1.02, 1.06, 0.5, 1)
    assert cond_expectation(t, t.s_at(1), 0)[0] == pytest.approx(1.04 * 10000)
    np.testing.assert_allclose(t.cond_expectation(np.full(2, 3.5), 0), [3.5])
    with pytest.raises(InputError):
        t.cond_expectation(np.ones(3), 0)


def test_quantile_examples():
    t = tree_from_spec(1.0, [[([0.4, 0.6], [1.0, 2.0])]])
    vals = np.array([10.0, 20.0])
    assert cond_quantile(t, vals, 0.4, 0)[0] == 10
    assert cond_quantile(t, vals, 0.5, 0)[0] == 20
    assert cond_quantile(t, vals, 1.0, 0)[0] == 20


@given(trees(), st.floats(0.01, 1.0))
def test_operators_match_brute_force(tree, alpha):
    kids = oracles.children(tree)
    rng = np.random.default_rng(0)
    values = rng.normal(size=tree.n_nodes)
    for k in range(tree.K):
        nxt = tree.epoch_slice(k + 1)
        got_e = tree.cond_expectation(values[nxt], k)
        got_q = tree.cond_quantile(values[nxt], alpha, k)
        for j, i in enumerate(range(*tree.epoch_slice(k).indices(tree.n_nodes))):
            vals = [values[c] for c in kids[i]]
            probs = [tree.prob[c] for c in kids[i]]
            assert got_e[j] == pytest.approx(oracles.expectation(vals, probs), rel=1e-12, abs=1e-12)
            assert got_q[j] == oracles.quantile(vals, probs, alpha)


@given(trees(), st.floats(0.05, 1.0))
@settings(max_examples=50)
def test_homogeneity_sign_and_localisation(tree, alpha):
    rng = np.random.default_rng(1)
    for k in range(tree.K):
        x = rng.uniform(0, 5, tree.n_at(k + 1))
        y = rng.uniform(0, 3, tree.n_at(k))
        yx = y[tree.parent_local(k + 1)] * x
        for op in (lambda v: tree.cond_expectation(v, k), lambda v: tree.cond_quantile(v, alpha, k)):
            np.testing.assert_allclose(op(yx), y * op(x), rtol=1e-12)
            assert np.all(op(x) >= 0) and np.all(op(-x) <= 0)
            # changing values below other parents leaves node 0 of epoch k untouched
            x2 = np.where(tree.parent_local(k + 1) == 0, x, x + 7.0)
            assert op(x2)[0] == pytest.approx(op(x)[0], rel=1e-15)


@given(trees(max_k=4))
@settings(max_examples=50)
def test_tower_property(tree):
    x = np.random.default_rng(2).uniform(0, 10, tree.n_at(tree.K))
    direct = x
    for k in range(tree.K - 1, -1, -1):
        direct = tree.cond_expectation(direct, k)
    leaves_prob = tree.path_probabilities()[tree.epoch_slice(tree.K)]
    assert direct[0] == pytest.approx(float(leaves_prob @ x), rel=1e-12)


def test_path_probabilities_sum_to_one():
    t = random_tree(np.random.default_rng(5))
    prob = t.path_probabilities()
    for k in range(t.K + 1):
        assert prob[t.epoch_slice(k)].sum() == pytest.approx(1.0, abs=1e-12)
    deep = build_binomial(1.0, 0.9, 1.1, 0.3, 16)
    assert deep.path_probabilities()[deep.epoch_slice(16)].sum() == pytest.approx(1.0, abs=1e-12)


def test_deep_path_probabilities_do_not_underflow():
    parent = [-1] + list(range(40))
    t = ScenarioTree(parent, [1.0] * 41, np.ones(41))
    assert t.K == 40
    np.testing.assert_allclose(t.path_probabilities(), 1.0)


def test_json_round_trip_and_shuffled_input():
    t = random_tree(np.random.default_rng(6))
    back = ScenarioTree.from_json(t.to_json())
    assert back.to_dict() == t.to_dict()
    nodes = t.to_dict()["nodes"]
    random.Random(0).shuffle(nodes)
    again = ScenarioTree.from_nodes(nodes, t.K)
    # sibling order follows the input, the node records do not change
    key = lambda n: n["id"]  # noqa: E731
    assert sorted(again.to_dict()["nodes"], key=key) == sorted(t.to_dict()["nodes"], key=key)


def test_string_ids_and_bad_json():
    data = {"K": 1, "nodes": [
        {"id": "u", "k": 1, "parent": "r", "p": 0.5, "s": 2.0},
        {"id": "r", "k": 0, "parent": None, "p": 1.0, "s": 1.0},
        {"id": "d", "k": 1, "parent": "r", "p": 0.5, "s": 0.5},
    ]}
    t = ScenarioTree.from_dict(data)
    assert t.ids == ["r", "u", "d"]
    assert t.index_of("d") == 2
    with pytest.raises(InputError):
        ScenarioTree.from_json("{not json")
    bad = json.loads(json.dumps(data))
    bad["nodes"][0]["k"] = 2
    with pytest.raises(InputError):
        ScenarioTree.from_dict(bad)
    bad = json.loads(json.dumps(data))
    bad["K"] = 3
    with pytest.raises(InputError):
        ScenarioTree.from_dict(bad)
    bad = json.loads(json.dumps(data))
    bad["nodes"][0]["parent"] = "nowhere"
    with pytest.raises(InputError):
        ScenarioTree.from_dict(bad)


def test_tree_is_immutable():
    t = build_binomial(1, 1.0, 2.0, 0.5, 2)
    with pytest.raises(ValueError):
        t.s[0] = 3.0
