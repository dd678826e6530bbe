import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phpp.core import (
    absolute_from_relative,
    account_closed_form,
    check_regular,
    evolve_account,
    is_regular,
    regularity_violations,
    relative_from_absolute,
    rescale,
)
from phpp.errors import DomainError, InputError, RegularityError

from strategies import regular_paths


def test_first_step_of_worst_binomial_path():
    a = evolve_account([10000, 10200], [999.90, 0.0])
    assert a[0] == 10000
    assert a[1] == pytest.approx(9180.11, abs=0.02)


def test_zero_consumption_leaves_value_process():
    s = np.array([100.0, 120.0, 90.0])
    np.testing.assert_array_equal(evolve_account(s, np.zeros(3)), s)


def test_recursion_matches_closed_form_loop():
    rng = np.random.default_rng(3)
    s = rng.uniform(10, 200, 6)
    z = rng.uniform(0, 1, 6)
    x = absolute_from_relative(s, z).x
    a = [s[0]]
    for k in range(5):
        a.append((a[k] - x[k]) * s[k + 1] / s[k])
    np.testing.assert_allclose(evolve_account(s, x), a, rtol=1e-12)
    np.testing.assert_allclose(account_closed_form(s, x), a, rtol=1e-12, atol=1e-12 * s.max())


def test_batch_rows_are_independent_paths():
    rng = np.random.default_rng(4)
    s = rng.uniform(1, 2, (3, 5))
    x = 0.1 * s
    a = evolve_account(s, x)
    for row in range(3):
        np.testing.assert_array_equal(a[row], evolve_account(s[row], x[row]))


def test_errors():
    with pytest.raises(DomainError):
        evolve_account([1.0, 0.0], [0.0, 0.0])
    with pytest.raises(InputError):
        evolve_account([1.0, 2.0], [0.0])
    with pytest.raises(DomainError):
        absolute_from_relative([1.0, 1.0], [0.5, 1.2])
    with pytest.raises(DomainError):
        rescale([1.0, -1.0], [1.0, 1.0], [0.0, 0.0])


def test_relative_rates_examples():
    z = relative_from_absolute([10000, 10200], [999.90, 500.0])
    assert z[0] == pytest.approx(0.09999)
    np.testing.assert_array_equal(relative_from_absolute([1, 2, 3], [0, 0, 0]), [0, 0, 0])
    np.testing.assert_array_equal(relative_from_absolute([5, 6, 7], [5, 0, 0]), [1, 0, 0])


def test_non_regular_input_rejected():
    with pytest.raises(RegularityError):
        relative_from_absolute([100, 100], [60, 60])
    with pytest.raises(RegularityError):
        check_regular([100, 100], [-1, 0])
    assert not is_regular([100, 100], [60, 60])
    assert regularity_violations([100, 100], [60, 60]).tolist() == [False, True]


def test_absolute_from_relative_examples():
    st_ = absolute_from_relative([100, 100], [0.5, 1.0])
    np.testing.assert_allclose(st_.x, [50, 50])
    np.testing.assert_allclose(st_.a, [100, 50])
    np.testing.assert_allclose(st_.residual, [50, 0])


def test_exhaustion_is_absorbing():
    s = np.array([100.0, 110.0, 90.0, 95.0])
    st_ = absolute_from_relative(s, [0.3, 1.0, 0.5, 0.7])
    np.testing.assert_allclose(st_.a[2:], 0, atol=1e-12)
    np.testing.assert_allclose(st_.x[2:], 0, atol=1e-12)


@given(regular_paths())
def test_product_form_and_product_sum_identity(data):
    s, z = data
    st_ = absolute_from_relative(s, z)
    keep = np.cumprod(1.0 - z)
    prior = np.concatenate([[1.0], keep[:-1]])
    np.testing.assert_allclose(st_.x, z * prior * s, rtol=1e-10, atol=1e-10 * s[0])
    np.testing.assert_allclose(keep, 1.0 - np.cumsum(st_.x / s), rtol=1e-10, atol=1e-10)
    assert is_regular(s, st_.x)


@given(regular_paths())
def test_round_trip_relative_absolute(data):
    s, z = data
    st_ = absolute_from_relative(s, z)
    back = relative_from_absolute(s, st_.x)
    alive = st_.a > 1e-6 * s[0]
    np.testing.assert_allclose(back[alive], z[alive], rtol=1e-9, atol=1e-12)
    again = absolute_from_relative(s, back)
    np.testing.assert_allclose(again.x, st_.x, rtol=1e-9, atol=1e-9 * s[0])


def test_rescale_example():
    f = np.array([1.0, 2.0, 4.0])
    s = np.array([100.0, 100.0, 100.0])
    x = np.array([10.0, 10.0, 90.0])
    s2, x2, a2 = rescale(f, s, x)
    np.testing.assert_allclose(a2, evolve_account(f * s, f * x))
    np.testing.assert_allclose(a2, [100, 180, 320])
    np.testing.assert_allclose(a2, f * evolve_account(s, x))


@given(regular_paths(), st.lists(st.floats(0.01, 100), min_size=6, max_size=6))
@settings(max_examples=50)
def test_rescaling_preserves_account_and_regularity(data, f):
    s, z = data
    f = np.array(f)
    x = absolute_from_relative(s, z).x
    s2, x2, a2 = rescale(f, s, x)
    np.testing.assert_allclose(a2, f * evolve_account(s, x), rtol=1e-12, atol=1e-9 * (f * s).max())
    assert is_regular(s2, x2) == is_regular(s, x)
    _, _, ident = rescale(np.ones(6), s, x)
    np.testing.assert_array_equal(ident, evolve_account(s, x))
