"""Command-line entry point: ``phpp <command> [flags]``.

Exit codes: 0 success, 1 verification failure, 2 input error, 3 infeasible.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction

import numpy as np

from . import actuarial, iid, stochastic
from .engine import SOLUTION_COLUMNS, PHPPSpec, solve, verify
from .errors import InfeasibleError, PHPPError
from .lattice import ScenarioTree, build_binomial

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def number(text) -> float:
    """Float, also accepting fractions such as ``1/3``."""
    try:
        return float(Fraction(str(text).strip())) if "/" in str(text) else float(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def number_list(text) -> list:
    return [number(t) for t in str(text).replace(",", " ").split()]


# ---------------------------------------------------------------- parser


def _add_common(p, formats=("csv", "json")):
    p.add_argument("--config", help="JSON or key=value file with default flag values")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=formats, default=formats[0])


def _add_projection(p, d_default=1.0):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--expectation-c", type=number, help="psi_k = c E[.|F_k]")
    g.add_argument("--quantile-alpha", "--alpha", dest="quantile_alpha", type=number,
                   help="psi_k = q_alpha(.|F_k)")
    p.add_argument("--terminal-d", type=number, default=d_default, help="terminal fraction in [0, 1]")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phpp", description="Regular consumption processes for money accounts.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tree-solve", help="backward-forward solve on a scenario tree")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--tree", help="scenario tree JSON file")
    src.add_argument("--binomial", nargs=4, type=number, metavar=("S0", "U1", "U2", "P"))
    p.add_argument("--K", type=int)
    p.add_argument("--spec", help="PHPP spec JSON file")
    _add_projection(p)
    _add_common(p)

    p = sub.add_parser("simulate", help="Monte Carlo paths under deterministic relative rates")
    m = p.add_mutually_exclusive_group()
    m.add_argument("--gbm", nargs=2, type=number, metavar=("MU", "SIGMA"))
    m.add_argument("--binomial", nargs=4, type=number, metavar=("S0", "U1", "U2", "P"))
    p.add_argument("--s0", type=number, default=10_000.0)
    p.add_argument("--K", type=int)
    p.add_argument("--n-paths", type=int, default=1000)
    p.add_argument("--seed", type=int, default=stochastic.DEFAULT_SEED)
    p.add_argument("--summary", help="write the summary JSON here (default: print it)")
    _add_projection(p)
    _add_common(p)

    p = sub.add_parser("perpetual", help="largest feasible initial rate for perpetual consumption")
    a = p.add_mutually_exclusive_group()
    a.add_argument("--a", type=number, help="constant projection constant")
    a.add_argument("--a-cycle", type=number_list, help="constants repeated cyclically, e.g. 1.1,0.95")
    p.add_argument("--probe", type=int, default=iid.DEFAULT_PROBE)
    p.add_argument("--z0", type=number, help="also list the first --steps rates started at z0")
    p.add_argument("--steps", type=int, default=10)
    _add_common(p, ("text", "json"))

    p = sub.add_parser("drawdown", help="income drawdown: first withdrawal and expected annuity")
    m = p.add_mutually_exclusive_group()
    m.add_argument("--fixed-rate", type=number, help="deterministic growth 1 + i")
    m.add_argument("--gbm", nargs=2, type=number, metavar=("MU", "SIGMA"))
    p.add_argument("--s0", type=number, default=10_000.0)
    p.add_argument("--K", type=int)
    p.add_argument("--c", type=number, default=1.0)
    p.add_argument("--d", type=number, default=1.0)
    p.add_argument("--i", type=number, default=0.0, help="interest rate of the annuity basis")
    p.add_argument("--annuity-factor", type=number, help="annuity-due factor at the end of drawdown")
    p.add_argument("--life-table", help="CSV with columns age, annuity_due_factor")
    p.add_argument("--age", type=int, help="age at the start; the factor at age + K is used")
    p.add_argument("--limit", type=number, help="solve for the d whose first withdrawal equals this")
    _add_common(p, ("text", "json"))

    p = sub.add_parser("bonus", help="smooth bonus schedule for a closed with-profits fund")
    p.add_argument("--sum-assured", type=number)
    p.add_argument("--survivors", type=number_list, help="N_0..N_K, comma separated")
    f = p.add_mutually_exclusive_group()
    f.add_argument("--assurance-factors", type=number_list, help="factors for k = 0..K")
    f.add_argument("--assurance-table", help="CSV with columns k, assurance_factor")
    p.add_argument("--free-assets", type=number, help="free assets per policy at 0")
    m = p.add_mutually_exclusive_group()
    m.add_argument("--fixed-rate", type=number)
    m.add_argument("--gbm", nargs=2, type=number, metavar=("MU", "SIGMA"))
    m.add_argument("--binomial", nargs=3, type=number, metavar=("U1", "U2", "P"))
    p.add_argument("--n-paths", type=int, default=1)
    p.add_argument("--seed", type=int, default=stochastic.DEFAULT_SEED)
    _add_projection(p)
    _add_common(p)
    return parser


# ---------------------------------------------------------------- config


def read_config(path) -> dict:
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError(f"config {path}: expected a JSON object")
        return data
    data = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config {path}:{n}: expected key=value")
        key, value = line.split("=", 1)
        data[key.strip()] = value.strip()
    return data


def _coerce(action, value):
    if action.nargs in (None, "?"):
        if action.type is None or not isinstance(value, str):
            return value
        return action.type(value)
    items = value.replace(",", " ").split() if isinstance(value, str) else list(value)
    return [action.type(v) if action.type else v for v in items]


def _subparser(parser, command):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices.get(command)
    return None


def parse_args(argv):
    """Parse ``argv``; values from ``--config`` sit between flags and defaults."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.config:
        return args
    sub = _subparser(parser, args.command)
    actions = {a.dest: a for a in sub._actions}
    actions.update({o.lstrip("-").replace("-", "_"): a for a in sub._actions for o in a.option_strings})
    defaults = {}
    for key, value in read_config(args.config).items():
        dest = key.lstrip("-").replace("-", "_")
        if dest not in actions or actions[dest].dest in ("help", "config"):
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        action = actions[dest]
        try:
            defaults[action.dest] = _coerce(action, value)
        except (argparse.ArgumentTypeError, ValueError, TypeError) as exc:
            raise UsageError(f"config key {key!r}: {exc}") from None
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


# ----------------------------------------------------------------- output


def _open_out(path):
    return open(path, "w", newline="") if path else None


def _emit(args, write):
    """Write via ``write(fh)`` to ``--out`` or stdout."""
    fh = _open_out(args.out)
    try:
        write(fh or sys.stdout)
    finally:
        if fh:
            fh.close()


def _info(args, text):
    # keep stdout clean when the data goes there
    print(text, file=sys.stdout if args.out else sys.stderr)


def _projection_spec(args, K):
    if args.quantile_alpha is not None:
        return PHPPSpec.quantile(K, args.quantile_alpha, args.terminal_d)
    c = 1.0 if args.expectation_c is None else args.expectation_c
    return PHPPSpec.expectation(K, c, args.terminal_d)


def _growth_constant(args, model):
    if args.quantile_alpha is not None:
        return stochastic.quantile_growth_constant(model, args.quantile_alpha)
    c = 1.0 if args.expectation_c is None else args.expectation_c
    return c * stochastic.mean_growth_constant(model)


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"{args.command}: missing " + ", ".join("--" + n.replace("_", "-") for n in missing))


# --------------------------------------------------------------- commands


def cmd_tree_solve(args) -> int:
    if args.tree:
        with open(args.tree) as fh:
            tree = ScenarioTree.from_json(fh.read())
    elif args.binomial:
        _require(args, "K")
        s0, u1, u2, p = args.binomial
        tree = build_binomial(s0, u1, u2, p, args.K)
    else:
        raise UsageError("tree-solve needs --tree or --binomial")
    if args.spec:
        with open(args.spec) as fh:
            spec = PHPPSpec.from_json(fh.read())
    else:
        spec = _projection_spec(args, tree.K)

    sol = solve(tree, spec)
    report = verify(tree, spec, sol)
    if args.format == "json":
        payload = {
            "columns": list(SOLUTION_COLUMNS),
            "rows": [[r[0], r[1]] + [float(v) for v in r[2:]] for r in sol.rows()],
            "verification": {"ok": report.ok, "violations": [vars(v) for v in report.violations]},
        }
        _emit(args, lambda fh: json.dump(payload, fh, indent=1, default=str))
    else:
        _emit(args, sol.write_csv)
    _info(args, f"root X0 = {sol.x[0]:.2f}  A0 = {sol.a[0]:.2f}  nodes = {tree.n_nodes}  K = {tree.K}")
    _info(args, report.summary())
    return EXIT_OK if report.ok else EXIT_VERIFY


def cmd_simulate(args) -> int:
    _require(args, "K")
    if args.binomial:
        s0, u1, u2, p = args.binomial
        model = stochastic.TwoPoint(u1, u2, p)
    elif args.gbm:
        s0 = args.s0
        model = stochastic.LogNormal(*args.gbm)
    else:
        raise UsageError("simulate needs --gbm or --binomial")
    a = _growth_constant(args, model)
    pc = iid.ProjectionConstants.constant(a, args.K, args.terminal_d)
    sim = stochastic.simulate_paths(model, s0, args.K, args.n_paths, args.seed)
    x, acct = iid.x_closed_form(pc, sim.paths)
    summary = {"a": a, "a_terminal": args.terminal_d, "z": iid.rates_from_constants(pc).tolist()}
    summary.update(stochastic.path_summary(sim, x, acct))

    if args.format == "json":
        payload = {"s": sim.paths.tolist(), "x": x.tolist(), "a": acct.tolist()}
        _emit(args, lambda fh: json.dump(payload, fh))
    else:
        _emit(args, lambda fh: stochastic.write_paths_csv(fh, sim, x, acct))
    if args.summary:
        with open(args.summary, "w") as fh:
            json.dump(summary, fh, indent=1)
    else:
        _info(args, json.dumps(summary, indent=1))
    _info(args, f"a = {a:.6f}  increase frequency = {summary['increase_frequency']:.4f}"
                f" (se {summary['increase_frequency_se']:.4f})")
    return EXIT_OK


def _report(args, fields: dict, lines: list):
    if args.format == "json":
        _emit(args, lambda fh: (json.dump(fields, fh, indent=1), fh.write("\n")))
    else:
        _emit(args, lambda fh: fh.write("\n".join(lines) + "\n"))


def cmd_perpetual(args) -> int:
    if args.a is not None:
        a_values = args.a
    elif args.a_cycle:
        cycle = list(args.a_cycle)
        a_values = lambda k: cycle[k % len(cycle)]  # noqa: E731
    else:
        raise UsageError("perpetual needs --a or --a-cycle")
    res = iid.perpetual_z0_max(a_values, args.probe)
    fields = {"z0_max": res.value, "attained": res.attained, "probe": res.probe, "analytic": res.analytic}
    lines = [f"z0_max = {res.value:.6f} ({'attained' if res.attained else 'not attained'}, probe {res.probe})"]
    if args.z0 is not None:
        z = iid.PerpetualPlan(a_values, args.z0).take(args.steps)
        fields["z"] = z.tolist()
        lines.append("z = " + ", ".join(f"{v:.6f}" for v in z))
    _report(args, fields, lines)
    return EXIT_OK


def cmd_drawdown(args) -> int:
    _require(args, "K")
    if args.gbm:
        model = stochastic.LogNormal(*args.gbm)
    elif args.fixed_rate is not None:
        model = stochastic.FixedRate(args.fixed_rate)
    else:
        raise UsageError("drawdown needs --fixed-rate or --gbm")
    if args.annuity_factor is not None:
        factor = args.annuity_factor
    elif args.life_table:
        _require(args, "age")
        with open(args.life_table, newline="") as fh:
            table = actuarial.read_annuity_factors(fh)
        if args.age + args.K not in table:
            raise UsageError(f"life table has no factor for age {args.age + args.K}")
        factor = table[args.age + args.K]
    else:
        factor = actuarial.annuity_certain(args.i, args.K + 1)
    basis = actuarial.AnnuityBasis(args.i, factor, args.age, args.K)
    plan = actuarial.DrawdownPlan(args.s0, args.d, model, args.K, args.c)
    if args.limit is not None:
        res = actuarial.drawdown_solve_limit(plan, basis, args.limit)
        lines = [f"d_L = {res.d:.9f}", f"X0 = {res.x0:.2f}", f"expected annuity = {res.expected_annuity:.2f}"]
    else:
        res = actuarial.drawdown_initial_rate(plan, basis)
        lines = [f"X0 = {res.x0:.2f}", f"expected annuity = {res.expected_annuity:.2f}"]
    fields = {"d": res.d, "x0": res.x0, "expected_annuity": res.expected_annuity, "annuity_factor": factor}
    _report(args, fields, lines)
    return EXIT_OK


def cmd_bonus(args) -> int:
    _require(args, "sum_assured", "survivors", "free_assets")
    if args.assurance_table:
        with open(args.assurance_table, newline="") as fh:
            factors = actuarial.read_assurance_factors(fh)
    elif args.assurance_factors:
        factors = np.array(args.assurance_factors)
    else:
        raise UsageError("bonus needs --assurance-factors or --assurance-table")
    K = len(args.survivors) - 1
    if args.binomial:
        u1, u2, p = args.binomial
        r = build_binomial(1.0, u1, u2, p, K)
        spec = _projection_spec(args, K)
        model = None
    else:
        if args.gbm:
            model = stochastic.LogNormal(*args.gbm)
            r = stochastic.simulate_paths(model, 1.0, K, args.n_paths, args.seed).paths
        elif args.fixed_rate is not None:
            model = stochastic.FixedRate(args.fixed_rate)
            r = (1.0 + args.fixed_rate) ** np.arange(K + 1)
        else:
            raise UsageError("bonus needs --fixed-rate, --gbm or --binomial")
    fund = actuarial.BonusFund(args.sum_assured, args.survivors, factors, args.free_assets, r)
    if model is not None:
        spec = actuarial.bonus_constants(fund, _growth_constant(args, model), args.terminal_d)
    sched = actuarial.bonus_schedule(fund, spec)
    if args.format == "json":
        payload = {"k": sched.k.tolist(), "N_k": sched.survivors.tolist(), "F_k": sched.liability.tolist(),
                   "b_k": sched.b.tolist(), "cash": sched.cash.tolist(), "residual": sched.residual.tolist()}
        if sched.node_ids is not None:
            payload["node_id"] = sched.node_ids
        _emit(args, lambda fh: json.dump(payload, fh, indent=1, default=str))
    else:
        _emit(args, sched.write_csv)
    cash, resid = np.atleast_2d(sched.cash), np.atleast_2d(sched.residual)
    _info(args, f"first cash bonus = {cash[0, 0]:.2f}  final residual = {resid[0, -1]:.2f}")
    return EXIT_OK


COMMANDS = {
    "tree-solve": cmd_tree_solve,
    "simulate": cmd_simulate,
    "perpetual": cmd_perpetual,
    "drawdown": cmd_drawdown,
    "bonus": cmd_bonus,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (PHPPError, UsageError, ValueError, OSError, csv.Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
