"""Command-line front end: reproducible runs with a manifest written before any output.

Exit codes: 0 success, 1 an experiment check failed, 2 input error, 3 budget refusal.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .adversary import STRATEGIES, AttackConfig, attack, exhaustive_classical_attack
from .bounds import (
    birthday_scaling_experiment,
    bt09_constants,
    completeness_curve_cd10,
    n_squared_scaling_experiment,
)
from .csp import BudgetError, ContractError, best_coloring, max_satisfiable_fraction
from .files import (
    COLORING_SCHEMA,
    INSTANCE_SCHEMA,
    STATE_SCHEMA,
    attack_result_to_dict,
    file_sha256,
    load_coloring,
    load_instance,
    load_state,
    save_state,
    write_json_atomic,
    write_text_atomic,
)
from .states import from_coloring
from .verifier import (
    Z_RULES,
    VerifierConfig,
    reports_to_csv,
    run_verifier_sampled,
    verifier_breakdown,
    z_from_rule,
)

EXIT_OK, EXIT_CLAIM, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3

EPILOG = f"""\
file schemas
  instance: {INSTANCE_SCHEMA}
  coloring: {COLORING_SCHEMA}
  state:    {STATE_SCHEMA}

budget overrides (environment)
  QMALAB_ENUM_CAP    brute-force coloring / exact Cons enumeration cap (default 1e7)
  QMALAB_SAMPLE_CAP  Monte Carlo sample cap (default 1e8)
  QMALAB_KAPPA_CAP   largest prover count evaluated exactly by enumeration (default 6)

exit codes
  0 success, 1 experiment check failed, 2 input error, 3 budget refusal
"""


def _int_list(text: str) -> list[int]:
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


class Run:
    """Output directory bookkeeping; the manifest is written before anything else."""

    def __init__(self, args, inputs: list[str]):
        self.out = Path(args.out)
        self.outputs: list[str] = []
        config = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
        self.manifest = {
            "command": args.command,
            "config": config,
            "seed": getattr(args, "seed", None),
            "inputs": {p: file_sha256(p) for p in inputs},
            "version": __version__,
            "outputs": [],
        }

    def plan(self, *names: str) -> None:
        self.outputs = [str(self.out / n) for n in names]
        self.manifest["outputs"] = self.outputs
        write_json_atomic(self.out / "manifest.json", self.manifest)

    def json(self, name: str, obj) -> None:
        write_json_atomic(self.out / name, obj)

    def text(self, name: str, text: str) -> None:
        write_text_atomic(self.out / name, text)


def _verifier_config(args, k: int) -> VerifierConfig:
    if args.protocol == "BT09":
        return VerifierConfig("BT09", 2, 0.0, args.edge_mode)
    kappa = args.kappa
    try:
        z = float(args.z)
    except ValueError:
        z = z_from_rule(args.z, kappa, k)
    return VerifierConfig("CD10", kappa, z, args.edge_mode)


def _check_inputs(paths: list[str]) -> None:
    for p in paths:
        if not Path(p).is_file():
            raise ContractError(f"{p}: file not found")


# ---------------------------------------------------------------- commands


def cmd_simulate(args) -> int:
    _check_inputs([args.instance, *args.proofs])
    run = Run(args, [args.instance, *args.proofs])
    inst = load_instance(args.instance)
    states = [load_state(p, inst) for p in args.proofs]
    cfg = _verifier_config(args, inst.alphabet_size)
    if len(states) != cfg.kappa:
        raise ContractError(f"{cfg.protocol} with kappa={cfg.kappa} needs {cfg.kappa} proof files, got {len(states)}")
    run.plan("report.json")
    doc = {"config": asdict(cfg), "instance": inst.name, "N": inst.n_vertices, "K": inst.alphabet_size}
    try:
        breakdown = verifier_breakdown(cfg, inst, states)
        doc["exact"] = breakdown
        doc["acceptance_exact"] = 1 - breakdown["Overall"]
    except BudgetError as exc:
        doc["exact"] = None
        doc["acceptance_exact"] = None
        doc["exact_note"] = str(exc)
        if not args.samples:
            raise
    if args.samples:
        reports = run_verifier_sampled(cfg, inst, states, args.samples, args.seed)
        doc["reports"] = [r.to_dict() for r in reports]
        doc["acceptance_sampled"] = 1 - reports[-1].sampled_reject
    run.json("report.json", doc)
    print(f"acceptance exact={_fmt(doc['acceptance_exact'])} sampled={_fmt(doc.get('acceptance_sampled'))}")
    return EXIT_OK


def cmd_honest(args) -> int:
    inputs = [args.instance] + ([args.coloring] if args.coloring else [])
    _check_inputs(inputs)
    run = Run(args, inputs)
    inst = load_instance(args.instance)
    if args.coloring:
        col = load_coloring(args.coloring, inst)
        frac = None
    else:
        col, frac = best_coloring(inst)
    state = from_coloring(inst, col)
    names = [f"proof_{i}.json" for i in range(args.kappa)]
    run.plan(*names, "coloring.json")
    for name in names:
        save_state(state, run.out / name)
    run.json("coloring.json", {"colors": list(col.colors), "satisfied_fraction": None if frac is None else str(frac)})
    print(f"wrote {args.kappa} honest proofs to {run.out}")
    return EXIT_OK


def cmd_attack(args) -> int:
    _check_inputs([args.instance])
    run = Run(args, [args.instance])
    inst = load_instance(args.instance)
    vcfg = _verifier_config(args, inst.alphabet_size)
    cfg = AttackConfig(
        verifier=vcfg,
        restarts=args.restarts,
        max_iters=args.max_iters,
        step_size=args.step_size,
        gradient=args.gradient,
        seed=args.seed,
        strategy=args.strategy,
    )
    run.plan("attack.json", "traces.csv")
    if args.exhaustive:
        res = exhaustive_classical_attack(inst, cfg)
    else:
        res = attack(inst, cfg)
    doc = attack_result_to_dict(res)
    doc.pop("wall_time", None)  # keep the file reproducible
    try:
        doc["max_satisfiable_fraction"] = str(max_satisfiable_fraction(inst))
    except BudgetError:
        doc["max_satisfiable_fraction"] = None
    if vcfg.protocol == "BT09":
        c = bt09_constants(inst.n_vertices, inst.alphabet_size)
        doc["soundness_gap_s"] = str(c.s)
        doc["acceptance_floor_1_minus_s"] = float(1 - c.s)
    run.json("attack.json", doc)
    lines = ["restart,iteration,acceptance"]
    for r, trace in enumerate(res.traces):
        lines += [f"{r},{i},{v:.12g}" for i, v in trace]
    run.text("traces.csv", "\n".join(lines) + "\n")
    print(f"best acceptance {res.best_acceptance:.12g} over {len(res.traces)} restarts "
          f"({res.wall_time:.2f} s)", file=sys.stderr)
    return EXIT_OK


def cmd_bounds(args) -> int:
    run = Run(args, [])
    run.plan("bounds.json")
    c = bt09_constants(args.n, args.k)
    doc = {"N": args.n, "K": args.k, "exact": c.as_strings(), "float": c.as_floats(),
           "checks": {"delta==mu/2": c.delta * 2 == c.mu, "s==min/3": c.s * 3 == min(c.delta, c.mu, c.nu, c.xi)}}
    run.json("bounds.json", doc)
    for name, val in c.as_strings().items():
        print(f"{name} = {val} = {float(getattr(c, name)):.12g}")
    return EXIT_OK if all(doc["checks"].values()) else EXIT_CLAIM


def _emit_experiment(run: Run, stem: str, res, csv_rows: list[dict]) -> int:
    run.plan(f"{stem}.csv", f"{stem}.json")
    run.text(f"{stem}.csv", reports_to_csv(csv_rows))
    run.json(f"{stem}.json", res.to_dict())
    for name, ok in res.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    if res.slope is not None:
        print(f"fitted slope {res.slope:.6g}")
    return EXIT_OK if res.passed else EXIT_CLAIM


def cmd_remark_bt09(args) -> int:
    run = Run(args, [])
    res = n_squared_scaling_experiment(args.ns, args.k, args.edge_mode, self_loop=args.self_loop, seed=args.seed)
    rows = []
    for r in res.rows:
        for test, key in (("Swap", "swap"), ("Unif", "unif"), ("Cons", "cons")):
            rows.append({"N": r["N"], "K": r["K"], "kappa": 2, "test": test, "exact": r[key], "seed": args.seed})
    return _emit_experiment(run, "remark_bt09", res, rows)


def cmd_remark_cd10(args) -> int:
    run = Run(args, [])
    res = birthday_scaling_experiment(
        args.n, args.k, args.kappas, args.samples, args.seed,
        degree=args.degree, allow_prob=args.allow_prob, instance_seed=args.instance_seed, mode=args.edge_mode,
        doubling_kappa=None if args.no_doubling else args.doubling_kappa,
    )
    return _emit_experiment(run, "remark_cd10", res, res.rows)


def cmd_completeness(args) -> int:
    run = Run(args, [])
    res = completeness_curve_cd10(args.n, args.k, args.kappas, args.z_rule, seed=args.seed, degree=args.degree)
    rows = []
    for r in res.rows:
        rows.append({**r, "test": "CondUnif", "exact": r["condunif_reject"], "seed": args.seed})
        rows.append({**r, "test": "Overall", "exact": 1 - r["acceptance"], "seed": args.seed})
    return _emit_experiment(run, f"completeness_{args.z_rule}", res, rows)


def _fmt(x) -> str:
    return "n/a" if x is None else f"{x:.12g}"


# ---------------------------------------------------------------- parser


def _protocol_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--protocol", choices=("BT09", "CD10"), default="BT09")
    p.add_argument("--kappa", type=int, default=2, help="prover count (BT09 always uses 2)")
    p.add_argument("--z", default="scaled",
                   help=f"CondUnif threshold: a number or one of {', '.join(Z_RULES)} (default scaled)")
    p.add_argument("--edge-mode", choices=("as-listed", "symmetrized"), default="as-listed")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(prog="qmalab", description=__doc__, epilog=EPILOG, formatter_class=fmt)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="exact and sampled verifier run on proof files", epilog=EPILOG, formatter_class=fmt)
    p.add_argument("instance")
    p.add_argument("proofs", nargs="+", help="one state file per prover")
    _protocol_args(p)
    p.add_argument("--samples", type=int, default=0, help="Monte Carlo protocol runs (0 = exact only)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out/simulate")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("honest", help="write honest proof files for a coloring", epilog=EPILOG, formatter_class=fmt)
    p.add_argument("instance")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--coloring", help="coloring file")
    g.add_argument("--best-oracle", action="store_true", help="use the brute-force best coloring")
    p.add_argument("--kappa", type=int, default=2)
    p.add_argument("--out", default="out/honest")
    p.set_defaults(func=cmd_honest)

    p = sub.add_parser("attack", help="search for cheating product proofs", epilog=EPILOG, formatter_class=fmt)
    p.add_argument("instance")
    _protocol_args(p)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--step-size", type=float, default=0.1)
    p.add_argument("--gradient", choices=("analytic", "finite-difference"), default="finite-difference")
    p.add_argument("--strategy", choices=STRATEGIES, default="general-product")
    p.add_argument("--exhaustive", action="store_true", help="enumerate a discrete strategy class instead of searching")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out/attack")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("bounds", help="two-prover soundness constants as exact rationals", epilog=EPILOG, formatter_class=fmt)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", default="out/bounds")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("remark-bt09", help="Cons rejection vs N for one-bad-edge instances", epilog=EPILOG, formatter_class=fmt)
    p.add_argument("--ns", type=_int_list, default=[8, 16, 32, 64])
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--edge-mode", choices=("as-listed", "symmetrized"), default="as-listed")
    p.add_argument("--self-loop", action="store_true", help="put the bad edge on a self-loop")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out/remark_bt09")
    p.set_defaults(func=cmd_remark_bt09)

    p = sub.add_parser("remark-cd10", help="Cons rejection vs prover count (birthday scaling)", epilog=EPILOG, formatter_class=fmt)
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--kappas", type=_int_list, default=[4, 8, 16, 32])
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--allow-prob", type=float, default=0.6)
    p.add_argument("--instance-seed", type=int, default=1)
    p.add_argument("--edge-mode", choices=("as-listed", "symmetrized"), default="as-listed")
    p.add_argument("--doubling-kappa", type=int, default=8)
    p.add_argument("--no-doubling", action="store_true")
    p.add_argument("--out", default="out/remark_cd10")
    p.set_defaults(func=cmd_remark_cd10)

    p = sub.add_parser("completeness", help="CD10 honest acceptance vs prover count", epilog=EPILOG, formatter_class=fmt)
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--kappas", type=_int_list, default=[16, 32, 64, 128])
    p.add_argument("--z-rule", choices=Z_RULES, default="half-mean")
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out/completeness")
    p.set_defaults(func=cmd_completeness)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BudgetError as exc:
        print(f"budget refusal: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ContractError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
