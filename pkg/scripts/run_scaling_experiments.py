"""Run both tightness experiments and the completeness curves, writing CSV and JSON to results/."""

import argparse
from pathlib import Path

from qmalab.bounds import birthday_scaling_experiment, completeness_curve_cd10, n_squared_scaling_experiment
from qmalab.files import write_json_atomic, write_text_atomic
from qmalab.verifier import Z_RULES, reports_to_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--samples", type=int, default=100_000)
    args = ap.parse_args()
    out = Path(args.out)

    for self_loop in (False, True):
        for mode in ("as-listed", "symmetrized"):
            res = n_squared_scaling_experiment((8, 16, 32, 64), 3, mode, self_loop=self_loop, seed=args.seed)
            stem = f"n_squared_{mode}{'_loop' if self_loop else ''}"
            rows = [{"N": r["N"], "K": r["K"], "kappa": 2, "test": "Cons", "exact": r["cons"], "seed": args.seed}
                    for r in res.rows]
            write_text_atomic(out / f"{stem}.csv", reports_to_csv(rows))
            write_json_atomic(out / f"{stem}.json", res.to_dict())
            print(f"{stem}: slope {res.slope:.4f} c={res.config['c']} passed={res.passed}")

    res = birthday_scaling_experiment(256, 3, (4, 8, 16, 32), args.samples, args.seed)
    write_text_atomic(out / "birthday.csv", reports_to_csv(res.rows))
    write_json_atomic(out / "birthday.json", res.to_dict())
    print(f"birthday: slope {res.slope:.4f} doubling ratio {res.config['doubling_ratio']:.3f} passed={res.passed}")

    for rule in Z_RULES:
        res = completeness_curve_cd10(12, 3, (8, 16, 32, 64, 128), rule, seed=args.seed)
        write_json_atomic(out / f"completeness_{rule}.json", res.to_dict())
        curve = ", ".join(f"{r['kappa']}:{1 - r['acceptance']:.3g}" for r in res.rows)
        print(f"completeness {rule}: 1-acceptance by kappa {curve}")


if __name__ == "__main__":
    main()
