"""Search for cheating two-prover proofs on small unsatisfiable instances and compare with 1 - s."""

import argparse
from pathlib import Path

import numpy as np

from qmalab.adversary import AttackConfig, attack, exhaustive_classical_attack
from qmalab.bounds import bt09_constants, check_bt09_lemma_chain
from qmalab.csp import generate_one_bad_edge, generate_regular_gap_instance
from qmalab.files import attack_result_to_dict, write_json_atomic


def instances(count, seed):
    out = []
    for i in range(count // 2):
        out.append(generate_one_bad_edge(3 + i % 6, 3, seed + i, self_loop=(i % 3 == 2))[0])
    s = seed
    while len(out) < count:
        g = generate_regular_gap_instance((6, 8)[len(out) % 2], 3, 3, s, mode="frustrated")
        s += 1
        if g.eta_certified and g.eta > 0:
            out.append(g.instance)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=10)
    ap.add_argument("--restarts", type=int, default=20)
    ap.add_argument("--gradient", choices=("analytic", "finite-difference"), default="analytic")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/soundness")
    args = ap.parse_args()

    worst_margin = np.inf
    for idx, inst in enumerate(instances(args.instances, args.seed)):
        res = attack(inst, AttackConfig(restarts=args.restarts, seed=args.seed + idx, gradient=args.gradient))
        classical = exhaustive_classical_attack(inst, AttackConfig(strategy="classical-mixture-support"))
        floor = 1 - bt09_constants(inst.n_vertices, inst.alphabet_size).s
        chain = check_bt09_lemma_chain(inst, *res.best_states, unsatisfiable=True)
        margin = float(floor) - max(res.best_acceptance, classical.best_acceptance)
        worst_margin = min(worst_margin, margin)
        doc = attack_result_to_dict(res)
        doc.update(instance=inst.name, floor=float(floor), classical=classical.best_acceptance,
                   lemma_chain=chain.to_dict())
        write_json_atomic(Path(args.out) / f"instance_{idx}.json", doc)
        print(f"{inst.name or idx}: ascent {res.best_acceptance:.9f} classical {classical.best_acceptance:.9f} "
              f"floor {float(floor):.12f} premises {sum(chain.premises.values())}/4")
    print(f"smallest margin below 1 - s: {worst_margin:.3g}")


if __name__ == "__main__":
    main()
