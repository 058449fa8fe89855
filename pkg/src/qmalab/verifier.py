"""The Swap / Unif / CondUnif / Cons tests and the two- and kappa-prover verifiers.

Every test has an exact rejection probability for product-state proofs and a
seeded sampler that runs the test logic on simulated measurement outcomes.
Measurement outcomes on an N x K register pair are flattened as x = v * K + j.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .csp import BudgetError, ContractError, CspInstance, enum_cap, with_edge_mode
from .states import ColoringState, apply_fourier, swap_reject_prob

DEFAULT_KAPPA_CAP = 6
CHUNK = 1 << 14

TEST_NAMES = ("Swap", "Unif", "UnifPair", "CondUnif", "ColCons", "EdgeCons", "Cons", "Overall")


def kappa_cap() -> int:
    return int(os.environ.get("QMALAB_KAPPA_CAP", DEFAULT_KAPPA_CAP))


def sample_cap() -> int:
    return int(os.environ.get("QMALAB_SAMPLE_CAP", 10**8))


@dataclass
class TestReport:
    __test__ = False  # not a pytest class

    test_name: str
    exact_reject: float | None = None
    sampled_reject: float | None = None
    n_samples: int = 0
    seed: int | None = None
    std_error: float | None = None

    @property
    def consistent(self) -> bool | None:
        """|exact - sampled| <= 6 standard errors, or None when either side is absent."""
        if self.exact_reject is None or self.sampled_reject is None:
            return None
        return abs(self.exact_reject - self.sampled_reject) <= 6 * (self.std_error or 0.0) + 1e-15

    def to_dict(self) -> dict:
        d = asdict(self)
        d["consistent"] = self.consistent
        return d


@dataclass(frozen=True)
class VerifierConfig:
    protocol: str = "BT09"
    kappa: int = 2
    z: float = 0.0  # absolute count threshold of CondUnif
    edge_mode: str = "as-listed"

    def __post_init__(self):
        if self.protocol == "BT09":
            if self.kappa != 2:
                raise ContractError(f"BT09 uses exactly 2 provers, got kappa={self.kappa}")
        elif self.protocol == "CD10":
            if self.kappa < 2:
                raise ContractError(f"CD10 needs kappa >= 2, got {self.kappa}")
            if not 0 <= self.z <= self.kappa:
                raise ContractError(f"threshold z={self.z} outside [0, {self.kappa}]")
        else:
            raise ContractError(f"unknown protocol {self.protocol!r}")
        if self.edge_mode not in ("as-listed", "symmetrized"):
            raise ContractError(f"unknown edge mode {self.edge_mode!r}")


Z_RULES = ("unscaled", "scaled", "half-mean")


def z_from_rule(rule: str, kappa: int, k: int) -> float:
    """Absolute CondUnif threshold for a named rule.

    ``unscaled`` is 0.99 kappa, ``scaled`` 0.99 kappa / K (the honest
    zero-color count has mean kappa / K), ``half-mean`` kappa / (2K).
    """
    if rule == "unscaled":
        return 0.99 * kappa
    if rule == "scaled":
        return 0.99 * kappa / k
    if rule == "half-mean":
        return kappa / (2 * k)
    raise ContractError(f"unknown z rule {rule!r}; expected one of {Z_RULES}")


def cd10_config(kappa: int, k: int, z_rule: str = "scaled", edge_mode: str = "as-listed") -> VerifierConfig:
    return VerifierConfig("CD10", kappa, z_from_rule(z_rule, kappa, k), edge_mode)


# ---------------------------------------------------------------- Cons tables


def _dims(inst: CspInstance, states: Sequence[ColoringState]) -> None:
    for i, s in enumerate(states):
        if (s.n, s.k) != (inst.n_vertices, inst.alphabet_size):
            raise ContractError(
                f"proof {i} has (N,K)={s.n, s.k}, instance has {inst.n_vertices, inst.alphabet_size}"
            )


def colcons_matrix(n: int, k: int) -> np.ndarray:
    """C[x, y] = 1 iff x, y share a vertex but differ in color."""
    same_v = np.kron(np.eye(n, dtype=bool), np.ones((k, k), dtype=bool))
    return same_v & ~np.eye(n * k, dtype=bool)


def edgecons_matrix(inst: CspInstance, mode: str = "as-listed") -> np.ndarray:
    """E[x, y] = 1 iff some ordering of the two outcomes lands on a listed edge whose relation fails.

    Symmetric because the test quantifies over all ordered pairs of distinct provers.
    """
    inst = with_edge_mode(inst, mode)
    n, k = inst.n_vertices, inst.alphabet_size
    m = np.zeros((n, k, n, k), dtype=bool)
    for e in inst.edges:
        m[e.u, :, e.v, :] |= ~e.allowed
    m = m.reshape(n * k, n * k)
    return m | m.T


def fire_matrix(inst: CspInstance, mode: str = "as-listed") -> np.ndarray:
    """Pairwise rejection table of the Cons test (color clause OR edge clause)."""
    return colcons_matrix(inst.n_vertices, inst.alphabet_size) | edgecons_matrix(inst, mode)


def _probs(state: ColoringState) -> np.ndarray:
    return (np.abs(state.joint()) ** 2).ravel()


def colcons_reject(s1: ColoringState, s2: ColoringState) -> float:
    """Sum_v Sum_j Sum_{j' != j} |a1_v B1_vj|^2 |a2_v B2_vj'|^2."""
    p1 = np.abs(s1.joint()) ** 2
    p2 = np.abs(s2.joint()) ** 2
    return float((p1.sum(1) * p2.sum(1)).sum() - (p1 * p2).sum())


def edgecons_reject(inst: CspInstance, s1: ColoringState, s2: ColoringState, mode: str = "as-listed") -> float:
    _dims(inst, (s1, s2))
    return float(_probs(s1) @ edgecons_matrix(inst, mode) @ _probs(s2))


def cons_joint_reject(inst: CspInstance, s1: ColoringState, s2: ColoringState, mode: str = "as-listed") -> float:
    """Probability that both the color clause and the edge clause fire."""
    _dims(inst, (s1, s2))
    both = colcons_matrix(inst.n_vertices, inst.alphabet_size) & edgecons_matrix(inst, mode)
    return float(_probs(s1) @ both @ _probs(s2))


def cons_reject_enumerated(inst: CspInstance, s1: ColoringState, s2: ColoringState, mode: str = "as-listed") -> float:
    """Two-prover Cons rejection by looping over outcome pairs and applying both clauses verbatim.

    Independent of the precomputed pairwise tables; used as a test oracle.
    """
    _dims(inst, (s1, s2))
    inst = with_edge_mode(inst, mode)
    p1, p2 = np.abs(s1.joint()) ** 2, np.abs(s2.joint()) ** 2
    out1 = [(v, j, p1[v, j]) for v, j in zip(*np.nonzero(p1))]
    out2 = [(v, j, p2[v, j]) for v, j in zip(*np.nonzero(p2))]
    total = 0.0
    for v1, j1, w1 in out1:
        for v2, j2, w2 in out2:
            reject = v1 == v2 and j1 != j2
            for (a, ja), (b, jb) in (((v1, j1), (v2, j2)), ((v2, j2), (v1, j1))):
                e = inst.edge(a, b)
                if e is not None and not e.allowed[ja, jb]:
                    reject = True
            if reject:
                total += w1 * w2
    return float(total)


def cons_reject_exact(
    inst: CspInstance,
    states: Sequence[ColoringState],
    mode: str = "as-listed",
    *,
    cap: int | None = None,
    max_kappa: int | None = None,
) -> float:
    """Exact rejection of Cons by enumerating every outcome tuple of the provers.

    Only outcomes with nonzero probability are enumerated; the enumeration is
    refused when kappa exceeds ``max_kappa`` or the tuple count exceeds ``cap``.
    Proofs whose reachable outcomes contain no firing pair return 0 for any kappa.
    """
    kappa = len(states)
    if kappa < 2:
        raise ContractError(f"Cons needs at least 2 proofs, got {kappa}")
    _dims(inst, states)
    fire = fire_matrix(inst, mode)
    probs = [_probs(s) for s in states]
    if kappa == 2:
        return float(probs[0] @ fire @ probs[1])
    supports = [np.flatnonzero(p > 0) for p in probs]
    union = np.unique(np.concatenate(supports))
    if not fire[np.ix_(union, union)].any():
        return 0.0  # no pair of reachable outcomes can fire, for any kappa
    cap = enum_cap() if cap is None else cap
    max_kappa = kappa_cap() if max_kappa is None else max_kappa
    if kappa > max_kappa:
        raise BudgetError(f"exact Cons refused for kappa={kappa} > {max_kappa}; sample instead")
    sizes = [s.size for s in supports]
    total = math.prod(sizes)
    if total > cap:
        raise BudgetError(f"exact Cons refused: {total} outcome tuples exceed cap {cap}; sample instead")
    accept = 0.0
    chunk = 1 << 18
    for start in range(0, total, chunk):
        flat = np.arange(start, min(total, start + chunk))
        idx = np.unravel_index(flat, sizes)
        xs = [supports[i][idx[i]] for i in range(kappa)]
        weight = np.ones(flat.size)
        for i in range(kappa):
            weight *= probs[i][xs[i]]
        ok = np.ones(flat.size, dtype=bool)
        for i in range(kappa):
            for j in range(i + 1, kappa):
                ok &= ~fire[xs[i], xs[j]]
        accept += weight[ok].sum()
    return float(max(0.0, 1.0 - accept))


# ---------------------------------------------------------------- Unif / CondUnif


def unif_reject_exact(state: ColoringState) -> float:
    """Mass of outcomes (v != 0, j = 0) after F_N (x) F_K."""
    phi = apply_fourier(state, on_vertex=True, on_color=True)
    return float((np.abs(phi[1:, 0]) ** 2).sum())


def unif_reject_closed(psi: np.ndarray) -> float:
    """Same quantity from the joint amplitudes without forming the transforms.

    Column 0 of F_K is uniform, so the j = 0 slice of the transformed state is
    F_N applied to the row sums s of psi, scaled by 1/sqrt(K); removing the
    v = 0 Fourier component leaves (|s|^2 - |sum s|^2 / N) / K.
    """
    n, k = psi.shape
    s = psi.sum(axis=1)
    return float(max(0.0, (np.vdot(s, s).real - abs(s.sum()) ** 2 / n) / k))


def cond_unif_components(state: ColoringState) -> tuple[float, float]:
    """(q, r): P[j = 0] and P[j = 0 and v = 0] after F_N (x) F_K."""
    phi = apply_fourier(state, on_vertex=True, on_color=True)
    col0 = np.abs(phi[:, 0]) ** 2
    return float(col0.sum()), float(col0[0])


def _min_count(z: float) -> int:
    # reject iff count < z; tolerate float noise in derived thresholds
    return max(0, math.ceil(z - 1e-9))


def cond_unif_accept_dp(q: Sequence[float], r: Sequence[float], z: float) -> float:
    """P[no prover lands on (j=0, v!=0) and #{j_i = 0} >= z] by dynamic programming."""
    dist = np.zeros(len(q) + 1)
    dist[0] = 1.0
    for qi, ri in zip(q, r):
        nxt = dist * (1 - qi)
        nxt[1:] += dist[:-1] * ri
        dist = nxt
    return float(dist[_min_count(z):].sum())


def cond_unif_accept_bruteforce(q: Sequence[float], r: Sequence[float], z: float) -> float:
    """Enumerate the 3^kappa per-prover outcome classes (good zero, bad zero, nonzero)."""
    import itertools

    total = 0.0
    need = _min_count(z)
    for classes in itertools.product(range(3), repeat=len(q)):
        if 1 in classes or classes.count(0) < need:
            continue
        w = 1.0
        for c, qi, ri in zip(classes, q, r):
            w *= ri if c == 0 else (1 - qi)
        total += w
    return total


def cond_unif_reject_exact(states: Sequence[ColoringState], z: float) -> float:
    kappa = len(states)
    if kappa < 1:
        raise ContractError("CondUnif needs at least one proof")
    dims = {(s.n, s.k) for s in states}
    if len(dims) != 1:
        raise ContractError(f"proofs have mismatched dimensions {sorted(dims)}")
    if not 0 <= z <= kappa:
        raise ContractError(f"threshold z={z} outside [0, {kappa}]")
    q, r = zip(*(cond_unif_components(s) for s in states))
    return float(max(0.0, 1.0 - cond_unif_accept_dp(q, r, z)))


# ---------------------------------------------------------------- protocols


def _check_arity(config: VerifierConfig, states) -> None:
    if len(states) != config.kappa:
        raise ContractError(f"{config.protocol} with kappa={config.kappa} received {len(states)} proofs")


def verifier_breakdown(config: VerifierConfig, inst: CspInstance, states: Sequence[ColoringState]) -> dict:
    """Exact per-test rejection probabilities and the overall rejection."""
    _check_arity(config, states)
    _dims(inst, states)
    if config.protocol == "BT09":
        s1, s2 = states
        u1, u2 = unif_reject_exact(s1), unif_reject_exact(s2)
        out = {
            "Swap": swap_reject_prob(s1, s2),
            "Cons": cons_reject_exact(inst, states, config.edge_mode),
            "Unif1": u1,
            "Unif2": u2,
            "UnifPair": 1 - (1 - u1) * (1 - u2),
        }
        out["Overall"] = (out["Swap"] + out["Cons"] + out["UnifPair"]) / 3
    else:
        out = {
            "CondUnif": cond_unif_reject_exact(states, config.z),
            "Cons": cons_reject_exact(inst, states, config.edge_mode),
        }
        out["Overall"] = (out["CondUnif"] + out["Cons"]) / 2
    return out


def run_verifier_exact(config: VerifierConfig, inst: CspInstance, states: Sequence[ColoringState]) -> float:
    """Overall acceptance probability of the verifier on a product proof."""
    return 1.0 - verifier_breakdown(config, inst, states)["Overall"]


def swap_test_report(s1: ColoringState, s2: ColoringState, n_samples: int = 0, seed: int = 0) -> TestReport:
    p = swap_reject_prob(s1, s2)
    rep = TestReport("Swap", exact_reject=p, seed=seed)
    if n_samples:
        hits = sum(int((rng.random(size) < p).sum()) for rng, size in _streams(seed, n_samples))
        _fill(rep, hits, n_samples)
    return rep


# ---------------------------------------------------------------- sampling


def _streams(seed, n: int):
    """Independent generators for consecutive fixed-size chunks of n samples."""
    n_chunks = -(-n // CHUNK)
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(n_chunks)):
        yield np.random.default_rng(child), min(CHUNK, n - i * CHUNK)


def _sample_outcomes(rng, probs: np.ndarray, size: int) -> np.ndarray:
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    return np.minimum(np.searchsorted(cdf, rng.random(size), side="right"), probs.size - 1)


def _fill(rep: TestReport, hits: int, n: int) -> TestReport:
    rep.n_samples = n
    rep.sampled_reject = hits / n if n else None
    p = rep.exact_reject if rep.exact_reject is not None else rep.sampled_reject
    rep.std_error = math.sqrt(p * (1 - p) / n) if n else None
    return rep


def _swap_hits(rng, size, s1, s2) -> int:
    return int((rng.random(size) < swap_reject_prob(s1, s2)).sum())


def _unif_hits(rng, size, state) -> int:
    phi = apply_fourier(state, True, True)
    x = _sample_outcomes(rng, (np.abs(phi) ** 2).ravel(), size)
    v, j = np.divmod(x, state.k)
    return int(((j == 0) & (v != 0)).sum())


def _unif_pair_hits(rng, size, s1, s2) -> int:
    k = s1.k
    bad = np.zeros(size, dtype=bool)
    for s in (s1, s2):
        phi = apply_fourier(s, True, True)
        v, j = np.divmod(_sample_outcomes(rng, (np.abs(phi) ** 2).ravel(), size), k)
        bad |= (j == 0) & (v != 0)
    return int(bad.sum())


def _cond_unif_hits(rng, size, states, z) -> int:
    k = states[0].k
    zeros = np.zeros(size, dtype=np.int64)
    bad = np.zeros(size, dtype=bool)
    for s in states:
        phi = apply_fourier(s, True, True)
        v, j = np.divmod(_sample_outcomes(rng, (np.abs(phi) ** 2).ravel(), size), k)
        zeros += j == 0
        bad |= (j == 0) & (v != 0)
    return int(((zeros < z) | bad).sum())


def _cons_hits(rng, size, fire, probs) -> int:
    xs = [_sample_outcomes(rng, p, size) for p in probs]
    bad = np.zeros(size, dtype=bool)
    for i in range(len(xs)):
        for j in range(i + 1, len(xs)):
            bad |= fire[xs[i], xs[j]]
    return int(bad.sum())


def sample_test(
    test: str,
    states: Sequence[ColoringState],
    n_samples: int,
    seed: int,
    *,
    inst: CspInstance | None = None,
    z: float = 0.0,
    mode: str = "as-listed",
    exact: bool = True,
) -> TestReport:
    """Run one test ``n_samples`` times on simulated outcomes; attach the exact value when feasible."""
    if n_samples < 1:
        raise ContractError(f"n_samples must be >= 1, got {n_samples}")
    if n_samples > sample_cap():
        raise BudgetError(f"{n_samples} samples exceed the sample cap {sample_cap()}")
    rep = TestReport(test, seed=seed)
    if test == "Swap":
        fn, args = _swap_hits, tuple(states)
        rep.exact_reject = swap_reject_prob(*states)
    elif test == "Unif":
        fn, args = _unif_hits, (states[0],)
        rep.exact_reject = unif_reject_exact(states[0])
    elif test == "UnifPair":
        fn, args = _unif_pair_hits, tuple(states)
        u1, u2 = unif_reject_exact(states[0]), unif_reject_exact(states[1])
        rep.exact_reject = 1 - (1 - u1) * (1 - u2)
    elif test == "CondUnif":
        fn, args = _cond_unif_hits, (list(states), z)
        rep.exact_reject = cond_unif_reject_exact(states, z)
    elif test == "Cons":
        fn, args = _cons_hits, (fire_matrix(inst, mode), [_probs(s) for s in states])
        if exact:
            try:
                rep.exact_reject = cons_reject_exact(inst, states, mode)
            except BudgetError:
                rep.exact_reject = None
    else:
        raise ContractError(f"cannot sample test {test!r}")
    hits = sum(fn(rng, size, *args) for rng, size in _streams(seed, n_samples))
    return _fill(rep, hits, n_samples)


def run_verifier_sampled(
    config: VerifierConfig,
    inst: CspInstance,
    states: Sequence[ColoringState],
    n_samples: int,
    seed: int,
) -> list[TestReport]:
    """Simulate full protocol runs: draw the test index uniformly, then run that test.

    Returns one report per test (over the runs that selected it) and an
    ``Overall`` report over all runs.
    """
    _check_arity(config, states)
    _dims(inst, states)
    if n_samples < 1:
        raise ContractError(f"n_samples must be >= 1, got {n_samples}")
    tests = ["Swap", "Cons", "UnifPair"] if config.protocol == "BT09" else ["CondUnif", "Cons"]
    selector_seed, *test_seeds = np.random.SeedSequence(seed).spawn(len(tests) + 1)
    picks = np.random.default_rng(selector_seed).integers(0, len(tests), size=n_samples)
    counts = np.bincount(picks, minlength=len(tests))
    reports = []
    hits_total = 0
    for t, name in enumerate(tests):
        sub_seed = int(test_seeds[t].generate_state(1)[0])
        if counts[t] == 0:
            reports.append(TestReport(name, seed=sub_seed))
            continue
        rep = sample_test(name, states, int(counts[t]), sub_seed, inst=inst, z=config.z, mode=config.edge_mode)
        hits_total += round(rep.sampled_reject * rep.n_samples)
        reports.append(rep)
    overall = TestReport("Overall", seed=seed)
    try:
        overall.exact_reject = verifier_breakdown(config, inst, states)["Overall"]
    except BudgetError:
        overall.exact_reject = None
    reports.append(_fill(overall, hits_total, n_samples))
    return reports


# ---------------------------------------------------------------- export


def reports_to_json(reports: Sequence[TestReport], config: VerifierConfig | None = None, **extra) -> str:
    doc = {"reports": [r.to_dict() for r in reports]}
    if config is not None:
        doc["config"] = asdict(config)
    doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True, default=_jsonable)


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


CSV_COLUMNS = ("N", "K", "kappa", "test", "exact", "sampled", "stderr", "seed")


def reports_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({c: _fmt(row.get(c)) for c in CSV_COLUMNS})
    return buf.getvalue()


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.12g}"
    return "" if x is None else x
