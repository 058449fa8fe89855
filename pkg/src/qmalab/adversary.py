"""Search for cheating product proofs that maximise verifier acceptance.

Continuous search runs projected gradient ascent over the real and imaginary
parts of every register, renormalising each register after a step. Discrete
searches cover honest-looking proofs of arbitrary colorings, optionally
restricted to a vertex subset.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .csp import BudgetError, Coloring, ContractError, CspInstance, best_coloring, local_search_coloring
from .states import ColoringState, random_state
from .verifier import (
    VerifierConfig,
    fire_matrix,
    run_verifier_exact,
    run_verifier_sampled,
    unif_reject_closed,
)

STRATEGIES = ("general-product", "classical-superposition", "classical-mixture-support")


@dataclass(frozen=True)
class AttackConfig:
    verifier: VerifierConfig = field(default_factory=VerifierConfig)
    restarts: int = 20
    max_iters: int = 200
    step_size: float = 0.1
    step_decay: float = 0.5
    gradient: str = "finite-difference"  # or "analytic" (BT09 only)
    fd_step: float = 1e-5
    seed: int = 0
    strategy: str = "general-product"
    init_eps: float = 0.3  # noise scale of perturbed-honest starts
    max_failures: int = 10
    step_floor: float = 1e-12
    sampled_objective_samples: int = 20000

    def __post_init__(self):
        if self.restarts < 1:
            raise ContractError(f"restarts must be >= 1, got {self.restarts}")
        if self.max_iters < 0:
            raise ContractError(f"max_iters must be >= 0, got {self.max_iters}")
        if self.gradient not in ("analytic", "finite-difference"):
            raise ContractError(f"unknown gradient mode {self.gradient!r}")
        if self.gradient == "finite-difference" and self.fd_step <= 0:
            raise ContractError(f"finite-difference step must be > 0, got {self.fd_step}")
        if self.strategy not in STRATEGIES:
            raise ContractError(f"unknown strategy {self.strategy!r}")


@dataclass
class AttackResult:
    best_states: list[ColoringState]
    best_acceptance: float
    traces: list[list[tuple[int, float]]]
    config: AttackConfig
    wall_time: float
    best_coloring: Coloring | None = None
    notes: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "best_acceptance": self.best_acceptance,
            "best_rejection": 1.0 - self.best_acceptance,
            "restarts": len(self.traces),
            "wall_time": self.wall_time,
            "config": asdict(self.config),
            "best_coloring": None if self.best_coloring is None else list(self.best_coloring.colors),
            "notes": self.notes,
        }


# ---------------------------------------------------------------- BT09 objective


class Bt09Objective:
    """Exact BT09 rejection probability of a two-register-pair proof, with its gradient.

    Works on joint amplitudes psi = a (x) B; Swap, Cons and Unif are all
    low-degree polynomials in psi and its conjugate.
    """

    def __init__(self, inst: CspInstance, edge_mode: str = "as-listed"):
        self.n, self.k = inst.n_vertices, inst.alphabet_size
        self.fire = fire_matrix(inst, edge_mode).astype(float)

    def parts(self, psi1: np.ndarray, psi2: np.ndarray) -> dict:
        o = np.vdot(psi1, psi2)
        p1, p2 = np.abs(psi1.ravel()) ** 2, np.abs(psi2.ravel()) ** 2
        u1, u2 = unif_reject_closed(psi1), unif_reject_closed(psi2)
        swap = max(0.0, (1 - abs(o) ** 2) / 2)
        cons = float(p1 @ self.fire @ p2)
        pair = 1 - (1 - u1) * (1 - u2)
        return {"Swap": swap, "Cons": cons, "UnifPair": pair, "Overall": (swap + cons + pair) / 3}

    def rejection(self, psi1, psi2) -> float:
        return self.parts(psi1, psi2)["Overall"]

    def _unif_grad(self, psi):
        s = psi.sum(axis=1)
        g = 2 * (s - s.sum() / self.n) / self.k
        return np.repeat(g[:, None], self.k, axis=1)

    def psi_gradient(self, psi1, psi2):
        """d rejection / d Re psi + i d rejection / d Im psi, for both proofs."""
        o = np.vdot(psi1, psi2)
        p1, p2 = np.abs(psi1) ** 2, np.abs(psi2) ** 2
        u1, u2 = unif_reject_closed(psi1), unif_reject_closed(psi2)
        g1 = -psi2 * np.conj(o)
        g2 = -psi1 * o
        g1 = g1 + 2 * psi1 * (self.fire @ p2.ravel()).reshape(psi1.shape)
        g2 = g2 + 2 * psi2 * (self.fire.T @ p1.ravel()).reshape(psi2.shape)
        g1 = g1 + (1 - u2) * self._unif_grad(psi1)
        g2 = g2 + (1 - u1) * self._unif_grad(psi2)
        return g1 / 3, g2 / 3


# ---------------------------------------------------------------- parameterisation


def _pack(states: Sequence[ColoringState]) -> np.ndarray:
    parts = []
    for s in states:
        parts += [s.vertex_amp.real, s.vertex_amp.imag, s.color_amp.real.ravel(), s.color_amp.imag.ravel()]
    return np.concatenate(parts)


def _unpack_raw(x: np.ndarray, kappa: int, n: int, k: int):
    out = []
    step = 2 * n + 2 * n * k
    for i in range(kappa):
        y = x[i * step:(i + 1) * step]
        a = y[:n] + 1j * y[n:2 * n]
        b = (y[2 * n:2 * n + n * k] + 1j * y[2 * n + n * k:]).reshape(n, k)
        out.append((a, b))
    return out


def _project(x: np.ndarray, kappa: int, n: int, k: int) -> list[ColoringState]:
    return [ColoringState.normalized(a, b) for a, b in _unpack_raw(x, kappa, n, k)]


def _raw_joint(x, kappa, n, k):
    return [a[:, None] * b for a, b in _unpack_raw(x, kappa, n, k)]


def analytic_gradient(obj: Bt09Objective, x: np.ndarray) -> np.ndarray:
    """Gradient of BT09 acceptance with respect to the packed real parameters (no projection)."""
    n, k = obj.n, obj.k
    (a1, b1), (a2, b2) = _unpack_raw(x, 2, n, k)
    g1, g2 = obj.psi_gradient(a1[:, None] * b1, a2[:, None] * b2)
    parts = []
    for (a, b), g in (((a1, b1), g1), ((a2, b2), g2)):
        ga = (g * np.conj(b)).sum(axis=1)
        gb = g * np.conj(a)[:, None]
        parts += [ga.real, ga.imag, gb.real.ravel(), gb.imag.ravel()]
    return -np.concatenate(parts)


def fd_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, h: float) -> np.ndarray:
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


# ---------------------------------------------------------------- search


def _objective_factory(inst: CspInstance, cfg: AttackConfig, notes: list[str]):
    """acceptance(states) for the configured verifier, exact where feasible."""
    vcfg = cfg.verifier
    if vcfg.protocol == "BT09":
        obj = Bt09Objective(inst, vcfg.edge_mode)
        return (lambda states: 1.0 - obj.rejection(states[0].joint(), states[1].joint())), obj
    n, k = inst.n_vertices, inst.alphabet_size
    probe = [random_state(n, k, 0) for _ in range(vcfg.kappa)]
    try:
        run_verifier_exact(vcfg, inst, probe)
        return (lambda states: run_verifier_exact(vcfg, inst, states)), None
    except BudgetError as exc:
        notes.append(f"exact objective unavailable ({exc}); using sampled objective with "
                     f"{cfg.sampled_objective_samples} samples and a fixed seed")

    def sampled(states):
        reps = run_verifier_sampled(vcfg, inst, states, cfg.sampled_objective_samples, cfg.seed)
        return 1.0 - reps[-1].sampled_reject

    return sampled, None


def _initial_states(inst, cfg, rng, restart: int, base: Coloring | None) -> list[ColoringState]:
    n, k, kappa = inst.n_vertices, inst.alphabet_size, cfg.verifier.kappa
    if base is not None and restart == 0:
        return [random_state(n, k, rng, "perturbed-honest", eps=0.0, base=base)] * kappa
    if base is not None and restart % 2 == 1:
        return [random_state(n, k, rng, "perturbed-honest", eps=cfg.init_eps, base=base) for _ in range(kappa)]
    return [random_state(n, k, rng, "haar") for _ in range(kappa)]


def _ascend(x0, states0, accept, grad, cfg, kappa, n, k):
    """One restart of projected ascent with step halving; returns (states, value, trace)."""
    states, x = states0, x0
    value = accept(states)
    trace = [(0, value)]
    step, failures = cfg.step_size, 0
    for it in range(1, cfg.max_iters + 1):
        g = grad(x)
        norm = np.linalg.norm(g)
        if not np.isfinite(norm) or norm == 0:
            break
        while True:
            cand_states = _project(x + step * g / norm, kappa, n, k)
            cand = accept(cand_states)
            if cand >= value:
                break
            step *= cfg.step_decay
            failures += 1
            if failures >= cfg.max_failures or step < cfg.step_floor:
                return states, value, trace
        failures = 0
        states, value = cand_states, cand
        x = _pack(states)
        trace.append((it, value))
    return states, value, trace


def attack(inst: CspInstance, cfg: AttackConfig, base: Coloring | None = None) -> AttackResult:
    """Best cheating proof found by the configured search; deterministic in ``cfg.seed``.

    ``base`` seeds perturbed-honest starts; by default the brute-force best
    coloring (or a local-search coloring beyond the oracle cap) is used.
    """
    t0 = time.perf_counter()
    notes: list[str] = []
    if cfg.strategy != "general-product":
        res = _discrete_attack(inst, cfg, notes)
        res.wall_time = time.perf_counter() - t0
        return res

    n, k, kappa = inst.n_vertices, inst.alphabet_size, cfg.verifier.kappa
    accept, obj = _objective_factory(inst, cfg, notes)
    if base is None:
        try:
            base = best_coloring(inst)[0]
        except BudgetError:
            base = local_search_coloring(inst, seed=cfg.seed)
            notes.append("base coloring from local search")

    if cfg.gradient == "analytic" and obj is not None:
        grad = lambda x: analytic_gradient(obj, x)
    else:
        if cfg.gradient == "analytic":
            notes.append("analytic gradient unavailable for this protocol; using central differences")
        h = cfg.fd_step
        grad = lambda x: fd_gradient(lambda y: accept(_project(y, kappa, n, k)), x, h)

    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    best_states, best_value, traces = None, -np.inf, []
    for r, ss in enumerate(seeds):
        rng = np.random.default_rng(ss)
        start = _initial_states(inst, cfg, rng, r, base)
        states, value, trace = _ascend(_pack(start), start, accept, grad, cfg, kappa, n, k)
        traces.append(trace)
        if value > best_value:
            best_states, best_value = states, value

    return _finish(inst, cfg, best_states, best_value, traces, t0, notes, None)


def _finish(inst, cfg, states, value, traces, t0, notes, coloring) -> AttackResult:
    try:
        check = run_verifier_exact(cfg.verifier, inst, states)
        if abs(check - value) > 1e-9:
            raise AssertionError(f"re-verification mismatch: search {value!r} vs exact {check!r}")
        value = check
    except BudgetError:
        notes.append("best acceptance not re-verified exactly (kappa beyond exact cap)")
    return AttackResult(list(states), float(value), traces, cfg, time.perf_counter() - t0, coloring, notes)


# ---------------------------------------------------------------- discrete classes


def _mixture_state(n: int, k: int, assign: Sequence[int]) -> ColoringState:
    """Uniform over vertices with assign[v] < K, colored assign[v]; absent vertices get |0>."""
    assign = np.asarray(assign)
    present = assign < k
    a = present / np.sqrt(present.sum())
    b = np.zeros((n, k), dtype=complex)
    b[np.arange(n), np.where(present, assign, 0)] = 1
    return ColoringState(a.astype(complex), b)


def _bt09_classical_values(fire: np.ndarray, assigns: np.ndarray, n: int, k: int) -> np.ndarray:
    """BT09 acceptance of equal proofs uniform over present vertices, for many assignments at once."""
    present = assigns < k
    m = present.sum(axis=1)
    x = np.arange(n) * k + np.where(present, assigns, 0)
    pair = fire[x[:, :, None], x[:, None, :]] & present[:, :, None] & present[:, None, :]
    cons = pair.sum(axis=(1, 2)) / (m.astype(float) ** 2)
    u = (1 - m / n) / k
    unif_pair = 1 - (1 - u) ** 2
    return 1 - (cons + unif_pair) / 3


def _enumerate_assignments(n: int, base: int, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.empty((idx.size, n), dtype=np.int64)
    for v in range(n - 1, -1, -1):
        out[:, v] = idx % base
        idx //= base
    return out


def exhaustive_classical_attack(
    inst: CspInstance,
    cfg: AttackConfig,
    *,
    superposition_cap: int = 10**5,
    mixture_cap: int = 10**6,
) -> AttackResult:
    """Brute force over a discrete strategy class (all provers send the same state).

    ``classical-superposition``: honest proofs of every coloring (K^N of them).
    ``classical-mixture-support``: uniform over any nonempty vertex subset with
    any coloring of it ((K+1)^N - 1 of them).
    """
    t0 = time.perf_counter()
    n, k, kappa = inst.n_vertices, inst.alphabet_size, cfg.verifier.kappa
    if cfg.strategy == "classical-superposition":
        base, total, cap = k, k**n, superposition_cap
    elif cfg.strategy == "classical-mixture-support":
        base, total, cap = k + 1, (k + 1) ** n, mixture_cap
    else:
        raise ContractError("exhaustive search needs a discrete strategy class")
    if total > cap:
        raise BudgetError(f"{cfg.strategy}: {total} strategies exceed cap {cap}")

    best_val, best_assign = -np.inf, None
    if cfg.verifier.protocol == "BT09":
        fire = fire_matrix(inst, cfg.verifier.edge_mode)
        for start in range(0, total, 4096):
            assigns = _enumerate_assignments(n, base, start, min(total, start + 4096))
            assigns = assigns[(assigns < k).any(axis=1)]
            if not assigns.size:
                continue
            vals = _bt09_classical_values(fire, assigns, n, k)
            i = int(np.argmax(vals))
            if vals[i] > best_val + 1e-15:
                best_val, best_assign = float(vals[i]), assigns[i]
    else:
        for start in range(total):
            assign = _enumerate_assignments(n, base, start, start + 1)[0]
            if not (assign < k).any():
                continue
            s = _mixture_state(n, k, assign)
            val = run_verifier_exact(cfg.verifier, inst, [s] * kappa)
            if val > best_val + 1e-15:
                best_val, best_assign = val, assign
    state = _mixture_state(n, k, best_assign)
    coloring = Coloring(best_assign) if (best_assign < k).all() else None
    return _finish(inst, cfg, [state] * kappa, best_val, [[(0, best_val)]], t0, [], coloring)


def _discrete_attack(inst: CspInstance, cfg: AttackConfig, notes: list[str]) -> AttackResult:
    """Hill climbing over a discrete class: single-vertex recolor (or drop/add) moves."""
    t0 = time.perf_counter()
    n, k, kappa = inst.n_vertices, inst.alphabet_size, cfg.verifier.kappa
    allow_absent = cfg.strategy == "classical-mixture-support"
    choices = k + 1 if allow_absent else k
    if cfg.verifier.protocol == "BT09":
        fire = fire_matrix(inst, cfg.verifier.edge_mode)
        value_of = lambda assigns: _bt09_classical_values(fire, np.atleast_2d(assigns), n, k)
    else:
        value_of = lambda assigns: np.array(
            [run_verifier_exact(cfg.verifier, inst, [_mixture_state(n, k, a)] * kappa) for a in np.atleast_2d(assigns)]
        )

    rng = np.random.default_rng(cfg.seed)
    best_val, best_assign, traces = -np.inf, None, []
    for _ in range(cfg.restarts):
        assign = rng.integers(0, k, size=n)
        value = float(value_of(assign)[0])
        trace = [(0, value)]
        for it in range(1, cfg.max_iters + 1):
            moves = []
            for v in range(n):
                for c in range(choices):
                    if c != assign[v]:
                        cand = assign.copy()
                        cand[v] = c
                        if (cand < k).any():
                            moves.append(cand)
            vals = value_of(np.array(moves))
            i = int(np.argmax(vals))
            if vals[i] <= value + 1e-15:
                break
            assign, value = moves[i], float(vals[i])
            trace.append((it, value))
        traces.append(trace)
        if value > best_val:
            best_val, best_assign = value, assign
    state = _mixture_state(n, k, best_assign)
    coloring = Coloring(best_assign) if (best_assign < k).all() else None
    return _finish(inst, cfg, [state] * kappa, best_val, traces, t0, notes, coloring)
