"""Graph coloring states on a vertex register (dim N) and a color register (dim K).

A product-form state is sum_v a_v |v> sum_j B[v, j] |j>. Operations that mix the
registers (Fourier transforms) return the full N x K amplitude matrix instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .csp import Coloring, ContractError, CspInstance

NORM_TOL = 1e-9
ZERO_PROB = 1e-14  # marginals at or below this count as zero


@dataclass(frozen=True)
class ColoringState:
    vertex_amp: np.ndarray  # (N,) complex
    color_amp: np.ndarray  # (N, K) complex

    def __post_init__(self):
        a = np.asarray(self.vertex_amp, dtype=complex)
        b = np.asarray(self.color_amp, dtype=complex)
        if a.ndim != 1 or b.ndim != 2 or b.shape[0] != a.shape[0]:
            raise ContractError(f"vertex_amp shape {a.shape} incompatible with color_amp shape {b.shape}")
        if abs(np.vdot(a, a).real - 1) > NORM_TOL:
            raise ContractError(f"vertex register norm^2 = {np.vdot(a, a).real!r}, expected 1")
        row = np.einsum("vj,vj->v", b.conj(), b).real
        bad = np.flatnonzero(np.abs(row - 1) > NORM_TOL)
        if bad.size:
            raise ContractError(f"color register of vertex {bad[0]} has norm^2 {row[bad[0]]!r}, expected 1")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "vertex_amp", a)
        object.__setattr__(self, "color_amp", b)

    @property
    def n(self) -> int:
        return self.vertex_amp.shape[0]

    @property
    def k(self) -> int:
        return self.color_amp.shape[1]

    def joint(self) -> np.ndarray:
        """psi[v, j] = a_v B[v, j]."""
        return self.vertex_amp[:, None] * self.color_amp

    @classmethod
    def normalized(cls, vertex_amp, color_amp) -> "ColoringState":
        """Build a state after rescaling every register to unit norm.

        Zero color rows are replaced by |0> so the result is always valid.
        """
        a = np.asarray(vertex_amp, dtype=complex)
        b = np.array(color_amp, dtype=complex)
        a = a / np.linalg.norm(a)
        norms = np.linalg.norm(b, axis=1)
        zero = norms == 0
        b[zero] = 0
        b[zero, 0] = 1
        norms[zero] = 1
        return cls(a, b / norms[:, None])


@dataclass(frozen=True)
class OutcomeDistribution:
    probs: np.ndarray  # (N, K) nonnegative, sums to 1

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 2:
            raise ContractError(f"distribution must be an N x K table, got shape {p.shape}")
        if (p < -NORM_TOL).any() or abs(p.sum() - 1) > NORM_TOL:
            raise ContractError(f"not a probability table (sum={p.sum()!r}, min={p.min()!r})")
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def shape(self):
        return self.probs.shape


def _same_dims(s1: ColoringState, s2: ColoringState) -> None:
    if (s1.n, s1.k) != (s2.n, s2.k):
        raise ContractError(f"dimension mismatch: (N,K)={s1.n, s1.k} vs {s2.n, s2.k}")


def from_coloring(inst: CspInstance, col: Coloring) -> ColoringState:
    col.check(inst)
    n, k = inst.n_vertices, inst.alphabet_size
    b = np.zeros((n, k), dtype=complex)
    b[np.arange(n), col.colors] = 1
    return ColoringState(np.full(n, 1 / np.sqrt(n), dtype=complex), b)


def dft(n: int) -> np.ndarray:
    """F_n with entry (k, j) = exp(2 pi i jk / n) / sqrt(n)."""
    if n < 1:
        raise ContractError(f"DFT dimension must be >= 1, got {n}")
    r = np.arange(n)
    # reduce jk mod n before scaling so large n keeps full phase accuracy
    return np.exp(2j * np.pi * (np.outer(r, r) % n) / n) / np.sqrt(n)


def apply_fourier(state: ColoringState, on_vertex: bool, on_color: bool) -> np.ndarray:
    psi = state.joint()
    if on_vertex:
        psi = dft(state.n) @ psi
    if on_color:
        psi = psi @ dft(state.k).T
    return psi


def measure_distribution(joint: np.ndarray) -> OutcomeDistribution:
    return OutcomeDistribution(np.abs(joint) ** 2)


def dstr(state: ColoringState) -> OutcomeDistribution:
    """Computational-basis outcome distribution of a product-form state."""
    return measure_distribution(state.joint())


def overlap(s1: ColoringState, s2: ColoringState) -> complex:
    _same_dims(s1, s2)
    return complex(np.vdot(s1.joint(), s2.joint()))


def swap_reject_prob(s1: ColoringState, s2: ColoringState) -> float:
    """(1 - |<s1|s2>|^2) / 2."""
    f = abs(overlap(s1, s2)) ** 2
    return float(np.clip((1 - f) / 2, 0.0, 0.5))


def pure_trace_distance(s1: ColoringState, s2: ColoringState) -> float:
    f = abs(overlap(s1, s2)) ** 2
    return float(np.sqrt(max(0.0, 1 - f)))


def statistical_distance(p: OutcomeDistribution, q: OutcomeDistribution) -> float:
    pa, qa = np.asarray(getattr(p, "probs", p)), np.asarray(getattr(q, "probs", q))
    if pa.shape != qa.shape:
        raise ContractError(f"shape mismatch: {pa.shape} vs {qa.shape}")
    return float(0.5 * np.abs(pa - qa).sum())


def color_marginal_after_fourier(state: ColoringState) -> tuple[np.ndarray, list[np.ndarray | None]]:
    """Color-register marginal p of (I (x) F_K)|state> and the reduced vertex states.

    ``gammas[j]`` is the renormalised column j, or None when p[j] is zero
    (up to rounding, see ``ZERO_PROB``).
    """
    x = apply_fourier(state, on_vertex=False, on_color=True)
    p = (np.abs(x) ** 2).sum(axis=0)
    gammas = [x[:, j] / np.sqrt(p[j]) if p[j] > ZERO_PROB else None for j in range(state.k)]
    return p, gammas


def small_amplitude_set(state: ColoringState, c: float) -> set[int]:
    """Vertices whose |a_v|^2 < c; the complement is the large-amplitude set."""
    if not 0 < c <= 1:
        raise ContractError(f"threshold must lie in (0, 1], got {c}")
    return set(np.flatnonzero(np.abs(state.vertex_amp) ** 2 < c).tolist())


def large_amplitude_set(state: ColoringState, c: float) -> set[int]:
    return set(range(state.n)) - small_amplitude_set(state, c)


def _complex_normal(rng, shape) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_state(
    n: int,
    k: int,
    seed=None,
    profile: str = "haar",
    *,
    eps: float = 0.0,
    base: Coloring | None = None,
    support: int | None = None,
) -> ColoringState:
    """Seeded random coloring state.

    Profiles: ``haar`` (each register Haar-uniform), ``perturbed-honest``
    (honest state of ``base`` plus complex Gaussian noise of scale ``eps``,
    renormalised per register), ``sparse-support`` (vertex amplitude on
    ``support`` random vertices only).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if profile == "haar":
        return ColoringState.normalized(_complex_normal(rng, n), _complex_normal(rng, (n, k)))
    if profile == "perturbed-honest":
        colors = base.colors if base is not None else rng.integers(0, k, size=n)
        if len(colors) != n:
            raise ContractError(f"base coloring has length {len(colors)}, expected {n}")
        a = np.full(n, 1 / np.sqrt(n), dtype=complex)
        b = np.zeros((n, k), dtype=complex)
        b[np.arange(n), colors] = 1
        if eps == 0:
            return ColoringState(a, b)
        a = a + eps * _complex_normal(rng, n) / np.sqrt(2 * n)
        b = b + eps * _complex_normal(rng, (n, k)) / np.sqrt(2 * k)
        return ColoringState.normalized(a, b)
    if profile == "sparse-support":
        m = max(1, min(n, support if support is not None else max(1, n // 2)))
        a = np.zeros(n, dtype=complex)
        a[rng.choice(n, size=m, replace=False)] = _complex_normal(rng, m)
        return ColoringState.normalized(a, _complex_normal(rng, (n, k)))
    raise ContractError(f"unknown profile {profile!r}")
