"""Graph constraint-satisfaction instances, colorings and small-instance oracles."""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import networkx as nx
import numpy as np

DEFAULT_ENUM_CAP = 10**7


class ContractError(ValueError):
    """An argument violates an operation's precondition."""


class BudgetError(RuntimeError):
    """A computation was refused because it exceeds a configured enumeration cap."""


def enum_cap() -> int:
    return int(os.environ.get("QMALAB_ENUM_CAP", DEFAULT_ENUM_CAP))


@dataclass(frozen=True)
class DirectedEdge:
    u: int
    v: int
    allowed: np.ndarray  # K x K bool, allowed[j, j'] -> R_e(j, j') = 1

    def __post_init__(self):
        table = np.array(self.allowed, dtype=bool)
        if table.ndim != 2 or table.shape[0] != table.shape[1]:
            raise ContractError(f"edge ({self.u},{self.v}): relation must be a square table, got shape {table.shape}")
        table.setflags(write=False)
        object.__setattr__(self, "allowed", table)


@dataclass(frozen=True)
class CspInstance:
    n_vertices: int
    alphabet_size: int
    edges: tuple[DirectedEdge, ...]
    name: str = ""
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        n, k = self.n_vertices, self.alphabet_size
        if n < 1 or k < 1:
            raise ContractError(f"need n_vertices >= 1 and alphabet_size >= 1, got N={n}, K={k}")
        edges = tuple(self.edges)
        index = {}
        for pos, e in enumerate(edges):
            if not (0 <= e.u < n and 0 <= e.v < n):
                raise ContractError(f"edges[{pos}]: endpoint ({e.u},{e.v}) outside [0,{n})")
            if e.allowed.shape != (k, k):
                raise ContractError(f"edges[{pos}]: relation shape {e.allowed.shape}, expected ({k},{k})")
            if (e.u, e.v) in index:
                raise ContractError(f"edges[{pos}]: duplicate ordered pair ({e.u},{e.v})")
            index[(e.u, e.v)] = pos
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "_index", index)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge(self, u: int, v: int) -> DirectedEdge | None:
        pos = self._index.get((u, v))
        return None if pos is None else self.edges[pos]


@dataclass(frozen=True)
class Coloring:
    colors: tuple[int, ...]

    def __init__(self, colors: Sequence[int]):
        object.__setattr__(self, "colors", tuple(int(c) for c in colors))

    def __len__(self):
        return len(self.colors)

    def check(self, inst: CspInstance) -> None:
        if len(self.colors) != inst.n_vertices:
            raise ContractError(f"coloring has length {len(self.colors)}, instance has {inst.n_vertices} vertices")
        for v, c in enumerate(self.colors):
            if not 0 <= c < inst.alphabet_size:
                raise ContractError(f"colors[{v}] = {c} outside [0,{inst.alphabet_size})")


def symmetrized(inst: CspInstance) -> CspInstance:
    """Add every reversed edge with the transposed relation.

    When the reversed pair is already listed the two relations are intersected,
    so both constraints keep holding.
    """
    tables = {(e.u, e.v): e.allowed.copy() for e in inst.edges}
    for e in inst.edges:
        key = (e.v, e.u)
        if key in tables:
            tables[key] = tables[key] & e.allowed.T
        else:
            tables[key] = e.allowed.T.copy()
    edges = tuple(DirectedEdge(u, v, t) for (u, v), t in tables.items())
    return CspInstance(inst.n_vertices, inst.alphabet_size, edges, inst.name)


def with_edge_mode(inst: CspInstance, mode: str) -> CspInstance:
    if mode == "as-listed":
        return inst
    if mode == "symmetrized":
        return symmetrized(inst)
    raise ContractError(f"unknown edge mode {mode!r}")


def violated_edges(inst: CspInstance, col: Coloring) -> list[int]:
    col.check(inst)
    c = col.colors
    return [pos for pos, e in enumerate(inst.edges) if not e.allowed[c[e.u], c[e.v]]]


def satisfied_fraction(inst: CspInstance, col: Coloring) -> Fraction:
    col.check(inst)
    if inst.n_edges == 0:
        return Fraction(1)
    c = col.colors
    good = sum(1 for e in inst.edges if e.allowed[c[e.u], c[e.v]])
    return Fraction(good, inst.n_edges)


def _edge_arrays(inst: CspInstance):
    us = np.array([e.u for e in inst.edges], dtype=np.int64)
    vs = np.array([e.v for e in inst.edges], dtype=np.int64)
    tables = np.array([e.allowed for e in inst.edges], dtype=bool).reshape(-1, inst.alphabet_size, inst.alphabet_size)
    return us, vs, tables


def _all_colorings(n: int, k: int, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    cols = np.empty((idx.size, n), dtype=np.int64)
    for v in range(n - 1, -1, -1):
        cols[:, v] = idx % k
        idx //= k
    return cols


def best_coloring(inst: CspInstance, cap: int | None = None) -> tuple[Coloring, Fraction]:
    """Brute-force a coloring maximising the satisfied fraction (ties: lexicographically first)."""
    cap = enum_cap() if cap is None else cap
    n, k = inst.n_vertices, inst.alphabet_size
    total = k**n
    if total > cap:
        raise BudgetError(f"instance too large for oracle: K^N = {k}^{n} exceeds cap {cap}")
    if inst.n_edges == 0:
        return Coloring([0] * n), Fraction(1)
    us, vs, tables = _edge_arrays(inst)
    eidx = np.arange(inst.n_edges)
    best_count, best_idx = -1, 0
    chunk = 1 << 16
    for start in range(0, total, chunk):
        cols = _all_colorings(n, k, start, min(total, start + chunk))
        good = tables[eidx, cols[:, us], cols[:, vs]].sum(axis=1)
        i = int(np.argmax(good))
        if good[i] > best_count:
            best_count, best_idx = int(good[i]), start + i
            if best_count == inst.n_edges:
                break
    col = Coloring(_all_colorings(n, k, best_idx, best_idx + 1)[0])
    return col, Fraction(best_count, inst.n_edges)


def max_satisfiable_fraction(inst: CspInstance, cap: int | None = None) -> Fraction:
    return best_coloring(inst, cap)[1]


def local_search_coloring(inst: CspInstance, seed: int = 0, restarts: int = 8, max_sweeps: int = 200) -> Coloring:
    """Min-conflicts descent with restarts; a heuristic for instances beyond the oracle cap."""
    rng = np.random.default_rng(seed)
    n, k = inst.n_vertices, inst.alphabet_size
    incident = [[] for _ in range(n)]
    for e in inst.edges:
        incident[e.u].append(e)
        if e.v != e.u:
            incident[e.v].append(e)

    def local_violations(col, v, c):
        old = col[v]
        col[v] = c
        bad = sum(1 for e in incident[v] if not e.allowed[col[e.u], col[e.v]])
        col[v] = old
        return bad

    best, best_bad = None, None
    for _ in range(restarts):
        col = rng.integers(0, k, size=n)
        for _ in range(max_sweeps):
            improved = False
            for v in rng.permutation(n):
                costs = [local_violations(col, v, c) for c in range(k)]
                c = int(np.argmin(costs))
                if costs[c] < costs[col[v]]:
                    col[v] = c
                    improved = True
            if not improved:
                break
        bad = len(violated_edges(inst, Coloring(col)))
        if best_bad is None or bad < best_bad:
            best, best_bad = col.copy(), bad
    return Coloring(best)


def _random_permutation_mapping(rng, k: int, src: int, dst: int) -> np.ndarray:
    perm = rng.permutation(k)
    # swap so that perm[src] == dst
    j = int(np.where(perm == dst)[0][0])
    perm[src], perm[j] = perm[j], perm[src]
    return perm


def _perm_table(perm: np.ndarray) -> np.ndarray:
    k = perm.size
    t = np.zeros((k, k), dtype=bool)
    t[np.arange(k), perm] = True
    return t


def _planted_table(rng, k: int, a: int, b: int, allow_prob: float = 0.5) -> np.ndarray:
    t = rng.random((k, k)) < allow_prob
    t[a, b] = True
    return t


def generate_one_bad_edge(
    n: int, k: int, seed: int = 0, *, self_loop: bool = False, extra_edges: int | None = None
) -> tuple[CspInstance, Coloring]:
    """Unsatisfiable instance plus a coloring violating exactly one edge.

    Default layout is a directed cycle of bijective constraints whose composition
    is a derangement, so no coloring satisfies the whole cycle; the returned
    coloring satisfies every cycle edge but the closing one. With
    ``self_loop=True`` the single bad edge is a self-loop on a random vertex
    carrying an off-diagonal relation. Extra chords are planted to accept the
    coloring.
    """
    if n < 2 or k < 2:
        raise ContractError(f"generate_one_bad_edge needs n >= 2 and k >= 2, got n={n}, k={k}")
    rng = np.random.default_rng(seed)
    colors = rng.integers(0, k, size=n)
    order = rng.permutation(n)
    tables: dict[tuple[int, int], np.ndarray] = {}

    if self_loop:
        for a, b in zip(order[:-1], order[1:]):
            tables[(int(a), int(b))] = _planted_table(rng, k, colors[a], colors[b])
        w = int(order[rng.integers(n)])
        tables[(w, w)] = ~np.eye(k, dtype=bool)
        bad = (w, w)
    else:
        composed = np.arange(k)
        for a, b in zip(order[:-1], order[1:]):
            perm = _random_permutation_mapping(rng, k, colors[a], colors[b])
            tables[(int(a), int(b))] = _perm_table(perm)
            composed = perm[composed]
        shift = rng.integers(1, k)
        derangement = (np.arange(k) + shift) % k
        inverse = np.empty(k, dtype=np.int64)
        inverse[composed] = np.arange(k)
        closing = derangement[inverse]
        last, first = int(order[-1]), int(order[0])
        tables[(last, first)] = _perm_table(closing)
        bad = (last, first)

    extra = n // 2 if extra_edges is None else extra_edges
    attempts = 0
    while extra > 0 and attempts < 50 * (extra + 1):
        attempts += 1
        a, b = (int(x) for x in rng.integers(0, n, size=2))
        if a == b or (a, b) in tables or (b, a) in tables:
            continue
        tables[(a, b)] = _planted_table(rng, k, colors[a], colors[b])
        extra -= 1

    edges = tuple(DirectedEdge(u, v, t) for (u, v), t in tables.items())
    inst = CspInstance(n, k, edges, name=f"one-bad-edge-n{n}-k{k}-s{seed}{'-loop' if self_loop else ''}")
    col = Coloring(colors)
    viol = violated_edges(inst, col)
    assert len(viol) == 1 and (inst.edges[viol[0]].u, inst.edges[viol[0]].v) == bad
    return inst, col


@dataclass(frozen=True)
class GapInstance:
    instance: CspInstance
    degree: int
    mode: str
    hidden: Coloring | None  # planted coloring, or best coloring found for frustrated mode
    eta: Fraction | None  # 1 - max satisfiable fraction (or of the best coloring found)
    eta_certified: bool


def _regular_graph(n: int, d: int, rng) -> tuple[list[tuple[int, int]], bool]:
    """Undirected d-regular edge list; odd n*d is padded with one self-loop per vertex."""
    loops = (n * d) % 2 == 1
    base = d - 1 if loops else d
    if base >= n:
        raise ContractError(f"no simple {base}-regular graph on {n} vertices")
    if base > 0:
        g = nx.random_regular_graph(base, n, seed=int(rng.integers(2**31)))
        pairs = [(int(a), int(b)) for a, b in g.edges()]
    else:
        pairs = []
    if loops:
        pairs += [(v, v) for v in range(n)]
    return pairs, loops


def generate_regular_gap_instance(
    n: int,
    k: int,
    degree: int,
    seed: int = 0,
    *,
    mode: str = "planted",
    allow_prob: float = 0.5,
    cap: int | None = None,
) -> GapInstance:
    """d-regular instance (self-loops count once toward the degree).

    ``planted``: relations random but always allow a hidden coloring.
    ``frustrated``: relations allow each color pair independently with
    probability ``allow_prob``; eta comes from the brute-force oracle when
    K^N is within the cap, otherwise from min-conflicts local search
    (``eta_certified`` False).
    """
    if degree < 1:
        raise ContractError(f"degree must be >= 1, got {degree}")
    if k < 2:
        raise ContractError(f"alphabet size must be >= 2, got {k}")
    if mode not in ("planted", "frustrated"):
        raise ContractError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    pairs, _ = _regular_graph(n, degree, rng)
    edges = []
    if mode == "planted":
        hidden = Coloring(rng.integers(0, k, size=n))
        for a, b in pairs:
            if rng.random() < 0.5:
                a, b = b, a
            edges.append(DirectedEdge(a, b, _planted_table(rng, k, hidden.colors[a], hidden.colors[b], allow_prob)))
        inst = CspInstance(n, k, tuple(edges), name=f"planted-n{n}-k{k}-d{degree}-s{seed}")
        return GapInstance(inst, degree, mode, hidden, Fraction(0), True)

    for a, b in pairs:
        if rng.random() < 0.5:
            a, b = b, a
        edges.append(DirectedEdge(a, b, rng.random((k, k)) < allow_prob))
    inst = CspInstance(n, k, tuple(edges), name=f"frustrated-n{n}-k{k}-d{degree}-s{seed}")
    cap = enum_cap() if cap is None else cap
    if k**n <= cap:
        col, frac = best_coloring(inst, cap)
        return GapInstance(inst, degree, mode, col, 1 - frac, True)
    col = local_search_coloring(inst, seed=seed)
    return GapInstance(inst, degree, mode, col, 1 - satisfied_fraction(inst, col), False)


def triangle_instance(k: int = 3) -> tuple[CspInstance, Coloring]:
    """Triangle with all-pairs-distinct relations and a proper coloring."""
    neq = ~np.eye(k, dtype=bool)
    edges = (DirectedEdge(0, 1, neq), DirectedEdge(1, 2, neq), DirectedEdge(2, 0, neq))
    return CspInstance(3, k, edges, name="triangle"), Coloring([0, 1, 2])


def iter_colorings(n: int, k: int):
    for cols in itertools.product(range(k), repeat=n):
        yield Coloring(cols)
