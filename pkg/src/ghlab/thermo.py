"""Pressure, entropy and the pressure metric on subshifts of finite type.

A shift is a finite directed multigraph; closed orbits are its cycles and
potentials are constant on edges, so every quantity is a finite
computation. The Perron eigenvalue of the weighted adjacency matrix gives
the pressure; counting cycles gives an independent route to entropy.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from functools import reduce
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    EnumerationBudgetExceeded,
    NonConvergence,
    NotOnPressureZero,
    NotTangent,
)

POWER_TOL = 1e-13
POWER_MAX_ITER = 100_000
FD_STEP_TANGENT = 1e-4
FD_STEPS_VARIANCE = (1e-2, 5e-3)


@dataclass(frozen=True)
class Edge:
    id: int
    tail: int
    head: int


class MarkovShift:
    """Strongly connected, aperiodic directed multigraph."""

    def __init__(self, n_vertices: int, edges: Sequence[Edge | tuple[int, int, int]], validate: bool = True):
        self.n = int(n_vertices)
        es = [e if isinstance(e, Edge) else Edge(*e) for e in edges]
        self.edges: tuple[Edge, ...] = tuple(sorted(es, key=lambda e: e.id))
        ids = [e.id for e in self.edges]
        if len(set(ids)) != len(ids):
            raise ValueError("edge ids must be unique")
        for e in self.edges:
            if not (0 <= e.tail < self.n and 0 <= e.head < self.n):
                raise ValueError(f"edge {e} has an endpoint outside 0..{self.n - 1}")
        self._pos = {e.id: i for i, e in enumerate(self.edges)}
        self.tails = np.array([e.tail for e in self.edges], dtype=np.int64)
        self.heads = np.array([e.head for e in self.edges], dtype=np.int64)
        if validate:
            if not self.is_strongly_connected():
                raise ValueError("shift graph is not strongly connected")
            if self.period() != 1:
                raise ValueError("shift graph is not aperiodic")

    @property
    def edge_ids(self) -> list[int]:
        return [e.id for e in self.edges]

    def __len__(self):
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        np.add.at(A, (self.tails, self.heads), 1.0)
        return A

    def weighted_matrix(self, g: "EdgeFunction") -> np.ndarray:
        """M_uv = sum over edges u->v of exp(g(e))."""
        M = np.zeros((self.n, self.n))
        np.add.at(M, (self.tails, self.heads), np.exp(g.array(self)))
        return M

    def is_strongly_connected(self) -> bool:
        A = self.adjacency() > 0
        for mat in (A, A.T):
            seen = {0}
            todo = deque([0])
            while todo:
                u = todo.popleft()
                for v in np.flatnonzero(mat[u]):
                    if v not in seen:
                        seen.add(int(v))
                        todo.append(int(v))
            if len(seen) != self.n:
                return False
        return True

    def period(self) -> int:
        """gcd of closed-walk lengths up to n^2."""
        A = (self.adjacency() > 0).astype(np.int64)
        P = np.eye(self.n, dtype=np.int64)
        lengths = []
        for k in range(1, self.n * self.n + 1):
            P = np.minimum(P @ A, 1)
            if np.trace(P) > 0:
                lengths.append(k)
        return reduce(math.gcd, lengths, 0)

    def index(self, edge_id: int) -> int:
        return self._pos[edge_id]

    # -- file format ----------------------------------------------------------

    def to_dict(self, potential: "EdgeFunction | None" = None) -> dict:
        d = {"vertices": self.n,
             "edges": [{"id": e.id, "tail": e.tail, "head": e.head} for e in self.edges]}
        if potential is not None:
            d["potential"] = {str(e.id): float(potential.values[e.id]) for e in self.edges}
        return d

    @classmethod
    def from_dict(cls, data: Mapping) -> tuple["MarkovShift", "EdgeFunction | None"]:
        shift = cls(int(data["vertices"]),
                    [Edge(int(e["id"]), int(e["tail"]), int(e["head"])) for e in data["edges"]])
        pot = data.get("potential")
        g = EdgeFunction({int(k): float(v) for k, v in pot.items()}) if pot is not None else None
        return shift, g


def load_graph(path) -> tuple[MarkovShift, "EdgeFunction | None"]:
    return MarkovShift.from_dict(json.loads(Path(path).read_text()))


def save_graph(shift: MarkovShift, path, potential: "EdgeFunction | None" = None) -> None:
    Path(path).write_text(json.dumps(shift.to_dict(potential), indent=2) + "\n")


@dataclass(frozen=True)
class EdgeFunction:
    values: Mapping[int, float]

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.values.values()):
            raise ValueError("edge function values must be finite")

    @classmethod
    def from_array(cls, shift: MarkovShift, arr) -> "EdgeFunction":
        arr = np.asarray(arr, dtype=float)
        return cls({e.id: float(v) for e, v in zip(shift.edges, arr)})

    @classmethod
    def constant(cls, shift: MarkovShift, c: float) -> "EdgeFunction":
        return cls({e.id: float(c) for e in shift.edges})

    def array(self, shift: MarkovShift) -> np.ndarray:
        return np.array([self.values[e.id] for e in shift.edges], dtype=float)

    def __add__(self, other: "EdgeFunction") -> "EdgeFunction":
        return EdgeFunction({k: v + other.values[k] for k, v in self.values.items()})

    def scale(self, c: float) -> "EdgeFunction":
        return EdgeFunction({k: c * v for k, v in self.values.items()})

    def combine(self, t: float, other: "EdgeFunction") -> "EdgeFunction":
        """self + t * other."""
        return EdgeFunction({k: v + t * other.values[k] for k, v in self.values.items()})


def coboundary(shift: MarkovShift, u) -> EdgeFunction:
    """Edge function u(head) - u(tail)."""
    u = np.asarray(u, dtype=float)
    return EdgeFunction.from_array(shift, u[shift.heads] - u[shift.tails])


# -- Perron eigenvalue ------------------------------------------------------------

@dataclass(frozen=True)
class PerronData:
    eigenvalue: float
    right: np.ndarray
    left: np.ndarray
    iterations: int


def _power_iteration(M: np.ndarray, tol: float, max_iter: int) -> tuple[float, np.ndarray, int]:
    """Power iteration with Collatz-Wielandt bracketing of the Perron root."""
    x = np.ones(M.shape[0])
    width_prev = np.inf
    stalled = 0
    for it in range(1, max_iter + 1):
        y = M @ x
        ratios = y / x
        lo, hi = ratios.min(), ratios.max()
        x = y / np.linalg.norm(y)
        width = (hi - lo) / lo
        if width <= tol:
            # keep iterating while the bracket still shrinks, to land at roundoff
            if width >= width_prev:
                stalled += 1
            if stalled >= 3 or width == 0.0:
                return math.sqrt(lo * hi), x, it
        width_prev = min(width_prev, width)
    if width <= tol:
        return math.sqrt(lo * hi), x, max_iter
    raise NonConvergence(f"power iteration bracket {width:.3e} after {max_iter} iterations")


def perron(shift: MarkovShift, g: EdgeFunction, tol: float = POWER_TOL,
           max_iter: int = POWER_MAX_ITER) -> PerronData:
    M = shift.weighted_matrix(g)
    scale = M.max()
    lam, v, it = _power_iteration(M / scale, tol, max_iter)
    _, u, _ = _power_iteration(M.T / scale, tol, max_iter)
    return PerronData(lam * scale, v, u, it)


def pressure(shift: MarkovShift, g: EdgeFunction, tol: float = POWER_TOL) -> float:
    """log of the Perron eigenvalue of the edge-weighted adjacency matrix."""
    M = shift.weighted_matrix(g)
    scale = M.max()
    lam, _, _ = _power_iteration(M / scale, tol, POWER_MAX_ITER)
    return math.log(lam) + math.log(scale)


def equilibrium_edge_measure(shift: MarkovShift, g: EdgeFunction) -> np.ndarray:
    """Edge masses of the equilibrium state of g (Parry measure for g = 0).

    d/dt P(g + t h) at 0 equals the integral of h against these masses.
    """
    pd = perron(shift, g)
    w = np.exp(g.array(shift))
    m = pd.left[shift.tails] * w * pd.right[shift.heads]
    return m / m.sum()


def entropy_root(shift: MarkovShift, f: EdgeFunction, xtol: float = 1e-12) -> float:
    """The unique h >= 0 with P(-h f) = 0, by bisection."""
    fa = f.array(shift)
    if not fa.min() > 0:
        raise ValueError("roof function must be positive")
    lo, hi = 0.0, max(pressure(shift, EdgeFunction.constant(shift, 0.0)), 0.0) / fa.min()
    if hi == 0.0:
        return 0.0
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if pressure(shift, f.scale(-mid)) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- cycles -------------------------------------------------------------------

@dataclass(frozen=True)
class Cycle:
    edges: tuple[int, ...]

    def check(self, shift: MarkovShift) -> bool:
        es = [shift.edges[shift.index(i)] for i in self.edges]
        return all(es[k].head == es[(k + 1) % len(es)].tail for k in range(len(es)))


def _closed_walks(shift: MarkovShift, max_len: int):
    """Yield every closed edge sequence (as edge positions) up to max_len, rooted."""
    out_edges = [[] for _ in range(shift.n)]
    for i, e in enumerate(shift.edges):
        out_edges[e.tail].append(i)

    def extend(start_v, path, v):
        for i in out_edges[v]:
            path.append(i)
            h = shift.edges[i].head
            if h == start_v:
                yield tuple(path)
            if len(path) < max_len:
                yield from extend(start_v, path, h)
            path.pop()

    for start in range(shift.n):
        yield from extend(start, [], start)


def cycle_periods(shift: MarkovShift, g: EdgeFunction, max_len: int) -> list[tuple[Cycle, float]]:
    """Rotation-deduplicated cycles up to ``max_len`` edges with their g-periods."""
    if max_len > 14:
        raise ValueError("max_len must be <= 14")
    ga = g.array(shift)
    out = []
    for walk in _closed_walks(shift, max_len):
        # keep only the lexicographically least rotation (this also drops
        # the duplicate rootings at other vertices of the same cycle)
        if any(walk[i:] + walk[:i] < walk for i in range(1, len(walk))):
            continue
        ids = tuple(shift.edges[i].id for i in walk)
        out.append((Cycle(ids), float(ga[list(walk)].sum())))
    out.sort(key=lambda cp: (len(cp[0].edges), cp[0].edges))
    return out


def rooted_cycle_lengths(shift: MarkovShift, f: EdgeFunction, T: float,
                         budget: int = 1_000_000) -> np.ndarray:
    """f-periods of all rooted closed walks with period <= T.

    Each periodic orbit of edge length k appears once per starting edge.
    Raises EnumerationBudgetExceeded if more than ``budget`` partial walks are
    explored.
    """
    fa = f.array(shift)
    if not fa.min() > 0:
        raise ValueError("roof function must be positive")
    closed = []
    explored = 0
    for start in range(shift.n):
        cur = np.array([start], dtype=np.int64)
        acc = np.array([0.0])
        while len(cur):
            nxt_v, nxt_a = [], []
            for i in range(len(shift.edges)):
                sel = cur == shift.tails[i]
                if not np.any(sel):
                    continue
                a = acc[sel] + fa[i]
                a = a[a <= T]
                if not len(a):
                    continue
                if shift.heads[i] == start:
                    closed.append(a)
                nxt_v.append(np.full(len(a), shift.heads[i], dtype=np.int64))
                nxt_a.append(a)
            if not nxt_v:
                break
            cur = np.concatenate(nxt_v)
            acc = np.concatenate(nxt_a)
            explored += len(cur)
            if explored > budget:
                raise EnumerationBudgetExceeded(f"more than {budget} walks below T = {T}")
    return np.sort(np.concatenate(closed)) if closed else np.zeros(0)


def brute_force_entropy(shift: MarkovShift, f: EdgeFunction, T: float,
                        budget: int = 1_000_000, method: str = "slope") -> float:
    """Entropy from counting closed walks with f-period <= T.

    ``method="ratio"`` returns log N(T) / T. ``method="slope"`` (default)
    fits the slope of log N(t) on [T/2, T], which cancels the constant
    prefactor of N and converges much faster in T.
    """
    lengths = rooted_cycle_lengths(shift, f, T, budget)
    if method == "ratio":
        n = len(lengths)
        if n == 0:
            raise ValueError("no closed walks below T")
        return math.log(n) / T
    if method != "slope":
        raise ValueError(f"unknown method {method!r}")
    grid = np.linspace(T / 2, T, 48)
    counts = np.searchsorted(lengths, grid, side="right")
    ok = counts > 0
    if np.count_nonzero(ok) < 10:
        raise ValueError("too few closed walks in [T/2, T]; increase T")
    return float(np.polyfit(grid[ok], np.log(counts[ok]), 1)[0])


def budget_horizon(shift: MarkovShift, f: EdgeFunction, budget: int = 1_000_000) -> float:
    """Largest T (on a geometric grid) whose walk enumeration stays within budget."""
    fa = f.array(shift)
    T = 4.0 * fa.max()
    while True:
        try:
            rooted_cycle_lengths(shift, f, T * 1.2, budget)
        except EnumerationBudgetExceeded:
            return T
        T *= 1.2


# -- pressure metric --------------------------------------------------------------

def _d1(shift, F, g, h):
    return (pressure(shift, F.combine(h, g)) - pressure(shift, F.combine(-h, g))) / (2 * h)


def _d2(shift, F, g, h, p0):
    return (pressure(shift, F.combine(h, g)) - 2 * p0 + pressure(shift, F.combine(-h, g))) / (h * h)


def pressure_form(shift: MarkovShift, F: EdgeFunction, g: EdgeFunction) -> float:
    """Var(g) / (-d/ds P(F + sF)) for g tangent to {P = 0} at F.

    The variance is a Richardson-combined central second difference.
    """
    p0 = pressure(shift, F)
    if abs(p0) > 1e-9:
        raise NotOnPressureZero(f"P(F) = {p0:.3e}")
    slope = _d1(shift, F, g, FD_STEP_TANGENT)
    if abs(slope) > 1e-6:
        raise NotTangent(f"d/dt P(F + t g) = {slope:.3e} at t = 0")
    h1, h2 = FD_STEPS_VARIANCE
    v1 = _d2(shift, F, g, h1, p0)
    v2 = _d2(shift, F, g, h2, p0)
    var = v2 + (v2 - v1) * h2 ** 2 / (h1 ** 2 - h2 ** 2)
    D = -_d1(shift, F, F, FD_STEP_TANGENT)
    return var / D


def normalize_to_pressure_zero(shift: MarkovShift, F: EdgeFunction) -> EdgeFunction:
    """Shift F by a constant so P(F) = 0."""
    return F.combine(-pressure(shift, F), EdgeFunction.constant(shift, 1.0))


def tangent_projection(shift: MarkovShift, F: EdgeFunction, g: EdgeFunction) -> EdgeFunction:
    """g - (int g dm / int F dm) F, which has d/dt P(F + t g) = 0."""
    m = equilibrium_edge_measure(shift, F)
    c = float(m @ g.array(shift)) / float(m @ F.array(shift))
    return g.combine(-c, F)


# -- coboundaries -----------------------------------------------------------------

@dataclass(frozen=True)
class CoboundaryResult:
    flag: bool
    witness: np.ndarray | None
    violating_edge: int | None = None
    discrepancy: float = 0.0


def is_coboundary(shift: MarkovShift, g: EdgeFunction, tol: float = 1e-9) -> CoboundaryResult:
    """Solve u(head) - u(tail) = g on a spanning tree, then test the other edges.

    Each non-tree edge closes one fundamental cycle; its residual is that
    cycle's signed g-sum.
    """
    ga = g.array(shift)
    u = np.full(shift.n, np.nan)
    u[0] = 0.0
    tree = set()
    todo = deque([0])
    while todo:
        v = todo.popleft()
        for i, e in enumerate(shift.edges):
            if e.tail == v and np.isnan(u[e.head]):
                u[e.head] = u[v] + ga[i]
                tree.add(i)
                todo.append(e.head)
            elif e.head == v and np.isnan(u[e.tail]):
                u[e.tail] = u[v] - ga[i]
                tree.add(i)
                todo.append(e.tail)
    worst, worst_i = 0.0, None
    for i, e in enumerate(shift.edges):
        if i in tree:
            continue
        r = ga[i] - (u[e.head] - u[e.tail])
        if abs(r) > tol and (worst_i is None or abs(r) > abs(worst)):
            worst, worst_i = r, i
    if worst_i is None:
        return CoboundaryResult(True, u)
    return CoboundaryResult(False, None, shift.edges[worst_i].id, float(worst))


# -- small graph factories --------------------------------------------------------

def full_shift(k: int = 2) -> MarkovShift:
    return MarkovShift(1, [Edge(i, 0, 0) for i in range(k)])


def random_shift(rng: np.random.Generator, n_vertices: int, extra_edges: int = 3) -> MarkovShift:
    """Random strongly connected aperiodic multigraph: a Hamiltonian cycle plus extras."""
    while True:
        perm = rng.permutation(n_vertices)
        edges = [(perm[i], perm[(i + 1) % n_vertices]) for i in range(n_vertices)]
        for _ in range(extra_edges):
            edges.append(tuple(rng.integers(0, n_vertices, size=2)))
        shift = MarkovShift(n_vertices, [Edge(i, int(t), int(h)) for i, (t, h) in enumerate(edges)],
                            validate=False)
        if shift.is_strongly_connected() and shift.period() == 1:
            return shift
