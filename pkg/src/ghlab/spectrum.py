"""Marked length spectra, entropy estimates and pressure-metric degeneracy tests."""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np

from .errors import DegenerateConfiguration, InsufficientData, NotHyperbolic
from .linalg_lie import ads_length, rho_so22_matrix, translation_length_from_trace
from .surface_rep import (
    GHPair,
    SurfaceRepresentation,
    TangentDirection,
    _letter_matrices,
    canonical_rotation,
    deform,
    evaluate_word_matrix,
    format_word,
    inverse_word,
    pure_bending_path,
)

DEDUPE_QUANTUM = 1e-8
HYPERBOLIC_MARGIN = 1e-9
MAX_WORD_LEN = 12
AUX_SEED = 0x5EED
AUX_T = 0.2


@dataclass(frozen=True)
class SpectrumEntry:
    canonical_word: tuple[int, ...]
    tr_L: float
    tr_R: float
    len_L: float
    len_R: float
    len: float


@dataclass
class LengthSpectrum:
    entries: list[SpectrumEntry]
    max_word_len: int
    generator_names: tuple[str, ...]
    quantum: float = DEDUPE_QUANTUM
    _lens: np.ndarray = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self._lens = np.array([e.len for e in self.entries], dtype=float)

    def __len__(self):
        return len(self.entries)

    @property
    def lengths(self) -> np.ndarray:
        return self._lens

    def words(self) -> list[str]:
        return [format_word(e.canonical_word, self.generator_names) for e in self.entries]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["word", "tr_L", "tr_R", "len_L", "len_R", "len"])
        for e, word in zip(self.entries, self.words()):
            w.writerow([word] + [f"{v:.12g}" for v in (e.tr_L, e.tr_R, e.len_L, e.len_R, e.len)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, generator_names: Sequence[str] | None = None) -> "LengthSpectrum":
        from .surface_rep import parse_word

        rows = list(csv.DictReader(io.StringIO(text)))
        if generator_names is None:
            names = sorted({tok.lstrip("-") for r in rows for tok in r["word"].split(".")},
                           key=lambda s: (len(s), s))
        else:
            names = list(generator_names)
        entries = [
            SpectrumEntry(
                parse_word(r["word"], names),
                float(r["tr_L"]), float(r["tr_R"]),
                float(r["len_L"]), float(r["len_R"]), float(r["len"]),
            )
            for r in rows
        ]
        mwl = max((len(e.canonical_word) for e in entries), default=0)
        return cls(entries, mwl, tuple(names))


# -- enumeration -------------------------------------------------------------

def _mul(P, L):
    """Row-wise product of (N, 4) flattened 2x2 stacks by a fixed letter (4,)."""
    a, b, c, d = P[:, 0], P[:, 1], P[:, 2], P[:, 3]
    e, f, g, h = L
    return np.stack([a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h], axis=1)


def _min_rotation_mask(codes: np.ndarray, k: int, base: int) -> np.ndarray:
    ok = np.ones(len(codes), dtype=bool)
    for i in range(1, k):
        hi = base ** (k - i)
        rot = (codes % hi) * (base ** i) + codes // hi
        ok &= codes <= rot
    return ok


def _enumerate_shard(args):
    """All cyclically reduced minimal-rotation words starting with ``first``.

    Returns (words list-of-arrays per length, traces (M, n_reps)).
    Prefixes only use letters >= first, since a minimal rotation starts with
    its smallest letter.
    """
    first, letter_mats, max_len = args
    n_letters = letter_mats.shape[1]
    n_reps = letter_mats.shape[0]
    flat = letter_mats.reshape(n_reps, n_letters, 4)
    words = np.array([[first]], dtype=np.int64)
    codes = np.array([first], dtype=np.int64)
    prods = [flat[r, first][None, :].copy() for r in range(n_reps)]
    out_words, out_tr = [], []
    for k in range(1, max_len + 1):
        if k > 1:
            new_w, new_c, new_p = [], [], [[] for _ in range(n_reps)]
            last = words[:, -1]
            for l in range(first, n_letters):
                sel = last != (l ^ 1)
                if not np.any(sel):
                    continue
                w = words[sel]
                new_w.append(np.hstack([w, np.full((len(w), 1), l, dtype=np.int64)]))
                new_c.append(codes[sel] * n_letters + l)
                for r in range(n_reps):
                    new_p[r].append(_mul(prods[r][sel], flat[r, l]))
            words = np.vstack(new_w)
            codes = np.concatenate(new_c)
            prods = [np.vstack(p) for p in new_p]
        keep = (words[:, -1] != (first ^ 1)) & _min_rotation_mask(codes, k, n_letters)
        if np.any(keep):
            tr = np.stack([np.abs(p[keep, 0] + p[keep, 3]) for p in prods], axis=1)
            hyp = np.all(tr > 2.0 + HYPERBOLIC_MARGIN, axis=1)
            out_words.extend(tuple(int(x) for x in w) for w in words[keep][hyp])
            out_tr.append(tr[hyp])
    tr = np.vstack(out_tr) if out_tr else np.zeros((0, n_reps))
    return out_words, tr


def _cluster_ids(tr: np.ndarray, quantum: float) -> np.ndarray:
    """Single-linkage clustering on each trace column in turn, relative tolerance."""
    n = len(tr)
    gid = np.zeros(n, dtype=np.int64)
    for col in range(tr.shape[1]):
        order = np.lexsort((tr[:, col], gid))
        v = tr[order, col]
        g = gid[order]
        tol = quantum * np.maximum(1.0, np.abs(v))
        brk = np.ones(n, dtype=bool)
        brk[1:] = (g[1:] != g[:-1]) | (np.diff(v) > tol[1:])
        new = np.cumsum(brk) - 1
        gid = np.empty(n, dtype=np.int64)
        gid[order] = new
    return gid


def auxiliary_representation(rep: SurfaceRepresentation) -> SurfaceRepresentation:
    """Fixed generic deformation used to split classes that share trace pairs."""
    from .surface_rep import random_direction

    rng = np.random.default_rng(AUX_SEED)
    return deform(rep, random_direction(rep, rng), AUX_T)


def enumerate_classes(pair: GHPair, max_word_len: int, threads: int | None = None,
                      quantum: float = DEDUPE_QUANTUM, separate: bool = True) -> LengthSpectrum:
    """Oriented conjugacy classes of hyperbolic elements up to a word-length cutoff.

    Classes are identified by tolerance-clustered trace triples
    (tr_L, tr_R, tr_aux), where the auxiliary trace comes from a fixed generic
    deformation of the left factor. Each cluster is emitted twice, once for
    gamma and once for gamma^-1, which share all traces.
    """
    if not 0 <= max_word_len <= MAX_WORD_LEN:
        raise ValueError(f"max_word_len must be in [0, {MAX_WORD_LEN}]")
    names = pair.presentation.generator_names
    if max_word_len == 0:
        return LengthSpectrum([], 0, names, quantum)
    reps = [pair.left, pair.right]
    if separate:
        reps.append(auxiliary_representation(pair.left))
    letter_mats = np.array([_letter_matrices(r.matrices) for r in reps])
    n_letters = letter_mats.shape[1]
    jobs = [(f, letter_mats, max_word_len) for f in range(n_letters)]
    threads = threads or os.cpu_count() or 1
    if threads > 1 and max_word_len >= 5:
        with ProcessPoolExecutor(max_workers=min(threads, n_letters)) as ex:
            results = list(ex.map(_enumerate_shard, jobs))
    else:
        results = [_enumerate_shard(j) for j in jobs]
    words = [w for ws, _ in results for w in ws]
    if not words:
        return LengthSpectrum([], max_word_len, names, quantum)
    tr = np.vstack([t for _, t in results])
    gid = _cluster_ids(tr, quantum)

    # representative per cluster: shortest word, then lexicographically smallest
    wl = np.array([len(w) for w in words])
    codes = np.array([_word_code(w, n_letters) for w in words])
    order = np.lexsort((codes, wl, gid))
    first_in_cluster = np.ones(len(order), dtype=bool)
    first_in_cluster[1:] = gid[order][1:] != gid[order][:-1]
    reps_idx = order[first_in_cluster]

    entries = []
    for i in reps_idx:
        w = words[i]
        tl, tr_r = float(tr[i, 0]), float(tr[i, 1])
        ll, lr = float(translation_length_from_trace(tl)), float(translation_length_from_trace(tr_r))
        for word in (w, canonical_rotation(inverse_word(w))):
            entries.append(SpectrumEntry(word, tl, tr_r, ll, lr, ads_length(ll, lr)))
    entries.sort(key=lambda e: (e.len, e.tr_L, e.tr_R, len(e.canonical_word),
                                _word_code(e.canonical_word, n_letters)))
    return LengthSpectrum(entries, max_word_len, names, quantum)


def _word_code(word, base):
    c = 0
    for l in word:
        c = c * base + l
    return c


def counting_function(spec: LengthSpectrum, T: float) -> int:
    if T < 0:
        raise ValueError("T must be nonnegative")
    return int(np.searchsorted(np.sort(spec.lengths), T, side="right"))


def min_generator_length(spec: LengthSpectrum) -> float:
    gens = [e.len for e in spec.entries if len(e.canonical_word) == 1]
    if not gens:
        raise InsufficientData("spectrum has no generator entries")
    return min(gens)


# -- entropy -----------------------------------------------------------------

@dataclass(frozen=True)
class EntropyEstimate:
    value: float
    window: tuple[float, float]
    slope_stderr: float
    sample_count: int


def entropy_estimate(spec, window: tuple[float, float], samples: int = 64,
                     correction: str = "none") -> EntropyEstimate:
    """Least-squares slope of log N(T) against T on an even grid over ``window``.

    ``spec`` is a LengthSpectrum or a plain array of lengths. The word-length
    cutoff truncates long geodesics, so the window should sit where the
    enumeration is complete.

    ``correction="prime-orbit"`` fits log(T N(T)) instead. Closed geodesics
    satisfy N(T) ~ e^{hT}/(hT), so the plain slope is biased low by about
    1/T on short windows; multiplying by T removes the leading term.
    """
    if correction not in ("none", "prime-orbit"):
        raise ValueError(f"unknown correction {correction!r}")
    lo, hi = map(float, window)
    if not lo < hi:
        raise InsufficientData("window must satisfy T_lo < T_hi")
    lens = np.sort(spec.lengths if isinstance(spec, LengthSpectrum) else np.asarray(spec, float))
    grid = np.linspace(lo, hi, samples)
    counts = np.searchsorted(lens, grid, side="right")
    ok = counts > 0
    if np.count_nonzero(ok) < 10 or len(np.unique(counts[ok])) < 2:
        raise InsufficientData(
            f"only {np.count_nonzero(ok)} grid points with N(T) > 0 in window {window}"
        )
    T = grid[ok]
    y = np.log(counts[ok])
    if correction == "prime-orbit":
        y = y + np.log(T)
    A = np.vstack([T, np.ones_like(T)]).T
    coef, _, _, _ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(len(T) - 2, 1)
    s2 = float(resid @ resid) / dof
    stderr = math.sqrt(s2 / float(np.sum((T - T.mean()) ** 2)))
    return EntropyEstimate(float(coef[0]), (lo, hi), stderr, int(len(T)))


def cutoff_window(spec: LengthSpectrum, fraction_lo: float = 0.5, fraction_hi: float = 1.0):
    """Window under the cutoff rule T_hi <= c_min * max_word_len."""
    c = min_generator_length(spec) * spec.max_word_len
    return (fraction_lo * c, fraction_hi * c)


def horizon_window(spec: LengthSpectrum) -> tuple[float, float]:
    """(T/2, T) with T the shortest length reached only by words of maximal length.

    Words at the cutoff length only start contributing at T, so below it
    N(T) is not yet flattened by truncation. The window also satisfies the
    cutoff rule T <= c_min * max_word_len.
    """
    top = [e.len for e in spec.entries if len(e.canonical_word) == spec.max_word_len]
    if not top:
        raise InsufficientData("spectrum has no words of maximal length")
    hi = float(min(top))
    return (0.5 * hi, hi)


# -- degeneracy tests ----------------------------------------------------------

def _class_words(spec: LengthSpectrum) -> list[tuple[int, ...]]:
    return [e.canonical_word for e in spec.entries]


def _ads_lengths_fast(pair: GHPair, words) -> np.ndarray:
    """AdS lengths of many words, evaluated in batches of equal word length."""
    out = np.empty(len(words))
    by_len: dict[int, list[int]] = {}
    for i, w in enumerate(words):
        by_len.setdefault(len(w), []).append(i)
    sides = []
    for rep in (pair.left, pair.right):
        sides.append(rep.letters.reshape(-1, 4))
    for k, idx in by_len.items():
        W = np.array([words[i] for i in idx], dtype=np.int64)
        lens = []
        for flat in sides:
            P = flat[W[:, 0]].copy()
            for j in range(1, k):
                L = flat[W[:, j]]
                a, b, c, d = P[:, 0], P[:, 1], P[:, 2], P[:, 3]
                e, f, g, h = L[:, 0], L[:, 1], L[:, 2], L[:, 3]
                P = np.stack([a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h], axis=1)
            lens.append(translation_length_from_trace(P[:, 0] + P[:, 3]))
        out[idx] = ads_length(lens[0], lens[1])
    return out


@dataclass(frozen=True)
class DerivativeReport:
    max_rel_derivative: float
    max_rel_derivative_half_step: float
    n_classes: int


def _central_difference(path: Callable[[float], GHPair], words, eps: float):
    plus = _ads_lengths_fast(path(eps), words)
    minus = _ads_lengths_fast(path(-eps), words)
    base = _ads_lengths_fast(path(0.0), words)
    return (plus - minus) / (2 * eps), base


def _check_eps(eps):
    if not 1e-5 <= eps <= 1e-2:
        raise ValueError("eps must lie in [1e-5, 1e-2]")


def bending_derivative_test(rep: SurfaceRepresentation, direction: TangentDirection, eps: float,
                            max_word_len: int, path_kind: str = "bending") -> DerivativeReport:
    """max over enumerated classes of |d ell / dt| / ell at t = 0 along a path.

    ``path_kind`` "bending" uses the (v, -v) path; "same" uses (v, v).
    """
    _check_eps(eps)
    direction = direction if direction.gauge_normalized else direction.normalized(rep)
    cache: dict[float, GHPair] = {}

    def path(t):
        if t not in cache:
            if path_kind == "bending":
                cache[t] = pure_bending_path(rep, direction, t)
            elif path_kind == "same":
                r = deform(rep, direction, t)
                cache[t] = GHPair(r, r)
            else:
                raise ValueError(f"unknown path kind {path_kind!r}")
        return cache[t]

    spec = enumerate_classes(GHPair.fuchsian(rep), max_word_len)
    words = _class_words(spec)
    d1, base = _central_difference(path, words, eps)
    d2, _ = _central_difference(path, words, eps / 2)
    return DerivativeReport(float(np.max(np.abs(d1) / base)), float(np.max(np.abs(d2) / base)),
                            len(words))


@dataclass(frozen=True)
class ProportionalityReport:
    k_fit: float
    rel_residual: float
    richardson_gap: float
    n_classes: int


def proportionality_test(path: Callable[[float], GHPair], eps: float, max_word_len: int) -> ProportionalityReport:
    """Least-squares fit of d ell(gamma)/dt = k * ell(gamma) over enumerated classes."""
    _check_eps(eps)
    cache: dict[float, GHPair] = {}

    def cached(t):
        if t not in cache:
            cache[t] = path(t)
        return cache[t]

    spec = enumerate_classes(cached(0.0), max_word_len)
    words = _class_words(spec)
    d, ell = _central_difference(cached, words, eps)
    d_half, _ = _central_difference(cached, words, eps / 2)
    # Richardson combination cancels the O(eps^2) term
    d_rich = (4 * d_half - d) / 3
    k = float(ell @ d_rich / (ell @ ell))
    rel = float(np.linalg.norm(d_rich - k * ell) / np.linalg.norm(ell))
    gap = float(np.linalg.norm(d_rich - d) / max(np.linalg.norm(ell), 1e-300))
    return ProportionalityReport(k, rel, gap, len(words))


# -- closed-form checks ----------------------------------------------------------

def eigen_expansion_check(A, B, n_range: Sequence[int]):
    """Remainders of log mu_n against n log lam + log a + lam^-2n (ad - 1)/a^2.

    mu_n is the top eigenvalue of A^n B from the quadratic formula. The
    remainder is of order lam^-4n, far below double precision of log mu_n,
    so the arithmetic runs in mpmath with enough digits for the largest n.
    Returns a list of (n, r_n, r_n * lam^{4n}) as floats.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    lam_f = float(A[0, 0])
    if abs(A[0, 1]) > 0 or abs(A[1, 0]) > 0 or not lam_f > 1:
        raise ValueError("A must be diag(lam, 1/lam) with lam > 1")
    a, b, c, d = (float(v) for v in B.ravel())
    if b * c == 0:
        raise DegenerateConfiguration("b*c = 0: A and B share an axis")
    if not a > 0:
        raise ValueError("expansion needs a > 0")
    n_max = max(n_range)
    digits = 30 + int(6 * n_max * math.log10(lam_f))
    out = []
    with mpmath.workdps(digits):
        lam = mpmath.mpf(lam_f)
        a_, d_ = mpmath.mpf(a), mpmath.mpf(d)
        for n in n_range:
            t = lam ** n * a_ + lam ** (-n) * d_
            if not t > 2:
                raise NotHyperbolic(f"A^{n} B has trace {float(t):.6g} <= 2")
            mu = (t + mpmath.sqrt(t * t - 4)) / 2
            approx = n * mpmath.log(lam) + mpmath.log(a_) + lam ** (-2 * n) * (a_ * d_ - 1) / a_ ** 2
            r = mpmath.log(mu) - approx
            out.append((n, float(r), float(r * lam ** (4 * n))))
    return out


@dataclass(frozen=True)
class TraceCheck:
    lhs: float
    rhs: float

    @property
    def rel_error(self) -> float:
        return abs(self.lhs - self.rhs) / abs(self.rhs)


def trace_so22_from_lengths(len_l: float, len_r: float) -> float:
    s, dlt = (len_l + len_r) / 2, (len_l - len_r) / 2
    return math.exp(s) + math.exp(dlt) + math.exp(-dlt) + math.exp(-s)


def trace_so22_check(pair: GHPair, word: Sequence[int]) -> TraceCheck:
    L = evaluate_word_matrix(pair.left, word)
    R = evaluate_word_matrix(pair.right, word)
    tl, tr = np.trace(L), np.trace(R)
    if abs(tl) <= 2 + 1e-12 or abs(tr) <= 2 + 1e-12:
        raise NotHyperbolic("both images must be hyperbolic")
    # PSL sign: make both lifts have positive trace
    L = L * np.sign(tl)
    R = R * np.sign(tr)
    lhs = float(np.trace(rho_so22_matrix(L, R)))
    rhs = trace_so22_from_lengths(float(translation_length_from_trace(tl)),
                                  float(translation_length_from_trace(tr)))
    return TraceCheck(lhs, rhs)
