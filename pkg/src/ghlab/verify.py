"""Numerical checks of every identity the library implements, grouped by criterion.

Each check returns ``CheckRow`` records; ``run_suite`` collects them and
``format_table`` prints a pass/fail table. The CLI ``verify`` command and the
acceptance tests both drive this module.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import ads_metric as am
from . import linalg_lie as ll
from . import spectrum as sp
from . import surface_rep as sr
from . import thermo as th
from .errors import NotHyperbolic


@dataclass(frozen=True)
class CheckRow:
    criterion: int
    name: str
    value: float
    bound: str
    passed: bool
    seconds: float = 0.0


def _rel(a, b) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))


def random_points(rng: np.random.Generator, n: int) -> np.ndarray:
    """Points with |x| <= 1, y in [0.2, 5].

    Every identity checked here is invariant under x-translation, and H
    entries grow like (x^2 + y^2)^2 / y^2, so wider strips only add roundoff.
    """
    return rng.uniform(-1, 1, n) + 1j * rng.uniform(0.2, 5, n)


def random_sl2_stack(rng: np.random.Generator, n: int) -> np.ndarray:
    return np.array([ll.random_sl2(rng) for _ in range(n)])


def random_so22_algebra(rng: np.random.Generator, n: int, complex_: bool = False) -> np.ndarray:
    coeffs = rng.normal(size=(n, 6))
    if complex_:
        coeffs = coeffs + 1j * rng.normal(size=(n, 6))
    return np.einsum("nk,kij->nij", coeffs, ll.E_MATRICES)


# -- 1: algebraic identities -------------------------------------------------------

def check_identities(seed: int = 0) -> list[CheckRow]:
    rng = np.random.default_rng(seed)
    rows = []
    A = random_sl2_stack(rng, 1000)
    B = random_sl2_stack(rng, 1000)
    PA, PB = ll.phi_group_matrix(A), ll.phi_group_matrix(B)
    PAB = ll.phi_group_matrix(A @ B)
    rows.append(CheckRow(1, "Phi(AB) = Phi(A) Phi(B)", _rel(PA @ PB, PAB), "<= 1e-10",
                         _rel(PA @ PB, PAB) <= 1e-10))
    err = _rel(np.swapaxes(PA, -1, -2) @ ll.J @ PA, np.broadcast_to(ll.J, PA.shape))
    rows.append(CheckRow(1, "Phi(A)^t J Phi(A) = J", err, "<= 1e-10", err <= 1e-10))

    X = rng.normal(size=(200, 2, 2))
    X[:, 1, 1] = -X[:, 0, 0]
    Y = rng.normal(size=(200, 2, 2))
    Y[:, 1, 1] = -Y[:, 0, 0]
    fx, fy = ll.phi_alg_matrix(X), ll.phi_alg_matrix(Y)
    err = _rel(fx @ fy - fy @ fx, ll.phi_alg_matrix(X @ Y - Y @ X))
    rows.append(CheckRow(1, "Phi_alg preserves brackets", err, "<= 1e-8", err <= 1e-8))
    err = max(_rel(ll.phi_group_matrix(ll.sl2_exp(x)), ll.so22_exp(ll.phi_alg_matrix(x))) for x in X)
    rows.append(CheckRow(1, "Phi(exp X) = exp(Phi_alg X)", err, "<= 1e-8", err <= 1e-8))
    defect = float(np.abs(np.einsum("nji,jk->nik", fx, ll.J) + ll.J @ fx).max())
    rows.append(CheckRow(1, "Phi_alg lands in so(2,2)", defect, "<= 1e-12", defect <= 1e-12))

    ok = am.q_table_ok()
    rows.append(CheckRow(1, "Q-conjugation table on E1..E6", 0.0 if ok else 1.0, "exact", ok))

    Z = random_points(rng, 1000)
    H, Hinv = am.frame_matrices(Z)
    err = float(np.max(np.abs(H @ Hinv - np.eye(4)).max(axis=(1, 2))
                       / np.abs(H).max(axis=(1, 2)) ** 2))
    rows.append(CheckRow(1, "H Hinv = I (relative to |H|^2)", err, "<= 1e-10", err <= 1e-10))
    pd = bool(np.all(np.linalg.eigvalsh(H) > 0))
    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        pd = False
    rows.append(CheckRow(1, "H positive definite", 0.0 if pd else 1.0, "Cholesky", pd))

    M = ll.phi_alg_matrix(am.x_z(Z))
    val = am.iota(Z, M, M)
    err = float(np.max(np.abs(val - 16 * Z.imag ** 2) / (16 * Z.imag ** 2)))
    rows.append(CheckRow(1, "iota(Phi X_z, Phi X_z) = 16 y^2", err, "<= 1e-10", err <= 1e-10))
    got = np.stack([am.sharp(Z, ll.E_MATRICES[k]) for k in range(3)], axis=-2)
    want = am.sharp_closed_forms(Z)
    for k in range(3):
        err = _rel(got[:, k], want[:, k])
        rows.append(CheckRow(1, f"sharp E{k + 1} closed form", err, "<= 1e-10", err <= 1e-10))

    v = am.embed_hyperboloid(Z)
    err = float(np.max(np.abs(am.hyperboloid_defect(v)) / v[:, 2] ** 2))
    rows.append(CheckRow(1, "embedding lies on the hyperboloid", err, "<= 1e-14", err <= 1e-14))
    w = (A[:, 0, 0] * Z + A[:, 0, 1]) / (A[:, 1, 0] * Z + A[:, 1, 1])
    lhs = am.embed_hyperboloid(w)
    rhs = np.einsum("nij,nj->ni", PA, v)
    err = _rel(lhs, rhs)
    rows.append(CheckRow(1, "embedding is Phi-equivariant", err, "<= 1e-10", err <= 1e-10))
    return rows


# -- 2 and 10: harmonicity -------------------------------------------------------

HARMONIC_PATCH = (0.0, 1.0, 1.0, 2.0)
HARMONIC_STEPS = (1 / 64, 1 / 128, 1 / 256)
HARMONIC_PHIS: dict[str, object] = {"1": [1], "z": [0, 1], "z^2": [0, 0, 1]}


def _residual_table(phi, q: bool) -> list[tuple[float, float]]:
    x0, x1, y0, y1 = HARMONIC_PATCH
    return [am.harmonicity_residuals(am.GridPatch(x0, x1, y0, y1, h), phi, q) for h in HARMONIC_STEPS]


def _cached_residuals(cache: dict, label: str, q: bool):
    if (label, q) not in cache:
        cache[(label, q)] = _residual_table(HARMONIC_PHIS[label], q)
    return cache[(label, q)]


def check_harmonicity(cache: dict | None = None) -> list[CheckRow]:
    cache = {} if cache is None else cache
    rows = []
    for label in HARMONIC_PHIS:
        t0 = time.perf_counter()
        res = _cached_residuals(cache, label, False)
        dt = time.perf_counter() - t0
        for which, idx in (("d", 0), ("delta", 1)):
            for k in range(len(HARMONIC_STEPS) - 1):
                r_h, r_half = res[k][idx], res[k + 1][idx]
                ratio = am.convergence_ratio(r_h, r_half)
                ok = am.second_order_ok(r_h, r_half)
                h = HARMONIC_STEPS[k]
                name = f"{which} residual ratio, phi = {label}, h = 1/{round(1 / h)}"
                if math.isnan(ratio):
                    name += f" (exact: {max(r_h, r_half):.1e})"
                rows.append(CheckRow(2, name, ratio, "in [0.2, 0.35]", ok, dt))
    t0 = time.perf_counter()
    res = _residual_table(lambda z: np.conj(z), False)
    dt = time.perf_counter() - t0
    worst = min(min(r) for r in res)
    rows.append(CheckRow(2, "anti-holomorphic control stays away from 0", worst, "> 1e-2",
                         worst > 1e-2, dt))
    return rows


def check_q_isometry(seed: int = 0, cache: dict | None = None) -> list[CheckRow]:
    cache = {} if cache is None else cache
    rng = np.random.default_rng(seed + 10)
    Z = random_points(rng, 1000)
    A = random_so22_algebra(rng, 1000, complex_=True)
    B = random_so22_algebra(rng, 1000, complex_=True)
    lhs = am.iota(Z, ll.q_conjugate(A), ll.q_conjugate(B), q=True)
    rhs = am.iota(Z, A, B)
    err = float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))))
    rows = [CheckRow(10, "iota invariant under Q-conjugation", err, "<= 1e-10", err <= 1e-10)]
    Hq, _ = am._metric(Z, True)
    spd = bool(np.all(np.linalg.eigvalsh(Hq) > 0))
    rows.append(CheckRow(10, "Q H Q positive definite", 0.0 if spd else 1.0, "eigenvalues > 0", spd))
    worst = 1.0
    for label in HARMONIC_PHIS:
        base = _cached_residuals(cache, label, False)
        pushed = _cached_residuals(cache, label, True)
        for rb, rp in zip(base, pushed):
            for a, b in zip(rb, rp):
                if a <= am.RESIDUAL_FLOOR and b <= am.RESIDUAL_FLOOR:
                    continue
                f = max(a, b) / min(a, b) if min(a, b) > 0 else math.inf
                worst = max(worst, f)
    rows.append(CheckRow(10, "Q-pushed harmonicity residuals match originals", worst,
                         "factor <= 2", worst <= 2))
    return rows


# -- 3: WP factor ------------------------------------------------------------------

def check_wp_factor(seed: int = 0) -> list[CheckRow]:
    rng = np.random.default_rng(seed + 3)
    patch = am.GridPatch(0.0, 1.0, 1.0, 2.0, 1 / 64)
    worst = 0.0
    for _ in range(20):
        phi = rng.normal(size=rng.integers(1, 6)) + 1j * rng.normal(size=1)
        psi = rng.normal(size=rng.integers(1, 6)) + 1j * rng.normal(size=1)
        r = am.wp_patch_pairing(phi, psi, patch)
        worst = max(worst, abs(r.lhs / r.rhs - 1))
    return [CheckRow(3, "WP pairing lhs/rhs - 1 on 20 random pairs", worst, "<= 1e-12", worst <= 1e-12)]


# -- 4: base point and deformations ------------------------------------------------

def check_deformations(seed: int = 0) -> list[CheckRow]:
    rep = sr.octagon_fuchsian()
    rows = [CheckRow(4, "octagon relator residual", rep.residual, "<= 1e-9", rep.residual <= 1e-9)]
    rng = np.random.default_rng(seed + 4)
    worst = 0.0
    for _ in range(5):
        v = sr.random_direction(rep, rng)
        for t in (-0.3, -0.2, -0.1, 0.1, 0.2, 0.3):
            worst = max(worst, sr.deform(rep, v, t).residual)
    rows.append(CheckRow(4, "deformed relator residual, |t| <= 0.3", worst, "<= 1e-9", worst <= 1e-9))
    return rows


# -- 5: entropy ----------------------------------------------------------------------

def check_entropy(threads: int | None = None, max_word_len: int = 8) -> list[CheckRow]:
    rep = sr.octagon_fuchsian()
    t0 = time.perf_counter()
    fuchs = sp.enumerate_classes(sr.GHPair.fuchsian(rep), max_word_len, threads=threads)
    win = sp.horizon_window(fuchs)
    ef = sp.entropy_estimate(fuchs, win, correction="prime-orbit")
    plain_f = sp.entropy_estimate(fuchs, win)
    dt = time.perf_counter() - t0
    rows = [CheckRow(5, f"Fuchsian entropy, window [{win[0]:.3f}, {win[1]:.3f}] "
                        f"(uncorrected slope {plain_f.value:.3f})",
                     ef.value, "in [0.85, 1.15]", 0.85 <= ef.value <= 1.15, dt)]
    t0 = time.perf_counter()
    bent = sp.enumerate_classes(sr.bent_pair(rep), max_word_len, threads=threads)
    wb = sp.horizon_window(bent)
    eb = sp.entropy_estimate(bent, wb, correction="prime-orbit")
    plain_b = sp.entropy_estimate(bent, wb)
    dt = time.perf_counter() - t0
    rows.append(CheckRow(5, f"bent pair entropy (uncorrected slope {plain_b.value:.3f})",
                         eb.value, f"<= {ef.value + 0.05:.4f}", eb.value <= ef.value + 0.05, dt))
    return rows


# -- 6, 7: degeneracy ----------------------------------------------------------------

def check_bending_degeneracy(seed: int = 0, max_word_len: int = 6) -> list[CheckRow]:
    rep = sr.octagon_fuchsian()
    rng = np.random.default_rng(seed + 6)
    rows = []
    for k in range(5):
        t0 = time.perf_counter()
        v = sr.random_direction(rep, rng)
        r = sp.bending_derivative_test(rep, v, 1e-3, max_word_len)
        val = max(r.max_rel_derivative, r.max_rel_derivative_half_step)
        rows.append(CheckRow(6, f"pure bending derivative, direction {k}", val, "<= 1e-9",
                             val <= 1e-9, time.perf_counter() - t0))
    return rows


def bent_path(pair: sr.GHPair, rng: np.random.Generator) -> Callable[[float], sr.GHPair]:
    """Path through ``pair`` along independent random left and right directions."""
    vl = sr.random_direction(pair.left, rng)
    vr = sr.random_direction(pair.right, rng)
    return lambda t: sr.GHPair(sr.deform(pair.left, vl, t), sr.deform(pair.right, vr, t))


def check_nondegeneracy(seed: int = 0, max_word_len: int = 6) -> list[CheckRow]:
    pair = sr.bent_pair()
    rng = np.random.default_rng(seed + 7)
    rows = []
    for k in range(5):
        t0 = time.perf_counter()
        r = sp.proportionality_test(bent_path(pair, rng), 1e-3, max_word_len)
        rows.append(CheckRow(7, f"proportionality residual at bent pair, direction {k}",
                             r.rel_residual, "> 1e-3", r.rel_residual > 1e-3,
                             time.perf_counter() - t0))
    return rows


# -- 8: eigenvalue expansion ---------------------------------------------------------

def random_admissible_pair(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """(diag(lam, 1/lam), B) with a > 0, bc != 0 and the leading remainder coefficient
    bc (1 - bc/2) / a^4 kept away from zero, so n = 2 is already asymptotic."""
    while True:
        lam = rng.uniform(2.0, 4.0)
        a = rng.uniform(0.5, 2.0)
        b, c = rng.uniform(-1.5, 1.5, size=2)
        bc = b * c
        if abs(bc) < 0.05 or abs(1 - bc / 2) < 0.25:
            continue
        d = (1 + bc) / a
        if lam ** 2 * a + d / lam ** 2 > 2 and abs(a + d) > 2:
            return np.diag([lam, 1 / lam]), np.array([[a, b], [c, d]])


def check_eigen_expansion(seed: int = 0) -> list[CheckRow]:
    rng = np.random.default_rng(seed + 8)
    worst = 0.0
    for _ in range(50):
        A, B = random_admissible_pair(rng)
        try:
            res = sp.eigen_expansion_check(A, B, range(2, 11))
        except NotHyperbolic:
            continue
        v = [abs(r[2]) for r in res]
        worst = max(worst, max(v) / v[0])
    return [CheckRow(8, "max_n |r_n| lam^4n / (|r_2| lam^8), 50 pairs", worst, "<= 10", worst <= 10)]


# -- 9: thermodynamic model -------------------------------------------------------------

def check_thermo(seed: int = 0) -> list[CheckRow]:
    rows = []
    s = th.full_shift(2)
    h = th.entropy_root(s, th.EdgeFunction.constant(s, 1.0))
    rows.append(CheckRow(9, "entropy root, full 2-shift, f = 1", abs(h - math.log(2)), "<= 1e-10",
                         abs(h - math.log(2)) <= 1e-10))
    h = th.entropy_root(s, th.EdgeFunction.from_array(s, [1.0, 2.0]))
    g = math.log((1 + math.sqrt(5)) / 2)
    rows.append(CheckRow(9, "entropy root, full 2-shift, f = (1, 2)", abs(h - g), "<= 1e-9",
                         abs(h - g) <= 1e-9))

    rng = np.random.default_rng(seed + 9)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        sh = th.random_shift(rng, int(rng.integers(3, 5)))
        f = th.EdgeFunction.from_array(sh, rng.uniform(0.5, 2.0, len(sh)))
        T = th.budget_horizon(sh, f, 300_000)
        worst = max(worst, abs(th.entropy_root(sh, f) - th.brute_force_entropy(sh, f, T, 300_000)))
    rows.append(CheckRow(9, "|entropy root - brute-force count|, 20 graphs", worst, "<= 0.08",
                         worst <= 0.08, time.perf_counter() - t0))

    F = th.EdgeFunction.constant(s, -math.log(2))
    pf = th.pressure_form(s, F, th.EdgeFunction.from_array(s, [1.0, -1.0]))
    rows.append(CheckRow(9, "pressure form on the worked example", abs(pf - 1 / math.log(2)),
                         "<= 1e-4", abs(pf - 1 / math.log(2)) <= 1e-4))

    worst_cob, least = 0.0, math.inf
    graphs = [th.random_shift(rng, int(rng.integers(3, 5))) for _ in range(10)]
    for k in range(50):
        sh = graphs[k % len(graphs)]
        F = th.normalize_to_pressure_zero(sh, th.EdgeFunction.from_array(sh, rng.normal(size=len(sh))))
        cob = th.coboundary(sh, rng.normal(size=sh.n))
        worst_cob = max(worst_cob, abs(th.pressure_form(sh, F, cob)))
        while True:
            gdir = th.tangent_projection(sh, F, th.EdgeFunction.from_array(sh, rng.normal(size=len(sh))))
            if not th.is_coboundary(sh, gdir, tol=1e-6).flag:
                break
        # the form is quadratic; unit scale keeps finite differences accurate
        gdir = gdir.scale(1 / np.abs(gdir.array(sh)).max())
        least = min(least, th.pressure_form(sh, F, gdir))
    rows.append(CheckRow(9, "pressure form on coboundaries, 50 cases", worst_cob, "<= 1e-8",
                         worst_cob <= 1e-8))
    rows.append(CheckRow(9, "pressure form on non-coboundary tangents, 50 cases", least, "> 1e-6",
                         least > 1e-6))
    return rows


# -- 11: trace diagonalization -----------------------------------------------------------

def reduced_words(n_generators: int, max_len: int):
    letters = range(2 * n_generators)
    for k in range(1, max_len + 1):
        for w in itertools.product(letters, repeat=k):
            if all(w[i + 1] != (w[i] ^ 1) for i in range(k - 1)):
                yield w


def check_trace_diagonalization(max_len: int = 4) -> list[CheckRow]:
    pair = sr.bent_pair()
    worst, n = 0.0, 0
    for w in reduced_words(pair.presentation.n_generators, max_len):
        worst = max(worst, sp.trace_so22_check(pair, w).rel_error)
        n += 1
    return [CheckRow(11, f"SO(2,2) trace vs lengths on {n} words", worst, "<= 1e-8", worst <= 1e-8)]


# -- driver ----------------------------------------------------------------------------

SUITES = {
    "identities": (1, 2, 3, 4, 8, 9, 10, 11),
    "all": tuple(range(1, 12)),
}


def run_criterion(k: int, seed: int = 0, threads: int | None = None,
                  cache: dict | None = None) -> list[CheckRow]:
    cache = {} if cache is None else cache
    runners = {
        1: lambda: check_identities(seed),
        2: lambda: check_harmonicity(cache),
        3: lambda: check_wp_factor(seed),
        4: lambda: check_deformations(seed),
        5: lambda: check_entropy(threads),
        6: lambda: check_bending_degeneracy(seed),
        7: lambda: check_nondegeneracy(seed),
        8: lambda: check_eigen_expansion(seed),
        9: lambda: check_thermo(seed),
        10: lambda: check_q_isometry(seed, cache),
        11: lambda: check_trace_diagonalization(),
    }
    return runners[k]()


def run_suite(name: str = "identities", seed: int = 0, threads: int | None = None) -> list[CheckRow]:
    cache: dict = {}
    rows = []
    for k in SUITES[name]:
        rows.extend(run_criterion(k, seed, threads, cache))
    return rows


def format_table(rows: list[CheckRow]) -> str:
    lines = []
    for r in rows:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{status}  [{r.criterion:2d}] {r.name}: {r.value:.6g} ({r.bound})")
    return "\n".join(lines)
