"""Frame inner product, sharp/star/codifferential and harmonic tangent forms.

Everything here lives on the upper half-plane chart of the Fuchsian
embedding into the (2,2) hyperboloid. Forms are sampled on rectangular
grids and differentiated with centered differences.

Array conventions: a Lie-algebra valued 1-form on a grid is a complex array
of shape (nx, ny, 2, 4, 4), with axis 2 holding the dx and dy components.
Scalar fields have shape (nx, ny) with ``X[i, j] = x0 + i h``.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import GramSingular, InvalidElement
from .linalg_lie import E_MATRICES, Q, Q_TABLE, phi_alg_matrix, q_conjugate

GRAM_COND_WARN = 1e8
# residuals below this are treated as exact zeros when judging convergence order
RESIDUAL_FLOOR = 1e-9


def _xy(z):
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise ValueError("points must lie in the upper half-plane")
    return z.real, z.imag


def embed_hyperboloid(z) -> np.ndarray:
    """Equivariant embedding of the upper half-plane into the (2,1) hyperboloid."""
    x, y = _xy(z)
    s = x * x + y * y
    return np.stack([x / y, (s - 1) / (2 * y), (s + 1) / (2 * y), np.zeros_like(x)], axis=-1)


def hyperboloid_defect(v) -> np.ndarray:
    """x1^2 + x2^2 - x3^2 - x4^2 + 1."""
    v = np.asarray(v)
    return v[..., 0] ** 2 + v[..., 1] ** 2 - v[..., 2] ** 2 - v[..., 3] ** 2 + 1


def frame_matrices(z) -> tuple[np.ndarray, np.ndarray]:
    """(H, H^-1) at z; vectorized over arrays of points."""
    x, y = _xy(z)
    s = x * x + y * y
    y2 = y * y
    H = np.zeros(np.shape(x) + (4, 4))
    H[..., 0, 0] = 2 * x * x / y2 + 1
    H[..., 0, 1] = H[..., 1, 0] = x * (s - 1) / y2
    H[..., 0, 2] = H[..., 2, 0] = -x * (s + 1) / y2
    H[..., 1, 1] = (s - 1) ** 2 / (2 * y2) + 1
    H[..., 1, 2] = H[..., 2, 1] = -(s - 1) * (s + 1) / (2 * y2)
    H[..., 2, 2] = (s + 1) ** 2 / (2 * y2) - 1
    H[..., 3, 3] = 1.0
    Hinv = H.copy()
    for i, j in ((0, 2), (2, 0), (1, 2), (2, 1)):
        Hinv[..., i, j] = -H[..., i, j]
    return H, Hinv


@dataclass(frozen=True, eq=False)
class FrameMetric:
    H: np.ndarray
    Hinv: np.ndarray

    def __post_init__(self):
        err = np.abs(self.H @ self.Hinv - np.eye(4)).max()
        if err > 1e-10 * max(1.0, np.abs(self.H).max()) ** 2:
            raise InvalidElement(f"H Hinv - I has max error {err:.3e}")
        np.linalg.cholesky(self.H)

    def q_pushed(self) -> "FrameMetric":
        return FrameMetric(Q @ self.H @ Q, Q @ self.Hinv @ Q)


def frame_metric(z: complex) -> FrameMetric:
    H, Hinv = frame_matrices(z)
    return FrameMetric(H, Hinv)


def _metric(z, q: bool):
    H, Hinv = frame_matrices(z)
    if q:
        qq = np.multiply.outer(np.diag(Q), np.diag(Q))
        H, Hinv = H * qq, Hinv * qq
    return H, Hinv


def iota_matrices(H, Hinv, A, B) -> np.ndarray:
    """tr(A^t H conj(B) H^-1), vectorized over leading axes.

    This is the trace form induced by the inner product with Gram matrix H
    on R^4 (the adjoint of A is H^-1 A^t H). It is conjugate-linear in B.
    """
    M = H @ np.conj(B) @ Hinv
    return np.einsum("...ij,...ij->...", A, M)


def iota(z, A, B, q: bool = False):
    """Frame inner product of two (complex) so(2,2) matrices at z.

    ``q=True`` uses the pushed metric Q H Q.
    """
    H, Hinv = _metric(z, q)
    A = getattr(A, "m", A)
    B = getattr(B, "m", B)
    return iota_matrices(H, Hinv, np.asarray(A), np.asarray(B))


def gram(z, q: bool = False) -> np.ndarray:
    """G[..., i, j] = iota(E_i, E_j); real symmetric positive definite."""
    H, Hinv = _metric(z, q)
    Hx = H[..., None, None, :, :]
    Hix = Hinv[..., None, None, :, :]
    return iota_matrices(Hx, Hix, E_MATRICES[:, None], E_MATRICES[None, :]).real


def sharp(z, A, q: bool = False) -> np.ndarray:
    """Coefficients iota(A, E_i) in the dual basis, vectorized over nodes."""
    H, Hinv = _metric(z, q)
    A = np.asarray(getattr(A, "m", A))
    # iota(A, E_k) = sum A * (H E_k H^-1)
    M = np.einsum("...ij,kjl,...lm->...kim", H, E_MATRICES, Hinv)
    return np.einsum("...ij,...kij->...k", A, M)


def unsharp(z, c, q: bool = False) -> np.ndarray:
    """Inverse of ``sharp``: the matrix A with iota(A, E_i) = c_i."""
    G = gram(z, q)
    cond = np.linalg.cond(G)
    if not np.all(np.isfinite(cond)):
        raise GramSingular("Gram matrix of iota is singular")
    if np.any(cond > GRAM_COND_WARN):
        warnings.warn(f"Gram matrix condition number up to {np.max(cond):.2e}", stacklevel=2)
    # iota(sum a_j E_j, E_i) = sum_j G[j, i] a_j
    a = np.linalg.solve(np.swapaxes(G, -1, -2), np.asarray(c)[..., None])[..., 0]
    return np.einsum("...k,kij->...ij", a, E_MATRICES)


def sharp_closed_forms(z) -> np.ndarray:
    """Rows sharp(E_1), sharp(E_2), sharp(E_3) as explicit functions of z."""
    x, y = _xy(z)
    s = x * x + y * y
    k = 4 / (y * y)
    zero = np.zeros_like(x)
    rows = [
        [np.ones_like(x), x, -x * x],
        [x, x * x + y * y / 2, -x * s],
        [-x * x, -x * s, s * s],
    ]
    return np.stack([np.stack([k * v for v in r] + [zero] * 3, axis=-1) for r in rows], axis=-2)


# -- forms --------------------------------------------------------------------

def hodge_star_1form(p, q):
    """Anti-linear star on (dx, dy) components: p dx + q dy -> -conj(q) dx + conj(p) dy.

    On real forms this is dx -> dy, dy -> -dx; on dz it gives i dzbar.
    """
    return -np.conj(q), np.conj(p)


def x_z(z) -> np.ndarray:
    """The sl(2) field [[-z, z^2], [-1, z]]."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = -z
    out[..., 0, 1] = z * z
    out[..., 1, 0] = -1
    out[..., 1, 1] = z
    return out


def _eval_phi(phi, z):
    if callable(phi):
        return np.asarray(phi(z), dtype=complex) * np.ones_like(z)
    coeffs = np.asarray(phi, dtype=complex)
    return np.polynomial.polynomial.polyval(z, coeffs) * np.ones_like(z)


def principal_form(z, phi: Sequence[complex] | Callable) -> np.ndarray:
    """phi(z) dz (x) Phi(X_z) as (dx, dy) components, shape (..., 2, 4, 4).

    ``phi`` is a coefficient list (constant term first) or a callable.
    """
    z = np.asarray(z, dtype=complex)
    val = _eval_phi(phi, z)[..., None, None] * phi_alg_matrix(x_z(z))
    return np.stack([val, 1j * val], axis=-3)


@dataclass(frozen=True)
class GridPatch:
    x0: float
    x1: float
    y0: float
    y1: float
    h: float

    def __post_init__(self):
        if not self.y0 - self.h > 0:
            raise ValueError("patch must satisfy y0 - h > 0")
        for span in (self.x1 - self.x0, self.y1 - self.y0):
            n = span / self.h
            if span <= 0 or abs(n - round(n)) > 1e-9 * max(1.0, n):
                raise ValueError("patch sides must be positive multiples of h")

    @property
    def shape(self) -> tuple[int, int]:
        return (round((self.x1 - self.x0) / self.h) + 1, round((self.y1 - self.y0) / self.h) + 1)

    def nodes(self) -> np.ndarray:
        nx, ny = self.shape
        x = self.x0 + self.h * np.arange(nx)
        y = self.y0 + self.h * np.arange(ny)
        X, Y = np.meshgrid(x, y, indexing="ij")
        return X + 1j * Y

    def interior(self) -> np.ndarray:
        return self.nodes()[1:-1, 1:-1]

    def cell_centers(self) -> np.ndarray:
        Z = self.nodes()
        return 0.25 * (Z[:-1, :-1] + Z[1:, :-1] + Z[:-1, 1:] + Z[1:, 1:])

    def refined(self) -> "GridPatch":
        return GridPatch(self.x0, self.x1, self.y0, self.y1, self.h / 2)


def d_exterior(form: np.ndarray, patch: GridPatch) -> np.ndarray:
    """Centered-difference curl dq/dx - dp/dy on interior nodes.

    ``form`` has shape (nx, ny, 2, ...); the trailing value axes are carried.
    """
    p, q = form[:, :, 0], form[:, :, 1]
    dq_dx = (q[2:, 1:-1] - q[:-2, 1:-1]) / (2 * patch.h)
    dp_dy = (p[1:-1, 2:] - p[1:-1, :-2]) / (2 * patch.h)
    return dq_dx - dp_dy


def delta_coboundary(form: np.ndarray, patch: GridPatch, q: bool = False) -> np.ndarray:
    """-(sharp^-1 star^-1 d star sharp) of a 1-form, on interior nodes.

    The 2-form inverse star uses the hyperbolic area density 1/y^2 and is
    anti-linear like the 1-form star.
    """
    Z = patch.nodes()
    c = sharp(Z[:, :, None], form, q=q)              # (nx, ny, 2, 6)
    sp, sq = hodge_star_1form(c[:, :, 0], c[:, :, 1])
    two_form = d_exterior(np.stack([sp, sq], axis=2), patch)   # (nx-2, ny-2, 6)
    Zi = Z[1:-1, 1:-1]
    zero_form = np.conj(two_form * (Zi.imag ** 2)[..., None])
    return -unsharp(Zi, zero_form, q=q)


def principal_form_grid(patch: GridPatch, phi, q: bool = False) -> np.ndarray:
    form = principal_form(patch.nodes(), phi)
    return q_conjugate(form) if q else form


def harmonicity_residuals(patch: GridPatch, phi, q: bool = False) -> tuple[float, float]:
    """(max |d form|, max |delta form|) over interior nodes."""
    form = principal_form_grid(patch, phi, q)
    return (float(np.abs(d_exterior(form, patch)).max()),
            float(np.abs(delta_coboundary(form, patch, q)).max()))


def convergence_ratio(r_h: float, r_half: float, floor: float = RESIDUAL_FLOOR) -> float:
    """r(h/2)/r(h); nan when both residuals are at roundoff (exact to the floor)."""
    if r_h <= floor and r_half <= floor:
        return float("nan")
    return r_half / r_h


def second_order_ok(r_h: float, r_half: float, lo: float = 0.2, hi: float = 0.35,
                    floor: float = RESIDUAL_FLOOR) -> bool:
    ratio = convergence_ratio(r_h, r_half, floor)
    return bool(np.isnan(ratio) or lo <= ratio <= hi)


@dataclass(frozen=True)
class PatchReport:
    patch: tuple[float, float, float, float]
    h: float
    residual_d_max: float
    residual_delta_max: float
    convergence_ratio: tuple[float, float]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def patch_report(patch: GridPatch, phi, q: bool = False) -> PatchReport:
    """Residuals at h and the ratios (d, delta) from halving h."""
    rd, rdel = harmonicity_residuals(patch, phi, q)
    rd2, rdel2 = harmonicity_residuals(patch.refined(), phi, q)
    return PatchReport((patch.x0, patch.x1, patch.y0, patch.y1), patch.h, rd, rdel,
                       (convergence_ratio(rd, rd2), convergence_ratio(rdel, rdel2)))


@dataclass(frozen=True)
class WPPairing:
    lhs: float
    rhs: float

    @property
    def ok(self) -> bool:
        return abs(self.lhs - self.rhs) <= 1e-12 * (1 + abs(self.rhs))


def wp_patch_pairing(phi, psi, patch: GridPatch) -> WPPairing:
    """Integral of iota(xi_phi, star xi_psi) against 32 times the WP product.

    lhs wedges phi dz (x) Phi(X_z) with the star of the psi form using the
    computed iota (dz ^ i dzbar = 2 dx dy); rhs is 32 Re(phi conj(psi)) y^2.
    Both use the midpoint rule at the same cell centers.
    """
    Z = patch.cell_centers()
    M = phi_alg_matrix(x_z(Z))
    a = _eval_phi(phi, Z)[..., None, None] * M
    b = _eval_phi(psi, Z)[..., None, None] * M
    lhs_density = (2 * iota(Z, a, b)).real
    rhs_density = 32 * (_eval_phi(phi, Z) * np.conj(_eval_phi(psi, Z))).real * Z.imag ** 2
    area = patch.h ** 2
    return WPPairing(float(lhs_density.sum() * area), float(rhs_density.sum() * area))


@dataclass(frozen=True)
class QIsometryReport:
    hq_symmetric_error: float
    hq_positive_definite: bool
    invariance_error: float
    table_ok: bool

    @property
    def ok(self) -> bool:
        return (self.hq_symmetric_error <= 1e-12 and self.hq_positive_definite
                and self.invariance_error <= 1e-10 and self.table_ok)


def q_table_ok() -> bool:
    for i, (sign, j) in Q_TABLE.items():
        if not np.array_equal(q_conjugate(E_MATRICES[i - 1]), sign * E_MATRICES[j - 1]):
            return False
    return True


def q_isometry_check(z, A, B) -> QIsometryReport:
    """iota under the pushed metric Q H Q agrees with iota after conjugating by Q."""
    Hq, _ = _metric(z, True)
    try:
        np.linalg.cholesky(Hq)
        spd = True
    except np.linalg.LinAlgError:
        spd = False
    A = np.asarray(getattr(A, "m", A))
    B = np.asarray(getattr(B, "m", B))
    lhs = iota(z, q_conjugate(A), q_conjugate(B), q=True)
    rhs = iota(z, A, B)
    err = float(np.abs(lhs - rhs) / max(1.0, abs(rhs)))
    return QIsometryReport(float(np.abs(Hq - Hq.T).max()), spd, err, q_table_ok())
