"""Small-matrix Lie theory linking SL(2,R) and SO_0(2,2).

Group elements are stored as plain numpy arrays wrapped in thin frozen
dataclasses that validate on construction. The heavy paths (word
evaluation, spectrum enumeration) work on raw arrays and only use these
wrappers at the API boundary.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import expm

from .errors import InvalidElement, NotHyperbolic

J = np.diag([1.0, 1.0, -1.0, -1.0])
Q = np.diag([-1.0, -1.0, 1.0, -1.0])

SL2_DET_TOL = 1e-12
SO22_TOL = 1e-10
ALG_TOL = 1e-12
HYPERBOLIC_TOL = 1e-12


@dataclass(frozen=True)
class SL2Element:
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if not abs(det - 1.0) <= SL2_DET_TOL:
            raise InvalidElement(f"det = {det!r}, expected 1")

    @classmethod
    def from_matrix(cls, m, normalize: bool = False) -> "SL2Element":
        m = np.asarray(m, dtype=float)
        if normalize:
            det = np.linalg.det(m)
            if det <= 0:
                raise InvalidElement("cannot normalize a matrix with det <= 0")
            m = m / np.sqrt(det)
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))

    @cached_property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    @property
    def trace(self) -> float:
        return self.a + self.d

    def inverse(self) -> "SL2Element":
        # adjugate is exact for det = 1
        return SL2Element(self.d, -self.b, -self.c, self.a)

    def __matmul__(self, other: "SL2Element") -> "SL2Element":
        return SL2Element.from_matrix(self.matrix @ other.matrix, normalize=True)

    def act(self, z: complex) -> complex:
        """Moebius action on the upper half-plane."""
        return (self.a * z + self.b) / (self.c * z + self.d)


@dataclass(frozen=True, eq=False)
class SO22Element:
    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.shape != (4, 4):
            raise InvalidElement(f"expected 4x4, got {m.shape}")
        err = np.abs(m.T @ J @ m - J).max()
        if err > SO22_TOL:
            raise InvalidElement(f"m^t J m - J has max error {err:.3e}")
        det = np.linalg.det(m)
        if abs(det - 1.0) > SO22_TOL:
            raise InvalidElement(f"det = {det!r}, expected 1")
        object.__setattr__(self, "m", m)

    @property
    def trace(self) -> float:
        return float(np.trace(self.m))

    def __matmul__(self, other: "SO22Element") -> "SO22Element":
        return SO22Element(self.m @ other.m)


@dataclass(frozen=True, eq=False)
class So22Algebra:
    """Element of so_0(2,2); complex entries allowed for the Hermitian extension."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m)
        if m.shape != (4, 4):
            raise InvalidElement(f"expected 4x4, got {m.shape}")
        err = algebra_defect(m)
        if err > ALG_TOL * max(1.0, np.abs(m).max()):
            raise InvalidElement(f"m^t J + J m has max error {err:.3e}")
        object.__setattr__(self, "m", m)


@dataclass(frozen=True)
class Sl2Algebra:
    """Traceless matrix [[a, b], [c, -a]]; entries may be complex."""

    a: complex
    b: complex
    c: complex

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, -self.a]])

    @classmethod
    def from_matrix(cls, m) -> "Sl2Algebra":
        m = np.asarray(m)
        return cls(m[0, 0], m[0, 1], m[1, 0])


def algebra_defect(m: np.ndarray) -> float:
    """Max-norm of m^t J + J m (zero exactly on so(2,2))."""
    return float(np.abs(m.T @ J + J @ m).max())


def _as_sl2_matrix(A) -> np.ndarray:
    if isinstance(A, SL2Element):
        return A.matrix
    return np.asarray(A)


def phi_group_matrix(A) -> np.ndarray:
    """4x4 image of a 2x2 matrix under the PSL(2,R) -> SO_0(2,1) isomorphism.

    Works on stacks: ``A`` of shape (..., 2, 2) gives (..., 4, 4). The (2,1)
    entry is ab - cd; the commonly printed "ad - cd" breaks m^t J m = J.
    """
    A = _as_sl2_matrix(A)
    a, b, c, d = A[..., 0, 0], A[..., 0, 1], A[..., 1, 0], A[..., 1, 1]
    out = np.zeros(A.shape[:-2] + (4, 4), dtype=np.result_type(A, float))
    out[..., 0, 0] = a * d + b * c
    out[..., 0, 1] = a * c - b * d
    out[..., 0, 2] = a * c + b * d
    out[..., 1, 0] = a * b - c * d
    out[..., 1, 1] = (a * a - b * b - c * c + d * d) / 2
    out[..., 1, 2] = (a * a + b * b - c * c - d * d) / 2
    out[..., 2, 0] = a * b + c * d
    out[..., 2, 1] = (a * a - b * b + c * c - d * d) / 2
    out[..., 2, 2] = (a * a + b * b + c * c + d * d) / 2
    out[..., 3, 3] = 1.0
    return out


def phi_group(A: SL2Element) -> SO22Element:
    return SO22Element(phi_group_matrix(A))


def phi_alg_matrix(X) -> np.ndarray:
    """Lie algebra map sl(2) -> so_0(2,2); accepts (..., 2, 2) stacks, complex ok."""
    if isinstance(X, Sl2Algebra):
        X = X.matrix
    X = np.asarray(X)
    a, b, c = X[..., 0, 0], X[..., 0, 1], X[..., 1, 0]
    out = np.zeros(X.shape[:-2] + (4, 4), dtype=np.result_type(X, float))
    out[..., 0, 1] = c - b
    out[..., 0, 2] = c + b
    out[..., 1, 0] = b - c
    out[..., 1, 2] = 2 * a
    out[..., 2, 0] = b + c
    out[..., 2, 1] = 2 * a
    return out


def phi_alg(X: Sl2Algebra) -> So22Algebra:
    return So22Algebra(phi_alg_matrix(X))


# Orthonormal basis of Mat(2,R) for the determinant form, ordered so the
# Gram matrix is diag(1, 1, -1, -1). Columns are the flattened basis
# matrices (row-major), so the change of basis is orthogonal and self-inverse.
_S = np.sqrt(0.5)
RHO_BASIS = np.array(
    [
        [_S, 0.0, _S, 0.0],
        [0.0, _S, 0.0, _S],
        [0.0, -_S, 0.0, _S],
        [_S, 0.0, -_S, 0.0],
    ]
)


def rho_so22_matrix(A, B) -> np.ndarray:
    """Matrix of M -> A M B^t in the determinant-orthonormal basis."""
    A = _as_sl2_matrix(A)
    B = _as_sl2_matrix(B)
    # row-major vec(A M B^t) = kron(A, B) vec(M)
    K = np.einsum("...ij,...kl->...ikjl", A, B).reshape(A.shape[:-2] + (4, 4))
    return RHO_BASIS.T @ K @ RHO_BASIS


def rho_so22(A: SL2Element, B: SL2Element) -> SO22Element:
    return SO22Element(rho_so22_matrix(A, B))


def translation_length_from_trace(tr):
    """2 arccosh(|tr|/2), vectorized; no hyperbolicity check."""
    t = np.abs(np.asarray(tr, dtype=float))
    return 2.0 * np.log((t + np.sqrt(np.maximum(t * t - 4.0, 0.0))) / 2.0)


def translation_length(A) -> float:
    tr = float(np.trace(_as_sl2_matrix(A)))
    if abs(tr) <= 2.0 + HYPERBOLIC_TOL:
        raise NotHyperbolic(f"|tr| = {abs(tr)!r} <= 2")
    return float(translation_length_from_trace(tr))


def ads_length(len_l, len_r):
    return 0.5 * (len_l + len_r)


def _unit(i, j, sym):
    m = np.zeros((4, 4))
    m[i, j] = 1.0
    m[j, i] = sym
    return m


def e_basis() -> list[So22Algebra]:
    """The basis E1..E6 of so_0(2,2) adapted to the Fuchsian embedding."""
    mats = [
        phi_alg_matrix(np.array([[0.0, 1.0], [0.0, 0.0]])),
        phi_alg_matrix(np.array([[0.5, 0.0], [0.0, -0.5]])),
        phi_alg_matrix(np.array([[0.0, 0.0], [1.0, 0.0]])),
        _unit(0, 3, 1.0),
        _unit(1, 3, 1.0),
        _unit(2, 3, -1.0),
    ]
    return [So22Algebra(m) for m in mats]


E_MATRICES = np.array([e.m for e in e_basis()])

# Q E_i Q^{-1} = sign * E_perm[i]
Q_TABLE = {1: (-1, 3), 2: (-1, 2), 3: (-1, 1), 4: (1, 4), 5: (1, 5), 6: (-1, 6)}


def q_conjugate(M) -> np.ndarray:
    """Q M Q^{-1} with Q = diag(-1,-1,1,-1); entrywise sign flip, works on stacks."""
    M = np.asarray(M.m if isinstance(M, (So22Algebra, SO22Element)) else M)
    q = np.diag(Q)
    return M * np.multiply.outer(q, q)


def sl2_exp(X) -> np.ndarray:
    return expm(np.asarray(X, dtype=float))


def so22_exp(X) -> np.ndarray:
    return expm(np.asarray(X))


def projective_distance(A, B) -> float:
    """min over signs of ||A -/+ B||_max (PSL comparison)."""
    A = np.asarray(A)
    B = np.asarray(B)
    return float(min(np.abs(A - B).max(), np.abs(A + B).max()))


def random_sl2(rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Random SL(2,R) matrix as exp of a Gaussian traceless matrix times a rotation."""
    a, b, c = rng.normal(scale=scale, size=3)
    theta = rng.uniform(0, 2 * np.pi)
    rot = np.array([[np.cos(theta), np.sin(theta)], [-np.sin(theta), np.cos(theta)]])
    return sl2_exp(np.array([[a, b], [c, -a]])) @ rot
