"""Closed surface group representations into PSL(2,R) and their deformations.

Words are sequences of integer *letters*: letter ``2k`` is generator
``g_k`` and ``2k + 1`` is its inverse. The human-readable form is a
dot-separated list of signed names, e.g. ``g0.g1.-g2``.
"""
from __future__ import annotations

import itertools
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidElement, NewtonDiverged, RelatorSearchFailed
from .linalg_lie import SL2Element, sl2_exp

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-9
NEWTON_TARGET = 1e-13
NEWTON_MAX_ITER = 50
RIDGE = 1e-12
MAX_DEFORM_T = 0.5

# Frobenius-orthonormal basis of sl(2,R)
SL2_BASIS = np.array(
    [
        [[np.sqrt(0.5), 0.0], [0.0, -np.sqrt(0.5)]],
        [[0.0, 1.0], [0.0, 0.0]],
        [[0.0, 0.0], [1.0, 0.0]],
    ]
)


def cache_dir() -> Path:
    return Path(os.environ.get("GHLAB_CACHE_DIR", "./cache"))


# -- words -----------------------------------------------------------------

def inverse_letter(letter: int) -> int:
    return letter ^ 1


def inverse_word(word: Sequence[int]) -> tuple[int, ...]:
    return tuple(inverse_letter(l) for l in reversed(word))


def parse_word(text: str, names: Sequence[str]) -> tuple[int, ...]:
    index = {n: i for i, n in enumerate(names)}
    letters = []
    for tok in text.split("."):
        tok = tok.strip()
        inv = tok.startswith("-")
        name = tok[1:] if inv else tok
        if name not in index:
            raise ValueError(f"unknown generator {name!r} in word {text!r}")
        letters.append(2 * index[name] + int(inv))
    return tuple(letters)


def format_word(word: Sequence[int], names: Sequence[str]) -> str:
    return ".".join(("-" if l & 1 else "") + names[l >> 1] for l in word)


def is_cyclically_reduced(word: Sequence[int]) -> bool:
    n = len(word)
    return n > 0 and all(word[i] != inverse_letter(word[(i + 1) % n]) for i in range(n))


def canonical_rotation(word: Sequence[int]) -> tuple[int, ...]:
    word = tuple(word)
    return min(word[i:] + word[:i] for i in range(len(word)))


# -- presentations and representations -------------------------------------

@dataclass(frozen=True)
class Presentation:
    genus: int
    generator_names: tuple[str, ...]
    relator: tuple[int, ...]

    def __post_init__(self):
        if self.genus < 2:
            raise ValueError("genus must be at least 2")
        if len(self.generator_names) != 2 * self.genus:
            raise ValueError("a one-relator presentation needs 2*genus generators")
        if len(self.relator) != 4 * self.genus:
            raise ValueError("relator length must be 4*genus")
        counts = np.bincount([l >> 1 for l in self.relator], minlength=2 * self.genus)
        if not np.all(counts == 2):
            raise ValueError("each generator must appear exactly twice in the relator")

    @property
    def n_generators(self) -> int:
        return len(self.generator_names)

    def signed_relator(self) -> list[int]:
        """Relator as signed 1-based generator indices (file format)."""
        return [-(l >> 1) - 1 if l & 1 else (l >> 1) + 1 for l in self.relator]

    @staticmethod
    def letters_from_signed(signed: Sequence[int]) -> tuple[int, ...]:
        return tuple(2 * (abs(s) - 1) + int(s < 0) for s in signed)


def _letter_matrices(matrices: np.ndarray) -> np.ndarray:
    """(n, 2, 2) generators -> (2n, 2, 2) letters (generator, inverse, ...)."""
    inv = np.empty_like(matrices)
    inv[:, 0, 0] = matrices[:, 1, 1]
    inv[:, 1, 1] = matrices[:, 0, 0]
    inv[:, 0, 1] = -matrices[:, 0, 1]
    inv[:, 1, 0] = -matrices[:, 1, 0]
    out = np.empty((2 * len(matrices), 2, 2))
    out[0::2] = matrices
    out[1::2] = inv
    return out


def _word_product(letters: np.ndarray, word: Sequence[int]) -> np.ndarray:
    P = np.eye(2)
    for l in word:
        P = P @ letters[l]
    return P


def _relator_residual(letters: np.ndarray, relator: Sequence[int]) -> float:
    P = _word_product(letters, relator)
    I = np.eye(2)
    return float(min(np.abs(P - I).max(), np.abs(P + I).max()))


@dataclass(frozen=True, eq=False)
class SurfaceRepresentation:
    presentation: Presentation
    matrices: np.ndarray  # (n_generators, 2, 2)
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        m = np.array(self.matrices, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "matrices", m)
        if m.shape != (self.presentation.n_generators, 2, 2):
            raise ValueError(f"matrices have shape {m.shape}")
        if self.check:
            res = self.residual
            if res > RESIDUAL_TOL:
                raise InvalidElement(f"relator residual {res:.3e} exceeds {RESIDUAL_TOL}")
            tr = np.abs(m[:, 0, 0] + m[:, 1, 1])
            if np.any(tr <= 2.0):
                raise InvalidElement("all generators must be hyperbolic")

    @property
    def letters(self) -> np.ndarray:
        return _letter_matrices(self.matrices)

    @property
    def residual(self) -> float:
        return _relator_residual(self.letters, self.presentation.relator)

    def generator(self, k: int) -> SL2Element:
        return SL2Element.from_matrix(self.matrices[k])

    def conjugate(self, g: np.ndarray) -> "SurfaceRepresentation":
        g = np.asarray(g, dtype=float)
        gi = np.array([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]]) / np.linalg.det(g)
        return SurfaceRepresentation(self.presentation, g @ self.matrices @ gi, check=self.check)

    def to_dict(self) -> dict:
        names = self.presentation.generator_names
        return {
            "genus": self.presentation.genus,
            "generators": {n: [float(v) for v in self.matrices[i].ravel()] for i, n in enumerate(names)},
            "relator": self.presentation.signed_relator(),
            "residual": self.residual,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SurfaceRepresentation":
        names = tuple(data["generators"])
        pres = Presentation(
            int(data["genus"]), names, Presentation.letters_from_signed(data["relator"])
        )
        mats = np.array([np.reshape(data["generators"][n], (2, 2)) for n in names], dtype=float)
        return cls(pres, mats)


def relator_residual(rep: SurfaceRepresentation) -> float:
    return rep.residual


def evaluate_word(rep: SurfaceRepresentation, word: Sequence[int]) -> SL2Element:
    if len(word) == 0:
        raise ValueError("empty word")
    P = _word_product(rep.letters, word)
    return SL2Element.from_matrix(P, normalize=True)


def evaluate_word_matrix(rep: SurfaceRepresentation, word: Sequence[int]) -> np.ndarray:
    """Raw product; no det renormalization."""
    return _word_product(rep.letters, word)


def save_representation(rep: SurfaceRepresentation, path) -> None:
    Path(path).write_text(json.dumps(rep.to_dict(), indent=2) + "\n")


def load_representation(path) -> SurfaceRepresentation:
    return SurfaceRepresentation.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class GHPair:
    left: SurfaceRepresentation
    right: SurfaceRepresentation

    def __post_init__(self):
        if self.left.presentation != self.right.presentation:
            raise ValueError("left and right presentations differ")
        for side in (self.left, self.right):
            if side.residual > RESIDUAL_TOL:
                raise InvalidElement("relator residual too large in GH pair")

    @property
    def presentation(self) -> Presentation:
        return self.left.presentation

    @classmethod
    def fuchsian(cls, rep: SurfaceRepresentation) -> "GHPair":
        return cls(rep, rep)


# -- the octagon base point ------------------------------------------------

def _octagon_generators() -> np.ndarray:
    s2 = np.sqrt(2.0)
    off = np.sqrt(2.0 + 2.0 * s2)
    g0 = np.array([[1.0 + s2, off], [off, 1.0 + s2]])
    c, s = np.cos(np.pi / 8), np.sin(np.pi / 8)
    r = np.array([[c, s], [-s, c]])
    ri = r.T
    gens = []
    rk, rki = np.eye(2), np.eye(2)
    for _ in range(4):
        gens.append(rk @ g0 @ rki)
        rk, rki = rk @ r, ri @ rki
    return np.array(gens)


def octagon_rotation() -> np.ndarray:
    c, s = np.cos(np.pi / 8), np.sin(np.pi / 8)
    return np.array([[c, s], [-s, c]])


def search_relator(matrices: np.ndarray, tol: float = RESIDUAL_TOL) -> tuple[int, ...]:
    """Smallest cyclically reduced length-4g word, each generator twice, equal to +-I.

    Rotations are factored out by pinning the first letter to ``g0``.
    """
    n = len(matrices)
    letters = _letter_matrices(np.asarray(matrices, dtype=float))
    found = []
    pattern = sorted(k for k in range(n) for _ in range(2))
    for perm in sorted(set(itertools.permutations(pattern))):
        if perm[0] != 0:
            continue
        for signs in itertools.product((0, 1), repeat=len(perm)):
            if signs[0]:
                continue
            word = tuple(2 * g + s for g, s in zip(perm, signs))
            if not is_cyclically_reduced(word):
                continue
            if _relator_residual(letters, word) <= tol:
                found.append(word)
    if not found:
        raise RelatorSearchFailed("no length-8 cyclic word evaluates to +-I")
    return min(found)


def _cached_octagon_relator(matrices: np.ndarray) -> tuple[int, ...]:
    path = cache_dir() / "octagon_relator.json"
    letters = _letter_matrices(matrices)
    try:
        word = tuple(json.loads(path.read_text())["relator"])
        if _relator_residual(letters, word) <= RESIDUAL_TOL:
            return word
        log.warning("cached relator in %s is stale; searching again", path)
    except (OSError, ValueError, KeyError):
        pass
    word = search_relator(matrices)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({"relator": list(word)}) + "\n")
    except OSError as exc:  # read-only cache is not fatal
        log.warning("could not write relator cache: %s", exc)
    return word


_OCTAGON = None


def octagon_fuchsian() -> SurfaceRepresentation:
    """Genus-2 Fuchsian representation from the opposite-side pairings of the regular octagon.

    Generators are ``g_k = r^k g0 r^-k`` with ``r`` the rotation by pi/4 about i.
    """
    global _OCTAGON
    if _OCTAGON is None:
        mats = _octagon_generators()
        relator = _cached_octagon_relator(mats)
        pres = Presentation(2, ("g0", "g1", "g2", "g3"), relator)
        _OCTAGON = SurfaceRepresentation(pres, mats)
    return _OCTAGON


# -- relator variety: Jacobian, tangent space, Newton projection ------------

def _relator_constraint(letters: np.ndarray, relator: Sequence[int]) -> tuple[np.ndarray, float]:
    """Traceless coordinates of sign*R - I, with sign chosen so sign*R is near I."""
    R = _word_product(letters, relator)
    sign = 1.0 if np.trace(R) >= 0 else -1.0
    D = sign * R
    F = np.array([(D[0, 0] - D[1, 1]) / 2.0, D[0, 1], D[1, 0]])
    return F, sign


def relator_jacobian(matrices: np.ndarray, relator: Sequence[int]) -> np.ndarray:
    """d F / d V for the left-multiplicative chart g_k -> exp(V_k) g_k.

    Returns a (3, 3n) matrix; V_k coordinates are in ``SL2_BASIS``.
    """
    n = len(matrices)
    letters = _letter_matrices(matrices)
    m = len(relator)
    prefix = [np.eye(2)]
    for l in relator:
        prefix.append(prefix[-1] @ letters[l])
    suffix = [np.eye(2)] * (m + 1)
    for j in range(m - 1, -1, -1):
        suffix[j] = letters[relator[j]] @ suffix[j + 1]
    sign = 1.0 if np.trace(prefix[-1]) >= 0 else -1.0
    Jac = np.zeros((3, 3 * n))
    for j, l in enumerate(relator):
        k = l >> 1
        for b in range(3):
            E = SL2_BASIS[b]
            if l & 1:
                dR = -prefix[j + 1] @ E @ suffix[j + 1]
            else:
                dR = prefix[j] @ E @ suffix[j]
            dR = sign * dR
            Jac[:, 3 * k + b] += [(dR[0, 0] - dR[1, 1]) / 2.0, dR[0, 1], dR[1, 0]]
    return Jac


def _apply_left(matrices: np.ndarray, coords: np.ndarray) -> np.ndarray:
    out = np.empty_like(matrices)
    for k in range(len(matrices)):
        V = np.tensordot(coords[3 * k: 3 * k + 3], SL2_BASIS, axes=1)
        out[k] = sl2_exp(V) @ matrices[k]
    return out


def conjugation_directions(matrices: np.ndarray) -> np.ndarray:
    """(3, 3n) coordinates of the infinitesimal conjugation orbit."""
    n = len(matrices)
    out = np.zeros((3, 3 * n))
    for a, Y in enumerate(SL2_BASIS):
        for k, g in enumerate(matrices):
            gi = np.array([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]])
            V = Y - g @ Y @ gi
            out[a, 3 * k: 3 * k + 3] = [np.sum(V * E) for E in SL2_BASIS]
    return out


def tangent_basis(rep: SurfaceRepresentation) -> np.ndarray:
    """Orthonormal basis (rows) of the relator-variety tangent, gauge-orthogonal.

    Dimension 6g - 6 for a smooth point.
    """
    Jac = relator_jacobian(rep.matrices, rep.presentation.relator)
    C = conjugation_directions(rep.matrices)
    # complement of row(Jac) + span(C)
    U, s, Vt = np.linalg.svd(np.vstack([Jac, C]))
    rank = int(np.sum(s > 1e-10 * s[0]))
    return Vt[rank:]


@dataclass(frozen=True, eq=False)
class TangentDirection:
    """Per-generator traceless perturbations (n, 2, 2)."""

    matrices: np.ndarray
    gauge_normalized: bool = False

    @property
    def coords(self) -> np.ndarray:
        return np.einsum("kij,bij->kb", self.matrices, SL2_BASIS).ravel()

    @classmethod
    def from_coords(cls, coords, gauge_normalized=False) -> "TangentDirection":
        coords = np.asarray(coords, dtype=float).reshape(-1, 3)
        mats = np.einsum("kb,bij->kij", coords, SL2_BASIS)
        return cls(mats, gauge_normalized)

    def normalized(self, rep: SurfaceRepresentation, unit: bool = False) -> "TangentDirection":
        """Project onto the gauge-orthogonal tangent space of the relator variety at rep."""
        B = tangent_basis(rep)
        c = B.T @ (B @ self.coords)
        if unit:
            nrm = np.linalg.norm(c)
            if nrm > 0:
                c = c / nrm
        return TangentDirection.from_coords(c, gauge_normalized=True)


def random_direction(rep: SurfaceRepresentation, rng: np.random.Generator) -> TangentDirection:
    raw = rng.normal(size=3 * rep.presentation.n_generators)
    return TangentDirection.from_coords(raw).normalized(rep, unit=True)


def newton_project(
    matrices: np.ndarray, relator: Sequence[int], max_iter: int = NEWTON_MAX_ITER
) -> np.ndarray:
    """Min-norm Gauss-Newton projection onto {relator = +-I}."""
    mats = np.array(matrices, dtype=float)
    best = np.inf
    for _ in range(max_iter):
        F, _ = _relator_constraint(_letter_matrices(mats), relator)
        res = float(np.abs(F).max())
        if res <= NEWTON_TARGET:
            break
        if res <= RESIDUAL_TOL and res >= 0.5 * best:
            break  # roundoff floor reached
        best = min(best, res)
        Jac = relator_jacobian(mats, relator)
        step = -Jac.T @ np.linalg.solve(Jac @ Jac.T + RIDGE * np.eye(3), F)
        mats = _apply_left(mats, step)
    letters = _letter_matrices(mats)
    res = _relator_residual(letters, relator)
    if not res <= RESIDUAL_TOL:
        raise NewtonDiverged(f"relator residual {res:.3e} after Newton projection")
    return mats


def deform(rep: SurfaceRepresentation, direction: TangentDirection, t: float) -> SurfaceRepresentation:
    """Move along ``direction`` by ``t`` and project back onto the relator variety."""
    if not abs(t) <= MAX_DEFORM_T:
        raise NewtonDiverged(f"|t| = {abs(t)} exceeds {MAX_DEFORM_T}")
    if t == 0:
        return rep
    if not direction.gauge_normalized:
        direction = direction.normalized(rep)
    mats = _apply_left(rep.matrices, t * direction.coords)
    mats = newton_project(mats, rep.presentation.relator)
    try:
        return SurfaceRepresentation(rep.presentation, mats)
    except InvalidElement as exc:
        raise NewtonDiverged(str(exc)) from exc


def pure_bending_path(rep: SurfaceRepresentation, direction: TangentDirection, t: float) -> GHPair:
    return GHPair(deform(rep, direction, t), deform(rep, direction, -t))


def same_sign_path(rep: SurfaceRepresentation, direction: TangentDirection, t: float) -> GHPair:
    """Fuchsian path with tangent (v, v); stays on the Fuchsian locus."""
    r = deform(rep, direction, t)
    return GHPair(r, r)


BENT_T = 0.3
BENT_SEED = 7


def bent_pair(rep: SurfaceRepresentation | None = None, t: float = BENT_T,
              seed: int = BENT_SEED) -> GHPair:
    """Reference non-Fuchsian point: the octagon bent by ``t`` along a seeded direction."""
    rep = octagon_fuchsian() if rep is None else rep
    direction = random_direction(rep, np.random.default_rng(seed))
    return pure_bending_path(rep, direction, t)


def tangent_cocycle(
    path: Callable[[float], GHPair], word: Sequence[int], eps: float
) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference cocycle u(w) = (d/dt rho_t(w)) rho_0(w)^-1 for each factor."""
    plus, zero, minus = path(eps), path(0.0), path(-eps)
    out = []
    for side in ("left", "right"):
        P = evaluate_word_matrix(getattr(plus, side), word)
        M = evaluate_word_matrix(getattr(minus, side), word)
        Z = evaluate_word_matrix(getattr(zero, side), word)
        Zi = np.array([[Z[1, 1], -Z[0, 1]], [-Z[1, 0], Z[0, 0]]])
        out.append((P - M) / (2 * eps) @ Zi)
    return out[0], out[1]
