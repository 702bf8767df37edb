import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghlab.errors import InvalidElement, NewtonDiverged
from ghlab.linalg_lie import projective_distance, random_sl2
from ghlab.surface_rep import (
    GHPair,
    Presentation,
    SurfaceRepresentation,
    bent_pair,
    canonical_rotation,
    conjugation_directions,
    deform,
    evaluate_word_matrix,
    format_word,
    inverse_word,
    is_cyclically_reduced,
    load_representation,
    octagon_rotation,
    parse_word,
    pure_bending_path,
    random_direction,
    relator_jacobian,
    relator_residual,
    same_sign_path,
    save_representation,
    tangent_basis,
    tangent_cocycle,
)

NAMES = ("g0", "g1", "g2", "g3")
words = st.lists(st.integers(0, 7), min_size=1, max_size=10)


@given(words)
def test_word_format_roundtrip(w):
    assert parse_word(format_word(w, NAMES), NAMES) == tuple(w)


@given(words)
def test_inverse_word_is_involution(w):
    assert inverse_word(inverse_word(w)) == tuple(w)


@given(words)
def test_canonical_rotation_is_rotation_invariant(w):
    c = canonical_rotation(w)
    assert all(canonical_rotation(w[i:] + w[:i]) == c for i in range(len(w)))


def test_cyclic_reduction():
    assert is_cyclically_reduced((0, 2))
    assert not is_cyclically_reduced((0, 1))
    assert not is_cyclically_reduced((0, 2, 1))


def test_parse_word_rejects_unknown_names():
    with pytest.raises(ValueError):
        parse_word("g0.h", NAMES)


def test_presentation_validation():
    with pytest.raises(ValueError):
        Presentation(2, NAMES, (0, 2, 1, 3))
    with pytest.raises(ValueError):
        Presentation(2, NAMES, (0, 0, 1, 1, 2, 2, 3, 3))


def test_signed_relator_roundtrip(octagon):
    p = octagon.presentation
    assert Presentation.letters_from_signed(p.signed_relator()) == p.relator


def test_octagon_relator(octagon):
    assert relator_residual(octagon) <= 1e-9


def test_octagon_generators_are_rotations_of_g0(octagon):
    r = octagon_rotation()
    g = octagon.matrices
    for k in range(1, 4):
        assert projective_distance(r @ g[k - 1] @ np.linalg.inv(r), g[k]) < 1e-12
    # rotating g3 gives g0^-1: opposite sides of the octagon
    assert projective_distance(r @ g[3] @ np.linalg.inv(r), np.linalg.inv(g[0])) < 1e-12


def test_octagon_generator_trace(octagon):
    # side pairings of the regular octagon with angles 2 pi / 8 have trace 2 + 2 sqrt 2
    assert np.allclose(np.abs(np.trace(octagon.matrices, axis1=1, axis2=2)), 2 + 2 * np.sqrt(2))


def test_representation_rejects_broken_relator(octagon):
    mats = octagon.matrices.copy()
    mats[0] = mats[0] @ np.array([[1.0, 0.1], [0.0, 1.0]])
    with pytest.raises(InvalidElement):
        SurfaceRepresentation(octagon.presentation, mats)


def test_save_load_roundtrip(tmp_path, octagon):
    path = tmp_path / "rep.json"
    save_representation(octagon, path)
    back = load_representation(path)
    assert np.array_equal(back.matrices, octagon.matrices)
    data = json.loads(path.read_text())
    assert set(data) >= {"genus", "generators", "relator", "residual"}


def test_conjugation_preserves_relator(octagon, rng):
    g = random_sl2(rng)
    assert relator_residual(octagon.conjugate(g)) <= 1e-9


def test_jacobian_matches_finite_differences(octagon, rng):
    from ghlab.surface_rep import _apply_left, _letter_matrices, _relator_constraint

    rel = octagon.presentation.relator
    v = rng.normal(size=12)
    Jm = relator_jacobian(octagon.matrices, rel)
    h = 1e-6

    def F(mats):
        return _relator_constraint(_letter_matrices(mats), rel)[0]

    plus = F(_apply_left(octagon.matrices, h * v))
    minus = F(_apply_left(octagon.matrices, -h * v))
    assert np.allclose((plus - minus) / (2 * h), Jm @ v, atol=1e-7)


def test_tangent_space_dimension(octagon):
    # dim Hom(pi_1, PSL2) / conjugation = 6g - 6 = 6 for genus 2
    B = tangent_basis(octagon)
    assert B.shape == (6, 12)
    Jm = relator_jacobian(octagon.matrices, octagon.presentation.relator)
    assert np.abs(Jm @ B.T).max() < 1e-10
    assert np.abs(conjugation_directions(octagon.matrices) @ B.T).max() < 1e-10


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.floats(-0.3, 0.3))
def test_deformations_stay_on_the_variety(seed, t):
    from ghlab.surface_rep import octagon_fuchsian

    rep = octagon_fuchsian()
    v = random_direction(rep, np.random.default_rng(seed))
    assert deform(rep, v, t).residual <= 1e-9


def test_deform_at_zero_is_identity(octagon, rng):
    v = random_direction(octagon, rng)
    assert deform(octagon, v, 0.0) is octagon


def test_deform_out_of_range(octagon, rng):
    with pytest.raises(NewtonDiverged):
        deform(octagon, random_direction(octagon, rng), 10.0)


def test_deformation_moves_along_direction(octagon, rng):
    v = random_direction(octagon, rng)
    t = 1e-4
    moved = deform(octagon, v, t)
    # first-order displacement equals t * v for a gauge-normalized tangent vector
    disp = np.einsum("kij,kjl->kil", moved.matrices, np.linalg.inv(octagon.matrices)) - np.eye(2)
    assert np.abs(disp - t * v.matrices).max() < 1e-6


def test_bending_paths(octagon, rng):
    v = random_direction(octagon, rng)
    p = pure_bending_path(octagon, v, 0.2)
    q = same_sign_path(octagon, v, 0.2)
    assert p.left.residual <= 1e-9 and p.right.residual <= 1e-9
    assert q.left is q.right


def test_cocycle_of_bending_is_antisymmetric(octagon, rng):
    v = random_direction(octagon, rng)
    uL, uR = tangent_cocycle(lambda t: pure_bending_path(octagon, v, t), (0, 2, 5), 1e-4)
    assert np.allclose(uL, -uR, atol=1e-7)


def test_cocycle_on_generator_is_direction(octagon, rng):
    v = random_direction(octagon, rng)
    uL, _ = tangent_cocycle(lambda t: GHPair.fuchsian(deform(octagon, v, t)), (2,), 1e-4)
    assert np.allclose(uL, v.matrices[1], atol=1e-6)


def test_bent_pair_is_not_fuchsian():
    pair = bent_pair()
    tl = np.trace(evaluate_word_matrix(pair.left, (0,)))
    tr = np.trace(evaluate_word_matrix(pair.right, (0,)))
    assert abs(abs(tl) - abs(tr)) > 1e-3
