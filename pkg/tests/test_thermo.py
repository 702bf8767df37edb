import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ghlab import thermo as th
from ghlab.errors import NotOnPressureZero, NotTangent

GOLDEN_LOG = math.log((1 + math.sqrt(5)) / 2)


@pytest.fixture
def two_shift():
    return th.full_shift(2)


def golden_shift():
    # vertex 0 -> 0, 0 -> 1, 1 -> 0: the golden mean shift
    return th.MarkovShift(2, [(0, 0, 0), (1, 0, 1), (2, 1, 0)])


# -- pressure --------------------------------------------------------------------

def test_full_shift_zero_potential(two_shift):
    assert th.pressure(two_shift, th.EdgeFunction.constant(two_shift, 0.0)) == pytest.approx(math.log(2), abs=1e-12)


@given(st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=30, deadline=None)
def test_full_shift_pressure_is_log_sum_exp(a, b):
    shift = th.full_shift(2)
    p = th.pressure(shift, th.EdgeFunction.from_array(shift, [a, b]))
    assert p == pytest.approx(np.logaddexp(a, b), abs=1e-12)


def test_golden_mean_pressure():
    shift = golden_shift()
    assert th.pressure(shift, th.EdgeFunction.constant(shift, 0.0)) == pytest.approx(GOLDEN_LOG, abs=1e-12)


def test_pressure_matches_eigvals(rng):
    for _ in range(10):
        shift = th.random_shift(rng, int(rng.integers(2, 6)))
        g = th.EdgeFunction.from_array(shift, rng.normal(size=len(shift)))
        lam = max(abs(np.linalg.eigvals(shift.weighted_matrix(g))))
        assert th.pressure(shift, g) == pytest.approx(math.log(lam), abs=1e-11)


def test_pressure_coboundary_invariant(rng):
    for _ in range(10):
        shift = th.random_shift(rng, int(rng.integers(2, 6)))
        g = th.EdgeFunction.from_array(shift, rng.normal(size=len(shift)))
        cob = th.coboundary(shift, rng.normal(size=shift.n))
        assert th.pressure(shift, g + cob) == pytest.approx(th.pressure(shift, g), abs=1e-12)


def test_pressure_derivative_is_equilibrium_integral(rng):
    shift = th.random_shift(rng, 4)
    g = th.EdgeFunction.from_array(shift, rng.normal(size=len(shift)))
    h = th.EdgeFunction.from_array(shift, rng.normal(size=len(shift)))
    m = th.equilibrium_edge_measure(shift, g)
    fd = (th.pressure(shift, g.combine(1e-5, h)) - th.pressure(shift, g.combine(-1e-5, h))) / 2e-5
    assert m.sum() == pytest.approx(1.0)
    assert float(m @ h.array(shift)) == pytest.approx(fd, abs=1e-8)


# -- entropy root ------------------------------------------------------------------

def test_entropy_root_unit_roof(two_shift):
    assert th.entropy_root(two_shift, th.EdgeFunction.constant(two_shift, 1.0)) == pytest.approx(math.log(2), abs=1e-11)


def test_entropy_root_golden_ratio(two_shift):
    f = th.EdgeFunction.from_array(two_shift, [1.0, 2.0])
    assert th.entropy_root(two_shift, f) == pytest.approx(GOLDEN_LOG, abs=1e-11)


def test_entropy_root_scaling(rng):
    for _ in range(5):
        shift = th.random_shift(rng, int(rng.integers(2, 5)))
        f = th.EdgeFunction.from_array(shift, rng.uniform(0.5, 2.0, size=len(shift)))
        c = float(rng.uniform(0.3, 3.0))
        h = th.entropy_root(shift, f)
        assert th.entropy_root(shift, f.scale(c)) == pytest.approx(h / c, abs=1e-9)


def test_entropy_root_rejects_nonpositive_roof(two_shift):
    with pytest.raises(ValueError):
        th.entropy_root(two_shift, th.EdgeFunction.from_array(two_shift, [1.0, 0.0]))


# -- cycles ------------------------------------------------------------------------

def test_cycle_periods_full_shift_counts(two_shift):
    # necklaces of length <= 4 over two letters: 2 + 3 + 4 + 6
    cps = th.cycle_periods(two_shift, th.EdgeFunction.constant(two_shift, 0.0), 4)
    assert len(cps) == 15
    assert all(p == 0.0 for _, p in cps)
    assert all(c.check(two_shift) for c, _ in cps)


def test_single_loop_period():
    shift = th.MarkovShift(1, [(5, 0, 0)])
    cps = th.cycle_periods(shift, th.EdgeFunction({5: 3.0}), 3)
    assert [(c.edges, p) for c, p in cps] == [((5,), 3.0), ((5, 5), 6.0), ((5, 5, 5), 9.0)]


def test_cycle_periods_coboundary_invariant(rng):
    shift = th.random_shift(rng, 4)
    g = th.EdgeFunction.from_array(shift, rng.normal(size=len(shift)))
    cob = th.coboundary(shift, rng.normal(size=shift.n))
    a = th.cycle_periods(shift, g, 6)
    b = th.cycle_periods(shift, g + cob, 6)
    assert [c for c, _ in a] == [c for c, _ in b]
    assert np.allclose([p for _, p in a], [p for _, p in b], atol=1e-12)


def test_cycle_periods_length_limit(two_shift):
    with pytest.raises(ValueError):
        th.cycle_periods(two_shift, th.EdgeFunction.constant(two_shift, 0.0), 15)


def test_rooted_lengths_count_traces(two_shift):
    # rooted closed walks of length k number tr(A^k) = 2^k
    lengths = th.rooted_cycle_lengths(two_shift, th.EdgeFunction.constant(two_shift, 1.0), 6.5)
    assert len(lengths) == sum(2 ** k for k in range(1, 7))


def test_brute_force_full_shift(two_shift):
    h = th.brute_force_entropy(two_shift, th.EdgeFunction.constant(two_shift, 1.0), 12.0)
    assert abs(h - math.log(2)) < 0.05


def test_brute_force_matches_root(rng):
    shift = th.random_shift(rng, 3)
    f = th.EdgeFunction.from_array(shift, rng.uniform(0.5, 1.5, size=len(shift)))
    T = th.budget_horizon(shift, f, budget=200_000)
    h = th.brute_force_entropy(shift, f, T, budget=200_000)
    assert h == pytest.approx(th.entropy_root(shift, f), rel=0.05)


# -- pressure form -----------------------------------------------------------------

def test_pressure_form_worked_example(two_shift):
    F = th.EdgeFunction.constant(two_shift, -math.log(2))
    g = th.EdgeFunction.from_array(two_shift, [1.0, -1.0])
    assert th.pressure_form(two_shift, F, g) == pytest.approx(1 / math.log(2), rel=1e-6)


def test_pressure_form_vanishes_on_coboundaries(rng):
    shift = th.random_shift(rng, 4)
    F = th.normalize_to_pressure_zero(shift, th.EdgeFunction.from_array(shift, rng.normal(size=len(shift)) - 2))
    cob = th.coboundary(shift, rng.normal(size=shift.n))
    assert abs(th.pressure_form(shift, F, cob)) <= 1e-8


def test_pressure_form_nonnegative(rng):
    for _ in range(5):
        shift = th.random_shift(rng, int(rng.integers(2, 5)))
        F = th.normalize_to_pressure_zero(shift, th.EdgeFunction.from_array(shift, rng.normal(size=len(shift)) - 2))
        g = th.tangent_projection(shift, F, th.EdgeFunction.from_array(shift, rng.normal(size=len(shift))))
        g = g.scale(1.0 / np.abs(g.array(shift)).max())
        assert th.pressure_form(shift, F, g) >= -1e-8


def test_pressure_form_rejects_f_direction(two_shift):
    F = th.EdgeFunction.from_array(two_shift, [-0.5, -1.0])
    F = th.normalize_to_pressure_zero(two_shift, F)
    with pytest.raises(NotTangent):
        th.pressure_form(two_shift, F, F)


def test_pressure_form_needs_pressure_zero(two_shift):
    F = th.EdgeFunction.constant(two_shift, 0.0)
    g = th.EdgeFunction.from_array(two_shift, [1.0, -1.0])
    with pytest.raises(NotOnPressureZero):
        th.pressure_form(two_shift, F, g)


# -- coboundaries ------------------------------------------------------------------

def test_zero_is_coboundary(rng):
    shift = th.random_shift(rng, 4)
    res = th.is_coboundary(shift, th.EdgeFunction.constant(shift, 0.0))
    assert res.flag
    assert np.allclose(res.witness, 0.0)


def test_coboundary_witness_recovered(rng):
    for _ in range(10):
        shift = th.random_shift(rng, int(rng.integers(2, 7)))
        u = rng.normal(size=shift.n)
        res = th.is_coboundary(shift, th.coboundary(shift, u))
        assert res.flag
        assert np.allclose(res.witness - res.witness[0], u - u[0], atol=1e-12)


def test_non_coboundary_reports_edge(two_shift):
    res = th.is_coboundary(two_shift, th.EdgeFunction.from_array(two_shift, [1.0, -1.0]))
    assert not res.flag
    assert res.violating_edge in (0, 1)
    assert abs(res.discrepancy) == pytest.approx(1.0)


# -- graphs ------------------------------------------------------------------------

def test_graph_round_trip(tmp_path, rng):
    shift = th.random_shift(rng, 5)
    g = th.EdgeFunction.from_array(shift, rng.normal(size=len(shift)))
    path = tmp_path / "g.json"
    th.save_graph(shift, path, g)
    back, g2 = th.load_graph(path)
    assert back.edge_ids == shift.edge_ids
    assert np.array_equal(back.adjacency(), shift.adjacency())
    assert g2.values == g.values
    assert json.loads(path.read_text())["vertices"] == 5


def test_periodic_graph_rejected():
    with pytest.raises(ValueError, match="aperiodic"):
        th.MarkovShift(2, [(0, 0, 1), (1, 1, 0)])


def test_disconnected_graph_rejected():
    with pytest.raises(ValueError, match="strongly connected"):
        th.MarkovShift(2, [(0, 0, 0), (1, 0, 1)])


def test_duplicate_edge_ids_rejected():
    with pytest.raises(ValueError):
        th.MarkovShift(1, [(0, 0, 0), (0, 0, 0)])
