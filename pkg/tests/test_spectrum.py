import math

import numpy as np
import pytest

from rabispec import Parity, RabiParams, oracle
from rabispec import spectrum as sp
from rabispec.exceptions import LostBracket
from rabispec.spectrum import LineClass


@pytest.mark.parametrize("g,delta", [(0.2, 0.3), (0.7, 1.0), (1.0, 0.4), (1.5, 0.5), (1.0, 0.05)])
def test_complete_against_oracle(g, delta):
    p = RabiParams(g, delta)
    lines = sp.full_spectrum(p, 10.0, check=False)
    report = sp.compare_with_oracle(lines, p, 10.0)
    assert not report["missing"] and not report["extra"]
    assert report["max_dev"] < 1e-7


def test_line_invariants():
    for ln in sp.full_spectrum(RabiParams(1.0, 0.4), 8.0):
        assert ln.matched
        if ln.line_class is LineClass.REGULAR:
            assert abs(ln.x - round(ln.x)) > sp.TOL_INT and ln.degeneracy == 1
        if ln.line_class is LineClass.EXCEPTIONAL_D:
            assert ln.degeneracy == 2 and ln.x == round(ln.x) >= 1


def test_row_schema():
    row = sp.full_spectrum(RabiParams(1.0, 0.4), 2.0, check=False)[0].as_row()
    assert list(row) == ["x", "E", "parity", "class", "degeneracy", "residual", "method"]


def test_negative_interval_root():
    # small coupling: the ground state keeps x = E + g^2 close to -Delta
    p = RabiParams(0.2, 0.8)
    lines = sp.full_spectrum(p, 2.0)
    neg = [ln for ln in lines if ln.x < 0]
    assert len(neg) == 1 and -0.8 < neg[0].x < 0
    assert neg[0].oracle_gap < 1e-9


def test_omega_rescaling():
    a = sp.full_spectrum(RabiParams(2.0, 0.8, omega=2.0), 4.0, check=False)
    b = sp.full_spectrum(RabiParams(1.0, 0.4), 4.0, check=False)
    assert np.allclose([ln.energy for ln in a], [2 * ln.energy for ln in b], rtol=1e-12)


def test_decoupled_limit_is_exact():
    lines = sp.full_spectrum(RabiParams(0.0, 0.3), 5.0)
    for ln in lines:
        n = round(ln.energy - ln.parity.sign * 0.3 * (-1) ** round(ln.energy))
        assert ln.energy == n + ln.parity.sign * 0.3 * (-1) ** n


def test_displaced_oscillator():
    lines = sp.full_spectrum(RabiParams(0.9, 0.0), 4.0)
    assert all(ln.line_class is LineClass.EXCEPTIONAL_D for ln in lines)
    assert sorted({round(ln.energy, 12) for ln in lines}) == [round(n - 0.81, 12) for n in range(4)]
    assert max(ln.oracle_gap for ln in lines) < 1e-10


def test_no_sign_changes_without_splitting():
    for n in range(4):
        assert len(sp.scan_interval(n, RabiParams(0.7, 0.0))) == 0


def test_scan_interval_matches_oracle_count():
    p = RabiParams(1.0, 0.4, parity="-")
    x = oracle.rabi_levels_below(p, 1.0) + 1.0
    assert len(sp.scan_interval(0, p)) == np.count_nonzero((x > 0) & (x < 1))


def test_scan_needs_samples():
    with pytest.raises(ValueError):
        sp.scan_interval(0, RabiParams(1.0, 0.4), samples=4)


def test_lost_bracket():
    with pytest.raises(LostBracket):
        sp.refine_root((0.1, 0.11), RabiParams(1.0, 0.4))


def test_parity_degeneracy_only_at_judd_points():
    lines = sp.full_spectrum(RabiParams(0.8, 0.65), 8.0, check=False)
    even = np.array([ln.energy for ln in lines if ln.parity is Parity.EVEN])
    odd = np.array([ln.energy for ln in lines if ln.parity is Parity.ODD])
    assert np.min(np.abs(even[:, None] - odd[None, :])) > 1e-8


def test_judd_line_found_on_locus():
    g = 0.3
    p = RabiParams(g, math.sqrt(1 - 4 * g * g))
    lines = sp.full_spectrum(p, 3.0)
    degenerate = [ln for ln in lines if ln.line_class is LineClass.EXCEPTIONAL_D]
    assert {ln.parity for ln in degenerate} == set(Parity)
    assert all(ln.x == 1.0 and ln.oracle_gap < 1e-9 for ln in degenerate)


def test_judd_points_are_oracle_degeneracies():
    for m in (2, 3):
        for g in sp.judd_points(m, 0.4, (0.01, 1.0)):
            e = m - g * g
            near = []
            for par in Parity:
                w = oracle.spectrum("rabi", RabiParams(g, 0.4, parity=par), m + 4, 1e-12)
                near.append(w[np.argmin(np.abs(w - e))])
            assert abs(near[0] - e) < 1e-9 and abs(near[1] - e) < 1e-9


def test_sweep_crossings_sit_at_judd_points():
    grid = np.round(np.arange(1, 41) * 0.02, 10)
    sweep = sp.sweep_coupling(RabiParams(0.0, 0.4), grid, 4.0)
    assert not sweep.ambiguities
    expected = sorted(g for m in (1, 2, 3) for g in sp.judd_points(m, 0.4, (0.01, 0.8)))
    assert [c.g_judd for c in sweep.crossings] == pytest.approx(expected, abs=1e-12)
    for c in sweep.crossings:
        # linear interpolation of two smooth curves: error well below the grid step
        assert abs(c.g - c.g_judd) < 0.02 ** 2
    # same-parity curves never touch
    assert min(sweep.min_same_parity_gap.values()) > 1e-6


def test_sweep_slope_bound():
    grid = np.linspace(0.1, 1.0, 19)
    sweep = sp.sweep_coupling(RabiParams(0.1, 0.4), grid, 5.0)
    for par, curves in sweep.curves.items():
        slope = np.abs(np.diff(curves, axis=0)) / np.diff(grid)[:, None]
        assert np.all(slope <= 2 * math.sqrt(5.0) + 4 * grid[1:, None])


def test_track_curves_flags_crowding():
    grid = np.array([0.0, 1.0])
    levels = [np.array([0.0, 1.0]), np.array([0.5, 0.52])]
    _, ambiguous = sp.track_curves(grid, levels, window=0.6)
    assert ambiguous


def test_sweep_grid_validation():
    with pytest.raises(ValueError):
        sp.sweep_coupling(RabiParams(0, 0.4), [0.3, 0.2], 3.0)


def test_census_reference_point():
    census = sp.zero_census([RabiParams(1.0, 0.4)], 10.0)
    assert len(census) == 2
    for c in census:
        assert c.ok and set(c.counts.values()) <= {0, 1, 2}
        assert sorted(c.counts) == list(range(10))


def test_census_small_splitting():
    # roots hug the integers; counts of 2 do occur and must match the oracle
    g, delta = 0.8, 1e-6
    for c in sp.zero_census([RabiParams(g, delta)], 8.0):
        x = oracle.rabi_levels_below(RabiParams(g, delta, parity=c.parity), 8.0, 1e-13) + g * g
        assert np.max(np.abs(x - np.round(x))) < 1e-5
        assert c.counts == {n: int(np.count_nonzero((x > n) & (x < n + 1))) for n in range(8)}
        assert not c.indeterminate


def test_root_inside_pole_margin():
    # the even level near x = 7 sits about 4e-9 below the pole, inside the sampling margin
    p = RabiParams(0.8, 1e-6)
    lines = [ln for ln in sp.full_spectrum(p, 7.5) if ln.parity is Parity.EVEN and 6.5 < ln.x < 7]
    assert len(lines) == 1
    assert 7 - lines[0].x < sp.POLE_MARGIN
    assert lines[0].oracle_gap < 1e-9


def test_census_single_interval():
    census = sp.zero_census([RabiParams(1.0, 0.4)], 1.0)
    assert all(list(c.counts) == [0] for c in census)


def test_census_flags_judd_locus():
    # the lifted pole at x = 1 is not a zero of G, so the odd sector has two empty neighbours
    odd = [c for c in sp.zero_census([RabiParams(0.3, 0.8)], 4.0) if c.parity is Parity.ODD][0]
    assert odd.removed_poles == [1]
    assert odd.violations == [("adjacent", 0, 0, "judd")]


def test_check_adjacency():
    assert sp.check_adjacency({0: 1, 1: 2, 2: 0, 3: 2}) == []
    assert sp.check_adjacency({0: 2, 1: 2}) == [("adjacent", 0, 2)]
    assert sp.check_adjacency({0: 3, 1: 0, 2: 0}) == [("count", 0, 3), ("adjacent", 1, 0)]
