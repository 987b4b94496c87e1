import math

import numpy as np
import pytest

from rabispec import Dicke2Params, Dicke3Params, Parity, dicke, oracle
from rabispec.exceptions import PreconditionViolated

EVEN, ODD = Parity.EVEN, Parity.ODD


def levels(p, k=16):
    return oracle.spectrum("dicke2", p, k, 1e-12)


@pytest.mark.parametrize("g", [0.2, 1.0, 2.3])
def test_one_photon_condition_holds_for_every_coupling(g):
    c = dicke.n1_condition(Dicke2Params.equal_coupling(g, 0.6, 0.4))
    assert c.satisfied and c.photon_number == 1 and c.vanished == ("bracket",)
    assert np.min(np.abs(levels(Dicke2Params.equal_coupling(g, 0.6, 0.4)) - 1)) < 1e-9


def test_one_photon_condition_by_parity():
    # odd parity needs |Delta1 - Delta2| = 1
    assert dicke.n1_condition(Dicke2Params.equal_coupling(0.8, 1.5, 0.5, parity=ODD)).satisfied
    assert not dicke.n1_condition(Dicke2Params.equal_coupling(0.8, 0.6, 0.4, parity=ODD)).satisfied
    off = dicke.n1_condition(Dicke2Params.equal_coupling(0.8, 0.3, 0.3))
    assert not off.satisfied and off.residual == pytest.approx(0.64)
    # equal splittings: the singlet factor vanishes instead
    assert off.singlet and off.vanished == ("singlet",)


def test_equal_couplings_required():
    with pytest.raises(PreconditionViolated):
        dicke.n1_condition(Dicke2Params(0.4, 0.2, 0.6, 0.4))
    with pytest.raises(PreconditionViolated):
        dicke.n2_condition(Dicke2Params(0.4, 0.2, 0.6, 0.4))


@pytest.mark.parametrize("d1,d2", [(0.6, 0.2), (0.9, 0.3), (0.5, 0.1)])
def test_two_photon_bracket_root_is_an_oracle_level(d1, d2):
    g = math.sqrt(dicke.n2_bracket(d1, d2, EVEN))
    p = Dicke2Params.equal_coupling(g, d1, d2)
    c = dicke.n2_condition(p)
    assert c.satisfied and "bracket" in c.vanished
    assert np.min(np.abs(levels(p) - 2)) < 1e-9
    # nudging the coupling removes the level
    q = Dicke2Params.equal_coupling(g * 1.05, d1, d2)
    assert not dicke.n2_condition(q).satisfied
    assert np.min(np.abs(levels(q) - 2)) > 1e-6


def test_two_photon_singlet_branch():
    for g in (0.3, 1.4):
        p = Dicke2Params.equal_coupling(g, 0.4, 0.4, parity=ODD)
        c = dicke.n2_condition(p)
        assert c.satisfied and c.singlet
        assert np.min(np.abs(levels(p) - 2)) < 1e-9


def test_two_photon_far_from_bracket():
    c = dicke.n2_condition(Dicke2Params.equal_coupling(10.0, 0.6, 0.2))
    assert not c.satisfied and c.bracket < -90


def test_exceptional_state_components_and_residual():
    s = dicke.exceptional_state_n1(Dicke2Params.equal_coupling(1.0, 0.6, 0.4))
    norm = math.sqrt(0.4 ** 2 + 2)
    assert s.components == pytest.approx((0.4 / norm, -1 / norm, 1 / norm), rel=1e-14)
    assert s.residual < 1e-12


def test_exceptional_state_limits():
    singlet = dicke.exceptional_state_n1(Dicke2Params.equal_coupling(0.7, 0.3, 0.3))
    r = 1 / math.sqrt(2)
    assert singlet.components == pytest.approx((0.0, -r, r), abs=1e-15)
    assert singlet.residual < 1e-12
    far = dicke.exceptional_state_n1(Dicke2Params.equal_coupling(1e6, 0.6, 0.4))
    assert abs(far.components[0]) < 1e-6


def test_exceptional_state_needs_condition():
    with pytest.raises(PreconditionViolated):
        dicke.exceptional_state_n1(Dicke2Params.equal_coupling(1.0, 0.3, 0.5))
    with pytest.raises(PreconditionViolated):
        dicke.exceptional_state_n1(Dicke2Params.equal_coupling(0.0, 0.6, 0.4))
    with pytest.raises(ValueError):
        dicke.exceptional_state_n1(Dicke2Params.equal_coupling(1.0, 0.6, 0.4), cutoff=2)


def test_quasi_exact_state_holds_at_most_one_photon():
    cutoff = 48
    _, vec = dicke.reduced_eigenvector(Dicke2Params.equal_coupling(1.3, 0.6, 0.4), 1.0, cutoff=cutoff)
    assert float(np.sum(vec[8:] ** 2)) < 1e-16


def test_symmetric_sweep_has_flat_singlet_lines():
    grid = np.linspace(0.1, 1.2, 12)
    sw = dicke.dicke_sweep(Dicke2Params.equal_coupling(0.0, 0.5, 0.5), grid, 12)
    for n in range(3):
        near = [min(abs(sw.curves[par][i] - n).min() for par in Parity) for i in range(grid.size)]
        assert max(near) < 1e-9


def test_sweep_pins_quasi_exact_line():
    grid = np.linspace(0.2, 2.0, 10)
    sw = dicke.dicke_sweep(Dicke2Params.equal_coupling(0.0, 0.6, 0.4), grid, 8)
    assert all(np.min(np.abs(row - 1)) < 1e-8 for row in sw.curves[EVEN])


def test_sweep_records_crossings_and_gaps():
    grid = np.linspace(0.05, 1.0, 96)
    sw = dicke.dicke_sweep(Dicke3Params(0.0, 0.7), grid, 6)
    assert sw.model == "dicke3"
    assert all(np.all(gap > 0) for gap in sw.min_same_parity_gap.values())
    for gc, ec, a, b in sw.crossings:
        assert grid[0] <= gc <= grid[-1]
    # the crossings are between opposite-parity curves: check one against the oracle
    gc, ec, a, b = sw.crossings[0]
    p = Dicke3Params(gc, 0.7)
    e = oracle.spectrum("dicke3", p, a + 1)[a]
    o = oracle.spectrum("dicke3", p.with_parity(ODD), b + 1)[b]
    # linear interpolation on a 0.01 grid
    assert abs(e - o) < 1e-3


def test_sweep_keeps_coupling_ratio():
    grid = np.array([0.5, 1.0])
    base = Dicke2Params(0.4, 0.1, 0.6, 0.4)
    sw = dicke.dicke_sweep(base, grid, 4)
    direct = oracle.spectrum("dicke2", Dicke2Params(0.8, 0.2, 0.6, 0.4), 4, 1e-11)
    assert np.allclose(sw.curves[EVEN][1], direct, atol=1e-9)


def test_sweep_validation():
    with pytest.raises(ValueError):
        dicke.dicke_sweep(Dicke3Params(0.0, 0.7), [0.3, 0.2], 4)
    with pytest.raises(TypeError):
        dicke.dicke_sweep(object(), [0.1, 0.2], 4)
