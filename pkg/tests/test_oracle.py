import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rabispec import Dicke2Params, Dicke3Params, Parity, RabiParams, oracle
from rabispec.exceptions import CutoffExplosion


def _union(builder, params, cutoff):
    blocks = [np.linalg.eigvalsh(builder(params.with_parity(par), cutoff).to_dense()) for par in Parity]
    return np.sort(np.concatenate(blocks))


@settings(max_examples=30)
@given(g=st.floats(0.0, 2.0), delta=st.floats(0.0, 1.5))
def test_rabi_parity_reduction_is_exact(g, delta):
    p = RabiParams(g, delta)
    full = np.linalg.eigvalsh(oracle.full_rabi(p, 24))
    assert np.allclose(full, _union(oracle.build_rabi, p, 24), atol=1e-11)


@settings(max_examples=30)
@given(g1=st.floats(0.0, 1.2), g2=st.floats(0.0, 1.2), d1=st.floats(-1.0, 1.0), d2=st.floats(-1.0, 1.0))
def test_dicke2_parity_reduction_is_exact(g1, g2, d1, d2):
    p = Dicke2Params(g1, g2, d1, d2)
    full = np.linalg.eigvalsh(oracle.full_dicke2(p, 16))
    assert np.allclose(full, _union(oracle.build_dicke2, p, 16), atol=1e-10)


@settings(max_examples=30)
@given(g=st.floats(0.0, 1.5), delta=st.floats(0.0, 1.5))
def test_dicke3_parity_reduction_is_exact(g, delta):
    p = Dicke3Params(g, delta)
    full = np.linalg.eigvalsh(oracle.full_dicke3(p, 16))
    assert np.allclose(full, _union(oracle.build_dicke3, p, 16), atol=1e-10)


def test_dicke2_embedding_intertwines():
    cutoff = 12
    for par in Parity:
        p = Dicke2Params(0.3, 0.5, 0.6, 0.4, parity=par)
        emb = oracle.dicke2_embedding(p, cutoff)
        assert np.allclose(emb.T @ emb, np.eye(2 * cutoff), atol=1e-14)
        lhs = oracle.full_dicke2(p, cutoff) @ emb
        rhs = emb @ oracle.build_dicke2(p, cutoff).to_dense()
        assert np.allclose(lhs, rhs, atol=1e-13)


def test_matvec_and_band_storage():
    m = oracle.build_dicke3(Dicke3Params(0.7, 0.4, parity="-"), 10)
    v = np.linspace(-1, 1, m.dimension)
    assert np.allclose(m.matvec(v), m.to_dense() @ v)
    dense = oracle.eigenvalues(m, 5, method="dense")
    assert np.allclose(oracle.eigenvalues(m, 5), dense, atol=1e-12)


def test_eigensystem_pairs():
    m = oracle.build_dicke2(Dicke2Params(0.4, 0.4, 0.6, 0.4), 40)
    w, v = oracle.eigensystem(m, 4)
    assert np.allclose(m.to_dense() @ v, v * w, atol=1e-12)


def test_k_out_of_range():
    with pytest.raises(ValueError):
        oracle.eigenvalues(oracle.build_rabi(RabiParams(1, 0.4), 5), 6)


def test_certify_history_and_convergence():
    c = oracle.certify_cutoff("rabi", RabiParams(1.0, 0.4), 10, rtol=1e-11)
    cutoffs = [h[0] for h in c.history]
    assert cutoffs == sorted(cutoffs) and c.cutoff == cutoffs[-1]
    last, prev = c.history[-1][1], c.history[-2][1]
    assert np.all(np.abs(last - prev) < 1e-11 * np.maximum(1, np.abs(last)))


def test_certify_gives_up():
    with pytest.raises(CutoffExplosion):
        oracle.certify_cutoff("rabi", RabiParams(6.0, 0.4), 10, rtol=1e-12, max_cutoff=64)


def test_decoupled_cutoff_is_exact():
    c = oracle.certify_cutoff("rabi", RabiParams(0.0, 0.4), 6)
    assert np.allclose(c.values, sorted(n + 0.4 * (-1) ** n for n in range(6)), atol=0)


def test_levels_below_window():
    p = RabiParams(1.0, 0.4)
    w = oracle.rabi_levels_below(p, 7.5)
    assert np.all(w + 1.0 < 7.5)
    more = oracle.spectrum("rabi", p, w.size + 1)
    assert more[-1] + 1.0 >= 7.5


def test_omega_scaling():
    a = oracle.spectrum("rabi", RabiParams(2.0, 0.8, omega=2.0), 5)
    b = oracle.spectrum("rabi", RabiParams(1.0, 0.4), 5)
    assert np.allclose(a, 2 * b, rtol=1e-12)


def test_both_parities_keys():
    out = oracle.both_parities("dicke3", Dicke3Params(0.5, 0.7), 3)
    assert set(out) == set(Parity) and all(v.size == 3 for v in out.values())
