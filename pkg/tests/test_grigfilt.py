from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from arbor.errors import InvalidParams
from arbor.grigfilt import (G_N1_LOGINDEX, FiltTable, d_rel_logindex, d_steps, empirical_crosscheck,
                            gamma_rel_logindex, gamma_steps, jennings, lower_2_central, nm_logindex,
                            nm_step_logdim, nm_subgroup, rist_hdim_wrt_gamma, rist_rel_logindex,
                            sandwich, vmr_dim)
from arbor.permquot import quotient
from arbor.tree import Antichain, Vertex, mu
from arbor.zoo import grigorchuk

VALID = [(m, r, k) for m in range(1, 9) for r in range(1, 2 ** m) for k in range(m)]


def test_nm_step_examples():
    assert [nm_step_logdim(m) for m in (1, 2, 3)] == [3, 6, 12]
    with pytest.raises(InvalidParams):
        nm_step_logdim(0)


def test_gamma_examples():
    assert gamma_rel_logindex(3, 1) == 2
    assert gamma_rel_logindex(3, 4) == 8
    for m in range(1, 9):
        assert gamma_rel_logindex(m, 2 ** m - 1) + 1 == 3 * 2 ** (m - 1)
    with pytest.raises(InvalidParams):
        gamma_rel_logindex(2, 4)
    with pytest.raises(InvalidParams):
        gamma_rel_logindex(2, 0)


def test_rist_examples():
    for m, r, k in VALID:
        if r < 2 ** k and r <= 2 ** (m - 1) - 1:
            assert rist_rel_logindex(m, r, k) == 0
    assert rist_rel_logindex(4, 2 ** 3, 1) == 8
    with pytest.raises(InvalidParams):
        rist_rel_logindex(3, 1, 3)


def test_d_examples():
    assert d_rel_logindex(2, 1) == 1
    assert d_rel_logindex(2, 2) == 3
    for m in range(1, 11):
        assert sum(d_steps(m)) == nm_step_logdim(m)


def test_vmr_examples():
    for m in range(1, 8):
        assert vmr_dim(m, 0) == 2 ** m
        assert vmr_dim(m, 2 ** m) == 0
        dims = [vmr_dim(m, r) for r in range(2 ** m + 1)]
        assert all(a - b == 1 for a, b in zip(dims, dims[1:]))


def test_rist_hdim_examples():
    assert rist_hdim_wrt_gamma(0) == 1
    assert rist_hdim_wrt_gamma(1) == Fraction(1, 2)
    assert rist_hdim_wrt_gamma(["0", "100"]) == Fraction(5, 8)
    for k in range(0, 5):
        sw = sandwich(k, 20)
        assert abs(float(sw.limit) - 1 / 2 ** k) < 1e-6
        assert sw.within
        assert sw.lower <= float(sw.ratio_min) <= float(sw.ratio_max) <= sw.upper


# ---------------------------------------------------------------- invariants


def test_telescoping():
    for m in range(1, 11):
        assert sum(gamma_steps(m)) == nm_step_logdim(m)
        assert sum(d_steps(m)) == nm_step_logdim(m)
        assert all(s >= 0 for s in gamma_steps(m) + d_steps(m))


def test_f_over_g_bound():
    for m, r, k in VALID:
        assert rist_rel_logindex(m, r, k) * 2 ** k <= 2 * gamma_rel_logindex(m, r)


def test_monotone_and_continuous():
    for m in range(1, 9):
        gs = [gamma_rel_logindex(m, r) for r in range(1, 2 ** m)]
        assert all(a < b for a, b in zip(gs, gs[1:]))
        for k in range(m):
            fs = [rist_rel_logindex(m, r, k) for r in range(1, 2 ** m)]
            assert all(a <= b for a, b in zip(fs, fs[1:]))
        if m >= 2:
            h = 2 ** (m - 1)
            assert 2 * (h - 1) + 2 == h + h == gamma_rel_logindex(m, h)


@given(st.integers(0, 12))
def test_rist_hdim_matches_tree_mu(k):
    v = Vertex((0,) * k, 2)
    lo, hi = mu(Antichain((v,), 2), max(k, 1))
    assert rist_hdim_wrt_gamma(k) == lo == hi


@given(st.lists(st.sampled_from(["0", "10", "110", "111", "01"]), min_size=1, max_size=3, unique=True))
def test_rist_hdim_antichain_matches_tree_mu(vs):
    try:
        V = Antichain.of(vs, 2)
    except Exception:
        return
    lo, hi = mu(V, 6)
    assert rist_hdim_wrt_gamma(V) == lo == hi


def test_filt_table():
    for f in ("N", "gamma", "D"):
        FiltTable.closed_form(f, 6)
    assert FiltTable.closed_form("gamma", 2).steps[2] == [2, 2, 1, 1]
    assert FiltTable.closed_form("D", 2).steps == {1: [1, 2], 2: [1, 2, 1, 2]}
    with pytest.raises(ValueError):
        FiltTable("gamma", {1: [1, 1]})
    with pytest.raises(ValueError):
        FiltTable("gamma", {1: [4, -1]})


def test_nm_logindex():
    assert G_N1_LOGINDEX == 5
    assert [nm_logindex(m) for m in (1, 2, 3)] == [5, 8, 14]


# ---------------------------------------------------------------- quotient computations


def test_series_on_quotient():
    G = quotient(grigorchuk().gens, 6)
    total = G.order().bit_length() - 1
    gam = [total - (H.order().bit_length() - 1) for H in lower_2_central(G, 9)]
    D = [total - (H.order().bit_length() - 1) for H in jennings(G, 9)]
    assert gam == [0, 3, 5, 7, 8, 10, 12, 13, 14]
    assert D == [0, 3, 5, 6, 8, 9, 11, 12, 14]


def test_nm_subgroup_indices():
    for m, want in ((1, 5), (2, 8)):
        G, Nm = nm_subgroup(m, 6)
        assert (G.order().bit_length() - 1) - (Nm.order().bit_length() - 1) == want


def test_empirical_crosscheck():
    c = empirical_crosscheck(2, 5)
    assert c.g_n1_logindex == G_N1_LOGINDEX
    assert all(row.stabilized and row.agrees for row in c.rows)
    gamma2 = [row.empirical for row in c.rows if row.filtration == "gamma" and row.m == 2]
    assert gamma2 == [2, 2, 1, 1]
    assert c.nm_matches_gamma == {1: True, 2: True}
    lines = c.to_csv().splitlines()
    assert lines[0] == "filtration,m,r,closed_form,empirical,stabilized"
    assert len(lines) == 1 + len(c.rows)
    assert c.to_json()["level"] == 5


def test_crosscheck_unstabilized_marked():
    c = empirical_crosscheck(2, 3)
    assert any(not row.stabilized and row.empirical is None for row in c.rows)
