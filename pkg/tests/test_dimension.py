from fractions import Fraction
import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arbor.dimension import (LogQ, estimate_ratio, exact_log_ratio, extend_table,
                             hdim_selfsimilar_enclosure, log_m_decimal, mu_vs_dimension,
                             partial_sum_identity, product_dimension_check, r_sequence,
                             s_sequence, stabilized_B)
from arbor.errors import TableTooShort
from arbor.permquot import IndexTable, graft_product_table, index_table, wreath_index_table
from arbor.tree import Antichain
from arbor.zoo import SunicParams, grigorchuk, sunic_generalized, w_h_generators

GRIG_LOGS = [0, 1, 3, 7, 12, 22, 42, 82, 162, 322]


def frac(x) -> Fraction:
    man, exp = x.man_exp  # no re-rounding to the working precision
    return Fraction(int(man)) * Fraction(2) ** int(exp)


def encloses(enc, value, slack=Fraction(1, 2 ** 100)):
    return frac(enc.lo) - slack <= value <= frac(enc.hi) + slack


def grig_table(N):
    return IndexTable(2, [2 ** k for k in GRIG_LOGS[:N + 1]], "grigorchuk")


def test_logq_exactness():
    assert LogQ(Fraction(1), 2).is_zero()
    assert LogQ(Fraction(8), 2).exact() == 3
    assert LogQ(Fraction(1, 4), 2).sign() == -1
    assert exact_log_ratio(8, 64) == Fraction(1, 2)
    assert exact_log_ratio(6, 36) == Fraction(1, 2)
    assert exact_log_ratio(2, 3) is None
    assert log_m_decimal(8, 2, 4) == "3.0000"


def test_s_sequence_examples():
    W = wreath_index_table(2, 2, 8)
    assert all(s.is_zero() for s in s_sequence(W))
    t = grig_table(8)
    s = s_sequence(t)
    assert [x.exact() for x in s] == [0, 0, 3, 0, 0, 0, 0]
    for xs, r in ([((1, 0),), 2], [((1, 2, 0),), 2]):
        S = sunic_generalized(SunicParams(xs, r))
        st_ = s_sequence(index_table(S.gens, r + 2 if S.m == 2 else r + 1))
        assert all(x.is_zero() for x in st_[:r])


def test_s_sequence_too_short():
    with pytest.raises(TableTooShort):
        s_sequence(IndexTable(2, [1, 2]))


def test_r_sequence_monotone():
    for t in (grig_table(9), wreath_index_table(2, 2, 7),
              index_table(sunic_generalized(SunicParams(((1, 0),), 3)).gens, 7)):
        r = r_sequence(t)
        assert all(x.sign() >= 0 for x in r)
        assert all((b - a).sign() >= 0 for a, b in zip(r, r[1:]))


def test_ratio_examples():
    W = wreath_index_table(2, 2, 8)
    rep = estimate_ratio(W, W)
    assert all(e == 1 for e in rep.exact)
    # rist of the first-level vertex 0 in W_2: 2^(2^(n-1)-1) inside 2^(2^n-1)
    sub = IndexTable(2, [1] + [2 ** (2 ** (n - 1) - 1) for n in range(1, 9)])
    rep = estimate_ratio(sub, W)
    for n, e in zip(rep.levels, rep.exact):
        assert e == Fraction(2 ** (n - 1) - 1, 2 ** n - 1)


def test_grigorchuk_ratio_level7_example():
    """Ratio at level 7 should lie within 0.02 of 5/8.

    The exact ratio is 82/127 = 0.6457; the gap 0.0207 exceeds the tolerance,
    so this check fails by design of the tolerance, not of the computation."""
    rep = estimate_ratio(grig_table(7), wreath_index_table(2, 2, 7), [7])
    assert rep.exact == [Fraction(82, 127)]
    assert abs(rep.exact[0] - Fraction(5, 8)) < Fraction(2, 100)


def test_grigorchuk_enclosure():
    enc = hdim_selfsimilar_enclosure(grigorchuk().gens, 2, 7, table=grig_table(8), verify=False)
    assert encloses(enc, Fraction(5, 8)) and frac(enc.hi) - frac(enc.lo) < Fraction(1, 2 ** 100)
    assert enc.certified and enc.tail_bound_used
    enc = hdim_selfsimilar_enclosure(grigorchuk().gens, 2, 6)
    assert enc.lo <= 0.625 <= enc.hi
    assert float(enc.width) < 0.01
    # the Richardson-style extrapolation of the level ratios lands inside the enclosure
    W = wreath_index_table(2, 2, 9)
    r8, r9 = Fraction(162, 255), Fraction(322, 511)
    extrap = 2 * r9 - r8
    assert enc.lo - 0.01 <= float(extrap) <= enc.hi + 0.01
    assert estimate_ratio(grig_table(9), W).liminf_estimate > 0.6


def test_wh_enclosure_is_one():
    gens = w_h_generators([(1, 0)], 7)
    enc = hdim_selfsimilar_enclosure(gens, 2, 5, table=wreath_index_table(2, 2, 6), verify=False)
    assert encloses(enc, Fraction(1)) and frac(enc.hi) - frac(enc.lo) < Fraction(1, 2 ** 100)


@pytest.mark.parametrize("xs,r,value", [(((1, 0),), 3, Fraction(13, 16))])
def test_sunic_enclosure(xs, r, value):
    S = sunic_generalized(SunicParams(xs, r))
    enc = hdim_selfsimilar_enclosure(S.gens, 2, 8)
    assert enc.certified
    assert encloses(enc, value)
    assert frac(enc.lo) >= 1 - Fraction(r + 1, S.m ** (r - 1))


def test_sunic_extension_flagged():
    S = sunic_generalized(SunicParams(((1, 2, 0),), 2))
    enc = hdim_selfsimilar_enclosure(S.gens, 3, 8, max_points=729)
    assert not enc.certified and enc.warnings
    assert encloses(enc, Fraction(8, 9))


def test_extend_table_reproduces_direct_levels():
    t = grig_table(9)
    B, level = stabilized_B(IndexTable(2, t.orders[:6]))
    assert level is not None
    ext = extend_table(IndexTable(2, t.orders[:6]), 9, B)
    assert ext.orders == t.orders


def test_partial_sum_identity():
    for t, h in ((grig_table(9), 2), (wreath_index_table(3, 2, 6), 3)):
        for N in range(1, t.N - 1):
            left, right = partial_sum_identity(t, N, h)
            assert left.a <= right.b and right.a <= left.b


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 3))
def test_closed_form_tables_enclose_limit(k, extra):
    """Tables obeying the r_n recursion from level 2 have a known limit."""
    m, a1 = 2, k + 1
    B = min(extra, a1)
    logs = [0, a1]
    for _ in range(8):
        logs.append(m * logs[-1] + a1 - B)
    t = IndexTable(m, [2 ** x for x in logs])
    enc = hdim_selfsimilar_enclosure([], 2 ** a1, 6, m=m, table=t, verify=False)
    # a_n = (2 a_1 - B) 2^(n-1) - (a_1 - B), so a_n / (a_1 (2^n - 1)) -> 1 - B / (2 a_1)
    assert encloses(enc, 1 - Fraction(B, m * a1))


def test_product_dimension_check():
    W = wreath_index_table(2, 2, 8)
    K = IndexTable(2, [1] + [2 ** (2 ** (n - 2) - 1) if n >= 2 else 1 for n in range(1, 9)])
    H = IndexTable(2, [1] + [2 ** (2 ** (n - 1) - 1) for n in range(1, 9)])
    rep = product_dimension_check(K, H, W)
    assert all(rep.identity_holds)
    assert abs(rep.limits["K_in_G"] - 0.25) < 0.01
    assert abs(rep.limits["H_in_G"] - 0.5) < 0.01
    assert abs(rep.limits["K_in_H"] - 0.5) < 0.01
    rep = product_dimension_check(H, H, W)
    assert all(rep.identity_holds)
    assert rep.limits["K_in_H"] == 1


def test_mu_vs_dimension():
    W = wreath_index_table(2, 2, 10)
    V = Antichain.of(["0", "100"], 2)
    rep = mu_vs_dimension([(v.letters, W) for v in V], V, W, 10, 2)
    assert rep.mu_lo == rep.mu_hi == Fraction(5, 8)
    assert rep.gaps[-1] < 0.01
    assert all(g2 <= g1 for g1, g2 in zip(rep.gaps[3:], rep.gaps[4:]))


@settings(max_examples=20, deadline=None)
@given(st.lists(st.sampled_from(["0", "10", "11", "110", "111"]), min_size=1, max_size=3, unique=True))
def test_regrading_invariance(vs):
    """Ratios at levels n and 2n of the graded product agree with the ungraded ones in the limit."""
    try:
        V = Antichain.of(vs, 2)
    except Exception:
        return
    W = wreath_index_table(2, 2, 12)
    sub = graft_product_table([(v.letters, W) for v in V], 2, 12)
    lo, hi = V and (sum(Fraction(1, 2 ** len(v.letters)) for v in V),) * 2
    ratio12 = Fraction(sub[12].bit_length() - 1, W[12].bit_length() - 1)
    assert abs(ratio12 - lo) <= Fraction(len(V) * 2 ** 3, 2 ** 12 - 1)
    assert math.isclose(float(ratio12), float(lo), abs_tol=0.01)
