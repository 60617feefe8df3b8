import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from arbor import machine as mc
from arbor.errors import ArityMismatch, BoundExceeded, NonEvaluable, SchemaViolation
from arbor.permquot import cycle_length, inv, perm_order, quotient
from arbor.tree import Vertex
from arbor.zoo import BASILICA, GRIGORCHUK, adding_machine, grigorchuk

a, b, c, d = (mc.gen(GRIGORCHUK, s) for s in "abcd")
ID2 = mc.identity(2)


def naive_perm(e, n):
    """Oracle: act on every level-n vertex one at a time."""
    m = e.m
    out = np.empty(m ** n, dtype=np.int64)
    for i in range(m ** n):
        out[i] = mc.act(e, Vertex.from_rank(i, n, m)).rank()
    return out


# ---------------------------------------------------------------- strategies

LEAVES2 = [a, b, c, d, mc.gen(BASILICA, "a"), mc.gen(BASILICA, "b"), adding_machine(2),
           mc.rooted((1, 0)), ID2]
LEAVES3 = [adding_machine(3), mc.rooted((1, 2, 0)), mc.rooted((0, 2, 1)), mc.identity(3)]


def vertices(m, max_len=3):
    return st.lists(st.integers(0, m - 1), max_size=max_len).map(tuple)


def exprs(m):
    leaves = st.sampled_from(LEAVES2 if m == 2 else LEAVES3)

    def extend(children):
        return st.one_of(
            st.tuples(children, children).map(lambda t: mc.product(*t)),
            children.map(mc.inverse),
            st.tuples(children, vertices(m, 2)).map(lambda t: mc.graft(*t)),
            st.tuples(children, children).map(lambda t: mc.conj(*t)),
            st.tuples(children, st.integers(1, 4)).map(lambda t: mc.truncate(*t)),
        )

    return st.recursive(leaves, extend, max_leaves=6)


arity = st.sampled_from([2, 2, 3])


@st.composite
def cases(draw):
    m = draw(arity)
    return draw(exprs(m)), draw(exprs(m)), draw(vertices(m))


CALC = settings(max_examples=220, deadline=None, suppress_health_check=[HealthCheck.too_slow])

# ---------------------------------------------------------------- examples


def test_label_examples():
    assert mc.label_at(a, ()) == (1, 0)
    g = mc.graft(b, "01")
    for u in ["1", "00", "11", ""]:
        assert mc.label_at(g, Vertex.parse(u, 2)) == (0, 1)
    assert mc.label_at(mc.product(a, a), ()) == (0, 1)


def test_act_examples():
    add = adding_machine(2)
    assert str(mc.act(add, "00")) == "11"  # letters 1,1 -> 2,2 in 1-based notation
    v = Vertex.parse("0110", 2)
    assert mc.act(ID2, v) == v
    for n in range(1, 9):
        assert cycle_length(mc.level_perm(add, n), 0) == 2 ** n


def test_section_examples():
    assert mc.section(b, "0") is a
    g = mc.product(a, b, d)
    assert mc.section(mc.graft(g, "101"), "101") is g
    assert mc.equal_up_to_level(mc.section(mc.product(a, b), "0"), c, 8)


def test_level_perm_examples():
    for m in (2, 3):
        add = adding_machine(m)
        for n in range(1, 13 if m == 2 else 10):
            p = mc.level_perm(add, n)
            assert cycle_length(p, 0) == m ** n
    assert mc.is_trivial_to(mc.graft(a, "0110"), 4)
    assert tuple(mc.level_perm(mc.rooted((2, 0, 1)), 1)) == (2, 0, 1)


def test_level_perm_read_only():
    p = mc.level_perm(a, 3)
    with pytest.raises(ValueError):
        p[0] = 5


def test_truncate_examples():
    assert mc.truncate(adding_machine(2), 1) is mc.rooted((1, 0))
    assert mc.is_trivial_to(mc.truncate(ID2, 4), 8)


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_truncate_agrees(data):
    m = data.draw(arity)
    e = data.draw(exprs(m))
    n = data.draw(st.integers(1, 6 if m == 2 else 4))
    t = mc.truncate(e, n)
    assert np.array_equal(mc.level_perm(t, n), mc.level_perm(e, n))
    # finitary: trivial sections below depth n
    assert mc.is_trivial_to(mc.section(t, (0,) * n), 3)


def test_equal_up_to_level_examples():
    assert mc.equal_up_to_level(a, a, 7)
    assert mc.equal_up_to_level(mc.product(a, mc.inverse(a)), ID2, 8)
    flat = mc.product(a, b, a, b, a)
    nested = mc.product(mc.product(mc.product(a, b), mc.product(a, b)), a)
    assert mc.equal_up_to_level(flat, nested, 6)


def test_grigorchuk_relations():
    for g in (a, b, c, d):
        assert perm_order(mc.level_perm(g, 6)) == 2
    assert mc.is_trivial_to(mc.product(b, c, d), 8)


def test_section_closure_examples():
    clo = mc.section_closure([a, b, c, d], 16)
    assert len(clo) == 5
    assert any(mc.is_trivial_to(x, 6) for x in clo)
    clo = mc.section_closure([mc.rooted((1, 0))], 4)
    assert len(clo) == 2
    with pytest.raises(BoundExceeded):
        mc.section_closure([adding_machine(2), mc.gen(BASILICA, "b")], 2)


def test_pullback_closure_bound():
    n, m = 2, 2
    gens = [mc.delete_levels_embed(g, n) for g in (a, b, c, d)]
    pulled = [mc.delete_levels_pullback(E, m, n) for E in gens]
    clo = mc.section_closure(pulled, 64)
    assert len(clo) <= (m ** n - 1) // (m - 1) * len(gens) + 1  # + identity


def test_embed_examples():
    assert mc.is_trivial_to(mc.delete_levels_embed(ID2, 3), 2)
    add = adding_machine(2)
    E = mc.delete_levels_embed(add, 2)
    assert E.m == 4
    assert np.array_equal(mc.level_perm(E, 1), mc.level_perm(add, 2))
    assert np.array_equal(mc.level_perm(E, 3), mc.level_perm(add, 6))


@settings(max_examples=100, deadline=None)
@given(exprs(2), st.lists(st.integers(0, 3), min_size=1, max_size=2).map(tuple))
def test_embed_section_compatibility(e, u):
    E = mc.delete_levels_embed(e, 2)
    long = tuple(x for y in u for x in divmod(y, 2))
    assert mc.equal_up_to_level(mc.section(E, u), mc.delete_levels_embed(mc.section(e, long), 2), 2)
    back = mc.delete_levels_pullback(E, 2, 2)
    assert mc.equal_up_to_level(back, e, 6)


def test_nonevaluable_loop():
    holder = []
    ld = mc.LimitDef(lambda L: holder[0], 2, "loop")
    e = mc.limit(ld)
    holder.append(e)
    with pytest.raises(NonEvaluable):
        mc.level_perm(e, 2)


def test_arity_mismatch():
    with pytest.raises(ArityMismatch):
        mc.product(a, adding_machine(3))


def test_sexpr_roundtrip():
    machines = {"grig": GRIGORCHUK}
    e = mc.parse_sexpr('(mul (graft (gen grig b) "01") (inv (gen grig a)) (pow (gen grig c) 3))',
                       machines)
    again = mc.parse_sexpr(mc.to_sexpr(e), machines)
    assert mc.equal_up_to_level(e, again, 7)
    with pytest.raises(SchemaViolation):
        mc.parse_sexpr("(frob 1)", machines)
    with pytest.raises(SchemaViolation):
        mc.parse_sexpr("(mul (gen grig a)", machines)


def test_machine_json():
    doc = {"m": 2, "states": {"a": {"perm": [1, 0], "children": ["a", None]}}}
    M = mc.MachineDef.from_json(doc, "add")
    assert M.to_json() == doc
    assert cycle_length(mc.level_perm(mc.gen(M, "a"), 5), 0) == 32
    with pytest.raises(SchemaViolation):
        mc.MachineDef.from_json({"m": 2, "states": {"a": {"perm": [1, 0]}}})
    with pytest.raises(SchemaViolation):
        mc.MachineDef.from_json({"m": 2, "states": {"a": {"perm": [1, 1], "children": [None, None]}}})
    with pytest.raises(SchemaViolation):
        mc.MachineDef.from_json({"m": 2, "states": {"a": {"perm": [1, 0], "children": ["z", None]}}})


# ---------------------------------------------------------------- calculus properties


@CALC
@given(cases())
def test_homomorphism_and_inverse(case):
    g, h, _ = case
    n = 5 if g.m == 2 else 4
    pg, ph = mc.level_perm(g, n), mc.level_perm(h, n)
    assert np.array_equal(mc.level_perm(mc.product(g, h), n), ph[pg])
    assert np.array_equal(mc.level_perm(mc.inverse(g), n), inv(pg))


@CALC
@given(cases())
def test_section_relations(case):
    g, h, v = case
    k = 5 - len(v)
    vg = mc.act(g, v).letters
    assert mc.equal_up_to_level(mc.section(mc.product(g, h), v),
                                mc.product(mc.section(g, v), mc.section(h, vg)), k)
    vgi = mc.act(mc.inverse(g), v).letters
    assert mc.equal_up_to_level(mc.section(mc.inverse(g), v),
                                mc.inverse(mc.section(g, vgi)), k)
    vhi = mc.act(mc.inverse(h), v).letters
    rhs = mc.product(mc.inverse(mc.section(h, vhi)), mc.section(g, vhi),
                     mc.section(h, mc.act(g, vhi).letters))
    assert mc.equal_up_to_level(mc.section(mc.conj(g, h), v), rhs, k)


@CALC
@given(cases())
def test_graft_conjugation(case):
    g, h, v = case
    lhs = mc.conj(mc.graft(g, v), h)
    rhs = mc.graft(mc.conj(g, mc.section(h, v)), mc.act(h, v))
    assert mc.equal_up_to_level(lhs, rhs, 5)


@settings(max_examples=100, deadline=None)
@given(cases(), st.data())
def test_grafts_commute_when_noncomparable(case, data):
    g, h, u = case
    m = g.m
    w = data.draw(vertices(m))
    if Vertex(u, m).is_prefix_of(Vertex(w, m)) or Vertex(w, m).is_prefix_of(Vertex(u, m)):
        return
    gu, hw = mc.graft(g, u), mc.graft(h, w)
    assert mc.equal_up_to_level(mc.product(gu, hw), mc.product(hw, gu), 5)


@settings(max_examples=60, deadline=None)
@given(cases())
def test_memo_matches_naive(case):
    g, h, _ = case
    e = mc.product(g, mc.inverse(h))
    n = 4 if e.m == 2 else 3
    assert np.array_equal(mc.level_perm(e, n), mc.level_perm_naive(e, n))
    assert np.array_equal(mc.level_perm(e, n), naive_perm(e, n))
    assert mc.portrait(e, 3) == mc.portrait(mc.product(e, mc.identity(e.m)), 3)


def test_infinite_graft_product_levels():
    def source():
        n = 1
        while True:
            yield a, (1,) * (n - 1) + (0,)
            n += 1
    P = mc.inf_graft_product(mc.FactorSchema(source, 2, "spine_a"))
    # factor n sits at level n and moves level n+1 only
    assert mc.is_trivial_to(P, 1)
    for n in range(2, 9):
        p = mc.level_perm(P, n)
        moved = np.nonzero(p != np.arange(2 ** n))[0]
        assert len(moved) == 2 ** n - 2  # every point below a factor vertex of level < n
    assert mc.equal_up_to_level(mc.section(P, "0"), a, 6)
    assert mc.equal_up_to_level(mc.section(P, "10"), a, 6)


def test_grigorchuk_quotient_level1():
    assert quotient(grigorchuk().gens, 1).order() == 2
