"""Executable acceptance criteria shared by ``arbor verify`` and the test suite.

Each ``criterion_N`` returns a ``CriterionResult``; nothing here is random
except the calculus cases, which use a fixed seed.
"""
from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import machine as mc
from .dimension import hdim_selfsimilar_enclosure, s_sequence
from .grigfilt import (empirical_crosscheck, gamma_steps, nm_step_logdim, rist_hdim_wrt_gamma,
                       rist_rel_logindex, gamma_rel_logindex, sandwich)
from .permquot import (bfs_elements, graft_product_table, index_table, perm_order, quotient,
                       wreath_index_table)
from .tree import Antichain, Vertex, mu
from .zoo import (BASILICA, GRIGORCHUK, SunicParams, Witness, adding_machine, grigorchuk,
                  grigorchuk_K, l_x_generators, siegenthaler_K, spine, sunic_generalized,
                  wp_two_generated)

# |G_n| for the Grigorchuk group, levels 0..7 (log2: 0, 1, 3, 7, 12, 22, 42, 82)
GRIGORCHUK_ORDERS = [1, 2, 2 ** 3, 2 ** 7, 2 ** 12, 2 ** 22, 2 ** 42, 2 ** 82]

SUNIC_GRID = [
    ("C2", (2,), [(1, 0)], 1),
    ("C2", (2,), [(1, 0)], 2),
    ("C3", (3,), [(1, 2, 0)], 1),
    ("Sym3", (6,), [(1, 2, 0), (1, 0, 2)], 1),
]


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number}: {self.title} ({self.detail}; {self.seconds:.1f}s)"

    def to_json(self) -> dict:
        return {"criterion": self.number, "title": self.title, "passed": self.passed,
                "detail": self.detail, "seconds": round(self.seconds, 3)}


def _timed(number, title):
    def wrap(fn):
        def run():
            t = time.perf_counter()
            passed, detail, data = fn()
            return CriterionResult(number, title, bool(passed), detail,
                                   time.perf_counter() - t, data)
        run.__name__ = fn.__name__
        run.number = number
        return run
    return wrap


def _sunic(xs, r):
    return sunic_generalized(SunicParams(tuple(xs), r))


@_timed(1, "Sunic quotients are iterated wreath products up to level r+1")
def criterion_1():
    bad = []
    for hname, (h,), xs, r in SUNIC_GRID:
        S = _sunic(xs, r)
        m = S.m
        for n in range(1, r + 2):
            got = quotient(S.gens, n).order()
            want = h ** ((m ** n - 1) // (m - 1))
            if got != want:
                bad.append(f"{hname},r={r},n={n}: {got} != {want}")
    return not bad, "; ".join(bad) or "all orders match", {"mismatches": bad}


@_timed(2, "Sunic gradient s_n vanishes for n <= r")
def criterion_2():
    bad = []
    for hname, _, xs, r in SUNIC_GRID:
        S = _sunic(xs, r)
        s = s_sequence(index_table(S.gens, r + 2))
        for n in range(1, r + 1):
            if not s[n - 1].is_zero():
                bad.append(f"{hname},r={r}: s_{n} = log {s[n - 1].q}")
    return not bad, "; ".join(bad) or "exact zeros", {"nonzero": bad}


@_timed(3, "Sunic enclosure lower end meets 1 - (r+1)/m^(r-1)")
def criterion_3():
    rows, ok = [], True
    for m, xs, r in ((2, [(1, 0)], 3), (3, [(1, 2, 0)], 2)):
        S = _sunic(xs, r)
        enc = hdim_selfsimilar_enclosure(S.gens, m, 8)
        bound = 1 - Fraction(r + 1, m ** (r - 1))
        good = enc.lo >= float(bound) - 1e-9
        ok &= good
        rows.append(f"(m={m},r={r}) lo={float(enc.lo):.6f} >= {float(bound):.6f}")
    return ok, "; ".join(rows), {}


@_timed(4, "Grigorchuk index table and enclosure")
def criterion_4():
    G = grigorchuk()
    notes, ok = [], True
    for n in (1, 2, 3):
        q = quotient(G.gens, n, method="schreier-sims")
        brute = bfs_elements(q.gens, q.size)
        if q.order() != brute:
            ok = False
            notes.append(f"level {n}: sgs {q.order()} vs bfs {brute}")
    t = index_table(G.gens, 7)
    if t.orders != GRIGORCHUK_ORDERS:
        ok = False
        notes.append(f"table {t.orders} differs from the frozen constants")
    s = s_sequence(t)
    if not all(s[n - 1].is_zero() for n in (4, 5, 6)):
        ok = False
        notes.append("s_4..s_6 not all zero")
    enc = hdim_selfsimilar_enclosure(G.gens, 2, 7)
    width = float(enc.hi - enc.lo)
    if not width < 0.01:
        ok = False
    notes.append(f"enclosure [{float(enc.lo):.6f}, {float(enc.hi):.6f}] width {width:.2e}")
    return ok, "; ".join(notes), {"lo": float(enc.lo), "hi": float(enc.hi)}


@_timed(5, "Graft-product ratios approach mu(V) within c/(2^n-1), c <= 2")
def criterion_5():
    W = wreath_index_table(2, 2, 10)
    sets = {"{0}": ["0"], "{0,100}": ["0", "100"], "level 2": ["00", "01", "10", "11"]}
    ok, notes = True, []
    for label, vs in sets.items():
        V = Antichain.of(vs, 2)
        lo, hi = mu(V, 10)
        fam = [(v.letters, W) for v in V]
        sub = graft_product_table(fam, 2, 10)
        worst = Fraction(0)
        for n in range(3, 11):
            ratio = Fraction(sub[n].bit_length() - 1, W[n].bit_length() - 1)
            worst = max(worst, abs(ratio - lo) * (2 ** n - 1))
        good = lo == hi and worst <= 2
        ok &= good
        notes.append(f"{label}: mu={lo}, c={worst}")
    return ok, "; ".join(notes), {}


@_timed(6, "Grigorchuk filtration closed forms and quotient cross-check")
def criterion_6():
    notes, ok = [], True
    if [nm_step_logdim(m) for m in (1, 2, 3)] != [3, 6, 12]:
        ok = False
        notes.append("nm_step_logdim values")
    if any(sum(gamma_steps(m)) != nm_step_logdim(m) for m in range(1, 11)):
        ok = False
        notes.append("gamma telescoping")
    for m in range(1, 9):
        for k in range(m):
            for r in range(1, 2 ** m):
                if rist_rel_logindex(m, r, k) * 2 ** k > 2 * gamma_rel_logindex(m, r):
                    ok = False
                    notes.append(f"f/g at m={m},k={k},r={r}")
    found = {}
    for N in (5, 6):
        c = empirical_crosscheck(2, N)
        rows = [row for row in c.rows if row.filtration == "gamma"]
        found[N] = [row.empirical for row in rows]
        if not all(row.agrees for row in rows):
            ok = False
            notes.append(f"gamma steps at N={N}: {found[N]}")
    if found.get(5) != found.get(6):
        ok = False
    notes.append(f"gamma steps m<=2: {found[6]}")
    return ok, "; ".join(notes), {}


@_timed(7, "Rist dimension sandwich limit equals 1/2^k and mu")
def criterion_7():
    ok, notes = True, []
    for k in range(0, 5):
        sw = sandwich(k, 20)
        target = Fraction(1, 2 ** k)
        if abs(float(sw.limit) - float(target)) > 1e-6:
            ok = False
        if not sw.within:
            ok = False
            notes.append(f"k={k}: window ratio outside sandwich")
        single = Antichain((Vertex((0,) * k, 2),), 2)
        lo, hi = mu(single, max(k, 1))
        if not (rist_hdim_wrt_gamma(k) == lo == hi == target):
            ok = False
        notes.append(f"k={k}: {sw.limit}")
    return ok, "; ".join(notes), {}


def _outside_fixed(e, X, n, m) -> bool:
    p = np.asarray(mc.level_perm(e, n))
    inside = np.zeros(m ** n, dtype=bool)
    for v in X.prefix_to_depth(n):
        span = m ** (n - v.level())
        inside[v.rank() * span:(v.rank() + 1) * span] = True
    idx = np.arange(m ** n)
    return bool((p[~inside] == idx[~inside]).all())


@_timed(8, "Construction contracts for L_X, wp2 and Siegenthaler K")
def criterion_8():
    ok, notes = True, []
    X = spine(2)
    for K, coarsen in ((siegenthaler_K([(1, 0)]), False), (grigorchuk_K(), True)):
        L = l_x_generators(K, X, 1, Witness(K.gens[0]), coarsen=coarsen)
        r = len(K.gens)
        want = 2 * (1 + 2 * r) + r
        if len(L.gens) != want:
            ok = False
        if not all(_outside_fixed(e, X, n, 2) for e in L.gens for n in range(1, 9)):
            ok = False
            notes.append(f"L_X({K.name}) support")
        notes.append(f"L_X({K.name}): {len(L.gens)} generators (expected {want})")
    for p in (2, 3):
        Wp = wp_two_generated(p, spine(p))
        if len(Wp.gens) != 2:
            ok = False
        if not all(_outside_fixed(e, spine(p), n, p) for e in Wp.gens for n in range(1, 9)):
            ok = False
            notes.append(f"wp2(p={p}) support")
    for hs in ([(1, 0)], [(1, 2, 0)], [(1, 2, 3, 4, 0)]):
        K = siegenthaler_K(hs)
        if len(K.gens) != len(hs) + 1:
            ok = False
            notes.append(f"siegenthaler {hs}: {len(K.gens)} generators")
    return ok, "; ".join(notes), {}


@_timed(9, "Infinite-order witness stages have order >= 2^k")
def criterion_9():
    ok, notes = True, []
    for K in (siegenthaler_K([(1, 0)]), grigorchuk_K()):
        w = Witness(K.gens[0])
        orders = []
        for k in range(1, 9):
            L = w.certifying_level(k)
            o = perm_order(np.asarray(mc.level_perm(w.stage_expr(k), L)))
            orders.append(o)
            if o < 2 ** k:
                ok = False
        notes.append(f"{K.name}: {orders}")
    return ok, "; ".join(notes), {}


# ---------------------------------------------------------------- calculus cases


def random_expr(rng: random.Random, m: int, depth: int = 3) -> mc.Expr:
    """Small random expression over the built-in machines of arity m."""
    if depth == 0 or rng.random() < 0.3:
        if m == 2:
            choice = rng.randrange(4)
            if choice == 0:
                return mc.gen(GRIGORCHUK, rng.choice("abcd"))
            if choice == 1:
                return mc.gen(BASILICA, rng.choice("ab"))
            if choice == 2:
                return adding_machine(2)
            return mc.rooted((1, 0))
        choice = rng.randrange(3)
        if choice == 0:
            return adding_machine(m)
        if choice == 1:
            perm = list(range(m))
            rng.shuffle(perm)
            return mc.rooted(tuple(perm))
        return rng.choice(_sunic([(1, 2, 0)], 2).gens)
    op = rng.randrange(4)
    if op == 0:
        return mc.product(random_expr(rng, m, depth - 1), random_expr(rng, m, depth - 1))
    if op == 1:
        return mc.inverse(random_expr(rng, m, depth - 1))
    if op == 2:
        return mc.graft(random_expr(rng, m, depth - 1), random_vertex(rng, m, 2))
    return mc.conj(random_expr(rng, m, depth - 1), random_expr(rng, m, depth - 1))


def random_vertex(rng: random.Random, m: int, max_len: int = 3) -> tuple:
    return tuple(rng.randrange(m) for _ in range(rng.randint(0, max_len)))


def calculus_identities(g, h, v, level: int = 5) -> dict:
    """Check the section, graft and homomorphism identities for one case."""
    m = g.m
    k = level - len(v)
    sec, act = mc.section, mc.act
    vg = act(g, v).letters
    vhi = act(mc.inverse(h), v).letters
    out = {}
    out["product"] = mc.equal_up_to_level(sec(mc.product(g, h), v),
                                          mc.product(sec(g, v), sec(h, vg)), k)
    ginv_v = act(mc.inverse(g), v).letters
    out["inverse"] = mc.equal_up_to_level(sec(mc.inverse(g), v),
                                          mc.inverse(sec(g, ginv_v)), k)
    vhig = act(g, vhi).letters
    rhs = mc.product(mc.inverse(sec(h, vhi)), sec(g, vhi), sec(h, vhig))
    out["conjugate"] = mc.equal_up_to_level(sec(mc.conj(g, h), v), rhs, k)
    vh = act(h, v).letters
    out["graft_conj"] = mc.equal_up_to_level(mc.conj(mc.graft(g, v), h),
                                             mc.graft(mc.conj(g, sec(h, v)), vh), level)
    out["graft_hom"] = mc.equal_up_to_level(mc.graft(mc.product(g, h), v),
                                            mc.product(mc.graft(g, v), mc.graft(h, v)), level)
    pg, ph = np.asarray(mc.level_perm(g, level)), np.asarray(mc.level_perm(h, level))
    out["level_hom"] = bool(np.array_equal(np.asarray(mc.level_perm(mc.product(g, h), level)),
                                           ph[pg]))
    out["graft_section"] = mc.equal_up_to_level(sec(mc.graft(g, v), v), g, k)
    return out


@_timed(10, "Calculus identities on randomized cases")
def criterion_10(cases: int = 240, seed: int = 20240601):
    rng = random.Random(seed)
    failures = []
    for i in range(cases):
        m = 2 if i % 3 else 3
        g, h = random_expr(rng, m), random_expr(rng, m)
        v = random_vertex(rng, m, 3)
        res = calculus_identities(g, h, v, 5)
        bad = [name for name, good in res.items() if not good]
        if bad:
            failures.append((i, bad))
    return not failures, f"{cases} cases, {len(failures)} failing", {"failures": failures}


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10]


def run_all(selected=None) -> list:
    out = []
    for fn in CRITERIA:
        if selected and fn.number not in selected:
            continue
        out.append(fn())
    return out
