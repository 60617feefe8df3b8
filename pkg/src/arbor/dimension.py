"""Hausdorff-dimension data from congruence-quotient orders.

Logarithms are base m.  Exact quantities are kept as ``LogQ`` values (the
logarithm of an exact positive rational) and only evaluated at the end, with
128-bit interval arithmetic from ``mpmath.iv``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath

from . import machine as mc
from .errors import SelfSimilarityUnverified, TableTooShort
from .permquot import IndexTable, index_table, quotient
from .tree import mu as tree_mu

PREC = 128
iv = mpmath.iv
iv.prec = PREC


def _iv_log(q: Fraction, m: int):
    q = Fraction(q)
    if q == 1:
        return iv.mpf(0)
    return (iv.log(iv.mpf(q.numerator)) - iv.log(iv.mpf(q.denominator))) / iv.log(iv.mpf(m))


def _lo(x):
    """Lower endpoint of an interval as a plain mpf (exact, no rounding)."""
    return mpmath.mp.make_mpf(x._mpi_[0])


def _hi(x):
    return mpmath.mp.make_mpf(x._mpi_[1])


def log_m_decimal(x: int, m: int, digits: int = 30) -> str:
    """log_m(x) rounded to ``digits`` digits after the point."""
    with mpmath.workdps(digits + len(str(x)) + 20):
        val = mpmath.log(x) / mpmath.log(m) if x != 1 else mpmath.mpf(0)
        scaled = int(mpmath.nint(val * mpmath.mpf(10) ** digits))
    whole, frac = divmod(scaled, 10 ** digits)
    return f"{whole}.{frac:0{digits}d}"


@dataclass(frozen=True)
class LogQ:
    """log_m(q) for an exact positive rational q."""

    q: Fraction
    m: int

    def __post_init__(self):
        object.__setattr__(self, "q", Fraction(self.q))
        if self.q <= 0:
            raise ValueError("logarithm of a non-positive number")

    def is_zero(self) -> bool:
        return self.q == 1

    def sign(self) -> int:
        return (self.q > 1) - (self.q < 1)

    def interval(self):
        return _iv_log(self.q, self.m)

    def __float__(self):
        return float(mpmath.log(self.q.numerator) - mpmath.log(self.q.denominator)) / math.log(self.m)

    def __sub__(self, other: "LogQ") -> "LogQ":
        return LogQ(self.q / other.q, self.m)

    def exact(self):
        """The value as a Fraction when q is a rational power of m, else None."""
        r = exact_log_ratio(self.q.numerator, self.m)
        s = exact_log_ratio(self.q.denominator, self.m)
        if r is None or s is None:
            return None
        return r - s


def _small_factor(x: int):
    """Exponent vector of x over primes < 1000, or None if x has a larger factor."""
    out = {}
    p = 2
    while x > 1 and p < 1000:
        while x % p == 0:
            x //= p
            out[p] = out.get(p, 0) + 1
        p += 1 if p == 2 else 2
    return out if x == 1 else None


def exact_log_ratio(a: int, b: int):
    """log(a)/log(b) as a Fraction when it is rational and detectable, else None."""
    if b <= 1:
        raise ZeroDivisionError("log of the denominator is zero")
    if a == 1:
        return Fraction(0)
    fa, fb = _small_factor(a), _small_factor(b)
    if fa is None or fb is None or set(fa) != set(fb):
        return None
    ratios = {Fraction(fa[p], fb[p]) for p in fa}
    return ratios.pop() if len(ratios) == 1 else None


# ---------------------------------------------------------------- sequences


def s_sequence(t: IndexTable) -> list:
    """s_n = m log|St(n-1):St(n)| - log|St(n):St(n+1)| for n = 1..N-1."""
    if len(t.orders) < 3:
        raise TableTooShort("need orders for levels 0..2 at least")
    o, m = t.orders, t.m
    out = []
    for n in range(1, t.N):
        d_n = Fraction(o[n], o[n - 1])
        d_next = Fraction(o[n + 1], o[n])
        out.append(LogQ(d_n ** m / d_next, m))
    return out


def r_sequence(t: IndexTable) -> list:
    """r_n = m log|G:St(n-1)| - log|G:St(n)| + log|G:St(1)| for n = 1..N."""
    if len(t.orders) < 2:
        raise TableTooShort("need orders for levels 0..1 at least")
    o, m = t.orders, t.m
    return [LogQ(Fraction(o[n - 1] ** m * o[1], o[n]), m) for n in range(1, t.N + 1)]


def stabilized_B(t: IndexTable):
    """(B, level) where B = r_n at the deepest n with r_n = r_{n-1}; (None, None) otherwise."""
    rs = r_sequence(t)
    for n in range(len(rs), 1, -1):
        if rs[n - 1].q == rs[n - 2].q:
            return rs[n - 1], n
    return None, None


def extend_table(t: IndexTable, N: int, B: LogQ) -> IndexTable:
    """Continue the table to level N with a_n = m a_{n-1} + a_1 - B (valid once
    r_n has stabilized at B)."""
    o = list(t.orders)
    start = len(o)
    while len(o) <= N:
        nxt = Fraction(o[-1] ** t.m * o[1]) / B.q
        if nxt.denominator != 1:
            raise ValueError("recursion produced a non-integral order")
        o.append(int(nxt))
    return IndexTable(t.m, o, t.name, extended_from=start if start <= N else t.extended_from,
                      method=t.method + "+recursion")


# ---------------------------------------------------------------- ratios


def _fmt(x, digits=30) -> str:
    with mpmath.workprec(PREC):
        return mpmath.nstr(x, digits)


@dataclass
class RatioReport:
    levels: list
    lo: list  # mpf lower ends
    hi: list
    exact: list  # Fraction or None
    liminf_estimate: object = None

    def to_json(self) -> dict:
        return {"levels": self.levels,
                "ratios_lo": [_fmt(x) for x in self.lo],
                "ratios_hi": [_fmt(x) for x in self.hi],
                "ratios_exact": [None if e is None else f"{e.numerator}/{e.denominator}"
                                 for e in self.exact]}


def estimate_ratio(subject: IndexTable, ambient: IndexTable, levels=None) -> RatioReport:
    """log|subject_n| / log|ambient_n| per level with rigorous [lo, hi]."""
    N = min(subject.N, ambient.N)
    if levels is None:
        levels = [n for n in range(1, N + 1) if ambient[n] > 1]
    los, his, exact = [], [], []
    for n in levels:
        A, B = subject[n], ambient[n]
        if B == 1:
            raise ZeroDivisionError(f"ambient order is 1 at level {n}")
        val = iv.log(iv.mpf(A)) / iv.log(iv.mpf(B)) if A != 1 else iv.mpf(0)
        e = exact_log_ratio(A, B)
        if e is not None:
            val = iv.mpf(e.numerator) / e.denominator
        los.append(_lo(val))
        his.append(_hi(val))
        exact.append(e)
    k = max(1, -(-len(levels) // 2))
    liminf = min(los[-k:]) if los else None
    return RatioReport(list(levels), los, his, exact, liminf)


# ---------------------------------------------------------------- enclosure


@dataclass
class Enclosure:
    lo: object
    hi: object
    tail_bound_used: bool
    B: LogQ | None
    N: int
    table: IndexTable
    certified: bool = True
    warnings: list = field(default_factory=list)
    r: list = field(default_factory=list)
    s: list = field(default_factory=list)

    @property
    def width(self):
        return self.hi - self.lo

    def to_json(self) -> dict:
        return {"lo": _fmt(self.lo), "hi": _fmt(self.hi),
                "tail_B": None if self.B is None else _fmt(_hi(self.B.interval())),
                "N": self.N, "certified": self.certified,
                "direct_levels": (self.table.extended_from - 1
                                  if self.table.extended_from else self.table.N),
                "warnings": self.warnings}


def check_self_similar(gens, check_level: int = 5, bound: int = 256) -> list:
    """Section closure of ``gens``; every element of the closure must lie in
    the level-``check_level`` quotient of <gens>."""
    closure = mc.section_closure(gens, max(bound, len(gens)))
    q = quotient(gens, check_level)
    for e in closure:
        if not q.contains(e):
            raise SelfSimilarityUnverified("a section falls outside the group at the check level")
    return closure


def hdim_selfsimilar_enclosure(gens, h_order: int, N: int, m: int | None = None,
                               max_points: int = 1024, table: IndexTable | None = None,
                               verify: bool = True) -> Enclosure:
    """Rigorous enclosure of hdim = (a_1 - sum_n s_n m^-n) / log|H|.

    Orders are computed directly up to the deepest level with at most
    ``max_points`` vertices; beyond that the table is continued by the
    stabilized r_n recursion and the result is flagged in ``warnings``.
    """
    gens = list(gens)
    m = m or gens[0].m
    if verify:
        check_self_similar(gens, min(5, N + 1))
    warnings = []
    if table is None:
        L = N + 1
        while L > 2 and m ** L > max_points:
            L -= 1
        table = index_table(gens, L, m)
    B, B_level = stabilized_B(table)
    if table.N < N + 1:
        if B is None:
            warnings.append(f"r_n not stabilized by level {table.N}; enclosure at N={table.N - 1}")
            N = table.N - 1
        else:
            warnings.append(f"levels {table.N + 1}..{N + 1} continued by the r_n recursion "
                            f"(r stabilized at level {B_level})")
            table = extend_table(table, N + 1, B)
    t = IndexTable(m, table.orders[:N + 2], table.name, table.extended_from, table.method)
    s = s_sequence(t)  # s_1..s_N
    r = r_sequence(t)  # r_1..r_{N+1}
    for a, b in zip(r, r[1:]):
        if b.q < a.q:
            warnings.append("r_n decreased: subject is not self-similar as assumed")
    logH = _iv_log(Fraction(h_order), m)
    a1 = _iv_log(Fraction(t[1]), m)
    total = iv.mpf(0)
    for n, sn in enumerate(s, start=1):
        if not sn.is_zero():
            total += sn.interval() / iv.mpf(m) ** n
    part = (a1 - total) / logH
    hi = _hi(part)
    if B is None:
        warnings.append("no stabilized B; lower end falls back to 0")
        lo = mpmath.mpf(0)
        used = False
        certified = False
    else:
        tail = (B - r[N]).interval() / (iv.mpf(m) ** (N + 1) * logH)
        lo = _lo(part - tail)
        used = True
        certified = table.extended_from is None
    lo = max(lo, mpmath.mpf(0))
    hi = min(hi, mpmath.mpf(1))
    return Enclosure(lo, hi, used, B, N, t, certified, warnings, r, s)


def partial_sum_identity(t: IndexTable, N: int, h_order: int):
    """Return (partial sum form, d_{N+1} / (m^N log|H|)) as intervals for testing."""
    m = t.m
    s = s_sequence(IndexTable(m, t.orders[:N + 2]))
    total = iv.mpf(0)
    for n, sn in enumerate(s, start=1):
        total += sn.interval() / iv.mpf(m) ** n
    logH = _iv_log(Fraction(h_order), m)
    left = (_iv_log(Fraction(t[1]), m) - total) / logH
    right = _iv_log(Fraction(t[N + 1], t[N]), m) / (iv.mpf(m) ** N * logH)
    return left, right


# ---------------------------------------------------------------- products and measures


@dataclass
class ProductReport:
    levels: list
    identity_holds: list
    exact_levels: list
    limits: dict


def product_dimension_check(K: IndexTable, H: IndexTable, G: IndexTable) -> ProductReport:
    """Per-level factorization log K/log G = (log H/log G)(log K/log H)."""
    N = min(K.N, H.N, G.N)
    levels, holds, exacts = [], [], []
    last = {}
    for n in range(1, N + 1):
        if G[n] == 1 or H[n] == 1:
            continue
        kg, hg, kh = (exact_log_ratio(K[n], G[n]), exact_log_ratio(H[n], G[n]),
                      exact_log_ratio(K[n], H[n]))
        if None not in (kg, hg, kh):
            ok = kg == hg * kh
            exacts.append(n)
        else:
            lk, lh, lg = (iv.log(iv.mpf(x)) for x in (K[n], H[n], G[n]))
            a = lk / lg
            b = (lh / lg) * (lk / lh)
            ok = bool(a.a <= b.b and b.a <= a.b)
        levels.append(n)
        holds.append(ok)
        last = {"K_in_G": float(math.log(K[n]) / math.log(G[n])),
                "H_in_G": float(math.log(H[n]) / math.log(G[n])),
                "K_in_H": float(math.log(K[n]) / math.log(H[n]))}
    if not levels:
        raise ZeroDivisionError("no level with non-trivial denominators")
    return ProductReport(levels, holds, exacts, last)


@dataclass
class MuReport:
    levels: list
    ratios: list  # Fraction when exact else float
    mu_lo: Fraction
    mu_hi: Fraction
    gaps: list  # |ratio - mu| (float) using the exact mu when lo == hi


def mu_vs_dimension(families, V, ambient: IndexTable, N: int, m: int) -> MuReport:
    """Compare ratios for the graft product over V with the measure of V.

    ``families`` is a list of (vertex letters, section IndexTable)."""
    from .permquot import graft_product_table

    subject = graft_product_table(families, m, N)
    rep = estimate_ratio(subject, ambient, list(range(1, N + 1)))
    lo, hi = tree_mu(V, N)
    ratios, gaps = [], []
    for e, a, b in zip(rep.exact, rep.lo, rep.hi):
        if e is not None:
            ratios.append(e)
            gaps.append(abs(e - lo) if lo == hi else None)
        else:
            ratios.append(float((a + b) / 2))
            gaps.append(abs(float((a + b) / 2) - float(lo)) if lo == hi else None)
    return MuReport(rep.levels, ratios, lo, hi, gaps)
