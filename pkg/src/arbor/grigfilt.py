"""Filtrations of the Grigorchuk group: closed forms and quotient cross-checks.

All indices are log base 2.  N_m is the product filtration K_m T_{m-1};
gamma is the lower 2-central series and D the Jennings series.  Between
N_m = gamma_{2^m+1} = D_{2^m+1} and N_{m+1} both series take 2^m steps.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import machine as mc
from .errors import InvalidParams
from .permquot import commutator, mul, quotient
from .tree import Antichain, as_vertex, mu
from .zoo import grigorchuk, grigorchuk_x

# |G : N_1| for the Grigorchuk group; measured from stabilized quotients
# (levels 5..7) and kept as a regression constant.
G_N1_LOGINDEX = 5


def _check_m(m):
    if not isinstance(m, int) or m < 1:
        raise InvalidParams(f"m must be a positive integer, got {m!r}")


def _check_r(m, r):
    _check_m(m)
    if not 1 <= r <= 2 ** m - 1:
        raise InvalidParams(f"r={r} outside 1..{2 ** m - 1}")


def nm_step_logdim(m: int) -> int:
    """log|N_m : N_{m+1}| = 2^m + 2^(m-1)."""
    _check_m(m)
    return 3 * 2 ** (m - 1)


def gamma_rel_logindex(m: int, r: int) -> int:
    """g(r) = log|N_m : gamma_{2^m+1+r}|."""
    _check_r(m, r)
    return 2 * r if r <= 2 ** (m - 1) - 1 else 2 ** (m - 1) + r


def rist_rel_logindex(m: int, r: int, k: int) -> int:
    """f(r) = log|rist_{N_m}(v) : rist_{gamma_{2^m+1+r}}(v)| for v at level k."""
    _check_r(m, r)
    if not 0 <= k <= m - 1:
        raise InvalidParams(f"k={k} outside 0..{m - 1}")
    q = r >> k
    return 2 * q if r <= 2 ** (m - 1) - 1 else 2 ** (m - 1 - k) + q


def vmr_dim(m: int, r: int) -> int:
    """dim V_m^r; the chain drops by one per step until it reaches 0."""
    return max(0, 2 ** m - r)


def d_rel_logindex(m: int, r: int) -> int:
    """log|N_m : D_{2^m+1+r}| by codimension counting.

    D_{2^m+1+r} meets the alpha part in V_m^r and the beta part in
    V_{m-1}^{floor(r/2)}, so the index is r + floor(r/2).
    """
    _check_r(m, r)
    alpha = 2 ** m - vmr_dim(m, r)
    beta = 2 ** (m - 1) - vmr_dim(m - 1, r // 2)
    return alpha + beta


def _steps(rel, m):
    """Per-step sizes from N_m to N_{m+1} given a relative log-index function."""
    vals = [0] + [rel(m, r) for r in range(1, 2 ** m)] + [nm_step_logdim(m)]
    return [b - a for a, b in zip(vals, vals[1:])]


def gamma_steps(m: int) -> list:
    return _steps(gamma_rel_logindex, m)


def d_steps(m: int) -> list:
    return _steps(d_rel_logindex, m)


def nm_logindex(m: int) -> int:
    """log|G : N_m| = |G:N_1| plus the steps in between."""
    _check_m(m)
    return G_N1_LOGINDEX + sum(nm_step_logdim(j) for j in range(1, m))


@dataclass
class FiltTable:
    """Per-step log2 relative indices of one filtration."""

    filtration: str  # "N", "gamma" or "D"
    steps: dict  # m -> list of step sizes (N: one entry per m)

    def __post_init__(self):
        for m, st in self.steps.items():
            if any(s < 0 for s in st):
                raise ValueError(f"negative step in {self.filtration} at m={m}")
            if sum(st) != nm_step_logdim(m):
                raise ValueError(f"{self.filtration} steps at m={m} do not close to N_(m+1)")

    @classmethod
    def closed_form(cls, filtration: str, max_m: int) -> "FiltTable":
        fn = {"N": lambda m: [nm_step_logdim(m)], "gamma": gamma_steps, "D": d_steps}[filtration]
        return cls(filtration, {m: fn(m) for m in range(1, max_m + 1)})


# ---------------------------------------------------------------- rist dimension


def rist_hdim_wrt_gamma(V) -> Fraction:
    """mu(V) for a vertex level k (int) or an antichain of the binary tree."""
    if isinstance(V, int):
        return Fraction(1, 2 ** V)
    if not isinstance(V, Antichain):
        V = Antichain.of([as_vertex(v, 2) for v in V], 2)
    return sum((Fraction(1, 2 ** v.level()) for v in V), Fraction(0))


def _x_y(k: int, m: int):
    """Closed-form x_m = log|rist(v)N_m : N_m| (up to a constant) and y_m = log|G:N_m|."""
    x = sum(3 * 2 ** (j - 1 - k) for j in range(k + 1, m))
    return x, nm_logindex(m)


@dataclass
class Sandwich:
    k: int
    m: int
    lower: float  # minimum over the window of the lower sandwich bound
    upper: float  # maximum over the window of the upper sandwich bound
    ratio_min: Fraction  # extremes of (x_m + f(r)) / (y_m + g(r)) over the window
    ratio_max: Fraction
    within: bool  # every window ratio lies between its own two bounds (exact check)
    stolz: list  # difference quotients (x_{j+1}-x_j)/(y_{j+1}-y_j), j = k+1..m-1
    limit: Fraction


def _f_vec(m, r, k):
    half = 2 ** (m - 1)
    q = r >> k
    return np.where(r <= half - 1, 2 * q, 2 ** (m - 1 - k) + q)


def _g_vec(m, r):
    half = 2 ** (m - 1)
    return np.where(r <= half - 1, 2 * r, half + r)


def sandwich(k: int, m: int) -> Sandwich:
    """Evaluate the window bounds and the difference-quotient limit for level k."""
    if not 0 <= k < m:
        raise InvalidParams("need 0 <= k < m")
    if m > 40:
        raise InvalidParams("m too large for 64-bit window arithmetic")
    x, y = _x_y(k, m)
    r = np.arange(1, 2 ** m, dtype=np.int64)
    f, g = _f_vec(m, r, k), _g_vec(m, r)
    num, den = x + f, y + g
    # lower bound x/(y+g) <= ratio is immediate from f >= 0; the upper bound
    # (x + 2^(1-k) g)/y is checked by exact cross-multiplication.
    within = bool(np.all(f >= 0) and np.all(num * y * 2 ** k <= (x * 2 ** k + 2 * g) * den))
    vals = num / den
    i, j = int(np.argmin(vals)), int(np.argmax(vals))
    lows = x / den
    highs = (x + 2.0 ** (1 - k) * g) / y
    stolz = []
    for jj in range(k + 1, m):
        x0, y0 = _x_y(k, jj)
        x1, y1 = _x_y(k, jj + 1)
        stolz.append(Fraction(x1 - x0, y1 - y0))
    limit = stolz[-1] if stolz else Fraction(x, y)
    return Sandwich(k, m, float(lows.min()), float(highs.max()),
                    Fraction(int(num[i]), int(den[i])), Fraction(int(num[j]), int(den[j])),
                    within, stolz, limit)


# ---------------------------------------------------------------- empirical series


def _graft_perm(p, rank: int, k: int, size_below: int, size: int) -> np.ndarray:
    """Permutation of level k+n acting by p inside the block of vertex ``rank``."""
    out = np.arange(size, dtype=np.int64)
    lo = rank * size_below
    out[lo:lo + size_below] = lo + np.asarray(p, dtype=np.int64)
    return out


def lower_2_central(G, length: int) -> list:
    """gamma_1 = G, gamma_(i+1) = [gamma_i, G] gamma_i^2, inside a level quotient."""
    series = [G]
    S = G.gens
    while len(series) < length:
        cur = series[-1]
        reps = cur.generators()
        new = [commutator(x, s) for x in reps for s in S] + [mul(x, x) for x in reps]
        series.append(G.normal_closure(new))
    return series


def jennings(G, length: int) -> list:
    """D_1 = G, D_n = [D_(n-1), G] Agemo(D_ceil(n/2)), inside a level quotient."""
    series = [None, G]
    S = G.gens
    for n in range(2, length + 1):
        prev = series[n - 1].generators()
        half = series[(n + 1) // 2].generators()
        new = [commutator(x, s) for x in prev for s in S]
        new += [mul(x, x) for x in half]
        new += [commutator(x, y) for i, x in enumerate(half) for y in half[i + 1:]]
        series.append(G.normal_closure(new))
    return series[1:]


def nm_subgroup(m: int, N: int):
    """N_m = K_m T_(m-1) as a subgroup of the level-N quotient."""
    G = quotient(grigorchuk().gens, N)
    x = grigorchuk_x()
    size = 2 ** N
    gens = []
    kn = N - m
    if kn >= 0:
        Gk = quotient(grigorchuk().gens, kn)
        K = Gk.normal_closure([mc.level_perm(x, kn)])
        for rep in K.generators():
            for v in range(2 ** m):
                gens.append(_graft_perm(rep, v, m, 2 ** kn, size))
    tn = N - m + 1
    if tn >= 0:
        Gt = quotient(grigorchuk().gens, tn)
        T = Gt.normal_closure([mc.level_perm(mc.power(x, 2), tn)])
        for rep in T.generators():
            for v in range(2 ** (m - 1)):
                gens.append(_graft_perm(rep, v, m - 1, 2 ** tn, size))
    return G, G.subgroup(gens) if gens else G.subgroup([np.arange(size)])


def _log2(n: int) -> int:
    b = n.bit_length() - 1
    if 1 << b != n:
        raise ValueError("order is not a power of 2")
    return b


@dataclass
class CrosscheckRow:
    filtration: str
    m: int
    r: int  # step index within the window (1-based); 0 for N rows
    closed_form: int
    empirical: int | None
    stabilized: bool

    @property
    def agrees(self) -> bool:
        return self.stabilized and self.empirical == self.closed_form


@dataclass
class Crosscheck:
    level: int
    rows: list = field(default_factory=list)
    nm_matches_gamma: dict = field(default_factory=dict)
    g_n1_logindex: int | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["filtration", "m", "r", "closed_form", "empirical", "stabilized"])
        for row in self.rows:
            w.writerow([row.filtration, row.m, row.r, row.closed_form,
                        "" if row.empirical is None else row.empirical, int(row.stabilized)])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"level": self.level, "g_n1_logindex": self.g_n1_logindex,
                "nm_matches_gamma": {str(k): v for k, v in self.nm_matches_gamma.items()},
                "rows": [row.__dict__ for row in self.rows]}


def _series_logindices(kind: str, N: int, length: int) -> list:
    G = quotient(grigorchuk().gens, N)
    ser = lower_2_central(G, length) if kind == "gamma" else jennings(G, length)
    total = _log2(G.order())
    return [total - _log2(H.order()) for H in ser]


def empirical_crosscheck(max_m: int, N: int) -> Crosscheck:
    """Compare closed forms with quotient computations at levels N and N+1.

    A value is marked stabilized only when both levels give the same answer.
    """
    _check_m(max_m)
    length = 2 ** (max_m + 1) + 1
    out = Crosscheck(N)
    idx = {}
    for kind in ("gamma", "D"):
        a = _series_logindices(kind, N, length)
        b = _series_logindices(kind, N + 1, length)
        idx[kind] = (a, b)
    ga, gb = idx["gamma"]
    out.g_n1_logindex = ga[2] if ga[2] == gb[2] else None
    for kind, closed in (("gamma", gamma_steps), ("D", d_steps)):
        a, b = idx[kind]
        for m in range(1, max_m + 1):
            start = 2 ** m  # index of N_m = series[2^m] (0-based list)
            for r, cf in enumerate(closed(m), start=1):
                ea = a[start + r] - a[start + r - 1]
                eb = b[start + r] - b[start + r - 1]
                stable = (a[start + r] == b[start + r] and a[start + r - 1] == b[start + r - 1])
                out.rows.append(CrosscheckRow(kind, m, r, cf, ea if stable else None, stable))
    for m in range(1, max_m + 1):
        G, Nm = nm_subgroup(m, N)
        _, Nm1 = nm_subgroup(m + 1, N)
        G2, Nm_b = nm_subgroup(m, N + 1)
        _, Nm1_b = nm_subgroup(m + 1, N + 1)
        step = _log2(Nm.order()) - _log2(Nm1.order())
        step_b = _log2(Nm_b.order()) - _log2(Nm1_b.order())
        full = _log2(G.order()) - _log2(Nm1.order())
        full_b = _log2(G2.order()) - _log2(Nm1_b.order())
        stable = step == step_b and full == full_b
        out.rows.append(CrosscheckRow("N", m, 0, nm_step_logdim(m), step if stable else None,
                                      stable))
        gam = lower_2_central(G, 2 ** m + 1)[-1]
        out.nm_matches_gamma[m] = bool(Nm.is_subgroup_of(gam) and gam.is_subgroup_of(Nm))
    return out
