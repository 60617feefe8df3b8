"""Congruence quotients: permutation images of generating sets on level n.

Two exact order/membership engines are provided.

* ``StabChain``: deterministic Schreier–Sims (base points chosen as the first
  moved point).  Works for any group.
* ``TreePcgs``: a layered sift along the level-stabilizer series, valid when
  every label of every generator lies in one cyclic group C of prime order p.
  Then each St(k)/St(k+1) section of the group embeds in F_p^(m^k), and the
  group is stored as one echelon basis per layer with a representative
  element per row.  The order is p^(total rank).

Points of level n are indexed by graded lexicographic rank.
"""
from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import machine as mc
from .errors import NotFoundWithinBound
from .tree import Vertex, level_vertices

# ---------------------------------------------------------------- perm helpers


def identity_perm(size: int) -> np.ndarray:
    return np.arange(size, dtype=np.int64)


def mul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """First p, then q."""
    return q[p]


def inv(p: np.ndarray) -> np.ndarray:
    out = np.empty_like(p)
    out[p] = np.arange(len(p), dtype=p.dtype)
    return out


def is_identity(p: np.ndarray) -> bool:
    return bool(np.array_equal(p, np.arange(len(p))))


def perm_power(p: np.ndarray, k: int) -> np.ndarray:
    if k < 0:
        return perm_power(inv(p), -k)
    out = identity_perm(len(p))
    base = p
    while k:
        if k & 1:
            out = base[out]
        base = base[base]
        k >>= 1
    return out


def commutator(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """[x, y] = x^-1 y^-1 x y."""
    return y[x[inv(y)[inv(x)]]]


def conjugate(x: np.ndarray, s: np.ndarray) -> np.ndarray:
    """x^s = s^-1 x s."""
    return s[x[inv(s)]]


def perm_order(p: np.ndarray) -> int:
    seen = np.zeros(len(p), dtype=bool)
    order = 1
    for i in range(len(p)):
        if seen[i]:
            continue
        length = 0
        j = i
        while not seen[j]:
            seen[j] = True
            j = p[j]
            length += 1
        order = order * length // math.gcd(order, length)
    return order


def cycle_length(p: np.ndarray, point: int) -> int:
    j = p[point]
    n = 1
    while j != point:
        j = p[j]
        n += 1
    return n


def orbits(gens, size: int) -> list:
    """Orbits of the group generated by ``gens`` on range(size), each sorted."""
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    if not gens:
        return [[i] for i in range(size)]
    rows = np.concatenate([np.arange(size)] * len(gens))
    cols = np.concatenate(list(gens))
    graph = coo_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(size, size))
    _, comp = connected_components(graph, directed=True, connection="weak")
    groups: dict = {}
    for i, c in enumerate(comp):
        groups.setdefault(int(c), []).append(i)
    return sorted(groups.values(), key=lambda o: o[0])


# ---------------------------------------------------------------- Schreier–Sims


class StabChain:
    """Deterministic incremental Schreier–Sims."""

    def __init__(self, gens, degree: int):
        self.degree = degree
        self.base: list = []
        self.strong: list = []  # strong generators
        self.trans: list = []  # per level: dict point -> perm taking base point there
        gens = [np.asarray(g, dtype=np.int64) for g in gens if not is_identity(g)]
        self._build(gens)

    def _first_moved(self, g):
        moved = np.nonzero(g != np.arange(self.degree))[0]
        return int(moved[0])

    def _level_gens(self, i):
        out = []
        for s in self.strong:
            if all(s[b] == b for b in self.base[:i]):
                out.append(s)
        return out

    def _transversal(self, i):
        b = self.base[i]
        gens = self._level_gens(i)
        tr = {b: identity_perm(self.degree)}
        queue = deque([b])
        while queue:
            x = queue.popleft()
            for s in gens:
                y = int(s[x])
                if y not in tr:
                    tr[y] = mul(tr[x], s)
                    queue.append(y)
        return tr

    def sift(self, g, start: int = 0):
        """Return (residue, level where sifting stopped)."""
        for i in range(start, len(self.base)):
            b = self.base[i]
            y = int(g[b])
            u = self.trans[i].get(y)
            if u is None:
                return g, i
            g = mul(g, inv(u))
        return g, len(self.base)

    def _build(self, gens):
        for g in gens:
            if all(g[b] == b for b in self.base):
                self.base.append(self._first_moved(g))
            self.strong.append(g)
        self.trans = [self._transversal(i) for i in range(len(self.base))]
        i = len(self.base) - 1
        while i >= 0:
            restart = False
            gens_i = self._level_gens(i)
            for x, u in list(self.trans[i].items()):
                for s in gens_i:
                    y = int(s[x])
                    sch = mul(mul(u, s), inv(self.trans[i][y]))
                    if is_identity(sch):
                        continue
                    h, j = self.sift(sch, i + 1)
                    if j < len(self.base) or not is_identity(h):
                        if j == len(self.base):
                            self.base.append(self._first_moved(h))
                            self.trans.append(None)
                        self.strong.append(h)
                        for level in range(i + 1, j + 1):
                            self.trans[level] = self._transversal(level)
                        i = j
                        restart = True
                        break
                if restart:
                    break
            if not restart:
                i -= 1

    def order(self) -> int:
        out = 1
        for t in self.trans:
            out *= len(t)
        return out

    def contains(self, g) -> bool:
        h, j = self.sift(np.asarray(g, dtype=np.int64))
        return j == len(self.base) and is_identity(h)


# ---------------------------------------------------------------- layered p-group sift


def cyclic_label_data(gens, m: int, n: int):
    """If every label of every generator (levels < n) lies in a single cyclic
    group of prime order, return (p, c0, table); otherwise None.

    ``table[y] = e`` when the generator h of that group sends letter c0 to y
    after e applications.  Trivial generating sets give p = None.
    """
    labels = set()
    for g in gens:
        for k in range(n):
            M = m ** (n - k - 1)
            q = g[np.arange(m ** (k + 1)) * M] // M
            rows = np.unique(q.reshape(m ** k, m) % m, axis=0)
            for r in rows:
                labels.add(tuple(int(x) for x in r))
    ident = tuple(range(m))
    labels.discard(ident)
    if not labels:
        return (None, None, None)
    labels = sorted(labels)
    h = labels[0]
    powers = [ident]
    cur = h
    while cur != ident:
        powers.append(cur)
        cur = mc.compose_perm(cur, h)
    p = len(powers)
    if any(p % d == 0 for d in range(2, int(math.isqrt(p)) + 1)):
        return None
    if not set(labels) <= set(powers):
        return None
    c0 = next(a for a in range(m) if h[a] != a)
    table = np.full(m, -1, dtype=np.int64)
    for e, pw in enumerate(powers):
        table[pw[c0]] = e
    return (p, c0, table)


class _Layer:
    __slots__ = ("pivots", "rows", "reps", "invpows")

    def __init__(self):
        self.pivots = []
        self.rows = []
        self.reps = []
        self.invpows = []  # invpows[i][c] = reps[i]^(-c)


class TreePcgs:
    """Layered sift for groups whose labels lie in a cyclic group of prime order p."""

    def __init__(self, m: int, n: int, p: int, c0: int, table, conj_gens):
        self.m, self.n, self.p, self.c0 = m, n, p, c0
        self.table = table
        self.size = m ** n
        self.conj_gens = [np.asarray(s, dtype=np.int64) for s in conj_gens]
        self.conj_pairs = [(s, inv(s)) for s in self.conj_gens]
        self.layers = [_Layer() for _ in range(n)]

    def layer_vector(self, g, k):
        m = self.m
        M = m ** (self.n - k - 1)
        base = np.arange(m ** k, dtype=np.int64) * m
        imgs = g[(base + self.c0) * M] // M - base
        return self.table[imgs]

    def sift(self, g):
        """Reduce g; return None if g is a member, else (layer, residue, vector)."""
        p = self.p
        for k in range(self.n):
            layer = self.layers[k]
            v = self.layer_vector(g, k)
            if not v.any():
                continue
            if (v < 0).any():
                raise ValueError("element has a label outside the cyclic label group")
            for piv, row, ip in zip(layer.pivots, layer.rows, layer.invpows):
                c = int(v[piv])
                if c:
                    v = (v - c * row) % p
                    g = ip[c][g]
            if v.any():
                return k, g, v
        return None

    def _insert(self, k, g, v):
        p = self.p
        piv = int(np.flatnonzero(v)[0])
        c = int(v[piv])
        if c != 1:
            e = pow(c, -1, p)
            g = perm_power(g, e)
            v = (v * e) % p
        layer = self.layers[k]
        gi = inv(g)
        ip = [identity_perm(self.size)]
        for _ in range(1, p):
            ip.append(gi[ip[-1]])
        layer.pivots.append(piv)
        layer.rows.append(v.astype(np.int64))
        layer.reps.append(g)
        layer.invpows.append(ip)
        return g

    def add(self, elements):
        """Close the structure under the given elements (and the closure rules)."""
        work = deque(np.asarray(x, dtype=np.int64) for x in elements)
        while work:
            x = work.popleft()
            res = self.sift(x)
            if res is None:
                continue
            k, g, v = res
            others = list(self.layers[k].reps)
            g = self._insert(k, g, v)
            work.append(perm_power(g, self.p))
            for s, si in self.conj_pairs:
                work.append(s[g[si]])
            for y in others:
                work.append(commutator(g, y))
        return self

    def ranks(self) -> list:
        return [len(layer.reps) for layer in self.layers]

    def order(self) -> int:
        return self.p ** sum(self.ranks())

    def contains(self, g) -> bool:
        res = self.sift(np.asarray(g, dtype=np.int64))
        return res is None

    def reps(self) -> list:
        out = []
        for layer in self.layers:
            out.extend(layer.reps)
        return out


# ---------------------------------------------------------------- LevelQuotient


def _as_perm(x, n):
    if isinstance(x, mc.Expr):
        return np.asarray(mc.level_perm(x, n), dtype=np.int64)
    return np.asarray(x, dtype=np.int64)


class LevelQuotient:
    """Permutation group on the m^n level-n vertices."""

    def __init__(self, perms, m: int, n: int, method: str = "auto", _label_data=None):
        self.m, self.n = m, n
        self.size = m ** n
        self.gens = [np.asarray(g, dtype=np.int64) for g in perms]
        for g in self.gens:
            g.setflags(write=False)
        self.method = method
        self._engine = None
        self._label_data = _label_data
        self._order = None

    # engine selection -------------------------------------------------
    def label_data(self):
        if self._label_data is None:
            self._label_data = cyclic_label_data(self.gens, self.m, self.n) or ("none",)
        return self._label_data

    def engine(self):
        if self._engine is not None:
            return self._engine
        gens = [g for g in self.gens if not is_identity(g)]
        method = self.method
        data = self.label_data()
        if method == "auto":
            method = "pcgs" if data[0] not in ("none",) else "schreier-sims"
        if method == "pcgs":
            if data[0] == "none":
                raise ValueError("labels do not lie in a cyclic group of prime order")
            p, c0, table = data
            if p is None:
                eng = _TrivialEngine()
            else:
                eng = TreePcgs(self.m, self.n, p, c0, table, gens).add(gens)
        else:
            eng = StabChain(gens, self.size)
        self.method = method
        self._engine = eng
        return eng

    # basic queries ----------------------------------------------------
    def order(self) -> int:
        if self._order is None:
            self._order = self.engine().order()
        return self._order

    def contains(self, x) -> bool:
        return self.engine().contains(_as_perm(x, self.n))

    def orbits(self) -> list:
        return orbits(self.gens, self.size)

    def is_transitive(self) -> bool:
        return len(self.orbits()) == 1

    def layer_orders(self) -> list:
        """|G St(k) : St(k)| for k = 0..n, read off the layered structure."""
        eng = self.engine()
        if isinstance(eng, _TrivialEngine):
            return [1] * (self.n + 1)
        if not isinstance(eng, TreePcgs):
            raise ValueError("layer orders need the layered engine")
        out = [1]
        total = 0
        for r in eng.ranks():
            total += r
            out.append(eng.p ** total)
        return out

    def elements_bfs(self, limit: int = 10 ** 4):
        return bfs_elements(self.gens, self.size, limit)

    # subgroup constructions ------------------------------------------
    def _spawn(self, perms, conj_gens):
        """Subgroup generated by ``perms`` closed under conjugation by ``conj_gens``."""
        perms = [np.asarray(p, dtype=np.int64) for p in perms]
        q = LevelQuotient(perms, self.m, self.n, self.method, self.label_data())
        data = self.label_data()
        if self.method == "pcgs" or (self.method == "auto" and data[0] != "none"):
            if data[0] is None:
                q._engine = _TrivialEngine()
            else:
                p, c0, table = data
                q._engine = TreePcgs(self.m, self.n, p, c0, table, conj_gens).add(perms)
            q.method = "pcgs"
        else:
            q._engine = _normal_closure_ss(perms, conj_gens, self.size)
            q.method = "schreier-sims"
        q.gens = [g for g in q.generators()]
        return q

    def generators(self) -> list:
        eng = self.engine()
        if isinstance(eng, TreePcgs):
            return eng.reps()
        if isinstance(eng, _TrivialEngine):
            return []
        return list(eng.strong)

    def subgroup(self, perms) -> "LevelQuotient":
        perms = [_as_perm(x, self.n) for x in perms]
        return self._spawn(perms, perms)

    def normal_closure(self, perms) -> "LevelQuotient":
        """Normal closure in this group of the given elements."""
        self.engine()
        perms = [_as_perm(x, self.n) for x in perms]
        return self._spawn(perms, self.gens)

    def derived_subgroup(self) -> "LevelQuotient":
        gens = self.generators()
        comms = [commutator(x, y) for i, x in enumerate(gens) for y in gens[i + 1:]]
        return self.normal_closure(comms)

    def is_subgroup_of(self, other: "LevelQuotient") -> bool:
        return all(other.contains(g) for g in self.generators())


class _TrivialEngine:
    strong: list = []

    def order(self):
        return 1

    def contains(self, g):
        return is_identity(g)


def _normal_closure_ss(perms, conj_gens, size):
    gens = [p for p in perms if not is_identity(p)]
    chain = StabChain(gens, size)
    work = deque((g, s) for g in gens for s in conj_gens)
    while work:
        g, s = work.popleft()
        c = conjugate(g, s)
        if not chain.contains(c):
            gens.append(c)
            chain = StabChain(gens, size)
            work.extend((c, t) for t in conj_gens)
    return chain


def quotient(gens, n: int, m: int | None = None, method: str = "auto") -> LevelQuotient:
    """Level-n congruence quotient of the group generated by ``gens``."""
    gens = list(gens)
    if m is None:
        if not gens:
            raise ValueError("arity needed for an empty generating set")
        m = gens[0].m
    perms = [_as_perm(g, n) for g in gens]
    return LevelQuotient(perms, m, n, method)


def bfs_elements(gens, size: int, limit: int = 10 ** 4) -> int:
    """Naive breadth-first multiplication closure; returns the group order."""
    start = identity_perm(size)
    seen = {start.tobytes()}
    queue = deque([start])
    gens = [np.asarray(g, dtype=np.int64) for g in gens]
    while queue:
        x = queue.popleft()
        for s in gens:
            y = s[x]
            key = y.tobytes()
            if key not in seen:
                seen.add(key)
                if len(seen) > limit:
                    raise NotFoundWithinBound(f"group has more than {limit} elements")
                queue.append(y)
    return len(seen)


def bfs_group(gens, size: int, limit: int = 10 ** 4) -> set:
    """All elements (as bytes) of the group generated by ``gens``."""
    start = identity_perm(size)
    seen = {start.tobytes(): start}
    queue = deque([start])
    gens = [np.asarray(g, dtype=np.int64) for g in gens]
    while queue:
        x = queue.popleft()
        for s in gens:
            y = s[x]
            key = y.tobytes()
            if key not in seen:
                seen[key] = y
                if len(seen) > limit:
                    raise NotFoundWithinBound(f"group has more than {limit} elements")
                queue.append(y)
    return seen


def is_level_transitive(gens, n: int) -> bool:
    return quotient(gens, n).is_transitive()


@dataclass(frozen=True)
class SubtreeTransitivity:
    level: int
    verified_to_depth: int
    note: str = "transitivity below the returned level was probed to finitely many levels only"


def minimal_subtree_transitivity_level(gens, max_k: int, probe_depth: int, m: int | None = None):
    """Smallest k <= max_k such that, for every level-k vertex v, the
    stabilizer of v acts transitively on the level-``probe_depth`` vertices
    below v (hence on every intermediate level)."""
    gens = list(gens)
    m = m or gens[0].m
    N = probe_depth
    perms = [_as_perm(g, N) for g in gens]
    for k in range(0, min(max_k, N) + 1):
        M = m ** (N - k)
        ok = True
        for v in range(m ** k):
            # orbit of the level-k vertex v with transversal, then Schreier generators
            tr = {v: identity_perm(m ** N)}
            queue = deque([v])
            while queue:
                x = queue.popleft()
                for s in perms:
                    y = int(s[x * M]) // M
                    if y not in tr:
                        tr[y] = mul(tr[x], s)
                        queue.append(y)
            stab = []
            for x, u in tr.items():
                for s in perms:
                    y = int(s[x * M]) // M
                    sg = mul(mul(u, s), inv(tr[y]))
                    if not is_identity(sg):
                        stab.append(sg)
            block = np.arange(v * M, (v + 1) * M)
            reached = {int(block[0])}
            queue = deque([int(block[0])])
            while queue:
                x = queue.popleft()
                for s in stab:
                    y = int(s[x])
                    if y not in reached:
                        reached.add(y)
                        queue.append(y)
            if len(reached) != M:
                ok = False
                break
        if ok:
            return SubtreeTransitivity(k, probe_depth)
    raise NotFoundWithinBound(f"no subtree-transitivity level <= {max_k} at probe depth {probe_depth}")


# ---------------------------------------------------------------- index tables


@dataclass
class IndexTable:
    """Exact orders |G St(n) : St(n)| for n = 0..N."""

    m: int
    orders: list
    name: str = ""
    extended_from: int | None = None  # first level obtained by recursion, if any
    method: str = ""

    def __post_init__(self):
        if self.orders and self.orders[0] != 1:
            raise ValueError("order at level 0 must be 1")
        for a, b in zip(self.orders, self.orders[1:]):
            if b % a:
                raise ValueError("orders must divide each other level by level")

    @property
    def N(self) -> int:
        return len(self.orders) - 1

    def __getitem__(self, n):
        return self.orders[n]

    def to_csv(self) -> str:
        from .dimension import log_m_decimal

        lines = ["level,order,log_m_order"]
        for n, o in enumerate(self.orders):
            lines.append(f"{n},{o},{log_m_decimal(o, self.m)}")
        return "\n".join(lines) + "\n"


def index_table(gens, N: int, m: int | None = None, method: str = "auto", jobs: int = 1,
                name: str = "") -> IndexTable:
    """Orders of the congruence quotients for n = 0..N."""
    gens = list(gens)
    m = m or gens[0].m
    top = quotient(gens, N, m, method)
    if N > 0 and top.label_data()[0] != "none" and method in ("auto", "pcgs"):
        orders = top.layer_orders()
        return IndexTable(m, orders, name, method="pcgs")

    def level_order(n):
        if n == 0:
            return 1
        if n == N:
            return top.order()
        return quotient(gens, n, m, method).order()

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            orders = list(pool.map(level_order, range(N + 1)))
    else:
        orders = [level_order(n) for n in range(N + 1)]
    return IndexTable(m, orders, name, method=top.method)


def wreath_index_table(h_order: int, m: int, N: int, name: str = "W_H") -> IndexTable:
    """Closed form |H|^((m^n - 1)/(m - 1)) for the iterated wreath product."""
    return IndexTable(m, [h_order ** ((m ** n - 1) // (m - 1)) for n in range(N + 1)], name,
                      method="closed-form")


def graft_product_table(families, m: int, N: int, name: str = "") -> IndexTable:
    """Orders of the group generated by grafted families at non-comparable
    vertices: the product over (vertex, section table) of table[n - d(v)]."""
    orders = []
    for n in range(N + 1):
        o = 1
        for v, table in families:
            d = len(v)
            if n > d:
                o *= table[n - d]
        orders.append(o)
    return IndexTable(m, orders, name, method="graft-product")
