"""Symbolic tree automorphisms with lazy, memoized evaluation.

Automorphisms act on the right and compose left to right: ``product(g, h)``
applies g first.  For a letter a and word w, ``(a w)g = (a)label(g) (w)section(g, a)``.

Expressions are hash-consed, so structurally equal expressions are the same
object and every cache below is keyed on object identity.
"""
from __future__ import annotations

import itertools
import json
import re
import sys
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ArityMismatch, BoundExceeded, NonEvaluable, SchemaViolation
from .tree import Vertex, as_vertex

if sys.getrecursionlimit() < 20000:
    sys.setrecursionlimit(20000)

# ---------------------------------------------------------------- machines


@dataclass(frozen=True)
class MachineDef:
    """Finite wreath recursion.  ``states`` is a tuple of (name, perm, children);
    a child is a state name or None for the identity."""

    name: str
    m: int
    states: tuple

    def __post_init__(self):
        names = [s[0] for s in self.states]
        if len(set(names)) != len(names):
            raise SchemaViolation("duplicate state names")
        for nm, perm, children in self.states:
            if sorted(perm) != list(range(self.m)):
                raise SchemaViolation(f"state {nm}: perm is not a bijection on [0,{self.m})")
            if len(children) != self.m:
                raise SchemaViolation(f"state {nm}: needs {self.m} children")
            for c in children:
                if c is not None and c not in names:
                    raise SchemaViolation(f"state {nm}: unknown child {c!r}")

    @classmethod
    def build(cls, name: str, m: int, states: dict) -> "MachineDef":
        """``states`` maps name -> (perm, children)."""
        return cls(name, m, tuple((k, tuple(p), tuple(c)) for k, (p, c) in states.items()))

    def state(self, name):
        for nm, perm, children in self.states:
            if nm == name:
                return perm, children
        raise KeyError(name)

    def state_names(self):
        return [s[0] for s in self.states]

    def gen(self, name) -> "Expr":
        return gen(self, name)

    def to_json(self) -> dict:
        return {"m": self.m, "states": {nm: {"perm": list(p), "children": list(c)}
                                        for nm, p, c in self.states}}

    @classmethod
    def from_json(cls, doc, name: str = "machine") -> "MachineDef":
        if isinstance(doc, str):
            doc = json.loads(doc)
        validate_machine_json(doc)
        states = {k: (v["perm"], v["children"]) for k, v in doc["states"].items()}
        return cls.build(name, doc["m"], states)


MACHINE_SCHEMA = {
    "type": "object",
    "required": ["m", "states"],
    "properties": {
        "m": {"type": "integer", "minimum": 2},
        "states": {
            "type": "object",
            "minProperties": 1,
            "additionalProperties": {
                "type": "object",
                "required": ["perm", "children"],
                "properties": {
                    "perm": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                    "children": {"type": "array", "items": {"type": ["string", "null"]}},
                },
                "additionalProperties": False,
            },
        },
    },
}


def validate_machine_json(doc):
    import jsonschema

    try:
        jsonschema.validate(doc, MACHINE_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SchemaViolation(f"machine JSON: {exc.message}") from None


# ---------------------------------------------------------------- expressions


class Expr:
    """Interned expression node.  Build through the constructor functions."""

    __slots__ = ("kind", "m", "args", "uid", "__weakref__")

    def __init__(self, kind, m, args, uid):
        self.kind = kind
        self.m = m
        self.args = args
        self.uid = uid

    def __repr__(self):
        return to_sexpr(self)

    def __mul__(self, other):
        return product(self, other)

    def __invert__(self):
        return inverse(self)

    def __pow__(self, k):
        return power(self, k)


_STORE: dict = {}
_UIDS = itertools.count()
_LOCK = threading.Lock()


def _mk(kind, m, args) -> Expr:
    key = (kind, m, args)
    e = _STORE.get(key)
    if e is None:
        with _LOCK:
            e = _STORE.get(key)
            if e is None:
                e = Expr(kind, m, args, next(_UIDS))
                _STORE[key] = e
    return e


def store_size() -> int:
    return len(_STORE)


def _check(*es):
    m = es[0].m
    for e in es[1:]:
        if e.m != m:
            raise ArityMismatch(f"arity {e.m} != {m}")
    return m


def identity(m: int) -> Expr:
    return _mk("id", m, ())


def gen(machine: MachineDef, state: str) -> Expr:
    machine.state(state)
    return _mk("gen", machine.m, (machine, state))


def rooted(perm: Sequence[int]) -> Expr:
    perm = tuple(int(a) for a in perm)
    m = len(perm)
    if sorted(perm) != list(range(m)):
        raise ValueError("not a permutation")
    if perm == tuple(range(m)):
        return identity(m)
    return _mk("rooted", m, (perm,))


def _mul2(l: Expr, r: Expr) -> Expr:
    m = _check(l, r)
    if l.kind == "id":
        return r
    if r.kind == "id":
        return l
    if l.kind == "rooted" and r.kind == "rooted":
        return rooted(compose_perm(l.args[0], r.args[0]))
    return _mk("mul", m, (l, r))


def product(*es) -> Expr:
    """Balanced product of the arguments, applied left to right."""
    if len(es) == 1 and not isinstance(es[0], Expr):
        es = tuple(es[0])
    if not es:
        raise ValueError("empty product needs an arity; use identity(m)")
    if len(es) == 1:
        return es[0]
    mid = len(es) // 2
    return _mul2(product(*es[:mid]), product(*es[mid:]))


def inverse(e: Expr) -> Expr:
    if e.kind == "id":
        return e
    if e.kind == "inv":
        return e.args[0]
    if e.kind == "rooted":
        return rooted(inverse_perm(e.args[0]))
    if e.kind == "graft":
        return graft(inverse(e.args[0]), e.args[1])
    return _mk("inv", e.m, (e,))


def power(e: Expr, k: int) -> Expr:
    if k < 0:
        return power(inverse(e), -k)
    if k == 0:
        return identity(e.m)
    if k == 1:
        return e
    half = power(e, k // 2)
    sq = _mul2(half, half)
    return _mul2(sq, e) if k % 2 else sq


def conj(g: Expr, h: Expr) -> Expr:
    """g^h = h^-1 g h."""
    return product(inverse(h), g, h)


def comm(g: Expr, h: Expr) -> Expr:
    """[g, h] = g^-1 h^-1 g h."""
    return product(inverse(g), inverse(h), g, h)


def _letters(v, m) -> tuple:
    if isinstance(v, tuple) and all(isinstance(a, int) for a in v):
        for a in v:
            if not 0 <= a < m:
                raise ValueError(f"letter {a} out of range")
        return v
    return as_vertex(v, m).letters


def graft(g: Expr, v) -> Expr:
    """g*v: section g at v and trivial label everywhere else."""
    u = _letters(v, g.m)
    if g.kind == "id":
        return g
    if not u:
        return g
    if g.kind == "graft":
        return graft(g.args[0], u + g.args[1])
    return _mk("graft", g.m, (g, u))


def truncate(e: Expr, n: int) -> Expr:
    """Finitary expression agreeing with e on all labels at levels < n."""
    if n < 0:
        raise ValueError("truncation level must be >= 0")
    if e.kind == "id" or n == 0:
        return identity(e.m)
    if e.kind == "rooted":
        return e
    if n == 1:
        return rooted(label(e))
    if e.kind == "trunc":
        return truncate(e.args[0], min(n, e.args[1]))
    return _mk("trunc", e.m, (e, n))


class FactorSchema:
    """Lazily enumerated factors (expr, vertex letters) of an infinite graft product.

    Levels must be non-decreasing and tend to infinity; vertices are pairwise
    non-comparable (checked as factors are produced).
    """

    def __init__(self, source: Callable[[], Iterable], m: int, name: str = "schema"):
        self.m = m
        self.name = name
        self._source = source
        self._iter = None
        self._items: list = []
        self._peek = None
        self._done = False
        self._seen: set = set()
        self._failed = None
        self._lock = threading.RLock()

    def _pull(self):
        if self._failed is not None:
            raise self._failed
        if self._iter is None:
            self._iter = iter(self._source())
        try:
            g, v = next(self._iter)
        except StopIteration:
            self._done = True
            return None
        except Exception as exc:
            # a dead generator would otherwise look exhausted on the next call
            self._failed = exc
            raise
        u = _letters(v, self.m)
        if g.m != self.m:
            raise ArityMismatch("factor arity mismatch")
        if self._items and len(u) < len(self._items[-1][1]):
            raise SchemaViolation("factor levels must be non-decreasing")
        for k in range(len(u) + 1):
            if u[:k] in self._seen:
                raise SchemaViolation(f"factor vertices {u[:k]} and {u} are comparable")
        self._seen.add(u)
        return (g, u)

    def upto(self, level: int) -> list:
        """Factors whose vertex level is at most ``level``."""
        with self._lock:
            while not self._done:
                if self._peek is None:
                    self._peek = self._pull()
                    if self._peek is None:
                        break
                if len(self._peek[1]) > level:
                    break
                self._items.append(self._peek)
                self._peek = None
            return [f for f in self._items if len(f[1]) <= level]

    def is_empty(self) -> bool:
        with self._lock:
            if self._items:
                return False
            if self._peek is None and not self._done:
                self._peek = self._pull()
            return self._peek is None

    def finite(self) -> bool:
        return False


class FiniteSchema(FactorSchema):
    def __init__(self, factors, m, name="finite"):
        factors = sorted(((g, _letters(v, m)) for g, v in factors), key=lambda f: len(f[1]))
        super().__init__(lambda: factors, m, name)

    def finite(self) -> bool:
        return True


class SubSchema(FactorSchema):
    """Factors of ``parent`` lying below letter a, with a stripped."""

    def __init__(self, parent: FactorSchema, a: int):
        self.m = parent.m
        self.parent = parent
        self.a = a
        self.name = f"{parent.name}/{a}"

    def upto(self, level: int) -> list:
        return [(g, u[1:]) for g, u in self.parent.upto(level + 1) if u and u[0] == self.a]

    def is_empty(self) -> bool:
        if not self.parent.finite():
            return False
        return not self.upto(10 ** 9)

    def finite(self) -> bool:
        return self.parent.finite()


_SUBSCHEMAS: dict = {}


def _subschema(s: FactorSchema, a: int) -> FactorSchema:
    key = (id(s), a)
    sub = _SUBSCHEMAS.get(key)
    if sub is None:
        sub = _SUBSCHEMAS.setdefault(key, (s, SubSchema(s, a)))
    return sub[1]


def inf_graft_product(schema: FactorSchema) -> Expr:
    return _mk("igp", schema.m, (schema,))


def finite_graft_product(factors, m: int) -> Expr:
    """Product of grafts at pairwise non-comparable vertices."""
    factors = list(factors)
    if not factors:
        return identity(m)
    return product(*[graft(g, v) for g, v in factors])


class LimitDef:
    """A limit of finite expressions: ``resolve(L)`` agrees with the limit on
    every label at levels < L."""

    def __init__(self, resolve: Callable[[int], Expr], m: int, name: str = "limit"):
        self._resolve = resolve
        self.m = m
        self.name = name
        self._cache: dict = {}

    def resolve(self, level: int) -> Expr:
        e = self._cache.get(level)
        if e is None:
            e = self._resolve(level)
            if e.m != self.m:
                raise ArityMismatch("limit arity mismatch")
            self._cache[level] = e
        return e


_LIMIT_SECTIONS: dict = {}


def limit(ld: LimitDef) -> Expr:
    return _mk("limit", ld.m, (ld,))


def _limit_section(ld: LimitDef, a: int) -> LimitDef:
    key = (id(ld), a)
    hit = _LIMIT_SECTIONS.get(key)
    if hit is None:
        sub = LimitDef(lambda L: section_letter(ld.resolve(L + 1), a), ld.m, f"{ld.name}/{a}")
        hit = _LIMIT_SECTIONS.setdefault(key, (ld, sub))
    return hit[1]


def delete_levels_embed(e: Expr, n: int) -> Expr:
    """Image of e in Aut T_{m^n} obtained by deleting all levels not divisible by n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1 or e.kind == "id":
        return e if n == 1 else identity(e.m ** n)
    return _mk("embed", e.m ** n, (e, n))


def delete_levels_pullback(E: Expr, m: int, n: int, w: tuple = ()) -> Expr:
    """Preimage under the deletion map: E acts on T_{m^n}, result on T_m.
    ``w`` (shorter than n) addresses a section between non-deleted levels."""
    if E.m != m ** n:
        raise ArityMismatch(f"expected arity {m ** n}, got {E.m}")
    if n == 1:
        return E
    if E.kind == "id":
        return identity(m)
    return _mk("pull", m, (E, n, tuple(w)))


# ---------------------------------------------------------------- small permutation helpers


def compose_perm(p, q) -> tuple:
    """First p then q."""
    return tuple(q[i] for i in p)


def inverse_perm(p) -> tuple:
    out = [0] * len(p)
    for i, j in enumerate(p):
        out[j] = i
    return tuple(out)


def _digits(x: int, n: int, m: int) -> tuple:
    out = []
    for _ in range(n):
        x, a = divmod(x, m)
        out.append(a)
    return tuple(reversed(out))


def _rank(letters, m) -> int:
    r = 0
    for a in letters:
        r = r * m + a
    return r


# ---------------------------------------------------------------- evaluation

_LABEL: dict = {}
_SECTION: dict = {}
_PERM: dict = {}
_ACTIVE = threading.local()


class _Guard:
    """Detects ill-founded recursion: re-entering the same evaluation key."""

    def __init__(self, key):
        self.key = key

    def __enter__(self):
        active = getattr(_ACTIVE, "keys", None)
        if active is None:
            active = _ACTIVE.keys = set()
        if self.key in active:
            raise NonEvaluable(f"ill-founded recursion at {self.key[0]} on {self.key[1].kind}")
        active.add(self.key)

    def __exit__(self, *exc):
        _ACTIVE.keys.discard(self.key)


def clear_caches():
    _LABEL.clear()
    _SECTION.clear()
    _PERM.clear()


def label(e: Expr) -> tuple:
    """Root label of e as a tuple: letter a goes to label(e)[a]."""
    hit = _LABEL.get(e)
    if hit is not None:
        return hit
    with _Guard(("label", e)):
        out = _label(e)
    _LABEL.setdefault(e, out)
    return out


def _label(e: Expr) -> tuple:
    k, m = e.kind, e.m
    if k == "id":
        return tuple(range(m))
    if k == "rooted":
        return e.args[0]
    if k == "gen":
        return e.args[0].state(e.args[1])[0]
    if k == "mul":
        return compose_perm(label(e.args[0]), label(e.args[1]))
    if k == "inv":
        return inverse_perm(label(e.args[0]))
    if k == "graft":
        return tuple(range(m))
    if k == "trunc":
        return label(e.args[0])
    if k == "igp":
        root = e.args[0].upto(0)
        return label(root[0][0]) if root else tuple(range(m))
    if k == "limit":
        return label(e.args[0].resolve(1))
    if k == "embed":
        return tuple(int(x) for x in level_perm(e.args[0], e.args[1]))
    if k == "pull":
        E, n, w = e.args
        big = label(E)
        inner = m
        j = len(w)
        out = []
        for x in range(inner):
            images = set()
            # the image letter must not depend on the letters after position j
            for tail in itertools.product(range(inner), repeat=n - j - 1):
                img = _digits(big[_rank(w + (x,) + tail, inner)], n, inner)
                images.add(img[j])
            if len(images) != 1:
                raise NonEvaluable("pullback of a label that is not a tree automorphism")
            out.append(images.pop())
        return tuple(out)
    raise TypeError(k)


def section_letter(e: Expr, a: int) -> Expr:
    key = (e, a)
    hit = _SECTION.get(key)
    if hit is not None:
        return hit
    with _Guard(("section", e, a)):
        out = _section(e, a)
    return _SECTION.setdefault(key, out)


def _section(e: Expr, a: int) -> Expr:
    k, m = e.kind, e.m
    if k in ("id", "rooted"):
        return identity(m)
    if k == "gen":
        machine, st = e.args
        child = machine.state(st)[1][a]
        return identity(m) if child is None else gen(machine, child)
    if k == "mul":
        l, r = e.args
        return _mul2(section_letter(l, a), section_letter(r, label(l)[a]))
    if k == "inv":
        g = e.args[0]
        return inverse(section_letter(g, inverse_perm(label(g))[a]))
    if k == "graft":
        g, u = e.args
        if u[0] != a:
            return identity(m)
        return graft(g, u[1:])
    if k == "trunc":
        g, n = e.args
        return truncate(section_letter(g, a), n - 1)
    if k == "igp":
        schema = e.args[0]
        root = schema.upto(0)
        if root:
            return section_letter(root[0][0], a)
        sub = _subschema(schema, a)
        if sub.is_empty():
            return identity(m)
        top = sub.upto(0)
        if top and sub.finite() and len(sub.upto(10 ** 9)) == 1:
            return top[0][0]
        return inf_graft_product(sub)
    if k == "limit":
        return limit(_limit_section(e.args[0], a))
    if k == "embed":
        g, n = e.args
        return delete_levels_embed(section(g, _digits(a, n, g.m)), n)
    if k == "pull":
        E, n, w = e.args
        w2 = w + (a,)
        if len(w2) < n:
            return delete_levels_pullback(E, m, n, w2)
        return delete_levels_pullback(section_letter(E, _rank(w2, m)), m, n, ())
    raise TypeError(k)


def section(e: Expr, v) -> Expr:
    """Section of e at the vertex v."""
    for a in _letters(v, e.m):
        e = section_letter(e, a)
    return e


def label_at(e: Expr, v) -> tuple:
    return label(section(e, v))


def act(e: Expr, v) -> Vertex:
    """Image of the vertex v under e."""
    letters = _letters(v, e.m)
    out = []
    cur = e
    for a in letters:
        out.append(label(cur)[a])
        cur = section_letter(cur, a)
    return Vertex(tuple(out), e.m)


_RANGES: dict = {}


def _arange(size: int) -> np.ndarray:
    r = _RANGES.get(size)
    if r is None:
        r = np.arange(size, dtype=np.int64)
        r.setflags(write=False)
        _RANGES[size] = r
    return r


def level_perm(e: Expr, n: int) -> np.ndarray:
    """Permutation of the m^n level-n vertices (graded lexicographic rank):
    vertex i goes to level_perm(e, n)[i].  The returned array is read-only."""
    if n < 0:
        raise ValueError("level must be >= 0")
    key = (e, n)
    hit = _PERM.get(key)
    if hit is not None:
        return hit
    with _Guard(("perm", e, n)):
        out = _level_perm(e, n)
    out.setflags(write=False)
    return _PERM.setdefault(key, out)


def _combine(lab, children, m, n) -> np.ndarray:
    M = m ** (n - 1)
    out = np.empty(m * M, dtype=np.int64)
    for a in range(m):
        out[a * M:(a + 1) * M] = lab[a] * M + children[a]
    return out


def _level_perm(e: Expr, n: int) -> np.ndarray:
    k, m = e.kind, e.m
    size = m ** n
    if n == 0 or k == "id":
        return _arange(size).copy()
    if k == "rooted":
        M = m ** (n - 1)
        x = _arange(size)
        return np.asarray(e.args[0], dtype=np.int64)[x // M] * M + x % M
    if k == "mul":
        return level_perm(e.args[1], n)[level_perm(e.args[0], n)]
    if k == "inv":
        p = level_perm(e.args[0], n)
        out = np.empty(size, dtype=np.int64)
        out[p] = _arange(size)
        return out
    if k == "graft":
        g, u = e.args
        out = _arange(size).copy()
        if n > len(u):
            M = m ** (n - len(u))
            base = _rank(u, m) * M
            out[base:base + M] = base + level_perm(g, n - len(u))
        return out
    if k == "trunc":
        g, L = e.args
        if n <= L:
            return level_perm(g, n).copy()
        M = m ** (n - L)
        x = _arange(size)
        return level_perm(g, L)[x // M] * M + x % M
    if k == "igp":
        out = _arange(size).copy()
        for g, u in e.args[0].upto(n - 1):
            M = m ** (n - len(u))
            base = _rank(u, m) * M
            out[base:base + M] = base + level_perm(g, n - len(u))
        return out
    if k == "limit":
        return level_perm(e.args[0].resolve(n), n).copy()
    if k == "embed":
        g, j = e.args
        return level_perm(g, j * n).copy()
    # gen, pull: generic recursion through label and sections
    lab = label(e)
    children = [level_perm(section_letter(e, a), n - 1) for a in range(m)]
    return _combine(lab, children, m, n)


def level_perm_naive(e: Expr, n: int) -> np.ndarray:
    """Unmemoized evaluation vertex by vertex through ``act`` (test oracle)."""
    m = e.m
    out = np.empty(m ** n, dtype=np.int64)
    for i in range(m ** n):
        v = _digits(i, n, m)
        letters = []
        cur = e
        for a in v:
            letters.append(_label(cur)[a])
            cur = _section(cur, a)
        out[i] = _rank(letters, m)
    return out


def equal_up_to_level(e1: Expr, e2: Expr, n: int) -> bool:
    """True iff all labels at levels < n coincide."""
    _check(e1, e2)
    return bool(np.array_equal(level_perm(e1, n), level_perm(e2, n)))


def is_trivial_to(e: Expr, n: int) -> bool:
    return bool(np.array_equal(level_perm(e, n), _arange(e.m ** n)))


@dataclass(frozen=True)
class Portrait:
    depth: int
    labels: dict

    def __eq__(self, other):
        return self.depth == other.depth and self.labels == other.labels


def portrait(e: Expr, depth: int) -> Portrait:
    m = e.m
    labels = {}
    frontier = [((), e)]
    for _ in range(depth):
        nxt = []
        for w, g in frontier:
            labels[Vertex(w, m)] = label(g)
            for a in range(m):
                nxt.append((w + (a,), section_letter(g, a)))
        frontier = nxt
    return Portrait(depth, labels)


def section_closure(gens: Sequence[Expr], bound: int, depth: int = 6) -> list:
    """Close ``gens`` under first-level sections, deduplicating expressions
    equal up to ``depth``.  Returns representatives in discovery order."""
    gens = list(gens)
    if bound < len(gens):
        raise ValueError("bound must be at least the number of generators")
    seen = {}
    order = []
    queue = list(gens)
    while queue:
        g = queue.pop(0)
        key = level_perm(g, depth).tobytes()
        if key in seen:
            continue
        seen[key] = g
        order.append(g)
        if len(order) > bound:
            raise BoundExceeded(f"section closure exceeds {bound} elements at depth {depth}")
        for a in range(g.m):
            queue.append(section_letter(g, a))
    return order


# ---------------------------------------------------------------- s-expressions

_TOKEN = re.compile(r'\s*(?:(\()|(\))|"([^"]*)"|([^\s()"]+))')


def _tokenize(s: str):
    pos = 0
    out = []
    s = s.strip()
    while pos < len(s):
        mt = _TOKEN.match(s, pos)
        if not mt or mt.end() == pos:
            raise SchemaViolation(f"cannot parse s-expression near {s[pos:pos + 20]!r}")
        pos = mt.end()
        if mt.group(1):
            out.append("(")
        elif mt.group(2):
            out.append(")")
        elif mt.group(3) is not None:
            out.append(("str", mt.group(3)))
        else:
            out.append(mt.group(4))
    return out


def _read(tokens, i):
    tok = tokens[i]
    if tok == "(":
        items = []
        i += 1
        while i < len(tokens) and tokens[i] != ")":
            item, i = _read(tokens, i)
            items.append(item)
        if i >= len(tokens):
            raise SchemaViolation("unbalanced parentheses")
        return items, i + 1
    if tok == ")":
        raise SchemaViolation("unexpected ')'")
    return tok, i + 1


def parse_sexpr(s: str, machines: dict, m: int | None = None) -> Expr:
    """Parse an expression such as ``(graft (gen grig b) "01")``.

    Forms: id, (id m), (gen M s), (rooted p0 p1 ...), (mul e ...), (inv e),
    (pow e k), (conj g h), (comm g h), (graft e "w"), (trunc e n),
    (embed e n), (pullback e m n).
    """
    tokens = _tokenize(s)
    tree, i = _read(tokens, 0)
    if i != len(tokens):
        raise SchemaViolation("trailing tokens after s-expression")
    return _build(tree, machines, m)


def _build(t, machines, m):
    if isinstance(t, str):
        if t == "id" and m is not None:
            return identity(m)
        raise SchemaViolation(f"bare atom {t!r}")
    if not t or not isinstance(t[0], str):
        raise SchemaViolation("expected an operator")
    op, rest = t[0], t[1:]

    def sub(x):
        return _build(x, machines, m)

    def string(x):
        if not (isinstance(x, tuple) and x[0] == "str"):
            raise SchemaViolation("expected a quoted vertex string")
        return x[1]

    try:
        if op == "id":
            return identity(int(rest[0]) if rest else m)
        if op == "gen":
            return gen(machines[rest[0]], rest[1])
        if op == "rooted":
            return rooted([int(x) for x in rest])
        if op == "mul":
            return product(*[sub(x) for x in rest])
        if op == "inv":
            return inverse(sub(rest[0]))
        if op == "pow":
            return power(sub(rest[0]), int(rest[1]))
        if op == "conj":
            return conj(sub(rest[0]), sub(rest[1]))
        if op == "comm":
            return comm(sub(rest[0]), sub(rest[1]))
        if op == "graft":
            g = sub(rest[0])
            return graft(g, Vertex.parse(string(rest[1]), g.m))
        if op == "trunc":
            return truncate(sub(rest[0]), int(rest[1]))
        if op == "embed":
            return delete_levels_embed(sub(rest[0]), int(rest[1]))
        if op == "pullback":
            return delete_levels_pullback(sub(rest[0]), int(rest[1]), int(rest[2]))
    except (KeyError, IndexError, ValueError) as exc:
        raise SchemaViolation(f"bad ({op} ...) form: {exc}") from None
    raise SchemaViolation(f"unknown operator {op!r}")


def _vstr(u, m):
    return '"' + str(Vertex(u, m)) + '"'


def to_sexpr(e: Expr) -> str:
    k = e.kind
    if k == "id":
        return f"(id {e.m})"
    if k == "gen":
        return f"(gen {e.args[0].name} {e.args[1]})"
    if k == "rooted":
        return "(rooted " + " ".join(map(str, e.args[0])) + ")"
    if k == "mul":
        parts = []
        stack = [e]
        while stack:  # flatten nested products
            x = stack.pop()
            if x.kind == "mul":
                stack.extend([x.args[1], x.args[0]])
            else:
                parts.append(x)
        return "(mul " + " ".join(to_sexpr(x) for x in parts) + ")"
    if k == "inv":
        return f"(inv {to_sexpr(e.args[0])})"
    if k == "graft":
        return f"(graft {to_sexpr(e.args[0])} {_vstr(e.args[1], e.m)})"
    if k == "trunc":
        return f"(trunc {to_sexpr(e.args[0])} {e.args[1]})"
    if k == "embed":
        return f"(embed {to_sexpr(e.args[0])} {e.args[1]})"
    if k == "pull":
        E, n, w = e.args
        if w:
            return f"(pullback-at {to_sexpr(E)} {e.m} {n} {_vstr(w, e.m)})"
        return f"(pullback {to_sexpr(E)} {e.m} {n})"
    if k == "igp":
        return f"(infgraft {e.args[0].name})"
    if k == "limit":
        return f"(limit {e.args[0].name})"
    raise TypeError(k)
