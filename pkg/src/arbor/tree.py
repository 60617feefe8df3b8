"""Vertices of the regular m-adic tree, antichains and the weighted measure.

Letters are 0-indexed: the letter written i in 1-based notation is stored
as i - 1.  All measures are exact ``Fraction`` values.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Mapping, Sequence

from .errors import ArityMismatch, SchemaViolation

_DIGITS = "0123456789abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True, order=False)
class Vertex:
    """A finite word over the alphabet [0, m)."""

    letters: tuple
    m: int

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("arity must be at least 2")
        letters = tuple(int(a) for a in self.letters)
        for a in letters:
            if not 0 <= a < self.m:
                raise ValueError(f"letter {a} out of range for m={self.m}")
        object.__setattr__(self, "letters", letters)

    @classmethod
    def parse(cls, s: str, m: int) -> "Vertex":
        """Read a digit string ("0121"), or a dotted string ("12.3.0") when m > 36."""
        if s == "" or s == "()":
            return cls((), m)
        if "." in s:
            return cls(tuple(int(t) for t in s.split(".")), m)
        return cls(tuple(int(ch, 36) for ch in s), m)

    @classmethod
    def root(cls, m: int) -> "Vertex":
        return cls((), m)

    def level(self) -> int:
        return len(self.letters)

    def __len__(self):
        return len(self.letters)

    def __str__(self):
        if self.m <= 36:
            return "".join(_DIGITS[a] for a in self.letters)
        return ".".join(str(a) for a in self.letters)

    def __repr__(self):
        return f"Vertex({str(self)!r}, m={self.m})"

    def child(self, a: int) -> "Vertex":
        return Vertex(self.letters + (a,), self.m)

    def concat(self, other: "Vertex") -> "Vertex":
        _same_arity(self, other)
        return Vertex(self.letters + other.letters, self.m)

    def prefix(self, k: int) -> "Vertex":
        return Vertex(self.letters[:k], self.m)

    def is_prefix_of(self, other: "Vertex") -> bool:
        n = len(self.letters)
        return n <= len(other.letters) and other.letters[:n] == self.letters

    def rank(self) -> int:
        """Graded lexicographic rank within its level (base-m value)."""
        r = 0
        for a in self.letters:
            r = r * self.m + a
        return r

    @classmethod
    def from_rank(cls, rank: int, level: int, m: int) -> "Vertex":
        letters = []
        for _ in range(level):
            rank, a = divmod(rank, m)
            letters.append(a)
        return cls(tuple(reversed(letters)), m)

    def sort_key(self):
        return (len(self.letters), self.letters)


def as_vertex(v, m: int) -> Vertex:
    """Coerce a string, tuple or Vertex to a Vertex of arity m."""
    if isinstance(v, Vertex):
        if v.m != m:
            raise ArityMismatch(f"vertex arity {v.m} != {m}")
        return v
    if isinstance(v, str):
        return Vertex.parse(v, m)
    return Vertex(tuple(v), m)


def _same_arity(u: Vertex, v: Vertex):
    if u.m != v.m:
        raise ArityMismatch(f"arities differ: {u.m} vs {v.m}")


def is_comparable(u: Vertex, v: Vertex) -> bool:
    _same_arity(u, v)
    return u.is_prefix_of(v) or v.is_prefix_of(u)


def vertex_to_int(v: Vertex) -> int:
    """Binary value of the reversed path: x_n 2^(n-1) + ... + x_1."""
    if v.m != 2:
        raise ArityMismatch("vertex_to_int needs a binary vertex")
    return sum(a << i for i, a in enumerate(v.letters))


def level_vertices(k: int, m: int) -> list:
    return [Vertex.from_rank(i, k, m) for i in range(m ** k)]


@dataclass(frozen=True)
class Antichain:
    """Finite set of pairwise non-comparable vertices, graded-lex sorted."""

    vertices: tuple
    m: int

    def __post_init__(self):
        vs = sorted({as_vertex(v, self.m) for v in self.vertices}, key=Vertex.sort_key)
        for i, u in enumerate(vs):
            for w in vs[i + 1:]:
                if u.is_prefix_of(w):
                    raise SchemaViolation(f"{u} and {w} are comparable")
        object.__setattr__(self, "vertices", tuple(vs))

    @classmethod
    def of(cls, items: Sequence, m: int) -> "Antichain":
        return cls(tuple(as_vertex(v, m) for v in items), m)

    @classmethod
    def full_level(cls, k: int, m: int) -> "Antichain":
        return cls(tuple(level_vertices(k, m)), m)

    def __iter__(self) -> Iterator[Vertex]:
        return iter(self.vertices)

    def __len__(self):
        return len(self.vertices)

    def max_level(self) -> int:
        return max((v.level() for v in self.vertices), default=0)

    def to_json(self):
        return [str(v) for v in self.vertices]


@dataclass(frozen=True)
class AntichainSchema:
    """Lazily enumerated antichain: ``rule(k)`` is the k-th vertex (k >= 0).

    ``depth_floor(k)`` must be strictly increasing and bound the level of the
    k-th vertex from below; this is validated on the first 64 terms.
    ``length`` makes the schema finite when given.
    """

    rule: Callable[[int], Vertex]
    depth_floor: Callable[[int], int]
    m: int
    length: int | None = None
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self.validate(64)

    def __hash__(self):
        return id(self)

    def __eq__(self, other):
        return self is other

    def __getitem__(self, k: int) -> Vertex:
        if self.length is not None and k >= self.length:
            raise IndexError(k)
        v = self._cache.get(k)
        if v is None:
            v = as_vertex(self.rule(k), self.m)
            if v.level() < self.depth_floor(k):
                raise SchemaViolation(f"vertex {k} at level {v.level()} is above its depth floor")
            self._cache[k] = v
        return v

    def count(self, limit: int | None = None) -> int:
        n = self.length if self.length is not None else limit
        return n if limit is None else min(n, limit)

    def validate(self, terms: int):
        n = self.count(terms)
        seen = []
        for k in range(n):
            if k and self.depth_floor(k) <= self.depth_floor(k - 1):
                raise SchemaViolation("depth_floor must be strictly increasing")
            v = self[k]
            for u in seen:
                if is_comparable(u, v):
                    raise SchemaViolation(f"schema vertices {u} and {v} are comparable")
            seen.append(v)

    def prefix_to_depth(self, depth: int) -> list:
        """All enumerated vertices whose depth floor is at most ``depth``."""
        out = []
        k = 0
        while (self.length is None or k < self.length) and self.depth_floor(k) <= depth:
            out.append(self[k])
            k += 1
        return out


def spine_schema(m: int = 2, turn: int = 0, run: int | None = None) -> AntichainSchema:
    """x_n = r^(n-1) t with r the run letter (default m-1) and t the turn letter."""
    run = m - 1 if run is None else run
    if run == turn:
        raise SchemaViolation("run and turn letters must differ")
    return AntichainSchema(lambda k: Vertex((run,) * k + (turn,), m), lambda k: k + 1, m)


@dataclass(frozen=True)
class WeightedAntichain:
    base: object  # Antichain or AntichainSchema
    weights: object = None  # mapping, callable, or None for all ones

    def weight(self, v: Vertex) -> Fraction:
        w = self.weights
        if w is None:
            return Fraction(1)
        val = w(v) if callable(w) else w[v] if v in w else w[str(v)]
        val = Fraction(val)
        if not 0 <= val <= 1:
            raise SchemaViolation(f"weight {val} at {v} outside [0,1]")
        return val

    @property
    def m(self) -> int:
        return self.base.m


def _as_weighted(V) -> WeightedAntichain:
    if isinstance(V, WeightedAntichain):
        return V
    return WeightedAntichain(V)


def mu(V, depth: int) -> tuple:
    """Interval [lo, hi] for the weighted measure, evaluated at ``depth``.

    lo sums the vertices of level <= depth.  For a finite antichain the
    remaining vertices are covered exactly by their level-``depth``
    ancestors; for a schema the uncovered part of level ``depth`` is used.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    V = _as_weighted(V)
    m = V.m
    base = V.base
    if isinstance(base, AntichainSchema):
        verts = base.prefix_to_depth(depth)
    else:
        verts = list(base)
    lo = Fraction(0)
    plain = Fraction(0)
    deeper = set()
    for v in verts:
        if v.level() <= depth:
            lo += V.weight(v) / m ** v.level()
            plain += Fraction(1, m ** v.level())
        else:
            deeper.add(v.letters[:depth])
    if isinstance(base, AntichainSchema) and base.length is None:
        hi = lo + (1 - plain)
    else:
        hi = lo + Fraction(len(deeper), m ** depth)
    return lo, min(hi, Fraction(1))


@dataclass(frozen=True)
class TargetAntichain:
    """Result of ``antichain_for_target``: a finite antichain and its interval."""

    antichain: Antichain
    lo: Fraction
    hi: Fraction
    exact: bool


def antichain_for_target(gamma, m: int, depth: int = 64) -> TargetAntichain:
    """Greedy base-m expansion of gamma, descending into the leftmost free subtree.

    At level i with digit d the first d children of the current node are
    taken and the walk continues in child d.
    """
    gamma = Fraction(gamma)
    if not 0 <= gamma <= 1:
        raise ValueError("gamma must lie in [0, 1]")
    if gamma == 1:
        root = Antichain((Vertex.root(m),), m)
        return TargetAntichain(root, Fraction(1), Fraction(1), True)
    verts = []
    prefix = ()
    rest = gamma
    total = Fraction(0)
    for i in range(1, depth + 1):
        rest *= m
        d = int(rest)  # floor, rest >= 0
        rest -= d
        for a in range(d):
            verts.append(Vertex(prefix + (a,), m))
        total += Fraction(d, m ** i)
        if rest == 0:
            return TargetAntichain(Antichain(tuple(verts), m), total, total, True)
        prefix = prefix + (d,)
    return TargetAntichain(Antichain(tuple(verts), m), total, total + Fraction(1, m ** depth), False)


def is_transversal(Y: Antichain, check_depth: int) -> bool:
    """Every level-``check_depth`` vertex has exactly one ancestor-or-self in Y."""
    if check_depth < Y.max_level():
        raise ValueError("check_depth is smaller than the deepest vertex of Y")
    m = Y.m
    counts = {}
    for y in Y:
        span = m ** (check_depth - y.level())
        start = y.rank() * span
        counts[start] = counts.get(start, 0) + span
    covered = 0
    cursor = 0
    for start in sorted(counts):
        if start < cursor:
            return False
        cursor = start + counts[start]
        covered += counts[start]
    return covered == m ** check_depth
