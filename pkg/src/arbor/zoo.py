"""Constructors for the explicit groups and elements used throughout the package."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import machine as mc
from .errors import (DepthBudgetExceeded, InvalidParams, NoMovingGenerator, OrbitTooShort,
                     SchemaViolation, TrivialInput)
from .machine import Expr
from .permquot import cycle_length, perm_power, orbits
from .tree import AntichainSchema, Vertex, level_vertices


GROUP_SCHEMA = {
    "type": "object",
    "required": ["name", "m", "generators"],
    "properties": {
        "name": {"type": "string"},
        "m": {"type": "integer", "minimum": 2},
        "machines": {"type": "object"},
        "generators": {
            "type": "array",
            "items": {"type": "array", "prefixItems": [{"type": "string"}, {"type": "string"}],
                      "minItems": 2, "maxItems": 2},
        },
        "metadata": {"type": "object"},
        "construct": {
            "type": "object",
            "required": ["name", "params"],
            "properties": {"name": {"type": "string"}, "params": {"type": "object"}},
        },
    },
}


def validate_group_json(doc):
    import jsonschema

    try:
        jsonschema.validate(doc, GROUP_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SchemaViolation(f"group JSON: {exc.message}") from None


@dataclass
class GroupSpec:
    """Named generating set.  ``metadata`` records claimed properties only."""

    name: str
    m: int
    generators: list  # list of (name, Expr)
    metadata: dict = field(default_factory=dict)
    machines: dict = field(default_factory=dict)
    construct: dict | None = None  # {"name": ..., "params": ...} for rebuilding

    def __post_init__(self):
        for nm, g in self.generators:
            if g.m != self.m:
                raise InvalidParams(f"generator {nm} has arity {g.m}, expected {self.m}")

    @property
    def gens(self) -> list:
        return [g for _, g in self.generators]

    def __getitem__(self, name) -> Expr:
        for nm, g in self.generators:
            if nm == name:
                return g
        raise KeyError(name)

    def to_json(self) -> str:
        doc = {
            "name": self.name,
            "m": self.m,
            "machines": {k: v.to_json() for k, v in sorted(self.machines.items())},
            "generators": [[nm, mc.to_sexpr(g)] for nm, g in self.generators],
            "metadata": self.metadata,
        }
        if self.construct is not None:
            doc["construct"] = self.construct
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    def to_sexpr(self) -> str:
        return "\n".join(f"{nm} {mc.to_sexpr(g)}" for nm, g in self.generators) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "GroupSpec":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"group JSON: {exc}") from None
        validate_group_json(doc)
        if "construct" in doc:
            spec = construct(doc["construct"]["name"], **doc["construct"]["params"])
            if spec.to_json() != text:
                raise SchemaViolation("rebuilt group does not match the stored description")
            return spec
        machines = {k: mc.MachineDef.from_json(v, k) for k, v in doc["machines"].items()}
        gens = [(nm, mc.parse_sexpr(s, machines, doc["m"])) for nm, s in doc["generators"]]
        return cls(doc["name"], doc["m"], gens, doc.get("metadata", {}), machines)


def _spec_from_machine(name, machine, order=None, metadata=None, construct_args=None):
    names = order or machine.state_names()
    gens = [(s, mc.gen(machine, s)) for s in names]
    return GroupSpec(name, machine.m, gens, metadata or {}, {machine.name: machine},
                     construct_args)


# ---------------------------------------------------------------- classical machines

GRIGORCHUK = mc.MachineDef.build("grig", 2, {
    "a": ((1, 0), (None, None)),
    "b": ((0, 1), ("a", "c")),
    "c": ((0, 1), ("a", "d")),
    "d": ((0, 1), (None, "b")),
})


def grigorchuk() -> GroupSpec:
    """a swaps the two subtrees; b = (a, c), c = (a, d), d = (1, b)."""
    return _spec_from_machine("grigorchuk", GRIGORCHUK, metadata={
        "self_similar": True, "level_transitive": True, "branch_over": "K"})


def grigorchuk_x() -> Expr:
    a, b = mc.gen(GRIGORCHUK, "a"), mc.gen(GRIGORCHUK, "b")
    return mc.product(a, b, a, b)


def grigorchuk_K() -> GroupSpec:
    """K = <x, (x,1), (1,x)> with x = [a, b] = abab."""
    x = grigorchuk_x()
    gens = [("x", x), ("x0", mc.graft(x, (0,))), ("x1", mc.graft(x, (1,)))]
    return GroupSpec("grigorchuk_K", 2, gens, {"normal_in": "grigorchuk", "branching": True},
                     {"grig": GRIGORCHUK})


BASILICA = mc.MachineDef.build("basilica", 2, {
    "a": ((0, 1), (None, "b")),
    "b": ((1, 0), (None, "a")),
})


def basilica() -> GroupSpec:
    return _spec_from_machine("basilica", BASILICA, metadata={"self_similar": True})


def adding_machine_def(m: int, hs: Sequence[Sequence[int]] | None = None, name=None):
    """States a_j with a_j = (a_j, 1, ..., 1) h_j; default h is the full m-cycle."""
    if hs is None:
        hs = [tuple((i + 1) % m for i in range(m))]
    states = {}
    for j, h in enumerate(hs, start=1):
        children = [f"a{j}"] + [None] * (m - 1)
        states[f"a{j}"] = (tuple(h), tuple(children))
    return mc.MachineDef.build(name or f"add{m}", m, states)


def adding_machine(m: int = 2) -> Expr:
    return mc.gen(adding_machine_def(m), "a1")


def adding_group(m: int = 2) -> GroupSpec:
    return _spec_from_machine(f"adding{m}", adding_machine_def(m), metadata={
        "self_similar": True, "level_transitive": True},
        construct_args={"name": "adding", "params": {"m": m}})


def truncations(n: int, j: int = 1, m: int = 2, hs=None) -> Expr:
    """a_{n,j}: the adding machine a_j cut off below level n."""
    return mc.truncate(mc.gen(adding_machine_def(m, hs), f"a{j}"), n)


def w_h_generators(hs: Sequence[Sequence[int]], n: int) -> list:
    """Finitary generators of W_H at level n: every H generator grafted at
    every vertex of level < n."""
    m = len(hs[0])
    out = []
    for k in range(n):
        for v in level_vertices(k, m):
            for h in hs:
                out.append(mc.graft(mc.rooted(h), v))
    return out


def perm_group_order(hs) -> int:
    """Order of the group generated by permutations of [0, m) (small m)."""
    from .permquot import bfs_elements

    m = len(hs[0])
    return bfs_elements([np.asarray(h) for h in hs], m, limit=10 ** 6)


# ---------------------------------------------------------------- generalized Šunić groups


@dataclass(frozen=True)
class SunicParams:
    xs: tuple  # generating permutations x_1..x_l of [0, m)
    r: int

    def __post_init__(self):
        xs = tuple(tuple(int(a) for a in x) for x in self.xs)
        object.__setattr__(self, "xs", xs)
        if not xs:
            raise InvalidParams("need at least one generator of H")
        m = len(xs[0])
        for x in xs:
            if len(x) != m or sorted(x) != list(range(m)):
                raise InvalidParams(f"{x} is not a permutation of [0,{m})")
        if self.r < 1:
            raise InvalidParams("spine length r must be >= 1")
        if len(orbits([np.asarray(x) for x in xs], m)) != 1:
            raise InvalidParams("H must act transitively on the letters")

    @property
    def m(self):
        return len(self.xs[0])

    @property
    def ell(self):
        return len(self.xs)

    @property
    def advisory(self) -> list:
        return [] if self.ell <= self.m - 1 else ["more than m-1 generators of H"]


def sunic_machine(p: SunicParams) -> mc.MachineDef:
    m, r = p.m, p.r
    states = {}
    for i, x in enumerate(p.xs, start=1):
        states[f"x{i}"] = (x, (None,) * m)
    ident = tuple(range(m))
    for i in range(1, p.ell + 1):
        for j in range(1, r + 1):
            children = [None] * m
            if j < r:
                children[m - 1] = f"b{i}_{j + 1}"
            else:
                children[i - 1] = f"x{i}"
                children[m - 1] = f"b{i}_1"
            states[f"b{i}_{j}"] = (ident, tuple(children))
    return mc.MachineDef.build("sunic", m, states)


def sunic_generalized(p: SunicParams) -> GroupSpec:
    """G_{H,r}: the rooted generators of H and the spinal states b_{i,j}."""
    mach = sunic_machine(p)
    return _spec_from_machine(
        f"sunic", mach,
        metadata={"self_similar": True, "level_transitive": True,
                  "H_order": perm_group_order(p.xs), "r": p.r},
        construct_args={"name": "sunic", "params": {"xs": [list(x) for x in p.xs], "r": p.r}})


def cyclic_perm(m: int) -> tuple:
    return tuple((i + 1) % m for i in range(m))


# ---------------------------------------------------------------- delta and Siegenthaler


def moving_index(hs) -> int:
    """Index (0-based) of the first H generator moving letter 0."""
    for j, h in enumerate(hs):
        if h[0] != 0:
            return j
    raise NoMovingGenerator("no generator of H moves the first letter")


def delta_vertices(n: int, hs) -> list:
    """Orbit vertices (0^n) a_{n,r}^(t^i) for i < n, with h_r the moving generator."""
    m = len(hs[0])
    j = moving_index(hs)
    t = cycle_length(np.asarray(hs[j]), 0)
    a = mc.gen(adding_machine_def(m, hs, "addH"), f"a{j + 1}")
    p = mc.level_perm(a, n)  # a and a_{n,j} agree on level n
    start = 0  # rank of 0^n
    verts = []
    for i in range(n):
        idx = int(perm_power(np.asarray(p), t ** i)[start])
        verts.append(Vertex.from_rank(idx, n, m).letters)
    if len(set(verts)) != n:
        raise SchemaViolation("delta grafting vertices collide")
    return verts


def delta(gs: Sequence[Expr], hs) -> Expr:
    """Product of g_{i+1} grafted at (0^n) a_{n,r}^(t^i), i < n."""
    gs = list(gs)
    verts = delta_vertices(len(gs), hs)
    return mc.finite_graft_product(zip(gs, verts), len(hs[0]))


def sunic_family(hs) -> Callable[[int], GroupSpec]:
    return lambda r: sunic_generalized(SunicParams(tuple(hs), r))


def siegenthaler_K(hs, family: Callable[[int], GroupSpec] | None = None,
                   depth_budget: int = 32) -> GroupSpec:
    """K_1 = <a_{D_1, j}, b_1> where b_r = delta(gens of G_r, a_{D_{r+1}, 1..l}, b_{r+1})
    and D_r = d(G_r) + l + 1.  b_1 is an infinite graft product unfolded on demand."""
    hs = [tuple(h) for h in hs]
    m = len(hs[0])
    ell = len(hs)
    family = family or sunic_family(hs)
    moving_index(hs)
    amach = adding_machine_def(m, hs, "addH")
    specs: dict = {}

    def G(r):
        if r not in specs:
            specs[r] = family(r)
        return specs[r]

    def D(r):
        return len(G(r).gens) + ell + 1

    def source():
        prefix = ()
        r = 1
        while True:
            if r > depth_budget:
                raise DepthBudgetExceeded(f"b_1 needs more than {depth_budget} recursion layers")
            n = D(r)
            args = list(G(r).gens) + [mc.truncate(mc.gen(amach, f"a{j}"), D(r + 1))
                                      for j in range(1, ell + 1)]
            verts = delta_vertices(n, hs)
            for arg, v in zip(args, verts):
                yield arg, prefix + v
            prefix = prefix + verts[-1]
            r += 1

    b1 = mc.inf_graft_product(mc.FactorSchema(source, m, name=f"siegenthaler_b1_m{m}"))
    gens = [(f"a{j}", mc.truncate(mc.gen(amach, f"a{j}"), D(1))) for j in range(1, ell + 1)]
    gens.append(("b1", b1))
    return GroupSpec("siegenthaler", m, gens,
                     {"depth_budget": depth_budget, "D1": D(1)}, {"addH": amach},
                     {"name": "siegenthaler", "params": {"hs": [list(h) for h in hs],
                                                         "depth_budget": depth_budget}})


# ---------------------------------------------------------------- infinite-order witness


class Witness:
    """Adaptive construction g = h * prod_i (h*u_i)^(eps_i) along a path.

    ``u_i = v_1 ... v_i`` and the orbit of u_i under g has length
    t_1 ... t_i.  Stages are computed on demand.
    """

    def __init__(self, h: Expr, probe_depth: int = 6, max_level: int = 40):
        self.h = h
        self.m = h.m
        self.max_level = max_level
        first = None
        for k in range(1, max_level + 1):
            if not mc.is_trivial_to(h, k):
                first = k
                break
        if first is None:
            raise TrivialInput("seed acts trivially on the probed levels")
        self.depth = max(probe_depth, first)
        self.steps: list = []  # (v_i letters, t_i, eps_i)
        self._exprs = [h]
        self._current = h  # g_{i}
        self._limit = None

    # numeric helpers -------------------------------------------------
    def _section_perm(self, g: Expr, T: int, u: tuple, depth: int):
        """Level-``depth`` permutation of (g^T)|_u; g^T must fix u."""
        L = len(u) + depth
        P = perm_power(np.asarray(mc.level_perm(g, L)), T)
        M = self.m ** depth
        base = Vertex(u, self.m).rank() * M
        block = P[base:base + M]
        if block.min() < base or block.max() >= base + M:
            raise ValueError("power does not fix the vertex")
        return block - base

    def _first_moved(self, perm, depth):
        """Smallest level j and leftmost vertex of level j moved by the element."""
        m = self.m
        for j in range(1, depth + 1):
            M = m ** (depth - j)
            q = perm[np.arange(m ** j) * M] // M
            moved = np.nonzero(q != np.arange(m ** j))[0]
            if len(moved):
                idx = int(moved[0])
                return Vertex.from_rank(idx, j, m).letters, cycle_length(q, idx)
        return None

    def orbit_product(self, i: int) -> int:
        T = 1
        for _, t, _ in self.steps[:i]:
            T *= t
        return T

    def path(self, i: int) -> tuple:
        out = ()
        for v, _, _ in self.steps[:i]:
            out = out + v
        return out

    def extend(self, stages: int):
        while len(self.steps) < stages:
            i = len(self.steps)
            g = self._current
            u = self.path(i)
            T = self.orbit_product(i)
            s = self._section_perm(g, T, u, self.depth)
            found = self._first_moved(s, self.depth)
            if found is None:
                raise TrivialInput("section became trivial within the probe depth")
            v, t = found
            u2 = u + v
            if len(u2) > self.max_level:
                raise DepthBudgetExceeded("witness path exceeds the maximal level")
            T2 = T * t
            s2 = self._section_perm(g, T2, u2, self.depth)
            eps = 1 if np.array_equal(s2, np.arange(len(s2))) else 0
            if eps:
                g = mc.product(g, mc.graft(self.h, u2))
            self.steps.append((v, t, eps))
            self._exprs.append(g)
            self._current = g
        return self

    def stage_expr(self, k: int) -> Expr:
        self.extend(k)
        return self._exprs[k]

    def orbit_lengths(self, k: int) -> list:
        self.extend(k)
        return [t for _, t, _ in self.steps[:k]]

    def certifying_level(self, k: int) -> int:
        self.extend(k)
        return len(self.path(k))

    def expr(self) -> Expr:
        """The infinite product as a limit of stage expressions."""
        if self._limit is None:
            def resolve(L):
                k = 0
                while True:
                    self.extend(k + 1)
                    if len(self.path(k + 1)) >= L:
                        return self._exprs[k]
                    k += 1

            self._limit = mc.limit(mc.LimitDef(resolve, self.m, f"witness{id(self)}"))
        return self._limit

    def coarse_path(self, count: int, min_t: int) -> list:
        """Group consecutive stages into blocks whose orbit factor is >= min_t.
        Returns [(v_block, t_block)] of length ``count``."""
        out = []
        i = 0
        while len(out) < count:
            v, t = (), 1
            while t < min_t:
                self.extend(i + 1)
                sv, st, _ = self.steps[i]
                v, t = v + sv, t * st
                i += 1
            out.append((v, t))
        return out


def infinite_order_witness(K: GroupSpec, stages: int, seed: int = 0, probe_depth: int = 6):
    """Run ``stages`` rounds of the construction from the seed generator of K.

    Returns (expression, Witness)."""
    h = K.gens[seed]
    w = Witness(h, probe_depth)
    return w.stage_expr(stages), w


# ---------------------------------------------------------------- L_X


def lx_block(witness: Witness, n: int, r: int, coarsen: bool = False) -> tuple:
    """(u_n, T_(n-1), t_n) for n >= 1 with u_n = v_1 ... v_n along the witness path.

    With ``coarsen`` consecutive stages are merged until each orbit factor is
    at least r; otherwise a factor below r raises OrbitTooShort."""
    if coarsen:
        blocks = witness.coarse_path(n, r)
    else:
        lengths = witness.orbit_lengths(n)
        for i, t in enumerate(lengths, start=1):
            if t < r:
                raise OrbitTooShort(f"t_{i} = {t} < r = {r}")
        blocks = [(witness.steps[i][0], witness.steps[i][1]) for i in range(n)]
    u = ()
    T = 1
    for v, t in blocks[:-1]:
        u, T = u + v, T * t
    return u + blocks[-1][0], T, blocks[-1][1]


def lx_orbit_vertex(witness: Witness, n: int, j: int, r: int, coarsen: bool = False) -> tuple:
    """v_(n,j) = (u_n) g^(T_(n-1) (j-1))."""
    u, T, _ = lx_block(witness, n, r, coarsen)
    m = witness.m
    p = np.asarray(mc.level_perm(witness.expr(), len(u)))
    idx = int(perm_power(p, T * (j - 1))[Vertex(u, m).rank()])
    return Vertex.from_rank(idx, len(u), m).letters


def l_x_generators(K: GroupSpec, X: AntichainSchema, W_level: int, witness: Witness,
                   coarsen: bool = False) -> GroupSpec:
    """Generators a_w, b_{j,w}, c_{j,w}, a_j of L_X as infinite graft products."""
    ks = K.gens
    r = len(ks)
    m = K.m
    if X.m != m:
        raise InvalidParams("schema arity differs from K")
    W = [v.letters for v in level_vertices(W_level, m)]
    g = witness.expr()

    def block(n):
        return lx_block(witness, n, r, coarsen)

    def v_nj(n, j):
        return lx_orbit_vertex(witness, n, j, r, coarsen)

    def x(n):
        return X[n - 1].letters

    def schema(name, factor):
        def source():
            n = 1
            while X.length is None or n <= X.length:
                yield factor(n)
                n += 1
        return mc.inf_graft_product(mc.FactorSchema(source, m, name=f"lx:{name}"))

    gens = []
    for w in W:
        ws = str(Vertex(w, m))
        gens.append((f"a_{ws}", schema(f"a_{ws}", lambda n, w=w: (g, x(n) + w))))
    for w in W:
        ws = str(Vertex(w, m))
        for j in range(1, r + 1):
            def bfac(n, w=w, j=j):
                u, T, _ = block(n)
                c = mc.section(mc.power(g, T * (r - j)), v_nj(n, j))
                return mc.conj(ks[j - 1], mc.inverse(c)), x(n) + w + v_nj(n, j)
            gens.append((f"b{j}_{ws}", schema(f"b{j}_{ws}", bfac)))
    for w in W:
        ws = str(Vertex(w, m))
        for j in range(1, r + 1):
            gens.append((f"c{j}_{ws}", schema(
                f"c{j}_{ws}", lambda n, w=w, j=j: (ks[j - 1], x(n) + w + v_nj(n, r)))))
    for j in range(1, r + 1):
        gens.append((f"a{j}", schema(f"a{j}", lambda n, j=j: (ks[j - 1], x(n)))))
    return GroupSpec("lx", m, gens, {"K": K.name, "W_level": W_level, "r": r,
                                     "coarsened": coarsen})


def lx_support_vertices(X: AntichainSchema, n: int) -> list:
    return X.prefix_to_depth(n)


# ---------------------------------------------------------------- W_p two-generated pair


def wp_two_generated(p: int, X: AntichainSchema, seed: GroupSpec | None = None) -> GroupSpec:
    """g = prod a_n * x_n and h = (prod k1 * x_n 0^n)(prod k2 * x_n (0^n)a_n^(p^(n-1)))."""
    if p < 2 or any(p % d == 0 for d in range(2, int(p ** 0.5) + 1)):
        raise InvalidParams("p must be prime")
    if X.m != p:
        raise InvalidParams("schema arity must equal p")
    cyc = cyclic_perm(p)
    if seed is None:
        seed = siegenthaler_K([cyc])
    if len(seed.gens) != 2:
        raise InvalidParams("the seed must have exactly two generators")
    k1, k2 = seed.gens
    add = adding_machine(p)

    def a_n(n):
        return mc.truncate(add, n)

    def far(n):
        q = np.asarray(mc.level_perm(add, n))
        idx = int(perm_power(q, p ** (n - 1))[0])
        return Vertex.from_rank(idx, n, p).letters

    def make(name, factor):
        def source():
            n = 1
            while X.length is None or n <= X.length:
                yield factor(n)
                n += 1
        return mc.inf_graft_product(mc.FactorSchema(source, p, name=f"wp2:{name}"))

    g = make("g", lambda n: (a_n(n), X[n - 1].letters))
    h1 = make("h1", lambda n: (k1, X[n - 1].letters + (0,) * n))
    h2 = make("h2", lambda n: (k2, X[n - 1].letters + far(n)))
    return GroupSpec("wp2", p, [("g", g), ("h", mc.product(h1, h2))], {"p": p})


# ---------------------------------------------------------------- registry


def spine(m: int = 2) -> AntichainSchema:
    """x_n = (m-1)^(n-1) 0, measure 1."""
    from .tree import spine_schema

    return spine_schema(m)


def construct(name: str, **params) -> GroupSpec:
    """Build a group by its stable name (used by the CLI and JSON round-trips)."""
    if name == "grigorchuk":
        return grigorchuk()
    if name == "grigorchuk_K":
        return grigorchuk_K()
    if name == "basilica":
        return basilica()
    if name == "adding":
        return adding_group(int(params.get("m", 2)))
    if name == "sunic":
        xs = params.get("xs") or [cyclic_perm(int(params.get("m", 2)))]
        return sunic_generalized(SunicParams(tuple(tuple(x) for x in xs), int(params.get("r", 1))))
    if name == "siegenthaler":
        hs = params.get("hs") or [cyclic_perm(int(params.get("m", 2)))]
        return siegenthaler_K(hs, depth_budget=int(params.get("depth_budget", 32)))
    if name == "wp2":
        p = int(params.get("p", 2))
        spec = wp_two_generated(p, spine(p))
        spec.construct = {"name": "wp2", "params": {"p": p}}
        return spec
    if name == "lx":
        if params.get("K") == "grigorchuk_K":
            K = grigorchuk_K()
        elif params.get("K", "siegenthaler") == "siegenthaler":
            hs = params.get("hs") or [cyclic_perm(int(params.get("m", 2)))]
            K = siegenthaler_K(hs)
        else:
            raise InvalidParams("lx seed K must be 'siegenthaler' or 'grigorchuk_K'")
        m = K.m
        spec = l_x_generators(K, spine(m), int(params.get("W_level", 1)), Witness(K.gens[0]),
                              coarsen=bool(params.get("coarsen", False)))
        spec.construct = {"name": "lx", "params": dict(params)}
        return spec
    raise InvalidParams(f"unknown group {name!r}")


NAMES = ("grigorchuk", "basilica", "adding", "sunic", "lx", "siegenthaler", "wp2")
