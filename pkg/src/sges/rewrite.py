"""Rewrite rules over e-graphs: compilation, matching, and application.

A rule is written as a pair of surface patterns.  Compilation type-checks
both sides together, records where each pattern variable sits relative to
the binders around it, and turns the difference in binder depth between the
two sides into explicit shift obligations.  Matching walks the e-graph
top-down with full backtracking; application instantiates the right-hand
side either by extracting terms (the default) or by adding explicit
substitution/shift nodes for the propagation rules to resolve.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Optional

from . import nat, parser, terms, types
from .egraph import EGraph, ENode, term_size_cost
from .infer import Inferencer, TypeInferenceError, Unifier
from .nat import Nat
from .terms import App, Lam, Lit, NatApp, NatLam, Prim, Term, Var
from .types import Data, Type


class RuleError(TypeError):
    """A rule whose sides cannot be reconciled at compile time."""


def _is_flex(name: str) -> bool:
    return name.startswith("?")


# ---------------------------------------------------------------------------
# Type walks.  types.subst_type only rewrites data and size variables, so the
# compiler carries its own substitution that also renames type variables.

def _ground_nat(n: Nat, nmap: dict[str, Nat]) -> Nat:
    return nat.subst(n, nmap) if nmap else n


def _ground_data(d: Data, tmap: dict[str, Type], dmap: dict[str, Data],
                 nmap: dict[str, Nat]) -> Data:
    if d.kind == "dvar":
        return dmap.get(d.name, d)
    if d.kind == "array":
        return types.array(_ground_nat(d.size, nmap),
                           _ground_data(d.elem, tmap, dmap, nmap))
    if d.kind == "vector":
        return types.vector(_ground_nat(d.size, nmap),
                            _ground_data(d.elem, tmap, dmap, nmap))
    if d.kind == "pair":
        return types.pair(_ground_data(d.fst, tmap, dmap, nmap),
                          _ground_data(d.snd, tmap, dmap, nmap))
    if d.kind == "index":
        return types.index(_ground_nat(d.size, nmap))
    return d


def _ground_type(t: Type, tmap: dict[str, Type], dmap: dict[str, Data],
                 nmap: dict[str, Nat]) -> Type:
    if t.kind == "tvar":
        return tmap.get(t.name, t)
    if t.kind == "data":
        return types.data(_ground_data(t.data, tmap, dmap, nmap))
    if t.kind == "fun":
        return types.fun(_ground_type(t.arg, tmap, dmap, nmap),
                         _ground_type(t.res, tmap, dmap, nmap))
    if t.kind == "natfun":
        return types.natfun(_ground_type(t.body, tmap, dmap, nmap))
    return t


def _ground_term(t: Term, tmap: dict[str, Type], dmap: dict[str, Data],
                 nmap: dict[str, Nat]) -> Term:
    ty = _ground_type(t.ty, tmap, dmap, nmap)
    if isinstance(t, Var):
        return Var(ty, t.idx)
    if isinstance(t, Lam):
        return Lam(ty, _ground_term(t.body, tmap, dmap, nmap))
    if isinstance(t, App):
        return App(ty, _ground_term(t.fn, tmap, dmap, nmap),
                   _ground_term(t.arg, tmap, dmap, nmap))
    if isinstance(t, NatLam):
        return NatLam(ty, _ground_term(t.body, tmap, dmap, nmap))
    if isinstance(t, NatApp):
        return NatApp(ty, _ground_term(t.fn, tmap, dmap, nmap),
                      _ground_nat(t.nat, nmap))
    if isinstance(t, Prim):
        return Prim(ty, t.name)
    return Lit(ty, t.value)


def _collect_nat(n: Nat, ns: dict[str, None]) -> None:
    for name in sorted(nat.free_vars(n)):
        if _is_flex(name):
            ns.setdefault(name)


def _collect_data(d: Data, ts: dict, ds: dict, ns: dict) -> None:
    if d.kind == "dvar":
        if _is_flex(d.name):
            ds.setdefault(d.name)
    elif d.kind in ("array", "vector"):
        _collect_nat(d.size, ns)
        _collect_data(d.elem, ts, ds, ns)
    elif d.kind == "pair":
        _collect_data(d.fst, ts, ds, ns)
        _collect_data(d.snd, ts, ds, ns)
    elif d.kind == "index":
        _collect_nat(d.size, ns)


def _collect_type(t: Type, ts: dict, ds: dict, ns: dict) -> None:
    if t.kind == "tvar":
        if _is_flex(t.name):
            ts.setdefault(t.name)
    elif t.kind == "data":
        _collect_data(t.data, ts, ds, ns)
    elif t.kind == "fun":
        _collect_type(t.arg, ts, ds, ns)
        _collect_type(t.res, ts, ds, ns)
    elif t.kind == "natfun":
        _collect_type(t.body, ts, ds, ns)


def _collect_term(t: Term, ts: dict, ds: dict, ns: dict) -> None:
    _collect_type(t.ty, ts, ds, ns)
    if isinstance(t, NatApp):
        _collect_nat(t.nat, ns)
    for c in terms.children(t):
        _collect_term(c, ts, ds, ns)


# ---------------------------------------------------------------------------
# Compiled patterns.  Holes are Prim leaves whose name starts with "?".

def _is_hole(t: Term) -> bool:
    return isinstance(t, Prim) and _is_flex(t.name)


def _subst_spine(t: Term) -> Optional[tuple[Term, Term]]:
    # subst(b, e) parses as ((subst b) e); b is open at index 0
    if (isinstance(t, App) and isinstance(t.fn, App)
            and isinstance(t.fn.fn, Prim) and t.fn.fn.name == "subst"):
        return t.fn.arg, t.arg
    return None


@dataclass(frozen=True)
class Pat:
    kind: str                       # hole var lam app natlam natapp prim lit
    ty: Type
    children: tuple["Pat", ...]
    name: str = ""
    idx: int = -1
    pnat: Optional[Nat] = None
    value: float = 0.0
    # binding fingerprint: which variables a failed match here depends on
    vars: tuple[tuple[str, str], ...] = ()


def _pat_vars(t: Term) -> tuple[tuple[str, str], ...]:
    ts: dict[str, None] = {}
    ds: dict[str, None] = {}
    ns: dict[str, None] = {}
    _collect_term(t, ts, ds, ns)
    out = [("T", v) for v in ts] + [("D", v) for v in ds] + [("N", v) for v in ns]
    for u in terms.subterms(t):
        if _is_hole(u):
            out.append(("B", u.name))
    return tuple(sorted(set(out)))


def _compile_pat(t: Term) -> Pat:
    vs = _pat_vars(t)
    if _is_hole(t):
        return Pat("hole", t.ty, (), name=t.name, vars=vs)
    if isinstance(t, Var):
        return Pat("var", t.ty, (), idx=t.idx, vars=vs)
    if isinstance(t, Lam):
        return Pat("lam", t.ty, (_compile_pat(t.body),), vars=vs)
    if isinstance(t, App):
        return Pat("app", t.ty, (_compile_pat(t.fn), _compile_pat(t.arg)), vars=vs)
    if isinstance(t, NatLam):
        return Pat("natlam", t.ty, (_compile_pat(t.body),), vars=vs)
    if isinstance(t, NatApp):
        return Pat("natapp", t.ty, (_compile_pat(t.fn),), pnat=t.nat, vars=vs)
    if isinstance(t, Prim):
        return Pat("prim", t.ty, (), name=t.name, vars=vs)
    return Pat("lit", t.ty, (), value=t.value, vars=vs)


# ---------------------------------------------------------------------------
# Compiled rules.

@dataclass
class CompiledRule:
    name: str
    lhs: Optional[Term]
    rhs: Optional[Term]
    # freshness conditions: (hole, index) passes when index is provably
    # not free in whatever the hole binds
    conds: tuple[tuple[str, int], ...]
    depths: dict[str, int]                  # binder depth of each hole in lhs
    binders: dict[str, tuple[Type, ...]]    # innermost-first binder types
    flex_t: tuple[str, ...]
    flex_d: tuple[str, ...]
    flex_n: tuple[str, ...]
    pat: Optional[Pat]
    # right-hand-side size expressions that could go fractional once the
    # match grounds them, e.g. the n/32 a fixed-width split computes
    chk_nats: tuple[Nat, ...] = ()
    # programmatic extension points; template rules leave these unset
    searcher: Optional[Callable[[EGraph, "CompiledRule"], list["Match"]]] = None
    applier: Optional[Callable[[EGraph, "CompiledRule", "Match"], bool]] = None
    term_applier: Optional[Callable[[Term], Optional[Term]]] = None

    def __repr__(self) -> str:
        return f"<rule {self.name}>"


@dataclass
class Match:
    rule: CompiledRule
    root: int
    bound: dict[str, int]                   # hole -> e-class
    tmap: dict[str, Type]
    dmap: dict[str, Data]
    nmap: dict[str, Nat]
    node: Optional[ENode] = None            # searcher-provided matches only


_SUBST_SCHEME = types.fun(types.tvar("?substb"),
                          types.fun(types.tvar("?subste"), types.tvar("?substb")))


def _infer_side(src, env: Optional[dict[str, Type]], holes: Optional[dict[str, Type]],
                uni: Optional[Unifier] = None) -> tuple[Term, Inferencer]:
    named = parser.parse_term(src, patterns=True) if isinstance(src, str) else src
    inf = Inferencer(env=env, uni=uni or Unifier(), pattern_mode=True)
    if holes:
        inf.hole_types.update(holes)
    t = inf.infer(named, [])
    return inf.zonk(t, strict=False), inf


def _canonical_names(t: Term) -> tuple[dict[str, Type], dict[str, Data], dict[str, Nat]]:
    ts: dict[str, None] = {}
    ds: dict[str, None] = {}
    ns: dict[str, None] = {}
    _collect_term(t, ts, ds, ns)
    tmap = {v: types.tvar(f"?t{i}") for i, v in enumerate(ts)}
    dmap = {v: types.dvar(f"?dt{i}") for i, v in enumerate(ds)}
    nmap = {v: nat.var(f"?n{i}") for i, v in enumerate(ns)}
    return tmap, dmap, nmap


def _skolem_maps(t: Term):
    """Rename every flexible variable ?x to the rigid name !x and back."""
    ts: dict[str, None] = {}
    ds: dict[str, None] = {}
    ns: dict[str, None] = {}
    _collect_term(t, ts, ds, ns)
    sk = ({v: types.tvar("!" + v[1:]) for v in ts},
          {v: types.dvar("!" + v[1:]) for v in ds},
          {v: nat.var("!" + v[1:]) for v in ns})
    unsk = ({"!" + v[1:]: types.tvar(v) for v in ts},
            {"!" + v[1:]: types.dvar(v) for v in ds},
            {"!" + v[1:]: nat.var(v) for v in ns})
    return sk, unsk


def _hole_depths(t: Term, depth: int = 0, stack: tuple[Type, ...] = ()
                 ) -> Iterator[tuple[str, int, tuple[Type, ...]]]:
    if _is_hole(t):
        yield t.name, depth, stack
        return
    if isinstance(t, Lam):
        yield from _hole_depths(t.body, depth + 1, (t.ty.arg,) + stack)
        return
    for c in terms.children(t):
        yield from _hole_depths(c, depth, stack)


def _rhs_occurrences(t: Term, depth: int = 0) -> Iterator[tuple[str, int]]:
    """Hole occurrences in a right-hand side with their binder depths.

    The body of a subst form counts one binder deeper: its index 0 refers
    to the variable being substituted away.
    """
    sp = _subst_spine(t)
    if sp is not None:
        body, arg = sp
        yield from _rhs_occurrences(body, depth + 1)
        yield from _rhs_occurrences(arg, depth)
        return
    if _is_hole(t):
        yield t.name, depth
        return
    if isinstance(t, Lam):
        yield from _rhs_occurrences(t.body, depth + 1)
        return
    for c in terms.children(t):
        yield from _rhs_occurrences(c, depth)


def compile_rule(name: str, lhs, rhs=None, conds: tuple = (),
                 env: Optional[dict[str, Type]] = None) -> CompiledRule:
    """Type-check a rule and pin down its shift and freshness obligations.

    Raises RuleError when the sides cannot be given the same type, when the
    right-hand side's type is underdetermined by the left (an unannotated
    eta-abstraction, say), or when a condition names an unknown hole.
    """
    lhs_t, _ = _infer_side(lhs, env, None)
    can_t, can_d, can_n = _canonical_names(lhs_t)
    lhs_t = _ground_term(lhs_t, can_t, can_d, can_n)

    depths: dict[str, int] = {}
    binders: dict[str, tuple[Type, ...]] = {}
    hole_ty: dict[str, Type] = {}
    for hname, d, stack in _hole_depths(lhs_t):
        if hname in depths and depths[hname] != d:
            raise RuleError(f"{name}: hole {hname} sits at unequal binder depths")
        depths[hname] = d
        binders[hname] = stack
    for u in terms.subterms(lhs_t):
        if _is_hole(u):
            hole_ty[u.name] = u.ty

    rhs_t: Optional[Term] = None
    if rhs is not None:
        sk, unsk = _skolem_maps(lhs_t)
        sk_holes = {h: _ground_type(ty, *sk) for h, ty in hole_ty.items()}
        uni = Unifier()
        # a right-hand-side ?var that the left side also names denotes the
        # match's binding, not a fresh unknown: pre-bind it to the skolem.
        # Inference-invented names carry a # and stay out of reach
        for orig, canon_t in can_t.items():
            if "#" not in orig:
                uni.tvars[orig] = sk[0][canon_t.name]
        for orig, canon_d in can_d.items():
            if "#" not in orig:
                uni.dvars[orig] = sk[1][canon_d.name]
        for orig, canon_n in can_n.items():
            if "#" not in orig:
                uni.nvars[orig] = _ground_nat(canon_n, sk[2])
        rhs_env = dict(env or {})
        rhs_env["subst"] = _SUBST_SCHEME
        try:
            raw, inf = _infer_side(rhs, rhs_env, sk_holes, uni)
            uni.unify(raw.ty, _ground_type(lhs_t.ty, *sk))
            rhs_t = inf.zonk(raw, strict=False)
        except TypeInferenceError as e:
            raise RuleError(f"{name}: {e}") from e
        for hname, _ in _rhs_occurrences(rhs_t):
            if hname not in depths:
                raise RuleError(f"{name}: hole {hname} is new on the right")
        leftover: dict[str, None] = {}
        _collect_term(rhs_t, leftover, leftover, leftover)
        if leftover:
            raise RuleError(
                f"{name}: right-hand side type is underdetermined "
                f"({', '.join(leftover)}); annotate the left-hand side")
        rhs_t = _ground_term(rhs_t, *unsk)

    all_conds: set[tuple[str, int]] = set()
    for v, i in conds:
        if v not in depths:
            raise RuleError(f"{name}: condition names unknown hole {v}")
        all_conds.add((v, i))
    if rhs_t is not None:
        for hname, d in _rhs_occurrences(rhs_t):
            delta = d - depths[hname]
            for i in range(depths[hname] + delta, depths[hname]):
                # moving under fewer binders: the dropped indices must be unused
                all_conds.add((hname, i))

    flex_t: dict[str, None] = {}
    flex_d: dict[str, None] = {}
    flex_n: dict[str, None] = {}
    _collect_term(lhs_t, flex_t, flex_d, flex_n)
    if rhs_t is not None:
        _collect_term(rhs_t, flex_t, flex_d, flex_n)

    chk = _fractional_nats(rhs_t) if rhs_t is not None else ()
    return CompiledRule(
        name=name, lhs=lhs_t, rhs=rhs_t, conds=tuple(sorted(all_conds)),
        depths=depths, binders=binders,
        flex_t=tuple(flex_t), flex_d=tuple(flex_d), flex_n=tuple(flex_n),
        pat=_compile_pat(lhs_t), chk_nats=chk)


# ---------------------------------------------------------------------------
# E-matching.

class _MState:
    def __init__(self, g: EGraph):
        self.g = g
        self.uni = Unifier()
        self.bound: dict[str, int] = {}
        self.failed: set[tuple] = set()

    def fingerprint(self, p: Pat) -> tuple:
        out = []
        for kind, v in p.vars:
            if kind == "B":
                out.append(self.bound.get(v, -1))
            elif kind == "T":
                out.append(id(self.uni.deep_type(types.tvar(v))))
            elif kind == "D":
                out.append(id(self.uni.deep_data(types.dvar(v))))
            else:
                out.append(self.uni.resolve_nat(nat.var(v)).nid)
        return tuple(out)


def _match(st: _MState, p: Pat, c: int) -> Iterator[None]:
    g = st.g
    c = g.find(c)
    key = (id(p), c, st.fingerprint(p))
    if key in st.failed:
        return
    produced = False
    uni = st.uni

    if p.kind == "hole":
        prior = st.bound.get(p.name)
        if prior is not None:
            if g.find(prior) == c:
                yield None
            else:
                st.failed.add(key)
            return
        mk = uni.mark()
        try:
            uni.unify(p.ty, g.class_type(c))
        except TypeInferenceError:
            uni.undo(mk)
            st.failed.add(key)
            return
        st.bound[p.name] = c
        yield None
        del st.bound[p.name]
        uni.undo(mk)
        return

    mk0 = uni.mark()
    try:
        uni.unify(p.ty, g.class_type(c))
    except TypeInferenceError:
        uni.undo(mk0)
        st.failed.add(key)
        return
    for n in g.nodes_of(c):
        if n.sym != p.kind:
            continue
        mk = uni.mark()
        ok = True
        if p.kind == "var":
            ok = n.meta[0] == p.idx
        elif p.kind == "prim":
            ok = n.meta[0] == p.name
        elif p.kind == "lit":
            ok = n.meta == p.value
        elif p.kind == "natapp":
            try:
                uni.unify_nat(p.pnat, n.meta)
            except TypeInferenceError:
                ok = False
        if ok:
            if p.children:
                for _ in _match_seq(st, p.children, n.children):
                    produced = True
                    yield None
            else:
                produced = True
                yield None
        uni.undo(mk)
    uni.undo(mk0)
    if not produced:
        st.failed.add(key)


def _match_seq(st: _MState, ps: tuple[Pat, ...], cs: tuple[int, ...]
               ) -> Iterator[None]:
    if not ps:
        yield None
        return
    for _ in _match(st, ps[0], cs[0]):
        yield from _match_seq(st, ps[1:], cs[1:])


def _has_flex_type(t: Type) -> bool:
    ts: dict[str, None] = {}
    _collect_type(t, ts, ts, ts)
    return bool(ts)


def _integral_nat(n: Nat) -> bool:
    # A bare fractional constant (5/32) can never be an array size.  Symbolic
    # fractions like m/32 stay admissible; goal sizes are declared divisible.
    return all(factors or coeff.denominator == 1 for coeff, factors in n.sop)


def _type_nats(t: Type) -> Iterator[Nat]:
    if t.kind == "data":
        yield from types.data_nats(t.data)
    elif t.kind == "fun":
        yield from _type_nats(t.arg)
        yield from _type_nats(t.res)
    elif t.kind == "natfun":
        yield from _type_nats(t.body)


def _fractional_nats(t: Term) -> tuple[Nat, ...]:
    """Size expressions in t that a grounding could turn fractional."""
    seen: dict[int, Nat] = {}
    for u in terms.subterms(t):
        nats = list(_type_nats(u.ty))
        if isinstance(u, NatApp):
            nats.append(u.nat)
        for n in nats:
            if n.nid in seen:
                continue
            if any(f and c.denominator != 1 for c, f in n.sop):
                seen[n.nid] = n
    return tuple(seen.values())


def _materialize(rule: CompiledRule, st: _MState, root: int) -> Optional[Match]:
    uni = st.uni
    tmap: dict[str, Type] = {}
    dmap: dict[str, Data] = {}
    nmap: dict[str, Nat] = {}
    for v in rule.flex_t:
        r = uni.deep_type(types.tvar(v))
        if _has_flex_type(r):
            return None
        tmap[v] = r
    for v in rule.flex_d:
        r = uni.deep_data(types.dvar(v))
        ts: dict[str, None] = {}
        _collect_data(r, ts, ts, ts)
        if ts:
            return None
        dmap[v] = r
    for v in rule.flex_n:
        r = uni.resolve_nat(nat.var(v))
        if any(_is_flex(x) for x in nat.free_vars(r)):
            return None
        nmap[v] = r
    for ty in tmap.values():
        if not all(_integral_nat(n) for n in _type_nats(ty)):
            return None
    for d in dmap.values():
        if not all(_integral_nat(n) for n in types.data_nats(d)):
            return None
    if not all(_integral_nat(n) for n in nmap.values()):
        return None
    for n in rule.chk_nats:
        if not _integral_nat(nat.subst(n, nmap)):
            return None
    bound = {h: st.g.find(c) for h, c in st.bound.items()}
    return Match(rule, st.g.find(root), bound, tmap, dmap, nmap)


def ematch(g: EGraph, rule: CompiledRule) -> list[Match]:
    """All matches of the rule's left-hand side, each reported exactly once."""
    if rule.searcher is not None:
        return rule.searcher(g, rule)
    st = _MState(g)
    out: list[Match] = []
    seen: set[tuple] = set()
    for c in g.classes():
        for _ in _match(st, rule.pat, c):
            m = _materialize(rule, st, c)
            if m is None:
                continue
            key = (m.root, tuple(sorted(m.bound.items())),
                   tuple(sorted((v, id(x)) for v, x in m.tmap.items())),
                   tuple(sorted((v, id(x)) for v, x in m.dmap.items())),
                   tuple(sorted((v, x.nid) for v, x in m.nmap.items())))
            if key not in seen:
                seen.add(key)
                out.append(m)
    return out


# ---------------------------------------------------------------------------
# Application.

class Extractor:
    """Caches one smallest-term extraction pass over a frozen graph."""

    def __init__(self, g: EGraph):
        self.g = g
        self._best: Optional[dict] = None

    def term(self, c: int) -> Optional[Term]:
        if self._best is None:
            self._best = self.g.extract_best(term_size_cost)
        c = self.g.find(c)
        if c not in self._best:
            return None
        return self.g.build_term(c, self._best)


def _instantiate_term(rule: CompiledRule, t: Term, depth: int,
                      binds: dict[str, Term],
                      maps: tuple[dict, dict, dict]) -> Term:
    sp = _subst_spine(t)
    if sp is not None:
        body = _instantiate_term(rule, sp[0], depth + 1, binds, maps)
        arg = _instantiate_term(rule, sp[1], depth, binds, maps)
        return terms.substitute(body, arg)
    if _is_hole(t):
        b = binds[t.name]
        delta = depth - rule.depths[t.name]
        if delta:
            b = terms.shift(b, delta, rule.depths[t.name])
        return b
    ty = _ground_type(t.ty, *maps)
    if isinstance(t, Lam):
        return Lam(ty, _instantiate_term(rule, t.body, depth + 1, binds, maps))
    if isinstance(t, App):
        return App(ty, _instantiate_term(rule, t.fn, depth, binds, maps),
                   _instantiate_term(rule, t.arg, depth, binds, maps))
    if isinstance(t, NatLam):
        return NatLam(ty, _instantiate_term(rule, t.body, depth, binds, maps))
    if isinstance(t, NatApp):
        return NatApp(ty, _instantiate_term(rule, t.fn, depth, binds, maps),
                      _ground_nat(t.nat, maps[2]))
    if isinstance(t, Var):
        return Var(ty, t.idx)
    if isinstance(t, Prim):
        return Prim(ty, t.name)
    return Lit(ty, t.value)


def instantiate(rule: CompiledRule, binds: dict[str, Term],
                tmap: dict[str, Type], dmap: dict[str, Data],
                nmap: dict[str, Nat]) -> Term:
    """Build the right-hand side as a term from term bindings."""
    assert rule.rhs is not None
    return _instantiate_term(rule, rule.rhs, 0, binds, (tmap, dmap, nmap))


def _instantiate_graph(g: EGraph, m: Match, extractor: Extractor,
                       explicit: bool) -> Optional[int]:
    """Add the instantiated right-hand side to the graph; return its class.

    Holes referenced at their own binder depth alias the matched class
    directly.  A shifted or substituted hole needs a concrete term: the
    default mode extracts one, explicit mode adds a shift or subst node
    and lets the propagation rules work it out.
    """
    rule = m.rule
    maps = (m.tmap, m.dmap, m.nmap)

    def extract_binds(t: Term) -> Optional[dict[str, Term]]:
        binds = {}
        for hname, _ in _rhs_occurrences(t):
            got = extractor.term(m.bound[hname])
            if got is None:
                return None
            binds[hname] = got
        return binds

    def go(t: Term, depth: int) -> Optional[int]:
        sp = _subst_spine(t)
        if sp is not None:
            if explicit:
                b = go(sp[0], depth + 1)
                e = go(sp[1], depth)
                if b is None or e is None:
                    return None
                return g.add(ENode("subst", 0, (b, e)), g.class_type(b))
            binds = extract_binds(t)
            if binds is None:
                return None
            return g.add_term(_instantiate_term(rule, t, depth, binds, maps))
        if _is_hole(t):
            c = m.bound[t.name]
            delta = depth - rule.depths[t.name]
            if delta == 0:
                return c
            if explicit:
                return g.add(ENode("shift", (delta, rule.depths[t.name]), (g.find(c),)),
                             g.class_type(c))
            got = extractor.term(c)
            if got is None:
                return None
            return g.add_term(terms.shift(got, delta, rule.depths[t.name]))
        ty = _ground_type(t.ty, *maps)
        if isinstance(t, Lam):
            b = go(t.body, depth + 1)
            return None if b is None else g.add(ENode("lam", ty.arg, (b,)), ty)
        if isinstance(t, App):
            f = go(t.fn, depth)
            a = go(t.arg, depth)
            if f is None or a is None:
                return None
            return g.add(ENode("app", None, (f, a)), ty)
        if isinstance(t, NatLam):
            b = go(t.body, depth)
            return None if b is None else g.add(ENode("natlam", None, (b,)), ty)
        if isinstance(t, NatApp):
            f = go(t.fn, depth)
            if f is None:
                return None
            return g.add(ENode("natapp", _ground_nat(t.nat, maps[2]), (f,)), ty)
        if isinstance(t, Var):
            return g.add(ENode("var", (t.idx, ty), ()), ty)
        if isinstance(t, Prim):
            return g.add(ENode("prim", (t.name, ty), ()), ty)
        return g.add(ENode("lit", t.value, ()), ty)

    return go(rule.rhs, 0)


def apply_match(g: EGraph, m: Match, extractor: Optional[Extractor] = None,
                explicit: bool = False) -> bool:
    """Apply one match; True when the graph gained a new equality."""
    rule = m.rule
    if rule.applier is not None:
        return rule.applier(g, rule, m)
    for v, i in rule.conds:
        if i in g.free_of(m.bound[v]):
            return False
    if extractor is None:
        extractor = Extractor(g)
    new = _instantiate_graph(g, m, extractor, explicit)
    if new is None:
        return False
    root = g.find(m.root)
    if root == g.find(new):
        return False
    g.union(root, new)
    return True


# ---------------------------------------------------------------------------
# Term-level application, for strategy-driven rewriting.

def match_term(rule: CompiledRule, t: Term) -> Optional[Match]:
    """Match the left-hand side against a term's root."""
    if rule.pat is None:
        return None
    uni = Unifier()
    binds: dict[str, Term] = {}

    def mt(p: Term, u: Term) -> bool:
        if _is_hole(p):
            prior = binds.get(p.name)
            if prior is not None:
                return prior == u
            try:
                uni.unify(p.ty, u.ty)
            except TypeInferenceError:
                return False
            binds[p.name] = u
            return True
        try:
            uni.unify(p.ty, u.ty)
        except TypeInferenceError:
            return False
        if isinstance(p, Var):
            return isinstance(u, Var) and p.idx == u.idx
        if isinstance(p, Prim):
            return isinstance(u, Prim) and p.name == u.name
        if isinstance(p, Lit):
            return isinstance(u, Lit) and p.value == u.value
        if isinstance(p, Lam):
            return isinstance(u, Lam) and mt(p.body, u.body)
        if isinstance(p, App):
            return isinstance(u, App) and mt(p.fn, u.fn) and mt(p.arg, u.arg)
        if isinstance(p, NatLam):
            return isinstance(u, NatLam) and mt(p.body, u.body)
        if isinstance(p, NatApp):
            if not isinstance(u, NatApp):
                return False
            try:
                uni.unify_nat(p.nat, u.nat)
            except TypeInferenceError:
                return False
            return mt(p.fn, u.fn)
        return False

    if not mt(rule.lhs, t):
        return None
    tmap = {v: uni.deep_type(types.tvar(v)) for v in rule.flex_t}
    dmap = {v: uni.deep_data(types.dvar(v)) for v in rule.flex_d}
    nmap = {v: uni.resolve_nat(nat.var(v)) for v in rule.flex_n}
    if (any(_has_flex_type(x) for x in tmap.values())
            or any(_is_flex(x) for n_ in nmap.values() for x in nat.free_vars(n_))):
        return None
    if not all(_integral_nat(n) for n in nmap.values()):
        return None
    for n_ in rule.chk_nats:
        if not _integral_nat(nat.subst(n_, nmap)):
            return None
    m = Match(rule, -1, {}, tmap, dmap, nmap)
    m.term_binds = binds  # type: ignore[attr-defined]
    return m


def apply_rule_term(rule: CompiledRule, t: Term) -> Optional[Term]:
    """Rewrite a term at its root, or None when the rule does not apply."""
    if rule.term_applier is not None:
        return rule.term_applier(t)
    if rule.rhs is None:
        return None
    m = match_term(rule, t)
    if m is None:
        return None
    binds = m.term_binds  # type: ignore[attr-defined]
    for v, i in rule.conds:
        if i in terms.free_indices(binds[v]):
            return None
    return instantiate(rule, binds, m.tmap, m.dmap, m.nmap)


# ---------------------------------------------------------------------------
# Explicit substitution mode.  The rewriting rules stop extracting terms:
# beta adds a substitution node, shifted holes add shift nodes, and the two
# step rules below push those nodes through the represented structure.

def _node_matches(g: EGraph, rule: CompiledRule, syms: tuple[str, ...]
                  ) -> list[Match]:
    out = []
    for c in g.classes():
        for n in g.nodes_of(c):
            if n.sym in syms:
                out.append(Match(rule, c, {}, {}, {}, {}, node=n))
    return out


def _shifted_class(g: EGraph, c: int, d: int, k: int) -> int:
    if d == 0:
        return g.find(c)
    return g.add(ENode("shift", (d, k), (g.find(c),)), g.class_type(c))


def _subst_step(g: EGraph, rule: CompiledRule, m: Match) -> bool:
    n = g.canonicalize(m.node)
    i = n.meta
    b, e = n.children
    r = g.find(m.root)
    changed = False

    def merge(c: int) -> None:
        nonlocal changed
        if g.find(c) != g.find(r):
            g.union(r, c)
            changed = True

    for bn in list(g.nodes_of(b)):
        if bn.sym == "var":
            j, vty = bn.meta
            if j == i:
                merge(_shifted_class(g, e, i, 0))
            elif j > i:
                merge(g.add(ENode("var", (j - 1, vty), ()), vty))
            else:
                # every term in the body class equals this variable, which
                # the substitution leaves alone
                merge(b)
        elif bn.sym in ("prim", "lit"):
            merge(b)
        elif bn.sym == "lam":
            body = bn.children[0]
            inner = g.add(ENode("subst", i + 1, (body, e)), g.class_type(body))
            merge(g.add(ENode("lam", bn.meta, (inner,)), g.class_type(b)))
        elif bn.sym == "app":
            f, a = bn.children
            f2 = g.add(ENode("subst", i, (f, e)), g.class_type(f))
            a2 = g.add(ENode("subst", i, (a, e)), g.class_type(a))
            merge(g.add(ENode("app", None, (f2, a2)), g.class_type(b)))
        elif bn.sym == "natapp":
            f = bn.children[0]
            f2 = g.add(ENode("subst", i, (f, e)), g.class_type(f))
            merge(g.add(ENode("natapp", bn.meta, (f2,)), g.class_type(b)))
        # natlam bodies are left alone: no rule in the libraries puts a
        # substitution under a size binder
    return changed


def _shift_step(g: EGraph, rule: CompiledRule, m: Match) -> bool:
    n = g.canonicalize(m.node)
    d, k = n.meta
    c = n.children[0]
    r = g.find(m.root)
    changed = False

    def merge(x: int) -> None:
        nonlocal changed
        if g.find(x) != g.find(r):
            g.union(r, x)
            changed = True

    for cn in list(g.nodes_of(c)):
        if cn.sym == "var":
            j, vty = cn.meta
            if j < k:
                merge(c)
            elif j + d >= 0:
                merge(g.add(ENode("var", (j + d, vty), ()), vty))
        elif cn.sym in ("prim", "lit"):
            merge(c)
        elif cn.sym == "lam":
            body = cn.children[0]
            inner = g.add(ENode("shift", (d, k + 1), (body,)), g.class_type(body))
            merge(g.add(ENode("lam", cn.meta, (inner,)), g.class_type(c)))
        elif cn.sym == "app":
            f, a = cn.children
            f2 = g.add(ENode("shift", (d, k), (f,)), g.class_type(f))
            a2 = g.add(ENode("shift", (d, k), (a,)), g.class_type(a))
            merge(g.add(ENode("app", None, (f2, a2)), g.class_type(c)))
        elif cn.sym == "natapp":
            f = cn.children[0]
            f2 = g.add(ENode("shift", (d, k), (f,)), g.class_type(f))
            merge(g.add(ENode("natapp", cn.meta, (f2,)), g.class_type(c)))
    return changed


def subst_step_rule() -> CompiledRule:
    return CompiledRule(
        name="subst-step", lhs=None, rhs=None, conds=(), depths={}, binders={},
        flex_t=(), flex_d=(), flex_n=(), pat=None,
        searcher=lambda g, r: _node_matches(g, r, ("subst",)),
        applier=_subst_step)


def shift_step_rule() -> CompiledRule:
    return CompiledRule(
        name="shift-step", lhs=None, rhs=None, conds=(), depths={}, binders={},
        flex_t=(), flex_d=(), flex_n=(), pat=None,
        searcher=lambda g, r: _node_matches(g, r, ("shift",)),
        applier=_shift_step)
