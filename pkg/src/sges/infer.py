"""Type inference for named terms.

Produces a fully typed De Bruijn term. Primitives and ambient constants
carry polymorphic schemes whose "?" variables are instantiated fresh at
every use site; unification then pins every instantiation down. Size
equations are solved linearly, which is what makes applications of split,
slide and asVector come out exact.
"""

from __future__ import annotations

from typing import Optional

from . import nat, types
from .nat import Nat
from .terms import (App, Lam, Lit, NAnnot, NApp, NLam, NNatApp, NNatLam, NNum,
                    NTerm, NVar, NatApp, NatLam, Prim, Term, Var)
from .types import Data, Type


class TypeInferenceError(TypeError):
    pass


def _is_flex(name: str) -> bool:
    return name.startswith("?")


class Unifier:
    def __init__(self, rigid: Optional[set[str]] = None):
        self.tvars: dict[str, Type] = {}
        self.dvars: dict[str, Data] = {}
        self.nvars: dict[str, Nat] = {}
        self.rigid = rigid or set()
        self.counter = 0
        # undo log for backtracking matchers
        self.trail: list[tuple[dict, str]] = []

    def fresh_name(self, base: str) -> str:
        self.counter += 1
        return f"{base}#{self.counter}"

    def fresh_tvar(self) -> Type:
        return types.tvar(self.fresh_name("?t"))

    def mark(self) -> int:
        return len(self.trail)

    def undo(self, mark: int) -> None:
        while len(self.trail) > mark:
            store, key = self.trail.pop()
            del store[key]

    # -- resolution --

    def resolve_type(self, t: Type) -> Type:
        while t.kind == "tvar" and t.name in self.tvars:
            t = self.tvars[t.name]
        return t

    def resolve_data(self, d: Data) -> Data:
        while d.kind == "dvar" and d.name in self.dvars:
            d = self.dvars[d.name]
        return d

    def resolve_nat(self, n: Nat) -> Nat:
        while True:
            hits = {v: self.nvars[v] for v in nat.free_vars(n) if v in self.nvars}
            if not hits:
                return n
            n = nat.subst(n, hits)

    def deep_data(self, d: Data) -> Data:
        d = self.resolve_data(d)
        if d.kind in ("scalar", "dvar"):
            return d
        if d.kind == "array":
            return types.array(self.resolve_nat(d.size), self.deep_data(d.elem))
        if d.kind == "pair":
            return types.pair(self.deep_data(d.fst), self.deep_data(d.snd))
        if d.kind == "vector":
            return types.vector(self.resolve_nat(d.size), self.deep_data(d.elem))
        return types.index(self.resolve_nat(d.size))

    def deep_type(self, t: Type) -> Type:
        t = self.resolve_type(t)
        if t.kind == "tvar":
            return t
        if t.kind == "data":
            return types.data(self.deep_data(t.data))
        if t.kind == "fun":
            return types.fun(self.deep_type(t.arg), self.deep_type(t.res))
        return types.natfun(self.deep_type(t.body))

    # -- occurs checks --

    def _occurs_data(self, name: str, d: Data) -> bool:
        d = self.resolve_data(d)
        if d.kind == "dvar":
            return d.name == name
        for c in (d.elem, d.fst, d.snd):
            if c is not None and self._occurs_data(name, c):
                return True
        return False

    def _occurs_type(self, name: str, t: Type) -> bool:
        t = self.resolve_type(t)
        if t.kind == "tvar":
            return t.name == name
        if t.kind == "data":
            return False
        if t.kind == "fun":
            return self._occurs_type(name, t.arg) or self._occurs_type(name, t.res)
        return self._occurs_type(name, t.body)

    # -- unification --

    def unify_nat(self, a: Nat, b: Nat) -> None:
        a, b = self.resolve_nat(a), self.resolve_nat(b)
        if a is b:
            return
        delta = nat.sub(a, b)
        if nat.as_int(delta) == 0:
            return
        for v in sorted(nat.free_vars(delta)):
            if _is_flex(v) and v not in self.rigid:
                sol = nat.solve_linear(delta, v)
                if sol is not None:
                    self.nvars[v] = sol
                    self.trail.append((self.nvars, v))
                    return
        raise TypeInferenceError(f"sizes differ: {nat.show(a)} vs {nat.show(b)}")

    def unify_data(self, a: Data, b: Data) -> None:
        a, b = self.resolve_data(a), self.resolve_data(b)
        if a is b:
            return
        for x, y in ((a, b), (b, a)):
            if x.kind == "dvar" and _is_flex(x.name) and x.name not in self.rigid:
                if self._occurs_data(x.name, y):
                    raise TypeInferenceError(f"recursive data type via {x.name}")
                self.dvars[x.name] = y
                self.trail.append((self.dvars, x.name))
                return
        if a.kind != b.kind:
            raise TypeInferenceError(f"type mismatch: {a} vs {b}")
        if a.kind == "scalar":
            if a.name != b.name:
                raise TypeInferenceError(f"scalar mismatch: {a} vs {b}")
        elif a.kind == "dvar":
            if a.name != b.name:
                raise TypeInferenceError(f"rigid type variables differ: {a} vs {b}")
        elif a.kind in ("array", "vector"):
            # elem first: pinning inner dimensions resolves the products
            # that outer sizes are made of
            self.unify_data(a.elem, b.elem)
            self.unify_nat(a.size, b.size)
        elif a.kind == "pair":
            self.unify_data(a.fst, b.fst)
            self.unify_data(a.snd, b.snd)
        else:
            self.unify_nat(a.size, b.size)

    def unify(self, a: Type, b: Type) -> None:
        a, b = self.resolve_type(a), self.resolve_type(b)
        if a is b:
            return
        for x, y in ((a, b), (b, a)):
            if x.kind == "tvar" and _is_flex(x.name) and x.name not in self.rigid:
                if self._occurs_type(x.name, y):
                    raise TypeInferenceError(f"recursive type via {x.name}")
                self.tvars[x.name] = y
                self.trail.append((self.tvars, x.name))
                return
        if a.kind != b.kind:
            raise TypeInferenceError(
                f"type mismatch: {types.show_type(a)} vs {types.show_type(b)}")
        if a.kind == "data":
            self.unify_data(a.data, b.data)
        elif a.kind == "fun":
            self.unify(a.arg, b.arg)
            self.unify(a.res, b.res)
        elif a.kind == "natfun":
            self.unify(a.body, b.body)
        else:
            raise TypeInferenceError(f"rigid type variables differ: {a.name} vs {b.name}")

    # -- scheme instantiation --

    def instantiate(self, scheme: Type) -> Type:
        dv, nv = types.type_free_vars(scheme)
        denv = {v: types.dvar(self.fresh_name(v)) for v in dv if _is_flex(v)}
        nenv = {v: nat.var(self.fresh_name(v)) for v in nv if _is_flex(v)}
        if not denv and not nenv:
            return scheme
        return types.subst_type(scheme, denv, nenv)


def _abstract_nat(t: Term, name: str) -> Term:
    """Turn the free size variable `name` into the ^0 binder of a natfun."""

    nenv: dict[str, Nat] = {name: nat.var("^0")}
    for k in range(64):
        nenv[f"^{k}"] = nat.var(f"^{k + 1}")

    def fix(ty: Type) -> Type:
        return types.subst_type(ty, {}, nenv)

    def go(u: Term) -> Term:
        if isinstance(u, Var):
            return Var(fix(u.ty), u.idx)
        if isinstance(u, Lam):
            return Lam(fix(u.ty), go(u.body))
        if isinstance(u, App):
            return App(fix(u.ty), go(u.fn), go(u.arg))
        if isinstance(u, NatLam):
            return NatLam(fix(u.ty), go(u.body))
        if isinstance(u, NatApp):
            return NatApp(fix(u.ty), go(u.fn), nat.subst(u.nat, nenv))
        if isinstance(u, Prim):
            return Prim(fix(u.ty), u.name)
        return u

    return go(t)


class Inferencer:
    def __init__(self, env: Optional[dict[str, Type]] = None,
                 sizes: Optional[set[str]] = None,
                 uni: Optional[Unifier] = None,
                 pattern_mode: bool = False):
        self.env = env or {}
        self.sizes = sizes or set()
        self.uni = uni or Unifier()
        self.f32 = types.data(types.scalar())
        # in pattern mode, unknown ?names become typed hole leaves sharing
        # one type variable across occurrences
        self.pattern_mode = pattern_mode
        self.hole_types: dict[str, Type] = {}

    def infer(self, t: NTerm, stack: list[tuple[str, Type]]) -> Term:
        uni = self.uni
        if isinstance(t, NVar):
            if t.name.startswith("%") and t.name[1:].isdigit():
                idx = int(t.name[1:])
                if idx >= len(stack):
                    raise TypeInferenceError(f"index {t.name} exceeds binder depth")
                return Var(stack[-1 - idx][1], idx)
            for i, (name, ty) in enumerate(reversed(stack)):
                if name == t.name:
                    return Var(ty, i)
            if t.name in self.env:
                return Prim(uni.instantiate(self.env[t.name]), t.name)
            if t.name in types.PRIMITIVES:
                return Prim(uni.instantiate(types.PRIMITIVES[t.name]), t.name)
            if self.pattern_mode and t.name.startswith("?"):
                if t.name not in self.hole_types:
                    self.hole_types[t.name] = uni.fresh_tvar()
                return Prim(self.hole_types[t.name], t.name)
            raise TypeInferenceError(f"unbound name {t.name!r}")
        if isinstance(t, NLam):
            binder = uni.fresh_tvar()
            body = self.infer(t.body, stack + [(t.name, binder)])
            return Lam(types.fun(binder, body.ty), body)
        if isinstance(t, NNatLam):
            fresh = t.name not in self.sizes
            self.sizes.add(t.name)
            try:
                body = self.infer(t.body, stack)
            finally:
                if fresh:
                    self.sizes.discard(t.name)
            # resolve first: the abstracted name may be hidden behind
            # unification variables and must not escape the binder
            abstracted = _abstract_nat(self.zonk(body, strict=False), t.name)
            return NatLam(types.natfun(abstracted.ty), abstracted)
        if isinstance(t, NApp):
            fn = self.infer(t.fn, stack)
            fnty = uni.resolve_type(fn.ty)
            if fnty.kind == "natfun":
                n = self._nat_argument(t.arg)
                return NatApp(types.instantiate_natfun(fnty, uni.resolve_nat(n)), fn, n)
            arg = self.infer(t.arg, stack)
            if fnty.kind == "tvar":
                res = uni.fresh_tvar()
                uni.unify(fnty, types.fun(arg.ty, res))
                return App(res, fn, arg)
            if fnty.kind != "fun":
                raise TypeInferenceError(
                    f"cannot apply a value of type {types.show_type(fnty)}")
            uni.unify(fnty.arg, arg.ty)
            return App(fnty.res, fn, arg)
        if isinstance(t, NNatApp):
            fn = self.infer(t.fn, stack)
            fnty = uni.resolve_type(fn.ty)
            if fnty.kind != "natfun":
                raise TypeInferenceError(
                    f"size applied to a value of type {types.show_type(fnty)}")
            n = t.nat if isinstance(t.nat, Nat) else nat.const(int(t.nat))
            return NatApp(types.instantiate_natfun(fnty, uni.resolve_nat(n)), fn, n)
        if isinstance(t, NNum):
            return Lit(self.f32, float(t.value))
        if isinstance(t, NAnnot):
            inner = self.infer(t.term, stack)
            self.uni.unify(inner.ty, t.ty)
            return inner
        raise TypeInferenceError(f"cannot infer a type for {t!r}")

    def _nat_argument(self, arg: NTerm) -> Nat:
        if isinstance(arg, NNum):
            if isinstance(arg.value, float):
                raise TypeInferenceError("size arguments are integral")
            return nat.const(arg.value)
        if isinstance(arg, NVar):
            if arg.name in self.sizes or arg.name.startswith("?"):
                return nat.var(arg.name)
            raise TypeInferenceError(f"unknown size variable {arg.name!r}")
        raise TypeInferenceError(f"expected a size argument, got {arg!r}")

    def zonk(self, t: Term, strict: bool = True) -> Term:
        """Deep-resolve every node type.

        With strict=True, residual flexible variables are generalized to
        rigid names (t0, t1, ... / n0, n1, ...) in traversal order, so
        the output of `from_named` never mentions solver-internal names.
        """

        uni = self.uni
        gen_d: dict[str, Data] = {}
        gen_n: dict[str, Nat] = {}

        def gen_data(d: Data) -> Data:
            if d.kind == "dvar" and _is_flex(d.name):
                if d.name not in gen_d:
                    gen_d[d.name] = types.dvar(f"t{len(gen_d)}")
                return gen_d[d.name]
            if d.kind in ("scalar", "dvar"):
                return d
            if d.kind == "array":
                return types.array(gen_nat(d.size), gen_data(d.elem))
            if d.kind == "pair":
                return types.pair(gen_data(d.fst), gen_data(d.snd))
            if d.kind == "vector":
                return types.vector(gen_nat(d.size), gen_data(d.elem))
            return types.index(gen_nat(d.size))

        def gen_nat(n: Nat) -> Nat:
            env = {}
            for v in nat.free_vars(n):
                if _is_flex(v):
                    if v not in gen_n:
                        gen_n[v] = nat.var(f"n{len(gen_n)}")
                    env[v] = gen_n[v]
            return nat.subst(n, env) if env else n

        def gen_type(ty: Type) -> Type:
            if ty.kind == "tvar":
                if not _is_flex(ty.name):
                    return ty
                if ty.name not in gen_d:
                    gen_d[ty.name] = types.dvar(f"t{len(gen_d)}")
                return types.data(gen_d[ty.name])
            if ty.kind == "data":
                return types.data(gen_data(ty.data))
            if ty.kind == "fun":
                return types.fun(gen_type(ty.arg), gen_type(ty.res))
            return types.natfun(gen_type(ty.body))

        def fix(ty: Type) -> Type:
            out = uni.deep_type(ty)
            if strict:
                out = gen_type(out)
            return out

        def go(u: Term) -> Term:
            if isinstance(u, Var):
                return Var(fix(u.ty), u.idx)
            if isinstance(u, Lam):
                return Lam(fix(u.ty), go(u.body))
            if isinstance(u, App):
                return App(fix(u.ty), go(u.fn), go(u.arg))
            if isinstance(u, NatLam):
                return NatLam(fix(u.ty), go(u.body))
            if isinstance(u, NatApp):
                return NatApp(fix(u.ty), go(u.fn), uni.resolve_nat(u.nat))
            if isinstance(u, Prim):
                return Prim(fix(u.ty), u.name)
            return u

        return go(t)


def from_named(t: NTerm, env: Optional[dict[str, Type]] = None,
               sizes: Optional[set[str]] = None) -> Term:
    """Resolve names to De Bruijn indices and infer every node's type."""

    inf = Inferencer(env, sizes)
    out = inf.infer(t, [])
    return inf.zonk(out)


def infer_types(t: NTerm, env: Optional[dict[str, Type]] = None,
                sizes: Optional[set[str]] = None) -> Term:
    return from_named(t, env, sizes)
