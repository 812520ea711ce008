"""Hash-consed data types and function types.

Data types and function types live in separate intern stores, so equality
is identity. Sizes inside types are interned `Nat` values. Function types
never occur inside data types: what can be stored in memory is first order.
"""

from __future__ import annotations

from typing import Iterator, Optional

from . import nat
from .nat import Nat

F32 = "f32"


class Data:
    __slots__ = ("kind", "name", "size", "elem", "fst", "snd", "did")

    def __init__(self, kind: str, name: str = "", size: Optional[Nat] = None,
                 elem: "Optional[Data]" = None, fst: "Optional[Data]" = None,
                 snd: "Optional[Data]" = None, did: int = -1):
        self.kind = kind  # "scalar" | "dvar" | "array" | "pair" | "vector" | "index"
        self.name = name
        self.size = size
        self.elem = elem
        self.fst = fst
        self.snd = snd
        self.did = did

    def __repr__(self) -> str:
        return show_data(self)

    def __hash__(self) -> int:
        return self.did


class Type:
    __slots__ = ("kind", "data", "arg", "res", "body", "name", "tid")

    def __init__(self, kind: str, data: Optional[Data] = None, arg: "Optional[Type]" = None,
                 res: "Optional[Type]" = None, body: "Optional[Type]" = None,
                 name: str = "", tid: int = -1):
        self.kind = kind  # "data" | "fun" | "natfun" | "tvar"
        self.data = data
        self.arg = arg
        self.res = res
        self.body = body
        self.name = name  # tvar only
        self.tid = tid

    def __repr__(self) -> str:
        return show_type(self)

    def __hash__(self) -> int:
        return self.tid


_data_store: dict[tuple, Data] = {}
_type_store: dict[tuple, Type] = {}


def _intern_data(d: Data) -> Data:
    key = (d.kind, d.name,
           d.size.nid if d.size is not None else -1,
           d.elem.did if d.elem is not None else -1,
           d.fst.did if d.fst is not None else -1,
           d.snd.did if d.snd is not None else -1)
    got = _data_store.get(key)
    if got is None:
        d.did = len(_data_store)
        _data_store[key] = d
        got = d
    return got


def _intern_type(t: Type) -> Type:
    key = (t.kind, t.name,
           t.data.did if t.data is not None else -1,
           t.arg.tid if t.arg is not None else -1,
           t.res.tid if t.res is not None else -1,
           t.body.tid if t.body is not None else -1)
    got = _type_store.get(key)
    if got is None:
        t.tid = len(_type_store)
        _type_store[key] = t
        got = t
    return got


def scalar(name: str = F32) -> Data:
    return _intern_data(Data("scalar", name=name))


def dvar(name: str) -> Data:
    """A data type variable, used in schemes and during unification."""

    return _intern_data(Data("dvar", name=name))


def array(size: Nat, elem: Data) -> Data:
    return _intern_data(Data("array", size=size, elem=elem))


def pair(fst: Data, snd: Data) -> Data:
    return _intern_data(Data("pair", fst=fst, snd=snd))


def vector(width: Nat, elem: Data) -> Data:
    return _intern_data(Data("vector", size=width, elem=elem))


def index(bound: Nat) -> Data:
    return _intern_data(Data("index", size=bound))


def data(d: Data) -> Type:
    return _intern_type(Type("data", data=d))


def fun(a: Type, b: Type) -> Type:
    return _intern_type(Type("fun", arg=a, res=b))


def natfun(body: Type) -> Type:
    """A nat-dependent function type. The binder is the nat var "^0" in body,
    with nested binders "^1", "^2" and so on counted from the outside in."""

    return _intern_type(Type("natfun", body=body))


def tvar(name: str) -> Type:
    """A whole-type variable. Only used while inferring types."""

    return _intern_type(Type("tvar", name=name))


def fun_chain(*ts: Type) -> Type:
    out = ts[-1]
    for t in reversed(ts[:-1]):
        out = fun(t, out)
    return out


def show_data(d: Data) -> str:
    if d.kind == "scalar":
        return d.name
    if d.kind == "dvar":
        return d.name
    if d.kind == "array":
        size = nat.show(d.size)
        # anything beyond a bare name or integer needs parens before "."
        if not (size.isdigit() or size.isidentifier()):
            size = f"({size})"
        return f"{size}.{show_data(d.elem)}"
    if d.kind == "pair":
        return f"({show_data(d.fst)} * {show_data(d.snd)})"
    if d.kind == "vector":
        return f"<{nat.show(d.size)}>{show_data(d.elem)}"
    return f"idx({nat.show(d.size)})"


def show_type(t: Type) -> str:
    if t.kind == "data":
        return show_data(t.data)
    if t.kind == "tvar":
        return t.name
    if t.kind == "fun":
        a = show_type(t.arg)
        if t.arg.kind != "data":
            a = f"({a})"
        return f"{a} -> {show_type(t.res)}"
    return f"(nat) -> {show_type(t.body)}"


def data_nats(d: Data) -> Iterator[Nat]:
    if d.kind in ("array", "vector", "index"):
        yield d.size
    if d.elem is not None:
        yield from data_nats(d.elem)
    if d.fst is not None:
        yield from data_nats(d.fst)
        yield from data_nats(d.snd)


def subst_data(d: Data, denv: dict[str, Data], nenv: dict[str, Nat]) -> Data:
    if d.kind == "scalar":
        return d
    if d.kind == "dvar":
        return denv.get(d.name, d)
    if d.kind == "array":
        return array(nat.subst(d.size, nenv), subst_data(d.elem, denv, nenv))
    if d.kind == "pair":
        return pair(subst_data(d.fst, denv, nenv), subst_data(d.snd, denv, nenv))
    if d.kind == "vector":
        return vector(nat.subst(d.size, nenv), subst_data(d.elem, denv, nenv))
    return index(nat.subst(d.size, nenv))


def subst_type(t: Type, denv: dict[str, Data], nenv: dict[str, Nat]) -> Type:
    if t.kind == "data":
        return data(subst_data(t.data, denv, nenv))
    if t.kind == "tvar":
        return t
    if t.kind == "fun":
        return fun(subst_type(t.arg, denv, nenv), subst_type(t.res, denv, nenv))
    return natfun(subst_type(t.body, denv, nenv))


def instantiate_natfun(t: Type, n: Nat) -> Type:
    """Apply a natfun type to a size: substitute ^0 and shift deeper binders."""

    if t.kind != "natfun":
        raise TypeError(f"nat application on non nat-dependent type {show_type(t)}")

    def rename(u: Type, depth: int) -> Type:
        if u.kind == "natfun":
            return natfun(rename(u.body, depth + 1))
        nenv = {f"^{depth}": n}
        for k in range(depth + 1, depth + 64):
            nenv[f"^{k}"] = nat.var(f"^{k - 1}")
        return subst_type(u, {}, nenv)

    return rename(t.body, 0)


def type_free_vars(t: Type) -> tuple[set[str], set[str]]:
    """Free data vars and free nat vars (binder vars ^k excluded)."""

    dvars: set[str] = set()
    nvars: set[str] = set()

    def walk_data(d: Data) -> None:
        if d.kind == "dvar":
            dvars.add(d.name)
        for n in ([d.size] if d.size is not None else []):
            nvars.update(v for v in nat.free_vars(n) if not v.startswith("^"))
        for c in (d.elem, d.fst, d.snd):
            if c is not None:
                walk_data(c)

    def walk(u: Type) -> None:
        if u.kind == "data":
            walk_data(u.data)
        elif u.kind == "fun":
            walk(u.arg)
            walk(u.res)
        elif u.kind == "natfun":
            walk(u.body)

    walk(t)
    return dvars, nvars


# Primitive type schemes. Scheme variables are spelled with a leading "?" and
# are freshly instantiated at every use site. Explicit size arguments are
# natfun binders, applied one at a time through nat application.

def _d(name: str) -> Data:
    return dvar("?" + name)


def _n(name: str) -> Nat:
    return nat.var("?" + name)


def _arr(size: Nat, elem: Data) -> Data:
    return array(size, elem)


def primitive_schemes() -> dict[str, Type]:
    f32 = scalar()
    s, t = _d("s"), _d("t")
    a, b, c = _d("a"), _d("b"), _d("c")
    n, m = _n("n"), _n("m")
    b0, b1 = nat.var("^0"), nat.var("^1")
    D = data
    schemes: dict[str, Type] = {}
    for mp in ("map", "mapSeq", "mapPar"):
        schemes[mp] = fun_chain(fun(D(s), D(t)), D(_arr(n, s)), D(_arr(n, t)))
    schemes["reduce"] = fun_chain(fun_chain(D(t), D(t), D(t)), D(t), D(_arr(n, t)), D(t))
    for rs in ("reduceSeq", "reduceSeqUnroll"):
        schemes[rs] = fun_chain(fun_chain(D(s), D(t), D(s)), D(s), D(_arr(n, t)), D(s))
    schemes["split"] = natfun(fun(D(_arr(nat.mul(b0, m), t)), D(_arr(m, _arr(b0, t)))))
    schemes["join"] = fun(D(_arr(n, _arr(m, t))), D(_arr(nat.mul(n, m), t)))
    schemes["transpose"] = fun(D(_arr(n, _arr(m, t))), D(_arr(m, _arr(n, t))))
    # slide sz sp : under two nat binders sz is ^1, sp is ^0
    slide_in = nat.add(nat.mul(b0, n), nat.sub(b1, b0))
    schemes["slide"] = natfun(natfun(
        fun(D(_arr(slide_in, t)), D(_arr(n, _arr(b1, t))))))
    schemes["zip"] = fun_chain(D(_arr(n, s)), D(_arr(n, t)), D(_arr(n, pair(s, t))))
    schemes["unzip"] = fun(D(_arr(n, pair(s, t))), D(pair(_arr(n, s), _arr(n, t))))
    schemes["fst"] = fun(D(pair(s, t)), D(s))
    schemes["snd"] = fun(D(pair(s, t)), D(t))
    schemes["generate"] = fun(fun(D(index(n)), D(t)), D(_arr(n, t)))
    schemes["toMem"] = fun(D(t), D(t))
    schemes["let"] = fun_chain(D(s), fun(D(s), D(t)), D(t))
    schemes["asVector"] = natfun(fun(D(_arr(nat.mul(n, b0), f32)), D(_arr(n, vector(b0, f32)))))
    schemes["asScalar"] = fun(D(_arr(n, vector(m, f32))), D(_arr(nat.mul(n, m), f32)))
    schemes["vectorFromScalar"] = fun(D(f32), D(vector(m, f32)))
    schemes["add"] = fun_chain(D(t), D(t), D(t))
    schemes["mul"] = fun_chain(D(t), D(t), D(t))
    schemes["comp"] = fun_chain(fun(D(b), D(c)), fun(D(a), D(b)), fun(D(a), D(c)))
    # stencil vocabulary: dot products and the 3x3 separable filter weights
    schemes["dot"] = fun_chain(D(_arr(n, f32)), D(_arr(n, f32)), D(f32))
    schemes["weightsV"] = D(_arr(nat.const(3), f32))
    schemes["weightsH"] = D(_arr(nat.const(3), f32))
    schemes["weights2d"] = D(_arr(nat.const(3), _arr(nat.const(3), f32)))
    return schemes


PRIMITIVES: dict[str, Type] = primitive_schemes()
