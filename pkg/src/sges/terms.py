"""Lambda terms over array combinators, with De Bruijn indices.

Every node carries its monomorphic type. Named terms are the parser and
printer surface; `from_named` (in `infer`) resolves names to indices, so
alpha-equivalent named terms produce identical `Term` values.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import Iterator, Optional, Union

from .nat import Nat
from .types import Type, show_type

# tree recursion over deep reduction intermediates needs headroom
sys.setrecursionlimit(max(sys.getrecursionlimit(), 20_000))


@dataclass(frozen=True)
class Term:
    ty: Type


@dataclass(frozen=True)
class Var(Term):
    idx: int


@dataclass(frozen=True)
class Lam(Term):
    body: Term


@dataclass(frozen=True)
class App(Term):
    fn: Term
    arg: Term


@dataclass(frozen=True)
class NatLam(Term):
    body: Term


@dataclass(frozen=True)
class NatApp(Term):
    fn: Term
    nat: Nat


@dataclass(frozen=True)
class Prim(Term):
    name: str


@dataclass(frozen=True)
class Lit(Term):
    value: float


def binder_type(t: Lam) -> Type:
    if t.ty.kind != "fun":
        raise TypeError(f"lambda with non-function type {show_type(t.ty)}")
    return t.ty.arg


def children(t: Term) -> tuple[Term, ...]:
    if isinstance(t, App):
        return (t.fn, t.arg)
    if isinstance(t, (Lam, NatLam)):
        return (t.body,)
    if isinstance(t, NatApp):
        return (t.fn,)
    return ()


def with_children(t: Term, cs: tuple[Term, ...]) -> Term:
    if isinstance(t, App):
        return App(t.ty, cs[0], cs[1])
    if isinstance(t, Lam):
        return Lam(t.ty, cs[0])
    if isinstance(t, NatLam):
        return NatLam(t.ty, cs[0])
    if isinstance(t, NatApp):
        return NatApp(t.ty, cs[0], t.nat)
    return t


def size(t: Term) -> int:
    """Number of nodes."""

    return 1 + sum(size(c) for c in children(t))


def subterms(t: Term) -> Iterator[Term]:
    yield t
    for c in children(t):
        yield from subterms(c)


def free_indices(t: Term, depth: int = 0) -> set[int]:
    """Free De Bruijn indices, counted relative to the term's root."""

    if isinstance(t, Var):
        return {t.idx - depth} if t.idx >= depth else set()
    if isinstance(t, Lam):
        return free_indices(t.body, depth + 1)
    out: set[int] = set()
    for c in children(t):
        out |= free_indices(c, depth)
    return out


def shift(t: Term, delta: int, cutoff: int = 0) -> Term:
    """Shift free indices >= cutoff by delta.

    Shifting below zero is an error: that would capture or drop a binding.
    """

    if isinstance(t, Var):
        if t.idx >= cutoff:
            if t.idx + delta < 0:
                raise ValueError(f"index {t.idx} shifted below zero")
            return Var(t.ty, t.idx + delta)
        return t
    if isinstance(t, Lam):
        return Lam(t.ty, shift(t.body, delta, cutoff + 1))
    if isinstance(t, App):
        return App(t.ty, shift(t.fn, delta, cutoff), shift(t.arg, delta, cutoff))
    if isinstance(t, NatLam):
        return NatLam(t.ty, shift(t.body, delta, cutoff))
    if isinstance(t, NatApp):
        return NatApp(t.ty, shift(t.fn, delta, cutoff), t.nat)
    return t


def substitute(body: Term, arg: Term) -> Term:
    """Replace %0 in body with arg and decrement the remaining free indices."""

    def go(t: Term, depth: int) -> Term:
        if isinstance(t, Var):
            if t.idx == depth:
                return shift(arg, depth)
            if t.idx > depth:
                return Var(t.ty, t.idx - 1)
            return t
        if isinstance(t, Lam):
            return Lam(t.ty, go(t.body, depth + 1))
        if isinstance(t, App):
            return App(t.ty, go(t.fn, depth), go(t.arg, depth))
        if isinstance(t, NatLam):
            return NatLam(t.ty, go(t.body, depth))
        if isinstance(t, NatApp):
            return NatApp(t.ty, go(t.fn, depth), t.nat)
        return t

    return go(body, 0)


class BudgetExceeded(RuntimeError):
    pass


def beta_step(t: Term) -> Optional[Term]:
    if isinstance(t, App) and isinstance(t.fn, Lam):
        return substitute(t.fn.body, t.arg)
    return None


def eta_step(t: Term) -> Optional[Term]:
    if (isinstance(t, Lam) and isinstance(t.body, App)
            and isinstance(t.body.arg, Var) and t.body.arg.idx == 0
            and 0 not in free_indices(t.body.fn)):
        return shift(t.body.fn, -1, 1)
    return None


def _reduce_once(t: Term) -> Optional[Term]:
    # leftmost outermost
    got = beta_step(t) or eta_step(t)
    if got is not None:
        return got
    cs = children(t)
    for i, c in enumerate(cs):
        r = _reduce_once(c)
        if r is not None:
            return with_children(t, cs[:i] + (r,) + cs[i + 1:])
    return None


def beta_eta_normalize(t: Term, budget: int = 100_000) -> Term:
    """Normal order reduction to a term with no beta or eta redex.

    The budget caps both step count and intermediate term size, so a
    diverging term fails fast instead of exhausting the stack.
    """

    for _ in range(budget):
        r = _reduce_once(t)
        if r is None:
            return t
        t = r
        if size(t) > budget:
            break
    raise BudgetExceeded(f"no normal form within a budget of {budget}")


def show(t: Term) -> str:
    """De Bruijn display form, e.g. lam(lam(app(%1, %0)))."""

    if isinstance(t, Var):
        return f"%{t.idx}"
    if isinstance(t, Lam):
        return f"lam({show(t.body)})"
    if isinstance(t, App):
        return f"app({show(t.fn)}, {show(t.arg)})"
    if isinstance(t, NatLam):
        return f"natlam({show(t.body)})"
    if isinstance(t, NatApp):
        from . import nat as _nat
        return f"natapp({show(t.fn)}, {_nat.show(t.nat)})"
    if isinstance(t, Prim):
        return t.name
    if isinstance(t, Lit):
        v = t.value
        return str(int(v)) if float(v).is_integer() else str(v)
    raise TypeError(f"not a term: {t!r}")


# Named surface syntax tree, before type inference. NNum stands for a number
# whose reading (size argument or scalar literal) the type checker decides.

@dataclass(frozen=True)
class NTerm:
    pass


@dataclass(frozen=True)
class NVar(NTerm):
    name: str


@dataclass(frozen=True)
class NLam(NTerm):
    name: str
    body: NTerm


@dataclass(frozen=True)
class NApp(NTerm):
    fn: NTerm
    arg: NTerm


@dataclass(frozen=True)
class NNatLam(NTerm):
    name: str
    body: NTerm


@dataclass(frozen=True)
class NNatApp(NTerm):
    fn: NTerm
    nat: object  # nat syntax, resolved during inference


@dataclass(frozen=True)
class NNum(NTerm):
    value: Union[int, float]


@dataclass(frozen=True)
class NAnnot(NTerm):
    term: NTerm
    ty: object  # type syntax, resolved during inference


def show_named(t: NTerm) -> str:
    if isinstance(t, NVar):
        return t.name
    if isinstance(t, NLam):
        return f"(\\{t.name}. {show_named(t.body)})"
    if isinstance(t, NNatLam):
        return f"(/\\{t.name}. {show_named(t.body)})"
    if isinstance(t, NApp):
        return f"({show_named(t.fn)} {show_named(t.arg)})"
    if isinstance(t, NNatApp):
        return f"({show_named(t.fn)} {t.nat})"
    if isinstance(t, NNum):
        return str(t.value)
    if isinstance(t, NAnnot):
        return f"({show_named(t.term)} : {t.ty})"
    raise TypeError(f"not a named term: {t!r}")
