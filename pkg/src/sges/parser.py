"""Text syntax for terms, types and size expressions.

Terms:   \\x. map (\\y. add y 1) x        lambdas, application by juxtaposition
         /\\n. body                        size lambda
Types:   m.k.f32, <32>f32, (s * t), idx(n), a -> b -> c
Sizes:   m/32, 4*k + 2, with + - * / % ^ and parentheses

Numbers in argument position are resolved by the type checker: a size
argument where a nat-dependent function expects one, a scalar literal
otherwise. Identifiers starting with "?" are pattern or scheme variables;
plain identifiers in size position are goal size variables. `#` starts a
line comment.
"""

from __future__ import annotations

from typing import Optional

from . import nat, terms, types
from .nat import Nat
from .terms import NAnnot, NApp, NLam, NNatApp, NNatLam, NNum, NTerm, NVar

PUNCT = ["~>", "->", "::", "/\\", "(", ")", "[", "]", ".", ":", "*", "/", "%",
         "+", "-", "<", ">", "?", "\\", ",", "^", "=", "λ", "Λ"]


class ParseError(ValueError):
    pass


def tokenize(src: str) -> list[str]:
    toks: list[str] = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c in " \t\r\n":
            i += 1
            continue
        if c == "#":
            while i < n and src[i] != "\n":
                i += 1
            continue
        if c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            if j + 1 < n and src[j] == "." and src[j + 1].isdigit():
                j += 1
                while j < n and src[j].isdigit():
                    j += 1
            toks.append(src[i:j])
            i = j
            continue
        if c.isalpha() or c == "_" or c == "?":
            j = i + 1 if c != "?" else i + 1
            while j < n and (src[j].isalnum() or src[j] in "_'"):
                j += 1
            toks.append(src[i:j])
            i = j
            continue
        for p in PUNCT:
            if src.startswith(p, i):
                toks.append(p)
                i += len(p)
                break
        else:
            raise ParseError(f"unexpected character {c!r} at offset {i}")
    return toks


class Tokens:
    def __init__(self, toks: list[str]):
        self.toks = toks
        self.pos = 0

    def peek(self, ahead: int = 0) -> Optional[str]:
        i = self.pos + ahead
        return self.toks[i] if i < len(self.toks) else None

    def next(self) -> str:
        if self.pos >= len(self.toks):
            raise ParseError("unexpected end of input")
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, tok: str) -> None:
        got = self.next()
        if got != tok:
            raise ParseError(f"expected {tok!r}, got {got!r}")

    def done(self) -> bool:
        return self.pos >= len(self.toks)


def _is_ident(tok: Optional[str]) -> bool:
    return tok is not None and (tok[0].isalpha() or tok[0] in "_?")


def _is_number(tok: Optional[str]) -> bool:
    return tok is not None and tok[0].isdigit()


# ---- sizes ----

def parse_nat_expr(ts: Tokens) -> Nat:
    left = _parse_nat_term(ts)
    while ts.peek() in ("+", "-"):
        op = ts.next()
        right = _parse_nat_term(ts)
        left = nat.add(left, right) if op == "+" else nat.sub(left, right)
    return left


def _parse_nat_term(ts: Tokens) -> Nat:
    left = _parse_nat_pow(ts)
    while ts.peek() in ("*", "/", "%"):
        op = ts.next()
        right = _parse_nat_pow(ts)
        if op == "*":
            left = nat.mul(left, right)
        elif op == "/":
            left = nat.div(left, right)
        else:
            left = nat.mod(left, right)
    return left


def _parse_nat_pow(ts: Tokens) -> Nat:
    left = _parse_nat_atom(ts)
    if ts.peek() == "^":
        ts.next()
        right = _parse_nat_pow(ts)
        left = nat.pow(left, right)
    return left


def _parse_nat_atom(ts: Tokens) -> Nat:
    tok = ts.peek()
    if tok == "(":
        ts.next()
        e = parse_nat_expr(ts)
        ts.expect(")")
        return e
    if _is_number(tok):
        ts.next()
        if "." in tok:
            raise ParseError(f"size expressions are integral, got {tok}")
        return nat.const(int(tok))
    if _is_ident(tok):
        ts.next()
        return nat.var(tok)
    raise ParseError(f"expected a size expression, got {tok!r}")


def parse_nat(src: str) -> Nat:
    ts = Tokens(tokenize(src))
    e = parse_nat_expr(ts)
    if not ts.done():
        raise ParseError(f"trailing input after size expression: {ts.peek()!r}")
    return e


# ---- types ----

def parse_type_expr(ts: Tokens) -> types.Type:
    left = _parse_type_atom(ts)
    if ts.peek() == "->":
        ts.next()
        right = parse_type_expr(ts)
        return types.fun(left, right)
    return left


def _parse_type_atom(ts: Tokens) -> types.Type:
    if ts.peek() == "(":
        save = ts.pos
        if ts.peek(1) == "nat" and ts.peek(2) == ")":
            ts.next(); ts.next(); ts.next()
            ts.expect("->")
            return types.natfun(parse_type_expr(ts))
        try:
            return types.data(_parse_data(ts))
        except ParseError:
            ts.pos = save
        ts.next()
        inner = parse_type_expr(ts)
        ts.expect(")")
        return inner
    tok = ts.peek()
    # ?dt names range over data types, any other ?name over whole types;
    # a trailing dot means the ?name is an array size, e.g. ?n.f32
    if (_is_ident(tok) and tok.startswith("?") and not tok.startswith("?dt")
            and not _peek_ahead_dot(ts)):
        ts.next()
        return types.tvar(tok)
    return types.data(_parse_data(ts))


def _parse_data(ts: Tokens) -> types.Data:
    tok = ts.peek()
    if tok == "(":
        # a parenthesised size prefix like (m/32).32.f32 comes first; on
        # failure fall back to a grouped type or a pair (a * b)
        save = ts.pos
        try:
            ts.next()
            size = parse_nat_expr(ts)
            ts.expect(")")
            ts.expect(".")
            return types.array(size, _parse_data(ts))
        except ParseError:
            ts.pos = save
        ts.next()
        first = parse_type_expr(ts)
        if ts.peek() == "*":
            ts.next()
            second = parse_type_expr(ts)
            ts.expect(")")
            if first.kind != "data" or second.kind != "data":
                raise ParseError("pair components must be data types")
            d: types.Data = types.pair(first.data, second.data)
        else:
            ts.expect(")")
            if first.kind != "data":
                raise ParseError("function types cannot be stored in arrays")
            d = first.data
        return _maybe_array_suffix(ts, d)
    if tok == "<":
        ts.next()
        width = parse_nat_expr(ts)
        ts.expect(">")
        elem = _parse_data(ts)
        if elem.kind != "scalar":
            raise ParseError("vector elements must be scalar")
        return types.vector(width, elem)
    if _is_number(tok) or (_is_ident(tok) and _peek_ahead_dot(ts)):
        size = _parse_nat_atom_loose(ts)
        ts.expect(".")
        elem = _parse_data(ts)
        return types.array(size, elem)
    if tok == "idx":
        ts.next()
        ts.expect("(")
        bound = parse_nat_expr(ts)
        ts.expect(")")
        return types.index(bound)
    if tok == types.F32:
        ts.next()
        return types.scalar()
    if _is_ident(tok):
        ts.next()
        if not tok.startswith("?dt"):
            raise ParseError(f"unknown type name {tok!r} (data variables start with ?dt)")
        return types.dvar(tok)
    raise ParseError(f"expected a type, got {tok!r}")


def _peek_ahead_dot(ts: Tokens) -> bool:
    return ts.pos + 1 < len(ts.toks) and ts.toks[ts.pos + 1] == "."


def _parse_nat_atom_loose(ts: Tokens) -> Nat:
    tok = ts.next()
    if _is_number(tok):
        return nat.const(int(tok))
    return nat.var(tok)


def _maybe_array_suffix(ts: Tokens, d: types.Data) -> types.Data:
    return d


def parse_type(src: str) -> types.Type:
    ts = Tokens(tokenize(src))
    t = parse_type_expr(ts)
    if not ts.done():
        raise ParseError(f"trailing input after type: {ts.peek()!r}")
    return t


# ---- terms ----

def _is_lam_keyword(ts: Tokens) -> bool:
    # `lam x. e` only counts as a binder when the shape fits, so that a
    # variable actually named lam keeps working
    return _is_ident(ts.peek(1)) and ts.peek(2) == "."


def parse_term_expr(ts: Tokens, patterns: bool = False) -> NTerm:
    tok = ts.peek()
    if tok in ("\\", "λ") or (tok == "lam" and _is_lam_keyword(ts)):
        ts.next()
        name = ts.next()
        if not _is_ident(name):
            raise ParseError(f"bad binder name {name!r}")
        ts.expect(".")
        return NLam(name, parse_term_expr(ts, patterns))
    if tok in ("/\\", "Λ") or (tok == "natLam" and _is_lam_keyword(ts)):
        ts.next()
        name = ts.next()
        ts.expect(".")
        return NNatLam(name, parse_term_expr(ts, patterns))
    out = _parse_term_atom(ts, patterns)
    while True:
        tok = ts.peek()
        if tok == "[":
            ts.next()
            n = parse_nat_expr(ts)
            ts.expect("]")
            out = NNatApp(out, n)
        elif (tok == "(" or tok == "%" or _is_ident(tok) or _is_number(tok)
              or tok in ("\\", "λ")):
            if tok in ("\\", "λ") or (tok == "lam" and _is_lam_keyword(ts)):
                arg: NTerm = parse_term_expr(ts, patterns)
            else:
                arg = _parse_term_atom(ts, patterns)
            out = NApp(out, arg)
        else:
            return out


def _parse_term_atom(ts: Tokens, patterns: bool) -> NTerm:
    tok = ts.peek()
    if tok == "(":
        ts.next()
        inner = parse_term_expr(ts, patterns)
        if ts.peek() == "::":
            if not patterns:
                raise ParseError("type annotations are only allowed in rule patterns")
            ts.next()
            ty = parse_type_expr(ts)
            inner = NAnnot(inner, ty)
        ts.expect(")")
        return inner
    if tok == "%":
        # explicit De Bruijn index, e.g. %0 for the innermost binder
        ts.next()
        num = ts.next()
        if not num.isdigit():
            raise ParseError(f"expected an index after %, got {num!r}")
        return NVar(f"%{num}")
    if _is_number(tok):
        ts.next()
        return NNum(float(tok) if "." in tok else int(tok))
    if _is_ident(tok):
        ts.next()
        return NVar(tok)
    raise ParseError(f"expected a term, got {tok!r}")


def parse_term(src: str, patterns: bool = False) -> NTerm:
    ts = Tokens(tokenize(src))
    t = parse_term_expr(ts, patterns)
    if not ts.done():
        raise ParseError(f"trailing input after term: {ts.peek()!r}")
    return t


# ---- surface printer ----

def show_surface(t: terms.Term, names: Optional[list[str]] = None) -> str:
    """Render a De Bruijn term back into parseable surface syntax."""

    if names is None:
        names = []

    def atom(u: terms.Term) -> str:
        s = go(u)
        if isinstance(u, (terms.Var, terms.Prim, terms.Lit)):
            return s
        return f"({s})"

    def go(u: terms.Term) -> str:
        if isinstance(u, terms.Var):
            if u.idx < len(names):
                return names[len(names) - 1 - u.idx]
            return f"%{u.idx - len(names)}"
        if isinstance(u, terms.Lam):
            name = f"x{len(names)}"
            names.append(name)
            body = go(u.body)
            names.pop()
            return f"\\{name}. {body}"
        if isinstance(u, terms.NatLam):
            name = f"n{len(names)}"
            names.append(name)
            body = go(u.body)
            names.pop()
            return f"/\\{name}. {body}"
        if isinstance(u, terms.App):
            fn = go(u.fn) if isinstance(u.fn, (terms.App, terms.NatApp)) else atom(u.fn)
            return f"{fn} {atom(u.arg)}"
        if isinstance(u, terms.NatApp):
            fn = go(u.fn) if isinstance(u.fn, (terms.App, terms.NatApp)) else atom(u.fn)
            shown = nat.show(u.nat)
            if shown.isdigit():
                return f"{fn} {shown}"
            return f"{fn} [{shown}]"
        if isinstance(u, terms.Prim):
            return u.name
        if isinstance(u, terms.Lit):
            v = u.value
            return str(int(v)) if float(v).is_integer() else str(v)
        raise TypeError(f"not a term: {u!r}")

    return go(t)
