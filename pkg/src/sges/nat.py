"""Interned size arithmetic.

Array sizes are symbolic natural number expressions. Every expression is
normalised to a sum-of-products form at construction time and interned, so
two expressions are semantically equal exactly when they are the same
object. A product keeps a rational coefficient, which is how exact divisions
like m/32 stay cancellable: (m/32)*32 folds back to m.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional


@dataclass(frozen=True)
class Atom:
    """An opaque multiplicand: a variable, or an irreducible mod/div/pow."""

    kind: str  # "var" | "mod" | "div" | "pow"
    name: str = ""
    args: tuple["Nat", ...] = ()

    def key(self) -> tuple:
        return (self.kind, self.name) + tuple(a.nid for a in self.args)


class Nat:
    """A canonical sum of products. Compare with `is` or `==` (same thing)."""

    __slots__ = ("sop", "nid")

    def __init__(self, sop: tuple, nid: int):
        self.sop = sop  # tuple[(Fraction, tuple[(Atom, int exp), ...]), ...]
        self.nid = nid

    def __repr__(self) -> str:
        return show(self)

    def __hash__(self) -> int:
        return self.nid

    def sort_key(self) -> tuple:
        return _sop_key(self.sop)


_interned: dict[tuple, Nat] = {}
_atoms: dict[tuple, Atom] = {}


def _atom(kind: str, name: str = "", args: tuple = ()) -> Atom:
    a = Atom(kind, name, args)
    k = a.key()
    got = _atoms.get(k)
    if got is None:
        _atoms[k] = a
        got = a
    return got


def _factors_key(factors: tuple) -> tuple:
    return tuple((a.key(), e) for a, e in factors)


def _sop_key(sop: tuple) -> tuple:
    return tuple((c, _factors_key(f)) for c, f in sop)


def _intern(sop: tuple) -> Nat:
    key = _sop_key(sop)
    got = _interned.get(key)
    if got is None:
        got = Nat(sop, len(_interned))
        _interned[key] = got
    return got


def _norm(terms: list) -> Nat:
    # merge products with identical factor tuples, drop zero coefficients
    merged: dict[tuple, list] = {}
    for coeff, factors in terms:
        factors = tuple(sorted((f for f in factors if f[1] != 0), key=lambda fe: (fe[0].key(), fe[1])))
        k = _factors_key(factors)
        slot = merged.get(k)
        if slot is None:
            merged[k] = [coeff, factors]
        else:
            slot[0] += coeff
    out = [(c, f) for c, f in merged.values() if c != 0]
    # constants last, otherwise by factor structure, for stable printing
    out.sort(key=lambda cf: (cf[1] == (), _factors_key(cf[1]), cf[0]))
    return _intern(tuple(out))


def const(value: int) -> Nat:
    if value < 0:
        raise ValueError(f"negative size constant: {value}")
    return _norm([(Fraction(value), ())])


def var(name: str) -> Nat:
    return _norm([(Fraction(1), ((_atom("var", name), 1),))])


def add(a: Nat, b: Nat) -> Nat:
    return _norm(list(a.sop) + list(b.sop))


def sub(a: Nat, b: Nat) -> Nat:
    return _norm(list(a.sop) + [(-c, f) for c, f in b.sop])


def _mul_terms(ta: tuple, tb: tuple) -> tuple:
    ca, fa = ta
    cb, fb = tb
    exps: dict[Atom, int] = {}
    for atom, e in fa + fb:
        exps[atom] = exps.get(atom, 0) + e
    return (ca * cb, tuple((a, e) for a, e in exps.items() if e != 0))


def mul(a: Nat, b: Nat) -> Nat:
    return _norm([_mul_terms(ta, tb) for ta in a.sop for tb in b.sop])


def div(a: Nat, b: Nat) -> Nat:
    """Exact division. Divisions that cannot cancel are kept symbolic."""

    if b.sop == ():
        raise ZeroDivisionError("size division by zero")
    if len(b.sop) == 1:
        coeff, factors = b.sop[0]
        inv = (1 / coeff, tuple((atom, -e) for atom, e in factors))
        return _norm([_mul_terms(t, inv) for t in a.sop])
    return _norm([(Fraction(1), ((_atom("div", args=(a, b)), 1),))])


def mod(a: Nat, b: Nat) -> Nat:
    av, bv = as_int(a), as_int(b)
    if av is not None and bv is not None and bv != 0:
        return const(av % bv)
    return _norm([(Fraction(1), ((_atom("mod", args=(a, b)), 1),))])


def pow(a: Nat, b: Nat) -> Nat:
    bv = as_int(b)
    if bv is not None:
        out = const(1)
        for _ in range(bv):
            out = mul(out, a)
        return out
    return _norm([(Fraction(1), ((_atom("pow", args=(a, b)), 1),))])


def simplify(n: Nat) -> Nat:
    """Identity on interned values: construction already canonicalises."""

    return n


def as_int(n: Nat) -> Optional[int]:
    if n.sop == ():
        return 0
    if len(n.sop) == 1 and n.sop[0][1] == ():
        c = n.sop[0][0]
        if c.denominator == 1:
            return int(c)
    return None


def free_vars(n: Nat) -> set[str]:
    out: set[str] = set()
    for _, factors in n.sop:
        for atom, _ in factors:
            if atom.kind == "var":
                out.add(atom.name)
            else:
                for sub_nat in atom.args:
                    out |= free_vars(sub_nat)
    return out


def subst(n: Nat, env: dict[str, Nat]) -> Nat:
    if not (free_vars(n) & env.keys()):
        return n
    total = const(0)
    for coeff, factors in n.sop:
        term = _norm([(coeff, ())])
        for atom, e in factors:
            if atom.kind == "var" and atom.name in env:
                base = env[atom.name]
            elif atom.kind == "mod":
                base = mod(subst(atom.args[0], env), subst(atom.args[1], env))
            elif atom.kind == "div":
                base = div(subst(atom.args[0], env), subst(atom.args[1], env))
            elif atom.kind == "pow":
                base = pow(subst(atom.args[0], env), subst(atom.args[1], env))
            else:
                base = _norm([(Fraction(1), ((atom, 1),))])
            if e >= 0:
                for _ in range(e):
                    term = mul(term, base)
            else:
                for _ in range(-e):
                    term = div(term, base)
        total = add(total, term)
    return total


def solve_linear(delta: Nat, unknown: str) -> Optional[Nat]:
    """Solve delta == 0 for `unknown` when delta is linear in it.

    Returns the solution, or None when the variable is absent, nonlinear,
    or the division does not come out exact.
    """

    coeff_terms = []
    rest_terms = []
    for coeff, factors in delta.sop:
        hit = [(a, e) for a, e in factors if a.kind == "var" and a.name == unknown]
        if not hit:
            rest_terms.append((coeff, factors))
        elif len(hit) == 1 and hit[0][1] == 1:
            others = tuple((a, e) for a, e in factors if not (a.kind == "var" and a.name == unknown))
            coeff_terms.append((coeff, others))
        else:
            return None
    if not coeff_terms:
        return None
    a = _norm(coeff_terms)
    b = _norm([(-c, f) for c, f in rest_terms])
    if len(a.sop) != 1:
        return None
    sol = div(b, a)
    # reject solutions that still mention the unknown (occurs check)
    if unknown in free_vars(sol):
        return None
    return sol


def _show_product(coeff: Fraction, factors: tuple) -> str:
    num_parts: list[str] = []
    den_parts: list[str] = []
    c = coeff
    if c < 0:
        c = -c
    if c.numerator != 1 or not factors:
        num_parts.append(str(c.numerator))
    if c.denominator != 1:
        den_parts.append(str(c.denominator))
    for atom, e in factors:
        if atom.kind == "var":
            base = atom.name
        elif atom.kind == "mod":
            base = f"({show(atom.args[0])} % {show(atom.args[1])})"
        elif atom.kind == "div":
            base = f"({show(atom.args[0])} / {show(atom.args[1])})"
        else:
            base = f"({show(atom.args[0])} ^ {show(atom.args[1])})"
        mag = abs(e)
        piece = base if mag == 1 else "*".join([base] * mag)
        (num_parts if e > 0 else den_parts).append(piece)
    txt = "*".join(num_parts) if num_parts else "1"
    for d in den_parts:
        txt += f"/{d}"
    return txt


def show(n: Nat) -> str:
    if n.sop == ():
        return "0"
    parts: list[str] = []
    for i, (coeff, factors) in enumerate(n.sop):
        piece = _show_product(coeff, factors)
        if i == 0:
            parts.append(piece if coeff > 0 else f"-{piece}")
        else:
            parts.append(f"+ {piece}" if coeff > 0 else f"- {piece}")
    return " ".join(parts)
