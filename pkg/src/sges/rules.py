"""Rule files and the built-in rule libraries.

A rule file holds one rule per block:

    rule NAME: LHS ~> RHS where not_free(?v, i) ...

written in the term syntax with ?var pattern variables.  Blocks may span
lines; everything up to the next `rule` keyword belongs to the current
block, and # starts a comment.  The built-in libraries live as such files
under assets/rules and are loaded by name; one library member, the map
exchange, is built programmatically because its right-hand side swaps the
two innermost binders, which a textual template cannot express.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Union

from . import terms, types
from .egraph import EGraph
from .rewrite import (CompiledRule, Extractor, Match, RuleError, compile_rule,
                      match_term, shift_step_rule, subst_step_rule)
from .terms import App, Lam, Prim, Term, Var

LIBRARIES = ("eta-beta", "fusion", "fission", "binomial",
             "mm-split", "mm-reorder", "mm-store", "mm-lower")


class RuleSet(tuple):
    """Compiled rules plus the application mode they expect.

    With `explicit` set, instantiation leaves substitution and shift
    nodes in the graph for the step rules to reduce, instead of
    substituting eagerly during application.
    """

    explicit: bool = False

    def __new__(cls, rules: Iterable[CompiledRule] = (), explicit: bool = False):
        self = super().__new__(cls, tuple(rules))
        self.explicit = explicit
        return self

    def __repr__(self) -> str:
        tag = " explicit" if self.explicit else ""
        return f"<{len(self)} rules{tag}>"


def explicit_subst_mode(rules: Iterable[CompiledRule]) -> RuleSet:
    """The same rules, switched to small-step substitution.

    Adds the two propagation rules that push subst and shift nodes down
    one constructor at a time.
    """

    return RuleSet(tuple(rules) + (subst_step_rule(), shift_step_rule()),
                   explicit=True)


# ---------------------------------------------------------------------------
# Rule file parsing.

_COND_RE = re.compile(r"not_free\(\s*(\?[^\s,()]+)\s*,\s*(\d+)\s*\)")
_NAME_RE = re.compile(r"\s*([^\s:]+)\s*:")


def parse_rule_blocks(text: str) -> list[tuple[str, str, str, tuple]]:
    """Split rule file text into (name, lhs, rhs, conds) tuples."""

    src = "\n".join(ln.split("#", 1)[0] for ln in text.splitlines())
    chunks = re.split(r"(?:^|\n)\s*rule\s+", src)
    if chunks[0].strip():
        head = chunks[0].strip().splitlines()[0]
        raise RuleError(f"expected 'rule NAME: ...', got {head!r}")
    out = []
    for chunk in chunks[1:]:
        if not chunk.strip():
            continue
        m = _NAME_RE.match(chunk)
        if m is None:
            head = chunk.strip().splitlines()[0]
            raise RuleError(f"missing ':' after rule name in {head!r}")
        name = m.group(1)
        body = chunk[m.end():]
        if "~>" not in body:
            raise RuleError(f"{name}: missing '~>'")
        lhs, rhs = body.split("~>", 1)
        conds: tuple = ()
        parts = re.split(r"\bwhere\b", rhs, maxsplit=1)
        if len(parts) == 2:
            rhs, cond_src = parts
            conds = tuple((v, int(i)) for v, i in _COND_RE.findall(cond_src))
            leftover = _COND_RE.sub("", cond_src).replace(",", "").strip()
            if leftover or not conds:
                raise RuleError(f"{name}: conditions must be not_free(?v, i), "
                                f"got {cond_src.strip()[:60]!r}")
        out.append((name, lhs.strip(), rhs.strip(), conds))
    return out


def parse_rules(text: str, env=None) -> RuleSet:
    """Compile every rule in rule file text."""

    seen: set[str] = set()
    rules = []
    for name, lhs, rhs, conds in parse_rule_blocks(text):
        if name in seen:
            raise RuleError(f"duplicate rule name {name!r}")
        seen.add(name)
        rules.append(compile_rule(name, lhs, rhs, conds, env=env))
    return RuleSet(rules)


def load_rules(path: Union[str, Path]) -> RuleSet:
    """Compile the rule file at path."""

    return parse_rules(Path(path).read_text())


# ---------------------------------------------------------------------------
# The map exchange.  map (lam a. map (lam b. e) y) x computes a grid of
# e-values; so does mapping over y first and x second, with the grid
# transposed back and the two binders of e swapped.  The swap is the part
# no pattern template can write down, hence the programmatic applier.

def _swap_top_two(t: Term, depth: int = 0) -> Term:
    # exchange de Bruijn indices depth and depth+1
    if isinstance(t, Var):
        if t.idx == depth:
            return Var(t.ty, depth + 1)
        if t.idx == depth + 1:
            return Var(t.ty, depth)
        return t
    if isinstance(t, Lam):
        return Lam(t.ty, _swap_top_two(t.body, depth + 1))
    cs = terms.children(t)
    if not cs:
        return t
    return terms.with_children(t, tuple(_swap_top_two(c, depth) for c in cs))


def _exchanged_maps(e: Term, y: Term, x: Term) -> Term:
    """transpose (map (lam b. map (lam a. e') x) y) with e's binders swapped.

    y must not use binder a (checked by the applier); x is shifted to make
    room for b.
    """

    D, arr = types.data, types.array
    dx, dy, de = x.ty.data, y.ty.data, e.ty.data
    nx, sa = dx.size, dx.elem
    ny, sb = dy.size, dy.elem
    e2 = _swap_top_two(e)
    x1 = terms.shift(x, 1, 0)
    inner_lam = Lam(types.fun(D(sa), D(de)), e2)
    inner_map = Prim(types.fun_chain(inner_lam.ty, D(arr(nx, sa)), D(arr(nx, de))), "map")
    inner = App(D(arr(nx, de)),
                App(types.fun(D(arr(nx, sa)), D(arr(nx, de))), inner_map, inner_lam), x1)
    outer_lam = Lam(types.fun(D(sb), inner.ty), inner)
    outer_map = Prim(types.fun_chain(outer_lam.ty, D(arr(ny, sb)), D(arr(ny, arr(nx, de)))), "map")
    outer = App(D(arr(ny, arr(nx, de))),
                App(types.fun(D(arr(ny, sb)), D(arr(ny, arr(nx, de)))), outer_map, outer_lam), y)
    return App(D(arr(nx, arr(ny, de))),
               Prim(types.fun(outer.ty, D(arr(nx, arr(ny, de)))), "transpose"), outer)


def exchange_maps_rule() -> CompiledRule:
    """map (lam a. map (lam b. ?e) ?y) ?x rewritten with the maps swapped.

    Sound when ?y does not mention the outer binder, so every row maps
    over the same array and the result is a rectangular grid.
    """

    rule = compile_rule("exchange-maps", "map (lam a. map (lam b. ?e) ?y) ?x",
                        conds=(("?y", 0),))

    def applier(g: EGraph, r: CompiledRule, m: Match) -> bool:
        # programmatic appliers check their own conditions
        if 0 in g.free_of(m.bound["?y"]):
            return False
        ex = Extractor(g)
        e = ex.term(m.bound["?e"])
        y = ex.term(m.bound["?y"])
        x = ex.term(m.bound["?x"])
        if e is None or y is None or x is None:
            return False
        res = _exchanged_maps(e, terms.shift(y, -1, 0), x)
        c = g.add_term(res)
        root = g.find(m.root)
        if root == g.find(c):
            return False
        g.union(root, c)
        return True

    def term_applier(t: Term):
        m = match_term(rule, t)
        if m is None:
            return None
        binds = m.term_binds
        if 0 in terms.free_indices(binds["?y"]):
            return None
        return _exchanged_maps(binds["?e"], terms.shift(binds["?y"], -1, 0),
                               binds["?x"])

    rule.applier = applier
    rule.term_applier = term_applier
    return rule


# ---------------------------------------------------------------------------
# Built-in libraries.

def _asset_text(name: str) -> str:
    return resources.files("sges").joinpath(f"assets/rules/{name}.rules").read_text()


@lru_cache(maxsize=None)
def rule_library(name: str) -> RuleSet:
    """The built-in rule set called name; see LIBRARIES for the choices."""

    if name not in LIBRARIES:
        known = ", ".join(LIBRARIES)
        raise RuleError(f"unknown rule library {name!r} (one of: {known})")
    rules = list(parse_rules(_asset_text(name)))
    if name == "mm-reorder":
        rules.append(exchange_maps_rule())
    return RuleSet(rules)
