"""Reference interpreter and randomized rule soundness checking.

Terms evaluate to plain Python values: floats for scalars, lists for arrays
and vectors, pairs as tuples, ints for index values, closures for functions.
Inputs are small integer-valued floats, so every library rule must preserve
results exactly; no tolerance is involved anywhere.
"""

from __future__ import annotations

import math
import random
from fractions import Fraction
from typing import Callable, Optional

from . import nat, terms, types
from .nat import Nat
from .rewrite import CompiledRule, _ground_term, _ground_type, _is_flex, instantiate
from .terms import App, Lam, Lit, NatApp, NatLam, Prim, Term, Var
from .types import Data, Type


class EvalError(RuntimeError):
    pass


def nat_eval(n: Nat, nenv: dict[str, int]) -> int:
    got = nat.as_int(nat.subst(n, {k: nat.const(v) for k, v in nenv.items()}))
    if got is None:
        raise EvalError(f"size {nat.show(n)} does not reduce under {nenv}")
    return got


def _chunks(xs: list, size: int) -> list:
    if size <= 0 or len(xs) % size:
        raise EvalError(f"cannot split {len(xs)} elements into chunks of {size}")
    return [xs[i:i + size] for i in range(0, len(xs), size)]


def _zipwith(op: Callable, a, b):
    if isinstance(a, list):
        if len(a) != len(b):
            raise EvalError("elementwise arity mismatch")
        return [_zipwith(op, x, y) for x, y in zip(a, b)]
    if isinstance(a, tuple):
        return tuple(_zipwith(op, x, y) for x, y in zip(a, b))
    return op(a, b)


def _prim_value(name: str, ty: Type, nenv: dict[str, int]):
    if name in ("map", "mapSeq", "mapPar"):
        return lambda f: lambda xs: [f(x) for x in xs]
    if name in ("reduce", "reduceSeq", "reduceSeqUnroll"):
        def red(f):
            def with_init(init):
                def run(xs):
                    acc = init
                    for x in xs:
                        acc = f(acc)(x)
                    return acc
                return run
            return with_init
        return red
    if name == "split":
        return lambda sz: lambda xs: _chunks(xs, sz)
    if name == "join":
        return lambda xs: [y for x in xs for y in x]
    if name == "transpose":
        return lambda xs: [list(col) for col in zip(*xs)] if xs else []
    if name == "slide":
        def slide(sz):
            def with_step(sp):
                def run(xs):
                    if sp <= 0 or (len(xs) - sz) % sp:
                        raise EvalError("window does not tile the array")
                    count = (len(xs) - sz) // sp + 1
                    return [xs[i * sp:i * sp + sz] for i in range(count)]
                return run
            return with_step
        return slide
    if name == "zip":
        return lambda a: lambda b: [(x, y) for x, y in zip(a, b)]
    if name == "unzip":
        return lambda ps: ([p[0] for p in ps], [p[1] for p in ps])
    if name == "fst":
        return lambda p: p[0]
    if name == "snd":
        return lambda p: p[1]
    if name == "generate":
        # the result length lives only in the instantiated type
        count = nat_eval(ty.res.data.size, nenv)
        return lambda f: [f(i) for i in range(count)]
    if name == "toMem":
        return lambda x: x
    if name == "let":
        return lambda x: lambda f: f(x)
    if name == "asVector":
        return lambda w: lambda xs: _chunks(xs, w)
    if name == "asScalar":
        return lambda xs: [y for x in xs for y in x]
    if name == "vectorFromScalar":
        width = nat_eval(ty.res.data.size, nenv)
        return lambda x: [x] * width
    if name == "add":
        return lambda a: lambda b: _zipwith(lambda x, y: x + y, a, b)
    if name == "mul":
        return lambda a: lambda b: _zipwith(lambda x, y: x * y, a, b)
    if name == "comp":
        return lambda f: lambda g: lambda x: f(g(x))
    if name == "dot":
        return lambda a: lambda b: float(sum(x * y for x, y in zip(a, b)))
    if name in ("weightsV", "weightsH"):
        return [1.0, 2.0, 1.0]
    if name == "weights2d":
        return [[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]]
    raise EvalError(f"no value for primitive {name!r}")


def eval_term(t: Term, env: tuple = (), amb: Optional[dict] = None,
              nenv: Optional[dict[str, int]] = None):
    """Evaluate a term; free variables index into env, innermost first."""
    amb = amb or {}
    nenv = nenv or {}
    if isinstance(t, Var):
        if t.idx >= len(env):
            raise EvalError(f"unbound index {t.idx}")
        return env[t.idx]
    if isinstance(t, Lam):
        return lambda v: eval_term(t.body, (v,) + env, amb, nenv)
    if isinstance(t, App):
        return eval_term(t.fn, env, amb, nenv)(eval_term(t.arg, env, amb, nenv))
    if isinstance(t, NatLam):
        def at_size(k: int):
            inner = {"^" + str(int(d[1:]) + 1): v
                     for d, v in nenv.items() if d.startswith("^")}
            inner.update({d: v for d, v in nenv.items() if not d.startswith("^")})
            inner["^0"] = k
            return eval_term(t.body, env, amb, inner)
        return at_size
    if isinstance(t, NatApp):
        return eval_term(t.fn, env, amb, nenv)(nat_eval(t.nat, nenv))
    if isinstance(t, Prim):
        if t.name in amb:
            return amb[t.name]
        return _prim_value(t.name, t.ty, nenv)
    if isinstance(t, Lit):
        return t.value
    raise EvalError(f"cannot evaluate {t!r}")


# ---------------------------------------------------------------------------
# Random values, and value equality at a type.

def random_data(rng: random.Random, depth: int = 2) -> Data:
    pick = rng.randrange(4 if depth > 0 else 1)
    if pick == 0:
        return types.scalar()
    if pick == 1:
        return types.pair(random_data(rng, depth - 1), random_data(rng, depth - 1))
    if pick == 2:
        return types.array(nat.const(rng.randint(1, 3)), random_data(rng, depth - 1))
    return types.vector(nat.const(rng.randint(1, 3)), types.scalar())


def random_value(ty: Type, rng: random.Random, nenv: dict[str, int]):
    if ty.kind == "data":
        return _random_data_value(ty.data, rng, nenv)
    if ty.kind == "fun":
        seed = rng.getrandbits(32)

        def fn(v):
            inner = random.Random((seed, repr(v)))
            return random_value(ty.res, inner, nenv)
        return fn
    if ty.kind == "natfun":
        seed = rng.getrandbits(32)

        def at_size(k: int):
            raise EvalError("size-polymorphic values cannot be sampled")
        return at_size
    raise EvalError(f"cannot sample a value of type {types.show_type(ty)}")


def _random_data_value(d: Data, rng: random.Random, nenv: dict[str, int]):
    if d.kind == "scalar":
        return float(rng.randint(0, 7))
    if d.kind in ("array", "vector"):
        count = nat_eval(d.size, nenv)
        return [_random_data_value(d.elem, rng, nenv) for _ in range(count)]
    if d.kind == "pair":
        return (_random_data_value(d.fst, rng, nenv),
                _random_data_value(d.snd, rng, nenv))
    if d.kind == "index":
        return rng.randrange(nat_eval(d.size, nenv))
    raise EvalError(f"cannot sample {types.show_data(d)}")


def equal_at_type(ty: Type, a, b, rng: random.Random,
                  nenv: dict[str, int], probes: int = 3) -> bool:
    """Exact equality; functions are compared on random arguments."""
    if ty.kind == "fun":
        for _ in range(probes):
            v = random_value(ty.arg, rng, nenv)
            if not equal_at_type(ty.res, a(v), b(v), rng, nenv, probes):
                return False
        return True
    if ty.kind == "natfun":
        for k in (1, 2):
            inst = types.instantiate_natfun(ty, nat.const(k))
            if not equal_at_type(inst, a(k), b(k), rng, nenv, probes):
                return False
        return True
    return _equal_values(a, b)


def _equal_values(a, b) -> bool:
    if isinstance(a, list):
        return (isinstance(b, list) and len(a) == len(b)
                and all(_equal_values(x, y) for x, y in zip(a, b)))
    if isinstance(a, tuple):
        return (isinstance(b, tuple) and len(a) == len(b)
                and all(_equal_values(x, y) for x, y in zip(a, b)))
    return a == b


# ---------------------------------------------------------------------------
# Rule instance generation.

def _nat_exprs_of_rule(rule: CompiledRule):
    def walk_type(t: Type):
        if t.kind == "data":
            yield from types.data_nats(t.data)
        elif t.kind == "fun":
            yield from walk_type(t.arg)
            yield from walk_type(t.res)
        elif t.kind == "natfun":
            yield from walk_type(t.body)

    for side in (rule.lhs, rule.rhs):
        if side is None:
            continue
        for u in terms.subterms(side):
            yield from walk_type(u.ty)
            if isinstance(u, NatApp):
                yield u.nat


def _divisibility(rule: CompiledRule) -> dict[str, int]:
    """Least multiple each size variable must respect for exact division."""
    need: dict[str, int] = {}
    for n in _nat_exprs_of_rule(rule):
        for coeff, factors in n.sop:
            if coeff.denominator == 1:
                continue
            vs = [a.name for a, e in factors if a.kind == "var" and e > 0]
            for v in vs:
                if _is_flex(v):
                    need[v] = math.lcm(need.get(v, 1), coeff.denominator)
    return need


def sample_sizes(rule: CompiledRule, rng: random.Random) -> dict[str, Nat]:
    need = _divisibility(rule)
    out = {}
    for v in rule.flex_n:
        if v in need:
            # constrained sizes take the smallest admissible multiples
            out[v] = nat.const(need[v] * rng.randint(1, 2))
        else:
            out[v] = nat.const(rng.randint(1, 4))
    return out


class _Synth:
    """Builds random well-typed closed-over-ambients terms."""

    def __init__(self, rng: random.Random, nenv: dict[str, int]):
        self.rng = rng
        self.nenv = nenv
        self.amb: dict[str, Term] = {}
        self.amb_types: dict[str, Type] = {}

    def ambient(self, ty: Type) -> Term:
        name = f"in{len(self.amb_types)}"
        self.amb_types[name] = ty
        return Prim(ty, name)

    def term(self, ty: Type, stack: tuple[Type, ...], banned: frozenset[int],
             depth: int) -> Term:
        rng = self.rng
        if ty.kind == "fun":
            body = self.term(ty.res, (ty.arg,) + stack,
                             frozenset(i + 1 for i in banned), depth - 1)
            return Lam(ty, body)
        candidates = [i for i, bty in enumerate(stack)
                      if bty == ty and i not in banned]
        roll = rng.random()
        if candidates and roll < 0.45:
            return Var(ty, rng.choice(candidates))
        if depth > 0 and ty == _F32 and roll < 0.75:
            op = rng.choice(("add", "mul"))
            lhs = self.term(ty, stack, banned, depth - 1)
            rhs = self.term(ty, stack, banned, depth - 1)
            return App(ty, App(types.fun(ty, ty), Prim(types.fun(ty, types.fun(ty, ty)), op), lhs), rhs)
        if ty == _F32 and roll < 0.85:
            return Lit(ty, float(rng.randint(0, 7)))
        return self.ambient(ty)


_F32 = types.data(types.scalar())


def make_instance(rule: CompiledRule, rng: random.Random
                  ) -> Optional[tuple[Term, Term, dict, dict[str, int]]]:
    """One applicable lhs instance plus the rule's rhs for it.

    Returns (lhs term, rhs term, ambient values, size env), or None when the
    sampled types cannot support an instance.
    """
    nmap = sample_sizes(rule, rng)
    tmap = {v: types.data(random_data(rng)) for v in rule.flex_t}
    dmap = {v: random_data(rng) for v in rule.flex_d}
    nenv: dict[str, int] = {}

    lhs_g = _ground_term(rule.lhs, tmap, dmap, nmap)
    synth = _Synth(rng, nenv)
    binds: dict[str, Term] = {}
    for u in terms.subterms(lhs_g):
        if isinstance(u, Prim) and _is_flex(u.name) and u.name not in binds:
            banned = frozenset(i for v, i in rule.conds if v == u.name)
            stack = tuple(_ground_type(b, tmap, dmap, nmap)
                          for b in rule.binders[u.name])
            binds[u.name] = synth.term(u.ty, stack, banned, depth=3)

    lhs_inst = _fill_holes(lhs_g, binds)
    if rule.rhs is not None:
        rhs_inst = instantiate(rule, binds, tmap, dmap, nmap)
    else:
        from .rewrite import apply_rule_term
        rhs_inst = apply_rule_term(rule, lhs_inst)
        if rhs_inst is None:
            return None
    amb_values = {name: random_value(ty, rng, nenv)
                  for name, ty in synth.amb_types.items()}
    return lhs_inst, rhs_inst, amb_values, nenv


def _fill_holes(t: Term, binds: dict[str, Term]) -> Term:
    if isinstance(t, Prim) and t.name in binds:
        return binds[t.name]
    cs = terms.children(t)
    if not cs:
        return t
    return terms.with_children(t, tuple(_fill_holes(c, binds) for c in cs))


def check_rule(rule: CompiledRule, trials: int = 200, seed: int = 0
               ) -> tuple[int, list[str]]:
    """Evaluate random applicable instances of a rule on both sides.

    Returns how many instances were checked and descriptions of any
    disagreements found.
    """
    rng = random.Random((seed, rule.name))
    checked = 0
    failures: list[str] = []
    attempts = 0
    while checked < trials and attempts < trials * 8:
        attempts += 1
        try:
            got = make_instance(rule, rng)
            if got is None:
                continue
            lhs_inst, rhs_inst, amb, nenv = got
            va = eval_term(lhs_inst, (), amb, nenv)
            vb = eval_term(rhs_inst, (), amb, nenv)
            if not equal_at_type(lhs_inst.ty, va, vb, rng, nenv):
                failures.append(
                    f"{rule.name}: {terms.show(lhs_inst)} disagrees with "
                    f"{terms.show(rhs_inst)}")
                if len(failures) >= 3:
                    break
        except EvalError:
            continue
        else:
            checked += 1
    return checked, failures
