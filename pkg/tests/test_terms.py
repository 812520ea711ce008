"""Shift and substitution, checked against a fresh-name reference model.

The reference renders De Bruijn terms to a named tree with gensym'd
binder names, substitutes by the textbook capture-avoiding definition,
and converts back. Index arithmetic never enters the reference path, so
agreement pins down shift/substitute independently.
"""

import itertools
import random

import pytest

from sges import nat, types, terms
from sges.terms import (App, Lam, Lit, Prim, Term, Var,
                        beta_eta_normalize, free_indices, shift, substitute)

F = types.data(types.scalar())
FF = types.fun(F, F)


def v(i):
    return Var(F, i)


def lam(b):
    return Lam(FF, b)


def app(f, a):
    return App(F, f, a)


# -- reference model --

class RVar:
    def __init__(self, name):
        self.name = name


class RLam:
    def __init__(self, name, body):
        self.name = name
        self.body = body


class RApp:
    def __init__(self, fn, arg):
        self.fn = fn
        self.arg = arg


class RLeaf:
    def __init__(self, tag):
        self.tag = tag


_fresh = itertools.count()


def gensym():
    return f"g{next(_fresh)}"


def to_named(t, stack):
    if isinstance(t, Var):
        return RVar(stack[-1 - t.idx])
    if isinstance(t, Lam):
        x = gensym()
        return RLam(x, to_named(t.body, stack + [x]))
    if isinstance(t, App):
        return RApp(to_named(t.fn, stack), to_named(t.arg, stack))
    return RLeaf((type(t).__name__, getattr(t, "name", getattr(t, "value", None))))


def r_free(t):
    if isinstance(t, RVar):
        return {t.name}
    if isinstance(t, RLam):
        return r_free(t.body) - {t.name}
    if isinstance(t, RApp):
        return r_free(t.fn) | r_free(t.arg)
    return set()


def r_subst(t, name, repl):
    if isinstance(t, RVar):
        return repl if t.name == name else t
    if isinstance(t, RLam):
        if t.name == name:
            return t
        if t.name in r_free(repl):
            fresh = gensym()
            body = r_subst(t.body, t.name, RVar(fresh))
            return RLam(fresh, r_subst(body, name, repl))
        return RLam(t.name, r_subst(t.body, name, repl))
    if isinstance(t, RApp):
        return RApp(r_subst(t.fn, name, repl), r_subst(t.arg, name, repl))
    return t


def alpha_eq(a, b, env=None):
    env = env or {}
    if isinstance(a, RVar) and isinstance(b, RVar):
        return env.get(a.name, a.name) == b.name
    if isinstance(a, RLam) and isinstance(b, RLam):
        return alpha_eq(a.body, b.body, {**env, a.name: b.name})
    if isinstance(a, RApp) and isinstance(b, RApp):
        return alpha_eq(a.fn, b.fn, env) and alpha_eq(a.arg, b.arg, env)
    if isinstance(a, RLeaf) and isinstance(b, RLeaf):
        return a.tag == b.tag
    return False


def random_term(rng, depth, bound):
    roll = rng.random()
    if depth == 0 or (roll < 0.25 and bound > 0):
        if bound > 0 and rng.random() < 0.8:
            return v(rng.randrange(bound))
        return Lit(F, float(rng.randrange(4)))
    if roll < 0.55:
        return lam(random_term(rng, depth - 1, bound + 1))
    return app(random_term(rng, depth - 1, bound),
               random_term(rng, depth - 1, bound))


# -- shift --

def test_shift_frees_only():
    # under one binder, index 1 is free and moves; index 0 is bound and stays
    assert shift(lam(v(1)), 2) == lam(v(3))
    assert shift(lam(v(0)), 2) == lam(v(0))


def test_shift_respects_cutoff():
    t = app(v(0), v(3))
    assert shift(t, 5, 2) == app(v(0), v(8))


def test_shift_zero_is_identity():
    rng = random.Random(11)
    for _ in range(50):
        t = random_term(rng, 4, 0)
        assert shift(t, 0) == t


def test_shift_composes():
    rng = random.Random(12)
    for _ in range(200):
        t = random_term(rng, 4, 2)
        c = rng.randrange(3)
        a, b = rng.randrange(3), rng.randrange(3)
        assert shift(shift(t, a, c), b, c) == shift(t, a + b, c)


def test_negative_shift_below_zero_raises():
    with pytest.raises(ValueError):
        shift(v(0), -1)


def test_negative_shift_inverts_positive():
    rng = random.Random(13)
    for _ in range(100):
        t = random_term(rng, 4, 3)
        assert shift(shift(t, 2), -2) == t


def test_free_indices():
    assert free_indices(lam(app(v(0), v(2)))) == {1}
    assert free_indices(v(4)) == {4}
    assert free_indices(lam(v(0))) == set()


# -- substitution vs the reference --

def test_substitute_matches_reference_on_random_terms():
    rng = random.Random(991)
    for i in range(1000):
        # a closed redex (λ body) arg, both generated under no free vars
        body = random_term(rng, 5, 1)
        arg = random_term(rng, 4, 0)
        got = substitute(body, arg)

        named_lam = to_named(lam(body), [])
        named_arg = to_named(arg, [])
        want = r_subst(named_lam.body, named_lam.name, named_arg)
        assert alpha_eq(to_named(got, []), want), f"case {i}"


def test_substitute_under_binders_with_free_vars():
    rng = random.Random(992)
    for i in range(400):
        free = rng.randrange(1, 3)
        ctx = [gensym() for _ in range(free)]
        body = random_term(rng, 4, free + 1)
        arg = random_term(rng, 3, free)
        got = substitute(body, arg)

        named_lam = to_named(lam(body), ctx)
        named_arg = to_named(arg, ctx)
        want = r_subst(named_lam.body, named_lam.name, named_arg)
        assert alpha_eq(to_named(got, ctx), want), f"case {i}"


# -- beta/eta --

def test_beta_simple():
    t = app(lam(v(0)), Lit(F, 3.0))
    assert beta_eta_normalize(t) == Lit(F, 3.0)


def test_beta_discards():
    t = app(lam(Lit(F, 1.0)), Lit(F, 2.0))
    assert beta_eta_normalize(t) == Lit(F, 1.0)


def test_beta_nested():
    # (λx. λy. x) a b  ~>  a
    inner = Lam(FF, v(1))
    t = app(app(Lam(types.fun(F, FF), inner), Lit(F, 5.0)), Lit(F, 6.0))
    assert beta_eta_normalize(t) == Lit(F, 5.0)


def test_eta_reduces():
    f = Prim(FF, "f")
    assert beta_eta_normalize(lam(App(F, f, v(0)))) == f


def test_eta_blocked_when_var_used():
    # λx. x x is eta-stable
    t = lam(app(v(0), v(0)))
    assert beta_eta_normalize(t) == t


def test_normalize_is_idempotent_on_random_terms():
    rng = random.Random(37)
    done = 0
    for _ in range(200):
        t = random_term(rng, 5, 0)
        try:
            # untyped random terms may diverge; those are not the point here
            n1 = beta_eta_normalize(t, budget=2000)
        except terms.BudgetExceeded:
            continue
        assert beta_eta_normalize(n1) == n1
        done += 1
    assert done > 150


def test_budget_raises():
    # Ω has no normal form
    omega = lam(app(v(0), v(0)))
    t = app(omega, omega)
    with pytest.raises(terms.BudgetExceeded):
        beta_eta_normalize(t, budget=500)
