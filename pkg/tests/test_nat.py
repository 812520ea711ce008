import random

from sges import nat


def test_constants_fold():
    assert nat.as_int(nat.add(nat.const(2), nat.const(3))) == 5
    assert nat.as_int(nat.mul(nat.const(4), nat.const(8))) == 32
    assert nat.as_int(nat.sub(nat.const(7), nat.const(7))) == 0


def test_interning_gives_identity():
    a = nat.add(nat.var("n"), nat.const(1))
    b = nat.add(nat.const(1), nat.var("n"))
    assert a is b


def test_mul_commutes_and_associates():
    n, m, k = nat.var("n"), nat.var("m"), nat.var("k")
    assert nat.mul(n, nat.mul(m, k)) is nat.mul(nat.mul(k, n), m)


def test_distribution():
    n, m = nat.var("n"), nat.var("m")
    lhs = nat.mul(nat.add(n, m), nat.const(3))
    rhs = nat.add(nat.mul(n, nat.const(3)), nat.mul(m, nat.const(3)))
    assert lhs is rhs


def test_division_by_constant_folds():
    n = nat.var("n")
    # (n * 4) / 4 == n
    assert nat.div(nat.mul(n, nat.const(4)), nat.const(4)) is n
    # n / 32 * 32 == n
    assert nat.mul(nat.div(n, nat.const(32)), nat.const(32)) is n


def test_division_by_variable_folds_monomial():
    n, m = nat.var("n"), nat.var("m")
    assert nat.div(nat.mul(n, m), m) is n


def test_opaque_division_kept():
    n, m = nat.var("n"), nat.var("m")
    d = nat.div(nat.add(n, nat.const(1)), m)
    assert nat.as_int(d) is None
    assert "/" in nat.show(d)


def test_subtraction_cancels():
    n, m = nat.var("n"), nat.var("m")
    s = nat.sub(nat.add(n, m), m)
    assert s is n


def test_show_round_trip_simple():
    n = nat.var("n")
    expr = nat.add(nat.mul(n, nat.const(2)), nat.const(5))
    assert nat.show(expr) == "2*n + 5"


def test_free_vars():
    e = nat.add(nat.mul(nat.var("n"), nat.var("m")), nat.const(3))
    assert nat.free_vars(e) == {"n", "m"}
    assert nat.free_vars(nat.const(9)) == set()


def test_subst():
    n, m = nat.var("n"), nat.var("m")
    e = nat.add(nat.mul(n, nat.const(2)), m)
    out = nat.subst(e, {"n": nat.const(3), "m": nat.var("k")})
    assert out is nat.add(nat.const(6), nat.var("k"))


def test_subst_inside_mod():
    e = nat.mod(nat.var("n"), nat.const(8))
    assert nat.as_int(nat.subst(e, {"n": nat.const(21)})) == 5


def test_solve_linear_simple():
    # 32 * ?x - n == 0  =>  ?x = n / 32
    x, n = nat.var("?x"), nat.var("n")
    delta = nat.sub(nat.mul(nat.const(32), x), n)
    sol = nat.solve_linear(delta, "?x")
    assert sol is nat.div(n, nat.const(32))


def test_solve_linear_exact_int():
    x = nat.var("?x")
    delta = nat.sub(nat.mul(nat.const(4), x), nat.const(20))
    assert nat.as_int(nat.solve_linear(delta, "?x")) == 5


def test_solve_linear_occurs_check():
    x = nat.var("?x")
    # ?x * ?x - 4 is not linear in ?x
    delta = nat.sub(nat.mul(x, x), nat.const(4))
    assert nat.solve_linear(delta, "?x") is None


def test_solve_linear_coefficient_with_vars():
    # m * ?x - m * n == 0  =>  ?x = n
    x, n, m = nat.var("?x"), nat.var("n"), nat.var("m")
    delta = nat.sub(nat.mul(m, x), nat.mul(m, n))
    assert nat.solve_linear(delta, "?x") is nat.var("n")


def test_random_arithmetic_matches_ints():
    """Evaluate random size expressions two ways: symbolically then
    substituting, vs substituting into leaves first."""
    rng = random.Random(7)
    names = ["n", "m", "k"]

    def gen(depth):
        pick = rng.choice(["add", "mul", "const", "var"])
        if pick == "const" or depth == 0:
            v = rng.randint(0, 9)
            return nat.const(v), (lambda env, v=v: v)
        if pick == "var":
            nm = rng.choice(names)
            return nat.var(nm), (lambda env, nm=nm: env[nm])
        l, lf = gen(depth - 1)
        r, rf = gen(depth - 1)
        if pick == "add":
            return nat.add(l, r), (lambda env: lf(env) + rf(env))
        return nat.mul(l, r), (lambda env: lf(env) * rf(env))

    for _ in range(300):
        e, f = gen(3)
        env = {nm: rng.randint(0, 7) for nm in names}
        sub = nat.subst(e, {nm: nat.const(v) for nm, v in env.items()})
        assert nat.as_int(sub) == f(env)
