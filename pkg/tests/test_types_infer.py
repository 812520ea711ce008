import pytest

from sges import infer, nat, parser, types
from sges.infer import TypeInferenceError, from_named
from sges.parser import ParseError
from sges.terms import App, Lam, NatApp, NatLam, Prim, Var, show
from sges.types import show_data, show_type

F = types.data(types.scalar())


def arr(n, elem=None):
    e = elem if elem is not None else types.scalar()
    size = nat.var(n) if isinstance(n, str) else nat.const(n)
    return types.data(types.array(size, e))


MM_ENV = {
    "a": arr("m", types.array(nat.var("k"), types.scalar())),
    "b": arr("k", types.array(nat.var("n"), types.scalar())),
}


def test_types_intern():
    t1 = types.fun(F, F)
    t2 = types.fun(types.data(types.scalar()), F)
    assert t1 is t2


def test_show_type_round_trip():
    for src in ["f32", "n.f32", "m.k.f32", "(m * n).f32", "<4>f32",
                "idx(n)", "(f32 * f32)", "f32 -> f32",
                "(f32 -> f32) -> n.f32 -> n.f32",
                "(m/32).32.f32"]:
        ty = parser.parse_type(src)
        again = parser.parse_type(show_type(ty))
        assert ty is again, src


def test_natfun_instantiation():
    split_ty = types.PRIMITIVES["split"]
    inst = types.instantiate_natfun(split_ty, nat.const(32))
    shown = show_type(inst)
    assert "32" in shown and "^0" not in shown


def test_alpha_equivalence_through_indices():
    a = from_named(parser.parse_term(r"\f. \x. f x"))
    b = from_named(parser.parse_term(r"\g. \y. g y"))
    assert show(a) == "lam(lam(app(%1, %0)))"
    assert a == b


def test_unbound_name_errors():
    with pytest.raises(TypeInferenceError):
        from_named(parser.parse_term(r"\x. y"))


def test_apply_non_function_errors():
    with pytest.raises(TypeInferenceError):
        from_named(parser.parse_term("fst 1 2 3"))


def test_add_operand_type_mismatch_errors():
    env = {"xs": arr("n")}
    with pytest.raises(TypeInferenceError):
        from_named(parser.parse_term("add xs 1"), env=env, sizes={"n"})


def test_dot_product_types():
    env = {"xs": arr("n"), "ys": arr("n")}
    t = from_named(
        parser.parse_term(r"reduce add 0 (map (\p. mul (fst p) (snd p)) (zip xs ys))"),
        env=env, sizes={"n"})
    assert show_type(t.ty) == "f32"


def test_split_solves_size_division():
    env = {"xs": arr("n")}
    t = from_named(parser.parse_term("split 32 xs"), env=env, sizes={"n"})
    assert show_type(t.ty) == "(n/32).32.f32"


def test_join_undoes_split():
    env = {"xs": arr("n")}
    t = from_named(parser.parse_term("join (split 32 xs)"), env=env, sizes={"n"})
    assert show_type(t.ty) == "n.f32"


def test_transpose_swaps_sizes():
    env = {"b": MM_ENV["b"]}
    t = from_named(parser.parse_term("transpose b"), env=env, sizes={"n", "k"})
    assert show_type(t.ty) == "n.k.f32"


def test_matmul_program_types():
    src = r"""
      map (\ak. map (\bk.
            reduce add 0 (map (\p. mul (fst p) (snd p)) (zip ak bk)))
        (transpose b)) a
    """
    t = from_named(parser.parse_term(src), env=MM_ENV, sizes={"m", "n", "k"})
    assert show_type(t.ty) == "m.n.f32"


def test_slide_window_arithmetic():
    env = {"xs": arr("n")}
    t = from_named(parser.parse_term("slide 3 1 xs"), env=env, sizes={"n"})
    # sp*q + sz - sp == n  with sz=3 sp=1  =>  q == n - 2
    assert show_type(t.ty) == "(n - 2).3.f32"


def test_vector_sizes():
    env = {"xs": arr("n")}
    t = from_named(parser.parse_term("asVector 32 xs"), env=env, sizes={"n"})
    assert show_type(t.ty) == "(n/32).<32>f32"
    t2 = from_named(parser.parse_term("asScalar (asVector 32 xs)"),
                    env=env, sizes={"n"})
    assert show_type(t2.ty) == "n.f32"


def test_size_lambda():
    t = from_named(parser.parse_term(r"/\n. \xs. join (split [n] xs)"))
    assert isinstance(t, NatLam)
    shown = show_type(t.ty)
    assert shown.startswith("(nat) ->")
    assert "^0" in shown


def test_generate_indexing():
    t = from_named(parser.parse_term(r"(generate (\i. 0) :: n.f32)", patterns=True),
                   sizes={"n"})
    assert show_type(t.ty) == "n.f32"


def test_let_shape():
    env = {"xs": arr("n")}
    t = from_named(parser.parse_term(r"let (toMem xs) (\y. y)"),
                   env=env, sizes={"n"})
    assert show_type(t.ty) == "n.f32"


def test_annotation_mismatch_errors():
    with pytest.raises(TypeInferenceError):
        from_named(parser.parse_term(r"(1 :: n.f32)", patterns=True), sizes={"n"})


def test_parse_error_messages():
    with pytest.raises(ParseError):
        parser.parse_term(r"\x.")
    with pytest.raises(ParseError):
        parser.parse_term("(a b")


def test_surface_print_parse_round_trip():
    cases = [
        (r"map (\x. add x 1) xs", {"xs": arr("n")}),
        (r"reduce add 0 (map (\p. mul (fst p) (snd p)) (zip xs ys))",
         {"xs": arr("n"), "ys": arr("n")}),
        (r"join (split 32 xs)", {"xs": arr("n")}),
        (r"map (\r. slide 3 1 r) m0", {"m0": arr("q", types.array(nat.var("n"), types.scalar()))}),
    ]
    for src, env in cases:
        t = from_named(parser.parse_term(src), env=env,
                       sizes={"n", "q", "m", "k"})
        printed = parser.show_surface(t)
        t2 = from_named(parser.parse_term(printed), env=env,
                        sizes={"n", "q", "m", "k"})
        assert t == t2, printed
