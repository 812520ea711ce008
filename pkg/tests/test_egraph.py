import random

import pytest

from sges import types
from sges.egraph import EGraph, ENode, term_size_cost
from sges.infer import from_named
from sges.parser import parse_term

F = types.data(types.scalar())


def leaf(sym):
    return ENode(sym, None, ())


def t(src, env=None, sizes=None, patterns=False):
    return from_named(parse_term(src, patterns=patterns), env=env, sizes=sizes)


# -- the fusion-past-transpose example, first-order flavor --

def build_initial(eg):
    """(map (map f)) . (transpose . (map (map g))) as unary map / binary comp."""
    f = eg.add(leaf("f"), F)
    g = eg.add(leaf("g"), F)
    tr = eg.add(leaf("transpose"), F)
    mf = eg.add(ENode("map", None, (f,)), F)
    mmf = eg.add(ENode("map", None, (mf,)), F)
    mg = eg.add(ENode("map", None, (g,)), F)
    mmg = eg.add(ENode("map", None, (mg,)), F)
    right = eg.add(ENode("comp", None, (tr, mmg)), F)
    root = eg.add(ENode("comp", None, (mmf, right)), F)
    return f, g, tr, mmf, mmg, root


def test_initial_graph_is_one_node_per_class():
    eg = EGraph(audit=True)
    build_initial(eg)
    assert eg.node_count() == 9
    assert eg.class_count() == 9


def test_saturated_extraction_beats_initial():
    eg = EGraph(audit=True)
    f, g, tr, mmf, mmg, root = build_initial(eg)
    best = eg.extract_best(term_size_cost)
    assert best[eg.find(root)][0] == 9

    # record (map (map (f . g))) . transpose as equal to the root
    fg = eg.add(ENode("comp", None, (f, g)), F)
    mfg = eg.add(ENode("map", None, (fg,)), F)
    mmfg = eg.add(ENode("map", None, (mfg,)), F)
    fused = eg.add(ENode("comp", None, (mmfg, tr)), F)
    eg.union(root, fused)
    eg.rebuild()

    best = eg.extract_best(term_size_cost)
    assert best[eg.find(root)][0] == 7
    assert best[eg.find(root)][1] == eg.canonicalize(
        ENode("comp", None, (mmfg, tr)))


def test_union_is_idempotent():
    eg = EGraph(audit=True)
    a = eg.add(leaf("a"), F)
    assert eg.union(a, a) == a


def test_add_existing_different_type_errors():
    eg = EGraph(audit=True)
    eg.add(leaf("a"), F)
    with pytest.raises(TypeError):
        eg.add(leaf("a"), types.fun(F, F))


def test_union_across_types_errors():
    eg = EGraph(audit=True)
    a = eg.add(leaf("a"), F)
    b = eg.add(leaf("b"), types.fun(F, F))
    with pytest.raises(TypeError):
        eg.union(a, b)


def test_congruence_merges_parents():
    eg = EGraph(audit=True)
    x = eg.add(leaf("x"), F)
    y = eg.add(leaf("y"), F)
    fx = eg.add(ENode("h", None, (x,)), F)
    fy = eg.add(ENode("h", None, (y,)), F)
    assert eg.find(fx) != eg.find(fy)
    eg.union(x, y)
    eg.rebuild()
    assert eg.find(fx) == eg.find(fy)


def test_chained_congruence_counts_repairs():
    eg = EGraph(audit=True)
    x = eg.add(leaf("x"), F)
    y = eg.add(leaf("y"), F)
    hx = eg.add(ENode("h", None, (x,)), F)
    hy = eg.add(ENode("h", None, (y,)), F)
    gx = eg.add(ENode("u", None, (hx,)), F)
    gy = eg.add(ENode("u", None, (hy,)), F)
    eg.union(x, y)
    assert eg.rebuild() == 2
    assert eg.find(gx) == eg.find(gy)
    assert eg.rebuild() == 0


def test_add_term_dedups_shared_subterms():
    eg = EGraph(audit=True)
    a = eg.add_term(t(r"\x. add x x"))
    b = eg.add_term(t(r"\y. add y y"))
    assert a == b
    # add, %0 (twice, shared), add %0, add %0 %0, lam
    assert eg.node_count() == 5


def test_class_types_recorded():
    eg = EGraph(audit=True)
    c = eg.add_term(t(r"\x. add x 1"))
    assert types.show_type(eg.class_type(c)) == "f32 -> f32"


def test_free_analysis_var():
    eg = EGraph(audit=True)
    term = t(r"\f. \x. f x")
    c = eg.add_term(term)
    assert eg.free_of(c) == frozenset()
    # the inner application mentions both binders
    app_c = eg.add_term(term.body.body)
    assert eg.free_of(app_c) == {0, 1}
    lam_c = eg.add_term(term.body)
    assert eg.free_of(lam_c) == {0}


def test_free_analysis_propagates_through_unions():
    eg = EGraph(audit=True)
    sig = "(f32 -> f32) -> f32 -> f32"
    outer = t(rf"(\f. \x. f x :: {sig})", patterns=True)
    eg.add_term(outer)
    inner = eg.add_term(outer.body.body)      # f x, free {0,1}
    lam_c = eg.add_term(outer.body)           # \x. f x, free {0}
    other = eg.add_term(
        t(rf"(\f. \x. f (f x) :: {sig})", patterns=True).body.body)
    assert eg.free_of(other) == {0, 1}
    eg.union(inner, other)
    eg.rebuild()
    assert eg.free_of(inner) == {0, 1}
    assert eg.free_of(lam_c) == {0}


def test_smallest_term_round_trips():
    eg = EGraph(audit=True)
    term = t(r"\f. \x. f x")
    c = eg.add_term(term)
    got = eg.smallest_term(term_size_cost, c)
    assert got is not None
    cost, out = got
    # lam, lam, app, %1, %0
    assert cost == 5
    assert out == term


def test_smallest_term_prefers_merged_smaller():
    eg = EGraph(audit=True)
    big = eg.add_term(t(r"\x. add (add x 0) 0"))
    small = eg.add_term(t(r"(\x. x :: f32 -> f32)", patterns=True))
    eg.union(big, small)
    eg.rebuild()
    cost, out = eg.smallest_term(term_size_cost, big)
    assert cost == 2
    assert out == t(r"(\x. x :: f32 -> f32)", patterns=True)


def test_dump_shape():
    eg = EGraph(audit=True)
    eg.add_term(t(r"\x. add x 1"))
    text = eg.dump()
    lines = text.splitlines()
    assert len(lines) == eg.class_count()
    for line in lines:
        assert line.startswith("#")
        assert "{" in line and "}" in line and "free=" in line


def test_classes_monotone_under_add_and_union():
    eg = EGraph(audit=True)
    a = eg.add(leaf("a"), F)
    before = eg.class_count()
    b = eg.add(leaf("b"), F)
    assert eg.class_count() == before + 1
    eg.union(a, b)
    eg.rebuild()
    assert eg.class_count() == before


# -- extraction oracle ----------------------------------------------------

SIG = [("a", 0), ("b", 0), ("c", 0), ("u", 1), ("h", 2)]


def random_tree(rng, depth):
    sym, ar = rng.choice([s for s in SIG if depth > 0 or s[1] == 0])
    return (sym, tuple(random_tree(rng, depth - 1) for _ in range(ar)))


def add_tree(eg, tree):
    sym, kids = tree
    return eg.add(ENode(sym, None, tuple(add_tree(eg, k) for k in kids)), F)


def tree_size(tree):
    return 1 + sum(tree_size(k) for k in tree[1])


def depth_bounded_min(eg, depth):
    """Minimal represented term size per class, brute force over depths."""
    roots = list(eg.classes())
    table = {}  # (class, d) -> min size or None

    def go(c, d):
        c = eg.find(c)
        if d == 0:
            return None
        key = (c, d)
        if key in table:
            return table[key]
        table[key] = None
        best = None
        for n in eg.nodes_of(c):
            tot = 1
            ok = True
            for ch in n.children:
                sub = go(ch, d - 1)
                if sub is None:
                    ok = False
                    break
                tot += sub
            if ok and (best is None or tot < best):
                best = tot
        table[key] = best
        return best

    return {r: go(r, depth) for r in roots}


def test_extraction_matches_depth_bounded_brute_force():
    rng = random.Random(2024)
    for trial in range(60):
        eg = EGraph(audit=True)
        roots = []
        for _ in range(rng.randint(1, 3)):
            tree = random_tree(rng, rng.randint(1, 4))
            if tree_size(tree) <= 12:
                roots.append(add_tree(eg, tree))
        if not roots:
            continue
        all_classes = list(eg.classes())
        for _ in range(rng.randint(0, 5)):
            x, y = rng.choice(all_classes), rng.choice(all_classes)
            eg.union(x, y)
        eg.rebuild()

        best = eg.extract_best(term_size_cost)
        want = depth_bounded_min(eg, 8)
        for r in eg.classes():
            got = best.get(r, (None,))[0]
            expect = want[r]
            assert got == expect, f"trial {trial} class {r}: {got} vs {expect}"
