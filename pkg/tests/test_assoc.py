import math
import random

import pytest

from biaseval.assoc import (AssociationTestSpec, association_r,
                            bundled_test_names, differential_association,
                            effect_size, load_bundled_test, permutation_pvalue,
                            run_association_test, _pvalue_from_r,
                            _effect_size_from_r)
from biaseval.core import FunctionScorer, Text
from biaseval.errors import ScorerError
from biaseval.metrics import ConstantScorer, ExactMatchScorer, make_scorer

from oracles import brute_force_association, brute_force_effect_size

T = Text


def table_source(table):
    return lambda t, a: table[t.raw][a.raw]


# --- association_r ------------------------------------------------------------

def test_r_same_groups_is_zero():
    table = {"t": {"a": 0.3, "b": 0.9}}
    group = [T("a"), T("b")]
    assert association_r(T("t"), group, group, table_source(table)) == 0.0


def test_r_constant_scores():
    s = lambda t, a: 0.7
    assert association_r(T("t"), [T("a"), T("b")], [T("c")], s) == 0.0


def test_r_direct_substitution():
    table = {"t": {"a": 0.9, "b": 0.4}}
    assert association_r(T("t"), [T("a")], [T("b")], table_source(table)) == \
        pytest.approx(0.5)


def test_r_non_finite_is_error():
    s = lambda t, a: float("inf")
    with pytest.raises(ScorerError):
        association_r(T("t"), [T("a")], [T("b")], s)


def test_r_empty_group_is_error():
    with pytest.raises(ValueError):
        association_r(T("t"), [], [T("b")], lambda t, a: 0.0)


# --- differential association --------------------------------------------------

def _random_table(rng, xs, ys, gas, gbs):
    return {t: {a: rng.random() for a in gas + gbs} for t in xs + ys}


def test_s_x_equals_y():
    xs = [T("x1"), T("x2")]
    s = differential_association(xs, xs, [T("a")], [T("b")],
                                 lambda t, a: hash((t.raw, a.raw)) % 7 / 7)
    assert s == 0.0


def test_s_antisymmetric():
    rng = random.Random(0)
    table = _random_table(rng, ["x1", "x2"], ["y1", "y2"], ["a1"], ["b1"])
    xs, ys = [T("x1"), T("x2")], [T("y1"), T("y2")]
    ga, gb = [T("a1")], [T("b1")]
    s1 = differential_association(xs, ys, ga, gb, table_source(table))
    s2 = differential_association(ys, xs, ga, gb, table_source(table))
    assert s1 == pytest.approx(-s2, abs=1e-15)


def test_s_matches_double_sum_oracle():
    rng = random.Random(1)
    table = _random_table(rng, ["x1", "x2"], ["y1", "y2"], ["a1", "a2"], ["b1", "b2"])
    xs, ys = [T("x1"), T("x2")], [T("y1"), T("y2")]
    ga = [T("a1"), T("a2")]
    gb = [T("b1"), T("b2")]
    s = differential_association(xs, ys, ga, gb, table_source(table))
    brute = 0.0
    for x in ["x1", "x2"]:
        brute += (table[x]["a1"] + table[x]["a2"]) / 2 - (table[x]["b1"] + table[x]["b2"]) / 2
    for y in ["y1", "y2"]:
        brute -= (table[y]["a1"] + table[y]["a2"]) / 2 - (table[y]["b1"] + table[y]["b2"]) / 2
    assert s == pytest.approx(brute, abs=1e-12)


# --- permutation p-value --------------------------------------------------------

def test_p_n1_two_partitions():
    table = {"x": {"a": 1.0, "b": 0.0}, "y": {"a": 0.0, "b": 1.0}}
    p, total, sampled = permutation_pvalue([T("x")], [T("y")], [T("a")], [T("b")],
                                           table_source(table))
    assert (p, total, sampled) == (0.5, 2, False)


def test_p_constant_scores_all_ties():
    p, total, sampled = permutation_pvalue(
        [T("x1"), T("x2")], [T("y1"), T("y2")], [T("a")], [T("b")],
        lambda t, a: 0.4)
    assert p == 1.0
    assert total == 6
    assert not sampled


def test_p_exhaustive_matches_brute_force_many_seeds():
    for seed in range(20):
        rng = random.Random(seed)
        for n in (1, 2, 3, 4, 5, 6):
            xs = [f"x{i}" for i in range(n)]
            ys = [f"y{i}" for i in range(n)]
            table = _random_table(rng, xs, ys, ["a1", "a2"], ["b1", "b2"])
            src = table_source(table)
            args = ([T(x) for x in xs], [T(y) for y in ys],
                    [T("a1"), T("a2")], [T("b1"), T("b2")])
            p, total, sampled = permutation_pvalue(*args, src, seed=seed)
            assert not sampled
            assert total == math.comb(2 * n, n)
            _, p_brute, _ = brute_force_association(table, xs, ys,
                                                    ["a1", "a2"], ["b1", "b2"])
            assert p == p_brute


def test_p_sampled_close_to_exhaustive():
    rng = random.Random(42)
    xs, ys = ["x1", "x2", "x3"], ["y1", "y2", "y3"]
    table = _random_table(rng, xs, ys, ["a1"], ["b1"])
    src = table_source(table)
    args = ([T(x) for x in xs], [T(y) for y in ys], [T("a1")], [T("b1")])
    p_exh, total, _ = permutation_pvalue(*args, src, seed=0)
    p_smp, total_s, sampled = permutation_pvalue(*args, src, seed=0,
                                                 force_sampled=True)
    assert sampled and total_s == 20
    assert abs(p_smp - p_exh) < 0.01


def test_p_seed_determinism():
    rng = random.Random(5)
    r = [rng.uniform(-1, 1) for _ in range(12)]
    a = _pvalue_from_r(r, 6, seed=123, force_sampled=True)
    b = _pvalue_from_r(r, 6, seed=123, force_sampled=True)
    assert a == b
    c = _pvalue_from_r(r, 6, seed=124, force_sampled=True)
    assert a != c  # overwhelmingly likely for random r


def test_p_exhaustive_seed_independent():
    r = [random.Random(6).uniform(-1, 1) for _ in range(8)]
    assert _pvalue_from_r(r, 4, seed=1) == _pvalue_from_r(r, 4, seed=999)


def test_p_n0_is_error():
    with pytest.raises(ValueError):
        _pvalue_from_r([], 0, seed=0)


def test_p_tie_complement_bound():
    # both orientations count ties, so p(X,Y) + p(Y,X) >= 1 exhaustively
    for seed in range(5):
        rng = random.Random(seed)
        xs, ys = ["x1", "x2", "x3"], ["y1", "y2", "y3"]
        table = _random_table(rng, xs, ys, ["a1", "a2"], ["b1"])
        src = table_source(table)
        xt, yt = [T(x) for x in xs], [T(y) for y in ys]
        ga, gb = [T("a1"), T("a2")], [T("b1")]
        p_xy, _, _ = permutation_pvalue(xt, yt, ga, gb, src)
        p_yx, _, _ = permutation_pvalue(yt, xt, ga, gb, src)
        assert p_xy + p_yx >= 1.0


# --- effect size ----------------------------------------------------------------

def test_d_x_equals_y():
    xs = [T("x1"), T("x2")]
    s = lambda t, a: (len(t.raw) * 7 + len(a.raw)) % 5 / 5
    assert effect_size(xs, xs, [T("a")], [T("b")], s) == 0.0


def test_d_constant_degenerate_zero():
    s = lambda t, a: 0.123
    d = effect_size([T("x1"), T("x2")], [T("y1"), T("y2")], [T("a")], [T("b")], s)
    assert d == 0.0


def test_d_hand_arithmetic():
    # r values {1.0, 0.8} vs {0.2, 0.0}
    d = _effect_size_from_r([1.0, 0.8, 0.2, 0.0], 2)
    pop_std = math.sqrt(sum((v - 0.5) ** 2 for v in [1.0, 0.8, 0.2, 0.0]) / 4)
    assert d == pytest.approx(0.8 / pop_std, abs=1e-12)
    assert d == pytest.approx(1.9403, abs=1e-4)


def test_d_antisymmetric_and_oracle():
    for seed in range(20):
        rng = random.Random(seed)
        r_x = [rng.uniform(-1, 1) for _ in range(4)]
        r_y = [rng.uniform(-1, 1) for _ in range(4)]
        d = _effect_size_from_r(r_x + r_y, 4)
        d_rev = _effect_size_from_r(r_y + r_x, 4)
        assert d == pytest.approx(-d_rev, abs=1e-12)
        assert d == pytest.approx(brute_force_effect_size(r_x, r_y), abs=1e-12)


# --- run_association_test --------------------------------------------------------

def _tiny_spec(level="word", templates=()):
    return AssociationTestSpec(
        name="tiny", targets_a=["aa", "ab"], targets_b=["ba", "bb"],
        attributes_x=["xa", "xb"], attributes_y=["ya", "yb"],
        level=level, templates=list(templates))


def test_run_exact_match_disjoint_sets():
    res = run_association_test(_tiny_spec(), ExactMatchScorer(), seed=0)
    assert res.s_value == 0.0
    assert res.p_value == 1.0
    assert res.effect_size == 0.0


def test_run_full_result_matches_brute_force():
    rng = random.Random(13)
    table = {}
    spec = _tiny_spec()
    for t in spec.attributes_x + spec.attributes_y:
        table[t] = {a: rng.random()
                    for a in spec.targets_a + spec.targets_b}

    def fn(x, y):
        # symmetric synthetic scorer backed by the table
        if x.raw in table and y.raw in table.get(x.raw, {}):
            return table[x.raw][y.raw]
        return table[y.raw][x.raw]

    scorer = FunctionScorer("synthetic", fn, symmetric=True)
    res = run_association_test(spec, scorer, seed=3)
    s, p, d = brute_force_association(table, spec.attributes_x,
                                      spec.attributes_y, spec.targets_a,
                                      spec.targets_b)
    assert res.s_value == pytest.approx(s, abs=1e-12)
    assert res.p_value == p
    assert res.effect_size == pytest.approx(d, abs=1e-12)


def test_run_reconstructs_s_from_r_maps():
    spec = _tiny_spec()
    scorer = FunctionScorer(
        "hashy", lambda x, y: (hash((x.raw, y.raw)) % 100) / 100)
    res = run_association_test(spec, scorer, seed=0)
    s_again = sum(res.r_x.values()) - sum(res.r_y.values())
    assert abs(s_again - res.s_value) < 1e-9
    assert set(res.r_x) == {"xa", "xb"}
    assert set(res.r_y) == {"ya", "yb"}


def test_run_sentence_level_expansion():
    spec = _tiny_spec(level="sentence",
                      templates=["This is <word>.", "That is <word>."])
    seen = []

    def fn(x, y):
        seen.append((x.raw, y.raw))
        return 1.0 if x.raw == y.raw else 0.0

    run_association_test(spec, FunctionScorer("spy", fn, symmetric=True), seed=0)
    rows = {x for x, _ in seen}
    assert "This is xa." in rows and "That is yb." in rows
    # 8 attribute sentences x 8 target sentences
    assert len(seen) == 64


def test_run_scale_shift_invariance():
    spec = _tiny_spec()
    rng = random.Random(21)
    table = {t: {a: rng.random() for a in spec.targets_a + spec.targets_b}
             for t in spec.attributes_x + spec.attributes_y}

    def scaled(alpha, beta):
        return FunctionScorer(
            "scaled", lambda x, y: alpha * table[x.raw][y.raw] + beta,
            symmetric=True)

    base = run_association_test(spec, scaled(1.0, 0.0), seed=5)
    moved = run_association_test(spec, scaled(3.0, -0.25), seed=5)
    assert base.p_value == moved.p_value
    assert math.copysign(1, base.s_value) == math.copysign(1, moved.s_value)
    assert base.effect_size == pytest.approx(moved.effect_size, abs=1e-9)


def test_run_scorer_failure_identifies_pair():
    spec = _tiny_spec()

    def fn(x, y):
        if x.raw == "xb" and y.raw == "ba":
            raise RuntimeError("boom")
        return 0.5

    with pytest.raises(ScorerError) as err:
        run_association_test(spec, FunctionScorer("bad", fn, symmetric=True))
    assert "xb" in str(err.value) and "ba" in str(err.value)


def test_run_workers_deterministic():
    spec = _tiny_spec()
    scorer = FunctionScorer(
        "hashy", lambda x, y: (hash((x.raw, y.raw)) % 100) / 100)
    a = run_association_test(spec, scorer, seed=7, workers=1)
    b = run_association_test(spec, scorer, seed=7, workers=4)
    assert a.to_dict() == b.to_dict()


# --- spec validation and bundled data ---------------------------------------------

def test_spec_rejects_unbalanced_attributes():
    with pytest.raises(ValueError):
        AssociationTestSpec(name="bad", targets_a=["a"], targets_b=["b"],
                            attributes_x=["x1", "x2"], attributes_y=["y1"])


def test_spec_rejects_duplicates():
    with pytest.raises(ValueError):
        AssociationTestSpec(name="bad", targets_a=["a", "a"], targets_b=["b"],
                            attributes_x=["x"], attributes_y=["y"])


def test_spec_sentence_needs_templates():
    with pytest.raises(ValueError):
        AssociationTestSpec(name="bad", targets_a=["a"], targets_b=["b"],
                            attributes_x=["x"], attributes_y=["y"],
                            level="sentence")


def test_bundled_tests_load_and_validate():
    names = bundled_test_names()
    assert len(names) >= 30
    expected = {"c1_word", "c1_sent", "c6_t_word", "c6_n_word", "c10_word",
                "abw_t_word", "abw_n_sent", "db_c_word", "db_c_sent",
                "db_c_sent_u", "db_l_sent_u"}
    assert expected <= set(names)
    assert not any(name.startswith("c9") for name in names)
    for name in names:
        spec = load_bundled_test(name)
        if spec.level != "word":
            assert spec.templates
        assert len(spec.attributes_x) == len(spec.attributes_y)


def test_bundled_word_tests_attribute_target_disjoint():
    for name in bundled_test_names():
        spec = load_bundled_test(name)
        if spec.level != "word":
            continue
        target_tokens = set()
        for w in spec.targets_a + spec.targets_b:
            target_tokens.update(T(w).tokens)
        attr_tokens = set()
        for w in spec.attributes_x + spec.attributes_y:
            attr_tokens.update(T(w).tokens)
        assert not (target_tokens & attr_tokens), name


def test_run_constant_scorer_bundled():
    res = run_association_test(load_bundled_test("c10_word"),
                               ConstantScorer(), seed=0)
    assert res.effect_size == 0.0
    assert res.p_value == 1.0
