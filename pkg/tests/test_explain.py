import itertools
import math
import re
import warnings

import numpy as np
import pytest

from mathrel.data import RelationLabel
from mathrel.explain import (
    Attribution,
    ClassBarSummary,
    EmptyGroup,
    TooManyTokens,
    ValueFunctionSpec,
    aggregate_bar,
    coalition_value,
    explain_all_classes,
    load_attributions,
    render_reports,
    save_attributions,
    set_function_game,
    shapley_exact,
    shapley_sampled,
)
from mathrel.model import predict
from mathrel.preprocess import preprocess_pipeline


def permutation_oracle(n, v):
    """Shapley values as the mean marginal contribution over all n! orderings."""
    phi = [0.0] * n
    perms = list(itertools.permutations(range(n)))
    for order in perms:
        seen = frozenset()
        for i in order:
            phi[i] += v(seen | {i}) - v(seen)
            seen = seen | {i}
    return [p / len(perms) for p in phi]


def random_game(n, seed):
    rng = np.random.default_rng(seed)
    table = {frozenset(S): float(rng.random()) for k in range(n + 1) for S in itertools.combinations(range(n), k)}
    return table.__getitem__


def test_two_player_hand_game():
    v = {frozenset(): 0.1, frozenset({0}): 0.5, frozenset({1}): 0.3, frozenset({0, 1}): 0.9}.__getitem__
    a = shapley_exact(["t1", "t2"], set_function_game(v))
    assert a.values.tolist() == [0.5, 0.3]
    assert (a.base_value, a.f_full) == (0.1, 0.9)


def test_additive_game():
    w = np.array([0.2, -0.1, 0.3])
    a = shapley_exact(list("abc"), lambda c: np.asarray(c) @ w)
    np.testing.assert_allclose(a.values, w, atol=1e-15)
    assert a.base_value == 0


@pytest.mark.parametrize("n, seed", [(1, 0), (3, 1), (5, 2), (6, 3)])
def test_matches_permutation_oracle(n, seed):
    v = random_game(n, seed)
    a = shapley_exact([f"p{i}" for i in range(n)], set_function_game(v))
    np.testing.assert_allclose(a.values, permutation_oracle(n, v), atol=1e-12)


@pytest.mark.parametrize("n", [2, 5, 8, 10])
def test_axioms_on_random_games(n):
    toks = [f"p{i}" for i in range(n)]
    v1, v2 = random_game(n, n), random_game(n, n + 100)
    a1 = shapley_exact(toks, set_function_game(v1))
    a2 = shapley_exact(toks, set_function_game(v2))
    # efficiency
    assert abs(a1.efficiency_gap) < 1e-9
    # linearity
    combo = shapley_exact(toks, set_function_game(lambda S: 2.0 * v1(S) - 0.5 * v2(S)))
    np.testing.assert_allclose(combo.values, 2.0 * a1.values - 0.5 * a2.values, atol=1e-9)
    # dummy: player 0 never changes the value
    dummy = shapley_exact(toks, set_function_game(lambda S: v1(S - {0})))
    assert dummy.values[0] == 0.0
    # symmetry: players 0 and 1 interchangeable
    swap = {0: 1, 1: 0}
    sym = set_function_game(lambda S: v1(S) + v1(frozenset(swap.get(i, i) for i in S)))
    s = shapley_exact(toks, sym)
    assert abs(s.values[0] - s.values[1]) < 1e-9


def test_too_many_tokens():
    with pytest.raises(TooManyTokens):
        shapley_exact([str(i) for i in range(16)], lambda c: np.zeros(len(c)))
    shapley_exact([str(i) for i in range(3)], lambda c: np.zeros(len(c)), exact_limit=3)


def test_sampled_single_token_is_exact():
    g = set_function_game({frozenset(): 0.25, frozenset({0}): 0.7}.__getitem__)
    for n_perm in (2, 3, 17):
        a = shapley_sampled(["x"], g, n_perm, seed=5)
        assert a.values[0] == 0.7 - 0.25


def test_sampled_converges_and_is_deterministic():
    v = random_game(7, 42)
    toks = [f"p{i}" for i in range(7)]
    exact = shapley_exact(toks, set_function_game(v))
    a = shapley_sampled(toks, set_function_game(v), 2000, seed=3)
    b = shapley_sampled(toks, set_function_game(v), 2000, seed=3)
    assert a.to_dict() == b.to_dict()
    assert abs(a.efficiency_gap) < 1e-9
    assert a.method == "sampled" and a.n_permutations == 2000 and a.seed == 3
    # white-noise games are far rougher than model games; judge by the reported error
    assert (np.abs(a.values - exact.values) <= 4 * a.std_error).all()


def test_cache_does_not_change_result():
    v = random_game(6, 9)
    g = set_function_game(v)
    a = shapley_sampled([str(i) for i in range(6)], g, 200, seed=1, cache=True)
    b = shapley_sampled([str(i) for i in range(6)], g, 200, seed=1, cache=False)
    assert a.to_dict() == b.to_dict()


def test_coalition_value_bounds():
    g = set_function_game(lambda S: len(S) / 3)
    assert coalition_value(list("abc"), {0, 2}, g) == pytest.approx(2 / 3)
    with pytest.raises(IndexError):
        coalition_value(list("abc"), {3}, g)


# -- aggregation and rendering ------------------------------------------------


def _att(tokens, values, label, base=0.1):
    values = np.asarray(values, dtype=float)
    return Attribution(tuple(tokens), values, base, base + float(values.sum()), label)


def test_aggregate_bar():
    R = RelationLabel
    groups = {
        R.Addition: [_att(["plus", "five", "two"], [0.4, -0.1, 0.05], R.Addition),
                     _att(["plus", "nine"], [0.2, -0.25], R.Addition)],
        R.Division: [_att(["split", "ten"], [0.5, -0.2], R.Division)],
    }
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        out = aggregate_bar(groups, k=2)
    assert {w.category for w in caught} == {EmptyGroup}
    assert set(out) == {R.Addition, R.Division}
    add = out[R.Addition]
    assert [t for t, _ in add.pairs] == ["plus", "nine"]
    assert add.pairs[0][1] == pytest.approx(0.3) and add.pairs[1][1] == pytest.approx(0.25)
    assert add.residual == pytest.approx(0.1 + 0.05)
    values = [v for _, v in add.pairs]
    assert values == sorted(values, reverse=True)

    single = aggregate_bar({R.Division: groups[R.Division]}, k=5, classes=[R.Division])[R.Division]
    assert single.residual == 0
    zero = aggregate_bar({R.Division: groups[R.Division]}, k=0, classes=[R.Division])[R.Division]
    assert zero.pairs == () and zero.residual == pytest.approx(0.7)


def test_render_html_tints_and_headers():
    R = RelationLabel
    att = Attribution(("plus", "two", "the"), np.array([0.3, -0.2, 0.0]), 0.0508863, 0.822244, R.Addition,
                      text="plus two the", spans=((0, 4), (5, 8), (9, 12)))
    bar = ClassBarSummary(R.Addition, (("plus", 0.3),), 0.2, 1)
    doc = render_reports([att], {R.Addition: bar}, "html")
    assert doc.count('class="tok pos"') == 1
    assert doc.count('class="tok neg"') == 1
    assert doc.count('class="tok zero"') == 1
    assert "base=0.0509 f_Addition=0.8222" in doc
    assert "sum of other features" in doc
    assert not re.search(r"(src|href)\s*=|<script|<link|https?://|@import|url\(", doc)

    term = render_reports([att], {R.Addition: bar}, "terminal")
    assert "\x1b[48;2;" in term and "base=0.0509 f_Addition=0.8222" in term
    plain = render_reports([att], {R.Addition: bar}, "terminal", color=False)
    assert "\x1b[" not in plain and "plus[+0.300]" in plain and "sum of other features" in plain


def test_attribution_file_roundtrip(tmp_path):
    att = Attribution(("a", "b"), np.array([0.1, 0.2]), 0.3, 0.6, RelationLabel.Factorial, "sampled", 10, 4,
                      np.array([0.01, 0.02]), "a b", ((0, 1), (2, 3)))
    save_attributions([att], tmp_path / "x.attributions")
    back = load_attributions(tmp_path / "x.attributions")
    assert back[0].to_dict() == att.to_dict()


# -- the trained desk model ---------------------------------------------------


def test_model_value_function(desk_model):
    text = "The square root of four is two"
    toks = preprocess_pipeline(text).tokens
    spec = ValueFunctionSpec(desk_model, RelationLabel.SquareRoot)
    full = coalition_value(toks, range(len(toks)), spec)
    _, probs = predict(text, desk_model.parameters, desk_model.vocab, desk_model.config)
    assert full == pytest.approx(float(probs[RelationLabel.SquareRoot]), abs=1e-6)
    empty = coalition_value(toks, [], spec)
    assert 0 <= empty <= 1
    assert coalition_value(toks, [0, 2], spec) == coalition_value(toks, [0, 2], spec)


def test_explain_all_classes_on_model(desk_model, corpus7_split):
    _, test = corpus7_split
    div = next(s for s in test if s.relation is RelationLabel.Division and len(preprocess_pipeline(s.text)) <= 12)
    atts = explain_all_classes(div.text, desk_model)
    assert [a.target_class for a in atts] == list(RelationLabel)
    assert abs(sum(a.f_full for a in atts) - 1) < 1e-6
    assert all(abs(a.efficiency_gap) < 1e-9 for a in atts)
    assert max(atts, key=lambda a: a.f_full).target_class is RelationLabel.Division
    assert all(a.tokens == atts[0].tokens for a in atts)


def test_bar_summary_square_root_keywords(desk_model, corpus7_split):
    _, test = corpus7_split
    from mathrel.explain import explain_predicted

    short = [s.text for s in test if s.relation is RelationLabel.SquareRoot
             and len(preprocess_pipeline(s.text)) <= 10][:6]
    groups = explain_predicted(short, desk_model)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyGroup)
        bars = aggregate_bar(groups, k=5)
    top = [t for t, _ in bars[RelationLabel.SquareRoot].pairs]
    assert "root" in top or "squar" in top
    assert math.isfinite(bars[RelationLabel.SquareRoot].residual)
