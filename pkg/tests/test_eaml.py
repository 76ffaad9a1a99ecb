import numpy as np
import pytest

from eaml.eaml import (
    RAW,
    WEIGHT_DELTA_OVER_STDEV,
    WEIGHT_UNIFORM,
    fit_general_eaml,
    fit_hard_eaml,
    fit_soft_eaml,
    general_penalty_weights,
    select_hyperparams,
    soft_penalty_weights,
)
from eaml.elicitation import AssessmentSummary, DeltaRanking
from eaml.linear import L1, L2, fit_penalized_logistic
from eaml.rules import RuleMatrix
from eaml.validation import DataError


def instance(n=200, k=8, seed=0, bins=(0, 0, 1, 1, 2, 3, 4, 4)):
    rng = np.random.default_rng(seed)
    cols = np.zeros((n, k))
    for j in range(k):
        cols[rng.random(n) < rng.uniform(0.15, 0.7), j] = 1.0
    coef = rng.normal(0.0, 1.0, size=k)
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-(cols @ coef - 0.3)))).astype(int)
    matrix = RuleMatrix([f"r{j}" for j in range(k)], cols.astype(bool))
    deltas = [
        DeltaRanking(
            rule_id=f"r{j}",
            empirical_risk=0.2,
            rank_empirical=j + 1.0,
            rank_perceived=j + 1.0 - 10.0 * b,
            delta=10.0 * b,  # raw deltas deliberately differ from bin labels
            abs_bin=int(b),
        )
        for j, b in enumerate(bins)
    ]
    summaries = [
        AssessmentSummary(f"r{j}", n_raters=15, mean_rating=3.0, stdev=0.4 + 0.1 * j)
        for j in range(k)
    ]
    return matrix, y, deltas, summaries


def test_hard_max_bin_is_noop_at_top():
    matrix, y, deltas, _ = instance()
    plain = fit_penalized_logistic(matrix, y, 0.01, penalty=L1)
    hard = fit_hard_eaml(matrix, y, deltas, max_bin=4, lam=0.01)
    assert hard.rule_ids == matrix.rule_ids
    assert np.max(np.abs(hard.coef - plain.coef)) <= 1e-6


def test_hard_filters_by_bin_census():
    matrix, y, deltas, _ = instance()
    model = fit_hard_eaml(matrix, y, deltas, max_bin=0, lam=0.01)
    expected = [d.rule_id for d in deltas if d.abs_bin == 0]
    assert model.rule_ids == expected
    model1 = fit_hard_eaml(matrix, y, deltas, max_bin=1, lam=0.01)
    assert set(model.rule_ids) <= set(model1.rule_ids)  # nesting


def test_hard_zero_survivors_rejected():
    matrix, y, deltas, _ = instance(bins=(1, 1, 2, 2, 3, 3, 4, 4))
    with pytest.raises(DataError):
        fit_hard_eaml(matrix, y, deltas, max_bin=0, lam=0.01)


def test_hard_requires_full_coverage():
    matrix, y, deltas, _ = instance()
    with pytest.raises(DataError):
        fit_hard_eaml(matrix, y, deltas[:-1], max_bin=4, lam=0.01)


def test_soft_weights_formula():
    deltas = [
        DeltaRanking("a", 0.1, 1, 1, 0.0, abs_bin=4),
        DeltaRanking("b", 0.1, 2, 2, 0.0, abs_bin=0),
    ]
    summaries = [
        AssessmentSummary("a", 15, 3.0, stdev=1.0),
        AssessmentSummary("b", 15, 3.0, stdev=2.0),
    ]
    w = soft_penalty_weights(deltas, summaries, gamma=2.0)
    # |d|=4, stdev=1, max stdev=2 -> 1 + gamma * 4 / (1 + 8)
    assert w[0] == pytest.approx(1.0 + 2.0 * 4.0 / 9.0)
    assert w[1] == pytest.approx(1.0)


def test_soft_weights_gamma_zero_is_uniform():
    _, _, deltas, summaries = instance()
    assert np.all(soft_penalty_weights(deltas, summaries, 0.0) == 1.0)


def test_soft_weight_stdev_modulation_is_at_most_20_percent():
    # same |delta|: stdev at the max vs at zero scales the extra term by 4/5
    deltas = [
        DeltaRanking("a", 0.1, 1, 1, 0.0, abs_bin=3),
        DeltaRanking("b", 0.1, 2, 2, 0.0, abs_bin=3),
    ]
    summaries = [
        AssessmentSummary("a", 15, 3.0, stdev=0.0),
        AssessmentSummary("b", 15, 3.0, stdev=1.5),
    ]
    w = soft_penalty_weights(deltas, summaries, gamma=1.0)
    extra_at_zero = w[0] - 1.0
    extra_at_max = w[1] - 1.0
    assert extra_at_max / extra_at_zero == pytest.approx(4.0 / 5.0)


def test_soft_weight_bounds():
    _, _, deltas, summaries = instance(seed=3)
    gamma = 2.5
    w = soft_penalty_weights(deltas, summaries, gamma)
    top = max(s.stdev for s in summaries)
    for weight, d in zip(w, deltas):
        assert 1.0 <= weight <= 1.0 + gamma * d.abs_bin / (4.0 * top) + 1e-12


def test_soft_weights_degenerate_all_zero_stdev():
    deltas = [DeltaRanking("a", 0.1, 1, 1, 0.0, abs_bin=2)]
    summaries = [AssessmentSummary("a", 15, 3.0, stdev=0.0)]
    w = soft_penalty_weights(deltas, summaries, gamma=1.5)
    assert w[0] == pytest.approx(1.0 + 1.5 * 2.0)


def test_soft_gamma_zero_equals_ridge():
    matrix, y, deltas, summaries = instance(seed=4)
    soft = fit_soft_eaml(matrix, y, deltas, summaries, lam=0.05, gamma=0.0)
    ridge = fit_penalized_logistic(matrix, y, 0.05, penalty=L2)
    assert np.max(np.abs(soft.coef - ridge.coef)) <= 1e-8
    assert abs(soft.intercept - ridge.intercept) <= 1e-8


def test_soft_lambda_zero_is_unregularized():
    matrix, y, deltas, summaries = instance(seed=5, k=5, bins=(0, 1, 2, 3, 4))
    soft = fit_soft_eaml(matrix, y, deltas, summaries, lam=0.0, gamma=7.0)
    plain = fit_penalized_logistic(matrix, y, 0.0, penalty=L2)
    assert np.max(np.abs(soft.coef - plain.coef)) <= 1e-6


def test_soft_gamma_shrinks_flagged_rule():
    rng = np.random.default_rng(6)
    n = 400
    cols = np.column_stack([rng.random(n) < 0.4, rng.random(n) < 0.4]).astype(float)
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-(0.8 * cols[:, 0] + 0.8 * cols[:, 1] - 0.5)))).astype(int)
    matrix = RuleMatrix(["good", "flagged"], cols.astype(bool))
    deltas = [
        DeltaRanking("good", 0.2, 1, 1, 0.0, abs_bin=0),
        DeltaRanking("flagged", 0.2, 2, 2, 4.0, abs_bin=4),
    ]
    summaries = [
        AssessmentSummary("good", 15, 3.0, 0.5),
        AssessmentSummary("flagged", 15, 3.0, 0.5),
    ]
    sizes = []
    for gamma in [0.0, 2.0, 8.0, 32.0]:
        model = fit_soft_eaml(matrix, y, deltas, summaries, lam=0.05, gamma=gamma)
        sizes.append(abs(model.coef[1]))
    assert all(b <= a + 1e-12 for a, b in zip(sizes, sizes[1:]))
    assert sizes[-1] < sizes[0]


def test_general_uniform_weight_is_plain_lasso():
    matrix, y, deltas, summaries = instance(seed=7)
    general = fit_general_eaml(matrix, y, deltas, summaries, lam=0.01,
                               weight_function=WEIGHT_UNIFORM, norm=1)
    lasso = fit_penalized_logistic(matrix, y, 0.01, penalty=L1)
    assert np.max(np.abs(general.coef - lasso.coef)) <= 1e-8


def test_general_zero_delta_rule_unpenalized():
    matrix, y, deltas, summaries = instance(seed=8)
    w = general_penalty_weights(matrix, deltas, summaries, WEIGHT_DELTA_OVER_STDEV)
    for weight, d in zip(w, deltas):
        if d.abs_bin == 0:
            assert weight == 0.0
        else:
            assert weight > 0.0


def test_general_large_lambda_keeps_only_agreeing_rules():
    matrix, y, deltas, summaries = instance(seed=9)
    model = fit_general_eaml(matrix, y, deltas, summaries, lam=50.0,
                             weight_function=WEIGHT_DELTA_OVER_STDEV, norm=1)
    for coef, d in zip(model.coef, deltas):
        if d.abs_bin > 0:
            assert coef == 0.0
    assert any(c != 0.0 for c in model.coef)  # zero-weight rules stay free


def test_general_raw_delta_source():
    matrix, y, deltas, summaries = instance(seed=10)
    w_binned = general_penalty_weights(matrix, deltas, summaries, WEIGHT_DELTA_OVER_STDEV)
    w_raw = general_penalty_weights(matrix, deltas, summaries, WEIGHT_DELTA_OVER_STDEV, RAW)
    assert not np.array_equal(w_binned, w_raw)


def test_select_single_grid_point_returned_verbatim():
    matrix, y, deltas, summaries = instance(seed=11)
    params, table = select_hyperparams(
        (matrix, y), (matrix, y), [{"lam": 0.02, "gamma": 1.0}],
        mode="soft", deltas=deltas, summaries=summaries,
    )
    assert params == {"lam": 0.02, "gamma": 1.0}
    assert len(table) == 1
    assert 0.0 <= table[0].validation_auc <= 1.0


def test_select_tie_breaks_toward_smaller_model():
    matrix, y, deltas, summaries = instance(seed=12)
    # lam=0 rows are exactly tied regardless of gamma: pick the larger gamma
    grid = [{"lam": 0.0, "gamma": 0.0}, {"lam": 0.0, "gamma": 3.0}]
    params, table = select_hyperparams(
        (matrix, y), (matrix, y), grid, mode="soft",
        deltas=deltas, summaries=summaries,
    )
    assert params == {"lam": 0.0, "gamma": 3.0}
    assert table[0].validation_auc == table[1].validation_auc


def test_select_empty_grid_rejected():
    matrix, y, deltas, summaries = instance(seed=13)
    with pytest.raises(DataError):
        select_hyperparams((matrix, y), (matrix, y), [], mode="soft",
                           deltas=deltas, summaries=summaries)


def test_select_hard_mode():
    matrix, y, deltas, summaries = instance(seed=14)
    grid = [{"max_bin": 0, "lam": 0.01}, {"max_bin": 4, "lam": 0.01}]
    params, table = select_hyperparams(
        (matrix, y), (matrix, y), grid, mode="hard", deltas=deltas, summaries=summaries,
    )
    assert set(params) == {"max_bin", "lam"}
    assert len(table) == 2


def test_select_is_deterministic():
    matrix, y, deltas, summaries = instance(seed=15)
    grid = [{"lam": l, "gamma": g} for l in (0.005, 0.02) for g in (0.0, 2.0)]
    runs = [
        select_hyperparams((matrix, y), (matrix, y), grid, mode="soft",
                           deltas=deltas, summaries=summaries)
        for _ in range(2)
    ]
    assert runs[0][0] == runs[1][0]
    assert [(r.params, r.validation_auc) for r in runs[0][1]] == [
        (r.params, r.validation_auc) for r in runs[1][1]
    ]
