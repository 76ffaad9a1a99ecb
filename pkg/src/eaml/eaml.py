"""Expert-augmented refits: penalize rules by expert/data disagreement.

Hard variant: drop every rule whose binned disagreement exceeds a
threshold, then refit the plain L1 model on the survivors. Soft variant:
weighted quadratic penalty where each rule's weight grows with its
disagreement and shrinks when the experts disagreed among themselves
(w_k = 1 + gamma * |d_k| / (stdev_k + 4 * max stdev)). The general form
exposes the weight function and the penalty norm directly. Hyperparameters
are chosen by AUC on an independent validation set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evaluation import auc
from .linear import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    L1,
    L2,
    LinearRuleModel,
    fit_penalized_logistic,
    lambda_path,
    predict_linear,
)
from .rules import RuleMatrix
from .validation import DataError

BINNED = "binned"
RAW = "raw"

WEIGHT_UNIFORM = "uniform"
WEIGHT_DELTA_OVER_STDEV = "delta_over_stdev"
_STDEV_FLOOR = 1e-6


@dataclass
class EamlConfig:
    mode: str = "soft"  # hard | soft | general
    max_bin: int = 1
    lam: float = 0.01
    gamma: float = 1.0
    norm: int = 2
    weight_function: str = WEIGHT_DELTA_OVER_STDEV
    delta_source: str = BINNED

    def validate(self):
        if self.mode not in ("hard", "soft", "general"):
            raise DataError(f"unknown mode {self.mode!r}")
        if self.lam < 0 or self.gamma < 0:
            raise DataError("lambda and gamma must be >= 0")
        if self.norm not in (1, 2):
            raise DataError("norm must be 1 or 2")
        if self.delta_source not in (BINNED, RAW):
            raise DataError(f"unknown delta source {self.delta_source!r}")
        return self


def _delta_by_rule(deltas, source=BINNED):
    if source == BINNED:
        return {d.rule_id: float(d.abs_bin) for d in deltas}
    return {d.rule_id: abs(d.delta) for d in deltas}


def _check_coverage(matrix: RuleMatrix, deltas):
    have = {d.rule_id for d in deltas}
    missing = [rid for rid in matrix.rule_ids if rid not in have]
    if missing:
        raise DataError(f"{len(missing)} matrix rules lack delta rankings, e.g. {missing[:3]}")


def fit_hard_eaml(
    matrix: RuleMatrix,
    y,
    deltas,
    max_bin: int,
    lam: float | None = None,
    validation: tuple[RuleMatrix, np.ndarray] | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> LinearRuleModel:
    """Drop rules with abs_bin > max_bin and refit the uniform-weight L1 model.

    With ``lam=None`` a regularization path is fitted and the value with the
    best validation AUC is kept (validation required in that case).
    """
    _check_coverage(matrix, deltas)
    bin_of = {d.rule_id: d.abs_bin for d in deltas}
    surviving = [rid for rid in matrix.rule_ids if bin_of[rid] <= max_bin]
    if not surviving:
        raise DataError(f"no rules survive max_bin={max_bin}")
    sub = matrix.subset(surviving)
    if lam is not None:
        return fit_penalized_logistic(sub, y, lam, penalty=L1, tol=tol, max_iter=max_iter)
    if validation is None:
        raise DataError("either lam or a validation set is required")
    val_matrix, val_y = validation
    best = None
    for lam_value, model in lambda_path(sub, y, penalty=L1, tol=tol, max_iter=max_iter):
        score = auc(predict_linear(model, val_matrix.subset(surviving)), val_y)
        if best is None or score > best[0] or (score == best[0] and lam_value > best[1]):
            best = (score, lam_value, model)
    return best[2]


def soft_penalty_weights(deltas, summaries, gamma: float, delta_source: str = BINNED) -> np.ndarray:
    """Per-rule weights 1 + gamma * |d_k| / (stdev_k + 4 * max stdev).

    When every stdev is zero the dampening term vanishes and the weights
    degenerate to 1 + gamma * |d_k|.
    """
    if gamma < 0:
        raise DataError("gamma must be >= 0")
    d_of = _delta_by_rule(deltas, delta_source)
    s_of = {s.rule_id: s.stdev for s in summaries}
    if set(d_of) != set(s_of):
        raise DataError("deltas and summaries cover different rule sets")
    ids = [d.rule_id for d in deltas]
    top = max(s_of.values())
    out = np.empty(len(ids))
    for i, rid in enumerate(ids):
        denom = s_of[rid] + 4.0 * top
        out[i] = 1.0 + gamma * d_of[rid] / denom if denom > 0 else 1.0 + gamma * d_of[rid]
    return out


def _aligned_weights(matrix, deltas, summaries, gamma, delta_source):
    w = soft_penalty_weights(deltas, summaries, gamma, delta_source)
    by_rule = {d.rule_id: w[i] for i, d in enumerate(deltas)}
    _check_coverage(matrix, deltas)
    return np.array([by_rule[rid] for rid in matrix.rule_ids])


def fit_soft_eaml(
    matrix: RuleMatrix,
    y,
    deltas,
    summaries,
    lam: float,
    gamma: float,
    delta_source: str = BINNED,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> LinearRuleModel:
    """Weighted ridge fit; gamma=0 is plain ridge, lam=0 is unregularized."""
    weights = _aligned_weights(matrix, deltas, summaries, gamma, delta_source)
    return fit_penalized_logistic(
        matrix, y, lam, weights=weights, penalty=L2, tol=tol, max_iter=max_iter
    )


def general_penalty_weights(
    matrix: RuleMatrix, deltas, summaries, weight_function: str, delta_source: str = BINNED
) -> np.ndarray:
    _check_coverage(matrix, deltas)
    if weight_function == WEIGHT_UNIFORM:
        return np.ones(matrix.k)
    if weight_function != WEIGHT_DELTA_OVER_STDEV:
        raise DataError(f"unknown weight function {weight_function!r}")
    d_of = _delta_by_rule(deltas, delta_source)
    s_of = {s.rule_id: s.stdev for s in summaries}
    out = np.empty(matrix.k)
    for i, rid in enumerate(matrix.rule_ids):
        if rid not in s_of:
            raise DataError(f"no assessment summary for rule {rid!r}")
        out[i] = d_of[rid] / max(s_of[rid], _STDEV_FLOOR)
        if not np.isfinite(out[i]):
            raise DataError(f"penalty weight undefined for rule {rid!r}")
    return out


def fit_general_eaml(
    matrix: RuleMatrix,
    y,
    deltas,
    summaries,
    lam: float,
    weight_function: str = WEIGHT_DELTA_OVER_STDEV,
    norm: int = 1,
    delta_source: str = BINNED,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> LinearRuleModel:
    """Disagreement-weighted penalized fit with a chosen weight function and norm."""
    if norm not in (1, 2):
        raise DataError("norm must be 1 or 2")
    weights = general_penalty_weights(matrix, deltas, summaries, weight_function, delta_source)
    return fit_penalized_logistic(
        matrix, y, lam, weights=weights, penalty=L1 if norm == 1 else L2,
        tol=tol, max_iter=max_iter,
    )


@dataclass(frozen=True)
class GridResult:
    params: dict
    train_auc: float
    validation_auc: float


def select_hyperparams(
    train: tuple[RuleMatrix, np.ndarray],
    validation: tuple[RuleMatrix, np.ndarray],
    grid,
    mode: str = "soft",
    deltas=None,
    summaries=None,
    delta_source: str = BINNED,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
):
    """Fit every grid point on train, score AUC on validation, return the best.

    ``grid`` entries are dicts: {"lam", "gamma"} for soft mode or
    {"max_bin", "lam"} for hard mode. Ties prefer the smaller model (larger
    lam, then larger gamma or smaller max_bin). Returns (best_params, table).
    """
    grid = list(grid)
    if not grid:
        raise DataError("hyperparameter grid is empty")
    R_tr, y_tr = train
    R_val, y_val = validation
    table = []
    for params in grid:
        if mode == "soft":
            model = fit_soft_eaml(
                R_tr, y_tr, deltas, summaries, params["lam"], params["gamma"],
                delta_source, tol=tol, max_iter=max_iter,
            )
            val_scores = predict_linear(model, R_val)
        elif mode == "hard":
            model = fit_hard_eaml(
                R_tr, y_tr, deltas, params["max_bin"], params["lam"],
                tol=tol, max_iter=max_iter,
            )
            val_scores = predict_linear(model, R_val.subset(model.rule_ids))
        else:
            raise DataError(f"unknown selection mode {mode!r}")
        table.append(
            GridResult(
                params=dict(params),
                train_auc=auc(predict_linear(model, R_tr if mode == "soft" else R_tr.subset(model.rule_ids)), y_tr),
                validation_auc=auc(val_scores, y_val),
            )
        )

    def preference(entry: GridResult):
        p = entry.params
        smaller_model = (
            p.get("lam", 0.0),
            p.get("gamma", 0.0),
            -p.get("max_bin", 0),
        )
        return (entry.validation_auc, smaller_model)

    best = max(table, key=preference)
    return dict(best.params), table
