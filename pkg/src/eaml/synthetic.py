"""Confounded synthetic datasets and simulated expert raters.

The generator draws standard-normal features, a hidden binary confounder,
and outcomes from sigmoid(intercept + beta . x + effect * confounder). Two
recording distortions mirror real failure modes: the confounder can
overwrite one observed feature with a fixed code, and it can drive
missingness of another feature (later filled by mean imputation). Three
test variants accompany each training set: an untouched draw, the same
draw with one feature affinely recoded, and a fresh "temporal" draw of new
cases in which the recording artifacts hit only a fraction of confounded
cases (coding conventions changed; the physiology, i.e. the confounder's
effect on the outcome, persists).

Simulated experts rate rules from the artifact-free risk surface (beta
only), so their rankings diverge from the empirical ones exactly where the
distortions bite.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass

import numpy as np

from .data import Dataset, FeatureSpec
from .elicitation import ExpertAssessment
from .rules import rule_mask
from .validation import DataError

logger = logging.getLogger(__name__)


def _sigmoid(z):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    beta: tuple[float, ...]
    intercept: float = -1.0
    confounder_prevalence: float = 0.25
    confounder_effect: float = 0.0
    miscode_feature: int | None = None
    miscode_value: float = 2.5
    miscode_quantum: float = 0.0  # >0: the miscoded feature is recorded on this grid
    missing_feature: int | None = None
    missing_rate_confounded: float = 0.0
    missing_rate_clean: float = 0.0
    recode_feature: int = 0
    recode_scale: float = 1.0
    recode_offset: float = 0.75
    temporal_factor: float = 0.5  # share of confounded cases still miscoded later
    seed: int = 0

    @property
    def p(self) -> int:
        return len(self.beta)

    def validate(self):
        if self.n < 1:
            raise DataError("n must be >= 1")
        if not self.beta or all(b == 0.0 for b in self.beta):
            raise DataError("beta must have at least one nonzero coefficient")
        if not all(np.isfinite(self.beta)):
            raise DataError("beta must be finite")
        if not 0.0 < self.confounder_prevalence < 1.0:
            raise DataError("confounder prevalence must lie in (0, 1)")
        for name in ("miscode_feature", "missing_feature"):
            v = getattr(self, name)
            if v is not None and not 0 <= v < self.p:
                raise DataError(f"{name} out of range")
        if not 0 <= self.recode_feature < self.p:
            raise DataError("recode_feature out of range")
        return self

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SyntheticSpec":
        payload = json.loads(text)
        payload["beta"] = tuple(payload["beta"])
        return cls(**payload)


@dataclass
class SyntheticSet:
    dataset: Dataset
    true_risk: np.ndarray  # sigmoid(intercept + beta . x_true), no confounder term
    confounder: np.ndarray


@dataclass
class SyntheticBundle:
    spec: SyntheticSpec
    train: SyntheticSet
    test_same: SyntheticSet
    test_recoded: SyntheticSet
    test_temporal: SyntheticSet

    def datasets(self) -> dict[str, Dataset]:
        return {
            "train": self.train.dataset,
            "test_same": self.test_same.dataset,
            "test_recoded": self.test_recoded.dataset,
            "test_temporal": self.test_temporal.dataset,
        }


def _schema(p: int) -> list[FeatureSpec]:
    return [FeatureSpec(name=f"x{j + 1}", kind="numeric") for j in range(p)]


def _draw_set(spec: SyntheticSpec, rng, coupling: float) -> SyntheticSet:
    x_true = rng.standard_normal((spec.n, spec.p))
    c = (rng.random(spec.n) < spec.confounder_prevalence).astype(np.int8)
    z = spec.intercept + x_true @ np.asarray(spec.beta) + spec.confounder_effect * c
    y = (rng.random(spec.n) < _sigmoid(z)).astype(np.int8)

    # recording artifacts follow the coding convention of the era: at full
    # coupling they track the confounder exactly; as the coupling weakens the
    # miscode hits fewer confounded cases and missingness drifts toward its
    # marginal rate, independent of the confounder
    observed = x_true.copy()
    if spec.miscode_feature is not None:
        if spec.miscode_quantum > 0:
            q = spec.miscode_quantum
            observed[:, spec.miscode_feature] = np.round(observed[:, spec.miscode_feature] / q) * q
        miscoded = (c == 1) & (rng.random(spec.n) < coupling)
        observed[miscoded, spec.miscode_feature] = spec.miscode_value
    if spec.missing_feature is not None:
        prev = spec.confounder_prevalence
        marginal = prev * spec.missing_rate_confounded + (1 - prev) * spec.missing_rate_clean
        coupled = np.where(c == 1, spec.missing_rate_confounded, spec.missing_rate_clean)
        rate = coupling * coupled + (1.0 - coupling) * marginal
        observed[rng.random(spec.n) < rate, spec.missing_feature] = np.nan

    true_risk = _sigmoid(spec.intercept + x_true @ np.asarray(spec.beta))
    return SyntheticSet(Dataset(_schema(spec.p), observed, y), true_risk, c)


def generate(spec: SyntheticSpec) -> SyntheticBundle:
    """Train set plus in-distribution, recoded, and temporal test variants."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    train = _draw_set(spec, rng, 1.0)
    test_same = _draw_set(spec, rng, 1.0)
    test_temporal = _draw_set(spec, rng, spec.temporal_factor)

    def recode(part: SyntheticSet) -> SyntheticSet:
        X = part.dataset.X.copy()
        j = spec.recode_feature
        X[:, j] = spec.recode_scale * X[:, j] + spec.recode_offset
        return SyntheticSet(
            Dataset(list(part.dataset.features), X, part.dataset.y.copy()),
            part.true_risk.copy(),
            part.confounder.copy(),
        )

    return SyntheticBundle(spec, train, test_same, recode(test_same), test_temporal)


@dataclass(frozen=True)
class SimulatedExpertSpec:
    n_experts: int = 15
    noise_sd: float = 0.0
    thresholds: tuple[float, ...] = (0.1, 0.3, 0.7, 0.9)
    seed: int = 0

    def validate(self):
        if self.n_experts < 1:
            raise DataError("n_experts must be >= 1")
        if self.noise_sd < 0:
            raise DataError("noise_sd must be >= 0")
        if len(self.thresholds) != 4 or list(self.thresholds) != sorted(self.thresholds):
            raise DataError("thresholds must be 4 nondecreasing quantiles")
        return self


def simulate_experts(rules, bundle: SyntheticBundle, espec: SimulatedExpertSpec):
    """Expert assessments rating each rule's artifact-free subpopulation risk.

    Per rule the latent score is the mean true risk of the rows it matches
    in the training set; per-expert noise is added before thresholding into
    the five rating levels at the latent-risk quantile cutpoints.
    Zero-support rules are skipped and logged.
    """
    espec.validate()
    train = bundle.train
    latents, usable = [], []
    skipped = []
    for rule in rules:
        mask = rule_mask(rule, train.dataset)
        if not mask.any():
            skipped.append(rule.id)
            continue
        latents.append(float(train.true_risk[mask].mean()))
        usable.append(rule)
    if skipped:
        logger.warning("%d zero-support rules skipped: %s", len(skipped), skipped[:5])
    if not usable:
        raise DataError("no rules with positive support to rate")
    latents = np.array(latents)
    cuts = np.quantile(latents, espec.thresholds)

    rng = np.random.default_rng(espec.seed)
    out = []
    base_time = 1_700_000_000.0
    tick = 0
    for e in range(espec.n_experts):
        expert_id = f"sim-expert-{e + 1:02d}"
        noisy = latents + rng.normal(0.0, espec.noise_sd, size=len(latents))
        for rule, value in zip(usable, noisy):
            rating = 1 + int(np.sum(value > cuts))
            tick += 1
            out.append(
                ExpertAssessment(
                    expert_id=expert_id,
                    rule_id=rule.id,
                    rating=rating,
                    elapsed_ms=int(rng.integers(2_000, 30_000)),
                    timestamp=base_time + 10.0 * tick,
                )
            )
    return out
