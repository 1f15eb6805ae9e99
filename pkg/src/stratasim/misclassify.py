"""Strata misclassification: reported labels that can differ from truth.

All models flip a fraction ``gamma_low`` of the lower stratum upward and
a fraction ``gamma_high`` of the upper stratum downward.  They differ in
*which* patients flip:

- ignorable: uniformly at random, independent of outcomes;
- nonignorable1: the lower patients with the largest control-arm
  outcomes and the upper patients with the smallest arm-1 outcomes;
- nonignorable2: the same construction with both tails reversed.

The nonignorable cutoffs are quantiles of the model marginals, so the
flip fractions equal the nominal rates exactly.  Reported labels depend
only on strata and potential outcomes, never on treatment assignment:
they are computed before randomization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .cohort import Cohort
from .errors import ConfigurationError

KINDS = ("ignorable", "nonignorable1", "nonignorable2")
LOW, HIGH = 0, 1


@dataclass(frozen=True)
class MisclassModel:
    kind: str
    gamma_low: float = 0.0
    gamma_high: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown misclassification kind {self.kind!r}")
        for name, rate in (("gamma_low", self.gamma_low), ("gamma_high", self.gamma_high)):
            if not 0.0 <= rate < 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1), got {rate}")


def _require_two_strata(strata: np.ndarray) -> np.ndarray:
    strata = np.asarray(strata)
    if strata.size and (int(strata.min()) < LOW or int(strata.max()) > HIGH):
        raise ConfigurationError("misclassification models require exactly two strata")
    return strata


def apply_ignorable(
    strata: np.ndarray, model: MisclassModel, rng: np.random.Generator
) -> np.ndarray:
    """Flip labels at the nominal rates, independently of outcomes."""
    strata = _require_two_strata(strata)
    u = rng.random(strata.shape[0])
    rate = np.where(strata == LOW, model.gamma_low, model.gamma_high)
    return np.where(u < rate, HIGH - strata, strata).astype(np.int8)


def _nonignorable_cutoffs(cohort: Cohort, model: MisclassModel) -> tuple[float, float]:
    out = cohort.outcome
    low_mean = out.mean(LOW, 0)
    high_mean = out.mean(HIGH, 1)
    return low_mean, high_mean


def apply_nonignorable1(cohort: Cohort, model: MisclassModel) -> np.ndarray:
    """Flip the top of the lower stratum and the bottom of the upper one.

    Lower patients flip when the control-arm outcome reaches its upper
    ``gamma_low`` tail; upper patients flip when the arm-1 outcome falls
    in its lower ``gamma_high`` tail.
    """
    strata = _require_two_strata(cohort.true_strata)
    low_mean, high_mean = _nonignorable_cutoffs(cohort, model)
    sigma = cohort.outcome.sigma
    q_low = low_mean + sigma * norm.ppf(1.0 - model.gamma_low)
    q_high = high_mean + sigma * norm.ppf(model.gamma_high)
    flip = np.where(
        strata == LOW,
        cohort.potentials[:, 0] >= q_low,
        cohort.potentials[:, 1] <= q_high,
    )
    return np.where(flip, HIGH - strata, strata).astype(np.int8)


def apply_nonignorable2(cohort: Cohort, model: MisclassModel) -> np.ndarray:
    """Flip the bottom of the lower stratum and the top of the upper one."""
    strata = _require_two_strata(cohort.true_strata)
    low_mean, high_mean = _nonignorable_cutoffs(cohort, model)
    sigma = cohort.outcome.sigma
    q_low = low_mean + sigma * norm.ppf(model.gamma_low)
    q_high = high_mean + sigma * norm.ppf(1.0 - model.gamma_high)
    flip = np.where(
        strata == LOW,
        cohort.potentials[:, 0] <= q_low,
        cohort.potentials[:, 1] >= q_high,
    )
    return np.where(flip, HIGH - strata, strata).astype(np.int8)


def reported_strata(
    cohort: Cohort, model: MisclassModel, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Dispatch to the model-specific flip rule."""
    if model.kind == "ignorable":
        if rng is None:
            raise ConfigurationError("ignorable misclassification needs an rng")
        return apply_ignorable(cohort.true_strata, model, rng)
    if model.kind == "nonignorable1":
        return apply_nonignorable1(cohort, model)
    return apply_nonignorable2(cohort, model)
