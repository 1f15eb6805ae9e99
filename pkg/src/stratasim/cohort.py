"""Simulated patient populations with correlated potential outcomes.

Each patient belongs to a true stratum and carries one potential outcome
per treatment arm.  Outcomes share a single latent factor, giving every
pair of arms the same correlation ``rho``:

    y_a = mean(stratum, arm a) + sigma * (sqrt(rho) * u + sqrt(1 - rho) * e_a)

with ``u`` and the ``e_a`` independent standard normals.  At ``rho = 1``
the arm difference is the same constant ``delta`` for every patient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .randomizer import TrialDesign


@dataclass(frozen=True)
class OutcomeModel:
    """Normal outcome model: control-arm means by stratum, shift ``delta``
    for every active arm, common scale ``sigma``, pairwise correlation
    ``rho`` between arms."""

    rho: float = 1.0
    delta: float = 0.5
    strata_means: tuple[float, ...] = (0.0, 1.0)
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigurationError(f"rho must lie in [0, 1], got {self.rho}")
        if self.sigma <= 0.0:
            raise ConfigurationError(f"sigma must be positive, got {self.sigma}")
        object.__setattr__(self, "strata_means", tuple(float(m) for m in self.strata_means))

    def mean(self, stratum: int, arm: int) -> float:
        """Mean outcome for a stratum/arm cell."""
        base = self.strata_means[stratum]
        return base + self.delta if arm >= 1 else base


@dataclass
class Patient:
    """Read-only view of one cohort row."""

    index: int
    true_stratum: int
    potentials: tuple[float, ...]
    reported_stratum: int | None = None
    treatment: int | None = None
    observed: float | None = None


@dataclass
class Cohort:
    """Array-backed cohort in enrollment order.

    ``potentials`` has one column per arm.  ``reported``, ``treatments``,
    and ``observed`` start unset and are filled by the misclassification
    and randomization steps.
    """

    true_strata: np.ndarray
    potentials: np.ndarray
    outcome: OutcomeModel
    reported: np.ndarray | None = None
    treatments: np.ndarray | None = None
    observed: np.ndarray | None = None

    @property
    def n_patients(self) -> int:
        return len(self.true_strata)

    @property
    def n_arms(self) -> int:
        return self.potentials.shape[1]

    def patient(self, i: int) -> Patient:
        return Patient(
            index=i,
            true_stratum=int(self.true_strata[i]),
            potentials=tuple(float(v) for v in self.potentials[i]),
            reported_stratum=None if self.reported is None else int(self.reported[i]),
            treatment=None if self.treatments is None else int(self.treatments[i]),
            observed=None if self.observed is None else float(self.observed[i]),
        )


def sample_strata(design: TrialDesign, rng: np.random.Generator) -> np.ndarray:
    """Draw true stratum labels iid from the design's strata probabilities."""
    cum = np.cumsum(design.strata_probs)
    labels = np.searchsorted(cum, rng.random(design.n_patients), side="right")
    return np.minimum(labels, design.n_strata - 1).astype(np.int8)


def sample_potential_outcomes(
    strata: np.ndarray,
    model: OutcomeModel,
    rng: np.random.Generator,
    n_arms: int = 3,
) -> np.ndarray:
    """Draw the (n_patients, n_arms) matrix of potential outcomes."""
    strata = np.asarray(strata)
    if strata.size and int(strata.max()) >= len(model.strata_means):
        raise ConfigurationError(
            f"stratum label {int(strata.max())} has no mean in {model.strata_means!r}"
        )
    n = strata.shape[0]
    shared = rng.standard_normal(n)
    own = rng.standard_normal((n, n_arms))
    noise = np.sqrt(model.rho) * shared[:, None] + np.sqrt(1.0 - model.rho) * own
    means = np.asarray(model.strata_means)[strata][:, None] + model.delta * (
        np.arange(n_arms) >= 1
    )
    return means + model.sigma * noise


def sample_cohort(
    design: TrialDesign,
    model: OutcomeModel,
    rng: np.random.Generator,
    n_arms: int | None = None,
) -> Cohort:
    """Draw strata and potential outcomes for a full cohort."""
    if len(model.strata_means) != design.n_strata:
        raise ConfigurationError(
            f"outcome model has {len(model.strata_means)} strata means, "
            f"design has {design.n_strata} strata"
        )
    arms = design.allocation.n_arms if n_arms is None else n_arms
    strata = sample_strata(design, rng)
    potentials = sample_potential_outcomes(strata, model, rng, arms)
    return Cohort(true_strata=strata, potentials=potentials, outcome=model)


def observed_outcomes(potentials: np.ndarray, treatments: np.ndarray) -> np.ndarray:
    """Select each patient's outcome under the assigned arm."""
    treatments = np.asarray(treatments)
    return potentials[np.arange(len(treatments)), treatments]
