"""Model-based analysis of a randomized cohort.

The working model regresses the observed outcome on an intercept, a
stratum indicator, and one indicator per active arm:

    y ~ 1 + 1{stratum high} + 1{T = 1} + ... + 1{T = t}

with a single residual variance.  The target quantity is the arm-1
coefficient (treatment effect versus control).  Confidence intervals
and tests use the t distribution on the residual degrees of freedom.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
from scipy.special import stdtr, stdtrit

from .errors import ConfigurationError, DegenerateDesignError

# relative pivot tolerance for declaring a design column redundant
RANK_TOL = 1e-10


@dataclass(frozen=True)
class ModelFit:
    """Coefficients, standard errors, and residual variance of one fit."""

    terms: tuple[str, ...]
    coef: np.ndarray
    se: np.ndarray
    df: int
    sigma2: float
    n_obs: int

    def coefficient(self, term: str) -> float:
        return float(self.coef[self.terms.index(term)])

    def stderr(self, term: str) -> float:
        return float(self.se[self.terms.index(term)])


@dataclass(frozen=True)
class AnalysisResult:
    """Estimate, CI, and test for one coefficient of a fitted model."""

    term: str
    estimate: float
    se: float
    df: int
    ci_low: float
    ci_high: float
    statistic: float
    p_value: float
    alpha: float
    null_value: float
    strata_used: str = ""


def _stratum_columns(strata: np.ndarray) -> tuple[list[np.ndarray], list[str]]:
    """Indicator columns for every non-baseline stratum present.

    A stratum with no patients contributes no column, so a cohort that
    happens to land entirely in one stratum is fit without the stratum
    term (one fewer model degree of freedom).
    """
    levels = np.unique(strata)
    cols, names = [], []
    for level in levels[1:]:
        cols.append((strata == level).astype(float))
        names.append(f"stratum{int(level)}")
    return cols, names


def _arm_columns(treatments: np.ndarray, n_arms: int) -> tuple[list[np.ndarray], list[str]]:
    counts = np.bincount(treatments, minlength=n_arms)
    if (counts[:n_arms] == 0).any():
        empty = int(np.flatnonzero(counts[:n_arms] == 0)[0])
        raise DegenerateDesignError(f"arm {empty} has no patients")
    cols, names = [], []
    for arm in range(1, n_arms):
        cols.append((treatments == arm).astype(float))
        names.append(f"treat{arm}")
    return cols, names


def fit_model(
    y: np.ndarray,
    treatments: np.ndarray,
    strata_covariate: np.ndarray,
    n_arms: int | None = None,
) -> ModelFit:
    """Fit the homogeneous-variance stratum-adjusted model by least squares.

    Normal equations are solved through a column-pivoted QR of the design
    matrix; a pivot below ``RANK_TOL`` relative to the largest marks the
    design rank deficient, which raises ``DegenerateDesignError`` (as does
    an arm with no patients).
    """
    y = np.asarray(y, dtype=float)
    treatments = np.asarray(treatments, dtype=np.int64)
    strata_covariate = np.asarray(strata_covariate)
    n = y.shape[0]
    if treatments.shape[0] != n or strata_covariate.shape[0] != n:
        raise ConfigurationError("y, treatments, and strata must have equal length")
    arms = int(treatments.max()) + 1 if n_arms is None else n_arms

    cols = [np.ones(n)]
    names = ["intercept"]
    s_cols, s_names = _stratum_columns(strata_covariate)
    a_cols, a_names = _arm_columns(treatments, arms)
    cols += s_cols + a_cols
    names += s_names + a_names

    x = np.column_stack(cols)
    k = x.shape[1]
    if n < k:
        raise DegenerateDesignError(f"{n} observations cannot identify {k} columns")

    q, r, piv = scipy.linalg.qr(x, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size and (diag < RANK_TOL * diag[0]).any():
        raise DegenerateDesignError("design matrix is rank deficient after column drops")

    beta_piv = scipy.linalg.solve_triangular(r, q.T @ y)
    rinv = scipy.linalg.solve_triangular(r, np.eye(k))
    unscaled_piv = rinv @ rinv.T

    inv_piv = np.empty(k, dtype=int)
    inv_piv[piv] = np.arange(k)
    beta = beta_piv[inv_piv]
    unscaled = unscaled_piv[np.ix_(inv_piv, inv_piv)]

    resid = y - x @ beta
    rss = float(resid @ resid)
    df = n - k
    sigma2 = rss / df if df > 0 else float("nan")
    se = np.sqrt(np.maximum(sigma2, 0.0) * np.diag(unscaled)) if df > 0 else np.full(k, np.nan)
    return ModelFit(
        terms=tuple(names), coef=beta, se=se, df=df, sigma2=sigma2, n_obs=n
    )


@lru_cache(maxsize=64)
def _t_critical(alpha: float, df: int) -> float:
    return float(stdtrit(df, 1.0 - alpha / 2.0))


def ci_and_test(
    fit: ModelFit,
    alpha: float = 0.05,
    null_value: float = 0.0,
    term: str = "treat1",
    strata_used: str = "",
) -> AnalysisResult:
    """Two-sided CI and t test for one coefficient of the fit."""
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha}")
    if fit.df < 1:
        raise DegenerateDesignError("no residual degrees of freedom for a t interval")
    estimate = fit.coefficient(term)
    se = fit.stderr(term)
    crit = _t_critical(alpha, fit.df)
    if se > 0.0:
        stat = (estimate - null_value) / se
        p = float(2.0 * stdtr(fit.df, -abs(stat)))
    else:
        stat = 0.0 if estimate == null_value else float("inf") * np.sign(estimate - null_value)
        p = 1.0 if estimate == null_value else 0.0
    return AnalysisResult(
        term=term,
        estimate=estimate,
        se=se,
        df=fit.df,
        ci_low=estimate - crit * se,
        ci_high=estimate + crit * se,
        statistic=float(stat),
        p_value=p,
        alpha=alpha,
        null_value=null_value,
        strata_used=strata_used,
    )


def batched_treatment_tstats(
    y: np.ndarray,
    strata_covariate: np.ndarray,
    treatment_draws: np.ndarray,
    n_arms: int,
    target_arm: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """t statistics of one arm coefficient across many treatment vectors.

    Fits the same model as ``fit_model`` for every row of
    ``treatment_draws`` at once via batched normal equations.  Returns
    ``(tstats, valid)``; a draw is invalid when an arm is empty or the
    normal equations are numerically singular, and its statistic is NaN.
    Agrees with ``fit_model`` coefficient by coefficient on valid draws.
    """
    y = np.asarray(y, dtype=float)
    t_draws = np.asarray(treatment_draws)
    n_draws, n = t_draws.shape
    if y.shape[0] != n:
        raise ConfigurationError("y length does not match treatment draws")

    s_cols, _ = _stratum_columns(np.asarray(strata_covariate))
    n_fixed = 1 + len(s_cols)
    k = n_fixed + (n_arms - 1)
    target_col = n_fixed + (target_arm - 1)
    if not 1 <= target_arm < n_arms:
        raise ConfigurationError(f"target arm {target_arm} outside 1..{n_arms - 1}")
    if n < k:
        raise DegenerateDesignError(f"{n} observations cannot identify {k} columns")

    # arm columns are disjoint indicators and the rest of the design is
    # fixed across draws, so the normal equations assemble from per-arm
    # counts and cross sums instead of per-draw design matrices
    fixed = np.column_stack([np.ones(n)] + s_cols)
    fff = fixed.T @ fixed
    ffy = fixed.T @ y

    xtx = np.empty((n_draws, k, k))
    xty = np.empty((n_draws, k))
    xtx[:, :n_fixed, :n_fixed] = fff
    xty[:, :n_fixed] = ffy
    xtx[:, n_fixed:, n_fixed:] = 0.0

    arm_counts = np.empty((n_draws, n_arms - 1))
    for arm in range(1, n_arms):
        col = n_fixed + arm - 1
        mask = (t_draws == arm).astype(float)
        cross = mask @ fixed
        arm_counts[:, arm - 1] = cross[:, 0]
        xtx[:, col, :n_fixed] = cross
        xtx[:, :n_fixed, col] = cross
        xtx[:, col, col] = cross[:, 0]
        xty[:, col] = mask @ y

    control = n - arm_counts.sum(axis=1)
    valid = (arm_counts >= 1).all(axis=1) & (control >= 1)
    xtx[~valid] = np.eye(k)

    try:
        inv = np.linalg.inv(xtx)
    except np.linalg.LinAlgError:
        # freak collinearity beyond empty cells: fall back row by row
        inv = np.empty((n_draws, k, k))
        singular = np.zeros(n_draws, dtype=bool)
        for b in range(n_draws):
            try:
                inv[b] = np.linalg.inv(xtx[b])
            except np.linalg.LinAlgError:
                singular[b] = True
                inv[b] = np.nan
        valid &= ~singular
        inv[~valid] = np.eye(k)
    beta = (inv @ xty[:, :, None])[:, :, 0]

    df = n - k
    rss = np.maximum(y @ y - np.einsum("bk,bk->b", beta, xty), 0.0)
    sigma2 = rss / df if df > 0 else np.full(n_draws, np.nan)
    var = sigma2 * inv[:, target_col, target_col]
    with np.errstate(invalid="ignore", divide="ignore"):
        tstats = beta[:, target_col] / np.sqrt(var)
    valid &= np.isfinite(tstats)
    tstats = np.where(valid, tstats, np.nan)
    return tstats, valid
