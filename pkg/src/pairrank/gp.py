"""Bayesian score inference: Gaussian prior, logistic observations, EP.

Each item gets an independent Gaussian prior on its latent score. A decisive
comparison contributes a logistic factor on the score difference d = s_a - s_b
(a tie contributes the symmetric half-weight product of both directions).
The posterior is approximated by Expectation Propagation with one Gaussian
site per comparison, moment-matched against its cavity by Gauss-Hermite
quadrature; sites are visited sequentially in record order with damping.
128 quadrature nodes keep the moment error below 1e-6 even for wide,
far-off-center cavities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import expit, log_expit

from .data import (
    Dataset,
    GaussianRating,
    ItemId,
    Outcome,
    OutcomeDistribution,
    ScoreTable,
)


@dataclass(frozen=True)
class GpParams:
    prior_var: float = 1.0
    quad_order: int = 128
    damping: float = 0.5
    max_sweeps: int = 100
    tol: float = 1e-6

    def __post_init__(self):
        if self.prior_var <= 0:
            raise ValueError(f"prior_var must be positive, got {self.prior_var}")
        if self.quad_order < 8:
            raise ValueError(f"quad_order must be at least 8, got {self.quad_order}")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError(f"damping must be in (0, 1], got {self.damping}")
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")


@dataclass
class EpSite:
    """Natural parameters of one approximate factor on a score difference."""

    precision: float = 0.0
    precision_mean: float = 0.0


@dataclass
class PosteriorTable:
    """Per-item posterior beliefs plus EP convergence diagnostics."""

    ratings: dict[ItemId, GaussianRating]
    sweeps: int
    max_delta: float
    converged: bool
    cavity_skips: int = 0
    prior_var: float = 1.0
    params: dict = field(default_factory=dict)
    sites: list[EpSite] = field(default_factory=list)

    def score_table(self) -> ScoreTable:
        return ScoreTable(
            {i: r.mu for i, r in self.ratings.items()},
            method="gp",
            params={**self.params, "converged": self.converged, "sweeps": self.sweeps},
            ratings=self.ratings,
        )


@lru_cache(maxsize=8)
def _hermgauss(order: int):
    nodes, weights = np.polynomial.hermite.hermgauss(order)
    return nodes, weights / math.sqrt(math.pi)


def _log_likelihood(d: np.ndarray, outcome: Outcome) -> np.ndarray:
    if outcome is Outcome.WIN_A:
        return log_expit(d)
    if outcome is Outcome.WIN_B:
        return log_expit(-d)
    return 0.5 * (log_expit(d) + log_expit(-d))


def tilted_moments(
    cavity_mean: float, cavity_var: float, outcome: Outcome, quad_order: int = 128
) -> tuple[float, float, float]:
    """Moments of cavity x likelihood, by Gauss-Hermite quadrature.

    Returns (mean, variance, log normalizer) of
    Z^-1 N(d; cavity_mean, cavity_var) L(d).
    """
    if cavity_var <= 0:
        raise ValueError(f"cavity variance must be positive, got {cavity_var}")
    nodes, weights = _hermgauss(quad_order)
    offsets = math.sqrt(2.0 * cavity_var) * nodes
    log_l = _log_likelihood(cavity_mean + offsets, outcome)
    peak = log_l.max()
    scaled = weights * np.exp(log_l - peak)
    z = scaled.sum()
    mean_off = float((scaled @ offsets) / z)
    var = float((scaled @ (offsets - mean_off) ** 2) / z)
    return cavity_mean + mean_off, var, float(math.log(z) + peak)


def ep_fit(train: Dataset, params: GpParams | None = None) -> PosteriorTable:
    """Fit the approximate posterior over item scores by sequential EP.

    Non-convergence is reported in the diagnostics, not raised; negative
    cavity variances are skipped for that pass and counted.
    """
    params = params or GpParams()
    if len(train) == 0:
        raise ValueError("train dataset is empty")
    active = train.compared_ids()
    idx = {item: i for i, item in enumerate(active)}
    m = len(active)
    n = len(train)
    ia = np.fromiter((idx[rec.a] for rec in train), dtype=int, count=n)
    ib = np.fromiter((idx[rec.b] for rec in train), dtype=int, count=n)
    outcomes = [rec.outcome for rec in train]

    cov = params.prior_var * np.eye(m)
    mean = np.zeros(m)
    precision = np.zeros(n)
    precision_mean = np.zeros(n)

    sweeps_used = 0
    max_delta = math.inf
    skips = 0
    for sweep in range(params.max_sweeps):
        sweeps_used = sweep + 1
        max_delta = 0.0
        for k in range(n):
            a, b = ia[k], ib[k]
            w = cov[:, a] - cov[:, b]
            var_d = w[a] - w[b]
            if var_d <= 0:
                skips += 1
                continue
            mu_d = mean[a] - mean[b]

            cav_prec = 1.0 / var_d - precision[k]
            if cav_prec <= 1e-12:
                skips += 1
                continue
            cav_var = 1.0 / cav_prec
            cav_mean = cav_var * (mu_d / var_d - precision_mean[k])

            tilt_mean, tilt_var, _ = tilted_moments(
                cav_mean, cav_var, outcomes[k], params.quad_order
            )
            if tilt_var <= 0:
                skips += 1
                continue
            target_prec = max(1.0 / tilt_var - cav_prec, 0.0)
            target_pm = tilt_mean / tilt_var - cav_mean * cav_prec

            new_prec = precision[k] + params.damping * (target_prec - precision[k])
            new_pm = precision_mean[k] + params.damping * (target_pm - precision_mean[k])
            d_prec = new_prec - precision[k]
            d_pm = new_pm - precision_mean[k]
            denom = 1.0 + d_prec * var_d
            if denom <= 1e-12:
                skips += 1
                continue

            cov -= (d_prec / denom) * np.outer(w, w)
            mean += ((d_pm - d_prec * mu_d) / denom) * w
            precision[k] = new_prec
            precision_mean[k] = new_pm
            max_delta = max(max_delta, abs(d_prec), abs(d_pm))
        if max_delta < params.tol:
            break

    mean, cov = _refresh_posterior(m, ia, ib, precision, precision_mean, params.prior_var)

    ratings: dict[ItemId, GaussianRating] = {}
    variances = np.minimum(np.diag(cov), params.prior_var)
    for item, i in idx.items():
        ratings[item] = GaussianRating(float(mean[i]), float(max(variances[i], 1e-300)))
    for item in train.catalog.ids():
        if item not in ratings:
            ratings[item] = GaussianRating(0.0, params.prior_var)

    return PosteriorTable(
        ratings=ratings,
        sweeps=sweeps_used,
        max_delta=max_delta,
        converged=max_delta < params.tol,
        cavity_skips=skips,
        prior_var=params.prior_var,
        params={"prior_var": params.prior_var, "quad_order": params.quad_order},
        sites=[EpSite(float(p), float(h)) for p, h in zip(precision, precision_mean)],
    )


def _refresh_posterior(m, ia, ib, precision, precision_mean, prior_var):
    """Rebuild the joint from site parameters, clearing rank-1 update drift."""
    lam = np.eye(m) / prior_var
    shift = np.zeros(m)
    for k in range(len(ia)):
        a, b = ia[k], ib[k]
        p, h = precision[k], precision_mean[k]
        lam[a, a] += p
        lam[b, b] += p
        lam[a, b] -= p
        lam[b, a] -= p
        shift[a] += h
        shift[b] -= h
    cov = np.linalg.inv(lam)
    return cov @ shift, cov


def predictive_win_probability(
    mu_d: float, var_d: float, quad_order: int = 128, fast: bool = False
) -> float:
    """E[logistic(d)] for d ~ N(mu_d, var_d).

    The fast path uses the standard probit-matched approximation
    logistic(mu / sqrt(1 + pi * var / 8)), good to about 1e-2.
    """
    if var_d < 0:
        raise ValueError(f"variance must be nonnegative, got {var_d}")
    if fast:
        return float(expit(mu_d / math.sqrt(1.0 + math.pi * var_d / 8.0)))
    if var_d == 0:
        return float(expit(mu_d))
    nodes, weights = _hermgauss(quad_order)
    d = mu_d + math.sqrt(2.0 * var_d) * nodes
    return float(weights @ expit(d))


def gp_predict(
    posterior: PosteriorTable,
    a: ItemId,
    b: ItemId,
    tie_share: float = 0.0,
    quad_order: int = 128,
    fast: bool = False,
) -> OutcomeDistribution:
    """Predict an outcome from the posterior marginals of two items."""
    if not 0.0 <= tie_share < 1.0:
        raise ValueError(f"tie_share must be in [0, 1), got {tie_share}")
    for item in (a, b):
        if item not in posterior.ratings:
            raise KeyError(f"item {item!r} has no posterior")
    ra, rb = posterior.ratings[a], posterior.ratings[b]
    p_a = predictive_win_probability(
        ra.mu - rb.mu, ra.sigma2 + rb.sigma2, quad_order=quad_order, fast=fast
    )
    decisive = 1.0 - tie_share
    return OutcomeDistribution(decisive * p_a, decisive * (1.0 - p_a), tie_share)
