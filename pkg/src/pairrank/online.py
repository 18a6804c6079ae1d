"""Sequential raters updated one comparison at a time: Elo and TrueSkill.

Both consume records strictly in dataset order. Elo moves point scores by a
gain times (actual - expected); TrueSkill keeps a Gaussian belief per item
and applies the standard two-player truncated-Gaussian moment updates
(winner mean up, loser mean down, variances contracted by the w factor
scaled with sigma^2/c^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import log_ndtr, ndtr, ndtri

from .data import Dataset, GaussianRating, Outcome, OutcomeDistribution, ScoreTable

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Elo


@dataclass(frozen=True)
class EloParams:
    initial_score: float = 1500.0
    k: float = 32.0
    delta: float = 400.0

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError(f"k must be positive, got {self.k}")
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")


def elo_expected(s_a: float, s_b: float, delta: float = 400.0) -> float:
    """Expected result for the first item: 1 / (1 + 10^((s_b - s_a)/delta))."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    return 1.0 / (1.0 + 10.0 ** ((s_b - s_a) / delta))


def _gamma_a(outcome: Outcome) -> float:
    if outcome is Outcome.WIN_A:
        return 1.0
    if outcome is Outcome.WIN_B:
        return 0.0
    return 0.5


def elo_update(
    s_a: float, s_b: float, outcome: Outcome, params: EloParams
) -> tuple[float, float]:
    """One Elo step for both items.

    A single shared transfer k*(gamma - E_A) keeps the update exactly
    zero-sum; the loser's own-expectation form is algebraically identical.
    """
    expected_a = elo_expected(s_a, s_b, params.delta)
    transfer = params.k * (_gamma_a(outcome) - expected_a)
    return s_a + transfer, s_b - transfer


def elo_predict(
    s_a: float, s_b: float, params: EloParams, tie_rate: float = 0.0
) -> OutcomeDistribution:
    """Outcome probabilities from the Elo expectation.

    Binary by default (p_tie = 0). With a calibrated tie rate tau, the tie
    channel gets tau and the decisive mass splits proportionally.
    """
    if not 0.0 <= tie_rate < 1.0:
        raise ValueError(f"tie_rate must be in [0, 1), got {tie_rate}")
    expected_a = elo_expected(s_a, s_b, params.delta)
    decisive = 1.0 - tie_rate
    return OutcomeDistribution(
        p_win_a=decisive * expected_a,
        p_win_b=decisive * (1.0 - expected_a),
        p_tie=tie_rate,
    )


# ---------------------------------------------------------------------------
# TrueSkill


@dataclass(frozen=True)
class TrueSkillParams:
    mu0: float = 25.0
    sigma0: float = 25.0 / 3.0
    beta: float = 25.0 / 6.0
    # Draw margin on the performance-difference scale. Defaults to 0.1 of the
    # initial c = sqrt(2 beta^2 + 2 sigma0^2).
    epsilon: float | None = None

    def __post_init__(self):
        if self.sigma0 <= 0:
            raise ValueError(f"sigma0 must be positive, got {self.sigma0}")
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", 0.1 * self.initial_c())
        elif self.epsilon < 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")

    def initial_c(self) -> float:
        return math.sqrt(2.0 * self.beta**2 + 2.0 * self.sigma0**2)

    def initial_rating(self) -> GaussianRating:
        return GaussianRating(self.mu0, self.sigma0**2)


def draw_margin_from_tie_rate(tie_rate: float, beta: float) -> float:
    """Margin at which two evenly matched items tie with the given frequency."""
    if not 0.0 <= tie_rate < 1.0:
        raise ValueError(f"tie_rate must be in [0, 1), got {tie_rate}")
    return ndtri((tie_rate + 1.0) / 2.0) * math.sqrt(2.0) * beta


def _norm_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x - _LOG_SQRT_2PI)


def _v_win(t: float, eps: float) -> float:
    # pdf/cdf in the log domain: stable for arguments far below -8
    x = t - eps
    return math.exp(-0.5 * x * x - _LOG_SQRT_2PI - float(log_ndtr(x)))


def _w_win(t: float, eps: float) -> float:
    v = _v_win(t, eps)
    w = v * (v + t - eps)
    return min(max(w, 0.0), 1.0)


def _v_draw(t: float, eps: float) -> float:
    ta = abs(t)
    sign = -1.0 if t < 0 else 1.0
    lo, hi = -eps - ta, eps - ta
    denom = float(ndtr(hi) - ndtr(lo))
    if denom <= 0.0:
        return sign * hi  # eps -> 0 or far-apart limit
    return sign * (_norm_pdf(lo) - _norm_pdf(hi)) / denom


def _w_draw(t: float, eps: float) -> float:
    ta = abs(t)
    lo, hi = -eps - ta, eps - ta
    denom = float(ndtr(hi) - ndtr(lo))
    if denom <= 0.0:
        return 1.0
    v = _v_draw(ta, eps)
    w = v * v + (hi * _norm_pdf(hi) - lo * _norm_pdf(lo)) / denom
    return min(max(w, 0.0), 1.0)


def ts_update(
    r_a: GaussianRating,
    r_b: GaussianRating,
    outcome: Outcome,
    params: TrueSkillParams,
) -> tuple[GaussianRating, GaussianRating]:
    """Two-player TrueSkill moment update for one comparison."""
    c2 = 2.0 * params.beta**2 + r_a.sigma2 + r_b.sigma2
    c = math.sqrt(c2)
    eps_c = params.epsilon / c

    if outcome is Outcome.TIE:
        t = (r_a.mu - r_b.mu) / c
        v = _v_draw(t, eps_c)
        w = _w_draw(t, eps_c)
        mu_a = r_a.mu + (r_a.sigma2 / c) * v
        mu_b = r_b.mu - (r_b.sigma2 / c) * v
    else:
        if outcome is Outcome.WIN_A:
            winner, loser = r_a, r_b
        else:
            winner, loser = r_b, r_a
        t = (winner.mu - loser.mu) / c
        v = _v_win(t, eps_c)
        w = _w_win(t, eps_c)
        mu_w = winner.mu + (winner.sigma2 / c) * v
        mu_l = loser.mu - (loser.sigma2 / c) * v
        if outcome is Outcome.WIN_A:
            mu_a, mu_b = mu_w, mu_l
        else:
            mu_a, mu_b = mu_l, mu_w

    sig2_a = r_a.sigma2 * max(1.0 - (r_a.sigma2 / c2) * w, 1e-12)
    sig2_b = r_b.sigma2 * max(1.0 - (r_b.sigma2 / c2) * w, 1e-12)
    return GaussianRating(mu_a, sig2_a), GaussianRating(mu_b, sig2_b)


def ts_predict(
    r_a: GaussianRating, r_b: GaussianRating, params: TrueSkillParams
) -> OutcomeDistribution:
    """Predictive outcome probabilities under the Gaussian difference model."""
    c = math.sqrt(2.0 * params.beta**2 + r_a.sigma2 + r_b.sigma2)
    diff = r_a.mu - r_b.mu
    p_a = float(ndtr((diff - params.epsilon) / c))
    p_b = float(ndtr((-diff - params.epsilon) / c))
    return OutcomeDistribution(p_a, p_b, max(1.0 - p_a - p_b, 0.0))


# ---------------------------------------------------------------------------
# Sequence driver


def rate_elo(data: Dataset, params: EloParams | None = None) -> ScoreTable:
    params = params or EloParams()
    scores = {i: params.initial_score for i in data.catalog.ids()}
    for rec in data:
        scores[rec.a], scores[rec.b] = elo_update(
            scores[rec.a], scores[rec.b], rec.outcome, params
        )
    return ScoreTable(
        scores,
        method="elo",
        params={"s0": params.initial_score, "k": params.k, "delta": params.delta},
    )


def rate_trueskill(
    data: Dataset,
    params: TrueSkillParams | None = None,
    conservative: bool = False,
) -> ScoreTable:
    """Run TrueSkill over the records; score is mu (or mu - 3 sigma)."""
    params = params or TrueSkillParams()
    ratings = {i: params.initial_rating() for i in data.catalog.ids()}
    for rec in data:
        ratings[rec.a], ratings[rec.b] = ts_update(
            ratings[rec.a], ratings[rec.b], rec.outcome, params
        )
    if conservative:
        scores = {i: r.mu - 3.0 * r.sigma for i, r in ratings.items()}
    else:
        scores = {i: r.mu for i, r in ratings.items()}
    return ScoreTable(
        scores,
        method="trueskill",
        params={
            "mu0": params.mu0,
            "sigma0": params.sigma0,
            "beta": params.beta,
            "epsilon": params.epsilon,
            "conservative": conservative,
        },
        ratings=ratings,
    )


def rate_sequence(data: Dataset, method: str, params=None) -> ScoreTable:
    """Apply an online rater to the whole dataset in record order."""
    if method == "elo":
        return rate_elo(data, params)
    if method == "trueskill":
        return rate_trueskill(data, params)
    raise ValueError(f"unknown online method {method!r}")


__all__ = [
    "EloParams",
    "TrueSkillParams",
    "draw_margin_from_tie_rate",
    "elo_expected",
    "elo_update",
    "elo_predict",
    "ts_update",
    "ts_predict",
    "rate_elo",
    "rate_trueskill",
    "rate_sequence",
]
