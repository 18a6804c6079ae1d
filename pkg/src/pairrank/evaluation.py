"""Experimental harness: metrics, split/seed protocol, grid search.

Methods are evaluated by the negative average log probability of realized
test outcomes and by argmax accuracy, on a seeded train/test split, with
headline numbers averaged over seeds. Binary mode (the default) excludes
tie outcomes from the test metrics and conditions each prediction on a
decisive result; ternary mode keeps the tie channel, sized by the train-set
tie frequency for methods without a native one.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field, is_dataclass
from typing import Callable, Mapping, Sequence

from . import batch, gp, online
from .data import Dataset, ItemId, Outcome, OutcomeDistribution, ScoreTable, split

METHODS = ("elo", "trueskill", "co", "lsr", "gp")

PROB_FLOOR = 1e-12


def log_loss(
    predictions: Sequence[OutcomeDistribution], outcomes: Sequence[Outcome]
) -> float:
    """Negative mean log probability of the realized outcomes (natural log)."""
    if len(predictions) != len(outcomes):
        raise ValueError("predictions and outcomes differ in length")
    if not predictions:
        raise ValueError("empty input")
    total = 0.0
    for dist, outcome in zip(predictions, outcomes):
        p = min(max(dist.prob_of(outcome), PROB_FLOOR), 1.0)
        total += math.log(p)
    return -total / len(predictions)


def accuracy(
    predictions: Sequence[OutcomeDistribution],
    outcomes: Sequence[Outcome],
    mode: str = "binary",
) -> float:
    """Fraction of argmax-correct predictions.

    Binary mode drops tie outcomes first. Equal probabilities break
    deterministically WinA > WinB > Tie.
    """
    if len(predictions) != len(outcomes):
        raise ValueError("predictions and outcomes differ in length")
    if mode == "binary":
        kept = [(d, o) for d, o in zip(predictions, outcomes) if o is not Outcome.TIE]
        if not kept:
            raise ValueError("binary mode: no decisive outcomes to score")
    elif mode == "ternary":
        kept = list(zip(predictions, outcomes))
        if not kept:
            raise ValueError("empty input")
    else:
        raise ValueError(f"unknown mode {mode!r}")
    hits = sum(1 for d, o in kept if d.argmax() is o)
    return hits / len(kept)


# ---------------------------------------------------------------------------
# Method dispatch


def make_params(method: str, overrides=None):
    """Build a parameter object for a method from a dict of overrides."""
    if overrides is not None and is_dataclass(overrides):
        return overrides
    d = dict(overrides or {})
    if method == "elo":
        if "s0" in d:
            d["initial_score"] = d.pop("s0")
        return online.EloParams(**d)
    if method == "trueskill":
        factor = d.pop("epsilon_c", None)
        p = online.TrueSkillParams(**d)
        if factor is not None:
            p = online.TrueSkillParams(
                mu0=p.mu0, sigma0=p.sigma0, beta=p.beta, epsilon=factor * p.initial_c()
            )
        return p
    if method == "co":
        return batch.CoParams(**d)
    if method == "lsr":
        return batch.LsrParams(**d)
    if method == "gp":
        return gp.GpParams(**d)
    raise ValueError(f"unknown method {method!r}")


def params_dict(params) -> dict:
    return asdict(params) if is_dataclass(params) else dict(params or {})


@dataclass
class FittedModel:
    """A fitted rater exposing a uniform prediction surface."""

    method: str
    table: ScoreTable
    tie_share: float
    _predict: Callable[[ItemId, ItemId, float], OutcomeDistribution]
    fallbacks: int = 0

    def predict(self, a: ItemId, b: ItemId, mode: str = "binary") -> OutcomeDistribution:
        tie_share = 0.0 if mode == "binary" else self.tie_share
        if a not in self.table or b not in self.table:
            # unseen item: no information, fall back to the uniform prior
            self.fallbacks += 1
            rest = (1.0 - tie_share) / 2.0
            return OutcomeDistribution(rest, rest, tie_share)
        dist = self._predict(a, b, tie_share)
        if mode == "binary" and dist.p_tie > 0.0:
            decisive = dist.p_win_a + dist.p_win_b
            if decisive <= 0.0:
                return OutcomeDistribution(0.5, 0.5, 0.0)
            return OutcomeDistribution(dist.p_win_a / decisive, dist.p_win_b / decisive, 0.0)
        return dist


def fit_method(method: str, train: Dataset, params=None) -> FittedModel:
    """Fit one rater on the training records."""
    params = make_params(method, params)
    tie_share = train.tie_fraction()

    if method == "elo":
        table = online.rate_elo(train, params)

        def predict(a, b, tau, _t=table, _p=params):
            return online.elo_predict(_t.score(a), _t.score(b), _p, tie_rate=tau)

    elif method == "trueskill":
        table = online.rate_trueskill(train, params)

        def predict(a, b, tau, _t=table, _p=params):
            # native tie channel from the draw margin; tau is ignored
            return online.ts_predict(_t.ratings[a], _t.ratings[b], _p)

    elif method == "co":
        table = batch.co_fit(train, params)

        def predict(a, b, tau, _t=table):
            return batch.bt_predict(_t, a, b, tie_share=tau)

    elif method == "lsr":
        table = batch.lsr_fit(train, params)

        def predict(a, b, tau, _t=table):
            return batch.bt_predict(_t, a, b, tie_share=tau)

    elif method == "gp":
        posterior = gp.ep_fit(train, params)
        table = posterior.score_table()

        def predict(a, b, tau, _post=posterior):
            return gp.gp_predict(_post, a, b, tie_share=tau)

    else:
        raise ValueError(f"unknown method {method!r}")

    return FittedModel(method=method, table=table, tie_share=tie_share, _predict=predict)


# ---------------------------------------------------------------------------
# Protocol


@dataclass
class SeedResult:
    seed: int
    log_loss: float
    accuracy: float
    n_test: int


@dataclass
class EvaluationReport:
    method: str
    params: dict
    mode: str
    log_loss: float
    accuracy: float
    seeds: list[int]
    per_seed: list[SeedResult] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "params": self.params,
            "mode": self.mode,
            "log_loss": self.log_loss,
            "accuracy": self.accuracy,
            "seeds": self.seeds,
            "per_seed": [asdict(s) for s in self.per_seed],
        }


def evaluate(
    dataset: Dataset,
    method: str,
    params=None,
    test_fraction: float = 0.15,
    seeds: Sequence[int] = (1, 2, 3, 4, 5),
    mode: str = "binary",
) -> EvaluationReport:
    """Split/fit/score once per seed; report per-seed metrics and their means."""
    if len(dataset) < 2:
        raise ValueError("need at least 2 records to evaluate")
    if mode not in ("binary", "ternary"):
        raise ValueError(f"unknown mode {mode!r}")
    params = make_params(method, params)
    per_seed = []
    for seed in seeds:
        train, test = split(dataset, test_fraction, seed)
        try:
            fitted = fit_method(method, train, params)
            test_records = [
                r for r in test if mode == "ternary" or r.outcome is not Outcome.TIE
            ]
            if not test_records:
                raise ValueError("no test outcomes to score after tie filtering")
            predictions = [fitted.predict(r.a, r.b, mode=mode) for r in test_records]
            outcomes = [r.outcome for r in test_records]
            per_seed.append(
                SeedResult(
                    seed=seed,
                    log_loss=log_loss(predictions, outcomes),
                    accuracy=accuracy(predictions, outcomes, mode=mode),
                    n_test=len(test_records),
                )
            )
        except (ValueError, RuntimeError, KeyError) as exc:
            raise RuntimeError(f"evaluation failed at seed {seed}: {exc}") from exc
    return EvaluationReport(
        method=method,
        params=params_dict(params),
        mode=mode,
        log_loss=sum(r.log_loss for r in per_seed) / len(per_seed),
        accuracy=sum(r.accuracy for r in per_seed) / len(per_seed),
        seeds=list(seeds),
        per_seed=per_seed,
    )


Grid = Mapping[str, Sequence]


def default_grid(method: str) -> dict[str, list]:
    sigma0 = 25.0 / 3.0
    grids: dict[str, dict[str, list]] = {
        "elo": {"k": [8.0, 16.0, 32.0, 64.0], "delta": [200.0, 400.0, 800.0]},
        "trueskill": {"beta": [sigma0 / 2.0, sigma0], "epsilon_c": [0.05, 0.1, 0.2]},
        "co": {"epsilon": [0.5, 1.0, 2.0], "lambda_ties": [0.0, 0.5, 1.0]},
        "gp": {"prior_var": [0.5, 1.0, 4.0]},
        "lsr": {"alpha_reg": [0.01, 0.1, 1.0]},
    }
    if method not in grids:
        raise ValueError(f"unknown method {method!r}")
    return grids[method]


def grid_cells(grid: Grid) -> list[dict]:
    """Cartesian product of the grid, in deterministic declaration order."""
    if not grid:
        raise ValueError("empty grid")
    keys = list(grid.keys())
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def grid_search(
    dataset: Dataset,
    method: str,
    grid: Grid | None = None,
    test_fraction: float = 0.15,
    seeds: Sequence[int] = (1, 2, 3, 4, 5),
    mode: str = "binary",
) -> tuple[dict, list[EvaluationReport]]:
    """Evaluate every grid cell; best = lowest mean log loss.

    Ties break on higher accuracy, then on earlier cell order.
    """
    grid = grid if grid is not None else default_grid(method)
    cells = grid_cells(grid)
    reports = [
        evaluate(dataset, method, cell, test_fraction=test_fraction, seeds=seeds, mode=mode)
        for cell in cells
    ]
    best_i = min(
        range(len(reports)),
        key=lambda i: (reports[i].log_loss, -reports[i].accuracy, i),
    )
    return cells[best_i], reports


def normalize_scores(table: ScoreTable) -> ScoreTable:
    """Min-max map scores onto [0, 1]; rank order is preserved exactly."""
    if len(table) < 2:
        raise ValueError("need at least 2 scores to normalize")
    values = table.scores.values()
    lo, hi = min(values), max(values)
    params = {**table.params, "normalized": True}
    if hi == lo:
        params["degenerate"] = True
        scores = {item: 0.5 for item in table.scores}
    else:
        span = hi - lo
        scores = {item: (s - lo) / span for item, s in table.scores.items()}
    return ScoreTable(scores, method=table.method, params=params, ratings=table.ratings)
