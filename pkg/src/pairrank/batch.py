"""Whole-dataset raters: the margin LP and Luce Spectral Ranking.

The margin LP scores items by minimizing total violation of a fixed winner
margin, with an optional penalty pulling tied items together, under a
sum-to-zero identification constraint:

    minimize    sum_n t_n + lambda_ties * sum_q u_q
    subject to  sum(s) = 0
                eps - (s_winner - s_loser) <= t_n,   t_n >= 0
                u_q >= |s_i - s_j|  for each tie pair (via two inequalities)

LSR scores items by the stationary distribution of a Markov chain whose
transition rates encode wins: rate(j -> i) = wins of i over j plus half a
win per tie, plus an optional pseudo-count on observed pairs.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .data import Dataset, ItemId, Outcome, OutcomeDistribution, ScoreTable
from .simplex import OPTIMAL, LinearProgram, LpSolution, lp_solve


class ConvergenceError(RuntimeError):
    """Iterative scheme failed to reach tolerance within the step budget."""


@dataclass(frozen=True)
class CoParams:
    epsilon: float = 1.0
    lambda_ties: float = 1.0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.lambda_ties < 0:
            raise ValueError(f"lambda_ties must be nonnegative, got {self.lambda_ties}")


@dataclass(frozen=True)
class LsrParams:
    alpha_reg: float = 0.1
    tol: float = 1e-12
    max_iters: int = 200_000

    def __post_init__(self):
        if self.alpha_reg < 0:
            raise ValueError(f"alpha_reg must be nonnegative, got {self.alpha_reg}")
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")


# ---------------------------------------------------------------------------
# Margin LP


def _aggregate(train: Dataset):
    """Collapse duplicate records into weighted win and tie pair counts."""
    wins: Counter[tuple[ItemId, ItemId]] = Counter()
    ties: Counter[tuple[ItemId, ItemId]] = Counter()
    for rec in train:
        if rec.outcome is Outcome.WIN_A:
            wins[(rec.a, rec.b)] += 1
        elif rec.outcome is Outcome.WIN_B:
            wins[(rec.b, rec.a)] += 1
        else:
            ties[(min(rec.a, rec.b), max(rec.a, rec.b))] += 1
    return wins, ties


def build_margin_lp(train: Dataset, params: CoParams) -> tuple[LinearProgram, list[ItemId]]:
    """Assemble the margin LP over items that appear in the records.

    Identical comparisons share one slack variable weighted by their count;
    the collapsed program has the same optimum as the one-row-per-record
    form because each slack solves its own one-dimensional subproblem.
    """
    items = sorted(set(i for rec in train for i in (rec.a, rec.b)))
    if not items:
        raise ValueError("train dataset has no records")
    idx = {item: i for i, item in enumerate(items)}
    wins, ties = _aggregate(train)
    win_pairs = sorted(wins)
    tie_pairs = sorted(ties) if params.lambda_ties > 0 else []

    m = len(items)
    n_vars = m + len(win_pairs) + len(tie_pairs)
    c = np.zeros(n_vars)
    names = [f"s[{item}]" for item in items]
    for p, pair in enumerate(win_pairs):
        c[m + p] = float(wins[pair])
        names.append(f"t[{pair[0]}>{pair[1]}]")
    for q, pair in enumerate(tie_pairs):
        c[m + len(win_pairs) + q] = params.lambda_ties * float(ties[pair])
        names.append(f"u[{pair[0]}~{pair[1]}]")

    rows, rhs = [], []
    for p, (winner, loser) in enumerate(win_pairs):
        row = np.zeros(n_vars)
        row[idx[winner]] = -1.0
        row[idx[loser]] = 1.0
        row[m + p] = -1.0
        rows.append(row)
        rhs.append(-params.epsilon)
    for q, (i, j) in enumerate(tie_pairs):
        for sign in (1.0, -1.0):
            row = np.zeros(n_vars)
            row[idx[i]] = sign
            row[idx[j]] = -sign
            row[m + len(win_pairs) + q] = -1.0
            rows.append(row)
            rhs.append(0.0)

    a_eq = np.zeros((1, n_vars))
    a_eq[0, :m] = 1.0
    bounds: list = [(None, None)] * m + [(0.0, None)] * (len(win_pairs) + len(tie_pairs))
    lp = LinearProgram(
        c=c,
        a_ub=np.array(rows) if rows else None,
        b_ub=np.array(rhs) if rhs else None,
        a_eq=a_eq,
        b_eq=np.zeros(1),
        bounds=bounds,
        names=names,
    )
    return lp, items


def _solve_highs(lp: LinearProgram) -> LpSolution:
    from scipy.optimize import linprog
    from scipy.sparse import csr_matrix

    res = linprog(
        lp.c,
        A_ub=csr_matrix(lp.a_ub) if lp.a_ub.shape[0] else None,
        b_ub=lp.b_ub if lp.a_ub.shape[0] else None,
        A_eq=csr_matrix(lp.a_eq) if lp.a_eq.shape[0] else None,
        b_eq=lp.b_eq if lp.a_eq.shape[0] else None,
        bounds=lp.bounds,
        method="highs",
    )
    status = {0: OPTIMAL, 2: "infeasible", 3: "unbounded"}.get(res.status, "error")
    return LpSolution(status=status, x=res.x, objective=res.fun)


# problems beyond this many inequality rows go to the production solver
SIMPLEX_ROW_LIMIT = 400


def co_fit(
    train: Dataset,
    params: CoParams | None = None,
    engine: str = "auto",
) -> ScoreTable:
    """Fit scores by solving the margin LP. Scores sum to zero.

    engine: "simplex" (built-in solver), "highs" (scipy), or "auto"
    (built-in below SIMPLEX_ROW_LIMIT inequality rows).
    """
    params = params or CoParams()
    if len(train) == 0:
        raise ValueError("train dataset is empty")
    lp, items = build_margin_lp(train, params)
    if engine == "auto":
        engine = "simplex" if lp.a_ub.shape[0] <= SIMPLEX_ROW_LIMIT else "highs"
    if engine == "simplex":
        sol = lp_solve(lp)
    elif engine == "highs":
        sol = _solve_highs(lp)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    if sol.status != OPTIMAL:
        raise RuntimeError(f"margin LP unexpectedly {sol.status}")

    scores = {item: float(sol.x[i]) for i, item in enumerate(items)}
    return ScoreTable(
        scores,
        method="co",
        params={
            "epsilon": params.epsilon,
            "lambda_ties": params.lambda_ties,
            "objective": sol.objective,
            "engine": engine,
        },
    )


# ---------------------------------------------------------------------------
# Luce Spectral Ranking


def stationary_distribution(
    rates: np.ndarray, tol: float = 1e-12, max_iters: int = 200_000
) -> np.ndarray:
    """Stationary distribution of the chain with the given transition rates.

    ``rates[i, j]`` is the rate i -> j; the caller guarantees irreducibility.
    Power iteration runs on the uniformized chain (lazy enough to kill
    periodicity), stopping when the global-balance residual drops below tol.
    """
    rates = np.asarray(rates, dtype=float)
    k = rates.shape[0]
    if rates.shape != (k, k):
        raise ValueError(f"rates must be square, got {rates.shape}")
    if np.any(rates < 0):
        raise ValueError("rates must be nonnegative")
    if k == 1:
        return np.ones(1)

    off = rates.copy()
    np.fill_diagonal(off, 0.0)
    out_rate = off.sum(axis=1)
    lam = 2.0 * out_rate.max()
    if lam == 0.0:
        raise ValueError("chain has no transitions")
    transition = off / lam
    np.fill_diagonal(transition, 1.0 - out_rate / lam)

    pi = np.full(k, 1.0 / k)
    residual = np.inf
    for _ in range(max_iters):
        pi = pi @ transition
        pi /= pi.sum()
        residual = np.max(np.abs(pi @ off - pi * out_rate))
        if residual <= tol:
            return pi
    raise ConvergenceError(
        f"stationary distribution: residual {residual:.3e} > tol {tol:.3e} "
        f"after {max_iters} iterations"
    )


def _components(items: list[ItemId], edges) -> list[list[ItemId]]:
    parent = {i: i for i in items}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    groups: dict[ItemId, list[ItemId]] = {}
    for i in items:
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def lsr_fit(train: Dataset, params: LsrParams | None = None) -> ScoreTable:
    """Score items as log stationary probabilities of the comparison chain.

    Items never compared are excluded (listed under params["excluded"]);
    disconnected comparison-graph components are scored independently and
    flagged via params["components"], since cross-component score
    differences carry no information.
    """
    params = params or LsrParams()
    if len(train) == 0:
        raise ValueError("train dataset is empty")
    items = sorted(set(i for rec in train for i in (rec.a, rec.b)))
    idx = {item: i for i, item in enumerate(items)}
    m = len(items)

    weight = np.zeros((m, m))  # weight[i, j]: evidence that i beats j
    observed = set()
    for rec in train:
        ia, ib = idx[rec.a], idx[rec.b]
        observed.add((min(ia, ib), max(ia, ib)))
        if rec.outcome is Outcome.WIN_A:
            weight[ia, ib] += 1.0
        elif rec.outcome is Outcome.WIN_B:
            weight[ib, ia] += 1.0
        else:
            weight[ia, ib] += 0.5
            weight[ib, ia] += 0.5
    for ia, ib in observed:
        weight[ia, ib] += params.alpha_reg
        weight[ib, ia] += params.alpha_reg

    comps = _components(items, [(items[i], items[j]) for i, j in observed])
    scores: dict[ItemId, float] = {}
    for comp in comps:
        if len(comp) == 1:
            scores[comp[0]] = 0.0
            continue
        sub = [idx[i] for i in comp]
        # rate(j -> i) = evidence that i beats j, i.e. the transpose
        rates = weight[np.ix_(sub, sub)].T
        pi = stationary_distribution(rates, tol=params.tol, max_iters=params.max_iters)
        if np.any(pi <= 0):
            raise ConvergenceError("stationary distribution has a zero entry")
        for item, p in zip(comp, pi):
            scores[item] = float(np.log(p))

    excluded = [i for i in train.catalog.ids() if i not in idx]
    return ScoreTable(
        scores,
        method="lsr",
        params={
            "alpha_reg": params.alpha_reg,
            "components": len(comps),
            "excluded": excluded,
        },
    )


def bt_predict(
    scores: ScoreTable, a: ItemId, b: ItemId, tie_share: float = 0.0
) -> OutcomeDistribution:
    """Outcome probabilities from any score table via the logistic link.

    For LSR scores (log stationary probabilities) the decisive win
    probability reduces to pi_a / (pi_a + pi_b).
    """
    if not 0.0 <= tie_share < 1.0:
        raise ValueError(f"tie_share must be in [0, 1), got {tie_share}")
    for item in (a, b):
        if item not in scores:
            raise KeyError(f"item {item!r} has no score")
    p_a = float(expit(scores.score(a) - scores.score(b)))
    decisive = 1.0 - tie_share
    return OutcomeDistribution(decisive * p_a, decisive * (1.0 - p_a), tie_share)
