"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one PASS/FAIL line (through the capture bypass, so the
lines are visible under plain pytest). Recovery metrics on the synthetic
world are pinned on first run into acceptance_pins.json and regression
checked at 1e-9 afterwards.
"""

from __future__ import annotations

import json
import math
import random
import signal
import subprocess
import sys
import threading
import time
from pathlib import Path

import numpy as np
import pytest
import requests
from scipy.stats import kendalltau

from pairrank.batch import CoParams, LsrParams, co_fit, lsr_fit, stationary_distribution
from pairrank.data import GaussianRating, Outcome, ScoreTable
from pairrank.evaluation import evaluate, fit_method, log_loss, normalize_scores
from pairrank.gp import GpParams, ep_fit, tilted_moments
from pairrank.labeling import LabelParams, label_items, thresholds
from pairrank.online import EloParams, TrueSkillParams, elo_expected, elo_update, rate_elo, ts_predict, ts_update
from pairrank.simplex import LinearProgram, lp_solve
from pairrank.simulate import simulate_bt

from conftest import make_dataset
from oracles import (
    dense_logistic_moments,
    exact_two_item_mean_gap,
    stationary_by_linear_solve,
    vertex_enumeration_min,
)

PINS_PATH = Path(__file__).parent / "acceptance_pins.json"
LN2 = math.log(2.0)
METHOD_TAU_FLOOR = {"lsr": 0.75, "gp": 0.75, "co": 0.75, "elo": 0.6, "trueskill": 0.6}


def _report(criterion: str, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line, flush=True)
    from conftest import ACCEPTANCE_LINES

    ACCEPTANCE_LINES.append(line)


def test_criterion_1_formula_spot_checks():
    errs = [
        abs(elo_expected(0.0, 0.0, 400.0) - 0.5),
        abs(elo_expected(1500.0, 1900.0, 400.0) - 1.0 / 11.0),
    ]
    sa, sb = elo_update(1500.0, 1500.0, Outcome.WIN_A, EloParams(k=32.0))
    errs.append(abs(sa - 1516.0))
    errs.append(abs(sb - 1484.0))
    from pairrank.data import OutcomeDistribution

    uniform = [OutcomeDistribution(0.5, 0.5, 0.0)] * 9
    outcomes = [Outcome.WIN_A, Outcome.WIN_B] * 4 + [Outcome.WIN_B]
    errs.append(abs(log_loss(uniform, outcomes) - LN2))
    worst = max(errs)
    ok = worst <= 1e-12
    _report("1", ok, f"formula spot checks, max abs err {worst:.2e} (tol 1e-12)")
    assert ok


def test_criterion_2_lsr_oracle_equivalence():
    worst_pi = 0.0
    for w in range(1, 11):
        for l in range(1, 11):
            ds = make_dataset([("A", "B", "a")] * w + [("A", "B", "b")] * l)
            table = lsr_fit(ds, LsrParams(alpha_reg=0.0))
            worst_pi = max(worst_pi, abs(math.exp(table.score("A")) - w / (w + l)))

    rng = np.random.default_rng(17)
    worst_res, worst_vs_oracle = 0.0, 0.0
    for _ in range(100):
        k = int(rng.integers(2, 9))
        rates = rng.uniform(0.05, 5.0, size=(k, k))
        np.fill_diagonal(rates, 0.0)
        pi = stationary_distribution(rates, tol=1e-12)
        off = rates.copy()
        residual = float(np.max(np.abs(pi @ off - pi * off.sum(axis=1))))
        worst_res = max(worst_res, residual)
        worst_vs_oracle = max(
            worst_vs_oracle, float(np.max(np.abs(pi - stationary_by_linear_solve(rates))))
        )
    ok = worst_pi <= 1e-9 and worst_res <= 1e-10 and worst_vs_oracle <= 1e-8
    _report(
        "2",
        ok,
        f"lsr oracle equivalence: pi err {worst_pi:.2e} (tol 1e-9), "
        f"balance residual {worst_res:.2e} (tol 1e-10), vs linear solve {worst_vs_oracle:.2e}",
    )
    assert ok


def test_criterion_3_lp_oracle_equivalence():
    chain = co_fit(make_dataset([("A", "B", "a"), ("B", "C", "a")]), CoParams(epsilon=1.0, lambda_ties=0.0))
    chain_ok = (
        abs(chain.params["objective"]) <= 1e-8
        and abs(sum(chain.scores.values())) <= 1e-8
        and chain.score("A") - chain.score("B") >= 1.0 - 1e-8
        and chain.score("B") - chain.score("C") >= 1.0 - 1e-8
    )
    contra = co_fit(
        make_dataset([("A", "B", "a"), ("A", "B", "b")]), CoParams(epsilon=1.0, lambda_ties=0.0)
    )
    contra_ok = abs(contra.params["objective"] - 2.0) <= 1e-8

    rng = np.random.default_rng(23)
    worst = 0.0
    for _ in range(50):
        n, m = 5, 8
        a = rng.normal(size=(m, n))
        x0 = rng.uniform(0, 5, size=n)
        b = a @ x0 + rng.uniform(0.1, 3.0, size=m)
        c = rng.normal(size=n)
        bounds = [(0.0, 10.0)] * n
        sol = lp_solve(LinearProgram(c=c, a_ub=a, b_ub=b, bounds=bounds))
        oracle = vertex_enumeration_min(c, a, b, bounds)
        assert sol.status == "optimal" and oracle is not None
        worst = max(worst, abs(sol.objective - oracle))
    lp_ok = worst <= 1e-7
    ok = chain_ok and contra_ok and lp_ok
    _report(
        "3",
        ok,
        f"lp oracle equivalence: chain obj {chain.params['objective']:.2e}, "
        f"contradiction obj err {abs(contra.params['objective'] - 2.0):.2e} (tol 1e-8), "
        f"50 instances vs vertex enumeration, worst {worst:.2e}",
    )
    assert ok


def test_criterion_4_gp_oracle_equivalence():
    t0 = time.time()
    worst = 0.0
    for mean in (-5.0, -2.0, 0.0, 2.0, 5.0):
        for var in (0.1, 1.0, 10.0):
            for outcome, kind in ((Outcome.WIN_A, "a"), (Outcome.WIN_B, "b"), (Outcome.TIE, "t")):
                om, ov, _ = dense_logistic_moments(mean, var, kind)
                tm, tv, _ = tilted_moments(mean, var, outcome)
                worst = max(worst, abs(tm - om), abs(tv - ov))
    moments_ok = worst <= 1e-6

    oracle_gap = exact_two_item_mean_gap(10, prior_var=1.0)
    post = ep_fit(make_dataset([("A", "B", "a")] * 10), GpParams(prior_var=1.0))
    gap = post.ratings["A"].mu - post.ratings["B"].mu
    rel = abs(gap - oracle_gap) / oracle_gap
    gap_ok = rel < 0.05
    elapsed = time.time() - t0
    ok = moments_ok and gap_ok and elapsed < 30
    _report(
        "4",
        ok,
        f"gp oracle equivalence: tilted moments worst {worst:.2e} (tol 1e-6), "
        f"10-0 posterior gap rel err {rel:.3%} (tol 5%), {elapsed:.1f}s",
    )
    assert ok


@pytest.fixture(scope="module")
def synthetic_world():
    return simulate_bt(50, 5000, score_scale=1.0, tie_rate=0.1, seed=1)


@pytest.fixture(scope="module")
def recovery_metrics(synthetic_world):
    truth, data = synthetic_world
    items = sorted(truth.scores)
    truth_vec = [truth.scores[i] for i in items]
    t0 = time.time()
    taus, losses = {}, {}
    # co runs without the tie penalty: it is its recovery-optimal setting
    # (the penalty pulls tied pairs onto shared levels, degrading rank order)
    params = {"co": CoParams(epsilon=1.0, lambda_ties=0.0)}
    for method in METHOD_TAU_FLOOR:
        fitted = fit_method(method, data, params.get(method))
        taus[method] = float(
            kendalltau(truth_vec, [fitted.table.score(i) for i in items]).statistic
        )
        report = evaluate(
            data, method, params.get(method), test_fraction=0.15, seeds=(1, 2, 3, 4, 5)
        )
        losses[method] = report.log_loss
    return {"tau": taus, "log_loss": losses, "elapsed": time.time() - t0}


def test_criterion_5_synthetic_recovery(recovery_metrics):
    taus, losses = recovery_metrics["tau"], recovery_metrics["log_loss"]
    elapsed = recovery_metrics["elapsed"]

    loss_ok = all(v < LN2 for v in losses.values())
    online_tau_ok = taus["elo"] >= 0.6 and taus["trueskill"] >= 0.6
    batch_tau_ok = taus["lsr"] >= 0.75 and taus["gp"] >= 0.75
    time_ok = elapsed < 120

    if PINS_PATH.exists():
        pins = json.loads(PINS_PATH.read_text())
        drift = max(
            max(abs(pins["tau"][m] - taus[m]) for m in taus),
            max(abs(pins["log_loss"][m] - losses[m]) for m in losses),
        )
        pin_ok = drift <= 1e-9
        pin_note = f"pin drift {drift:.2e} (tol 1e-9)"
    else:
        PINS_PATH.write_text(json.dumps({"tau": taus, "log_loss": losses}, indent=2))
        pin_ok, pin_note = True, "pins written"

    ok = loss_ok and online_tau_ok and batch_tau_ok and time_ok and pin_ok
    detail = (
        "synthetic recovery: "
        + ", ".join(f"{m} tau={taus[m]:.4f}" for m in sorted(taus))
        + "; "
        + ", ".join(f"{m} logloss={losses[m]:.4f}" for m in sorted(losses))
        + f" (< ln2 {LN2:.4f}); {pin_note}; {elapsed:.0f}s"
    )
    _report("5", ok, detail)
    assert loss_ok, f"log losses {losses} must all be below ln 2"
    assert online_tau_ok, f"elo/trueskill taus {taus} must be >= 0.6"
    assert batch_tau_ok, f"lsr/gp taus {taus} must be >= 0.75"
    assert time_ok and pin_ok


def test_criterion_5_co_tau(recovery_metrics):
    # Faithful margin-LP optima quantize scores onto an epsilon lattice and
    # tau-b charges the tied pairs; ~0.74 on this world is the method's
    # ceiling (see README, Known red). Kept as an honest failure rather
    # than a loosened threshold.
    tau = recovery_metrics["tau"]["co"]
    ok = tau >= 0.75
    _report("5-co", ok, f"co kendall tau {tau:.4f} vs floor 0.75")
    assert ok, f"co tau {tau:.4f} < 0.75: margin-LP optima are lattice-quantized"


def test_criterion_6_invariant_suites():
    t0 = time.time()
    rng = random.Random(99)
    items = [f"i{k}" for k in range(6)]

    # Elo zero-sum and translation invariance over 1000 random sequences
    worst_sum, worst_shift = 0.0, 0.0
    for trial in range(1000):
        n = rng.randint(1, 30)
        triples = [
            (*rng.sample(items, 2), rng.choice(["a", "b", "tie"])) for _ in range(n)
        ]
        ds = make_dataset(triples, catalog_ids=items)
        table = rate_elo(ds, EloParams(initial_score=1500.0))
        worst_sum = max(worst_sum, abs(sum(table.scores.values()) - 6 * 1500.0))
        if trial % 10 == 0:
            shifted = rate_elo(ds, EloParams(initial_score=1750.0))
            worst_shift = max(
                worst_shift,
                max(abs(shifted.score(i) - table.score(i) - 250.0) for i in items),
            )
    elo_ok = worst_sum <= 1e-9 and worst_shift <= 1e-9

    # TrueSkill variance contraction and predict swap antisymmetry
    ts_ok = True
    params = TrueSkillParams()
    for _ in range(300):
        ra = GaussianRating(rng.uniform(0, 50), rng.uniform(0.5, 12.0) ** 2)
        rb = GaussianRating(rng.uniform(0, 50), rng.uniform(0.5, 12.0) ** 2)
        outcome = rng.choice(list(Outcome))
        na, nb = ts_update(ra, rb, outcome, params)
        ts_ok &= na.sigma2 < ra.sigma2 and nb.sigma2 < rb.sigma2
        d1, d2 = ts_predict(ra, rb, params), ts_predict(rb, ra, params)
        ts_ok &= abs(d1.p_win_a - d2.p_win_b) <= 1e-12
        ts_ok &= abs(d1.p_tie - d2.p_tie) <= 1e-12

    # LSR order invariance under record shuffling
    _, ds = simulate_bt(10, 500, 1.0, 0.2, seed=21)
    shuffled = list(ds.records)
    rng.shuffle(shuffled)
    from pairrank.data import Dataset

    lsr_ok = lsr_fit(ds).scores == lsr_fit(Dataset(ds.catalog, shuffled)).scores

    # GP outcome-negation antisymmetry
    _, small = simulate_bt(6, 80, 1.0, 0.2, seed=22)
    post = ep_fit(small)
    flipped = make_dataset(
        [(r.a, r.b, {"a": "b", "b": "a", "tie": "tie"}[r.outcome.value]) for r in small]
    )
    neg = ep_fit(flipped)
    gp_ok = all(
        abs(neg.ratings[i].mu + post.ratings[i].mu) <= 1e-8 for i in post.ratings
    ) and all(
        abs(neg.ratings[i].sigma2 - post.ratings[i].sigma2) <= 1e-8 for i in post.ratings
    )

    # normalize_scores rank preservation
    norm_ok = True
    for _ in range(50):
        values = rng.sample(range(-10_000, 10_000), rng.randint(2, 40))
        table = ScoreTable({f"x{k}": float(v) for k, v in enumerate(values)}, method="t")
        normed = normalize_scores(table)
        order = sorted(table.scores, key=table.scores.get)
        norm_ok &= order == sorted(normed.scores, key=normed.scores.get)
        norm_ok &= all(
            normed.score(a) < normed.score(b) for a, b in zip(order, order[1:])
        )

    # threshold nesting and the alpha = 0 identity
    thresh_ok = True
    for _ in range(50):
        scores = [rng.uniform(-5, 5) for _ in range(rng.randint(3, 30))]
        lo0, hi0 = thresholds(scores, alpha=0.0)
        mean = sum(scores) / len(scores)
        thresh_ok &= abs(lo0 - mean) <= 1e-12 and abs(hi0 - mean) <= 1e-12
        a1, a2 = sorted((rng.uniform(0, 2.0), rng.uniform(0, 2.0)))
        lo1, hi1 = thresholds(scores, a1)
        lo2, hi2 = thresholds(scores, a2)
        thresh_ok &= lo2 <= lo1 + 1e-12 and hi1 <= hi2 + 1e-12
        tbl = ScoreTable({f"s{k}": v for k, v in enumerate(scores)}, method="t")
        safe1 = {l.item for l in label_items(tbl, params=LabelParams(alpha=a1)) if l.label == "safe"}
        safe2 = {l.item for l in label_items(tbl, params=LabelParams(alpha=a2)) if l.label == "safe"}
        thresh_ok &= safe2 <= safe1

    elapsed = time.time() - t0
    ok = elo_ok and bool(ts_ok) and lsr_ok and gp_ok and bool(norm_ok) and bool(thresh_ok) and elapsed < 60
    _report(
        "6",
        ok,
        f"invariants: elo zero-sum {worst_sum:.1e}/shift {worst_shift:.1e}, "
        f"ts {bool(ts_ok)}, lsr order {lsr_ok}, gp negation {gp_ok}, "
        f"normalize {bool(norm_ok)}, thresholds {bool(thresh_ok)}; {elapsed:.0f}s",
    )
    assert ok


def _write_catalog_manifest(path: Path, n: int) -> None:
    path.write_text(json.dumps([{"id": f"img{k:02d}"} for k in range(n)]))


def _spawn_server(data_dir: Path, catalog: Path) -> tuple[subprocess.Popen, str]:
    proc = subprocess.Popen(
        [
            sys.executable,
            "-m",
            "pairrank",
            "serve",
            "--addr",
            "127.0.0.1:0",
            "--data-dir",
            str(data_dir),
            "--catalog",
            str(catalog),
            "--seed",
            "7",
        ],
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
        text=True,
    )
    line = proc.stdout.readline().strip()
    base = line.split()[-1]
    deadline = time.time() + 10
    while time.time() < deadline:
        try:
            requests.get(f"{base}/api/items", timeout=1)
            break
        except requests.ConnectionError:
            time.sleep(0.05)
    return proc, base


def test_criterion_7_service_durability(tmp_path):
    t0 = time.time()
    catalog_path = tmp_path / "catalog.json"
    _write_catalog_manifest(catalog_path, 12)
    data_dir = tmp_path / "survey"
    proc, base = _spawn_server(data_dir, catalog_path)
    acked = []
    errors = []

    def run_session(k: int, votes: int) -> None:
        try:
            http = requests.Session()
            sid = http.post(f"{base}/api/sessions", timeout=10).json()["session_id"]
            choices = ["left", "right", "tie"]
            for v in range(votes):
                pair = http.get(f"{base}/api/sessions/{sid}/next", timeout=10).json()
                result = http.post(
                    f"{base}/api/sessions/{sid}/vote",
                    json={"token": pair["token"], "outcome": choices[(k + v) % 3]},
                    timeout=10,
                ).json()
                if result.get("recorded"):
                    acked.append(1)
        except Exception as exc:  # surface thread failures in the assertion
            errors.append(repr(exc))

    threads = [threading.Thread(target=run_session, args=(k, 125)) for k in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    elo_before = requests.get(f"{base}/api/scores?method=elo", timeout=10).content
    ts_before = requests.get(f"{base}/api/scores?method=trueskill", timeout=10).content
    proc.send_signal(signal.SIGKILL)
    proc.wait()

    log_lines = (data_dir / "comparisons.jsonl").read_text().strip().splitlines()
    proc2, base2 = _spawn_server(data_dir, catalog_path)
    try:
        elo_after = requests.get(f"{base2}/api/scores?method=elo", timeout=10).content
        ts_after = requests.get(f"{base2}/api/scores?method=trueskill", timeout=10).content
    finally:
        proc2.send_signal(signal.SIGKILL)
        proc2.wait()

    def max_drift(before: bytes, after: bytes) -> float:
        b, a = json.loads(before), json.loads(after)
        keys = ("scores", "mu", "sigma")
        return max(
            abs(b[k][i] - a[k][i]) for k in keys if k in b for i in b[k]
        )

    drift = max(max_drift(elo_before, elo_after), max_drift(ts_before, ts_after))
    elapsed = time.time() - t0
    ok = (
        not errors
        and len(acked) == 1000
        and len(log_lines) == 1000
        and drift <= 1e-12
        and elapsed < 60
    )
    _report(
        "7",
        ok,
        f"durability: {len(acked)} acks, {len(log_lines)} log lines, "
        f"replay drift {drift:.1e} (tol 1e-12), {elapsed:.0f}s; errors={errors[:2]}",
    )
    assert ok


def test_criterion_8_cli_pipeline(tmp_path):
    from pairrank.cli import main
    from pairrank.io import parse_comparisons, read_score_table
    from pairrank.labeling import read_labels

    t0 = time.time()
    data = tmp_path / "data.csv"
    scores = tmp_path / "scores.csv"
    fig = tmp_path / "scores.png"

    assert main(["simulate", "-m", "20", "--n", "600", "--tie-rate", "0.1",
                 "--seed", "4", "-o", str(data)]) == 0
    assert len(parse_comparisons(data)) == 600

    grid_out = tmp_path / "grid.json"
    assert main(["grid", "--method", "elo", "-i", str(data),
                 "--grid", "k=16,32;delta=400", "--seeds", "1,2", "--json",
                 "-o", str(grid_out), "--plot", str(tmp_path / "grid.png")]) == 0
    payload = json.loads(grid_out.read_text())
    best_k = payload["best"]["k"]

    assert main(["score", "--method", "elo", "--k", str(best_k), "-i", str(data),
                 "-o", str(scores), "--plot", str(fig)]) == 0
    table = read_score_table(scores)
    assert len(table) == 20
    assert fig.read_bytes()[:4] == b"\x89PNG"

    sizes = []
    for alpha in (0.0, 0.5, 1.0, 1.5):
        labels_path = tmp_path / f"labels_{alpha}.csv"
        assert main(["label", "--alpha", str(alpha), "-i", str(scores),
                     "-o", str(labels_path), "--drop-neutral"]) == 0
        labels = read_labels(labels_path)
        assert all(l.label in ("safe", "unsafe") for l in labels)
        sizes.append(len(labels))
    monotone = all(a >= b for a, b in zip(sizes, sizes[1:]))

    elapsed = time.time() - t0
    ok = monotone and sizes[0] == 20 and elapsed < 120
    _report(
        "8",
        ok,
        f"cli pipeline: labeled-set sizes {sizes} monotone={monotone}, {elapsed:.0f}s",
    )
    assert ok
