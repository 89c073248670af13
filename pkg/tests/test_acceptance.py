"""Acceptance suite: one test per headline criterion, each printing a PASS/FAIL line.

Several criteria replay full-size experiments and take a long time on a
single CPU (the switch-timing study runs for hours).  Select them with
``-m acceptance``; the lines printed look like::

    [acceptance] switch timing ..................... PASS  gobang 1.2 vs ...
"""

import random

import numpy as np
import pytest

from azwarm.config import RunConfig
from azwarm.evaluation import AgentSpec, MatchResult, expected_score, fit_elo, play_match
from azwarm.network import NetworkEvaluator, TrainingExample, backward, gradient_check, init_params
from azwarm.runs import completed_iterations, read_logs, run_training
from azwarm.search import MCTS, Kind, SearchConfig, leaf_value, puct_score, rave_beta, rollout_value, uct_rave_score
from azwarm.selfplay import run_until_switch, warmstart_weight

import oracles

pytestmark = pytest.mark.acceptance

GAMES = ["connect_four", "othello", "gobang"]


@pytest.fixture
def report(capsys):
    def emit(name, ok, detail=""):
        with capsys.disabled():
            print(f"\n[acceptance] {name:.<40} {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return emit


# -- untrained-network head-to-head ----------------------------------------

WINRATE_BANDS = {
    ("othello", "rollout"): (0.85, 1.0),
    ("othello", "rave"): (0.40, 0.70),
    ("othello", "rora"): (0.85, 1.0),
    ("othello", "wro"): (0.85, 1.0),
    ("othello", "wrora"): (0.85, 1.0),
    ("connect_four", "rollout"): (0.55, 1.0),
    ("connect_four", "rave"): (0.0, 0.45),
    ("connect_four", "rora"): (0.55, 1.0),
    ("connect_four", "wro"): (0.55, 1.0),
    ("connect_four", "wrora"): (0.55, 1.0),
    ("gobang", "rollout"): (0.50, 0.80),
}


@pytest.mark.slow
def test_untrained_head_to_head(report):
    cfg = RunConfig()  # m=100, c=1; weight 1/2 and argmax moves throughout
    baseline = AgentSpec("baseline", Kind.BASELINE, m=cfg.m, c=cfg.c)
    lines, failures = [], []
    for (game, kind), (lo, hi) in WINRATE_BANDS.items():
        agent = AgentSpec(kind, Kind(kind), weight=0.5, m=cfg.m, c=cfg.c)
        r = play_match(agent, baseline, 100, seed=0, game=game)
        ok = lo <= r.winrate_a <= hi
        lines.append(f"{game}/{kind} {100 * r.winrate_a:.1f}% in [{100 * lo:.0f}, {100 * hi:.0f}]")
        if not ok:
            failures.append(lines[-1])
    report("untrained head-to-head", not failures, "; ".join(lines))
    assert not failures, failures


# -- adaptive switch timing ------------------------------------------------

SWITCH_SEEDS = (0, 1, 2, 3)
SWITCH_ITERATIONS = 10


def switch_points(game):
    """Switch iteration per seed with the Rollout enhancement; ``None`` if it never switched."""
    out = []
    for seed in SWITCH_SEEDS:
        cfg = RunConfig(game=game, kind="rollout", mode="adaptive", I=SWITCH_ITERATIONS, seed=seed)
        out.append(run_until_switch(cfg).switch.switch_iteration)
    return out


@pytest.mark.slow
def test_switch_timing(report):
    points = {g: switch_points(g) for g in ("gobang", "connect_four", "othello")}
    # runs that never switch are scored one past the last iteration
    censored = {g: [p if p is not None else SWITCH_ITERATIONS + 1 for p in ps] for g, ps in points.items()}
    mean = {g: float(np.mean(v)) for g, v in censored.items()}
    early = sum(p in (1, 2) for p in points["gobang"])
    ok_gobang = early >= 3
    ok_later = mean["connect_four"] > mean["gobang"] and mean["othello"] > mean["gobang"]
    detail = "; ".join(f"{g} {points[g]} mean {mean[g]:.2f}" for g in points)
    report("switch timing", ok_gobang and ok_later, detail)
    assert ok_gobang, f"gobang switched at iteration 1-2 in {early} of 4 seeds: {points['gobang']}"
    assert ok_later, detail


# -- end-to-end training smoke runs -----------------------------------------


def least_squares_slope(ys):
    xs = np.arange(len(ys), dtype=float)
    return float(np.polyfit(xs, np.asarray(ys, dtype=float), 1)[0])


@pytest.mark.slow
def test_training_smoke_runs(report, tmp_path):
    details, ok = [], True
    for mode, kind in (("baseline", "baseline"), ("fixed", "wrora"), ("adaptive", "wrora")):
        cfg = RunConfig(game="connect_four", mode=mode, kind=kind, I=10, I_prime=5, seed=11)
        run = run_training(cfg, tmp_path / mode)
        its = completed_iterations(run)
        logs = read_logs(run / "log" / "iterations.csv")
        good = its == list(range(1, 11)) and [e.iteration for e in logs] == its
        if mode == "fixed":
            good &= [e.kind_used for e in logs] == ["wrora"] * 5 + ["baseline"] * 5
        if mode == "adaptive":
            trace = [e.r_mcts for e in logs if e.r_mcts is not None]
            slope = least_squares_slope(trace) if len(trace) >= 2 else 0.0
            good &= slope >= 0
            details.append(f"adaptive r_mcts trace {trace} slope {slope:+.2f}")
        details.append(f"{mode}: {len(its)} checkpoints")
        ok &= good
    report("training smoke runs", ok, "; ".join(details))
    assert ok, details


# -- formulas ---------------------------------------------------------------


def test_formula_suite(report):
    checks = {}
    checks["beta(0, e) = 1"] = all(rave_beta(0, e) == 1.0 for e in (1, 7.5, 100, 1e6))
    checks["beta(100, 100) = 1/2"] = rave_beta(100, 100) == 0.5
    rng = np.random.default_rng(0)
    mix_ok = True
    for _ in range(200):
        q, p, qr = rng.uniform(-1, 1), rng.uniform(0, 1), rng.uniform(-1, 1)
        n, nt, nr, nrt = (int(v) for v in rng.integers(0, 300, 4))
        u = puct_score(q, p, n, nt, 1.0)
        u_rave = qr + p * np.sqrt(nrt) / (nr + 1)
        mix_ok &= uct_rave_score(q, p, n, nt, qr, nr, nrt, 1.0, 100, beta=0.0) == u
        mix_ok &= uct_rave_score(q, p, n, nt, qr, nr, nrt, 1.0, 100, beta=1.0) == u_rave
    checks["mixing endpoints"] = bool(mix_ok)
    blend_ok = True
    for seed, s in enumerate(oracles.random_positions("othello", 60, seed=1)):
        if s.is_terminal():
            continue
        net_v = float(np.random.default_rng(seed).uniform(-1, 1))
        roll = rollout_value(s, random.Random(seed))
        for kind in (Kind.WRO, Kind.WRORA):
            blend_ok &= leaf_value(s, kind, 0.0, net_v, random.Random(seed)) == net_v
            blend_ok &= leaf_value(s, kind, 1.0, net_v, random.Random(seed)) == roll
    checks["blend endpoints"] = bool(blend_ok)
    checks["weight 1/i"] = all(warmstart_weight(i) == 1.0 / i for i in range(1, 101))
    ok = all(checks.values())
    report("formula suite", ok, ", ".join(f"{k}: {'ok' if v else 'WRONG'}" for k, v in checks.items()))
    assert ok, checks


# -- search invariants -------------------------------------------------------


@pytest.mark.slow
def test_search_invariants(report):
    problems = []
    for game in GAMES:
        ev = NetworkEvaluator(init_params(game, seed=3))
        states = [s for s in oracles.random_positions(game, 3000, seed=9) if not s.is_terminal()][:1000]
        for idx, s in enumerate(states):
            kind = list(Kind)[idx % len(Kind)]
            mcts = MCTS(SearchConfig(m=16, kind=kind), ev, random.Random(idx))
            pi = mcts.policy(s)
            root = mcts.tree[s.key]
            legal = set(oracles.legal(game, oracles.grid_of(s), s.to_move))
            if root.n.sum() != 16:
                problems.append(f"{game} visits {root.n.sum()}")
            if np.any(pi < 0) or abs(pi.sum() - 1) > 1e-6 or any(a not in legal for a in np.flatnonzero(pi)):
                problems.append(f"{game} invalid policy at state {idx}")
    rates = {}
    positions = oracles.forced_win_positions(200, seed=7)
    ev = NetworkEvaluator(init_params("connect_four", seed=3))
    for kind in Kind:
        hits = 0
        for idx, s in enumerate(positions):
            pi = MCTS(SearchConfig(m=100, kind=kind), ev, random.Random(idx)).policy(s)
            hits += int(np.argmax(pi)) in oracles.winning_columns(oracles.grid_of(s), s.to_move)
        rates[kind.value] = hits / len(positions)
        if rates[kind.value] < 0.95:
            problems.append(f"forced win {kind.value} {100 * rates[kind.value]:.1f}%")
    detail = "forced win-in-1: " + ", ".join(f"{k} {100 * v:.1f}%" for k, v in rates.items())
    report("search invariants", not problems, detail + ("; " + "; ".join(problems[:5]) if problems else ""))
    assert not problems, problems


# -- rules vs oracle -----------------------------------------------------------


@pytest.mark.slow
def test_oracle_equivalence(report):
    mismatches = {}
    for game in GAMES:
        states = oracles.random_positions(game, 20_000, seed=31)
        live = [s for s in states if not s.is_terminal()][:10_000]
        ends = oracles.random_positions(game, 10_000, seed=32, terminal_only=True)
        assert len(live) == 10_000 and len(ends) == 10_000
        bad = sum(sorted(s.legal_moves()) != oracles.legal(game, oracles.grid_of(s), s.to_move) for s in live)
        bad += sum(s.terminal_value() != oracles.terminal_outcome(game, oracles.grid_of(s)) for s in live + ends)
        mismatches[game] = bad
    ok = not any(mismatches.values())
    report("oracle equivalence", ok, ", ".join(f"{g} {n} mismatches" for g, n in mismatches.items()))
    assert ok, mismatches


# -- gradients -------------------------------------------------------------------


def test_gradient_check(report):
    worst = {}
    rng = np.random.default_rng(77)
    for game in GAMES:
        p = init_params(game, seed=5)
        errs = []
        for i in range(20):
            s = oracles.random_positions(game, 30, seed=1000 + i)[int(rng.integers(0, 30))]
            pi = rng.dirichlet(np.ones(s.rules.action_size)).astype(np.float32)
            errs.append(gradient_check(p, TrainingExample(s.encode(), pi, float(rng.choice([-1, 0, 1]))), seed=i))
        worst[game] = max(errs)

    def corrupted(*args):
        g = backward(*args)
        g["v_w"] = g["v_w"] * 2.0
        return g

    p = init_params("connect_four", seed=5)
    s = oracles.random_positions("connect_four", 40, seed=2)[12]
    ex = TrainingExample(s.encode(), np.full(6, 1 / 6, np.float32), 1.0)
    caught = gradient_check(p, ex, grad_fn=corrupted)
    ok = all(v < 1e-3 for v in worst.values()) and caught >= 0.1
    detail = ", ".join(f"{g} {v:.1e}" for g, v in worst.items()) + f"; corrupted value head {caught:.2f}"
    report("gradient check", ok, detail)
    assert ok, detail


# -- Elo -----------------------------------------------------------------------


def test_elo_fit(report):
    truth = {f"p{i}": 50.0 * i for i in range(5)}
    rng = np.random.default_rng(2000)
    results = []
    names = sorted(truth)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            wins = int(rng.binomial(2000, expected_score(truth[a], truth[b])))
            results.append(MatchResult(a, b, wins, 2000 - wins, 0, 2000))
    table = fit_elo(results)
    mean = np.mean(list(truth.values()))
    worst = max(abs(table[n] - (truth[n] - mean)) for n in names)
    pair = fit_elo([MatchResult("a", "b", 75, 25, 0, 100)], pseudo_draws=False)
    gap = pair["a"] - pair["b"]
    ok = worst <= 15 and abs(gap - 190.8) <= 0.1
    report("elo fit", ok, f"league max error {worst:.1f} Elo; 75/25 gap {gap:.2f}")
    assert ok


# -- determinism -----------------------------------------------------------------


@pytest.mark.slow
def test_run_determinism(report, tmp_path):
    cfg = RunConfig(game="connect_four", mode="adaptive", kind="wrora", I=3, seed=42)
    a = run_training(cfg, tmp_path / "a")
    b = run_training(cfg, tmp_path / "b")
    files = [f"checkpoints/iter_{k}.json" for k in (1, 2, 3)]
    files += [f"buffer/iter_{k}.examples" for k in (1, 2, 3)]
    files += ["log/iterations.csv", "log/switch.json"]
    differing = [f for f in files if (a / f).read_bytes() != (b / f).read_bytes()]
    report("run determinism", not differing, f"{len(files)} files compared, {len(differing)} differ")
    assert not differing, differing
