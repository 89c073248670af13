"""Self-play training loops: fixed-length warm-start and the adaptive switch.

Each iteration generates ``E`` episodes, pushes their examples into the
replay buffer, trains a candidate network and keeps it only if it beats the
current one in a gating arena played with the default (baseline) search.

In adaptive mode the warm-start episodes are themselves an arena: one side
searches with the enhancement, the other with the default search, and the
default side's net result ``r_mcts`` decides whether to switch to pure
default self-play from the next iteration on.
"""

from __future__ import annotations

import logging
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .config import RunConfig, derive_seed
from .games import GameState, initial_state
from .network import (
    ModelParams,
    NetworkEvaluator,
    ReplayBuffer,
    TrainingExample,
    fit,
    init_params,
)
from .search import MCTS, Kind

log = logging.getLogger(__name__)


@dataclass
class SwitchState:
    switched: bool = False
    r_mcts: int = 0
    switch_iteration: Optional[int] = None


@dataclass(frozen=True)
class Episode:
    examples: list
    outcome: int  # +1 player1 won, -1 player2 won, 0 draw
    plies: int
    capped: bool = False
    mcts_reward: Optional[int] = None


@dataclass(frozen=True)
class GateResult:
    wins_new: int
    wins_old: int
    draws: int
    accepted: bool

    @property
    def winrate(self) -> float:
        decided = self.wins_new + self.wins_old
        return self.wins_new / decided if decided else 0.0


@dataclass
class IterationLog:
    iteration: int
    mode: str
    kind_used: str
    weight: float
    episodes: int
    examples: int
    r_mcts: Optional[int]
    mcts_wins: int
    mcts_losses: int
    draws: int
    switched: bool
    gate_wins_new: int
    gate_wins_old: int
    gate_draws: int
    gate_winrate: float
    accepted: bool
    train_loss: float


@dataclass
class TrainingState:
    params: ModelParams
    buffer: ReplayBuffer
    switch: SwitchState = field(default_factory=SwitchState)
    iteration: int = 0
    logs: list = field(default_factory=list)


def warmstart_weight(i: int) -> float:
    if i < 1:
        raise ValueError(f"iteration index must be >= 1, got {i}")
    return 1.0 / i


def select_action(pi: np.ndarray, t: int, T_prime: int, rng: np.random.Generator) -> int:
    """Sample from ``pi`` for the first ``T_prime`` plies (1-based ``t``), argmax after."""
    pi = np.asarray(pi, dtype=np.float64)
    if t <= T_prime:
        return int(rng.choice(len(pi), p=pi / pi.sum()))
    return int(np.argmax(pi))


def _play(
    cfg: RunConfig,
    searchers: dict,
    seed: int,
    T_prime: int,
    record: bool = True,
) -> Episode:
    """Play one game; ``searchers`` maps side (+1/-1) to an MCTS instance."""
    rng = np.random.default_rng(seed)
    s = initial_state(cfg.rules)
    trail: list[tuple[GameState, np.ndarray]] = []
    t = 0
    capped = False
    while not s.is_terminal():
        if t >= cfg.ply_cap:
            log.warning("episode reached the %d-ply cap; scoring it as a draw", cfg.ply_cap)
            capped = True
            break
        t += 1
        pi = searchers[s.to_move].policy(s)
        if record:
            trail.append((s, pi))
        s = s.apply_move(select_action(pi, t, T_prime, rng))
    outcome = 0 if capped else s.terminal_value()
    examples = [
        TrainingExample(st.encode(), pi.astype(np.float32), float(outcome * st.to_move)) for st, pi in trail
    ]
    return Episode(examples, outcome, t, capped)


def run_episode_selfplay(
    params: ModelParams, cfg: RunConfig, kind, weight: float = 0.5, seed: int = 0, evaluator=None
) -> Episode:
    """Both sides search with ``kind``; one example per ply."""
    ev = evaluator or NetworkEvaluator(params)
    rollout_rng = random.Random(seed)
    mcts = MCTS(cfg.search_config(kind, weight), ev, rollout_rng)
    return _play(cfg, {1: mcts, -1: mcts}, seed, cfg.T_prime)


def run_episode_mixed(
    params: ModelParams,
    cfg: RunConfig,
    enhancement_moves_first: bool,
    weight: float = 0.5,
    seed: int = 0,
    evaluator=None,
) -> Episode:
    """Enhancement vs default search; ``mcts_reward`` is the default side's result."""
    ev = evaluator or NetworkEvaluator(params)
    rollout_rng = random.Random(seed)
    enh = MCTS(cfg.search_config(cfg.kind, weight), ev, rollout_rng)
    default = MCTS(cfg.search_config(Kind.BASELINE), ev, rollout_rng)
    enh_side = 1 if enhancement_moves_first else -1
    ep = _play(cfg, {enh_side: enh, -enh_side: default}, seed, cfg.T_prime)
    return replace(ep, mcts_reward=int(-enh_side * ep.outcome))


def _episode_task(args):
    params, cfg, style, kind, weight, seed = args
    if style == "mixed":
        return run_episode_mixed(params, cfg, kind, weight, seed)
    return run_episode_selfplay(params, cfg, kind, weight, seed)


def _run_episodes(tasks: list, workers: int) -> list:
    """Run episode tasks, returning results in task order regardless of ``workers``."""
    if workers <= 1 or len(tasks) <= 1:
        if not tasks:
            return []
        # one shared evaluator cache per batch of same-params tasks
        ev = NetworkEvaluator(tasks[0][0])
        out = []
        for params, cfg, style, kind, weight, seed in tasks:
            if style == "mixed":
                out.append(run_episode_mixed(params, cfg, kind, weight, seed, evaluator=ev))
            else:
                out.append(run_episode_selfplay(params, cfg, kind, weight, seed, evaluator=ev))
        return out
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_episode_task, tasks))


def play_gate_game(new, old, cfg: RunConfig, new_first: bool, seed: int) -> int:
    """One arena game between two networks (or their evaluators) with default search; result for ``new``."""
    ev_new = new if isinstance(new, NetworkEvaluator) else NetworkEvaluator(new)
    ev_old = old if isinstance(old, NetworkEvaluator) else NetworkEvaluator(old)
    s_new = MCTS(cfg.search_config(Kind.BASELINE), ev_new)
    s_old = MCTS(cfg.search_config(Kind.BASELINE), ev_old)
    side = 1 if new_first else -1
    ep = _play(cfg, {side: s_new, -side: s_old}, seed, cfg.T_prime, record=False)
    return ep.outcome * side


def gate_model(old: ModelParams, new: ModelParams, cfg: RunConfig, seed: int = 0) -> GateResult:
    """Play ``n`` games (colours split evenly) and accept ``new`` above the threshold ``u``.

    Moves are chosen as in self-play (sampled for the first ``T_prime`` plies,
    argmax after); with default search the sampled opening is the only source
    of variation between games.  Draws are left out of the win-rate
    denominator.
    """
    first_games = cfg.n // 2
    ev_new, ev_old = NetworkEvaluator(new), NetworkEvaluator(old)
    wins_new = wins_old = draws = 0
    for g in range(cfg.n):
        r = play_gate_game(ev_new, ev_old, cfg, g < first_games, derive_seed(seed, g))
        wins_new += r == 1
        wins_old += r == -1
        draws += r == 0
    decided = wins_new + wins_old
    accepted = decided > 0 and wins_new / decided > cfg.u
    return GateResult(int(wins_new), int(wins_old), int(draws), bool(accepted))


def new_training_state(cfg: RunConfig) -> TrainingState:
    params = init_params(cfg.rules, derive_seed(cfg.seed, "init"), cfg.channels, cfg.hidden, cfg.d)
    return TrainingState(params=params, buffer=ReplayBuffer(cfg.rs))


def iteration_plan(state: TrainingState, cfg: RunConfig) -> tuple[str, Kind]:
    """Episode style ("selfplay" or "mixed") and search kind for the next iteration."""
    k = state.iteration + 1
    if cfg.mode == "baseline":
        return "selfplay", Kind.BASELINE
    if cfg.mode == "fixed":
        return "selfplay", Kind(cfg.kind) if k <= cfg.I_prime else Kind.BASELINE
    if state.switch.switched:
        return "selfplay", Kind.BASELINE
    return "mixed", Kind(cfg.kind)


def run_iteration(state: TrainingState, cfg: RunConfig, workers: int = 1) -> TrainingState:
    """Self-play, training and gating for iteration ``state.iteration + 1``.

    Returns a new state; ``state`` itself is left untouched.
    """
    k = state.iteration + 1
    weight = warmstart_weight(k) if cfg.weight_policy == "one-over-i" else 0.5
    style, kind = iteration_plan(state, cfg)
    seeds = [derive_seed(cfg.seed, "selfplay", k, e) for e in range(cfg.E)]
    if style == "mixed":
        # first half: enhancement moves first; second half: default search first
        tasks = [(state.params, cfg, "mixed", e < cfg.E // 2, weight, seeds[e]) for e in range(cfg.E)]
    else:
        tasks = [(state.params, cfg, "selfplay", kind, weight, seeds[e]) for e in range(cfg.E)]
    episodes = _run_episodes(tasks, workers)
    examples = [ex for ep in episodes for ex in ep.examples]

    switch = replace(state.switch)
    r_mcts = None
    mcts_wins = mcts_losses = 0
    if style == "mixed":
        rewards = [ep.mcts_reward for ep in episodes]
        mcts_wins = sum(r == 1 for r in rewards)
        mcts_losses = sum(r == -1 for r in rewards)
        r_mcts = int(sum(rewards))
        if r_mcts > 0 and not switch.switched:
            switch.switched = True
            switch.switch_iteration = k
        switch.r_mcts = 0

    buffer = ReplayBuffer(state.buffer.capacity)
    for it, exs in state.buffer.items():
        buffer.push(it, exs)
    buffer.push(k, examples)

    candidate, losses = fit(state.params, buffer.examples(), cfg.train_config(derive_seed(cfg.seed, "train", k)))
    gate = gate_model(state.params, candidate, cfg, derive_seed(cfg.seed, "gating", k))
    params = candidate if gate.accepted else state.params

    entry = IterationLog(
        iteration=k,
        mode=cfg.mode,
        kind_used=kind.value,
        weight=weight if kind.uses_weight else 0.0,
        episodes=len(episodes),
        examples=len(examples),
        r_mcts=r_mcts,
        mcts_wins=int(mcts_wins),
        mcts_losses=int(mcts_losses),
        draws=sum(ep.outcome == 0 for ep in episodes),
        switched=switch.switched,
        gate_wins_new=gate.wins_new,
        gate_wins_old=gate.wins_old,
        gate_draws=gate.draws,
        gate_winrate=gate.winrate,
        accepted=gate.accepted,
        train_loss=float(losses[-1]),
    )
    log.info(
        "iteration %d: %s/%s, %d examples, r_mcts=%s, gate %d-%d-%d %s",
        k, style, kind.value, len(examples), r_mcts,
        gate.wins_new, gate.wins_old, gate.draws, "accepted" if gate.accepted else "rejected",
    )
    return TrainingState(params, buffer, switch, k, [*state.logs, entry])


def run_until_switch(cfg: RunConfig, workers: int = 1) -> TrainingState:
    """Adaptive iterations until the switch fires or ``cfg.I`` iterations are done.

    Iterations after the switch cannot move the switch point, so runs that
    only measure it can stop there.
    """
    if cfg.mode != "adaptive":
        raise ValueError(f"switch measurement needs mode='adaptive', got {cfg.mode!r}")
    state = new_training_state(cfg)
    while state.iteration < cfg.I and not state.switch.switched:
        state = run_iteration(state, cfg, workers)
    return state
