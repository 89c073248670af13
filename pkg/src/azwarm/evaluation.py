"""Head-to-head matches, round-robin tournaments and Elo fitting."""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import derive_seed
from .games import GameLike, get_rules, initial_state
from .network import ModelParams, NetworkEvaluator, init_params
from .search import MCTS, Kind, SearchConfig


class EloError(ValueError):
    pass


@dataclass(frozen=True)
class AgentSpec:
    """A search player.  ``params=None`` means an untrained network, drawn per game."""

    name: str
    kind: Kind = Kind.BASELINE
    weight: float = 0.5
    params: Optional[ModelParams] = field(default=None, compare=False, repr=False)
    m: int = 100
    c: float = 1.0

    @property
    def deterministic(self) -> bool:
        return self.params is not None and not Kind(self.kind).uses_rollout

    def searcher(self, evaluator, rng: random.Random) -> MCTS:
        cfg = SearchConfig(m=self.m, c=self.c, kind=Kind(self.kind), weight=self.weight)
        return MCTS(cfg, evaluator, rng)


@dataclass(frozen=True)
class MatchResult:
    player_a: str
    player_b: str
    wins_a: int
    wins_b: int
    draws: int
    games: int

    def __post_init__(self):
        if self.wins_a + self.wins_b + self.draws != self.games:
            raise ValueError(f"inconsistent result {self}")

    @property
    def winrate_a(self) -> float:
        """Score of ``player_a`` with draws counted as half a win."""
        return (self.wins_a + 0.5 * self.draws) / self.games

    def flipped(self) -> "MatchResult":
        return MatchResult(self.player_b, self.player_a, self.wins_b, self.wins_a, self.draws, self.games)


def play_game(first: AgentSpec, second: AgentSpec, game: GameLike, seed: int, ply_cap: int = 200) -> int:
    """One argmax game; returns +1 if ``first`` wins, -1 if ``second`` wins, 0 for a draw."""
    rules = get_rules(game)
    rng = random.Random(seed)
    shared = None
    if first.params is None or second.params is None:
        shared = NetworkEvaluator(init_params(rules, derive_seed(seed, "untrained-net")))
    evs = [NetworkEvaluator(a.params) if a.params is not None else shared for a in (first, second)]
    players = {1: first.searcher(evs[0], rng), -1: second.searcher(evs[1], rng)}
    s = initial_state(rules)
    for _ in range(ply_cap):
        if s.is_terminal():
            return int(s.terminal_value())
        pi = players[s.to_move].policy(s)
        s = s.apply_move(int(np.argmax(pi)))
    return int(s.terminal_value() or 0)


def _pair_seed(seed: int, a: str, b: str) -> int:
    lo, hi = sorted((a, b))
    return derive_seed(seed, "pair", lo, hi)


def play_match(a: AgentSpec, b: AgentSpec, games: int, seed: int, game: GameLike) -> MatchResult:
    """``games`` games with ``a`` moving first in the even-numbered ones."""
    if games < 1 or games % 2:
        raise ValueError(f"game count must be a positive even number, got {games}")
    base = _pair_seed(seed, a.name, b.name)
    memo: dict = {}
    wins_a = wins_b = draws = 0
    for g in range(games):
        a_first = g % 2 == 0
        if a.deterministic and b.deterministic and a_first in memo:
            r = memo[a_first]
        else:
            gseed = derive_seed(base, g)
            r = play_game(a, b, game, gseed) if a_first else -play_game(b, a, game, gseed)
            memo[a_first] = r
        wins_a += r == 1
        wins_b += r == -1
        draws += r == 0
    return MatchResult(a.name, b.name, int(wins_a), int(wins_b), int(draws), games)


def round_robin(players: Sequence[AgentSpec], games_per_pair: int, seed: int, game: GameLike) -> list[MatchResult]:
    """Every unordered pair plays; pairs and their seeds are keyed by sorted names."""
    if len(players) < 2:
        raise ValueError("a tournament needs at least two players")
    by_name = {p.name: p for p in players}
    if len(by_name) != len(players):
        raise ValueError("player names must be unique")
    names = sorted(by_name)
    return [play_match(by_name[x], by_name[y], games_per_pair, seed, game) for x, y in combinations(names, 2)]


@dataclass
class EloTable:
    ratings: dict
    games: dict
    iterations: int = 0
    loglik_trace: list = field(default_factory=list)

    def __getitem__(self, name: str) -> float:
        return self.ratings[name]

    def ranked(self) -> list[tuple[str, float]]:
        return sorted(self.ratings.items(), key=lambda kv: -kv[1])


def _components(names, edges) -> list[set]:
    parent = {n: n for n in names}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        parent[find(a)] = find(b)
    groups: dict = {}
    for n in names:
        groups.setdefault(find(n), set()).add(n)
    return sorted(groups.values(), key=lambda g: sorted(g))


def elo_log_likelihood(results: Sequence[MatchResult], ratings: dict, pseudo_draws: bool = True) -> float:
    ll = 0.0
    for r in _aggregate(results, pseudo_draws).values():
        a, b, sa, sb = r
        pa = 1.0 / (1.0 + 10 ** ((ratings[b] - ratings[a]) / 400.0))
        ll += sa * math.log(pa) + sb * math.log(1.0 - pa)
    return ll


def _aggregate(results, pseudo_draws):
    """(a, b) -> [a, b, score_a, score_b] with draws split and optional pseudo-draw."""
    pairs: dict = {}
    for r in results:
        if r.player_a == r.player_b:
            raise EloError(f"self-pairing for {r.player_a}")
        res = r if r.player_a < r.player_b else r.flipped()
        key = (res.player_a, res.player_b)
        entry = pairs.setdefault(key, [res.player_a, res.player_b, 0.0, 0.0])
        entry[2] += res.wins_a + 0.5 * res.draws
        entry[3] += res.wins_b + 0.5 * res.draws
    if pseudo_draws:
        for entry in pairs.values():
            entry[2] += 0.5
            entry[3] += 0.5
    return pairs


def fit_elo(
    results: Sequence[MatchResult],
    pseudo_draws: bool = True,
    tol: float = 0.01,
    max_iter: int = 100_000,
) -> EloTable:
    """Maximum-likelihood logistic Elo via minorization-maximization.

    Draws count as half a win for each side.  With ``pseudo_draws`` every
    played pair also receives one extra drawn game, which keeps ratings finite
    when a pair is one-sided.  Ratings are shifted to mean zero.
    """
    results = [r for r in results if r.games > 0]
    names = sorted({r.player_a for r in results} | {r.player_b for r in results})
    if len(names) < 2:
        raise EloError("need results between at least two players")
    comps = _components(names, [(r.player_a, r.player_b) for r in results])
    if len(comps) > 1:
        listing = "; ".join("{" + ", ".join(sorted(c)) + "}" for c in comps)
        raise EloError(f"results graph is disconnected; components: {listing}")
    pairs = _aggregate(results, pseudo_draws)
    idx = {n: i for i, n in enumerate(names)}
    wins = np.zeros(len(names))
    games_of = {n: 0 for n in names}
    for r in results:
        games_of[r.player_a] += r.games
        games_of[r.player_b] += r.games
    edges = []
    for a, b, sa, sb in pairs.values():
        i, j = idx[a], idx[b]
        wins[i] += sa
        wins[j] += sb
        edges.append((i, j, sa + sb))
    zero = [names[i] for i in range(len(names)) if wins[i] <= 0]
    if zero:
        raise EloError(f"players without any points cannot be rated without pseudo-draws: {zero}")
    gamma = np.ones(len(names))
    scale = 400.0 / math.log(10.0)
    table = EloTable({}, games_of)
    for it in range(1, max_iter + 1):
        denom = np.zeros(len(names))
        for i, j, n in edges:
            t = n / (gamma[i] + gamma[j])
            denom[i] += t
            denom[j] += t
        new = wins / denom
        new /= math.exp(np.mean(np.log(new)))
        change = float(np.max(np.abs(scale * (np.log(new) - np.log(gamma)))))
        gamma = new
        ratings = scale * np.log(gamma)
        table.loglik_trace.append(
            elo_log_likelihood(results, dict(zip(names, ratings)), pseudo_draws)
        )
        if change < tol:
            break
    ratings = ratings - ratings.mean()
    table.ratings = {n: float(r) for n, r in zip(names, ratings)}
    table.iterations = it
    return table


def expected_score(r_a: float, r_b: float) -> float:
    return 1.0 / (1.0 + 10 ** ((r_b - r_a) / 400.0))


# -- csv exports -----------------------------------------------------------

RESULT_FIELDS = ["player_a", "player_b", "wins_a", "wins_b", "draws", "games"]


def write_results_csv(path, results: Sequence[MatchResult]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_FIELDS)
        for r in results:
            w.writerow([r.player_a, r.player_b, r.wins_a, r.wins_b, r.draws, r.games])


def read_results_csv(path) -> list[MatchResult]:
    with open(path, newline="") as fh:
        return [
            MatchResult(row["player_a"], row["player_b"], int(row["wins_a"]), int(row["wins_b"]),
                        int(row["draws"]), int(row["games"]))
            for row in csv.DictReader(fh)
        ]


def write_elo_csv(path, table: EloTable) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["player", "rating", "games"])
        for name, rating in table.ranked():
            w.writerow([name, f"{rating:.2f}", table.games[name]])


def write_rows_csv(path, header: Sequence[str], rows) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
