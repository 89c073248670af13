"""Command line entry point: ``azwarm train|compare|tournament|play|export``.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from itertools import combinations
from pathlib import Path
from typing import Callable, Optional, Sequence

from .config import ConfigError, RunConfig, load_config
from .evaluation import (
    AgentSpec,
    EloError,
    fit_elo,
    play_match,
    round_robin,
    write_elo_csv,
    write_results_csv,
    write_rows_csv,
)
from .games import OTHELLO, IllegalMoveError, initial_state
from .network import CheckpointError, NetworkEvaluator, load_checkpoint
from .runs import completed_iterations, checkpoint_path, read_logs, read_manifest, run_training
from .search import ENHANCEMENTS, MCTS, Kind, SearchConfig

log = logging.getLogger("azwarm")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=argparse.SUPPRESS, help="flat JSON config file")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed")
    p.add_argument("--workers", type=int, default=argparse.SUPPRESS, help="worker processes")
    p.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return p


def _parse_sets(items: Optional[Sequence[str]]) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set: expected KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _resolve(args, **fields) -> RunConfig:
    overrides = _parse_sets(getattr(args, "set", None))
    overrides.update({k: v for k, v in fields.items() if v is not None})
    for name in ("seed", "out"):
        if getattr(args, name, None) is not None:
            overrides[name] = getattr(args, name)
    return load_config(getattr(args, "config", None), getattr(args, "preset", None), **overrides)


def cmd_train(args) -> int:
    cfg = _resolve(args, game=args.game, mode=args.mode, kind=args.kind, I=args.iters, I_prime=args.iprime)
    run_dir = run_training(cfg, cfg.out, workers=getattr(args, "workers", 1), stop_after=args.stop_after)
    print(run_dir)
    return EXIT_OK


def compare_agents(kinds: Sequence[Kind], m: int, c: float) -> list[AgentSpec]:
    return [AgentSpec(k.value, kind=k, weight=0.5, params=None, m=m, c=c) for k in kinds]


def cmd_compare(args) -> int:
    cfg = _resolve(args, game=args.game, repetitions=args.repetitions)
    if args.repetitions is not None and args.repetitions < 1:
        raise ConfigError("repetitions: must be >= 1")
    if cfg.repetitions % 2:
        raise ConfigError(f"repetitions: must be even so colours split evenly (got {cfg.repetitions})")
    kinds = [Kind(k) for k in args.kinds.split(",")] if args.kinds else [Kind.BASELINE, *ENHANCEMENTS]
    agents = compare_agents(kinds, cfg.m, cfg.c)
    by = {a.name: a for a in agents}
    if args.vs_baseline:
        pairs = [(by[k.value], by["baseline"]) for k in kinds if k != Kind.BASELINE]
    else:
        pairs = [(by[x.value], by[y.value]) for x, y in combinations(kinds, 2)]
    results = []
    for a, b in pairs:
        r = play_match(a, b, cfg.repetitions, cfg.seed, cfg.rules)
        print(f"{a.name:>8} vs {b.name:<8} {100 * r.winrate_a:5.1f}%  ({r.wins_a}-{r.wins_b}-{r.draws})")
        results.append(r)
    out = Path(cfg.out)
    write_results_csv(out / "results.csv", results)
    print(out / "results.csv")
    return EXIT_OK


def _load_player(path: Path, m: int, c: float) -> tuple[AgentSpec, dict]:
    """A run directory (final checkpoint) or a checkpoint file -> agent + metadata."""
    meta = {"kind": "baseline", "mode": "baseline", "I_prime": "", "game": None}
    if path.is_dir():
        done = completed_iterations(path)
        if not done:
            raise CheckpointError(f"{path}: no checkpoints found")
        ck = checkpoint_path(path, done[-1])
        try:
            conf = read_manifest(path)["config"]
            meta.update(kind=conf["kind"], mode=conf["mode"], game=conf["game"],
                        I_prime=conf["I_prime"] if conf["mode"] == "fixed" else "")
            if conf["mode"] == "baseline":
                meta["kind"] = "baseline"
        except (OSError, KeyError, ValueError):
            pass
    else:
        ck = path
    params, _ = load_checkpoint(ck)
    return AgentSpec(path.name if path.is_dir() else path.stem, Kind.BASELINE, params=params, m=m, c=c), meta


def cmd_tournament(args) -> int:
    cfg = _resolve(args, game=args.game)
    paths = [Path(p) for p in args.runs]
    if len(paths) < 2:
        raise ConfigError("runs: a tournament needs at least two checkpoints or run directories")
    players, metas = [], {}
    for p in paths:
        agent, meta = _load_player(p, cfg.m, cfg.c)
        if agent.name in metas:
            agent = AgentSpec(f"{agent.name}#{len(metas)}", agent.kind, params=agent.params, m=cfg.m, c=cfg.c)
        players.append(agent)
        metas[agent.name] = meta
    games = {m["game"] for m in metas.values() if m["game"]}
    if len(games) > 1:
        raise ConfigError(f"runs: checkpoints come from different games {sorted(games)}")
    game = games.pop() if games else cfg.game
    results = round_robin(players, args.games_per_pair, cfg.seed, game)
    table = fit_elo(results)
    out = Path(cfg.out)
    write_results_csv(out / "results.csv", results)
    write_elo_csv(out / "elo.csv", table)
    write_rows_csv(
        out / "fig_adaptive_vs_fixed.csv", ["player", "kind", "mode", "elo"],
        [(n, metas[n]["kind"], metas[n]["mode"], f"{table[n]:.2f}") for n in sorted(table.ratings)],
    )
    write_rows_csv(
        out / "fig_fixed_iprime.csv", ["player", "kind", "I_prime", "elo"],
        [(n, metas[n]["kind"], metas[n]["I_prime"], f"{table[n]:.2f}")
         for n in sorted(table.ratings) if metas[n]["mode"] == "fixed"],
    )
    for name, rating in table.ranked():
        print(f"{rating:8.1f}  {name}")
    return EXIT_OK


def cmd_export(args) -> int:
    out = Path(getattr(args, "out", None) or ".")
    balance, switches = [], []
    for run in args.runs:
        run = Path(run)
        try:
            logs = read_logs(run / "log" / "iterations.csv")
        except FileNotFoundError:
            raise CheckpointError(f"{run}: no log/iterations.csv") from None
        for e in logs:
            if e.r_mcts is not None:
                balance.append((run.name, e.iteration, e.r_mcts))
        sw = json.loads((run / "log" / "switch.json").read_text())
        conf = read_manifest(run)["config"]
        switches.append((run.name, conf["game"], conf["kind"], conf["mode"], sw.get("switch_iteration") or ""))
    write_rows_csv(out / "fig_reward_balance.csv", ["run", "iteration", "r_mcts"], balance)
    write_rows_csv(out / "switch_iterations.csv", ["run", "game", "kind", "mode", "switch_iteration"], switches)
    print(out / "fig_reward_balance.csv")
    return EXIT_OK


def _parse_move(text: str, state) -> int:
    text = text.strip().lower()
    if state.game == "othello" and text == "pass":
        return OTHELLO.PASS
    parts = text.replace(",", " ").split()
    if state.game == "connect_four":
        if len(parts) != 1:
            raise ValueError("enter a column number 0-5")
        return int(parts[0])
    if len(parts) == 2:
        r, c = int(parts[0]), int(parts[1])
        if not (0 <= r < 6 and 0 <= c < 6):
            raise ValueError("row and column must be 0-5")
        return r * 6 + c
    raise ValueError("enter 'row col' (0-5 each)" + (" or 'pass'" if state.game == "othello" else ""))


def play_session(
    params,
    game: str,
    m: int = 100,
    c: float = 1.0,
    human_first: bool = True,
    input_fn: Callable[[str], str] = input,
    output: Callable[[str], None] = print,
) -> int:
    """Interactive game against default search; returns the result for the human."""
    agent = MCTS(SearchConfig(m=m, c=c, kind=Kind.BASELINE), NetworkEvaluator(params))
    human = 1 if human_first else -1
    s = initial_state(game)
    while not s.is_terminal():
        output(s.to_text())
        if s.to_move == human:
            try:
                raw = input_fn("your move> ")
            except EOFError:
                output("input closed; ending session")
                return 0
            try:
                s = s.apply_move(_parse_move(raw, s))
            except (ValueError, IllegalMoveError) as e:
                output(f"illegal move: {e}")
            continue
        pi = agent.policy(s)
        a = max(range(len(pi)), key=lambda i: (pi[i], -i))
        output(f"agent plays {a}")
        s = s.apply_move(a)
    output(s.to_text())
    result = s.terminal_value() * human
    output({1: "result: you win", -1: "result: agent wins", 0: "result: draw"}[result])
    return result


def cmd_play(args) -> int:
    params, _ = load_checkpoint(args.checkpoint)
    cfg = _resolve(args, game=args.game)
    if params.arch.action_size != cfg.rules.action_size:
        raise ConfigError(f"game: checkpoint action space {params.arch.action_size} does not fit {cfg.game}")
    play_session(params, cfg.game, cfg.m, cfg.c, human_first=not args.agent_first)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    flags = _global_flags()
    parser = argparse.ArgumentParser(prog="azwarm", description=__doc__.splitlines()[0], parents=[flags])
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", parents=[flags], help="run or resume a training run")
    t.add_argument("--game", choices=["connect_four", "othello", "gobang"])
    t.add_argument("--mode", choices=["fixed", "adaptive", "baseline"])
    t.add_argument("--kind", choices=[k.value for k in Kind])
    t.add_argument("--iters", type=int, help="total iterations I")
    t.add_argument("--iprime", type=int, help="fixed warm-start length I'")
    t.add_argument("--preset", choices=["fig1", "fig3"])
    t.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config field")
    t.add_argument("--stop-after", type=int, help="exit after this many iterations (resumable)")
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("compare", parents=[flags], help="untrained-network pairwise win rates")
    c.add_argument("--game", choices=["connect_four", "othello", "gobang"])
    c.add_argument("--kinds", help="comma separated kinds (default: baseline and all enhancements)")
    c.add_argument("--repetitions", type=int)
    c.add_argument("--vs-baseline", action="store_true", help="only play each enhancement against baseline")
    c.add_argument("--set", action="append", metavar="KEY=VALUE")
    c.set_defaults(func=cmd_compare, preset="table2")

    r = sub.add_parser("tournament", parents=[flags], help="round robin between trained models + Elo")
    r.add_argument("runs", nargs="+", help="run directories or checkpoint files")
    r.add_argument("--games-per-pair", type=int, default=20)
    r.add_argument("--game", choices=["connect_four", "othello", "gobang"])
    r.add_argument("--set", action="append", metavar="KEY=VALUE")
    r.set_defaults(func=cmd_tournament)

    p = sub.add_parser("play", parents=[flags], help="play against a checkpoint in the terminal")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--game", required=True, choices=["connect_four", "othello", "gobang"])
    p.add_argument("--agent-first", action="store_true")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_play)

    e = sub.add_parser("export", parents=[flags], help="plot data from run directories")
    e.add_argument("runs", nargs="+")
    e.set_defaults(func=cmd_export)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    if not hasattr(args, "workers"):
        args.workers = 1
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (CheckpointError, EloError, OSError, RuntimeError, ValueError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
