"""Network-guided P-UCT tree search and its warm-start variants.

One tree implementation serves all six kinds.  The kinds differ in two
places only: the leaf value (network, random rollout, or a weighted blend)
and the selection score (plain P-UCT, or P-UCT mixed with RAVE statistics).

=========  ==================  ==========================================
kind       selection           leaf value
=========  ==================  ==========================================
baseline   P-UCT               network
rollout    P-UCT               rollout
rave       P-UCT + RAVE        network
rora       P-UCT + RAVE        rollout
wro        P-UCT               (1 - w) * network + w * rollout
wrora      P-UCT + RAVE        (1 - w) * network + w * rollout
=========  ==================  ==========================================

All values stored in the tree are from the perspective of the player to move
at the node that owns the edge.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .games import GameState

Evaluator = Callable[[GameState], "tuple[np.ndarray, float]"]


class Kind(str, Enum):
    BASELINE = "baseline"
    ROLLOUT = "rollout"
    RAVE = "rave"
    RORA = "rora"
    WRO = "wro"
    WRORA = "wrora"

    @property
    def uses_rave(self) -> bool:
        return self in (Kind.RAVE, Kind.RORA, Kind.WRORA)

    @property
    def uses_rollout(self) -> bool:
        return self in (Kind.ROLLOUT, Kind.RORA, Kind.WRO, Kind.WRORA)

    @property
    def uses_weight(self) -> bool:
        return self in (Kind.WRO, Kind.WRORA)


ENHANCEMENTS = (Kind.ROLLOUT, Kind.RAVE, Kind.RORA, Kind.WRO, Kind.WRORA)


class SearchError(RuntimeError):
    pass


@dataclass(frozen=True)
class SearchConfig:
    m: int = 100
    c: float = 1.0
    equivalence: Optional[float] = None  # defaults to m
    kind: Kind = Kind.BASELINE
    weight: float = 0.5
    seed: int = 0
    reuse_tree: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not self.c > 0:
            raise ValueError(f"c must be > 0, got {self.c}")
        if self.equivalence is not None and not self.equivalence > 0:
            raise ValueError(f"equivalence must be > 0, got {self.equivalence}")
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"weight must lie in [0, 1], got {self.weight}")

    @property
    def rave_equivalence(self) -> float:
        return float(self.m if self.equivalence is None else self.equivalence)


def puct_score(q, p, n, n_total, c):
    """Q + c * P * sqrt(N_total) / (N + 1); works on scalars or arrays."""
    return q + c * p * np.sqrt(n_total) / (n + 1)


def rave_beta(n_total, equivalence):
    return np.sqrt(equivalence / (3.0 * n_total + equivalence))


def uct_rave_score(q, p, n, n_total, q_rave, n_rave, n_rave_total, c, equivalence, beta=None):
    """(1 - beta) * U + beta * U_rave, beta from the plain visit total."""
    if beta is None:
        beta = rave_beta(n_total, equivalence)
    u = puct_score(q, p, n, n_total, c)
    u_rave = q_rave + c * p * np.sqrt(n_rave_total) / (n_rave + 1)
    return (1.0 - beta) * u + beta * u_rave


class Node:
    """Edge statistics of one expanded state, indexed by position in ``actions``."""

    __slots__ = ("state", "actions", "index", "prior", "n", "q", "n_total", "rave_n", "rave_q", "children")

    def __init__(self, state: GameState, prior: np.ndarray):
        actions = state.legal_moves()
        self.state = state
        self.actions = actions
        self.index = {a: i for i, a in enumerate(actions)}
        p = np.asarray(prior, dtype=np.float64)[actions]
        total = p.sum()
        self.prior = p / total if total > 0 else np.full(len(actions), 1.0 / len(actions))
        k = len(actions)
        self.n = np.zeros(k)
        self.q = np.zeros(k)
        self.n_total = 0
        self.rave_n = np.zeros(k)
        self.rave_q = np.zeros(k)
        self.children: list = [None] * k

    def child(self, i: int) -> GameState:
        s = self.children[i]
        if s is None:
            s = self.children[i] = self.state.apply_move(self.actions[i])
        return s


def rollout_value(s: GameState, rng: random.Random) -> float:
    """Uniform random playout; result from the perspective of ``s.to_move``."""
    outcome = s.terminal_value()
    if outcome is not None:
        return float(outcome * s.to_move)
    return float(s.rules.playout(s.own, s.opp, rng))


def leaf_value(
    s: GameState,
    kind: Kind,
    weight: float,
    network_value: Optional[float],
    rng: random.Random,
) -> float:
    """Value of a freshly expanded leaf for ``s.to_move``.

    ``network_value`` is the evaluator's value for ``s``; it is ignored by the
    pure rollout kinds.  Terminal leaves always score their true outcome.
    """
    outcome = s.terminal_value()
    if outcome is not None:
        return float(outcome * s.to_move)
    kind = Kind(kind)
    if not kind.uses_rollout:
        return float(network_value)
    v_roll = rollout_value(s, rng)
    if kind.uses_weight:
        return (1.0 - weight) * float(network_value) + weight * v_roll
    return v_roll


def rave_update(path: list, v_leaf: float) -> None:
    """AMAF update over the tree part of one simulation.

    ``path`` holds ``(node, edge_index)`` pairs from root to leaf; ``v_leaf``
    is the leaf value for the player to move at the leaf.  Every ancestor
    ``node_t1`` is credited with each action played at or below it that is
    legal at ``node_t1`` and did not occur earlier in the segment from ``t1``.
    Actions are credited whichever side played them; the value is signed for
    the player to move at ``node_t1``.
    """
    depth = len(path)
    played = [node.actions[i] for node, i in path]
    for t1, (node, _) in enumerate(path):
        v = v_leaf if (depth - t1) % 2 == 0 else -v_leaf
        seen = set()
        for t2 in range(t1, depth):
            a = played[t2]
            if a in seen:
                continue
            seen.add(a)
            j = node.index.get(a)
            if j is None:
                continue
            nr = node.rave_n[j]
            node.rave_q[j] = (nr * node.rave_q[j] + v) / (nr + 1)
            node.rave_n[j] = nr + 1


class MCTS:
    """A search tree bound to one evaluator and one configuration."""

    def __init__(self, cfg: SearchConfig, evaluator: Evaluator, rng: Optional[random.Random] = None):
        self.cfg = cfg
        self.evaluator = evaluator
        self.rng = rng if rng is not None else random.Random(cfg.seed)
        self.tree: dict = {}

    def reset(self) -> None:
        self.tree.clear()

    def _evaluate(self, s: GameState):
        try:
            policy, value = self.evaluator(s)
        except Exception as e:  # evaluator failures abort the whole search
            raise SearchError(f"evaluator failed on state\n{s.to_text()}\n{type(e).__name__}: {e}") from e
        return policy, value

    def _expand(self, s: GameState) -> tuple[Node, float]:
        policy, value = self._evaluate(s)
        node = Node(s, policy)
        self.tree[s.key] = node
        return node, value

    def select(self, node: Node, beta: Optional[float] = None) -> int:
        """Index of the child to descend into; ties go to the lowest action id."""
        cfg = self.cfg
        if cfg.kind.uses_rave:
            scores = uct_rave_score(
                node.q, node.prior, node.n, node.n_total,
                node.rave_q, node.rave_n, node.rave_n.sum(),
                cfg.c, cfg.rave_equivalence, beta,
            )
        else:
            scores = puct_score(node.q, node.prior, node.n, node.n_total, cfg.c)
        return int(np.argmax(scores))

    def simulate(self, root: Node) -> None:
        cfg = self.cfg
        path = []
        node = root
        while True:
            i = self.select(node)
            path.append((node, i))
            child = node.child(i)
            outcome = child.terminal_value()
            if outcome is not None:
                v = float(outcome * child.to_move)
                break
            nxt = self.tree.get(child.key)
            if nxt is None:
                nxt, net_v = self._expand(child)
                v = leaf_value(child, cfg.kind, cfg.weight, net_v, self.rng)
                break
            node = nxt
        if cfg.kind.uses_rave:
            rave_update(path, v)
        for node, i in reversed(path):
            v = -v
            n = node.n[i] + 1
            node.n[i] = n
            node.q[i] += (v - node.q[i]) / n
            node.n_total += 1

    def run(self, s: GameState) -> Node:
        """Run ``m`` simulations from ``s`` and return the root node."""
        if s.is_terminal():
            raise SearchError("search called on a terminal state")
        if not self.cfg.reuse_tree:
            self.tree.clear()
        root = self.tree.get(s.key)
        if root is None:
            root, _ = self._expand(s)
        for _ in range(self.cfg.m):
            self.simulate(root)
        return root

    def policy(self, s: GameState) -> np.ndarray:
        """Visit-count policy over the full action space."""
        root = self.run(s)
        pi = np.zeros(s.rules.action_size)
        pi[root.actions] = root.n / root.n.sum()
        return pi


def search(s: GameState, cfg: SearchConfig, evaluator: Evaluator, rng: Optional[random.Random] = None) -> np.ndarray:
    return MCTS(cfg, evaluator, rng).policy(s)
