"""Rules engines for the 6x6 board games: Connect Four, Othello and Gobang.

Boards are stored as a pair of Python-int bitboards (one per player).  Cell
``(row, col)`` lives at bit ``row * 7 + col``; the seventh bit of every row
is an always-empty guard column, so line scans by shifting never wrap from
one row into the next.

Action ids are ``row * 6 + col`` for Othello and Gobang (plus ``36`` for the
Othello pass) and the column index for Connect Four.  Row 0 is the top row;
Connect Four pieces fall towards row 5.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

SIZE = 6
STRIDE = SIZE + 1
PLAYER1 = 1
PLAYER2 = -1

# Gobang line length needed to win.  Five is the usual rule; four is kept
# available for sensitivity runs via ``Gobang(win_length=4)``.
GOBANG_WIN_LENGTH = 5

FULL = 0
for _r in range(SIZE):
    for _c in range(SIZE):
        FULL |= 1 << (_r * STRIDE + _c)

# bit masks indexed by cell action id (row * 6 + col)
CELL_BIT = [1 << ((a // SIZE) * STRIDE + a % SIZE) for a in range(SIZE * SIZE)]
_BITPOS_TO_CELL = {(a // SIZE) * STRIDE + a % SIZE: a for a in range(SIZE * SIZE)}

# line directions as shift amounts: east, south, south-east, south-west
_LINE_SHIFTS = (1, STRIDE, STRIDE + 1, STRIDE - 1)
# all eight neighbour directions for Othello flips
_RAY_SHIFTS = (1, -1, STRIDE, -STRIDE, STRIDE + 1, -(STRIDE + 1), STRIDE - 1, -(STRIDE - 1))


class IllegalMoveError(ValueError):
    """Raised when a move is not legal in the given position."""


class TerminalStateError(ValueError):
    """Raised when a move query is made on a finished game."""


def has_line(bits: int, length: int) -> bool:
    for d in _LINE_SHIFTS:
        m = bits
        for i in range(1, length):
            m &= bits >> (d * i)
            if not m:
                break
        if m:
            return True
    return False


def popcount(bits: int) -> int:
    return bin(bits).count("1")


def bits_to_cells(bits: int) -> list[int]:
    cells = []
    while bits:
        low = bits & -bits
        cells.append(_BITPOS_TO_CELL[low.bit_length() - 1])
        bits ^= low
    return cells


def _shift(bits: int, d: int) -> int:
    if d > 0:
        return (bits << d) & FULL
    return bits >> -d


def othello_move_mask(own: int, opp: int) -> int:
    """Bitmask of empty cells where ``own`` flips at least one disc."""
    empty = FULL & ~(own | opp)
    moves = 0
    for d in _RAY_SHIFTS:
        t = _shift(own, d) & opp
        t |= _shift(t, d) & opp
        t |= _shift(t, d) & opp
        t |= _shift(t, d) & opp
        moves |= _shift(t, d) & empty
    return moves


def othello_flips(own: int, opp: int, move_bit: int) -> int:
    flips = 0
    for d in _RAY_SHIFTS:
        run = 0
        b = _shift(move_bit, d)
        while b & opp:
            run |= b
            b = _shift(b, d)
        if b & own:
            flips |= run
    return flips


class Rules:
    """Per-game rules acting on ``(own, opp)`` bitboards of the side to move."""

    name: str = ""
    action_size: int = 0

    def legal_actions(self, own: int, opp: int) -> list[int]:
        raise NotImplementedError

    def play(self, own: int, opp: int, action: int) -> tuple[int, int]:
        """Return the mover's and the opponent's bitboards after ``action``."""
        raise NotImplementedError

    def winner(self, p1: int, p2: int) -> Optional[int]:
        raise NotImplementedError

    def playout(self, own: int, opp: int, rng: random.Random) -> int:
        """Play uniformly random moves to the end; result for ``own``."""
        raise NotImplementedError

    def __eq__(self, other: object) -> bool:
        return type(other) is type(self) and vars(self) == vars(other)

    def __hash__(self) -> int:
        return hash((type(self).__name__, tuple(sorted(vars(self).items()))))

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class ConnectFour(Rules):
    name = "connect_four"
    action_size = SIZE
    win_length = 4

    def legal_actions(self, own, opp):
        occ = own | opp
        return [c for c in range(SIZE) if not occ & (1 << c)]

    @staticmethod
    def _drop_bit(occ: int, col: int) -> int:
        for r in range(SIZE - 1, -1, -1):
            b = 1 << (r * STRIDE + col)
            if not occ & b:
                return b
        return 0

    def play(self, own, opp, action):
        if not 0 <= action < SIZE:
            raise IllegalMoveError(f"column {action} out of range")
        b = self._drop_bit(own | opp, action)
        if not b:
            raise IllegalMoveError(f"column {action} is full")
        return own | b, opp

    def winner(self, p1, p2):
        if has_line(p1, 4):
            return PLAYER1
        if has_line(p2, 4):
            return PLAYER2
        if (p1 | p2) == FULL:
            return 0
        return None

    def playout(self, own, opp, rng):
        # heights counted in filled cells per column
        occ = own | opp
        heights = [sum(1 for r in range(SIZE) if occ & (1 << (r * STRIDE + c))) for c in range(SIZE)]
        cols = [c for c in range(SIZE) if heights[c] < SIZE]
        sign = 1
        mover, other = own, opp
        if has_line(opp, 4):
            return -1
        if has_line(own, 4):
            return 1
        while cols:
            c = cols[int(rng.random() * len(cols))]
            h = heights[c]
            mover |= 1 << ((SIZE - 1 - h) * STRIDE + c)
            heights[c] = h + 1
            if h + 1 == SIZE:
                cols.remove(c)
            if has_line(mover, 4):
                return sign
            mover, other = other, mover
            sign = -sign
        return 0


class Gobang(Rules):
    name = "gobang"
    action_size = SIZE * SIZE

    def __init__(self, win_length: int = GOBANG_WIN_LENGTH):
        self.win_length = win_length

    def __repr__(self):
        return f"Gobang(win_length={self.win_length})"

    def legal_actions(self, own, opp):
        return bits_to_cells(FULL & ~(own | opp))

    def play(self, own, opp, action):
        if not 0 <= action < SIZE * SIZE:
            raise IllegalMoveError(f"cell {action} out of range")
        b = CELL_BIT[action]
        if (own | opp) & b:
            raise IllegalMoveError(f"cell {action} is occupied")
        return own | b, opp

    def winner(self, p1, p2):
        if has_line(p1, self.win_length):
            return PLAYER1
        if has_line(p2, self.win_length):
            return PLAYER2
        if (p1 | p2) == FULL:
            return 0
        return None

    def playout(self, own, opp, rng):
        k = self.win_length
        if has_line(opp, k):
            return -1
        if has_line(own, k):
            return 1
        # uniform random legal moves until the end == a random order of empties
        empties = bits_to_cells(FULL & ~(own | opp))
        rng.shuffle(empties)
        bits = [own, opp]
        side = 0
        for a in empties:
            bits[side] |= CELL_BIT[a]
            if has_line(bits[side], k):
                return 1 if side == 0 else -1
            side ^= 1
        return 0


class Othello(Rules):
    name = "othello"
    action_size = SIZE * SIZE + 1
    PASS = SIZE * SIZE

    def legal_actions(self, own, opp):
        mask = othello_move_mask(own, opp)
        if mask:
            return bits_to_cells(mask)
        if othello_move_mask(opp, own):
            return [self.PASS]
        return []

    def play(self, own, opp, action):
        if action == self.PASS:
            if othello_move_mask(own, opp):
                raise IllegalMoveError("pass is only legal when no placing move exists")
            if not othello_move_mask(opp, own):
                raise IllegalMoveError("game is over; pass is not a move")
            return own, opp
        if not 0 <= action < SIZE * SIZE:
            raise IllegalMoveError(f"cell {action} out of range")
        b = CELL_BIT[action]
        if (own | opp) & b:
            raise IllegalMoveError(f"cell {action} is occupied")
        flips = othello_flips(own, opp, b)
        if not flips:
            raise IllegalMoveError(f"cell {action} flips nothing")
        return own | b | flips, opp & ~flips

    def winner(self, p1, p2):
        if othello_move_mask(p1, p2) or othello_move_mask(p2, p1):
            return None
        n1, n2 = popcount(p1), popcount(p2)
        return PLAYER1 if n1 > n2 else PLAYER2 if n2 > n1 else 0

    def playout(self, own, opp, rng):
        me, them = own, opp
        sign = 1
        passed = False
        while True:
            mask = othello_move_mask(me, them)
            if mask:
                passed = False
                n = popcount(mask)
                k = int(rng.random() * n)
                for _ in range(k):
                    mask &= mask - 1
                b = mask & -mask
                flips = othello_flips(me, them, b)
                me |= b | flips
                them &= ~flips
            elif passed:
                break
            else:
                passed = True
            me, them = them, me
            sign = -sign
        n_me, n_them = popcount(me), popcount(them)
        if n_me == n_them:
            return 0
        return sign if n_me > n_them else -sign


CONNECT_FOUR = ConnectFour()
OTHELLO = Othello()
GOBANG = Gobang()

GAMES = {g.name: g for g in (CONNECT_FOUR, OTHELLO, GOBANG)}
GameLike = Union[str, Rules]


def get_rules(game: GameLike) -> Rules:
    if isinstance(game, Rules):
        return game
    try:
        return GAMES[game]
    except KeyError:
        raise ValueError(f"unknown game {game!r}; expected one of {sorted(GAMES)}") from None


@dataclass(frozen=True, eq=False)
class GameState:
    """Immutable position: both players' bitboards plus the side to move."""

    rules: Rules
    p1: int
    p2: int
    to_move: int = PLAYER1
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def game(self) -> str:
        return self.rules.name

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.p1, self.p2, self.to_move)

    def __eq__(self, other):
        return isinstance(other, GameState) and self.rules == other.rules and self.key == other.key

    def __hash__(self):
        return hash((self.rules.name, self.key))

    @property
    def own(self) -> int:
        return self.p1 if self.to_move == PLAYER1 else self.p2

    @property
    def opp(self) -> int:
        return self.p2 if self.to_move == PLAYER1 else self.p1

    @property
    def board(self) -> np.ndarray:
        """6x6 int8 grid with +1 for player1, -1 for player2, 0 empty."""
        return bits_to_array(self.p1) - bits_to_array(self.p2)

    def terminal_value(self) -> Optional[int]:
        c = self._cache
        if "outcome" not in c:
            c["outcome"] = self.rules.winner(self.p1, self.p2)
        return c["outcome"]

    def is_terminal(self) -> bool:
        return self.terminal_value() is not None

    def legal_moves(self) -> list[int]:
        c = self._cache
        if "legal" not in c:
            if self.is_terminal():
                raise TerminalStateError("no legal moves in a terminal state")
            c["legal"] = self.rules.legal_actions(self.own, self.opp)
        return c["legal"]

    def apply_move(self, action: int) -> "GameState":
        if self.is_terminal():
            raise TerminalStateError(f"cannot play {action}: game is over")
        action = int(action)
        if action not in self.legal_moves():
            raise IllegalMoveError(
                f"{self.game}: action {action} is not legal; legal actions are {self.legal_moves()}"
            )
        own, opp = self.rules.play(self.own, self.opp, action)
        if self.to_move == PLAYER1:
            return GameState(self.rules, own, opp, PLAYER2)
        return GameState(self.rules, opp, own, PLAYER1)

    def encode(self) -> np.ndarray:
        """6x6 float32 plane: +1 own piece, -1 opponent piece, 0 empty."""
        return (bits_to_array(self.own) - bits_to_array(self.opp)).astype(np.float32)

    def to_text(self) -> str:
        return state_to_text(self)


def bits_to_array(bits: int) -> np.ndarray:
    raw = np.frombuffer(bits.to_bytes(6, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[: SIZE * STRIDE].reshape(SIZE, STRIDE)[:, :SIZE].astype(np.int8)


def array_to_bits(grid: np.ndarray, value: int) -> int:
    bits = 0
    for r, c in zip(*np.nonzero(np.asarray(grid) == value)):
        bits |= 1 << (int(r) * STRIDE + int(c))
    return bits


def initial_state(game: GameLike) -> GameState:
    rules = get_rules(game)
    if isinstance(rules, Othello):
        # 6x6 opening: white on the main diagonal of the centre square
        p2 = CELL_BIT[2 * SIZE + 2] | CELL_BIT[3 * SIZE + 3]
        p1 = CELL_BIT[2 * SIZE + 3] | CELL_BIT[3 * SIZE + 2]
        return GameState(rules, p1, p2, PLAYER1)
    return GameState(rules, 0, 0, PLAYER1)


def from_board(game: GameLike, board: Sequence[Sequence[int]], to_move: int = PLAYER1) -> GameState:
    """Build a state from a 6x6 grid of {+1, -1, 0} (player1, player2, empty)."""
    grid = np.asarray(board)
    if grid.shape != (SIZE, SIZE):
        raise ValueError(f"board must be {SIZE}x{SIZE}, got {grid.shape}")
    if to_move not in (PLAYER1, PLAYER2):
        raise ValueError(f"to_move must be +1 or -1, got {to_move}")
    return GameState(get_rules(game), array_to_bits(grid, 1), array_to_bits(grid, -1), to_move)


# module-level aliases mirroring the state methods
def legal_moves(s: GameState) -> list[int]:
    return s.legal_moves()


def apply_move(s: GameState, action: int) -> GameState:
    return s.apply_move(action)


def terminal_value(s: GameState) -> Optional[int]:
    return s.terminal_value()


def encode(s: GameState) -> np.ndarray:
    return s.encode()


_CHARS = {1: "X", -1: "O", 0: "."}


def state_to_text(s: GameState) -> str:
    rows = ["".join(_CHARS[int(v)] for v in row) for row in s.board]
    rows.append(f"{_CHARS[s.to_move]} to move")
    return "\n".join(rows)


def state_from_text(game: GameLike, text: str) -> GameState:
    """Parse the diagram format: six rows of ``.XO`` then ``X to move``."""
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if len(lines) != SIZE + 1:
        raise ValueError(f"expected {SIZE} board rows and a 'to move' line, got {len(lines)} lines")
    lookup = {"X": 1, "O": -1, ".": 0}
    grid = []
    for ln in lines[:SIZE]:
        if len(ln) != SIZE or any(ch not in lookup for ch in ln):
            raise ValueError(f"bad board row {ln!r}")
        grid.append([lookup[ch] for ch in ln])
    tail = lines[SIZE].split()
    if len(tail) != 3 or tail[0] not in ("X", "O") or tail[1:] != ["to", "move"]:
        raise ValueError(f"bad side-to-move line {lines[SIZE]!r}")
    return from_board(game, grid, lookup[tail[0]])
