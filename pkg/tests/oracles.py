"""Independent brute-force rule implementations used as test oracles.

These work directly on 6x6 integer grids (+1, -1, 0) with plain loops and
share no code with the bitboard engine.
"""

import random

import numpy as np

N = 6
DIRECTIONS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def othello_flips(grid, player, r, c):
    if grid[r][c] != 0:
        return []
    flipped = []
    for dr, dc in DIRECTIONS:
        run = []
        rr, cc = r + dr, c + dc
        while 0 <= rr < N and 0 <= cc < N and grid[rr][cc] == -player:
            run.append((rr, cc))
            rr += dr
            cc += dc
        if run and 0 <= rr < N and 0 <= cc < N and grid[rr][cc] == player:
            flipped.extend(run)
    return flipped


def othello_placements(grid, player):
    return sorted(r * N + c for r in range(N) for c in range(N) if othello_flips(grid, player, r, c))


def othello_legal(grid, player):
    moves = othello_placements(grid, player)
    if moves:
        return moves
    if othello_placements(grid, -player):
        return [36]
    return []


def line_winner(grid, length):
    """Scan every horizontal, vertical and diagonal window of ``length`` cells."""
    found = set()
    for r in range(N):
        for c in range(N):
            for dr, dc in ((0, 1), (1, 0), (1, 1), (1, -1)):
                cells = [(r + i * dr, c + i * dc) for i in range(length)]
                if all(0 <= rr < N and 0 <= cc < N for rr, cc in cells):
                    vals = {grid[rr][cc] for rr, cc in cells}
                    if len(vals) == 1 and vals != {0}:
                        found.add(vals.pop())
    return found


def terminal_outcome(game, grid):
    if game == "othello":
        if othello_placements(grid, 1) or othello_placements(grid, -1):
            return None
        n1 = sum(v == 1 for row in grid for v in row)
        n2 = sum(v == -1 for row in grid for v in row)
        return 1 if n1 > n2 else -1 if n2 > n1 else 0
    length = 4 if game == "connect_four" else 5
    winners = line_winner(grid, length)
    if winners:
        assert len(winners) == 1
        return winners.pop()
    if all(v != 0 for row in grid for v in row):
        return 0
    return None


def connect_four_legal(grid):
    return [c for c in range(N) if grid[0][c] == 0]


def gobang_legal(grid):
    return [r * N + c for r in range(N) for c in range(N) if grid[r][c] == 0]


def legal(game, grid, player):
    if game == "othello":
        return othello_legal(grid, player)
    if game == "connect_four":
        return connect_four_legal(grid)
    return gobang_legal(grid)


def random_positions(game, count, seed, terminal_only=False):
    """Random playouts with the engine; yields states along (or at the end of) each game."""
    from azwarm.games import initial_state

    rng = random.Random(seed)
    out = []
    while len(out) < count:
        s = initial_state(game)
        trail = [s]
        while not s.is_terminal():
            s = s.apply_move(rng.choice(s.legal_moves()))
            trail.append(s)
        if terminal_only:
            out.append(trail[-1])
        else:
            out.extend(trail)
    return out[:count]


def grid_of(state):
    return np.asarray(state.board).tolist()


def connect_four_drop(grid, col, player):
    g = [row[:] for row in grid]
    for r in range(N - 1, -1, -1):
        if g[r][col] == 0:
            g[r][col] = player
            return g
    raise ValueError("column full")


def negamax(grid, player, depth):
    """Plain negamax over Connect Four grids; +1 means ``player`` (to move) wins."""
    outcome = terminal_outcome("connect_four", grid)
    if outcome is not None:
        return outcome * player
    if depth == 0:
        return 0
    return max(-negamax(connect_four_drop(grid, c, player), -player, depth - 1) for c in connect_four_legal(grid))


def winning_columns(grid, player):
    return [c for c in connect_four_legal(grid)
            if terminal_outcome("connect_four", connect_four_drop(grid, c, player)) == player]


def forced_win_positions(count, seed):
    """Non-terminal Connect Four states whose side to move wins in one ply.

    Each candidate is confirmed by a depth-2 negamax search from the grid.
    """
    out = []
    for s in random_positions("connect_four", count * 40, seed):
        if s.is_terminal():
            continue
        grid = grid_of(s)
        if winning_columns(grid, s.to_move) and negamax(grid, s.to_move, 2) == 1:
            out.append(s)
            if len(out) == count:
                break
    return out
