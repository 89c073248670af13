import random

import numpy as np
import pytest

from azwarm.games import (
    CONNECT_FOUR,
    GOBANG,
    OTHELLO,
    Gobang,
    IllegalMoveError,
    TerminalStateError,
    apply_move,
    encode,
    from_board,
    initial_state,
    legal_moves,
    state_from_text,
    terminal_value,
)

import oracles

GAMES = ["connect_four", "othello", "gobang"]


def test_initial_positions():
    c4 = initial_state("connect_four")
    assert c4.to_move == 1 and not c4.board.any()
    oth = initial_state("othello")
    assert (oth.board != 0).sum() == 4 and (oth.board == 0).sum() == 32
    assert (oth.board[2:4, 2:4] != 0).all()
    gob = initial_state("gobang")
    assert (gob.board == 0).sum() == 36


@pytest.mark.parametrize("game,count", [("connect_four", 6), ("othello", 4), ("gobang", 36)])
def test_initial_move_counts(game, count):
    assert len(legal_moves(initial_state(game))) == count


def test_connect_four_gravity():
    s = apply_move(initial_state("connect_four"), 2)
    assert s.board[5, 2] == 1 and s.board.sum() == 1
    assert s.to_move == -1
    s = apply_move(s, 2)
    assert s.board[4, 2] == -1


def test_input_state_unmodified():
    s = initial_state("othello")
    before = s.board.copy()
    apply_move(s, legal_moves(s)[0])
    assert (s.board == before).all() and s.to_move == 1


def test_illegal_move_is_rejected_with_message():
    s = initial_state("othello")
    with pytest.raises(IllegalMoveError, match="not legal"):
        apply_move(s, 0)
    full_col = initial_state("connect_four")
    for _ in range(6):
        full_col = apply_move(full_col, 0)
    with pytest.raises(IllegalMoveError):
        apply_move(full_col, 0)


def test_terminal_state_has_no_moves():
    grid = np.zeros((6, 6), int)
    grid[5, :4] = 1
    grid[4, :3] = -1
    s = from_board("connect_four", grid, -1)
    assert terminal_value(s) == 1
    with pytest.raises(TerminalStateError):
        legal_moves(s)


def test_othello_pass():
    # player1 (X) has no flipping move, player2 does
    s = state_from_text(
        "othello",
        """
        OX....
        ......
        ......
        ......
        ......
        ......
        X to move
        """,
    )
    assert legal_moves(s) == [OTHELLO.PASS]
    t = apply_move(s, OTHELLO.PASS)
    assert (t.board == s.board).all() and t.to_move == -1
    assert legal_moves(t) != [OTHELLO.PASS]
    with pytest.raises(IllegalMoveError):
        apply_move(t, OTHELLO.PASS)


def test_othello_no_moves_for_both_is_terminal():
    s = state_from_text(
        "othello",
        """
        XX....
        ......
        ......
        ......
        ......
        ....O.
        O to move
        """,
    )
    assert terminal_value(s) == 1


def test_initial_states_not_terminal():
    for g in GAMES:
        assert terminal_value(initial_state(g)) is None


def test_encode_perspective():
    assert not encode(initial_state("connect_four")).any()
    s = apply_move(initial_state("gobang"), 7)
    flipped = from_board("gobang", s.board, -s.to_move)
    np.testing.assert_array_equal(encode(s), -encode(flipped))
    assert encode(s).shape == (6, 6) and encode(s).dtype == np.float32


@pytest.mark.parametrize("game", GAMES)
def test_encode_changes_after_placing_move(game):
    rng = random.Random(3)
    for s in oracles.random_positions(game, 300, seed=11):
        if s.is_terminal():
            continue
        a = rng.choice(s.legal_moves())
        if game == "othello" and a == OTHELLO.PASS:
            continue
        assert (encode(apply_move(s, a)) != encode(s)).any()


def test_text_round_trip():
    s = initial_state("othello")
    text = s.to_text()
    assert text.splitlines()[-1] == "X to move"
    assert state_from_text("othello", text) == s
    with pytest.raises(ValueError):
        state_from_text("othello", "XX\nX to move")


def test_gobang_win_length_configurable():
    grid = np.zeros((6, 6), int)
    grid[0, :4] = 1
    grid[1, :3] = -1
    assert from_board(Gobang(win_length=4), grid, -1).terminal_value() == 1
    assert from_board(GOBANG, grid, -1).terminal_value() is None
    grid[0, 4] = 1
    grid[1, 3] = -1
    assert from_board(GOBANG, grid, -1).terminal_value() == 1


def test_diagonal_wins():
    grid = np.zeros((6, 6), int)
    for i in range(4):
        grid[5 - i, i] = -1
    assert from_board(CONNECT_FOUR, grid, 1).terminal_value() == -1
    grid = np.zeros((6, 6), int)
    for i in range(5):
        grid[i, i + 1] = 1
    assert from_board(GOBANG, grid, -1).terminal_value() == 1


@pytest.mark.parametrize("game", GAMES)
def test_gobang_style_piece_counts_match_moves(game):
    rng = random.Random(5)
    for _ in range(50):
        s = initial_state(game)
        placed = 0
        while not s.is_terminal():
            a = rng.choice(s.legal_moves())
            s = s.apply_move(a)
            placed += 1
            if game != "othello":
                assert (s.board != 0).sum() == placed


@pytest.mark.parametrize("game", GAMES)
def test_successor_invariants(game):
    rng = random.Random(9)
    for _ in range(100):
        s = initial_state(game)
        while not s.is_terminal():
            a = rng.choice(s.legal_moves())
            t = s.apply_move(a)
            assert t.to_move == -s.to_move
            if game == "connect_four":
                b = t.board
                for c in range(6):
                    col = b[:, c]
                    filled = np.nonzero(col)[0]
                    if len(filled):
                        assert (col[filled.min():] != 0).all()
            if game == "othello":
                n_before = (s.board != 0).sum()
                n_after = (t.board != 0).sum()
                assert n_after == n_before + (a != OTHELLO.PASS)
                assert (t.board[2:4, 2:4] != 0).any()
            s = t


def test_determinism_and_equality():
    a = apply_move(initial_state("connect_four"), 3)
    b = apply_move(initial_state("connect_four"), 3)
    assert a == b and hash(a) == hash(b)
    assert legal_moves(a) == legal_moves(b)
