"""Warm-start search enhancements for AlphaZero-style self-play on 6x6 board games."""

__version__ = "0.1.0"

from .games import GameState, apply_move, encode, initial_state, legal_moves, terminal_value
from .search import Kind, SearchConfig, search

__all__ = [
    "GameState",
    "Kind",
    "SearchConfig",
    "apply_move",
    "encode",
    "initial_state",
    "legal_moves",
    "search",
    "terminal_value",
]
