# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#   kernelspec:
#     display_name: Python 3
#     language: python
#     name: python3
# ---

# %% [markdown]
# # Six ways to search one position
#
# A Connect Four position where X can win at once, searched by each
# search kind with the same untrained network.  The untrained network's
# value is close to noise, so kinds that also look at random playouts find
# the win more reliably at low budgets.

# %%
import random

import numpy as np

from azwarm.games import from_board, state_to_text
from azwarm.network import NetworkEvaluator, init_params
from azwarm.search import MCTS, Kind, SearchConfig

# %%
X, O, _ = 1, -1, 0
board = [
    [_, _, _, _, _, _],
    [_, _, _, _, _, _],
    [_, _, _, _, _, _],
    [_, O, _, _, _, _],
    [_, O, O, _, _, _],
    [X, X, X, _, O, _],
]
s = from_board("connect_four", board, to_move=X)
print(state_to_text(s))
print("legal columns:", s.legal_moves())

# %% [markdown]
# Column 3 completes the bottom row.  Each search gets 100 simulations.

# %%
net = NetworkEvaluator(init_params("connect_four", seed=0))
for kind in Kind:
    for m in (10, 100):
        mcts = MCTS(SearchConfig(m=m, kind=kind, weight=0.5), net, random.Random(1))
        pi = mcts.policy(s)
        root = mcts.tree[s.key]
        print(f"{kind.value:9s} m={m:3d}  argmax={int(np.argmax(pi))}  pi={np.round(pi, 2)}  visits={int(root.n.sum())}")

# %% [markdown]
# The root visit counts always add up to the budget, and the policy is
# the normalised visit distribution over legal columns only.
