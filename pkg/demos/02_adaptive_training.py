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
# # Warm start with an adaptive switch
#
# A small training run on Connect Four.  Self-play starts with the WRoRa
# search (network value blended with a rollout, weight 1/i in iteration i)
# and switches to plain network search once the network starts beating the
# enhanced search in mixed games.  Settings are shrunk so that this runs in
# about a minute; the defaults are much larger.

# %%
import tempfile
from pathlib import Path

from azwarm.config import RunConfig
from azwarm.runs import read_logs, run_training

# %%
cfg = RunConfig(
    game="connect_four", mode="adaptive", kind="wrora", I=4, seed=3,
    E=8, m=20, n=8, ep=2, channels=8, hidden=32, T_prime=6,
)
run_dir = Path(tempfile.mkdtemp()) / "adaptive"
run_training(cfg, run_dir)

# %%
for e in read_logs(run_dir / "log" / "iterations.csv"):
    print(
        f"iter {e.iteration}: {e.kind_used:8s} weight={e.weight:.2f} "
        f"r_mcts={e.r_mcts} switched={e.switched} gate {e.gate_wins_new}-{e.gate_wins_old} "
        f"accepted={e.accepted} loss={e.train_loss:.3f}"
    )

# %% [markdown]
# `r_mcts` counts wins minus losses of the plain network search against the
# enhanced search in that iteration's mixed games.  The switch fires the
# first time it is positive, and every later iteration uses the network
# search alone.

# %%
print(sorted(p.name for p in (run_dir / "checkpoints").iterdir()))
print((run_dir / "log" / "switch.json").read_text())
