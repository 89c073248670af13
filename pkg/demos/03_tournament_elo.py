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
# # Round robin and Elo
#
# Five search players on Connect Four that differ only in their simulation
# budget.  Each pair plays a short match with colours alternating, and a
# Bradley-Terry fit turns the results into Elo ratings centred on zero.

# %%
from azwarm.evaluation import AgentSpec, fit_elo, round_robin
from azwarm.search import Kind

# %%
players = [AgentSpec(f"rollout_m{m}", Kind.ROLLOUT, m=m) for m in (2, 8, 32)]
players.append(AgentSpec("baseline_m32", Kind.BASELINE, m=32))
results = round_robin(players, games_per_pair=10, seed=0, game="connect_four")
for r in results:
    print(f"{r.player_a:>13s} vs {r.player_b:<13s} {r.wins_a}-{r.wins_b} ({r.draws} draws)")

# %%
table = fit_elo(results)
for name, rating in sorted(table.ratings.items(), key=lambda kv: -kv[1]):
    print(f"{name:13s} {rating:+7.1f}")

# %% [markdown]
# One pseudo-draw per pair keeps the fit finite when a player wins every
# game.  Pass `pseudo_draws=False` to get the unregularised estimate.
