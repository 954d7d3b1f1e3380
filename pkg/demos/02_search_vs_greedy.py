"""
Why look ahead
==============

A trap landscape rewards the first step of one branch and hides a much better
result two steps down another. Depth-1 planning takes the bait; tree search
with a horizon of 3 does not.
"""

from photoloop.analysis import budget_sweep, compare_strategies, trap_tree
from photoloop.analysis.synthetic import greedy_episode, plan_episode
from photoloop import PlannerConfig

env = trap_tree(seed=3)
print("best reachable:", env.value(), " greedy would reach:", env.greedy_value())

mcts, path = plan_episode(env, PlannerConfig(budget=200, depth=3, top_k=1, rng_seed=3))
greedy, gpath = greedy_episode(env)
print(f"tree search  {mcts:.2f}  via {path}")
print(f"greedy       {greedy:.2f}  via {gpath}")

# the same comparison run through the full loop, alongside the open-loop baselines
print(compare_strategies([trap_tree(s) for s in range(5)]).table())

# more simulations per decision help on average, even at small budgets
print(budget_sweep((5, 10, 15, 20), seeds=200).table())
