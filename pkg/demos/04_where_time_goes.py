"""
Where the time goes
===================

Per-component wall-clock for one loop run. Simulated executions and scores
inside the planner are broken out under it.
"""

from photoloop import LoopConfig, PlannerConfig, run_loop
from photoloop.analysis import profile, synthetic_photo

traj = run_loop(synthetic_photo(seed=1, height=192, width=256),
                LoopConfig(planner=PlannerConfig(budget=20, depth=3, top_k=3)))
print(profile(traj).table())

# the planner's own remainder is action proposal at each new node plus tree bookkeeping
