"""
Editing one photo in a closed loop
==================================

Plan a few candidate edits with tree search, apply the best ones at full
resolution, keep an edit only when the score improves.
"""

import tempfile

from photoloop import LoopConfig, PlannerConfig, run_loop
from photoloop.analysis import synthetic_photo

# a low-scoring synthetic scene stands in for a real photo
photo = synthetic_photo(seed=5)
print(photo)

cfg = LoopConfig(max_iterations=3, planner=PlannerConfig(budget=12, depth=2, top_k=3, rng_seed=0))
traj = run_loop(photo, cfg, user_prompt="warmer mood")

# each accepted state scores strictly higher than the one before it
for state, report in zip(traj.states, traj.reports):
    step = state.history[-1] if state.history else "(input)"
    print(f"{step:<28} {report.aggregate:.4f}")
print("stopped:", traj.termination_reason.value)

# what was tried each round, including the rejected candidates
for rec in traj.iterations:
    tried = ", ".join(f"{c.action.id}={c.report.aggregate:.3f}" for c in rec.candidates if c.report)
    print(f"round {rec.iteration}: {rec.decision.value:<6} {tried}")

out = tempfile.mkdtemp(prefix="photoloop-")
traj.save(out)
print("wrote", out)
