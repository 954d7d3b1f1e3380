"""Planning-strategy comparison and simulation-budget sweeps.

Four strategies share one perceiver, executor and evaluator per scenario:

* ``SingleShot``: one proposal call, every proposed action applied in order, no scoring gate.
* ``OpenLoopChain``: perceive and apply the first proposal each iteration, no scoring gate.
* ``GreedyClosedLoop``: the closed loop with a depth-1 planner and one simulation per candidate.
* ``MCTSClosedLoop``: the closed loop with the configured planner.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from ..controller import LoopConfig, run_loop
from ..core import ImageState, PixelImage
from ..evaluator import Evaluator
from ..executor import AllToolsFailed, Executor
from ..memory import EditingMemory
from ..perceiver import Perceiver, PerceiverContext
from ..planner import PlannerConfig
from .synthetic import TreeEnvironment, executed_action_value, random_tree
from .tables import format_table


class Strategy(str, enum.Enum):
    SINGLE_SHOT = "SingleShot"
    OPEN_LOOP_CHAIN = "OpenLoopChain"
    GREEDY_CLOSED_LOOP = "GreedyClosedLoop"
    MCTS_CLOSED_LOOP = "MCTSClosedLoop"


ALL_STRATEGIES = tuple(Strategy)


@dataclass
class Scenario:
    """An input image with the collaborators every strategy will share."""

    name: str
    image: PixelImage
    perceiver: Any
    executor: Any
    evaluator: Any

    @classmethod
    def from_image(cls, name: str, image: PixelImage, cfg: Optional[LoopConfig] = None) -> "Scenario":
        cfg = cfg or LoopConfig()
        evaluator = Evaluator(cfg.scorer)
        return cls(name, image, Perceiver(), Executor(cfg.routing, evaluator=evaluator.score), evaluator)

    @classmethod
    def from_env(cls, env: TreeEnvironment) -> "Scenario":
        return cls(env.name, env.root_image(), env.perceiver(), env.executor(), env.evaluator())


@dataclass
class Outcome:
    initial: float
    final: float
    steps: int

    @property
    def gain(self) -> float:
        return self.final - self.initial


@dataclass
class StrategyReport:
    strategies: tuple[Strategy, ...]
    outcomes: dict[str, dict[Strategy, Outcome]] = field(default_factory=dict)

    def mean_final(self, s: Strategy) -> float:
        return float(np.mean([o[s].final for o in self.outcomes.values()]))

    def never_worse(self, s: Strategy) -> bool:
        return all(o[s].final >= o[s].initial for o in self.outcomes.values())

    def to_json(self) -> dict:
        return {
            "strategies": [s.value for s in self.strategies],
            "scenarios": {
                name: {s.value: {"initial": o.initial, "final": o.final, "steps": o.steps} for s, o in row.items()}
                for name, row in self.outcomes.items()
            },
            "mean_final": {s.value: self.mean_final(s) for s in self.strategies},
        }

    def table(self) -> str:
        rows = [
            (s.value, self.mean_final(s), float(np.mean([o[s].gain for o in self.outcomes.values()])),
             "yes" if self.never_worse(s) else "no")
            for s in self.strategies
        ]
        return format_table(("Strategy", "Mean final", "Mean gain", "Never worse"), rows, "Strategy comparison")


def _context(sc: Scenario, state: ImageState, memory: EditingMemory, cfg: LoopConfig, prompt) -> PerceiverContext:
    return PerceiverContext(sc.perceiver.classify_scene(state), memory, prompt, cfg.num_proposals)


def single_shot(sc: Scenario, cfg: LoopConfig, prompt: Optional[str] = None) -> ImageState:
    state = ImageState(sc.image)
    actions = sc.perceiver.propose(state, _context(sc, state, EditingMemory(), cfg, prompt))
    for a in actions:
        try:
            state = state.advance(a, sc.executor.execute(a, state.image))
        except AllToolsFailed:
            continue
    return state


def open_loop_chain(sc: Scenario, cfg: LoopConfig, prompt: Optional[str] = None) -> ImageState:
    state = ImageState(sc.image)
    for _ in range(cfg.max_iterations):
        actions = sc.perceiver.propose(state, _context(sc, state, EditingMemory(), cfg, prompt))
        if not actions:
            break
        try:
            state = state.advance(actions[0], sc.executor.execute(actions[0], state.image))
        except AllToolsFailed:
            break
    return state


def greedy_loop_config(cfg: LoopConfig, top_k: int = 1) -> LoopConfig:
    # budget = one simulation per candidate; the root never offers more than num_proposals
    planner = replace(cfg.planner, depth=1, budget=max(cfg.num_proposals, top_k), top_k=top_k)
    return replace(cfg, planner=planner)


def compare_strategies(
    scenarios: Iterable[Scenario | TreeEnvironment],
    strategies: Sequence[Strategy | str] = ALL_STRATEGIES,
    cfg: Optional[LoopConfig] = None,
    top_k: int = 1,
    user_prompt: Optional[str] = None,
) -> StrategyReport:
    """Final aggregates per strategy per scenario.

    ``top_k`` overrides the planner's top-K for both closed-loop strategies.
    With K > 1 the full-resolution re-scoring step picks the best immediate
    outcome among the K planned actions, which hands the decision back to a
    one-step criterion; K = 1 executes what the planner actually ranked first.
    """
    cfg = cfg or LoopConfig()
    strategies = tuple(Strategy(s) for s in strategies)
    mcts_cfg = replace(cfg, planner=replace(cfg.planner, top_k=top_k))
    greedy_cfg = greedy_loop_config(cfg, top_k)
    report = StrategyReport(strategies)
    for sc in scenarios:
        if isinstance(sc, TreeEnvironment):
            sc = Scenario.from_env(sc)
        initial = sc.evaluator.score(sc.image)
        row: dict[Strategy, Outcome] = {}
        for s in strategies:
            if s is Strategy.SINGLE_SHOT:
                st = single_shot(sc, cfg, user_prompt)
                row[s] = Outcome(initial, sc.evaluator.score(st.image), st.step)
            elif s is Strategy.OPEN_LOOP_CHAIN:
                st = open_loop_chain(sc, cfg, user_prompt)
                row[s] = Outcome(initial, sc.evaluator.score(st.image), st.step)
            else:
                lcfg = greedy_cfg if s is Strategy.GREEDY_CLOSED_LOOP else mcts_cfg
                t = run_loop(sc.image, lcfg, user_prompt, perceiver=sc.perceiver, executor=sc.executor, evaluator=sc.evaluator)
                row[s] = Outcome(initial, t.reports[-1].aggregate, t.final.step)
        report.outcomes[sc.name] = row
    return report


@dataclass
class BudgetSweep:
    budgets: tuple[int, ...]
    means: dict[int, float]
    seeds: int

    @property
    def monotone(self) -> bool:
        vals = [self.means[b] for b in self.budgets]
        return all(a <= b for a, b in zip(vals, vals[1:]))

    def to_json(self) -> dict:
        return {"seeds": self.seeds, "mean_reward": {str(b): self.means[b] for b in self.budgets}, "monotone": self.monotone}

    def table(self) -> str:
        return format_table(("Budget", "Mean reward"), [(b, self.means[b]) for b in self.budgets], "Simulation budget sweep")


def budget_sweep(
    budgets: Sequence[int] = (5, 10, 15, 20), seeds: int = 200, depth: int = 3, first_seed: int = 0
) -> BudgetSweep:
    """Mean exhaustive value of the top-ranked root action on seeded random trees, per budget."""
    means = {}
    for b in budgets:
        vals = [
            executed_action_value(random_tree(s, horizon=depth), PlannerConfig(budget=b, depth=depth, top_k=1, rng_seed=s))
            for s in range(first_seed, first_seed + seeds)
        ]
        means[b] = float(np.mean(vals))
    return BudgetSweep(tuple(budgets), means, seeds)
