"""The closed perceive -> plan -> execute -> evaluate loop.

Each iteration plans from the current accepted image, executes the top-K
planned actions at full resolution, keeps the best-scoring result, and
accepts it only if it beats the current score by more than ``epsilon``.
Otherwise the current image is kept. At most one action is accepted per
iteration, and the next iteration replans from whatever was accepted.
"""

from __future__ import annotations

import enum
import json
import logging
import threading
import time
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Optional

from .core import EditAction, ImageState, PixelImage, content_hash, write_image
from .evaluator import Decision, Evaluator, ScoreReport, ScorerConfig, compare_and_decide, default_scorer_config
from .executor import AllToolsFailed, Executor, RoutingTable
from .memory import EditingMemory, TriedAction
from .perceiver import Perceiver, PerceiverContext, Scene
from .planner import PlannerConfig, RankedAction, plan

log = logging.getLogger(__name__)

COMPONENTS = ("perceiver", "planner", "planner_executor", "planner_evaluator", "executor", "evaluator")


class TerminationReason(str, enum.Enum):
    MAX_ITERATIONS = "MaxIterations"
    NO_IMPROVEMENT = "NoImprovement"
    FIXPOINT = "Fixpoint"
    NO_ACTIONS = "NoActions"


@dataclass
class LoopConfig:
    max_iterations: int = 3
    patience: int = 2
    epsilon: float = 0.0
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    scorer: ScorerConfig = field(default_factory=default_scorer_config)
    routing: RoutingTable = field(default_factory=RoutingTable)
    num_proposals: int = 5
    quality_ceiling: float = 0.95

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 1 <= self.patience <= self.max_iterations:
            raise ValueError("patience must satisfy 1 <= patience <= max_iterations")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.num_proposals < 1:
            raise ValueError("num_proposals must be >= 1")


class ComponentTimer:
    """Accumulates wall-clock seconds per component; thread-safe."""

    def __init__(self):
        self.totals: dict[str, float] = defaultdict(float)
        self._lock = threading.Lock()

    @contextmanager
    def __call__(self, component: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            dt = time.perf_counter() - t0
            with self._lock:
                self.totals[component] += dt

    def wrap(self, component: str, fn: Callable) -> Callable:
        def timed(*args, **kwargs):
            with self(component):
                return fn(*args, **kwargs)
        return timed

    def snapshot(self) -> dict[str, float]:
        return {c: self.totals.get(c, 0.0) for c in COMPONENTS}


@dataclass
class Candidate:
    action: EditAction
    report: Optional[ScoreReport] = None
    image: Optional[PixelImage] = field(default=None, repr=False)
    error: Optional[str] = None

    def to_json(self, baseline: float) -> dict[str, Any]:
        out: dict[str, Any] = {"action": self.action.to_json()}
        if self.report is not None:
            out["aggregate"] = self.report.aggregate
            out["delta"] = self.report.aggregate - baseline
            out["digest"] = f"{self.report.image_digest:016x}"
        if self.error:
            out["error"] = self.error
        return out


@dataclass
class IterationRecord:
    iteration: int
    scene: Scene
    root_digest: int
    baseline: float
    planned: list[RankedAction]
    candidates: list[Candidate]
    decision: Optional[Decision] = None
    chosen: Optional[str] = None

    def to_json(self) -> dict[str, Any]:
        return {
            "iteration": self.iteration,
            "scene": self.scene.value,
            "root_digest": f"{self.root_digest:016x}",
            "baseline_aggregate": self.baseline,
            "planned": [
                {"action_id": r.action.id, "visits": r.visits, "mean_reward": r.mean_reward} for r in self.planned
            ],
            "candidates": [c.to_json(self.baseline) for c in self.candidates],
            "decision": self.decision.value if self.decision else None,
            "chosen": self.chosen,
        }


@dataclass
class Trajectory:
    states: list[ImageState]
    reports: list[ScoreReport]
    termination_reason: TerminationReason
    timings: dict[str, float]
    iterations: list[IterationRecord] = field(default_factory=list)
    memory: EditingMemory = field(default_factory=EditingMemory)
    user_prompt: Optional[str] = None

    @property
    def final(self) -> ImageState:
        return self.states[-1]

    @property
    def aggregates(self) -> list[float]:
        return [r.aggregate for r in self.reports]

    def to_json(self) -> dict[str, Any]:
        return {
            "user_prompt": self.user_prompt,
            "termination_reason": self.termination_reason.value,
            "initial_aggregate": self.reports[0].aggregate,
            "final_aggregate": self.reports[-1].aggregate,
            "states": [s.to_json() for s in self.states],
            "iterations": [it.to_json() for it in self.iterations],
            "memory": self.memory.to_json(),
            "timings": dict(self.timings),
        }

    def save(self, out_dir, report_name: str = "trajectory.json") -> Path:
        """Write ``state_<i>.png`` per accepted state, ``final.png`` and the JSON report."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i, state in enumerate(self.states):
            write_image(state.image, out / f"state_{i}.png")
        write_image(self.final.image, out / "final.png")
        path = out / report_name
        path.write_text(json.dumps(self.to_json(), indent=2))
        return path


def run_loop(
    image: PixelImage,
    cfg: Optional[LoopConfig] = None,
    user_prompt: Optional[str] = None,
    *,
    perceiver=None,
    executor=None,
    evaluator=None,
    timer: Optional[ComponentTimer] = None,
) -> Trajectory:
    """Edit ``image`` until a termination condition fires.

    ``perceiver`` needs ``classify_scene(state)`` and ``propose(state, ctx)``;
    ``executor`` needs ``execute(action, image)`` and ``simulate(action, image)``;
    ``evaluator`` needs ``evaluate(image) -> ScoreReport`` and ``score(image)``.
    """
    cfg = cfg or LoopConfig()
    timer = timer or ComponentTimer()
    evaluator = evaluator or Evaluator(cfg.scorer)
    perceiver = perceiver or Perceiver()
    executor = executor or Executor(cfg.routing, evaluator=evaluator.score)

    with timer("evaluator"):
        report = evaluator.evaluate(image)
    state = ImageState(image, 0, (), report)
    states, reports = [state], [report]
    memory = EditingMemory(best_score_so_far=report.aggregate)
    records: list[IterationRecord] = []

    limit = 1 if report.aggregate > cfg.quality_ceiling else cfg.max_iterations
    reason = TerminationReason.MAX_ITERATIONS
    stale = 0

    sim_apply = timer.wrap("planner_executor", executor.simulate)
    sim_reward = timer.wrap("planner_evaluator", evaluator.score)

    for iteration in range(1, limit + 1):
        with timer("perceiver"):
            scene = perceiver.classify_scene(state)
            ctx = PerceiverContext(scene, memory, user_prompt, cfg.num_proposals)
            root_actions = perceiver.propose(state, ctx)
        if not root_actions:
            reason = TerminationReason.NO_ACTIONS
            break

        pcfg = replace(cfg.planner, rng_seed=cfg.planner.rng_seed + iteration)
        with timer("planner"):
            ranked = plan(state, pcfg, lambda s: perceiver.propose(s, ctx), sim_apply, sim_reward, root_actions)
        if not ranked:
            reason = TerminationReason.NO_ACTIONS
            break

        record = IterationRecord(iteration, scene, content_hash(state.image), report.aggregate, ranked, [])
        records.append(record)
        for r in ranked:
            cand = Candidate(r.action)
            try:
                with timer("executor"):
                    cand.image = executor.execute(r.action, state.image)
            except AllToolsFailed as exc:
                cand.error = str(exc)
            else:
                with timer("evaluator"):
                    cand.report = evaluator.evaluate(cand.image)
            record.candidates.append(cand)

        scored = [c for c in record.candidates if c.report is not None]
        current_digest = content_hash(state.image)
        best = max(scored, key=lambda c: c.report.aggregate) if scored else None
        decision = compare_and_decide(report, best.report, cfg.epsilon) if best is not None else Decision.REVERT
        unchanged = bool(scored) and all(c.report.image_digest == current_digest for c in scored)
        if decision is Decision.ACCEPT and best.report.image_digest == current_digest:
            # sub-quantum change: the visible result did not move
            decision, unchanged = Decision.REVERT, True
        record.decision = decision

        tried = []
        for c in record.candidates:
            delta = c.report.aggregate - report.aggregate if c.report is not None else 0.0
            tried.append(TriedAction(c.action.id, decision is Decision.ACCEPT and c is best, delta))

        if decision is Decision.ACCEPT:
            record.chosen = best.action.id
            state = state.advance(best.action, best.image, best.report)
            report = best.report
            states.append(state)
            reports.append(report)
            memory.record(iteration, tried, accepted_score=report.aggregate)
            stale = 0
        else:
            memory.record(iteration, tried)
            stale += 1
            if unchanged:
                reason = TerminationReason.FIXPOINT
                break
            if stale >= cfg.patience:
                reason = TerminationReason.NO_IMPROVEMENT
                break

    return Trajectory(states, reports, reason, timer.snapshot(), records, memory, user_prompt)
