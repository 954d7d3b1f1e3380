"""Per-component runtime breakdown of a loop run."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union

from ..controller import Trajectory
from .tables import format_table

TOP_LEVEL = ("perceiver", "planner", "executor", "evaluator")
PLANNER_PARTS = ("planner_executor", "planner_evaluator")

_LABELS = {
    "perceiver": "Perceiver",
    "planner": "Planner (MCTS)",
    "planner_executor": "  -> Executor (MCTS)",
    "planner_evaluator": "  -> Evaluator (MCTS)",
    "executor": "Executor",
    "evaluator": "Evaluator",
}


def _pct(part: float, whole: float) -> float:
    return 100.0 * part / whole if whole > 0 else 0.0


@dataclass(frozen=True)
class ProfileReport:
    durations: dict[str, float]

    @property
    def total(self) -> float:
        # planner sub-entries are nested inside the planner and not counted twice
        return sum(self.durations.get(c, 0.0) for c in TOP_LEVEL)

    def percent_of_total(self, component: str) -> float:
        return _pct(self.durations.get(component, 0.0), self.total)

    def percent_of_parent(self, component: str) -> float:
        if component in PLANNER_PARTS:
            return _pct(self.durations.get(component, 0.0), self.durations.get("planner", 0.0))
        return 100.0 if component == "planner" else self.percent_of_total(component)

    def to_json(self) -> dict:
        rows = {}
        for c in TOP_LEVEL[:2] + PLANNER_PARTS + TOP_LEVEL[2:]:
            row = {"seconds": self.durations.get(c, 0.0), "percent_total": self.percent_of_total(c)}
            if c == "planner" or c in PLANNER_PARTS:
                row["percent_parent"] = self.percent_of_parent(c)
            rows[c] = row
        return {"components": rows, "total_seconds": self.total}

    def table(self) -> str:
        rows = []
        for c in TOP_LEVEL[:2] + PLANNER_PARTS + TOP_LEVEL[2:]:
            pct = f"{self.percent_of_total(c):.1f}%"
            if c == "planner" or c in PLANNER_PARTS:
                pct += f" / {self.percent_of_parent(c):.1f}%"
            rows.append((_LABELS[c], f"{self.durations.get(c, 0.0):.3f}", pct))
        rows.append(("Total", f"{self.total:.3f}", "100%" if self.total > 0 else "0%"))
        return format_table(("Component", "Time (s)", "Percentage (total/parent)"), rows, "Runtime breakdown")


def profile(run: Union[Trajectory, Mapping[str, float]]) -> ProfileReport:
    """Breakdown from a trajectory's timings (or a raw component -> seconds map)."""
    timings = run.timings if isinstance(run, Trajectory) else run
    return ProfileReport({c: float(timings.get(c, 0.0)) for c in TOP_LEVEL + PLANNER_PARTS})
