from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable


@dataclass(frozen=True)
class TriedAction:
    action_id: str
    accepted: bool
    score_delta: float


@dataclass(frozen=True)
class Round:
    iteration: int
    actions_tried: tuple[TriedAction, ...]


@dataclass
class EditingMemory:
    """Per-round outcomes of executed candidates, oldest first."""

    rounds: list[Round] = field(default_factory=list)
    best_score_so_far: float = float("-inf")

    def record(self, iteration: int, tried: Iterable[TriedAction], accepted_score: float | None = None) -> Round:
        if self.rounds and iteration <= self.rounds[-1].iteration:
            raise ValueError(f"iteration {iteration} is not after {self.rounds[-1].iteration}")
        rnd = Round(iteration, tuple(tried))
        self.rounds.append(rnd)
        if accepted_score is not None:
            self.best_score_so_far = max(self.best_score_so_far, accepted_score)
        return rnd

    def recently_rejected(self, window: int = 3) -> set[str]:
        if window <= 0:
            return set()
        return {t.action_id for r in self.rounds[-window:] for t in r.actions_tried if not t.accepted}

    def flat(self) -> list[dict[str, Any]]:
        """Wire form used by the external perceiver protocol."""
        return [
            {"action": t.action_id, "accepted": t.accepted, "delta": t.score_delta}
            for r in self.rounds
            for t in r.actions_tried
        ]

    def to_json(self) -> dict[str, Any]:
        return {
            "best_score_so_far": None if self.best_score_so_far == float("-inf") else self.best_score_so_far,
            "rounds": [
                {
                    "iteration": r.iteration,
                    "actions_tried": [
                        {"action_id": t.action_id, "accepted": t.accepted, "score_delta": t.score_delta}
                        for t in r.actions_tried
                    ],
                }
                for r in self.rounds
            ],
        }
