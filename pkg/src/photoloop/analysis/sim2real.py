"""Agreement between reduced-resolution and full-resolution candidate rankings.

For every image a fixed set of procedural candidates is scored twice: once
applied to the full image and once applied to its downscaled copy (which
is what the planner's simulation sees). Rank statistics between the two
score vectors are averaged over images.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..core import Category, EditAction, Origin, PixelImage, ProceduralParams, Scale, downscale
from ..evaluator import AllScorersFailed, Evaluator, ScorerConfig, ScorerError, default_scorer_config
from ..executor import apply_procedural
from .ranks import kendall_tau, retained, spearman

log = logging.getLogger(__name__)

# operator -> parameter sampling ranges, kept inside the declared operator ranges
CANDIDATE_SPACE: dict[str, dict[str, tuple[float, float]]] = {
    "brightness": {"delta": (-0.2, 0.2)},
    "contrast": {"factor": (0.6, 1.8)},
    "saturation": {"factor": (0.4, 2.0)},
    "gamma": {"exponent": (0.6, 1.6)},
    "tone_curve": {"shadows": (-0.2, 0.2), "highlights": (-0.2, 0.2)},
    "white_balance": {"r_gain": (0.8, 1.25), "g_gain": (0.9, 1.1), "b_gain": (0.8, 1.25)},
    "unsharp_sharpen": {"amount": (0.0, 1.5)},
    "vignette": {"strength": (0.0, 0.6)},
    "hue_shift": {"degrees": (-40.0, 40.0)},
}


def candidate_actions(n: int, seed: int) -> list[EditAction]:
    """``n`` seeded procedural edits with distinct operators where possible."""
    rng = np.random.default_rng(seed)
    names = list(CANDIDATE_SPACE)
    order = [names[i] for i in rng.permutation(len(names))]
    out = []
    for i in range(n):
        op = order[i % len(order)]
        params = {p: round(float(rng.uniform(lo, hi)), 4) for p, (lo, hi) in CANDIDATE_SPACE[op].items()}
        out.append(
            EditAction(f"c{i}_{op}", Category.GLOBAL_TONE, f"{op} {params}", ProceduralParams.of(op, **params), Origin.HEURISTIC)
        )
    return out


@dataclass
class ImageTrial:
    index: int
    full: list[float]
    low: list[float]
    spearman: float
    kendall_tau: float
    top1: bool
    top3: bool


@dataclass
class RankConsistencyReport:
    scale: Scale
    spearman: float
    kendall_tau: float
    top1_retention: float
    top3_retention: float
    n: int
    candidates: int
    failed: list[int] = field(default_factory=list)
    trials: list[ImageTrial] = field(default_factory=list, repr=False)

    def to_json(self, with_trials: bool = False) -> dict:
        out = {
            "scale": self.scale.label,
            "spearman": self.spearman,
            "kendall_tau": self.kendall_tau,
            "top1_retention": self.top1_retention,
            "top3_retention": self.top3_retention,
            "n": self.n,
            "candidates": self.candidates,
            "failed": list(self.failed),
        }
        if with_trials:
            out["trials"] = [asdict(t) for t in self.trials]
        return out


def run_trial(
    index: int, image: PixelImage, actions: Sequence[EditAction], scale: Scale, evaluator: Evaluator
) -> ImageTrial:
    small = downscale(image, scale)
    full = [evaluator.score(apply_procedural(a.payload, None, image)) for a in actions]
    low = [evaluator.score(apply_procedural(a.payload, None, small)) for a in actions]
    return ImageTrial(
        index, full, low, spearman(low, full), kendall_tau(low, full), retained(low, full, 1), retained(low, full, 3)
    )


def sim2real_experiment(
    images: Sequence[PixelImage],
    actions_per_image: int = 10,
    scale: Scale | int | str = Scale.HALF,
    scorer: Optional[ScorerConfig] = None,
    seed: int = 0,
) -> RankConsistencyReport:
    """Mean rank agreement between ``scale`` and full-resolution scoring.

    Candidates for image ``i`` come from :func:`candidate_actions` seeded by
    ``seed + i``, so two calls that differ only in ``scale`` score the same
    edits. A scorer error drops that image from the means and lists it in
    ``failed``.
    """
    scale = Scale.parse(scale)
    if actions_per_image < 3:
        raise ValueError("need at least 3 candidates per image for top-3 retention")
    evaluator = Evaluator(scorer or default_scorer_config())
    trials, failed = [], []
    for i, image in enumerate(images):
        try:
            trials.append(run_trial(i, image, candidate_actions(actions_per_image, seed + i), scale, evaluator))
        except (ScorerError, AllScorersFailed) as exc:
            log.warning("image %d dropped: %s", i, exc)
            failed.append(i)

    def mean(xs):
        return float(np.mean(xs)) if trials else float("nan")

    return RankConsistencyReport(
        scale,
        mean([t.spearman for t in trials]),
        mean([t.kendall_tau for t in trials]),
        mean([t.top1 for t in trials]),
        mean([t.top3 for t in trials]),
        len(trials),
        actions_per_image,
        failed,
        trials,
    )
