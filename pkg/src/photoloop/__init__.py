"""Closed-loop photo editing: perceive, plan with Monte Carlo tree search, execute, evaluate."""

from .controller import LoopConfig, TerminationReason, Trajectory, run_loop
from .core import (
    Category,
    EditAction,
    GenerativeInstruction,
    ImageState,
    Origin,
    PixelImage,
    ProceduralParams,
    Scale,
    content_hash,
    downscale,
    read_image,
    write_image,
)
from .evaluator import Decision, Evaluator, ScoreReport, ScorerConfig, ScorerEntry, compare_and_decide, evaluate
from .executor import Executor, RoutingTable, apply_procedural
from .memory import EditingMemory
from .perceiver import Perceiver, PerceiverContext, Scene
from .planner import PlannerConfig, plan

__version__ = "0.1.0"
