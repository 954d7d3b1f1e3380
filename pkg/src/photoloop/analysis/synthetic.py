"""Deterministic decision-tree environments for planner and loop benchmarks.

The action path taken so far is written into the image itself: slot ``i``
is a constant ``BLOCK x BLOCK`` patch whose value encodes the ``i``-th
action index. Box downscaling by 2 or 4 leaves the slot values intact, so
these environments exercise the real planner, controller and evaluator
code paths, including reduced-resolution simulation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..core import Category, EditAction, GenerativeInstruction, ImageState, PixelImage
from ..evaluator import Evaluator, ScorerConfig, ScorerEntry
from ..executor import AllToolsFailed
from ..perceiver import PerceiverContext, Scene
from ..planner import PlannerConfig, plan

BLOCK = 4
MAX_ACTIONS = 8

Path = tuple[int, ...]


def branch_action(i: int) -> EditAction:
    return EditAction(f"a{i}", Category.GLOBAL_TONE, f"take branch {i}", GenerativeInstruction(f"branch {i}"))


@dataclass
class TreeEnvironment:
    """A finite tree of action paths with a deterministic reward per node."""

    branching: dict[Path, int]
    rewards: dict[Path, float]
    horizon: int
    name: str = "tree"
    calls: dict[str, int] = field(default_factory=lambda: {"propose": 0, "apply": 0, "reward": 0})

    # -- image encoding ------------------------------------------------------
    def encode(self, path: Path) -> PixelImage:
        px = np.zeros((BLOCK, BLOCK * self.horizon, 3))
        for i, a in enumerate(path):
            px[:, i * BLOCK:(i + 1) * BLOCK, :] = (a + 1) / (MAX_ACTIONS + 1)
        return PixelImage(px)

    def decode(self, image: PixelImage) -> Path:
        w = image.width
        out = []
        for i in range(self.horizon):
            lo, hi = i * w // self.horizon, (i + 1) * w // self.horizon
            v = float(image.pixels[:, lo:max(hi, lo + 1), 0].mean())
            a = int(round(v * (MAX_ACTIONS + 1))) - 1
            if a < 0:
                break
            out.append(a)
        return tuple(out)

    def root_image(self) -> PixelImage:
        return self.encode(())

    def root_state(self) -> ImageState:
        return ImageState(self.root_image())

    # -- collaborators -------------------------------------------------------
    def n_children(self, path: Path) -> int:
        if len(path) >= self.horizon:
            return 0
        return self.branching.get(path, 0)

    def proposer(self, state: ImageState) -> list[EditAction]:
        self.calls["propose"] += 1
        return [branch_action(i) for i in range(self.n_children(self.decode(state.image)))]

    def apply(self, action: EditAction, image: PixelImage) -> PixelImage:
        self.calls["apply"] += 1
        path = self.decode(image)
        idx = int(action.id[1:])
        if idx >= self.n_children(path):
            raise ValueError(f"action {action.id} not available at {path}")
        return self.encode(path + (idx,))

    def reward(self, image: PixelImage) -> float:
        self.calls["reward"] += 1
        return self.rewards[self.decode(image)]

    # -- oracles ---------------------------------------------------------------
    def value(self, path: Path = ()) -> float:
        """Best terminal reward reachable from ``path`` (exhaustive)."""
        n = self.n_children(path)
        if n == 0:
            return self.rewards[path]
        return max(self.value(path + (i,)) for i in range(n))

    def optimal_root_actions(self) -> set[str]:
        vals = [self.value((i,)) for i in range(self.n_children(()))]
        best = max(vals)
        return {f"a{i}" for i, v in enumerate(vals) if v == best}

    def greedy_value(self, path: Path = ()) -> float:
        """Terminal reward reached by always taking the best immediate reward (ties: lowest index)."""
        while self.n_children(path):
            n = self.n_children(path)
            path = path + (max(range(n), key=lambda i: (self.rewards[path + (i,)], -i)),)
        return self.rewards[path]

    def trajectories(self):
        """All root-to-terminal paths."""
        stack: list[Path] = [()]
        while stack:
            p = stack.pop()
            n = self.n_children(p)
            if n == 0:
                yield p
            else:
                stack.extend(p + (i,) for i in range(n))

    def has_trap(self) -> bool:
        return self.greedy_value() < self.value()

    # -- adapters for the controller ----------------------------------------------
    def scorer_config(self) -> ScorerConfig:
        return ScorerConfig((ScorerEntry("env_reward", 1.0, fn=self.reward),))

    def evaluator(self) -> Evaluator:
        return Evaluator(self.scorer_config())

    def perceiver(self) -> "EnvPerceiver":
        return EnvPerceiver(self)

    def executor(self) -> "EnvExecutor":
        return EnvExecutor(self)


class EnvPerceiver:
    def __init__(self, env: TreeEnvironment):
        self.env = env

    def classify_scene(self, state) -> Scene:
        return Scene.UNKNOWN

    def propose(self, state: ImageState, ctx: PerceiverContext) -> list[EditAction]:
        return self.env.proposer(state)


class EnvExecutor:
    def __init__(self, env: TreeEnvironment):
        self.env = env

    def execute(self, action: EditAction, image: PixelImage) -> PixelImage:
        try:
            return self.env.apply(action, image)
        except ValueError as exc:
            raise AllToolsFailed(str(exc)) from exc

    simulate = execute


# -- generators ------------------------------------------------------------------

def random_tree(seed: int, horizon: int = 3, max_branching: int = 4) -> TreeEnvironment:
    """Random tree: 2..max children at the root, 1..max below; rewards on a 0.01 grid."""
    rng = np.random.default_rng(seed)
    branching: dict[Path, int] = {}
    rewards: dict[Path, float] = {(): round(float(rng.uniform(0.2, 0.5)), 2)}
    frontier: list[Path] = [()]
    while frontier:
        p = frontier.pop(0)
        if len(p) >= horizon:
            continue
        n = int(rng.integers(2, max_branching + 1)) if not p else int(rng.integers(1, max_branching + 1))
        branching[p] = n
        for i in range(n):
            rewards[p + (i,)] = round(float(rng.uniform(0.0, 1.0)), 2)
            frontier.append(p + (i,))
    return TreeEnvironment(branching, rewards, horizon, name=f"random-{seed}")


def trap_tree(seed: int, trap: bool = True, horizon: int = 3) -> TreeEnvironment:
    """Root choice between a myopically attractive branch and a dip.

    a0 always has the best immediate reward (0.6) and a1 starts lower (0.4).
    With ``trap=True`` a0 leads nowhere better than 0.6 while one path under
    a1 reaches 0.95 at the horizon. With ``trap=False`` that 0.95 path sits
    under a0 instead, so the greedy choice is also optimal. Distractor
    branches stay below both.
    """
    rng = np.random.default_rng(seed)
    n_root = int(rng.integers(2, 5))
    branching: dict[Path, int] = {(): n_root}
    rewards: dict[Path, float] = {(): 0.3}
    lure, deep = 0, 1
    rewards[(lure,)] = 0.6
    rewards[(deep,)] = 0.4
    for i in range(2, n_root):
        rewards[(i,)] = round(float(rng.uniform(0.2, 0.5)), 2)
    good = tuple([deep if trap else lure] + [int(rng.integers(0, 2)) for _ in range(horizon - 1)])
    frontier = [(i,) for i in range(n_root)]
    while frontier:
        p = frontier.pop(0)
        if len(p) >= horizon:
            continue
        n = int(rng.integers(2, 4))
        branching[p] = n
        for i in range(n):
            c = p + (i,)
            if c == good[: len(c)]:
                rewards[c] = 0.95 if len(c) == horizon else 0.65
            elif c[0] == lure:
                rewards[c] = round(float(rng.uniform(0.3, 0.6)), 2)
            else:
                rewards[c] = round(float(rng.uniform(0.0, 0.5)), 2)
            frontier.append(c)
    return TreeEnvironment(branching, rewards, horizon, name=f"trap-{seed}" if trap else f"plain-{seed}")


def scripted_gain_tree(steps: int = 3, gain: float = 0.1, start: float = 0.5, n_actions: int = 3) -> TreeEnvironment:
    """Action a0 adds ``gain`` at every step; the others cost ``gain``."""
    branching: dict[Path, int] = {}
    rewards: dict[Path, float] = {(): start}
    for depth in range(steps):
        for p in itertools.product(range(n_actions), repeat=depth):
            branching[p] = n_actions
            for i in range(n_actions):
                rewards[p + (i,)] = round(rewards[p] + (gain if i == 0 else -gain), 10)
    return TreeEnvironment(branching, rewards, steps, name="scripted-gain")


def harmful_first_tree(steps: int = 3, start: float = 0.5) -> TreeEnvironment:
    """The first proposal always lowers the reward; a later one raises it slightly."""
    branching: dict[Path, int] = {}
    rewards: dict[Path, float] = {(): start}
    for depth in range(steps):
        for p in itertools.product(range(2), repeat=depth):
            branching[p] = 2
            rewards[p + (0,)] = round(rewards[p] - 0.15, 10)
            rewards[p + (1,)] = round(rewards[p] + 0.05, 10)
    return TreeEnvironment(branching, rewards, steps, name="harmful-first")


# -- planning episodes -----------------------------------------------------------------

def plan_episode(env: TreeEnvironment, cfg: PlannerConfig) -> tuple[float, list[str]]:
    """Plan, execute the top-1 action, replan from the result; return the final reward and path."""
    state = env.root_state()
    taken: list[str] = []
    while True:
        ranked = plan(state, cfg, env.proposer, env.apply, env.reward)
        if not ranked:
            break
        action = ranked[0].action
        state = state.advance(action, env.apply(action, state.image))
        taken.append(action.id)
    return env.rewards[env.decode(state.image)], taken


def greedy_config(env: TreeEnvironment, path: Path = (), seed: int = 0) -> PlannerConfig:
    n = max(1, env.n_children(path))
    return PlannerConfig(budget=max(n, 1), depth=1, top_k=1, rng_seed=seed)


def greedy_episode(env: TreeEnvironment, seed: int = 0) -> tuple[float, list[str]]:
    """Depth-1 planning with one simulation per candidate, replanning each step."""
    state = env.root_state()
    taken: list[str] = []
    while True:
        path = env.decode(state.image)
        if not env.n_children(path):
            break
        ranked = plan(state, greedy_config(env, path, seed), env.proposer, env.apply, env.reward)
        action = ranked[0].action
        state = state.advance(action, env.apply(action, state.image))
        taken.append(action.id)
    return env.rewards[env.decode(state.image)], taken


def executed_action_value(env: TreeEnvironment, cfg: PlannerConfig) -> Optional[float]:
    """Exhaustive value of the planner's top-1 root action."""
    ranked = plan(env.root_state(), cfg, env.proposer, env.apply, env.reward)
    if not ranked:
        return None
    return env.value((int(ranked[0].action.id[1:]),))
