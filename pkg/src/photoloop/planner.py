"""Monte Carlo tree search over edit-action sequences.

Each simulation runs selection (UCT), lazy expansion of one untried
action, a random rollout, and backpropagation of the reward of the state
the rollout ends in. The search runs on a reduced-resolution copy of the
root image. ``depth`` bounds the whole trajectory measured from the root:
tree edges plus rollout steps never exceed it, so ``depth=1`` scores each
root action by its immediate outcome (greedy selection).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import EditAction, ImageState, PixelImage, Scale, downscale

log = logging.getLogger(__name__)

Proposer = Callable[[ImageState], Sequence[EditAction]]
SimApply = Callable[[EditAction, PixelImage], PixelImage]
Reward = Callable[[PixelImage], float]


class NoActionsProposed(Exception):
    pass


@dataclass
class PlannerConfig:
    budget: int = 20
    depth: int = 3
    top_k: int = 3
    uct_c: float = math.sqrt(2.0)
    sim_scale: Scale = Scale.HALF
    rng_seed: int = 0

    def __post_init__(self):
        self.sim_scale = Scale.parse(self.sim_scale)
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.top_k < 1 or self.top_k > self.budget:
            raise ValueError("top_k must satisfy 1 <= top_k <= budget")
        if not self.uct_c > 0:
            raise ValueError("uct_c must be positive")


@dataclass(eq=False)
class SearchNode:
    state: ImageState
    incoming_action: Optional[EditAction] = None
    depth: int = 0
    visits: int = 0
    mean_reward: float = 0.0
    children: list["SearchNode"] = field(default_factory=list)
    untried: Optional[list[EditAction]] = None  # None until the perceiver has been asked
    terminal: bool = False

    @property
    def fully_expanded(self) -> bool:
        return self.untried is not None and not self.untried

    def populate(self, proposer: Proposer) -> None:
        if self.untried is None:
            self.untried = list(proposer(self.state))
            if not self.untried and not self.children:
                self.terminal = True

    def uct_value(self, parent_visits: int, c: float) -> float:
        return self.mean_reward + c * math.sqrt(math.log(parent_visits) / self.visits)

    def __repr__(self) -> str:
        aid = self.incoming_action.id if self.incoming_action else "root"
        return f"SearchNode({aid}, depth={self.depth}, N={self.visits}, Q={self.mean_reward:.4f})"


@dataclass(frozen=True)
class RankedAction:
    action: EditAction
    visits: int
    mean_reward: float


def select_uct(node: SearchNode, c: float, rng: np.random.Generator) -> SearchNode:
    """argmax of Q + c * sqrt(ln N / n) over children; exact ties broken at random."""
    if not node.children:
        raise ValueError("select_uct on a node without children")
    if any(ch.visits == 0 for ch in node.children):
        raise ValueError("select_uct requires every child to have been visited")
    values = np.array([ch.uct_value(node.visits, c) for ch in node.children])
    best = np.flatnonzero(values >= values.max() - 1e-12)
    return node.children[int(best[0] if best.size == 1 else rng.choice(best))]


def expand(node: SearchNode, proposer: Proposer, sim_apply: SimApply) -> Optional[SearchNode]:
    """Pop untried actions in proposal order until one applies; attach and return its child."""
    node.populate(proposer)
    while node.untried:
        action = node.untried.pop(0)
        try:
            image = sim_apply(action, node.state.image)
        except Exception as exc:  # executor failures only discard the action
            log.debug("simulation of %s failed: %s", action.id, exc)
            continue
        child = SearchNode(node.state.advance(action, image), action, node.depth + 1)
        node.children.append(child)
        return child
    if not node.children:
        node.terminal = True
    return None


def rollout(
    start: SearchNode | ImageState,
    d: int,
    proposer: Proposer,
    sim_apply: SimApply,
    rng: np.random.Generator,
    trace: Optional[list[str]] = None,
) -> ImageState:
    """Apply up to ``d`` uniformly random fresh proposals; stop early at terminal states."""
    state = start.state if isinstance(start, SearchNode) else start
    for _ in range(d):
        actions = list(proposer(state))
        if not actions:
            break
        action = actions[int(rng.integers(len(actions)))]
        try:
            image = sim_apply(action, state.image)
        except Exception as exc:
            log.debug("rollout stopped: %s failed: %s", action.id, exc)
            break
        state = state.advance(action, image)
        if trace is not None:
            trace.append(action.id)
    return state


def backpropagate(path: Sequence[SearchNode], reward: float) -> None:
    for node in path:
        node.visits += 1
        node.mean_reward += (reward - node.mean_reward) / node.visits


def rank_children(root: SearchNode) -> list[RankedAction]:
    ordered = sorted(root.children, key=lambda ch: (-ch.visits, -ch.mean_reward, ch.incoming_action.id))
    return [RankedAction(ch.incoming_action, ch.visits, ch.mean_reward) for ch in ordered]


class MCTSPlanner:
    """One search tree per :meth:`search` call; collaborators are plain callables."""

    def __init__(self, cfg: PlannerConfig, proposer: Proposer, sim_apply: SimApply, reward: Reward):
        self.cfg = cfg
        self.proposer = proposer
        self.sim_apply = sim_apply
        self.reward = reward
        self.rng = np.random.default_rng(cfg.rng_seed)
        self.root: Optional[SearchNode] = None
        self.simulations = 0

    def simulate_once(self, root: SearchNode) -> None:
        cfg = self.cfg
        node, path = root, [root]
        while not node.terminal and node.depth < cfg.depth:
            node.populate(self.proposer)
            if node.terminal:
                break
            if node.untried:
                child = expand(node, self.proposer, self.sim_apply)
                if child is not None:
                    node = child
                    path.append(child)
                    break
                if node.terminal:
                    break
            node = select_uct(node, cfg.uct_c, self.rng)
            path.append(node)
        final = node.state
        remaining = cfg.depth - node.depth
        if remaining > 0 and not node.terminal:
            final = rollout(node, remaining, self.proposer, self.sim_apply, self.rng)
        backpropagate(path, float(self.reward(final.image)))
        self.simulations += 1

    def search(self, root_state: ImageState, root_actions: Optional[Sequence[EditAction]] = None) -> list[RankedAction]:
        sim_root = ImageState(downscale(root_state.image, self.cfg.sim_scale), root_state.step, root_state.history)
        root = SearchNode(sim_root)
        if root_actions is not None:
            root.untried = list(root_actions)
        root.populate(self.proposer)
        self.root = root
        if root.terminal:
            return []
        for _ in range(self.cfg.budget):
            self.simulate_once(root)
            if root.terminal:
                break
        return rank_children(root)[: self.cfg.top_k]


def plan(
    root: ImageState,
    cfg: PlannerConfig,
    perceiver: Proposer,
    sim_executor: SimApply,
    evaluator: Reward,
    root_actions: Optional[Sequence[EditAction]] = None,
) -> list[RankedAction]:
    """Run ``cfg.budget`` simulations and return root actions ranked by visits, Q, then id."""
    return MCTSPlanner(cfg, perceiver, sim_executor, evaluator).search(root, root_actions)
