"""Category-based tool routing with fallback and parallel keep-best execution."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

from ..core import (
    Category,
    EditAction,
    GenerativeInstruction,
    PixelImage,
    ProceduralParams,
    decode_image_base64,
    encode_png_base64,
)
from ..remote import Endpoint, ExternalError, JsonClient, MalformedResponse
from .operators import ParamOutOfRange, UnknownOperator, apply_procedural

log = logging.getLogger(__name__)

PROCEDURAL = "procedural"


class AllToolsFailed(Exception):
    pass


class SimExecutionFailed(Exception):
    pass


# Procedural stand-ins applied when a generative instruction reaches the procedural engine.
DEFAULT_PROXIES: dict[Category, ProceduralParams] = {
    Category.GLOBAL_TONE: ProceduralParams.of("tone_curve", shadows=0.05),
    Category.CONTRAST_ADJUST: ProceduralParams.of("contrast", factor=1.1),
    Category.COLOR_BALANCE: ProceduralParams.of("saturation", factor=1.1),
    Category.LOCAL_RETOUCH: ProceduralParams.of("unsharp_sharpen", amount=0.3),
    Category.SEMANTIC_EDIT: ProceduralParams.of("tone_curve", shadows=0.04, highlights=0.02),
    Category.BACKGROUND_ALTER: ProceduralParams.of("vignette", strength=0.2),
    Category.GEOMETRIC: ProceduralParams.of("crop", left=0.03, top=0.03, right=0.97, bottom=0.97),
}

GENERATIVE_CATEGORIES = (Category.SEMANTIC_EDIT, Category.BACKGROUND_ALTER)


@dataclass
class RoutingTable:
    """Ordered tool preferences per category; ``"procedural"`` names the built-in engine."""

    routes: dict[Category, tuple[str, ...]] = field(
        default_factory=lambda: {c: (PROCEDURAL,) for c in Category}
    )
    parallel_candidates: int = 1
    proxies: dict[Category, ProceduralParams] = field(default_factory=lambda: dict(DEFAULT_PROXIES))

    def __post_init__(self):
        self.routes = {Category.parse(k): tuple(v) for k, v in self.routes.items()}
        missing = [c.value for c in Category if not self.routes.get(c)]
        if missing:
            raise ValueError(f"routing table has no tool for {missing}")
        if self.parallel_candidates not in (1, 2):
            raise ValueError("parallel_candidates must be 1 or 2")
        for c in Category:
            if c not in self.proxies:
                self.proxies[c] = DEFAULT_PROXIES[c]

    def tools_for(self, category: Category) -> tuple[str, ...]:
        tools = self.routes[category]
        # the procedural engine is always the last resort
        return tools if PROCEDURAL in tools else tools + (PROCEDURAL,)

    @classmethod
    def with_editors(cls, editors: Sequence[str], parallel_candidates: int = 1) -> "RoutingTable":
        """Generative editors first for semantic categories, procedural everywhere else."""
        routes = {c: (PROCEDURAL,) for c in Category}
        for c in GENERATIVE_CATEGORIES:
            routes[c] = tuple(editors) + (PROCEDURAL,)
        return cls(routes, parallel_candidates)


class GenerativeEditor:
    """Client for an image editor service: ``{"image", "instruction"} -> {"image"}``."""

    def __init__(self, endpoint: Endpoint):
        self.client = JsonClient(endpoint)

    def edit(self, instruction: str, image: PixelImage) -> PixelImage:
        resp = self.client.post({"image": encode_png_base64(image), "instruction": instruction})
        data = resp.get("image")
        if not isinstance(data, str):
            raise MalformedResponse("editor response has no base64 'image'")
        try:
            return decode_image_base64(data)
        except Exception as exc:
            raise MalformedResponse(f"editor returned an undecodable image: {exc}") from exc


def apply_generative(instruction: str, image: PixelImage, endpoint) -> PixelImage:
    editor = endpoint if isinstance(endpoint, GenerativeEditor) else GenerativeEditor(endpoint)
    return editor.edit(instruction, image)


class Executor:
    """Applies actions at full resolution and in the reduced-resolution simulation."""

    def __init__(
        self,
        routing: Optional[RoutingTable] = None,
        editors: Optional[Mapping[str, Endpoint | GenerativeEditor]] = None,
        evaluator: Optional[Callable[[PixelImage], float]] = None,
        simulate_with_editors: bool = False,
    ):
        self.routing = routing or RoutingTable()
        self.editors = {
            name: e if isinstance(e, GenerativeEditor) else GenerativeEditor(e) for name, e in (editors or {}).items()
        }
        self.evaluator = evaluator
        self.simulate_with_editors = simulate_with_editors
        self.failures: list[tuple[str, str, str]] = []

    def _procedural(self, action: EditAction, image: PixelImage) -> PixelImage:
        payload = action.payload
        if isinstance(payload, GenerativeInstruction):
            payload = self.routing.proxies[action.category]
        return apply_procedural(payload, None, image)

    def run_tool(self, tool: str, action: EditAction, image: PixelImage) -> PixelImage:
        if tool == PROCEDURAL:
            return self._procedural(action, image)
        editor = self.editors.get(tool)
        if editor is None:
            raise ExternalError(f"no endpoint configured for editor {tool!r}")
        return editor.edit(action.instruction, image)

    def _attempt(self, tool: str, action: EditAction, image: PixelImage) -> Optional[PixelImage]:
        try:
            return self.run_tool(tool, action, image)
        except (ExternalError, ParamOutOfRange, UnknownOperator) as exc:
            log.warning("tool %s failed on %s: %s", tool, action.id, exc)
            self.failures.append((action.id, tool, f"{type(exc).__name__}: {exc}"))
            return None

    def execute(self, action: EditAction, image: PixelImage) -> PixelImage:
        tools = list(self.routing.tools_for(action.category))
        if action.is_procedural:
            # parametric edits go straight to the engine that understands parameters
            tools.remove(PROCEDURAL)
            tools.insert(0, PROCEDURAL)
        width = self.routing.parallel_candidates if self.evaluator is not None else 1
        first, rest = tools[:width], tools[width:]
        if len(first) > 1:
            with ThreadPoolExecutor(len(first)) as pool:
                results = list(pool.map(lambda t: self._attempt(t, action, image), first))
        else:
            results = [self._attempt(t, action, image) for t in first]
        ok = [r for r in results if r is not None]
        while not ok and rest:
            r = self._attempt(rest.pop(0), action, image)
            if r is not None:
                ok.append(r)
        if not ok:
            raise AllToolsFailed(f"every tool failed for action {action.id!r}")
        if len(ok) == 1:
            return ok[0]
        scores = [self.evaluator(r) for r in ok]
        return ok[max(range(len(ok)), key=lambda i: (scores[i], -i))]

    def simulate(self, action: EditAction, image: PixelImage) -> PixelImage:
        """Cheap application used inside planning; generative edits use their procedural proxy."""
        try:
            if self.simulate_with_editors and not action.is_procedural:
                for tool in self.routing.tools_for(action.category):
                    if tool != PROCEDURAL:
                        r = self._attempt(tool, action, image)
                        if r is not None:
                            return r
            return self._procedural(action, image)
        except (ParamOutOfRange, UnknownOperator) as exc:
            raise SimExecutionFailed(f"{action.id}: {exc}") from exc
