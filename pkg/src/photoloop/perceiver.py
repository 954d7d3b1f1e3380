"""Candidate edit proposals.

The heuristic backend reads simple image statistics and maps deviations
from target bands to corrective procedural edits, scene labels to semantic
suggestions, and mood words in a user prompt to stylistic edits. An
optional external service speaking the JSON protocol below can replace it;
any failure of that service falls back to the heuristic.
"""

from __future__ import annotations

import enum
import logging
import re
from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np
from scipy import ndimage

from .core import (
    Category,
    EditAction,
    GenerativeInstruction,
    ImageState,
    Origin,
    PixelImage,
    ProceduralParams,
    action_from_json,
    encode_png_base64,
)
from .evaluator import LAPLACIAN_3X3, colorfulness, laplacian_variance
from .executor.operators import params_in_range, rgb_to_hsl
from .memory import EditingMemory
from .remote import Endpoint, ExternalError, JsonClient, MalformedResponse

log = logging.getLogger(__name__)

LUMINANCE_BAND = (0.35, 0.65)
CONTRAST_FLOOR = 0.12
SATURATION_BAND = (0.15, 0.6)
EXCLUSION_WINDOW = 3
VLM_DECODING = {"max_tokens": 1024, "temperature": 0.7, "top_p": 0.8}


class Scene(str, enum.Enum):
    PORTRAIT = "Portrait"
    LANDSCAPE = "Landscape"
    URBAN = "Urban"
    FOOD = "Food"
    OBJECT = "Object"
    NIGHT = "Night"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class ImageStatistics:
    mean_luminance: float
    rms_contrast: float
    mean_saturation: float
    colorfulness: float
    sharpness: float
    dark_fraction: float


def _hsv_saturation(px: np.ndarray) -> np.ndarray:
    mx = px.max(axis=-1)
    mn = px.min(axis=-1)
    return np.divide(mx - mn, mx, out=np.zeros_like(mx), where=mx > 0)


def compute_statistics(image: PixelImage) -> ImageStatistics:
    lum = image.luminance()
    return ImageStatistics(
        mean_luminance=float(np.clip(lum.mean(), 0.0, 1.0)),
        rms_contrast=float(lum.std()),
        mean_saturation=float(_hsv_saturation(image.pixels).mean()),
        colorfulness=colorfulness(image),
        sharpness=laplacian_variance(image),
        dark_fraction=float(np.mean(lum < 0.1)),
    )


def _scene_features(image: PixelImage) -> dict[str, float]:
    px = image.pixels
    hue, hsl_sat, light = rgb_to_hsl(px)
    deg = hue * 360.0
    sat = _hsv_saturation(px)
    vivid = sat > 0.25
    edges = np.abs(ndimage.convolve(image.luminance(), LAPLACIAN_3X3, mode="nearest")) > 0.1
    h, w = light.shape
    ch, cw = max(1, h // 4), max(1, w // 4)
    center = image.luminance()[ch:h - ch, cw:w - cw] if h > 2 and w > 2 else image.luminance()
    return {
        "green": float(np.mean(vivid & (deg >= 75) & (deg < 165))),
        "blue": float(np.mean(vivid & (deg >= 165) & (deg < 260))),
        "warm": float(np.mean((sat > 0.4) & (deg >= 10) & (deg < 60))),
        "skin": float(np.mean((deg < 50) & (hsl_sat > 0.2) & (hsl_sat < 0.75) & (light > 0.3) & (light < 0.85))),
        "edges": float(np.mean(edges)),
        "center_contrast": float(abs(center.mean() - image.luminance().mean())),
    }


def classify_scene(state_or_image) -> Scene:
    """Rule table over statistics; first matching rule wins."""
    image = state_or_image.image if isinstance(state_or_image, ImageState) else state_or_image
    st = compute_statistics(image)
    f = _scene_features(image)
    if st.dark_fraction > 0.5:
        return Scene.NIGHT
    if st.mean_saturation < 0.08 and st.rms_contrast < 0.02:
        return Scene.UNKNOWN
    if f["skin"] > 0.25 and f["green"] < 0.3:
        return Scene.PORTRAIT
    if f["green"] > 0.2 and f["green"] + f["blue"] > 0.5 and f["edges"] < 0.15:
        return Scene.LANDSCAPE
    if f["warm"] > 0.4:
        return Scene.FOOD
    if f["edges"] > 0.25 and st.mean_saturation < 0.3:
        return Scene.URBAN
    if f["center_contrast"] > 0.15:
        return Scene.OBJECT
    return Scene.UNKNOWN


@dataclass(frozen=True)
class PerceiverContext:
    scene: Scene = Scene.UNKNOWN
    memory: Optional[EditingMemory] = None
    user_prompt: Optional[str] = None
    k: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


def _proc(aid, category, instruction, operator, origin=Origin.HEURISTIC, **params) -> EditAction:
    return EditAction(aid, category, instruction, ProceduralParams.of(operator, **params), origin)


def _gen(aid, category, text, origin=Origin.HEURISTIC) -> EditAction:
    return EditAction(aid, category, text, GenerativeInstruction(text), origin)


C = Category
_U = Origin.USER_GUIDED

# mood words -> stylistic edits
PROMPT_RULES: list[tuple[re.Pattern, Callable[[], list[EditAction]]]] = [
    (re.compile(r"\b(warm\w*|cozy|golden|sunset|autumn)\b", re.I), lambda: [
        _proc("warm_tone", C.COLOR_BALANCE, "shift the white balance warmer", "white_balance", _U,
              r_gain=1.1, g_gain=1.0, b_gain=0.88)]),
    (re.compile(r"\b(cool\w*|cold|calm|serene|icy|winter)\b", re.I), lambda: [
        _proc("cool_tone", C.COLOR_BALANCE, "shift the white balance cooler", "white_balance", _U,
              r_gain=0.9, g_gain=1.0, b_gain=1.1)]),
    (re.compile(r"\b(bright\w*|airy|cheerful|happy|fresh)\b", re.I), lambda: [
        _proc("airy_lift", C.GLOBAL_TONE, "lift shadows and highlights for an airy feel", "tone_curve", _U,
              shadows=0.1, highlights=0.05)]),
    (re.compile(r"\b(moody|dramatic|dark\w*|mysterious|intense)\b", re.I), lambda: [
        _proc("dramatic_contrast", C.CONTRAST_ADJUST, "deepen contrast for drama", "contrast", _U, factor=1.3),
        _proc("moody_vignette", C.LOCAL_RETOUCH, "darken the edges", "vignette", _U, strength=0.4)]),
    (re.compile(r"\b(vivid|vibrant|colou?rful|lively|punchy)\b", re.I), lambda: [
        _proc("vivid_colors", C.COLOR_BALANCE, "boost saturation", "saturation", _U, factor=1.3)]),
    (re.compile(r"\b(soft|dreamy|gentle|nostalgic|vintage)\b", re.I), lambda: [
        _proc("soft_fade", C.CONTRAST_ADJUST, "soften contrast for a faded look", "contrast", _U, factor=0.85)]),
]

SCENE_SUGGESTIONS: dict[Scene, EditAction] = {
    Scene.LANDSCAPE: _gen("enhance_sky_foliage", C.SEMANTIC_EDIT,
                          "adjust the color balance to enhance the blue of the sky and the green of the foliage"),
    Scene.PORTRAIT: _gen("soften_background", C.BACKGROUND_ALTER,
                         "soften and declutter the background while keeping the person unchanged"),
    Scene.NIGHT: _gen("night_recover", C.SEMANTIC_EDIT, "reduce noise and recover detail in the dark areas"),
    Scene.URBAN: _gen("straighten_lines", C.GEOMETRIC, "correct the perspective and straighten vertical lines"),
    Scene.FOOD: _gen("food_appetizing", C.SEMANTIC_EDIT, "make the food look fresh and appetizing"),
    Scene.OBJECT: _gen("clean_background", C.BACKGROUND_ALTER, "remove distractions behind the main subject"),
}

FILLER_ACTIONS: tuple[EditAction, ...] = (
    _proc("contrast_boost", C.CONTRAST_ADJUST, "slightly increase contrast", "contrast", factor=1.15),
    _proc("vibrance", C.COLOR_BALANCE, "slightly increase saturation", "saturation", factor=1.15),
    _proc("gamma_brighten", C.GLOBAL_TONE, "brighten midtones", "gamma", exponent=0.85),
    _proc("detail_sharpen", C.LOCAL_RETOUCH, "sharpen fine detail", "unsharp_sharpen", amount=0.5),
    _proc("tone_balance", C.GLOBAL_TONE, "lift shadows and recover highlights", "tone_curve",
          shadows=0.05, highlights=-0.05),
    _proc("gamma_darken", C.GLOBAL_TONE, "deepen midtones", "gamma", exponent=1.15),
    _proc("warm_touch", C.COLOR_BALANCE, "warm the image slightly", "white_balance",
          r_gain=1.05, g_gain=1.0, b_gain=0.95),
    _proc("subtle_vignette", C.LOCAL_RETOUCH, "add a subtle vignette", "vignette", strength=0.25),
    _proc("center_crop", C.GEOMETRIC, "tighten the framing", "crop", left=0.05, top=0.05, right=0.95, bottom=0.95),
)

# categories that act on the subject of a portrait
SUBJECT_CATEGORIES = {C.LOCAL_RETOUCH, C.SEMANTIC_EDIT}


def _corrective(st: ImageStatistics) -> list[EditAction]:
    out = []
    lo, hi = LUMINANCE_BAND
    if st.mean_luminance < lo:
        delta = round(min(0.5, 0.5 - st.mean_luminance), 3)
        out.append(_proc("brightness_up", C.GLOBAL_TONE, "brighten the underexposed image", "brightness",
                         delta=delta))
    elif st.mean_luminance > hi:
        delta = round(min(0.5, st.mean_luminance - 0.5), 3)
        out.append(_proc("brightness_down", C.GLOBAL_TONE, "darken the overexposed image", "brightness",
                         delta=-delta))
    if st.rms_contrast < CONTRAST_FLOOR:
        factor = round(float(np.clip(0.2 / max(st.rms_contrast, 1e-3), 1.1, 2.0)), 3)
        out.append(_proc("contrast_up", C.CONTRAST_ADJUST, "increase the flat contrast", "contrast", factor=factor))
    elif st.rms_contrast > 0.3:
        out.append(_proc("contrast_down", C.CONTRAST_ADJUST, "reduce harsh contrast", "contrast", factor=0.8))
    if st.dark_fraction > 0.2:
        out.append(_proc("shadow_lift", C.GLOBAL_TONE, "open up the shadows", "tone_curve", shadows=0.15))
    slo, shi = SATURATION_BAND
    if st.mean_saturation < slo:
        out.append(_proc("saturation_up", C.COLOR_BALANCE, "restore muted colors", "saturation", factor=1.4))
    elif st.mean_saturation > shi:
        out.append(_proc("saturation_down", C.COLOR_BALANCE, "tame oversaturated colors", "saturation", factor=0.75))
    if st.sharpness < 0.002 and st.rms_contrast > 0.02:
        out.append(_proc("sharpen", C.LOCAL_RETOUCH, "sharpen the soft image", "unsharp_sharpen", amount=0.8))
    return out


def _prompt_actions(prompt: Optional[str]) -> list[EditAction]:
    if not prompt or not prompt.strip():
        return []
    out = [a for pattern, make in PROMPT_RULES if pattern.search(prompt) for a in make()]
    if not out:
        out.append(_gen("user_prompt", C.SEMANTIC_EDIT, prompt.strip(), Origin.USER_GUIDED))
    return out


def _finalize(candidates: list[EditAction], ctx: PerceiverContext) -> list[EditAction]:
    """De-duplicate, apply memory exclusion and portrait suppression, keep k with >= 2 categories."""
    excluded = ctx.memory.recently_rejected(EXCLUSION_WINDOW) if ctx.memory is not None else set()
    seen_ids, seen_sig, pool = set(), set(), []
    for a in candidates:
        if a.id in seen_ids or a.signature in seen_sig or a.id in excluded:
            continue
        if ctx.scene is Scene.PORTRAIT and a.category in SUBJECT_CATEGORIES and a.origin is not Origin.USER_GUIDED:
            continue
        seen_ids.add(a.id)
        seen_sig.add(a.signature)
        pool.append(a)
    chosen = pool[: ctx.k]
    if ctx.k >= 2 and len({a.category for a in chosen}) < 2:
        other = next((a for a in pool[ctx.k:] if a.category != chosen[0].category), None)
        if other is not None:
            chosen[-1] = other
    return chosen


class HeuristicPerceiver:
    """Deterministic, offline proposal backend."""

    def classify_scene(self, state) -> Scene:
        return classify_scene(state)

    def propose(self, state: ImageState, ctx: PerceiverContext) -> list[EditAction]:
        st = compute_statistics(state.image)
        candidates = _prompt_actions(ctx.user_prompt) + _corrective(st)
        if ctx.scene in SCENE_SUGGESTIONS:
            candidates.append(SCENE_SUGGESTIONS[ctx.scene])
        candidates.extend(FILLER_ACTIONS)
        return _finalize(candidates, ctx)


class ExternalPerceiver:
    """Client for an external vision-language proposal service."""

    def __init__(self, endpoint: Endpoint, decoding: Optional[dict] = None):
        self.client = JsonClient(endpoint)
        self.decoding = dict(decoding or VLM_DECODING)
        self.last_scene: Optional[Scene] = None

    def request_body(self, state: ImageState, ctx: PerceiverContext) -> dict[str, Any]:
        return {
            "image": encode_png_base64(state.image),
            "scene": ctx.scene.value,
            "memory": ctx.memory.flat() if ctx.memory is not None else [],
            "user_prompt": ctx.user_prompt,
            "k": ctx.k,
            "decoding": dict(self.decoding),
        }

    def propose(self, state: ImageState, ctx: PerceiverContext) -> list[EditAction]:
        resp = self.client.post(self.request_body(state, ctx))
        items = resp.get("actions")
        if not isinstance(items, list):
            raise MalformedResponse("response has no 'actions' list")
        actions = []
        for item in items:
            try:
                action = action_from_json(item)
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedResponse(f"bad action {item!r}: {exc}") from exc
            if isinstance(action.payload, ProceduralParams) and not params_in_range(action.payload):
                raise MalformedResponse(f"action {action.id!r} has parameters outside the operator range")
            actions.append(action)
        if "scene" in resp:
            try:
                self.last_scene = Scene(resp["scene"])
            except ValueError:
                log.warning("ignoring unknown scene %r from perceiver", resp["scene"])
        return actions


class Perceiver:
    """Front end: external backend when configured, heuristic otherwise or on failure."""

    def __init__(self, endpoint: Optional[Endpoint] = None):
        self.heuristic = HeuristicPerceiver()
        self.external = ExternalPerceiver(endpoint) if endpoint is not None else None
        self.fallbacks = 0

    def classify_scene(self, state) -> Scene:
        return self.heuristic.classify_scene(state)

    def propose(self, state: ImageState, ctx: PerceiverContext) -> list[EditAction]:
        if self.external is not None:
            try:
                actions = self.external.propose(state, ctx)
                return _finalize(actions, ctx)
            except ExternalError as exc:
                self.fallbacks += 1
                log.warning("external perceiver failed (%s); using heuristic backend", exc)
        return self.heuristic.propose(state, ctx)


def propose_actions(state: ImageState, ctx: PerceiverContext, endpoint: Optional[Endpoint] = None) -> list[EditAction]:
    return Perceiver(endpoint).propose(state, ctx)
