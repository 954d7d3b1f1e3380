"""Deterministic pixel operators used for parametric edits.

Every operator takes and returns a :class:`PixelImage`; output is clamped
to [0, 1]. Only ``crop`` changes dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Union

import numpy as np
from scipy import ndimage

from ..core import PixelImage, ProceduralParams, luminance


class ParamOutOfRange(ValueError):
    pass


class UnknownOperator(KeyError):
    pass


@dataclass(frozen=True)
class ParamSpec:
    name: str
    min: float
    max: float
    default: float

    def __post_init__(self):
        if not self.min <= self.default <= self.max:
            raise ValueError(f"{self.name}: default {self.default} outside [{self.min}, {self.max}]")


@dataclass(frozen=True)
class OperatorSpec:
    name: str
    parameters: tuple[ParamSpec, ...]
    fn: Callable[..., np.ndarray]

    def resolve(self, params: Mapping[str, float]) -> dict[str, float]:
        """Fill defaults and range-check; raises ParamOutOfRange."""
        known = {p.name: p for p in self.parameters}
        extra = set(params) - set(known)
        if extra:
            raise ParamOutOfRange(f"{self.name}: unknown parameter(s) {sorted(extra)}")
        out = {}
        for p in self.parameters:
            v = float(params.get(p.name, p.default))
            if not np.isfinite(v) or v < p.min or v > p.max:
                raise ParamOutOfRange(f"{self.name}.{p.name}={v} outside [{p.min}, {p.max}]")
            out[p.name] = v
        return out

    def in_range(self, params: Mapping[str, float]) -> bool:
        try:
            self.resolve(params)
        except ParamOutOfRange:
            return False
        return True


def _clip(x: np.ndarray) -> np.ndarray:
    return np.clip(x, 0.0, 1.0)


def _smoothstep(e0: float, e1: float, x: np.ndarray) -> np.ndarray:
    t = np.clip((x - e0) / (e1 - e0), 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


GAUSS_3X3 = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]], dtype=np.float64) / 16.0


def gaussian_blur3(px: np.ndarray) -> np.ndarray:
    out = np.empty_like(px)
    for c in range(px.shape[2]):
        out[:, :, c] = ndimage.convolve(px[:, :, c], GAUSS_3X3, mode="nearest")
    return out


def _brightness(px, delta):
    return _clip(px + delta)


def _contrast(px, factor):
    return _clip(0.5 + factor * (px - 0.5))


def _saturation(px, factor):
    lum = luminance(px)[:, :, None]
    return _clip(lum + factor * (px - lum))


def _white_balance(px, r_gain, g_gain, b_gain):
    return _clip(px * np.array([r_gain, g_gain, b_gain]))


def _gamma(px, exponent):
    return _clip(np.power(px, exponent))


def _tone_curve(px, shadows, highlights):
    shadow_w = 1.0 - _smoothstep(0.0, 0.5, px)
    highlight_w = _smoothstep(0.5, 1.0, px)
    return _clip(px + shadows * shadow_w + highlights * highlight_w)


def _vignette(px, strength):
    h, w = px.shape[:2]
    ys = (np.arange(h) + 0.5) / h * 2.0 - 1.0
    xs = (np.arange(w) + 0.5) / w * 2.0 - 1.0
    r2 = (ys[:, None] ** 2 + xs[None, :] ** 2) / 2.0
    return _clip(px * (1.0 - strength * r2)[:, :, None])


def _unsharp(px, amount):
    return _clip(px + amount * (px - gaussian_blur3(px)))


def rgb_to_hsl(px: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    r, g, b = px[..., 0], px[..., 1], px[..., 2]
    mx = px.max(axis=-1)
    mn = px.min(axis=-1)
    light = (mx + mn) / 2.0
    chroma = mx - mn
    denom = np.where(light <= 0.5, mx + mn, 2.0 - mx - mn)
    sat = np.divide(chroma, denom, out=np.zeros_like(chroma), where=chroma > 0)
    safe = np.where(chroma > 0, chroma, 1.0)
    hue = np.where(
        mx == r,
        ((g - b) / safe) % 6.0,
        np.where(mx == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0),
    )
    hue = np.where(chroma > 0, hue / 6.0, 0.0)
    return hue, sat, light


def hsl_to_rgb(hue: np.ndarray, sat: np.ndarray, light: np.ndarray) -> np.ndarray:
    q = np.where(light < 0.5, light * (1.0 + sat), light + sat - light * sat)
    p = 2.0 * light - q

    def channel(t):
        t = t % 1.0
        return np.where(
            t < 1 / 6, p + (q - p) * 6.0 * t,
            np.where(t < 0.5, q, np.where(t < 2 / 3, p + (q - p) * (2 / 3 - t) * 6.0, p)),
        )

    return np.stack([channel(hue + 1 / 3), channel(hue), channel(hue - 1 / 3)], axis=-1)


def _hue_shift(px, degrees):
    hue, sat, light = rgb_to_hsl(px)
    return _clip(hsl_to_rgb((hue + degrees / 360.0) % 1.0, sat, light))


def _crop(px, left, top, right, bottom):
    if right <= left or bottom <= top:
        raise ParamOutOfRange(f"crop: empty rectangle ({left}, {top}, {right}, {bottom})")
    h, w = px.shape[:2]
    x0, x1 = int(np.floor(left * w)), int(np.ceil(right * w))
    y0, y1 = int(np.floor(top * h)), int(np.ceil(bottom * h))
    x1, y1 = max(x1, x0 + 1), max(y1, y0 + 1)
    return px[y0:y1, x0:x1].copy()


def _op(name, fn, *params):
    return OperatorSpec(name, tuple(ParamSpec(*p) for p in params), fn)


OPERATORS: dict[str, OperatorSpec] = {
    op.name: op
    for op in (
        _op("brightness", _brightness, ("delta", -0.5, 0.5, 0.0)),
        _op("contrast", _contrast, ("factor", 0.25, 4.0, 1.0)),
        _op("saturation", _saturation, ("factor", 0.0, 3.0, 1.0)),
        _op("white_balance", _white_balance,
            ("r_gain", 0.5, 2.0, 1.0), ("g_gain", 0.5, 2.0, 1.0), ("b_gain", 0.5, 2.0, 1.0)),
        _op("gamma", _gamma, ("exponent", 0.25, 4.0, 1.0)),
        _op("tone_curve", _tone_curve, ("shadows", -0.5, 0.5, 0.0), ("highlights", -0.5, 0.5, 0.0)),
        _op("vignette", _vignette, ("strength", 0.0, 1.0, 0.0)),
        _op("unsharp_sharpen", _unsharp, ("amount", 0.0, 2.0, 0.0)),
        _op("hue_shift", _hue_shift, ("degrees", -180.0, 180.0, 0.0)),
        _op("crop", _crop,
            ("left", 0.0, 1.0, 0.0), ("top", 0.0, 1.0, 0.0), ("right", 0.0, 1.0, 1.0), ("bottom", 0.0, 1.0, 1.0)),
    )
}


def get_operator(name: str) -> OperatorSpec:
    try:
        return OPERATORS[name]
    except KeyError:
        raise UnknownOperator(name) from None


def apply_procedural(
    op: Union[OperatorSpec, str, ProceduralParams],
    params: Optional[Mapping[str, float]] = None,
    image: Optional[PixelImage] = None,
) -> PixelImage:
    """Apply one operator. Accepts ``(spec_or_name, params, image)`` or ``(ProceduralParams, None, image)``."""
    if isinstance(op, ProceduralParams):
        op, params = op.operator, {**op.as_dict(), **(params or {})}
    spec = get_operator(op) if isinstance(op, str) else op
    if image is None:
        raise TypeError("image is required")
    resolved = spec.resolve(params or {})
    if all(resolved[p.name] == p.default for p in spec.parameters):
        # every operator's defaults are its identity transform
        return image
    return PixelImage(spec.fn(image.pixels, **resolved))


def params_in_range(payload: ProceduralParams) -> bool:
    return payload.operator in OPERATORS and OPERATORS[payload.operator].in_range(payload.as_dict())
