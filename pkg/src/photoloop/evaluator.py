"""Weighted ensemble scoring and the accept/revert rule.

Each scorer maps an image to a raw value in [0, 1]; the aggregate is
``sum(w_i * raw_i) / sum(w_i)`` over the scorers that succeeded.

The built-in scorers are lightweight stand-ins for the learned and
NIQE/BRISQUE-style models an installation would normally reach over HTTP.
"""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy.special import gamma as gamma_fn

from .core import PixelImage, content_hash, encode_png_base64
from .remote import Endpoint, ExternalError, JsonClient, MalformedResponse

log = logging.getLogger(__name__)


class ScorerError(Exception):
    pass


class ImageTooSmall(ScorerError):
    pass


class AllScorersFailed(Exception):
    pass


class ConfigMismatch(ValueError):
    pass


# -- image statistics shared with the perceiver ------------------------------

LAPLACIAN_3X3 = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])


def rms_contrast(image: PixelImage) -> float:
    return float(np.std(image.luminance()))


def laplacian_variance(image: PixelImage) -> float:
    resp = ndimage.convolve(image.luminance(), LAPLACIAN_3X3, mode="nearest")
    return float(np.var(resp))


def colorfulness(image: PixelImage) -> float:
    """Hasler-Suesstrunk colorfulness on [0, 1] RGB (so 1/255 of the 8-bit value)."""
    px = image.pixels
    rg = px[..., 0] - px[..., 1]
    yb = 0.5 * (px[..., 0] + px[..., 1]) - px[..., 2]
    std = math.hypot(float(np.std(rg)), float(np.std(yb)))
    mean = math.hypot(float(np.mean(rg)), float(np.mean(yb)))
    return std + 0.3 * mean


# -- built-in scorers ---------------------------------------------------------

def colorfulness_score(image: PixelImage) -> float:
    return min(1.0, colorfulness(image) / 0.3)


def contrast_score(image: PixelImage) -> float:
    return min(1.0, rms_contrast(image) / 0.25)


def sharpness_score(image: PixelImage) -> float:
    return min(1.0, laplacian_variance(image) / 0.02)


def exposure_score(image: PixelImage) -> float:
    return float(np.clip(1.0 - 2.0 * abs(float(np.mean(image.luminance())) - 0.5), 0.0, 1.0))


def contrast_exposure_score(image: PixelImage) -> float:
    return 0.5 * (contrast_score(image) + exposure_score(image))


_SHAPES = np.arange(0.2, 10.001, 0.001)
_GGD_RATIO = gamma_fn(1.0 / _SHAPES) * gamma_fn(3.0 / _SHAPES) / gamma_fn(2.0 / _SHAPES) ** 2
_AGGD_RATIO = gamma_fn(2.0 / _SHAPES) ** 2 / (gamma_fn(1.0 / _SHAPES) * gamma_fn(3.0 / _SHAPES))


def mscn(lum: np.ndarray, c: float = 1.0 / 255.0) -> np.ndarray:
    """Mean-subtracted contrast-normalized coefficients (7x7 Gaussian window, sigma 7/6)."""
    sigma = 7.0 / 6.0
    mu = ndimage.gaussian_filter(lum, sigma, mode="nearest", truncate=3.0 / sigma)
    var = ndimage.gaussian_filter(lum * lum, sigma, mode="nearest", truncate=3.0 / sigma) - mu * mu
    return (lum - mu) / (np.sqrt(np.abs(var)) + c)


def ggd_fit(x: np.ndarray) -> tuple[float, float]:
    """Moment-matching fit of a zero-mean generalized Gaussian; returns (shape, variance)."""
    var = float(np.mean(x * x))
    mabs = float(np.mean(np.abs(x)))
    if mabs == 0.0:
        return 0.0, 0.0
    rho = var / mabs**2
    return float(_SHAPES[np.argmin(np.abs(rho - _GGD_RATIO))]), var


def aggd_fit(x: np.ndarray) -> tuple[float, float, float]:
    """Asymmetric GGD fit; returns (shape, left variance, right variance)."""
    left, right = x[x < 0], x[x > 0]
    if left.size == 0 or right.size == 0:
        return 0.0, 0.0, 0.0
    lvar, rvar = float(np.mean(left**2)), float(np.mean(right**2))
    g = math.sqrt(lvar) / math.sqrt(rvar)
    r_hat = float(np.mean(np.abs(x))) ** 2 / float(np.mean(x * x))
    r_norm = r_hat * (g**3 + 1.0) * (g + 1.0) / (g**2 + 1.0) ** 2
    return float(_SHAPES[np.argmin((_AGGD_RATIO - r_norm) ** 2)]), lvar, rvar


def nss_features(image: PixelImage) -> np.ndarray:
    """[GGD shape, GGD variance, horizontal-pair AGGD shape, mean AGGD side variance]."""
    coeffs = mscn(image.luminance())
    shape, var = ggd_fit(coeffs)
    pair = coeffs[:, :-1] * coeffs[:, 1:]
    pshape, lvar, rvar = aggd_fit(pair)
    return np.array([shape, var, pshape, 0.5 * (lvar + rvar)])


# Mean features of four pristine photographs from the scikit-image sample set
# (astronaut, coffee, chelsea, rocket); spreads are loose per-feature scales.
PRISTINE_NSS = np.array([1.44, 0.227, 0.544, 0.077])
NSS_SPREAD = np.array([0.6, 0.15, 0.25, 0.05])


def nss_quality(image: PixelImage) -> float:
    """exp(-||f - f0||^2) with features scaled by their typical spread; 1 = pristine-like."""
    if image.width < 16 or image.height < 16:
        raise ImageTooSmall(f"nss_quality needs at least 16x16, got {image.width}x{image.height}")
    if np.ptp(image.luminance()) < 1e-12:
        return 0.0  # flat: no structure to compare, and filter round-off would pose as texture
    f = nss_features(image)
    d = (f - PRISTINE_NSS) / NSS_SPREAD
    return float(math.exp(-float(d @ d)))


BUILTIN_SCORERS: dict[str, Callable[[PixelImage], float]] = {
    "nss_quality": nss_quality,
    "colorfulness_score": colorfulness_score,
    "contrast_score": contrast_score,
    "sharpness_score": sharpness_score,
    "exposure_score": exposure_score,
    "contrast_exposure": contrast_exposure_score,
}


# -- configuration and reports -------------------------------------------------

@dataclass(frozen=True)
class ScorerEntry:
    """One weighted scorer: a built-in name, an HTTP endpoint, or a callable."""

    scorer_id: str
    weight: float
    builtin: Optional[str] = None
    endpoint: Optional[Endpoint] = None
    fn: Optional[Callable[[PixelImage], float]] = None
    native_range: tuple[float, float] = (0.0, 1.0)
    higher_is_better: bool = True
    reference_text: Optional[str] = None
    decoding: Optional[dict] = None

    def __post_init__(self):
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise ValueError(f"scorer {self.scorer_id!r}: weight must be positive, got {self.weight}")
        if self.builtin is None and self.endpoint is None and self.fn is None:
            raise ValueError(f"scorer {self.scorer_id!r}: needs a builtin, endpoint or fn")
        if self.builtin is not None and self.builtin not in BUILTIN_SCORERS:
            raise ValueError(f"scorer {self.scorer_id!r}: unknown builtin {self.builtin!r}")
        lo, hi = self.native_range
        if not hi > lo:
            raise ValueError(f"scorer {self.scorer_id!r}: empty native range {self.native_range}")

    @property
    def kind(self) -> str:
        return "external" if self.endpoint is not None else "builtin"


@dataclass(frozen=True)
class ScorerConfig:
    entries: tuple[ScorerEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.entries:
            raise ValueError("scorer config is empty")
        ids = [e.scorer_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate scorer ids in {ids}")

    @property
    def normalizer(self) -> float:
        return math.fsum(e.weight for e in self.entries)

    @property
    def key(self) -> tuple[tuple[str, float], ...]:
        return tuple(sorted((e.scorer_id, e.weight) for e in self.entries))

    def without(self, scorer_id: str) -> "ScorerConfig":
        return ScorerConfig(tuple(e for e in self.entries if e.scorer_id != scorer_id))


UGC_DECODING = {"temperature": 0.7, "top_p": 0.9, "max_tokens": 32}


def default_scorer_config() -> ScorerConfig:
    """Four slots weighted 1.0 / 2.0 / 2.0 / 0.8, each backed by an offline built-in."""
    return ScorerConfig((
        ScorerEntry("semantic_alignment", 1.0, builtin="contrast_exposure"),
        ScorerEntry("aesthetic", 2.0, builtin="colorfulness_score"),
        ScorerEntry("preference", 2.0, builtin="nss_quality"),
        ScorerEntry("ugc", 0.8, builtin="sharpness_score", decoding=dict(UGC_DECODING)),
    ))


@dataclass(frozen=True)
class ScoreReport:
    per_scorer: tuple[tuple[str, float], ...]
    weights: tuple[tuple[str, float], ...]
    aggregate: float
    image_digest: int
    omitted: tuple[str, ...] = ()
    config_key: tuple = field(default=(), compare=False)

    def raw(self, scorer_id: str) -> float:
        return dict(self.per_scorer)[scorer_id]

    def to_json(self) -> dict[str, Any]:
        return {
            "aggregate": self.aggregate,
            "per_scorer": {k: v for k, v in self.per_scorer},
            "weights": {k: v for k, v in self.weights},
            "omitted": list(self.omitted),
            "digest": f"{self.image_digest:016x}",
        }


def weighted_aggregate(raws: Sequence[float], weights: Sequence[float]) -> float:
    return math.fsum(w * r for w, r in zip(weights, raws)) / math.fsum(weights)


class Evaluator:
    """Scores images under a fixed :class:`ScorerConfig`."""

    def __init__(self, config: Optional[ScorerConfig] = None, max_workers: int = 1):
        self.config = config or default_scorer_config()
        self.max_workers = max_workers
        self._clients = {
            e.scorer_id: JsonClient(e.endpoint) for e in self.config.entries if e.endpoint is not None
        }

    def _raw(self, entry: ScorerEntry, image: PixelImage) -> float:
        if entry.endpoint is not None:
            value, (lo, hi) = self._remote(entry, image)
        elif entry.fn is not None:
            value, (lo, hi) = float(entry.fn(image)), entry.native_range
        else:
            value, (lo, hi) = BUILTIN_SCORERS[entry.builtin](image), entry.native_range
        if not math.isfinite(value):
            raise ScorerError(f"{entry.scorer_id}: non-finite score {value}")
        raw = min(1.0, max(0.0, (value - lo) / (hi - lo)))
        return raw if entry.higher_is_better else 1.0 - raw

    def _remote(self, entry: ScorerEntry, image: PixelImage) -> tuple[float, tuple[float, float]]:
        body: dict[str, Any] = {"image": encode_png_base64(image), "reference_text": entry.reference_text}
        if entry.decoding:
            body["decoding"] = dict(entry.decoding)
        resp = self._clients[entry.scorer_id].post(body)
        try:
            value = float(resp["score"])
            rng = resp.get("range") or entry.native_range
            lo, hi = float(rng[0]), float(rng[1])
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise MalformedResponse(f"{entry.scorer_id}: bad score payload {resp!r}") from exc
        if not hi > lo:
            raise MalformedResponse(f"{entry.scorer_id}: empty range [{lo}, {hi}]")
        return value, (lo, hi)

    def _try(self, entry: ScorerEntry, image: PixelImage) -> Optional[float]:
        try:
            return self._raw(entry, image)
        except (ScorerError, ExternalError) as exc:
            log.warning("scorer %s skipped: %s", entry.scorer_id, exc)
            return None

    def evaluate(self, image: PixelImage) -> ScoreReport:
        entries = self.config.entries
        if self.max_workers > 1 and len(entries) > 1:
            with ThreadPoolExecutor(self.max_workers) as pool:
                raws = list(pool.map(lambda e: self._try(e, image), entries))
        else:
            raws = [self._try(e, image) for e in entries]
        ok = [(e, r) for e, r in zip(entries, raws) if r is not None]
        if not ok:
            raise AllScorersFailed(f"none of {[e.scorer_id for e in entries]} produced a score")
        return ScoreReport(
            per_scorer=tuple((e.scorer_id, r) for e, r in ok),
            weights=tuple((e.scorer_id, e.weight) for e, _ in ok),
            aggregate=weighted_aggregate([r for _, r in ok], [e.weight for e, _ in ok]),
            image_digest=content_hash(image),
            omitted=tuple(e.scorer_id for e, r in zip(entries, raws) if r is None),
            config_key=self.config.key,
        )

    def score(self, image: PixelImage) -> float:
        return self.evaluate(image).aggregate

    __call__ = score


def evaluate(image: PixelImage, cfg: Optional[ScorerConfig] = None) -> ScoreReport:
    return Evaluator(cfg).evaluate(image)


class Decision(str, enum.Enum):
    ACCEPT = "Accept"
    REVERT = "Revert"


def compare_and_decide(current: ScoreReport, candidate_best: ScoreReport, epsilon: float = 0.0) -> Decision:
    """Accept only a strict improvement of more than ``epsilon``."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if current.config_key and candidate_best.config_key and current.config_key != candidate_best.config_key:
        raise ConfigMismatch("reports were produced under different scorer configs")
    return Decision.ACCEPT if candidate_best.aggregate > current.aggregate + epsilon else Decision.REVERT
