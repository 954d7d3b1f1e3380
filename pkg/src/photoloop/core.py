"""Image and action types shared across the engine.

Pixels are linear-range RGB floats in [0, 1], stored as an ``(H, W, 3)``
float64 array. 8-bit file I/O maps through ``value / 255`` with no gamma.
"""

from __future__ import annotations

import base64
import enum
import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Union

import numpy as np
from PIL import Image


class InvalidImage(ValueError):
    pass


class Scale(enum.IntEnum):
    """Downscale factor. ``FULL`` is the identity control used by experiments."""

    FULL = 1
    HALF = 2
    QUARTER = 4

    @classmethod
    def parse(cls, value: Union[str, int, "Scale"]) -> "Scale":
        if isinstance(value, Scale):
            return value
        if isinstance(value, str):
            key = value.strip().upper()
            aliases = {"1": "FULL", "1/2": "HALF", "2": "HALF", "1/4": "QUARTER", "4": "QUARTER"}
            return cls[aliases.get(key, key)]
        return cls(int(value))

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True, eq=False)
class PixelImage:
    """An RGB image with float channels in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.array(self.pixels, dtype=np.float64, copy=True)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise InvalidImage(f"expected (H, W, 3) array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidImage("image must be at least 1x1")
        if not np.all(np.isfinite(arr)):
            raise InvalidImage("non-finite pixel values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise InvalidImage(f"pixel values outside [0, 1]: [{arr.min()}, {arr.max()}]")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.pixels.shape

    @classmethod
    def constant(cls, width: int, height: int, value=0.5) -> "PixelImage":
        rgb = np.broadcast_to(np.asarray(value, dtype=np.float64), (3,))
        return cls(np.broadcast_to(rgb, (height, width, 3)))

    @classmethod
    def from_array(cls, arr: np.ndarray, clip: bool = False) -> "PixelImage":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 2:
            arr = np.repeat(arr[:, :, None], 3, axis=2)
        if clip:
            arr = np.clip(arr, 0.0, 1.0)
        return cls(arr)

    @classmethod
    def from_uint8(cls, arr: np.ndarray) -> "PixelImage":
        return cls.from_array(np.asarray(arr, dtype=np.float64) / 255.0)

    def to_uint8(self) -> np.ndarray:
        return np.round(self.pixels * 255.0).astype(np.uint8)

    def luminance(self) -> np.ndarray:
        return luminance(self.pixels)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PixelImage):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.pixels, other.pixels)

    def __hash__(self) -> int:
        return content_hash(self)

    def __repr__(self) -> str:
        return f"PixelImage({self.width}x{self.height})"


LUMA_WEIGHTS = np.array([0.2126, 0.7152, 0.0722])


def luminance(pixels: np.ndarray) -> np.ndarray:
    return pixels @ LUMA_WEIGHTS


class Category(str, enum.Enum):
    GLOBAL_TONE = "GlobalTone"
    CONTRAST_ADJUST = "ContrastAdjust"
    COLOR_BALANCE = "ColorBalance"
    LOCAL_RETOUCH = "LocalRetouch"
    SEMANTIC_EDIT = "SemanticEdit"
    BACKGROUND_ALTER = "BackgroundAlter"
    GEOMETRIC = "Geometric"

    @classmethod
    def parse(cls, value: str) -> "Category":
        if isinstance(value, Category):
            return value
        for member in cls:
            if value in (member.value, member.name):
                return member
        raise ValueError(f"unknown action category {value!r}")


class Origin(str, enum.Enum):
    HEURISTIC = "Heuristic"
    EXTERNAL_PERCEIVER = "ExternalPerceiver"
    USER_GUIDED = "UserGuided"


@dataclass(frozen=True)
class ProceduralParams:
    operator: str
    params: tuple[tuple[str, float], ...] = ()

    @classmethod
    def of(cls, operator: str, **params: float) -> "ProceduralParams":
        return cls(operator, tuple(sorted((k, float(v)) for k, v in params.items())))

    def as_dict(self) -> dict[str, float]:
        return dict(self.params)


@dataclass(frozen=True)
class GenerativeInstruction:
    text: str


Payload = Union[ProceduralParams, GenerativeInstruction]


@dataclass(frozen=True)
class EditAction:
    id: str
    category: Category
    instruction: str
    payload: Payload
    origin: Origin = Origin.HEURISTIC

    def __post_init__(self):
        if not isinstance(self.payload, (ProceduralParams, GenerativeInstruction)):
            raise TypeError("payload must be ProceduralParams or GenerativeInstruction")
        if not self.id:
            raise ValueError("action id must be non-empty")

    @property
    def is_procedural(self) -> bool:
        return isinstance(self.payload, ProceduralParams)

    @property
    def signature(self) -> tuple:
        """Identity used for de-duplicating proposals."""
        return (self.category, self.payload)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id,
            "category": self.category.value,
            "instruction": self.instruction,
            "origin": self.origin.value,
        }
        if isinstance(self.payload, ProceduralParams):
            out["params"] = {"operator": self.payload.operator, **self.payload.as_dict()}
        else:
            out["params"] = None
        return out


@dataclass(frozen=True)
class ImageState:
    """An image plus the ids of the actions that produced it."""

    image: PixelImage
    step: int = 0
    history: tuple[str, ...] = ()
    cached_score: Any = None  # ScoreReport; typed loosely to avoid an import cycle

    def advance(self, action: EditAction, image: PixelImage, score=None) -> "ImageState":
        return ImageState(image, self.step + 1, self.history + (action.id,), score)

    def with_image(self, image: PixelImage) -> "ImageState":
        return ImageState(image, self.step, self.history, None)

    @property
    def digest(self) -> int:
        return content_hash(self.image)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "step": self.step,
            "history": list(self.history),
            "width": self.image.width,
            "height": self.image.height,
            "digest": f"{self.digest:016x}",
        }
        if self.cached_score is not None:
            out["score"] = self.cached_score.to_json()
        return out


def downscale(image: PixelImage, factor: Union[Scale, int, str]) -> PixelImage:
    """Box-filter reduction; output size is ``ceil(size / factor)``.

    Edge blocks that are cut short average only the pixels they contain.
    """
    f = int(Scale.parse(factor))
    if f == 1:
        return image
    px = image.pixels
    rows = np.arange(0, image.height, f)
    cols = np.arange(0, image.width, f)
    sums = np.add.reduceat(np.add.reduceat(px, rows, axis=0), cols, axis=1)
    rcount = np.diff(np.append(rows, image.height))
    ccount = np.diff(np.append(cols, image.width))
    counts = rcount[:, None, None] * ccount[None, :, None]
    return PixelImage(np.clip(sums / counts, 0.0, 1.0))


def content_hash(image: PixelImage) -> int:
    """64-bit digest of the 8-bit quantized image."""
    h = hashlib.blake2b(digest_size=8)
    h.update(np.asarray(image.shape, dtype=np.int64).tobytes())
    h.update(image.to_uint8().tobytes())
    return int.from_bytes(h.digest(), "big")


# -- file and wire I/O ------------------------------------------------------

def read_image(path: Union[str, Path]) -> PixelImage:
    with Image.open(path) as im:
        return PixelImage.from_uint8(np.asarray(im.convert("RGB")))


def write_image(image: PixelImage, path: Union[str, Path]) -> None:
    path = Path(path)
    im = Image.fromarray(image.to_uint8(), mode="RGB")
    if path.suffix.lower() in (".jpg", ".jpeg"):
        im.save(path, quality=95)
    else:
        im.save(path)


def encode_png_base64(image: PixelImage) -> str:
    buf = io.BytesIO()
    Image.fromarray(image.to_uint8(), mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_image_base64(data: str) -> PixelImage:
    """Decode a base64 PNG/JPEG. 8-bit and 16-bit encodings are rescaled into [0, 1]."""
    raw = base64.b64decode(data, validate=True)
    with Image.open(io.BytesIO(raw)) as im:
        if im.mode in ("I;16", "I;16B", "I;16L", "I"):
            arr = np.asarray(im, dtype=np.float64)
            hi = 65535.0 if im.mode.startswith("I;16") or arr.max() > 255 else 255.0
            return PixelImage.from_array(np.clip(arr / hi, 0.0, 1.0))
        return PixelImage.from_uint8(np.asarray(im.convert("RGB")))


def state_to_json(state: ImageState) -> str:
    return json.dumps(state.to_json())


def action_from_json(obj: Mapping[str, Any], origin: Origin = Origin.EXTERNAL_PERCEIVER) -> EditAction:
    """Build an action from its wire form. ``params`` null means a generative instruction."""
    params = obj.get("params")
    instruction = str(obj.get("instruction", ""))
    if params is None:
        payload: Payload = GenerativeInstruction(instruction)
    else:
        params = dict(params)
        operator = params.pop("operator")
        payload = ProceduralParams.of(str(operator), **{k: float(v) for k, v in params.items()})
    return EditAction(
        id=str(obj["id"]),
        category=Category.parse(obj["category"]),
        instruction=instruction,
        payload=payload,
        origin=origin,
    )
