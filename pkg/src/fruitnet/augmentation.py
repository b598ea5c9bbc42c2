"""Train-time random perturbations and the five preprocessing scenarios.

A scenario fixes what the network sees: grayscale, plain RGB, HSV, HSV with a
grayscale channel appended, or the same with hue/saturation jitter and random
flips during training.  Test-mode preprocessing never consumes random draws.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidInputError
from .imaging import (
    Colorspace,
    RasterImage,
    concat_hsv_gray,
    hsv_to_rgb,
    rgb_to_gray,
    rgb_to_hsv,
)
from .seeding import RngStream


@dataclass(frozen=True)
class AugmentConfig:
    hue_max_delta: float = 0.02
    sat_lower: float = 0.9
    sat_upper: float = 1.2
    flip_prob: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.hue_max_delta <= 0.5:
            raise InvalidInputError(f"hue_max_delta must be in [0, 0.5], got {self.hue_max_delta}")
        if not 0.0 < self.sat_lower <= self.sat_upper:
            raise InvalidInputError(
                f"need 0 < sat_lower <= sat_upper, got {self.sat_lower}, {self.sat_upper}"
            )
        if not 0.0 <= self.flip_prob <= 1.0:
            raise InvalidInputError(f"flip_prob must be in [0, 1], got {self.flip_prob}")


DEFAULT_AUGMENT = AugmentConfig()


class Scenario(Enum):
    """The five input pipelines compared in the experiments."""

    GRAY = "gray"
    RGB = "rgb"
    HSV = "hsv"
    HSV_GRAY = "hsv_gray"
    HSV_GRAY_AUG = "hsv_gray_aug"

    @property
    def input_channels(self) -> int:
        return {
            Scenario.GRAY: 1,
            Scenario.RGB: 3,
            Scenario.HSV: 3,
            Scenario.HSV_GRAY: 4,
            Scenario.HSV_GRAY_AUG: 4,
        }[self]

    @classmethod
    def from_tag(cls, tag: str) -> "Scenario":
        try:
            return cls(tag.lower())
        except ValueError:
            valid = ", ".join(s.value for s in cls)
            raise InvalidInputError(f"unknown scenario {tag!r}; expected one of: {valid}") from None


def adjust_hue(img: RasterImage, delta: float) -> RasterImage:
    """Rotate hue by delta (mod 1) through an HSV round trip."""
    if img.colorspace is not Colorspace.RGB:
        raise InvalidInputError(f"adjust_hue expects an rgb image, got {img.colorspace.value}")
    if abs(delta) > 0.5:
        raise InvalidInputError(f"|delta| must be <= 0.5, got {delta}")
    hsv = rgb_to_hsv(img).pixels.copy()
    hsv[..., 0] = (hsv[..., 0] + delta) % 1.0
    return hsv_to_rgb(RasterImage(hsv, Colorspace.HSV))


def adjust_saturation(img: RasterImage, factor: float) -> RasterImage:
    """Scale saturation by factor, clamped to [0, 1], through an HSV round trip."""
    if img.colorspace is not Colorspace.RGB:
        raise InvalidInputError(f"adjust_saturation expects an rgb image, got {img.colorspace.value}")
    if factor <= 0:
        raise InvalidInputError(f"factor must be > 0, got {factor}")
    hsv = rgb_to_hsv(img).pixels.copy()
    hsv[..., 1] = np.clip(hsv[..., 1] * factor, 0.0, 1.0)
    return hsv_to_rgb(RasterImage(hsv, Colorspace.HSV))


def flip(img: RasterImage, axis: str) -> RasterImage:
    """Mirror the image horizontally (left-right) or vertically (top-bottom)."""
    if axis == "horizontal":
        return RasterImage(img.pixels[:, ::-1].copy(), img.colorspace)
    if axis == "vertical":
        return RasterImage(img.pixels[::-1].copy(), img.colorspace)
    raise InvalidInputError(f"axis must be 'horizontal' or 'vertical', got {axis!r}")


def _hsv_gray(img: RasterImage) -> RasterImage:
    return concat_hsv_gray(rgb_to_hsv(img), rgb_to_gray(img))


def preprocess(
    img: RasterImage,
    scenario: Scenario,
    mode: str,
    rng: RngStream | None = None,
    config: AugmentConfig = DEFAULT_AUGMENT,
) -> RasterImage:
    """Apply one scenario's pipeline to an RGB image.

    Only HSV_GRAY_AUG in train mode is random; its draw order is fixed as
    hue, saturation, horizontal flip, vertical flip so that equal seeds give
    equal outputs.  In test mode it degenerates to the HSV_GRAY pipeline.
    """
    if img.colorspace is not Colorspace.RGB:
        raise InvalidInputError(f"preprocess expects an rgb image, got {img.colorspace.value}")
    if mode not in ("train", "test"):
        raise InvalidInputError(f"mode must be 'train' or 'test', got {mode!r}")

    if scenario is Scenario.GRAY:
        return rgb_to_gray(img)
    if scenario is Scenario.RGB:
        return img
    if scenario is Scenario.HSV:
        return rgb_to_hsv(img)
    if scenario is Scenario.HSV_GRAY:
        return _hsv_gray(img)

    # HSV_GRAY_AUG
    if mode == "test":
        return _hsv_gray(img)
    if rng is None:
        raise InvalidInputError("train-mode hsv_gray_aug preprocessing needs an rng")
    img = adjust_hue(img, rng.uniform(-config.hue_max_delta, config.hue_max_delta))
    img = adjust_saturation(img, rng.uniform(config.sat_lower, config.sat_upper))
    if rng.random() < config.flip_prob:
        img = flip(img, "horizontal")
    if rng.random() < config.flip_prob:
        img = flip(img, "vertical")
    return _hsv_gray(img)


def preprocess_batch(
    images: np.ndarray,
    scenario: Scenario,
    mode: str,
    rng: RngStream | None = None,
    config: AugmentConfig = DEFAULT_AUGMENT,
) -> np.ndarray:
    """Preprocess a float RGB batch (b, h, w, 3) into (b, h, w, scenario channels).

    Images are processed in batch order with a single rng, so the result is a
    deterministic function of (batch, scenario, mode, rng state).
    """
    images = np.asarray(images)
    b, h, w, _ = images.shape
    out = np.empty((b, h, w, scenario.input_channels), dtype=np.float32)
    for i in range(b):
        img = RasterImage(images[i].astype(np.float64), Colorspace.RGB)
        out[i] = preprocess(img, scenario, mode, rng, config).pixels
    return out
