"""Image decode helpers for the pixel metrics.

Decoding always lands on 8-bit per channel. Pixel metrics operate on luma
(ITU-R BT.601 weights) unless the caller asks for per-channel RGB.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from ..errors import ValidationError

BT601 = (0.299, 0.587, 0.114)


def load_image(path: str, mode: str = "luma") -> np.ndarray:
    """Decode to uint8: (H, W) luma by default, (H, W, 3) for mode='rgb'."""
    try:
        img = Image.open(path)
        img.load()
    except FileNotFoundError:
        raise ValidationError(f"image not found: {path}") from None
    except Exception as exc:
        raise ValidationError(f"cannot decode image {path}: {exc}") from None
    rgb = np.asarray(img.convert("RGB"), dtype=np.uint8)
    if mode == "rgb":
        return rgb
    if mode != "luma":
        raise ValidationError(f"unknown image mode {mode!r}")
    return rgb_to_luma(rgb)


def rgb_to_luma(rgb: np.ndarray) -> np.ndarray:
    luma = (BT601[0] * rgb[..., 0].astype(np.float64)
            + BT601[1] * rgb[..., 1].astype(np.float64)
            + BT601[2] * rgb[..., 2].astype(np.float64))
    return np.clip(np.rint(luma), 0, 255).astype(np.uint8)
