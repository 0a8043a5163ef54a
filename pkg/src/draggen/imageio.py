"""PNG and base64 helpers (Pillow-backed)."""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image

from draggen.errors import InvalidInputError


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)


def from_uint8(data: np.ndarray) -> np.ndarray:
    return data.astype(np.float64) / 255.0


def save_png(path, image: np.ndarray) -> None:
    """Save an (H, W, 3) float image in [0, 1] as RGB PNG."""
    Image.fromarray(to_uint8(image), mode="RGB").save(path, format="PNG")


def load_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return from_uint8(np.asarray(im.convert("RGB")))


def save_index_png(path, index_map: np.ndarray) -> None:
    """Save an int index map as single-channel PNG (value = index + 1, 0 = background)."""
    shifted = (np.asarray(index_map) + 1).astype(np.uint8)
    Image.fromarray(shifted, mode="L").save(path, format="PNG")


def load_index_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L")).astype(np.int32) - 1


def png_bytes(image: np.ndarray, mode: str = "RGB") -> bytes:
    buf = io.BytesIO()
    if mode == "L":
        Image.fromarray(np.asarray(image, dtype=np.uint8), mode="L").save(buf, format="PNG")
    else:
        Image.fromarray(to_uint8(image), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png_bytes(data: bytes, mode: str = "RGB") -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as im:
            if mode == "L":
                return np.asarray(im.convert("L"))
            return from_uint8(np.asarray(im.convert("RGB")))
    except Exception as exc:
        raise InvalidInputError(f"malformed PNG payload: {exc}") from exc


def b64_png(image: np.ndarray, mode: str = "RGB") -> str:
    return base64.b64encode(png_bytes(image, mode=mode)).decode("ascii")


def decode_b64_png(payload: str, mode: str = "RGB") -> np.ndarray:
    try:
        raw = base64.b64decode(payload, validate=True)
    except Exception as exc:
        raise InvalidInputError(f"invalid base64 image payload: {exc}") from exc
    return decode_png_bytes(raw, mode=mode)
