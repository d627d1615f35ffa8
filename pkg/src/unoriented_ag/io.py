"""Output helpers: PPM images and deterministic JSON."""
from __future__ import annotations

import colorsys
import json

import numpy as np

from .grid import Grid2D

_hsv = np.vectorize(colorsys.hsv_to_rgb, otypes=[float, float, float])


def ppm_rgb(v: np.ndarray, grid: Grid2D) -> np.ndarray:
    """8-bit RGB image of the director angle: hue ``(arg sigma(v) mod pi)/pi``, value ``clip(|v|, 0, 1)``.

    Rows run from the top (largest y) down; masked-out nodes are black.
    """
    v = np.asarray(v, dtype=complex)
    hue = np.mod(np.angle(v) / 2.0, np.pi) / np.pi
    hue = np.where(hue >= 1.0, 0.0, hue)
    val = np.where(grid.mask, np.clip(np.abs(v), 0.0, 1.0), 0.0)
    r, g, b = _hsv(hue, np.ones_like(hue), val)
    rgb = np.stack([r, g, b], axis=-1)
    return np.rint(rgb[::-1] * 255).astype(np.uint8)


def write_ppm(path, v: np.ndarray, grid: Grid2D) -> None:
    img = ppm_rgb(v, grid)
    h, w, _ = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6":
        raise ValueError("not a binary PPM")
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)


def _default(o):
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialise {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default)


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(obj) + "\n")
