"""Image and kernel files, plus the rendering used for figures.

Grayscale PNGs store integers that map linearly onto a value range; the
range is written to a JSON sidecar ``<file>.meta`` so that reading the file
back restores the original scale.  ``matrixText`` files hold one image row
per line with full double precision and round-trip exactly.
"""

import json
import os
from typing import Optional, Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from .core import as_image
from .errors import CorruptFile, NonFiniteInput, UnsupportedFormat
from .metrics import kernel_centroid
from .regularizers import grayscale

__all__ = [
    "FORMATS",
    "PARULA_LUT",
    "write_image",
    "read_image",
    "read_rgb",
    "read_meta",
    "render_image",
    "render_kernel",
    "save_raster",
]

FORMATS = ("png8", "png16", "matrixText")
_MAXVAL = {"png8": 255, "png16": 65535}

# Anchor colors of a parula-like map (dark blue -> teal -> yellow), sampled
# at equally spaced positions and linearly interpolated to 256 entries.
_PARULA_ANCHORS = np.array([
    [0.2081, 0.1663, 0.5292],
    [0.0592, 0.3599, 0.8684],
    [0.0780, 0.5041, 0.8385],
    [0.0232, 0.6419, 0.7914],
    [0.1802, 0.7178, 0.6425],
    [0.4906, 0.7573, 0.4420],
    [0.8082, 0.7436, 0.2956],
    [0.9966, 0.7653, 0.2166],
    [0.9763, 0.9831, 0.0538],
])


def _build_lut(anchors, size=256):
    pos = np.linspace(0.0, 1.0, len(anchors))
    t = np.linspace(0.0, 1.0, size)
    table = np.stack([np.interp(t, pos, anchors[:, c]) for c in range(3)], axis=1)
    return np.round(table * 255.0).astype(np.uint8)


PARULA_LUT = _build_lut(_PARULA_ANCHORS)
GRAY_LUT = np.repeat(np.arange(256, dtype=np.uint8)[:, None], 3, axis=1)


def _meta_path(path) -> str:
    return os.fspath(path) + ".meta"


def _infer_format(path) -> str:
    ext = os.path.splitext(os.fspath(path))[1].lower()
    if ext == ".png":
        return "png16"
    if ext in (".txt", ".dat", ".mat"):
        return "matrixText"
    raise UnsupportedFormat(f"cannot infer an image format from {path!r}")


def write_image(path, u, fmt: Optional[str] = None, value_scale: Optional[Tuple[float, float]] = None,
                provenance: Optional[dict] = None) -> str:
    """Write a single-channel image and its ``.meta`` sidecar.

    For PNG formats ``value_scale=(lo, hi)`` maps ``lo`` to 0 and ``hi`` to
    the largest integer; values outside are clipped.  It defaults to the
    image range.  Returns the path written.
    """
    fmt = _infer_format(path) if fmt is None else fmt
    if fmt not in FORMATS:
        raise UnsupportedFormat(f"format must be one of {FORMATS}, got {fmt!r}")
    u = as_image(u)
    path = os.fspath(path)
    meta = {"shape": list(u.shape), "format": fmt, "provenance": provenance or {}}
    if fmt == "matrixText":
        np.savetxt(path, u, fmt="%.17g", delimiter=" ")
        meta["value_scale"] = None
    else:
        if value_scale is None:
            value_scale = (float(u.min()), float(u.max()))
        lo, hi = (float(v) for v in value_scale)
        span = hi - lo if hi > lo else 1.0
        top = _MAXVAL[fmt]
        ints = np.round(np.clip((u - lo) / span, 0.0, 1.0) * top)
        if fmt == "png8":
            Image.fromarray(ints.astype(np.uint8)).save(path)
        else:
            Image.fromarray(ints.astype(np.uint16)).save(path)
        meta["value_scale"] = [lo, hi]
    with open(_meta_path(path), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return path


def read_meta(path) -> Optional[dict]:
    """The sidecar of ``path`` as a dict, or ``None`` if there is none."""
    meta = _meta_path(path)
    if not os.path.exists(meta):
        return None
    try:
        with open(meta) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise CorruptFile(f"unreadable metadata {meta!r}: {exc}") from exc


def _open_png(path):
    try:
        with Image.open(path) as img:
            img.load()
            return img.copy()
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise CorruptFile(f"cannot decode {path!r}: {exc}") from exc


def _read_matrix(path):
    try:
        data = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise CorruptFile(f"malformed matrix text in {path!r}: {exc}") from exc
    if data.size == 0:
        raise CorruptFile(f"{path!r} holds no values")
    if not np.all(np.isfinite(data)):
        raise NonFiniteInput(f"{path!r} contains NaN or Inf")
    return data


def read_image(path) -> np.ndarray:
    """Read a single-channel image as float64.

    PNGs with a sidecar are mapped back through its value range; without a
    sidecar integers are scaled to ``[0, 1]``.  Color PNGs are converted with
    the luminance weights of :func:`specfuse.regularizers.grayscale`.
    """
    path = os.fspath(path)
    ext = os.path.splitext(path)[1].lower()
    if ext != ".png":
        if ext in (".txt", ".dat", ".mat"):
            return _read_matrix(path)
        raise UnsupportedFormat(f"unsupported image file {path!r}")
    img = _open_png(path)
    if img.mode in ("RGB", "RGBA", "P"):
        return grayscale(np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0)
    if img.mode in ("L", "LA"):
        ints, top = np.asarray(img.convert("L"), dtype=np.float64), 255.0
    elif img.mode.startswith("I"):
        ints, top = np.asarray(img, dtype=np.float64), 65535.0
    else:
        raise UnsupportedFormat(f"unsupported PNG mode {img.mode!r} in {path!r}")
    meta = read_meta(path)
    unit = ints / top
    if meta and meta.get("value_scale"):
        lo, hi = meta["value_scale"]
        span = hi - lo if hi > lo else 1.0
        return lo + span * unit
    return unit


def read_rgb(path) -> np.ndarray:
    """Read a color image as ``(rows, cols, 3)`` float64 in ``[0, 1]``."""
    path = os.fspath(path)
    if os.path.splitext(path)[1].lower() not in (".png", ".jpg", ".jpeg", ".tif", ".tiff", ".bmp"):
        raise UnsupportedFormat(f"unsupported color image {path!r}")
    img = _open_png(path)
    return np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0


def render_image(u, colormap: str = "parula") -> np.ndarray:
    """Map ``u`` (clamped to [0, 1]) through a 256-entry table; ``uint8`` RGB."""
    if colormap not in ("parula", "gray"):
        raise UnsupportedFormat(f"colormap must be 'parula' or 'gray', got {colormap!r}")
    u = as_image(u)
    idx = np.round(np.clip(u, 0.0, 1.0) * 255.0).astype(np.intp)
    lut = PARULA_LUT if colormap == "parula" else GRAY_LUT
    return lut[idx]


def render_kernel(k) -> np.ndarray:
    """Gray kernel image with a red cross at the center tap and a green one at the centroid.

    Crosses span the whole raster and are one pixel wide; where a red and a
    green line meet the pixel is yellow.
    """
    k = as_image(k, "kernel")
    c1, c2 = kernel_centroid(k)  # raises NotNormalized
    lo, hi = float(k.min()), float(k.max())
    gray = (k - lo) / (hi - lo) if hi > lo else np.full(k.shape, 0.5)
    rgb = np.repeat(np.round(gray * 255.0).astype(np.uint8)[..., None], 3, axis=2)
    red = np.zeros(k.shape, dtype=bool)
    green = np.zeros(k.shape, dtype=bool)
    red[(k.shape[0] - 1) // 2, :] = True
    red[:, (k.shape[1] - 1) // 2] = True
    g1 = int(np.clip(np.floor(c1 + 0.5) - 1, 0, k.shape[0] - 1))
    g2 = int(np.clip(np.floor(c2 + 0.5) - 1, 0, k.shape[1] - 1))
    green[g1, :] = True
    green[:, g2] = True
    rgb[red] = (255, 0, 0)
    rgb[green] = (0, 255, 0)
    rgb[red & green] = (255, 255, 0)
    return rgb


def save_raster(path, rgb, scale: int = 1) -> str:
    """Save a ``uint8`` RGB raster as PNG, optionally enlarged by pixel replication."""
    rgb = np.asarray(rgb, dtype=np.uint8)
    if scale > 1:
        rgb = np.repeat(np.repeat(rgb, scale, axis=0), scale, axis=1)
    Image.fromarray(rgb).save(os.fspath(path))
    return os.fspath(path)
