"""Water masks from the Normalized Difference Water Index.

NDWI = (green - nir) / (green + nir), with 0/0 defined as 0. Pixels whose
index is at or above the threshold are water.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .data import _open
from .errors import ContractError, FormatError, ShapeError


def read_band(path) -> np.ndarray:
    """Single-channel 8- or 16-bit image file as reflectance in [0, 1] (float64)."""
    path = Path(path)
    im = _open(path)
    if im.mode == "L":
        return np.asarray(im, dtype=np.float64) / 255.0
    if im.mode.startswith("I;16") or im.mode == "I":
        values = np.asarray(im, dtype=np.float64)
        if values.min() < 0 or values.max() > 65535:
            raise FormatError(f"{path}: values outside the 16-bit range")
        return values / 65535.0
    raise FormatError(f"{path}: band must be a single 8- or 16-bit channel, got mode {im.mode!r}")


def compute_ndwi(green, nir) -> np.ndarray:
    green = np.asarray(green, dtype=np.float64)
    nir = np.asarray(nir, dtype=np.float64)
    if green.shape != nir.shape:
        raise ShapeError(f"band dimensions differ: {green.shape} vs {nir.shape}")
    if (green < 0).any() or (nir < 0).any():
        raise ContractError("band reflectances must be non-negative")
    total = green + nir
    safe = np.where(total == 0, 1.0, total)
    index = np.where(total == 0, 0.0, (green - nir) / safe)
    return np.clip(index, -1.0, 1.0)


def threshold_mask(index, t: float = 0.0) -> np.ndarray:
    return (np.asarray(index) >= t).astype(np.uint8)


def write_mask(mask: np.ndarray, path) -> None:
    """Write a 0/1 mask as an 8-bit {0, 255} PNG or PGM (chosen by suffix)."""
    Image.fromarray((np.asarray(mask) > 0).astype(np.uint8) * 255, mode="L").save(path)


def ndwi_mask_file(green_path, nir_path, out_path, threshold: float = 0.0) -> np.ndarray:
    mask = threshold_mask(compute_ndwi(read_band(green_path), read_band(nir_path)), threshold)
    write_mask(mask, out_path)
    return mask
