"""Dataset discovery, train/validation split, decoding and batching.

Layout on disk::

    <root>/images/<stem>.(png|ppm|jpg|jpeg)
    <root>/masks/<stem>.(png|pgm)

Images become ``3 x S x S`` arrays in [0, 1] (bilinear resize, then /255);
masks become ``1 x S x S`` arrays of 0/1 (nearest resize, then >= 128).
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import rng
from .errors import ConfigurationError, DatasetError, FormatError, ImageReadError
from .tensor import get_dtype

IMAGE_SUFFIXES = (".png", ".ppm", ".jpg", ".jpeg")
MASK_SUFFIXES = (".png", ".pgm")
MASK_THRESHOLD = 128


class UnpairedFileWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    stem: str
    image_path: Path
    mask_path: Path


@dataclass
class Manifest:
    entries: list[ManifestEntry]
    root: Path | None = None

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]


@dataclass
class Sample:
    image: np.ndarray  # 3 x S x S, values in [0, 1]
    mask: np.ndarray  # 1 x S x S, values in {0, 1}


@dataclass
class Batch:
    images: np.ndarray  # N x 3 x S x S
    masks: np.ndarray  # N x 1 x S x S
    stems: list[str] = field(default_factory=list)

    def __len__(self):
        return self.images.shape[0]


def _index(directory: Path, suffixes) -> dict[str, Path]:
    found: dict[str, Path] = {}
    for path in sorted(directory.iterdir()):
        if not path.is_file() or path.suffix.lower() not in suffixes:
            continue
        if path.stem in found:
            raise DatasetError(f"stem {path.stem!r} appears twice in {directory}")
        found[path.stem] = path
    return found


def scan_dataset(root) -> Manifest:
    """Pair ``images/`` and ``masks/`` files by stem, in lexicographic stem order."""
    root = Path(root)
    image_dir, mask_dir = root / "images", root / "masks"
    for d in (image_dir, mask_dir):
        if not d.is_dir():
            raise ConfigurationError(f"missing dataset directory {d}")
    images = _index(image_dir, IMAGE_SUFFIXES)
    masks = _index(mask_dir, MASK_SUFFIXES)
    for stem in sorted(images.keys() ^ masks.keys()):
        path = images.get(stem) or masks[stem]
        warnings.warn(f"unpaired file ignored: {path}", UnpairedFileWarning, stacklevel=2)
    stems = sorted(images.keys() & masks.keys())
    if not stems:
        raise DatasetError(f"no image/mask pairs found under {root}")
    return Manifest([ManifestEntry(s, images[s], masks[s]) for s in stems], root)


def split_manifest(manifest: Manifest, train_fraction: float = 0.8,
                   seed: int = 0) -> tuple[Manifest, Manifest]:
    """Seeded shuffle, then the first ``floor(n * fraction)`` entries train."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigurationError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(manifest)
    if n < 2:
        raise DatasetError(f"need at least 2 entries to split, have {n}")
    order = rng.permutation(n, seed)
    cut = math.floor(n * train_fraction)
    train = [manifest.entries[i] for i in order[:cut]]
    val = [manifest.entries[i] for i in order[cut:]]
    return Manifest(train, manifest.root), Manifest(val, manifest.root)


def _open(path: Path) -> Image.Image:
    try:
        with Image.open(path) as im:
            im.load()
            return im
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise ImageReadError(f"cannot decode image {path}: {exc}") from exc


def _to_8bit(im: Image.Image, path: Path, target: str) -> np.ndarray:
    if im.mode in ("1", "L", "P", "RGB", "RGBA", "LA"):
        return np.asarray(im.convert(target), dtype=np.uint8)
    raise FormatError(f"{path}: unsupported pixel format {im.mode!r} (8-bit expected)")


def read_rgb(path) -> np.ndarray:
    """Decode to ``H x W x 3`` uint8; grayscale is replicated, alpha dropped."""
    path = Path(path)
    return _to_8bit(_open(path), path, "RGB")


def read_gray(path) -> np.ndarray:
    """Decode to ``H x W`` uint8; colour is reduced by ITU-R 601 luma."""
    path = Path(path)
    return _to_8bit(_open(path), path, "L")


def _axis_coords(n_in: int, n_out: int):
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0, n_in - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def resize_bilinear(img: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Half-pixel-centred bilinear resize of an ``H x W [x C]`` array (float64 out).

    Interpolates as ``a + t*(b - a)`` so constant regions stay exactly constant.
    """
    img = np.asarray(img, dtype=np.float64)
    out_h, out_w = size
    if img.shape[:2] == (out_h, out_w):
        return img.copy()
    r0, r1, tr = _axis_coords(img.shape[0], out_h)
    c0, c1, tc = _axis_coords(img.shape[1], out_w)
    extra = (1,) * (img.ndim - 2)
    tr = tr.reshape(-1, 1, *extra)
    rows = img[r0] + tr * (img[r1] - img[r0])
    tc = tc.reshape(1, -1, *extra)
    return rows[:, c0] + tc * (rows[:, c1] - rows[:, c0])


def resize_nearest(img: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    out_h, out_w = size
    rows = np.minimum(((np.arange(out_h) + 0.5) * img.shape[0] / out_h).astype(np.intp), img.shape[0] - 1)
    cols = np.minimum(((np.arange(out_w) + 0.5) * img.shape[1] / out_w).astype(np.intp), img.shape[1] - 1)
    return img[rows][:, cols]


def load_image(path, target_size: int = 256) -> np.ndarray:
    rgb = resize_bilinear(read_rgb(path), (target_size, target_size))
    return (rgb / 255.0).transpose(2, 0, 1).astype(get_dtype())


def load_mask(path, target_size: int = 256) -> np.ndarray:
    gray = resize_nearest(read_gray(path), (target_size, target_size))
    return (gray >= MASK_THRESHOLD).astype(get_dtype())[None]


def load_sample(entry: ManifestEntry, target_size: int = 256) -> Sample:
    return Sample(load_image(entry.image_path, target_size), load_mask(entry.mask_path, target_size))


def batch_indices(n: int, batch_size: int, seed: int = 0, epoch: int = 0,
                  shuffle: bool = True) -> list[list[int]]:
    """Index groups for one epoch; the last batch may be short.

    Shuffled order depends only on ``hash64(seed, epoch)``.
    """
    if batch_size < 1:
        raise ConfigurationError("batch_size must be >= 1")
    order = rng.permutation(n, rng.hash64(seed, epoch)) if shuffle else list(range(n))
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def make_batches(manifest: Manifest, batch_size: int, seed: int = 0, epoch: int = 0, *,
                 shuffle: bool = True, target_size: int = 256,
                 workers: int = 0) -> Iterator[Batch]:
    """Yield stacked batches lazily.

    With ``workers > 0`` samples are decoded on a thread pool; the emitted
    order is still fixed by ``(seed, epoch)``.
    """
    groups = batch_indices(len(manifest), batch_size, seed, epoch, shuffle)

    def assemble(samples: Sequence[Sample], idx) -> Batch:
        return Batch(np.stack([s.image for s in samples]), np.stack([s.mask for s in samples]),
                     [manifest.entries[i].stem for i in idx])

    if workers <= 0:
        for idx in groups:
            yield assemble([load_sample(manifest.entries[i], target_size) for i in idx], idx)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for idx in groups:
            samples = list(pool.map(lambda i: load_sample(manifest.entries[i], target_size), idx))
            yield assemble(samples, idx)
