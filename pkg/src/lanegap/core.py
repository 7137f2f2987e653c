"""Image containers and decoding/encoding shared by every metric module.

All pixel data is 8-bit, row-major, channel-interleaved. Images are
immutable once constructed and safe to share across threads.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

BT601_WEIGHTS = (0.299, 0.587, 0.114)


class ValidationError(ValueError):
    """Bad inputs: malformed files, out-of-range parameters, contract violations."""


class ComputationError(RuntimeError):
    """Numerical failure that survived input validation."""


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit argument, else SIM2REAL_THREADS, else machine parallelism."""
    if threads is not None:
        if threads < 1:
            raise ValidationError(f"threads must be >= 1, got {threads}")
        return threads
    env = os.environ.get("SIM2REAL_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValidationError(f"SIM2REAL_THREADS must be an integer, got {env!r}")
        if n < 1:
            raise ValidationError(f"SIM2REAL_THREADS must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ImageBuffer:
    """8-bit raster, 1 (grayscale) or 3 (RGB) channels.

    `data` has shape (height, width, channels), dtype uint8, C-contiguous.
    """

    width: int
    height: int
    channels: int
    data: np.ndarray

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f"bad dimensions {self.width}x{self.height}")
        if self.channels not in (1, 3):
            raise ValidationError(f"channels must be 1 or 3, got {self.channels}")
        d = np.ascontiguousarray(self.data, dtype=np.uint8)
        if d.shape != (self.height, self.width, self.channels):
            raise ValidationError(
                f"data shape {d.shape} != ({self.height}, {self.width}, {self.channels})"
            )
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ImageBuffer":
        """Build from an (H, W) or (H, W, C) uint8-compatible array."""
        a = np.asarray(arr)
        if a.ndim == 2:
            a = a[:, :, None]
        if a.ndim != 3:
            raise ValidationError(f"expected 2-D or 3-D array, got ndim={a.ndim}")
        h, w, c = a.shape
        return cls(width=w, height=h, channels=c, data=a)

    def plane(self) -> np.ndarray:
        """The (H, W) view for 1-channel buffers."""
        if self.channels != 1:
            raise ValidationError("plane() requires a 1-channel buffer")
        return self.data[:, :, 0]


@dataclass(frozen=True)
class RegionOfInterest:
    """Axis-aligned crop window, top-left inclusive."""

    x0: int
    y0: int
    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f"ROI dims must be positive, got {self.width}x{self.height}")
        if self.x0 < 0 or self.y0 < 0:
            raise ValidationError(f"ROI origin must be non-negative, got ({self.x0},{self.y0})")

    def check_inside(self, img: ImageBuffer) -> None:
        if self.x0 + self.width > img.width or self.y0 + self.height > img.height:
            raise ValidationError(
                f"ROI {self} exceeds image {img.width}x{img.height}"
            )


@dataclass(frozen=True)
class ImageSet:
    """Homogeneous, path-ordered collection of images.

    Ordering is lexicographic by source path; it is the stable pairing key
    between generated and reference sets.
    """

    label: str
    images: tuple[ImageBuffer, ...]
    paths: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not self.images:
            raise ValidationError(f"image set {self.label!r} is empty")
        w, h, c = self.images[0].width, self.images[0].height, self.images[0].channels
        for i, img in enumerate(self.images):
            if (img.width, img.height, img.channels) != (w, h, c):
                name = self.paths[i] if i < len(self.paths) else f"#{i}"
                raise ValidationError(
                    f"heterogeneous dimensions in set {self.label!r}: {name} is "
                    f"{img.width}x{img.height}x{img.channels}, expected {w}x{h}x{c}"
                )

    def __len__(self) -> int:
        return len(self.images)


def load_image(path: str | Path) -> ImageBuffer:
    """Decode an 8-bit PNG, PGM (P5) or PPM (P6) file."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"unreadable file: {path}")
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("I", "I;16", "I;16B", "I;16L", "F"):
                raise ValidationError(f"unsupported bit depth (not 8-bit): {path}")
            if im.mode == "L":
                arr = np.asarray(im, dtype=np.uint8)[:, :, None]
            elif im.mode == "RGB":
                arr = np.asarray(im, dtype=np.uint8)
            elif im.mode in ("P", "LA", "RGBA", "1"):
                arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
            else:
                raise ValidationError(f"unsupported image mode {im.mode!r}: {path}")
    except UnidentifiedImageError:
        raise ValidationError(f"corrupt stream or unsupported format: {path}")
    except (OSError, SyntaxError) as e:
        raise ValidationError(f"corrupt stream: {path} ({e})")
    h, w, c = arr.shape
    return ImageBuffer(width=w, height=h, channels=c, data=arr)


def save_image(img: ImageBuffer, path: str | Path) -> None:
    """Encode to PNG, PGM or PPM according to the file extension."""
    path = Path(path)
    arr = img.data[:, :, 0] if img.channels == 1 else img.data
    mode = "L" if img.channels == 1 else "RGB"
    pil = Image.fromarray(arr, mode=mode)
    ext = path.suffix.lower()
    if ext == ".png":
        pil.save(path, format="PNG")
    elif ext == ".pgm":
        pil.convert("L").save(path, format="PPM")
    elif ext == ".ppm":
        pil.convert("RGB").save(path, format="PPM")
    else:
        raise ValidationError(f"unsupported output extension {ext!r} (png/pgm/ppm)")


def to_luminance(img: ImageBuffer) -> ImageBuffer:
    """BT.601 luminance; grayscale input passes through unchanged."""
    if img.channels == 1:
        return img
    r, g, b = BT601_WEIGHTS
    f = img.data.astype(np.float64)
    y = np.rint(r * f[:, :, 0] + g * f[:, :, 1] + b * f[:, :, 2])
    return ImageBuffer.from_array(y.astype(np.uint8))


def crop(img: ImageBuffer, roi: RegionOfInterest) -> ImageBuffer:
    roi.check_inside(img)
    sub = img.data[roi.y0 : roi.y0 + roi.height, roi.x0 : roi.x0 + roi.width, :]
    return ImageBuffer(width=roi.width, height=roi.height, channels=img.channels, data=sub.copy())


def load_image_set(directory: str | Path, pattern: str = "*", label: str | None = None) -> ImageSet:
    """Load every image matching `pattern`, sorted lexicographically by filename."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ValidationError(f"not a directory: {directory}")
    paths = sorted(p for p in directory.glob(pattern) if p.is_file())
    if not paths:
        raise ValidationError(f"no files match {pattern!r} in {directory}")
    images = tuple(load_image(p) for p in paths)
    return ImageSet(
        label=label if label is not None else directory.name,
        images=images,
        paths=tuple(str(p) for p in paths),
    )
