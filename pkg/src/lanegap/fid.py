"""Fréchet distance between Gaussian-fitted feature distributions.

The distance between two image sets is the 2-Wasserstein distance between
Gaussians (mu, Sigma) fitted to per-image feature embeddings:

    d^2 = |mu_a - mu_b|^2 + Tr(Sigma_a + Sigma_b - 2 (Sigma_a^1/2 Sigma_b Sigma_a^1/2)^1/2)

The symmetric-product form under the trace is analytically equal to the
usual (Sigma_a Sigma_b)^1/2 term but keeps every matrix square root on a
symmetric PSD operand, so a symmetric eigensolver suffices.

A built-in deterministic extractor (luminance -> bilinear 32x32 -> fixed-seed
Gaussian projection) stands in for a deep network: absolute values are not
comparable to deep-feature scores, but orderings between parametrically
close/far sets are preserved.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    ComputationError,
    ImageBuffer,
    ImageSet,
    ValidationError,
    resolve_threads,
    to_luminance,
)

S2RF_MAGIC = b"S2RF"
S2RF_VERSION = 1
PATCH_SIDE = 32
MAX_BUILTIN_DIM = PATCH_SIDE * PATCH_SIDE

# Numeric floor below which a Frechet value is treated as exactly zero.
NEGATIVE_FLOOR = -1e-6


@dataclass(frozen=True)
class FeatureMatrix:
    """n x d matrix of per-image embeddings, one row per image."""

    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValidationError(f"feature matrix must be 2-D, got shape {v.shape}")
        if v.shape[0] < 1:
            raise ValidationError("feature matrix needs at least one row")
        if not np.all(np.isfinite(v)):
            raise ValidationError("feature matrix contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class GaussianStats:
    """Fitted mean vector and symmetric covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        c = np.asarray(self.cov, dtype=np.float64)
        if c.shape != (m.size, m.size):
            raise ValidationError(f"cov shape {c.shape} does not match mean length {m.size}")
        scale = max(1.0, float(np.abs(c).max(initial=0.0)))
        if np.abs(c - c.T).max(initial=0.0) > 1e-9 * scale:
            raise ValidationError("covariance is not symmetric within tolerance")
        m.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", c)

    @property
    def d(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class FidReport:
    labels: tuple[str, str]
    value: float
    d: int
    n_a: int
    n_b: int
    regularized: bool

    def __post_init__(self):
        if self.value < NEGATIVE_FLOOR:
            raise ValidationError(f"FID value {self.value} below numeric floor")


def _bilinear_resize(plane: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample with half-pixel-aligned sample centers."""
    in_h, in_w = plane.shape
    ys = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    y0 = np.clip(np.floor(ys), 0, in_h - 1).astype(np.intp)
    x0 = np.clip(np.floor(xs), 0, in_w - 1).astype(np.intp)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)[:, None]
    wx = np.clip(xs - x0, 0.0, 1.0)[None, :]
    p = plane.astype(np.float64)
    top = p[np.ix_(y0, x0)] * (1 - wx) + p[np.ix_(y0, x1)] * wx
    bot = p[np.ix_(y1, x0)] * (1 - wx) + p[np.ix_(y1, x1)] * wx
    return top * (1 - wy[:, :1]) + bot * wy[:, :1]


def _projection(d: int, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fixed-seed Gaussian projection and standardization constants.

    The shift is each feature's response to a flat mid-gray patch; the scale
    is its response std under i.i.d. uniform pixels. Both depend only on the
    drawn projection, hence only on (d, seed).
    """
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((MAX_BUILTIN_DIM, d))
    shift = 0.5 * w.sum(axis=0)
    scale = np.linalg.norm(w, axis=0) / np.sqrt(12.0)
    return w, shift, scale


def _embed(img: ImageBuffer, w: np.ndarray, shift: np.ndarray, scale: np.ndarray) -> np.ndarray:
    lum = to_luminance(img).plane().astype(np.float64) / 255.0
    patch = _bilinear_resize(lum, PATCH_SIDE, PATCH_SIDE).reshape(-1)
    return (patch @ w - shift) / scale


def builtin_features(
    image_set: ImageSet, d: int = 64, seed: int = 0, threads: int | None = None
) -> FeatureMatrix:
    """Deterministic per-image embeddings for an image set.

    Each image is reduced to luminance, bilinearly downscaled to 32x32,
    flattened and projected through a fixed-seed Gaussian matrix, then
    standardized with constants baked from the same seed. Identical
    (image bytes, d, seed) always yield identical features.
    """
    if d > MAX_BUILTIN_DIM:
        raise ValidationError(f"builtin extractor supports d <= {MAX_BUILTIN_DIM}, got {d}")
    if d < 1:
        raise ValidationError(f"d must be >= 1, got {d}")
    w, shift, scale = _projection(d, seed)
    n_workers = min(resolve_threads(threads), len(image_set))
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(lambda im: _embed(im, w, shift, scale), image_set.images))
    else:
        rows = [_embed(im, w, shift, scale) for im in image_set.images]
    return FeatureMatrix(values=np.vstack(rows), label=image_set.label)


def fit_gaussian(feats: FeatureMatrix) -> GaussianStats:
    """Column means and unbiased (n-1) sample covariance, symmetrized."""
    if feats.n < 2:
        raise ValidationError(f"need at least 2 samples to fit a covariance, got {feats.n}")
    x = feats.values
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (feats.n - 1)
    cov = (cov + cov.T) / 2.0
    return GaussianStats(mean=mean, cov=cov)


def sqrtm_psd(m: np.ndarray, asym_tol: float = 1e-8) -> np.ndarray:
    """Principal square root of a symmetric PSD matrix.

    Eigendecomposes with a symmetric solver, clamps negative eigenvalues
    (roundoff) to zero and reconstructs V diag(sqrt(lambda)) V^T.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix contains non-finite entries")
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if np.abs(m - m.T).max(initial=0.0) > asym_tol * scale:
        raise ValidationError("matrix is not symmetric within tolerance")
    eigvals, eigvecs = np.linalg.eigh((m + m.T) / 2.0)
    root = eigvecs @ np.diag(np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.T
    return (root + root.T) / 2.0


def _frechet_core(a: GaussianStats, b: GaussianStats) -> float:
    sa = sqrtm_psd(a.cov)
    inner = sa @ b.cov @ sa
    root = sqrtm_psd((inner + inner.T) / 2.0)
    if not np.all(np.isfinite(root)):
        raise ComputationError("non-finite matrix square root")
    diff = a.mean - b.mean
    return float(diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * np.trace(root))


def frechet_distance(
    a: GaussianStats, b: GaussianStats, return_regularized: bool = False
) -> float | tuple[float, bool]:
    """Fréchet (2-Wasserstein) distance between two Gaussians.

    On numerical failure of the inner square root the covariances are
    retried once with +1e-6 I; `return_regularized=True` additionally
    reports whether that retry fired.
    """
    if a.d != b.d:
        raise ValidationError(f"dimension mismatch: {a.d} vs {b.d}")
    regularized = False
    try:
        value = _frechet_core(a, b)
    except (np.linalg.LinAlgError, ComputationError):
        regularized = True
        eps = 1e-6 * np.eye(a.d)
        a = GaussianStats(mean=a.mean, cov=a.cov + eps)
        b = GaussianStats(mean=b.mean, cov=b.cov + eps)
        try:
            value = _frechet_core(a, b)
        except (np.linalg.LinAlgError, ComputationError) as e:
            raise ComputationError(f"Frechet distance non-finite after regularization: {e}")
    if not np.isfinite(value):
        raise ComputationError("Frechet distance is non-finite")
    if value < 0.0:
        if value < NEGATIVE_FLOOR:
            raise ComputationError(f"Frechet distance {value} below numeric floor")
        value = 0.0
    if return_regularized:
        return value, regularized
    return value


def _as_features(
    source: ImageSet | FeatureMatrix, d: int, seed: int, threads: int | None
) -> FeatureMatrix:
    if isinstance(source, FeatureMatrix):
        return source
    return builtin_features(source, d=d, seed=seed, threads=threads)


def fid_between_sets(
    a: ImageSet | FeatureMatrix,
    b: ImageSet | FeatureMatrix,
    d: int = 64,
    seed: int = 0,
    threads: int | None = None,
) -> FidReport:
    """FID between two image sets (or precomputed feature matrices)."""
    fa = _as_features(a, d, seed, threads)
    fb = _as_features(b, d, seed, threads)
    if fa.d != fb.d:
        raise ValidationError(f"feature dimensionality mismatch: {fa.d} vs {fb.d}")
    value, regularized = frechet_distance(
        fit_gaussian(fa), fit_gaussian(fb), return_regularized=True
    )
    return FidReport(
        labels=(fa.label, fb.label),
        value=value,
        d=fa.d,
        n_a=fa.n,
        n_b=fb.n,
        regularized=regularized,
    )


@dataclass(frozen=True)
class FidMatrix:
    labels: tuple[str, ...]
    values: np.ndarray  # symmetric, zero diagonal
    regularized: bool


def fid_matrix(
    sets: list[ImageSet | FeatureMatrix],
    d: int = 64,
    seed: int = 0,
    threads: int | None = None,
) -> FidMatrix:
    """Pairwise FID table over an ordered list of sets; features extracted once per set."""
    if len(sets) < 2:
        raise ValidationError("fid_matrix needs at least 2 sets")
    feats = [_as_features(s, d, seed, threads) for s in sets]
    dims = {f.d for f in feats}
    if len(dims) != 1:
        raise ValidationError(f"feature dimensionality mismatch across sets: {sorted(dims)}")
    stats = [fit_gaussian(f) for f in feats]
    k = len(feats)
    table = np.zeros((k, k))
    any_reg = False
    for i in range(k):
        for j in range(i + 1, k):
            value, reg = frechet_distance(stats[i], stats[j], return_regularized=True)
            table[i, j] = table[j, i] = value
            any_reg = any_reg or reg
    table.setflags(write=False)
    return FidMatrix(labels=tuple(f.label for f in feats), values=table, regularized=any_reg)


def write_feature_file(feats: FeatureMatrix, path: str | Path) -> None:
    """Write the binary interchange format (magic 'S2RF', little-endian).

    Layout: 4-byte magic, u32 version=1, u32 n, u32 d, then n*d IEEE-754
    binary32 values, row-major. Exact size is 16 + 4*n*d bytes.
    """
    payload = np.ascontiguousarray(feats.values, dtype="<f4").tobytes()
    header = S2RF_MAGIC + struct.pack("<III", S2RF_VERSION, feats.n, feats.d)
    Path(path).write_bytes(header + payload)


def read_feature_file(path: str | Path, label: str | None = None) -> FeatureMatrix:
    """Read an S2RF feature file; the round trip is bit-exact in float32."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 16 or raw[:4] != S2RF_MAGIC:
        raise ValidationError(f"bad magic in {path}")
    version, n, d = struct.unpack("<III", raw[4:16])
    if version != S2RF_VERSION:
        raise ValidationError(f"unknown feature file version {version} in {path}")
    expected = 16 + 4 * n * d
    if len(raw) != expected:
        raise ValidationError(
            f"size mismatch in {path}: header declares {n}x{d} "
            f"({expected} bytes), file has {len(raw)}"
        )
    values = np.frombuffer(raw[16:], dtype="<f4").reshape(n, d)
    return FeatureMatrix(values=values, label=label if label is not None else path.stem)
