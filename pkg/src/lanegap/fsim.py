"""Feature-similarity index between paired images.

FSIM (Zhang et al., IEEE TIP 2011) combines a phase-congruency similarity
with a gradient-magnitude similarity, weighted by the pointwise maximum
phase congruency:

    S_PC = (2 PC1 PC2 + T1) / (PC1^2 + PC2^2 + T1)
    S_G  = (2 G1 G2 + T2) / (G1^2 + G2^2 + T2)
    FSIM = sum(S_PC * S_G * PCm) / sum(PCm),   PCm = max(PC1, PC2)

Phase congruency follows Kovesi's log-Gabor formulation: an oriented bank
of frequency-domain filters, per-orientation energy against a Rayleigh
noise threshold, normalized by total response amplitude. Filter banks are
cached per image shape because constructing them dominates small workloads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage

from .core import ImageBuffer, ImageSet, RegionOfInterest, ValidationError, crop, resolve_threads, to_luminance

# Ratio between the angular interval of filter orientations and the angular
# spread sigma; canonical value from the reference filter bank.
_D_THETA_ON_SIGMA = 1.2

# Scharr derivative kernel, the gradient operator used by the reference FSIM.
_SCHARR = np.array([[3.0, 0.0, -3.0], [10.0, 0.0, -10.0], [3.0, 0.0, -3.0]]) / 16.0

MIN_SIDE = 16


@dataclass(frozen=True)
class FsimParams:
    t1: float = 0.85
    t2: float = 160.0
    scales: int = 4
    orientations: int = 4
    min_wavelength: float = 6.0
    scale_mult: float = 2.0
    sigma_on_f: float = 0.55
    noise_k: float = 2.0

    def __post_init__(self):
        if min(self.t1, self.t2, self.min_wavelength, self.scale_mult, self.sigma_on_f, self.noise_k) <= 0:
            raise ValidationError("FSIM parameters must be positive")
        if self.scales < 2 or self.orientations < 2:
            raise ValidationError("need at least 2 scales and 2 orientations")

    def _bank_key(self) -> tuple:
        return (self.scales, self.orientations, self.min_wavelength, self.scale_mult, self.sigma_on_f)


@dataclass(frozen=True)
class PhaseCongruencyMap:
    width: int
    height: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.height, self.width):
            raise ValidationError(f"map shape {v.shape} != ({self.height}, {self.width})")
        if v.min(initial=0.0) < 0.0 or v.max(initial=0.0) > 1.0 + 1e-9:
            raise ValidationError("phase congruency values outside [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class GradientMap:
    width: int
    height: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.height, self.width):
            raise ValidationError(f"map shape {v.shape} != ({self.height}, {self.width})")
        if v.min(initial=0.0) < 0.0:
            raise ValidationError("gradient magnitude must be non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class LambdaCandidate:
    """One training-weight candidate: its label and the mean FSIM of its paired sets."""

    lambda_id: str
    mean_fsim: float | None = None
    ref_set: ImageSet | None = None
    gen_set: ImageSet | None = None


def _grid(n: int) -> np.ndarray:
    # Frequency axis in cycles/pixel, centered; even/odd lengths follow the
    # convention of the reference bank so filters match published behavior.
    if n % 2:
        return np.arange(-(n - 1) // 2, (n - 1) // 2 + 1) / float(n - 1)
    return np.arange(-n // 2, n // 2) / float(n)


@lru_cache(maxsize=4)
def _filter_bank(h: int, w: int, scales: int, orientations: int,
                 min_wavelength: float, mult: float, sigma_on_f: float):
    """Log-Gabor filters plus the scalar noise-model constants per orientation.

    Returns (filters[o][s] arrays with DC at [0,0], em0, sum_an2, sum_ai_aj)
    where em0 is the squared norm of the smallest-scale filter and the other
    two are spatial-domain autocorrelation sums used by the noise estimate.
    """
    x = _grid(w)[None, :]
    y = _grid(h)[:, None]
    radius_centered = np.sqrt(x * x + y * y)
    # Butterworth low-pass keeps the corner frequencies out of every filter.
    lowpass = np.fft.ifftshift(1.0 / (1.0 + (radius_centered / 0.45) ** 30))
    radius = np.fft.ifftshift(radius_centered)
    radius[0, 0] = 1.0
    theta = np.fft.ifftshift(np.arctan2(-np.broadcast_to(y, (h, w)), np.broadcast_to(x, (h, w))))
    sintheta, costheta = np.sin(theta), np.cos(theta)

    log_gabor = []
    for s in range(scales):
        f0 = 1.0 / (min_wavelength * mult**s)
        g = np.exp(-(np.log(radius / f0) ** 2) / (2.0 * math.log(sigma_on_f) ** 2))
        g *= lowpass
        g[0, 0] = 0.0
        log_gabor.append(g)

    theta_sigma = math.pi / orientations / _D_THETA_ON_SIGMA
    spreads = []
    for o in range(orientations):
        angle = o * math.pi / orientations
        ds = sintheta * math.cos(angle) - costheta * math.sin(angle)
        dc = costheta * math.cos(angle) + sintheta * math.sin(angle)
        dtheta = np.abs(np.arctan2(ds, dc))
        spreads.append(np.exp(-(dtheta**2) / (2.0 * theta_sigma**2)))

    filters = [[log_gabor[s] * spreads[o] for s in range(scales)] for o in range(orientations)]

    scale_root = math.sqrt(h * w)
    em0, sum_an2, sum_ai_aj = [], [], []
    for o in range(orientations):
        em0.append(float(np.sum(filters[o][0] ** 2)))
        spatial = [np.real(np.fft.ifft2(filters[o][s])) * scale_root for s in range(scales)]
        sum_an2.append(float(sum(np.sum(sp * sp) for sp in spatial)))
        cross = 0.0
        for si in range(scales - 1):
            for sj in range(si + 1, scales):
                cross += float(np.sum(spatial[si] * spatial[sj]))
        sum_ai_aj.append(cross)
    return filters, tuple(em0), tuple(sum_an2), tuple(sum_ai_aj)


def phase_congruency(img: ImageBuffer, p: FsimParams = FsimParams()) -> PhaseCongruencyMap:
    """Kovesi-style phase congruency of a 1-channel image, values in [0, 1]."""
    if img.channels != 1:
        raise ValidationError("phase_congruency expects a 1-channel image")
    if min(img.width, img.height) < MIN_SIDE:
        raise ValidationError(f"image too small for phase congruency (min side {MIN_SIDE})")
    h, w = img.height, img.width
    filters, em0, sum_an2, sum_ai_aj = _filter_bank(h, w, *p._bank_key())

    eps = 1e-10
    image_fft = np.fft.fft2(img.plane().astype(np.float64))
    energy_all = np.zeros((h, w))
    an_all = np.zeros((h, w))
    for o in range(p.orientations):
        eo = [np.fft.ifft2(image_fft * filters[o][s]) for s in range(p.scales)]
        an = [np.abs(e) for e in eo]
        sum_an = np.sum(an, axis=0)
        sum_e = np.sum([e.real for e in eo], axis=0)
        sum_o = np.sum([e.imag for e in eo], axis=0)

        x_energy = np.sqrt(sum_e**2 + sum_o**2) + eps
        mean_e, mean_o = sum_e / x_energy, sum_o / x_energy
        energy = np.zeros((h, w))
        for e in eo:
            energy += e.real * mean_e + e.imag * mean_o - np.abs(e.real * mean_o - e.imag * mean_e)

        # Rayleigh noise threshold estimated from the smallest-scale response.
        median_e2n = float(np.median(an[0] ** 2))
        mean_e2n = median_e2n / math.log(2.0)
        noise_power = mean_e2n / em0[o]
        noise_energy2 = 2.0 * noise_power * sum_an2[o] + 4.0 * noise_power * sum_ai_aj[o]
        tau = math.sqrt(noise_energy2 / 2.0)
        threshold = (tau * math.sqrt(math.pi / 2.0) + p.noise_k * math.sqrt((2.0 - math.pi / 2.0) * tau**2)) / 1.7

        energy_all += np.maximum(energy - threshold, 0.0)
        an_all += sum_an

    pc = energy_all / (an_all + eps)
    return PhaseCongruencyMap(width=w, height=h, values=np.clip(pc, 0.0, 1.0))


def gradient_magnitude(img: ImageBuffer) -> GradientMap:
    """Scharr gradient magnitude with replicated borders."""
    if img.channels != 1:
        raise ValidationError("gradient_magnitude expects a 1-channel image")
    if img.width < 3 or img.height < 3:
        raise ValidationError("image too small for a 3x3 gradient")
    f = img.plane().astype(np.float64)
    gx = ndimage.correlate(f, _SCHARR, mode="nearest")
    gy = ndimage.correlate(f, _SCHARR.T, mode="nearest")
    return GradientMap(width=img.width, height=img.height, values=np.hypot(gx, gy))


def fsim_score(a: ImageBuffer, b: ImageBuffer, p: FsimParams = FsimParams()) -> float:
    """FSIM between two images of identical dimensions (luminance only)."""
    if (a.width, a.height) != (b.width, b.height):
        raise ValidationError(
            f"dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    la, lb = to_luminance(a), to_luminance(b)
    pc1 = phase_congruency(la, p).values
    pc2 = phase_congruency(lb, p).values
    g1 = gradient_magnitude(la).values
    g2 = gradient_magnitude(lb).values

    s_pc = (2.0 * pc1 * pc2 + p.t1) / (pc1**2 + pc2**2 + p.t1)
    s_g = (2.0 * g1 * g2 + p.t2) / (g1**2 + g2**2 + p.t2)
    pc_m = np.maximum(pc1, pc2)
    denom = float(np.sum(pc_m))
    if denom == 0.0:
        # No phase structure in either image; vacuously similar.
        return 1.0
    return float(np.sum(s_pc * s_g * pc_m) / denom)


def mean_fsim(
    ref_set: ImageSet,
    gen_set: ImageSet,
    roi: RegionOfInterest | None = None,
    p: FsimParams = FsimParams(),
    threads: int | None = None,
) -> float:
    """Mean FSIM over index-paired images, optionally ROI-cropped first.

    Sets loaded through `load_image_set` are filename-sorted, so index
    pairing matches the generated-from-source filename pairing.
    """
    if len(ref_set) != len(gen_set):
        raise ValidationError(
            f"paired sets differ in length: {len(ref_set)} vs {len(gen_set)}"
        )

    def score(pair: tuple[ImageBuffer, ImageBuffer]) -> float:
        ra, gb = pair
        if roi is not None:
            ra, gb = crop(ra, roi), crop(gb, roi)
        return fsim_score(ra, gb, p)

    pairs = list(zip(ref_set.images, gen_set.images))
    n_workers = min(resolve_threads(threads), len(pairs))
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            scores = list(pool.map(score, pairs))
    else:
        scores = [score(pair) for pair in pairs]
    return float(sum(scores) / len(scores))


def default_fsim_roi(width: int, height: int, band_height: int = 245, bottom_margin: int = 130) -> RegionOfInterest:
    """Full-width band that excludes the far background and the car bonnet.

    For the stock 808x620 frame this selects rows 245..489 (height 245,
    ending 130 px above the bottom). Smaller frames shrink the band.
    """
    y0 = max(0, height - bottom_margin - band_height)
    band = min(band_height, height - y0)
    return RegionOfInterest(x0=0, y0=y0, width=width, height=band)


def _numeric_id(lambda_id: str) -> tuple:
    try:
        return (0, float(lambda_id), lambda_id)
    except ValueError:
        return (1, 0.0, lambda_id)


def score_candidates(
    candidates: list[LambdaCandidate],
    roi: RegionOfInterest | None = None,
    p: FsimParams = FsimParams(),
    threads: int | None = None,
) -> list[LambdaCandidate]:
    """Fill mean_fsim for candidates that carry paired sets."""
    out = []
    for c in candidates:
        if c.mean_fsim is not None:
            out.append(c)
            continue
        if c.ref_set is None or c.gen_set is None:
            raise ValidationError(f"candidate {c.lambda_id!r} has neither a score nor paired sets")
        out.append(
            LambdaCandidate(
                lambda_id=c.lambda_id,
                mean_fsim=mean_fsim(c.ref_set, c.gen_set, roi=roi, p=p, threads=threads),
            )
        )
    return out


def select_lambda(candidates: list[LambdaCandidate]) -> str:
    """Candidate with the highest mean FSIM; ties go to the numerically smallest id."""
    if not candidates:
        raise ValidationError("no candidates to select from")
    for c in candidates:
        if c.mean_fsim is None:
            raise ValidationError(f"candidate {c.lambda_id!r} has no mean_fsim")
    best = min(candidates, key=lambda c: (-c.mean_fsim, _numeric_id(c.lambda_id)))
    return best.lambda_id
