"""Depth estimation from histograms and distinguishability analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from . import rng as rngmod
from .config import SystemConfig, TargetPatch
from .errors import DomainError
from .fisher import crb_sigma_star, fisher_per_pulse, min_distinguishability
from .likelihood import FWHM_PER_SIGMA, build_model, sigma_from_fwhm, total_alpha
from .radiometry import LIGHT_SPEED
from .scene import EMPTY_HISTOGRAM, OK, DepthImage
from .spad_sampler import Histogram, HistogramCube, first_photon_bins

_HALF_C = 0.5 * LIGHT_SPEED


class EmptyHistogramError(ValueError):
    """The histogram holds no counts, so there is no peak to locate."""


@dataclass(frozen=True)
class MatchFilterSpec:
    kernel_sigma: float  # s
    kernel_truncation: float = 4.0  # kernel half-width in sigmas
    refinement: str = "off"  # "off" | "parabolic"

    def __post_init__(self):
        if not self.kernel_sigma > 0:
            raise DomainError("kernel_sigma must be > 0")
        if self.kernel_truncation < 3:
            raise DomainError("kernel_truncation must be >= 3")
        if self.refinement not in ("off", "parabolic"):
            raise DomainError("refinement must be 'off' or 'parabolic'")

    @classmethod
    def for_config(cls, config: SystemConfig, **kw):
        """Kernel matched to the configured pulse width."""
        return cls(sigma_from_fwhm(config.laser.pulse_fwhm), **kw)

    def kernel(self, bin_width):
        half = int(math.ceil(self.kernel_truncation * self.kernel_sigma / bin_width))
        offsets = np.arange(-half, half + 1) * bin_width
        return np.exp(-0.5 * (offsets / self.kernel_sigma) ** 2)


def _peak_times(counts, spec: MatchFilterSpec, bin_width):
    """Argmax of the matched-filter response along the last axis, as bin-centre times.

    No wraparound: edge bins correlate against the available support only.
    Ties go to the lowest index.
    """
    response = correlate1d(np.asarray(counts, float), spec.kernel(bin_width), axis=-1, mode="constant")
    idx = response.argmax(axis=-1)
    t = (idx + 0.5) * bin_width
    if spec.refinement == "parabolic":
        n = response.shape[-1]
        inner = (idx > 0) & (idx < n - 1)
        i = np.clip(idx, 1, n - 2)
        take = lambda k: np.take_along_axis(response, np.expand_dims(k, -1), -1)[..., 0]  # noqa: E731
        left, mid, right = take(i - 1), take(i), take(i + 1)
        curv = left - 2 * mid + right
        ok = inner & (curv < 0)
        delta = np.divide(0.5 * (left - right), curv, out=np.zeros_like(curv), where=ok)
        t = t + np.where(ok, delta, 0.0) * bin_width
    return t


def match_filter_peak(hist: Histogram, spec: MatchFilterSpec) -> float:
    """Peak time (seconds from the window start) by Gaussian matched filtering."""
    if hist.total < 1:
        raise EmptyHistogramError("cannot locate a peak in an empty histogram")
    return float(_peak_times(hist.counts, spec, hist.bin_width))


def time_to_depth(t, gate_delay=0.0):
    return _HALF_C * (np.asarray(t) + gate_delay)


def depth_image_from_cube(cube: HistogramCube, spec: MatchFilterSpec, *, rows_per_chunk: int = 16) -> DepthImage:
    """Match-filter every pixel; empty or invalid pixels come back invalid."""
    rows, cols = cube.shape
    depths = np.full((rows, cols), np.nan)
    codes = cube.codes.copy()
    codes[(codes == OK) & (cube.counts.sum(axis=2, dtype=np.int64) == 0)] = EMPTY_HISTOGRAM
    for r0 in range(0, rows, rows_per_chunk):
        block = cube.counts[r0:r0 + rows_per_chunk]
        depths[r0:r0 + rows_per_chunk] = time_to_depth(_peak_times(block, spec, cube.bin_width), cube.gate_delay)
    valid = codes == OK
    depths[~valid] = np.nan
    return DepthImage(depths, valid, codes, provenance={
        "mode": "histogram", "seed": cube.seed, "config_digest": cube.config_digest,
        "frames": cube.n_frames})


# --- distinguishability ------------------------------------------------------------

@dataclass(frozen=True)
class CurvePoint:
    frames: int
    value: float  # m, 2 sqrt(2 ln 2) x depth std; nan when ill-defined
    std_error: float  # m
    n_repeats: int  # repeats that produced an estimate
    well_defined: bool


@dataclass
class DistinguishabilityCurve:
    mode: str  # "crb" | "histogram" | "measured"
    points: list[CurvePoint] = field(default_factory=list)

    def __post_init__(self):
        frames = [p.frames for p in self.points]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise DomainError("curve frame counts must be strictly increasing")

    @property
    def frames(self):
        return np.array([p.frames for p in self.points])

    @property
    def values(self):
        return np.array([p.value for p in self.points])

    def at(self, frames: int) -> CurvePoint:
        for p in self.points:
            if p.frames == frames:
                return p
        raise KeyError(frames)

    def loglog_slope(self, min_repeats: int | None = None) -> float:
        """Least-squares slope of log(value) against log(frames) over well-defined points."""
        pts = [p for p in self.points if p.well_defined and p.value > 0
               and (min_repeats is None or p.n_repeats >= min_repeats)]
        if len(pts) < 2:
            raise DomainError("need at least two well-defined points for a slope")
        x = np.log([p.frames for p in pts])
        y = np.log([p.value for p in pts])
        return float(np.polyfit(x, y, 1)[0])


def frame_schedule(total_frames: int, increments: int) -> list[int]:
    """Linear schedule ``total/increments, 2*total/increments, ..., total``.

    Truncates when ``increments`` does not divide ``total_frames``.
    """
    if increments < 1 or total_frames < 1:
        raise DomainError("total_frames and increments must be >= 1")
    step = max(total_frames // increments, 1)
    return sorted({step * i for i in range(1, increments + 1) if step * i <= total_frames})


def crb_curve(config: SystemConfig, target: TargetPatch, schedule) -> DistinguishabilityCurve:
    """Cramér-Rao distinguishability (metres) at each frame count."""
    model = build_model(config.laser, config.atmosphere, config.optics, config.sensor, target)
    info = fisher_per_pulse(model, rtol=config.tolerances.quadrature_rel,
                            max_evaluations=config.tolerances.max_evaluations,
                            edge_sigma_guard=config.tolerances.edge_sigma_guard).info_per_pulse
    alpha = total_alpha(model, config.tolerances.edge_sigma_guard)
    pts = []
    for n in schedule:
        s = crb_sigma_star(info, alpha, config.acquisition.with_frames(n))
        value = _HALF_C * min_distinguishability(s)
        pts.append(CurvePoint(n, value, 0.0, 0, math.isfinite(value)))
    return DistinguishabilityCurve("crb", pts)


def distinguishability_sweep(config: SystemConfig, target: TargetPatch | None = None, *,
                             total_frames: int = 1000, increments: int = 100, repeats: int = 100,
                             spec: MatchFilterSpec | None = None, seed: int | None = None,
                             sigma_k: float = 0.0, estimator=None):
    """Depth distinguishability versus accumulated frames for one pixel.

    Each repeat simulates ``total_frames`` frames once; the histogram at ``N``
    is the first ``N`` of them. At each ``N`` the value is ``2 sqrt(2 ln 2)``
    times the sample std of the ``repeats`` depth estimates. Points where
    fewer than two repeats saw any photon are flagged ill-defined.

    ``estimator(hist) -> seconds`` replaces the matched filter (for tests).
    Returns ``(histogram_curve, crb_curve)``.
    """
    if repeats < 2:
        raise DomainError("repeats must be >= 2")
    target = target or config.target
    if target is None:
        raise DomainError("a target patch is required")
    seed = config.seed if seed is None else seed
    spec = spec or MatchFilterSpec.for_config(config)
    sensor, laser = config.sensor, config.laser
    model = build_model(laser, config.atmosphere, config.optics, sensor, target)
    schedule = frame_schedule(total_frames, increments)
    pulses = config.acquisition.pulses_per_frame

    estimates = np.full((len(schedule), repeats), np.nan)
    for r in range(repeats):
        bins = first_photon_bins(model, pulses, sensor.n_bins, sensor.bin_width,
                                 rngmod.stream_key(seed, rngmod.SWEEP, r), schedule[-1],
                                 jitter=(laser.jitter_mean, laser.jitter_std), sigma_k=sigma_k)
        fired = bins >= 0
        for i, n in enumerate(schedule):
            sub = bins[:n][fired[:n]]
            if sub.size == 0:
                continue
            hist = Histogram(np.bincount(sub, minlength=sensor.n_bins), n, n - sub.size, sensor.bin_width)
            t = estimator(hist) if estimator else float(_peak_times(hist.counts, spec, sensor.bin_width))
            estimates[i, r] = time_to_depth(t, sensor.gate_delay)

    pts = []
    for i, n in enumerate(schedule):
        got = estimates[i][np.isfinite(estimates[i])]
        if got.size < 2:
            pts.append(CurvePoint(n, math.nan, math.nan, int(got.size), False))
            continue
        sd = float(np.std(got, ddof=1))
        pts.append(CurvePoint(n, FWHM_PER_SIGMA * sd, FWHM_PER_SIGMA * sd / math.sqrt(2 * (got.size - 1)),
                              int(got.size), True))
    return DistinguishabilityCurve("histogram", pts), crb_curve(config, target, schedule)


# --- depth distributions -----------------------------------------------------------------

@dataclass(frozen=True)
class DepthDistribution:
    counts: np.ndarray
    edges: np.ndarray  # metres, len(counts) + 1


def depth_distribution(image: DepthImage, bin_width: float | None = None, *, edges=None) -> DepthDistribution:
    """Pixel count per depth bar over the valid pixels.

    Bars are anchored on multiples of ``bin_width`` so independent images
    share edges; pass ``edges`` to force a common binning.
    """
    d = image.depths[image.valid]
    if d.size == 0:
        raise DomainError("image has no valid pixels")
    if edges is None:
        if not bin_width or bin_width <= 0:
            raise DomainError("bin_width must be > 0")
        lo = math.floor(d.min() / bin_width)
        hi = math.floor(d.max() / bin_width) + 1
        edges = np.arange(lo, hi + 1) * bin_width
    edges = np.asarray(edges, float)
    counts, _ = np.histogram(d, edges)
    return DepthDistribution(counts, edges)


@dataclass(frozen=True)
class BarAccuracy:
    per_bar: np.ndarray
    median: float


def per_bar_accuracy(a: DepthDistribution, b: DepthDistribution) -> BarAccuracy:
    """Symmetric agreement ``min/max`` per bar (1 where both are empty) and its median."""
    if a.edges.shape != b.edges.shape or not np.allclose(a.edges, b.edges, rtol=0, atol=1e-12):
        raise DomainError("distributions must share identical binning")
    ca, cb = a.counts.astype(float), b.counts.astype(float)
    hi = np.maximum(ca, cb)
    acc = np.divide(np.minimum(ca, cb), hi, out=np.ones_like(hi), where=hi > 0)
    return BarAccuracy(acc, float(np.median(acc)))
