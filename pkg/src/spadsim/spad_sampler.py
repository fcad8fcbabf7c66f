"""Histogram mode: per-pulse, per-bin Bernoulli detection with first-photon capture.

A frame holds ``pulses_per_frame`` laser pulses but records at most one
photon, the earliest detection of the earliest non-empty pulse. Every bin
of every pulse is an independent Bernoulli trial with the bin probability
of the arrival-rate model, the peak displaced by per-pulse jitter ``j`` and
a per-frame trigger skew ``k``.

Random variates are laid out per frame as one record::

    [k_u, gate_u[0..P-1], jitter_u[0..P-1]]

``gate_u[p]`` decides pulse ``p`` by inverting the distribution of its first
success: with ``S_i = prod_{l<=i} (1 - p_l)``, the pulse fires in bin ``i``
when ``1 - S_{i-1} <= u < 1 - S_i`` and is empty when ``u >= 1 - S_b``.
This has exactly the law of the first success among independent Bernoulli
trials. Because ``1 - S_b <= sum(p) <= alpha``, pulses with ``u >= alpha``
are known to be empty without evaluating any bin; only the rare candidates
need the jitter draw and the erf evaluation.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .config import AcquisitionSpec, SystemConfig
from .errors import DomainError, ScaleGuardError
from .likelihood import (BinProbabilityVector, LikelihoodModel, PulseResponse, bin_probabilities,
                         round_trip_time, sigma_from_fwhm, signal_bin_areas)
from .radiometry import background_rate_array, photons_per_pulse_array
from .scene import BAD_RADIOMETRY, NO_RETURN, OK, Scene

WINDOW_SIGMAS = 8.0  # signal beyond this many sigmas is below 1e-14 of the peak
REFERENCE_MAX_CELLS = 1_000_000
_FRAME_CHUNK = 256


@dataclass
class Histogram:
    counts: np.ndarray  # (b,) first-photon counts
    n_frames: int
    n_empty_frames: int
    bin_width: float

    def __post_init__(self):
        if int(self.counts.sum()) + self.n_empty_frames != self.n_frames:
            raise ValueError("histogram violates frame conservation")

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class HistogramCube:
    counts: np.ndarray  # (M, Q, b)
    n_empty: np.ndarray  # (M, Q)
    n_frames: int
    bin_width: float
    acquisition: AcquisitionSpec
    seed: int
    config_digest: str
    codes: np.ndarray  # (M, Q) status codes
    gate_delay: float = 0.0

    def __post_init__(self):
        if self.n_frames < 1:
            raise DomainError("a histogram cube needs at least one frame")
        if self.counts.ndim != 3 or self.counts.shape[:2] != self.n_empty.shape:
            raise DomainError("counts must be (M, Q, b) matching n_empty (M, Q)")

    @property
    def shape(self):
        return self.counts.shape[:2]

    @property
    def n_bins(self):
        return self.counts.shape[2]

    def histogram(self, row, col) -> Histogram:
        return Histogram(self.counts[row, col].astype(np.int64), self.n_frames,
                         int(self.n_empty[row, col]), self.bin_width)

    def conserves_frames(self) -> bool:
        return bool(np.all(self.counts.sum(axis=2, dtype=np.int64) + self.n_empty == self.n_frames))


@dataclass(frozen=True)
class PixelNoiseProfile:
    """Trigger-skew std varying linearly from column 0 to column ``cols - 1``."""

    sigma_start: float
    sigma_end: float
    cols: int

    def __post_init__(self):
        if self.sigma_start < 0 or self.sigma_end < 0:
            raise DomainError("trigger-skew std must be >= 0")

    def sigma_at(self, col):
        if self.cols == 1:
            return self.sigma_start + 0.0 * np.asarray(col, float)
        frac = np.asarray(col, float) / (self.cols - 1)
        return self.sigma_start + frac * (self.sigma_end - self.sigma_start)


# --- single pulse -------------------------------------------------------------

def _first_success(probs: np.ndarray, u: float) -> int | None:
    target = math.log1p(-u)
    with np.errstate(divide="ignore"):
        hit = np.nonzero(np.cumsum(np.log1p(-probs)) < target)[0]
    return int(hit[0]) if hit.size else None


def sample_pulse(probs, rng: np.random.Generator) -> int | None:
    """First bin (0-based) that detects a photon in one pulse, or ``None``."""
    p = probs.probs if isinstance(probs, BinProbabilityVector) else np.asarray(probs, float)
    return _first_success(p, rng.random())


# --- vectorized core ----------------------------------------------------------

def frame_words(pulses_per_frame: int) -> int:
    return 1 + 2 * pulses_per_frame


class _PulseResolver:
    """First-success bin of candidate pulses given their peak shifts."""

    def __init__(self, model: LikelihoodModel, n_bins: int, bin_width: float):
        if abs(n_bins * bin_width - model.window) > 1e-9 * model.window:
            raise DomainError("n_bins*bin_width does not match the model window")
        self.model, self.n_bins, self.bin_width = model, n_bins, bin_width
        self.p0 = min(1.0, bin_width * model.floor_rate)
        self.l0 = math.log1p(-self.p0) if self.p0 < 1 else -math.inf
        self.span = int(math.ceil(2 * WINDOW_SIGMAS * model.pulse.sigma / bin_width)) + 2
        # upper bound on 1 - S_b for any shift
        self.gate = n_bins * self.p0 + model.signal_ppp

    def __call__(self, u: np.ndarray, shift: np.ndarray) -> np.ndarray:
        m, b, w = self.model, self.n_bins, self.bin_width
        if self.p0 >= 1:  # saturated floor: bin 0 always fires
            return np.zeros(u.shape, np.int64)
        tau = np.log1p(-u)
        centre = m.pulse.peak_time + shift
        lo = np.clip(np.floor((centre - WINDOW_SIGMAS * m.pulse.sigma) / w), 0, b).astype(np.int64)
        idx = lo[:, None] + np.arange(self.span)
        inside = idx < b
        p = w * m.floor_rate + signal_bin_areas(m.signal_ppp, centre[:, None], m.pulse.sigma, idx * w, w)
        with np.errstate(divide="ignore"):  # p == 1 maps to -inf: a certain detection
            logs = np.where(inside, np.log1p(-np.clip(p, 0.0, 1.0)), 0.0)
        out = np.full(u.shape, -1, np.int64)
        todo = np.ones(u.shape, bool)

        # flat floor before the signal window: L_i = (i + 1) * l0
        if self.l0 < 0:
            before = np.floor(tau / self.l0).astype(np.int64)
            hit = before < lo
            out[hit] = before[hit]
            todo &= ~hit

        cum = lo[:, None] * self.l0 + np.cumsum(logs, axis=1)
        hits = cum < tau[:, None]
        any_hit = todo & hits.any(axis=1)
        out[any_hit] = lo[any_hit] + hits[any_hit].argmax(axis=1)
        todo &= ~any_hit

        # flat floor after the window
        if self.l0 < 0 and todo.any():
            rest = np.nonzero(todo)[0]
            hi = np.minimum(lo[rest] + self.span, b)
            n = np.floor((tau[rest] - cum[rest, -1]) / self.l0).astype(np.int64) + 1
            after = hi - 1 + n
            hit = after < b
            out[rest[hit]] = after[hit]
        return out


def _resolve_frames(resolver: _PulseResolver, jitter, gates, jit_u, k) -> np.ndarray:
    """First-photon bin per frame (``-1`` if empty) from the frame records."""
    n_frames = gates.shape[0]
    result = np.full(n_frames, -1, np.int64)
    cand_frame, cand_pulse = np.nonzero(gates < resolver.gate)
    if cand_frame.size == 0:
        return result
    starts = np.searchsorted(cand_frame, np.arange(n_frames))
    counts = np.bincount(cand_frame, minlength=n_frames)
    open_ = counts > 0
    rank = 0
    while True:
        sel = np.nonzero(open_ & (counts > rank))[0]
        if sel.size == 0:
            break
        pulse = cand_pulse[starts[sel] + rank]
        j = jitter[0] + jitter[1] * rngmod.normal_from_uniform(jit_u[sel, pulse]) if jitter[1] else \
            np.full(sel.size, float(jitter[0]))
        bins = resolver(gates[sel, pulse], j + k[sel])
        fired = bins >= 0
        result[sel[fired]] = bins[fired]
        open_[sel[fired]] = False
        rank += 1
    return result


def _split_records(records, pulses):
    return records[:, 0], records[:, 1:1 + pulses], records[:, 1 + pulses:1 + 2 * pulses]


def first_photon_bins(model: LikelihoodModel, pulses_per_frame: int, n_bins: int, bin_width: float,
                      key, n_frames: int, *, first_frame: int = 0, jitter=(0.0, 0.0),
                      sigma_k: float = 0.0) -> np.ndarray:
    """Recorded bin for each frame of a keyed pixel stream (``-1`` = empty).

    Frame ``f`` always uses record ``f`` of ``key``, so any frame range
    reproduces the same values.
    """
    if pulses_per_frame < 1:
        raise DomainError("pulses_per_frame must be >= 1")
    resolver = _PulseResolver(model, n_bins, bin_width)
    words = frame_words(pulses_per_frame)
    out = np.empty(n_frames, np.int64)
    for start in range(0, n_frames, _FRAME_CHUNK):
        count = min(_FRAME_CHUNK, n_frames - start)
        recs = rngmod.uniform_records(key, first_frame + start, count, words)
        k_u, gates, jit_u = _split_records(recs, pulses_per_frame)
        k = sigma_k * rngmod.normal_from_uniform(k_u) if sigma_k else np.zeros(count)
        out[start:start + count] = _resolve_frames(resolver, jitter, gates, jit_u, k)
    return out


# --- public single-frame API -----------------------------------------------------

def _draw_frame(rng: np.random.Generator, pulses: int):
    words = frame_words(pulses)
    rec = rng.random(rngmod.record_stride(words))[:words]
    return _split_records(rec[None, :], pulses)


def sample_frame(model: LikelihoodModel, pulses_per_frame: int, jitter, pixel_shift_k: float,
                 n_bins: int, bin_width: float, rng: np.random.Generator) -> int | None:
    """Streaming first-photon sampler for one frame with a given trigger skew.

    Consumes exactly one frame record from ``rng``.
    """
    if pulses_per_frame < 1:
        raise DomainError("pulses_per_frame must be >= 1")
    _, gates, jit_u = _draw_frame(rng, pulses_per_frame)
    res = _resolve_frames(_PulseResolver(model, n_bins, bin_width), jitter, gates, jit_u,
                          np.array([pixel_shift_k], float))
    return None if res[0] < 0 else int(res[0])


def sample_frame_reference(model: LikelihoodModel, pulses_per_frame: int, jitter, pixel_shift_k: float,
                           n_bins: int, bin_width: float, rng: np.random.Generator,
                           tail_rng: np.random.Generator | None = None,
                           return_matrix: bool = False):
    """Full pulses x bins Bernoulli matrix for one frame, then first non-zero.

    Test-scale oracle for :func:`sample_frame`: it reads the same frame
    record, evaluates every bin of every pulse without the gate or window
    shortcuts, and fills the bins after each pulse's first success with
    independent draws from ``tail_rng`` so every matrix entry is an
    independent Bernoulli trial.
    """
    if n_bins * pulses_per_frame > REFERENCE_MAX_CELLS:
        raise ScaleGuardError(f"{n_bins}x{pulses_per_frame} cells exceeds {REFERENCE_MAX_CELLS}")
    tail_rng = tail_rng if tail_rng is not None else np.random.default_rng(0)
    _, gates, jit_u = _draw_frame(rng, pulses_per_frame)
    matrix = np.zeros((pulses_per_frame, n_bins), bool)
    for p in range(pulses_per_frame):
        j = jitter[0] + (jitter[1] * float(rngmod.normal_from_uniform(jit_u[0, p])) if jitter[1] else 0.0)
        probs = bin_probabilities(model, n_bins, bin_width, j + pixel_shift_k).probs
        first = _first_success(probs, float(gates[0, p]))
        if first is None:
            continue
        matrix[p, first] = True
        matrix[p, first + 1:] = tail_rng.random(n_bins - first - 1) < probs[first + 1:]
    hits = np.flatnonzero(matrix)
    first_bin = None if hits.size == 0 else int(hits[0] % n_bins)
    return (first_bin, matrix) if return_matrix else first_bin


# --- histograms ------------------------------------------------------------------

def accumulate(bins: np.ndarray, n_bins: int, bin_width: float) -> Histogram:
    fired = bins[bins >= 0]
    return Histogram(np.bincount(fired, minlength=n_bins).astype(np.int64), int(bins.size),
                     int(bins.size - fired.size), bin_width)


def build_histogram(model: LikelihoodModel, acq: AcquisitionSpec, n_bins: int, bin_width: float, key, *,
                    jitter=(0.0, 0.0), sigma_k: float = 0.0) -> Histogram:
    """Accumulate ``acq.frames`` frames; ``k ~ N(0, sigma_k)`` is redrawn each frame."""
    bins = first_photon_bins(model, acq.pulses_per_frame, n_bins, bin_width, key, acq.frames,
                             jitter=jitter, sigma_k=sigma_k)
    return accumulate(bins, n_bins, bin_width)


def pixel_models(scene: Scene, config: SystemConfig):
    """Per-pixel arrival models (``None`` where invalid) and status codes."""
    cfg, sensor = config, config.sensor
    codes = np.where(scene.invalid_mask, NO_RETURN, OK).astype(np.int8)
    rng_map = np.where(scene.invalid_mask, 1.0, scene.range_map)
    with np.errstate(all="ignore"):
        ppp = photons_per_pulse_array(cfg.laser, cfg.atmosphere, cfg.optics, sensor, rng_map,
                                      scene.reflectivity_map)
        bkg = background_rate_array(cfg.laser, cfg.atmosphere, cfg.optics, sensor, rng_map,
                                    scene.reflectivity_map)
    codes[(codes == OK) & ~(np.isfinite(ppp) & np.isfinite(bkg))] = BAD_RADIOMETRY
    mu = round_trip_time(rng_map, sensor)
    sigma = sigma_from_fwhm(cfg.laser.pulse_fwhm)
    models = np.empty(scene.shape, object)
    for r, c in zip(*np.nonzero(codes == OK)):
        models[r, c] = LikelihoodModel(sensor.dark_rate, float(bkg[r, c]), float(ppp[r, c]),
                                       PulseResponse(float(mu[r, c]), sigma), sensor.window)
    return models, codes


def simulate_histogram_cube(scene: Scene, config: SystemConfig, seed: int | None = None, *,
                            frames: int | None = None, threads: int = 1) -> HistogramCube:
    """Histogram every pixel of ``scene``.

    Pixel ``(r, c)`` draws from its own keyed stream, so the cube is identical
    for any ``threads``.
    """
    seed = config.seed if seed is None else seed
    acq = config.acquisition if frames is None else config.acquisition.with_frames(frames)
    sensor, laser = config.sensor, config.laser
    rows, cols = scene.shape
    models, codes = pixel_models(scene, config)
    profile = PixelNoiseProfile(sensor.sigma_q_start, sensor.sigma_q_end, cols)
    dtype = np.uint16 if acq.frames < 2 ** 16 else np.uint32
    counts = np.zeros((rows, cols, sensor.n_bins), dtype)
    n_empty = np.full((rows, cols), acq.frames, np.int64)

    def run_row(r):
        for c in range(cols):
            if codes[r, c] != OK:
                continue
            bins = first_photon_bins(models[r, c], acq.pulses_per_frame, sensor.n_bins, sensor.bin_width,
                                     rngmod.stream_key(seed, rngmod.FRAMES, r, c), acq.frames,
                                     jitter=(laser.jitter_mean, laser.jitter_std),
                                     sigma_k=float(profile.sigma_at(c)))
            fired = bins[bins >= 0]
            counts[r, c] = np.bincount(fired, minlength=sensor.n_bins)
            n_empty[r, c] = acq.frames - fired.size

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(run_row, range(rows)))
    else:
        for r in range(rows):
            run_row(r)
    return HistogramCube(counts, n_empty, acq.frames, sensor.bin_width, acq, seed, config.digest(),
                         codes, sensor.gate_delay)
