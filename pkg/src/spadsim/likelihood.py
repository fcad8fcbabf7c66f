"""Photon arrival-rate model of one pixel and its per-bin probabilities.

The arrival rate over the TCSPC window is a flat floor (dark counts plus
background) with a Gaussian return pulse of area ``signal_ppp`` centred on
the round-trip time. Bins are half-open, ``[i*w, (i+1)*w)`` with 0-based
``i`` in storage.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import erf

from . import radiometry
from .config import AtmosphereSpec, LaserSpec, OpticsSpec, SensorSpec, TargetPatch
from .errors import DomainError, EdgeProximityWarning
from .quadrature import adaptive_simpson

FWHM_PER_SIGMA = 2 * math.sqrt(2 * math.log(2))
_SQRT2 = math.sqrt(2)
_SQRT2PI = math.sqrt(2 * math.pi)


def sigma_from_fwhm(fwhm: float) -> float:
    if not fwhm > 0:
        raise DomainError(f"fwhm must be > 0, got {fwhm}")
    return fwhm / FWHM_PER_SIGMA


@dataclass(frozen=True)
class PulseResponse:
    peak_time: float  # s, relative to the window start
    sigma: float  # s

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("pulse sigma must be > 0")

    @classmethod
    def from_fwhm(cls, peak_time, fwhm):
        return cls(peak_time, sigma_from_fwhm(fwhm))


@dataclass(frozen=True)
class LikelihoodModel:
    dark_rate: float  # Hz
    background_rate: float  # Hz
    signal_ppp: float  # expected signal photons per pulse
    pulse: PulseResponse
    window: float  # s, TCSPC interval T

    def __post_init__(self):
        if min(self.dark_rate, self.background_rate, self.signal_ppp) < 0:
            raise DomainError("rates and signal must be >= 0")
        if not self.window > 0:
            raise DomainError("TCSPC window must be > 0")

    @property
    def floor_rate(self) -> float:
        return self.dark_rate + self.background_rate

    def shifted(self, dt) -> "LikelihoodModel":
        return replace(self, pulse=replace(self.pulse, peak_time=self.pulse.peak_time + dt))


def round_trip_time(rng, sensor: SensorSpec):
    """Peak arrival time inside the TCSPC window for a target at ``rng``."""
    return 2 * np.asarray(rng) / radiometry.LIGHT_SPEED - sensor.gate_delay


def build_model(laser: LaserSpec, atm: AtmosphereSpec, optics: OpticsSpec,
                sensor: SensorSpec, target: TargetPatch) -> LikelihoodModel:
    """Arrival-rate model for a single pixel imaging ``target``."""
    return LikelihoodModel(
        dark_rate=sensor.dark_rate,
        background_rate=radiometry.background_rate(laser, atm, optics, sensor, target),
        signal_ppp=radiometry.photons_per_pulse(laser, atm, optics, sensor, target),
        pulse=PulseResponse.from_fwhm(float(round_trip_time(target.range, sensor)), laser.pulse_fwhm),
        window=sensor.window,
    )


def likelihood_at(model: LikelihoodModel, t):
    """Arrival-rate density in counts/s at time(s) ``t``."""
    z = (np.asarray(t, float) - model.pulse.peak_time) / model.pulse.sigma
    peak = model.signal_ppp / (model.pulse.sigma * _SQRT2PI)
    out = model.floor_rate + peak * np.exp(-0.5 * z * z)
    return out if out.ndim else float(out)


def edge_margin(model: LikelihoodModel) -> float:
    """Distance in pulse sigmas from the peak to the nearest window edge."""
    mu = model.pulse.peak_time
    return min(mu, model.window - mu) / model.pulse.sigma


def total_alpha(model: LikelihoodModel, edge_sigma_guard=5.0) -> float:
    """Expected counts per pulse over the window, ``T*(C_dc+C_bckg) + P_pp``.

    Exact for a peak well inside the window; warns otherwise since the
    truncated Gaussian then carries less than ``P_pp``.
    """
    if model.signal_ppp > 0 and edge_margin(model) < edge_sigma_guard:
        warnings.warn(
            f"peak is {edge_margin(model):.2f} sigma from a window edge; "
            "total counts are over-estimated", EdgeProximityWarning, stacklevel=2)
    return model.window * model.floor_rate + model.signal_ppp


def integrated_alpha(model: LikelihoodModel, rtol=1e-9):
    """Counts per pulse by direct quadrature of the arrival rate."""
    mu, s = model.pulse.peak_time, model.pulse.sigma
    return adaptive_simpson(lambda t: likelihood_at(model, t), 0.0, model.window, rtol=rtol,
                            breakpoints=(mu - 8 * s, mu, mu + 8 * s))


@dataclass(frozen=True)
class BinProbabilityVector:
    probs: np.ndarray
    clamped: bool


def signal_bin_areas(signal_ppp, centre, sigma, lower_edges, bin_width):
    """Gaussian pulse area falling in bins ``[lower, lower + bin_width)``."""
    scale = 1.0 / (sigma * _SQRT2)
    return 0.5 * signal_ppp * (erf((centre - lower_edges) * scale)
                               - erf((centre - lower_edges - bin_width) * scale))


def bin_probabilities(model: LikelihoodModel, n_bins: int, bin_width: float,
                      shift: float = 0.0) -> BinProbabilityVector:
    """Per-bin detection probability for one pulse, peak moved by ``shift``.

    Raw values above one (very bright returns) are clamped and flagged.
    """
    if abs(n_bins * bin_width - model.window) > 1e-9 * model.window:
        raise DomainError(f"n_bins*bin_width = {n_bins * bin_width} does not match window {model.window}")
    lower = np.arange(n_bins) * bin_width
    raw = bin_width * model.floor_rate + signal_bin_areas(
        model.signal_ppp, model.pulse.peak_time + shift, model.pulse.sigma, lower, bin_width)
    probs = np.clip(raw, 0.0, 1.0)
    return BinProbabilityVector(probs, bool(np.any(probs != raw)))
