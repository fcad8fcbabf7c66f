"""Fisher information on the return-peak position and the Cramér-Rao bound."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import AcquisitionSpec
from .errors import DomainError
from .likelihood import FWHM_PER_SIGMA, LikelihoodModel, total_alpha
from .quadrature import adaptive_simpson

_SQRT2PI = math.sqrt(2 * math.pi)


@dataclass(frozen=True)
class FisherResult:
    info_per_pulse: float  # 1/s^2
    abs_error: float  # 1/s^2, quadrature error estimate
    evaluations: int


def fisher_integrand(model: LikelihoodModel, alpha: float):
    """Score-squared density ``(d/dmu ln L)^2 * L / alpha`` as a vectorized callable.

    Written as ``((t-mu)/s^2)^2 * g^2 / (alpha*(C + g))`` with ``g`` the
    Gaussian term, which stays finite when the floor rate is zero.
    """
    mu, s = model.pulse.peak_time, model.pulse.sigma
    floor = model.floor_rate
    amp = model.signal_ppp / (s * _SQRT2PI)

    def integrand(t):
        d = np.asarray(t, float) - mu
        g = amp * np.exp(-0.5 * (d / s) ** 2)
        denom = floor + g
        ratio = np.divide(g, denom, out=np.zeros_like(g), where=denom > 0)
        return (d / s ** 2) ** 2 * g * ratio / alpha

    return integrand


def fisher_per_pulse(model: LikelihoodModel, *, rtol=1e-6, max_evaluations=1_000_000,
                     edge_sigma_guard=5.0) -> FisherResult:
    """Information about the peak position carried by one pulse.

    Integrates over the TCSPC window ``[0, T]``; there is no closed form.
    """
    alpha = total_alpha(model, edge_sigma_guard)
    if not alpha > 0:
        raise DomainError("no counts expected (alpha = 0); Fisher information undefined")
    if model.signal_ppp == 0:
        return FisherResult(0.0, 0.0, 0)
    mu, s = model.pulse.peak_time, model.pulse.sigma
    res = adaptive_simpson(fisher_integrand(model, alpha), 0.0, model.window, rtol=rtol,
                           breakpoints=(mu - 8 * s, mu - 2 * s, mu, mu + 2 * s, mu + 8 * s),
                           max_evaluations=max_evaluations)
    return FisherResult(max(res.value, 0.0), res.abs_error, res.evaluations)


def success_probability(alpha: float, acq: AcquisitionSpec) -> float:
    """Probability that a frame of ``exposure*rep_rate`` pulses records a photon."""
    if alpha < 0:
        raise DomainError("alpha must be >= 0")
    if alpha >= 1:
        raise DomainError(
            f"alpha = {alpha:.4g} >= 1: the detector is saturated and 1-(1-alpha)^n is "
            "undefined; reduce signal or background")
    return -math.expm1(acq.exposure * acq.rep_rate * math.log1p(-alpha))


def crb_sigma_star(info_per_pulse: float, alpha: float, acq: AcquisitionSpec) -> float:
    """Lower bound on the peak-position standard deviation (seconds).

    ``math.inf`` when the depth is not estimable (no information or no
    detections).
    """
    successes = acq.frames * success_probability(alpha, acq)
    if info_per_pulse <= 0 or successes <= 0:
        return math.inf
    return 1.0 / math.sqrt(successes * info_per_pulse)


def min_distinguishability(sigma_star):
    """One-FWHM separation criterion, ``2 sqrt(2 ln 2) * sigma_star``."""
    if np.any(np.asarray(sigma_star) < 0):
        raise DomainError("sigma_star must be >= 0")
    return sigma_star * FWHM_PER_SIGMA
