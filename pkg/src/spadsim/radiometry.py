"""Photon budget of a flash Lidar pixel.

Signal photons per pulse follow the radar-equation form

    P_pp = (lambda E0 / h c) * (q Gamma exp(-2R/C_atm) / 8)
           * W_p H_p / (f_no^2 pi R^2 tan^2 theta)

and solar background reflected off the target arrives at

    C_bckg = (lambda / h c) * q Gamma exp(-R/C_atm) / (8 f_no^2) * W_bckg W_p H_p

Background crosses the atmosphere once (sun -> target -> sensor is counted
from the target only), hence the one-way attenuation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import AtmosphereSpec, LaserSpec, OpticsSpec, SensorSpec, TargetPatch
from .errors import DomainError

PLANCK_H = 6.62607015e-34  # J s, exact (SI 2019)
LIGHT_SPEED = 299792458.0  # m/s, exact

# Lambertian reflection (1/2) times the lens capture geometry (1/4). A different
# scattering model changes this constant.
LAMBERTIAN_SPLIT_FACTOR = 8.0


def photon_energy(wavelength):
    return PLANCK_H * LIGHT_SPEED / wavelength


def photons_per_pulse(laser: LaserSpec, atm: AtmosphereSpec, optics: OpticsSpec,
                      sensor: SensorSpec, target: TargetPatch) -> float:
    """Expected detected signal photons per pulse per pixel.

    Not clamped: values above one are meaningful as an expected count even
    though a SPAD records at most one photon.
    """
    return float(photons_per_pulse_array(laser, atm, optics, sensor,
                                         target.range, target.reflectivity))


def photons_per_pulse_array(laser, atm, optics, sensor, rng, reflectivity):
    """Vectorized :func:`photons_per_pulse` over range/reflectivity arrays."""
    rng = np.asarray(rng, dtype=float)
    reflectivity = np.asarray(reflectivity, dtype=float)
    photons = laser.wavelength * laser.pulse_energy / (PLANCK_H * LIGHT_SPEED)
    channel = sensor.quantum_efficiency * reflectivity * np.exp(-2 * rng / atm.attenuation_length)
    geometry = (sensor.pixel_width * sensor.pixel_height
                / (optics.f_number ** 2 * math.pi * rng ** 2 * math.tan(optics.divergence) ** 2))
    return photons * channel / LAMBERTIAN_SPLIT_FACTOR * geometry


def background_rate(laser: LaserSpec, atm: AtmosphereSpec, optics: OpticsSpec,
                    sensor: SensorSpec, target: TargetPatch) -> float:
    """Solar background count rate in Hz."""
    return float(background_rate_array(laser, atm, optics, sensor,
                                       target.range, target.reflectivity))


def background_rate_array(laser, atm, optics, sensor, rng, reflectivity):
    rng = np.asarray(rng, dtype=float)
    reflectivity = np.asarray(reflectivity, dtype=float)
    per_joule = laser.wavelength / (PLANCK_H * LIGHT_SPEED)
    channel = (sensor.quantum_efficiency * reflectivity * np.exp(-rng / atm.attenuation_length)
               / (LAMBERTIAN_SPLIT_FACTOR * optics.f_number ** 2))
    return per_joule * channel * atm.solar_irradiance * sensor.pixel_width * sensor.pixel_height


def sbnr(laser: LaserSpec, atm: AtmosphereSpec, optics: OpticsSpec, target: TargetPatch) -> float:
    """Signal to background-noise ratio at the target plane.

    Returns ``math.inf`` when there is no solar background.
    """
    if atm.solar_irradiance == 0:
        return math.inf
    signal = laser.pulse_energy * math.exp(-target.range / atm.attenuation_length)
    spot = math.pi * target.range ** 2 * math.tan(optics.divergence) ** 2
    return signal / (atm.solar_irradiance * spot)


@dataclass(frozen=True)
class EnergyChain:
    energy_density: float  # J/m^2 at the target
    pixel_energy: float  # J illuminating one pixel footprint
    aperture_energy: float  # J scattered back onto the lens aperture
    detected_energy: float  # J converted by the pixel
    photons: float


def energy_chain(laser: LaserSpec, atm: AtmosphereSpec, optics: OpticsSpec,
                 sensor: SensorSpec, target: TargetPatch) -> EnergyChain:
    """Step-by-step energy budget through a lens of explicit focal length.

    The focal length cancels, so ``photons`` reproduces
    :func:`photons_per_pulse`; the two routes check each other.
    """
    f = optics.focal_length
    if f is None:
        raise DomainError("energy_chain needs optics.focal_length")
    R, loss = target.range, math.exp(-target.range / atm.attenuation_length)
    rho = laser.pulse_energy * loss / (math.pi * R ** 2 * math.tan(optics.divergence) ** 2)
    e1 = rho * R ** 2 * sensor.pixel_width * sensor.pixel_height / f ** 2
    e2 = target.reflectivity * e1 * loss / (2 * math.pi * R ** 2)
    e3 = sensor.quantum_efficiency * e2 * math.pi * (f / (2 * optics.f_number)) ** 2
    return EnergyChain(rho, e1, e2, e3, e3 / photon_energy(laser.wavelength))
