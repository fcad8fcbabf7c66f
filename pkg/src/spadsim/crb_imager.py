"""Fast image mode: noise the ground truth at the Cramér-Rao limit.

Each valid pixel gets ``depth = range + (c/2) * sigma_mu * z`` with ``z``
standard normal and ``sigma_mu`` the minimum distinguishability for that
pixel's range and reflectivity. This assumes a peak estimator that reaches
the bound, so it is a best case; use histogram mode when the estimator
matters. The inter-pixel trigger skew is not applied here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import radiometry, rng
from .config import SystemConfig
from .fisher import crb_sigma_star, fisher_per_pulse, min_distinguishability, success_probability
from .likelihood import LikelihoodModel, PulseResponse, round_trip_time, sigma_from_fwhm
from .scene import (BAD_RADIOMETRY, NO_RETURN, NOT_ESTIMABLE, OK, OUTSIDE_WINDOW, SATURATED,
                    DepthImage, Scene)

QUANTIZATION = 1e-3  # relative bucket width for memoized Fisher information
_LOG_STEP = math.log1p(QUANTIZATION)


class FisherMemo:
    """Fisher information cached on quantized (signal, background) pairs.

    F depends on the peak position only through edge truncation, so each
    bucket is evaluated once with the peak centred in the window, at the
    bucket's representative values (so the cache is order independent).
    """

    def __init__(self, config: SystemConfig):
        self.config = config
        self.cache: dict[tuple[int, int | None], float] = {}

    @staticmethod
    def _bucket(x):
        return None if x <= 0 else round(math.log(x) / _LOG_STEP)

    def __call__(self, signal_ppp: float, background: float) -> float:
        key = (self._bucket(signal_ppp), self._bucket(background))
        if key[0] is None:
            return 0.0
        if key not in self.cache:
            cfg = self.config
            model = LikelihoodModel(
                dark_rate=cfg.sensor.dark_rate,
                background_rate=0.0 if key[1] is None else math.exp(key[1] * _LOG_STEP),
                signal_ppp=math.exp(key[0] * _LOG_STEP),
                pulse=PulseResponse(cfg.sensor.window / 2, sigma_from_fwhm(cfg.laser.pulse_fwhm)),
                window=cfg.sensor.window,
            )
            self.cache[key] = fisher_per_pulse(
                model, rtol=cfg.tolerances.quadrature_rel,
                max_evaluations=cfg.tolerances.max_evaluations).info_per_pulse
        return self.cache[key]


@dataclass
class SigmaMap:
    """Per-pixel depth noise (metres, one standard deviation) and status codes."""

    depth_sigma: np.ndarray
    codes: np.ndarray

    @property
    def valid(self):
        return self.codes == OK


def crb_sigma_map(scene: Scene, config: SystemConfig, memo: FisherMemo | None = None) -> SigmaMap:
    """Distinguishability of every pixel, expressed as depth std in metres.

    The returned std is ``(c/2) * sigma_mu``: the noise applied per pixel.
    """
    memo = memo or FisherMemo(config)
    cfg, sensor = config, config.sensor
    acq = cfg.acquisition
    codes = np.where(scene.invalid_mask, NO_RETURN, OK).astype(np.int8)
    sigma = np.full(scene.shape, np.nan)

    rng_map = np.where(scene.invalid_mask, 1.0, scene.range_map)
    with np.errstate(all="ignore"):
        ppp = radiometry.photons_per_pulse_array(cfg.laser, cfg.atmosphere, cfg.optics, sensor,
                                                 rng_map, scene.reflectivity_map)
        bkg = radiometry.background_rate_array(cfg.laser, cfg.atmosphere, cfg.optics, sensor,
                                               rng_map, scene.reflectivity_map)
    mu = round_trip_time(rng_map, sensor)
    alpha = sensor.window * (sensor.dark_rate + bkg) + ppp

    live = codes == OK
    codes[live & ~(np.isfinite(ppp) & np.isfinite(bkg))] = BAD_RADIOMETRY
    live = codes == OK
    codes[live & ((mu < 0) | (mu >= sensor.window))] = OUTSIDE_WINDOW
    live = codes == OK
    codes[live & (alpha >= 1)] = SATURATED
    live = codes == OK
    codes[live & (ppp <= 0)] = NOT_ESTIMABLE

    for r, c in zip(*np.nonzero(codes == OK)):
        info = memo(float(ppp[r, c]), float(bkg[r, c]))
        s_star = crb_sigma_star(info, float(alpha[r, c]), acq)
        if not math.isfinite(s_star):
            codes[r, c] = NOT_ESTIMABLE
            continue
        sigma[r, c] = 0.5 * radiometry.LIGHT_SPEED * min_distinguishability(s_star)
    return SigmaMap(sigma, codes)


def _noise(seed: int, image_index: int, shape) -> np.ndarray:
    key = rng.stream_key(seed, rng.CRB_IMAGES, image_index)
    return rng.generator(key).standard_normal(shape)


def _render(scene, sigma_map, seed, image_index, digest) -> DepthImage:
    valid = sigma_map.valid
    z = _noise(seed, image_index, scene.shape)
    depths = np.where(valid, scene.range_map + np.where(valid, sigma_map.depth_sigma, 0.0) * z, np.nan)
    return DepthImage(depths, valid, sigma_map.codes.copy(), provenance={
        "mode": "crb", "seed": seed, "image_index": image_index, "config_digest": digest})


def simulate_crb_image(scene: Scene, config: SystemConfig, seed: int | None = None, *,
                       image_index: int = 0, sigma_map: SigmaMap | None = None) -> DepthImage:
    """One CRB-mode depth image; identical for identical ``(seed, image_index)``.

    ``sigma_map`` overrides the computed per-pixel noise (for tests and for
    reuse across calls).
    """
    seed = config.seed if seed is None else seed
    sigma_map = sigma_map or crb_sigma_map(scene, config)
    return _render(scene, sigma_map, seed, image_index, config.digest())


def iter_crb_batch(scene: Scene, config: SystemConfig, n_images: int, seed: int | None = None,
                   start: int = 0) -> Iterator[DepthImage]:
    """Lazily yield images ``start .. start+n_images-1``; sigma is computed once."""
    if n_images < 1:
        raise ValueError("n_images must be >= 1")
    seed = config.seed if seed is None else seed
    sigma_map = crb_sigma_map(scene, config)
    digest = config.digest()
    for i in range(start, start + n_images):
        yield _render(scene, sigma_map, seed, i, digest)


def simulate_crb_batch(scene: Scene, config: SystemConfig, n_images: int,
                       seed: int | None = None) -> list[DepthImage]:
    return list(iter_crb_batch(scene, config, n_images, seed))
