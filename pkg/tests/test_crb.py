import math

import numpy as np
import pytest

from oracles import fisher_quad
from spadsim.crb_imager import (FisherMemo, SigmaMap, crb_sigma_map, iter_crb_batch, simulate_crb_batch,
                                simulate_crb_image)
from spadsim.radiometry import LIGHT_SPEED, background_rate, photons_per_pulse
from spadsim.config import TargetPatch
from spadsim.scene import NO_RETURN, NOT_ESTIMABLE, OK, OUTSIDE_WINDOW, SATURATED, Scene


def sigma_depth_oracle(cfg, rng, refl):
    """Depth std computed without the memo or the library's Fisher routine."""
    t = TargetPatch(rng, refl)
    ppp = photons_per_pulse(cfg.laser, cfg.atmosphere, cfg.optics, cfg.sensor, t)
    floor = cfg.sensor.dark_rate + background_rate(cfg.laser, cfg.atmosphere, cfg.optics, cfg.sensor, t)
    sigma = cfg.laser.pulse_fwhm / (2 * math.sqrt(2 * math.log(2)))
    window = cfg.sensor.n_bins * cfg.sensor.bin_width
    info = fisher_quad(floor, ppp, 2 * rng / LIGHT_SPEED, sigma, window)
    alpha = window * floor + ppp
    n = round(cfg.exposure * cfg.laser.rep_rate)
    s_star = 1 / math.sqrt(cfg.frames * (1 - (1 - alpha) ** n) * info)
    return LIGHT_SPEED / 2 * 2 * math.sqrt(2 * math.log(2)) * s_star


def test_forced_zero_sigma_returns_truth(table1):
    scene = Scene.uniform(3, 4, 14.73, 0.09)
    sm = SigmaMap(np.zeros((3, 4)), np.zeros((3, 4), np.int8))
    img = simulate_crb_image(scene, table1, seed=5, sigma_map=sm)
    np.testing.assert_array_equal(img.depths, scene.range_map)


def test_single_pixel_std(table1):
    scene = Scene.uniform(1, 1, 14.73, 0.09)
    want = sigma_depth_oracle(table1, 14.73, 0.09)
    sm = crb_sigma_map(scene, table1)
    assert sm.depth_sigma[0, 0] == pytest.approx(want, rel=2e-3)
    depths = np.array([im.depths[0, 0] for im in iter_crb_batch(scene, table1, 10_000, seed=3)])
    assert depths.std(ddof=1) == pytest.approx(want, rel=0.03)


def test_determinism_and_batch_consistency(table1):
    scene = Scene.uniform(8, 9, 14.73, 0.09)
    a = simulate_crb_image(scene, table1, seed=11)
    b = simulate_crb_image(scene, table1, seed=11)
    assert a.depths.tobytes() == b.depths.tobytes()
    batch = simulate_crb_batch(scene, table1, 1, seed=11)
    assert batch[0].depths.tobytes() == a.depths.tobytes()
    later = list(iter_crb_batch(scene, table1, 2, seed=11, start=4))
    assert later[1].depths.tobytes() == simulate_crb_image(scene, table1, seed=11, image_index=5).depths.tobytes()
    assert a.provenance["mode"] == "crb" and a.provenance["config_digest"] == table1.digest()


def test_batch_mean_scatter(table1):
    scene = Scene.uniform(16, 16, 14.73, 0.09)
    sigma = crb_sigma_map(scene, table1).depth_sigma[0, 0]
    means = np.array([im.depths.mean() for im in iter_crb_batch(scene, table1, 100, seed=4)])
    assert abs(means.mean() - 14.73) < 4 * sigma / 16 / 10
    assert means.std(ddof=1) == pytest.approx(sigma / 16, rel=0.25)


def test_noise_whiteness(table1):
    scene = Scene.uniform(4, 4, 14.73, 0.09)
    stack = np.array([im.depths for im in iter_crb_batch(scene, table1, 400, seed=8)])
    z = stack - stack.mean(axis=0)
    lag1 = (z[1:] * z[:-1]).sum(axis=0) / (z * z).sum(axis=0)
    assert np.all(np.abs(lag1) < 3 / math.sqrt(400))


def test_sigma_monotone_in_reflectivity(table1):
    refl = np.array([[0.02, 0.05, 0.09, 0.3, 0.9]])
    sm = crb_sigma_map(Scene(np.full((1, 5), 14.73), refl), table1)
    assert np.all(np.diff(sm.depth_sigma[0]) <= 0)


def test_no_pixel_borrows_sigma(table1):
    scene = Scene(np.array([[14.73, 14.73]]), np.array([[0.005, 1.0]]))
    sm = crb_sigma_map(scene, table1)
    for c, refl in enumerate((0.005, 1.0)):
        assert sm.depth_sigma[0, c] == pytest.approx(sigma_depth_oracle(table1, 14.73, refl), rel=2e-3)
    assert sm.depth_sigma[0, 0] > 1.5 * sm.depth_sigma[0, 1]


def test_status_codes(table1):
    ranges = np.array([[14.73, 14.73, 40.0, 0.05, 14.73]])
    refl = np.array([[0.09, 0.0, 0.09, 0.9, 0.09]])
    mask = np.array([[False, False, False, False, True]])
    sm = crb_sigma_map(Scene(ranges, refl, mask), table1)
    assert sm.codes.tolist() == [[OK, NOT_ESTIMABLE, OUTSIDE_WINDOW, SATURATED, NO_RETURN]]
    img = simulate_crb_image(Scene(ranges, refl, mask), table1, seed=1)
    assert img.valid.tolist() == [[True, False, False, False, False]]
    assert np.isnan(img.depths[0, 1:]).all()


def test_memo_quantization(table1):
    memo = FisherMemo(table1)
    a = memo(3.052e-3, 0.0)
    b = memo(3.052e-3 * (1 + 1e-5), 0.0)
    assert a == b and len(memo.cache) == 1
    memo(3.052e-3 * 1.01, 0.0)
    assert len(memo.cache) == 2
    exact = fisher_quad(table1.sensor.dark_rate, 3.052e-3, table1.sensor.window / 2,
                        table1.laser.pulse_fwhm / 2.3548200450309493, table1.sensor.window)
    assert a == pytest.approx(exact, rel=2e-3)
    assert memo(0.0, 10.0) == 0.0
