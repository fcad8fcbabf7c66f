import math
import time

import numpy as np
import pytest

from oracles import fisher_quad, success_probability_mp
from spadsim.config import AcquisitionSpec
from spadsim.errors import DomainError, QuadratureError
from spadsim.fisher import crb_sigma_star, fisher_per_pulse, min_distinguishability, success_probability
from spadsim.likelihood import FWHM_PER_SIGMA, LikelihoodModel, PulseResponse, build_model, total_alpha

# 1/sqrt(1000 * (1-(1-alpha)^2250) * F), Table 1 preset at f/2, from the scipy.quad oracle
Z_TABLE1_F2_N1000 = 8.09807475351494e-12


def model_for(cfg):
    return build_model(cfg.laser, cfg.atmosphere, cfg.optics, cfg.sensor, cfg.target)


@pytest.mark.parametrize("f_no,published", [(2.0, 1.525e19), (4.0, 1.507e19)])
def test_published_fisher(table1, f_no, published):
    t0 = time.perf_counter()
    res = fisher_per_pulse(model_for(table1.replace(optics={"f_number": f_no})))
    assert time.perf_counter() - t0 < 1.0
    assert res.info_per_pulse == pytest.approx(published, rel=0.02)


def test_against_scipy_quad(table1, table2):
    for cfg in (table1, table1.replace(optics={"f_number": 4.0}), table2):
        m = model_for(cfg)
        want = fisher_quad(m.floor_rate, m.signal_ppp, m.pulse.peak_time, m.pulse.sigma, m.window)
        got = fisher_per_pulse(m)
        assert got.info_per_pulse == pytest.approx(want, rel=1e-6)
        assert got.abs_error >= 0


def test_zero_signal_gives_zero(table1):
    assert fisher_per_pulse(model_for(table1.replace(target={"reflectivity": 0.0}))).info_per_pulse == 0.0


def test_no_counts_is_domain_error():
    m = LikelihoodModel(0.0, 0.0, 0.0, PulseResponse(1e-7, 1e-10), 2e-7)
    with pytest.raises(DomainError):
        fisher_per_pulse(m)


def test_budget():
    m = LikelihoodModel(100.0, 0.0, 0.01, PulseResponse(1e-7, 1e-10), 2e-7)
    with pytest.raises(QuadratureError):
        fisher_per_pulse(m, rtol=1e-14, max_evaluations=50)


def test_translation_invariance(table1_model):
    base = fisher_per_pulse(table1_model).info_per_pulse
    for dt in (-50e-9, 20e-9, 90e-9):
        moved = fisher_per_pulse(table1_model.shifted(dt)).info_per_pulse
        assert abs(moved - base) / base < 1e-4


def test_wider_pulse_less_information(table1_model):
    from dataclasses import replace
    values = [fisher_per_pulse(replace(table1_model, pulse=PulseResponse(1e-7, s))).info_per_pulse
              for s in (100e-12, 200e-12, 300e-12, 400e-12, 500e-12)]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_f_number_negligible_without_dark_counts(table1):
    dark0 = table1.replace(sensor={"dark_rate": 0.0}, atmosphere={"solar_irradiance": 50.0})
    a = fisher_per_pulse(model_for(dark0)).info_per_pulse
    b = fisher_per_pulse(model_for(dark0.replace(optics={"f_number": 4.0}))).info_per_pulse
    assert abs(a - b) / a < 0.01


def test_success_probability():
    acq = AcquisitionSpec(1000, 1e-3, 2.25e6)
    assert success_probability(0.0, acq) == 0.0
    assert success_probability(0.37, AcquisitionSpec(1, 1e-6, 1e6)) == pytest.approx(0.37, rel=1e-15)
    assert success_probability(1e-4, acq) == pytest.approx(float(success_probability_mp(1e-4, 2250)), rel=1e-13)
    assert success_probability(1e-4, acq) == pytest.approx(0.2015, abs=5e-5)
    with pytest.raises(DomainError, match="saturated"):
        success_probability(1.0, acq)


def test_crb_golden(table1, table1_model):
    info = fisher_per_pulse(table1_model).info_per_pulse
    s = crb_sigma_star(info, total_alpha(table1_model), table1.acquisition)
    assert s == pytest.approx(Z_TABLE1_F2_N1000, rel=1e-6)
    assert min_distinguishability(s) == pytest.approx(FWHM_PER_SIGMA * Z_TABLE1_F2_N1000, rel=1e-6)


def test_crb_unit_and_scaling():
    acq1 = AcquisitionSpec(1, 1e-6, 1e6)
    assert crb_sigma_star(1.0, 0.5, acq1) == pytest.approx(math.sqrt(2), rel=1e-15)
    # N * P_success = 1 with F = 1
    assert crb_sigma_star(1.0, 0.25, AcquisitionSpec(4, 1e-6, 1e6)) == pytest.approx(1.0, rel=1e-15)
    a = crb_sigma_star(3e18, 0.01, AcquisitionSpec(10, 1e-3, 2.25e6))
    b = crb_sigma_star(3e18, 0.01, AcquisitionSpec(40, 1e-3, 2.25e6))
    assert b == pytest.approx(a / 2, rel=1e-15)


def test_not_estimable():
    acq = AcquisitionSpec(10, 1e-3, 2.25e6)
    assert crb_sigma_star(0.0, 0.01, acq) == math.inf
    assert crb_sigma_star(1e19, 0.0, acq) == math.inf


def test_min_distinguishability():
    assert min_distinguishability(0.0) == 0.0
    assert min_distinguishability(1 / FWHM_PER_SIGMA) == pytest.approx(1.0, rel=1e-15)
    with pytest.raises(DomainError):
        min_distinguishability(-1.0)
    np.testing.assert_allclose(min_distinguishability(np.array([1.0, 2.0])), [FWHM_PER_SIGMA, 2 * FWHM_PER_SIGMA])
