"""Multipath propagation, noise injection, and calibration checks."""

import numpy as np
import pytest

from chaosmodem.channel import (
    MultipathSpec,
    NoiseSpec,
    QuasiStaticModel,
    add_awgn,
    calibrate_noise,
    draw_gamma,
    gains_from_gamma,
    get_preset,
    propagate,
)


def test_gains_from_gamma_values():
    g = gains_from_gamma(0.6, [0, 1, 2])
    np.testing.assert_allclose(g, [1.0, 0.5488, 0.3012], atol=1e-4)
    assert g[0] == 1.0
    far = gains_from_gamma(50.0, [0, 1, 2])
    assert far[0] == 1.0 and np.all(far[1:] < 1e-20)
    with pytest.raises(ValueError):
        gains_from_gamma(0.0, [0, 1])


def test_multipath_spec_validation():
    spec = MultipathSpec.from_gamma(0.6, (0.0, 1.0))
    assert spec.gamma == 0.6
    assert np.array_equal(spec.gains, gains_from_gamma(0.6, spec.delays))
    assert spec.tau_max == 1.0
    with pytest.raises(ValueError):
        MultipathSpec((1.0, 2.0), (1.0, 0.5))          # first delay not 0
    with pytest.raises(ValueError):
        MultipathSpec((0.0, 1.0, 1.0), (1.0, 0.5, 0.2))  # not increasing
    with pytest.raises(ValueError):
        MultipathSpec((0.0, 1.0), (1.0, 0.9), gamma=0.6)  # gains inconsistent
    with pytest.raises(ValueError):
        MultipathSpec((0.0,), (np.inf,))


def test_delay_samples_grid():
    spec = MultipathSpec((0.0, 0.25, 1.0), (1.0, 0.7, 0.5))
    np.testing.assert_array_equal(spec.delay_samples(8), [0, 2, 8])
    with pytest.raises(ValueError):
        spec.delay_samples(2)  # 0.25 symbol is off the 1/2 grid


def test_propagate_single_path_identity():
    x = np.arange(10.0)
    spec = MultipathSpec((0.0,), (1.0,))
    np.testing.assert_array_equal(propagate(x, spec, 8), x)


def test_propagate_impulse_two_path():
    spec = MultipathSpec.from_gamma(0.6, (0.0, 1.0))
    imp = np.zeros(16)
    imp[0] = 1.0
    out = propagate(imp, spec, 8)
    assert out.size == 16 + 8
    assert out[0] == 1.0
    assert abs(out[8] - 0.5488) < 1e-4
    others = np.delete(out, [0, 8])
    assert np.all(others == 0.0)


def test_propagate_linear_and_shift_invariant():
    rng = np.random.default_rng(5)
    spec = MultipathSpec.from_gamma(0.6, (0.0, 1.0, 2.0))
    a = rng.normal(size=64)
    b = rng.normal(size=64)
    np.testing.assert_allclose(propagate(a + b, spec, 4),
                               propagate(a, spec, 4) + propagate(b, spec, 4),
                               atol=1e-12)
    shifted = np.concatenate([np.zeros(5), a])
    out_shift = propagate(shifted, spec, 4)
    out_plain = propagate(a, spec, 4)
    np.testing.assert_allclose(out_shift[5:], out_plain, atol=0)
    assert np.all(out_shift[:5] == 0.0)


def test_add_awgn_statistics_and_determinism():
    x = np.zeros(1_000_000)
    noisy = add_awgn(x, NoiseSpec("sigma", 1.0), seed=1234)
    v = np.var(noisy)
    assert 0.995 < v < 1.005
    lag1 = np.mean(noisy[1:] * noisy[:-1]) / v
    assert abs(lag1) < 0.01
    again = add_awgn(x, NoiseSpec("sigma", 1.0), seed=1234)
    np.testing.assert_array_equal(noisy, again)
    np.testing.assert_array_equal(add_awgn(x, NoiseSpec("sigma", 0.0), 7), x)


def test_add_awgn_requires_calibrated_sigma():
    with pytest.raises(ValueError):
        add_awgn(np.zeros(4), NoiseSpec("eb_n0_db", 6.0), seed=0)


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec("snr", 1.0)
    with pytest.raises(ValueError):
        NoiseSpec("sigma", -0.1)
    with pytest.raises(ValueError):
        NoiseSpec("eb_n0_db", np.inf)


def test_calibrate_noise():
    sigma = calibrate_noise(0.0, 1.0, 8)
    assert abs(sigma ** 2 - 0.5) < 1e-12
    halved = calibrate_noise(3.010299956639812, 1.0, 8)
    assert abs(halved ** 2 - 0.25) < 1e-12
    with pytest.raises(ValueError):
        calibrate_noise(0.0, 0.0, 8)
    with pytest.raises(ValueError):
        calibrate_noise(0.0, 1.0, 0)


def test_draw_gamma_distribution():
    model = QuasiStaticModel()
    rng = np.random.default_rng(99)
    draws = np.array([draw_gamma(model, rng) for _ in range(100_000)])
    assert np.all((draws >= 0.3) & (draws <= 0.9))
    assert abs(draws.mean() - 0.6) < 0.005
    assert draw_gamma(model, 42) == draw_gamma(model, 42)
    with pytest.raises(ValueError):
        QuasiStaticModel(0.9, 0.3)


def test_presets():
    st2 = get_preset("static2")
    assert st2.delays == (0.0, 1.0) and st2.gamma == 0.6
    st3 = get_preset("static3")
    assert st3.delays == (0.0, 1.0, 2.0)
    assert get_preset("quasi") == get_preset("quasi2")
    assert get_preset("quasi3").delays == (0.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        get_preset("rayleigh")
