import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from seadbs.biomarker import (
    BiomarkerError,
    ObservationWindow,
    RollingTrace,
    band_power,
    beta_power,
    hann,
    mean_beta,
    periodogram,
    push_and_build_state,
)

FS = 2000.0
N = 256
T = np.arange(N) / FS

# frozen from oracles.relative_beta_sine (8x zero padding)
REL_BETA_20HZ = 0.9184162593893309
REL_BETA_50HZ = 0.000266983150935272


def sine(f, amp=1.0, phase=0.0):
    return amp * np.sin(2 * np.pi * f * T + phase)


def test_sine_20hz_matches_oracle():
    assert beta_power(sine(20.0), FS) == pytest.approx(REL_BETA_20HZ, abs=1e-12)


def test_sine_50hz_matches_oracle():
    assert beta_power(sine(50.0), FS) == pytest.approx(REL_BETA_50HZ, abs=1e-12)


def test_periodogram_peak_at_signal_frequency():
    # 256 ms at 2 kHz; a single Hann bin cannot hold 90% of a tone, the main lobe does
    n = 512
    x = np.sin(2 * np.pi * 20.0 * np.arange(n) / FS)
    f, p = periodogram(x, FS, nfft=8 * n)
    assert 19.5 <= f[np.argmax(p)] <= 20.5
    lobe = np.abs(f - 20.0) <= 2 * FS / n
    assert p[lobe].sum() / p.sum() > 0.9


def test_identical_neurons_equal_single_neuron():
    x = sine(23.0) + 0.2 * sine(61.0)
    assert beta_power(np.tile(x[:, None], (1, 10)), FS) == pytest.approx(beta_power(x, FS), abs=1e-14)


def test_periodogram_parseval():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(N)
    f, p = periodogram(x, FS)
    xw = (x - x.mean()) * hann(N)
    assert p.sum() * (f[1] - f[0]) == pytest.approx(np.mean(xw**2), rel=1e-12)


def test_periodogram_rejects_short_signal():
    with pytest.raises(BiomarkerError):
        periodogram(np.zeros(10), FS)


def test_beta_power_insufficient_history():
    with pytest.raises(BiomarkerError):
        beta_power(np.zeros((100, 10)), FS, window_samples=256)


def test_flat_trace_is_zero_beta():
    assert beta_power(np.full((N, 10), -65.0), FS) == 0.0


def test_window_uses_most_recent_samples():
    old = np.tile(sine(50.0)[:, None], (1, 3))
    new = np.tile(sine(20.0)[:, None], (1, 3))
    x = np.concatenate([old, new])
    assert beta_power(x, FS, window_samples=N) == pytest.approx(beta_power(new, FS))


def test_multi_neuron_average():
    x = np.stack([sine(20.0), sine(50.0)], axis=1)
    assert beta_power(x, FS) == pytest.approx(0.5 * (REL_BETA_20HZ + REL_BETA_50HZ))


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(-100.0, 100.0), st.floats(5.0, 150.0), st.floats(0, 6.28))
def test_amplitude_and_offset_invariance(scale, offset, freq, phase):
    x = sine(freq, phase=phase) + 0.3 * sine(2.1 * freq)
    ref = beta_power(x, FS)
    assert abs(beta_power(scale * x + offset, FS) - ref) < 1e-9
    assert 0.0 <= ref <= 1.0


def test_band_power_of_constant_density():
    f = np.linspace(0, 100, 1001)
    assert band_power(f, np.ones_like(f), 13.0, 35.0) == pytest.approx(22.0)


def test_observation_window_pads_then_rolls():
    w = ObservationWindow(3)
    np.testing.assert_array_equal(w.push(0.4), [0.4, 0.4, 0.4])
    w, s = push_and_build_state(w, 0.1)
    np.testing.assert_array_equal(s, [0.4, 0.4, 0.1])
    w.push(0.2)
    w.push(0.3)
    np.testing.assert_array_equal(w.state(), [0.1, 0.2, 0.3])
    assert mean_beta(w) == pytest.approx(0.2)
    w.clear()
    with pytest.raises(BiomarkerError):
        mean_beta(w)


def test_rolling_trace_keeps_tail():
    r = RollingTrace(5, n_neurons=1)
    r.extend(np.arange(3.0)[:, None])
    assert not r.full
    r.extend(np.arange(3.0, 8.0)[:, None])
    assert r.full
    np.testing.assert_array_equal(r.buf[:, 0], [3, 4, 5, 6, 7])


def test_oracle_agrees_on_other_frequencies():
    for f in (10.0, 15.0, 30.0, 40.0):
        assert beta_power(sine(f), FS) == pytest.approx(oracles.relative_beta_sine(f), abs=1e-12)
