"""Beta-band biomarker: periodogram, relative beta power and the observation window."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

MIN_SAMPLES = 64
BETA_BAND = (13.0, 35.0)
TOTAL_BAND = (1.0, 200.0)
# Zero-padding factor for band integration; a 128 ms window has 7.8 Hz bins,
# too coarse to integrate a 22 Hz wide band.
PAD_FACTOR = 8


class BiomarkerError(ValueError):
    pass


@dataclass
class PsdEstimate:
    freqs: np.ndarray
    power: np.ndarray  # mean over neurons
    per_neuron: np.ndarray  # (n_neurons, n_bins)

    @property
    def df(self) -> float:
        return float(self.freqs[1] - self.freqs[0])


def hann(n: int) -> np.ndarray:
    """Periodic Hann window."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def periodogram(signal, sampling_rate: float, nfft: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """One-sided Hann periodogram of a mean-detrended signal.

    Scaled so that ``power.sum() * df`` equals the mean square of the
    windowed, detrended signal.  ``signal`` may be 2-D, one series per row.
    """
    x = np.asarray(signal, dtype=float)
    n = x.shape[-1]
    if n < MIN_SAMPLES:
        raise BiomarkerError(f"signal too short: {n} < {MIN_SAMPLES} samples")
    nfft = n if nfft is None else int(nfft)
    if nfft < n:
        raise BiomarkerError("nfft shorter than the signal")
    xw = (x - x.mean(axis=-1, keepdims=True)) * hann(n)
    spec = np.abs(np.fft.rfft(xw, nfft, axis=-1)) ** 2
    spec[..., 1:] *= 2.0
    if nfft % 2 == 0:
        spec[..., -1] /= 2.0
    freqs = np.fft.rfftfreq(nfft, 1.0 / sampling_rate)
    return freqs, spec / (n * sampling_rate)


def band_power(freqs: np.ndarray, power: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Trapezoidal integral over the bins whose centres lie in ``[lo, hi]``."""
    sel = (freqs >= lo) & (freqs <= hi)
    return np.trapezoid(power[..., sel], freqs[sel], axis=-1)


def psd_estimate(traces: np.ndarray, sampling_rate: float, pad: int = PAD_FACTOR) -> PsdEstimate:
    """Per-neuron spectra for traces shaped (n_samples, n_neurons)."""
    x = np.asarray(traces, dtype=float).T
    freqs, per = periodogram(x, sampling_rate, nfft=pad * x.shape[-1])
    return PsdEstimate(freqs=freqs, power=per.mean(axis=0), per_neuron=per)


def beta_power(
    traces: np.ndarray,
    sampling_rate: float,
    window_samples: int | None = None,
    band: tuple[float, float] = BETA_BAND,
    total_band: tuple[float, float] = TOTAL_BAND,
) -> float:
    """Relative beta power averaged over neurons.

    ``traces`` is (n_samples, n_neurons) or 1-D for a single neuron.  When
    ``window_samples`` is given only the most recent samples are analysed.
    A flat trace carries no power and counts as zero beta.
    """
    x = np.asarray(traces, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if window_samples is not None:
        if x.shape[0] < window_samples:
            raise BiomarkerError(
                f"insufficient history: {x.shape[0]} samples, need {window_samples}"
            )
        x = x[-window_samples:]
    est = psd_estimate(x, sampling_rate)
    beta = band_power(est.freqs, est.per_neuron, *band)
    total = band_power(est.freqs, est.per_neuron, *total_band)
    rel = np.divide(beta, total, out=np.zeros_like(beta), where=total > 0)
    return float(np.clip(rel.mean(), 0.0, 1.0))


@dataclass
class ObservationWindow:
    """Last ``n_obs`` beta estimates, oldest first."""

    n_obs: int = 5
    values: deque = field(default_factory=deque)

    def __post_init__(self):
        self.values = deque(self.values, maxlen=self.n_obs)

    @property
    def warmed_up(self) -> bool:
        return len(self.values) == self.n_obs

    def push(self, p: float) -> np.ndarray:
        if not self.values:
            self.values.extend([float(p)] * self.n_obs)
        else:
            self.values.append(float(p))
        return self.state()

    def state(self) -> np.ndarray:
        return np.array(self.values, dtype=float)

    def clear(self) -> None:
        self.values.clear()


def push_and_build_state(window: ObservationWindow, p: float) -> tuple[ObservationWindow, np.ndarray]:
    state = window.push(p)
    return window, state


def mean_beta(window: ObservationWindow | np.ndarray) -> float:
    vals = window.state() if isinstance(window, ObservationWindow) else np.asarray(window, dtype=float)
    if vals.size == 0:
        raise BiomarkerError("empty observation window")
    return float(vals.mean())


class RollingTrace:
    """Fixed-length buffer of the most recent GPi samples."""

    def __init__(self, n_samples: int, n_neurons: int = 10):
        self.n_samples = n_samples
        self.buf = np.zeros((0, n_neurons))

    def extend(self, samples: np.ndarray) -> None:
        self.buf = np.concatenate([self.buf, samples], axis=0)[-self.n_samples :]

    @property
    def full(self) -> bool:
        return self.buf.shape[0] >= self.n_samples
