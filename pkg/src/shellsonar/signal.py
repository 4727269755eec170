"""Pulse generation, one-sided spectra and matched filtering."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy import signal as ssig

from .errors import ParameterError


@dataclass(frozen=True)
class Waveform:
    """Uniformly sampled real time series."""

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise ParameterError("waveform samples must be one-dimensional")
        if not np.all(np.isfinite(samples)):
            raise ParameterError("waveform samples must be finite")
        if not self.sample_rate_hz > 0:
            raise ParameterError(f"sample rate must be positive (was {self.sample_rate_hz})")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    @property
    def time_s(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate_hz


@dataclass(frozen=True)
class Spectrum:
    """One-sided complex spectrum of a real signal.

    ``n_fft`` records the transform length so the real signal can be
    rebuilt; bins run from DC up to ``n_fft // 2``.
    """

    values: np.ndarray
    freq_hz: np.ndarray
    n_fft: int
    sample_rate_hz: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        freq = np.asarray(self.freq_hz, dtype=float)
        if values.shape != freq.shape:
            raise ParameterError("spectrum values and frequency grid differ in length")
        if freq.size != self.n_fft // 2 + 1:
            raise ParameterError("one-sided spectrum must hold n_fft // 2 + 1 bins")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "freq_hz", freq)


def make_chirp(f_start_hz, f_end_hz, duration_s, sample_rate_hz, taper=0.0) -> Waveform:
    """Linear FM pulse ``sin(2*pi*phi(t))`` sweeping ``f_start`` to ``f_end``.

    ``taper`` is the fraction of the pulse covered by a cosine (Tukey)
    envelope; 0 leaves the pulse rectangular.
    """
    nyq = sample_rate_hz / 2.0
    for f in (f_start_hz, f_end_hz):
        if not 0.0 < f < nyq:
            raise ParameterError(f"chirp frequency {f} Hz outside (0, {nyq}) Hz")
    if duration_s <= 0:
        raise ParameterError(f"chirp duration must be positive (was {duration_s})")
    if not 0.0 <= taper <= 1.0:
        raise ParameterError(f"taper fraction must lie in [0, 1] (was {taper})")
    n = int(round(duration_s * sample_rate_hz))
    t = np.arange(n) / sample_rate_hz
    sweep = (f_end_hz - f_start_hz) / duration_s
    phase = f_start_hz * t + 0.5 * sweep * t**2
    samples = np.sin(2.0 * np.pi * phase)
    if taper > 0:
        samples = samples * ssig.windows.tukey(n, taper)
    return Waveform(samples, sample_rate_hz)


def forward_transform(w: Waveform, n_fft: int) -> Spectrum:
    """Zero-padded one-sided DFT (unnormalized, ``numpy`` sign convention)."""
    if n_fft < len(w):
        raise ParameterError(f"n_fft={n_fft} shorter than signal length {len(w)}")
    values = sfft.rfft(w.samples, n_fft)
    freq = np.arange(values.size) * (w.sample_rate_hz / n_fft)
    return Spectrum(values, freq, n_fft, w.sample_rate_hz)


def inverse_transform(s: Spectrum, out_len: int) -> Waveform:
    if out_len > s.n_fft:
        raise ParameterError(f"out_len={out_len} exceeds n_fft={s.n_fft}")
    samples = sfft.irfft(s.values, s.n_fft)[:out_len]
    return Waveform(samples, s.sample_rate_hz)


def spectral_energy(s: Spectrum) -> float:
    """Time-domain energy implied by a one-sided spectrum (Parseval)."""
    power = np.abs(s.values) ** 2
    weights = np.full(power.size, 2.0)
    weights[0] = 1.0
    if s.n_fft % 2 == 0:
        weights[-1] = 1.0
    return float(np.sum(weights * power) / s.n_fft)


def matched_filter(recording: Waveform, replica: Waveform) -> Waveform:
    """Cross-correlate ``recording`` with ``replica``.

    Output sample ``k`` holds the correlation for the replica starting at
    recording sample ``k``, divided by the replica energy, so an embedded
    copy with amplitude ``A`` peaks at ``A``.
    """
    if recording.sample_rate_hz != replica.sample_rate_hz:
        raise ParameterError("recording and replica sample rates differ")
    if len(replica) >= len(recording):
        raise ParameterError("replica must be shorter than the recording")
    energy = float(np.dot(replica.samples, replica.samples))
    if energy == 0:
        raise ParameterError("replica has zero energy")
    n = sfft.next_fast_len(len(recording) + len(replica) - 1, real=True)
    prod = sfft.rfft(recording.samples, n) * np.conj(sfft.rfft(replica.samples, n))
    corr = sfft.irfft(prod, n)[: len(recording)]
    return Waveform(corr / energy, recording.sample_rate_hz)


def envelope(w: Waveform) -> np.ndarray:
    """Magnitude of the analytic signal."""
    return np.abs(ssig.hilbert(w.samples))
