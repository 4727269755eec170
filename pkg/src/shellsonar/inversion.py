"""Echo segmentation, range estimation and form-function estimation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .errors import IllConditionedBandError, NoDetectionError, ParameterError
from .physics import FluidMedium, FormFunction
from .signal import Waveform, envelope, matched_filter

RANGE_GATE_M = (1.5, 3.0)
SEGMENT_S = 2.0e-3
DIRECT_SEARCH_S = 1.0e-3
THRESHOLD_FACTOR = 5.0
# Envelope peaks must dominate this neighbourhood, which rejects the
# range sidelobes of an unweighted chirp ahead of the main lobe.
PEAK_NEIGHBOURHOOD_S = 50.0e-6
# Far range sidelobes of the main lobe, which trail it by up to one pulse
# length, are at least this factor weaker than it.
SIDELOBE_RATIO = 10.0
PRE_ONSET_S = 50.0e-6
REG_FLOOR = 1e-10
POOR_BAND_DB = -40.0
POOR_BAND_FRACTION = 0.10


@dataclass(frozen=True)
class SegmentationResult:
    segment: Waveform
    delta_t_s: float
    peak_index: int
    direct_index: int
    start_index: int

    def __post_init__(self):
        fs = self.segment.sample_rate_hz
        if len(self.segment) != int(round(SEGMENT_S * fs)):
            raise ParameterError("segment length differs from the fixed echo duration")
        if not self.delta_t_s > 0:
            raise ParameterError("echo must follow the direct arrival")

    @property
    def start_time_s(self) -> float:
        """Segment start measured from the direct arrival."""
        return (self.start_index - self.direct_index) / self.segment.sample_rate_hz


def _gate_bounds(direct_index, fs, c_host):
    lo = direct_index + int(round(2.0 * RANGE_GATE_M[0] / c_host * fs))
    hi = direct_index + int(round(2.0 * RANGE_GATE_M[1] / c_host * fs))
    return lo, hi


def segment_echo(
    recording: Waveform,
    replica: Waveform,
    c_host: float,
    threshold_factor: float = THRESHOLD_FACTOR,
) -> SegmentationResult:
    """Cut the fixed-length target echo out of a recording.

    The direct arrival is the strongest matched-filter envelope peak in the
    first millisecond. The target is the first envelope peak inside the
    1.5-3 m gate that exceeds ``threshold_factor`` times the gate's median
    envelope and is the largest value within +/-50 us. Peaks 20 dB below a
    value within the following pulse length are range sidelobes and are
    skipped. A lobe already above threshold at the gate's far edge is
    followed to its maximum.
    """
    fs = recording.sample_rate_hz
    seg_len = int(round(SEGMENT_S * fs))
    pre = int(round(PRE_ONSET_S * fs))
    env = envelope(matched_filter(recording, replica))
    direct_index = int(np.argmax(env[: int(round(DIRECT_SEARCH_S * fs)) + 1]))
    lo, hi = _gate_bounds(direct_index, fs, c_host)
    if hi + seg_len > len(recording):
        raise ParameterError(
            f"recording of {len(recording)} samples cannot hold the gate ending at {hi} plus the echo segment"
        )
    gate = env[lo : hi + 1]
    threshold = threshold_factor * float(np.median(gate))
    half = int(round(PEAK_NEIGHBOURHOOD_S * fs))
    # A lobe that crosses the threshold inside the gate may peak just past
    # its end (targets at the far edge); follow it while it stays above.
    above = env > threshold
    end = hi
    while end < min(hi + half, len(env) - 2) and above[end + 1]:
        end += 1
    peak_index = None
    for i in np.flatnonzero(above[lo : end + 1]) + lo:
        if env[i] < env[i - 1] or env[i] <= env[i + 1]:
            continue
        if env[i] < env[max(i - half, 0) : i + half + 1].max():
            continue
        if SIDELOBE_RATIO * env[i] >= env[i : i + len(replica)].max():
            peak_index = int(i)
            break
    if peak_index is None or threshold == 0:
        raise NoDetectionError(
            f"no matched-filter peak above {threshold:.3g} in samples {lo}-{hi}"
        )
    start = peak_index - pre
    segment = Waveform(recording.samples[start : start + seg_len], fs)
    return SegmentationResult(segment, (peak_index - direct_index) / fs, peak_index, direct_index, start)


def estimate_range(delta_t_s: float, c_host: float) -> float:
    """Two-way travel time to one-way distance."""
    if not delta_t_s > 0 or not c_host > 0:
        raise ParameterError(f"travel time and sound speed must be positive (got {delta_t_s}, {c_host})")
    return delta_t_s * c_host / 2.0


def _default_nfft(*lengths):
    return 1 << int(np.ceil(np.log2(2 * max(lengths))))


def estimate_form_function(
    segment: Waveform,
    pulse: Waveform,
    range_m: float,
    host: FluidMedium,
    band_hz: tuple[float, float],
    start_time_s: float = 0.0,
    n_fft: int | None = None,
) -> FormFunction:
    """Form function from an echo and the transmitted pulse.

    ``f = |k| r^2 S(w) / (exp(-2jkr) S_i(w))`` on the transform bins inside
    ``band_hz``, with the division regularised by a floor of 1e-10 times
    the peak pulse power. ``start_time_s`` is the segment's offset from
    transmission, restoring the phase lost by cutting it out.
    """
    fs = segment.sample_rate_hz
    low, high = band_hz
    if not 0 < low < high < fs / 2:
        raise ParameterError(f"band {band_hz} must lie inside (0, {fs / 2}) Hz")
    if not range_m > 0:
        raise ParameterError(f"range must be positive (was {range_m})")
    if pulse.sample_rate_hz != fs:
        raise ParameterError("segment and pulse sample rates differ")
    if n_fft is None:
        n_fft = _default_nfft(len(segment), len(pulse))
    if n_fft < max(len(segment), len(pulse)):
        raise ParameterError(f"n_fft={n_fft} shorter than the inputs")
    freq = np.arange(n_fft // 2 + 1) * (fs / n_fft)
    sel = (freq >= low) & (freq <= high)
    if not sel.any():
        raise ParameterError(f"no transform bins inside {band_hz}")
    freq = freq[sel]
    omega = 2.0 * np.pi * freq
    ref = sfft.rfft(pulse.samples, n_fft)
    peak_power = float(np.max(np.abs(ref) ** 2))
    ref = ref[sel]
    power = np.abs(ref) ** 2
    poor = power < peak_power * 10.0 ** (POOR_BAND_DB / 10.0)
    if poor.mean() > POOR_BAND_FRACTION:
        raise IllConditionedBandError(
            f"pulse spectrum is below {POOR_BAND_DB} dB on {100 * poor.mean():.1f}% of {band_hz}"
        )
    echo = sfft.rfft(segment.samples, n_fft)[sel] * np.exp(-1j * omega * start_time_s)
    k = omega / host.sound_speed
    eps = REG_FLOOR * peak_power
    values = np.abs(k) * range_m**2 * echo * np.exp(2j * k * range_m) * np.conj(ref) / (power + eps)
    return FormFunction(freq, values)
