"""Synthetic tank recordings built by inverting the form-function estimator.

The echo spectrum is ``f(w) exp(-2jkr) S_i(w) / (|k| r^2)`` so that the
estimator in :mod:`shellsonar.inversion` recovers ``f`` exactly.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
from scipy import fft as sfft

from . import BAND_HZ
from .errors import ParameterError
from .physics import ALUMINIUM, AIR, WATER, ElasticSolid, FluidMedium, FormFunction, ShellTarget, form_function_shell
from .signal import Waveform

log = logging.getLogger(__name__)

Label = Literal["air", "water"]
LABELS: tuple[str, str] = ("air", "water")

RANGE_GATE_M = (1.5, 3.0)
SEGMENT_S = 2.0e-3
DC_CUTOFF_HZ = 1.0e3
MIN_CLUTTER_RECORDING_S = 30.0e-3


@dataclass(frozen=True)
class SceneConfig:
    range_m: float
    target: ShellTarget
    snr_db: float
    clutter_enabled: bool
    recording_duration_s: float
    seed: int

    def __post_init__(self):
        lo, hi = RANGE_GATE_M
        if not lo <= self.range_m <= hi:
            raise ParameterError(f"range {self.range_m} m outside the {lo}-{hi} m gate")
        c = self.target.host.sound_speed
        needed = 2.0 * hi / c + SEGMENT_S
        if self.recording_duration_s < needed:
            raise ParameterError(
                f"recording of {self.recording_duration_s} s cannot hold the gate plus segment ({needed:.4g} s)"
            )


@dataclass(frozen=True)
class LabeledRecording:
    recording: Waveform
    label: str
    truth: SceneConfig
    flagged_bins: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.label not in LABELS:
            raise ParameterError(f"unknown label {self.label!r}")
        if filler_label(self.truth.target.filler) != self.label:
            raise ParameterError("label disagrees with the target filler")


def filler_label(filler: FluidMedium) -> str:
    """Class of a filler: gas-like fillers are 'air', liquids 'water'."""
    return "air" if filler.density < 100.0 else "water"


def _interp_complex(x, xp, fp):
    re = np.interp(x, xp, fp.real, left=0.0, right=0.0)
    im = np.interp(x, xp, fp.imag, left=0.0, right=0.0)
    return re + 1j * im


def synthesize_echo(
    pulse: Waveform,
    ff: FormFunction,
    range_m: float,
    host: FluidMedium,
    n_fft: int,
) -> Waveform:
    """Echo of ``pulse`` scattered with form function ``ff`` from ``range_m``.

    Returns ``n_fft`` samples with time zero at the start of transmission.
    The form function is linearly interpolated onto the transform bins and
    taken as zero outside its grid and below 1 kHz.
    """
    if not range_m > 0:
        raise ParameterError(f"range must be positive (was {range_m})")
    fs = pulse.sample_rate_hz
    delay = 2.0 * range_m / host.sound_speed
    if delay * fs + len(pulse) > n_fft:
        raise ParameterError(
            f"round-trip delay {delay:.4g} s plus pulse does not fit in n_fft={n_fft}"
        )
    spec = sfft.rfft(pulse.samples, n_fft)
    freq = np.arange(spec.size) * (fs / n_fft)
    k = 2.0 * np.pi * freq / host.sound_speed
    f_bins = _interp_complex(freq, ff.freq_hz, ff.values)
    f_bins[freq < DC_CUTOFF_HZ] = 0.0
    gain = np.zeros(spec.size, dtype=complex)
    live = f_bins != 0
    gain[live] = f_bins[live] * np.exp(-2j * k[live] * range_m) / (np.abs(k[live]) * range_m**2)
    return Waveform(sfft.irfft(gain * spec, n_fft), fs)


def scene_form_function(target: ShellTarget, freq_hz) -> FormFunction:
    """Shell form function as a transfer function for sampled signals.

    The analytic result uses ``exp(-i w t)`` and is phase-referenced to the
    sphere centre; this conjugates it into the DFT sign convention and moves
    the reference to the front surface, so ``range_m`` is the distance to
    the surface that the matched filter actually measures. The magnitude is
    unchanged.
    """
    ff = form_function_shell(target, freq_hz)
    k = 2.0 * np.pi * ff.freq_hz / target.host.sound_speed
    values = np.conj(ff.values) * np.exp(-2j * k * target.outer_radius_m)
    return FormFunction(ff.freq_hz, values, ff.outer_radius_m, ff.perturbed)


def inject_direct_signal(recording: Waveform, pulse: Waveform, ratio: float = 10.0, reference: float | None = None) -> Waveform:
    """Add the transmit breakthrough at sample 0.

    Its peak is ``ratio`` times ``reference`` (the recording's peak by
    default; unit amplitude if the recording is silent).
    """
    if len(recording) <= len(pulse):
        raise ParameterError("recording must be longer than the pulse")
    if reference is None:
        reference = float(np.max(np.abs(recording.samples)))
    if reference == 0:
        reference = 1.0
    gain = ratio * reference / float(np.max(np.abs(pulse.samples)))
    out = recording.samples.copy()
    out[: len(pulse)] += gain * pulse.samples
    return Waveform(out, recording.sample_rate_hz)


def add_noise(w: Waveform, snr_db: float, seed: int, signal_region: tuple[int, int] | None = None) -> Waveform:
    """Add white Gaussian noise at ``snr_db`` relative to the signal power.

    Signal power is measured over ``signal_region`` (sample slice bounds),
    or the whole waveform. ``snr_db=inf`` returns the input unchanged.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return w
    lo, hi = signal_region if signal_region is not None else (0, len(w))
    power = float(np.mean(w.samples[lo:hi] ** 2))
    if power == 0:
        raise ParameterError("cannot set an SNR against a zero-energy signal")
    sigma = math.sqrt(power / 10.0 ** (snr_db / 10.0))
    rng = np.random.default_rng(seed)
    return Waveform(w.samples + sigma * rng.standard_normal(len(w)), w.sample_rate_hz)


def clutter_window(c_host: float, pulse_s: float, fs: float) -> int:
    """First sample at which tank-boundary paths may start.

    Keeps clutter, and its matched-filter footprint, clear of the range
    gate and the echo segment that follows the latest in-gate detection.
    """
    gate_end = 2.0 * RANGE_GATE_M[1] / c_host
    return int(math.ceil((gate_end + SEGMENT_S + pulse_s) * fs))


def add_clutter(w: Waveform, seed: int, pulse: Waveform, c_host: float = WATER.sound_speed, level: float | None = None) -> Waveform:
    """Add 3 to 6 attenuated pulse copies from tank boundaries.

    Delays are uniform over the part of the recording after
    :func:`clutter_window`; amplitudes are 5-50 % of ``level`` (the
    recording's peak by default).
    """
    fs = w.sample_rate_hz
    if w.duration_s < MIN_CLUTTER_RECORDING_S:
        raise ParameterError(f"clutter needs a recording of at least {MIN_CLUTTER_RECORDING_S} s")
    first = clutter_window(c_host, pulse.duration_s, fs)
    last = len(w) - len(pulse)
    if last <= first:
        raise ParameterError("recording too short to place clutter outside the gate")
    rng = np.random.default_rng(seed)
    count = int(rng.integers(3, 7))
    delays = rng.integers(first, last, size=count)
    if level is None:
        level = float(np.max(np.abs(w.samples))) or 1.0
    amps = level * rng.uniform(0.05, 0.5, size=count) * rng.choice([-1.0, 1.0], size=count)
    out = w.samples.copy()
    for d, amp in zip(delays, amps):
        out[d : d + len(pulse)] += amp * pulse.samples
    return Waveform(out, fs)


@dataclass(frozen=True)
class ParamRanges:
    radius_m: tuple[float, float] = (0.030, 0.080)
    thickness_m: tuple[float, float] = (0.002, 0.008)
    range_m: tuple[float, float] = RANGE_GATE_M
    snr_db: tuple[float, float] = (10.0, 30.0)
    shell: ElasticSolid = ALUMINIUM
    host: FluidMedium = WATER
    fillers: tuple[FluidMedium, FluidMedium] = (AIR, WATER)


@dataclass(frozen=True)
class SynthSettings:
    """Fixed rendering parameters shared by every scene in a dataset."""

    n_samples: int = 32768
    ff_band_hz: tuple[float, float] = (15.0e3, 175.0e3)
    ff_step_hz: float = 1.0e6 / 8192
    clutter: bool = True
    direct_ratio: float = 10.0

    def ff_grid(self) -> np.ndarray:
        lo, hi = self.ff_band_hz
        return np.arange(lo, hi + 0.5 * self.ff_step_hz, self.ff_step_hz)


def example_seed(master_seed: int, index: int) -> int:
    seq = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def draw_scene(index: int, ranges: ParamRanges, master_seed: int, settings: SynthSettings, pulse: Waveform) -> SceneConfig:
    seed = example_seed(master_seed, index)
    rng = np.random.default_rng(seed)
    radius = rng.uniform(*ranges.radius_m)
    thickness = rng.uniform(*ranges.thickness_m)
    range_m = rng.uniform(*ranges.range_m)
    snr = rng.uniform(*ranges.snr_db)
    filler = ranges.fillers[index % 2]
    target = ShellTarget(radius, thickness, ranges.shell, filler, ranges.host)
    return SceneConfig(
        range_m=range_m,
        target=target,
        snr_db=snr,
        clutter_enabled=settings.clutter,
        recording_duration_s=settings.n_samples / pulse.sample_rate_hz,
        seed=seed,
    )


def render_scene(scene: SceneConfig, pulse: Waveform, settings: SynthSettings = SynthSettings(), ff: FormFunction | None = None) -> tuple[Waveform, FormFunction]:
    """Full recording of one scene: echo, direct arrival, clutter, noise."""
    fs = pulse.sample_rate_hz
    host = scene.target.host
    n = int(round(scene.recording_duration_s * fs))
    if ff is None:
        ff = scene_form_function(scene.target, settings.ff_grid())
    echo = synthesize_echo(pulse, ff, scene.range_m, host, n)
    gate = (
        int(2.0 * RANGE_GATE_M[0] / host.sound_speed * fs),
        int(math.ceil(2.0 * RANGE_GATE_M[1] / host.sound_speed * fs)),
    )
    echo_peak = float(np.max(np.abs(echo.samples)))
    rec = inject_direct_signal(echo, pulse, settings.direct_ratio, reference=echo_peak)
    ss = np.random.SeedSequence(scene.seed).spawn(2)
    if scene.clutter_enabled:
        rec = add_clutter(rec, int(ss[0].generate_state(1)[0]), pulse, host.sound_speed, level=settings.direct_ratio * echo_peak)
    # The gate plus one pulse length holds only the echo, never the direct
    # arrival or clutter.
    noise_ref = (gate[0], gate[1] + len(pulse))
    rec = add_noise(rec, scene.snr_db, int(ss[1].generate_state(1)[0]), signal_region=noise_ref)
    return rec, ff


def _make_example(index, ranges, master_seed, settings, pulse):
    scene = draw_scene(index, ranges, master_seed, settings, pulse)
    rec, ff = render_scene(scene, pulse, settings)
    return LabeledRecording(rec, filler_label(scene.target.filler), scene, int(ff.perturbed.sum()))


def generate_dataset(
    n_per_class: int,
    param_ranges: ParamRanges = ParamRanges(),
    master_seed: int = 0,
    pulse: Waveform | None = None,
    settings: SynthSettings = SynthSettings(),
    jobs: int = 1,
) -> list[LabeledRecording]:
    """Labelled recordings alternating air- and water-filled shells.

    Each example draws its parameters from a stream derived from
    ``(master_seed, index)``, so serial and parallel runs agree exactly.
    """
    if n_per_class < 1:
        raise ParameterError(f"n_per_class must be >= 1 (was {n_per_class})")
    if pulse is None:
        from .signal import make_chirp

        pulse = make_chirp(BAND_HZ[1], BAND_HZ[0], 1e-3, 1e6)
    indices = range(2 * n_per_class)
    if jobs == 1:
        return [_make_example(i, param_ranges, master_seed, settings, pulse) for i in indices]
    from joblib import Parallel, delayed

    return list(
        Parallel(n_jobs=jobs)(
            delayed(_make_example)(i, param_ranges, master_seed, settings, pulse) for i in indices
        )
    )


def with_range(scene: SceneConfig, range_m: float) -> SceneConfig:
    return replace(scene, range_m=range_m)
