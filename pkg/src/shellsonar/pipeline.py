"""Recording-to-descriptor processing chain shared by the CLI and tests."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import BAND_HZ
from .features import KINDS, Descriptor, descriptor_form_function, descriptor_frequency, descriptor_time
from .inversion import estimate_form_function, estimate_range, segment_echo
from .physics import FluidMedium, FormFunction
from .signal import Waveform


@dataclass(frozen=True)
class Processed:
    descriptors: dict
    range_m: float
    form_function: FormFunction
    peak_index: int
    direct_index: int


def process_recording(
    recording: Waveform,
    pulse: Waveform,
    host: FluidMedium,
    band_hz=BAND_HZ,
    log_magnitude: bool = False,
    label=None,
) -> Processed:
    """Segment, estimate range and form function, build every descriptor."""
    seg = segment_echo(recording, pulse, host.sound_speed)
    r = estimate_range(seg.delta_t_s, host.sound_speed)
    ff = estimate_form_function(seg.segment, pulse, r, host, band_hz, start_time_s=seg.start_time_s)
    descriptors = {
        "form_function": descriptor_form_function(ff, band_hz, log_magnitude, label),
        "frequency": descriptor_frequency(seg.segment, band_hz, log_magnitude=log_magnitude, label=label),
        "time": descriptor_time(seg.segment, label),
    }
    return Processed(descriptors, r, ff, seg.peak_index, seg.direct_index)


def descriptor_matrix(processed: list[Processed], kind: str) -> np.ndarray:
    if kind not in KINDS:
        raise ValueError(f"unknown descriptor kind {kind!r}")
    return np.stack([p.descriptors[kind].values for p in processed])


def as_descriptors(X, kind: str, labels=None) -> list[Descriptor]:
    labels = [None] * len(X) if labels is None else labels
    return [Descriptor(kind, row, lab) for row, lab in zip(X, labels)]
