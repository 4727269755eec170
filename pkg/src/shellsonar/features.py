"""Fixed-length descriptors of an echo and train-only standardization."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, NamedTuple, Optional, Sequence

import numpy as np
from scipy import fft as sfft

from . import BAND_HZ
from .errors import ParameterError
from .physics import FormFunction
from .signal import Waveform

L = 512
KINDS = ("form_function", "frequency", "time")
Kind = Literal["form_function", "frequency", "time"]
STD_FLOOR = 1e-12


@dataclass(frozen=True)
class Descriptor:
    kind: str
    values: np.ndarray
    label: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown descriptor kind {self.kind!r}")
        values = np.asarray(self.values, dtype=float)
        if values.shape != (L,):
            raise ParameterError(f"descriptor must have exactly {L} values (got {values.shape})")
        if not np.all(np.isfinite(values)):
            raise ParameterError("descriptor values must be finite")
        object.__setattr__(self, "values", values)


def band_grid(band_hz=BAND_HZ, length: int = L) -> np.ndarray:
    return np.linspace(band_hz[0], band_hz[1], length)


def _magnitude(values, log_magnitude):
    mag = np.abs(values)
    if log_magnitude:
        return 20.0 * np.log10(np.maximum(mag, 1e-12))
    return mag


def descriptor_form_function(ff: FormFunction, band_hz=BAND_HZ, log_magnitude: bool = False, label=None) -> Descriptor:
    """|f| linearly resampled onto 512 points spanning the band."""
    low, high = band_hz
    freq = ff.freq_hz
    inside = (freq >= low) & (freq <= high)
    if not inside.any():
        raise ParameterError(f"form function has no samples inside {band_hz}")
    step = np.max(np.diff(freq)) if freq.size > 1 else 0.0
    if freq[0] > low + step or freq[-1] < high - step:
        raise ParameterError(f"form function grid {freq[0]:.0f}-{freq[-1]:.0f} Hz does not span {band_hz}")
    grid = band_grid(band_hz)
    values = np.interp(grid, freq, _magnitude(ff.values, log_magnitude))
    return Descriptor("form_function", values, label)


def descriptor_frequency(segment: Waveform, band_hz=BAND_HZ, n_fft: int | None = None, log_magnitude: bool = False, label=None) -> Descriptor:
    """Magnitude spectrum of the gated echo over the band, 512 points."""
    if n_fft is None:
        n_fft = 1 << int(np.ceil(np.log2(2 * len(segment))))
    spec = sfft.rfft(segment.samples, n_fft)
    freq = np.arange(spec.size) * (segment.sample_rate_hz / n_fft)
    values = np.interp(band_grid(band_hz), freq, _magnitude(spec, log_magnitude))
    return Descriptor("frequency", values, label)


def resample_centered(x, length: int) -> np.ndarray:
    """Band-limited resampling to ``length`` points at cell centres.

    Output point ``m`` sits at input position ``(m + 1/2) N / length - 1/2``,
    so reversing the input exactly reverses the output. Content at or above
    the new Nyquist frequency is discarded.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    spec = sfft.rfft(x)
    keep = (length + 1) // 2
    spec = spec[:keep]
    shift = 0.5 * n / length - 0.5
    spec = spec * np.exp(2j * np.pi * np.arange(keep) * shift / n)
    return sfft.irfft(spec, length) * (length / n)


def descriptor_time(segment: Waveform, label=None) -> Descriptor:
    """Gated echo decimated to 512 samples."""
    return Descriptor("time", resample_centered(segment.samples, L), label)


class Standardization(NamedTuple):
    mean: np.ndarray
    std: np.ndarray

    def apply(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.std


def fit_standardization(X) -> Standardization:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ParameterError("standardization needs a non-empty 2-D training matrix")
    return Standardization(X.mean(axis=0), np.maximum(X.std(axis=0), STD_FLOOR))


def standardize(train_set: Sequence[Descriptor], apply_set: Sequence[Descriptor]):
    """Scale both sets with per-position statistics of ``train_set`` only.

    Returns ``(train_std, apply_std, stats)`` where the first two are
    arrays of shape ``(n, 512)``.
    """
    if len(train_set) == 0:
        raise ParameterError("training set is empty")
    Xtr = np.stack([d.values for d in train_set])
    stats = fit_standardization(Xtr)
    Xap = np.stack([d.values for d in apply_set]) if len(apply_set) else np.empty((0, Xtr.shape[1]))
    return stats.apply(Xtr), stats.apply(Xap), stats


def save_descriptors(path, kind: str, X, labels, ids=None) -> None:
    """Persist a descriptor matrix with its kind tag, length and labels."""
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=str)
    if ids is None:
        ids = np.arange(X.shape[0])
    with open(path, "wb") as fh:
        np.savez(fh, kind=np.array(kind), length=np.array(X.shape[1]), X=X, labels=labels, ids=np.asarray(ids))


def load_descriptors(path):
    with np.load(path, allow_pickle=False) as data:
        kind = str(data["kind"])
        X = data["X"]
        if int(data["length"]) != X.shape[1]:
            raise ParameterError("descriptor file length tag disagrees with its matrix")
        return kind, X, data["labels"].astype(str), data["ids"]
