import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from shellsonar.errors import ParameterError
from shellsonar.features import (
    L,
    Descriptor,
    band_grid,
    descriptor_form_function,
    descriptor_frequency,
    descriptor_time,
    fit_standardization,
    load_descriptors,
    resample_centered,
    save_descriptors,
    standardize,
)
from shellsonar.physics import FormFunction
from shellsonar.signal import Waveform

FS = 1.0e6
BAND = (30e3, 160e3)


def test_grid():
    g = band_grid(BAND)
    assert g.size == L and g[0] == 30e3 and g[-1] == 160e3


class TestDescriptor:
    def test_validation(self):
        with pytest.raises(ParameterError):
            Descriptor("form_function", np.zeros(511))
        with pytest.raises(ParameterError):
            Descriptor("spectrogram", np.zeros(L))
        with pytest.raises(ParameterError):
            Descriptor("time", np.full(L, np.nan))

    def test_form_function_resampling_is_exact_for_linear_magnitude(self):
        f = np.linspace(25e3, 165e3, 300)
        mag = 1.0 + f / 1e5
        d = descriptor_form_function(FormFunction(f, mag * np.exp(1j * f)), BAND, label="air")
        np.testing.assert_allclose(d.values, 1.0 + band_grid(BAND) / 1e5, rtol=1e-12)
        assert d.label == "air" and d.kind == "form_function"

    def test_unit_magnitude_gives_ones(self):
        f = np.linspace(25e3, 165e3, 300)
        d = descriptor_form_function(FormFunction(f, np.exp(0.7j * np.arange(300))), BAND)
        np.testing.assert_allclose(d.values, 1.0, rtol=1e-12)

    def test_zero_segment_gives_zero_vectors(self):
        seg = Waveform(np.zeros(2000), FS)
        assert not descriptor_frequency(seg, BAND).values.any()
        assert not descriptor_time(seg).values.any()

    def test_in_band_tone_gives_single_region(self):
        t = np.arange(2000) / FS
        d = descriptor_frequency(Waveform(np.cos(2 * np.pi * 90e3 * t), FS), BAND).values
        peak = int(np.argmax(d))
        assert band_grid(BAND)[peak] == pytest.approx(90e3, abs=1e3)
        far = np.abs(band_grid(BAND) - 90e3) > 5e3
        assert d[far].max() < 0.1 * d[peak]

    def test_log_magnitude(self):
        f = np.linspace(25e3, 165e3, 300)
        d = descriptor_form_function(FormFunction(f, np.full(300, 0.1)), BAND, log_magnitude=True)
        np.testing.assert_allclose(d.values, -20.0)

    def test_form_function_must_span_band(self):
        f = np.linspace(50e3, 165e3, 300)
        with pytest.raises(ParameterError):
            descriptor_form_function(FormFunction(f, np.ones(300)), BAND)

    def test_frequency_descriptor_matches_spectrum(self, pulse):
        seg = np.zeros(2000)
        seg[100:1100] = pulse.samples
        d = descriptor_frequency(Waveform(seg, FS), BAND, n_fft=1 << 16)
        direct = np.abs([np.sum(seg * np.exp(-2j * np.pi * f * np.arange(2000) / FS)) for f in band_grid(BAND)[::64]])
        np.testing.assert_allclose(d.values[::64], direct, rtol=1e-3)


class TestTimeDescriptor:
    @settings(max_examples=30, deadline=None)
    @given(arrays(np.float64, 2000, elements=st.floats(-1, 1)))
    def test_time_reversal(self, x):
        fwd = descriptor_time(Waveform(x, FS)).values
        rev = descriptor_time(Waveform(x[::-1].copy(), FS)).values
        np.testing.assert_allclose(rev, fwd[::-1], atol=1e-12)

    def test_band_limited_tone_sampled_at_cell_centres(self):
        n = 2000
        cycles = 37
        x = np.cos(2 * np.pi * cycles * np.arange(n) / n + 0.3)
        pos = (np.arange(L) + 0.5) * n / L - 0.5
        expected = np.cos(2 * np.pi * cycles * pos / n + 0.3)
        np.testing.assert_allclose(resample_centered(x, L), expected, atol=1e-10)

    def test_length(self, rng):
        assert descriptor_time(Waveform(rng.standard_normal(2000), FS)).values.shape == (L,)


class TestStandardization:
    def test_uses_training_statistics_only(self, rng):
        train = [Descriptor("time", v) for v in rng.standard_normal((20, L)) * 3 + 1]
        test_a = [Descriptor("time", v) for v in rng.standard_normal((5, L))]
        test_b = [Descriptor("time", v) for v in rng.standard_normal((5, L)) * 100]
        tr_a, ap_a, s_a = standardize(train, test_a)
        tr_b, _, s_b = standardize(train, test_b)
        np.testing.assert_array_equal(tr_a, tr_b)
        np.testing.assert_array_equal(s_a.mean, s_b.mean)
        np.testing.assert_allclose(tr_a.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(tr_a.std(axis=0), 1.0, rtol=1e-12)
        X = np.stack([d.values for d in test_a])
        np.testing.assert_allclose(ap_a, (X - s_a.mean) / s_a.std)

    def test_constant_position_stays_finite(self):
        X = np.ones((4, L))
        X[:, 0] = [1, 2, 3, 4]
        stats = fit_standardization(X)
        assert np.all(np.isfinite(stats.apply(X)))
        assert np.all(stats.apply(X)[:, 1:] == 0)

    def test_empty_training_set(self):
        with pytest.raises(ParameterError):
            standardize([], [])


def test_descriptor_file_roundtrip(tmp_path, rng):
    X = rng.standard_normal((6, L))
    labels = ["air", "water"] * 3
    save_descriptors(tmp_path / "d.npz", "frequency", X, labels)
    kind, X2, labels2, ids = load_descriptors(tmp_path / "d.npz")
    assert kind == "frequency"
    np.testing.assert_array_equal(X2, X)
    assert labels2.tolist() == labels and ids.tolist() == list(range(6))
