import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import fft as sfft

from shellsonar.errors import ParameterError
from shellsonar.physics import AIR, ALUMINIUM, WATER, FormFunction, ShellTarget, form_function_shell
from shellsonar.signal import Waveform, matched_filter
from shellsonar.synth import (
    LabeledRecording,
    ParamRanges,
    SceneConfig,
    SynthSettings,
    add_clutter,
    add_noise,
    clutter_window,
    draw_scene,
    filler_label,
    generate_dataset,
    inject_direct_signal,
    render_scene,
    scene_form_function,
    synthesize_echo,
    with_range,
)

FS = 1.0e6
N = 8192
C = WATER.sound_speed


def bins(n=N):
    return np.arange(n // 2 + 1) * FS / n


def compensating_ff(range_m, n=N):
    """Form function that exactly undoes spreading and propagation."""
    f = bins(n)
    k = 2 * np.pi * f / C
    return FormFunction(f, np.abs(k) * range_m**2 * np.exp(2j * k * range_m))


def padded(pulse, n=N, shift=0):
    """Delayed pulse with the bins below 1 kHz removed."""
    out = np.zeros(n)
    out[shift : shift + len(pulse)] = pulse.samples
    spec = sfft.rfft(out)
    spec[bins(n) < 1e3] = 0.0
    return sfft.irfft(spec, n)


class TestSynthesizeEcho:
    def test_identity_form_function_returns_the_pulse(self, pulse):
        r = 2.0
        echo = synthesize_echo(pulse, compensating_ff(r), r, WATER, N).samples
        ref = padded(pulse)
        assert np.linalg.norm(echo - ref) <= 1e-12 * np.linalg.norm(ref)

    def test_integer_delay(self, pulse):
        r = C * 2500 / (2 * FS)
        f = bins()
        ff = FormFunction(f, 2 * np.pi * f / C * r**2)
        echo = synthesize_echo(pulse, ff, r, WATER, N).samples
        ref = padded(pulse, shift=2500)
        assert np.linalg.norm(echo - ref) <= 1e-12 * np.linalg.norm(ref)
        mf = matched_filter(Waveform(echo, FS), pulse).samples
        assert np.argmax(mf) == 2500

    @settings(max_examples=20, deadline=None)
    @given(r=st.floats(0.5, 2.5))
    def test_inverse_square_spreading(self, r):
        from shellsonar.signal import make_chirp

        p = make_chirp(160e3, 30e3, 1e-3, FS)
        ff = FormFunction(bins(), np.ones(N // 2 + 1))
        e1 = synthesize_echo(p, ff, r, WATER, N).samples
        e2 = synthesize_echo(p, ff, 2 * r, WATER, N).samples
        assert np.dot(e1, e1) / np.dot(e2, e2) == pytest.approx(16.0, rel=1e-9)

    def test_delay_must_fit(self, pulse):
        ff = FormFunction(bins(), np.ones(N // 2 + 1))
        with pytest.raises(ParameterError):
            synthesize_echo(pulse, ff, 6.0, WATER, N)
        with pytest.raises(ParameterError):
            synthesize_echo(pulse, ff, 0.0, WATER, N)


def test_scene_form_function_keeps_magnitude(water_shell):
    f = np.linspace(20e3, 170e3, 50)
    np.testing.assert_allclose(
        np.abs(scene_form_function(water_shell, f).values),
        np.abs(form_function_shell(water_shell, f).values),
        rtol=1e-12,
    )


class TestNoise:
    def test_measured_snr(self, pulse):
        x = np.tile(pulse.samples, 200)
        w = Waveform(x, FS)
        for snr in (10.0, 20.0, 30.0):
            noisy = add_noise(w, snr, seed=int(snr))
            noise = noisy.samples - x
            measured = 10 * np.log10(np.mean(x**2) / np.mean(noise**2))
            assert abs(measured - snr) <= 0.5

    def test_signal_region_sets_reference(self):
        x = np.zeros(20000)
        x[5000:10000] = 1.0
        noisy = add_noise(Waveform(x, FS), 0.0, seed=1, signal_region=(5000, 10000))
        assert np.std(noisy.samples[:5000]) == pytest.approx(1.0, rel=0.05)

    def test_infinite_snr_is_identity(self, pulse):
        assert add_noise(pulse, np.inf, seed=0) is pulse

    def test_zero_signal_rejected(self):
        with pytest.raises(ParameterError):
            add_noise(Waveform(np.zeros(100), FS), 10.0, seed=0)

    def test_seeded(self, pulse):
        a = add_noise(pulse, 10.0, seed=5).samples
        b = add_noise(pulse, 10.0, seed=5).samples
        c = add_noise(pulse, 10.0, seed=6).samples
        assert np.array_equal(a, b) and not np.array_equal(a, c)


class TestClutter:
    def test_replicas_lie_beyond_the_gate(self, pulse):
        w = Waveform(np.zeros(32768), FS)
        first = clutter_window(C, pulse.duration_s, FS)
        for seed in range(10):
            out = add_clutter(w, seed, pulse, C, level=1.0).samples
            assert not out[:first].any()
            mf = matched_filter(Waveform(out, FS), pulse).samples
            peaks = np.flatnonzero(np.abs(mf) > 0.04)
            onsets = peaks[np.r_[True, np.diff(peaks) > len(pulse)]]
            assert 3 <= len(onsets) <= 6
            assert np.abs(out).max() <= 6 * 0.5 + 1e-12

    def test_arrivals_at_injected_delays(self, pulse):
        w = Waveform(np.zeros(32768), FS)
        for seed in range(5):
            out = add_clutter(w, seed, pulse, C, level=1.0).samples
            # replay the generator's draws as the oracle
            rng = np.random.default_rng(seed)
            count = int(rng.integers(3, 7))
            delays = rng.integers(clutter_window(C, pulse.duration_s, FS), 32768 - len(pulse), size=count)
            amps = rng.uniform(0.05, 0.5, size=count) * rng.choice([-1.0, 1.0], size=count)
            mf = matched_filter(Waveform(out, FS), pulse).samples
            for d, a in zip(delays, amps):
                if np.sort(np.abs(delays - d))[1] < len(pulse):
                    continue  # overlapping replicas interfere
                assert mf[d] == pytest.approx(a, rel=1e-9)
                assert np.argmax(np.abs(mf[d - 200 : d + 201])) == 200

    def test_short_recording_rejected(self, pulse):
        with pytest.raises(ParameterError):
            add_clutter(Waveform(np.zeros(20000), FS), 0, pulse)


def test_direct_signal_ratio(pulse):
    echo = np.zeros(10000)
    echo[4000 : 4000 + len(pulse)] = 0.01 * pulse.samples
    out = inject_direct_signal(Waveform(echo, FS), pulse, 10.0).samples
    assert np.abs(out[: len(pulse)]).max() == pytest.approx(0.1, rel=1e-12)
    np.testing.assert_array_equal(out[len(pulse) :], echo[len(pulse) :])
    mf = np.abs(matched_filter(Waveform(out, FS), pulse).samples)
    assert int(np.argmax(mf)) == 0


class TestScene:
    def test_range_gate(self, water_shell):
        with pytest.raises(ParameterError):
            SceneConfig(1.0, water_shell, 20.0, True, 0.0328, 0)
        with pytest.raises(ParameterError):
            SceneConfig(2.0, water_shell, 20.0, True, 0.005, 0)

    def test_label_must_match_filler(self, water_shell):
        scene = SceneConfig(2.0, water_shell, 20.0, True, 0.0328, 0)
        with pytest.raises(ParameterError):
            LabeledRecording(Waveform(np.zeros(10), FS), "air", scene)

    def test_filler_label(self):
        assert filler_label(AIR) == "air"
        assert filler_label(WATER) == "water"

    def test_render_is_deterministic(self, pulse):
        scene = draw_scene(3, ParamRanges(), 7, SynthSettings(), pulse)
        a, ff = render_scene(scene, pulse)
        b, _ = render_scene(scene, pulse, ff=ff)
        assert len(a) == 32768
        assert a.samples.tobytes() == b.samples.tobytes()

    def test_with_range(self, pulse):
        scene = draw_scene(0, ParamRanges(), 0, SynthSettings(), pulse)
        assert with_range(scene, 2.5).range_m == 2.5
        with pytest.raises(ParameterError):
            with_range(scene, 3.5)


class TestDataset:
    @pytest.fixture(scope="class")
    @classmethod
    def small(cls, pulse):
        return generate_dataset(3, master_seed=11, pulse=pulse, settings=SynthSettings(n_samples=32768))

    def test_counts_and_labels(self, small):
        labels = [d.label for d in small]
        assert labels == ["air", "water"] * 3
        for d in small:
            t = d.truth
            assert 0.03 <= t.target.outer_radius_m <= 0.08
            assert 0.002 <= t.target.thickness_m <= 0.008
            assert 1.5 <= t.range_m <= 3.0
            assert 10.0 <= t.snr_db <= 30.0
            assert t.target.shell == ALUMINIUM

    def test_reproducible_and_parallel_safe(self, small, pulse):
        again = generate_dataset(3, master_seed=11, pulse=pulse, jobs=2)
        for a, b in zip(small, again):
            assert a.recording.samples.tobytes() == b.recording.samples.tobytes()
            assert a.truth == b.truth

    def test_rejects_empty(self, pulse):
        with pytest.raises(ParameterError):
            generate_dataset(0, pulse=pulse)
