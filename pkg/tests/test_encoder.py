import math

import numpy as np
import pytest

from sineprobe import kernels
from sineprobe.encoder import (
    EXPECTED_SAMPLE_RATE,
    conv1d,
    encode,
    gelu,
    normalize,
    output_length,
    znormalize,
)
from sineprobe.errors import (
    InputTooShort,
    NonFiniteActivation,
    SampleRateMismatch,
    ShapeMismatch,
)
from sineprobe.fixtures import make_random_model, standard_layers
from sineprobe.signals import SignalSpec, SineComponent, Waveform, synth, tone
from sineprobe.weightfile import LayerConfig


def conv_oracle(x, w, bias, stride):
    """Naive triple-loop convolution, the independent reference."""
    c_out, c_in, k = w.shape
    out_len = (x.shape[1] - k) // stride + 1
    out = np.zeros((c_out, out_len))
    for o in range(c_out):
        for t in range(out_len):
            acc = 0.0
            for i in range(c_in):
                for j in range(k):
                    acc += w[o, i, j] * x[i, t * stride + j]
            out[o, t] = acc + (bias[o] if bias is not None else 0.0)
    return out


class TestConv1d:
    def test_identity_kernel(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(3, 20))
        w = np.eye(3)[:, :, None]  # K=1, one-hot per channel
        np.testing.assert_array_equal(conv1d(x, w, None, 1), x)

    def test_matches_oracle_spec_case(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(2, 20))
        w = rng.normal(size=(3, 2, 4))
        got = conv1d(x, w, None, stride=2)
        want = conv_oracle(x, w, None, 2)
        np.testing.assert_allclose(got, want, rtol=1e-12)

    @pytest.mark.parametrize("stride", [1, 2, 3, 5])
    @pytest.mark.parametrize("kernel", [1, 2, 7])
    def test_matches_oracle_shapes(self, stride, kernel):
        rng = np.random.default_rng(stride * 10 + kernel)
        x = rng.normal(size=(4, 40))
        w = rng.normal(size=(5, 4, kernel))
        bias = rng.normal(size=5)
        got = conv1d(x, w, bias, stride)
        np.testing.assert_allclose(got, conv_oracle(x, w, bias, stride), rtol=1e-12, atol=1e-13)
        assert got.shape == (5, (40 - kernel) // stride + 1)

    def test_numpy_and_numba_paths_agree(self):
        if not kernels.HAVE_NUMBA:
            pytest.skip("numba not installed")
        rng = np.random.default_rng(2)
        x = rng.normal(size=(6, 123))
        w = rng.normal(size=(4, 6, 5))
        a = kernels.conv1d_numpy(x, w, 3)
        b = kernels.conv1d_numba(x, w, 3)
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-14)

    def test_input_too_short(self):
        with pytest.raises(InputTooShort):
            conv1d(np.zeros((1, 3)), np.zeros((1, 1, 4)), None, 1)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeMismatch):
            conv1d(np.zeros((2, 10)), np.zeros((1, 3, 2)), None, 1)

    def test_float32_inputs_stay_float32(self):
        x = np.ones((1, 8), dtype=np.float32)
        w = np.ones((1, 1, 2), dtype=np.float32)
        assert conv1d(x, w, None, 1).dtype == np.float32


class TestNormalize:
    def test_constant_input_zeroes_out(self):
        x = np.full((3, 10), 7.0)
        out = normalize(x, "group_per_channel", np.ones(3), np.zeros(3), 1e-5)
        np.testing.assert_array_equal(out, np.zeros_like(x))

    def test_layer_over_channels_standardizes_each_step(self):
        rng = np.random.default_rng(3)
        x = rng.normal(2.0, 3.0, size=(4, 8))
        out = normalize(x, "layer_over_channels", None, None, 0.0)
        np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-10)
        np.testing.assert_allclose(out.var(axis=0), 1.0, atol=1e-10)

    def test_group_per_channel_standardizes_each_channel(self):
        rng = np.random.default_rng(4)
        x = rng.normal(-1.0, 0.5, size=(4, 16))
        out = normalize(x, "group_per_channel", None, None, 0.0)
        np.testing.assert_allclose(out.mean(axis=1), 0.0, atol=1e-10)
        np.testing.assert_allclose(out.var(axis=1), 1.0, atol=1e-10)

    def test_affine_matches_direct_recomputation(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(4, 8))
        scale, shift = rng.normal(size=4), rng.normal(size=4)
        eps = 1e-5
        got = normalize(x, "layer_over_channels", scale, shift, eps)
        mean = x.mean(axis=0)
        var = x.var(axis=0)
        want = scale[:, None] * (x - mean) / np.sqrt(var + eps) + shift[:, None]
        np.testing.assert_allclose(got, want, rtol=1e-12)

    def test_none_mode_is_identity(self):
        x = np.arange(12.0).reshape(3, 4)
        np.testing.assert_array_equal(normalize(x, "none"), x)


class TestGelu:
    def test_zero(self):
        assert gelu(np.array([0.0]))[0] == 0.0

    def test_positive_asymptote(self):
        assert abs(gelu(np.array([10.0]))[0] - 10.0) < 1e-6

    def test_negative_asymptote(self):
        assert abs(gelu(np.array([-10.0]))[0]) < 1e-6

    def test_matches_erf_formula(self):
        xs = np.linspace(-4, 4, 101)
        got = gelu(xs)
        want = np.array([0.5 * x * (1.0 + math.erf(x / math.sqrt(2.0))) for x in xs])
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-15)


def two_layer_model(seed=0, input_normalize=False):
    layers = (
        LayerConfig(1, 3, 4, 2, True, "layer_over_channels"),
        LayerConfig(3, 5, 3, 2, True, "layer_over_channels"),
    )
    return make_random_model(layers, seed=seed, name="two", input_normalize=input_normalize)


class TestEncode:
    def test_length_law_through_fixture_stack(self, layer_model):
        # T = floor((L - 400)/320) + 1 for the 7-layer geometry
        for length in (400, 401, 720, 16000):
            wave = Waveform(np.sin(np.linspace(0, 40.0, length)), EXPECTED_SAMPLE_RATE)
            rep = encode(layer_model, wave)
            assert rep.timesteps == (length - 400) // 320 + 1
            assert rep.timesteps == output_length(length, 400, 320)

    def test_window_exact_gives_single_step(self, layer_model):
        wave = Waveform(np.sin(np.arange(400) * 0.1), EXPECTED_SAMPLE_RATE)
        rep = encode(layer_model, wave)
        assert rep.matrix.shape == (1, layer_model.out_dim)

    def test_one_second_gives_49_steps(self, layer_model, group_model):
        wave = synth(tone(100.0))
        assert encode(layer_model, wave).matrix.shape == (49, 16)
        assert encode(group_model, wave).matrix.shape == (49, 16)

    def test_compositional_oracle(self):
        # encode must equal manually chaining conv1d -> normalize -> gelu
        model = two_layer_model(seed=9, input_normalize=True)
        rng = np.random.default_rng(10)
        samples = rng.normal(size=50)
        rep = encode(model, Waveform(samples, EXPECTED_SAMPLE_RATE))

        x = znormalize(samples, model.epsilon).astype(np.float32)[None, :]
        for i, layer in enumerate(model.layers):
            x = conv1d(x, model.tensors[f"conv.{i}.weight"], model.tensors[f"conv.{i}.bias"],
                       layer.stride)
            x = normalize(x, layer.norm, model.tensors[f"norm.{i}.weight"],
                          model.tensors[f"norm.{i}.bias"], model.epsilon)
            x = gelu(x)
        np.testing.assert_allclose(rep.matrix, x.T, rtol=1e-10, atol=1e-10)

    def test_determinism_bitwise(self, layer_model):
        wave = synth(tone(441.0))
        a = encode(layer_model, wave).matrix
        b = encode(layer_model, wave).matrix
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("fixture_name", ["group_model", "layer_model"])
    def test_time_shift_covariance(self, fixture_name, request):
        # same content offset by one stride: overlapping steps must match.
        # 400 Hz repeats every 40 samples, so the shifted crop carries
        # consistent content for the whole-signal normalizations too.
        model = request.getfixturevalue(fixture_name)
        long_wave = synth(tone(400.0, duration=1.1)).samples
        first = encode(model, Waveform(long_wave[:16000], EXPECTED_SAMPLE_RATE))
        second = encode(model, Waveform(long_wave[320:16320], EXPECTED_SAMPLE_RATE))
        np.testing.assert_allclose(first.matrix[1:], second.matrix[:-1], atol=1e-6)

    def test_dc_removed_by_input_normalization(self, layer_model):
        wave = synth(tone(250.0, 0.5))
        biased = Waveform(wave.samples + 0.37, wave.sample_rate)
        a = encode(layer_model, wave).matrix
        b = encode(layer_model, biased).matrix
        np.testing.assert_allclose(a, b, atol=1e-6)

    def test_sample_rate_checked(self, layer_model):
        with pytest.raises(SampleRateMismatch):
            encode(layer_model, Waveform(np.zeros(16000), 22050))

    def test_too_short_input(self, layer_model):
        with pytest.raises(InputTooShort):
            encode(layer_model, Waveform(np.zeros(399), EXPECTED_SAMPLE_RATE))

    def test_source_attached(self, layer_model):
        spec = tone(100.0)
        rep = encode(layer_model, synth(spec), source=spec)
        assert rep.source == spec
        assert (rep.window, rep.stride) == (400, 320)

    @pytest.mark.filterwarnings("ignore:overflow encountered in cast")
    def test_overflowing_weights_rejected(self):
        from sineprobe.weightfile import EncoderModel

        # 1e38 taps overflow float32 after summation
        model = EncoderModel(
            name="hot",
            input_normalize=False,
            epsilon=1e-5,
            layers=(LayerConfig(1, 2, 10, 5, False, "none"),),
            tensors={"conv.0.weight": np.full((2, 1, 10), 1e38, dtype=np.float32)},
        )
        wave = Waveform(np.ones(400), EXPECTED_SAMPLE_RATE)
        with pytest.raises(NonFiniteActivation):
            encode(model, wave)

    def test_backend_parity_full_encode(self, layer_model, monkeypatch):
        if not kernels.HAVE_NUMBA:
            pytest.skip("numba not installed")
        wave = synth(tone(300.0))
        monkeypatch.setattr(kernels, "conv1d_core", kernels.conv1d_numpy)
        numpy_rep = encode(layer_model, wave).matrix
        monkeypatch.setattr(kernels, "conv1d_core", kernels.conv1d_numba)
        numba_rep = encode(layer_model, wave).matrix
        np.testing.assert_allclose(numpy_rep, numba_rep, atol=1e-6)
