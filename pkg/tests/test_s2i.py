import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from s2inet import s2i
from s2inet.gradcheck import gradcheck
from s2inet.tensor import Tensor


def random_signal(rng, n=178):
    return np.round(rng.normal(0, 150, n))


signals = arrays(np.float64, 178, elements=st.integers(-2000, 2000).map(float))


# -- kinds and pairing --------------------------------------------------------


class TestKinds:
    def test_normalize(self):
        assert s2i.normalize_kind("signal-as-image") == "signal_as_image"
        assert s2i.normalize_kind("CNN1") == "cnn1"
        with pytest.raises(ValueError):
            s2i.normalize_kind("wavelet")

    @pytest.mark.parametrize("kind", s2i.S2I_KINDS)
    def test_pairing(self, kind):
        good, bad = (1, 2) if kind == "none" else (2, 1)
        s2i.check_pairing(kind, good)
        with pytest.raises(ValueError):
            s2i.check_pairing(kind, bad)

    def test_trainable_flags(self):
        assert [s2i.build_s2i(k).trainable for k in s2i.S2I_KINDS] == [False, False, False, True, True]


# -- rasterisation ------------------------------------------------------------


class TestSignalAsImage:
    def test_matches_pixel_enumeration(self, rng):
        for _ in range(20):
            sig = random_signal(rng)
            np.testing.assert_array_equal(s2i.signal_as_image(sig), oracles.raster_direct(sig))

    def test_constant_signal_midline(self):
        img = s2i.signal_as_image(np.full(178, 42.0))
        assert np.all(img[89] == 255) and img.sum() == 178 * 255

    def test_ramp(self):
        img = s2i.signal_as_image(np.arange(178.0))
        rows = img.argmax(axis=0)
        assert rows[0] == 177 and rows[-1] == 0
        assert np.all(np.diff(rows) <= 0)
        np.testing.assert_array_equal(img, oracles.raster_direct(np.arange(178)))

    def test_extremes_hit_edges(self, rng):
        sig = random_signal(rng)
        rows = s2i.signal_rows(sig)[0]
        assert rows[sig.argmax()] == 0 and rows[sig.argmin()] == 177

    def test_half_rounds_away_from_zero(self):
        # level = 1 + 177 * 1/2 = 89.5 rounds to 90, row 88
        sig = np.zeros(178)
        sig[1], sig[2] = 1.0, 2.0
        assert s2i.signal_rows(sig)[0, 1] == 88

    def test_batch_matches_single(self, rng):
        batch = np.stack([random_signal(rng) for _ in range(3)])
        out = s2i.signal_as_image(batch[:, None])
        for i in range(3):
            np.testing.assert_array_equal(out[i], s2i.signal_as_image(batch[i]))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            s2i.signal_as_image(np.array([0.0, np.nan] * 89))

    @settings(max_examples=50, deadline=None)
    @given(signals)
    def test_one_lit_pixel_per_column(self, sig):
        img = s2i.signal_as_image(sig)
        assert img.shape == (178, 178)
        np.testing.assert_array_equal(img.sum(axis=0), 255.0)
        assert np.count_nonzero(img) == 178 and set(np.unique(img)) == {0.0, 255.0}

    @settings(max_examples=30, deadline=None)
    @given(signals, st.integers(1, 50), st.integers(-500, 500))
    def test_invariant_to_positive_affine_maps(self, sig, scale, shift):
        np.testing.assert_array_equal(s2i.signal_as_image(sig * scale + shift), s2i.signal_as_image(sig))


# -- Tukey window -------------------------------------------------------------


class TestTukey:
    def test_default_values(self):
        w = s2i.tukey_window(8, 0.25)
        np.testing.assert_allclose(w, oracles.tukey_closed_form(8, 0.25), atol=1e-15)
        np.testing.assert_array_equal(w, [0, 1, 1, 1, 1, 1, 1, 0])

    def test_rectangular(self):
        np.testing.assert_array_equal(s2i.tukey_window(8, 0.0), np.ones(8))

    @pytest.mark.parametrize("n", [2, 7, 8, 33])
    def test_hann(self, n):
        hann = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / (n - 1))
        np.testing.assert_allclose(s2i.tukey_window(n, 1.0), hann, atol=1e-15)

    @pytest.mark.parametrize("n", [1, 5, 8, 16, 64])
    @pytest.mark.parametrize("alpha", [0.1, 0.25, 0.5, 0.75, 1.0])
    def test_closed_form(self, n, alpha):
        np.testing.assert_allclose(s2i.tukey_window(n, alpha), oracles.tukey_closed_form(n, alpha), atol=1e-14)

    @pytest.mark.parametrize("alpha", [0.25, 0.6])
    def test_matches_scipy_symmetric(self, alpha):
        windows = pytest.importorskip("scipy.signal.windows")
        np.testing.assert_allclose(s2i.tukey_window(32, alpha), windows.tukey(32, alpha, sym=True), atol=1e-15)

    def test_symmetric(self):
        w = s2i.tukey_window(21, 0.4)
        np.testing.assert_allclose(w, w[::-1], atol=1e-15)

    @pytest.mark.parametrize("alpha", [-0.1, 1.5])
    def test_alpha_range(self, alpha):
        with pytest.raises(ValueError):
            s2i.tukey_window(8, alpha)


# -- spectrogram --------------------------------------------------------------


class TestSpectrogram:
    def test_shape(self, rng):
        assert s2i.spectrogram_psd(random_signal(rng)).shape == (33, 43)
        spec = s2i.SpectrogramSpec()
        assert (spec.bins, spec.segments(178), spec.hop) == (33, 43, 4)

    def test_matches_direct_dft(self, rng):
        for _ in range(10):
            sig = random_signal(rng)
            ref = oracles.psd_direct(sig)
            got = s2i.spectrogram_psd(sig)
            assert np.abs(got - ref).max() <= 1e-10 * np.abs(ref).max()

    def test_constant_is_zero(self):
        np.testing.assert_array_equal(s2i.spectrogram_psd(np.full(178, -31.0)), 0.0)
        np.testing.assert_array_equal(s2i.spectrogram_image(np.full(178, 7.0)), 0.0)

    def test_bin_aligned_sinusoid(self):
        # bin 8 of a 64-point transform at fs=178
        t = np.arange(178)
        sig = 100 * np.sin(2 * np.pi * 8 * t / 64)
        psd = s2i.spectrogram_psd(sig)
        np.testing.assert_array_equal(psd.argmax(axis=0), 8)
        np.testing.assert_allclose(psd, oracles.psd_direct(sig), rtol=0, atol=1e-10 * psd.max())

    def test_short_signal(self):
        with pytest.raises(ValueError):
            s2i.spectrogram_psd(np.ones(7))

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            s2i.SpectrogramSpec(segment=8, overlap=8)
        with pytest.raises(ValueError):
            s2i.SpectrogramSpec(segment=128, nfft=64)

    def test_image_matches_composed_oracles(self, rng):
        sig = random_signal(rng)
        ref = oracles.bilinear_direct(oracles.psd_direct(sig)[None], 178, 178)[0]
        got = s2i.spectrogram_image(sig)
        assert got.shape == (178, 178)
        assert np.abs(got - ref).max() <= 1e-10 * np.abs(ref).max()

    @settings(max_examples=25, deadline=None)
    @given(signals, st.floats(0.1, 20))
    def test_quadratic_homogeneity(self, sig, c):
        base = s2i.spectrogram_image(sig)
        np.testing.assert_allclose(s2i.spectrogram_image(c * sig), c * c * base, rtol=1e-9, atol=1e-9 * (1 + base.max()))

    @settings(max_examples=25, deadline=None)
    @given(signals)
    def test_non_negative(self, sig):
        assert s2i.spectrogram_psd(sig).min() >= 0


# -- channel stacking ---------------------------------------------------------


class TestStackChannels:
    def test_copies(self, rng):
        img = rng.standard_normal((178, 178))
        out = s2i.stack_channels(Tensor(img)).data
        assert out.shape == (3, 178, 178)
        for c in range(3):
            np.testing.assert_array_equal(out[c], img)

    def test_zero(self):
        np.testing.assert_array_equal(s2i.stack_channels(Tensor(np.zeros((178, 178)))).data, 0)

    def test_adjoint_sums_channels(self, rng):
        img = Tensor(rng.standard_normal((4, 5)), requires_grad=True)
        g = rng.standard_normal((3, 4, 5))
        s2i.stack_channels(img).backward(g)
        np.testing.assert_allclose(img.grad, g.sum(axis=0), atol=1e-15)


# -- CNN modules --------------------------------------------------------------


def cnn_params(rng, layers, scale=0.5):
    p = {
        "conv1.weight": Tensor(rng.standard_normal((8, 1, 3)) * scale, requires_grad=True),
        "conv1.bias": Tensor(rng.standard_normal(8) * scale, requires_grad=True),
    }
    if layers == 2:
        p["conv2.weight"] = Tensor(rng.standard_normal((16, 8, 3)) * scale, requires_grad=True)
        p["conv2.bias"] = Tensor(rng.standard_normal(16) * scale, requires_grad=True)
    return p


class TestCNN:
    @pytest.mark.parametrize("layers,shape", [(1, (8, 178)), (2, (16, 89))])
    def test_feature_map_shape(self, layers, shape):
        m = s2i.CNNS2I(layers, dtype=np.float64)
        assert m.feature_map(Tensor(np.ones((2, 1, 178)))).shape == (2, *shape)

    @pytest.mark.parametrize("kind", ["signal_as_image", "spectrogram", "cnn1", "cnn2"])
    def test_module_output_shape(self, rng, kind):
        x = Tensor(np.stack([random_signal(rng) for _ in range(2)])[:, None])
        out = s2i.build_s2i(kind, rng)(x)
        assert out.shape == (2, 3, 178, 178)
        np.testing.assert_array_equal(out.data[:, 0], out.data[:, 2])

    def test_none_passthrough(self, rng):
        x = Tensor(rng.standard_normal((2, 1, 178)))
        assert s2i.build_s2i("none")(x) is x

    @pytest.mark.parametrize("layers", [1, 2])
    def test_zero_weights_give_zero_image(self, layers, rng):
        params = {k: Tensor(np.zeros_like(v.data)) for k, v in cnn_params(rng, layers).items()}
        out = s2i.s2i_cnn_forward(Tensor(random_signal(rng)), layers, params)
        np.testing.assert_array_equal(out.data, 0)

    @pytest.mark.parametrize("layers", [1, 2])
    def test_module_matches_functional(self, rng, layers):
        m = s2i.build_s2i(f"cnn{layers}", rng, dtype=np.float64)
        sig = random_signal(rng) / 100
        params = {k: Tensor(v) for k, v in m.state_dict().items()}
        ref = s2i.s2i_cnn_forward(Tensor(sig), layers, params).data
        got = m(Tensor(sig[None, None])).data
        np.testing.assert_allclose(got[0, 0], ref, atol=1e-12)

    def test_rows_follow_channel_order(self, rng):
        # channel c constant at c: after resize the rows increase top to bottom
        params = {
            "conv1.weight": Tensor(np.zeros((8, 1, 3))),
            "conv1.bias": Tensor(np.arange(8.0)),
        }
        img = s2i.s2i_cnn_forward(Tensor(np.zeros(178)), 1, params).data
        np.testing.assert_allclose(img[0], 0.0, atol=1e-12)
        np.testing.assert_allclose(img[-1], 7.0, atol=1e-12)
        assert np.all(np.diff(img[:, 0]) >= 0)

    def test_matches_oracle_composition(self, rng):
        params = cnn_params(rng, 1)
        sig = random_signal(rng) / 100
        fmap = oracles.conv_direct(sig[None, None], params["conv1.weight"].data, params["conv1.bias"].data, 1, 1)
        ref = oracles.bilinear_direct(fmap, 178, 178)[0]
        got = s2i.s2i_cnn_forward(Tensor(sig), 1, params).data
        np.testing.assert_allclose(got, ref, atol=1e-11)

    @pytest.mark.parametrize("layers", [1, 2])
    def test_gradcheck_first_layer(self, rng, layers):
        params = cnn_params(rng, layers)
        sig = Tensor(rng.standard_normal(178))
        names = list(params)

        def f(*ts):
            return s2i.s2i_cnn_forward(sig, layers, dict(zip(names, ts)))

        assert gradcheck(f, [params[n] for n in names]).passed(1e-4)

    def test_parameter_shape_mismatch(self, rng):
        params = cnn_params(rng, 1)
        params["conv1.weight"] = Tensor(np.zeros((8, 2, 3)))
        with pytest.raises(ValueError):
            s2i.s2i_cnn_forward(Tensor(np.zeros(178)), 1, params)

    def test_cnn1_superposition(self, rng):
        # cnn1 has no nonlinearity, so the image is linear in (weight, bias)
        sig = Tensor(random_signal(rng))
        a, b = cnn_params(rng, 1), cnn_params(rng, 1)
        both = {k: Tensor(a[k].data + 2.5 * b[k].data) for k in a}
        fa = s2i.s2i_cnn_forward(sig, 1, a).data
        fb = s2i.s2i_cnn_forward(sig, 1, b).data
        np.testing.assert_allclose(s2i.s2i_cnn_forward(sig, 1, both).data, fa + 2.5 * fb, atol=1e-9)

    def test_gradients_reach_conv_parameters(self, rng):
        m = s2i.build_s2i("cnn2", rng, dtype=np.float64)
        out = m(Tensor(rng.standard_normal((2, 1, 178))))
        out.sum().backward()
        for name, p in m.named_parameters():
            assert p.grad is not None and np.linalg.norm(p.grad) > 0, name
