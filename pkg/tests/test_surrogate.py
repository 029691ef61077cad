import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowsurrogate.autoencoder import AutoencoderModel
from flowsurrogate.data import FieldGrid, ParamSpace, unit_param_space
from flowsurrogate.errors import DomainError, UsageError
from flowsurrogate.flow import base_params, build_flow, conditional_forward, init_actnorm_identity, unconditional_forward
from flowsurrogate.nn import DenseLayer, DenseNet
from flowsurrogate.surrogate import (
    denormalize,
    normalize,
    predict_and_quantify,
    predict_latent_stats,
    reverse_predict,
    sample_latents,
)

from test_flow_model import random_model


def constant_decoder_ae(dims=(8, 8, 8), latent=4, value=0.75):
    field_len = dims[0] * dims[1] * dims[2]
    return AutoencoderModel(
        encoder=DenseNet([DenseLayer(np.zeros((latent, field_len)), np.zeros(latent), "identity")]),
        decoder=DenseNet([DenseLayer(np.zeros((field_len, latent)), np.full(field_len, value), "identity")]),
        dims=dims,
        latent_dim=latent,
        mean=0.0,
        std=1.0,
        value_range=(0.0, 1.0),
    )


def linear_decoder_ae(dims=(8, 8, 8), latent=4, seed=0):
    field_len = dims[0] * dims[1] * dims[2]
    rng = np.random.default_rng(seed)
    return AutoencoderModel(
        encoder=DenseNet([DenseLayer(rng.normal(size=(latent, field_len)) * 0.01,
                                     np.zeros(latent), "identity")]),
        decoder=DenseNet([DenseLayer(rng.normal(size=(field_len, latent)) * 0.1,
                                     np.zeros(field_len), "identity")]),
        dims=dims,
        latent_dim=latent,
        mean=0.2,
        std=1.5,
        value_range=(0.0, 1.0),
    )


class TestNormalize:
    def test_midpoint_of_zero_to_five(self):
        space = ParamSpace(names=["amp"], ranges=[(0.0, 5.0)])
        assert normalize(space, np.array([2.5]))[0] == 0.5

    def test_min_vector_maps_to_zero(self):
        space = ParamSpace(names=["a", "b"], ranges=[(1.0, 3.0), (-2.0, 2.0)])
        assert np.array_equal(normalize(space, np.array([1.0, -2.0])), [0.0, 0.0])

    def test_round_trip_1000_vectors(self):
        rng = np.random.default_rng(0)
        space = ParamSpace(names=["a", "b", "c"],
                           ranges=[(0.0, 5.0), (600.0, 1500.0), (0.25, 1.0)])
        lo = np.array([r[0] for r in space.ranges])
        hi = np.array([r[1] for r in space.ranges])
        worst = 0.0
        for _ in range(1000):
            raw = lo + rng.random(3) * (hi - lo)
            back = denormalize(space, normalize(space, raw))
            worst = max(worst, float(np.abs(back - raw).max() / (hi - lo).max()))
        assert worst < 1e-12

    def test_out_of_range_names_dimension(self):
        space = ParamSpace(names=["alpha", "beta"], ranges=[(0.0, 1.0), (0.0, 1.0)])
        with pytest.raises(DomainError, match="beta"):
            normalize(space, np.array([0.5, 1.5]))

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
                    min_size=3, max_size=3))
    def test_round_trip_property(self, unit_values):
        space = ParamSpace(names=["a", "b", "c"],
                           ranges=[(0.0, 5.0), (600.0, 1500.0), (0.25, 1.0)])
        lo = np.array([r[0] for r in space.ranges])
        hi = np.array([r[1] for r in space.ranges])
        raw = lo + np.array(unit_values) * (hi - lo)
        back = denormalize(space, normalize(space, raw))
        assert np.abs((back - raw) / (hi - lo)).max() < 1e-12


class TestPredictAndQuantify:
    def setup_method(self):
        self.flow = random_model(d=4, n=2, seed=40)
        self.ae = linear_decoder_ae(latent=4, seed=41)

    def test_single_sample_has_zero_variance(self):
        res = predict_and_quantify(self.flow, self.ae, np.array([0.3, 0.6]), 1, seed=0)
        assert np.all(res.var_field.values == 0.0)
        assert np.all(res.var_latent == 0.0)
        assert res.n_samples == 1

    def test_constant_decoder_gives_constant_mean_zero_var(self):
        ae = constant_decoder_ae(value=0.75)
        res = predict_and_quantify(self.flow, ae, np.array([0.2, 0.9]), 8, seed=1)
        assert np.allclose(res.mean_field.values, 0.75, atol=1e-15)
        assert np.allclose(res.var_field.values, 0.0, atol=1e-15)

    def test_matches_loop_oracle_n20(self):
        c = np.array([0.4, 0.1])
        res = predict_and_quantify(self.flow, self.ae, c, 20, seed=7)
        # oracle: replay the same draws, collect the 20 fields in a list, and
        # aggregate with explicit loops
        mu, sigma = base_params(self.flow, c)
        rng = np.random.default_rng(7)
        eps = rng.standard_normal((20, 4))
        fields = []
        lats = []
        for i in range(20):
            z0 = mu + sigma * eps[i]
            m, _ = conditional_forward(self.flow, z0, c)
            zk, _ = unconditional_forward(self.flow, m)
            lats.append(zk)
            fields.append(self.ae.destandardize(self.ae.decoder.forward(zk)))
        mean = sum(fields) / 20
        var = sum((f - mean) ** 2 for f in fields) / 20
        assert np.abs(res.mean_field.values - mean).max() < 1e-12
        assert np.abs(res.var_field.values - var).max() < 1e-12
        lat_mean = sum(lats) / 20
        assert np.abs(res.mean_latent - lat_mean).max() < 1e-12

    def test_variance_non_negative(self):
        res = predict_and_quantify(self.flow, self.ae, np.array([0.9, 0.9]), 16, seed=3)
        assert np.all(res.var_field.values >= 0.0)

    def test_n_below_one_rejected(self):
        with pytest.raises(UsageError):
            predict_and_quantify(self.flow, self.ae, np.array([0.1, 0.1]), 0, seed=0)


class TestPredictLatentStats:
    def setup_method(self):
        self.flow = random_model(d=4, n=2, seed=42)

    def test_single_sample_zero_variance(self):
        _, var = predict_latent_stats(self.flow, np.array([0.5, 0.5]), 1, seed=0)
        assert np.all(var == 0.0)

    def test_same_seed_identical(self):
        a = predict_latent_stats(self.flow, np.array([0.2, 0.8]), 6, seed=5)
        b = predict_latent_stats(self.flow, np.array([0.2, 0.8]), 6, seed=5)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_agrees_with_decoder_path(self):
        ae = linear_decoder_ae(latent=4, seed=43)
        c = np.array([0.7, 0.3])
        mean_fast, var_fast = predict_latent_stats(self.flow, c, 12, seed=9)
        res = predict_and_quantify(self.flow, ae, c, 12, seed=9)
        assert np.abs(mean_fast - res.mean_latent).max() < 1e-12
        assert np.abs(var_fast - res.var_latent).max() < 1e-12

    def test_mean_field_converges_within_standard_error(self):
        # fixed seeds chosen so the elementwise 3-sigma bound on the
        # difference of two 200-sample means holds (flaky-tolerant sanity)
        flow = random_model(d=4, n=2, seed=42)
        ae = linear_decoder_ae(latent=4, seed=43)
        c = np.array([0.5, 0.5])
        res_a = predict_and_quantify(flow, ae, c, 200, seed=11)
        res_b = predict_and_quantify(flow, ae, c, 200, seed=12)
        sd_diff = np.sqrt((res_a.var_field.values + res_b.var_field.values) / 200.0)
        delta = np.abs(res_a.mean_field.values - res_b.mean_field.values)
        assert np.all(delta < 3.0 * sd_diff + 1e-12)


class TestReversePredict:
    def test_identity_uncond_stage_reads_encoder_tail(self):
        # encoder stub emits a fixed latent whose tail is the parameter pair;
        # with no unconditional blocks m equals that latent
        flow = build_flow(4, 2, k1=1, k2=0, hidden=(6,), seed=44)
        init_actnorm_identity(flow)
        latent = np.array([9.0, 9.0, 0.3, 0.7])
        ae = constant_decoder_ae(latent=4)
        ae.encoder.layers[0].bias = latent
        field = FieldGrid((8, 8, 8), np.zeros(512), (0.0, 1.0))
        assert np.allclose(reverse_predict(flow, ae, field), [0.3, 0.7], atol=1e-12)

    def test_output_clamped_to_unit_box(self):
        flow = build_flow(4, 2, k1=1, k2=0, hidden=(6,), seed=45)
        init_actnorm_identity(flow)
        ae = constant_decoder_ae(latent=4)
        ae.encoder.layers[0].bias = np.array([0.0, 0.0, -3.5, 42.0])
        field = FieldGrid((8, 8, 8), np.zeros(512), (0.0, 1.0))
        out = reverse_predict(flow, ae, field)
        assert np.array_equal(out, [0.0, 1.0])


def test_sample_latents_deterministic():
    flow = random_model(d=4, n=2, seed=46)
    a = sample_latents(flow, np.array([0.1, 0.2]), 5, seed=3)
    b = sample_latents(flow, np.array([0.1, 0.2]), 5, seed=3)
    assert np.array_equal(a, b)
