import math
from fractions import Fraction

import numpy as np
import pytest

from core.attention import (
    AttentionKind,
    AttentionParams,
    attention_vjp,
    flop_mem_estimate,
    hydra_forward_2d,
    mha_dense,
    mha_dense_forward,
    na_forward_2d,
    na_vjp,
)
from core.errors import ArgumentError, DimensionError, GeometryError, StaleStateError
from core.gradcheck import check_gradient
from core.nbhd import neighbors_2d
from core.runtime import runtime
from core.schema import HydraConfig, NeighborhoodSpec


def _naive_dense(x, params, heads):
    n, d_model = x.shape
    dh = d_model // heads
    q, k, v = x @ params.w_q, x @ params.w_k, x @ params.w_v
    out = np.zeros_like(x)
    for h in range(heads):
        sl = slice(h * dh, (h + 1) * dh)
        for i in range(n):
            logits = np.array([q[i, sl] @ k[j, sl] for j in range(n)]) / math.sqrt(dh)
            p = np.exp(logits - logits.max())
            p /= p.sum()
            out[i, sl] = sum(p[j] * v[j, sl] for j in range(n))
    return out @ params.w_o


def _naive_windowed(x, params, specs):
    height, width, d_model = x.shape
    dh = d_model // len(specs)
    q, k, v = x @ params.w_q, x @ params.w_k, x @ params.w_v
    out = np.zeros_like(x)
    for h, spec in enumerate(specs):
        sl = slice(h * dh, (h + 1) * dh)
        for r in range(height):
            for c in range(width):
                window = neighbors_2d((r, c), (height, width), spec)
                logits = np.array([
                    q[r, c, sl] @ k[a, b, sl]
                    + params.bias[h][(a - r) // spec.d + spec.k - 1, (b - c) // spec.d + spec.k - 1]
                    for a, b in window
                ]) / math.sqrt(dh)
                p = np.exp(logits - logits.max())
                p /= p.sum()
                out[r, c, sl] = sum(pj * v[a, b, sl] for pj, (a, b) in zip(p, window))
    return out @ params.w_o


def _windowed_params(d_model, config, rng, bias_std=0.5):
    return AttentionParams.init(d_model, config, rng, bias_std=bias_std)


class TestAttentionParams:

    def test_init_shapes(self, rng):
        config = HydraConfig.parse("3x1:1,5x1:1")
        params = _windowed_params(4, config, rng)
        assert params.w_q.shape == (4, 4)
        assert [b.shape for b in params.bias] == [(5, 5), (9, 9)]

    def test_dense_init_has_no_bias(self, rng):
        assert AttentionParams.init(4, 2, rng).bias == []

    def test_rejects_non_square_weight(self, rng):
        with pytest.raises(DimensionError):
            AttentionParams(np.eye(4), np.eye(4), np.eye(4), np.ones((4, 3)))

    def test_bias_mismatch(self, rng):
        params = _windowed_params(4, HydraConfig.uniform(2, NeighborhoodSpec(3)), rng)
        with pytest.raises(DimensionError):
            na_forward_2d(rng.standard_normal((5, 5, 4)), params, 2, NeighborhoodSpec(5))

    def test_apply_update_bumps_generation(self, rng):
        params = AttentionParams.init(4, 1, rng)
        x = rng.standard_normal((3, 4))
        _, state = mha_dense_forward(x, params, 1)
        grads = attention_vjp(state, params, np.ones((3, 4)))
        before = params.w_v.copy()
        params.apply_update(grads, 0.1)
        assert params.generation == 1
        np.testing.assert_allclose(params.w_v, before - 0.1 * grads.w_v)


class TestMhaDense:

    def test_single_token(self, rng):
        params = AttentionParams.init(4, 2, rng)
        x = rng.standard_normal((1, 4))
        np.testing.assert_allclose(mha_dense(x, params, 2), (x @ params.w_v) @ params.w_o, atol=1e-14)

    def test_zero_logits_average_values(self, rng):
        zeros, eye = np.zeros((4, 4)), np.eye(4)
        params = AttentionParams(zeros, zeros, eye, eye)
        x = rng.standard_normal((5, 4))
        np.testing.assert_allclose(mha_dense(x, params, 2), np.tile(x.mean(axis=0), (5, 1)), atol=1e-14)

    def test_naive_loop_oracle(self, rng):
        params = AttentionParams.init(8, 2, rng)
        x = rng.standard_normal((6, 8))
        np.testing.assert_allclose(mha_dense(x, params, 2), _naive_dense(x, params, 2), rtol=0, atol=1e-10)

    def test_indivisible_d_model(self, rng):
        params = AttentionParams.init(6, 1, rng)
        with pytest.raises(ArgumentError):
            mha_dense(rng.standard_normal((3, 6)), params, 4)

    def test_rejects_bias_tables(self, rng):
        params = _windowed_params(4, HydraConfig.uniform(1, NeighborhoodSpec(3)), rng)
        with pytest.raises(ArgumentError):
            mha_dense(rng.standard_normal((3, 4)), params, 1)

    def test_batched(self, rng):
        params = AttentionParams.init(4, 2, rng)
        x = rng.standard_normal((3, 5, 4))
        out = mha_dense(x, params, 2)
        np.testing.assert_allclose(out[2], mha_dense(x[2], params, 2), atol=1e-14)


class TestNaForward:

    def test_unit_window_is_value_projection(self, rng):
        params = _windowed_params(4, HydraConfig.uniform(2, NeighborhoodSpec(1)), rng)
        x = rng.standard_normal((4, 5, 4))
        y, _ = na_forward_2d(x, params, 2, NeighborhoodSpec(1))
        np.testing.assert_allclose(y, (x @ params.w_v) @ params.w_o, atol=1e-14)

    @pytest.mark.parametrize("size", [3, 5, 7])
    @pytest.mark.parametrize("d_model", [4, 8])
    @pytest.mark.parametrize("heads", [1, 2])
    def test_full_window_equals_dense(self, rng, size, d_model, heads):
        spec = NeighborhoodSpec(size)
        params = _windowed_params(d_model, HydraConfig.uniform(heads, spec), rng, bias_std=0.0)
        dense = AttentionParams(params.w_q, params.w_k, params.w_v, params.w_o)
        x = rng.standard_normal((size, size, d_model))
        y, _ = na_forward_2d(x, params, heads, spec)
        expected = mha_dense(x.reshape(size * size, d_model), dense, heads)
        np.testing.assert_allclose(y.reshape(-1, d_model), expected, rtol=0, atol=1e-9)

    @pytest.mark.parametrize("spec", [NeighborhoodSpec(3), NeighborhoodSpec(3, 2), NeighborhoodSpec(5)])
    def test_naive_loop_oracle(self, rng, spec):
        params = _windowed_params(4, HydraConfig.uniform(2, spec), rng)
        x = rng.standard_normal((6, 6, 4))
        y, _ = na_forward_2d(x, params, 2, spec)
        np.testing.assert_allclose(y, _naive_windowed(x, params, [spec, spec]), rtol=0, atol=1e-10)

    def test_probability_rows_sum_to_one(self, rng):
        spec = NeighborhoodSpec(3, 2)
        params = _windowed_params(4, HydraConfig.uniform(2, spec), rng)
        _, state = na_forward_2d(rng.standard_normal((2, 7, 6, 4)), params, 2, spec)
        for h in range(2):
            probs = state.head_probs(h)
            assert probs.shape == (2, 7, 6, 9)
            np.testing.assert_allclose(probs.sum(axis=-1), 1.0, atol=1e-6)

    def test_invalid_geometry(self, rng):
        spec = NeighborhoodSpec(3, 3)
        params = _windowed_params(4, HydraConfig.uniform(1, spec), rng)
        with pytest.raises(GeometryError):
            na_forward_2d(rng.standard_normal((8, 9, 4)), params, 1, spec)

    def test_locality(self, rng):
        spec = NeighborhoodSpec(3, 2)
        params = _windowed_params(4, HydraConfig.uniform(2, spec), rng)
        x = rng.standard_normal((7, 7, 4))
        y, _ = na_forward_2d(x, params, 2, spec)
        window = set(neighbors_2d((3, 3), (7, 7), spec))
        for pos in [(3, 4), (0, 0), (6, 2), (2, 3)]:
            assert pos not in window
            perturbed = x.copy()
            perturbed[pos] += 10.0
            y2, _ = na_forward_2d(perturbed, params, 2, spec)
            np.testing.assert_array_equal(y2[3, 3], y[3, 3])

    def test_interior_translation_equivariance(self, rng):
        spec = NeighborhoodSpec(3)
        params = _windowed_params(4, HydraConfig.uniform(2, spec), rng, bias_std=0.0)
        x = rng.standard_normal((12, 12, 4))
        shifted = np.roll(x, (1, 2), axis=(0, 1))
        y, _ = na_forward_2d(x, params, 2, spec)
        y2, _ = na_forward_2d(shifted, params, 2, spec)
        np.testing.assert_allclose(y2[2:11, 3:11], y[1:10, 1:9], rtol=0, atol=1e-12)

    def test_thread_count_does_not_change_result(self, rng):
        config = HydraConfig.parse("3x1:2,3x2:2")
        params = _windowed_params(8, config, rng)
        x = rng.standard_normal((2, 8, 8, 8))
        y, _ = hydra_forward_2d(x, params, config)
        with runtime.configured(threads=4):
            y4, _ = hydra_forward_2d(x, params, config)
        np.testing.assert_array_equal(y, y4)


class TestHydraForward:

    def test_single_partition_matches_na(self, rng):
        spec = NeighborhoodSpec(3, 2)
        config = HydraConfig.uniform(2, spec)
        params = _windowed_params(4, config, rng)
        x = rng.standard_normal((6, 7, 4))
        np.testing.assert_array_equal(hydra_forward_2d(x, params, config)[0], na_forward_2d(x, params, 2, spec)[0])

    def test_compose_separately(self, rng):
        config = HydraConfig.parse("1x1:1,3x1:1")
        params = _windowed_params(4, config, rng)
        params.w_o = np.eye(4)
        x = rng.standard_normal((3, 3, 4))
        y, _ = hydra_forward_2d(x, params, config)
        np.testing.assert_allclose(y[..., :2], (x @ params.w_v)[..., :2], atol=1e-14)
        expected = _naive_windowed(x, params, [NeighborhoodSpec(1), NeighborhoodSpec(3)])
        np.testing.assert_allclose(y[..., 2:], expected[..., 2:], atol=1e-12)

    def test_mixed_naive_oracle(self, rng):
        config = HydraConfig.parse("3x1:1,3x3:1,5x1:2")
        params = _windowed_params(8, config, rng)
        x = rng.standard_normal((9, 10, 8))
        y, _ = hydra_forward_2d(x, params, config)
        np.testing.assert_allclose(y, _naive_windowed(x, params, config.head_specs()), rtol=0, atol=1e-10)

    def test_head_count_mismatch(self, rng):
        config = HydraConfig.parse("3x1:1,3x2:1")
        params = _windowed_params(6, HydraConfig.uniform(3, NeighborhoodSpec(3)), rng)
        with pytest.raises(ArgumentError):
            hydra_forward_2d(rng.standard_normal((6, 6, 6)), params, config)

    def test_split_head_span(self):
        config = HydraConfig.parse("7x1:2,7x32:2")
        assert [g.spec.span for g in config.partitions] == [7, 224]
        config.validate(4, (256, 256))


class TestAttentionVjp:

    def test_zero_cotangent(self, rng):
        config = HydraConfig.parse("3x1:1,3x2:1")
        params = _windowed_params(4, config, rng)
        x = rng.standard_normal((6, 6, 4))
        _, state = hydra_forward_2d(x, params, config)
        grads = attention_vjp(state, params, np.zeros_like(x))
        for g in grads.arrays():
            assert not g.any()

    def test_unit_window_value_gradient(self, rng):
        spec = NeighborhoodSpec(1)
        params = _windowed_params(4, HydraConfig.uniform(2, spec), rng)
        params.w_o = np.eye(4)
        x = rng.standard_normal((3, 4, 4))
        dy = rng.standard_normal((3, 4, 4))
        _, state = na_forward_2d(x, params, 2, spec)
        grads = na_vjp(state, params, dy)
        np.testing.assert_allclose(grads.w_v, x.reshape(-1, 4).T @ dy.reshape(-1, 4), rtol=1e-12, atol=1e-14)

    def test_dense_finite_differences(self, rng):
        params = AttentionParams.init(4, 2, rng, std=0.5)
        x = rng.uniform(-1, 1, (5, 4))
        dy = rng.standard_normal((5, 4))
        _, state = mha_dense_forward(x, params, 2)
        grads = attention_vjp(state, params, dy)
        f = lambda t: float((mha_dense(t, params, 2) * dy).sum())
        assert check_gradient("dense/x", f, x, grads.dx).passed

    def test_hydra_bias_finite_differences(self, rng):
        config = HydraConfig.parse("3x1:1,3x2:1")
        params = _windowed_params(4, config, rng)
        x = rng.uniform(-1, 1, (2, 6, 6, 4))
        dy = rng.standard_normal(x.shape)
        _, state = hydra_forward_2d(x, params, config)
        grads = attention_vjp(state, params, dy)

        def f(table):
            swapped = AttentionParams(params.w_q, params.w_k, params.w_v, params.w_o, [params.bias[0], table])
            return float((hydra_forward_2d(x, swapped, config)[0] * dy).sum())

        assert check_gradient("hydra/bias1", f, params.bias[1], grads.bias[1]).passed

    def test_stale_after_update(self, rng):
        spec = NeighborhoodSpec(3)
        params = _windowed_params(4, HydraConfig.uniform(1, spec), rng)
        x = rng.standard_normal((5, 5, 4))
        _, state = na_forward_2d(x, params, 1, spec)
        params.apply_update(attention_vjp(state, params, np.ones_like(x)), 0.01)
        with pytest.raises(StaleStateError):
            attention_vjp(state, params, np.ones_like(x))

    def test_other_params_rejected(self, rng):
        params = AttentionParams.init(4, 1, rng)
        other = AttentionParams.init(4, 1, rng)
        _, state = mha_dense_forward(rng.standard_normal((3, 4)), params, 1)
        with pytest.raises(StaleStateError):
            attention_vjp(state, other, np.ones((3, 4)))

    def test_cotangent_shape(self, rng):
        params = AttentionParams.init(4, 1, rng)
        _, state = mha_dense_forward(rng.standard_normal((3, 4)), params, 1)
        with pytest.raises(DimensionError):
            attention_vjp(state, params, np.ones((4, 4)))


class TestFlopMemEstimate:

    def test_dense_state(self):
        assert flop_mem_estimate(AttentionKind.DENSE, (16, 16), 8, heads=1).attn_state == 65536

    def test_na_state(self):
        cost = flop_mem_estimate(AttentionKind.NA, (16, 16), 8, heads=2, spec=NeighborhoodSpec(3))
        assert cost.attn_state == 2304 * 2

    def test_uniform_hydra_equals_na(self):
        spec = NeighborhoodSpec(5, 2)
        na = flop_mem_estimate("na", (20, 20), 16, heads=4, spec=spec)
        hydra = flop_mem_estimate("hydra", (20, 20), 16, config=HydraConfig.uniform(4, spec))
        assert na == hydra

    @pytest.mark.parametrize("side,k", [(8, 3), (16, 7), (32, 5), (64, 3)])
    def test_state_ratio(self, side, k):
        n = side * side
        na = flop_mem_estimate("na", (side, side), 8, heads=2, spec=NeighborhoodSpec(k))
        dense = flop_mem_estimate("dense", (side, side), 8, heads=2)
        assert Fraction(na.attn_state, dense.attn_state) == Fraction(k * k, n)

    def test_projection_cost_shared(self):
        dense = flop_mem_estimate("dense", (4, 4), 8, heads=2)
        na = flop_mem_estimate("na", (4, 4), 8, heads=2, spec=NeighborhoodSpec(3))
        projection = 4 * 16 * 8 * 8
        assert dense.macs - projection == 2 * 16 * 16 * 8
        assert na.macs - projection == 2 * na.attn_state * 4

    def test_missing_spec(self):
        with pytest.raises(ArgumentError):
            flop_mem_estimate("na", (8, 8), 8, heads=2)
