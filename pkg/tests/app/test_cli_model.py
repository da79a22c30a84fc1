import math

import numpy as np
import pytest

from app.models import HydraClassifier
from app.utils.stripes import make_stripes
from core.errors import ArgumentError, DimensionError, GeometryError
from core.gradcheck import check_gradient
from core.schema import ConvBlock, HydraConfig, PoolSpec, TokenizerConfig
from core.tensor import cross_entropy, cross_entropy_vjp


def _model(rng, positional="learnable"):
    model = HydraClassifier(
        TokenizerConfig.cct(1, 8), HydraConfig.parse("3x1:1,3x2:1"), (12, 12), n_blocks=2,
        positional=positional, rng=rng,
    )
    # non-zero head and scorer so every parameter receives gradient
    model.head_w = rng.standard_normal(model.head_w.shape)
    model.head_b = rng.standard_normal(model.head_b.shape)
    model.pool.g = rng.standard_normal(model.pool.g.shape) * 0.5
    return model


def _loss_with(model, images, labels, owner, attr):
    def loss(t):
        saved = getattr(owner, attr)
        setattr(owner, attr, t)
        try:
            return cross_entropy(model.forward(images)[0], labels)
        finally:
            setattr(owner, attr, saved)
    return loss


class TestHydraClassifier:
    def test_initial_loss_is_log_classes(self, rng):
        model = HydraClassifier(TokenizerConfig.cct(1, 8), HydraConfig.parse("3x1:2"), (16, 16), classes=3, rng=rng)
        data = make_stripes(4, rng)
        loss, _ = model.evaluate(data.images, data.labels)
        assert loss == pytest.approx(math.log(3.0), rel=1e-12)

    def test_grid(self, rng):
        model = HydraClassifier(TokenizerConfig.cct(1, 8), HydraConfig.parse("3x1:2"), (16, 12), rng=rng)
        assert model.grid == (8, 6)
        logits, cache = model.forward(make_stripes(3, rng, size=16).images[:, :, :, :12])
        assert logits.shape == (3, 2)
        assert cache.sequence.shape == (3, 48, 8)

    @pytest.mark.parametrize("target", [
        "head_w", "head_b", "pool", "w_q", "w_o", "bias", "positional", "ff_w1", "ff_b1", "ff_w2", "ff_b2",
    ])
    def test_backward_matches_finite_differences(self, rng, target):
        model = _model(rng)
        data = make_stripes(4, rng, size=12)
        logits, cache = model.forward(data.images)
        grads = model.backward(cache, cross_entropy_vjp(logits, data.labels))

        owner, attr, analytic = {
            "head_w": (model, "head_w", grads.head_w),
            "head_b": (model, "head_b", grads.head_b),
            "pool": (model.pool, "g", grads.pool_g),
            "w_q": (model.blocks[0], "w_q", grads.blocks[0].w_q),
            "w_o": (model.blocks[1], "w_o", grads.blocks[1].w_o),
            "positional": (model, "positional", grads.positional),
            "ff_w1": (model.feed_forward[0], "w1", grads.feed_forward[0].w1),
            "ff_b1": (model.feed_forward[1], "b1", grads.feed_forward[1].b1),
            "ff_w2": (model.feed_forward[1], "w2", grads.feed_forward[1].w2),
            "ff_b2": (model.feed_forward[0], "b2", grads.feed_forward[0].b2),
        }.get(target, (None, None, None))
        if target == "bias":
            table = model.blocks[1].bias[1]

            def loss(t):
                saved = table.copy()
                table[...] = t
                try:
                    return cross_entropy(model.forward(data.images)[0], data.labels)
                finally:
                    table[...] = saved
            report = check_gradient("bias", loss, table.copy(), grads.blocks[1].bias[1])
        else:
            report = check_gradient(target, _loss_with(model, data.images, data.labels, owner, attr),
                                    getattr(owner, attr).copy(), analytic)
        assert report.passed, report

    def test_step_lowers_loss(self, rng):
        model = HydraClassifier(TokenizerConfig.cct(1, 8), HydraConfig.parse("3x1:2"), (16, 16), rng=rng)
        data = make_stripes(16, rng)
        before, _ = model.step(data.images, data.labels, 0.05)
        after, _ = model.evaluate(data.images, data.labels)
        assert after < before

    def test_fixed_positional_untouched(self, rng):
        model = HydraClassifier(TokenizerConfig.cct(1, 8), HydraConfig.parse("3x1:2"), (16, 16), rng=rng)
        table = model.positional.copy()
        data = make_stripes(4, rng)
        model.step(data.images, data.labels, 0.05)
        np.testing.assert_array_equal(model.positional, table)

    def test_attention_maps(self, rng):
        model = HydraClassifier(TokenizerConfig.cct(1, 8), HydraConfig.parse("3x1:1,3x2:1"), (16, 16), n_blocks=3, rng=rng)
        states = model.attention_maps(make_stripes(1, rng).images[0])
        assert len(states) == 3
        assert states[0].head_probs(1).shape == (1, 8, 8, 9)

    def test_no_blocks(self, rng):
        model = HydraClassifier(TokenizerConfig.cct(1, 8), HydraConfig.parse("3x1:2"), (16, 16), n_blocks=0, rng=rng)
        data = make_stripes(4, rng)
        model.step(data.images, data.labels, 0.05)
        assert model.attention_maps(data.images[0]) == []

    def test_invalid(self, rng):
        cfg = TokenizerConfig.cct(1, 8)
        with pytest.raises(ArgumentError):
            HydraClassifier(cfg, HydraConfig.parse("3x1:3"), (16, 16), rng=rng)
        with pytest.raises(ArgumentError):
            HydraClassifier(cfg, HydraConfig.parse("3x1:2"), (16, 16), classes=1, rng=rng)
        with pytest.raises(ArgumentError):
            HydraClassifier(cfg, HydraConfig.parse("3x1:2"), (16, 16), mlp_ratio=0, rng=rng)
        with pytest.raises(GeometryError):
            HydraClassifier(cfg, HydraConfig.parse("3x3:2"), (16, 16), rng=rng)
        with pytest.raises(DimensionError):
            unpadded = TokenizerConfig(1, (ConvBlock(8, 3, 1, 0),), PoolSpec(3, 2, 0))
            HydraClassifier(unpadded, HydraConfig.parse("1x1:2"), (4, 4), rng=rng)


class TestFeedForward:
    def test_shapes_and_residual_scale(self, rng):
        model = HydraClassifier(TokenizerConfig.cct(1, 8), HydraConfig.parse("3x1:2"), (16, 16), mlp_ratio=3, rng=rng)
        ff = model.feed_forward[0]
        assert (ff.w1.shape, ff.w2.shape) == ((8, 24), (24, 8))
        assert len(model.feed_forward) == len(model.blocks) == 2
        x = rng.standard_normal((2, 5, 8))
        branch, pre = ff.forward(x)
        np.testing.assert_allclose(branch, np.maximum(x @ ff.w1, 0.0) @ ff.w2)
        assert pre.shape == (2, 5, 24)

    def test_vjp_matches_finite_differences(self, rng):
        model = HydraClassifier(TokenizerConfig.cct(1, 8), HydraConfig.parse("3x1:2"), (16, 16), rng=rng)
        ff = model.feed_forward[0]
        ff.b1 = rng.standard_normal(ff.b1.shape) * 0.1
        x, dy = rng.standard_normal((2, 5, 8)), rng.standard_normal((2, 5, 8))
        _, pre = ff.forward(x)
        dx, grads = ff.vjp(x, pre, dy)
        assert check_gradient("ff/x", lambda t: float((ff.forward(t)[0] * dy).sum()), x, dx).passed
        assert check_gradient("ff/w1", _loss_on(ff, "w1", x, dy), ff.w1.copy(), grads.w1).passed
        assert check_gradient("ff/b2", _loss_on(ff, "b2", x, dy), ff.b2.copy(), grads.b2).passed


def _loss_on(ff, attr, x, dy):
    def loss(t):
        saved = getattr(ff, attr)
        setattr(ff, attr, t)
        try:
            return float((ff.forward(x)[0] * dy).sum())
        finally:
            setattr(ff, attr, saved)
    return loss
