"""Objective tests: schedule values, loss constructions, monotonicity,
scale invariance, gradient checks, and a one-step descent sanity run."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from refold import objective as ob
from refold import tensor as tc
from refold.errors import ConfigError, ContractError
from refold.tensor import Tensor


class TestMarginSchedule:
    def test_pretrain_values(self):
        assert ob.margin_at(10, ob.PRETRAIN) == 0.0
        assert ob.margin_at(20, ob.PRETRAIN) == 0.0
        assert abs(ob.margin_at(30, ob.PRETRAIN) - 0.1) < 1e-12
        assert ob.margin_at(40, ob.PRETRAIN) == 0.2
        assert ob.margin_at(55, ob.PRETRAIN) == 0.2

    def test_lm_constant(self):
        for e in (0, 1, 3, 100):
            assert ob.margin_at(e, ob.LM_FINETUNE) == 0.3

    def test_negative_epoch_rejected(self):
        with pytest.raises(ContractError):
            ob.margin_at(-1, ob.PRETRAIN)

    def test_unknown_stage_rejected(self):
        with pytest.raises(ConfigError):
            ob.margin_at(0, "warmup")

    @given(st.floats(0, 100), st.floats(0, 100))
    @settings(max_examples=50, deadline=None)
    def test_monotone_and_clamped(self, e1, e2):
        lo, hi = sorted((e1, e2))
        m1, m2 = ob.margin_at(lo, ob.PRETRAIN), ob.margin_at(hi, ob.PRETRAIN)
        assert m1 <= m2 + 1e-12
        assert 0.0 <= m1 <= 0.2 and 0.0 <= m2 <= 0.2

    def test_continuity_at_ramp_edges(self):
        eps = 1e-9
        assert abs(ob.margin_at(20 + eps, ob.PRETRAIN) - 0.0) < 1e-8
        assert abs(ob.margin_at(40 - eps, ob.PRETRAIN) - 0.2) < 1e-8


def orthonormal_weights(k, e):
    w = np.zeros((k, e), dtype=np.float64)
    for i in range(k):
        w[i, i] = 1.0
    return w


class TestSF2C:
    def test_matched_embedding_beats_uniform_logits(self):
        # embedding equal to its class weight, all other weights orthogonal
        k, e = 4, 5
        w = Tensor(orthonormal_weights(k, e))
        emb = Tensor(w.data[1:2].copy())
        matched = ob.sf2c_loss(emb, [1], w, margin=0.0, scale=1.0).item()
        # uniform logits: embedding orthogonal to every class weight
        off = np.zeros((1, e), dtype=np.float64)
        off[0, e - 1] = 1.0
        uniform = ob.sf2c_loss(Tensor(off), [1], w, margin=0.0, scale=1.0).item()
        assert matched < uniform
        # uniform-logit value in closed form: all z=0 -> softplus(0)=log 2
        want = (1.0 / k) * ((k - 1) * math.log(2.0) + (k - 1) * math.log(2.0))
        assert abs(uniform - want) < 1e-9

    def test_margin_strictly_increases_loss(self):
        rng = np.random.default_rng(0)
        w = Tensor(rng.normal(size=(3, 4)))
        emb = Tensor(rng.normal(size=(2, 4)))
        losses = [ob.sf2c_loss(emb, [0, 2], w, margin=m, scale=8.0).item()
                  for m in (0.0, 0.1, 0.2, 0.3)]
        assert all(a < b for a, b in zip(losses, losses[1:]))

    def test_scale_invariance_of_raw_embeddings(self):
        rng = np.random.default_rng(1)
        w = Tensor(rng.normal(size=(5, 6)))
        emb = rng.normal(size=(3, 6))
        a = ob.sf2c_loss(Tensor(emb), [0, 1, 4], w, margin=0.1).item()
        b = ob.sf2c_loss(Tensor(emb * 37.5), [0, 1, 4], w, margin=0.1).item()
        assert abs(a - b) < 1e-10

    def test_label_out_of_range(self):
        w = Tensor(np.eye(3, dtype=np.float64))
        with pytest.raises(ContractError):
            ob.sf2c_loss(Tensor(np.ones((1, 3))), [3], w, margin=0.0)

    def test_gradient(self):
        rng = np.random.default_rng(2)
        emb = Tensor(rng.normal(size=(3, 4)), requires_grad=True, dtype=np.float64)
        w = Tensor(rng.normal(size=(5, 4)), requires_grad=True, dtype=np.float64)
        bias = Tensor(np.zeros(1, dtype=np.float64), requires_grad=True)
        err = tc.grad_check(
            lambda: ob.sf2c_loss(emb, [0, 2, 4], w, margin=0.15, scale=4.0, bias=bias),
            [emb, w, bias], max_coords=10,
        )
        assert err < 1e-5

    def test_bias_shifts_logits(self):
        rng = np.random.default_rng(3)
        w = Tensor(rng.normal(size=(3, 4)))
        emb = Tensor(rng.normal(size=(1, 4)))
        base = ob.sf2c_loss(emb, [0], w, margin=0.0, scale=1.0).item()
        shifted = ob.sf2c_loss(emb, [0], w, margin=0.0, scale=1.0,
                               bias=Tensor(np.array([2.0]))).item()
        assert shifted != base


class TestAAM:
    def test_perfect_embedding_low_loss(self):
        k, e = 3, 4
        w = Tensor(orthonormal_weights(k, e))
        emb = Tensor(w.data[0:1].copy())
        good = ob.aam_loss(emb, [0], w, margin=0.0, scale=10.0).item()
        bad = ob.aam_loss(Tensor(w.data[1:2].copy()), [0], w, margin=0.0, scale=10.0).item()
        assert good < 0.01 < bad

    def test_margin_increases_loss(self):
        rng = np.random.default_rng(4)
        w = Tensor(rng.normal(size=(4, 5)))
        emb = Tensor(rng.normal(size=(2, 5)))
        a = ob.aam_loss(emb, [1, 3], w, margin=0.0).item()
        b = ob.aam_loss(emb, [1, 3], w, margin=0.2).item()
        assert a < b

    def test_gradient(self):
        rng = np.random.default_rng(5)
        emb = Tensor(rng.normal(size=(2, 4)), requires_grad=True, dtype=np.float64)
        w = Tensor(rng.normal(size=(3, 4)), requires_grad=True, dtype=np.float64)
        err = tc.grad_check(
            lambda: ob.aam_loss(emb, [0, 2], w, margin=0.1, scale=5.0),
            [emb, w], max_coords=10,
        )
        assert err < 1e-5


class TestDescent:
    @pytest.mark.parametrize("kind", ["sf2c", "aam"])
    def test_single_gradient_step_reduces_loss(self, kind):
        rng = np.random.default_rng(6)
        head = ob.ClassifierHead(rng, n_classes=2, embed_dim=4, kind=kind, scale=8.0)
        for _, p in head.named_params():
            p.data = p.data.astype(np.float64)
        emb = Tensor(rng.normal(size=(1, 4)), requires_grad=True, dtype=np.float64)

        loss0 = head.loss(emb, [0], margin=0.1)
        loss0.backward()
        step = 0.05
        for p in [emb] + [q for _, q in head.named_params()]:
            if p.grad is not None:
                p.data -= step * p.grad
                p.zero_grad()
        loss1 = head.loss(emb, [0], margin=0.1)
        assert loss1.item() < loss0.item()

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError):
            ob.ClassifierHead(np.random.default_rng(0), 2, 4, kind="triplet")
