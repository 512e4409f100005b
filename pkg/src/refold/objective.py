"""Margin schedule and classification objectives.

The default loss frames speaker classification as K parallel binary
decisions on scaled cosine logits (one-vs-rest with the positive term
re-weighted by K-1), with an additive cosine margin on the target
class and a learnable scalar logit bias. A conventional margin-softmax
cross entropy is provided behind the same interface as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as tc
from .errors import ConfigError, ContractError
from .tensor import Tensor

PRETRAIN = "pretrain"
LM_FINETUNE = "lm_finetune"


@dataclass(frozen=True)
class MarginSchedule:
    m_start: float = 0.0
    m_end: float = 0.2
    ramp_start_epoch: int = 20
    ramp_end_epoch: int = 40
    lm_margin: float = 0.3


def margin_at(epoch, stage, sched: MarginSchedule = MarginSchedule()) -> float:
    """Piecewise-linear pretrain ramp; constant margin in LM finetune."""
    if epoch < 0:
        raise ContractError(f"epoch must be non-negative, got {epoch}")
    if stage == LM_FINETUNE:
        return sched.lm_margin
    if stage != PRETRAIN:
        raise ConfigError(f"unknown training stage {stage!r}")
    if epoch <= sched.ramp_start_epoch:
        return sched.m_start
    if epoch >= sched.ramp_end_epoch:
        return sched.m_end
    frac = (epoch - sched.ramp_start_epoch) / (sched.ramp_end_epoch - sched.ramp_start_epoch)
    return sched.m_start + frac * (sched.m_end - sched.m_start)


def _normalize_rows(x):
    norm = tc.tsqrt(tc.tsum(x * x, axis=-1, keepdims=True))
    return x * tc.power(norm, -1.0)


def _cosines(embeddings, labels, class_weights):
    if embeddings.ndim != 2 or class_weights.ndim != 2:
        raise ContractError(
            f"expected embeddings [B,E] and class weights [K,E], got {embeddings.shape}, {class_weights.shape}"
        )
    k = class_weights.shape[0]
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size != embeddings.shape[0]:
        raise ContractError(f"{labels.size} labels for {embeddings.shape[0]} embeddings")
    if labels.min(initial=0) < 0 or labels.max(initial=-1) >= k:
        raise ContractError(f"label out of range [0, {k})")
    onehot = np.zeros((labels.size, k), dtype=embeddings.dtype)
    onehot[np.arange(labels.size), labels] = 1.0
    cos = tc.matmul(_normalize_rows(embeddings), tc.transpose(_normalize_rows(class_weights)))
    return cos, onehot


def sf2c_loss(embeddings, labels, class_weights, margin, scale=32.0, bias=None):
    """One-vs-rest binary logistic loss on margin-shifted cosine logits.

    z_k = scale * (cos theta_k - margin*[k==label]) + bias;
    loss = mean_B (1/K) * ((K-1)*softplus(-z_label) + sum_{k!=label} softplus(z_k)).
    """
    cos, onehot = _cosines(embeddings, labels, class_weights)
    k = class_weights.shape[0]
    z = (cos + Tensor((-margin * onehot).astype(cos.dtype))) * scale
    if bias is not None:
        z = z + bias
    pos = tc.tsum(tc.softplus(z * (-1.0)) * Tensor(onehot), axis=-1)
    neg = tc.tsum(tc.softplus(z) * Tensor((1.0 - onehot).astype(cos.dtype)), axis=-1)
    per_sample = (pos * float(k - 1) + neg) * (1.0 / k)
    return tc.tmean(per_sample)


def aam_loss(embeddings, labels, class_weights, margin, scale=32.0, bias=None):
    """Cross entropy over scaled cosine logits with a subtractive margin
    on the target class; the cross-check objective."""
    cos, onehot = _cosines(embeddings, labels, class_weights)
    z = (cos + Tensor((-margin * onehot).astype(cos.dtype))) * scale
    if bias is not None:
        z = z + bias
    # log-sum-exp with a constant shift; the shift drops out of the gradient
    zmax = z.data.max(axis=-1, keepdims=True)
    lse = tc.tlog(tc.tsum(tc.texp(z + Tensor(-zmax)), axis=-1)) + Tensor(zmax[:, 0])
    z_label = tc.tsum(z * Tensor(onehot), axis=-1)
    return tc.tmean(lse + z_label * (-1.0))


LOSSES = {"sf2c": sf2c_loss, "aam": aam_loss}


class ClassifierHead:
    """Trainable class weights (plus scalar bias) for either objective."""

    def __init__(self, rng, n_classes, embed_dim, kind="sf2c", scale=32.0):
        if kind not in LOSSES:
            raise ConfigError(f"unknown loss kind {kind!r}; expected one of {sorted(LOSSES)}")
        self.kind = kind
        self.scale = scale
        self.weights = Tensor(
            rng.normal(0.0, embed_dim ** -0.5, size=(n_classes, embed_dim)).astype(np.float32),
            requires_grad=True,
        )
        self.bias = Tensor(np.zeros(1, dtype=np.float32), requires_grad=True)

    def loss(self, embeddings, labels, margin):
        bias = self.bias if self.kind == "sf2c" else None
        return LOSSES[self.kind](embeddings, labels, self.weights, margin,
                                 scale=self.scale, bias=bias)

    def named_params(self):
        return [("classifier.weights", self.weights), ("classifier.bias", self.bias)]
