"""Network blocks: stem, 2D residual blocks, strided downsample, 1D
conv+attention blocks, stage aggregation, attentive pooling, and the
full speaker embedding network.

Within a stage the order is: to2d, the plain 2D blocks, the strided
downsample conv, to1d, the 1D blocks. Stage outputs are recorded in 1D
form and aggregated at the end by softmax-weighted summation after
nearest-neighbor upsampling back to the input frame rate; stage
internals never see upsampled tensors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as tc
from .errors import ContractError
from .reshape import ModelConfig, plan, to1d, to2d
from .tensor import Tensor


def _he(rng, shape, fan_in):
    return Tensor(rng.normal(0.0, math.sqrt(2.0 / fan_in), size=shape).astype(np.float32),
                  requires_grad=True)


def _xavier(rng, shape, fan_in):
    return Tensor(rng.normal(0.0, math.sqrt(1.0 / fan_in), size=shape).astype(np.float32),
                  requires_grad=True)


def _zeros(shape):
    return Tensor(np.zeros(shape, dtype=np.float32), requires_grad=True)


def _ones(shape):
    return Tensor(np.ones(shape, dtype=np.float32), requires_grad=True)


class Conv2dLayer:
    def __init__(self, rng, cin, cout, kf=3, kt=3, stride=(1, 1)):
        self.w = _he(rng, (cout, cin, kf, kt), cin * kf * kt)
        self.stride = stride

    def __call__(self, x):
        return tc.conv2d(x, self.w, stride=self.stride)

    def params(self):
        return [("w", self.w)]

    def buffers(self):
        return []


class BatchNorm2dLayer:
    def __init__(self, c):
        self.gamma = _ones((c,))
        self.beta = _zeros((c,))
        self.running_mean = np.zeros(c, dtype=np.float32)
        self.running_var = np.ones(c, dtype=np.float32)

    def __call__(self, x, train):
        return tc.batch_norm_2d(x, self.gamma, self.beta,
                                self.running_mean, self.running_var, train)

    def params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def buffers(self):
        return [("running_mean", self.running_mean), ("running_var", self.running_var)]


class Block2d:
    """conv3x3-BN-ReLU-conv3x3-BN plus identity, then ReLU."""

    def __init__(self, rng, c):
        self.conv1 = Conv2dLayer(rng, c, c)
        self.bn1 = BatchNorm2dLayer(c)
        self.conv2 = Conv2dLayer(rng, c, c)
        self.bn2 = BatchNorm2dLayer(c)

    def __call__(self, x, train):
        h = tc.relu(self.bn1(self.conv1(x), train))
        h = self.bn2(self.conv2(h), train)
        return tc.relu(h + x)

    def params(self):
        return _prefixed([("conv1", self.conv1), ("bn1", self.bn1),
                          ("conv2", self.conv2), ("bn2", self.bn2)], "params")

    def buffers(self):
        return _prefixed([("bn1", self.bn1), ("bn2", self.bn2)], "buffers")


class Downsample:
    """Strided 3x3 conv implementing the stage's (S_f, S_t); BN + ReLU.

    A frequency stride doubles the channel count so volume is exact;
    a time stride keeps channels, halving the volume.
    """

    def __init__(self, rng, cin, s_f, s_t):
        self.conv = Conv2dLayer(rng, cin, cin * s_f, stride=(s_f, s_t))
        self.bn = BatchNorm2dLayer(cin * s_f)

    def __call__(self, x, train):
        return tc.relu(self.bn(self.conv(x), train))

    def params(self):
        return _prefixed([("conv", self.conv), ("bn", self.bn)], "params")

    def buffers(self):
        return _prefixed([("bn", self.bn)], "buffers")


class Block1d:
    """Depthwise-conv sublayer then attention sublayer, each residual.

    Sublayer A: depthwise conv1d(k) -> layer norm over channels ->
    pointwise expand x4 -> GELU -> pointwise project, added to input.
    Sublayer B: multi-head attention over time, added to input.
    """

    def __init__(self, rng, d, kernel, heads):
        self.heads = heads
        self.dw = _he(rng, (d, 1, kernel), kernel)
        self.ln_gamma = _ones((d,))
        self.ln_beta = _zeros((d,))
        self.w1 = _xavier(rng, (4 * d, d), d)
        self.b1 = _zeros((4 * d,))
        self.w2 = _xavier(rng, (d, 4 * d), 4 * d)
        self.b2 = _zeros((d,))
        self.wq = _xavier(rng, (d, d), d)
        self.wk = _xavier(rng, (d, d), d)
        self.wv = _xavier(rng, (d, d), d)
        self.wo = _xavier(rng, (d, d), d)

    def __call__(self, x, train):
        # x: [B, D, T]
        h = tc.conv1d_depthwise(x, self.dw)
        ht = tc.transpose(h, (0, 2, 1))  # [B, T, D]
        ht = tc.layer_norm(ht, self.ln_gamma, self.ln_beta)
        ht = tc.linear(ht, self.w1, self.b1)
        ht = tc.gelu(ht)
        ht = tc.linear(ht, self.w2, self.b2)
        x = x + tc.transpose(ht, (0, 2, 1))

        xt = tc.transpose(x, (0, 2, 1))
        attn = tc.multi_head_attention(xt, self.heads, self.wq, self.wk, self.wv, self.wo)
        return x + tc.transpose(attn, (0, 2, 1))

    def params(self):
        return [("dw", self.dw), ("ln_gamma", self.ln_gamma), ("ln_beta", self.ln_beta),
                ("w1", self.w1), ("b1", self.b1), ("w2", self.w2), ("b2", self.b2),
                ("wq", self.wq), ("wk", self.wk), ("wv", self.wv), ("wo", self.wo)]

    def buffers(self):
        return []


class AttentiveStatsPool:
    """alpha_t = softmax_t(v^T tanh(W x_t + b)); concat of weighted mean
    and weighted standard deviation."""

    EPS = 1e-7

    def __init__(self, rng, d, hidden):
        self.w = _xavier(rng, (hidden, d), d)
        self.b = _zeros((hidden,))
        self.v = _xavier(rng, (1, hidden), hidden)

    def __call__(self, x):
        # x: [B, D, T] -> [B, 2D]
        xt = tc.transpose(x, (0, 2, 1))  # [B, T, D]
        h = tc.tanh(tc.linear(xt, self.w, self.b))
        logits = tc.linear(h, self.v)  # [B, T, 1]
        alpha = tc.softmax(logits, axis=1)
        mu = tc.tsum(xt * alpha, axis=1)  # [B, D]
        ex2 = tc.tsum(xt * xt * alpha, axis=1)
        var = ex2 + mu * mu * (-1.0)
        # clamp roundoff negatives before the sqrt; EPS keeps T=1 finite
        sigma = tc.tsqrt(tc.relu(var) + self.EPS)
        return tc.concat([mu, sigma], axis=1)

    def params(self):
        return [("w", self.w), ("b", self.b), ("v", self.v)]

    def buffers(self):
        return []


class LinearLayer:
    def __init__(self, rng, din, dout, bias=True):
        self.w = _xavier(rng, (dout, din), din)
        self.b = _zeros((dout,)) if bias else None

    def __call__(self, x):
        return tc.linear(x, self.w, self.b)

    def params(self):
        out = [("w", self.w)]
        if self.b is not None:
            out.append(("b", self.b))
        return out

    def buffers(self):
        return []


def _prefixed(children, kind):
    out = []
    for name, child in children:
        for sub, val in getattr(child, kind)():
            out.append((f"{name}.{sub}", val))
    return out


@dataclass
class StageOutput:
    features_1d: Tensor  # [B, C0*F0, T_s]
    time_factor: int  # T / T_s


def aggregate_stages(outputs, weights):
    """Weighted sum of stage outputs after temporal re-alignment.

    `weights` must already be normalized (the caller softmaxes its
    logits), shape [S]; each output is nearest-upsampled by its own
    time_factor so one-hot weights reproduce that stage's upsampled
    features exactly.
    """
    if not outputs:
        raise ContractError("aggregate_stages needs at least one stage output")
    widths = {o.features_1d.shape[1] for o in outputs}
    if len(widths) != 1:
        raise ContractError(f"stage widths differ: {sorted(widths)}")
    t_star = outputs[0].features_1d.shape[2] * outputs[0].time_factor
    stacked = []
    for o in outputs:
        b, d, ts = o.features_1d.shape
        if ts * o.time_factor != t_star:
            raise ContractError(
                f"stage length {ts} x factor {o.time_factor} != aggregation length {t_star}"
            )
        up = tc.nearest_upsample_time(o.features_1d, o.time_factor)
        stacked.append(tc.reshape(up, (1, b, d, t_star)))
    if weights.shape != (len(outputs),):
        raise ContractError(f"expected {len(outputs)} stage weights, got shape {weights.shape}")
    wr = tc.reshape(weights, (len(outputs), 1, 1, 1))
    return tc.tsum(tc.concat(stacked, axis=0) * wr, axis=0)


class SpeakerNet:
    """Full embedding network over log-mel features [B, F0, T]."""

    def __init__(self, config: ModelConfig, seed=0):
        self.config = config
        self.plan = plan(config)
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        d = config.width

        self.stem = Conv2dLayer(rng, 1, config.c0)
        self.stages = []
        for spec, row in zip(config.stages, self.plan.rows):
            cin = config.c0 * row.in_mults[0]
            blocks2d = [Block2d(rng, cin) for _ in range(spec.n_blocks_2d)]
            down = Downsample(rng, cin, spec.s_f, spec.s_t)
            blocks1d = [Block1d(rng, d, config.kernel_1d, config.heads)
                        for _ in range(spec.n_blocks_1d)]
            self.stages.append((blocks2d, down, blocks1d))
        self.stage_logits = _zeros((len(config.stages),))
        self.asp = AttentiveStatsPool(rng, d, config.asp_hidden_dim)
        self.head = LinearLayer(rng, 2 * d, config.embed_dim)

    # -- forward -------------------------------------------------------

    def forward(self, feats, train=False):
        """feats: Tensor or array [B, F0, T] -> embeddings [B, embed_dim]."""
        x = feats if isinstance(feats, Tensor) else Tensor(np.asarray(feats, dtype=np.float32))
        if x.ndim != 3 or x.shape[1] != self.config.f0:
            raise ContractError(
                f"expected features [B, {self.config.f0}, T], got {x.shape}"
            )
        b, f0, t = x.shape
        if t % self.config.time_multiple:
            raise ContractError(
                f"T={t} not divisible by {self.config.time_multiple}; pad features first"
            )
        x2 = tc.reshape(x, (b, 1, f0, t))
        carrier = to1d(self.stem(x2))  # [B, C0*F0, T]

        outputs = []
        for (blocks2d, down, blocks1d), row in zip(self.stages, self.plan.rows):
            cin = self.config.c0 * row.in_mults[0]
            fin = self.config.f0 // row.in_mults[1]
            h = to2d(carrier, cin, fin)
            for blk in blocks2d:
                h = blk(h, train)
            h = down(h, train)
            carrier = to1d(h)
            for blk in blocks1d:
                carrier = blk(carrier, train)
            if carrier.shape[1] != self.config.width:
                raise ContractError(
                    f"stage {row.index} width {carrier.shape[1]} != {self.config.width}"
                )
            outputs.append(StageOutput(carrier, time_factor=row.time_factor))

        w = tc.softmax(self.stage_logits, axis=-1)
        agg = aggregate_stages(outputs, w)
        pooled = self.asp(agg)
        return self.head(pooled)

    def embed(self, feats):
        """Eval-mode embeddings as a plain float32 array."""
        return self.forward(feats, train=False).data

    # -- parameter registry ---------------------------------------------

    def named_params(self):
        out = [("stem.w", self.stem.w)]
        for i, (blocks2d, down, blocks1d) in enumerate(self.stages, start=1):
            for j, blk in enumerate(blocks2d):
                out += [(f"stage{i}.block2d{j}.{n}", p) for n, p in blk.params()]
            out += [(f"stage{i}.down.{n}", p) for n, p in down.params()]
            for j, blk in enumerate(blocks1d):
                out += [(f"stage{i}.block1d{j}.{n}", p) for n, p in blk.params()]
        out.append(("stage_logits", self.stage_logits))
        out += [(f"asp.{n}", p) for n, p in self.asp.params()]
        out += [(f"head.{n}", p) for n, p in self.head.params()]
        return out

    def named_buffers(self):
        out = []
        for i, (blocks2d, down, _) in enumerate(self.stages, start=1):
            for j, blk in enumerate(blocks2d):
                out += [(f"stage{i}.block2d{j}.{n}", b) for n, b in blk.buffers()]
            out += [(f"stage{i}.down.{n}", b) for n, b in down.buffers()]
        return out

    def n_params(self):
        return sum(p.size for _, p in self.named_params())

    def state_dict(self):
        """Params then buffers, as name -> float32 array (copies)."""
        out = {name: p.data.copy() for name, p in self.named_params()}
        for name, b in self.named_buffers():
            out[f"{name}"] = b.copy()
        return out

    def load_state_dict(self, state):
        for name, p in self.named_params():
            if name not in state:
                raise ContractError(f"checkpoint missing parameter {name}")
            if state[name].shape != p.data.shape:
                raise ContractError(
                    f"shape mismatch for {name}: checkpoint {state[name].shape} vs model {p.data.shape}"
                )
            p.data[...] = state[name]
        for name, b in self.named_buffers():
            if name not in state:
                raise ContractError(f"checkpoint missing buffer {name}")
            b[...] = state[name]
