"""Analytic parameter and MAC accounting with budget-band classification.

Counting rules (multiply-accumulates, not FLOPs):
  conv2d   Cout * (Cin/groups) * Kf * Kt * Fout * Tout
  conv1d   analogous (depthwise: groups == C)
  linear   in * out per position
  attention  the four projections as linears, plus 2*T^2*D for the
             score and value matmuls
Everything else (norms, activations, softmax, upsampling, pooling
moments) counts zero MACs. Params count all weights and biases;
batch-norm running statistics are buffers, not params.

The headline figure is GMACs on a 2-second 16 kHz input: T = 198
frames, padded up to the config's time-stride divisibility multiple.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ConfigError, ContractError
from .frontend import HOP_SAMPLES, SAMPLE_RATE, WINDOW_SAMPLES
from .reshape import ModelConfig, plan

BAND_UPPER_BOUNDS = (
    ("B0", 0.5),
    ("B1", 0.75),
    ("B2", 1.5),
    ("B3", 3.0),
    ("B4", 5.5),
    ("B5", 10.0),
    ("B6", math.inf),
)


def classify_band(gmacs: float) -> str:
    """Half-open budget bands: B0 [0,0.5), B1 [0.5,0.75), ... B6 [10,inf)."""
    if gmacs < 0:
        raise ContractError(f"GMACs must be non-negative, got {gmacs}")
    for name, upper in BAND_UPPER_BOUNDS:
        if gmacs < upper:
            return name
    raise AssertionError("unreachable: B6 has no upper bound")


@dataclass(frozen=True)
class CostRow:
    name: str
    params: int
    macs: int


@dataclass
class CostReport:
    rows: list
    t_frames: int = 0

    @property
    def total_params(self):
        return sum(r.params for r in self.rows)

    @property
    def total_macs(self):
        return sum(r.macs for r in self.rows)

    @property
    def gmacs(self):
        return self.total_macs / 1e9

    @property
    def band(self):
        return classify_band(self.gmacs)

    def to_csv(self):
        lines = ["name,params,macs"]
        lines += [f"{r.name},{r.params},{r.macs}" for r in self.rows]
        lines.append(f"TOTAL,{self.total_params},{self.total_macs}")
        return "\n".join(lines) + "\n"

    def summary(self):
        return (f"params={self.total_params}  macs={self.total_macs}  "
                f"gmacs_at_{self.t_frames}frames={self.gmacs:.4f}  band={self.band}")


# -- per-layer counting primitives -------------------------------------


def conv2d_cost(name, cin, cout, kf, kt, fout, tout, groups=1, bias=False):
    p = cout * (cin // groups) * kf * kt + (cout if bias else 0)
    m = cout * (cin // groups) * kf * kt * fout * tout
    return CostRow(name, p, m)


def conv1d_depthwise_cost(name, c, k, tout, bias=False):
    return CostRow(name, c * k + (c if bias else 0), c * k * tout)


def linear_cost(name, din, dout, positions, bias=True):
    return CostRow(name, din * dout + (dout if bias else 0), din * dout * positions)


def attention_cost(name, d, t):
    # four D x D projections at T positions, plus score/value matmuls
    return CostRow(name, 4 * d * d, 4 * d * d * t + 2 * t * t * d)


def norm_cost(name, n_affine):
    return CostRow(name, n_affine, 0)


def frames_for_seconds(seconds: float) -> int:
    n = int(round(seconds * SAMPLE_RATE))
    if n < WINDOW_SAMPLES:
        raise ConfigError(f"{seconds}s of audio is shorter than one analysis window")
    return (n - WINDOW_SAMPLES) // HOP_SAMPLES + 1


def padded_frames(config: ModelConfig, frames: int) -> int:
    m = config.time_multiple
    return ((frames + m - 1) // m) * m


# -- whole-model accounting --------------------------------------------


def count_at_frames(config: ModelConfig, t: int) -> CostReport:
    """Per-layer cost rows mirroring the network structure exactly."""
    p = plan(config, t_in=t)
    d = config.width
    rows = [conv2d_cost("stem.conv", 1, config.c0, 3, 3, config.f0, t)]
    for spec, row in zip(config.stages, p.rows):
        cin, fin, tin = row.in_shape(config.c0, config.f0, t)
        cout, fout, tout = row.out_shape(config.c0, config.f0, t)
        pre = f"stage{row.index}"
        for j in range(spec.n_blocks_2d):
            rows.append(conv2d_cost(f"{pre}.block2d{j}.conv1", cin, cin, 3, 3, fin, tin))
            rows.append(norm_cost(f"{pre}.block2d{j}.bn1", 2 * cin))
            rows.append(conv2d_cost(f"{pre}.block2d{j}.conv2", cin, cin, 3, 3, fin, tin))
            rows.append(norm_cost(f"{pre}.block2d{j}.bn2", 2 * cin))
        rows.append(conv2d_cost(f"{pre}.down.conv", cin, cout, 3, 3, fout, tout))
        rows.append(norm_cost(f"{pre}.down.bn", 2 * cout))
        for j in range(spec.n_blocks_1d):
            rows.append(conv1d_depthwise_cost(f"{pre}.block1d{j}.dw", d, config.kernel_1d, tout))
            rows.append(norm_cost(f"{pre}.block1d{j}.ln", 2 * d))
            rows.append(linear_cost(f"{pre}.block1d{j}.w1", d, 4 * d, tout))
            rows.append(linear_cost(f"{pre}.block1d{j}.w2", 4 * d, d, tout))
            rows.append(attention_cost(f"{pre}.block1d{j}.attn", d, tout))
    rows.append(norm_cost("stage_logits", len(config.stages)))
    a = config.asp_hidden_dim
    rows.append(linear_cost("asp.w", d, a, t))
    rows.append(linear_cost("asp.v", a, 1, t, bias=False))
    rows.append(linear_cost("head", 2 * d, config.embed_dim, 1))
    return CostReport(rows=rows, t_frames=t)


def count(config: ModelConfig, seconds: float = 2.0) -> CostReport:
    t = padded_frames(config, frames_for_seconds(seconds))
    return count_at_frames(config, t)


# -- ablation ----------------------------------------------------------


def without_time_strides(config: ModelConfig, only_stage: int | None = None) -> ModelConfig:
    """Copy of `config` with S_t forced to 1 (all stages, or just one).

    Channel multipliers ride on S_f and are untouched.
    """
    stages = []
    for s in config.stages:
        if s.s_t == 2 and (only_stage is None or s.index == only_stage):
            stages.append(replace(s, s_t=1))
        else:
            stages.append(s)
    return replace(config, stages=stages)


@dataclass(frozen=True)
class AblationResult:
    gmacs_with: float
    gmacs_without: float

    @property
    def ratio(self):
        return self.gmacs_without / self.gmacs_with


def ablate_time_strides(config: ModelConfig, seconds: float = 2.0) -> AblationResult:
    """Compute cost with and without time pooling.

    Both variants are evaluated at the original config's padded frame
    count (the ablated plan accepts any T the original accepts), so the
    comparison isolates the strides themselves.
    """
    t = padded_frames(config, frames_for_seconds(seconds))
    base = count_at_frames(config, t)
    ablated = count_at_frames(without_time_strides(config), t)
    return AblationResult(gmacs_with=base.gmacs, gmacs_without=ablated.gmacs)
