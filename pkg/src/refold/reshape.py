"""Stage planning under the constant-volume rule, and the 2D/1D reshapes.

A stage may stride frequency (S_f=2, channels double, volume exact) or
stride time (S_t=2, channels unchanged, volume halves), never both.
Because every frequency halving is offset by a channel doubling, the
product C*F is the same at every stage boundary, so each stage's
flattened 1D width equals C0*F0.

Planning is symbolic: shapes are tracked as multiples of (C0, F0, T)
and only bound to integers when an input length is supplied.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError, ContractError
from . import tensor as tc


@dataclass(frozen=True)
class StageSpec:
    index: int
    s_f: int
    s_t: int
    n_blocks_2d: int = 1
    n_blocks_1d: int = 1

    def __post_init__(self):
        if self.s_f not in (1, 2) or self.s_t not in (1, 2):
            raise ConfigError(f"stage {self.index}: strides must be 1 or 2, got S_f={self.s_f} S_t={self.s_t}")
        if self.s_f == 2 and self.s_t == 2:
            raise ConfigError(f"stage {self.index}: S_f and S_t cannot both be 2 in one stage")
        if self.n_blocks_2d < 0 or self.n_blocks_1d < 0:
            raise ConfigError(f"stage {self.index}: block counts must be non-negative")

    @property
    def channel_multiplier(self):
        # frequency stride doubles channels; time stride leaves them alone
        return self.s_f


@dataclass
class ModelConfig:
    c0: int
    f0: int
    stages: list
    kernel_1d: int = 7
    heads: int = 4
    embed_dim: int = 192
    asp_hidden: int = 0  # 0 means width // 2
    stage_weight_mode: str = "softmax"

    def __post_init__(self):
        if self.c0 < 1 or self.f0 < 1:
            raise ConfigError(f"C0 and F0 must be positive, got {self.c0}, {self.f0}")
        if self.embed_dim <= 0:
            raise ConfigError(f"embed_dim must be positive, got {self.embed_dim}")
        if self.kernel_1d < 1 or self.kernel_1d % 2 == 0:
            raise ConfigError(f"kernel_1d must be odd and positive, got {self.kernel_1d}")
        if self.heads < 1 or (self.c0 * self.f0) % self.heads:
            raise ConfigError(
                f"1D width {self.c0 * self.f0} must be divisible by heads={self.heads}"
            )
        if self.stage_weight_mode != "softmax":
            raise ConfigError(f"unknown stage_weight_mode {self.stage_weight_mode!r}")
        if self.asp_hidden < 0:
            raise ConfigError("asp_hidden must be >= 0 (0 selects width // 2)")
        for i, s in enumerate(self.stages, start=1):
            if s.index != i:
                raise ConfigError(f"stage indices must be 1..N in order, got {s.index} at position {i}")

    @property
    def width(self):
        return self.c0 * self.f0

    @property
    def asp_hidden_dim(self):
        return self.asp_hidden if self.asp_hidden else self.width // 2

    @property
    def time_multiple(self):
        """Input frames must divide by this (2^(number of time strides))."""
        m = 1
        for s in self.stages:
            m *= s.s_t
        return m


def _sym_c(mul):
    return "C" if mul == 1 else f"{mul}C"


def _sym_div(name, div):
    return name if div == 1 else f"{name}/{div}"


def sym_shape(c_mul, f_div, t_div):
    return f"({_sym_c(c_mul)}, {_sym_div('F', f_div)}, {_sym_div('T', t_div)})"


def sym_volume(t_div):
    return _sym_div("C*F*T", t_div)


@dataclass(frozen=True)
class PlanRow:
    """One stage of the plan, shapes as (C-multiple, F-divisor, T-divisor)."""

    index: int
    s_f: int
    s_t: int
    in_mults: tuple
    out_mults: tuple

    @property
    def out_channels_sym(self):
        return _sym_c(self.out_mults[0])

    @property
    def volume_divisor(self):
        return self.out_mults[2]

    @property
    def time_factor(self):
        """Cumulative time downsampling at this stage's output."""
        return self.out_mults[2]

    def in_shape(self, c0, f0, t):
        return (c0 * self.in_mults[0], f0 // self.in_mults[1], t // self.in_mults[2])

    def out_shape(self, c0, f0, t):
        return (c0 * self.out_mults[0], f0 // self.out_mults[1], t // self.out_mults[2])


@dataclass
class ShapePlan:
    config: ModelConfig
    rows: list
    t_in: int | None = None

    @property
    def width(self):
        return self.config.width

    def volumes(self, t):
        """Per-stage output volumes C*F*T / 2^(time pools so far)."""
        base = self.config.c0 * self.config.f0 * t
        return [base // r.volume_divisor for r in self.rows]

    def time_factors(self):
        return [r.time_factor for r in self.rows]

    def symbolic_rows(self):
        """Rows as (block #, in shape, S_f, S_t, channels, out shape, volume)."""
        out = []
        for r in self.rows:
            out.append((
                r.index,
                sym_shape(*r.in_mults),
                r.s_f,
                r.s_t,
                r.out_channels_sym,
                sym_shape(*r.out_mults),
                sym_volume(r.volume_divisor),
            ))
        return out

    def render(self):
        header = ("Block #", "In shape", "S_f", "S_t", "Channels", "Out shape", "Volume")
        body = [tuple(str(v) for v in row) for row in self.symbolic_rows()]
        widths = [max(len(header[i]), *(len(b[i]) for b in body)) for i in range(len(header))]
        def fmt(cells):
            return " | ".join(c.ljust(w) for c, w in zip(cells, widths))
        lines = [fmt(header), "-+-".join("-" * w for w in widths)]
        lines += [fmt(b) for b in body]
        if self.t_in is not None:
            lines.append("")
            lines.append(f"numeric at T={self.t_in}:")
            for r in self.rows:
                ic, if_, it = r.in_shape(self.config.c0, self.config.f0, self.t_in)
                oc, of_, ot = r.out_shape(self.config.c0, self.config.f0, self.t_in)
                lines.append(
                    f"  stage {r.index}: ({ic}, {if_}, {it}) -> ({oc}, {of_}, {ot})"
                    f"  width={oc * of_}  volume={oc * of_ * ot}"
                )
        return "\n".join(lines)


def plan(config: ModelConfig, t_in: int | None = None) -> ShapePlan:
    """Walk the stages, tracking symbolic shape multiples.

    With `t_in` set, also validates that the concrete F0 and T divide
    evenly at every stage, raising ConfigError naming the first stage
    that violates divisibility.
    """
    rows = []
    c_mul, f_div, t_div = 1, 1, 1
    for s in config.stages:
        in_mults = (c_mul, f_div, t_div)
        c_mul *= s.channel_multiplier
        f_div *= s.s_f
        t_div *= s.s_t
        out_mults = (c_mul, f_div, t_div)
        if config.f0 % f_div:
            raise ConfigError(
                f"stage {s.index}: F0={config.f0} is not divisible by {f_div} after frequency stride"
            )
        if t_in is not None and t_in % t_div:
            raise ConfigError(
                f"stage {s.index}: T={t_in} is not divisible by {t_div} after time stride"
            )
        rows.append(PlanRow(index=s.index, s_f=s.s_f, s_t=s.s_t, in_mults=in_mults, out_mults=out_mults))
    return ShapePlan(config=config, rows=rows, t_in=t_in)


TABLE_PATTERN = ((1, 1), (2, 1), (1, 2), (2, 1), (1, 2), (2, 1))


def standard_stages(pattern=TABLE_PATTERN, n_blocks_2d=None, n_blocks_1d=None):
    """StageSpec list for a stride pattern; block counts default to 1."""
    n = len(pattern)
    n2 = n_blocks_2d or [1] * n
    n1 = n_blocks_1d or [1] * n
    if len(n2) != n or len(n1) != n:
        raise ConfigError("block count lists must match the number of stages")
    return [
        StageSpec(index=i + 1, s_f=sf, s_t=st, n_blocks_2d=n2[i], n_blocks_1d=n1[i])
        for i, (sf, st) in enumerate(pattern)
    ]


# -- concrete reshapes -------------------------------------------------


def to1d(x):
    """[B, C, F, T] -> [B, C*F, T]; row r = c*F + f (c slowest)."""
    if x.ndim != 4:
        raise ContractError(f"to1d expects [B,C,F,T], got {x.shape}")
    b, c, f, t = x.shape
    return tc.reshape(x, (b, c * f, t))


def to2d(x, c, f):
    """[B, C*F, T] -> [B, C, F, T]; exact inverse of to1d."""
    if x.ndim != 3:
        raise ContractError(f"to2d expects [B,D,T], got {x.shape}")
    b, d, t = x.shape
    if d != c * f:
        raise ContractError(f"to2d: width {d} != C*F = {c}*{f} = {c * f}")
    return tc.reshape(x, (b, c, f, t))
