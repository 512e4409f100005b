"""Two-stage training loop.

Stage 1 pretrains on short crops with a linear-warmup / exponential-decay
learning rate and a margin that ramps over the middle third of the run
(epochs 20..40 at the default 60). Stage 2 reloads the stage-1 checkpoint
and finetunes on longer crops at a fixed large margin and a low, gently
decaying learning rate. Both stages log one metrics row per optimizer
step, and the whole procedure is bitwise deterministic under the seed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig
from .data import SyntheticSpeakerSet
from .errors import ConfigError, ContractError, NumericError
from .frontend import crop_segment, fbank, pad_time_to_multiple
from .model import SpeakerNet
from .objective import LM_FINETUNE, PRETRAIN, ClassifierHead, MarginSchedule, margin_at
from .reshape import ModelConfig

# -- schedules -----------------------------------------------------------


def lr_at(epoch: float, cfg: TrainConfig) -> float:
    """Pretrain learning rate at a (possibly fractional) epoch.

    Linear from lr_max/warmup_epochs up to lr_max over the warmup, then
    exponential decay hitting lr_min exactly at total_epochs.
    """
    if epoch < 0 or epoch > cfg.total_epochs:
        raise ConfigError(f"epoch {epoch} outside [0, {cfg.total_epochs}]")
    w = cfg.warmup_epochs
    if epoch <= w:
        start = cfg.lr_max / w
        return start + (cfg.lr_max - start) * (epoch / w)
    if epoch == cfg.total_epochs:  # avoid one-ulp drift in x/y*y
        return cfg.lr_min
    frac = (epoch - w) / (cfg.total_epochs - w)
    return cfg.lr_max * (cfg.lr_min / cfg.lr_max) ** frac


def lm_lr_at(epoch: float, cfg: TrainConfig) -> float:
    """Finetune learning rate: exponential decay from lm_lr toward lr_min.

    The floor is clamped at lm_lr so an unusual config with lr_min above
    lm_lr simply holds flat instead of growing.
    """
    if epoch < 0 or epoch > cfg.lm_epochs:
        raise ConfigError(f"epoch {epoch} outside [0, {cfg.lm_epochs}]")
    floor = min(cfg.lr_min, cfg.lm_lr)
    if epoch == cfg.lm_epochs:
        return floor
    return cfg.lm_lr * (floor / cfg.lm_lr) ** (epoch / cfg.lm_epochs)


def margin_schedule_for(cfg: TrainConfig) -> MarginSchedule:
    """Ramp over the middle third of pretrain (20..40 at 60 epochs)."""
    return MarginSchedule(
        ramp_start_epoch=cfg.total_epochs // 3,
        ramp_end_epoch=(2 * cfg.total_epochs) // 3,
    )


# -- optimizer -----------------------------------------------------------


def sgd_step(param, grad, velocity, lr, momentum=0.9, nesterov=True,
             weight_decay=2e-5):
    """One SGD update on raw arrays; returns (new_param, new_velocity).

    Classic coupled L2: g += wd*p, then v = m*v + g, and the applied
    direction is g + m*v in Nesterov form (plain v otherwise).
    """
    param = np.asarray(param)
    grad = np.asarray(grad)
    velocity = np.asarray(velocity)
    if grad.shape != param.shape or velocity.shape != param.shape:
        raise ContractError(
            f"shape mismatch: param {param.shape}, grad {grad.shape}, "
            f"velocity {velocity.shape}"
        )
    g = grad + weight_decay * param
    v = momentum * velocity + g
    d = g + momentum * v if nesterov else v
    return param - lr * d, v


class SGD:
    """Per-parameter velocity buffers around sgd_step."""

    def __init__(self, named_params, momentum=0.9, weight_decay=2e-5,
                 nesterov=True):
        self.named_params = list(named_params)
        names = [n for n, _ in self.named_params]
        if len(set(names)) != len(names):
            raise ContractError("duplicate parameter names in optimizer")
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.nesterov = nesterov
        self.velocities = {
            n: np.zeros_like(p.data) for n, p in self.named_params
        }

    def step(self, lr):
        for name, p in self.named_params:
            if p.grad is None:
                continue
            new_p, new_v = sgd_step(
                p.data, p.grad, self.velocities[name], lr,
                momentum=self.momentum, nesterov=self.nesterov,
                weight_decay=self.weight_decay,
            )
            p.data = new_p.astype(np.float32)
            self.velocities[name] = new_v.astype(np.float32)

    def zero_grad(self):
        for _, p in self.named_params:
            p.grad = None


# -- metrics -------------------------------------------------------------


@dataclass(frozen=True)
class MetricsRow:
    epoch: int
    step: int
    loss: float
    lr: float
    margin: float


def metrics_to_csv(rows) -> str:
    # repr round-trips floats exactly, so logged schedules can be
    # re-checked against lr_at/margin_at without tolerance
    lines = ["epoch,step,loss,lr,margin"]
    for r in rows:
        lines.append(f"{r.epoch},{r.step},{r.loss!r},{r.lr!r},{r.margin!r}")
    return "\n".join(lines) + "\n"


# -- training loop -------------------------------------------------------


def _batch_features(utts, idxs, seconds, n_mels, multiple, rng):
    feats, labels = [], []
    for i in idxs:
        w = crop_segment(utts[i].waveform, seconds, rng)
        fm = fbank(w, n_mels=n_mels)
        feats.append(pad_time_to_multiple(fm.values, multiple))
        labels.append(utts[i].speaker)
    return np.stack(feats), np.asarray(labels, dtype=np.int64)


def _run_stage(net, head, opt, utts, seconds, epochs, epoch_offset,
               lr_fn, margin_fn, batch_size, steps_per_epoch, rng, metrics,
               step_offset):
    if len(utts) < batch_size:
        raise ConfigError(
            f"batch_size {batch_size} exceeds the {len(utts)} train utterances"
        )
    steps = steps_per_epoch if steps_per_epoch > 0 else len(utts) // batch_size
    n_mels = net.config.f0
    multiple = net.config.time_multiple
    gstep = step_offset
    for e in range(epochs):
        need = steps * batch_size
        order = np.concatenate([rng.permutation(len(utts))
                                for _ in range(-(-need // len(utts)))])[:need]
        for s in range(steps):
            idxs = order[s * batch_size:(s + 1) * batch_size]
            feats, labels = _batch_features(utts, idxs, seconds, n_mels,
                                            multiple, rng)
            lr = lr_fn(e + s / steps)
            margin = margin_fn(e)
            try:
                emb = net.forward(feats, train=True)
                loss = head.loss(emb, labels, margin)
                val = float(loss.item())
                if not np.isfinite(val):
                    raise NumericError("loss is not finite")
                opt.zero_grad()
                loss.backward()
            except NumericError as exc:
                raise NumericError(
                    f"aborted at epoch {epoch_offset + e} step {gstep}: {exc}"
                ) from exc
            opt.step(lr)
            opt.zero_grad()
            metrics.append(MetricsRow(epoch_offset + e, gstep, val, lr, margin))
            gstep += 1
    return gstep


def _full_state(net, head):
    state = net.state_dict()
    for name, p in head.named_params():
        state[name] = p.data.copy()
    return state


def _load_full_state(net, head, state):
    net.load_state_dict(
        {k: v for k, v in state.items() if not k.startswith("classifier.")}
    )
    for name, p in head.named_params():
        if name not in state:
            raise ContractError(f"checkpoint missing {name}")
        if state[name].shape != p.data.shape:
            raise ContractError(
                f"checkpoint shape mismatch for {name}: "
                f"{state[name].shape} vs {p.data.shape}"
            )
        p.data = np.asarray(state[name], dtype=np.float32).copy()


@dataclass
class TrainResult:
    net: SpeakerNet
    head: ClassifierHead
    metrics: list
    pretrain_state: dict
    final_state: dict


def train(model_cfg: ModelConfig, cfg: TrainConfig, dataset=None,
          out_dir=None) -> TrainResult:
    """Run both stages; returns the trained net plus metrics and states.

    With out_dir set, also writes pretrain.ckpt, final.ckpt, and
    metrics.csv there, and stage 2 starts by reloading pretrain.ckpt
    from disk (otherwise from the in-memory copy). Finetune epochs in
    the log continue the pretrain numbering, and the optimizer's
    momentum buffers restart between stages.
    """
    if dataset is None:
        dataset = SyntheticSpeakerSet(
            n_speakers=cfg.n_speakers,
            utterances_per_speaker=cfg.utterances_per_speaker,
            trial_utterances_per_speaker=cfg.trial_utterances_per_speaker,
            utterance_seconds=cfg.utterance_seconds,
            seed=cfg.seed,
        )
    utts = dataset.train_utterances()
    if any(u.speaker < 0 or u.speaker >= dataset.n_speakers for u in utts):
        raise ContractError("utterance speaker ids out of range")

    root = np.random.SeedSequence(cfg.seed)
    head_seq, stage1_seq, stage2_seq = root.spawn(3)
    net = SpeakerNet(model_cfg, seed=cfg.seed)
    head = ClassifierHead(
        np.random.default_rng(head_seq), dataset.n_speakers,
        model_cfg.embed_dim, kind=cfg.loss, scale=cfg.loss_scale,
    )
    sched = margin_schedule_for(cfg)
    metrics: list[MetricsRow] = []

    opt = SGD(net.named_params() + head.named_params(),
              momentum=cfg.momentum, weight_decay=cfg.weight_decay)
    step = _run_stage(
        net, head, opt, utts, cfg.segment_seconds, cfg.total_epochs, 0,
        lambda ef: lr_at(ef, cfg),
        lambda e: margin_at(e, PRETRAIN, sched),
        cfg.batch_size, cfg.steps_per_epoch,
        np.random.default_rng(stage1_seq), metrics, 0,
    )

    pretrain_state = _full_state(net, head)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        save_checkpoint(os.path.join(out_dir, "pretrain.ckpt"), pretrain_state)
        _load_full_state(net, head,
                         load_checkpoint(os.path.join(out_dir, "pretrain.ckpt")))
    else:
        _load_full_state(net, head, pretrain_state)

    opt = SGD(net.named_params() + head.named_params(),
              momentum=cfg.momentum, weight_decay=cfg.weight_decay)
    _run_stage(
        net, head, opt, utts, cfg.lm_segment_seconds, cfg.lm_epochs,
        cfg.total_epochs,
        lambda ef: lm_lr_at(ef, cfg),
        lambda e: margin_at(e, LM_FINETUNE, sched),
        cfg.batch_size, cfg.steps_per_epoch,
        np.random.default_rng(stage2_seq), metrics, step,
    )

    final_state = _full_state(net, head)
    if out_dir:
        save_checkpoint(os.path.join(out_dir, "final.ckpt"), final_state)
        with open(os.path.join(out_dir, "metrics.csv"), "w") as fh:
            fh.write(metrics_to_csv(metrics))
    return TrainResult(net=net, head=head, metrics=metrics,
                       pretrain_state=pretrain_state, final_state=final_state)
