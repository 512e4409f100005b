"""Command-line surface: plan, cost, train, eval, pareto.

All commands are deterministic given their inputs; train/eval/pareto
write their artifacts (CSV plus a rendered figure) under --out. Exit
codes: 0 ok, 2 bad config or usage, 3 contract violation, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .config import (
    format_kv,
    load_model_config,
    load_train_config,
    model_config_to_kv,
    train_config_to_kv,
)
from .checkpoint import load_checkpoint
from .cost import ablate_time_strides, count, frames_for_seconds, padded_frames
from .data import SyntheticSpeakerSet
from .errors import ConfigError, ContractError, NumericError
from .evaluation import (
    EvalReport,
    eer,
    far_frr_at,
    format_trials,
    load_trials,
    score_trials,
    embed_utterances,
)
from .frontend import read_wav, write_wav
from .model import SpeakerNet
from .reshape import plan
from .train import train


def _write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def cmd_plan(args) -> int:
    cfg = load_model_config(args.config)
    print(plan(cfg, t_in=args.frames).render())
    return 0


def cmd_cost(args) -> int:
    cfg = load_model_config(args.config)
    if args.ablate_time:
        res = ablate_time_strides(cfg, seconds=args.input_seconds)
        print("gmacs_with,gmacs_without,ratio")
        print(f"{res.gmacs_with:.6f},{res.gmacs_without:.6f},{res.ratio:.6f}")
        return 0
    report = count(cfg, seconds=args.input_seconds)
    sys.stdout.write(report.to_csv())
    print(report.summary(), file=sys.stderr)
    return 0


def _score_and_report(net, utt_map, trials):
    embeddings = embed_utterances(net, utt_map)
    labels, scores = score_trials(embeddings, trials)
    value, thr = eer(labels, scores)
    report = EvalReport(
        eer=value, threshold=thr, n_trials=len(trials),
        n_target=int((labels == 1).sum()),
        n_nontarget=int((labels == 0).sum()),
    )
    return report, labels, scores


def _write_eval_outputs(out_dir, report, labels, scores):
    from . import plots

    _write(os.path.join(out_dir, "eval_report.csv"), report.to_csv())
    ts = np.linspace(float(scores.min()), float(scores.max()), 257)
    far, frr = far_frr_at(labels, scores, ts)
    plots.far_frr_curve(ts, far, frr, report.eer, report.threshold,
                        os.path.join(out_dir, "eval_far_frr.png"))


def cmd_train(args) -> int:
    from . import plots

    model_cfg = load_model_config(args.model_config)
    train_cfg = load_train_config(args.train_config)
    out = args.out
    os.makedirs(out, exist_ok=True)

    dataset = SyntheticSpeakerSet(
        n_speakers=train_cfg.n_speakers,
        utterances_per_speaker=train_cfg.utterances_per_speaker,
        trial_utterances_per_speaker=train_cfg.trial_utterances_per_speaker,
        utterance_seconds=train_cfg.utterance_seconds,
        seed=train_cfg.seed,
    )

    _write(os.path.join(out, "manifest.txt"), format_kv([
        ("version", __version__),
        ("model_config", args.model_config),
        ("train_config", args.train_config),
        ("seed", train_cfg.seed),
    ]))
    _write(os.path.join(out, "model.cfg"), model_config_to_kv(model_cfg))
    _write(os.path.join(out, "train.cfg"), train_config_to_kv(train_cfg))

    t = padded_frames(model_cfg, frames_for_seconds(train_cfg.segment_seconds))
    _write(os.path.join(out, "plan.txt"), plan(model_cfg, t_in=t).render() + "\n")
    cost_report = count(model_cfg)
    _write(os.path.join(out, "cost.csv"), cost_report.to_csv())

    result = train(model_cfg, train_cfg, dataset=dataset, out_dir=out)
    plots.training_curves(result.metrics, os.path.join(out, "curves.png"))

    trials = dataset.trial_list()
    _write(os.path.join(out, "trials.txt"), format_trials(trials))
    wav_dir = os.path.join(out, "eval_wavs")
    os.makedirs(wav_dir, exist_ok=True)
    utt_map = {}
    for u in dataset.trial_utterances():
        write_wav(os.path.join(wav_dir, u.uid + ".wav"), u.waveform)
        utt_map[u.uid] = u.waveform

    report, labels, scores = _score_and_report(result.net, utt_map, trials)
    _write_eval_outputs(out, report, labels, scores)

    print(cost_report.summary())
    print(report.summary())
    print(f"run artifacts in {out}")
    return 0


def cmd_eval(args) -> int:
    model_cfg = load_model_config(args.model_config)
    net = SpeakerNet(model_cfg)
    state = load_checkpoint(args.checkpoint)
    net.load_state_dict(
        {k: v for k, v in state.items() if not k.startswith("classifier.")}
    )
    trials = load_trials(args.trials)
    utt_map = {}
    for uid in sorted({t.enroll for t in trials} | {t.test for t in trials}):
        utt_map[uid] = read_wav(os.path.join(args.wav_dir, uid + ".wav"))

    report, labels, scores = _score_and_report(net, utt_map, trials)
    os.makedirs(args.out, exist_ok=True)
    _write_eval_outputs(args.out, report, labels, scores)
    print(report.summary())
    return 0


def cmd_pareto(args) -> int:
    from . import plots

    rows = []
    for run in args.runs:
        cost_path = os.path.join(run, "cost.csv")
        eval_path = os.path.join(run, "eval_report.csv")
        if not (os.path.exists(cost_path) and os.path.exists(eval_path)):
            print(f"warning: skipping {run}: missing cost.csv or eval_report.csv",
                  file=sys.stderr)
            continue
        total = [ln for ln in open(cost_path).read().splitlines()
                 if ln.startswith("TOTAL,")]
        if not total:
            raise ContractError(f"{cost_path} has no TOTAL row")
        _, params, macs = total[0].split(",")
        eer_value = float(open(eval_path).read().splitlines()[1].split(",")[0])
        rows.append((int(macs) / 1e9, int(params), eer_value,
                     os.path.basename(os.path.normpath(run))))

    rows.sort(key=lambda r: r[0])
    lines = ["gmacs,params,eer,run"]
    lines += [f"{g:.6f},{p},{e:.9f},{name}" for g, p, e, name in rows]
    csv_text = "\n".join(lines) + "\n"
    sys.stdout.write(csv_text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write(os.path.join(args.out, "pareto.csv"), csv_text)
        if rows:
            plots.pareto_front(rows, os.path.join(args.out, "pareto.png"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refold",
        description="speaker-embedding networks with constant-volume reshaping",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="print the stage shape plan")
    p.add_argument("--config", required=True)
    p.add_argument("--frames", type=int, default=None,
                   help="also show numeric shapes at this input frame count")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("cost", help="per-layer MAC/param report")
    p.add_argument("--config", required=True)
    p.add_argument("--input-seconds", type=float, default=2.0)
    p.add_argument("--ablate-time", action="store_true",
                   help="compare against the same net with time strides removed")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("train", help="run the two-stage recipe on synthetic speakers")
    p.add_argument("--model-config", required=True)
    p.add_argument("--train-config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a trial list with a trained checkpoint")
    p.add_argument("--model-config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--trials", required=True)
    p.add_argument("--wav-dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pareto", help="merge run directories into a cost/EER table")
    p.add_argument("runs", nargs="+")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_pareto)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ContractError as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
