"""Trial-based verification scoring: cosine similarity and EER.

FAR(t) = P(score >= t | nontarget), FRR(t) = P(score < t | target);
ties accept. Both rates are piecewise-linear in t between the sorted
unique scores (plus one sentinel above the maximum); the EER is read
off at the exact crossing of the two interpolants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError
from .frontend import fbank, pad_time_to_multiple


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ContractError(f"embedding dims differ: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ContractError("cosine of a zero-norm vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def far_frr_at(labels, scores, thresholds):
    """FAR/FRR arrays at each threshold; score == threshold accepts."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    far = np.array([(neg >= t).mean() for t in thresholds])
    frr = np.array([(pos < t).mean() for t in thresholds])
    return far, frr


def eer(labels, scores):
    """Returns (eer, threshold)."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape:
        raise ContractError("labels and scores must be parallel arrays")
    if not ((labels == 0) | (labels == 1)).all():
        raise ContractError("labels must be 0 or 1")
    if not (labels == 1).any() or not (labels == 0).any():
        raise ContractError("EER needs at least one target and one nontarget trial")

    ts = np.unique(scores)
    ts = np.append(ts, ts[-1] + 1.0)  # sentinel: FAR 0, FRR 1
    far, frr = far_frr_at(labels, scores, ts)

    i = int(np.argmax(frr >= far))  # first crossing index
    if frr[i] == far[i]:
        return float(far[i]), float(ts[i])
    # interpolate inside (ts[i-1], ts[i]); i >= 1 because frr[0] == 0
    gap_lo = far[i - 1] - frr[i - 1]
    gap_hi = frr[i] - far[i]
    lam = gap_lo / (gap_lo + gap_hi)
    value = far[i - 1] + (far[i] - far[i - 1]) * lam
    thr = ts[i - 1] + (ts[i] - ts[i - 1]) * lam
    return float(value), float(thr)


# -- trials -------------------------------------------------------------


@dataclass(frozen=True)
class Trial:
    label: int
    enroll: str
    test: str


def parse_trials(text: str):
    """Whitespace-separated `label enroll test` lines."""
    trials = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ConfigError(f"trial line {lineno}: expected `label enroll test`, got {raw!r}")
        if parts[0] not in ("0", "1"):
            raise ConfigError(f"trial line {lineno}: label must be 0 or 1, got {parts[0]!r}")
        trials.append(Trial(label=int(parts[0]), enroll=parts[1], test=parts[2]))
    if not trials:
        raise ConfigError("trial file contains no trials")
    return trials


def format_trials(trials) -> str:
    return "".join(f"{t.label} {t.enroll} {t.test}\n" for t in trials)


def load_trials(path):
    try:
        text = open(path, "r", encoding="utf-8").read()
    except OSError as exc:
        raise ConfigError(f"cannot read trial file {path}: {exc}") from exc
    return parse_trials(text)


def score_trials(embeddings: dict, trials):
    """Cosine score per trial; returns (labels, scores) arrays."""
    labels = np.empty(len(trials), dtype=np.int64)
    scores = np.empty(len(trials), dtype=np.float64)
    for i, t in enumerate(trials):
        for uid in (t.enroll, t.test):
            if uid not in embeddings:
                raise ConfigError(f"trial references unknown utterance id {uid!r}")
        labels[i] = t.label
        scores[i] = cosine(embeddings[t.enroll], embeddings[t.test])
    return labels, scores


def embed_utterances(net, utterances: dict):
    """Full-length eval-mode embeddings for every utterance, id -> vector."""
    out = {}
    for uid in sorted(utterances):
        fm = fbank(utterances[uid], n_mels=net.config.f0)
        feats = pad_time_to_multiple(fm.values, net.config.time_multiple)
        out[uid] = net.embed(feats[None, :, :])[0]
    return out


@dataclass
class EvalReport:
    eer: float
    threshold: float
    n_trials: int
    n_target: int
    n_nontarget: int

    def to_csv(self):
        return ("eer,threshold,n_trials,n_target,n_nontarget\n"
                f"{self.eer:.9f},{self.threshold:.9f},{self.n_trials},{self.n_target},{self.n_nontarget}\n")

    def summary(self):
        return (f"EER {100.0 * self.eer:.3f}% at threshold {self.threshold:.4f} "
                f"({self.n_trials} trials: {self.n_target} target / {self.n_nontarget} nontarget)")


def evaluate(net, utterances: dict, trials) -> EvalReport:
    """Embed at full length, score all trials, compute EER.

    No score normalization is applied.
    """
    embeddings = embed_utterances(net, utterances)
    labels, scores = score_trials(embeddings, trials)
    value, thr = eer(labels, scores)
    return EvalReport(
        eer=value,
        threshold=thr,
        n_trials=len(trials),
        n_target=int((labels == 1).sum()),
        n_nontarget=int((labels == 0).sum()),
    )
