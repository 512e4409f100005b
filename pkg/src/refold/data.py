"""Synthetic speaker dataset for end-to-end toy training.

Each utterance is filtered white noise. A shared codebook of smooth
spectral "content" envelopes changes every 200 ms and acts as nuisance
variation. Speaker identity rides on cues that stay visible after the
frontend's per-utterance mean subtraction (which erases anything
purely static):

  * each speaker draws its phrases from a speaker-specific subset of
    the shared codebook, so which shapes alternate within an utterance
    is itself identity;
  * a per-speaker random smooth log-spectral envelope (plus a narrow
    pitch bump at the speaker's f0) whose gain fluctuates from segment
    to segment;
  * a vocal-tract-style frequency warp of the content envelopes and a
    slow amplitude modulation at a speaker-specific rate.

Content swings stay stronger than the speaker terms frame-by-frame, and
every segment also gets a broadband loudness jitter. The jitter shifts
all log-mel bins equally, so it drowns raw variance statistics (keeping
an untrained embedder near chance) while remaining exactly removable by
a frame-wise across-bin mean subtraction the network can learn.

Warp factors and modulation rates are laid out on evenly spaced,
seed-shuffled grids so no two speakers collide by chance. Everything
derives from numpy SeedSequence spawning: utterance audio is keyed by
(seed, speaker, index, split), so generation order never matters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .evaluation import Trial
from .frontend import SAMPLE_RATE, Waveform

N_CONTENT = 24
N_HARMONICS = 4
CONTENT_SCALE = 1.1
CONTENT_SUBSET = 5
SEGMENT_SECONDS = 0.1
SPEAKER_HARMONICS = 5
SPEAKER_SCALE = 1.2
SPEAKER_GAIN_RANGE = (0.0, 2.0)
PITCH_HZ_RANGE = (85.0, 255.0)
PITCH_GAIN = 0.8
PITCH_WIDTH = 0.012
WARP_RANGE = (0.85, 1.15)
AM_RATE_RANGE = (1.5, 7.5)
AM_DEPTH = 0.45
TARGET_RMS = 0.1
NOISE_FLOOR = 0.02
LOUDNESS_JITTER = 0.8


@dataclass(frozen=True)
class SpeakerVoice:
    content_ids: np.ndarray
    env_amps: np.ndarray
    env_phases: np.ndarray
    pitch_x0: float
    warp: float
    am_rate: float


@dataclass(frozen=True)
class Utterance:
    uid: str
    speaker: int
    waveform: Waveform


def _log_envelope(amps, phases, x):
    """Sum of low-order cosine components over normalized frequency x."""
    k = np.arange(1, amps.shape[-1] + 1)
    return (amps * np.cos(np.pi * k * x[:, None] + phases)).sum(-1)


class SyntheticSpeakerSet:
    def __init__(self, n_speakers=20, utterances_per_speaker=12,
                 trial_utterances_per_speaker=3, utterance_seconds=3.0, seed=0):
        if n_speakers < 2:
            raise ConfigError(f"need at least 2 speakers, got {n_speakers}")
        if utterance_seconds < 2 * SEGMENT_SECONDS:
            raise ConfigError("utterances must span at least two content segments")
        self.n_speakers = n_speakers
        self.utterances_per_speaker = utterances_per_speaker
        self.trial_utterances_per_speaker = trial_utterances_per_speaker
        self.utterance_seconds = utterance_seconds
        self.seed = seed

        root = np.random.SeedSequence(seed)
        book_rng, voice_rng = (np.random.default_rng(s) for s in root.spawn(2))
        self._amps = (
            book_rng.normal(0.0, CONTENT_SCALE, (N_CONTENT, N_HARMONICS))
            / np.arange(1, N_HARMONICS + 1)
        )
        self._phases = book_rng.uniform(0.0, 2.0 * np.pi, (N_CONTENT, N_HARMONICS))

        warps = np.linspace(*WARP_RANGE, n_speakers)
        rates = np.linspace(*AM_RATE_RANGE, n_speakers)
        voice_rng.shuffle(warps)
        voice_rng.shuffle(rates)
        nyquist = SAMPLE_RATE / 2.0
        self.voices = [
            SpeakerVoice(
                content_ids=voice_rng.choice(N_CONTENT, CONTENT_SUBSET,
                                             replace=False),
                env_amps=voice_rng.normal(0.0, SPEAKER_SCALE, SPEAKER_HARMONICS)
                / np.arange(1, SPEAKER_HARMONICS + 1),
                env_phases=voice_rng.uniform(0.0, 2.0 * np.pi, SPEAKER_HARMONICS),
                pitch_x0=float(voice_rng.uniform(*PITCH_HZ_RANGE) / nyquist),
                warp=float(warps[i]),
                am_rate=float(rates[i]),
            )
            for i in range(n_speakers)
        ]

    # -- synthesis -----------------------------------------------------

    def _utterance_rng(self, speaker, index, split_code):
        return np.random.default_rng(
            np.random.SeedSequence([self.seed, speaker, index, split_code])
        )

    def _render(self, speaker: int, rng: np.random.Generator) -> Waveform:
        voice = self.voices[speaker]
        n = int(round(self.utterance_seconds * SAMPLE_RATE))
        seg = int(SEGMENT_SECONDS * SAMPLE_RATE)
        n_seg = -(-n // seg)
        x = np.linspace(0.0, 1.0, seg // 2 + 1)
        xw = np.clip(voice.warp * x, 0.0, 1.0)
        spk = _log_envelope(voice.env_amps, voice.env_phases, x)
        spk += PITCH_GAIN * np.exp(-0.5 * ((x - voice.pitch_x0) / PITCH_WIDTH) ** 2)

        pieces = []
        for _ in range(n_seg):
            c = int(voice.content_ids[rng.integers(CONTENT_SUBSET)])
            gain = rng.uniform(*SPEAKER_GAIN_RANGE)
            logp = _log_envelope(self._amps[c], self._phases[c], xw) + gain * spk
            logp += rng.normal(0.0, LOUDNESS_JITTER)
            spec = np.fft.rfft(rng.normal(size=seg)) * np.exp(0.5 * logp)
            pieces.append(np.fft.irfft(spec, n=seg))
        y = np.concatenate(pieces)[:n]

        t = np.arange(n) / SAMPLE_RATE
        y *= 1.0 + AM_DEPTH * np.sin(2.0 * np.pi * voice.am_rate * t + rng.uniform(0.0, 2.0 * np.pi))
        y += NOISE_FLOOR * np.abs(y).mean() * rng.normal(size=n)
        y *= TARGET_RMS / np.sqrt(np.mean(y**2))
        return Waveform(np.clip(y, -1.0, 1.0).astype(np.float32))

    def _make(self, speaker, index, split, split_code):
        w = self._render(speaker, self._utterance_rng(speaker, index, split_code))
        return Utterance(uid=f"spk{speaker}_{split}{index}", speaker=speaker, waveform=w)

    # -- splits ----------------------------------------------------------

    def train_utterances(self):
        return [self._make(s, j, "train", 0)
                for s in range(self.n_speakers)
                for j in range(self.utterances_per_speaker)]

    def trial_utterances(self):
        return [self._make(s, j, "trial", 1)
                for s in range(self.n_speakers)
                for j in range(self.trial_utterances_per_speaker)]

    def trial_list(self):
        """All same-speaker pairs as targets, all cross-speaker pairs as
        nontargets, over the held-out trial utterances."""
        utts = self.trial_utterances()
        trials = []
        for i in range(len(utts)):
            for j in range(i + 1, len(utts)):
                label = 1 if utts[i].speaker == utts[j].speaker else 0
                trials.append(Trial(label=label, enroll=utts[i].uid, test=utts[j].uid))
        return trials
