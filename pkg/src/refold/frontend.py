"""Waveform handling and the log-mel filter bank frontend.

All pipeline entry points take mono 16 kHz audio. Features are 80
triangular mel filters (HTK scale, 20-7600 Hz) over a 25 ms / 10 ms
Hann-windowed power spectrum, natural log with a 1e-10 floor, then
per-utterance mean subtraction of every bin. No pre-emphasis, no
dither; frame count is floor((N - window) / hop) + 1 (no center pad).
"""

from __future__ import annotations

import wave
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError

SAMPLE_RATE = 16000
FRAME_LENGTH_MS = 25
FRAME_SHIFT_MS = 10
WINDOW_SAMPLES = SAMPLE_RATE * FRAME_LENGTH_MS // 1000  # 400
HOP_SAMPLES = SAMPLE_RATE * FRAME_SHIFT_MS // 1000  # 160
N_FFT = 512
MEL_LOW_HZ = 20.0
MEL_HIGH_HZ = 7600.0
LOG_FLOOR = 1e-10


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32).reshape(-1)
        if self.sample_rate != SAMPLE_RATE:
            raise ContractError(f"expected {SAMPLE_RATE} Hz audio, got {self.sample_rate}")

    @property
    def duration(self):
        return self.samples.size / self.sample_rate


@dataclass
class FeatureMap:
    """Log-mel features, values[F, T] with F mel bins and T frames."""

    values: np.ndarray
    frame_shift_ms: int = FRAME_SHIFT_MS
    frame_length_ms: int = FRAME_LENGTH_MS

    @property
    def n_mels(self):
        return self.values.shape[0]

    @property
    def n_frames(self):
        return self.values.shape[1]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels, n_fft=N_FFT, sample_rate=SAMPLE_RATE,
                   low_hz=MEL_LOW_HZ, high_hz=MEL_HIGH_HZ):
    """Triangular mel filters, [n_mels, n_fft//2 + 1], unnormalized peaks."""
    if n_mels < 1:
        raise ConfigError(f"n_mels must be positive, got {n_mels}")
    edges_mel = np.linspace(hz_to_mel(low_hz), hz_to_mel(high_hz), n_mels + 2)
    edges_hz = mel_to_hz(edges_mel)
    bin_hz = np.arange(n_fft // 2 + 1) * (sample_rate / n_fft)
    fb = np.zeros((n_mels, bin_hz.size), dtype=np.float64)
    for m in range(n_mels):
        left, center, right = edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]
        up = (bin_hz - left) / (center - left)
        down = (right - bin_hz) / (right - center)
        fb[m] = np.maximum(0.0, np.minimum(up, down))
    return fb.astype(np.float32)


def _frame(samples):
    n = samples.size
    if n < WINDOW_SAMPLES:
        raise ContractError(
            f"waveform of {n} samples is shorter than one {WINDOW_SAMPLES}-sample frame"
        )
    t = (n - WINDOW_SAMPLES) // HOP_SAMPLES + 1
    idx = np.arange(WINDOW_SAMPLES)[None, :] + HOP_SAMPLES * np.arange(t)[:, None]
    return samples[idx]


# periodic Hann: 0.5 - 0.5 cos(2 pi n / N)
_HANN = (0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(WINDOW_SAMPLES) / WINDOW_SAMPLES)).astype(np.float32)

_FB_CACHE: dict = {}


def log_mel_energies(w: Waveform, n_mels=80):
    """Un-normalized log-mel energies, [n_mels, T] float32."""
    frames = _frame(w.samples) * _HANN
    spec = np.fft.rfft(frames, n=N_FFT, axis=1)
    power = (spec.real**2 + spec.imag**2).astype(np.float32)
    if n_mels not in _FB_CACHE:
        _FB_CACHE[n_mels] = mel_filterbank(n_mels)
    mel = power @ _FB_CACHE[n_mels].T  # [T, n_mels]
    return np.log(np.maximum(mel, LOG_FLOOR)).T.astype(np.float32)


def fbank(w: Waveform, n_mels=80, normalize=True) -> FeatureMap:
    """Waveform -> mean-normalized log-mel FeatureMap."""
    values = log_mel_energies(w, n_mels=n_mels)
    if normalize:
        # float64 mean so a constant bin subtracts to exactly zero
        mean = values.mean(axis=1, keepdims=True, dtype=np.float64)
        values = (values - mean).astype(np.float32)
    return FeatureMap(values=values)


def crop_segment(w: Waveform, seconds: float, rng: np.random.Generator) -> Waveform:
    """Random fixed-length crop; short inputs are tiled (wrap padding)."""
    if seconds <= 0:
        raise ContractError(f"crop length must be positive, got {seconds}")
    if w.samples.size == 0:
        raise ContractError("cannot crop an empty waveform")
    target = int(round(seconds * w.sample_rate))
    s = w.samples
    if s.size < target:
        reps = -(-target // s.size)
        s = np.tile(s, reps)
    start = int(rng.integers(0, s.size - target + 1))
    return Waveform(s[start : start + target], w.sample_rate)


def pad_time_to_multiple(values: np.ndarray, multiple: int) -> np.ndarray:
    """Edge-replicate the last axis up to the next multiple of `multiple`."""
    if multiple < 1:
        raise ContractError(f"multiple must be >= 1, got {multiple}")
    t = values.shape[-1]
    if t == 0:
        raise ContractError("cannot pad an empty time axis")
    rem = t % multiple
    if rem == 0:
        return values
    pad = multiple - rem
    width = [(0, 0)] * (values.ndim - 1) + [(0, pad)]
    return np.pad(values, width, mode="edge")


# -- WAV file IO (mono 16-bit PCM) ------------------------------------


def read_wav(path) -> Waveform:
    with wave.open(str(path), "rb") as f:
        if f.getnchannels() != 1:
            raise ContractError(f"{path}: expected mono audio, got {f.getnchannels()} channels")
        if f.getsampwidth() != 2:
            raise ContractError(f"{path}: expected 16-bit PCM, got {8 * f.getsampwidth()}-bit")
        rate = f.getframerate()
        raw = f.readframes(f.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32768.0
    return Waveform(samples, rate)


def write_wav(path, w: Waveform):
    # scale matches read_wav's /32768 so round-trips stay within half an LSB
    pcm = np.clip(np.round(w.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(w.sample_rate)
        f.writeframes(pcm.tobytes())
