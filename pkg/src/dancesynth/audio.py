"""Audio ingestion and handcrafted per-piece features.

Music is cut into non-overlapping 0.1 s pieces (one per 10 fps video
frame).  Each piece yields a 19-dim vector: 16 log filterbank energies,
RMS, spectral centroid, and positive spectral flux against the previous
piece (0 for the first).
"""

from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np

from .errors import InputError

__all__ = [
    "AudioClip",
    "PIECE_SECONDS",
    "TARGET_RATE",
    "FEATURE_DIM",
    "N_BANDS",
    "load_wav",
    "save_wav",
    "resample_linear",
    "slice_audio",
    "piece_features",
    "clip_features",
    "load_feature_csv",
    "save_feature_csv",
]

PIECE_SECONDS = 0.1
TARGET_RATE = 16000
N_BANDS = 16
FEATURE_DIM = N_BANDS + 3
_LOG_FLOOR = 1e-10


@dataclass
class AudioClip:
    samples: np.ndarray  # mono float64
    rate: int

    @property
    def duration(self) -> float:
        return len(self.samples) / self.rate


def load_wav(path) -> AudioClip:
    with wave.open(str(path), "rb") as wf:
        n = wf.getnframes()
        width = wf.getsampwidth()
        channels = wf.getnchannels()
        rate = wf.getframerate()
        raw = wf.readframes(n)
    if width == 2:
        data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif width == 4:
        data = np.frombuffer(raw, dtype="<i4").astype(np.float64) / 2147483648.0
    elif width == 1:
        data = (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    else:
        raise InputError(f"unsupported WAV sample width: {width}")
    if channels > 1:
        data = data.reshape(-1, channels).mean(axis=1)
    return AudioClip(samples=data, rate=rate)


def save_wav(path, clip: AudioClip) -> None:
    pcm = np.clip(clip.samples, -1.0, 1.0)
    pcm = (pcm * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(clip.rate)
        wf.writeframes(pcm.tobytes())


def resample_linear(clip: AudioClip, rate: int = TARGET_RATE) -> AudioClip:
    if clip.rate == rate:
        return clip
    n_out = int(round(len(clip.samples) * rate / clip.rate))
    t_out = np.arange(n_out) * (clip.rate / rate)
    out = np.interp(t_out, np.arange(len(clip.samples)), clip.samples)
    return AudioClip(samples=out, rate=rate)


def slice_audio(clip: AudioClip) -> list[np.ndarray]:
    """Non-overlapping 0.1 s windows; the trailing remainder is dropped."""
    if clip.duration < PIECE_SECONDS:
        raise InputError(f"clip of {clip.duration:.3f}s is shorter than one 0.1s piece")
    step = int(round(clip.rate * PIECE_SECONDS))
    n_pieces = len(clip.samples) // step
    return [clip.samples[i * step:(i + 1) * step] for i in range(n_pieces)]


def _mel(f):
    return 2595.0 * np.log10(1.0 + f / 700.0)


def _mel_inv(m):
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


def _filterbank(n_fft: int, rate: float) -> np.ndarray:
    """Triangular bands, mel-spaced from 0 to Nyquist.  (N_BANDS, n_bins)."""
    n_bins = n_fft // 2 + 1
    freqs = np.arange(n_bins) * rate / n_fft
    pts = _mel_inv(np.linspace(_mel(0.0), _mel(rate / 2.0), N_BANDS + 2))
    bank = np.zeros((N_BANDS, n_bins))
    for b in range(N_BANDS):
        lo, mid, hi = pts[b], pts[b + 1], pts[b + 2]
        up = (freqs - lo) / max(mid - lo, 1e-9)
        down = (hi - freqs) / max(hi - mid, 1e-9)
        bank[b] = np.clip(np.minimum(up, down), 0.0, None)
    return bank


def _piece_spectrum(piece: np.ndarray) -> np.ndarray:
    n_fft = 1 << int(np.ceil(np.log2(len(piece))))
    win = np.hanning(len(piece))
    return np.abs(np.fft.rfft(piece * win, n=n_fft))


def piece_features(piece: np.ndarray, rate: float = TARGET_RATE,
                   prev_spectrum: np.ndarray | None = None) -> np.ndarray:
    """19-dim feature vector for one piece; flux needs the previous piece's
    spectrum (None for the first piece -> onset strength 0)."""
    if len(piece) < 2:
        raise InputError("piece must hold at least 2 samples")
    mag = _piece_spectrum(piece)
    n_fft = 2 * (len(mag) - 1)
    bank = _filterbank(n_fft, rate)
    energies = np.log(bank @ (mag ** 2) + _LOG_FLOOR)
    rms = float(np.sqrt(np.mean(piece ** 2)))
    total = mag.sum()
    if total > 0:
        freqs = np.arange(len(mag)) * rate / n_fft
        centroid = float((freqs * mag).sum() / total / (rate / 2.0))
    else:
        centroid = 0.0
    if prev_spectrum is None:
        onset = 0.0
    else:
        onset = float(np.clip(mag - prev_spectrum, 0.0, None).sum() / len(mag))
    return np.concatenate([energies, [rms, centroid, onset]])


def clip_features(clip: AudioClip) -> np.ndarray:
    """F x 19 feature matrix after resampling to 16 kHz; one sequential
    pass so the flux term sees its predecessor."""
    clip = resample_linear(clip)
    pieces = slice_audio(clip)
    rows = []
    prev = None
    for piece in pieces:
        rows.append(piece_features(piece, clip.rate, prev))
        prev = _piece_spectrum(piece)
    return np.stack(rows)


def save_feature_csv(path, feats: np.ndarray) -> None:
    np.savetxt(path, feats, delimiter=",", fmt="%.17g")


def load_feature_csv(path) -> np.ndarray:
    feats = np.loadtxt(path, delimiter=",", ndmin=2)
    if feats.shape[1] != FEATURE_DIM:
        raise InputError(f"feature file must have {FEATURE_DIM} columns, got {feats.shape[1]}")
    return feats
