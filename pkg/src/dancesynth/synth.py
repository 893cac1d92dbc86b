"""Procedural beat-locked dataset: click-train audio paired with skeleton
sequences that pause on every beat, plus toy videos for stage 2.

The motion phase advances by exactly one per beat interval along a ramp
whose derivative vanishes at both ends, and every style is a period-one
function of that phase: the pose at each beat is identical, the phase is
locally inferable from the click pattern, and joint speed has a true
minimum on each beat, so the beat metrics have a known optimum.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .audio import AudioClip, TARGET_RATE, clip_features, save_feature_csv, save_wav
from .errors import ConfigurationError, InputError
from .graph import DEFAULT_JOINTS
from .skeleton import FPS, SkeletonSequence, save_skeleton_text

__all__ = ["SynthSpec", "synth_pair", "base_pose", "synth_dataset",
           "load_dataset", "synth_video", "synth_video_dataset",
           "load_video_dataset", "STYLES"]

STYLES = ("sway", "bounce", "spin")

_CLICK_FREQ = {"sway": 800.0, "bounce": 1200.0, "spin": 1600.0}


@dataclass
class SynthSpec:
    bpm: float = 120.0
    duration_s: float = 4.0
    style: str = "sway"
    seed: int = 0
    noise_level: float = 0.0

    def __post_init__(self):
        if not (60.0 <= self.bpm <= 180.0):
            raise InputError(f"bpm {self.bpm} outside [60, 180]")
        if self.duration_s < 1.0:
            raise InputError(f"duration {self.duration_s}s below 1s minimum")
        if self.style not in STYLES:
            raise InputError(f"unknown style {self.style!r}; pick from {STYLES}")


def base_pose(rng: np.random.Generator | None = None) -> np.ndarray:
    """Upright 15-joint figure in [0,1]^2, optionally jittered per sample."""
    pose = {
        "pelvis": (0.50, 0.45), "neck": (0.50, 0.65), "head": (0.50, 0.73),
        "l_shoulder": (0.42, 0.63), "l_elbow": (0.38, 0.52), "l_wrist": (0.36, 0.41),
        "r_shoulder": (0.58, 0.63), "r_elbow": (0.62, 0.52), "r_wrist": (0.64, 0.41),
        "l_hip": (0.46, 0.43), "l_knee": (0.45, 0.28), "l_ankle": (0.45, 0.13),
        "r_hip": (0.54, 0.43), "r_knee": (0.55, 0.28), "r_ankle": (0.55, 0.13),
    }
    arr = np.array([pose[j] for j in DEFAULT_JOINTS])
    if rng is not None:
        arr = arr + rng.uniform(-0.01, 0.01, size=arr.shape)
    return arr


def _beat_grid(spec: SynthSpec) -> np.ndarray:
    """Beat times in seconds, snapped to the 0.1 s frame grid.

    The first beat sits half an interval in and the last leaves a 0.2 s
    tail, so every beat pause is an interior event the kinematic detector
    can see (a pause at frame 0 or at the final frame has no neighbours).
    """
    frames_per_beat = 60.0 / spec.bpm * FPS
    first = np.round(0.5 * frames_per_beat)
    last = (spec.duration_s - 0.2) * FPS
    count = int(np.floor((last - first) / frames_per_beat)) + 1
    frames = np.round(first + np.arange(count) * frames_per_beat)
    return frames / FPS


def _ramp(u: np.ndarray) -> np.ndarray:
    """Monotone 0->1 ramp whose derivative (1-cos(2 pi u))^2 / 1.5 touches
    zero quartically at both ends: the pause around each beat stays deep
    relative to mid-interval motion even at 4-frame beat spacing."""
    return (1.5 * u - np.sin(2.0 * np.pi * u) / np.pi
            + np.sin(4.0 * np.pi * u) / (8.0 * np.pi)) / 1.5


def _phase(t: np.ndarray, beats: np.ndarray, interval: float) -> np.ndarray:
    """Piecewise-smooth phase that freezes (zero derivative) on each beat.

    The grid is extended one virtual interval before the first beat and
    after the last, so the clip starts and ends mid-swing: every real beat
    is a strict interior speed minimum, not a boundary plateau.
    """
    grid = np.concatenate([[beats[0] - interval], beats, [beats[-1] + interval]])
    k = np.clip(np.searchsorted(grid, t, side="right") - 1, 0, len(grid) - 2)
    span = grid[k + 1] - grid[k]
    u = np.clip((t - grid[k]) / span, 0.0, 1.0)
    return (k - 1) + _ramp(u)


# per-joint motion weights: upper body leads the sway, arms lead the bounce
_SWAY_W = np.array([0.2, 0.7, 1.0, 0.7, 0.8, 1.0, 0.7, 0.8, 1.0,
                    0.2, 0.1, 0.0, 0.2, 0.1, 0.0])
_BOUNCE_W = np.array([0.4, 0.5, 0.6, 0.6, 0.9, 1.2, 0.6, 0.9, 1.2,
                      0.4, 0.2, 0.0, 0.4, 0.2, 0.0])


def _animate(theta: np.ndarray, style: str, pose: np.ndarray,
             amp: float) -> np.ndarray:
    F = len(theta)
    coords = np.tile(pose, (F, 1, 1))
    # All oscillators have period one in theta, so the pose at every beat is
    # identical (the target never depends on the beat index, only on the
    # phase within the current interval).  Each style pairs two quadrature
    # components (cos/sin of 2*pi*theta), so joint speed vanishes only where
    # the phase derivative does -- exactly on beats, never mid-interval.
    c = np.cos(2.0 * np.pi * theta)[:, None]
    s = np.sin(2.0 * np.pi * theta)[:, None]
    if style == "sway":
        coords[:, :, 0] += amp * c * _SWAY_W[None, :]
        coords[:, :, 1] += 0.5 * amp * s * _SWAY_W[None, :]
    elif style == "bounce":
        coords[:, :, 1] += amp * (0.5 - 0.5 * c) * _BOUNCE_W[None, :]
        coords[:, :, 0] += 0.5 * amp * s * _BOUNCE_W[None, :]
    else:  # spin: rigid rotation about the pelvis plus a lateral drift
        angle = 2.0 * amp * np.pi * s[:, 0]
        rot_c, rot_s = np.cos(angle), np.sin(angle)
        rel = coords - pose[0]
        x = rot_c[:, None] * rel[:, :, 0] - rot_s[:, None] * rel[:, :, 1]
        y = rot_s[:, None] * rel[:, :, 0] + rot_c[:, None] * rel[:, :, 1]
        coords = np.stack([x, y], axis=-1) + pose[0]
        coords[:, :, 0] += 0.5 * amp * (1.0 - c)
    return coords


def _click_train(beats: np.ndarray, duration: float, style: str,
                 rng: np.random.Generator, noise_level: float) -> AudioClip:
    n = int(round(duration * TARGET_RATE))
    samples = np.zeros(n)
    burst_n = int(0.02 * TARGET_RATE)
    t = np.arange(burst_n) / TARGET_RATE
    burst = np.sin(2.0 * np.pi * _CLICK_FREQ[style] * t) * np.exp(-t / 0.005)
    for b in beats:
        i = int(round(b * TARGET_RATE))
        j = min(i + burst_n, n)
        samples[i:j] += burst[:j - i]
    samples += 0.002 * (1.0 + noise_level) * rng.standard_normal(n)
    peak = np.abs(samples).max()
    if peak > 0.9:
        samples *= 0.9 / peak
    return AudioClip(samples=samples, rate=TARGET_RATE)


def synth_pair(spec: SynthSpec) -> tuple[AudioClip, SkeletonSequence, np.ndarray]:
    """(click-train audio, beat-locked skeleton, ground-truth beat times)."""
    rng = np.random.default_rng(spec.seed)
    beats = _beat_grid(spec)
    interval = 60.0 / spec.bpm
    F = int(np.floor(spec.duration_s * FPS))
    t = np.arange(F) / FPS
    theta = _phase(t, beats, interval)
    pose = base_pose(rng)
    amp = 0.07 + 0.02 * rng.uniform()
    coords = _animate(theta, spec.style, pose, amp)
    if spec.noise_level > 0:
        coords = coords + spec.noise_level * rng.standard_normal(coords.shape) * 0.01
    coords = np.clip(coords, 0.0, 1.0)
    clip = _click_train(beats, spec.duration_s, spec.style, rng, spec.noise_level)
    return clip, SkeletonSequence(coords), beats


# -- dataset on disk ----------------------------------------------------------


def _spec_for_index(base: SynthSpec, i: int, rng: np.random.Generator,
                    fixed_bpm: bool = False) -> SynthSpec:
    return SynthSpec(
        bpm=base.bpm if fixed_bpm else float(rng.choice([80.0, 100.0, 120.0])),
        duration_s=base.duration_s,
        style=STYLES[i % len(STYLES)],
        seed=int(rng.integers(0, 2 ** 31)),
        noise_level=base.noise_level,
    )


def synth_dataset(root, count: int = 64, seed: int = 0,
                  base: SynthSpec | None = None, train_frac: float = 0.8,
                  write_audio: bool = True, fixed_bpm: bool = False) -> Path:
    """Write `count` paired samples under `root` with an 80/20 split.

    Seeds are drawn once per sample, so no seed appears in both splits.
    """
    root = Path(root)
    base = base or SynthSpec()
    rng = np.random.default_rng(seed)
    (root / "samples").mkdir(parents=True, exist_ok=True)
    n_train = int(round(count * train_frac))
    index_lines = ["id,split,bpm,style,seed,duration_s,noise_level,F"]
    for i in range(count):
        spec = _spec_for_index(base, i, rng, fixed_bpm)
        clip, seq, beats = synth_pair(spec)
        sid = f"s{i:04d}"
        d = root / "samples" / sid
        d.mkdir(exist_ok=True)
        if write_audio:
            save_wav(d / "audio.wav", clip)
        save_feature_csv(d / "features.csv", clip_features(clip))
        save_skeleton_text(d / "skeleton.txt", seq)
        np.savetxt(d / "beats.txt", beats, fmt="%.17g")
        split = "train" if i < n_train else "test"
        index_lines.append(
            f"{sid},{split},{spec.bpm},{spec.style},{spec.seed},"
            f"{spec.duration_s},{spec.noise_level},{seq.F}")
    (root / "index.csv").write_text("\n".join(index_lines) + "\n")
    return root


@dataclass
class DatasetSample:
    sid: str
    split: str
    spec: SynthSpec
    features: np.ndarray
    skeleton: SkeletonSequence
    beats: np.ndarray
    path: Path


def load_dataset(root, split: str | None = None) -> list[DatasetSample]:
    from .audio import load_feature_csv
    from .skeleton import load_skeleton_text
    root = Path(root)
    index = (root / "index.csv").read_text().strip().splitlines()
    samples = []
    for line in index[1:]:
        sid, sp, bpm, style, seedv, dur, noise, F = line.split(",")
        if split and sp != split:
            continue
        d = root / "samples" / sid
        spec = SynthSpec(bpm=float(bpm), duration_s=float(dur), style=style,
                         seed=int(seedv), noise_level=float(noise))
        samples.append(DatasetSample(
            sid=sid, split=sp, spec=spec,
            features=load_feature_csv(d / "features.csv"),
            skeleton=load_skeleton_text(d / "skeleton.txt"),
            beats=np.loadtxt(d / "beats.txt", ndmin=1),
            path=d,
        ))
    if not samples:
        raise InputError(f"no samples found under {root} (split={split!r})")
    return samples

# -- toy videos -----------------------------------------------------------------

_SPRITE_COLORS = np.array([
    [0.95, 0.35, 0.30],   # trunk/head channel
    [0.30, 0.90, 0.35],   # arms channel
    [0.30, 0.40, 0.95],   # legs channel
])


def synth_video(S: SkeletonSequence, seed: int, size: int = 32):
    """Ground-truth toy video: the skeleton's limb-map sprite composited
    over a seeded textured background.  Frame i is a pure function of
    (frame i's pose, seed); the conditional image is frame 0."""
    from .video import VideoClip, render_maps
    rng = np.random.default_rng(seed)
    coarse = rng.uniform(0.2, 0.8, size=(size // 4, size // 4, 3))
    bg = np.repeat(np.repeat(coarse, 4, axis=0), 4, axis=1)
    maps = render_maps(S, H=size, W=size)
    frames = []
    for m in maps:
        alpha = m.max(axis=-1, keepdims=True)
        frames.append(np.clip(bg * (1.0 - alpha) + m @ _SPRITE_COLORS, 0.0, 1.0))
    return VideoClip(conditional=frames[0].copy(), frames=frames, skeleton=S)


def synth_video_dataset(root, count: int = 32, seed: int = 0,
                        duration_s: float = 1.0, size: int = 32,
                        train_frac: float = 0.75) -> Path:
    """Write `count` toy video clips under `root` with a train/test split."""
    from .video import save_video_dir
    root = Path(root)
    base = SynthSpec(duration_s=duration_s)
    rng = np.random.default_rng(seed)
    (root / "clips").mkdir(parents=True, exist_ok=True)
    n_train = int(round(count * train_frac))
    index_lines = ["id,split,bpm,style,seed,F"]
    for i in range(count):
        spec = _spec_for_index(base, i, rng)
        _, skel, _ = synth_pair(spec)
        clip = synth_video(skel, seed=spec.seed, size=size)
        cid = f"v{i:04d}"
        save_video_dir(root / "clips" / cid, clip)
        split = "train" if i < n_train else "test"
        index_lines.append(f"{cid},{split},{spec.bpm},{spec.style},{spec.seed},{skel.F}")
    (root / "index.csv").write_text("\n".join(index_lines) + "\n")
    return root


def load_video_dataset(root, split: str | None = None) -> list:
    from .video import load_video_dir
    root = Path(root)
    index = (root / "index.csv").read_text().strip().splitlines()
    clips = []
    for line in index[1:]:
        cid, sp = line.split(",")[:2]
        if split and sp != split:
            continue
        clips.append(load_video_dir(root / "clips" / cid))
    if not clips:
        raise InputError(f"no video clips found under {root} (split={split!r})")
    return clips
