"""Stage-1 evaluation suite: Fréchet distances over pose/velocity feature
statistics, pairwise diversity, and beat alignment scores."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import DimensionError, InputError
from .skeleton import SkeletonSequence

__all__ = [
    "GaussianStats",
    "MetricReport",
    "gaussian_stats",
    "frechet_distance",
    "pose_features",
    "velocity_features",
    "pvar",
    "music_beats",
    "motion_beats",
    "beat_scores",
    "evaluate_sets",
]

BEAT_SIGMA_S = 0.1          # kernel width, one 0.1 s slice
MUSIC_BEAT_MIN_SEP_S = 0.3
MOTION_BEAT_MIN_SEP = 3     # frames


@dataclass
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        if self.cov.shape != (self.mean.size, self.mean.size):
            raise DimensionError("covariance shape must match mean dimension")


@dataclass
class MetricReport:
    pfd: float | None = None
    vfd: float | None = None
    pvar: float | None = None
    bc: float | None = None
    beat_coverage: float | None = None
    beat_hit_rate: float | None = None

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name}={'' if v is None else repr(float(v))}")
        return "\n".join(lines) + "\n"

    def to_csv_row(self) -> str:
        vals = [getattr(self, f.name) for f in fields(self)]
        return ",".join("" if v is None else repr(float(v)) for v in vals)

    @staticmethod
    def csv_header() -> str:
        return ",".join(f.name for f in fields(MetricReport))


def gaussian_stats(vectors: np.ndarray) -> GaussianStats:
    """Mean/covariance over rows; fixed summation order for determinism."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2:
        raise DimensionError("gaussian_stats expects an (n, d) matrix")
    mu = vectors.mean(axis=0)
    centered = vectors - mu
    cov = centered.T @ centered / max(len(vectors) - 1, 1)
    cov = 0.5 * (cov + cov.T)
    return GaussianStats(mu, cov)


def _clip_spectrum(vals: np.ndarray) -> np.ndarray:
    """Zero out eigenvalues below the numerical-rank threshold: the square
    root would otherwise amplify O(eps * lambda_max) noise eigenvalues of a
    rank-deficient matrix into O(sqrt(eps)) contributions."""
    tol = max(float(vals.max(initial=0.0)), 0.0) * vals.size * np.finfo(float).eps
    return np.where(vals > tol, vals, 0.0)


def _psd_sqrt_trace(m: np.ndarray) -> float:
    vals = np.linalg.eigvalsh(0.5 * (m + m.T))
    return float(np.sqrt(_clip_spectrum(vals)).sum())


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2}), with the cross
    term computed as Tr sqrt(Sa^{1/2} Sb Sa^{1/2}) via symmetric
    eigendecomposition (negative eigenvalues clipped at 0)."""
    if a.mean.shape != b.mean.shape:
        raise DimensionError("Fréchet stats have mismatched dimensions")
    diff = float(((a.mean - b.mean) ** 2).sum())
    vals, vecs = np.linalg.eigh(a.cov)
    root_a = (vecs * np.sqrt(_clip_spectrum(vals))) @ vecs.T
    cross = _psd_sqrt_trace(root_a @ b.cov @ root_a)
    return diff + float(np.trace(a.cov) + np.trace(b.cov)) - 2.0 * cross


def _bone_lengths(coords: np.ndarray, edges) -> np.ndarray:
    d = coords[:, [i for i, _ in edges]] - coords[:, [j for _, j in edges]]
    return np.sqrt((d ** 2).sum(axis=-1))  # (F, E)


_DEFAULT_EDGES = None


def _edges_for(seq: SkeletonSequence):
    from .graph import DEFAULT_EDGES, default_skeleton
    if seq.V == 15:
        return DEFAULT_EDGES
    # chain fallback for non-default joint counts
    return [(i, i + 1) for i in range(seq.V - 1)]


def pose_features(seq: SkeletonSequence) -> np.ndarray:
    """Per-joint mean position and position variance plus mean bone lengths."""
    c = seq.coords
    mean_pos = c.mean(axis=0).reshape(-1)
    var_pos = c.var(axis=0).reshape(-1)
    bones = _bone_lengths(c, _edges_for(seq)).mean(axis=0)
    return np.concatenate([mean_pos, var_pos, bones])


def velocity_features(seq: SkeletonSequence) -> np.ndarray:
    """Per-joint mean speed and speed variance of frame differences."""
    if seq.F < 2:
        raise InputError("velocity features need at least 2 frames")
    d = np.diff(seq.coords, axis=0)
    speed = np.sqrt((d ** 2).sum(axis=-1))  # (F-1, V)
    return np.concatenate([speed.mean(axis=0), speed.var(axis=0)])


def pvar(samples: list[SkeletonSequence]) -> float:
    """Mean over unordered pairs of mean absolute coordinate distance."""
    if len(samples) < 2:
        raise InputError("pvar needs at least 2 samples")
    total = 0.0
    count = 0
    for i in range(len(samples)):
        for j in range(i + 1, len(samples)):
            if samples[i].coords.shape != samples[j].coords.shape:
                raise DimensionError("pvar samples must share shape")
            total += float(np.abs(samples[i].coords - samples[j].coords).mean())
            count += 1
    return total / count


def _peaks(track: np.ndarray, threshold: float, min_sep: int,
           minima: bool = False) -> np.ndarray:
    """Interior local extrema past a threshold, greedily thinned by
    extremity, then min-separation enforced.  Minima tolerate flat
    plateaus (a pause sampled twice) by taking the plateau start; maxima
    are strict, so a constant track yields no extrema either way."""
    t = -track if minima else track
    thr = -threshold if minima else threshold
    if minima:
        cand = [i for i in range(1, len(t) - 1)
                if t[i] > t[i - 1] and t[i] >= t[i + 1] and t[i] > thr]
    else:
        cand = [i for i in range(1, len(t) - 1)
                if t[i] > t[i - 1] and t[i] > t[i + 1] and t[i] > thr]
    cand.sort(key=lambda i: -t[i])
    chosen: list[int] = []
    for i in cand:
        if all(abs(i - j) >= min_sep for j in chosen):
            chosen.append(i)
    return np.array(sorted(chosen), dtype=np.intp)


def music_beats(onset_track: np.ndarray, fps: float = 10.0) -> np.ndarray:
    """Beat times (s): onset-strength maxima above mean + 1 std with 0.3 s
    minimum separation.  The track is one onset value per 0.1 s piece."""
    onset_track = np.asarray(onset_track, dtype=np.float64)
    if onset_track.size == 0:
        raise InputError("empty onset track")
    thr = onset_track.mean() + onset_track.std()
    min_sep = max(int(round(MUSIC_BEAT_MIN_SEP_S * fps)), 1)
    idx = _peaks(onset_track, thr, min_sep)
    return idx / fps


def motion_beats(seq: SkeletonSequence) -> np.ndarray:
    """Beat frames: kinematic pauses, 3-frame minimum separation.

    A frame is paused when *both* the step into it and the step out of it
    are small -- stillness is the larger of the two, and pauses are local
    stillness minima below a quarter of the median step.  Requiring both
    steps keeps shuffled or jittery sequences honest: a shuffle easily
    places two near-identical frames next to each other (one low step),
    but almost never three in a row.
    """
    if seq.F < 3:
        return np.array([], dtype=np.intp)
    d = np.diff(seq.coords, axis=0)
    speed = np.sqrt((d ** 2).sum(axis=-1)).sum(axis=-1)  # (F-1,)
    still = np.maximum(speed[:-1], speed[1:])            # (F-2,) frame i+1
    thr = 0.25 * float(np.median(speed))
    return _peaks(still, thr, MOTION_BEAT_MIN_SEP, minima=True) + 1


def beat_scores(music_beat_times: np.ndarray, motion_beat_frames: np.ndarray,
                fps: float = 10.0) -> tuple[float | None, float, float | None]:
    """(coverage, hit_rate, bc).

    coverage = |motion| / |music| capped at 1; hit_rate = fraction of motion
    beats within +-1 frame of a music beat (0 if no motion beats); bc = mean
    over music beats of exp(-d^2 / (2 sigma^2)) with d the gap in seconds to
    the nearest motion beat (0 if there are none).  With no music beats,
    coverage and bc are undefined (None).
    """
    music_beat_times = np.asarray(music_beat_times, dtype=np.float64)
    motion_times = np.asarray(motion_beat_frames, dtype=np.float64) / fps
    if music_beat_times.size == 0:
        hit = 0.0
        if motion_times.size:
            hit = 0.0
        return None, hit, None
    coverage = min(motion_times.size / music_beat_times.size, 1.0)
    if motion_times.size == 0:
        return coverage, 0.0, 0.0
    frame = 1.0 / fps
    hits = sum(1 for t in motion_times
               if np.min(np.abs(music_beat_times - t)) <= frame + 1e-9)
    hit_rate = hits / motion_times.size
    d = np.array([np.min(np.abs(motion_times - t)) for t in music_beat_times])
    bc = float(np.exp(-d ** 2 / (2.0 * BEAT_SIGMA_S ** 2)).mean())
    return coverage, hit_rate, bc


def evaluate_sets(generated: list[SkeletonSequence],
                  reference: list[SkeletonSequence]) -> MetricReport:
    """Distribution metrics of a generated set against a reference set."""
    if not generated or not reference:
        raise InputError("evaluation needs nonempty sample sets")
    gp = gaussian_stats(np.stack([pose_features(s) for s in generated]))
    rp = gaussian_stats(np.stack([pose_features(s) for s in reference]))
    gv = gaussian_stats(np.stack([velocity_features(s) for s in generated]))
    rv = gaussian_stats(np.stack([velocity_features(s) for s in reference]))
    report = MetricReport(pfd=frechet_distance(gp, rp),
                          vfd=frechet_distance(gv, rv))
    if len(generated) >= 2 and len({s.coords.shape for s in generated}) == 1:
        report.pvar = pvar(generated)
    return report
