"""Skeleton-to-video at toy scale: a convolutional frame generator
conditioned on a rendered skeleton map, trained with an L1 + least-squares
adversarial objective and two optional self-consistency regularizers.

Per clip the generator first produces every frame from the conditional
image alone (the baseline pass).  The forward regularizer then re-generates
frame i from baseline frame i-1, the backward one from baseline frame i+1,
and both re-generations are pulled toward the baseline frames with L1
penalties.  At inference only the baseline pass runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensor as T
from .tensor import ConfigurationError, DimensionError, ParamStore, Tensor
from .errors import InputError
from .graph import GraphSpec, default_skeleton
from .ops import conv2d, upsample_nearest
from .optim import Adam
from .skeleton import SkeletonSequence, load_skeleton_text, save_skeleton_text

__all__ = [
    "FRAME_SIZE",
    "VideoClip",
    "render_skeleton_map",
    "render_maps",
    "ToyGenerator",
    "PatchDiscriminator",
    "baseline_generate",
    "forward_generate",
    "backward_generate",
    "fsr_loss",
    "bsr_loss",
    "LossWeights2",
    "stage2_loss",
    "Stage2Result",
    "train_stage2",
    "infer_video",
    "flicker",
    "static_background_mask",
    "frame_mae",
    "save_ppm",
    "load_ppm",
    "save_video_dir",
    "load_video_dir",
]

FRAME_SIZE = 32          # toy default: square H = W = 32, 3 channels
_LINE_HALFWIDTH = 1.0    # in pixels, before anti-aliasing falloff


@dataclass
class VideoClip:
    """A conditional image plus F generated-or-real frames and the skeleton
    that drives them."""

    conditional: np.ndarray          # (H, W, 3) in [0, 1]
    frames: list                     # F arrays (H, W, 3) in [0, 1]
    skeleton: SkeletonSequence

    def __post_init__(self):
        self.conditional = np.asarray(self.conditional, dtype=np.float64)
        if self.conditional.ndim != 3 or self.conditional.shape[-1] != 3:
            raise DimensionError(
                f"conditional must be (H, W, 3), got {self.conditional.shape}")
        self.frames = [np.asarray(f, dtype=np.float64) for f in self.frames]
        if len(self.frames) != self.skeleton.F:
            raise DimensionError(
                f"{len(self.frames)} frames vs skeleton F={self.skeleton.F}")
        for f in self.frames:
            if f.shape != self.conditional.shape:
                raise DimensionError("all frames must match the conditional shape")

    @property
    def F(self) -> int:
        return len(self.frames)

    def stacked(self) -> np.ndarray:
        return np.stack(self.frames)


# -- skeleton rendering ---------------------------------------------------------


def _edge_group(g: GraphSpec, edge: tuple, index: int) -> int:
    """Limb-group channel for an edge: trunk/arms/legs on the default body,
    round-robin otherwise."""
    i, j = edge
    if g.V == 15:
        if max(i, j) <= 2:
            return 0
        if max(i, j) <= 8:
            return 1
        return 2
    return index % 3


def render_skeleton_map(coords: np.ndarray, g: GraphSpec | None = None,
                        H: int = FRAME_SIZE, W: int = FRAME_SIZE) -> np.ndarray:
    """One skeleton frame -> (H, W, 3) anti-aliased limb-group map.

    coords: (V, 2) in [0, 1]^2 (clipped if outside); x maps to columns,
    y to rows with y=1 at the top row.  Each edge draws a line segment
    into its group's channel with a one-pixel linear falloff; overlapping
    segments combine by maximum, so intensities stay in [0, 1].
    """
    g = g if g is not None else default_skeleton()
    coords = np.clip(np.asarray(coords, dtype=np.float64), 0.0, 1.0)
    if coords.shape != (g.V, 2):
        raise DimensionError(f"coords shape {coords.shape} vs graph ({g.V}, 2)")
    px = (np.arange(W) + 0.5) / W
    py = 1.0 - (np.arange(H) + 0.5) / H
    P = np.stack(np.broadcast_arrays(px[None, :], py[:, None]), axis=-1)  # (H,W,2)
    out = np.zeros((H, W, 3))
    halfwidth = _LINE_HALFWIDTH / H
    for idx, (i, j) in enumerate(g.edges):
        a, b = coords[i], coords[j]
        ab = b - a
        denom = float(ab @ ab)
        if denom == 0.0:
            d = np.sqrt(((P - a) ** 2).sum(axis=-1))
        else:
            t = np.clip(((P - a) @ ab) / denom, 0.0, 1.0)
            nearest = a + t[..., None] * ab
            d = np.sqrt(((P - nearest) ** 2).sum(axis=-1))
        intensity = np.clip(1.0 - d / halfwidth, 0.0, 1.0)
        ch = _edge_group(g, (i, j), idx)
        out[:, :, ch] = np.maximum(out[:, :, ch], intensity)
    return out


def render_maps(S: SkeletonSequence, g: GraphSpec | None = None,
                H: int = FRAME_SIZE, W: int = FRAME_SIZE) -> np.ndarray:
    """All F frames -> (F, H, W, 3)."""
    return np.stack([render_skeleton_map(S.coords[i], g, H, W)
                     for i in range(S.F)])


# -- networks -------------------------------------------------------------------


class ToyGenerator:
    """3-down/3-up convolutional encoder-decoder mapping
    concat(conditional image, skeleton map) -> frame, sigmoid output."""

    WIDTHS = (16, 32, 64)
    IN_CHANNELS = 6

    def __init__(self, size: int = FRAME_SIZE, seed: int = 0,
                 store: ParamStore | None = None):
        if size % (2 ** len(self.WIDTHS)) != 0:
            raise ConfigurationError(
                f"frame size {size} must be divisible by {2 ** len(self.WIDTHS)}")
        self.size = size
        if store is None:
            self.store = ParamStore()
            rng = np.random.default_rng(seed)
            c = self.IN_CHANNELS
            for i, w in enumerate(self.WIDTHS):
                self._add_conv(f"down{i}", c, w, rng)
                c = w
            ups = list(self.WIDTHS[-2::-1]) + [3]
            for i, w in enumerate(ups):
                self._add_conv(f"up{i}", c, w, rng)
                c = w
        else:
            self.store = store

    def _add_conv(self, name: str, c_in: int, c_out: int,
                  rng: np.random.Generator) -> None:
        s = 1.0 / np.sqrt(9 * c_in)
        self.store.add(f"{name}.k", rng.uniform(-s, s, size=(3, 3, c_in, c_out)))
        self.store.add(f"{name}.b", np.zeros(c_out))

    def forward(self, image: Tensor, smap: Tensor) -> Tensor:
        """image, smap: (..., H, W, 3) -> (..., H, W, 3) in (0, 1)."""
        x = T.concat([T._wrap(image), T._wrap(smap)], axis=-1)
        if x.shape[-3] != self.size or x.shape[-2] != self.size:
            raise DimensionError(
                f"generator expects {self.size}x{self.size} frames, got "
                f"{x.shape[-3]}x{x.shape[-2]}")
        for i in range(len(self.WIDTHS)):
            x = T.silu(conv2d(x, self.store[f"down{i}.k"], stride=2, pad=1)
                       + self.store[f"down{i}.b"])
        n_up = len(self.WIDTHS)
        for i in range(n_up):
            x = upsample_nearest(x)
            x = conv2d(x, self.store[f"up{i}.k"], pad=1) + self.store[f"up{i}.b"]
            x = T.sigmoid(x) if i == n_up - 1 else T.silu(x)
        return x


class PatchDiscriminator:
    """Small least-squares patch classifier over single frames."""

    def __init__(self, seed: int = 0, store: ParamStore | None = None):
        if store is None:
            self.store = ParamStore()
            rng = np.random.default_rng(seed)
            for name, c_in, c_out in (("c0", 3, 16), ("c1", 16, 32), ("c2", 32, 1)):
                s = 1.0 / np.sqrt(9 * c_in)
                self.store.add(f"{name}.k", rng.uniform(-s, s, size=(3, 3, c_in, c_out)))
                self.store.add(f"{name}.b", np.zeros(c_out))
        else:
            self.store = store

    def logits(self, frames: Tensor) -> Tensor:
        """(..., H, W, 3) -> (..., H/4, W/4, 1) patch logits."""
        x = T.silu(conv2d(frames, self.store["c0.k"], stride=2, pad=1)
                   + self.store["c0.b"])
        x = T.silu(conv2d(x, self.store["c1.k"], stride=2, pad=1)
                   + self.store["c1.b"])
        return conv2d(x, self.store["c2.k"], pad=1) + self.store["c2.b"]


# -- generation strategies ------------------------------------------------------


def _tile_conditional(I0: np.ndarray, F: int) -> Tensor:
    return Tensor(np.broadcast_to(I0, (F,) + I0.shape).copy())


def baseline_generate(G: ToyGenerator, I0: np.ndarray, S: SkeletonSequence,
                      maps: np.ndarray | None = None) -> Tensor:
    """Frames 1..F, each generated independently from the conditional image
    and the frame's skeleton map; returns a (F, H, W, 3) tensor."""
    if maps is None:
        maps = render_maps(S, H=G.size, W=G.size)
    return G.forward(_tile_conditional(I0, S.F), Tensor(maps))


def forward_generate(G: ToyGenerator, baseline: Tensor, maps: np.ndarray,
                     chained: bool = False) -> Tensor:
    """Frames 2..F regenerated from the preceding frame: baseline frame i-1
    by default, or the previous regenerated frame when `chained`."""
    F = baseline.shape[0]
    if F < 2:
        raise InputError("forward regeneration needs F >= 2 frames")
    if not chained:
        cond = T.take(baseline, np.arange(F - 1))
        return G.forward(cond, Tensor(maps[1:]))
    frames = []
    cond = T.take(baseline, np.arange(1))
    for i in range(1, F):
        out = G.forward(cond, Tensor(maps[i:i + 1]))
        frames.append(out)
        cond = out
    return T.concat(frames, axis=0)


def backward_generate(G: ToyGenerator, baseline: Tensor,
                      maps: np.ndarray) -> Tensor:
    """Frames 1..F-1 regenerated from the baseline frame that follows each."""
    F = baseline.shape[0]
    if F < 2:
        raise InputError("backward regeneration needs F >= 2 frames")
    cond = T.take(baseline, np.arange(1, F))
    return G.forward(cond, Tensor(maps[:-1]))


def fsr_loss(baseline: Tensor, forward_frames: Tensor) -> Tensor:
    """Mean L1 between baseline frames 2..F and their forward regenerations."""
    F = baseline.shape[0]
    if forward_frames.shape[0] != F - 1:
        raise DimensionError(
            f"forward pass must cover exactly F-1={F - 1} frames, "
            f"got {forward_frames.shape[0]}")
    return T.absolute(T.take(baseline, np.arange(1, F)) - forward_frames).mean()


def bsr_loss(baseline: Tensor, backward_frames: Tensor) -> Tensor:
    """Mean L1 between baseline frames 1..F-1 and their backward regenerations."""
    F = baseline.shape[0]
    if backward_frames.shape[0] != F - 1:
        raise DimensionError(
            f"backward pass must cover exactly F-1={F - 1} frames, "
            f"got {backward_frames.shape[0]}")
    return T.absolute(T.take(baseline, np.arange(F - 1)) - backward_frames).mean()


# -- objective and training -----------------------------------------------------


@dataclass
class LossWeights2:
    lambda_gan: float = 1.0
    lambda_l1: float = 10.0

    def __post_init__(self):
        if min(self.lambda_gan, self.lambda_l1) < 0:
            raise ConfigurationError("loss weights must be nonnegative")


def stage2_loss(G: ToyGenerator, D: PatchDiscriminator, I0: np.ndarray,
                maps: np.ndarray, real: np.ndarray, S: SkeletonSequence,
                w: LossWeights2, use_fsr: bool = False,
                use_bsr: bool = False) -> tuple[Tensor, Tensor, dict]:
    """One clip's generator objective:

        total = lambda_gan * Lgan + lambda_l1 * (Ll1 + Lfsr + Lbsr)

    Returns (total, baseline frames, component values); disabled
    regularizers contribute exactly 0.
    """
    baseline = baseline_generate(G, I0, S, maps)
    l1 = T.absolute(baseline - Tensor(real)).mean()
    gan = ((D.logits(baseline) - 1.0) ** 2.0).mean()
    comps = {"Lgan": gan.item(), "Ll1": l1.item(), "Lfsr": 0.0, "Lbsr": 0.0}
    reg = l1
    if use_fsr:
        lf = fsr_loss(baseline, forward_generate(G, baseline, maps))
        comps["Lfsr"] = lf.item()
        reg = reg + lf
    if use_bsr:
        lb = bsr_loss(baseline, backward_generate(G, baseline, maps))
        comps["Lbsr"] = lb.item()
        reg = reg + lb
    total = w.lambda_gan * gan + w.lambda_l1 * reg
    return total, baseline, comps


@dataclass
class Stage2Result:
    curve: list
    final_l1: float

    def curve_csv(self) -> str:
        lines = ["epoch,total,Lgan,Ll1,Lfsr,Lbsr"]
        for row in self.curve:
            lines.append(f"{row['epoch']},{row['total']!r},{row['Lgan']!r},"
                         f"{row['Ll1']!r},{row['Lfsr']!r},{row['Lbsr']!r}")
        return "\n".join(lines) + "\n"


def train_stage2(clips: list, G: ToyGenerator, epochs: int, seed: int = 0,
                 use_fsr: bool = False, use_bsr: bool = False,
                 weights: LossWeights2 | None = None, lr: float = 1e-3,
                 warmup: int | None = None,
                 D: PatchDiscriminator | None = None, log=None) -> Stage2Result:
    """Alternating generator/discriminator updates, one clip per step;
    deterministic for a given seed.

    The consistency regularizers switch on after `warmup` epochs (default:
    half the budget when either is enabled).  They refine an
    already-reasonable generator; applied from scratch they pull the
    baseline frames toward their own blurry regenerations and stall
    reconstruction.
    """
    if not clips:
        raise InputError("empty stage-2 training set")
    if warmup is None:
        warmup = epochs // 2 if (use_fsr or use_bsr) else 0
    if warmup < 0:
        raise ConfigurationError("warmup must be nonnegative")
    weights = weights or LossWeights2()
    D = D or PatchDiscriminator(seed=seed + 1)
    rng = np.random.default_rng(seed)
    maps_cache = [render_maps(c.skeleton, H=G.size, W=G.size) for c in clips]
    reals = [c.stacked() for c in clips]
    opt_g = Adam(G.store, lr=lr)
    opt_d = Adam(D.store, lr=lr)
    curve = []
    order = np.arange(len(clips))
    keys = ("total", "Lgan", "Ll1", "Lfsr", "Lbsr")
    for epoch in range(epochs):
        rng.shuffle(order)
        sums = dict.fromkeys(keys, 0.0)
        reg_on = epoch >= warmup
        for ci in order:
            clip = clips[ci]
            total, baseline, comps = stage2_loss(
                G, D, clip.conditional, maps_cache[ci], reals[ci],
                clip.skeleton, weights, use_fsr and reg_on, use_bsr and reg_on)
            if not np.isfinite(total.item()):
                raise FloatingPointError("non-finite stage-2 generator loss")
            opt_g.zero_grad()
            D.store.zero_grad()
            total.backward()
            D.store.zero_grad()     # generator step must not move it
            opt_g.step()
            d_real = D.logits(Tensor(reals[ci]))
            d_fake = D.logits(baseline.detach())
            d_loss = ((d_real - 1.0) ** 2.0).mean() + (d_fake ** 2.0).mean()
            if not np.isfinite(d_loss.item()):
                raise FloatingPointError("non-finite stage-2 discriminator loss")
            opt_d.zero_grad()
            d_loss.backward()
            opt_d.step()
            sums["total"] += total.item()
            for k in keys[1:]:
                sums[k] += comps[k]
        row = {"epoch": epoch}
        row.update({k: sums[k] / len(clips) for k in keys})
        curve.append(row)
        if log:
            log(f"epoch {epoch}: total={row['total']:.5f} l1={row['Ll1']:.5f}")
    with T.no_grad():
        final = np.mean([
            np.abs(baseline_generate(G, c.conditional, c.skeleton,
                                     maps_cache[i]).data - reals[i]).mean()
            for i, c in enumerate(clips)])
    return Stage2Result(curve=curve, final_l1=float(final))


def infer_video(G: ToyGenerator, I0: np.ndarray, S: SkeletonSequence) -> VideoClip:
    """Inference uses the baseline strategy only; no regenerations, no
    discriminator."""
    with T.no_grad():
        frames = baseline_generate(G, I0, S).data
    return VideoClip(conditional=np.asarray(I0, dtype=np.float64),
                     frames=list(frames), skeleton=S)


# -- video metrics --------------------------------------------------------------


def static_background_mask(maps: np.ndarray, margin: int = 2) -> np.ndarray:
    """(H, W) bool: pixels the skeleton never touches in any frame, with a
    `margin`-pixel safety dilation around touched pixels."""
    occupied = maps.max(axis=(0, -1)) > 0.0
    for _ in range(margin):
        grown = occupied.copy()
        grown[1:, :] |= occupied[:-1, :]
        grown[:-1, :] |= occupied[1:, :]
        grown[:, 1:] |= occupied[:, :-1]
        grown[:, :-1] |= occupied[:, 1:]
        occupied = grown
    return ~occupied


def flicker(frames: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Mean absolute frame-to-frame change, restricted to masked pixels."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape[0] < 2:
        raise InputError("flicker needs at least 2 frames")
    diff = np.abs(np.diff(frames, axis=0))
    if mask is not None:
        if not mask.any():
            raise InputError("flicker mask selects no pixels")
        diff = diff[:, mask, :]
    return float(diff.mean())


def frame_mae(generated: np.ndarray, real: np.ndarray) -> float:
    generated = np.asarray(generated, dtype=np.float64)
    real = np.asarray(real, dtype=np.float64)
    if generated.shape != real.shape:
        raise DimensionError("frame MAE needs equal shapes")
    return float(np.abs(generated - real).mean())


# -- portable-pixmap video directories ------------------------------------------


def save_ppm(path, img: np.ndarray) -> None:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[-1] != 3:
        raise DimensionError(f"ppm image must be (H, W, 3), got {img.shape}")
    H, W = img.shape[:2]
    quant = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{W} {H}\n255\n".encode("ascii"))
        fh.write(quant.tobytes())


def load_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P6":
        raise InputError(f"{path}: not a binary ppm")
    W, H = (int(v) for v in parts[1].split())
    if parts[2] != b"255":
        raise InputError(f"{path}: unsupported ppm depth {parts[2]!r}")
    raw = np.frombuffer(parts[3][:H * W * 3], dtype=np.uint8)
    return raw.reshape(H, W, 3).astype(np.float64) / 255.0


def save_video_dir(root, clip: VideoClip) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    save_ppm(root / "conditional.ppm", clip.conditional)
    for i, frame in enumerate(clip.frames):
        save_ppm(root / f"frame_{i:04d}.ppm", frame)
    save_skeleton_text(root / "skeleton.txt", clip.skeleton)
    H, W = clip.conditional.shape[:2]
    (root / "index.txt").write_text(
        f"# video directory v1\nframes {clip.F}\nheight {H}\nwidth {W}\n")
    return root


def load_video_dir(root) -> VideoClip:
    root = Path(root)
    index = root / "index.txt"
    if not index.exists():
        raise InputError(f"{root}: missing video index file")
    header = dict(line.split() for line in index.read_text().splitlines()
                  if line and not line.startswith("#"))
    F = int(header["frames"])
    frames = [load_ppm(root / f"frame_{i:04d}.ppm") for i in range(F)]
    return VideoClip(conditional=load_ppm(root / "conditional.ppm"),
                     frames=frames,
                     skeleton=load_skeleton_text(root / "skeleton.txt"))
