"""Stage-1 training: fit the skeleton generator to paired (music features,
motion) data with a weighted sum of a perceptual loss over frozen graph
features, a discriminator feature-matching loss, and L1 reconstruction.

The discriminator is trained with a least-squares adversarial objective;
by default only its feature-matching term reaches the generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .tensor import ConfigurationError, ParamStore, Tensor
from .errors import InputError
from .graph import GraphSpec, default_skeleton, graph_conv1d, init_graph_conv
from .model import ModelConfig, SkeletonGenerator
from .ops import affine, conv1d_time, init_affine
from .optim import Adam
from .skeleton import SkeletonSequence

__all__ = [
    "LossWeights1",
    "PoseFeatureNet",
    "SeqDiscriminator",
    "pose_perceptual_loss",
    "feature_matching_loss",
    "stage1_loss",
    "TrainResult",
    "train_stage1",
    "sample_multimodal",
]


@dataclass
class LossWeights1:
    lambda_p: float = 1.0
    lambda_f: float = 1.0
    lambda_l1: float = 10.0
    # L1 on frame-to-frame displacement; sharpens the speed profile
    # (pauses vs swings) that pointwise L1 is nearly indifferent to
    lambda_v: float = 0.0

    def __post_init__(self):
        if min(self.lambda_p, self.lambda_f, self.lambda_l1, self.lambda_v) < 0:
            raise ConfigurationError("loss weights must be nonnegative")
        if self.lambda_p == self.lambda_f == self.lambda_l1 == self.lambda_v == 0:
            raise ConfigurationError("at least one loss weight must be positive")


class PoseFeatureNet:
    """Three graph-convolution stages over joint coordinates, randomly
    initialized and frozen; its intermediate features define the
    perceptual distance between motions."""

    WIDTH = 16

    def __init__(self, graph: GraphSpec | None = None, seed: int = 100,
                 store: ParamStore | None = None):
        self.graph = graph if graph is not None else default_skeleton()
        if store is None:
            self.store = ParamStore()
            rng = np.random.default_rng(seed)
            init_graph_conv(self.store, "g0", 2, rng, h_out=self.WIDTH)
            init_graph_conv(self.store, "g1", self.WIDTH, rng)
            init_graph_conv(self.store, "g2", self.WIDTH, rng)
        else:
            self.store = store

    def features(self, coords: Tensor) -> list[Tensor]:
        """coords: (..., F, V, 2) -> three feature maps."""
        feats = []
        x = coords
        for name in ("g0", "g1", "g2"):
            x = T.silu(graph_conv1d(x, self.graph, self.store, name))
            feats.append(x)
        return feats


class SeqDiscriminator:
    """Temporal-convolution classifier over flattened (F, 2V) coordinate
    sequences with three exposed feature stages and a scalar head."""

    WIDTH = 32
    STAGES = 3

    def __init__(self, V: int, seed: int = 200, store: ParamStore | None = None):
        self.V = V
        if store is None:
            self.store = ParamStore()
            rng = np.random.default_rng(seed)
            d = 2 * V
            for i in range(self.STAGES):
                s = 1.0 / np.sqrt(3 * d)
                self.store.add(f"c{i}.k", rng.uniform(-s, s, size=(3, d, self.WIDTH)))
                self.store.add(f"c{i}.b", np.zeros(self.WIDTH))
                d = self.WIDTH
            init_affine(self.store, "head", self.WIDTH, 1, rng)
        else:
            self.store = store

    def features(self, coords: Tensor) -> list[Tensor]:
        """coords: (..., F, V, 2) -> per-stage feature maps (..., F, width)."""
        x = coords.reshape(coords.shape[:-2] + (2 * self.V,))
        feats = []
        for i in range(self.STAGES):
            x = T.silu(conv1d_time(x, self.store[f"c{i}.k"]) + self.store[f"c{i}.b"])
            feats.append(x)
        return feats

    def logit(self, coords: Tensor) -> Tensor:
        pooled = self.features(coords)[-1].mean(axis=-2)
        return affine(pooled, self.store["head.w"], self.store["head.b"])


def pose_perceptual_loss(s_gen: Tensor, s_real: Tensor, net: PoseFeatureNet) -> Tensor:
    if s_gen.shape != s_real.shape:
        raise T.DimensionError("perceptual loss needs equal sequence shapes")
    total = None
    for fg, fr in zip(net.features(s_gen), net.features(s_real.detach())):
        term = T.absolute(fg - fr.detach()).mean()
        total = term if total is None else total + term
    return total


def feature_matching_loss(s_gen: Tensor, s_real: Tensor, disc: SeqDiscriminator) -> Tensor:
    if s_gen.shape != s_real.shape:
        raise T.DimensionError("feature matching needs equal sequence shapes")
    total = None
    for fg, fr in zip(disc.features(s_gen), disc.features(s_real.detach())):
        term = T.absolute(fg - fr.detach()).mean()
        total = term if total is None else total + term
    return total


def stage1_loss(s_gen: Tensor, s_real: Tensor, posenet: PoseFeatureNet,
                disc: SeqDiscriminator, w: LossWeights1) -> tuple[Tensor, dict]:
    lp = pose_perceptual_loss(s_gen, s_real, posenet)
    lf = feature_matching_loss(s_gen, s_real, disc)
    l1 = T.absolute(s_gen - s_real.detach()).mean()
    total = w.lambda_p * lp + w.lambda_f * lf + w.lambda_l1 * l1
    comps = {"Lp": lp.item(), "Lf": lf.item(), "Ll1": l1.item()}
    if w.lambda_v > 0:
        real = s_real.detach()
        v_gen = s_gen[..., 1:, :, :] - s_gen[..., :-1, :, :]
        v_real = real[..., 1:, :, :] - real[..., :-1, :, :]
        lv = T.absolute(v_gen - v_real).mean()
        total = total + w.lambda_v * lv
        comps["Lv"] = lv.item()
    return total, comps


@dataclass
class TrainResult:
    curve: list[dict]
    final_l1: float

    def curve_csv(self) -> str:
        lines = ["epoch,total,Lp,Lf,Ll1"]
        for row in self.curve:
            lines.append(f"{row['epoch']},{row['total']!r},{row['Lp']!r},"
                         f"{row['Lf']!r},{row['Ll1']!r}")
        return "\n".join(lines) + "\n"


def _check_finite(value: float, component: str) -> None:
    if not np.isfinite(value):
        raise FloatingPointError(f"non-finite training loss in component {component}")


def _batch_arrays(samples) -> tuple[np.ndarray, np.ndarray]:
    Fs = {s.skeleton.F for s in samples}
    if len(Fs) != 1:
        raise InputError("stage-1 batch requires samples of equal length")
    feats = np.stack([s.features for s in samples])
    targets = np.stack([s.skeleton.coords for s in samples])
    return feats, targets


def train_stage1(samples, model: SkeletonGenerator, epochs: int,
                 seed: int = 0, weights: LossWeights1 | None = None,
                 lr: float = 1e-3, batch_size: int = 16,
                 adversarial_to_generator: bool = False,
                 posenet: PoseFeatureNet | None = None,
                 disc: SeqDiscriminator | None = None,
                 log=None) -> TrainResult:
    """Full-gradient training loop; deterministic for a given seed.

    The latent z is fixed per sample (drawn once from the seed), so the
    generator can actually overfit the paired data.
    """
    if not samples:
        raise InputError("empty training set")
    weights = weights or LossWeights1()
    posenet = posenet or PoseFeatureNet(model.graph)
    disc = disc or SeqDiscriminator(model.cfg.V)
    rng = np.random.default_rng(seed)
    feats_all, targets_all = _batch_arrays(samples)
    B = len(samples)
    z_all = rng.standard_normal((B, model.cfg.h_z))
    opt_g = Adam(model.store, lr=lr)
    opt_d = Adam(disc.store, lr=lr)
    curve = []
    order = np.arange(B)
    for epoch in range(epochs):
        rng.shuffle(order)
        ep_total = ep_lp = ep_lf = ep_l1 = 0.0
        n_batches = 0
        for start in range(0, B, batch_size):
            idx = order[start:start + batch_size]
            feats = Tensor(feats_all[idx])
            targets = Tensor(targets_all[idx])
            z = Tensor(z_all[idx])
            s_gen = model.forward(feats, z)
            total, comps = stage1_loss(s_gen, targets, posenet, disc, weights)
            if adversarial_to_generator:
                adv = ((disc.logit(s_gen) - 1.0) ** 2.0).mean()
                total = total + adv
            for name, v in comps.items():
                _check_finite(v, name)
            _check_finite(total.item(), "total")
            opt_g.zero_grad()
            disc.store.zero_grad()
            posenet.store.zero_grad()
            total.backward()
            posenet.store.zero_grad()   # frozen
            disc.store.zero_grad()      # generator step must not move it
            opt_g.step()
            # discriminator step: least-squares real-vs-fake
            d_real = disc.logit(targets)
            d_fake = disc.logit(s_gen.detach())
            d_loss = ((d_real - 1.0) ** 2.0).mean() + (d_fake ** 2.0).mean()
            _check_finite(d_loss.item(), "Lgan_d")
            opt_d.zero_grad()
            d_loss.backward()
            opt_d.step()
            ep_total += total.item()
            ep_lp += comps["Lp"]
            ep_lf += comps["Lf"]
            ep_l1 += comps["Ll1"]
            n_batches += 1
        row = {"epoch": epoch, "total": ep_total / n_batches,
               "Lp": ep_lp / n_batches, "Lf": ep_lf / n_batches,
               "Ll1": ep_l1 / n_batches}
        curve.append(row)
        if log:
            log(f"epoch {epoch}: total={row['total']:.5f} l1={row['Ll1']:.5f}")
    # final training-set L1 under the training z, full batch
    with T.no_grad():
        s_gen = model.forward(Tensor(feats_all), Tensor(z_all))
        final_l1 = float(np.abs(s_gen.data - targets_all).mean())
    return TrainResult(curve=curve, final_l1=final_l1)


def sample_multimodal(model: SkeletonGenerator, features: np.ndarray,
                      k: int, seeds=None) -> list[SkeletonSequence]:
    """k generations from one piece of music differing only in z."""
    if k < 2:
        raise InputError("multi-modal sampling needs k >= 2")
    if seeds is None:
        seeds = list(range(k))
    if len(seeds) != k:
        raise InputError("need one seed per sample")
    out = []
    for s in seeds:
        z = np.random.default_rng(s).standard_normal(model.cfg.h_z)
        coords = model.generate(features, z)
        out.append(SkeletonSequence(coords))
    return out
