"""Acceptance suite: the ten end-to-end guarantees the package makes.

Each test is self-contained given the library; the training-based ones
share module-scoped fixtures so the budgeted runs happen once.  Budgets
(runtime ceilings, tolerances) are asserted exactly as stated; training
configurations are pinned seeds chosen during calibration.
"""

import time

import numpy as np
import pytest

from dancesynth import tensor as T
from dancesynth.audio import clip_features
from dancesynth.cli import main as cli_main
from dancesynth.graph import build_graph
from dancesynth.metrics import (GaussianStats, beat_scores, frechet_distance,
                                gaussian_stats, motion_beats, music_beats,
                                pose_features, pvar, velocity_features)
from dancesynth.model import ModelConfig, SkeletonGenerator
from dancesynth.ops import (affine, conv1d_time, conv2d, layer_norm,
                            upsample_nearest)
from dancesynth.scan import (ScanSequence, bench_scan, fit_exponent,
                             init_ssm_params, reverse_ordering,
                             selective_scan_parallel,
                             selective_scan_sequential)
from dancesynth.skeleton import SkeletonSequence
from dancesynth.stage1 import LossWeights1, train_stage1
from dancesynth.synth import (SynthSpec, load_dataset, load_video_dataset,
                              synth_dataset, synth_video_dataset)
from dancesynth.tensor import ParamStore, Tensor, grad_check
from dancesynth.video import (PatchDiscriminator, ToyGenerator,
                              baseline_generate, flicker, frame_mae,
                              render_maps, static_background_mask,
                              train_stage2)

# -- 1. parallel/sequential scan equivalence ---------------------------------------


def test_scan_equivalence_200_random_instances():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    for _ in range(200):
        L = int(rng.integers(1, 258))
        h = int(rng.integers(1, 9))
        n = int(rng.integers(1, 9))
        store = ParamStore()
        p = init_ssm_params(store, "s", h, n, rng)
        x = Tensor(rng.standard_normal((L, h)))
        with T.no_grad():
            ys = selective_scan_sequential(ScanSequence(x), p)
            yp = selective_scan_parallel(ScanSequence(x), p)
        scale = max(float(np.abs(ys.data).max()), 1e-12)
        assert float(np.abs(ys.data - yp.data).max()) / scale < 1e-10, \
            f"disagreement at L={L}, h={h}, n={n}"
    assert time.perf_counter() - start < 30.0


# -- 2. reverse-scan duality --------------------------------------------------------


def test_reverse_scan_duality_50_configs():
    rng = np.random.default_rng(7)
    for _ in range(50):
        L = int(rng.integers(1, 129))
        h = int(rng.integers(1, 9))
        n = int(rng.integers(1, 9))
        store = ParamStore()
        p = init_ssm_params(store, "s", h, n, rng)
        x = Tensor(rng.standard_normal((L, h)))
        with T.no_grad():
            backward = selective_scan_sequential(
                ScanSequence(x, reverse_ordering(L)), p)
            fwd_of_rev = selective_scan_sequential(
                ScanSequence(Tensor(x.data[::-1].copy())), p)
        assert np.array_equal(backward.data, fwd_of_rev.data[::-1]), \
            f"duality broken at L={L}, h={h}, n={n}"


# -- 3. gradient suite ---------------------------------------------------------------


def _op_cases():
    rng = np.random.default_rng(11)
    x = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    y = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    m = Tensor(rng.standard_normal((4, 5)), requires_grad=True)
    g = Tensor(rng.uniform(0.5, 1.5, 4), requires_grad=True)
    b = Tensor(rng.standard_normal(4), requires_grad=True)
    k1 = Tensor(rng.standard_normal((3, 4, 6)), requires_grad=True)
    img = Tensor(rng.standard_normal((6, 6, 3)), requires_grad=True)
    k2 = Tensor(rng.standard_normal((3, 3, 3, 4)), requires_grad=True)
    cases = {
        "add": (lambda: (x + y).sum(), [x, y]),
        "sub": (lambda: (x - y).sum(), [x, y]),
        "mul": (lambda: (x * y).sum(), [x, y]),
        "div": (lambda: (x / (y * y + 1.0)).sum(), [x, y]),
        "pow": (lambda: ((x * x + 1.0) ** 1.5).sum(), [x]),
        "matmul": (lambda: (x @ m).sum(), [x, m]),
        "exp": (lambda: T.exp(x).sum(), [x]),
        "log": (lambda: T.log(x * x + 1.0).sum(), [x]),
        "sigmoid": (lambda: T.sigmoid(x).sum(), [x]),
        "silu": (lambda: T.silu(x).sum(), [x]),
        "tanh": (lambda: T.tanh(x).sum(), [x]),
        "abs": (lambda: T.absolute(x + 10.0).sum(), [x]),
        "relu": (lambda: T.relu(x + 10.0).sum(), [x]),
        "mean": (lambda: x.mean(axis=0).sum(), [x]),
        "reshape": (lambda: (x.reshape((4, 3)) ** 2.0).sum(), [x]),
        "swapaxes": (lambda: (x.swapaxes(0, 1) * Tensor(np.ones((4, 3)))).sum(), [x]),
        "take": (lambda: T.take(x, np.array([2, 0])).sum(), [x]),
        "concat": (lambda: T.concat([x, y], axis=1).sum(), [x, y]),
        "stack": (lambda: T.stack([x, y]).sum(), [x, y]),
        "layer_norm": (lambda: layer_norm(x, g, b).sum(), [x, g, b]),
        "affine": (lambda: affine(x, m, Tensor(np.zeros(5), requires_grad=True)).sum(),
                   [x, m]),
        "conv1d_time": (lambda: conv1d_time(x.reshape((3, 4, 1)) * Tensor(np.ones((1, 4))),
                                            k1).sum(), [x, k1]),
        "conv2d": (lambda: conv2d(img, k2, stride=2, pad=1).sum(), [img, k2]),
        "upsample": (lambda: (upsample_nearest(img) ** 2.0).sum(), [img]),
    }
    return cases


def test_gradient_suite_every_op_and_full_stack():
    start = time.perf_counter()
    for name, (fn, params) in _op_cases().items():
        err = grad_check(fn, params)
        assert err < 1e-4, f"op {name}: gradient error {err:.2e}"

    # both scan kernels
    rng = np.random.default_rng(13)
    store = ParamStore()
    p = init_ssm_params(store, "s", 4, 3, rng)
    xs = Tensor(rng.standard_normal((7, 4)), requires_grad=True)
    w = rng.standard_normal((7, 4))
    for parallel in (False, True):
        fn = (lambda par=parallel:
              ((selective_scan_parallel if par else selective_scan_sequential)
               (ScanSequence(xs), p) * Tensor(w)).sum())
        err = grad_check(fn, store.tensors() + [xs])
        assert err < 1e-4, f"scan(parallel={parallel}): {err:.2e}"

    # the full generator stack: 4 frames, 3 joints, width 8, state 4, 2 blocks
    cfg = ModelConfig(V=3, h=8, n_state=4, n_blocks=2, h_z=4, d_in=5,
                      gru_layers=1)
    graph = build_graph(3, [(0, 1), (1, 2)])
    model = SkeletonGenerator(cfg, graph=graph, seed=0)
    feats = Tensor(np.random.default_rng(0).standard_normal((4, 5)))
    z = Tensor(np.random.default_rng(1).standard_normal(4))
    wout = np.random.default_rng(2).standard_normal((4, 3, 2))
    err = grad_check(
        lambda: (model.forward(feats, z) * Tensor(wout)).sum(),
        model.store.tensors())
    assert err < 1e-4, f"full stack: gradient error {err:.2e}"
    assert time.perf_counter() - start < 300.0


# -- 4. runtime scaling ---------------------------------------------------------------


def test_parallel_scan_scales_linearly_attention_quadratically():
    rows = bench_scan([256, 512, 1024, 2048, 4096], repeats=3, seed=0)
    parallel_exp = fit_exponent(rows, "parallel")
    attention_exp = fit_exponent(rows, "attention")
    assert parallel_exp < 1.2, f"parallel exponent {parallel_exp:.3f}"
    assert attention_exp > 1.8, f"attention exponent {attention_exp:.3f}"


# -- 5/6/7. stage-1 training, beat behavior, diversity --------------------------------

STAGE1_EPOCHS = 200
_STAGE1_KW = dict(h=32, n_state=4, n_blocks=2, h_z=16, gru_layers=1)
_STAGE1_WEIGHTS = LossWeights1(lambda_v=10.0)


@pytest.fixture(scope="module")
def stage1_dataset(tmp_path_factory):
    root = synth_dataset(tmp_path_factory.mktemp("s1data"), count=80, seed=0,
                         base=SynthSpec(duration_s=2.0), write_audio=False)
    return root


@pytest.fixture(scope="module")
def stage1_runs(stage1_dataset):
    samples = load_dataset(stage1_dataset, split="train")
    assert len(samples) == 64
    results = {}
    start = time.perf_counter()
    for label, identity in (("full", False), ("identity", True)):
        cfg = ModelConfig(identity_ssm=identity, **_STAGE1_KW)
        model = SkeletonGenerator(cfg, seed=7)
        res = train_stage1(samples, model, epochs=STAGE1_EPOCHS, seed=0,
                           weights=_STAGE1_WEIGHTS)
        results[label] = (model, res)
    elapsed = time.perf_counter() - start
    return results, elapsed


def test_stage1_overfit_and_scan_ablation_direction(stage1_runs):
    results, elapsed = stage1_runs
    full_l1 = results["full"][1].final_l1
    identity_l1 = results["identity"][1].final_l1
    assert full_l1 < 0.02, f"full model train L1 {full_l1:.5f}"
    assert identity_l1 > full_l1, (
        f"identity ablation {identity_l1:.5f} not worse than full {full_l1:.5f}")
    assert elapsed < 1800.0, f"stage-1 budget exceeded: {elapsed:.0f}s"


@pytest.fixture(scope="module")
def beat_model(tmp_path_factory):
    """A generator trained on a larger corpus for the alignment criterion
    (which states no runtime budget, unlike the overfit criterion)."""
    root = synth_dataset(tmp_path_factory.mktemp("beatdata"), count=200,
                         seed=0, base=SynthSpec(duration_s=2.0),
                         write_audio=False)
    model = SkeletonGenerator(ModelConfig(**_STAGE1_KW), seed=7)
    train_stage1(load_dataset(root, split="train"), model, epochs=120,
                 seed=0, weights=_STAGE1_WEIGHTS)
    return model, root


def test_beat_alignment_on_heldout_music(beat_model):
    model, root = beat_model
    held_out = load_dataset(root, split="test")
    rng = np.random.default_rng(123)
    # conditional generation at the mode of the latent: z = 0
    z = np.zeros(model.cfg.h_z)
    bcs, shuffled_bcs = [], []
    for sample in held_out:
        beats = music_beats(sample.features[:, -1])
        if beats.size == 0:
            continue
        coords = model.generate(sample.features, z)
        seq = SkeletonSequence(coords)
        _, _, bc = beat_scores(beats, motion_beats(seq))
        bcs.append(bc)
        # control: the same generated frames in shuffled temporal order
        perm = rng.permutation(seq.F)
        shuffled = SkeletonSequence(coords[perm])
        _, _, bc_s = beat_scores(beats, motion_beats(shuffled))
        shuffled_bcs.append(bc_s)
    assert bcs, "no held-out samples with detectable music beats"
    mean_bc = float(np.mean(bcs))
    mean_shuffled = float(np.mean(shuffled_bcs))
    assert mean_bc >= 0.5, f"generated bc {mean_bc:.3f} < 0.5"
    assert mean_shuffled <= 0.3, f"shuffled control bc {mean_shuffled:.3f} > 0.3"


def test_noise_diversity_positive_and_zero_for_copies(stage1_dataset, stage1_runs):
    model = stage1_runs[0]["full"][0]
    feats = load_dataset(stage1_dataset, split="test")[0].features
    samples = [SkeletonSequence(model.generate(
        feats, np.random.default_rng(s).standard_normal(model.cfg.h_z)))
        for s in range(10)]
    assert pvar(samples) > 0.0
    copies = [SkeletonSequence(samples[0].coords.copy()) for _ in range(10)]
    assert pvar(copies) == 0.0


# -- 8. metric oracles -----------------------------------------------------------------


def test_metric_closed_form_oracles():
    # 1-D Fréchet: (mu_a - mu_b)^2 + (sd_a - sd_b)^2
    a = GaussianStats(np.array([0.5]), np.array([[2.25]]))
    b = GaussianStats(np.array([-1.5]), np.array([[0.25]]))
    assert abs(frechet_distance(a, b) - (2.0 ** 2 + 1.0 ** 2)) < 1e-12
    a2 = GaussianStats(np.array([3.0]), np.array([[16.0]]))
    b2 = GaussianStats(np.array([3.0]), np.array([[9.0]]))
    assert abs(frechet_distance(a2, b2) - 1.0) < 1e-12
    # self-evaluation: pose and velocity Fréchet distances are 0 within 1e-9
    rng = np.random.default_rng(0)
    seqs = [SkeletonSequence(rng.uniform(0, 1, (8, 15, 2))) for _ in range(12)]
    ps = gaussian_stats(np.stack([pose_features(s) for s in seqs]))
    vs = gaussian_stats(np.stack([velocity_features(s) for s in seqs]))
    assert abs(frechet_distance(ps, ps)) < 1e-9
    assert abs(frechet_distance(vs, vs)) < 1e-9
    # beat kernel: a single one-frame (0.1 s) miss scores exp(-1/2)
    _, _, bc = beat_scores(np.array([1.0]), np.array([11]), fps=10.0)
    assert abs(bc - float(np.exp(-0.5))) < 1e-12


# -- 9. stage-2 consistency regularizers -------------------------------------------------

STAGE2_EPOCHS = 60


@pytest.fixture(scope="module")
def stage2_runs(tmp_path_factory):
    root = synth_video_dataset(tmp_path_factory.mktemp("s2data"), count=32,
                               seed=0, duration_s=1.0, size=32)
    train = load_video_dataset(root, split="train")
    test = load_video_dataset(root, split="test")
    out = {}
    start = time.perf_counter()
    for label, (fsr, bsr) in (("plain", (False, False)), ("reg", (True, True))):
        G = ToyGenerator(seed=0)
        D = PatchDiscriminator(seed=1)
        train_stage2(train, G, epochs=STAGE2_EPOCHS, seed=0,
                     use_fsr=fsr, use_bsr=bsr, D=D)
        maes, flickers = [], []
        with T.no_grad():
            for clip in test:
                maps = render_maps(clip.skeleton)
                frames = baseline_generate(G, clip.conditional, clip.skeleton,
                                           maps).data
                maes.append(frame_mae(frames, clip.stacked()))
                mask = static_background_mask(maps)
                flickers.append(flicker(frames, mask))
        out[label] = (float(np.mean(maes)), float(np.mean(flickers)))
    elapsed = time.perf_counter() - start
    return out, elapsed


def test_stage2_regularizers_reduce_flicker_and_heldout_error(stage2_runs):
    out, elapsed = stage2_runs
    plain_mae, plain_flicker = out["plain"]
    reg_mae, reg_flicker = out["reg"]
    assert reg_flicker < plain_flicker, (
        f"flicker: regularized {reg_flicker:.6f} vs plain {plain_flicker:.6f}")
    assert reg_mae < plain_mae, (
        f"held-out MAE: regularized {reg_mae:.6f} vs plain {plain_mae:.6f}")
    assert elapsed < 1800.0, f"stage-2 budget exceeded: {elapsed:.0f}s"


# -- 10. bit-identical reruns -------------------------------------------------------------


def test_identical_seed_and_config_reproduce_artifacts_bit_exactly(tmp_path):
    data = tmp_path / "data"
    assert cli_main(["synth", "--out", str(data), "--count", "6",
                     "--duration", "1.0", "--seed", "3"]) == 0
    snapshots = {}
    for attempt in range(2):
        run = tmp_path / "run"
        assert cli_main(["train-m2s", "--data", str(data), "--out", str(run),
                         "--epochs", "2", "--h", "8", "--n-state", "2",
                         "--n-blocks", "1", "--h-z", "4",
                         "--gru-layers", "1", "--seed", "5"]) == 0
        gen = tmp_path / "gen"
        assert cli_main(["generate",
                         "--features", str(data / "samples" / "s0000" / "features.csv"),
                         "--checkpoint", str(run), "--out", str(gen),
                         "--k", "2", "--seeds", "0,1"]) == 0
        ev = tmp_path / "eval"
        assert cli_main(["eval", "--generated", str(gen),
                         "--reference", str(data / "samples"),
                         "--out", str(ev)]) == 0
        artifacts = [run / "checkpoint.bin", run / "curve.csv",
                     gen / "skeleton_0000.txt", gen / "skeleton_0001.txt",
                     ev / "report.txt", ev / "report.csv"]
        snap = {p.name: p.read_bytes() for p in artifacts}
        if attempt == 0:
            snapshots = snap
        else:
            for name, blob in snap.items():
                assert blob == snapshots[name], f"{name} differs between reruns"
    # the dataset itself regenerates bit-identically too
    data2 = tmp_path / "data2"
    assert cli_main(["synth", "--out", str(data2), "--count", "6",
                     "--duration", "1.0", "--seed", "3"]) == 0
    for rel in ["index.csv", "samples/s0000/skeleton.txt",
                "samples/s0005/features.csv"]:
        assert (data / rel).read_bytes() == (data2 / rel).read_bytes()
