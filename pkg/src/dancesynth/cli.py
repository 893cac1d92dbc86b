"""Command-line entry point: dataset synthesis, two training stages,
generation, rendering, evaluation, benchmarks, and the verification suite.

Configuration is a flat key=value text file plus per-flag overrides; every
command writes a reproducibility header (seed, config hash, format
versions) into its output directory.  Exit codes: 0 success, 1 validation
error, 2 runtime error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from . import __version__
from . import tensor as T
from .audio import clip_features, load_feature_csv, load_wav, FEATURE_DIM
from .errors import (ConfigurationError, DimensionError, GradCheckError,
                     InputError, VerificationError)
from .graph import default_skeleton
from .metrics import (MetricReport, beat_scores, evaluate_sets,
                      frechet_distance, gaussian_stats, motion_beats,
                      music_beats, pvar)
from .model import ModelConfig, SkeletonGenerator
from .scan import (ScanSequence, bench_rows_to_csv, bench_scan, fit_exponent,
                   init_ssm_params, reverse_ordering, selective_scan_parallel,
                   selective_scan_sequential)
from .skeleton import SkeletonSequence, load_skeleton_text, save_skeleton_text
from .stage1 import LossWeights1, train_stage1, sample_multimodal
from .synth import (SynthSpec, load_dataset, load_video_dataset, synth_dataset,
                    synth_video_dataset)
from .tensor import ParamStore, Tensor, grad_check
from .video import (LossWeights2, PatchDiscriminator, ToyGenerator,
                    infer_video, load_ppm, save_video_dir, train_stage2)

__all__ = ["main"]

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_VERIFICATION = 3

DATA_ROOT_ENV = "DANCESYNTH_DATA_ROOT"

FORMAT_VERSIONS = "checkpoint=1 skeleton_text=1 skeleton_binary=1 video_dir=1"

S1_ABLATIONS = {
    # branch sets per run label: (spatial, temporal_fw, temporal_bw, identity)
    "s1-1": (True, True, True, True),
    "s1-2": (True, False, False, False),
    "s1-3": (False, True, False, False),
    "s1-4": (False, False, True, False),
    "s1-5": (False, True, True, False),
    "s1-6": (True, True, True, False),
    "full": (True, True, True, False),
}

S2_ABLATIONS = {
    # (use_fsr, use_bsr)
    "s2-1": (False, False),
    "s2-2": (True, False),
    "s2-3": (False, True),
    "s2-4": (True, True),
    "full": (True, True),
}


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; bad flags are validation errors."""

    def error(self, message):
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


# -- flat key=value configuration -----------------------------------------------


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise InputError(f"not a boolean: {text!r}")


def load_config_file(path, known: dict) -> dict:
    """key=value lines; keys must be known options for the command."""
    out = {}
    for ln, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InputError(f"{path}:{ln}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in known:
            raise InputError(f"{path}:{ln}: unknown config key {key!r}")
        typ = known[key]
        out[key] = _parse_bool(value) if typ is bool else typ(value)
    return out


def merge_config(defaults: dict, types: dict, config_path: str | None,
                 overrides: dict) -> dict:
    cfg = dict(defaults)
    if config_path:
        cfg.update(load_config_file(config_path, types))
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    return cfg


def config_hash(cfg: dict) -> str:
    canon = "\n".join(f"{k}={cfg[k]}" for k in sorted(cfg))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def write_header(outdir: Path, command: str, cfg: dict, seed: int) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    lines = [
        f"tool dancesynth {__version__}",
        f"command {command}",
        f"seed {seed}",
        f"config_hash {config_hash(cfg)}",
        f"formats {FORMAT_VERSIONS}",
        "config:",
    ]
    lines += [f"  {k}={cfg[k]}" for k in sorted(cfg)]
    (outdir / "header.txt").write_text("\n".join(lines) + "\n")


def data_root() -> Path:
    return Path(os.environ.get(DATA_ROOT_ENV, "."))


def _add_options(parser, options: dict) -> None:
    for name, (typ, default, help_text) in options.items():
        flag = "--" + name.replace("_", "-")
        if typ is bool:
            parser.add_argument(flag, type=_parse_bool, default=None,
                                metavar="BOOL",
                                help=f"{help_text} (default {default})")
        else:
            parser.add_argument(flag, type=typ, default=None,
                                help=f"{help_text} (default {default})")


def _resolve(args, options: dict) -> dict:
    types = {k: v[0] for k, v in options.items()}
    defaults = {k: v[1] for k, v in options.items()}
    overrides = {k: getattr(args, k) for k in options}
    return merge_config(defaults, types, args.config, overrides)


# -- model config serialization --------------------------------------------------


def model_config_to_text(cfg: ModelConfig) -> str:
    return "\n".join(f"{k}={v}" for k, v in asdict(cfg).items()) + "\n"


def model_config_from_text(text: str) -> ModelConfig:
    types = {f.name: f.type for f in fields(ModelConfig)}
    kwargs = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in types:
            raise ConfigurationError(f"unknown model config key {key!r}")
        typ = types[key]
        if typ in ("bool", bool):
            kwargs[key] = _parse_bool(value)
        elif typ in ("int", int):
            kwargs[key] = int(value)
        else:
            kwargs[key] = value.strip()
    return ModelConfig(**kwargs)


def _load_generator(checkpoint_dir: Path) -> SkeletonGenerator:
    cfg_path = checkpoint_dir / "model.cfg"
    ckpt_path = checkpoint_dir / "checkpoint.bin"
    for p in (cfg_path, ckpt_path):
        if not p.exists():
            raise InputError(f"missing checkpoint artifact: {p}")
    cfg = model_config_from_text(cfg_path.read_text())
    model = SkeletonGenerator(cfg, seed=0)
    model.store.load_values(ParamStore.load(ckpt_path))
    return model


# -- commands --------------------------------------------------------------------

SYNTH_OPTIONS = {
    "out": (str, "", "output dataset directory (default <data-root>/dataset)"),
    "count": (int, 64, "number of samples"),
    "seed": (int, 0, "generation seed"),
    "duration": (float, 4.0, "clip duration in seconds"),
    "noise_level": (float, 0.0, "coordinate/audio jitter level"),
    "bpm": (float, 0.0, "fix every sample to this tempo (0 = mixed tempi)"),
    "videos": (bool, False, "write a toy video dataset instead of audio pairs"),
}


def cmd_synth(args) -> int:
    cfg = _resolve(args, SYNTH_OPTIONS)
    out = Path(cfg["out"]) if cfg["out"] else data_root() / "dataset"
    base_kwargs = {"duration_s": cfg["duration"], "noise_level": cfg["noise_level"]}
    if cfg["bpm"]:
        base_kwargs["bpm"] = cfg["bpm"]
    base = SynthSpec(**base_kwargs)   # validates ranges
    if cfg["videos"]:
        synth_video_dataset(out, count=cfg["count"], seed=cfg["seed"],
                            duration_s=cfg["duration"])
    else:
        synth_dataset(out, count=cfg["count"], seed=cfg["seed"], base=base,
                      fixed_bpm=bool(cfg["bpm"]))
    write_header(out, "synth", cfg, cfg["seed"])
    print(f"wrote {cfg['count']} samples to {out}")
    return EXIT_OK


TRAIN_M2S_OPTIONS = {
    "data": (str, "", "dataset directory (default <data-root>/dataset)"),
    "out": (str, "", "run directory (default <data-root>/runs/m2s)"),
    "epochs": (int, 100, "training epochs"),
    "batch_size": (int, 16, "minibatch size"),
    "seed": (int, 0, "training seed"),
    "lr": (float, 1e-3, "learning rate"),
    "h": (int, 64, "latent width"),
    "n_state": (int, 8, "scan state size"),
    "n_blocks": (int, 4, "stacked graph blocks"),
    "h_z": (int, 16, "noise width"),
    "gru_layers": (int, 2, "frontend recurrent layers"),
    "lambda_v": (float, 0.0, "velocity-matching loss weight"),
    "ablation": (str, "full", "run label: full or s1-1..s1-6"),
    "resume": (str, "", "checkpoint directory to continue from"),
}


def _read_curve_offset(curve_path: Path) -> int:
    if not curve_path.exists():
        return 0
    lines = curve_path.read_text().strip().splitlines()
    if len(lines) < 2:
        return 0
    return int(lines[-1].split(",")[0]) + 1


def cmd_train_m2s(args) -> int:
    cfg = _resolve(args, TRAIN_M2S_OPTIONS)
    if cfg["ablation"] not in S1_ABLATIONS:
        raise InputError(f"unknown ablation {cfg['ablation']!r}; "
                         f"pick from {sorted(S1_ABLATIONS)}")
    data = Path(cfg["data"]) if cfg["data"] else data_root() / "dataset"
    if not (data / "index.csv").exists():
        raise InputError(f"no dataset at {data} (run `dancesynth synth` first)")
    out = Path(cfg["out"]) if cfg["out"] else data_root() / "runs" / "m2s"
    spatial, tfw, tbw, identity = S1_ABLATIONS[cfg["ablation"]]
    mcfg = ModelConfig(h=cfg["h"], n_state=cfg["n_state"],
                       n_blocks=cfg["n_blocks"], h_z=cfg["h_z"],
                       gru_layers=cfg["gru_layers"],
                       branch_spatial=spatial, branch_temporal_fw=tfw,
                       branch_temporal_bw=tbw, identity_ssm=identity)
    model = SkeletonGenerator(mcfg, seed=cfg["seed"])
    out.mkdir(parents=True, exist_ok=True)
    offset = 0
    if cfg["resume"]:
        prev = Path(cfg["resume"])
        model.store.load_values(ParamStore.load(prev / "checkpoint.bin"))
        offset = _read_curve_offset(prev / "curve.csv")
    samples = load_dataset(data, split="train")
    log_lines = [f"ablation {cfg['ablation']}",
                 f"parameters {model.store.num_scalars()}",
                 f"train_samples {len(samples)}"]
    result = train_stage1(samples, model, epochs=cfg["epochs"],
                          seed=cfg["seed"], lr=cfg["lr"],
                          batch_size=cfg["batch_size"],
                          weights=LossWeights1(lambda_v=cfg["lambda_v"]),
                          log=lambda m: log_lines.append(m))
    write_header(out, "train-m2s", cfg, cfg["seed"])
    model.store.save(out / "checkpoint.bin")
    (out / "model.cfg").write_text(model_config_to_text(mcfg))
    curve = result.curve_csv()
    if offset:
        rows = curve.strip().splitlines()
        shifted = [rows[0]] + [
            f"{int(r.split(',', 1)[0]) + offset},{r.split(',', 1)[1]}"
            for r in rows[1:]]
        prev_rows = (Path(cfg["resume"]) / "curve.csv").read_text().strip()
        curve = prev_rows + "\n" + "\n".join(shifted[1:]) + "\n"
    (out / "curve.csv").write_text(curve)
    log_lines.append(f"final_l1 {result.final_l1!r}")
    (out / "run.log").write_text("\n".join(log_lines) + "\n")
    print(f"final train L1: {result.final_l1:.5f}  ({out})")
    return EXIT_OK


TRAIN_S2V_OPTIONS = {
    "data": (str, "", "video dataset directory (default <data-root>/videos)"),
    "out": (str, "", "run directory (default <data-root>/runs/s2v)"),
    "epochs": (int, 60, "training epochs"),
    "seed": (int, 0, "training seed"),
    "lr": (float, 1e-3, "learning rate"),
    "warmup": (int, -1, "epochs before regularizers activate (-1 = half)"),
    "ablation": (str, "s2-1", "run label: s2-1..s2-4 or full"),
}


def cmd_train_s2v(args) -> int:
    cfg = _resolve(args, TRAIN_S2V_OPTIONS)
    if cfg["ablation"] not in S2_ABLATIONS:
        raise InputError(f"unknown ablation {cfg['ablation']!r}; "
                         f"pick from {sorted(S2_ABLATIONS)}")
    data = Path(cfg["data"]) if cfg["data"] else data_root() / "videos"
    if not (data / "index.csv").exists():
        raise InputError(f"no video dataset at {data} "
                         f"(run `dancesynth synth --videos` first)")
    out = Path(cfg["out"]) if cfg["out"] else data_root() / "runs" / "s2v"
    use_fsr, use_bsr = S2_ABLATIONS[cfg["ablation"]]
    clips = load_video_dataset(data, split="train")
    G = ToyGenerator(seed=cfg["seed"])
    log_lines = [f"ablation {cfg['ablation']}",
                 f"parameters {G.store.num_scalars()}",
                 f"train_clips {len(clips)}"]
    result = train_stage2(clips, G, epochs=cfg["epochs"], seed=cfg["seed"],
                          use_fsr=use_fsr, use_bsr=use_bsr, lr=cfg["lr"],
                          warmup=None if cfg["warmup"] < 0 else cfg["warmup"],
                          log=lambda m: log_lines.append(m))
    write_header(out, "train-s2v", cfg, cfg["seed"])
    G.store.save(out / "checkpoint.bin")
    (out / "model.cfg").write_text(f"size={G.size}\n")
    (out / "curve.csv").write_text(result.curve_csv())
    log_lines.append(f"final_l1 {result.final_l1!r}")
    (out / "run.log").write_text("\n".join(log_lines) + "\n")
    print(f"final train L1: {result.final_l1:.5f}  ({out})")
    return EXIT_OK


GENERATE_OPTIONS = {
    "audio": (str, "", "input wav file"),
    "features": (str, "", "input feature csv (alternative to --audio)"),
    "checkpoint": (str, "", "stage-1 run directory"),
    "out": (str, "", "output directory (default <data-root>/generated)"),
    "k": (int, 1, "number of noise samples"),
    "seeds": (str, "", "comma-separated noise seeds (default 0..k-1)"),
}


def cmd_generate(args) -> int:
    cfg = _resolve(args, GENERATE_OPTIONS)
    if bool(cfg["audio"]) == bool(cfg["features"]):
        raise InputError("provide exactly one of --audio or --features")
    if not cfg["checkpoint"]:
        raise InputError("--checkpoint is required")
    if cfg["k"] < 1:
        raise InputError("k must be >= 1")
    model = _load_generator(Path(cfg["checkpoint"]))
    if cfg["audio"]:
        feats = clip_features(load_wav(cfg["audio"]))
    else:
        feats = load_feature_csv(cfg["features"])
    if feats.ndim != 2 or feats.shape[1] != FEATURE_DIM:
        raise InputError(f"feature track must be (F, {FEATURE_DIM}), "
                         f"got {feats.shape}")
    seeds = ([int(s) for s in cfg["seeds"].split(",")] if cfg["seeds"]
             else list(range(cfg["k"])))
    if len(seeds) != cfg["k"]:
        raise InputError(f"{len(seeds)} seeds for k={cfg['k']}")
    out = Path(cfg["out"]) if cfg["out"] else data_root() / "generated"
    out.mkdir(parents=True, exist_ok=True)
    if cfg["k"] == 1:
        z = np.random.default_rng(seeds[0]).standard_normal(model.cfg.h_z)
        sequences = [SkeletonSequence(model.generate(feats, z))]
    else:
        sequences = sample_multimodal(model, feats, cfg["k"], seeds)
    for seed, seq in zip(seeds, sequences):
        save_skeleton_text(out / f"skeleton_{seed:04d}.txt", seq)
    write_header(out, "generate", cfg, seeds[0])
    print(f"wrote {len(sequences)} skeleton file(s) with F={sequences[0].F} to {out}")
    return EXIT_OK


RENDER_OPTIONS = {
    "skeletons": (str, "", "skeleton text file or directory of them"),
    "conditional": (str, "", "conditional image (binary ppm)"),
    "checkpoint": (str, "", "stage-2 run directory"),
    "out": (str, "", "output directory (default <data-root>/rendered)"),
}


def cmd_render(args) -> int:
    cfg = _resolve(args, RENDER_OPTIONS)
    for key in ("skeletons", "conditional", "checkpoint"):
        if not cfg[key]:
            raise InputError(f"--{key} is required")
    ckpt = Path(cfg["checkpoint"])
    if not (ckpt / "checkpoint.bin").exists():
        raise InputError(f"missing checkpoint artifact: {ckpt / 'checkpoint.bin'}")
    size = 32
    mc = ckpt / "model.cfg"
    if mc.exists():
        size = int(dict(l.split("=") for l in mc.read_text().split()).get("size", 32))
    G = ToyGenerator(size=size, seed=0)
    G.store.load_values(ParamStore.load(ckpt / "checkpoint.bin"))
    I0 = load_ppm(cfg["conditional"])
    src = Path(cfg["skeletons"])
    paths = sorted(src.glob("skeleton*.txt")) if src.is_dir() else [src]
    if not paths:
        raise InputError(f"no skeleton files under {src}")
    out = Path(cfg["out"]) if cfg["out"] else data_root() / "rendered"
    for p in paths:
        clip = infer_video(G, I0, load_skeleton_text(p))
        save_video_dir(out / p.stem, clip)
    write_header(out, "render", cfg, 0)
    print(f"rendered {len(paths)} video(s) to {out}")
    return EXIT_OK


EVAL_OPTIONS = {
    "generated": (str, "", "directory of generated skeleton .txt files"),
    "reference": (str, "", "directory of reference skeleton .txt files"),
    "out": (str, "", "report directory (default <data-root>/eval)"),
}


def _load_skeleton_dir(path: Path) -> list[SkeletonSequence]:
    files = sorted(Path(path).rglob("skeleton*.txt"))
    if not files:
        files = sorted(Path(path).glob("*.txt"))
    if not files:
        raise InputError(f"no skeleton files under {path}")
    return [load_skeleton_text(f) for f in files]


def cmd_eval(args) -> int:
    cfg = _resolve(args, EVAL_OPTIONS)
    for key in ("generated", "reference"):
        if not cfg[key]:
            raise InputError(f"--{key} is required")
    gen = _load_skeleton_dir(Path(cfg["generated"]))
    ref = _load_skeleton_dir(Path(cfg["reference"]))
    report = evaluate_sets(gen, ref)
    out = Path(cfg["out"]) if cfg["out"] else data_root() / "eval"
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(report.to_text())
    (out / "report.csv").write_text(
        MetricReport.csv_header() + "\n" + report.to_csv_row() + "\n")
    write_header(out, "eval", cfg, 0)
    print(report.to_text(), end="")
    return EXIT_OK


# -- verification suite -----------------------------------------------------------


def _verify_scan_equivalence(rng, n_instances=50) -> None:
    for _ in range(n_instances):
        L = int(rng.integers(2, 130))
        h = int(rng.integers(1, 9))
        n = int(rng.integers(1, 9))
        store = ParamStore()
        p = init_ssm_params(store, "v", h, n, rng)
        x = Tensor(rng.standard_normal((L, h)))
        with T.no_grad():
            ys = selective_scan_sequential(ScanSequence(x), p)
            yp = selective_scan_parallel(ScanSequence(x), p)
        scale = max(float(np.abs(ys.data).max()), 1e-12)
        if float(np.abs(ys.data - yp.data).max()) / scale > 1e-10:
            raise VerificationError(
                f"scan equivalence violated at L={L}, h={h}, n={n}")


def _verify_duality(rng, n_instances=10) -> None:
    for _ in range(n_instances):
        L = int(rng.integers(2, 65))
        h = int(rng.integers(1, 9))
        store = ParamStore()
        p = init_ssm_params(store, "v", h, int(rng.integers(1, 5)), rng)
        x = Tensor(rng.standard_normal((L, h)))
        with T.no_grad():
            back = selective_scan_sequential(
                ScanSequence(x, reverse_ordering(L)), p)
            fwd_rev = selective_scan_sequential(
                ScanSequence(Tensor(x.data[::-1].copy())), p)
        if not np.array_equal(back.data, fwd_rev.data[::-1]):
            raise VerificationError(f"reverse-scan duality violated at L={L}")


def _verify_gradients(rng) -> None:
    store = ParamStore()
    p = init_ssm_params(store, "v", 3, 2, rng)
    store.add("x", rng.standard_normal((6, 3)))
    names = ("a_log", "wd", "bd", "wb", "bb", "wc", "bc", "d")
    from .scan import SelectiveSsmParams
    def fn():
        pp = SelectiveSsmParams(*[store[f"v.{k}"] for k in names])
        return selective_scan_parallel(ScanSequence(store["x"]), pp).sum()
    err = grad_check(fn, store.tensors())
    if err > 1e-4:
        raise VerificationError(f"scan gradient check failed: {err:.2e}")


def _verify_metric_oracles() -> None:
    # 1-D Fréchet closed form: (mu_a - mu_b)^2 + (sd_a - sd_b)^2
    from .metrics import GaussianStats
    a = GaussianStats(np.array([1.0]), np.array([[4.0]]))
    b = GaussianStats(np.array([-2.0]), np.array([[9.0]]))
    expected = (1.0 - -2.0) ** 2 + (2.0 - 3.0) ** 2
    if abs(frechet_distance(a, b) - expected) > 1e-12:
        raise VerificationError("1-D Fréchet closed form mismatch")
    # self-evaluation is zero
    vecs = np.random.default_rng(0).standard_normal((20, 4))
    s = gaussian_stats(vecs)
    if abs(frechet_distance(s, s)) > 1e-9:
        raise VerificationError("self Fréchet distance nonzero")
    # beat kernel: one 0.1 s gap -> exp(-0.5)
    _, _, bc = beat_scores(np.array([1.0]), np.array([11]), fps=10.0)
    if abs(bc - float(np.exp(-0.5))) > 1e-12:
        raise VerificationError("beat kernel value mismatch")


VERIFY_CHECKS = (
    ("scan-equivalence", lambda rng: _verify_scan_equivalence(rng)),
    ("reverse-duality", lambda rng: _verify_duality(rng)),
    ("scan-gradients", lambda rng: _verify_gradients(rng)),
    ("metric-oracles", lambda rng: _verify_metric_oracles()),
)


def cmd_verify(args) -> int:
    failures = 0
    for name, check in VERIFY_CHECKS:
        rng = np.random.default_rng(0)
        try:
            check(rng)
        except VerificationError as exc:
            failures += 1
            print(f"FAIL {name}: {exc}")
        else:
            print(f"PASS {name}")
    if failures:
        raise VerificationError(f"{failures} verification check(s) failed")
    return EXIT_OK


BENCH_OPTIONS = {
    "out": (str, "", "csv output path (default stdout only)"),
    "max_len": (int, 4096, "largest sequence length"),
    "repeats": (int, 3, "timing repeats per point"),
}


def cmd_bench(args) -> int:
    cfg = _resolve(args, BENCH_OPTIONS)
    lengths = [256]
    while lengths[-1] < cfg["max_len"]:
        lengths.append(lengths[-1] * 2)
    rows = bench_scan(lengths, repeats=cfg["repeats"])
    csv = bench_rows_to_csv(rows)
    print(csv, end="")
    for impl in ("sequential", "parallel", "attention"):
        print(f"exponent {impl}: {fit_exponent(rows, impl):.3f}")
    if cfg["out"]:
        Path(cfg["out"]).parent.mkdir(parents=True, exist_ok=True)
        Path(cfg["out"]).write_text(csv)
    return EXIT_OK


# -- entry point ------------------------------------------------------------------


_COMMANDS = {
    "synth": (cmd_synth, SYNTH_OPTIONS, "write a synthetic dataset"),
    "train-m2s": (cmd_train_m2s, TRAIN_M2S_OPTIONS,
                  "train the music-to-skeleton generator"),
    "train-s2v": (cmd_train_s2v, TRAIN_S2V_OPTIONS,
                  "train the skeleton-to-video generator"),
    "generate": (cmd_generate, GENERATE_OPTIONS,
                 "generate skeleton sequences from music"),
    "render": (cmd_render, RENDER_OPTIONS,
               "render skeleton sequences to toy videos"),
    "eval": (cmd_eval, EVAL_OPTIONS, "evaluate generated against reference"),
    "verify": (cmd_verify, {}, "run the invariant verification suite"),
    "bench": (cmd_bench, BENCH_OPTIONS, "benchmark scan scaling"),
}


def build_parser() -> _Parser:
    parser = _Parser(prog="dancesynth",
                     description="music-guided dance synthesis toolkit")
    parser.add_argument("--version", action="version",
                        version=f"dancesynth {__version__}")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)
    for name, (_, options, help_text) in _COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None,
                       help="flat key=value config file")
        _add_options(p, options)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = _COMMANDS[args.command][0]
    try:
        return handler(args)
    except (InputError, ConfigurationError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except VerificationError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFICATION
    except Exception as exc:   # runtime failures map to a distinct code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
