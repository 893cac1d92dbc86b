"""Toy video stage: skeleton map rendering oracles, the three generation
strategies, loss composition, training plumbing, video metrics, and the
PPM directory format."""

import numpy as np
import pytest

from dancesynth import tensor as T
from dancesynth.errors import (ConfigurationError, DimensionError, InputError)
from dancesynth.graph import build_graph
from dancesynth.skeleton import SkeletonSequence
from dancesynth.synth import SynthSpec, synth_pair, synth_video
from dancesynth.tensor import Tensor
from dancesynth.video import (LossWeights2, PatchDiscriminator, ToyGenerator,
                              VideoClip, backward_generate, baseline_generate,
                              bsr_loss, flicker, forward_generate, frame_mae,
                              fsr_loss, infer_video, load_ppm, load_video_dir,
                              render_maps, render_skeleton_map, save_ppm,
                              save_video_dir, stage2_loss,
                              static_background_mask, train_stage2)


def _chain3():
    return build_graph(3, [(0, 1), (1, 2)])


def _clips(n=2, F=4, seed=0):
    out = []
    for i in range(n):
        _, seq, _ = synth_pair(SynthSpec(duration_s=1.0, seed=seed + i))
        clip = synth_video(SkeletonSequence(seq.coords[:F]), seed=seed + i)
        out.append(clip)
    return out


# -- rendering oracles ------------------------------------------------------------

def test_render_map_marks_segment_pixels():
    g = _chain3()
    # vertical segment down a pixel-center column (x = (16+0.5)/32)
    x = 16.5 / 32
    coords = np.array([[x, 0.2], [x, 0.5], [x, 0.8]])
    m = render_skeleton_map(coords, g, H=32, W=32)
    assert m.shape == (32, 32, 3)
    assert m.min() >= 0.0 and m.max() <= 1.0
    # pixel centers on the segment carry full intensity in some channel
    assert m[16, 16].max() == 1.0
    # far corner is empty
    assert np.all(m[0, 0] == 0.0)


def test_render_map_y_axis_points_up():
    g = build_graph(2, [(0, 1)])
    top = render_skeleton_map(np.array([[0.5, 0.9], [0.5, 0.95]]), g, H=32, W=32)
    # y near 1 -> rows near 0
    assert top[:8].sum() > 0.0
    assert top[24:].sum() == 0.0


def test_render_map_clips_out_of_range_coords():
    g = build_graph(2, [(0, 1)])
    y = 1.0 - 16.5 / 32   # a pixel-center row
    m = render_skeleton_map(np.array([[-3.0, y], [4.0, y]]), g)
    assert np.isfinite(m).all()
    assert m.max() == 1.0
    with pytest.raises(DimensionError):
        render_skeleton_map(np.zeros((5, 2)), g)


def test_render_maps_stacks_frames():
    _, seq, _ = synth_pair(SynthSpec(duration_s=1.0, seed=1))
    maps = render_maps(seq)
    assert maps.shape == (seq.F, 32, 32, 3)
    # limb groups hit all three channels on the default body
    assert all(maps[0, :, :, c].max() > 0 for c in range(3))


# -- networks and strategies -------------------------------------------------------

def test_generator_shapes_and_range():
    G = ToyGenerator(seed=0)
    rng = np.random.default_rng(0)
    img = Tensor(rng.uniform(0, 1, (32, 32, 3)))
    smap = Tensor(rng.uniform(0, 1, (32, 32, 3)))
    out = G.forward(img, smap)
    assert out.shape == (32, 32, 3)
    assert out.data.min() > 0.0 and out.data.max() < 1.0
    with pytest.raises(ConfigurationError):
        ToyGenerator(size=20)   # not divisible by 8
    with pytest.raises(DimensionError):
        G.forward(Tensor(np.zeros((16, 16, 3))), Tensor(np.zeros((16, 16, 3))))


def test_discriminator_patch_logits_shape():
    D = PatchDiscriminator(seed=0)
    x = Tensor(np.random.default_rng(1).uniform(0, 1, (2, 32, 32, 3)))
    assert D.logits(x).shape == (2, 8, 8, 1)


def test_generation_strategy_frame_counts():
    clip = _clips(1, F=5)[0]
    G = ToyGenerator(seed=0)
    maps = render_maps(clip.skeleton)
    with T.no_grad():
        base = baseline_generate(G, clip.conditional, clip.skeleton, maps)
        fwd = forward_generate(G, base, maps)
        bwd = backward_generate(G, base, maps)
        chained = forward_generate(G, base, maps, chained=True)
    assert base.shape == (5, 32, 32, 3)
    assert fwd.shape == bwd.shape == chained.shape == (4, 32, 32, 3)
    with pytest.raises(InputError):
        forward_generate(G, T.take(base, np.arange(1)), maps[:1])


def test_regularizer_losses_count_and_zero_fixed_point():
    base = Tensor(np.random.default_rng(2).uniform(0, 1, (4, 8, 8, 3)))
    # regenerations equal to the aligned baseline frames -> exactly zero
    fwd = Tensor(base.data[1:].copy())
    bwd = Tensor(base.data[:-1].copy())
    assert fsr_loss(base, fwd).item() == 0.0
    assert bsr_loss(base, bwd).item() == 0.0
    with pytest.raises(DimensionError):
        fsr_loss(base, base)    # must be exactly F-1 frames
    with pytest.raises(DimensionError):
        bsr_loss(base, Tensor(base.data[:2]))


def test_stage2_loss_composition():
    clip = _clips(1, F=3)[0]
    G, D = ToyGenerator(seed=0), PatchDiscriminator(seed=1)
    maps = render_maps(clip.skeleton)
    real = clip.stacked()
    w = LossWeights2(lambda_gan=1.0, lambda_l1=10.0)
    total, base, comps = stage2_loss(G, D, clip.conditional, maps, real,
                                     clip.skeleton, w, use_fsr=True, use_bsr=True)
    expected = comps["Lgan"] + 10.0 * (comps["Ll1"] + comps["Lfsr"] + comps["Lbsr"])
    assert abs(total.item() - expected) < 1e-12
    # disabled regularizers contribute exactly zero
    t2, _, c2 = stage2_loss(G, D, clip.conditional, maps, real,
                            clip.skeleton, w, use_fsr=False, use_bsr=False)
    assert c2["Lfsr"] == 0.0 and c2["Lbsr"] == 0.0
    assert abs(t2.item() - (c2["Lgan"] + 10.0 * c2["Ll1"])) < 1e-12
    with pytest.raises(ConfigurationError):
        LossWeights2(lambda_gan=-1.0)


def test_train_stage2_decreases_loss_and_is_deterministic():
    clips = _clips(2, F=3)
    res_a = train_stage2(clips, ToyGenerator(seed=3), epochs=4, seed=0)
    res_b = train_stage2(clips, ToyGenerator(seed=3), epochs=4, seed=0)
    assert res_a.final_l1 == res_b.final_l1
    assert res_a.curve[-1]["Ll1"] < res_a.curve[0]["Ll1"]
    csv = res_a.curve_csv()
    assert csv.splitlines()[0] == "epoch,total,Lgan,Ll1,Lfsr,Lbsr"
    with pytest.raises(InputError):
        train_stage2([], ToyGenerator(seed=0), epochs=1)
    with pytest.raises(ConfigurationError):
        train_stage2(clips, ToyGenerator(seed=0), epochs=1, warmup=-1)


def test_train_stage2_warmup_gates_regularizers():
    clips = _clips(1, F=3)
    res = train_stage2(clips, ToyGenerator(seed=4), epochs=4, seed=0,
                       use_fsr=True, use_bsr=True, warmup=2)
    assert res.curve[0]["Lfsr"] == 0.0 and res.curve[1]["Lbsr"] == 0.0
    assert res.curve[2]["Lfsr"] > 0.0 and res.curve[3]["Lbsr"] > 0.0


def test_infer_video_deterministic_and_discriminator_free():
    clip = _clips(1, F=3)[0]
    G = ToyGenerator(seed=5)
    out_a = infer_video(G, clip.conditional, clip.skeleton)
    out_b = infer_video(G, clip.conditional, clip.skeleton)
    assert isinstance(out_a, VideoClip)
    assert np.array_equal(out_a.stacked(), out_b.stacked())
    assert out_a.F == clip.skeleton.F


# -- metrics -------------------------------------------------------------------

def test_static_background_mask_and_flicker():
    maps = np.zeros((2, 16, 16, 3))
    maps[0, 8, 8, 0] = 1.0
    mask = static_background_mask(maps, margin=2)
    assert not mask[8, 8] and not mask[10, 8] and mask[12, 8]
    frames = np.zeros((3, 16, 16, 3))
    frames[1, 0, 0, 0] = 0.3        # background pixel flickers
    frames[1, 8, 8, 0] = 0.9        # sprite pixel excluded by the mask
    full = flicker(frames)
    masked = flicker(frames, mask)
    expected = 2 * 0.3 / (2 * mask.sum() * 3)
    assert abs(masked - expected) < 1e-12
    assert full > 0.0
    with pytest.raises(InputError):
        flicker(frames[:1])
    with pytest.raises(InputError):
        flicker(frames, np.zeros((16, 16), dtype=bool))


def test_frame_mae_oracle():
    a = np.zeros((2, 4, 4, 3))
    b = np.full((2, 4, 4, 3), 0.25)
    assert frame_mae(a, b) == 0.25
    assert frame_mae(a, a) == 0.0
    with pytest.raises(DimensionError):
        frame_mae(a, b[:1])


# -- file formats ----------------------------------------------------------------

def test_ppm_roundtrip_exact_on_quantized_values(tmp_path):
    img = np.round(np.random.default_rng(3).uniform(0, 1, (8, 6, 3)) * 255) / 255
    path = tmp_path / "x.ppm"
    save_ppm(path, img)
    assert np.allclose(load_ppm(path), img, atol=1e-12)
    bad = tmp_path / "bad.ppm"
    bad.write_bytes(b"P3\n2 2\n255\n")
    with pytest.raises(InputError):
        load_ppm(bad)


def test_video_dir_roundtrip(tmp_path):
    clip = _clips(1, F=3)[0]
    root = save_video_dir(tmp_path / "v", clip)
    back = load_video_dir(root)
    assert back.F == clip.F
    assert np.abs(back.stacked() - clip.stacked()).max() <= 0.5 / 255 + 1e-12
    assert np.array_equal(back.skeleton.coords, clip.skeleton.coords)
    with pytest.raises(InputError):
        load_video_dir(tmp_path / "missing")
