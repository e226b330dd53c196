import numpy as np
import pytest

from segfeat.autodiff import Tape
from segfeat.features import FeatureStats
from segfeat.model import (SegmentalModel, Segmentation, bigram_score,
                           boundary_logits, build_context, context_from_hidden,
                           phoneme_logits, score_segmentation)

from conftest import random_context, small_model, toy_context


def test_segmentation_invariants():
    seg = Segmentation((2, 5, 9), 12)
    assert seg.n_segments == 4
    assert seg.spans() == [(0, 2), (2, 5), (5, 9), (9, 12)]
    assert Segmentation((), 3).spans() == [(0, 3)]
    with pytest.raises(ValueError):
        Segmentation((0,), 5)
    with pytest.raises(ValueError):
        Segmentation((5,), 5)
    with pytest.raises(ValueError):
        Segmentation((3, 3), 5)
    with pytest.raises(ValueError):
        Segmentation((4, 2), 5)


def test_segmentation_times():
    assert Segmentation((10, 25), 40).times(0.01) == pytest.approx([0.1, 0.25])


def test_build_context_shapes_and_prefix():
    model = small_model()
    rng = np.random.default_rng(0)
    feats = rng.normal(size=(5, 8))
    ctx = build_context(model, feats)
    assert ctx.hidden.value.shape == (5, 8)
    assert ctx.unary.value.shape == (5, 1)
    assert ctx.prefix.value.shape == (6, 8)
    assert np.allclose(ctx.prefix_np[-1], ctx.hidden_np.sum(axis=0))
    # exact telescoping, not just approximate
    diffs = ctx.prefix_np[1:] - ctx.prefix_np[:-1]
    assert np.array_equal(diffs, np.cumsum(ctx.hidden_np, axis=0)
                          - np.vstack([np.zeros((1, 8)), np.cumsum(ctx.hidden_np, axis=0)[:-1]]))

    ctx1 = build_context(model, feats[:1])
    assert ctx1.unary.value.shape == (1, 1)
    assert ctx1.prefix.value.shape == (2, 8)


def test_build_context_dimension_mismatch():
    model = small_model()
    with pytest.raises(ValueError):
        build_context(model, np.zeros((4, 9)))


def test_zero_unary_head_gives_bias():
    model = small_model()
    for name in ("unary.1.w", "unary.1.b", "unary.2.w"):
        model.params[name].value[:] = 0.0
    model.params["unary.2.b"].value[:] = -0.75
    ctx = build_context(model, np.random.default_rng(1).normal(size=(6, 8)))
    assert np.allclose(ctx.unary_np, -0.75)


def test_bigram_score_spans(toy_model):
    ctx = toy_context(toy_model, 2)
    assert bigram_score(ctx, toy_model, 0, 2) == pytest.approx(0.5)
    assert bigram_score(ctx, toy_model, 0, 1) == pytest.approx(0.0)
    assert bigram_score(ctx, toy_model, 1, 2) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        bigram_score(ctx, toy_model, 1, 1)
    with pytest.raises(ValueError):
        bigram_score(ctx, toy_model, 0, 3)


def test_bigram_single_frame_and_full_span():
    model = small_model()
    rng = np.random.default_rng(2)
    ctx = random_context(model, 6, rng)
    # e = s+1 consumes exactly hidden[s]
    from segfeat.nn import mlp2_np
    for s in range(6):
        want = mlp2_np(ctx.hidden_np[s:s + 1], *model.head_bigram)[0, 0]
        assert bigram_score(ctx, model, s, s + 1) == pytest.approx(want, abs=1e-12)
    want = mlp2_np(ctx.hidden_np.sum(axis=0, keepdims=True), *model.head_bigram)[0, 0]
    assert bigram_score(ctx, model, 0, 6) == pytest.approx(want, abs=1e-9)


def test_bigram_argument_additivity():
    model = small_model()
    ctx = random_context(model, 7, np.random.default_rng(3))
    pre = ctx.prefix_np
    arg = lambda s, e: pre[e] - pre[s]
    assert np.allclose(arg(0, 3) + arg(3, 7), arg(0, 7))


def test_score_segmentation_toy(toy_model):
    ctx = toy_context(toy_model, 2)
    assert score_segmentation(ctx, toy_model, Segmentation((), 2)) == pytest.approx(0.5)
    assert score_segmentation(ctx, toy_model, Segmentation((1,), 2)) == pytest.approx(1.0)


def test_score_segmentation_tape_matches_plain():
    model = small_model()
    rng = np.random.default_rng(4)
    ctx = random_context(model, 8, rng)
    for bounds in [(), (3,), (1, 4, 6), (2, 5)]:
        seg = Segmentation(bounds, 8)
        plain = score_segmentation(ctx, model, seg)
        taped = score_segmentation(ctx, model, seg, on_tape=True)
        assert plain == pytest.approx(taped.item(), abs=1e-9)
        again = score_segmentation(ctx, model, seg)
        assert plain == again  # bit-identical recomputation


def test_unary_constant_shift_moves_score_by_k_times_c():
    model = small_model()
    rng = np.random.default_rng(5)
    hidden = rng.normal(size=(7, 8))
    tape = Tape()
    ctx = context_from_hidden(tape, model, tape.tensor(hidden))
    segs = [Segmentation(b, 7) for b in [(), (2,), (1, 4), (2, 4, 6)]]
    base = [score_segmentation(ctx, model, s) for s in segs]
    c = 0.37
    model.params["unary.2.b"].value += c
    tape2 = Tape()
    ctx2 = context_from_hidden(tape2, model, tape2.tensor(hidden))
    shifted = [score_segmentation(ctx2, model, s) for s in segs]
    for seg, before, after in zip(segs, base, shifted):
        k = len(seg.boundaries)
        assert after - before == pytest.approx(k * c, abs=1e-9)


def test_unary_shift_preserves_fixed_k_argmax():
    from segfeat.decode import brute_force_segment
    model = small_model()
    rng = np.random.default_rng(6)
    hidden = rng.normal(size=(6, 8)) * 2
    tape = Tape()
    ctx = context_from_hidden(tape, model, tape.tensor(hidden))
    before = {k: brute_force_segment(ctx, model, k)[0] for k in range(1, 7)}
    model.params["unary.2.b"].value += 1.234
    tape2 = Tape()
    ctx2 = context_from_hidden(tape2, model, tape2.tensor(hidden))
    after = {k: brute_force_segment(ctx2, model, k)[0] for k in range(1, 7)}
    assert before == after


def test_phoneme_logits_shapes_and_softmax():
    model = small_model(inventory=tuple("abcde" * 8))  # 40 classes
    ctx = build_context(model, np.random.default_rng(7).normal(size=(7, 8)))
    logits = phoneme_logits(ctx, model)
    assert logits.value.shape == (7, 40)
    z = logits.value
    p = np.exp(z - z.max(axis=1, keepdims=True))
    p /= p.sum(axis=1, keepdims=True)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)

    for name in ("phn.w",):
        model.params[name].value[:] = 0.0
    model.params["phn.b"].value[:] = np.arange(40.0)
    ctx = build_context(model, np.random.default_rng(8).normal(size=(3, 8)))
    logits = phoneme_logits(ctx, model)
    assert np.allclose(logits.value, np.arange(40.0))


def test_phn_head_absent():
    model = small_model()
    ctx = build_context(model, np.zeros((2, 8)))
    with pytest.raises(ValueError):
        phoneme_logits(ctx, model)


def test_boundary_logits():
    model = small_model(with_bin=True)
    ctx = build_context(model, np.random.default_rng(9).normal(size=(5, 8)))
    logits = boundary_logits(ctx, model)
    assert logits.value.shape == (5, 1)
    sig = 1.0 / (1.0 + np.exp(-logits.value))
    assert np.all((sig > 0) & (sig < 1))
    model.params["bin.w"].value[:] = 0.0
    model.params["bin.b"].value[:] = 0.4
    ctx = build_context(model, np.random.default_rng(10).normal(size=(4, 8)))
    assert np.allclose(boundary_logits(ctx, model).value, 0.4)


def test_bin_head_absent():
    model = small_model()
    ctx = build_context(model, np.zeros((2, 8)))
    with pytest.raises(ValueError):
        boundary_logits(ctx, model)


def test_shared_head_mode():
    model = small_model(shared_head=True)
    assert model.head_unary is model.head_bigram
    assert "head.1.w" in model.params
    assert "unary.1.w" not in model.params


def test_mean_bigram_mode():
    model = small_model(mean_bigram=True)
    ctx = random_context(model, 6, np.random.default_rng(11))
    from segfeat.nn import mlp2_np
    want = mlp2_np((ctx.prefix_np[6] - ctx.prefix_np[0])[None, :] / 6.0,
                   *model.head_bigram)[0, 0]
    assert bigram_score(ctx, model, 0, 6) == pytest.approx(want, abs=1e-12)
    taped = bigram_score(ctx, model, 0, 6, on_tape=True)
    assert taped.item() == pytest.approx(want, abs=1e-9)


def test_exclude_end_spans_mode():
    model = small_model(include_end_spans=False)
    ctx = random_context(model, 6, np.random.default_rng(12))
    # single segment: nothing is scored
    assert score_segmentation(ctx, model, Segmentation((), 6)) == 0.0
    # with boundaries: unary terms plus interior spans only
    seg = Segmentation((2, 4), 6)
    want = ctx.unary_np[[2, 4]].sum() + bigram_score(ctx, model, 2, 4)
    assert score_segmentation(ctx, model, seg) == pytest.approx(want, abs=1e-9)
    taped = score_segmentation(ctx, model, Segmentation((), 6), on_tape=True)
    assert taped.item() == 0.0


def test_model_serialization_roundtrip(tmp_path):
    model = small_model(inventory=("a", "b", "c"), with_bin=True, seed=123)
    model.stats = FeatureStats(np.linspace(-1, 1, 43), np.linspace(0.1, 3, 43))
    path = tmp_path / "m.bin"
    model.save(path)
    back = SegmentalModel.load(path)
    assert back.cfg == model.cfg
    assert back.feature_cfg == model.feature_cfg
    assert back.params.names() == model.params.names()
    for name in model.params.names():
        assert np.array_equal(back.params[name].value, model.params[name].value)
    assert np.array_equal(back.stats.mean, model.stats.mean)
    assert np.array_equal(back.stats.std, model.stats.std)
    # byte-identical resave
    path2 = tmp_path / "m2.bin"
    back.save(path2)
    assert path.read_bytes() == path2.read_bytes()


def test_model_load_rejects_garbage(tmp_path):
    path = tmp_path / "x.bin"
    path.write_bytes(b"not a model at all")
    with pytest.raises(ValueError):
        SegmentalModel.load(path)


def test_seeded_init_is_deterministic():
    a = small_model(seed=9)
    b = small_model(seed=9)
    for name in a.params.names():
        assert np.array_equal(a.params[name].value, b.params[name].value)
    c = small_model(seed=10)
    assert any(not np.array_equal(a.params[n].value, c.params[n].value)
               for n in a.params.names())


def test_forget_gate_bias_initialized():
    model = small_model(hidden=4)
    b = model.params["enc.l0.f.b"].value[0]
    assert np.all(b[4:8] == 1.0)
    assert np.all(b[:4] == 0.0)
    assert np.all(b[8:] == 0.0)
