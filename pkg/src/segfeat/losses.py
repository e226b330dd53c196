"""Training objectives: structured hinge plus the PHN and BIN auxiliaries."""

from __future__ import annotations

import numpy as np

from .autodiff import Tape, Tensor
from .decode import dp_two_best
from .model import ScoreContext, SegmentalModel, Segmentation, score_segmentation


def hinge_loss(ctx: ScoreContext, model: SegmentalModel, gold: Segmentation,
               max_seg_frames: int | None = None) -> Tensor:
    """max(0, 1 + score(best competitor) - score(gold)) on the context's tape.

    The competitor is the DP argmax, or the exact runner-up when the argmax
    equals the gold segmentation. Utterances with a single candidate (no
    competitor exists) contribute zero loss.
    """
    if gold.n_frames != ctx.n_frames:
        raise ValueError("gold segmentation length does not match context")
    tape = ctx.tape
    candidates = dp_two_best(ctx, model, max_seg_frames)
    competitor = None
    for seg, _ in candidates:
        if seg != gold:
            competitor = seg
            break
    if competitor is None:
        return tape.scale(tape.tensor(np.zeros(())), 1.0)
    gold_score = score_segmentation(ctx, model, gold, on_tape=True)
    comp_score = score_segmentation(ctx, model, competitor, on_tape=True)
    return tape.relu(tape.add_const(tape.sub(comp_score, gold_score), 1.0))


def frame_labels_from(gold: Segmentation, phonemes) -> np.ndarray:
    """Expand per-segment classes to per-frame labels (length T)."""
    phonemes = list(phonemes)
    if len(phonemes) != gold.n_segments:
        raise ValueError(f"expected {gold.n_segments} segment labels, got {len(phonemes)}")
    lengths = [e - s for s, e in gold.spans()]
    return np.repeat(np.asarray(phonemes), lengths)


def phn_loss(tape: Tape, logits: Tensor, frame_labels) -> Tensor:
    """Mean per-frame negative log-likelihood of the covering segment's class."""
    return tape.softmax_nll(logits, frame_labels)


def bin_loss(tape: Tape, logits: Tensor, gold: Segmentation) -> Tensor:
    """Mean binary cross-entropy against 1 at exact boundary frames, 0 elsewhere."""
    targets = np.zeros(logits.value.shape)
    for b in gold.boundaries:
        targets[b, 0] = 1.0
    return tape.bce_logits(logits, targets)
