"""Segmental scoring model: boundary and segment heads over a BiLSTM encoder.

A segmentation is scored as the sum of a per-boundary score (the unary head
applied to the encoder output at each interior boundary) and a per-segment
score (the bigram head applied to the sum of encoder outputs across the
segment). Prefix sums over the hidden sequence make any segment sum an O(1)
lookup.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import ParameterSet, Tape, Tensor
from .features import FeatureConfig, FeatureStats, FrameMatrix
from .nn import bilstm_encode, init_affine, init_lstm, mlp2, mlp2_np

MODEL_MAGIC = b"SEGFEAT\x00"
MODEL_VERSION = 1


@dataclass(frozen=True)
class Segmentation:
    """Interior boundary frame indices of one utterance, strictly increasing."""

    boundaries: tuple
    n_frames: int

    def __post_init__(self):
        object.__setattr__(self, "boundaries", tuple(int(b) for b in self.boundaries))
        if self.n_frames < 1:
            raise ValueError("n_frames must be >= 1")
        prev = 0
        for b in self.boundaries:
            if not (1 <= b <= self.n_frames - 1):
                raise ValueError(f"boundary {b} outside [1, {self.n_frames - 1}]")
            if b <= prev:
                raise ValueError("boundaries must be strictly increasing")
            prev = b

    @property
    def n_segments(self) -> int:
        return len(self.boundaries) + 1

    def spans(self):
        """Consecutive (start, end) frame spans including the implicit 0 and T."""
        edges = (0,) + self.boundaries + (self.n_frames,)
        return list(zip(edges[:-1], edges[1:]))

    def times(self, frame_shift: float):
        """Interior boundaries in seconds."""
        return [b * frame_shift for b in self.boundaries]


@dataclass
class ModelConfig:
    input_dim: int = 43
    hidden_size: int = 64
    num_layers: int = 2
    shared_head: bool = False
    mean_bigram: bool = False
    include_end_spans: bool = True
    forget_bias: float = 1.0
    seed: int = 0
    inventory: tuple = ()        # phoneme symbols; non-empty iff the PHN head exists
    with_bin: bool = False
    sample_rate: int = 16000

    def __post_init__(self):
        self.inventory = tuple(self.inventory)
        if self.hidden_size < 1 or self.num_layers < 1:
            raise ValueError("hidden_size and num_layers must be >= 1")


class SegmentalModel:
    """All trainable parameters plus the configuration that shaped them."""

    def __init__(self, cfg: ModelConfig, feature_cfg: FeatureConfig,
                 stats: FeatureStats | None = None):
        self.cfg = cfg
        self.feature_cfg = feature_cfg
        self.stats = stats
        self.params = ParameterSet()
        rng = np.random.default_rng(cfg.seed)

        self.layers = []
        in_dim = cfg.input_dim
        for layer in range(cfg.num_layers):
            fw = init_lstm(self.params, f"enc.l{layer}.f", in_dim, cfg.hidden_size,
                           rng, cfg.forget_bias)
            bw = init_lstm(self.params, f"enc.l{layer}.b", in_dim, cfg.hidden_size,
                           rng, cfg.forget_bias)
            self.layers.append((fw, bw))
            in_dim = 2 * cfg.hidden_size

        enc_out = 2 * cfg.hidden_size
        if cfg.shared_head:
            self.head_unary = self._init_head("head", enc_out, rng)
            self.head_bigram = self.head_unary
        else:
            self.head_unary = self._init_head("unary", enc_out, rng)
            self.head_bigram = self._init_head("bigram", enc_out, rng)

        self.head_phn = None
        if cfg.inventory:
            self.head_phn = init_affine(self.params, "phn", enc_out, len(cfg.inventory), rng)
        self.head_bin = None
        if cfg.with_bin:
            self.head_bin = init_affine(self.params, "bin", enc_out, 1, rng)

    def _init_head(self, prefix, in_dim, rng):
        hidden = self.cfg.hidden_size
        w1, b1 = init_affine(self.params, f"{prefix}.1", in_dim, hidden, rng)
        w2, b2 = init_affine(self.params, f"{prefix}.2", hidden, 1, rng)
        return (w1, b1, w2, b2)

    @property
    def phoneme_index(self) -> dict:
        return {sym: i for i, sym in enumerate(self.cfg.inventory)}

    # ----- serialization ----------------------------------------------------

    def save(self, path):
        names = self.params.names()
        manifest = [{"name": n, "shape": list(self.params[n].value.shape)} for n in names]
        stats_present = self.stats is not None
        if stats_present:
            manifest.append({"name": "featstats.mean", "shape": [int(self.stats.mean.size)]})
            manifest.append({"name": "featstats.std", "shape": [int(self.stats.std.size)]})
        fcfg = asdict(self.feature_cfg)
        fcfg["spectral_js"] = list(self.feature_cfg.spectral_js)
        mcfg = asdict(self.cfg)
        mcfg["inventory"] = list(self.cfg.inventory)
        header = {
            "format_version": MODEL_VERSION,
            "model": mcfg,
            "features": fcfg,
            "params": manifest,
        }
        blob = json.dumps(header, sort_keys=True).encode("utf-8")
        with open(path, "wb") as f:
            f.write(MODEL_MAGIC)
            f.write(struct.pack("<I", len(blob)))
            f.write(blob)
            for n in names:
                f.write(np.ascontiguousarray(self.params[n].value, dtype="<f8").tobytes())
            if stats_present:
                f.write(np.ascontiguousarray(self.stats.mean, dtype="<f8").tobytes())
                f.write(np.ascontiguousarray(self.stats.std, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "SegmentalModel":
        with open(path, "rb") as f:
            magic = f.read(len(MODEL_MAGIC))
            if magic != MODEL_MAGIC:
                raise ValueError(f"not a model file: {path}")
            (hlen,) = struct.unpack("<I", f.read(4))
            header = json.loads(f.read(hlen).decode("utf-8"))
            if header.get("format_version") != MODEL_VERSION:
                raise ValueError(f"unsupported model format version in {path}")
            blocks = {}
            for entry in header["params"]:
                shape = tuple(entry["shape"])
                count = int(np.prod(shape)) if shape else 1
                raw = f.read(8 * count)
                if len(raw) != 8 * count:
                    raise ValueError(f"truncated model file: {path}")
                blocks[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()

        fdict = dict(header["features"])
        fdict["spectral_js"] = tuple(fdict["spectral_js"])
        feature_cfg = FeatureConfig(**fdict)
        mdict = dict(header["model"])
        mdict["inventory"] = tuple(mdict["inventory"])
        cfg = ModelConfig(**mdict)
        stats = None
        if "featstats.mean" in blocks:
            stats = FeatureStats(blocks.pop("featstats.mean"), blocks.pop("featstats.std"))
        model = cls(cfg, feature_cfg, stats)
        model.params.set_values(blocks)
        return model


@dataclass
class ScoreContext:
    """Per-utterance cache: hidden states, unary scores, and hidden prefix sums.

    Immutable after construction; the tape it was built on is kept so that
    selected segmentation scores can be re-expressed for backpropagation.
    """

    tape: Tape
    hidden: Tensor   # T x 2H
    unary: Tensor    # T x 1
    prefix: Tensor   # (T+1) x 2H

    @property
    def n_frames(self) -> int:
        return self.hidden.value.shape[0]

    @property
    def hidden_np(self) -> np.ndarray:
        return self.hidden.value

    @property
    def unary_np(self) -> np.ndarray:
        return self.unary.value[:, 0]

    @property
    def prefix_np(self) -> np.ndarray:
        return self.prefix.value


def context_from_hidden(tape: Tape, model: SegmentalModel, hidden: Tensor) -> ScoreContext:
    unary = mlp2(tape, hidden, *model.head_unary)
    prefix = tape.prefix_sum(hidden)
    return ScoreContext(tape=tape, hidden=hidden, unary=unary, prefix=prefix)


def build_context(model: SegmentalModel, features, tape: Tape | None = None) -> ScoreContext:
    """Encode an utterance and cache everything segment scoring needs."""
    data = features.data if isinstance(features, FrameMatrix) else np.asarray(features)
    if data.ndim != 2 or data.shape[1] != model.cfg.input_dim:
        raise ValueError(f"expected T x {model.cfg.input_dim} features, got {data.shape}")
    tape = tape if tape is not None else Tape()
    hidden = bilstm_encode(tape, tape.tensor(data), model.layers)
    return context_from_hidden(tape, model, hidden)


def _span_inputs_np(ctx: ScoreContext, model: SegmentalModel,
                    starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    vec = ctx.prefix_np[ends] - ctx.prefix_np[starts]
    if model.cfg.mean_bigram:
        vec = vec / (ends - starts)[:, None]
    return vec


def bigram_scores_np(ctx: ScoreContext, model: SegmentalModel,
                     starts, ends) -> np.ndarray:
    """Batched gradient-free bigram head evaluation over (start, end) pairs."""
    starts = np.asarray(starts, dtype=np.intp)
    ends = np.asarray(ends, dtype=np.intp)
    return mlp2_np(_span_inputs_np(ctx, model, starts, ends), *model.head_bigram)[:, 0]


def bigram_score(ctx: ScoreContext, model: SegmentalModel, s: int, e: int,
                 on_tape: bool = False):
    """Score of the single segment covering frames [s, e)."""
    if not (0 <= s < e <= ctx.n_frames):
        raise ValueError(f"invalid span ({s}, {e}) for T={ctx.n_frames}")
    if not on_tape:
        return float(bigram_scores_np(ctx, model, [s], [e])[0])
    tape = ctx.tape
    vec = tape.sub(tape.rows(ctx.prefix, [e]), tape.rows(ctx.prefix, [s]))
    if model.cfg.mean_bigram:
        vec = tape.scale(vec, 1.0 / (e - s))
    return tape.sum(mlp2(tape, vec, *model.head_bigram))


def _scored_spans(seg: Segmentation, model: SegmentalModel):
    spans = seg.spans()
    if not model.cfg.include_end_spans:
        spans = spans[1:-1] if len(spans) >= 2 else []
    return spans


def score_segmentation(ctx: ScoreContext, model: SegmentalModel, seg: Segmentation,
                       on_tape: bool = False):
    """Sum of unary scores at interior boundaries plus bigram scores per span.

    Returns a float, or a scalar Tensor on the context's tape when on_tape is
    set (used to backpropagate through the scores of chosen segmentations).
    """
    if seg.n_frames != ctx.n_frames:
        raise ValueError(f"segmentation is for T={seg.n_frames}, context has T={ctx.n_frames}")
    spans = _scored_spans(seg, model)
    bounds = np.asarray(seg.boundaries, dtype=np.intp)

    if not on_tape:
        total = float(ctx.unary_np[bounds].sum()) if bounds.size else 0.0
        if spans:
            starts = np.array([s for s, _ in spans], dtype=np.intp)
            ends = np.array([e for _, e in spans], dtype=np.intp)
            total += float(bigram_scores_np(ctx, model, starts, ends).sum())
        return total

    tape = ctx.tape
    parts = []
    if bounds.size:
        parts.append(tape.sum(tape.rows(ctx.unary, bounds)))
    if spans:
        starts = np.array([s for s, _ in spans], dtype=np.intp)
        ends = np.array([e for _, e in spans], dtype=np.intp)
        vec = tape.sub(tape.rows(ctx.prefix, ends), tape.rows(ctx.prefix, starts))
        if model.cfg.mean_bigram:
            inv = np.broadcast_to(1.0 / (ends - starts)[:, None], vec.value.shape)
            vec = tape.mul(vec, tape.tensor(inv.copy()))
        parts.append(tape.sum(mlp2(tape, vec, *model.head_bigram)))
    if not parts:
        return tape.scale(tape.tensor(np.zeros(())), 1.0)
    total = parts[0]
    for p in parts[1:]:
        total = tape.add(total, p)
    return total


def phoneme_logits(ctx: ScoreContext, model: SegmentalModel) -> Tensor:
    """Per-frame unnormalized phoneme class scores, T x |inventory|."""
    if model.head_phn is None:
        raise ValueError("model has no phoneme head (empty inventory)")
    return ctx.tape.affine(ctx.hidden, *model.head_phn)


def boundary_logits(ctx: ScoreContext, model: SegmentalModel) -> Tensor:
    """Per-frame boundary logit, T x 1."""
    if model.head_bin is None:
        raise ValueError("model has no boundary head")
    return ctx.tape.affine(ctx.hidden, *model.head_bin)
