"""Corpus handling: annotations, manifests, long-utterance splitting, and a
seeded synthetic corpus generator for desk-scale end-to-end runs."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import Waveform, read_wav, write_wav
from .features import FeatureConfig, FeatureStats, FrameMatrix, assemble_features
from .model import Segmentation

NONSPEECH_SYMBOLS = ("sil", "noise", "iva")
SPLIT_TAGS = ("train", "val", "test")


@dataclass
class Annotation:
    """Contiguous labeled segments of one utterance, in samples."""

    segments: list  # (start_sample, end_sample, symbol)

    def __post_init__(self):
        if not self.segments:
            raise ValueError("annotation must contain at least one segment")
        prev_end = None
        prev_start = -1
        for start, end, _ in self.segments:
            if end <= start:
                raise ValueError(f"segment ({start}, {end}) is empty or reversed")
            if start <= prev_start:
                raise ValueError("segment starts must be strictly increasing")
            if prev_end is not None and start != prev_end:
                raise ValueError(f"segments are not contiguous at sample {start} "
                                 f"(previous ended at {prev_end})")
            prev_start, prev_end = start, end

    @property
    def symbols(self):
        return tuple(sym for _, _, sym in self.segments)


def read_phn(path) -> Annotation:
    """TIMIT-style annotation: one 'start_sample end_sample symbol' per line."""
    segments = []
    with open(path, "r", encoding="ascii") as f:
        for lineno, line in enumerate(f, 1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'start end symbol'")
            segments.append((int(tokens[0]), int(tokens[1]), tokens[2]))
    return Annotation(segments)


def read_ann_csv(path, sample_rate: int) -> Annotation:
    """Seconds-based CSV variant: 'start_s,end_s,symbol' per line."""
    segments = []
    with open(path, "r", encoding="ascii") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'start_s,end_s,symbol'")
            start = int(round(float(parts[0]) * sample_rate))
            end = int(round(float(parts[1]) * sample_rate))
            segments.append((start, end, parts[2].strip()))
    return Annotation(segments)


def write_phn(path, ann: Annotation):
    with open(path, "w", encoding="ascii") as f:
        for start, end, sym in ann.segments:
            f.write(f"{start} {end} {sym}\n")


@dataclass
class ManifestEntry:
    wav_path: Path
    ann_path: Path
    split: str

    def __post_init__(self):
        self.wav_path = Path(self.wav_path)
        self.ann_path = Path(self.ann_path)
        if self.split not in SPLIT_TAGS:
            raise ValueError(f"split tag must be one of {SPLIT_TAGS}, got {self.split!r}")

    @property
    def key(self) -> str:
        return self.wav_path.stem


@dataclass
class CorpusManifest:
    entries: list
    sample_rate: int
    annotation_unit: str = "samples"  # or "seconds"

    def __post_init__(self):
        if self.annotation_unit not in ("samples", "seconds"):
            raise ValueError("annotation_unit must be 'samples' or 'seconds'")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    def split(self, tag: str):
        return [e for e in self.entries if e.split == tag]


def read_manifest(path, sample_rate: int, annotation_unit: str = "samples") -> CorpusManifest:
    """CSV manifest: wav_path,ann_path,split (paths relative to the manifest)."""
    base = Path(path).parent
    entries = []
    with open(path, "r", encoding="utf-8") as f:
        for row in csv.reader(f):
            if not row or row[0].startswith("#"):
                continue
            if len(row) != 3:
                raise ValueError(f"manifest row must be wav,ann,split: {row}")
            wav, ann, split = (c.strip() for c in row)
            entries.append(ManifestEntry(base / wav, base / ann, split))
    if not entries:
        raise ValueError(f"manifest is empty: {path}")
    return CorpusManifest(entries, sample_rate, annotation_unit)


def write_manifest(path, rows):
    """rows: (wav_path, ann_path, split) with paths relative to the manifest."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        for row in rows:
            writer.writerow(row)


@dataclass
class LabeledUtterance:
    key: str
    features: FrameMatrix
    gold: Segmentation
    phonemes: tuple | None = None

    def __post_init__(self):
        if self.phonemes is not None:
            self.phonemes = tuple(self.phonemes)
            if len(self.phonemes) != self.gold.n_segments:
                raise ValueError(f"{self.key}: {len(self.phonemes)} segment labels for "
                                 f"{self.gold.n_segments} segments")


def boundaries_from_annotation(ann: Annotation, shift_samples: int, n_frames: int):
    """Convert segment starts (excluding time 0) to boundary frames.

    Frame index is the nearest frame (round half up). Boundaries that fall
    on frame 0, at/after the last frame, or collapse onto a neighbor merge
    away their zero-length segment.
    """
    bounds = []
    symbols = [ann.segments[0][2]]
    for start, _, sym in ann.segments[1:]:
        frame = int(np.floor(start / shift_samples + 0.5))
        prev = bounds[-1] if bounds else 0
        if frame <= prev or frame >= n_frames:
            # zero-length segment after rounding: its label replaces the
            # label of the segment it collapsed into
            symbols[-1] = sym
        else:
            bounds.append(frame)
            symbols.append(sym)
    return tuple(bounds), tuple(symbols)


def load_utterance(entry: ManifestEntry, cfg: FeatureConfig, manifest: CorpusManifest,
                   stats: FeatureStats | None = None) -> LabeledUtterance:
    wav = read_wav(entry.wav_path)
    if wav.sample_rate != manifest.sample_rate:
        raise ValueError(f"{entry.wav_path}: sample rate {wav.sample_rate} does not "
                         f"match corpus rate {manifest.sample_rate}")
    if manifest.annotation_unit == "seconds" or entry.ann_path.suffix.lower() == ".csv":
        ann = read_ann_csv(entry.ann_path, manifest.sample_rate)
    else:
        ann = read_phn(entry.ann_path)
    feats = assemble_features(wav, cfg, stats)
    bounds, symbols = boundaries_from_annotation(
        ann, cfg.shift_samples(wav.sample_rate), feats.n_frames)
    gold = Segmentation(bounds, feats.n_frames)
    return LabeledUtterance(entry.key, feats, gold, symbols)


def load_corpus(manifest: CorpusManifest, cfg: FeatureConfig,
                stats: FeatureStats | None = None, split: str | None = None):
    entries = manifest.entries if split is None else manifest.split(split)
    return [load_utterance(e, cfg, manifest, stats) for e in entries]


def split_nonspeech(utt: LabeledUtterance, nonspeech=NONSPEECH_SYMBOLS,
                    min_run_ms: float = 100.0, max_lead_ms: float = 20.0):
    """Cut an utterance at long non-speech runs and trim the piece edges.

    Interior non-speech runs of at least min_run_ms are removed (cut points);
    every resulting piece keeps at most max_lead_ms of adjacent non-speech on
    each side. Utterances without phoneme labels pass through unchanged.
    """
    if utt.phonemes is None:
        return [utt]
    shift = utt.features.frame_shift
    t_total = utt.features.n_frames
    min_run = max(1, int(round(min_run_ms / 1000.0 / shift)))
    keep = int(round(max_lead_ms / 1000.0 / shift))
    nonspeech = set(nonspeech)

    spans = utt.gold.spans()
    mask = np.zeros(t_total, dtype=bool)
    for (s, e), sym in zip(spans, utt.phonemes):
        if sym in nonspeech:
            mask[s:e] = True

    # maximal non-speech frame runs
    runs = []
    t = 0
    while t < t_total:
        if mask[t]:
            start = t
            while t < t_total and mask[t]:
                t += 1
            runs.append((start, t))
        else:
            t += 1

    # cuts: every edge run plus interior runs meeting the length threshold
    cuts = [(a, b) for a, b in runs
            if a == 0 or b == t_total or (b - a) >= min_run]

    # each cut run donates a short stub to the piece on either side; stubs
    # never overlap even for runs shorter than twice the cap
    tail_of = {}  # run start -> frames kept by the piece ending there
    lead_of = {}  # run end -> frames kept by the piece starting there
    for a, b in cuts:
        run = b - a
        tail = min(keep, run) if a > 0 else 0
        lead = min(keep, run - tail) if b < t_total else 0
        tail_of[a] = tail
        lead_of[b] = lead

    pieces = []
    pos = 0
    for a, b in cuts + [(t_total, t_total)]:
        if pos < a:
            start = pos - lead_of.get(pos, 0)
            end = a + tail_of.get(a, 0)
            pieces.append((start, end))
        pos = b

    out = []
    for n, (a, b) in enumerate(pieces):
        clipped = [(max(s, a), min(e, b), sym)
                   for (s, e), sym in zip(spans, utt.phonemes)
                   if max(s, a) < min(e, b)]
        bounds = tuple(s - a for s, _, _ in clipped[1:])
        feats = FrameMatrix(utt.features.data[a:b].copy(), shift, utt.features.column_roles)
        key = utt.key if len(pieces) == 1 else f"{utt.key}#{n}"
        out.append(LabeledUtterance(key, feats, Segmentation(bounds, b - a),
                                    tuple(sym for _, _, sym in clipped)))
    return out


@dataclass
class SynthConfig:
    """Synthetic corpus: utterances concatenate class-specific tone textures."""

    n_utterances: int = 100
    segments_range: tuple = (2, 6)
    duration_range: tuple = (0.05, 0.15)  # seconds per segment
    n_classes: int = 4
    noise_level: float = 0.05
    seed: int = 0
    sample_rate: int = 16000

    def __post_init__(self):
        lo, hi = self.segments_range
        if not (1 <= lo <= hi):
            raise ValueError("segments_range must satisfy 1 <= lo <= hi")
        dlo, dhi = self.duration_range
        if not (0 < dlo <= dhi):
            raise ValueError("duration_range must satisfy 0 < lo <= hi")
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes")


def _class_tones(cls: int, nyquist: float):
    """Two tones per class, spread across the band and distinct per class."""
    f1 = 260.0 + 420.0 * cls
    f2 = 1650.0 + 530.0 * cls
    return ((f1 % nyquist, 0.5), (f2 % nyquist, 0.35))


def synth_utterance(cfg: SynthConfig, rng: np.random.Generator):
    """One utterance: (Waveform, Annotation); adjacent segments always differ."""
    lo, hi = cfg.segments_range
    n_segments = int(rng.integers(lo, hi + 1))
    nyquist = cfg.sample_rate / 2.0
    segments = []
    chunks = []
    cursor = 0
    prev_cls = -1
    for _ in range(n_segments):
        if prev_cls < 0:
            cls = int(rng.integers(0, cfg.n_classes))
        else:
            r = int(rng.integers(0, cfg.n_classes - 1))
            cls = r + (1 if r >= prev_cls else 0)
        prev_cls = cls
        dur = rng.uniform(*cfg.duration_range)
        n = max(1, int(round(dur * cfg.sample_rate)))
        t = np.arange(n) / cfg.sample_rate
        x = np.zeros(n)
        for freq, amp in _class_tones(cls, nyquist):
            x += amp * np.sin(2.0 * np.pi * freq * t + rng.uniform(0.0, 2.0 * np.pi))
        x += cfg.noise_level * rng.standard_normal(n)
        chunks.append(0.5 * x)
        segments.append((cursor, cursor + n, f"c{cls}"))
        cursor += n
    wav = Waveform(np.clip(np.concatenate(chunks), -1.0, 1.0), cfg.sample_rate)
    return wav, Annotation(segments)


def synth_corpus(cfg: SynthConfig):
    """Deterministic in-memory corpus: list of (key, Waveform, Annotation)."""
    rng = np.random.default_rng(cfg.seed)
    width = max(4, len(str(cfg.n_utterances)))
    out = []
    for i in range(cfg.n_utterances):
        wav, ann = synth_utterance(cfg, rng)
        out.append((f"utt{i:0{width}d}", wav, ann))
    return out


def write_synth_corpus(items, out_dir, splits) -> Path:
    """Write WAV + .phn files plus a manifest; splits align with items."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for (key, wav, ann), split in zip(items, splits):
        wav_name = f"{key}.wav"
        ann_name = f"{key}.phn"
        write_wav(out_dir / wav_name, wav.samples, wav.sample_rate)
        write_phn(out_dir / ann_name, ann)
        rows.append((wav_name, ann_name, split))
    manifest_path = out_dir / "manifest.csv"
    write_manifest(manifest_path, rows)
    return manifest_path


def write_boundaries_csv(path, times):
    """One 'time_s' header line, then one boundary time (seconds) per line."""
    with open(path, "w", encoding="ascii") as f:
        f.write("time_s\n")
        for t in times:
            f.write(f"{float(t)!r}\n")


def read_boundaries_csv(path):
    times = []
    with open(path, "r", encoding="ascii") as f:
        header = f.readline().strip()
        if header != "time_s":
            raise ValueError(f"expected 'time_s' header in {path}")
        for line in f:
            line = line.strip()
            if line:
                times.append(float(line))
    return times


def write_textgrid(path, times, total_duration: float):
    """Minimal Praat TextGrid with one interval tier split at the boundaries."""
    edges = [0.0] + [float(t) for t in times] + [float(total_duration)]
    lines = [
        'File type = "ooTextFile"',
        'Object class = "TextGrid"',
        "",
        "xmin = 0",
        f"xmax = {float(total_duration)!r}",
        "tiers? <exists>",
        "size = 1",
        "item []:",
        "    item [1]:",
        '        class = "IntervalTier"',
        '        name = "segments"',
        "        xmin = 0",
        f"        xmax = {float(total_duration)!r}",
        f"        intervals: size = {len(edges) - 1}",
    ]
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:]), 1):
        lines += [
            f"        intervals [{i}]:",
            f"            xmin = {a!r}",
            f"            xmax = {b!r}",
            '            text = ""',
        ]
    with open(path, "w", encoding="ascii") as f:
        f.write("\n".join(lines) + "\n")


def split_train_val(items, val_fraction: float = 0.10, seed: int = 0):
    """Seeded shuffle then partition; disjoint and union-preserving."""
    if not items:
        raise ValueError("cannot split an empty set")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(items))
    n_val = int(len(items) * val_fraction)
    if n_val == 0 and val_fraction > 0:
        warnings.warn("validation split is empty at this corpus size", stacklevel=2)
    val_idx = set(order[:n_val].tolist())
    train = [x for i, x in enumerate(items) if i not in val_idx]
    val = [x for i, x in enumerate(items) if i in val_idx]
    return train, val
