"""Input corruption for masked-prediction pretraining.

Audio frames inside the mask are replaced with a learned embedding; video
mask spans are substituted with other segments of the same clip; modality
dropout zeroes one feature stream per example. Mask cardinality is exact:
|M| = floor(fraction * T) on every draw, never just in expectation.
"""

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .tensor import Tensor


@dataclass
class MaskingConfig:
    audio_fraction: float = 0.30
    video_fraction: float = 0.80
    p_maska: float = 1.0   # probability the audio stream is corrupted at all
    p_maskv: float = 1.0
    mean_span_length: int = 5

    def __post_init__(self):
        for f in (self.audio_fraction, self.video_fraction):
            if not 0.0 <= f <= 1.0:
                raise ValueError(f"mask fraction {f} outside [0, 1]")
        if self.mean_span_length < 1:
            raise ValueError("mean_span_length must be >= 1")


@dataclass
class DropoutConfig:
    p_m: float = 0.5   # probability both modalities are kept
    p_a: float = 0.5   # probability audio is the survivor given one modality

    def __post_init__(self):
        if not (0.0 <= self.p_m <= 1.0 and 0.0 <= self.p_a <= 1.0):
            raise ValueError("dropout probabilities must lie in [0, 1]")


@dataclass
class MaskPlan:
    """The sampled corruption for one example."""
    audio_indices: np.ndarray           # sorted int64
    video_spans: list                   # [(start, length), ...]
    dropout_state: str                  # both | audio_only | video_only
    donor_overlapped: bool = False

    @property
    def video_indices(self):
        if not self.video_spans:
            return np.array([], dtype=np.int64)
        return np.concatenate([np.arange(s, s + l) for s, l in self.video_spans]).astype(np.int64)

    def union_indices(self, T_len):
        mask = np.zeros(T_len, dtype=bool)
        mask[self.audio_indices] = True
        vi = self.video_indices
        if len(vi):
            mask[vi] = True
        return np.nonzero(mask)[0]

    def serialize(self):
        def runs(idx):
            if len(idx) == 0:
                return ""
            parts = []
            start = prev = int(idx[0])
            for i in idx[1:]:
                i = int(i)
                if i == prev + 1:
                    prev = i
                    continue
                parts.append(f"{start}-{prev}")
                start = prev = i
            parts.append(f"{start}-{prev}")
            return ",".join(parts)

        return f"audio:{runs(self.audio_indices)} video:{runs(np.sort(self.video_indices))} state:{self.dropout_state}"


def _span_lengths(total, mean_span, g):
    """Split a budget into geometric span lengths (mean `mean_span`)."""
    lengths = []
    remaining = total
    p = 1.0 / mean_span
    while remaining > 0:
        L = int(g.geometric(p))
        lengths.append(min(L, remaining))
        remaining -= lengths[-1]
    return lengths


def sample_mask(T_len, fraction, mean_span_length, rng):
    """Sorted index set of exactly floor(fraction*T) indices, formed from
    non-overlapping contiguous spans with geometric lengths."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction {fraction} outside [0, 1]")
    if T_len < 1:
        raise ValueError("sequence length must be >= 1")
    total = int(np.floor(fraction * T_len))
    if total == 0:
        return np.array([], dtype=np.int64)
    g = rng.generator()
    free = np.ones(T_len, dtype=bool)
    chosen = np.zeros(T_len, dtype=bool)
    for L in _span_lengths(total, mean_span_length, g):
        placed = 0
        while placed < L:
            # gaps of free positions
            idx = np.nonzero(free)[0]
            breaks = np.nonzero(np.diff(idx) > 1)[0]
            starts = np.concatenate([[0], breaks + 1])
            ends = np.concatenate([breaks, [len(idx) - 1]])
            gaps = [(idx[s], idx[e] - idx[s] + 1) for s, e in zip(starts, ends)]
            want = L - placed
            fitting = [(s, ln) for s, ln in gaps if ln >= want]
            if fitting:
                gs, gl = fitting[int(g.integers(0, len(fitting)))]
                start = gs + int(g.integers(0, gl - want + 1))
                take = want
            else:
                # no gap fits: fill the largest gap and continue with the rest
                gs, gl = max(gaps, key=lambda it: it[1])
                start, take = gs, gl
            chosen[start : start + take] = True
            free[start : start + take] = False
            placed += take
    out = np.nonzero(chosen)[0].astype(np.int64)
    assert len(out) == total
    return out


def indices_to_spans(indices):
    spans = []
    if len(indices) == 0:
        return spans
    start = prev = int(indices[0])
    for i in indices[1:]:
        i = int(i)
        if i == prev + 1:
            prev = i
            continue
        spans.append((start, prev - start + 1))
        start = prev = i
    spans.append((start, prev - start + 1))
    return spans


def corrupt_audio(audio, mask_indices, embed):
    """Replace masked rows with the learned embedding; gradient reaches it.

    audio: Tensor or array (T, D); embed: Tensor (D,).
    """
    a = audio if isinstance(audio, Tensor) else Tensor(np.asarray(audio, dtype=np.float32))
    T_len = a.shape[0]
    keep = np.ones((T_len, 1), dtype=a.dtype)
    if len(mask_indices):
        keep[np.asarray(mask_indices, dtype=np.int64)] = 0.0
    keep_t = Tensor(keep)
    fill_t = Tensor(1.0 - keep)
    return a * keep_t + T.reshape(embed, (1, -1)) * fill_t


def corrupt_video(video, spans, rng):
    """Substitute each masked span with a same-length segment of the same
    clip (uniform random start). Returns (corrupted copy, donor_overlapped)."""
    v = np.array(video, copy=True)
    T_len = v.shape[0]
    g = rng.generator()
    overlapped = False
    for start, length in spans:
        if length > T_len:
            raise ValueError(f"span length {length} exceeds clip length {T_len}")
        donor = int(g.integers(0, T_len - length + 1))
        if not (donor + length <= start or donor >= start + length):
            overlapped = True
        v[start : start + length] = video[donor : donor + length]
    return v, overlapped


def _draw_state(cfg, g):
    if g.random() < cfg.p_m:
        return "both"
    return "audio_only" if g.random() < cfg.p_a else "video_only"


def apply_dropout_state(f_a, f_v, state):
    """Zero the dropped feature stream (graph-preserving multiply by 0)."""
    if state == "audio_only":
        f_v = f_v * 0.0
    elif state == "video_only":
        f_a = f_a * 0.0
    elif state != "both":
        raise ValueError(f"unknown dropout state {state!r}")
    return f_a, f_v


def modality_dropout(f_a, f_v, cfg, rng):
    """One draw per example: keep both (p_m), else keep audio (p_a) or video."""
    if f_a.shape[0] != f_v.shape[0]:
        raise ValueError("audio/video feature lengths differ")
    state = _draw_state(cfg, rng.generator())
    f_a, f_v = apply_dropout_state(f_a, f_v, state)
    return f_a, f_v, state


def sample_plan(T_len, mask_cfg, drop_cfg, rng):
    """Full corruption plan for one example, from independent substreams."""
    g = rng.split("apply").generator()
    audio_idx = np.array([], dtype=np.int64)
    video_spans = []
    if g.random() < mask_cfg.p_maska:
        audio_idx = sample_mask(T_len, mask_cfg.audio_fraction, mask_cfg.mean_span_length,
                                rng.split("audio_mask"))
    if g.random() < mask_cfg.p_maskv:
        vidx = sample_mask(T_len, mask_cfg.video_fraction, mask_cfg.mean_span_length,
                           rng.split("video_mask"))
        video_spans = indices_to_spans(vidx)
    state = _draw_state(drop_cfg, rng.split("dropout").generator())
    return MaskPlan(audio_indices=audio_idx, video_spans=video_spans, dropout_state=state)
