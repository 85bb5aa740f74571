"""Metrics and analysis: WER, speaker-verification EER with cosine scoring,
gradient saliency maps, and the tabular report machinery."""

import os
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .masking import corrupt_video  # noqa: F401  (re-exported for analysis scripts)
from .preprocess import augment, normalize, region_mask
from .rng import RngStream
from .synth import CANVAS, load_record
from .tensor import Tensor, no_grad


# -- word error rate -----------------------------------------------------------

def levenshtein(ref, hyp):
    """Minimum edit distance with unit substitution/deletion/insertion costs."""
    n, m = len(ref), len(hyp)
    prev = list(range(m + 1))
    for i in range(1, n + 1):
        cur = [i] + [0] * m
        for j in range(1, m + 1):
            sub = prev[j - 1] + (ref[i - 1] != hyp[j - 1])
            cur[j] = min(sub, prev[j] + 1, cur[j - 1] + 1)
        prev = cur
    return prev[m]


def wer(reference, hypothesis):
    """(substitutions + deletions + insertions) / |reference|."""
    if len(reference) == 0:
        raise ValueError("reference must be non-empty")
    return levenshtein(list(reference), list(hypothesis)) / len(reference)


def corpus_wer(pairs):
    """Pooled rate over (reference, hypothesis) pairs: total edits / total
    reference words."""
    edits = 0
    words = 0
    for ref, hyp in pairs:
        if len(ref) == 0:
            raise ValueError("reference must be non-empty")
        edits += levenshtein(list(ref), list(hyp))
        words += len(ref)
    return edits / words


# -- speaker verification ---------------------------------------------------------

def cosine_score(e1, e2):
    a = np.asarray(e1, dtype=np.float64)
    b = np.asarray(e2, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine score undefined for a zero vector")
    return float(a @ b / (na * nb))


def eer(genuine_scores, impostor_scores):
    """Equal error rate: sweep thresholds; FAR(t) = fraction of impostor
    scores >= t, FRR(t) = fraction of genuine scores < t; linear
    interpolation between adjacent achievable operating points."""
    g = np.sort(np.asarray(genuine_scores, dtype=np.float64))
    i = np.sort(np.asarray(impostor_scores, dtype=np.float64))
    if len(g) == 0 or len(i) == 0:
        raise ValueError("both score lists must be non-empty")
    # candidate thresholds: all scores plus sentinels outside the range
    lo = min(g[0], i[0]) - 1.0
    hi = max(g[-1], i[-1]) + 1.0
    ts = np.unique(np.concatenate([[lo], g, i, [hi]]))
    far = (len(i) - np.searchsorted(i, ts, side="left")) / len(i)   # P(imp >= t)
    frr = np.searchsorted(g, ts, side="left") / len(g)              # P(gen < t)
    diff = far - frr
    for k in range(len(ts) - 1):
        d0, d1 = diff[k], diff[k + 1]
        if d0 == 0.0:
            return float(far[k])
        if d0 > 0.0 >= d1 or d0 < 0.0 <= d1:
            # interpolate between the two operating points
            denom = (far[k + 1] - far[k]) - (frr[k + 1] - frr[k])
            s = d0 / -denom if denom != 0.0 else 0.0
            return float(far[k] + s * (far[k + 1] - far[k]))
    return float(far[-1]) if abs(diff[-1]) < abs(diff[0]) else float(far[0])


def make_trials(embeddings, speaker_of, seed=0):
    """Genuine = every same-speaker pair; impostor = an equal count of
    seeded random cross-speaker pairs. Returns (genuine, impostor) scores."""
    ids = sorted(embeddings)
    genuine = []
    cross = []
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            pair = (ids[a], ids[b])
            if speaker_of[pair[0]] == speaker_of[pair[1]]:
                genuine.append(pair)
            else:
                cross.append(pair)
    if not genuine or not cross:
        raise ValueError("trial list needs both same-speaker and cross-speaker pairs")
    g = RngStream(seed, ("trials",)).fresh()
    take = min(len(genuine), len(cross))
    impostor = [cross[k] for k in g.choice(len(cross), size=take, replace=False)]
    gs = [cosine_score(embeddings[a], embeddings[b]) for a, b in genuine]
    is_ = [cosine_score(embeddings[a], embeddings[b]) for a, b in impostor]
    return gs, is_


# -- lipreading evaluation ----------------------------------------------------------

def transcribe(enc, dec, cache, uid, max_len=12):
    clip = normalize(augment(cache.clip(uid), train_mode=False))
    with no_grad():
        f_v = enc.encode_video(Tensor(clip))
        f_a = enc.encode_audio(Tensor(cache.audio(uid))) * 0.0  # video-only
        ctx, _ = enc.encoder_forward(enc.fuse(f_a, f_v))
    return dec.greedy_decode(ctx, max_len=max_len)


def eval_wer(enc, dec, cache, records, max_len=12):
    """Pooled WER of greedy decoding over the given records."""
    pairs = []
    for r in sorted(records, key=lambda r: r.utterance_id):
        hyp = transcribe(enc, dec, cache, r.utterance_id, max_len=max_len)
        pairs.append((cache.transcript(r.utterance_id), hyp))
    return corpus_wer(pairs), pairs


# -- saliency --------------------------------------------------------------------------

def saliency_map(enc, dec, cache, uid):
    """|d sum log p(target_t) / d pixel| over the eval input path, per-frame
    max-normalized to [0, 1]. Returns (T, 96, 96) float32."""
    clip_u8 = cache.clip(uid)
    x = Tensor(normalize(clip_u8), requires_grad=True)
    margin = (clip_u8.shape[1] - 88) // 2
    cropped = x[:, margin : margin + 88, margin : margin + 88]
    f_v = enc.encode_video(cropped)
    f_a = enc.encode_audio(Tensor(cache.audio(uid))) * 0.0
    ctx, _ = enc.encoder_forward(enc.fuse(f_a, f_v))
    word_ids = dec.token_ids(cache.transcript(uid))
    logits = dec.forward([dec.bos_id] + word_ids, ctx)
    nll = T.softmax_cross_entropy(logits, word_ids + [dec.eos_id])
    score = -T.tsum(nll)  # sum of teacher-forced target log-probabilities
    score.backward()
    sal = np.abs(x.grad)
    peaks = sal.max(axis=(1, 2), keepdims=True)
    peaks[peaks == 0.0] = 1.0
    return (sal / peaks).astype(np.float32)


def mouth_mass_fraction(sal, utterance, input_mode):
    """Fraction of saliency mass inside the analytic mouth bounding box
    (reported, not asserted; face view only needs the resize scale)."""
    if input_mode != "face":
        raise ValueError("mouth-mass reporting is defined for the face view")
    total = sal.sum()
    if total == 0:
        return 0.0
    scale = sal.shape[-1] / CANVAS
    inside = 0.0
    for t in range(sal.shape[0]):
        mouth = utterance.landmarks[t][48:68] * scale
        x0, x1 = int(np.floor(mouth[:, 0].min())) - 2, int(np.ceil(mouth[:, 0].max())) + 2
        y0, y1 = int(np.floor(mouth[:, 1].min())) - 2, int(np.ceil(mouth[:, 1].max())) + 2
        inside += sal[t, max(y0, 0) : y1, max(x0, 0) : x1].sum()
    return float(inside / total)


def write_saliency(out_dir, sal, pgm=False):
    from .avt1 import write_avt1
    os.makedirs(out_dir, exist_ok=True)
    write_avt1(os.path.join(out_dir, "saliency.avt1"), sal)
    if pgm:
        for t in range(sal.shape[0]):
            frame = np.clip(np.round(sal[t] * 255), 0, 255).astype(np.uint8)
            with open(os.path.join(out_dir, f"frame{t:04d}.pgm"), "wb") as f:
                f.write(f"P5\n{frame.shape[1]} {frame.shape[0]}\n255\n".encode())
                f.write(frame.tobytes())


# -- reports ---------------------------------------------------------------------------

@dataclass
class EvalReport:
    rows: list = field(default_factory=list)  # (condition, metric, value, n, seed)

    def add(self, condition, metric, value, n, seed):
        if metric == "eer" and not 0.0 <= value <= 1.0:
            raise ValueError(f"EER {value} outside [0, 1]")
        if metric == "wer" and value < 0.0:
            raise ValueError(f"WER {value} negative")
        self.rows.append((condition, metric, float(value), int(n), int(seed)))

    def serialize(self):
        return "\n".join(f"{c}\t{m}\t{v:.6f}\t{n}\t{s}" for c, m, v, n, s in self.rows) + "\n"

    @staticmethod
    def parse(text):
        rep = EvalReport()
        for line in text.strip().splitlines():
            if not line.strip():
                continue
            c, m, v, n, s = line.split("\t")
            rep.rows.append((c, m, float(v), int(n), int(s)))
        return rep

    def table(self):
        header = ("condition", "metric", "value", "n", "seed")
        body = [(c, m, f"{v:.4f}", str(n), str(s)) for c, m, v, n, s in self.rows]
        widths = [max(len(r[i]) for r in [header] + body) for i in range(5)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
        lines += ["  ".join(f.ljust(w) for f, w in zip(row, widths)) for row in body]
        return "\n".join(lines)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.serialize())

    @staticmethod
    def load(path):
        with open(path, encoding="utf-8") as f:
            return EvalReport.parse(f.read())


TABLE3_LADDER = [
    ("face", ""),
    ("-eye", "top=0.30"),
    ("-eye-neck", "top=0.30,bottom=0.25"),
    ("-eye-neck-side", "top=0.30,bottom=0.25,side=0.275"),
]


def ablation_report(run_condition, seed, ladder=TABLE3_LADDER):
    """Run the full train/eval cycle per region-mask condition.

    run_condition(condition_name, region_spec_text) -> (wer, n) must apply
    the mask during both pretraining and finetuning.
    """
    rep = EvalReport()
    for name, spec_text in ladder:
        value, n = run_condition(name, spec_text)
        rep.add(name, "wer", value, n, seed)
    return rep
