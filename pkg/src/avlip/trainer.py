"""Training loops: masked cluster prediction with iterative pseudo-label
refinement, seq2seq finetuning with an encoder freeze schedule, the
from-scratch baseline, and speaker-probe training.

Pretraining runs an iteration schedule. Iteration 0 clusters MFCC frames;
later iterations cluster encoder features of the previous checkpoint,
computed with uncorrupted inputs and both modalities active. The input
view (face or lip) and the target view are independent knobs, which is
what separates the three pretraining regimes under study.
"""

import hashlib
import itertools
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .avt1 import read_avt1, write_avt1
from .masking import (DropoutConfig, MaskingConfig, apply_dropout_state,
                      corrupt_audio, corrupt_video, sample_plan)
from .model import AVEncoder, ModelConfig, Seq2SeqDecoder, SpeakerProbe, save_checkpoint
from .nn import Linear, ParamStore
from .optim import Adam
from .preprocess import RegionMaskSpec, augment, face_clip, lip_clip, mfcc, normalize, region_mask
from .rng import RngStream
from .synth import load_record
from .tensor import Tensor, backward, no_grad, softmax_cross_entropy

log = logging.getLogger("avlip.trainer")


class NumericError(FloatingPointError):
    """Training hit a NaN/Inf loss."""


# -- k-means --------------------------------------------------------------------

def kmeans(points, k, max_iters=100, seed=0, n_restarts=8):
    """k-means++ initialization + Lloyd iterations to an assignment fixpoint.

    Keeps the lowest-inertia solution over restarts. Tiny instances
    (C(n, k) small) are seeded exhaustively from every k-subset of points
    instead, which removes restart luck. Inertia is asserted non-increasing
    across Lloyd iterations; an emptied cluster is re-seeded from the
    farthest point (logged).
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points {n}")
    best = None
    if math.comb(n, k) <= 64:
        for combo in itertools.combinations(range(n), k):
            cents, assign, inertia = _lloyd(pts, k, max_iters, None, init=pts[list(combo)])
            if best is None or inertia < best[2] - 1e-12:
                best = (cents, assign, inertia)
    else:
        for r in range(max(1, n_restarts)):
            g = RngStream(seed, ("kmeans", r)).fresh()
            cents, assign, inertia = _lloyd(pts, k, max_iters, g)
            if best is None or inertia < best[2] - 1e-12:
                best = (cents, assign, inertia)
    return best[0], best[1]


def _pairwise_sq(pts, cents):
    d = (pts * pts).sum(1)[:, None] + (cents * cents).sum(1)[None, :] - 2.0 * (pts @ cents.T)
    return np.maximum(d, 0.0)


def _lloyd(pts, k, max_iters, g, init=None):
    n = len(pts)
    if init is not None:
        cents = np.array(init, dtype=np.float64, copy=True)
    else:
        cents = np.empty((k, pts.shape[1]))
        cents[0] = pts[int(g.integers(0, n))]
        d2 = ((pts - cents[0]) ** 2).sum(1)
        for j in range(1, k):
            total = d2.sum()
            if total <= 1e-18:
                idx = int(g.integers(0, n))
            else:
                idx = int(g.choice(n, p=d2 / total))
            cents[j] = pts[idx]
            d2 = np.minimum(d2, ((pts - cents[j]) ** 2).sum(1))

    prev_assign = None
    prev_inertia = np.inf
    assign = np.zeros(n, dtype=np.int64)
    inertia = np.inf
    for _ in range(max_iters):
        d = _pairwise_sq(pts, cents)
        assign = d.argmin(axis=1)
        # re-seed empty clusters from the farthest point before measuring
        empty = np.setdiff1d(np.arange(k), np.unique(assign))
        if len(empty):
            log.info("kmeans: re-seeding %d empty cluster(s)", len(empty))
            for j in empty:
                far = int(d[np.arange(n), assign].argmax())
                cents[j] = pts[far]
                d[:, j] = ((pts - cents[j]) ** 2).sum(1)
            assign = d.argmin(axis=1)
        inertia = float(d[np.arange(n), assign].sum())
        assert inertia <= prev_inertia * (1 + 1e-9) + 1e-12, \
            f"k-means inertia increased: {prev_inertia} -> {inertia}"
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            break
        for j in range(k):
            sel = assign == j
            if sel.any():
                cents[j] = pts[sel].mean(axis=0)
        prev_assign = assign
        prev_inertia = inertia
    return cents, assign, inertia


# -- pseudo labels ------------------------------------------------------------------

@dataclass
class PseudoLabelSet:
    labels: dict                 # utterance_id -> int64 array (T,)
    centroids: np.ndarray
    provenance: dict             # iteration, target_source, target_input_mode, seed

    def n_clusters(self):
        return len(self.centroids)


def save_labels(label_dir, pls):
    os.makedirs(label_dir, exist_ok=True)
    with open(os.path.join(label_dir, "labels.tsv"), "w", encoding="utf-8") as f:
        for uid in sorted(pls.labels):
            z = ",".join(str(int(v)) for v in pls.labels[uid])
            f.write(f"{uid}\t{z}\n")
    write_avt1(os.path.join(label_dir, "centroids.avt1"), pls.centroids.astype(np.float32))
    with open(os.path.join(label_dir, "provenance.txt"), "w", encoding="utf-8") as f:
        for key in sorted(pls.provenance):
            f.write(f"{key} = {pls.provenance[key]}\n")


def load_labels(label_dir):
    path = os.path.join(label_dir, "labels.tsv")
    if not os.path.exists(path):
        raise FileNotFoundError(f"no pseudo labels at {path}")
    labels = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            uid, _, z = line.rstrip("\n").partition("\t")
            labels[uid] = np.array([int(v) for v in z.split(",")], dtype=np.int64)
    centroids = read_avt1(os.path.join(label_dir, "centroids.avt1"))
    prov = {}
    ppath = os.path.join(label_dir, "provenance.txt")
    if os.path.exists(ppath):
        with open(ppath, encoding="utf-8") as f:
            for line in f:
                k, _, v = line.strip().partition("=")
                prov[k.strip()] = v.strip()
    return PseudoLabelSet(labels, centroids, prov)


class ClipCache:
    """Preprocessed 96x96 views (uint8) per utterance, with the region mask
    already applied; built once per run and shared by training/eval."""

    def __init__(self, manifest, input_mode, region_spec=None):
        if input_mode not in ("face", "lip"):
            raise ValueError(f"input_mode must be 'face' or 'lip', got {input_mode!r}")
        self.input_mode = input_mode
        self.region_spec = region_spec
        self.manifest = manifest
        self._clips = {}
        self._audio = {}
        self._transcripts = {}
        self._speakers = {}

    def prepare(self, records):
        for r in records:
            if r.utterance_id not in self._clips:
                self._load(r)

    def _load(self, record):
        utt = load_record(self.manifest, record)
        clip = face_clip(utt) if self.input_mode == "face" else lip_clip(utt)
        if self.region_spec is not None and not self.region_spec.is_empty():
            clip = region_mask(clip, self.region_spec)
        self._clips[record.utterance_id] = clip
        self._audio[record.utterance_id] = utt.audio
        self._transcripts[record.utterance_id] = utt.transcript
        self._speakers[record.utterance_id] = utt.speaker_id

    def clip(self, uid):
        return self._clips[uid]

    def audio(self, uid):
        return self._audio[uid]

    def transcript(self, uid):
        return self._transcripts[uid]

    def speaker(self, uid):
        return self._speakers[uid]


def _parse_target_source(source):
    if source == "mfcc":
        return ("mfcc", None)
    if source.startswith("layer:"):
        return ("layer", int(source.split(":", 1)[1]))
    raise ValueError(f"unknown target source {source!r} (want 'mfcc' or 'layer:<k>')")


def extract_features(enc, cache, uid, layer, dropout_state="both"):
    """Eval-path per-frame encoder features for one utterance (no grad)."""
    clip = normalize(augment(cache.clip(uid), train_mode=False))
    with no_grad():
        _, per_layer = enc.forward_features(Tensor(clip), Tensor(cache.audio(uid)),
                                            dropout_state=dropout_state)
    return per_layer[layer - 1].data


def make_pseudo_labels(manifest, records, source, n_clusters, seed,
                       enc=None, target_cache=None, provenance=None,
                       kmeans_restarts=3, fit_cap=60_000):
    """Cluster per-frame features over the corpus and label every frame.

    source: 'mfcc' or 'layer:<k>' (needs enc + a cache for the target view).
    Deterministic given the seed; utterances pool in sorted-id order.
    """
    kind, layer = _parse_target_source(source)
    ordered = sorted(records, key=lambda r: r.utterance_id)
    feats = {}
    for r in ordered:
        uid = r.utterance_id
        if kind == "mfcc":
            audio = target_cache.audio(uid) if target_cache and uid in target_cache._audio \
                else load_record(manifest, r).audio
            feats[uid] = mfcc(audio).astype(np.float64)
        else:
            if enc is None or target_cache is None:
                raise ValueError("layer targets need a checkpointed encoder and a target-view cache")
            feats[uid] = extract_features(enc, target_cache, uid, layer).astype(np.float64)

    pooled = np.concatenate([feats[r.utterance_id] for r in ordered], axis=0)
    if len(pooled) > fit_cap:
        g = RngStream(seed, ("labelfit",)).fresh()
        sel = np.sort(g.choice(len(pooled), size=fit_cap, replace=False))
        fit_points = pooled[sel]
    else:
        fit_points = pooled
    if n_clusters > len(fit_points):
        raise ValueError(f"n_clusters={n_clusters} exceeds pooled frame count {len(fit_points)}")
    centroids, _ = kmeans(fit_points, n_clusters, max_iters=60, seed=seed, n_restarts=kmeans_restarts)

    labels = {}
    for r in ordered:
        d = _pairwise_sq(feats[r.utterance_id], centroids)
        labels[r.utterance_id] = d.argmin(axis=1).astype(np.int64)
    prov = dict(provenance or {})
    prov.setdefault("target_source", source)
    prov["seed"] = str(seed)
    return PseudoLabelSet(labels, centroids, prov)


# -- pretraining ----------------------------------------------------------------------

@dataclass
class IterationSpec:
    input_mode: str = "face"
    target_source: str = "mfcc"       # mfcc | layer:<k>
    target_input_mode: str = "face"
    steps: int = 700


@dataclass
class PretrainConfig:
    alpha: float = 0.0
    n_clusters: int = 64
    iterations: list = field(default_factory=list)
    batch_size: int = 3
    lr: float = 1e-3
    warmup_steps: int = 60
    max_frames: int = 24              # temporal crop length per training example
    masking: MaskingConfig = field(default_factory=MaskingConfig)
    dropout: DropoutConfig = field(default_factory=DropoutConfig)
    region_spec: RegionMaskSpec = field(default_factory=RegionMaskSpec)
    kmeans_restarts: int = 3

    def validate(self):
        if not self.iterations:
            raise ValueError("pretraining needs at least one iteration")
        if self.iterations[0].target_source != "mfcc":
            raise ValueError("the first pretraining iteration must use mfcc targets")
        for it in self.iterations[1:]:
            _parse_target_source(it.target_source)


def pretrain_loss(logits, labels, audio_mask, video_mask, alpha):
    """Masked-prediction objective: the per-frame NLL summed over the mask
    union, plus alpha times the NLL summed over unmasked frames."""
    t_len = logits.shape[0]
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != t_len:
        raise ValueError("labels length must match logits")
    nll = softmax_cross_entropy(logits, labels)
    masked = np.zeros(t_len, dtype=logits.dtype)
    if len(audio_mask):
        masked[np.asarray(audio_mask, dtype=np.int64)] = 1.0
    if len(video_mask):
        masked[np.asarray(video_mask, dtype=np.int64)] = 1.0
    loss = T.tsum(nll * Tensor(masked))
    if alpha != 0.0:
        loss = loss + alpha * T.tsum(nll * Tensor(1.0 - masked))
    return loss


def _check_finite_loss(loss, context):
    if not np.isfinite(loss.data).all():
        raise NumericError(f"non-finite loss during {context}")


def _train_example_ids(records, rng, steps, batch_size):
    """Deterministic shuffled id stream covering `steps * batch_size` draws."""
    ids = [r.utterance_id for r in sorted(records, key=lambda r: r.utterance_id)]
    out = []
    epoch = 0
    while len(out) < steps * batch_size:
        perm = rng.split("order", epoch).fresh().permutation(len(ids))
        out.extend(ids[i] for i in perm)
        epoch += 1
    return out[: steps * batch_size]


def pretrain_iteration(enc, store, cache, labels, cfg, spec, rng, log_every=100):
    """One masked-prediction training pass; mutates the store in place."""
    records = cache.manifest.by_split("train")
    opt = Adam(store, names=enc.param_names(), lr=cfg.lr, warmup_steps=cfg.warmup_steps)
    id_stream = _train_example_ids(records, rng.split("ids"), spec.steps, cfg.batch_size)
    losses = []
    for step in range(spec.steps):
        store.zero_grads()
        total = None
        n_frames = 0
        for b in range(cfg.batch_size):
            uid = id_stream[step * cfg.batch_size + b]
            ex_rng = rng.split("ex", step, b)
            clip = cache.clip(uid)
            audio = cache.audio(uid)
            z = labels.labels[uid]
            t0 = 0
            t_len = len(clip)
            if t_len > cfg.max_frames:
                t0 = int(ex_rng.split("crop").fresh().integers(0, t_len - cfg.max_frames + 1))
                t_len = cfg.max_frames
            clip_c = clip[t0 : t0 + t_len]
            audio_c = audio[t0 : t0 + t_len]
            z_c = z[t0 : t0 + t_len]

            plan = sample_plan(t_len, cfg.masking, cfg.dropout, ex_rng.split("plan"))
            video_corr, _ = corrupt_video(clip_c, plan.video_spans, ex_rng.split("donor"))
            video_aug = normalize(augment(video_corr, ex_rng.split("aug"), train_mode=True))
            audio_corr = corrupt_audio(audio_c, plan.audio_indices, enc.audio_mask_embed)

            f_v = enc.encode_video(Tensor(video_aug))
            f_a = enc.encode_audio(audio_corr)
            f_a, f_v = apply_dropout_state(f_a, f_v, plan.dropout_state)
            ctx, _ = enc.encoder_forward(enc.fuse(f_a, f_v))
            logits = enc.cluster_logits(ctx)
            loss = pretrain_loss(logits, z_c, plan.audio_indices, plan.video_indices, cfg.alpha)
            total = loss if total is None else total + loss
            n_frames += max(len(plan.union_indices(t_len)), 1)
        total = total * (1.0 / n_frames)
        _check_finite_loss(total, f"pretraining step {step}")
        grads = backward(total, store)
        opt.step({n: grads[n] for n in opt.names})
        losses.append(float(total.data))
        if log_every and (step + 1) % log_every == 0:
            log.info("pretrain[%s] step %d/%d loss %.4f", spec.input_mode, step + 1,
                     spec.steps, float(np.mean(losses[-log_every:])))
    return losses


def run_pretraining(manifest, model_cfg, cfg, seed, out_dir, extra_meta=None):
    """Execute the iteration schedule; returns the final checkpoint path.

    Writes ckpt_iter<i>/ and labels_iter<i>/ under out_dir.
    """
    cfg.validate()
    rng = RngStream(seed, ("pretrain",))
    store = ParamStore(seed)
    enc = AVEncoder(store, model_cfg)
    records = manifest.by_split("train")

    caches = {}

    def get_cache(mode):
        if mode not in caches:
            caches[mode] = ClipCache(manifest, mode, cfg.region_spec)
            caches[mode].prepare(records)
        return caches[mode]

    ckpt_path = None
    losses_all = []
    for i, spec in enumerate(cfg.iterations):
        prov = {"iteration": str(i), "target_source": spec.target_source,
                "target_input_mode": spec.target_input_mode, "input_mode": spec.input_mode}
        if spec.target_source == "mfcc":
            labels = make_pseudo_labels(manifest, records, "mfcc", cfg.n_clusters,
                                        seed=rng.split("labels", i).derive_seed(),
                                        target_cache=get_cache(spec.input_mode),
                                        provenance=prov, kmeans_restarts=cfg.kmeans_restarts)
        else:
            labels = make_pseudo_labels(manifest, records, spec.target_source, cfg.n_clusters,
                                        seed=rng.split("labels", i).derive_seed(),
                                        enc=enc, target_cache=get_cache(spec.target_input_mode),
                                        provenance=prov, kmeans_restarts=cfg.kmeans_restarts)
        save_labels(os.path.join(out_dir, f"labels_iter{i}"), labels)

        if i > 0:
            # fresh cluster head for the new label space (encoder warm-starts)
            store.drop_prefix("enc.cluster_head")
            enc.cluster_head = Linear(store, "enc.cluster_head", model_cfg.d_model,
                                      model_cfg.n_clusters)
        losses = pretrain_iteration(enc, store, get_cache(spec.input_mode), labels,
                                    cfg, spec, rng.split("iter", i))
        losses_all.append(losses)

        meta = {"kind": "pretrain", "seed": str(seed), **prov,
                "region_mask": cfg.region_spec.serialize(), "alpha": str(cfg.alpha),
                "n_clusters": str(cfg.n_clusters), **model_cfg.to_meta()}
        if extra_meta:
            meta.update(extra_meta)
        ckpt_path = os.path.join(out_dir, f"ckpt_iter{i}")
        save_checkpoint(ckpt_path, store, meta)
    return ckpt_path, losses_all


# -- finetuning -----------------------------------------------------------------------

@dataclass
class FinetuneConfig:
    steps: int = 500
    batch_size: int = 3
    lr: float = 1e-3
    warmup_steps: int = 40
    freeze_steps: int = -1            # -1 -> 25% of steps (0 when no pretraining)
    labeled_fraction: float = 1.0
    region_spec: RegionMaskSpec = field(default_factory=RegionMaskSpec)

    def resolved_freeze(self, pretrained):
        if self.freeze_steps >= 0:
            return min(self.freeze_steps, self.steps)
        return self.steps // 4 if pretrained else 0


def labeled_subset(records, fraction):
    """Deterministic fraction-of-corpus selection by utterance-id hash."""
    if fraction >= 1.0:
        return list(records)
    out = []
    for r in records:
        h = int.from_bytes(hashlib.blake2s(r.utterance_id.encode(), digest_size=4).digest(), "little")
        if h / 2**32 < fraction:
            out.append(r)
    return out


def finetune(manifest, model_cfg, cfg, vocab, seed, out_dir, input_mode,
             init_store=None, extra_meta=None, cache=None, log_every=100):
    """Seq2seq finetuning. init_store=None runs the no-pretraining baseline
    (randomly initialized encoder, jointly trained, freeze defaults to 0)."""
    records = labeled_subset(manifest.by_split("train"), cfg.labeled_fraction)
    if not records:
        raise ValueError("labeled corpus subset is empty")
    rng = RngStream(seed, ("finetune",))

    store = ParamStore(seed)
    enc = AVEncoder(store, model_cfg)
    if init_store is not None:
        for name in enc.encoder_param_names():
            if name in init_store:
                store.assign(name, init_store[name].data)
    store.drop_prefix("enc.cluster_head")  # the cluster prediction head is removed
    dec = Seq2SeqDecoder(store, model_cfg, vocab)

    if cache is None:
        cache = ClipCache(manifest, input_mode, cfg.region_spec)
    cache.prepare(records)

    k = cfg.resolved_freeze(pretrained=init_store is not None)
    enc_names = [n for n in store.names() if n.startswith("enc.")]
    dec_names = dec.param_names()
    opt_dec = Adam(store, names=dec_names, lr=cfg.lr, warmup_steps=cfg.warmup_steps)
    opt_enc = Adam(store, names=enc_names, lr=cfg.lr, warmup_steps=cfg.warmup_steps)

    def frozen_ctx(uid):
        # while the encoder is frozen its output is constant per utterance
        # (eval view), so cache it and make frozen steps decoder-only
        if uid not in frozen_feats:
            clip = normalize(augment(cache.clip(uid), train_mode=False))
            with no_grad():
                f_v = enc.encode_video(Tensor(clip))
                f_a = enc.encode_audio(Tensor(cache.audio(uid))) * 0.0
                ctx, _ = enc.encoder_forward(enc.fuse(f_a, f_v))
            frozen_feats[uid] = ctx.data
        return Tensor(frozen_feats[uid])

    frozen_feats = {}
    id_stream = _train_example_ids(records, rng.split("ids"), cfg.steps, cfg.batch_size)
    losses = []
    for step in range(cfg.steps):
        frozen = step < k
        store.zero_grads()
        total = None
        n_tok = 0
        for b in range(cfg.batch_size):
            uid = id_stream[step * cfg.batch_size + b]
            ex_rng = rng.split("ex", step, b)
            word_ids = dec.token_ids(cache.transcript(uid))
            tokens_in = [dec.bos_id] + word_ids
            targets = word_ids + [dec.eos_id]

            if frozen:
                ctx = frozen_ctx(uid)
            else:
                clip = normalize(augment(cache.clip(uid), ex_rng.split("aug"), train_mode=True))
                f_v = enc.encode_video(Tensor(clip))
                f_a = enc.encode_audio(Tensor(cache.audio(uid))) * 0.0  # video-only
                ctx, _ = enc.encoder_forward(enc.fuse(f_a, f_v))
            logits = dec.forward(tokens_in, ctx)
            nll = softmax_cross_entropy(logits, targets)
            loss = T.tsum(nll)
            total = loss if total is None else total + loss
            n_tok += len(targets)
        total = total * (1.0 / n_tok)
        _check_finite_loss(total, f"finetune step {step}")
        grads = backward(total, store)
        opt_dec.step({n: grads[n] for n in dec_names})
        if not frozen:
            opt_enc.step({n: grads[n] for n in enc_names})
        losses.append(float(total.data))
        if log_every and (step + 1) % log_every == 0:
            log.info("finetune step %d/%d loss %.4f", step + 1, cfg.steps,
                     float(np.mean(losses[-log_every:])))

    meta = {"kind": "finetune", "seed": str(seed), "input_mode": input_mode,
            "vocab": ",".join(vocab), "freeze_steps": str(k),
            "labeled_fraction": str(cfg.labeled_fraction),
            "region_mask": cfg.region_spec.serialize(),
            "pretrained": str(init_store is not None), **model_cfg.to_meta()}
    if extra_meta:
        meta.update(extra_meta)
    ckpt = os.path.join(out_dir, "ckpt_finetune")
    save_checkpoint(ckpt, store, meta)
    return ckpt, losses


# -- speaker probe -----------------------------------------------------------------

@dataclass
class ProbeConfig:
    steps: int = 240
    batch_size: int = 8
    lr: float = 2e-3
    hidden: int = 512
    n_layers: int = 3


def train_probe(manifest, enc, enc_store, model_cfg, cfg, seed, input_mode,
                region_spec=None, cache=None):
    """Train the speaker classifier on frozen video-only encoder features.

    Returns (probe, probe_store, speakers, feature map over all records).
    """
    records = manifest.records
    train_records = [r for r in records if r.split in ("train", "valid")]
    speakers = sorted({r.speaker_id for r in train_records})
    if len(speakers) < 2:
        raise ValueError("speaker probe needs at least 2 speakers")
    spk_index = {s: i for i, s in enumerate(speakers)}

    if cache is None:
        cache = ClipCache(manifest, input_mode, region_spec)
    cache.prepare(records)

    enc_hash_before = enc_store.content_hash(enc.param_names())
    feats = {r.utterance_id: extract_features(enc, cache, r.utterance_id,
                                              model_cfg.layer_for_probe,
                                              dropout_state="video_only")
             for r in records}

    probe_store = ParamStore(seed)
    probe = SpeakerProbe(probe_store, model_cfg.d_model, len(speakers),
                         hidden=cfg.hidden, n_layers=cfg.n_layers)
    opt = Adam(probe_store, lr=cfg.lr)
    rng = RngStream(seed, ("probe",))
    stream = _train_example_ids(train_records, rng.split("ids"), cfg.steps, cfg.batch_size)
    for step in range(cfg.steps):
        probe_store.zero_grads()
        total = None
        for b in range(cfg.batch_size):
            uid = stream[step * cfg.batch_size + b]
            _, logits = probe.forward(Tensor(feats[uid]))
            target = [spk_index[cache.speaker(uid)]]
            loss = T.tsum(softmax_cross_entropy(logits.reshape(1, -1), target))
            total = loss if total is None else total + loss
        total = total * (1.0 / cfg.batch_size)
        _check_finite_loss(total, f"probe step {step}")
        grads = backward(total, probe_store)
        opt.step(grads)

    assert enc_store.content_hash(enc.param_names()) == enc_hash_before, \
        "probe training touched encoder parameters"
    return probe, probe_store, speakers, feats
