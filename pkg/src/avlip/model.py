"""The audio-visual architecture: residual conv video frontend, linear audio
projection, channel-wise fusion, transformer encoder with a cluster head,
seq2seq transformer decoder, and the speaker probe.

Face and lip inputs share every shape end to end, so performance
differences are attributable to input content rather than architecture.
"""

import os
from dataclasses import dataclass, fields

import numpy as np

from . import tensor as T
from .avt1 import read_avt1, write_avt1
from .nn import (Conv2d, LayerNorm, Linear, MultiHeadAttention, ParamStore,
                 TransformerBlock, causal_mask, sinusoidal_encoding)
from .tensor import Tensor

ROI = 96


@dataclass
class ModelConfig:
    video_channels: tuple = (6, 12, 24, 48)
    stream_dim: int = 48            # per-stream feature dim D; fused dim is 2D
    n_blocks: int = 4
    n_heads: int = 4
    ffn_dim: int = 192
    layer_for_probe: int = 3
    d_audio: int = 26
    n_clusters: int = 64
    dec_blocks: int = 2
    dec_ffn: int = 192
    probe_hidden: int = 512
    probe_layers: int = 3

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError("d_model (2*stream_dim) must be divisible by n_heads")
        if not 1 <= self.layer_for_probe <= self.n_blocks:
            raise ValueError("layer_for_probe must be in [1, n_blocks]")

    @property
    def d_model(self):
        return 2 * self.stream_dim

    def to_meta(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f"model.{f.name}"] = ",".join(str(c) for c in v) if isinstance(v, tuple) else str(v)
        return out

    @staticmethod
    def from_meta(meta):
        kwargs = {}
        for f in fields(ModelConfig):
            key = f"model.{f.name}"
            if key not in meta:
                continue
            raw = meta[key]
            if f.name == "video_channels":
                kwargs[f.name] = tuple(int(c) for c in raw.split(","))
            else:
                kwargs[f.name] = int(raw)
        return ModelConfig(**kwargs)


class _ResStage:
    """Strided conv downsample, then an optional two-conv residual block.
    The residual pair is skipped at the highest resolution (cost)."""

    def __init__(self, store, name, c_in, c_out, res=True):
        self.down = Conv2d(store, f"{name}.down", c_in, c_out, stride=2)
        self.res = res
        if res:
            self.c1 = Conv2d(store, f"{name}.c1", c_out, c_out)
            self.c2 = Conv2d(store, f"{name}.c2", c_out, c_out)

    def __call__(self, x):
        x = T.relu(self.down(x))
        if self.res:
            h = self.c2(T.relu(self.c1(x)))
            x = T.relu(x + h)
        return x


class AVEncoder:
    """Everything from raw per-frame inputs to contextual features."""

    def __init__(self, store, cfg, prefix="enc"):
        self.cfg = cfg
        self.store = store
        chans = cfg.video_channels
        self.stages = [_ResStage(store, f"{prefix}.front{i}", c_in, c_out, res=(i > 0))
                       for i, (c_in, c_out) in enumerate(zip((1,) + tuple(chans[:-1]), chans))]
        grid = ROI // (2 ** len(chans))
        # flattened spatial readout: keeps mouth-region location information
        self.video_out = Linear(store, f"{prefix}.video_out", chans[-1] * grid * grid, cfg.stream_dim)
        self.audio_proj = Linear(store, f"{prefix}.audio_proj", cfg.d_audio, cfg.stream_dim)
        self.audio_mask_embed = store.param(f"{prefix}.audio_mask_embed", (cfg.d_audio,), scale=0.1)
        self.input_ln = LayerNorm(store, f"{prefix}.input_ln", cfg.d_model)
        self.blocks = [TransformerBlock(store, f"{prefix}.tf{i}", cfg.d_model, cfg.n_heads, cfg.ffn_dim)
                       for i in range(cfg.n_blocks)]
        self.final_ln = LayerNorm(store, f"{prefix}.final_ln", cfg.d_model)
        self.cluster_head = Linear(store, f"{prefix}.cluster_head", cfg.d_model, cfg.n_clusters)

    # -- per-stream encoders --------------------------------------------------

    def encode_video(self, clip):
        """(T, H, W) normalized clip -> (T, stream_dim). H/W <= 96 are
        zero-padded (centered) up to 96 so 88x88 crops and full frames
        both work."""
        clip = clip if isinstance(clip, Tensor) else Tensor(np.asarray(clip, dtype=np.float32))
        t_len, H, W = clip.shape
        if H > ROI or W > ROI:
            raise ValueError(f"clip spatial size {H}x{W} exceeds {ROI}")
        if H < ROI or W < ROI:
            pr, pc = ROI - H, ROI - W
            clip = T.pad2d(clip, pr // 2, pr - pr // 2, pc // 2, pc - pc // 2)
        x = clip.reshape(t_len, 1, ROI, ROI)
        for stage in self.stages:
            x = stage(x)
        x = x.reshape(t_len, -1)  # (T, C * grid * grid)
        return self.video_out(x)

    def encode_audio(self, audio):
        audio = audio if isinstance(audio, Tensor) else Tensor(np.asarray(audio, dtype=np.float32))
        return self.audio_proj(audio)

    @staticmethod
    def fuse(f_a, f_v):
        """Channel-wise concatenation: (T, D) + (T, D) -> (T, 2D)."""
        if f_a.shape != f_v.shape:
            raise ValueError(f"stream shapes differ: {f_a.shape} vs {f_v.shape}")
        return T.concat([f_a, f_v], axis=1)

    # -- transformer ------------------------------------------------------------

    def encoder_forward(self, f_av):
        """Pre-norm transformer; returns (contextual, per-block outputs)."""
        t_len = f_av.shape[0]
        pe = Tensor(sinusoidal_encoding(t_len, self.cfg.d_model, dtype=f_av.dtype))
        x = self.input_ln(f_av) + pe
        per_layer = []
        for block in self.blocks:
            x = block(x)
            per_layer.append(x)
        return self.final_ln(x), per_layer

    def cluster_logits(self, contextual):
        return self.cluster_head(contextual)

    def forward_features(self, video_clip, audio, dropout_state="both"):
        """Uncorrupted forward pass to per-layer features (for clustering and
        the probe). dropout_state selects which streams are live."""
        f_v = self.encode_video(video_clip)
        f_a = self.encode_audio(audio)
        if dropout_state == "audio_only":
            f_v = f_v * 0.0
        elif dropout_state == "video_only":
            f_a = f_a * 0.0
        fused = self.fuse(f_a, f_v)
        return self.encoder_forward(fused)

    def param_names(self):
        return [n for n in self.store.names() if n.startswith("enc.")]

    def encoder_param_names(self):
        """Encoder weights excluding the cluster head (dropped at finetune)."""
        return [n for n in self.param_names() if not n.startswith("enc.cluster_head")]


BOS = "<bos>"
EOS = "<eos>"


class Seq2SeqDecoder:
    """Transformer decoder over the closed word vocabulary (+ BOS/EOS)."""

    def __init__(self, store, cfg, vocab, prefix="dec"):
        self.cfg = cfg
        self.store = store
        self.vocab = list(vocab)
        self.bos_id = len(self.vocab)
        self.eos_id = len(self.vocab) + 1
        n_tokens = len(self.vocab) + 2
        self.embed = store.param(f"{prefix}.embed", (n_tokens, cfg.d_model), scale=0.05)
        self.blocks = [TransformerBlock(store, f"{prefix}.tf{i}", cfg.d_model, cfg.n_heads,
                                        cfg.dec_ffn, cross=True)
                       for i in range(cfg.dec_blocks)]
        self.final_ln = LayerNorm(store, f"{prefix}.final_ln", cfg.d_model)
        self.out = Linear(store, f"{prefix}.out", cfg.d_model, n_tokens)

    def token_ids(self, words):
        idx = []
        for w in words:
            if w not in self.vocab:
                raise ValueError(f"word {w!r} not in decoder vocabulary")
            idx.append(self.vocab.index(w))
        return idx

    def forward(self, token_ids, encoder_out):
        """Teacher-forced logits: token_ids (S,) -> (S, n_tokens)."""
        ids = np.asarray(token_ids, dtype=np.int64)
        x = T.gather(self.embed, ids)
        pe = Tensor(sinusoidal_encoding(len(ids), self.cfg.d_model, dtype=x.dtype))
        x = x + pe
        mask = causal_mask(len(ids), dtype=np.dtype(x.dtype).type)
        for block in self.blocks:
            x = block(x, memory=encoder_out, self_mask=mask)
        return self.out(self.final_ln(x))

    def greedy_decode(self, encoder_out, max_len=12):
        """Argmax decoding from BOS until EOS or max_len words."""
        ids = [self.bos_id]
        words = []
        with T.no_grad():
            for _ in range(max_len):
                logits = self.forward(ids, encoder_out)
                nxt = int(np.argmax(logits.data[-1]))
                if nxt == self.eos_id:
                    break
                if nxt == self.bos_id:  # degenerate untrained choice; stop
                    break
                words.append(self.vocab[nxt])
                ids.append(nxt)
        return words

    def param_names(self):
        return [n for n in self.store.names() if n.startswith("dec.")]


class SpeakerProbe:
    """3x512 MLP on mean-pooled probe-layer features; embeddings are the
    L2-normalized activations before the speaker classification layer."""

    def __init__(self, store, d_model, n_speakers, hidden=512, n_layers=3, prefix="probe"):
        self.store = store
        self.n_speakers = n_speakers
        dims = [d_model] + [hidden] * n_layers
        self.layers = [Linear(store, f"{prefix}.h{i}", dims[i], dims[i + 1])
                       for i in range(n_layers)]
        self.out = Linear(store, f"{prefix}.out", hidden, n_speakers)

    def forward(self, features):
        """features (T, d_model) -> (embedding (hidden,), logits (n_speakers,))."""
        x = features.mean(axis=0, keepdims=True)
        for layer in self.layers:
            x = T.relu(layer(x))
        hidden = x.reshape(-1)
        norm = T.tsum(hidden * hidden) ** 0.5
        embedding = hidden / (norm + 1e-12)
        logits = self.out(x).reshape(-1)
        return embedding, logits

    def param_names(self):
        return [n for n in self.store.names() if n.startswith("probe.")]


# -- checkpoints -----------------------------------------------------------------

def save_checkpoint(ckpt_dir, store, meta):
    """Parameters as AVT1 files plus a text header with config/provenance."""
    os.makedirs(ckpt_dir, exist_ok=True)
    index_lines = []
    for i, (name, p) in enumerate(store.items()):
        fname = f"p{i:05d}.avt1"
        write_avt1(os.path.join(ckpt_dir, fname), p.data)
        index_lines.append(f"{name}\t{fname}")
    with open(os.path.join(ckpt_dir, "params.txt"), "w", encoding="utf-8") as f:
        f.write("\n".join(index_lines) + "\n")
    with open(os.path.join(ckpt_dir, "meta.txt"), "w", encoding="utf-8") as f:
        for k in sorted(meta):
            f.write(f"{k} = {meta[k]}\n")


def load_checkpoint(ckpt_dir):
    meta_path = os.path.join(ckpt_dir, "meta.txt")
    if not os.path.exists(meta_path):
        raise FileNotFoundError(f"no checkpoint at {ckpt_dir} (missing meta.txt)")
    meta = {}
    with open(meta_path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            k, _, v = line.partition("=")
            meta[k.strip()] = v.strip()
    store = ParamStore(int(meta.get("seed", 0)))
    with open(os.path.join(ckpt_dir, "params.txt"), encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            name, fname = line.split("\t")
            store.set_raw(name, read_avt1(os.path.join(ckpt_dir, fname)))
    return store, meta
