"""Layered run configuration: defaults <- config file <- CLI overrides.

The config is a flat dotted-key map serialized as ``key = value`` lines;
every run directory gets the fully resolved copy before execution so a run
can be reproduced from its own config.txt alone.
"""

from .masking import DropoutConfig, MaskingConfig
from .model import ModelConfig
from .preprocess import RegionMaskSpec
from .synth import CorpusConfig, PoseSpec
from .trainer import FinetuneConfig, IterationSpec, PretrainConfig, ProbeConfig


class ConfigError(ValueError):
    pass


def _csv_ints(text):
    if isinstance(text, (tuple, list)):
        return tuple(int(v) for v in text)
    return tuple(int(v) for v in str(text).split(","))


# key -> (type constructor, default)
DEFAULTS = {
    "seed": (int, 0),
    "input": (str, "face"),
    "target_input": (str, "face"),
    "region_mask": (str, "none"),

    "data.speakers": (int, 4),
    "data.per_speaker": (int, 50),
    "data.vocab": (int, 20),
    "data.cue_strength": (float, 1.0),
    "data.words_min": (int, 2),
    "data.words_max": (int, 3),
    "data.pose_rot": (float, 10.0),
    "data.pose_trans": (float, 8.0),
    "data.pose_scale": (float, 0.04),
    "data.valid_fraction": (float, 0.1),

    "model.video_channels": (_csv_ints, (6, 12, 24, 48)),
    "model.stream_dim": (int, 48),
    "model.n_blocks": (int, 4),
    "model.n_heads": (int, 4),
    "model.ffn_dim": (int, 192),
    "model.layer_for_probe": (int, 3),
    "model.d_audio": (int, 26),
    "model.n_clusters": (int, 64),
    "model.dec_blocks": (int, 2),
    "model.dec_ffn": (int, 192),
    "model.probe_hidden": (int, 512),
    "model.probe_layers": (int, 3),

    "masking.audio_fraction": (float, 0.30),
    "masking.video_fraction": (float, 0.80),
    "masking.p_maska": (float, 1.0),
    "masking.p_maskv": (float, 1.0),
    "masking.mean_span": (int, 5),
    "dropout.p_m": (float, 0.5),
    "dropout.p_a": (float, 0.5),

    "pretrain.iterations": (int, 2),
    "pretrain.steps": (int, 450),
    "pretrain.batch": (int, 4),
    "pretrain.lr": (float, 1.5e-3),
    "pretrain.warmup": (int, 60),
    "pretrain.max_frames": (int, 24),
    "pretrain.alpha": (float, 0.0),
    "pretrain.kmeans_restarts": (int, 3),

    "finetune.steps": (int, 1700),
    "finetune.batch": (int, 3),
    "finetune.lr": (float, 1.5e-3),
    "finetune.warmup": (int, 40),
    "finetune.freeze_steps": (int, 1200),
    "finetune.labeled_fraction": (float, 1.0),

    "probe.steps": (int, 240),
    "probe.batch": (int, 8),
    "probe.lr": (float, 2e-3),

    "eval.max_len": (int, 8),
}


class RunConfig:
    def __init__(self, values=None):
        self.values = {k: d for k, (_t, d) in DEFAULTS.items()}
        if values:
            for k, v in values.items():
                self.set(k, v)

    def set(self, key, raw):
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        ctor = DEFAULTS[key][0]
        try:
            self.values[key] = ctor(raw)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad value for {key}: {raw!r} ({e})") from e

    def __getitem__(self, key):
        return self.values[key]

    def serialize(self):
        lines = []
        for k in sorted(self.values):
            v = self.values[k]
            if isinstance(v, tuple):
                v = ",".join(str(c) for c in v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def parse_file(path):
        values = {}
        with open(path, encoding="utf-8") as f:
            for ln, line in enumerate(f, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{ln}: expected 'key = value'")
                k, _, v = line.partition("=")
                values[k.strip()] = v.strip()
        return values

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.serialize())

    @staticmethod
    def load(path, overrides=None):
        cfg = RunConfig()
        for k, v in RunConfig.parse_file(path).items():
            cfg.set(k, v)
        for k, v in (overrides or {}).items():
            cfg.set(k, v)
        return cfg

    # -- typed views ---------------------------------------------------------

    def corpus_config(self):
        v = self.values
        return CorpusConfig(
            num_speakers=v["data.speakers"],
            utterances_per_speaker=v["data.per_speaker"],
            vocab_size=v["data.vocab"],
            cue_strength=v["data.cue_strength"],
            seed=v["seed"],
            words_min=v["data.words_min"],
            words_max=v["data.words_max"],
            pose=PoseSpec(rot_deg=v["data.pose_rot"], trans_px=v["data.pose_trans"],
                          scale_amp=v["data.pose_scale"]),
            valid_fraction=v["data.valid_fraction"],
        )

    def model_config(self):
        v = self.values
        return ModelConfig(
            video_channels=v["model.video_channels"],
            stream_dim=v["model.stream_dim"],
            n_blocks=v["model.n_blocks"],
            n_heads=v["model.n_heads"],
            ffn_dim=v["model.ffn_dim"],
            layer_for_probe=v["model.layer_for_probe"],
            d_audio=v["model.d_audio"],
            n_clusters=v["model.n_clusters"],
            dec_blocks=v["model.dec_blocks"],
            dec_ffn=v["model.dec_ffn"],
            probe_hidden=v["model.probe_hidden"],
            probe_layers=v["model.probe_layers"],
        )

    def region_spec(self):
        return RegionMaskSpec.parse(self.values["region_mask"])

    def masking_config(self):
        v = self.values
        return MaskingConfig(audio_fraction=v["masking.audio_fraction"],
                             video_fraction=v["masking.video_fraction"],
                             p_maska=v["masking.p_maska"], p_maskv=v["masking.p_maskv"],
                             mean_span_length=v["masking.mean_span"])

    def dropout_config(self):
        return DropoutConfig(p_m=self.values["dropout.p_m"], p_a=self.values["dropout.p_a"])

    def pretrain_config(self):
        v = self.values
        input_mode = v["input"]
        target_input = v["target_input"]
        iters = [IterationSpec(input_mode=input_mode, target_source="mfcc",
                               target_input_mode=target_input, steps=v["pretrain.steps"])]
        for _ in range(1, v["pretrain.iterations"]):
            iters.append(IterationSpec(input_mode=input_mode,
                                       target_source=f"layer:{v['model.layer_for_probe']}",
                                       target_input_mode=target_input,
                                       steps=v["pretrain.steps"]))
        return PretrainConfig(
            alpha=v["pretrain.alpha"], n_clusters=v["model.n_clusters"], iterations=iters,
            batch_size=v["pretrain.batch"], lr=v["pretrain.lr"],
            warmup_steps=v["pretrain.warmup"], max_frames=v["pretrain.max_frames"],
            masking=self.masking_config(), dropout=self.dropout_config(),
            region_spec=self.region_spec(), kmeans_restarts=v["pretrain.kmeans_restarts"],
        )

    def finetune_config(self):
        v = self.values
        return FinetuneConfig(steps=v["finetune.steps"], batch_size=v["finetune.batch"],
                              lr=v["finetune.lr"], warmup_steps=v["finetune.warmup"],
                              freeze_steps=v["finetune.freeze_steps"],
                              labeled_fraction=v["finetune.labeled_fraction"],
                              region_spec=self.region_spec())

    def probe_config(self):
        v = self.values
        return ProbeConfig(steps=v["probe.steps"], batch_size=v["probe.batch"],
                           lr=v["probe.lr"], hidden=v["model.probe_hidden"],
                           n_layers=v["model.probe_layers"])
