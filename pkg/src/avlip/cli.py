"""Command-line entry point: the full experimental protocol as subcommands.

Exit codes: 0 success, 2 config error, 3 missing upstream artifact,
4 numeric failure (NaN loss).
"""

import argparse
import hashlib
import logging
import os
import sys

import numpy as np

from .config import ConfigError, RunConfig
from .evalkit import (EvalReport, ablation_report, eer, eval_wer, make_trials,
                      mouth_mass_fraction, saliency_map, write_saliency)
from .model import AVEncoder, ModelConfig, Seq2SeqDecoder, load_checkpoint
from .nn import ParamStore
from .preprocess import RegionMaskSpec
from .rng import RngStream
from .synth import (CorpusConfig, generate_corpus, load_manifest, load_record,
                    neck_temporal_variance, vocabulary)
from .tensor import Tensor, no_grad
from .trainer import (ClipCache, NumericError, extract_features, finetune,
                      run_pretraining, train_probe)

log = logging.getLogger("avlip")


class MissingArtifactError(FileNotFoundError):
    pass


def _threads():
    try:
        return max(1, int(os.environ.get("AVLIP_THREADS", "1")))
    except ValueError:
        return 1


def _digest_inputs(data_dir):
    """Content digest of the corpus a run consumed (manifest + file heads)."""
    h = hashlib.sha256()
    manifest_path = os.path.join(data_dir, "manifest.tsv")
    with open(manifest_path, "rb") as f:
        h.update(f.read())
    for name in sorted(os.listdir(data_dir)):
        if not name.endswith(".avt1"):
            continue
        p = os.path.join(data_dir, name)
        h.update(name.encode())
        h.update(str(os.path.getsize(p)).encode())
        with open(p, "rb") as f:
            h.update(f.read(65536))
    return h.hexdigest()


class RunDir:
    """A run directory owned by one process (lock file), self-describing."""

    def __init__(self, path, config, data_dir=None):
        self.path = path
        os.makedirs(path, exist_ok=True)
        self.lock_path = os.path.join(path, ".lock")
        try:
            fd = os.open(self.lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            os.write(fd, str(os.getpid()).encode())
            os.close(fd)
        except FileExistsError:
            raise ConfigError(f"run directory {path} is locked by another process "
                              f"(remove {self.lock_path} if stale)")
        config.save(os.path.join(path, "config.txt"))
        if data_dir:
            with open(os.path.join(path, "inputs.txt"), "w", encoding="utf-8") as f:
                f.write(f"data_dir = {data_dir}\n")
                f.write(f"data_digest = {_digest_inputs(data_dir)}\n")

    def release(self):
        if os.path.exists(self.lock_path):
            os.remove(self.lock_path)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.release()


def _load_config(args, overrides):
    cfg = RunConfig()
    if getattr(args, "config", None):
        if not os.path.exists(args.config):
            raise MissingArtifactError(f"config file not found: {args.config}")
        for k, v in RunConfig.parse_file(args.config).items():
            cfg.set(k, v)
    for k, v in overrides.items():
        cfg.set(k, v)
    return cfg


def _require_data(path):
    if not os.path.exists(os.path.join(path, "manifest.tsv")):
        raise MissingArtifactError(f"no corpus manifest at {os.path.join(path, 'manifest.tsv')} "
                                   f"(run 'avlip gen-data' first)")
    return load_manifest(path)


def _require_checkpoint(path):
    if not os.path.exists(os.path.join(path, "meta.txt")):
        raise MissingArtifactError(f"no checkpoint at {path} (missing meta.txt)")
    return load_checkpoint(path)


def _rebuild_finetuned(ckpt_dir):
    store, meta = _require_checkpoint(ckpt_dir)
    model_cfg = ModelConfig.from_meta(meta)
    vocab = meta["vocab"].split(",")
    enc = AVEncoder(store, model_cfg)
    dec = Seq2SeqDecoder(store, model_cfg, vocab)
    return enc, dec, store, meta, model_cfg


# -- subcommands -----------------------------------------------------------------

def cmd_gen_data(args, overrides):
    cfg = _load_config(args, overrides)
    if args.speakers is not None:
        cfg.set("data.speakers", args.speakers)
    if args.per_speaker is not None:
        cfg.set("data.per_speaker", args.per_speaker)
    if args.vocab is not None:
        cfg.set("data.vocab", args.vocab)
    if args.cue_strength is not None:
        cfg.set("data.cue_strength", args.cue_strength)
    if args.seed is not None:
        cfg.set("seed", args.seed)
    out = args.out
    if os.path.exists(out) and os.listdir(out) and not args.force:
        raise ConfigError(f"output directory {out} is not empty (use --force)")
    os.makedirs(out, exist_ok=True)
    cfg.save(os.path.join(out, "config.txt"))
    manifest = generate_corpus(cfg.corpus_config(), out, threads=_threads())
    neck_var = neck_temporal_variance(cfg["data.cue_strength"])
    counts = {s: len(manifest.by_split(s)) for s in ("train", "valid", "test")}
    print(f"corpus: {len(manifest.records)} utterances "
          f"(train {counts['train']}, valid {counts['valid']}, test {counts['test']})")
    print(f"speakers: train/valid {manifest.speakers('train')} test {manifest.speakers('test')}")
    print(f"neck-region temporal variance (pose-frozen probe): {neck_var:.4f}")
    return 0


def cmd_pretrain(args, overrides):
    cfg = _load_config(args, overrides)
    if args.input:
        cfg.set("input", args.input)
    if args.target_input:
        cfg.set("target_input", args.target_input)
    if args.seed is not None:
        cfg.set("seed", args.seed)
    if args.target_source:
        if args.target_source != "mfcc" and not args.target_source.startswith("layer:"):
            raise ConfigError(f"--target-source must be 'mfcc' or 'layer:<n>', got {args.target_source}")
        if args.target_source == "mfcc":
            cfg.set("pretrain.iterations", 1)
    manifest = _require_data(args.data)
    with RunDir(args.out, cfg, data_dir=args.data):
        ckpt, _losses = run_pretraining(manifest, cfg.model_config(), cfg.pretrain_config(),
                                        cfg["seed"], args.out,
                                        extra_meta={"data_dir": args.data})
    print(f"final checkpoint: {ckpt}")
    return 0


def cmd_finetune(args, overrides):
    cfg = _load_config(args, overrides)
    if args.input:
        cfg.set("input", args.input)
    if args.seed is not None:
        cfg.set("seed", args.seed)
    if args.labeled_fraction is not None:
        cfg.set("finetune.labeled_fraction", args.labeled_fraction)
    manifest = _require_data(args.data)
    init_store = None
    extra = {"data_dir": args.data}
    if not args.no_pretrain:
        if not args.checkpoint:
            raise ConfigError("finetune needs --checkpoint CKPT or --no-pretrain")
        init_store, pre_meta = _require_checkpoint(args.checkpoint)
        extra["pretrain_checkpoint"] = args.checkpoint
        extra["pretrain_provenance"] = pre_meta.get("target_source", "?")
    vocab = vocabulary(cfg["data.vocab"])
    with RunDir(args.out, cfg, data_dir=args.data):
        ckpt, _losses = finetune(manifest, cfg.model_config(), cfg.finetune_config(),
                                 vocab, cfg["seed"], args.out, cfg["input"],
                                 init_store=init_store, extra_meta=extra)
    print(f"finetuned checkpoint: {ckpt}")
    return 0


def cmd_eval(args, overrides):
    cfg = _load_config(args, overrides)
    manifest = _require_data(args.data)
    enc, dec, _store, meta, _mc = _rebuild_finetuned(args.checkpoint)
    input_mode = meta.get("input_mode", "face")
    region = RegionMaskSpec.parse(meta.get("region_mask", "none"))
    cache = ClipCache(manifest, input_mode, region)
    records = manifest.by_split(args.split)
    if not records:
        raise MissingArtifactError(f"split {args.split!r} has no records")
    cache.prepare(records)
    rate, _pairs = eval_wer(enc, dec, cache, records, max_len=cfg["eval.max_len"])
    rep = EvalReport()
    condition = f"{input_mode}/{meta.get('pretrain_provenance', 'scratch')}"
    rep.add(condition, "wer", rate, len(records), int(meta.get("seed", 0)))
    print(rep.table())
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        rep.save(os.path.join(args.out, "report.tsv"))
    return 0


def cmd_probe(args, overrides):
    cfg = _load_config(args, overrides)
    if args.seed is not None:
        cfg.set("seed", args.seed)
    manifest = _require_data(args.data)
    store, meta = _require_checkpoint(args.checkpoint)
    model_cfg = ModelConfig.from_meta(meta)
    enc = AVEncoder(store, model_cfg)
    input_mode = args.input or meta.get("input_mode", "face")
    region = RegionMaskSpec.parse(meta.get("region_mask", "none"))
    with RunDir(args.out, cfg, data_dir=args.data):
        probe, _pstore, _speakers, feats = train_probe(
            manifest, enc, store, model_cfg, cfg.probe_config(), cfg["seed"],
            input_mode, region_spec=region)
        test_records = manifest.by_split("test")
        if len({r.speaker_id for r in test_records}) < 2:
            raise ConfigError("EER needs at least 2 test speakers")
        embeddings = {}
        speaker_of = {}
        for r in test_records:
            emb, _ = probe.forward(Tensor(feats[r.utterance_id]))
            embeddings[r.utterance_id] = emb.data
            speaker_of[r.utterance_id] = r.speaker_id
        gs, is_ = make_trials(embeddings, speaker_of, seed=cfg["seed"])
        rate = eer(gs, is_)
        rep = EvalReport()
        rep.add(f"probe/{input_mode}", "eer", rate, len(test_records), cfg["seed"])
        rep.save(os.path.join(args.out, "report.tsv"))
    print(rep.table())
    return 0


def cmd_saliency(args, overrides):
    _cfg = _load_config(args, overrides)
    manifest = _require_data(args.data)
    enc, dec, _store, meta, _mc = _rebuild_finetuned(args.checkpoint)
    input_mode = meta.get("input_mode", "face")
    region = RegionMaskSpec.parse(meta.get("region_mask", "none"))
    cache = ClipCache(manifest, input_mode, region)
    record = next((r for r in manifest.records if r.utterance_id == args.utterance), None)
    if record is None:
        raise MissingArtifactError(f"utterance {args.utterance!r} not in manifest")
    cache.prepare([record])
    sal = saliency_map(enc, dec, cache, record.utterance_id)
    write_saliency(args.out, sal, pgm=args.pgm)
    if input_mode == "face":
        utt = load_record(manifest, record)
        frac = mouth_mass_fraction(sal, utt, "face")
        print(f"saliency mass inside mouth box: {frac:.4f}")
    print(f"saliency written to {args.out} ({sal.shape[0]} frames)")
    return 0


def cmd_ablate(args, overrides):
    cfg = _load_config(args, overrides)
    if args.seed is not None:
        cfg.set("seed", args.seed)
    manifest = _require_data(args.data)
    vocab = vocabulary(cfg["data.vocab"])
    with RunDir(args.out, cfg, data_dir=args.data):

        def run_condition(name, spec_text):
            sub = os.path.join(args.out, f"cond_{name.strip('-') or 'face'}")
            ccfg = RunConfig(dict())
            for k, v in cfg.values.items():
                ccfg.values[k] = v
            ccfg.set("region_mask", spec_text if spec_text else "none")
            ckpt, _ = run_pretraining(manifest, ccfg.model_config(), ccfg.pretrain_config(),
                                      ccfg["seed"], sub)
            init_store, _m = load_checkpoint(ckpt)
            ft_ckpt, _ = finetune(manifest, ccfg.model_config(), ccfg.finetune_config(),
                                  vocab, ccfg["seed"], sub, ccfg["input"],
                                  init_store=init_store)
            enc, dec, _s, meta, _mc = _rebuild_finetuned(ft_ckpt)
            region = RegionMaskSpec.parse(meta.get("region_mask", "none"))
            cache = ClipCache(manifest, ccfg["input"], region)
            records = manifest.by_split("test")
            cache.prepare(records)
            rate, _ = eval_wer(enc, dec, cache, records, max_len=cfg["eval.max_len"])
            return rate, len(records)

        rep = ablation_report(run_condition, cfg["seed"])
        rep.save(os.path.join(args.out, "report.tsv"))
    print(rep.table())
    return 0


# -- argument plumbing --------------------------------------------------------------

def _split_overrides(extra):
    """Parse trailing '--dot.key value' pairs into an override dict."""
    overrides = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or "." not in tok:
            raise ConfigError(f"unrecognized argument {tok!r} (config overrides look like --pretrain.steps 100)")
        key = tok[2:]
        if "=" in key:
            key, _, val = key.partition("=")
            overrides[key] = val
            i += 1
            continue
        if i + 1 >= len(extra):
            raise ConfigError(f"override {tok!r} is missing a value")
        overrides[key] = extra[i + 1]
        i += 2
    return overrides


def build_parser():
    p = argparse.ArgumentParser(prog="avlip",
                                description="desk-scale audio-visual lipreading pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=True, out=True, seed=True):
        if data:
            sp.add_argument("--data", required=True, help="corpus directory")
        if out:
            sp.add_argument("--out", required=True, help="run/output directory")
        if seed:
            sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--config", default=None, help="config file (key = value lines)")

    g = sub.add_parser("gen-data", help="generate the synthetic corpus")
    common(g, data=False)
    g.add_argument("--speakers", type=int, default=None)
    g.add_argument("--per-speaker", type=int, default=None)
    g.add_argument("--vocab", type=int, default=None)
    g.add_argument("--cue-strength", type=float, default=None)
    g.add_argument("--force", action="store_true")

    pt = sub.add_parser("pretrain", help="masked cluster-prediction pretraining")
    common(pt)
    pt.add_argument("--input", choices=("face", "lip"), default=None)
    pt.add_argument("--target-input", choices=("face", "lip"), default=None)
    pt.add_argument("--target-source", default=None, help="mfcc | layer:<n>")

    ft = sub.add_parser("finetune", help="seq2seq lipreading finetuning")
    common(ft)
    ft.add_argument("--checkpoint", default=None, help="pretraining checkpoint dir")
    ft.add_argument("--no-pretrain", action="store_true", help="from-scratch baseline")
    ft.add_argument("--input", choices=("face", "lip"), default=None)
    ft.add_argument("--labeled-fraction", type=float, default=None)

    ev = sub.add_parser("eval", help="greedy-decoding WER of a finetuned model")
    common(ev, out=False, seed=False)
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--split", default="test")
    ev.add_argument("--out", default=None)

    pr = sub.add_parser("probe", help="speaker-verification probe + EER")
    common(pr)
    pr.add_argument("--checkpoint", required=True, help="pretraining checkpoint dir")
    pr.add_argument("--input", choices=("face", "lip"), default=None)

    sa = sub.add_parser("saliency", help="input-gradient saliency maps")
    common(sa, seed=False)
    sa.add_argument("--checkpoint", required=True, help="finetuned checkpoint dir")
    sa.add_argument("--utterance", required=True)
    sa.add_argument("--pgm", action="store_true", help="also write per-frame PGM images")

    ab = sub.add_parser("ablate", help="region-ablation ladder (face, -eye, -neck, -side)")
    common(ab)
    return p


COMMANDS = {
    "gen-data": cmd_gen_data,
    "pretrain": cmd_pretrain,
    "finetune": cmd_finetune,
    "eval": cmd_eval,
    "probe": cmd_probe,
    "saliency": cmd_saliency,
    "ablate": cmd_ablate,
}


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(name)s %(message)s")
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        overrides = _split_overrides(extra)
        return COMMANDS[args.command](args, overrides)
    except (MissingArtifactError, FileNotFoundError) as e:
        print(f"missing artifact: {e}", file=sys.stderr)
        return 3
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 4
    except (ConfigError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
