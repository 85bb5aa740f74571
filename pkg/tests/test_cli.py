"""CLI: subcommand contracts, exit codes, provenance, reproducibility."""

import hashlib
import os

import numpy as np
import pytest

from avlip.cli import main
from avlip.model import load_checkpoint
from avlip.synth import load_manifest

TINY_ARGS = ["--data.speakers", "2", "--data.per_speaker", "4", "--data.vocab", "8",
             "--data.words_min", "2", "--data.words_max", "2"]
TINY_TRAIN = ["--pretrain.steps", "3", "--pretrain.iterations", "1",
              "--model.n_clusters", "8", "--model.video_channels", "4,8",
              "--model.stream_dim", "8", "--model.n_blocks", "2",
              "--model.n_heads", "2", "--model.ffn_dim", "24",
              "--model.layer_for_probe", "2", "--model.dec_blocks", "1",
              "--model.dec_ffn", "24", "--model.probe_hidden", "16",
              "--finetune.steps", "3", "--probe.steps", "4"]


def _dir_digest(d):
    h = hashlib.sha256()
    for root, _dirs, files in os.walk(d):
        for name in sorted(files):
            rel = os.path.relpath(os.path.join(root, name), d)
            h.update(rel.encode())
            with open(os.path.join(root, name), "rb") as f:
                h.update(f.read())
    return h.hexdigest()


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli") / "data"
    rc = main(["gen-data", "--out", str(d), "--seed", "3"] + TINY_ARGS)
    assert rc == 0
    return d


def test_gen_data_counts(tmp_path, capsys):
    out = tmp_path / "d"
    rc = main(["gen-data", "--out", str(out), "--seed", "7"] + TINY_ARGS)
    assert rc == 0
    man = load_manifest(out)
    assert len(man.records) == 8
    printed = capsys.readouterr().out
    assert "8 utterances" in printed
    assert "neck-region temporal variance" in printed


def test_gen_data_refuses_nonempty_without_force(tmp_path):
    out = tmp_path / "d"
    assert main(["gen-data", "--out", str(out), "--seed", "1"] + TINY_ARGS) == 0
    assert main(["gen-data", "--out", str(out), "--seed", "1"] + TINY_ARGS) == 2
    assert main(["gen-data", "--out", str(out), "--seed", "1", "--force"] + TINY_ARGS) == 0


def test_gen_data_rerun_identical_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["gen-data", "--out", str(a), "--seed", "5"] + TINY_ARGS)
    main(["gen-data", "--out", str(b), "--seed", "5"] + TINY_ARGS)
    assert _dir_digest(a) == _dir_digest(b)


def test_gen_data_cue_zero_summary(tmp_path, capsys):
    out = tmp_path / "d"
    rc = main(["gen-data", "--out", str(out), "--seed", "2", "--cue-strength", "0"] + TINY_ARGS)
    assert rc == 0
    line = [l for l in capsys.readouterr().out.splitlines() if "neck-region" in l][0]
    assert float(line.split(":")[1]) == 0.0


def test_missing_corpus_exit_3(tmp_path):
    rc = main(["pretrain", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "run")])
    assert rc == 3


def test_unknown_override_exit_2(corpus, tmp_path):
    rc = main(["pretrain", "--data", str(corpus), "--out", str(tmp_path / "run"),
               "--bogus.key", "1"])
    assert rc == 2


def test_bad_value_exit_2(corpus, tmp_path):
    rc = main(["pretrain", "--data", str(corpus), "--out", str(tmp_path / "run"),
               "--pretrain.steps", "notanint"])
    assert rc == 2


@pytest.fixture(scope="module")
def pretrained(corpus, tmp_path_factory):
    run = tmp_path_factory.mktemp("cli_run")
    rc = main(["pretrain", "--data", str(corpus), "--out", str(run / "pt"),
               "--input", "face", "--target-input", "face", "--seed", "3"]
              + TINY_TRAIN)
    assert rc == 0
    return run / "pt" / "ckpt_iter0"


def test_pretrain_provenance_headers(corpus, pretrained, tmp_path):
    _store, meta = load_checkpoint(pretrained)
    assert meta["input_mode"] == "face"
    assert meta["target_input_mode"] == "face"
    # a second run with lip targets carries distinct provenance
    rc = main(["pretrain", "--data", str(corpus), "--out", str(tmp_path / "pt2"),
               "--input", "face", "--target-input", "lip", "--seed", "3"] + TINY_TRAIN)
    assert rc == 0
    _s2, meta2 = load_checkpoint(tmp_path / "pt2" / "ckpt_iter0")
    assert meta2["target_input_mode"] == "lip"
    assert meta["target_input_mode"] != meta2["target_input_mode"]


def test_run_dir_is_self_describing(pretrained):
    run_dir = os.path.dirname(pretrained)
    assert os.path.exists(os.path.join(run_dir, "config.txt"))
    assert os.path.exists(os.path.join(run_dir, "inputs.txt"))
    with open(os.path.join(run_dir, "inputs.txt")) as f:
        text = f.read()
    assert "data_digest = " in text
    assert not os.path.exists(os.path.join(run_dir, ".lock"))  # released


def test_finetune_requires_checkpoint_or_flag(corpus, tmp_path):
    rc = main(["finetune", "--data", str(corpus), "--out", str(tmp_path / "ft")] + TINY_TRAIN)
    assert rc == 2


def test_finetune_eval_and_saliency(corpus, pretrained, tmp_path, capsys):
    ft_dir = tmp_path / "ft"
    rc = main(["finetune", "--data", str(corpus), "--out", str(ft_dir),
               "--checkpoint", str(pretrained), "--seed", "3", "--input", "face"]
              + TINY_TRAIN)
    assert rc == 0
    ckpt = ft_dir / "ckpt_finetune"
    rc = main(["eval", "--data", str(corpus), "--checkpoint", str(ckpt),
               "--out", str(tmp_path / "ev")] + TINY_TRAIN)
    assert rc == 0
    out = capsys.readouterr().out
    assert "wer" in out
    assert os.path.exists(tmp_path / "ev" / "report.tsv")

    man = load_manifest(corpus)
    uid = man.records[0].utterance_id
    rc = main(["saliency", "--data", str(corpus), "--checkpoint", str(ckpt),
               "--utterance", uid, "--out", str(tmp_path / "sal"), "--pgm"])
    assert rc == 0
    from avlip.avt1 import read_avt1
    sal = read_avt1(tmp_path / "sal" / "saliency.avt1")
    assert sal.shape[1:] == (96, 96)
    assert sal.min() >= 0.0 and sal.max() <= 1.0
    assert any(n.endswith(".pgm") for n in os.listdir(tmp_path / "sal"))


def test_eval_missing_checkpoint_exit_3(corpus, tmp_path):
    rc = main(["eval", "--data", str(corpus), "--checkpoint", str(tmp_path / "none")])
    assert rc == 3


def test_finetune_no_pretrain_with_fraction(corpus, tmp_path):
    rc = main(["finetune", "--data", str(corpus), "--out", str(tmp_path / "ft0"),
               "--no-pretrain", "--labeled-fraction", "0.8", "--seed", "3",
               "--input", "face"] + TINY_TRAIN)
    assert rc == 0
    _store, meta = load_checkpoint(tmp_path / "ft0" / "ckpt_finetune")
    assert meta["pretrained"] == "False"
    assert meta["labeled_fraction"] == "0.8"


def test_probe_needs_two_test_speakers(corpus, pretrained, tmp_path):
    # 2-speaker corpus has a single test speaker -> config error
    rc = main(["probe", "--data", str(corpus), "--checkpoint", str(pretrained),
               "--out", str(tmp_path / "probe"), "--seed", "3"] + TINY_TRAIN)
    assert rc == 2


def test_lock_file_blocks_concurrent_runs(corpus, tmp_path):
    run = tmp_path / "locked"
    os.makedirs(run)
    with open(run / ".lock", "w") as f:
        f.write("999999")
    rc = main(["pretrain", "--data", str(corpus), "--out", str(run)] + TINY_TRAIN)
    assert rc == 2
