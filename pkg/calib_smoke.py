"""Calibration: criterion-8-scale run (4 speakers, 200 utts, vocab 20)."""
import logging, os, sys, time, tempfile
logging.basicConfig(level=logging.INFO, format="%(message)s")
import numpy as np
from avlip.config import RunConfig
from avlip.synth import generate_corpus, vocabulary
from avlip.trainer import run_pretraining, finetune, ClipCache
from avlip.model import load_checkpoint
from avlip.evalkit import eval_wer
from avlip.preprocess import RegionMaskSpec
from avlip.cli import _rebuild_finetuned

tmp = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp()
os.makedirs(tmp, exist_ok=True)
cfg = RunConfig({"seed": 11})
t_start = time.time()

t0 = time.time()
man = generate_corpus(cfg.corpus_config(), os.path.join(tmp, "data"), threads=1)
print("gen-data: %.1f s (%d records)" % (time.time() - t0, len(man.records)), flush=True)

t0 = time.time()
ckpt, losses = run_pretraining(man, cfg.model_config(), cfg.pretrain_config(), 11,
                               os.path.join(tmp, "run"))
print("pretrain: %.1f s" % (time.time() - t0), flush=True)
for i, ls in enumerate(losses):
    print("iter%d loss: first100=%.3f last100=%.3f" % (i, np.mean(ls[:100]), np.mean(ls[-100:])), flush=True)

init_store, meta = load_checkpoint(ckpt)
t0 = time.time()
ft, fl = finetune(man, cfg.model_config(), cfg.finetune_config(), vocabulary(20), 11,
                  os.path.join(tmp, "run"), "face", init_store=init_store)
print("finetune: %.1f s  loss first50=%.3f last50=%.3f" % (time.time() - t0, np.mean(fl[:50]), np.mean(fl[-50:])), flush=True)

enc, dec, store, meta, mc = _rebuild_finetuned(ft)
cache = ClipCache(man, "face", RegionMaskSpec())
recs = man.by_split("test")
cache.prepare(recs)
t0 = time.time()
rate, pairs = eval_wer(enc, dec, cache, recs)
print("eval: %.1f s  WER=%.3f over %d utts" % (time.time() - t0, rate, len(recs)), flush=True)
for p in pairs[:6]:
    print("  ref=%s hyp=%s" % p, flush=True)
print("TOTAL: %.1f min" % ((time.time() - t_start) / 60), flush=True)
