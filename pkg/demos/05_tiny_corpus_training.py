"""
Softmax versus NCE on the bundled corpus
========================================

Both output layers train the same 2-layer LSTM (H=64) on about 100k tokens
of public-domain text; perplexity is always measured with the full softmax.
Each run takes a few minutes on one CPU core.
"""
import sys
import tempfile

from ncelm.config import preset
from ncelm.corpus import bundled_corpus_dir
from ncelm.trainer import run_experiment

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 13
out = tempfile.mkdtemp(prefix="ncelm-demo-")

results = {}
for head in ("softmax", "nce"):
    cfg = preset("tiny")
    cfg.head = head
    cfg.epochs = epochs
    cfg.schedule.tau = min(cfg.schedule.tau, epochs)
    report = run_experiment(cfg, bundled_corpus_dir(), f"{out}/{head}")
    results[head] = report
    curve = " ".join(f"{m['valid_ppl']:.0f}" for m in report["history"])
    print(f"{head:8s} valid ppl by epoch: {curve}")

print(f"unigram baseline test ppl: {results['softmax']['unigram_test_ppl']:.1f}")
for head, r in results.items():
    print(f"{head:8s} test ppl {r['test_ppl']:.1f} (best epoch {r['best_epoch']}, {r['seconds']:.0f}s)")
print("outputs in", out)
