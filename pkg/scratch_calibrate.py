"""Scratch calibration for the synthetic suite (not part of the package)."""
import sys, time
import numpy as np
from mhka.synth import SynthConfig, synth_alpha_nli, corpus_texts
from mhka.text import build_vocab
from mhka.model import ModelConfig
from mhka.train import TrainConfig, fit, evaluate

n_train, n_dev, n_test = int(sys.argv[1]) if len(sys.argv) > 1 else 1000, 200, 500
epochs = int(sys.argv[2]) if len(sys.argv) > 2 else 10
lr = float(sys.argv[3]) if len(sys.argv) > 3 else 3e-4
share = bool(int(sys.argv[4])) if len(sys.argv) > 4 else False

cfg = SynthConfig(n_instances=n_train + n_dev + n_test, seed=7)
insts, decisive = synth_alpha_nli(cfg)
tr, dv, te = insts[:n_train], insts[n_train:n_train + n_dev], insts[n_train + n_dev:]
vocab = build_vocab(corpus_texts(tr))
print(f"vocab={len(vocab)} train={len(tr)} dev={len(dv)} test={len(te)}")

mc = ModelConfig(vocab_size=len(vocab), d_model=64, n_heads=4, ctx_layers=1,
                 know_layers=2, reason_layers=2, d_ff=256, max_positions=256,
                 dropout=0.1, share_embeddings=share, dtype="float32")
tc = TrainConfig(lr=lr, batch_size=8, epochs=epochs, seed=11)

for arch in ("blind", "joint", "mhka"):
    t0 = time.time()
    model, metrics = fit(arch, mc, vocab, tr, dv, tc)
    acc = evaluate(model, te)
    print(f"{arch:6s} test={acc:.3f} best_dev={metrics.best_dev_accuracy:.3f} "
          f"best_epoch={metrics.best_epoch} time={time.time()-t0:.1f}s "
          f"dev_curve={[round(a,2) for a in metrics.dev_accuracy]}")
