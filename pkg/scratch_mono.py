import time
import numpy as np
from mhka.synth import SynthConfig, synth_cip, corpus_texts
from mhka.text import build_vocab
from mhka.model import ModelConfig
from mhka.train import TrainConfig, fit, evaluate
from dataclasses import replace

t0 = time.time()
cfg = SynthConfig(n_instances=1400, seed=21, rules_per_instance=8)
insts, _ = synth_cip(cfg)
tr, dv, te = insts[:1000], insts[1000:1100], insts[1100:]
vocab = build_vocab(corpus_texts(tr))
mc = ModelConfig(vocab_size=len(vocab), d_model=32, n_heads=4, ctx_layers=1,
                 know_layers=1, reason_layers=1, d_ff=64, max_positions=256,
                 dropout=0.1, dtype="float32")
base = TrainConfig(lr=1e-3, batch_size=8, epochs=6, seed=5)
accs = []
for frac in (0.01, 0.02, 0.05, 0.10, 1.0):
    model, _ = fit("mhka", mc, vocab, tr, dv, replace(base, train_fraction=frac))
    acc = evaluate(model, te)
    accs.append((frac, acc))
    print(f"frac={frac:5.2f} test={acc:.3f} ({time.time()-t0:.0f}s)", flush=True)
print("monotone within 3 pts:",
      all(b[1] >= a[1] - 0.03 for a, b in zip(accs, accs[1:])))
