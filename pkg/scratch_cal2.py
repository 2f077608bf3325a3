import sys, time
import numpy as np
from mhka.synth import SynthConfig, synth_alpha_nli, corpus_texts
from mhka.text import build_vocab, encode_knowledge
from mhka.data import verbalize_rule
from mhka.model import ModelConfig
from mhka.train import TrainConfig, fit, evaluate

R = int(sys.argv[1]); n_train = int(sys.argv[2]); epochs = int(sys.argv[3])
archs = sys.argv[4].split(",") if len(sys.argv) > 4 else ["blind", "joint", "mhka"]
cfg = SynthConfig(n_instances=n_train + 700, seed=7, rules_per_instance=R)
insts, _ = synth_alpha_nli(cfg)
tr, dv, te = insts[:n_train], insts[n_train:n_train+200], insts[n_train+200:]
vocab = build_vocab(corpus_texts(tr))
klen = len(encode_knowledge([verbalize_rule(r) for r in tr[0].rules_per_option[0]], vocab))
print(f"R={R} n_train={n_train} epochs={epochs} vocab={len(vocab)} klen={klen}")
mc = ModelConfig(vocab_size=len(vocab), d_model=64, n_heads=4, ctx_layers=1,
                 know_layers=1, reason_layers=2, d_ff=128, max_positions=256,
                 dropout=0.1, dtype="float32")
tc = TrainConfig(lr=3e-4, batch_size=8, epochs=epochs, seed=11)
for arch in archs:
    t0 = time.time()
    model, metrics = fit(arch, mc, vocab, tr, dv, tc)
    acc = evaluate(model, te)
    print(f"  {arch:6s} test={acc:.3f} time={time.time()-t0:.0f}s "
          f"dev={[round(a,2) for a in metrics.dev_accuracy]}", flush=True)
