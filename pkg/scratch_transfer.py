import time
import numpy as np
from mhka.synth import SynthConfig, synth_generate, corpus_texts
from mhka.text import build_vocab
from mhka.model import ModelConfig
from mhka.train import TrainConfig, fit, evaluate, transfer, subsample, seed_average
from mhka.checkpoint import save_checkpoint

t0 = time.time()
cfg = SynthConfig(n_instances=1700, seed=7, rules_per_instance=16)
suites = synth_generate(cfg)
alpha, cip = suites["alpha"], suites["cip"]
a_tr, a_dv, a_te = alpha[:1000], alpha[1000:1200], alpha[1200:]
c_tr, c_dv = cip[:1000], cip[1000:1200]

vocab = build_vocab(corpus_texts(c_tr))
mc = ModelConfig(vocab_size=len(vocab), d_model=64, n_heads=4, ctx_layers=1,
                 know_layers=1, reason_layers=2, d_ff=128, max_positions=256,
                 dropout=0.1, dtype="float32")
pre, m = fit("mhka", mc, vocab, c_tr, c_dv, TrainConfig(lr=3e-4, batch_size=8, epochs=8, seed=11))
print(f"cip pretrain dev={m.best_dev_accuracy:.3f} ({time.time()-t0:.0f}s)", flush=True)
import tempfile, os
ckpt = os.path.join(tempfile.mkdtemp(), "cip.npz")
save_checkpoint(ckpt, pre)

FT = TrainConfig(lr=3e-4, batch_size=8, epochs=10, seed=0)
seeds = [1, 2, 3, 4, 5]

def scratch_run(seed):
    tc = TrainConfig(lr=3e-4, batch_size=8, epochs=10, seed=seed, train_fraction=0.05)
    model, _ = fit("mhka", mc, vocab, a_tr, a_dv, tc)
    return evaluate(model, a_te)

def transfer_run(seed):
    from dataclasses import replace
    tc = replace(FT, seed=seed)
    subset = subsample(a_tr, 0.05, seed)
    model, _ = transfer(ckpt, subset, a_dv, tc)
    return evaluate(model, a_te)

t1 = time.time()
s = seed_average(scratch_run, seeds)
print(f"scratch: {s['mean']:.3f} var={s['variance']:.5f} per={np.round(s['per_seed'],3)} ({time.time()-t1:.0f}s)", flush=True)
t1 = time.time()
t = seed_average(transfer_run, seeds)
print(f"transfer: {t['mean']:.3f} var={t['variance']:.5f} per={np.round(t['per_seed'],3)} ({time.time()-t1:.0f}s)")
print(f"gain: {100*(t['mean']-s['mean']):.1f} pts, TOTAL {time.time()-t0:.0f}s")
