import time
import numpy as np
from mhka.synth import SynthConfig, synth_alpha_nli, corpus_texts, ANTONYMS
from mhka.text import build_vocab
from mhka.model import ModelConfig
from mhka.train import TrainConfig, fit, evaluate
from mhka.analysis import PerturbationSpec, perturbation_experiment, decisive_top_rate

t0 = time.time()
SYNTH_SEED, TRAIN_SEED = 7, 11
cfg = SynthConfig(n_instances=1700, seed=SYNTH_SEED, rules_per_instance=16)
insts, decisive = synth_alpha_nli(cfg)
tr, dv, te = insts[:1000], insts[1000:1200], insts[1200:]
vocab = build_vocab(corpus_texts(tr))
mc = ModelConfig(vocab_size=len(vocab), d_model=64, n_heads=4, ctx_layers=1,
                 know_layers=1, reason_layers=2, d_ff=128, max_positions=256,
                 dropout=0.1, dtype="float32")
tc = TrainConfig(lr=3e-4, batch_size=8, epochs=8, seed=TRAIN_SEED)
accs = {}
models = {}
for arch in ("blind", "joint", "mhka"):
    t1 = time.time()
    model, _ = fit(arch, mc, vocab, tr, dv, tc)
    accs[arch] = evaluate(model, te)
    models[arch] = model
    print(f"{arch}: {accs[arch]:.3f} ({time.time()-t1:.0f}s)", flush=True)
print(f"margin mhka-joint: {100*(accs['mhka']-accs['joint']):.1f} pts")

m = models["mhka"]
t1 = time.time()
rows = perturbation_experiment(
    m, te,
    [PerturbationSpec(mode="replace_relevant"),
     PerturbationSpec(mode="drop_random", k=1, seed=5, exclude_relevance=frozenset({"relevant"}))],
    ANTONYMS)
for r in rows:
    print(r, flush=True)
print(f"perturb time {time.time()-t1:.0f}s")
t1 = time.time()
top = decisive_top_rate(m, te[:200], decisive)
print("decisive top rate:", top, f"({time.time()-t1:.0f}s)")
print(f"TOTAL {time.time()-t0:.0f}s")
