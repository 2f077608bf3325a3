"""Synthetic task suites whose labels live only in the knowledge.

Construction, per instance: the label is a fair coin, the task sentences are
uniform random words, so text alone carries zero information about the
label. One planted decisive rule makes the label recoverable: its head
restates the option's distinguishing sentence word by word through a fixed
word pairing (w_i -> k_i), and its tail is an affirm/refute marker agreeing
with the coin. With probability `confuser_prob` a second rule carries the
opposite marker under an unrelated head, so marker presence alone resolves
only three quarters of instances; full accuracy requires binding the rule
head back to the task text and reading that rule's tail. Remaining rules are
inert distractors drawn from a word pool disjoint from the task text.

Relevance labels: decisive rules are "relevant", confusers "partial",
distractors "irrelevant". The decisive rule's index within each rule list is
emitted for the inspection analysis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import (
    RELATIONS,
    AlphaNliInstance,
    CipInstance,
    KnowledgeRule,
)
from .errors import ConfigError

AFFIRM, REFUTE = "affirm", "refute"

ANTONYMS = {AFFIRM: REFUTE, REFUTE: AFFIRM}


@dataclass
class SynthConfig:
    n_instances: int = 1000
    vocab_size: int = 32
    rules_per_instance: int = 4
    fraction_decisive: float = 1.0
    confuser_prob: float = 0.5
    map_decisive_heads: bool = True
    confuser_same_class: bool = False
    seed: int = 0
    sentence_len: int = 3
    hypothesis_len: int = 4

    def __post_init__(self):
        if self.n_instances < 1:
            raise ConfigError(f"n_instances must be >= 1, got {self.n_instances}")
        if not 0.0 < self.fraction_decisive <= 1.0:
            raise ConfigError(
                f"fraction_decisive must be in (0, 1], got {self.fraction_decisive}"
            )
        if not 0.0 <= self.confuser_prob <= 1.0:
            raise ConfigError(f"confuser_prob must be in [0, 1], got {self.confuser_prob}")
        if self.rules_per_instance < 1:
            raise ConfigError(
                f"rules_per_instance must be >= 1, got {self.rules_per_instance}"
            )
        if self.vocab_size < 8:
            raise ConfigError(
                f"vocab_size {self.vocab_size} too small to build distractors"
            )


class _Pool:
    """Three disjoint word sets: task words for the instance text, their
    paired inference words for decisive rule heads, and filler words for
    distractor rules."""

    def __init__(self, cfg: SynthConfig):
        self.task_words = [f"w{i}" for i in range(cfg.vocab_size)]
        self.pair = {f"w{i}": f"k{i}" for i in range(cfg.vocab_size)}
        self.head_words = list(self.pair.values())
        self.filler_words = [f"d{i}" for i in range(max(cfg.vocab_size // 2, 4))]
        self.map_heads = cfg.map_decisive_heads
        self.confuser_same_class = cfg.confuser_same_class

    def sentence(self, rng, k, words=None) -> str:
        words = words if words is not None else self.task_words
        return " ".join(rng.choice(words, size=k).tolist())

    def decisive_head(self, source: str) -> str:
        if not self.map_heads:
            return source
        return " ".join(self.pair[w] for w in source.split())

    def confuser_head(self, rng, k) -> str:
        # optionally the same word class as decisive heads, which removes
        # any class-level cue to which marker matters
        if self.confuser_same_class:
            words = self.head_words if self.map_heads else self.task_words
            return self.sentence(rng, k, words)
        return self.sentence(rng, k, self.filler_words)


def _marker_rule(head: str, marker: str, rng, relevance: str) -> KnowledgeRule:
    return KnowledgeRule(
        head=head,
        relation=str(rng.choice(RELATIONS)),
        tail=marker,
        relevance=relevance,
    )


def _distractor_rule(pool: _Pool, rng, head_len: int) -> KnowledgeRule:
    return KnowledgeRule(
        head=pool.sentence(rng, head_len, pool.filler_words),
        relation=str(rng.choice(RELATIONS)),
        tail=str(rng.choice(pool.filler_words)),
        relevance="irrelevant",
    )


def _rule_list(
    pool: _Pool, rng, cfg: SynthConfig, matched_head: str, marker: str, decisive: bool
) -> tuple[list[KnowledgeRule], int | None]:
    """Assemble one option's rules; returns (rules, decisive index or None)."""
    rules = [
        _distractor_rule(pool, rng, cfg.hypothesis_len)
        for _ in range(cfg.rules_per_instance)
    ]
    slots = rng.permutation(cfg.rules_per_instance)
    decisive_at = None
    if decisive:
        decisive_at = int(slots[0])
        rules[decisive_at] = _marker_rule(
            pool.decisive_head(matched_head), marker, rng, "relevant"
        )
        if cfg.rules_per_instance > 1 and rng.random() < cfg.confuser_prob:
            rules[int(slots[1])] = _marker_rule(
                pool.confuser_head(rng, cfg.hypothesis_len), ANTONYMS[marker], rng, "partial"
            )
    return rules, decisive_at


def synth_alpha_nli(
    cfg: SynthConfig,
) -> tuple[list[AlphaNliInstance], dict[tuple[str, int], int | None]]:
    """Abductive-style instances with per-option planted rules."""
    rng = np.random.default_rng(cfg.seed)
    pool = _Pool(cfg)
    instances, decisive_index = [], {}
    for i in range(cfg.n_instances):
        o1 = pool.sentence(rng, cfg.sentence_len)
        o2 = pool.sentence(rng, cfg.sentence_len)
        h1 = pool.sentence(rng, cfg.hypothesis_len)
        h2 = pool.sentence(rng, cfg.hypothesis_len)
        while h2 == h1:
            h2 = pool.sentence(rng, cfg.hypothesis_len)
        gold = int(rng.integers(1, 3))
        decisive = bool(rng.random() < cfg.fraction_decisive)
        rules_per_option = []
        iid = f"syn-a{i}"
        for option, hyp in ((1, h1), (2, h2)):
            marker = AFFIRM if option == gold else REFUTE
            rules, at = _rule_list(pool, rng, cfg, hyp, marker, decisive)
            rules_per_option.append(rules)
            decisive_index[(iid, option)] = at
        instances.append(
            AlphaNliInstance(
                id=iid, o1=o1, o2=o2, h1=h1, h2=h2, gold=gold,
                rules_per_option=rules_per_option,
            )
        )
    return instances, decisive_index


def synth_cip(
    cfg: SynthConfig,
) -> tuple[list[CipInstance], dict[tuple[str, int], int | None]]:
    """Counterfactual-style instances; the decisive head repeats the
    counterfactual sentence and its marker encodes yes/no."""
    rng = np.random.default_rng(cfg.seed + 1)
    pool = _Pool(cfg)
    instances, decisive_index = [], {}
    for i in range(cfg.n_instances):
        s1 = pool.sentence(rng, cfg.sentence_len)
        s2 = pool.sentence(rng, cfg.sentence_len)
        s3 = pool.sentence(rng, cfg.sentence_len)
        s2_cf = pool.sentence(rng, cfg.sentence_len)
        while s2_cf == s2:
            s2_cf = pool.sentence(rng, cfg.sentence_len)
        gold = "yes" if rng.integers(2) else "no"
        decisive = bool(rng.random() < cfg.fraction_decisive)
        marker = AFFIRM if gold == "yes" else REFUTE
        rules, at = _rule_list(pool, rng, cfg, s2_cf, marker, decisive)
        iid = f"syn-c{i}"
        decisive_index[(iid, 1)] = at
        instances.append(
            CipInstance(id=iid, s1=s1, s2=s2, s3=s3, s2_cf=s2_cf, gold=gold, rules=rules)
        )
    return instances, decisive_index


def synth_generate(cfg: SynthConfig) -> dict:
    """Both task suites under one config; see synth_alpha_nli / synth_cip."""
    alpha, alpha_decisive = synth_alpha_nli(cfg)
    cip, cip_decisive = synth_cip(cfg)
    return {
        "alpha": alpha,
        "alpha_decisive": alpha_decisive,
        "cip": cip,
        "cip_decisive": cip_decisive,
    }


def corpus_texts(instances) -> list[str]:
    """All text needed to build a complete vocabulary over a dataset."""
    from .data import verbalize_rule

    texts = []
    for inst in instances:
        if isinstance(inst, AlphaNliInstance):
            texts += [inst.o1, inst.o2, inst.h1, inst.h2]
            rule_lists = inst.rules_per_option
        else:
            texts += [inst.s1, inst.s2, inst.s3, inst.s2_cf]
            rule_lists = [inst.rules]
        for rules in rule_lists:
            texts += [verbalize_rule(r) for r in rules]
    return texts
