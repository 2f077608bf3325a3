"""Task records, knowledge rules, dataset files, and rule verbalization.

Dataset files are UTF-8 JSON lines. Field names are part of the contract:

    abductive:  {id, obs1, obs2, hyp1, hyp2, label}      label in {1, 2}
    cip:        {id, s1, s2, s3, s2_cf, label}           label in {yes, no}
    knowledge:  {id, option, head, relation, tail, relevance?}
    rewrites:   {id, s1..s5, s2_cf, s3_cf, s4_cf, s5_cf}

Knowledge sidecars attach to instances by (id, option); option is 1 or 2 for
abductive hypotheses and 1 for cip (factual and counterfactual rules share
one list).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

import numpy as np

from .errors import DataError, LabelError, ParseError, RelationError
from .text import tokenize

RELATIONS = (
    "xIntent",
    "xNeed",
    "xAttr",
    "xReact",
    "xWant",
    "xEffect",
    "oReact",
    "oWant",
    "oEffect",
)

# Textual template per relation; PersonX is swapped for the head event's
# subject when the extractor finds one.
RELATION_TEMPLATES = {
    "xIntent": "because PersonX wanted",
    "xNeed": "PersonX needed",
    "xAttr": "PersonX is seen as",
    "xReact": "PersonX feels",
    "xWant": "PersonX wants",
    "xEffect": "effect on PersonX",
    "oReact": "others feel",
    "oWant": "others wants",
    "oEffect": "effect on others",
}

RELEVANCE_LEVELS = ("relevant", "partial", "irrelevant")

YES, NO = "yes", "no"


@dataclass
class KnowledgeRule:
    """One semi-structured inference rule: head event, relation, tail text."""

    head: str
    relation: str
    tail: str
    relevance: Optional[str] = None

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise RelationError(
                f"unknown relation {self.relation!r}; expected one of {RELATIONS}"
            )
        if self.relevance is not None and self.relevance not in RELEVANCE_LEVELS:
            raise LabelError(
                f"relevance must be one of {RELEVANCE_LEVELS}, got {self.relevance!r}"
            )


@dataclass
class AlphaNliInstance:
    id: str
    o1: str
    o2: str
    h1: str
    h2: str
    gold: int
    rules_per_option: list[list[KnowledgeRule]] = field(
        default_factory=lambda: [[], []]
    )

    def __post_init__(self):
        for name in ("o1", "o2", "h1", "h2"):
            if not getattr(self, name).strip():
                raise DataError(f"instance {self.id}: field {name} is empty")
        if self.gold not in (1, 2):
            raise LabelError(f"instance {self.id}: gold must be 1 or 2, got {self.gold}")
        if len(self.rules_per_option) != 2:
            raise DataError(f"instance {self.id}: need one rule list per option")


@dataclass
class CipInstance:
    id: str
    s1: str
    s2: str
    s3: str
    s2_cf: str
    gold: str
    rules: list[KnowledgeRule] = field(default_factory=list)

    def __post_init__(self):
        for name in ("s1", "s2", "s3", "s2_cf"):
            if not getattr(self, name).strip():
                raise DataError(f"instance {self.id}: field {name} is empty")
        if self.gold not in (YES, NO):
            raise LabelError(f"instance {self.id}: gold must be yes/no, got {self.gold!r}")
        if normalize_sentence(self.s2_cf) == normalize_sentence(self.s2):
            raise DataError(
                f"instance {self.id}: counterfactual equals the original context"
            )


@dataclass
class StoryRewrite:
    """A five-sentence story plus its counterfactual rewrite of the ending."""

    id: str
    s1: str
    s2: str
    s3: str
    s4: str
    s5: str
    s2_cf: str
    s3_cf: str
    s4_cf: str
    s5_cf: str


def normalize_sentence(text: str) -> str:
    """Lowercase, collapse whitespace, strip terminal punctuation."""
    out = " ".join(text.lower().split())
    return re.sub(r"[.!?,;:]+$", "", out).strip()


def _read_records(path) -> Iterable[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: not valid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise ParseError(f"{path}:{lineno}: record is not an object")
            yield lineno, record


def _require(record: dict, fields: tuple[str, ...], path, lineno: int) -> list:
    missing = [f for f in fields if f not in record]
    if missing:
        raise ParseError(f"{path}:{lineno}: missing field(s) {', '.join(missing)}")
    return [record[f] for f in fields]


def load_knowledge(path) -> dict[tuple[str, int], list[KnowledgeRule]]:
    """Read a knowledge sidecar keyed by (instance id, option)."""
    rules: dict[tuple[str, int], list[KnowledgeRule]] = {}
    for lineno, rec in _read_records(path):
        rid, option, head, relation, tail = _require(
            rec, ("id", "option", "head", "relation", "tail"), path, lineno
        )
        try:
            rule = KnowledgeRule(
                head=head, relation=relation, tail=tail, relevance=rec.get("relevance")
            )
        except (RelationError, LabelError) as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
        rules.setdefault((str(rid), int(option)), []).append(rule)
    return rules


def parse_alpha_nli(path, knowledge_path=None) -> list[AlphaNliInstance]:
    sidecar = load_knowledge(knowledge_path) if knowledge_path else {}
    instances = []
    for lineno, rec in _read_records(path):
        rid, o1, o2, h1, h2, label = _require(
            rec, ("id", "obs1", "obs2", "hyp1", "hyp2", "label"), path, lineno
        )
        if label not in (1, 2):
            raise LabelError(f"{path}:{lineno}: label must be 1 or 2, got {label!r}")
        rid = str(rid)
        instances.append(
            AlphaNliInstance(
                id=rid,
                o1=o1,
                o2=o2,
                h1=h1,
                h2=h2,
                gold=int(label),
                rules_per_option=[
                    sidecar.get((rid, 1), []),
                    sidecar.get((rid, 2), []),
                ],
            )
        )
    if not instances:
        raise DataError(f"{path}: no instances")
    return instances


def parse_cip(path, knowledge_path=None) -> list[CipInstance]:
    sidecar = load_knowledge(knowledge_path) if knowledge_path else {}
    instances = []
    for lineno, rec in _read_records(path):
        rid, s1, s2, s3, s2_cf, label = _require(
            rec, ("id", "s1", "s2", "s3", "s2_cf", "label"), path, lineno
        )
        if label not in (YES, NO):
            raise LabelError(f"{path}:{lineno}: label must be yes/no, got {label!r}")
        rid = str(rid)
        instances.append(
            CipInstance(
                id=rid,
                s1=s1,
                s2=s2,
                s3=s3,
                s2_cf=s2_cf,
                gold=label,
                rules=sidecar.get((rid, 1), []),
            )
        )
    if not instances:
        raise DataError(f"{path}: no instances")
    return instances


def parse_rewrites(path) -> list[StoryRewrite]:
    fields = ("id", "s1", "s2", "s3", "s4", "s5", "s2_cf", "s3_cf", "s4_cf", "s5_cf")
    rewrites = []
    for lineno, rec in _read_records(path):
        values = _require(rec, fields, path, lineno)
        rewrites.append(StoryRewrite(*[str(v) for v in values]))
    if not rewrites:
        raise DataError(f"{path}: no rewrites")
    return rewrites


def build_cip_from_rewrites(rewrites: list[StoryRewrite], seed: int = 0) -> list[CipInstance]:
    """Label each rewrite yes iff the original s3 survives the counterfactual
    edit (after normalization), then downsample the majority class uniformly
    at the given seed to exact balance.
    """
    if not rewrites:
        raise DataError("no rewrites to build from")
    candidates: list[CipInstance] = []
    for rw in rewrites:
        if normalize_sentence(rw.s2_cf) == normalize_sentence(rw.s2):
            continue  # cannot form a counterfactual instance
        gold = YES if normalize_sentence(rw.s3) == normalize_sentence(rw.s3_cf) else NO
        candidates.append(
            CipInstance(id=rw.id, s1=rw.s1, s2=rw.s2, s3=rw.s3, s2_cf=rw.s2_cf, gold=gold)
        )
    yes = [c for c in candidates if c.gold == YES]
    no = [c for c in candidates if c.gold == NO]
    k = min(len(yes), len(no))
    if k == 0:
        raise DataError("balancing produced an empty dataset")
    rng = np.random.default_rng(seed)

    def downsample(group):
        if len(group) == k:
            return group
        idx = sorted(rng.choice(len(group), size=k, replace=False).tolist())
        return [group[i] for i in idx]

    yes, no = downsample(yes), downsample(no)
    # interleave to keep the file order label-agnostic
    out = []
    for a, b in zip(yes, no):
        out.extend((a, b))
    return out


# Tokens that end like gerunds or participles but are not verbs.
_NOT_VERBS = {
    "something",
    "anything",
    "nothing",
    "everything",
    "thing",
    "morning",
    "evening",
    "spring",
    "king",
    "ring",
    "wing",
    "string",
    "bed",
    "red",
    "tired",
}

_COMMON_VERBS = {
    "is", "am", "are", "was", "were", "be", "been", "being",
    "has", "have", "had", "do", "does", "did", "done",
    "go", "goes", "went", "gone", "get", "gets", "got", "gotten",
    "make", "makes", "made", "take", "takes", "took", "taken",
    "come", "comes", "came", "see", "sees", "saw", "seen",
    "know", "knows", "knew", "think", "thinks", "thought",
    "say", "says", "said", "tell", "tells", "told",
    "find", "finds", "found", "give", "gives", "gave", "given",
    "feel", "feels", "felt", "eat", "eats", "ate", "eaten",
    "call", "calls", "buy", "buys", "bought", "keep", "keeps", "kept",
    "let", "lets", "put", "puts", "run", "runs", "ran",
    "win", "wins", "won", "lose", "loses", "lost",
    "sleep", "sleeps", "slept", "meet", "meets", "met", "leave", "leaves", "left",
    "spend", "spends", "spent", "begin", "begins", "began",
    "write", "writes", "wrote", "read", "reads",
    "drive", "drives", "drove", "ride", "rides", "rode",
    "sit", "sits", "sat", "stand", "stands", "stood",
    "fall", "falls", "fell", "grow", "grows", "grew",
    "can", "could", "will", "would", "shall", "should", "may", "might", "must",
    "want", "wants", "need", "needs", "like", "likes", "love", "loves",
    "try", "tries", "help", "helps", "start", "starts", "stop", "stops",
}


def _is_verb_like(token: str) -> bool:
    if token in _NOT_VERBS:
        return False
    if token in _COMMON_VERBS:
        return True
    if len(token) >= 4 and token.endswith("ed"):
        return True
    if len(token) >= 6 and token.endswith("ing"):
        return True
    return False


def extract_events(sentence: str) -> list[tuple[str, str, str]]:
    """Heuristic (subject, predicate, arguments) split of one sentence.

    The token run before the first verb-like token is the subject; the verb
    is the predicate; everything after is the arguments. Sentences with no
    verb-like token yield no events.
    """
    tokens = [t for t in tokenize(sentence) if t.isalnum() or "'" in t]
    for i, tok in enumerate(tokens):
        if _is_verb_like(tok):
            return [(" ".join(tokens[:i]), tok, " ".join(tokens[i + 1 :]))]
    return []


def verbalize_rule(rule: KnowledgeRule) -> str:
    """head + relation template + tail, lowercased, with PersonX swapped for
    the head event's extracted subject when one is found."""
    template = RELATION_TEMPLATES.get(rule.relation)
    if template is None:
        raise RelationError(f"unknown relation {rule.relation!r}")
    parts = [rule.head, template]
    if rule.tail.strip():
        parts.append(rule.tail)
    text = " ".join(" ".join(parts).lower().split())
    events = extract_events(rule.head)
    if events and events[0][0]:
        text = text.replace("personx", events[0][0])
    return text


def write_jsonl(path, records: Iterable[dict]):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def alpha_nli_record(inst: AlphaNliInstance) -> dict:
    return {
        "id": inst.id,
        "obs1": inst.o1,
        "obs2": inst.o2,
        "hyp1": inst.h1,
        "hyp2": inst.h2,
        "label": inst.gold,
    }


def cip_record(inst: CipInstance) -> dict:
    return {
        "id": inst.id,
        "s1": inst.s1,
        "s2": inst.s2,
        "s3": inst.s3,
        "s2_cf": inst.s2_cf,
        "label": inst.gold,
    }


def knowledge_records(inst) -> list[dict]:
    if isinstance(inst, AlphaNliInstance):
        per_option = enumerate(inst.rules_per_option, start=1)
    else:
        per_option = [(1, inst.rules)]
    out = []
    for option, rules in per_option:
        for rule in rules:
            rec = {
                "id": inst.id,
                "option": option,
                "head": rule.head,
                "relation": rule.relation,
                "tail": rule.tail,
            }
            if rule.relevance is not None:
                rec["relevance"] = rule.relevance
            out.append(rec)
    return out


def copy_alpha_instance(inst: AlphaNliInstance) -> AlphaNliInstance:
    return replace(inst, rules_per_option=[list(inst.rules_per_option[0]), list(inst.rules_per_option[1])])


def copy_cip_instance(inst: CipInstance) -> CipInstance:
    return replace(inst, rules=list(inst.rules))
