"""Corpus loading, tokenization, vocabulary, and a synthetic task generator.

Sentence pairs come from JSONL files (one object per line with string
fields "premise", "hypothesis", "label") or from a rule-based generator
that produces a balanced three-way inference task small enough to train
on a laptop but with unambiguous labels.
"""
from __future__ import annotations

import json
import random
import string
from dataclasses import dataclass, field

LABELS = {"entailment": 0, "contradiction": 1, "neutral": 2}
LABEL_NAMES = ("entailment", "contradiction", "neutral")

PAD, UNK, DEL = "[PAD]", "[UNK]", "[DEL]"
MAX_SEQ_LEN = 128

_PUNCT = string.punctuation


class CorpusError(ValueError):
    """Malformed corpus content; the message names the offending line."""


@dataclass(frozen=True)
class SentencePair:
    """One inference example: tokenized premise, hypothesis, and label id."""
    premise: tuple[str, ...]
    hypothesis: tuple[str, ...]
    label: int

    def __post_init__(self):
        if not self.premise or not self.hypothesis:
            raise CorpusError("sentence pair with an empty side")
        if len(self.premise) > MAX_SEQ_LEN or len(self.hypothesis) > MAX_SEQ_LEN:
            raise CorpusError(f"sentence longer than {MAX_SEQ_LEN} tokens")
        if self.label not in (0, 1, 2):
            raise CorpusError(f"label id {self.label} out of range")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip leading/trailing ASCII punctuation."""
    out = []
    for raw in text.lower().split():
        tok = raw.strip(_PUNCT)
        if tok:
            out.append(tok)
    return out


def load_jsonl(path) -> list[SentencePair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusError(f"{path}:{lineno}: invalid JSON ({e.msg})") from e
            for key in ("premise", "hypothesis", "label"):
                if not isinstance(obj.get(key), str):
                    raise CorpusError(f"{path}:{lineno}: missing or non-string field {key!r}")
            label = obj["label"]
            if label not in LABELS:
                raise CorpusError(f"{path}:{lineno}: unknown label {label!r}")
            premise = tokenize(obj["premise"])
            hypothesis = tokenize(obj["hypothesis"])
            if not premise or not hypothesis:
                raise CorpusError(f"{path}:{lineno}: sentence empty after tokenization")
            try:
                pairs.append(SentencePair(tuple(premise), tuple(hypothesis), LABELS[label]))
            except CorpusError as e:
                raise CorpusError(f"{path}:{lineno}: {e}") from e
    return pairs


def write_jsonl(pairs, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(json.dumps({
                "premise": " ".join(p.premise),
                "hypothesis": " ".join(p.hypothesis),
                "label": LABEL_NAMES[p.label],
            }) + "\n")


class Vocab:
    """Token-to-id map with reserved ids 0=[PAD], 1=[UNK], 2=[DEL]."""

    def __init__(self, tokens):
        self._token_to_id = {PAD: 0, UNK: 1, DEL: 2}
        for tok in tokens:
            if tok not in self._token_to_id:
                self._token_to_id[tok] = len(self._token_to_id)
        self._id_to_token = {i: t for t, i in self._token_to_id.items()}

    def __len__(self) -> int:
        return len(self._token_to_id)

    def __contains__(self, token: str) -> bool:
        return token in self._token_to_id

    def id_of(self, token: str) -> int:
        return self._token_to_id.get(token, ID_UNK)

    def token_of(self, idx: int) -> str:
        return self._id_to_token[idx]

    def encode(self, tokens) -> list[int]:
        return [self.id_of(t) for t in tokens]

    def ordered_tokens(self) -> list[str]:
        """All tokens in id order, including the reserved ones."""
        return [self._id_to_token[i] for i in range(len(self._id_to_token))]


ID_PAD, ID_UNK, ID_DEL = 0, 1, 2


def build_vocab(pairs, min_count: int = 1) -> Vocab:
    """Keep tokens seen at least min_count times, assigning ids by
    descending frequency and then lexicographic order."""
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    if not pairs:
        raise CorpusError("cannot build a vocabulary from an empty corpus")
    counts: dict[str, int] = {}
    for p in pairs:
        for tok in p.premise + p.hypothesis:
            counts[tok] = counts.get(tok, 0) + 1
    kept = sorted((t for t, c in counts.items() if c >= min_count),
                  key=lambda t: (-counts[t], t))
    return Vocab(kept)


# ---------------------------------------------------------------------------
# synthetic corpus
# ---------------------------------------------------------------------------

@dataclass
class SynthLexicon:
    """Word relations driving the generator.

    hypernyms map an entity to a broader term (replacing gives an
    entailed hypothesis); antonyms map an attribute or verb to its
    opposite (replacing gives a contradiction); swapping the object for
    another pool member gives a neutral hypothesis.
    """
    hypernyms: dict[str, str]
    antonyms: dict[str, str]
    subjects: list[str]
    verbs: list[str]
    objects: list[str]

    def attributes(self) -> list[str]:
        return [w for w in self.antonyms if w not in self.verbs]


DEFAULT_LEXICON = SynthLexicon(
    hypernyms={
        # subjects
        "dog": "animal", "cat": "animal", "car": "vehicle", "truck": "vehicle",
        "rose": "flower", "tulip": "flower",
        # objects
        "ball": "toy", "doll": "toy", "hammer": "tool", "saw": "tool",
        "apple": "fruit", "pear": "fruit", "shirt": "garment", "hat": "garment",
        "chair": "furnishing", "bed": "furnishing",
    },
    antonyms={
        "fast": "slow", "big": "small", "hot": "cold",
        "new": "old", "bright": "dark", "heavy": "light",
        "takes": "gives", "opens": "closes", "lifts": "drops", "buys": "sells",
    },
    subjects=["dog", "cat", "car", "truck", "rose", "tulip"],
    verbs=["chases", "finds", "sees", "takes", "opens", "lifts", "buys"],
    objects=["ball", "doll", "hammer", "saw", "apple", "pear",
             "shirt", "hat", "chair", "bed"],
)


def load_synth_lexicon(path) -> SynthLexicon:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    missing = {"hypernyms", "antonyms", "subjects", "verbs", "objects"} - obj.keys()
    if missing:
        raise CorpusError(f"{path}: lexicon missing keys {sorted(missing)}")
    return SynthLexicon(obj["hypernyms"], obj["antonyms"],
                        obj["subjects"], obj["verbs"], obj["objects"])


def _article(word: str) -> str:
    return "an" if word[0] in "aeiou" else "a"


def _svo(subj: str, verb: str, obj: str | None) -> list[str]:
    sent = [_article(subj), subj, verb]
    if obj is not None:
        sent += [_article(obj), obj]
    return sent


def _attr_sentence(subj: str, attr: str) -> list[str]:
    return [_article(subj), subj, "is", attr]


def _hypernym(lexicon: SynthLexicon, word: str) -> str:
    hyper = lexicon.hypernyms.get(word)
    if hyper is None:
        raise CorpusError(f"lexicon has no hypernym for {word!r}")
    if hyper == word:
        raise CorpusError(f"lexicon maps {word!r} to itself")
    return hyper


def gen_synthetic(n_per_class: int, seed: int,
                  lexicon: SynthLexicon = DEFAULT_LEXICON) -> list[SentencePair]:
    """Generate a label-balanced corpus of n_per_class pairs per class.

    Entailment replaces an entity (usually the object, sometimes the
    subject) with its hypernym; contradiction replaces an attribute or
    verb with its antonym; neutral swaps the object for an unrelated
    pool member. Since both entailment and neutral edit the object
    slot, position alone cannot separate them: the label hangs on the
    relation between the swapped words. Deterministic for a given seed.
    """
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")
    rng = random.Random(seed)
    attrs = lexicon.attributes()
    antonym_verbs = [v for v in lexicon.verbs if v in lexicon.antonyms]
    pairs = []

    for _ in range(n_per_class):
        # entailment: generalize an entity to its hypernym
        subj = rng.choice(lexicon.subjects)
        r = rng.random()
        if r < 0.75:
            verb = rng.choice(lexicon.verbs)
            obj = rng.choice(lexicon.objects)
            prem = _svo(subj, verb, obj)
            hyp = _svo(subj, verb, _hypernym(lexicon, obj))
        elif r < 0.875:
            verb = rng.choice(lexicon.verbs)
            prem, hyp = _svo(subj, verb, None), _svo(_hypernym(lexicon, subj), verb, None)
        else:
            if not attrs:
                raise CorpusError("lexicon has no attributes (antonym keys beside verbs)")
            attr = rng.choice(attrs)
            prem, hyp = _attr_sentence(subj, attr), _attr_sentence(_hypernym(lexicon, subj), attr)
        pairs.append(SentencePair(tuple(prem), tuple(hyp), LABELS["entailment"]))

    for _ in range(n_per_class):
        # contradiction: negate an attribute or verb
        subj = rng.choice(lexicon.subjects)
        if attrs and (rng.random() < 0.5 or not antonym_verbs):
            attr = rng.choice(attrs)
            if lexicon.antonyms[attr] == attr:
                raise CorpusError(f"lexicon maps {attr!r} to itself")
            prem, hyp = _attr_sentence(subj, attr), _attr_sentence(subj, lexicon.antonyms[attr])
        else:
            if not antonym_verbs:
                raise CorpusError("lexicon has no verb with an antonym")
            verb = rng.choice(antonym_verbs)
            obj = rng.choice(lexicon.objects)
            prem = _svo(subj, verb, obj)
            hyp = _svo(subj, lexicon.antonyms[verb], obj)
        pairs.append(SentencePair(tuple(prem), tuple(hyp), LABELS["contradiction"]))

    for _ in range(n_per_class):
        # neutral: swap the object for an unrelated pool member
        if len(lexicon.objects) < 2:
            raise CorpusError("lexicon needs >= 2 objects for neutral pairs")
        subj = rng.choice(lexicon.subjects)
        verb = rng.choice(lexicon.verbs)
        obj = rng.choice(lexicon.objects)
        other = rng.choice([o for o in lexicon.objects
                            if o != obj and o != lexicon.hypernyms.get(obj)])
        pairs.append(SentencePair(tuple(_svo(subj, verb, obj)),
                                  tuple(_svo(subj, verb, other)),
                                  LABELS["neutral"]))
    return pairs
