"""Seeded text augmentation strategies producing alternate views of a pair.

Six strategies: synonym replacement, span reordering, word insertion,
word deletion (masking with [DEL]), embedding dropout (a binary mask
consumed by the encoder), and back translation through an external
command. Every strategy is a pure function of (input, seed) and never
touches the label.

The change budget for a sentence of length l is n = max(1, round(eta*l))
with round-half-up, capped at l, so even short sentences get one edit.
"""
from __future__ import annotations

import json
import logging
import math
import random
import shlex
import subprocess
from dataclasses import dataclass

import numpy as np

from .corpus import DEL, SentencePair, tokenize

log = logging.getLogger(__name__)

SYNONYM_REPLACEMENT = "synonym_replacement"
REORDERING = "reordering"
WORD_INSERTION = "word_insertion"
WORD_DELETION = "word_deletion"
DROPOUT = "dropout"
BACK_TRANSLATION = "back_translation"

STRATEGY_KINDS = (SYNONYM_REPLACEMENT, REORDERING, WORD_INSERTION,
                  WORD_DELETION, DROPOUT, BACK_TRANSLATION)

# Function words skipped by synonym replacement and insertion.
STOPWORDS = frozenset("""
a an the and or but if while of at by for with about against between into
through during before after above below to from up down in out on off over
under again then once here there all any both each few more most other some
such no nor not only own same so than too very can will just is are was were
be been being do does did have has had this that these those it its as i you
he she they we
""".split())


class AugmentationError(RuntimeError):
    """A strategy could not produce a view (e.g. the external hook failed)."""


@dataclass(frozen=True)
class Strategy:
    kind: str
    eta: float = 0.1

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")


@dataclass
class AugmentedView:
    """One augmented rendering of a sentence pair.

    Dropout leaves tokens untouched and attaches per-sentence binary
    masks for the encoder to multiply into the embedding matrix.
    """
    premise: list[str]
    hypothesis: list[str]
    label: int
    premise_mask: np.ndarray | None = None
    hypothesis_mask: np.ndarray | None = None


def mix64(*parts: int) -> int:
    """Deterministic 64-bit seed splitter (splitmix64 over the parts).

    Folding each part through the splitmix64 finalizer decorrelates
    derived seeds, so per-sentence and per-view streams are independent.
    """
    state = 0x9E3779B97F4A7C15
    for part in parts:
        state = (state + 0x9E3779B97F4A7C15 + (part & 0xFFFFFFFFFFFFFFFF)) & 0xFFFFFFFFFFFFFFFF
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
        state = z ^ (z >> 31)
    return state


def content_seed(pair: SentencePair) -> int:
    """Seed material derived from the pair's content, not its position,
    so shuffling a batch permutes its views consistently."""
    acc = mix64(pair.label)
    for tok in pair.premise:
        acc = mix64(acc, *tok.encode("utf-8"))
    acc = mix64(acc, 0x5E17)
    for tok in pair.hypothesis:
        acc = mix64(acc, *tok.encode("utf-8"))
    return acc


def change_budget(length: int, eta: float) -> int:
    """n = max(1, round-half-up(eta*l)), never more than l."""
    if length < 1:
        raise ValueError(f"sentence length must be >= 1, got {length}")
    return min(length, max(1, math.floor(eta * length + 0.5)))


def load_synonyms(path) -> dict[str, list[str]]:
    with open(path, encoding="utf-8") as fh:
        lex = json.load(fh)
    for word, syns in lex.items():
        if word in syns:
            raise ValueError(f"synonym lexicon maps {word!r} to itself")
    return lex


# ---------------------------------------------------------------------------
# strategies
# ---------------------------------------------------------------------------

def synonym_replace(tokens, lexicon, eta: float, rng_seed: int) -> list[str]:
    """Swap up to n non-stopword tokens for a random synonym each."""
    if not tokens:
        raise ValueError("empty token list")
    rng = random.Random(rng_seed)
    n = change_budget(len(tokens), eta)
    candidates = [i for i, t in enumerate(tokens)
                  if t not in STOPWORDS and lexicon.get(t)]
    out = list(tokens)
    for i in sorted(rng.sample(candidates, min(n, len(candidates)))):
        out[i] = rng.choice(lexicon[out[i]])
    return out


def reorder(tokens, eta: float, rng_seed: int) -> list[str]:
    """Swap n disjoint pairs of equal-length spans (best effort when the
    sentence is too short for the full budget)."""
    if len(tokens) < 2:
        return list(tokens)
    rng = random.Random(rng_seed)
    l = len(tokens)
    n = change_budget(l, eta)
    max_span = max(1, l // 4)
    out = list(tokens)
    free = [True] * l
    for _ in range(n):
        span = rng.randint(1, max_span)
        starts = [s for s in range(l - span + 1) if all(free[s:s + span])]
        # two spans must not overlap each other
        done = False
        for _attempt in range(8):
            if len(starts) < 2:
                break
            a = rng.choice(starts)
            disjoint = [s for s in starts if s + span <= a or s >= a + span]
            if not disjoint:
                continue
            b = rng.choice(disjoint)
            out[a:a + span], out[b:b + span] = out[b:b + span], out[a:a + span]
            for s in range(a, a + span):
                free[s] = False
            for s in range(b, b + span):
                free[s] = False
            done = True
            break
        if not done and span > 1:
            # retry once with single-token spans before giving up
            starts = [s for s in range(l) if free[s]]
            if len(starts) >= 2:
                a, b = rng.sample(starts, 2)
                out[a], out[b] = out[b], out[a]
                free[a] = free[b] = False
    return out


def word_insert(tokens, lexicon, eta: float, rng_seed: int) -> list[str]:
    """Insert synonyms of n random non-stopword tokens at random positions."""
    if not tokens:
        raise ValueError("empty token list")
    rng = random.Random(rng_seed)
    n = change_budget(len(tokens), eta)
    out = list(tokens)
    for _ in range(n):
        candidates = [t for t in out if t not in STOPWORDS and lexicon.get(t)]
        if not candidates:
            break
        word = rng.choice(candidates)
        out.insert(rng.randint(0, len(out)), rng.choice(lexicon[word]))
    return out


def word_delete(tokens, eta: float, rng_seed: int) -> list[str]:
    """Replace exactly n distinct positions with the [DEL] token."""
    if not tokens:
        raise ValueError("empty token list")
    rng = random.Random(rng_seed)
    n = change_budget(len(tokens), eta)
    out = list(tokens)
    for i in rng.sample(range(len(out)), n):
        out[i] = DEL
    return out


def dropout_mask(k: int, length: int, eta: float, rng_seed: int) -> np.ndarray:
    """Binary length-by-k mask with exactly max(1, round(eta*l*k)) zeros."""
    if k < 1 or length < 1:
        raise ValueError(f"mask needs k >= 1 and length >= 1, got k={k}, length={length}")
    cells = length * k
    budget = min(cells, max(1, math.floor(eta * cells + 0.5)))
    rng = np.random.default_rng(rng_seed)
    mask = np.ones(cells)
    mask[rng.choice(cells, size=budget, replace=False)] = 0.0
    return mask.reshape(length, k)


def back_translate(tokens, hook: str | None) -> list[str]:
    """Round-trip the sentence through an external command.

    The sentence goes to the command's stdin as one line; the first line
    of stdout is retokenized. A null hook is the identity (with a logged
    warning), a failing hook raises with the captured stderr.
    """
    if hook is None:
        log.warning("back_translation hook not configured; returning input unchanged")
        return list(tokens)
    proc = subprocess.run(shlex.split(hook), input=" ".join(tokens) + "\n",
                          capture_output=True, text=True)
    if proc.returncode != 0:
        raise AugmentationError(
            f"back-translation command failed (exit {proc.returncode}): {proc.stderr.strip()}")
    line = proc.stdout.splitlines()[0] if proc.stdout.splitlines() else ""
    out = tokenize(line)
    if not out:
        raise AugmentationError("back-translation produced an empty sentence")
    return out


# ---------------------------------------------------------------------------
# pair-level application
# ---------------------------------------------------------------------------

def _apply(tokens, strategy: Strategy, seed: int, synonyms, hook):
    if strategy.kind == SYNONYM_REPLACEMENT:
        return synonym_replace(tokens, synonyms or {}, strategy.eta, seed), None
    if strategy.kind == REORDERING:
        return reorder(tokens, strategy.eta, seed), None
    if strategy.kind == WORD_INSERTION:
        return word_insert(tokens, synonyms or {}, strategy.eta, seed), None
    if strategy.kind == WORD_DELETION:
        return word_delete(tokens, strategy.eta, seed), None
    if strategy.kind == BACK_TRANSLATION:
        return back_translate(tokens, hook), None
    raise ValueError(f"unhandled strategy {strategy.kind!r}")


def augment_pair(pair: SentencePair, strategy: Strategy, rng_seed: int, *,
                 embed_dim: int | None = None,
                 synonyms: dict[str, list[str]] | None = None,
                 back_translate_cmd: str | None = None) -> AugmentedView:
    """Apply one strategy independently to both sides of a pair.

    Premise and hypothesis use seeds mix64(rng_seed, 1) and
    mix64(rng_seed, 2). The label is copied unchanged.
    """
    p_seed, h_seed = mix64(rng_seed, 1), mix64(rng_seed, 2)
    if strategy.kind == DROPOUT:
        if embed_dim is None:
            raise ValueError("dropout strategy needs embed_dim to size its masks")
        return AugmentedView(
            premise=list(pair.premise),
            hypothesis=list(pair.hypothesis),
            label=pair.label,
            premise_mask=dropout_mask(embed_dim, len(pair.premise), strategy.eta, p_seed),
            hypothesis_mask=dropout_mask(embed_dim, len(pair.hypothesis), strategy.eta, h_seed),
        )
    prem, _ = _apply(pair.premise, strategy, p_seed, synonyms, back_translate_cmd)
    hyp, _ = _apply(pair.hypothesis, strategy, h_seed, synonyms, back_translate_cmd)
    return AugmentedView(premise=prem, hypothesis=hyp, label=pair.label)
