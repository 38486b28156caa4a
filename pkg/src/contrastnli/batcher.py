"""Doubled-batch construction for contrastive training.

K input pairs become 2K views (two augmentation strategies per pair,
views 2i and 2i+1 coming from pair i) together with the index sets the
sentence-level loss consumes:

  same_origin[i]  sibling view of i (the other augmentation of pair i)
  entail_pos[i]   views whose hypothesis is a positive for premise i
                  (both views of pair origin(i), when its label is
                  entailment)
  contra_neg[i]   views whose hypothesis is a negative (label
                  contradiction), built the same way

Augmentation seeds mix the batch seed with a content hash of each pair,
so reordering the input samples permutes the batch consistently.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .augment import (AugmentationError, AugmentedView, Strategy,
                      augment_pair, content_seed, mix64)
from .corpus import LABELS, SentencePair

log = logging.getLogger(__name__)

_ENTAILMENT = LABELS["entailment"]
_CONTRADICTION = LABELS["contradiction"]


@dataclass
class AugmentedBatch:
    views: list[AugmentedView]
    labels: np.ndarray
    same_origin: list[int]
    entail_pos: list[list[int]]
    contra_neg: list[list[int]]

    @property
    def size(self) -> int:
        return len(self.views)


def build_batch(samples: list[SentencePair],
                strategies: tuple[Strategy, Strategy],
                rng_seed: int, *,
                embed_dim: int | None = None,
                synonyms: dict[str, list[str]] | None = None,
                back_translate_cmd: str | None = None) -> AugmentedBatch:
    """Augment every sample once per strategy and derive the index sets.

    A sample whose augmentation fails (back-translation hook errors) is
    dropped whole, with a warning; fewer than two surviving samples is
    an error because the contrastive losses are undefined.
    """
    if len(samples) < 2:
        raise ValueError(f"need at least 2 samples per batch, got {len(samples)}")

    views: list[AugmentedView] = []
    for sample in samples:
        base = mix64(rng_seed, content_seed(sample))
        try:
            pair_views = [
                augment_pair(sample, strategy, mix64(base, slot),
                             embed_dim=embed_dim, synonyms=synonyms,
                             back_translate_cmd=back_translate_cmd)
                for slot, strategy in enumerate(strategies)
            ]
        except AugmentationError as e:
            log.warning("dropping sample from batch: %s", e)
            continue
        views.extend(pair_views)

    if len(views) < 4:
        raise ValueError("fewer than 2 samples survived augmentation")

    size = len(views)
    labels = np.array([v.label for v in views], dtype=np.int64)
    same_origin = [i ^ 1 for i in range(size)]
    entail_pos: list[list[int]] = []
    contra_neg: list[list[int]] = []
    for i in range(size):
        origin_views = [i & ~1, (i & ~1) + 1]
        entail_pos.append(origin_views if labels[i] == _ENTAILMENT else [])
        contra_neg.append(origin_views if labels[i] == _CONTRADICTION else [])
    return AugmentedBatch(views, labels, same_origin, entail_pos, contra_neg)
