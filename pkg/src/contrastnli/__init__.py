"""Contrastive sentence-pair training for three-way inference tasks.

A small numpy-backed autodiff core drives a toy contextual encoder, a
cross-attention pair module, sentence- and pair-level contrastive
losses alongside cross-entropy, a deterministic augmented-batch
pipeline, and an Adam training loop with checkpointing.
"""
from .autodiff import Tensor, backward, no_grad
from .augment import AugmentedView, Strategy, augment_pair
from .batcher import AugmentedBatch, build_batch
from .corpus import (SentencePair, SynthLexicon, Vocab, build_vocab,
                     gen_synthetic, load_jsonl, tokenize, write_jsonl)
from .losses import ClassifierParams, LossBreakdown, cross_entropy, pair_scl, sentence_scl, total_loss
from .trainer import (AdamState, Model, TrainConfig, adam_step,
                      checkpoint_load, checkpoint_save, evaluate,
                      export_embeddings, train)

__version__ = "0.1.0"
