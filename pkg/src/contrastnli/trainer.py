"""Training loop, Adam optimizer, evaluation, checkpointing, and
embedding export for the full model (encoder + interaction + classifier).
"""
from __future__ import annotations

import copy
import json
import logging
import random
from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from . import crossattn, encoder, losses
from .augment import Strategy, mix64
from .batcher import AugmentedBatch, build_batch
from .corpus import SentencePair, Vocab, build_vocab
from .crossattn import CrossAttnParams
from .encoder import EncoderParams
from .losses import ClassifierParams, LossBreakdown

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Unreadable checkpoint: wrong version, shape, or truncated payload."""


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    lr: float = 5e-5
    weight_decay: float = 1e-5
    tau: float = 0.08
    alpha: float = 1.0
    beta: float = 1.0
    eta: float = 0.1
    strategies: tuple[str, str] = ("reordering", "dropout")
    seed: int = 0
    k: int = 64
    d: int = 64
    max_seq_len: int = 128

    def __post_init__(self):
        if self.lr <= 0 or self.weight_decay < 0 or self.tau <= 0:
            raise ValueError("lr and tau must be positive, weight_decay nonnegative")
        if self.batch_size < 2:
            raise ValueError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        self.strategies = tuple(self.strategies)
        if len(self.strategies) != 2:
            raise ValueError("exactly two augmentation strategies are required")

    def strategy_objects(self) -> tuple[Strategy, Strategy]:
        return tuple(Strategy(kind, self.eta) for kind in self.strategies)


@dataclass
class Model:
    config: TrainConfig
    vocab: Vocab
    enc: EncoderParams
    cross: CrossAttnParams
    clf: ClassifierParams

    def named_parameters(self) -> list[tuple[str, ad.Tensor]]:
        return self.enc.named() + self.cross.named() + self.clf.named()

    def zero_grad(self) -> None:
        for _, p in self.named_parameters():
            p.grad = None


def init_model(config: TrainConfig, vocab: Vocab) -> Model:
    return Model(
        config=config,
        vocab=vocab,
        enc=encoder.init_params(len(vocab), config.k, mix64(config.seed, 1),
                                config.max_seq_len),
        cross=crossattn.init_params(config.k, config.d, mix64(config.seed, 2)),
        clf=losses.init_classifier(4 * config.k, mix64(config.seed, 3)),
    )


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(named_params, state: AdamState, lr: float, weight_decay: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """Adam with bias correction; weight decay is decoupled and applied
    to the parameter before the moment update."""
    state.t += 1
    t = state.t
    for name, p in named_params:
        if p.grad is None:
            raise ValueError(f"adam_step: no gradient for parameter {name!r}")
        g = p.grad
        if weight_decay:
            p.data -= lr * weight_decay * p.data
        m = state.m.setdefault(name, np.zeros_like(p.data))
        v = state.v.setdefault(name, np.zeros_like(p.data))
        m += (1.0 - beta1) * (g - m)
        v += (1.0 - beta2) * (g * g - v)
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)


# ---------------------------------------------------------------------------
# forward passes
# ---------------------------------------------------------------------------

def forward_view(model: Model, view) -> tuple[ad.Tensor, ad.Tensor, ad.Tensor]:
    """Premise embedding, hypothesis embedding, and pair vector for one view."""
    p_ids = model.vocab.encode(view.premise)
    h_ids = model.vocab.encode(view.hypothesis)
    s_p = encoder.encode(model.enc, p_ids, view.premise_mask)
    s_h = encoder.encode(model.enc, h_ids, view.hypothesis_mask)
    z = crossattn.pair_forward(model.cross, s_p, s_h)
    return encoder.sentence_embedding(s_p), encoder.sentence_embedding(s_h), z


def pair_representation(model: Model, pair: SentencePair) -> ad.Tensor:
    s_p = encoder.encode(model.enc, model.vocab.encode(pair.premise))
    s_h = encoder.encode(model.enc, model.vocab.encode(pair.hypothesis))
    return crossattn.pair_forward(model.cross, s_p, s_h)


def batch_loss(model: Model, batch: AugmentedBatch) -> LossBreakdown:
    prem, hyp, zs = [], [], []
    for view in batch.views:
        p_emb, h_emb, z = forward_view(model, view)
        prem.append(p_emb)
        hyp.append(h_emb)
        zs.append(z)
    prem_embs = ad.stack_rows(prem)
    hyp_embs = ad.stack_rows(hyp)
    z_mat = ad.stack_rows(zs)
    cfg = model.config
    ce = losses.cross_entropy(model.clf, z_mat, batch.labels)
    sent = losses.sentence_scl(prem_embs, hyp_embs, batch, cfg.tau)
    pair = losses.pair_scl(z_mat, batch.labels, cfg.tau)
    return losses.total_loss(ce, sent, pair, cfg.alpha, cfg.beta, cfg.tau)


# ---------------------------------------------------------------------------
# training and evaluation
# ---------------------------------------------------------------------------

def _check_finite(model: Model) -> None:
    for name, p in model.named_parameters():
        if not np.isfinite(p.data).all():
            raise ArithmeticError(f"parameter {name!r} became non-finite")


def train(config: TrainConfig, train_pairs: list[SentencePair],
          dev_pairs: list[SentencePair], *,
          synonyms: dict[str, list[str]] | None = None,
          back_translate_cmd: str | None = None) -> tuple[Model, list[dict]]:
    """Optimize on the training pairs; return the parameters from the
    epoch with the best dev accuracy plus per-batch metric records.

    Each epoch reshuffles (seeded), doubles every batch through the two
    augmentation strategies, and takes one Adam step per batch. The last
    record of each epoch carries that epoch's dev accuracy.
    """
    if not train_pairs:
        raise ValueError("empty training set")
    if not dev_pairs:
        raise ValueError("empty dev set")
    label_counts = np.bincount([p.label for p in train_pairs], minlength=3)
    if len(train_pairs) < 2 or (label_counts[label_counts > 0] < 2).all():
        log.warning("every label is a singleton; pair-level loss will mostly be zero")

    vocab = build_vocab(train_pairs, min_count=1)
    model = init_model(config, vocab)
    state = AdamState()
    strategies = config.strategy_objects()
    shuffler = random.Random(mix64(config.seed, 4))

    metrics: list[dict] = []
    best_acc, best_snapshot = -1.0, None

    for epoch in range(config.epochs):
        order = list(range(len(train_pairs)))
        shuffler.shuffle(order)
        chunks = [order[i:i + config.batch_size]
                  for i in range(0, len(order), config.batch_size)]
        chunks = [c for c in chunks if len(c) >= 2]
        epoch_records = []
        for b_idx, chunk in enumerate(chunks):
            batch = build_batch([train_pairs[i] for i in chunk], strategies,
                                mix64(config.seed, 5, epoch, b_idx),
                                embed_dim=config.k, synonyms=synonyms,
                                back_translate_cmd=back_translate_cmd)
            breakdown = batch_loss(model, batch)
            model.zero_grad()
            ad.backward(breakdown.total)
            adam_step(model.named_parameters(), state, config.lr,
                      config.weight_decay)
            _check_finite(model)
            epoch_records.append({
                "epoch": epoch, "batch": b_idx,
                "ce": breakdown.ce.item(),
                "scl_sent": breakdown.scl_sent.item(),
                "scl_pair": breakdown.scl_pair.item(),
                "total": breakdown.total.item(),
            })
        dev_acc = evaluate(model, dev_pairs)
        if epoch_records:
            epoch_records[-1]["dev_acc"] = dev_acc
        metrics.extend(epoch_records)
        if dev_acc > best_acc:
            best_acc = dev_acc
            best_snapshot = {name: p.data.copy()
                             for name, p in model.named_parameters()}

    if best_snapshot is not None:
        for name, p in model.named_parameters():
            p.data = best_snapshot[name].copy()
    return model, metrics


def predict(model: Model, pair: SentencePair) -> int:
    with ad.no_grad():
        z = pair_representation(model, pair)
        logits = model.clf.w.data @ z.data + model.clf.b.data
    return int(np.argmax(logits))


def evaluate(model: Model, pairs: list[SentencePair]) -> float:
    """Accuracy on unaugmented pairs; argmax ties go to the lowest class id."""
    if not pairs:
        raise ValueError("evaluate: no pairs")
    correct = sum(predict(model, p) == p.label for p in pairs)
    return correct / len(pairs)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def checkpoint_save(model: Model, path) -> None:
    """Single JSON header line (version, config, vocab, parameter table)
    followed by the little-endian float64 payload, in header order."""
    header = {
        "format_version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "vocab": model.vocab.ordered_tokens(),
        "params": [{"name": name, "shape": list(p.data.shape)}
                   for name, p in model.named_parameters()],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        for _, p in model.named_parameters():
            fh.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())


def checkpoint_load(path) -> Model:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"unreadable checkpoint header: {e}") from e
    version = header.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint format version {version} unsupported (expected {CHECKPOINT_VERSION})")

    cfg_dict = dict(header["config"])
    cfg_dict["strategies"] = tuple(cfg_dict["strategies"])
    config = TrainConfig(**cfg_dict)
    tokens = header["vocab"]
    vocab = Vocab(tokens[3:])
    if vocab.ordered_tokens() != tokens:
        raise CheckpointError("checkpoint vocabulary is not in id order")

    model = init_model(config, vocab)
    expected = {name: p for name, p in model.named_parameters()}
    offset = 0
    for entry in header["params"]:
        name, shape = entry["name"], tuple(entry["shape"])
        if name not in expected:
            raise CheckpointError(f"unknown parameter {name!r} in checkpoint")
        p = expected[name]
        if p.data.shape != shape:
            raise CheckpointError(
                f"parameter {name!r} has shape {shape}, expected {p.data.shape}")
        nbytes = int(np.prod(shape, dtype=np.int64)) * 8
        chunk = payload[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise CheckpointError(f"checkpoint payload truncated at parameter {name!r}")
        p.data = np.frombuffer(chunk, dtype="<f8").reshape(shape).copy()
        offset += nbytes
    if offset != len(payload):
        raise CheckpointError(f"{len(payload) - offset} trailing bytes in checkpoint payload")
    return model


def export_embeddings(model: Model, pairs: list[SentencePair], path) -> None:
    """CSV of pair vectors: header row, then one row per pair holding
    the label id followed by the 4k components."""
    dim = 4 * model.config.k
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("label," + ",".join(f"z{i}" for i in range(dim)) + "\n")
        with ad.no_grad():
            for pair in pairs:
                z = pair_representation(model, pair).data
                fh.write(str(pair.label) + "," + ",".join(repr(v) for v in z) + "\n")
