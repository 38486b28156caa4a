"""Training objectives: sentence-level contrastive, pair-level
contrastive, classifier cross-entropy, and their weighted sum.

All three are built from autodiff ops so gradients reach the encoder
and interaction parameters. Index-set bookkeeping (who is a positive or
negative for whom) is baked into constant weight matrices; only the
similarities themselves carry gradients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .batcher import AugmentedBatch


@dataclass
class ClassifierParams:
    w: Tensor  # 3 x 4k
    b: Tensor  # 3

    def named(self) -> list[tuple[str, Tensor]]:
        return [("clf.w", self.w), ("clf.b", self.b)]


def init_classifier(pair_dim: int, rng_seed: int) -> ClassifierParams:
    rng = np.random.default_rng(rng_seed)
    bound = 1.0 / math.sqrt(pair_dim)
    return ClassifierParams(
        w=ad.parameter(rng.uniform(-bound, bound, size=(3, pair_dim))),
        b=ad.parameter(np.zeros(3)),
    )


@dataclass
class LossBreakdown:
    ce: Tensor
    scl_sent: Tensor
    scl_pair: Tensor
    total: Tensor
    tau: float
    alpha: float
    beta: float


def _check_tau(tau: float) -> None:
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")


def sentence_scl(prem_embs: Tensor, hyp_embs: Tensor,
                 batch: AugmentedBatch, tau: float) -> Tensor:
    """Sentence-level contrastive loss over premise anchors.

    For anchor view i the positive set P_i holds the sibling view's
    premise embedding plus, when pair origin(i) is labelled entailment,
    the hypothesis embeddings of both views of that pair; the negative
    set N_i holds those hypothesis embeddings when the label is
    contradiction. The per-anchor ratio is

        l_i = mean_{p in P_i} exp(cos(i, p)/tau)  /  D_i

    where the denominator D_i sums exp(cos(i, m)/tau) over:
      * anchor i's own members, m in P_i and N_i (each once), and
      * the hypothesis embedding of every view of a DIFFERENT origin
        pair whose label makes it a positive or negative (entailment or
        contradiction), once per view; neutral hypotheses and other
        premises never enter.
    Anchor i's own premise never enters D_i, and members of its origin
    pair enter only through P_i/N_i. The loss is the mean of -log l_i
    over anchors; the sibling positive keeps every P_i nonempty, so no
    anchor is ever skipped.
    """
    _check_tau(tau)
    size = batch.size
    if prem_embs.shape[0] != size or hyp_embs.shape[0] != size:
        raise ad.ShapeError(
            f"embeddings ({prem_embs.data.shape}, {hyp_embs.data.shape}) "
            f"do not cover the batch of {size} views")

    num_pp = np.zeros((size, size))
    num_ph = np.zeros((size, size))
    den_pp = np.zeros((size, size))
    den_ph = np.zeros((size, size))

    for i in range(size):
        # the sibling premise is always a positive, so P_i is never empty
        sibling = batch.same_origin[i]
        positives = 1 + len(batch.entail_pos[i])
        num_pp[i, sibling] = 1.0 / positives
        for j in batch.entail_pos[i]:
            num_ph[i, j] = 1.0 / positives

        den_pp[i, sibling] += 1.0
        for j in batch.entail_pos[i] + batch.contra_neg[i]:
            den_ph[i, j] += 1.0
        own = {i, sibling}
        for v in range(size):
            if v in own:
                continue
            if batch.entail_pos[v] or batch.contra_neg[v]:
                den_ph[i, v] += 1.0

    pn = ad.normalize_rows(prem_embs)
    hn = ad.normalize_rows(hyp_embs)
    e_pp = ad.exp(ad.scale(ad.matmul(pn, ad.transpose(pn)), 1.0 / tau))
    e_ph = ad.exp(ad.scale(ad.matmul(pn, ad.transpose(hn)), 1.0 / tau))

    num = ad.add(ad.sum_rows(ad.mul(e_pp, ad.constant(num_pp))),
                 ad.sum_rows(ad.mul(e_ph, ad.constant(num_ph))))
    den = ad.add(ad.sum_rows(ad.mul(e_pp, ad.constant(den_pp))),
                 ad.sum_rows(ad.mul(e_ph, ad.constant(den_ph))))
    return ad.scale(ad.sum_all(ad.log(ad.div(num, den))), -1.0 / size)


def pair_scl(zs: Tensor, labels, tau: float) -> Tensor:
    """Label-grouped contrastive loss over pair representations.

    With s_ik = cos(z_i, z_k)/tau and D_i = sum_{k != i} exp(s_ik), each
    anchor contributes -log sum_{p in P_i} exp(s_ip)/D_i where P_i holds
    the other views sharing i's label; anchors whose label is unique in
    the batch contribute 0. The total is the mean over contributing
    anchors, keeping the magnitude batch-size independent. At very high
    temperature the per-anchor term approaches log((2K-1)/|P_i|).
    """
    _check_tau(tau)
    labels = np.asarray(labels)
    size = zs.shape[0]
    if labels.shape != (size,):
        raise ad.ShapeError(f"labels shape {labels.shape} does not match {size} rows")

    same = (labels[:, None] == labels[None, :]) & ~np.eye(size, dtype=bool)
    active = same.any(axis=1)
    if not active.any():
        return ad.constant(0.0)
    pos = same.astype(float)
    pos[~active] = 0.0
    off_diag = (~np.eye(size, dtype=bool)).astype(float)
    off_diag[~active] = 0.0
    inactive = (~active).astype(float)

    zn = ad.normalize_rows(zs)
    e = ad.exp(ad.scale(ad.matmul(zn, ad.transpose(zn)), 1.0 / tau))
    num = ad.sum_rows(ad.mul(e, ad.constant(pos)))
    den = ad.sum_rows(ad.mul(e, ad.constant(off_diag)))
    ratio = ad.div(ad.add(num, ad.constant(inactive)),
                   ad.add(den, ad.constant(inactive)))
    return ad.scale(ad.sum_all(ad.log(ratio)), -1.0 / int(active.sum()))


def cross_entropy(params: ClassifierParams, zs: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of the true labels under the linear
    classifier's softmax, computed via log-sum-exp."""
    labels = np.asarray(labels)
    size = zs.shape[0]
    if labels.shape != (size,):
        raise ad.ShapeError(f"labels shape {labels.shape} does not match {size} rows")
    if ((labels < 0) | (labels > 2)).any():
        bad = labels[(labels < 0) | (labels > 2)][0]
        raise ValueError(f"label {bad} out of range [0, 2]")
    logits = ad.add_bias(ad.matmul(zs, ad.transpose(params.w)), params.b)
    log_probs = ad.log_softmax_rows(logits)
    onehot = np.zeros((size, 3))
    onehot[np.arange(size), labels] = 1.0
    return ad.scale(ad.sum_all(ad.mul(log_probs, ad.constant(onehot))), -1.0 / size)


def total_loss(ce: Tensor, scl_sent: Tensor, scl_pair: Tensor,
               alpha: float, beta: float, tau: float) -> LossBreakdown:
    """Weighted combination (ce + alpha*sent) + beta*pair; with
    alpha = beta = 0 the total is exactly the cross-entropy."""
    total = ad.add(ad.add(ce, ad.scale(scl_sent, alpha)), ad.scale(scl_pair, beta))
    return LossBreakdown(ce=ce, scl_sent=scl_sent, scl_pair=scl_pair,
                         total=total, tau=tau, alpha=alpha, beta=beta)
