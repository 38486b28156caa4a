"""Toy contextual encoder: embeddings + sinusoidal positions + one
single-head self-attention block with a position-wise feed-forward,
post-norm residuals throughout.

Stands in for a large pretrained encoder: small enough that full-model
finite-difference checks stay tractable, but still mixes context across
positions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


@dataclass
class EncoderParams:
    embed: Tensor          # |V| x k
    wq: Tensor             # k x k
    wk: Tensor
    wv: Tensor
    wo: Tensor
    ffn_w1: Tensor         # k x 2k
    ffn_b1: Tensor         # 2k
    ffn_w2: Tensor         # 2k x k
    ffn_b2: Tensor         # k
    ln1_gamma: Tensor      # k
    ln1_beta: Tensor
    ln2_gamma: Tensor
    ln2_beta: Tensor
    positions: np.ndarray  # max_seq_len x k, fixed sinusoidal table

    @property
    def k(self) -> int:
        return self.embed.data.shape[1]

    @property
    def max_seq_len(self) -> int:
        return self.positions.shape[0]

    def named(self) -> list[tuple[str, Tensor]]:
        """Trainable tensors in a fixed order; excludes the position table."""
        return [("enc." + name, getattr(self, name)) for name in (
            "embed", "wq", "wk", "wv", "wo",
            "ffn_w1", "ffn_b1", "ffn_w2", "ffn_b2",
            "ln1_gamma", "ln1_beta", "ln2_gamma", "ln2_beta")]


def sinusoidal_positions(max_seq_len: int, k: int) -> np.ndarray:
    pos = np.arange(max_seq_len)[:, None]
    freq = np.exp(-math.log(10000.0) * np.arange(0, k, 2) / k)
    table = np.zeros((max_seq_len, k))
    table[:, 0::2] = np.sin(pos * freq)
    table[:, 1::2] = np.cos(pos * freq)
    return table


def init_params(vocab_size: int, k: int, rng_seed: int,
                max_seq_len: int = 128) -> EncoderParams:
    """Embeddings and projections ~ uniform(-1/sqrt(k), 1/sqrt(k)),
    biases zero, layer-norm at identity. Deterministic per seed."""
    if k % 2 != 0:
        raise ValueError(f"k must be even for sinusoidal positions, got {k}")
    if k < 4:
        raise ValueError(f"k must be >= 4, got {k}")
    rng = np.random.default_rng(rng_seed)
    bound = 1.0 / math.sqrt(k)

    def u(*shape):
        return ad.parameter(rng.uniform(-bound, bound, size=shape))

    return EncoderParams(
        embed=u(vocab_size, k),
        wq=u(k, k), wk=u(k, k), wv=u(k, k), wo=u(k, k),
        ffn_w1=u(k, 2 * k), ffn_b1=ad.parameter(np.zeros(2 * k)),
        ffn_w2=u(2 * k, k), ffn_b2=ad.parameter(np.zeros(k)),
        ln1_gamma=ad.parameter(np.ones(k)), ln1_beta=ad.parameter(np.zeros(k)),
        ln2_gamma=ad.parameter(np.ones(k)), ln2_beta=ad.parameter(np.zeros(k)),
        positions=sinusoidal_positions(max_seq_len, k),
    )


def encode(params: EncoderParams, ids, mask: np.ndarray | None = None) -> Tensor:
    """Contextual states for a token id sequence, shape (len, k).

    An optional binary mask (from the dropout augmentation) is
    multiplied into the embedding+position matrix before attention.
    """
    length = len(ids)
    if not 1 <= length <= params.max_seq_len:
        raise ValueError(f"sequence length {length} outside [1, {params.max_seq_len}]")
    e = ad.embed_rows(params.embed, ids)
    e = ad.add(e, ad.constant(params.positions[:length]))
    if mask is not None:
        if mask.shape != (length, params.k):
            raise ValueError(f"mask shape {mask.shape} does not match states ({length}, {params.k})")
        e = ad.mul(e, ad.constant(mask))

    q = ad.matmul(e, params.wq)
    keys = ad.matmul(e, params.wk)
    v = ad.matmul(e, params.wv)
    scores = ad.scale(ad.matmul(q, ad.transpose(keys)), 1.0 / math.sqrt(params.k))
    attended = ad.matmul(ad.matmul(ad.softmax_rows(scores), v), params.wo)
    h = ad.layer_norm(ad.add(e, attended), params.ln1_gamma, params.ln1_beta)

    inner = ad.relu(ad.add_bias(ad.matmul(h, params.ffn_w1), params.ffn_b1))
    f = ad.add_bias(ad.matmul(inner, params.ffn_w2), params.ffn_b2)
    return ad.layer_norm(ad.add(h, f), params.ln2_gamma, params.ln2_beta)


def sentence_embedding(states: Tensor) -> Tensor:
    """Mean over token states, shape (k,)."""
    return ad.pool(states, "mean")
