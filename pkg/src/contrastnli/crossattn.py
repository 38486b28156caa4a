"""Pair interaction module: co-attention over the two token-state
matrices, local enhancement of each side with what it attended to, and
mean/max pooling into a single joint vector of width 4k.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


@dataclass
class CrossAttnParams:
    w: Tensor         # d x k score projection
    p: Tensor         # d score vector
    f: Tensor         # k x 4k enhancement projection
    b: Tensor         # k enhancement bias
    ln_gamma: Tensor  # k
    ln_beta: Tensor   # k

    def named(self) -> list[tuple[str, Tensor]]:
        return [("cross." + name, getattr(self, name)) for name in (
            "w", "p", "f", "b", "ln_gamma", "ln_beta")]


def init_params(k: int, d: int, rng_seed: int) -> CrossAttnParams:
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    rng = np.random.default_rng(rng_seed)
    bound = 1.0 / math.sqrt(k)
    return CrossAttnParams(
        w=ad.parameter(rng.uniform(-bound, bound, size=(d, k))),
        p=ad.parameter(rng.uniform(-bound, bound, size=d)),
        f=ad.parameter(rng.uniform(-bound, bound, size=(k, 4 * k))),
        b=ad.parameter(np.zeros(k)),
        ln_gamma=ad.parameter(np.ones(k)),
        ln_beta=ad.parameter(np.zeros(k)),
    )


def coattention(params: CrossAttnParams, s_p: Tensor, s_h: Tensor) -> Tensor:
    """Relevance score matrix, entry (i, j) scoring premise token i
    against hypothesis token j."""
    return ad.coattention_scores(params.w, params.p, s_p, s_h)


def attend(c: Tensor, s_p: Tensor, s_h: Tensor) -> tuple[Tensor, Tensor]:
    """Each premise row becomes a softmax-weighted mix of hypothesis
    rows (weights from its score row), and symmetrically for the
    hypothesis over score columns."""
    attended_p = ad.matmul(ad.softmax_rows(c), s_h)
    attended_h = ad.matmul(ad.softmax_rows(ad.transpose(c)), s_p)
    return attended_p, attended_h


def interaction_features(s: Tensor, attended: Tensor) -> Tensor:
    """Per-row concatenation [s; s'; s - s'; s * s'], width 4k."""
    return ad.concat_cols([s, attended, ad.sub(s, attended), ad.mul(s, attended)])


def enhance(params: CrossAttnParams, s: Tensor, attended: Tensor) -> Tensor:
    """Project the interaction features back to width k through ReLU,
    then layer-normalize each row. Output shape equals the input shape.

    One projection (f, b) is shared across positions and across the
    premise/hypothesis sides.
    """
    u = interaction_features(s, attended)
    v = ad.relu(ad.add_bias(ad.matmul(u, ad.transpose(params.f)), params.b))
    return ad.layer_norm(v, params.ln_gamma, params.ln_beta)


def join(enhanced_p: Tensor, enhanced_h: Tensor) -> Tensor:
    """Fixed-width pair vector [mean_p; max_p; mean_h; max_h], width 4k."""
    return ad.concat([
        ad.pool(enhanced_p, "mean"), ad.pool(enhanced_p, "max"),
        ad.pool(enhanced_h, "mean"), ad.pool(enhanced_h, "max"),
    ])


def pair_forward(params: CrossAttnParams, s_p: Tensor, s_h: Tensor) -> Tensor:
    """Full pipeline: score, attend both ways, enhance both sides, pool."""
    c = coattention(params, s_p, s_h)
    attended_p, attended_h = attend(c, s_p, s_h)
    return join(enhance(params, s_p, attended_p),
                enhance(params, s_h, attended_h))
