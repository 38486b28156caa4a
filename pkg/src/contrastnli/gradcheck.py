"""Finite-difference gradient verification.

The numeric side only ever calls the forward pass, so it is an
independent oracle for the backward rules. ``full_model_check`` runs it
over every parameter block of a tiny end-to-end model.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from .augment import mix64
from .batcher import build_batch
from .corpus import SentencePair, build_vocab
from .trainer import TrainConfig, batch_loss, init_model

DEFAULT_H = 1e-6
DEFAULT_FLOOR = 1e-8


def numeric_gradient(f: Callable[[], float], param: ad.Tensor,
                     h: float = DEFAULT_H) -> np.ndarray:
    """Central differences of f with respect to every element of param."""
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f()
        flat[i] = orig - h
        down = f()
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def relative_errors(analytic: np.ndarray, numeric: np.ndarray,
                    floor: float = DEFAULT_FLOOR) -> np.ndarray:
    """|a - n| / max(|a|, |n|, floor), elementwise."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def check_gradients(build_loss: Callable[[], ad.Tensor],
                    named_params, h: float = DEFAULT_H,
                    floor: float = DEFAULT_FLOOR) -> dict[str, float]:
    """Worst relative error per parameter block.

    build_loss must rebuild the forward pass from the current parameter
    values on every call.
    """
    loss = build_loss()
    for _, p in named_params:
        p.grad = None
    ad.backward(loss)
    analytic = {}
    for name, p in named_params:
        analytic[name] = np.zeros_like(p.data) if p.grad is None else p.grad.copy()

    def value() -> float:
        with ad.no_grad():
            return build_loss().item()

    report = {}
    for name, p in named_params:
        numeric = numeric_gradient(value, p, h)
        report[name] = float(relative_errors(analytic[name], numeric, floor).max())
    return report


@dataclass
class CheckResult:
    worst_by_block: dict[str, float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(v < self.tolerance for v in self.worst_by_block.values())

    def failures(self) -> list[str]:
        return [name for name, v in self.worst_by_block.items() if v >= self.tolerance]


_TINY_PAIRS = [
    SentencePair(("a", "dog", "chases", "a", "ball"),
                 ("an", "animal", "chases", "a", "ball"), 0),
    SentencePair(("a", "car", "is", "fast"),
                 ("a", "car", "is", "slow"), 1),
]


def full_model_check(seed: int = 0, k: int = 4, d: int = 4,
                     tolerance: float = 1e-4) -> CheckResult:
    """Finite-difference check of the total training loss on a 2-sample
    batch against every parameter block of a k=4 model."""
    config = TrainConfig(k=k, d=d, seed=seed, batch_size=2)
    vocab = build_vocab(_TINY_PAIRS)
    model = init_model(config, vocab)
    batch = build_batch(_TINY_PAIRS, config.strategy_objects(),
                        mix64(seed, 0xD1CE), embed_dim=k)
    report = check_gradients(lambda: batch_loss(model, batch).total,
                             model.named_parameters())
    return CheckResult(worst_by_block=report, tolerance=tolerance)
