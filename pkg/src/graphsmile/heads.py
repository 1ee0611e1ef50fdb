"""Emotion, sentiment and shift classifier heads and the multitask objective."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autograd as ag
from .autograd import Param, Tensor
from .errors import ConfigError, LabelingError, ShapeError
from .gsf import glorot
from .sdp import NUM_SHIFT_CLASSES


@dataclass
class Linear:
    weight: Param
    bias: Param

    @classmethod
    def init(cls, name: str, fan_in: int, fan_out: int, rng: np.random.Generator) -> "Linear":
        return cls(
            Param(glorot(rng, fan_in, fan_out), f"{name}.W"),
            Param(np.zeros((1, fan_out)), f"{name}.b", decay=False),
        )

    def logits(self, x: Tensor) -> Tensor:
        if x.cols != self.weight.rows:
            raise ShapeError(f"{self.weight.name}: input {x.shape} vs weight {self.weight.shape}")
        return ag.add(ag.matmul(x, self.weight), self.bias)


@dataclass
class HeadParams:
    emotion: Linear
    sentiment: Linear
    shift: Linear

    @classmethod
    def init(cls, D_h: int, num_emotions: int, num_sentiments: int, rng: np.random.Generator) -> "HeadParams":
        return cls(
            Linear.init("head.emotion", D_h, num_emotions, rng),
            Linear.init("head.sentiment", D_h, num_sentiments, rng),
            Linear.init("head.shift", 2 * D_h, NUM_SHIFT_CLASSES, rng),
        )

    @property
    def params(self) -> list[Param]:
        return [p for head in (self.emotion, self.sentiment, self.shift) for p in (head.weight, head.bias)]


def predict(probs) -> np.ndarray:
    """Row argmax; ties go to the lowest class index."""
    v = probs.value if isinstance(probs, Tensor) else np.asarray(probs)
    return np.argmax(v, axis=1)


def emotion_head(H: Tensor, params: HeadParams) -> tuple[Tensor, np.ndarray]:
    probs = ag.softmax_rows(params.emotion.logits(H))
    return probs, predict(probs)


def sentiment_head(H: Tensor, params: HeadParams) -> tuple[Tensor, np.ndarray]:
    probs = ag.softmax_rows(params.sentiment.logits(H))
    return probs, predict(probs)


def _targets(targets: Sequence) -> np.ndarray:
    for k, t in enumerate(targets):
        if t is None:
            raise LabelingError(f"utterance {k} is unlabeled")
    return np.asarray(targets, dtype=np.int64)


def emotion_loss(probs: Tensor, targets: Sequence[int], class_weights=None) -> Tensor:
    """Mean categorical cross-entropy over the dialogue's utterances."""
    return ag.cross_entropy(probs, _targets(targets), class_weights)


def sentiment_loss(probs: Tensor, targets: Sequence[int], class_weights=None) -> Tensor:
    return ag.cross_entropy(probs, _targets(targets), class_weights)


@dataclass
class LossReport:
    L_e: float
    L_s: float
    L_o: float
    lambda_s: float
    lambda_o: float
    weight_decay_term: float = 0.0
    objective: Tensor | None = None

    @property
    def L_total(self) -> float:
        return self.L_e + self.lambda_s * self.L_s + self.lambda_o * self.L_o

    def row(self) -> dict:
        return {
            "L_e": self.L_e,
            "L_s": self.L_s,
            "L_o": self.L_o,
            "decay": self.weight_decay_term,
            "L_total": self.L_total,
        }


def _scalar(x) -> float:
    return x.item() if isinstance(x, Tensor) else float(x)


def total_loss(L_e, L_s, L_o, lambda_s: float, lambda_o: float, weight_decay_term: float = 0.0) -> LossReport:
    """L_e + lambda_s * L_s + lambda_o * L_o.

    Components may be tensors (the returned report then carries the
    differentiable ``objective``) or plain numbers. Weight decay is applied by
    the optimizer and only recorded here.
    """
    if lambda_s < 0 or lambda_o < 0:
        raise ConfigError(f"trade-off weights must be >= 0 (lambda_s={lambda_s}, lambda_o={lambda_o})")
    objective = None
    if any(isinstance(x, Tensor) for x in (L_e, L_s, L_o)):
        objective = ag.const(L_e)
        if lambda_s:
            objective = ag.add(objective, ag.scale(ag.const(L_s), lambda_s))
        if lambda_o:
            objective = ag.add(objective, ag.scale(ag.const(L_o), lambda_o))
    return LossReport(_scalar(L_e), _scalar(L_s), _scalar(L_o), lambda_s, lambda_o, weight_decay_term, objective)


def decay_term(params: Sequence[Param], beta: float) -> float:
    """0.5 * beta * ||theta||^2 over decayed params: the penalty whose gradient
    equals the optimizer's decoupled decay step."""
    return 0.5 * beta * sum(float(np.sum(p.value * p.value)) for p in params if p.decay)
