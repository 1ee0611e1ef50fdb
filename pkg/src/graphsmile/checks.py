"""Finite-difference check of the full model on a tiny deterministic problem."""

from __future__ import annotations

import numpy as np

from .autograd import GradCheckReport, grad_check
from .config import RunConfig
from .data import Dialogue, Utterance, synthetic_scheme
from .model import GraphSmile

TINY = dict(D=6, D_h=6, L=3, B=2, P=1, dropout=0.0, epochs=0, lambda_s=1.0, lambda_o=0.7)


def tiny_problem(seed: int = 0, M: int = 4, dims=(3, 3, 3), **overrides) -> tuple[GraphSmile, Dialogue]:
    cfg = RunConfig(seed=seed, **{**TINY, **overrides})
    scheme = synthetic_scheme(4)
    rng = np.random.default_rng(seed)
    utts = []
    emotions = [0, 1, 2, 3, 1, 0, 2, 3][:M] if M <= 8 else list(rng.integers(0, 4, M))
    for i, e in enumerate(emotions):
        utts.append(
            Utterance(
                id=f"u{i}",
                feat_t=rng.standard_normal(dims[0]),
                feat_v=rng.standard_normal(dims[1]),
                feat_a=rng.standard_normal(dims[2]),
                emotion=int(e),
                sentiment=scheme.emotion_to_sentiment[int(e)],
            )
        )
    model = GraphSmile(cfg, tuple(dims), scheme.num_emotions, scheme.num_sentiments)
    # move edge weights off their all-ones start so their gradients are generic
    for p in model.edge_weights.values():
        p.assign(p.value + 0.1 * rng.standard_normal(p.value.shape))
    return model, Dialogue("tiny", utts)


def model_grad_check(model: GraphSmile, dialogue: Dialogue, h: float = 1e-5, tol: float = 1e-4) -> GradCheckReport:
    def closure():
        return model.forward(dialogue, training=False).losses.objective

    return grad_check(closure, model.params, h=h, tol=tol)
