"""Synthetic multimodal dialogues with a controllable class signal."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, Dialogue, LabelScheme, Utterance
from .errors import ConfigError


@dataclass(frozen=True)
class SynthConfig:
    num_dialogues: int = 40
    utterances_per_dialogue: int = 12
    dims: tuple[int, int, int] = (16, 16, 16)
    num_emotions: int = 4
    signal_strength: float = 3.0
    modality_signal_split: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    shift_rate: float = 0.2
    seed: int = 0
    emotion_persistence: float = 0.0

    def validate(self) -> None:
        if self.num_dialogues < 1 or self.utterances_per_dialogue < 1 or self.num_emotions < 1:
            raise ConfigError("synthetic counts must all be >= 1")
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise ConfigError(f"dims must be three positive integers, got {self.dims}")
        if self.signal_strength < 0:
            raise ConfigError("signal_strength must be >= 0")
        split = self.modality_signal_split
        if len(split) != 3 or min(split) < 0 or abs(sum(split) - 1.0) > 1e-9:
            raise ConfigError(f"modality_signal_split must be 3 non-negative reals summing to 1, got {split}")
        if not 0.0 <= self.shift_rate <= 1.0:
            raise ConfigError("shift_rate must lie in [0, 1]")
        if not 0.0 <= self.emotion_persistence <= 1.0:
            raise ConfigError("emotion_persistence must lie in [0, 1]")


def transition_matrix(scheme: LabelScheme, shift_rate: float, persistence: float = 0.0) -> np.ndarray:
    """Symmetric emotion transition matrix with stationary uniform marginal.

    Every cross-sentiment move has the same probability ``q``. The remaining
    within-sentiment mass goes to staying with weight ``persistence`` and is
    otherwise spread uniformly over the group (staying included). The matrix
    is symmetric, hence doubly stochastic, and the expected sentiment-change
    frequency under the uniform marginal is exactly ``shift_rate``.
    """
    groups = np.asarray(scheme.emotion_to_sentiment)
    c = groups.size
    size = np.array([(groups == g).sum() for g in groups])
    outside = c - size
    if shift_rate == 0.0:
        q = 0.0
    elif outside.sum() == 0:
        raise ConfigError(f"scheme {scheme.name} has a single sentiment; shift_rate must be 0")
    else:
        q = shift_rate * c / outside.sum()
    stay = 1.0 - q * outside
    if np.any(stay < -1e-12):
        raise ConfigError(f"shift_rate {shift_rate} is not reachable for scheme {scheme.name}")
    same = groups[:, None] == groups[None, :]
    spread = (1.0 - persistence) * stay / size
    T = np.where(same, spread[:, None], q) + np.diag(persistence * stay)
    return T / T.sum(axis=1, keepdims=True)


def prototypes(cfg: SynthConfig) -> list[np.ndarray]:
    """One unit-norm prototype per (class, modality), drawn from the config seed."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    out = []
    for d in cfg.dims:
        p = rng.standard_normal((cfg.num_emotions, d))
        out.append(p / np.linalg.norm(p, axis=1, keepdims=True))
    return out


def generate(cfg: SynthConfig, scheme: LabelScheme) -> Dataset:
    cfg.validate()
    if scheme.num_emotions != cfg.num_emotions:
        raise ConfigError(
            f"scheme {scheme.name} has {scheme.num_emotions} emotions, config asks for {cfg.num_emotions}"
        )
    T = transition_matrix(scheme, cfg.shift_rate, cfg.emotion_persistence)
    protos = prototypes(cfg)
    gains = [cfg.signal_strength * s for s in cfg.modality_signal_split]
    C, M = cfg.num_emotions, cfg.utterances_per_dialogue

    dialogues = []
    for k in range(cfg.num_dialogues):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1, k]))
        labels = [int(rng.integers(C))]
        for _ in range(M - 1):
            labels.append(int(rng.choice(C, p=T[labels[-1]])))
        utts = []
        for i, e in enumerate(labels):
            feats = [gain * proto[e] + rng.standard_normal(proto.shape[1]) for gain, proto in zip(gains, protos)]
            utts.append(
                Utterance(
                    id=f"u{i}",
                    speaker="AB"[i % 2],
                    feat_t=feats[0],
                    feat_v=feats[1],
                    feat_a=feats[2],
                    emotion=e,
                    sentiment=scheme.emotion_to_sentiment[e],
                )
            )
        dialogues.append(Dialogue(f"d{k}", utts))
    return Dataset(dialogues, scheme, tuple(cfg.dims))
