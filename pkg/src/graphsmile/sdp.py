"""Sentiment dynamics: segmented pairwise shift labels, features and loss."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import LabelingError, ShapeError

NUM_SHIFT_CLASSES = 2


@dataclass(frozen=True)
class Segment:
    start: int
    end: int

    def __len__(self) -> int:
        return self.end - self.start


@dataclass
class ShiftBatch:
    pair_index: np.ndarray  # K x 2 utterance indices (i, j)
    segment_id: np.ndarray  # K
    features: Tensor  # K x 2D, row k = [h_i, h_j]
    labels: np.ndarray  # K, 0/1

    def __len__(self) -> int:
        return int(self.labels.size)


def segment_dialogue(M: int, B: int) -> list[Segment]:
    if B < 1:
        raise ValueError(f"segment size must be >= 1, got {B}")
    return [Segment(s, min(s + B, M)) for s in range(0, M, B)]


def _check_sentiments(sentiments: Sequence, start: int, end: int) -> np.ndarray:
    vals = list(sentiments[start:end])
    for k, s in enumerate(vals):
        if s is None:
            raise LabelingError(f"utterance {start + k} has no sentiment label")
    return np.asarray(vals, dtype=np.int64)


def make_shift_labels(sentiments: Sequence[int], segment: Segment | None = None) -> np.ndarray:
    """o[i, j] = 1 when the two utterances' sentiments differ, else 0."""
    if segment is None:
        segment = Segment(0, len(sentiments))
    s = _check_sentiments(sentiments, segment.start, segment.end)
    return (s[:, None] != s[None, :]).astype(np.int64)


def build_shift_features(H: Tensor, segments: Sequence[Segment], sentiments: Sequence[int]) -> ShiftBatch:
    """All ordered pairs within each segment, i outer and j inner, self-pairs included."""
    if H.rows != len(sentiments):
        raise ShapeError(f"H has {H.rows} rows for {len(sentiments)} utterances")
    left, right, seg_ids, labels = [], [], [], []
    for k, seg in enumerate(segments):
        idx = np.arange(seg.start, seg.end)
        left.append(np.repeat(idx, len(seg)))
        right.append(np.tile(idx, len(seg)))
        seg_ids.append(np.full(len(seg) ** 2, k))
        labels.append(make_shift_labels(sentiments, seg).reshape(-1))
    i = np.concatenate(left)
    j = np.concatenate(right)
    T = ag.concat_cols([ag.take_rows(H, i), ag.take_rows(H, j)])
    return ShiftBatch(np.stack([i, j], axis=1), np.concatenate(seg_ids), T, np.concatenate(labels))


def shift_logits(batch: ShiftBatch, theta_z: Tensor, b_z: Tensor) -> Tensor:
    if batch.features.cols != theta_z.rows:
        raise ShapeError(f"shift features {batch.features.shape} vs theta_z {theta_z.shape}")
    return ag.add(ag.matmul(batch.features, theta_z), b_z)


def shift_forward(batch: ShiftBatch, theta_z: Tensor, b_z: Tensor) -> Tensor:
    """K x 2 shift probabilities."""
    return ag.softmax_rows(shift_logits(batch, theta_z, b_z))


def shift_loss(probs: Tensor, labels: Sequence[int], class_weights=None) -> Tensor:
    """Mean negative log-likelihood over all K pairs."""
    return ag.cross_entropy(probs, labels, class_weights)


def shift_loss_from_logits(logits: Tensor, labels: Sequence[int], class_weights=None) -> Tensor:
    return ag.cross_entropy_logits(logits, labels, class_weights)


def inverse_frequency_weights(labels: np.ndarray, num_classes: int = NUM_SHIFT_CLASSES) -> np.ndarray:
    counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=num_classes).astype(float)
    w = np.zeros(num_classes)
    present = counts > 0
    w[present] = counts.sum() / (present.sum() * counts[present])
    return w
