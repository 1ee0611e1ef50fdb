"""Windowed bipartite dialogue graphs for the three modality pairs.

Node order within a pair graph: ``0..M-1`` are the first modality's nodes,
``M..2M-1`` the second's. Node ``i`` (either side) receives edges from the
other modality's nodes ``max(0, i-P) .. min(M-1, i+F)``. Edge weights are
trainable and shared across dialogues by direction and utterance offset
``dst_utt - src_utt``, which ranges over ``-F .. P``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Param, Tensor

PAIRS = ("tv", "ta", "va")


def edge_weight_param(pair: str, P: int, F: int) -> Param:
    """Row 0: edges into modality-1 nodes; row 1: into modality-2 nodes.
    Column ``offset + F``. Initialized to one, exempt from weight decay."""
    return Param(np.ones((2, P + F + 1)), name=f"edge.{pair}", decay=False)


@dataclass
class BimodalGraph:
    M: int
    pair: str
    P: int
    F: int
    src: np.ndarray
    dst: np.ndarray
    weight_index: np.ndarray
    weights: Param

    @property
    def num_edges(self) -> int:
        return int(self.src.size)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.src.tolist(), self.dst.tolist()))

    def offsets(self) -> np.ndarray:
        return (self.dst % self.M) - (self.src % self.M)

    def edge_values(self) -> np.ndarray:
        return self.weights.value.reshape(-1)[self.weight_index]

    def in_neighbors(self, node: int) -> list[int]:
        return sorted(self.src[self.dst == node].tolist())


def build_bimodal_graph(M: int, P: int, F: int, pair: str = "tv", weights: Param | None = None) -> BimodalGraph:
    if M < 1 or P < 0 or F < 0:
        raise ValueError(f"need M >= 1, P >= 0, F >= 0 (got M={M}, P={P}, F={F})")
    if weights is None:
        weights = edge_weight_param(pair, P, F)
    elif weights.value.shape != (2, P + F + 1):
        raise ValueError(f"edge weights for P={P}, F={F} must have shape (2, {P + F + 1})")
    width = P + F + 1
    src, dst, widx = [], [], []
    for side in (0, 1):
        dst_base, src_base = side * M, (1 - side) * M
        for i in range(M):
            for j in range(max(0, i - P), min(M - 1, i + F) + 1):
                src.append(src_base + j)
                dst.append(dst_base + i)
                widx.append(side * width + (i - j) + F)
    return BimodalGraph(
        M=M,
        pair=pair,
        P=P,
        F=F,
        src=np.asarray(src, dtype=np.int64),
        dst=np.asarray(dst, dtype=np.int64),
        weight_index=np.asarray(widx, dtype=np.int64),
        weights=weights,
    )


def build_all_graphs(M: int, P: int, F: int, weights: dict[str, Param] | None = None) -> tuple[BimodalGraph, ...]:
    weights = weights or {}
    return tuple(build_bimodal_graph(M, P, F, pair, weights.get(pair)) for pair in PAIRS)


def assemble_adjacency(g: BimodalGraph, normalize: bool = False) -> Tensor:
    """Dense ``2M x 2M`` adjacency with ``A[dst, src]`` = current edge weight.

    ``normalize`` applies ``D_r^{-1/2} A D_c^{-1/2}`` (row/column weight sums),
    a diagonal rescaling that keeps the zero diagonal blocks intact.
    """
    n = 2 * g.M
    A = ag.scatter_matrix(g.weights, g.dst, g.src, g.weight_index, (n, n))
    if normalize:
        r = ag.rsqrt_pos(ag.sum_axis(A, 1))
        c = ag.rsqrt_pos(ag.sum_axis(A, 0))
        A = ag.mul(ag.mul(A, r), c)
    return A


MODALITY_OF_PAIR = {"tv": ("t", "v"), "ta": ("t", "a"), "va": ("v", "a")}


def edge_rows(g: BimodalGraph) -> list[dict]:
    """Edge list in utterance/modality terms, for inspection output."""
    m1, m2 = MODALITY_OF_PAIR[g.pair]
    vals = g.edge_values()
    rows = []
    for s, d, w in zip(g.src.tolist(), g.dst.tolist(), vals.tolist()):
        rows.append(
            {
                "src_utt": s % g.M,
                "src_modality": m1 if s < g.M else m2,
                "dst_utt": d % g.M,
                "dst_modality": m1 if d < g.M else m2,
                "offset": d % g.M - s % g.M,
                "weight": w,
            }
        )
    return rows


def block_pattern(A: np.ndarray, M: int) -> dict:
    """Nonzero counts of the four M x M blocks of a pair adjacency."""
    A = np.asarray(A)
    return {
        "11": int(np.count_nonzero(A[:M, :M])),
        "12": int(np.count_nonzero(A[:M, M:])),
        "21": int(np.count_nonzero(A[M:, :M])),
        "22": int(np.count_nonzero(A[M:, M:])),
    }
