"""Graph structure fusion: input projection, alternating simplified graph
convolution with FC residual sums, and six-way multimodal integration."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Param, Tensor
from .errors import ShapeError

RESIDUAL_MODES = ("full", "no_res", "no_fc_res")


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, gain: float = 1.0) -> np.ndarray:
    limit = gain * np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class ProjectionSet:
    weights: dict[str, Param]
    biases: dict[str, Param]

    @classmethod
    def init(cls, dims: tuple[int, int, int], D: int, rng: np.random.Generator) -> "ProjectionSet":
        weights, biases = {}, {}
        for m, d in zip("tva", dims):
            weights[m] = Param(glorot(rng, d, D), f"proj.{m}.W")
            biases[m] = Param(np.zeros((1, D)), f"proj.{m}.b", decay=False)
        return cls(weights, biases)

    @property
    def params(self) -> list[Param]:
        return [p for m in "tva" for p in (self.weights[m], self.biases[m])]


def project_inputs(features: dict[str, np.ndarray], proj: ProjectionSet) -> dict[str, Tensor]:
    """Affine map of each modality's M x d_m features to M x D. No activation."""
    out = {}
    for m in "tva":
        W = proj.weights[m]
        x = np.asarray(features[m], dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != W.rows:
            raise ShapeError(f"modality {m}: features {x.shape} do not match projection {W.shape}")
        out[m] = ag.add(ag.matmul(ag.const(x), W), proj.biases[m])
    return out


@dataclass
class GsfStack:
    pair: str
    thetas: list[Param]
    fc_weights: list[Param]
    fc_biases: list[Param]
    slope: float = 0.01
    dropout: float = 0.0

    @property
    def L(self) -> int:
        return len(self.thetas)

    @classmethod
    def init(
        cls,
        pair: str,
        L: int,
        D: int,
        rng: np.random.Generator,
        slope: float = 0.01,
        dropout: float = 0.0,
        theta_gain: float = 1.0,
    ) -> "GsfStack":
        if L < 1:
            raise ValueError("a GSF stack needs at least one layer")
        thetas = [Param(glorot(rng, D, D, theta_gain), f"gsf.{pair}.theta{l}") for l in range(1, L + 1)]
        fcw = [Param(glorot(rng, D, D), f"gsf.{pair}.fc{l}.W") for l in range(1, L + 1)]
        fcb = [Param(np.zeros((1, D)), f"gsf.{pair}.fc{l}.b", decay=False) for l in range(1, L + 1)]
        return cls(pair, thetas, fcw, fcb, slope, dropout)

    @property
    def params(self) -> list[Param]:
        return [*self.thetas, *self.fc_weights, *self.fc_biases]


def sgc_layer(A: Tensor, X: Tensor, theta: Tensor) -> Tensor:
    """One linear propagation step ``A @ X @ theta``."""
    if A.rows != A.cols or A.cols != X.rows or X.cols != theta.rows:
        raise ShapeError(f"sgc_layer shapes: A {A.shape}, X {X.shape}, theta {theta.shape}")
    return ag.matmul(ag.matmul(A, X), theta)


def gsf_forward(
    A: Tensor,
    X0: Tensor,
    stack: GsfStack,
    training: bool = False,
    mode: str = "full",
    rng: np.random.Generator | None = None,
    layers_out: list | None = None,
) -> Tensor:
    """Run ``L`` propagation steps and combine them.

    ``full``: X0 + sum_l FC_l(X_l); ``no_fc_res``: X0 + sum_l X_l;
    ``no_res``: FC_L(X_L) only. When ``layers_out`` is a list, the raw layer
    outputs X_1..X_L are appended to it.
    """
    if mode not in RESIDUAL_MODES:
        raise ValueError(f"unknown residual mode {mode!r}")
    X = X0
    total = X0
    for l in range(stack.L):
        X = sgc_layer(A, X, stack.thetas[l])
        if layers_out is not None:
            layers_out.append(X)
        if mode == "no_fc_res":
            total = ag.add(total, X)
            continue
        if mode == "no_res" and l < stack.L - 1:
            continue
        fc = ag.fc_layer(X, stack.fc_weights[l], stack.fc_biases[l], stack.slope, stack.dropout, training, rng)
        total = fc if mode == "no_res" else ag.add(total, fc)
    return total


def split_pair_output(X: Tensor) -> tuple[Tensor, Tensor]:
    """Rows of the first modality (0..M-1) and of the second (M..2M-1)."""
    n = X.rows
    if n % 2:
        raise ShapeError(f"pair output has odd row count {n}")
    M = n // 2
    return ag.slice_rows(X, 0, M), ag.slice_rows(X, M, n)


@dataclass
class FusedRepresentation:
    H: Tensor
    components: dict[str, Tensor] = field(default_factory=dict)


def integrate_modalities(components: dict[str, Tensor], theta_h: Tensor, slope: float = 0.01) -> FusedRepresentation:
    """H = sum over components of leaky_relu(X @ theta_h), one shared bias-free theta_h."""
    if not components:
        raise ShapeError("integrate_modalities needs at least one component")
    shapes = {c.shape for c in components.values()}
    if len(shapes) != 1:
        raise ShapeError(f"components disagree in shape: {sorted(shapes)}")
    H = None
    for X in components.values():
        term = ag.leaky_relu(ag.matmul(X, theta_h), slope)
        H = term if H is None else ag.add(H, term)
    return FusedRepresentation(H, dict(components))
