"""The full model: parameters plus the per-dialogue forward pass."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Param, Tensor
from .config import RunConfig
from .data import Dialogue
from .graph import MODALITY_OF_PAIR, PAIRS, BimodalGraph, assemble_adjacency, build_all_graphs, edge_weight_param
from .gsf import FusedRepresentation, GsfStack, ProjectionSet, glorot, gsf_forward, integrate_modalities, project_inputs, split_pair_output
from .heads import HeadParams, LossReport, predict, total_loss
from .sdp import ShiftBatch, build_shift_features, inverse_frequency_weights, segment_dialogue, shift_logits


@dataclass
class ForwardOutput:
    fused: FusedRepresentation
    emotion_probs: Tensor
    sentiment_probs: Tensor
    shift: ShiftBatch | None
    shift_probs: Tensor | None
    losses: LossReport

    @property
    def H(self) -> Tensor:
        return self.fused.H

    @property
    def emotion_preds(self) -> np.ndarray:
        return predict(self.emotion_probs)

    @property
    def sentiment_preds(self) -> np.ndarray:
        return predict(self.sentiment_probs)


@dataclass
class GraphSmile:
    cfg: RunConfig
    dims: tuple[int, int, int]
    num_emotions: int
    num_sentiments: int
    proj: ProjectionSet = field(init=False)
    stacks: dict[str, GsfStack] = field(init=False)
    edge_weights: dict[str, Param] = field(init=False)
    theta_h: Param = field(init=False)
    heads: HeadParams = field(init=False)
    emotion_class_weights: np.ndarray | None = None

    def __post_init__(self):
        cfg = self.cfg
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 7]))
        D, D_h = cfg.D, cfg.hidden
        P, F = cfg.P, cfg.window_future
        # Raw adjacency powers grow like (P+F+1)^l; shrink the propagation
        # matrices to match unless the adjacency is normalized.
        gain = 1.0 if cfg.normalize else 1.0 / (P + F + 1)
        self.proj = ProjectionSet.init(self.dims, D, rng)
        self.stacks = {
            pair: GsfStack.init(pair, cfg.L, D, rng, cfg.slope, cfg.dropout, theta_gain=gain) for pair in PAIRS
        }
        self.edge_weights = {pair: edge_weight_param(pair, P, F) for pair in PAIRS}
        self.theta_h = Param(glorot(rng, D, D_h), "fuse.theta_h")
        self.heads = HeadParams.init(D_h, self.num_emotions, self.num_sentiments, rng)
        self._graphs: dict[int, tuple[BimodalGraph, ...]] = {}

    @property
    def params(self) -> list[Param]:
        out = list(self.proj.params)
        for pair in PAIRS:
            out.append(self.edge_weights[pair])
            out.extend(self.stacks[pair].params)
        out.append(self.theta_h)
        out.extend(self.heads.params)
        return out

    def state(self) -> dict[str, np.ndarray]:
        return {p.name: p.value.copy() for p in self.params}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        by_name = {p.name: p for p in self.params}
        missing = set(by_name) - set(state)
        if missing:
            raise KeyError(f"state lacks parameters: {sorted(missing)}")
        for name, value in state.items():
            if name in by_name:
                by_name[name].assign(value)

    @property
    def active_pairs(self) -> tuple[str, ...]:
        dropped = set(self.cfg.dropped)
        return tuple(p for p in PAIRS if not dropped & set(MODALITY_OF_PAIR[p]))

    def graphs(self, M: int) -> tuple[BimodalGraph, ...]:
        if M not in self._graphs:
            self._graphs[M] = build_all_graphs(M, self.cfg.P, self.cfg.window_future, self.edge_weights)
        return self._graphs[M]

    def fuse(self, dialogue: Dialogue, training: bool = False, rng: np.random.Generator | None = None) -> FusedRepresentation:
        cfg = self.cfg
        X = project_inputs({m: dialogue.features(m) for m in "tva"}, self.proj)
        graphs = dict(zip(PAIRS, self.graphs(len(dialogue))))
        components: dict[str, Tensor] = {}
        for pair in self.active_pairs:
            m1, m2 = MODALITY_OF_PAIR[pair]
            A = assemble_adjacency(graphs[pair], cfg.normalize)
            X0 = ag.concat_rows([X[m1], X[m2]])
            out = gsf_forward(A, X0, self.stacks[pair], training, cfg.residual_mode, rng)
            components[f"{m1}<-{m2}"], components[f"{m2}<-{m1}"] = split_pair_output(out)
        if not components:
            # two modalities dropped: no pair graph remains
            components = {m: X[m] for m in "tva" if m not in cfg.dropped}
        return integrate_modalities(components, self.theta_h, cfg.slope)

    def forward(self, dialogue: Dialogue, training: bool = False, rng: np.random.Generator | None = None) -> ForwardOutput:
        cfg = self.cfg
        fused = self.fuse(dialogue, training, rng)
        H = fused.H
        emo_logits = self.heads.emotion.logits(H)
        sen_logits = self.heads.sentiment.logits(H)

        L_e = _masked_ce(emo_logits, dialogue.emotions, self.emotion_class_weights)
        L_s = _masked_ce(sen_logits, dialogue.sentiments)

        shift = shift_probs = None
        L_o: Tensor | float = 0.0
        sentiments = dialogue.sentiments
        if all(s is not None for s in sentiments):
            B = len(dialogue) if "no_seg" in cfg.ablations else cfg.B
            shift = build_shift_features(H, segment_dialogue(len(dialogue), B), sentiments)
            z = shift_logits(shift, self.heads.shift.weight, self.heads.shift.bias)
            shift_probs = ag.softmax_rows(z)
            weights = inverse_frequency_weights(shift.labels) if cfg.shift_weights else None
            L_o = ag.cross_entropy_logits(z, shift.labels, weights)

        report = total_loss(L_e, L_s, L_o, cfg.effective_lambda_s, cfg.effective_lambda_o)
        return ForwardOutput(fused, ag.softmax_rows(emo_logits), ag.softmax_rows(sen_logits), shift, shift_probs, report)


def _masked_ce(logits: Tensor, targets, class_weights=None) -> Tensor | float:
    idx = [i for i, t in enumerate(targets) if t is not None]
    if not idx:
        return 0.0
    if len(idx) < logits.rows:
        logits = ag.take_rows(logits, idx)
    return ag.cross_entropy_logits(logits, [targets[i] for i in idx], class_weights)
