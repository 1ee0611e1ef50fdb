"""Training loop, evaluation, ablation and sweep drivers."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import autograd as ag
from .config import ABLATIONS, RunConfig
from .data import Dataset, split_train_val
from .errors import ConfigError, NumericError
from .heads import decay_term
from .metrics import EvalReport, classification_report
from .model import GraphSmile

log = logging.getLogger(__name__)

METRIC_COLUMNS = (
    "epoch",
    "L_e",
    "L_s",
    "L_o",
    "decay",
    "L_total",
    "train_acc",
    "train_wf1",
    "val_acc",
    "val_wf1",
)


@dataclass
class EpochRecord:
    epoch: int
    losses: dict
    train: EvalReport | None = None
    val: EvalReport | None = None

    def row(self) -> dict:
        row = {"epoch": self.epoch, **self.losses}
        row["train_acc"] = self.train.accuracy if self.train else ""
        row["train_wf1"] = self.train.weighted_f1 if self.train else ""
        row["val_acc"] = self.val.accuracy if self.val else ""
        row["val_wf1"] = self.val.weighted_f1 if self.val else ""
        return row


@dataclass
class TrainResult:
    model: GraphSmile
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int | None = None
    seconds: float = 0.0


def build_model(cfg: RunConfig, ds: Dataset) -> GraphSmile:
    model = GraphSmile(cfg, tuple(ds.dims), ds.scheme.num_emotions, ds.scheme.num_sentiments)
    if cfg.class_weights:
        model.emotion_class_weights = emotion_class_weights(ds)
    return model


def emotion_class_weights(ds: Dataset) -> np.ndarray:
    labels = [u.emotion for d in ds.dialogues for u in d.utterances if u.emotion is not None]
    counts = np.bincount(labels, minlength=ds.scheme.num_emotions).astype(float)
    w = np.zeros_like(counts)
    nz = counts > 0
    w[nz] = counts.sum() / (nz.sum() * counts[nz])
    return w


def step_rng(seed: int, epoch: int, step: int, dialogue: int) -> np.random.Generator:
    """Dropout stream for one dialogue's forward pass at one optimizer step."""
    return np.random.default_rng(np.random.SeedSequence([seed, 13, epoch, step, dialogue]))


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def train(
    dataset: Dataset,
    cfg: RunConfig,
    val: Dataset | None = None,
    model: GraphSmile | None = None,
) -> TrainResult:
    """Optimize the multitask objective with AdamW.

    Each step averages the objective over a batch of dialogues (one forward
    per dialogue, gradients accumulated). With a validation set, the params
    of the epoch with the best validation weighted F1 are restored at the end.
    """
    if not dataset.dialogues:
        raise ConfigError("cannot train on an empty dataset")
    start = time.perf_counter()
    model = model or build_model(cfg, dataset)
    params = model.params
    opt = ag.AdamW(params, lr=cfg.lr, weight_decay=cfg.weight_decay, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    order_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 11]))
    n = len(dataset.dialogues)
    result = TrainResult(model)
    best_wf1, best_state = -math.inf, None
    step = 0

    for epoch in range(1, cfg.epochs + 1):
        sums = {"L_e": 0.0, "L_s": 0.0, "L_o": 0.0}
        perm = order_rng.permutation(n)
        for b0 in range(0, n, cfg.batch_size):
            batch = perm[b0 : b0 + cfg.batch_size]
            step += 1
            opt.zero_grad()
            batch_total = 0.0
            for idx in batch:
                out = model.forward(dataset.dialogues[idx], training=True, rng=step_rng(cfg.seed, epoch, step, int(idx)))
                rep = out.losses
                batch_total += rep.L_total
                for k in sums:
                    sums[k] += getattr(rep, k)
                if rep.objective is not None:
                    ag.backward(ag.scale(rep.objective, 1.0 / len(batch)))
            if not math.isfinite(batch_total):
                raise NumericError(f"non-finite loss at epoch {epoch}, step {step}")
            opt.step()
        losses = {k: v / n for k, v in sums.items()}
        losses["decay"] = decay_term(params, cfg.weight_decay)
        losses["L_total"] = losses["L_e"] + cfg.effective_lambda_s * losses["L_s"] + cfg.effective_lambda_o * losses["L_o"]
        rec = EpochRecord(epoch, losses)
        if cfg.eval_train:
            rec.train = evaluate(dataset, model, cfg.task, epoch=epoch)
        if val is not None and val.dialogues:
            rec.val = evaluate(val, model, cfg.task, epoch=epoch)
            if rec.val.weighted_f1 > best_wf1:
                best_wf1, best_state = rec.val.weighted_f1, model.state()
                result.best_epoch = epoch
        result.history.append(rec)
        log.info(
            "epoch %d L_total=%.4f%s",
            epoch,
            losses["L_total"],
            f" val_wf1={rec.val.weighted_f1:.4f}" if rec.val else "",
        )
    if best_state is not None:
        model.load_state(best_state)
    result.seconds = time.perf_counter() - start
    return result


def predictions(dataset: Dataset, model: GraphSmile, task: str = "MERC") -> tuple[list[int], list[int], int]:
    """(truth, pred, excluded) over every labeled utterance, evaluation mode."""
    truth, pred, excluded = [], [], 0
    for d in dataset.dialogues:
        out = model.forward(d, training=False)
        if task == "MERC":
            labels, preds = d.emotions, out.emotion_preds
        else:
            labels, preds = d.sentiments, out.sentiment_preds
        for y, p in zip(labels, preds):
            if y is None:
                excluded += 1
            else:
                truth.append(int(y))
                pred.append(int(p))
    return truth, pred, excluded


def evaluate(dataset: Dataset, model: GraphSmile, task: str = "MERC", epoch: int | None = None) -> EvalReport:
    start = time.perf_counter()
    truth, pred, excluded = predictions(dataset, model, task)
    scheme = dataset.scheme
    names = list(scheme.emotion_names if task == "MERC" else scheme.sentiment_names)
    report = classification_report(truth, pred, len(names), excluded=excluded, epoch=epoch, class_names=names)
    report.seconds = time.perf_counter() - start
    return report


# ---------------------------------------------------------------------------
# drivers


def _split(dataset: Dataset, cfg: RunConfig, val: Dataset | None) -> tuple[Dataset, Dataset]:
    if val is not None:
        return dataset, val
    return split_train_val(dataset, cfg.val_fraction, cfg.seed)


def run_once(dataset: Dataset, cfg: RunConfig, val: Dataset | None = None, test: Dataset | None = None) -> tuple[TrainResult, EvalReport]:
    """Train (selecting on validation) and report on ``test``, or on the
    validation split when no test set is given."""
    train_ds, val_ds = _split(dataset, cfg, val)
    result = train(train_ds, cfg, val_ds)
    report = evaluate(test if test is not None else val_ds, result.model, cfg.task)
    report.seconds = result.seconds
    return result, report


SWEEP_AXES = ("depth", "window")


def sweep(
    dataset: Dataset,
    cfg: RunConfig,
    axis: str,
    values: Sequence[int],
    val: Dataset | None = None,
    test: Dataset | None = None,
) -> list[dict]:
    """One full train/eval per value of network depth (L) or window (P = F)."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    rows = []
    for v in values:
        run_cfg = replace(cfg, L=int(v)) if axis == "depth" else replace(cfg, P=int(v), F=int(v))
        _, report = run_once(dataset, run_cfg, val, test)
        rows.append(_report_row({"axis": axis, "value": int(v)}, report))
    return rows


def ablate(
    dataset: Dataset,
    cfg: RunConfig,
    modes: Iterable[str],
    val: Dataset | None = None,
    test: Dataset | None = None,
) -> list[dict]:
    """The full model plus one run per ablation mode, sharing the seed."""
    modes = list(modes)
    bad = [m for m in modes if m not in ABLATIONS]
    if bad:
        raise ConfigError(f"invalid ablation mode(s) {bad}; valid: {', '.join(ABLATIONS)}")
    rows = []
    for mode in ["full", *modes]:
        extra = () if mode == "full" else (mode,)
        run_cfg = replace(cfg, ablations=tuple(dict.fromkeys((*cfg.ablations, *extra))))
        _, report = run_once(dataset, run_cfg, val, test)
        rows.append(_report_row({"mode": mode}, report))
    return rows


def _report_row(prefix: dict, report: EvalReport) -> dict:
    row = dict(prefix)
    row["accuracy"] = report.accuracy
    row["weighted_f1"] = report.weighted_f1
    for name, f1 in zip(report.class_names, report.per_class_f1):
        row[f"f1_{name}"] = f1
    row["seconds"] = round(report.seconds, 3)
    return row


# ---------------------------------------------------------------------------
# CSV output


def write_csv(rows: Sequence[dict], path, columns: Sequence[str] | None = None) -> None:
    columns = list(columns or (rows[0].keys() if rows else ()))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c, "")) for c in columns])


def write_metrics_csv(history: Sequence[EpochRecord], path) -> None:
    write_csv([r.row() for r in history], path, METRIC_COLUMNS)


def write_loss_csv(history: Sequence[EpochRecord], path) -> None:
    write_csv([r.row() for r in history], path, ("epoch", "L_e", "L_s", "L_o", "decay", "L_total"))


def write_confusion_csv(report: EvalReport, path) -> None:
    names = report.class_names or [str(i) for i in range(report.confusion.shape[0])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["true\\pred", *names])
        for name, row in zip(names, report.confusion.tolist()):
            w.writerow([name, *row])


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
