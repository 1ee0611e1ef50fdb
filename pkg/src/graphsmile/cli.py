"""Command-line entry point.

    graphsmile gen           --config synth.cfg --out runs/data
    graphsmile train         --preset iemocap6 --data train.jsonl --out runs/iemo6
    graphsmile eval          --config runs/iemo6/manifest.json --data test.jsonl --checkpoint runs/iemo6/params.json
    graphsmile ablate        --data d.jsonl --modes no_res,no_seg,drop_t
    graphsmile sweep         --data d.jsonl --axis depth --values 1,2,3,4
    graphsmile inspect-graph --set model.P=1 --M 4
    graphsmile inspect-shift --data d.jsonl --checkpoint params.json
    graphsmile grad-check

Every command writes ``manifest.json`` (resolved config, overrides, inputs)
into ``--out``. Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .autograd import load_params, save_params
from .checks import model_grad_check, tiny_problem
from .config import ResolvedConfig, load_config
from .data import Dataset, get_scheme, load_dataset, write_dataset
from .errors import ConfigError, DataError, GraphSmileError
from .graph import assemble_adjacency, block_pattern, build_bimodal_graph, edge_rows
from .model import GraphSmile
from .synth import SynthConfig, generate
from .train import (
    ablate,
    build_model,
    ensure_dir,
    evaluate,
    split_train_val,
    sweep,
    train,
    write_confusion_csv,
    write_csv,
    write_loss_csv,
    write_metrics_csv,
)

log = logging.getLogger("graphsmile")

COMMANDS = ("gen", "train", "eval", "ablate", "sweep", "inspect-graph", "inspect-shift", "grad-check")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file or a JSON run manifest")
    common.add_argument("--preset", help="built-in hyperparameter preset (iemocap6, iemocap4, meld, mosei)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    common.add_argument("--out", help="output directory (default runs/<command>)")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", help="training (or evaluation) JSONL; overrides data.train")
    data.add_argument("--val", help="validation JSONL; default is a seeded split of --data")
    data.add_argument("--test", help="test JSONL")

    p = argparse.ArgumentParser(prog="graphsmile", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("gen", parents=[common], help="write a synthetic dataset")
    sub.add_parser("train", parents=[common, data], help="train and evaluate")
    ev = sub.add_parser("eval", parents=[common, data], help="evaluate a checkpoint")
    ev.add_argument("--checkpoint", required=True)
    ab = sub.add_parser("ablate", parents=[common, data], help="full model vs ablation modes")
    ab.add_argument("--modes", default="", help="comma-separated ablation modes")
    sw = sub.add_parser("sweep", parents=[common, data], help="depth or window sweep")
    sw.add_argument("--axis", choices=("depth", "window"), required=True)
    sw.add_argument("--values", required=True, help="comma-separated integers")
    ig = sub.add_parser("inspect-graph", parents=[common], help="edge list of one pair graph")
    ig.add_argument("--M", type=int, default=4, help="utterance count")
    ig.add_argument("--pair", choices=("tv", "ta", "va"), default="tv")
    ig.add_argument("--checkpoint", help="read trained edge weights from this checkpoint")
    ish = sub.add_parser("inspect-shift", parents=[common, data], help="per-pair shift predictions")
    ish.add_argument("--checkpoint", help="trained parameters (default: freshly initialized)")
    gc = sub.add_parser("grad-check", parents=[common], help="finite-difference check of the tiny model")
    gc.add_argument("--h", type=float, default=1e-5)
    gc.add_argument("--tol", type=float, default=1e-4)
    return p


def _out_dir(args) -> Path:
    return ensure_dir(args.out or os.path.join("runs", args.command))


def _write_manifest(out: Path, args, cfg: ResolvedConfig, **extra) -> None:
    manifest = {
        "command": args.command,
        "version": __version__,
        "seed": cfg.run.seed,
        "config": cfg.flat(),
        "overrides": cfg.overrides,
        **extra,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=False) + "\n")


def _resolve(args) -> ResolvedConfig:
    cfg = load_config(args.config, args.preset, args.overrides)
    for key in ("data", "val", "test"):
        value = getattr(args, key, None)
        if value:
            cfg.paths["train" if key == "data" else key] = value
    return cfg


def _load(path: str | None, cfg: ResolvedConfig, what: str) -> Dataset | None:
    if not path:
        return None
    if not Path(path).exists():
        raise DataError(f"{what} file not found: {path}")
    return load_dataset(path, get_scheme(cfg.run.scheme))


def _require(ds: Dataset | None, what: str) -> Dataset:
    if ds is None:
        raise ConfigError(f"no {what} dataset given (use --data or data.train=...)")
    return ds


def _model_from_checkpoint(cfg: ResolvedConfig, ds: Dataset, path: str | None) -> GraphSmile:
    model = build_model(cfg.run, ds)
    if path:
        if not Path(path).exists():
            raise DataError(f"checkpoint not found: {path}")
        try:
            model.load_state(load_params(path))
        except (KeyError, ValueError) as exc:
            raise DataError(f"checkpoint {path}: {exc}") from exc
    return model


def cmd_gen(args, cfg: ResolvedConfig) -> None:
    s = cfg.synth
    synth = SynthConfig(
        num_dialogues=s.num_dialogues,
        utterances_per_dialogue=s.utterances_per_dialogue,
        dims=tuple(s.dims),
        num_emotions=s.num_emotions,
        signal_strength=s.signal_strength,
        modality_signal_split=tuple(s.modality_signal_split),
        shift_rate=s.shift_rate,
        emotion_persistence=s.emotion_persistence,
        seed=cfg.run.seed,
    )
    scheme = get_scheme(cfg.run.scheme)
    ds = generate(synth, scheme)
    out = _out_dir(args)
    write_dataset(ds, out / "dataset.jsonl")
    _write_manifest(out, args, cfg, outputs=["dataset.jsonl"])
    print(f"wrote {len(ds)} dialogues / {ds.num_utterances} utterances to {out / 'dataset.jsonl'}")


def _splits(cfg: ResolvedConfig):
    ds = _require(_load(cfg.paths.get("train"), cfg, "training"), "training")
    val = _load(cfg.paths.get("val"), cfg, "validation")
    test = _load(cfg.paths.get("test"), cfg, "test")
    return ds, val, test


def cmd_train(args, cfg: ResolvedConfig) -> None:
    run = cfg.run
    ds, val, test = _splits(cfg)
    if val is None:
        ds, val = split_train_val(ds, run.val_fraction, run.seed)
    out = _out_dir(args)
    result = train(ds, run, val)
    write_metrics_csv(result.history, out / "metrics.csv")
    write_loss_csv(result.history, out / "losses.csv")
    save_params(result.model.params, out / "params.json")
    final = evaluate(test if test is not None else val, result.model, run.task)
    write_confusion_csv(final, out / "confusion.csv")
    summary = {
        "best_epoch": result.best_epoch,
        "eval_split": "test" if test is not None else "val",
        "accuracy": final.accuracy,
        "weighted_f1": final.weighted_f1,
        "per_class_f1": dict(zip(final.class_names, final.per_class_f1)),
    }
    _write_manifest(out, args, cfg, result=summary, wall_clock_seconds=round(result.seconds, 3))
    print(f"{summary['eval_split']} ACC={final.accuracy:.4f} WF1={final.weighted_f1:.4f} (best epoch {result.best_epoch})")


def cmd_eval(args, cfg: ResolvedConfig) -> None:
    ds = _require(_load(cfg.paths.get("test") or cfg.paths.get("train"), cfg, "evaluation"), "evaluation")
    model = _model_from_checkpoint(cfg, ds, args.checkpoint)
    report = evaluate(ds, model, cfg.run.task)
    out = _out_dir(args)
    write_confusion_csv(report, out / "confusion.csv")
    summary = {
        "accuracy": report.accuracy,
        "weighted_f1": report.weighted_f1,
        "per_class_f1": dict(zip(report.class_names, report.per_class_f1)),
        "excluded": report.excluded,
    }
    _write_manifest(out, args, cfg, checkpoint=args.checkpoint, result=summary)
    print(f"ACC={report.accuracy:.4f} WF1={report.weighted_f1:.4f} over {report.total} utterances")


def cmd_ablate(args, cfg: ResolvedConfig) -> None:
    ds, val, test = _splits(cfg)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    rows = ablate(ds, cfg.run, modes, val, test)
    out = _out_dir(args)
    write_csv(rows, out / "ablation.csv")
    _write_manifest(out, args, cfg, modes=modes)
    for r in rows:
        print(f"{r['mode']:>10}  ACC={r['accuracy']:.4f}  WF1={r['weighted_f1']:.4f}")


def cmd_sweep(args, cfg: ResolvedConfig) -> None:
    ds, val, test = _splits(cfg)
    try:
        values = [int(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values must be comma-separated integers, got {args.values!r}") from None
    rows = sweep(ds, cfg.run, args.axis, values, val, test)
    out = _out_dir(args)
    write_csv(rows, out / f"sweep_{args.axis}.csv")
    _write_manifest(out, args, cfg, axis=args.axis, values=values)
    for r in rows:
        print(f"{args.axis}={r['value']:>3}  ACC={r['accuracy']:.4f}  WF1={r['weighted_f1']:.4f}")


def cmd_inspect_graph(args, cfg: ResolvedConfig) -> None:
    run = cfg.run
    g = build_bimodal_graph(args.M, run.P, run.window_future, args.pair)
    if args.checkpoint:
        state = load_params(args.checkpoint)
        key = f"edge.{args.pair}"
        if key not in state:
            raise DataError(f"checkpoint {args.checkpoint} has no {key}")
        g.weights.assign(state[key])
    out = _out_dir(args)
    rows = edge_rows(g)
    write_csv(rows, out / f"edges_{args.pair}.csv", ("src_utt", "src_modality", "dst_utt", "dst_modality", "offset", "weight"))
    pattern = block_pattern(assemble_adjacency(g, run.normalize).value, args.M)
    (out / f"blocks_{args.pair}.json").write_text(json.dumps(pattern) + "\n")
    _write_manifest(out, args, cfg, M=args.M, pair=args.pair)
    print(f"pair {args.pair}: M={args.M} P={run.P} F={run.window_future} edges={g.num_edges}")
    print(f"nonzeros per block: {pattern}")


def cmd_inspect_shift(args, cfg: ResolvedConfig) -> None:
    ds = _require(_load(cfg.paths.get("train"), cfg, "input"), "input")
    model = _model_from_checkpoint(cfg, ds, args.checkpoint)
    out = _out_dir(args)
    path = out / "shift.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dialogue", "segment", "i", "j", "label", "predicted", "p_shift"])
        for d in ds.dialogues:
            res = model.forward(d, training=False)
            if res.shift is None:
                continue
            probs = res.shift_probs.value
            for k, ((i, j), seg, lab) in enumerate(zip(res.shift.pair_index.tolist(), res.shift.segment_id.tolist(), res.shift.labels.tolist())):
                w.writerow([d.id, seg, i, j, lab, int(probs[k].argmax()), repr(float(probs[k, 1]))])
    _write_manifest(out, args, cfg, checkpoint=args.checkpoint)
    print(f"wrote {path}")


def cmd_grad_check(args, cfg: ResolvedConfig) -> int:
    model, dialogue = tiny_problem(seed=cfg.run.seed)
    report = model_grad_check(model, dialogue, h=args.h, tol=args.tol)
    print(f"max relative error {report.max_error:.3e} (tol {args.tol:g}) over {report.checked} coordinates")
    print(report)
    if args.out:
        out = _out_dir(args)
        (out / "grad_check.json").write_text(json.dumps({"max_error": report.max_error, "per_param": report.per_param}, indent=2) + "\n")
    return 0 if report.passed else 4


HANDLERS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "sweep": cmd_sweep,
    "inspect-graph": cmd_inspect_graph,
    "inspect-shift": cmd_inspect_shift,
    "grad-check": cmd_grad_check,
}


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("GRAPHSMILE_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = _parser().parse_args(argv)
    try:
        cfg = _resolve(args)
        status = HANDLERS[args.command](args, cfg)
        return int(status or 0)
    except GraphSmileError as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
