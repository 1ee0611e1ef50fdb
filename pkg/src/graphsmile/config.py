"""Run configuration: flat ``key=value`` text with dotted namespaces.

A config file is a list of ``section.key=value`` lines (``#`` comments,
blank lines ignored). JSON run manifests written by the CLI are accepted as
configs as well. Overrides are applied after parsing, last writer wins.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

from .errors import ConfigError

ABLATIONS = ("no_res", "no_fc_res", "no_seg", "drop_t", "drop_v", "drop_a", "no_Ls", "no_Lo")
TASKS = ("MERC", "MSAC")


@dataclass(frozen=True)
class RunConfig:
    lr: float = 1e-3
    batch_size: int = 16
    dropout: float = 0.2
    L: int = 4
    P: int = 3
    F: int | None = None
    B: int = 10
    lambda_s: float = 1.0
    lambda_o: float = 0.7
    weight_decay: float = 1e-3
    D: int = 256
    D_h: int | None = None
    epochs: int = 100
    seed: int = 0
    ablations: tuple[str, ...] = ()
    task: str = "MERC"
    slope: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    normalize: bool = False
    val_fraction: float = 0.1
    class_weights: bool = False
    shift_weights: bool = False
    eval_train: bool = False
    scheme: str = "iemocap6"

    def __post_init__(self):
        self.validate()

    @property
    def window_future(self) -> int:
        return self.P if self.F is None else self.F

    @property
    def hidden(self) -> int:
        return self.D if self.D_h is None else self.D_h

    @property
    def dropped(self) -> tuple[str, ...]:
        return tuple(m for m in "tva" if f"drop_{m}" in self.ablations)

    @property
    def residual_mode(self) -> str:
        if "no_res" in self.ablations:
            return "no_res"
        if "no_fc_res" in self.ablations:
            return "no_fc_res"
        return "full"

    @property
    def effective_lambda_s(self) -> float:
        return 0.0 if "no_Ls" in self.ablations else self.lambda_s

    @property
    def effective_lambda_o(self) -> float:
        return 0.0 if "no_Lo" in self.ablations else self.lambda_o

    def validate(self) -> None:
        for name in ("batch_size", "L", "B", "D"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.P < 0 or (self.F is not None and self.F < 0):
            raise ConfigError("window sizes must be >= 0")
        if self.D_h is not None and self.D_h < 1:
            raise ConfigError("D_h must be >= 1")
        if self.lr <= 0:
            raise ConfigError("learning rate must be > 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.lambda_s < 0 or self.lambda_o < 0 or self.weight_decay < 0:
            raise ConfigError("lambda_s, lambda_o and weight_decay must be >= 0")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError("val_fraction must lie in (0, 1)")
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        unknown = [a for a in self.ablations if a not in ABLATIONS]
        if unknown:
            raise ConfigError(f"unknown ablation(s) {unknown}; valid: {', '.join(ABLATIONS)}")
        if "no_res" in self.ablations and "no_fc_res" in self.ablations:
            raise ConfigError("conflicting ablations: no_res and no_fc_res")
        if len(self.dropped) > 2:
            raise ConfigError("at most two modalities may be dropped")


@dataclass(frozen=True)
class SynthSettings:
    num_dialogues: int = 40
    utterances_per_dialogue: int = 12
    dims: tuple[int, int, int] = (16, 16, 16)
    num_emotions: int = 4
    signal_strength: float = 3.0
    modality_signal_split: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    shift_rate: float = 0.2
    emotion_persistence: float = 0.0


# dotted key -> (target, field name)
KEYS: dict[str, tuple[str, str]] = {
    "seed": ("run", "seed"),
    "data.scheme": ("run", "scheme"),
    "data.val_fraction": ("run", "val_fraction"),
    "data.train": ("paths", "train"),
    "data.val": ("paths", "val"),
    "data.test": ("paths", "test"),
    "train.lr": ("run", "lr"),
    "train.batch_size": ("run", "batch_size"),
    "train.epochs": ("run", "epochs"),
    "train.task": ("run", "task"),
    "train.ablations": ("run", "ablations"),
    "train.eval_train": ("run", "eval_train"),
    "model.D": ("run", "D"),
    "model.D_h": ("run", "D_h"),
    "model.L": ("run", "L"),
    "model.P": ("run", "P"),
    "model.F": ("run", "F"),
    "model.B": ("run", "B"),
    "model.dropout": ("run", "dropout"),
    "model.slope": ("run", "slope"),
    "model.normalize": ("run", "normalize"),
    "loss.lambda_s": ("run", "lambda_s"),
    "loss.lambda_o": ("run", "lambda_o"),
    "loss.class_weights": ("run", "class_weights"),
    "loss.shift_weights": ("run", "shift_weights"),
    "optim.weight_decay": ("run", "weight_decay"),
    "optim.beta1": ("run", "beta1"),
    "optim.beta2": ("run", "beta2"),
    "optim.eps": ("run", "eps"),
    "synth.num_dialogues": ("synth", "num_dialogues"),
    "synth.utterances_per_dialogue": ("synth", "utterances_per_dialogue"),
    "synth.dims": ("synth", "dims"),
    "synth.num_emotions": ("synth", "num_emotions"),
    "synth.signal_strength": ("synth", "signal_strength"),
    "synth.modality_signal_split": ("synth", "modality_signal_split"),
    "synth.shift_rate": ("synth", "shift_rate"),
    "synth.emotion_persistence": ("synth", "emotion_persistence"),
}
FIELD_TO_KEY = {v: k for k, v in KEYS.items()}
PATH_KEYS = ("train", "val", "test")


def _field_types(cls) -> dict[str, object]:
    return {f.name: f.default for f in fields(cls)}


def _convert(key: str, raw, default):
    target, name = KEYS[key]
    if target == "paths":
        return None if raw in (None, "") else str(raw)
    if not isinstance(raw, str):
        return tuple(raw) if isinstance(raw, list) else raw
    text = raw.strip()
    try:
        if name in ("F", "D_h"):
            return None if text.lower() in ("", "none") else int(text)
        if name == "ablations":
            return tuple(a.strip() for a in text.split(",") if a.strip())
        if name == "dims":
            return tuple(int(x) for x in text.split(","))
        if name == "modality_signal_split":
            return tuple(float(x) for x in text.split(","))
        if isinstance(default, bool):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: line {lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def read_config_file(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        payload = json.loads(text)
        return dict(payload.get("config", payload))
    return parse_text(text, str(path))


def preset_names() -> list[str]:
    files = resources.files("graphsmile").joinpath("presets")
    return sorted(p.name[: -len(".cfg")] for p in files.iterdir() if p.name.endswith(".cfg"))


def read_preset(name: str) -> dict[str, str]:
    path = resources.files("graphsmile").joinpath("presets", f"{name}.cfg")
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return parse_text(path.read_text(encoding="utf-8"), f"preset {name}")


def parse_overrides(items) -> dict[str, str]:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


@dataclass
class ResolvedConfig:
    run: RunConfig
    synth: SynthSettings
    paths: dict[str, str | None] = field(default_factory=dict)
    overrides: dict[str, str] = field(default_factory=dict)

    def flat(self) -> dict[str, object]:
        """Every known key with its resolved value, in registry order."""
        out: dict[str, object] = {}
        for key, (target, name) in KEYS.items():
            if target == "paths":
                out[key] = self.paths.get(name)
                continue
            value = getattr(self.run if target == "run" else self.synth, name)
            if isinstance(value, tuple):
                value = ",".join(str(v) if not isinstance(v, float) else repr(v) for v in value)
            out[key] = value
        return out


def resolve(raw: dict, overrides: dict | None = None) -> ResolvedConfig:
    """Build typed configs from raw key/value pairs; unknown keys are rejected."""
    merged = dict(raw)
    merged.update(overrides or {})
    unknown = sorted(k for k in merged if k not in KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s) {unknown}; valid keys: {', '.join(KEYS)}")
    run_defaults, synth_defaults = _field_types(RunConfig), _field_types(SynthSettings)
    run_kw, synth_kw, paths = {}, {}, {k: None for k in PATH_KEYS}
    for key, raw_value in merged.items():
        target, name = KEYS[key]
        if target == "paths":
            paths[name] = _convert(key, raw_value, None)
        elif target == "run":
            run_kw[name] = _convert(key, raw_value, run_defaults[name])
        else:
            synth_kw[name] = _convert(key, raw_value, synth_defaults[name])
    return ResolvedConfig(RunConfig(**run_kw), SynthSettings(**synth_kw), paths, dict(overrides or {}))


def load_config(path=None, preset: str | None = None, overrides=None) -> ResolvedConfig:
    raw: dict = {}
    if preset:
        raw.update(read_preset(preset))
    if path:
        raw.update(read_config_file(path))
    return resolve(raw, parse_overrides(overrides) if isinstance(overrides, (list, tuple)) else overrides)


def with_updates(cfg: RunConfig, **changes) -> RunConfig:
    return replace(cfg, **changes)


def config_dict(cfg: RunConfig) -> dict:
    return asdict(cfg)
