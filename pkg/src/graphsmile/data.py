"""Dataset schema, label vocabularies, label merging/binning, JSONL I/O and splits."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ConfigError, ParseError, RangeError, SchemaError, VocabularyError

MODALITIES = ("t", "v", "a")
SENTIMENTS = ("Negative", "Neutral", "Positive")
INTENSITY_BINS = (
    "Highly Negative",
    "Negative",
    "Weakly Negative",
    "Neutral",
    "Weakly Positive",
    "Positive",
    "Highly Positive",
)


@dataclass(frozen=True)
class LabelScheme:
    name: str
    emotion_names: tuple[str, ...]
    emotion_to_sentiment: tuple[int, ...]
    sentiment_names: tuple[str, ...] = SENTIMENTS

    def __post_init__(self):
        if len(self.emotion_to_sentiment) != len(self.emotion_names):
            raise ConfigError(
                f"scheme {self.name}: merge map covers {len(self.emotion_to_sentiment)} "
                f"of {len(self.emotion_names)} emotions"
            )
        for e, s in zip(self.emotion_names, self.emotion_to_sentiment):
            if not 0 <= s < len(self.sentiment_names):
                raise ConfigError(f"scheme {self.name}: {e} maps to unknown sentiment {s}")
        if len(set(self.emotion_names)) != len(self.emotion_names):
            raise ConfigError(f"scheme {self.name}: duplicate emotion names")

    @property
    def num_emotions(self) -> int:
        return len(self.emotion_names)

    @property
    def num_sentiments(self) -> int:
        return len(self.sentiment_names)

    def emotion_index(self, name: str) -> int:
        try:
            return self.emotion_names.index(name)
        except ValueError:
            raise VocabularyError(f"unknown emotion {name!r} for scheme {self.name}") from None

    def sentiment_index(self, name: str) -> int:
        try:
            return self.sentiment_names.index(name)
        except ValueError:
            raise VocabularyError(f"unknown sentiment {name!r} for scheme {self.name}") from None

    @classmethod
    def from_groups(cls, name: str, groups: dict[str, list[str]], sentiments=SENTIMENTS):
        """Build from ``{sentiment: [emotion, ...]}``, emotions ordered as listed."""
        emotions, mapping = [], []
        for s_name, members in groups.items():
            s = list(sentiments).index(s_name)
            for e in members:
                emotions.append(e)
                mapping.append(s)
        return cls(name, tuple(emotions), tuple(mapping), tuple(sentiments))


def _scheme(name, pairs):
    names = tuple(e for e, _ in pairs)
    merge = tuple(SENTIMENTS.index(s) for _, s in pairs)
    return LabelScheme(name, names, merge)


# Emotion order follows the usual corpus conventions; the merge follows the
# published merging table.
IEMOCAP6 = _scheme(
    "iemocap6",
    [
        ("Happy", "Positive"),
        ("Sad", "Negative"),
        ("Neutral", "Neutral"),
        ("Angry", "Negative"),
        ("Excited", "Positive"),
        ("Frustrated", "Negative"),
    ],
)
IEMOCAP4 = _scheme(
    "iemocap4",
    [("Happy", "Positive"), ("Sad", "Negative"), ("Neutral", "Neutral"), ("Angry", "Negative")],
)
# MELD ships native sentiment labels; the emotion map is only a fallback for
# records that omit them. Surprise is ambiguous in MELD and is mapped Positive.
MELD = _scheme(
    "meld",
    [
        ("Neutral", "Neutral"),
        ("Surprise", "Positive"),
        ("Fear", "Negative"),
        ("Sadness", "Negative"),
        ("Joy", "Positive"),
        ("Disgust", "Negative"),
        ("Anger", "Negative"),
    ],
)
MOSEI7 = _scheme(
    "mosei7",
    [
        ("Highly Negative", "Negative"),
        ("Negative", "Negative"),
        ("Weakly Negative", "Negative"),
        ("Neutral", "Neutral"),
        ("Weakly Positive", "Positive"),
        ("Positive", "Positive"),
        ("Highly Positive", "Positive"),
    ],
)

BUILTIN_SCHEMES = {s.name: s for s in (IEMOCAP6, IEMOCAP4, MELD, MOSEI7)}


def synthetic_scheme(num_emotions: int) -> LabelScheme:
    """``emo0..emoK`` assigned to sentiments round-robin (Negative, Neutral, Positive)."""
    if num_emotions < 1:
        raise ConfigError("num_emotions must be >= 1")
    names = tuple(f"emo{i}" for i in range(num_emotions))
    return LabelScheme(f"synthetic{num_emotions}", names, tuple(i % 3 for i in range(num_emotions)))


def get_scheme(name: str) -> LabelScheme:
    if name in BUILTIN_SCHEMES:
        return BUILTIN_SCHEMES[name]
    if name.startswith("synthetic") and name[len("synthetic") :].isdigit():
        return synthetic_scheme(int(name[len("synthetic") :]))
    raise ConfigError(
        f"unknown label scheme {name!r}; built-ins: {', '.join(BUILTIN_SCHEMES)}, syntheticN"
    )


def merge_emotion_to_sentiment(emotion: int, scheme: LabelScheme) -> int:
    if not 0 <= emotion < scheme.num_emotions:
        raise VocabularyError(f"emotion index {emotion} out of range for scheme {scheme.name}")
    return scheme.emotion_to_sentiment[emotion]


def bin_intensity(x: float) -> int:
    """Seven-way intensity bin: [-3,-2) [-2,-1) [-1,0) {0} (0,1] (1,2] (2,3]."""
    if not (-3.0 <= x <= 3.0):
        raise RangeError(f"intensity {x} outside [-3, 3]")
    if x < -2.0:
        return 0
    if x < -1.0:
        return 1
    if x < 0.0:
        return 2
    if x == 0.0:
        return 3
    if x <= 1.0:
        return 4
    if x <= 2.0:
        return 5
    return 6


# ---------------------------------------------------------------------------
# records


@dataclass
class Utterance:
    id: str
    feat_t: np.ndarray
    feat_v: np.ndarray
    feat_a: np.ndarray
    speaker: str | None = None
    emotion: int | None = None
    sentiment: int | None = None
    intensity: float | None = None

    def feature(self, modality: str) -> np.ndarray:
        return getattr(self, f"feat_{modality}")


@dataclass
class Dialogue:
    id: str
    utterances: list[Utterance]

    def __len__(self) -> int:
        return len(self.utterances)

    def features(self, modality: str) -> np.ndarray:
        return np.vstack([u.feature(modality) for u in self.utterances])

    @property
    def emotions(self) -> list[int | None]:
        return [u.emotion for u in self.utterances]

    @property
    def sentiments(self) -> list[int | None]:
        return [u.sentiment for u in self.utterances]


@dataclass
class Dataset:
    dialogues: list[Dialogue]
    scheme: LabelScheme
    dims: tuple[int, int, int] = field(default=(0, 0, 0))

    def __post_init__(self):
        seen = set()
        for d in self.dialogues:
            if not d.utterances:
                raise SchemaError(f"dialogue {d.id}: no utterances")
            if d.id in seen:
                raise SchemaError(f"duplicate dialogue id {d.id}")
            seen.add(d.id)
        if self.dims == (0, 0, 0) and self.dialogues:
            u = self.dialogues[0].utterances[0]
            self.dims = (u.feat_t.size, u.feat_v.size, u.feat_a.size)
        for d in self.dialogues:
            for u in d.utterances:
                got = (u.feat_t.size, u.feat_v.size, u.feat_a.size)
                if got != tuple(self.dims):
                    raise SchemaError(
                        f"dialogue {d.id} utterance {u.id}: feature dims {got}, expected {self.dims}"
                    )

    def __len__(self) -> int:
        return len(self.dialogues)

    @property
    def num_utterances(self) -> int:
        return sum(len(d) for d in self.dialogues)

    def subset(self, dialogues: Iterable[Dialogue]) -> "Dataset":
        return Dataset(list(dialogues), self.scheme, self.dims)


def resolve_labels(u: Utterance, scheme: LabelScheme, where: str) -> Utterance:
    """Fill derived labels: intensity -> 7-bin emotion (7-bin schemes) and
    emotion -> sentiment via the scheme's merge map."""
    if u.emotion is None and u.sentiment is None and u.intensity is None:
        raise SchemaError(f"{where}: no emotion, sentiment or intensity label")
    emotion, sentiment = u.emotion, u.sentiment
    if u.intensity is not None:
        b = bin_intensity(u.intensity)
        if emotion is None and scheme.emotion_names == INTENSITY_BINS:
            emotion = b
        if sentiment is None:
            sentiment = MOSEI7.emotion_to_sentiment[b]
    if sentiment is None and emotion is not None:
        sentiment = merge_emotion_to_sentiment(emotion, scheme)
    return replace(u, emotion=emotion, sentiment=sentiment)


# ---------------------------------------------------------------------------
# JSON-Lines I/O


def _vector(rec: dict, key: str, where: str) -> np.ndarray:
    if key not in rec:
        raise SchemaError(f"{where}: missing feature {key!r}")
    try:
        vec = np.asarray(rec[key], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: feature {key!r} is not a numeric list") from exc
    if vec.ndim != 1 or vec.size == 0:
        raise SchemaError(f"{where}: feature {key!r} must be a non-empty flat list")
    if not np.all(np.isfinite(vec)):
        raise SchemaError(f"{where}: feature {key!r} has non-finite values")
    return vec


def parse_dialogue(rec: dict, scheme: LabelScheme, lineno: int | None = None) -> Dialogue:
    loc = f"line {lineno}: " if lineno is not None else ""
    if not isinstance(rec, dict) or "id" not in rec or "utterances" not in rec:
        raise SchemaError(f"{loc}dialogue record needs 'id' and 'utterances'")
    did = str(rec["id"])
    utts = []
    for k, ur in enumerate(rec["utterances"]):
        uid = str(ur.get("id", k))
        where = f"{loc}dialogue {did} utterance {uid}"
        feats = {m: _vector(ur, m, where) for m in MODALITIES}
        emotion = scheme.emotion_index(ur["emotion"]) if ur.get("emotion") is not None else None
        sentiment = (
            scheme.sentiment_index(ur["sentiment"]) if ur.get("sentiment") is not None else None
        )
        intensity = float(ur["intensity"]) if ur.get("intensity") is not None else None
        u = Utterance(
            id=uid,
            speaker=ur.get("speaker"),
            feat_t=feats["t"],
            feat_v=feats["v"],
            feat_a=feats["a"],
            emotion=emotion,
            sentiment=sentiment,
            intensity=intensity,
        )
        utts.append(resolve_labels(u, scheme, where))
    if not utts:
        raise SchemaError(f"{loc}dialogue {did}: no utterances")
    return Dialogue(did, utts)


def load_dataset(path, scheme: LabelScheme) -> Dataset:
    dialogues = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc.msg}") from exc
            dialogues.append(parse_dialogue(rec, scheme, lineno))
    return Dataset(dialogues, scheme)


def dialogue_record(d: Dialogue, scheme: LabelScheme) -> dict:
    utts = []
    for u in d.utterances:
        rec = {"id": u.id}
        if u.speaker is not None:
            rec["speaker"] = u.speaker
        rec["t"] = u.feat_t.tolist()
        rec["v"] = u.feat_v.tolist()
        rec["a"] = u.feat_a.tolist()
        if u.emotion is not None:
            rec["emotion"] = scheme.emotion_names[u.emotion]
        if u.sentiment is not None:
            rec["sentiment"] = scheme.sentiment_names[u.sentiment]
        if u.intensity is not None:
            rec["intensity"] = u.intensity
        utts.append(rec)
    return {"id": d.id, "utterances": utts}


def write_dataset(ds: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in ds.dialogues:
            fh.write(json.dumps(dialogue_record(d, ds.scheme)) + "\n")


def split_train_val(ds: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Dialogue-level random split; the validation part holds round(fraction * n) dialogues."""
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"split fraction must lie in (0, 1), got {fraction}")
    n = len(ds.dialogues)
    n_val = int(math.floor(fraction * n + 0.5))
    if n_val == 0 or n_val == n:
        raise ConfigError(f"fraction {fraction} of {n} dialogues leaves an empty partition")
    order = np.random.default_rng(seed).permutation(n)
    val_idx = set(order[:n_val].tolist())
    train = [d for i, d in enumerate(ds.dialogues) if i not in val_idx]
    val = [d for i, d in enumerate(ds.dialogues) if i in val_idx]
    return ds.subset(train), ds.subset(val)
