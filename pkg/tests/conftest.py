import numpy as np
import pytest

from graphsmile.data import Dataset, Dialogue, Utterance, synthetic_scheme


def make_dialogue(emotions, dims=(3, 3, 3), seed=0, scheme=None, did="d0"):
    scheme = scheme or synthetic_scheme(4)
    rng = np.random.default_rng(seed)
    utts = [
        Utterance(
            id=f"u{i}",
            feat_t=rng.standard_normal(dims[0]),
            feat_v=rng.standard_normal(dims[1]),
            feat_a=rng.standard_normal(dims[2]),
            emotion=e,
            sentiment=None if e is None else scheme.emotion_to_sentiment[e],
        )
        for i, e in enumerate(emotions)
    ]
    return Dialogue(did, utts)


@pytest.fixture
def tiny_dataset():
    scheme = synthetic_scheme(4)
    dialogues = [make_dialogue([k % 4, (k + 1) % 4, 2, 0, 3][: 3 + k % 3], seed=k, did=f"d{k}") for k in range(6)]
    return Dataset(dialogues, scheme, (3, 3, 3))


# acceptance criteria report: each acceptance test appends one line here
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
