import math

import numpy as np
import pytest

from graphsmile import autograd as ag
from graphsmile.errors import ConfigError, LabelingError
from graphsmile.heads import (
    HeadParams,
    decay_term,
    emotion_head,
    emotion_loss,
    predict,
    sentiment_head,
    sentiment_loss,
    total_loss,
)
from graphsmile.autograd import Param


def heads(D_h=4, C_e=6, C_s=3, seed=0):
    return HeadParams.init(D_h, C_e, C_s, np.random.default_rng(seed))


def test_zero_weights_uniform_and_tie_break():
    hp = heads()
    for lin in (hp.emotion, hp.sentiment):
        lin.weight.assign(np.zeros_like(lin.weight.value))
        lin.bias.assign(np.zeros_like(lin.bias.value))
    H = ag.const(np.random.default_rng(1).standard_normal((5, 4)))
    probs, preds = emotion_head(H, hp)
    np.testing.assert_allclose(probs.value, 1 / 6)
    assert preds.tolist() == [0] * 5
    probs, preds = sentiment_head(H, hp)
    np.testing.assert_allclose(probs.value, 1 / 3)
    assert preds.tolist() == [0] * 5


def test_predict_ties_and_onehot():
    assert predict(np.array([[0.2, 0.4, 0.4], [0.5, 0.5, 0.0]])).tolist() == [1, 0]
    assert predict(np.eye(4)[[3, 1, 2]]).tolist() == [3, 1, 2]


def test_head_loop_oracle():
    hp = heads(seed=2)
    rng = np.random.default_rng(3)
    H = rng.standard_normal((4, 4))
    probs, _ = emotion_head(ag.const(H), hp)
    W, b = hp.emotion.weight.value, hp.emotion.bias.value
    for i in range(4):
        z = [sum(H[i, k] * W[k, c] for k in range(4)) + b[0, c] for c in range(6)]
        m = max(z)
        e = [math.exp(v - m) for v in z]
        for c in range(6):
            assert probs.value[i, c] == pytest.approx(e[c] / sum(e), abs=1e-12)


def test_losses():
    assert emotion_loss(ag.const(np.eye(6)[[0, 5]]), [0, 5]).item() == 0.0
    assert emotion_loss(ag.const(np.full((3, 6), 1 / 6)), [1, 2, 3]).item() == pytest.approx(math.log(6), abs=1e-12)
    assert math.log(6) == pytest.approx(1.7918, abs=1e-4)
    assert sentiment_loss(ag.const(np.eye(3)), [0, 1, 2]).item() == 0.0
    assert sentiment_loss(ag.const(np.full((2, 3), 1 / 3)), [0, 2]).item() == pytest.approx(math.log(3), abs=1e-12)
    p = np.array([[0.7, 0.2, 0.1], [0.1, 0.1, 0.8]])
    want = -(math.log(0.2) + math.log(0.8)) / 2
    assert sentiment_loss(ag.const(p), [1, 2]).item() == pytest.approx(want, abs=1e-12)


def test_unlabeled_rejected():
    with pytest.raises(LabelingError, match="utterance 1"):
        emotion_loss(ag.const(np.full((2, 3), 1 / 3)), [0, None])


def test_total_loss():
    assert total_loss(1.0, 2.0, 3.0, 0.5, 0.2).L_total == pytest.approx(2.6, abs=1e-12)
    assert total_loss(1.25, 2.0, 3.0, 0.0, 0.0).L_total == 1.25
    with pytest.raises(ConfigError):
        total_loss(1.0, 1.0, 1.0, -0.1, 0.0)


def test_total_loss_objective_and_linearity():
    e, s, o = Param(np.array([[1.0]]), "e"), Param(np.array([[2.0]]), "s"), Param(np.array([[3.0]]), "o")
    rep = total_loss(e, s, o, 1.0, 0.7)
    assert rep.objective.item() == pytest.approx(rep.L_total)
    ag.backward(rep.objective)
    assert (e.grad[0, 0], s.grad[0, 0], o.grad[0, 0]) == pytest.approx((1.0, 1.0, 0.7))
    o.zero_grad()
    ag.backward(total_loss(e, s, o, 1.0, 1.4).objective)
    assert o.grad[0, 0] == pytest.approx(1.4)


def test_zero_lambda_drops_path():
    e, s, o = Param(np.array([[1.0]]), "e"), Param(np.array([[2.0]]), "s"), Param(np.array([[3.0]]), "o")
    ag.backward(total_loss(e, s, o, 0.0, 0.0).objective)
    assert s.grad[0, 0] == 0.0 and o.grad[0, 0] == 0.0


def test_decay_term():
    ps = [Param(np.array([[1.0, 2.0]]), "w"), Param(np.array([[5.0]]), "b", decay=False)]
    assert decay_term(ps, 0.1) == pytest.approx(0.5 * 0.1 * 5.0)
