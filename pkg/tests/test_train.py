from dataclasses import replace

import numpy as np
import pytest

from graphsmile import autograd as ag
from graphsmile.checks import TINY
from graphsmile.config import RunConfig
from graphsmile.data import Dataset, synthetic_scheme
from graphsmile.errors import ConfigError, NumericError
from graphsmile.graph import build_bimodal_graph
from graphsmile.synth import SynthConfig, generate
from graphsmile.train import (
    ablate,
    build_model,
    evaluate,
    sweep,
    train,
    write_confusion_csv,
    write_metrics_csv,
)

from conftest import make_dialogue


def small_cfg(**kw):
    return RunConfig(**{**TINY, "epochs": 2, "batch_size": 2, "lr": 1e-2, **kw})


def small_data(n=8, seed=0):
    return generate(SynthConfig(num_dialogues=n, utterances_per_dialogue=5, dims=(3, 3, 3), seed=seed), synthetic_scheme(4))


def test_zero_epochs_leaves_params(tiny_dataset):
    cfg = small_cfg(epochs=0)
    fresh = build_model(cfg, tiny_dataset).state()
    res = train(tiny_dataset, cfg)
    assert res.history == []
    for k, v in res.model.state().items():
        assert v.tobytes() == fresh[k].tobytes()


def test_emotion_only_matches_hand_loop(tiny_dataset):
    cfg = small_cfg(epochs=3, batch_size=len(tiny_dataset), lambda_s=0.0, lambda_o=0.0)
    res = train(tiny_dataset, cfg)

    ref = build_model(cfg, tiny_dataset)
    opt = ag.AdamW(ref.params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    order = np.random.default_rng(np.random.SeedSequence([cfg.seed, 11]))
    n = len(tiny_dataset)
    for rec in res.history:
        perm = order.permutation(n)
        opt.zero_grad()
        total = 0.0
        for i in perm:
            d = tiny_dataset.dialogues[i]
            H = ref.fuse(d).H
            loss = ag.cross_entropy_logits(ref.heads.emotion.logits(H), d.emotions)
            total += loss.item()
            ag.backward(ag.scale(loss, 1.0 / n))
        opt.step()
        assert rec.losses["L_total"] == pytest.approx(total / n, abs=1e-9)
        assert rec.losses["L_total"] == pytest.approx(rec.losses["L_e"], abs=1e-9)
    for p, q in zip(res.model.params, ref.params):
        np.testing.assert_allclose(p.value, q.value, atol=1e-12)


def test_single_dialogue_memorized():
    d = make_dialogue([0, 1, 2, 3, 1, 0], dims=(4, 4, 4))
    ds = Dataset([d], synthetic_scheme(4))
    cfg = RunConfig(D=16, L=2, P=1, B=3, dropout=0.0, lr=3e-2, weight_decay=0.0, epochs=150, batch_size=1)
    res = train(ds, cfg)
    assert res.history[-1].losses["L_e"] < 1e-3


def test_nonfinite_loss_aborts(tiny_dataset, monkeypatch):
    model = build_model(small_cfg(), tiny_dataset)
    real = model.forward

    def poisoned(d, training=False, rng=None):
        out = real(d, training, rng)
        out.losses.L_e = float("nan")
        return out

    monkeypatch.setattr(model, "forward", poisoned)
    with pytest.raises(NumericError, match="epoch 1, step 1"):
        train(tiny_dataset, small_cfg(), model=model)


def test_empty_dataset():
    with pytest.raises(ConfigError):
        train(Dataset([], synthetic_scheme(4)), small_cfg())


def test_metric_history_deterministic(tmp_path):
    ds = small_data()
    cfg = small_cfg(dropout=0.3, eval_train=True)
    paths = []
    for k in range(2):
        res = train(ds, cfg, small_data(3, seed=5))
        paths.append(tmp_path / f"m{k}.csv")
        write_metrics_csv(res.history, paths[-1])
    assert paths[0].read_bytes() == paths[1].read_bytes()
    header = paths[0].read_text().splitlines()[0]
    assert header.startswith("epoch,L_e,L_s,L_o,decay,L_total")


def test_best_checkpoint_restored():
    ds, val = small_data(), small_data(4, seed=7)
    res = train(ds, small_cfg(epochs=4), val)
    best = max(res.history, key=lambda r: r.val.weighted_f1)
    assert res.best_epoch == best.epoch
    assert evaluate(val, res.model).weighted_f1 == best.val.weighted_f1


def test_evaluate_excludes_unlabeled(tmp_path):
    d = make_dialogue([0, None, 2, 3])
    ds = Dataset([d], synthetic_scheme(4))
    model = build_model(small_cfg(), ds)
    rep = evaluate(ds, model)
    assert rep.excluded == 1 and rep.total == 3
    msac = evaluate(ds, model, "MSAC")
    assert msac.confusion.shape == (3, 3) and msac.class_names == ["Negative", "Neutral", "Positive"]
    write_confusion_csv(rep, tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "true\\pred,emo0,emo1,emo2,emo3"


def test_sweep_rows():
    ds = small_data(6)
    rows = sweep(ds, small_cfg(epochs=1), "depth", [1, 2, 3], val=small_data(2, seed=3))
    assert [r["value"] for r in rows] == [1, 2, 3]
    with pytest.raises(ConfigError):
        sweep(ds, small_cfg(), "width", [1])


def test_window_zero_graph():
    g = build_bimodal_graph(5, 0, 0)
    assert all(s % 5 == d % 5 for s, d in g.edges)
    assert g.num_edges == 10


def test_ablate_rows():
    ds = small_data(6)
    rows = ablate(ds, small_cfg(epochs=1), [], val=small_data(2, seed=3))
    assert [r["mode"] for r in rows] == ["full"]
    rows = ablate(ds, small_cfg(epochs=1), ["no_seg", "drop_v"], val=small_data(2, seed=3))
    assert [r["mode"] for r in rows] == ["full", "no_seg", "drop_v"]
    with pytest.raises(ConfigError):
        ablate(ds, small_cfg(), ["no_text"])


@pytest.mark.slow
def test_text_drop_hurts_most_when_text_dominates():
    from test_acceptance import MODEL, synthetic_splits

    tr, va, te = synthetic_splits(0)
    rows = {r["mode"]: r["weighted_f1"] for r in ablate(tr, RunConfig(**MODEL, epochs=40), ["drop_t", "drop_v"], va, te)}
    assert rows["drop_t"] < rows["drop_v"]
    assert rows["drop_t"] < rows["full"]
