import math

import pytest

import sclm


def small_corpus():
    cfg = sclm.SynthConfig()
    cfg.n_normal = 120
    cfg.n_attack = 30
    cfg.max_len = 30
    return sclm.gen_synthetic(cfg)


def test_synthetic_is_deterministic():
    a = small_corpus()
    b = small_corpus()
    assert a == b
    normals, attacks = a
    assert len(normals) == 120 and len(attacks) == 30
    assert all(1 <= c <= 20 for t in normals for c in t)


def test_roc_and_auc():
    assert sclm.auc([0.1, 0.2], [0.8, 0.9]) == 1.0
    assert sclm.auc([1.0, 2.0], [2.0, 3.0]) == pytest.approx(0.875)
    pts = sclm.roc([0.0], [1.0])
    assert pts[0][:2] == (0.0, 0.0) and pts[-1][:2] == (1.0, 1.0)
    assert sclm.far_at_dr([1, 2, 3, 4], [2.5, 5], 1.0) == 0.5
    with pytest.raises(ValueError):
        sclm.auc([], [1.0])


def test_ensemble_and_baselines():
    spec = sclm.build_ensemble([[1.0, 2.0, 3.0], [10.0, 20.0, 30.0]])
    assert spec.biases == [2.0, 20.0]
    assert spec([1.0, 10.0]) < 0
    with pytest.raises(ValueError):
        sclm.build_ensemble([[1.0], [2.0]], slope=2.0)
    ref = [[0.0], [1.0], [3.0]]
    assert sclm.knn_scores(ref, [[2.5]], k=2) == [1.5]
    assert sclm.kmeans_scores(ref, [[0.0]], k=1)[0] == pytest.approx(4.0 / 3.0)


def test_train_score_save_load(tmp_path):
    normals, attacks = small_corpus()
    cfg = sclm.LmConfig()
    cfg.cells = 16
    cfg.epochs = 5
    cfg.lr = 0.01
    cfg.dropout = 0.0
    cfg.batch_size = 16
    model = sclm.Model.train(normals[:60], normals[60:], cfg)
    assert len(model.training_log) == 5
    assert model.vocab == sorted(set(c for t in normals[:60] for c in t))

    n_scores = model.score(normals[60:])
    a_scores = model.score(attacks)
    assert all(math.isfinite(s) for s in n_scores + a_scores)
    assert sclm.auc(n_scores, a_scores) > 0.9

    path = tmp_path / "m.bin"
    model.save(path)
    again = sclm.Model.load(path)
    assert again.score(attacks) == a_scores
    reps = again.representations(attacks[:3])
    assert len(reps) == 3 and len(reps[0]) == 16
    emb = again.embeddings()
    assert [c for c, _ in emb] == again.vocab

    with pytest.raises(ValueError):
        sclm.Model.load(tmp_path / "missing.bin")
