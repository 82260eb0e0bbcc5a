import math

import numpy as np
import pytest

import spectral_mup as sm


def test_rules_follow_width():
    for n in (64, 256):
        hidden = sm.LayerSpec(n, n, sm.LayerRole.Hidden)
        rule = sm.derive_rule(sm.OptimizerKind.AdamW, hidden)
        assert rule.lr_mult == 1.0 / n
        assert rule.weight_mult == 1.0 / math.sqrt(n)
    sp = sm.derive_rule(sm.OptimizerKind.AdamW, sm.LayerSpec(100, 100, sm.LayerRole.Hidden), sm.ParamScheme.SP)
    assert sp.init_std == pytest.approx(0.1)
    assert "hidden" in sm.rule_table(sm.OptimizerKind.Shampoo, [64, 128], 3)


def test_gradients_and_loss():
    mlp = sm.build(sm.mlp_specs(3, 5, 2, 3), seed=4, activation=sm.Activation.Tanh)
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=(3, 4)), rng.normal(size=(2, 4))
    loss, grads = mlp.gradients(x, y)
    assert len(grads) == 3
    assert grads[1].shape == (5, 5)
    out = mlp.forward(x)
    assert out.shape == (2, 4)
    assert loss == pytest.approx(0.5 * np.sum((out - y) ** 2) / 4)
    w = mlp.effective_weight(0)
    assert w.shape == (5, 3)
    assert np.isfinite(grads[0]).all()


def test_linalg_against_numpy():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(7, 4))
    assert sm.spectral_norm(a) == pytest.approx(np.linalg.norm(a, 2), rel=1e-9)
    assert sm.singular_values(a) == pytest.approx(np.linalg.svd(a, compute_uv=False), rel=1e-9)
    assert sm.numerical_rank(np.outer(rng.normal(size=5), rng.normal(size=3))) == 1
    q = sm.newton_schulz_orthogonalize(a)
    assert np.allclose(q.T @ q, np.eye(4), atol=1e-2)


def test_trainer_reduces_loss():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(4, 64))
    y = np.tanh(rng.normal(size=(2, 4)) @ x)
    hp = sm.HyperParams()
    hp.eta = 0.05
    t = sm.Trainer(sm.build(sm.mlp_specs(4, 32, 2, 3), seed=1), sm.OptimizerKind.AdamW, hp=hp)
    first = t.evaluate(x, y)
    for _ in range(30):
        t.step(x, y)
    assert t.steps == 30
    assert t.evaluate(x, y) < first


def test_errors_map_to_python():
    mlp = sm.build(sm.mlp_specs(3, 4, 2, 2))
    with pytest.raises(ValueError):
        mlp.forward(np.zeros((5, 1)))
    with pytest.raises(ValueError):
        sm.lr_sweep({"no_such_key": 1})


def test_small_sweep_and_coord_check():
    settings = {"widths": [16, 32], "lr_grid": [0.1, 0.01], "seeds": [0], "steps": 5, "n_train": 64, "n_val": 32}
    rows = sm.lr_sweep(settings)
    assert [(r["width"], r["lr"]) for r in rows] == [(16, 0.1), (16, 0.01), (32, 0.1), (32, 0.01)]
    assert rows == sm.lr_sweep(settings)
    recs = sm.coord_check(settings)
    assert all(r["rel_to_first"] == 1.0 for r in recs if r["step"] == 1)


def test_cli_entry():
    code, out, err = sm.run_cli(["rules", "--optimizer", "muon", "--widths", "64"])
    assert code == 0
    assert "hidden" in out
    assert sm.run_cli(["bogus"])[0] == 2
