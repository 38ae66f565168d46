"""Smoke tests for the _ealab python module."""

import math

import numpy as np
import pytest

import ealab


def test_task_spec_parsing():
    spec = ealab.TaskSpec("N16T2-S")
    assert spec.basis == 16
    assert spec.delay == 2
    assert spec.variant == "NT-S"
    assert spec.window_size == 3
    assert spec.state_count == 4096
    with pytest.raises(Exception):
        ealab.TaskSpec("bogus")


def test_next_symbol_and_series():
    assert ealab.next_symbol("N16T2", [10, 9, 4]) == 3
    assert ealab.next_symbol("N16T2-R", [0, 9, 4]) == 13
    assert ealab.generate_series("N2T1", [0, 1], 9) == [0, 1, 1, 0, 1, 1, 0, 1, 1]
    series = ealab.random_series("N16T2", 64, seed=9)
    assert len(series) == 64
    assert all(0 <= s < 16 for s in series)


def test_cycle_decompositions_match_reported_values():
    n16t3 = ealab.enumerate_cycles("N16T3")
    assert n16t3["cycles"] == [(120, 512), (60, 64), (30, 8), (15, 1), (1, 1)]
    assert n16t3["total"] == 65536
    n16t2 = ealab.enumerate_cycles("N16T2")
    assert abs(n16t2["mean_cycle_length"] - 4096 / 86) < 1e-9
    n16t2s = ealab.enumerate_cycles("N16T2-S")
    assert abs(n16t2s["mean_cycle_length"] - 23.8) < 0.1


def test_attention_kernels():
    rng = np.random.default_rng(4)
    q = rng.normal(size=(6, 3))
    k = rng.normal(size=(6, 3))
    z = ealab.scores(q, k)
    assert np.allclose(z, q @ k.T)

    for a in (ealab.dpa_weights(z), ealab.ea_weights(z)):
        assert np.all(np.triu(a, 1) == 0.0)
        assert np.allclose(a.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(a >= 0.0)

    # EA is invariant under a sign flip of the scores; DPA is not
    assert np.allclose(ealab.ea_weights(-z), ealab.ea_weights(z), atol=1e-12)
    assert not np.allclose(ealab.dpa_weights(-z), ealab.dpa_weights(z))

    v = rng.normal(size=(6, 3))
    a = ealab.ea_weights(z)
    assert np.allclose(ealab.apply_attention(a, v), a @ v)

    lg = ealab.attention_log_heatmap(a)
    assert lg.min() >= -12.0
    assert math.isclose(lg.max(), math.log10(a.max()), rel_tol=1e-9)


def test_model_basics():
    model = ealab.Model(basis=4, context_len=8, kernel="ea", seed=7)
    context = [0, 1, 2, 3, 0, 1, 2, 3]
    readout = model.forward(context)
    assert readout.shape == (4,)
    assert np.array_equal(readout, model.forward(context))
    assert 0 <= model.predict(context) < 4
    attn = model.attention(context)
    assert attn.shape == (8, 8)
    assert np.allclose(attn.sum(axis=1), 1.0, atol=1e-12)

    counts = ealab.Model(basis=2, context_len=16, seed=1).param_count()
    assert counts["total"] == 132


def test_gradient_check_on_fresh_model():
    model = ealab.Model(basis=3, context_len=4, kernel="dpa", seed=11)
    report = model.gradient_check("N3T2", h=1e-5, tol=1e-4)
    assert report["pass"], report


def test_training_learns_xor_task():
    model = ealab.Model(basis=2, context_len=8, kernel="ea", seed=3)
    result = model.fit("N2T1", epochs=300, eval_every=50, n_test=20, n_gen=20, seed=5)
    assert not result["diverged"]
    assert result["final_accuracy"] == 1.0
    losses = result["loss"]
    assert np.mean(losses[-20:]) < 0.1 * np.mean(losses[:20])


def test_oracle_is_exact():
    for task in ("N16T2", "N16T2-S", "N16T2-R"):
        assert ealab.oracle_accuracy(task, n_series=50, n_gen=20) == 1.0


def test_checkpoint_round_trip(tmp_path):
    model = ealab.Model(basis=3, context_len=6, kernel="ea", seed=13)
    path = str(tmp_path / "model.json")
    model.save(path)
    loaded = ealab.Model.load(path)
    context = [0, 1, 2, 0, 1, 2]
    assert np.array_equal(model.forward(context), loaded.forward(context))
