import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from smcomplete import expt, synth
from smcomplete.expt import ExperimentConfig


def small_cfg(**kw):
    base = dict(p1=40, p2=40, m1=10, m2=10, spectrum=synth.Gap(r=2, g=5.0),
                solvers=("smc-row", "smc-col", "smc-rank:2"), reps=3, base_seed=1)
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        small_cfg(reps=0)
    with pytest.raises(ValueError):
        small_cfg(threshold_const=0.0)
    with pytest.raises(ValueError):
        small_cfg(m1=40)
    with pytest.raises(ValueError):
        small_cfg(solvers=("svd",))
    with pytest.raises(ValueError):
        small_cfg(solvers=("smc-rank:x",))
    with pytest.raises(ValueError):
        small_cfg(solvers=("smc-rank:0",))


def test_losses_values():
    truth = np.diag([2.0, 0.0])
    est = np.diag([1.0, 1.0])
    out = expt.losses(est, truth)
    assert out["spectral_loss"] == pytest.approx(1.0)
    assert out["frobenius_loss"] == pytest.approx(math.sqrt(2))
    assert out["nuclear_loss"] == pytest.approx(2.0)
    assert out["rel_spectral"] == pytest.approx(0.5)
    assert math.isinf(expt.losses(est, np.zeros((2, 2)))["rel_spectral"])


def test_instance_independent_of_solvers():
    a, seed_a = expt.generate(small_cfg(solvers=("smc-row",)), 2)
    b, seed_b = expt.generate(small_cfg(solvers=("nnm", "smc-col")), 2)
    np.testing.assert_array_equal(a.a22, b.a22)
    assert seed_a == seed_b


def test_replications_differ():
    a, _ = expt.generate(small_cfg(), 0)
    b, _ = expt.generate(small_cfg(), 1)
    assert not np.array_equal(a.a11, b.a11)


def test_single_rep_mean_equals_record():
    res = expt.run_experiment(small_cfg(reps=1))
    for summary in res.summaries:
        rec = [r for r in res.records if r.solver == summary.solver][0]
        assert summary.stats["rel_spectral"].mean == rec.rel_spectral
        assert summary.stats["rel_spectral"].sd == 0.0
        assert summary.stats["rel_spectral"].n == 1


def test_describe():
    st_ = expt.describe([1.0, 2.0, 3.0, math.nan])
    assert st_.n == 3 and st_.mean == 2.0
    assert st_.sd == pytest.approx(1.0)
    assert st_.se == pytest.approx(1 / math.sqrt(3))
    assert expt.describe([]).n == 0


def test_failures_recorded(monkeypatch):
    def boom(*args, **kwargs):
        raise np.linalg.LinAlgError("svd did not converge")

    monkeypatch.setattr(expt.smc, "recover_known_rank", boom)
    res = expt.run_experiment(small_cfg(reps=2))
    s = res.summary("smc-rank:2")
    assert s.failures == 2
    assert s.stats["rel_spectral"].n == 0
    assert res.summary("smc-row").failures == 0
    assert "svd did not converge" in res.records[2].error


def test_parallel_matches_serial():
    cfg = small_cfg(reps=4)
    serial = expt.run_experiment(cfg, workers=1)
    parallel = expt.run_experiment(cfg, workers=2)
    key = lambda r: (r.solver, r.rep, r.r_hat, r.rel_spectral, r.rel_frobenius)
    assert [key(r) for r in serial.records] == [key(r) for r in parallel.records]


def test_workers_env(monkeypatch):
    monkeypatch.delenv(expt.WORKERS_ENV, raising=False)
    assert expt.default_workers() == 1
    monkeypatch.setenv(expt.WORKERS_ENV, "3")
    assert expt.default_workers() == 3


def test_with_params():
    cfg = small_cfg()
    c = expt.with_params(cfg, p=80, m=20, g=10.0)
    assert (c.p1, c.p2, c.m1, c.m2) == (80, 80, 20, 20)
    assert c.spectrum == synth.Gap(r=2, g=10.0)
    c = expt.with_params(cfg, alpha=2.0, threshold_const=3)
    assert c.spectrum == synth.Power(2.0) and c.threshold_const == 3.0
    c = expt.with_params(dataclasses.replace(cfg, spectrum=synth.Power(1.0)), r=4)
    assert c.spectrum == synth.Gap(r=4, g=1.0)
    with pytest.raises(ValueError):
        expt.with_params(cfg, beta=1)


def test_sweep_points():
    assert expt.sweep_points({}) == [{}]
    pts = expt.sweep_points({"g": [1, 10], "r": [2, 4]})
    assert pts == [{"g": 1, "r": 2}, {"g": 1, "r": 4}, {"g": 10, "r": 2}, {"g": 10, "r": 4}]


def test_nnm_solver_runs():
    cfg = small_cfg(solvers=("smc-row", "nnm"), reps=1, nnm_grid=4, nnm_splits=2)
    res = expt.run_experiment(cfg)
    assert res.summary("nnm").failures == 0
    assert math.isnan(res.summary("nnm").mean_r_hat)


@pytest.mark.property
@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 50))
def test_run_replication_deterministic(seed, rep):
    cfg = small_cfg(base_seed=seed, reps=1)
    a = expt.run_replication(cfg, rep)
    b = expt.run_replication(cfg, rep)
    assert [(r.r_hat, r.rel_frobenius, r.seed) for r in a] == [(r.r_hat, r.rel_frobenius, r.seed) for r in b]


def test_subspace_alignment(rng):
    Q = synth.haar_orthonormal(30, 4, rng)
    np.testing.assert_allclose(expt.subspace_alignment(Q, Q, 4), 1.0, atol=1e-12)
    R = synth.haar_orthonormal(4, 4, rng)
    np.testing.assert_allclose(expt.subspace_alignment(Q @ R, Q, 4), 1.0, atol=1e-12)
    E = np.eye(30)
    np.testing.assert_allclose(expt.subspace_alignment(E[:, :2], E[:, 2:4], 2), 0.0)
    with pytest.raises(ValueError):
        expt.subspace_alignment(Q, Q, 5)
    with pytest.raises(ValueError):
        expt.subspace_alignment(Q, E[:20, :4], 2)


@pytest.mark.property
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 5))
def test_subspace_alignment_in_unit_interval(seed, k):
    rng = np.random.default_rng(seed)
    a = expt.subspace_alignment(synth.haar_orthonormal(12, 5, rng), synth.haar_orthonormal(12, 5, rng), k)
    assert np.all((a >= 0) & (a <= 1))
    assert np.all(np.diff(a) <= 0)
