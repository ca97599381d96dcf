import math

import numpy as np
import pytest

import darcynas as dn


def test_field_and_covariance():
    spec = dn.FieldSpec(dim=2, kind=dn.CorrelationKind.gaussian, sigma2=0.1, modes=200, seed=3)
    real = dn.realize(spec)
    pts = np.random.default_rng(0).uniform(0, 20, size=(50, 2))
    y = real.log_perturbation(pts)
    k = real.conductivity(pts)
    assert y.shape == (50,)
    assert np.all(k > 0)
    assert dn.covariance(dn.CorrelationKind.gaussian, 0.0, 0.1, 1.0) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        real.conductivity(np.zeros((3, 3)))


def test_manufactured_case_1d():
    c = dn.canonical_case(1)
    x = np.array([0.0, 1.0])
    assert np.allclose(dn.h_exact(c, x), 3.0 + np.sin(x))


def test_fdm_constant_field_is_accurate():
    spec = dn.FieldSpec(dim=1, sigma2=0.0, modes=1)
    res = dn.fdm_solve(spec, spacing=0.01)
    assert res["delta_h"] <= 1e-4
    assert res["solution"].shape == (res["shape"][0],)


def test_pinn_training_reduces_loss(tmp_path):
    spec = dn.FieldSpec(dim=1, sigma2=0.1, modes=100)
    res = dn.train_pinn(spec, layers=1, neurons=8, adam_iters=50, lbfgs_iters=20, interior=40, boundary=1)
    trace = res["loss_trace"]
    assert trace[-1] < trace[0]
    path = str(tmp_path / "net.ckpt")
    dn.save_checkpoint(path, res["network"])
    back = dn.load_checkpoint(path)
    x = np.linspace(0, 25, 7)
    assert np.array_equal(back(x), res["network"](x))


def test_morris_affine_slopes():
    params = [("a", 0, 10), ("b", 0, 10)]
    res = dn.morris(params, lambda u: 2.0 * u[0] - 0.5 * u[1], trajectories=4, levels=4, seed=1)
    assert res["mu_star"] == pytest.approx([2.0, 0.5], abs=1e-12)
    assert max(res["sigma"]) <= 1e-12


def test_searchers():
    sched = dn.hyperband_schedule(81, 3)
    assert [b["n"] for b in sched] == [81, 34, 15, 8, 5]
    assert dn.jaya_update(5.0, 1.0, 9.0, 0.5, 0.5) == 1.0
    params = [("u", 0, 20), ("v", 0, 20)]
    res = dn.search("random", params, lambda c: (c[0] - 5) ** 2 + (c[1] - 7) ** 2, budget=15, seed=2)
    assert len(res["log"]) == 15
    assert res["best_value"] == min(t["value"] for t in res["log"])
    assert dn.expected_improvement(0.0, 1.0, 0.0) == pytest.approx(1.0 / math.sqrt(2 * math.pi))
