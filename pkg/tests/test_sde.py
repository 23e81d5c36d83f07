import numpy as np
import pytest

from specvort.config import SimConfig
from specvort.corrector import lemma31_dissipation
from specvort.field import mode_set, random_divergence_free, sigma_field
from specvort.lattice import theta_shell
from specvort.sde import (GalerkinIntegrator, IntegrationFailure, NoiseDriver,
                          cutoff_fR, initial_condition, simulate)


def test_cutoff_plateau_bridge_support():
    assert cutoff_fR(0.0, 2.0) == 1.0
    assert cutoff_fR(2.0, 2.0) == 1.0
    assert cutoff_fR(3.0, 2.0) == 0.0
    assert cutoff_fR(5.0, 2.0) == 0.0
    assert cutoff_fR(2.5, 2.0) == pytest.approx(0.5)
    xs = np.linspace(0, 4, 200)
    vals = [cutoff_fR(x, 2.0) for x in xs]
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))


def test_cutoff_domain_errors():
    with pytest.raises(ValueError):
        cutoff_fR(1.0, 0.0)
    with pytest.raises(ValueError):
        cutoff_fR(-0.1, 1.0)


def test_increments_deterministic_and_conjugate_layout():
    th = theta_shell(1, 0)
    a = NoiseDriver(th, 99).sample_increments(0.01)
    b = NoiseDriver(th, 99).sample_increments(0.01)
    assert np.array_equal(a, b)
    c = NoiseDriver(th, 99, stream=(1,)).sample_increments(0.01)
    assert not np.array_equal(a, c)
    assert a.shape == (len(th) // 2, 2)


def test_increment_covariation():
    # E[dW conj(dW)] = 2 dt, E[dW dW] = 0
    drv = NoiseDriver(theta_shell(1, 0), 5)
    dt, n = 0.02, 100_000
    samples = np.array([drv.sample_increments(dt)[0, 0] for _ in range(n)])
    assert np.mean(samples * np.conj(samples)).real / dt == pytest.approx(2.0, rel=0.05)
    assert abs(np.mean(samples * samples)) / dt < 0.05 * 2.0


def test_pure_heat_decay_single_mode():
    ms = mode_set(3)
    xi0 = sigma_field(ms, (1, 0, 0), 1) + sigma_field(ms, (-1, 0, 0), 1)
    integ = GalerkinIntegrator(ms, None, 0.0, 1e-3, nonlinearity=False)
    xi = xi0.copy()
    for i in range(50):
        xi = integ.step(i * 1e-3, xi)
    assert xi.norm() / xi0.norm() == pytest.approx(
        np.exp(-4 * np.pi ** 2 * 0.05), rel=1e-12)


def test_fft_martingale_matches_table_oracle():
    ms = mode_set(4)
    th = theta_shell(2, 1.0)
    drv = NoiseDriver(th, 12)
    integ = GalerkinIntegrator(ms, th, 2.0, 1e-3, R=50.0, driver=drv)
    xi = random_divergence_free(ms, np.random.default_rng(0), norm=1.0)
    for _ in range(3):
        dW = drv.sample_increments(1e-3)
        fast = integ.martingale_term(xi, dW)
        slow = integ.martingale_term_direct(xi, dW)
        assert (fast - slow).norm() < 1e-13 * max(slow.norm(), 1e-30)


def test_martingale_energy_neutrality_brackets():
    ms = mode_set(4)
    th = theta_shell(2, 1.0)
    drv = NoiseDriver(th, 12)
    integ = GalerkinIntegrator(ms, th, 2.0, 1e-3, R=50.0, driver=drv)
    xi = random_divergence_free(ms, np.random.default_rng(4), norm=2.0)
    vals, knorm = integ.noise_brackets(xi)
    assert len(vals)
    assert np.all(vals <= 1e-12 * xi.norm() ** 2 * np.maximum(knorm, 1.0))


def test_noise_quadratic_variation_matches_dissipation():
    # E |G(xi, dW)|^2 = -2 <xi, S xi> dt  (Ito isometry of the noise term)
    ms = mode_set(5)
    th = theta_shell(1, 0.0)
    nu, dt = 1.5, 1e-3
    drv = NoiseDriver(th, 7)
    integ = GalerkinIntegrator(ms, th, nu, dt, R=50.0, driver=drv)
    xi = random_divergence_free(ms, np.random.default_rng(2), norm=1.0,
                                max_mode=3)  # keep sigma.grad xi inside P_N
    target = -2 * lemma31_dissipation(th, nu, xi) * dt
    acc = 0.0
    n = 400
    for _ in range(n):
        acc += integ.martingale_term(xi, drv.sample_increments(dt)).norm() ** 2
    assert acc / n == pytest.approx(target, rel=0.15)


def test_step_preserves_reality_and_divergence():
    cfg = SimConfig({"M": 4, "theta": {"kind": "shell", "N": 2, "gamma": 1.0},
                     "nu": 2.0, "T": 0.02, "dt": 1e-3, "seed": 3})
    th = theta_shell(2, 1.0)
    drv = NoiseDriver(th, 3, (2, 2, 0))
    ms = mode_set(4)
    integ = GalerkinIntegrator(ms, th, 2.0, 1e-3, R=100.0, driver=drv)
    xi = initial_condition(cfg, 0)
    for i in range(20):
        xi = integ.step(i * 1e-3, xi, drv.sample_increments(1e-3))
        assert xi.reality_defect() < 1e-10 * max(np.abs(xi.coeff).max(), 1e-30)
        assert xi.divergence_defect() < 1e-10


def test_zero_noise_reduces_to_deterministic_bitwise():
    cfg = SimConfig({"M": 3, "theta": {"kind": "none", "N": 1, "gamma": 0.0},
                     "nu": 0.0, "T": 0.02, "dt": 1e-3, "seed": 5})
    ts = simulate(cfg, 0)
    integ = GalerkinIntegrator(mode_set(3), None, 0.0, 1e-3,
                               R=cfg["R"], delta=cfg["delta"])
    ref = integ.run(initial_condition(cfg, 0), 0.02)
    assert ts.norm_sq == ref.norm_sq
    assert ts.grad_norm_sq == ref.grad_norm_sq


def test_simulate_zero_initial_data_stays_zero():
    cfg = SimConfig({"M": 3, "R0": 1e-300, "T": 0.01, "dt": 1e-3,
                     "theta": {"kind": "shell", "N": 1, "gamma": 0.0},
                     "nu": 1.0})
    ts = simulate(cfg, 0)
    assert max(ts.norm_sq) < 1e-200


def test_guard_triggers_integration_failure():
    ms = mode_set(3)
    xi = random_divergence_free(ms, np.random.default_rng(1), norm=1.0)
    integ = GalerkinIntegrator(ms, None, 0.0, 1e-3, guard=1e-9)
    with pytest.raises(IntegrationFailure):
        integ.step(0.0, xi)


def test_simulate_reproducible_per_sample():
    cfg = SimConfig({"M": 3, "T": 0.01, "dt": 1e-3, "seed": 11,
                     "theta": {"kind": "shell", "N": 1, "gamma": 1.0},
                     "nu": 1.0})
    a = simulate(cfg, sample=2)
    b = simulate(cfg, sample=2)
    c = simulate(cfg, sample=3)
    assert a.norm_sq == b.norm_sq
    assert a.norm_sq != c.norm_sq
