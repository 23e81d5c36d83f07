import numpy as np
import pytest

from specvort.field import (GridConvolver, SpectralField, advect_by_sigma,
                            biot_savart, curl, grad_norm, inner, laplacian,
                            leray_perp, leray_project, lie_by_sigma,
                            lie_derivative, mode_set, random_divergence_free,
                            sigma_field, sobolev_norm)


def rand_field(M, seed, norm=1.0):
    return random_divergence_free(mode_set(M), np.random.default_rng(seed),
                                  norm=norm)


def test_mode_set_lookup_roundtrip():
    ms = mode_set(3)
    idx = ms.index_of(ms.modes)
    assert np.array_equal(idx, np.arange(ms.n))
    assert ms.index_of((4, 0, 0)) == -1
    assert ms.index_of((2, 2, 2)) == -1  # inside the cube but outside the ball
    assert np.array_equal(ms.modes[ms.conj_index], -ms.modes)


def test_random_field_is_real_and_divergence_free():
    f = rand_field(4, 1)
    assert f.reality_defect() < 1e-14
    assert f.divergence_defect() < 1e-13
    assert f.norm() == pytest.approx(1.0)


def test_leray_decomposition():
    ms = mode_set(3)
    rng = np.random.default_rng(7)
    f = SpectralField(ms, rng.standard_normal((ms.n, 3))
                      + 1j * rng.standard_normal((ms.n, 3)))
    p, q = leray_project(f), leray_perp(f)
    assert np.allclose(p.coeff + q.coeff, f.coeff)
    assert p.divergence_defect() < 1e-13
    assert leray_project(p).coeff == pytest.approx(p.coeff)
    # gradient part is pointwise parallel to the wavevector
    assert np.allclose(np.cross(ms.modes, q.coeff), 0, atol=1e-12)


def test_curl_of_biot_savart_recovers_vorticity():
    xi = rand_field(4, 2)
    back = curl(biot_savart(xi))
    assert np.max(np.abs(back.coeff - xi.coeff)) < 1e-13
    assert biot_savart(xi).divergence_defect() < 1e-13


def test_laplacian_and_sobolev_norms():
    ms = mode_set(3)
    f = sigma_field(ms, (1, 2, 0), 1)
    lap = laplacian(f)
    assert np.allclose(lap.coeff, -4 * np.pi ** 2 * 5 * f.coeff)
    assert sobolev_norm(f, 0.0) == pytest.approx(f.norm())
    assert grad_norm(f) == pytest.approx(2 * np.pi * np.sqrt(5))
    assert sobolev_norm(f, -1.0) == pytest.approx(1 / (2 * np.pi * np.sqrt(5)))


def test_advect_by_sigma_single_mode():
    ms = mode_set(3)
    f = sigma_field(ms, (0, 0, 1), 1, amplitude=2.0)
    g = advect_by_sigma((1, 0, 0), 1, f)
    i = ms.index_of((1, 0, 1))
    nonzero = np.nonzero(np.abs(g.coeff).sum(axis=1))[0]
    assert list(nonzero) == [i]
    from specvort.lattice import frame
    a = frame((1, 0, 0))[0]
    expect = 2j * np.pi * (a @ [0, 0, 1]) * 2.0 * frame((0, 0, 1))[0]
    assert np.allclose(g.coeff[i], expect)


def test_advect_output_truncation():
    ms = mode_set(2)
    f = sigma_field(ms, (2, 0, 0), 1)
    g = advect_by_sigma((1, 0, 0), 2, f)  # lands on |l|=3, dropped
    assert g.norm() == 0.0


def test_lie_by_sigma_splits_into_transport_minus_stretch():
    ms = mode_set(3)
    xi = rand_field(3, 5)
    k = np.array([1, 1, 0])
    lie = lie_by_sigma(k, 2, xi)
    adv = advect_by_sigma(k, 2, xi)
    from specvort.lattice import frame
    a = frame(k)[1]
    stretch = SpectralField.zero(ms)
    dst = ms.index_of(ms.modes + k)
    keep = dst >= 0
    coef = 2j * np.pi * (xi.coeff[keep] @ k.astype(float))
    np.add.at(stretch.coeff, dst[keep], coef[:, None] * a[None, :])
    assert np.allclose(lie.coeff, adv.coeff - stretch.coeff, atol=1e-14)


def test_lie_derivative_matches_grid_convolver():
    for M, seed in ((3, 0), (4, 1), (5, 2)):
        xi = rand_field(M, seed)
        u = biot_savart(xi)
        direct = lie_derivative(u, xi)
        grid = GridConvolver(mode_set(M)).lie_derivative(u, xi)
        assert (direct - grid).norm() < 1e-12 * max(direct.norm(), 1.0)


def test_lie_derivative_preserves_reality():
    xi = rand_field(4, 9)
    out = lie_derivative(biot_savart(xi), xi)
    assert out.reality_defect() < 1e-12
    assert out.divergence_defect() < 1e-10


def test_inner_is_hermitian():
    f, g = rand_field(3, 10), rand_field(3, 11)
    assert inner(f, g) == pytest.approx(np.conj(inner(g, f)))
    assert inner(f, f).real == pytest.approx(f.norm() ** 2)


def test_enforce_reality_projects():
    ms = mode_set(2)
    rng = np.random.default_rng(3)
    f = SpectralField(ms, rng.standard_normal((ms.n, 3))
                      + 1j * rng.standard_normal((ms.n, 3)))
    f.enforce_reality()
    assert f.reality_defect() < 1e-15
