"""The Stratonovich-Ito corrector, its exact lattice identities and limits.

The corrector acting on divergence-free fields splits as
S(v) = nu Lap v - S_perp(v), where S_perp is block-diagonal over
wavevectors: mode l is mapped to mode l through a real symmetric 2x2
matrix in the frame coordinates (v_{l,1}, v_{l,2}).
"""

from __future__ import annotations

import warnings

import numpy as np

from .lattice import ThetaWeights, frames
from .field import (ModeSet, SpectralField, advect_by_sigma, grad_norm,
                    laplacian, leray_project, lie_by_sigma, mode_set,
                    sigma_field)


def coefficient_covariance(theta: ThetaWeights) -> np.ndarray:
    """sum_{k,alpha} theta_k^2 (a_{k,alpha} x a_{k,alpha}), a real 3x3 matrix.

    For radially symmetric weights this equals (2/3) |theta|_{l2}^2 I_3.
    """
    if not theta.is_radially_symmetric():
        warnings.warn("weights are not radially symmetric; "
                      "the covariance identity may fail", stacklevel=2)
    fr = frames(theta.vectors)  # (m, 2, 3)
    w = theta.weights ** 2
    return (np.einsum("m,mai,maj->ij", w, fr, fr))


def _support_arrays(theta: ThetaWeights):
    K = theta.vectors.astype(np.float64)
    return K, theta.weights ** 2, theta.norm_sq.astype(np.float64)


def perp_vectors(theta: ThetaWeights, l, frames_l: np.ndarray,
                 form: str = "angle") -> np.ndarray:
    """The two lattice-sum vectors w_{l,beta} behind the S_perp block at mode l.

    w_{l,beta} = sum_{k != l, alpha} theta_k^2 (a_{k,alpha}.l)^2
                 (a_{l,beta}.(k-l)) (k-l)/|k-l|^2,
    evaluated either through the frames of k (form="frame") or through the
    equivalent |l|^2 sin^2(angle(k,l)) weight (form="angle").  The k = l
    term is skipped: the shifted mode is the mean mode, which carries no
    gradient content on the torus.
    """
    l = np.asarray(l, dtype=np.float64)
    lsq = float(l @ l)
    K, w2, knsq = _support_arrays(theta)
    d = K - l
    dnsq = (d * d).sum(axis=1)
    keep = dnsq > 0
    d, dnsq, K, w2, knsq = d[keep], dnsq[keep], K[keep], w2[keep], knsq[keep]

    if form == "angle":
        kl = K @ l
        weight = w2 * lsq * (1.0 - kl * kl / (knsq * lsq))
    elif form == "frame":
        fr = frames(theta.vectors[keep])
        weight = w2 * ((fr[:, 0] @ l) ** 2 + (fr[:, 1] @ l) ** 2)
    else:
        raise ValueError(f"unknown form {form!r}")

    out = np.empty((2, 3))
    for b in range(2):
        coefs = weight * (d @ frames_l[b]) / dnsq
        out[b] = coefs @ d
    return out


def perp_block(theta: ThetaWeights, nu: float, l, frames_l: np.ndarray,
               form: str = "angle") -> np.ndarray:
    """Real 2x2 matrix of S_perp on the frame coordinates of mode l."""
    w = perp_vectors(theta, l, frames_l, form=form)
    scale = -6 * np.pi ** 2 * nu / theta.l2 ** 2
    # B[b', b] = scale * (a_{l,b'} . w_b); Leray projection at mode l keeps
    # exactly the frame components.
    return scale * (w @ frames_l.T).T


def perp_blocks(theta: ThetaWeights, nu: float, ms: ModeSet,
                form: str = "angle") -> np.ndarray:
    """S_perp blocks for every mode of a truncation, shape (n, 2, 2)."""
    out = np.empty((ms.n, 2, 2))
    for i in range(ms.n):
        out[i] = perp_block(theta, nu, ms.modes[i], ms.frames[i], form=form)
    return out


def _frame_coords(f: SpectralField) -> np.ndarray:
    """(n, 2) complex frame coordinates of a divergence-free field."""
    return np.einsum("nc,nbc->nb", f.coeff, f.ms.frames)


def _from_frame_coords(ms: ModeSet, coords: np.ndarray) -> SpectralField:
    return SpectralField(ms, np.einsum("nb,nbc->nc", coords, ms.frames))


def s_theta_perp_apply(theta: ThetaWeights, nu: float, v: SpectralField,
                       form: str = "angle",
                       blocks: np.ndarray | None = None) -> SpectralField:
    """Apply S_perp mode-by-mode through its 2x2 blocks."""
    if blocks is None:
        blocks = perp_blocks(theta, nu, v.ms, form=form)
    coords = _frame_coords(v)
    return _from_frame_coords(v.ms, np.einsum("nab,nb->na", blocks, coords))


def s_theta_apply(theta: ThetaWeights, nu: float, v: SpectralField,
                  form: str = "angle",
                  blocks: np.ndarray | None = None) -> SpectralField:
    """S(v) = nu Lap v - S_perp(v)."""
    return nu * laplacian(v) - s_theta_perp_apply(theta, nu, v, form=form,
                                                  blocks=blocks)


def s_theta_direct(theta: ThetaWeights, nu: float, xi: SpectralField,
                   inner_projection: bool = True) -> SpectralField:
    """Brute-force corrector: the weighted sum of double advections.

    Independent oracle for s_theta_apply.  Intermediate modes l-k are kept
    on an enlarged truncation so that nothing is lost before shifting back.
    With inner_projection=False the inner Leray projection is omitted and
    the result collapses to nu Lap xi (the key covariance identity).
    """
    ms = xi.ms
    reach = int(np.ceil(theta.max_radius))
    ext = mode_set(ms.max_mode + reach)
    lift = SpectralField.zero(ext)
    lift.coeff[ext.index_of(ms.modes)] = xi.coeff

    acc = SpectralField.zero(ext)
    for kvec, w in zip(theta.vectors, theta.weights):
        for alpha in (1, 2):
            g = advect_by_sigma(-kvec, alpha, lift, ext)
            if inner_projection:
                g = leray_project(g)
            acc = acc + (w * w) * advect_by_sigma(kvec, alpha, g, ext)
    acc = leray_project(acc)
    acc.coeff *= 1.5 * nu / theta.l2 ** 2  # C_nu^2 / |theta|^2

    out = SpectralField.zero(ms)
    out.coeff[:] = acc.coeff[ext.index_of(ms.modes)]
    return out


def prop54_sum(N: int, gamma: float, l, beta: int,
               theta: ThetaWeights | None = None) -> np.ndarray:
    """Normalized lattice sum whose large-N limit is (4/15) a_{l,beta}.

    (1/|theta|^2) sum_k theta_k^2 sin^2(angle(k,l))
                  (a_{l,beta}.(k-l)) (k-l)/|k-l|^2
    for the shell weights of parameter N (or any supplied weights).
    """
    from .lattice import theta_shell
    theta = theta or theta_shell(N, gamma)
    fl = frames(np.asarray(l, dtype=np.int64)[None, :])[0]
    w = perp_vectors(theta, l, fl, form="angle")
    lsq = float(np.asarray(l, dtype=np.float64) @ np.asarray(l, dtype=np.float64))
    return w[beta - 1] / (lsq * theta.l2 ** 2)


def prop54_continuum(n_quad: int = 64) -> float:
    """Continuum counterpart of the lattice sum via 1D Gauss quadrature.

    After the spherical reduction the radial factors cancel and the limit
    is (pi * int sin^5) / (2 pi * int sin) = 4/15; the angular integrals
    are evaluated numerically rather than read off in closed form.
    """
    x, wts = np.polynomial.legendre.leggauss(n_quad)
    psi = 0.5 * np.pi * (x + 1.0)
    half_pi = 0.5 * np.pi
    sin5 = half_pi * np.sum(wts * np.sin(psi) ** 5)
    sin1 = half_pi * np.sum(wts * np.sin(psi))
    return float(np.pi * sin5 / (2 * np.pi * sin1))


def limit_defect(N: int, gamma: float, nu: float, l, beta: int) -> float:
    """Relative distance of S(sigma_{l,beta}) from its scaling limit.

    |S_N(sigma_{l,beta}) - (3/5) nu Lap sigma_{l,beta}| / ((12/5) pi^2 nu |l|^2);
    independent of nu by homogeneity.
    """
    from .lattice import theta_shell
    theta = theta_shell(N, gamma)
    l = np.asarray(l, dtype=np.int64)
    fl = frames(l[None, :])[0]
    B = perp_block(theta, nu, l, fl)
    lsq = float(l @ l)
    # frame coords of S(sigma) - (3/5) nu Lap sigma = (2/5) nu Lap sigma - S_perp sigma
    diff = -1.6 * np.pi ** 2 * nu * lsq * np.eye(2)[:, beta - 1] - B[:, beta - 1]
    return float(np.linalg.norm(diff) / (2.4 * np.pi ** 2 * nu * lsq))


def perp_pairing(theta: ThetaWeights, nu: float, l) -> float:
    """<S_perp(sigma_{l,1}+sigma_{l,2}), conj pair> = sum of the block entries.

    Approaches -(16/5) pi^2 nu |l|^2 for shell weights of growing N.
    """
    l = np.asarray(l, dtype=np.int64)
    fl = frames(l[None, :])[0]
    return float(perp_block(theta, nu, l, fl).sum())


def advection_double_lie(theta: ThetaWeights, xi: SpectralField) -> SpectralField:
    """Brute-force sum_{k,alpha} theta_k^2 L_{sigma_k}(L_{sigma_-k} xi).

    Equals (2/3) |theta|_{l2}^2 Lap xi; intermediates ride on an enlarged
    truncation so the double shift suffers no Galerkin loss.
    """
    ms = xi.ms
    reach = int(np.ceil(theta.max_radius))
    ext = mode_set(ms.max_mode + reach)
    lift = SpectralField.zero(ext)
    lift.coeff[ext.index_of(ms.modes)] = xi.coeff

    acc = SpectralField.zero(ms)
    for kvec, w in zip(theta.vectors, theta.weights):
        for alpha in (1, 2):
            g = lie_by_sigma(-kvec, alpha, lift, ext)
            acc = acc + (w * w) * lie_by_sigma(kvec, alpha, g, ms)
    return acc


def advection_energy_J(theta: ThetaWeights, nu: float, xi: SpectralField):
    """Both sides of the advection-noise energy identity.

    lhs = (3 nu / |theta|^2) sum_{k,alpha} theta_k^2 |L_{sigma_{k,alpha}} xi|^2,
    rhs = 2 nu |grad xi|^2 + 8 nu pi^2 (|theta|_{h1}^2/|theta|_{l2}^2) |xi|^2.
    The transport part contributes the gradient term; the stretching part
    |xi . grad sigma_{k,alpha}|^2 = 4 pi^2 |(xi.k)|^2 is alpha-independent
    and so enters twice.  The h1/l2 ratio is what diverges along the shell
    sequence.
    """
    ms = xi.ms
    reach = int(np.ceil(theta.max_radius))
    ext = mode_set(ms.max_mode + reach)
    lift = SpectralField.zero(ext)
    lift.coeff[ext.index_of(ms.modes)] = xi.coeff

    total = 0.0
    for kvec, w in zip(theta.vectors, theta.weights):
        for alpha in (1, 2):
            total += w * w * lie_by_sigma(kvec, alpha, lift, ext).norm() ** 2
    lhs = 3 * nu * total / theta.l2 ** 2
    rhs = (2 * nu * grad_norm(xi) ** 2
           + 8 * nu * np.pi ** 2 * (theta.h1 / theta.l2) ** 2 * xi.norm() ** 2)
    return lhs, rhs


def lemma31_dissipation(theta: ThetaWeights, nu: float, xi: SpectralField) -> float:
    """-(3 nu / |theta|^2) sum_{k,alpha} theta_k^2 |Pi(sigma_{k,alpha}.grad xi)|^2 / 2.

    Equals <xi, S(xi)> for real xi (integration by parts); intermediate
    modes are kept on an enlarged truncation.
    """
    ms = xi.ms
    reach = int(np.ceil(theta.max_radius))
    ext = mode_set(ms.max_mode + reach)
    lift = SpectralField.zero(ext)
    lift.coeff[ext.index_of(ms.modes)] = xi.coeff

    total = 0.0
    for kvec, w in zip(theta.vectors, theta.weights):
        for alpha in (1, 2):
            total += w * w * leray_project(
                advect_by_sigma(kvec, alpha, lift, ext)).norm() ** 2
    return -1.5 * nu * total / theta.l2 ** 2
