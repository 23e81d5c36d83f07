"""Divergence-free spectral vector fields on the torus and their operators.

A field is stored as complex Cartesian 3-vector coefficients on the modes
{l in Z^3_0 : |l| <= M} (spherical truncation).  The Fourier convention is
f(x) = sum_l f_l exp(2 pi i l.x); a field is real-valued iff
conj(f_l) = f_{-l}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import frame, frames, lattice_ball

TWO_PI_I = 2j * np.pi


class ModeSet:
    """The spherically truncated mode lattice with index lookup and frames."""

    def __init__(self, max_mode: int):
        if max_mode < 1:
            raise ValueError("max_mode must be >= 1")
        self.max_mode = int(max_mode)
        self.modes = lattice_ball(max_mode)           # (n, 3) int64
        self.n = self.modes.shape[0]
        self.norm_sq = (self.modes * self.modes).sum(axis=1).astype(np.float64)
        self.frames = frames(self.modes)              # (n, 2, 3)

        r = self.max_mode
        self._lookup = -np.ones((2 * r + 1,) * 3, dtype=np.int64)
        self._lookup[tuple((self.modes + r).T)] = np.arange(self.n)
        self.conj_index = self.index_of(-self.modes)
        self._pair_table = None

    def index_of(self, kvecs: np.ndarray) -> np.ndarray:
        """Row indices of (m, 3) integer vectors; -1 for vectors outside."""
        kvecs = np.asarray(kvecs, dtype=np.int64)
        single = kvecs.ndim == 1
        if single:
            kvecs = kvecs[None, :]
        r = self.max_mode
        inside = np.all(np.abs(kvecs) <= r, axis=1)
        idx = -np.ones(len(kvecs), dtype=np.int64)
        if inside.any():
            idx[inside] = self._lookup[tuple((kvecs[inside] + r).T)]
        return int(idx[0]) if single else idx

    def pair_table(self):
        """Ordered mode pairs (j, l) with j + l inside the set.

        Returns int arrays (src_j, src_l, dst); cached, used by the direct
        convolution path of the bilinear terms.
        """
        if self._pair_table is None:
            j = np.repeat(np.arange(self.n), self.n)
            l = np.tile(np.arange(self.n), self.n)
            dst = self.index_of(self.modes[j] + self.modes[l])
            keep = dst >= 0
            self._pair_table = (j[keep].astype(np.int64),
                                l[keep].astype(np.int64),
                                dst[keep])
        return self._pair_table


_MODE_SET_CACHE: dict = {}


def mode_set(max_mode: int) -> ModeSet:
    """Shared ModeSet instances (construction is the expensive part)."""
    ms = _MODE_SET_CACHE.get(max_mode)
    if ms is None:
        ms = _MODE_SET_CACHE[max_mode] = ModeSet(max_mode)
    return ms


@dataclass
class SpectralField:
    """Complex coefficients (n, 3) on a ModeSet; zero mean by construction."""

    ms: ModeSet
    coeff: np.ndarray

    @classmethod
    def zero(cls, ms: ModeSet) -> "SpectralField":
        return cls(ms, np.zeros((ms.n, 3), dtype=np.complex128))

    def copy(self) -> "SpectralField":
        return SpectralField(self.ms, self.coeff.copy())

    def __add__(self, other):
        _check_same(self, other)
        return SpectralField(self.ms, self.coeff + other.coeff)

    def __sub__(self, other):
        _check_same(self, other)
        return SpectralField(self.ms, self.coeff - other.coeff)

    def __mul__(self, scalar):
        return SpectralField(self.ms, self.coeff * scalar)

    __rmul__ = __mul__

    def norm(self) -> float:
        """L^2 norm (Parseval: sum of squared coefficient magnitudes)."""
        return float(np.sqrt(np.sum(np.abs(self.coeff) ** 2)))

    def reality_defect(self) -> float:
        """max |conj(f_l) - f_{-l}| over modes."""
        d = np.conj(self.coeff) - self.coeff[self.ms.conj_index]
        return float(np.max(np.abs(d))) if self.ms.n else 0.0

    def divergence_defect(self) -> float:
        """max |l . f_l| / |f_l|-scale over modes."""
        div = np.abs((self.ms.modes * self.coeff).sum(axis=1))
        scale = np.linalg.norm(self.coeff, axis=1) * np.sqrt(self.ms.norm_sq)
        return float(np.max(div / np.maximum(scale, 1e-300)))

    def enforce_reality(self) -> None:
        self.coeff += np.conj(self.coeff[self.ms.conj_index])
        self.coeff *= 0.5


def _check_same(a: SpectralField, b: SpectralField):
    if a.ms is not b.ms and a.ms.max_mode != b.ms.max_mode:
        raise ValueError("fields live on different truncations")


def inner(f: SpectralField, g: SpectralField) -> complex:
    """Hermitian L^2 inner product sum_l f_l . conj(g_l).

    For real-valued g this coincides with the bilinear pairing
    integral f . g dx used throughout the energy identities.
    """
    _check_same(f, g)
    return complex(np.sum(f.coeff * np.conj(g.coeff)))


def sigma_field(ms: ModeSet, k, alpha: int, amplitude=1.0) -> SpectralField:
    """The basis field sigma_{k,alpha} = a_{k,alpha} e_k as a SpectralField."""
    i = ms.index_of(np.asarray(k, dtype=np.int64))
    if i < 0:
        raise ValueError(f"mode {k} outside truncation {ms.max_mode}")
    f = SpectralField.zero(ms)
    f.coeff[i] = amplitude * ms.frames[i, alpha - 1]
    return f


def leray_project(f: SpectralField) -> SpectralField:
    """Divergence-free part: v_l -> v_l - (l.v_l) l / |l|^2."""
    ldotv = (f.ms.modes * f.coeff).sum(axis=1) / f.ms.norm_sq
    return SpectralField(f.ms, f.coeff - ldotv[:, None] * f.ms.modes)


def leray_perp(f: SpectralField) -> SpectralField:
    """Gradient part: v_l -> (l.v_l) l / |l|^2."""
    ldotv = (f.ms.modes * f.coeff).sum(axis=1) / f.ms.norm_sq
    return SpectralField(f.ms, ldotv[:, None] * f.ms.modes)


def curl(f: SpectralField) -> SpectralField:
    """(curl f)_l = 2 pi i l x f_l."""
    return SpectralField(f.ms, TWO_PI_I * np.cross(f.ms.modes, f.coeff))


def biot_savart(xi: SpectralField) -> SpectralField:
    """Velocity u with curl u = xi: u_l = i (l x xi_l) / (2 pi |l|^2)."""
    u = np.cross(xi.ms.modes, xi.coeff) * (1j / (2 * np.pi)) / xi.ms.norm_sq[:, None]
    return SpectralField(xi.ms, u)


def laplacian(f: SpectralField) -> SpectralField:
    """(Delta f)_l = -4 pi^2 |l|^2 f_l."""
    return SpectralField(f.ms, -4 * np.pi ** 2 * f.ms.norm_sq[:, None] * f.coeff)


def sobolev_norm(f: SpectralField, s: float) -> float:
    """H^s norm with weights (4 pi^2 |l|^2)^s; s = 0 is the L^2 norm."""
    w = (4 * np.pi ** 2 * f.ms.norm_sq) ** s
    return float(np.sqrt(np.sum(w * np.sum(np.abs(f.coeff) ** 2, axis=1))))


def grad_norm(f: SpectralField) -> float:
    """|nabla f|_{L^2}, i.e. the H^1 seminorm sqrt(sum 4 pi^2 |l|^2 |f_l|^2)."""
    w = 4 * np.pi ** 2 * f.ms.norm_sq
    return float(np.sqrt(np.sum(w * np.sum(np.abs(f.coeff) ** 2, axis=1))))


def advect_by_sigma(k, alpha: int, f: SpectralField,
                    out_ms: ModeSet | None = None) -> SpectralField:
    """sigma_{k,alpha} . grad f: mode l contributes 2 pi i (a_{k,alpha}.l) f_l at l+k.

    Output modes outside the target truncation are dropped (Galerkin
    projection).  Note a_{k,alpha} = a_{-k,alpha}, so the direction vector
    depends on k only through its sign orbit while the shift keeps the sign.
    """
    out_ms = out_ms or f.ms
    k = np.asarray(k, dtype=np.int64)
    a = frame(k)[alpha - 1]
    dst = out_ms.index_of(f.ms.modes + k)
    keep = dst >= 0
    out = SpectralField.zero(out_ms)
    coef = TWO_PI_I * (f.ms.modes[keep] @ a)
    np.add.at(out.coeff, dst[keep], coef[:, None] * f.coeff[keep])
    return out


def lie_by_sigma(k, alpha: int, f: SpectralField,
                 out_ms: ModeSet | None = None) -> SpectralField:
    """Full Lie derivative L_{sigma_{k,alpha}} f = sigma.grad f - f.grad sigma.

    Mode l contributes 2 pi i [ (a.l) f_l - (f_l.k) a ] at l+k.
    """
    out_ms = out_ms or f.ms
    k = np.asarray(k, dtype=np.int64)
    a = frame(k)[alpha - 1]
    dst = out_ms.index_of(f.ms.modes + k)
    keep = dst >= 0
    out = SpectralField.zero(out_ms)
    transport = (f.ms.modes[keep] @ a)[:, None] * f.coeff[keep]
    stretch = (f.coeff[keep] @ k.astype(np.float64))[:, None] * a[None, :]
    np.add.at(out.coeff, dst[keep], TWO_PI_I * (transport - stretch))
    return out


def lie_derivative(u: SpectralField, xi: SpectralField) -> SpectralField:
    """L_u xi = u.grad xi - xi.grad u by direct mode-pair convolution.

    Both fields must share the truncation; the result is Galerkin-truncated
    and Leray-projected.
    """
    _check_same(u, xi)
    ms = u.ms
    src_j, src_l, dst = ms.pair_table()
    lmat = ms.modes[src_l].astype(np.float64)
    du = (u.coeff[src_j] * lmat).sum(axis=1)    # u_j . l
    dxi = (xi.coeff[src_j] * lmat).sum(axis=1)  # xi_j . l
    contrib = TWO_PI_I * (du[:, None] * xi.coeff[src_l]
                          - dxi[:, None] * u.coeff[src_l])
    out = SpectralField.zero(ms)
    for c in range(3):
        out.coeff[:, c] = (np.bincount(dst, contrib[:, c].real, minlength=ms.n)
                           + 1j * np.bincount(dst, contrib[:, c].imag, minlength=ms.n))
    return leray_project(out)


class GridConvolver:
    """Pseudo-spectral evaluation of the Lie derivative on an FFT grid.

    The grid is large enough (>= 3M+1 points per axis) that no aliased
    frequency folds back onto a retained mode, so the result matches the
    direct convolution to roundoff.
    """

    def __init__(self, ms: ModeSet):
        self.ms = ms
        size = 3 * ms.max_mode + 1
        while _largest_prime_factor(size) > 7:
            size += 1
        self.size = size
        self.grid_idx = tuple(np.mod(ms.modes, size).T)

    def _to_grid(self, coeff_col: np.ndarray) -> np.ndarray:
        g = np.zeros((self.size,) * 3, dtype=np.complex128)
        g[self.grid_idx] = coeff_col
        return np.fft.ifftn(g) * self.size ** 3

    def _from_grid(self, g: np.ndarray) -> np.ndarray:
        return np.fft.fftn(g)[self.grid_idx] / self.size ** 3

    def lie_derivative(self, u: SpectralField, xi: SpectralField) -> SpectralField:
        ms = self.ms
        lfac = TWO_PI_I * ms.modes.astype(np.float64)
        ug = [self._to_grid(u.coeff[:, c]) for c in range(3)]
        xig = [self._to_grid(xi.coeff[:, c]) for c in range(3)]
        out = SpectralField.zero(ms)
        for c in range(3):
            dxi_c = [self._to_grid(lfac[:, d] * xi.coeff[:, c]) for d in range(3)]
            du_c = [self._to_grid(lfac[:, d] * u.coeff[:, c]) for d in range(3)]
            phys = sum(ug[d] * dxi_c[d] - xig[d] * du_c[d] for d in range(3))
            out.coeff[:, c] = self._from_grid(phys)
        return leray_project(out)


def _largest_prime_factor(n: int) -> int:
    p, f = 2, 1
    while p * p <= n:
        while n % p == 0:
            f, n = p, n // p
        p += 1
    return max(f, n)


def random_divergence_free(ms: ModeSet, rng: np.random.Generator,
                           norm: float | None = None,
                           max_mode: int | None = None) -> SpectralField:
    """Seeded random real-valued divergence-free field, optionally band-limited."""
    f = SpectralField.zero(ms)
    f.coeff[:] = rng.standard_normal((ms.n, 3)) + 1j * rng.standard_normal((ms.n, 3))
    if max_mode is not None:
        f.coeff[ms.norm_sq > max_mode ** 2] = 0.0
    f.enforce_reality()
    f = leray_project(f)
    if norm is not None:
        n0 = f.norm()
        if n0 > 0:
            f.coeff *= norm / n0
    return f
