"""Complex Brownian drivers and the Galerkin time integrator.

The truncated vorticity SDE integrated here is

  d xi = [ -f_R(|xi|_{-delta}) P_N Pi(L_u xi) + visc*Lap xi + S(xi) ] dt
         + (C/|theta|) sum_{k,alpha} theta_k P_N Pi(sigma_{k,alpha}.grad xi) dW^{k,alpha}

with C = sqrt(3 nu / 2).  The linear part visc*Lap + S is block-diagonal
over modes (2x2 on frame coordinates) and is applied through its exact
matrix exponential each step; nonlinearity and noise are explicit Ito
Euler terms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import ThetaWeights, _sign_factors, frame
from .corrector import perp_blocks
from .field import (GridConvolver, ModeSet, SpectralField, TWO_PI_I,
                    biot_savart, grad_norm, leray_project, mode_set,
                    random_divergence_free, sobolev_norm)

RNG_ALGORITHM = "philox4x64"


class IntegrationFailure(RuntimeError):
    """Numerical failure during time stepping; carries the failing time."""

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} at t={t:.6g}")
        self.t = t


def cutoff_fR(x: float, R: float) -> float:
    """Smooth non-increasing cutoff: 1 on [0,R], 0 on [R+1,inf).

    The bridge on (R, R+1) is cos^2(pi (x-R) / 2), which is C^1 and
    monotone; f_R(R + 1/2) = 1/2.
    """
    if R <= 0:
        raise ValueError(f"cutoff threshold R must be > 0, got {R}")
    if x < 0:
        raise ValueError(f"cutoff argument must be >= 0, got {x}")
    if x <= R:
        return 1.0
    if x >= R + 1:
        return 0.0
    return float(np.cos(np.pi * (x - R) / 2) ** 2)


class NoiseDriver:
    """Seeded stream of complex Gaussian increments for the noise basis.

    One complex increment per plus-class support vector k and frame index
    alpha; the minus-class values are conj-derived, never sampled.  The
    increment layout (and hence the stream) depends only on theta and the
    seed material, not on the field truncation.
    """

    def __init__(self, theta: ThetaWeights, seed: int, stream: tuple = ()):
        keep = _sign_factors(theta.vectors) > 0
        self.plus_vectors = theta.vectors[keep]
        self.plus_weights = theta.weights[keep]
        self.n_plus = len(self.plus_vectors)
        self.seed = int(seed)
        self.stream = tuple(int(s) for s in stream)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        self.rng = np.random.Generator(np.random.Philox(ss))

    def sample_increments(self, dt: float) -> np.ndarray:
        """(n_plus, 2) complex array of dW^{k,alpha} = dB1 + i dB2."""
        if dt <= 0:
            raise ValueError(f"dt must be > 0, got {dt}")
        g = self.rng.standard_normal((self.n_plus, 2, 2))
        return np.sqrt(dt) * (g[..., 0] + 1j * g[..., 1])


@dataclass
class TimeSeries:
    """Per-step scalar diagnostics of a simulated path."""

    COLUMNS = ("t", "norm_sq", "grad_norm_sq", "sob_minus_delta", "cutoff")

    t: list = field(default_factory=list)
    norm_sq: list = field(default_factory=list)
    grad_norm_sq: list = field(default_factory=list)
    sob_minus_delta: list = field(default_factory=list)
    cutoff: list = field(default_factory=list)

    def append(self, t, xi: SpectralField, delta: float, fR: float):
        self.t.append(t)
        self.norm_sq.append(xi.norm() ** 2)
        self.grad_norm_sq.append(grad_norm(xi) ** 2)
        self.sob_minus_delta.append(sobolev_norm(xi, -delta))
        self.cutoff.append(fR)

    def rows(self):
        return list(zip(self.t, self.norm_sq, self.grad_norm_sq,
                        self.sob_minus_delta, self.cutoff))


class NoiseConvolver:
    """Pseudo-spectral application of the martingale term.

    All noise indices share one random coefficient field
    A(x) = sum_{k,alpha} theta_k dW^{k,alpha} a_{k,alpha} e_k (real-valued
    by conjugate pairing), so the whole term is the single product
    A . grad xi.  The grid is sized so that no product of a contributing
    shift (|k| <= 2M) with a retained mode aliases onto a retained mode.
    """

    def __init__(self, ms: ModeSet, driver: NoiseDriver):
        self.ms = ms
        limit_sq = (2 * ms.max_mode) ** 2
        ksq = (driver.plus_vectors ** 2).sum(axis=1)
        keep = (ksq <= limit_sq) & (driver.plus_weights > 0)
        self.active = np.nonzero(keep)[0]
        self.kvecs = driver.plus_vectors[keep]
        self.weights = driver.plus_weights[keep]
        from .lattice import frames as _frames
        self.kframes = _frames(self.kvecs) if len(self.kvecs) else None

        kmax = (int(np.ceil(np.sqrt(ksq[keep].max())))
                if keep.any() else 0)
        size = max(3 * ms.max_mode + 1, kmax + 2 * ms.max_mode + 1)
        from .field import _largest_prime_factor
        while _largest_prime_factor(size) > 7:
            size += 1
        self.size = size
        self.mode_idx = tuple(np.mod(ms.modes, size).T)
        self.kplus_idx = tuple(np.mod(self.kvecs, size).T)
        self.kminus_idx = tuple(np.mod(-self.kvecs, size).T)

    @property
    def has_noise(self) -> bool:
        return len(self.kvecs) > 0

    def apply(self, xi: SpectralField, dW: np.ndarray) -> SpectralField:
        """P_N(A . grad xi) for the increment field A; not yet Leray-projected."""
        s = self.size
        amp = self.weights[:, None] * (
            dW[self.active, 0, None] * self.kframes[:, 0]
            + dW[self.active, 1, None] * self.kframes[:, 1])
        out = SpectralField.zero(self.ms)
        grids = np.zeros((3, s, s, s), dtype=np.complex128)
        for d in range(3):
            grids[d][self.kplus_idx] = amp[:, d]
            np.add.at(grids[d], self.kminus_idx, np.conj(amp[:, d]))
            grids[d] = np.fft.ifftn(grids[d]) * s ** 3
        lfac = TWO_PI_I * self.ms.modes.astype(np.float64)
        for c in range(3):
            phys = np.zeros((s, s, s), dtype=np.complex128)
            for d in range(3):
                g = np.zeros((s, s, s), dtype=np.complex128)
                g[self.mode_idx] = lfac[:, d] * xi.coeff[:, c]
                phys += grids[d] * (np.fft.ifftn(g) * s ** 3)
            out.coeff[:, c] = np.fft.fftn(phys)[self.mode_idx] / s ** 3
        return out


def _noise_tables(ms: ModeSet, driver: NoiseDriver):
    """Gather/scatter tables for the martingale term on a truncation.

    Only shifts with |k| <= 2 max_mode can connect two retained modes, so
    larger support vectors are omitted from the tables (their increments
    are still drawn, keeping the stream truncation-independent).
    """
    src, dst, coef, pid, cj = [], [], [], [], []
    limit_sq = (2 * ms.max_mode) ** 2
    for p in range(driver.n_plus):
        k = driver.plus_vectors[p]
        if k @ k > limit_sq or driver.plus_weights[p] == 0.0:
            continue
        w = driver.plus_weights[p]
        a_pair = frame(k)
        for alpha in (1, 2):
            a = a_pair[alpha - 1]
            for s, conj_flag in ((1, False), (-1, True)):
                d = ms.index_of(ms.modes + s * k)
                keep = d >= 0
                src.append(np.nonzero(keep)[0])
                dst.append(d[keep])
                coef.append(w * TWO_PI_I * (ms.modes[keep] @ a))
                npts = keep.sum()
                pid.append(np.full(npts, p * 2 + (alpha - 1), dtype=np.int64))
                cj.append(np.full(npts, conj_flag))
    if not src:
        return None
    return (np.concatenate(src), np.concatenate(dst), np.concatenate(coef),
            np.concatenate(pid), np.concatenate(cj))


def _bincount_complex(idx, vals, minlength):
    return (np.bincount(idx, vals.real, minlength=minlength)
            + 1j * np.bincount(idx, vals.imag, minlength=minlength))


class GalerkinIntegrator:
    """One trajectory of the truncated vorticity SDE.

    visc is the deterministic viscosity in front of Lap (1 for the noisy
    system, nu1 for the deterministic reference); theta=None or nu=0
    switches off both the noise and its corrector, reducing the stepper to
    the deterministic solver bit-for-bit.
    """

    def __init__(self, ms: ModeSet, theta: ThetaWeights | None, nu: float,
                 dt: float, R: float = np.inf, delta: float = 0.25,
                 visc: float = 1.0, nonlinearity: bool = True,
                 cutoff: bool = True, driver: NoiseDriver | None = None,
                 blocks: np.ndarray | None = None, guard: float = 1e6):
        self.ms = ms
        self.theta = theta if (theta is not None and len(theta) and nu > 0) else None
        self.nu = float(nu)
        self.dt = float(dt)
        self.R = float(R)
        self.delta = float(delta)
        self.visc = float(visc)
        self.nonlinearity = bool(nonlinearity)
        self.cutoff = bool(cutoff)
        self.guard = float(guard)
        self.conv = GridConvolver(ms) if self.nonlinearity else None

        A = np.zeros((ms.n, 2, 2))
        A[:, 0, 0] = A[:, 1, 1] = -4 * np.pi ** 2 * self.visc * ms.norm_sq
        if self.theta is not None:
            if blocks is None:
                blocks = perp_blocks(self.theta, self.nu, ms)
            # S = nu Lap - S_perp: add the Laplacian part to the diagonal,
            # subtract the block.
            A[:, 0, 0] -= 4 * np.pi ** 2 * self.nu * ms.norm_sq
            A[:, 1, 1] -= 4 * np.pi ** 2 * self.nu * ms.norm_sq
            A -= blocks
        w, V = np.linalg.eigh(A)
        self.propagator = np.einsum("nab,nb,ncb->nac", V, np.exp(w * self.dt), V)

        self.driver = driver
        self.noise_conv = None
        self._tables = None
        self.noise_scale = 0.0
        if self.theta is not None and driver is not None:
            conv = NoiseConvolver(ms, driver)
            if conv.has_noise:
                self.noise_conv = conv
                self.noise_scale = np.sqrt(1.5 * self.nu) / self.theta.l2

    @property
    def has_noise(self) -> bool:
        return self.noise_conv is not None

    def martingale_term(self, xi: SpectralField, dW: np.ndarray) -> SpectralField:
        """(C/|theta|) sum theta_k P_N Pi(sigma.grad xi) dW, Leray-projected."""
        if self.noise_conv is None:
            return SpectralField.zero(self.ms)
        out = self.noise_conv.apply(xi, dW)
        out.coeff *= self.noise_scale
        return leray_project(out)

    def martingale_term_direct(self, xi: SpectralField,
                               dW: np.ndarray) -> SpectralField:
        """Table-based oracle for martingale_term (slow path)."""
        out = SpectralField.zero(self.ms)
        if self._noise_tables() is None:
            return out
        src, dst, coef, pid, cj = self._noise_tables()
        dw = dW.reshape(-1)[pid]
        dw = np.where(cj, np.conj(dw), dw)
        factor = (coef * dw)[:, None] * xi.coeff[src]
        for c in range(3):
            out.coeff[:, c] = _bincount_complex(dst, factor[:, c], self.ms.n)
        out.coeff *= self.noise_scale
        return leray_project(out)

    def _noise_tables(self):
        if self._tables is None and self.driver is not None:
            self._tables = _noise_tables(self.ms, self.driver)
        return self._tables

    def noise_brackets(self, xi: SpectralField):
        """|<xi, P_N(sigma_{k,alpha}.grad xi)>| per noise index (theta-free).

        Returns (values, |k| per index); exactly zero in exact arithmetic
        (energy neutrality of transport), so the values measure roundoff.
        """
        if self._noise_tables() is None:
            return np.zeros(0), np.zeros(0)
        src, dst, coef, pid, cj = self._noise_tables()
        gid = pid * 2 + cj
        vals = coef * (xi.coeff[src] * np.conj(xi.coeff[dst])).sum(axis=1)
        ngroups = 2 * 2 * self.driver.n_plus
        sums = _bincount_complex(gid, vals, ngroups)
        wts = np.repeat(self.driver.plus_weights, 4)
        knorm = np.repeat(np.sqrt((self.driver.plus_vectors ** 2).sum(axis=1)), 4)
        active = wts > 0
        return np.abs(sums[active]) / wts[active], knorm[active]

    def step(self, t: float, xi: SpectralField,
             dW: np.ndarray | None = None) -> SpectralField:
        y = xi.coeff.copy()
        fR = 1.0
        if self.nonlinearity:
            if self.cutoff and np.isfinite(self.R):
                fR = cutoff_fR(sobolev_norm(xi, -self.delta), self.R)
            if fR > 0.0:
                u = biot_savart(xi)
                adv = self.conv.lie_derivative(u, xi)
                y -= self.dt * fR * adv.coeff
        if self.noise_conv is not None and dW is not None:
            y += self.martingale_term(xi, dW).coeff

        # exact linear propagation on frame coordinates (also re-projects)
        coords = np.einsum("nc,nbc->nb", y, self.ms.frames)
        coords = np.einsum("nab,nb->na", self.propagator, coords)
        out = SpectralField(self.ms, np.einsum("nb,nbc->nc", coords, self.ms.frames))
        out.enforce_reality()

        nrm = out.norm()
        if not np.isfinite(nrm):
            raise IntegrationFailure("non-finite state", t + self.dt)
        if nrm > self.guard:
            raise IntegrationFailure(
                f"norm {nrm:.3g} exceeded guard {self.guard:.3g}", t + self.dt)
        return out

    def run(self, xi0: SpectralField, T: float, observer=None) -> TimeSeries:
        """Integrate to time T, recording diagnostics every step."""
        nsteps = int(round(T / self.dt))
        xi = xi0.copy()
        series = TimeSeries()
        fR0 = (cutoff_fR(sobolev_norm(xi, -self.delta), self.R)
               if (self.cutoff and np.isfinite(self.R)) else 1.0)
        series.append(0.0, xi, self.delta, fR0)
        if observer is not None:
            observer(0, 0.0, xi)
        for i in range(nsteps):
            dW = (self.driver.sample_increments(self.dt)
                  if self.driver is not None else None)
            xi = self.step(i * self.dt, xi, dW)
            t = (i + 1) * self.dt
            fR = (cutoff_fR(sobolev_norm(xi, -self.delta), self.R)
                  if (self.cutoff and np.isfinite(self.R)) else 1.0)
            series.append(t, xi, self.delta, fR)
            if observer is not None:
                observer(i + 1, t, xi)
        return series


def theta_from_config(cfg) -> ThetaWeights | None:
    from .lattice import theta_ball, theta_shell
    kind = cfg["theta.kind"]
    if kind == "none":
        return None
    maker = theta_shell if kind == "shell" else theta_ball
    return maker(cfg["theta.N"], cfg["theta.gamma"])


def initial_condition(cfg, sample: int) -> SpectralField:
    """Seeded band-limited initial vorticity of norm R0, shared across N."""
    ms = mode_set(cfg["M"])
    ss = np.random.SeedSequence(cfg["seed"], spawn_key=(1, sample))
    rng = np.random.Generator(np.random.Philox(ss))
    return random_divergence_free(ms, rng, norm=cfg["R0"],
                                  max_mode=min(2, cfg["M"]))


def driver_for(theta: ThetaWeights, cfg, N: int, sample: int) -> NoiseDriver:
    return NoiseDriver(theta, cfg["seed"], stream=(2, N, sample))


def simulate(cfg, sample: int = 0, observer=None) -> TimeSeries:
    """One reproducible trajectory of the configured system."""
    ms = mode_set(cfg["M"])
    theta = theta_from_config(cfg)
    driver = (driver_for(theta, cfg, cfg["theta.N"], sample)
              if theta is not None and cfg["nu"] > 0 else None)
    integ = GalerkinIntegrator(ms, theta, cfg["nu"], cfg["dt"], R=cfg["R"],
                               delta=cfg["delta"], driver=driver)
    return integ.run(initial_condition(cfg, sample), cfg["T"], observer=observer)
