"""Single-point evolution under the centred Loewner SDE, sigma-time, polar SDEs.

In capacity time the centred map satisfies ``df = 2/f dt - dU``.  After the
time change ``d(sigma) = dt / |f|^2`` the angle ``theta`` of ``f`` and the
logarithms of ``|f|`` and ``|f'|`` solve autonomous SDEs whose coefficients
are the pi-periodic functions ``mu``, ``nu`` and ``D`` below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .model import CovarianceSpec, DrivingPath, _rng, correlated_normals

DELTA_SWALLOW = 1e-4
H_MAX = 1e-5


@dataclass(frozen=True)
class AngularCoefficients:
    u: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    D: np.ndarray


def _kappa(sigma: CovarianceSpec) -> float:
    return 2.0 - 0.5 * sigma.a + 0.5 * sigma.b


def angular_coefficients(sigma: CovarianceSpec, u) -> AngularCoefficients:
    """Evaluate ``mu``, ``nu`` and ``D`` at angle(s) ``u``."""
    u = np.asarray(u, dtype=np.float64)
    k = _kappa(sigma)
    s2, c2 = np.sin(2 * u), np.cos(2 * u)
    su, cu = np.sin(u), np.cos(u)
    mu = -k * s2 - sigma.c * c2
    nu = k * c2 - sigma.c * s2
    D = 0.5 * sigma.a * su * su + 0.5 * sigma.b * cu * cu - sigma.c * cu * su
    return AngularCoefficients(u[()], mu[()], nu[()], D[()])


def D_prime(sigma: CovarianceSpec, u):
    u = np.asarray(u, dtype=np.float64)
    return 0.5 * (sigma.a - sigma.b) * np.sin(2 * u) - sigma.c * np.cos(2 * u)


# ------------------------------------------------------------ capacity time

@dataclass
class PointTrajectory:
    """Samples ``(t, f)`` of ``f_t(z0)``; ``driver`` holds ``U_t`` at the same times.

    ``T_z`` is the interval ``(t_last_above, t_first_below)`` bracketing the
    absorption time, or ``None``.
    """

    z0: complex
    t: np.ndarray
    f: np.ndarray
    driver: np.ndarray
    absorbed: bool
    T_z: tuple | None
    delta_swallow: float

    @property
    def samples(self):
        return list(zip(self.t.tolist(), self.f.tolist()))


@numba.njit(cache=True)
def _evolve(z, x, y, dt_drv, h_max, delta, cap):
    n = x.shape[0]
    ts = np.empty(cap)
    fr = np.empty(cap)
    fi = np.empty(cap)
    ur = np.empty(cap)
    ui = np.empty(cap)
    fre, fim = z.real, z.imag
    cur_ur, cur_ui = 0.0, 0.0
    ts[0] = 0.0
    fr[0] = fre
    fi[0] = fim
    ur[0] = 0.0
    ui[0] = 0.0
    m = 1
    absorbed = False
    t = 0.0
    for j in range(n):
        left = dt_drv
        base_t = j * dt_drv
        done = 0.0
        while left > 0.0:
            r2 = fre * fre + fim * fim
            step = min(h_max, 0.1 * r2, left)
            if step >= left * (1.0 - 1e-12):
                step = left
            frac = step / dt_drv
            dx = x[j] * frac
            dy = y[j] * frac
            # 2/f = 2 conj(f) / |f|^2
            fre = fre + 2.0 * fre / r2 * step - dx
            fim = fim - 2.0 * fim / r2 * step - dy
            cur_ur += dx
            cur_ui += dy
            done += step
            left = dt_drv - done
            if left <= 0.0:
                t = base_t + dt_drv
            else:
                t = base_t + done
            if m >= cap:
                return ts[:m], fr[:m], fi[:m], ur[:m], ui[:m], absorbed, True
            ts[m] = t
            fr[m] = fre
            fi[m] = fim
            ur[m] = cur_ur
            ui[m] = cur_ui
            m += 1
            if math.sqrt(fre * fre + fim * fim) <= delta:
                absorbed = True
                return ts[:m], fr[:m], fi[:m], ur[:m], ui[:m], absorbed, False
    return ts[:m], fr[:m], fi[:m], ur[:m], ui[:m], absorbed, False


def evolve_point(path: DrivingPath, z: complex, delta_swallow: float = DELTA_SWALLOW,
                 h_max: float = H_MAX, max_samples: int = 200_000_000) -> PointTrajectory:
    """Euler integration of ``df = 2/f dt - dU`` along ``path``.

    Each driver increment is spread linearly over substeps of length
    ``min(h_max, 0.1 |f|^2, remaining)``.  Integration stops once
    ``|f| <= delta_swallow`` or the path ends.  Explicit Euler keeps
    ``|Re(2/f)|, |Im(2/f)| <= 2`` on every substep that starts with ``|f| >= 1``.
    """
    z = complex(z)
    if z == 0:
        raise ValueError("z must be nonzero")
    if not h_max > 0:
        raise ValueError("h_max must be positive")
    cap = int(path.horizon / h_max) + path.n + 1024
    while True:
        ts, fr, fi, ur, ui, absorbed, overflow = _evolve(
            z, np.asarray(path.x), np.asarray(path.y), path.dt, float(h_max),
            float(delta_swallow), min(cap, max_samples))
        if not overflow:
            break
        if cap >= max_samples:
            raise RuntimeError(f"more than {max_samples} substeps; raise max_samples")
        cap *= 4
    f = fr + 1j * fi
    T_z = (float(ts[-2]), float(ts[-1])) if absorbed else None
    return PointTrajectory(z, ts.copy(), f, ur + 1j * ui, bool(absorbed), T_z, float(delta_swallow))


@dataclass
class SigmaTimeMap:
    """Knots ``(sigma_time, t)``; both columns strictly increasing."""

    sigma: np.ndarray
    t: np.ndarray

    @property
    def knots(self):
        return np.column_stack([self.sigma, self.t])

    def capacity_time(self, s):
        """Capacity time at sigma-time ``s`` (linear interpolation)."""
        return np.interp(s, self.sigma, self.t)

    def sigma_time(self, t):
        return np.interp(t, self.t, self.sigma)


def sigma_time(traj: PointTrajectory) -> SigmaTimeMap:
    """Trapezoid-rule integral of ``|f_t|^-2`` on the trajectory grid."""
    if traj.t.size < 2:
        raise ValueError("need at least two samples")
    w = 1.0 / np.abs(traj.f) ** 2
    inc = 0.5 * (w[1:] + w[:-1]) * np.diff(traj.t)
    return SigmaTimeMap(np.concatenate([[0.0], np.cumsum(inc)]), traj.t.copy())


# ------------------------------------------------------------------ polar SDE

@dataclass
class PolarTrajectory:
    """Euler-Maruyama solution of the polar system on a uniform sigma-time grid.

    Arrays have shape ``(len(times),) + theta0.shape``.  ``X``/``Y`` hold the
    noise increments when they were kept.
    """

    sigma_spec: CovarianceSpec
    h: float
    times: np.ndarray
    theta: np.ndarray
    logmod: np.ndarray
    logderiv: np.ndarray
    X: np.ndarray | None = None
    Y: np.ndarray | None = None
    seed: tuple | None = None

    def to_csv(self, dest, column: int = 0, header: str | None = None) -> None:
        theta = self.theta.reshape(self.times.size, -1)[:, column]
        lm = self.logmod.reshape(self.times.size, -1)[:, column]
        ld = self.logderiv.reshape(self.times.size, -1)[:, column]
        with open(dest, "w", encoding="utf-8") as fh:
            if header:
                fh.write(header)
            fh.write("sigma_time,theta,logmod,logderiv\n")
            for row in zip(self.times, theta, lm, ld):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


def polar_step(sigma, theta, logmod, logderiv, h, X, Y):
    """One Euler step; the same ``(X, Y)`` feeds angle and modulus."""
    co = angular_coefficients(sigma, theta)
    s, c = np.sin(theta), np.cos(theta)
    new_theta = theta + co.mu * h - s * X + c * Y
    new_logmod = logmod + co.nu * h + c * X + s * Y
    new_logderiv = logderiv - 2.0 * np.cos(2.0 * theta) * h
    return new_theta, new_logmod, new_logderiv


def polar_evolve(sigma: CovarianceSpec, theta0, t_end: float, h: float, seed: int,
                 stream: int = 0, checkpoints=None, keep_increments: bool | None = None,
                 noise=None) -> PolarTrajectory:
    """Simulate the polar SDEs from ``theta0`` (scalar or array) up to ``t_end``.

    With ``checkpoints`` only those sigma-times (rounded to the grid) are
    stored; otherwise every step is.  ``noise`` may supply a generator; by
    default one is derived from ``(seed, stream)``.
    """
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    if not t_end >= 0:
        raise ValueError("t_end must be nonnegative")
    steps = int(round(t_end / h))
    theta = np.array(theta0, dtype=np.float64)
    shape = theta.shape
    logmod = np.zeros(shape)
    logderiv = np.zeros(shape)
    rng = noise if noise is not None else _rng(seed, stream)
    sq = math.sqrt(h)
    if checkpoints is None:
        keep_idx = np.arange(steps + 1)
    else:
        keep_idx = np.unique(np.clip(np.round(np.asarray(checkpoints) / h).astype(int), 0, steps))
    if keep_increments is None:
        keep_increments = checkpoints is None
    slot = {int(k): i for i, k in enumerate(keep_idx)}
    out_th = np.empty((keep_idx.size,) + shape)
    out_lm = np.empty_like(out_th)
    out_ld = np.empty_like(out_th)
    Xs = np.empty((steps,) + shape) if keep_increments else None
    Ys = np.empty((steps,) + shape) if keep_increments else None

    def store(k):
        i = slot.get(k)
        if i is not None:
            out_th[i], out_lm[i], out_ld[i] = theta, logmod, logderiv

    store(0)
    for k in range(steps):
        g = rng.standard_normal((2,) + shape)
        X, Y = correlated_normals(sigma, g[0], g[1], sq)
        if keep_increments:
            Xs[k], Ys[k] = X, Y
        theta, logmod, logderiv = polar_step(sigma, theta, logmod, logderiv, h, X, Y)
        store(k + 1)
    return PolarTrajectory(sigma, h, keep_idx * h, out_th, out_lm, out_ld, Xs, Ys,
                           (int(seed), int(stream)))
