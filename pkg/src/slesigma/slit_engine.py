"""Slit maps for constant driving, their inverses, and hull point clouds.

Constant driving ``U`` for capacity time ``t`` gives the map ``z -> F(z - U, t)``
with ``F(f, t) = f * sqrt(1 + 4t / f**2)`` (principal branch).  The map is
analytic off the vertical slit ``U + i[-2 sqrt(t), 2 sqrt(t)]`` and behaves like
``z - U`` at infinity.  Real and imaginary constant drivers produce the same
flow; only the centre ``U`` differs.  The inverse ``w -> w sqrt(1 - 4t/w**2) + U``
is analytic off the real segment ``[-2 sqrt(t), 2 sqrt(t)]``.

A step ``k`` of a driving path applies the real map for ``X_k`` and then the
imaginary map for ``Y_k``, each for half the step's capacity time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .model import DrivingPath, transform_path

PROBES = np.array([0, 1, -1, 1j, -1j], dtype=np.complex128)
DEFAULT_N = 25_000
DEFAULT_EPSILON = 0.02
DEFAULT_HORIZON = 2.0


class OnSlitError(ValueError):
    """The point sits on the excluded segment of a slit map."""


def _on_slit_tol(z, tol):
    return 1e-9 * (1.0 + np.abs(z)) if tol is None else tol


def _flow(f, t):
    with np.errstate(divide="ignore", invalid="ignore"):
        return f * np.sqrt(1.0 + 4.0 * t / (f * f))


def _inverse_flow(w, t):
    with np.errstate(divide="ignore", invalid="ignore"):
        return w * np.sqrt(1.0 - 4.0 * t / (w * w))


def _check_time(t):
    if not t >= 0:
        raise ValueError(f"capacity time must be nonnegative, got {t}")


def _forward(center, t, z, tol):
    _check_time(t)
    z = np.asarray(z, dtype=np.complex128)
    f = z - center
    if t == 0:
        return f[()]
    tol = _on_slit_tol(z, tol)
    bad = (np.abs(f.real) <= tol) & (np.abs(f.imag) <= 2.0 * math.sqrt(t) + tol)
    if np.any(bad):
        raise OnSlitError(f"point(s) {z[bad][:3]} on the slit {center} ± 2i√{t}")
    return _flow(f, t)[()]


def _inverse(center, t, w, tol):
    _check_time(t)
    w = np.asarray(w, dtype=np.complex128)
    if t == 0:
        return (w + center)[()]
    tol = _on_slit_tol(w, tol)
    bad = (np.abs(w.imag) <= tol) & (np.abs(w.real) <= 2.0 * math.sqrt(t) + tol)
    if np.any(bad):
        raise OnSlitError(f"point(s) {w[bad][:3]} on the segment ±2√{t}")
    return (_inverse_flow(w, t) + center)[()]


def slit_map_real(x: float, t: float, z, tol: float | None = None):
    """Loewner map at time ``t`` for the constant real driver ``x``."""
    return _forward(float(x), t, z, tol)


def slit_map_imag(y: float, t: float, z, tol: float | None = None):
    """Loewner map at time ``t`` for the constant imaginary driver ``i*y``."""
    return _forward(1j * float(y), t, z, tol)


def inverse_slit_real(x: float, t: float, w, tol: float | None = None):
    return _inverse(float(x), t, w, tol)


def inverse_slit_imag(y: float, t: float, w, tol: float | None = None):
    return _inverse(1j * float(y), t, w, tol)


# ------------------------------------------------------------------ composition

@dataclass
class Composition:
    """Values of the composed centered maps along a driving path.

    ``values[k]`` is the image after ``k`` full steps, ``values[0]`` is the input.
    Points that get absorbed keep ``nan`` after ``absorbed_at``.
    """

    values: np.ndarray
    absorbed_at: np.ndarray
    times: np.ndarray

    @property
    def final(self):
        return self.values[-1]


def compose_forward(path: DrivingPath, z, delta_abs: float | None = None) -> Composition:
    """Push ``z`` (scalar or array) through every step of ``path``.

    A point is absorbed at step ``k`` (1-based) when one of the two slits of
    that step passes within ``delta_abs`` of its centred image; the default is
    ``1e-9 * (1 + |z|)``.  ``absorbed_at`` is ``-1`` for points that survive.
    """
    z = np.asarray(z, dtype=np.complex128)
    scalar = z.ndim == 0
    cur = np.atleast_1d(z).astype(np.complex128).ravel()
    tol = _on_slit_tol(cur, delta_abs) * np.ones(cur.shape)
    n = path.n
    tau = 0.5 * path.dt
    half = 2.0 * math.sqrt(tau)
    values = np.empty((n + 1, cur.size), dtype=np.complex128)
    values[0] = cur
    absorbed = np.full(cur.size, -1, dtype=np.int64)
    alive = np.ones(cur.size, dtype=bool)
    for k in range(n):
        for center in (path.x[k], 1j * path.y[k]):
            f = cur - center
            hit = alive & (np.abs(f.real) <= tol) & (np.abs(f.imag) <= half + tol)
            if hit.any():
                absorbed[hit] = k + 1
                alive &= ~hit
                f[hit] = np.nan
            cur = _flow(f, tau)
        values[k + 1] = cur
    times = path.dt * np.arange(n + 1)
    if scalar:
        return Composition(values[:, 0], absorbed[0], times)
    return Composition(values.reshape((n + 1,) + z.shape), absorbed.reshape(z.shape), times)


# ------------------------------------------------------------------- hull clouds

@numba.njit(inline="always", error_model="numpy")
def _inv_step(u, v, t4):
    # w * sqrt(1 - t4 / w**2) in real arithmetic; principal branch, stable form
    r2 = u * u + v * v
    q = t4 / (r2 * r2)
    ar = 1.0 - q * (u * u - v * v)
    ai = q * 2.0 * u * v
    mm = math.sqrt(ar * ar + ai * ai)
    s = math.sqrt(0.5 * (mm + abs(ar)))
    t = 0.5 * ai / s
    pos = ar >= 0.0
    sr = s if pos else abs(t)
    # the sign of ai (including a signed zero) picks the side of the cut
    si = t if pos else math.copysign(s, ai)
    return u * sr - v * si, u * si + v * sr


@numba.njit(error_model="numpy", cache=True)
def _sweep(U, V, m, t4, xj, yj):
    # yj == 0 leaves v untouched so that a signed zero survives on real paths
    for i in range(m):
        u, v = _inv_step(U[i], V[i], t4)
        if yj != 0.0:
            v = v + yj
        u, v = _inv_step(u, v, t4)
        U[i] = u + xj
        V[i] = v


@numba.njit(error_model="numpy", cache=True)
def _invert_chains(xs, ys, t4, start_re, start_im):
    # Chains started at step j (0-based) hold f_{j+1}^{-1}(probe).  Starting
    # points are already pushed through the first inverse slit map.
    n = xs.shape[0]
    P = start_re.shape[0]
    U = np.empty(n * P)
    V = np.empty(n * P)
    m = 0
    for j in range(n - 1, -1, -1):
        _sweep(U, V, m, t4, xs[j], ys[j])
        yj = ys[j]
        for p in range(P):
            v = start_im[p]
            if yj != 0.0:
                v = v + yj
            u, v = _inv_step(start_re[p], v, t4)
            U[m] = u + xs[j]
            V[m] = v
            m += 1
    return U, V


def _first_inverse(w, tau, both_zero_signs):
    """Images of probe ``w`` under the first inverse map (no centre added).

    On the excluded segment both one-sided limits are returned.  Real probes
    off the segment stay real; for real paths they are started with both
    signs of zero so that later segment hits are resolved to both sides.
    """
    half = 2.0 * math.sqrt(tau)
    if w.imag == 0 and abs(w.real) <= half:
        h = math.sqrt(max(4.0 * tau - w.real * w.real, 0.0))
        return [complex(0.0, h), complex(0.0, -h)], True
    g = complex(_inverse_flow(np.complex128(w), tau)) if tau > 0 else w
    if w.imag == 0:
        if both_zero_signs:
            return [complex(g.real, 0.0), complex(g.real, -0.0)], False
        return [complex(g.real, 0.0)], False
    return [g], False


@dataclass
class HullPointCloud:
    """Sampled hull points with the capacity time at which each was added."""

    points: np.ndarray
    t_added: np.ndarray
    probe: np.ndarray
    side: str
    epsilon: float
    path_meta: dict
    n_dropped: int = 0
    n_on_slit: int = 0
    step: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return self.points.size

    def rotated(self, factor: complex) -> "HullPointCloud":
        return HullPointCloud(self.points * factor, self.t_added, self.probe, self.side,
                              self.epsilon, self.path_meta, self.n_dropped, self.n_on_slit,
                              self.step)


def left_hull_cloud(path: DrivingPath, epsilon: float = DEFAULT_EPSILON,
                    probes=PROBES) -> HullPointCloud:
    """Approximate the left hulls by ``f_k^{-1}(epsilon * w)`` over steps and probes.

    Points are ordered by step ``k`` and then by probe.  Probes on the excluded
    segment of the first inverse map contribute both one-sided images and are
    counted in ``n_on_slit``.  Non-finite results are dropped and counted in
    ``n_dropped``.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    probes = np.asarray(probes, dtype=np.complex128).ravel()
    tau = 0.5 * path.dt
    real_path = not np.any(path.y)
    starts, tags, n_on_slit = [], [], 0
    for p, w in enumerate(probes):
        imgs, on_slit = _first_inverse(complex(epsilon * w), tau, real_path)
        n_on_slit += on_slit
        for g in imgs:
            # identical starting points only duplicate work
            if not any(g == s and math.copysign(1, g.imag) == math.copysign(1, s.imag)
                       for s in starts):
                starts.append(g)
                tags.append(p)
    starts = np.array(starts, dtype=np.complex128)
    tags = np.array(tags, dtype=np.int64)
    U, V = _invert_chains(path.x, path.y, 4.0 * tau, starts.real.copy(), starts.imag.copy())
    P = starts.size
    n = path.n
    # chains were appended from the last step backwards; reorder to k ascending
    idx = ((n - 1 - np.arange(n))[:, None] * P + np.arange(P)[None, :]).ravel()
    pts = (U + 1j * V)[idx]
    k = np.repeat(np.arange(1, n + 1), P)
    probe = np.tile(tags, n)
    ok = np.isfinite(pts)
    return HullPointCloud(
        points=pts[ok],
        t_added=k[ok] * path.dt,
        probe=probe[ok],
        side="left",
        epsilon=float(epsilon),
        path_meta=path.meta(),
        n_dropped=int((~ok).sum()),
        n_on_slit=int(n_on_slit * n),
        step=k[ok],
    )


def right_hull_cloud(path: DrivingPath, epsilon: float = DEFAULT_EPSILON,
                     probes=PROBES) -> HullPointCloud:
    """Right hulls as ``i`` times the left cloud of the dual path."""
    cloud = left_hull_cloud(transform_path(path, "dual"), epsilon, probes)
    out = cloud.rotated(1j)
    out.side = "right"
    out.path_meta = path.meta()
    return out
