"""Vectorized adaptive Gauss-Legendre quadrature over many intervals at once."""

from __future__ import annotations

import numpy as np


class QuadratureError(RuntimeError):
    """Adaptive refinement hit its depth limit; ``interval`` is the culprit."""

    def __init__(self, message, interval):
        super().__init__(f"{message} on [{interval[0]!r}, {interval[1]!r}]")
        self.interval = interval


_NODES = {}


def _gl(order):
    if order not in _NODES:
        _NODES[order] = np.polynomial.legendre.leggauss(order)
    return _NODES[order]


def integrate(f, a, b, abstol=1e-13, reltol=1e-13, order=8, max_depth=40):
    """Integrate ``f(x, idx)`` over each interval ``[a[i], b[i]]``.

    ``f`` receives a flat array of abscissae and the matching interval
    indices and must return values of the same shape.  Each panel compares one
    ``order``-point rule with the same rule on both halves; panels failing
    ``err <= max(abstol * width / root_width, reltol * |value|)`` are bisected.
    Returns ``(values, error_estimates)``.
    """
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    a, b = np.broadcast_arrays(a, b)
    a = a.ravel()
    b = b.ravel()
    x, w = _gl(order)
    total = np.zeros(a.size)
    errs = np.zeros(a.size)
    root_w = np.abs(b - a)
    root_w[root_w == 0] = 1.0
    lo, hi, idx = a.copy(), b.copy(), np.arange(a.size)

    def panel(lo, hi, idx):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        pts = mid[:, None] + half[:, None] * x[None, :]
        vals = f(pts.ravel(), np.repeat(idx, order)).reshape(pts.shape)
        return half * (vals @ w)

    coarse = panel(lo, hi, idx)
    for _ in range(max_depth):
        if lo.size == 0:
            break
        mid = 0.5 * (lo + hi)
        left = panel(lo, mid, idx)
        right = panel(mid, hi, idx)
        fine = left + right
        err = np.abs(fine - coarse)
        ok = err <= np.maximum(abstol * np.abs(hi - lo) / root_w[idx], reltol * np.abs(fine))
        ok |= hi == lo
        np.add.at(total, idx[ok], fine[ok])
        np.add.at(errs, idx[ok], err[ok])
        bad = ~ok
        lo, mid, hi, idx = lo[bad], mid[bad], hi[bad], idx[bad]
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        coarse = np.concatenate([left[bad], right[bad]])
        idx = np.concatenate([idx, idx])
    if lo.size:
        raise QuadratureError("adaptive quadrature did not converge", (lo[0], hi[0]))
    return total, errs
