"""Phase integrals I and II, the four-way sign table and (a, b) parameter scans."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import bisect

from .model import CovarianceSpec, SigmaError, validate_sigma
from .point_tracker import _kappa
from .stationary import DEFAULT_GRID, StationaryDensity, stationary_density

LABELS = ("thin", "swallowing", "hitting", "dense", "boundary_indeterminate")


class PhaseConsistencyError(AssertionError):
    """Numerical and exact c = 0 classifications disagree outside the tolerance band."""


@dataclass
class PhaseIntegrals:
    I: float
    II: float
    err_I: float
    err_II: float
    density: StationaryDensity | None = field(default=None, repr=False)


def _folded_moments(u, p):
    """Trapezoid sums of cos 2u p and sin 2u p over ``[0, 2 pi]``.

    Nodes ``i`` and ``M - i`` are folded together so that reflecting ``p``
    leaves the cosine moment unchanged and flips the sine moment exactly.
    """
    M = u.size - 1
    h = u[1] - u[0]
    half = M // 2
    i = np.arange(half)
    w = np.ones(half)
    w[0] = 0.5
    plus = w * (p[i] + p[M - i])
    minus = w * (p[i] - p[M - i])
    C = h * (np.sum(plus * np.cos(2.0 * u[i])) + p[half] * math.cos(2.0 * u[half]))
    # sin(2u) vanishes at u = pi; the middle node is left out
    S = h * np.sum(minus * np.sin(2.0 * u[i]))
    return C, S


def _moments(dens: StationaryDensity):
    """Moments with a step-doubling error estimate."""
    u, p = dens.grid, dens.values
    C, S = _folded_moments(u, p)
    if (u.size - 1) % 4 == 0:
        C2, S2 = _folded_moments(u[::2], p[::2])
    else:
        C2, S2 = _trapz(np.cos(2 * u[::2]) * p[::2], u[::2]), _trapz(np.sin(2 * u[::2]) * p[::2], u[::2])
    return (C, abs(C - C2)), (S, abs(S - S2))


def phase_integrals(sigma: CovarianceSpec, grid: int = DEFAULT_GRID) -> PhaseIntegrals:
    """``I = int nu p`` and ``II = int (nu + 2 cos 2u) p`` over ``[0, 2 pi]``.

    Both are assembled from the two moments of ``p`` so that a vanishing
    prefactor gives an exact zero.
    """
    if sigma.a + sigma.b <= 0:
        raise SigmaError("a + b > 0 is required for the phase integrals")
    dens = stationary_density(sigma, grid)
    (C, eC), (S, eS) = _moments(dens)
    k = _kappa(sigma)
    c = sigma.c
    I = k * C - c * S
    II = (k + 2.0) * C - c * S
    err_I = abs(k) * eC + abs(c) * eS
    err_II = abs(k + 2.0) * eC + abs(c) * eS
    return PhaseIntegrals(float(I), float(II), float(err_I), float(err_II), dens)


def c0_rule(a: float, b: float) -> str:
    """Exact classification for independent real and imaginary parts."""
    d = a - b
    if d <= 4:
        return "thin"
    if d < 8:
        return "swallowing"
    return "hitting"


def sign_table(I: float, II: float, c: float, tol_I: float, tol_II: float) -> str:
    """Map (I, II) to a label; values within tolerance count as zero."""
    I_nonneg = I >= 0 or abs(I) < tol_I
    if abs(II) < tol_II:
        if c == 0:
            return "hitting"
        return "boundary_indeterminate"
    if II > 0:
        return "thin" if I_nonneg else "swallowing"
    return "dense" if I_nonneg else "hitting"


@dataclass
class PhaseReport:
    a: float
    b: float
    c: float
    I: float | None
    II: float | None
    label: str
    boundary_flags: dict
    c0_exact: str | None = None
    tol_zero: float | None = None
    quad_error: tuple | None = None
    note: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def default_tol(err: float) -> float:
    return max(10.0 * err, 1e-9)


def classify(sigma: CovarianceSpec, tol_zero: float | None = None,
             grid: int = DEFAULT_GRID) -> PhaseReport:
    """Classify ``sigma`` with the sign table of the two phase integrals.

    When ``c = 0`` the exact ``a - b`` rule is reported alongside.  If the two
    disagree only because a value sits inside the zero band, the exact rule
    wins; any other disagreement raises :class:`PhaseConsistencyError`.
    """
    a, b, c = sigma.as_tuple()
    if a == 0 or b == 0:
        # driver on one axis (c is then 0): classical case, no angular density
        label = c0_rule(a, b)
        return PhaseReport(a, b, c, None, None, label, {"I": False, "II": False}, label,
                           note="a = 0 or b = 0: classified by the exact c = 0 rule")
    pi = phase_integrals(sigma, grid)
    tol_I = default_tol(pi.err_I) if tol_zero is None else tol_zero
    tol_II = default_tol(pi.err_II) if tol_zero is None else tol_zero
    flags = {"I": abs(pi.I) < tol_I, "II": abs(pi.II) < tol_II}
    label = sign_table(pi.I, pi.II, c, tol_I, tol_II)
    exact = None
    note = None
    if c == 0:
        exact = c0_rule(a, b)
        if exact != label:
            if flags["I"] or flags["II"]:
                note = f"numerical label {label!r} inside the zero band; exact rule used"
                label = exact
            else:
                raise PhaseConsistencyError(
                    f"sign table gives {label!r} but a - b rule gives {exact!r} for {sigma}")
    return PhaseReport(a, b, c, pi.I, pi.II, label, flags, exact, max(tol_I, tol_II),
                       (pi.err_I, pi.err_II), note)


# ------------------------------------------------------------------ scans

@dataclass
class PhaseScan:
    a_values: np.ndarray
    b_values: np.ndarray
    c: float
    labels: np.ndarray          # shape (len(b), len(a)); "invalid" where c^2 > ab
    I: np.ndarray
    II: np.ndarray
    boundaries: dict            # "I=0" / "II=0" -> list of (a, b)

    def rows(self):
        for j, b in enumerate(self.b_values):
            for i, a in enumerate(self.a_values):
                yield a, b, self.c, self.labels[j, i], self.I[j, i], self.II[j, i]


def _axis(rng, res):
    lo, hi = float(rng[0]), float(rng[1])
    if hi < lo:
        raise ValueError(f"empty range {rng}")
    n = int(math.floor((hi - lo) / res + 1e-9))
    return lo + res * np.arange(n + 1)


def _cell(args):
    a, b, c, grid = args
    try:
        sigma = validate_sigma(a, b, c)
    except SigmaError:
        return "invalid", math.nan, math.nan
    rep = classify(sigma, grid=grid)
    return (rep.label,
            math.nan if rep.I is None else rep.I,
            math.nan if rep.II is None else rep.II)


def _integral_along_a(which, b, c, grid):
    def f(a):
        pi = phase_integrals(validate_sigma(a, b, c), grid)
        return pi.I if which == "I" else pi.II
    return f


def phase_scan(a_range, b_range, c: float = 0.0, resolution: float = 0.25,
               grid: int = DEFAULT_GRID, xtol: float = 1e-6, workers: int = 1) -> PhaseScan:
    """Classify every grid cell and locate I = 0 and II = 0 along each ``b`` row.

    Roots are bracketed by sign changes between neighbouring valid cells with
    ``a, b > 0`` and refined by bisection to ``xtol``.  Cell order, and hence
    output, does not depend on ``workers``.
    """
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    A = _axis(a_range, resolution)
    B = _axis(b_range, resolution)
    jobs = [(a, b, c, grid) for b in B for a in A]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            cells = list(ex.map(_cell, jobs, chunksize=16))
    else:
        cells = [_cell(j) for j in jobs]
    shape = (B.size, A.size)
    labels = np.array([x[0] for x in cells], dtype=object).reshape(shape)
    I = np.array([x[1] for x in cells]).reshape(shape)
    II = np.array([x[2] for x in cells]).reshape(shape)
    boundaries = {"I=0": [], "II=0": []}
    for name, vals in (("I=0", I), ("II=0", II)):
        which = name.split("=")[0]
        for j, b in enumerate(B):
            f = None
            for i in range(A.size - 1):
                lo, hi = vals[j, i], vals[j, i + 1]
                if not (np.isfinite(lo) and np.isfinite(hi)):
                    continue
                if lo == 0:
                    boundaries[name].append((float(A[i]), float(b)))
                    continue
                if lo * hi < 0:
                    f = f or _integral_along_a(which, b, c, grid)
                    root = bisect(f, A[i], A[i + 1], xtol=xtol)
                    boundaries[name].append((float(root), float(b)))
            if np.isfinite(vals[j, -1]) and vals[j, -1] == 0:
                boundaries[name].append((float(A[-1]), float(b)))
    return PhaseScan(A, B, float(c), labels, I, II, boundaries)


def find_root_a(which: str, b: float, c: float, a_lo: float, a_hi: float,
                xtol: float = 1e-6, grid: int = DEFAULT_GRID) -> float:
    """Bisection for the ``a`` where integral ``which`` ("I" or "II") vanishes."""
    return float(bisect(_integral_along_a(which, b, c, grid), a_lo, a_hi, xtol=xtol))
