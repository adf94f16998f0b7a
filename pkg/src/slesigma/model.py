"""Covariance specs, correlated Brownian driving paths and exact path transforms.

A driving path is the discretized complex Brownian motion that feeds both the
slit engine and the point tracker.  Increment ``j`` is the complex number
``x_j + i*y_j`` whose real/imaginary parts are jointly Gaussian with covariance
``(horizon / n) * Sigma``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# relative slack used when deciding that c^2 == a*b
_DEGENERATE_RTOL = 1e-12


class SigmaError(ValueError):
    """Raised when (a, b, c) does not describe a positive semidefinite matrix."""


@dataclass(frozen=True)
class CovarianceSpec:
    """The matrix ``Sigma = [[a, c], [c, b]]``.

    Build instances through :func:`validate_sigma`; the constructor does not
    check anything.
    """

    a: float
    b: float
    c: float
    degenerate: bool = False

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.c], [self.c, self.b]])

    @property
    def dual(self) -> "CovarianceSpec":
        """Spec of the dual driver ``(y, -x)``: a and b swapped, c negated."""
        return CovarianceSpec(self.b, self.a, -self.c, self.degenerate)

    @property
    def is_zero(self) -> bool:
        return self.a == 0.0 and self.b == 0.0

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.a, self.b, self.c)


def validate_sigma(a: float, b: float, c: float) -> CovarianceSpec:
    """Check positive semidefiniteness and return a :class:`CovarianceSpec`.

    The degenerate flag is set when ``c**2 == a*b`` up to a relative rounding
    slack of 1e-12, so that ``c = sqrt(a*b)`` computed in floating point is
    recognised.  Values of ``c**2`` exceeding ``a*b`` by no more than that slack
    are accepted as degenerate.
    """
    try:
        a, b, c = float(a), float(b), float(c)
    except (TypeError, ValueError) as exc:
        raise SigmaError(f"sigma entries must be real numbers: {exc}") from None
    for name, val in (("a", a), ("b", b), ("c", c)):
        if not math.isfinite(val):
            raise SigmaError(f"{name} must be finite, got {val}")
    if a < 0:
        raise SigmaError(f"a < 0 (a = {a})")
    if b < 0:
        raise SigmaError(f"b < 0 (b = {b})")
    ab = a * b
    c2 = c * c
    slack = _DEGENERATE_RTOL * max(ab, c2)
    if c2 > ab + slack:
        raise SigmaError(f"c² > ab ({c2!r} > {ab!r})")
    return CovarianceSpec(a, b, c, degenerate=abs(ab - c2) <= slack)


def _rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for sample ``stream`` under master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(stream),)))


def correlated_normals(sigma: CovarianceSpec, g1: np.ndarray, g2: np.ndarray, scale: float = 1.0):
    """Map independent standard normals to a pair with covariance ``scale**2 * Sigma``."""
    a, b, c = sigma.a, sigma.b, sigma.c
    if a > 0:
        x = math.sqrt(a) * scale * g1
        if sigma.degenerate:
            # exact proportionality in the perfectly correlated case
            y = math.copysign(math.sqrt(b / a), c) * x if c != 0 else np.zeros_like(x)
        else:
            y = scale * ((c / math.sqrt(a)) * g1 + math.sqrt(max(b - c * c / a, 0.0)) * g2)
    else:
        x = np.zeros_like(g1)
        y = math.sqrt(b) * scale * g2
    return x, y


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class DrivingPath:
    """Discretized complex driver with stored partial sums.

    ``cumulative[k]`` is the driver after ``k + 1`` increments (0-based), so
    ``cumulative[-1]`` is the value at ``horizon``.
    """

    x: np.ndarray
    y: np.ndarray
    horizon: float
    sigma: CovarianceSpec | None = None
    seed: tuple | None = None
    cumulative: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValueError("x and y must be 1-d arrays of equal length")
        if x.size < 1:
            raise ValueError("a driving path needs n >= 1 increments")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "cumulative", _frozen(np.cumsum(x + 1j * y)))

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def dt(self) -> float:
        """Capacity time of one full complex increment."""
        return self.horizon / self.n

    @property
    def increments(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def driver_at(self, k: int) -> complex:
        """Driver value after ``k`` increments (``k = 0`` is the origin)."""
        return 0j if k == 0 else complex(self.cumulative[k - 1])

    def segment(self, start: int, stop: int) -> "DrivingPath":
        """Sub-path made of increments ``start:stop`` (time shifted to 0)."""
        if not 0 <= start < stop <= self.n:
            raise ValueError(f"bad segment [{start}, {stop}) for n = {self.n}")
        return DrivingPath(self.x[start:stop], self.y[start:stop],
                           self.dt * (stop - start), self.sigma, self.seed)

    def meta(self) -> dict:
        return {
            "n": self.n,
            "horizon": self.horizon,
            "seed": None if self.seed is None else list(self.seed),
            "sigma": None if self.sigma is None else list(self.sigma.as_tuple()),
        }


def zero_path(n: int, horizon: float) -> DrivingPath:
    """Path with all increments equal to zero."""
    return DrivingPath(np.zeros(n), np.zeros(n), horizon, validate_sigma(0, 0, 0))


def sample_driving_path(sigma: CovarianceSpec, n: int, horizon: float, seed: int,
                        stream: int = 0) -> DrivingPath:
    """Draw ``n`` i.i.d. increments with covariance ``(horizon / n) * Sigma``.

    ``(seed, stream)`` identifies an independent random stream, so sample ``k``
    of a Monte-Carlo batch is the same whatever the batch is split into.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    n = int(n)
    g = _rng(seed, stream).standard_normal((2, n))
    x, y = correlated_normals(sigma, g[0], g[1], math.sqrt(horizon / n))
    return DrivingPath(x, y, horizon, sigma, (int(seed), int(stream)))


def transform_path(path: DrivingPath, op: str, r: float | None = None) -> DrivingPath:
    """Apply one of ``conjugate``, ``negate``, ``scale`` (needs ``r``) or ``dual``.

    ``dual`` maps ``(x_j, y_j)`` to ``(y_{n-j+1}, -x_{n-j+1})``.  It is a quarter
    turn combined with time reversal, so applying it twice gives ``negate``.
    """
    sig = path.sigma
    if op == "conjugate":
        x, y, horizon = path.x, -path.y, path.horizon
        if sig is not None:
            sig = CovarianceSpec(sig.a, sig.b, -sig.c, sig.degenerate)
    elif op == "negate":
        x, y, horizon = -path.x, -path.y, path.horizon
    elif op == "scale":
        if r is None or not r > 0:
            raise ValueError(f"scale needs r > 0, got {r}")
        x, y, horizon = r * path.x, r * path.y, r * r * path.horizon
    elif op == "dual":
        x, y, horizon = path.y[::-1], -path.x[::-1], path.horizon
        if sig is not None:
            sig = sig.dual
    else:
        raise ValueError(f"unknown path transform {op!r}")
    return DrivingPath(x, y, horizon, sig, path.seed)


# ---------------------------------------------------------------- serialization

CSV_COLUMNS = ("j", "x", "y", "cum_re", "cum_im")


def path_to_csv(path: DrivingPath, dest, header: str | None = None) -> None:
    """Write ``j, x, y, cum_re, cum_im`` rows (``j`` starts at 1)."""
    with open(dest, "w", encoding="utf-8") as fh:
        if header:
            fh.write(header)
        fh.write(",".join(CSV_COLUMNS) + "\n")
        cum = path.cumulative
        for j in range(path.n):
            row = (float(path.x[j]), float(path.y[j]), float(cum[j].real), float(cum[j].imag))
            fh.write(f"{j + 1}," + ",".join(repr(v) for v in row) + "\n")


def path_from_csv(src, horizon: float, sigma: CovarianceSpec | None = None) -> DrivingPath:
    data = np.loadtxt(src, delimiter=",", comments="#", skiprows=_header_rows(src) + 1, ndmin=2)
    return DrivingPath(data[:, 1], data[:, 2], horizon, sigma)


def _header_rows(src) -> int:
    count = 0
    with open(src, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            count += 1
    return count


def path_to_binary(path: DrivingPath, dest) -> None:
    """Dump increments as little-endian float64 ``(x, y)`` pairs."""
    pairs = np.empty(2 * path.n, dtype="<f8")
    pairs[0::2] = path.x
    pairs[1::2] = path.y
    Path(dest).write_bytes(pairs.tobytes())


def path_from_binary(src, horizon: float, sigma: CovarianceSpec | None = None) -> DrivingPath:
    raw = Path(src).read_bytes()
    if len(raw) % struct.calcsize("<dd"):
        raise ValueError("binary path dump must hold whole (x, y) float64 pairs")
    pairs = np.frombuffer(raw, dtype="<f8")
    return DrivingPath(pairs[0::2].copy(), pairs[1::2].copy(), horizon, sigma)
