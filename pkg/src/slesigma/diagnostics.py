"""Monte-Carlo checks of drift identities, angular stationarity, duality and
disconnection.

Every batch is split into fixed-size blocks.  Block ``k`` draws from the
stream ``(seed, k)``, so results do not depend on how many workers run.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage, stats
from scipy.spatial import cKDTree

from .model import (CovarianceSpec, SigmaError, _rng, sample_driving_path, validate_sigma,
                    zero_path)
from .phases import phase_integrals
from .point_tracker import polar_evolve
from .slit_engine import HullPointCloud, left_hull_cloud, right_hull_cloud
from .stationary import DEFAULT_GRID, StationaryDensity, stationary_density

BLOCK = 500


def _require_noise(sigma: CovarianceSpec):
    if sigma.a == 0 and sigma.b == 0:
        raise SigmaError("a = b = c = 0 has no randomness")


def _blocks(N):
    return [(k, min(BLOCK, N - k * BLOCK)) for k in range(math.ceil(N / BLOCK))]


def _polar_block(args):
    sigma, dens, size, t_end, h, seed, k, checkpoints, init = args
    rng = _rng(seed, k)
    if init == "uniform":
        theta0 = rng.random(size) * math.pi
    else:
        theta0 = dens.sample(size, rng)
    tr = polar_evolve(sigma, theta0, t_end, h, seed, k, checkpoints=checkpoints,
                      keep_increments=False, noise=rng)
    return tr.times, tr.theta, tr.logmod, tr.logderiv


def polar_batch(sigma, N, t_end, h, seed, checkpoints=None, dens=None, init="stationary",
                workers=1):
    """Run ``N`` polar trajectories started from ``p`` (or uniformly).

    Returns ``(times, theta, logmod, logderiv)`` with one column per path.
    """
    _require_noise(sigma)
    if N < 2:
        raise ValueError("N must be at least 2")
    if dens is None and init != "uniform":
        dens = stationary_density(sigma)
    if checkpoints is None:
        checkpoints = [t_end]
    jobs = [(sigma, dens, size, t_end, h, seed, k, list(checkpoints), init)
            for k, size in _blocks(N)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_polar_block, jobs))
    else:
        parts = [_polar_block(j) for j in jobs]
    times = parts[0][0]
    return (times,) + tuple(np.concatenate([p[i] for p in parts], axis=1) for i in (1, 2, 3))


@dataclass
class DriftReport:
    mean: float
    stderr: float
    reference: float
    N: int
    seed: int
    h: float
    t_end: float
    z: float = field(init=False)

    def __post_init__(self):
        self.z = abs(self.mean - self.reference) / self.stderr if self.stderr > 0 else math.inf

    def passed(self, nsigma: float = 3.0) -> bool:
        return abs(self.mean - self.reference) <= nsigma * self.stderr

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed()
        return d


def _mean_stderr(x):
    x = np.asarray(x, dtype=np.float64)
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size))


def drift_logmod(sigma: CovarianceSpec, N: int, t_end: float, h: float, seed: int,
                 workers: int = 1, grid: int = DEFAULT_GRID) -> DriftReport:
    """Mean of ``log|f|(t_end) / t_end`` against the phase integral I."""
    pi = phase_integrals(sigma, grid)
    _, _, lm, _ = polar_batch(sigma, N, t_end, h, seed, dens=pi.density, workers=workers)
    m, se = _mean_stderr(lm[-1] / t_end)
    return DriftReport(m, se, pi.I, N, seed, h, t_end)


def drift_logderiv(sigma: CovarianceSpec, N: int, t_end: float, h: float, seed: int,
                   workers: int = 1, grid: int = DEFAULT_GRID) -> DriftReport:
    """Mean of ``(log|f'| - log|f|)(t_end) / t_end`` against ``-II``.

    With the same seed this reuses the noise of :func:`drift_logmod`.
    """
    pi = phase_integrals(sigma, grid)
    _, _, lm, ld = polar_batch(sigma, N, t_end, h, seed, dens=pi.density, workers=workers)
    m, se = _mean_stderr((ld[-1] - lm[-1]) / t_end)
    return DriftReport(m, se, -pi.II, N, seed, h, t_end)


@dataclass
class StationarityReport:
    checkpoints: list
    ks: list
    critical: float
    slack: float
    N: int
    seed: int
    h: float

    def passed(self) -> bool:
        return all(d <= self.critical + self.slack for d in self.ks)

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed()
        return d


def ks_distance(samples, dens: StationaryDensity) -> float:
    """Two-sided KS distance of ``samples mod pi`` against the law of p on ``[0, pi]``."""
    u, cdf = dens.cdf_half()
    x = np.sort(np.mod(samples, math.pi))
    n = x.size
    F = np.interp(x, u, cdf)
    return float(max(np.max(np.arange(1, n + 1) / n - F), np.max(F - np.arange(n) / n)))


def stationarity_test(sigma: CovarianceSpec, N: int, checkpoints=(1.0, 2.0), h: float = 1e-3,
                      seed: int = 0, alpha: float = 0.01, slack_factor: float = 0.5,
                      init: str = "stationary", workers: int = 1,
                      grid: int = DEFAULT_GRID) -> StationarityReport:
    """KS distances of the angle at each checkpoint against ``p``.

    The pass threshold is the exact one-sample critical value at level
    ``alpha`` plus a slack ``slack_factor * sqrt(h)`` for the Euler bias.
    """
    dens = stationary_density(sigma, grid)
    t_end = max(checkpoints)
    times, theta, _, _ = polar_batch(sigma, N, t_end, h, seed, checkpoints=checkpoints,
                                     dens=dens, init=init, workers=workers)
    ks = [ks_distance(theta[i], dens) for i in range(times.size)]
    crit = float(stats.kstwo.ppf(1.0 - alpha, N))
    return StationarityReport([float(t) for t in times], ks, crit, slack_factor * math.sqrt(h),
                              N, seed, h)


# --------------------------------------------------------------------- duality

def cloud_statistic(points: np.ndarray, statistic: str) -> float:
    if statistic == "max_modulus":
        return float(np.max(np.abs(points)))
    if statistic == "real_extent":
        return float(np.ptp(points.real))
    if statistic == "imag_extent":
        return float(np.ptp(points.imag))
    raise ValueError(f"unknown statistic {statistic!r}")


def _hull_stat(args):
    sigma, n, horizon, eps, seed, k, side, statistic, factor = args
    path = sample_driving_path(sigma, n, horizon, seed, k)
    cloud = right_hull_cloud(path, eps) if side == "right" else left_hull_cloud(path, eps)
    return cloud_statistic(cloud.points * factor, statistic)


@dataclass
class DualityReport:
    statistic: str
    pvalue: float
    ks: float
    N_hulls: int
    n_steps: int
    seed: int
    attempts: list
    alpha: float = 1e-3

    def passed(self) -> bool:
        return self.pvalue > self.alpha

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed()
        return d


def duality_samples(sigma, N_hulls, n_steps, epsilon, statistic, seed, horizon=2.0,
                    workers=1):
    """Statistic of right hulls for ``sigma`` and of ``-i`` times left hulls for the dual spec.

    The dual spec swaps ``a`` and ``b``.  Right hulls use streams ``0..N-1``
    and left hulls ``N..2N-1`` of ``seed``.
    """
    tilde = validate_sigma(sigma.b, sigma.a, sigma.c)
    jobs = [(sigma, n_steps, horizon, epsilon, seed, k, "right", statistic, 1.0)
            for k in range(N_hulls)]
    jobs += [(tilde, n_steps, horizon, epsilon, seed, N_hulls + k, "left", statistic, -1j)
             for k in range(N_hulls)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            vals = list(ex.map(_hull_stat, jobs))
    else:
        vals = [_hull_stat(j) for j in jobs]
    return np.array(vals[:N_hulls]), np.array(vals[N_hulls:])


def duality_test(sigma: CovarianceSpec, N_hulls: int = 200, n_steps: int = 2000,
                 epsilon: float = 0.02, statistic: str = "max_modulus", seed: int = 0,
                 horizon: float = 2.0, alpha: float = 1e-3, retries: int = 1,
                 workers: int = 1) -> DualityReport:
    """Two-sample KS test of a hull statistic; one fresh-seed retry on failure."""
    attempts = []
    cur = seed
    for attempt in range(retries + 1):
        right, left = duality_samples(sigma, N_hulls, n_steps, epsilon, statistic, cur,
                                      horizon, workers)
        res = stats.ks_2samp(right, left)
        attempts.append({"seed": cur, "pvalue": float(res.pvalue), "ks": float(res.statistic)})
        if res.pvalue > alpha or attempt == retries:
            break
        cur = cur + 1_000_003
    last = attempts[-1]
    return DualityReport(statistic, last["pvalue"], last["ks"], N_hulls, n_steps, seed,
                         attempts, alpha)


# ------------------------------------------------------------------ disconnection

@dataclass
class EnclosureReport:
    n_enclosed_cells: int
    enclosed_area: float
    n_components: int
    component_sizes: list
    cell: float
    dilation: float
    nn_spacing: float
    bbox: tuple
    mask: np.ndarray | None = field(default=None, repr=False)

    @property
    def found(self) -> bool:
        return self.n_enclosed_cells > 0

    def to_dict(self):
        d = asdict(self)
        d.pop("mask")
        d["found"] = self.found
        return d


# calibrated on (1,1,0) hulls at n = 25000, eps = 0.02 against the zero-driving control
PROBE_CELL = 0.005
PROBE_DILATION = 0.01


def typical_spacing(points: np.ndarray) -> float:
    """Median nearest-neighbour distance among distinct points."""
    xy = np.unique(np.column_stack([points.real, points.imag]), axis=0)
    if xy.shape[0] < 2:
        return 0.0
    d, _ = cKDTree(xy).query(xy, k=2)
    return float(np.median(d[:, 1]))


def disconnection_probe(cloud, cell: float = PROBE_CELL, dilation: float = PROBE_DILATION,
                        min_component_cells: int = 1, check_spacing: bool = True) -> EnclosureReport:
    """Find grid cells cut off from infinity by the dilated cloud.

    The cloud (a :class:`HullPointCloud` or complex array) is thickened by
    ``dilation`` on a grid of square cells covering its bounding box padded by
    10%.  Uncovered cells whose connected component does not reach the grid
    border are reported as enclosed; components smaller than
    ``min_component_cells`` are ignored.
    """
    pts = cloud.points if isinstance(cloud, HullPointCloud) else np.asarray(cloud)
    pts = pts[np.isfinite(pts)]
    if pts.size == 0:
        raise ValueError("empty cloud")
    if not (cell > 0 and dilation > 0):
        raise ValueError("cell and dilation must be positive")
    spacing = typical_spacing(pts)
    if check_spacing and dilation < 2.0 * spacing:
        raise ValueError(f"dilation {dilation} below twice the typical spacing {spacing:.3g}")
    x0, x1 = pts.real.min(), pts.real.max()
    y0, y1 = pts.imag.min(), pts.imag.max()
    pad = 0.1 * max(x1 - x0, y1 - y0, dilation) + dilation
    x0, x1, y0, y1 = x0 - pad, x1 + pad, y0 - pad, y1 + pad
    nx = int(math.ceil((x1 - x0) / cell))
    ny = int(math.ceil((y1 - y0) / cell))
    cx = x0 + cell * (np.arange(nx) + 0.5)
    cy = y0 + cell * (np.arange(ny) + 0.5)
    tree = cKDTree(np.column_stack([pts.real, pts.imag]))
    gx, gy = np.meshgrid(cx, cy)
    centres = np.column_stack([gx.ravel(), gy.ravel()])
    # a cell is covered when some point lies within the dilation of its centre
    d, _ = tree.query(centres, k=1, distance_upper_bound=dilation)
    covered = np.isfinite(d).reshape(ny, nx)
    free = ~covered
    labels, count = ndimage.label(free)
    border = np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]]))
    sizes = ndimage.sum_labels(free, labels, index=np.arange(1, count + 1)).astype(int)
    enclosed_ids = [i + 1 for i in range(count)
                    if (i + 1) not in border and sizes[i] >= min_component_cells]
    mask = np.isin(labels, enclosed_ids)
    comp = sorted((int(sizes[i - 1]) for i in enclosed_ids), reverse=True)
    return EnclosureReport(int(mask.sum()), float(mask.sum() * cell * cell), len(enclosed_ids),
                           comp, cell, dilation, spacing, (x0, x1, y0, y1), mask)


@dataclass
class DisconnectionSurvey:
    seeds: list
    found: list
    n_components: list
    control_cells: int
    fraction: float
    threshold: float = 0.5

    def passed(self) -> bool:
        return self.fraction >= self.threshold and self.control_cells == 0

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed()
        return d


def _probe_seed(args):
    sigma, n, horizon, eps, seed, cell, dilation, mcc = args
    cloud = left_hull_cloud(sample_driving_path(sigma, n, horizon, seed), eps)
    rep = disconnection_probe(cloud, cell, dilation, mcc)
    return rep.found, rep.n_components


def disconnection_survey(sigma: CovarianceSpec, seeds, n: int = 25_000, epsilon: float = 0.02,
                         horizon: float = 2.0, cell: float = PROBE_CELL,
                         dilation: float = PROBE_DILATION, min_component_cells: int = 1,
                         threshold: float = 0.5, workers: int = 1) -> DisconnectionSurvey:
    """Run the probe on one left hull per seed plus the zero-driving control."""
    seeds = [int(s) for s in seeds]
    jobs = [(sigma, n, horizon, epsilon, s, cell, dilation, min_component_cells) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            res = list(ex.map(_probe_seed, jobs))
    else:
        res = [_probe_seed(j) for j in jobs]
    control = disconnection_probe(left_hull_cloud(zero_path(n, horizon), epsilon), cell,
                                  dilation, min_component_cells)
    found = [bool(r[0]) for r in res]
    return DisconnectionSurvey(seeds, found, [int(r[1]) for r in res],
                               control.n_enclosed_cells, sum(found) / max(len(found), 1),
                               threshold)
