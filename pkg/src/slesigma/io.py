"""File formats: config headers, hull clouds (CSV/SVG), scan grids and JSON reports."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

HEADER_PREFIX = "# slesigma "
CLOUD_COLUMNS = ("re", "im", "t_added", "probe")
GRID_COLUMNS = ("a", "b", "c", "label", "I", "II")
BOUNDARY_COLUMNS = ("boundary", "a", "b")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def make_header(command: str, config: dict) -> str:
    """Two comment lines: the command and the resolved config as JSON."""
    return f"{HEADER_PREFIX}{command}\n# config = {json.dumps(_jsonable(config), sort_keys=True)}\n"


def read_header(path) -> dict:
    """Config dict stored by :func:`make_header` at the top of ``path``."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            if line.startswith("# config = "):
                return json.loads(line[len("# config = "):])
    raise ValueError(f"no config header in {path}")


def write_cloud_csv(cloud, dest, header: str = "") -> None:
    data = np.column_stack([cloud.points.real, cloud.points.imag, cloud.t_added,
                            cloud.probe.astype(np.float64)])
    with open(dest, "w", encoding="utf-8") as fh:
        fh.write(header)
        fh.write(",".join(CLOUD_COLUMNS) + "\n")
        np.savetxt(fh, data, delimiter=",", fmt=["%.17g", "%.17g", "%.17g", "%d"])


def read_cloud_csv(src):
    data = np.loadtxt(src, delimiter=",", comments="#", skiprows=_skip(src), ndmin=2)
    return data[:, 0] + 1j * data[:, 1], data[:, 2], data[:, 3].astype(int)


def _skip(src):
    n = 0
    with open(src, encoding="utf-8") as fh:
        for line in fh:
            n += 1
            if not line.startswith("#"):
                return n
    return n


def write_cloud_svg(clouds, dest, title: str = "") -> None:
    """Scatter plot coloured by the time each point was added (viridis)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 6))
    for cloud in clouds:
        ax.scatter(cloud.points.real, cloud.points.imag, c=cloud.t_added, s=0.2,
                   cmap="viridis", linewidths=0, rasterized=False)
    ax.axhline(0, color="0.7", lw=0.5)
    ax.axvline(0, color="0.7", lw=0.5)
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.savefig(dest, format="svg")
    plt.close(fig)


def write_density_csv(dens, dest, header: str = "") -> None:
    dens.to_csv(dest, header)


def write_scan_csv(scan, dest, header: str = "") -> None:
    with open(dest, "w", encoding="utf-8") as fh:
        fh.write(header)
        fh.write(",".join(GRID_COLUMNS) + "\n")
        for a, b, c, label, I, II in scan.rows():
            fh.write(f"{float(a)!r},{float(b)!r},{float(c)!r},{label},{float(I)!r},{float(II)!r}\n")


def write_boundary_csv(scan, dest, header: str = "") -> None:
    with open(dest, "w", encoding="utf-8") as fh:
        fh.write(header)
        fh.write(",".join(BOUNDARY_COLUMNS) + "\n")
        for name, pts in scan.boundaries.items():
            for a, b in pts:
                fh.write(f"{name},{float(a)!r},{float(b)!r}\n")


def write_json(obj, dest=None, header: dict | None = None) -> str:
    payload = dict(obj)
    if header is not None:
        payload = {"config": header, **payload}
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True)
    if dest is not None:
        Path(dest).write_text(text + "\n", encoding="utf-8")
    return text


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment; values stay strings."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out
