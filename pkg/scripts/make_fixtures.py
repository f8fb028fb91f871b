"""Regenerate the bundled benchmark CSV fixtures.

The original clustering benchmark sets cannot be fetched here, so these are
seeded synthetic stand-ins with the same row counts, dimensions and cluster
layouts:

* engytime.csv - 4096 x 2, two overlapping Gaussian clusters
* lsun3d.csv   - 404 x 2, two orthogonal bars, one compact blob, four outliers
* tetra.csv    - 400 x 3, four Gaussian clusters on the vertices of a tetrahedron

Usage: python scripts/make_fixtures.py [outdir]
"""
import sys
from pathlib import Path

import numpy as np


def engytime(rng):
    a = rng.multivariate_normal([0.0, 0.0], [[1.0, 0.3], [0.3, 1.5]], size=2048)
    b = rng.multivariate_normal([3.5, 3.5], [[1.5, -0.4], [-0.4, 1.0]], size=2048)
    return np.vstack([a, b]), ("C1", "C2")


def lsun(rng):
    bar_v = np.column_stack([rng.uniform(0.0, 0.6, 100), rng.uniform(0.0, 4.0, 100)])
    bar_h = np.column_stack([rng.uniform(1.0, 4.0, 100), rng.uniform(0.0, 0.6, 100)])
    blob = rng.normal([2.8, 3.2], 0.3, size=(200, 2))
    outliers = np.array([[5.0, 5.0], [-1.0, 5.0], [5.0, -1.0], [-1.0, -1.0]])
    return np.vstack([bar_v, bar_h, blob, outliers]), ("C1", "C2")


def tetra(rng):
    vertices = np.array([[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]])
    y = np.vstack([rng.normal(v, 0.45, size=(100, 3)) for v in vertices])
    return y, ("C1", "C2", "C3")


def write(path: Path, y: np.ndarray, header):
    lines = [",".join(header)] + [",".join(f"{v:.6f}" for v in row) for row in y]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def main(outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for seed, (name, fn) in enumerate([("engytime", engytime), ("lsun3d", lsun), ("tetra", tetra)]):
        y, header = fn(np.random.default_rng(20240 + seed))
        write(outdir / f"{name}.csv", y, header)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "src" / "jsbbvi" / "data")
