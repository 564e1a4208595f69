"""Point clouds and their ASCII interchange format.

Files start with a header line ``p2s-cloud v1 <n_points> <has_rgb>`` followed
by one point per line: ``x y z`` or ``x y z r g b``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_HEADER_TAG = "p2s-cloud"
_VERSION = "v1"


@dataclass
class PointCloud:
    """3D points in meters with optional RGB colors in [0, 1]."""

    points: np.ndarray  # (n, 3) float
    colors: np.ndarray | None = None  # (n, 3) float in [0, 1], or None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise ValueError(f"points must be (n, 3), got {self.points.shape}")
        if self.colors is not None:
            self.colors = np.asarray(self.colors, dtype=np.float64)
            if self.colors.shape != self.points.shape:
                raise ValueError("colors must match points shape")

    def __len__(self):
        return self.points.shape[0]

    @property
    def has_rgb(self):
        return self.colors is not None


def write_cloud(path, cloud):
    n = len(cloud)
    has_rgb = 1 if cloud.has_rgb else 0
    rows = []
    for i in range(n):
        x, y, z = cloud.points[i]
        if has_rgb:
            r, g, b = cloud.colors[i]
            rows.append(f"{x:.9g} {y:.9g} {z:.9g} {r:.9g} {g:.9g} {b:.9g}")
        else:
            rows.append(f"{x:.9g} {y:.9g} {z:.9g}")
    body = "\n".join(rows)
    text = f"{_HEADER_TAG} {_VERSION} {n} {has_rgb}\n{body}"
    if n:
        text += "\n"
    with open(path, "w", encoding="ascii") as f:
        f.write(text)


def read_cloud(path):
    """Parse a cloud file, rejecting malformed headers and non-finite values."""
    with open(path, "r", encoding="ascii") as f:
        header = f.readline().split()
        if len(header) != 4 or header[0] != _HEADER_TAG or header[1] != _VERSION:
            raise ValueError(f"{path}: malformed header {' '.join(header)!r}")
        try:
            n = int(header[2])
            has_rgb = int(header[3])
        except ValueError as e:
            raise ValueError(f"{path}: malformed header counts") from e
        if has_rgb not in (0, 1):
            raise ValueError(f"{path}: has_rgb must be 0 or 1, got {has_rgb}")
        width = 6 if has_rgb else 3
        data = np.loadtxt(f, dtype=np.float64, ndmin=2, max_rows=n if n else 1)
    if n == 0:
        return PointCloud(np.zeros((0, 3)), np.zeros((0, 3)) if has_rgb else None)
    if data.shape != (n, width):
        raise ValueError(f"{path}: expected {n} rows of {width} values, got {data.shape}")
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{path}: non-finite coordinate or color values")
    points = data[:, :3]
    colors = data[:, 3:6] if has_rgb else None
    return PointCloud(points, colors)
