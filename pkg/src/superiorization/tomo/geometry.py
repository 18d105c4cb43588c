"""Parallel-beam scan geometry and exact ray/pixel intersection lengths."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class ScanGeometry:
    """Parallel projections at ``views`` angles ``0, inc, 2*inc, ...`` degrees.

    Ray ``r`` of a view lies at signed distance
    ``(r - (rays_per_view - 1)/2) * ray_spacing`` from the origin, along the
    view's normal ``(cos t, sin t)``, and runs in direction ``(-sin t, cos t)``.
    Each detector is ``ray_spacing`` wide and sampled by ``detector_subrays``
    parallel sub-rays.
    """

    views: int
    angular_increment: float
    rays_per_view: int
    ray_spacing: float
    detector_subrays: int = 11

    def __post_init__(self):
        if self.views < 1 or self.rays_per_view < 1 or self.detector_subrays < 1:
            raise ValueError("views, rays_per_view and detector_subrays must be positive")
        if self.ray_spacing <= 0:
            raise ValueError("ray_spacing must be positive")

    @property
    def total_rays(self) -> int:
        return self.views * self.rays_per_view

    def angle(self, view: int) -> float:
        return math.radians(view * self.angular_increment)

    def direction(self, view: int) -> np.ndarray:
        t = self.angle(view)
        return np.array([-math.sin(t), math.cos(t)])

    def normal(self, view: int) -> np.ndarray:
        t = self.angle(view)
        return np.array([math.cos(t), math.sin(t)])

    def offsets(self, subrays: bool = False) -> np.ndarray:
        """Signed ray offsets, shape ``(rays,)`` or ``(rays, detector_subrays)``."""
        centre = (np.arange(self.rays_per_view) - (self.rays_per_view - 1) / 2.0) * self.ray_spacing
        if not subrays:
            return centre
        m = self.detector_subrays
        frac = ((np.arange(m) + 0.5) / m - 0.5) * self.ray_spacing
        return centre[:, None] + frac[None, :]

    def origins(self, view: int, offsets=None) -> np.ndarray:
        if offsets is None:
            offsets = self.offsets()
        offsets = np.asarray(offsets, dtype=np.float64)
        return offsets.reshape(-1, 1) * self.normal(view)[None, :]


@dataclass(frozen=True)
class ImageGrid:
    side: int
    pixel_size: float

    @property
    def extent(self) -> float:
        return self.side * self.pixel_size

    @property
    def dimension(self) -> int:
        return self.side * self.side


def _cell(coord: np.ndarray, side: int) -> np.ndarray:
    # ceil(u) - 1 equals floor(u) except on a grid line, where it picks the lower index
    return np.clip(np.ceil(coord).astype(np.int64) - 1, 0, side - 1)


def trace_line(grid: ImageGrid, origin, direction) -> tuple[np.ndarray, np.ndarray]:
    """Pixels crossed by the line ``origin + t*direction`` and the lengths inside each.

    ``direction`` must be a unit vector.  Pixel ``j = row*side + col`` with
    row 0 at the top.  The crossing parameters with every grid line are
    merged and sorted; each interval between consecutive crossings lies in
    one pixel, found from its midpoint.  A line running exactly along a
    pixel boundary is assigned to the lower-index pixel.
    """
    ox, oy = float(origin[0]), float(origin[1])
    ux, uy = float(direction[0]), float(direction[1])
    half = grid.extent / 2.0
    t_lo, t_hi = -math.inf, math.inf
    for o, u in ((ox, ux), (oy, uy)):
        if u == 0.0:
            if o < -half or o > half:
                return np.empty(0, np.int64), np.empty(0)
            continue
        t1, t2 = (-half - o) / u, (half - o) / u
        t_lo, t_hi = max(t_lo, min(t1, t2)), min(t_hi, max(t1, t2))
    if not t_hi > t_lo:
        return np.empty(0, np.int64), np.empty(0)
    planes = -half + np.arange(grid.side + 1) * grid.pixel_size
    ts = [np.array([t_lo, t_hi])]
    if ux != 0.0:
        ts.append((planes - ox) / ux)
    if uy != 0.0:
        ts.append((planes - oy) / uy)
    t = np.concatenate(ts)
    t = np.unique(t[(t >= t_lo) & (t <= t_hi)])
    lengths = np.diff(t)
    keep = lengths > 1e-12 * grid.pixel_size
    mid = 0.5 * (t[:-1] + t[1:])[keep]
    lengths = lengths[keep]
    col = _cell((ox + mid * ux + half) / grid.pixel_size, grid.side)
    row = _cell((half - (oy + mid * uy)) / grid.pixel_size, grid.side)
    idx = row * grid.side + col
    # a line through a corner may split one pixel's chord at a duplicate crossing
    order = np.argsort(idx, kind="stable")
    idx, lengths = idx[order], lengths[order]
    uniq, start = np.unique(idx, return_index=True)
    return uniq, np.add.reduceat(lengths, start) if len(uniq) else lengths


def system_row(geometry: ScanGeometry, grid: ImageGrid, ray: int) -> sp.csr_matrix:
    """Row ``a^i`` (as a 1 x J sparse matrix) for global ray index ``ray = view*rays + r``."""
    view, r = divmod(ray, geometry.rays_per_view)
    if not 0 <= view < geometry.views:
        raise IndexError(f"ray index {ray} out of range")
    origin = geometry.origins(view, [geometry.offsets()[r]])[0]
    idx, vals = trace_line(grid, origin, geometry.direction(view))
    return sp.csr_matrix((vals, idx, [0, len(idx)]), shape=(1, grid.dimension))


def view_matrix(geometry: ScanGeometry, grid: ImageGrid, view: int) -> sp.csr_matrix:
    """All rows of one view, in ray order, as a ``rays_per_view x J`` CSR matrix."""
    direction = geometry.direction(view)
    indptr, indices, data = [0], [], []
    for origin in geometry.origins(view):
        idx, vals = trace_line(grid, origin, direction)
        indices.append(idx)
        data.append(vals)
        indptr.append(indptr[-1] + len(idx))
    return sp.csr_matrix((np.concatenate(data), np.concatenate(indices), indptr),
                         shape=(geometry.rays_per_view, grid.dimension))
