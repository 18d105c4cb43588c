"""Projection data simulation, data files, and problem assembly."""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

import numpy as np

from ..linear import Block, BlockLinearProblem
from .geometry import ImageGrid, ScanGeometry, view_matrix
from .phantom import Phantom

log = logging.getLogger(__name__)

DATA_HEADER = "# superiorization projection-data v1"
DEFAULT_PHOTONS = 2_000_000
DEFAULT_SCATTER = 0.05


@dataclass
class NoiseModel:
    """Photon statistics; ``photons_per_ray=None`` means noiseless data."""

    photons_per_ray: int | None = DEFAULT_PHOTONS
    scatter_fraction: float = DEFAULT_SCATTER
    seed: int = 0

    def __post_init__(self):
        if self.photons_per_ray is not None and self.photons_per_ray < 1:
            raise ValueError("photons_per_ray must be positive")
        if not 0 <= self.scatter_fraction < 1:
            raise ValueError("scatter_fraction must lie in [0, 1)")

    @property
    def noiseless(self) -> bool:
        return self.photons_per_ray is None

    @classmethod
    def exact(cls) -> "NoiseModel":
        return cls(None, 0.0, 0)


@dataclass
class ProjectionData:
    """Estimated line integrals, ``values[view, ray]``."""

    geometry: ScanGeometry
    values: np.ndarray
    noise: NoiseModel = field(default_factory=NoiseModel.exact)
    floored_rays: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        shape = (self.geometry.views, self.geometry.rays_per_view)
        if self.values.shape != shape:
            raise ValueError(f"values have shape {self.values.shape}, geometry needs {shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("projection data must be finite")

    def view(self, v: int) -> list[tuple[int, float]]:
        return list(enumerate(self.values[v].tolist()))


def scatter_counts(counts: np.ndarray, fraction: float) -> np.ndarray:
    """Move ``round(fraction * c)`` counts of each detector to its two neighbours.

    Each neighbour receives half (the right one any odd count).  A share
    that would leave the detector array stays with its source, so the
    total per view is conserved exactly.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if fraction == 0 or counts.shape[-1] < 2:
        return counts.copy()
    moved = np.rint(fraction * counts).astype(np.int64)
    left = moved // 2
    right = moved - left
    out = counts - moved
    out[..., :-1] += left[..., 1:]
    out[..., 1:] += right[..., :-1]
    out[..., 0] += left[..., 0]
    out[..., -1] += right[..., -1]
    return out


def simulate_projections(phantom: Phantom, geometry: ScanGeometry,
                         noise: NoiseModel | None = None) -> ProjectionData:
    """Line-integral estimates of ``phantom`` for every ray of ``geometry``.

    Noisy data: each sub-ray receives ``photons/detector_subrays`` photons,
    its transmitted count is Poisson with mean ``(photons/M) exp(-integral)``,
    the counts are summed per detector, scatter is redistributed, and
    ``b = -ln(counts / photons)``.  Noiseless data: ``b`` is the exact
    integral along the central ray.
    """
    if noise is None:
        noise = NoiseModel()
    values = np.zeros((geometry.views, geometry.rays_per_view))
    floored = 0
    if noise.noiseless:
        for v in range(geometry.views):
            values[v] = phantom.line_integrals(geometry.origins(v), geometry.direction(v))
        return ProjectionData(geometry, values, noise)
    photons = noise.photons_per_ray
    m = geometry.detector_subrays
    sub_offsets = geometry.offsets(subrays=True)
    for v in range(geometry.views):
        integrals = phantom.line_integrals(geometry.origins(v, sub_offsets.ravel()),
                                           geometry.direction(v))
        mean = (photons / m) * np.exp(-integrals.reshape(geometry.rays_per_view, m))
        rng = np.random.default_rng([noise.seed, v])
        counts = rng.poisson(mean).sum(axis=1)
        counts = scatter_counts(counts, noise.scatter_fraction)
        zero = counts < 1
        if np.any(zero):
            floored += int(zero.sum())
            log.warning("view %d: %d rays recorded no photons; using a count of 1", v, zero.sum())
            counts = np.maximum(counts, 1)
        values[v] = -np.log(counts / photons)
    return ProjectionData(geometry, values, noise, floored)


def system_matrices(geometry: ScanGeometry, grid: ImageGrid) -> list:
    return [view_matrix(geometry, grid, v) for v in range(geometry.views)]


def assemble_problem(data: ProjectionData, grid: ImageGrid, ordering=None,
                     matrices=None) -> BlockLinearProblem:
    """One block per view, in the order ``ordering``; rays missing the grid are dropped."""
    geometry = data.geometry
    if ordering is None:
        ordering = range(geometry.views)
    ordering = list(ordering)
    if sorted(ordering) != list(range(geometry.views)):
        raise ValueError("ordering must be a permutation of the view indices")
    if matrices is None:
        matrices = system_matrices(geometry, grid)
    blocks = []
    dropped = 0
    for v in ordering:
        A = matrices[v]
        nonzero = np.diff(A.indptr) > 0
        dropped += int((~nonzero).sum())
        if nonzero.any():
            blocks.append(Block(A[nonzero], data.values[v][nonzero]))
    if not blocks:
        raise ValueError("no ray intersects the image grid")
    if dropped:
        log.info("dropped %d rays that miss the image", dropped)
    return BlockLinearProblem(blocks, dropped_rows=dropped)


def save_projection_data(data: ProjectionData, path: str | os.PathLike) -> None:
    """Plain-text data file: ``key value`` header lines, then ``view ray b`` records."""
    g, n = data.geometry, data.noise
    header = {
        "views": g.views,
        "angular_increment": repr(float(g.angular_increment)),
        "rays_per_view": g.rays_per_view,
        "ray_spacing": repr(float(g.ray_spacing)),
        "detector_subrays": g.detector_subrays,
        "photons_per_ray": "noiseless" if n.noiseless else n.photons_per_ray,
        "scatter_fraction": repr(float(n.scatter_fraction)),
        "seed": n.seed,
    }
    with open(path, "w") as fh:
        fh.write(DATA_HEADER + "\n")
        for key, value in header.items():
            fh.write(f"{key} {value}\n")
        fh.write("data\n")
        for v in range(g.views):
            for r, b in enumerate(data.values[v].tolist()):
                fh.write(f"{v} {r} {b!r}\n")


def load_projection_data(path: str | os.PathLike) -> ProjectionData:
    header = {}
    with open(path) as fh:
        lines = iter(fh)
        for line in lines:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line == "data":
                break
            key, _, value = line.partition(" ")
            header[key] = value.strip()
        records = [ln.split() for ln in lines if ln.strip()]
    try:
        geometry = ScanGeometry(int(header["views"]), float(header["angular_increment"]),
                                int(header["rays_per_view"]), float(header["ray_spacing"]),
                                int(header["detector_subrays"]))
        photons = header["photons_per_ray"]
        noise = NoiseModel(None if photons == "noiseless" else int(photons),
                           float(header["scatter_fraction"]), int(header["seed"]))
    except KeyError as exc:
        raise ValueError(f"{path}: missing header field {exc}") from None
    values = np.full((geometry.views, geometry.rays_per_view), np.nan)
    for rec in records:
        values[int(rec[0]), int(rec[1])] = float(rec[2])
    if np.isnan(values).any():
        raise ValueError(f"{path}: missing ray records")
    return ProjectionData(geometry, values, noise)
