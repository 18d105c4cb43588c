"""Geometric phantoms built from additive ellipses and rectangles.

Coordinates are in cm with the origin at the centre of the square
reconstruction region, ``x`` to the right and ``y`` up.  Pixel rows are
numbered from the top.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..criteria import PixelImage

BONE = 0.416
BRAIN = 0.210
CSF = 0.207
TUMOR_CONTRAST = 0.003

# 485 pixels of 0.0376 cm
HEAD_EXTENT = 18.236


def _rotation(angle_deg: float) -> np.ndarray:
    t = np.deg2rad(angle_deg)
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Ellipse:
    center: tuple[float, float]
    semi_axes: tuple[float, float]
    value: float
    angle: float = 0.0

    def _local(self, points: np.ndarray) -> np.ndarray:
        # rotate into the ellipse frame, then scale to the unit circle
        q = (points - np.asarray(self.center)) @ _rotation(self.angle)
        return q / np.asarray(self.semi_axes)

    def contains(self, points: np.ndarray) -> np.ndarray:
        q = self._local(np.atleast_2d(points))
        return (q * q).sum(axis=1) <= 1.0

    def chord(self, origins: np.ndarray, direction: np.ndarray) -> np.ndarray:
        """Length of the intersection of each line ``origin + t*direction`` with the ellipse."""
        q = self._local(np.atleast_2d(origins))
        w = (np.asarray(direction) @ _rotation(self.angle)) / np.asarray(self.semi_axes)
        a = w @ w
        b = 2.0 * (q @ w)
        c = (q * q).sum(axis=1) - 1.0
        disc = b * b - 4.0 * a * c
        return np.where(disc > 0, np.sqrt(np.maximum(disc, 0.0)) / a, 0.0) * np.linalg.norm(direction)


@dataclass(frozen=True)
class Rectangle:
    center: tuple[float, float]
    half_sizes: tuple[float, float]
    value: float
    angle: float = 0.0

    def _local(self, points: np.ndarray) -> np.ndarray:
        return (points - np.asarray(self.center)) @ _rotation(self.angle)

    def contains(self, points: np.ndarray) -> np.ndarray:
        q = self._local(np.atleast_2d(points))
        h = np.asarray(self.half_sizes)
        return np.all(np.abs(q) <= h, axis=1)

    def chord(self, origins: np.ndarray, direction: np.ndarray) -> np.ndarray:
        q = self._local(np.atleast_2d(origins))
        w = np.asarray(direction) @ _rotation(self.angle)
        h = np.asarray(self.half_sizes)
        t_lo = np.full(q.shape[0], -np.inf)
        t_hi = np.full(q.shape[0], np.inf)
        for axis in range(2):
            if w[axis] == 0.0:
                outside = np.abs(q[:, axis]) > h[axis]
                t_hi = np.where(outside, -np.inf, t_hi)
                continue
            t1 = (-h[axis] - q[:, axis]) / w[axis]
            t2 = (h[axis] - q[:, axis]) / w[axis]
            t_lo = np.maximum(t_lo, np.minimum(t1, t2))
            t_hi = np.minimum(t_hi, np.maximum(t1, t2))
        return np.maximum(t_hi - t_lo, 0.0) * np.linalg.norm(direction)


@dataclass
class Phantom:
    """Sum of shape values; a point's value adds every shape containing it."""

    shapes: list = field(default_factory=list)
    extent: float = HEAD_EXTENT
    name: str = "custom"

    def evaluate(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        out = np.zeros(points.shape[0])
        for shape in self.shapes:
            out += shape.value * shape.contains(points)
        return out

    def line_integrals(self, origins, direction) -> np.ndarray:
        """Exact integrals along the lines ``origin + t*direction`` (``direction`` a unit vector)."""
        origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
        direction = np.asarray(direction, dtype=np.float64)
        out = np.zeros(origins.shape[0])
        for shape in self.shapes:
            out += shape.value * shape.chord(origins, direction)
        return out


def head_phantom(extent: float = HEAD_EXTENT) -> Phantom:
    """A desk-scale head: bone ring, brain, two ventricles and low-contrast tumors."""
    shapes = [
        Ellipse((0.0, 0.0), (6.9, 8.6), BONE),
        Ellipse((0.0, 0.0), (6.4, 8.1), BRAIN - BONE),
        Ellipse((-1.0, 1.2), (0.55, 1.8), CSF - BRAIN, angle=-18.0),
        Ellipse((1.0, 1.2), (0.55, 1.8), CSF - BRAIN, angle=18.0),
        Rectangle((0.0, 5.2), (0.25, 1.4), CSF - BRAIN),
        Ellipse((2.6, -3.2), (1.3, 1.1), TUMOR_CONTRAST, angle=30.0),
        Ellipse((-3.0, -2.0), (0.45, 0.45), TUMOR_CONTRAST),
        Ellipse((-1.2, -4.6), (0.45, 0.45), TUMOR_CONTRAST),
        Ellipse((3.4, 2.8), (0.45, 0.45), TUMOR_CONTRAST),
    ]
    return Phantom(shapes, extent, name="head")


def uniform_disk(radius: float, value: float, extent: float) -> Phantom:
    return Phantom([Ellipse((0.0, 0.0), (radius, radius), value)], extent, name="disk")


def rasterize_phantom(phantom: Phantom, side: int, subsample: int = 11) -> PixelImage:
    """Average ``subsample**2`` point evaluations per pixel."""
    if side < 1 or subsample < 1:
        raise ValueError("side and subsample must be positive")
    pixel = phantom.extent / side
    half = phantom.extent / 2.0
    # sub-sample centres along one axis, in pixel units
    fine = (np.arange(side * subsample) + 0.5) / subsample
    xs = -half + fine * pixel
    ys = half - fine * pixel
    X, Y = np.meshgrid(xs, ys)
    values = phantom.evaluate(np.column_stack([X.ravel(), Y.ravel()]))
    values = values.reshape(side, subsample, side, subsample).mean(axis=(1, 3))
    return PixelImage(values.reshape(-1), side, pixel)
