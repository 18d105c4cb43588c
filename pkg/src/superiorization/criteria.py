"""Optimization criteria and nonascending-vector providers.

A criterion is any callable ``phi(x) -> float``.  A nonascending-vector
provider is a callable ``provider(x) -> d`` returning a vector with
``||d|| <= 1`` along which ``phi`` does not increase for small steps.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

DEFAULT_TV_THRESHOLD = 1e-20


@dataclass
class PixelImage:
    """A square image stored row-major as a length ``side**2`` vector.

    ``pixel_size`` is the edge length of a pixel in cm.
    """

    values: np.ndarray
    side: int
    pixel_size: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.side < 1 or self.values.shape[0] != self.side * self.side:
            raise ValueError(f"{self.values.shape[0]} values do not fill a {self.side}x{self.side} grid")

    @classmethod
    def from_array(cls, array, pixel_size: float = 1.0) -> "PixelImage":
        array = np.asarray(array, dtype=np.float64)
        if array.ndim != 2 or array.shape[0] != array.shape[1]:
            raise ValueError("expected a square 2-D array")
        return cls(array.reshape(-1), array.shape[0], pixel_size)

    @property
    def grid(self) -> np.ndarray:
        return self.values.reshape(self.side, self.side)


def _as_grid(image, side: int | None = None) -> np.ndarray:
    if isinstance(image, PixelImage):
        return image.grid
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    if side is None:
        side = int(round(np.sqrt(arr.size)))
    if side * side != arr.size:
        raise ValueError(f"{arr.size} values do not form a square image")
    return arr.reshape(side, side)


def _differences(X: np.ndarray):
    right = X[:-1, :-1] - X[:-1, 1:]
    below = X[:-1, :-1] - X[1:, :-1]
    return right, below


def tv(image, side: int | None = None) -> float:
    """Total variation: sum over pixels not in the last row or column of
    ``sqrt((x_j - x_right)^2 + (x_j - x_below)^2)``.

    Images with ``side < 2`` have no such pixels and a TV of zero.
    """
    X = _as_grid(image, side)
    if X.shape[0] < 2:
        return 0.0
    right, below = _differences(X)
    return float(np.sqrt(right * right + below * below).sum())


def tv_partials(image, side: int | None = None, threshold: float = DEFAULT_TV_THRESHOLD):
    """Partial derivatives of TV and the mask of coordinates where they are trusted.

    ``x_j`` appears in at most three terms of the sum.  Coordinate ``j`` is
    marked unavailable when any of those terms has a denominator (the
    square root) of magnitude below ``threshold``.  Terms that do not
    exist at the image border never block a coordinate.
    """
    X = _as_grid(image, side)
    n = X.shape[0]
    grad = np.zeros_like(X)
    available = np.ones(X.shape, dtype=bool)
    if n < 2:
        return grad.reshape(-1), available.reshape(-1)
    right, below = _differences(X)
    t = np.sqrt(right * right + below * below)
    small = np.abs(t) < threshold
    safe = np.where(small, 1.0, t)
    dr = np.where(small, 0.0, right / safe)
    db = np.where(small, 0.0, below / safe)
    grad[:-1, :-1] += dr + db
    grad[:-1, 1:] -= dr
    grad[1:, :-1] -= db
    available[:-1, :-1] &= ~small
    available[:-1, 1:] &= ~small
    available[1:, :-1] &= ~small
    return grad.reshape(-1), available.reshape(-1)


def theorem2_direction(g) -> np.ndarray:
    """``-g/||g||``, or the zero vector when ``g`` vanishes."""
    g = np.asarray(g, dtype=np.float64)
    norm = np.linalg.norm(g)
    if norm == 0:
        return np.zeros_like(g)
    return -g / norm


def theorem2_nonascending(partials: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
                          x) -> np.ndarray:
    """Nonascending vector for a convex function from its available partials.

    ``partials(x)`` returns ``(values, available)``.  Coordinates whose
    partial derivative does not exist at ``x`` are zeroed before
    normalizing; for convex functions the result is nonascending.
    """
    values, available = partials(np.asarray(x, dtype=np.float64))
    g = np.where(np.asarray(available, dtype=bool), values, 0.0)
    return theorem2_direction(g)


def tv_nonascending(image, side: int | None = None,
                    threshold: float = DEFAULT_TV_THRESHOLD) -> np.ndarray:
    grad, available = tv_partials(image, side, threshold)
    return theorem2_direction(np.where(available, grad, 0.0))


def subgradient_legacy_direction(phi_subgradient: Callable[[np.ndarray], np.ndarray], x) -> np.ndarray:
    """Normalized negative subgradient.

    Not guaranteed to be nonascending; kept for comparison runs only.
    """
    return theorem2_direction(phi_subgradient(np.asarray(x, dtype=np.float64)))


def tv_subgradient(image, side: int | None = None) -> np.ndarray:
    """A subgradient of TV that uses 0 for every term with a vanishing root."""
    X = _as_grid(image, side)
    g = np.zeros_like(X)
    if X.shape[0] < 2:
        return g.reshape(-1)
    right, below = _differences(X)
    t = np.sqrt(right * right + below * below)
    safe = np.where(t > 0, t, 1.0)
    dr = np.where(t > 0, right / safe, 0.0)
    db = np.where(t > 0, below / safe, 0.0)
    g[:-1, :-1] += dr + db
    g[:-1, 1:] -= dr
    g[1:, :-1] -= db
    return g.reshape(-1)


class TotalVariation:
    """TV criterion on a ``side x side`` grid with its nonascending provider."""

    def __init__(self, side: int, threshold: float = DEFAULT_TV_THRESHOLD):
        if side < 1:
            raise ValueError("side must be >= 1")
        self.side = side
        self.threshold = threshold

    def __call__(self, x) -> float:
        return tv(x, self.side)

    def nonascending(self, x) -> np.ndarray:
        return tv_nonascending(x, self.side, self.threshold)

    def subgradient(self, x) -> np.ndarray:
        return tv_subgradient(x, self.side)

    def legacy_direction(self, x) -> np.ndarray:
        return subgradient_legacy_direction(self.subgradient, x)

    def __repr__(self):
        return f"TotalVariation(side={self.side}, threshold={self.threshold:g})"


def zero_provider(x) -> np.ndarray:
    """The zero vector is nonascending for every criterion at every point."""
    return np.zeros_like(np.asarray(x, dtype=np.float64))


def nonascent_radius(phi: Callable[[np.ndarray], float], x, d,
                     lambdas=None, tol: float = 1e-12) -> float:
    """Largest grid step ``delta`` with ``phi(x + lam d) <= phi(x) + tol`` for all grid ``lam <= delta``.

    The default grid is 61 log-spaced points in ``[1e-8, 1e-2]``.  Returns
    0.0 if the smallest step already fails.
    """
    if lambdas is None:
        lambdas = np.logspace(-8, -2, 61)
    x = np.asarray(x, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    base = phi(x)
    radius = 0.0
    for lam in np.sort(np.asarray(lambdas, dtype=np.float64)):
        if phi(x + lam * d) > base + tol:
            break
        radius = float(lam)
    return radius
