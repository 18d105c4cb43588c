"""Problem structures, algorithms and the output operator.

An *algorithm* is an operator that maps points of the containing set
``Delta`` (always all of R^J here) into the set ``Omega`` of admissible
points.  Iterating it from an initial point produces a sequence of points;
:func:`run_to_output` stops that sequence at its first point whose
proximity to the constraints is at most ``epsilon``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

DEFAULT_MAX_ITERATIONS = 100_000


class DomainKind(enum.Enum):
    NONNEGATIVE_ORTHANT = "nonnegative"
    ALL_SPACE = "all"


@dataclass(frozen=True)
class Domain:
    """A subset of R^J: either R^J itself or its nonnegative orthant."""

    kind: DomainKind
    dimension: int

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")

    @classmethod
    def all_space(cls, dimension: int) -> "Domain":
        return cls(DomainKind.ALL_SPACE, dimension)

    @classmethod
    def nonnegative(cls, dimension: int) -> "Domain":
        return cls(DomainKind.NONNEGATIVE_ORTHANT, dimension)

    def contains(self, x) -> bool:
        x = np.asarray(x)
        if x.shape != (self.dimension,):
            return False
        if self.kind is DomainKind.ALL_SPACE:
            return True
        return bool(np.all(x >= 0))


class Algorithm:
    """Wraps an operator ``P_T: Delta -> Omega``.

    Parameters
    ----------
    step : callable
        Maps a length-J vector to a length-J vector in ``omega``.
    omega : Domain
        The range of the operator.
    check_range : bool
        If true, every output is tested for membership in ``omega``.
    """

    def __init__(self, step: Callable[[np.ndarray], np.ndarray], omega: Domain,
                 check_range: bool = True, name: str = "algorithm"):
        self._step = step
        self.omega = omega
        self.check_range = check_range
        self.name = name

    @property
    def dimension(self) -> int:
        return self.omega.dimension

    @property
    def delta(self) -> Domain:
        return Domain.all_space(self.omega.dimension)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        y = self._step(np.asarray(x, dtype=np.float64))
        if self.check_range and not self.omega.contains(y):
            raise ValueError(f"{self.name}: output is not in {self.omega.kind.value} domain")
        return y

    def __repr__(self):
        return f"Algorithm({self.name!r}, J={self.dimension}, omega={self.omega.kind.value})"


@dataclass
class ProximityFunction:
    """A nonnegative measure of constraint violation on R^J."""

    func: Callable[[np.ndarray], float]
    dimension: int
    name: str = "proximity"

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dimension,):
            raise ValueError(
                f"{self.name}: expected a vector of length {self.dimension}, got shape {x.shape}")
        value = float(self.func(x))
        if not value >= 0:
            raise ValueError(f"{self.name}: proximity must be nonnegative, got {value}")
        return value


@dataclass
class OutputResult:
    """Result of stopping an iterate sequence at its first epsilon-compatible point.

    ``point`` is ``None`` when no iterate within the iteration cap was
    epsilon-compatible; ``proximity_at_output`` then holds the proximity of
    the last iterate examined.
    """

    point: np.ndarray | None
    iterations_used: int
    proximity_at_output: float
    epsilon: float
    proximities: list[float] = field(default_factory=list, repr=False)

    @property
    def defined(self) -> bool:
        return self.point is not None


def _check_initial(algorithm: Algorithm, proximity: ProximityFunction, initial) -> np.ndarray:
    x = np.array(initial, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != proximity.dimension or x.shape[0] != algorithm.dimension:
        raise ValueError(
            f"dimension mismatch: initial point has shape {x.shape}, algorithm has "
            f"J={algorithm.dimension}, proximity has J={proximity.dimension}")
    if not algorithm.omega.contains(x):
        raise ValueError("initial point is not in Omega")
    return x


def run_to_output(algorithm: Algorithm, proximity: ProximityFunction, initial, epsilon: float,
                  max_iterations: int = DEFAULT_MAX_ITERATIONS) -> OutputResult:
    """Iterate ``algorithm`` from ``initial`` until the proximity drops to ``epsilon``.

    The initial point itself is examined first, so an already compatible
    initial point is returned with ``iterations_used == 0``.  The operator
    is applied at most ``max_iterations`` times.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    x = _check_initial(algorithm, proximity, initial)
    history = []
    for k in range(max_iterations + 1):
        p = proximity(x)
        history.append(p)
        if p <= epsilon:
            return OutputResult(x, k, p, epsilon, history)
        if k == max_iterations:
            break
        x = algorithm(x)
    return OutputResult(None, max_iterations, history[-1], epsilon, history)


@dataclass
class NonexpansiveReport:
    passed: bool
    max_ratio: float
    worst_pair: int
    n_pairs: int

    def __bool__(self):
        return self.passed


def check_nonexpansive(operator: Callable[[np.ndarray], np.ndarray],
                       sample_pairs: Iterable[tuple[np.ndarray, np.ndarray]],
                       tolerance: float = 0.0) -> NonexpansiveReport:
    """Spot-check ``||Ox - Oy|| <= ||x - y|| + tolerance`` on sampled pairs.

    This is an empirical check, not a proof.  The reported ``max_ratio`` is
    the largest ``||Ox - Oy|| / ||x - y||`` over pairs with distinct points.
    """
    passed = True
    max_ratio = 0.0
    worst = -1
    n = 0
    dim = None
    for n, (x, y) in enumerate(sample_pairs, start=1):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError(f"pair {n - 1}: points must be vectors of the same length")
        if dim is None:
            dim = x.shape[0]
        elif x.shape[0] != dim:
            raise ValueError(f"pair {n - 1}: dimension {x.shape[0]} differs from {dim}")
        before = np.linalg.norm(x - y)
        after = np.linalg.norm(operator(x) - operator(y))
        if after > before + tolerance:
            passed = False
        if before > 0:
            ratio = after / before
            if ratio > max_ratio:
                max_ratio, worst = ratio, n - 1
    if n == 0:
        raise ValueError("check_nonexpansive needs at least one sample pair")
    return NonexpansiveReport(passed, max_ratio, worst, n)


def run_perturbed(algorithm: Algorithm, initial,
                  perturbations: Sequence[tuple[float, np.ndarray]], count: int) -> list[np.ndarray]:
    """Generate ``x^{k+1} = P(x^k + beta_k v^k)`` for ``k < count``.

    Returns the ``count + 1`` points ``x^0, ..., x^count``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if len(perturbations) < count:
        raise ValueError(f"need {count} perturbations, got {len(perturbations)}")
    x = np.array(initial, dtype=np.float64)
    if not algorithm.omega.contains(x):
        raise ValueError("initial point is not in Omega")
    delta = algorithm.delta
    points = [x]
    for k in range(count):
        beta, v = perturbations[k]
        if beta < 0:
            raise ValueError(f"perturbation {k}: beta must be nonnegative")
        z = x + beta * np.asarray(v, dtype=np.float64)
        if not delta.contains(z):
            raise ValueError(f"perturbation {k}: perturbed point is not in Delta")
        x = algorithm(z)
        points.append(x)
    return points


def iterate(algorithm: Algorithm, initial, count: int) -> list[np.ndarray]:
    """The unperturbed sequence ``x, Px, P(Px), ...`` up to ``P^count x``."""
    x = np.array(initial, dtype=np.float64)
    points = [x]
    for _ in range(count):
        x = algorithm(x)
        points.append(x)
    return points
