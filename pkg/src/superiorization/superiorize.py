"""Automatic superiorized version of an iterative algorithm.

Each outer iteration takes ``N`` steering steps from the current iterate
``x^k``.  Step ``n`` asks the provider for a nonascending vector at
``x^{k,n}`` and then draws successive step sizes ``gamma_l = a**l`` from a
single, never reset schedule until the trial point ``x^{k,n} + beta v``
lies in ``Delta`` and its criterion value does not exceed ``phi(x^k)``.
The algorithm's operator is applied to the result ``x^{k,N}``.

The steering steps amount to one bounded perturbation ``beta_k v^k`` with
``beta_k`` the largest accepted step and ``v^k`` the correspondingly
weighted sum of the drawn vectors; :class:`PerturbationRecord` keeps that
bookkeeping so it can be checked after a run.
"""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (DEFAULT_MAX_ITERATIONS, Algorithm, Domain, OutputResult, ProximityFunction,
                   _check_initial)
from .criteria import zero_provider
from .linear import BlockLinearProblem, algorithm_r, nonneg_clip

DEFAULT_GAMMA_BASE = 0.99995
DEFAULT_N = 20
DEFAULT_DRAW_CAP = 1_000_000
NORM_SLACK = 1e-12

TRACE_COLUMNS = ("k", "res", "phi", "beta", "v_norm", "cursor")


class SteeringError(RuntimeError):
    """Raised when a provider is defective: the draw cap was hit or ``||d|| > 1``."""

    def __init__(self, message, k=None, n=None):
        super().__init__(message)
        self.k = k
        self.n = n


class GammaSchedule:
    """Geometric step sizes ``gamma_l = a**l`` drawn with a persistent cursor.

    The cursor starts at -1, so the first draw returns ``a**0 = 1``.
    """

    def __init__(self, a: float = DEFAULT_GAMMA_BASE, cursor: int = -1):
        if not 0 < a < 1:
            raise ValueError(f"geometric base must lie in (0, 1), got {a}")
        self.a = float(a)
        self.cursor = cursor

    def value(self, ell: int) -> float:
        return self.a ** ell

    def draw(self) -> float:
        self.cursor += 1
        return self.value(self.cursor)

    @property
    def total(self) -> float:
        """Sum of the whole sequence, an upper bound for any drawn subsequence."""
        return 1.0 / (1.0 - self.a)

    def copy(self) -> "GammaSchedule":
        return GammaSchedule(self.a, self.cursor)

    def __repr__(self):
        return f"GammaSchedule(a={self.a}, cursor={self.cursor})"


@dataclass
class SuperiorizationConfig:
    """Parameters of a superiorized run.

    ``nonascending`` defaults to ``criterion.nonascending`` when the
    criterion has one.  ``initial`` is the starting point; ``None`` means
    the zero vector.
    """

    criterion: Callable[[np.ndarray], float]
    n_steering: int = DEFAULT_N
    gamma_base: float = DEFAULT_GAMMA_BASE
    initial: np.ndarray | None = None
    nonascending: Callable[[np.ndarray], np.ndarray] | None = None
    draw_cap: int = DEFAULT_DRAW_CAP
    keep_vectors: bool = True

    def __post_init__(self):
        if self.n_steering < 1:
            raise ValueError("n_steering must be >= 1")
        if not 0 < self.gamma_base < 1:
            raise ValueError("gamma_base must lie in (0, 1)")
        if self.draw_cap < 1:
            raise ValueError("draw_cap must be >= 1")
        if self.nonascending is None:
            provider = getattr(self.criterion, "nonascending", None)
            if provider is None:
                raise ValueError("criterion has no nonascending provider; pass one explicitly")
            self.nonascending = provider

    def schedule(self) -> GammaSchedule:
        return GammaSchedule(self.gamma_base)

    def start(self, dimension: int) -> np.ndarray:
        if self.initial is None:
            return np.zeros(dimension)
        return np.array(self.initial, dtype=np.float64)


@dataclass
class PerturbationRecord:
    """Bookkeeping of the steering steps taken from iterate ``k``.

    ``betas[n]`` was drawn at schedule position ``cursors[n]``; ``phis[n]``
    is the criterion at ``x^{k,n+1}``; ``phi_ref`` is ``phi(x^k)``.
    ``reconstruction_error`` is ``max |x^k + beta v - x^{k,N}|``.
    """

    k: int
    betas: list[float]
    cursors: list[int]
    phis: list[float]
    phi_ref: float
    beta: float
    v_norm: float
    reconstruction_error: float
    draws: int
    v: np.ndarray | None = field(default=None, repr=False)
    steering_norms: list[float] = field(default_factory=list)

    @property
    def cursor(self) -> int:
        return self.cursors[-1]


def _steer(x, phi_ref, provider, criterion, delta, schedule, draw_cap, k, n):
    v = np.asarray(provider(x), dtype=np.float64)
    if v.shape != x.shape:
        raise SteeringError(f"provider returned shape {v.shape}, expected {x.shape}", k, n)
    norm = float(np.linalg.norm(v))
    if norm > 1 + NORM_SLACK:
        raise SteeringError(f"nonascending vector at (k={k}, n={n}) has norm {norm} > 1", k, n)
    for draws in range(1, draw_cap + 1):
        beta = schedule.draw()
        z = x + beta * v
        if delta.contains(z):
            phi_z = criterion(z)
            if phi_z <= phi_ref:
                return z, v, beta, phi_z, norm, draws
    raise SteeringError(
        f"no acceptable step after {draw_cap} draws at (k={k}, n={n}); "
        "the provider is probably not returning nonascending vectors", k, n)


def _finish_record(k, x_k, z, betas, cursors, phis, phi_ref, weighted, draws, norms, keep):
    beta = max(betas)
    v = weighted / beta
    err = float(np.max(np.abs(x_k + beta * v - z))) if z.size else 0.0
    return PerturbationRecord(k, betas, cursors, phis, phi_ref, beta, float(np.linalg.norm(v)),
                              err, draws, v if keep else None, norms)


def superiorized_step(algorithm: Algorithm, config: SuperiorizationConfig, x_k,
                      schedule: GammaSchedule, k: int = 0):
    """One outer iteration; returns ``(x^{k+1}, record, schedule)``.

    ``schedule`` is advanced in place.
    """
    x_k = np.asarray(x_k, dtype=np.float64)
    criterion = config.criterion
    delta = algorithm.delta
    phi_ref = criterion(x_k)
    if not math.isfinite(phi_ref):
        raise ValueError(f"criterion is not finite at iterate {k}")
    z = x_k
    weighted = np.zeros_like(x_k)
    betas, cursors, phis, norms = [], [], [], []
    total_draws = 0
    for n in range(config.n_steering):
        z, v, beta, phi_z, norm, draws = _steer(z, phi_ref, config.nonascending, criterion, delta,
                                                 schedule, config.draw_cap, k, n)
        weighted += beta * v
        betas.append(beta)
        cursors.append(schedule.cursor)
        phis.append(phi_z)
        norms.append(norm)
        total_draws += draws
    record = _finish_record(k, x_k, z, betas, cursors, phis, phi_ref, weighted, total_draws,
                            norms, config.keep_vectors)
    return algorithm(z), record, schedule


@dataclass
class TraceRow:
    k: int
    res: float
    phi: float
    beta: float | None = None
    v_norm: float | None = None
    cursor: int | None = None


@dataclass
class RunResult:
    """An output together with per-iterate traces."""

    output: OutputResult
    trace: list[TraceRow]
    records: list[PerturbationRecord] = field(default_factory=list)
    iterates: list[np.ndarray] | None = field(default=None, repr=False)


def _drive(step, proximity, criterion, x, epsilon, max_iterations, keep_iterates):
    trace, records, history = [], [], []
    iterates = [x] if keep_iterates else None
    for k in range(max_iterations + 1):
        p = proximity(x)
        history.append(p)
        row = TraceRow(k, p, criterion(x) if criterion is not None else float("nan"))
        trace.append(row)
        if p <= epsilon:
            return RunResult(OutputResult(x, k, p, epsilon, history), trace, records, iterates)
        if k == max_iterations:
            break
        x, record = step(x, k)
        if record is not None:
            records.append(record)
            row.beta, row.v_norm, row.cursor = record.beta, record.v_norm, record.cursor
        if keep_iterates:
            iterates.append(x)
    return RunResult(OutputResult(None, max_iterations, history[-1], epsilon, history),
                     trace, records, iterates)


def superiorized_run(algorithm: Algorithm, proximity: ProximityFunction,
                     config: SuperiorizationConfig, epsilon: float,
                     max_iterations: int = DEFAULT_MAX_ITERATIONS,
                     keep_iterates: bool = False) -> RunResult:
    """Run the superiorized version until the first epsilon-compatible iterate."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    x0 = _check_initial(algorithm, proximity, config.start(algorithm.dimension))
    if not math.isfinite(config.criterion(x0)):
        raise ValueError("criterion is not finite at the initial point")
    schedule = config.schedule()

    def step(x, k):
        x_next, record, _ = superiorized_step(algorithm, config, x, schedule, k)
        return x_next, record

    return _drive(step, proximity, config.criterion, x0, epsilon, max_iterations, keep_iterates)


def plain_run(algorithm: Algorithm, proximity: ProximityFunction, epsilon: float,
              initial=None, criterion=None, max_iterations: int = DEFAULT_MAX_ITERATIONS,
              keep_iterates: bool = False) -> RunResult:
    """The unperturbed algorithm, traced like :func:`superiorized_run`."""
    if initial is None:
        initial = np.zeros(algorithm.dimension)
    x0 = _check_initial(algorithm, proximity, initial)
    return _drive(lambda x, k: (algorithm(x), None), proximity, criterion, x0, epsilon,
                  max_iterations, keep_iterates)


def interleaved_variant_step(problem: BlockLinearProblem, config: SuperiorizationConfig, x_k,
                             schedule: GammaSchedule, k: int = 0, apply_nonneg: bool = True):
    """One iteration that steers once before each block projection.

    Each steering step is accepted against the criterion at the point it
    starts from.  Returns ``(x^{k+1}, record, schedule)``; the record's
    ``v`` aggregates the steering vectors of all blocks.
    """
    x = np.asarray(x_k, dtype=np.float64)
    criterion = config.criterion
    delta = Domain.all_space(problem.dimension)
    phi_ref = criterion(x)
    weighted = np.zeros_like(x)
    betas, cursors, phis, norms = [], [], [], []
    total_draws = 0
    for n, blk in enumerate(problem.blocks):
        ref = criterion(x)
        z, v, beta, phi_z, norm, draws = _steer(x, ref, config.nonascending, criterion, delta,
                                                 schedule, config.draw_cap, k, n)
        weighted += beta * v
        betas.append(beta)
        cursors.append(schedule.cursor)
        phis.append(phi_z)
        norms.append(norm)
        total_draws += draws
        x = blk.step(z)
    if apply_nonneg:
        x = nonneg_clip(x)
    beta = max(betas)
    v = weighted / beta
    record = PerturbationRecord(k, betas, cursors, phis, phi_ref, beta, float(np.linalg.norm(v)),
                                float("nan"), total_draws, v if config.keep_vectors else None,
                                norms)
    return x, record, schedule


def interleaved_run(problem: BlockLinearProblem, config: SuperiorizationConfig, epsilon: float,
                    apply_nonneg: bool = True, max_iterations: int = DEFAULT_MAX_ITERATIONS,
                    keep_iterates: bool = False) -> RunResult:
    proximity = problem.proximity()
    x0 = _check_initial(algorithm_r(problem, apply_nonneg), proximity,
                        config.start(problem.dimension))
    schedule = config.schedule()

    def step(x, k):
        x_next, record, _ = interleaved_variant_step(problem, config, x, schedule, k, apply_nonneg)
        return x_next, record

    return _drive(step, proximity, config.criterion, x0, epsilon, max_iterations, keep_iterates)


def with_zero_provider(config: SuperiorizationConfig) -> SuperiorizationConfig:
    return SuperiorizationConfig(config.criterion, config.n_steering, config.gamma_base,
                                 config.initial, zero_provider, config.draw_cap,
                                 config.keep_vectors)


# -- trace files -------------------------------------------------------------

def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_trace(trace: Sequence[TraceRow], metadata: dict | None = None) -> str:
    """CSV text with columns ``k,res,phi,beta,v_norm,cursor``.

    Optional metadata is written first as ``# key=value`` lines.  The
    steering columns of a row describe the step taken *from* that iterate
    and are empty for the final row and for unperturbed runs.
    """
    buf = io.StringIO()
    for key, value in (metadata or {}).items():
        buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for row in trace:
        writer.writerow([_fmt(getattr(row, col)) for col in TRACE_COLUMNS])
    return buf.getvalue()


def write_trace(trace: Sequence[TraceRow], path: str | os.PathLike, metadata: dict | None = None):
    with open(path, "w", newline="") as fh:
        fh.write(format_trace(trace, metadata))


def read_trace(path: str | os.PathLike) -> tuple[list[TraceRow], dict]:
    metadata = {}
    body = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                metadata[key.strip()] = value.strip()
            elif line.strip():
                body.append(line)
    rows = []
    for rec in csv.DictReader(body):
        rows.append(TraceRow(
            int(rec["k"]), float(rec["res"]), float(rec["phi"]),
            float(rec["beta"]) if rec["beta"] else None,
            float(rec["v_norm"]) if rec["v_norm"] else None,
            int(rec["cursor"]) if rec["cursor"] else None))
    return rows, metadata


def verify_trace(trace: Sequence[TraceRow], n_steering: int, gamma_base: float,
                 epsilon: float | None = None, rel_tol: float = 1e-12) -> list[str]:
    """Re-check the bookkeeping invariants of a superiorized trace.

    Returns a list of human-readable violations; empty means the trace is
    consistent.  Checked: ``||v^k|| <= N``; each ``beta_k`` is a schedule
    value drawn during its own iteration; cursors advance by at least ``N``
    per iteration; and, with ``epsilon``, only the last row is
    epsilon-compatible.
    """
    problems = []
    prev_cursor = -1
    steered = [row for row in trace if row.beta is not None]
    for row in steered:
        if row.v_norm > n_steering + NORM_SLACK:
            problems.append(f"k={row.k}: ||v|| = {row.v_norm} exceeds N = {n_steering}")
        # beta_k is the first accepted draw of the iteration: some a**l with l after the
        # previous cursor, leaving at least one draw for each remaining steering step
        ell = round(math.log(row.beta) / math.log(gamma_base)) if row.beta > 0 else -1
        if not math.isclose(row.beta, gamma_base ** ell, rel_tol=rel_tol, abs_tol=0.0):
            problems.append(f"k={row.k}: beta = {row.beta!r} is not a schedule value")
        elif not prev_cursor < ell <= row.cursor - (n_steering - 1):
            problems.append(f"k={row.k}: beta = a**{ell} lies outside the draws of this "
                            f"iteration ({prev_cursor + 1}..{row.cursor})")
        if row.cursor - prev_cursor < n_steering:
            problems.append(f"k={row.k}: cursor advanced by {row.cursor - prev_cursor} < N")
        prev_cursor = row.cursor
    for a, b in zip(trace, trace[1:]):
        if b.k != a.k + 1:
            problems.append(f"iteration index jumps from {a.k} to {b.k}")
    if epsilon is not None and trace:
        for row in trace[:-1]:
            if row.res <= epsilon:
                problems.append(f"k={row.k}: res {row.res} <= epsilon before the final row")
        if trace[-1].res > epsilon:
            problems.append(f"final row k={trace[-1].k}: res {trace[-1].res} > epsilon")
    return problems
