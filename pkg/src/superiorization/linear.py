"""Blocks of linear equations, the residual, and the block-iterative algorithm.

A problem is an ordered sequence of ``W`` blocks; block ``w`` holds
``l_w`` equations ``<a^i, x> = b_i``.  The block operator moves ``x`` by
the average of the orthogonal projections onto the block's hyperplanes,
and the full sweep applies the blocks in order, optionally followed by
clipping to the nonnegative orthant::

    R x = Q B_W ... B_1 x

With one equation per block this is ART; with a single block it is SIRT.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .core import Algorithm, Domain, ProximityFunction

log = logging.getLogger(__name__)

FORMAT_HEADER = "# superiorization block-linear-problem v1"


@dataclass(frozen=True)
class LinearEquation:
    """One equation ``<a, x> = b`` with ``a`` stored as index/value pairs."""

    indices: np.ndarray
    values: np.ndarray
    b: float
    dimension: int

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values differ in length")
        if not np.any(self.values != 0):
            raise ValueError("equation with a zero coefficient vector")
        if len(self.indices) and (self.indices.min() < 0 or self.indices.max() >= self.dimension):
            raise ValueError("coefficient index out of range")

    @classmethod
    def from_dense(cls, a, b: float) -> "LinearEquation":
        a = np.asarray(a, dtype=np.float64)
        (idx,) = np.nonzero(a)
        return cls(idx.astype(np.int64), a[idx], float(b), a.shape[0])

    def dense(self) -> np.ndarray:
        a = np.zeros(self.dimension)
        a[self.indices] = self.values
        return a


class Block:
    """A block of equations held as a CSR matrix with its right-hand side."""

    def __init__(self, matrix, b):
        matrix = sp.csr_matrix(matrix, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64).reshape(-1)
        if matrix.shape[0] == 0:
            raise ValueError("empty block")
        if matrix.shape[0] != b.shape[0]:
            raise ValueError(f"block has {matrix.shape[0]} rows but {b.shape[0]} measurements")
        norms2 = np.asarray(matrix.multiply(matrix).sum(axis=1)).reshape(-1)
        if np.any(norms2 <= 0):
            raise ValueError("block contains an equation with a zero coefficient vector")
        matrix.sort_indices()
        self.matrix = matrix
        self.b = b
        self.norms2 = norms2
        self._matrix_t = matrix.T.tocsr()

    def __len__(self):
        return self.matrix.shape[0]

    @property
    def dimension(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def from_equations(cls, equations: Sequence[LinearEquation]) -> "Block":
        if not equations:
            raise ValueError("empty block")
        dim = equations[0].dimension
        if any(eq.dimension != dim for eq in equations):
            raise ValueError("equations in a block must share dimension")
        indptr = np.cumsum([0] + [len(eq.indices) for eq in equations])
        indices = np.concatenate([eq.indices for eq in equations])
        values = np.concatenate([eq.values for eq in equations])
        matrix = sp.csr_matrix((values, indices, indptr), shape=(len(equations), dim))
        return cls(matrix, [eq.b for eq in equations])

    def equations(self) -> list[LinearEquation]:
        out = []
        m = self.matrix
        for i in range(m.shape[0]):
            sl = slice(m.indptr[i], m.indptr[i + 1])
            out.append(LinearEquation(m.indices[sl].astype(np.int64), m.data[sl].copy(),
                                      float(self.b[i]), m.shape[1]))
        return out

    def step(self, x: np.ndarray) -> np.ndarray:
        coef = (self.b - self.matrix @ x) / self.norms2
        return x + (self._matrix_t @ coef) / len(self)


class BlockLinearProblem:
    """An ordered sequence of blocks of linear equations in ``dimension`` unknowns."""

    def __init__(self, blocks: Sequence[Block], dropped_rows: int = 0):
        blocks = list(blocks)
        if not blocks:
            raise ValueError("a problem needs at least one block")
        dim = blocks[0].dimension
        if any(blk.dimension != dim for blk in blocks):
            raise ValueError("all blocks must share dimension")
        self.blocks = blocks
        self.dimension = dim
        self.dropped_rows = dropped_rows
        self._stacked = None

    @classmethod
    def from_equations(cls, blocks: Sequence[Sequence[LinearEquation]]) -> "BlockLinearProblem":
        return cls([Block.from_equations(eqs) for eqs in blocks])

    @classmethod
    def from_dense(cls, A, b, block_sizes: Sequence[int] | None = None) -> "BlockLinearProblem":
        """Split the rows of a dense system into consecutive blocks.

        ``block_sizes=None`` puts every equation in its own block (ART).
        """
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        b = np.asarray(b, dtype=np.float64).reshape(-1)
        if block_sizes is None:
            block_sizes = [1] * A.shape[0]
        if sum(block_sizes) != A.shape[0]:
            raise ValueError("block sizes do not add up to the number of rows")
        bounds = np.cumsum([0, *block_sizes])
        return cls([Block(A[lo:hi], b[lo:hi]) for lo, hi in zip(bounds[:-1], bounds[1:])])

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def n_equations(self) -> int:
        return sum(len(blk) for blk in self.blocks)

    @property
    def block_sizes(self) -> list[int]:
        return [len(blk) for blk in self.blocks]

    def stacked(self) -> tuple[sp.csr_matrix, np.ndarray]:
        """All equations as one matrix ``A`` and vector ``b``, block order kept."""
        if self._stacked is None:
            A = sp.vstack([blk.matrix for blk in self.blocks], format="csr")
            b = np.concatenate([blk.b for blk in self.blocks])
            self._stacked = (A, b)
        return self._stacked

    def regrouped(self, kind: str) -> "BlockLinearProblem":
        """Same equations in the same order, one per block (``"art"``) or all in one (``"sirt"``)."""
        A, b = self.stacked()
        if kind == "art":
            blocks = [Block(A[i:i + 1], b[i:i + 1]) for i in range(A.shape[0])]
        elif kind == "sirt":
            blocks = [Block(A, b)]
        else:
            raise ValueError(f"unknown grouping {kind!r}")
        return BlockLinearProblem(blocks, self.dropped_rows)

    def proximity(self) -> ProximityFunction:
        return ProximityFunction(lambda x: res(self, x), self.dimension, name="Res")

    def __repr__(self):
        return (f"BlockLinearProblem(J={self.dimension}, W={self.n_blocks}, "
                f"equations={self.n_equations})")


def res(problem: BlockLinearProblem, x) -> float:
    """Euclidean residual ``||b - Ax||`` over every equation of every block."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (problem.dimension,):
        raise ValueError(f"expected a vector of length {problem.dimension}, got shape {x.shape}")
    A, b = problem.stacked()
    return float(np.linalg.norm(b - A @ x))


def block_step(block: Block | Sequence[LinearEquation], x) -> np.ndarray:
    """Apply ``x + (1/l) sum_i (b_i - <a^i, x>) / ||a^i||^2 a^i`` for one block."""
    if not isinstance(block, Block):
        block = Block.from_equations(block)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (block.dimension,):
        raise ValueError(f"expected a vector of length {block.dimension}, got shape {x.shape}")
    return block.step(x)


def nonneg_clip(x) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def sweep(problem: BlockLinearProblem, x: np.ndarray, apply_nonneg: bool = True) -> np.ndarray:
    for blk in problem.blocks:
        x = blk.step(x)
    return nonneg_clip(x) if apply_nonneg else x


def algorithm_r(problem: BlockLinearProblem, apply_nonneg: bool = True) -> Algorithm:
    """The block-iterative operator, with or without the final nonnegativity clip.

    Without the clip the range is all of R^J.
    """
    if apply_nonneg:
        omega = Domain.nonnegative(problem.dimension)
    else:
        omega = Domain.all_space(problem.dimension)
    name = "R" if apply_nonneg else "R(no Q)"
    return Algorithm(lambda x: sweep(problem, x, apply_nonneg), omega, name=name)


def efficient_view_order(view_count: int) -> list[int]:
    """Order views so that consecutively used views are far apart in angle.

    The order is recursive bisection: bit-reversed counting over the next
    power of two, discarding indices that do not exist.  For a power of two
    this is the plain bit-reversal permutation, e.g. 8 views give
    ``0 4 2 6 1 5 3 7``.
    """
    if view_count < 1:
        raise ValueError("view_count must be >= 1")
    bits = max(1, (view_count - 1).bit_length())
    order = []
    for i in range(1 << bits):
        r = int(format(i, f"0{bits}b")[::-1], 2)
        if r < view_count:
            order.append(r)
    return order


def save_problem(problem: BlockLinearProblem, path: str | os.PathLike) -> None:
    """Write a problem in the plain-text block format.

    Layout::

        # superiorization block-linear-problem v1
        J <dimension>
        W <number of blocks>
        block <number of equations>
        <b> <index>:<value> <index>:<value> ...
        ...

    Indices are zero-based; floats are written with ``repr`` so that they
    round-trip exactly.
    """
    with open(path, "w") as fh:
        fh.write(f"{FORMAT_HEADER}\nJ {problem.dimension}\nW {problem.n_blocks}\n")
        for blk in problem.blocks:
            fh.write(f"block {len(blk)}\n")
            m = blk.matrix
            for i in range(m.shape[0]):
                sl = slice(m.indptr[i], m.indptr[i + 1])
                pairs = " ".join(f"{j}:{v!r}" for j, v in zip(m.indices[sl], m.data[sl].tolist()))
                fh.write(f"{float(blk.b[i])!r} {pairs}\n")


def load_problem(path: str | os.PathLike) -> BlockLinearProblem:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    try:
        key, val = lines[0].split()
        if key != "J":
            raise ValueError
        dim = int(val)
        key, val = lines[1].split()
        if key != "W":
            raise ValueError
        n_blocks = int(val)
    except (IndexError, ValueError):
        raise ValueError(f"{path}: malformed problem header") from None
    pos = 2
    blocks = []
    for _ in range(n_blocks):
        key, val = lines[pos].split()
        if key != "block":
            raise ValueError(f"{path}: expected 'block', got {key!r}")
        n_eq = int(val)
        eqs = []
        for line in lines[pos + 1:pos + 1 + n_eq]:
            fields = line.split()
            pairs = [p.split(":") for p in fields[1:]]
            idx = np.array([int(p[0]) for p in pairs], dtype=np.int64)
            vals = np.array([float(p[1]) for p in pairs])
            eqs.append(LinearEquation(idx, vals, float(fields[0]), dim))
        if len(eqs) != n_eq:
            raise ValueError(f"{path}: truncated block")
        blocks.append(Block.from_equations(eqs))
        pos += 1 + n_eq
    return BlockLinearProblem(blocks)
