"""Sparse-grid Lagrange interpolation and quadrature of vector-valued data.

The Smolyak operator ``sum_{g(l)<=w} (Delta^{m(l_1)} x ... x Delta^{m(l_N)})``
is expanded by inclusion-exclusion into a signed sum of full tensor
interpolants, ``sum_k c_k U^{m(k_1)} x ... x U^{m(k_N)}``.  Evaluating it at a
parameter point accumulates one scalar weight per grid point; those weights
are the values ``Psi_j(y)`` of the global Lagrange basis, and the interpolant
is their inner product with the stored data vectors.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.stats import qmc

from .sparse_grid import CollocationGrid, cc_nodes, growth_m, tensor_point_ids

_BATCH = 4096


@lru_cache(maxsize=None)
def barycentric_weights(l: int) -> np.ndarray:
    """Closed-form barycentric weights of the level-``l`` Clenshaw-Curtis nodes."""
    m = growth_m(l)
    if m == 1:
        return np.ones(1)
    w = (-1.0) ** np.arange(m)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def lagrange_basis_1d(l: int, y: np.ndarray) -> np.ndarray:
    """Values of the ``m(l)`` Lagrange basis polynomials at points ``y``.

    Returns an array of shape ``(len(y), m(l))``.  Points that coincide with
    a node get the exact unit row.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    m = growth_m(l)
    if m == 1:
        return np.ones((len(y), 1))
    nodes = cc_nodes(l)
    w = barycentric_weights(l)
    diff = y[:, None] - nodes[None, :]
    hit = diff == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = w / diff
        out = t / t.sum(axis=1, keepdims=True)
    rows = hit.any(axis=1)
    if rows.any():
        out[rows] = hit[rows].astype(float)
    return out


@lru_cache(maxsize=None)
def cc_quadrature_weights(l: int) -> np.ndarray:
    """Clenshaw-Curtis weights on level ``l`` for the uniform density on [-1, 1].

    The weights sum to one.
    """
    m = growth_m(l)
    if m == 1:
        return np.ones(1)
    n = m - 1
    theta = np.pi * np.arange(m) / n
    v = np.ones(m)
    for k in range(1, n // 2 + 1):
        b = 1.0 if 2 * k == n else 2.0
        v -= b * np.cos(2 * k * theta) / (4 * k * k - 1)
    c = np.full(m, 2.0)
    c[0] = c[-1] = 1.0
    # nodes are symmetric, so the cos(j pi / n) ordering does not matter
    return c * v / n / 2.0


def combination_coefficients(index_set) -> dict[tuple[int, ...], int]:
    """Nonzero coefficients ``c_k`` of the telescoped Smolyak sum.

    ``c_k = sum_{i in {0,1}^N, k+i in index_set} (-1)^|i|``.
    """
    members = set(index_set)
    coeffs: dict[tuple[int, ...], int] = {}
    for k in members:
        c = 0
        for i in itertools.product((0, 1), repeat=len(k)):
            if tuple(a + b for a, b in zip(k, i)) in members:
                c += (-1) ** sum(i)
        if c:
            coeffs[k] = c
    return coeffs


@dataclass(frozen=True)
class _Term:
    coef: int
    levels: tuple[int, ...]
    ids: np.ndarray


class SmolyakOperator:
    """Precomputed combination terms of ``I_w`` on a grid.

    Holds, for each tensor interpolant with nonzero coefficient, the ids of
    its tensor points inside the grid.
    """

    def __init__(self, grid: CollocationGrid):
        self.grid = grid
        coeffs = combination_coefficients(grid.index_set())
        self.terms = [
            _Term(c, k, tensor_point_ids(grid, k)) for k, c in sorted(coeffs.items())
        ]

    @property
    def size(self) -> int:
        return self.grid.size

    def basis_values(self, Y) -> np.ndarray:
        """``Psi_j(y)`` for every grid point ``j`` and row ``y`` of ``Y``.

        Returns an array of shape ``(len(Y), M)``.
        """
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if Y.shape[1] != self.grid.dim:
            raise ValueError(f"points have dimension {Y.shape[1]}, grid {self.grid.dim}")
        if np.any(np.abs(Y) > 1.0):
            raise ValueError("parameter points must lie in [-1, 1]^N")
        P = len(Y)
        out = np.zeros((P, self.size))
        cache: dict[tuple[int, int], np.ndarray] = {}

        def basis(n: int, l: int) -> np.ndarray:
            key = (n, l)
            if key not in cache:
                cache[key] = lagrange_basis_1d(l, Y[:, n])
            return cache[key]

        for term in self.terms:
            T = basis(0, term.levels[0])
            for n in range(1, self.grid.dim):
                B = basis(n, term.levels[n])
                T = (T[:, :, None] * B[:, None, :]).reshape(P, -1)
            out[:, term.ids] += term.coef * T
        return out

    def quadrature_weights(self) -> np.ndarray:
        """``int Psi_j(y) rho(y) dy`` for the uniform density on the cube."""
        out = np.zeros(self.size)
        for term in self.terms:
            T = np.ones(1)
            for l in term.levels:
                T = np.multiply.outer(T, cc_quadrature_weights(l)).ravel()
            out[term.ids] += term.coef * T
        return out


@lru_cache(maxsize=64)
def _operator(grid: CollocationGrid) -> SmolyakOperator:
    return SmolyakOperator(grid)


def smolyak_operator(grid: CollocationGrid) -> SmolyakOperator:
    """Cached :class:`SmolyakOperator` for ``grid`` (grids are immutable)."""
    return _operator(grid)


class VectorValuedInterpolant:
    """Immutable sparse-grid interpolant of coefficient vectors.

    Parameters
    ----------
    grid : CollocationGrid
        Point set ``H_w``.
    data : array_like, shape (M_w, M_h)
        One coefficient vector per grid point, in grid id order.
    """

    def __init__(self, grid: CollocationGrid, data):
        data = np.array(data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        if data.shape[0] != grid.size:
            raise ValueError(f"need {grid.size} data vectors, got {data.shape[0]}")
        if not np.all(np.isfinite(data)):
            raise ValueError("interpolant data must be finite")
        data.setflags(write=False)
        self.grid = grid
        self.data = data
        self._op = smolyak_operator(grid)

    @property
    def value_dim(self) -> int:
        return self.data.shape[1]

    def basis_values(self, Y) -> np.ndarray:
        return self._op.basis_values(Y)

    def evaluate(self, y) -> np.ndarray:
        """Interpolated coefficient vector at a single point ``y``."""
        return self.evaluate_many(np.atleast_2d(y))[0]

    def evaluate_many(self, Y) -> np.ndarray:
        """Interpolated vectors at the rows of ``Y``, shape ``(len(Y), M_h)``."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        out = np.empty((len(Y), self.value_dim))
        for s in range(0, len(Y), _BATCH):
            out[s : s + _BATCH] = self._op.basis_values(Y[s : s + _BATCH]) @ self.data
        return out

    def quadrature(self) -> np.ndarray:
        """Expectation of the interpolant under the uniform density."""
        return self._op.quadrature_weights() @ self.data


def quadrature(interp: VectorValuedInterpolant) -> np.ndarray:
    return interp.quadrature()


def evaluate(interp: VectorValuedInterpolant, y) -> np.ndarray:
    return interp.evaluate(y)


def lebesgue_estimate(grid: CollocationGrid, samples: int = 100_000, seed: int = 0) -> float:
    """Sampled lower bound on the Lebesgue constant ``max_y sum_j |Psi_j(y)|``.

    Uses a scrambled Sobol sequence on the cube plus its corners.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    op = smolyak_operator(grid)
    N = grid.dim
    if grid.size == 1:
        return 1.0
    sampler = qmc.Sobol(d=N, scramble=True, seed=seed)
    Y = 2.0 * sampler.random(2 ** math.ceil(math.log2(samples)))[:samples] - 1.0
    if N <= 10:
        corners = np.array(list(itertools.product((-1.0, 1.0), repeat=N)))
        Y = np.vstack([Y, corners])
    best = 0.0
    for s in range(0, len(Y), _BATCH):
        B = op.basis_values(Y[s : s + _BATCH])
        best = max(best, float(np.abs(B).sum(axis=1).max()))
    return best
