"""Nested anisotropic Smolyak grids on Clenshaw-Curtis abscissas.

Levels are counted from 0: the all-ones multi-index has ``g = 0`` and the
level-0 grid is the single origin point.  A point's birth level is the
smallest ``w`` such that the point belongs to ``H_w``.

One-dimensional nodes are identified by an integer key on a dyadic lattice
(``k / 2**depth`` of the half-turn), so set unions between tensor grids are
exact and the nestedness ``H_{w-1} subset H_w`` holds bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

# Tolerance on g(l) <= L; anisotropic ratios such as 0.85/0.8 are inexact.
_LEVEL_TOL = 1e-9

DEFAULT_MAX_POINTS = 2_000_000


class GridSizeError(RuntimeError):
    """Raised when a requested grid exceeds the configured point cap."""


def growth_m(l: int) -> int:
    """Number of 1D Clenshaw-Curtis nodes on level ``l`` (``m(1) = 1``)."""
    if l < 1:
        raise ValueError(f"level must be >= 1, got {l}")
    return 1 if l == 1 else 2 ** (l - 1) + 1


def _m0(l: int) -> int:
    # growth rule extended with m(0) = 0
    return 0 if l == 0 else growth_m(l)


@lru_cache(maxsize=None)
def _node_from_turn(num: int, den: int) -> float:
    """Canonical node value ``-cos(pi * num / den)``, odd-symmetric and exact at 0."""
    if 2 * num == den:
        return 0.0
    if 2 * num > den:
        return -_node_from_turn(den - num, den)
    return -math.cos(math.pi * (num / den))


def _canonical(num: int, den: int) -> float:
    g = math.gcd(num, den)
    return _node_from_turn(num // g, den // g)


def cc_nodes(l: int) -> np.ndarray:
    """Clenshaw-Curtis nodes of level ``l`` in increasing order.

    Level 1 is ``[0]``; otherwise ``y_j = -cos(pi (j-1)/(m(l)-1))``.
    Values are canonical, so ``cc_nodes(l-1)`` is a bitwise subset of
    ``cc_nodes(l)``.
    """
    m = growth_m(l)
    if m == 1:
        return np.zeros(1)
    return np.array([_canonical(j, m - 1) for j in range(m)])


@lru_cache(maxsize=None)
def _new_nodes(l: int) -> tuple[tuple[int, int], ...]:
    """Nodes first appearing on 1D level ``l`` as (num, den) half-turn fractions."""
    if l == 1:
        return ((1, 2),)
    den = growth_m(l) - 1
    if l == 2:
        return ((0, 1), (1, 1))
    return tuple((j, den) for j in range(1, den, 2))


@dataclass(frozen=True)
class AnisotropyWeights:
    """Positive per-dimension weights; ``g`` scales by ``alpha_n / alpha_min``."""

    alpha: tuple[float, ...]

    def __post_init__(self) -> None:
        alpha = tuple(float(a) for a in self.alpha)
        if not alpha:
            raise ValueError("need at least one weight")
        if min(alpha) <= 0:
            raise ValueError("anisotropy weights must be positive")
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def isotropic(cls, dim: int) -> "AnisotropyWeights":
        return cls((1.0,) * dim)

    @property
    def dim(self) -> int:
        return len(self.alpha)

    @property
    def alpha_min(self) -> float:
        return min(self.alpha)

    @property
    def ratios(self) -> np.ndarray:
        return np.asarray(self.alpha) / self.alpha_min

    @property
    def is_isotropic(self) -> bool:
        return len(set(self.alpha)) == 1


def _as_weights(alpha, dim: int | None = None) -> AnisotropyWeights:
    if alpha is None:
        if dim is None:
            raise ValueError("dimension needed for isotropic weights")
        return AnisotropyWeights.isotropic(dim)
    if not isinstance(alpha, AnisotropyWeights):
        alpha = AnisotropyWeights(tuple(alpha))
    if dim is not None and alpha.dim != dim:
        raise ValueError(f"weights have dimension {alpha.dim}, expected {dim}")
    return alpha


def level_g(l: Sequence[int], alpha) -> float:
    """Anisotropic Smolyak level ``sum_n (alpha_n/alpha_min)(l_n - 1)``."""
    l = tuple(int(v) for v in l)
    alpha = _as_weights(alpha)
    if len(l) != alpha.dim:
        raise ValueError(f"multi-index has dimension {len(l)}, weights {alpha.dim}")
    if min(l) < 1:
        raise ValueError("multi-index components must be >= 1")
    return float(sum(r * (v - 1) for r, v in zip(alpha.ratios, l)))


def build_index_set(L: float, N: int, alpha=None) -> list[tuple[int, ...]]:
    """All multi-indices with ``g(l) <= L``, in lexicographic order.

    The set is downward closed because ``g`` is nondecreasing in each
    component.
    """
    if L < 0:
        raise ValueError("level must be nonnegative")
    alpha = _as_weights(alpha, N)
    ratios = alpha.ratios
    out: list[tuple[int, ...]] = []

    def rec(n: int, budget: float, prefix: list[int]) -> None:
        if n == N:
            out.append(tuple(prefix))
            return
        k = 0
        while ratios[n] * k <= budget + _LEVEL_TOL:
            prefix.append(k + 1)
            rec(n + 1, budget - ratios[n] * k, prefix)
            prefix.pop()
            k += 1

    rec(0, float(L), [])
    return out


def birth_level(l: Sequence[int], alpha) -> int:
    """Smallest integer grid level whose index set contains ``l``."""
    return max(0, math.ceil(level_g(l, alpha) - _LEVEL_TOL))


def count_points(W: int, N: int, alpha=None) -> int:
    """``M_W`` without building the grid (hierarchical-surplus enumeration)."""
    total = 0
    for l in build_index_set(W, N, alpha):
        total += math.prod(_m0(v) - _m0(v - 1) for v in l)
    return total


@dataclass(frozen=True, eq=False)
class CollocationGrid:
    """Nested sparse grid ``H_W`` with per-point birth levels.

    Points are ordered by birth level, then lexicographically by coordinate,
    so ``H_w`` is exactly the first ``M_w`` rows and a point's id equals its
    row index.
    """

    dim: int
    max_level: int
    alpha: AnisotropyWeights
    points: np.ndarray  # (M_W, N), coordinates in [-1, 1]
    levels: np.ndarray  # (M_W,), birth level of each point
    keys: tuple[tuple[int, ...], ...] = field(repr=False)
    depth: int = 1
    _index: dict = field(repr=False, compare=False, default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.levels)

    @property
    def ids(self) -> np.ndarray:
        return np.arange(self.size)

    def count(self, w: int) -> int:
        """``M_w``, the number of points with birth level ``<= w``."""
        return int(np.searchsorted(self.levels, w, side="right"))

    def new_count(self, w: int) -> int:
        """``Delta M_w``."""
        return self.count(w) - (self.count(w - 1) if w > 0 else 0)

    @property
    def counts(self) -> list[int]:
        return [self.count(w) for w in range(self.max_level + 1)]

    @property
    def new_counts(self) -> list[int]:
        return [self.new_count(w) for w in range(self.max_level + 1)]

    def level_slice(self, w: int) -> slice:
        """Row range of ``Delta H_w``."""
        start = self.count(w - 1) if w > 0 else 0
        return slice(start, self.count(w))

    def id_of(self, key: tuple[int, ...]) -> int:
        return self._index[key]

    def truncated(self, w: int) -> "CollocationGrid":
        """The grid ``H_w`` for ``w <= max_level`` (shares point order and ids)."""
        if not 0 <= w <= self.max_level:
            raise ValueError(f"level {w} outside 0..{self.max_level}")
        n = self.count(w)
        return _make_grid(self.dim, w, self.alpha, self.points[:n], self.levels[:n], self.keys[:n], self.depth)

    def index_set(self, w: int | None = None) -> list[tuple[int, ...]]:
        return build_index_set(self.max_level if w is None else w, self.dim, self.alpha)


def _make_grid(dim, W, alpha, points, levels, keys, depth) -> CollocationGrid:
    index = {k: i for i, k in enumerate(keys)}
    return CollocationGrid(dim, W, alpha, points, levels, tuple(keys), depth, index)


def point_key(l: int, j: int, depth: int) -> int:
    """Lattice key of node ``j`` (0-based) of 1D level ``l`` with ``2**depth`` cells."""
    m = growth_m(l)
    if m == 1:
        return 2 ** (depth - 1)
    return j * 2 ** (depth - (l - 1))


def grid_depth(index_set: Sequence[Sequence[int]]) -> int:
    return max(1, max(max(l) for l in index_set) - 1)


def build_grid(W: int, N: int, alpha=None, max_points: int = DEFAULT_MAX_POINTS) -> CollocationGrid:
    """Build ``H_W`` as the union of tensor grids over ``{l : g(l) <= W}``.

    Each point is generated once, from the multi-index of its per-dimension
    1D birth levels; its grid birth level is ``ceil(g)`` of that index.
    """
    if W < 0:
        raise ValueError("max level must be nonnegative")
    if N < 1:
        raise ValueError("dimension must be positive")
    alpha = _as_weights(alpha, N)
    index_set = build_index_set(W, N, alpha)
    total = sum(math.prod(_m0(v) - _m0(v - 1) for v in l) for l in index_set)
    if total > max_points:
        raise GridSizeError(f"grid with W={W}, N={N} has {total} points (cap {max_points})")

    depth = grid_depth(index_set)
    den = 2**depth
    rows: list[tuple[int, tuple[float, ...], tuple[int, ...]]] = []
    for l in index_set:
        w = birth_level(l, alpha)
        per_dim = []
        for v in l:
            per_dim.append([(num * (den // d), _canonical(num, d)) for num, d in _new_nodes(v)])
        for combo in _product(per_dim):
            key = tuple(c[0] for c in combo)
            coord = tuple(c[1] for c in combo)
            rows.append((w, coord, key))
    rows.sort(key=lambda r: (r[0], r[1]))
    points = np.array([r[1] for r in rows], dtype=float).reshape(len(rows), N)
    levels = np.array([r[0] for r in rows], dtype=int)
    keys = [r[2] for r in rows]
    return _make_grid(N, W, alpha, points, levels, keys, depth)


def _product(lists: list[list]) -> Iterator[tuple]:
    if not lists:
        yield ()
        return
    head, *rest = lists
    for item in head:
        for tail in _product(rest):
            yield (item,) + tail


def tensor_point_ids(grid: CollocationGrid, l: Sequence[int]) -> np.ndarray:
    """Ids of the full tensor grid ``theta^{l_1} x ... x theta^{l_N}``, C order.

    Every index in the grid's index set maps entirely into the grid.
    """
    depth = grid.depth
    axes = [[point_key(v, j, depth) for j in range(growth_m(v))] for v in l]
    ids = np.empty(math.prod(len(a) for a in axes), dtype=np.int64)
    for i, key in enumerate(_product(axes)):
        ids[i] = grid._index[key]
    return ids


def dump_grid(grid: CollocationGrid, path) -> None:
    """Write the grid as a text table: id, birth level, coordinates."""
    with open(path, "w") as fh:
        fh.write(f"# dim={grid.dim} max_level={grid.max_level} alpha={','.join(repr(a) for a in grid.alpha.alpha)}\n")
        fh.write("# id level " + " ".join(f"y{n + 1}" for n in range(grid.dim)) + "\n")
        for i in range(grid.size):
            coords = " ".join(repr(float(c)) for c in grid.points[i])
            fh.write(f"{i} {int(grid.levels[i])} {coords}\n")


def load_grid_table(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read a table written by :func:`dump_grid` as (ids, levels, points)."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append(line.split())
    ids = np.array([int(r[0]) for r in rows], dtype=int)
    levels = np.array([int(r[1]) for r in rows], dtype=int)
    points = np.array([[float(v) for v in r[2:]] for r in rows], dtype=float)
    return ids, levels, points


def load_grid(path) -> CollocationGrid:
    """Rebuild the grid described by a dumped table's header and check it matches."""
    with open(path) as fh:
        header = fh.readline()
    fields = dict(tok.split("=", 1) for tok in header.lstrip("# ").split())
    dim = int(fields["dim"])
    W = int(fields["max_level"])
    alpha = tuple(float(a) for a in fields["alpha"].split(","))
    grid = build_grid(W, dim, alpha)
    _, levels, points = load_grid_table(path)
    if not (np.array_equal(levels, grid.levels) and np.array_equal(points, grid.points)):
        raise ValueError(f"grid table {path} does not match its header")
    return grid
