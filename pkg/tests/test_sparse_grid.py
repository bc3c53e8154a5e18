import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from accsc.model_problems import anisotropy_weights_ex2
from accsc.sparse_grid import (
    GridSizeError,
    build_grid,
    build_index_set,
    cc_nodes,
    count_points,
    dump_grid,
    growth_m,
    level_g,
    load_grid,
    tensor_point_ids,
)


def brute_force_points(W, N, alpha=None):
    """Independent oracle: union of tensor grids, nodes rounded to 13 digits."""
    alpha = np.ones(N) if alpha is None else np.asarray(alpha, float)
    ratios = alpha / alpha.min()
    pts = set()
    for l in itertools.product(range(1, W + 2 + int(W / ratios.min()) + 1), repeat=N):
        if sum(r * (v - 1) for r, v in zip(ratios, l)) > W + 1e-9:
            continue
        axes = []
        for v in l:
            m = 1 if v == 1 else 2 ** (v - 1) + 1
            axes.append([0.0] if m == 1 else [round(-math.cos(math.pi * j / (m - 1)), 13) + 0.0 for j in range(m)])
        pts.update(itertools.product(*axes))
    return pts


def test_growth_rule():
    assert [growth_m(l) for l in (1, 2, 4)] == [1, 3, 9]
    with pytest.raises(ValueError):
        growth_m(0)


def test_level_function():
    assert level_g((1, 1, 1), (1, 2, 3)) == 0
    assert level_g((2, 1), (1, 1)) == 1
    assert level_g((2, 2), (0.85, 1.7)) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        level_g((1, 1), (1, 1, 1))


def test_cc_nodes_examples():
    assert cc_nodes(1).tolist() == [0.0]
    assert cc_nodes(2).tolist() == [-1.0, 0.0, 1.0]
    h = math.sqrt(2) / 2
    assert np.allclose(cc_nodes(3), [-1, -h, 0, h, 1], atol=1e-15)
    with pytest.raises(ValueError):
        cc_nodes(0)


@pytest.mark.parametrize("l", range(2, 9))
def test_cc_nodes_nested_bitwise(l):
    assert set(cc_nodes(l - 1).tolist()) <= set(cc_nodes(l).tolist())
    assert np.all(np.diff(cc_nodes(l)) > 0)


def test_index_set_examples():
    assert build_index_set(0, 3) == [(1, 1, 1)]
    assert sorted(build_index_set(1, 2)) == sorted([(1, 1), (2, 1), (1, 2)])
    two = build_index_set(2, 2)
    assert len(two) == 6 and {(3, 1), (2, 2), (1, 3)} <= set(two)


def test_reference_counts_n4():
    grid = build_grid(7, 4)
    assert grid.counts[3:] == [137, 401, 1105, 2929, 7537]


def test_small_counts():
    assert build_grid(0, 5).size == 1 and np.all(build_grid(0, 5).points == 0)
    g = build_grid(1, 2)
    assert g.size == 5
    assert {tuple(p) for p in g.points} == {(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)}


@pytest.mark.parametrize("W,N", [(3, 2), (4, 2), (3, 3), (2, 4)])
def test_grid_matches_brute_force_union(W, N):
    grid = build_grid(W, N)
    pts = {tuple(round(float(c), 13) + 0.0 for c in p) for p in grid.points}
    assert pts == brute_force_points(W, N)
    assert len(pts) == grid.size


def test_anisotropic_grid_matches_brute_force():
    alpha = (0.85, 0.8, 1.6)
    grid = build_grid(3, 3, alpha)
    pts = {tuple(round(float(c), 13) + 0.0 for c in p) for p in grid.points}
    assert pts == brute_force_points(3, 3, alpha)


@given(st.integers(1, 4), st.integers(0, 5))
def test_count_formula_and_level_bookkeeping(N, W):
    grid = build_grid(W, N)
    assert grid.size == count_points(W, N)
    assert sum(grid.new_counts) == grid.counts[-1] == grid.size
    assert np.all(np.diff(grid.levels) >= 0)


@given(st.integers(1, 3), st.integers(1, 4))
def test_nestedness(N, W):
    grid = build_grid(W, N)
    for w in range(1, W + 1):
        lower = build_grid(w - 1, N)
        assert np.array_equal(grid.points[: lower.size], lower.points)
        assert np.array_equal(grid.truncated(w - 1).points, lower.points)


@given(st.integers(1, 4), st.floats(0, 5), st.lists(st.floats(0.5, 4), min_size=4, max_size=4))
def test_index_sets_downward_closed(N, L, alpha):
    alpha = alpha[:N]
    members = set(build_index_set(L, N, alpha))
    for l in members:
        for n in range(N):
            if l[n] > 1:
                assert l[:n] + (l[n] - 1,) + l[n + 1 :] in members
        assert level_g(l, alpha) <= L + 1e-9


def test_every_tensor_grid_lives_in_the_grid():
    grid = build_grid(4, 3)
    for l in grid.index_set():
        ids = tensor_point_ids(grid, l)
        assert len(set(ids.tolist())) == math.prod(growth_m(v) for v in l)


@pytest.mark.parametrize("W", [2, 3])
def test_anisotropic_ex2_grid_is_smaller(W):
    assert count_points(W, 11, anisotropy_weights_ex2()) < count_points(W, 11)


def test_points_sorted_within_level():
    grid = build_grid(3, 2)
    for w in range(4):
        block = [tuple(p) for p in grid.points[grid.level_slice(w)]]
        assert block == sorted(block)


def test_dump_and_load_roundtrip(tmp_path):
    grid = build_grid(3, 3, (1.0, 1.2, 2.0))
    path = tmp_path / "g.txt"
    dump_grid(grid, path)
    again = load_grid(path)
    assert np.array_equal(again.points, grid.points)
    assert np.array_equal(again.levels, grid.levels)


def test_size_cap():
    with pytest.raises(GridSizeError):
        build_grid(7, 4, max_points=1000)
