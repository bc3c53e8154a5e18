"""Level-by-level collocation sweep with warm-started solves.

For each level ``w = 0..W`` every new point of ``Delta H_w`` is solved with
an initial guess chosen by the run mode:

``zero``
    the zero vector;
``accelerated``
    the level-``(w-1)`` interpolant of all committed solutions, evaluated at
    the new point;
``nearest_neighbor``
    the committed solution at the closest earlier point.

Solutions of a level are committed together, so predictions only ever read
the previous level (a level barrier).  Costs follow a simple flop model:
one CG iteration costs ``C_D * M_h`` and evaluating the interpolant at one new
point costs ``M_h (2 M_{w-1} - 1)``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import fem, solvers
from .interpolant import VectorValuedInterpolant, smolyak_operator
from .model_problems import anisotropy_weights_ex2, make_problem
from .sparse_grid import CollocationGrid, build_grid

SCHEMA_VERSION = "1.0"
MODES = ("zero", "accelerated", "nearest_neighbor")
PRECONDITIONERS = ("identity", "diagonal", "ic0", "interpolated_ic0")
_SOURCE = {"zero": "zero", "accelerated": "interpolant", "nearest_neighbor": "nearest-neighbor"}


class ConfigError(ValueError):
    pass


class BarrierError(RuntimeError):
    """A prediction asked for a level whose solutions are not committed."""


@dataclass
class RunConfig:
    """Everything needed to reproduce one sweep.

    ``mesh_n`` is the number of elements in 1D or cells per side in 2D.
    ``alpha`` may be ``None`` (isotropic) or the string ``"ex52"`` for the
    built-in anisotropic weights.
    """

    problem: str = "ex51"
    N: Optional[int] = None
    R_c: float = 1.0 / 64.0
    mesh_n: int = 256
    W: int = 3
    alpha: object = None
    mode: str = "accelerated"
    tau: float = 1e-3
    criterion: str = "abs"
    rel_tol: float = 1e-8
    preconditioner: str = "identity"
    L_PC: int = 2
    C_D: int = 5
    seed: int = 0
    max_iter: Optional[int] = None
    workers: int = 1
    diagnostics: bool = False
    reference: str = "none"  # "none" or "level" (same mesh, level W+1)

    def validate(self) -> None:
        if self.W < 0:
            raise ConfigError("W must be nonnegative")
        if not self.tau > 0 or not self.rel_tol > 0:
            raise ConfigError("tolerances must be positive")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.preconditioner not in PRECONDITIONERS:
            raise ConfigError(f"preconditioner must be one of {PRECONDITIONERS}")
        if self.criterion not in ("abs", "rel"):
            raise ConfigError("criterion must be 'abs' or 'rel'")
        if self.mesh_n < 1 or self.workers < 1 or self.L_PC < 0 or self.C_D < 1:
            raise ConfigError("mesh_n, workers, C_D must be positive and L_PC nonnegative")
        if self.reference not in ("none", "level"):
            raise ConfigError("reference must be 'none' or 'level'")
        try:
            self.make_problem()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def make_problem(self):
        return make_problem(self.problem, self.N, self.R_c)

    def make_mesh(self):
        dim = self.make_problem().dim
        return fem.interval_mesh(self.mesh_n) if dim == 1 else fem.unit_square_mesh(self.mesh_n)

    def weights(self, n_params: int):
        if self.alpha is None or self.alpha == "isotropic":
            return None
        if self.alpha == "ex52":
            return anisotropy_weights_ex2()[:n_params]
        return tuple(float(a) for a in self.alpha)

    def with_(self, **kw) -> "RunConfig":
        d = asdict(self)
        d.update(kw)
        return RunConfig(**d)


@dataclass
class LevelStats:
    level: int
    new_points: int
    points: int
    iterations: list
    wall_time: float
    error: Optional[float] = None

    @property
    def total(self) -> int:
        return int(sum(self.iterations))

    @property
    def mean(self) -> float:
        return float(np.mean(self.iterations)) if self.iterations else 0.0

    @property
    def min(self) -> int:
        return int(min(self.iterations)) if self.iterations else 0

    @property
    def max(self) -> int:
        return int(max(self.iterations)) if self.iterations else 0

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "new_points": self.new_points,
            "points": self.points,
            "iterations": [int(k) for k in self.iterations],
            "mean": self.mean,
            "min": self.min,
            "max": self.max,
            "total": self.total,
            "wall_time": self.wall_time,
            "error": self.error,
        }


@dataclass
class ExperimentReport:
    config: RunConfig
    M_h: int
    counts: list
    levels: list
    points: list
    converged: bool
    C_int: int
    n_params: int = 0
    nonlinear: bool = False
    wall_time: float = 0.0
    bounds: list = field(default_factory=list)
    # in-memory only
    solutions: Optional[np.ndarray] = field(default=None, repr=False)
    expectations: list = field(default_factory=list, repr=False)
    grid: Optional[CollocationGrid] = field(default=None, repr=False)

    @property
    def mode(self) -> str:
        return self.config.mode

    @property
    def K(self) -> int:
        return int(sum(lv.total for lv in self.levels))

    @property
    def C_iter(self) -> int:
        return int(self.config.C_D) * int(self.M_h)

    @property
    def cost(self) -> int:
        return self.C_iter * self.K + self.C_int

    @property
    def errors(self) -> list:
        return [(lv.level, lv.error) for lv in self.levels]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": asdict(self.config),
            "mode": self.mode,
            "nonlinear": self.nonlinear,
            "converged": self.converged,
            "M_h": self.M_h,
            "n_params": self.n_params,
            "counts": list(self.counts),
            "K": self.K,
            "C_iter": self.C_iter,
            "C_int": self.C_int,
            "cost": self.cost,
            "wall_time": self.wall_time,
            "levels": [lv.to_dict() for lv in self.levels],
            "points": self.points,
            "bounds": self.bounds,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False, default=_json_default)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        cfg = RunConfig(**d["config"])
        levels = [
            LevelStats(lv["level"], lv["new_points"], lv["points"], list(lv["iterations"]), lv["wall_time"], lv["error"])
            for lv in d["levels"]
        ]
        return cls(cfg, d["M_h"], list(d["counts"]), levels, list(d["points"]), d["converged"], int(d["C_int"]),
                   int(d["n_params"]), d.get("nonlinear", False), d.get("wall_time", 0.0), list(d.get("bounds", [])))


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


# cost arithmetic -----------------------------------------------------------


def interpolation_cost(counts, M_h: int) -> int:
    """``sum_{w>=1} M_h * Delta M_w * (2 M_{w-1} - 1)``."""
    total = 0
    for w in range(1, len(counts)):
        total += int(M_h) * (int(counts[w]) - int(counts[w - 1])) * (2 * int(counts[w - 1]) - 1)
    return total


def cost_savings(K_zero: int, K_acc: int, M_h: int, C_D: int, counts) -> float:
    """``(C_zero - C_acc) / C_zero`` with ``C_acc`` charged for interpolation."""
    c_iter = int(C_D) * int(M_h)
    c_zero = c_iter * int(K_zero)
    c_acc = c_iter * int(K_acc) + interpolation_cost(counts, M_h)
    return (c_zero - c_acc) / c_zero


def iteration_savings(K_zero: int, K_other: int) -> float:
    return (K_zero - K_other) / K_zero if K_zero else 0.0


# predictions -----------------------------------------------------------------


def predict_initial(interp: Optional[VectorValuedInterpolant], y, n_dofs: Optional[int] = None) -> np.ndarray:
    """Warm start from the previous level's interpolant (zero when there is none)."""
    if interp is None:
        if n_dofs is None:
            raise BarrierError("no committed level to predict from")
        return np.zeros(n_dofs)
    return interp.evaluate(y)


def predict_nearest(prior_points, prior_solutions, y, n_dofs: Optional[int] = None) -> np.ndarray:
    """Solution stored at the Euclidean-nearest prior point; ties go to the lowest id."""
    prior_points = np.asarray(prior_points, dtype=float)
    if len(prior_points) == 0:
        if n_dofs is None:
            raise BarrierError("no prior points and unknown system size")
        return np.zeros(n_dofs)
    d2 = ((prior_points - np.asarray(y, dtype=float)) ** 2).sum(axis=1)
    return np.array(prior_solutions[int(np.argmin(d2))], dtype=float)


def _nearest_ids(prior_points: np.ndarray, Y: np.ndarray) -> np.ndarray:
    d2 = ((Y[:, None, :] - prior_points[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


# sweep -----------------------------------------------------------------------


def preconditioned_operator(A, pc):
    """Symmetric form of ``P^{-1} A`` for condition estimates."""
    if isinstance(pc, solvers.IdentityPreconditioner):
        return A
    if isinstance(pc, solvers.DiagonalPreconditioner):
        s = sp.diags(1.0 / np.sqrt(pc.diag))
        return sp.csr_matrix(s @ A @ s)
    if isinstance(pc, solvers.IC0Preconditioner):
        lu = pc._lu
        n = A.shape[0]
        return spla.LinearOperator((n, n), matvec=lambda v: lu.solve(A @ lu.solve(v, trans="T")), dtype=float)
    raise ValueError(f"no symmetric form for {pc.kind} preconditioner")


class _Sweep:
    def __init__(self, cfg: RunConfig):
        cfg.validate()
        self.cfg = cfg
        self.problem = cfg.make_problem()
        self.mesh = cfg.make_mesh()
        self.asm = fem.get_assembler(self.problem, self.mesh)
        self.nonlinear = self.problem.nonlinearity is not None
        self.grid = build_grid(cfg.W, self.problem.n_params, cfg.weights(self.problem.n_params))
        self.M_h = self.asm.n_free
        self.solutions = np.zeros((self.grid.size, self.M_h))
        self.committed = -1
        self.base_pcs: list = []
        self._pc_grid = None
        self.stop = solvers.AbsResidual(cfg.tau) if cfg.criterion == "abs" else solvers.RelResidual(cfg.tau)

    # per-point work
    def _pc_for(self, A, w: int, y):
        kind = self.cfg.preconditioner
        if kind != "interpolated_ic0":
            return solvers.make_preconditioner(kind, A)
        if w <= self.cfg.L_PC:
            return solvers.ic0_factor(A)
        return solvers.interpolate_preconditioner(self.base_pcs, self._pc_grid, y)

    def solve_point(self, j: int, w: int, x0: np.ndarray) -> tuple:
        y = self.grid.points[j]
        source = _SOURCE[self.cfg.mode] if w > 0 else "zero"
        if not np.any(x0):
            source = "zero"
        if self.nonlinear:
            c, rep = solvers.nonlinear_solve(self.problem, self.mesh, y, x0, self.cfg.rel_tol,
                                             self.cfg.max_iter or 100, source)
            return c, rep, None
        system = self.asm.assemble(y)
        pc = self._pc_for(system.matrix, w, y)
        c, rep = solvers.cg_solve(system, x0, pc, self.stop, self.cfg.max_iter, source)
        diag = None
        if self.cfg.diagnostics and source == "zero":
            try:
                op = preconditioned_operator(system.matrix, pc)
            except ValueError:
                op = None  # interpolated preconditioners have no factored symmetric form
            kappa = None if op is None else fem.estimate_condition(op, tol=1e-8, seed=self.cfg.seed)
            c_exact = spla.spsolve(system.matrix.tocsc(), system.rhs)
            diag = {"kappa": kappa, "c_A_norm": float(math.sqrt(max(c_exact @ (system.matrix @ c_exact), 0.0)))}
        return c, rep, (pc if self.cfg.preconditioner == "interpolated_ic0" and w <= self.cfg.L_PC else None, diag)

    def predictions(self, w: int, ids: np.ndarray) -> np.ndarray:
        if w == 0 or self.cfg.mode == "zero":
            return np.zeros((len(ids), self.M_h))
        if self.committed != w - 1:
            raise BarrierError(f"level {w - 1} is not committed")
        n_prev = self.grid.count(w - 1)
        Y = self.grid.points[ids]
        if self.cfg.mode == "nearest_neighbor":
            return self.solutions[_nearest_ids(self.grid.points[:n_prev], Y)]
        op = smolyak_operator(self._trunc(w - 1))
        return op.basis_values(Y) @ self.solutions[:n_prev]

    def _trunc(self, w: int) -> CollocationGrid:
        cache = self.__dict__.setdefault("_truncs", {})
        if w not in cache:
            cache[w] = self.grid if w == self.grid.max_level else self.grid.truncated(w)
        return cache[w]

    def run(self, reference: Optional[np.ndarray] = None) -> ExperimentReport:
        cfg = self.cfg
        levels, points = [], []
        converged = True
        mass = fem.mass_matrix(self.problem, self.mesh) if reference is not None else None
        expectations = []
        pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None
        t_run = time.perf_counter()
        try:
            for w in range(cfg.W + 1):
                t0 = time.perf_counter()
                sl = self.grid.level_slice(w)
                ids = np.arange(sl.start, sl.stop)
                X0 = self.predictions(w, ids)
                work = lambda i: self.solve_point(int(ids[i]), w, X0[i])
                results = list(pool.map(work, range(len(ids)))) if pool else [work(i) for i in range(len(ids))]
                its = []
                for i, (c, rep, extra) in enumerate(results):
                    j = int(ids[i])
                    self.solutions[j] = c
                    its.append(rep.iterations)
                    converged &= rep.converged
                    rec = {"id": j, "level": w, "iterations": rep.iterations, "converged": rep.converged,
                           "source": rep.source, "residual": rep.residual}
                    if rep.fallback:
                        rec["fallback"] = True
                    if extra is not None:
                        pc, diag = extra
                        if pc is not None:
                            self.base_pcs.append(pc)
                        if diag is not None:
                            rec.update(diag)
                    points.append(rec)
                self.committed = w
                if cfg.preconditioner == "interpolated_ic0" and w == cfg.L_PC:
                    self._pc_grid = self._trunc(w)
                n_w = self.grid.count(w)
                err = None
                if reference is not None or cfg.reference != "none":
                    E = smolyak_operator(self._trunc(w)).quadrature_weights() @ self.solutions[:n_w]
                    expectations.append(E)
                    if reference is not None:
                        d = E - reference
                        err = float(math.sqrt(max(d @ (mass @ d), 0.0)))
                levels.append(LevelStats(w, len(ids), n_w, its, time.perf_counter() - t0, err))
        finally:
            if pool:
                pool.shutdown()
        C_int = interpolation_cost(self.grid.counts, self.M_h) if cfg.mode == "accelerated" else 0
        return ExperimentReport(cfg, self.M_h, self.grid.counts, levels, points, bool(converged), C_int,
                                self.problem.n_params, self.nonlinear, time.perf_counter() - t_run, [], self.solutions,
                                expectations, self.grid)


def reference_expectation(cfg: RunConfig) -> np.ndarray:
    """``E[u_{h,W+1}]`` on the same mesh, from an accelerated run at level ``W+1``."""
    ref = _Sweep(cfg.with_(W=cfg.W + 1, mode="accelerated", reference="none", diagnostics=False, workers=cfg.workers))
    rep = ref.run()
    return smolyak_operator(ref.grid).quadrature_weights() @ rep.solutions


def run_experiment(cfg: RunConfig, reference: Optional[np.ndarray] = None) -> ExperimentReport:
    """Run one sweep; per-level errors are filled in when a reference is given
    or ``cfg.reference == "level"``."""
    if reference is None and cfg.reference == "level":
        reference = reference_expectation(cfg)
    return _Sweep(cfg).run(reference)


def error_curve(report: ExperimentReport, reference, problem=None, mesh=None) -> list:
    """``[(w, ||E[u_w] - E_ref||_{L^2(D)})]`` for a report run in memory.

    ``reference`` is an expectation vector or a :class:`VectorValuedInterpolant`.
    """
    if report.solutions is None or report.grid is None:
        raise ValueError("report carries no solutions")
    ref = reference.quadrature() if isinstance(reference, VectorValuedInterpolant) else np.asarray(reference, float)
    if ref.shape != (report.M_h,):
        raise ValueError("reference lives on a different mesh")
    problem = problem or report.config.make_problem()
    mesh = mesh or report.config.make_mesh()
    M = fem.mass_matrix(problem, mesh)
    out = []
    for w in range(report.grid.max_level + 1):
        g = report.grid if w == report.grid.max_level else report.grid.truncated(w)
        E = smolyak_operator(g).quadrature_weights() @ report.solutions[: g.size]
        d = E - ref
        out.append((w, float(math.sqrt(max(d @ (M @ d), 0.0)))))
    return out


# comparison and output ---------------------------------------------------------


def compare(zero: ExperimentReport, other: ExperimentReport) -> dict:
    """Totals, iteration savings and cost savings of ``other`` against ``zero``."""
    if list(zero.counts) != list(other.counts) or zero.M_h != other.M_h:
        raise ValueError("reports were run on different grids or meshes")
    c_zero = zero.C_iter * zero.K
    c_other = other.C_iter * other.K + other.C_int
    return {
        "K_zero": zero.K,
        "K_other": other.K,
        "mode": other.mode,
        "iteration_savings": iteration_savings(zero.K, other.K),
        "C_zero": c_zero,
        "C_other": c_other,
        "cost_savings": (c_zero - c_other) / c_zero if c_zero else 0.0,
    }


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return f"{float(v):.6g}"


def aligned_csv(header: list, rows: list) -> str:
    """Comma-separated table with each column padded to a common width."""
    cells = [list(header)] + [[_fmt(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    buf = io.StringIO()
    for r in cells:
        buf.write(", ".join(c.rjust(wd) for c, wd in zip(r, widths)).rstrip() + "\n")
    return buf.getvalue()


def read_aligned_csv(text: str) -> list[dict]:
    reader = csv.reader(io.StringIO(text), skipinitialspace=True)
    rows = list(reader)
    return [dict(zip(rows[0], r)) for r in rows[1:] if r]


LEVEL_COLUMNS = ["level", "new_points", "points", "mean_iterations", "min_iterations", "max_iterations",
                 "K_level", "K_cumulative", "error"]

COMPARISON_COLUMNS = ["level", "points", "error", "K_zero", "K_acc", "savings"]

TIMING_COLUMNS = ["level", "points", "mean_outer_acc", "mean_outer_zero", "time_acc", "time_zero", "savings"]


def level_table(report: ExperimentReport) -> str:
    """Per-level iteration statistics (deterministic: no timings)."""
    rows, cum = [], 0
    for lv in report.levels:
        cum += lv.total
        rows.append([lv.level, lv.new_points, lv.points, lv.mean, lv.min, lv.max, lv.total, cum, lv.error])
    return aligned_csv(LEVEL_COLUMNS, rows)


def comparison_table(zero: ExperimentReport, acc: ExperimentReport) -> str:
    """Per maximum level ``w``: points, error, cumulative ``K`` for both modes and
    iteration savings."""
    if list(zero.counts) != list(acc.counts):
        raise ValueError("reports were run on different grids")
    rows, kz, ka = [], 0, 0
    for lz, la in zip(zero.levels, acc.levels):
        kz += lz.total
        ka += la.total
        err = la.error if la.error is not None else lz.error
        rows.append([lz.level, lz.points, err, kz, ka, iteration_savings(kz, ka)])
    return aligned_csv(COMPARISON_COLUMNS, rows)


def nonlinear_time_table(zero: ExperimentReport, acc: ExperimentReport) -> str:
    """Cumulative wall time up to each level for both modes and the savings."""
    rows, tz, ta = [], 0.0, 0.0
    for lz, la in zip(zero.levels, acc.levels):
        tz += lz.wall_time
        ta += la.wall_time
        rows.append([lz.level, lz.points, la.mean, lz.mean, ta, tz, (tz - ta) / tz if tz else 0.0])
    return aligned_csv(TIMING_COLUMNS, rows)
