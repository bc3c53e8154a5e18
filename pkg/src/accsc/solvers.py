"""Preconditioned conjugate gradients and a Picard/Newton nonlinear solver.

Preconditioners are objects with an ``apply(r)`` method returning ``P^{-1} r``.
CG stops on the preconditioned residual norm ``sqrt(r^T P^{-1} r)``, either
in absolute terms or relative to its value for the right-hand side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.linalg as la
import scipy.sparse.linalg as spla

GUESS_SOURCES = ("zero", "interpolant", "nearest-neighbor", "given")

PICARD_SWITCH = 1e-2
DIVERGENCE_STREAK = 5
MAX_HALVINGS = 20


class SolverError(RuntimeError):
    """Non-finite data or an unrecoverable breakdown."""


class FactorizationError(SolverError):
    pass


# preconditioners ---------------------------------------------------------


class Preconditioner:
    kind = "abstract"

    def apply(self, r: np.ndarray) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def __call__(self, r):
        return self.apply(r)


class IdentityPreconditioner(Preconditioner):
    kind = "identity"

    def apply(self, r):
        return np.array(r, dtype=float, copy=True)


class DiagonalPreconditioner(Preconditioner):
    kind = "diagonal"

    def __init__(self, A):
        d = np.asarray(sp.csr_matrix(A).diagonal(), dtype=float)
        if np.any(d <= 0) or not np.all(np.isfinite(d)):
            raise SolverError("diagonal preconditioner needs a positive diagonal")
        self.diag = d
        self.inv = 1.0 / d

    def apply(self, r):
        return self.inv * r


class IC0Preconditioner(Preconditioner):
    """``(L L^T)^{-1}`` with ``L`` the zero-fill incomplete Cholesky factor."""

    kind = "ic0"

    def __init__(self, L: sp.csr_matrix, shift: float = 0.0):
        self.L = sp.csr_matrix(L)
        self.shift = shift
        # SuperLU without reordering or pivoting reproduces L itself, and its
        # triangular solves are much faster than spsolve_triangular
        self._lu = spla.splu(self.L.tocsc(), permc_spec="NATURAL", diag_pivot_thresh=0.0)

    def apply(self, r):
        return self._lu.solve(self._lu.solve(np.asarray(r, dtype=float)), trans="T")


class InterpolatedPreconditioner(Preconditioner):
    """``r -> sum_j w_j P_j^{-1} r``; symmetric but possibly indefinite."""

    kind = "interpolated"

    def __init__(self, weights: np.ndarray, bases: Sequence[Preconditioner]):
        weights = np.asarray(weights, dtype=float)
        if len(weights) != len(bases):
            raise ValueError("one weight per base preconditioner")
        if not np.all(np.isfinite(weights)):
            raise SolverError("non-finite interpolation weights")
        keep = np.flatnonzero(weights != 0.0)
        self.weights = weights[keep]
        self.bases = [bases[i] for i in keep]

    def apply(self, r):
        out = np.zeros(len(r))
        for w, P in zip(self.weights, self.bases):
            out += w * P.apply(r)
        return out


def ic0_factor(A, max_shifts: int = 30, first_shift: float = 1e-12) -> IC0Preconditioner:
    """Zero-fill incomplete Cholesky on the lower-triangular pattern of ``A``.

    A nonpositive pivot triggers a retry with ``A + delta diag(A)``,
    ``delta`` doubling from ``first_shift``.
    """
    A = sp.csr_matrix(A)
    low = sp.tril(A, format="csr")
    low.sort_indices()
    diag = A.diagonal()
    delta = 0.0
    for attempt in range(max_shifts + 1):
        L = _ic0_attempt(low, diag * delta)
        if L is not None:
            return IC0Preconditioner(L, delta)
        delta = first_shift if attempt == 0 else 2.0 * delta
    raise FactorizationError(f"IC0 failed after {max_shifts} diagonal shifts")


def _ic0_attempt(low: sp.csr_matrix, shift: np.ndarray) -> Optional[sp.csr_matrix]:
    n = low.shape[0]
    indptr, indices = low.indptr, low.indices
    data = low.data.astype(float).copy()
    # row-wise map column -> slot
    rows = [dict(zip(indices[indptr[i] : indptr[i + 1]], range(indptr[i], indptr[i + 1]))) for i in range(n)]
    for i in range(n):
        cols_i = rows[i]
        for k in indices[indptr[i] : indptr[i + 1]]:
            if k == i:
                break
            # L_ik = (a_ik - sum_{j<k} L_ij L_kj) / L_kk
            s = data[cols_i[k]]
            rk = rows[k]
            for j, slot in cols_i.items():
                if j < k and j in rk:
                    s -= data[slot] * data[rk[j]]
            data[cols_i[k]] = s / data[rk[k]]
        if i not in cols_i:
            return None
        s = data[cols_i[i]] + shift[i]
        for j, slot in cols_i.items():
            if j < i:
                s -= data[slot] ** 2
        if not s > 0.0:
            return None
        data[cols_i[i]] = math.sqrt(s)
    return sp.csr_matrix((data, indices.copy(), indptr.copy()), shape=low.shape)


def interpolate_preconditioner(pcs: Sequence[Preconditioner], grid, y) -> Preconditioner:
    """Lagrange-weighted combination of per-point preconditioners on ``grid``.

    ``y`` is a reference-cube point.  If ``y`` is a grid point the single
    base preconditioner there is returned.
    """
    from .interpolant import smolyak_operator

    if len(pcs) != grid.size:
        raise ValueError(f"need {grid.size} base preconditioners, got {len(pcs)}")
    try:
        w = smolyak_operator(grid).basis_values(np.atleast_2d(y))[0]
    except ValueError as exc:
        raise SolverError(f"cannot evaluate interpolation weights: {exc}") from exc
    nz = np.flatnonzero(w)
    if len(nz) == 1 and w[nz[0]] == 1.0:
        return pcs[nz[0]]
    return InterpolatedPreconditioner(w, pcs)


def make_preconditioner(kind: str, A) -> Preconditioner:
    if kind == "identity":
        return IdentityPreconditioner()
    if kind == "diagonal":
        return DiagonalPreconditioner(A)
    if kind == "ic0":
        return ic0_factor(A)
    raise ValueError(f"unknown preconditioner {kind!r}")


# conjugate gradients ------------------------------------------------------


@dataclass(frozen=True)
class AbsResidual:
    tau: float


@dataclass(frozen=True)
class RelResidual:
    tau: float


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    source: str = "zero"
    flops: int = 0
    true_residual: float = float("nan")
    fallback: bool = False
    extras: dict = field(default_factory=dict)


def cg(A, b, x0=None, M=None, tol=1e-10, criterion="abs", max_iter=None):
    """Plain PCG returning ``(x, info)``; ``info`` is a dict.

    ``M`` is a callable for ``P^{-1}`` (identity when ``None``).  If
    ``M`` is flagged indefinite mid-solve, the caller decides what to do:
    ``info["indefinite"]`` is set and the current iterate is returned.
    """
    b = np.asarray(b, dtype=float)
    n = len(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float, copy=True)
    if x.shape != b.shape:
        raise ValueError("initial guess and right-hand side differ in length")
    if not (np.all(np.isfinite(b)) and np.all(np.isfinite(x))):
        raise SolverError("non-finite right-hand side or initial guess")
    if max_iter is None:
        max_iter = 10 * n + 100
    apply = (lambda v: v.copy()) if M is None else M

    if criterion == "rel":
        zb = apply(b)
        scale = math.sqrt(max(float(b @ zb), 0.0))
        target = tol * (scale if scale > 0 else 1.0)
    elif criterion == "abs":
        target = tol
    else:
        raise ValueError(f"unknown stopping criterion {criterion!r}")

    r = b - A @ x
    z = apply(r)
    rz = float(r @ z)
    info = {"iterations": 0, "indefinite": False, "converged": False}
    if rz < 0.0:
        info.update(indefinite=True, residual=float("nan"))
        return x, info
    res = math.sqrt(rz)
    if res <= target:
        info.update(converged=True, residual=res)
        return x, info
    p = z.copy()
    k = 0
    while k < max_iter:
        Ap = A @ p
        pAp = float(p @ Ap)
        if not np.isfinite(pAp):
            raise SolverError("non-finite values during CG")
        if pAp <= 0.0:
            info.update(indefinite=True, residual=res, iterations=k)
            return x, info
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = apply(r)
        rz_new = float(r @ z)
        k += 1
        if rz_new < 0.0:
            info.update(indefinite=True, residual=res, iterations=k)
            return x, info
        res = math.sqrt(rz_new)
        if res <= target:
            info.update(converged=True, residual=res, iterations=k)
            return x, info
        p = z + (rz_new / rz) * p
        rz = rz_new
    info.update(residual=res, iterations=k)
    return x, info


def _stop_of(stop) -> tuple[float, str]:
    if isinstance(stop, AbsResidual):
        return stop.tau, "abs"
    if isinstance(stop, RelResidual):
        return stop.tau, "rel"
    raise ValueError("stop must be AbsResidual or RelResidual")


def cg_solve(system, x0=None, pc: Optional[Preconditioner] = None, stop=AbsResidual(1e-10),
             max_iter: Optional[int] = None, source: str = "zero"):
    """Solve one assembled system and return ``(solution, SolveReport)``.

    An indefinite :class:`InterpolatedPreconditioner` is replaced by the
    diagonal preconditioner and CG restarts from the current iterate; the
    report's ``fallback`` flag records it and iterations of both phases count.
    """
    A, b = system.matrix, system.rhs
    if A.shape[0] != len(b):
        raise ValueError("matrix and right-hand side sizes differ")
    if source not in GUESS_SOURCES:
        raise ValueError(f"unknown guess source {source!r}")
    tau, crit = _stop_of(stop)
    pc = pc or IdentityPreconditioner()
    x, info = cg(A, b, x0, pc.apply, tau, crit, max_iter)
    its = info["iterations"]
    fallback = False
    if info["indefinite"]:
        if not isinstance(pc, InterpolatedPreconditioner):
            raise SolverError(f"{pc.kind} preconditioner is not positive definite")
        fallback = True
        pc = DiagonalPreconditioner(A)
        rest = None if max_iter is None else max(max_iter - its, 0)
        x, info = cg(A, b, x, pc.apply, tau, crit, rest)
        its += info["iterations"]
    n = len(b)
    flops = its * (2 * A.nnz + 10 * n)
    true_res = float(np.linalg.norm(b - A @ x))
    report = SolveReport(its, float(info["residual"]), bool(info["converged"]), source, flops, true_res, fallback)
    return x, report


# nonlinear ------------------------------------------------------------------


def nonlinear_solve(problem, mesh, y, x0=None, rel_tol: float = 1e-8, max_iter: int = 100,
                    source: str = "zero"):
    """Picard iterations, then Newton, for ``-(a u')' + F[u] = f``.

    Picard solves ``A c_new = f - F[c_old]``; once the relative step
    ``||dc|| / ||c_new||`` drops below 1e-2 (or Picard stops contracting)
    the iteration switches to Newton with the analytic Jacobian and a
    backtracking line search on the residual norm.  Converged when a step is below ``rel_tol``.
    Each linear solve is one outer iteration; a first step already below
    ``rel_tol`` counts as zero iterations and leaves ``x0`` unchanged.
    """
    from .fem import get_assembler

    if problem.nonlinearity is None:
        raise ValueError("problem has no nonlinearity")
    asm = get_assembler(problem, mesh)
    system = asm.assemble(y)
    A, f = system.matrix.tocsc(), system.rhs
    lu = spla.splu(A)
    c = np.zeros(asm.n_free) if x0 is None else np.array(x0, dtype=float, copy=True)
    if c.shape != (asm.n_free,):
        raise ValueError(f"initial guess must have length {asm.n_free}")

    def residual(v):
        return f - A @ v - asm.nonlinear_load(v)

    def rel(step, new):
        ns = float(np.linalg.norm(step))
        nn = float(np.linalg.norm(new))
        if ns == 0.0:
            return 0.0
        return ns / nn if nn > 0 else math.inf

    lower, upper, band_r, band_c = asm.band_layout
    banded = lower + upper <= 8

    def jacobian_solve(v, r):
        data = system.matrix.data + asm.nonlinear_jacobian_data(v)
        if banded:
            ab = np.zeros((lower + upper + 1, asm.n_free))
            ab[band_r, band_c] = data
            return la.solve_banded((lower, upper), ab, r, check_finite=False)
        return spla.spsolve(asm.pattern_matrix(data).tocsc(), r)

    def newton_step(v):
        r = residual(v)
        delta = jacobian_solve(v, r)
        # backtracking keeps Newton from overshooting far from the root;
        # if no damped step lowers the residual (e.g. at roundoff) take the full one
        r0 = float(np.linalg.norm(r))
        lam = 1.0
        for _ in range(MAX_HALVINGS):
            cand = v + lam * delta
            if np.all(np.isfinite(cand)) and np.linalg.norm(residual(cand)) <= (1.0 - 1e-4 * lam) * r0:
                return cand
            lam *= 0.5
        return v + delta

    newton = False
    its = 0
    prev = math.inf
    growth = 0
    converged = False
    picard_its = 0
    while its < max_iter:
        new = newton_step(c) if newton else lu.solve(f - asm.nonlinear_load(c))
        finite = bool(np.all(np.isfinite(new)))
        step = rel(new - c, new) if finite else math.inf
        if its == 0 and step < rel_tol:
            converged = True
            break
        its += 1
        if not newton:
            picard_its += 1
            if not finite or (step >= prev and its > 1):
                # Picard is not contracting here: drop this iterate, go to Newton
                newton = True
                prev = math.inf
                continue
            c = new
            if step < rel_tol:
                converged = True
                break
            if step < PICARD_SWITCH:
                newton = True
                prev = math.inf
                continue
            prev = step
            continue
        if not finite:
            break
        c = new
        if step < rel_tol:
            converged = True
            break
        growth = growth + 1 if step > prev else 0
        if growth >= DIVERGENCE_STREAK:
            break
        prev = step
    res = float(np.linalg.norm(f - A @ c - asm.nonlinear_load(c)))
    report = SolveReport(its, res, converged, source, 0, res, False, {"picard": picard_its})
    return c, report
