"""Linear finite elements on uniform 1D and 2D meshes.

Per-sample systems ``A(y) c = f(y)`` are assembled from per-element
quadrature: a 3-point Gauss rule per interval in 1D, and the 3-point
interior rule per triangle in 2D.  Dirichlet nodes are eliminated, so the
matrices handed to CG are SPD.  The sparsity pattern and the scatter from
element entries to CSR slots are computed once per (problem, mesh) pair;
each sample then costs one coefficient evaluation and a ``bincount``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model_problems import Dirichlet, Neumann, ProblemSpec

_GAUSS3_X, _GAUSS3_W = np.polynomial.legendre.leggauss(3)

# barycentric coordinates and weights (fractions of area) of the triangle rule
_TRI3_BARY = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
_TRI3_W = np.full(3, 1 / 3)


class AssemblyError(RuntimeError):
    """Raised when a coefficient sample is not uniformly positive."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Uniform mesh with linear elements.

    ``boundary`` maps side names to node index arrays: ``left``/``right``
    in 1D, ``all`` in 2D.
    """

    dim: int
    h: float
    nodes: np.ndarray
    elements: np.ndarray
    boundary: dict = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)


def interval_mesh(n_elements: int) -> Mesh:
    """Uniform mesh of [0, 1] with ``h = 1/n_elements``."""
    if n_elements < 1:
        raise ValueError("need at least one element")
    nodes = np.linspace(0.0, 1.0, n_elements + 1)
    elements = np.column_stack([np.arange(n_elements), np.arange(1, n_elements + 1)])
    return Mesh(1, 1.0 / n_elements, nodes, elements, {"left": np.array([0]), "right": np.array([n_elements])})


def unit_square_mesh(k: int) -> Mesh:
    """Right-triangle mesh of the unit square with ``(k+1)^2`` nodes.

    Each cell is split along its lower-left to upper-right diagonal.
    """
    if k < 1:
        raise ValueError("need at least one cell per side")
    t = np.linspace(0.0, 1.0, k + 1)
    X, Y = np.meshgrid(t, t, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((k + 1) ** 2).reshape(k + 1, k + 1)
    ll, lr, ul, ur = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel(), idx[1:, :-1].ravel(), idx[1:, 1:].ravel()
    elements = np.vstack([np.column_stack([ll, lr, ur]), np.column_stack([ll, ur, ul])])
    on_edge = (
        np.isclose(nodes[:, 0], 0) | np.isclose(nodes[:, 0], 1) | np.isclose(nodes[:, 1], 0) | np.isclose(nodes[:, 1], 1)
    )
    return Mesh(2, 1.0 / k, nodes, elements, {"all": np.flatnonzero(on_edge)})


@dataclass
class AssembledSystem:
    """One sample's linear system on the free degrees of freedom."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    y: np.ndarray
    quadrature_points: int

    @property
    def size(self) -> int:
        return len(self.rhs)


class Assembler:
    """Precomputed geometry and scatter maps for one (problem, mesh) pair."""

    def __init__(self, problem: ProblemSpec, mesh: Mesh):
        if problem.dim != mesh.dim:
            raise ValueError(f"problem is {problem.dim}D but mesh is {mesh.dim}D")
        self.problem = problem
        self.mesh = mesh
        n = mesh.n_nodes

        fixed_vals = np.full(n, np.nan)
        self.neumann: list[tuple[int, float]] = []
        for side, bc in problem.boundary.items():
            ids = mesh.boundary[side]
            if isinstance(bc, Dirichlet):
                fixed_vals[ids] = bc.value
            elif isinstance(bc, Neumann):
                self.neumann.extend((int(i), bc.value) for i in ids)
        self.fixed = np.flatnonzero(~np.isnan(fixed_vals))
        self.fixed_values = fixed_vals[self.fixed]
        self.free = np.flatnonzero(np.isnan(fixed_vals))
        self.neumann = [(i, v) for i, v in self.neumann if np.isnan(fixed_vals[i])]
        self.free_index = np.full(n, -1)
        self.free_index[self.free] = np.arange(len(self.free))
        self.n_free = len(self.free)

        if mesh.dim == 1:
            self._setup_1d()
        else:
            self._setup_2d()
        self._setup_scatter()

    # geometry -----------------------------------------------------------

    def _setup_1d(self) -> None:
        m = self.mesh
        x0 = m.nodes[m.elements[:, 0]]
        jac = m.h / 2.0
        xi = _GAUSS3_X
        self.qx = x0[:, None] + jac * (xi[None, :] + 1.0)  # (E, Q)
        self.qw = np.broadcast_to(jac * _GAUSS3_W, self.qx.shape)
        phi = np.column_stack([(1 - xi) / 2, (1 + xi) / 2])  # (Q, 2)
        self.phi = np.broadcast_to(phi, (m.n_elements,) + phi.shape)
        grad = np.array([-1.0, 1.0]) / m.h
        self.grads = np.broadcast_to(grad[:, None], (m.n_elements, 2, 1))  # (E, 2, d)
        self.qx_flat = self.qx.ravel()

    def _setup_2d(self) -> None:
        m = self.mesh
        v = m.nodes[m.elements]  # (E, 3, 2)
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        area = 0.5 * np.abs(det)
        # gradients of barycentric coordinates
        inv = np.empty((m.n_elements, 2, 2))
        inv[:, 0, 0] = e2[:, 1] / det
        inv[:, 0, 1] = -e2[:, 0] / det
        inv[:, 1, 0] = -e1[:, 1] / det
        inv[:, 1, 1] = e1[:, 0] / det
        g1 = inv[:, 0]
        g2 = inv[:, 1]
        self.grads = np.stack([-g1 - g2, g1, g2], axis=1)  # (E, 3, 2)
        self.qx = np.einsum("qk,ekd->eqd", _TRI3_BARY, v)  # (E, Q, 2)
        self.qw = area[:, None] * _TRI3_W[None, :]
        self.phi = np.broadcast_to(_TRI3_BARY, (m.n_elements, 3, 3))
        self.qx_flat = self.qx.reshape(-1, 2)

    def _setup_scatter(self) -> None:
        m = self.mesh
        E, k = m.elements.shape
        rows = np.repeat(m.elements, k, axis=1).ravel()
        cols = np.tile(m.elements, (1, k)).ravel()
        fr, fc = self.free_index[rows], self.free_index[cols]
        nf = self.n_free

        keep = (fr >= 0) & (fc >= 0)
        self._kk = np.flatnonzero(keep)
        key = fr[keep].astype(np.int64) * nf + fc[keep]
        uniq, inv = np.unique(key, return_inverse=True)
        self._k_inv = inv
        r = uniq // nf
        self.indices = (uniq % nf).astype(np.int32)
        self.indptr = np.searchsorted(r, np.arange(nf + 1)).astype(np.int32)
        self.nnz = len(uniq)

        lift = (fr >= 0) & (fc < 0)
        self._lift = np.flatnonzero(lift)
        self._lift_rows = fr[lift]
        self._lift_cols = cols[lift]

        node_free = self.free_index[m.elements.ravel()]
        self._f_keep = np.flatnonzero(node_free >= 0)
        self._f_rows = node_free[self._f_keep]

        # stiffness template: grad_i . grad_j per element, (E, k, k)
        self.grad_products = np.einsum("eid,ejd->eij", self.grads, self.grads)
        # mass template per element
        self.mass_local = np.einsum("eq,eqi,eqj->eij", self.qw, self.phi, self.phi)

    # assembly -----------------------------------------------------------

    def csr(self, local: np.ndarray) -> sp.csr_matrix:
        """Sum per-element ``(E, k, k)`` entries into a free-dof CSR matrix."""
        vals = local.reshape(-1)[self._kk]
        return self.pattern_matrix(np.bincount(self._k_inv, weights=vals, minlength=self.nnz))

    def vector(self, local: np.ndarray) -> np.ndarray:
        """Sum per-element ``(E, k)`` entries into a free-dof vector."""
        vals = local.reshape(-1)[self._f_keep]
        return np.bincount(self._f_rows, weights=vals, minlength=self.n_free)

    def coefficient_at_quadrature(self, y) -> np.ndarray:
        a = np.asarray(self.problem.coefficient(self.qx_flat, y), dtype=float)
        a = a.reshape(self.qw.shape)
        if not np.all(np.isfinite(a)) or np.any(a <= 0.0):
            raise AssemblyError("coefficient is not positive at every quadrature point")
        return a

    def assemble(self, y) -> AssembledSystem:
        y = np.asarray(y, dtype=float)
        a = self.coefficient_at_quadrature(y)
        # gradients are constant per element, so K_e = (int_e a) grad grad^T
        abar = (a * self.qw).sum(axis=1)
        local_K = abar[:, None, None] * self.grad_products
        A = self.csr(local_K)

        f = np.asarray(self.problem.forcing(self.qx_flat, y), dtype=float).reshape(self.qw.shape)
        local_f = np.einsum("eq,eq,eqi->ei", self.qw, f, self.phi)
        rhs = self.vector(local_f)
        rhs += self._boundary_load(y)
        if len(self._lift) and np.any(self.fixed_values != 0.0):
            g = np.zeros(self.mesh.n_nodes)
            g[self.fixed] = self.fixed_values
            lift_vals = local_K.reshape(-1)[self._lift] * g[self._lift_cols]
            rhs -= np.bincount(self._lift_rows, weights=lift_vals, minlength=self.n_free)
        return AssembledSystem(A, rhs, y.copy(), self.qw.shape[1])

    def _boundary_load(self, y) -> np.ndarray:
        out = np.zeros(self.n_free)
        for node, value in self.neumann:
            xb = self.mesh.nodes[node : node + 1]
            # natural boundary term of -(a u')': a(x_b, y) du/dn v(x_b)
            a_b = float(np.asarray(self.problem.coefficient(xb, y)).ravel()[0])
            out[self.free_index[node]] += a_b * value
        return out

    def mass_matrix(self) -> sp.csr_matrix:
        return self.csr(self.mass_local)

    def full_vector(self, c) -> np.ndarray:
        """Nodal values including eliminated Dirichlet nodes."""
        u = np.zeros(self.mesh.n_nodes)
        u[self.fixed] = self.fixed_values
        u[self.free] = c
        return u

    # nonlinear terms (1D) -----------------------------------------------

    def _element_fields(self, c):
        u = self.full_vector(c)[self.mesh.elements]  # (E, 2)
        uq = np.einsum("eqi,ei->eq", self.phi, u)
        du = np.einsum("eid,ei->e", self.grads, u)  # constant slope per element
        return uq, du

    def nonlinear_load(self, c) -> np.ndarray:
        """``int F[u_c] phi_i`` on the free dofs."""
        kind = self.problem.nonlinearity
        uq, du = self._element_fields(c)
        if kind == "power5":
            Fq = uq**5
        elif kind == "u_du":
            Fq = uq * du[:, None]
        else:
            raise ValueError("problem has no nonlinearity")
        return self.vector(np.einsum("eq,eq,eqi->ei", self.qw, Fq, self.phi))

    def nonlinear_jacobian_data(self, c) -> np.ndarray:
        """CSR data of :meth:`nonlinear_jacobian`, on the stiffness pattern."""
        kind = self.problem.nonlinearity
        uq, du = self._element_fields(c)
        if kind == "power5":
            local = np.einsum("eq,eq,eqi,eqj->eij", self.qw, 5.0 * uq**4, self.phi, self.phi)
        elif kind == "u_du":
            # d/dc_j of u u' = phi_j u' + u phi_j'
            g = self.grads[:, :, 0]  # (E, 2)
            t1 = np.einsum("eq,e,eqi,eqj->eij", self.qw, du, self.phi, self.phi)
            t2 = np.einsum("eq,eq,eqi,ej->eij", self.qw, uq, self.phi, g)
            local = t1 + t2
        else:
            raise ValueError("problem has no nonlinearity")
        return np.bincount(self._k_inv, weights=local.reshape(-1)[self._kk], minlength=self.nnz)

    def nonlinear_jacobian(self, c) -> sp.csr_matrix:
        """Derivative of :meth:`nonlinear_load` with respect to ``c``."""
        return self.pattern_matrix(self.nonlinear_jacobian_data(c))

    def pattern_matrix(self, data) -> sp.csr_matrix:
        """CSR matrix on the free-dof stiffness pattern with the given data."""
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=(self.n_free, self.n_free))

    @property
    def band_layout(self):
        """``(lower, upper, rows, cols)`` mapping CSR data into LAPACK banded storage."""
        if not hasattr(self, "_band"):
            r = np.repeat(np.arange(self.n_free), np.diff(self.indptr))
            c = self.indices.astype(np.int64)
            lower, upper = int(max(0, (r - c).max(initial=0))), int(max(0, (c - r).max(initial=0)))
            self._band = (lower, upper, upper + r - c, c)
        return self._band


@lru_cache(maxsize=32)
def get_assembler(problem: ProblemSpec, mesh: Mesh) -> Assembler:
    return Assembler(problem, mesh)


def assemble(problem: ProblemSpec, mesh: Mesh, y) -> AssembledSystem:
    """Stiffness matrix and load vector of one sample, Dirichlet dofs eliminated."""
    return get_assembler(problem, mesh).assemble(y)


def assemble_nonlinear_residual(problem: ProblemSpec, mesh: Mesh, y, c) -> np.ndarray:
    """``f + Neumann - A c - int F[u_c] phi_i`` on the free dofs."""
    if problem.nonlinearity is None:
        raise ValueError("problem has no nonlinearity")
    asm = get_assembler(problem, mesh)
    c = np.asarray(c, dtype=float)
    if c.shape != (asm.n_free,):
        raise ValueError(f"coefficient vector must have length {asm.n_free}")
    system = asm.assemble(y)
    return system.rhs - system.matrix @ c - asm.nonlinear_load(c)


def mass_matrix(problem: ProblemSpec, mesh: Mesh) -> sp.csr_matrix:
    return get_assembler(problem, mesh).mass_matrix()


def l2_norm(problem: ProblemSpec, mesh: Mesh, c) -> float:
    """``L^2(D)`` norm of the FE function with free-dof coefficients ``c``."""
    M = mass_matrix(problem, mesh)
    c = np.asarray(c, dtype=float)
    return float(np.sqrt(max(c @ (M @ c), 0.0)))


def dump_coo(A: sp.spmatrix, path) -> None:
    """Write a matrix as ``row col value`` lines (0-based)."""
    coo = sp.coo_matrix(A)
    with open(path, "w") as fh:
        fh.write(f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v!r}\n")


class ConditionEstimateError(RuntimeError):
    pass


def estimate_condition(A, tol: float = 1e-8, max_iter: int = 20_000, seed: int = 0) -> float:
    """``lambda_max / lambda_min`` of an SPD matrix.

    ``lambda_max`` comes from power iteration on ``A``; ``lambda_min`` from
    inverse power iteration whose inner solves use CG.  Both stop when the
    Rayleigh quotient changes by less than ``tol`` relatively.
    """
    from .solvers import cg

    if sp.issparse(A):
        A = sp.csr_matrix(A)
    elif not isinstance(A, spla.LinearOperator):
        A = np.asarray(A, dtype=float)
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal(n)

    def normalize(v):
        nv = np.linalg.norm(v)
        if nv == 0.0 or not np.isfinite(nv):
            raise ConditionEstimateError("power iteration broke down")
        return v / nv

    x = normalize(x0)
    lam_max = float(x @ (A @ x))
    for _ in range(max_iter):
        z = normalize(A @ x)
        lam = float(z @ (A @ z))
        done = abs(lam - lam_max) <= tol * abs(lam)
        x, lam_max = z, lam
        if done:
            break

    x = normalize(x0)
    mu = float(x @ (A @ x))
    inner = min(1e-12, tol * 1e-3)
    for _ in range(max_iter):
        z, _ = cg(A, x, tol=inner, criterion="rel", max_iter=10 * n + 100)
        z = normalize(z)
        lam = float(z @ (A @ z))
        done = abs(lam - mu) <= tol * abs(lam)
        x, mu = z, lam
        if done:
            break
    if mu <= 0.0:
        raise ConditionEstimateError("matrix is not positive definite")
    return lam_max / mu
