"""Parametrized elliptic model problems.

Three benchmark problems plus a constant-coefficient smoke test:

* ``ex51``: 1D diffusion with a four-mode log-coefficient, forcing 10,
  homogeneous Dirichlet data, parameters uniform on [-1, 1]^4.
* ``ex52``: 2D diffusion on the unit square whose log-coefficient is an
  ``N``-term expansion of a Gaussian-covariance field in ``x_1``, forcing
  ``cos(x_1) sin(x_2)``, parameters uniform on [-sqrt(3), sqrt(3)]^N.
* ``ex53``: the ``ex51`` coefficient with a nonlinear reaction
  (``u^5`` or ``u u'``), forcing ``x``, ``u(0) = 0`` and ``u'(1) = 1``.

Parameter points handed to a :class:`ProblemSpec` live on the reference
cube [-1, 1]^N; the affine map to the physical box happens inside
:meth:`ProblemSpec.coefficient`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

_EDGE_TOL = 1e-12

EX1_DECAY = math.exp(-1.0 / 8.0)

NONLINEARITIES = (None, "power5", "u_du")


class DomainError(ValueError):
    """Raised for spatial or parameter points outside their domain."""


@dataclass(frozen=True)
class ParameterDomain:
    """Box ``prod_n [lo_n, hi_n]`` with an affine map from [-1, 1]^N."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.lo) != len(self.hi) or not self.lo:
            raise ValueError("bounds must be nonempty and of equal length")
        if any(a >= b for a, b in zip(self.lo, self.hi)):
            raise ValueError("need lo < hi in every dimension")

    @classmethod
    def cube(cls, dim: int, half_width: float = 1.0) -> "ParameterDomain":
        return cls((-half_width,) * dim, (half_width,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def to_physical(self, y_ref) -> np.ndarray:
        y_ref = np.asarray(y_ref, dtype=float)
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return lo + (y_ref + 1.0) * (hi - lo) / 2.0

    def to_reference(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return 2.0 * (y - lo) / (hi - lo) - 1.0

    def check(self, y) -> None:
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.dim:
            raise DomainError(f"parameter has dimension {y.shape[-1]}, expected {self.dim}")
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        slack = _EDGE_TOL * np.maximum(1.0, hi - lo)
        if np.any(y < lo - slack) or np.any(y > hi + slack):
            raise DomainError("parameter point outside its domain")


def _check_unit_interval(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < -_EDGE_TOL) or np.any(x > 1.0 + _EDGE_TOL):
        raise DomainError("spatial point outside [0, 1]")
    return x


def eval_coeff_ex1(x, y) -> np.ndarray:
    """``1 + exp(e^{-1/8}(y1 cos pi x + y2 sin pi x + y3 cos 2pi x + y4 sin 2pi x))``."""
    x = _check_unit_interval(x)
    y = np.asarray(y, dtype=float)
    ParameterDomain.cube(4).check(y)
    s = (
        y[0] * np.cos(np.pi * x)
        + y[1] * np.sin(np.pi * x)
        + y[2] * np.cos(2 * np.pi * x)
        + y[3] * np.sin(2 * np.pi * x)
    )
    return 1.0 + np.exp(EX1_DECAY * s)


@dataclass(frozen=True)
class CorrelationScales:
    """Length scales of the 1D Gaussian-covariance expansion."""

    R_c: float

    @property
    def R_p(self) -> float:
        return max(1.0, 2.0 * self.R_c)

    @property
    def R(self) -> float:
        return self.R_c / self.R_p


def ex2_zeta(n: int, R_c: float) -> float:
    """Mode magnitude ``zeta_n`` for ``n >= 2``."""
    if n < 2:
        raise ValueError("zeta_n is defined for n >= 2")
    R = CorrelationScales(R_c).R
    return math.sqrt(math.sqrt(math.pi) * R) * math.exp(-((n // 2) * math.pi * R) ** 2 / 8.0)


def ex2_phi(n: int, x1, R_c: float) -> np.ndarray:
    """Mode shape ``phi_n``: sine for even ``n``, cosine for odd ``n``."""
    arg = (n // 2) * np.pi * np.asarray(x1, dtype=float) / CorrelationScales(R_c).R_p
    return np.sin(arg) if n % 2 == 0 else np.cos(arg)


def eval_coeff_ex2(x, y, R_c: float) -> np.ndarray:
    """``0.5 + exp(1 + y1 (sqrt(pi) R/2)^{1/2} + sum_{n>=2} zeta_n phi_n(x1) y_n)``.

    ``x`` has shape ``(..., 2)``; only ``x1`` enters.  ``y`` is in
    [-sqrt(3), sqrt(3)]^N.
    """
    x = np.asarray(x, dtype=float)
    x1 = _check_unit_interval(x[..., 0])
    _check_unit_interval(x[..., 1])
    y = np.asarray(y, dtype=float)
    N = len(y)
    if N == 0:
        raise DomainError("need at least one parameter")
    ParameterDomain.cube(N, math.sqrt(3.0)).check(y)
    R = CorrelationScales(R_c).R
    s = 1.0 + y[0] * math.sqrt(math.sqrt(math.pi) * R / 2.0)
    for n in range(2, N + 1):
        s = s + ex2_zeta(n, R_c) * ex2_phi(n, x1, R_c) * y[n - 1]
    return 0.5 + np.exp(s)


def anisotropy_weights_ex2() -> tuple[float, ...]:
    """A-posteriori anisotropy weights used for the N = 11, R_c = 1/2 runs."""
    return (0.85, 0.8, 0.8, 1.0, 1.0, 1.6, 1.6, 2.6, 2.6, 3.7, 3.7)


@dataclass(frozen=True)
class Dirichlet:
    value: float = 0.0


@dataclass(frozen=True)
class Neumann:
    """Prescribed outward normal derivative ``du/dn``."""

    value: float = 0.0


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """A parametrized problem ``-div(a grad u) + F[u] = f`` with boundary data.

    ``coefficient(x, y_ref)`` and ``forcing(x, y_ref)`` take spatial points
    of shape ``(Q,)`` in 1D or ``(Q, 2)`` in 2D and a reference-cube
    parameter point.  ``boundary`` maps ``"left"``/``"right"`` (1D) or
    ``"all"`` (2D) to :class:`Dirichlet` or :class:`Neumann`.
    """

    name: str
    dim: int
    domain: ParameterDomain
    coeff_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    forcing_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    boundary: dict = field(default_factory=dict)
    nonlinearity: Optional[str] = None
    a_min: float = 0.0

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise ValueError("spatial dimension must be 1 or 2")
        if self.nonlinearity not in NONLINEARITIES:
            raise ValueError(f"unknown nonlinearity {self.nonlinearity!r}")
        if self.nonlinearity is not None and self.dim != 1:
            raise ValueError("nonlinear problems are one-dimensional only")
        sides = ("left", "right") if self.dim == 1 else ("all",)
        for side in sides:
            bc = self.boundary.get(side)
            if not isinstance(bc, (Dirichlet, Neumann)):
                raise ValueError(f"missing boundary condition on {side!r}")
        if self.dim == 2 and not isinstance(self.boundary["all"], Dirichlet):
            raise ValueError("2D problems support Dirichlet boundaries only")

    @property
    def n_params(self) -> int:
        return self.domain.dim

    def physical(self, y_ref) -> np.ndarray:
        y_ref = np.asarray(y_ref, dtype=float)
        ParameterDomain.cube(self.n_params).check(y_ref)
        return self.domain.to_physical(y_ref)

    def coefficient(self, x, y_ref) -> np.ndarray:
        return self.coeff_fn(x, self.physical(y_ref))

    def forcing(self, x, y_ref) -> np.ndarray:
        return self.forcing_fn(x, self.physical(y_ref))


def ex51_problem() -> ProblemSpec:
    return ProblemSpec(
        name="ex51",
        dim=1,
        domain=ParameterDomain.cube(4),
        coeff_fn=eval_coeff_ex1,
        forcing_fn=lambda x, y: np.full(np.shape(x), 10.0),
        boundary={"left": Dirichlet(0.0), "right": Dirichlet(0.0)},
        a_min=1.0,
    )


def ex52_problem(N: int, R_c: float = 1.0 / 64.0) -> ProblemSpec:
    if N < 1:
        raise DomainError("need at least one parameter")
    return ProblemSpec(
        name="ex52",
        dim=2,
        domain=ParameterDomain.cube(N, math.sqrt(3.0)),
        coeff_fn=lambda x, y: eval_coeff_ex2(x, y, R_c),
        forcing_fn=lambda x, y: np.cos(x[..., 0]) * np.sin(x[..., 1]),
        boundary={"all": Dirichlet(0.0)},
        a_min=0.5,
    )


def ex53_problem(nonlinearity: str = "power5") -> ProblemSpec:
    if nonlinearity not in ("power5", "u_du"):
        raise ValueError("ex53 needs nonlinearity 'power5' or 'u_du'")
    return ProblemSpec(
        name=f"ex53_{nonlinearity}",
        dim=1,
        domain=ParameterDomain.cube(4),
        coeff_fn=eval_coeff_ex1,
        forcing_fn=lambda x, y: np.asarray(x, dtype=float).copy(),
        boundary={"left": Dirichlet(0.0), "right": Neumann(1.0)},
        nonlinearity=nonlinearity,
        a_min=1.0,
    )


def constant_problem(
    dim: int = 1,
    value: float = 1.0,
    forcing: float = 1.0,
    n_params: int = 1,
    nonlinearity: Optional[str] = None,
    boundary: Optional[dict] = None,
) -> ProblemSpec:
    """Smoke-test problem with ``a == value`` and constant forcing."""
    if boundary is None:
        boundary = {"left": Dirichlet(), "right": Dirichlet()} if dim == 1 else {"all": Dirichlet()}
    return ProblemSpec(
        name="constant",
        dim=dim,
        domain=ParameterDomain.cube(n_params),
        coeff_fn=lambda x, y: np.full(np.shape(x)[: 1 if dim == 1 else -1], float(value)),
        forcing_fn=lambda x, y: np.full(np.shape(x)[: 1 if dim == 1 else -1], float(forcing)),
        boundary=boundary,
        nonlinearity=nonlinearity,
        a_min=float(value),
    )


def make_problem(name: str, N: int | None = None, R_c: float = 1.0 / 64.0) -> ProblemSpec:
    """Problem factory keyed by the ids used in run configurations."""
    if name == "ex51":
        return ex51_problem()
    if name == "ex52":
        return ex52_problem(3 if N is None else N, R_c)
    if name in ("ex53_power5", "ex53_u_du"):
        return ex53_problem(name.split("_", 1)[1])
    if name == "constant1d":
        return constant_problem(1, n_params=1 if N is None else N)
    if name == "constant2d":
        return constant_problem(2, n_params=1 if N is None else N)
    raise ValueError(f"unknown problem {name!r}")
