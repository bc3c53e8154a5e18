"""A priori bounds for warm-started sparse-grid collocation, and checks of
measured runs against them.

Constants that are not known in advance (``C_fem``, ``C_sc``, ``r``) can be
fitted from measured error curves by least squares.  Checks that rely on
fitted constants allow a factor-2 slack; checks built only from measured
quantities (per-solve CG counts, point counts) are strict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import NamedTuple, Optional

import numpy as np

LN2 = math.log(2.0)
FIT_SLACK = 2.0


class EstimateDomainError(ValueError):
    """A logarithm in a bound has a nonpositive argument."""


@dataclass(frozen=True)
class EstimateParams:
    """Constants entering the bounds.

    ``u_h_norm`` bounds ``sup_y ||u_h(y)||_{H^1_0}``; ``kappa`` overrides the
    condition bound ``(C_kappa / h)^2`` when given.
    """

    N: int = 1
    s: float = 1.0
    C_fem: float = 1.0
    C_sc: float = 1.0
    r: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    C_kappa: float = 1.0
    u_h_norm: float = 1.0
    C_D: float = 5.0
    kappa: Optional[float] = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None and not v > 0:
                raise ValueError(f"{f.name} must be positive")

    @classmethod
    def from_mapping(cls, d: dict) -> "EstimateParams":
        names = {f.name for f in fields(cls)}
        kw = {}
        for k, v in d.items():
            if k in names:
                kw[k] = int(v) if k == "N" else (None if v in (None, "none") else float(v))
        return cls(**kw)


def _log_pos(x: float, what: str) -> float:
    if not x > 1.0:
        raise EstimateDomainError(f"{what} must exceed 1, got {x!r}")
    return math.log(x)


def h_of_eps(p: EstimateParams, eps: float) -> float:
    if not eps > 0:
        raise EstimateDomainError("eps must be positive")
    return (eps / (3.0 * p.C_fem)) ** (1.0 / p.s)


def _loglog_term(p: EstimateParams, eps: float) -> float:
    """``log((1/(rN)) log(3 C_sc / eps))``."""
    inner = _log_pos(3.0 * p.C_sc / eps, "3 C_sc / eps")
    x = inner / (p.r * p.N)
    if not x > 0:
        raise EstimateDomainError("log argument must be positive")
    return math.log(x)


def Lmax_of_eps(p: EstimateParams, eps: float) -> int:
    if not eps > 0:
        raise EstimateDomainError("eps must be positive")
    return math.ceil(p.N / LN2 * _loglog_term(p, eps))


def tau_of_eps(p: EstimateParams, eps: float, L_max: int, N: Optional[int] = None) -> float:
    N = p.N if N is None else N
    return math.sqrt(p.beta) * eps / (3.0 * (L_max + 2) ** (2 * N))


def lebesgue_bound(L: int, N: int) -> float:
    if L < 0:
        raise ValueError("level must be nonnegative")
    return float(((L + 1) * (L + 2)) ** N)


def cg_rate(kappa: float) -> float:
    """``log((sqrt(k)+1)/(sqrt(k)-1))``; infinite for ``kappa <= 1``."""
    if kappa <= 1.0:
        return math.inf
    s = math.sqrt(kappa)
    return math.log((s + 1.0) / (s - 1.0))


def _ratio_log(arg: float) -> float:
    return math.log(arg) if arg > 1.0 else 0.0


def k_bounds(p: EstimateParams, tau: float, kappa: float, L: int) -> tuple[float, float]:
    """Per-solve iteration bounds for zero and interpolated starts at level ``L``.

    Bounds whose log argument is at most one are reported as 0.
    """
    rate = cg_rate(kappa)
    if math.isinf(rate):
        return 0.0, 0.0
    kz = _ratio_log(2.0 * math.sqrt(p.alpha) * p.u_h_norm / tau) / rate
    decay = math.exp(-p.r * p.N * 2.0 ** ((L - 1) / p.N))
    ka = _ratio_log(4.0 * math.sqrt(p.alpha) * p.C_sc * decay / tau) / rate
    return kz, ka


def cg_iteration_bound(c_A_norm: float, tau: float, kappa: float) -> int:
    """``ceil(log(2 ||c||_A / tau) / log((sqrt k + 1)/(sqrt k - 1)))`` for one zero-start solve."""
    rate = cg_rate(kappa)
    arg = 2.0 * c_A_norm / tau
    if math.isinf(rate) or arg <= 1.0:
        return 0
    return math.ceil(math.log(arg) / rate)


def point_count_bound(L: int, N: int) -> float:
    """``e^{N-1} 2^{L+1} (1 + L/(N-1))^{N-1}``; the last factor is 1 when ``N = 1``."""
    poly = 1.0 if N == 1 else (1.0 + L / (N - 1)) ** (N - 1)
    return math.exp(N - 1) * 2.0 ** (L + 1) * poly


def interpolation_cost_level_bound(L: int, N: int, M_h: int) -> float:
    """``16 M_h e^{2(N-1)} 4^L (1 + L/(N-1))^{2(N-1)}``."""
    poly = 1.0 if N == 1 else (1.0 + L / (N - 1)) ** (2 * (N - 1))
    return 16.0 * M_h * math.exp(2 * (N - 1)) * 4.0 ** L * poly


class KBounds(NamedTuple):
    K_zero: float
    K_acc: float
    C_int: float
    M_L: float


def _constants(p: EstimateParams) -> dict:
    N, r = p.N, p.r
    C1 = (math.e / LN2) ** (N - 1) * (2.0 / (r * N)) ** N
    C2 = 1.0 + math.log(1.0 / (r * N)) / LN2
    C3 = 6.0 * math.sqrt(p.alpha / p.beta) * p.u_h_norm
    C4 = 2.0 * N * math.log(2.0 * N / LN2)
    C5 = C4 + math.log(4.0 * math.sqrt(p.alpha / p.beta))
    C8 = 64.0 * math.exp(2 * (N - 1))
    return {"C1": C1, "C2": C2, "C3": C3, "C4": C4, "C5": C5, "C8": C8}


def kappa_bar(p: EstimateParams, eps: float) -> float:
    if p.kappa is not None:
        return p.kappa
    return (p.C_kappa / h_of_eps(p, eps)) ** 2


def K_bounds(p: EstimateParams, eps: float, M_h: Optional[int] = None) -> KBounds:
    """Total-iteration, interpolation-cost and point-count bounds at accuracy ``eps``.

    ``M_h`` defaults to ``1/h(eps) - 1`` (1D interior nodes).
    """
    c = _constants(p)
    N = p.N
    lg = _log_pos(3.0 * p.C_sc / eps, "3 C_sc / eps")
    llg = _loglog_term(p, eps)
    loglog_sc = math.log(lg) if lg > 0 else -math.inf
    bracket = c["C2"] + loglog_sc / LN2
    if bracket <= 0:
        raise EstimateDomainError("eps too large for the bounds to apply")
    if llg <= 0:
        raise EstimateDomainError("eps too large: log((1/rN) log(3C_sc/eps)) <= 0")
    pts = c["C1"] * lg**N * bracket ** (N - 1)
    rate = cg_rate(kappa_bar(p, eps))
    tail = 2.0 * N * math.log(llg)
    zero_term = _log_pos(c["C3"] / eps, "C3 / eps") + c["C4"] + tail
    acc_term = c["C5"] + 2.0 * (2.0 ** (1.0 / N) - 1.0) * lg + tail
    K_zero = pts * zero_term / rate
    K_acc = pts * acc_term / rate
    if M_h is None:
        M_h = max(1, round(1.0 / h_of_eps(p, eps)) - 1)
    C_int = M_h * c["C8"] * (lg / (p.r * N)) ** (2 * N) * bracket ** (2 * (N - 1))
    M_L = 2.0 * math.exp(N - 1) * lg**N * bracket ** (N - 1)
    return KBounds(K_zero, K_acc, C_int, M_L)


# fitting ------------------------------------------------------------------------


def fit_sc_constants(levels, errors, N: int) -> tuple[float, float]:
    """Least-squares ``(C_sc, r)`` in ``err ~ C_sc exp(-r N 2^{w/N})``."""
    w = np.asarray(levels, dtype=float)
    e = np.asarray(errors, dtype=float)
    keep = e > 0
    if keep.sum() < 2:
        raise ValueError("need at least two positive errors to fit")
    x = -N * 2.0 ** (w[keep] / N)
    slope, icpt = np.polyfit(x, np.log(e[keep]), 1)
    return float(math.exp(icpt)), float(slope)


def fit_fem_constants(hs, errors) -> tuple[float, float]:
    """Least-squares ``(C_fem, s)`` in ``err ~ C_fem h^s``."""
    h = np.asarray(hs, dtype=float)
    e = np.asarray(errors, dtype=float)
    if len(h) < 2 or np.any(h <= 0) or np.any(e <= 0):
        raise ValueError("need at least two positive (h, error) pairs")
    s, icpt = np.polyfit(np.log(h), np.log(e), 1)
    return float(math.exp(icpt)), float(s)


# checks against a run ---------------------------------------------------------------


def _row(name, measured, bound, strict=True, **extra) -> dict:
    ok = measured <= bound
    return {"check": name, "measured": measured, "bound": bound, "ok": bool(ok), "strict": strict, **extra}


def check_report(report: dict, lebesgue: Optional[list] = None) -> list[dict]:
    """Bound-versus-measured rows for a serialized run report.

    Rows marked ``strict`` count towards pass/fail.  Raises ``KeyError`` when
    the report lacks the per-solve measurements the CG check needs.
    """
    cfg = report["config"]
    rows = []
    counts = report["counts"]
    N = report["n_params"]
    isotropic = cfg.get("alpha") in (None, "isotropic")
    for w, M in enumerate(counts):
        rows.append(_row(f"M_{w} <= point bound", int(M), point_count_bound(w, N), strict=isotropic, level=w))
    if report.get("mode") == "accelerated" and isotropic:
        W = len(counts) - 1
        rows.append(_row("C_int <= level bound", int(report["C_int"]),
                         interpolation_cost_level_bound(W, N, report["M_h"]), level=W))
    tau = cfg["tau"]
    zero_solves = [p for p in report["points"] if p.get("source") == "zero"]
    if not report.get("nonlinear"):
        if not zero_solves or any("kappa" not in p or "c_A_norm" not in p for p in zero_solves):
            raise KeyError("zero-start solves need kappa and c_A_norm measurements")
        for p in zero_solves:
            if p["kappa"] is None:
                continue
            bound = cg_iteration_bound(p["c_A_norm"], tau, p["kappa"])
            rows.append(_row(f"k_{p['id']} <= CG bound", int(p["iterations"]), bound, id=p["id"]))
    for L, Nl, value in lebesgue or []:
        rows.append(_row(f"Lebesgue L={L} N={Nl}", float(value), lebesgue_bound(L, Nl), L=L, N=Nl))
    return rows


def all_hold(rows: list[dict]) -> bool:
    return all(r["ok"] for r in rows if r.get("strict", True))
