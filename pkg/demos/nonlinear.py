"""Warm starts for a nonlinear problem solved by Picard then Newton.

A good initial guess lets the solver skip most Picard steps, so the
outer iteration count and the wall time both drop.
"""
from accsc import RunConfig, run_experiment
from accsc.driver import nonlinear_time_table

for problem in ("ex53_power5", "ex53_u_du"):
    cfg = RunConfig(problem=problem, mesh_n=100, W=5, rel_tol=1e-8)
    zero = run_experiment(cfg.with_(mode="zero"))
    acc = run_experiment(cfg.with_(mode="accelerated"))
    print(problem)
    print(nonlinear_time_table(zero, acc))
