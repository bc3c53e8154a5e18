"""Warm starts on a 1D diffusion problem with four random parameters.

Runs the sweep twice, once from zero initial guesses and once from the
interpolant of the coarser levels, then prints the per-level table.
"""
from accsc import RunConfig, compare, run_experiment
from accsc.driver import comparison_table

cfg = RunConfig(problem="ex51", mesh_n=256, W=3, tau=1e-3, criterion="abs", C_D=5)
zero = run_experiment(cfg.with_(mode="zero"))
acc = run_experiment(cfg.with_(mode="accelerated"))

print(comparison_table(zero, acc))
s = compare(zero, acc)
print(f"CG iterations: {s['K_zero']} -> {s['K_other']}")
print(f"iteration savings {s['iteration_savings']:.1%}, cost savings incl. interpolation {s['cost_savings']:.1%}")
