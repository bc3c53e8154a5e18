"""Three initial-guess strategies on a 2D problem with a correlated random field.

``nearest_neighbor`` reuses the solution at the closest earlier point and
costs nothing extra. ``accelerated`` evaluates the previous interpolant.
"""
from accsc import RunConfig, compare, run_experiment

cfg = RunConfig(problem="ex52", N=3, R_c=1 / 64, mesh_n=16, W=3, tau=1e-14,
                preconditioner="diagonal", C_D=7)
reports = {m: run_experiment(cfg.with_(mode=m)) for m in ("zero", "nearest_neighbor", "accelerated")}

print(f"{'mode':>18} {'K':>6} {'iter. savings':>14}")
for mode, rep in reports.items():
    sav = compare(reports["zero"], rep)["iteration_savings"]
    print(f"{mode:>18} {rep.K:>6} {sav:>14.1%}")
