"""A priori estimates next to measured quantities.

Compares the observed sparse grid sizes with the point-count bound and the
per-solve CG iteration counts with the condition-number bound.
"""
from accsc import RunConfig, build_grid, run_experiment
from accsc.estimates import all_hold, check_report, point_count_bound

N = 4
for L in range(1, 6):
    M = len(build_grid(L, N).points)
    print(f"L={L}: {M:5d} points, bound {point_count_bound(L, N):10.1f}")

rep = run_experiment(RunConfig(problem="ex51", mesh_n=128, W=2, mode="zero", diagnostics=True))
rows = check_report(rep.to_dict())
print(f"{len(rows)} checks, all hold: {all_hold(rows)}")
ratios = [(r["measured"] / r["bound"], r["check"]) for r in rows if r.get("bound")]
ratio, name = max(ratios)
print(f"tightest: {name} at {ratio:.2f} of its bound")
