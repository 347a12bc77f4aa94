"""Gap against the worst-case bound for OptISTA, FISTA and ISTA on one LASSO instance."""

import numpy as np

from optista import random_lasso, run_method

problem = random_lasso(seed=1)
x0 = np.zeros(problem.dim)
R2 = float(np.sum((x0 - problem.x_star) ** 2))
print(f"LASSO instance: L = {problem.L:.4g}, ||x0 - x*||^2 = {R2:.4g}\n")
print(f"{'N':>3} " + "".join(f"{m + ' gap':>14}{'bound':>12}" for m in ("optista", "fista", "ista")))
for N in (1, 2, 5, 10, 20, 40):
    cells = []
    for m in ("optista", "fista", "ista"):
        t = run_method(m, problem, x0, N)
        cells.append(f"{t.gap:14.4e}{t.bound:12.4e}")
    print(f"{N:>3} " + "".join(cells))
