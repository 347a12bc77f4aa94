"""The Lyapunov sequence decreases along an OptISTA run and ends above the gap."""

import numpy as np

from optista import lyapunov_sequence, random_box_quadratic, run_optista_a

problem = random_box_quadratic(seed=4)
x0 = np.random.default_rng(0).normal(size=problem.dim)
N = 8
rec = lyapunov_sequence(run_optista_a(problem, x0, N), problem, problem.x_star)
print(f"U_-1 closed form {rec.U_closed:.10f}, explicit sum {rec.at(-1):.10f}")
for k in range(-1, N + 1):
    print(f"  U_{k:<2} = {rec.at(k):.10f}")
print(f"final gap F(x_N) - F* = {rec.final_gap:.10f}")
print(f"smallest one-step decrease: {rec.slacks().min():.3e}")
