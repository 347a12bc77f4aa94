"""OptISTA and OPPA hit their worst-case instances to rounding level."""

from optista import matching_bound_report, proximal_matching_report

print("composite zero chain, OptISTA from x0 = 0")
for N in range(1, 9):
    r = matching_bound_report(N)
    print(f"  N={N}: gap {r.gap:.15f}  bound {r.bound:.15f}  mismatch {r.rel_mismatch:.1e}")

print("\nproximal chain, OPPA with stepsizes 1, 2, 4, ...")
for N in range(1, 7):
    r = proximal_matching_report([2.0**k for k in range(N)])
    print(f"  N={N}: gap {r.gap:.15f}  bound {r.bound:.15f}  mismatch {r.rel_mismatch:.1e}")
