"""Check the analytic dual certificate and show a perturbed one failing."""

from optista.certificates import analytic_certificate, build_constraints, build_pep_basis, verify_certificate
from optista.methods import optista_fsfom_coefficients

print(f"{'N':>3}{'residual':>12}{'min eig':>12}{'nu R^2':>14}  status")
for N in range(1, 9):
    cons = build_constraints(build_pep_basis(N, optista_fsfom_coefficients(N)))
    rep = verify_certificate(analytic_certificate(N), cons)
    print(f"{N:>3}{rep.residual:12.2e}{rep.min_eig:12.2e}{rep.nu_R2:14.8f}  {'PASS' if rep.passed else 'FAIL'}")

N = 4
cons = build_constraints(build_pep_basis(N, optista_fsfom_coefficients(N)))
bad = analytic_certificate(N).perturbed("lam", (0, 1), 0.1, cons)
rep = verify_certificate(bad, cons)
print(f"\nN={N} with lambda_(0,1) shifted by 0.1: residual {rep.residual:.2e}, "
      f"min eig {rep.min_eig:.2e}, {'PASS' if rep.passed else 'FAIL'}")
