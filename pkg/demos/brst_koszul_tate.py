"""
BRST nilpotency and the Koszul-Tate boundary
============================================

Two sides of the same structure.  The BRST differential of Yang-Mills theory
squares to zero exactly because the structure constants satisfy the Jacobi
identity; perturbing them breaks nilpotency with an explicit residual.  On
the antifield side, the Koszul-Tate boundary of an antighost squares to the
Noether residual of its operator, so nilpotency there is equivalent to the
identity holding.
"""

from pathlib import Path

from nkt import (
    antifield_of,
    check_nilpotent,
    check_noether_identity,
    eta,
    extend_with_operator,
    kt_apply,
    kt_context,
    kt_nilpotency_residuals,
    parse_expression,
    parse_theory,
    render_polynomial,
    resolve_component,
)

theories = Path(__file__).parent.parent / "theories"

# --- BRST side -----------------------------------------------------------
ym = parse_theory((theories / "ym_su2.nkt").read_text())
report = check_nilpotent(ym.derivations["brst"])
print("su(2) BRST nilpotent:", report.nilpotent)

# perturb the structure constants off the antisymmetric orbit: Jacobi fails
# in one channel and the square picks it up
bad = parse_theory(
    """
    theory su2_broken
    dim 1
    field a[r=1..3] parity even
    ghost C[r=1..3] parity odd
    constant epsb[1..3,1..3,1..3] = {
      (1,2,3): 1
      (2,3,1): 1
      (3,1,2): 1
      (3,2,1): -1
      (2,1,3): -1
      (1,3,2): -1
      (1,1,2): 1
      (1,2,1): -1
    }
    derivation brst_bad {
      a[r=1..3] : d(C[r];x) + sum(p,1..3, sum(q,1..3, epsb[r,p,q]*a[p]*C[q]))
      C[r=1..3] : -1/2 * sum(p,1..3, sum(q,1..3, epsb[r,p,q]*C[p]*C[q]))
    }
    """
)
report = check_nilpotent(bad.derivations["brst_bad"])
print("perturbed BRST nilpotent:", report.nilpotent)
for var, poly in sorted(report.residuals.items(), key=lambda kv: kv[0].rank):
    print("  square on", var.render(), "=", render_polynomial(poly, bad.dim))

# --- Koszul-Tate side ----------------------------------------------------
# each antifield bounds onto its field equation; the boundary is a right
# derivation and squares to zero on the antifield level
mass = parse_theory((theories / "scalar_mass.nkt").read_text())
ctx = kt_context(mass.lagrangian, mass.dim)
ybar = parse_expression("~y", mass)
print("boundary of ~y:", render_polynomial(kt_apply(ctx, ybar), mass.dim))
print("boundary squared:", render_polynomial(kt_apply(ctx, kt_apply(ctx, ybar)), mass.dim))

# extending with an operator whose identity fails makes the square nonzero:
# the antighost's squared boundary IS the Noether residual
op = mass.operators["bad"]
extended = extend_with_operator(ctx, op)
xi = resolve_component(mass, "xi")
squares = kt_nilpotency_residuals(extended)
print("identity holds:", check_noether_identity(op, mass.lagrangian).holds)
print("square on ~xi:", render_polynomial(squares[antifield_of(xi)], mass.dim))

# the healthy counterpart: the Yang-Mills tower extends with zero square
dual = eta(ym.operators["gauge_sym"])
healthy = extend_with_operator(kt_context(ym.lagrangian, ym.dim), dual)
print("Yang-Mills extended complex nilpotent:", kt_nilpotency_residuals(healthy) == {})
