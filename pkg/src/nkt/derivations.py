"""Vertical generalized vector fields and their prolonged action.

A generalized vector field assigns to each base variable A a component
polynomial upsilon^A; its infinite prolongation acts on any polynomial as
theta(p) = sum over A, Lam of d_Lam(upsilon^A) * (d p / d A_Lam), which is a
graded derivation when the components have homogeneous relative parity.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graded_poly import (
    Density,
    GradedPolynomial,
    JetVariable,
    Parity,
    VariableId,
)
from .jet_calculus import (
    TrivialityReport,
    euler_lagrange,
    is_variationally_trivial,
    partial_left,
    total_derivative_multi,
)


@dataclass(frozen=True)
class GeneralizedVectorField:
    """Vertical vector field: base variable -> component polynomial."""

    components: dict[VariableId, GradedPolynomial]

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "components",
            {a: p for a, p in self.components.items() if not p.is_zero()},
        )

    def component(self, var: VariableId) -> GradedPolynomial:
        return self.components.get(var, GradedPolynomial.zero())

    def relative_parity(self) -> Parity | None:
        """p such that [upsilon^A] = [A] + p for all components, else None.

        The zero field reports even.  Odd relative parity is the BRST
        candidate shape; mixed shapes are not graded derivations.
        """
        seen: set[int] = set()
        for var, comp in self.components.items():
            cp = comp.parity()
            if cp is None:
                return None
            seen.add((int(cp) - int(var.parity)) % 2)
            if len(seen) > 1:
                return None
        return Parity(seen.pop()) if seen else Parity.EVEN


def prolong_apply(vf: GeneralizedVectorField, p: GradedPolynomial) -> GradedPolynomial:
    """theta(p) with theta the infinite prolongation of vf."""
    out = GradedPolynomial.zero()
    for jv in sorted(p.variables(), key=lambda j: j.key):
        comp = vf.components.get(jv.var)
        if comp is None:
            continue
        inner = partial_left(p, jv)
        if inner.is_zero():
            continue
        out = out + total_derivative_multi(comp, jv.mi) * inner
    return out


def lie_derivative_density(vf: GeneralizedVectorField, lagrangian: Density) -> Density:
    """The Lie derivative of a horizontal density along a vertical field."""
    return Density(prolong_apply(vf, lagrangian.expr))


def contract_with_EL(
    vf: GeneralizedVectorField, lagrangian: Density | GradedPolynomial
) -> Density:
    """The interior product with the variational one-form: sum of v^A E_A."""
    derivs = euler_lagrange(lagrangian, sorted(vf.components, key=lambda a: a.rank))
    out = GradedPolynomial.zero()
    for var in sorted(vf.components, key=lambda a: a.rank):
        out = out + vf.components[var] * derivs[var]
    return Density(out)


def check_variational(
    vf: GeneralizedVectorField, lagrangian: Density | GradedPolynomial
) -> TrivialityReport:
    """A symmetry is variational iff its contraction with the variational
    one-form is a total divergence."""
    return is_variationally_trivial(contract_with_EL(vf, lagrangian).expr)


@dataclass(frozen=True)
class NilpotencyReport:
    nilpotent: bool
    odd: bool
    residuals: dict[VariableId, GradedPolynomial]
    notes: tuple[str, ...] = ()


def check_nilpotent(vf: GeneralizedVectorField) -> NilpotencyReport:
    """Nilpotency of the prolonged derivation.

    theta is nilpotent iff theta(upsilon^A) = 0 for every component; an even
    or parity-mixed candidate cannot be nilpotent and is reported as such
    without expanding the residuals.
    """
    if vf.relative_parity() is not Parity.ODD:
        return NilpotencyReport(
            nilpotent=False,
            odd=False,
            residuals={},
            notes=("candidate is not an odd derivation: [upsilon^A] must equal [A]+1",),
        )
    residuals: dict[VariableId, GradedPolynomial] = {}
    for var in sorted(vf.components, key=lambda a: a.rank):
        r = prolong_apply(vf, vf.components[var])
        if not r.is_zero():
            residuals[var] = r
    return NilpotencyReport(not residuals, True, residuals)


@dataclass(frozen=True)
class FirstVariationalReport:
    residual: GradedPolynomial
    triviality: TrivialityReport

    @property
    def holds(self) -> bool:
        return self.triviality.trivial


def first_variational_residual(
    vf: GeneralizedVectorField, lagrangian: Density
) -> FirstVariationalReport:
    """R = Lie_theta(L) - contraction; the first variational formula says R
    is a total divergence for every vertical field."""
    lie = lie_derivative_density(vf, lagrangian)
    contraction = contract_with_EL(vf, lagrangian)
    residual = lie.expr - contraction.expr
    return FirstVariationalReport(residual, is_variationally_trivial(residual))
