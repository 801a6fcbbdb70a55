"""Total derivatives, graded partial derivatives, Euler-Lagrange operators.

The total derivative along direction lam acts on the base coordinates and
raises every jet variable by one index; it is an even derivation, so no
Koszul signs appear in its Leibniz rule.  Left and right partial derivatives
with respect to a jet variable differ by the sign picked up while the
derivative symbol passes the factors on one side or the other.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .graded_poly import (
    Density,
    GradedPolynomial,
    JetVariable,
    Parity,
    Scalar,
    VariableId,
    gp_normalize,
)
from .multiindex import MultiIndex

TRIVIAL_TOPOLOGY_NOTE = (
    "exactness decided by vanishing variational derivatives;"
    " base and fibers assumed contractible"
)
FIELD_INDEPENDENT_NOTE = (
    "density depends on base coordinates only;"
    " accepted as a total divergence on a contractible base"
)


def total_derivative(p: GradedPolynomial, direction: int) -> GradedPolynomial:
    """Apply the total derivative d_direction once."""
    raw: list[tuple[Scalar, tuple[JetVariable, ...]]] = []
    for flat, s in p.raw_terms():
        ds = s.diff(direction)
        if not ds.is_zero():
            raw.append((ds, flat))
        for i, jv in enumerate(flat):
            raised = flat[:i] + (jv.raised(direction),) + flat[i + 1 :]
            raw.append((s, raised))
    return gp_normalize(raw)


def total_derivative_multi(p: GradedPolynomial, mi: MultiIndex) -> GradedPolynomial:
    out = p
    for direction in mi.entries:
        out = total_derivative(out, direction)
    return out


def partial_left(p: GradedPolynomial, v: JetVariable) -> GradedPolynomial:
    """Left graded derivative: the sign counts odd factors left of the hit."""
    acc: dict[tuple[JetVariable, ...], Scalar] = {}
    v_odd = v.parity is Parity.ODD
    for flat, s in p.raw_terms():
        odd_before = 0
        for i, jv in enumerate(flat):
            if jv == v:
                rest = flat[:i] + flat[i + 1 :]
                contrib = -s if (v_odd and odd_before & 1) else s
                cur = acc.get(rest)
                acc[rest] = contrib if cur is None else cur + contrib
            if jv.parity is Parity.ODD:
                odd_before += 1
    return GradedPolynomial(acc)


def partial_right(p: GradedPolynomial, v: JetVariable) -> GradedPolynomial:
    """Right graded derivative: the sign counts odd factors right of the hit."""
    acc: dict[tuple[JetVariable, ...], Scalar] = {}
    v_odd = v.parity is Parity.ODD
    for flat, s in p.raw_terms():
        odd_total = sum(1 for jv in flat if jv.parity is Parity.ODD)
        odd_before = 0
        for i, jv in enumerate(flat):
            here_odd = 1 if jv.parity is Parity.ODD else 0
            if jv == v:
                odd_after = odd_total - odd_before - here_odd
                rest = flat[:i] + flat[i + 1 :]
                contrib = -s if (v_odd and odd_after & 1) else s
                cur = acc.get(rest)
                acc[rest] = contrib if cur is None else cur + contrib
            odd_before += here_odd
    return GradedPolynomial(acc)


@dataclass(frozen=True)
class VariationalDerivatives:
    """Euler-Lagrange components keyed by base variable."""

    components: dict[VariableId, GradedPolynomial]

    def __getitem__(self, var: VariableId) -> GradedPolynomial:
        return self.components.get(var, GradedPolynomial.zero())

    def nonzero(self) -> dict[VariableId, GradedPolynomial]:
        return {v: e for v, e in self.components.items() if not e.is_zero()}

    def all_zero(self) -> bool:
        return not self.nonzero()


def _as_expr(density: Density | GradedPolynomial) -> GradedPolynomial:
    return density.expr if isinstance(density, Density) else density


def euler_lagrange(
    density: Density | GradedPolynomial,
    variables: list[VariableId] | None = None,
) -> VariationalDerivatives:
    """E_A = sum over multi-indices present of (-1)^|Lam| d_Lam(dL/dA_Lam).

    With variables=None the variation runs over every base variable that
    occurs in the density; variables absent from it have E_A = 0 anyway.
    """
    expr = _as_expr(density)
    per_var: dict[VariableId, list[MultiIndex]] = {}
    for jv in expr.variables():
        per_var.setdefault(jv.var, []).append(jv.mi)
    if variables is None:
        targets = sorted(per_var, key=lambda v: v.rank)
    else:
        targets = list(variables)
    components: dict[VariableId, GradedPolynomial] = {}
    for var in targets:
        total = GradedPolynomial.zero()
        for mi in per_var.get(var, []):
            inner = partial_left(expr, JetVariable(var, mi))
            if inner.is_zero():
                continue
            term = total_derivative_multi(inner, mi)
            if mi.order & 1:
                term = -term
            total = total + term
        components[var] = total
    return VariationalDerivatives(components)


@dataclass(frozen=True)
class TrivialityReport:
    trivial: bool
    residuals: dict[VariableId, GradedPolynomial]
    assumptions: tuple[str, ...]


def is_variationally_trivial(density: Density | GradedPolynomial) -> TrivialityReport:
    """Decide whether a density is a total divergence.

    A density is d_H-exact iff all its variational derivatives vanish, up to
    the topology caveat recorded in the report's assumptions.
    """
    expr = _as_expr(density)
    derivs = euler_lagrange(expr, None)
    residuals = derivs.nonzero()
    assumptions = [TRIVIAL_TOPOLOGY_NOTE]
    if not expr.is_zero() and not expr.variables():
        assumptions.append(FIELD_INDEPENDENT_NOTE)
    return TrivialityReport(not residuals, residuals, tuple(assumptions))
