"""Theory file parsing, resolution, validation, and the render roundtrip."""

import random
from fractions import Fraction
from pathlib import Path

import pytest

from nkt.errors import ParseError, SemanticError
from nkt.graded_poly import (
    GradedPolynomial,
    JetVariable,
    Kind,
    Parity,
    antifield_of,
)
from nkt.multiindex import EMPTY, MultiIndex
from nkt.randgen import random_theory
from nkt.theory_dsl import (
    Theory,
    kronecker,
    levi_civita,
    minkowski,
    parse_expression,
    parse_theory,
    render_theory,
    resolve_component,
)

THEORY_DIR = Path(__file__).resolve().parent.parent / "theories"

SCALAR = """
theory scalar
dim 1
field y parity even
lagrangian 1/2 * d(y;x)^2
"""


def jet(theory: Theory, text: str, *entries: int) -> GradedPolynomial:
    var = resolve_component(theory, text)
    return GradedPolynomial.variable(JetVariable(var, MultiIndex(tuple(entries))))


class TestDeclarations:
    def test_minimal_theory(self):
        t = parse_theory(SCALAR)
        assert t.name == "scalar"
        assert t.dim == 1
        decl = t.variables["y"]
        assert decl.kind is Kind.FIELD
        assert decl.parity is Parity.EVEN
        assert decl.indices == ()

    def test_indexed_family_and_stage(self):
        t = parse_theory(
            """
            theory t
            dim 2
            field a[mu=0..1,r=1..3] parity even
            ghost c[r=1..3] parity odd
            ghost e parity even stage 0
            """
        )
        assert t.variables["a"].component_count() == 6
        assert t.variables["e"].stage == 0
        assert len(t.fields()) == 6
        assert len(t.ghosts()) == 4

    def test_dim_must_come_before_declarations(self):
        with pytest.raises(ParseError):
            parse_theory("dim 1\ntheory t\nfield y parity even")

    def test_dim_bounds(self):
        with pytest.raises(SemanticError):
            parse_theory("theory t\ndim 0")
        with pytest.raises(SemanticError):
            parse_theory("theory t\ndim 10")

    def test_duplicate_names_rejected(self):
        with pytest.raises(SemanticError):
            parse_theory("theory t\ndim 1\nfield y parity even\nghost y parity odd")

    def test_reserved_names_rejected(self):
        for bad in ("d", "sum", "witness", "x", "x2"):
            with pytest.raises(SemanticError):
                parse_theory(f"theory t\ndim 1\nfield {bad} parity even")

    def test_component_budget(self):
        with pytest.raises(SemanticError):
            parse_theory("theory t\ndim 1\nfield a[i=0..600] parity even")

    def test_stage_parity_rule(self):
        # odd plain ghosts force even stage-0 and odd stage-1 ghosts
        with pytest.raises(SemanticError):
            parse_theory(
                "theory t\ndim 1\nghost xi parity odd\nghost e parity odd stage 0"
            )
        t = parse_theory(
            """
            theory t
            dim 1
            ghost xi parity odd
            ghost e parity even stage 0
            ghost f parity odd stage 1
            """
        )
        assert t.variables["f"].stage == 1


class TestExpressions:
    def test_el_of_the_minimal_lagrangian(self):
        from nkt.jet_calculus import euler_lagrange

        t = parse_theory(SCALAR)
        y = resolve_component(t, "y")
        derivs = euler_lagrange(t.lagrangian)
        assert derivs[y] == -jet(t, "y", 0, 0)

    def test_nested_total_derivatives(self):
        t = parse_theory(SCALAR)
        assert parse_expression("d(d(y;x);x)", t) == jet(t, "y", 0, 0)
        assert parse_expression("y[;x,x]", t) == jet(t, "y", 0, 0)

    def test_rational_coefficients_and_powers(self):
        t = parse_theory(SCALAR)
        y = jet(t, "y")
        assert parse_expression("-3/4 * y^2 + y", t) == (y * y).scaled(Fraction(-3, 4)) + y
        assert parse_expression("(1 - 2) * y", t) == -y

    def test_unary_minus_binds_looser_than_power(self):
        t = parse_theory(SCALAR)
        y = jet(t, "y")
        assert parse_expression("-y^2", t) == -(y * y)

    def test_sum_binder_in_components_and_directions(self):
        t = parse_theory(
            "theory t\ndim 2\nfield a[mu=0..1] parity even"
        )
        expected = sum(
            (jet(t, f"a[{m}]", m) for m in range(2)), GradedPolynomial.zero()
        )
        assert parse_expression("sum(m,0..1, d(a[m];m))", t) == expected

    def test_sum_span_bound(self):
        t = parse_theory(SCALAR)
        with pytest.raises(ParseError):
            parse_expression("sum(i,0..600, y)", t)

    def test_sum_binder_may_not_shadow_declarations(self):
        t = parse_theory(SCALAR)
        with pytest.raises(SemanticError):
            parse_expression("sum(y,0..1, y)", t)

    def test_exponent_bound(self):
        t = parse_theory(SCALAR)
        assert not parse_expression("y^64", t).is_zero()
        with pytest.raises(ParseError):
            parse_expression("y^65", t)

    def test_antifield_references(self):
        t = parse_theory(SCALAR)
        y = resolve_component(t, "y")
        bar = antifield_of(y)
        assert parse_expression("~y", t) == GradedPolynomial.variable(
            JetVariable(bar, EMPTY)
        )
        assert parse_expression("d(~y;x)", t) == GradedPolynomial.variable(
            JetVariable(bar, MultiIndex((0,)))
        )

    def test_division_only_in_literals(self):
        t = parse_theory(SCALAR)
        with pytest.raises(ParseError):
            parse_expression("y/2", t)

    def test_unknown_names_and_bad_indices(self):
        t = parse_theory(SCALAR)
        with pytest.raises(SemanticError):
            parse_expression("z", t)
        with pytest.raises(SemanticError):
            parse_expression("y[1]", t)

    def test_jet_order_limit_is_a_semantic_error(self, monkeypatch):
        monkeypatch.setenv("NKT_MAX_JET_ORDER", "2")
        t = parse_theory(SCALAR)
        assert not parse_expression("d(y;x,x)", t).is_zero()
        with pytest.raises(SemanticError):
            parse_expression("d(y;x,x,x)", t)

    def test_coordinates_enter_scalars(self):
        t = parse_theory("theory t\ndim 2\nfield y parity even")
        p = parse_expression("x0 * d(y;x1)", t)
        ((flat, s),) = p.raw_terms()
        assert flat == (JetVariable(resolve_component(t, "y"), MultiIndex((1,))),)
        assert s.terms == ((((0, 1),), Fraction(1)),)


class TestConstants:
    def test_levi_civita_signs(self):
        eps = levi_civita(3)
        assert eps.entry((1, 2, 3)) == 1
        assert eps.entry((2, 1, 3)) == -1
        assert eps.entry((1, 1, 3)) == 0

    def test_kronecker_and_minkowski(self):
        assert kronecker(3).entry((2, 2)) == 1
        assert kronecker(3).entry((1, 2)) == 0
        g = minkowski(4)
        assert g.entry((0, 0)) == 1
        assert g.entry((3, 3)) == -1

    def test_explicit_table(self):
        t = parse_theory(
            """
            theory t
            dim 1
            field y parity even
            constant q[1..2,1..2] = {
              (1,1): 1/3
              (2,1): -2
            }
            """
        )
        assert t.constants["q"].entry((1, 1)) == Fraction(1, 3)
        assert t.constants["q"].entry((1, 2)) == 0
        assert parse_expression("q[2,1] * y", t) == jet(t, "y").scaled(Fraction(-2))

    def test_table_requires_declared_ranges(self):
        with pytest.raises(SemanticError):
            parse_theory("theory t\ndim 1\nconstant q = { (1): 1 }")

    def test_unknown_builder(self):
        with pytest.raises(ParseError):
            parse_theory("theory t\ndim 1\nconstant q = hadamard(2)")

    def test_constant_contraction_in_sums(self):
        t = parse_theory(
            """
            theory t
            dim 1
            field y[r=1..3] parity even
            constant eps = levi_civita(3)
            """
        )
        p = parse_expression("sum(p,1..3, sum(q,1..3, eps[1,p,q]*y[p]*y[q]))", t)
        assert p.is_zero()  # antisymmetric contraction of a symmetric square


class TestValidation:
    def test_lagrangian_must_be_even(self):
        with pytest.raises(SemanticError):
            parse_theory("theory t\ndim 1\nfield c parity odd\nlagrangian c")

    def test_lagrangian_must_be_ghost_free(self):
        with pytest.raises(SemanticError):
            parse_theory(
                "theory t\ndim 1\nfield y parity even\nghost xi parity odd\n"
                "ghost chi parity odd\nlagrangian y * xi * chi"
            )

    def test_gauge_operator_typing(self):
        base = "theory t\ndim 1\nfield y parity even\nghost xi parity odd\n"
        with pytest.raises(SemanticError):
            # parameter must be a ghost
            parse_theory(base + "operator p role gauge {\n  (y, y, []) : 1\n}")
        with pytest.raises(SemanticError):
            # target must be a field
            parse_theory(base + "operator p role gauge {\n  (xi, xi, []) : 1\n}")

    def test_operator_coefficients_are_field_sector(self):
        base = "theory t\ndim 1\nfield y parity even\nghost xi parity odd\n"
        with pytest.raises(SemanticError):
            parse_theory(base + "operator p role gauge {\n  (xi, y, []) : ~y\n}")
        with pytest.raises(SemanticError):
            parse_theory(base + "operator p role gauge {\n  (xi, y, []) : xi\n}")

    def test_stage_operator_typing(self):
        base = (
            "theory t\ndim 1\nfield y parity even\nghost xi parity odd\n"
            "ghost e parity even stage 0\n"
        )
        t = parse_theory(base + "operator s role stage 0 {\n  (e, xi, []) : y\n}")
        assert t.operators["s"].stage == 0
        with pytest.raises(SemanticError):
            # a stage-0 operator maps stage-0 ghosts to plain ghosts, not fields
            parse_theory(base + "operator s role stage 0 {\n  (e, y, []) : 1\n}")

    def test_binder_sugar_expansion(self):
        t = parse_theory(
            """
            theory t
            dim 2
            field a[mu=0..1] parity even
            ghost xi parity odd
            operator p role gauge {
              (xi, a[mu=0..1], [mu]) : 1
            }
            """
        )
        op = t.operators["p"]
        assert len(op.coeffs) == 2
        a0 = resolve_component(t, "a[0]")
        xi = resolve_component(t, "xi")
        assert op.coefficient(xi, a0, MultiIndex((0,))) == GradedPolynomial.one()

    def test_binder_may_not_shadow_a_declaration(self):
        with pytest.raises(SemanticError):
            parse_theory(
                """
                theory t
                dim 2
                field a[mu=0..1] parity even
                ghost xi parity odd
                operator p role gauge {
                  (xi, a[xi=0..1], [xi]) : 1
                }
                """
            )

    def test_certificate_labels_resolve_to_stage_ghosts(self):
        text = """
            theory t
            dim 1
            field y parity even
            ghost xi parity odd
            ghost e parity even stage 0
            lagrangian 1/2*y^2
            operator s role stage 0 {
              (e, xi, []) : y
            }
            certificate e {
              witness : y * ~y
            }
            """
        t = parse_theory(text)
        cert = t.certificates["e"]
        assert cert.witness is not None
        with pytest.raises(SemanticError):
            parse_theory(text.replace("certificate e", "certificate nobody"))


class TestRoundtrip:
    @pytest.mark.parametrize(
        "name",
        ["scalar", "scalar_mass", "two_form", "on_shell_pair", "ym_su2"],
    )
    def test_golden_files(self, name):
        text = (THEORY_DIR / f"{name}.nkt").read_text()
        theory = parse_theory(text)
        rendered = render_theory(theory)
        again = parse_theory(rendered)
        assert again == theory
        assert render_theory(again) == rendered

    def test_fuzzed_theories(self):
        rng = random.Random(1105)
        for i in range(100):
            theory = random_theory(rng, f"fuzz{i}")
            assert parse_theory(render_theory(theory)) == theory

    def test_malformed_inputs_raise_cleanly(self):
        nasty = [
            "",
            "theory",
            "theory t",
            "theory t\ndim",
            "theory t\ndim 1\nfield y parity",
            "theory t\ndim 1\nlagrangian (",
            "theory t\ndim 999999999999",
            "theory t\ndim 1\nfield y parity even\nlagrangian y^999999",
            "theory t\ndim 1\nfield y parity even\noperator p role gauge {",
            "theory t\ndim 1\n\x00",
            "theory t\ndim 1\nfield y parity even\nlagrangian y ) y",
            "theory ümlaut\ndim 1",
            "lagrangian y",
            "theory t\ndim 1\nconstant q[1..0] = { (1): 1 }",
        ]
        for text in nasty:
            with pytest.raises((ParseError, SemanticError)):
                parse_theory(text)

    def test_error_spans_point_at_the_offence(self):
        try:
            parse_theory("theory t\ndim 1\nfield y parity even\nlagrangian z + y")
        except SemanticError as err:
            assert err.span is not None
            assert err.span.line == 4
        else:
            pytest.fail("undeclared name accepted")


class TestResolveComponent:
    def test_plain_indexed_and_antifield(self):
        t = parse_theory(
            "theory t\ndim 2\nfield a[mu=0..1] parity even\nghost xi parity odd"
        )
        a1 = resolve_component(t, "a[1]")
        assert a1.components == (1,)
        assert resolve_component(t, "~a[1]") == antifield_of(a1)
        assert resolve_component(t, "~xi").kind is Kind.ANTIGHOST

    def test_rejects_unknowns_and_malformed(self):
        t = parse_theory("theory t\ndim 1\nfield y parity even")
        for bad in ("z", "y[0]", "y[", "y y", ""):
            with pytest.raises((ParseError, SemanticError)):
                resolve_component(t, bad)
