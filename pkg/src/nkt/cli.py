"""Command line front end over theory files.

Every subcommand parses one theory file, runs a single computation or check,
and prints either a human-readable report or (with ``--json``) a JSON object
with a fixed schema::

    {"check": ..., "theory": ..., "target": ..., "pass": ...,
     "residuals": [{"where": ..., "expr": ...}, ...],
     "assumptions": [...],
     "certificates": [{"label": ..., "verified": ...}, ...],
     "elapsed_ms": ...}

Exit codes: 0 when the check passed (computations always pass when they
complete), 1 when the check ran and failed, 2 on usage, parse, or typing
errors.  Output is deterministic: identical inputs give byte-identical
reports apart from elapsed_ms.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from .derivations import (
    GeneralizedVectorField,
    check_nilpotent,
    check_variational,
)
from .errors import NktError, SemanticError
from .graded_poly import Density, render_polynomial
from .jet_calculus import euler_lagrange, is_variationally_trivial, total_derivative
from .koszul_tate import (
    KoszulTateContext,
    check_reducibility_chain,
    extend_with_operator,
    kt_apply,
    kt_context,
)
from .noether import (
    ROLE_GAUGE,
    ROLE_STAGE,
    LinearJetOperator,
    NonVariationalError,
    check_noether_identity,
    derive_gauge_from_noether,
    derive_noether_from_gauge,
    eta,
    linearize_in_ghosts,
)
from .randgen import graded_fields, random_operator, random_polynomial
from .theory_dsl import (
    Theory,
    _render_operator,
    parse_expression,
    parse_theory,
    resolve_component,
)


@dataclass
class VerificationReport:
    """One subcommand's outcome in both text and JSON form.

    residuals carries (where, expr) pairs: obstruction terms for checks,
    computed results for computation commands.  body holds preformatted text
    lines; when empty the standard check rendering is used.
    """

    check: str
    theory: str
    target: str
    ok: bool
    residuals: list[tuple[str, str]] = dc_field(default_factory=list)
    assumptions: list[str] = dc_field(default_factory=list)
    certificates: list[tuple[str, bool]] = dc_field(default_factory=list)
    body: list[str] = dc_field(default_factory=list)
    verdict: str = ""

    def to_json(self, elapsed_ms: int) -> dict:
        return {
            "check": self.check,
            "theory": self.theory,
            "target": self.target,
            "pass": self.ok,
            "residuals": [{"where": w, "expr": e} for w, e in self.residuals],
            "assumptions": list(self.assumptions),
            "certificates": [
                {"label": label, "verified": v} for label, v in self.certificates
            ],
            "elapsed_ms": elapsed_ms,
        }

    def text(self) -> str:
        if self.body:
            return "\n".join(self.body)
        head = f"{self.check} {self.theory}"
        if self.target:
            head += f" {self.target}"
        head += ": PASS" if self.ok else ": FAIL"
        if self.verdict:
            head += f" ({self.verdict})"
        lines = [head]
        for where, expr in self.residuals:
            lines.append(f"  residual {where}: {expr}")
        for note in self.assumptions:
            lines.append(f"  note: {note}")
        for label, verified in self.certificates:
            state = "verified" if verified else "not verified"
            lines.append(f"  certificate {label}: {state}")
        return "\n".join(lines)


# --------------------------------------------------------------------------
# Shared lookups.


def _require_lagrangian(theory: Theory) -> Density:
    if theory.lagrangian is None:
        raise SemanticError(f"theory {theory.name} declares no lagrangian")
    return theory.lagrangian


def _operator(theory: Theory, name: str) -> LinearJetOperator:
    op = theory.operators.get(name)
    if op is None:
        raise SemanticError(f"no operator named {name!r} in theory {theory.name}")
    return op


def _derivation(theory: Theory, name: str) -> GeneralizedVectorField:
    vf = theory.derivations.get(name)
    if vf is None:
        raise SemanticError(f"no derivation named {name!r} in theory {theory.name}")
    return vf


def _operator_entries(
    op: LinearJetOperator, dim: int
) -> list[tuple[str, str]]:
    out = []
    for param, target, mi in op.sorted_keys():
        where = f"{param.render()}|{target.render()}|{mi.render()}"
        out.append((where, render_polynomial(op.coeffs[(param, target, mi)], dim)))
    return out


def _residual_entries(
    residuals: dict, dim: int
) -> list[tuple[str, str]]:
    out = []
    for var in sorted(residuals, key=lambda v: v.rank):
        poly = residuals[var]
        if not poly.is_zero():
            out.append((var.render(), render_polynomial(poly, dim)))
    return out


# --------------------------------------------------------------------------
# Subcommand bodies.  Each returns a VerificationReport; NktError escapes to
# main, which maps it to exit code 2.


def _cmd_el(theory: Theory, args: argparse.Namespace) -> VerificationReport:
    derivs = euler_lagrange(_require_lagrangian(theory))
    pairs = []
    for var in sorted(derivs.components, key=lambda v: v.rank):
        pairs.append(
            (var.render(), render_polynomial(derivs.components[var], theory.dim))
        )
    body = [f"E_{name} = {expr}" for name, expr in pairs]
    return VerificationReport("el", theory.name, "", True, pairs, [], [], body)


def _cmd_eta(theory: Theory, args: argparse.Namespace) -> VerificationReport:
    op = _operator(theory, args.op)
    out = eta(op)
    body = _render_operator(f"eta_{args.op}", out, theory.dim)
    return VerificationReport(
        "eta", theory.name, args.op, True,
        _operator_entries(out, theory.dim), [], [], body,
    )


def _cmd_derive_noether(
    theory: Theory, args: argparse.Namespace
) -> VerificationReport:
    lag = _require_lagrangian(theory)
    vf = _derivation(theory, args.sym)
    # only the field components define the symmetry operator; ghost
    # components carry the structure functions and may be ghost-quadratic
    from .graded_poly import Kind

    field_part = GeneralizedVectorField(
        {v: p for v, p in vf.components.items() if v.kind is Kind.FIELD}
    )
    if not field_part.components:
        raise SemanticError(f"derivation {args.sym!r} has no field components")
    op = linearize_in_ghosts(field_part, theory.dim)
    try:
        noether_op, report = derive_noether_from_gauge(op, lag)
    except NonVariationalError as err:
        return VerificationReport(
            "derive-noether", theory.name, args.sym, False,
            _residual_entries(err.report.residuals, theory.dim),
            list(err.report.assumptions),
        )
    assumptions = list(report.variational.assumptions) if report.variational else []
    body = _render_operator(f"{args.sym}_noether", noether_op, theory.dim)
    return VerificationReport(
        "derive-noether", theory.name, args.sym, True,
        _operator_entries(noether_op, theory.dim), assumptions, [], body,
    )


def _cmd_derive_gauge(
    theory: Theory, args: argparse.Namespace
) -> VerificationReport:
    lag = _require_lagrangian(theory)
    op = _operator(theory, args.op)
    identity = check_noether_identity(op, lag)
    if not identity.holds:
        return VerificationReport(
            "derive-gauge", theory.name, args.op, False,
            _residual_entries(identity.residuals, theory.dim),
            ["operator does not satisfy the identity; nothing to derive"],
        )
    gauge_op, report = derive_gauge_from_noether(op, lag)
    assumptions = list(report.variational.assumptions) if report.variational else []
    assumptions += list(report.notes)
    body = _render_operator(f"{args.op}_gauge", gauge_op, theory.dim)
    return VerificationReport(
        "derive-gauge", theory.name, args.op, True,
        _operator_entries(gauge_op, theory.dim), assumptions, [], body,
    )


def _cmd_check_noether(
    theory: Theory, args: argparse.Namespace
) -> VerificationReport:
    lag = _require_lagrangian(theory)
    report = check_noether_identity(_operator(theory, args.op), lag)
    return VerificationReport(
        "check-noether", theory.name, args.op, report.holds,
        _residual_entries(report.residuals, theory.dim),
    )


def _cmd_check_variational(
    theory: Theory, args: argparse.Namespace
) -> VerificationReport:
    lag = _require_lagrangian(theory)
    report = check_variational(_derivation(theory, args.sym), lag)
    return VerificationReport(
        "check-variational", theory.name, args.sym, report.trivial,
        _residual_entries(report.residuals, theory.dim),
        list(report.assumptions),
    )


def _cmd_check_nilpotent(
    theory: Theory, args: argparse.Namespace
) -> VerificationReport:
    report = check_nilpotent(_derivation(theory, args.sym))
    return VerificationReport(
        "check-nilpotent", theory.name, args.sym, report.nilpotent,
        _residual_entries(report.residuals, theory.dim),
        list(report.notes),
        verdict="nilpotent" if report.nilpotent else "",
    )


def _build_kt_context(theory: Theory, include_stages: bool) -> KoszulTateContext:
    """Bottom-up complex: field equations, then every declared symmetry level.

    Gauge and stage operators are dualized through eta first; stage levels
    are added only when requested.  Two operators claiming the same
    antighost is an error.
    """
    ctx = kt_context(_require_lagrangian(theory), theory.dim)
    base = [op for op in theory.operators.values() if op.role != ROLE_STAGE]
    stages = sorted(
        (op for op in theory.operators.values() if op.role == ROLE_STAGE),
        key=lambda op: op.stage or 0,
    )
    for op in base:
        ctx = extend_with_operator(ctx, eta(op) if op.role == ROLE_GAUGE else op)
    if include_stages:
        for op in stages:
            ctx = extend_with_operator(ctx, eta(op))
    return ctx


def _cmd_kt(theory: Theory, args: argparse.Namespace) -> VerificationReport:
    ctx = _build_kt_context(theory, args.stages)
    p = parse_expression(args.expr, theory)
    out = render_polynomial(kt_apply(ctx, p), theory.dim)
    return VerificationReport(
        "kt", theory.name, args.expr, True, [(args.expr, out)], [], [], [out],
    )


def _cmd_check_reducibility(
    theory: Theory, args: argparse.Namespace
) -> VerificationReport:
    lag = _require_lagrangian(theory)
    gauge_ops = [op for op in theory.operators.values() if op.role == ROLE_GAUGE]
    if len(gauge_ops) != 1:
        raise SemanticError(
            "check-reducibility needs exactly one gauge-role operator;"
            f" theory {theory.name} declares {len(gauge_ops)}"
        )
    stage_ops = sorted(
        (op for op in theory.operators.values() if op.role == ROLE_STAGE),
        key=lambda op: op.stage or 0,
    )
    certificates = {
        resolve_component(theory, label): cert
        for label, cert in theory.certificates.items()
    }
    report = check_reducibility_chain(lag, gauge_ops[0], stage_ops, certificates)
    residuals = _residual_entries(report.identity_residuals, theory.dim)
    for var in sorted(report.stage_results, key=lambda v: v.rank):
        result = report.stage_results[var]
        if not result.ok:
            residuals.append(
                (var.render(), render_polynomial(result.residual, theory.dim))
            )
    cert_states = []
    for label in theory.certificates:
        var = resolve_component(theory, label)
        result = report.stage_results.get(var)
        cert_states.append((label, result.ok if result is not None else False))
    return VerificationReport(
        "check-reducibility", theory.name, "", report.holds,
        residuals, list(report.assumptions) + list(report.notes), cert_states,
    )


# --------------------------------------------------------------------------
# Built-in selftest: a fast, seeded slice of the property suite.

_SELFTEST_SCALAR = """
theory scalar
dim 1
field y parity even
lagrangian 1/2 * d(y;x)^2
"""

_SELFTEST_GAUGE = """
theory abelian
dim 2
field a[mu=0..1] parity even
ghost xi parity odd
lagrangian 1/2 * (d(a[1];x0) - d(a[0];x1))^2
operator shift role gauge {
  (xi, a[mu=0..1], [mu]) : 1
}
derivation brst {
  a[mu=0..1] : d(xi;mu)
}
"""

_SELFTEST_KITCHEN = """
theory kitchen
dim 2
field y parity even
field a[mu=0..1] parity even
ghost xi parity odd
ghost e parity even stage 0
constant eps = levi_civita(2)
constant t[1..2] = { (1): 3 (2): -1/2 }
lagrangian 1/2 * sum(m,0..1, d(y;m)^2) + t[1]*y^2
operator shift role gauge {
  (xi, a[mu=0..1], [mu]) : 1
}
operator null role stage 0 {
  (e, xi, []) : y
}
derivation sc {
  y : eps[1,2]*y
}
certificate e {
  witness : y * ~y * ~a[0]
}
"""


def _selftest() -> VerificationReport:
    rng = random.Random(20240817)
    results: list[tuple[str, bool]] = []

    def run(name: str, fn) -> None:
        try:
            results.append((name, bool(fn())))
        except Exception:
            results.append((name, False))

    def involution() -> bool:
        fields = graded_fields(2, 1)
        from .graded_poly import Kind, Parity, VariableId

        ghosts = [VariableId(Kind.GHOST, "g0", (), Parity.ODD)]
        for _ in range(20):
            dim = rng.randint(1, 2)
            op = random_operator(rng, ghosts, fields[:2], fields, dim, max_order=1)
            if eta(eta(op)) != op:
                return False
        return True

    def kt_squares_to_zero() -> bool:
        from .graded_poly import antifield_of

        fields = graded_fields(2, 0)
        for _ in range(15):
            dim = rng.randint(1, 2)
            lag = random_polynomial(rng, fields, dim, max_order=1, max_terms=2)
            ctx = kt_context(lag, dim, fields)
            pool = fields + [antifield_of(f) for f in fields]
            p = random_polynomial(rng, pool, dim, max_order=1, max_terms=3)
            if not kt_apply(ctx, kt_apply(ctx, p)).is_zero():
                return False
        return True

    def el_kills_divergences() -> bool:
        fields = graded_fields(2, 1)
        for _ in range(15):
            dim = rng.randint(1, 2)
            p = random_polynomial(rng, fields, dim, max_order=1)
            div = total_derivative(p, rng.randrange(dim))
            if not is_variationally_trivial(div).trivial:
                return False
        return True

    def parser_roundtrip() -> bool:
        from .theory_dsl import render_theory

        for text in (_SELFTEST_SCALAR, _SELFTEST_GAUGE, _SELFTEST_KITCHEN):
            theory = parse_theory(text)
            if parse_theory(render_theory(theory)) != theory:
                return False
        return True

    def noether_pipeline() -> bool:
        theory = parse_theory(_SELFTEST_GAUGE)
        op = theory.operators["shift"]
        _, report = derive_noether_from_gauge(op, theory.lagrangian)
        if not report.holds:
            return False
        return check_nilpotent(theory.derivations["brst"]).nilpotent

    run("eta involution", involution)
    run("squared boundary vanishes", kt_squares_to_zero)
    run("variational derivative kills divergences", el_kills_divergences)
    run("parser roundtrip", parser_roundtrip)
    run("noether pipeline", noether_pipeline)

    ok = all(flag for _, flag in results)
    body = [f"{name}: {'ok' if flag else 'FAILED'}" for name, flag in results]
    failures = [(name, "failed") for name, flag in results if not flag]
    return VerificationReport(
        "selftest", "", "", ok, failures,
        [f"{len(results)} suites"], [], body if ok else [],
    )


# --------------------------------------------------------------------------
# Argument parsing and dispatch.

_HANDLERS = {
    "el": _cmd_el,
    "eta": _cmd_eta,
    "derive-noether": _cmd_derive_noether,
    "derive-gauge": _cmd_derive_gauge,
    "check-noether": _cmd_check_noether,
    "check-variational": _cmd_check_variational,
    "check-nilpotent": _cmd_check_nilpotent,
    "kt": _cmd_kt,
    "check-reducibility": _cmd_check_reducibility,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nkt",
        description="Variational calculus and symmetry checks for theory files.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name: str, help_text: str, *, file: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        if file:
            p.add_argument("file", help="theory file to read")
        p.add_argument("--json", action="store_true", help="emit the JSON report")
        return p

    add("el", "variational derivatives of the lagrangian")
    add("eta", "dualize a named operator").add_argument(
        "--op", required=True, help="operator name"
    )
    add("derive-noether", "identity operator from a ghost-linear symmetry").add_argument(
        "--sym", required=True, help="derivation name"
    )
    add("derive-gauge", "gauge symmetry from an identity operator").add_argument(
        "--op", required=True, help="operator name"
    )
    add("check-noether", "verify the identity for a noether-role operator").add_argument(
        "--op", required=True, help="operator name"
    )
    add("check-variational", "is the symmetry variational?").add_argument(
        "--sym", required=True, help="derivation name"
    )
    add("check-nilpotent", "does the odd derivation square to zero?").add_argument(
        "--sym", required=True, help="derivation name"
    )
    kt = add("kt", "apply the boundary operator to an expression")
    kt.add_argument("--expr", required=True, help="expression over the theory")
    kt.add_argument(
        "--stages", action="store_true",
        help="extend the complex with stage-level operators",
    )
    add("check-reducibility", "verify the whole identity tower")
    add("selftest", "run the built-in property checks", file=False)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.monotonic()
    try:
        if args.command == "selftest":
            report = _selftest()
        else:
            try:
                text = Path(args.file).read_text(encoding="utf-8")
            except OSError as err:
                raise SemanticError(f"cannot read {args.file}: {err.strerror}")
            report = _HANDLERS[args.command](parse_theory(text), args)
    except NktError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    elapsed_ms = int((time.monotonic() - started) * 1000)
    if args.json:
        print(json.dumps(report.to_json(elapsed_ms), indent=2))
    else:
        print(report.text())
    return 0 if report.ok else 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
