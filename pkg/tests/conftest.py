"""Shared helpers for building variables and jets tersely in tests."""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from nkt.graded_poly import (  # noqa: E402
    GradedPolynomial,
    JetVariable,
    Kind,
    Parity,
    VariableId,
)
from nkt.multiindex import MultiIndex  # noqa: E402


def even_field(name: str, *components: int) -> VariableId:
    return VariableId(Kind.FIELD, name, tuple(components), Parity.EVEN)


def odd_field(name: str, *components: int) -> VariableId:
    return VariableId(Kind.FIELD, name, tuple(components), Parity.ODD)


def odd_ghost(name: str, *components: int) -> VariableId:
    return VariableId(Kind.GHOST, name, tuple(components), Parity.ODD)


def even_ghost(name: str, *components: int) -> VariableId:
    return VariableId(Kind.GHOST, name, tuple(components), Parity.EVEN)


def v(var: VariableId, *directions: int) -> GradedPolynomial:
    """The jet variable var_(directions) as a polynomial."""
    return GradedPolynomial.variable(JetVariable(var, MultiIndex(directions)))
