import math

import pytest

from confhyp.expressions import ExpressionDomainError, ExpressionSyntaxError, evaluate, parse
from confhyp.jets import Jet


def _at(text, **point):
    names = tuple(point)
    e = parse(text, names)
    return evaluate(e, {n: Jet.variable(i, len(names), 2, v) for i, (n, v) in enumerate(point.items())})


def test_caret_is_power_and_constants_resolve():
    assert _at("x^3 + pi", x=2.0).value() == pytest.approx(8 + math.pi)
    assert _at("exp(1) - e", x=0.0).value() == pytest.approx(0.0, abs=1e-15)


def test_derivatives_flow_through_functions():
    j = _at("sin(x*y) + sqrt(x)", x=0.5, y=2.0)
    assert j.coeff((1, 0)) == pytest.approx(2.0 * math.cos(1.0) + 0.5 / math.sqrt(0.5))


@pytest.mark.parametrize("text", ["x +", "foo(x)", "x.real", "[x]", "lambda: x", "x if x else 1"])
def test_rejected_syntax(text):
    with pytest.raises(ExpressionSyntaxError):
        parse(text, ("x",))


def test_unknown_variable_rejected():
    with pytest.raises(ExpressionSyntaxError):
        parse("x + q", ("x",))


def test_syntax_error_reports_column():
    with pytest.raises(ExpressionSyntaxError) as info:
        parse("x^2 + *y", ("x", "y"))
    assert info.value.column == 7  # the '*', counted in the original text


def test_domain_error():
    with pytest.raises(ExpressionDomainError):
        _at("1/(x - 1)", x=1.0)
