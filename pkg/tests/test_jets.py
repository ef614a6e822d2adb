import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from confhyp import jets
from confhyp.jets import DomainError, Jet, JetError, SingularJetError, einsum
from confhyp.hypersurface import random_jet

# Taylor coefficients of exp(x) sin(x + 2y) / (1 + x^2 + y) at (0.3, -0.2),
# computed symbolically and frozen.
TAYLOR_ORACLE = {
    (0, 0): -0.15141687275407387, (0, 1): 3.1883675785446948, (0, 2): -3.279601736002745,
    (0, 3): 1.6727882635606093, (0, 4): -1.9804819566232506, (1, 0): 1.459780048288394,
    (1, 1): -0.46859358400253376, (1, 2): 0.02207459208508759, (1, 3): -3.366572008228566,
    (2, 0): 0.6951280672543704, (2, 1): -3.7447387212306666, (2, 2): 4.85939935936141,
    (3, 0): -1.5553162970399141, (3, 1): 3.893464832469697, (4, 0): 0.29272121396415635,
}


def test_composite_taylor_coefficients_match_symbolic_oracle():
    x = Jet.variable(0, 2, 4, 0.3)
    y = Jet.variable(1, 2, 4, -0.2)
    f = jets.exp(x) * jets.sin(x + 2 * y) / (1 + x * x + y)
    for alpha, want in TAYLOR_ORACLE.items():
        assert f.coeff(alpha) == pytest.approx(want, abs=1e-12)


def test_univariate_functions_against_math():
    x = Jet.variable(0, 1, 6, 0.7)
    for fn, ref in ((jets.exp, math.exp), (jets.log, math.log), (jets.sqrt, math.sqrt),
                    (jets.sin, math.sin), (jets.cos, math.cos)):
        assert fn(x).value() == pytest.approx(ref(0.7), rel=1e-14)
    # d^k/dx^k exp = exp
    e = jets.exp(x)
    for k in range(7):
        assert e.coeff((k,)) * math.factorial(k) == pytest.approx(math.exp(0.7), rel=1e-13)


def test_power_matches_binomial_series():
    x = Jet.variable(0, 1, 5, 0.0)
    p = jets.power(1 + x, 0.5)
    coeffs = [1, 0.5, -0.125, 0.0625, -0.0390625, 0.02734375]
    assert np.allclose([p.coeff((k,)) for k in range(6)], coeffs, atol=1e-15)


def test_graded_ordering_and_sizes():
    sp = jets.jet_space(3, 4)
    assert sp.size == math.comb(7, 3)
    degrees = sp.exps.sum(axis=1)
    assert np.all(np.diff(degrees) >= 0)
    assert sp.index((0, 0, 0)) == 0


def test_log_outside_domain_raises():
    with pytest.raises(DomainError):
        jets.log(Jet.variable(0, 1, 3, -1.0))


def test_differentiating_order_zero_jet_raises():
    with pytest.raises(JetError):
        Jet.constant(1.0, 2, 0).d(0)


def test_inverse_of_singular_matrix_raises():
    G = Jet.constant(np.array([[1.0, 2.0], [2.0, 4.0]]), 2, 3)
    with pytest.raises((SingularJetError, np.linalg.LinAlgError)):
        jets.inv(G)


def test_extend_and_restrict_roundtrip(rng):
    a = random_jet((), 2, 5, rng)
    b = a.extend()
    assert b.dim == 3
    assert np.allclose(b.restrict().c, a.c)
    assert b.d(2).max_abs() == 0.0


def test_divide_last_inverts_multiplication(rng):
    a = random_jet((), 3, 6, rng)
    t = Jet.variable(2, 3, 6)
    q = (a * t * t).divide_last(2)
    assert np.allclose(q.c, a.truncate(4).c, atol=1e-14)


jet_pairs = st.integers(0, 10_000).map(lambda s: np.random.default_rng(s))


@given(jet_pairs)
def test_product_is_associative_and_commutative(g):
    a, b, c = (random_jet((), 3, 5, g) for _ in range(3))
    assert np.allclose(((a * b) * c).c, (a * (b * c)).c, atol=1e-12)
    assert np.allclose((a * b).c, (b * a).c, atol=1e-14)


@given(jet_pairs)
def test_leibniz_rule(g):
    a, b = random_jet((), 2, 6, g), random_jet((), 2, 6, g)
    lhs = (a * b).d(1)
    rhs = a.truncate(5) * b.d(1) + a.d(1) * b.truncate(5)
    assert np.allclose(lhs.c, rhs.c, atol=1e-12)


@given(jet_pairs)
def test_matrix_inverse(g):
    h = random_jet((3, 3), 3, 4, g, scale=0.3)
    G = Jet.constant(np.eye(3), 3, 4) + 0.5 * (h + h.T)
    I = einsum("ij,jk->ik", G, jets.inv(G))
    assert np.allclose(I.c, jets.identity(3, 3, 4).c, atol=1e-12)


@given(jet_pairs)
def test_einsum_matches_numpy_on_values(g):
    A, B = random_jet((2, 3), 2, 3, g), random_jet((3, 4), 2, 3, g)
    C = einsum("ij,jk->ik", A, B)
    assert np.allclose(C.value(), np.asarray(A.value()) @ np.asarray(B.value()), atol=1e-14)


@given(jet_pairs)
def test_shift_reexpands_polynomial(g):
    a = random_jet((), 2, 3, g)
    p = np.array([0.1, -0.2])
    s = a.shift(p)
    # a is a cubic polynomial, so its shifted truncation is exact
    x = [Jet.variable(i, 2, 3, p[i]) for i in range(2)]
    direct = jets.compose_polynomial(a, x)
    assert np.allclose(s.c, direct.c, atol=1e-13)
