"""
Tests for polynomial parsing, jets and multilinear forms.
"""
import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from steep.catalog import FIVE_VARIABLE, FOUR_VARIABLE
from steep.polyjet import (
    Jet,
    Polynomial,
    PolynomialSyntaxError,
    VariableRangeError,
    differentiate,
    gradient,
    jet_at,
    jet_from_coeffs,
    jet_indices,
    load_jet,
    multi_indices,
    multilinear,
    parse_polynomial,
)


def _random_polynomial(rng, n, max_degree=5, terms=8):
    coeffs = {}
    for _ in range(terms):
        k = int(rng.integers(1, max_degree + 1))
        mu = multi_indices(n, k)[int(rng.integers(len(multi_indices(n, k))))]
        coeffs[mu] = Fraction(int(rng.integers(-9, 10)), int(rng.integers(1, 7)))
    return Polynomial(n, coeffs)


def test_parse_four_variable_reference():
    """The four-variable reference function parses to its six terms."""
    p = FOUR_VARIABLE.polynomial()
    assert len(p.terms) == 6
    assert p.terms[(0, 5, 0, 0)] == Fraction(1, 5)
    assert p.terms[(1, 1, 0, 0)] == Fraction(1, 2)
    assert p.terms[(0, 0, 0, 1)] == -1


def test_parse_grammar_features():
    p = parse_polynomial("-(I1 + x2)^2 + 3/4*I1 - 2", 2)
    assert p.terms[(2, 0)] == -1
    assert p.terms[(1, 1)] == -2
    assert p.terms[(1, 0)] == Fraction(3, 4)
    assert p.terms[(0, 0)] == -2


def test_parse_error_reports_offset():
    with pytest.raises(PolynomialSyntaxError) as info:
        parse_polynomial("I1 +", 2)
    assert info.value.position == 4


def test_parse_rejects_unknown_characters():
    with pytest.raises(PolynomialSyntaxError) as info:
        parse_polynomial("I1 $ I2", 2)
    assert info.value.position == 3


def test_parse_variable_out_of_range():
    with pytest.raises(VariableRangeError):
        parse_polynomial("I1 + I3", 2)


def test_string_round_trip():
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = _random_polynomial(rng, 3)
        assert parse_polynomial(str(p), 3) == p


def test_differentiate():
    p = FOUR_VARIABLE.polynomial()
    assert differentiate(p, 4) == Polynomial.constant(4, -1)
    assert differentiate(p, 2) == parse_polynomial("I2^4 + I1/2", 4)
    with pytest.raises(ValueError):
        differentiate(p, 5)


def test_jet_of_four_variable_reference(example1_jet):
    assert example1_jet[(0, 5, 0, 0)] == 24
    assert example1_jet[(1, 1, 0, 0)] == Fraction(1, 2)
    assert example1_jet[(3, 0, 0, 0)] == 2
    assert gradient(example1_jet) == (0, 0, 0, -1)


def test_hessian_of_five_variable_reference():
    jet = jet_at(FIVE_VARIABLE.polynomial(), FIVE_VARIABLE.origin, 2)
    expected = {
        (2, 0, 0, 0, 0): -1,
        (0, 0, 1, 1, 0): 1,
        (0, 0, 2, 0, 0): -1,
        (0, 0, 0, 0, 2): -1,
    }
    for mu in multi_indices(5, 2):
        assert jet[mu] == expected.get(mu, 0), mu
    assert gradient(jet) == (0, 1, 0, 0, 0)


def test_multilinear_exact_value(example1_jet):
    value = multilinear(example1_jet, 2, [(1, 0, 0, 0), (0, 1, 0, 0)])
    assert value == Fraction(1, 2)
    assert isinstance(value, Fraction)


def test_multilinear_symmetry_and_linearity():
    """Random float jets: permuting arguments and scaling one slot behave as a symmetric form."""
    rng = np.random.default_rng(11)
    n, order = 4, 5
    jet = Jet.from_vector(n, order, rng.standard_normal(len(jet_indices(n, order))))
    for _ in range(10_000):
        k = int(rng.integers(2, order + 1))
        vectors = [rng.standard_normal(n) for _ in range(k)]
        base = multilinear(jet, k, vectors)
        permuted = [vectors[i] for i in rng.permutation(k)]
        assert multilinear(jet, k, permuted) == pytest.approx(base, rel=1e-10, abs=1e-10)

        a, b = rng.standard_normal(2)
        extra = rng.standard_normal(n)
        mixed = [a * vectors[0] + b * extra] + vectors[1:]
        expected = a * base + b * multilinear(jet, k, [extra] + vectors[1:])
        assert multilinear(jet, k, mixed) == pytest.approx(expected, rel=1e-9, abs=1e-9)


def test_multilinear_argument_checks(example1_jet):
    with pytest.raises(ValueError):
        multilinear(example1_jet, 6, [(1, 0, 0, 0)] * 6)
    with pytest.raises(ValueError):
        multilinear(example1_jet, 2, [(1, 0, 0, 0)])
    with pytest.raises(ValueError):
        multilinear(example1_jet, 1, [(1, 0, 0)])


def test_taylor_polynomial_is_exact():
    """The jet at the origin reproduces a polynomial of degree <= 5 without constant term."""
    rng = np.random.default_rng(5)
    for _ in range(25):
        p = _random_polynomial(rng, 3)
        assert jet_at(p, (0, 0, 0), 5).to_polynomial() == p


# Central-difference weights per derivative order, keyed by offset in steps
_STENCILS = {
    0: {0: Fraction(1)},
    1: {-1: Fraction(-1, 2), 1: Fraction(1, 2)},
    2: {-1: Fraction(1), 0: Fraction(-2), 1: Fraction(1)},
    3: {-2: Fraction(-1, 2), -1: Fraction(1), 1: Fraction(-1), 2: Fraction(1, 2)},
}

_FD_POINT = (Fraction(3, 10), Fraction(-1, 5), Fraction(1, 2))


def _central_difference(p, point, mu, h):
    """Tensor-product central difference for D_mu, evaluated in exact arithmetic."""
    total = Fraction(0)
    for offsets in product(*(_STENCILS[e].items() for e in mu)):
        weight = math.prod(w for _, w in offsets)
        total += weight * p.evaluate([x + k * h for x, (k, _) in zip(point, offsets)])
    return total / h ** sum(mu)


@pytest.mark.parametrize('mu', [mu for k in (1, 2, 3) for mu in multi_indices(3, k)])
def test_jet_matches_finite_differences(mu):
    """Every D_mu with |mu| <= 3 agrees with central differences at step 1e-3."""
    p = _random_polynomial(np.random.default_rng(8), 3, terms=12)
    jet = jet_at(p, _FD_POINT, 3)
    estimate = float(_central_difference(p, _FD_POINT, mu, Fraction(1, 1000)))
    assert estimate == pytest.approx(float(jet[mu]), rel=1e-5, abs=5e-3)


def test_taylor_expansion_exact_at_rational_point():
    """p(P + x) is the sum of h^k[x, ..., x] / k! exactly, at a non-zero point P."""
    rng = np.random.default_rng(21)
    point = (Fraction(1, 3), Fraction(-2, 5), Fraction(3, 4))
    for _ in range(10):
        p = _random_polynomial(rng, 3)
        jet = jet_at(p, point, 5)
        x = tuple(Fraction(int(rng.integers(-5, 6)), int(rng.integers(1, 5))) for _ in range(3))
        expansion = p.evaluate(point) + sum(
            multilinear(jet, k, [x] * k) / math.factorial(k) for k in range(1, p.degree + 1))
        assert isinstance(expansion, Fraction)
        assert expansion == p.evaluate([a + b for a, b in zip(point, x)])


def test_jet_from_coeffs_validation():
    jet = jet_from_coeffs(2, 2, (0, 0), [((1, 0), 1), ((0, 2), 2)])
    assert jet[(0, 1)] == 0
    assert jet[(0, 2)] == 2
    with pytest.raises(ValueError):
        jet_from_coeffs(2, 2, (0, 0), [((1, 0), 1), ((1, 0), 2)])
    with pytest.raises(ValueError):
        jet_from_coeffs(2, 2, (0, 0), [((2, 1), 1)])


def test_jet_document_round_trip(tmp_path, example1_jet):
    import json

    path = tmp_path / "jet.json"
    path.write_text(json.dumps(example1_jet.to_dict()))
    assert load_jet(str(path)) == example1_jet


def test_scaled_and_truncated(example1_jet):
    half = example1_jet.scaled(Fraction(1, 2))
    assert half[(0, 5, 0, 0)] == 12
    low = example1_jet.truncated(3)
    assert low.order == 3
    assert low[(0, 5, 0, 0)] == 0
    assert low[(3, 0, 0, 0)] == 2
