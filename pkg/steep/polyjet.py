"""
Polynomials, jets and the symmetric multilinear forms built from them.

A jet stores the raw partial derivatives D_mu = d^mu h(I) for 1 <= |mu| <= r,
one entry per sorted multi-index. The normalised Taylor coefficients
D_mu / mu! are available through ``Jet.taylor_coefficients``.
"""
import json
import logging
import math
import re
import threading
from fractions import Fraction
from functools import lru_cache
from itertools import combinations_with_replacement, product
from numbers import Rational
from types import MappingProxyType
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from sympy.utilities.iterables import multiset_permutations


logger = logging.getLogger(__name__)

MultiIndex = Tuple[int, ...]
Number = Union[Fraction, int, float]


class PolynomialSyntaxError(ValueError):
    """Malformed polynomial text; ``position`` is the character offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class VariableRangeError(PolynomialSyntaxError):
    """Variable index outside 1..n."""


@lru_cache(maxsize=None)
def multi_indices(n: int, k: int) -> Tuple[MultiIndex, ...]:
    """All multi-indices of length n and degree k, in lexicographic order."""
    found = set()
    for combo in combinations_with_replacement(range(n), k):
        mu = [0] * n
        for i in combo:
            mu[i] += 1
        found.add(tuple(mu))
    return tuple(sorted(found))


@lru_cache(maxsize=None)
def jet_indices(n: int, r: int) -> Tuple[MultiIndex, ...]:
    """Multi-indices with 1 <= |mu| <= r, ordered by degree then lexicographically."""
    return tuple(mu for k in range(1, r + 1) for mu in multi_indices(n, k))


@lru_cache(maxsize=None)
def symmetric_positions(n: int, k: int) -> np.ndarray:
    """
    Map every entry of a dense (n,)*k tensor to its multi-index.

    Returns:
        Integer array of shape (n**k,) holding, for each flattened tensor
        position, the index of its multi-index in ``multi_indices(n, k)``.
    """
    lookup = {mu: pos for pos, mu in enumerate(multi_indices(n, k))}
    positions = np.empty(n ** k, dtype=np.intp)
    for flat, idx in enumerate(product(range(n), repeat=k)):
        mu = [0] * n
        for i in idx:
            mu[i] += 1
        positions[flat] = lookup[tuple(mu)]
    positions.setflags(write=False)
    return positions


def multinomial(mu: Sequence[int]) -> int:
    """k! / mu! for k = |mu|."""
    out = math.factorial(sum(mu))
    for e in mu:
        out //= math.factorial(e)
    return out


def to_number(value) -> Number:
    """Coerce input to an exact Fraction where possible, float otherwise."""
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise ValueError(f"not a number: {value!r}") from e
    return float(value)


def is_exact(value) -> bool:
    return isinstance(value, Rational)


def _falling(e: int, m: int) -> int:
    out = 1
    for step in range(m):
        out *= e - step
    return out


class Polynomial:
    """
    Multivariate polynomial with exact rational coefficients.

    Terms map exponent multi-indices to non-zero Fractions. Instances are
    immutable; arithmetic returns new polynomials.
    """

    __slots__ = ('n', '_terms')

    def __init__(self, n: int, terms: Optional[Mapping[Sequence[int], Number]] = None):
        if n < 1:
            raise ValueError(f"variable count must be positive, got {n}")
        clean: Dict[MultiIndex, Fraction] = {}
        for mu, coeff in (terms or {}).items():
            mu = tuple(int(e) for e in mu)
            if len(mu) != n or any(e < 0 for e in mu):
                raise ValueError(f"invalid multi-index {mu} for n={n}")
            coeff = Fraction(coeff)
            if coeff:
                clean[mu] = clean.get(mu, Fraction(0)) + coeff
        object.__setattr__(self, 'n', n)
        object.__setattr__(self, '_terms', {mu: c for mu, c in clean.items() if c})

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    @classmethod
    def constant(cls, n: int, value: Number) -> 'Polynomial':
        return cls(n, {(0,) * n: value})

    @classmethod
    def variable(cls, n: int, i: int) -> 'Polynomial':
        """The coordinate I_i (1-based)."""
        if not 1 <= i <= n:
            raise ValueError(f"variable index {i} outside 1..{n}")
        mu = [0] * n
        mu[i - 1] = 1
        return cls(n, {tuple(mu): 1})

    @property
    def terms(self) -> Mapping[MultiIndex, Fraction]:
        return MappingProxyType(self._terms)

    @property
    def degree(self) -> int:
        return max((sum(mu) for mu in self._terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    def _coerce(self, other) -> 'Polynomial':
        if isinstance(other, Polynomial):
            if other.n != self.n:
                raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")
            return other
        if isinstance(other, Rational):
            return Polynomial.constant(self.n, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self._terms)
        for mu, c in other._terms.items():
            terms[mu] = terms.get(mu, Fraction(0)) + c
        return Polynomial(self.n, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.n, {mu: -c for mu, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms: Dict[MultiIndex, Fraction] = {}
        for mu, a in self._terms.items():
            for nu, b in other._terms.items():
                key = tuple(x + y for x, y in zip(mu, nu))
                terms[key] = terms.get(key, Fraction(0)) + a * b
        return Polynomial(self.n, terms)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Rational) or other == 0:
            raise ValueError("polynomials divide only by non-zero rationals")
        divisor = Fraction(other)
        return Polynomial(self.n, {mu: c / divisor for mu, c in self._terms.items()})

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("exponent must be a non-negative integer")
        out = Polynomial.constant(self.n, 1)
        for _ in range(exponent):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.n == other.n and self._terms == other._terms

    def __hash__(self):
        return hash((self.n, frozenset(self._terms.items())))

    def evaluate(self, point: Sequence) -> Number:
        """Value at a point; exact when every coordinate is rational."""
        if len(point) != self.n:
            raise ValueError(f"point has {len(point)} coordinates, expected {self.n}")
        point = [to_number(x) for x in point]
        total: Number = Fraction(0) if all(is_exact(x) for x in point) else 0.0
        for mu, c in self._terms.items():
            value = c if isinstance(total, Fraction) else float(c)
            for x, e in zip(point, mu):
                if e:
                    value *= x ** e
            total += value
        return total

    def __str__(self):
        if not self._terms:
            return "0"
        ordered = sorted(self._terms.items(), key=lambda item: (-sum(item[0]), [-e for e in item[0]]))
        pieces: List[str] = []
        for mu, c in ordered:
            monomial = "*".join(
                f"I{i + 1}" if e == 1 else f"I{i + 1}^{e}"
                for i, e in enumerate(mu) if e
            )
            magnitude = abs(c)
            if not monomial:
                body = str(magnitude)
            elif magnitude == 1:
                body = monomial
            else:
                body = f"{magnitude}*{monomial}"
            if not pieces:
                pieces.append(body if c > 0 else f"-{body}")
            else:
                pieces.append(f"{'+' if c > 0 else '-'} {body}")
        return " ".join(pieces)

    def __repr__(self):
        return f"Polynomial(n={self.n}, '{self}')"


_TOKEN = re.compile(
    r"(?P<num>\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)"
    r"|(?P<var>[Ix]\d+)"
    r"|(?P<op>[-+*/^()])"
)


class _Parser:
    """Recursive-descent parser over the token stream of one polynomial."""

    def __init__(self, text: str, n: int):
        self.text = text
        self.n = n
        self.tokens = self._tokenize(text)
        self.pos = 0

    @staticmethod
    def _tokenize(text: str) -> List[Tuple[str, str, int]]:
        tokens = []
        i = 0
        while i < len(text):
            if text[i].isspace():
                i += 1
                continue
            match = _TOKEN.match(text, i)
            if match is None:
                raise PolynomialSyntaxError(f"unexpected character {text[i]!r}", i)
            kind = match.lastgroup
            tokens.append((kind, match.group(kind), i))
            i = match.end()
        tokens.append(('end', '', len(text)))
        return tokens

    def peek(self) -> Tuple[str, str, int]:
        return self.tokens[self.pos]

    def take(self) -> Tuple[str, str, int]:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect_uint(self) -> int:
        kind, value, offset = self.take()
        if kind != 'num' or not value.isdigit():
            raise PolynomialSyntaxError("expected an unsigned integer", offset)
        return int(value)

    def parse(self) -> Polynomial:
        result = self.expr()
        kind, value, offset = self.peek()
        if kind != 'end':
            raise PolynomialSyntaxError(f"unexpected {value!r}", offset)
        return result

    def expr(self) -> Polynomial:
        sign = 1
        if self.peek()[1] in ('+', '-'):
            sign = -1 if self.take()[1] == '-' else 1
        result = self.term() * sign
        while self.peek()[1] in ('+', '-'):
            op = self.take()[1]
            rhs = self.term()
            result = result + rhs if op == '+' else result - rhs
        return result

    def term(self) -> Polynomial:
        result = self.factor()
        while self.peek()[1] == '*':
            self.take()
            result = result * self.factor()
        return result

    def factor(self) -> Polynomial:
        result = self.primary()
        if self.peek()[1] == '^':
            self.take()
            result = result ** self.expect_uint()
        while self.peek()[1] == '/':
            self.take()
            offset = self.peek()[2]
            divisor = self.expect_uint()
            if divisor == 0:
                raise PolynomialSyntaxError("division by zero", offset)
            result = result / divisor
        return result

    def primary(self) -> Polynomial:
        kind, value, offset = self.take()
        if kind == 'num':
            return Polynomial.constant(self.n, Fraction(value))
        if kind == 'var':
            index = int(value[1:])
            if not 1 <= index <= self.n:
                raise VariableRangeError(f"variable {value} out of range for n={self.n}", offset)
            return Polynomial.variable(self.n, index)
        if value == '(':
            inner = self.expr()
            closing = self.take()
            if closing[1] != ')':
                raise PolynomialSyntaxError("expected ')'", closing[2])
            return inner
        if kind == 'end':
            raise PolynomialSyntaxError("unexpected end of input", offset)
        raise PolynomialSyntaxError(f"unexpected {value!r}", offset)


def parse_polynomial(text: str, n: int) -> Polynomial:
    """
    Parse polynomial text in the variables I1..In (x1..xn accepted as aliases).

    Args:
        text: Expression such as "I2^5/5 + I1^3/3 - I4"
        n: Number of variables

    Returns:
        Polynomial with exact rational coefficients

    Raises:
        PolynomialSyntaxError: On malformed text (with character offset)
        VariableRangeError: When a variable index exceeds n
    """
    return _Parser(text, n).parse()


def differentiate(p: Polynomial, i: int) -> Polynomial:
    """Exact partial derivative with respect to I_i (1-based)."""
    if not 1 <= i <= p.n:
        raise ValueError(f"variable index {i} outside 1..{p.n}")
    terms: Dict[MultiIndex, Fraction] = {}
    for mu, c in p.terms.items():
        e = mu[i - 1]
        if e:
            nu = mu[:i - 1] + (e - 1,) + mu[i:]
            terms[nu] = c * e
    return Polynomial(p.n, terms)


class Jet:
    """
    All partial derivatives D_mu of a function at a point, 1 <= |mu| <= order.

    Lookup is total: absent multi-indices read as zero. Dense float tensors
    for the numeric engine are derived lazily and cached.
    """

    def __init__(self, n: int, order: int, point: Sequence, derivs: Mapping[Sequence[int], Number]):
        if n < 1:
            raise ValueError(f"dimension must be positive, got {n}")
        if order < 1:
            raise ValueError(f"jet order must be at least 1, got {order}")
        point = tuple(to_number(x) for x in point)
        if len(point) != n:
            raise ValueError(f"point has {len(point)} coordinates, expected {n}")
        clean: Dict[MultiIndex, Number] = {}
        for mu, value in derivs.items():
            mu = tuple(int(e) for e in mu)
            if len(mu) != n or any(e < 0 for e in mu):
                raise ValueError(f"invalid multi-index {mu} for n={n}")
            if not 1 <= sum(mu) <= order:
                raise ValueError(f"|mu| = {sum(mu)} outside 1..{order}")
            value = to_number(value)
            if value:
                clean[mu] = value
        self._n = n
        self._order = order
        self._point = point
        self._derivs = clean
        self._exact = all(is_exact(v) for v in clean.values())
        self._tensors: Dict[int, np.ndarray] = {}
        self._lock = threading.RLock()

    @property
    def n(self) -> int:
        return self._n

    @property
    def order(self) -> int:
        return self._order

    @property
    def point(self) -> Tuple[Number, ...]:
        return self._point

    @property
    def is_exact(self) -> bool:
        """True when every stored derivative is rational."""
        return self._exact

    def __getitem__(self, mu: Sequence[int]) -> Number:
        mu = tuple(mu)
        if len(mu) != self._n:
            raise ValueError(f"invalid multi-index {mu} for n={self._n}")
        return self._derivs.get(mu, Fraction(0) if self._exact else 0.0)

    def items(self, k: Optional[int] = None) -> Iterator[Tuple[MultiIndex, Number]]:
        """Non-zero entries (of order k when given), in multi-index order."""
        for mu in sorted(self._derivs):
            if k is None or sum(mu) == k:
                yield mu, self._derivs[mu]

    def tensor(self, k: int) -> np.ndarray:
        """Dense symmetric float tensor of shape (n,)*k holding the order-k derivatives."""
        if not 1 <= k <= self._order:
            raise ValueError(f"form order {k} outside 1..{self._order}")
        with self._lock:
            cached = self._tensors.get(k)
            if cached is None:
                values = np.array([float(self[mu]) for mu in multi_indices(self._n, k)])
                cached = values[symmetric_positions(self._n, k)].reshape((self._n,) * k)
                cached.setflags(write=False)
                self._tensors[k] = cached
            return cached

    def scaled(self, factor: Number) -> 'Jet':
        factor = to_number(factor)
        return Jet(self._n, self._order, self._point,
                   {mu: value * factor for mu, value in self._derivs.items()})

    def truncated(self, order: int) -> 'Jet':
        if not 1 <= order <= self._order:
            raise ValueError(f"cannot truncate order {self._order} jet to {order}")
        return Jet(self._n, order, self._point,
                   {mu: v for mu, v in self._derivs.items() if sum(mu) <= order})

    def taylor_coefficients(self) -> Dict[MultiIndex, Number]:
        """Normalised coefficients D_mu / mu! of the Taylor polynomial."""
        out = {}
        for mu, value in self.items():
            denom = math.prod(math.factorial(e) for e in mu)
            out[mu] = value / denom if self._exact else float(value) / denom
        return out

    def to_polynomial(self) -> Polynomial:
        """Taylor polynomial in the displacement x, without the constant term."""
        return Polynomial(self._n, {mu: Fraction(c) for mu, c in self.taylor_coefficients().items()})

    def as_vector(self) -> np.ndarray:
        """Float vector of all D_mu in ``jet_indices`` order."""
        return np.array([float(self[mu]) for mu in jet_indices(self._n, self._order)])

    @classmethod
    def from_vector(cls, n: int, order: int, values: Sequence[float],
                    point: Optional[Sequence] = None) -> 'Jet':
        indices = jet_indices(n, order)
        if len(values) != len(indices):
            raise ValueError(f"expected {len(indices)} jet entries, got {len(values)}")
        return cls(n, order, point if point is not None else (0,) * n,
                   {mu: float(v) for mu, v in zip(indices, values)})

    def to_dict(self) -> Dict:
        def encode(x):
            if is_exact(x):
                x = Fraction(x)
                return x.numerator if x.denominator == 1 else str(x)
            return float(x)

        return {
            'n': self._n,
            'order': self._order,
            'point': [encode(x) for x in self._point],
            'terms': [{'mu': list(mu), 'value': encode(v)} for mu, v in self.items()],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> 'Jet':
        try:
            n = int(data['n'])
            order = int(data['order'])
            point = data.get('point', [0] * n)
            entries = [(tuple(term['mu']), term['value']) for term in data.get('terms', [])]
        except (KeyError, TypeError) as e:
            raise ValueError(f"malformed jet document: {e}") from e
        return jet_from_coeffs(n, order, point, entries)

    def __eq__(self, other):
        if not isinstance(other, Jet):
            return NotImplemented
        return (self._n, self._order, self._point, self._derivs) == \
            (other._n, other._order, other._point, other._derivs)

    def __hash__(self):
        return hash((self._n, self._order, self._point, frozenset(self._derivs.items())))

    def __repr__(self):
        return f"Jet(n={self._n}, order={self._order}, nonzero={len(self._derivs)})"


def jet_at(p: Polynomial, point: Sequence, r: int) -> Jet:
    """
    Jet of a polynomial at a point.

    Args:
        p: Source polynomial
        point: Evaluation point (rational coordinates keep the jet exact)
        r: Jet order

    Returns:
        Jet holding D_mu for every 1 <= |mu| <= r
    """
    if r < 1:
        raise ValueError(f"jet order must be at least 1, got {r}")
    if len(point) != p.n:
        raise ValueError(f"point has {len(point)} coordinates, expected {p.n}")
    point = tuple(to_number(x) for x in point)
    exact = all(is_exact(x) for x in point)

    derivs: Dict[MultiIndex, Number] = {}
    for nu, coeff in p.terms.items():
        c = coeff if exact else float(coeff)
        for mu in product(*(range(e + 1) for e in nu)):
            if not 1 <= sum(mu) <= r:
                continue
            value = c
            for e, m, x in zip(nu, mu, point):
                if e:
                    value *= _falling(e, m) * x ** (e - m)
            derivs[mu] = derivs.get(mu, 0) + value
    return Jet(p.n, r, point, derivs)


def jet_from_coeffs(n: int, r: int, point: Sequence,
                    entries: Sequence[Tuple[Sequence[int], Number]]) -> Jet:
    """
    Build a jet from raw (multi-index, D_mu) entries; missing entries are zero.

    Raises:
        ValueError: On duplicate multi-indices or |mu| outside 1..r
    """
    derivs: Dict[MultiIndex, Number] = {}
    for mu, value in entries:
        mu = tuple(int(e) for e in mu)
        if mu in derivs:
            raise ValueError(f"duplicate multi-index {mu}")
        if not 1 <= sum(mu) <= r:
            raise ValueError(f"|mu| = {sum(mu)} outside 1..{r}")
        derivs[mu] = value
    return Jet(n, r, point, derivs)


def load_jet(path: str) -> Jet:
    """Read a jet from its JSON document."""
    with open(path, 'r') as f:
        return Jet.from_dict(json.load(f))


def _exact_form(jet: Jet, k: int, vectors: List[Tuple[Fraction, ...]]) -> Fraction:
    total = Fraction(0)
    same = all(v == vectors[0] for v in vectors[1:])
    for mu, value in jet.items(k):
        if same:
            term = Fraction(multinomial(mu))
            for x, e in zip(vectors[0], mu):
                if e:
                    term *= x ** e
            total += value * term
            continue
        slots = [i for i, e in enumerate(mu) for _ in range(e)]
        acc = Fraction(0)
        for perm in multiset_permutations(slots):
            term = Fraction(1)
            for vec, i in zip(vectors, perm):
                term *= vec[i]
                if not term:
                    break
            acc += term
        total += value * acc
    return total


def contract(tensor: np.ndarray, vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Contract the trailing axes of a symmetric tensor with the given vectors."""
    out = tensor
    for v in vectors:
        out = out @ v
    return out


def multilinear(jet: Jet, k: int, vectors: Sequence[Sequence]) -> Number:
    """
    Evaluate the symmetric k-linear form h^k[v1, ..., vk].

    Exact (Fraction) when the jet and every vector are rational; float
    otherwise.

    Raises:
        ValueError: If k is outside 1..jet.order or a vector has the wrong size
    """
    if not 1 <= k <= jet.order:
        raise ValueError(f"form order {k} outside 1..{jet.order}")
    if len(vectors) != k:
        raise ValueError(f"h^{k} takes {k} vectors, got {len(vectors)}")
    converted = []
    for v in vectors:
        if len(v) != jet.n:
            raise ValueError(f"vector of size {len(v)} used with n={jet.n}")
        converted.append(tuple(to_number(x) for x in v))
    if jet.is_exact and all(is_exact(x) for v in converted for x in v):
        return _exact_form(jet, k, converted)
    arrays = [np.array([float(x) for x in v]) for v in converted]
    return float(contract(jet.tensor(k), arrays))


def gradient(jet: Jet) -> Tuple[Number, ...]:
    """First-order entries D_{e_i}."""
    return tuple(jet[tuple(int(i == j) for j in range(jet.n))] for i in range(jet.n))
