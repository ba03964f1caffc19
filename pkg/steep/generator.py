"""
Formal construction of the bad-set systems Xi_m(h, I, n).

The Taylor polynomial of h restricted to span(A^1..A^m) is written with
symbolic form values h^k[A^i1, ..., A^ik], the curve x_1 = t,
x_i = sum_j b_ij t^j is substituted into its gradient, and the coefficients
of t^1 .. t^(beta_m - 1) of every component become the equations. The
t^0 coefficients h^1[A^j] = 0 are carried as side conditions.
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from itertools import combinations_with_replacement, product
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import sympy as sp

from steep.conditions import PSI_SETS, index_table, rank_deficient
from steep.polyjet import Jet, jet_indices, multi_indices, multilinear, multinomial, symmetric_positions


logger = logging.getLogger(__name__)

GENERATION_ORDER = 5

# (n, m) pairs whose eliminated systems are written out by hand
GOLDEN_PAIRS = ((2, 1), (3, 1), (4, 1), (5, 1), (3, 2), (4, 2), (5, 2), (4, 3), (5, 3), (5, 4))


@dataclass(frozen=True, order=True)
class FormalSymbol:
    """
    Either a jet form h^k[A^i1, ..., A^ik] (kind 'h', sorted basis indices)
    or a curve coefficient b_ij (kind 'b', indices (i, j)).
    """
    kind: str
    indices: Tuple[int, ...]

    def __post_init__(self):
        if self.kind == 'h':
            object.__setattr__(self, 'indices', tuple(sorted(self.indices)))
            if not self.indices or min(self.indices) < 1:
                raise ValueError(f"invalid jet form indices {self.indices}")
        elif self.kind == 'b':
            if len(self.indices) != 2 or self.indices[0] < 2 or self.indices[1] < 1:
                raise ValueError(f"invalid curve coefficient b{self.indices}")
        else:
            raise ValueError(f"unknown symbol kind {self.kind!r}")

    @property
    def order(self) -> int:
        return len(self.indices) if self.kind == 'h' else 0

    @property
    def name(self) -> str:
        if self.kind == 'h':
            return f"h{len(self.indices)}[{','.join(map(str, self.indices))}]"
        i, j = self.indices
        return f"b{i}{j}" if i < 10 and j < 10 else f"b{i}_{j}"

    def to_list(self) -> list:
        if self.kind == 'h':
            return ['h', len(self.indices), list(self.indices)]
        return ['b', self.indices[0], self.indices[1]]

    def __str__(self):
        return self.name


def jet_form(*indices: int) -> FormalSymbol:
    return FormalSymbol('h', tuple(indices))


def curve_coeff(i: int, j: int) -> FormalSymbol:
    return FormalSymbol('b', (i, j))


Monomial = Tuple[Tuple[FormalSymbol, int], ...]


def _format_coeff(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


class FormalPolynomial:
    """Rational polynomial in formal symbols, kept in canonical form."""

    __slots__ = ('_terms',)

    def __init__(self, terms: Optional[Mapping[Monomial, Fraction]] = None):
        clean: Dict[Monomial, Fraction] = {}
        for monomial, coeff in (terms or {}).items():
            powers: Dict[FormalSymbol, int] = {}
            for symbol, exponent in monomial:
                powers[symbol] = powers.get(symbol, 0) + exponent
            key = tuple(sorted((s, e) for s, e in powers.items() if e))
            clean[key] = clean.get(key, Fraction(0)) + Fraction(coeff)
        self._terms = dict(sorted((k, c) for k, c in clean.items() if c != 0))

    @classmethod
    def from_sympy(cls, expr: sp.Expr, table: Mapping[sp.Symbol, FormalSymbol]) -> 'FormalPolynomial':
        expr = sp.expand(expr)
        if expr == 0:
            return cls()
        gens = sorted(expr.free_symbols, key=lambda s: table[s])
        if not gens:
            return cls({(): Fraction(int(sp.numer(expr)), int(sp.denom(expr)))})
        terms = {}
        for exponents, coeff in sp.Poly(expr, *gens).terms():
            coeff = sp.Rational(coeff)
            monomial = tuple((table[g], e) for g, e in zip(gens, exponents) if e)
            terms[monomial] = Fraction(int(coeff.p), int(coeff.q))
        return cls(terms)

    @property
    def terms(self) -> Dict[Monomial, Fraction]:
        return dict(self._terms)

    @property
    def is_zero(self) -> bool:
        return not self._terms

    def symbols(self) -> List[FormalSymbol]:
        return sorted({s for monomial in self._terms for s, _ in monomial})

    def max_form_order(self) -> int:
        return max((s.order for s in self.symbols()), default=0)

    def is_linear_in_jet(self) -> bool:
        """Every term holds exactly one jet form, to the first power."""
        for monomial in self._terms:
            forms = [(s, e) for s, e in monomial if s.kind == 'h']
            if len(forms) != 1 or forms[0][1] != 1:
                return False
        return True

    def evaluate(self, values: Mapping[FormalSymbol, float]) -> float:
        total = 0.0
        for monomial, coeff in self._terms.items():
            term = float(coeff)
            for symbol, exponent in monomial:
                term *= values[symbol] ** exponent
            total += term
        return total

    def __eq__(self, other):
        if not isinstance(other, FormalPolynomial):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(tuple(self._terms.items()))

    def __str__(self):
        if not self._terms:
            return "0"
        out = ""
        for monomial, coeff in self._terms.items():
            body = "*".join(s.name if e == 1 else f"{s.name}^{e}" for s, e in monomial)
            magnitude = abs(coeff)
            if not body:
                text = _format_coeff(magnitude)
            elif magnitude == 1:
                text = body
            else:
                text = f"{_format_coeff(magnitude)}*{body}"
            if not out:
                out = f"-{text}" if coeff < 0 else text
            else:
                out += f" - {text}" if coeff < 0 else f" + {text}"
        return out

    def __repr__(self):
        return f"FormalPolynomial({self})"

    def to_dict(self) -> Dict:
        terms = []
        for monomial, coeff in self._terms.items():
            symbols = [s.to_list() for s, e in monomial for _ in range(e)]
            terms.append({'coeff': _format_coeff(coeff), 'symbols': symbols})
        return {'terms': terms}


def equivalent_up_to_scalar(p: FormalPolynomial, q: FormalPolynomial) -> bool:
    """True iff q = c * p for some non-zero rational c."""
    if p.is_zero or q.is_zero:
        return p.is_zero and q.is_zero
    pt, qt = p.terms, q.terms
    if pt.keys() != qt.keys():
        return False
    key = next(iter(pt))
    ratio = qt[key] / pt[key]
    return all(qt[k] == ratio * c for k, c in pt.items())


@dataclass(frozen=True)
class FormalSystem:
    """
    The polynomial part of Xi_m(h, I, n).

    ``origins[e]`` is the (gradient component j, power of t) that equation e
    was read from. ``side_conditions`` are the t^0 coefficients h^1[A^j].
    """
    n: int
    r: int
    m: int
    beta: int
    equations: Tuple[FormalPolynomial, ...]
    origins: Tuple[Tuple[int, int], ...]
    side_conditions: Tuple[FormalSymbol, ...] = ()
    notes: Tuple[str, ...] = field(default=(
        "grad h(I) != 0",
        "A^1, ..., A^m linearly independent",
    ))

    def symbols(self) -> List[FormalSymbol]:
        return sorted({s for eq in self.equations for s in eq.symbols()})

    def curve_coefficients(self) -> List[FormalSymbol]:
        return [s for s in self.symbols() if s.kind == 'b']

    def to_text(self) -> str:
        lines = [f"# n={self.n} r={self.r} m={self.m} beta={self.beta} "
                 f"equations={len(self.equations)}"]
        lines += [f"# side condition: {s} = 0" for s in self.side_conditions]
        lines += [f"# side condition: {note}" for note in self.notes]
        for (j, p), eq in zip(self.origins, self.equations):
            lines.append(f"[A{j}, t^{p}] {eq} = 0")
        return "\n".join(lines)

    def to_dict(self) -> Dict:
        return {
            'n': self.n,
            'r': self.r,
            'm': self.m,
            'beta': self.beta,
            'side_conditions': [s.to_list() for s in self.side_conditions],
            'notes': list(self.notes),
            'equations': [dict(eq.to_dict(), component=j, power=p)
                          for (j, p), eq in zip(self.origins, self.equations)],
        }


class _SymbolTable:
    """Two-way map between formal symbols and sympy symbols."""

    def __init__(self):
        self.forward: Dict[FormalSymbol, sp.Symbol] = {}
        self.backward: Dict[sp.Symbol, FormalSymbol] = {}

    def __call__(self, symbol: FormalSymbol) -> sp.Symbol:
        if symbol not in self.forward:
            sym = sp.Symbol(symbol.name)
            self.forward[symbol] = sym
            self.backward[sym] = symbol
        return self.forward[symbol]

    def form(self, indices: Sequence[int]) -> sp.Symbol:
        return self(jet_form(*indices))

    def b(self, i: int, j: int) -> sp.Symbol:
        return self(curve_coeff(i, j))


def _check_triple(n: int, r: int, m: int):
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    if not 1 <= m <= n - 1:
        raise ValueError(f"m must satisfy 1 <= m <= n-1 = {n - 1}, got {m}")
    if r < 2:
        raise ValueError(f"r must be at least 2, got {r}")


def build_xi(n: int, r: int, m: int) -> FormalSystem:
    """
    Generate the formal system Xi_m for jets of order r in n variables.

    Args:
        n: Number of variables
        r: Jet order
        m: Subspace dimension, 1 <= m <= n-1

    Returns:
        FormalSystem with m * (beta_m - 1) equations

    Raises:
        ValueError: For an invalid (n, r, m)
    """
    _check_triple(n, r, m)
    beta = index_table(n, r).beta[m - 1]
    table = _SymbolTable()
    t = sp.Symbol('t')

    curve = [t] + [sum(table.b(i, j) * t ** j for j in range(1, beta))
                   for i in range(2, m + 1)]

    equations: List[FormalPolynomial] = []
    origins: List[Tuple[int, int]] = []
    for component in range(1, m + 1):
        partial = sp.Integer(0)
        for k in range(2, beta + 1):
            for combo in combinations_with_replacement(range(1, m + 1), k - 1):
                counts = [combo.count(i) for i in range(1, m + 1)]
                monomial = sp.Mul(*(curve[i - 1] for i in combo))
                partial += (sp.Rational(multinomial(counts), math.factorial(k - 1))
                            * table.form(combo + (component,)) * monomial)
        expanded = sp.Poly(sp.expand(partial), t)
        for power in range(1, beta):
            coeff = expanded.coeff_monomial(t ** power)
            equations.append(FormalPolynomial.from_sympy(coeff, table.backward))
            origins.append((component, power))

    logger.debug(f"built Xi_{m} for n={n}, r={r}: beta={beta}, {len(equations)} equations")
    return FormalSystem(
        n=n, r=r, m=m, beta=beta,
        equations=tuple(equations),
        origins=tuple(origins),
        side_conditions=tuple(jet_form(j) for j in range(1, m + 1)),
    )


Vector = Dict[int, sp.Expr]


def _h(table: _SymbolTable, *vectors: Vector) -> sp.Expr:
    """Multilinear expansion of h^k over vectors given in the A-basis."""
    total = sp.Integer(0)
    for combo in product(*(v.items() for v in vectors)):
        coeff = sp.Mul(*(c for _, c in combo))
        total += coeff * table.form(tuple(i for i, _ in combo))
    return total


def _combine(*pairs: Tuple[sp.Expr, Vector]) -> Vector:
    out: Vector = {}
    for scalar, vector in pairs:
        for i, c in vector.items():
            out[i] = out.get(i, 0) + scalar * c
    return out


def compact_system(n: int, m: int) -> FormalSystem:
    """
    Hand-written order-5 systems in the compact (u, v, w, x, alpha..delta) form.

    The identification is u = A^2, w = A^3, x = A^4,
    v = A^1 + b21 A^2 (+ b31 A^3 + b41 A^4), alpha = b22, and then
    beta = b23, gamma = b24 for m = 2, or beta = b32, gamma = b23,
    delta = b33 for m = 3.

    Raises:
        ValueError: For a pair outside ``GOLDEN_PAIRS``
    """
    if (n, m) not in GOLDEN_PAIRS:
        raise ValueError(f"no hand-written system for (n={n}, m={m})")
    r = GENERATION_ORDER
    beta_m = index_table(n, r).beta[m - 1]
    table = _SymbolTable()
    b = table.b

    v: Vector = {1: sp.Integer(1)}
    for i in range(2, m + 1):
        v[i] = b(i, 1)
    u: Vector = {2: sp.Integer(1)}
    w: Vector = {3: sp.Integer(1)}

    def power_terms(p: int, dot: Vector) -> sp.Expr:
        if m == 1:
            return _h(table, *([v] * p), dot)
        if m == 2:
            alpha = b(2, 2)
            if p == 1:
                return _h(table, v, dot)
            if p == 2:
                return 2 * alpha * _h(table, u, dot) + _h(table, v, v, dot)
            if p == 3:
                return (6 * b(2, 3) * _h(table, u, dot) + 6 * alpha * _h(table, u, v, dot)
                        + _h(table, v, v, v, dot))
            return (24 * b(2, 4) * _h(table, u, dot) + 24 * b(2, 3) * _h(table, v, u, dot)
                    + 12 * alpha ** 2 * _h(table, u, u, dot) + 12 * alpha * _h(table, v, v, u, dot)
                    + _h(table, v, v, v, v, dot))
        if m == 3:
            first = _combine((b(2, 2), u), (b(3, 2), w))
            if p == 1:
                return _h(table, v, dot)
            if p == 2:
                return 2 * _h(table, first, dot) + _h(table, v, v, dot)
            second = _combine((b(2, 3), u), (b(3, 3), w))
            return (6 * _h(table, second, dot) + 6 * _h(table, first, v, dot)
                    + _h(table, v, v, v, dot))
        return _h(table, v, dot)

    equations, origins = [], []
    for component in range(1, m + 1):
        dot: Vector = {component: sp.Integer(1)}
        for power in range(1, beta_m):
            equations.append(FormalPolynomial.from_sympy(power_terms(power, dot), table.backward))
            origins.append((component, power))
    return FormalSystem(n=n, r=r, m=m, beta=beta_m, equations=tuple(equations),
                        origins=tuple(origins),
                        side_conditions=tuple(jet_form(j) for j in range(1, m + 1)))


def golden_mismatches(n: int, m: int) -> List[Tuple[int, int]]:
    """Origins of the equations where generation and the hand-written system differ."""
    generated = build_xi(n, GENERATION_ORDER, m)
    compact = compact_system(n, m)
    if generated.origins != compact.origins:
        return list(set(generated.origins) ^ set(compact.origins))
    return [origin for origin, a, c in zip(generated.origins, generated.equations, compact.equations)
            if not equivalent_up_to_scalar(a, c)]


BValues = Mapping[Union[str, Tuple[int, int]], float]


def _b_lookup(b_values: Optional[BValues]) -> Dict[FormalSymbol, float]:
    out: Dict[FormalSymbol, float] = {}
    for key, value in (b_values or {}).items():
        if isinstance(key, str):
            digits = key[1:].split('_') if '_' in key else list(key[1:])
            if not key.startswith('b') or len(digits) != 2:
                raise ValueError(f"invalid curve coefficient name {key!r}")
            key = (int(digits[0]), int(digits[1]))
        out[curve_coeff(*key)] = value
    return out


def _check_instance(system: FormalSystem, jet: Jet, basis: Sequence[Sequence]):
    if jet.n != system.n:
        raise ValueError(f"jet has n={jet.n}, system has n={system.n}")
    if jet.order < system.beta:
        raise ValueError(f"jet order {jet.order} below beta_m = {system.beta}")
    if len(basis) != system.m:
        raise ValueError(f"system needs {system.m} basis vectors, got {len(basis)}")
    for vec in basis:
        if len(vec) != system.n:
            raise ValueError(f"basis vector of size {len(vec)}, expected {system.n}")


def instantiate(system: FormalSystem, jet: Jet, basis: Sequence[Sequence],
                b_values: Optional[BValues] = None) -> List:
    """
    Evaluate every equation at a concrete jet, basis and curve coefficients.

    Args:
        system: Formal system
        jet: Jet of order >= beta_m
        basis: A^1, ..., A^m
        b_values: Curve coefficients keyed by name ("b22") or (i, j); missing ones are zero

    Returns:
        Residual per equation (exact when every input is rational)
    """
    _check_instance(system, jet, basis)
    values: Dict[FormalSymbol, object] = {s: 0 for s in system.curve_coefficients()}
    values.update(_b_lookup(b_values))
    residuals = []
    for eq in system.equations:
        total = 0
        for monomial, coeff in eq.terms.items():
            term = coeff
            for symbol, exponent in monomial:
                if symbol not in values:
                    values[symbol] = multilinear(jet, symbol.order,
                                                 [basis[i - 1] for i in symbol.indices])
                term = term * values[symbol] ** exponent
            total = total + term
        residuals.append(total)
    return residuals


def _offsets(n: int, r: int) -> Dict[int, int]:
    out, offset = {}, 0
    for k in range(1, r + 1):
        out[k] = offset
        offset += len(multi_indices(n, k))
    return out


def _form_row(n: int, r: int, offsets: Dict[int, int], vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Coefficients of h^k[vectors] as a linear function of the jet vector."""
    k = len(vectors)
    outer = reduce(np.multiply.outer, vectors).ravel()
    row = np.zeros(len(jet_indices(n, r)))
    row[offsets[k]:offsets[k] + len(multi_indices(n, k))] = np.bincount(
        symmetric_positions(n, k), weights=outer, minlength=len(multi_indices(n, k)))
    return row


def linear_rows(system: FormalSystem, basis: np.ndarray, b_values: Mapping[FormalSymbol, float],
                r: int) -> np.ndarray:
    """
    Matrix M with M @ jet.as_vector() equal to the system residuals plus the side conditions.

    Raises:
        ValueError: If an equation is not linear in the jet
    """
    n = system.n
    offsets = _offsets(n, r)
    rows = []
    for eq in system.equations:
        if not eq.is_linear_in_jet():
            raise ValueError(f"equation is not linear in the jet: {eq}")
        row = np.zeros(len(jet_indices(n, r)))
        for monomial, coeff in eq.terms.items():
            scale = float(coeff)
            vectors = None
            for symbol, exponent in monomial:
                if symbol.kind == 'b':
                    scale *= b_values.get(symbol, 0.0) ** exponent
                else:
                    vectors = [basis[i - 1] for i in symbol.indices]
            row += scale * _form_row(n, r, offsets, vectors)
        rows.append(row)
    for symbol in system.side_conditions:
        rows.append(_form_row(n, r, offsets, [basis[i - 1] for i in symbol.indices]))
    return np.array(rows)


@dataclass(frozen=True)
class EliminationReport:
    """Outcome of checking that sampled Xi solutions satisfy the Psi* equations."""
    n: int
    m: int
    set_id: str
    samples: int
    passed: int
    failed: int
    excluded: int
    worst_residual: float

    @property
    def ok(self) -> bool:
        return self.failed == 0 and self.passed > 0

    def to_dict(self) -> Dict:
        return {
            'n': self.n,
            'm': self.m,
            'set': self.set_id,
            'samples': self.samples,
            'passed': self.passed,
            'failed': self.failed,
            'excluded': self.excluded,
            'worst_residual': self.worst_residual,
            'ok': self.ok,
        }


def _unit(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x)


def validate_elimination(n: int, m: int, samples: int = 1000, seed: int = 0,
                         unconstrained: int = 0, tol: float = 1e-8) -> EliminationReport:
    """
    Check numerically that Xi_m solutions land in Psi*_m(n).

    Each sample draws a Gaussian basis and curve coefficients, projects a
    Gaussian order-5 jet onto the solution space of the (linear in the jet)
    system, and evaluates the Psi*_m(n) equations at u = A^2, w = A^3,
    x = A^4, v = A^1 + sum_i b_i1 A^i. ``unconstrained`` extra samples skip
    the projection; they fail the precondition filter and count as excluded.

    Raises:
        ValueError: If (n, m) has no Psi* set
    """
    set_id = f"psi{m}*({n})"
    psi = PSI_SETS.get(set_id)
    if psi is None:
        raise ValueError(f"no eliminated system for (n={n}, m={m})")
    r = GENERATION_ORDER
    system = build_xi(n, r, m)
    rng = np.random.default_rng(seed)
    passed = failed = excluded = 0
    worst = 0.0

    for index in range(samples + unconstrained):
        basis = rng.standard_normal((m, n))
        b_values = {s: float(rng.standard_normal()) for s in system.curve_coefficients()}
        M = linear_rows(system, basis, b_values, r)
        J = rng.standard_normal(M.shape[1])
        if index < samples:
            J = J - np.linalg.lstsq(M, M @ J, rcond=None)[0]
        J = _unit(J)
        jet = Jet.from_vector(n, r, J)

        xi_residual = float(np.max(np.abs(M @ J)))
        grad = np.array([float(g) for g in jet.tensor(1)])
        if (xi_residual > 1e-10 or np.linalg.norm(grad) < 1e-6
                or rank_deficient(basis, 1e-6)):
            excluded += 1
            continue

        v = basis[0] + sum(b_values.get(curve_coeff(i, 1), 0.0) * basis[i - 1]
                           for i in range(2, m + 1))
        vectors = {'v': _unit(v)}
        for name, i in (('u', 2), ('w', 3), ('x', 4)):
            if i <= m:
                vectors[name] = _unit(basis[i - 1])
        residual = max(abs(float(eq.evaluate(jet, vectors))) for eq in psi.equations)
        worst = max(worst, residual)
        if residual < tol:
            passed += 1
        else:
            failed += 1
            logger.debug(f"{set_id} sample {index}: Psi* residual {residual:.3e}")

    report = EliminationReport(n, m, set_id, samples + unconstrained, passed, failed,
                               excluded, worst)
    logger.info(f"elimination {set_id}: {passed} passed, {failed} failed, {excluded} excluded")
    return report
