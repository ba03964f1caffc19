"""
Counterexample search over products of unit spheres.

Equations are polynomials in symmetric multilinear forms h^k[...] whose
arguments are search vectors (factors) or fixed vectors. ``minimize`` runs a
batched multistart descent on the constraint manifold; ``certify_positive``
proves a lower bound on the residual by covering the manifold with cells, and
``certify_outcome`` attaches that bound to a search outcome.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field, asdict, fields, replace
from fractions import Fraction
from numbers import Rational
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from steep.config import Config
from steep.polyjet import Jet, multilinear


logger = logging.getLogger(__name__)

MODES = ('heuristic', 'certify')

# Coordinates below this are snapped to zero when canonicalizing witnesses
_SNAP = 1e-9


class DimensionTooLarge(RuntimeError):
    """The manifold is too large to cover at desk scale."""


@dataclass(frozen=True)
class SearchConfig:
    """Immutable engine configuration."""
    starts: int = 128
    max_iters: int = 300
    polish_iters: int = 60
    step: float = 0.5
    grad_tol: float = 1e-14
    witness_tol: float = 1e-9
    margin_tol: float = 1e-6
    gradient_tol: float = 1e-10
    rank_tol: float = 1e-6
    eig_tol: float = 1e-9
    cluster_angle: float = 1e-3
    grid_resolution: int = 1
    max_cells: int = 10_000_000
    max_dimension: int = 8
    min_radius: float = 1e-6
    chunk_size: int = 16384
    seed: int = 42
    mode: str = 'certify'
    threads: int = 4

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ('starts', 'grid_resolution', 'max_cells', 'chunk_size', 'threads'):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ('step', 'grad_tol', 'witness_tol', 'margin_tol', 'gradient_tol',
                     'rank_tol', 'eig_tol', 'cluster_angle', 'min_radius'):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters < 0 or self.polish_iters < 0 or self.seed < 0:
            raise ValueError("iteration counts and seed must be non-negative")

    @classmethod
    def from_config(cls, cfg: Config) -> 'SearchConfig':
        """Build the engine configuration from the YAML/env configuration."""
        return cls(
            starts=cfg.starts,
            max_iters=cfg.max_iters,
            polish_iters=cfg.polish_iters,
            step=cfg.step,
            grad_tol=cfg.grad_tol,
            witness_tol=cfg.witness_tol,
            margin_tol=cfg.margin_tol,
            gradient_tol=cfg.gradient_tol,
            rank_tol=cfg.rank_tol,
            eig_tol=cfg.eig_tol,
            cluster_angle=cfg.cluster_angle,
            grid_resolution=cfg.grid_resolution,
            max_cells=cfg.max_cells,
            max_dimension=cfg.max_dimension,
            min_radius=cfg.min_radius,
            chunk_size=cfg.chunk_size,
            seed=cfg.seed,
            mode=cfg.mode,
            threads=cfg.threads,
        )

    def to_dict(self) -> Dict:
        return asdict(self)

    def non_default(self) -> Dict:
        """Fields whose value differs from the built-in defaults."""
        return {f.name: getattr(self, f.name) for f in fields(self)
                if getattr(self, f.name) != f.default}


@dataclass(frozen=True, order=True)
class FormAtom:
    """h^order evaluated on named arguments, stored sorted (the form is symmetric)."""
    order: int
    args: Tuple[str, ...]

    def count(self, name: str) -> int:
        return self.args.count(name)

    def __str__(self):
        return f"h{self.order}[{','.join(self.args)}]"


Monomial = Tuple[FormAtom, ...]
Scalar = Union[Fraction, float]


def _scalar(value) -> Scalar:
    return Fraction(value) if isinstance(value, Rational) else float(value)


class FormExpr:
    """
    Polynomial in form atoms with scalar coefficients.

    Supports +, -, * and non-negative integer powers, so defining equations
    read like their written form:

        form(2, 'uu') * form(4, 'vvvv') - 3 * form(3, 'vvu') ** 2
    """

    __slots__ = ('_terms',)

    def __init__(self, terms: Optional[Mapping[Monomial, Scalar]] = None):
        clean: Dict[Monomial, Scalar] = {}
        for monomial, coeff in (terms or {}).items():
            key = tuple(sorted(monomial))
            clean[key] = clean.get(key, 0) + _scalar(coeff)
        self._terms = {k: c for k, c in clean.items() if c != 0}

    @classmethod
    def constant(cls, value) -> 'FormExpr':
        return cls({(): value})

    @property
    def terms(self) -> Dict[Monomial, Scalar]:
        return dict(self._terms)

    @staticmethod
    def _coerce(other) -> Optional['FormExpr']:
        if isinstance(other, FormExpr):
            return other
        if isinstance(other, (int, float, Fraction)):
            return FormExpr.constant(other)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        terms = dict(self._terms)
        for key, c in other._terms.items():
            terms[key] = terms.get(key, 0) + c
        return FormExpr(terms)

    __radd__ = __add__

    def __neg__(self):
        return FormExpr({k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        terms: Dict[Monomial, Scalar] = {}
        for a, ca in self._terms.items():
            for b, cb in other._terms.items():
                key = tuple(sorted(a + b))
                terms[key] = terms.get(key, 0) + ca * cb
        return FormExpr(terms)

    __rmul__ = __mul__

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("exponent must be a non-negative integer")
        out = FormExpr.constant(1)
        for _ in range(exponent):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, FormExpr):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def atoms(self) -> List[FormAtom]:
        return sorted({a for monomial in self._terms for a in monomial})

    def names(self) -> List[str]:
        return sorted({name for a in self.atoms() for name in a.args})

    def parity(self, name: str) -> Optional[int]:
        """Common parity of the degree in ``name`` across terms, None when mixed."""
        parities = {sum(a.count(name) for a in m) % 2 for m in self._terms}
        return parities.pop() if len(parities) == 1 else (0 if not parities else None)

    def evaluate(self, jet: Jet, assignment: Mapping[str, Sequence]) -> Scalar:
        """Value at explicit vectors; exact when the jet and vectors are rational."""
        cache: Dict[FormAtom, Scalar] = {}
        total = 0
        for monomial, coeff in self._terms.items():
            value = coeff
            for a in monomial:
                if a not in cache:
                    cache[a] = multilinear(jet, a.order, [assignment[name] for name in a.args])
                value = value * cache[a]
            total = total + value
        return total

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for monomial, coeff in sorted(self._terms.items(), key=lambda kv: kv[0]):
            body = "*".join(str(a) for a in monomial)
            parts.append(f"{coeff}*{body}" if body else f"{coeff}")
        return " + ".join(parts)

    def __repr__(self):
        return f"FormExpr({self})"


def form(order: int, args: Union[str, Sequence[str]]) -> FormExpr:
    """
    The atom h^order[args] as an expression.

    Args:
        order: Form order k
        args: k argument names; a string is split into single-letter names
    """
    names = tuple(args)
    if order < 1 or len(names) != order:
        raise ValueError(f"h^{order} needs {order} arguments, got {names}")
    return FormExpr({(FormAtom(order, tuple(sorted(names))),): 1})


def complement_frame(normal: Sequence[float]) -> np.ndarray:
    """Orthonormal basis (as columns) of the hyperplane orthogonal to ``normal``."""
    normal = np.asarray(normal, dtype=float)
    if not np.linalg.norm(normal) > 0:
        raise ValueError("cannot build the complement of a zero vector")
    _, _, vt = np.linalg.svd(normal[None, :])
    return vt[1:].T.copy()


def _contract_batched(tensor: np.ndarray, vecs: List[np.ndarray], count: int) -> np.ndarray:
    """Contract ``len(vecs)`` axes of a symmetric tensor with batched vectors."""
    d = tensor.shape[0] if tensor.ndim else 1
    if not vecs:
        return np.broadcast_to(tensor.reshape(1, -1), (count, tensor.size))
    out = vecs[0] @ tensor.reshape(d, -1)
    for v in vecs[1:]:
        out = np.einsum('si,sij->sj', v, out.reshape(count, d, -1))
    return out


def _norm_bound(tensor: np.ndarray) -> float:
    """Upper bound on the multilinear operator norm of a tensor."""
    if tensor.ndim == 1:
        return float(np.linalg.norm(tensor))
    d = tensor.shape[0]
    frobenius = float(np.linalg.norm(tensor))
    unfolded = float(np.linalg.norm(tensor.reshape(d, -1), 2))
    return min(frobenius, unfolded)


class _CompiledAtom:
    __slots__ = ('atom', 'tensor', 'norm', 'slots', 'counts', 'factors')

    def __init__(self, atom: FormAtom, tensor: np.ndarray, factor_index: Dict[str, int],
                 constants: Mapping[str, np.ndarray], p: int):
        self.atom = atom
        self.tensor = tensor
        self.norm = _norm_bound(tensor)
        self.slots = [(factor_index[name], None) if name in factor_index
                      else (None, constants[name]) for name in atom.args]
        self.counts = np.array([atom.count(name) for name in factor_index], dtype=float) \
            if p else np.zeros(0)
        self.factors = [f for f in range(p) if self.counts[f]]


class _Evaluator:
    """Batched evaluation of a problem's equations and their factor gradients."""

    def __init__(self, problem: 'SearchProblem'):
        frame = problem.frame
        self.p = len(problem.factors)
        self.d = frame.shape[1]
        factor_index = {name: i for i, name in enumerate(problem.factors)}

        restricted: Dict[int, np.ndarray] = {}
        atom_ids: Dict[FormAtom, int] = {}
        self.atoms: List[_CompiledAtom] = []
        self.equations: List[List[Tuple[float, Tuple[int, ...]]]] = []
        for eq in problem.equations:
            compiled = []
            for monomial, coeff in eq.terms.items():
                ids = []
                for a in monomial:
                    if a not in atom_ids:
                        if a.order not in restricted:
                            tensor = problem.jet.tensor(a.order)
                            for _ in range(a.order):
                                tensor = np.tensordot(tensor, frame, axes=([0], [0]))
                            restricted[a.order] = tensor
                        atom_ids[a] = len(self.atoms)
                        self.atoms.append(_CompiledAtom(a, restricted[a.order], factor_index,
                                                        problem.constants, self.p))
                    ids.append(atom_ids[a])
                compiled.append((float(coeff), tuple(ids)))
            self.equations.append(compiled)

        # Global Lipschitz weights per (equation, factor), used to pick the factor to split
        self.weights = np.zeros((len(self.equations), self.p))
        for e, terms in enumerate(self.equations):
            for coeff, ids in terms:
                scale = abs(coeff) * math.prod(self.atoms[a].norm for a in ids)
                for a in ids:
                    self.weights[e] += scale * self.atoms[a].counts

    def atom_values(self, X: np.ndarray, partials: bool = False):
        count = X.shape[0]
        values = np.empty((count, len(self.atoms)))
        grads: Dict[Tuple[int, int], np.ndarray] = {}
        for a, ca in enumerate(self.atoms):
            vecs = [X[:, f] if f is not None else np.broadcast_to(const, (count, self.d))
                    for f, const in ca.slots]
            values[:, a] = _contract_batched(ca.tensor, vecs, count)[:, 0]
            if partials:
                for f in ca.factors:
                    skip = next(i for i, (g, _) in enumerate(ca.slots) if g == f)
                    others = vecs[:skip] + vecs[skip + 1:]
                    grads[(a, f)] = ca.counts[f] * _contract_batched(ca.tensor, others, count)
        return values, grads

    def evaluate(self, X: np.ndarray, gradients: bool = False):
        count = X.shape[0]
        values, grads = self.atom_values(X, partials=gradients)
        E = np.zeros((count, len(self.equations)))
        G = np.zeros((count, len(self.equations), self.p, self.d)) if gradients else None
        for e, terms in enumerate(self.equations):
            for coeff, ids in terms:
                factors = values[:, list(ids)]
                E[:, e] += coeff * np.prod(factors, axis=1)
                if not gradients:
                    continue
                for pos, a in enumerate(ids):
                    rest = coeff * np.prod(np.delete(factors, pos, axis=1), axis=1)
                    for f in self.atoms[a].factors:
                        G[:, e, f] += rest[:, None] * grads[(a, f)]
        return E, G

    def margins(self, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
        """
        Lower bounds of |equation| over each cell.

        Every atom deviates from its centre value by at most its first-order
        term plus the operator-norm bound of all higher-order terms; the
        deviations compose through each product of atoms.
        """
        count = centers.shape[0]
        values, grads = self.atom_values(centers, partials=True)
        rho = np.zeros_like(values)
        log_growth = np.log1p(radii)
        for a, ca in enumerate(self.atoms):
            if not ca.factors:
                continue
            first = sum(np.linalg.norm(grads[(a, f)], axis=1) * radii[:, f] for f in ca.factors)
            higher = np.expm1(log_growth @ ca.counts) - radii @ ca.counts
            rho[:, a] = first + ca.norm * np.maximum(higher, 0.0)

        out = np.empty((count, len(self.equations)))
        magnitude = np.abs(values)
        for e, terms in enumerate(self.equations):
            centre = np.zeros(count)
            slack = np.zeros(count)
            for coeff, ids in terms:
                idx = list(ids)
                centre += coeff * np.prod(values[:, idx], axis=1)
                slack += abs(coeff) * (np.prod(magnitude[:, idx] + rho[:, idx], axis=1)
                                       - np.prod(magnitude[:, idx], axis=1))
            out[:, e] = np.abs(centre) - slack
        return out


@dataclass(frozen=True, eq=False)
class SearchProblem:
    """
    Residual sum of squared equations on a product of unit spheres.

    Factors live in the span of ``frame`` (orthonormal columns in R^n) and
    are written in frame coordinates; ``constants`` are fixed vectors in the
    same coordinates. With ``orthogonal`` the factors are mutually
    orthogonal (a Stiefel manifold), otherwise independent spheres.
    """
    name: str
    jet: Jet
    factors: Tuple[str, ...]
    equations: Tuple[FormExpr, ...]
    frame: Optional[np.ndarray] = None
    constants: Mapping[str, np.ndarray] = field(default_factory=dict)
    orthogonal: bool = True

    def __post_init__(self):
        frame = np.eye(self.jet.n) if self.frame is None else np.asarray(self.frame, dtype=float)
        if frame.ndim != 2 or frame.shape[0] != self.jet.n or frame.shape[1] < 1:
            raise ValueError(f"frame must have shape ({self.jet.n}, d), got {frame.shape}")
        constants = {name: np.asarray(v, dtype=float) for name, v in self.constants.items()}
        for name, v in constants.items():
            if v.shape != (frame.shape[1],):
                raise ValueError(f"constant {name} must live in frame coordinates")
        if not self.factors:
            raise ValueError("a search problem needs at least one factor")
        if self.orthogonal and len(self.factors) > frame.shape[1]:
            raise ValueError(f"{len(self.factors)} orthogonal factors do not fit in dimension "
                             f"{frame.shape[1]}")
        for eq in self.equations:
            for a in eq.atoms():
                if a.order > self.jet.order:
                    raise ValueError(f"{a} exceeds jet order {self.jet.order}")
                unknown = set(a.args) - set(self.factors) - set(constants)
                if unknown:
                    raise ValueError(f"unknown arguments {sorted(unknown)} in {a}")
        object.__setattr__(self, 'frame', frame)
        object.__setattr__(self, 'constants', constants)
        object.__setattr__(self, 'factors', tuple(self.factors))
        object.__setattr__(self, 'equations', tuple(self.equations))
        object.__setattr__(self, '_evaluator', _Evaluator(self))

    @property
    def dim(self) -> int:
        """Dimension of the space each factor lives in."""
        return self.frame.shape[1]

    @property
    def manifold_dimension(self) -> int:
        p, d = len(self.factors), self.dim
        if self.orthogonal:
            return sum(d - 1 - i for i in range(p))
        return p * (d - 1)

    def sign_symmetric(self, factor: str) -> bool:
        """True when flipping ``factor`` leaves every |equation| unchanged."""
        return all(eq.parity(factor) is not None for eq in self.equations)

    def retract(self, Y: np.ndarray) -> np.ndarray:
        """Map (S, p, d) arrays back onto the manifold."""
        if self.orthogonal:
            Q, R = np.linalg.qr(np.swapaxes(Y, -1, -2))
            signs = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
            signs[signs == 0] = 1.0
            return np.swapaxes(Q * signs[..., None, :], -1, -2)
        return Y / np.linalg.norm(Y, axis=-1, keepdims=True)

    def project(self, X: np.ndarray, G: np.ndarray) -> np.ndarray:
        """Tangent-space projection of ambient gradients G at X."""
        if self.orthogonal:
            M = G @ np.swapaxes(X, -1, -2)
            return G - 0.5 * (M + np.swapaxes(M, -1, -2)) @ X
        return G - np.sum(G * X, axis=-1, keepdims=True) * X

    def initial_points(self, starts: int, seed: int, salt: int = 0) -> np.ndarray:
        """Start i is drawn from its own stream, so start sets nest."""
        shape = (len(self.factors), self.dim)
        Y = np.stack([np.random.default_rng([seed, salt, i]).standard_normal(shape)
                      for i in range(starts)])
        return self.retract(Y)

    def equation_values(self, X: np.ndarray) -> np.ndarray:
        return self._evaluator.evaluate(X)[0]

    def residual(self, X: np.ndarray) -> np.ndarray:
        return np.sum(self.equation_values(X) ** 2, axis=1)

    def residual_and_gradient(self, X: np.ndarray):
        E, G = self._evaluator.evaluate(X, gradients=True)
        return np.sum(E ** 2, axis=1), 2.0 * np.einsum('se,sepd->spd', E, G)

    def equations_and_jacobian(self, X: np.ndarray):
        return self._evaluator.evaluate(X, gradients=True)

    def margins(self, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
        return self._evaluator.margins(centers, radii)

    @property
    def split_weights(self) -> np.ndarray:
        return self._evaluator.weights

    def to_ambient(self, X: np.ndarray) -> np.ndarray:
        return X @ self.frame.T

    def from_ambient(self, vectors: Sequence[Sequence[float]]) -> np.ndarray:
        return np.asarray(vectors, dtype=float) @ self.frame


@dataclass(frozen=True)
class SearchOutcome:
    """Result of a multistart search."""
    best_value: float
    best_point: Tuple[Tuple[float, ...], ...]
    values: Tuple[float, ...]
    iterations: int
    starts: int
    converged: int
    points: np.ndarray = field(repr=False, compare=False)
    certified_lower_bound: Optional[float] = None

    def below(self, tol: float) -> np.ndarray:
        """Ambient points of every start whose residual is below ``tol``."""
        mask = np.asarray(self.values) < tol
        return self.points[mask]

    def summary(self) -> Dict:
        return {
            'best_residual': self.best_value,
            'starts': self.starts,
            'converged': self.converged,
            'iterations': self.iterations,
            'certified_lower_bound': self.certified_lower_bound,
        }


def _descend(problem: SearchProblem, X: np.ndarray, cfg: SearchConfig):
    """Projected gradient with Armijo backtracking, one step length per start."""
    count = X.shape[0]
    R = problem.residual(X)
    step = np.full(count, cfg.step)
    active = np.ones(count, dtype=bool)
    iterations = np.zeros(count, dtype=int)
    floor = cfg.witness_tol ** 2

    for _ in range(cfg.max_iters):
        idx = np.flatnonzero(active)
        if not idx.size:
            break
        Xa = X[idx]
        Ra, G = problem.residual_and_gradient(Xa)
        Gt = problem.project(Xa, G)
        gnorm2 = np.sum(Gt ** 2, axis=(1, 2))
        done = (gnorm2 <= cfg.grad_tol ** 2) | (Ra <= floor)
        s = step[idx]

        trial = np.flatnonzero(~done)
        for _ in range(40):
            if not trial.size:
                break
            Y = problem.retract(Xa[trial] - s[trial, None, None] * Gt[trial])
            Rn = problem.residual(Y)
            ok = Rn <= Ra[trial] - 1e-4 * s[trial] * gnorm2[trial]
            good = trial[ok]
            Xa[good] = Y[ok]
            Ra[good] = Rn[ok]
            s[good] = np.minimum(2.0 * s[good], 1e3 * cfg.step)
            s[trial[~ok]] *= 0.5
            trial = trial[~ok]
        done[trial] = True

        X[idx] = Xa
        R[idx] = Ra
        step[idx] = s
        iterations[idx] += 1
        active[idx[done]] = False
    return X, R, iterations


def _polish(problem: SearchProblem, X: np.ndarray, R: np.ndarray, cfg: SearchConfig):
    """Damped Gauss-Newton steps in the tangent space, retracted to the manifold."""
    count, p, d = X.shape
    lam = np.full(count, 1e-3)
    eye = np.eye(p * d)
    iterations = np.zeros(count, dtype=int)
    for _ in range(cfg.polish_iters):
        live = np.flatnonzero(R > 0.0)
        if not live.size:
            break
        Xl = X[live]
        E, J = problem.equations_and_jacobian(Xl)
        J = problem.project(Xl[:, None], J).reshape(len(live), E.shape[1], p * d)
        A = np.swapaxes(J, 1, 2) @ J + lam[live, None, None] * eye
        g = np.einsum('sep,se->sp', J, E)
        try:
            delta = -np.linalg.solve(A, g[..., None])[..., 0]
        except np.linalg.LinAlgError:
            logger.debug(f"{problem.name}: singular polishing system, stopping")
            break
        Y = problem.retract(Xl + delta.reshape(len(live), p, d))
        Rn = problem.residual(Y)
        better = Rn < R[live]
        X[live[better]] = Y[better]
        R[live[better]] = Rn[better]
        lam[live] = np.clip(np.where(better, lam[live] / 3.0, lam[live] * 4.0), 1e-12, 1e12)
        iterations[live] += 1
    return X, R, iterations


def minimize(problem: SearchProblem, cfg: SearchConfig, salt: int = 0) -> SearchOutcome:
    """
    Multistart local minimization of a problem's residual.

    Args:
        problem: Residual and manifold
        cfg: Engine configuration (starts, iterations, seed)
        salt: Extra seed component separating independent searches

    Returns:
        SearchOutcome with the global best over starts (ties go to the lowest start index)
    """
    X = problem.initial_points(cfg.starts, cfg.seed, salt)
    X, R, first = _descend(problem, X, cfg)
    X, R, second = _polish(problem, X, R, cfg)

    best = int(np.argmin(R))
    points = problem.to_ambient(X)
    converged = int(np.sum(R < cfg.witness_tol))
    logger.debug(f"{problem.name}: best residual {R[best]:.3e} over {cfg.starts} starts "
                 f"({converged} below witness tolerance)")
    return SearchOutcome(
        best_value=float(R[best]),
        best_point=tuple(tuple(float(x) for x in row) for row in points[best]),
        values=tuple(float(r) for r in R),
        iterations=int(np.sum(first) + np.sum(second)),
        starts=cfg.starts,
        converged=converged,
        points=points,
    )


@dataclass
class _Cells:
    """Cube-face boxes, one per factor: face axis and sign plus box bounds."""
    axis: np.ndarray
    sign: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __len__(self):
        return self.axis.shape[0]

    def take(self, index) -> '_Cells':
        return _Cells(self.axis[index], self.sign[index], self.lo[index], self.hi[index])

    @staticmethod
    def concat(parts: List['_Cells']) -> '_Cells':
        return _Cells(*(np.concatenate([getattr(c, k) for c in parts])
                        for k in ('axis', 'sign', 'lo', 'hi')))


class _Cover:
    """Adaptive cover of a sphere product by cube-face cells."""

    def __init__(self, problem: SearchProblem, cfg: SearchConfig):
        self.problem = problem
        self.cfg = cfg
        self.p = len(problem.factors)
        self.d = problem.dim
        self.others = np.array([[j for j in range(self.d) if j != a] for a in range(self.d)],
                               dtype=np.intp).reshape(self.d, self.d - 1)
        self.threshold = math.sqrt(cfg.margin_tol)

    def initial(self) -> _Cells:
        d, g = self.d, self.cfg.grid_resolution
        edges = np.linspace(-1.0, 1.0, g + 1)
        boxes = list(itertools.product(range(g), repeat=d - 1))
        per_factor = []
        for name in self.problem.factors:
            signs = (1.0,) if self.problem.sign_symmetric(name) else (1.0, -1.0)
            per_factor.append([(a, s, [edges[i] for i in box], [edges[i + 1] for i in box])
                               for a in range(d) for s in signs for box in boxes])
        combos = list(itertools.product(*per_factor))
        axis = np.array([[c[0] for c in combo] for combo in combos], dtype=np.intp)
        sign = np.array([[c[1] for c in combo] for combo in combos])
        lo = np.array([[c[2] for c in combo] for combo in combos]).reshape(len(combos), self.p, d - 1)
        hi = np.array([[c[3] for c in combo] for combo in combos]).reshape(len(combos), self.p, d - 1)
        return self.prune(_Cells(axis, sign, lo, hi))

    def geometry(self, cells: _Cells):
        y = np.zeros(cells.axis.shape + (self.d,))
        np.put_along_axis(y, cells.axis[..., None], cells.sign[..., None], axis=-1)
        if self.d > 1:
            np.put_along_axis(y, self.others[cells.axis], 0.5 * (cells.lo + cells.hi), axis=-1)
        centers = y / np.linalg.norm(y, axis=-1, keepdims=True)
        radii = 0.5 * np.linalg.norm(cells.hi - cells.lo, axis=-1)
        return centers, radii

    def prune(self, cells: _Cells) -> _Cells:
        """Drop cells that cannot contain mutually orthogonal factors."""
        if not self.problem.orthogonal or self.p < 2 or not len(cells):
            return cells
        centers, radii = self.geometry(cells)
        keep = np.ones(len(cells), dtype=bool)
        for f, g in itertools.combinations(range(self.p), 2):
            overlap = np.abs(np.sum(centers[:, f] * centers[:, g], axis=1))
            keep &= overlap <= radii[:, f] + radii[:, g] + 1e-12
        return cells.take(keep)

    def split(self, cells: _Cells, which: np.ndarray) -> _Cells:
        """Bisect every box coordinate of the chosen factor of each cell."""
        parts = []
        for f in range(self.p):
            sel = which == f
            if not np.any(sel):
                continue
            base = cells.take(sel)
            mid = 0.5 * (base.lo[:, f] + base.hi[:, f])
            for corner in itertools.product((0, 1), repeat=self.d - 1):
                lo = base.lo.copy()
                hi = base.hi.copy()
                for c, upper in enumerate(corner):
                    if upper:
                        lo[:, f, c] = mid[:, c]
                    else:
                        hi[:, f, c] = mid[:, c]
                parts.append(_Cells(base.axis, base.sign, lo, hi))
        return self.prune(_Cells.concat(parts)) if parts else cells.take(np.zeros(0, dtype=bool))

    def run(self) -> Optional[float]:
        cells = self.initial()
        lower = math.inf
        evaluated = 0
        generation = 0
        while len(cells):
            if evaluated + len(cells) > self.cfg.max_cells:
                logger.warning(f"{self.problem.name}: certification budget of "
                               f"{self.cfg.max_cells} cells exhausted")
                return None
            evaluated += len(cells)
            pending = []
            for start in range(0, len(cells), self.cfg.chunk_size):
                chunk = cells.take(slice(start, start + self.cfg.chunk_size))
                centers, radii = self.geometry(chunk)

                on_manifold = self.problem.retract(centers)
                if np.min(self.problem.residual(on_manifold)) < self.cfg.margin_tol:
                    logger.debug(f"{self.problem.name}: residual below margin on the manifold")
                    return None

                margins = self.problem.margins(centers, radii)
                certified = np.max(margins, axis=1) >= self.threshold
                if np.any(certified):
                    bounds = np.sum(np.maximum(margins[certified], 0.0) ** 2, axis=1)
                    lower = min(lower, float(np.min(bounds)))
                rest = ~certified
                if not np.any(rest):
                    continue

                margins, radii = margins[rest], radii[rest]
                if np.any(np.max(radii, axis=1) < self.cfg.min_radius):
                    logger.debug(f"{self.problem.name}: cells shrank below minimum radius")
                    return None
                target = np.argmax(margins, axis=1)
                score = radii * self.problem.split_weights[target]
                score = np.where(radii > 0, score + radii, -1.0)
                pending.append(self.split(chunk.take(rest), np.argmax(score, axis=1)))

            generation += 1
            cells = _Cells.concat(pending) if pending else cells.take(np.zeros(0, dtype=bool))
            logger.debug(f"{self.problem.name}: generation {generation}, "
                         f"{len(cells)} open cells, {evaluated} evaluated")
        return lower if math.isfinite(lower) else None


def certify_positive(problem: SearchProblem, cfg: SearchConfig) -> Optional[float]:
    """
    Prove a positive lower bound on the residual over the whole manifold.

    Returns:
        The bound, or None when the cover cannot establish one within
        ``cfg.max_cells`` evaluations

    Raises:
        DimensionTooLarge: If the manifold dimension exceeds ``cfg.max_dimension``
    """
    if problem.manifold_dimension > cfg.max_dimension:
        raise DimensionTooLarge(
            f"{problem.name}: manifold dimension {problem.manifold_dimension} exceeds "
            f"{cfg.max_dimension}")
    if not problem.equations:
        return None
    bound = _Cover(problem, cfg).run()
    if bound is not None:
        logger.info(f"{problem.name}: certified residual lower bound {bound:.3e}")
    return bound


def certify_outcome(problem: SearchProblem, outcome: SearchOutcome,
                    cfg: SearchConfig) -> SearchOutcome:
    """
    Attach a certified residual lower bound to a search outcome.

    The outcome comes back unchanged when the cover finds no bound.

    Raises:
        DimensionTooLarge: If the manifold dimension exceeds ``cfg.max_dimension``
    """
    bound = certify_positive(problem, cfg)
    if bound is None:
        return outcome
    certified = replace(outcome, certified_lower_bound=bound)
    logger.debug(f"{problem.name}: {certified.summary()}")
    return certified


def _canonical(x: np.ndarray) -> np.ndarray:
    x = np.where(np.abs(x) < _SNAP, 0.0, x)
    norm = np.linalg.norm(x)
    if norm > 0:
        x = x / norm
    nonzero = np.flatnonzero(x)
    if nonzero.size and x[nonzero[0]] < 0:
        x = -x
    return x


def cluster_witnesses(points: Sequence[Sequence[float]],
                      angular_tol: float = 1e-3) -> List[Tuple[float, ...]]:
    """
    Group unit directions within ``angular_tol`` radians, identifying v with -v.

    Args:
        points: Unit vectors
        angular_tol: Clustering angle

    Returns:
        One canonical representative per cluster (first non-zero coordinate
        positive), lexicographically largest cluster first
    """
    canon = [_canonical(np.asarray(x, dtype=float)) for x in points]
    order = sorted(range(len(canon)), key=lambda i: tuple(-canon[i]))
    cos_tol = math.cos(angular_tol)
    clusters: List[List[np.ndarray]] = []
    for i in order:
        x = canon[i]
        for members in clusters:
            if abs(float(members[0] @ x)) >= cos_tol:
                members.append(x)
                break
        else:
            clusters.append([x])

    reps = []
    for members in clusters:
        ref = members[0]
        mean = sum(m if m @ ref >= 0 else -m for m in members) / len(members)
        reps.append(tuple(float(c) for c in _canonical(mean)))
    return reps
