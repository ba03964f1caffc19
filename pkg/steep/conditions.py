"""
Executable steepness conditions for functions of n = 2..5 variables.

Each theorem condition is the statement that the jet lies outside one of
the closed sets Psi*_m(n). Membership is decided by witness search on
orthonormal tuples in the hyperplane orthogonal to the gradient; a
certified lower bound on the search residual turns "no witness" into a
proof of non-membership.
"""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from steep.polyjet import Jet, Number, gradient
from steep.search import (
    DimensionTooLarge,
    FormExpr,
    SearchConfig,
    SearchProblem,
    certify_outcome,
    cluster_witnesses,
    complement_frame,
    form,
    minimize,
)


logger = logging.getLogger(__name__)

CERTIFIED_ORDER = 5

DISCLAIMER = ("Sufficient conditions only: NotCertified or Inconclusive does not imply "
              "that the function is not steep.")

HIGH_DIMENSION_EXPLANATION = (
    "n >= 6 is not supported: for six or more variables every three-jet degenerate "
    "five-jet lies in the bad set (beta_1 <= 3), so the sufficient conditions carry "
    "no information at three-jet degenerate points")


class UnsupportedDimension(ValueError):
    """Dimension outside 2..5."""


class OrderTooLow(ValueError):
    """Jet order below what a condition needs."""


class DegenerateGradientError(ValueError):
    """Gradient norm at or below the gradient tolerance."""


class Verdict(str, Enum):
    STEEP_CERTIFIED = 'steep_certified'
    NOT_CERTIFIED = 'not_certified'
    DEGENERATE_GRADIENT = 'degenerate_gradient'
    INCONCLUSIVE = 'inconclusive'


class Status(str, Enum):
    HOLDS = 'holds'
    VIOLATED = 'violated'
    UNKNOWN = 'unknown'


class Degeneracy(str, Enum):
    NON_DEGENERATE = 'non_degenerate'
    DEGENERATE = 'degenerate'
    UNKNOWN = 'unknown'


@dataclass(frozen=True)
class DegeneracyResult:
    """Outcome of an r-jet degeneracy scan."""
    order: int
    status: Degeneracy
    witnesses: Tuple[Tuple[float, ...], ...] = ()
    margin: Optional[float] = None
    best_residual: Optional[float] = None
    starts: int = 0
    iterations: int = 0

    def to_dict(self) -> Dict:
        return {
            'order': self.order,
            'status': self.status.value,
            'witnesses': [list(w) for w in self.witnesses],
            'margin': self.margin,
            'best_residual': self.best_residual,
            'starts': self.starts,
            'iterations': self.iterations,
        }


@dataclass(frozen=True)
class IndexTable:
    """Steepness index bounds alpha_bar_m, curve degrees beta_m and the codimension bound."""
    n: int
    r: int
    alpha_bar: Tuple[int, ...]
    beta: Tuple[int, ...]
    codim_bound: int

    @property
    def uninformative(self) -> bool:
        """beta_1 <= 3: every three-jet degenerate jet already lies in the bad set."""
        return self.beta[0] <= 3

    def rows(self) -> List[Tuple[int, int, int]]:
        return [(m, a, b) for m, (a, b) in enumerate(zip(self.alpha_bar, self.beta), start=1)]

    def to_dict(self) -> Dict:
        return {
            'n': self.n,
            'r': self.r,
            'alpha_bar': list(self.alpha_bar),
            'beta': list(self.beta),
            'codim_bound': self.codim_bound,
            'uninformative': self.uninformative,
        }


def index_table(n: int, r: int) -> IndexTable:
    """
    Exact index table for (n, r).

    Raises:
        ValueError: If n < 2 or r < 2
    """
    if n < 2 or r < 2:
        raise ValueError(f"index table needs n >= 2 and r >= 2, got n={n}, r={r}")
    if n % 2 == 0:
        half, quarter = n * (n - 2) // 2, n * (n - 2) // 4
    else:
        half, quarter = (n - 1) ** 2 // 2, (n - 1) ** 2 // 4
    alpha_bar = tuple(max(1, 2 * r - 3 - half + 2 * m * (n - m - 1)) for m in range(1, n))
    beta = tuple((a + 3) // 2 for a in alpha_bar)
    return IndexTable(n, r, alpha_bar, beta, max(0, r - 1 - quarter))


def rank_deficient(vectors: Sequence[Sequence[float]], threshold: float = 1e-6) -> bool:
    """True iff the smallest singular value is at most ``threshold`` times the largest."""
    M = np.asarray(vectors, dtype=float)
    if M.ndim != 2 or M.shape[0] < 1:
        raise ValueError("rank test needs a non-empty list of vectors")
    if M.shape[0] > M.shape[1]:
        return True
    s = np.linalg.svd(M, compute_uv=False)
    return bool(s[0] == 0 or s[-1] <= threshold * s[0])


def _gradient_vector(jet: Jet) -> np.ndarray:
    return np.array([float(g) for g in gradient(jet)])


def two_jet_oracle(jet: Jet, cfg: Optional[SearchConfig] = None) -> bool:
    """
    Definiteness of the Hessian restricted to the gradient's orthogonal complement.

    Raises:
        DegenerateGradientError: If the gradient norm is at most cfg.gradient_tol
    """
    cfg = cfg or SearchConfig()
    if jet.order < 2:
        raise OrderTooLow(f"two-jet oracle needs order >= 2, got {jet.order}")
    g = _gradient_vector(jet)
    if np.linalg.norm(g) <= cfg.gradient_tol:
        raise DegenerateGradientError("gradient vanishes at the point")
    Q = complement_frame(g)
    eigenvalues = np.linalg.eigvalsh(Q.T @ jet.tensor(2) @ Q)
    return bool(np.all(eigenvalues > cfg.eig_tol) or np.all(eigenvalues < -cfg.eig_tol))


def degeneracy_problem(jet: Jet, r: int) -> SearchProblem:
    """Unit v in R^n with h^k[v, ..., v] = 0 for k = 1..r."""
    return SearchProblem(
        name=f"{r}-jet degeneracy",
        jet=jet,
        factors=('v',),
        equations=tuple(form(k, 'v' * k) for k in range(1, r + 1)),
    )


def r_jet_degeneracy(jet: Jet, r: int, cfg: SearchConfig, salt: int = 0) -> DegeneracyResult:
    """
    Decide whether h^1[v] = ... = h^r[v, ..., v] = 0 has a unit solution.

    Args:
        jet: Jet of order >= r
        r: Order to check
        cfg: Search configuration
        salt: Seed component separating this search from others

    Returns:
        DegeneracyResult with clustered unit witnesses, a certified margin, or neither
    """
    if not 1 <= r <= jet.order:
        raise OrderTooLow(f"degeneracy order {r} outside 1..{jet.order}")
    problem = degeneracy_problem(jet, r)
    outcome = minimize(problem, cfg, salt=salt)
    hits = outcome.below(cfg.witness_tol)
    stats = dict(best_residual=outcome.best_value, starts=outcome.starts,
                 iterations=outcome.iterations)
    if len(hits):
        witnesses = cluster_witnesses(hits[:, 0], cfg.cluster_angle)
        logger.info(f"{r}-jet degenerate: {len(witnesses)} direction cluster(s)")
        return DegeneracyResult(r, Degeneracy.DEGENERATE, tuple(witnesses), **stats)

    if cfg.mode == 'certify':
        try:
            outcome = certify_outcome(problem, outcome, cfg)
        except DimensionTooLarge as e:
            logger.info(f"{e}; falling back to heuristic outcome")
        bound = outcome.certified_lower_bound
        if bound is not None and bound >= cfg.margin_tol:
            return DegeneracyResult(r, Degeneracy.NON_DEGENERATE, margin=bound, **stats)
    return DegeneracyResult(r, Degeneracy.UNKNOWN, margin=outcome.best_value, **stats)


def _psi2_equations(quintic: bool) -> Tuple[FormExpr, ...]:
    equations = (
        form(2, 'vv'),
        form(3, 'vvv'),
        form(2, 'uv'),
        form(2, 'uu') * form(4, 'vvvv') - 3 * form(3, 'vvu') ** 2,
    )
    if quintic:
        equations += (
            15 * form(3, 'vvu') ** 2 * form(3, 'uuv')
            + form(5, 'vvvvv') * form(2, 'uu') ** 2
            - 10 * form(4, 'vvvu') * form(3, 'uvv') * form(2, 'uu'),
        )
    return equations


def _psi35_equations() -> Tuple[FormExpr, ...]:
    a, b, d = form(2, 'uu'), form(2, 'uw'), form(2, 'ww')
    p, q = form(3, 'uvv'), form(3, 'wvv')
    H = form(4, 'vvvv')
    return (
        form(2, 'vv'),
        form(3, 'vvv'),
        form(2, 'uv'),
        form(2, 'wv'),
        (H * a - 3 * p ** 2) * (d * a - b ** 2) + 6 * p * q * a * b
        - 3 * p ** 2 * b ** 2 - 3 * q ** 2 * a ** 2,
    )


@dataclass(frozen=True)
class PsiSet:
    """
    One of the closed jet sets Psi*_m(n).

    ``equations`` is the defining system on the witness tuple ``vectors``.
    A ``spanning`` set is searched over v alone: its remaining vectors span
    the rest of the gradient complement, so the conditions on them become
    h^2[v, .] = 0 on the whole complement.
    """
    set_id: str
    m: int
    n: int
    vectors: Tuple[str, ...]
    equations: Tuple[FormExpr, ...]
    degeneracy_order: int = 0
    spanning: bool = False
    cubic: bool = False


def _build_psi_sets() -> Dict[str, PsiSet]:
    sets = [PsiSet(f"psi1*({n})", 1, n, ('v',),
                   tuple(form(k, 'v' * k) for k in range(1, 6 if n < 5 else 5)),
                   degeneracy_order=5 if n < 5 else 4)
            for n in (2, 3, 4, 5)]
    sets += [
        PsiSet("psi2*(3)", 2, 3, ('v', 'u'), _psi2_equations(quintic=False)),
        PsiSet("psi2*(4)", 2, 4, ('v', 'u'), _psi2_equations(quintic=True)),
        PsiSet("psi2*(5)", 2, 5, ('v', 'u'), _psi2_equations(quintic=True)),
        PsiSet("psi3*(4)", 3, 4, ('v', 'u', 'w'),
               (form(2, 'vv'), form(3, 'vvv'), form(2, 'uv'), form(2, 'wv')),
               spanning=True, cubic=True),
        PsiSet("psi3*(5)", 3, 5, ('v', 'u', 'w'), _psi35_equations()),
        PsiSet("psi4*(5)", 4, 5, ('v', 'u', 'w', 'x'),
               (form(2, 'vv'), form(2, 'uv'), form(2, 'wv'), form(2, 'xv')),
               spanning=True),
    ]
    return {s.set_id: s for s in sets}


PSI_SETS: Dict[str, PsiSet] = _build_psi_sets()


def psi_problem(jet: Jet, psi: PsiSet) -> SearchProblem:
    """Search formulation of a Psi* set inside the gradient complement."""
    frame = complement_frame(_gradient_vector(jet))
    d = frame.shape[1]
    if not psi.spanning:
        return SearchProblem(name=psi.set_id, jet=jet, factors=psi.vectors,
                             equations=psi.equations, frame=frame)
    constants = {f"q{j}": np.eye(d)[j] for j in range(d)}
    equations = tuple(form(2, ('v', f"q{j}")) for j in range(d))
    if psi.cubic:
        equations += (form(3, 'vvv'),)
    return SearchProblem(name=psi.set_id, jet=jet, factors=('v',), equations=equations,
                         frame=frame, constants=constants)


def _witness_tuple(problem: SearchProblem, psi: PsiSet, point: np.ndarray) -> Dict[str, np.ndarray]:
    """Ambient witness vectors for one search point of shape (p, n)."""
    if not psi.spanning:
        return {name: point[i] for i, name in enumerate(psi.vectors)}
    v = problem.from_ambient(point[:1])[0]
    rest = complement_frame(v)
    vectors = {'v': point[0]}
    for i, name in enumerate(psi.vectors[1:]):
        vectors[name] = problem.frame @ rest[:, i]
    return vectors


def defining_residual(jet: Jet, psi: PsiSet, vectors: Mapping[str, Sequence[float]]) -> float:
    """Sum of squares of a set's defining equations at explicit vectors."""
    return float(sum(float(eq.evaluate(jet, vectors)) ** 2 for eq in psi.equations))


@dataclass(frozen=True)
class MembershipResult:
    """Whether a jet lies in a Psi* set, with the evidence."""
    set_id: str
    member: Optional[bool]
    witness: Optional[Dict[str, Tuple[float, ...]]] = None
    best_residual: Optional[float] = None
    certified_lower_bound: Optional[float] = None
    starts: int = 0
    iterations: int = 0
    note: str = ''

    @property
    def status(self) -> 'Status':
        """Status of the theorem condition 'the jet is not in the set'."""
        return {True: Status.VIOLATED, False: Status.HOLDS, None: Status.UNKNOWN}[self.member]


def psi_membership(jet: Jet, set_id: str, cfg: SearchConfig, salt: int = 0) -> MembershipResult:
    """
    Decide membership of the jet in Psi*_m(n).

    Args:
        jet: Order-5 jet with non-vanishing gradient
        set_id: Identifier such as "psi2*(4)" (see ``PSI_SETS``)
        cfg: Search configuration
        salt: Seed component separating this search from others

    Returns:
        MembershipResult; ``member`` is None when neither a witness nor a certificate was found

    Raises:
        ValueError: For an unknown set id or a jet of the wrong dimension
        OrderTooLow: If the jet order is below 5
        DegenerateGradientError: If the gradient vanishes
    """
    psi = PSI_SETS.get(set_id)
    if psi is None:
        raise ValueError(f"unknown set id {set_id!r}; known: {', '.join(PSI_SETS)}")
    if jet.n != psi.n:
        raise ValueError(f"{set_id} is a set of {psi.n}-variable jets, got n={jet.n}")
    if jet.order < CERTIFIED_ORDER:
        raise OrderTooLow(f"{set_id} needs a jet of order {CERTIFIED_ORDER}, got {jet.order}")
    if np.linalg.norm(_gradient_vector(jet)) <= cfg.gradient_tol:
        raise DegenerateGradientError("gradient vanishes at the point")

    if psi.m == 1:
        scan = r_jet_degeneracy(jet, psi.degeneracy_order, cfg, salt=salt)
        stats = dict(best_residual=scan.best_residual, starts=scan.starts,
                     iterations=scan.iterations)
        if scan.status is Degeneracy.DEGENERATE:
            return MembershipResult(set_id, True, {'v': scan.witnesses[0]}, **stats)
        if scan.status is Degeneracy.NON_DEGENERATE:
            return MembershipResult(set_id, False, certified_lower_bound=scan.margin, **stats)
        return MembershipResult(set_id, None, **stats)

    problem = psi_problem(jet, psi)
    outcome = minimize(problem, cfg, salt=salt)
    stats = dict(best_residual=outcome.best_value, starts=outcome.starts,
                 iterations=outcome.iterations)

    order = np.argsort(outcome.values, kind='stable')
    for i in order:
        if outcome.values[i] >= cfg.witness_tol:
            break
        vectors = _witness_tuple(problem, psi, outcome.points[i])
        if rank_deficient(list(vectors.values()), cfg.rank_tol):
            continue
        if defining_residual(jet, psi, vectors) >= cfg.witness_tol:
            continue
        witness = {name: tuple(float(x) for x in vec) for name, vec in vectors.items()}
        logger.info(f"{set_id}: full-rank witness with residual {outcome.values[i]:.3e}")
        return MembershipResult(set_id, True, witness, **stats)

    if cfg.mode == 'certify':
        try:
            outcome = certify_outcome(problem, outcome, cfg)
        except DimensionTooLarge as e:
            logger.info(f"{e}; falling back to heuristic outcome")
            return MembershipResult(set_id, None, note='manifold too large to certify', **stats)
        bound = outcome.certified_lower_bound
        if bound is not None and bound >= cfg.margin_tol:
            return MembershipResult(set_id, False, certified_lower_bound=bound, **stats)
        return MembershipResult(set_id, None, note='no certificate at the configured budget',
                                **stats)
    return MembershipResult(set_id, None, note='heuristic mode: no witness found', **stats)


def psi_direct(jet: Jet, u: Sequence, v: Sequence, params: Mapping[str, Number]) -> Tuple[Number, ...]:
    """
    Residuals of the non-starred Psi_2(n) system at supplied (u, v, alpha, beta, gamma).

    Each equation is paired with u and with v, which is the projection onto
    their span. Exact when the jet, vectors and parameters are rational.
    """
    alpha = params.get('alpha', 0)
    beta = params.get('beta', 0)
    gamma = params.get('gamma', 0)
    quartic = jet.n >= 4
    if jet.order < (5 if quartic else 4):
        raise OrderTooLow(f"Psi_2({jet.n}) needs order {5 if quartic else 4}")

    out: List[Number] = []
    for z in ('u', 'v'):
        pieces = [
            form(1, z),
            form(2, ('v', z)),
            2 * alpha * form(2, ('u', z)) + form(3, ('v', 'v', z)),
            6 * beta * form(2, ('u', z)) + 6 * alpha * form(3, ('u', 'v', z))
            + form(4, ('v', 'v', 'v', z)),
        ]
        if quartic:
            pieces.append(
                24 * gamma * form(2, ('u', z)) + 24 * beta * form(3, ('v', 'u', z))
                + 12 * alpha ** 2 * form(3, ('u', 'u', z)) + 12 * alpha * form(4, ('v', 'v', 'u', z))
                + form(5, ('v', 'v', 'v', 'v', z)))
        for eq in pieces:
            out.append(eq.evaluate(jet, {'u': u, 'v': v}))
    return tuple(out)


@dataclass(frozen=True)
class TheoremCondition:
    condition_id: str
    set_id: str
    description: str
    # Holds automatically once three-jet non-degeneracy is certified
    three_jet_vacuous: bool = True


THEOREMS: Dict[int, Tuple[TheoremCondition, ...]] = {
    2: (
        TheoremCondition('n2.cond1', 'psi1*(2)', 'h is five-jet non-degenerate'),
    ),
    3: (
        TheoremCondition('n3.cond1', 'psi1*(3)', 'h is five-jet non-degenerate'),
        TheoremCondition('n3.cond2', 'psi2*(3)',
                         'no three-jet degenerate v pairs with an independent u solving '
                         'the order-four system'),
    ),
    4: (
        TheoremCondition('n4.cond1', 'psi1*(4)', 'h is five-jet non-degenerate'),
        TheoremCondition('n4.cond2', 'psi2*(4)',
                         'no three-jet degenerate v pairs with an independent u solving '
                         'the order-four and order-five systems'),
        TheoremCondition('n4.cond3', 'psi3*(4)',
                         'no three-jet degenerate v is Hessian-orthogonal to the whole '
                         'gradient complement'),
    ),
    5: (
        TheoremCondition('n5.cond1', 'psi1*(5)', 'h is four-jet non-degenerate'),
        TheoremCondition('n5.cond2', 'psi2*(5)',
                         'no three-jet degenerate v pairs with an independent u solving '
                         'the order-four and order-five systems'),
        TheoremCondition('n5.cond3', 'psi3*(5)',
                         'no three-jet degenerate v spans with u, w a full-rank solution '
                         'of the eliminated order-four system'),
        TheoremCondition('n5.cond4', 'psi4*(5)',
                         'no two-jet degenerate v is Hessian-orthogonal to the whole '
                         'gradient complement', three_jet_vacuous=False),
    ),
}


@dataclass(frozen=True)
class ConditionRecord:
    """Evidence for one theorem condition."""
    condition_id: str
    set_id: str
    description: str
    status: Status
    best_residual: Optional[float] = None
    witness: Optional[Dict[str, Tuple[float, ...]]] = None
    certified_lower_bound: Optional[float] = None
    starts: int = 0
    iterations: int = 0
    note: str = ''

    def to_dict(self) -> Dict:
        return {
            'id': self.condition_id,
            'set': self.set_id,
            'description': self.description,
            'status': self.status.value,
            'best_residual': self.best_residual,
            'witness': ({k: list(v) for k, v in self.witness.items()}
                        if self.witness is not None else None),
            'certified_lower_bound': self.certified_lower_bound,
            'starts': self.starts,
            'iterations': self.iterations,
            'note': self.note,
        }


def combine_verdict(records: Sequence[ConditionRecord]) -> Verdict:
    """SteepCertified iff every record holds; any violation gives NotCertified."""
    statuses = [r.status for r in records]
    if Status.VIOLATED in statuses:
        return Verdict.NOT_CERTIFIED
    if all(s is Status.HOLDS for s in statuses):
        return Verdict.STEEP_CERTIFIED
    return Verdict.INCONCLUSIVE


@dataclass(frozen=True)
class ConditionReport:
    """Verdict of a steepness check with per-condition evidence."""
    n: int
    order: int
    point: Tuple[Number, ...]
    verdict: Verdict
    conditions: Tuple[ConditionRecord, ...]
    config: SearchConfig
    prechecks: Tuple[DegeneracyResult, ...] = ()
    reason: str = ''
    generated_at: str = field(default_factory=lambda: datetime.now().isoformat(timespec='seconds'))

    def to_dict(self) -> Dict:
        return {
            'verdict': self.verdict.value,
            'n': self.n,
            'order': self.order,
            'point': [str(x) if not isinstance(x, float) else x for x in self.point],
            'reason': self.reason,
            'conditions': [r.to_dict() for r in self.conditions],
            'prechecks': [p.to_dict() for p in self.prechecks],
            'config': self.config.to_dict(),
            'non_default': self.config.non_default(),
            'seed': self.config.seed,
            'disclaimer': DISCLAIMER,
            'generated_at': self.generated_at,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _check_condition(jet: Jet, condition: TheoremCondition, cfg: SearchConfig,
                     salt: int) -> ConditionRecord:
    result = psi_membership(jet, condition.set_id, cfg, salt=salt)
    status = result.status
    logger.info(f"{condition.condition_id} ({condition.set_id}): {status.value}")
    return ConditionRecord(
        condition_id=condition.condition_id,
        set_id=condition.set_id,
        description=condition.description,
        status=status,
        best_residual=result.best_residual,
        witness=result.witness,
        certified_lower_bound=result.certified_lower_bound,
        starts=result.starts,
        iterations=result.iterations,
        note=result.note,
    )


def check_steepness(jet: Jet, cfg: SearchConfig) -> ConditionReport:
    """
    Check the sufficient steepness conditions for the jet's dimension.

    Args:
        jet: Jet of order 5 (higher orders are truncated) in 2..5 variables
        cfg: Search configuration

    Returns:
        ConditionReport with the overall verdict

    Raises:
        UnsupportedDimension: If n is outside 2..5
        OrderTooLow: If the jet order is below 5
    """
    if jet.n not in THEOREMS:
        if jet.n >= 6:
            raise UnsupportedDimension(HIGH_DIMENSION_EXPLANATION)
        raise UnsupportedDimension(f"steepness conditions exist for n = 2..5, got n={jet.n}")
    if jet.order < CERTIFIED_ORDER:
        raise OrderTooLow(f"steepness check needs a five-jet, got order {jet.order}")
    if jet.order > CERTIFIED_ORDER:
        jet = jet.truncated(CERTIFIED_ORDER)

    base = dict(n=jet.n, order=jet.order, point=jet.point, config=cfg)
    grad_norm = float(np.linalg.norm(_gradient_vector(jet)))
    if grad_norm <= cfg.gradient_tol:
        logger.info(f"gradient norm {grad_norm:.3e} at or below {cfg.gradient_tol:g}")
        return ConditionReport(verdict=Verdict.DEGENERATE_GRADIENT, conditions=(),
                               reason='gradient vanishes at the point', **base)

    logger.info("=" * 60)
    logger.info(f"Checking steepness conditions for n={jet.n}")
    logger.info("=" * 60)

    prechecks: Tuple[DegeneracyResult, ...] = ()
    vacuous = False
    if jet.n >= 3:
        scan = r_jet_degeneracy(jet, 3, cfg, salt=1000)
        prechecks = (scan,)
        vacuous = scan.status is Degeneracy.NON_DEGENERATE
        if vacuous:
            logger.info("three-jet non-degenerate: conditions over three-jet degenerate "
                        "directions hold vacuously")

    plan = THEOREMS[jet.n]
    records: List[Optional[ConditionRecord]] = [None] * len(plan)
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        futures = {}
        for index, condition in enumerate(plan):
            if vacuous and condition.three_jet_vacuous:
                records[index] = ConditionRecord(
                    condition.condition_id, condition.set_id, condition.description,
                    Status.HOLDS, certified_lower_bound=prechecks[0].margin,
                    note='vacuous: h is three-jet non-degenerate')
                continue
            futures[index] = pool.submit(_check_condition, jet, condition, cfg, index + 1)
        for index, future in futures.items():
            records[index] = future.result()

    verdict = combine_verdict(records)
    reason = ''
    if verdict is Verdict.NOT_CERTIFIED:
        violated = [r.condition_id for r in records if r.status is Status.VIOLATED]
        reason = f"violated: {', '.join(violated)}"
    elif verdict is Verdict.INCONCLUSIVE:
        unknown = [r.condition_id for r in records if r.status is Status.UNKNOWN]
        reason = f"undecided: {', '.join(unknown)}"
    logger.info(f"verdict: {verdict.value} {reason}")
    return ConditionReport(verdict=verdict, conditions=tuple(records), prechecks=prechecks,
                           reason=reason, **base)
