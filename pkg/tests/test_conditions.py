"""
Tests for the steepness conditions and the verdict logic.
"""
import json
from fractions import Fraction

import numpy as np
import pytest

from steep.catalog import FIVE_VARIABLE, psi2_family
from steep.conditions import (
    PSI_SETS,
    ConditionRecord,
    Degeneracy,
    DegenerateGradientError,
    OrderTooLow,
    Status,
    UnsupportedDimension,
    Verdict,
    check_steepness,
    combine_verdict,
    defining_residual,
    index_table,
    psi_direct,
    psi_membership,
    r_jet_degeneracy,
    rank_deficient,
    two_jet_oracle,
)
from steep.polyjet import Jet, gradient, jet_at, jet_from_coeffs, jet_indices, multilinear, parse_polynomial


@pytest.mark.parametrize('n, beta', [
    (2, (5,)),
    (3, (5, 4)),
    (4, (5, 5, 3)),
    (5, (4, 5, 4, 2)),
])
def test_index_table_beta(n, beta):
    assert index_table(n, 5).beta == beta


def test_index_table_codimension_and_flags():
    assert index_table(4, 5).codim_bound == 2
    six = index_table(6, 5)
    assert six.alpha_bar[0] == 3
    assert six.beta[0] == 3
    assert six.uninformative
    assert not index_table(5, 5).uninformative
    with pytest.raises(ValueError):
        index_table(1, 5)


def test_rank_deficient():
    assert not rank_deficient([(1, 0, 0), (0, 1, 0)])
    assert rank_deficient([(1, 0, 0), (2, 0, 0)])
    assert rank_deficient([(1, 0, 0), (1, 1e-9, 0)])
    assert rank_deficient([(1, 0), (0, 1), (1, 1)])


def test_two_jet_oracle_reference_cases(example2_jet):
    assert two_jet_oracle(example2_jet) is False
    convex = jet_at(parse_polynomial("I1 + I2^2", 2), (0, 0), 2)
    assert two_jet_oracle(convex) is True


def test_two_jet_oracle_rejects_critical_points():
    jet = jet_at(parse_polynomial("I1^2", 2), (0, 0), 2)
    with pytest.raises(DegenerateGradientError):
        two_jet_oracle(jet)


def test_two_jet_oracle_agrees_with_degeneracy_search(quick_cfg):
    """On random quadratics, definiteness on the gradient complement means no order-2 witness."""
    rng = np.random.default_rng(21)
    n = 3
    checked = 0
    while checked < 100:
        values = rng.standard_normal(len(jet_indices(n, 2)))
        jet = Jet.from_vector(n, 2, values)
        g = np.array([float(x) for x in gradient(jet)])
        Q = np.linalg.svd(g[None, :])[2][1:].T
        eig = np.linalg.eigvalsh(Q.T @ jet.tensor(2) @ Q)
        if np.min(np.abs(eig)) < 1e-2:
            continue
        checked += 1
        oracle = two_jet_oracle(jet)
        scan = r_jet_degeneracy(jet, 2, quick_cfg, salt=checked)
        assert oracle == (scan.status is not Degeneracy.DEGENERATE)


def test_three_jet_degeneracy_four_variables(example1_jet, cfg):
    result = r_jet_degeneracy(example1_jet, 3, cfg)
    assert result.status is Degeneracy.DEGENERATE
    assert len(result.witnesses) == 1
    np.testing.assert_allclose(result.witnesses[0], (0, 1, 0, 0), atol=1e-6)


def test_five_jet_non_degenerate_four_variables(example1_jet, cfg):
    result = r_jet_degeneracy(example1_jet, 5, cfg)
    assert result.status is Degeneracy.NON_DEGENERATE
    assert result.margin >= cfg.margin_tol


def test_degeneracy_five_variables(example2_jet, cfg):
    three = r_jet_degeneracy(example2_jet, 3, cfg)
    assert [tuple(np.round(w, 6)) for w in three.witnesses] == [(0, 0, 0, 1, 0)]
    assert r_jet_degeneracy(example2_jet, 4, cfg).status is Degeneracy.NON_DEGENERATE

    two = r_jet_degeneracy(example2_jet, 2, cfg)
    assert two.status is Degeneracy.DEGENERATE
    for z in two.witnesses:
        assert abs(z[1]) < 1e-4
        assert abs(z[0] ** 2 + z[2] ** 2 + z[4] ** 2 - 2 * z[2] * z[3]) < 1e-4


def test_cone_direction_is_two_jet_degenerate(example2_jet):
    z = np.array([1.0, 0.0, 1.0, 1.0, 0.0]) / np.sqrt(3.0)
    residual = defining_residual(example2_jet, PSI_SETS['psi1*(5)'], {'v': z})
    assert residual > 0
    assert abs(multilinear(example2_jet, 1, [z])) < 1e-12
    assert abs(multilinear(example2_jet, 2, [z, z])) < 1e-12


def test_degeneracy_witness_sign_symmetry(example1_jet):
    v = (0, 1, 0, 0)
    w = (0, -1, 0, 0)
    for k in (1, 2, 3):
        assert PSI_SETS['psi1*(4)'].equations[k - 1].evaluate(example1_jet, {'v': v}) == 0
        assert PSI_SETS['psi1*(4)'].equations[k - 1].evaluate(example1_jet, {'v': w}) == 0


def test_check_four_variable_reference(example1_jet, cfg):
    report = check_steepness(example1_jet, cfg)
    assert report.verdict is Verdict.STEEP_CERTIFIED
    assert [r.condition_id for r in report.conditions] == ['n4.cond1', 'n4.cond2', 'n4.cond3']
    assert all(r.status is Status.HOLDS for r in report.conditions)
    assert report.prechecks[0].status is Degeneracy.DEGENERATE


def test_check_five_variable_reference(example2_jet, cfg):
    report = check_steepness(example2_jet, cfg)
    assert report.verdict is Verdict.STEEP_CERTIFIED
    by_id = {r.condition_id: r for r in report.conditions}
    assert by_id['n5.cond4'].status is Status.HOLDS
    assert by_id['n5.cond4'].certified_lower_bound >= cfg.margin_tol


def test_check_is_deterministic(cfg):
    jet = jet_at(parse_polynomial("I1 + I2^2 + I1*I2^3", 2), (0, 0), 5)
    first = check_steepness(jet, cfg).to_dict()
    second = check_steepness(jet, cfg).to_dict()
    first.pop('generated_at')
    second.pop('generated_at')
    assert first == second
    assert first['verdict'] == 'steep_certified'


def test_check_degenerate_gradient(cfg):
    jet = jet_at(parse_polynomial("I1^2", 2), (0, 0), 5)
    report = check_steepness(jet, cfg)
    assert report.verdict is Verdict.DEGENERATE_GRADIENT
    assert report.conditions == ()


def test_check_dimension_and_order_gates(cfg):
    six = jet_at(parse_polynomial("I1 + I2^2", 6), (0,) * 6, 5)
    with pytest.raises(UnsupportedDimension) as info:
        check_steepness(six, cfg)
    assert "n >= 6" in str(info.value)
    low = jet_at(parse_polynomial("I1 + I2^2", 2), (0, 0), 4)
    with pytest.raises(OrderTooLow):
        check_steepness(low, cfg)


def test_limit_function_fails_three_variable_condition(limit_jet, cfg):
    report = check_steepness(limit_jet, cfg)
    assert report.verdict is Verdict.NOT_CERTIFIED
    by_id = {r.condition_id: r for r in report.conditions}
    assert by_id['n3.cond1'].status is Status.HOLDS
    violated = by_id['n3.cond2']
    assert violated.status is Status.VIOLATED
    witness = violated.witness
    assert not rank_deficient([witness['v'], witness['u']])
    assert defining_residual(limit_jet, PSI_SETS['psi2*(3)'], witness) < 1e-12


def test_limit_function_explicit_witness(limit_jet):
    residual = defining_residual(limit_jet, PSI_SETS['psi2*(3)'], {'u': (0, 1, 0), 'v': (1, 0, 0)})
    assert residual == 0


def test_shear_invariance_of_pair_witnesses(limit_jet, cfg):
    """A witness (v, u) stays a solution after u -> u + c v."""
    result = psi_membership(limit_jet, 'psi2*(3)', cfg)
    assert result.member is True
    v = np.array(result.witness['v'])
    u = np.array(result.witness['u'])
    for c in (-2.0, 0.5, 3.0):
        assert defining_residual(limit_jet, PSI_SETS['psi2*(3)'], {'v': v, 'u': u + c * v}) < 1e-10


@pytest.mark.parametrize('variant', ['a', 'b'])
@pytest.mark.parametrize('k', [1, 10, 100])
def test_family_members_lie_in_psi2(variant, k):
    member = psi2_family(k, variant)
    jet = jet_at(member.function.polynomial(), member.function.origin, 5)
    residuals = psi_direct(jet, member.u, member.v, member.params)
    assert all(r == 0 for r in residuals)


def test_printed_parameters_fail_for_other_family():
    member = psi2_family(10, 'b')
    jet = jet_at(member.function.polynomial(), member.function.origin, 5)
    residuals = psi_direct(jet, member.u, member.v, {'alpha': Fraction(5), 'beta': Fraction(50)})
    assert any(r != 0 for r in residuals)


def test_psi_membership_argument_checks(example1_jet, cfg):
    with pytest.raises(ValueError):
        psi_membership(example1_jet, 'psi9*(4)', cfg)
    with pytest.raises(ValueError):
        psi_membership(example1_jet, 'psi2*(3)', cfg)
    with pytest.raises(OrderTooLow):
        psi_membership(example1_jet.truncated(4), 'psi2*(4)', cfg)


def test_combine_verdict():
    holds = ConditionRecord('a', 's', 'd', Status.HOLDS)
    unknown = ConditionRecord('b', 's', 'd', Status.UNKNOWN)
    violated = ConditionRecord('c', 's', 'd', Status.VIOLATED)
    assert combine_verdict([holds]) is Verdict.STEEP_CERTIFIED
    assert combine_verdict([holds, holds]) is Verdict.STEEP_CERTIFIED
    assert combine_verdict([holds, unknown]) is Verdict.INCONCLUSIVE
    assert combine_verdict([unknown, violated]) is Verdict.NOT_CERTIFIED


def test_report_json(example1_jet, cfg):
    report = check_steepness(example1_jet, cfg)
    document = json.loads(report.to_json())
    assert document['verdict'] == 'steep_certified'
    assert document['disclaimer'].startswith('Sufficient conditions only')
    assert document['config']['seed'] == cfg.seed
    assert document['non_default'] == {}


def test_two_variable_jet_from_coefficients(cfg):
    jet = jet_from_coeffs(2, 5, (0, 0), [((1, 0), 1), ((0, 5), 1)])
    report = check_steepness(jet, cfg)
    assert report.verdict is Verdict.STEEP_CERTIFIED


@pytest.mark.parametrize('factor', [Fraction(1, 3), 4])
def test_verdict_is_invariant_under_jet_scaling(factor, cfg):
    jet = jet_at(parse_polynomial("I1 + I2^2 + I1*I2^3", 2), (0, 0), 5)
    base = check_steepness(jet, cfg)
    scaled = check_steepness(jet.scaled(factor), cfg)
    assert scaled.verdict is base.verdict is Verdict.STEEP_CERTIFIED
    assert [r.status for r in scaled.conditions] == [r.status for r in base.conditions]


def test_violations_survive_jet_scaling(limit_jet, cfg):
    base = check_steepness(limit_jet, cfg)
    scaled = check_steepness(limit_jet.scaled(2), cfg)
    assert scaled.verdict is base.verdict is Verdict.NOT_CERTIFIED
    assert [r.status for r in scaled.conditions] == [r.status for r in base.conditions]


@pytest.mark.parametrize('text, n, lowest', [
    ("I1 + I2^2 + I3^2", 3, 2),
    (FIVE_VARIABLE.text, 5, 4),
])
def test_non_degeneracy_persists_to_higher_orders(text, n, lowest, cfg):
    jet = jet_at(parse_polynomial(text, n), (0,) * n, 5)
    statuses = [r_jet_degeneracy(jet, r, cfg).status for r in range(lowest, 6)]
    assert statuses == [Degeneracy.NON_DEGENERATE] * len(statuses)


def test_degenerate_directions_solve_lower_orders(example1_jet, quick_cfg):
    three = r_jet_degeneracy(example1_jet, 3, quick_cfg)
    for v in three.witnesses:
        for k in (1, 2):
            assert abs(multilinear(example1_jet, k, [v] * k)) < 1e-6
    assert r_jet_degeneracy(example1_jet, 2, quick_cfg).status is Degeneracy.DEGENERATE


def test_two_variable_certificate_survives_a_definite_extra_direction(cfg):
    """The n=2 certificate and the n=3 check of the same function plus I3^2 agree."""
    two_jet = jet_at(parse_polynomial("I1 + I2^2 + I1*I2^3", 2), (0, 0), 5)
    two = check_steepness(two_jet, cfg)
    three = check_steepness(
        jet_at(parse_polynomial("I1 + I2^2 + I1*I2^3 + I3^2", 3), (0, 0, 0), 5), cfg)

    assert [r.condition_id for r in two.conditions] == ['n2.cond1']
    assert r_jet_degeneracy(two_jet, 5, cfg).status is Degeneracy.NON_DEGENERATE
    assert two.verdict is three.verdict is Verdict.STEEP_CERTIFIED
    assert three.prechecks[0].status is Degeneracy.NON_DEGENERATE
    assert [r.condition_id for r in three.conditions] == ['n3.cond1', 'n3.cond2']
    assert all(r.note.startswith('vacuous') for r in three.conditions)


def test_linear_function_is_not_certified(cfg):
    jet = jet_at(parse_polynomial("I1 + I2 + I3 + I4", 4), (0, 0, 0, 0), 5)
    report = check_steepness(jet, cfg)
    assert report.verdict is Verdict.NOT_CERTIFIED
    assert report.prechecks[0].status is Degeneracy.DEGENERATE

    first = report.conditions[0]
    assert first.condition_id == 'n4.cond1'
    assert first.status is Status.VIOLATED
    v = np.asarray(first.witness['v'])
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-9)
    assert abs(v.sum()) < 1e-6
