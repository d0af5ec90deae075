#!/usr/bin/env python3
"""
InvarLab - Invariance Checker Tests
Kernel and corrected-drift verdicts, series identities, generator probes and manifolds
"""

import numpy as np
import pytest

from field_expressions import ExpressionParser, constant_matrix, constant_vector
from invariance_checker import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    CheckReport,
    InvarianceChecker,
    ModelSpec,
    ModelSpecError,
    PointVerdict,
    aggregate_verdict,
    build_builtin,
    cir_model,
    linear_sigma_model,
    orthant_diag_model,
    rank_one_plane_model,
    to_jsonable,
)
from set_geometry import NormalPair, ParametrizedManifold, SetOracle


@pytest.fixture
def checker():
    return InvarianceChecker()


def circle_model(drift=('-0.5*x1', '-0.5*x2')):
    parser = ExpressionParser()
    return ModelSpec(
        2, parser.parse_vector(list(drift), 2),
        sigma_field=parser.parse_matrix([['x2^2', '-x1*x2'], ['-x1*x2', 'x1^2']], 2),
        name='circle',
    )


def circle_points(count):
    angles = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False) + 0.1
    return np.column_stack([np.cos(angles), np.sin(angles)])


@pytest.mark.parametrize('a, expected', [
    (-0.5, FAIL),
    (0.0, PASS),
    (0.3, PASS),
    (1.0, PASS),
])
def test_cir_boundary_verdicts(checker, a, expected):
    verdict = checker.check_point(cir_model(a), SetOracle.orthant(1), [0.0])
    assert verdict.verdict == expected
    assert verdict.pass_kernel
    assert verdict.drift_values == [pytest.approx(-a, abs=1e-12)]
    assert verdict.rank == 0


def test_cir_corrected_drift_equals_a_at_origin(checker):
    a_c = checker.corrected_drift_vector(cir_model(0.3), [0.0], 'C')
    np.testing.assert_allclose(a_c, [0.3], atol=1e-12)


def test_cir_check_set_reports_offending_point(checker):
    report = checker.check_set(cir_model(-0.5), SetOracle.orthant(1), points=[[0.0]])
    assert report.verdict == FAIL
    assert [point.index for point in report.offending_points()] == [0]
    assert report.to_dict()['n_points'] == 1


@pytest.mark.parametrize('model', [
    linear_sigma_model(dim=3, scale=0.7),
    orthant_diag_model([0.2, 0.1], [1.0, 0.5]),
    rank_one_plane_model(0.5),
], ids=lambda m: m.name)
def test_trace_form_matches_direct_series(checker, model):
    rng = np.random.default_rng(21)
    for _ in range(20):
        x = rng.uniform(-2.0, 2.0, model.dim)
        u = rng.standard_normal(model.dim)
        direct = checker.direct_series(model, x, u)
        trace = checker.trace_form(model, x, u)
        assert abs(direct - trace) <= 1e-8 * (1.0 + abs(trace))


def test_projection_modes_agree(checker):
    model = rank_one_plane_model(0.5)
    x = np.array([0.4, -1.2])
    np.testing.assert_allclose(checker.projection(model, x, 'range_proj'),
                               checker.projection(model, x, 'pinv_product'), atol=1e-12)
    with pytest.raises(ValueError):
        checker.projection(model, x, 'unknown')


def test_series_equality_on_circle(checker):
    model = circle_model()
    for x in circle_points(20):
        row = checker.series_equality_check(model, x, x)
        assert row['u_in_kernel']
        assert row['lhs'] == pytest.approx(-1.0, abs=1e-6)
        assert row['residual'] <= 5e-5


def test_series_equality_on_rank_one_plane_boundary(checker):
    model = rank_one_plane_model(0.5)
    oracle = SetOracle.half_space([0.0, 1.0], 0.0)
    for x in oracle.boundary_samples(20, np.random.default_rng(22)):
        row = checker.series_equality_check(model, x, [0.0, -1.0])
        assert row['u_in_kernel']
        assert row['residual'] <= 5e-5


def test_series_equality_flags_non_kernel_directions(checker):
    row = checker.series_equality_check(rank_one_plane_model(0.5), [0.3, 0.0], [1.0, 0.0])
    assert not row['u_in_kernel']
    assert row['kernel_residual'] > 0.5


def test_orthant_conditions_reduce_to_first_order(checker):
    drift = np.array([0.2, 0.1])
    model = orthant_diag_model(drift, [1.0, 0.5])
    oracle = SetOracle.orthant(2)
    for index, x in enumerate(oracle.boundary_samples(20, np.random.default_rng(23))):
        verdict = checker.check_point(model, oracle, x, index=index, tangent_field='sigma')
        first_order = [float(u @ drift) for u in verdict.normals]
        np.testing.assert_allclose(verdict.drift_values, first_order, atol=1e-8)
        np.testing.assert_allclose(verdict.curvature_drift_values, first_order, atol=1e-8)
        np.testing.assert_allclose(verdict.sigma_drift_values, first_order, atol=1e-8)
        assert verdict.verdict == PASS


def test_orthant_with_outward_drift_fails(checker):
    model = orthant_diag_model([-0.2, 0.1], [1.0, 0.5])
    verdict = checker.check_point(model, SetOracle.orthant(2), [0.0, 0.7])
    assert not verdict.pass_drift
    assert verdict.verdict == FAIL


def test_kernel_condition_failure(checker):
    model = build_builtin('ou', theta=1.0)
    verdict = checker.check_point(model, SetOracle.orthant(1), [0.0])
    assert not verdict.pass_kernel
    assert verdict.verdict == FAIL


def test_ambiguous_rank_is_inconclusive(checker):
    model = ModelSpec(2, constant_vector([1.0, 0.0], 2),
                      sigma_field=constant_matrix(np.diag([1.0, 1e-5]), 2))
    verdict = checker.check_point(model, SetOracle.half_space([1.0, 0.0], 0.0), [0.0, 0.0])
    assert verdict.rank_ambiguous
    assert verdict.verdict == INCONCLUSIVE


def test_interior_point_has_nothing_to_check(checker):
    verdict = checker.check_point(cir_model(0.3), SetOracle.orthant(1), [2.0])
    assert verdict.normals == []
    assert verdict.verdict == PASS


def test_c_field_model_without_sigma_form(checker):
    parser = ExpressionParser()
    model = ModelSpec(2, parser.parse_vector(['0.1', '0'], 2),
                      c_field=parser.parse_matrix([['x1^2', '0'], ['0', '1']], 2))
    verdict = checker.check_point(model, SetOracle.half_space([1.0, 0.0], 0.0), [0.0, 0.5])
    assert verdict.verdict == PASS
    assert verdict.drift_values == [pytest.approx(-0.1, abs=1e-9)]
    assert verdict.sigma_drift_values is None
    with pytest.raises(ModelSpecError):
        checker.stratonovich_series(model, [0.0, 0.5], [-1.0, 0.0])


def test_second_order_check(checker):
    model = orthant_diag_model([0.2, 0.1], [1.0, 0.5])
    pair = NormalPair.build([0.0, -1.0], -np.eye(2))
    value = checker.second_order_check(model, [0.0, 2.0], pair)
    # <u, b> - 1/2 Tr(C) with C = diag(0, 1)
    assert value == pytest.approx(-0.1 - 0.5)


def test_check_set_is_thread_independent():
    model = orthant_diag_model([0.2, 0.1], [1.0, 0.5])
    oracle = SetOracle.orthant(2)
    single = InvarianceChecker(threads=1).check_set(model, oracle, n_points=16).to_dict()
    pooled = InvarianceChecker(threads=4).check_set(model, oracle, n_points=16).to_dict()
    assert single == pooled
    assert single['verdict'] == PASS


def test_check_set_vacuous_on_whole_space(checker):
    report = checker.check_set(build_builtin('ou', theta=1.0), SetOracle.whole_space(1), n_points=5)
    assert report.verdict == PASS
    assert report.warnings


def test_generator_on_quadratic(checker):
    model = build_builtin('ou', theta=2.0, mu=1.0)
    # L (y^2) = 2y * 2(1 - y) + 1
    value = checker.generator_apply(model, lambda y: float(y[0] ** 2), [0.5])
    assert value == pytest.approx(2.0 * 0.5 * 2.0 * 0.5 + 1.0, rel=1e-6)


def _concave_tests(count, rng):
    functions = []
    for _ in range(count):
        c = -rng.uniform(0.1, 2.0)
        alpha = rng.uniform(0.5, 2.0)
        functions.append(lambda y, c=c, alpha=alpha: 1.0 - alpha * ((y[0] - c) ** 2 - c ** 2))
    return functions


def test_pmp_probes_pass_for_invariant_cir(checker):
    rng = np.random.default_rng(24)
    for phi in _concave_tests(50, rng):
        probe = checker.pmp_probe(cir_model(0.3), SetOracle.orthant(1), phi, n_samples=50, rng=rng)
        assert probe['probed']
        assert probe['x_hat'] == [0.0]
        assert probe['generator_value'] < 0.0
        assert probe['verdict'] == PASS


def test_pmp_probes_fail_for_violating_cir(checker):
    rng = np.random.default_rng(25)
    verdicts = [checker.pmp_probe(cir_model(-0.5), SetOracle.orthant(1), phi, n_samples=50, rng=rng)['verdict']
                for phi in _concave_tests(10, rng)]
    assert verdicts == [FAIL] * 10


def test_pmp_probe_skips_negative_maximum(checker):
    probe = checker.pmp_probe(cir_model(0.3), SetOracle.orthant(1), lambda y: -1.0 - y[0] ** 2,
                              n_samples=20, rng=np.random.default_rng(26))
    assert not probe['probed']
    assert probe['verdict'] == PASS


def _circle_manifold():
    chart = ExpressionParser().parse_vector(['cos(x1)', 'sin(x1)'], 1)
    return ParametrizedManifold(chart, 1, 2)


def test_manifold_check_on_circle(checker):
    result = checker.manifold_check(circle_model(), _circle_manifold(), [[t] for t in np.linspace(0.1, 6.0, 12)])
    assert result['verdict'] == PASS
    assert all(point['sigma_tangent'] and point['drift_tangent'] for point in result['points'])


def test_manifold_check_without_inward_drift_fails(checker):
    result = checker.manifold_check(circle_model(drift=('0', '0')), _circle_manifold(), [[0.5], [2.0]])
    assert result['verdict'] == FAIL
    assert not any(point['drift_tangent'] for point in result['points'])


def test_circle_check_set_passes(checker):
    report = checker.check_set(circle_model(), SetOracle.sphere([0.0, 0.0], 1.0), points=circle_points(16))
    assert report.verdict == PASS
    assert report.diagnostics['rank_profile'] == {'1': 16}


def test_linear_growth_audit():
    checker = InvarianceChecker()
    model = orthant_diag_model([0.2, 0.1], [1.0, 0.5])
    audit = checker.linear_growth_audit(model, [[0.0, 0.0], [1.0, 2.0], [3.0, 0.0]])
    assert audit['n_points'] == 3
    assert audit['constant'] >= np.sqrt(0.05)
    assert audit['worst_point'] is not None


def test_aggregate_verdict_order():
    assert aggregate_verdict([]) == PASS
    assert aggregate_verdict([PASS, INCONCLUSIVE]) == INCONCLUSIVE
    assert aggregate_verdict([INCONCLUSIVE, FAIL, PASS]) == FAIL


def test_reports_are_json_ready():
    point = PointVerdict(index=0, x=np.array([0.0, 1.0]), drift_values=[np.float64(0.5)],
                         verdict=FAIL, dispersion_norm=np.nan)
    data = point.to_dict()
    assert data['x'] == [0.0, 1.0]
    assert data['dispersion_norm'] is None
    assert to_jsonable({'flag': np.bool_(True), 'n': np.int64(3)}) == {'flag': True, 'n': 3}

    report = CheckReport({'name': 'm'}, {'kind': 'orthant'}, [point])
    frame = report.to_frame()
    assert list(frame['verdict']) == [FAIL]
    assert frame.loc[0, 'max_drift_value'] == 0.5


def test_model_spec_validation():
    with pytest.raises(ModelSpecError):
        build_builtin('heston')
    with pytest.raises(ModelSpecError):
        build_builtin('cir', kappa=1.0)
    with pytest.raises(ModelSpecError):
        ModelSpec(2, constant_vector([0.0], 2), sigma_field=constant_matrix(np.eye(2), 2))
    with pytest.raises(ModelSpecError):
        ModelSpec(1, constant_vector([0.0], 1), sigma_field=constant_matrix([[1.0]], 1), q_eigs=[-1.0])
