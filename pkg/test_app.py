#!/usr/bin/env python3
"""
InvarLab - Application Test Suite
End-to-end checks of the command-line surface, exit codes and report files
"""

import json
import sys
import tempfile
from pathlib import Path

import pytest

from app import main
from run_orchestrator import EXIT_CONFIG_ERROR, ConfigError, OpsVerifier, RunConfig

CONFIG_DIR = Path(__file__).parent / 'configs'

SMALL_ORTHANT = {
    'name': 'small_orthant',
    'seed': 7,
    'model': {'builtin': 'orthant_diag', 'params': {'drift': [0.2, 0.1], 'scales': [1.0, 0.5]}},
    'set': {'kind': 'orthant', 'dim': 2},
    'checks': [
        {'name': 'check_set', 'n_points': 10, 'growth_audit': True},
        {'name': 'series_equality', 'n_points': 4},
        {'name': 'simulate', 'x0': [0.5, 0.5], 'h': 0.01, 'horizon': 0.5, 'n_paths': 64, 'chunk_size': 8},
        {'name': 'ode_viability', 'field': 'corrected_drift', 'x0': [0.5, 0.5], 'h': 0.01, 'horizon': 1.0},
    ],
}


def write_config(directory, raw, name='run.json'):
    path = Path(directory) / name
    path.write_text(json.dumps(raw), encoding='utf-8')
    return str(path)


def test_imports():
    """All modules import and expose their main classes"""
    print("🧪 Testing module imports...")
    from operator_toolkit import OperatorToolkit
    from field_expressions import ExpressionParser
    from set_geometry import SetOracle, ConeAnalyzer
    from invariance_checker import InvarianceChecker
    from path_simulator import PathSimulator
    for cls in (OperatorToolkit, ExpressionParser, SetOracle, ConeAnalyzer, InvarianceChecker, PathSimulator):
        assert callable(cls)
    print("✅ All modules imported")


def test_invariant_config_exits_zero(tmp_path):
    print("\n🔬 Testing an invariant configuration...")
    config = write_config(tmp_path, SMALL_ORTHANT)
    out = tmp_path / 'report.json'
    assert main(['check', '--config', config, '--out', str(out), '--quiet']) == 0
    report = json.loads(out.read_text(encoding='utf-8'))
    assert report['verdict'] == 'pass'
    assert report['seed'] == 7
    assert [check['name'] for check in report['checks']] == [c['name'] for c in SMALL_ORTHANT['checks']]
    assert 'wall_times' not in report
    print("✅ Invariant configuration passed")


def test_violating_config_exits_one(tmp_path):
    print("\n🔬 Testing the violating CIR configuration...")
    out = tmp_path / 'report.json'
    code = main(['check', '--config', str(CONFIG_DIR / 'cir_violating.json'), '--out', str(out), '--quiet'])
    assert code == 1
    report = json.loads(out.read_text(encoding='utf-8'))
    check_set = report['checks'][0]
    assert check_set['verdict'] == 'fail'
    assert check_set['offending_x'] == [[0.0]] * 4
    print("✅ Violation detected with exit code 1")


def test_reports_do_not_depend_on_threads(tmp_path):
    print("\n🔁 Testing thread independence of reports...")
    config = write_config(tmp_path, SMALL_ORTHANT)
    single, pooled = tmp_path / 'one.json', tmp_path / 'eight.json'
    assert main(['check', '--config', config, '--out', str(single), '--threads', '1', '--quiet']) == 0
    assert main(['check', '--config', config, '--out', str(pooled), '--threads', '8', '--quiet']) == 0
    assert single.read_bytes() == pooled.read_bytes()
    print("✅ Reports are byte-identical")


def test_cli_overrides_are_recorded(tmp_path):
    config = write_config(tmp_path, {**SMALL_ORTHANT, 'checks': [{'name': 'check_point', 'x': [0.0, 0.3]}],
                                     'tolerances': {'tol_ineq': 1e-6}})
    out = tmp_path / 'report.json'
    assert main(['check', '--config', config, '--out', str(out), '--tol-eq', '1e-7',
                 '--seed', '11', '--timings', '--quiet']) == 0
    report = json.loads(out.read_text(encoding='utf-8'))
    assert report['tolerances']['tol_eq'] == {'value': 1e-7, 'source': 'cli'}
    assert report['tolerances']['tol_ineq'] == {'value': 1e-6, 'source': 'config'}
    assert report['tolerances']['proj_tol']['source'] == 'default'
    assert report['seed'] == 11
    assert 'wall_times' in report


@pytest.mark.parametrize('raw', [
    {**SMALL_ORTHANT, 'checks': [{'name': 'warp_drive'}]},
    {**SMALL_ORTHANT, 'tolerances': {'tol_eq': -1.0}},
    {**SMALL_ORTHANT, 'tolerances': {'mystery_tol': 1.0}},
    {**SMALL_ORTHANT, 'set': {'kind': 'orthant', 'dim': 3}},
    {**SMALL_ORTHANT, 'model': {'dim': 1, 'drift': ['x1 +'], 'sigma': [['1']]}},
    {**SMALL_ORTHANT, 'seed': -4},
])
def test_config_errors_exit_64(tmp_path, raw):
    config = write_config(tmp_path, raw)
    assert main(['check', '--config', config, '--out', str(tmp_path / 'r.json'), '--quiet']) == EXIT_CONFIG_ERROR
    assert not (tmp_path / 'r.json').exists()


@pytest.mark.parametrize('check', [
    {'name': 'series_equality', 'n_points': [3]},
    {'name': 'check_point', 'x': [0.0, 0.3], 'second_order': {'v': [[0.0, 0.0], [0.0, 0.0]]}},
    {'name': 'check_set', 'points': 5},
    {'name': 'simulate', 'h': 0.01},
    {'name': 'double_integral', 't_list': [0.5, 0.5], 'n_paths': 10},
])
def test_malformed_check_parameters_exit_64(tmp_path, check):
    config = write_config(tmp_path, {**SMALL_ORTHANT, 'checks': [check]})
    assert main(['check', '--config', config, '--out', str(tmp_path / 'r.json'), '--quiet']) == EXIT_CONFIG_ERROR
    assert not (tmp_path / 'r.json').exists()


def test_malformed_check_error_names_the_check(tmp_path):
    from run_orchestrator import CheckRunner
    raw = {**SMALL_ORTHANT, 'checks': [{'name': 'check_point', 'x': [0.0, 0.3]},
                                       {'name': 'series_equality', 'n_points': [3]}]}
    runner = CheckRunner(RunConfig(raw))
    with pytest.raises(ConfigError) as info:
        runner.run()
    assert info.value.field == 'checks[1].series_equality'


def test_tangent_field_adds_curvature_values(tmp_path):
    raw = {**SMALL_ORTHANT, 'checks': [
        {'name': 'check_point', 'x': [0.0, 0.3], 'tangent_field': 'sigma'},
        {'name': 'check_set', 'n_points': 4, 'tangent_field': 'sigma'},
    ]}
    out = tmp_path / 'report.json'
    assert main(['check', '--config', write_config(tmp_path, raw), '--out', str(out), '--quiet']) == 0
    report = json.loads(out.read_text(encoding='utf-8'))
    point = report['checks'][0]
    assert len(point['curvature_drift_values']) == len(point['drift_values'])
    assert all('curvature_drift_values' in p for p in report['checks'][1]['points'])


def test_unknown_tangent_field_exits_64(tmp_path):
    raw = {**SMALL_ORTHANT, 'checks': [{'name': 'check_point', 'x': [0.0, 0.3], 'tangent_field': 'drift'}]}
    assert main(['check', '--config', write_config(tmp_path, raw), '--quiet']) == EXIT_CONFIG_ERROR


def test_unreadable_config_exits_64(tmp_path):
    broken = tmp_path / 'broken.json'
    broken.write_text('{"name": ', encoding='utf-8')
    assert main(['check', '--config', str(broken), '--quiet']) == EXIT_CONFIG_ERROR
    assert main(['check', '--config', str(tmp_path / 'missing.json'), '--quiet']) == EXIT_CONFIG_ERROR


def test_usage_errors_exit_64():
    assert main(['check']) == EXIT_CONFIG_ERROR
    assert main(['frobnicate']) == EXIT_CONFIG_ERROR
    assert main(['--help']) == 0


def test_inconclusive_check_keeps_running(tmp_path):
    raw = {**SMALL_ORTHANT, 'checks': [
        {'name': 'check_point', 'x': [-1.0, 0.0]},
        {'name': 'check_point', 'x': [0.0, 0.4]},
    ]}
    out = tmp_path / 'report.json'
    assert main(['check', '--config', write_config(tmp_path, raw), '--out', str(out), '--quiet']) == 2
    report = json.loads(out.read_text(encoding='utf-8'))
    assert report['checks'][0]['error'] is True
    assert report['checks'][0]['verdict'] == 'inconclusive'
    assert report['checks'][1]['verdict'] == 'pass'


def test_verify_ops_selected_suites(tmp_path):
    print("\n🧮 Testing verify-ops...")
    out = tmp_path / 'ops.json'
    assert main(['verify-ops', '--suite', 'penrose,cone_formulas', '--trials', '20',
                 '--out', str(out), '--quiet']) == 0
    report = json.loads(out.read_text(encoding='utf-8'))
    assert sorted(report['suites']) == ['cone_formulas', 'penrose']
    assert all(suite['violations'] == 0 for suite in report['suites'].values())
    print("✅ Property suites passed")


def test_verify_ops_catches_perturbation():
    assert main(['verify-ops', '--suite', 'penrose', '--trials', '10', '--perturb', 'penrose', '--quiet']) == 1
    assert main(['verify-ops', '--suite', 'penrose', '--trials', '10', '--perturb', 'series_identities',
                 '--quiet']) == 0


def test_verify_ops_rejects_bad_selection():
    assert main(['verify-ops', '--suite', '', '--quiet']) == EXIT_CONFIG_ERROR
    assert main(['verify-ops', '--suite', 'penrose,unicorns', '--quiet']) == EXIT_CONFIG_ERROR
    with pytest.raises(ConfigError):
        OpsVerifier(trials=5).run([])


def test_all_suites_pass():
    report = OpsVerifier(seed=3, trials=15).run()
    assert report['verdict'] == 'pass'
    assert set(report['suites']) == {'penrose', 'powers_stormer', 'eigenvalue_lipschitz',
                                     'cone_formulas', 'series_identities'}


def test_builtin_models_use_configured_rank_tol():
    tuned = RunConfig({**SMALL_ORTHANT, 'tolerances': {'rank_tol': 1e-6}})
    assert tuned.model.toolkit.rank_tol == 1e-6
    assert RunConfig(SMALL_ORTHANT).model.toolkit.rank_tol == 1e-10


@pytest.mark.parametrize('name', ['cir_invariant.json', 'cir_violating.json',
                                  'orthant_diag.json', 'circle_manifold.json'])
def test_bundled_configs_load(name):
    config = RunConfig.from_file(CONFIG_DIR / name)
    assert config.checks
    assert config.model.dim == config.oracle.dim


def run_all_tests():
    """Run the suite without pytest and print a summary"""
    print("🚀 InvarLab - Running Application Tests")
    print("=" * 50)

    results = {}
    with tempfile.TemporaryDirectory() as directory:
        tests = [
            ("Imports", test_imports),
            ("Invariant config", lambda: test_invariant_config_exits_zero(Path(directory))),
            ("Violating config", lambda: test_violating_config_exits_one(Path(directory))),
            ("Thread independence", lambda: test_reports_do_not_depend_on_threads(Path(directory))),
            ("Property suites", lambda: test_verify_ops_selected_suites(Path(directory))),
        ]
        for label, test in tests:
            try:
                test()
                results[label] = True
            except Exception as e:
                print(f"❌ {label} failed: {e}")
                results[label] = False

    print("\n" + "=" * 50)
    print("📊 Test Results Summary:")
    for label, passed in results.items():
        print(f"   {'✅' if passed else '❌'} {label}")

    passed = sum(results.values())
    print(f"\n🎯 {passed}/{len(results)} tests passed")
    return passed == len(results)


if __name__ == '__main__':
    success = run_all_tests()
    sys.exit(0 if success else 1)
