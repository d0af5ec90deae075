#!/usr/bin/env python3
"""
InvarLab - Walkthrough Demo
Boundary checks, generator probes, a manifold example, path simulation and the property suites
"""

import numpy as np


def demo_banner():
    """Display demo banner"""
    print("=" * 80)
    print("🔬 InvarLab - Walkthrough Demo")
    print("=" * 80)
    print("Features demonstrated:")
    print("📐 Kernel and corrected-drift conditions at boundary points")
    print("📈 Maximum-principle probes with concave test functions")
    print("⭕ Invariance of a circle for a rotation-noise diffusion")
    print("🎲 Monte Carlo paths and ODE viability")
    print("🧮 Operator and cone property suites")
    print("=" * 80)
    print()


def demo_cir_sweep():
    """Square-root diffusion on the half-line for several inflow rates"""
    print("📐 DEMO: Square-root diffusion at the boundary")
    print("-" * 40)

    try:
        from invariance_checker import InvarianceChecker, cir_model
        from set_geometry import SetOracle

        checker = InvarianceChecker()
        half_line = SetOracle.orthant(1)
        for a in [-0.5, 0.0, 0.3, 1.0]:
            verdict = checker.check_point(cir_model(a), half_line, [0.0])
            mark = '✅' if verdict.verdict == 'pass' else '❌'
            print(f"   {mark} a = {a:+.1f}: <u, a_C(0)> = {verdict.drift_values[0]:+.3f} -> {verdict.verdict}")
        return True

    except Exception as e:
        print(f"❌ Boundary demo failed: {e}")
        return False


def demo_generator_probe():
    """Concave test functions maximised on the boundary"""
    print("\n📈 DEMO: Maximum-principle probe")
    print("-" * 40)

    try:
        from invariance_checker import InvarianceChecker, cir_model
        from set_geometry import SetOracle

        checker = InvarianceChecker()
        phi = lambda y: 1.0 - ((y[0] + 0.5) ** 2 - 0.25)
        for a in [0.3, -0.5]:
            probe = checker.pmp_probe(cir_model(a), SetOracle.orthant(1), phi, n_samples=50,
                                      rng=np.random.default_rng(1))
            print(f"   a = {a:+.1f}: max at {probe['x_hat']}, L phi = {probe['generator_value']:+.3f} "
                  f"-> {probe['verdict']}")
        return True

    except Exception as e:
        print(f"❌ Probe demo failed: {e}")
        return False


def demo_circle():
    """Rotation noise with inward drift keeps the unit circle"""
    print("\n⭕ DEMO: Circle manifold")
    print("-" * 40)

    try:
        from field_expressions import ExpressionParser
        from invariance_checker import InvarianceChecker, ModelSpec
        from set_geometry import ParametrizedManifold

        parser = ExpressionParser()
        model = ModelSpec(
            2, parser.parse_vector(['-0.5*x1', '-0.5*x2'], 2),
            sigma_field=parser.parse_matrix([['x2^2', '-x1*x2'], ['-x1*x2', 'x1^2']], 2),
        )
        circle = ParametrizedManifold(parser.parse_vector(['cos(x1)', 'sin(x1)'], 1), 1, 2)
        result = InvarianceChecker().manifold_check(model, circle, [[t] for t in np.linspace(0.0, 6.0, 7)])
        print(f"   Verdict over {len(result['points'])} chart points: {result['verdict']}")
        return True

    except Exception as e:
        print(f"❌ Circle demo failed: {e}")
        return False


def demo_paths():
    """Euler paths and an RK4 trajectory"""
    print("\n🎲 DEMO: Paths and viability")
    print("-" * 40)

    try:
        from invariance_checker import InvarianceChecker, orthant_diag_model
        from path_simulator import PathSimulator, SimConfig
        from set_geometry import SetOracle

        model = orthant_diag_model([0.2, 0.1], [1.0, 0.5])
        quadrant = SetOracle.orthant(2)
        simulator = PathSimulator()
        ensemble = simulator.simulate(model, [0.5, 0.5], SimConfig(h=0.01, horizon=1.0, n_paths=200))
        stats = simulator.invariance_stats(ensemble, quadrant)
        print(f"   Exceed frequency: {stats['exceed_frequency']:.3f}, "
              f"median max distance: {stats['median_max_distance']:.2e}")

        checker = InvarianceChecker()
        trajectory = simulator.ode_viability(lambda y: checker.corrected_drift_vector(model, y),
                                             quadrant, [0.5, 0.5], h=0.01, horizon=2.0)
        print(f"   Corrected-drift ODE max distance: {trajectory['max_distance']:.2e}")
        return True

    except Exception as e:
        print(f"❌ Path demo failed: {e}")
        return False


def demo_property_suites():
    """Short run of every property suite"""
    print("\n🧮 DEMO: Property suites")
    print("-" * 40)

    try:
        from run_orchestrator import OpsVerifier

        report = OpsVerifier(trials=20).run()
        for name, suite in report['suites'].items():
            mark = '✅' if suite['verdict'] == 'pass' else '❌'
            print(f"   {mark} {name}: worst residual {suite['worst_residual']:.2e}")
        return report['verdict'] == 'pass'

    except Exception as e:
        print(f"❌ Property suite demo failed: {e}")
        return False


def run_complete_demo():
    """Run all demo sections"""
    demo_banner()
    results = [demo_cir_sweep(), demo_generator_probe(), demo_circle(), demo_paths(), demo_property_suites()]

    print("\n" + "=" * 80)
    print(f"🎯 {sum(results)}/{len(results)} demo sections completed")
    print("=" * 80)
    return all(results)


if __name__ == "__main__":
    run_complete_demo()
