import numpy as np
import pytest

from lagrange import (
    DesignSpec,
    DesignWarning,
    InfeasibleRootsError,
    OperatorParams,
    PolyCoeffs,
    RootSet,
    char_poly_first_order,
    char_poly_second_order,
    design_roots,
    params_from_roots_first_order,
    params_from_roots_second_order,
    poly_from_params,
    poly_roots,
    routh_hurwitz,
)


class TestCharPolyFirstOrder:
    def test_reference_values(self):
        assert char_poly_first_order(5, 1, 1).coeffs == pytest.approx((4.0, 5.0))

    def test_double_root_case(self):
        assert char_poly_first_order(2, 1, 1).coeffs == pytest.approx((1.0, 2.0))

    def test_zero_alpha0(self):
        assert char_poly_first_order(7.3, 0, 1).coeffs[0] == 0.0

    def test_rejects_zero_alpha1(self):
        with pytest.raises(ValueError):
            char_poly_first_order(5, 1, 0)


class TestCharPolySecondOrder:
    def test_reference_values(self):
        poly = char_poly_second_order(4, 0.8, 1.6, 0.8)
        assert poly.coeffs == pytest.approx((9.0, 24.0, 22.0, 8.0))

    def test_b3_always_twice_theta(self, rng):
        for _ in range(50):
            theta = rng.uniform(0.2, 10)
            a = rng.uniform(-2, 2, size=3)
            if abs(a[2]) < 1e-3:
                continue
            poly = char_poly_second_order(theta, *a)
            assert poly.coeffs[3] == pytest.approx(2 * theta)

    def test_complex_solution_row(self):
        # parameter row known to give two real plus one conjugate pair
        poly = char_poly_second_order(1, 1, 3, 2.25)
        assert poly.coeffs[3] == pytest.approx(2.0)

    def test_b1_relation_identity(self, rng):
        # b1 = b3*b2/2 - b3^3/8 holds for every parameterized polynomial
        for _ in range(100):
            theta = rng.uniform(0.2, 10)
            a = rng.uniform(-2, 2, size=3)
            if abs(a[2]) < 1e-3:
                continue
            b0, b1, b2, b3 = char_poly_second_order(theta, *a).coeffs
            assert b1 == pytest.approx(b3 * b2 / 2 - b3**3 / 8, rel=1e-8, abs=1e-8)

    def test_rejects_zero_alpha2(self):
        with pytest.raises(ValueError):
            char_poly_second_order(4, 1, 1, 0)


class TestRouthHurwitz:
    def test_stable_quartic_margins(self):
        report = routh_hurwitz(PolyCoeffs((9, 24, 22, 8)))
        assert report.stable
        # b3*b2 - b1 = 176 - 24; b3*b2*b1 - b1^2 - b3^2*b0 = 4224 - 1152
        assert report.margin("b3*b2 > b1") == pytest.approx(152.0)
        assert report.margin("b3*b2*b1 > b1^2 + b3^2*b0") == pytest.approx(3072.0)

    def test_unstable_quartic(self):
        report = routh_hurwitz(PolyCoeffs((100, 24, 22, 8)))
        assert not report.stable
        assert report.margin("b3*b2*b1 > b1^2 + b3^2*b0") == pytest.approx(4224 - 576 - 6400)

    def test_first_order_stability_matches_theta_rule(self):
        # theta=5 > alpha0/alpha1=1 so stable
        assert routh_hurwitz(char_poly_first_order(5, 1, 1)).stable
        # theta=0.5 < alpha0/alpha1=1 gives a negative constant coefficient
        assert not routh_hurwitz(char_poly_first_order(0.5, 1, 1)).stable

    def test_unsupported_degree(self):
        with pytest.raises(ValueError, match="degree"):
            routh_hurwitz(PolyCoeffs((1.0, 2.0, 3.0)))

    def test_report_structure(self):
        report = routh_hurwitz(PolyCoeffs((9, 24, 22, 8)))
        assert report.stable == all(c.satisfied for c in report.conditions)
        assert len(report.conditions) == 6

    def test_verdict_matches_root_signs(self, rng):
        # cross-validation: stability verdict == all roots in the left half-plane
        checked = 0
        for trial in range(200):
            if trial % 2 == 0:
                theta = rng.uniform(0.2, 8)
                a = rng.uniform(-2, 2, size=2)
                if abs(a[1]) < 1e-2:
                    continue
                poly = char_poly_first_order(theta, *a)
            else:
                theta = rng.uniform(0.2, 8)
                a = rng.uniform(-2, 2, size=3)
                if abs(a[2]) < 1e-2:
                    continue
                poly = char_poly_second_order(theta, *a)
            report = routh_hurwitz(poly)
            if any(abs(c.margin) < 1e-9 for c in report.conditions):
                continue
            roots = poly_roots(poly)
            assert report.stable == (roots.max_real_part() < 0), poly.coeffs
            checked += 1
        assert checked > 150


class TestPolyRoots:
    def test_simple_quadratic(self):
        roots = poly_roots(PolyCoeffs((4, 5)))
        values = sorted(v.real for v, _ in roots.roots)
        assert values == pytest.approx([-4.0, -1.0])

    def test_perfect_square(self):
        roots = poly_roots(PolyCoeffs((1, 2)))
        assert roots.roots[0][1] == 2
        assert roots.roots[0][0] == pytest.approx(-1.0)

    def test_double_double_quartic(self):
        roots = poly_roots(PolyCoeffs((9, 24, 22, 8)))
        got = sorted(((v.real, m) for v, m in roots.roots))
        assert got[0][1] == 2 and got[0][0] == pytest.approx(-3.0, abs=1e-9)
        assert got[1][1] == 2 and got[1][0] == pytest.approx(-1.0, abs=1e-9)

    def test_conjugate_pair(self):
        roots = poly_roots(PolyCoeffs((1.01, 0.2)))
        values = sorted((v for v, _ in roots.roots), key=lambda z: z.imag)
        assert values[0] == pytest.approx(-0.1 - 1j)
        assert values[1] == pytest.approx(-0.1 + 1j)
        assert values[0] == values[1].conjugate()

    def test_residuals_small(self, rng):
        for _ in range(50):
            coeffs = rng.uniform(-3, 3, size=int(rng.integers(2, 6)))
            poly = PolyCoeffs(tuple(coeffs))
            roots = poly_roots(poly)
            assert roots.n == poly.degree
            norm = np.linalg.norm(poly.full())
            for v, _ in roots.roots:
                assert abs(poly(v)) < 1e-8 * norm


class TestFirstOrderInversion:
    def test_reference(self):
        theta, nus = params_from_roots_first_order(-1.0, -4.0)
        assert theta == pytest.approx(5.0)
        assert nus == pytest.approx((1.0, 4.0))

    def test_symmetric_case(self):
        theta, nus = params_from_roots_first_order(-3.0, -3.0)
        assert theta == pytest.approx(6.0)
        assert nus == pytest.approx((3.0, 3.0))

    def test_roundtrip_through_poly(self):
        poly = char_poly_first_order(5, 1, 1)
        values = sorted((v.real for v, _ in poly_roots(poly).roots))
        theta, nus = params_from_roots_first_order(*values)
        assert theta == pytest.approx(5.0, abs=1e-9)
        assert min(nus) == pytest.approx(1.0, abs=1e-9)  # recovers alpha0/alpha1

    def test_rejects_complex(self):
        with pytest.raises(ValueError, match="real"):
            params_from_roots_first_order(-0.1 + 1j, -0.1 - 1j)

    def test_rejects_positive(self):
        with pytest.raises(ValueError, match="negative"):
            params_from_roots_first_order(-1.0, 0.5)


class TestSecondOrderInversion:
    def test_reference_quartet(self):
        roots = poly_roots(PolyCoeffs((9, 24, 22, 8)))
        result = params_from_roots_second_order(roots)
        assert result.theta == pytest.approx(4.0, abs=1e-9)
        branch = min(result.branches, key=lambda b: b[1])
        nu0, nu1, alpha1 = branch
        # recovers alpha0/alpha2 = 1 and alpha1/alpha2 = 2 from (0.8, 1.6, 0.8)
        assert nu0 == pytest.approx(1.0, abs=1e-6)
        assert nu1 == pytest.approx(2.0, abs=1e-6)
        assert alpha1 == pytest.approx(2.0, abs=1e-6)

    def test_theta_from_multiplicity_weighted_sum(self):
        roots = RootSet(((-1.0, 2), (-3.0, 2)))
        assert params_from_roots_second_order(roots).theta == pytest.approx(4.0)

    def test_feasible_distinct_quartet(self):
        # {-1,-2,-3,-4}: b = (24, 50, 35, 10) satisfies the coefficient relation
        roots = RootSet(((-1.0, 1), (-2.0, 1), (-3.0, 1), (-4.0, 1)))
        result = params_from_roots_second_order(roots)
        assert result.theta == pytest.approx(5.0)
        assert result.branches

    def test_infeasible_quartet(self):
        # {-1,-2,-3,-5}: b = (30, 61, 41, 11) violates b1 = b3*b2/2 - b3^3/8
        roots = RootSet(((-1.0, 1), (-2.0, 1), (-3.0, 1), (-5.0, 1)))
        with pytest.raises(InfeasibleRootsError, match="relation"):
            params_from_roots_second_order(roots)

    def test_wrong_degree(self):
        with pytest.raises(ValueError, match="degree-4"):
            params_from_roots_second_order(RootSet(((-1.0, 1), (-4.0, 1))))

    def test_roundtrip_random_parameters(self, rng):
        # any (theta, a0, a1, 1) must reappear among the recovered branches
        found = 0
        for _ in range(40):
            theta = rng.uniform(0.5, 6)
            a0 = rng.uniform(0.1, 3)
            a1 = rng.uniform(0.1, 3)
            poly = char_poly_second_order(theta, a0, a1, 1.0)
            try:
                roots = poly_roots(poly)
                result = params_from_roots_second_order(roots)
            except InfeasibleRootsError:
                # branches with nu0 <= 0 or complex nu1 only; skip
                continue
            assert result.theta == pytest.approx(theta, rel=1e-6)
            if any(
                abs(n0 - a0) < 1e-6 * max(1, a0) and abs(n1 - a1) < 1e-6 * max(1, a1)
                for n0, n1, _ in result.branches
            ):
                found += 1
        assert found >= 30


class TestDesignRoots:
    def test_reference_design(self):
        roots = design_roots(DesignSpec(1e8), 1.0)
        values = sorted(v.real for v, _ in roots.roots)
        assert values == pytest.approx([-0.75, -0.65, -0.6, -1e-8])

    def test_sum_balance(self):
        roots = design_roots(DesignSpec(1e8), 1.0)
        total = sum(v.real * m for v, m in roots.roots)
        assert abs(-total - 2.0) <= 1.1e-8

    def test_warns_when_memory_root_large(self):
        with pytest.warns(DesignWarning):
            design_roots(DesignSpec(1.0), 1.0)

    def test_no_warning_for_good_design(self, recwarn):
        design_roots(DesignSpec(1e8), 1.0)
        assert not [w for w in recwarn if issubclass(w.category, DesignWarning)]

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            DesignSpec(-1.0)
        with pytest.raises(ValueError):
            DesignSpec(1e8, (0.6, -0.65, 0.75))
        with pytest.raises(ValueError):
            design_roots(DesignSpec(1e8), 0.0)


class TestOperatorParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            OperatorParams(order=3, theta=1, alphas=(1, 1, 1, 1))
        with pytest.raises(ValueError):
            OperatorParams(order=1, theta=-1, alphas=(1, 1))
        with pytest.raises(ValueError):
            OperatorParams(order=1, theta=1, alphas=(1, 0))
        with pytest.raises(ValueError):
            OperatorParams(order=1, theta=1, alphas=(1, 1), gamma=2)
        with pytest.raises(ValueError):
            OperatorParams(order=1, theta=1, alphas=(1, 1, 1))

    def test_poly_dispatch(self):
        p1 = poly_from_params(OperatorParams(order=1, theta=5, alphas=(1, 1)))
        assert p1.degree == 2
        p2 = poly_from_params(OperatorParams(order=2, theta=4, alphas=(0.8, 1.6, 0.8)))
        assert p2.degree == 4
