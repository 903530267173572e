import numpy as np
import pytest

from plhomog import coeffs
from plhomog.coeffs import (AssumptionViolated, Coefficient,
                            constant_coefficient, cosine_coefficient,
                            evaluate, exponential_defect, gaussian_defect,
                            laminate_coefficient, read_tabulated,
                            tabulated_coefficient, validate, write_tabulated)


def paper_coefficient():
    return Coefficient(cosine_coefficient(2.0, 1.0, lam=14.0),
                       exponential_defect(10.0, 1.0), 3.0)


class TestEvaluate:
    def test_constant_without_defect(self):
        c = Coefficient(constant_coefficient(2.0, lam=3.0), None, 3.0)
        assert evaluate(c, 0.3) == pytest.approx(2.0, abs=0)

    def test_paper_coefficient_at_origin(self):
        assert evaluate(paper_coefficient(), 0.0) == pytest.approx(13.0, rel=1e-14)

    def test_paper_coefficient_at_half(self):
        expected = 1.0 + 10.0 * np.exp(-0.5)
        assert evaluate(paper_coefficient(), 0.5) == pytest.approx(expected, rel=1e-14)

    def test_vectorized(self):
        c = paper_coefficient()
        ys = np.linspace(-2, 2, 101)
        vals = evaluate(c, ys)
        assert vals.shape == ys.shape
        assert np.all(vals > 0)


class TestValidate:
    def test_constant_passes(self):
        c = Coefficient(constant_coefficient(2.0, lam=3.0), None, 3.0)
        report = validate(c)
        assert report.passed
        assert report.a_min == report.a_max == pytest.approx(2.0)

    def test_constant_violates_tight_bound(self):
        c = Coefficient(constant_coefficient(2.0, lam=1.5), None, 3.0)
        with pytest.raises(AssumptionViolated):
            validate(c)

    def test_paper_coefficient_with_lam_14(self):
        report = validate(paper_coefficient(), grid_resolution=10_001)
        assert report.passed
        assert report.a_max <= 13.0 + 1e-9
        assert report.a_max == pytest.approx(13.0, rel=1e-4)

    def test_all_grid_values_inside_bounds(self):
        c = paper_coefficient()
        report = validate(c, grid_resolution=2048)
        lam = c.periodic.lam
        assert 1.0 / lam < report.a_min and report.a_max < lam
        assert 1.0 / lam < report.per_min and report.per_max < lam

    def test_periodicity_residual_tiny_for_analytic_coefficient(self):
        report = validate(paper_coefficient())
        assert report.periodicity_residual <= 1e-12

    def test_nonperiodic_evaluator_flagged(self):
        bad = coeffs.PeriodicCoefficient(lambda y: 2.0 + 0.1 * np.asarray(y),
                                         lam=5.0, lipschitz=0.1)
        report = validate(Coefficient(bad, None, 3.0))
        assert not report.passed
        assert any("periodicity" in v for v in report.violations)

    def test_defect_tail_nonincreasing(self):
        report = validate(paper_coefficient())
        sups = [v for _, v in report.defect_tail]
        assert all(b <= a + 1e-14 for a, b in zip(sups, sups[1:]))

    def test_lp_tail_increments_converge(self):
        report = validate(paper_coefficient())
        incs = report.lp_tail_increments
        assert incs[-1] < incs[0]
        assert incs[-1] < 1e-6

    def test_resolution_too_small(self):
        with pytest.raises(ValueError):
            validate(paper_coefficient(), grid_resolution=1)


class TestTypes:
    def test_p_below_two_rejected(self):
        with pytest.raises(ValueError):
            Coefficient(constant_coefficient(2.0, lam=3.0), None, 1.5)

    def test_nonpositive_lam_rejected(self):
        with pytest.raises(ValueError):
            constant_coefficient(2.0, lam=0.0)

    def test_defect_needs_positive_radius(self):
        with pytest.raises(ValueError):
            coeffs.DefectCoefficient(lambda y: np.zeros_like(y), decay_radius=0.0)

    def test_without_defect(self):
        c = paper_coefficient()
        bare = c.without_defect()
        assert bare.defect is None
        assert evaluate(bare, 0.0) == pytest.approx(3.0)

    def test_conjugate_exponent(self):
        assert paper_coefficient().p_conj == pytest.approx(1.5)


class TestCatalog:
    def test_gaussian_defect_decays(self):
        d = gaussian_defect(5.0, 2.0)
        assert d(0.0) == pytest.approx(5.0)
        assert d(3.0) < 1e-6

    def test_laminate_depends_on_first_axis_only(self):
        lam = laminate_coefficient(2.0, 1.0, lam=14.0, dim=2)
        pts = np.array([[0.2, 0.0], [0.2, 0.37], [0.2, -0.4]])
        vals = lam(pts)
        assert np.allclose(vals, vals[0])

    def test_exponential_defect_2d_radial(self):
        d = exponential_defect(10.0, 1.0, dim=2)
        assert d(np.array([3.0, 4.0])) == pytest.approx(10.0 * np.exp(-5.0))


class TestTabulated:
    def test_interpolation_hits_nodes(self):
        n = 8
        nodes = -0.5 + np.arange(n) / n
        values = 2.0 + np.sin(2 * np.pi * nodes)
        tab = tabulated_coefficient(values, lam=5.0)
        assert np.allclose(tab(nodes), values)

    def test_periodic_wrap(self):
        values = np.array([1.0, 2.0, 3.0, 2.0])
        tab = tabulated_coefficient(values, lam=5.0)
        ys = np.array([-0.3, 0.1])
        assert np.allclose(tab(ys + 1.0), tab(ys))
        assert np.allclose(tab(ys - 2.0), tab(ys))

    def test_file_round_trip(self, tmp_path):
        values = 2.0 + 0.5 * np.cos(2 * np.pi * (-0.5 + np.arange(16) / 16))
        path = tmp_path / "grid.txt"
        write_tabulated(path, values)
        tab = read_tabulated(path, lam=5.0)
        ys = np.linspace(-0.5, 0.5, 33)
        direct = tabulated_coefficient(values, lam=5.0)
        assert np.allclose(tab(ys), direct(ys))

    def test_2d_bilinear(self):
        n = 4
        values = np.arange(n * n, dtype=float).reshape(n, n) + 1.0
        tab = tabulated_coefficient(values, lam=100.0)
        nodes = -0.5 + np.arange(n) / n
        for i in range(n):
            for j in range(n):
                assert tab(np.array([nodes[i], nodes[j]])) == pytest.approx(values[i, j])
