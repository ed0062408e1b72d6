"""Tests for demand models, sampling, and CSV ingestion."""

import math

import numpy as np
import pytest

from stockbound import (
    DemandDataError,
    EmpiricalDemand,
    GaussianModel,
    WeibullModel,
    covariance_factor,
    load_demand_csv,
    model_from_dict,
    sample_correlated,
    validate_lead_time,
)


class TestGaussianModel:
    def test_univariate_accessors(self):
        m = GaussianModel.univariate(2.5)
        assert m.dim == 1
        assert m.covariance[0, 0] == 2.5
        assert m.mean[0] == 0.0

    def test_bivariate_accessors(self):
        m = GaussianModel.bivariate(1.0, 4.0, 0.5)
        assert m.dim == 2
        assert m.var_x == 1.0
        assert m.var_y == 4.0
        assert m.correlation == pytest.approx(0.5, abs=1e-15)
        # off-diagonal is rho * sigma_x * sigma_y exactly
        assert m.covariance[0, 1] == 0.5 * 1.0 * 2.0
        assert m.covariance[0, 1] == m.covariance[1, 0]

    def test_mean_vector_preserved(self):
        m = GaussianModel.bivariate(1.0, 1.0, 0.0, mean=(3.0, -1.0))
        assert m.mean.tolist() == [3.0, -1.0]

    def test_rejects_asymmetric_covariance(self):
        with pytest.raises(ValueError, match="symmetric"):
            GaussianModel([0.0, 0.0], [[1.0, 0.2], [0.3, 1.0]])

    def test_rejects_indefinite_covariance(self):
        with pytest.raises(ValueError, match="positive semidefinite"):
            GaussianModel([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])

    def test_rejects_correlation_outside_unit_interval(self):
        with pytest.raises(ValueError):
            GaussianModel.bivariate(1.0, 1.0, 1.2)

    def test_rejects_nonfinite_entries(self):
        with pytest.raises(ValueError):
            GaussianModel([0.0], [[math.nan]])

    def test_rejects_negative_variance(self):
        with pytest.raises(ValueError):
            GaussianModel.univariate(-1.0)

    def test_perfect_correlation_is_allowed(self):
        m = GaussianModel.bivariate(1.0, 1.0, 1.0)
        assert m.correlation == pytest.approx(1.0)

    def test_zero_variance_allowed_but_correlation_undefined(self):
        m = GaussianModel([0.0, 0.0], [[0.0, 0.0], [0.0, 1.0]])
        assert m.var_x == 0.0
        with pytest.raises(ValueError, match="zero-variance"):
            m.correlation

    def test_immutable(self):
        m = GaussianModel.univariate(1.0)
        with pytest.raises((ValueError, AttributeError)):
            m.covariance[0, 0] = 9.0


class TestWeibullModel:
    def test_moments(self):
        w = WeibullModel(2.0, 1.0)
        # Gamma(1.5) = sqrt(pi)/2
        assert w.mean == pytest.approx(math.sqrt(math.pi) / 2.0, rel=1e-14)
        assert w.variance == pytest.approx(1.0 - math.pi / 4.0, rel=1e-12)

    def test_scale_enters_linearly(self):
        assert WeibullModel(2.0, 3.0).mean == pytest.approx(3.0 * WeibullModel(2.0, 1.0).mean)

    @pytest.mark.parametrize("shape,scale", [(0.0, 1.0), (-1.0, 1.0), (2.0, 0.0), (2.0, -3.0)])
    def test_rejects_nonpositive_parameters(self, shape, scale):
        with pytest.raises(ValueError):
            WeibullModel(shape, scale)


class TestEmpiricalDemand:
    def test_row_sums_and_means(self):
        d = EmpiricalDemand([[1.0, 2.0], [3.0, 5.0]])
        assert d.n_replicates == 2
        assert d.n_periods == 2
        assert d.row_sums.tolist() == [3.0, 8.0]
        assert d.mean_per_period == pytest.approx(11.0 / 4.0)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            EmpiricalDemand([[1.0, math.inf]])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            EmpiricalDemand(np.empty((0, 3)))


class TestLeadTime:
    def test_accepts_positive_integers(self):
        assert validate_lead_time(1) == 1
        assert validate_lead_time(50) == 50

    @pytest.mark.parametrize("bad", [0, -3, 2.5, True])
    def test_rejects_invalid(self, bad):
        with pytest.raises((ValueError, TypeError)):
            validate_lead_time(bad)


class TestCovarianceFactor:
    def test_reconstructs_covariance(self, rng):
        for _ in range(20):
            q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
            lam = rng.uniform(0.0, 4.0, size=3)
            cov = (q * lam) @ q.T
            cov = 0.5 * (cov + cov.T)
            model = GaussianModel(np.zeros(3), cov)
            factor = covariance_factor(model)
            tol = 1e-10 * max(np.trace(cov), 1.0)
            assert np.abs(factor @ factor.T - cov).max() <= tol

    def test_handles_singular_covariance(self):
        m = GaussianModel.bivariate(1.0, 1.0, 1.0)
        factor = covariance_factor(m)
        assert np.abs(factor @ factor.T - m.covariance).max() <= 1e-10


class TestSampling:
    def test_shape(self):
        m = GaussianModel.bivariate(1.0, 1.0, 0.3)
        out = sample_correlated(m, 4, 7, seed=0)
        assert out.shape == (7, 4, 2)

    def test_deterministic_for_seed(self):
        m = GaussianModel.univariate(1.0)
        a = sample_correlated(m, 3, 100, seed=11)
        b = sample_correlated(m, 3, 100, seed=11)
        assert np.array_equal(a, b)
        c = sample_correlated(m, 3, 100, seed=12)
        assert not np.array_equal(a, c)

    def test_sample_mean_near_zero(self):
        m = GaussianModel.univariate(1.0)
        samples = sample_correlated(m, 1, 1_000_000, seed=42)
        assert abs(float(samples.mean())) < 4.0 / math.sqrt(1_000_000)

    def test_sample_correlation_matches_model(self):
        m = GaussianModel.bivariate(1.0, 1.0, 0.9)
        pairs = sample_correlated(m, 1, 1_000_000, seed=43)[:, 0, :]
        corr = float(np.corrcoef(pairs.T)[0, 1])
        assert abs(corr - 0.9) < 0.005

    def test_zero_covariance_returns_mean_exactly(self):
        m = GaussianModel(np.array([3.0, -1.0]), np.zeros((2, 2)))
        out = sample_correlated(m, 4, 10, seed=7)
        assert np.all(out == np.array([3.0, -1.0]))

    def test_requires_seed_and_count(self):
        m = GaussianModel.univariate(1.0)
        with pytest.raises(ValueError):
            sample_correlated(m, 1, 0, seed=1)
        with pytest.raises(ValueError):
            sample_correlated(m, 1, 10, seed=None)


class TestCsvIngestion:
    def test_rectangular_file(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1,2\n1,2\n1,2\n")
        d = load_demand_csv(path)
        assert d.n_replicates == 3
        assert d.n_periods == 2

    def test_empty_file(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("")
        with pytest.raises(DemandDataError, match="no demand rows"):
            load_demand_csv(path)

    def test_non_numeric_cell_names_position(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b\n")
        with pytest.raises(DemandDataError, match="row 1, column 1"):
            load_demand_csv(path)

    def test_ragged_rows_name_row(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1,2\n1,2,3\n")
        with pytest.raises(DemandDataError, match="row 2"):
            load_demand_csv(path)

    def test_header_skipped_on_request(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("p1,p2\n1,2\n")
        d = load_demand_csv(path, skip_header=True)
        assert d.n_replicates == 1

    def test_blank_lines_ignored(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1,2\n\n3,4\n")
        assert load_demand_csv(path).n_replicates == 2


class TestModelFromDict:
    def test_gaussian(self):
        m = model_from_dict({"type": "gaussian", "mu": [0.0, 0.0], "sigma": [[1.0, 0.9], [0.9, 1.0]]})
        assert isinstance(m, GaussianModel)
        assert m.correlation == pytest.approx(0.9)

    def test_weibull(self):
        m = model_from_dict({"type": "weibull", "shape": 2, "scale": 1})
        assert isinstance(m, WeibullModel)

    def test_empirical_resolves_relative_path(self, tmp_path):
        (tmp_path / "d.csv").write_text("1,2\n3,4\n")
        m = model_from_dict({"type": "empirical", "path": "d.csv"}, base_dir=tmp_path)
        assert isinstance(m, EmpiricalDemand)
        assert m.n_periods == 2

    def test_unknown_type(self):
        with pytest.raises(ValueError, match="unknown model type"):
            model_from_dict({"type": "poisson"})

    def test_missing_field(self):
        with pytest.raises(ValueError, match="missing"):
            model_from_dict({"type": "gaussian", "mu": [0.0]})
