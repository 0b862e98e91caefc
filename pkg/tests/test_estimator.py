import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import Pipeline
from sklearn.preprocessing import StandardScaler

from conftest import knee_matrix
from lowrank_gemm import LowRankApproximator, SpectrumSpec, synth_matrix


@pytest.fixture
def X():
    return np.asarray(knee_matrix(64, seed=5).data)


class TestSklearnProtocol:
    def test_get_set_params_roundtrip(self):
        est = LowRankApproximator(energy=0.95, method="randomized", random_state=3)
        params = est.get_params()
        assert params["energy"] == 0.95
        rebuilt = LowRankApproximator().set_params(**params)
        assert rebuilt.get_params() == params

    def test_clone(self):
        est = LowRankApproximator(rank=3)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_not_fitted_error(self, X):
        with pytest.raises(NotFittedError):
            LowRankApproximator().transform(X)

    def test_pipeline_integration(self, X):
        pipe = Pipeline([("scale", StandardScaler(with_mean=False)), ("lr", LowRankApproximator(rank=4))])
        reduced = pipe.fit_transform(X)
        assert reduced.shape == (64, 4)


class TestFit:
    def test_default_policy_is_99_percent_energy(self, X):
        est = LowRankApproximator().fit(X)
        assert est.rank_ == 4  # knee plateau of a 64-point spectrum
        assert est.components_.shape == (4, 64)
        assert est.singular_values_.shape == (4,)
        assert est.n_features_in_ == 64

    def test_fixed_rank(self, X):
        est = LowRankApproximator(rank=2).fit(X)
        assert est.rank_ == 2

    def test_max_error_policy(self, X):
        est = LowRankApproximator(max_error=0.001).fit(X)
        recon = est.reconstruction()
        rel = np.linalg.norm(recon - X) / np.linalg.norm(X)
        assert rel <= 0.001

    def test_memory_budget_policy(self, X):
        est = LowRankApproximator(memory_budget_bytes=(64 + 64 + 1) * 8 * 3, bytes_per_element=8)
        assert est.fit(X).rank_ == 3

    def test_knobs_are_mutually_exclusive(self, X):
        with pytest.raises(ValueError, match="mutually exclusive"):
            LowRankApproximator(rank=2, energy=0.9).fit(X)

    def test_bad_rank_rejected(self, X):
        with pytest.raises(ValueError):
            LowRankApproximator(rank=0).fit(X)

    def test_randomized_method_deterministic(self, X):
        a = LowRankApproximator(rank=4, method="randomized", random_state=9).fit(X)
        b = LowRankApproximator(rank=4, method="randomized", random_state=9).fit(X)
        assert np.array_equal(a.components_, b.components_)


class TestTransform:
    def test_transform_projects_onto_components(self, X):
        est = LowRankApproximator(rank=4).fit(X)
        assert np.allclose(est.transform(X), X @ est.components_.T)

    def test_fit_transform_matches_scaled_left_factors(self, X):
        est = LowRankApproximator(rank=4)
        reduced = est.fit_transform(X)
        expected = np.asarray(est.factors_.u.data) * est.singular_values_
        assert np.allclose(reduced, expected, atol=1e-10)

    def test_inverse_transform_reconstructs(self, X):
        est = LowRankApproximator(rank=8).fit(X)
        roundtrip = est.inverse_transform(est.transform(X))
        assert np.allclose(roundtrip, est.reconstruction(), atol=1e-10)

    def test_feature_count_checked(self, X):
        est = LowRankApproximator(rank=2).fit(X)
        with pytest.raises(ValueError, match="features"):
            est.transform(X[:, :10])

    def test_new_data_projection(self, X):
        est = LowRankApproximator(rank=4).fit(X)
        other = np.asarray(synth_matrix(SpectrumSpec(10, 64, (1.0,), seed=1)).data)
        assert est.transform(other).shape == (10, 4)


class TestReconstruction:
    def test_energy_policy_error_bound(self, X):
        est = LowRankApproximator(energy=0.99).fit(X)
        rel = np.linalg.norm(est.reconstruction() - X) / np.linalg.norm(X)
        assert rel <= np.sqrt(1 - 0.99)
