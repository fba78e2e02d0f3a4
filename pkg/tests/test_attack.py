import math

import numpy as np
import pytest

from kernrecon.attack import (
    AttackConfig,
    FileQueries,
    GridQueries,
    MixtureQueries,
    NormalQueries,
    QuerySet,
    ReconstructionParams,
    UniformBoxQueries,
    canonicalize,
    loss_gradients,
    match_to_truth,
    query_count_bound,
    reconstruction_loss,
    run_attack,
    run_attack_pca,
    sample_queries,
)
from kernrecon.kernels import (
    BandwidthGaussianKernel,
    LaplaceKernel,
    NtkKernel,
    PolynomialKernel,
    RbfKernel,
)
from kernrecon.models import Dataset, ModelOracle, train_krr


class TestQueryCountBound:
    def test_values(self):
        assert query_count_bound(10, 2) == 41
        assert query_count_bound(1, 1) == 4
        assert query_count_bound(25, 10) == 301

    def test_invalid(self):
        with pytest.raises(ValueError):
            query_count_bound(0, 3)


class TestSampleQueries:
    def test_grid_two_by_two(self):
        Z = sample_queries(GridQueries(-1.0, 1.0), 4, 2, 0)
        expected = {(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)}
        assert {tuple(row) for row in Z} == expected

    def test_grid_covers_box(self):
        Z = sample_queries(GridQueries(-6.0, 6.0), 2500, 2, 0)
        assert Z.shape == (2500, 2)
        assert Z.min() == -6.0 and Z.max() == 6.0
        assert len(np.unique(Z[:, 0])) == 50

    def test_grid_requires_2d(self):
        with pytest.raises(ValueError):
            sample_queries(GridQueries(), 4, 3, 0)

    def test_same_seed_same_matrix(self):
        for dist in (NormalQueries(2.0), UniformBoxQueries(-3.0, 3.0),
                     MixtureQueries(centers=((2.0, 2.0), (-2.0, -2.0)))):
            a = sample_queries(dist, 50, 2, 123)
            b = sample_queries(dist, 50, 2, 123)
            np.testing.assert_array_equal(a, b)

    def test_standard_normal_mean(self):
        m = 10_000
        Z = sample_queries(NormalQueries(1.0), m, 1, 42)
        assert abs(Z.mean()) < 4.0 / math.sqrt(m)

    def test_file_queries(self, tmp_path):
        from kernrecon.storage import write_matrix
        path = tmp_path / "queries.txt"
        rng = np.random.default_rng(0)
        Z = rng.normal(size=(30, 3))
        write_matrix(path, Z)
        out = sample_queries(FileQueries(str(path)), 20, 3, 0)
        np.testing.assert_array_equal(out, Z[:20])
        with pytest.raises(ValueError):
            sample_queries(FileQueries(str(path)), 31, 3, 0)


def tiny_instance(rng, spec, n=3, m=7, d=2, C=2, with_bandwidth=False):
    points = rng.normal(size=(n, d))
    coeffs = rng.normal(size=(n, C))
    Z = rng.normal(size=(m, d)) * 1.5
    targets = rng.normal(size=(m, C))
    log_h = np.log(rng.uniform(0.5, 1.5, size=d)) if with_bandwidth else None
    return ReconstructionParams(points, coeffs, log_h), QuerySet(Z, targets)


class TestLoss:
    def test_zero_when_params_equal_truth(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(4, 2))
        A = rng.normal(size=(4, 1))
        spec = LaplaceKernel(1.0)
        model_targets = None
        Z = rng.normal(size=(20, 2))
        from kernrecon.kernels import kernel_matrix
        model_targets = kernel_matrix(spec, Z, X) @ A
        params = ReconstructionParams(X, A)
        loss = reconstruction_loss(params, QuerySet(Z, model_targets), spec)
        assert loss == 0.0

    def test_zero_for_zero_everything(self):
        params = ReconstructionParams(np.zeros((2, 2)), np.zeros((2, 1)))
        qs = QuerySet(np.ones((3, 2)), np.zeros((3, 1)))
        assert reconstruction_loss(params, qs, RbfKernel(1.0)) == 0.0

    def test_single_query_squared_gap(self):
        # prediction 2, target 0 -> loss 4
        params = ReconstructionParams(np.array([[0.0]]), np.array([[2.0]]))
        qs = QuerySet(np.array([[0.0]]), np.array([[0.0]]))
        assert reconstruction_loss(params, qs, LaplaceKernel(1.0)) == 4.0

    def test_permutation_invariance_exact(self):
        rng = np.random.default_rng(1)
        params, qs = tiny_instance(rng, None, n=5, m=9, d=3, C=2)
        spec = RbfKernel(0.7)
        perm = rng.permutation(5)
        permuted = ReconstructionParams(params.points[perm],
                                        params.coeffs[perm])
        assert reconstruction_loss(params, qs, spec) == \
            reconstruction_loss(permuted, qs, spec)


GRAD_SPECS = [
    LaplaceKernel(gamma=0.8),
    RbfKernel(gamma=0.6),
    PolynomialKernel(c0=1.0, gamma=0.4, degree=3),
    NtkKernel(depth=2),
    BandwidthGaussianKernel(h_diag=(0.9, 1.2)),
]


class TestLossGradients:
    def test_zero_residual_zero_gradients(self):
        rng = np.random.default_rng(2)
        spec = RbfKernel(1.0)
        X = rng.normal(size=(3, 2))
        A = rng.normal(size=(3, 1))
        Z = rng.normal(size=(8, 2))
        from kernrecon.kernels import kernel_matrix
        targets = kernel_matrix(spec, Z, X) @ A
        g_points, g_coeffs, g_h = loss_gradients(
            ReconstructionParams(X, A), QuerySet(Z, targets), spec)
        np.testing.assert_allclose(g_points, 0.0, atol=1e-12)
        np.testing.assert_allclose(g_coeffs, 0.0, atol=1e-12)
        assert g_h is None

    @pytest.mark.parametrize("spec", GRAD_SPECS, ids=lambda s: repr(s))
    def test_matches_central_differences(self, spec):
        rng = np.random.default_rng(3)
        with_h = isinstance(spec, BandwidthGaussianKernel)
        params, qs = tiny_instance(rng, spec, n=3, m=7, d=2, C=2,
                                   with_bandwidth=with_h)
        g_points, g_coeffs, g_h = loss_gradients(params, qs, spec)

        step = 1e-5

        def loss_at(points=None, coeffs=None, log_h=None):
            p = ReconstructionParams(
                params.points if points is None else points,
                params.coeffs if coeffs is None else coeffs,
                params.log_bandwidth if log_h is None else log_h)
            return reconstruction_loss(p, qs, spec)

        fd_points = np.zeros_like(params.points)
        for idx in np.ndindex(*params.points.shape):
            hi = params.points.copy()
            lo = params.points.copy()
            hi[idx] += step
            lo[idx] -= step
            fd_points[idx] = (loss_at(points=hi) - loss_at(points=lo)) / (2 * step)
        rel = np.linalg.norm(g_points - fd_points) / \
            max(np.linalg.norm(fd_points), 1e-8)
        assert rel < 1e-5

        fd_coeffs = np.zeros_like(params.coeffs)
        for idx in np.ndindex(*params.coeffs.shape):
            hi = params.coeffs.copy()
            lo = params.coeffs.copy()
            hi[idx] += step
            lo[idx] -= step
            fd_coeffs[idx] = (loss_at(coeffs=hi) - loss_at(coeffs=lo)) / (2 * step)
        rel = np.linalg.norm(g_coeffs - fd_coeffs) / \
            max(np.linalg.norm(fd_coeffs), 1e-8)
        assert rel < 1e-5

        if with_h:
            fd_h = np.zeros_like(params.log_bandwidth)
            for i in range(fd_h.size):
                hi = params.log_bandwidth.copy()
                lo = params.log_bandwidth.copy()
                hi[i] += step
                lo[i] -= step
                fd_h[i] = (loss_at(log_h=hi) - loss_at(log_h=lo)) / (2 * step)
            rel = np.linalg.norm(g_h - fd_h) / max(np.linalg.norm(fd_h), 1e-8)
            assert rel < 1e-5

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(4)
        params, qs = tiny_instance(rng, None, n=4, m=6, d=2, C=1)
        spec = LaplaceKernel(1.0)
        g_points, g_coeffs, _ = loss_gradients(params, qs, spec)
        perm = np.array([2, 0, 3, 1])
        permuted = ReconstructionParams(params.points[perm], params.coeffs[perm])
        gp2, gc2, _ = loss_gradients(permuted, qs, spec)
        np.testing.assert_array_equal(gp2, g_points[perm])
        np.testing.assert_array_equal(gc2, g_coeffs[perm])


class CountingOracle:
    """Oracle facade that counts evaluations; exposes nothing else."""

    def __init__(self, model):
        self.spec = model.spec
        self.input_dim = model.input_dim
        self.output_dim = model.output_dim
        self.calls = 0
        self.rows_seen = 0
        self._predict = model.predict

    def evaluate(self, Z):
        self.calls += 1
        self.rows_seen += len(Z)
        return self._predict(Z)


def interpolating_model(rng, N=2, d=1, gamma=1.0):
    X = rng.normal(size=(N, d)) * 1.5
    while True:
        gaps = [np.linalg.norm(X[i] - X[j])
                for i in range(N) for j in range(i + 1, N)]
        if not gaps or min(gaps) > 0.5:
            break
        X = rng.normal(size=(N, d)) * 1.5
    Y = rng.choice([-1.0, 1.0], size=(N, 1))
    return train_krr(Dataset(X, Y), LaplaceKernel(gamma), ridge=0.0)


class TestRunAttack:
    def test_single_point_recovery(self):
        rng = np.random.default_rng(5)
        X = np.array([[0.6]])
        Y = np.array([[1.0]])
        model = train_krr(Dataset(X, Y), LaplaceKernel(1.0), ridge=0.0)
        config = AttackConfig(num_candidates=1, num_queries=8, steps=4000,
                              seed=0, query_dist=NormalQueries(1.5),
                              trace_every=500)
        result = run_attack(model.oracle(), config)
        assert result.final_loss < 1e-10
        assert abs(result.params.points[0, 0] - 0.6) < 1e-4

    def test_zero_steps_returns_initialization(self):
        rng = np.random.default_rng(6)
        model = interpolating_model(rng)
        config = AttackConfig(num_candidates=2, num_queries=7, steps=0, seed=3)
        result = run_attack(model.oracle(), config)
        # replay the documented rng order: queries, then points, then coeffs
        replay = np.random.default_rng(3)
        sample_queries(config.query_dist, 7, 1, replay)
        expected_points = replay.normal(0.0, 0.3, size=(2, 1))
        expected_coeffs = replay.normal(0.0, math.sqrt(0.05), size=(2, 1))
        np.testing.assert_array_equal(result.params.points, expected_points)
        np.testing.assert_array_equal(result.params.coeffs, expected_coeffs)

    def test_fixed_seed_reproducible_trace(self):
        rng = np.random.default_rng(7)
        model = interpolating_model(rng)
        config = AttackConfig(num_candidates=2, num_queries=7, steps=200,
                              seed=11, trace_every=10)
        a = run_attack(model.oracle(), config)
        b = run_attack(model.oracle(), config)
        np.testing.assert_array_equal(a.loss_trace, b.loss_trace)
        np.testing.assert_array_equal(a.params.points, b.params.points)

    def test_oracle_called_once_with_m_rows(self):
        rng = np.random.default_rng(8)
        model = interpolating_model(rng)
        oracle = CountingOracle(model)
        config = AttackConfig(num_candidates=2, num_queries=13, steps=50,
                              seed=0, trace_every=10)
        run_attack(oracle, config)
        assert oracle.calls == 1
        assert oracle.rows_seen == 13

    def test_minibatch_leaves_rng_contract_intact(self):
        rng = np.random.default_rng(9)
        model = interpolating_model(rng)
        config = AttackConfig(num_candidates=2, num_queries=16, steps=40,
                              seed=5, batch_size=4, trace_every=10)
        a = run_attack(model.oracle(), config)
        b = run_attack(model.oracle(), config)
        np.testing.assert_array_equal(a.loss_trace, b.loss_trace)

    def test_snapshots_record_initialization(self):
        rng = np.random.default_rng(10)
        model = interpolating_model(rng)
        config = AttackConfig(num_candidates=2, num_queries=7, steps=30, seed=1)
        with_snap = run_attack(model.oracle(), config, snapshot_steps=(0, 30))
        plain = run_attack(model.oracle(),
                           AttackConfig(num_candidates=2, num_queries=7,
                                        steps=0, seed=1))
        np.testing.assert_array_equal(with_snap.snapshots[0].points,
                                      plain.params.points)
        np.testing.assert_array_equal(with_snap.snapshots[30].points,
                                      with_snap.params.points)


class TestRunAttackPca:
    def test_identity_basis_identical_trajectory(self):
        rng = np.random.default_rng(11)
        model = interpolating_model(rng, N=3, d=3)
        config = AttackConfig(num_candidates=3, num_queries=16, steps=60,
                              seed=2, trace_every=5)
        plain = run_attack(model.oracle(), config)
        projected = run_attack_pca(model.oracle(), config, np.eye(3))
        np.testing.assert_array_equal(plain.loss_trace, projected.loss_trace)
        np.testing.assert_array_equal(plain.params.points,
                                      projected.params.points)

    def test_returned_points_lie_in_span(self):
        rng = np.random.default_rng(12)
        basis = np.linalg.qr(rng.normal(size=(5, 2)))[0]
        model = interpolating_model(rng, N=3, d=5)
        config = AttackConfig(num_candidates=3, num_queries=25, steps=40, seed=0)
        result = run_attack_pca(model.oracle(), config, basis)
        residual = result.params.points @ (np.eye(5) - basis @ basis.T)
        assert np.abs(residual).max() < 1e-10

    def test_non_orthonormal_basis_rejected(self):
        rng = np.random.default_rng(13)
        model = interpolating_model(rng, N=2, d=3)
        config = AttackConfig(num_candidates=2, num_queries=10, steps=1, seed=0)
        with pytest.raises(ValueError, match="orthonormal"):
            run_attack_pca(model.oracle(), config, np.ones((3, 2)))


class TestCanonicalize:
    def test_identical_points_merge_and_sum(self):
        params = ReconstructionParams(np.array([[1.0, 2.0], [1.0, 2.0]]),
                                      np.array([[3.0], [4.0]]))
        out = canonicalize(params, merge_tol=1e-6, coeff_tol=1e-12)
        assert out.points.shape == (1, 2)
        np.testing.assert_allclose(out.points[0], [1.0, 2.0])
        assert out.coeffs[0, 0] == pytest.approx(7.0)

    def test_zero_coefficient_point_dropped(self):
        params = ReconstructionParams(np.array([[0.0], [5.0]]),
                                      np.array([[1.0], [0.0]]))
        out = canonicalize(params, merge_tol=1e-6, coeff_tol=1e-9)
        assert out.points.shape == (1, 1)
        assert out.points[0, 0] == 0.0

    def test_single_linkage_chain(self):
        # {0, 0.9 eps, 2.1 eps} with tol eps: first two chain, third stays
        eps = 1e-3
        pts = np.array([[0.0], [0.9 * eps], [2.1 * eps]])
        coeffs = np.array([[1.0], [1.0], [1.0]])
        out = canonicalize(ReconstructionParams(pts, coeffs),
                           merge_tol=eps, coeff_tol=1e-12)
        assert out.points.shape == (2, 1)
        merged = sorted(out.points[:, 0])
        assert merged[0] == pytest.approx(0.45 * eps)
        assert merged[1] == pytest.approx(2.1 * eps)

    def test_weighted_mean_uses_coefficients(self):
        pts = np.array([[0.0], [1.0]])
        coeffs = np.array([[3.0], [1.0]])
        out = canonicalize(ReconstructionParams(pts, coeffs),
                           merge_tol=2.0, coeff_tol=1e-12)
        assert out.points[0, 0] == pytest.approx(0.25)
        assert out.coeffs[0, 0] == pytest.approx(4.0)

    def test_idempotent_at_fixed_tolerances(self):
        rng = np.random.default_rng(14)
        params = ReconstructionParams(rng.normal(size=(12, 2)),
                                      rng.normal(size=(12, 3)))
        once = canonicalize(params, merge_tol=0.5, coeff_tol=1e-3)
        twice = canonicalize(once, merge_tol=0.5, coeff_tol=1e-3)
        np.testing.assert_array_equal(once.points, twice.points)
        np.testing.assert_array_equal(once.coeffs, twice.coeffs)

    def test_empty_result_allowed(self):
        params = ReconstructionParams(np.array([[1.0]]), np.array([[1e-9]]))
        out = canonicalize(params, merge_tol=1e-3, coeff_tol=1e-3)
        assert out.points.shape[0] == 0


class TestMatchToTruth:
    def test_exact_match(self):
        rng = np.random.default_rng(15)
        truth = rng.normal(size=(5, 2))
        coeffs = rng.normal(size=(5, 1))
        recon = ReconstructionParams(truth.copy(), coeffs.copy())
        rep = match_to_truth(recon, truth, coeffs, tol=1e-9)
        assert rep.matched_fraction == 1.0
        np.testing.assert_allclose(rep.distances, 0.0)
        np.testing.assert_allclose(rep.coeff_gaps, 0.0)

    def test_empty_recon_matches_nothing(self):
        recon = ReconstructionParams(np.zeros((0, 2)), np.zeros((0, 1)))
        rep = match_to_truth(recon, np.ones((3, 2)), tol=1.0)
        assert rep.matched_fraction == 0.0
        assert np.all(np.isinf(rep.distances))

    def test_perturbed_within_tolerance(self):
        rng = np.random.default_rng(16)
        d = 4
        truth = rng.normal(size=(6, d)) * 3.0
        delta = 0.01
        noise = rng.normal(size=(6, d))
        noise = delta * noise / np.linalg.norm(noise, axis=1, keepdims=True)
        recon = ReconstructionParams(truth + noise, np.ones((6, 1)))
        rep = match_to_truth(recon, truth, tol=0.02)
        assert rep.matched_fraction == 1.0
        assert rep.distances.max() <= delta * math.sqrt(d) + 1e-12

    def test_relative_tolerance_mode(self):
        truth = np.array([[10.0, 0.0]])
        recon = ReconstructionParams(np.array([[10.4, 0.0]]), np.ones((1, 1)))
        assert match_to_truth(recon, truth, tol=0.05,
                              relative=True).matched_fraction == 1.0
        assert match_to_truth(recon, truth, tol=0.05,
                              relative=False).matched_fraction == 0.0
