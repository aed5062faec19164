import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tesae.errors import DegenerateMatrixError
from tesae.reservoir import (
    CrjConfig,
    ReservoirConfig,
    estimate_spectral_radius,
    make_bias,
    make_crj,
    make_gaussian_matrix,
    standard_normal,
    stream,
)


def dense_radius(M):
    return float(np.max(np.abs(np.linalg.eigvals(M)))) if M.size else 0.0


def random_configs(count, seed, max_dim=64):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield ReservoirConfig(
            dim=int(rng.integers(2, max_dim + 1)),
            sparsity=float(rng.uniform(0.05, 1.0)),
            spectral_radius=float(rng.uniform(0.05, 0.99)),
            seed=int(rng.integers(0, 2**63)),
        ), int(rng.integers(0, 2**40))


def check_radius_configs(count=100, seed=2024):
    """Worst |radius - rho| over random configs, measured by a dense eigensolver."""
    worst = 0.0
    done = 0
    for cfg, sid in random_configs(count, seed):
        try:
            M = make_gaussian_matrix(cfg, sid)
        except DegenerateMatrixError:
            continue
        worst = max(worst, abs(dense_radius(M) - cfg.spectral_radius))
        done += 1
    return worst, done


class TestGaussianMatrix:
    def test_full_density(self):
        M = make_gaussian_matrix(ReservoirConfig(dim=8, sparsity=1.0, spectral_radius=0.5), 3)
        assert np.count_nonzero(M) == 64

    @pytest.mark.parametrize("beta", [0.05, 0.1, 0.37, 0.5])
    def test_exact_density(self, beta):
        n = 40
        try:
            M = make_gaussian_matrix(ReservoirConfig(dim=n, sparsity=beta, spectral_radius=0.5), 11)
        except DegenerateMatrixError:
            pytest.skip("degenerate draw")
        assert np.count_nonzero(M) == round(beta * n * n)

    def test_deterministic(self):
        cfg = ReservoirConfig(dim=32, sparsity=0.3, spectral_radius=0.8, seed=5)
        a = make_gaussian_matrix(cfg, 17)
        b = make_gaussian_matrix(cfg, 17)
        assert a.tobytes() == b.tobytes()
        assert not np.array_equal(a, make_gaussian_matrix(cfg, 18))
        assert not np.array_equal(a, make_gaussian_matrix(ReservoirConfig(32, 0.3, 0.8, seed=6), 17))

    def test_radius_against_dense_eigensolver(self):
        worst, done = check_radius_configs()
        assert done >= 90
        assert worst <= 1e-3

    def test_radius_full_size(self):
        cfg = ReservoirConfig(dim=256, sparsity=0.1, spectral_radius=0.9, seed=1)
        for sid in range(3):
            assert abs(dense_radius(make_gaussian_matrix(cfg, sid)) - 0.9) <= 1e-3

    def test_degenerate_raises(self):
        # one nonzero off the diagonal is nilpotent
        cfg = ReservoirConfig(dim=4, sparsity=1 / 16, spectral_radius=0.5, seed=0)
        outcomes = set()
        for sid in range(40):
            try:
                M = make_gaussian_matrix(cfg, sid)
                outcomes.add("ok")
                assert np.count_nonzero(np.diag(M)) == 1
            except DegenerateMatrixError:
                outcomes.add("degenerate")
        assert outcomes == {"ok", "degenerate"}


class TestBias:
    def test_tiny_rho(self):
        b = make_bias(ReservoirConfig(dim=256, spectral_radius=1e-9), 4)
        assert np.all(np.abs(b) <= 1e-7)
        assert abs(b.mean()) < 1e-8

    def test_std(self):
        rho = 0.37
        b = make_bias(ReservoirConfig(dim=100_000, spectral_radius=rho), 9)
        assert rho * 0.98 <= b.std() <= rho * 1.02
        assert abs(b.mean()) < 0.01

    def test_deterministic(self):
        cfg = ReservoirConfig(dim=16, spectral_radius=0.5, seed=3)
        assert make_bias(cfg, 1).tobytes() == make_bias(cfg, 1).tobytes()


class TestEstimator:
    def test_diagonal(self):
        assert estimate_spectral_radius(np.diag([2.0, 0.5])) == pytest.approx(2.0, abs=1e-12)

    def test_rotation(self):
        R = 0.7 * np.array([[0.0, -1.0], [1.0, 0.0]])
        assert estimate_spectral_radius(R) == pytest.approx(0.7, abs=1e-12)

    def test_zero(self):
        assert estimate_spectral_radius(np.zeros((5, 5))) == 0.0
        assert estimate_spectral_radius(np.zeros((50, 50))) == 0.0

    def test_large_rotation_block(self):
        # complex pair dominating a larger matrix
        n = 40
        M = np.diag(np.linspace(0.1, 0.5, n))
        M[:2, :2] = 0.9 * np.array([[0.0, -1.0], [1.0, 0.0]])
        assert estimate_spectral_radius(M) == pytest.approx(0.9, rel=1e-3)

    def test_nilpotent(self):
        M = np.triu(np.ones((30, 30)), 1)
        assert estimate_spectral_radius(M) == 0.0

    @settings(max_examples=40)
    @given(st.integers(1, 30), st.integers(0, 2**32 - 1))
    def test_matches_dense(self, n, seed):
        M = np.random.default_rng(seed).standard_normal((n, n))
        assert estimate_spectral_radius(M) == pytest.approx(dense_radius(M), rel=1e-3)


class TestRandomStreams:
    def test_box_muller_moments(self):
        z = standard_normal(stream(1, 2), 200_001)
        assert len(z) == 200_001
        assert abs(z.mean()) < 0.01 and abs(z.std() - 1) < 0.01

    def test_streams_independent(self):
        assert not np.array_equal(stream(0, 1).random(4), stream(0, 2).random(4))
        assert np.array_equal(stream(7, 1).random(4), stream(7, 1).random(4))


class TestCrj:
    def test_cycle_only(self):
        W, U = make_crj(CrjConfig(dim=4, cycle_weight=0.5, jump_length=4), 3)
        assert np.count_nonzero(W) == 4
        for i in range(4):
            assert W[(i + 1) % 4, i] == 0.5

    def test_cycle_radius(self):
        for n in (5, 16, 64):
            W, _ = make_crj(CrjConfig(dim=n, cycle_weight=0.63, jump_length=n), 1)
            assert dense_radius(W) == pytest.approx(0.63, abs=1e-12)

    def test_input_magnitude(self):
        _, U = make_crj(CrjConfig(dim=30, input_scale=0.37, seed=4), 6)
        assert U.shape == (30, 6)
        assert np.all(np.abs(U) == 0.37)
        assert (U > 0).any() and (U < 0).any()

    def test_jumps_symmetric(self):
        W, _ = make_crj(CrjConfig(dim=20, cycle_weight=0.7, jump_weight=0.4, jump_length=5), 2)
        J = W.copy()
        idx = np.arange(20)
        J[(idx + 1) % 20, idx] = 0
        assert np.array_equal(J, J.T)
        assert J[0, 5] == J[5, 0] == 0.4
        assert J[5, 10] == 0.4 and J[15, 0] == 0.4
        assert np.count_nonzero(J) == 8

    def test_deterministic(self):
        a = make_crj(CrjConfig(dim=12, seed=2), 4)
        b = make_crj(CrjConfig(dim=12, seed=2), 4)
        assert all(x.tobytes() == y.tobytes() for x, y in zip(a, b))
