"""Quadrature, generalized symmetric eigensolver, Brent root finding, extrapolation."""

import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from thinplate.errors import InsufficientRankError, InvalidArgumentError, MassNotPSDError, NoBracketError
from thinplate.numerics import (
    Spectrum,
    SymmetricPencil,
    brent_root,
    empirical_rate,
    gauss_legendre,
    richardson_limit,
    sym_gen_eig,
)


def random_pencil(n, seed, rank=None):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, n))
    A = X @ X.T
    Y = rng.standard_normal((n, rank or n))
    B = Y @ Y.T + (1e-1 * np.eye(n) if rank is None else 0)
    return A, B


class TestGaussLegendre:
    def test_one_point(self):
        q = gauss_legendre(1)
        assert np.allclose(q.nodes, [0.5]) and np.allclose(q.weights, [1.0])

    def test_two_point(self):
        q = gauss_legendre(2)
        assert np.allclose(q.nodes, [0.5 - 1 / (2 * math.sqrt(3)), 0.5 + 1 / (2 * math.sqrt(3))], atol=1e-15)
        assert np.allclose(q.weights, [0.5, 0.5])

    def test_exactness_degree_nine(self):
        assert abs(gauss_legendre(5).integrate(lambda x: x**9) - 0.1) <= 1e-14

    @pytest.mark.parametrize("n", [1, 3, 8, 20, 40])
    def test_rule_invariants(self, n):
        q = gauss_legendre(n)
        assert abs(q.weights.sum() - 1) <= 1e-13
        assert np.all(q.weights > 0) and np.all(np.diff(q.nodes) > 0)
        assert q.nodes.min() > 0 and q.nodes.max() < 1

    @pytest.mark.parametrize("n", [8, 12, 20])
    def test_exponential_convergence(self, n):
        assert abs(gauss_legendre(n).integrate(np.exp) - (math.e - 1)) < 1e-13

    @pytest.mark.parametrize("n", [0, -1, 2.5])
    def test_invalid(self, n):
        with pytest.raises(InvalidArgumentError):
            gauss_legendre(n)


class TestSymGenEig:
    def test_identity(self):
        s = sym_gen_eig(SymmetricPencil(np.eye(3), np.eye(3)), 3)
        assert np.allclose(s.eigenvalues, 1.0)

    def test_diagonal_ratios(self):
        s = sym_gen_eig(SymmetricPencil(np.diag([4.0, 1.0]), np.diag([2.0, 1.0])), 2)
        assert np.allclose(s.eigenvalues, [1.0, 2.0])

    def test_two_by_two(self):
        s = sym_gen_eig(SymmetricPencil(np.array([[2.0, 1.0], [1.0, 2.0]]), np.eye(2)), 2)
        assert np.allclose(s.eigenvalues, [1.0, 3.0])

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_scipy_and_b_orthonormal(self, seed):
        A, B = random_pencil(30, seed)
        s = sym_gen_eig(SymmetricPencil(A, B), 10)
        ref = sla.eigh(A, B, eigvals_only=True)[:10]
        assert np.allclose(s.eigenvalues, ref, rtol=1e-10)
        V = s.vectors
        assert np.max(np.abs(V.T @ B @ V - np.eye(10))) <= 1e-8
        for lam, v in zip(s.eigenvalues, V.T):
            res = np.linalg.norm(A @ v - lam * B @ v)
            assert res <= 1e-7 * (np.abs(A).max() + abs(lam) * np.abs(B).max()) * np.linalg.norm(v)

    def test_factor_path_agrees(self):
        rng = np.random.default_rng(7)
        G = rng.standard_normal((60, 25))
        _, B = random_pencil(25, 3)
        A = G.T @ G
        a = sym_gen_eig(SymmetricPencil(A, B), 8).eigenvalues
        b = sym_gen_eig(SymmetricPencil(A, B, factor=G), 8).eigenvalues
        assert np.allclose(a, b, rtol=1e-10)

    def test_factor_path_wide_factor_keeps_null_space(self):
        rng = np.random.default_rng(1)
        G = rng.standard_normal((3, 10))
        s = sym_gen_eig(SymmetricPencil(G.T @ G, np.eye(10), factor=G), 10)
        assert np.count_nonzero(s.eigenvalues < 1e-12) == 7

    def test_semidefinite_mass(self):
        A, B = random_pencil(20, 11, rank=12)
        s = sym_gen_eig(SymmetricPencil(A, B), 6, spd_mass=False)
        # reference: finite eigenvalues of the pencil via eig on (B, A) -> 1/lambda
        mu = sla.eigh(B, A, eigvals_only=True)
        lam = np.sort(1.0 / mu[mu > 1e-10])[:6]
        assert np.allclose(s.eigenvalues, lam, rtol=1e-8)
        assert s.info["rank"] == 12
        V = s.vectors
        assert np.max(np.abs(V.T @ B @ V - np.eye(6))) <= 1e-8
        for lam_j, v in zip(s.eigenvalues, V.T):
            assert np.linalg.norm(A @ v - lam_j * B @ v) <= 1e-7 * np.abs(A).max() * np.linalg.norm(v)

    def test_too_many_modes_for_rank(self):
        A, B = random_pencil(10, 2, rank=4)
        with pytest.raises(InsufficientRankError) as exc:
            sym_gen_eig(SymmetricPencil(A, B), 5, spd_mass=False)
        assert exc.value.kind == "insufficient-rank"
        with pytest.raises(InsufficientRankError):
            sym_gen_eig(SymmetricPencil(np.eye(3), np.eye(3)), 4)

    def test_not_psd(self):
        B = np.diag([1.0, -1.0, 2.0])
        with pytest.raises(MassNotPSDError) as exc:
            sym_gen_eig(SymmetricPencil(np.eye(3), B), 2)
        assert exc.value.kind == "mass-not-psd"
        with pytest.raises(MassNotPSDError):
            sym_gen_eig(SymmetricPencil(np.eye(3), B), 2, spd_mass=False)

    def test_deterministic(self):
        A, B = random_pencil(15, 5)
        a = sym_gen_eig(SymmetricPencil(A, B), 5)
        b = sym_gen_eig(SymmetricPencil(A.copy(), B.copy()), 5)
        assert np.array_equal(a.eigenvalues, b.eigenvalues) and np.array_equal(a.vectors, b.vectors)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), c=st.floats(-50, 50))
    def test_shift_equivariance(self, seed, c):
        A, B = random_pencil(12, seed)
        base = sym_gen_eig(SymmetricPencil(A, B), 6)
        shifted = sym_gen_eig(SymmetricPencil(A, B).shifted(c), 6)
        scale = 1 + np.abs(base.eigenvalues).max() + abs(c)
        assert np.allclose(shifted.eigenvalues, base.eigenvalues + c, atol=1e-9 * scale)
        # eigenvectors agree up to sign (eigenvalues are simple for random pencils)
        for u, v in zip(base.vectors.T, shifted.vectors.T):
            assert min(np.linalg.norm(u - v), np.linalg.norm(u + v)) <= 1e-6 * np.linalg.norm(u)

    def test_symmetry_check(self):
        A = np.array([[1.0, 2.0], [2.0 + 1e-6, 1.0]])
        assert not SymmetricPencil(A, np.eye(2)).is_symmetric()
        assert SymmetricPencil(np.eye(2), np.eye(2)).is_symmetric()


class TestSpectrumClusters:
    def test_groups_near_equal_values(self):
        lam = np.array([0.0, 1e-9, 8.0, 8.0 + 1e-7, 60.0])
        s = Spectrum(lam, np.eye(5))
        assert [m for _, m, _ in s.clusters()] == [2, 2, 1]
        assert s.multiplicities() == [2, 2, 2, 2, 1]

    def test_tolerance_is_relative(self):
        s = Spectrum(np.array([1000.0, 1000.0005]), np.eye(2), cluster_tol=1e-6)
        assert s.multiplicities() == [2, 2]


class TestBrent:
    def test_sqrt_two(self):
        assert brent_root(lambda x: x * x - 2, 1, 2, tol=1e-12) == pytest.approx(math.sqrt(2), abs=1e-11)

    def test_cosine(self):
        assert brent_root(math.cos, 1, 2, tol=1e-12) == pytest.approx(math.pi / 2, abs=1e-11)

    def test_linear(self):
        assert abs(brent_root(lambda x: x, -1, 1)) <= 1e-12

    def test_no_bracket(self):
        with pytest.raises(NoBracketError) as exc:
            brent_root(lambda x: x * x + 1, -1, 1)
        assert exc.value.kind == "no-bracket"

    @pytest.mark.parametrize("f,a,b", [
        (lambda x: x**3 - x - 2, 1, 2),
        (lambda x: math.exp(x) - 5, 0, 3),
        (lambda x: math.tanh(50 * (x - 0.3)), -1, 1),
        (lambda x: (x - 0.7) ** 3, 0, 1),
    ])
    def test_matches_scipy_brentq(self, f, a, b):
        ref = optimize.brentq(f, a, b, xtol=1e-14, maxiter=1000)
        assert brent_root(f, a, b, tol=1e-13) == pytest.approx(ref, abs=1e-10)


class TestExtrapolation:
    def test_quadratic_model_is_exact(self):
        h = [0.2, 0.1, 0.05]
        v = [3 + 2 * x - 5 * x * x for x in h]
        assert richardson_limit(h, v) == pytest.approx(3.0, abs=1e-13)

    def test_rate(self):
        h = [0.4, 0.2, 0.1]
        assert empirical_rate(h, [1 + x**2 for x in h]) == pytest.approx(2.0, rel=1e-12)
        assert math.isnan(empirical_rate(h[:2], [1, 2]))
        assert math.isnan(empirical_rate(h, [1, 2, 1]))

    def test_invalid(self):
        with pytest.raises(InvalidArgumentError):
            richardson_limit([0.1], [1, 2])
