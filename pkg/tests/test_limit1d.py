"""Limiting system on the curve: assembly, both solution paths, kernel and exports."""

import csv
import io
import json
import math

import numpy as np
import pytest
from scipy.linalg import toeplitz

from thinplate.curve import CurveGeometry, WidthProfile, make_circle, make_ellipse, make_fourier_curvature
from thinplate.errors import FlatCurvatureError, InvalidArgumentError, NoEmbeddingError
from thinplate.limit1d import (
    FourierBasis,
    assemble_limit_system,
    circle_closed_form,
    kernel_residuals,
    restricted_bilap_apply,
    solve_limit_eigs,
    spectrum_to_csv,
    spectrum_to_json,
)

CIRCLE_ETA = [0, 0, 0, 8, 8, 1152 / 19, 1152 / 19, 7200 / 33, 7200 / 33]
# lowest nonzero values for ellipse(2,1), from the collocation oracle below at n=201
ELLIPSE_ETA = [1.1833508056, 2.0483886757, 9.2112433351]


def spectral_diff(n, L):
    """Periodic Fourier differentiation matrix on n (odd) equispaced nodes."""
    h = 2 * math.pi / n
    col = np.zeros(n)
    j = np.arange(1, n)
    col[1:] = 0.5 * (-1.0) ** j / np.sin(j * h / 2)
    row = -col
    return toeplitz(col, row) * (2 * math.pi / L)


def collocation_eta(curve, n=201, g=None):
    """Eigenvalues of the strong-form system by Fourier collocation, w eliminated."""
    s = curve.nodes(n)
    D = spectral_diff(n, curve.length)
    k = np.diag(curve.curvature(s))
    G = np.diag(np.ones(n) if g is None else g.value(s, curve.length))
    D2 = D @ D
    # -2(g w')' + k^2 g w = k g u'' + 2(k g u')'
    Aww = -2 * D @ G @ D + k @ k @ G
    rhs = k @ G @ D2 + 2 * D @ k @ G @ D
    W = np.linalg.solve(Aww, rhs)
    # (g u'')'' - 2(k^2 g u')' - (k g w)'' - 2(k g w')' = eta g u
    op = D2 @ G @ D2 - 2 * D @ k @ k @ G @ D - D2 @ k @ G @ W - 2 * D @ k @ G @ D @ W
    ev = np.linalg.eigvals(np.linalg.solve(G, op))
    return np.sort(ev.real)


class TestFourierBasis:
    def test_orthonormal(self):
        b = FourierBasis(6, 3.7)
        s = np.arange(256) * 3.7 / 256
        F = b.evaluate(s)
        M = F.T @ F * (3.7 / 256)
        assert np.max(np.abs(M - np.eye(b.dim))) <= 1e-12

    @pytest.mark.parametrize("order", [1, 2, 3, 4])
    def test_derivatives(self, order):
        b = FourierBasis(3, 2.0)
        s = np.linspace(0, 2, 11)
        d = 1e-3
        lower = lambda x: b.evaluate(x, order - 1)
        fd = (lower(s + d) - lower(s - d)) / (2 * d)
        scale = (2 * math.pi * 3 / 2.0) ** order
        assert np.allclose(b.evaluate(s, order), fd, atol=1e-5 * scale)

    def test_projection_recovers_mode(self):
        b = FourierBasis(4, 2 * math.pi)
        s = np.arange(64) * 2 * math.pi / 64
        c = b.project(np.sin(3 * s))
        assert c[b.index(3, "sin")] == pytest.approx(math.sqrt(math.pi))
        assert np.count_nonzero(np.abs(c) > 1e-12) == 1


class TestAssembly:
    def test_symmetric(self, circle):
        P = assemble_limit_system(circle, 8)
        assert P.asymmetry <= 1e-12
        assert np.max(np.abs(P.K - P.K.T)) == 0.0

    def test_w_block_positive_definite(self, circle):
        _, _, _, Kww = assemble_limit_system(circle, 8).blocks()
        assert np.linalg.eigvalsh(Kww).min() > 0

    def test_mass_diagonal_and_full_mass_singular(self, ellipse):
        P = assemble_limit_system(ellipse, 8)
        assert np.max(np.abs(P.M_u - np.eye(P.dim))) <= 1e-12
        assert np.linalg.matrix_rank(P.full_mass) == P.dim

    def test_width_profile_quadrature_converged(self, ellipse):
        g = WidthProfile(0.5, (0.1,))
        a = assemble_limit_system(ellipse, 16, g)
        b = assemble_limit_system(ellipse, 16, g, n_quad=2 * a.n_quad)
        assert np.max(np.abs(a.K - b.K)) < 1e-9 and np.max(np.abs(a.M_u - b.M_u)) < 1e-9
        assert a.width_name == g.name

    def test_flat_curvature(self):
        flat = CurveGeometry(1.0, "parametric", {"name": "flat"}, lambda s: 0 * s, lambda s: 0 * s)
        with pytest.raises(FlatCurvatureError) as exc:
            assemble_limit_system(flat, 8)
        assert exc.value.kind == "flat-curvature" and exc.value.module == "limit1d"

    @pytest.mark.parametrize("N", [3, 0, 5.5])
    def test_invalid_order(self, circle, N):
        with pytest.raises(InvalidArgumentError):
            assemble_limit_system(circle, N)


class TestCircle:
    def test_closed_form_spectrum(self, circle):
        eta = solve_limit_eigs(assemble_limit_system(circle, 16), 9).eigenvalues
        assert np.max(np.abs(eta[:3])) <= 1e-8
        assert np.allclose(eta[3:], CIRCLE_ETA[3:], rtol=1e-8, atol=0)

    def test_w_ratio(self, circle):
        P = assemble_limit_system(circle, 16)
        s = solve_limit_eigs(P, 5)
        for j in (3, 4):
            u, w = s.vectors[:, j], s.w_vectors[:, j]
            assert np.max(np.abs(w + 4.0 / 3.0 * u)) <= 1e-8

    @pytest.mark.parametrize("R", [0.5, 2.0, 3.3])
    def test_dilation_law(self, R):
        eta1 = solve_limit_eigs(assemble_limit_system(make_circle(1.0), 16), 9)
        etaR = solve_limit_eigs(assemble_limit_system(make_circle(R), 16), 9)
        assert np.allclose(etaR.eigenvalues[3:], eta1.eigenvalues[3:] / R**4, rtol=1e-8)
        # eigenvectors unchanged: each double mode spans the same coefficient plane for every R
        for j in (3, 5):
            V1, VR = eta1.vectors[:, j:j + 2], etaR.vectors[:, j:j + 2]
            Q1, QR = np.linalg.qr(V1)[0], np.linalg.qr(VR)[0]
            assert np.allclose(Q1 @ Q1.T, QR @ QR.T, atol=1e-8)

    @pytest.mark.parametrize("ell,eta,ratio", [(0, 0.0, 0.0), (1, 0.0, -1.0), (2, 8.0, -4.0 / 3.0),
                                               (3, 1152 / 19, -27 / 19)])
    def test_closed_form_function(self, ell, eta, ratio):
        e, r = circle_closed_form(ell)
        assert e == pytest.approx(eta, abs=1e-12) and r == pytest.approx(ratio, abs=1e-15)

    def test_exact_once_mode_in_basis(self, circle):
        for N in (6, 8, 12):
            eta = solve_limit_eigs(assemble_limit_system(circle, N), 2 * (N - 2) + 1).eigenvalues
            exact = [circle_closed_form(ell)[0] for ell in range(N - 1) for _ in range(1 if ell == 0 else 2)]
            assert np.allclose(eta[3:], np.sort(exact)[3:], rtol=1e-8)

    def test_closed_form_invalid(self):
        with pytest.raises(InvalidArgumentError):
            circle_closed_form(-1)


class TestGeneralCurves:
    def test_ellipse_against_collocation_oracle(self, ellipse):
        eta = solve_limit_eigs(assemble_limit_system(ellipse, 48), 6).eigenvalues
        assert np.allclose(eta[3:6], ELLIPSE_ETA, rtol=1e-9)
        ref = collocation_eta(ellipse, 201)
        assert np.allclose(ref[3:6], ELLIPSE_ETA, rtol=1e-9)

    def test_width_profile_against_collocation_oracle(self, ellipse):
        g = WidthProfile(0.5, (0.1,), (0.05,))
        eta = solve_limit_eigs(assemble_limit_system(ellipse, 48, g), 6).eigenvalues
        ref = collocation_eta(ellipse, 201, g)
        assert np.allclose(eta[3:6], ref[3:6], rtol=1e-8)

    def test_fourier_curvature_against_collocation_oracle(self):
        c = make_fourier_curvature(2 * math.pi, [0.3], [0.1])
        eta = solve_limit_eigs(assemble_limit_system(c, 32), 6).eigenvalues
        ref = collocation_eta(c, 129)
        assert np.allclose(eta, ref[:6], rtol=1e-8, atol=1e-8)

    def test_schur_block_agreement(self, circle, ellipse):
        for curve in (circle, ellipse):
            P = assemble_limit_system(curve, 32)
            a = solve_limit_eigs(P, 12, "schur").eigenvalues
            b = solve_limit_eigs(P, 12, "block").eigenvalues
            assert np.allclose(a[3:], b[3:], rtol=1e-8)
            assert np.max(np.abs(a[:3] - b[:3])) <= 1e-8

    def test_block_w_recovery_consistent(self, ellipse):
        P = assemble_limit_system(ellipse, 16)
        s = solve_limit_eigs(P, 6, "block")
        Kuu, Kuw, Kwu, Kww = P.blocks()
        for j in (3, 4, 5):
            assert np.allclose(Kwu @ s.vectors[:, j] + Kww @ s.w_vectors[:, j], 0, atol=1e-8)

    @pytest.mark.parametrize("curve_factory", [lambda: make_circle(1.0), lambda: make_ellipse(2, 1),
                                               lambda: make_ellipse(1.0, 0.8)])
    def test_non_negative_and_monotone(self, curve_factory):
        curve = curve_factory()
        prev = None
        for N in (8, 12, 16, 20):
            eta = solve_limit_eigs(assemble_limit_system(curve, N), 12).eigenvalues
            assert np.all(eta >= -1e-8 * (1 + np.abs(eta)))
            if prev is not None:
                assert np.all(eta <= prev + 1e-10 * (1 + np.abs(prev)))
            prev = eta

    def test_zero_mode_count(self, circle, ellipse):
        for curve, N in ((circle, 8), (circle, 16), (ellipse, 32), (ellipse, 48)):
            eta = solve_limit_eigs(assemble_limit_system(curve, N), 6).eigenvalues
            assert np.count_nonzero(np.abs(eta) <= 1e-6 * (1 + eta[3])) == 3 and eta[3] > 0

    def test_zero_modes_persist_with_width(self, ellipse):
        g = WidthProfile(0.4, (0.2,), (0.1,))
        eta = solve_limit_eigs(assemble_limit_system(ellipse, 48, g), 6).eigenvalues
        assert np.count_nonzero(np.abs(eta) <= 1e-6 * (1 + eta[3])) == 3

    def test_shift(self, ellipse):
        P = assemble_limit_system(ellipse, 16)
        a = solve_limit_eigs(P, 8).eigenvalues
        b = solve_limit_eigs(P, 8, shift=5.0).eigenvalues
        assert np.allclose(a, b, atol=1e-10 * (1 + np.abs(a).max()))

    def test_unknown_method(self, circle):
        with pytest.raises(InvalidArgumentError):
            solve_limit_eigs(assemble_limit_system(circle, 8), 3, method="qr")


class TestKernel:
    def test_circle(self, circle):
        r = kernel_residuals(circle, assemble_limit_system(circle, 16))
        assert max(r) <= 1e-8
        assert r[0] <= 1e-10

    def test_ellipse_decays_under_refinement(self, ellipse):
        res = [max(kernel_residuals(ellipse, assemble_limit_system(ellipse, N))) for N in (16, 32, 48, 64)]
        assert all(a > 10 * b for a, b in zip(res, res[1:]))
        assert res[-1] <= 1e-6

    def test_ellipse_constant_exact(self, ellipse):
        assert kernel_residuals(ellipse, assemble_limit_system(ellipse, 32))[0] <= 1e-9

    def test_requires_embedding(self):
        c = make_fourier_curvature(6.0, [0.2])
        with pytest.raises(NoEmbeddingError):
            kernel_residuals(c, assemble_limit_system(c, 8))


class TestRestrictedBilaplacian:
    @pytest.mark.parametrize("ell", [0, 1, 2, 3])
    def test_circle_values(self, circle, ell):
        b = FourierBasis(8, circle.length)
        u = np.zeros(b.dim)
        u[b.index(ell)] = 1.0
        out = restricted_bilap_apply(circle, u)
        expected = np.zeros(b.dim)
        expected[b.index(ell)] = ell**4 - 4 * ell**2
        assert np.allclose(out, expected, atol=1e-9)

    def test_differs_from_limit_operator(self):
        assert [ell**4 - 4 * ell**2 for ell in (1, 2, 3)] == [-3, 0, 45]
        assert all(ell**4 - 4 * ell**2 != circle_closed_form(ell)[0] for ell in (1, 2, 3))

    def test_general_curve_against_pointwise(self, ellipse):
        b = FourierBasis(10, ellipse.length)
        rng = np.random.default_rng(0)
        u = rng.standard_normal(b.dim) / (1 + np.arange(b.dim)) ** 3
        s = ellipse.nodes(4096)
        k, kp = ellipse.curvature(s), ellipse.curvature_derivative(s)
        vals = b.evaluate(s, 4) @ u + 4 * k**2 * (b.evaluate(s, 2) @ u) + 5 * k * kp * (b.evaluate(s, 1) @ u)
        assert np.allclose(restricted_bilap_apply(ellipse, u), b.project(vals), atol=1e-8)

    @pytest.mark.parametrize("n", [4, 0])
    def test_dimension_mismatch(self, circle, n):
        with pytest.raises(InvalidArgumentError):
            restricted_bilap_apply(circle, np.ones(n))


class TestExport:
    def test_csv(self, circle):
        s = solve_limit_eigs(assemble_limit_system(circle, 16), 9)
        rows = list(csv.reader(io.StringIO(spectrum_to_csv(s))))
        assert rows[0] == ["j", "eta", "multiplicity_cluster"]
        assert [int(r[2]) for r in rows[1:]] == [3, 3, 3, 2, 2, 2, 2, 2, 2]
        assert float(rows[4][1]) == pytest.approx(8.0, rel=1e-10)

    def test_json(self, circle):
        P = assemble_limit_system(circle, 8)
        s = solve_limit_eigs(P, 5)
        obj = json.loads(json.dumps(spectrum_to_json(s, P)))
        assert obj["N"] == 8 and len(obj["u_vectors"]) == 5 and len(obj["u_vectors"][0]) == 17
        assert obj["eigenvalues"][3] == pytest.approx(8.0)
