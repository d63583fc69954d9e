import json
import math

import numpy as np
import pytest
import scipy.integrate

from dynbc import (
    BoundaryParams,
    basis_from_json,
    basis_to_json,
    build_mode,
    characteristic_determinant,
    characteristic_regularized,
    dirichlet_gap,
    dirichlet_map,
    find_eigenvalues,
    normalization_bound,
)
from dynbc import fem_oracle
from dynbc.errors import (
    BracketError,
    DegenerateModeError,
    DirichletPointError,
    DomainError,
    PoleError,
    ResonanceError,
)
from dynbc.quadrature import gauss_legendre_rule

from conftest import ACCEPTANCE_PARAM_SETS


class TestCharacteristicDeterminant:
    def test_limit_at_zero(self, params11):
        # analytic limit sqrt(-lam)*cot(sqrt(-lam)) -> 1 gives 1 + 1/b0 + 1/b1
        assert characteristic_determinant(0.0, params11) == 3.0

    def test_quarter_dirichlet_value(self, params11):
        # at lam = -pi^2/4 the cosine kills the middle term; by hand:
        # 1 + lam/(lam+1)^2
        lam = -math.pi**2 / 4.0
        expected = 1.0 + lam / (lam + 1.0) ** 2
        assert characteristic_determinant(lam, params11) == pytest.approx(
            expected, rel=1e-12
        )

    def test_positive_lambda_is_positive(self, params11):
        assert characteristic_determinant(1.0, params11) > 0.0

    def test_no_positive_spectrum_on_log_grid(self, params11):
        values = [
            characteristic_determinant(lam, params11)
            for lam in np.logspace(-3, 6, 200)
        ]
        assert all(np.isfinite(values))
        assert all(v > 0.0 for v in values)

    def test_pole_error(self):
        params = BoundaryParams(1.0, 2.0)
        with pytest.raises(PoleError):
            characteristic_determinant(-1.0, params)
        with pytest.raises(PoleError):
            characteristic_determinant(-2.0, params)

    def test_dirichlet_point_error(self, params11):
        with pytest.raises(DirichletPointError):
            characteristic_determinant(-math.pi**2 * 4.0, params11)


class TestCharacteristicRegularized:
    def test_matches_prefactored_determinant(self, params11):
        # independent route: multiply the determinant by its regularizing
        # prefactor instead of using the expanded form
        lam = -math.pi**2 / 4.0
        s = math.sqrt(-lam)
        expected = (
            (lam + 1.0) ** 2
            * math.sin(s)
            * characteristic_determinant(lam, params11)
        )
        assert characteristic_regularized(lam, params11) == pytest.approx(
            expected, rel=1e-12
        )

    def test_value_at_first_dirichlet_point(self, params11):
        # sine factor vanishes; only s*cos(s)*(2 lam + b0 + b1) survives
        lam = -math.pi**2
        expected = math.pi * math.cos(math.pi) * (2.0 * lam + 2.0)
        assert characteristic_regularized(lam, params11) == pytest.approx(
            expected, rel=1e-12
        )
        assert expected > 0.0

    def test_sign_flip_count_per_gap(self, params11):
        # fine-sampling oracle, 1e4 points per gap: the first Dirichlet gap
        # holds the two boundary-induced modes, every later gap exactly one
        for k in range(8):
            hi = -math.pi**2 * k**2
            lo = -math.pi**2 * (k + 1) ** 2
            eps = 1e-9 * (1.0 + abs(hi))
            xs = np.linspace(lo + eps, hi - eps, 10_000)
            ys = characteristic_regularized(xs, params11)
            flips = int(np.sum(np.diff(np.sign(ys)) != 0))
            assert flips == (2 if k == 0 else 1)

    def test_nonzero_at_interior_dirichlet_points(self, params11):
        # -pi^2 k^2 is not an eigenvalue, and the regularized function does
        # not vanish there either
        for k in range(1, 6):
            assert abs(characteristic_regularized(-math.pi**2 * k**2, params11)) > 1.0

    def test_domain_error(self, params11):
        with pytest.raises(DomainError):
            characteristic_regularized(0.5, params11)


class TestFindEigenvalues:
    def test_single_mode_in_first_gap(self, params11):
        lams = find_eigenvalues(params11, 1)
        assert len(lams) == 1
        assert -math.pi**2 < lams[0] < 0.0

    def test_decreasing_and_localized(self):
        for b0, b1 in ACCEPTANCE_PARAM_SETS:
            lams = find_eigenvalues(BoundaryParams(b0, b1), 8)
            assert np.all(np.diff(lams) < 0.0)
            for lam in lams:
                _, lo, hi = dirichlet_gap(lam)
                assert lo < lam < hi
                margin = min(lam - lo, hi - lam) / (1.0 + abs(lam))
                assert margin > 1e-7

    def test_matches_fem_oracle(self):
        # quick cross-check at moderate resolution; the full n=2000 check
        # lives in the acceptance suite
        for b0, b1 in ACCEPTANCE_PARAM_SETS:
            params = BoundaryParams(b0, b1)
            lams = find_eigenvalues(params, 8)
            fd_lams, _ = fem_oracle.eigensolve(fem_oracle.build(500, params), 8)
            rel = np.abs((lams - fd_lams) / fd_lams)
            assert rel.max() < 1e-3

    def test_asymptotic_ratio_monotone(self, params11):
        lams = find_eigenvalues(params11, 8)
        ratios = [lams[j] / (-math.pi**2 * j**2) for j in range(4, 8)]
        assert np.all(np.diff(ratios) > 0.0)
        assert all(0.0 < r < 1.0 for r in ratios)

    def test_root_refinement_residual(self, params11):
        for lam in find_eigenvalues(params11, 8):
            width = 1e-12 * (1.0 + abs(lam))
            left = characteristic_regularized(lam - width, params11)
            right = characteristic_regularized(lam + width, params11)
            assert left * right <= 0.0

    def test_requires_positive_count(self, params11):
        with pytest.raises(ValueError):
            find_eigenvalues(params11, 0)

    def test_bracket_error_surfaces(self, params11, monkeypatch):
        import dynbc.spectral as spectral

        monkeypatch.setattr(spectral, "_gap_roots", lambda *a, **k: [])
        with pytest.raises(BracketError):
            spectral.find_eigenvalues(params11, 4)


class TestBuildMode:
    def test_normalization_by_independent_quadrature(self, params11):
        # oracle: adaptive quadrature of the profile, not the closed form
        for j, lam in enumerate(find_eigenvalues(params11, 8)):
            mode = build_mode(lam, j, params11)
            integral, err = scipy.integrate.quad(
                lambda x: mode(x) ** 2, 0.0, 1.0, limit=200
            )
            norm_sq = integral + mode.trace0**2 + mode.trace1**2
            assert abs(norm_sq - 1.0) < 1e-10
            assert mode.B > 0.0

    def test_boundary_identity_at_zero(self, params11):
        for j, lam in enumerate(find_eigenvalues(params11, 8)):
            mode = build_mode(lam, j, params11)
            residual = (lam + params11.b0) * mode.trace0 - mode.derivative(0.0)
            assert abs(residual) <= 1e-13 * (1.0 + abs(lam))

    def test_boundary_residual_at_one(self, params11):
        for j, lam in enumerate(find_eigenvalues(params11, 8)):
            mode = build_mode(lam, j, params11)
            residual = (lam + params11.b1) * mode.trace1 + mode.derivative(1.0)
            assert abs(residual) <= 1e-8 * (1.0 + abs(lam))

    def test_eigenvectors_match_fem_oracle(self, params11, fd_op_cache):
        op = fd_op_cache(1.0, 1.0, 2000)
        fd_lams, fd_vecs = fem_oracle.eigensolve(op, 6)
        for j, lam in enumerate(find_eigenvalues(params11, 6)):
            mode = build_mode(lam, j, params11)
            sampled = mode(op.nodes)
            fd_vec = fd_vecs[:, j]
            if fd_vec @ sampled < 0.0:
                fd_vec = -fd_vec
            assert np.max(np.abs(sampled - fd_vec)) < 1e-2

    def test_degenerate_mode_error(self, params11):
        with pytest.raises(DegenerateModeError):
            build_mode(-params11.b0, 0, params11)

    def test_normalization_bound_reported(self, params11):
        lams = find_eigenvalues(params11, 8)
        modes = [build_mode(lam, j, params11) for j, lam in enumerate(lams)]
        flags = [normalization_bound(m) for m in modes]
        assert all(f is None or isinstance(f, bool) for f in flags)
        # high modes have s >> 1 and the bound is informative there
        assert flags[-1] is not None


class TestEigenBasis:
    def test_gram_orthonormality(self, basis32):
        gram = basis32.gram_matrix()
        assert np.abs(gram - np.eye(32)).max() <= 1e-6

    def test_modes_sorted_decreasing(self, basis16):
        assert np.all(np.diff(basis16.lam) < 0.0)

    def test_json_round_trip_bit_exact(self, basis8):
        text = basis_to_json(basis8)
        loaded = basis_from_json(text)
        assert loaded.params == basis8.params
        for a, b in zip(loaded.modes, basis8.modes):
            assert a.j == b.j
            assert a.lam == b.lam
            assert a.B == b.B
        assert np.abs(loaded.gram_matrix() - np.eye(8)).max() <= 1e-6

    def test_json_fields(self, basis8):
        payload = json.loads(basis_to_json(basis8))
        assert set(payload) == {"b0", "b1", "N", "modes"}
        assert payload["N"] == 8
        assert all(set(m) == {"j", "lambda", "B"} for m in payload["modes"])


class TestDirichletMap:
    def test_harmonic_interpolant(self):
        u = dirichlet_map(0.0, (1.0, 0.0))
        x = np.linspace(0.0, 1.0, 11)
        assert np.allclose(u(x), 1.0 - x, atol=1e-15)

    def test_textbook_positive_case(self):
        u = dirichlet_map(1.0, (1.0, 0.0))
        x = np.linspace(0.0, 1.0, 101)
        expected = np.sinh(1.0 - x) / np.sinh(1.0)
        assert np.max(np.abs(u(x) - expected)) < 1e-12

    @pytest.mark.parametrize("lam", [1.0, -2.0, 0.0, 37.5, -20.0])
    def test_traces_and_residual(self, lam):
        phi = (0.3, -0.7)
        u = dirichlet_map(lam, phi)
        assert abs(float(u(0.0)) - phi[0]) < 1e-14
        assert abs(float(u(1.0)) - phi[1]) < 1e-14
        # finite-difference residual oracle on 1e3 grid points
        x = np.linspace(0.0, 1.0, 1001)
        vals = u(x)
        dx = x[1] - x[0]
        second = (vals[2:] - 2.0 * vals[1:-1] + vals[:-2]) / dx**2
        residual = lam * vals[1:-1] - second
        assert np.max(np.abs(residual)) < 1e-4 * (1.0 + lam**2)

    def test_large_positive_lambda_is_finite(self):
        u = dirichlet_map(1e6, (1.0, 1.0))
        vals = u(np.linspace(0.0, 1.0, 51))
        assert np.all(np.isfinite(vals))
        assert abs(float(u(0.0)) - 1.0) < 1e-12

    def test_resonance_error(self):
        with pytest.raises(ResonanceError):
            dirichlet_map(-math.pi**2, (1.0, 0.0))
        with pytest.raises(ResonanceError):
            dirichlet_map(-9.0 * math.pi**2, (1.0, 0.0))


class TestQuadrature:
    def test_weights_sum_to_one(self):
        quad = gauss_legendre_rule()
        assert abs(quad.weights.sum() - 1.0) < 1e-14

    def test_polynomial_exactness(self):
        quad = gauss_legendre_rule(panels=4, nodes_per_panel=4)
        # degree-7 polynomial integrated exactly by 4-point Gauss
        vals = quad.nodes**7
        assert abs(quad.integrate(vals) - 1.0 / 8.0) < 1e-14

    def test_endpoint_extrapolation(self):
        quad = gauss_legendre_rule()
        vals = np.cos(3.0 * quad.nodes)
        left, right = quad.endpoint_values(vals)
        assert abs(left - 1.0) < 1e-10
        assert abs(right - math.cos(3.0)) < 1e-10
