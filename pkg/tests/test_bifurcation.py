import math

import numpy as np
import pytest

from dpwaves.spectral import PeriodicGrid, cosine_coefficients, inner_product
from dpwaves.equation import lambda_of_mu
from dpwaves.bifurcation import (
    BifurcationPoint,
    InternalError,
    NoBifurcation,
    bifurcation_mu,
    cubic_term_projection,
    dispersion,
    kernel_mode,
    local_branch_model,
    mixed_derivative_projection,
    mu_ddot,
    mu_dot_zero_check,
    second_order_coefficients,
    second_order_shape,
    seed_state,
)
from dpwaves.continuation import ContinuationConfig, continue_branch
from dpwaves.analysis import mandatory_failures


def mu_k_closed_form(k: int, P: float, a: float) -> float:
    # squaring the dispersion relation gives an explicit root, used only
    # as an oracle against the root finder
    q2 = (2 * math.pi * k / P) ** 2
    return math.sqrt(a) * (q2 + 4) / math.sqrt((q2 - 2) * (q2 + 1))


class TestDispersion:
    def test_a_to_zero_limit_is_sqrt2(self):
        assert dispersion(1.0, 1e-9) == pytest.approx(math.sqrt(2.0), abs=1e-6)

    def test_large_mu_limit_from_above(self):
        vals = [dispersion(mu, 1.0) for mu in (1e2, 1e4, 1e6)]
        assert all(v > math.sqrt(2.0) for v in vals)
        assert vals[-1] == pytest.approx(math.sqrt(2.0), abs=1e-6)

    def test_blow_up_near_sqrt_a(self):
        assert dispersion(1.01 * math.sqrt(1.0), 1.0) > 10.0

    def test_strictly_decreasing_in_mu(self):
        for a in (0.1, 1.0, 10.0):
            mus = math.sqrt(a) * np.geomspace(1.0001, 1e3, 60)
            vals = [dispersion(m, a) for m in mus]
            assert all(v2 < v1 for v1, v2 in zip(vals, vals[1:]))
            assert all(v > math.sqrt(2.0) for v in vals)

    def test_exactly_sqrt2_at_a_zero(self):
        # at a = 0 the constant branch is mu/2 and the quotient is exactly 2
        for mu in (0.3, 1.0, 7.0):
            assert dispersion(mu, 0.0) == math.sqrt(2.0)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            dispersion(0.5, 1.0)  # mu below sqrt(a)
        with pytest.raises(ValueError):
            dispersion(1.0, -1.0)
        with pytest.raises(ValueError):
            dispersion(0.0, 0.0)  # needs mu > sqrt(a) = 0


class TestBifurcationMu:
    @pytest.mark.parametrize("k,P,a", [
        (1, 1.0, 1.0), (1, 2.0, 1.0), (2, 3.0, 0.5), (3, 4.0, 2.0),
        (1, 0.5, 0.2), (4, 2.5, 3.0),
    ])
    def test_matches_closed_form_oracle(self, k, P, a):
        bp = bifurcation_mu(k, P, a)
        assert bp.mu_star == pytest.approx(mu_k_closed_form(k, P, a), rel=1e-13)
        assert abs(dispersion(bp.mu_star, a) - 2 * math.pi * k / P) < 1e-12
        assert bp.lambda_star == pytest.approx(lambda_of_mu(bp.mu_star, a), rel=1e-15)
        assert bp.mu_star > math.sqrt(a)

    def test_desk_value_frozen(self):
        # k=1, P=1, a=1 reference root
        bp = bifurcation_mu(1, 1.0, 1.0)
        assert bp.mu_star == pytest.approx(1.1162753722701888, abs=1e-13)

    def test_threshold_raises_no_bifurcation(self):
        with pytest.raises(NoBifurcation):
            bifurcation_mu(1, 10.0, 1.0)  # 2 pi / 10 < sqrt(2)
        with pytest.raises(NoBifurcation):
            bifurcation_mu(1, math.sqrt(2.0) * math.pi, 1.0)  # exactly the threshold

    def test_admissible_set_matches_threshold(self):
        P, a = 10.0, 1.0
        for k in range(1, 7):
            admissible = 2 * math.pi * k / P > math.sqrt(2.0)
            if admissible:
                bifurcation_mu(k, P, a)
            else:
                with pytest.raises(NoBifurcation):
                    bifurcation_mu(k, P, a)

    def test_monotone_in_k_and_P(self):
        # the dispersion function decreases in mu, so larger wavenumbers
        # (larger k, smaller P) select smaller speeds
        a = 1.0
        mus = [bifurcation_mu(k, 2.0, a).mu_star for k in range(1, 6)]
        assert all(m2 < m1 for m1, m2 in zip(mus, mus[1:]))
        mus_P = [bifurcation_mu(1, P, a).mu_star for P in (0.5, 1.0, 2.0, 4.0)]
        assert all(m2 > m1 for m1, m2 in zip(mus_P, mus_P[1:]))

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            bifurcation_mu(0, 1.0, 1.0)
        with pytest.raises(ValueError):
            bifurcation_mu(1, -1.0, 1.0)
        with pytest.raises(ValueError):
            bifurcation_mu(1, 1.0, 0.0)

    def test_degeneration_as_a_vanishes(self):
        # at P = sqrt(2) pi the k=1 wavenumber sits exactly on the threshold
        with pytest.raises(NoBifurcation):
            bifurcation_mu(1, math.sqrt(2.0) * math.pi, 1e-12)
        # just below the threshold period the root exists but is tiny and
        # ill-conditioned; the finder still matches the closed form
        P = 0.999 * math.sqrt(2.0) * math.pi
        bp = bifurcation_mu(1, P, 1e-12)
        assert bp.mu_star == pytest.approx(mu_k_closed_form(1, P, 1e-12), rel=1e-6)
        assert bp.mu_star < 1e-3

    def test_bifurcation_point_checks_dispersion(self):
        with pytest.raises(ValueError):
            BifurcationPoint(k=1, mu_star=2.0, lambda_star=lambda_of_mu(2.0, 1.0),
                             wavenumber=2 * math.pi, P=1.0, a=1.0)


class TestLyapunovSchmidtPieces:
    def test_mu_dot_vanishes(self):
        for (k, P, a) in [(1, 1.0, 1.0), (1, 2.0, 0.3), (2, 2.0, 1.5)]:
            bp = bifurcation_mu(k, P, a)
            assert abs(mu_dot_zero_check(bp)) < 1e-12

    def test_mixed_derivative_projection_nonzero(self):
        for (k, P, a) in [(1, 1.0, 1.0), (1, 3.0, 2.0), (3, 2.0, 0.1)]:
            bp = bifurcation_mu(k, P, a)
            den = mixed_derivative_projection(bp)
            assert abs(den) > 1e-3
            # lambda' in (1/3,1/2) and lambda/mu in (1/2,1) force a sign
            assert den < 0

    def test_second_order_shape_two_routes_agree(self, bp_desk):
        # second_order_shape raises InternalError if its built-in
        # closed-form / linear-solve comparison fails at 1e-10
        g = PeriodicGrid(bp_desk.P, 256)
        psi2 = second_order_shape(bp_desk, g, cross_check_tol=1e-10)
        c = cosine_coefficients(psi2)
        c0, c2 = second_order_coefficients(bp_desk)
        assert c[0] == pytest.approx(c0, rel=1e-13)
        assert c[2] == pytest.approx(c2, rel=1e-13)

    def test_second_order_shape_structure(self, bp_desk):
        g = PeriodicGrid(bp_desk.P, 128)
        psi2 = second_order_shape(bp_desk, g)
        c = cosine_coefficients(psi2)
        mask = np.ones_like(c, dtype=bool)
        mask[[0, 2 * bp_desk.k]] = False
        assert np.max(np.abs(c[mask])) < 1e-12
        assert inner_product(psi2, kernel_mode(bp_desk, g)) == pytest.approx(0.0, abs=1e-13)

    def test_second_order_coefficient_signs(self):
        # constant-mode eigenvalue is 4 lambda - mu > 0, so c0 > 0, while the
        # mode-2k eigenvalue is negative past the kernel, so c2 < 0
        for (k, P, a) in [(1, 1.0, 1.0), (1, 2.0, 0.5), (2, 3.0, 1.0)]:
            bp = bifurcation_mu(k, P, a)
            c0, c2 = second_order_coefficients(bp)
            assert c0 > 0
            assert c2 < 0

    def test_cross_check_tolerance_can_trip(self, bp_desk):
        g = PeriodicGrid(bp_desk.P, 128)
        with pytest.raises(InternalError):
            second_order_shape(bp_desk, g, cross_check_tol=1e-18)

    def test_mu_ddot_nonzero_and_two_way_assembly(self):
        for (k, P, a) in [(1, 1.0, 1.0), (1, 2.0, 1.0), (2, 2.5, 0.7)]:
            bp = bifurcation_mu(k, P, a)
            curvature = mu_ddot(bp)
            assert curvature != 0.0
            c0, c2 = second_order_coefficients(bp)
            amp = 1.0 + 3.0 / (1.0 + bp.wavenumber**2)
            symbolic = (c0 + 0.5 * c2) * amp
            grid_route = cubic_term_projection(bp, PeriodicGrid(P, 256))
            assert abs(symbolic - grid_route) < 1e-10 * max(1.0, abs(symbolic))

    def test_mu_ddot_matches_branch_fit(self, bp_desk):
        # oracle: continue the branch with tiny steps and fit
        # mu = mu* + beta s^2 + gamma s^4 against the kernel amplitude
        cfg = ContinuationConfig(initial_step=1e-4, min_step=1e-9, max_step=2.5e-4,
                                 max_points=10, newton_tol=1e-12)
        branch = continue_branch(bp_desk, cfg)
        s = np.array([p.state.coeffs[bp_desk.k] for p in branch.points])
        mu = np.array([p.state.mu for p in branch.points])
        design = np.vstack([s**2, s**4]).T
        beta, _ = np.linalg.lstsq(design, mu - bp_desk.mu_star, rcond=None)[0]
        assert 2 * beta == pytest.approx(mu_ddot(bp_desk), rel=0.05)

    def test_mu_ddot_degenerate_wavenumber(self):
        # at q^2 = 5 the cubic projection changes sign; straddle it and
        # verify the sign flip (the isolated degenerate combination)
        a = 1.0
        P_deg = 2 * math.pi / math.sqrt(math.sqrt(5.0)) ** 2  # q = sqrt(5)
        left = mu_ddot(bifurcation_mu(1, P_deg * 0.98, a))
        right = mu_ddot(bifurcation_mu(1, P_deg * 1.02, a))
        assert left * right < 0


class TestSeedState:
    def test_zero_amplitude_gives_constant(self, bp_desk, grid_desk):
        st = seed_state(bp_desk, 0.0, grid_desk)
        assert st.is_constant()
        assert st.mu == bp_desk.mu_star
        assert st.coeffs[0] == pytest.approx(bp_desk.lambda_star, rel=1e-14)
        assert st.residual_norm < 1e-14

    def test_crest_recentred_at_zero(self, bp_desk, grid_desk):
        st = seed_state(bp_desk, 0.02, grid_desk)
        assert st.coeffs[bp_desk.k] > 0
        assert np.argmax(st.phi.values) == grid_desk.center_index

    def test_residual_third_order(self, bp_desk, grid_desk):
        model = local_branch_model(bp_desk, grid_desk)
        r1 = seed_state(bp_desk, 0.01, grid_desk, model).residual_norm
        r2 = seed_state(bp_desk, 0.005, grid_desk, model).residual_norm
        assert 7.0 <= r1 / r2 <= 9.0

    def test_negative_amplitude_equivalent(self, bp_desk, grid_desk):
        a = seed_state(bp_desk, 0.01, grid_desk)
        b = seed_state(bp_desk, -0.01, grid_desk)
        assert a.coeffs == pytest.approx(b.coeffs, abs=1e-15)

    def test_seed_passes_wave_checks_for_small_amplitude(self, bp_desk, grid_desk):
        st = seed_state(bp_desk, 0.02, grid_desk)
        assert mandatory_failures(st) == []

    def test_single_crest_and_trough(self, bp_desk, grid_desk):
        st = seed_state(bp_desk, 0.02, grid_desk)
        v = st.phi.values
        # exactly two cyclic sign changes of the slope: one crest, one trough
        diff_sign = np.sign(np.diff(np.concatenate([v, v[:1]])))
        changes = np.count_nonzero(diff_sign != np.roll(diff_sign, -1))
        assert changes == 2

    def test_validity_radius_positive_and_modest(self, bp_desk, grid_desk):
        model = local_branch_model(bp_desk, grid_desk)
        gap0 = bp_desk.mu_star - bp_desk.lambda_star
        assert 0 < model.validity_radius <= 0.8 * gap0
        # within the radius the seed residual stays under 1e-3 of the height
        st = seed_state(bp_desk, model.validity_radius, grid_desk, model)
        height = float(np.max(st.phi.values) - np.min(st.phi.values))
        assert st.residual_norm <= 1.2e-3 * height
