"""Metric reconstruction, curvature, slices, and the mechanical picture."""

import math

import numpy as np
import pytest

from solitonlab import Dimensions, IntegratorConfig, SolitonClass, flow
from solitonlab.bohm import shoot_bohm
from solitonlab.equilibria import ricci_flat_cone
from solitonlab import geometry as G

D23 = Dimensions(2, 3)
CFG = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-13)


def rfes_profile(cls, sigma0=1e-4, t1=5.0, num=900):
    p0 = ricci_flat_cone(D23).as_array()
    p0[5] = sigma0
    traj = flow(p0, 0.0, t1, D23, cls, CFG)
    return G.reconstruct_metric(traj, D23, cls, num=num)


@pytest.fixture(scope="module")
def bohm_profile():
    # sigma0 = epsilon puts the fill curvature scale at O(1)
    orbit = shoot_bohm(D23, epsilon=1e-6)
    lift = G.LiftedTrajectory(orbit.trajectory, sigma0=1e-6)
    return G.reconstruct_metric(lift, D23, SolitonClass.STEADY, num=1600, s_span=(2e-3, 1e3))


class TestReconstruction:
    @pytest.mark.parametrize("cls", [SolitonClass.EXPANDER, SolitonClass.SHRINKER])
    def test_rfes_cone_profile(self, cls):
        prof = rfes_profile(cls)
        s = prof.s_grid
        assert np.max(np.abs(prof.phi1 - s * math.sqrt(1 / 4))) < 1e-8
        assert np.max(np.abs(prof.phi2 - s * math.sqrt(2 / 4))) < 1e-8
        assert np.max(np.abs(prof.f - (-cls.lam * s))) < 1e-8

    def test_consistency_residual(self, bohm_profile):
        assert bohm_profile.consistency_residual() < 1e-12

    def test_bohm_field_vanishes(self, bohm_profile):
        assert np.max(np.abs(bohm_profile.f)) < 1e-8

    def test_fill_boundary_limits(self, bohm_profile):
        fits = G.smooth_fill_limits(bohm_profile)
        assert abs(fits["x1_limit"] - 1.0) < 1e-4
        assert fits["x2_quadratic_coeff"] > 0

    def test_rejects_steady_without_lift(self):
        orbit = shoot_bohm(D23, epsilon=1e-6)
        with pytest.raises(ValueError):
            G.reconstruct_metric(orbit.trajectory, D23, SolitonClass.STEADY)


class TestCurvature:
    def test_cone_mixed_sectional(self):
        prof = rfes_profile(SolitonClass.EXPANDER)
        for s in (0.05, 0.3, 1.0):
            c = G.curvature(prof, s)
            assert abs(c.kappa_12_1 + 1 / s**2) * s**2 < 1e-7

    def test_bohm_ricci_flat(self, bohm_profile):
        samples = G.curvature_samples(bohm_profile, margin=30)
        for c in samples:
            assert c.ricci_max() / max(1.0, c.sectional_max()) < 1e-6
            if c.s >= 0.1:
                assert c.ricci_max() < 1e-6

    def test_good_fill_curvature_finite(self, bohm_profile):
        # sectional curvatures stay bounded toward the smooth fill
        small = [c for c in G.curvature_samples(bohm_profile, margin=30) if c.s < 0.05]
        assert small, "no small-s samples"
        for c in small:
            assert c.sectional_max() < 50.0

    def test_boundary_extrapolation_refused(self, bohm_profile):
        with pytest.raises(ValueError):
            G.curvature(bohm_profile, bohm_profile.s_grid[-1] * 2)

    def test_cone_curvature_exponent(self):
        slope = G.cone_curvature_exponent((4.1, 3.9), D23)
        assert abs(slope + 2.0) < 0.04


class TestSolitonField:
    def test_rfes_zero_at_origin(self):
        prof = rfes_profile(SolitonClass.EXPANDER)
        assert G.soliton_field_zeros(prof) == 0.0

    def test_tail_slope(self):
        for cls in (SolitonClass.EXPANDER, SolitonClass.SHRINKER):
            prof = rfes_profile(cls)
            fit = G.f_tail_fit(prof)
            assert abs(fit["slope"] + cls.lam) < 0.01


class TestSpacetimeSlices:
    def test_identity_time(self):
        # at t = 1/(2 lam) the flow parameter theta vanishes and g(t) = G
        prof = rfes_profile(SolitonClass.EXPANDER)
        (sl,) = G.spacetime_slices(prof, [0.5])
        s = prof.s_grid
        assert np.max(np.abs(sl.g_rr - 1)) < 1e-6
        assert np.max(np.abs(sl.g_S1 - s**2 * 1 / 4) / s**2) < 1e-6

    def test_cone_slice_exact(self):
        r = np.geomspace(0.1, 10, 50)
        sl = G.cone_slice((4.0, 4.0), D23, r)
        assert np.allclose(sl.g_S1, r**2 * 1 / 4, rtol=0, atol=0)
        assert np.allclose(sl.g_S2, r**2 * 2 / 4, rtol=0, atol=0)

    def test_wrong_sign_rejected(self):
        prof = rfes_profile(SolitonClass.EXPANDER)
        with pytest.raises(ValueError):
            G.spacetime_slices(prof, [-0.1])

    def test_rfes_slices_are_cone(self):
        # the cone run as an expander has f = -s: rho_t = s exactly
        prof = rfes_profile(SolitonClass.EXPANDER)
        slices = G.spacetime_slices(prof, [1e-1, 1e-3])
        for sl in slices:
            assert np.max(np.abs(sl.rho - prof.s_grid) / prof.s_grid) < 1e-6


class TestMechanical:
    def test_round_trip(self, bohm_profile):
        track = G.mechanical_transform(bohm_profile)
        assert G.mechanical_round_trip_residual(track, bohm_profile) < 1e-13

    def test_invariant_conserved_on_bohm(self, bohm_profile):
        # drift per unit s, on the window where I = 2J/s^2 is not dominated
        # by the division of the J noise floor by a vanishing s^2
        track = G.mechanical_transform(bohm_profile)
        mask = track.s_grid >= 0.1
        I = track.invariant()[mask]
        s = track.s_grid[mask]
        drift = np.abs(I - I[0]) / np.maximum(s - s[0], 1.0)
        assert np.max(drift) < 1e-8

    def test_equation_residual(self, bohm_profile):
        track = G.mechanical_transform(bohm_profile)
        r = track.equation_residual()
        mask = track.s_grid[8:-8] >= 0.01
        assert r[:, mask].max() < 1e-7
        # plain absolute residual also holds away from the fill
        raw = track.equation_residual(normalized=False)
        mask = track.s_grid[8:-8] >= 0.5
        assert raw[:, mask].max() < 1e-7

    def test_forward_integration_matches(self, bohm_profile):
        track = G.mechanical_transform(bohm_profile)
        s_end = float(track.s_grid[len(track.s_grid) // 2])
        s_used, u1, u2, v = G.mechanical_forward_integrate(track, s_end)
        mask = track.s_grid <= s_end
        assert np.max(np.abs(u1 - track.u1[mask])) < 1e-8
        assert np.max(np.abs(v - track.v[mask])) < 1e-8
