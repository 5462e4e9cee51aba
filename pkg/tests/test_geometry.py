import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from robinstrip import (
    ClosureError,
    CurvatureProfile,
    Mode,
    SelfIntersectionError,
    WidthExceedsCritical,
    angle_condition,
    build_curve,
    critical_width,
    curvature_stats,
    offset_boundary,
    offset_injective,
    read_profile,
    validate_strip,
)

TAU = 2.0 * np.pi


def closure_integral(profile: CurvatureProfile, n: int = 4096) -> complex:
    """Independent quadrature oracle for int_0^L exp(i*theta(s)) ds."""
    s = np.arange(n) * profile.length / n
    return np.exp(1j * profile.theta(s)).mean() * profile.length


class TestBuildCurve:
    def test_unit_circle(self, circle):
        assert circle.closure_residual < 1e-12
        stats = curvature_stats(circle)
        assert stats.min_kappa == pytest.approx(1.0)
        assert stats.max_kappa == pytest.approx(1.0)
        radii = np.linalg.norm(circle.positions - circle.positions.mean(axis=0), axis=1)
        assert np.allclose(radii, 1.0, atol=1e-10)

    def test_convex_k2_closes(self, convex_k2):
        # the closure integral has no resonant Bessel term for harmonic >= 2
        assert convex_k2.closure_residual <= 1e-12
        assert abs(closure_integral(convex_k2.profile)) < 1e-12

    def test_k1_raises_closure_error(self):
        profile = CurvatureProfile(TAU, (Mode(1, 0.5),))
        expected = abs(closure_integral(profile))
        assert expected > 1.0  # the independent quadrature shows a real defect
        with pytest.raises(ClosureError) as err:
            build_curve(profile, 512)
        assert err.value.residual == pytest.approx(expected, rel=1e-6)

    def test_too_few_nodes(self):
        with pytest.raises(ValueError):
            build_curve(CurvatureProfile.circle(), 8)
        with pytest.raises(ValueError):
            build_curve(CurvatureProfile(TAU, (Mode(8, 0.1),)), 32)

    def test_unit_tangents_and_frenet(self, convex_k2):
        norms = np.linalg.norm(convex_k2.tangents, axis=1)
        assert np.max(np.abs(norms - 1.0)) < 1e-12
        assert convex_k2.frenet_residual < 1e-10

    def test_total_curvature(self, signed_k3):
        assert curvature_stats(signed_k3).total_curvature == pytest.approx(
            TAU, abs=1e-10)

    def test_tangent_integrals_vanish(self, convex_k2, signed_k3):
        for curve in (convex_k2, signed_k3):
            tang = curve.tang_c
            assert abs(tang.mean() * curve.length) < 1e-12
            assert abs((tang * curve.kappa).mean() * curve.length) < 1e-12

    def test_positive_orientation(self, convex_k2):
        x, y = convex_k2.positions[:, 0], convex_k2.positions[:, 1]
        area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
        assert area > 0


class TestCurvatureStats:
    def test_circle(self, circle):
        stats = curvature_stats(circle)
        assert (stats.min_kappa, stats.max_kappa, stats.norm_kappa_minus) == \
            pytest.approx((1.0, 1.0, 0.0))
        assert stats.total_curvature == pytest.approx(TAU, abs=1e-10)

    def test_signed_profile(self, signed_k3):
        stats = curvature_stats(signed_k3)
        assert stats.min_kappa == pytest.approx(-0.5)
        assert stats.max_kappa == pytest.approx(2.5)
        assert stats.norm_kappa_minus == pytest.approx(0.5)

    def test_convex_profile(self, convex_k2):
        stats = curvature_stats(convex_k2)
        assert stats.min_kappa == pytest.approx(0.5)
        assert stats.max_kappa == pytest.approx(1.5)
        assert stats.norm_kappa_minus == 0.0


class TestCriticalWidth:
    def test_circle_infinite(self, circle):
        assert critical_width(circle) == math.inf

    def test_jacobian_bound(self, signed_k3):
        d_star = critical_width(signed_k3)
        assert d_star <= 1.0 / 0.5 + 1e-12

    def test_numeric_value_stable(self, signed_k3):
        # for this profile the binding constraint is the local Jacobian, so
        # bisection must land at 1/||kappa_-|| within its tolerance
        d_star = critical_width(signed_k3, search_tol=1e-6 * TAU)
        assert d_star == pytest.approx(2.0, abs=1e-4)

    def test_two_mode_consistent_with_angle_remark(self):
        # whenever the angle condition holds, the necessary Jacobian bound
        # is also sufficient, so bisection must land exactly on it
        curve = build_curve(
            CurvatureProfile(TAU, (Mode(2, 1.2), Mode(4, 1.0, np.pi / 2))), 1024)
        assert angle_condition(curve)
        stats = curvature_stats(curve)
        assert stats.min_kappa < 0
        d_star = critical_width(curve)
        bound = 1.0 / stats.norm_kappa_minus
        assert d_star <= bound + 1e-12
        assert d_star == pytest.approx(bound, rel=1e-3)


class TestAngleCondition:
    def test_circle(self, circle):
        assert angle_condition(circle)

    def test_k3_holds(self, signed_k3):
        # prefix-sum oracle: min over i<j of theta_j - theta_i stays above -pi
        theta = signed_k3.theta
        worst = min(
            theta[j] - theta[i]
            for j in range(1, len(theta), 7)
            for i in range(0, j, 7)
        )
        assert worst > -np.pi
        assert angle_condition(signed_k3)

    def test_deep_concavity_fails(self):
        # kappa = 1 + 8 cos(2s) closes but loops through itself, so the
        # condition is evaluated on a directly-constructed PlanarCurve
        # (build_curve would veto the self-intersection)
        from robinstrip.geometry import PlanarCurve

        profile = CurvatureProfile(TAU, (Mode(2, 8.0),))
        s = np.arange(4096) * TAU / 4096
        theta = profile.theta(s)
        run = np.maximum.accumulate(theta)
        assert np.min(theta[1:] - run[:-1]) < -np.pi  # independent scan
        tang = np.exp(1j * theta)
        clone = PlanarCurve(
            length=TAU, s=s,
            positions=np.zeros((4096, 2)),
            tangents=np.stack([tang.real, tang.imag], axis=1),
            normals=np.zeros((4096, 2)),
            kappa=profile.kappa(s), theta=theta,
            closure_residual=0.0, frenet_residual=0.0, profile=profile,
        )
        assert not angle_condition(clone)


class TestOffsetBoundary:
    def test_circle_offset_is_circle(self, circle):
        outer = offset_boundary(circle, 1.0)
        assert outer.length == pytest.approx(2 * TAU)
        radii = np.linalg.norm(outer.positions - circle.positions.mean(axis=0), axis=1)
        assert np.allclose(radii, 2.0, atol=1e-9)
        assert np.allclose(outer.kappa, 0.5, atol=1e-12)

    def test_small_offset_is_identity_limit(self, convex_k2):
        outer = offset_boundary(convex_k2, 1e-9)
        assert np.max(np.abs(outer.positions - convex_k2.positions)) < 1e-7

    def test_outer_length_identity(self, convex_k2):
        d = 0.3
        outer = offset_boundary(convex_k2, d)
        # quadrature of the arclength element (1 + d*kappa) ds
        by_quadrature = float(np.mean(1.0 + d * convex_k2.kappa) * convex_k2.length)
        assert outer.length == pytest.approx(convex_k2.length + TAU * d, abs=1e-12)
        assert by_quadrature == pytest.approx(outer.length, abs=1e-9)

    def test_offset_total_curvature(self, convex_k2):
        outer = offset_boundary(convex_k2, 0.3)
        total = float(np.mean(outer.kappa) * outer.length)
        assert total == pytest.approx(TAU, abs=1e-9)

    def test_width_beyond_critical(self, signed_k3):
        with pytest.raises(WidthExceedsCritical):
            offset_boundary(signed_k3, 2.5)

    def test_offset_injective_flags(self, signed_k3):
        assert offset_injective(signed_k3, 0.5)

    def test_offset_composition(self, convex_k2):
        # for convex curves offsetting twice equals one combined offset;
        # the second offset exercises the profile-free interpolation path
        once = offset_boundary(convex_k2, 0.5)
        twice = offset_boundary(once, 0.3)
        combined = offset_boundary(convex_k2, 0.8)
        assert twice.length == pytest.approx(combined.length, abs=1e-12)
        assert np.max(np.abs(twice.positions - combined.positions)) < 1e-8
        # 2-D evaluation grids must work on the profile-free curve too
        grid = np.linspace(0.0, once.length, 12).reshape(3, 4)
        assert once.kappa_at(grid).shape == (3, 4)


class TestStripValidation:
    def test_convex_infinite_ok(self, convex_k2):
        spec = validate_strip(convex_k2, math.inf)
        assert spec.convex and spec.critical == math.inf

    def test_signed_infinite_rejected(self, signed_k3):
        with pytest.raises(WidthExceedsCritical):
            validate_strip(signed_k3, math.inf)

    def test_signed_wide_rejected(self, signed_k3):
        with pytest.raises(WidthExceedsCritical):
            validate_strip(signed_k3, 2.1)

    def test_signed_narrow_ok(self, signed_k3):
        spec = validate_strip(signed_k3, 0.5)
        assert not spec.convex
        assert spec.width < spec.critical


class TestProfileIO:
    def test_read_profile_roundtrip(self, tmp_path):
        doc = tmp_path / "profile.json"
        doc.write_text(
            '{"length": 6.283185307179586, '
            '"modes": [{"k": 2, "amplitude": 0.5, "phase": 0.1}], "nodes": 256}'
        )
        profile, nodes = read_profile(doc)
        assert nodes == 256
        assert profile.modes[0].k == 2
        curve = build_curve(profile, nodes)
        assert curve.closure_residual < 1e-12

    def test_curve_csv_export(self, tmp_path, circle):
        path = tmp_path / "curve.csv"
        circle.export_csv(path)
        rows = path.read_text().splitlines()
        assert rows[0] == "s,x,y,tau_x,tau_y,nu_x,nu_y,kappa"
        assert len(rows) == circle.n_nodes + 1

    def test_from_samples(self):
        s = np.arange(512) * TAU / 512
        samples = 1.0 + 0.5 * np.cos(2 * s + 0.3)
        profile = CurvatureProfile.from_samples(TAU, samples)
        assert len(profile.modes) == 1
        assert profile.modes[0].k == 2
        assert profile.modes[0].amplitude == pytest.approx(0.5, rel=1e-12)

    def test_k0_mode_rejected(self):
        with pytest.raises(ValueError):
            CurvatureProfile(TAU, (Mode(0, 0.1),))


@given(
    k=st.integers(min_value=2, max_value=6),
    amplitude=st.floats(min_value=0.0, max_value=1.8),
    phase=st.floats(min_value=0.0, max_value=TAU),
)
@settings(max_examples=40, deadline=None)
def test_curve_invariants_property(k, amplitude, phase):
    """Every successfully built single-harmonic curve satisfies the closure
    and Frenet identities at machine precision."""
    profile = CurvatureProfile(TAU, (Mode(k, amplitude, phase),))
    try:
        curve = build_curve(profile, 512)
    except SelfIntersectionError:
        assume(False)
        return
    stats = curvature_stats(curve)
    assert stats.total_curvature == pytest.approx(TAU, abs=1e-10)
    assert curve.closure_residual < 1e-10
    assert abs(curve.tang_c.mean() * curve.length) < 1e-10
    assert abs((curve.tang_c * curve.kappa).mean() * curve.length) < 1e-10
    assert np.max(np.abs(np.linalg.norm(curve.tangents, axis=1) - 1.0)) < 1e-12
