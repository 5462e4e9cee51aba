import math

import numpy as np
import pytest
from scipy import special
from scipy.optimize import brentq

from robinstrip import (
    FiberProblem,
    MeshTooCoarse,
    angular_project,
    annulus_spectrum,
    assemble_fiber,
    count_negative,
    disk_exterior_spectrum,
    graded_mesh,
    lambda2_vs_perimeter,
    resolve_truncation,
    secular_oracle,
    shift_inertia,
    smallest_eigenpairs,
    solve_fiber,
)
from robinstrip.fiber import second_bound_state_threshold

TAU = 2.0 * np.pi


def scipy_secular_root(mode: int, radius: float, alpha: float):
    """Independent root of the same secular equation via scipy's Bessel K."""

    def f(k):
        x = k * radius
        if mode == 0:
            return -k * special.k1(x) - alpha * special.k0(x)
        return k * (-special.k0(x) - special.k1(x) / x) - alpha * special.k1(x)

    ks = np.linspace(1e-9, abs(alpha), 2000)
    fv = np.array([f(k) for k in ks])
    idx = np.nonzero(np.sign(fv[:-1]) * np.sign(fv[1:]) < 0)[0]
    if len(idx) == 0:
        return None
    k = brentq(f, ks[idx[0]], ks[idx[0] + 1], xtol=1e-15)
    return -k * k


class TestMesh:
    def test_graded_mesh_nested(self):
        coarse = graded_mesh(10.0, 64, -1.0)
        fine = graded_mesh(10.0, 128, -1.0)
        assert np.allclose(fine[::2], coarse, atol=1e-14)

    def test_graded_mesh_clusters_at_zero(self):
        nodes = graded_mesh(10.0, 64, -4.0)
        h = np.diff(nodes)
        assert h[0] < h[-1]
        assert nodes[0] == 0.0 and nodes[-1] == pytest.approx(10.0)


class TestAssembly:
    def test_neumann_constant_mode(self):
        # n=0, alpha=0, finite width: constant eigenvector at eigenvalue 0
        prob = FiberProblem(mode=0, boundary_length=TAU, width=1.0, alpha=0.0,
                            elements=64)
        a, m = assemble_fiber(prob)
        ones = np.ones(a.n)
        assert abs(ones @ (a.to_sparse() @ ones)) < 1e-12
        res = smallest_eigenpairs(a, m, k=1, tol=1e-8)
        assert abs(res.eigenvalues[0]) < 1e-12

    def test_mode_sign_symmetry(self):
        kw = dict(boundary_length=TAU, width=1.0, alpha=-1.0, elements=64)
        a_pos, _ = assemble_fiber(FiberProblem(mode=2, **kw))
        a_neg, _ = assemble_fiber(FiberProblem(mode=-2, **kw))
        assert np.array_equal(a_pos.band, a_neg.band)

    def test_mesh_too_coarse(self):
        prob = FiberProblem(mode=0, boundary_length=TAU, width=1.0,
                            alpha=0.0, elements=16)
        with pytest.raises(MeshTooCoarse):
            assemble_fiber(prob)

    def test_exterior_negative_count_via_inertia(self):
        # alpha=-1, R=1, n=1: one negative direction below 0 at fine mesh
        prob = FiberProblem(mode=1, boundary_length=TAU, width=math.inf,
                            alpha=-2.0, elements=256, truncation=10.0)
        assert count_negative(prob) == 1
        prob0 = FiberProblem(mode=1, boundary_length=TAU, width=math.inf,
                             alpha=-0.5, elements=256, truncation=30.0)
        assert count_negative(prob0) == 0

    def test_exterior_eigenvalue_bracketed_by_inertia(self):
        # the bound state lies in (-alpha^2, 0): inertia 0 at -alpha^2, 1 at 0
        alpha = -1.0
        prob = FiberProblem(mode=0, boundary_length=TAU, width=math.inf,
                            alpha=alpha, elements=256, truncation=30.0)
        a, m = assemble_fiber(prob)
        assert shift_inertia(a, m, -(alpha**2)) == 0
        assert shift_inertia(a, m, 0.0) == 1

    def test_invalid_problems(self):
        with pytest.raises(ValueError):
            FiberProblem(mode=0, boundary_length=TAU, width=math.inf, alpha=0.5)
        with pytest.raises(ValueError):
            FiberProblem(mode=0, boundary_length=-1.0, width=1.0, alpha=0.0)


class TestSecularOracle:
    def test_against_scipy_roots(self):
        for mode in (0, 1):
            for alpha in (-0.5, -1.0, -2.0, -4.0):
                ours = secular_oracle(mode, 1.0, alpha)
                ref = scipy_secular_root(mode, 1.0, alpha)
                if ref is None:
                    assert ours is None
                else:
                    assert ours == pytest.approx(ref, rel=1e-12)

    def test_root_inside_bracket(self):
        lam = secular_oracle(0, 1.0, -1.0)
        assert -1.0 < lam < 0.0

    def test_half_line_limit(self):
        # R -> inf with alpha fixed reduces to -psi'' = lam psi, psi'(0) = alpha psi(0)
        lam = secular_oracle(0, 100.0, -1.0)
        assert abs(lam + 1.0) <= 0.05

    def test_weak_coupling_no_second_state(self):
        assert secular_oracle(1, 1.0, -0.01) is None

    def test_threshold_scan(self):
        # the |n|=1 bound state appears at alpha = -1/R
        assert second_bound_state_threshold(1.0) == pytest.approx(-1.0, abs=1e-4)
        assert second_bound_state_threshold(2.0) == pytest.approx(-0.5, abs=1e-4)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            secular_oracle(0, 1.0, 0.5)
        with pytest.raises(ValueError):
            secular_oracle(2, 1.0, -1.0)


class TestFiberAgainstOracle:
    @pytest.mark.parametrize("alpha,mode", [(-1.0, 0), (-2.0, 0), (-2.0, 1)])
    def test_richardson_convergence(self, alpha, mode):
        exact = secular_oracle(mode, 1.0, alpha)
        prob = FiberProblem(mode=mode, boundary_length=TAU, width=math.inf,
                            alpha=alpha, elements=256)
        solve, cert = resolve_truncation(prob)
        t_shared = cert["T"]
        lams = []
        for els in (256, 512):
            p = FiberProblem(mode=mode, boundary_length=TAU, width=math.inf,
                             alpha=alpha, elements=els, truncation=t_shared)
            lams.append(solve_fiber(p, k=1).result.eigenvalues[0])
        rich = lams[1] + (lams[1] - lams[0]) / 3.0
        # extrapolation must cut the oracle gap by at least 3.5x
        assert abs(rich - exact) < abs(lams[1] - exact) / 3.5
        assert abs(rich / exact - 1.0) < 1e-6

    def test_truncation_monotone_one_sided(self):
        # Dirichlet truncation over-estimates: lam_T >= lam_true, decreasing in T
        alpha = -1.0
        exact = secular_oracle(0, 1.0, alpha)
        lams = []
        for t_rad in (6.0, 9.0, 14.0):
            p = FiberProblem(mode=0, boundary_length=TAU, width=math.inf,
                             alpha=alpha, elements=512, truncation=t_rad)
            lams.append(solve_fiber(p, k=1).result.eigenvalues[0])
        assert lams[0] >= lams[1] >= lams[2]
        assert all(lam >= exact - 1e-12 for lam in lams)

    def test_truncation_certificate(self):
        prob = FiberProblem(mode=0, boundary_length=TAU, width=math.inf,
                            alpha=-1.0, elements=512)
        solve, cert = resolve_truncation(prob)
        assert cert["delta"] <= 1e-9
        # enlarging T further moves the eigenvalue by less than the certificate
        p_big = FiberProblem(mode=0, boundary_length=TAU, width=math.inf,
                             alpha=-1.0, elements=1024,
                             truncation=2.0 * cert["T"])
        lam_big = solve_fiber(p_big, k=1).result.eigenvalues[0]
        assert lam_big <= solve.result.eigenvalues[0] + 1e-12


class TestSpectra:
    def test_alpha_nonnegative_empty(self):
        spec = disk_exterior_spectrum(TAU, 0.0)
        assert spec.essential_only and len(spec.eigenvalues) == 0
        spec2 = disk_exterior_spectrum(TAU, 1.5)
        assert spec2.essential_only and len(spec2.eigenvalues) == 0

    def test_exterior_structure(self):
        spec = disk_exterior_spectrum(TAU, -2.0, elements=256)
        assert spec.entries[0].mode == 0
        assert spec.entries[0].multiplicity == 1
        assert spec.entries[1].mode == 1
        assert spec.entries[1].multiplicity == 2
        lam = spec.eigenvalues
        assert len(lam) == 3 and lam[1] == lam[2]

    def test_exterior_single_state_weak(self):
        spec = disk_exterior_spectrum(TAU, -0.5, elements=256)
        assert len(spec.eigenvalues) == 1

    def test_fiber_minima_increase_in_mode(self):
        lams = []
        for n in (0, 1, 2):
            prob = FiberProblem(mode=n, boundary_length=TAU, width=1.0,
                                alpha=-1.0, elements=128)
            lams.append(solve_fiber(prob, k=1).result.eigenvalues[0])
        assert lams[0] < lams[1] < lams[2]

    def test_annulus_alpha0_ground(self):
        spec = annulus_spectrum(TAU, 1.0, 0.0, kmax=2, elements=128)
        assert abs(spec.eigenvalues[0]) < 1e-11

    def test_annulus_ground_is_radial(self):
        spec = annulus_spectrum(TAU, 1.0, -1.0, kmax=4, elements=128)
        assert spec.entries[0].mode == 0

    def test_annulus_dirichlet_limit(self):
        prob = FiberProblem(mode=0, boundary_length=TAU, width=1.0,
                            alpha=1e6, elements=256)
        a, m = assemble_fiber(prob)
        lam_rob = smallest_eigenpairs(a, m, k=1, tol=1e-6).eigenvalues[0]
        prob_d = FiberProblem(mode=0, boundary_length=TAU, width=1.0,
                              alpha=0.0, elements=256)
        a_d, m_d = assemble_fiber(prob_d, dirichlet_outer=True,
                                  dirichlet_inner=True)
        lam_dir = smallest_eigenpairs(a_d, m_d, k=1, tol=1e-8).eigenvalues[0]
        assert lam_rob == pytest.approx(lam_dir, rel=1e-3)

    def test_spectrum_csv(self, tmp_path):
        spec = disk_exterior_spectrum(TAU, -2.0, elements=128)
        path = tmp_path / "spec.csv"
        spec.export_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "n,lambda_index,lambda,residual,T,elements"
        assert len(lines) == len(spec.entries) + 1

    def test_profile_csv_and_integrability(self, tmp_path):
        prob = FiberProblem(mode=0, boundary_length=TAU, width=math.inf,
                            alpha=-1.0, elements=128)
        solve, _ = resolve_truncation(prob)
        ef = solve.eigenfunction(0)
        assert np.isfinite(ef.weighted_h1_norm(TAU))
        assert ef.values[-1] == 0.0  # Dirichlet end re-attached
        path = tmp_path / "psi.csv"
        ef.export_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,psi"
        assert len(lines) == len(ef.nodes) + 1


class TestLambda2Table:
    def test_monotone_and_oracle(self):
        rows = lambda2_vs_perimeter(-2.0, [TAU, 2 * TAU, 4 * TAU], elements=256)
        vals = [r["lam2"] for r in rows]
        assert all(v is not None for v in vals)
        assert vals[0] >= vals[1] >= vals[2]
        for r in rows:
            assert r["lam2"] == pytest.approx(r["oracle"], rel=1e-4)

    def test_absent_second_state_reported(self):
        rows = lambda2_vs_perimeter(-2.0, [math.pi], elements=128)
        assert rows[0]["lam2"] is None
        assert rows[0]["note"] == "no second bound state"


class TestAngularProjection:
    def test_pure_mode_recovery(self):
        n_s, n_t = 32, 5
        s = np.arange(n_s) * TAU / n_s
        g = np.linspace(1.0, 2.0, n_t)
        u = np.exp(1j * s)[None, :] * g[:, None]
        prof = angular_project(u, TAU, 1)
        assert np.allclose(prof / math.sqrt(TAU), g, atol=1e-12)
        # orthogonal mode sees nothing
        assert np.max(np.abs(angular_project(u, TAU, 2))) < 1e-12

    def test_parseval(self):
        rng = np.random.default_rng(5)
        n_s, n_t = 16, 4
        u = rng.standard_normal((n_t, n_s))
        total = sum(
            np.sum(np.abs(angular_project(u, TAU, n)) ** 2)
            for n in range(-n_s // 2, n_s // 2)
        )
        # trapezoid norm of u over s: sum |u|^2 * (L/n_s) per t-row
        ref = np.sum(np.abs(u) ** 2) * (TAU / n_s)
        assert total == pytest.approx(ref, rel=1e-12)
