"""2-D Robin eigenproblem on curved strips in parallel coordinates.

The quadratic form in parallel coordinates,

    int int ( |d_s u|^2 / (1 + kappa t) + |d_t u|^2 (1 + kappa t) ) ds dt
    + alpha int |u(s,0)|^2 ds  [ + alpha int |u(s,d)|^2 (1 + kappa d) ds ],

is discretized with bilinear quadrilaterals on the (s, t) tensor grid,
periodic in s, 3x3 Gauss per cell so the rational metric factor is
integrated far below discretization error.  DOFs are ordered t-major
(index = j*n_s + i) which keeps the matrix banded, wrap included, with
bandwidth 2*n_s - 1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .eig import GeneralizedEigResult, SymmetricBandedMatrix, smallest_eigenpairs
from .errors import JacobianNonPositive, MeshTooCoarse
from .fiber import FiberProblem, graded_mesh, resolve_truncation
from .geometry import PlanarCurve, curvature_stats

TAU = 2.0 * np.pi

STRIP_TOL = 1e-8
PAIRING_RTOL = 1e-7  # relative gap for declaring a two-fold eigenvalue


@dataclass(frozen=True, eq=False)
class StripMesh:
    """Tensor mesh: n_s periodic arclength intervals x given t-node list."""

    length: float
    n_s: int
    t_nodes: np.ndarray
    kappa_nodes: np.ndarray

    def __post_init__(self):
        if self.n_s % 4 != 0:
            raise ValueError(f"n_s must be a multiple of 4, got {self.n_s}")

    @property
    def n_t(self) -> int:
        return len(self.t_nodes) - 1

    @property
    def s_nodes(self) -> np.ndarray:
        return np.arange(self.n_s) * (self.length / self.n_s)

    @property
    def node_weights(self) -> np.ndarray:
        """1 + kappa(s_i) * t_j on the grid, shape (n_t+1, n_s)."""
        return 1.0 + self.t_nodes[:, None] * self.kappa_nodes[None, :]


@dataclass(frozen=True, eq=False)
class StripProblem:
    """Robin problem on the strip of width d (or truncated exterior) over a curve."""

    curve: PlanarCurve
    width: float
    alpha: float
    n_s: int = 64
    n_t: int = 64
    truncation: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_s % 4 != 0:
            raise ValueError(f"n_s must be a multiple of 4, got {self.n_s}")
        if math.isinf(self.width):
            stats = curvature_stats(self.curve)
            if stats.min_kappa < 0:
                raise ValueError("the exterior problem requires a convex curve")
            if self.alpha >= 0:
                raise ValueError(
                    "exterior problems with alpha >= 0 have no discrete spectrum"
                )

    def extent(self) -> float:
        if math.isfinite(self.width):
            return self.width
        if self.truncation is None:
            raise ValueError("infinite width requires a truncation radius")
        return self.truncation

    def mesh(self) -> StripMesh:
        if math.isfinite(self.width):
            t_nodes = np.linspace(0.0, self.width, self.n_t + 1)
        else:
            t_nodes = graded_mesh(self.extent(), self.n_t, self.alpha)
        kappa_nodes = self.curve.kappa_at(
            np.arange(self.n_s) * (self.curve.length / self.n_s)
        )
        return StripMesh(self.curve.length, self.n_s, t_nodes, kappa_nodes)

    def refined(self, factor: int = 2) -> "StripProblem":
        return StripProblem(
            curve=self.curve, width=self.width, alpha=self.alpha,
            n_s=self.n_s * factor, n_t=self.n_t * factor,
            truncation=self.truncation, seed=self.seed,
        )


def default_truncation(length: float, alpha: float, elements: int = 256,
                       seed: int = 0) -> tuple[float, dict]:
    """Truncation radius shared with the fiber policy.

    Resolved on the same-perimeter disk fibers n = 0, 1; the disk bounds the
    curved-domain eigenvalues from above, so its slower-decaying profiles
    give a conservative T.
    """
    t_best, certs = 0.0, []
    for n in (0, 1):
        prob = FiberProblem(mode=n, boundary_length=length, width=math.inf,
                            alpha=alpha, elements=elements)
        solve, cert = resolve_truncation(prob, seed=seed)
        if solve.result.eigenvalues[0] < 0:
            t_best = max(t_best, cert["T"])
        certs.append({"mode": n, **cert})
    if t_best == 0.0:
        t_best = certs[0]["T"]
    return t_best, {"fibers": certs, "T": t_best}


_DP = np.array([-1.0, 1.0])


def _basis_1d(npts: int = 3):
    gx, gw = np.polynomial.legendre.leggauss(npts)
    x = 0.5 + 0.5 * gx
    w = 0.5 * gw
    vals = np.stack([1.0 - x, x])  # (2, npts)
    return x, w, vals


def assemble_strip(problem: StripProblem):
    """Assemble the (A, M) pencil; returns (A, M, mesh).

    Raises JacobianNonPositive when 1 + kappa*t fails to be positive at any
    node or quadrature point (width beyond validity).
    """
    mesh = problem.mesh()
    if mesh.n_t < 4 or mesh.n_s < 8:
        raise MeshTooCoarse(f"mesh {mesh.n_s} x {mesh.n_t} too coarse")
    curve = problem.curve
    n_s, t_nodes = mesh.n_s, mesh.t_nodes
    n_tn = mesh.n_t + 1
    hs = curve.length / n_s
    dirichlet_outer = math.isinf(problem.width)

    if np.min(mesh.node_weights) <= 0.0:
        raise JacobianNonPositive("1 + kappa*t <= 0 at a mesh node")

    xq, wq, pvals = _basis_1d(3)
    # s-quadrature points per s-element, exact curvature there
    s_el = np.arange(n_s) * hs
    sq = s_el[:, None] + hs * xq[None, :]
    kq = np.asarray(curve.kappa_at(sq))
    t0, t1 = t_nodes[:-1], t_nodes[1:]
    ht = t1 - t0
    tq = t0[:, None] + ht[:, None] * xq[None, :]

    jac = 1.0 + kq[:, :, None, None] * tq[None, None, :, :]  # (ns, q, nt, q)
    if np.min(jac) <= 0.0:
        raise JacobianNonPositive("1 + kappa*t <= 0 at a quadrature point")
    inv_jac = 1.0 / jac

    # local 2x2 factor tables indexed by flat local node a = ia + 2*ja
    ia = np.array([0, 1, 0, 1])
    ja = np.array([0, 0, 1, 1])
    sn = pvals[ia]                      # (4, q) s-shape values
    tn = pvals[ja]                      # (4, q) t-shape values
    sd = _DP[ia]                        # (4,) s-shape derivative factors
    td = _DP[ja]

    sn_ab = np.einsum("au,bu->abu", sn, sn)
    tn_ab = np.einsum("av,bv->abv", tn, tn)
    sd_ab = np.outer(sd, sd)
    td_ab = np.outer(td, td)

    # d_s term: (1/jac) * sd_ab/hs^2 * tn_ab ; d_t term: jac * td_ab/ht^2 * sn_ab
    g_s = np.einsum("u,v,xuyv,abv->xyab", wq, wq, inv_jac, tn_ab)
    g_t = np.einsum("u,v,xuyv,abu->xyab", wq, wq, jac, sn_ab)
    m_l = np.einsum("u,v,xuyv,abu,abv->xyab", wq, wq, jac, sn_ab, tn_ab)

    ht_y = ht[None, :, None, None]
    a_loc = (sd_ab * (ht_y / hs) * g_s) + (td_ab * (hs / ht_y) * g_t)
    m_loc = hs * ht_y * m_l

    # scatter: dof(x, y, a) = (y + ja)*n_s + (x + ia) mod n_s
    x_idx = np.arange(n_s)[:, None, None]
    y_idx = np.arange(mesh.n_t)[None, :, None]
    dof = (y_idx + ja[None, None, :]) * n_s + (x_idx + ia[None, None, :]) % n_s
    rows = np.broadcast_to(dof[:, :, :, None], a_loc.shape).ravel()
    cols = np.broadcast_to(dof[:, :, None, :], a_loc.shape).ravel()

    n_dof = n_tn * n_s
    a_rows, a_cols, a_vals = [rows], [cols], [a_loc.ravel()]

    # inner Robin line t=0 (weight 1) and, for finite width, the outer line
    # t=d with the boundary measure weight (1 + kappa(s) d)
    def boundary_line(t_val: float, row_offset: int):
        wfac = 1.0 + kq * t_val                       # (ns, q)
        m00 = hs * np.einsum("u,xu,u,u->x", wq, wfac, pvals[0], pvals[0])
        m01 = hs * np.einsum("u,xu,u,u->x", wq, wfac, pvals[0], pvals[1])
        m11 = hs * np.einsum("u,xu,u,u->x", wq, wfac, pvals[1], pvals[1])
        i0 = np.arange(n_s)
        i1 = (i0 + 1) % n_s
        r = np.concatenate([i0, i1, i0, i1]) + row_offset
        c = np.concatenate([i0, i1, i1, i0]) + row_offset
        v = np.concatenate([m00, m11, m01, m01])
        return r, c, v

    r0, c0, v0 = boundary_line(0.0, 0)
    a_rows.append(r0)
    a_cols.append(c0)
    a_vals.append(problem.alpha * v0)
    if not dirichlet_outer:
        rd, cd, vd = boundary_line(t_nodes[-1], (n_tn - 1) * n_s)
        a_rows.append(rd)
        a_cols.append(cd)
        a_vals.append(problem.alpha * vd)

    rows_a = np.concatenate(a_rows)
    cols_a = np.concatenate(a_cols)
    vals_a = np.concatenate(a_vals)
    rows_m, cols_m, vals_m = rows, cols, m_loc.ravel()

    if dirichlet_outer:
        keep_below = n_dof - n_s

        def restrict(r, c, v):
            ok = (r < keep_below) & (c < keep_below)
            return r[ok], c[ok], v[ok]

        rows_a, cols_a, vals_a = restrict(rows_a, cols_a, vals_a)
        rows_m, cols_m, vals_m = restrict(rows_m, cols_m, vals_m)
        n_dof = keep_below

    a = SymmetricBandedMatrix.from_coo(rows_a, cols_a, vals_a, n_dof)
    m = SymmetricBandedMatrix.from_coo(rows_m, cols_m, vals_m, n_dof)
    return a, m, mesh


def quadratic_form_value(problem: StripProblem, mesh: StripMesh,
                         u_grid: np.ndarray) -> float:
    """Direct quadrature of the Robin form for a Q1 grid function.

    Independent (loop-based) evaluation used to validate assembly: with the
    same 3x3 Gauss rule it must reproduce u.A.u to machine precision.
    """
    curve = problem.curve
    n_s, t_nodes = mesh.n_s, mesh.t_nodes
    hs = curve.length / n_s
    xq, wq, pvals = _basis_1d(3)
    dirichlet_outer = math.isinf(problem.width)
    total = 0.0
    for ie in range(n_s):
        squad = (ie + xq) * hs
        kqe = np.asarray(curve.kappa_at(squad))
        i0, i1 = ie, (ie + 1) % n_s
        for je in range(mesh.n_t):
            t0, t1 = t_nodes[je], t_nodes[je + 1]
            ht_e = t1 - t0
            corners = np.array([
                u_grid[je, i0], u_grid[je, i1],
                u_grid[je + 1, i0], u_grid[je + 1, i1],
            ])
            for u in range(3):
                for v in range(3):
                    jac = 1.0 + kqe[u] * (t0 + ht_e * xq[v])
                    nvals = np.array([
                        pvals[0][u] * pvals[0][v], pvals[1][u] * pvals[0][v],
                        pvals[0][u] * pvals[1][v], pvals[1][u] * pvals[1][v],
                    ])
                    ds_vals = np.array([
                        -pvals[0][v], pvals[0][v], -pvals[1][v], pvals[1][v],
                    ]) / hs
                    dt_vals = np.array([
                        -pvals[0][u], -pvals[1][u], pvals[0][u], pvals[1][u],
                    ]) / ht_e
                    du_s = float(ds_vals @ corners)
                    du_t = float(dt_vals @ corners)
                    total += wq[u] * wq[v] * hs * ht_e * (
                        du_s**2 / jac + du_t**2 * jac
                    )
    # boundary terms
    for (t_val, row, active) in (
        (0.0, 0, True),
        (t_nodes[-1], mesh.n_t, not dirichlet_outer),
    ):
        if not active:
            continue
        for ie in range(n_s):
            squad = (ie + xq) * hs
            kqe = np.asarray(curve.kappa_at(squad))
            i0, i1 = ie, (ie + 1) % n_s
            for u in range(3):
                wfac = 1.0 + kqe[u] * t_val
                uval = u_grid[row, i0] * pvals[0][u] + u_grid[row, i1] * pvals[1][u]
                total += problem.alpha * wq[u] * hs * wfac * uval**2
    return total


@dataclass(frozen=True, eq=False)
class StripSolveResult:
    problem: StripProblem
    mesh: StripMesh
    result: GeneralizedEigResult
    truncation_certificate: dict | None = None

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.result.eigenvalues

    @property
    def discrete_eigenvalues(self) -> np.ndarray:
        """For the (truncated) exterior, only negatives are discrete spectrum."""
        if math.isinf(self.problem.width):
            return self.result.eigenvalues[self.result.eigenvalues < 0.0]
        return self.result.eigenvalues

    def eigenfunction_grid(self, index: int) -> np.ndarray:
        """Eigenvector reshaped to the (n_t+1, n_s) grid (Dirichlet rows re-added)."""
        n_s = self.mesh.n_s
        vec = self.result.eigenvectors[:, index]
        if math.isinf(self.problem.width):
            vec = np.concatenate([vec, np.zeros(n_s)])
        grid = vec.reshape(-1, n_s)
        if abs(grid.min()) > abs(grid.max()):
            grid = -grid
        return grid

    def export_eigenfunction_csv(self, index: int, path) -> None:
        """CSV in both parallel (s, t) and Cartesian (x, y) coordinates."""
        grid = self.eigenfunction_grid(index)
        curve = self.problem.curve
        s_nodes = self.mesh.s_nodes
        if curve.n_nodes == len(s_nodes):
            base, normals = curve.positions, curve.normals
        else:
            base = curve.position_at(s_nodes)
            theta = curve.theta_at(s_nodes)
            tang = np.exp(1j * theta)
            normals = np.stack([tang.imag, -tang.real], axis=1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "t", "x", "y", "re_u", "im_u"])
            for j, t in enumerate(self.mesh.t_nodes):
                xy = base + t * normals
                for i, s in enumerate(s_nodes):
                    w.writerow([
                        repr(float(s)), repr(float(t)),
                        repr(float(xy[i, 0])), repr(float(xy[i, 1])),
                        repr(float(grid[j, i])), repr(0.0),
                    ])


def solve_strip(problem: StripProblem, k: int = 2, tol: float = STRIP_TOL,
                seed: int | None = None) -> StripSolveResult:
    """k lowest eigenpairs of the strip problem.

    For the truncated exterior the homogeneous Dirichlet line at t = T is
    attached with the fiber-shared truncation radius (resolved here when the
    problem carries none), and only negative eigenvalues count as discrete
    spectrum.
    """
    seed = problem.seed if seed is None else seed
    cert = None
    if math.isinf(problem.width) and problem.truncation is None:
        t_rad, cert = default_truncation(problem.curve.length, problem.alpha,
                                         seed=seed)
        problem = StripProblem(
            curve=problem.curve, width=problem.width, alpha=problem.alpha,
            n_s=problem.n_s, n_t=problem.n_t, truncation=t_rad, seed=seed,
        )
    a, m, mesh = assemble_strip(problem)
    stats = curvature_stats(problem.curve)
    hint = -(problem.alpha**2 + abs(problem.alpha) * max(stats.max_kappa, 1.0) + 2.0)
    res = smallest_eigenpairs(a, m, k=k, tol=tol, seed=seed, lower_hint=hint)
    return StripSolveResult(problem, mesh, res, truncation_certificate=cert)


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    """Richardson-extrapolated eigenvalues from nested mesh levels."""

    levels: tuple[tuple[int, int], ...]
    eigenvalues: np.ndarray          # (levels, k)
    extrapolated: np.ndarray         # (k,)
    errbar: np.ndarray               # (k,)
    observed_order: np.ndarray | None
    monotone: bool


def convergence_report(problem: StripProblem, levels: int = 2, k: int = 2,
                       tol: float = STRIP_TOL) -> ConvergenceReport:
    """Solve on `levels` nested meshes (doubling both directions) and
    extrapolate assuming O(h^2); errbar = |lam_h - lam_{h/2}| / 3."""
    if levels < 2:
        raise ValueError("need at least 2 levels for extrapolation")
    probs = [problem]
    for _ in range(levels - 1):
        probs.append(probs[-1].refined())
    if math.isinf(problem.width) and problem.truncation is None:
        t_rad, _ = default_truncation(problem.curve.length, problem.alpha,
                                      seed=problem.seed)
        probs = [
            StripProblem(curve=p.curve, width=p.width, alpha=p.alpha,
                         n_s=p.n_s, n_t=p.n_t, truncation=t_rad, seed=p.seed)
            for p in probs
        ]
    lam = np.array([solve_strip(p, k=k, tol=tol).eigenvalues[:k] for p in probs])
    extrapolated = lam[-1] + (lam[-1] - lam[-2]) / 3.0
    errbar = np.abs(lam[-1] - lam[-2]) / 3.0
    order = None
    monotone = bool(np.all(lam[1:] <= lam[:-1] + 1e-10))
    if levels >= 3:
        d1 = lam[-3] - lam[-2]
        d2 = lam[-2] - lam[-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(np.abs(d2) > 0, d1 / d2, np.nan)
        order = np.log2(np.abs(ratio))
    shapes = tuple((p.n_s, p.n_t) for p in probs)
    return ConvergenceReport(shapes, lam, extrapolated, errbar, order, monotone)
