"""Angular-mode fibers of the annulus / exterior-disk Robin Laplacian.

For a circle of perimeter L, the Robin Laplacian in parallel coordinates
block-diagonalizes over angular Fourier modes n.  Each block is a 1-D
weighted Sturm-Liouville problem on [0, d] (or a truncated [0, T] for the
exterior) with weight w(t) = 1 + 2*pi*t/L, potential (2*pi*n/L)^2 / w(t),
and Robin terms alpha*|psi(0)|^2 (plus alpha*w(d)*|psi(d)|^2 on the outer
rim when d is finite).  The fibers are discretized with P1 elements on a
smoothly graded mesh; the exterior-disk eigenvalues are cross-checked
against the independent Bessel secular equation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq

from . import bessel
from .eig import (
    GeneralizedEigResult,
    SymmetricBandedMatrix,
    shift_inertia,
    smallest_eigenpairs,
)
from .errors import MeshTooCoarse, SingularShift

TAU = 2.0 * np.pi

MIN_ELEMENTS = 32
DEFAULT_ELEMENTS = 512
# ||Av - lam*Mv||/||Mv|| of the best float64 vector bottoms out near
# eps*||A||*||v||/||Mv|| ~ 2e-10 on graded 512-element meshes, so 1e-9 is
# the tightest honest default; eigenvalue error goes as residual^2/gap.
FIBER_TOL = 1e-9
TRUNCATION_TOL = 1e-9
TRUNCATION_SAFETY = 12.0  # T = SAFETY / sqrt(-lambda_est)
NO_BOUND_STATE_FLOOR = -1e-8


def graded_mesh(extent: float, elements: int, alpha: float,
                strength: float | None = None) -> np.ndarray:
    """Node list on [0, extent], clustered at t=0 by a smooth exponential map.

    A smooth grading map (rather than a piecewise geometric/uniform one)
    keeps the P1 eigenvalue error on a clean C*h^2 model, which Richardson
    extrapolation then cancels.  Meshes nest under doubling of `elements`.
    """
    if strength is None:
        scale = max(abs(alpha), 1.0 / extent)
        strength = float(np.clip(np.log1p(extent * scale), 1.0, 6.0))
    xi = np.linspace(0.0, 1.0, elements + 1)
    return extent * np.expm1(strength * xi) / np.expm1(strength)


def element_gauss(nodes: np.ndarray, npts: int = 4):
    """Per-element Gauss points/weights and P1 shape values on a 1-D mesh.

    Returns (tq, wq, n0, n1) each of shape (elements, npts); n0/n1 are the
    hat-function values at the quadrature points.
    """
    gx, gw = np.polynomial.legendre.leggauss(npts)
    t0, t1 = nodes[:-1], nodes[1:]
    h = (t1 - t0)[:, None]
    tq = 0.5 * (t0 + t1)[:, None] + 0.5 * h * gx
    wq = 0.5 * h * gw
    n0 = (t1[:, None] - tq) / h
    n1 = (tq - t0[:, None]) / h
    return tq, wq, n0, n1


@dataclass(frozen=True)
class FiberProblem:
    """One angular fiber: mode n over a circle of perimeter boundary_length."""

    mode: int
    boundary_length: float
    width: float
    alpha: float
    truncation: float | None = None
    elements: int = DEFAULT_ELEMENTS
    grading: float | None = None

    def __post_init__(self):
        if not self.boundary_length > 0:
            raise ValueError("boundary_length must be positive")
        if not self.width > 0:
            raise ValueError("width must be positive")
        if math.isinf(self.width) and self.alpha >= 0:
            raise ValueError(
                "the exterior problem has no discrete spectrum for alpha >= 0; "
                "build fibers only for alpha < 0"
            )

    @property
    def extent(self) -> float:
        if math.isfinite(self.width):
            return self.width
        if self.truncation is None:
            raise ValueError("infinite width requires a truncation radius")
        return self.truncation

    def weight(self, t):
        return 1.0 + TAU * np.asarray(t, dtype=float) / self.boundary_length

    def potential(self, t):
        coef = (TAU * self.mode / self.boundary_length) ** 2
        return coef / self.weight(t)


def fiber_nodes(problem: FiberProblem) -> np.ndarray:
    return graded_mesh(problem.extent, problem.elements, problem.alpha,
                       problem.grading)


def assemble_fiber(problem: FiberProblem,
                   nodes: np.ndarray | None = None,
                   dirichlet_outer: bool | None = None,
                   dirichlet_inner: bool = False,
                   ) -> tuple[SymmetricBandedMatrix, SymmetricBandedMatrix]:
    """P1 stiffness/mass pencil of one fiber on its graded mesh.

    The truncated exterior (width = inf) gets a homogeneous Dirichlet
    condition at t = T, which over-estimates eigenvalues by form-domain
    inclusion, so truncation errors are one-sided.  `dirichlet_inner`
    replaces the Robin term at t=0 by a constraint (used by the
    Dirichlet-limit oracle).
    """
    if problem.elements < MIN_ELEMENTS:
        raise MeshTooCoarse(
            f"{problem.elements} elements < minimum {MIN_ELEMENTS}"
        )
    if nodes is None:
        nodes = fiber_nodes(problem)
    if dirichlet_outer is None:
        dirichlet_outer = math.isinf(problem.width)
    m = len(nodes)
    tq, wq, n0, n1 = element_gauss(nodes)
    h = np.diff(nodes)
    w = problem.weight(tq)
    q = problem.potential(tq)

    # stiffness with weight w; potential with plain dt measure; mass with w
    k_el = (wq * w).sum(axis=1) / h**2
    diag = np.zeros(m)
    sub = np.zeros(m - 1)
    mdiag = np.zeros(m)
    msub = np.zeros(m - 1)

    np.add.at(diag, np.arange(m - 1), k_el + (wq * q * n0 * n0).sum(axis=1))
    np.add.at(diag, np.arange(1, m), k_el + (wq * q * n1 * n1).sum(axis=1))
    sub += -k_el + (wq * q * n0 * n1).sum(axis=1)

    np.add.at(mdiag, np.arange(m - 1), (wq * w * n0 * n0).sum(axis=1))
    np.add.at(mdiag, np.arange(1, m), (wq * w * n1 * n1).sum(axis=1))
    msub += (wq * w * n0 * n1).sum(axis=1)

    if not dirichlet_inner:
        diag[0] += problem.alpha
    if dirichlet_outer:
        diag, sub, mdiag, msub = diag[:-1], sub[:-1], mdiag[:-1], msub[:-1]
    else:
        diag[-1] += problem.alpha * float(problem.weight(nodes[-1]))
    if dirichlet_inner:
        diag, sub, mdiag, msub = diag[1:], sub[1:], mdiag[1:], msub[1:]

    def pack(d, s):
        band = np.zeros((2, len(d)))
        band[0] = d
        band[1, :-1] = s
        sparse = sp.diags([s, d, s], [-1, 0, 1]).tocsc()
        return SymmetricBandedMatrix(band, sparse)

    return pack(diag, sub), pack(mdiag, msub)


@dataclass(frozen=True)
class RadialEigenfunction:
    """A fiber eigenpair sampled on its mesh (Dirichlet zero re-attached)."""

    mode: int
    eigenvalue: float
    nodes: np.ndarray
    values: np.ndarray
    residual: float

    @property
    def boundary_inner(self) -> float:
        return float(self.values[0])

    @property
    def boundary_outer(self) -> float:
        return float(self.values[-1])

    def weighted_h1_norm(self, boundary_length: float) -> float:
        """Discrete version of int (psi^2 + psi'^2) w dt (integrability check)."""
        w = 1.0 + TAU * self.nodes / boundary_length
        wmid = 0.5 * (w[:-1] + w[1:])
        h = np.diff(self.nodes)
        dpsi = np.diff(self.values) / h
        vmid = 0.5 * (self.values[:-1] + self.values[1:])
        return float(np.sum(h * wmid * (vmid**2 + dpsi**2)))

    def export_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "psi"])
            for t, v in zip(self.nodes, self.values):
                w.writerow([repr(float(t)), repr(float(v))])


@dataclass(frozen=True)
class FiberSolve:
    problem: FiberProblem
    nodes: np.ndarray
    result: GeneralizedEigResult

    def eigenfunction(self, index: int) -> RadialEigenfunction:
        vec = self.result.eigenvectors[:, index]
        dirichlet_outer = math.isinf(self.problem.width)
        values = np.append(vec, 0.0) if dirichlet_outer else vec
        # sign normalization: nonnegative at the inner boundary
        if values[0] < 0 or (values[0] == 0 and values[np.argmax(np.abs(values))] < 0):
            values = -values
        return RadialEigenfunction(
            mode=self.problem.mode,
            eigenvalue=float(self.result.eigenvalues[index]),
            nodes=self.nodes,
            values=values,
            residual=float(self.result.residuals[index]),
        )


def fiber_tolerance(a: SymmetricBandedMatrix, m: SymmetricBandedMatrix) -> float:
    """Residual tolerance actually representable for this pencil.

    The metric ||Av - lam*Mv||/||Mv|| of the best float64 eigenvector bottoms
    out near eps * max|A| / scale(M); narrow widths and fine graded meshes
    push that above the 1e-9 base line, so the request adapts.  Eigenvalue
    accuracy is unaffected (error ~ residual^2 / gap).
    """
    scale = float(np.max(np.abs(a.band))) / max(float(np.max(np.abs(m.band))), 1e-300)
    return max(FIBER_TOL, 100.0 * np.finfo(float).eps * scale)


def solve_fiber(problem: FiberProblem, k: int = 1, tol: float | None = None,
                seed: int = 0) -> FiberSolve:
    nodes = fiber_nodes(problem)
    a, m = assemble_fiber(problem, nodes)
    if tol is None:
        tol = fiber_tolerance(a, m)
    hint = -2.0 * problem.alpha**2 - 2.0 * abs(problem.alpha) - 2.0
    res = smallest_eigenpairs(a, m, k=min(k, a.n), tol=tol, seed=seed,
                              lower_hint=hint)
    return FiberSolve(problem, nodes, res)


def count_negative(problem: FiberProblem) -> int:
    """Exact number of negative fiber eigenvalues via LDL^T inertia at 0."""
    a, m = assemble_fiber(problem)
    for nudge in (0.0, -1e-12, -1e-10):
        try:
            return shift_inertia(a, m, nudge)
        except SingularShift:
            continue
    raise SingularShift("inertia probe at 0 kept breaking down")


def resolve_truncation(problem: FiberProblem, tol: float = TRUNCATION_TOL,
                       seed: int = 0) -> tuple[FiberSolve, dict]:
    """Pick the truncation radius T adaptively and certify it.

    T starts at 12/sqrt(alpha^2) and tracks the observed decay rate
    12/sqrt(-lambda).  The truncation error is then probed by extending the
    mesh out to 2T with a uniform tail at the last spacing: the extended
    space nests the original one, so the eigenvalue drop isolates the
    truncation effect at fixed resolution.  T doubles until that drop is
    below `tol`.  Returns the converged solve and a certificate
    {T, delta, doublings}.
    """
    t_rad = problem.truncation or TRUNCATION_SAFETY / abs(problem.alpha)
    doublings = 0
    solve = None
    delta = math.inf
    for _ in range(40):
        prob = replace(problem, truncation=t_rad)
        solve = solve_fiber(prob, k=1, seed=seed)
        lam = float(solve.result.eigenvalues[0])
        if lam > NO_BOUND_STATE_FLOOR:
            return solve, {"T": t_rad, "delta": 0.0, "doublings": doublings,
                           "note": "no bound state"}
        t_needed = TRUNCATION_SAFETY / math.sqrt(-lam)
        if t_needed > 1.05 * t_rad:
            t_rad = t_needed
            doublings += 1
            continue
        nodes = solve.nodes
        h_last = nodes[-1] - nodes[-2]
        n_tail = int(math.ceil(t_rad / h_last))
        nodes_ext = np.concatenate(
            [nodes, nodes[-1] + h_last * np.arange(1, n_tail + 1)]
        )
        a_ext, m_ext = assemble_fiber(prob, nodes_ext)
        hint = -2.0 * prob.alpha**2 - 2.0 * abs(prob.alpha) - 2.0
        probe = smallest_eigenpairs(a_ext, m_ext, k=1, seed=seed,
                                    lower_hint=hint)
        delta = lam - float(probe.eigenvalues[0])  # >= 0 by nesting
        if abs(delta) < tol:
            return solve, {"T": t_rad, "delta": float(delta),
                           "doublings": doublings}
        t_rad *= 2.0
        doublings += 1
    return solve, {"T": t_rad, "delta": float(delta), "doublings": doublings,
                   "note": "not converged"}


@dataclass(frozen=True)
class SpectrumEntry:
    mode: int
    index: int
    eigenvalue: float
    residual: float
    truncation: float | None
    elements: int
    multiplicity: int


@dataclass(frozen=True)
class Spectrum:
    boundary_length: float
    width: float
    alpha: float
    entries: tuple[SpectrumEntry, ...]
    essential_only: bool = False
    certificates: tuple[dict, ...] = ()

    @property
    def eigenvalues(self) -> np.ndarray:
        """Flat ascending list, multiplicities expanded."""
        vals = []
        for e in self.entries:
            vals.extend([e.eigenvalue] * e.multiplicity)
        return np.sort(np.array(vals))

    def export_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "lambda_index", "lambda", "residual", "T", "elements"])
            for e in self.entries:
                w.writerow([e.mode, e.index, repr(e.eigenvalue),
                            repr(e.residual),
                            "" if e.truncation is None else repr(e.truncation),
                            e.elements])


def disk_exterior_spectrum(boundary_length: float, alpha: float,
                           kmax: int = 4, elements: int = DEFAULT_ELEMENTS,
                           tol: float | None = None, seed: int = 0,
                           truncation: float | None = None) -> Spectrum:
    """All negative eigenvalues of the exterior-disk Robin Laplacian.

    Fibers n = 0, 1, 2, ... are solved until one contributes no negative
    eigenvalue; |n| >= 1 entries carry multiplicity two (modes +-n agree
    identically).  For alpha >= 0 the discrete spectrum is empty and the
    result is flagged essential-only.
    """
    if alpha >= 0:
        return Spectrum(boundary_length, math.inf, alpha, (), essential_only=True)
    entries: list[SpectrumEntry] = []
    certs: list[dict] = []
    t_current = truncation
    for n in range(0, 64):
        prob = FiberProblem(mode=n, boundary_length=boundary_length,
                            width=math.inf, alpha=alpha, truncation=t_current,
                            elements=elements)
        if truncation is None:
            solve, cert = resolve_truncation(prob, seed=seed)
            prob = solve.problem
            t_current = prob.truncation
            certs.append({"mode": n, **cert})
        n_neg = count_negative(prob)
        if n_neg == 0:
            break
        solve = solve_fiber(prob, k=n_neg, tol=tol, seed=seed)
        for i in range(n_neg):
            lam = float(solve.result.eigenvalues[i])
            if lam >= 0.0:
                continue
            entries.append(SpectrumEntry(
                mode=n, index=i, eigenvalue=lam,
                residual=float(solve.result.residuals[i]),
                truncation=prob.truncation,
                elements=elements,
                multiplicity=1 if n == 0 else 2,
            ))
    entries.sort(key=lambda e: e.eigenvalue)
    if entries and entries[0].mode != 0:
        raise AssertionError(
            "exterior ground state did not come from the radial fiber"
        )
    return Spectrum(boundary_length, math.inf, alpha, tuple(entries),
                    certificates=tuple(certs))


def annulus_spectrum(boundary_length: float, d: float, alpha: float,
                     kmax: int = 6, elements: int = DEFAULT_ELEMENTS,
                     tol: float | None = None, seed: int = 0) -> Spectrum:
    """kmax lowest eigenvalues of the Robin annulus via fiber merge.

    The lowest eigenvalue always comes from the radial fiber n=0 (checked),
    and fiber minima increase with |n|, so scanning stops as soon as a
    fiber opens above the current kmax-th merged value.
    """
    if not math.isfinite(d):
        raise ValueError("annulus_spectrum requires a finite width")
    entries: list[SpectrumEntry] = []
    for n in range(0, 256):
        prob = FiberProblem(mode=n, boundary_length=boundary_length,
                            width=d, alpha=alpha, elements=elements)
        k = min(kmax, elements - 1)
        solve = solve_fiber(prob, k=k, tol=tol, seed=seed)
        for i, lam in enumerate(solve.result.eigenvalues):
            entries.append(SpectrumEntry(
                mode=n, index=i, eigenvalue=float(lam),
                residual=float(solve.result.residuals[i]),
                truncation=None, elements=elements,
                multiplicity=1 if n == 0 else 2,
            ))
        merged = sorted(
            lam for e in entries for lam in [e.eigenvalue] * e.multiplicity
        )
        if len(merged) >= kmax and solve.result.eigenvalues[0] > merged[kmax - 1]:
            break
    entries.sort(key=lambda e: e.eigenvalue)
    lowest = entries[0]
    if lowest.mode != 0:
        raise AssertionError(
            "ground state did not come from the radial fiber; mesh too coarse?"
        )
    # keep only what contributes to the kmax lowest values
    kept, count = [], 0
    for e in entries:
        if count >= kmax:
            break
        kept.append(e)
        count += e.multiplicity
    return Spectrum(boundary_length, d, alpha, tuple(kept))


def secular_oracle(mode: int, radius: float, alpha: float) -> float | None:
    """Exact exterior-disk fiber eigenvalue from the Bessel secular equation.

    Solves sqrt(-lam)*K_n'(sqrt(-lam)*R) = alpha*K_n(sqrt(-lam)*R) for
    lam in (-alpha^2, 0) using the scaled in-repo kernels; returns None when
    no negative root exists (a legitimate outcome: the fiber has no bound
    state).
    """
    if alpha >= 0:
        raise ValueError("secular oracle is defined for alpha < 0 only")
    if mode not in (0, 1):
        raise ValueError("secular oracle implements modes 0 and 1 only")

    def f(k: float) -> float:
        kn, dkn = bessel.kn_and_deriv_scaled(mode, k * radius)
        return k * dkn - alpha * kn

    k_hi = abs(alpha)
    grid = np.concatenate([
        np.geomspace(1e-8 * k_hi, 0.1 * k_hi, 160),
        np.linspace(0.1 * k_hi, k_hi, 400),
    ])
    fv = np.array([f(k) for k in grid])
    sign_change = np.nonzero(np.sign(fv[:-1]) * np.sign(fv[1:]) < 0)[0]
    if len(sign_change) == 0:
        return None
    i = sign_change[0]
    k_root = brentq(f, grid[i], grid[i + 1], xtol=1e-15, rtol=8.9e-16)
    return -k_root * k_root


def second_bound_state_threshold(radius: float, alpha_floor: float = -64.0,
                                 tol: float = 1e-6) -> float:
    """Weakest coupling alpha* below which the exterior disk has a second
    bound state, found by bisecting the |n|=1 secular root existence.

    The scan lands on -1/radius; the threshold is detected numerically
    rather than assumed.
    """
    lo = alpha_floor       # bound state exists here
    hi = -1e-12            # none here
    if secular_oracle(1, radius, lo) is None:
        raise ValueError(f"no second bound state even at alpha={lo}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if secular_oracle(1, radius, mid) is None:
            hi = mid
        else:
            lo = mid
    return lo


def lambda2_vs_perimeter(alpha: float, perimeters,
                         elements: int = DEFAULT_ELEMENTS,
                         seed: int = 0) -> list[dict]:
    """lambda_2 of the exterior disk as a function of its perimeter.

    Entries with no second bound state are reported with lam2 = None rather
    than a nonnegative number; each solved value is cross-checked against
    the |n|=1 secular root.
    """
    rows = []
    for perim in perimeters:
        radius = perim / TAU
        oracle = secular_oracle(1, radius, alpha)
        if oracle is None:
            rows.append({"perimeter": perim, "lam2": None, "oracle": None,
                         "note": "no second bound state"})
            continue
        prob = FiberProblem(mode=1, boundary_length=perim, width=math.inf,
                            alpha=alpha, elements=elements)
        solve, cert = resolve_truncation(prob, seed=seed)
        lam = float(solve.result.eigenvalues[0])
        rows.append({"perimeter": perim, "lam2": lam, "oracle": oracle,
                     "T": cert["T"], "note": ""})
    return rows


def angular_project(u_grid: np.ndarray, boundary_length: float,
                    mode: int) -> np.ndarray:
    """Fourier coefficient profile of a (t, s) grid sample against mode n.

    Returns (1/sqrt(L)) * int u(s', t) exp(-2*pi*i*n*s'/L) ds' per t-row,
    i.e. the coefficient against the orthonormal basis e_n; the s-integral
    is the trapezoidal rule, which is exact for grid-resolved modes.
    """
    u_grid = np.asarray(u_grid)
    n_s = u_grid.shape[1]
    coeffs = np.fft.fft(u_grid, axis=1) / n_s
    idx = mode % n_s
    return coeffs[:, idx] * boundary_length / math.sqrt(boundary_length)
