"""Smooth closed curves built from curvature profiles.

Curves are specified by their signed curvature kappa(s) = 2*pi/L + sum of
cosine modes, never by point lists: closure then becomes a checkable
consequence of the profile, and the tangent angle theta(s) = int_0^s kappa
is available in closed form.  Positions come from spectral integration of
the unit tangent, so all the identities the transplantation arguments rely
on (total curvature 2*pi, int t ds = 0, int t*kappa ds = 0) hold to machine
precision on the discrete nodes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import LineString

from .errors import (
    ClosureError,
    DegenerateCurve,
    SelfIntersectionError,
    WidthExceedsCritical,
)

TAU = 2.0 * np.pi

DEFAULT_CLOSURE_TOL = 1e-10       # relative to L
DEFAULT_SWEEP_NODES = 2048        # polyline resolution for injectivity tests


@dataclass(frozen=True)
class Mode:
    """One cosine harmonic of a curvature profile: a*cos(2*pi*k*s/L + phase)."""

    k: int
    amplitude: float
    phase: float = 0.0


@dataclass(frozen=True)
class CurvatureProfile:
    """Periodic curvature kappa(s) = 2*pi/L + sum of cosine modes on [0, L].

    The constant term is pinned to 2*pi/L by tangent-angle closure, so it is
    not a free parameter; a k=0 mode is rejected for the same reason.
    """

    length: float
    modes: tuple[Mode, ...] = ()

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError(f"profile length must be positive, got {self.length}")
        object.__setattr__(self, "modes", tuple(
            Mode(int(m.k), float(m.amplitude), float(m.phase)) for m in self.modes
        ))
        for m in self.modes:
            if m.k < 1:
                raise ValueError(
                    "harmonic index k must be >= 1; the constant term is fixed "
                    "at 2*pi/L by closure"
                )

    @property
    def c0(self) -> float:
        return TAU / self.length

    @property
    def max_harmonic(self) -> int:
        return max((m.k for m in self.modes), default=0)

    def kappa(self, s):
        s = np.asarray(s, dtype=float)
        out = np.full(s.shape, self.c0)
        for m in self.modes:
            w = TAU * m.k / self.length
            out += m.amplitude * np.cos(w * s + m.phase)
        return out

    def theta(self, s):
        """Tangent angle theta(s) = int_0^s kappa, in closed form."""
        s = np.asarray(s, dtype=float)
        out = self.c0 * s
        for m in self.modes:
            w = TAU * m.k / self.length
            out += (m.amplitude / w) * (np.sin(w * s + m.phase) - np.sin(m.phase))
        return out

    @classmethod
    def circle(cls, length: float = TAU) -> "CurvatureProfile":
        return cls(length=length)

    @classmethod
    def from_samples(cls, length: float, samples, tol: float = 1e-8) -> "CurvatureProfile":
        """Build a band-limited profile from uniform samples of kappa.

        The sample mean must equal 2*pi/L (total curvature) within `tol`.
        """
        samples = np.asarray(samples, dtype=float)
        n = len(samples)
        mean = samples.mean()
        if abs(mean - TAU / length) > tol * max(1.0, TAU / length):
            raise ValueError(
                f"sample mean {mean:.6e} != 2*pi/L = {TAU / length:.6e}; "
                "total curvature of a closed curve is forced to 2*pi"
            )
        coef = np.fft.rfft(samples - mean) / n
        modes = []
        cutoff = 1e-13 * max(1.0, np.max(np.abs(samples)))
        for k in range(1, len(coef)):
            amp = 2.0 * abs(coef[k]) if 2 * k != n else abs(coef[k])
            if amp > cutoff:
                modes.append(Mode(k, amp, float(np.angle(coef[k]))))
        return cls(length=length, modes=tuple(modes))

    def to_dict(self) -> dict:
        return {
            "length": self.length,
            "modes": [
                {"k": m.k, "amplitude": m.amplitude, "phase": m.phase}
                for m in self.modes
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CurvatureProfile":
        modes = tuple(
            Mode(int(m["k"]), float(m["amplitude"]), float(m.get("phase", 0.0)))
            for m in doc.get("modes", [])
        )
        return cls(length=float(doc["length"]), modes=modes)


def read_profile(path) -> tuple[CurvatureProfile, int | None]:
    """Read a profile document: {"length": L, "modes": [...], "nodes": N}."""
    with open(path) as fh:
        doc = json.load(fh)
    nodes = doc.get("nodes")
    return CurvatureProfile.from_dict(doc), (int(nodes) if nodes is not None else None)


def _fourier_coeffs(samples: np.ndarray) -> np.ndarray:
    return np.fft.fft(samples) / len(samples)


def _fourier_eval(coeffs: np.ndarray, length: float, s_eval: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of uniform samples at arbitrary s."""
    n = len(coeffs)
    freq = np.fft.fftfreq(n, d=1.0 / n)  # integer mode numbers
    s_eval = np.atleast_1d(np.asarray(s_eval, dtype=float))
    shape = s_eval.shape
    s_flat = s_eval.ravel()
    out = np.zeros(s_flat.shape, dtype=complex)
    # split the Nyquist mode symmetrically for even n
    w = np.ones(n)
    if n % 2 == 0:
        nyq = n // 2
        w[nyq] = 0.5
        out += 0.5 * coeffs[nyq] * np.exp(1j * TAU * (-freq[nyq]) * s_flat / length)
    for start in range(0, n, 64):
        f = freq[start:start + 64]
        c = coeffs[start:start + 64] * w[start:start + 64]
        out += np.exp(1j * TAU * np.outer(s_flat, f) / length) @ c
    return out.reshape(shape)


@dataclass(frozen=True, eq=False)
class PlanarCurve:
    """Discretized smooth closed curve at uniform arclength nodes.

    positions/tangents/normals/kappa are sampled at s_i = i*L/N; tangents are
    exactly unit by construction and normals point out of the enclosed domain.
    """

    length: float
    s: np.ndarray
    positions: np.ndarray
    tangents: np.ndarray
    normals: np.ndarray
    kappa: np.ndarray
    theta: np.ndarray
    closure_residual: float
    frenet_residual: float
    profile: CurvatureProfile | None = None
    _tang_coeffs: np.ndarray = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.s)

    @property
    def tang_c(self) -> np.ndarray:
        """Complexified tangent t = tau_1 + i*tau_2."""
        return self.tangents[:, 0] + 1j * self.tangents[:, 1]

    @property
    def norm_c(self) -> np.ndarray:
        """Complexified outer normal n = nu_1 + i*nu_2 = -i*t."""
        return self.normals[:, 0] + 1j * self.normals[:, 1]

    def kappa_at(self, s):
        if self.profile is not None:
            return self.profile.kappa(s)
        return _fourier_eval(_fourier_coeffs(self.kappa), self.length, s).real

    def theta_at(self, s):
        if self.profile is not None:
            return self.profile.theta(s)
        s = np.asarray(s, dtype=float)
        periodic = self.theta - TAU * self.s / self.length
        vals = _fourier_eval(_fourier_coeffs(periodic), self.length, s).real
        return vals + TAU * s / self.length

    def position_at(self, s):
        """Positions at arbitrary arclengths by spectral integration of t."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        coeffs = self._tangent_coeffs()
        n = len(coeffs)
        freq = np.fft.fftfreq(n, d=1.0 / n)
        omega = 1j * TAU * freq / self.length
        anti = np.zeros(n, dtype=complex)
        nz = freq != 0
        anti[nz] = coeffs[nz] / omega[nz]
        vals = _fourier_eval(anti, self.length, s)
        base = _fourier_eval(anti, self.length, np.array([0.0]))[0]
        z = (self.positions[0, 0] + 1j * self.positions[0, 1]) + (vals - base) + coeffs[0] * s
        return np.stack([z.real, z.imag], axis=-1)

    def _tangent_coeffs(self) -> np.ndarray:
        if self._tang_coeffs is None:
            object.__setattr__(self, "_tang_coeffs", _fourier_coeffs(self.tang_c))
        return self._tang_coeffs

    def export_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "x", "y", "tau_x", "tau_y", "nu_x", "nu_y", "kappa"])
            for i in range(self.n_nodes):
                w.writerow([
                    repr(float(self.s[i])),
                    repr(float(self.positions[i, 0])), repr(float(self.positions[i, 1])),
                    repr(float(self.tangents[i, 0])), repr(float(self.tangents[i, 1])),
                    repr(float(self.normals[i, 0])), repr(float(self.normals[i, 1])),
                    repr(float(self.kappa[i])),
                ])


@dataclass(frozen=True)
class CurvatureStats:
    min_kappa: float
    max_kappa: float
    norm_kappa_minus: float
    total_curvature: float


@dataclass(frozen=True)
class StripDomainSpec:
    """A validated (curve, width) pair ready for strip problems."""

    curve: PlanarCurve
    width: float
    convex: bool
    critical: float
    injectivity_checked: bool


def _signed_area(positions: np.ndarray) -> float:
    x, y = positions[:, 0], positions[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _polyline_simple(points: np.ndarray) -> bool:
    ring = np.vstack([points, points[:1]])
    return LineString(ring).is_simple


def build_curve(profile: CurvatureProfile, n_nodes: int,
                closure_tol: float | None = None) -> PlanarCurve:
    """Integrate a curvature profile into a closed counter-clockwise curve.

    Raises ClosureError when the tangent integral does not vanish (reported
    with its residual) and SelfIntersectionError when the resulting polyline
    is not simple.
    """
    if n_nodes < 16:
        raise ValueError(f"need at least 16 nodes, got {n_nodes}")
    if profile.max_harmonic and n_nodes < 8 * profile.max_harmonic:
        raise ValueError(
            f"n_nodes={n_nodes} under-resolves harmonic {profile.max_harmonic}; "
            f"need >= {8 * profile.max_harmonic}"
        )
    L = profile.length
    tol = (closure_tol if closure_tol is not None else DEFAULT_CLOSURE_TOL) * L
    s = np.arange(n_nodes) * (L / n_nodes)
    theta = profile.theta(s)
    kappa = profile.kappa(s)
    tang = np.exp(1j * theta)

    mean = tang.mean()  # trapezoid of t over the period, up to factor L
    residual = abs(mean) * L
    if residual > tol:
        raise ClosureError(residual, tol)

    # sigma = antiderivative of t, spectral; the residual mean contributes a
    # linear drift sigma(L)-sigma(0) = L*mean which is the reported residual
    coeffs = np.fft.fft(tang) / n_nodes
    freq = np.fft.fftfreq(n_nodes, d=1.0 / n_nodes)
    anti = np.zeros(n_nodes, dtype=complex)
    nz = freq != 0
    anti[nz] = coeffs[nz] / (1j * TAU * freq[nz] / L)
    z = np.fft.ifft(anti * n_nodes) + mean * s
    z -= z.mean()
    positions = np.stack([z.real, z.imag], axis=1)

    tangents = np.stack([tang.real, tang.imag], axis=1)
    normals = np.stack([tangents[:, 1], -tangents[:, 0]], axis=1)

    if _signed_area(positions) <= 0:
        raise SelfIntersectionError("curve is not positively oriented")
    if not _polyline_simple(positions):
        raise SelfIntersectionError("curve polyline intersects itself")

    # spectral Frenet check: t' + kappa*n = i*kappa*t - t' should vanish
    dcoef = coeffs * (1j * TAU * freq / L)
    tprime = np.fft.ifft(dcoef * n_nodes)
    frenet = float(np.max(np.abs(tprime - 1j * kappa * tang)))

    return PlanarCurve(
        length=L, s=s, positions=positions, tangents=tangents, normals=normals,
        kappa=kappa, theta=theta, closure_residual=residual,
        frenet_residual=frenet, profile=profile,
    )


def curvature_stats(curve: PlanarCurve) -> CurvatureStats:
    kmin = float(np.min(curve.kappa))
    kmax = float(np.max(curve.kappa))
    total = float(np.mean(curve.kappa) * curve.length)
    return CurvatureStats(
        min_kappa=kmin,
        max_kappa=kmax,
        norm_kappa_minus=max(0.0, -kmin),
        total_curvature=total,
    )


def _sweep_curve(curve: PlanarCurve, sweep_nodes: int) -> PlanarCurve:
    if curve.n_nodes >= sweep_nodes or curve.profile is None:
        return curve
    return build_curve(curve.profile, sweep_nodes)


def offset_injective(curve: PlanarCurve, d: float,
                     sweep_nodes: int = DEFAULT_SWEEP_NODES) -> bool:
    """Global injectivity of (s,t) -> sigma(s) + t*nu(s) on [0,L) x (0,d).

    Raises DegenerateCurve when the local Jacobian 1 + kappa*t is not
    positive up to t=d (the global polyline test is then meaningless).
    """
    dense = _sweep_curve(curve, sweep_nodes)
    if np.min(1.0 + dense.kappa * d) <= 0.0:
        raise DegenerateCurve(
            f"offset Jacobian 1 + kappa*t vanishes before t = {d:.6g}"
        )
    outer = dense.positions + d * dense.normals
    return _polyline_simple(outer)


def critical_width(curve: PlanarCurve, search_tol: float | None = None) -> float:
    """Largest width d* for which the parallel map stays injective.

    Returns inf for convex curves (kappa >= 0).  Otherwise bisects between a
    known-valid and known-invalid width; the result never exceeds the local
    Jacobian bound 1/max(0, -min kappa).
    """
    stats = curvature_stats(curve)
    if stats.min_kappa >= 0.0:
        return math.inf
    tol = search_tol if search_tol is not None else 1e-6 * curve.length
    hi = 1.0 / stats.norm_kappa_minus
    dense = _sweep_curve(curve, DEFAULT_SWEEP_NODES)

    def valid(d: float) -> bool:
        try:
            return offset_injective(dense, d, sweep_nodes=dense.n_nodes)
        except DegenerateCurve:
            return False

    lo = min(tol, 0.25 * hi)
    if not valid(lo):
        raise DegenerateCurve(
            f"offset map already non-injective at width {lo:.3e}"
        )
    if valid(hi * (1.0 - 1e-12)):
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if valid(mid):
            lo = mid
        else:
            hi = mid
    return lo


def angle_condition(curve: PlanarCurve) -> bool:
    """Check int_s^{s'} kappa > -pi for all node pairs s < s' (prefix scan)."""
    theta = curve.theta
    running_max = np.maximum.accumulate(theta)
    worst = np.min(theta[1:] - running_max[:-1]) if curve.n_nodes > 1 else 0.0
    return bool(worst > -np.pi)


def offset_boundary(curve: PlanarCurve, d: float,
                    n_nodes: int | None = None) -> PlanarCurve:
    """Outer parallel curve s -> sigma(s) + d*nu(s), resampled to arclength.

    The new arclength is st(s) = s + d*theta(s) (exact, since the arclength
    element is (1 + d*kappa) ds), the induced curvature kappa/(1 + d*kappa),
    and the total length L + 2*pi*d.
    """
    if d < 0:
        raise ValueError("offset width must be nonnegative")
    stats = curvature_stats(curve)
    if stats.min_kappa < 0:
        if 1.0 + stats.min_kappa * d <= 0.0:
            raise WidthExceedsCritical(
                f"width {d:.6g} >= Jacobian bound {1.0 / stats.norm_kappa_minus:.6g}"
            )
        if not offset_injective(curve, d):
            raise WidthExceedsCritical(
                f"offset at width {d:.6g} self-intersects (d >= d*)"
            )
    n = n_nodes if n_nodes is not None else curve.n_nodes
    new_len = curve.length + TAU * d

    # invert st(s) = s + d*theta(s) by Newton; st' = 1 + d*kappa > 0
    st_targets = np.arange(n) * (new_len / n)
    s_guess = st_targets * (curve.length / new_len)
    for _ in range(60):
        f = s_guess + d * curve.theta_at(s_guess) - st_targets
        fp = 1.0 + d * curve.kappa_at(s_guess)
        step = f / fp
        s_guess = s_guess - step
        if np.max(np.abs(step)) < 1e-14 * curve.length:
            break

    theta = curve.theta_at(s_guess)
    kappa_src = curve.kappa_at(s_guess)
    kappa_new = kappa_src / (1.0 + d * kappa_src)
    tang = np.exp(1j * theta)
    tangents = np.stack([tang.real, tang.imag], axis=1)
    normals = np.stack([tangents[:, 1], -tangents[:, 0]], axis=1)
    positions = curve.position_at(s_guess) + d * normals

    return PlanarCurve(
        length=new_len,
        s=st_targets,
        positions=positions,
        tangents=tangents,
        normals=normals,
        kappa=kappa_new,
        theta=theta,
        closure_residual=curve.closure_residual,
        frenet_residual=curve.frenet_residual,
        profile=None,
    )


def validate_strip(curve: PlanarCurve, width: float) -> StripDomainSpec:
    """Validity record for a (curve, width) pair per the domain rules."""
    stats = curvature_stats(curve)
    convex = stats.min_kappa >= 0.0
    if math.isinf(width):
        if not convex:
            raise WidthExceedsCritical(
                "infinite width requires a convex curve (kappa >= 0)"
            )
        return StripDomainSpec(curve, width, True, math.inf, True)
    crit = critical_width(curve)
    if not convex and width >= crit:
        raise WidthExceedsCritical(
            f"width {width:.6g} >= critical width {crit:.6g}"
        )
    return StripDomainSpec(curve, width, convex, crit, True)
