"""Numerical inversion of resolvent amplitudes to the time domain.

The time evolution amplitude is recovered from

    U(t) = (1/2*pi*i) * integral_{+inf+i*eps}^{-inf+i*eps} dz G(z) e^{-izt},

evaluated along (the limit onto) the real axis, where all singularities of
the damped problem lie below.  Three ingredients keep the truncated
quadrature at the 1e-6..1e-8 level that the cross-method checks need:

* asymptote subtraction -- a three-pole rational function matching the
  exact alpha/z + c1/z**2 + c2/z**3 expansion of G is peeled off and
  inverted analytically, so the numerical remainder decays like z**-4
  (z**-7/2 for the band-edge case) and the window truncation error is
  negligible;
* a uniform far-field grid summed with trapezoid weights and evaluated for
  all output times at once by a chirp-z transform;
* square-root substituted Gauss-Legendre panels straddling the band edge,
  where the integrand has an integrable 1/sqrt kink: x = omega_e +/- u**2
  makes the panel integrands smooth, which is the clustered-node refinement
  the 1/sqrt singularity calls for, made exact.

Node placement is deterministic: identical spec and grid give bit-identical
output regardless of evaluation order.

The module also carries an independent cross-check: the band-edge continuum
replaced by a few thousand discrete modes, integrated as a non-hermitian
Schroedinger system with a fixed-step RK4.  The two routes share nothing
but the spectral density J(omega) = C / (pi * sqrt(omega - omega_e)), whose
Hilbert transform reproduces the -i*C/sqrt(z - omega_e) self-energy exactly
(substituting omega = omega_e + s**2 turns the defining integral into
(2C/pi) * int ds / (z - omega_e - s**2) = -i*C/sqrt(z - omega_e)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.signal import czt

from .errors import AccuracyError, ParameterDomainError, StepperError
from .resolvent import (
    BandEdgeReservoir,
    FlatReservoir,
    ReservoirKind,
    SystemParams,
    amplitude_asymptotics,
    resolvent_amplitudes,
)

__all__ = [
    "ContourSpec",
    "NoJumpSolution",
    "invert_contour",
    "nojump_populations",
    "discretized_modes_oracle",
    "discretized_self_energy",
]

_GL_ORDER = 16


@dataclass(frozen=True)
class ContourSpec:
    """Quadrature layout for the inversion contour.

    ``window_center = None`` picks the band edge (band-edge reservoir) or
    the midpoint of laser and atom frequencies (flat reservoir).
    ``offset`` elevates the contour to Im(z) = offset; the result is
    compensated by exp(offset * t), so offset > 0 trades large-t noise
    amplification for distance from real-axis structure.
    ``edge_refinement`` is the number of Gauss-Legendre panels per side of
    the band edge (16 nodes each); their open nodes never touch the edge
    itself, so the grid excludes x = omega_e exactly as required.
    """

    window_halfwidth: float = 300.0
    window_center: Optional[float] = None
    offset: float = 0.0
    grid_points: int = 600_001
    edge_refinement: int = 24
    edge_halfwidth: float = 0.5
    asymptote_subtraction: bool = True

    def __post_init__(self):
        if self.window_halfwidth <= 0:
            raise ParameterDomainError("window_halfwidth must be positive")
        if self.grid_points < 2:
            raise ParameterDomainError("grid_points must be >= 2")
        if self.offset < 0:
            raise ParameterDomainError("contour offset must be >= 0")
        if self.edge_refinement < 1 or self.edge_halfwidth <= 0:
            raise ParameterDomainError("edge refinement parameters must be positive")


@dataclass
class NoJumpSolution:
    """Conditional (no-emission) evolution on a uniform time grid.

    ``norm`` is the no-jump probability P(t); ``pi0_c`` is fixed by the
    closure identity P - pi0_a - pi0_b.  ``p_inf_estimate`` is P at the end
    of the grid, a valid trapped-population estimate once transients have
    decayed.
    """

    t: np.ndarray
    u_aa: np.ndarray
    u_ba: np.ndarray
    pi0_a: np.ndarray
    pi0_b: np.ndarray
    pi0_c: np.ndarray
    norm: np.ndarray
    p_inf_estimate: float
    gamma: float

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])


# ---------------------------------------------------------------------------
# subtraction of the analytically invertible large-z part


class _Subtraction:
    """Rational function A1/(z-z0) + A2/(z-z0)**2 + A3/(z-z0)**3 matching
    the alpha/z + c1/z**2 + c2/z**3 expansion of G, with pole z0 kept at
    least ``lam_min`` below the axis.  Its inverse transform is
    exp(-i*z0*t) * (A1 - i*A2*t - A3*t**2/2)."""

    def __init__(self, alpha, c1, c2, center, lam_min):
        alpha = complex(alpha)
        c1 = complex(c1)
        c2 = complex(c2)
        if alpha != 0:
            # roots of alpha*z0**2 - 2*c1*z0 + c2: zero the z**-3 residual
            disc = np.sqrt(complex(c1 * c1 - alpha * c2))
            z0 = min((c1 + disc) / alpha, (c1 - disc) / alpha, key=lambda w: w.imag)
        elif c1 != 0:
            z0 = c2 / (2.0 * c1)
        else:
            z0 = complex(center)
        if z0.imag > -lam_min:
            z0 = complex(z0.real, -lam_min)
        self.z0 = z0
        self.a1 = alpha
        self.a2 = c1 - alpha * z0
        self.a3 = c2 - 2.0 * c1 * z0 + alpha * z0 * z0

    def __call__(self, z):
        u = 1.0 / (np.asarray(z, dtype=complex) - self.z0)
        return self.a1 * u + self.a2 * u * u + self.a3 * u * u * u

    def inverse(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(-1j * self.z0 * t) * (self.a1 - 1j * self.a2 * t - 0.5 * self.a3 * t * t)


class _ZeroSubtraction:
    z0 = complex(0.0)

    def __call__(self, z):
        return np.zeros(np.shape(z), dtype=complex)

    def inverse(self, t):
        return np.zeros(np.shape(t), dtype=complex)


def _probe_asymptotics(g: Callable, center: float, halfwidth: float):
    """Estimate (alpha, c1, c2) of G ~ alpha/z + c1/z**2 + c2/z**3.

    Fits h(x) = x*G(x) = alpha + c1/x + c2/x**2 through three probes per
    side of the window (a Vandermonde solve in 1/x, which does not amplify
    low-order errors into c2), then averages the sides."""
    x1 = max(1.0e6, 1.0e4 * (abs(center) + halfwidth))
    coeffs = []
    for sgn in (1.0, -1.0):
        xs = sgn * x1 * np.array([1.0, 2.0, 4.0])
        h = np.array([complex(np.asarray(g(complex(x))).reshape(())) * x for x in xs])
        vand = np.vander(1.0 / xs, 3, increasing=True)
        coeffs.append(np.linalg.solve(vand, h))
    mean = 0.5 * (coeffs[0] + coeffs[1])
    return complex(mean[0]), complex(mean[1]), complex(mean[2])


# ---------------------------------------------------------------------------
# node layout and quadrature


def _gauss_panels(a: float, b: float, n_panels: int, order: int = _GL_ORDER):
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, n_panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    weights = (half[:, None] * wg[None, :]).ravel()
    return nodes, weights


def _layout(spec: ContourSpec, center: float, edge_point: Optional[float]):
    """Segment list [(start, n, dx)] plus edge-panel nodes/weights."""
    x_lo = center - spec.window_halfwidth
    x_hi = center + spec.window_halfwidth
    dx_nom = 2.0 * spec.window_halfwidth / (spec.grid_points - 1)
    segments = []
    edge_nodes = np.empty(0)
    edge_weights = np.empty(0)
    h = spec.edge_halfwidth
    if edge_point is not None and (x_lo + 2.0 * h) < edge_point < (x_hi - 2.0 * h):
        bounds = [(x_lo, edge_point - h), (edge_point + h, x_hi)]
        un, uw = _gauss_panels(0.0, math.sqrt(h), spec.edge_refinement)
        edge_nodes = np.concatenate([edge_point - un**2, edge_point + un**2])
        edge_weights = np.concatenate([2.0 * un * uw, 2.0 * un * uw])
    else:
        bounds = [(x_lo, x_hi)]
    for a, b in bounds:
        n = max(2, int(round((b - a) / dx_nom)) + 1)
        segments.append((a, n, (b - a) / (n - 1)))
    return segments, edge_nodes, edge_weights


def _is_uniform(t: np.ndarray) -> bool:
    if len(t) < 3:
        return True
    steps = np.diff(t)
    return bool(np.all(np.abs(steps - steps[0]) <= 1e-9 * max(abs(steps[0]), 1e-300)))


def _eval_integrand(g, sub, x, eps):
    z = x + 1j * eps if eps else x
    vals = np.asarray(g(z), dtype=complex) - sub(z)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        raise AccuracyError(
            f"non-finite integrand at contour node x={x[np.argmax(bad)]!r}"
        )
    return vals


def _quadrature_sum(weighted_nodes, t):
    """sum_j c_j exp(-i x_j t_m) for every t_m, czt-accelerated on uniform
    segments, chunked dense products for the edge panels."""
    out = np.zeros(len(t), dtype=complex)
    uniform = _is_uniform(t)
    dt_out = t[1] - t[0] if len(t) > 1 else 0.0
    for kind, payload in weighted_nodes:
        if kind == "seg" and uniform and len(t) > 1:
            a, dx, cvals = payload
            n = len(cvals)
            pre = cvals * np.exp(-1j * np.arange(n) * dx * t[0])
            spun = czt(pre, m=len(t), w=complex(np.exp(-1j * dx * dt_out)), a=1.0 + 0.0j)
            out += np.exp(-1j * a * t) * spun
        else:
            if kind == "seg":
                a, dx, cvals = payload
                xs = a + dx * np.arange(len(cvals))
            else:
                xs, cvals = payload
            for i0 in range(0, len(t), 4096):
                tc = t[i0:i0 + 4096]
                out[i0:i0 + 4096] += np.exp(-1j * np.outer(tc, xs)) @ cvals
    return out


def _invert_many(gs: Sequence[Callable], spec: ContourSpec, t_grid,
                 asymptotics: Sequence[Optional[tuple]],
                 center: float, edge_point: Optional[float]):
    t = np.asarray(t_grid, dtype=float)
    if np.any(t < 0):
        raise ParameterDomainError("t_grid must be nonnegative")
    segments, ex, ew = _layout(spec, center, edge_point)
    dx_min = min(s[2] for s in segments)
    lam_min = max(50.0 * dx_min, 0.05)
    results = []
    for g, asym in zip(gs, asymptotics):
        if spec.asymptote_subtraction:
            if asym is None:
                asym = _probe_asymptotics(g, center, spec.window_halfwidth)
            sub = _Subtraction(*asym, center=center, lam_min=lam_min)
        else:
            sub = _ZeroSubtraction()
        weighted = []
        for a, n, dx in segments:
            xs = a + dx * np.arange(n)
            vals = _eval_integrand(g, sub, xs, spec.offset) * dx
            vals[0] *= 0.5
            vals[-1] *= 0.5
            weighted.append(("seg", (a, dx, vals)))
        if len(ex):
            weighted.append(("edge", (ex, _eval_integrand(g, sub, ex, spec.offset) * ew)))
        quad = _quadrature_sum(weighted, t)
        comp = np.exp(spec.offset * t) if spec.offset else 1.0
        results.append(sub.inverse(t) + (1j / (2.0 * math.pi)) * comp * quad)
    return results


def invert_contour(g: Callable, spec: ContourSpec, t_grid,
                   asymptotics: Optional[tuple] = None,
                   window_center: Optional[float] = None,
                   edge_point: Optional[float] = None):
    """Invert a single amplitude G(z) to the time domain.

    Parameters
    ----------
    g : callable
        Vectorized G(z) for complex z on or above the contour.
    spec : ContourSpec
    t_grid : array of nonnegative times (uniform grids use the fast path).
    asymptotics : (alpha, c1, c2), optional
        Exact expansion coefficients; probed numerically at large |z| when
        omitted and subtraction is enabled.
    window_center, edge_point : float, optional
        Contour center (default: spec.window_center or 0) and the location
        of the square-root branch point, if any lies inside the window.
    """
    center = window_center if window_center is not None else (spec.window_center or 0.0)
    return _invert_many([g], spec, t_grid, [asymptotics], center, edge_point)[0]


# ---------------------------------------------------------------------------
# populations


def _default_center(params: SystemParams, reservoir: ReservoirKind) -> float:
    if isinstance(reservoir, BandEdgeReservoir):
        return reservoir.omega_e
    return 0.5 * (params.omega_l + params.omega_b)


def _time_grid(T: float, dt: float) -> np.ndarray:
    if T <= 0 or dt <= 0:
        raise ParameterDomainError("T and dt must be positive")
    n = int(round(T / dt))
    return np.linspace(0.0, n * dt, n + 1)


def nojump_populations(params: SystemParams, reservoir: ReservoirKind,
                       spec: Optional[ContourSpec] = None,
                       T: float = 30.0, dt: float = 0.005,
                       tol: float = 1e-4) -> NoJumpSolution:
    """No-jump populations and norm from the contour-inverted amplitudes.

    pi0_a = |U_aa|**2, pi0_b = |U_ba|**2, the norm decays only through the
    flat-reservoir width: P(t) = 1 - gamma * int_0^t pi0_b, and pi0_c
    follows from closure.  Violations of the probability invariants beyond
    ``tol`` raise AccuracyError with a refinement hint.

    With gamma = 0 and a vanishing contour offset the dressed poles sit on
    the contour; a deterministic offset of 4/T is applied then (undamped
    components stay visible because the result is exp-compensated).
    """
    t = _time_grid(T, dt)
    if params.v_ab == 0.0:
        # atom never leaves |a>; amplitudes are exact
        u_aa = np.exp(-1j * params.omega_l * t)
        u_ba = np.zeros_like(u_aa)
        return _assemble(t, u_aa, u_ba, params.gamma, tol)
    spec = spec or ContourSpec()
    if params.gamma == 0.0 and spec.offset == 0.0:
        spec = ContourSpec(
            window_halfwidth=spec.window_halfwidth,
            window_center=spec.window_center,
            offset=4.0 / T,
            grid_points=spec.grid_points,
            edge_refinement=spec.edge_refinement,
            edge_halfwidth=spec.edge_halfwidth,
            asymptote_subtraction=spec.asymptote_subtraction,
        )
    center = spec.window_center
    if center is None:
        center = _default_center(params, reservoir)
    edge = None
    if isinstance(reservoir, BandEdgeReservoir) and reservoir.coupling_c > 0:
        edge = reservoir.omega_e
    asym = amplitude_asymptotics(params, reservoir)

    def g_aa(z):
        return resolvent_amplitudes(z, params, reservoir)[0]

    def g_ba(z):
        return resolvent_amplitudes(z, params, reservoir)[1]

    u_aa, u_ba = _invert_many([g_aa, g_ba], spec, t, [asym["aa"], asym["ba"]],
                              center, edge)
    return _assemble(t, u_aa, u_ba, params.gamma, tol)


def _assemble(t, u_aa, u_ba, gamma, tol) -> NoJumpSolution:
    pi0_a = np.abs(u_aa) ** 2
    pi0_b = np.abs(u_ba) ** 2
    norm = 1.0 - gamma * cumulative_trapezoid(pi0_b, t, initial=0.0)
    pi0_c = norm - pi0_a - pi0_b
    sol = NoJumpSolution(
        t=t, u_aa=u_aa, u_ba=u_ba, pi0_a=pi0_a, pi0_b=pi0_b, pi0_c=pi0_c,
        norm=norm, p_inf_estimate=float(norm[-1]), gamma=gamma,
    )
    _validate(sol, tol)
    return sol


def _validate(sol: NoJumpSolution, tol: float):
    checks = [
        ("pi0_a(0) = 1", abs(sol.pi0_a[0] - 1.0)),
        ("pi0_b(0) = 0", abs(sol.pi0_b[0])),
        ("P(0) = 1", abs(sol.norm[0] - 1.0)),
        ("0 <= pi0_a <= 1", max(float(-sol.pi0_a.min()), float(sol.pi0_a.max() - 1.0))),
        ("0 <= pi0_b <= 1", max(float(-sol.pi0_b.min()), float(sol.pi0_b.max() - 1.0))),
        ("0 <= P <= 1", max(float(-sol.norm.min()), float(sol.norm.max() - 1.0))),
        ("pi0_c >= 0", float(-sol.pi0_c.min())),
    ]
    for name, resid in checks:
        if resid > tol:
            raise AccuracyError(
                f"no-jump invariant {name} violated by {resid:.3e} (> {tol:.1e}); "
                "refine the contour spec (more grid_points, larger window, or "
                "edge refinement)"
            )


# ---------------------------------------------------------------------------
# independent cross-check: discretized continuum integrated in time


def _discretize_band(coupling_c: float, omega_e: float, omega_max: float, modes: int):
    """Equal-mass binning of J(omega) = C/(pi*sqrt(omega-omega_e)) on
    [omega_e, omega_max]: uniform in s = sqrt(omega-omega_e), which is
    uniform in wavenumber under the effective-mass dispersion.  Couplings
    are exact bin integrals of J; each bin's mode sits at its s-midpoint."""
    s_max = math.sqrt(omega_max - omega_e)
    ds = s_max / modes
    s = (np.arange(modes) + 0.5) * ds
    freqs = omega_e + s * s
    g2 = (2.0 * coupling_c / math.pi) * ds
    return freqs, np.full(modes, math.sqrt(g2))


def discretized_self_energy(reservoir: BandEdgeReservoir, omega_max: float,
                            modes: int, z):
    """Self-energy sum_j g_j**2/(z - omega_j) of the discretized band;
    converges to -i*C/sqrt(z - omega_e) as modes and omega_max grow."""
    freqs, g = _discretize_band(reservoir.coupling_c, reservoir.omega_e, omega_max, modes)
    z = np.asarray(z, dtype=complex)
    return np.sum(g**2 / (z[..., None] - freqs), axis=-1)


def discretized_modes_oracle(params: SystemParams, modes: int = 2000,
                             omega_max: Optional[float] = None,
                             T: float = 10.0, dt: float = 0.01,
                             inner_dt: Optional[float] = None) -> NoJumpSolution:
    """No-jump evolution from an (modes + 2)-level Schroedinger system.

    The band-edge continuum becomes ``modes`` discrete oscillators above
    omega_e; the non-hermitian system (laser-coupled a-b pair, -i*gamma/2
    on b) is integrated with fixed-step RK4 in the frame rotating at the
    laser frequency, where populations coincide with the lab frame.

    Use modes >= 100 and omega_max >= omega_e + 50*gamma for oracle-grade
    accuracy; smaller values are allowed so convergence in the mode count
    can be demonstrated.  The residual deviation at large ``modes`` is the
    truncated self-energy tail above omega_max, a static level shift of
    order 2*C/(pi*sqrt(omega_max - omega_e)).
    """
    if modes < 1:
        raise ParameterDomainError("modes must be >= 1")
    if omega_max is None:
        omega_max = params.omega_e + 100.0
    if params.coupling_c > 0 and omega_max <= params.omega_e:
        raise ParameterDomainError("omega_max must exceed omega_e")
    t = _time_grid(T, dt)
    if params.coupling_c > 0:
        freqs, g = _discretize_band(params.coupling_c, params.omega_e, omega_max, modes)
    else:
        freqs = np.empty(0)
        g = np.empty(0)
    v = params.v_ab
    d_b = (params.omega_b - params.omega_l) - 0.5j * params.gamma
    d_j = freqs - params.omega_l
    # stability: spectral radius ~ max diagonal + coupling norms
    radius = max(
        float(np.max(np.abs(d_j))) if len(d_j) else 0.0,
        abs(d_b),
    ) + 2.0 * float(np.linalg.norm(g)) + 2.0 * v + params.gamma
    if inner_dt is None:
        # default step well inside the RK4 stability region; an explicit
        # inner_dt is honored and policed by the norm-growth check instead
        inner_dt = min(1e-3, 2.0 / radius) if radius > 0 else 1e-3
    n_sub = max(1, int(math.ceil(dt / inner_dt)))
    h = dt / n_sub

    y_a = 1.0 + 0.0j
    y_b = 0.0 + 0.0j
    y_c = np.zeros(len(freqs), dtype=complex)
    n_out = len(t) - 1
    u_aa = np.empty(len(t), dtype=complex)
    u_ba = np.empty(len(t), dtype=complex)
    norm = np.empty(len(t))
    u_aa[0], u_ba[0], norm[0] = y_a, y_b, 1.0

    def deriv(a, b, c):
        da = -1j * (v * b)
        db = -1j * (d_b * b + v * a + (g @ c if len(c) else 0.0))
        dc = -1j * (d_j * c + g * b)
        return da, db, dc

    for k in range(1, n_out + 1):
        for _ in range(n_sub):
            a1, b1, c1 = deriv(y_a, y_b, y_c)
            a2, b2, c2 = deriv(y_a + 0.5 * h * a1, y_b + 0.5 * h * b1, y_c + 0.5 * h * c1)
            a3, b3, c3 = deriv(y_a + 0.5 * h * a2, y_b + 0.5 * h * b2, y_c + 0.5 * h * c2)
            a4, b4, c4 = deriv(y_a + h * a3, y_b + h * b3, y_c + h * c3)
            y_a += h * (a1 + 2 * a2 + 2 * a3 + a4) / 6.0
            y_b += h * (b1 + 2 * b2 + 2 * b3 + b4) / 6.0
            y_c += h * (c1 + 2 * c2 + 2 * c3 + c4) / 6.0
        u_aa[k] = y_a
        u_ba[k] = y_b
        norm[k] = abs(y_a) ** 2 + abs(y_b) ** 2 + float(np.sum(np.abs(y_c) ** 2))
        if norm[k] > 1.0 + 1e-6:
            raise StepperError(
                f"norm grew to {norm[k]:.6f} at t={t[k]:.3f}; reduce inner_dt"
            )

    pi0_a = np.abs(u_aa) ** 2
    pi0_b = np.abs(u_ba) ** 2
    pi0_c = norm - pi0_a - pi0_b
    return NoJumpSolution(
        t=t, u_aa=u_aa, u_ba=u_ba, pi0_a=pi0_a, pi0_b=pi0_b, pi0_c=pi0_c,
        norm=norm, p_inf_estimate=float(norm[-1]), gamma=params.gamma,
    )
