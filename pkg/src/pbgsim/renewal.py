"""Ensemble-averaged populations by resummation of jump histories.

Every spontaneous emission on the laser-driven transition resets the atom
to its ground state, so the ensemble average obeys a renewal equation with
the no-jump populations as kernels:

    pbar_i(t) = pi0_i(t) + gamma * int_0^t pbar_b(t') pi0_i(t - t') dt'.

Only pbar_b feeds back; it is solved first by forward time-marching
(Volterra second kind, trapezoid kernel quadrature -- explicit because
pi0_b(0) = 0 kills both endpoint weights), after which the other
populations are plain convolutions.

A transform-domain route provides the cross-check: damped FFTs give the
discrete transform of pi0_b, the resummation pbar_b = pi0_b/(1 - gamma *
pi0_b) is applied in the transform domain, and the result is transformed
back.  With the vanishing endpoints the trapezoid convolution coincides
with the plain discrete convolution the FFT diagonalizes, so both routes
solve the same discrete system and differ only by circular aliasing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AccuracyError, ParameterDomainError
from .inversion import NoJumpSolution

__all__ = ["EnsembleSolution", "solve_renewal", "renewal_transform_check",
           "renewal_residual"]


@dataclass
class EnsembleSolution:
    """Trace-one ensemble populations on the no-jump grid."""

    t: np.ndarray
    pibar_a: np.ndarray
    pibar_b: np.ndarray
    pibar_c: np.ndarray
    method: str


def _check_input(nojump: NoJumpSolution, gamma):
    if gamma is None:
        gamma = nojump.gamma
    if gamma < 0:
        raise ParameterDomainError("gamma must be >= 0")
    steps = np.diff(nojump.t)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise ParameterDomainError("renewal solver needs a uniform time grid")
    return float(gamma), float(steps[0])


def _passive_convolution(pibar_b, kernel, gamma, dt):
    # trapezoid weights: the m=0 endpoint vanishes with pibar_b(0)=0, the
    # m=n endpoint needs its half weight restored since kernel(0) != 0
    conv = np.convolve(pibar_b, kernel)[: len(kernel)]
    conv -= 0.5 * pibar_b * kernel[0]
    return kernel + gamma * dt * conv


def solve_renewal(nojump: NoJumpSolution, gamma: float | None = None,
                  tol: float = 1e-4) -> EnsembleSolution:
    """March the renewal equation for pbar_b, then convolve for a and c.

    Raises AccuracyError if the resulting populations leave [0, 1] or the
    trace leaves 1 by more than ``tol``.
    """
    gamma, dt = _check_input(nojump, gamma)
    pb0 = nojump.pi0_b
    n = len(pb0)
    pibar_b = np.zeros(n)
    pibar_b[0] = pb0[0]
    for k in range(1, n):
        acc = np.dot(pibar_b[1:k], pb0[k - 1:0:-1]) if k > 1 else 0.0
        pibar_b[k] = pb0[k] + gamma * dt * acc
    pibar_a = _passive_convolution(pibar_b, nojump.pi0_a, gamma, dt)
    pibar_c = _passive_convolution(pibar_b, nojump.pi0_c, gamma, dt)
    sol = EnsembleSolution(t=nojump.t, pibar_a=pibar_a, pibar_b=pibar_b,
                           pibar_c=pibar_c, method="volterra")
    _validate(sol, tol)
    return sol


def renewal_transform_check(nojump: NoJumpSolution, gamma: float | None = None,
                            tol: float = 1e-4) -> EnsembleSolution:
    """Transform-domain resummation pbar_b = pi0_b / (1 - gamma*pi0_b).

    Uses a damped discrete Laplace transform (FFT on an exponentially
    damped, zero-padded copy of the grid data).  Raises AccuracyError when
    the resummation denominator becomes singular on the numerical contour.
    """
    gamma, dt = _check_input(nojump, gamma)
    n = len(nojump.t)
    length = 1 << max(4, int(np.ceil(np.log2(4 * n))))
    horizon = length * dt
    t_span = nojump.t[-1]
    sigma = 20.7 / max(horizon - t_span, t_span)
    damp = np.exp(-sigma * nojump.t)
    lift = np.exp(sigma * nojump.t)

    q_b = np.fft.fft(nojump.pi0_b * damp, length)
    denom = 1.0 - gamma * dt * q_b
    if np.min(np.abs(denom)) < 1e-6:
        raise AccuracyError(
            "renewal resummation pole: 1 - gamma*pi0_b(z) vanished on the "
            "numerical contour; increase the damping or shorten the grid"
        )
    rb_hat = q_b / denom
    pibar_b = np.fft.ifft(rb_hat)[:n].real * lift

    def passive(kernel):
        q_k = np.fft.fft(kernel * damp, length)
        conv = np.fft.ifft(rb_hat * q_k)[:n].real * lift
        # remove the m=n trapezoid half weight, as in the marching route
        conv -= 0.5 * pibar_b * kernel[0]
        return kernel + gamma * dt * conv

    sol = EnsembleSolution(t=nojump.t, pibar_a=passive(nojump.pi0_a),
                           pibar_b=pibar_b, pibar_c=passive(nojump.pi0_c),
                           method="transform")
    _validate(sol, tol)
    return sol


def renewal_residual(solution: EnsembleSolution, nojump: NoJumpSolution,
                     gamma: float | None = None) -> float:
    """Sup-norm residual of the discrete renewal equation for pbar_b."""
    gamma, dt = _check_input(nojump, gamma)
    pb0 = nojump.pi0_b
    rb = solution.pibar_b
    worst = abs(rb[0] - pb0[0])
    for k in range(1, len(pb0)):
        acc = np.dot(rb[1:k], pb0[k - 1:0:-1]) if k > 1 else 0.0
        worst = max(worst, abs(rb[k] - (pb0[k] + gamma * dt * acc)))
    return float(worst)


def _validate(sol: EnsembleSolution, tol: float):
    trace = sol.pibar_a + sol.pibar_b + sol.pibar_c
    checks = [
        ("pbar_a(0) = 1", abs(float(sol.pibar_a[0]) - 1.0)),
        ("populations >= 0", float(-min(sol.pibar_a.min(), sol.pibar_b.min(),
                                        sol.pibar_c.min()))),
        ("populations <= 1", float(max(sol.pibar_a.max(), sol.pibar_b.max(),
                                       sol.pibar_c.max()) - 1.0)),
        ("trace = 1", float(np.max(np.abs(trace - 1.0)))),
    ]
    for name, resid in checks:
        if resid > tol:
            raise AccuracyError(
                f"ensemble invariant {name} violated by {resid:.3e} (> {tol:.1e}); "
                "refine dt or the no-jump quadrature"
            )
