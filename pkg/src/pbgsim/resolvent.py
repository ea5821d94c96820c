"""Closed-form resolvent amplitudes of the driven three-level system.

Eliminating the structured continuum from the coupled amplitude equations
leaves two algebraic matrix elements,

    G_aa(z) = B(z) / D(z),        G_ba(z) = V_ba / D(z),
    B(z)    = (z - omega_b + i*gamma/2) + i*C/sqrt(z - omega_e),
    D(z)    = (z - omega_L) * B(z) - |V_ab|**2,

with the principal square root evaluated as the limit from the upper
half-plane.  The i*C/sqrt term is the negative of the reservoir
self-energy: above the edge it is pure damping, below it a pure level
shift, which is what closes the Raman channel for a laser tuned below the
gap edge.  A flat reservoir replaces it by the constant i*gamma'/2.

Everything here is a pure function of value inputs and vectorizes over
``z``; concurrent evaluation needs no synchronization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ParameterDomainError, PoleError, SingularityError

__all__ = [
    "SystemParams",
    "BandEdgeReservoir",
    "FlatReservoir",
    "ReservoirKind",
    "self_energy",
    "resolvent_amplitudes",
    "amplitude_asymptotics",
]


@dataclass(frozen=True)
class SystemParams:
    """Atomic, laser and reservoir parameters in gamma-units.

    ``omega_c`` is bookkeeping only: the continuum frequencies are measured
    so that it is absorbed, and no closed-form amplitude depends on it.
    """

    gamma: float = 1.0
    v_ab: float = 1.0
    coupling_c: float = (1.0 / 3.0) ** 1.5
    omega_b: float = 0.0
    omega_l: float = 0.0
    omega_e: float = 0.0
    omega_c: float = 0.0

    def __post_init__(self):
        vals = (self.gamma, self.v_ab, self.coupling_c, self.omega_b,
                self.omega_l, self.omega_e, self.omega_c)
        if not all(math.isfinite(v) for v in vals):
            raise ParameterDomainError("all system parameters must be finite")
        if self.gamma < 0:
            raise ParameterDomainError(f"gamma must be >= 0, got {self.gamma}")
        if self.v_ab < 0:
            raise ParameterDomainError(f"V_ab must be >= 0 (phase convention), got {self.v_ab}")
        if self.coupling_c < 0:
            raise ParameterDomainError(f"C must be >= 0, got {self.coupling_c}")
        if self.gamma == 0 and self.coupling_c == 0:
            raise ParameterDomainError(
                "no dissipation channel: at least one of gamma, C must be positive"
            )


@dataclass(frozen=True)
class BandEdgeReservoir:
    """Square-root band-edge continuum: self-energy -i*C/sqrt(z - omega_e)."""

    coupling_c: float
    omega_e: float

    def __post_init__(self):
        if self.coupling_c < 0 or not math.isfinite(self.omega_e):
            raise ParameterDomainError("band-edge reservoir needs C >= 0 and finite omega_e")


@dataclass(frozen=True)
class FlatReservoir:
    """Unstructured continuum: constant self-energy -i*gamma'/2."""

    gamma_prime: float

    def __post_init__(self):
        if self.gamma_prime < 0:
            raise ParameterDomainError("gamma' must be >= 0")


ReservoirKind = Union[BandEdgeReservoir, FlatReservoir]


def reservoir_for(params: SystemParams, kind: str = "bandedge",
                  gamma_prime: float = 0.0) -> ReservoirKind:
    """Build the reservoir variant consistent with ``params``."""
    if kind == "bandedge":
        return BandEdgeReservoir(coupling_c=params.coupling_c, omega_e=params.omega_e)
    if kind == "flat":
        return FlatReservoir(gamma_prime=gamma_prime)
    raise ParameterDomainError(f"unknown reservoir kind {kind!r}")


def _sqrt_upper(w):
    """Principal sqrt evaluated as the limit from above the real axis.

    Real negative arguments get +i*sqrt(|w|); a -0.0 imaginary part is
    normalized to +0.0 so numpy does not fall onto the lower branch.
    """
    w = np.asarray(w, dtype=complex)
    w = np.where(w.imag == 0.0, w.real + 0.0j, w)
    return np.sqrt(w)


def self_energy(z, reservoir: ReservoirKind):
    """Complex self-energy of the eliminated continuum at ``z``.

    Expects Im(z) >= 0; on-axis values are the limits from above.  For the
    band edge this is -i*C/sqrt(z - omega_e): pure damping for real
    z > omega_e, a pure negative level shift for real z < omega_e.

    Raises
    ------
    SingularityError
        If z hits omega_e exactly on the real axis (integrable singular
        point; quadrature node layouts must exclude it).
    """
    z = np.asarray(z, dtype=complex)
    if isinstance(reservoir, FlatReservoir):
        out = np.full(z.shape, -0.5j * reservoir.gamma_prime, dtype=complex)
        return out if out.ndim else complex(out)
    if reservoir.coupling_c == 0.0:
        out = np.zeros(z.shape, dtype=complex)
        return out if out.ndim else complex(out)
    w = z - reservoir.omega_e
    if np.any(w == 0):
        raise SingularityError("self-energy evaluated exactly at the band edge omega_e")
    out = -1j * reservoir.coupling_c / _sqrt_upper(w)
    return out if out.ndim else complex(out)


def _bracket(z, params: SystemParams, reservoir: ReservoirKind):
    # damping convention: the self-energy enters the level denominator
    # subtracted, giving the bracket (z - omega_b + i*gamma/2 + i*C/sqrt(...))
    z = np.asarray(z, dtype=complex)
    return (z - params.omega_b + 0.5j * params.gamma) - self_energy(z, reservoir)


def resolvent_amplitudes(z, params: SystemParams, reservoir: ReservoirKind):
    """Matrix elements G_aa(z), G_ba(z) of the effective resolvent.

    Returns
    -------
    (g_aa, g_ba) : complex arrays shaped like z

    Raises
    ------
    PoleError
        If the denominator vanishes at an evaluation point (possible only
        for gamma = 0 on the real axis).
    """
    z = np.asarray(z, dtype=complex)
    brk = _bracket(z, params, reservoir)
    den = (z - params.omega_l) * brk - params.v_ab**2
    if np.any(den == 0):
        raise PoleError("resolvent denominator vanished on the evaluation set")
    g_aa = brk / den
    g_ba = params.v_ab / den
    if g_aa.ndim:
        return g_aa, g_ba
    return complex(g_aa), complex(g_ba)


def amplitude_asymptotics(params: SystemParams, reservoir: ReservoirKind):
    """Exact large-|z| expansion coefficients of both amplitudes.

    G ~ alpha/z + c1/z**2 + c2/z**3 + ...; used by the contour inverter to
    peel off the slowly decaying part analytically.  The flat reservoir
    shifts the bracket constant by -i*gamma'/2; the band-edge self-energy
    first enters at half-integer orders beyond c2.
    """
    v = params.v_ab
    wl = params.omega_l
    b0 = params.omega_b - 0.5j * params.gamma
    if isinstance(reservoir, FlatReservoir):
        b0 = b0 - 0.5j * reservoir.gamma_prime
    return {
        "aa": (1.0, complex(wl), complex(wl * wl + v * v)),
        "ba": (0.0, complex(v), complex(v * (wl + b0))),
    }
