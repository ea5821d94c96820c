import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pbgsim import (
    BandEdgeReservoir,
    SystemParams,
    coupling_from_ratio,
    nojump_populations,
)

FIG2_C = coupling_from_ratio(1.0 / 3.0)


def fig2_params(v_ab: float = 1.0, coupling_c: float = FIG2_C) -> SystemParams:
    """Weak-coupling figure configuration: resonant drive, edge at the atom."""
    return SystemParams(gamma=1.0, v_ab=v_ab, coupling_c=coupling_c,
                        omega_b=0.0, omega_l=0.0, omega_e=0.0)


@pytest.fixture(scope="session")
def fig2_nojump():
    p = fig2_params()
    return nojump_populations(p, BandEdgeReservoir(p.coupling_c, p.omega_e),
                              T=30.0, dt=0.005)


@pytest.fixture(scope="session")
def twolevel_nojump():
    # C = 0: damped resonant Rabi problem, the flat-space benchmark
    p = fig2_params(coupling_c=0.0)
    return nojump_populations(p, BandEdgeReservoir(0.0, 0.0), T=30.0, dt=0.005)
