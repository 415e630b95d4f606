"""Model parameterization of the anisotropic XY ring with variable-range couplings.

A spin couples to its ``z`` nearest neighbours on each side of a periodic
chain of ``n_sites`` spins.  Relative coupling strengths decay with the
circular distance d = min(|i-j|, N-|i-j|) following either an exponential
law alpha**-(d-1) or a power law d**-alpha.  The overall coupling constant
is ferromagnetic, J = -1, and the transverse field is h = lam * J.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

# Ferromagnetic coupling constant; all energies are reported in units of |J|.
J = -1.0


class Falloff(Enum):
    EXPONENTIAL = "exponential"
    POWER_LAW = "power"


@dataclass(frozen=True)
class ModelSpec:
    """One Hamiltonian instance of the variable-range XY ring.

    Attributes:
        n_sites: number of spins N (even, 2 <= N <= 16).
        z: coordination range; a spin couples to neighbours up to circular
           distance z (1 <= z <= N/2).
        gamma: anisotropy in [0, 1] (1 = Ising limit, 0 = XX limit).
        lam: transverse field ratio h/J.
        falloff: decay law of the relative coupling strengths.
        alpha: decay rate (base of the exponential or power-law exponent).
    """

    n_sites: int
    z: int
    gamma: float
    lam: float = 0.0
    falloff: Falloff = Falloff.EXPONENTIAL
    alpha: float = 2.0

    def __post_init__(self):
        if self.n_sites < 2 or self.n_sites > 16 or self.n_sites % 2 != 0:
            raise ValueError(f"n_sites must be even and in [2, 16], got {self.n_sites}")
        if not 1 <= self.z <= self.n_sites // 2:
            raise ValueError(f"z must be in [1, {self.n_sites // 2}], got {self.z}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not isinstance(self.falloff, Falloff):
            raise ValueError(f"falloff must be a Falloff member, got {self.falloff!r}")

    @property
    def field(self) -> float:
        """Transverse field strength h = lam * J."""
        return self.lam * J

    @property
    def dim(self) -> int:
        return 1 << self.n_sites


def build_couplings(spec: ModelSpec) -> np.ndarray:
    """Relative coupling strengths c_d = J_ij/J for circular distance d = 1..z.

    Exponential decay gives c_d = alpha**-(d-1); power-law gives d**-alpha.
    Couplings at distances beyond z are zero and not stored.
    """
    d = np.arange(1, spec.z + 1, dtype=float)
    if spec.falloff is Falloff.EXPONENTIAL:
        return spec.alpha ** -(d - 1.0)
    return d ** -spec.alpha


def coordination_sum(spec: ModelSpec) -> float:
    """Sum of the relative coupling strengths over d = 1..z.

    For alpha = 2 exponential decay this is the geometric sum 2(1 - 2**-z);
    for alpha = 1 power-law decay it is the z-th harmonic number.
    """
    return float(build_couplings(spec).sum())
