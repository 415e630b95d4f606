"""Zero-temperature and canonical-equilibrium states as weighted eigen-ensembles.

A mixed state is never materialized as a 2^N x 2^N matrix; it is carried as
(weights, eigenvectors) and all reductions are taken per eigenvector and
weight-averaged downstream.  The zero-temperature state is the equal mixture
of the degenerate ground manifold (the beta -> infinity limit of the Gibbs
state); finite-beta states use Boltzmann weights over the m computed levels,
offset by the ground energy for stability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigensolve import SpectrumSlice, full_spectrum, lowest_spectrum
from .hamiltonian import HamiltonianOp
from .model import ModelSpec


@dataclass
class StateEnsemble:
    """Probability weights over orthonormal eigenvectors (rows)."""

    weights: np.ndarray
    vectors: np.ndarray
    beta: float
    m: int

    def __post_init__(self):
        if np.any(self.weights < -1e-15):
            raise ValueError("ensemble weights must be nonnegative")
        total = float(self.weights.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"ensemble weights must sum to 1, got {total}")

    @property
    def n_sites(self) -> int:
        return int(np.log2(self.vectors.shape[1]))

    @property
    def is_pure(self) -> bool:
        return len(self.weights) == 1


# Finite rings in the ordered phase carry a parity doublet whose splitting is
# exponentially small in N but far above solver precision; the physical
# zero-temperature state mixes it.  This energy window sits between the
# doublet splitting and the true spectral gap for all supported sizes.
QUASI_DEG_TOL = 1e-2


def zero_temperature_state(spectrum: SpectrumSlice,
                           quasi_deg_tol: float | None = None) -> StateEnsemble:
    """Equal mixture of the degenerate ground manifold.

    With `quasi_deg_tol` set, every level within that absolute energy window
    of the ground energy joins the manifold (finite-size parity doublets);
    otherwise the strict spectral degeneracy groups decide.  Refuses to build
    the state when every computed eigenvalue sits in the ground group,
    because the group may then extend beyond the computed slice.
    """
    if not spectrum.converged:
        raise ValueError("spectrum did not converge; refusing to build a state")
    if quasi_deg_tol is None:
        g = spectrum.ground_degeneracy
    else:
        e0 = spectrum.eigenvalues[0]
        g = int(np.searchsorted(spectrum.eigenvalues, e0 + quasi_deg_tol))
    if g >= len(spectrum):
        raise ValueError(
            "ground degeneracy group may be truncated: "
            f"all {len(spectrum)} computed levels are degenerate")
    weights = np.full(g, 1.0 / g)
    return StateEnsemble(weights, spectrum.eigenvectors[:g], np.inf, m=len(spectrum))


def thermal_state(spectrum: SpectrumSlice, beta: float, m: int | None = None) -> StateEnsemble:
    """Gibbs weights over the lowest m computed levels at inverse temperature beta."""
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    if not spectrum.converged:
        raise ValueError("spectrum did not converge; refusing to build a state")
    if m is None:
        m = len(spectrum)
    if m > len(spectrum):
        raise ValueError(f"requested truncation m={m} exceeds {len(spectrum)} computed levels")
    energies = spectrum.eigenvalues[:m]
    if np.isinf(beta):
        return zero_temperature_state(spectrum)
    weights = np.exp(-beta * (energies - energies[0]))
    weights /= weights.sum()
    return StateEnsemble(weights, spectrum.eigenvectors[:m], beta, m=m)


def thermal_weights(energies: np.ndarray, beta: float) -> np.ndarray:
    """Normalized Boltzmann weights exp(-beta(e - e_min)) without vectors."""
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    w = np.exp(-beta * (energies - energies.min()))
    return w / w.sum()


def ground_state_ensemble(spec: ModelSpec, *, tol: float = 1e-10, seed: int = 0,
                          warm=None, quasi_deg_tol: float | None = None
                          ) -> tuple[StateEnsemble, SpectrumSlice]:
    """Zero-temperature state of one model instance.

    Starts from the two lowest levels and enlarges the computed slice until
    the ground (quasi-)degeneracy group is certified complete.
    """
    op = HamiltonianOp(spec)
    # quasi-degenerate runs almost always mix the parity doublet, so ask for
    # one level beyond it up front
    m = 2 if quasi_deg_tol is None else 3
    while True:
        spectrum = (lowest_spectrum(op, m, tol=tol, seed=seed, warm=warm)
                    if m < op.dim else full_spectrum(op))
        try:
            return zero_temperature_state(spectrum, quasi_deg_tol), spectrum
        except ValueError:
            if m >= op.dim:
                raise
            m = min(2 * m, op.dim)


def spectrum_for(spec: ModelSpec, m: int, *, tol: float = 1e-10, seed: int = 0,
                 warm=None) -> SpectrumSlice:
    """Lowest-m spectrum, exact (full) whenever m reaches the Hilbert dimension."""
    op = HamiltonianOp(spec)
    if m >= op.dim:
        return full_spectrum(op)
    return lowest_spectrum(op, m, tol=tol, seed=seed, warm=warm)


def converge_truncation(spec: ModelSpec, beta_grid: np.ndarray, z_list,
                        *, m_start: int = 200, m_step: int = 25, m_cap: int = 500,
                        eps: float = 1e-4, spectrum_provider=None) -> int:
    """Smallest truncation m' at which every beta* in z_list has stabilized.

    beta*_z is recomputed on a ladder of truncations m = m_start, m_start +
    m_step, ...; m' is the first rung from which no later rung moves any
    beta*_z by 1e-4 or more.  Systems small enough for the exact spectrum
    (N <= 12) bypass the ladder and return 2^N.
    """
    from .analysis import beta_star_from_spectrum

    if spec.dim <= 1 << 12:
        return spec.dim
    if spectrum_provider is None:
        def spectrum_provider(s: ModelSpec, m: int):
            return spectrum_for(s, m)

    from dataclasses import replace

    ladder = list(range(m_start, m_cap + 1, m_step))
    stars = np.empty((len(z_list), len(ladder)))
    for zi, z in enumerate(z_list):
        spec_z = replace(spec, z=z)
        spectrum = spectrum_provider(spec_z, m_cap)
        for mi, m in enumerate(ladder):
            stars[zi, mi] = beta_star_from_spectrum(spectrum, spec_z.n_sites,
                                                    beta_grid, m=m, eps=eps)
    for mi, m in enumerate(ladder[:-1]):
        if np.all(np.abs(stars[:, mi + 1:] - stars[:, mi:mi + 1]) < 1e-4):
            return m
    raise RuntimeError(
        f"beta* did not stabilize below the truncation cap m={m_cap}")
