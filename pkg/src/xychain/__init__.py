"""Exact diagonalization and entanglement analysis of the variable-range XY chain."""

from .model import Falloff, J, ModelSpec, build_couplings, coordination_sum
from .hamiltonian import (HamiltonianOp, assemble_dense, assemble_dense_sector,
                          pair_couplings, parity_sectors)
from .eigensolve import (SpectrumSlice, degeneracy_groups, dense_spectrum,
                         full_spectrum, lanczos_lowest, lowest_spectrum)
from .states import (StateEnsemble, converge_truncation, ground_state_ensemble,
                     spectrum_for, thermal_state, zero_temperature_state)
from .entanglement import (e_sum, is_x_state, log_negativity,
                           one_vs_rest_entanglement, partial_transpose, profile,
                           reduce_two_site, reduced_pair_blocks,
                           x_state_log_negativity)
from .analysis import (FactorizationReport, LengthFit, ProductAnsatz,
                       RigidityScan, beta_star, beta_star_from_spectrum,
                       entanglement_length, max_entanglement_gaps,
                       observed_factorization, predicted_factorization,
                       product_energy_gradient, product_energy_min,
                       profile_sweep, rigidity_scan, witness)

__version__ = "0.1.0"
