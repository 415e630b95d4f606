"""Two-site reductions and negativity-based entanglement measures.

Reduced density matrices are accumulated per eigenvector as 4x4 blocks over
the 2^(N-2) environment configurations and weight-averaged (the partial
trace is linear), so no 2^N x 2^N object is ever formed.  Entanglement is
quantified by logarithmic negativity E = log2(2*negativity + 1); for the
X-shaped states this model produces, the closed-form expression from the two
partial-transpose blocks is available and must agree with the generic 4x4
computation.
"""

from __future__ import annotations

import numpy as np

from .states import StateEnsemble

# Values below this are numerical zeros of the solver chain; entanglement
# activation/factorization detection uses the much larger EPS_ACTIVE.
CLAMP_TOL = 1e-12
EPS_ACTIVE = 1e-4


def _pair_axes(n_sites: int, i: int, j: int) -> tuple[int, int]:
    # bit k of a basis index maps to reshape axis (n_sites - 1 - k)
    return n_sites - 1 - i, n_sites - 1 - j


def reduced_pair_blocks(vectors: np.ndarray, n_sites: int, i: int, j: int,
                        chunk: int = 256) -> np.ndarray:
    """Per-vector reduced density matrices for sites (i, j).

    vectors has shape (k, 2^n_sites); the result has shape (k, 4, 4) in the
    two-site basis {00, 01, 10, 11} with site i as the left qubit.
    """
    if i == j:
        raise ValueError("sites must differ")
    for site in (i, j):
        if not 0 <= site < n_sites:
            raise ValueError(f"site {site} out of range for {n_sites} spins")
    k, dim = vectors.shape
    if dim != 1 << n_sites:
        raise ValueError("vector length does not match the number of sites")
    ax_i, ax_j = _pair_axes(n_sites, i, j)
    out = np.empty((k, 4, 4))
    for lo in range(0, k, chunk):
        batch = vectors[lo:lo + chunk]
        tensor = batch.reshape((batch.shape[0],) + (2,) * n_sites)
        t = np.moveaxis(tensor, (1 + ax_i, 1 + ax_j), (1, 2))
        t = np.ascontiguousarray(t).reshape(batch.shape[0], 4, dim // 4)
        out[lo:lo + chunk] = np.einsum("kae,kbe->kab", t, t)
    return out


def reduce_two_site(ensemble: StateEnsemble, i: int, j: int) -> np.ndarray:
    """Reduced two-site density matrix of the ensemble (4x4, trace one)."""
    blocks = reduced_pair_blocks(ensemble.vectors, ensemble.n_sites, i, j)
    return np.tensordot(ensemble.weights, blocks, axes=1)


def partial_transpose(rho: np.ndarray) -> np.ndarray:
    """Partial transpose of a 4x4 two-qubit matrix over the left qubit."""
    return rho.reshape(2, 2, 2, 2).transpose(2, 1, 0, 3).reshape(4, 4)


def log_negativity(rho: np.ndarray) -> float:
    """Logarithmic negativity E = log2(2N + 1) from the full 4x4 partial transpose.

    N is the absolute sum of negative eigenvalues of rho^{T_A}.  Values
    within CLAMP_TOL of zero are reported as exact zeros.
    """
    if rho.shape != (4, 4):
        raise ValueError("expected a 4x4 two-qubit density matrix")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
        raise ValueError("density matrix must be Hermitian")
    eigs = np.linalg.eigvalsh(partial_transpose(rho))
    negativity = -float(eigs[eigs < 0].sum())
    value = float(np.log2(2.0 * negativity + 1.0))
    return 0.0 if value < CLAMP_TOL else value


def is_x_state(rho: np.ndarray, tol: float = 1e-8) -> bool:
    """True when only the diagonal and the two anti-diagonal corners are populated."""
    if rho.shape != (4, 4):
        raise ValueError("expected a 4x4 two-qubit density matrix")
    off = (abs(rho[0, 1]), abs(rho[0, 2]), abs(rho[1, 3]), abs(rho[2, 3]))
    return max(off) < tol


def x_state_log_negativity(rho: np.ndarray, tol: float = 1e-8) -> float:
    """Closed-form logarithmic negativity for an X-state.

    The partial transpose splits into the {00,11} block carrying the old
    rho_23 coherence and the {01,10} block carrying rho_14; the candidate
    negative eigenvalues are the lower eigenvalue of each block.
    """
    if not is_x_state(rho, tol):
        raise ValueError("matrix is not an X-state within tolerance")
    d = np.real(np.diag(rho))
    mu1 = 0.5 * ((d[0] + d[3]) - np.sqrt((d[0] - d[3]) ** 2 + 4.0 * abs(rho[1, 2]) ** 2))
    mu2 = 0.5 * ((d[1] + d[2]) - np.sqrt((d[1] - d[2]) ** 2 + 4.0 * abs(rho[0, 3]) ** 2))
    value = float(np.log2(-2.0 * min(mu1, mu2, 0.0) + 1.0))
    return 0.0 if value < CLAMP_TOL else value


def profile(ensemble: StateEnsemble) -> np.ndarray:
    """Entanglement E_r between sites (0, r) for r = 1 .. N/2."""
    n = ensemble.n_sites
    return np.array([
        log_negativity(reduce_two_site(ensemble, 0, r))
        for r in range(1, n // 2 + 1)
    ])


def e_sum(profile_values: np.ndarray) -> float:
    """Total bipartite entanglement with one site: 2 * sum_r E_r."""
    return 2.0 * float(np.sum(profile_values))


def one_vs_rest_entanglement(ensemble: StateEnsemble) -> float:
    """Logarithmic negativity across the (site 0):(rest) bipartition.

    For a pure state the trace norm of the partial transpose is the squared
    sum of the Schmidt coefficients, read off the single-site reduced state.
    Mixed ensembles fall back to the explicit partial transpose of the dense
    density matrix, which is only feasible for N <= 12.
    """
    n = ensemble.n_sites
    dim = ensemble.vectors.shape[1]
    if ensemble.is_pure:
        vec = ensemble.vectors[0]
        # site 0 is the fastest bit: rows of the (2^(n-1), 2) matrix are the
        # environment, columns the site
        mat = vec.reshape(dim // 2, 2)
        lam = np.linalg.eigvalsh(mat.T @ mat)
        lam = np.clip(lam, 0.0, None)
        trace_norm = float(np.sqrt(lam).sum() ** 2)
        value = float(np.log2(trace_norm))
        return 0.0 if value < CLAMP_TOL else value
    if n > 12:
        raise ValueError("mixed-ensemble 1:rest entanglement requires N <= 12")
    scaled = ensemble.vectors * np.sqrt(ensemble.weights)[:, None]
    rho = scaled.T @ scaled
    rho4 = rho.reshape(dim // 2, 2, dim // 2, 2)
    pt = rho4.transpose(0, 3, 2, 1).reshape(dim, dim)
    eigs = np.linalg.eigvalsh(pt)
    negativity = -float(eigs[eigs < 0].sum())
    value = float(np.log2(2.0 * negativity + 1.0))
    return 0.0 if value < CLAMP_TOL else value
