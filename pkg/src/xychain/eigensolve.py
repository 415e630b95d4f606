"""Low-lying spectra by Lanczos iteration with full reorthogonalization.

The solver keeps every Krylov vector and reorthogonalizes the new direction
against all of them (twice) at each step, which kills the ghost eigenvalues
that plain three-term Lanczos produces once extreme pairs converge.  This is
affordable here because the basis never exceeds a few hundred vectors of
dimension at most 2^16.

Exactly degenerate levels cannot all be reached from a single Krylov start
vector, so converged Ritz pairs are locked and the iteration restarts from a
fresh random vector deflated against everything locked, until no further
eigenvalue turns up below the highest requested level.

`lowest_spectrum` is the production driver: it runs the solver separately in
the two spin-flip parity sectors (where spectra are generically simple) and
merges the results; `dense_spectrum` and `full_spectrum` are the exact
reference paths for small systems.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .hamiltonian import HamiltonianOp

DEGENERACY_RTOL = 1e-9
_DENSE_MAX_DIM = 1 << 12


def degeneracy_groups(eigenvalues: np.ndarray, rtol: float = DEGENERACY_RTOL) -> list[tuple[int, int]]:
    """Half-open index ranges of quasi-degenerate levels.

    Two consecutive eigenvalues belong to the same group when their gap is
    below rtol * max(1, |e|).
    """
    groups = []
    start = 0
    for i in range(1, len(eigenvalues)):
        if eigenvalues[i] - eigenvalues[i - 1] >= rtol * max(1.0, abs(eigenvalues[i])):
            groups.append((start, i))
            start = i
    if len(eigenvalues):
        groups.append((start, len(eigenvalues)))
    return groups


@dataclass
class SpectrumSlice:
    """Ascending eigenvalues with orthonormal eigenvectors (rows) and residuals."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual_norms: np.ndarray
    converged: bool = True
    degeneracy_groups: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        if not self.degeneracy_groups:
            self.degeneracy_groups = degeneracy_groups(self.eigenvalues)

    def __len__(self) -> int:
        return len(self.eigenvalues)

    @property
    def ground_degeneracy(self) -> int:
        start, stop = self.degeneracy_groups[0]
        return stop - start


class _DenseOperator:
    def __init__(self, matrix: np.ndarray):
        self._m = matrix
        self.dim = matrix.shape[0]

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self._m @ v


def _as_operator(op):
    if isinstance(op, np.ndarray):
        return _DenseOperator(op)
    if hasattr(op, "matvec") and hasattr(op, "dim"):
        return op
    raise TypeError("operator must expose .matvec and .dim (or be a square ndarray)")


def _true_residuals(op, values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    res = np.empty(len(values))
    for i, (e, v) in enumerate(zip(values, vectors)):
        res[i] = np.linalg.norm(op.matvec(v) - e * v)
    return res


def _lanczos_pass(op, q0, locked, n_wanted, tol, max_steps, rng, check_every=25):
    """One deflated Krylov pass.

    Returns (values, row-vectors, steps used, lowest Ritz value).  The pass
    stops as soon as the `n_wanted` lowest Ritz pairs have residual estimates
    |beta * y_last| below tol, on Krylov breakdown (invariant subspace
    found), or at max_steps.  The lowest Ritz value is reported even when
    unconverged; it upper-bounds the smallest eigenvalue left in the
    deflated space.
    """
    dim = op.dim
    max_steps = min(max_steps, dim - len(locked))
    if max_steps <= 0:
        return np.empty(0), np.empty((0, dim)), 0, np.inf

    def deflate(w):
        if len(locked):
            w -= locked.T @ (locked @ w)
        return w

    q = deflate(q0.astype(np.float64).copy())
    nrm = np.linalg.norm(q)
    attempts = 0
    while nrm < 1e-8 and attempts < 5:
        q = deflate(rng.standard_normal(dim))
        nrm = np.linalg.norm(q)
        attempts += 1
    if nrm < 1e-8:
        return np.empty(0), np.empty((0, dim)), 0, np.inf
    q /= nrm

    basis = np.empty((max_steps, dim))
    alphas = np.empty(max_steps)
    betas = np.empty(max_steps)
    q_prev = np.zeros(dim)
    beta_prev = 0.0
    steps = 0
    exhausted = False

    for k in range(max_steps):
        basis[k] = q
        w = op.matvec(q)
        alpha = float(q @ w)
        alphas[k] = alpha
        w -= alpha * q
        if k > 0:
            w -= beta_prev * q_prev
        # full reorthogonalization, two classical Gram-Schmidt sweeps
        for _ in range(2):
            w -= basis[: k + 1].T @ (basis[: k + 1] @ w)
            w = deflate(w)
        beta = float(np.linalg.norm(w))
        betas[k] = beta
        steps = k + 1
        scale = max(1.0, float(np.max(np.abs(alphas[:steps]))))
        if beta < 1e-13 * scale:
            exhausted = True
            break
        if steps == max_steps or steps % check_every == 0:
            theta, y = eigh_tridiagonal(alphas[:steps], betas[: steps - 1])
            res_est = np.abs(beta * y[-1, :])
            n_low = min(n_wanted, steps)
            if np.all(res_est[:n_low] <= tol):
                break
        q_prev = q
        beta_prev = beta
        q = w / beta

    theta, y = eigh_tridiagonal(alphas[:steps], betas[: steps - 1])
    if exhausted:
        ok = np.arange(steps)
    else:
        res_est = np.abs(betas[steps - 1] * y[-1, :])
        ok = np.flatnonzero(res_est <= tol)
    if ok.size == 0:
        return np.empty(0), np.empty((0, dim)), steps, float(theta[0])
    vectors = (basis[:steps].T @ y[:, ok]).T
    # Ritz vectors inherit orthonormality from the basis; renormalize to be safe.
    vectors /= np.linalg.norm(vectors, axis=1)[:, None]
    return theta[ok], vectors, steps, float(theta[0])


def lanczos_lowest(op, m: int, *, tol: float = 1e-10, max_iter: int | None = None,
                   seed: int = 0, v0: np.ndarray | None = None,
                   deg_rtol: float = DEGENERACY_RTOL) -> SpectrumSlice:
    """The m lowest eigenpairs of a symmetric operator, degeneracies resolved.

    Restarts with deflation keep adding converged pairs until at least m are
    locked and one further probe finds nothing new below the m-th level (so a
    degenerate group at the boundary cannot be silently truncated).  On an
    exhausted iteration budget the partial result is returned with
    ``converged=False``.
    """
    op = _as_operator(op)
    dim = op.dim
    if not 0 < m <= dim:
        raise ValueError(f"m must lie in [1, {dim}], got {m}")
    if max_iter is None:
        max_iter = min(6 * dim, max(2000, 8 * m))
    pass_cap = min(dim, 2 * m + 400)
    probe_cap = max(150, m // 2 + 50)
    rng = np.random.default_rng(seed)

    locked_vals: list[float] = []
    locked_vecs = np.empty((0, dim))
    budget = max_iter
    start = v0 if v0 is not None else rng.standard_normal(dim)
    converged = True

    def lock(vals, vecs):
        nonlocal locked_vals, locked_vecs
        if len(locked_vecs):
            vecs = vecs - (vecs @ locked_vecs.T) @ locked_vecs
            norms = np.linalg.norm(vecs, axis=1)
            keep = norms > 0.5  # a duplicate direction collapses here
            vals, vecs, norms = vals[keep], vecs[keep], norms[keep]
            vecs = vecs / norms[:, None]
        if vals.size:
            locked_vals.extend(vals.tolist())
            locked_vecs = np.vstack([locked_vecs, vecs]) if len(locked_vecs) else vecs

    while True:
        need = m - len(locked_vals)
        if need > 0:
            if budget <= 0:
                converged = False
                break
            vals, vecs, used, _ = _lanczos_pass(
                op, start, locked_vecs, need, tol, min(pass_cap, budget), rng)
            budget -= max(used, 1)
            if vals.size:
                lock(vals, vecs)
            else:
                pass_cap = min(dim, 2 * pass_cap)  # try harder next round
            start = rng.standard_normal(dim)
            continue
        if len(locked_vals) >= dim:
            break
        # probe for missed degenerate partners below the m-th locked level
        edge = float(np.sort(np.array(locked_vals))[m - 1])
        edge_tol = deg_rtol * max(1.0, abs(edge))
        if budget <= 0:
            converged = False
            break
        vals, vecs, used, min_ritz = _lanczos_pass(
            op, rng.standard_normal(dim), locked_vecs, 1, tol,
            min(probe_cap, budget), rng)
        budget -= max(used, 1)
        if vals.size and vals[0] < edge + edge_tol:
            lock(vals, vecs)
            continue
        if min_ritz >= edge + edge_tol:
            break  # nothing new below the m-th level: stable
        probe_cap = min(dim, 2 * probe_cap)  # unconverged hint below edge
    if len(locked_vals) < m:
        converged = False

    order = np.argsort(np.array(locked_vals), kind="stable")
    values = np.array(locked_vals)[order]
    vectors = locked_vecs[order] if len(locked_vecs) else np.empty((0, dim))
    # keep the m lowest plus whatever completes the m-th degeneracy group
    if len(values) > m:
        edge = values[m - 1]
        stop = m
        while stop < len(values) and values[stop] - values[stop - 1] < deg_rtol * max(1.0, abs(values[stop])):
            stop += 1
        values, vectors = values[:stop], vectors[:stop]
    residuals = _true_residuals(op, values, vectors)
    if converged and len(residuals) and np.max(residuals) > 10 * tol:
        converged = False
    return SpectrumSlice(values, vectors, residuals, converged,
                         degeneracy_groups(values, deg_rtol))


def dense_spectrum(matrix: np.ndarray) -> SpectrumSlice:
    """Complete eigendecomposition of an explicit matrix (oracle, N <= 12)."""
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError("matrix must be square")
    if matrix.shape[0] > _DENSE_MAX_DIM:
        raise ValueError(f"dense path limited to dimension {_DENSE_MAX_DIM}")
    values, vectors = np.linalg.eigh(matrix)
    vectors = np.ascontiguousarray(vectors.T)
    residuals = np.linalg.norm(matrix @ vectors.T - vectors.T * values, axis=0)
    return SpectrumSlice(values, vectors, residuals, True)


def _sector_slice(op: HamiltonianOp, parity: int, m: int, tol: float,
                  seed: int, v0) -> SpectrumSlice:
    sec = op.sector_op(parity)
    if m >= sec.dim or (sec.dim <= _DENSE_MAX_DIM // 2 and m > sec.dim // 3):
        from .hamiltonian import assemble_dense_sector
        sl = dense_spectrum(assemble_dense_sector(op, parity))
    else:
        sl = lanczos_lowest(sec, m, tol=tol, seed=seed, v0=v0)
    full_vectors = np.zeros((len(sl), op.dim))
    full_vectors[:, sec.basis] = sl.eigenvectors
    return SpectrumSlice(sl.eigenvalues, full_vectors, sl.residual_norms, sl.converged)


def lowest_spectrum(op: HamiltonianOp, m: int, *, tol: float = 1e-10, seed: int = 0,
                    warm: np.ndarray | None = None) -> SpectrumSlice:
    """The m lowest eigenpairs of the full Hamiltonian via per-sector Lanczos.

    Parity blocks are solved independently and merged; the merge is certified
    by checking that each sector was computed at least up to the merged m-th
    eigenvalue, so no level below it can be missing.  `warm` may carry
    full-space start vectors (e.g. eigenvectors from a nearby parameter
    point) to accelerate scans.
    """
    if m >= op.dim:
        return full_spectrum(op)
    m_sector = m if m <= 16 else m // 2 + 30
    slices = {}
    for parity in (0, 1):
        v0 = _warm_sector_start(op, parity, warm)
        slices[parity] = _sector_slice(op, parity, min(m_sector, op.dim // 2), tol, seed, v0)
    while True:
        merged_vals = np.concatenate([slices[0].eigenvalues, slices[1].eigenvalues])
        if len(merged_vals) < m:
            raise RuntimeError("parity sectors returned fewer eigenpairs than requested")
        edge = np.sort(merged_vals)[m - 1]
        refit = [p for p in (0, 1)
                 if slices[p].eigenvalues[-1] < edge and len(slices[p]) < op.dim // 2]
        if not refit:
            break
        for parity in refit:
            grown = min(2 * len(slices[parity]) + 10, op.dim // 2)
            slices[parity] = _sector_slice(op, parity, grown, tol, seed,
                                           _warm_sector_start(op, parity, warm))

    values = np.concatenate([slices[0].eigenvalues, slices[1].eigenvalues])
    vectors = np.vstack([slices[0].eigenvectors, slices[1].eigenvectors])
    residuals = np.concatenate([slices[0].residual_norms, slices[1].residual_norms])
    order = np.argsort(values, kind="stable")
    values, vectors, residuals = values[order], vectors[order], residuals[order]
    stop = m
    while stop < len(values) and values[stop] - values[stop - 1] < DEGENERACY_RTOL * max(1.0, abs(values[stop])):
        stop += 1
    converged = slices[0].converged and slices[1].converged
    return SpectrumSlice(values[:stop], vectors[:stop], residuals[:stop], converged)


def full_spectrum(op: HamiltonianOp) -> SpectrumSlice:
    """All 2^N eigenpairs, computed exactly per parity sector (N <= 12)."""
    if op.dim > _DENSE_MAX_DIM:
        raise ValueError(f"full spectrum limited to dimension {_DENSE_MAX_DIM}")
    parts = [_sector_slice(op, parity, op.dim, 0.0, 0, None) for parity in (0, 1)]
    values = np.concatenate([p.eigenvalues for p in parts])
    vectors = np.vstack([p.eigenvectors for p in parts])
    residuals = np.concatenate([p.residual_norms for p in parts])
    order = np.argsort(values, kind="stable")
    return SpectrumSlice(values[order], vectors[order], residuals[order], True)


def _warm_sector_start(op: HamiltonianOp, parity: int, warm) -> np.ndarray | None:
    if warm is None:
        return None
    vectors = warm.eigenvectors if isinstance(warm, SpectrumSlice) else np.atleast_2d(warm)
    sec = op.sector_op(parity)
    best, best_norm = None, 0.1  # require a substantial sector component
    for vec in vectors:
        comp = sec.restrict(vec)
        nrm = np.linalg.norm(comp)
        if nrm > best_norm:
            best, best_norm = comp, nrm
    return best
