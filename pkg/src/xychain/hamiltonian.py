"""Hamiltonian action on the 2^N spin basis.

Basis states are unsigned integers in [0, 2^N); bit k = 1 means spin k points
down (sigma^z eigenvalue -1).  In this basis the Hamiltonian is real
symmetric: per pair (i, j) the XX+YY part flips anti-aligned spin pairs with
amplitude J_ij/2, the anisotropic part flips aligned pairs with amplitude
gamma * J_ij / 2, and the transverse field contributes the diagonal
(h/2) * sum_i z_i.  Spin-flip parity (popcount mod 2) is conserved, so the
matrix splits into even and odd blocks of dimension 2^(N-1) each.

The production interface is a matrix-free matvec (bit-twiddling kernels
compiled with numba), either on the full space or restricted to one parity
sector.  Explicit dense assembly is provided for small N as an oracle.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .model import J, ModelSpec, build_couplings

_DENSE_MAX_SITES = 12


def popcounts(n_sites: int) -> np.ndarray:
    """Number of set bits for every basis index in [0, 2^n_sites)."""
    states = np.arange(1 << n_sites, dtype=np.uint32)
    counts = np.zeros(states.shape, dtype=np.int64)
    for k in range(n_sites):
        counts += (states >> k) & 1
    return counts


def parity_sectors(n_sites: int) -> tuple[np.ndarray, np.ndarray]:
    """Basis indices of the even and odd spin-flip parity sectors."""
    parity = popcounts(n_sites) & 1
    indices = np.arange(1 << n_sites, dtype=np.int64)
    return indices[parity == 0], indices[parity == 1]


def pair_couplings(spec: ModelSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Interacting site pairs (i, j) and their couplings J_ij.

    Each unordered pair at circular distance d <= z appears exactly once;
    at d = N/2 there are exactly N/2 such pairs on an even ring.
    """
    n = spec.n_sites
    rel = build_couplings(spec)
    ii, jj, strength = [], [], []
    for d in range(1, spec.z + 1):
        n_pairs = n if d < n // 2 else n // 2
        for i in range(n_pairs):
            ii.append(i)
            jj.append((i + d) % n)
            strength.append(J * rel[d - 1])
    return (
        np.array(ii, dtype=np.int64),
        np.array(jj, dtype=np.int64),
        np.array(strength, dtype=np.float64),
    )


@njit(cache=True, nogil=True)
def _matvec_full(v, out, masks, shift_i, shift_j, coeff_flip, coeff_pair, diag):
    # out[t] = diag[t] v[t] + sum_p coeff(t, p) v[t ^ mask_p]; the coefficient
    # is coeff_flip for anti-aligned bit pairs and coeff_pair for aligned ones.
    for t in range(v.size):
        acc = diag[t] * v[t]
        for p in range(masks.size):
            s = t ^ masks[p]
            if ((t >> shift_i[p]) ^ (t >> shift_j[p])) & 1:
                acc += coeff_flip[p] * v[s]
            else:
                acc += coeff_pair[p] * v[s]
        out[t] = acc
    return out


@njit(cache=True, nogil=True)
def _matvec_sector(v, out, basis, rank, masks, shift_i, shift_j,
                   coeff_flip, coeff_pair, diag):
    # Same action restricted to one parity sector; rank maps a full basis
    # index to its position inside the sector (flips never leave the sector).
    for idx in range(basis.size):
        t = basis[idx]
        acc = diag[idx] * v[idx]
        for p in range(masks.size):
            s = t ^ masks[p]
            if ((t >> shift_i[p]) ^ (t >> shift_j[p])) & 1:
                acc += coeff_flip[p] * v[rank[s]]
            else:
                acc += coeff_pair[p] * v[rank[s]]
        out[idx] = acc
    return out


class HamiltonianOp:
    """Matrix-free Hamiltonian for one ModelSpec.

    Immutable after construction; `matvec` allocates its output, so one
    instance can be shared across threads.
    """

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self.dim = spec.dim
        i, j, strength = pair_couplings(spec)
        self._masks = (1 << i) | (1 << j)
        self._shift_i = i
        self._shift_j = j
        # (1+g)/4 XX + (1-g)/4 YY expands to (J/2)(s+s- + s-s+) plus
        # (gJ/2)(s+s+ + s-s-): anti-aligned pairs flip with J_ij/2, aligned
        # pairs with gamma*J_ij/2.
        self._coeff_flip = 0.5 * strength
        self._coeff_pair = 0.5 * strength * spec.gamma
        # Diagonal: (h/2) * sum_i z_i with z_i = +1 for bit 0, -1 for bit 1.
        self._diag = 0.5 * spec.field * (spec.n_sites - 2.0 * popcounts(spec.n_sites))
        self._sectors = parity_sectors(spec.n_sites)
        self._rank = np.empty(self.dim, dtype=np.int64)
        for sector in self._sectors:
            self._rank[sector] = np.arange(sector.size)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        if v.shape != (self.dim,):
            raise ValueError(f"expected vector of length {self.dim}, got shape {v.shape}")
        out = np.empty_like(v, dtype=np.float64)
        return _matvec_full(
            np.ascontiguousarray(v, dtype=np.float64), out,
            self._masks, self._shift_i, self._shift_j,
            self._coeff_flip, self._coeff_pair, self._diag,
        )

    def sector_op(self, parity: int) -> "SectorOp":
        """Hamiltonian restricted to the even (0) or odd (1) parity sector."""
        return SectorOp(self, parity)

    @property
    def diagonal(self) -> np.ndarray:
        return self._diag


class SectorOp:
    """Parity-sector restriction of a HamiltonianOp (dimension 2^(N-1))."""

    def __init__(self, op: HamiltonianOp, parity: int):
        if parity not in (0, 1):
            raise ValueError("parity must be 0 (even) or 1 (odd)")
        self.parent = op
        self.parity = parity
        self.basis = op._sectors[parity]
        self.dim = self.basis.size
        self._diag = op._diag[self.basis]

    def matvec(self, v: np.ndarray) -> np.ndarray:
        if v.shape != (self.dim,):
            raise ValueError(f"expected vector of length {self.dim}, got shape {v.shape}")
        parent = self.parent
        out = np.empty_like(v, dtype=np.float64)
        return _matvec_sector(
            np.ascontiguousarray(v, dtype=np.float64), out,
            self.basis, parent._rank, parent._masks,
            parent._shift_i, parent._shift_j,
            parent._coeff_flip, parent._coeff_pair, self._diag,
        )

    def embed(self, v: np.ndarray) -> np.ndarray:
        """Scatter a sector vector into the full 2^N space."""
        full = np.zeros(self.parent.dim, dtype=np.float64)
        full[self.basis] = v
        return full

    def restrict(self, v: np.ndarray) -> np.ndarray:
        """Gather the sector components of a full-space vector."""
        return np.ascontiguousarray(v[self.basis], dtype=np.float64)


def assemble_dense(op: HamiltonianOp) -> np.ndarray:
    """Explicit dense matrix of the Hamiltonian (oracle path, N <= 12)."""
    if op.spec.n_sites > _DENSE_MAX_SITES:
        raise ValueError(f"dense assembly limited to N <= {_DENSE_MAX_SITES}")
    dim = op.dim
    h = np.diag(op._diag.astype(np.float64))
    cols = np.arange(dim, dtype=np.int64)
    for p in range(op._masks.size):
        rows = cols ^ op._masks[p]
        anti = ((cols >> op._shift_i[p]) ^ (cols >> op._shift_j[p])) & 1
        vals = np.where(anti == 1, op._coeff_flip[p], op._coeff_pair[p])
        h[rows, cols] += vals
    return h


def assemble_dense_sector(op: HamiltonianOp, parity: int) -> np.ndarray:
    """Dense matrix of one parity block (dimension 2^(N-1), N <= 12)."""
    if op.spec.n_sites > _DENSE_MAX_SITES:
        raise ValueError(f"dense assembly limited to N <= {_DENSE_MAX_SITES}")
    basis = op._sectors[parity]
    h = np.diag(op._diag[basis].astype(np.float64))
    cols = np.arange(basis.size, dtype=np.int64)
    for p in range(op._masks.size):
        rows = op._rank[basis ^ op._masks[p]]
        anti = ((basis >> op._shift_i[p]) ^ (basis >> op._shift_j[p])) & 1
        vals = np.where(anti == 1, op._coeff_flip[p], op._coeff_pair[p])
        h[rows, cols] += vals
    return h
