"""Derived analyses: factorization points, product-state energies, thermal
robustness, entanglement length, rigidity plateaus and max-entanglement gaps.

The factorization field is predicted from the coupling sum as
lam_f = sqrt(1 - gamma^2) * sum_d c_d and detected independently by scanning
the field for the point where the zero-temperature state loses all two-site
entanglement.  The product-state energy minimum E_P over all fully factorized
states doubles as the reference for the energy witness W = <H>_beta - E_P.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .entanglement import EPS_ACTIVE, log_negativity, profile, reduced_pair_blocks
from .hamiltonian import pair_couplings
from .model import ModelSpec, coordination_sum
from .states import (QUASI_DEG_TOL, ground_state_ensemble, spectrum_for,
                     thermal_weights)


# ---------------------------------------------------------------------------
# factorization points

def predicted_factorization(spec: ModelSpec) -> float:
    """Positive member of the +-lam_f pair where the ground state factorizes."""
    return math.sqrt(1.0 - spec.gamma ** 2) * coordination_sum(spec)


@dataclass
class FactorizationReport:
    predicted: float
    observed: float           # nan when the scan finds no entanglement dip
    step: float
    e_product: float          # product-state minimum at the predicted field
    e_ground: float           # exact ground energy at the predicted field
    found: bool
    matched: bool             # |predicted - observed| within one scan step
    min_total: float = math.nan   # deepest sum_r E_r seen in the window


def separability_floor(spec: ModelSpec) -> float:
    """Residual entanglement of the mixed zero-temperature state at the
    factorization field.

    The two factorized ground states overlap by c per site with
    c = sqrt((1-gamma)/(1+gamma)), leaving coherences of order c^(2N-2)/2 in
    the two-site reductions of their equal mixture on a finite ring.
    """
    c2 = (1.0 - spec.gamma) / (1.0 + spec.gamma)
    return 0.5 * c2 ** (spec.n_sites - 1)


# Slope scale of sum_r E_r against the field just off a factorization point;
# sets how deep the dip can get on a grid that straddles the point.
_DIP_SLOPE = 2.0


def observed_factorization(spec: ModelSpec, lam_min: float, lam_max: float,
                           step: float = 0.01, eps: float = EPS_ACTIVE,
                           *, seed: int = 0) -> FactorizationReport:
    """Scan the positive field branch for the entanglement dip.

    The observed point is the grid field at which the total two-site
    entanglement sum_r E_r attains its minimum inside the region where it
    dips below the detection threshold; reported with +-step uncertainty.
    The threshold is eps, raised when either finite-grid resolution (the
    total climbs away from the exact point with slope of order one, so a
    straddling grid dips only to about slope*step/2) or the finite-size
    separability floor dominates.
    """
    n_points = int(round((lam_max - lam_min) / step)) + 1
    grid = lam_min + step * np.arange(n_points)
    totals = np.empty(n_points)
    warm = None
    for k, lam in enumerate(grid):
        ensemble, spectrum = ground_state_ensemble(replace(spec, lam=float(lam)),
                                                   seed=seed, warm=warm,
                                                   quasi_deg_tol=QUASI_DEG_TOL)
        warm = spectrum
        totals[k] = profile(ensemble).sum()

    predicted = predicted_factorization(spec)
    at_pred = replace(spec, lam=predicted)
    e_product, _ = product_energy_min(at_pred, seed=seed)
    _, spectrum = ground_state_ensemble(at_pred, seed=seed)
    e_ground = float(spectrum.eigenvalues[0])

    threshold = max(eps, _DIP_SLOPE * step, 5.0 * separability_floor(spec))
    min_total = float(totals.min())
    below = totals < threshold
    if not below.any():
        return FactorizationReport(predicted, math.nan, step, e_product,
                                   e_ground, found=False, matched=False,
                                   min_total=min_total)
    masked = np.where(below, totals, np.inf)
    observed = float(grid[int(np.argmin(masked))])
    matched = abs(predicted - observed) <= step + 1e-12
    return FactorizationReport(predicted, observed, step, e_product, e_ground,
                               found=True, matched=matched, min_total=min_total)


# ---------------------------------------------------------------------------
# product-state energy minimization

@dataclass
class ProductAnsatz:
    """Bloch angles (theta_i, phi_i) of a fully factorized N-qubit state."""

    theta: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)


def _product_objective(spec: ModelSpec):
    ii, jj, strength = pair_couplings(spec)
    a = 0.25 * (1.0 + spec.gamma) * strength
    b = 0.25 * (1.0 - spec.gamma) * strength
    half_h = 0.5 * spec.field
    n = spec.n_sites

    def fun(x):
        theta, phi = x[:n], x[n:]
        st, ct = np.sin(theta), np.cos(theta)
        sx = st * np.cos(phi)
        sy = st * np.sin(phi)
        energy = float(np.sum(a * sx[ii] * sx[jj] + b * sy[ii] * sy[jj])
                       + half_h * np.sum(ct))
        # field each site feels from its partners, per spin component
        gx = np.zeros(n)
        gy = np.zeros(n)
        np.add.at(gx, ii, a * sx[jj])
        np.add.at(gx, jj, a * sx[ii])
        np.add.at(gy, ii, b * sy[jj])
        np.add.at(gy, jj, b * sy[ii])
        cp, sp = np.cos(phi), np.sin(phi)
        d_theta = gx * ct * cp + gy * ct * sp - half_h * st
        d_phi = -gx * st * sp + gy * st * cp
        return energy, np.concatenate([d_theta, d_phi])

    return fun


def product_energy_gradient(spec: ModelSpec, theta: np.ndarray, phi: np.ndarray):
    """Energy and analytic gradient of <psi_P|H|psi_P> at the given angles."""
    return _product_objective(spec)(np.concatenate([theta, phi]))


def _warm_starts(n: int) -> list[np.ndarray]:
    starts = []
    alternating = np.where(np.arange(n) % 2 == 0, 0.0, np.pi)
    for c in (-0.9, -0.5, 0.0, 0.5, 0.9):
        theta = np.full(n, math.acos(c))
        starts.append(np.concatenate([theta, np.zeros(n)]))
        starts.append(np.concatenate([theta, alternating]))
    return starts


def product_energy_min(spec: ModelSpec, restarts: int = 32, tol: float = 1e-12,
                       *, seed: int = 0) -> tuple[float, ProductAnsatz]:
    """Minimum energy over fully factorized states, by multi-start descent.

    Quasi-Newton descent with the analytic gradient from each of `restarts`
    seeded random starts plus site-uniform warm starts (the factorized ground
    states of this family are uniform up to phi sign patterns).
    """
    n = spec.n_sites
    fun = _product_objective(spec)
    rng = np.random.default_rng(seed)
    starts = _warm_starts(n)
    for _ in range(restarts):
        theta = rng.uniform(0.0, np.pi, size=n)
        phi = rng.uniform(0.0, 2.0 * np.pi, size=n)
        starts.append(np.concatenate([theta, phi]))

    best = None
    failures = 0
    for x0 in starts:
        res = minimize(fun, x0, jac=True, method="L-BFGS-B",
                       options={"maxiter": 1000, "ftol": tol, "gtol": 1e-11})
        if not (res.success or np.linalg.norm(res.jac) < 1e-7):
            failures += 1
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise RuntimeError(f"product-state minimization failed in all {len(starts)} starts")

    theta = np.mod(best.x[:n], 2.0 * np.pi)
    phi = np.mod(best.x[n:], 2.0 * np.pi)
    flip = theta > np.pi
    theta[flip] = 2.0 * np.pi - theta[flip]
    phi[flip] = np.mod(phi[flip] + np.pi, 2.0 * np.pi)
    return float(best.fun), ProductAnsatz(theta, phi)


# ---------------------------------------------------------------------------
# thermal robustness

def witness(spec: ModelSpec, beta: float, m: int, *, spectrum=None,
            product_energy: float | None = None, seed: int = 0) -> float:
    """Energy-based entanglement witness W = <H>_beta - E_P.

    Negative W certifies that the canonical state at inverse temperature
    beta cannot be a mixture of product states.
    """
    if spectrum is None:
        spectrum = spectrum_for(spec, m, seed=seed)
    energies = spectrum.eigenvalues[:m]
    if math.isinf(beta):
        energy = float(energies[0])
    else:
        energy = float(thermal_weights(energies, beta) @ energies)
    if product_energy is None:
        product_energy, _ = product_energy_min(spec, seed=seed)
    return energy - product_energy


def beta_star_from_spectrum(spectrum, n_sites: int, beta_grid: np.ndarray, *,
                            m: int | None = None, eps: float = EPS_ACTIVE,
                            resolution: float = 1e-3, blocks=None) -> float:
    """Smallest beta at which nearest-neighbour entanglement exceeds eps.

    Coarse scan over beta_grid followed by bisection of the bracketing
    interval down to `resolution`; returns nan when E_1 never activates in
    the window.
    """
    m = len(spectrum) if m is None else m
    energies = spectrum.eigenvalues[:m]
    if blocks is None:
        blocks = reduced_pair_blocks(spectrum.eigenvectors[:m], n_sites, 0, 1)
    else:
        blocks = blocks[:m]

    def e1(beta: float) -> float:
        rho = np.tensordot(thermal_weights(energies, beta), blocks, axes=1)
        return log_negativity(rho)

    values = np.array([e1(b) for b in beta_grid])
    active = values > eps
    if not active.any():
        return math.nan
    k = int(np.argmax(active))
    if k == 0:
        return float(beta_grid[0])
    lo, hi = float(beta_grid[k - 1]), float(beta_grid[k])
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if e1(mid) > eps:
            hi = mid
        else:
            lo = mid
    return hi


def beta_star(spec: ModelSpec, *, m: int, beta_min: float = 0.0,
              beta_max: float = 5.0, step: float = 0.01, eps: float = EPS_ACTIVE,
              resolution: float = 1e-3, spectrum=None, seed: int = 0) -> float:
    """Critical inverse temperature of nearest-neighbour entanglement."""
    if spectrum is None:
        spectrum = spectrum_for(spec, m, seed=seed)
    grid = beta_min + step * np.arange(int(round((beta_max - beta_min) / step)) + 1)
    return beta_star_from_spectrum(spectrum, spec.n_sites, grid, m=m,
                                   eps=eps, resolution=resolution)


# ---------------------------------------------------------------------------
# entanglement length

@dataclass
class LengthFit:
    """Parameters of the decay fit E_r = a + b * exp(-r / xi)."""

    a: float
    b: float
    xi: float
    residual_rms: float
    r_max: int
    valid: bool


def entanglement_length(profile_values: np.ndarray, eps: float = EPS_ACTIVE) -> LengthFit:
    """Fit the entanglement decay length over r = 1 .. r_max (E_r > eps).

    Damped Gauss-Newton on (a, b, xi); an undefined result (fewer than three
    usable points, or a collapsed fit) is reported through `valid`, not
    raised.
    """
    values = np.asarray(profile_values, dtype=float)
    above = np.flatnonzero(values > eps)
    if above.size == 0 or above[-1] + 1 < 3:
        return LengthFit(math.nan, math.nan, math.nan, math.nan, 0, valid=False)
    r_max = int(above[-1]) + 1
    r = np.arange(1, r_max + 1, dtype=float)
    y = values[:r_max]

    a0 = y[-1]
    d1, d2 = y[0] - a0, y[1] - a0
    if d1 > 0 and d2 > 0 and d1 > d2:
        xi0 = 1.0 / math.log(d1 / d2)
        b0 = d1 * math.exp(1.0 / xi0)
    else:
        xi0, b0 = 1.0, max(d1, 1e-3)
    p = np.array([a0, b0, xi0])

    mu = 1e-6
    for _ in range(200):
        decay = np.exp(-r / p[2])
        res = p[0] + p[1] * decay - y
        jac = np.column_stack([np.ones_like(r), decay,
                               p[1] * decay * r / p[2] ** 2])
        grad = jac.T @ res
        if np.linalg.norm(grad) < 1e-14:
            break
        lhs = jac.T @ jac + mu * np.eye(3)
        step_vec = np.linalg.solve(lhs, -grad)
        p_new = p + step_vec
        if p_new[2] <= 0:
            mu *= 10.0
            continue
        res_new = p_new[0] + p_new[1] * np.exp(-r / p_new[2]) - y
        if res_new @ res_new < res @ res:
            p = p_new
            mu = max(mu / 10.0, 1e-12)
        else:
            mu *= 10.0
            if mu > 1e12:
                break

    decay = np.exp(-r / p[2])
    res = p[0] + p[1] * decay - y
    rms = float(np.sqrt(np.mean(res ** 2)))
    valid = bool(np.isfinite(p).all() and p[2] > 0)
    return LengthFit(float(p[0]), float(p[1]), float(p[2]), rms, r_max, valid)


# ---------------------------------------------------------------------------
# sweeps over the field axis

def profile_sweep(spec: ModelSpec, lam_values: np.ndarray, *, seed: int = 0,
                  quasi_deg_tol: float | None = QUASI_DEG_TOL) -> np.ndarray:
    """Zero-temperature profiles for each field value; shape (n_lam, N/2).

    Consecutive points warm-start the eigensolver with the previous
    eigenvectors, so scans should be ordered along the field axis.
    """
    profiles = np.empty((len(lam_values), spec.n_sites // 2))
    warm = None
    for k, lam in enumerate(lam_values):
        ensemble, spectrum = ground_state_ensemble(replace(spec, lam=float(lam)),
                                                   seed=seed, warm=warm,
                                                   quasi_deg_tol=quasi_deg_tol)
        warm = spectrum
        profiles[k] = profile(ensemble)
    return profiles


def max_entanglement_gaps(profiles: np.ndarray) -> np.ndarray:
    """Gaps E_r^max - E_{r+1}^max of the per-distance maxima over the field grid."""
    e_max = np.asarray(profiles).max(axis=0)
    return e_max[:-1] - e_max[1:]


# ---------------------------------------------------------------------------
# rigidity of the critical temperature

@dataclass
class RigidityScan:
    lam_values: np.ndarray
    beta_stars: np.ndarray
    plateaus: list[tuple[float, float, float]]  # (lam_start, lam_end, beta*)


def rigidity_scan(spec: ModelSpec, lam_values: np.ndarray, *, z: int | None = None,
                  m: int | None = None, beta_min: float = 0.0, beta_max: float = 5.0,
                  beta_step: float = 0.01, eps: float = EPS_ACTIVE,
                  resolution: float = 1e-3, seed: int = 0) -> RigidityScan:
    """beta*(lam) at maximal range, with plateaus of constant beta*.

    A plateau is a maximal run of consecutive grid fields whose beta* stays
    within the bisection resolution of the run's first value.
    """
    z = spec.n_sites // 2 if z is None else z
    m = spec.dim if m is None else m
    grid = beta_min + beta_step * np.arange(int(round((beta_max - beta_min) / beta_step)) + 1)
    stars = np.empty(len(lam_values))
    for k, lam in enumerate(lam_values):
        spec_l = replace(spec, lam=float(lam), z=z)
        spectrum = spectrum_for(spec_l, m, seed=seed)
        stars[k] = beta_star_from_spectrum(spectrum, spec_l.n_sites, grid,
                                           m=m, eps=eps, resolution=resolution)

    plateaus = []
    start = None
    for k, value in enumerate(stars):
        if start is None:
            if math.isfinite(value):
                start, level = k, value
            continue
        if not math.isfinite(value) or abs(value - level) > resolution:
            plateaus.append((float(lam_values[start]), float(lam_values[k - 1]), level))
            start, level = (k, value) if math.isfinite(value) else (None, math.nan)
    if start is not None:
        plateaus.append((float(lam_values[start]), float(lam_values[-1]), level))
    return RigidityScan(np.asarray(lam_values, dtype=float), stars, plateaus)
