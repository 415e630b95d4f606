"""Command-line interface: config-driven sweeps with reproducible CSV output.

Each command reproduces one family of tables or figure data sets: two-site
entanglement profiles against the field, predicted/observed factorization
points, thermal entanglement and witness curves with critical temperatures,
entanglement lengths, monogamy sums, rigidity plateaus, and the
product-vs-ground energy comparison at the predicted factorization fields.

Configs are INI files with [model], [scan], [output] and [run] sections (see
README).  Every CSV starts with comment lines embedding the fully resolved
configuration, so identical config and seed reproduce identical files.
Exit codes: 0 success, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .analysis import (beta_star_from_spectrum, entanglement_length,
                       observed_factorization, predicted_factorization,
                       product_energy_min, profile_sweep)
from .entanglement import EPS_ACTIVE, e_sum, reduced_pair_blocks
from .eigensolve import lowest_spectrum
from .hamiltonian import HamiltonianOp
from .model import Falloff, ModelSpec
from .states import QUASI_DEG_TOL, converge_truncation, spectrum_for, thermal_weights

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(Exception):
    pass


class NumericalError(Exception):
    pass


@dataclass
class RunConfig:
    n_sites: int
    z_list: list[int]
    gamma_list: list[float]
    falloff: Falloff
    alpha: float
    lam_min: float = -3.0
    lam_max: float = 3.0
    lam_step: float = 0.01
    lam_values: list[float] = field(default_factory=list)
    beta_min: float = 0.0
    beta_max: float = 5.0
    beta_step: float = 0.01
    m: int = 300
    m_protocol: bool = False
    witness: bool = False
    facpoint_back: float = 0.10
    facpoint_fwd: float = 0.04
    eps: float = EPS_ACTIVE
    precision: int = 9
    seed: int = 0
    workers: int = 0

    @property
    def gamma(self) -> float:
        return self.gamma_list[0]

    def spec(self, *, z: int | None = None, gamma: float | None = None,
             lam: float = 0.0) -> ModelSpec:
        return ModelSpec(self.n_sites, z if z is not None else self.z_list[0],
                         gamma if gamma is not None else self.gamma, lam,
                         self.falloff, self.alpha)

    def stamp(self) -> list[str]:
        """Fully resolved configuration, one comment line per key."""
        items = [("version", __version__)]
        for key, value in vars(self).items():
            if isinstance(value, Falloff):
                value = value.value
            items.append((key, value))
        return [f"# {key} = {value}" for key, value in items]


def _get(parser: configparser.ConfigParser, section: str, key: str, cast,
         default=None, required: bool = False):
    if not parser.has_option(section, key):
        if required:
            raise ConfigError(f"[{section}] {key}: required key is missing")
        return default
    raw = parser.get(section, key)
    try:
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None


def _int_list(raw: str) -> list[int]:
    return [int(tok) for tok in raw.replace(",", " ").split()]


def _float_list(raw: str) -> list[float]:
    return [float(tok) for tok in raw.replace(",", " ").split()]


def _bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "on", "true", "yes"):
        return True
    if lowered in ("0", "off", "false", "no"):
        return False
    raise ValueError(f"expected on/off, got {raw!r}")


def _falloff(raw: str) -> Falloff:
    lowered = raw.strip().lower()
    for member in Falloff:
        if lowered in (member.value, member.name.lower()):
            return member
    raise ValueError(f"unknown falloff {raw!r} (use exponential or power)")


def load_config(path: str) -> RunConfig:
    parser = configparser.ConfigParser()
    try:
        with open(path) as handle:
            parser.read_file(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    for section in ("model",):
        if not parser.has_section(section):
            raise ConfigError(f"missing required section [{section}]")

    cfg = RunConfig(
        n_sites=_get(parser, "model", "n_sites", int, required=True),
        z_list=_get(parser, "model", "z", _int_list, required=True),
        gamma_list=_get(parser, "model", "gamma", _float_list, required=True),
        falloff=_get(parser, "model", "falloff", _falloff, Falloff.EXPONENTIAL),
        alpha=_get(parser, "model", "alpha", float, 2.0),
    )
    if parser.has_section("scan"):
        cfg.lam_min = _get(parser, "scan", "lambda_min", float, cfg.lam_min)
        cfg.lam_max = _get(parser, "scan", "lambda_max", float, cfg.lam_max)
        cfg.lam_step = _get(parser, "scan", "lambda_step", float, cfg.lam_step)
        cfg.lam_values = _get(parser, "scan", "lambda_values", _float_list, [])
        cfg.beta_min = _get(parser, "scan", "beta_min", float, cfg.beta_min)
        cfg.beta_max = _get(parser, "scan", "beta_max", float, cfg.beta_max)
        cfg.beta_step = _get(parser, "scan", "beta_step", float, cfg.beta_step)
        cfg.m = _get(parser, "scan", "m", int, cfg.m)
        cfg.m_protocol = _get(parser, "scan", "m_protocol", _bool, cfg.m_protocol)
        cfg.witness = _get(parser, "scan", "witness", _bool, cfg.witness)
        cfg.facpoint_back = _get(parser, "scan", "facpoint_back", float, cfg.facpoint_back)
        cfg.facpoint_fwd = _get(parser, "scan", "facpoint_fwd", float, cfg.facpoint_fwd)
        cfg.eps = _get(parser, "scan", "eps", float, cfg.eps)
    if parser.has_section("output"):
        cfg.precision = _get(parser, "output", "precision", int, cfg.precision)
    if parser.has_section("run"):
        cfg.seed = _get(parser, "run", "seed", int, cfg.seed)
        cfg.workers = _get(parser, "run", "workers", int, cfg.workers)

    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.n_sites < 2 or cfg.n_sites > 16 or cfg.n_sites % 2:
        raise ConfigError(f"[model] n_sites = {cfg.n_sites}: must be even, in [2, 16]")
    if not cfg.z_list:
        raise ConfigError("[model] z: empty range list")
    for z in cfg.z_list:
        if not 1 <= z <= cfg.n_sites // 2:
            raise ConfigError(f"[model] z = {z}: outside [1, {cfg.n_sites // 2}]")
    for gamma in cfg.gamma_list:
        if not 0.0 <= gamma <= 1.0:
            raise ConfigError(f"[model] gamma = {gamma}: outside [0, 1]")
    if cfg.alpha <= 0:
        raise ConfigError(f"[model] alpha = {cfg.alpha}: must be positive")
    if cfg.lam_step <= 0 or cfg.beta_step <= 0:
        raise ConfigError("[scan] lambda_step and beta_step must be positive")
    if cfg.lam_max <= cfg.lam_min:
        raise ConfigError(f"[scan] empty lambda range [{cfg.lam_min}, {cfg.lam_max}]")
    if cfg.beta_max <= cfg.beta_min:
        raise ConfigError(f"[scan] empty beta range [{cfg.beta_min}, {cfg.beta_max}]")
    if cfg.m < 1:
        raise ConfigError(f"[scan] m = {cfg.m}: must be positive")
    if cfg.precision < 6:
        raise ConfigError(f"[output] precision = {cfg.precision}: at least 6 digits")
    if cfg.workers < 0:
        raise ConfigError(f"[run] workers = {cfg.workers}: must be nonnegative")


def _grid(lo: float, hi: float, step: float) -> np.ndarray:
    return lo + step * np.arange(int(round((hi - lo) / step)) + 1)


class CsvWriter:
    """Comment-stamped CSV with fixed significant digits and a NaN guard."""

    def __init__(self, path: str, stamp: list[str], columns: list[str], precision: int):
        self.path = path
        self._precision = precision
        self._lines = list(stamp)
        self._lines.append(",".join(columns))
        self._n_cols = len(columns)

    def comment(self, text: str) -> None:
        self._lines.append(f"# {text}")

    def row(self, values) -> None:
        cells = []
        for value in values:
            if isinstance(value, str):
                cells.append(value)
                continue
            value = float(value)
            if not math.isfinite(value):
                raise NumericalError(f"non-finite value in output row for {self.path}")
            cells.append(f"{value:.{self._precision}g}")
        if len(cells) != self._n_cols:
            raise NumericalError(f"row width mismatch in {self.path}")
        self._lines.append(",".join(cells))

    def write(self) -> None:
        with open(self.path, "w") as handle:
            handle.write("\n".join(self._lines) + "\n")


def _pool_map(fn, items, workers: int):
    """Map preserving item order; thread pool when workers allow."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _workers(cfg: RunConfig) -> int:
    return cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# commands

def cmd_profile(cfg: RunConfig, out_dir: str) -> list[str]:
    lams = _grid(cfg.lam_min, cfg.lam_max, cfg.lam_step)
    half = cfg.n_sites // 2

    def run(z: int) -> np.ndarray:
        return profile_sweep(cfg.spec(z=z), lams, seed=cfg.seed)

    results = _pool_map(run, cfg.z_list, _workers(cfg))
    paths = []
    for z, profiles in zip(cfg.z_list, results):
        path = os.path.join(out_dir, f"profile_z{z}.csv")
        writer = CsvWriter(path, cfg.stamp(), ["lambda"] + [f"E_{r}" for r in range(1, half + 1)],
                           cfg.precision)
        for lam, row in zip(lams, profiles):
            writer.row([lam, *row])
        writer.write()
        paths.append(path)
    return paths


def cmd_facpoint(cfg: RunConfig, out_dir: str) -> list[str]:
    step = cfg.lam_step
    rows = [(gamma, z) for gamma in cfg.gamma_list for z in cfg.z_list]

    def run(row):
        gamma, z = row
        spec = cfg.spec(z=z, gamma=gamma)
        predicted = predicted_factorization(spec)
        lo = math.floor((predicted - cfg.facpoint_back) / step) * step
        hi = math.ceil((predicted + cfg.facpoint_fwd) / step) * step
        return observed_factorization(spec, lo, hi, step, cfg.eps, seed=cfg.seed)

    reports = _pool_map(run, rows, _workers(cfg))
    path = os.path.join(out_dir, "facpoint.csv")
    writer = CsvWriter(path, cfg.stamp(),
                       ["z", "gamma", "predicted", "observed", "abs_delta", "found"],
                       cfg.precision)
    for (gamma, z), rep in zip(rows, reports):
        if rep.found:
            writer.row([z, gamma, f"{rep.predicted:.3f}", f"{rep.observed:.2f}",
                        f"{abs(rep.predicted - rep.observed):.3f}", 1])
        else:
            writer.row([z, gamma, f"{rep.predicted:.3f}", "", "", 0])
    writer.write()
    return [path]


def _thermal_m(cfg: RunConfig) -> int:
    dim = 1 << cfg.n_sites
    if dim <= 1 << 12:
        return dim
    if cfg.m_protocol:
        betas = _grid(cfg.beta_min, cfg.beta_max, cfg.beta_step)
        return converge_truncation(cfg.spec(), betas, cfg.z_list, eps=cfg.eps)
    return cfg.m


def cmd_thermal(cfg: RunConfig, out_dir: str) -> list[str]:
    betas = _grid(cfg.beta_min, cfg.beta_max, cfg.beta_step)
    m = _thermal_m(cfg)

    def run(z: int):
        spec = cfg.spec(z=z)
        spectrum = spectrum_for(spec, m, seed=cfg.seed)
        if not spectrum.converged:
            raise NumericalError(f"eigensolver did not converge for z={z}")
        m_eff = min(m, len(spectrum))
        energies = spectrum.eigenvalues[:m_eff]
        blocks = reduced_pair_blocks(spectrum.eigenvectors[:m_eff], cfg.n_sites, 0, 1)
        from .entanglement import log_negativity
        e1 = np.array([
            log_negativity(np.tensordot(thermal_weights(energies, b), blocks, axes=1))
            for b in betas
        ])
        star = beta_star_from_spectrum(spectrum, cfg.n_sites, betas, m=m_eff,
                                       eps=cfg.eps, blocks=blocks)
        w = None
        if cfg.witness:
            e_prod, _ = product_energy_min(spec, seed=cfg.seed)
            w = np.array([float(thermal_weights(energies, b) @ energies) - e_prod
                          for b in betas])
        return e1, w, star

    results = _pool_map(run, cfg.z_list, _workers(cfg))
    path = os.path.join(out_dir, "thermal.csv")
    columns = ["beta"] + [f"E1_z{z}" for z in cfg.z_list]
    if cfg.witness:
        columns += [f"W_z{z}" for z in cfg.z_list]
    writer = CsvWriter(path, cfg.stamp(), columns, cfg.precision)
    writer.comment(f"truncation m = {m}")
    for k, beta in enumerate(betas):
        row = [beta] + [res[0][k] for res in results]
        if cfg.witness:
            row += [res[1][k] for res in results]
        writer.row(row)
    for z, res in zip(cfg.z_list, results):
        star = res[2]
        writer.comment(f"beta_star z={z}: " +
                       (f"{star:.3f}" if math.isfinite(star) else
                        f"none in [{cfg.beta_min}, {cfg.beta_max}]"))
    writer.write()
    return [path]


def cmd_length(cfg: RunConfig, out_dir: str) -> list[str]:
    lam_values = cfg.lam_values or [cfg.lam_min]
    paths = []
    for lam in lam_values:
        def run(z: int):
            profiles = profile_sweep(cfg.spec(z=z, lam=lam), np.array([lam]),
                                     seed=cfg.seed)
            return entanglement_length(profiles[0], cfg.eps)

        fits = _pool_map(run, cfg.z_list, _workers(cfg))
        tag = f"{lam:g}".replace(".", "p").replace("-", "m")
        path = os.path.join(out_dir, f"length_lam{tag}.csv")
        writer = CsvWriter(path, cfg.stamp(),
                           ["z", "xi", "a", "b", "residual_rms", "r_max", "valid"],
                           cfg.precision)
        writer.comment(f"lambda = {lam}")
        for z, fit in zip(cfg.z_list, fits):
            if fit.valid:
                writer.row([z, fit.xi, fit.a, fit.b, fit.residual_rms, fit.r_max, 1])
            else:
                writer.row([z, "", "", "", "", fit.r_max, 0])
        writer.write()
        paths.append(path)
    return paths


def cmd_monogamy(cfg: RunConfig, out_dir: str) -> list[str]:
    lams = _grid(cfg.lam_min, cfg.lam_max, cfg.lam_step)

    def run(z: int) -> np.ndarray:
        profiles = profile_sweep(cfg.spec(z=z), lams, seed=cfg.seed)
        return np.array([e_sum(row) for row in profiles])

    results = _pool_map(run, cfg.z_list, _workers(cfg))
    path = os.path.join(out_dir, "monogamy.csv")
    writer = CsvWriter(path, cfg.stamp(),
                       ["lambda"] + [f"esum_z{z}" for z in cfg.z_list], cfg.precision)
    writer.comment(f"algebraic maximum N/2 - 1 = {cfg.n_sites // 2 - 1}")
    for k, lam in enumerate(lams):
        writer.row([lam] + [res[k] for res in results])
    writer.write()
    return [path]


def cmd_rigidity(cfg: RunConfig, out_dir: str) -> list[str]:
    from .analysis import rigidity_scan
    lams = _grid(cfg.lam_min, cfg.lam_max, cfg.lam_step)
    paths = []
    for gamma in cfg.gamma_list:
        scan = rigidity_scan(cfg.spec(gamma=gamma), lams, z=max(cfg.z_list),
                             beta_min=cfg.beta_min, beta_max=cfg.beta_max,
                             beta_step=cfg.beta_step, eps=cfg.eps, seed=cfg.seed)
        tag = f"{gamma:g}".replace(".", "p")
        path = os.path.join(out_dir, f"rigidity_gamma{tag}.csv")
        writer = CsvWriter(path, cfg.stamp(), ["lambda", "beta_star"], cfg.precision)
        for lam, star in zip(scan.lam_values, scan.beta_stars):
            writer.row([lam, star if math.isfinite(star) else ""])
        writer.comment(f"plateau count = {len(scan.plateaus)}")
        for lo, hi, level in scan.plateaus:
            writer.comment(f"plateau [{lo:g}, {hi:g}] beta_star = {level:.3f}")
        writer.write()
        paths.append(path)
    return paths


def cmd_table1(cfg: RunConfig, out_dir: str) -> list[str]:
    def run(z: int):
        spec = cfg.spec(z=z)
        lam_f = predicted_factorization(spec)
        at_point = replace(spec, lam=lam_f)
        e_prod, _ = product_energy_min(at_point, seed=cfg.seed)
        spectrum = lowest_spectrum(HamiltonianOp(at_point), 2, seed=cfg.seed)
        return lam_f, e_prod, float(spectrum.eigenvalues[0])

    results = _pool_map(run, cfg.z_list, _workers(cfg))
    path = os.path.join(out_dir, "table1.csv")
    writer = CsvWriter(path, cfg.stamp(),
                       ["z", "lambda_f", "e_product", "e_ground", "abs_diff"],
                       cfg.precision)
    for z, (lam_f, e_prod, e_ground) in zip(cfg.z_list, results):
        writer.row([z, lam_f, e_prod, e_ground, abs(e_prod - e_ground)])
    writer.write()
    return [path]


COMMANDS = {
    "profile": cmd_profile,
    "facpoint": cmd_facpoint,
    "thermal": cmd_thermal,
    "length": cmd_length,
    "monogamy": cmd_monogamy,
    "rigidity": cmd_rigidity,
    "tableI": cmd_table1,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="xychain",
        description="Entanglement analysis of the variable-range anisotropic XY chain")
    parser.add_argument("command", choices=sorted(COMMANDS),
                        help="which table/figure data set to produce "
                             "(tableI compares product and ground energies at "
                             "the predicted factorization fields)")
    parser.add_argument("--config", required=True, help="INI config path")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--workers", type=int, default=None,
                        help="worker threads (default: config, then all cores)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.workers is not None:
            if args.workers < 0:
                raise ConfigError(f"--workers {args.workers}: must be nonnegative")
            cfg.workers = args.workers
        if args.seed is not None:
            cfg.seed = args.seed
        os.makedirs(args.out, exist_ok=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        paths = COMMANDS[args.command](cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, RuntimeError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for path in paths:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
