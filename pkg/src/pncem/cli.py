"""Experiment harness.

Subcommands reproduce the simulation-study tables (iteration counts and
estimates per scheme on the phi x gamma grid) and emit curve data for the
optimal working parameters as CSV.  Desk-scale defaults (n=2000, 20
replicates, 20000 Gibbs draws) keep a full run in minutes; --paper-scale
switches to n=10^4 (and 1000 replicates for aopt-curve).

Everything is deterministic given --seed: replicate r of any setting uses
seed + r for its dataset, and Gibbs chains derive their own streams from the
same base.  Exit codes: 0 success, 1 configuration error, 2 numerical
failure in any replicate when --strict is set.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import em, gibbs, vb, workparam
from .model import ModelParams, Parametrization, TimeSeries, simulate, write_series_csv

DEFAULT_PHI = (-0.95, 0.1, 0.95)
DEFAULT_SIGMA_ETA = (0.01, 0.1, 1.0)

TABLE1_SCHEMES = ("noncentered", "centered", "partial")
TABLE2_SCHEMES = ("noncentered", "centered", "partial", "approx")
# algorithm3 scheme name -> (cycle2_scheme, scale_scheme); the partial and
# approx rows keep the noncentered scheme in cycle 2, whose augmented
# information does not depend on (a, w).
TABLE3_SCHEMES = {
    "noncentered": ("noncentered", "noncentered"),
    "centered": ("centered", "centered"),
    "partial": ("noncentered", "partial"),
    "approx": ("noncentered", "approx"),
}


class ConfigError(Exception):
    pass


@dataclass
class ExperimentConfig:
    n: int = 2000
    replicates: int = 20
    mu: float = 1.0
    sigma_eps_sq: float = 0.1
    sigma_eta_sq_list: tuple = DEFAULT_SIGMA_ETA
    phi_list: tuple = DEFAULT_PHI
    schemes: tuple = ()
    seed: int = 20260808
    tol: float = 1e-8
    max_iter: int = 10000
    gibbs_draws: int = 20000
    curve_points: int = 21
    out: Path = field(default_factory=lambda: Path("pncem-out"))
    paper_scale: bool = False
    strict: bool = False
    workers: int = 1
    n_explicit: bool = False  # whether n came from a flag or config file

    def __post_init__(self):
        if self.paper_scale:
            self.n = 10000
        if not self.phi_list or not self.sigma_eta_sq_list:
            raise ConfigError("phi_list and sigma_eta_sq_list must be nonempty")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.n < 2:
            raise ConfigError("n must be >= 2")
        for phi in self.phi_list:
            if not abs(phi) < 1:
                raise ConfigError(f"phi {phi} outside (-1, 1)")
        for sn2 in self.sigma_eta_sq_list:
            if not sn2 > 0:
                raise ConfigError(f"sigma_eta_sq {sn2} not positive")
        self.out = Path(self.out)

    def settings(self):
        for phi in self.phi_list:
            for sn2 in self.sigma_eta_sq_list:
                yield phi, sn2

    def params(self, phi: float, sn2: float) -> ModelParams:
        return ModelParams(self.mu, sn2, self.sigma_eps_sq, phi)


# ---------------------------------------------------------------------------
# CSV / table helpers
# ---------------------------------------------------------------------------

RESULT_COLUMNS = (
    "phi", "gamma", "scheme", "replicate", "iterations", "terminated_by",
    "mu_hat", "sigma_eta_sq_hat", "sigma_eps_sq_hat", "phi_hat", "loglik",
    "error",
)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))  # normalizes numpy scalars
    return str(value)


def write_csv(path: Path, columns, rows) -> None:
    import csv

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def print_table(columns, rows) -> None:
    """Aligned plain-text rendering of an aggregated table."""
    text = [[str(c) for c in columns]]
    for row in rows:
        text.append([f"{v:.4g}" if isinstance(v, float) else str(v) for v in row])
    widths = [max(len(line[j]) for line in text) for j in range(len(columns))]
    for line in text:
        print("  ".join(cell.rjust(width) for cell, width in zip(line, widths)))


def aggregate(rows):
    """Mean iterations and estimates per (phi, gamma, scheme), long rows in."""
    groups: dict = {}
    for row in rows:
        groups.setdefault(tuple(row[:3]), []).append(row)
    out = []
    for (phi, gamma, scheme), members in sorted(groups.items(), key=lambda kv: (
            kv[0][0], kv[0][1], kv[0][2])):
        clean = [m for m in members if not m[-1]]
        agg = [phi, gamma, scheme, len(clean)]
        for idx in (4, 6, 7, 8, 9, 10):  # iterations and estimate columns
            vals = [m[idx] for m in clean if m[idx] is not None]
            agg.append(float(np.mean(vals)) if vals else None)
        out.append(agg)
    return out


AGG_COLUMNS = ("phi", "gamma", "scheme", "ok_replicates", "mean_iterations",
               "mean_mu", "mean_sigma_eta_sq", "mean_sigma_eps_sq", "mean_phi",
               "mean_loglik")


# ---------------------------------------------------------------------------
# Replicate runners (top level so a process pool can pickle them)
# ---------------------------------------------------------------------------

def _run_table_task(task):
    table, cfg_dict, phi, sn2, scheme, rep = task
    cfg = ExperimentConfig(**cfg_dict)
    params = cfg.params(phi, sn2)
    gamma = sn2 / cfg.sigma_eps_sq
    ts = simulate(params, cfg.n, seed=cfg.seed + rep)
    base = [phi, gamma, scheme, rep]
    try:
        if table == 1:
            rep_fit = em.algorithm1(ts, 0.0, params, scheme=scheme,
                                    tol=cfg.tol, max_iter=cfg.max_iter)
            est = [rep_fit.final.mu, None, None, None]
        elif table == 2:
            init = float(np.var(ts.y)) / 2.0
            rep_fit = em.algorithm2(ts, init, params, scheme=scheme,
                                    tol=cfg.tol, max_iter=cfg.max_iter)
            est = [None, rep_fit.final.sigma_eta_sq, None, None]
        else:
            cycle2, scale = TABLE3_SCHEMES[scheme]
            rep_fit = em.algorithm3(ts, cycle2_scheme=cycle2, scale_scheme=scale,
                                    tol=cfg.tol, max_iter=cfg.max_iter)
            est = [rep_fit.final.mu, rep_fit.final.sigma_eta_sq,
                   rep_fit.final.sigma_eps_sq, rep_fit.final.phi]
        return base + [rep_fit.iterations, rep_fit.terminated_by] + est + [
            rep_fit.trajectory[-1].loglik, ""]
    except Exception as exc:  # recorded per replicate; run continues
        return base + [None, None, None, None, None, None, None, repr(exc)]


def _fan_out(tasks, workers: int):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_table_task, tasks))
    return [_run_table_task(t) for t in tasks]


def _run_table(cfg: ExperimentConfig, table: int, schemes) -> int:
    cfg_dict = {k: getattr(cfg, k) for k in (
        "n", "replicates", "mu", "sigma_eps_sq", "sigma_eta_sq_list", "phi_list",
        "seed", "tol", "max_iter")}
    tasks = [
        (table, cfg_dict, phi, sn2, scheme, rep)
        for phi, sn2 in cfg.settings()
        for scheme in schemes
        for rep in range(cfg.replicates)
    ]
    rows = _fan_out(tasks, cfg.workers)
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    write_csv(cfg.out / f"table{table}_long.csv", RESULT_COLUMNS, rows)
    agg = aggregate(rows)
    write_csv(cfg.out / f"table{table}_agg.csv", AGG_COLUMNS, agg)
    print_table(AGG_COLUMNS, agg)
    failures = sum(1 for r in rows if r[-1])
    if failures:
        print(f"{failures} replicate(s) failed; see the error column", file=sys.stderr)
        if cfg.strict:
            return 2
    return 0


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(cfg: ExperimentConfig) -> int:
    cfg.out.mkdir(parents=True, exist_ok=True)
    for phi, sn2 in cfg.settings():
        params = cfg.params(phi, sn2)
        for rep in range(cfg.replicates):
            ts = simulate(params, cfg.n, seed=cfg.seed + rep)
            name = f"y_phi{phi:+.3f}_sn2{sn2:g}_rep{rep:03d}.csv"
            write_series_csv(ts, cfg.out / name)
    print(f"wrote {cfg.replicates * len(list(cfg.settings()))} series to {cfg.out}")
    return 0


def cmd_table1(cfg: ExperimentConfig) -> int:
    return _run_table(cfg, 1, cfg.schemes or TABLE1_SCHEMES)


def cmd_table2(cfg: ExperimentConfig) -> int:
    return _run_table(cfg, 2, cfg.schemes or TABLE2_SCHEMES)


def cmd_table3(cfg: ExperimentConfig) -> int:
    schemes = cfg.schemes or tuple(TABLE3_SCHEMES)
    unknown = [s for s in schemes if s not in TABLE3_SCHEMES]
    if unknown:
        raise ConfigError(f"unknown table3 scheme(s): {unknown}")
    return _run_table(cfg, 3, schemes)


def cmd_wopt_curve(cfg: ExperimentConfig) -> int:
    """Location weights and their bounds over the (phi, gamma) grid."""
    n = cfg.n if cfg.n_explicit else 10
    rows = []
    for phi in cfg.phi_list:
        for sn2 in cfg.sigma_eta_sq_list:
            params = cfg.params(phi, sn2)
            sch = workparam.location_scheme(params, n)
            for t, w_t in enumerate(sch.w_opt, start=1):
                rows.append([phi, params.gamma, t, float(w_t),
                             sch.bounds_low, sch.bounds_high])
    write_csv(cfg.out / "wopt_curve.csv",
              ("phi", "gamma", "t", "w_opt", "bound_low", "bound_high"), rows)
    print(f"wrote {len(rows)} rows to {cfg.out / 'wopt_curve.csv'}")
    return 0


def cmd_aopt_curve(cfg: ExperimentConfig) -> int:
    """Mean of the optimal scale exponent over replicates, against its
    large-n estimate, on a symmetric phi grid."""
    replicates = 1000 if cfg.paper_scale else cfg.replicates
    n = cfg.n if cfg.n_explicit else 5000  # curve default differs from tables
    phis = np.linspace(-0.99, 0.99, cfg.curve_points)
    rows = []
    for sn2 in cfg.sigma_eta_sq_list:
        for phi in phis:
            params = cfg.params(float(phi), sn2)
            a_hat = workparam.a_hat_asymptotic(params.gamma, params.phi)
            vals = np.empty(replicates)
            for rep in range(replicates):
                ts = simulate(params, n, seed=cfg.seed + rep)
                vals[rep] = workparam.a_opt_scale(ts, params)
            rows.append([float(phi), params.gamma, float(np.mean(vals)),
                         float(np.std(vals)), float(np.mean(vals <= 0.0)), a_hat])
    write_csv(cfg.out / "aopt_curve.csv",
              ("phi", "gamma", "mean_a_opt", "sd_a_opt", "frac_nonpos", "a_hat"),
              rows)
    print(f"wrote {len(rows)} rows to {cfg.out / 'aopt_curve.csv'}")
    return 0


def _em_map_slope(ts: TimeSeries, params: ModelParams, w: np.ndarray) -> float:
    """Central finite difference of the one-iteration location update."""
    par = Parametrization(0.0, w)
    h = 1e-5 * (1.0 + abs(params.mu))

    def one_step(mu: float) -> float:
        p = replace(params, mu=mu)
        return em.update_mu(ts, em.e_step(ts, p, par), p, par)

    return (one_step(params.mu + h) - one_step(params.mu - h)) / (2.0 * h)


def cmd_rates(cfg: ExperimentConfig) -> int:
    """Formula rate vs measured EM slope, VB contraction and Gibbs lag-1
    autocorrelation, per setting and per w in {0, 1, w_opt}."""
    rows = []
    chain_seed = cfg.seed * 7 + 1
    for phi, sn2 in cfg.settings():
        params = cfg.params(phi, sn2)
        ts = simulate(params, cfg.n, seed=cfg.seed)
        for label, w in (("0", np.zeros(cfg.n)), ("1", np.ones(cfg.n)),
                         ("w_opt", workparam.w_opt_location(params, cfg.n))):
            par = Parametrization(0.0, w)
            formula = em.rate_location(params, w)
            em_fd = _em_map_slope(ts, params, w)
            vb_rate = vb.vb_rate(params, par)
            chain = gibbs.run_chain(ts, params, par, cfg.gibbs_draws,
                                    burnin=1000, seed=chain_seed)
            chain_seed += 1
            rows.append([phi, params.gamma, label, formula, em_fd, vb_rate,
                         gibbs.lag1_autocorr(chain)])
    columns = ("phi", "gamma", "w", "rate_formula", "rate_em_fd", "rate_vb",
               "gibbs_lag1")
    write_csv(cfg.out / "rates.csv", columns, rows)
    print_table(columns, rows)
    return 0


# ---------------------------------------------------------------------------
# Argument and config-file handling
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # config errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _parse_config_file(path: str) -> dict:
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values

_LIST_KEYS = {"sigma_eta_sq_list", "phi_list", "schemes"}
_INT_KEYS = {"n", "replicates", "seed", "max_iter", "gibbs_draws",
             "curve_points", "workers"}
_FLOAT_KEYS = {"mu", "sigma_eps_sq", "tol"}
_BOOL_KEYS = {"paper_scale", "strict"}


def _coerce(key: str, raw: str):
    if key in _LIST_KEYS:
        items = [s for s in raw.replace(",", " ").split() if s]
        return tuple(items) if key == "schemes" else tuple(float(s) for s in items)
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _BOOL_KEYS:
        return raw.lower() in ("1", "true", "yes", "on")
    if key == "out":
        return Path(raw)
    raise ConfigError(f"unknown config key: {key}")


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if args.config:
        for key, raw in _parse_config_file(args.config).items():
            values[key] = _coerce(key, raw)
    if "n" in values or getattr(args, "n", None) is not None:
        values["n_explicit"] = True
    for key in ("n", "replicates", "seed", "mu", "sigma_eps_sq", "tol",
                "max_iter", "gibbs_draws", "curve_points", "workers", "out"):
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if getattr(args, "sigma_eta_sq_list", None):
        values["sigma_eta_sq_list"] = tuple(args.sigma_eta_sq_list)
    if getattr(args, "phi_list", None):
        values["phi_list"] = tuple(args.phi_list)
    if getattr(args, "scheme", None):
        values["schemes"] = tuple(args.scheme.split(","))
    if getattr(args, "paper_scale", False):
        values["paper_scale"] = True
    if getattr(args, "strict", False):
        values["strict"] = True
    try:
        return ExperimentConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc))


def _add_common(sub):
    sub.add_argument("--n", type=int, default=None)
    sub.add_argument("--replicates", type=int, default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--out", type=Path, default=None)
    sub.add_argument("--config", type=str, default=None,
                     help="key = value per line; flags override the file")
    sub.add_argument("--scheme", type=str, default=None,
                     help="comma-separated scheme list")
    sub.add_argument("--mu", type=float, default=None)
    sub.add_argument("--sigma-eps-sq", dest="sigma_eps_sq", type=float, default=None)
    sub.add_argument("--sigma-eta-sq-list", dest="sigma_eta_sq_list", type=float,
                     nargs="+", default=None)
    sub.add_argument("--phi-list", dest="phi_list", type=float, nargs="+",
                     default=None)
    sub.add_argument("--tol", type=float, default=None)
    sub.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    sub.add_argument("--gibbs-draws", dest="gibbs_draws", type=int, default=None)
    sub.add_argument("--curve-points", dest="curve_points", type=int, default=None)
    sub.add_argument("--workers", type=int, default=None)
    sub.add_argument("--paper-scale", dest="paper_scale", action="store_true")
    sub.add_argument("--strict", action="store_true")


COMMANDS = {
    "simulate": cmd_simulate,
    "table1": cmd_table1,
    "table2": cmd_table2,
    "table3": cmd_table3,
    "wopt-curve": cmd_wopt_curve,
    "aopt-curve": cmd_aopt_curve,
    "rates": cmd_rates,
}


def main(argv=None) -> int:
    parser = _Parser(prog="pncem", description=__doc__)
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        _add_common(subparsers.add_parser(name))
    try:
        args = parser.parse_args(argv)
        cfg = build_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
