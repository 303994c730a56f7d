"""Experiment orchestration: config ingestion, runs, sweeps, CSV emission.

Configs are flat JSON documents; command-line flags override file values.
Every run writes a manifest (resolved config, version, wall time, sha256
per output) into its output directory, and identical config + seed yields
byte-identical outputs at any THREADS setting: all reductions are
index-ordered and every random stream is keyed positionally.
"""

import argparse
import csv
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import _rng, analytic_oracles
from .errors import Blowup, ConfigError, Kpz2dError
from .noise_field import TorusGrid, make_mollifier, sample_noise
from .spde_solvers import (ReducedParams, SolverConfig, kappa_empirical,
                           kappa_formula, renormalize, solve_ashe,
                           solve_kpz, solve_mshe)

VERSION = "0.1.0"

EXPERIMENTS = ("kpz", "ashe", "mshe", "fk_compare", "kappa", "intersections",
               "chaos", "zeromode", "holder_fixed", "holder_parabolic",
               "varbound", "oracles")


@dataclass
class ExperimentConfig:
    experiment: str = "oracles"
    grid_n: int = 64
    dt: float = 0.0              # 0 -> min(dx^2/4, eps^2/10) heuristic
    epsilon: float = 0.2
    theta: float = 0.1
    t_final: float = 0.25
    profile: str = "bump"
    paths_m: int = 4096
    noise_reps: int = 16
    seed: int = 1
    threads: int = 0
    output_dir: str = "out"
    scheme: str = "explicit_euler"
    # experiment-specific knobs
    starts: int = 16             # fk_compare start count
    r_moment: int = 1            # intersections
    separation: float = 0.0      # intersections start distance
    k1: int = 1                  # chaos mode
    k2: int = 0
    l_mode: int = 0
    k_max: int = 2               # chaos energy truncation
    route: str = "both"          # chaos route: direct | fk | both
    zeta_nodes: int = 4          # kappa formula
    kappa_do_formula: bool = True
    n_lo: int = 0                # holder scans
    n_hi: int = 3
    k_parabolic: int = 1
    pair_samples: int = 8192

    def resolved_dt(self):
        if self.dt > 0:
            return self.dt
        dx = 1.0 / self.grid_n
        if self.scheme == "explicit_euler":
            return min(dx * dx / 4.0, self.epsilon**2 / 10.0)
        return self.epsilon**2 / 10.0

    def validate(self):
        problems = []
        if self.experiment not in EXPERIMENTS:
            problems.append(f"experiment: unknown {self.experiment!r}")
        if self.grid_n < 8:
            problems.append("grid_n: must be >= 8")
        if not 0.0 < self.epsilon < 1.0:
            problems.append("epsilon: must lie in (0, 1)")
        elif self.epsilon < 4.0 / self.grid_n:
            problems.append(
                f"epsilon: {self.epsilon} unresolvable, needs >= 4/grid_n "
                f"= {4.0 / self.grid_n}")
        if self.theta < 0:
            problems.append("theta: must be >= 0")
        if self.t_final <= 0:
            problems.append("t_final: must be > 0")
        if self.profile != "bump":
            problems.append("profile: only 'bump' is implemented")
        dt = self.resolved_dt()
        dx = 1.0 / self.grid_n
        if self.scheme == "explicit_euler" and dt > dx * dx / 4.0 + 1e-15:
            problems.append(
                f"dt: {dt} violates explicit-Euler stability dx^2/4 "
                f"= {dx * dx / 4.0}")
        if self.scheme not in ("explicit_euler", "spectral_exponential"):
            problems.append(f"scheme: unknown {self.scheme!r}")
        if self.paths_m < 2:
            problems.append("paths_m: must be >= 2")
        if self.noise_reps < 2:
            problems.append("noise_reps: must be >= 2")
        if self.experiment in ("holder_fixed", "holder_parabolic"):
            if 2.0 ** (-self.n_hi) < 2.0 * dx:
                problems.append(
                    f"n_hi: scale 2^-{self.n_hi} below 2*dx")
        if self.experiment == "chaos":
            ksq = self.k1**2 + self.k2**2
            if ksq == 0:
                problems.append("k1/k2: mode k must be nonzero")
            elif not 0 <= self.l_mode <= ksq - 1:
                problems.append("l_mode: must lie in [0, |k|^2 - 1]")
        if self.zeta_nodes < 2:
            problems.append("zeta_nodes: must be >= 2")
        if problems:
            raise ConfigError("; ".join(problems))


def load_config(path=None, overrides=None):
    data = {}
    if path:
        with open(path) as fh:
            data.update(json.load(fh))
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**data)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return v


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def dump_field(path_stem, fieldobj, meta):
    arr = np.ascontiguousarray(fieldobj.values, dtype="<f8")
    bin_path = Path(str(path_stem) + ".bin")
    arr.tofile(bin_path)
    sidecar = {"shape": list(arr.shape), "dtype": "float64",
               "byte_order": "little", **meta}
    with open(str(path_stem) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=1, sort_keys=True)
    return [bin_path, Path(str(path_stem) + ".json")]


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


class RunDir:
    def __init__(self, cfg):
        self.dir = Path(cfg.output_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.outputs = []
        self.t0 = time.time()

    def path(self, name):
        p = self.dir / name
        self.outputs.append(p)
        return p

    def add(self, paths):
        self.outputs.extend(paths)

    def finish(self, summary):
        manifest = {
            "config": asdict(self.cfg),
            "version": VERSION,
            "wall_time_s": round(time.time() - self.t0, 3),
            "summary": summary,
            "outputs": {p.name: _sha256(p) for p in self.outputs
                        if p.exists()},
        }
        with open(self.dir / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True)
        return manifest


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _solver_setup(cfg):
    grid = TorusGrid(cfg.grid_n)
    dt = cfg.resolved_dt()
    # never exceed the requested dt (stability limits are one-sided)
    steps = max(1, int(np.ceil(cfg.t_final / dt - 1e-9)))
    dt = cfg.t_final / steps
    params = ReducedParams(theta=cfg.theta, epsilon=cfg.epsilon,
                           t_final=cfg.t_final)
    scfg = SolverConfig(grid=grid, dt=dt, scheme=cfg.scheme)
    m = make_mollifier(cfg.profile, cfg.epsilon, grid)
    return grid, params, scfg, m, steps


def run_pde(cfg, rundir, which):
    grid, params, scfg, m, steps = _solver_setup(cfg)
    noise = sample_noise(grid, scfg.dt, steps, cfg.seed)
    solver = {"kpz": solve_kpz, "mshe": solve_mshe}.get(which)
    if which == "ashe":
        traj = solve_ashe(params, scfg, noise)
    else:
        traj = solver(params, scfg, noise, m)
    fieldobj = traj.final
    rundir.add(dump_field(rundir.dir / f"{which}_final", fieldobj,
                          {"grid_n": cfg.grid_n, "dx": grid.dx,
                           "t_final": cfg.t_final, "epsilon": cfg.epsilon,
                           "theta": cfg.theta, "seed": cfg.seed}))
    amax = float(np.abs(fieldobj.values).max())
    return f"max|field|={_fmt(amax)}+-0"


def run_fk_compare(cfg, rundir):
    from .polymer_mc import build_ensemble, fk_height

    grid, params, scfg, m, steps = _solver_setup(cfg)
    noise = sample_noise(grid, scfg.dt, steps, cfg.seed)
    traj = solve_kpz(params, scfg, noise, m)
    kappa_hat = traj.final.mean()     # translation-invariant proxy for E h
    h_pde = renormalize(traj, kappa_hat).final
    side = int(round(np.sqrt(cfg.starts)))
    rows = []
    diffs = []
    for i in range(side):
        for j in range(side):
            x = ((i + 0.5) / side, (j + 0.5) / side)
            ens = build_ensemble(noise, m, cfg.theta,
                                 (cfg.t_final, x), cfg.paths_m,
                                 _rng.mix_seed(cfg.seed, i * side + j + 1),
                                 kappa=kappa_hat, store_paths=False,
                                 method="exact")
            h_fk = fk_height(ens, cfg.epsilon)
            gi = int(round(x[0] * grid.n)) % grid.n
            gj = int(round(x[1] * grid.n)) % grid.n
            hp = float(h_pde.values[gi, gj])
            rows.append([x[0], x[1], hp, h_fk, h_fk - hp])
            diffs.append(abs(h_fk - hp))
    write_csv(rundir.path("fk_compare.csv"),
              ["x1", "x2", "h_pde", "h_fk", "diff"], rows)
    mean_abs = float(np.mean(diffs))
    se = float(np.std(diffs, ddof=1) / np.sqrt(len(diffs)))
    return f"mean|diff|={_fmt(mean_abs)}+-{_fmt(se)}"


def run_kappa(cfg, rundir):
    grid, params, scfg, m, steps = _solver_setup(cfg)
    emp, emp_se = kappa_empirical(params, scfg, m, cfg.noise_reps, cfg.seed)
    rows = [["empirical", emp, emp_se]]
    if cfg.kappa_do_formula:
        mc = {"paths_m": cfg.paths_m, "noise_reps": cfg.noise_reps,
              "grid_n": cfg.grid_n, "dt": cfg.epsilon**2 / 10.0,
              "pair_samples": cfg.pair_samples}
        form, form_se = kappa_formula(params, m, cfg.zeta_nodes, mc,
                                      cfg.seed + 1)
        rows.append(["formula", form, form_se])
    write_csv(rundir.path("kappa.csv"), ["method", "estimate", "stderr"],
              rows)
    return f"kappa_empirical={_fmt(emp)}+-{_fmt(emp_se)}"


def run_intersections(cfg, rundir):
    from .polymer_mc import intersection_moment

    x1 = (0.5, 0.5)
    x2 = (0.5 + cfg.separation, 0.5)
    est, se = intersection_moment(cfg.r_moment, cfg.epsilon, cfg.t_final,
                                  x1, x2, cfg.paths_m, cfg.seed)
    write_csv(rundir.path("intersections.csv"),
              ["epsilon", "r", "separation", "estimate", "stderr"],
              [[cfg.epsilon, cfg.r_moment, cfg.separation, est, se]])
    return f"EI^{cfg.r_moment}={_fmt(est)}+-{_fmt(se)}"


def run_chaos(cfg, rundir):
    from .chaos_analysis import (ChaosIndex, chaos_coefficients_direct,
                                 chaos_coefficients_fk)

    idx = ChaosIndex((cfg.k1, cfg.k2), cfg.l_mode)
    dt = cfg.resolved_dt()
    rows = []
    summary = []
    if cfg.route in ("direct", "both"):
        rep = chaos_coefficients_direct(cfg.theta, cfg.epsilon, [idx],
                                        cfg.noise_reps, cfg.seed,
                                        grid_n=cfg.grid_n, dt=dt,
                                        scheme=cfg.scheme)
        rows.append([cfg.k1, cfg.k2, cfg.l_mode, cfg.theta, cfg.epsilon,
                     "direct", rep.a_coeff[0], rep.a_stderr[0], ""])
        summary.append(f"a_direct={_fmt(float(rep.a_coeff[0]))}"
                       f"+-{_fmt(float(rep.a_stderr[0]))}")
    if cfg.route in ("fk", "both"):
        rep = chaos_coefficients_fk(cfg.theta, cfg.epsilon, [idx],
                                    cfg.paths_m, cfg.noise_reps,
                                    cfg.seed + 1, grid_n=cfg.grid_n, dt=dt)
        rows.append([cfg.k1, cfg.k2, cfg.l_mode, cfg.theta, cfg.epsilon,
                     "fk", rep.a_coeff[0], rep.a_stderr[0],
                     float(rep.ess.mean())])
        summary.append(f"a_fk={_fmt(float(rep.a_coeff[0]))}"
                       f"+-{_fmt(float(rep.a_stderr[0]))}")
    write_csv(rundir.path("chaos.csv"),
              ["k1", "k2", "l", "theta", "epsilon", "route", "a", "stderr",
               "ess"], rows)
    return " ".join(summary)


def run_zeromode(cfg, rundir):
    from .chaos_analysis import zero_mode_comparison

    rep = zero_mode_comparison(cfg.theta, cfg.epsilon, cfg.noise_reps,
                               cfg.seed, grid_n=cfg.grid_n,
                               dt=cfg.resolved_dt(), scheme=cfg.scheme)
    rows = [[i, rep["h_bar"][i], rep["v_bar"][i], rep["f_bar"][i]]
            for i in range(len(rep["h_bar"]))]
    write_csv(rundir.path("zeromode.csv"),
              ["rep", "h_bar", "v_bar", "f_bar"], rows)
    var_v = rep["v_moments"]["var"]
    return (f"Var(v_bar)={_fmt(var_v)}"
            f"+-{_fmt(var_v * np.sqrt(2.0 / (cfg.noise_reps - 1)))}")


def run_holder(cfg, rundir, scaling):
    from .regularity_probe import (fixed_time_moment_scan,
                                   parabolic_moment_scan)

    n_range = list(range(cfg.n_lo, cfg.n_hi + 1))
    if scaling == "euclidean":
        rep = fixed_time_moment_scan(cfg.theta, cfg.epsilon, cfg.t_final,
                                     n_range, cfg.noise_reps, cfg.seed,
                                     grid_n=cfg.grid_n, dt=cfg.resolved_dt(),
                                     scheme=cfg.scheme)
    else:
        n_range = [n for n in n_range if n >= cfg.k_parabolic]
        rep = parabolic_moment_scan(cfg.theta, cfg.epsilon, cfg.k_parabolic,
                                    n_range, cfg.noise_reps, cfg.seed,
                                    grid_n=cfg.grid_n, dt=cfg.resolved_dt(),
                                    scheme=cfg.scheme)
    rows = []
    for si, n in enumerate(rep["n"]):
        for ci in range(rep["moments"].shape[1]):
            rows.append([scaling, int(n), ci, rep["moments"][si, ci],
                         rep["stderrs"][si, ci]])
    write_csv(rundir.path("holder.csv"),
              ["scaling", "n", "center", "moment", "stderr"], rows)
    return f"exp_rate={_fmt(rep['exp_rate'])}+-0"


def run_varbound(cfg, rundir):
    from .regularity_probe import variance_bound_check

    rep = variance_bound_check(cfg.theta, cfg.epsilon, cfg.t_final,
                               cfg.noise_reps, cfg.seed, grid_n=cfg.grid_n,
                               dt=cfg.resolved_dt(), scheme=cfg.scheme,
                               count=cfg.paths_m,
                               pair_samples=cfg.pair_samples)
    write_csv(rundir.path("varbound.csv"),
              ["theta", "epsilon", "t", "lhs", "rhs", "ratio"],
              [[cfg.theta, cfg.epsilon, cfg.t_final, rep["lhs"], rep["rhs"],
                rep["ratio"]]])
    return f"ratio={_fmt(rep['ratio'])}+-{_fmt(rep['ratio_stderr'])}"


def run_oracles(cfg, rundir):
    table = analytic_oracles.oracle_table()
    with open(rundir.path("oracles.json"), "w") as fh:
        json.dump(table, fh, indent=1, sort_keys=True)
    return f"entries={len(table)}+-0"


def run(cfg):
    """Execute one experiment; returns (exit_code, manifest)."""
    cfg.validate()
    if cfg.threads:
        import os
        os.environ["THREADS"] = str(cfg.threads)
    _apply_thread_cap()
    rundir = RunDir(cfg)
    dispatch = {
        "kpz": lambda: run_pde(cfg, rundir, "kpz"),
        "ashe": lambda: run_pde(cfg, rundir, "ashe"),
        "mshe": lambda: run_pde(cfg, rundir, "mshe"),
        "fk_compare": lambda: run_fk_compare(cfg, rundir),
        "kappa": lambda: run_kappa(cfg, rundir),
        "intersections": lambda: run_intersections(cfg, rundir),
        "chaos": lambda: run_chaos(cfg, rundir),
        "zeromode": lambda: run_zeromode(cfg, rundir),
        "holder_fixed": lambda: run_holder(cfg, rundir, "euclidean"),
        "holder_parabolic": lambda: run_holder(cfg, rundir, "parabolic"),
        "varbound": lambda: run_varbound(cfg, rundir),
        "oracles": lambda: run_oracles(cfg, rundir),
    }
    summary = dispatch[cfg.experiment]()
    manifest = rundir.finish(summary)
    print(f"{cfg.experiment} ok: {summary}")
    return 0, manifest


def _apply_thread_cap():
    try:
        import numba
        numba.set_num_threads(max(1, min(_rng.thread_count(),
                                         numba.config.NUMBA_NUM_THREADS)))
    except Exception:
        pass


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

SWEEPABLE = {"epsilon": float, "theta": float, "k": int, "n": int}


def sweep(cfg, param, values):
    """Run the experiment once per parameter value; aggregate the CSVs."""
    if param not in SWEEPABLE:
        raise ConfigError(f"sweep parameter must be one of {sorted(SWEEPABLE)}")
    conv = SWEEPABLE[param]
    base_dir = Path(cfg.output_dir)
    agg_rows = []
    header = None
    for v in values:
        v = conv(v)
        sub = ExperimentConfig(**{**asdict(cfg),
                                  "output_dir": str(base_dir / f"{param}_{v:g}")})
        if param == "epsilon":
            sub.epsilon = v
        elif param == "theta":
            sub.theta = v
        elif param == "k":
            sub.k1, sub.k2 = v, 0
        elif param == "n":
            sub.n_lo = sub.n_hi = v
        code, manifest = run(sub)
        csvs = [name for name in manifest["outputs"]
                if name.endswith(".csv")]
        if csvs:
            with open(Path(sub.output_dir) / sorted(csvs)[0]) as fh:
                rdr = list(csv.reader(fh))
            if header is None:
                header = [param] + rdr[0]
            for row in rdr[1:]:
                agg_rows.append([_fmt(v)] + row)
    base_dir.mkdir(parents=True, exist_ok=True)
    agg = base_dir / "aggregate.csv"
    with open(agg, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header or [param])
        w.writerows(agg_rows)
    print(f"sweep ok: {len(agg_rows)} rows -> {agg}")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser():
    p = argparse.ArgumentParser(
        prog="kpz2d",
        description="Renormalized (2+1)-d KPZ simulation laboratory")
    p.add_argument("experiment", choices=EXPERIMENTS + ("sweep",),
                   help="experiment to run (or 'sweep')")
    p.add_argument("--config", help="flat JSON config file")
    p.add_argument("--experiment-name", choices=EXPERIMENTS, default=None,
                   help="experiment to run at each sweep point")
    defaults = ExperimentConfig()
    for f in fields(ExperimentConfig):
        if f.name == "experiment":
            continue
        flag = "--" + f.name.replace("_", "-")
        if f.type is bool or isinstance(getattr(defaults, f.name), bool):
            p.add_argument(flag, type=lambda s: s.lower() in
                           ("1", "true", "yes"), default=None,
                           help=f"default {getattr(defaults, f.name)}")
        else:
            p.add_argument(flag, type=type(getattr(defaults, f.name)),
                           default=None,
                           help=f"default {getattr(defaults, f.name)}")
    p.add_argument("--sweep-param", default=None,
                   help="sweep parameter: epsilon | theta | k | n")
    p.add_argument("--sweep-values", default=None,
                   help="comma-separated sweep values")
    return p


def main(argv=None):
    args = _build_parser().parse_args(argv)
    overrides = {f.name: getattr(args, f.name) for f in
                 fields(ExperimentConfig) if f.name != "experiment"
                 and getattr(args, f.name, None) is not None}
    sweeping = args.experiment == "sweep"
    try:
        cfg = load_config(args.config, overrides)
        if not sweeping:
            cfg.experiment = args.experiment
        elif args.experiment_name:
            cfg.experiment = args.experiment_name
        cfg.validate()
    except (ConfigError, ValueError, OSError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        if sweeping:
            if not args.sweep_param or not args.sweep_values:
                print("config error: sweep needs --sweep-param and "
                      "--sweep-values", file=sys.stderr)
                return 2
            return sweep(cfg, args.sweep_param,
                         args.sweep_values.split(","))
        code, _ = run(cfg)
        return code
    except Blowup as e:
        print(f"numerical blow-up: {e}", file=sys.stderr)
        return 3
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Kpz2dError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
