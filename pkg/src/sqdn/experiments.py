"""Named experiments that regenerate the figure data as CSV tables.

Each run writes its tables plus ``manifest.json`` into one output directory.
Replications may run in worker processes; results are always merged in seed
order, so the tables do not depend on ``workers``.
"""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .analysis import decay_window, fit_decay_rate, liftoff_time, sup_distance
from .equilibrium import fixed_point, j_star, lambda_star
from .errors import ConfigError
from .integrator import distance_to, integrate
from .io import RunConfig, output_dir, write_manifest, write_table
from .params import ModelParams
from .simulation import PolicySpec, compare_policies, seed_ladder, simulate
from .state import FluidState, offset

EXPERIMENTS = ("fig3-left", "fig3-right", "jstar-sweep", "stability-sweep", "policy-compare")

# pinned once from the replication spread at lambda=0.9, d=2, N=1000:
# over seeds 0..59 the per-run sup gap had median 0.087 and 95th percentile 0.145
FIG3_RIGHT_THRESHOLD = 0.15
FIG3_RIGHT_MIN_FRACTION = 0.9

_DEFAULTS = {
    "fig3-left": dict(lam=0.45, d=2, n_servers=1000, horizon=10.0, replications=10),
    "fig3-right": dict(lam=0.9, d=2, n_servers=1000, horizon=10.0, replications=10),
    "jstar-sweep": dict(lam=0.5, d=2),
    "stability-sweep": dict(lam=0.45, d=2, horizon=20.0),
    "policy-compare": dict(lam=0.45, d=2, n_servers=500, horizon=40.0, warmup=10.0, replications=20,
                           seed=100, departure_mode="potential-departure",
                           policies=(PolicySpec(), PolicySpec(kind="sqd-classic"),
                                     PolicySpec(kind="random"), PolicySpec(kind="jsq"))),
}

JSTAR_LAMBDAS = tuple(np.round(np.arange(0.05, 1.0, 0.05), 2)) + (0.99, 0.995)
JSTAR_DS = (2, 3, 4, 5)


def experiment_config(name: str, overrides: dict | None = None) -> RunConfig:
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}", field="experiment")
    kw = dict(_DEFAULTS[name])
    for key, value in (overrides or {}).items():
        kw["lam" if key == "lambda" else key] = value
    return RunConfig(**kw)


def _map(fn, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


def _fluid(cfg: RunConfig):
    p = cfg.params()
    return integrate(FluidState.empty_system(p.buffer).x, p, cfg.integrator_config())


def _provenance(name, cfg, seeds=None):
    out = {"experiment": name, "config": cfg.to_dict()}
    if seeds is not None:
        out["seeds"] = list(seeds)
    return out


def _fig3_left(cfg: RunConfig, out: Path):
    p = cfg.params()
    fluid = _fluid(cfg)
    cells = [(0, 0), (0, 1), (1, 1)]
    ks = [offset(i, j, p.buffer) for i, j in cells]
    seeds = seed_ladder(cfg.seed, cfg.replications)
    sizes = (100, cfg.n_servers) if cfg.n_servers != 100 else (100,)
    jobs = [cfg.sim_config(n_servers=n, seed=s) for n in sizes for s in seeds]
    results = _map(simulate, jobs, cfg.workers)

    cols = {"t": fluid.times, "source": ["fluid"] * len(fluid.times)}
    for (i, j), k in zip(cells, ks):
        cols[f"x{i}{j}"] = fluid.states[:, k]
    dist_rows = {"N": [], "seed": [], "sup_distance": [], "terminal_mass": []}
    for n_idx, n in enumerate(sizes):
        chunk = results[n_idx * len(seeds):(n_idx + 1) * len(seeds)]
        avg = np.mean([r.states for r in chunk], axis=0)
        times = chunk[0].times
        cols["t"] = np.concatenate([cols["t"], times])
        cols["source"] = cols["source"] + [f"N={n}"] * len(times)
        for (i, j), k in zip(cells, ks):
            cols[f"x{i}{j}"] = np.concatenate([cols[f"x{i}{j}"], avg[:, k]])
        for s, r in zip(seeds, chunk):
            dist_rows["N"].append(n)
            dist_rows["seed"].append(s)
            dist_rows["sup_distance"].append(sup_distance(r, fluid))
            dist_rows["terminal_mass"].append(float(r.states[-1, ks].sum()))

    prov = _provenance("fig3-left", cfg, seeds)
    files = [write_table(out / "fig3_left_paths.csv", cols, prov),
             write_table(out / "fig3_left_distance.csv", dist_rows, prov)]
    terminal = {f"x{i}{j}": float(fluid.states[-1, k]) for (i, j), k in zip(cells, ks)}
    return files, seeds, {"fluid_terminal": terminal}


def _fig3_right(cfg: RunConfig, out: Path):
    fluid = _fluid(cfg)
    ls_fluid, _ = fluid.mass_functionals()
    seeds = seed_ladder(cfg.seed, cfg.replications)
    results = _map(simulate, [cfg.sim_config(seed=s) for s in seeds], cfg.workers)
    times = results[0].times
    fl = np.interp(times, fluid.times, ls_fluid)
    per_seed = np.array([r.mean_queue() for r in results])
    gaps = np.abs(per_seed - fl).max(axis=1)
    avg = per_seed.mean(axis=0)
    prov = _provenance("fig3-right", cfg, seeds)
    files = [
        write_table(out / "fig3_right_L_S.csv", {"t": times, "L_S_stochastic": avg, "L_S_fluid": fl}, prov),
        write_table(out / "fig3_right_gap.csv", {"seed": seeds, "sup_gap": gaps}, prov),
    ]
    frac = float(np.mean(gaps <= FIG3_RIGHT_THRESHOLD))
    gap_mean = float(np.abs(avg - fl).max())
    extra = {"threshold": FIG3_RIGHT_THRESHOLD, "median_sup_gap": float(np.median(gaps)),
             "max_sup_gap": float(gaps.max()), "sup_gap_of_mean": gap_mean,
             "fraction_within_threshold": frac,
             "within_threshold": bool(frac >= FIG3_RIGHT_MIN_FRACTION and gap_mean <= FIG3_RIGHT_THRESHOLD)}
    return files, seeds, extra


def jstar_table(lambdas=JSTAR_LAMBDAS, ds=JSTAR_DS) -> dict:
    rows = {"lambda": [], "d": [], "jstar": [], "max_queue": []}
    for d in ds:
        for lam in lambdas:
            js = j_star(ModelParams(float(lam), d))
            rows["lambda"].append(float(lam))
            rows["d"].append(d)
            rows["jstar"].append(js)
            rows["max_queue"].append(js + 1)
    return rows


def _jstar_sweep(cfg: RunConfig, out: Path):
    prov = _provenance("jstar-sweep", cfg)
    files = [write_table(out / "jstar_sweep.csv", jstar_table(), prov)]
    thr = {"n": [], "d": [], "lambda_star": []}
    for d in JSTAR_DS:
        for n in range(cfg.n_max + 1):
            thr["n"].append(n)
            thr["d"].append(d)
            thr["lambda_star"].append(lambda_star(n, d))
    files.append(write_table(out / "thresholds.csv", thr, prov))
    return files, [], {}


def _stability_one(args):
    lam, cfg = args
    p = ModelParams(lam, cfg.d, cfg.buffer)
    traj = integrate(FluidState.empty_system(p.buffer).x, p, cfg.integrator_config())
    target = fixed_point(p).fixed_point.x
    dist = distance_to(traj, target)
    window = decay_window(traj, dist)
    fit = fit_decay_rate(dist, window)
    return lam, liftoff_time(traj), fit, float(dist[-1, 1])


def _stability_sweep(cfg: RunConfig, out: Path):
    upper = 1.0 - 1.0 / cfg.d
    lams = [float(v) for v in np.round(np.arange(0.05, upper, 0.05), 2) if v < upper - 1e-9]
    results = _map(_stability_one, [(lam, cfg) for lam in lams], cfg.workers)
    rows = {"lambda": [], "d": [], "liftoff": [], "beta_hat": [], "alpha_hat": [], "r_squared": [],
            "t_lo": [], "t_hi": [], "final_distance": []}
    for lam, lift, fit, final in results:
        rows["lambda"].append(lam)
        rows["d"].append(cfg.d)
        rows["liftoff"].append(lift)
        rows["beta_hat"].append(fit.beta_hat)
        rows["alpha_hat"].append(fit.alpha_hat)
        rows["r_squared"].append(fit.r_squared)
        rows["t_lo"].append(fit.window[0])
        rows["t_hi"].append(fit.window[1])
        rows["final_distance"].append(final)
    files = [write_table(out / "stability_sweep.csv", rows, _provenance("stability-sweep", cfg))]
    return files, [], {}


def _policy_compare(cfg: RunConfig, out: Path):
    cmp = compare_policies(cfg.sim_config(), cfg.policies, cfg.replications, cfg.workers)
    prov = _provenance("policy-compare", cfg, cmp.seeds)
    summary = {k: [row[k] for row in cmp.rows] for k in cmp.rows[0]}
    files = [write_table(out / "policy_summary.csv", summary, prov)]
    per = {"seed": [], "policy": [], "L_S": [], "blocked_frac": [], "idle_assign_frac": []}
    for label in cmp.labels:
        for r, s in enumerate(cmp.seeds):
            per["seed"].append(s)
            per["policy"].append(label)
            for m in ("L_S", "blocked_frac", "idle_assign_frac"):
                per[m].append(cmp.per_replication[label][m][r])
    files.append(write_table(out / "policy_replications.csv", per, prov))
    extra = {}
    base = cmp.labels[0]
    for other in cmp.labels[1:]:
        mean, lo, hi = cmp.paired(base, other)
        extra[f"paired_L_S[{base} - {other}]"] = {"mean": mean, "lo": lo, "hi": hi}
    return files, cmp.seeds, extra


_RUNNERS = {
    "fig3-left": _fig3_left,
    "fig3-right": _fig3_right,
    "jstar-sweep": _jstar_sweep,
    "stability-sweep": _stability_sweep,
    "policy-compare": _policy_compare,
}


def run_experiment(name: str, overrides: dict | None = None, out_dir=None, config: RunConfig | None = None) -> dict:
    """Run a named experiment; returns the manifest as a dict.

    ``config`` replaces the experiment defaults entirely; ``overrides`` are
    applied on top of the defaults otherwise.
    """
    cfg = config if config is not None else experiment_config(name, overrides)
    if name not in _RUNNERS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}", field="experiment")
    out = output_dir(out_dir)
    files, seeds, extra = _RUNNERS[name](cfg, out)
    path = write_manifest(out, name, files, cfg.to_dict(), seeds, extra)
    return json.loads(path.read_text())
