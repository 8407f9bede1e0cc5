"""Command-line entry point: ``sqdn <verb> [flags]``.

Exit status is 0 on success, 1 for configuration errors (including an
unknown verb) and 2 when an internal consistency check fails.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .equilibrium import fixed_point, lambda_star
from .errors import BoundaryDegeneracyError, ConfigError, ConsistencyError, InvalidStateError, StepRejected
from .experiments import EXPERIMENTS, _policy_compare, experiment_config, run_experiment
from .integrator import integrate, summary_table
from .io import RunConfig, load_config, output_dir, validate_for, write_long, write_manifest, write_table
from .simulation import config_dict, simulate
from .state import FluidState, coordinates

VERBS = ("simulate", "fluid", "fixed-point", "thresholds", "experiment", "compare")

# flag dest -> config field
_FIELDS = {
    "lam": "lambda", "d": "d", "buffer": "buffer", "n_servers": "n_servers", "horizon": "horizon",
    "seed": "seed", "dt": "dt", "sample_every": "sample_every", "scheme": "scheme",
    "projection": "projection", "departure_mode": "departure_mode", "warmup": "warmup",
    "replications": "replications", "workers": "workers", "n_max": "n_max",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(sp):
    sp.add_argument("--config", help="JSON config file; flags override its fields")
    sp.add_argument("--out", help="output directory (default $SQDN_OUTPUT_DIR or ./sqdn-output)")
    sp.add_argument("--lambda", dest="lam", type=float, help="arrival rate per server, 0 < lambda < 1")
    sp.add_argument("--d", type=int, help="number of sampled servers per arrival")
    sp.add_argument("--buffer", "--I", type=int, help="buffer size I")
    sp.add_argument("--n-servers", "--n", dest="n_servers", type=int)
    sp.add_argument("--horizon", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--sample-every", type=float)
    sp.add_argument("--scheme", choices=("euler", "rk4"))
    sp.add_argument("--projection", choices=("clip-renormalize", "none"))
    sp.add_argument("--departure-mode", choices=("per-busy-server", "potential-departure"))
    sp.add_argument("--warmup", type=float)
    sp.add_argument("--replications", type=int)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--n-max", type=int)
    sp.add_argument("--policy", help="policy kind: sqdn-memory, sqd-classic, random or jsq")
    sp.add_argument("--replacement", choices=("with", "without"))
    sp.add_argument("--order", choices=("sample-then-assign", "assign-then-sample"))
    sp.add_argument("--tiebreak", choices=("uniform", "oldest-timer"))
    sp.add_argument("--policies", help="comma-separated policy kinds for compare")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sqdn", description="SQ(d,N) simulator and fluid-model toolkit")
    sub = parser.add_subparsers(dest="verb", metavar="verb", parser_class=_Parser)
    sub.required = True
    helps = {
        "simulate": "run the N-server stochastic system",
        "fluid": "integrate the fluid model",
        "fixed-point": "print the fluid fixed point as JSON",
        "thresholds": "tabulate the threshold loads lambda_n*",
        "experiment": "run a named experiment",
        "compare": "compare dispatch policies on common seeds",
    }
    for verb in VERBS:
        sp = sub.add_parser(verb, help=helps[verb])
        _add_common(sp)
        if verb == "experiment":
            sp.add_argument("name", choices=EXPERIMENTS)
        if verb == "fluid":
            sp.add_argument("--init", help="initial state JSON (as written by FluidState.to_json)")
    return parser


def _overrides(args) -> dict:
    out = {}
    for dest, key in _FIELDS.items():
        v = getattr(args, dest, None)
        if v is not None:
            out[key] = v
    pol = {k: getattr(args, k) for k in ("replacement", "order", "tiebreak") if getattr(args, k) is not None}
    if args.policy is not None:
        pol["kind"] = args.policy
    if pol:
        out["policy"] = pol
    if args.policies:
        out["policies"] = [{"kind": k.strip()} for k in args.policies.split(",") if k.strip()]
    return out


def resolve_config(args) -> RunConfig:
    over = _overrides(args)
    if args.config:
        return load_config(args.config, args.verb, over)
    return validate_for(RunConfig.from_dict(over), args.verb)


def _rates(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def cmd_simulate(cfg: RunConfig, out) -> dict:
    sim_cfg = cfg.sim_config()
    res = simulate(sim_cfg)
    ls = res.mean_queue()
    _, mem = coordinates(cfg.buffer)
    prov = {"verb": "simulate", "config": cfg.to_dict(), "seed": cfg.seed, "rng": res.meta["rng"]}
    c = res.counters
    files = [
        write_long(out / "simulate_long.csv", res.times, res.states, cfg.buffer, prov),
        write_table(out / "simulate_summary.csv", {
            "t": res.times, "L_S": ls, "L_M": res.states @ mem,
            "blocked_frac": _rates(c["blocked"], c["arrivals"]),
            "idle_assign_frac": _rates(c["idle_assigned"], c["arrivals"]),
        }, prov),
    ]
    steady = {k: (list(v) if isinstance(v, tuple) else v) for k, v in res.steady.items()}
    write_manifest(out, "simulate", files, cfg.to_dict(), [cfg.seed],
                   {"steady": steady, "n_events": res.n_events, "sim_config": config_dict(sim_cfg)})
    return {"steady": steady, "n_events": res.n_events, "files": [f.name for f in files]}


def cmd_fluid(cfg: RunConfig, out, init=None) -> dict:
    p = cfg.params()
    if init:
        x0 = FluidState.from_json(Path(init).read_text())
        if x0.buffer != p.buffer:
            raise ConfigError(f"initial state has I={x0.buffer}, config has I={p.buffer}", field="buffer")
        x0 = x0.x
    else:
        x0 = FluidState.empty_system(p.buffer).x
    traj = integrate(x0, p, cfg.integrator_config())
    try:
        target = fixed_point(p).fixed_point.x
    except (ConfigError, BoundaryDegeneracyError):
        target = None
    table = summary_table(traj, target)
    if target is None:
        table["dist_to_fixed_point"] = np.full(len(traj.times), np.nan)
    prov = {"verb": "fluid", "config": cfg.to_dict(), **traj.meta}
    files = [write_long(out / "fluid_long.csv", traj.times, traj.states, p.buffer, prov),
             write_table(out / "fluid_summary.csv", table, prov)]
    write_manifest(out, "fluid", files, cfg.to_dict(), [])
    final = {k: float(v[-1]) for k, v in table.items()}
    return {"final": final, "files": [f.name for f in files]}


def cmd_thresholds(d: int, n_max: int) -> str:
    lines = ["n,lambda_star"]
    for n in range(n_max + 1):
        lines.append(f"{n},{lambda_star(n, d)!r}")
    return "\n".join(lines)


def cmd_compare(cfg: RunConfig, out) -> dict:
    files, seeds, extra = _policy_compare(cfg, out)
    write_manifest(out, "compare", files, cfg.to_dict(), seeds, extra)
    return {"files": [f.name for f in files], **extra}


def _run(args) -> int:
    if args.verb == "thresholds":
        over = _overrides(args)
        if args.config:
            cfg = load_config(args.config, None, over)
            d, n_max = cfg.d, cfg.n_max
        else:
            d = over.get("d", 2)
            n_max = over.get("n_max", 5)
            if int(d) != d or d < 1:
                raise ConfigError(f"d must be a positive integer, got {d}", field="d")
            if n_max < 0:
                raise ConfigError(f"n_max must be non-negative, got {n_max}", field="n_max")
        print(cmd_thresholds(d, n_max))
        return 0

    if args.verb == "experiment":
        if args.config:
            cfg = resolve_config(args)
            manifest = run_experiment(args.name, out_dir=args.out, config=cfg)
        else:
            experiment_config(args.name, _overrides(args))
            manifest = run_experiment(args.name, _overrides(args), out_dir=args.out)
        print(json.dumps(manifest, indent=2, sort_keys=True))
        return 0

    cfg = resolve_config(args)
    if args.verb == "fixed-point":
        print(json.dumps(fixed_point(cfg.params()).to_dict(), sort_keys=True))
        return 0
    out = output_dir(args.out)
    if args.verb == "simulate":
        report = cmd_simulate(cfg, out)
    elif args.verb == "fluid":
        report = cmd_fluid(cfg, out, args.init)
    else:
        report = cmd_compare(cfg, out)
    print(json.dumps(report, indent=2, sort_keys=True, default=str))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _run(args)
    except (ConfigError, BoundaryDegeneracyError, InvalidStateError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ConsistencyError, StepRejected) as exc:
        print(f"consistency failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
