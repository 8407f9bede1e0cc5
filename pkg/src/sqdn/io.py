"""Run configuration, CSV emitters and experiment manifests.

Configs are flat JSON objects whose keys match the command-line flags
(``--n-servers`` <-> ``"n_servers"``). CSV files start with ``#``-prefixed
provenance lines; the ``# created:`` line is the only one that varies
between identical runs.
"""
from __future__ import annotations

import dataclasses
import datetime as _dt
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .equilibrium import j_star
from .errors import ConfigError
from .integrator import IntegratorConfig
from .params import ModelParams
from .simulation import PolicySpec, SimConfig
from .state import coordinates

OUTPUT_ENV = "SQDN_OUTPUT_DIR"
DEFAULT_OUTPUT = "sqdn-output"

_POLICY_KEYS = ("kind", "replacement", "order", "tiebreak")


def _policy_from(obj) -> PolicySpec:
    if isinstance(obj, PolicySpec):
        return obj
    if isinstance(obj, str):
        return PolicySpec(kind=obj)
    if not isinstance(obj, dict):
        raise ConfigError(f"policy must be a string or an object, got {obj!r}", field="policy")
    unknown = set(obj) - set(_POLICY_KEYS)
    if unknown:
        raise ConfigError(f"unknown policy field(s) {sorted(unknown)}", field="policy")
    return PolicySpec(**obj)


def _policy_dict(p: PolicySpec) -> dict:
    return {k: getattr(p, k) for k in _POLICY_KEYS}


@dataclass(frozen=True)
class RunConfig:
    lam: float
    d: int
    buffer: int = 20
    n_servers: int = 1000
    horizon: float = 10.0
    seed: int = 0
    dt: float = 1e-3
    sample_every: float = 0.1
    scheme: str = "euler"
    projection: str = "clip-renormalize"
    departure_mode: str = "per-busy-server"
    warmup: float = 0.0
    replications: int = 20
    workers: int = 1
    n_max: int = 5
    policy: PolicySpec = field(default_factory=PolicySpec)
    policies: tuple = (PolicySpec(), PolicySpec(kind="sqd-classic"))

    def __post_init__(self):
        self.params()
        for name in ("replications", "workers"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}", field=name)
        if int(self.n_max) != self.n_max or self.n_max < 0:
            raise ConfigError(f"n_max must be a non-negative integer, got {self.n_max!r}", field="n_max")
        object.__setattr__(self, "policy", _policy_from(self.policy))
        object.__setattr__(self, "policies", tuple(_policy_from(p) for p in self.policies))
        self.sim_config()
        self.integrator_config()

    def params(self) -> ModelParams:
        return ModelParams(self.lam, self.d, self.buffer)

    def sim_config(self, **changes) -> SimConfig:
        kw = dict(params=self.params(), n_servers=self.n_servers, horizon=self.horizon, seed=self.seed,
                  departure_mode=self.departure_mode, sample_every=self.sample_every,
                  policy=self.policy, warmup=self.warmup)
        kw.update(changes)
        return SimConfig(**kw)

    def integrator_config(self, **changes) -> IntegratorConfig:
        kw = dict(dt=self.dt, t_end=self.horizon, sample_every=self.sample_every,
                  scheme=self.scheme, projection=self.projection)
        kw.update(changes)
        return IntegratorConfig(**kw)

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = {"lambda": self.lam}
        for f in dataclasses.fields(self):
            if f.name == "lam":
                continue
            out[f.name] = getattr(self, f.name)
        out["policy"] = _policy_dict(self.policy)
        out["policies"] = [_policy_dict(p) for p in self.policies]
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> RunConfig:
        obj = dict(obj)
        if "I" in obj:
            obj.setdefault("buffer", obj.pop("I"))
        if "lambda" not in obj:
            raise ConfigError("missing required field 'lambda'", field="lambda")
        if "d" not in obj:
            raise ConfigError("missing required field 'd'", field="d")
        obj["lam"] = obj.pop("lambda")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - names
        if unknown:
            raise ConfigError(f"unknown config field(s) {sorted(unknown)}", field=sorted(unknown)[0])
        if "policies" in obj:
            obj["policies"] = tuple(obj["policies"])
        try:
            return cls(**obj)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def validate_for(cfg: RunConfig, verb: str) -> RunConfig:
    """Cross-field checks that depend on what the config will drive."""
    if verb == "fixed-point":
        js = j_star(cfg.params())
        if cfg.buffer <= js + 1:
            raise ConfigError(f"buffer I={cfg.buffer} must exceed j*+1={js + 1} for lambda={cfg.lam}, d={cfg.d}",
                              field="buffer")
    return cfg


def load_config(path, verb: str | None = None, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if text.splitlines() else ""
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {line}") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")
    for key, value in (overrides or {}).items():
        if key == "policy" and isinstance(value, dict) and isinstance(obj.get("policy"), dict):
            value = {**obj["policy"], **value}
        obj[key] = value
    try:
        cfg = RunConfig.from_dict(obj)
        return validate_for(cfg, verb) if verb else cfg
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}", field=exc.field) from exc


def output_dir(explicit=None) -> Path:
    out = Path(explicit or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


def timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def header_lines(provenance: dict) -> list[str]:
    lines = [f"# created: {timestamp()}"]
    for key in sorted(provenance):
        lines.append(f"# {key}: {json.dumps(provenance[key], sort_keys=True, default=str)}")
    return lines


def write_table(path, columns: dict, provenance: dict | None = None) -> Path:
    """Write equal-length columns as CSV under a provenance header."""
    path = Path(path)
    names = list(columns)
    cols = [list(np.asarray(columns[n]).tolist()) if not isinstance(columns[n], list) else columns[n]
            for n in names]
    n_rows = len(cols[0]) if cols else 0
    lines = header_lines(provenance or {})
    lines.append(",".join(names))
    for r in range(n_rows):
        lines.append(",".join(_fmt(c[r]) for c in cols))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_long(path, times, states, buffer: int, provenance: dict | None = None) -> Path:
    """Long-format trajectory: one ``t,i,j,value`` row per coordinate per sample."""
    rows, cols = coordinates(buffer)
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    n, k = states.shape
    return write_table(path, {
        "t": np.repeat(times, k),
        "i": np.tile(rows, n),
        "j": np.tile(cols, n),
        "value": states.ravel(),
    }, provenance)


def read_table(path) -> dict:
    """Inverse of :func:`write_table` (numeric columns only); header lines are skipped."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    names = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    if data.size == 0:
        return {n: np.array([]) for n in names}
    return {n: data[:, c] for c, n in enumerate(names)}


def csv_body(path) -> str:
    """File contents without the ``# created:`` line, for reproducibility checks."""
    return "\n".join(ln for ln in Path(path).read_text().splitlines() if not ln.startswith("# created:"))


def write_manifest(out_dir, name: str, files, config: dict, seeds, extra: dict | None = None) -> Path:
    manifest = {
        "experiment": name,
        "created": timestamp(),
        "files": [Path(f).name for f in files],
        "config": config,
        "seeds": list(seeds),
    }
    if extra:
        manifest.update(extra)
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return path
