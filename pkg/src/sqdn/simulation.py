"""Event-driven simulation of N servers behind a dispatcher.

The process is the continuous-time Markov chain of the (queue length,
memory) pairs. Each event draws one exponential holding time at the total
rate and then picks the event type by rate ratio, so no stale clocks are
kept. Randomness comes from two Philox streams spawned from the seed: a
*clock* stream (holding times, event types, departing server) and a
*selection* stream (sampled servers, tie-breaks). Under
``departure_mode="potential-departure"`` the clock stream is consumed
identically whatever the policy does, so runs of different policies with
the same seed see the same arrival and potential-departure epochs.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .integrator import Trajectory
from .params import ModelParams
from .state import coordinates, offset, size

POLICY_KINDS = ("sqdn-memory", "sqd-classic", "random", "jsq")
REPLACEMENT = ("with", "without")
ORDERS = ("sample-then-assign", "assign-then-sample")
TIEBREAKS = ("uniform", "oldest-timer")
DEPARTURE_MODES = ("per-busy-server", "potential-departure")


@dataclass(frozen=True)
class PolicySpec:
    kind: str = "sqdn-memory"
    replacement: str = "with"
    order: str = "sample-then-assign"
    tiebreak: str = "uniform"

    def __post_init__(self):
        for name, allowed in (("kind", POLICY_KINDS), ("replacement", REPLACEMENT),
                              ("order", ORDERS), ("tiebreak", TIEBREAKS)):
            if getattr(self, name) not in allowed:
                raise ConfigError(f"policy.{name} must be one of {allowed}, got {getattr(self, name)!r}",
                                  field=f"policy.{name}")
        if self.tiebreak == "oldest-timer" and self.kind != "sqdn-memory":
            raise ConfigError("oldest-timer tie-breaking needs the sqdn-memory policy",
                              field="policy.tiebreak")

    @property
    def has_memory(self) -> bool:
        return self.kind == "sqdn-memory"

    @property
    def label(self) -> str:
        parts = [self.kind]
        if self.replacement != "with":
            parts.append("no-replacement")
        if self.order != "sample-then-assign":
            parts.append(self.order)
        if self.tiebreak != "uniform":
            parts.append(self.tiebreak)
        return "/".join(parts)


@dataclass(frozen=True)
class ServerState:
    q: int
    m: int
    timer: int = 0


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    n_servers: int = 1000
    horizon: float = 10.0
    seed: int = 0
    departure_mode: str = "per-busy-server"
    sample_every: float = 0.1
    policy: PolicySpec = field(default_factory=PolicySpec)
    warmup: float = 0.0
    initial: tuple | None = None  # ((q, m), ...) per server; all idle when None

    def __post_init__(self):
        if int(self.n_servers) != self.n_servers or self.n_servers < 1:
            raise ConfigError("n_servers must be a positive integer", field="n_servers")
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive", field="horizon")
        if not self.sample_every > 0:
            raise ConfigError("sample_every must be positive", field="sample_every")
        if not 0 <= self.warmup < self.horizon:
            raise ConfigError("warmup must lie in [0, horizon)", field="warmup")
        if self.departure_mode not in DEPARTURE_MODES:
            raise ConfigError(f"departure_mode must be one of {DEPARTURE_MODES}", field="departure_mode")
        if self.policy.replacement == "without" and self.n_servers < self.params.d:
            raise ConfigError("sampling without replacement needs n_servers >= d", field="n_servers")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer", field="seed")
        if self.initial is not None:
            pairs = tuple((int(q), int(m)) for q, m in self.initial)
            if len(pairs) != self.n_servers:
                raise ConfigError("initial must list one (q, m) pair per server", field="initial")
            for q, m in pairs:
                if not 0 <= q <= m <= self.params.buffer:
                    raise ConfigError(f"initial pair (q={q}, m={m}) violates 0 <= q <= m <= I",
                                      field="initial")
            object.__setattr__(self, "initial", pairs)

    def with_policy(self, policy: PolicySpec) -> SimConfig:
        return replace(self, policy=policy)

    def with_seed(self, seed: int) -> SimConfig:
        return replace(self, seed=seed)


@dataclass
class OccupancyMeasure:
    """Fractions ``X[i, j]`` of (i, j)-servers, flat in state storage order."""

    x: np.ndarray
    n_servers: int
    buffer: int
    counters: dict = field(default_factory=dict)

    def __getitem__(self, ij):
        i, j = ij
        return self.x[offset(i, j, self.buffer)]

    @property
    def memory_prefix(self) -> np.ndarray:
        """``R[j]``: fraction of servers the dispatcher believes hold at most ``j`` jobs."""
        _, cols = coordinates(self.buffer)
        return np.cumsum(np.bincount(cols, weights=self.x, minlength=self.buffer + 1))

    @property
    def tail(self) -> np.ndarray:
        """``Z[i]``: fraction of servers holding at least ``i`` jobs."""
        rows, _ = coordinates(self.buffer)
        row = np.bincount(rows, weights=self.x, minlength=self.buffer + 1)
        return np.cumsum(row[::-1])[::-1]


def occupancy(servers, n_servers: int, buffer: int, counters: dict | None = None) -> OccupancyMeasure:
    if len(servers) != n_servers:
        raise ValueError(f"expected {n_servers} servers, got {len(servers)}")
    counts = np.zeros(size(buffer))
    for s in servers:
        counts[offset(s.q, s.m, buffer)] += 1
    return OccupancyMeasure(counts / n_servers, n_servers, buffer, dict(counters or {}))


class _Stream:
    """Block-buffered draws from a numpy generator."""

    def __init__(self, draw, block=8192):
        self._draw = draw
        self._block = block
        self._buf = []
        self._i = 0

    def __call__(self):
        if self._i == len(self._buf):
            self._buf = self._draw(self._block).tolist()
            self._i = 0
        v = self._buf[self._i]
        self._i += 1
        return v


class PhiloxSource:
    """Default randomness: numpy's counter-based Philox-4x64 bit generator."""

    def __init__(self, seed: int):
        clock, select = np.random.SeedSequence(seed).spawn(2)
        clock_gen = np.random.Generator(np.random.Philox(clock))
        select_gen = np.random.Generator(np.random.Philox(select))
        self._exp = _Stream(clock_gen.standard_exponential)
        self._clock_u = _Stream(clock_gen.random)
        self._select_u = _Stream(select_gen.random)

    def next_event(self, arrival_rate: float, total_rate: float) -> tuple[float, bool]:
        dt = self._exp() / total_rate
        return dt, self._clock_u() * total_rate < arrival_rate

    def departure_target(self, n: int) -> int:
        return min(int(self._clock_u() * n), n - 1)

    def sample(self, n: int, d: int, replace: bool) -> list[int]:
        u = self._select_u
        if replace:
            return [min(int(u() * n), n - 1) for _ in range(d)]
        picked: list[int] = []
        while len(picked) < d:
            k = min(int(u() * n), n - 1)
            if k not in picked:
                picked.append(k)
        return picked

    def choice(self, n: int) -> int:
        return min(int(self._select_u() * n), n - 1)


class ScriptedSource:
    """Replays prescribed outcomes; for hand-traced tests of the dispatch logic.

    ``events`` holds ``(dt, is_arrival)`` pairs, ``samples`` the sampled server
    lists, ``choices`` tie-break indices and ``departures`` departure targets,
    each consumed in order.
    """

    def __init__(self, events, samples=(), choices=(), departures=()):
        self.events = list(events)
        self.samples = [list(s) for s in samples]
        self.choices = list(choices)
        self.departures = list(departures)

    def next_event(self, arrival_rate, total_rate):
        if not self.events:
            return float("inf"), False
        return self.events.pop(0)

    def departure_target(self, n):
        k = self.departures.pop(0)
        assert 0 <= k < n
        return k

    def sample(self, n, d, replace):
        s = self.samples.pop(0)
        assert len(s) == d and all(0 <= k < n for k in s)
        return s

    def choice(self, n):
        k = self.choices.pop(0)
        assert 0 <= k < n
        return k


@dataclass
class SimResult:
    config: SimConfig
    times: np.ndarray
    states: np.ndarray          # occupancy fractions per sample
    counters: dict              # arrays aligned with times
    steady: dict                # time averages over [warmup, horizon]
    servers: list               # final ServerState per server
    n_events: int
    meta: dict = field(default_factory=dict)

    def trajectory(self) -> Trajectory:
        return Trajectory(self.config.params, self.times, self.states, dict(self.meta))

    def occupancy_at(self, k: int) -> OccupancyMeasure:
        cnt = {name: int(v[k]) for name, v in self.counters.items() if name != "area"}
        return OccupancyMeasure(self.states[k], self.config.n_servers, self.config.params.buffer, cnt)

    def mean_queue(self) -> np.ndarray:
        rows, _ = coordinates(self.config.params.buffer)
        return self.states @ rows


class _Pool:
    """Server table plus the index structures the policies need in O(1)."""

    def __init__(self, cfg: SimConfig):
        p = cfg.params
        self.N = N = cfg.n_servers
        self.top = p.buffer
        self.policy = cfg.policy
        self.memory = cfg.policy.has_memory
        pairs = cfg.initial or ((0, 0),) * N
        self.q = [q for q, _ in pairs]
        self.m = [m if self.memory else q for q, m in pairs]
        self.stamp = [0] * N
        self.off = [[offset(i, j, self.top) if i <= j else -1 for j in range(self.top + 1)]
                    for i in range(self.top + 1)]
        self.counts = [0] * size(self.top)
        for k in range(N):
            self.counts[self.off[self.q[k]][self.m[k]]] += 1
        # buckets[v] lists servers whose key is v: memory for sqdn, queue length for jsq
        self.keyed = cfg.policy.kind in ("sqdn-memory", "jsq")
        self.buckets = [[] for _ in range(self.top + 1)]
        self.bpos = [0] * N
        if self.keyed:
            for k in range(N):
                self._bucket_add(k, self._key(k))
        self.busy = []
        self.busy_pos = [-1] * N
        for k in range(N):
            if self.q[k] > 0:
                self.busy_pos[k] = len(self.busy)
                self.busy.append(k)
        self.jobs = sum(self.q)
        self.initial_jobs = self.jobs

    def _key(self, k):
        return self.m[k] if self.memory else self.q[k]

    def _bucket_add(self, k, v):
        b = self.buckets[v]
        self.bpos[k] = len(b)
        b.append(k)

    def _bucket_remove(self, k, v):
        b = self.buckets[v]
        i = self.bpos[k]
        last = b.pop()
        if last != k:
            b[i] = last
            self.bpos[last] = i

    def set(self, k, q_new, m_new):
        q_old, m_old = self.q[k], self.m[k]
        if not self.memory:
            m_new = q_new
        if q_old == q_new and m_old == m_new:
            return
        if self.keyed:
            old_key, new_key = (m_old, m_new) if self.memory else (q_old, q_new)
            if old_key != new_key:
                self._bucket_remove(k, old_key)
                self._bucket_add(k, new_key)
        self.counts[self.off[q_old][m_old]] -= 1
        self.counts[self.off[q_new][m_new]] += 1
        if q_old == 0 and q_new > 0:
            self.busy_pos[k] = len(self.busy)
            self.busy.append(k)
        elif q_old > 0 and q_new == 0:
            i = self.busy_pos[k]
            last = self.busy.pop()
            if last != k:
                self.busy[i] = last
                self.busy_pos[last] = i
            self.busy_pos[k] = -1
        self.jobs += q_new - q_old
        self.q[k] = q_new
        self.m[k] = m_new

    def lowest(self):
        for v, b in enumerate(self.buckets):
            if b:
                return v, b
        raise RuntimeError("empty bucket table")


def simulate(cfg: SimConfig, source=None) -> SimResult:
    p = cfg.params
    src = PhiloxSource(cfg.seed) if source is None else source
    pool = _Pool(cfg)
    N, top, d = pool.N, pool.top, p.d
    policy = cfg.policy
    kind = policy.kind
    replace_ = policy.replacement == "with"
    sample_first = policy.order == "sample-then-assign"
    oldest = policy.tiebreak == "oldest-timer"
    potential = cfg.departure_mode == "potential-departure"
    arrival_rate = p.lam * N

    counters = {"arrivals": 0, "departures": 0, "blocked": 0, "idle_assigned": 0}
    n_arrival = 0

    def do_sample():
        for k in src.sample(N, d, replace_):
            pool.set(k, pool.q[k], pool.q[k])
            pool.stamp[k] = n_arrival

    def pick():
        if kind == "sqdn-memory" or kind == "jsq":
            _, b = pool.lowest()
            if oldest and len(b) > 1:
                first = min(pool.stamp[k] for k in b)
                b = sorted(k for k in b if pool.stamp[k] == first)
            return b[src.choice(len(b))] if len(b) > 1 else b[0]
        if kind == "random":
            return src.choice(N)
        sampled = sorted(set(src.sample(N, d, replace_)))
        low = min(pool.q[k] for k in sampled)
        cands = [k for k in sampled if pool.q[k] == low]
        return cands[src.choice(len(cands))] if len(cands) > 1 else cands[0]

    def assign(k):
        q, m = pool.q[k], pool.m[k]
        if q == 0:
            counters["idle_assigned"] += 1
        if q == top:
            counters["blocked"] += 1
        pool.set(k, min(q + 1, top), min(m + 1, top))

    n_samples = int(np.floor(cfg.horizon / cfg.sample_every + 1e-9)) + 1
    sample_times = [s * cfg.sample_every for s in range(n_samples)]
    snap_states = []
    snap = {name: [] for name in ("arrivals", "departures", "blocked", "idle_assigned", "area")}

    t = 0.0
    area = 0.0
    next_s = 0
    warm = None
    n_events = 0
    while True:
        total_rate = arrival_rate + (N if potential else len(pool.busy))
        dt, is_arrival = src.next_event(arrival_rate, total_rate)
        t_new = t + dt
        while next_s < n_samples and sample_times[next_s] <= t_new:
            ts = sample_times[next_s]
            snap_states.append(pool.counts[:])
            for name in ("arrivals", "departures", "blocked", "idle_assigned"):
                snap[name].append(counters[name])
            snap["area"].append(area + pool.jobs * (ts - t))
            next_s += 1
        if warm is None and t_new >= cfg.warmup:
            warm = dict(counters, area=area + pool.jobs * (cfg.warmup - t))
        if t_new > cfg.horizon:
            area += pool.jobs * (cfg.horizon - t)
            break
        area += pool.jobs * dt
        t = t_new
        n_events += 1
        if is_arrival:
            n_arrival += 1
            counters["arrivals"] += 1
            if kind == "sqdn-memory" and sample_first:
                do_sample()
            assign(pick())
            if kind == "sqdn-memory" and not sample_first:
                do_sample()
        else:
            if potential:
                k = src.departure_target(N)
            else:
                k = pool.busy[src.departure_target(len(pool.busy))]
            if pool.q[k] > 0:
                counters["departures"] += 1
                pool.set(k, pool.q[k] - 1, pool.m[k])

    span = cfg.horizon - cfg.warmup
    arr = counters["arrivals"] - warm["arrivals"]
    steady = {
        "L_S": (area - warm["area"]) / (N * span),
        "arrivals": arr,
        "blocked_frac": (counters["blocked"] - warm["blocked"]) / arr if arr else 0.0,
        "idle_assign_frac": (counters["idle_assigned"] - warm["idle_assigned"]) / arr if arr else 0.0,
        "window": (cfg.warmup, cfg.horizon),
    }
    counters_out = {name: np.array(v) for name, v in snap.items()}
    counters_out["initial_jobs"] = np.full(n_samples, pool.initial_jobs)
    servers = [ServerState(pool.q[k], pool.m[k], n_arrival - pool.stamp[k]) for k in range(N)]
    meta = {"seed": cfg.seed, "policy": policy.label, "departure_mode": cfg.departure_mode,
            "n_servers": N, "lambda": p.lam, "d": d, "I": top, "rng": "numpy Philox4x64 (SeedSequence spawn: clock, selection)"}
    return SimResult(cfg, np.array(sample_times), np.array(snap_states, dtype=float) / N,
                     counters_out, steady, servers, n_events, meta)


def config_dict(cfg: SimConfig) -> dict:
    out = asdict(cfg)
    out["params"] = {"lambda": cfg.params.lam, "d": cfg.params.d, "buffer": cfg.params.buffer}
    return out


def _steady(cfg: SimConfig) -> dict:
    return simulate(cfg).steady


def seed_ladder(base_seed: int, replications: int) -> list[int]:
    """Replication ``r`` runs with seed ``base_seed + r`` under every policy."""
    return [base_seed + r for r in range(replications)]


@dataclass
class PolicyComparison:
    seeds: list
    labels: list
    per_replication: dict  # label -> metric -> array over replications
    rows: list

    def paired(self, label_a: str, label_b: str, metric: str = "L_S", level: float = 0.95):
        """``(mean, lo, hi)`` of ``metric[a] - metric[b]`` across common-seed replications."""
        from .analysis import paired_difference
        return paired_difference(self.per_replication[label_a][metric],
                                 self.per_replication[label_b][metric], level)


def compare_policies(cfg_base: SimConfig, policies, replications: int, workers: int = 1,
                     level: float = 0.95) -> PolicyComparison:
    """Run every policy on the same seed ladder and summarize steady-state metrics."""
    from .analysis import mean_ci

    seeds = seed_ladder(cfg_base.seed, replications)
    policies = list(policies)
    jobs = [cfg_base.with_policy(pol).with_seed(s) for pol in policies for s in seeds]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_steady, jobs))
    else:
        results = [_steady(c) for c in jobs]

    metrics = ("L_S", "blocked_frac", "idle_assign_frac")
    per_rep, rows, labels = {}, [], []
    for n, pol in enumerate(policies):
        chunk = results[n * replications:(n + 1) * replications]
        label = pol.label
        labels.append(label)
        per_rep[label] = {m: np.array([r[m] for r in chunk]) for m in metrics}
        row = {"policy": label, "replications": replications}
        for m in metrics:
            mean, half = mean_ci(per_rep[label][m], level)
            row[m] = mean
            row[f"{m}_ci"] = half
        rows.append(row)
    return PolicyComparison(seeds, labels, per_rep, rows)
