"""Stochastic simulation: closed-loop construction, Gillespie direct method,
seeded ensembles with streaming statistics, and the first-moment ODE."""

from __future__ import annotations

import bisect
import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import accumulate
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .analysis.certificate import ControlSpec
from .model import ParameterDomain, Reaction, ReactionNetwork, build_model

PROPENSITY_MAX = 1e15
STATE_MAX = 2 ** 53
WINDOW_FRACTION = 0.2
Z_CONF = 1.96
CHUNK = 50
_RAND_BLOCK = 4096


class SimulationOverflowError(OverflowError):
    def __init__(self, t: float, state: Sequence[int]):
        super().__init__(f"propensity overflow at t={t:g}, state={list(state)}")
        self.t = t
        self.state = list(state)


# ---------------------------------------------------------------------------
# closed loop


@dataclass(frozen=True)
class ClosedLoopNetwork:
    base: ReactionNetwork
    controller: ControlSpec
    network: ReactionNetwork
    z_names: tuple[str, str]
    rate_names: tuple[str, str, str, str]

    @property
    def species(self) -> tuple[str, ...]:
        return self.network.species

    def rates(self) -> dict[str, float]:
        return self.network.fixed_values()


def _fresh(name: str, taken: set[str]) -> str:
    out = name
    while out in taken:
        out += "_c"
    taken.add(out)
    return out


def build_closed_loop(net: ReactionNetwork, spec: ControlSpec) -> ClosedLoopNetwork:
    """Append the controller species and the reference, measurement,
    comparison and actuation reactions."""
    spec.validate(net.d)
    taken_s = set(net.species)
    z1, z2 = _fresh("Z1", taken_s), _fresh("Z2", taken_s)
    taken_r = set(net.symbols)
    names = tuple(_fresh(n, taken_r) for n in ("mu", "theta", "eta", "k"))
    xl = net.species[spec.controlled]
    xa = net.species[spec.actuated]
    ctrl = (
        Reaction((), ((z1, 1),), names[0]),
        Reaction(((xl, 1),), ((xl, 1), (z2, 1)), names[1]),
        Reaction(((z1, 1), (z2, 1)), (), names[2]),
        Reaction(((z1, 1),), ((z1, 1), (xa, 1)), names[3]),
    )
    doms = dict(net.parameter_domains)
    for n, val in zip(names, (spec.mu, spec.theta, spec.eta, spec.k)):
        doms[n] = ParameterDomain.fixed(val)
    closed = ReactionNetwork(net.species + (z1, z2), net.reactions + ctrl, doms)
    return ClosedLoopNetwork(net, spec, closed, (z1, z2), names)


# ---------------------------------------------------------------------------
# compiled network for the SSA


@dataclass(frozen=True)
class _Compiled:
    d: int
    rates: tuple[float, ...]
    kind: tuple[int, ...]  # 0: constant, 1: x_i, 2: x_i (x_i - 1), 3: x_i x_j
    ri: tuple[int, ...]
    rj: tuple[int, ...]
    changes: tuple[tuple[tuple[int, int], ...], ...]
    deps: tuple[tuple[int, ...], ...]


def _compile(net: ReactionNetwork, rates: Mapping[str, float] | None) -> _Compiled:
    if rates is None:
        rates = net.fixed_values()
    kinds, ri, rj, changes, rs = [], [], [], [], []
    reads: list[set[int]] = []
    for r in net.reactions:
        reac = [net.index(s) for s, c in r.reactants for _ in range(c)]
        if not reac:
            kinds.append(0); ri.append(0); rj.append(0)
        elif len(reac) == 1:
            kinds.append(1); ri.append(reac[0]); rj.append(0)
        elif reac[0] == reac[1]:
            kinds.append(2); ri.append(reac[0]); rj.append(0)
        else:
            kinds.append(3); ri.append(reac[0]); rj.append(reac[1])
        delta: dict[int, int] = {}
        for s, c in r.reactants:
            delta[net.index(s)] = delta.get(net.index(s), 0) - c
        for s, c in r.products:
            delta[net.index(s)] = delta.get(net.index(s), 0) + c
        changes.append(tuple((i, v) for i, v in sorted(delta.items()) if v))
        reads.append(set(reac))
        rate = float(rates[r.rate])
        if not rate >= 0:
            raise ValueError(f"rate {r.rate} must be nonnegative")
        rs.append(rate)
    deps = []
    for ch in changes:
        touched = {i for i, _ in ch}
        deps.append(tuple(k for k, rd in enumerate(reads) if rd & touched))
    return _Compiled(net.d, tuple(rs), tuple(kinds), tuple(ri), tuple(rj), tuple(changes),
                     tuple(deps))


def _prop(c: _Compiled, k: int, x: list[int]) -> float:
    kind = c.kind[k]
    if kind == 0:
        return c.rates[k]
    if kind == 1:
        return c.rates[k] * x[c.ri[k]]
    if kind == 2:
        n = x[c.ri[k]]
        return c.rates[k] * n * (n - 1)
    return c.rates[k] * x[c.ri[k]] * x[c.rj[k]]


def _rng(base_seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(base_seed, spawn_key=(index,))))


def _run(c: _Compiled, x0: Sequence[int], t_end: float, rng: np.random.Generator,
         grid: Sequence[float] | None, window_start: float | None,
         record: bool) -> tuple[list, list, list | None, list | None]:
    """Core direct-method loop.

    Returns jump times and states (when ``record``), the left-constant grid
    samples and the time integral of the state over ``[window_start, t_end]``.
    """
    x = [int(v) for v in x0]
    if any(v < 0 for v in x):
        raise ValueError("initial state must be nonnegative")
    d = c.d
    K = len(c.rates)
    props = [_prop(c, k, x) for k in range(K)]
    changes, deps = c.changes, c.deps
    kind, ri, rj, rates = c.kind, c.ri, c.rj, c.rates
    times = [0.0] if record else []
    states = [tuple(x)] if record else []
    G = len(grid) if grid is not None else 0
    samples = [] if grid is not None else None
    gi = 0
    win = [0.0] * d if window_start is not None else None
    ws = window_start if window_start is not None else math.inf
    buf: list[float] = []
    pos = 0
    t = 0.0
    log = math.log
    while True:
        a0 = sum(props)
        if a0 > PROPENSITY_MAX or a0 != a0:
            raise SimulationOverflowError(t, x)
        if a0 <= 0.0:
            t_next = math.inf
        else:
            if pos + 2 > len(buf):
                buf = rng.random(_RAND_BLOCK).tolist()
                pos = 0
            u1 = buf[pos]
            u2 = buf[pos + 1]
            pos += 2
            t_next = t - log(1.0 - u1) / a0
        t_stop = t_next if t_next < t_end else t_end
        while gi < G and grid[gi] < t_stop:
            samples.append(tuple(x))
            gi += 1
        if win is not None and t_stop > ws:
            dt = t_stop - (t if t > ws else ws)
            for i in range(d):
                win[i] += x[i] * dt
        if t_next >= t_end:
            break
        t = t_next
        r = u2 * a0
        k = bisect.bisect_right(list(accumulate(props)), r)
        if k >= K:
            k = K - 1
            while props[k] <= 0.0:
                k -= 1
        for i, dv in changes[k]:
            x[i] += dv
            if x[i] < 0:
                raise AssertionError(f"negative count after reaction {k} at t={t}")
            if x[i] > STATE_MAX:
                raise SimulationOverflowError(t, x)
        for j in deps[k]:
            kj = kind[j]
            if kj == 1:
                props[j] = rates[j] * x[ri[j]]
            elif kj == 2:
                n = x[ri[j]]
                props[j] = rates[j] * n * (n - 1)
            elif kj == 3:
                props[j] = rates[j] * x[ri[j]] * x[rj[j]]
        if record:
            times.append(t)
            states.append(tuple(x))
    while gi < G and grid[gi] <= t_end:
        samples.append(tuple(x))
        gi += 1
    return times, states, samples, win


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    seed: int
    species: tuple[str, ...] = ()

    def at(self, t: float) -> np.ndarray:
        """Left-constant value at time ``t``."""
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.states[max(i, 0)]


def ssa_run(net: ReactionNetwork | ClosedLoopNetwork, x0: Sequence[int], t_end: float,
            seed: int, rates: Mapping[str, float] | None = None) -> Trajectory:
    """One exact trajectory on ``[0, t_end]`` (bit-reproducible given ``seed``)."""
    if isinstance(net, ClosedLoopNetwork):
        net = net.network
    c = _compile(net, rates)
    times, states, _, _ = _run(c, x0, t_end, np.random.default_rng(seed), None, None, True)
    return Trajectory(np.array(times), np.array(states, dtype=np.int64).reshape(-1, net.d),
                      seed, net.species)


# ---------------------------------------------------------------------------
# streaming statistics


@dataclass
class RunningStats:
    """Welford accumulator over vectors, mergeable with Chan's formula."""

    n: int = 0
    mean: np.ndarray | None = None
    m2: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    def add(self, x: np.ndarray) -> None:
        x = np.asarray(x, dtype=float)
        if self.n == 0:
            self.n = 1
            self.mean = x.copy()
            self.m2 = np.zeros_like(x)
            self.lo = x.copy()
            self.hi = x.copy()
            return
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)
        np.minimum(self.lo, x, out=self.lo)
        np.maximum(self.hi, x, out=self.hi)

    def merge(self, other: "RunningStats") -> "RunningStats":
        if other.n == 0:
            return self
        if self.n == 0:
            return RunningStats(other.n, other.mean.copy(), other.m2.copy(), other.lo.copy(),
                                other.hi.copy())
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * other.n / n
        m2 = self.m2 + other.m2 + delta ** 2 * self.n * other.n / n
        return RunningStats(n, mean, m2, np.minimum(self.lo, other.lo),
                            np.maximum(self.hi, other.hi))

    @property
    def var(self) -> np.ndarray:
        if self.n < 2:
            return np.zeros_like(self.mean)
        return np.maximum(self.m2 / (self.n - 1), 0.0)

    def half_width(self, z: float = Z_CONF) -> np.ndarray:
        return z * np.sqrt(self.var / max(self.n, 1))


@dataclass
class EnsembleStats:
    times: np.ndarray
    species: tuple[str, ...]
    n: int
    mean: np.ndarray  # (len(times), d)
    var: np.ndarray
    half_width: np.ndarray
    minimum: np.ndarray
    maximum: np.ndarray
    window_start: float
    window_mean: np.ndarray
    window_var: np.ndarray
    window_half_width: np.ndarray
    base_seed: int
    t_end: float

    def species_index(self, name: str | int) -> int:
        return name if isinstance(name, int) else self.species.index(name)

    def terminal_mean(self, name: str | int) -> tuple[float, float]:
        i = self.species_index(name)
        return float(self.window_mean[i]), float(self.window_half_width[i])

    def summary(self) -> dict:
        return {
            "n_trajectories": self.n,
            "t_end": self.t_end,
            "base_seed": self.base_seed,
            "window": [self.window_start, self.t_end],
            "species": list(self.species),
            "terminal_mean": dict(zip(self.species, self.window_mean.tolist())),
            "terminal_half_width": dict(zip(self.species, self.window_half_width.tolist())),
            "final_mean": dict(zip(self.species, self.mean[-1].tolist())),
        }


def _chunk(args) -> tuple[RunningStats, RunningStats]:
    c, x0, t_end, grid, base_seed, start, stop, ws = args
    grid_stats, win_stats = RunningStats(), RunningStats()
    span = t_end - ws
    for i in range(start, stop):
        _, _, samples, win = _run(c, x0, t_end, _rng(base_seed, i), grid, ws, False)
        grid_stats.add(np.asarray(samples, dtype=float).ravel())
        win_stats.add(np.asarray(win) / span)
    return grid_stats, win_stats


def _workers() -> int:
    raw = os.environ.get("ERGOCERT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        n = 1
    return max(1, min(n, os.cpu_count() or 1))


def ensemble_means(net: ReactionNetwork | ClosedLoopNetwork, x0: Sequence[int], t_end: float,
                   N: int, grid: Sequence[float] | int, base_seed: int,
                   rates: Mapping[str, float] | None = None,
                   window_fraction: float = WINDOW_FRACTION) -> EnsembleStats:
    """``N`` seeded trajectories; trajectory ``i`` uses the stream spawned
    from ``(base_seed, i)``, and chunk statistics are merged in index order,
    so the result does not depend on the worker count."""
    if N < 2:
        raise ValueError("need at least two trajectories")
    if isinstance(net, ClosedLoopNetwork):
        net = net.network
    if isinstance(grid, int):
        grid = np.linspace(0.0, t_end, grid)
    grid = [float(g) for g in grid]
    if any(g < 0 or g > t_end for g in grid) or grid != sorted(grid):
        raise ValueError("grid must be sorted within [0, t_end]")
    c = _compile(net, rates)
    ws = t_end * (1.0 - window_fraction)
    jobs = [(c, tuple(x0), t_end, grid, base_seed, s, min(s + CHUNK, N), ws)
            for s in range(0, N, CHUNK)]
    workers = _workers()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_chunk, jobs))
    else:
        parts = [_chunk(j) for j in jobs]
    g_all, w_all = RunningStats(), RunningStats()
    for g, w in parts:
        g_all = g_all.merge(g)
        w_all = w_all.merge(w)
    d = net.d
    G = len(grid)
    shape = (G, d)
    return EnsembleStats(
        times=np.array(grid), species=net.species, n=N,
        mean=g_all.mean.reshape(shape), var=g_all.var.reshape(shape),
        half_width=g_all.half_width().reshape(shape),
        minimum=g_all.lo.reshape(shape), maximum=g_all.hi.reshape(shape),
        window_start=ws, window_mean=w_all.mean, window_var=w_all.var,
        window_half_width=w_all.half_width(), base_seed=base_seed, t_end=t_end)


# ---------------------------------------------------------------------------
# first-moment ODE


def moment_ode_linear(A: np.ndarray, b0: np.ndarray, x0: Sequence[float], t_end: float,
                      steps: int = 1000) -> tuple[np.ndarray, np.ndarray]:
    """RK4 for ``dm/dt = A m + b0`` with step ``t_end / steps``.

    If that step would leave the RK4 stability region each step is split.
    """
    A = np.asarray(A, dtype=float)
    b0 = np.asarray(b0, dtype=float)
    m = np.asarray(x0, dtype=float).copy()
    h = t_end / steps
    rho = float(np.max(np.abs(np.linalg.eigvals(A)))) if A.size else 0.0
    sub = max(1, math.ceil(h * rho / 1.0))
    hs = h / sub
    f = lambda y: A @ y + b0  # noqa: E731
    times = np.linspace(0.0, t_end, steps + 1)
    out = np.empty((steps + 1, len(m)))
    out[0] = m
    for s in range(steps):
        for _ in range(sub):
            k1 = f(m)
            k2 = f(m + 0.5 * hs * k1)
            k3 = f(m + 0.5 * hs * k2)
            k4 = f(m + hs * k3)
            m = m + hs / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[s + 1] = m
    return times, out


def moment_ode(net: ReactionNetwork, x0: Sequence[float], t_end: float,
               rates: Mapping[str, float] | None = None,
               steps: int = 1000) -> tuple[np.ndarray, np.ndarray]:
    """Mean trajectory of an open-loop unimolecular network at fixed rates."""
    model = build_model(net)
    if not model.dec.is_unimolecular:
        raise ValueError("the first-moment equation closes only for unimolecular networks")
    vals = dict(rates) if rates is not None else net.fixed_values()
    A, b0 = model.evaluate(vals)
    return moment_ode_linear(A, b0, x0, t_end, steps)


def interpolate_series(times: np.ndarray, values: np.ndarray, at: Sequence[float]) -> np.ndarray:
    return np.column_stack([np.interp(at, times, values[:, i]) for i in range(values.shape[1])])


# ---------------------------------------------------------------------------
# export


def write_csv(path: str | Path, times: Sequence[float], columns: Mapping[str, Sequence[float]]) -> None:
    path = Path(path)
    names = list(columns)
    with path.open("w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["time"] + names)
        for r, t in enumerate(times):
            wr.writerow([repr(float(t))] + [repr(float(columns[n][r])) for n in names])


def stats_columns(stats: EnsembleStats) -> dict[str, np.ndarray]:
    cols = {}
    for i, s in enumerate(stats.species):
        cols[f"{s}_mean"] = stats.mean[:, i]
        cols[f"{s}_var"] = stats.var[:, i]
        cols[f"{s}_halfwidth"] = stats.half_width[:, i]
    return cols


def write_summary(path: str | Path, summary: dict) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
