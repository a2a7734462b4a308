"""Timing harness: BB propagator evaluation versus the smooth-modulation baseline."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .channels import unitary_fidelity
from .propagator import (
    DEFAULT_DT,
    BBSequence,
    SMSequence,
    bb_propagator,
    build_cache,
    sm_propagator,
)
from .spinsys import Species, SpinSystem

DEFAULT_SIZES = (2, 4, 6, 8)
DEFAULT_DUTIES = (1.0, 0.5, 0.2, 0.1)
CSV_COLUMNS = ("n_spins", "K", "duty", "tau_sm_s", "tau_bb_s", "tau_cache_s", "ratio")


@dataclass
class BenchPoint:
    n_spins: int
    n_segments: int
    duty: float
    tau_sm: float
    tau_bb: float
    tau_cache: float

    @property
    def ratio(self) -> float:
        return self.tau_sm / self.tau_bb

    def row(self) -> tuple:
        return (self.n_spins, self.n_segments, self.duty, self.tau_sm, self.tau_bb,
                self.tau_cache, self.ratio)


class BenchmarkMismatch(RuntimeError):
    """The BB and SM engines disagreed on a benchmarked sequence."""


def bench_system(n_spins: int, seed: int = 0) -> SpinSystem:
    """Weakly coupled two-species chain with spread offsets."""
    rng = np.random.default_rng(seed)
    members_a = tuple(range(0, n_spins, 2))
    members_b = tuple(range(1, n_spins, 2))
    species = [Species("A", 2 * np.pi * 25e3, members_a)]
    if members_b:
        species.append(Species("B", 2 * np.pi * 20e3, members_b))
    offsets = 2 * np.pi * rng.uniform(-2e3, 2e3, n_spins)
    jc = np.zeros((n_spins, n_spins))
    for r in range(n_spins - 1):
        jc[r, r + 1] = jc[r + 1, r] = rng.uniform(5, 200)
    return SpinSystem(n_spins, tuple(species), offsets, jc, None, weak_coupling=True)


def random_sequence(n_segments: int, n_species: int, duty: float, rng: np.random.Generator,
                    dt: float = DEFAULT_DT) -> BBSequence:
    """Pulsed segments placed uniformly at random; one species pulsed per pulsed segment."""
    n_on = int(round(duty * n_segments))
    pulsed = np.zeros((n_segments, n_species), dtype=bool)
    where = rng.choice(n_segments, size=n_on, replace=False)
    pulsed[where, rng.integers(0, n_species, size=n_on)] = True
    phases = rng.uniform(0, 2 * np.pi, size=(n_segments, n_species))
    return BBSequence(dt, pulsed, phases)


def _median_time(fn, repeats: int) -> tuple[float, object]:
    times = []
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def bench_point(n_spins: int, duty: float, n_segments: int = 100, dt: float = DEFAULT_DT,
                repeats: int = 5, seed: int = 0, check: bool = True) -> BenchPoint:
    rng = np.random.default_rng([seed, n_spins, int(round(duty * 1000)), n_segments])
    system = bench_system(n_spins, seed)
    seq = random_sequence(n_segments, system.n_species, duty, rng, dt)
    sm_seq = SMSequence.from_bb(seq, system)
    with threadpool_limits(limits=1):
        tau_cache, cache = _median_time(lambda: build_cache(system, dt), repeats)
        tau_bb, u_bb = _median_time(lambda: bb_propagator(cache, seq), repeats)
        tau_sm, u_sm = _median_time(lambda: sm_propagator(system, sm_seq), repeats)
    if check:
        fid = unitary_fidelity(u_sm, u_bb)
        if abs(fid - 1.0) > 1e-9:
            raise BenchmarkMismatch(
                f"BB and SM propagators disagree (F_u = {fid!r}) for n={n_spins}, duty={duty}"
            )
    return BenchPoint(n_spins, n_segments, duty, tau_sm, tau_bb, tau_cache)


def run_benchmark(sizes=DEFAULT_SIZES, duties=DEFAULT_DUTIES, n_segments: int = 100,
                  dt: float = DEFAULT_DT, repeats: int = 5, seed: int = 0,
                  progress=None) -> list[BenchPoint]:
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    points = []
    for n in sizes:
        for d in duties:
            pt = bench_point(int(n), float(d), n_segments, dt, repeats, seed)
            points.append(pt)
            if progress is not None:
                progress(pt)
    return points


def bb_scaling(n_spins: int, lengths=(100, 1000, 10000), duty: float = 0.5,
               repeats: int = 5, seed: int = 0) -> tuple[float, float]:
    """Slope and R^2 of a log-log fit of BB time (cache excluded) against K."""
    system = bench_system(n_spins, seed)
    cache = build_cache(system)
    times = []
    with threadpool_limits(limits=1):
        for k in lengths:
            seq = random_sequence(k, system.n_species, duty, np.random.default_rng([seed, k]))
            t, _ = _median_time(lambda: bb_propagator(cache, seq), repeats)
            times.append(t)
    x = np.log(np.asarray(lengths, dtype=float))
    y = np.log(np.asarray(times))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    r2 = 1.0 - float(resid @ resid) / float(((y - y.mean()) ** 2).sum())
    return float(slope), r2
