"""
Genetic-algorithm synthesis of bang-bang sequences.

A genome holds, for every segment and species, an on/off bit and a real
phase gene, plus a fixed number of integer twirl-position genes. Fitness is
the RF-robust fidelity (mean over an amplitude-scale grid) against either a
target unitary or a target state. Fitness functions are pure; all randomness
is drawn from one generator inside the sequential generation loop, so a
fixed seed makes a run reproducible bit for bit.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .channels import (
    DEFAULT_RF_SCALES,
    _is_traceless,
    state_fidelity_batch,
    unitary_fidelity_batch,
)
from .propagator import DEFAULT_DT, BBSequence, build_cache, wrap_phase
from .spinsys import SpinSystem, internal_hamiltonian

log = logging.getLogger(__name__)


@dataclass
class GAConfig:
    n_segments: int = 1000
    dt: float = DEFAULT_DT
    n_twirls: int = 0
    population: int = 128
    generations: int = 2000
    tournament: int = 5
    crossover_rate: float = 0.8
    bitflip_rate: float = 0.0005
    phase_rate: float = 0.1
    phase_sigma_deg: float = 20.0
    twirl_rate: float = 0.2
    twirl_step: float = 20.0
    elitism: int = 2
    init_duty: float = 0.002
    seed: int | None = 0
    rf_scales: tuple[float, ...] = DEFAULT_RF_SCALES
    target_fitness: float | None = None

    def __post_init__(self):
        self.rf_scales = tuple(float(s) for s in self.rf_scales)
        for name in ("crossover_rate", "bitflip_rate", "phase_rate", "twirl_rate", "init_duty"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if not 0 <= self.elitism < self.population:
            raise ValueError("elitism must be in [0, population)")
        if self.tournament < 1:
            raise ValueError("tournament size must be >= 1")
        if self.n_segments < 0 or self.n_twirls < 0 or self.generations < 0:
            raise ValueError("n_segments, n_twirls and generations must be nonnegative")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.rf_scales or any(s <= 0 for s in self.rf_scales):
            raise ValueError("rf_scales must be a nonempty list of positive numbers")

    @classmethod
    def from_dict(cls, data: dict) -> "GAConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown GA config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["rf_scales"] = list(self.rf_scales)
        return out


@dataclass(eq=False)
class Genome:
    bits: np.ndarray
    phases: np.ndarray
    twirls: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)
        self.phases = wrap_phase(np.asarray(self.phases, dtype=float))
        self.twirls = np.asarray(self.twirls, dtype=int).reshape(-1)
        if self.bits.shape != self.phases.shape or self.bits.ndim != 2:
            raise ValueError("bits and phases must be matching (K, n_species) arrays")

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    def __eq__(self, other):
        if not isinstance(other, Genome):
            return NotImplemented
        return (np.array_equal(self.bits, other.bits)
                and np.array_equal(self.phases, other.phases)
                and np.array_equal(self.twirls, other.twirls))

    __hash__ = None


@dataclass
class OptimizationResult:
    best: Genome
    best_fitness: float
    trace: list[float]
    evaluations: int
    wall_time: float
    seed: int
    sequence: BBSequence


def decode(genome: Genome, dt: float, system: SpinSystem) -> BBSequence:
    if genome.bits.shape[1] != system.n_species:
        raise ValueError(
            f"genome has {genome.bits.shape[1]} species columns, system has {system.n_species}"
        )
    k = genome.bits.shape[0]
    if np.any((genome.twirls < 0) | (genome.twirls > k)):
        raise ValueError(f"twirl genes must lie in [0, {k}]")
    twirls = tuple(int(b) for b in np.unique(genome.twirls))
    return BBSequence(dt, genome.bits, genome.phases, twirls)


def encode(seq: BBSequence, n_twirls: int | None = None) -> Genome:
    """Genome for `seq`; pads twirl genes by repeating the last boundary when n_twirls is larger."""
    twirls = list(seq.twirls)
    if n_twirls is not None:
        if len(twirls) > n_twirls:
            raise ValueError(f"sequence has {len(twirls)} twirls, genome allows {n_twirls}")
        if n_twirls and not twirls:
            # twirl genes always decode to at least one twirl
            raise ValueError("sequence has no twirls but the genome needs at least one")
        if twirls:
            twirls += [twirls[-1]] * (n_twirls - len(twirls))
    return Genome(seq.pulsed.copy(), seq.phases.copy(), np.array(twirls, dtype=int))


class _EventWalker:
    """
    Batched evaluation that only visits pulsed segments and twirl boundaries.

    Runs of delays are applied as one power U_d^m, taken from a table built by
    a single eigendecomposition of H0, so the cost per genome scales with the
    number of pulses rather than with K.
    """

    def __init__(self, system: SpinSystem, config: GAConfig):
        self.system = system
        self.n_species = system.n_species
        self.caches = [build_cache(system.with_rf_scale(s), config.dt) for s in config.rf_scales]
        self.k = config.n_segments
        h0 = internal_hamiltonian(system)
        evals, evecs = np.linalg.eigh(h0)
        m = np.arange(self.k + 1)
        phases = np.exp(-1j * np.outer(m, evals) * config.dt)                # (K+1, N)
        self.delay_powers = np.einsum("an,mn,bn->mab", evecs, phases, evecs.conj())
        self.basic = [np.stack([c.basic[j] for c in self.caches]) for j in range(self.n_species)]
        self.zdiag = self.caches[0].z_diagonals

    def _events(self, bits, twirls, with_twirls):
        p, k, _ = bits.shape
        any_pulse = bits.any(axis=2)
        lists = []
        for i in range(p):
            ev = [(int(pos), 1) for pos in np.flatnonzero(any_pulse[i])]
            if with_twirls:
                # a twirl at boundary b acts before segment b
                ev += [(int(b), 0) for b in np.unique(twirls[i])]
            ev.sort()
            lists.append(ev)
        m = max((len(e) for e in lists), default=0)
        kind = np.zeros((p, m), dtype=int)           # 0 pad, 1 pulse, 2 twirl
        where = np.zeros((p, m), dtype=int)
        gap = np.zeros((p, m), dtype=int)
        tail = np.zeros(p, dtype=int)
        for i, ev in enumerate(lists):
            clock = 0
            for e, (pos, typ) in enumerate(ev):
                gap[i, e] = pos - clock
                where[i, e] = pos
                kind[i, e] = 1 if typ == 1 else 2
                clock = pos + 1 if typ == 1 else pos
            tail[i] = k - clock
        return kind, where, gap, tail

    def _pulse_unitaries(self, bits, phases, rows, segs):
        n = self.system.dim
        out = None
        for j in range(self.n_species):
            on = bits[rows, segs, j]
            z = np.exp(-1j * phases[rows, segs, j][:, None] * self.zdiag[j][None, :])
            u = self.basic[j][None] * (z[:, :, None] * z.conj()[:, None, :])[:, None]
            u = np.where(on[:, None, None, None], u, np.eye(n))
            out = u if out is None else u @ out
        return out

    def _delay(self, gaps):
        return self.delay_powers[gaps][:, None]      # (P, 1, N, N), RF-independent

    def unitaries(self, bits, phases):
        p = bits.shape[0]
        n = self.system.dim
        kind, where, gap, tail = self._events(bits, None, with_twirls=False)
        u = np.broadcast_to(np.eye(n, dtype=complex), (p, len(self.caches), n, n)).copy()
        for e in range(kind.shape[1]):
            u = self._delay(gap[:, e]) @ u
            rows = np.flatnonzero(kind[:, e] == 1)
            if rows.size:
                u[rows] = self._pulse_unitaries(bits, phases, rows, where[rows, e]) @ u[rows]
        return self._delay(tail) @ u

    def states(self, bits, phases, twirls, rho_in):
        p = bits.shape[0]
        kind, where, gap, tail = self._events(bits, twirls, with_twirls=True)
        rho = np.broadcast_to(rho_in, (p, len(self.caches)) + rho_in.shape).copy()
        eye = np.eye(rho_in.shape[0])
        for e in range(kind.shape[1]):
            d = self._delay(gap[:, e])
            rho = d @ rho @ np.swapaxes(d.conj(), -1, -2)
            rows = np.flatnonzero(kind[:, e] == 1)
            if rows.size:
                u = self._pulse_unitaries(bits, phases, rows, where[rows, e])
                rho[rows] = u @ rho[rows] @ np.swapaxes(u.conj(), -1, -2)
            tw = kind[:, e] == 2
            if tw.any():
                rho[tw] = rho[tw] * eye
        d = self._delay(tail)
        return d @ rho @ np.swapaxes(d.conj(), -1, -2)


class UnitaryObjective:
    """Mean F_u over the RF grid for a target unitary."""

    def __init__(self, system: SpinSystem, target: np.ndarray, config: GAConfig):
        target = np.asarray(target, dtype=complex)
        if target.shape != (system.dim, system.dim):
            raise ValueError(
                f"target is {target.shape[0]}x{target.shape[1]} but the system dimension is {system.dim}"
            )
        if config.n_twirls:
            raise ValueError("a unitary target cannot use twirl genes (n_twirls must be 0)")
        self.system = system
        self.target = target
        self.n_species = system.n_species
        self._walker = _EventWalker(system, config)

    def evaluate(self, bits: np.ndarray, phases: np.ndarray, twirls: np.ndarray) -> np.ndarray:
        if twirls.size:
            raise ValueError("twirl genes present for a unitary target")
        u = self._walker.unitaries(bits, phases)
        return unitary_fidelity_batch(self.target, u).mean(axis=1)


class StateObjective:
    """Mean F_s over the RF grid between the twirled-evolution output and a target deviation."""

    def __init__(self, system: SpinSystem, rho_in: np.ndarray, target: np.ndarray, config: GAConfig):
        rho_in = np.asarray(rho_in, dtype=complex)
        target = np.asarray(target, dtype=complex)
        for name, m in (("input", rho_in), ("target", target)):
            if m.shape != (system.dim, system.dim):
                raise ValueError(f"{name} state dimension {m.shape} does not match system dimension {system.dim}")
        if not (_is_traceless(rho_in) and _is_traceless(target)):
            raise ValueError("state objective expects traceless deviation matrices")
        if np.real(np.vdot(target, target)) <= 1e-300:
            raise ValueError("target state has zero norm (all-zero deviation)")
        self.system = system
        self.rho_in = rho_in
        self.target = target
        self.n_species = system.n_species
        self._walker = _EventWalker(system, config)

    def evaluate(self, bits: np.ndarray, phases: np.ndarray, twirls: np.ndarray) -> np.ndarray:
        rho = self._walker.states(bits, phases, twirls, self.rho_in)
        return state_fidelity_batch(self.target, rho).mean(axis=1)


def _evaluate_genome(objective, genome: Genome) -> float:
    if genome.bits.shape[1] != objective.n_species:
        raise ValueError("genome shape does not match the objective's species count")
    return float(objective.evaluate(genome.bits[None], genome.phases[None], genome.twirls[None])[0])


def fitness_unitary(genome: Genome, system: SpinSystem, target: np.ndarray, config: GAConfig) -> float:
    if genome.twirls.size:
        raise ValueError("twirl genes present for a unitary target")
    cfg = GAConfig(**{**config.to_dict(), "n_twirls": 0})
    return _evaluate_genome(UnitaryObjective(system, target, cfg), genome)


def fitness_state(genome: Genome, system: SpinSystem, rho_in: np.ndarray, target: np.ndarray,
                  config: GAConfig) -> float:
    return _evaluate_genome(StateObjective(system, rho_in, target, config), genome)


def _tournament(rng: np.random.Generator, fitness: np.ndarray, n: int, size: int) -> np.ndarray:
    contenders = rng.integers(0, fitness.size, size=(n, size))
    return contenders[np.arange(n), np.argmax(fitness[contenders], axis=1)]


def run_ga(objective, config: GAConfig, initial: list[Genome] | None = None,
           callback=None) -> OptimizationResult:
    """
    Maximize `objective` (an object with a batched ``evaluate(bits, phases, twirls)``).

    The all-delay genome is always part of the first generation, followed by
    any `initial` genomes; the rest is drawn at random with ``init_duty``
    pulse density.
    """
    t0 = time.perf_counter()
    seed = config.seed
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % (2**31))
    rng = np.random.default_rng(seed)
    pop_n, k, nj, nt = config.population, config.n_segments, objective.n_species, config.n_twirls

    bits = rng.random((pop_n, k, nj)) < config.init_duty
    phases = rng.uniform(0, 2 * np.pi, size=(pop_n, k, nj))
    twirls = rng.integers(0, k + 1, size=(pop_n, nt))
    seeds = [Genome(np.zeros((k, nj), bool), np.zeros((k, nj)), np.full(nt, k, dtype=int))]
    seeds += list(initial or [])
    for i, g in enumerate(seeds[:pop_n]):
        if g.bits.shape != (k, nj) or g.twirls.size != nt:
            raise ValueError(f"initial genome {i} does not match (K={k}, species={nj}, twirls={nt})")
        bits[i], phases[i], twirls[i] = g.bits, g.phases, g.twirls

    fitness = objective.evaluate(bits, phases, twirls)
    evaluations = pop_n
    i = int(np.argmax(fitness))
    best = Genome(bits[i].copy(), phases[i].copy(), twirls[i].copy())
    best_fit = float(fitness[i])
    trace = [best_fit]
    sigma = np.deg2rad(config.phase_sigma_deg)
    n_children = pop_n - config.elitism

    for gen in range(config.generations):
        if config.target_fitness is not None and trace[-1] >= config.target_fitness:
            break
        order = np.argsort(-fitness, kind="stable")
        elite = order[:config.elitism]

        pa = _tournament(rng, fitness, n_children, config.tournament)
        pb = _tournament(rng, fitness, n_children, config.tournament)
        cross = rng.random(n_children) < config.crossover_rate
        gene_mask = (rng.random((n_children, k, nj)) < 0.5) & cross[:, None, None]
        twirl_mask = (rng.random((n_children, nt)) < 0.5) & cross[:, None]
        c_bits = np.where(gene_mask, bits[pb], bits[pa])
        c_phases = np.where(gene_mask, phases[pb], phases[pa])
        c_twirls = np.where(twirl_mask, twirls[pb], twirls[pa])

        c_bits ^= rng.random(c_bits.shape) < config.bitflip_rate
        jitter = rng.random(c_phases.shape) < config.phase_rate
        c_phases = wrap_phase(c_phases + jitter * rng.normal(0.0, sigma, c_phases.shape))
        moves = rng.random(c_twirls.shape) < config.twirl_rate
        steps = np.rint(rng.normal(0.0, config.twirl_step, c_twirls.shape)).astype(int)
        c_twirls = np.clip(c_twirls + moves * steps, 0, k)

        c_fit = objective.evaluate(c_bits, c_phases, c_twirls)
        evaluations += n_children

        bits = np.concatenate([bits[elite], c_bits])
        phases = np.concatenate([phases[elite], c_phases])
        twirls = np.concatenate([twirls[elite], c_twirls])
        fitness = np.concatenate([fitness[elite], c_fit])
        i = int(np.argmax(fitness))
        if fitness[i] > best_fit:
            best = Genome(bits[i].copy(), phases[i].copy(), twirls[i].copy())
            best_fit = float(fitness[i])
        trace.append(best_fit)
        if callback is not None:
            callback(gen + 1, trace[-1])
        if gen % 50 == 0:
            log.debug("generation %d best %.6f", gen + 1, trace[-1])

    return OptimizationResult(
        best=best,
        best_fitness=best_fit,
        trace=trace,
        evaluations=evaluations,
        wall_time=time.perf_counter() - t0,
        seed=seed,
        sequence=decode(best, config.dt, objective.system),
    )
