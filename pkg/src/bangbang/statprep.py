"""Thermal-equilibrium and pseudopure states, and GA-driven pseudopure-state preparation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import FidelityReport, bb_evolve_with_twirls, deviation, state_fidelity
from .gaopt import GAConfig, Genome, OptimizationResult, StateObjective, run_ga
from .propagator import build_cache
from .spinsys import SpinSystem, spin_operator

# nominal gyromagnetic ratios relative to 1H, used as simulated purity factors
RELATIVE_GAMMA = {"H": 1.0, "F": 0.941, "P": 0.405, "C": 0.251, "N": 0.101}


@dataclass(frozen=True)
class EquilibriumSpec:
    purity: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "purity", tuple(float(e) for e in self.purity))
        if any(e < 0 for e in self.purity):
            raise ValueError("purity factors must be nonnegative")

    @classmethod
    def from_species(cls, system: SpinSystem, scale: float = 1e-5) -> "EquilibriumSpec":
        """Purity factors proportional to each spin's nominal gyromagnetic ratio."""
        eps = []
        for r in range(system.n_spins):
            label = system.species[system.spin_to_species[r]].label
            eps.append(scale * RELATIVE_GAMMA.get(label.strip("0123456789"), 1.0))
        return cls(tuple(eps))


def equilibrium_state(system: SpinSystem, spec: EquilibriumSpec) -> np.ndarray:
    """(1 + sum_r eps_r I_rz) / 2^n."""
    if len(spec.purity) != system.n_spins:
        raise ValueError(f"need {system.n_spins} purity factors, got {len(spec.purity)}")
    dim = system.dim
    diag = np.ones(dim)
    for r, eps in enumerate(spec.purity):
        diag = diag + eps * np.real(np.diag(spin_operator(system, r, "z")))
    return np.diag(diag / dim).astype(complex)


def equilibrium_deviation(system: SpinSystem, spec: EquilibriumSpec) -> np.ndarray:
    return deviation(equilibrium_state(system, spec))


def pps_target(n: int, b: int) -> np.ndarray:
    """Traceless deviation |b><b| - I/2^n."""
    dim = 2**n
    if not 0 <= b < dim:
        raise IndexError(f"basis index {b} out of range for {n} qubits")
    out = -np.eye(dim, dtype=complex) / dim
    out[b, b] += 1.0
    return out


@dataclass
class PPSResult:
    optimization: OptimizationResult
    report: FidelityReport
    target_diagonal: np.ndarray
    achieved_diagonal: np.ndarray
    """Diagonal of the achieved deviation at nominal RF, rescaled to the target's norm."""


def prepare_pps(system: SpinSystem, spec: EquilibriumSpec, b: int, config: GAConfig,
                initial: list[Genome] | None = None) -> PPSResult:
    if config.n_twirls < 1:
        raise ValueError("pseudopure preparation needs at least one twirl gene")
    rho_in = equilibrium_deviation(system, spec)
    target = pps_target(system.n_spins, b)
    result = run_ga(StateObjective(system, rho_in, target, config), config, initial)
    seq = result.sequence

    fids = []
    nominal = None
    for s in config.rf_scales:
        out = bb_evolve_with_twirls(build_cache(system.with_rf_scale(s), seq.dt), seq, rho_in)
        fids.append(state_fidelity(target, out))
        if nominal is None or s == 1.0:
            nominal = out
    report = FidelityReport(config.rf_scales, tuple(fids))

    target_diag = np.real(np.diag(target))
    achieved = np.real(np.diag(nominal))
    norm = np.linalg.norm(achieved)
    if norm > 0:
        sign = -1.0 if achieved @ target_diag < 0 else 1.0
        achieved = sign * achieved * np.linalg.norm(target_diag) / norm
    return PPSResult(result, report, target_diag, achieved)


def basis_labels(n: int) -> list[str]:
    return [format(i, f"0{n}b") for i in range(2**n)]
