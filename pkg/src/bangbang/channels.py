"""Density matrices, fidelities, the twirling channel and twirled sequence evolution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .propagator import (
    BBSequence,
    PropagatorCache,
    _check_sequence,
    apply_segments,
    bb_propagator,
    build_cache,
)
from .spinsys import SpinSystem

DEFAULT_RF_SCALES = (0.9, 0.95, 1.0, 1.05, 1.1)


@dataclass
class FidelityReport:
    scales: tuple[float, ...]
    fidelities: tuple[float, ...]

    @property
    def mean(self) -> float:
        return float(np.mean(self.fidelities))

    @property
    def worst(self) -> float:
        return float(np.min(self.fidelities))


def deviation(rho: np.ndarray) -> np.ndarray:
    """Traceless part rho - Tr(rho)/N * I."""
    rho = np.asarray(rho, dtype=complex)
    n = rho.shape[0]
    return rho - np.trace(rho) / n * np.eye(n)


def unitary_fidelity(target: np.ndarray, u: np.ndarray) -> float:
    """F_u = |Tr(U_T^dagger U) / N|^2."""
    target = np.asarray(target)
    u = np.asarray(u)
    if target.shape != u.shape or target.ndim != 2:
        raise ValueError(f"dimension mismatch: {target.shape} vs {u.shape}")
    n = u.shape[0]
    overlap = np.vdot(target, u) / n
    return float(abs(overlap) ** 2)


def _is_traceless(rho: np.ndarray) -> bool:
    return abs(np.trace(rho)) <= 1e-9 * max(1.0, float(np.max(np.abs(rho))))


def state_fidelity(target: np.ndarray, rho: np.ndarray) -> float:
    """|Tr(rho_T rho)| / sqrt(Tr(rho_T^2) Tr(rho^2)) for two states of the same kind."""
    target = np.asarray(target, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    if target.shape != rho.shape:
        raise ValueError(f"dimension mismatch: {target.shape} vs {rho.shape}")
    if _is_traceless(target) != _is_traceless(rho):
        raise ValueError("cannot compare a deviation matrix with a unit-trace density matrix")
    norm_t = np.real(np.vdot(target, target))
    norm_r = np.real(np.vdot(rho, rho))
    if norm_t <= 1e-300:
        raise ValueError("target state has zero norm (all-zero deviation)")
    if norm_r <= 1e-300:
        raise ValueError("output state has zero norm (all-zero deviation)")
    # Tr(A B) for Hermitian A equals vdot(A, B)
    overlap = abs(np.vdot(target, rho))
    return float(min(overlap / np.sqrt(norm_t * norm_r), 1.0))


def twirl(rho: np.ndarray) -> np.ndarray:
    """Keep only the diagonal in the computational basis."""
    rho = np.asarray(rho)
    return np.diag(np.diag(rho)).astype(complex)


def evolve(rho: np.ndarray, u: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    u = np.asarray(u)
    if rho.shape != u.shape:
        raise ValueError(f"dimension mismatch: {rho.shape} vs {u.shape}")
    return u @ rho @ u.conj().T


def bb_evolve_with_twirls(cache: PropagatorCache, seq: BBSequence, rho: np.ndarray) -> np.ndarray:
    """Evolve rho through the sequence, twirling at every twirl boundary."""
    _check_sequence(cache, seq)
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (cache.dim, cache.dim):
        raise ValueError(f"state dimension {rho.shape} does not match system dimension {cache.dim}")
    start = 0
    for boundary in seq.twirls:
        if boundary > start:
            rho = evolve(rho, apply_segments(cache, seq, start, boundary))
        rho = twirl(rho)
        start = boundary
    if seq.n_segments > start:
        rho = evolve(rho, apply_segments(cache, seq, start, seq.n_segments))
    return rho


def robust_unitary_fidelity(system: SpinSystem, seq: BBSequence, target: np.ndarray,
                            scales=DEFAULT_RF_SCALES) -> FidelityReport:
    """F_u at each RF amplitude scale, with uniform weights."""
    scales = tuple(float(s) for s in scales)
    if not scales or any(s <= 0 for s in scales):
        raise ValueError("RF scales must be positive")
    fids = tuple(
        unitary_fidelity(target, bb_propagator(build_cache(system.with_rf_scale(s), seq.dt), seq))
        for s in scales
    )
    return FidelityReport(scales, fids)


def robust_state_fidelity(system: SpinSystem, seq: BBSequence, rho_in: np.ndarray,
                          target: np.ndarray, scales=DEFAULT_RF_SCALES) -> FidelityReport:
    scales = tuple(float(s) for s in scales)
    if not scales or any(s <= 0 for s in scales):
        raise ValueError("RF scales must be positive")
    fids = tuple(
        state_fidelity(target, bb_evolve_with_twirls(build_cache(system.with_rf_scale(s), seq.dt), seq, rho_in))
        for s in scales
    )
    return FidelityReport(scales, fids)


# --- batched forms used by the optimizer ----------------------------------------------------

def unitary_fidelity_batch(target: np.ndarray, u: np.ndarray) -> np.ndarray:
    n = target.shape[0]
    overlap = np.einsum("ab,...ab->...", target.conj(), u) / n
    return np.abs(overlap) ** 2


def state_fidelity_batch(target: np.ndarray, rho: np.ndarray) -> np.ndarray:
    norm_t = np.real(np.vdot(target, target))
    norm_r = np.real(np.einsum("...ab,...ab->...", rho.conj(), rho))
    overlap = np.abs(np.einsum("ab,...ab->...", target.conj(), rho))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = overlap / np.sqrt(norm_t * norm_r)
    return np.minimum(np.nan_to_num(out, nan=0.0), 1.0)
