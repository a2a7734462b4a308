"""
Bang-bang (BB) and smooth-modulation (SM) pulse sequences and their propagators.

The BB engine exponentiates only once per (system, dt): the free-evolution
propagator U_d = exp(-i H0 dt) and, for each species j, the basic pulse
propagator X_j = exp(-i (H0 + Omega_j S_jx) dt). A pulse of phase phi is
X_j rotated about z, Z X_j Z^dagger with Z = exp(-i phi S_jz), and since Z is
diagonal this only rescales matrix entries.

Time ordering: segment 0 acts first, so the total propagator is
U = U_{K-1} ... U_1 U_0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spinsys import (
    SpinSystem,
    collective_operator,
    collective_z_diagonal,
    internal_hamiltonian,
)

TWO_PI = 2 * np.pi
DEFAULT_DT = 5e-6


def wrap_phase(phi):
    """Map phases into [0, 2*pi)."""
    out = np.mod(phi, TWO_PI)
    # np.mod can return exactly 2*pi for tiny negative inputs
    return np.where(out >= TWO_PI, 0.0, out)


@dataclass(eq=False)
class BBSequence:
    """
    Time-discretized bang-bang program.

    ``pulsed[k, j]`` says whether species j is irradiated during segment k and
    ``phases[k, j]`` holds the RF phase (radians, ignored for delays).
    ``twirls`` lists boundaries b in [0, K]: a twirl acts after b segments.
    """

    dt: float
    pulsed: np.ndarray
    phases: np.ndarray
    twirls: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        pulsed = np.asarray(self.pulsed, dtype=bool)
        if pulsed.ndim != 2:
            raise ValueError("pulsed must be a (K, n_species) array")
        phases = np.asarray(self.phases, dtype=float)
        if phases.shape != pulsed.shape:
            raise ValueError("phases and pulsed must have the same shape")
        if not np.all(np.isfinite(phases)):
            raise ValueError("phases must be finite")
        phases = np.where(pulsed, wrap_phase(phases), 0.0)
        twirls = tuple(int(b) for b in self.twirls)
        if any(b2 <= b1 for b1, b2 in zip(twirls, twirls[1:])):
            raise ValueError("twirl boundaries must be strictly increasing")
        if twirls and (twirls[0] < 0 or twirls[-1] > pulsed.shape[0]):
            raise ValueError(f"twirl boundaries must lie in [0, {pulsed.shape[0]}]")
        self.dt = float(self.dt)
        self.pulsed = pulsed
        self.phases = phases
        self.twirls = twirls

    @classmethod
    def delays(cls, n_segments: int, n_species: int, dt: float = DEFAULT_DT) -> "BBSequence":
        shape = (n_segments, n_species)
        return cls(dt, np.zeros(shape, dtype=bool), np.zeros(shape))

    @classmethod
    def from_events(cls, events, dt: float = DEFAULT_DT, twirls=()) -> "BBSequence":
        """Build from rows of per-species events: None for a delay, a phase for a pulse."""
        rows = [list(row) for row in events]
        n_species = len(rows[0]) if rows else 0
        pulsed = np.array([[e is not None for e in row] for row in rows], dtype=bool).reshape(-1, n_species)
        phases = np.array([[0.0 if e is None else e for e in row] for row in rows],
                          dtype=float).reshape(-1, n_species)
        return cls(dt, pulsed, phases, tuple(twirls))

    @property
    def n_segments(self) -> int:
        return self.pulsed.shape[0]

    @property
    def n_species(self) -> int:
        return self.pulsed.shape[1]

    @property
    def duration(self) -> float:
        return self.n_segments * self.dt

    @property
    def duty_cycle(self) -> float:
        if self.n_segments == 0:
            return 0.0
        return float(np.mean(self.pulsed.any(axis=1)))

    def events(self, k: int) -> list[float | None]:
        return [float(self.phases[k, j]) if self.pulsed[k, j] else None
                for j in range(self.n_species)]

    def without_twirls(self) -> "BBSequence":
        return BBSequence(self.dt, self.pulsed, self.phases)

    def __eq__(self, other):
        if not isinstance(other, BBSequence):
            return NotImplemented
        return (
            self.dt == other.dt
            and self.twirls == other.twirls
            and np.array_equal(self.pulsed, other.pulsed)
            and np.array_equal(self.phases, other.phases)
        )

    __hash__ = None


@dataclass(eq=False)
class SMSequence:
    """Piecewise-constant smooth-modulation program: amplitude (rad/s) and phase per segment."""

    dt: float
    amplitudes: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        self.amplitudes = np.asarray(self.amplitudes, dtype=float)
        self.phases = np.asarray(self.phases, dtype=float)
        if self.amplitudes.ndim != 2 or self.amplitudes.shape != self.phases.shape:
            raise ValueError("amplitudes and phases must be matching (K, n_species) arrays")
        if np.any(self.amplitudes < 0):
            raise ValueError("amplitudes must be nonnegative")

    @classmethod
    def from_bb(cls, seq: BBSequence, system: SpinSystem) -> "SMSequence":
        """SM program reproducing a BB one: full amplitude where pulsed, zero elsewhere."""
        omega = np.array([sp.max_amplitude for sp in system.species])
        return cls(seq.dt, seq.pulsed * omega[None, :], seq.phases.copy())

    @property
    def n_segments(self) -> int:
        return self.amplitudes.shape[0]


def _check_hermitian(h: np.ndarray) -> None:
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("generator must be a square matrix")
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    if not np.allclose(h, h.conj().T, rtol=0, atol=1e-12 * scale):
        raise ValueError("generator is not Hermitian")


def expm_hermitian_generator(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i H t) for Hermitian H via its eigendecomposition."""
    h = np.asarray(h, dtype=complex)
    _check_hermitian(h)
    evals, evecs = np.linalg.eigh(h)
    return (evecs * np.exp(-1j * evals * t)) @ evecs.conj().T


@dataclass(eq=False)
class PropagatorCache:
    system: SpinSystem
    dt: float
    basic: list[np.ndarray]
    delay: np.ndarray
    delay_is_diagonal: bool
    z_diagonals: list[np.ndarray] = field(repr=False)
    delay_diagonal: np.ndarray | None = field(default=None, repr=False)
    rotation_exact: bool = True
    """False when H0 fails to commute with some S_jz; phase-rotated pulses are then approximate."""

    @property
    def dim(self) -> int:
        return self.system.dim

    @property
    def n_species(self) -> int:
        return self.system.n_species

    def phase_factors(self, j: int, phi: float) -> np.ndarray:
        """Entrywise factors e^{-i phi (m_a - m_b)} turning X_j into Z X_j Z^dagger."""
        z = np.exp(-1j * phi * self.z_diagonals[j])
        return z[:, None] * z.conj()[None, :]


def build_cache(system: SpinSystem, dt: float = DEFAULT_DT) -> PropagatorCache:
    if not dt > 0:
        raise ValueError("dt must be positive")
    h0 = internal_hamiltonian(system)
    delay = expm_hermitian_generator(h0, dt)
    basic = [
        expm_hermitian_generator(h0 + sp.max_amplitude * collective_operator(system, j, "x"), dt)
        for j, sp in enumerate(system.species)
    ]
    off_diag = h0 - np.diag(np.diag(h0))
    is_diag = not np.any(off_diag)
    delay_diag = None
    if is_diag:
        # exact diagonal exponential; identical to the eigh result up to rounding
        delay_diag = np.exp(-1j * np.real(np.diag(h0)) * dt)
        delay = np.diag(delay_diag)
    zdiags = [collective_z_diagonal(system, j) for j in range(system.n_species)]
    scale = max(1.0, float(np.max(np.abs(h0))))
    exact = all(
        np.allclose(h0 * (m[None, :] - m[:, None]), 0, rtol=0, atol=1e-12 * scale) for m in zdiags
    )
    return PropagatorCache(system, float(dt), basic, delay, is_diag, zdiags, delay_diag, exact)


def z_rotation(system: SpinSystem, species: int | str, phi: float) -> np.ndarray:
    """exp(-i phi S_jz), built entrywise on the diagonal."""
    diag = collective_z_diagonal(system, species)
    return np.diag(np.exp(-1j * phi * diag))


def _check_events(cache: PropagatorCache, events) -> None:
    if len(events) != cache.n_species:
        raise ValueError(
            f"segment has {len(events)} species events but cache was built for {cache.n_species}"
        )


def segment_propagator(cache: PropagatorCache, events) -> np.ndarray:
    """
    Propagator of one segment. `events` holds None (delay) or a phase per species.

    Species pulsed together are applied in ascending species order, earliest
    rightmost. Each factor carries its own H0 evolution, so simultaneous
    pulses count H0 once per pulsed species.
    """
    _check_events(cache, events)
    out = None
    for j, phi in enumerate(events):
        if phi is None:
            continue
        u = cache.basic[j] * cache.phase_factors(j, phi)
        out = u if out is None else u @ out
    if out is None:
        return cache.delay.copy()
    return out


def _check_sequence(cache: PropagatorCache, seq: BBSequence) -> None:
    if seq.n_species != cache.n_species:
        raise ValueError(
            f"sequence has {seq.n_species} species but cache was built for {cache.n_species}"
        )
    if not np.isclose(seq.dt, cache.dt, rtol=1e-12, atol=0):
        raise ValueError(f"sequence dt {seq.dt} does not match cache dt {cache.dt}")


def apply_segments(cache: PropagatorCache, seq: BBSequence, start: int, stop: int,
                   u: np.ndarray | None = None) -> np.ndarray:
    """Left-multiply segments [start, stop) onto `u` (identity by default)."""
    if u is None:
        u = np.eye(cache.dim, dtype=complex)
    diag = cache.delay_diagonal
    for k in range(start, stop):
        row = seq.pulsed[k]
        if not row.any():
            if diag is not None:
                u = diag[:, None] * u
            else:
                u = cache.delay @ u
            continue
        u = segment_propagator(cache, seq.events(k)) @ u
    return u


def bb_propagator(cache: PropagatorCache, seq: BBSequence) -> np.ndarray:
    """Total unitary of a twirl-free BB sequence, U_{K-1} ... U_0."""
    _check_sequence(cache, seq)
    if seq.twirls:
        raise ValueError("sequence contains twirls; use channels.bb_evolve_with_twirls")
    return apply_segments(cache, seq, 0, seq.n_segments)


def bb_propagator_dense(cache: PropagatorCache, seq: BBSequence) -> np.ndarray:
    """Same product as bb_propagator but never takes the diagonal delay shortcut."""
    _check_sequence(cache, seq)
    if seq.twirls:
        raise ValueError("sequence contains twirls; use channels.bb_evolve_with_twirls")
    u = np.eye(cache.dim, dtype=complex)
    for k in range(seq.n_segments):
        u = segment_propagator(cache, seq.events(k)) @ u
    return u


def sm_propagator(system: SpinSystem, seq: SMSequence) -> np.ndarray:
    """Exact piecewise-constant propagator: one Hermitian exponential per segment."""
    if seq.amplitudes.shape[1] != system.n_species:
        raise ValueError("SM sequence species count does not match the system")
    h0 = internal_hamiltonian(system)
    sx = [collective_operator(system, j, "x") for j in range(system.n_species)]
    sy = [collective_operator(system, j, "y") for j in range(system.n_species)]
    u = np.eye(system.dim, dtype=complex)
    for k in range(seq.n_segments):
        h = h0.copy()
        for j in range(system.n_species):
            amp = seq.amplitudes[k, j]
            if amp:
                phi = seq.phases[k, j]
                h += amp * (np.cos(phi) * sx[j] + np.sin(phi) * sy[j])
        u = expm_hermitian_generator(h, seq.dt) @ u
    return u


def unitarity_error(u: np.ndarray) -> float:
    """max |U^dagger U - I| over all entries."""
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


# --- batched evaluation, used by the optimizer ---------------------------------------------

def segment_stack(caches: list[PropagatorCache], pulsed: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """
    Per-segment propagators for a batch of programs under several caches.

    pulsed, phases: (P, K, J). Returns (P, S, K, N, N) with S = len(caches).
    All caches must share the system layout; they typically differ only in RF scale.
    """
    ref = caches[0]
    n = ref.dim
    p, k, nj = pulsed.shape
    delay = np.stack([c.delay for c in caches])            # (S, N, N)
    seg = np.broadcast_to(delay[None, :, None], (p, len(caches), k, n, n)).copy()
    any_pulse = pulsed.any(axis=2)                        # (P, K)
    if not any_pulse.any():
        return seg
    pi, ki = np.nonzero(any_pulse)
    seg[pi, :, ki] = np.eye(n)
    for j in range(nj):
        mask = pulsed[:, :, j]
        if not mask.any():
            continue
        pi, ki = np.nonzero(mask)
        z = np.exp(-1j * phases[pi, ki, j][:, None] * ref.z_diagonals[j][None, :])   # (M, N)
        factors = z[:, :, None] * z.conj()[:, None, :]                              # (M, N, N)
        basic = np.stack([c.basic[j] for c in caches])                             # (S, N, N)
        u = basic[None] * factors[:, None]                                          # (M, S, N, N)
        seg[pi, :, ki] = u @ seg[pi, :, ki]
    return seg


def chain_product(seg: np.ndarray) -> np.ndarray:
    """Ordered product over axis -3 (earliest rightmost) by pairwise reduction."""
    n = seg.shape[-1]
    while seg.shape[-3] > 1:
        if seg.shape[-3] % 2:
            pad = np.broadcast_to(np.eye(n, dtype=seg.dtype), seg.shape[:-3] + (1, n, n))
            seg = np.concatenate([seg, pad], axis=-3)
        seg = seg[..., 1::2, :, :] @ seg[..., 0::2, :, :]
    if seg.shape[-3] == 0:
        return np.broadcast_to(np.eye(n, dtype=complex), seg.shape[:-3] + (n, n)).copy()
    return seg[..., 0, :, :]


def bb_propagators_batch(caches: list[PropagatorCache], pulsed: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """Total propagators (P, S, N, N) for a batch of twirl-free programs."""
    return chain_product(segment_stack(caches, pulsed, phases))
