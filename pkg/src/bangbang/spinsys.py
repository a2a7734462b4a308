"""
Spin-1/2 operators and the secular internal Hamiltonian of a multi-species
spin system in the rotating frame.

Conventions used throughout the package:

- spins are indexed from 0; spin 0 is the most significant tensor factor
- |0> is the +1/2 eigenstate of I_z
- offsets and RF amplitudes are angular (rad/s); couplings are in Hz and
  enter the Hamiltonian with an explicit 2*pi
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}

WEAK_COUPLING_RATIO = 100.0


@dataclass(frozen=True)
class Species:
    """One RF channel: a label, its maximum amplitude (rad/s) and member spins."""

    label: str
    max_amplitude: float
    members: tuple[int, ...]

    def __post_init__(self):
        if self.max_amplitude < 0:
            raise ValueError(f"species {self.label!r}: max_amplitude must be >= 0")
        if not self.members:
            raise ValueError(f"species {self.label!r} has no member spins")
        object.__setattr__(self, "members", tuple(int(m) for m in self.members))


@dataclass(frozen=True, eq=False)
class SpinSystem:
    n_spins: int
    species: tuple[Species, ...]
    offsets: np.ndarray
    j_couplings: np.ndarray
    d_couplings: np.ndarray | None = None
    weak_coupling: bool = True
    spin_to_species: dict[int, int] = field(init=False, repr=False)

    def __post_init__(self):
        n = int(self.n_spins)
        if n < 1:
            raise ValueError("n_spins must be positive")
        object.__setattr__(self, "species", tuple(self.species))
        offsets = np.asarray(self.offsets, dtype=float).reshape(-1)
        if offsets.shape != (n,):
            raise ValueError(f"expected {n} offsets, got {offsets.size}")
        jc = _coupling_matrix(self.j_couplings, n, "J")
        dc = _coupling_matrix(self.d_couplings, n, "D")
        for arr in (offsets, jc, dc):
            arr.setflags(write=False)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "j_couplings", jc)
        object.__setattr__(self, "d_couplings", dc)

        owner: dict[int, int] = {}
        for j, sp in enumerate(self.species):
            for m in sp.members:
                if not 0 <= m < n:
                    raise ValueError(f"species {sp.label!r}: spin {m} out of range")
                if m in owner:
                    raise ValueError(f"spin {m} assigned to more than one species")
                owner[m] = j
        if len(owner) != n:
            missing = sorted(set(range(n)) - set(owner))
            raise ValueError(f"spins {missing} are not assigned to any species")
        labels = [sp.label for sp in self.species]
        if len(set(labels)) != len(labels):
            raise ValueError("species labels must be unique")
        object.__setattr__(self, "spin_to_species", owner)

    @property
    def dim(self) -> int:
        return 2**self.n_spins

    @property
    def n_species(self) -> int:
        return len(self.species)

    def species_index(self, species: int | str) -> int:
        if isinstance(species, str):
            for j, sp in enumerate(self.species):
                if sp.label == species:
                    return j
            raise KeyError(f"unknown species {species!r}")
        j = int(species)
        if not 0 <= j < self.n_species:
            raise KeyError(f"unknown species index {species}")
        return j

    def with_rf_scale(self, scale: float) -> "SpinSystem":
        """Copy with every species' maximum amplitude multiplied by `scale`."""
        species = tuple(
            Species(sp.label, sp.max_amplitude * scale, sp.members) for sp in self.species
        )
        return SpinSystem(
            self.n_spins, species, self.offsets, self.j_couplings,
            self.d_couplings, self.weak_coupling,
        )

    def relabeled(self, perm) -> "SpinSystem":
        """System in which old spin `perm[k]` becomes new spin `k`."""
        perm = [int(p) for p in perm]
        inv = {old: new for new, old in enumerate(perm)}
        species = tuple(
            Species(sp.label, sp.max_amplitude, tuple(sorted(inv[m] for m in sp.members)))
            for sp in self.species
        )
        ix = np.ix_(perm, perm)
        return SpinSystem(
            self.n_spins, species, self.offsets[perm], self.j_couplings[ix],
            self.d_couplings[ix], self.weak_coupling,
        )

    def __eq__(self, other):
        if not isinstance(other, SpinSystem):
            return NotImplemented
        return (
            self.n_spins == other.n_spins
            and self.species == other.species
            and self.weak_coupling == other.weak_coupling
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.j_couplings, other.j_couplings)
            and np.array_equal(self.d_couplings, other.d_couplings)
        )

    __hash__ = None


def _coupling_matrix(values, n: int, name: str) -> np.ndarray:
    if values is None:
        return np.zeros((n, n))
    mat = np.array(values, dtype=float)
    if mat.shape != (n, n):
        raise ValueError(f"{name} coupling table must be {n}x{n}, got {mat.shape}")
    if not np.allclose(mat, mat.T, rtol=0, atol=1e-12):
        raise ValueError(f"{name} coupling table is not symmetric")
    if np.any(np.diag(mat) != 0):
        raise ValueError(f"{name} coupling table must have a zero diagonal")
    return mat


def spin_operator(system: SpinSystem, r: int, axis: str) -> np.ndarray:
    """Pauli/2 on spin `r`, identity on every other spin."""
    if not 0 <= r < system.n_spins:
        raise IndexError(f"spin index {r} out of range for {system.n_spins} spins")
    try:
        op = _PAULI[axis] / 2
    except KeyError:
        raise ValueError(f"axis must be one of x, y, z, got {axis!r}") from None
    factors = [np.eye(2, dtype=complex)] * system.n_spins
    factors = factors[:r] + [op] + factors[r + 1:]
    return reduce(np.kron, factors)


def collective_operator(system: SpinSystem, species: int | str, axis: str) -> np.ndarray:
    j = system.species_index(species)
    return sum(spin_operator(system, m, axis) for m in system.species[j].members)


def collective_z_diagonal(system: SpinSystem, species: int | str) -> np.ndarray:
    """Diagonal of S_z for one species, computed without forming matrices."""
    j = system.species_index(species)
    idx = np.arange(system.dim)
    diag = np.zeros(system.dim)
    for m in system.species[j].members:
        bit = (idx >> (system.n_spins - 1 - m)) & 1
        diag += 0.5 - bit
    return diag


def internal_hamiltonian(system: SpinSystem) -> np.ndarray:
    n = system.n_spins
    iz = [spin_operator(system, r, "z") for r in range(n)]
    ham = np.zeros((system.dim, system.dim), dtype=complex)
    for r in range(n):
        ham -= system.offsets[r] * iz[r]
    ix = iy = None
    if not system.weak_coupling:
        ix = [spin_operator(system, r, "x") for r in range(n)]
        iy = [spin_operator(system, r, "y") for r in range(n)]
    for r in range(n):
        for s in range(r + 1, n):
            jrs = system.j_couplings[r, s]
            drs = system.d_couplings[r, s]
            if jrs + 2 * drs:
                ham += 2 * np.pi * (jrs + 2 * drs) * (iz[r] @ iz[s])
            if ix is not None and jrs - drs:
                ham += 2 * np.pi * (jrs - drs) * (ix[r] @ ix[s] + iy[r] @ iy[s])
    return ham


@dataclass
class WeakCouplingReport:
    valid: bool
    threshold: float
    violations: list[tuple[int, int, float]]
    """(r, s, ratio) for every pair failing the test."""


def is_weak_coupling_valid(system: SpinSystem, ratio_threshold: float = WEAK_COUPLING_RATIO,
                           same_species_only: bool = False) -> WeakCouplingReport:
    """
    Check |w_r - w_s| >= threshold * 2*pi*|J_rs - D_rs| for every coupled pair.

    Offsets are rotating-frame values, so for spins of different species the
    real frequency gap is the Larmor difference, not the offset difference.
    ``same_species_only`` skips those pairs.
    """
    violations = []
    n = system.n_spins
    owner = system.spin_to_species
    for r in range(n):
        for s in range(r + 1, n):
            if same_species_only and owner[r] != owner[s]:
                continue
            flipflop = 2 * np.pi * abs(system.j_couplings[r, s] - system.d_couplings[r, s])
            if flipflop == 0:
                continue
            gap = abs(system.offsets[r] - system.offsets[s])
            if gap < ratio_threshold * flipflop:
                violations.append((r, s, gap / flipflop))
    return WeakCouplingReport(not violations, ratio_threshold, violations)


def permutation_operator(n_spins: int, perm) -> np.ndarray:
    """Unitary mapping |b_0 ... b_{n-1}> to the state whose new spin k holds old bit perm[k]."""
    dim = 2**n_spins
    out = np.zeros((dim, dim))
    for idx in range(dim):
        bits = [(idx >> (n_spins - 1 - m)) & 1 for m in range(n_spins)]
        new = 0
        for k in range(n_spins):
            new = (new << 1) | bits[perm[k]]
        out[new, idx] = 1
    return out


def demo_two_spin() -> SpinSystem:
    """Heteronuclear 1H-19F pair used by the desk-scale demos and tests."""
    return SpinSystem(
        n_spins=2,
        species=(
            Species("H", 2 * np.pi * 25e3, (0,)),
            Species("F", 2 * np.pi * 25e3, (1,)),
        ),
        offsets=2 * np.pi * np.array([250.0, -150.0]),
        j_couplings=np.array([[0.0, 100.0], [100.0, 0.0]]),
        d_couplings=np.zeros((2, 2)),
        weak_coupling=True,
    )
