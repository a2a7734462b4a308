"""
Optimal fixed-point quantum search on a simulated register of n_sys system
qubits plus one ancilla (least significant qubit).

The generalized Grover iterate is

    G(alpha, beta) = H^n S_0(-alpha) H^n  S_m(beta)

where S_m(beta) puts a phase e^{i beta} on marked system states (built from
two oracle queries) and S_0(phi) puts e^{i phi} on |0...0>. Iterates are
applied for j = 1..l with the Chebyshev phase schedule, so l iterates cost
2l = L - 1 oracle queries. With alpha = beta = pi this is the textbook Grover
step up to a global sign.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .channels import twirl

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def chebyshev_T(order: float, x: float) -> float:
    """
    Chebyshev polynomial of the first kind for real (possibly fractional) order.

    Uses cos(order * arccos x) inside [-1, 1] and cosh(order * arccosh x) for
    x > 1. For x < -1 only integer orders are defined.
    """
    if abs(x) <= 1.0:
        return float(np.cos(order * np.arccos(x)))
    if x > 1.0:
        return float(np.cosh(order * np.arccosh(x)))
    if float(order).is_integer():
        return float((-1) ** int(order) * np.cosh(order * np.arccosh(-x)))
    raise ValueError(f"T_{order}({x}) is undefined for fractional order and x < -1")


@dataclass
class PhaseSchedule:
    l: int
    delta: float
    gamma: float
    alpha: np.ndarray
    beta: np.ndarray

    @property
    def L(self) -> int:
        return 2 * self.l + 1

    @property
    def queries(self) -> int:
        return self.L - 1


def phase_schedule(l: int, delta: float) -> PhaseSchedule:
    if l < 0:
        raise ValueError("number of iterations l must be >= 0")
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    big_l = 2 * l + 1
    gamma = 1.0 / chebyshev_T(1.0 / big_l, 1.0 / delta)
    root = np.sqrt(max(0.0, 1.0 - gamma**2))
    alpha = np.empty(l)
    for j in range(1, l + 1):
        y = np.tan(2 * np.pi * j / big_l) * root
        # arccot on its principal branch (0, pi); a tan pole gives the limit 0
        alpha[j - 1] = 2 * np.arctan2(1.0, y) if np.isfinite(y) else 0.0
    beta = -alpha[::-1]
    return PhaseSchedule(l, float(delta), float(gamma), alpha, beta)


@dataclass
class OFPQSConfig:
    n_sys: int
    marked: frozenset[int]
    l: int
    delta: float = float(np.sqrt(0.2))

    def __post_init__(self):
        self.marked = frozenset(int(m) for m in self.marked)
        if self.n_sys < 1:
            raise ValueError("need at least one system qubit")
        if not self.marked:
            raise ValueError("marked set must be nonempty")
        q = 2**self.n_sys
        bad = sorted(m for m in self.marked if not 0 <= m < q)
        if bad:
            raise ValueError(f"marked states {bad} outside [0, {q})")
        if self.l < 0:
            raise ValueError("l must be >= 0")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError("delta must lie in (0, 1]")

    @property
    def Q(self) -> int:
        return 2**self.n_sys

    @property
    def R(self) -> int:
        return len(self.marked)


@dataclass
class SearchOutcome:
    state: np.ndarray
    p_success: float
    queries: int
    schedule: PhaseSchedule
    config: OFPQSConfig = field(repr=False)


class Oracle:
    """U_G: flips the ancilla when the system register holds a marked state. Counts queries."""

    def __init__(self, n_sys: int, marked):
        marked = frozenset(int(m) for m in marked)
        if not marked:
            raise ValueError("marked set must be nonempty")
        q = 2**n_sys
        if any(not 0 <= m < q for m in marked):
            raise ValueError(f"marked states must lie in [0, {q})")
        self.n_sys = n_sys
        self.marked = marked
        self.queries = 0
        perm = np.arange(2 * q)
        for m in marked:
            perm[2 * m], perm[2 * m + 1] = 2 * m + 1, 2 * m
        self._matrix = np.eye(2 * q, dtype=complex)[perm]

    def query(self) -> np.ndarray:
        self.queries += 1
        return self._matrix


def oracle_unitary(n_sys: int, marked) -> np.ndarray:
    return Oracle(n_sys, marked).query().copy()


def _marked_indicator(n_sys: int, marked) -> np.ndarray:
    f = np.zeros(2**n_sys, dtype=int)
    f[list(marked)] = 1
    return f


def selective_phase_marked(n_sys: int, marked, alpha: float, oracle: Oracle | None = None) -> np.ndarray:
    """
    U_G (I (x) diag(1, e^{i alpha})) U_G on system + ancilla.

    With the ancilla in |0> this multiplies marked system states by e^{i alpha}
    and leaves the ancilla in |0>.
    """
    if oracle is None:
        oracle = Oracle(n_sys, marked)
    q = 2**n_sys
    phase = np.kron(np.eye(q), np.diag([1.0, np.exp(1j * alpha)]))
    return oracle.query() @ phase @ oracle.query()


def selective_phase_marked_direct(n_sys: int, marked, alpha: float) -> np.ndarray:
    """The same diagonal as selective_phase_marked, written down without the oracle."""
    f = _marked_indicator(n_sys, marked)
    flip = np.repeat(f, 2) ^ np.tile([0, 1], 2**n_sys)
    return np.diag(np.exp(1j * alpha * flip))


def selective_phase_zero(n_sys: int, beta: float) -> np.ndarray:
    """e^{i beta} on |0...0> of the system register, identity elsewhere (system only)."""
    diag = np.ones(2**n_sys, dtype=complex)
    diag[0] = np.exp(1j * beta)
    return np.diag(diag)


def hadamard_all(n: int) -> np.ndarray:
    return reduce(np.kron, [_H] * n) if n else np.eye(1, dtype=complex)


def grover_iterate(n_sys: int, marked, alpha: float, beta: float,
                   oracle: Oracle | None = None) -> np.ndarray:
    """Generalized Grover iterate on system (x) ancilla; two oracle queries per call."""
    if oracle is None:
        oracle = Oracle(n_sys, marked)
    h = hadamard_all(n_sys)
    reflect = h @ selective_phase_zero(n_sys, -alpha) @ h
    return np.kron(reflect, np.eye(2)) @ selective_phase_marked(n_sys, marked, beta, oracle)


def iterates_unitary(n_sys: int, marked, l: int, delta: float) -> np.ndarray:
    """G(alpha_l, beta_l) ... G(alpha_1, beta_1): the whole search block as one unitary."""
    sched = phase_schedule(l, delta)
    oracle = Oracle(n_sys, marked)
    u = np.eye(2 ** (n_sys + 1), dtype=complex)
    for a, b in zip(sched.alpha, sched.beta):
        u = grover_iterate(n_sys, marked, a, b, oracle) @ u
    return u


def initial_state(n_sys: int) -> np.ndarray:
    """Uniform superposition on the system register, ancilla in |0>."""
    zero = np.zeros(2 ** (n_sys + 1), dtype=complex)
    zero[0] = 1.0
    return np.kron(hadamard_all(n_sys), np.eye(2)) @ zero


def success_probability(state: np.ndarray, marked) -> float:
    probs = np.abs(state.reshape(-1, 2)) ** 2
    return float(probs[sorted(marked)].sum())


def run_ofpqs(config: OFPQSConfig) -> SearchOutcome:
    sched = phase_schedule(config.l, config.delta)
    oracle = Oracle(config.n_sys, config.marked)
    psi = initial_state(config.n_sys)
    for a, b in zip(sched.alpha, sched.beta):
        psi = grover_iterate(config.n_sys, config.marked, a, b, oracle) @ psi
    return SearchOutcome(psi, success_probability(psi, config.marked), oracle.queries, sched, config)


def reduced_success_probability(q: int, r: int, l: int, delta: float) -> float:
    """
    The same search restricted to span{|psi_(Q-R)>, |psi_R>}, where every
    operator is 2x2. Independent of the full-register construction.
    """
    if not 0 < r <= q:
        raise ValueError("need 0 < R <= Q")
    lam = r / q
    sched = phase_schedule(l, delta)
    start = np.array([np.sqrt(1 - lam), np.sqrt(lam)], dtype=complex)
    proj = np.outer(start, start.conj())
    psi = start.copy()
    for a, b in zip(sched.alpha, sched.beta):
        mark = np.diag([1.0, np.exp(1j * b)])
        reflect = np.eye(2) - (1 - np.exp(-1j * a)) * proj
        psi = reflect @ mark @ psi
    return float(abs(psi[1]) ** 2)


def success_curve(n_sys: int, marked, delta: float, l_values) -> list[tuple[int, int, float]]:
    """(l, L, P_L) for each requested iteration count."""
    rows = []
    for l in l_values:
        out = run_ofpqs(OFPQSConfig(n_sys, marked, int(l), delta))
        rows.append((int(l), 2 * int(l) + 1, out.p_success))
    return rows


def readout_via_ancilla(state: np.ndarray, n_sys: int) -> np.ndarray:
    """
    Populations of each system basis state, read the way the experiment does:
    twirl the density matrix, apply a Hadamard to the ancilla, and collect the
    diagonal by system index.
    """
    rho = twirl(np.outer(state, state.conj()))
    h_anc = np.kron(np.eye(2**n_sys), _H)
    rho = h_anc @ rho @ h_anc.conj().T
    return np.real(np.diag(rho)).reshape(-1, 2).sum(axis=1)


def first_reaching(curve, bound: float) -> int | None:
    for l, _, p in curve:
        if p >= bound:
            return l
    return None


def holds_fixed_point_band(curve, bound: float, tol: float = 1e-9) -> bool:
    """Once P_l reaches `bound`, no later P_l falls below it (within tol)."""
    reached = False
    for _, _, p in curve:
        if reached and p < bound - tol:
            return False
        if p >= bound:
            reached = True
    return True
