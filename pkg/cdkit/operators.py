"""
Dense operator core: Pauli strings, interpolating LCU Hamiltonians,
continuity-tracked eigensystems and the norm/distance functionals.

Conventions
-----------
- Qubit 0 is the leftmost Pauli label and the most significant bit of a
  computational-basis index.
- ``expm_hermitian(H, t)`` is exp(-iHt); it is the only matrix exponential
  used by the toolkit.
- Eigenvectors on a SpectralPath are stored in *tracked* order: column n of
  ``vectors[j]`` is level n, where levels are numbered by energy at the first
  grid point and followed by continuity afterwards.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import simpson
from scipy.optimize import linear_sum_assignment

from cdkit.errors import CapabilityError, DomainError, GaplessError, TrackingError
from utils.constants import (
    CLUSTER_TOL,
    CONTINUITY_THRESHOLD,
    DEFAULT_GRID_POINTS,
    DEGENERACY_TOL,
    MAX_REFINEMENT_LEVELS,
    NORMALIZATION_TOL,
    POLYNOMIAL_DERIVATIVE_ORDER,
)

logger = logging.getLogger(__name__)

PAULI_MATRICES = {
    'I': np.eye(2, dtype=complex),
    'X': np.array([[0, 1], [1, 0]], dtype=complex),
    'Y': np.array([[0, -1j], [1j, 0]], dtype=complex),
    'Z': np.array([[1, 0], [0, -1]], dtype=complex),
}

# Single-qubit products a*b = phase * c
_PAULI_PRODUCT = {
    ('I', 'I'): (1, 'I'), ('I', 'X'): (1, 'X'), ('I', 'Y'): (1, 'Y'), ('I', 'Z'): (1, 'Z'),
    ('X', 'I'): (1, 'X'), ('X', 'X'): (1, 'I'), ('X', 'Y'): (1j, 'Z'), ('X', 'Z'): (-1j, 'Y'),
    ('Y', 'I'): (1, 'Y'), ('Y', 'X'): (-1j, 'Z'), ('Y', 'Y'): (1, 'I'), ('Y', 'Z'): (1j, 'X'),
    ('Z', 'I'): (1, 'Z'), ('Z', 'X'): (1j, 'Y'), ('Z', 'Y'): (-1j, 'X'), ('Z', 'Z'): (1, 'I'),
}


# =============================================================================
# PAULI STRINGS
# =============================================================================

@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Paulis, e.g. ``PauliString("XZI")``."""

    ops: str

    def __post_init__(self):
        ops = self.ops.upper()
        if not ops:
            raise DomainError("PauliString needs at least one qubit")
        bad = set(ops) - set(PAULI_MATRICES)
        if bad:
            raise DomainError(f"Unknown Pauli labels {sorted(bad)} in {self.ops!r}")
        object.__setattr__(self, 'ops', ops)

    @property
    def n_qubits(self) -> int:
        return len(self.ops)

    @property
    def is_identity(self) -> bool:
        return set(self.ops) == {'I'}

    def __str__(self) -> str:
        return self.ops

    def __mul__(self, other: "PauliString") -> Tuple[complex, "PauliString"]:
        """Product as (phase, PauliString) with phase in {±1, ±i}."""
        if not isinstance(other, PauliString):
            return NotImplemented
        if other.n_qubits != self.n_qubits:
            raise DomainError(f"Qubit count mismatch: {self.n_qubits} vs {other.n_qubits}")
        phase = 1
        labels = []
        for a, b in zip(self.ops, other.ops):
            p, c = _PAULI_PRODUCT[(a, b)]
            phase *= p
            labels.append(c)
        return complex(phase), PauliString(''.join(labels))

    def to_dense(self) -> np.ndarray:
        return reduce(np.kron, (PAULI_MATRICES[op] for op in self.ops))

    @cached_property
    def _action(self) -> Tuple[np.ndarray, np.ndarray]:
        # P|x> = phase(x) |x ^ flip>
        n = self.n_qubits
        idx = np.arange(2 ** n)
        flip = 0
        parity = np.zeros(2 ** n, dtype=np.int64)
        for j, op in enumerate(self.ops):
            bit = n - 1 - j
            if op in 'XY':
                flip |= 1 << bit
            if op in 'ZY':
                parity ^= (idx >> bit) & 1
        phase = (1j ** self.ops.count('Y')) * (1 - 2 * parity)
        return idx ^ flip, phase.astype(complex)

    def apply(self, state: np.ndarray) -> np.ndarray:
        """Action on a state vector (or a stack of them along axis 0)."""
        target, phase = self._action
        state = np.asarray(state)
        out = np.empty_like(state, dtype=complex)
        if state.ndim == 1:
            out[target] = phase * state
        else:
            out[target] = phase[:, None] * state
        return out


# =============================================================================
# SCHEDULES
# =============================================================================

@dataclass(frozen=True, eq=False)
class Schedule:
    """
    Scalar interpolation function f(λ) together with its derivatives.

    ``derivatives[p]`` evaluates f^(p). Polynomial schedules carry every
    derivative; others carry exactly the ones supplied.
    """

    derivatives: Tuple[Callable[[float], float], ...]
    name: str = "custom"
    polynomial: Optional[Polynomial] = None

    @classmethod
    def from_polynomial(cls, coefficients: Sequence[float], name: str = "polynomial") -> "Schedule":
        poly = Polynomial(coefficients)
        derivs = tuple(poly.deriv(p) for p in range(POLYNOMIAL_DERIVATIVE_ORDER + 1))
        return cls(derivatives=derivs, name=name, polynomial=poly)

    @classmethod
    def linear(cls) -> "Schedule":
        return cls.from_polynomial([0.0, 1.0], name="linear")

    @classmethod
    def from_derivatives(cls, functions: Sequence[Callable[[float], float]], name: str = "custom") -> "Schedule":
        if not functions:
            raise DomainError("A schedule needs at least f itself")
        return cls(derivatives=tuple(functions), name=name)

    @property
    def max_order(self) -> float:
        return math.inf if self.polynomial is not None else len(self.derivatives) - 1

    def value(self, lam: float) -> float:
        return float(self.derivatives[0](lam))

    def derivative(self, lam: float, order: int = 1) -> float:
        if order < 0:
            raise DomainError(f"Derivative order must be non-negative, got {order}")
        if self.polynomial is not None:
            return float(self.polynomial.deriv(order)(lam)) if order else float(self.polynomial(lam))
        if order >= len(self.derivatives):
            raise CapabilityError(
                f"Schedule '{self.name}' supplies derivatives up to order "
                f"{len(self.derivatives) - 1}, order {order} requested"
            )
        return float(self.derivatives[order](lam))

    def require_order(self, order: int):
        if self.max_order < order:
            raise CapabilityError(
                f"Schedule '{self.name}' supplies derivatives up to order "
                f"{self.max_order}, order {order} required"
            )


# =============================================================================
# LCU HAMILTONIANS
# =============================================================================

@dataclass(frozen=True, eq=False)
class LCUHamiltonian:
    """
    Interpolating Hamiltonian H(λ) = H_i + f(λ) H_p written as an LCU.

    Term i has coefficient β_i(λ) = initial[i] + f(λ) * problem[i] on the
    Pauli string ``paulis[i]``. The dense parts default to the Pauli sums;
    a model may pass them directly when the Pauli expansion is large.
    """

    paulis: Tuple[PauliString, ...]
    initial: np.ndarray
    problem: np.ndarray
    schedule: Schedule
    domain: Tuple[float, float]
    dense_initial: Optional[np.ndarray] = None
    dense_problem: Optional[np.ndarray] = None
    name: str = "hamiltonian"

    def __post_init__(self):
        paulis = tuple(p if isinstance(p, PauliString) else PauliString(p) for p in self.paulis)
        if not paulis:
            raise DomainError("LCUHamiltonian needs at least one term")
        n_qubits = paulis[0].n_qubits
        if any(p.n_qubits != n_qubits for p in paulis):
            raise DomainError("All Pauli strings must act on the same number of qubits")

        initial = np.asarray(self.initial, dtype=float).reshape(-1)
        problem = np.asarray(self.problem, dtype=float).reshape(-1)
        if initial.shape != (len(paulis),) or problem.shape != (len(paulis),):
            raise DomainError(
                f"Coefficient arrays must have {len(paulis)} entries, "
                f"got {initial.shape} and {problem.shape}"
            )

        lam_i, lam_f = (float(x) for x in self.domain)
        if not lam_f > lam_i:
            raise DomainError(f"Empty λ domain [{lam_i}, {lam_f}]")

        object.__setattr__(self, 'paulis', paulis)
        object.__setattr__(self, 'initial', initial)
        object.__setattr__(self, 'problem', problem)
        object.__setattr__(self, 'domain', (lam_i, lam_f))

        dense_initial = self.dense_initial
        dense_problem = self.dense_problem
        if dense_initial is None:
            dense_initial = self._pauli_sum(initial)
        if dense_problem is None:
            dense_problem = self._pauli_sum(problem)
        for label, mat in (('H_i', dense_initial), ('H_p', dense_problem)):
            mat = np.asarray(mat)
            if mat.shape != (2 ** n_qubits, 2 ** n_qubits):
                raise DomainError(f"{label} has shape {mat.shape}, expected {(2 ** n_qubits,) * 2}")
            if np.max(np.abs(mat - mat.conj().T), initial=0.0) >= 1e-12:
                raise DomainError(f"{label} is not Hermitian")
        object.__setattr__(self, 'dense_initial', np.asarray(dense_initial, dtype=complex))
        object.__setattr__(self, 'dense_problem', np.asarray(dense_problem, dtype=complex))

    def _pauli_sum(self, coefficients: np.ndarray) -> np.ndarray:
        dim = 2 ** self.paulis[0].n_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for c, p in zip(coefficients, self.paulis):
            if c != 0.0:
                out += c * p.to_dense()
        return out

    @property
    def n_qubits(self) -> int:
        return self.paulis[0].n_qubits

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits

    @property
    def n_terms(self) -> int:
        """ℓ, the number of LCU terms."""
        return len(self.paulis)

    @property
    def lam_i(self) -> float:
        return self.domain[0]

    @property
    def lam_f(self) -> float:
        return self.domain[1]

    @property
    def is_constant(self) -> bool:
        return not np.any(self.problem) and not np.any(self.dense_problem)

    def check_domain(self, lam: float):
        lam_i, lam_f = self.domain
        slack = 1e-12 * max(1.0, abs(lam_i), abs(lam_f))
        if not (lam_i - slack <= lam <= lam_f + slack):
            raise DomainError(f"λ={lam} outside domain [{lam_i}, {lam_f}]")

    def coefficients(self, lam: float) -> np.ndarray:
        """β(λ)."""
        return self.initial + self.schedule.value(lam) * self.problem

    def coefficient_derivatives(self, lam: float, order: int = 1) -> np.ndarray:
        """∂_λ^p β(λ)."""
        if order == 0:
            return self.coefficients(lam)
        return self.schedule.derivative(lam, order) * self.problem

    def one_norm(self, lam: float) -> float:
        """‖β(λ)‖₁."""
        return float(np.sum(np.abs(self.coefficients(lam))))

    def derivative_one_norm(self, lam: float, order: int = 1) -> float:
        """‖∂_λ^p β(λ)‖₁."""
        return float(np.sum(np.abs(self.coefficient_derivatives(lam, order))))

    def to_dense(self, lam: float) -> np.ndarray:
        self.check_domain(lam)
        return self.dense_initial + self.schedule.value(lam) * self.dense_problem

    def derivative(self, lam: float, order: int = 1) -> np.ndarray:
        """∂_λ^p H(λ) = f^(p)(λ) H_p for p ≥ 1."""
        if order == 0:
            return self.to_dense(lam)
        self.check_domain(lam)
        return self.schedule.derivative(lam, order) * self.dense_problem

    def pauli_sum(self, lam: float) -> np.ndarray:
        """Σ β_i(λ) V_i built term by term (consistency reference)."""
        return self._pauli_sum(self.coefficients(lam))

    @cached_property
    def problem_norm(self) -> float:
        """‖H_p‖ in spectral norm."""
        return spectral_norm(self.dense_problem)


def to_dense(h: LCUHamiltonian, lam: float) -> np.ndarray:
    """Dense H(λ); raises DomainError outside the λ domain."""
    return h.to_dense(lam)


# =============================================================================
# DENSE LINEAR ALGEBRA
# =============================================================================

def spectral_norm(matrix: np.ndarray) -> float:
    return float(np.linalg.norm(matrix, 2))


def expm_hermitian(hamiltonian: np.ndarray, t: float = 1.0) -> np.ndarray:
    """exp(-i H t) for Hermitian H via eigendecomposition."""
    energies, vectors = np.linalg.eigh(hamiltonian)
    return (vectors * np.exp(-1j * energies * t)) @ vectors.conj().T


def is_unitary(matrix: np.ndarray, atol: float = 1e-10) -> bool:
    eye = np.eye(matrix.shape[0])
    return bool(np.allclose(matrix.conj().T @ matrix, eye, atol=atol))


def sqrt_infidelity(psi: np.ndarray, phi: np.ndarray) -> float:
    """
    √(1 - |<ψ|φ>|²), the pure-state trace distance.

    Raises
    ------
    DomainError
        If either state is not normalized to 1e-10.
    """
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    phi = np.asarray(phi, dtype=complex).reshape(-1)
    for label, v in (('ψ', psi), ('φ', phi)):
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > NORMALIZATION_TOL:
            raise DomainError(f"State {label} is not normalized (norm={norm:.12g})")
    overlap = abs(np.vdot(psi, phi)) ** 2
    return float(np.sqrt(np.clip(1.0 - overlap, 0.0, 1.0)))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """½‖ρ - σ‖₁ from the eigenvalues of the Hermitian difference."""
    diff = np.asarray(rho) - np.asarray(sigma)
    diff = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


def projector(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=complex).reshape(-1)
    return np.outer(state, state.conj())


# =============================================================================
# SPECTRAL TRACKING
# =============================================================================

@dataclass(frozen=True, eq=False)
class SpectralPath:
    """Gauge-fixed instantaneous eigensystems on a λ grid (tracked order)."""

    hamiltonian: LCUHamiltonian
    grid: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray
    gauge: str = "positive-overlap"
    refinements: int = 0
    low_overlap_windows: Tuple[Tuple[float, float], ...] = field(default_factory=tuple)

    @property
    def n_points(self) -> int:
        return len(self.grid)

    @property
    def dim(self) -> int:
        return self.energies.shape[1]

    @property
    def lam_i(self) -> float:
        return float(self.grid[0])

    @property
    def lam_f(self) -> float:
        return float(self.grid[-1])

    def omega(self, j: int) -> np.ndarray:
        """Gap table ω_mn = E_m - E_n at grid point j (tracked order)."""
        e = self.energies[j]
        return e[:, None] - e[None, :]

    def state(self, j: int, n: int) -> np.ndarray:
        return self.vectors[j][:, n]

    def initial_state(self, n: int) -> np.ndarray:
        return self.vectors[0][:, n].copy()

    def final_state(self, n: int) -> np.ndarray:
        return self.vectors[-1][:, n].copy()

    def gaps(self, n: int) -> np.ndarray:
        """Distance from E_n to the nearest other eigenvalue, per grid point."""
        self._check_level(n)
        if self.dim == 1:
            return np.full(self.n_points, np.inf)
        others = np.delete(self.energies, n, axis=1)
        return np.min(np.abs(others - self.energies[:, n:n + 1]), axis=1)

    def grid_index(self, lam: float) -> Optional[int]:
        j = int(np.searchsorted(self.grid, lam))
        for cand in (j - 1, j):
            if 0 <= cand < self.n_points and abs(self.grid[cand] - lam) <= 1e-14 * max(1.0, abs(lam)):
                return cand
        return None

    def eigensystem(self, lam: float) -> Tuple[np.ndarray, np.ndarray]:
        """
        (energies, vectors) at any λ in the domain, tracked order.

        Grid points return stored data; other points are diagonalized and
        aligned against the nearest grid point.
        """
        j = self.grid_index(lam)
        if j is not None:
            return self.energies[j], self.vectors[j]
        self.hamiltonian.check_domain(lam)
        nearest = int(np.argmin(np.abs(self.grid - lam)))
        energies, vectors = np.linalg.eigh(self.hamiltonian.to_dense(lam))
        match = _match_levels(self.vectors[nearest], energies, vectors)
        return match.energies, match.vectors

    def _check_level(self, n: int):
        if not 0 <= n < self.dim:
            raise DomainError(f"Level {n} outside 0..{self.dim - 1}")


@dataclass
class _Match:
    energies: np.ndarray
    vectors: np.ndarray
    min_overlap: float
    ambiguous: bool


def _clusters(energies: np.ndarray) -> list:
    """Group sorted energies into runs closer than the cluster tolerance."""
    scale = max(1.0, float(np.max(np.abs(energies))))
    groups = [[0]]
    for c in range(1, len(energies)):
        if energies[c] - energies[c - 1] <= CLUSTER_TOL * scale:
            groups[-1].append(c)
        else:
            groups.append([c])
    return groups


def _match_levels(prev_vectors: np.ndarray, energies: np.ndarray, vectors: np.ndarray) -> _Match:
    """
    Assign new eigenvectors to previously tracked levels by maximal overlap,
    then fix the gauge of each (possibly degenerate) cluster by the polar
    factor of its overlap block.
    """
    dim = len(energies)
    groups = _clusters(energies)
    cluster_of = np.empty(dim, dtype=int)
    for g, members in enumerate(groups):
        cluster_of[members] = g

    overlap = prev_vectors.conj().T @ vectors
    weight = np.abs(overlap) ** 2
    cluster_weight = np.stack([weight[:, members].sum(axis=1) for members in groups], axis=1)
    cost = -cluster_weight[:, cluster_of]
    rows, cols = linear_sum_assignment(cost)

    tracked_e = np.empty(dim)
    tracked_v = np.empty_like(vectors, dtype=complex)
    min_overlap = 1.0
    ambiguous = False
    for g, members in enumerate(groups):
        assigned = np.sort(rows[np.isin(cols, members)])
        block = vectors[:, members].conj().T @ prev_vectors[:, assigned]
        u, sigma, wh = np.linalg.svd(block)
        aligned = vectors[:, members] @ (u @ wh)
        tracked_v[:, assigned] = aligned
        tracked_e[assigned] = energies[members]
        min_overlap = min(min_overlap, float(np.min(sigma)))
        if np.any(cluster_weight[assigned, g] < 0.5):
            ambiguous = True
    return _Match(tracked_e, tracked_v, min_overlap, ambiguous)


def default_grid(h: LCUHamiltonian, n_points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    return np.linspace(h.lam_i, h.lam_f, n_points)


def track_path(
    h: LCUHamiltonian,
    grid: Optional[Sequence[float]] = None,
    max_refinement: int = MAX_REFINEMENT_LEVELS,
) -> SpectralPath:
    """
    Diagonalize H on a λ grid and follow every level by continuity.

    Intervals whose consecutive overlap drops below the continuity
    threshold are bisected, up to ``max_refinement`` levels deep.

    Raises
    ------
    DomainError
        Grid not strictly increasing or outside the domain.
    TrackingError
        Overlap matching stays ambiguous at the refinement cap.
    """
    grid = default_grid(h) if grid is None else np.asarray(grid, dtype=float).reshape(-1)
    if len(grid) < 2:
        raise DomainError("Grid needs at least two points")
    if not np.all(np.diff(grid) > 0):
        raise DomainError("Grid must be strictly increasing")
    h.check_domain(grid[0])
    h.check_domain(grid[-1])

    energies, vectors = np.linalg.eigh(h.to_dense(grid[0]))
    lams = [float(grid[0])]
    all_e = [energies]
    all_v = [vectors.astype(complex)]
    low_windows = []
    n_refined = 0

    def advance(prev_v, lam_a, lam_b, depth):
        nonlocal n_refined
        e_new, v_new = np.linalg.eigh(h.to_dense(lam_b))
        match = _match_levels(prev_v, e_new, v_new)
        if match.min_overlap >= CONTINUITY_THRESHOLD:
            return [(lam_b, match)]
        if depth >= max_refinement:
            if match.ambiguous:
                raise TrackingError(
                    f"Degenerate crossing with ambiguous overlap matching in "
                    f"λ window [{lam_a:.12g}, {lam_b:.12g}]",
                    window=(lam_a, lam_b),
                )
            logger.warning(
                f"Continuity overlap {match.min_overlap:.3f} below "
                f"{CONTINUITY_THRESHOLD} in [{lam_a:.6g}, {lam_b:.6g}] at refinement cap"
            )
            low_windows.append((lam_a, lam_b))
            return [(lam_b, match)]
        n_refined += 1
        mid = 0.5 * (lam_a + lam_b)
        first = advance(prev_v, lam_a, mid, depth + 1)
        return first + advance(first[-1][1].vectors, mid, lam_b, depth + 1)

    for lam_a, lam_b in zip(grid[:-1], grid[1:]):
        for lam, match in advance(all_v[-1], float(lam_a), float(lam_b), 0):
            lams.append(lam)
            all_e.append(match.energies)
            all_v.append(match.vectors)

    if n_refined:
        logger.debug(f"track_path: {n_refined} bisections, {len(lams)} grid points")

    return SpectralPath(
        hamiltonian=h,
        grid=np.asarray(lams),
        energies=np.asarray(all_e),
        vectors=np.asarray(all_v),
        refinements=n_refined,
        low_overlap_windows=tuple(low_windows),
    )


def min_gap(path: SpectralPath, n: int) -> float:
    """
    Minimum over the grid of the distance from E_n to its spectral neighbours.

    Raises
    ------
    GaplessError
        If the gap drops below the degeneracy tolerance.
    """
    gaps = path.gaps(n)
    j = int(np.argmin(gaps))
    gap = float(gaps[j])
    if gap < DEGENERACY_TOL:
        raise GaplessError(f"Level {n} is gapless at λ={path.grid[j]:.12g} (gap={gap:.3e})")
    return gap


OperatorFunction = Union[Callable[[float], np.ndarray], np.ndarray]


def norms(o: OperatorFunction, path: SpectralPath, n: Optional[int] = None, p: float = 1) -> float:
    """
    Integral norm of an operator family along the path.

    With a level ``n`` the integrand is ‖O(λ)|n(λ)>‖; with ``n=None`` it is
    the spectral norm ‖O(λ)‖. ``p`` is a positive integer or ``np.inf``
    (grid maximum). Integration is composite Simpson on the path grid.
    """
    if not (p == np.inf or p > 0):
        raise DomainError(f"p must be positive or inf, got {p}")
    if n is not None:
        path._check_level(n)

    def evaluate(lam):
        return o(lam) if callable(o) else np.asarray(o)

    values = np.empty(path.n_points)
    for j, lam in enumerate(path.grid):
        mat = evaluate(float(lam))
        if n is None:
            values[j] = spectral_norm(mat)
        else:
            values[j] = np.linalg.norm(mat @ path.vectors[j][:, n])

    if p == np.inf:
        return float(np.max(values))
    integral = simpson(values ** p, x=path.grid)
    return float(integral ** (1.0 / p))


def derivative_operator(h: LCUHamiltonian, order: int = 1) -> Callable[[float], np.ndarray]:
    """λ ↦ ∂_λ^p H(λ) as an operator function for ``norms``."""
    return lambda lam: h.derivative(lam, order)
