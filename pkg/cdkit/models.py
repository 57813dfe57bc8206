"""
Benchmark Hamiltonians: Landau-Zener, transverse-field Ising chain and
unstructured search, each with its LCU form, dense form and (where a closed
form exists) an analytic gap checked against exact diagonalization on load.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.integrate import simpson

from cdkit.errors import ConfigError, DomainError
from cdkit.operators import LCUHamiltonian, PauliString, Schedule, SpectralPath

logger = logging.getLogger(__name__)

ANNOTATION_TOL = 1e-8
ANNOTATION_POINTS = 33
CONSISTENCY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A named benchmark Hamiltonian plus its analytic annotations."""

    name: str
    hamiltonian: LCUHamiltonian
    level: int = 0
    gap_formula: Optional[Callable[[float], float]] = None
    annotations: Dict[str, float] = field(default_factory=dict)
    params: Dict[str, object] = field(default_factory=dict)
    cost_terms: Optional[int] = None
    description: str = ""

    @property
    def n_qubits(self) -> int:
        return self.hamiltonian.n_qubits

    @property
    def lam_range(self) -> Tuple[float, float]:
        return self.hamiltonian.domain

    @property
    def n_terms(self) -> int:
        """ℓ as seen by the gate-cost model."""
        return self.cost_terms if self.cost_terms is not None else self.hamiltonian.n_terms

    def verify(self, n_points: int = ANNOTATION_POINTS) -> "ModelSpec":
        """
        Check dense/LCU consistency and the analytic gap on a λ grid.

        Raises
        ------
        DomainError
            If the dense form disagrees with the Pauli sum or the gap formula
            disagrees with exact diagonalization.
        """
        h = self.hamiltonian
        for lam in np.linspace(h.lam_i, h.lam_f, 5):
            diff = np.max(np.abs(h.to_dense(lam) - h.pauli_sum(lam)))
            if diff >= CONSISTENCY_TOL:
                raise DomainError(f"{self.name}: dense and LCU forms differ by {diff:.3e} at λ={lam:.6g}")

        if self.gap_formula is not None:
            for lam in np.linspace(h.lam_i, h.lam_f, n_points):
                energies = np.linalg.eigvalsh(h.to_dense(lam))
                others = np.delete(energies, self.level)
                numeric = float(np.min(np.abs(others - energies[self.level])))
                analytic = float(self.gap_formula(lam))
                if abs(numeric - analytic) > ANNOTATION_TOL:
                    raise DomainError(
                        f"{self.name}: gap formula {analytic:.12g} vs numeric "
                        f"{numeric:.12g} at λ={lam:.6g}"
                    )
        logger.debug(f"Model {self.name} verified ({h.n_terms} terms, {h.n_qubits} qubits)")
        return self


# =============================================================================
# MODELS
# =============================================================================

def landau_zener() -> ModelSpec:
    """H(λ) = λZ + X on λ ∈ [-1, 1], ground state."""
    h = LCUHamiltonian(
        paulis=(PauliString("Z"), PauliString("X")),
        initial=[0.0, 1.0],
        problem=[1.0, 0.0],
        schedule=Schedule.linear(),
        domain=(-1.0, 1.0),
        name="landau_zener",
    )
    return ModelSpec(
        name="landau_zener",
        hamiltonian=h,
        level=0,
        gap_formula=lambda lam: 2.0 * np.sqrt(lam ** 2 + 1.0),
        annotations={"min_gap": 2.0, "agp_01_at_0": 0.5},
        description="Two-level avoided crossing",
    ).verify()


def _free_fermion_gap(n_qubits: int, J: float, lam: float) -> float:
    # Open chain maps to free fermions; lowest excitation is twice the
    # smallest singular value of the bidiagonal coupling matrix.
    g = 1.0 - lam
    coupling = np.diag(np.full(n_qubits, g)) + np.diag(np.full(n_qubits - 1, J * lam), k=1)
    return 2.0 * float(np.min(np.linalg.svd(coupling, compute_uv=False)))


def tfim(
    n_qubits: int,
    J: float = 1.0,
    h_z: float = 0.0,
    lam_range: Tuple[float, float] = (0.05, 0.95),
) -> ModelSpec:
    """
    Open transverse-field Ising chain
    H(λ) = (1-λ) Σ X_i + λ (J Σ Z_i Z_{i+1} + h_z Σ Z_i).
    """
    if not 2 <= n_qubits <= 8:
        raise DomainError(f"tfim supports 2..8 qubits, got {n_qubits}")

    paulis, initial, problem = [], [], []
    for i in range(n_qubits):
        paulis.append(PauliString(''.join('X' if j == i else 'I' for j in range(n_qubits))))
        initial.append(1.0)
        problem.append(-1.0)
    for i in range(n_qubits - 1):
        paulis.append(PauliString(''.join('Z' if j in (i, i + 1) else 'I' for j in range(n_qubits))))
        initial.append(0.0)
        problem.append(J)
    if h_z != 0.0:
        for i in range(n_qubits):
            paulis.append(PauliString(''.join('Z' if j == i else 'I' for j in range(n_qubits))))
            initial.append(0.0)
            problem.append(h_z)

    h = LCUHamiltonian(
        paulis=tuple(paulis),
        initial=initial,
        problem=problem,
        schedule=Schedule.linear(),
        domain=tuple(lam_range),
        name=f"tfim_{n_qubits}",
    )
    gap_formula = None
    if h_z == 0.0 and J != 0.0:
        gap_formula = lambda lam: _free_fermion_gap(n_qubits, J, lam)  # noqa: E731
    return ModelSpec(
        name="tfim",
        hamiltonian=h,
        level=0,
        gap_formula=gap_formula,
        params={"n_qubits": n_qubits, "J": J, "h_z": h_z, "lam_range": list(lam_range)},
        description="Open transverse-field Ising chain",
    ).verify()


def _grover_pauli_expansion(n_qubits: int, marked: int):
    """Pauli coefficients of H_i = I - |s><s| and H_p = |s><s| - |m><m|."""
    scale = 2.0 ** -n_qubits
    marked_bits = [(marked >> (n_qubits - 1 - j)) & 1 for j in range(n_qubits)]
    paulis = [PauliString('I' * n_qubits)]
    initial = [1.0 - scale]
    problem = [0.0]
    for support in itertools.product((0, 1), repeat=n_qubits):
        if not any(support):
            continue
        paulis.append(PauliString(''.join('X' if s else 'I' for s in support)))
        initial.append(-scale)
        problem.append(scale)
    for support in itertools.product((0, 1), repeat=n_qubits):
        if not any(support):
            continue
        sign = (-1) ** sum(b for s, b in zip(support, marked_bits) if s)
        paulis.append(PauliString(''.join('Z' if s else 'I' for s in support)))
        initial.append(0.0)
        problem.append(-scale * sign)
    return tuple(paulis), np.asarray(initial), np.asarray(problem)


def grover(
    n_qubits: int,
    marked: int = 0,
    lam_range: Tuple[float, float] = (0.05, 0.95),
) -> ModelSpec:
    """
    Unstructured search H(λ) = (1-λ)(I - |s><s|) + λ(I - |m><m|).

    The dense projectors are passed directly; the Pauli expansion
    (2^(n+1) - 1 strings) supplies ℓ and ‖β‖₁ for the cost model.
    """
    if not 2 <= n_qubits <= 6:
        raise DomainError(f"grover supports 2..6 qubits, got {n_qubits}")
    dim = 2 ** n_qubits
    if not 0 <= marked < dim:
        raise DomainError(f"Marked index {marked} outside 0..{dim - 1}")

    uniform = np.full(dim, dim ** -0.5, dtype=complex)
    proj_s = np.outer(uniform, uniform.conj())
    proj_m = np.zeros((dim, dim), dtype=complex)
    proj_m[marked, marked] = 1.0

    paulis, initial, problem = _grover_pauli_expansion(n_qubits, marked)
    h = LCUHamiltonian(
        paulis=paulis,
        initial=initial,
        problem=problem,
        schedule=Schedule.linear(),
        domain=tuple(lam_range),
        dense_initial=np.eye(dim) - proj_s,
        dense_problem=proj_s - proj_m,
        name=f"grover_{n_qubits}",
    )

    def gap(lam):
        return float(np.sqrt(1.0 - 4.0 * lam * (1.0 - lam) * (1.0 - 1.0 / dim)))

    return ModelSpec(
        name="grover",
        hamiltonian=h,
        level=0,
        gap_formula=gap,
        annotations={"min_gap": float(dim ** -0.5)},
        params={"n_qubits": n_qubits, "marked": marked, "lam_range": list(lam_range)},
        description="Unstructured search with a single marked state",
    ).verify()


MODELS: Dict[str, Callable[..., ModelSpec]] = {
    "landau_zener": landau_zener,
    "tfim": tfim,
    "grover": grover,
}


def get_model(name: str, **params) -> ModelSpec:
    """
    Build a registered model by name.

    Raises
    ------
    ConfigError
        Unknown name (the message lists the registry) or bad parameters.
    """
    if name not in MODELS:
        raise ConfigError(f"Unknown model '{name}'. Available models: {', '.join(sorted(MODELS))}")
    if 'lam_range' in params and params['lam_range'] is not None:
        params['lam_range'] = tuple(params['lam_range'])
    try:
        return MODELS[name](**params)
    except TypeError as e:
        raise ConfigError(f"Bad parameters for model '{name}': {e}") from e


def gap_integral(path: SpectralPath, n: int) -> float:
    """∫ ω_n(λ)^-3 dλ over the tracked path."""
    gaps = path.gaps(n)
    return float(simpson(gaps ** -3.0, x=path.grid))
