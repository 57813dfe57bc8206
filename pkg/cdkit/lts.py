"""
Lie-Trotter-Suzuki product formulas over the discrete AGP.

A GateSequence is stored compactly as its base blocks (one symmetric
first-order step each) plus the shared term table (τ, b); ``factors()``
expands it into the literal list of HEvolution / BRotation exponentials.

Factor conventions (application order, first factor acts first):
    HEvolution(λ, d)  = exp(-i H(λ) d)
    BRotation(λ, θ)   = exp(-i θ ∂_λH(λ))
A term exp(-i b ∂H_τ δ/2) with ∂H_τ = e^{-iHτ}∂H e^{iHτ} is applied as
HEvolution(λ, -τ), BRotation(λ, bδ/2), HEvolution(λ, +τ).
"""

import logging
from dataclasses import dataclass
from typing import Iterator, List, Sequence, Tuple, Union

import numpy as np

from cdkit.errors import DomainError
from cdkit.operators import LCUHamiltonian, expm_hermitian
from cdkit.quadrature import QuadratureScheme

logger = logging.getLogger(__name__)

# Upper bound on complex entries held in one batched stack
_STACK_ENTRIES = 2 ** 22

TermSet = Union[QuadratureScheme, Tuple[Sequence[float], Sequence[float]]]


def s_coefficient(k: int) -> float:
    """s_k = (4 - 4^{1/(2k+1)})^{-1}."""
    if int(k) != k or k < 1:
        raise DomainError(f"k must be a positive integer, got {k}")
    return 1.0 / (4.0 - 4.0 ** (1.0 / (2 * k + 1)))


@dataclass(frozen=True)
class LTSConfig:
    """Order k and segment count r."""

    k: int
    r: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise DomainError(f"k must be a positive integer, got {self.k}")
        if int(self.r) != self.r or self.r < 1:
            raise DomainError(f"r must be a positive integer, got {self.r}")

    @property
    def s_table(self) -> Tuple[float, ...]:
        """s_1 .. s_{k-1}, the coefficients used by the recursion."""
        return tuple(s_coefficient(j) for j in range(1, self.k))

    @property
    def blocks_per_segment(self) -> int:
        return 5 ** (self.k - 1)


@dataclass(frozen=True)
class HEvolution:
    lam: float
    duration: float


@dataclass(frozen=True)
class BRotation:
    lam: float
    angle: float


Factor = Union[HEvolution, BRotation]


def first_order_blocks(k: int, lam_start: float, step: float) -> List[Tuple[float, float]]:
    """
    Suzuki recursion: the (start, step) pairs of the 5^{k-1} symmetric
    first-order blocks making up an order-k step over [lam_start, lam_start+step].
    """
    if k == 1:
        return [(lam_start, step)]
    s = s_coefficient(k - 1)
    blocks = []
    lam = lam_start
    for frac in (s, s, 1.0 - 4.0 * s, s, s):
        sub = frac * step
        blocks.extend(first_order_blocks(k - 1, lam, sub))
        lam += sub
    return blocks


def term_arrays(terms: TermSet) -> Tuple[np.ndarray, np.ndarray]:
    """(τ, b) arrays in increasing τ from a scheme or an explicit pair."""
    if isinstance(terms, QuadratureScheme):
        return terms.coefficients()
    taus, bs = (np.asarray(x, dtype=float).reshape(-1) for x in terms)
    if taus.shape != bs.shape or len(taus) == 0:
        raise DomainError("Term set needs matching non-empty τ and b arrays")
    return taus, bs


# =============================================================================
# GATE SEQUENCES
# =============================================================================

@dataclass(frozen=True, eq=False)
class GateSequence:
    """
    Ordered product of time-independent exponentials.

    ``blocks[j] = (λ_start, step)``; every block evaluates H and ∂H at its
    midpoint λ_start + step/2.
    """

    taus: np.ndarray
    bs: np.ndarray
    blocks: np.ndarray
    k: int = 1
    r: int = 1
    cancelled: bool = True

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def n_terms(self) -> int:
        return len(self.taus)

    @property
    def midpoints(self) -> np.ndarray:
        return self.blocks[:, 0] + 0.5 * self.blocks[:, 1]

    @property
    def n_brotations(self) -> int:
        return 2 * self.n_terms * self.n_blocks

    @property
    def n_hevolutions(self) -> int:
        per_block = 2 * self.n_terms if self.cancelled else 4 * self.n_terms
        return per_block * self.n_blocks

    @property
    def n_factors(self) -> int:
        return self.n_brotations + self.n_hevolutions

    def counts(self) -> dict:
        return {"HEvolution": self.n_hevolutions, "BRotation": self.n_brotations}

    def block_factors(self, j: int) -> List[Factor]:
        lam_start, step = self.blocks[j]
        lam = float(lam_start + 0.5 * step)
        angles = self.bs * (0.5 * step)
        order = list(range(self.n_terms)) + list(range(self.n_terms - 1, -1, -1))
        out: List[Factor] = []
        if not self.cancelled:
            for i in order:
                out += [HEvolution(lam, -self.taus[i]), BRotation(lam, angles[i]), HEvolution(lam, self.taus[i])]
            return out
        prev = None
        for i in order:
            duration = -self.taus[i] if prev is None else self.taus[prev] - self.taus[i]
            if prev != i:
                out.append(HEvolution(lam, duration))
            out.append(BRotation(lam, angles[i]))
            prev = i
        out.append(HEvolution(lam, self.taus[prev]))
        return out

    def factors(self) -> Iterator[Factor]:
        for j in range(self.n_blocks):
            yield from self.block_factors(j)

    def uncancelled(self) -> "GateSequence":
        return GateSequence(self.taus, self.bs, self.blocks, self.k, self.r, cancelled=False)


def first_order_segment(terms: TermSet, lam0: float, dlam: float, cancel: bool = False) -> GateSequence:
    """Symmetric forward-then-reverse product over the terms, midpoint λ₀ + δλ/2."""
    taus, bs = term_arrays(terms)
    return GateSequence(taus, bs, np.array([[lam0, dlam]], dtype=float), k=1, r=1, cancelled=cancel)


def build_sequence(terms: TermSet, lam_i: float, lam_f: float, cfg: LTSConfig, cancel: bool = True) -> GateSequence:
    """Order-k formula on each of r uniform segments of [λ_i, λ_f]."""
    taus, bs = term_arrays(terms)
    dlam = (lam_f - lam_i) / cfg.r
    blocks = []
    for seg in range(cfg.r):
        blocks.extend(first_order_blocks(cfg.k, lam_i + seg * dlam, dlam))
    return GateSequence(taus, bs, np.asarray(blocks, dtype=float), k=cfg.k, r=cfg.r, cancelled=cancel)


# =============================================================================
# EVALUATION
# =============================================================================

def dense_product(seq: GateSequence, h: LCUHamiltonian) -> np.ndarray:
    """Literal product of every factor, one exponential at a time."""
    cache = {}

    def generator(factor):
        key = (type(factor).__name__, factor.lam)
        if key not in cache:
            if isinstance(factor, HEvolution):
                cache[key] = np.linalg.eigh(h.to_dense(factor.lam))
            else:
                cache[key] = np.linalg.eigh(h.derivative(factor.lam, 1))
        return cache[key]

    u = np.eye(h.dim, dtype=complex)
    for factor in seq.factors():
        energies, vectors = generator(factor)
        t = factor.duration if isinstance(factor, HEvolution) else factor.angle
        u = (vectors * np.exp(-1j * energies * t)) @ (vectors.conj().T @ u)
    return u


def ordered_product(stack: np.ndarray) -> np.ndarray:
    """stack[-1] @ ... @ stack[0] by pairwise reduction."""
    stack = np.asarray(stack)
    while len(stack) > 1:
        if len(stack) % 2:
            stack = np.concatenate([stack, np.eye(stack.shape[-1], dtype=stack.dtype)[None]])
        stack = stack[1::2] @ stack[0::2]
    return stack[0]


def _block_unitary(energies, vectors, dh, taus, angles) -> np.ndarray:
    """One symmetric block in the computational basis, batched over terms."""
    dim = len(energies)
    # ∂H in the H eigenbasis, diagonalized once per block
    g = vectors.conj().T @ dh @ vectors
    mu, w = np.linalg.eigh(g)
    chunk = max(1, _STACK_ENTRIES // (dim * dim))
    forward = np.eye(dim, dtype=complex)
    reverse = np.eye(dim, dtype=complex)
    for start in range(0, len(taus), chunk):
        t = taus[start:start + chunk]
        theta = angles[start:start + chunk]
        x = np.exp(-1j * np.outer(t, energies))[:, :, None] * w[None]
        phase = np.exp(-1j * np.outer(theta, mu))
        stack = (x * phase[:, None, :]) @ np.conj(np.swapaxes(x, 1, 2))
        forward = ordered_product(stack) @ forward
        reverse = reverse @ ordered_product(stack[::-1])
    return vectors @ (reverse @ forward) @ vectors.conj().T


def sequence_unitary(seq: GateSequence, h: LCUHamiltonian, progress=None) -> np.ndarray:
    """Product of the sequence evaluated block by block in the eigenbasis."""
    u = np.eye(h.dim, dtype=complex)
    for j, (lam_start, step) in enumerate(seq.blocks):
        lam = float(lam_start + 0.5 * step)
        energies, vectors = np.linalg.eigh(h.to_dense(lam))
        block = _block_unitary(energies, vectors, h.derivative(lam, 1), seq.taus, seq.bs * (0.5 * step))
        u = block @ u
        if progress is not None:
            progress.update(1)
    return u


def exponential_identity_error(o: np.ndarray, u: np.ndarray) -> float:
    """max |exp(-i U O U†) - U exp(-i O) U†| for Hermitian O and unitary U."""
    lhs = expm_hermitian(u @ o @ u.conj().T)
    rhs = u @ expm_hermitian(o) @ u.conj().T
    return float(np.max(np.abs(lhs - rhs)))


def segment_count_formula(M: int, q: int, k: int, r: int) -> int:
    """BRotation count 2·2M(q+1)·5^{k-1}·r."""
    return 2 * 2 * M * (q + 1) * 5 ** (k - 1) * r

