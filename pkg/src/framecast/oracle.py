"""Brute-force ground truth in the explicit 2^N spin space, for N <= 6.

The N-fold spin-1/2 space is decomposed by coupling one spin at a time,
left to right; equivalent spin-j blocks are labeled in lexicographic order
of their intermediate-spin paths.  Coupling coefficients for attaching a
single spin 1/2 are produced by the standard recursion in exact rational
arithmetic (as signed square roots of fractions) and converted to floats
only when a basis column is assembled, so the resulting basis is orthonormal
to machine accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache, reduce

import numpy as np

from .encoding import encoding_spec, multiplicity
from .su2 import Su2Element, su2_compose, su2_inverse

__all__ = [
    "SpinBlock",
    "CouplingTree",
    "coupled_basis",
    "build_state_vectors",
    "brute_overlap",
    "block_character",
]

_MAX_SPINS = 6


@dataclass(frozen=True)
class SpinBlock:
    """One irreducible block: doubled spin, copy index, coupling path, basis columns.

    `basis` has shape (2^N, 2j+1); column c holds |j alpha, m> for
    m = j - c (i.e. columns run from m = j down to m = -j) expressed in the
    product basis, whose index bits read spin-up as 0 with the leftmost spin
    in the most significant position.
    """

    two_j: int
    alpha: int
    path: tuple[int, ...]
    basis: np.ndarray

    def column_for_twom(self, twom: int) -> np.ndarray:
        return self.basis[:, (self.two_j - twom) // 2]


@dataclass(frozen=True)
class CouplingTree:
    n_spins: int
    blocks: tuple[SpinBlock, ...]

    def sector(self, two_j: int) -> tuple[SpinBlock, ...]:
        return tuple(b for b in self.blocks if b.two_j == two_j)


def _attach_coefficients(two_j1: int, two_j: int, twom: int):
    """Coupling coefficients for (j1) x (1/2) -> j at child projection m.

    Returns [(twom1, spin_bit, coefficient)] with spin_bit 0 for the added
    spin up (ms = +1/2) and 1 for down; coefficients are signed square roots
    of exact fractions.
    """
    out = []
    denom = 2 * (two_j1 + 1)
    if two_j == two_j1 + 1:
        up_sq = Fraction(two_j1 + twom + 1, denom)
        down_sq = Fraction(two_j1 - twom + 1, denom)
        up_sign = 1.0
    elif two_j == two_j1 - 1:
        up_sq = Fraction(two_j1 - twom + 1, denom)
        down_sq = Fraction(two_j1 + twom + 1, denom)
        up_sign = -1.0
    else:
        raise ValueError("child spin must differ from parent by 1/2")
    if abs(twom - 1) <= two_j1 and up_sq:
        out.append((twom - 1, 0, up_sign * math.sqrt(float(up_sq))))
    if abs(twom + 1) <= two_j1 and down_sq:
        out.append((twom + 1, 1, math.sqrt(float(down_sq))))
    return out


def coupled_basis(n_spins: int) -> CouplingTree:
    """Decompose the 2^n_spins product space into labeled irreducible blocks."""
    if not 2 <= n_spins <= _MAX_SPINS:
        raise ValueError(f"n_spins must lie in [2, {_MAX_SPINS}]")

    # (path, basis) pairs; start from the single leftmost spin
    partial = [((1,), np.eye(2))]
    for step in range(1, n_spins):
        dim = 2 ** (step + 1)
        grown = []
        for path, basis in partial:
            two_j1 = path[-1]
            for two_j in (two_j1 + 1, two_j1 - 1):
                if two_j < 0:
                    continue
                cols = []
                for twom in range(two_j, -two_j - 2, -2):
                    col = np.zeros(dim)
                    for twom1, bit, coeff in _attach_coefficients(two_j1, two_j, twom):
                        parent = basis[:, (two_j1 - twom1) // 2]
                        col[bit::2] += coeff * parent
                    cols.append(col)
                grown.append((path + (two_j,), np.column_stack(cols)))
        partial = grown

    ordered = sorted(partial, key=lambda item: (item[0][-1], item[0]))
    blocks = []
    counts: dict[int, int] = {}
    for path, basis in ordered:
        two_j = path[-1]
        counts[two_j] = counts.get(two_j, 0) + 1
        blocks.append(SpinBlock(two_j=two_j, alpha=counts[two_j], path=path, basis=basis))
    for two_j, count in counts.items():
        if count != multiplicity(n_spins, two_j):
            raise AssertionError(f"block count {count} at 2j={two_j} disagrees with the multiplicity formula")
    return CouplingTree(n_spins=n_spins, blocks=tuple(blocks))


@lru_cache(maxsize=None)
def _cached_tree(n_spins: int) -> CouplingTree:
    return coupled_basis(n_spins)


@lru_cache(maxsize=None)
def _cached_vectors(n_spins: int):
    tree = _cached_tree(n_spins)
    spec = encoding_spec(n_spins)
    dim = 2 ** n_spins
    a_vec = np.zeros(dim)
    b_vec = np.zeros(dim)
    for i, two_j in enumerate(spec.doubled_spins):
        sector = tree.sector(int(two_j))
        weight = spec.coeffs[i]
        root_dim = math.sqrt(two_j + 1.0)
        for alpha in range(1, two_j + 2):  # the first 2j+1 copies
            twom = 2 * alpha - two_j - 2   # injective projection per copy
            col = sector[alpha - 1].column_for_twom(twom)
            a_vec += (weight / root_dim) * col
            b_vec += root_dim * col
    return a_vec.astype(complex), b_vec.astype(complex)


def build_state_vectors(n_spins: int):
    """Explicit encoding state and measurement seed in the product basis.

    Within each sector j < J the first 2j+1 copies are populated, copy alpha
    at projection m = alpha - j - 1, weighted A_j/sqrt(2j+1) for the encoding
    state and sqrt(2j+1) for the seed; the top sector stays empty.
    """
    if not 2 <= n_spins <= _MAX_SPINS:
        raise ValueError(f"n_spins must lie in [2, {_MAX_SPINS}]")
    a_vec, b_vec = _cached_vectors(n_spins)
    return a_vec.copy(), b_vec.copy()


def _tensor_power(matrix: np.ndarray, n: int) -> np.ndarray:
    return reduce(np.kron, [matrix] * n)


def brute_overlap(n_spins: int, g: Su2Element, g_prime: Su2Element) -> float:
    """<encoding(g)|seed(g')> computed directly in the 2^N product space.

    Applies the N-fold tensor power of the 2x2 matrix of g^{-1} g' to the
    seed vector.  The result must be real; an imaginary part above 1e-10
    indicates a broken basis and raises.
    """
    a_vec, b_vec = _cached_vectors(n_spins)
    rel = su2_compose(su2_inverse(g), g_prime)
    u_full = _tensor_power(rel.matrix(), n_spins)
    value = complex(a_vec.conj() @ (u_full @ b_vec))
    if abs(value.imag) > 1e-10:
        raise AssertionError(f"overlap has imaginary part {value.imag}")
    return value.real


def block_character(tree: CouplingTree, two_j: int, g: Su2Element) -> complex:
    """Trace of the spin-j block of the N-fold rotation, via one block's basis."""
    block = tree.sector(two_j)[0]
    u_full = _tensor_power(g.matrix(), tree.n_spins)
    return complex(np.trace(block.basis.conj().T @ (u_full @ block.basis)))
