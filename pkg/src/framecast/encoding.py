"""Optimal encoding data: sector coefficients, Toeplitz eigensystem, multiplicities.

Spins are carried as doubled integers (2j) so half-integer bookkeeping stays
exact.  For N spins the total-spin sectors run over 2j = two_j0, two_j0+2,
..., N, with two_j0 = 0 (N even) or 1 (N odd); the top sector 2j = N carries
no coefficient.  The coefficient vector is the top eigenvector of an n x n
tridiagonal matrix with unit off-diagonals, n = (N - two_j0)/2, whose corner
entry is 1 for odd N and 0 for even N; the closed form below uses the
unit-corner matrix for both parities (exact for odd N, an approximation for
even N that `toeplitz_numeric` can quantify).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.linalg import eigh_tridiagonal

__all__ = [
    "EncodingSpec",
    "Eigenpair",
    "encoding_spec",
    "toeplitz_top_eigenpair",
    "toeplitz_numeric",
    "multiplicity",
    "b_norm_squared",
]


@dataclass(frozen=True)
class Eigenpair:
    value: float
    vector: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=float)
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"eigenvector norm {norm} not 1 within 1e-12")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "vector", v)


@dataclass(frozen=True)
class EncodingSpec:
    """Spin count plus the per-sector weights of the encoding state."""

    n_spins: int
    two_j_max: int
    two_j0: int
    n_sectors: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if len(c) != self.n_sectors:
            raise ValueError("coefficient count does not match sector count")
        if not np.all(c > 0):
            raise ValueError("coefficients must be strictly positive")
        ssq = float(c @ c)
        if abs(ssq - 1.0) > 1e-12:
            raise ValueError(f"coefficient sum of squares {ssq} not 1 within 1e-12")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def doubled_spins(self) -> np.ndarray:
        """Doubled spins 2j carrying a coefficient (the top sector is excluded)."""
        return np.arange(self.two_j0, self.two_j_max - 1, 2)


def encoding_spec(n_spins: int, *, exact_even: bool = False) -> EncodingSpec:
    """Coefficients maximizing the transmission quality for `n_spins` spins.

    Default is the closed form sqrt(2/(n+1)) * sin(l*pi/(n+1)), l = 1..n.
    With ``exact_even=True`` and even N the zero-corner matrix is eigensolved
    numerically instead, removing the unit-corner approximation.
    """
    if n_spins < 2:
        raise ValueError("n_spins must be at least 2 (the coefficient list is empty below that)")
    two_j0 = n_spins % 2
    n = (n_spins - two_j0) // 2
    if exact_even and n_spins % 2 == 0:
        coeffs = toeplitz_numeric(n, zeta=0).vector
    else:
        coeffs = toeplitz_top_eigenpair(n).vector
    return EncodingSpec(
        n_spins=n_spins,
        two_j_max=n_spins,
        two_j0=two_j0,
        n_sectors=n,
        coeffs=coeffs,
    )


def toeplitz_top_eigenpair(n: int) -> Eigenpair:
    """Top eigenpair of the n x n tridiagonal matrix of ones, in closed form.

    value = 1 + 2 cos(pi/(n+1)); vector_l = sqrt(2/(n+1)) sin(l*pi/(n+1)).
    """
    if n < 1:
        raise ValueError("matrix size n must be positive")
    l = np.arange(1, n + 1)
    vector = np.sqrt(2.0 / (n + 1)) * np.sin(l * np.pi / (n + 1))
    return Eigenpair(value=1.0 + 2.0 * math.cos(math.pi / (n + 1)), vector=vector)


def toeplitz_numeric(n: int, zeta: int) -> Eigenpair:
    """Numerically eigensolved top pair of the tridiagonal matrix.

    Diagonal is all ones except the (1,1) entry, which is `zeta` (0 or 1);
    off-diagonals are ones.  The eigenvector sign is fixed so that all
    components are nonnegative.
    """
    if n < 1:
        raise ValueError("matrix size n must be positive")
    if zeta not in (0, 1):
        raise ValueError("zeta must be 0 or 1")
    diag = np.ones(n)
    diag[0] = zeta
    if n == 1:
        return Eigenpair(value=float(zeta), vector=np.array([1.0]))
    off = np.ones(n - 1)
    values, vectors = eigh_tridiagonal(diag, off, select="i", select_range=(n - 1, n - 1))
    v = vectors[:, 0]
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return Eigenpair(value=float(values[0]), vector=v / np.linalg.norm(v))


def multiplicity(n_spins: int, twoj: int) -> int:
    """Number of equivalent spin-j blocks in the N-fold spin-1/2 product.

    Exact integer (2j+1)/(J+j+1) * C(2J, J+j) evaluated with big-integer
    arithmetic; `twoj` must share the parity of `n_spins` and lie in
    [0, n_spins].
    """
    if n_spins < 1:
        raise ValueError("n_spins must be positive")
    if twoj < 0 or twoj > n_spins or (twoj - n_spins) % 2 != 0:
        raise ValueError(f"doubled spin {twoj} invalid for {n_spins} spins")
    j_plus = (n_spins + twoj) // 2
    numerator = (twoj + 1) * math.comb(n_spins, j_plus)
    quotient, remainder = divmod(numerator, j_plus + 1)
    if remainder:
        raise AssertionError("multiplicity did not divide exactly")
    return quotient


def b_norm_squared(n_spins: int) -> int:
    """Squared norm of the measurement-seed vector: sum of (2j+1)^2 over used sectors.

    Evaluated through the cubic closed form with exact rationals; always an
    integer.
    """
    if n_spins < 2:
        raise ValueError("n_spins must be at least 2")
    two_j0 = n_spins % 2
    j0 = Fraction(two_j0, 2)
    big_j = Fraction(n_spins, 2)
    total = (
        4 * (big_j - 1 + 2 * j0) * (big_j - j0) * (2 * big_j - 1 - 2 * j0) / 6
        + 4 * (big_j - j0) * (j0 + big_j - 1) / 2
        + (big_j - j0)
    )
    if total.denominator != 1:
        raise AssertionError("closed form did not reduce to an integer")
    return int(total)
