"""Decoding likelihood, decoded-frame sampling, and the transmission-error functional.

The density of decoding g' from a carrier prepared at g depends only on the
relative hyperspherical angle theta of g^{-1} g'.  Two evaluation paths
exist: the O(J) character sum (primary, uniformly stable) and a closed-form
product (cross-check only; it has removable 0/0 points at theta = 0, pi and
where cos 2*theta hits cos(pi/(n+1))).  Everything downstream integrates in
theta against the class-function Haar weight (2/pi) sin^2(theta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .encoding import EncodingSpec
from .su2 import HaarGrid, Su2Element, quat_compose, quat_from_angles, relative_angle

__all__ = [
    "ResolutionError",
    "LikelihoodModel",
    "build_model",
    "overlap",
    "overlap_closed_form",
    "likelihood_density",
    "sample_estimate",
    "transmission_error",
    "average_error",
    "required_theta_panels",
    "density_grid",
]

_SIN_WINDOW = 1e-8


class ResolutionError(ValueError):
    """A quadrature grid or table is too coarse for the requested spin count."""


def overlap(spec: EncodingSpec, theta):
    """Inner product of the rotated encoding state with the measurement seed.

    Character sum over the coefficient sectors,
    sum_j A_j sin((2j+1) theta)/sin(theta), with the sine ratio replaced by
    its limit (2j+1) at theta -> 0 and (-1)^(2j) (2j+1) at theta -> pi
    whenever |sin theta| < 1e-8.  Accepts a scalar or array `theta`.
    """
    theta_arr = np.atleast_1d(np.asarray(theta, dtype=float))
    two_j = spec.doubled_spins
    orders = (two_j + 1).astype(float)[:, None]

    sin_theta = np.sin(theta_arr)
    small = np.abs(sin_theta) < _SIN_WINDOW
    safe = np.where(small, 1.0, sin_theta)
    chars = np.sin(orders * theta_arr[None, :]) / safe[None, :]
    if small.any():
        at_zero = theta_arr < math.pi / 2
        limits = np.where(at_zero[None, :], orders, ((-1.0) ** two_j)[:, None] * orders)
        chars = np.where(small[None, :], limits, chars)

    values = spec.coeffs @ chars
    return float(values[0]) if np.isscalar(theta) or np.ndim(theta) == 0 else values


def overlap_closed_form(spec: EncodingSpec, theta):
    """Closed-form overlap; valid for the default (closed-form) coefficients.

    Kept as a cross-check of the character sum; do not evaluate within
    ~1e-4 of its removable singularities.
    """
    theta = np.asarray(theta, dtype=float)
    n = spec.n_sectors
    j_sum = (spec.n_spins + spec.two_j0) // 2  # J + j0, an integer for both parities
    gap = math.pi / (n + 1)
    return (
        math.sqrt(2.0 / (n + 1))
        * np.sin(j_sum * theta)
        / np.sin(theta)
        * math.sin(gap)
        * np.cos((n + 1) * theta)
        / (np.cos(2.0 * theta) - math.cos(gap))
    )


@dataclass(frozen=True)
class LikelihoodModel:
    """Encoding spec plus the tabulated CDF of the relative-angle marginal."""

    spec: EncodingSpec
    theta_grid: np.ndarray
    cdf_table: np.ndarray
    resolution: int

    def __post_init__(self):
        cdf = np.asarray(self.cdf_table, dtype=float)
        if cdf[0] != 0.0 or np.any(np.diff(cdf) < 0):
            raise ValueError("cdf_table must be nondecreasing and start at 0")
        if abs(cdf[-1] - 1.0) > 1e-6:
            raise ValueError(f"cdf_table ends at {cdf[-1]}, not 1 within 1e-6")
        for name in ("theta_grid", "cdf_table"):
            arr = np.asarray(getattr(self, name), dtype=float).copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def build_model(spec: EncodingSpec, resolution: int | None = None) -> LikelihoodModel:
    """Tabulate the theta-marginal (2/pi) p(theta) sin^2(theta) and its CDF.

    Default table size max(4096, 32 N) resolves the O(1/J)-wide density peak.
    """
    if resolution is None:
        resolution = max(4096, 32 * spec.n_spins)
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    theta = np.linspace(0.0, math.pi, resolution)
    marginal = (2.0 / math.pi) * overlap(spec, theta) ** 2 * np.sin(theta) ** 2
    cdf = np.concatenate(
        [[0.0], np.cumsum(0.5 * (marginal[1:] + marginal[:-1]) * np.diff(theta))]
    )
    total = cdf[-1]
    if abs(total - 1.0) > 1e-6:
        raise ResolutionError(
            f"tabulated marginal integrates to {total}; resolution {resolution} "
            f"is too coarse for N={spec.n_spins}"
        )
    return LikelihoodModel(
        spec=spec, theta_grid=theta, cdf_table=cdf / total, resolution=resolution
    )


def likelihood_density(model: LikelihoodModel, theta):
    """Decoding density with respect to the normalized Haar measure: overlap squared."""
    value = overlap(model.spec, theta)
    return value * value


def _theta_from_cdf(model: LikelihoodModel, u):
    """Monotone linear interpolation of the inverse tabulated CDF."""
    cdf = model.cdf_table
    grid = model.theta_grid
    idx = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, len(grid) - 2)
    gap = cdf[idx + 1] - cdf[idx]
    frac = np.where(gap > 0, (u - cdf[idx]) / np.where(gap > 0, gap, 1.0), 0.0)
    return grid[idx] + frac * (grid[idx + 1] - grid[idx])


def sample_estimate(
    model: LikelihoodModel, g_true: Su2Element, rng: np.random.Generator
) -> Su2Element:
    """Draw one decoded element given the true frame.

    Returns g_true * h where the relative angle of h follows the tabulated
    marginal and the remaining two angles carry their Haar sphere factors.
    Consumes exactly three uniforms in the order (theta, psi, phi).
    """
    theta = float(_theta_from_cdf(model, rng.random()))
    psi = math.acos(1.0 - 2.0 * rng.random())
    phi = 2.0 * math.pi * rng.random()
    return Su2Element(quat_compose(g_true.x, quat_from_angles(theta, psi, phi)))


def transmission_error(g_est: Su2Element, g_true: Su2Element) -> float:
    """Summed squared deviation of the three decoded frame axes, in [0, 8].

    Evaluated as 8 sin^2 of the relative angle, which equals
    6 - 2 tr[R(g_true)^T R(g_est)].
    """
    return 8.0 * math.sin(relative_angle(g_est, g_true)) ** 2


def required_theta_panels(n_spins: int, *, squared: bool = False) -> int:
    """Panel count keeping >= 4 panels per oscillation of p (or p^2)."""
    return (8 if squared else 4) * n_spins


def density_grid(
    n_spins: int, *, squared: bool = False, order: int = 8,
    psi_panels: int = 2, phi_panels: int = 2,
) -> HaarGrid:
    """A grid resolving the likelihood density (or its square) at this N.

    The sphere angles get coarse panels by default since all density
    integrands here are functions of theta alone or smooth over the sphere.
    """
    panels = max(64, required_theta_panels(n_spins, squared=squared))
    return HaarGrid(
        theta_panels=panels, psi_panels=psi_panels, phi_panels=phi_panels, order=order
    )


def average_error(spec: EncodingSpec, grid: HaarGrid) -> float:
    """Mean transmission error (2/pi) * int p(theta) 8 sin^2(theta) sin^2(theta) dtheta."""
    needed = required_theta_panels(spec.n_spins)
    if grid.theta_panels < needed:
        raise ResolutionError(
            f"grid has {grid.theta_panels} theta panels; N={spec.n_spins} "
            f"needs at least {needed}"
        )
    theta = grid.theta_nodes
    density = overlap(spec, theta) ** 2
    return float((density * 8.0 * np.sin(theta) ** 2) @ grid.theta_weights)
