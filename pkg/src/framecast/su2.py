"""Exact SU(2) arithmetic, the covering map onto SO(3), and Haar-measure quadrature.

Group elements are stored as unit 4-vectors x = (x1, x2, x3, x4) tied to the
hyperspherical angles (theta, psi, phi) by

    x1 = cos(theta)
    x2 = sin(theta) cos(psi)
    x3 = sin(theta) sin(psi) cos(phi)
    x4 = sin(theta) sin(psi) sin(phi)

with theta, psi in [0, pi] and phi in [0, 2*pi).  The associated 2x2
special-unitary matrix is

    [[ x1 + i*x2,  x3 + i*x4],
     [-x3 + i*x4,  x1 - i*x2]]

so the 4-vector composes under the Hamilton quaternion product.  The
normalized Haar measure factorizes over the angles as

    (2/pi) sin^2(theta) dtheta  x  (1/2) sin(psi) dpsi  x  dphi/(2*pi),

which is what :class:`HaarGrid` discretizes.  The rotation angle of the
image rotation R(g) is twice the hyperspherical angle theta_g.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Su2Element",
    "So3Rotation",
    "HaarGrid",
    "su2_from_angles",
    "su2_from_axis_angle",
    "su2_identity",
    "su2_compose",
    "su2_inverse",
    "su2_to_rotation",
    "relative_angle",
    "haar_integrate",
    "haar_integrate_class",
    "haar_sample",
    "quat_compose",
    "quat_from_angles",
    "quat_rotation_matrices",
    "quat_relative_angle",
    "rotation_angle",
    "theta_from_uniform",
]

_UNIT_TOL = 1e-6


# ---------------------------------------------------------------------------
# array kernels (broadcastable over leading axes, last axis = 4)
# ---------------------------------------------------------------------------

def quat_compose(a, b):
    """Hamilton product of quaternion arrays with shape (..., 4)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    w1, i1, j1, k1 = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    w2, i2, j2, k2 = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            w1 * w2 - i1 * i2 - j1 * j2 - k1 * k2,
            w1 * i2 + i1 * w2 + j1 * k2 - k1 * j2,
            w1 * j2 - i1 * k2 + j1 * w2 + k1 * i2,
            w1 * k2 + i1 * j2 - j1 * i2 + k1 * w2,
        ],
        axis=-1,
    )


def quat_from_angles(theta, psi, phi):
    """Unit 4-vectors from hyperspherical angle arrays (broadcast together)."""
    theta, psi, phi = np.broadcast_arrays(
        np.asarray(theta, float), np.asarray(psi, float), np.asarray(phi, float)
    )
    st = np.sin(theta)
    return np.stack(
        [
            np.cos(theta),
            st * np.cos(psi),
            st * np.sin(psi) * np.cos(phi),
            st * np.sin(psi) * np.sin(phi),
        ],
        axis=-1,
    )


def quat_rotation_matrices(q):
    """Rotation matrices (..., 3, 3) realizing conjugation of the Pauli basis."""
    q = np.asarray(q, dtype=float)
    x1, x2, x3, x4 = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    m = np.empty(q.shape[:-1] + (3, 3))
    m[..., 0, 0] = 1.0 - 2.0 * (x2 * x2 + x3 * x3)
    m[..., 0, 1] = 2.0 * (x3 * x4 + x1 * x2)
    m[..., 0, 2] = 2.0 * (x2 * x4 - x1 * x3)
    m[..., 1, 0] = 2.0 * (x3 * x4 - x1 * x2)
    m[..., 1, 1] = 1.0 - 2.0 * (x2 * x2 + x4 * x4)
    m[..., 1, 2] = 2.0 * (x2 * x3 + x1 * x4)
    m[..., 2, 0] = 2.0 * (x2 * x4 + x1 * x3)
    m[..., 2, 1] = 2.0 * (x2 * x3 - x1 * x4)
    m[..., 2, 2] = 1.0 - 2.0 * (x3 * x3 + x4 * x4)
    return m


def quat_relative_angle(a, b):
    """Hyperspherical angle of a^{-1} b: arccos of the 4-vector inner product."""
    dot = np.sum(np.asarray(a, float) * np.asarray(b, float), axis=-1)
    return np.arccos(np.clip(dot, -1.0, 1.0))


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Su2Element:
    """Group element as a unit 4-vector; renormalized on construction."""

    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(4)
        norm = math.sqrt(float(x @ x))
        if not abs(norm - 1.0) <= _UNIT_TOL:  # also rejects NaN/inf entries
            raise ValueError(f"4-vector norm {norm} too far from 1")
        x = x / norm
        x.flags.writeable = False
        object.__setattr__(self, "x", x)

    def matrix(self):
        """The 2x2 special-unitary matrix of this element."""
        x1, x2, x3, x4 = self.x
        return np.array(
            [[x1 + 1j * x2, x3 + 1j * x4], [-x3 + 1j * x4, x1 - 1j * x2]]
        )

    def __neg__(self):
        return Su2Element(-self.x)

    def isclose(self, other, atol=1e-12):
        return bool(np.allclose(self.x, other.x, rtol=0.0, atol=atol))


@dataclass(frozen=True)
class So3Rotation:
    """Proper rotation as an orthogonal 3x3 matrix with determinant +1."""

    m: np.ndarray
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float).reshape(3, 3)
        if self.validate:
            if not np.allclose(m.T @ m, np.eye(3), rtol=0.0, atol=1e-10):
                raise ValueError("matrix is not orthogonal within 1e-10")
            if abs(np.linalg.det(m) - 1.0) > 1e-10:
                raise ValueError("determinant differs from +1 by more than 1e-10")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "m", m)

    def apply(self, v):
        return self.m @ np.asarray(v, dtype=float)

    def isclose(self, other, atol=1e-10):
        return bool(np.allclose(self.m, other.m, rtol=0.0, atol=atol))


def rotation_angle(r: So3Rotation) -> float:
    """Geodesic rotation angle in [0, pi], from the matrix trace."""
    return float(np.arccos(np.clip((np.trace(r.m) - 1.0) / 2.0, -1.0, 1.0)))


# ---------------------------------------------------------------------------
# group operations
# ---------------------------------------------------------------------------

def su2_identity() -> Su2Element:
    return Su2Element(np.array([1.0, 0.0, 0.0, 0.0]))


def su2_from_angles(theta: float, psi: float, phi: float) -> Su2Element:
    """Element at hyperspherical angles; theta, psi in [0, pi], phi in [0, 2*pi)."""
    if not (0.0 <= theta <= math.pi):
        raise ValueError(f"theta {theta} outside [0, pi]")
    if not (0.0 <= psi <= math.pi):
        raise ValueError(f"psi {psi} outside [0, pi]")
    if not (0.0 <= phi < 2.0 * math.pi):
        raise ValueError(f"phi {phi} outside [0, 2*pi)")
    return Su2Element(quat_from_angles(theta, psi, phi))


def su2_from_axis_angle(axis, angle: float) -> Su2Element:
    """Element whose image rotation turns by `angle` about the unit `axis`.

    The axis is normalized; a zero axis is rejected.
    """
    axis = np.asarray(axis, dtype=float).reshape(3)
    norm = float(np.linalg.norm(axis))
    if norm < 1e-12:
        raise ValueError("axis must be a nonzero 3-vector")
    nx, ny, nz = axis / norm
    s = math.sin(angle / 2.0)
    # component order matches the (i*sigma_z, i*sigma_y, i*sigma_x) layout
    return Su2Element(
        np.array([math.cos(angle / 2.0), -s * nz, -s * ny, -s * nx])
    )


def su2_compose(g: Su2Element, h: Su2Element) -> Su2Element:
    """Group product g*h (matrix product of the associated matrices)."""
    return Su2Element(quat_compose(g.x, h.x))


def su2_inverse(g: Su2Element) -> Su2Element:
    """Inverse element: conjugate-transpose matrix, i.e. negated vector part."""
    x = g.x.copy()
    x[1:] = -x[1:]
    return Su2Element(x)


def su2_to_rotation(g: Su2Element) -> So3Rotation:
    """Image of g under the two-to-one covering map onto SO(3)."""
    return So3Rotation(quat_rotation_matrices(g.x), validate=False)


def relative_angle(g: Su2Element, h: Su2Element) -> float:
    """Hyperspherical angle of g^{-1} h, in [0, pi].

    Equals arccos of half the trace of g^{-1} h, computed here as the
    inner product of the two unit 4-vectors (clamped before arccos).
    """
    return float(quat_relative_angle(g.x, h.x))


# ---------------------------------------------------------------------------
# Haar quadrature
# ---------------------------------------------------------------------------

def _panel_rule(a, b, panels, order):
    """Composite Gauss-Legendre nodes/weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


class HaarGrid:
    """Composite Gauss-Legendre discretization of the normalized Haar measure.

    Per-coordinate weights already contain the measure factors, so each of
    the three weight arrays sums to 1 and so does their tensor product.
    Oscillatory integrands need the panel count to grow with the oscillation
    frequency: keep at least 4 panels per oscillation period.  Cost of the
    full 3-angle quadrature is the product of the node counts; integrands
    that depend only on theta should go through
    :func:`haar_integrate_class`, which uses the theta arrays alone.
    """

    def __init__(self, theta_panels=64, psi_panels=64, phi_panels=64, order=8):
        for name, value in (
            ("theta_panels", theta_panels),
            ("psi_panels", psi_panels),
            ("phi_panels", phi_panels),
            ("order", order),
        ):
            if int(value) < 1:
                raise ValueError(f"{name} must be a positive integer")
        self.theta_panels = int(theta_panels)
        self.psi_panels = int(psi_panels)
        self.phi_panels = int(phi_panels)
        self.order = int(order)

        t, wt = _panel_rule(0.0, math.pi, self.theta_panels, self.order)
        self.theta_nodes = t
        self.theta_weights = wt * (2.0 / math.pi) * np.sin(t) ** 2

        p, wp = _panel_rule(0.0, math.pi, self.psi_panels, self.order)
        self.psi_nodes = p
        self.psi_weights = wp * 0.5 * np.sin(p)

        f, wf = _panel_rule(0.0, 2.0 * math.pi, self.phi_panels, self.order)
        self.phi_nodes = f
        self.phi_weights = wf / (2.0 * math.pi)

        for arr in (self.theta_nodes, self.theta_weights, self.psi_nodes,
                    self.psi_weights, self.phi_nodes, self.phi_weights):
            arr.flags.writeable = False

    def nodes_as_quaternions(self):
        """All grid nodes as an (M, 4) array plus the matching (M,) weights."""
        th, ps, ph = np.meshgrid(
            self.theta_nodes, self.psi_nodes, self.phi_nodes, indexing="ij"
        )
        q = quat_from_angles(th.ravel(), ps.ravel(), ph.ravel())
        w = (
            self.theta_weights[:, None, None]
            * self.psi_weights[None, :, None]
            * self.phi_weights[None, None, :]
        ).ravel()
        return q, w


def haar_integrate(f, grid: HaarGrid) -> float:
    """Integral of f over the group against the normalized Haar measure.

    `f` is called once per grid node with an :class:`Su2Element`; prefer
    :func:`haar_integrate_class` when f depends only on the hyperspherical
    angle.
    """
    q, w = grid.nodes_as_quaternions()
    values = np.fromiter(
        (f(Su2Element(row)) for row in q), dtype=float, count=len(q)
    )
    return float(values @ w)


def haar_integrate_class(f_of_theta, grid: HaarGrid) -> float:
    """Haar integral of a class function given as f(theta) (vectorized)."""
    values = np.asarray(f_of_theta(grid.theta_nodes), dtype=float)
    return float(values @ grid.theta_weights)


# ---------------------------------------------------------------------------
# Haar sampling
# ---------------------------------------------------------------------------

def _theta_from_uniform_scalar(u: float) -> float:
    lo, hi = 0.0, math.pi
    t = math.pi * u
    for _ in range(100):
        resid = (t - math.sin(t) * math.cos(t)) / math.pi - u
        if resid > 0.0:
            hi = t
        elif resid < 0.0:
            lo = t
        deriv = 2.0 * math.sin(t) ** 2 / math.pi
        nxt = t - resid / deriv if deriv > 1e-300 else 0.5 * (lo + hi)
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - t) < 1e-12:
            return nxt
        t = nxt
    return t


def theta_from_uniform(u):
    """Invert the theta-marginal CDF (t - sin t cos t)/pi by Newton iteration.

    Falls back to bisection steps whenever Newton would leave [0, pi] or the
    derivative underflows; converges to 1e-12 everywhere on (0, 1).
    """
    if isinstance(u, float) or np.ndim(u) == 0:
        return _theta_from_uniform_scalar(float(u))
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    lo = np.zeros_like(u)
    hi = np.full_like(u, math.pi)
    t = math.pi * u.copy()
    for _ in range(100):
        resid = (t - np.sin(t) * np.cos(t)) / math.pi - u
        hi = np.where(resid > 0, t, hi)
        lo = np.where(resid < 0, t, lo)
        deriv = 2.0 * np.sin(t) ** 2 / math.pi
        with np.errstate(divide="ignore", invalid="ignore"):
            step = resid / deriv
        nxt = t - step
        bad = ~np.isfinite(nxt) | (nxt <= lo) | (nxt >= hi)
        nxt = np.where(bad, 0.5 * (lo + hi), nxt)
        done = np.abs(nxt - t) < 1e-12
        t = nxt
        if done.all():
            break
    return float(t[0]) if scalar else t


def haar_sample(rng: np.random.Generator) -> Su2Element:
    """Draw one Haar-distributed element from the given random stream.

    Consumes exactly three uniforms, in the order (theta, psi, phi).
    """
    theta = _theta_from_uniform_scalar(rng.random())
    psi = math.acos(1.0 - 2.0 * rng.random())
    phi = 2.0 * math.pi * rng.random()
    st, sp = math.sin(theta), math.sin(psi)
    return Su2Element(np.array([
        math.cos(theta), st * math.cos(psi), st * sp * math.cos(phi), st * sp * math.sin(phi),
    ]))
