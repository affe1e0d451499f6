"""Multi-observer objectification: joint estimate density, Monte Carlo rounds,
covariant-agreement metrics, and delta-convergence probes.

Perfect covariant agreement means the decoded rotations of two observers
differ exactly by their known relative orientation; the per-pair consistency
angle below measures the geodesic deviation from that and must shrink as the
carrier size N grows.  The source-frame register is treated as a classical
random variable with prior density over the group, with two families: the
uniform (Haar) prior and a rotationally symmetric bump of adjustable spread
around a mean frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .encoding import encoding_spec
from .likelihood import (
    LikelihoodModel,
    ResolutionError,
    build_model,
    overlap,
    required_theta_panels,
    sample_estimate,
    transmission_error,
)
from .su2 import (
    HaarGrid,
    So3Rotation,
    Su2Element,
    haar_sample,
    quat_compose,
    quat_from_angles,
    quat_relative_angle,
    quat_rotation_matrices,
    su2_compose,
    su2_to_rotation,
)

__all__ = [
    "PriorSpec",
    "ObserverScenario",
    "SimulationRecord",
    "joint_density",
    "simulate_round",
    "run_rounds",
    "pairwise_consistency",
    "delta_convergence_probe",
    "eta_model",
    "eta_normalization",
]

_CHUNK = 131072  # cap on quaternion nodes held at once during quadrature


@dataclass(frozen=True)
class PriorSpec:
    """Source-frame prior: `uniform`, or `concentrated` around a mean element.

    The concentrated density is proportional to exp(-t^2/(2 spread^2)) in
    the relative angle t to the mean, normalized numerically against the
    Haar measure.
    """

    kind: str
    mean: Su2Element | None = None
    spread: float | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "concentrated"):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.kind == "concentrated":
            if self.mean is None or self.spread is None:
                raise ValueError("concentrated prior needs a mean and a spread")
            if not self.spread > 0:
                raise ValueError("spread must be positive")


@dataclass(frozen=True)
class ObserverScenario:
    n_spins: int
    observer_rotations: tuple[Su2Element, ...]
    prior: PriorSpec

    def __post_init__(self):
        object.__setattr__(
            self, "observer_rotations", tuple(self.observer_rotations)
        )
        if len(self.observer_rotations) < 1:
            raise ValueError("at least one observer is required")

    @property
    def k(self) -> int:
        return len(self.observer_rotations)


@dataclass(frozen=True)
class SimulationRecord:
    """One round: drawn source frame, per-observer estimates and metrics."""

    source_frame: Su2Element
    estimates: tuple[Su2Element, ...]
    alignment_errors: np.ndarray
    pairwise_angles: np.ndarray
    seed: int

    def __post_init__(self):
        errors = np.asarray(self.alignment_errors, dtype=float)
        if np.any(errors < 0) or np.any(errors > 8.0):
            raise ValueError("alignment errors must lie in [0, 8]")
        angles = np.asarray(self.pairwise_angles, dtype=float)
        if angles.size and (np.any(angles < 0) or np.any(angles > math.pi)):
            raise ValueError("pairwise angles must lie in [0, pi]")
        for name, arr in (("alignment_errors", errors), ("pairwise_angles", angles)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


@lru_cache(maxsize=32)
def _model_for(n_spins: int, resolution: int | None = None) -> LikelihoodModel:
    return build_model(encoding_spec(n_spins), resolution)


def _prior_normalization(spread: float) -> float:
    """Haar normalization of the concentrated bump, by dense 1-D quadrature."""
    panels = min(max(64, int(8.0 * math.pi / spread)), 200_000)
    grid = HaarGrid(theta_panels=panels, psi_panels=1, phi_panels=1, order=8)
    t = grid.theta_nodes
    return float(np.exp(-(t * t) / (2.0 * spread * spread)) @ grid.theta_weights)


def _sample_prior(prior: PriorSpec, rng: np.random.Generator) -> Su2Element:
    if prior.kind == "uniform":
        return haar_sample(rng)
    spread = float(prior.spread)
    # relative angle via rejection: Maxwell proposal t = spread * |3D normal|,
    # acceptance sin^2(t)/t^2, zero outside [0, pi]
    while True:
        t = spread * float(np.linalg.norm(rng.standard_normal(3)))
        if t >= math.pi:
            continue
        if t == 0.0 or rng.random() < (math.sin(t) / t) ** 2:
            break
    psi = math.acos(1.0 - 2.0 * rng.random())
    phi = 2.0 * math.pi * rng.random()
    bump = Su2Element(quat_from_angles(t, psi, phi))
    return su2_compose(prior.mean, bump)


def _sphere_nodes(grid: HaarGrid):
    """Flattened (psi, phi) product nodes and their combined weights."""
    ps, ph = np.meshgrid(grid.psi_nodes, grid.phi_nodes, indexing="ij")
    w = (grid.psi_weights[:, None] * grid.phi_weights[None, :]).ravel()
    return ps.ravel(), ph.ravel(), w


def joint_density(scn: ObserverScenario, estimates, grid: HaarGrid) -> float:
    """Density of the joint estimate tuple: prior-averaged product of decodings.

    Integrates p0(g) * prod_i p(est_i | g g_i) over the group.  The grid must
    resolve the decoding density for this N; a concentrated prior further
    needs the theta panel width below its spread.
    """
    estimates = tuple(estimates)
    if len(estimates) != scn.k:
        raise ValueError(f"expected {scn.k} estimates, got {len(estimates)}")
    needed = required_theta_panels(scn.n_spins)
    prior = scn.prior
    if prior.kind == "concentrated":
        needed = max(needed, int(math.pi / prior.spread))
    if grid.theta_panels < needed:
        raise ResolutionError(
            f"grid has {grid.theta_panels} theta panels; this scenario needs {needed}"
        )

    spec = encoding_spec(scn.n_spins)
    theta = grid.theta_nodes
    if prior.kind == "concentrated":
        prior_factor = (
            np.exp(-(theta**2) / (2.0 * prior.spread**2))
            / _prior_normalization(prior.spread)
        )
        mean_x = prior.mean.x
    else:
        prior_factor = np.ones_like(theta)
        mean_x = None

    psi, phi, sphere_w = _sphere_nodes(grid)
    obs_x = [g.x for g in scn.observer_rotations]
    est_x = [e.x for e in estimates]

    total = 0.0
    step = max(1, _CHUNK // max(1, len(psi)))
    for start in range(0, len(theta), step):
        sl = slice(start, start + step)
        h = quat_from_angles(theta[sl][:, None], psi[None, :], phi[None, :])
        g = h if mean_x is None else quat_compose(mean_x, h)
        vals = np.ones(h.shape[:-1])
        for gi, ei in zip(obs_x, est_x):
            angles = quat_relative_angle(quat_compose(g, gi), ei)
            vals *= overlap(spec, angles.ravel()).reshape(angles.shape) ** 2
        weighted = (grid.theta_weights[sl] * prior_factor[sl])[:, None] * sphere_w[None, :]
        total += float(np.sum(weighted * vals))
    return total


def _pairwise_angles(estimates, observer_rotations) -> np.ndarray:
    est_rot = [su2_to_rotation(e).m for e in estimates]
    obs_rot = [su2_to_rotation(g).m for g in observer_rotations]
    out = []
    k = len(estimates)
    for i in range(k):
        for j in range(i + 1, k):
            known = obs_rot[j].T @ obs_rot[i]
            twist = est_rot[j].T @ est_rot[i] @ known.T
            out.append(math.acos(min(1.0, max(-1.0, (np.trace(twist) - 1.0) / 2.0))))
    return np.asarray(out)


def pairwise_consistency(record: SimulationRecord, scn: ObserverScenario) -> np.ndarray:
    """Geodesic angle, per observer pair, between the decoded and the known
    relative orientation; 0 means exact covariant agreement."""
    return _pairwise_angles(record.estimates, scn.observer_rotations)


def simulate_round(
    scn: ObserverScenario,
    rng: np.random.Generator,
    *,
    seed: int = 0,
    cdf_resolution: int | None = None,
) -> SimulationRecord:
    """One round: draw the source frame, decode per observer, fill the metrics."""
    model = _model_for(scn.n_spins, cdf_resolution)
    source = _sample_prior(scn.prior, rng)
    estimates = []
    errors = []
    for g_i in scn.observer_rotations:
        g_true = su2_compose(source, g_i)
        est = sample_estimate(model, g_true, rng)
        estimates.append(est)
        errors.append(transmission_error(est, g_true))
    estimates = tuple(estimates)
    return SimulationRecord(
        source_frame=source,
        estimates=estimates,
        alignment_errors=np.asarray(errors),
        pairwise_angles=_pairwise_angles(estimates, scn.observer_rotations),
        seed=seed,
    )


def _round_seed(seed: int, index: int) -> int:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def run_rounds(
    scn: ObserverScenario,
    rounds: int,
    seed: int,
    workers: int | None = None,
    cdf_resolution: int | None = None,
) -> list[SimulationRecord]:
    """Independent rounds with per-round streams derived from (seed, index).

    Results are ordered by round index regardless of `workers`, so the
    output is identical for serial and fan-out execution.
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    _model_for(scn.n_spins, cdf_resolution)  # build once before any fan-out
    seeds = [_round_seed(seed, i) for i in range(rounds)]

    def one(child_seed: int) -> SimulationRecord:
        return simulate_round(
            scn,
            np.random.default_rng(child_seed),
            seed=child_seed,
            cdf_resolution=cdf_resolution,
        )

    if workers and workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, seeds))
    return [one(s) for s in seeds]


def delta_convergence_probe(n_spins: int, g_ref: Su2Element, f, grid: HaarGrid) -> float:
    """Average of f over rotations drawn by decoding likelihood around g_ref.

    Computes the group integral of p(g_ref | g) f(R(g)) by quadrature; as
    N grows this converges to f(R(g_ref)).  Uses left invariance to place
    the oscillatory direction on the theta coordinate, so the sphere angles
    of `grid` may stay coarse while theta must resolve the density.
    """
    needed = required_theta_panels(n_spins)
    if grid.theta_panels < needed:
        raise ResolutionError(
            f"grid has {grid.theta_panels} theta panels; N={n_spins} needs {needed}"
        )
    spec = encoding_spec(n_spins)
    theta = grid.theta_nodes
    density = overlap(spec, theta) ** 2
    psi, phi, sphere_w = _sphere_nodes(grid)

    total = 0.0
    step = max(1, _CHUNK // max(1, len(psi)))
    for start in range(0, len(theta), step):
        sl = slice(start, start + step)
        h = quat_from_angles(theta[sl][:, None], psi[None, :], phi[None, :])
        g = quat_compose(g_ref.x, h)
        mats = quat_rotation_matrices(g)
        flat = mats.reshape(-1, 3, 3)
        vals = np.fromiter(
            (f(So3Rotation(m, validate=False)) for m in flat),
            dtype=float,
            count=len(flat),
        ).reshape(mats.shape[:-2])
        weighted = (grid.theta_weights[sl] * density[sl])[:, None] * sphere_w[None, :]
        total += float(np.sum(weighted * vals))
    return total


def eta_model(x):
    """The mollifier 2*pi sin^2(x)/(x^2-pi^2)^2 underlying the large-N limit.

    Stable at the removable points x = +-pi via the factored sinc form.
    """
    x = np.asarray(x, dtype=float)
    near_pos = np.abs(x - math.pi) < 1e-3
    near_neg = np.abs(x + math.pi) < 1e-3
    u = np.where(near_pos, x - math.pi, x + math.pi)
    other = np.where(near_pos, x + math.pi, x - math.pi)
    patched = 2.0 * math.pi * np.sinc(u / math.pi) ** 2 / other**2
    denom = np.where(near_pos | near_neg, 1.0, (x**2 - math.pi**2) ** 2)
    plain = 2.0 * math.pi * np.sin(x) ** 2 / denom
    return np.where(near_pos | near_neg, patched, plain)


def eta_normalization(half_width: float = 1e4, order: int = 8) -> float:
    """Quadrature of the mollifier over [-half_width, half_width]; tends to 1."""
    panels = max(64, int(4.0 * half_width / math.pi))
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, half_width, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return 2.0 * float(eta_model(nodes) @ weights)
