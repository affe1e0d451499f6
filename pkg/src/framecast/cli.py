"""Command-line driver: reproducible experiment runs with machine-readable outputs.

Subcommands: `coeffs`, `likelihood`, `error-scaling`, `simulate`,
`disturbance`, `verify`.  CSV outputs carry a header row and a leading
`# config_sha256=...` comment; structured reports are JSON with sorted keys.
Floats are written with 17 significant digits so files round-trip exactly
and identical (config, seed) pairs produce identical data.  The environment
variable FRAMECAST_THREADS selects the simulate fan-out width; unset or <2
means serial.

Exit codes: 0 success, 1 verification failure, 2 invalid configuration or
arguments, 3 numerical non-convergence.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass

import click
import numpy as np

from . import __version__
from .agreement import ObserverScenario, PriorSpec, run_rounds
from .disturbance import (
    ConvergenceError,
    finite_j_fidelity,
    lambda_constant,
    trace_distance_bounds,
)
from .encoding import b_norm_squared, encoding_spec, multiplicity
from .likelihood import (
    average_error,
    build_model,
    density_grid,
    likelihood_density,
    overlap,
)
from .oracle import (
    block_character,
    brute_overlap,
    build_state_vectors,
    coupled_basis,
)
from .su2 import Su2Element, haar_sample, su2_compose, su2_from_axis_angle, su2_identity

__all__ = ["main", "run_command", "entry_point", "RunConfig", "oracle_checks"]


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _csv_text(config: dict, header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(f"# config_sha256={_config_hash(config)}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
        buf.write("\n")
    return buf.getvalue()


def _json_text(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    n_spins: int
    observers: tuple[Su2Element, ...]
    prior: PriorSpec
    rounds: int
    seed: int
    cdf_resolution: int | None
    raw: dict

    @property
    def scenario(self) -> ObserverScenario:
        return ObserverScenario(
            n_spins=self.n_spins,
            observer_rotations=self.observers,
            prior=self.prior,
        )


def _axis_angle_element(entry: dict, what: str) -> Su2Element:
    try:
        axis = [float(v) for v in entry["axis"]]
        angle = float(entry["angle"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{what} must carry a 3-vector 'axis' and an 'angle'") from exc
    if len(axis) != 3:
        raise ValueError(f"{what} axis must have exactly 3 components")
    return su2_from_axis_angle(axis, angle)  # normalizes; rejects a zero axis


def load_config(raw: dict, rounds: int | None = None, seed: int | None = None) -> RunConfig:
    """Validate a configuration mapping; CLI rounds/seed override the file."""
    try:
        n_spins = int(raw["n_spins"])
        observer_entries = list(raw["observers"])
        prior_entry = dict(raw["prior"])
    except (KeyError, TypeError) as exc:
        raise ValueError("config needs n_spins, observers, and prior") from exc
    if n_spins < 2:
        raise ValueError("n_spins must be at least 2")
    if not observer_entries:
        raise ValueError("at least one observer is required")
    observers = tuple(
        _axis_angle_element(entry, f"observer {i + 1}")
        for i, entry in enumerate(observer_entries)
    )
    kind = prior_entry.get("kind")
    if kind == "uniform":
        prior = PriorSpec(kind="uniform")
    elif kind == "concentrated":
        try:
            spread = float(prior_entry["spread"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError("concentrated prior needs a numeric 'spread'") from exc
        prior = PriorSpec(
            kind="concentrated",
            mean=_axis_angle_element(prior_entry.get("mean", {}), "prior mean"),
            spread=spread,
        )
    else:
        raise ValueError(f"unknown prior kind {kind!r}")
    effective_rounds = int(rounds if rounds is not None else raw.get("rounds", 0))
    if effective_rounds < 1:
        raise ValueError("rounds must be at least 1")
    effective_seed = int(seed if seed is not None else raw.get("seed", 0))
    if not 0 <= effective_seed < 2**64:
        raise ValueError("seed must fit in 64 unsigned bits")
    overrides = raw.get("grid_overrides") or {}
    cdf_resolution = overrides.get("cdf_resolution")
    if cdf_resolution is not None:
        cdf_resolution = int(cdf_resolution)
        if cdf_resolution < 2:
            raise ValueError("cdf_resolution override must be at least 2")
    effective = dict(raw)
    effective["rounds"] = effective_rounds
    effective["seed"] = effective_seed
    return RunConfig(
        n_spins=n_spins,
        observers=observers,
        prior=prior,
        rounds=effective_rounds,
        seed=effective_seed,
        cdf_resolution=cdf_resolution,
        raw=effective,
    )


# ---------------------------------------------------------------------------
# verification suite
# ---------------------------------------------------------------------------

def oracle_checks(max_spins: int = 6, pairs: int = 100, seed: int = 20240901):
    """Yield (name, passed, detail) for every brute-force ground-truth check."""
    rng = np.random.default_rng(seed)
    for n in range(2, max_spins + 1):
        tree = coupled_basis(n)
        stacked = np.column_stack([b.basis for b in tree.blocks])
        gram_err = float(np.max(np.abs(stacked.T @ stacked - np.eye(2**n))))
        yield f"N={n} coupled basis orthonormal", gram_err <= 1e-10, f"max |gram - id| = {gram_err:.2e}"

        counts_ok = all(
            len(tree.sector(tj)) == multiplicity(n, tj)
            for tj in range(n % 2, n + 1, 2)
        )
        yield f"N={n} block counts match multiplicities", counts_ok, ""

        a_vec, b_vec = build_state_vectors(n)
        norm_a = float(np.linalg.norm(a_vec))
        norm_b_sq = float(np.real(b_vec.conj() @ b_vec))
        yield f"N={n} encoding state normalized", abs(norm_a - 1.0) <= 1e-10, f"|norm-1| = {abs(norm_a-1):.2e}"
        expected = b_norm_squared(n)
        yield (
            f"N={n} seed norm matches closed form",
            abs(norm_b_sq - expected) <= 1e-10 * expected,
            f"{norm_b_sq} vs {expected}",
        )

        spec = encoding_spec(n)
        worst = 0.0
        for _ in range(pairs):
            g = haar_sample(rng)
            gp = haar_sample(rng)
            brute = brute_overlap(n, g, gp)
            closed = overlap(spec, _relative(g, gp))
            worst = max(worst, abs(brute - closed))
        yield f"N={n} brute overlap matches character sum ({pairs} pairs)", worst <= 1e-10, f"max |diff| = {worst:.2e}"

        g = haar_sample(rng)
        gp = haar_sample(rng)
        h = haar_sample(rng)
        shift = abs(
            brute_overlap(n, su2_compose(h, g), su2_compose(h, gp))
            - brute_overlap(n, g, gp)
        )
        yield f"N={n} overlap is left-translation invariant", shift <= 1e-10, f"|diff| = {shift:.2e}"

        if n >= 3:
            grid = density_grid(n)
            theta = grid.theta_nodes
            total = 0.0
            reference = su2_identity()
            values = np.array(
                [
                    brute_overlap(n, reference, Su2Element(_quat_theta(t))) ** 2
                    for t in theta
                ]
            )
            total = float(values @ grid.theta_weights)
            yield (
                f"N={n} brute density integrates to 1",
                abs(total - 1.0) <= 1e-4,
                f"integral = {total:.8f}",
            )

    n_char = max_spins - (max_spins % 2)  # largest even tree: sectors up to j = n/2
    tree = coupled_basis(n_char)
    worst = 0.0
    for _ in range(100):
        g = haar_sample(rng)
        theta = _relative(su2_identity(), g)
        for tj in range(0, n_char + 1, 2):
            char = block_character(tree, tj, g)
            expected = _character(tj, theta)
            worst = max(worst, abs(char - expected))
    yield (
        f"spin-block traces reproduce characters (j <= {n_char // 2})",
        worst <= 1e-9,
        f"max |diff| = {worst:.2e}",
    )


def _relative(g: Su2Element, h: Su2Element) -> float:
    return float(np.arccos(np.clip(np.dot(g.x, h.x), -1.0, 1.0)))


def _quat_theta(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta), 0.0, 0.0])


def _character(twoj: int, theta: float) -> float:
    if math.sin(theta) < 1e-8:
        return (twoj + 1.0) * (1.0 if theta < math.pi / 2 else (-1.0) ** twoj)
    return math.sin((twoj + 1) * theta) / math.sin(theta)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

@click.group()
@click.version_option(version=__version__, prog_name="framecast")
def main():
    """Reference-frame broadcast numerics: encoding, decoding, agreement, disturbance."""


@main.command()
@click.option("--n-spins", type=int, required=True, help="Number of carrier spins (>= 2).")
@click.option("--exact-even", is_flag=True, help="Eigensolve the zero-corner matrix for even N.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV path (stdout if omitted).")
def coeffs(n_spins, exact_even, out):
    """Per-sector coefficients of the optimal encoding state."""
    spec = encoding_spec(n_spins, exact_even=exact_even)
    config = {"command": "coeffs", "n_spins": n_spins, "exact_even": bool(exact_even)}
    rows = [
        (int(tj), float(c)) for tj, c in zip(spec.doubled_spins, spec.coeffs)
    ]
    _write_text(out, _csv_text(config, ["two_j", "coefficient"], rows))


@main.command()
@click.option("--n-spins", type=int, required=True)
@click.option("--grid", "grid_points", type=int, default=512, show_default=True,
              help="Number of theta samples on [0, pi].")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def likelihood(n_spins, grid_points, out):
    """Tabulate the decoding density p(theta) on a uniform angle grid."""
    if grid_points < 2:
        raise click.UsageError("--grid must be at least 2")
    spec = encoding_spec(n_spins)
    model = build_model(spec)
    theta = np.linspace(0.0, math.pi, grid_points)
    density = likelihood_density(model, theta)
    config = {"command": "likelihood", "n_spins": n_spins, "grid": grid_points}
    rows = [(float(t), float(p)) for t, p in zip(theta, density)]
    _write_text(out, _csv_text(config, ["theta", "p"], rows))


@main.command("error-scaling")
@click.option("--n-min", type=int, required=True)
@click.option("--n-max", type=int, required=True)
@click.option("--step", type=int, default=2, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--plot", type=click.Path(dir_okay=False), default=None,
              help="Also write an SVG convergence plot.")
def error_scaling(n_min, n_max, step, out, plot):
    """Average transmission error and its N^2 scaling over a range of N."""
    if n_min < 2 or n_max < n_min or step < 1:
        raise click.UsageError("need 2 <= n-min <= n-max and step >= 1")
    config = {"command": "error-scaling", "n_min": n_min, "n_max": n_max, "step": step}
    rows = []
    for n in range(n_min, n_max + 1, step):
        err = average_error(encoding_spec(n), density_grid(n))
        rows.append((n, float(err), float(n * n * err)))
    _write_text(out, _csv_text(config, ["n_spins", "avg_error", "n2_times_e"], rows))
    if plot is not None:
        _scaling_plot(plot, rows, _config_hash(config))


def _scaling_plot(path, rows, config_hash):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "framecast"
    ns = [r[0] for r in rows]
    scaled = [r[2] for r in rows]
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.plot(ns, scaled, marker="o", lw=1.2, label=r"$N^2 \langle e \rangle$")
    ax.axhline(8.0 * math.pi**2, color="k", ls="--", lw=0.8, label=r"$8\pi^2$")
    ax.set_xlabel("number of spins N")
    ax.set_ylabel("scaled average error")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(
        path,
        format="svg",
        metadata={"Date": None, "Title": f"config_sha256={config_hash}"},
    )
    plt.close(fig)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--rounds", type=int, default=None, help="Override the config round count.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def simulate(config_path, rounds, seed, out):
    """Monte Carlo rounds of the multi-observer scenario; records + manifest."""
    with open(config_path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    cfg = load_config(raw, rounds=rounds, seed=seed)
    workers = int(os.environ.get("FRAMECAST_THREADS", "0") or 0)

    started = time.monotonic()
    records = run_rounds(
        cfg.scenario,
        cfg.rounds,
        cfg.seed,
        workers=workers or None,
        cdf_resolution=cfg.cdf_resolution,
    )
    duration = time.monotonic() - started

    k = cfg.scenario.k
    header = ["round", "seed"]
    header += [f"src_x{c}" for c in range(1, 5)]
    for i in range(1, k + 1):
        header += [f"est{i}_x{c}" for c in range(1, 5)]
    header += [f"err{i}" for i in range(1, k + 1)]
    header += [f"pair{i}_{j}" for i in range(1, k + 1) for j in range(i + 1, k + 1)]

    rows = []
    for idx, rec in enumerate(records):
        row: list = [idx, rec.seed]
        row += [float(v) for v in rec.source_frame.x]
        for est in rec.estimates:
            row += [float(v) for v in est.x]
        row += [float(v) for v in rec.alignment_errors]
        row += [float(v) for v in rec.pairwise_angles]
        rows.append(tuple(row))
    _write_text(out, _csv_text(cfg.raw, header, rows))

    errors = np.concatenate([r.alignment_errors for r in records])
    summaries = {"alignment_error": _summary(errors)}
    if k >= 2:
        summaries["pairwise_angle"] = _summary(
            np.concatenate([r.pairwise_angles for r in records])
        )
    manifest = {
        "tool": "framecast",
        "version": __version__,
        "config": cfg.raw,
        "config_sha256": _config_hash(cfg.raw),
        "rounds": cfg.rounds,
        "duration_seconds": duration,
        "summaries": summaries,
    }
    _write_text(out + ".manifest.json", _json_text(manifest))


def _summary(values: np.ndarray) -> dict:
    return {
        "mean": float(np.mean(values)),
        "median": float(np.median(values)),
        "stderr": float(np.std(values, ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0,
    }


@main.command()
@click.option("--k", "k_observers", type=int, default=1, show_default=True)
@click.option("--n-spins", type=int, default=None,
              help="Also report the finite-size fidelity at this N.")
@click.option("--tol", type=float, default=1e-6, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def disturbance(k_observers, n_spins, tol, out):
    """Limiting fidelity constant and trace-distance bounds for k observers."""
    if k_observers < 1:
        raise click.UsageError("--k must be at least 1")
    config = {"command": "disturbance", "k": k_observers, "n_spins": n_spins, "tol": tol}
    lam = lambda_constant(tol)
    lower, upper = trace_distance_bounds(k_observers, lam)
    payload = {
        "config_sha256": _config_hash(config),
        "lambda": lam,
        "k": k_observers,
        "fidelity": lam**k_observers,
        "lower": lower,
        "upper": upper,
    }
    if n_spins is not None:
        payload["finite_j"] = {
            "n_spins": n_spins,
            "fidelity": finite_j_fidelity(
                n_spins, k_observers, density_grid(n_spins, squared=True)
            ),
        }
    _write_text(out, _json_text(payload))


@main.command()
@click.option("--max-spins", type=int, default=6, show_default=True)
@click.pass_context
def verify(ctx, max_spins):
    """Cross-check the closed forms against the brute-force product-space oracle."""
    if not 2 <= max_spins <= 6:
        raise click.UsageError("--max-spins must lie in [2, 6]")
    failures = 0
    for name, passed, detail in oracle_checks(max_spins):
        status = "ok" if passed else "FAIL"
        suffix = f"  ({detail})" if detail else ""
        click.echo(f"[{status}] {name}{suffix}")
        failures += 0 if passed else 1
    if failures:
        click.echo(f"{failures} check(s) failed", err=True)
        ctx.exit(1)
    click.echo("all checks passed")


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------

def run_command(argv: list[str]) -> int:
    """Run one CLI invocation; exit code 0/1/2/3 per the contract above."""
    try:
        main.main(args=list(argv), prog_name="framecast", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 2
    except click.ClickException as exc:
        exc.show()
        return 2
    except ConvergenceError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except (ValueError, KeyError, TypeError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


def entry_point() -> None:
    sys.exit(run_command(sys.argv[1:]))
