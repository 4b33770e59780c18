"""Command-line front door: configuration, orchestration, and reporting.

    polyheat <command> --config <file> [--out <dir>] [--workers <k>] [--seed <s>]

Commands: kernel (profile tabulation + decay fit), spectrum (eigenpair and
biorthogonality checks), solve (one regularized run with energy monitoring),
sweep (homotopy convergence study), branch (sweep plus first-order-correction
analysis), report (digest of run manifests).

Configs are strict JSON: unknown keys are rejected with their field path so
a typo cannot silently corrupt a convergence study.  Every run writes its
artifacts plus a manifest (config echo, artifact checksums, timing, outcome);
the exit code is 0 exactly when the manifest outcome is ok.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .degeneracy import DegeneracyFunction, RegPath, degeneracy_function
from .gridfield import Field, bump, l2_norm, make_grid, write_phf1
from .homotopy import (
    Schedule,
    correction_phi,
    linear_trajectory,
    sweep,
    write_plot_data,
    write_summary_json,
    write_table_csv,
)
from .kernel import (
    QuadratureSpec,
    default_quadrature,
    profile_bessel,
    with_decay_fit,
    write_profile_csv,
)
from .solver import SolverConfig, interface_report, solve, write_energy_csv
from .spectral_theory import (
    MultiIndex,
    adjoint_eigenpolynomial,
    apply_L,
    apply_L_star,
    biorthogonality_matrix,
    eigenfunction,
    eigenvalue,
    multi_indices_up_to,
)

__all__ = ["RunConfig", "RunManifest", "ConfigError", "parse_config", "run", "report", "main"]

_COMMANDS = ("kernel", "spectrum", "solve", "sweep", "branch")


class ConfigError(ValueError):
    """Malformed or invalid run configuration; message carries the field path."""


@dataclass(frozen=True)
class RunConfig:
    command: str
    blocks: dict
    out_dir: str = "polyheat-out"
    seed: int = 0
    workers: int = 1


@dataclass(frozen=True)
class RunManifest:
    command: str
    config: dict
    artifacts: tuple
    elapsed_seconds: float
    outcome: str
    reason: str | None
    tool_version: str
    highlights: dict


# ---------------------------------------------------------------------------
# strict config validation

_BLOCK_KEYS = {
    "grid": {"dim", "half_width", "points_per_dim"},
    "degeneracy": {"kind", "params", "n", "t_max"},
    "u0": {"type", "amplitude", "width", "center", "steepness", "count"},
    "solver": {
        "m", "eps", "variant", "dt_init", "t_final", "c", "dealias",
        "energy_tol", "snapshot_times", "report_stride",
    },
    "schedule": {"kind", "c"},
    "sweep": {"m", "t_eval", "n_values", "dt_init", "dealias", "time_nodes", "clamp_floor"},
    "branch": {"m", "t_eval", "n_values", "dt_init", "dealias", "time_nodes", "clamp_floor"},
    "kernel": {"m", "dim", "r_max", "dr", "s_max", "nodes"},
    "spectrum": {"m", "max_order"},
}

_REQUIRED_BLOCKS = {
    "kernel": ("kernel",),
    "spectrum": ("grid", "spectrum"),
    "solve": ("grid", "degeneracy", "solver", "u0"),
    "sweep": ("grid", "degeneracy", "schedule", "sweep", "u0"),
    "branch": ("grid", "degeneracy", "schedule", "branch", "u0"),
}


def _check_keys(block_name: str, block: dict) -> None:
    if not isinstance(block, dict):
        raise ConfigError(f"{block_name} must be an object")
    allowed = _BLOCK_KEYS[block_name]
    for key in block:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {block_name}")


def parse_config(text: str, command: str | None = None) -> RunConfig:
    """Parse and validate a JSON run configuration.

    Unknown keys anywhere are rejected, and the module-level invariants the
    blocks feed into are pre-checked so failures name a field path instead
    of surfacing deep inside a run.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not well-formed JSON: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")

    top_allowed = {"command", "out_dir", "seed", "workers"} | set(_BLOCK_KEYS)
    for key in raw:
        if key not in top_allowed:
            raise ConfigError(f"unknown key {key!r} at top level")

    cmd = raw.get("command", command)
    if cmd is None:
        raise ConfigError("no command given (config 'command' or CLI subcommand)")
    if command is not None and "command" in raw and raw["command"] != command:
        raise ConfigError(f"config command {raw['command']!r} conflicts with CLI command {command!r}")
    if cmd not in _COMMANDS:
        raise ConfigError(f"unknown command {cmd!r}; choose from {_COMMANDS}")

    for name in _REQUIRED_BLOCKS[cmd]:
        if name not in raw:
            raise ConfigError(f"command {cmd!r} requires a {name!r} block")
        _check_keys(name, raw[name])

    # invariant pre-checks with field paths
    if "grid" in raw:
        g = raw["grid"]
        if g.get("dim") not in (1, 2):
            raise ConfigError("grid.dim must be 1 or 2")
        if not g.get("half_width", 0) > 0:
            raise ConfigError("grid.half_width must be positive")
        m = g.get("points_per_dim", 0)
        if m % 2 != 0 or m < 8:
            raise ConfigError("grid.points_per_dim must be even >= 8")
    if "solver" in raw:
        s = raw["solver"]
        if s.get("m") not in (2, 3):
            raise ConfigError("solver.m must be 2 or 3")
        if not (0.0 < s.get("eps", 0.0) <= 1.0):
            raise ConfigError("solver.eps must lie in (0, 1]")
        if not s.get("dt_init", 0) > 0:
            raise ConfigError("solver.dt_init must be positive")
        if not s.get("t_final", 0) > 0:
            raise ConfigError("solver.t_final must be positive")
        if s.get("variant", "full") not in ("full", "simple"):
            raise ConfigError("solver.variant must be 'full' or 'simple'")
    if "degeneracy" in raw:
        d = raw["degeneracy"]
        if d.get("n", 0.0) < 0:
            raise ConfigError("degeneracy.n must be nonnegative")
        try:
            _degeneracy_from_block(d)
        except (ValueError, KeyError) as err:
            raise ConfigError(f"degeneracy: {err}") from err
    if "schedule" in raw:
        sch = raw["schedule"]
        if sch.get("kind") not in ("n_of_eps", "eps_of_n"):
            raise ConfigError("schedule.kind must be 'n_of_eps' or 'eps_of_n'")
        if not sch.get("c", 0) > 0:
            raise ConfigError("schedule.c must be positive")
    if "u0" in raw:
        u = raw["u0"]
        if u.get("type", "bump") not in ("bump", "random_bumps"):
            raise ConfigError("u0.type must be 'bump' or 'random_bumps'")
    if "kernel" in raw:
        k = raw["kernel"]
        if k.get("m", 0) < 1:
            raise ConfigError("kernel.m must be a positive integer")
        if k.get("dim") not in (1, 2):
            raise ConfigError("kernel.dim must be 1 or 2")
        if not k.get("r_max", 0) > 0 or not k.get("dr", 0) > 0:
            raise ConfigError("kernel.r_max and kernel.dr must be positive")
    if "spectrum" in raw:
        sp = raw["spectrum"]
        if sp.get("m", 0) < 1:
            raise ConfigError("spectrum.m must be a positive integer")
        if not 0 <= sp.get("max_order", -1) <= 4:
            raise ConfigError("spectrum.max_order must lie in 0..4")

    out_dir = raw.get("out_dir", "polyheat-out")
    return RunConfig(
        command=cmd,
        blocks={k: v for k, v in raw.items() if k in _BLOCK_KEYS},
        out_dir=out_dir,
        seed=int(raw.get("seed", 0)),
        workers=int(raw.get("workers", 1)),
    )


# ---------------------------------------------------------------------------
# block constructors


def _degeneracy_from_block(block: dict) -> DegeneracyFunction:
    params = dict(block.get("params", {}))
    t_max = block.get("t_max", 10.0)
    return degeneracy_function(block["kind"], t_max=t_max, **params)


def _grid_from_block(block: dict):
    return make_grid(block["dim"], block["half_width"], block["points_per_dim"])


def _u0_from_block(block: dict, grid, seed: int) -> Field:
    kind = block.get("type", "bump")
    if kind == "bump":
        return bump(
            grid,
            amplitude=block.get("amplitude", 1.0),
            width=block.get("width", 4.0),
            center=block.get("center"),
            steepness=block.get("steepness", 6.0),
        )
    rng = np.random.default_rng(seed)
    count = int(block.get("count", 3))
    width = block.get("width", 2.0)
    vals = np.zeros(grid.shape)
    span = 0.4 * grid.half_width - width
    for _ in range(count):
        center = rng.uniform(-span, span, size=grid.dim)
        amp = rng.uniform(0.3, 1.0) * block.get("amplitude", 1.0)
        vals += bump(grid, amp, width, center=center, steepness=block.get("steepness", 6.0)).values
    return Field(grid, vals, 0.0)


# ---------------------------------------------------------------------------
# command implementations (each returns (artifact names, highlights))


def _cmd_kernel(config: RunConfig, out: Path):
    block = config.blocks["kernel"]
    m, dim = block["m"], block["dim"]
    radii = np.arange(0.0, block["r_max"] + 0.5 * block["dr"], block["dr"])
    quad = default_quadrature(m)
    quad = QuadratureSpec(block.get("s_max", quad.s_max), block.get("nodes", quad.nodes))
    profile = profile_bessel(m, dim, radii, quad)
    highlights = {"m": m, "dim": dim}
    try:
        profile = with_decay_fit(profile)
        fit = profile.decay_fit
        highlights["decay_fit"] = {"C": fit.C, "a": fit.a, "alpha": fit.alpha}
        highlights["alpha_target"] = 2 * m / (2 * m - 1)
    except ValueError as err:
        highlights["decay_fit"] = f"skipped: {err}"
    name = f"profile_m{m}_N{dim}.csv"
    write_profile_csv(out / name, profile)
    return [name], highlights


def _cmd_spectrum(config: RunConfig, out: Path):
    grid = _grid_from_block(config.blocks["grid"])
    block = config.blocks["spectrum"]
    m, max_order = block["m"], block["max_order"]
    betas = multi_indices_up_to(grid.dim, max_order)
    rows = ["beta,lambda,rel_residual"]
    worst = 0.0
    for beta in betas:
        psi = eigenfunction(beta, m, grid)
        lam = float(eigenvalue(beta, m))
        resid = l2_norm(Field(grid, apply_L(psi, m).values - lam * psi.values)) / l2_norm(psi)
        worst = max(worst, resid)
        rows.append(f"{'|'.join(map(str, beta.entries))},{lam!r},{resid!r}")
    with open(out / "eigen_residuals.csv", "w") as fh:
        fh.write("\n".join(rows) + "\n")

    _, gram = biorthogonality_matrix(min(max_order, 4), m, grid)
    np.savetxt(out / "gram.csv", gram, delimiter=",")
    off_diag = float(np.max(np.abs(gram - np.diag(np.diag(gram))))) if gram.size > 1 else 0.0

    symbolic = {}
    for beta in multi_indices_up_to(grid.dim, 8):
        raw = adjoint_eigenpolynomial(beta, m, normalized=False)
        lam = Fraction(-beta.order, 2 * m)
        symbolic["|".join(map(str, beta.entries))] = apply_L_star(raw, m) == raw.scaled(lam)
    with open(out / "adjoint_check.json", "w") as fh:
        json.dump(symbolic, fh, indent=2, sort_keys=True)
        fh.write("\n")

    highlights = {
        "worst_eigen_residual": worst,
        "gram_off_diagonal_max": off_diag,
        "adjoint_exact_all": all(symbolic.values()),
    }
    return ["eigen_residuals.csv", "gram.csv", "adjoint_check.json"], highlights


def _cmd_solve(config: RunConfig, out: Path):
    grid = _grid_from_block(config.blocks["grid"])
    f = _degeneracy_from_block(config.blocks["degeneracy"])
    s = config.blocks["solver"]
    path = RegPath(f, config.blocks["degeneracy"]["n"], s.get("variant", "full"))
    solver_config = SolverConfig(
        m=s["m"],
        path=path,
        eps=s["eps"],
        dt_init=s["dt_init"],
        t_final=s["t_final"],
        c=s.get("c"),
        dealias=s.get("dealias", True),
        energy_tol=s.get("energy_tol", 1e-8),
        snapshot_times=tuple(s.get("snapshot_times", ())),
        report_stride=int(s.get("report_stride", 1)),
    )
    u0 = _u0_from_block(config.blocks["u0"], grid, config.seed)
    trajectory = solve(u0, solver_config)

    artifacts = []
    for snap in trajectory.snapshots:
        name = f"u_t{snap.time_tag:.6f}.phf1"
        write_phf1(out / name, snap)
        artifacts.append(name)
    write_energy_csv(out / "energy.csv", trajectory.reports)
    artifacts.append("energy.csv")

    first, last = trajectory.reports[0], trajectory.reports[-1]
    iface = interface_report(trajectory.snapshots[-1])
    # eventual positivity on the compact box |x_i| <= 1: latest snapshot with
    # a nonpositive minimum there, and whether all later snapshots are positive
    mins = [
        (snap.time_tag, interface_report(snap, region_half_width=1.0).min_on_region)
        for snap in trajectory.snapshots
    ]
    t_positive = 0.0
    for t_snap, mn in mins:
        if mn <= 0.0:
            t_positive = t_snap
    later = [mn for t_snap, mn in mins if t_snap > t_positive]
    highlights = {
        "run_id": trajectory.run_id,
        "mass_drift": abs(last.mass - first.mass) / max(abs(first.mass), 1e-300),
        "bf_initial": first.bf_energy,
        "bf_final": last.bf_energy,
        "dissipation_residual_rel": abs(last.dissipation_residual) / max(first.bf_energy, 1e-300),
        "sign_changes_final": iface.sign_change_count,
        "positivity_on_region": iface.positivity_on_region,
        "eventual_positivity_T": t_positive,
        "positive_after_T": bool(later) and all(mn > 0.0 for mn in later),
        "min_attained": min(float(np.min(s.values)) for s in trajectory.snapshots),
    }
    return artifacts, highlights


def _sweep_common(config: RunConfig, out: Path, block_name: str):
    grid = _grid_from_block(config.blocks["grid"])
    f = _degeneracy_from_block(config.blocks["degeneracy"])
    sch = Schedule(config.blocks["schedule"]["kind"], config.blocks["schedule"]["c"], f)
    block = config.blocks[block_name]
    u0 = _u0_from_block(config.blocks["u0"], grid, config.seed)
    m = int(block.get("m", 2))
    table = sweep(
        u0,
        m,
        f,
        sch,
        block["t_eval"],
        block["n_values"],
        dt_init=block.get("dt_init", 2e-5),
        dealias=block.get("dealias", False),
        time_nodes=int(block.get("time_nodes", 41)),
        clamp_floor=block.get("clamp_floor"),
        workers=config.workers,
    )
    write_table_csv(out / "table.csv", table)
    write_summary_json(out / "summary.json", table)
    write_plot_data(out / "plotdata.csv", table)
    return grid, f, m, u0, table, ["table.csv", "summary.json", "plotdata.csv"]


def _cmd_sweep(config: RunConfig, out: Path):
    *_, table, artifacts = _sweep_common(config, out, "sweep")
    highlights = {
        "slope": table.slope,
        "slope_ci": list(table.slope_ci),
        "sign_of_phi": table.sign_of_phi,
        "clamped_fraction": table.clamped_fraction,
        "rows_ok": sum(1 for r in table.rows if r.status == "ok"),
    }
    return artifacts, highlights


def _cmd_branch(config: RunConfig, out: Path):
    grid, f, m, u0, table, artifacts = _sweep_common(config, out, "branch")
    block = config.blocks["branch"]
    t_eval = block["t_eval"]
    time_nodes = int(block.get("time_nodes", 41))
    phi_raw = correction_phi(
        linear_trajectory(u0, m, np.linspace(0.0, t_eval, time_nodes)),
        m, f, t_eval, time_nodes=time_nodes, clamp_floor=block.get("clamp_floor"),
    )
    phi = Field(grid, phi_raw.values * table.sign_of_phi, t_eval)
    write_phf1(out / "phi.phf1", phi)
    artifacts = artifacts + ["phi.phf1", "branch.csv"]

    rows = ["n,eps,linear_gap,remainder_ratio,ablated_ratio"]
    phi_norm = l2_norm(phi)
    for r in table.rows:
        if r.status != "ok" or r.n <= 0:
            continue
        ablated = r.l2_gap / r.n
        rows.append(f"{r.n!r},{r.eps!r},{r.correction_gap!r},{r.correction_gap / r.n!r},{ablated!r}")
    with open(out / "branch.csv", "w") as fh:
        fh.write("\n".join(rows) + "\n")

    ratios = [r.correction_gap / r.n for r in table.rows if r.status == "ok" and r.n > 0]
    highlights = {
        "sign_of_phi": table.sign_of_phi,
        "clamped_fraction": table.clamped_fraction,
        "phi_l2": phi_norm,
        "remainder_ratios": ratios,
        "remainder_decreasing": all(a > b for a, b in zip(ratios, ratios[1:])),
        "slope": table.slope,
    }
    return artifacts, highlights


_DISPATCH = {
    "kernel": _cmd_kernel,
    "spectrum": _cmd_spectrum,
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "branch": _cmd_branch,
}


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def run(config: RunConfig) -> RunManifest:
    """Execute a validated config: dispatch, write artifacts, write manifest.

    Module errors become a failed outcome (and later a nonzero exit code)
    rather than a traceback; the manifest always lands on disk.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        names, highlights = _DISPATCH[config.command](config, out)
        outcome, reason = "ok", None
    except Exception as err:  # noqa: BLE001 - the manifest carries the reason
        names, highlights = [], {}
        outcome, reason = "failed", f"{type(err).__name__}: {err}"
    elapsed = time.perf_counter() - start

    artifacts = tuple(
        {"name": n, "sha256": _sha256(out / n), "bytes": (out / n).stat().st_size} for n in names
    )
    manifest = RunManifest(
        command=config.command,
        config={"blocks": config.blocks, "seed": config.seed, "workers": config.workers},
        artifacts=artifacts,
        elapsed_seconds=elapsed,
        outcome=outcome,
        reason=reason,
        tool_version=__version__,
        highlights=highlights,
    )
    with open(out / "manifest.json", "w") as fh:
        json.dump(
            {
                "command": manifest.command,
                "config": manifest.config,
                "artifacts": list(manifest.artifacts),
                "elapsed_seconds": manifest.elapsed_seconds,
                "outcome": manifest.outcome,
                "reason": manifest.reason,
                "tool_version": manifest.tool_version,
                "highlights": manifest.highlights,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    return manifest


def report(manifest_paths) -> str:
    """Human-readable digest of a list of manifest files."""
    if not manifest_paths:
        return "no runs"
    lines = []
    ok = failed = unreadable = 0
    for p in manifest_paths:
        try:
            data = json.loads(Path(p).read_text())
            outcome = data["outcome"]
        except (OSError, ValueError, KeyError):
            unreadable += 1
            lines.append(f"{p}: unreadable manifest")
            continue
        if outcome == "ok":
            ok += 1
        else:
            failed += 1
        extras = []
        h = data.get("highlights", {})
        for key in ("slope", "sign_of_phi", "clamped_fraction", "worst_eigen_residual",
                    "mass_drift", "dissipation_residual_rel", "remainder_decreasing",
                    "positivity_on_region", "decay_fit"):
            if key in h:
                extras.append(f"{key}={h[key]}")
        detail = f" [{', '.join(extras)}]" if extras else ""
        why = f" ({data.get('reason')})" if outcome != "ok" else ""
        lines.append(f"{p}: {data.get('command')} {outcome}{why}{detail}")
    total = ok + failed
    header = f"{ok}/{total} runs ok" + (f", {unreadable} unreadable" if unreadable else "")
    return "\n".join([header] + lines)


# ---------------------------------------------------------------------------
# entry point


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="polyheat",
        description="Numerical laboratory for degenerate high-order diffusion "
        "and the polyharmonic heat kernel.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in _COMMANDS:
        p = sub.add_parser(cmd, help=f"run the {cmd} pipeline from a JSON config")
        p.add_argument("--config", required=True, help="path to the JSON run configuration")
        p.add_argument("--out", default=None, help="output directory (default: config out_dir, "
                       "then POLYHEAT_OUT, then ./polyheat-out)")
        p.add_argument("--workers", type=int, default=None, help="worker threads for sweep rows (default 1)")
        p.add_argument("--seed", type=int, default=None, help="seed for randomized test fields (default 0)")
    rp = sub.add_parser("report", help="summarize run manifests")
    rp.add_argument("manifests", nargs="*", help="manifest.json files to digest")

    args = parser.parse_args(argv)
    if args.command == "report":
        print(report(args.manifests))
        return 0

    try:
        text = Path(args.config).read_text()
    except OSError as err:
        print(f"error: cannot read config: {err}", file=sys.stderr)
        return 2
    try:
        config = parse_config(text, command=args.command)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2

    out_dir = args.out or os.environ.get("POLYHEAT_OUT") or config.out_dir
    overrides = {"out_dir": out_dir}
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.seed is not None:
        overrides["seed"] = args.seed
    config = RunConfig(
        command=config.command,
        blocks=config.blocks,
        out_dir=out_dir,
        seed=overrides.get("seed", config.seed),
        workers=overrides.get("workers", config.workers),
    )
    manifest = run(config)
    if manifest.outcome == "ok":
        print(f"ok: {len(manifest.artifacts)} artifacts in {config.out_dir}")
        return 0
    print(f"failed: {manifest.reason}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
