"""Homotopy limits toward the linear flow and the small-n branching analysis.

Two coupled-parameter schedules drive the limits:

    n_of_eps   n(eps) = c / sqrt(|ln f(eps)|)   so n |ln f(eps)| -> infinity,
    eps_of_n   eps(n) = f^{-1}(e^{-c/sqrt(n)})  so n |ln f(eps)| = c sqrt(n) -> 0.

``sweep`` runs the regularized solver along a schedule and measures how fast
the solutions approach the linear solution u_lin with the same data.  The
first-order correction in n is the Duhamel field

    phi(x, t) = sgn * int_0^t grad H(t - s) * [ln f(|u_lin(s)|)
                                               grad Delta^(m-1) u_lin(s)] ds,

computed as a Fourier-multiplier time quadrature; the overall sign is not
fixed a priori here but resolved against the measured (u_n - u_lin)/n and
reported.  The log factor is clamped at a floor eta, and the fraction of the
box where the clamp was active at the evaluation time is reported: a large
fraction means the log-singularity dominates and the expansion is unreliable.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .degeneracy import DegeneracyFunction, RegPath, f_pow_n, theta
from .gridfield import (
    DecayAssertionError,
    Field,
    dealias_mask,
    k_squared,
    l2_norm,
    wavevectors,
)
from .kernel import phe_solve
from .solver import (
    BlowupError,
    SolverConfig,
    StiffnessError,
    Trajectory,
    solve,
)

__all__ = [
    "Schedule",
    "ScheduleRangeError",
    "ConvergenceRow",
    "ConvergenceTable",
    "CorrectionField",
    "BranchingResidual",
    "PerturbationReport",
    "PathDependenceReport",
    "schedule_eval",
    "linear_trajectory",
    "correction_phi",
    "resolve_phi_sign",
    "branching_residual",
    "sweep",
    "perturbation_smallness_report",
    "very_weak_residual",
    "path_dependence_report",
    "write_table_csv",
    "write_summary_json",
    "write_plot_data",
]


class ScheduleRangeError(ValueError):
    """The requested parameter leaves the schedule's representable range."""


@dataclass(frozen=True)
class Schedule:
    """Coupling between the degeneracy exponent n and the regularization eps.

    ``sample_points`` (values of the schedule's own parameter) are checked at
    construction: the product n |ln f(eps)| must trend upward along
    decreasing eps for ``n_of_eps`` and downward along decreasing n for
    ``eps_of_n``.
    """

    kind: str
    c: float
    f: DegeneracyFunction
    sample_points: tuple = ()

    def __post_init__(self):
        if self.kind not in ("n_of_eps", "eps_of_n"):
            raise ValueError("schedule kind must be 'n_of_eps' or 'eps_of_n'")
        if not self.c > 0:
            raise ValueError("schedule constant c must be positive")
        pts = tuple(sorted(float(p) for p in self.sample_points))
        object.__setattr__(self, "sample_points", pts)
        if len(pts) >= 2:
            products = [self._product(p) for p in pts]
            diffs = np.diff(products)
            if self.kind == "n_of_eps" and np.any(diffs >= 0):
                raise ValueError("n_of_eps product n|ln f(eps)| must increase as eps decreases")
            if self.kind == "eps_of_n" and np.any(diffs <= 0):
                raise ValueError("eps_of_n product n|ln f(eps)| must decrease as n decreases")

    def _product(self, parameter: float) -> float:
        n, eps = schedule_eval(self, parameter)
        return n * abs(math.log(self.f(eps)))


def schedule_eval(schedule: Schedule, parameter: float) -> tuple:
    """Map the schedule parameter (eps or n) to the coupled (n, eps) pair."""
    if schedule.kind == "n_of_eps":
        eps = float(parameter)
        if not (0.0 < eps <= 1.0):
            raise ScheduleRangeError(f"eps = {eps:g} outside (0, 1]")
        feps = schedule.f(eps)
        if feps <= 0.0 or feps >= 1.0:
            raise ScheduleRangeError(f"|ln f(eps)| degenerate at eps = {eps:g}")
        return schedule.c / math.sqrt(abs(math.log(feps))), eps
    n = float(parameter)
    if not n > 0:
        raise ScheduleRangeError(f"n = {n:g} outside (0, inf)")
    expo = -schedule.c / math.sqrt(n)
    if expo < -700.0:
        raise ScheduleRangeError(f"schedule out of range: f target e^{expo:.1f} underflows")
    target = math.exp(expo)
    try:
        eps = schedule.f.inverse(target)
    except ValueError as err:
        raise ScheduleRangeError(f"schedule out of range: {err}") from err
    if eps <= 0.0:
        raise ScheduleRangeError("schedule out of range: eps underflowed to 0")
    return n, min(eps, 1.0)


# ---------------------------------------------------------------------------
# the first-order correction field


@dataclass(frozen=True)
class CorrectionField:
    grid: object
    t: float
    values: np.ndarray
    clamp_floor: float
    clamped_fraction: float
    sign: int = +1


def linear_trajectory(u0: Field, m: int, times) -> tuple:
    """Exact multiplier snapshots of the linear flow at the given times."""
    return tuple(phe_solve(u0, m, float(t)) for t in sorted(times))


def correction_phi(
    trajectory,
    m: int,
    f: DegeneracyFunction,
    t: float,
    time_nodes: int = 41,
    clamp_floor: float | None = None,
) -> CorrectionField:
    """Duhamel correction at time t from a linear-flow trajectory.

    The trajectory must contain snapshots at the ``time_nodes`` uniform
    quadrature times on [0, t]; each node contributes the multiplier
    increment  sum_i (i xi_i) e^(-|xi|^(2m) (t-s)) w_hat_i  with
    w = ln f(max(|u|, eta)) grad Delta^(m-1) u  (dealiased), composited by
    the trapezoid rule.  Raises when the clamp was active on more than 20%
    of the box at time t.
    """
    snaps = trajectory.snapshots if isinstance(trajectory, Trajectory) else tuple(trajectory)
    if time_nodes < 2:
        raise ValueError("need at least two time nodes")
    if t == 0.0:
        grid = snaps[0].grid
        return CorrectionField(
            grid=grid, t=0.0, values=np.zeros(grid.shape),
            clamp_floor=clamp_floor if clamp_floor is not None else 0.0,
            clamped_fraction=0.0,
        )
    by_time = {round(float(s.time_tag), 12): s for s in snaps}
    nodes = np.linspace(0.0, t, time_nodes)
    fields = []
    for s in nodes:
        key = round(float(s), 12)
        if key not in by_time:
            raise ValueError(f"trajectory lacks a snapshot at quadrature node t = {s:g}")
        fields.append(by_time[key])

    grid = fields[0].grid
    sup0 = max(float(np.max(np.abs(fields[0].values))), 1e-300)
    eta = clamp_floor if clamp_floor is not None else 1e-8 * sup0
    if not eta > 0:
        raise ValueError("clamp floor must be positive")

    ks = wavevectors(grid, odd=True)
    lap = (-k_squared(grid)) ** (m - 1)
    sym = k_squared(grid) ** m
    mask = dealias_mask(grid)
    weights = np.full(time_nodes, t / (time_nodes - 1))
    weights[0] *= 0.5
    weights[-1] *= 0.5

    phi_hat = np.zeros(grid.shape, dtype=complex)
    for s, wt, snap in zip(nodes, weights, fields):
        u_hat = np.fft.fftn(snap.values)
        logf = np.log(f(np.maximum(np.abs(snap.values), eta)))
        prop = np.exp(-sym * (t - s))
        for ki in ks:
            g_i = np.fft.ifftn(1j * ki * lap * u_hat).real
            w_hat = np.where(mask, np.fft.fftn(logf * g_i), 0.0)
            phi_hat += wt * (1j * ki * prop * w_hat)
    values = np.fft.ifftn(phi_hat).real

    final = fields[-1]
    clamped = float(np.mean(np.abs(final.values) < eta))
    if clamped > 0.2:
        raise RuntimeError(
            f"log-singularity dominates: correction unreliable "
            f"(clamped fraction {clamped:.3f} > 0.2 at t = {t:g})"
        )
    return CorrectionField(grid=grid, t=t, values=values, clamp_floor=eta, clamped_fraction=clamped)


def resolve_phi_sign(u_n: Field, u_lin: Field, phi: CorrectionField) -> CorrectionField:
    """Pick the sign of phi by least squares against the measured u_n - u_lin."""
    d = u_n.values - u_lin.values
    score = float(np.sum(d * phi.values))
    sign = 1 if score >= 0 else -1
    return CorrectionField(
        grid=phi.grid,
        t=phi.t,
        values=sign * phi.values,
        clamp_floor=phi.clamp_floor,
        clamped_fraction=phi.clamped_fraction,
        sign=sign * phi.sign,
    )


@dataclass(frozen=True)
class BranchingResidual:
    linear_gap: float
    remainder_ratio: float


def branching_residual(u_n: Field, u_lin: Field, phi, n: float) -> BranchingResidual:
    """||u_n - u_lin - n phi|| and its ratio to n (phi = None ablates the correction)."""
    corr = 0.0 if phi is None else n * phi.values
    gap = l2_norm(Field(u_n.grid, u_n.values - u_lin.values - corr))
    return BranchingResidual(linear_gap=gap, remainder_ratio=gap / n if n > 0 else 0.0)


# ---------------------------------------------------------------------------
# the sweep


@dataclass(frozen=True)
class ConvergenceRow:
    n: float
    eps: float
    t_eval: float
    l2_gap: float
    sup_gap: float
    correction_gap: float
    status: str = "ok"


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple
    slope: float
    slope_ci: tuple
    sign_of_phi: int
    clamped_fraction: float
    schedule_kind: str
    schedule_c: float


def _fit_slope(ns, gaps):
    x = np.log(np.asarray(ns))
    y = np.log(np.asarray(gaps))
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope = float(coef[0])
    dof = max(len(x) - 2, 1)
    sigma2 = float(res[0]) / dof if res.size else 0.0
    sx = float(np.sum((x - x.mean()) ** 2))
    stderr = math.sqrt(sigma2 / sx) if sx > 0 else 0.0
    return slope, (slope - 2.0 * stderr, slope + 2.0 * stderr)


def sweep(
    u0: Field,
    m: int,
    f: DegeneracyFunction,
    schedule: Schedule,
    t_eval: float,
    n_values,
    dt_init: float = 2e-5,
    dealias: bool = False,
    energy_tol: float = 1e-8,
    time_nodes: int = 41,
    clamp_floor: float | None = None,
    workers: int = 1,
) -> ConvergenceTable:
    """One solver run per schedule point, measured against the cached linear
    solution; the correction field is computed once and its sign is resolved
    on the smallest successful n.

    ``n_values`` hold the schedule's own parameter (n for ``eps_of_n``, eps
    for ``n_of_eps``); the coupled pair is derived per row, with 0 meaning
    the degeneracy-off control row.  Row failures (stiffness, blow-up, decay
    assertion, schedule range) mark the row failed and the sweep continues.
    Rows are sorted by n descending.
    """
    params = sorted(set(float(v) for v in n_values), reverse=True)
    u_lin = phe_solve(u0, m, t_eval)
    quad_times = np.linspace(0.0, t_eval, time_nodes)
    phi_raw = correction_phi(
        linear_trajectory(u0, m, quad_times), m, f, t_eval,
        time_nodes=time_nodes, clamp_floor=clamp_floor,
    )

    def run_row(v):
        n_eff, eps = (0.0, 1.0) if v == 0.0 else schedule_eval(schedule, v)
        path = RegPath(f, n_eff, "simple")
        config = SolverConfig(
            m=m, path=path, eps=eps, dt_init=dt_init, t_final=t_eval,
            dealias=dealias, energy_tol=energy_tol, report_stride=10**9,
        )
        traj = solve(u0, config)
        return n_eff, eps, traj.snapshots[-1]

    results = {}
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = {pool.submit(run_row, v): v for v in params}
        for fut, v in futures.items():
            try:
                results[v] = ("ok", fut.result())
            except (StiffnessError, BlowupError, DecayAssertionError, ScheduleRangeError, ValueError) as err:
                results[v] = ("failed: " + str(err), None)

    ok_payloads = [results[v][1] for v in params if results[v][0] == "ok" and results[v][1][0] > 0]
    if ok_payloads:
        smallest = min(ok_payloads, key=lambda p: p[0])
        phi = resolve_phi_sign(smallest[2], u_lin, phi_raw)
    else:
        phi = phi_raw

    rows = []
    for v in params:
        status, payload = results[v]
        if payload is None:
            rows.append(ConvergenceRow(v, float("nan"), t_eval, float("nan"), float("nan"), float("nan"), status))
            continue
        n_eff, eps, u_n = payload
        diff = u_n.values - u_lin.values
        rows.append(
            ConvergenceRow(
                n=n_eff,
                eps=eps,
                t_eval=t_eval,
                l2_gap=l2_norm(Field(u0.grid, diff)),
                sup_gap=float(np.max(np.abs(diff))),
                correction_gap=branching_residual(u_n, u_lin, phi, n_eff).linear_gap,
                status=status,
            )
        )
    rows.sort(key=lambda r: (-(r.n if np.isfinite(r.n) else float("inf")),))

    ok_rows = [r for r in rows if r.status == "ok" and r.n > 0]
    fit_rows = ok_rows[-3:] if len(ok_rows) >= 3 else ok_rows
    if len(fit_rows) >= 2:
        slope, ci = _fit_slope([r.n for r in fit_rows], [r.l2_gap for r in fit_rows])
    else:
        slope, ci = float("nan"), (float("nan"), float("nan"))
    return ConvergenceTable(
        rows=tuple(rows),
        slope=slope,
        slope_ci=ci,
        sign_of_phi=phi.sign,
        clamped_fraction=phi.clamped_fraction,
        schedule_kind=schedule.kind,
        schedule_c=schedule.c,
    )


# ---------------------------------------------------------------------------
# perturbation-size bookkeeping


@dataclass(frozen=True)
class PerturbationReport:
    n: float
    eps: float
    n_ln_f_eps: float
    thresholds: tuple
    sup_theta_degenerate: tuple
    sup_theta_far: tuple
    theta_at_zero: float


def perturbation_smallness_report(trajectory, f: DegeneracyFunction, n: float, eps: float, thresholds=(1e-2, 1e-1)) -> PerturbationReport:
    """Measure Theta = 1 - f^n over the space-time grid, split at each
    threshold t_i into the near-degenerate set {eps^2 + u^2 <= t_i} and its
    complement, together with the schedule product n |ln f(eps)|."""
    if any(t_i <= 0 for t_i in thresholds):
        raise ValueError("thresholds must be positive")
    snaps = trajectory.snapshots if isinstance(trajectory, Trajectory) else tuple(trajectory)
    path = RegPath(f, n, "simple")
    sup_deg, sup_far = [], []
    all_theta = [np.asarray(theta(path, eps, s.values)) for s in snaps]
    shifted = [eps**2 + s.values**2 for s in snaps]
    for t_i in thresholds:
        deg_max, far_max = 0.0, 0.0
        for th, sq in zip(all_theta, shifted):
            on = sq <= t_i
            if np.any(on):
                deg_max = max(deg_max, float(np.max(th[on])))
            if np.any(~on):
                far_max = max(far_max, float(np.max(th[~on])))
        sup_deg.append(deg_max)
        sup_far.append(far_max)
    product = n * abs(math.log(f(eps))) if 0 < f(eps) < 1 else 0.0
    return PerturbationReport(
        n=n,
        eps=eps,
        n_ln_f_eps=product,
        thresholds=tuple(thresholds),
        sup_theta_degenerate=tuple(sup_deg),
        sup_theta_far=tuple(sup_far),
        theta_at_zero=float(theta(path, eps, 0.0)),
    )


def very_weak_residual(trajectory, m: int, mode_count: int = 3) -> float:
    """Residual of the linear very-weak identity against low-mode windows.

    Test functions are cos/sin(k pi x_1 / L) times a temporal window
    vanishing at both endpoints; the residual
    | int int phi_t u + (-1)^m int int grad phi . grad Delta^(m-1) u |
    is evaluated by trapezoid over the trajectory snapshots and maximized
    over the test set.  It vanishes for the linear flow and shrinks along a
    homotopy sweep.
    """
    snaps = trajectory.snapshots if isinstance(trajectory, Trajectory) else tuple(trajectory)
    if len(snaps) < 3:
        raise ValueError("need at least three snapshots for the time quadrature")
    grid = snaps[0].grid
    times = np.array([s.time_tag for s in snaps])
    T = times[-1]
    from .gridfield import coordinates, gradient, laplacian_power

    x1 = np.broadcast_to(coordinates(grid)[0], grid.shape)
    sign = (-1.0) ** m
    worst = 0.0
    for k in range(1, mode_count + 1):
        kappa = k * np.pi / grid.half_width
        for spatial in (np.cos(kappa * x1), np.sin(kappa * x1)):
            time_part = np.sin(np.pi * times / T) ** 2
            dtime_part = 2.0 * np.sin(np.pi * times / T) * np.cos(np.pi * times / T) * np.pi / T
            term1 = np.empty(len(snaps))
            term2 = np.empty(len(snaps))
            dphi = gradient(Field(grid, spatial))
            for j, s in enumerate(snaps):
                term1[j] = dtime_part[j] * grid.cell_volume * float(np.sum(spatial * s.values))
                gv = gradient(laplacian_power(s, m - 1))
                dot = sum(a * b for a, b in zip(dphi.components, gv.components))
                term2[j] = time_part[j] * grid.cell_volume * float(np.sum(dot))
            resid = abs(np.trapezoid(term1 + sign * term2, times))
            worst = max(worst, resid)
    return worst


@dataclass(frozen=True)
class PathDependenceReport:
    n: float
    eps: float
    gap_l2: float
    floor_l2: float
    within_10x_floor: bool


def path_dependence_report(
    u0: Field,
    m: int,
    f: DegeneracyFunction,
    n: float,
    eps: float,
    t_eval: float,
    dt_init: float = 2e-5,
    dealias: bool = False,
) -> PathDependenceReport:
    """Gap between the full-path and simple-path solutions at (n, eps).

    The discretization floor is the solver-vs-multiplier gap of the n = 0
    run; whether the limits depend on the regularization path is an open
    matter, so the measured gap is reported either way.
    """
    outs = {}
    for variant in ("full", "simple"):
        config = SolverConfig(
            m=m, path=RegPath(f, n, variant), eps=eps, dt_init=dt_init,
            t_final=t_eval, dealias=dealias, report_stride=10**9,
        )
        outs[variant] = solve(u0, config).snapshots[-1]
    config0 = SolverConfig(
        m=m, path=RegPath(f, 0.0, "simple"), eps=1.0, dt_init=dt_init,
        t_final=t_eval, dealias=dealias, report_stride=10**9,
    )
    u_zero = solve(u0, config0).snapshots[-1]
    floor = l2_norm(Field(u0.grid, u_zero.values - phe_solve(u0, m, t_eval).values))
    gap = l2_norm(Field(u0.grid, outs["full"].values - outs["simple"].values))
    return PathDependenceReport(
        n=n, eps=eps, gap_l2=gap, floor_l2=floor, within_10x_floor=gap <= 10.0 * floor
    )


# ---------------------------------------------------------------------------
# serialization


def write_table_csv(path, table: ConvergenceTable) -> None:
    lines = ["n,eps,t_eval,l2_gap,sup_gap,correction_gap,status"]
    for r in table.rows:
        lines.append(f"{r.n!r},{r.eps!r},{r.t_eval!r},{r.l2_gap!r},{r.sup_gap!r},{r.correction_gap!r},{r.status}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_summary_json(path, table: ConvergenceTable) -> None:
    payload = {
        "slope": table.slope,
        "slope_ci": list(table.slope_ci),
        "sign_of_phi": table.sign_of_phi,
        "clamped_fraction": table.clamped_fraction,
        "schedule": {"kind": table.schedule_kind, "c": table.schedule_c},
        "rows_ok": sum(1 for r in table.rows if r.status == "ok"),
        "rows_total": len(table.rows),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_plot_data(path, table: ConvergenceTable) -> None:
    """(log10 n, log10 l2 gap) pairs for external plotting."""
    lines = ["log10_n,log10_l2_gap"]
    for r in table.rows:
        if r.status == "ok" and r.n > 0 and r.l2_gap > 0:
            lines.append(f"{math.log10(r.n)!r},{math.log10(r.l2_gap)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
