"""Degenerate mobility f, its powers, and the two regularization paths.

Admissible nonlinearities are continuous, strictly increasing, positive and
bounded with f(0) = 0; the built-in kinds are

    tanh            f(t) = tanh(t)
    rational        f(t) = t / (1 + t)
    exp_saturating  f(t) = 1 - exp(-t)
    power           f(t) = t^kappa     (unbounded; bound taken on [0, t_max])
    spline          monotone PCHIP through user knots

The full path  phi_eps(u) = f^n(eps) + (1 - eps) f^n(sqrt(eps^2 + u^2))
interpolates between the degenerate coefficient (eps -> 0) and a constant,
staying uniformly parabolic for eps > 0.  The simple path
psi_eps(u) = f^n(sqrt(eps^2 + u^2)) drives the small-n branching analysis via
Theta = 1 - psi_eps and the first-order expansion (1 - f^n)/n -> -ln f.

Powers f^n are evaluated in log space so that tiny arguments underflow to an
exact zero (below e^-700) instead of producing spurious denormals, and n = 0
yields exactly 1 everywhere, including at the degeneracy point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DegeneracyFunction",
    "RegPath",
    "degeneracy_function",
    "f_eval",
    "f_pow_n",
    "phi_eps",
    "psi_eps",
    "theta",
    "reg_coefficient",
    "coefficient_bound",
    "log_expansion_residual",
]

_KINDS = ("tanh", "rational", "exp_saturating", "power", "spline")
_ADMISSIBILITY_SAMPLES = 10_000


@dataclass(frozen=True)
class DegeneracyFunction:
    """One admissible nonlinearity; checked on 1e4 sample points at build time."""

    kind: str
    params: dict = field(default_factory=dict)
    t_max: float = 10.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown degeneracy kind {self.kind!r}; choose from {_KINDS}")
        if self.kind == "power" and not self.params.get("kappa", 0) > 0:
            raise ValueError("power kind needs kappa > 0")
        if self.kind == "spline":
            ts = np.asarray(self.params["knots"], dtype=float)
            fs = np.asarray(self.params["values"], dtype=float)
            if ts[0] != 0.0 or fs[0] != 0.0:
                raise ValueError("spline must start at f(0) = 0")
            if np.any(np.diff(ts) <= 0) or np.any(np.diff(fs) <= 0):
                raise ValueError("spline knots and values must be strictly increasing")
            from scipy.interpolate import PchipInterpolator

            object.__setattr__(self, "_spline", PchipInterpolator(ts, fs, extrapolate=False))
            object.__setattr__(self, "t_max", float(ts[-1]))
        self._check_admissible()

    @property
    def unbounded(self) -> bool:
        return self.kind == "power"

    @property
    def bound(self) -> float:
        """sup f: 1 for the saturating kinds, f(t_max) for the power kind."""
        if self.kind in ("tanh", "rational", "exp_saturating"):
            return 1.0
        if self.kind == "power":
            return float(self.t_max ** self.params["kappa"])
        return float(np.asarray(self.params["values"], dtype=float)[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("f is defined on t >= 0; callers pass |u|")
        if self.kind == "tanh":
            out = np.tanh(t)
        elif self.kind == "rational":
            out = t / (1.0 + t)
        elif self.kind == "exp_saturating":
            out = -np.expm1(-t)
        elif self.kind == "power":
            out = t ** self.params["kappa"]
        else:
            out = np.where(t <= self.t_max, self._spline(np.minimum(t, self.t_max)), self.bound)
        return out if out.ndim else float(out)

    def inverse(self, y: float) -> float:
        """f^{-1}(y) for y in the range of f (monotonicity makes it unique)."""
        if y < 0 or y >= self.bound:
            raise ValueError(f"inverse target {y:g} outside the range [0, {self.bound:g})")
        if self.kind == "tanh":
            return float(np.arctanh(y))
        if self.kind == "rational":
            return y / (1.0 - y)
        if self.kind == "exp_saturating":
            return float(-np.log1p(-y))
        if self.kind == "power":
            return float(y ** (1.0 / self.params["kappa"]))
        from scipy.optimize import brentq

        return float(brentq(lambda t: self(t) - y, 0.0, self.t_max))

    def _check_admissible(self):
        ts = np.linspace(0.0, self.t_max, _ADMISSIBILITY_SAMPLES)
        vals = np.asarray(self(ts))
        if vals[0] != 0.0:
            raise ValueError("f(0) must be exactly 0")
        if np.any(np.diff(vals) <= 0):
            raise ValueError("f must be strictly increasing on [0, t_max]")
        if np.any(vals[1:] <= 0):
            raise ValueError("f must be positive for t > 0")
        if np.any(vals > self.bound * (1 + 1e-12)):
            raise ValueError("f exceeds its stated bound")


def degeneracy_function(kind: str, t_max: float = 10.0, **params) -> DegeneracyFunction:
    return DegeneracyFunction(kind=kind, params=params, t_max=t_max)


@dataclass(frozen=True)
class RegPath:
    """A nonlinearity f with exponent n and a regularization variant."""

    f: DegeneracyFunction
    n: float
    variant: str = "full"

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("exponent n must be nonnegative")
        if self.variant not in ("full", "simple"):
            raise ValueError("variant must be 'full' or 'simple'")


def f_eval(f: DegeneracyFunction, t):
    """f(t) with the domain check; vectorized."""
    return f(t)


def f_pow_n(f: DegeneracyFunction, n: float, t):
    """f(t)^n = exp(n ln f(t)), with exact 0 below the underflow cut e^-700.

    n = 0 gives exactly 1 everywhere (the degeneracy is switched off).
    """
    vals = np.asarray(f(t), dtype=float)
    if n == 0:
        out = np.ones_like(vals)
        return out if out.ndim else float(out)
    out = np.zeros_like(vals)
    pos = vals > 0
    with np.errstate(divide="ignore"):
        expo = n * np.log(vals[pos])
    out[pos] = np.where(expo < -700.0, 0.0, np.exp(np.maximum(expo, -700.0)))
    return out if out.ndim else float(out)


def _check_eps(eps: float, lo: float) -> None:
    if not (lo <= eps <= 1.0):
        raise ValueError(f"eps must lie in ({'0' if lo == 0 else '0'}, 1], got {eps:g}")


def phi_eps(path: RegPath, eps: float, u):
    """Full path f^n(eps) + (1 - eps) f^n(sqrt(eps^2 + u^2)); eps in (0, 1]."""
    if not (0.0 < eps <= 1.0):
        raise ValueError(f"eps must lie in (0, 1], got {eps:g}")
    if path.variant != "full":
        raise ValueError("phi_eps is the full-path coefficient; path variant is 'simple'")
    u = np.asarray(u, dtype=float)
    base = f_pow_n(path.f, path.n, eps)
    out = base + (1.0 - eps) * f_pow_n(path.f, path.n, np.sqrt(eps**2 + u**2))
    return out if np.ndim(out) else float(out)


def psi_eps(path: RegPath, eps: float, u):
    """Simple path f^n(sqrt(eps^2 + u^2)).

    eps = 0 is admitted here (the branching expansion evaluates the path at
    its degenerate endpoint), unlike the full path.
    """
    if not (0.0 <= eps <= 1.0):
        raise ValueError(f"eps must lie in [0, 1], got {eps:g}")
    if path.variant != "simple":
        raise ValueError("psi_eps is the simple-path coefficient; path variant is 'full'")
    u = np.asarray(u, dtype=float)
    out = f_pow_n(path.f, path.n, np.sqrt(eps**2 + u**2))
    return out if np.ndim(out) else float(out)


def theta(path: RegPath, eps: float, u):
    """Perturbation size Theta = 1 - psi_eps(u)."""
    return 1.0 - psi_eps(path, eps, u)


def reg_coefficient(path: RegPath, eps: float, u):
    """The parabolic coefficient of the path's variant, vectorized over u."""
    return phi_eps(path, eps, u) if path.variant == "full" else psi_eps(path, eps, u)


def coefficient_bound(path: RegPath, eps: float) -> float:
    """Upper bound for the coefficient over all u (full: f^n(eps) + C_f^n)."""
    cf_n = f_pow_n(path.f, path.n, path.f.t_max) if path.f.unbounded else path.f.bound**path.n
    if path.variant == "full":
        return float(f_pow_n(path.f, path.n, eps) + cf_n)
    return float(cf_n)


def log_expansion_residual(f: DegeneracyFunction, n: float, t_grid, c0: float = 1e-3) -> float:
    """sup over {f >= c0} of |(1 - f^n)/n + ln f|, the first-order defect of
    1 - f^n = -n ln f (1 + o(n)).  O(n) on any set bounded away from f = 0."""
    if n <= 0:
        raise ValueError("the expansion residual needs n > 0")
    vals = np.asarray(f(np.asarray(t_grid, dtype=float)))
    mask = vals >= c0
    if not np.any(mask):
        return 0.0
    fv = vals[mask]
    return float(np.max(np.abs((1.0 - f_pow_n_values(fv, n)) / n + np.log(fv))))


def f_pow_n_values(vals: np.ndarray, n: float) -> np.ndarray:
    """f^n from precomputed f values (same underflow policy as f_pow_n)."""
    vals = np.asarray(vals, dtype=float)
    if n == 0:
        return np.ones_like(vals)
    out = np.zeros_like(vals)
    pos = vals > 0
    with np.errstate(divide="ignore"):
        expo = n * np.log(vals[pos])
    out[pos] = np.where(expo < -700.0, 0.0, np.exp(np.maximum(expo, -700.0)))
    return out
