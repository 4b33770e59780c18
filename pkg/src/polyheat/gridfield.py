"""Periodic computational box, scalar/vector fields, and exact spectral operators.

The box [-L, L)^N (N in {1, 2}) with M uniform points per dimension stands in
for the whole space; everything downstream assumes the data it touches decays
well inside the boundary, and the helpers here let callers assert that.

All differential operators are Fourier multipliers on the torus, so gradient,
divergence and integer Laplacian powers are exact on band-limited data and
conservation identities (zero integral of any divergence, adjointness of
gradient and divergence) hold to round-off.

Transform convention: forward FFT unnormalized, inverse carries 1/M^N
(numpy's default).  Wavevectors are pi*k/L for k = -M/2 .. M/2-1.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "GridSpec",
    "Field",
    "VectorField",
    "WeightSpec",
    "GridMismatchError",
    "DecayAssertionError",
    "make_grid",
    "make_field",
    "coordinates",
    "radius",
    "wavevectors",
    "k_squared",
    "dealias_mask",
    "laplacian_power",
    "gradient",
    "divergence",
    "integrate",
    "inner",
    "l2_norm",
    "weighted_l2_norm",
    "spectral_tail_fraction",
    "band_limited",
    "boundary_shell_max",
    "assert_boundary_decay",
    "bump",
    "write_phf1",
    "read_phf1",
]


class GridMismatchError(ValueError):
    """Two operands live on different grids."""


class DecayAssertionError(RuntimeError):
    """A field carries non-negligible mass in the boundary shell |x| > 0.9 L."""


@dataclass(frozen=True)
class GridSpec:
    """Periodic box [-L, L)^N sampled with M points per dimension.

    Parameters
    ----------
    dim : int
        Spatial dimension, 1 or 2.
    half_width : float
        L > 0; the box is [-L, L)^N.
    points_per_dim : int
        M, even and >= 8.  Powers of two keep the FFTs fast.
    """

    dim: int
    half_width: float
    points_per_dim: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if not self.half_width > 0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")
        m = self.points_per_dim
        if m % 2 != 0 or m < 8:
            raise ValueError("points_per_dim must be even >= 8")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.points_per_dim

    @property
    def shape(self) -> tuple:
        return (self.points_per_dim,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    @property
    def box_volume(self) -> float:
        return (2.0 * self.half_width) ** self.dim


def make_grid(dim: int, half_width: float, points_per_dim: int) -> GridSpec:
    """Validated grid constructor; see :class:`GridSpec` for the invariants."""
    return GridSpec(dim=dim, half_width=float(half_width), points_per_dim=int(points_per_dim))


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Field:
    """Real scalar field sampled on a grid; immutable after construction."""

    grid: GridSpec
    values: np.ndarray
    time_tag: float | None = None

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise FloatingPointError("field contains non-finite values")
        object.__setattr__(self, "values", _freeze(self.values))


@dataclass(frozen=True)
class VectorField:
    """N-component real vector field on a grid (one array per component)."""

    grid: GridSpec
    components: tuple

    def __post_init__(self):
        if len(self.components) != self.grid.dim:
            raise ValueError("component count must equal grid.dim")
        comps = []
        for c in self.components:
            if c.shape != self.grid.shape:
                raise ValueError("component shape does not match grid")
            if not np.all(np.isfinite(c)):
                raise FloatingPointError("vector field contains non-finite values")
            comps.append(_freeze(c))
        object.__setattr__(self, "components", tuple(comps))


@dataclass(frozen=True)
class WeightSpec:
    """Exponential weight exp(sign * a * |x|^alpha) with alpha in (1, 2]."""

    a: float
    alpha: float
    sign: int

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("weight constant a must be positive")
        if not (1.0 < self.alpha <= 2.0):
            raise ValueError(f"alpha must lie in (1, 2], got {self.alpha}")
        if self.sign not in (+1, -1):
            raise ValueError("sign must be +1 (growing) or -1 (decaying)")


def make_field(grid: GridSpec, values: np.ndarray, time_tag: float | None = None) -> Field:
    return Field(grid=grid, values=np.asarray(values, dtype=np.float64), time_tag=time_tag)


# ---------------------------------------------------------------------------
# cached per-grid geometry


@lru_cache(maxsize=64)
def _axis_coordinate(grid: GridSpec) -> np.ndarray:
    m, length = grid.points_per_dim, grid.half_width
    return _freeze(-length + grid.dx * np.arange(m))


@lru_cache(maxsize=64)
def _axis_wavenumber(grid: GridSpec) -> np.ndarray:
    # pi*k/L in FFT order, Nyquist entry at index M/2 carries k = -M/2.
    return _freeze(2.0 * np.pi * np.fft.fftfreq(grid.points_per_dim, d=grid.dx))


@lru_cache(maxsize=64)
def _axis_wavenumber_odd(grid: GridSpec) -> np.ndarray:
    # For odd-order derivatives the unpaired Nyquist mode is zeroed so that
    # derivatives of real fields stay real (see e.g. Johnson's FFT notes).
    k = np.array(_axis_wavenumber(grid))
    k[grid.points_per_dim // 2] = 0.0
    return _freeze(k)


def _broadcast_axis(arr: np.ndarray, axis: int, dim: int) -> np.ndarray:
    shape = [1] * dim
    shape[axis] = arr.size
    return arr.reshape(shape)


def coordinates(grid: GridSpec) -> list:
    """Coordinate arrays x_i, each broadcastable to the grid shape."""
    ax = _axis_coordinate(grid)
    return [_broadcast_axis(ax, i, grid.dim) for i in range(grid.dim)]


def radius(grid: GridSpec) -> np.ndarray:
    """|x| on the grid."""
    r2 = sum(x**2 for x in coordinates(grid))
    return np.sqrt(np.broadcast_to(r2, grid.shape))


def wavevectors(grid: GridSpec, odd: bool = False) -> list:
    """Wavevector component arrays, broadcastable to the grid shape.

    With ``odd=True`` the Nyquist entries are zeroed (required for odd-order
    derivative multipliers applied to real data).
    """
    ax = _axis_wavenumber_odd(grid) if odd else _axis_wavenumber(grid)
    return [_broadcast_axis(ax, i, grid.dim) for i in range(grid.dim)]


@lru_cache(maxsize=64)
def k_squared(grid: GridSpec) -> np.ndarray:
    """|xi|^2 on the full (symmetric) wavevector set, grid-shaped."""
    ks = wavevectors(grid)
    return _freeze(np.broadcast_to(sum(k**2 for k in ks), grid.shape).copy())


@lru_cache(maxsize=64)
def dealias_mask(grid: GridSpec) -> np.ndarray:
    """Boolean 2/3-rule mask: True on retained modes."""
    m = grid.points_per_dim
    idx = np.rint(np.fft.fftfreq(m) * m).astype(int)
    keep1 = np.abs(idx) <= m // 3
    mask = keep1
    for i in range(1, grid.dim):
        mask = np.logical_and.outer(mask, keep1)
    out = np.broadcast_to(mask, grid.shape).copy()
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# spectral operators


def laplacian_power(f: Field, k: int) -> Field:
    """Exact spectral k-th power of the Laplacian; k = 0 is the identity."""
    if k < 0 or int(k) != k:
        raise ValueError("Laplacian power k must be a nonnegative integer")
    if k == 0:
        return f
    fh = np.fft.fftn(f.values)
    out = np.fft.ifftn((-k_squared(f.grid)) ** k * fh).real
    return Field(f.grid, out, f.time_tag)


def gradient(f: Field) -> VectorField:
    """Spectral gradient of a scalar field."""
    fh = np.fft.fftn(f.values)
    ks = wavevectors(f.grid, odd=True)
    comps = tuple(np.fft.ifftn(1j * ki * fh).real for ki in ks)
    return VectorField(f.grid, comps)


def divergence(v: VectorField) -> Field:
    """Spectral divergence of a vector field."""
    ks = wavevectors(v.grid, odd=True)
    acc = np.zeros(v.grid.shape, dtype=complex)
    for ki, ci in zip(ks, v.components):
        acc += 1j * ki * np.fft.fftn(ci)
    return Field(v.grid, np.fft.ifftn(acc).real)


def integrate(f: Field) -> float:
    """∫ f dx over the box: dx^N times the sample sum (exact on the torus
    for trigonometric polynomials)."""
    return float(f.grid.cell_volume * np.sum(f.values))


def inner(f: Field, g: Field) -> float:
    """Plain L^2 pairing over the box."""
    if f.grid != g.grid:
        raise GridMismatchError("inner product of fields on different grids")
    return float(f.grid.cell_volume * np.sum(f.values * g.values))


def l2_norm(f: Field) -> float:
    return float(np.sqrt(f.grid.cell_volume) * np.linalg.norm(f.values.ravel()))


def weighted_l2_norm(f: Field, weight: WeightSpec) -> float:
    """(∫ |f|^2 exp(sign*a*|x|^alpha) dx)^(1/2) over the box.

    Growing weights are rejected once a*L^alpha exceeds 600 since the weight
    would leave the representable range.
    """
    grid = f.grid
    peak = weight.a * grid.half_width**weight.alpha
    if weight.sign > 0 and peak > 600.0:
        raise OverflowError(f"weight exponent a*L^alpha = {peak:.3g} exceeds representable range (600)")
    w = np.exp(weight.sign * weight.a * radius(grid) ** weight.alpha)
    return float(np.sqrt(grid.cell_volume * np.sum(f.values**2 * w)))


def spectral_tail_fraction(f: Field) -> float:
    """Fraction of spectral energy in the dealiased (top-third) modes."""
    fh = np.fft.fftn(f.values)
    total = np.sum(np.abs(fh) ** 2)
    if total == 0.0:
        return 0.0
    tail = np.sum(np.abs(fh[~dealias_mask(f.grid)]) ** 2)
    return float(tail / total)


def band_limited(f: Field) -> Field:
    """Project onto the 2/3-rule band (zero the top-third modes).

    On the result the dealiased product rules are exact no-ops, which the
    operator-identity tests rely on.
    """
    fh = np.where(dealias_mask(f.grid), np.fft.fftn(f.values), 0.0)
    return Field(f.grid, np.fft.ifftn(fh).real, f.time_tag)


def boundary_shell_max(f: Field, shell: float = 0.9) -> float:
    """max |f| over the shell |x| > shell * L."""
    mask = radius(f.grid) > shell * f.grid.half_width
    if not np.any(mask):
        return 0.0
    return float(np.max(np.abs(f.values[mask])))


def assert_boundary_decay(f: Field, tol: float = 1e-8, shell: float = 0.9) -> None:
    """Abort if the field has not decayed below `tol` in the boundary shell.

    The periodic box only represents whole-space dynamics while the data
    stays negligible near the boundary; every output-time field must pass.
    """
    worst = boundary_shell_max(f, shell)
    if worst >= tol:
        raise DecayAssertionError(
            f"boundary shell |x| > {shell:g}*L carries magnitude {worst:.3e} >= {tol:.1e}"
            f" (t = {f.time_tag})"
        )


# ---------------------------------------------------------------------------
# initial data


def bump(
    grid: GridSpec,
    amplitude: float = 1.0,
    width: float = 1.0,
    center=None,
    steepness: float = 1.0,
) -> Field:
    """Smooth compactly supported bump exp(s - s/(1 - (|x-c|/w)^2)) on |x-c| < w.

    C-infinity with support exactly |x - c| <= w and peak value `amplitude`.
    Larger `steepness` s pushes the Fourier tail down faster, which the
    solver's smoothness precondition cares about on coarse grids.
    """
    if center is None:
        center = (0.0,) * grid.dim
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.size != grid.dim:
        raise ValueError("center must have one entry per dimension")
    r2 = sum((x - c) ** 2 for x, c in zip(coordinates(grid), center))
    r2 = np.broadcast_to(r2, grid.shape) / width**2
    vals = np.zeros(grid.shape)
    inside = r2 < 1.0
    with np.errstate(divide="ignore"):
        vals[inside] = amplitude * np.exp(steepness - steepness / (1.0 - r2[inside]))
    return Field(grid, vals, 0.0)


# ---------------------------------------------------------------------------
# PHF1 snapshot format
#
# magic 'PHF1', little-endian u32 dim, u32 M, f64 L, f64 t, u8 payload kind
# (0 scalar, 1 vector), then the payload as little-endian f64 row-major
# (vector components concatenated).

_PHF1_MAGIC = b"PHF1"
_PHF1_HEADER = struct.Struct("<4sIIddB")


def write_phf1(path, obj) -> None:
    """Serialize a Field or VectorField snapshot to the PHF1 binary format."""
    grid = obj.grid
    if isinstance(obj, Field):
        kind, payload = 0, obj.values
        t = obj.time_tag if obj.time_tag is not None else 0.0
    elif isinstance(obj, VectorField):
        kind, payload = 1, np.concatenate([c.ravel() for c in obj.components])
        t = 0.0
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} as PHF1")
    header = _PHF1_HEADER.pack(
        _PHF1_MAGIC, grid.dim, grid.points_per_dim, grid.half_width, float(t), kind
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(payload, dtype="<f8").tobytes())


def read_phf1(path):
    """Read a PHF1 snapshot back into a Field or VectorField.

    Validates the magic bytes and that the payload size matches the header.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _PHF1_HEADER.size:
        raise ValueError("PHF1 file truncated before header")
    magic, dim, m, length, t, kind = _PHF1_HEADER.unpack_from(raw)
    if magic != _PHF1_MAGIC:
        raise ValueError(f"bad magic {magic!r}, not a PHF1 file")
    grid = make_grid(dim, length, m)
    n_scalar = m**dim
    payload = np.frombuffer(raw, dtype="<f8", offset=_PHF1_HEADER.size)
    if kind == 0:
        if payload.size != n_scalar:
            raise ValueError(f"payload holds {payload.size} values, expected {n_scalar}")
        return Field(grid, payload.reshape(grid.shape).copy(), t)
    if kind == 1:
        if payload.size != dim * n_scalar:
            raise ValueError(f"payload holds {payload.size} values, expected {dim * n_scalar}")
        comps = tuple(
            payload[i * n_scalar : (i + 1) * n_scalar].reshape(grid.shape).copy() for i in range(dim)
        )
        return VectorField(grid, comps)
    raise ValueError(f"unknown payload kind {kind}")
