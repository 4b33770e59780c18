"""Grid, field, and spectral-operator tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyheat.gridfield import (
    DecayAssertionError,
    Field,
    GridMismatchError,
    VectorField,
    WeightSpec,
    assert_boundary_decay,
    band_limited,
    boundary_shell_max,
    bump,
    coordinates,
    dealias_mask,
    divergence,
    gradient,
    inner,
    integrate,
    l2_norm,
    laplacian_power,
    make_field,
    make_grid,
    read_phf1,
    spectral_tail_fraction,
    weighted_l2_norm,
    write_phf1,
)


@pytest.fixture(scope="module")
def grid1():
    return make_grid(1, 20.0, 256)


@pytest.fixture(scope="module")
def grid2():
    return make_grid(2, 10.0, 128)


def _gaussian(grid, scale=1.0):
    r2 = sum(np.broadcast_to(x, grid.shape) ** 2 for x in coordinates(grid))
    return make_field(grid, np.exp(-r2 / scale))


class TestGridSpec:
    def test_spacing(self):
        assert make_grid(1, 20.0, 256).dx == 0.15625

    def test_point_count_2d(self):
        grid = make_grid(2, 10.0, 128)
        assert np.prod(grid.shape) == 16384

    def test_rejects_odd_or_tiny_m(self):
        with pytest.raises(ValueError, match="even >= 8"):
            make_grid(1, 20.0, 7)
        with pytest.raises(ValueError, match="even >= 8"):
            make_grid(1, 20.0, 6)

    def test_rejects_bad_half_width_and_dim(self):
        with pytest.raises(ValueError):
            make_grid(1, -1.0, 64)
        with pytest.raises(ValueError):
            make_grid(3, 10.0, 64)

    def test_wavevector_set(self, grid1):
        from polyheat.gridfield import wavevectors

        k = np.sort(np.asarray(wavevectors(grid1)[0]).ravel())
        expected = np.sort(np.pi * np.arange(-128, 128) / 20.0)
        assert np.allclose(k, expected, atol=1e-14)


class TestFieldTypes:
    def test_rejects_nan(self, grid1):
        vals = np.zeros(grid1.shape)
        vals[3] = np.nan
        with pytest.raises(FloatingPointError):
            make_field(grid1, vals)

    def test_rejects_shape_mismatch(self, grid1):
        with pytest.raises(ValueError):
            make_field(grid1, np.zeros(12))

    def test_values_immutable(self, grid1):
        f = make_field(grid1, np.zeros(grid1.shape))
        with pytest.raises(ValueError):
            f.values[0] = 1.0

    def test_vector_component_count(self, grid2):
        with pytest.raises(ValueError):
            VectorField(grid2, (np.zeros(grid2.shape),))

    def test_weight_spec_alpha_range(self):
        with pytest.raises(ValueError):
            WeightSpec(a=1.0, alpha=0.9, sign=+1)
        with pytest.raises(ValueError):
            WeightSpec(a=1.0, alpha=2.1, sign=-1)
        WeightSpec(a=1.0, alpha=2.0, sign=+1)


class TestLaplacianPower:
    def test_identity_at_zero(self, grid1):
        u = _gaussian(grid1)
        assert laplacian_power(u, 0) is u

    def test_sine_eigenfunction(self, grid1):
        x = np.broadcast_to(coordinates(grid1)[0], grid1.shape)
        u = make_field(grid1, np.sin(np.pi * x / 20.0))
        lap = laplacian_power(u, 1)
        assert np.max(np.abs(lap.values + (np.pi / 20.0) ** 2 * u.values)) <= 1e-10

    def test_gaussian_bilaplacian_against_symbolic(self, grid1):
        # independent oracle: d^4/dx^4 e^(-x^2) computed symbolically
        import sympy

        xs = sympy.symbols("x")
        expr = sympy.diff(sympy.exp(-(xs**2)), xs, 4)
        poly = sympy.Poly(sympy.simplify(expr * sympy.exp(xs**2)), xs)
        assert poly.all_coeffs() == [16, 0, -48, 0, 12]

        x = np.broadcast_to(coordinates(grid1)[0], grid1.shape)
        u = make_field(grid1, np.exp(-(x**2)))
        expected = (12.0 - 48.0 * x**2 + 16.0 * x**4) * np.exp(-(x**2))
        assert np.max(np.abs(laplacian_power(u, 2).values - expected)) <= 1e-6

    def test_composition(self, grid1):
        u = _gaussian(grid1, scale=4.0)
        once = laplacian_power(laplacian_power(u, 1), 2)
        direct = laplacian_power(u, 3)
        assert l2_norm(Field(grid1, once.values - direct.values)) <= 1e-10 * l2_norm(direct)

    def test_mean_zero_for_positive_powers(self, grid1):
        u = _gaussian(grid1)
        for k in (1, 2, 3):
            assert abs(integrate(laplacian_power(u, k))) <= 1e-12

    def test_rejects_negative_power(self, grid1):
        with pytest.raises(ValueError):
            laplacian_power(_gaussian(grid1), -1)


class TestGradientDivergence:
    def test_gradient_of_constant(self, grid2):
        g = gradient(make_field(grid2, np.ones(grid2.shape)))
        for c in g.components:
            assert np.max(np.abs(c)) <= 1e-14

    @pytest.mark.parametrize("dim", [1, 2])
    def test_div_grad_is_laplacian(self, dim):
        grid = make_grid(dim, 10.0, 128)
        u = _gaussian(grid)
        lhs = divergence(gradient(u))
        rhs = laplacian_power(u, 1)
        assert np.max(np.abs(lhs.values - rhs.values)) <= 1e-12

    def test_divergence_integrates_to_zero(self, grid2):
        u = _gaussian(grid2)
        v = gradient(u)
        assert abs(integrate(divergence(v))) <= 1e-12

    def test_grid_mismatch(self, grid1):
        with pytest.raises(GridMismatchError):
            inner(_gaussian(grid1), _gaussian(make_grid(1, 20.0, 128)))


class TestIntegrate:
    def test_constant(self):
        grid = make_grid(1, 20.0, 64)
        assert integrate(make_field(grid, np.full(grid.shape, 3.0))) == pytest.approx(120.0)

    def test_gaussian(self, grid1):
        assert integrate(_gaussian(grid1)) == pytest.approx(np.sqrt(np.pi), abs=1e-10)

    def test_parseval(self, grid1):
        u = _gaussian(grid1, scale=2.5)
        phys = l2_norm(u)
        fh = np.fft.fftn(u.values)
        spec = np.sqrt(grid1.cell_volume / grid1.points_per_dim * np.sum(np.abs(fh) ** 2))
        assert abs(phys - spec) <= 1e-12 * phys


class TestWeightedNorm:
    def test_zero_field(self, grid1):
        assert weighted_l2_norm(make_field(grid1, np.zeros(grid1.shape)), WeightSpec(1.0, 1.5, -1)) == 0.0

    def test_decaying_weight_monotone_in_a(self, grid1):
        one = make_field(grid1, np.ones(grid1.shape))
        norms = [weighted_l2_norm(one, WeightSpec(a, 1.5, -1)) for a in (0.5, 1.0, 2.0, 4.0)]
        assert all(n1 > n2 for n1, n2 in zip(norms, norms[1:]))

    def test_gaussian_growing_weight_closed_form(self, grid1):
        # int e^(-2x^2) e^(x^2/4) dx = sqrt(pi / (7/4)); oracle via quadrature
        from scipy.integrate import quad

        oracle, err = quad(lambda x: np.exp(-2.0 * x**2 + 0.25 * np.abs(x) ** 2), -20.0, 20.0)
        assert err < 1e-8
        assert oracle == pytest.approx(np.sqrt(np.pi / 1.75), abs=1e-12)
        got = weighted_l2_norm(_gaussian(grid1), WeightSpec(0.25, 2.0, +1))
        assert got == pytest.approx(np.sqrt(oracle), abs=1e-10)

    def test_overflow_guard(self):
        grid = make_grid(1, 50.0, 64)
        with pytest.raises(OverflowError):
            weighted_l2_norm(make_field(grid, np.ones(grid.shape)), WeightSpec(1.0, 2.0, +1))


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=1, max_value=6), st.integers(min_value=1, max_value=6), st.randoms())
def test_gradient_divergence_adjoint(ku, kv, rnd):
    """<grad u, v> = -<u, div v> for random low-mode trig fields."""
    grid = make_grid(1, 10.0, 64)
    x = np.broadcast_to(coordinates(grid)[0], grid.shape)
    u = make_field(grid, np.sin(ku * np.pi * x / 10.0) + 0.3 * np.cos(2 * np.pi * x / 10.0))
    v = VectorField(grid, (np.cos(kv * np.pi * x / 10.0) + rnd.uniform(-1, 1),))
    du = gradient(u)
    lhs = grid.cell_volume * np.sum(du.components[0] * v.components[0])
    rhs = -grid.cell_volume * np.sum(u.values * divergence(v).values)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


class TestDecayAssertion:
    def test_passes_for_compact_bump(self, grid1):
        assert_boundary_decay(bump(grid1, 1.0, 3.0))

    def test_fires_for_wide_field(self, grid1):
        with pytest.raises(DecayAssertionError):
            assert_boundary_decay(make_field(grid1, np.ones(grid1.shape)))

    def test_shell_max_value(self, grid1):
        x = np.broadcast_to(coordinates(grid1)[0], grid1.shape)
        vals = np.where(np.abs(x) > 18.0, 0.5, 0.0)
        assert boundary_shell_max(make_field(grid1, vals)) == 0.5


class TestBump:
    def test_support_and_peak(self, grid1):
        u = bump(grid1, amplitude=2.0, width=3.0)
        x = np.broadcast_to(coordinates(grid1)[0], grid1.shape)
        assert np.max(u.values) == pytest.approx(2.0, abs=1e-12)
        assert np.all(u.values[np.abs(x) >= 3.0] == 0.0)

    def test_steepness_improves_tail(self):
        grid = make_grid(1, 24.0, 256)
        t1 = spectral_tail_fraction(bump(grid, 1.0, 4.0, steepness=1.0))
        t6 = spectral_tail_fraction(bump(grid, 1.0, 4.0, steepness=6.0))
        assert t6 < t1 * 1e-2

    def test_band_limited_kills_tail(self, grid1):
        u = band_limited(bump(grid1, 1.0, 2.0))
        assert spectral_tail_fraction(u) <= 1e-30

    def test_2d_center(self, grid2):
        u = bump(grid2, 1.0, 2.0, center=(1.0, -1.0))
        i = np.unravel_index(np.argmax(u.values), u.values.shape)
        xs = [np.broadcast_to(c, grid2.shape)[i] for c in coordinates(grid2)]
        assert xs[0] == pytest.approx(1.0, abs=grid2.dx)
        assert xs[1] == pytest.approx(-1.0, abs=grid2.dx)


class TestPhf1:
    def test_scalar_roundtrip(self, tmp_path, grid1):
        u = bump(grid1, 1.3, 2.0)
        u = Field(grid1, u.values, 0.25)
        path = tmp_path / "snap.phf1"
        write_phf1(path, u)
        back = read_phf1(path)
        assert back.grid == grid1
        assert back.time_tag == 0.25
        assert np.array_equal(back.values, u.values)

    def test_vector_roundtrip(self, tmp_path, grid2):
        v = gradient(_gaussian(grid2))
        path = tmp_path / "vec.phf1"
        write_phf1(path, v)
        back = read_phf1(path)
        assert isinstance(back, VectorField)
        for a, b in zip(back.components, v.components):
            assert np.array_equal(a, b)

    def test_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "junk.phf1"
        path.write_bytes(b"JUNK" + b"\x00" * 64)
        with pytest.raises(ValueError, match="magic"):
            read_phf1(path)

    def test_rejects_truncated_payload(self, tmp_path, grid1):
        path = tmp_path / "short.phf1"
        write_phf1(path, bump(grid1, 1.0, 2.0))
        raw = path.read_bytes()
        path.write_bytes(raw[:-16])
        with pytest.raises(ValueError, match="payload"):
            read_phf1(path)

    def test_dealias_mask_shape(self, grid2):
        mask = dealias_mask(grid2)
        assert mask.shape == grid2.shape
        assert mask[0, 0]
