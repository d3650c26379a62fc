from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fieldlab.lattice import (
    LatticeGrid,
    ScalarLatticeField,
    SlabRegion,
    VectorLatticeField,
    central_difference,
    divergence,
    gauss_defect,
    load_field,
    partial,
    save_field,
    spacetime_grid,
    spatial_integral,
    surface_flux,
    volume_integral,
)


def grid2(n: int = 32, nt: int = 16, L: float = 2 * math.pi, dt: float | None = None) -> LatticeGrid:
    return spacetime_grid((n,), (L,), dt if dt is not None else L / n / 2, nt - 1)


def scalar(g: LatticeGrid, f) -> ScalarLatticeField:
    return ScalarLatticeField(g, np.broadcast_to(f(*[g.coordinate(m) for m in range(g.dim)]), g.shape).copy())


def vector(g: LatticeGrid, *fs) -> VectorLatticeField:
    return VectorLatticeField(g, np.stack([np.broadcast_to(f(*[g.coordinate(m) for m in range(g.dim)]), g.shape) for f in fs]))


# -- grid validation -------------------------------------------------------------

def test_grid_rejects_tiny_axes_and_bad_spacing():
    with pytest.raises(ValueError):
        LatticeGrid((3, 8), (0.1, 0.1))
    with pytest.raises(ValueError):
        LatticeGrid((8, 8), (0.1, 0.0))


def test_fields_reject_non_finite_values():
    g = grid2()
    v = np.zeros(g.shape)
    v[1, 1] = np.nan
    with pytest.raises(ValueError):
        ScalarLatticeField(g, v)


# -- differences -----------------------------------------------------------------

def test_derivative_of_linear_coordinate_is_exact():
    g = LatticeGrid((8, 8), (0.1, 0.25), (0.0, -1.0))
    f = scalar(g, lambda t, x: x)
    down = central_difference(f, 1, "down", periodic_space=False)
    up = central_difference(f, 1, "up", periodic_space=False)
    assert np.allclose(down.values, 1.0, atol=1e-13)
    assert np.allclose(up.values, -1.0, atol=1e-13)


def test_sine_derivative_error_bound():
    n = 256
    h = 2 * math.pi / n
    g = grid2(n, 8)
    d = central_difference(scalar(g, lambda t, x: np.sin(x)), 1)
    assert np.max(np.abs(d.values - np.cos(g.coordinate(1)))) <= h * h


def test_time_edges_use_second_order_one_sided_stencils():
    errs = []
    for nt in (16, 32, 64):
        g = spacetime_grid((8,), (1.0,), 1.0 / nt, nt)
        d = partial(np.broadcast_to(np.exp(g.coordinate(0)), g.shape), g, 0)
        errs.append(np.max(np.abs(d - np.exp(g.coordinate(0)))))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) > 1.9


def test_axis_out_of_range():
    g = grid2()
    with pytest.raises((IndexError, ValueError)):
        central_difference(scalar(g, lambda t, x: x), 2)


def test_divergence_examples():
    g = grid2()
    assert np.allclose(divergence(vector(g, lambda t, x: 3.0 + 0 * t, lambda t, x: -2.0 + 0 * x)).values, 0.0)
    assert np.allclose(divergence(vector(g, lambda t, x: t, lambda t, x: 0 * x)).values, 1.0)


# -- integrals ---------------------------------------------------------------------

def test_volume_of_unit_function_is_exact():
    g = spacetime_grid((16,), (2.0,), 0.05, 20)
    V = volume_integral(np.ones(g.shape), SlabRegion(0, 20), g)
    assert V == pytest.approx(2.0 * 1.0, rel=1e-14)


def test_full_period_sine_integrates_to_zero():
    g = grid2(64, 8)
    f = scalar(g, lambda t, x: np.sin(x) + 0 * t)
    assert abs(volume_integral(f.values, SlabRegion(0, 7), g)) <= 1e-12


def test_time_squared_integral_converges_at_second_order():
    errs = []
    for nt in (8, 16, 32):
        g = spacetime_grid((8,), (1.0,), 1.0 / nt, nt)
        f = np.broadcast_to(g.coordinate(0) ** 2, g.shape)
        errs.append(abs(volume_integral(f, SlabRegion(0, nt), g) - 1.0 / 3.0))
    assert math.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.05)
    assert math.log2(errs[1] / errs[2]) == pytest.approx(2.0, abs=0.05)


def test_surface_flux_examples():
    g = spacetime_grid((8,), (1.0,), 0.1, 10)
    slab = SlabRegion(0, 10)
    assert surface_flux(np.zeros((2,) + g.shape), slab, g) == 0.0
    const = np.stack([np.full(g.shape, 2.5), np.zeros(g.shape)])
    assert surface_flux(const, slab, g) == pytest.approx(0.0, abs=1e-15)
    j = vector(g, lambda t, x: t, lambda t, x: 0 * x)
    assert surface_flux(j.values, slab, g) == pytest.approx(1.0, rel=1e-12)


def test_slab_needs_increasing_indices():
    g = grid2()
    with pytest.raises(ValueError):
        surface_flux(np.zeros((2,) + g.shape), SlabRegion(5, 5), g)


def test_box_integral_uses_trapezoid_weights():
    g = spacetime_grid((11,), (1.0,), 0.1, 4, spatial_origin=(0.0,))
    # sampled box covers [0, 0.909...]; the trapezoid rule integrates x exactly
    xs = g.axis_values(1)
    val = spatial_integral(np.broadcast_to(g.coordinate(1), g.shape)[0], g, "box")
    assert val == pytest.approx(0.5 * xs[-1] ** 2, rel=1e-13)


# -- properties ------------------------------------------------------------------

smooth_coeffs = st.lists(st.floats(-2, 2), min_size=4, max_size=4)


def _field(g, c):
    return scalar(g, lambda t, x: c[0] * np.sin(x) + c[1] * np.cos(2 * x) * t + c[2] * t * t + c[3])


@settings(max_examples=30, deadline=None)
@given(smooth_coeffs, smooth_coeffs, st.floats(-3, 3), st.floats(-3, 3))
def test_integrals_and_differences_are_linear(c1, c2, a, b):
    g = grid2(16, 10)
    f, h = _field(g, c1), _field(g, c2)
    combo = a * f.values + b * h.values
    slab = SlabRegion(1, 8)
    lhs = volume_integral(combo, slab, g)
    rhs = a * volume_integral(f.values, slab, g) + b * volume_integral(h.values, slab, g)
    scale = abs(a) * np.sum(np.abs(f.values)) + abs(b) * np.sum(np.abs(h.values)) + 1.0
    assert abs(lhs - rhs) <= 1e-13 * scale * g.dt * g.spatial_cell
    for mu in (0, 1):
        d = partial(combo, g, mu)
        want = a * partial(f.values, g, mu) + b * partial(h.values, g, mu)
        assert np.max(np.abs(d - want)) <= 1e-13 * (np.max(np.abs(d)) + np.max(np.abs(want)) + 1.0)


@settings(max_examples=30, deadline=None)
@given(smooth_coeffs, st.integers(1, 3))
def test_shifting_by_a_full_period_is_bit_identical(c, periods):
    L = 2 * math.pi
    n = 16
    g = spacetime_grid((n,), (L,), L / n / 2, 9)
    shifted = spacetime_grid((n,), (L,), L / n / 2, 9, spatial_origin=(periods * L,))
    f = _field(g, c)
    # sample the same periodic function on the shifted lattice, then reuse the unshifted values
    assert np.array_equal(partial(f.values, g, 1), partial(f.values, shifted, 1))
    rolled = np.roll(f.values, n, axis=1)
    assert np.array_equal(partial(rolled, g, 1), partial(f.values, g, 1))
    slab = SlabRegion(0, 9)
    assert volume_integral(f.values, slab, g) == volume_integral(f.values, slab, shifted)


@settings(max_examples=20, deadline=None)
@given(smooth_coeffs)
def test_gauss_defect_is_small_for_smooth_currents(c):
    g = spacetime_grid((32,), (2 * math.pi,), 0.05, 40)
    j = vector(g, lambda t, x: c[0] * np.sin(x) * np.exp(0.3 * t) + c[3], lambda t, x: c[1] * np.cos(x) * t)
    assert gauss_defect(j, SlabRegion(4, 36)) <= 1e-2 * (1 + sum(abs(x) for x in c))


@settings(max_examples=15, deadline=None)
@given(st.booleans(), st.integers(4, 9))
def test_serialization_round_trip(as_complex, n):
    import tempfile
    from pathlib import Path

    g = spacetime_grid((n, n), (1.0, 2.0), 0.05, 5)
    rng = np.random.default_rng(n)
    v = rng.normal(size=g.shape)
    if as_complex:
        v = v + 1j * rng.normal(size=g.shape)
    field = ScalarLatticeField(g, v)
    with tempfile.TemporaryDirectory() as tmp:
        save_field(Path(tmp) / "f", field, "test")
        back = load_field(Path(tmp) / "f")
    assert np.array_equal(back.values, v)
    assert back.grid == g
