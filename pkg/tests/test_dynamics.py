from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fieldlab.dynamics import (
    ConvergenceError,
    EvolutionConfig,
    GaussianPacket,
    NumericalAbort,
    PlaneWave,
    RandomSmooth,
    convergence_study,
    evolve,
    evolve_backward,
    el_residual,
    exact_plane_wave,
    l2_norm,
    linf_norm,
    measure_order,
)
from fieldlab.jet import FieldBlock
from fieldlab.lattice import spacetime_grid
from fieldlab.presets import load_theory

TWO_PI = 2 * math.pi


def kg_config(n: int, duration: float = 2.0, m: float = 1.0, k: int = 1) -> EvolutionConfig:
    h = TWO_PI / n
    dt = h / 2
    return EvolutionConfig(dt, int(round(duration / dt)), PlaneWave(1.0, (float(k),), m), (n,), (TWO_PI,))


def wave_error(n: int, theory: str = "klein-gordon") -> float:
    spec = load_theory(theory)
    cfg = kg_config(n)
    block = evolve(spec, cfg)
    exact = exact_plane_wave(1.0, (1.0,), 1.0, block.grid, complex_field=spec.is_complex)
    return float(np.max(np.abs(block["phi"] - exact["phi"])))


# -- evolution ---------------------------------------------------------------------

def test_plane_wave_converges_at_second_order():
    ns = (64, 128, 256)
    errs = [wave_error(n) for n in ns]
    r = measure_order("wave", [TWO_PI / n for n in ns], errs)
    assert 1.8 <= r.order <= 2.2
    assert r.monotone


def test_complex_plane_wave_tracks_the_rotation():
    ns = (64, 128, 256)
    errs = [wave_error(n, "complex-kg") for n in ns]
    r = measure_order("complex-wave", [TWO_PI / n for n in ns], errs)
    assert 1.8 <= r.order <= 2.2


def test_constant_data_stays_constant_for_the_free_theory():
    spec = load_theory("free-massless")
    cfg = EvolutionConfig(0.05, 200, GaussianPacket(width=1.0, amplitude=0.0, background=0.7), (32,), (TWO_PI,))
    block = evolve(spec, cfg)
    assert np.max(np.abs(block["phi"] - 0.7)) <= 1e-14


def test_block_contains_every_slice():
    block = evolve(load_theory("klein-gordon"), kg_config(32, duration=1.0))
    assert block.grid.shape[0] == kg_config(32, duration=1.0).steps + 1


def test_courant_violation_is_rejected():
    cfg = EvolutionConfig(0.2, 10, PlaneWave(1.0, (1.0,), 1.0), (64,), (TWO_PI,))
    with pytest.raises(ValueError, match="Courant"):
        evolve(load_theory("klein-gordon"), cfg)


def test_instability_aborts_with_step_index():
    cfg = EvolutionConfig(0.2, 400, PlaneWave(1.0, (1.0,), 1.0), (64,), (TWO_PI,), courant_check=False)
    with pytest.raises(NumericalAbort) as info:
        evolve(load_theory("klein-gordon"), cfg)
    assert 1 <= info.value.step <= 400


def test_incommensurate_wave_number_is_an_error():
    g = spacetime_grid((16,), (TWO_PI,), 0.1, 10)
    with pytest.raises(ValueError):
        exact_plane_wave(1.0, (0.5,), 1.0, g)


def test_exact_plane_wave_trivial_cases():
    g = spacetime_grid((16,), (TWO_PI,), 0.1, 10)
    assert np.all(exact_plane_wave(0.0, (0.0,), 2.0, g)["phi"] == 2.0)
    uniform = exact_plane_wave(1.0, (0.0,), 1.5, g)["phi"]
    assert np.allclose(uniform, 1.5 * np.cos(np.broadcast_to(g.coordinate(0), g.shape)), atol=1e-15)


def test_dispersion_of_a_single_mode():
    # zero crossings of a k=1, m=1 standing mode give omega = sqrt(2) up to O(dt^2 + h^2)
    spec = load_theory("klein-gordon")
    n = 128
    cfg = kg_config(n, duration=20.0)
    block = evolve(spec, cfg)
    u = block["phi"][:, 0]
    t = block.grid.axis_values(0)
    idx = np.where(np.sign(u[:-1]) != np.sign(u[1:]))[0]
    crossings = t[idx] - u[idx] * (t[idx + 1] - t[idx]) / (u[idx + 1] - u[idx])
    omega = math.pi / np.mean(np.diff(crossings))
    h = TWO_PI / n
    assert abs(omega - math.sqrt(2.0)) <= 2.0 * h * h


# -- residuals ---------------------------------------------------------------------

def test_zero_field_has_zero_residual():
    for name in ("klein-gordon", "phi4", "complex-kg", "dissipative-kg"):
        spec = load_theory(name)
        g = spacetime_grid((8,) * (spec.dim - 1), (1.0,) * (spec.dim - 1), 0.05, 6)
        dtype = complex if spec.is_complex else float
        block = FieldBlock(g, {c: np.zeros(g.shape, dtype) for c in spec.components})
        for r in el_residual(spec, block).values():
            assert np.all(r.values == 0)


def test_linear_time_has_zero_residual_in_the_free_theory():
    spec = load_theory("free-massless")
    g = spacetime_grid((8,), (1.0,), 0.05, 6)
    block = FieldBlock(g, {"phi": np.broadcast_to(g.coordinate(0), g.shape).copy()})
    assert np.max(np.abs(el_residual(spec, block)["phi"].values)) <= 1e-12


def test_residual_needs_three_slices():
    spec = load_theory("klein-gordon")
    # grids already need 4 sites per axis, so a 2-slice block cannot be built
    with pytest.raises(ValueError):
        g = spacetime_grid((8,), (1.0,), 0.05, 1)
        el_residual(spec, FieldBlock(g, {"phi": np.zeros(g.shape)}))


def test_exact_wave_residual_converges_at_second_order():
    # k=2: with k=m=1 and dt=h/2 the leading time and space truncation terms cancel
    spec = load_theory("klein-gordon")
    errs, hs = [], []
    for n in (32, 64, 128):
        g = spacetime_grid((n,), (TWO_PI,), TWO_PI / n / 2, n)
        block = exact_plane_wave(1.0, (2.0,), 1.0, g)
        errs.append(linf_norm(el_residual(spec, block)["phi"].values, g))
        hs.append(TWO_PI / n)
    assert 1.8 <= measure_order("el", hs, errs).order <= 2.2


# -- norms and convergence bookkeeping --------------------------------------------

def test_norms_skip_the_time_margin():
    g = spacetime_grid((8,), (1.0,), 0.1, 9)
    v = np.zeros(g.shape)
    v[0] = v[-1] = 1e6
    assert l2_norm(v, g) == 0.0 and linf_norm(v, g) == 0.0


def test_convergence_needs_three_resolutions():
    with pytest.raises(ConvergenceError):
        convergence_study(lambda n: {"x": (1.0 / n, 1.0 / n**2)}, [8, 16])


def test_convergence_with_nothing_to_refine():
    with pytest.raises(ConvergenceError, match="nothing to refine"):
        convergence_study(lambda n: {}, [8, 16, 32])


def test_measured_order_of_an_exact_power_law():
    r = convergence_study(lambda n: {"x": (1.0 / n, 3.0 / n**2)}, [8, 16, 32])["x"]
    assert r.order == pytest.approx(2.0, abs=1e-12)


def test_non_monotone_sequence_is_flagged():
    r = measure_order("x", [0.4, 0.2, 0.1], [1.0, 2.0, 0.5])
    assert not r.monotone


def test_rounding_level_errors_are_exact():
    r = measure_order("x", [0.4, 0.2, 0.1], [1e-15, 3e-16, 2e-15], floor=1e-11)
    assert r.exact and r.order is None


# -- properties --------------------------------------------------------------------

@settings(max_examples=12, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["klein-gordon", "phi4", "free-massless"]))
def test_forward_then_backward_returns_the_initial_slice(seed, theory):
    spec = load_theory(theory)
    cfg = EvolutionConfig(TWO_PI / 32 / 2, 60, RandomSmooth(seed, 2, 0.5), (32,), (TWO_PI,))
    block = evolve(spec, cfg)
    back = evolve_backward(spec, block)
    scale = float(np.max(np.abs(block["phi"]))) + 1.0
    rounding = cfg.steps * np.finfo(float).eps * scale
    assert np.max(np.abs(back["phi"] - block["phi"][0])) <= 10 * rounding


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_stepper_output_is_always_finite(seed):
    block = evolve(load_theory("phi4"), EvolutionConfig(0.05, 40, RandomSmooth(seed, 3, 1.0), (16,), (TWO_PI,)))
    assert np.all(np.isfinite(block["phi"]))
