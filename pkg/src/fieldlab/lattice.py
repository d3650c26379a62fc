"""Minkowski lattice: grids, finite differences and slab integrals.

Axis 0 is time and is never periodic.  Spatial axes are periodic unless an
operation is asked to treat them as a bounded box (needed for quantities
carrying explicit coordinates, which do not wrap around the torus).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class LatticeGrid:
    shape: tuple[int, ...]
    spacing: tuple[float, ...]
    origin: tuple[float, ...] | None = None

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        spacing = tuple(float(h) for h in self.spacing)
        origin = tuple(float(o) for o in self.origin) if self.origin is not None else (0.0,) * len(shape)
        if not shape:
            raise ValueError("grid needs at least the time axis")
        if len(spacing) != len(shape) or len(origin) != len(shape):
            raise ValueError("shape, spacing and origin must have one entry per axis")
        if any(n < 4 for n in shape):
            raise ValueError(f"every axis needs at least 4 sites, got {shape}")
        if any(not h > 0 for h in spacing):
            raise ValueError("spacings must be positive")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def dt(self) -> float:
        return self.spacing[0]

    @property
    def spatial_shape(self) -> tuple[int, ...]:
        return self.shape[1:]

    @property
    def spatial_cell(self) -> float:
        return float(np.prod(self.spacing[1:])) if self.dim > 1 else 1.0

    @property
    def periods(self) -> tuple[float, ...]:
        """Spatial box lengths (torus periods)."""
        return tuple(n * h for n, h in zip(self.shape[1:], self.spacing[1:]))

    def axis_values(self, mu: int) -> np.ndarray:
        return self.origin[mu] + self.spacing[mu] * np.arange(self.shape[mu])

    def coordinate(self, mu: int) -> np.ndarray:
        """x^mu broadcastable against a full block."""
        shape = [1] * self.dim
        shape[mu] = self.shape[mu]
        return self.axis_values(mu).reshape(shape)

    def times(self) -> np.ndarray:
        return self.axis_values(0)

    def with_time(self, steps: int, dt: float | None = None, t0: float | None = None) -> "LatticeGrid":
        return LatticeGrid(
            (steps,) + self.shape[1:],
            (dt if dt is not None else self.dt,) + self.spacing[1:],
            (t0 if t0 is not None else self.origin[0],) + self.origin[1:],
        )

    def to_json(self) -> dict:
        return {"shape": list(self.shape), "spacing": list(self.spacing), "origin": list(self.origin)}


def spacetime_grid(spatial_shape, box, dt: float, steps: int, t0: float = 0.0, spatial_origin=None) -> LatticeGrid:
    """Grid with ``steps + 1`` time slices over a periodic box of side lengths ``box``."""
    spatial_shape = tuple(spatial_shape)
    box = tuple(box) if np.ndim(box) else (float(box),) * len(spatial_shape)
    spacing = tuple(L / n for L, n in zip(box, spatial_shape))
    origin = tuple(spatial_origin) if spatial_origin is not None else (0.0,) * len(spatial_shape)
    return LatticeGrid((steps + 1,) + spatial_shape, (dt,) + spacing, (t0,) + origin)


@dataclass(frozen=True, eq=False)
class ScalarLatticeField:
    grid: LatticeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("lattice field contains non-finite values")
        object.__setattr__(self, "values", v)

    def __add__(self, other):
        return ScalarLatticeField(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return ScalarLatticeField(self.grid, self.values - _vals(other))

    def __mul__(self, other):
        return ScalarLatticeField(self.grid, self.values * _vals(other))

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class VectorLatticeField:
    """Contravariant D-vector per site; ``values`` has shape (D, *grid.shape)."""

    grid: LatticeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.grid.dim,) + self.grid.shape:
            raise ValueError(f"vector field shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("lattice field contains non-finite values")
        object.__setattr__(self, "values", v)

    def component(self, mu: int) -> ScalarLatticeField:
        return ScalarLatticeField(self.grid, self.values[mu])


def _vals(x):
    return x.values if isinstance(x, (ScalarLatticeField, VectorLatticeField)) else x


# --------------------------------------------------------------------------
# differences on raw arrays

def diff_axis(f: np.ndarray, h: float, axis: int, periodic: bool) -> np.ndarray:
    """Second-order first derivative along ``axis``; one-sided at open edges."""
    if periodic:
        return (np.roll(f, -1, axis) - np.roll(f, 1, axis)) / (2.0 * h)
    f = np.moveaxis(f, axis, 0)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
    out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)
    return np.moveaxis(out, 0, axis)


def second_diff_axis(f: np.ndarray, h: float, axis: int, periodic: bool) -> np.ndarray:
    """Compact three-point second derivative; one-sided four-point at open edges."""
    if periodic:
        return (np.roll(f, -1, axis) - 2.0 * f + np.roll(f, 1, axis)) / (h * h)
    f = np.moveaxis(f, axis, 0)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / (h * h)
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (h * h)
    out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / (h * h)
    return np.moveaxis(out, 0, axis)


def partial(f: np.ndarray, grid: LatticeGrid, mu: int, periodic_space: bool = True) -> np.ndarray:
    if not 0 <= mu < grid.dim:
        raise IndexError(f"axis {mu} out of range for D={grid.dim}")
    return diff_axis(f, grid.spacing[mu], mu, periodic=(mu > 0 and periodic_space))


def second_partial(f: np.ndarray, grid: LatticeGrid, mu: int, nu: int, periodic_space: bool = True) -> np.ndarray:
    if mu == nu:
        return second_diff_axis(f, grid.spacing[mu], mu, periodic=(mu > 0 and periodic_space))
    return partial(partial(f, grid, mu, periodic_space), grid, nu, periodic_space)


# --------------------------------------------------------------------------
# field-level operators

def central_difference(f: ScalarLatticeField, mu: int, variance: str = "down", periodic_space: bool = True) -> ScalarLatticeField:
    """d_mu f (``"down"``) or d^mu f = eta^{mu mu} d_mu f (``"up"``)."""
    d = partial(f.values, f.grid, mu, periodic_space)
    if variance == "up":
        d = d * (1.0 if mu == 0 else -1.0)
    elif variance != "down":
        raise ValueError("variance must be 'up' or 'down'")
    return ScalarLatticeField(f.grid, d)


def divergence_array(j: np.ndarray, grid: LatticeGrid, periodic_space: bool = True) -> np.ndarray:
    """sum_mu d_mu j^mu for contravariant components stacked on axis 0."""
    out = partial(j[0], grid, 0)
    for mu in range(1, grid.dim):
        out = out + partial(j[mu], grid, mu, periodic_space)
    return out


def divergence(j: VectorLatticeField, periodic_space: bool = True) -> ScalarLatticeField:
    return ScalarLatticeField(j.grid, divergence_array(j.values, j.grid, periodic_space))


# --------------------------------------------------------------------------
# slabs and integrals

@dataclass(frozen=True)
class SlabRegion:
    """Time slices ``t0_index .. t1_index`` over the full spatial extent.

    ``spatial="torus"`` treats space as periodic, so the boundary is the two
    time slices.  ``spatial="box"`` treats the sampled spatial block as a
    bounded box and adds the lateral faces to the boundary.
    """

    t0_index: int
    t1_index: int
    spatial: str = "torus"

    def __post_init__(self):
        if self.t1_index <= self.t0_index:
            raise ValueError("empty slab: need t0_index < t1_index")
        if self.spatial not in ("torus", "box"):
            raise ValueError("spatial must be 'torus' or 'box'")

    def check(self, grid: LatticeGrid) -> None:
        if self.t0_index < 0 or self.t1_index >= grid.shape[0]:
            raise ValueError(f"slab [{self.t0_index}, {self.t1_index}] outside grid with {grid.shape[0]} slices")


def _trapezoid_weights(n: int) -> np.ndarray:
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    return w


def spatial_integral(slice_values: np.ndarray, grid: LatticeGrid, spatial: str = "torus"):
    """Integral of one time slice (or a stack of them on the leading axis) over space."""
    if grid.dim == 1:
        return slice_values
    axes = tuple(range(slice_values.ndim - (grid.dim - 1), slice_values.ndim))
    if spatial == "torus":
        return np.sum(slice_values, axis=axes) * grid.spatial_cell
    weighted = slice_values
    for k, ax in enumerate(axes):
        shape = [1] * slice_values.ndim
        shape[ax] = grid.shape[k + 1]
        weighted = weighted * _trapezoid_weights(grid.shape[k + 1]).reshape(shape)
    return np.sum(weighted, axis=axes) * grid.spatial_cell


def volume_integral(f, slab: SlabRegion, grid: LatticeGrid | None = None):
    """Trapezoid rule in time times the spatial rule of the slab."""
    values, grid = (f.values, f.grid) if isinstance(f, ScalarLatticeField) else (np.asarray(f), grid)
    slab.check(grid)
    per_slice = spatial_integral(values[slab.t0_index : slab.t1_index + 1], grid, slab.spatial)
    w = _trapezoid_weights(slab.t1_index - slab.t0_index + 1)
    return np.sum(w * per_slice) * grid.dt


def surface_flux(j, slab: SlabRegion, grid: LatticeGrid | None = None):
    """Outward flux of j through the slab boundary.

    On the torus this is int j^0(t1) - int j^0(t0).  In box mode the lateral
    faces contribute int j^i at the upper minus the lower face, integrated with
    the trapezoid rule over time and the remaining spatial axes.
    """
    values, grid = (j.values, j.grid) if isinstance(j, VectorLatticeField) else (np.asarray(j), grid)
    slab.check(grid)
    a, b = slab.t0_index, slab.t1_index
    total = spatial_integral(values[0][b], grid, slab.spatial) - spatial_integral(values[0][a], grid, slab.spatial)
    if slab.spatial == "box":
        wt = _trapezoid_weights(b - a + 1)
        for i in range(1, grid.dim):
            comp = values[i][a : b + 1]
            face = np.take(comp, -1, axis=i) - np.take(comp, 0, axis=i)  # shape (nt, other spatial...)
            for k in range(1, grid.dim):
                if k == i:
                    continue
                ax = k if k < i else k - 1
                shape = [1] * face.ndim
                shape[ax] = grid.shape[k]
                face = face * _trapezoid_weights(grid.shape[k]).reshape(shape) * grid.spacing[k]
            face = face.reshape(face.shape[0], -1).sum(axis=1)
            total = total + np.sum(wt * face) * grid.dt
    return total


def gauss_defect(j, slab: SlabRegion, grid: LatticeGrid | None = None) -> float:
    """|flux - int div j| for the slab (zero up to discretization error)."""
    values, grid = (j.values, j.grid) if isinstance(j, VectorLatticeField) else (np.asarray(j), grid)
    div = divergence_array(values, grid, periodic_space=(slab.spatial == "torus"))
    return float(abs(surface_flux(values, slab, grid) - volume_integral(div, slab, grid)))


# --------------------------------------------------------------------------
# serialization: JSON header + flat little-endian float64 payload

def save_field(path, field, name: str = "") -> tuple[Path, Path]:
    """Write ``<path>.json`` and ``<path>.bin``; complex data is stored as interleaved re/im."""
    path = Path(path)
    values = np.asarray(field.values)
    is_complex = np.iscomplexobj(values)
    payload = values.astype(np.complex128).view(np.float64) if is_complex else values.astype(np.float64)
    header = {
        "format": "fieldlab-lattice",
        "version": 1,
        "name": name,
        "kind": "vector" if isinstance(field, VectorLatticeField) else "scalar",
        "grid": field.grid.to_json(),
        "array_shape": list(values.shape),
        "complex": bool(is_complex),
        "dtype": "<f8",
        "order": "C",
        "data_file": path.name + ".bin",
    }
    json_path, bin_path = path.with_name(path.name + ".json"), path.with_name(path.name + ".bin")
    json_path.write_text(json.dumps(header, indent=2) + "\n")
    np.ascontiguousarray(payload, dtype="<f8").tofile(bin_path)
    return json_path, bin_path


def load_field(path):
    path = Path(path)
    json_path = path if path.suffix == ".json" else path.with_name(path.name + ".json")
    header = json.loads(json_path.read_text())
    raw = np.fromfile(json_path.with_name(header["data_file"]), dtype="<f8")
    shape = tuple(header["array_shape"])
    values = raw.view(np.complex128).reshape(shape) if header["complex"] else raw.reshape(shape)
    g = header["grid"]
    grid = LatticeGrid(tuple(g["shape"]), tuple(g["spacing"]), tuple(g["origin"]))
    cls = VectorLatticeField if header["kind"] == "vector" else ScalarLatticeField
    return cls(grid, values)
