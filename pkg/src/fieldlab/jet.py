"""Spacetime blocks of field values and numeric evaluation of jet expressions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .dsl import algebra as alg
from .dsl.algebra import Coord, Expr, Fld, Sym
from .lattice import LatticeGrid, partial, second_partial


@dataclass(frozen=True, eq=False)
class FieldBlock:
    """All field components on every site of a spacetime grid.

    A complex field is held as its ``phi`` array (complex dtype) with the
    ``phistar`` component carried explicitly as the conjugate array.
    """

    grid: LatticeGrid
    components: Mapping[str, np.ndarray]
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        for name, v in self.components.items():
            if np.shape(v) != self.grid.shape:
                raise ValueError(f"component {name!r} has shape {np.shape(v)}, grid is {self.grid.shape}")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"component {name!r} contains non-finite values")

    def __getitem__(self, comp: str) -> np.ndarray:
        return self.components[comp]

    @property
    def is_complex(self) -> bool:
        return any(np.iscomplexobj(v) for v in self.components.values())

    def time_slices(self, start: int, stop: int) -> "FieldBlock":
        g = self.grid
        grid = LatticeGrid((stop - start,) + g.shape[1:], g.spacing, (g.origin[0] + start * g.dt,) + g.origin[1:])
        return FieldBlock(grid, {k: v[start:stop] for k, v in self.components.items()}, self.meta)


class Jet:
    """Lazily computed, cached values of every jet atom on a block.

    Coordinates broadcast; first and second derivatives come from the shared
    second-order stencils of :mod:`fieldlab.lattice`.  ``exact`` may supply
    callables ``(name, derivs) -> array`` that bypass differencing (used by
    analytic oracles).
    """

    def __init__(self, block: FieldBlock, exact: Callable | None = None, periodic_space: bool = True):
        self.block = block
        self.grid = block.grid
        self.exact = exact
        self.periodic_space = periodic_space
        self._cache: dict = {}

    def __call__(self, a):
        if a in self._cache:
            return self._cache[a]
        if isinstance(a, Coord):
            v = self.grid.coordinate(a.index)
        elif isinstance(a, Fld):
            v = self._field(a)
        elif isinstance(a, Sym):
            raise KeyError(f"parameter {a.name!r} has no value; substitute parameters first")
        else:
            raise TypeError(f"cannot evaluate atom {a!r}")
        self._cache[a] = v
        return v

    def _field(self, a: Fld):
        if self.exact is not None:
            v = self.exact(a.name, a.derivs)
            if v is not None:
                return v
        base = self.block.components[a.name]
        if not a.derivs:
            return base
        if len(a.derivs) == 1:
            return partial(base, self.grid, a.derivs[0], self.periodic_space)
        if len(a.derivs) == 2:
            mu, nu = a.derivs
            return second_partial(base, self.grid, mu, nu, self.periodic_space)
        raise NotImplementedError("derivatives beyond second order are not discretized")

    def eval(self, expr: Expr) -> np.ndarray:
        """Evaluate ``expr`` over the whole block (broadcast to the grid shape)."""
        v = alg.evaluate(expr, self)
        return np.broadcast_to(np.asarray(v), self.grid.shape)

    def eval_many(self, exprs) -> np.ndarray:
        return np.stack([self.eval(e) for e in exprs])


def real_if_close(values: np.ndarray, scale: float | None = None, tol: float = 1e-9) -> np.ndarray:
    """Drop a numerically negligible imaginary part."""
    if not np.iscomplexobj(values):
        return values
    ref = scale if scale is not None else max(float(np.max(np.abs(values))), 1.0)
    if np.max(np.abs(values.imag), initial=0.0) <= tol * ref:
        return np.ascontiguousarray(values.real)
    return values
