"""Periodic and bounded spatial grids, vector-valued grid fields.

The interpolation operator is deliberately multilinear: it is monotone
(``f <= g`` at nodes implies ``interp f <= interp g`` everywhere) and
non-expansive in the sup norm, and both properties are load-bearing for the
operator steps built on top.  Higher-order stencils would break them.

Query points within 1e-9 grid units of a node are snapped to it, so node
evaluation returns the stored value exactly and periodic wrap-around is
bitwise consistent.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .errors import NonFiniteError, OutOfDomainError, ShapeMismatchError, WchjError

_SNAP = 1e-9


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on the N-torus (N = 1 or 2), nodes x_k = k/m per axis."""

    dim: int
    m: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise WchjError(f"torus grids support dim 1 or 2, got {self.dim}")
        if self.m < 4:
            raise WchjError(f"need at least 4 nodes per axis, got {self.m}")

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def shape(self) -> tuple:
        return (self.m,) * self.dim

    @property
    def n_nodes(self) -> int:
        return self.m**self.dim

    def axis_nodes(self) -> np.ndarray:
        return np.arange(self.m) / self.m

    def points(self) -> np.ndarray:
        """All nodes, shape (n_nodes, dim), row-major."""
        ax = self.axis_nodes()
        if self.dim == 1:
            return ax[:, None]
        a, b = np.meshgrid(ax, ax, indexing="ij")
        return np.column_stack([a.ravel(), b.ravel()])


@dataclass(frozen=True)
class BoundedGrid:
    """Uniform 1-D grid on [-R, R] with an explicit out-of-domain policy.

    ``extension(t, pts) -> (d, n)`` supplies values beyond the node range
    (typically a known closed form); errors are only meaningful on the core
    region [-R + margin, R - margin], which must satisfy
    ``margin >= velocity_bound * total_time`` for the run using the grid.
    """

    radius: float
    h: float
    margin: float
    extension: Optional[Callable] = dc_field(default=None, repr=False)

    def __post_init__(self):
        if self.radius <= 0 or self.h <= 0:
            raise WchjError("bounded grid needs positive radius and spacing")
        if not (0 < self.margin < self.radius):
            raise WchjError("margin must lie strictly between 0 and radius")
        if self.m < 4:
            raise WchjError("bounded grid needs at least 4 nodes")

    @property
    def dim(self) -> int:
        return 1

    @property
    def m(self) -> int:
        return int(round(2.0 * self.radius / self.h)) + 1

    @property
    def shape(self) -> tuple:
        return (self.m,)

    @property
    def n_nodes(self) -> int:
        return self.m

    def axis_nodes(self) -> np.ndarray:
        return -self.radius + np.arange(self.m) * self.h

    def points(self) -> np.ndarray:
        return self.axis_nodes()[:, None]

    def core_mask(self) -> np.ndarray:
        x = self.axis_nodes()
        lim = self.radius - self.margin
        return (x >= -lim - _SNAP) & (x <= lim + _SNAP)

    def check_margin(self, velocity_bound: float, total_time: float) -> None:
        need = velocity_bound * total_time
        if self.margin + _SNAP < need:
            raise WchjError(
                f"margin {self.margin:g} < velocity_bound*T = {need:g}; "
                "minimizer feet for core nodes may leave the domain"
            )


@dataclass
class GridField:
    """A d-vector-valued function sampled on a grid.

    values has shape (d, m) on a 1-D grid and (d, m, m) on a 2-D torus.
    Fields are frozen after construction (the array is made read-only);
    operator steps always allocate fresh outputs.
    """

    grid: "TorusGrid | BoundedGrid"
    values: np.ndarray
    provenance: str = ""
    time: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        expected = vals.shape[1:]
        if expected != self.grid.shape:
            raise ShapeMismatchError(f"values shape {vals.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise NonFiniteError("grid field has non-finite values")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def d(self) -> int:
        return self.values.shape[0]

    def at(self, pts) -> np.ndarray:
        """Interpolate all components at arbitrary points; returns (d, n)."""
        return interpolate(self, pts)

    def with_values(self, values: np.ndarray, provenance: str = "", time: float | None = None) -> "GridField":
        return GridField(
            grid=self.grid,
            values=values,
            provenance=provenance or self.provenance,
            time=self.time if time is None else time,
        )


def field_from_function(grid, fn, provenance: str = "", time: float = 0.0) -> GridField:
    """Sample ``fn(points) -> (d, n)`` on the grid nodes."""
    vals = np.asarray(fn(grid.points()), dtype=float)
    if vals.ndim == 1:
        vals = vals[None, :]
    return GridField(grid=grid, values=vals.reshape(vals.shape[0], *grid.shape), provenance=provenance, time=time)


def _interp_axis_weights(s: np.ndarray, m: int, periodic: bool):
    """Snap, split into base index and weight along one axis."""
    snapped = np.rint(s)
    s = np.where(np.abs(s - snapped) < _SNAP, snapped, s)
    k0 = np.floor(s)
    w = s - k0
    k0 = k0.astype(np.int64)
    if periodic:
        k0 %= m
        k1 = (k0 + 1) % m
    else:
        k0 = np.clip(k0, 0, m - 2)
        k1 = k0 + 1
        w = s - k0
    return k0, k1, w


def interpolate(f: GridField, pts) -> np.ndarray:
    """Periodic/bounded multilinear interpolation of every component.

    On a bounded grid, points beyond the node range are delegated to the
    grid's extension evaluated at the field's time stamp; without an
    extension they raise OutOfDomainError.
    """
    grid = f.grid
    if isinstance(grid, TorusGrid):
        pts = np.asarray(pts, dtype=float)
        if grid.dim == 1:
            x = pts.reshape(-1) if pts.ndim <= 1 else pts[:, 0]
            k0, k1, w = _interp_axis_weights(x * grid.m, grid.m, periodic=True)
            return (1.0 - w) * f.values[:, k0] + w * f.values[:, k1]
        pts = np.atleast_2d(pts)
        i0, i1, wx = _interp_axis_weights(pts[:, 0] * grid.m, grid.m, periodic=True)
        j0, j1, wy = _interp_axis_weights(pts[:, 1] * grid.m, grid.m, periodic=True)
        v = f.values
        return (
            (1.0 - wx) * (1.0 - wy) * v[:, i0, j0]
            + (1.0 - wx) * wy * v[:, i0, j1]
            + wx * (1.0 - wy) * v[:, i1, j0]
            + wx * wy * v[:, i1, j1]
        )

    # bounded grid, 1-D
    x = np.asarray(pts, dtype=float).reshape(-1)
    s = (x - (-grid.radius)) / grid.h
    inside = (s > -_SNAP) & (s < grid.m - 1 + _SNAP)
    out = np.empty((f.d, x.size))
    if np.any(inside):
        k0, k1, w = _interp_axis_weights(s[inside], grid.m, periodic=False)
        out[:, inside] = (1.0 - w) * f.values[:, k0] + w * f.values[:, k1]
    if np.any(~inside):
        if grid.extension is None:
            raise OutOfDomainError(
                f"points outside [{-grid.radius:g}, {grid.radius:g}] and the grid has no extension"
            )
        ext = np.asarray(grid.extension(f.time, x[~inside]), dtype=float)
        out[:, ~inside] = ext.reshape(f.d, -1)
    return out


def sup_diff(f: GridField, g: GridField) -> float:
    """Max over nodes and components of |f - g|."""
    if f.grid != g.grid or f.values.shape != g.values.shape:
        raise ShapeMismatchError("sup_diff needs fields on the same grid with the same component count")
    return float(np.max(np.abs(f.values - g.values)))


def sup_norm(f: GridField) -> float:
    return float(np.max(np.abs(f.values)))


def lipschitz_estimate(f: GridField) -> float:
    """Max slope between adjacent nodes, periodic wrap on torus grids."""
    grid = f.grid
    best = 0.0
    if isinstance(grid, TorusGrid):
        for axis in range(grid.dim):
            d = np.abs(np.roll(f.values, -1, axis=axis + 1) - f.values)
            best = max(best, float(d.max()) / grid.h)
    else:
        d = np.abs(np.diff(f.values, axis=1))
        if d.size:
            best = float(d.max()) / grid.h
    return best


# ---------------------------------------------------------------------------
# CSV serialization: one row per node, coordinates then components.


def write_csv(f: GridField, path) -> None:
    grid = f.grid
    if isinstance(grid, TorusGrid):
        meta = f"# wchj kind=torus dim={grid.dim} m={grid.m} time={f.time:.12g}"
    else:
        meta = f"# wchj kind=bounded radius={grid.radius:.12g} h={grid.h:.12g} margin={grid.margin:.12g} time={f.time:.12g}"
    coords = grid.points()
    names = [f"x{i + 1}" for i in range(coords.shape[1])] if coords.shape[1] > 1 else ["x"]
    header = ",".join(names + [f"u_{i + 1}" for i in range(f.d)])
    flat = f.values.reshape(f.d, -1)
    lines = [meta, header]
    for r in range(coords.shape[0]):
        cells = [f"{c:.12g}" for c in coords[r]] + [f"{flat[i, r]:.12g}" for i in range(f.d)]
        lines.append(",".join(cells))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path) -> GridField:
    """Round-trip reader for :func:`write_csv` output.

    Bounded grids come back without their extension callable; interpolation
    outside the node range then raises.
    """
    with open(path) as fh:
        meta = fh.readline().strip()
        header = fh.readline().strip()
        rows = [line.strip() for line in fh if line.strip()]
    if not meta.startswith("# wchj"):
        raise WchjError(f"{path}: not a wchj grid-field CSV")
    kv = dict(part.split("=", 1) for part in meta[len("# wchj ") :].split())
    d = sum(1 for c in header.split(",") if c.startswith("u_"))
    data = np.array([[float(c) for c in row.split(",")] for row in rows])
    time = float(kv.get("time", "0"))
    if kv["kind"] == "torus":
        grid = TorusGrid(dim=int(kv["dim"]), m=int(kv["m"]))
    else:
        grid = BoundedGrid(radius=float(kv["radius"]), h=float(kv["h"]), margin=float(kv["margin"]))
    ncoord = grid.dim
    vals = data[:, ncoord : ncoord + d].T.reshape(d, *grid.shape)
    return GridField(grid=grid, values=vals, provenance=f"read_csv({path})", time=time)
