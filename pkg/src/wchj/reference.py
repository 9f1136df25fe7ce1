"""Independent approximations of the true system solution.

The workhorse is an explicit monotone Lax-Friedrichs marcher with the
zeroth-order coupling term treated explicitly; it serves as the oracle the
operator iterations are validated against, always run on a finer grid than
the scheme under test.  Closed forms cover the two exactly solvable cases:
affine data for a single x-independent Hamiltonian, and the one-step output
of the twisted operator for the symmetric two-equation quadratic benchmark.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from .coupling import CouplingMatrix
from .errors import CflViolation, NonFiniteError, WchjError
from .grids import GridField, TorusGrid, lipschitz_estimate, sup_norm
from .lagrangians import SystemSpec


@dataclass
class ReferenceRun:
    """Final field of a reference solve plus the discretization it used."""

    field: GridField
    dt: float
    cfl_ratio: float
    steps: int
    alpha: float
    snapshots: list = dc_field(default_factory=list)


def _coupling_apply(sys: SystemSpec, mats: Optional[np.ndarray], flat: np.ndarray) -> np.ndarray:
    if mats is None:
        return sys.coupling.entries @ flat
    return np.einsum("nij,jn->in", mats, flat)


def lf_solve(
    u0: GridField,
    T: float,
    sys: SystemSpec,
    *,
    cfl: float = 0.9,
    slope_margin: float = 1.5,
    alpha: float | None = None,
    record_times: Sequence[float] | None = None,
) -> ReferenceRun:
    """March the weakly coupled system to time T with a monotone scheme.

    The numerical Hamiltonian is global Lax-Friedrichs,
    ``H_i(x, (D+ + D-)/2) - alpha * (D+ - D-)/2`` per axis, with dissipation
    ``alpha`` covering |dH/dp| over the run's slope range.  The slope range
    is re-estimated every step from the discrete slopes actually present
    (times ``slope_margin``, plus slack), capped by the initial estimate
    that also sizes the fixed time step via
    ``dt * (alpha * dim / h + max_row_sum|B|) <= cfl``.  Tracking the live
    slopes matters for rough data whose slopes decay quickly: a dissipation
    sized once from the initial Lipschitz constant would smear the solution
    for the entire run.  Passing ``alpha`` freezes the coefficient instead
    (used by ordering tests that must compare two runs of one scheme).

    Slopes are monitored during the march: exceeding the configured range
    would silently break monotonicity, so it raises instead.
    """
    if T <= 0:
        raise WchjError("lf_solve needs T > 0")
    if not (0 < cfl <= 0.95):
        raise CflViolation(f"cfl ratio must lie in (0, 0.95], got {cfl}")
    grid = u0.grid
    if sys.dim != grid.dim or sys.d != u0.d:
        raise WchjError("system/grid/field dimensions disagree")
    h = grid.h
    p_max = slope_margin * lipschitz_estimate(u0) + 1.0
    a = alpha if alpha is not None else sys.grad_H_bound(p_max)
    if isinstance(sys.coupling, CouplingMatrix):
        beta = sys.coupling.max_abs_row_sum()
        mats = None
    else:
        mats = sys.coupling.batch(grid.points())
        beta = float(np.abs(mats).sum(axis=2).max())
    dt_max = cfl / (a * grid.dim / h + beta)
    steps = max(1, int(math.ceil(T / dt_max)))
    dt = T / steps
    ratio = dt * (a * grid.dim / h + beta)

    periodic = isinstance(grid, TorusGrid)
    if not periodic and grid.extension is None:
        raise WchjError("bounded-grid reference solves need an extension for boundary values")

    # sup-norm stability bound, used as a blow-up guard
    pts = grid.points()
    h0 = max(abs(float(np.max(c.H(pts, np.zeros((1, grid.dim)))))) for c in sys.components)
    u0_norm = sup_norm(u0)
    bound = u0_norm + T * (h0 + beta * u0_norm * math.exp(beta * T)) + 1.0

    want = sorted(float(t) for t in record_times) if record_times else []
    snaps: list[GridField] = []
    u = u0.values.copy()
    flat_shape = (sys.d, grid.n_nodes)
    t_now = 0.0
    for k in range(steps):
        if periodic:
            work = u
        else:
            left = np.asarray(grid.extension(t_now, grid.axis_nodes()[:1] - h), dtype=float).reshape(sys.d, 1)
            right = np.asarray(grid.extension(t_now, grid.axis_nodes()[-1:] + h), dtype=float).reshape(sys.d, 1)
            work = np.concatenate([left, u, right], axis=1)

        slope_seen = 0.0
        diss = np.zeros(flat_shape)
        avg_all = []
        for axis in range(grid.dim):
            ax = axis + 1
            if periodic:
                dp = (np.roll(work, -1, axis=ax) - work) / h
                dm = (work - np.roll(work, 1, axis=ax)) / h
            else:
                dp = (work[:, 2:] - work[:, 1:-1]) / h
                dm = (work[:, 1:-1] - work[:, :-2]) / h
            slope_seen = max(slope_seen, float(np.abs(dp).max()))
            diss += (dp - dm).reshape(flat_shape)
            avg_all.append((0.5 * (dp + dm)).reshape(flat_shape))

        if slope_seen > p_max + 1e-9 and alpha is None:
            raise CflViolation(
                f"slope {slope_seen:.4g} exceeded the configured range {p_max:.4g}; "
                "monotonicity of the dissipation is no longer guaranteed"
            )
        if alpha is None:
            a_step = sys.grad_H_bound(min(p_max, slope_margin * slope_seen + 1.0))
        else:
            a_step = alpha
        grad_pts = np.stack(avg_all, axis=-1)  # (d, n, dim)
        ham = np.stack([comp.H(pts, grad_pts[i]) for i, comp in enumerate(sys.components)])
        ham -= 0.5 * a_step * diss

        flat = u.reshape(flat_shape)
        new = flat - dt * (ham + _coupling_apply(sys, mats, flat))
        u = new.reshape(u.shape)
        t_now = (k + 1) * dt
        if not periodic:
            # boundary nodes carry the supplied closed form at the new time
            u[:, 0] = np.asarray(grid.extension(t_now, grid.axis_nodes()[:1]), dtype=float).reshape(sys.d)
            u[:, -1] = np.asarray(grid.extension(t_now, grid.axis_nodes()[-1:]), dtype=float).reshape(sys.d)

        if (k % 64 == 0) or k == steps - 1:
            if not np.all(np.isfinite(u)):
                raise NonFiniteError(f"reference solve blew up at step {k + 1}/{steps}")
            if float(np.abs(u).max()) > bound:
                raise NonFiniteError(
                    f"reference solve exceeded the stability bound {bound:.4g} at t={t_now:.4g}"
                )
        while want and want[0] <= t_now + 0.5 * dt:
            want.pop(0)
            snaps.append(GridField(grid=grid, values=u.copy(), provenance="reference-snapshot", time=t_now))

    out = GridField(grid=grid, values=u, provenance=f"lf_solve(T={T:g})", time=T)
    return ReferenceRun(field=out, dt=dt, cfl_ratio=ratio, steps=steps, alpha=a, snapshots=snaps)


# ---------------------------------------------------------------------------
# Closed forms


def hopf_lax_affine(p, H_value: float, t: float, x) -> np.ndarray:
    """Solution <p, x> - t H(p) of a single x-independent equation with affine datum."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if x.ndim <= 1 and p.ndim <= 0:
        return p * x - t * H_value
    inner = (np.atleast_2d(x) * p).sum(axis=-1)
    return inner - t * H_value


def pair_step_exact(t: float, x, p: float = 1.0) -> np.ndarray:
    """One twisted step for the symmetric quadratic pair, in closed form.

    System: H_1 = H_2 = |p|^2/2, coupling [[1, -1], [-1, 1]], datum
    (0, <p, x>) on the line.  Writing E = e^{-2t}, the step output is

        u_1 = <p,x> (1 - E)/2 - t p^2 (1 - E)^2 / 8
        u_2 = <p,x> (1 + E)/2 - t p^2 (1 + E)^2 / 8

    i.e. each component is the affine Hopf-Lax evolution of the
    corresponding entry of e^{-tB} applied to the datum.  Returns shape
    (2, n) for n points.
    """
    if t < 0:
        raise WchjError("pair_step_exact needs t >= 0")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    E = math.exp(-2.0 * t)
    q1, q2 = 0.5 * (1.0 - E), 0.5 * (1.0 + E)
    u1 = p * x * q1 - 0.5 * t * (p * q1) ** 2
    u2 = p * x * q2 - 0.5 * t * (p * q2) ** 2
    return np.vstack([u1, u2])


def pair_step_residual(t: float, p: float = 1.0) -> np.ndarray:
    """Residual of the one-step output of :func:`pair_step_exact` in the PDE.

    Substituting the closed form into ``du/dt + H(du/dx) + B u`` gives the
    x-independent vector

        (t p^2 e^{-4t} / 2) * (1, 1),

    both components positive: the single twisted step over-estimates the
    true solution and is not itself a solution of the coupled system.  (The
    componentwise derivation: the dissipative terms cancel pairwise and each
    component is left with t p^2 e^{-2t} (q_i - 1/2) where q_1 - 1/2 =
    -e^{-2t}/2 and q_2 - 1/2 = +e^{-2t}/2 enter with opposite-signed
    prefactors, yielding +t p^2 e^{-4t}/2 in both rows.)
    """
    if t < 0:
        raise WchjError("pair_step_residual needs t >= 0")
    r = 0.5 * t * p * p * math.exp(-4.0 * t)
    return np.array([r, r])


def pair_coupling_rows() -> list[list[float]]:
    """The benchmark coupling matrix rows."""
    return [[1.0, -1.0], [-1.0, 1.0]]
