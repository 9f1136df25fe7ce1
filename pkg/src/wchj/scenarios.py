"""Named, reproducible run setups shared by the CLI, tests and reports.

A scenario bundles a system, a grid, an initial datum, a horizon and the
scheme configuration.  The builders freeze every tolerance-relevant choice
(grid size, velocity bounds, reference margins) so that a scenario name in
a run configuration pins the whole experiment.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .coupling import CouplingMatrix, sin_offdiag_field, validate_coupling
from .errors import WchjError
from .grids import BoundedGrid, GridField, TorusGrid, field_from_function
from .lagrangians import SystemSpec, catalog_entry
from .operators import SchemeConfig
from .reference import hopf_lax_affine, pair_coupling_rows, pair_step_exact


@dataclass
class Scenario:
    name: str
    sys: SystemSpec
    grid: "TorusGrid | BoundedGrid"
    u0: GridField
    T: float
    cfg: SchemeConfig
    ref_factor: int = 4
    ref_slope_margin: float = 1.5
    exact: Optional[Callable] = dc_field(default=None, repr=False)  # exact S(t): (t, pts) -> (d, n)
    notes: str = ""


def pair_system(velocity_bound: float = 8.0, b_scale: float = 1.0) -> SystemSpec:
    """Two quadratic equations with the symmetric +-b coupling."""
    B = validate_coupling([[b_scale * r for r in row] for row in pair_coupling_rows()], label="pair")
    q = catalog_entry("quadratic", data_lipschitz=2 * np.pi, velocity_bound=velocity_bound)
    return SystemSpec(components=(q, q), coupling=B, label="pair")


def pair_affine(h: float = 1e-3, radius: float = 2.0, margin: float = 1.0, p: float = 1.0,
                T: float = 0.5) -> Scenario:
    """The closed-form benchmark: affine datum (0, p x) on a bounded grid.

    The grid extension supplies the exact one-step output at any time, which
    is also the datum at time zero; errors are measured on the core region.
    """

    def extension(t, x):
        return pair_step_exact(t, x, p)

    grid = BoundedGrid(radius=radius, h=h, margin=margin, extension=extension)
    M = 2.0 * max(1.0, abs(p))
    grid.check_margin(M, T)
    q = catalog_entry("quadratic", data_lipschitz=abs(p), velocity_bound=M)
    B = validate_coupling(pair_coupling_rows(), label="pair")
    sysm = SystemSpec(components=(q, q), coupling=B, label="pair-affine")
    u0 = field_from_function(grid, lambda pts: pair_step_exact(0.0, pts[:, 0], p), provenance="datum")
    cfg = SchemeConfig(t_max=max(T, 0.5), n_max=8)
    return Scenario(name="pair_affine", sys=sysm, grid=grid, u0=u0, T=T, cfg=cfg,
                    notes=f"p={p:g}; exact one-step closed form available")


def pair_torus(m: int = 512, T: float = 1.0) -> Scenario:
    """Periodic variant: datum (0, sin 2 pi x), unit horizon."""
    grid = TorusGrid(dim=1, m=m)
    sysm = pair_system(velocity_bound=8.0)
    x = grid.axis_nodes()
    u0 = GridField(grid=grid, values=np.vstack([np.zeros(m), np.sin(2 * np.pi * x)]), provenance="datum")
    cfg = SchemeConfig(t_max=T, n_max=10)
    return Scenario(name="pair_torus", sys=sysm, grid=grid, u0=u0, T=T, cfg=cfg,
                    ref_factor=4, ref_slope_margin=1.02)


def uncoupled_affine(h: float = 1.0 / 128, radius: float = 2.0, margin: float = 1.2,
                     p: float = 1.3, T: float = 0.5) -> Scenario:
    """Single uncoupled quadratic equation with affine datum; exact solution known."""

    def extension(t, x):
        return np.asarray(hopf_lax_affine(p, 0.5 * p * p, t, np.atleast_1d(x)))[None, :]

    grid = BoundedGrid(radius=radius, h=h, margin=margin, extension=extension)
    M = abs(p) + 1.0
    grid.check_margin(M, T)
    q = catalog_entry("quadratic", data_lipschitz=abs(p), velocity_bound=M)
    zero = validate_coupling([[0.0]], label="zero")
    sysm = SystemSpec(components=(q,), coupling=zero, label="uncoupled-affine")
    u0 = field_from_function(grid, lambda pts: (p * pts[:, 0])[None, :], provenance="datum")

    def exact(t, pts):
        return np.asarray(hopf_lax_affine(p, 0.5 * p * p, t, pts[:, 0]))[None, :]

    return Scenario(name="uncoupled_affine", sys=sysm, grid=grid, u0=u0, T=T,
                    cfg=SchemeConfig(t_max=max(T, 0.5), n_max=8), exact=exact,
                    notes="true semigroup; dyadic errors stay flat")


def pair_field(m: int = 256, T: float = 1.0, base: float = 1.0, amp: float = 0.5,
               operator: str = "exp_endpoint") -> Scenario:
    """x-dependent coupling b_offdiag(x) = -(base + amp sin 2 pi x), zero row sums."""
    grid = TorusGrid(dim=1, m=m)
    fld = sin_offdiag_field(dim=1, base=base, amp=amp, freq=1)
    q = catalog_entry("quadratic", data_lipschitz=2 * np.pi, velocity_bound=8.0)
    sysm = SystemSpec(components=(q, q), coupling=fld, label="pair-field")
    x = grid.axis_nodes()
    u0 = GridField(grid=grid, values=np.vstack([np.zeros(m), np.sin(2 * np.pi * x)]), provenance="datum")
    cfg = SchemeConfig(operator=operator, t_max=T, n_max=10)
    return Scenario(name="pair_field", sys=sysm, grid=grid, u0=u0, T=T, cfg=cfg,
                    ref_factor=4, ref_slope_margin=1.02,
                    notes="linearized steps need T/2^n <= 1/(3 b_max): start dyadic runs at n >= 2")


def c0_datum(m: int = 512, T: float = 1.0) -> Scenario:
    """Continuous but non-Lipschitz datum: square-root kink, periodized."""
    grid = TorusGrid(dim=1, m=m)
    sysm = pair_system(velocity_bound=10.0)

    def prof(pts):
        x = pts[:, 0]
        return np.vstack([np.zeros_like(x), np.sqrt(np.abs(x - 0.5))])

    u0 = field_from_function(grid, prof, provenance="datum")
    return Scenario(name="c0_datum", sys=sysm, grid=grid, u0=u0, T=T,
                    cfg=SchemeConfig(t_max=T, n_max=10), ref_factor=4, ref_slope_margin=1.02,
                    notes="datum Lipschitz constant grows like 1/sqrt(h); convergence still holds")


def witness_split(m: int = 4096, b_scale: float = 1.5, T: float = 0.5) -> Scenario:
    """Opposite sine components with moderate coupling: a strict splitting gap.

    One step over T exceeds the composition of two T/2 steps by a gap well
    above the inequality tolerance; the coupling strength is chosen near the
    maximum of the gap (stronger coupling contracts the component spread
    before the minimization can see it).
    """
    grid = TorusGrid(dim=1, m=m)
    lip = 2 * np.pi
    q = catalog_entry("quadratic", data_lipschitz=lip, velocity_bound=float(lip * 1.08))
    B = validate_coupling([[b_scale, -b_scale], [-b_scale, b_scale]], label="witness")
    sysm = SystemSpec(components=(q, q), coupling=B, label="witness")
    x = grid.axis_nodes()
    s = np.sin(2 * np.pi * x)
    u0 = GridField(grid=grid, values=np.vstack([s, -s]), provenance="datum")
    cfg = SchemeConfig(t_max=T, n_max=8, window_multiplier=1.0)
    return Scenario(name="witness_split", sys=sysm, grid=grid, u0=u0, T=T, cfg=cfg,
                    notes="superadditivity witness: compare one T step against two T/2 steps")


def zero_system(m: int = 64) -> Scenario:
    """All-zero data with zero coupling; every inequality holds with equality."""
    grid = TorusGrid(dim=1, m=m)
    q = catalog_entry("quadratic", data_lipschitz=1.0, velocity_bound=2.0)
    Z = validate_coupling(np.zeros((2, 2)), label="zero")
    sysm = SystemSpec(components=(q, q), coupling=Z, label="zero")
    u0 = GridField(grid=grid, values=np.zeros((2, m)), provenance="datum")
    return Scenario(name="zero", sys=sysm, grid=grid, u0=u0, T=0.5,
                    cfg=SchemeConfig(t_max=0.5, n_max=8))


SCENARIOS: dict[str, Callable[..., Scenario]] = {
    "pair_affine": pair_affine,
    "pair_torus": pair_torus,
    "uncoupled_affine": uncoupled_affine,
    "pair_field": pair_field,
    "c0_datum": c0_datum,
    "witness_split": witness_split,
    "zero": zero_system,
}


def build_scenario(name: str, **overrides) -> Scenario:
    try:
        builder = SCENARIOS[name]
    except KeyError:
        raise WchjError(f"unknown scenario {name!r}; available: {sorted(SCENARIOS)}") from None
    return builder(**overrides)


# ---------------------------------------------------------------------------
# Seeded generators for the randomized inequality battery


def random_lipschitz_field(grid: TorusGrid, d: int, lip: float, seed: int) -> GridField:
    """Random low-frequency Fourier profile with slope at most ``lip``."""
    rng = np.random.default_rng(seed)
    n_modes = 3
    ks = rng.integers(1, 4, size=n_modes)
    amps = rng.uniform(-1.0, 1.0, size=(d, n_modes))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(d, n_modes))
    weight = np.abs(amps).sum(axis=1, keepdims=True)
    weight[weight == 0.0] = 1.0
    amps = amps / weight * lip
    x = grid.axis_nodes()
    vals = np.zeros((d,) + grid.shape)
    for j in range(n_modes):
        base = np.sin(2 * np.pi * ks[j] * x[None, :] + phases[:, j : j + 1]) / (2 * np.pi * ks[j])
        if grid.dim == 1:
            vals += amps[:, j : j + 1] * base
        elif j % 2 == 0:
            vals += amps[:, j : j + 1, None] * base[:, :, None]
        else:
            vals += amps[:, j : j + 1, None] * base[:, None, :]
    return GridField(grid=grid, values=vals, provenance=f"random(seed={seed})")


def random_coupling(d: int, seed: int, scale: float = 2.0) -> CouplingMatrix:
    """Random valid coupling: nonpositive off-diagonal, nonnegative row sums."""
    rng = np.random.default_rng(seed)
    off = -rng.uniform(0.0, scale, size=(d, d))
    np.fill_diagonal(off, 0.0)
    diag = -off.sum(axis=1) + rng.uniform(0.0, scale, size=d)
    mat = off + np.diag(diag)
    return validate_coupling(mat, label=f"random(seed={seed})")


def random_system(d: int, seed: int, grid: TorusGrid, lip: float = 2.0) -> tuple[SystemSpec, GridField]:
    """A d-component quadratic system with random coupling plus matching datum."""
    B = random_coupling(d, seed)
    q = catalog_entry("quadratic", dim=grid.dim, data_lipschitz=lip, velocity_bound=lip + 1.5)
    sysm = SystemSpec(components=(q,) * d, coupling=B, label=f"random-{d}(seed={seed})")
    u0 = random_lipschitz_field(grid, d, lip, seed + 1)
    return sysm, u0
