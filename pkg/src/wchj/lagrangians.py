"""Catalog of component Lagrangians and their Hamiltonians.

Each entry supplies both ``L(x, v)`` and its Legendre dual ``H(x, p)``
(users never get an automatic transform; :func:`legendre_check` verifies the
pair numerically instead).  Evaluators are pure, vectorized over a trailing
coordinate axis, and broadcast ``x`` against ``v``.

Entries carry the hypothesis metadata used by the convergence theory:

* a superlinearity gauge ``theta`` with constants ``c0`` (lower bound
  ``L >= theta(|v|) - c0``) and ``growth_A`` (derivative growth);
* ``velocity_bound``, the a priori Lipschitz bound for minimizing curves
  given the data's Lipschitz constant; search windows are sized from it and
  an argmin touching the window edge is a hard failure downstream;
* ``regularity``, either C1 strictly convex or merely Lipschitz convex
  (kink locations flagged for almost-everywhere checks).

None of the constants enter the operator algorithms; they are metadata that
the sampled checks in this module keep honest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from .coupling import CouplingField, CouplingMatrix
from .errors import NonFiniteError, SearchWindowTooSmall, WchjError

C1_STRICT = "C1-strictly-convex"
LIPSCHITZ = "Lipschitz-convex"

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class LagrangianSpec:
    """One component Lagrangian/Hamiltonian pair with hypothesis metadata."""

    name: str
    dim: int
    L: Callable[[np.ndarray, np.ndarray], np.ndarray] = dc_field(repr=False)
    H: Callable[[np.ndarray, np.ndarray], np.ndarray] = dc_field(repr=False)
    velocity_bound: float
    regularity: str = C1_STRICT
    theta: Callable[[np.ndarray], np.ndarray] = dc_field(repr=False, default=lambda q: 0.5 * q * q)
    theta_name: str = "quadratic"
    c0: float = 0.0
    growth_A: float = 1.0
    grad_H_bound: Callable[[float], float] = dc_field(repr=False, default=lambda pmax: pmax)
    kinks: tuple = ()

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise WchjError(f"catalog entries support dim 1 or 2, got {self.dim}")
        if self.velocity_bound <= 0:
            raise WchjError("velocity_bound must be positive")
        if self.regularity not in (C1_STRICT, LIPSCHITZ):
            raise WchjError(f"unknown regularity {self.regularity!r}")


@dataclass(frozen=True)
class SystemSpec:
    """d Lagrangian components sharing a spatial dimension, plus coupling."""

    components: tuple
    coupling: "CouplingMatrix | CouplingField"
    label: str = ""

    def __post_init__(self):
        if not self.components:
            raise WchjError("a system needs at least one component")
        dims = {c.dim for c in self.components}
        if len(dims) != 1:
            raise WchjError(f"components disagree on spatial dimension: {sorted(dims)}")
        if self.coupling.d != len(self.components):
            raise WchjError(
                f"coupling dimension {self.coupling.d} != number of components {len(self.components)}"
            )

    @property
    def d(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def has_constant_coupling(self) -> bool:
        return isinstance(self.coupling, CouplingMatrix)

    @property
    def velocity_bound(self) -> float:
        return max(c.velocity_bound for c in self.components)

    def grad_H_bound(self, pmax: float) -> float:
        return max(c.grad_H_bound(pmax) for c in self.components)


def _check_pts(x, v):
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
        raise NonFiniteError("non-finite point or velocity")
    return x, v


def eval_L_vec(sys: SystemSpec, x, v) -> np.ndarray:
    """Componentwise Lagrangian values, stacked along a leading axis."""
    x, v = _check_pts(x, v)
    return np.stack([np.broadcast_to(c.L(x, v), np.broadcast(x[..., 0], v[..., 0]).shape) for c in sys.components])


def eval_H_vec(sys: SystemSpec, x, p) -> np.ndarray:
    """Componentwise Hamiltonian values, stacked along a leading axis."""
    x, p = _check_pts(x, p)
    return np.stack([np.broadcast_to(c.H(x, p), np.broadcast(x[..., 0], p[..., 0]).shape) for c in sys.components])


# ---------------------------------------------------------------------------
# Catalog entries


def quadratic(dim: int = 1, data_lipschitz: float = 1.0, velocity_bound: float | None = None) -> LagrangianSpec:
    """L = |v|^2 / 2, H = |p|^2 / 2."""
    M = velocity_bound if velocity_bound is not None else 4.0 * (data_lipschitz + 1.0)

    def L(x, v):
        return 0.5 * (v * v).sum(axis=-1) + 0.0 * x[..., 0]

    def H(x, p):
        return 0.5 * (p * p).sum(axis=-1) + 0.0 * x[..., 0]

    return LagrangianSpec(name="quadratic", dim=dim, L=L, H=H, velocity_bound=M)


def quadratic_potential(
    dim: int = 1,
    amplitude: float = 1.0,
    freq: int = 1,
    data_lipschitz: float = 1.0,
    velocity_bound: float | None = None,
) -> LagrangianSpec:
    """L = |v|^2/2 + V(x), H = |p|^2/2 - V(x), with a trigonometric V.

    V(x) = amplitude * sum_axes cos(2 pi freq x_axis).
    """
    dv_max = 2.0 * math.pi * freq * abs(amplitude) * dim
    M = velocity_bound if velocity_bound is not None else 4.0 * (data_lipschitz + dv_max + 1.0)

    def V(x):
        return amplitude * np.cos(2.0 * np.pi * freq * x).sum(axis=-1)

    def L(x, v):
        return 0.5 * (v * v).sum(axis=-1) + V(x)

    def H(x, p):
        return 0.5 * (p * p).sum(axis=-1) - V(x)

    return LagrangianSpec(
        name="quadratic_potential",
        dim=dim,
        L=L,
        H=H,
        velocity_bound=M,
        c0=abs(amplitude) * dim,
        growth_A=1.0 + dv_max,
    )


def anisotropic(
    dim: int = 2,
    sigma: Sequence[Sequence[float]] | float = ((2.0, 0.5), (0.5, 1.0)),
    data_lipschitz: float = 1.0,
    velocity_bound: float | None = None,
) -> LagrangianSpec:
    """L = <S v, v>/2 with S positive definite, H = <S^-1 p, p>/2."""
    S = np.atleast_2d(np.asarray(sigma, dtype=float))
    if S.shape != (dim, dim) or not np.allclose(S, S.T):
        raise WchjError(f"sigma must be a symmetric {dim}x{dim} matrix")
    eig = np.linalg.eigvalsh(S)
    if eig.min() <= 0:
        raise WchjError("sigma must be positive definite")
    lam_min, lam_max = float(eig.min()), float(eig.max())
    S_inv = np.linalg.inv(S)
    M = velocity_bound if velocity_bound is not None else 4.0 * (data_lipschitz / lam_min + 1.0)

    def L(x, v):
        return 0.5 * np.einsum("...i,ij,...j->...", v, S, v) + 0.0 * x[..., 0]

    def H(x, p):
        return 0.5 * np.einsum("...i,ij,...j->...", p, S_inv, p) + 0.0 * x[..., 0]

    return LagrangianSpec(
        name="anisotropic",
        dim=dim,
        L=L,
        H=H,
        velocity_bound=M,
        theta=lambda q: 0.5 * lam_min * q * q,
        theta_name=f"quadratic(lambda={lam_min:g})",
        growth_A=max(1.0, lam_max),
        grad_H_bound=lambda pmax: pmax / lam_min,
    )


def velocity_flat(dim: int = 1, data_lipschitz: float = 1.0, velocity_bound: float | None = None) -> LagrangianSpec:
    """L = max(|v| - 1, 0)^2, H = |p| + |p|^2/4.

    Convex and C1 but not strictly convex (flat on |v| <= 1); the dual has a
    kink at p = 0.  This is the merely-Lipschitz catalog entry; sampled
    derivative checks skip the flagged kink.
    """
    M = velocity_bound if velocity_bound is not None else 4.0 * (data_lipschitz + 1.0)

    def L(x, v):
        q = np.sqrt((v * v).sum(axis=-1))
        return np.maximum(q - 1.0, 0.0) ** 2 + 0.0 * x[..., 0]

    def H(x, p):
        r = np.sqrt((p * p).sum(axis=-1))
        return r + 0.25 * r * r + 0.0 * x[..., 0]

    return LagrangianSpec(
        name="velocity_flat",
        dim=dim,
        L=L,
        H=H,
        velocity_bound=M,
        regularity=LIPSCHITZ,
        theta=lambda q: np.maximum(q - 1.0, 0.0) ** 2,
        theta_name="shifted-quadratic",
        growth_A=2.0,
        grad_H_bound=lambda pmax: 1.0 + 0.5 * pmax,
        kinks=(0.0,),
    )


_CATALOG = {
    "quadratic": quadratic,
    "quadratic_potential": quadratic_potential,
    "anisotropic": anisotropic,
    "velocity_flat": velocity_flat,
}


def catalog_entry(name: str, **params) -> LagrangianSpec:
    """Build a catalog entry by name; unknown names raise."""
    try:
        builder = _CATALOG[name]
    except KeyError:
        raise WchjError(f"unknown catalog entry {name!r}; have {sorted(_CATALOG)}") from None
    return builder(**params)


def catalog_names() -> list[str]:
    return sorted(_CATALOG)


# ---------------------------------------------------------------------------
# Numeric verification


@dataclass(frozen=True)
class LegendreReport:
    max_gap: float
    samples: int
    p_radius: float
    search_radius: float


def _golden_max(fn, lo: float, hi: float, iters: int = 80) -> tuple[float, float]:
    """Golden-section maximum of a unimodal scalar function on [lo, hi]."""
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = fn(c), fn(d)
    best_x, best_f = (c, fc) if fc >= fd else (d, fd)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = fn(c)
            if fc > best_f:
                best_x, best_f = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = fn(d)
            if fd > best_f:
                best_x, best_f = d, fd
    return best_x, best_f


def _conjugate_search(spec: LagrangianSpec, x: np.ndarray, p: np.ndarray, radius: float) -> float:
    """sup_v <p, v> - L(x, v) over the box |v_i| <= radius, coordinatewise."""

    xx = x[None, :]
    if spec.dim == 1:

        def g(v):
            return float(p[0] * v - spec.L(xx, np.array([[v]])))

        v_star, val = _golden_max(g, -radius, radius, iters=90)
        if abs(v_star) > 0.999 * radius:
            raise SearchWindowTooSmall(f"conjugate maximizer at |v|={abs(v_star):.3g} ~ window {radius:.3g}")
        return val

    v = np.zeros(2)
    val = float((p * v).sum() - spec.L(xx, v[None, :]))
    for _ in range(10):  # coordinate ascent; linear rate set by the cross-term conditioning
        for axis in range(2):

            def g(s, axis=axis):
                w = v.copy()
                w[axis] = s
                return float((p * w).sum() - spec.L(xx, w[None, :]))

            v[axis], val = _golden_max(g, -radius, radius, iters=90)
    if np.max(np.abs(v)) > 0.999 * radius:
        raise SearchWindowTooSmall(f"conjugate maximizer at |v|={np.max(np.abs(v)):.3g} ~ window {radius:.3g}")
    return val


def legendre_check(
    spec: LagrangianSpec,
    sample_count: int = 120,
    p_radius: float = 3.0,
    seed: int = 0,
) -> LegendreReport:
    """Compare eval_H against a brute conjugate search of eval_L.

    Samples (x, p) with |p| <= p_radius and reports the maximum absolute gap
    between ``H(x, p)`` and ``sup_v <p,v> - L(x,v)``.  Catalog entries pass
    at 1e-6; the inner search window is sized from grad_H_bound so a
    maximizer on the window edge raises instead of silently clipping.
    """
    rng = np.random.default_rng(seed)
    radius = 1.5 * spec.grad_H_bound(p_radius) + 1.0
    worst = 0.0
    for _ in range(sample_count):
        x = rng.random(spec.dim)
        p = rng.uniform(-p_radius, p_radius, size=spec.dim)
        num = _conjugate_search(spec, x, p, radius)
        ana = float(spec.H(x[None, :], p[None, :]))
        worst = max(worst, abs(num - ana))
    return LegendreReport(max_gap=worst, samples=sample_count, p_radius=p_radius, search_radius=radius)


@dataclass(frozen=True)
class HypothesisReport:
    lower_bound_violation: float
    convexity_violation: float
    derivative_growth_violation: float
    skipped_kink_samples: int


def hypothesis_check(spec: LagrangianSpec, samples: int = 400, seed: int = 0) -> HypothesisReport:
    """Spot-check the growth/convexity hypotheses on random samples.

    Checks, over |v| <= 2 * velocity_bound:
      * lower bound  L(x, v) >= theta(|v|) - c0;
      * midpoint convexity of v -> L(x, v);
      * derivative growth |dL/dx| + |dL/dv| <= A * (1 + theta(|v|)) by
        central differences, skipping samples near flagged kink speeds.
    """
    rng = np.random.default_rng(seed)
    vmax = 2.0 * spec.velocity_bound
    lb = conv = grow = 0.0
    skipped = 0
    eps = 1e-5
    for _ in range(samples):
        x = rng.random(spec.dim)
        v = rng.uniform(-vmax, vmax, size=spec.dim)
        speed = float(np.linalg.norm(v))
        Lv = float(spec.L(x[None, :], v[None, :]))
        lb = max(lb, float(spec.theta(speed)) - spec.c0 - Lv)

        w = rng.uniform(-vmax, vmax, size=spec.dim)
        mid = float(spec.L(x[None, :], (0.5 * (v + w))[None, :]))
        avg = 0.5 * (Lv + float(spec.L(x[None, :], w[None, :])))
        conv = max(conv, mid - avg)

        if any(abs(speed - k) < 0.05 for k in (1.0,)) and spec.regularity == LIPSCHITZ:
            skipped += 1
            continue
        grad = 0.0
        for axis in range(spec.dim):
            dx = np.zeros(spec.dim)
            dx[axis] = eps
            grad += abs(float(spec.L((x + dx)[None, :], v[None, :]) - spec.L((x - dx)[None, :], v[None, :]))) / (
                2 * eps
            )
            grad += abs(float(spec.L(x[None, :], (v + dx)[None, :]) - spec.L(x[None, :], (v - dx)[None, :]))) / (
                2 * eps
            )
        grow = max(grow, grad - spec.growth_A * (1.0 + float(spec.theta(speed))))
    return HypothesisReport(
        lower_bound_violation=lb,
        convexity_violation=conv,
        derivative_growth_violation=grow,
        skipped_kink_samples=skipped,
    )
