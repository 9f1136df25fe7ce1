"""Coupling matrices and their exponential weights.

A coupling matrix has non-positive off-diagonal entries and nonnegative row
sums.  Those two sign conditions are what make the weakly coupled system
order-preserving, and they give the two facts everything downstream relies
on:

* every entry of ``e^{-tau*B}`` is nonnegative for ``tau >= 0``;
* the rows of ``e^{-tau*B}`` are sub-stochastic: ``0 <= e^{-tau*B} 1 <= 1``
  componentwise, and each component decreases as ``tau`` grows.

The exponential itself is evaluated with scipy's scaling-and-squaring Pade
routine; systems here are tiny (``d <= 64``) so robustness beats speed.
Entries within ``MAT_TOL`` below zero are clamped to exactly zero so the
monotonicity arguments downstream hold without epsilon bookkeeping; a more
negative entry means the exponential evaluation itself failed and raises.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .errors import NegativeTimeError, NonFiniteError, RowSumViolation, SignViolation, WchjError

#: Tolerance for sign clamping and sub-stochasticity checks of exponentials.
MAT_TOL = 1e-12

#: Largest supported number of equations; dense d x d exponentials and d-fold
#: per-node minimizations scale poorly beyond small d.
MAX_DIM = 64


@dataclass(frozen=True)
class CouplingMatrix:
    """A validated d x d coupling matrix (units: 1/time).

    Construct through :func:`validate_coupling`; the entries array is frozen
    so instances can be shared across threads.
    """

    entries: np.ndarray
    label: str = ""

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    def max_abs_row_sum(self) -> float:
        """Row-sum norm of |B|, the quantity CFL and step-size caps use."""
        return float(np.abs(self.entries).sum(axis=1).max())

    def is_zero(self) -> bool:
        return bool(np.all(self.entries == 0.0))


def validate_coupling(raw, label: str = "") -> CouplingMatrix:
    """Validate a square matrix as a coupling matrix.

    Rejection carries the first violated condition and its indices:
    ``SignViolation(i, j)`` for a positive off-diagonal entry (row-major
    scan), ``RowSumViolation(i)`` for a negative row sum.

    Raises:
        NonFiniteError: entries contain NaN/Inf.
        WchjError: not square, or d outside [1, 64].
        SignViolation, RowSumViolation: sign structure broken.
    """
    mat = np.asarray(raw, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise WchjError(f"coupling matrix must be square, got shape {mat.shape}")
    d = mat.shape[0]
    if d < 1 or d > MAX_DIM:
        raise WchjError(f"coupling dimension {d} outside supported range [1, {MAX_DIM}]")
    if not np.all(np.isfinite(mat)):
        raise NonFiniteError("coupling matrix has non-finite entries")
    for i in range(d):
        for j in range(d):
            if i != j and mat[i, j] > 0.0:
                raise SignViolation(i, j, float(mat[i, j]))
    sums = mat.sum(axis=1)
    for i in range(d):
        if sums[i] < 0.0:
            raise RowSumViolation(i, float(sums[i]))
    mat = mat.copy()
    mat.setflags(write=False)
    return CouplingMatrix(entries=mat, label=label)


def _clamp_exponential(mat: np.ndarray, context: str) -> np.ndarray:
    """Clamp tiny negative entries of an exponential to zero; check rows.

    The sign theory guarantees true entries are nonnegative and rows are
    sub-stochastic, so anything beyond MAT_TOL is a numerical failure, not a
    property of the input.
    """
    low = mat.min()
    if low < -MAT_TOL:
        raise WchjError(f"{context}: exponential entry {low:.3e} below -{MAT_TOL:g}; evaluation failed")
    mat = np.where(mat < 0.0, 0.0, mat)
    rows = mat.sum(axis=-1)
    if rows.max() > 1.0 + MAT_TOL:
        raise WchjError(f"{context}: exponential row sum {rows.max():.15g} exceeds 1 + {MAT_TOL:g}")
    return mat


def exp_neg(B: CouplingMatrix, tau: float) -> np.ndarray:
    """Evaluate ``e^{-tau*B}`` for ``tau >= 0``.

    The result has entries clamped to ``[0, inf)`` when within ``MAT_TOL``
    of zero, and row sums in ``[0, 1]`` up to ``MAT_TOL``.  The integrand
    weight ``e^{s*B}`` for ``s in [-t, 0]`` is obtained as
    ``exp_neg(B, -s)``, so only nonnegative ``tau`` ever occurs.
    """
    if tau < 0.0:
        raise NegativeTimeError(f"exp_neg needs tau >= 0, got {tau}")
    if tau == 0.0:
        return np.eye(B.d)
    return _clamp_exponential(expm(-tau * B.entries), f"exp_neg(tau={tau:g})")


def exp_neg_apply(B: CouplingMatrix, tau: float, v) -> np.ndarray:
    """Matrix-vector convenience: ``exp_neg(B, tau) @ v``."""
    vec = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(vec)):
        raise NonFiniteError("exp_neg_apply: vector has non-finite entries")
    return exp_neg(B, tau) @ vec


class ExpKernel:
    """Cache of ``e^{-tau*B}`` evaluations keyed by ``tau``.

    Iterations reuse a handful of step sizes thousands of times; the cache
    makes each evaluation a dict lookup.  Fills are lock-guarded so results
    are byte-identical regardless of thread count.
    """

    def __init__(self, base: CouplingMatrix):
        self.base = base
        self._cache: dict[float, np.ndarray] = {}
        self._lock = threading.Lock()

    def at(self, tau: float) -> np.ndarray:
        key = float(tau)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        with self._lock:
            hit = self._cache.get(key)
            if hit is None:
                hit = exp_neg(self.base, key)
                hit.setflags(write=False)
                self._cache[key] = hit
        return hit

    def prime(self, taus) -> None:
        """Pre-populate before a parallel phase."""
        for tau in taus:
            self.at(float(tau))


@dataclass(frozen=True)
class CouplingField:
    """A continuous map from torus points to coupling matrices.

    ``evaluator`` takes points of shape ``(n, N)`` and returns ``(n, d, d)``
    matrices.  Construction spot-checks the sign structure and continuity on
    a sample; use :func:`make_coupling_field`.
    """

    d: int
    dim: int
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    label: str = ""

    def batch(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = self.evaluator(pts)
        if out.shape != (pts.shape[0], self.d, self.d):
            raise WchjError(
                f"coupling field evaluator returned shape {out.shape}, "
                f"expected {(pts.shape[0], self.d, self.d)}"
            )
        return out

    def at(self, x) -> CouplingMatrix:
        pt = np.asarray(x, dtype=float).reshape(1, self.dim)
        return validate_coupling(self.batch(pt)[0], label=f"{self.label}@{x}")

    def max_abs_row_sum(self, sample: int = 128) -> float:
        pts = _sample_points(self.dim, sample)
        mats = self.batch(pts)
        return float(np.abs(mats).sum(axis=2).max())


def _sample_points(dim: int, n: int) -> np.ndarray:
    side = np.linspace(0.0, 1.0, n, endpoint=False)
    if dim == 1:
        return side[:, None]
    a, b = np.meshgrid(side, side, indexing="ij")
    return np.column_stack([a.ravel(), b.ravel()])


def make_coupling_field(d: int, dim: int, evaluator, label: str = "") -> CouplingField:
    """Wrap and spot-check an evaluator as a CouplingField.

    Every sampled matrix must validate as a coupling matrix, and adjacent
    samples must not jump: at spacing 1/64 per axis the difference between
    neighbors must stay below half the matrix scale, which admits Lipschitz
    constants up to ~32x the entry size but rejects O(scale) discontinuities.
    """
    fld = CouplingField(d=d, dim=dim, evaluator=evaluator, label=label)
    n = 64 if dim == 1 else 12
    pts = _sample_points(dim, n)
    mats = fld.batch(pts)
    for k in range(mats.shape[0]):
        validate_coupling(mats[k], label=f"{label}[sample {k}]")
    scale = 1.0 + float(np.abs(mats).max())
    shape = (n,) * dim + (d, d)
    grid_mats = mats.reshape(shape)
    jump = 0.0
    for axis in range(dim):
        jump = max(jump, float(np.abs(np.roll(grid_mats, -1, axis=axis) - grid_mats).max()))
    if jump > 0.5 * scale:
        raise WchjError(
            f"coupling field {label!r} jumps by {jump:.3e} between samples 1/{n} apart; not continuous"
        )
    return fld


def constant_field(B: CouplingMatrix, dim: int) -> CouplingField:
    """The constant field x -> B."""

    def ev(pts: np.ndarray) -> np.ndarray:
        return np.broadcast_to(B.entries, (pts.shape[0], B.d, B.d)).copy()

    return make_coupling_field(B.d, dim, ev, label=f"constant({B.label or 'B'})")


def sin_offdiag_field(dim: int = 1, base: float = 1.0, amp: float = 0.5, freq: int = 1) -> CouplingField:
    """Two-equation field with b_offdiag(x) = -(base + amp*sin(2 pi freq x1)).

    Diagonal entries compensate so every row sums to zero.  Needs
    ``base >= |amp|`` so the off-diagonal entries stay non-positive.
    """
    if base < abs(amp):
        raise WchjError("sin_offdiag_field needs base >= |amp| to keep off-diagonal entries <= 0")

    def ev(pts: np.ndarray) -> np.ndarray:
        s = base + amp * np.sin(2.0 * np.pi * freq * pts[:, 0])
        out = np.zeros((pts.shape[0], 2, 2))
        out[:, 0, 1] = -s
        out[:, 1, 0] = -s
        out[:, 0, 0] = s
        out[:, 1, 1] = s
        return out

    return make_coupling_field(2, dim, ev, label=f"sin_offdiag(base={base:g},amp={amp:g})")


def exp_neg_batch(mats: np.ndarray, tau: float) -> np.ndarray:
    """Batched ``e^{-tau*B(x)}`` with the same clamping as :func:`exp_neg`."""
    if tau < 0.0:
        raise NegativeTimeError(f"exp_neg_batch needs tau >= 0, got {tau}")
    if tau == 0.0:
        d = mats.shape[-1]
        return np.broadcast_to(np.eye(d), mats.shape).copy()
    return _clamp_exponential(expm(-tau * mats), f"exp_neg_batch(tau={tau:g})")
