"""Catalog entries, Legendre duality, growth-hypothesis spot checks."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wchj.coupling import validate_coupling
from wchj.errors import NonFiniteError, WchjError
from wchj.lagrangians import (
    LagrangianSpec,
    SystemSpec,
    catalog_entry,
    catalog_names,
    eval_H_vec,
    eval_L_vec,
    hypothesis_check,
    legendre_check,
)

PAIR = validate_coupling([[1.0, -1.0], [-1.0, 1.0]])


def brute_conjugate(spec, x: np.ndarray, p: float, radius: float = 8.0, n: int = 400_001) -> float:
    """Independent conjugate oracle: dense 1-D grid maximization."""
    v = np.linspace(-radius, radius, n)
    vals = p * v - spec.L(np.repeat(x[None, :], n, axis=0), v[:, None])
    return float(vals.max())


class TestLegendre:
    def test_quadratic_self_dual(self):
        rep = legendre_check(catalog_entry("quadratic"), sample_count=60, p_radius=3.0, seed=0)
        assert rep.max_gap <= 1e-6

    def test_quadratic_potential_pair(self):
        spec = catalog_entry("quadratic_potential", amplitude=1.0, freq=1)
        rep = legendre_check(spec, sample_count=60, p_radius=3.0, seed=1)
        assert rep.max_gap <= 1e-6
        # independent dense-grid oracle at a few points
        for x, p in ((0.0, 1.0), (0.3, -2.0), (0.8, 0.5)):
            xx = np.array([x])
            num = brute_conjugate(spec, xx, p)
            ana = float(spec.H(xx[None, :], np.array([[p]])))
            assert abs(num - ana) < 1e-8

    def test_velocity_flat_dual(self):
        spec = catalog_entry("velocity_flat")
        rep = legendre_check(spec, sample_count=60, p_radius=3.0, seed=2)
        assert rep.max_gap <= 1e-6
        # conjugate of max(|v|-1, 0)^2 is |p| + p^2/4; check against the oracle
        for p in (0.7, -1.9, 3.0):
            num = brute_conjugate(spec, np.array([0.2]), p)
            assert abs(num - (abs(p) + 0.25 * p * p)) < 1e-8

    def test_anisotropic_dual(self):
        spec = catalog_entry("anisotropic", dim=2, sigma=((2.0, 0.5), (0.5, 1.0)))
        rep = legendre_check(spec, sample_count=40, p_radius=2.0, seed=3)
        assert rep.max_gap <= 1e-6

    def test_mismatched_pair_detected(self):
        # claim H = |p| against L = v^2/2; the true conjugate at p = 1 is 0.5
        bad = LagrangianSpec(
            name="mismatched",
            dim=1,
            L=lambda x, v: 0.5 * (v * v).sum(axis=-1) + 0.0 * x[..., 0],
            H=lambda x, p: np.sqrt((p * p).sum(axis=-1)) + 0.0 * x[..., 0],
            velocity_bound=4.0,
        )
        rep = legendre_check(bad, sample_count=80, p_radius=2.0, seed=4)
        assert rep.max_gap >= 0.1

    def test_catalog_is_complete(self):
        assert catalog_names() == sorted(["quadratic", "quadratic_potential", "anisotropic", "velocity_flat"])
        with pytest.raises(WchjError):
            catalog_entry("nonexistent")


class TestVectorEvaluation:
    def setup_method(self):
        q = catalog_entry("quadratic")
        self.sys = SystemSpec(components=(q, q), coupling=PAIR)

    def test_pair_system_velocity_two(self):
        out = eval_L_vec(self.sys, np.array([[0.3]]), np.array([[2.0]]))
        assert np.abs(out - 2.0).max() < 1e-15

    def test_zero_velocity_zero_cost(self):
        out = eval_L_vec(self.sys, np.array([[0.1]]), np.array([[0.0]]))
        assert np.abs(out).max() == 0.0

    def test_potential_system_values(self):
        qp = catalog_entry("quadratic_potential", amplitude=1.0, freq=1)
        sysp = SystemSpec(components=(qp, qp), coupling=PAIR)
        out = eval_L_vec(sysp, np.array([[0.0]]), np.array([[1.0]]))
        assert np.abs(out - 1.5).max() < 1e-15  # 1/2 + cos(0)

    def test_pair_hamiltonian_values(self):
        out = eval_H_vec(self.sys, np.array([[0.0]]), np.array([[1.0]]))
        assert np.abs(out - 0.5).max() < 1e-15

    def test_potential_hamiltonian_at_zero_slope(self):
        qp = catalog_entry("quadratic_potential", amplitude=0.7, freq=2)
        sysp = SystemSpec(components=(qp,), coupling=validate_coupling([[0.0]]))
        x = np.array([[0.25]])
        out = eval_H_vec(sysp, x, np.array([[0.0]]))
        assert abs(float(out) - (-0.7 * np.cos(2 * np.pi * 2 * 0.25))) < 1e-15

    def test_non_finite_rejected(self):
        with pytest.raises(NonFiniteError):
            eval_L_vec(self.sys, np.array([[np.nan]]), np.array([[1.0]]))

    @settings(max_examples=50, deadline=None)
    @given(x=st.floats(0.0, 1.0), v=st.floats(-5.0, 5.0), p=st.floats(-5.0, 5.0))
    def test_fenchel_young(self, x, v, p):
        for name in ("quadratic", "quadratic_potential", "velocity_flat"):
            spec = catalog_entry(name)
            xx = np.array([[x]])
            H = float(spec.H(xx, np.array([[p]])))
            L = float(spec.L(xx, np.array([[v]])))
            assert H + L >= p * v - 1e-9


class TestHypotheses:
    @pytest.mark.parametrize("name", ["quadratic", "quadratic_potential", "velocity_flat"])
    def test_growth_and_convexity(self, name):
        rep = hypothesis_check(catalog_entry(name), samples=300, seed=7)
        assert rep.lower_bound_violation <= 1e-9
        assert rep.convexity_violation <= 1e-9
        assert rep.derivative_growth_violation <= 1e-6

    def test_anisotropic_hypotheses(self):
        rep = hypothesis_check(catalog_entry("anisotropic", dim=2), samples=200, seed=8)
        assert rep.lower_bound_violation <= 1e-9
        assert rep.convexity_violation <= 1e-9

    def test_flat_entry_is_flagged_lipschitz(self):
        spec = catalog_entry("velocity_flat")
        assert spec.regularity == "Lipschitz-convex"
        assert spec.kinks == (0.0,)


class TestSystemSpec:
    def test_dimension_mismatch(self):
        q1 = catalog_entry("quadratic", dim=1)
        q2 = catalog_entry("quadratic", dim=2)
        with pytest.raises(WchjError):
            SystemSpec(components=(q1, q2), coupling=PAIR)

    def test_coupling_size_mismatch(self):
        q = catalog_entry("quadratic")
        with pytest.raises(WchjError):
            SystemSpec(components=(q,), coupling=PAIR)

    def test_velocity_bound_aggregates(self):
        a = catalog_entry("quadratic", velocity_bound=2.0)
        b = catalog_entry("quadratic", velocity_bound=5.0)
        sysm = SystemSpec(components=(a, b), coupling=PAIR)
        assert sysm.velocity_bound == 5.0
        assert sysm.grad_H_bound(3.0) == 3.0
