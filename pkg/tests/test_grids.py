"""Grid, interpolation, norm and serialization behavior."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wchj.errors import OutOfDomainError, ShapeMismatchError, WchjError
from wchj.grids import (
    BoundedGrid,
    GridField,
    TorusGrid,
    field_from_function,
    interpolate,
    lipschitz_estimate,
    read_csv,
    sup_diff,
    write_csv,
)


def sin_field(m: int, d: int = 1) -> GridField:
    g = TorusGrid(dim=1, m=m)
    x = g.axis_nodes()
    vals = np.vstack([np.sin(2 * np.pi * (k + 1) * x) for k in range(d)])
    return GridField(grid=g, values=vals)


class TestInterpolation:
    def test_exact_at_nodes(self):
        f = sin_field(32, d=2)
        got = f.at(f.grid.axis_nodes())
        assert np.array_equal(got, f.values)

    def test_affine_reproduced_exactly_on_bounded_grid(self):
        g = BoundedGrid(radius=2.0, h=0.01, margin=0.5)
        p = 1.7
        f = field_from_function(g, lambda pts: (p * pts[:, 0])[None, :])
        xs = np.linspace(-1.4, 1.4, 101)
        assert np.abs(f.at(xs)[0] - p * xs).max() <= 1e-14

    def test_sine_interpolation_error_bound(self):
        # standard linear-interpolation bound h^2 max|f''| / 8 at a midpoint
        m = 256
        f = sin_field(m)
        h = 1.0 / m
        x = 0.3 + h / 2
        err = abs(float(f.at(np.array([x]))[0, 0]) - np.sin(2 * np.pi * x))
        assert err <= h * h * (2 * np.pi) ** 2 / 8

    def test_periodicity_is_exact(self):
        f = sin_field(48)
        # dyadic points: x + 1 and x - 1 are exactly representable, so the
        # identity holds bitwise; for general x it holds to the accuracy of
        # the shifted argument itself
        xs = np.array([3 / 256, 127 / 256, 0.75, 249 / 256])
        assert np.array_equal(f.at(xs), f.at(xs + 1.0))
        assert np.array_equal(f.at(xs), f.at(xs - 1.0))
        rnd = np.array([0.013, 0.4999, 0.97])
        assert np.abs(f.at(rnd) - f.at(rnd + 1.0)).max() < 1e-12

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000), x=st.floats(-2.0, 2.0))
    def test_monotone_in_the_data(self, seed, x):
        rng = np.random.default_rng(seed)
        g = TorusGrid(dim=1, m=16)
        a = rng.normal(size=(2, 16))
        b = a + rng.random(size=(2, 16))
        fa = GridField(grid=g, values=a)
        fb = GridField(grid=g, values=b)
        pa = fa.at(np.array([x]))
        pb = fb.at(np.array([x]))
        assert np.all(pa <= pb + 1e-15)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000), x=st.floats(0.0, 1.0))
    def test_nonexpansive_in_sup_norm(self, seed, x):
        rng = np.random.default_rng(seed)
        g = TorusGrid(dim=1, m=12)
        fa = GridField(grid=g, values=rng.normal(size=(1, 12)))
        fb = GridField(grid=g, values=rng.normal(size=(1, 12)))
        gap = abs(float(fa.at(np.array([x]))[0, 0] - fb.at(np.array([x]))[0, 0]))
        assert gap <= sup_diff(fa, fb) + 1e-15

    def test_bilinear_2d_exact_at_nodes_and_periodic(self):
        g = TorusGrid(dim=2, m=8)
        pts = g.points()
        vals = np.vstack([np.sin(2 * np.pi * pts[:, 0]) * np.cos(2 * np.pi * pts[:, 1])]).reshape(1, 8, 8)
        f = GridField(grid=g, values=vals)
        assert np.array_equal(f.at(pts).reshape(1, 8, 8), f.values)
        q = np.array([[5 / 16, 25 / 32]])  # dyadic, so q + 1 is exact
        assert np.array_equal(f.at(q), f.at(q + 1.0))

    def test_out_of_domain_without_extension_raises(self):
        g = BoundedGrid(radius=1.0, h=0.1, margin=0.3)
        f = field_from_function(g, lambda pts: pts[:, 0][None, :])
        with pytest.raises(OutOfDomainError):
            f.at(np.array([1.5]))

    def test_extension_supplies_outside_values(self):
        g = BoundedGrid(radius=1.0, h=0.1, margin=0.3,
                        extension=lambda t, x: (np.atleast_1d(x) * 2.0)[None, :])
        f = field_from_function(g, lambda pts: (2.0 * pts[:, 0])[None, :])
        assert abs(float(f.at(np.array([1.5]))[0, 0]) - 3.0) < 1e-14


class TestNorms:
    def test_sup_diff_zero_and_shift(self):
        f = sin_field(20, d=2)
        assert sup_diff(f, f) == 0.0
        shifted = GridField(grid=f.grid, values=f.values + 0.37)
        assert abs(sup_diff(f, shifted) - 0.37) < 1e-15

    def test_sup_diff_matches_exhaustive_max(self):
        rng = np.random.default_rng(3)
        g = TorusGrid(dim=1, m=9)
        a = GridField(grid=g, values=rng.normal(size=(3, 9)))
        b = GridField(grid=g, values=rng.normal(size=(3, 9)))
        brute = max(abs(a.values[i, k] - b.values[i, k]) for i in range(3) for k in range(9))
        assert sup_diff(a, b) == brute

    def test_sup_diff_shape_mismatch(self):
        a = sin_field(8)
        b = sin_field(16)
        with pytest.raises(ShapeMismatchError):
            sup_diff(a, b)

    def test_lipschitz_constant_field(self):
        g = TorusGrid(dim=1, m=16)
        f = GridField(grid=g, values=np.full((2, 16), 4.2))
        assert lipschitz_estimate(f) == 0.0

    def test_lipschitz_affine_on_bounded(self):
        g = BoundedGrid(radius=1.0, h=1.0 / 64, margin=0.25)
        p = -2.25
        f = field_from_function(g, lambda pts: (p * pts[:, 0])[None, :])
        assert abs(lipschitz_estimate(f) - abs(p)) < 1e-12

    def test_lipschitz_sine(self):
        f = sin_field(512)
        assert abs(lipschitz_estimate(f) - 2 * np.pi) < 1e-3


class TestGridValidation:
    def test_torus_needs_min_nodes(self):
        with pytest.raises(WchjError):
            TorusGrid(dim=1, m=3)

    def test_torus_dim_cap(self):
        with pytest.raises(WchjError):
            TorusGrid(dim=3, m=8)

    def test_margin_inside_radius(self):
        with pytest.raises(WchjError):
            BoundedGrid(radius=1.0, h=0.1, margin=1.5)

    def test_margin_velocity_check(self):
        g = BoundedGrid(radius=2.0, h=0.1, margin=0.5)
        g.check_margin(1.0, 0.5)
        with pytest.raises(WchjError):
            g.check_margin(2.0, 0.5)

    def test_core_mask_extent(self):
        g = BoundedGrid(radius=2.0, h=0.5, margin=1.0)
        x = g.axis_nodes()
        mask = g.core_mask()
        assert np.array_equal(x[mask], np.array([-1.0, -0.5, 0.0, 0.5, 1.0]))

    def test_fields_validate_shape_and_finiteness(self):
        g = TorusGrid(dim=1, m=8)
        with pytest.raises(ShapeMismatchError):
            GridField(grid=g, values=np.zeros((1, 9)))
        with pytest.raises(Exception):
            GridField(grid=g, values=np.full((1, 8), np.nan))

    def test_field_values_read_only(self):
        f = sin_field(8)
        with pytest.raises(ValueError):
            f.values[0, 0] = 1.0


class TestCsv:
    def test_round_trip_torus(self, tmp_path):
        f = sin_field(16, d=2)
        path = tmp_path / "f.csv"
        write_csv(f, path)
        g = read_csv(path)
        assert isinstance(g.grid, TorusGrid) and g.grid.m == 16
        assert np.abs(g.values - f.values).max() < 1e-11

    def test_round_trip_bounded(self, tmp_path):
        grid = BoundedGrid(radius=1.0, h=0.25, margin=0.25)
        f = field_from_function(grid, lambda pts: np.vstack([pts[:, 0], pts[:, 0] ** 2]), time=0.75)
        path = tmp_path / "b.csv"
        write_csv(f, path)
        g = read_csv(path)
        assert isinstance(g.grid, BoundedGrid)
        assert g.time == 0.75
        assert np.abs(g.values - f.values).max() < 1e-11

    def test_header_names_components(self, tmp_path):
        f = sin_field(8, d=3)
        path = tmp_path / "h.csv"
        write_csv(f, path)
        lines = path.read_text().splitlines()
        assert lines[1] == "x,u_1,u_2,u_3"
        # dot decimal separator, no locale surprises
        assert "," in lines[2] and ";" not in lines[2]
