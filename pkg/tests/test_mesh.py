"""Tests for geometry, meshing, DOF numbering and horizon maps."""

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracshell.errors import DomainError
from fracshell.mesh import (
    DofMap,
    PanelGeometry,
    build_horizon_map,
    build_mesh,
    dynamic_rate,
    elements_for_rate,
    gauss_points_1d,
    interpolation_matrix,
    mesh_for_rate,
)


@pytest.fixture
def unit_panel():
    return PanelGeometry(1.0, 1.0, 0.1, 10.0)


class TestGeometry:
    def test_defaults_flat(self):
        g = PanelGeometry(1.0, 2.0, 0.1)
        assert math.isinf(g.R) and g.curvature == 0.0

    @pytest.mark.parametrize("kw", [dict(a=0.0), dict(b=-1.0), dict(h=math.inf), dict(R=0.0)])
    def test_invalid(self, kw):
        args = dict(a=1.0, b=1.0, h=0.1, R=10.0) | kw
        with pytest.raises(DomainError):
            PanelGeometry(**args)

    def test_shallowness_warning(self):
        with pytest.warns(UserWarning, match="h/R"):
            PanelGeometry(1.0, 1.0, 0.1, 1.0)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            PanelGeometry(1.0, 1.0, 0.1, 10.0)


class TestMesh:
    def test_counts(self, unit_panel):
        m = build_mesh(unit_panel, 2, 2)
        assert (m.n_nodes, m.n_elements, m.n_dofs) == (9, 4, 45)

    def test_spacing(self, unit_panel):
        m = build_mesh(unit_panel, 10, 4)
        assert m.le1 == pytest.approx(0.1) and m.le2 == pytest.approx(0.25)
        np.testing.assert_allclose(np.diff(m.x1), 0.1)

    def test_rate_mesh(self, unit_panel):
        m = mesh_for_rate(unit_panel, 0.5, 10)
        assert (m.n1, m.n2) == (20, 20)
        assert m.le1 == pytest.approx(0.05)

    @pytest.mark.parametrize("n1, n2", [(1, 4), (4, 0), (2.5, 4)])
    def test_invalid_counts(self, unit_panel, n1, n2):
        with pytest.raises(DomainError):
            build_mesh(unit_panel, n1, n2)

    def test_connectivity_counterclockwise(self, unit_panel):
        m = build_mesh(unit_panel, 3, 4)
        xy = m.coords[m.connectivity]
        x, y = xy[..., 0], xy[..., 1]
        area = 0.5 * np.sum(x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y, axis=1)
        np.testing.assert_allclose(area, m.le1 * m.le2)

    def test_edges_and_centre(self, unit_panel):
        m = build_mesh(unit_panel, 4, 6)
        np.testing.assert_allclose(m.coords[m.edge_nodes("x1=a"), 0], 1.0)
        np.testing.assert_allclose(m.coords[m.edge_nodes("x2=0"), 1], 0.0)
        assert m.boundary_nodes.size == 2 * (5 + 7) - 4
        np.testing.assert_allclose(m.coords[m.center_node], [0.5, 0.5])
        with pytest.raises(ValueError):
            m.edge_nodes("x3=0")

    def test_summary(self, unit_panel):
        s = build_mesh(unit_panel, 4, 4).summary()
        assert s["dofs"] == 125 and s["le1"] == 0.25


class TestRate:
    @pytest.mark.parametrize("l_f, le, expected", [(0.5, 0.05, 10.0), (0.5, 0.5, 1.0), (1.0, 0.05, 20.0)])
    def test_dynamic_rate(self, l_f, le, expected):
        assert dynamic_rate(l_f, le) == pytest.approx(expected)

    def test_errors(self):
        with pytest.raises(DomainError):
            dynamic_rate(0.0, 0.1)

    @given(l_f=st.floats(0.05, 1.0), rate=st.floats(1.0, 30.0))
    def test_elements_reach_rate(self, l_f, rate):
        n = elements_for_rate(1.0, l_f, rate)
        assert n % 2 == 0 and n >= 2
        assert dynamic_rate(l_f, 1.0 / n) >= rate - 1e-6


class TestDofMap:
    def test_numbering(self):
        d = DofMap(4, np.array([0, 7]))
        assert d.dof(1, "w0") == 7
        np.testing.assert_array_equal(d.node_dofs(2), [10, 11, 12, 13, 14])
        assert d.free.size == 18 and 7 not in d.free


class TestQuadrature:
    def test_gauss_integrates_cubic(self):
        nodes = np.linspace(0.0, 2.0, 5)
        x, w = gauss_points_1d(nodes, 2)
        assert np.sum(w * x**3) == pytest.approx(4.0)

    def test_interpolation_reproduces_linear(self):
        nodes = np.linspace(0.0, 1.0, 7)
        pts = np.random.default_rng(1).uniform(0, 1, 30)
        np.testing.assert_allclose(interpolation_matrix(nodes, pts) @ (2 * nodes + 1), 2 * pts + 1)


class TestHorizonMap:
    def test_sets(self, unit_panel):
        hm = build_horizon_map(build_mesh(unit_panel, 4, 4), 0.25, 0.8)
        assert [s.name for s in hm.sets] == ["2x2", "1x1"]
        assert hm.sets[0].shape == (8, 8) and hm.sets[1].shape == (4, 4)
        full = build_horizon_map(build_mesh(unit_panel, 4, 4), 0.25, 0.8, "full")
        assert len(full.sets) == 1 and "shear" in full.sets[0].groups

    def test_centre_symmetric(self, unit_panel):
        hm = build_horizon_map(build_mesh(unit_panel, 4, 4), 0.25, 0.8)
        # the one-point set of a 4x4 mesh has points at 0.125, 0.375, ...
        h1, h2 = hm.horizons(1, 1, 2)
        assert h1 == pytest.approx((0.25, 0.25)) and h2 == pytest.approx((0.25, 0.25))

    def test_edge_point_truncated(self, unit_panel):
        hm = build_horizon_map(build_mesh(unit_panel, 4, 4), 0.25, 0.8)
        qs = hm.sets[0]
        assert qs.h1[0][0] == pytest.approx(qs.x1[0]) and qs.h1[0][0] < 0.25

    def test_full_domain_note(self, unit_panel):
        hm = build_horizon_map(build_mesh(unit_panel, 4, 4), 1.0, 0.9)
        assert hm.notes
        qs = hm.sets[0]
        np.testing.assert_allclose(qs.h1.sum(axis=1), 1.0)

    def test_errors(self, unit_panel):
        m = build_mesh(unit_panel, 4, 4)
        with pytest.raises(DomainError):
            build_horizon_map(m, -0.1, 0.8)
        with pytest.raises(DomainError):
            build_horizon_map(m, None, 0.8)
        with pytest.raises(DomainError):
            build_horizon_map(m, 0.2, 0.8, "reduced")

    def test_support_contained_and_mirrored(self, unit_panel):
        m = build_mesh(unit_panel, 6, 6)
        hm = build_horizon_map(m, 0.35, 0.7)
        for qs in hm.sets:
            for D, x, h in ((qs.D1, qs.x1, qs.h1), (qs.D2, qs.x2, qs.h2)):
                for k in range(x.size):
                    support = m.x1[np.flatnonzero(D[k])]
                    assert support.min() >= x[k] - h[k, 0] - m.le1 - 1e-12
                    assert support.max() <= x[k] + h[k, 1] + m.le1 + 1e-12
                np.testing.assert_allclose(h[::-1, ::-1], h, atol=1e-12)
                np.testing.assert_allclose(D[::-1, ::-1], -D, atol=1e-9)

    def test_stencils_accessor(self, unit_panel):
        hm = build_horizon_map(build_mesh(unit_panel, 4, 4), 0.5, 0.8)
        s1, s2 = hm.stencils(0, 3, 4)
        assert s1.apply(hm.mesh.x1) == pytest.approx(1.0)
        assert s2.apply(np.ones(5)) == pytest.approx(0.0, abs=1e-12)
        assert sum(1 for _ in hm.points()) == 64 + 16

    @settings(max_examples=10, deadline=None)
    @given(n=st.integers(2, 5), l_f=st.floats(0.1, 1.5))
    def test_support_grows_with_rate(self, n, l_f):
        g = PanelGeometry(1.0, 1.0, 0.1)
        coarse = build_horizon_map(build_mesh(g, 2 * n, 2 * n), l_f, 0.8).sets[0]
        fine = build_horizon_map(build_mesh(g, 4 * n, 4 * n), l_f, 0.8).sets[0]
        assert np.count_nonzero(fine.D1[0]) >= np.count_nonzero(coarse.D1[0])
