import numpy as np
import pytest
from hypothesis import given, strategies as st

from cbdm import (EPS0, Dirichlet, DiscretizationError, DomainError, Neumann, discretize,
                  interface_coeffs, microstrip_fixture, residual, validate_polygon)
from cbdm.discretize import nodes_on_side
from cbdm.geometry import ProblemSpec, Subdomain, point_in_polygon

from cases import fixture_nodes


def square_with_neumann_wall(H=2.0, step=0.05):
    poly = validate_polygon([0, H, H + H * 1j, H * 1j])
    conds = (Dirichlet(0.0), Neumann(), Dirichlet(0.0), Dirichlet(1.0))
    sub = Subdomain(polygon=poly, conditions=conds, eps=EPS0, steps={1: step})
    return ProblemSpec(subdomains=(sub,))


def test_unsplit_wall_of_length_two_has_39_nodes():
    ns = discretize(square_with_neumann_wall())
    assert ns.J == 39
    assert all(len(ns.probes_of(k)) == 1 for k in range(ns.J))


def test_fixture_wall_nodes():
    ns = fixture_nodes(0.05)
    # the strip splits the symmetry wall into lengths 1.5 and 2.5
    assert ns.J == 29 + 49
    assert sorted(len(v) for v in ns.side_nodes.values()) == [29, 49]


def test_partitioned_node_counts():
    ns = fixture_nodes(0.01, "diagonal")
    assert ns.J == 555
    assert len(ns.probes) == 712


def test_interface_nodes_have_probes_in_both_subdomains():
    ns = fixture_nodes(0.05, "diagonal")
    iface = [k for k in range(ns.J) if ns.kind[k] == "interface"]
    assert iface
    for k in iface:
        pr = ns.probes_of(k)
        assert {p.subdomain for p in pr} == {0, 1}
        assert set(ns.images[k]) == {0, 1}


def _check_stencil(ns):
    problem = ns.problem
    for p in ns.probes:
        k = p.node
        d = p.z - ns.z[k]
        assert abs(abs(d) - ns.step[k]) <= 1e-12
        sub = problem.subdomains[p.subdomain]
        side = [s for (m, s), ids in ns.side_nodes.items() if m == p.subdomain and k in ids][0]
        a, b = sub.polygon.side(side)
        tangent = (b - a) / abs(b - a)
        angle = abs(np.angle(d / tangent))
        assert abs(angle - np.pi / 2) <= 1e-10
        if p.value is None:
            assert point_in_polygon(sub.polygon, p.z)
            assert abs(ns.maps[p.subdomain].forward(p.t) - p.z) <= 1e-8
        else:
            assert p.value in problem.dirichlet_values
    for (m, s), ids in ns.side_nodes.items():
        gaps = np.abs(np.diff(ns.z[ids]))
        np.testing.assert_allclose(gaps, ns.step[ids[0]], atol=1e-12)


@pytest.mark.parametrize("step,iface", [(0.05, None), (0.05, "diagonal"), (0.01, "diagonal")])
def test_stencil_geometry(step, iface):
    _check_stencil(fixture_nodes(step, iface))


def test_probe_on_dirichlet_side_reads_datum():
    # a 45 degree interface out of the corner sends the first node's probes onto the walls
    ns = discretize(microstrip_fixture(H=2.0, h=1.0, interface=((0, 0), (1, 1))))
    fixed = [p for p in ns.probes if p.value is not None]
    assert len(fixed) == 2
    assert {p.value for p in fixed} == {0.0}
    assert {round(p.z.real, 12) * round(p.z.imag, 12) for p in fixed} == {0.0}
    _check_stencil(ns)


def test_end_neighbours_are_junction_values():
    ns = fixture_nodes(0.05)
    for (m, s), ids in ns.side_nodes.items():
        for end, nb in ((ids[0], ns.prev), (ids[-1], ns.next)):
            assert nb[end].idx == ()
            assert nb[end].const in (0.0, 1.0)


def test_step_larger_than_side():
    with pytest.raises(DiscretizationError):
        discretize(microstrip_fixture(step=3.0))


def test_nodes_on_side_remainder():
    pts = nodes_on_side(0j, 1 + 0j, 0.3)
    np.testing.assert_allclose(pts, [0.3, 0.6])
    assert abs(1 - pts[-1]) >= 0.3
    with pytest.raises(DiscretizationError):
        nodes_on_side(0j, 1 + 0j, 0.0)


def test_interface_coeffs():
    assert interface_coeffs(EPS0, EPS0) == (1.0, 1.0)
    ca, cb = interface_coeffs(EPS0, 10 * EPS0)
    assert ca == pytest.approx(2 / 11, abs=1e-15) and cb == pytest.approx(20 / 11, abs=1e-15)
    ca, cb = interface_coeffs(1e-12, 1.0)
    assert ca == pytest.approx(0, abs=1e-11) and cb == pytest.approx(2, abs=1e-11)
    with pytest.raises(DomainError):
        interface_coeffs(0.0, 1.0)


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_interface_coeffs_sum_to_two(a, b):
    assert sum(interface_coeffs(a, b)) == pytest.approx(2.0, abs=1e-14)


@given(st.floats(-10, 10), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_residual_of_constant(c, a, b):
    coefs = interface_coeffs(a, b)
    assert residual(c, c, [c, c], coefs, c) == pytest.approx(0.0, abs=1e-12 * (1 + abs(c)))


def test_residual_linear_field_and_perturbation():
    y, h = 0.7, 0.05
    assert residual(y, y, [y + h, y - h], (1.0, 1.0), y) == pytest.approx(0, abs=1e-15)
    delta = 1e-3
    assert residual(y, y, [y + h, y - h], (1.0, 1.0), y + delta) == pytest.approx(-4 * delta)
    assert residual(y - h, y + h, [y], (2.0,), y) == pytest.approx(0, abs=1e-15)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_linear_fields_are_exact_on_interfaces(a, b, c):
    ns = fixture_nodes(0.05, "diagonal")

    def psi(z):
        return a * z.real + b * z.imag + c

    for ids in ns.side_nodes.values():
        for j in range(1, len(ids) - 1):
            k = ids[j]
            if ns.kind[k] != "interface":
                continue
            pr = ns.probes_of(k)
            xi = residual(psi(ns.z[ids[j - 1]]), psi(ns.z[ids[j + 1]]),
                          [psi(p.z) for p in pr], [p.coef for p in pr], psi(ns.z[k]))
            assert abs(xi) <= 1e-12 * (1 + abs(a) + abs(b) + abs(c))


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_tangential_linear_fields_are_exact_on_neumann_walls(b, c):
    ns = fixture_nodes(0.05)

    def psi(z):
        return b * z.imag + c   # the symmetry wall is vertical

    for ids in ns.side_nodes.values():
        for j in range(1, len(ids) - 1):
            k = ids[j]
            (p,) = ns.probes_of(k)
            xi = residual(psi(ns.z[ids[j - 1]]), psi(ns.z[ids[j + 1]]), [psi(p.z)], [p.coef],
                          psi(ns.z[k]))
            assert abs(xi) <= 1e-12 * (1 + abs(b) + abs(c))


def test_trace_layouts_cover_the_circle():
    ns = fixture_nodes(0.05, "diagonal")
    for lay in ns.layouts:
        assert np.all(np.diff(lay.theta) >= 0)
        assert lay.theta[-1] - lay.theta[0] < 2 * np.pi
        S, s0 = lay.matrix(ns.J)
        assert S.shape == (len(lay.theta), ns.J)
