import numpy as np
import pytest
from hypothesis import given, strategies as st

from cbdm import (EPS0, Dirichlet, GeometryError, Interface, Neumann, microstrip_fixture,
                  validate_polygon)
from cbdm.geometry import interface_pairs


def test_unit_square_alphas():
    p = validate_polygon([0, 1, 1 + 1j, 1j])
    np.testing.assert_allclose(p.alphas, [0.5] * 4, atol=1e-15)
    assert abs(p.alphas.sum() - 2) < 1e-12


def test_clockwise_input_is_reoriented():
    p = validate_polygon([1j, 1 + 1j, 1, 0])
    assert p.area > 0
    assert set(np.round(p.vertices, 12)) == {0, 1, 1 + 1j, 1j}


def test_slit_tip_has_alpha_two():
    p = validate_polygon([0, 2, 2 + 1j, 1 + 1j, 2 + 1j, 2 + 2j, 2j])
    assert p.alphas[3] == pytest.approx(2.0, abs=1e-12)
    assert abs(p.alphas.sum() - (p.n - 2)) < 1e-12


def test_collinear_pass_through_has_alpha_one():
    p = validate_polygon([0, 1, 2, 2 + 1j, 1j])
    assert p.alphas[1] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("verts", [
    [0, 1, 1, 1 + 1j],              # repeated consecutive vertex
    [0, 1],                          # too few vertices
    [0, 1 + 1j, 1, 1j],              # bow tie
])
def test_invalid_polygons(verts):
    with pytest.raises(GeometryError):
        validate_polygon(verts)


@given(st.integers(3, 12), st.floats(0.1, 10.0), st.floats(-np.pi, np.pi))
def test_regular_polygon_angle_sum(n, r, phase):
    z = r * np.exp(1j * (phase + 2 * np.pi * np.arange(n) / n))
    p = validate_polygon(z)
    assert abs(p.alphas.sum() - (n - 2)) < 1e-12
    np.testing.assert_allclose(p.alphas, 1 - 2 / n, atol=1e-12)


def test_fixture_single_subdomain():
    pr = microstrip_fixture()
    (sub,) = pr.subdomains
    v = sub.polygon.vertices
    tip = int(np.argmin(np.abs(v - (1 + 1.5j))))
    assert sub.polygon.alphas[tip] == pytest.approx(2.0)
    kinds = [c.kind for c in sub.conditions]
    assert kinds == ["dirichlet", "neumann", "dirichlet", "dirichlet", "neumann",
                     "dirichlet", "dirichlet"]
    assert sorted(set(pr.dirichlet_values)) == [0.0, 1.0]


def test_fixture_partitioned_shares_interface():
    pr = microstrip_fixture(interface="diagonal", eps_b=10 * EPS0)
    a, b = pr.subdomains
    assert a.polygon.centroid.imag > b.polygon.centroid.imag
    assert (a.eps, b.eps) == (EPS0, 10 * EPS0)
    pairs = interface_pairs(pr)
    assert len(pairs) == 1
    m, k, mm, kk = pairs[0]
    pa, pb = pr.subdomains[m].polygon.side(k), pr.subdomains[mm].polygon.side(kk)
    assert abs(pa[0] - pb[1]) < 1e-14 and abs(pa[1] - pb[0]) < 1e-14
    assert {pa[0], pa[1]} == {0.5 + 0j, 1 + 1.5j}


def test_interface_sides_appear_twice():
    pr = microstrip_fixture(interface="diagonal")
    sides = [(m, k) for m, s in enumerate(pr.subdomains)
             for k, c in enumerate(s.conditions) if isinstance(c, Interface)]
    assert len(sides) == 2
    assert {pr.subdomains[m].conditions[k].neighbor for m, k in sides} == {0, 1}


def test_split_and_merge_recovers_vertices():
    whole = set(np.round(microstrip_fixture().subdomains[0].polygon.vertices, 12))
    parts = microstrip_fixture(interface="diagonal").subdomains
    merged = set()
    for s in parts:
        merged |= set(np.round(s.polygon.vertices, 12))
    assert whole <= merged
    assert merged - whole == {0.5 + 0j}
    total = sum(s.polygon.area for s in parts)
    assert total == pytest.approx(microstrip_fixture().subdomains[0].polygon.area, abs=1e-12)


@pytest.mark.parametrize("kw", [dict(x_end=2.0), dict(x_end=0.0), dict(h=4.0), dict(h=0.0)])
def test_fixture_rejects_bad_dimensions(kw):
    with pytest.raises(GeometryError):
        microstrip_fixture(**kw)


def test_fixture_rejects_interface_not_crossing():
    with pytest.raises(GeometryError):
        microstrip_fixture(interface=((0.5, 0.0), (0.7, 0.0)))


def test_junction_takes_the_dirichlet_value():
    pr = microstrip_fixture()
    assert pr.junction_value(2 + 1.5j) == 1.0
    assert pr.junction_value(2 + 4j) == 0.0
    assert pr.junction_value(0j) == 0.0
    assert pr.junction_value(2 + 0.7j) is None


def test_neumann_gamma_must_be_zero():
    from cbdm.geometry import ProblemSpec, Subdomain
    p = validate_polygon([0, 1, 1 + 1j, 1j])
    sub = Subdomain(polygon=p, conditions=(Dirichlet(0), Neumann(0.5), Dirichlet(1), Neumann()),
                    eps=EPS0, steps={1: 0.1, 3: 0.1})
    with pytest.raises(GeometryError):
        ProblemSpec(subdomains=(sub,))
