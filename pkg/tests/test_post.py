import csv
import re

import numpy as np
import pytest

from cbdm import (DomainError, FluxContour, capacitance, export_field, microstrip_fixture,
                  potential_profile, shield_contour, solve)
from cbdm.geometry import distance_to_boundary
from cbdm.post import contour_lines, field_grid, on_slit, strip_contour

from cases import fixture_solution


def test_shield_contour_geometry():
    c = shield_contour(microstrip_fixture())
    np.testing.assert_allclose(c.vertices, [2 + 3.975j, 0.025 + 3.975j, 0.025 + 0.025j,
                                            2 + 0.025j], atol=1e-14)
    pts, nrm, w = c.quadrature(microstrip_fixture())
    assert w.sum() == pytest.approx(1.975 * 2 + 3.95, abs=1e-12)
    # normals point away from the shield
    assert nrm[0] == pytest.approx(-1j) and nrm[-1] == pytest.approx(1j)


def test_contour_rejects_nonpositive_offset():
    with pytest.raises(ValueError):
        FluxContour(np.array([0j, 1 + 0j]), d=0.0)
    with pytest.raises(ValueError):
        shield_contour(microstrip_fixture(), d=-0.1)


def test_contour_splits_at_interface():
    pr = microstrip_fixture(interface="diagonal")
    pts, _, _ = shield_contour(pr).quadrature(pr)
    owners = [[m for m, s in enumerate(pr.subdomains) if s.polygon.contains(z)] for z in pts]
    assert all(len(o) == 1 for o in owners)


def test_profile_on_shield_is_zero():
    sol = fixture_solution(0.05)
    v = potential_profile(sol, 0.999, [0.0, 4.0])
    assert list(v) == [0.0, 0.0]
    assert potential_profile(sol, 1.5, [1.5])[0] == 1.0


def test_profile_bounded_and_peaks_at_strip():
    sol = fixture_solution(0.05)
    ys = np.linspace(0, 4, 81)
    v = potential_profile(sol, 0.999, ys)
    assert np.all((v >= 0) & (v <= 1))
    assert abs(ys[np.argmax(v)] - 1.5) < 0.06


def test_profile_outside_raises():
    with pytest.raises(DomainError):
        potential_profile(fixture_solution(0.05), 2.5, [1.0])


def test_zero_data_gives_zero_everywhere(tmp_path):
    sol = solve(microstrip_fixture(strip_value=0.0))
    assert np.all(potential_profile(sol, 0.999, np.linspace(0, 4, 11)) == 0)
    grid = export_field(sol, np.linspace(0, 2, 5), np.linspace(0, 4, 5), tmp_path / "f.csv")
    assert np.all(grid[np.isfinite(grid)] == 0)
    assert capacitance(sol) == 0.0


def test_contour_refinement():
    sol = fixture_solution(0.05)
    c1 = capacitance(sol, shield_contour(sol.problem, spacing=0.025))
    c2 = capacitance(sol, shield_contour(sol.problem, spacing=0.0125))
    assert abs(c2 / c1 - 1) < 5e-4


def test_shield_and_strip_contours_agree():
    sol = fixture_solution(0.01, variant="cheb")
    cs = capacitance(sol)
    for d in (0.1, 0.25):
        cstrip = capacitance(sol, strip_contour(1.0, 1.5, 2.0, d=d))
        assert abs(cstrip / cs - 1) < 0.01


def test_neumann_wall_flux_vanishes():
    sol = fixture_solution(0.05)
    pts, _, _ = shield_contour(sol.problem).quadrature(sol.problem)
    for z in pts[pts.real > 1.95]:
        assert abs(sol.gradient(z)[0]) <= 1e-3


def test_capacitance_sample_near_tip_is_named():
    sol = fixture_solution(0.05)
    c = FluxContour(np.array([0.999 + 1.5003j, 1.001 + 1.5003j]), d=0.0003, spacing=1.0)
    with pytest.raises(Exception, match="contour sample"):
        capacitance(sol, c)


def test_export_field_rows_and_format(tmp_path):
    sol = fixture_solution(0.05)
    path = tmp_path / "field.csv"
    xs, ys = np.linspace(0, 2, 10), np.linspace(0, 4, 10)
    export_field(sol, xs, ys, path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["x", "y", "psi"]
    assert len(rows) - 1 == 100
    # full precision and row-major order
    assert float(rows[2][0]) == xs[1] and float(rows[11][1]) == ys[1]
    vals = np.array([float(r[2]) for r in rows[1:]])
    assert np.all((vals >= 0) & (vals <= 1))


def test_export_skips_slit_points(tmp_path):
    sol = fixture_solution(0.05)
    xs, ys = np.linspace(0, 2, 5), np.linspace(0, 4, 9)   # y = 1.5 lies on the grid
    grid = export_field(sol, xs, ys, tmp_path / "f.csv")
    j = int(np.flatnonzero(np.isclose(ys, 1.5))[0])
    for i, x in enumerate(xs):
        assert np.isnan(grid[j, i]) == (x >= 1.0)   # the tip belongs to the strip
    assert on_slit(sol.problem, 1.5 + 1.5j) and not on_slit(sol.problem, 0.9 + 1.5j)


def test_export_svg_levels(tmp_path):
    sol = fixture_solution(0.05)
    svg = tmp_path / "f.svg"
    levels = (0.25, 0.5, 0.75)
    export_field(sol, np.linspace(0, 2, 21), np.linspace(0, 4, 41), tmp_path / "f.csv",
                 svg_path=svg, levels=levels)
    text = svg.read_text()
    found = [float(v) for v in re.findall(r'data-level="([^"]+)"', text)]
    assert found == list(levels)


def test_half_volt_contour_is_boundary_terminated():
    sol = fixture_solution(0.05)
    xs, ys = np.linspace(0, 2, 21), np.linspace(0, 4, 41)
    grid = field_grid(sol, xs, ys)
    lines = contour_lines(xs, ys, grid, 0.5)
    assert lines
    poly = sol.problem.subdomains[0].polygon
    h = xs[1] - xs[0]
    for ln in lines:
        a, b = complex(*ln[0]), complex(*ln[-1])
        closed = abs(a - b) < 1e-12
        assert closed or (distance_to_boundary(poly, a) <= h and distance_to_boundary(poly, b) <= h)


def test_export_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        export_field(fixture_solution(0.05), [0.5], [0.5], tmp_path / "missing" / "f.csv")
