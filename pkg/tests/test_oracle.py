import numpy as np
import pytest

from cbdm import (EPS0, Dirichlet, DiscretizationError, Interface, Neumann, fd_reference,
                  microstrip_fixture, validate_polygon)
from cbdm.geometry import ProblemSpec, Subdomain
from cbdm.oracle import extrapolated_capacitance, richardson, richardson_order

EXACT_C = 1.9717349e-11   # homogeneous fixture reference, F/m


def plane_capacitor(W=1.0, H=1.0):
    poly = validate_polygon([0, W, W + H * 1j, H * 1j])
    conds = (Dirichlet(0.0), Neumann(), Dirichlet(1.0), Neumann())
    sub = Subdomain(polygon=poly, conditions=conds, eps=EPS0, steps={1: 0.1, 3: 0.1})
    return ProblemSpec(subdomains=(sub,))


def layered_capacitor(eps_lo, eps_hi):
    lo = validate_polygon([0, 1, 1 + 0.5j, 0.5j])
    hi = validate_polygon([0.5j, 1 + 0.5j, 1 + 1j, 1j])
    s_lo = Subdomain(polygon=lo, conditions=(Dirichlet(0.0), Neumann(), Interface(1), Neumann()),
                     eps=eps_lo, steps={1: 0.1, 2: 0.1, 3: 0.1})
    s_hi = Subdomain(polygon=hi, conditions=(Interface(0), Neumann(), Dirichlet(1.0), Neumann()),
                     eps=eps_hi, steps={0: 0.1, 1: 0.1, 3: 0.1})
    return ProblemSpec(subdomains=(s_lo, s_hi))


def test_plane_capacitor_is_linear():
    g = fd_reference(plane_capacitor(), 1 / 16)
    Y = np.broadcast_to(g.y[:, None], g.psi.shape)
    assert np.nanmax(np.abs(g.psi - Y)) <= 1e-10
    assert g.capacitance == pytest.approx(EPS0, rel=1e-10)
    assert g.charge == pytest.approx(EPS0, rel=1e-10)
    assert g.max_residual <= 1e-10


def test_layered_capacitor_series_value():
    g = fd_reference(layered_capacitor(EPS0, 10 * EPS0), 1 / 16)
    expected = 1 / (0.5 / EPS0 + 0.5 / (10 * EPS0))
    assert g.capacitance == pytest.approx(expected, rel=1e-10)
    # potential is piecewise linear with the kink at the interface
    v_mid = g.sample(0.5 + 0.5j)[0]
    assert v_mid == pytest.approx(10 / 11, abs=1e-12)   # most of the drop is in the low-eps layer


def test_dirichlet_nodes_hold_their_data():
    g = fd_reference(microstrip_fixture(), 1 / 32)
    j = int(np.flatnonzero(np.isclose(g.y, 1.5))[0])
    strip = g.x >= 1.0
    assert np.all(g.psi[j, strip] == 1.0)
    assert np.all(g.psi[0] == 0.0) and np.all(g.psi[-1] == 0.0) and np.all(g.psi[:, 0] == 0.0)
    assert np.all(g.fixed[j, strip])


def test_sampling_is_bilinear():
    g = fd_reference(plane_capacitor(), 1 / 8)
    assert g.sample(0.33 + 0.41j)[0] == pytest.approx(0.41, abs=1e-12)
    assert np.isnan(g.sample(2 + 0.5j)[0])


def test_too_coarse_grid_raises():
    with pytest.raises(DiscretizationError):
        fd_reference(microstrip_fixture(), 0.5)


def test_grid_must_divide_the_box():
    with pytest.raises(DiscretizationError):
        fd_reference(microstrip_fixture(), 0.3)


def test_richardson_helpers():
    q = [1 + 0.5 ** (2 * i) for i in range(3)]       # exact second order
    assert richardson_order(*q) == pytest.approx(2.0, abs=1e-12)
    assert richardson(q[1], q[2], 2.0) == pytest.approx(1.0, abs=1e-12)


def test_self_convergence_order_matches_slit_pollution():
    # a slit tip (exponent 1/2) pollutes the whole grid to O(h), not O(h^2)
    pr = microstrip_fixture()
    pts = 0.5 + 1j * np.linspace(0.25, 3.75, 15)
    v = [fd_reference(pr, h).sample(pts) for h in (1 / 32, 1 / 64, 1 / 128)]
    ratio = np.max(np.abs(v[0] - v[1])) / np.max(np.abs(v[1] - v[2]))
    assert 1.8 <= ratio <= 2.3


def test_extrapolated_capacitance_close_to_reference():
    C, p, caps = extrapolated_capacitance(microstrip_fixture())
    assert 0.8 <= p <= 1.2
    assert np.all(np.diff(caps) < 0)
    assert abs(C / EXACT_C - 1) <= 2e-3
