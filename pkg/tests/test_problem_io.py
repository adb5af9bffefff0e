from pathlib import Path

import numpy as np
import pytest

from cbdm import EPS0, microstrip_fixture
from cbdm.problem_io import ProblemFileError, dump_problem, load_problem, parse_problem

PROBLEMS = Path(__file__).resolve().parents[1] / "problems"


def same_problem(a, b):
    assert len(a.subdomains) == len(b.subdomains)
    for sa, sb in zip(a.subdomains, b.subdomains):
        np.testing.assert_allclose(sa.polygon.vertices, sb.polygon.vertices, atol=1e-15)
        np.testing.assert_allclose(sa.polygon.alphas, sb.polygon.alphas, atol=1e-14)
        assert sa.conditions == sb.conditions
        assert sa.eps == pytest.approx(sb.eps, rel=1e-15)
        assert sa.steps == sb.steps
    assert (a.map_tol, a.sor_tol) == (b.map_tol, b.sor_tol)


@pytest.mark.parametrize("name,kw", [
    ("microstrip.toml", dict(step=0.05)),
    ("microstrip_partitioned.toml", dict(step=0.01, interface="diagonal")),
    ("microstrip_inhomogeneous.toml", dict(step=0.01, interface="diagonal", eps_b=10 * EPS0)),
])
def test_committed_problems_match_fixture(name, kw):
    pf = load_problem(PROBLEMS / name)
    same_problem(pf.problem, microstrip_fixture(**kw))
    assert pf.probe["x"] == 0.999 and pf.probe["count"] == 401


def test_dump_parse_round_trip():
    pr = microstrip_fixture(interface="diagonal", eps_b=4 * EPS0, step=0.02)
    text = dump_problem(pr, probe={"x": 0.5, "y_min": 0.0, "y_max": 4.0, "count": 3})
    assert "np.float64" not in text
    pf = parse_problem(text)
    same_problem(pf.problem, pr)
    assert pf.probe == {"x": 0.5, "y_min": 0.0, "y_max": 4.0, "count": 3}


SQUARE = """
[[subdomain]]
vertices = [[0, 0], [1, 0], [1, 1], [0, 1]]
  [[subdomain.side]]
  index = 0
  kind = "dirichlet"
  value = 0
  [[subdomain.side]]
  index = 1
  kind = "neumann"
  step = 0.1
  [[subdomain.side]]
  index = 2
  kind = "dirichlet"
  value = 1
"""


@pytest.mark.parametrize("text,match", [
    ("[[subdomain]\n", "syntax"),
    ("[solver]\nmap_tol = 1e-9\n", "no \\[\\[subdomain\\]\\]"),
    (SQUARE, r"subdomain\[0\]: no condition for side\(s\) \[3\]"),
    (SQUARE + '  [[subdomain.side]]\n  index = 3\n  kind = "robin"\n', r"side\[3\]\.kind"),
    (SQUARE + '  [[subdomain.side]]\n  index = 3\n  kind = "dirichlet"\n',
     r"side\[3\]: missing field 'value'"),
    (SQUARE + '  [[subdomain.side]]\n  index = 3\n  kind = "neumann"\n  step = "x"\n',
     r"side\[3\]\.step: expected"),
    (SQUARE + '  [[subdomain.side]]\n  index = 2\n  kind = "neumann"\n  step = 0.1\n',
     r"side\[2\]: side given twice"),
    (SQUARE.replace("[[0, 0], [1, 0], [1, 1], [0, 1]]", "[[0, 1], [1, 1], [1, 0], [0, 0]]"),
     "counter-clockwise"),
])
def test_parse_errors_name_the_field(text, match):
    with pytest.raises(ProblemFileError, match=match):
        parse_problem(text)


def test_valid_minimal_problem():
    pf = parse_problem(SQUARE + '  [[subdomain.side]]\n  index = 3\n  kind = "neumann"\n  step = 0.1\n')
    sub = pf.problem.subdomains[0]
    assert sub.eps == EPS0 and sub.steps == {1: 0.1, 3: 0.1}
    assert pf.problem.map_tol == 1e-9 and pf.problem.sor_tol == 1e-6


def test_missing_file(tmp_path):
    with pytest.raises(ProblemFileError, match="cannot read"):
        load_problem(tmp_path / "nope.toml")
