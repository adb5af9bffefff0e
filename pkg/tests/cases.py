"""Cached fixture problems, node sets and solutions shared across test modules."""

import functools

from cbdm import EPS0, discretize, microstrip_fixture, solve, solve_plain


@functools.lru_cache(maxsize=None)
def fixture_problem(step=0.05, interface=None, eps_ratio=1.0):
    return microstrip_fixture(step=step, interface=interface, eps_a=EPS0, eps_b=eps_ratio * EPS0)


@functools.lru_cache(maxsize=None)
def fixture_nodes(step=0.05, interface=None, eps_ratio=1.0):
    return discretize(fixture_problem(step, interface, eps_ratio))


@functools.lru_cache(maxsize=None)
def fixture_solution(step=0.05, interface=None, eps_ratio=1.0, variant="plain", rule="linear"):
    fn = solve_plain if variant == "plain" else solve
    return fn(fixture_problem(step, interface, eps_ratio),
              fixture_nodes(step, interface, eps_ratio), rule=rule)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE = {}


def record(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE[n] = line
    print(line)
    return ok
