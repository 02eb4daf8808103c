"""Acceptance suite: one test per criterion, backed by ``intphase.verify``.

Run under pytest (a per-criterion PASS/FAIL summary is printed at the end) or
directly with ``python tests/test_acceptance.py``.
"""
import sys

import pytest

from intphase import verify

# pinned tolerances
TOLERANCES = {
    "relative agreement with closed forms": verify.REL_TOL,
    "relative agreement with the ODE oracle": verify.ORACLE_REL_TOL,
    "quadrature tolerance needed to certify": verify.REQUIRED_QUAD_TOL,
    "slope tolerance": 0.2,
    "runtime budget (s)": 60.0,
}
assert TOLERANCES["relative agreement with closed forms"] == 1e-9
assert TOLERANCES["relative agreement with the ODE oracle"] == 1e-6
assert TOLERANCES["quadrature tolerance needed to certify"] == 1e-12


def _lines(results):
    out = [f"tolerance: {k} = {v:g}" for k, v in TOLERANCES.items()]
    out += [c.line() for c in results]
    return out


@pytest.fixture(scope="module")
def results(request):
    res = {c.number: c for c in verify.run_verify(oracle=True)}
    request.config.acceptance_lines = _lines(res.values())
    return res


@pytest.mark.parametrize("number", range(1, 11))
def test_criterion(results, number):
    crit = results[number]
    failed = [f"{c.name}: {c.detail}" for c in crit.checks if c.passed is False]
    assert crit.passed, "\n".join(failed)


if __name__ == "__main__":
    res = verify.run_verify(oracle=True)
    for line in _lines(res):
        print(line)
    sys.exit(0 if all(c.passed for c in res) else 1)
