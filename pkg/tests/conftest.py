"""Shared fixtures.

The convergence studies dominate the suite's runtime, so they are computed
once per session and reused by the acceptance tests and by the per-module
tests that only inspect the resulting reports.
"""

import pytest

from stokes_hybrid.cases import get_case, mesh_hierarchy, run_convergence, \
    run_pressure_robustness
from stokes_hybrid.spaces import MethodConfig

SQUARE_LEVELS = 5
CRACK_LEVELS = 5


@pytest.fixture(scope="session")
def square_reports():
    """Convergence reports on the singular square case, keyed by
    (method, degree), all four runs sharing one mesh hierarchy."""
    case = get_case("square-mr")
    meshes = mesh_hierarchy(case, SQUARE_LEVELS)
    out = {}
    for method in ("edg-hdg", "hdg"):
        for degree in (1, 2):
            cfg = MethodConfig(method, degree)
            out[(method, degree)] = run_convergence(case, cfg, SQUARE_LEVELS,
                                                    meshes=meshes)
    return out


@pytest.fixture(scope="session")
def crack_report():
    case = get_case("crack")
    cfg = MethodConfig("edg-hdg", 1)
    return run_convergence(case, cfg, CRACK_LEVELS)


@pytest.fixture(scope="session")
def robustness_report():
    return run_pressure_robustness(degree=1, levels=3)


@pytest.fixture(scope="session")
def all_reports(square_reports, crack_report, robustness_report):
    """Flat list of every convergence report produced for the suite."""
    reports = list(square_reports.values()) + [crack_report]
    reports += [rep for _, _, rep in robustness_report.blocks]
    return reports
