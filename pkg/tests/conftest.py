"""Shared fixtures: choreography constants and the one expensive discovery run.

The full family-discovery sweep takes minutes; it is executed at most once per
session and shared by every test that inspects curves or records.
"""

import pytest

from refbp.continuation import discover_families, periodic_records
from refbp.dynamics import eight_initial_conditions
from refbp.integrate import IntegratorSettings


@pytest.fixture(scope="session")
def eight():
    return eight_initial_conditions()


@pytest.fixture(scope="session")
def fast_cfg():
    """Looser tolerances for tests that only need qualitative trajectories."""
    return IntegratorSettings(rel_tol=1e-10, abs_tol=1e-10)


@pytest.fixture(scope="session")
def discovery(eight):
    """Labeled family curves plus refined periodic records, computed once.

    Returns (curves, records) where records is a list of
    (family_index, PeriodicOrbitRecord) pairs across all curves.
    """
    curves = discover_families(eight=eight)
    records = []
    for curve in curves:
        for rec in periodic_records(curve, eight=eight):
            records.append((curve.family_index, rec))
    return curves, records
