import functools

import numpy as np
import pytest

from sigmacert import BoundaryMap, SigmaField, build_disk_mesh, collect_evidence, solve_mapping
from sigmacert.scenario import build_phi, build_sigma, gallery_scenario


@functools.lru_cache(maxsize=None)
def mesh_of(n):
    return build_disk_mesh(n)


@functools.lru_cache(maxsize=None)
def gallery_case(name, n=256):
    """(sigma, phi, mesh, evidence) for a gallery scenario, computed once per session."""
    sc = gallery_scenario(name)
    sigma, phi = build_sigma(sc), build_phi(sc)
    mesh = mesh_of(n)
    return sigma, phi, mesh, collect_evidence(sigma, phi, mesh)


CIRCLE = BoundaryMap.from_expressions("cos(theta)", "sin(theta)", name="circle")
ELLIPSE = BoundaryMap.from_expressions("2*cos(theta)", "sin(theta)", name="ellipse")


@pytest.fixture(scope="session")
def mesh128():
    return mesh_of(128)


@pytest.fixture(scope="session")
def mesh256():
    return mesh_of(256)


@pytest.fixture(scope="session")
def identity_mapping(mesh256):
    return solve_mapping(SigmaField.identity(), mesh256, CIRCLE)


@pytest.fixture(scope="session")
def ellipse_mapping(mesh256):
    return solve_mapping(SigmaField.identity(), mesh256, ELLIPSE)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance criteria record their outcome here; printed once at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {title} -- {detail}")
