"""Shared fixtures: the bundled mass-spring study, synthesized once per session."""

import pathlib
import time

import pytest

from barrierpairs import config as config_mod
from barrierpairs.estimator import design_bz
from barrierpairs.model import canonical_realization
from barrierpairs.synthesis import synthesize

ROOT = pathlib.Path(__file__).resolve().parents[1]
CONFIG_PATH = ROOT / "configs" / "mass_spring.yaml"


@pytest.fixture(scope="session")
def timings():
    return {}


@pytest.fixture(scope="session")
def project():
    return config_mod.load_config(CONFIG_PATH)


@pytest.fixture(scope="session")
def plant(project):
    return project.plant


@pytest.fixture(scope="session")
def safety(project):
    return project.safety


@pytest.fixture(scope="session")
def realization(plant):
    return canonical_realization(plant)


@pytest.fixture(scope="session")
def barrier_pair(project, timings):
    start = time.perf_counter()
    bp = synthesize(project.plant, project.safety, grid=project.grid,
                    options=project.synthesis_options)
    timings["synthesize"] = time.perf_counter() - start
    return bp


@pytest.fixture(scope="session")
def est_design(project, barrier_pair, timings):
    start = time.perf_counter()
    design = design_bz(barrier_pair.X, project.plant.w_bar,
                       mu_grid=project.mu_e_grid, margin=project.estimator_margin,
                       tol=project.synthesis_options.tol,
                       solver=project.synthesis_options.solver)
    timings["design_bz"] = time.perf_counter() - start
    return design
