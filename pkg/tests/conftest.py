import numpy as np
import pytest

from stochdd import pce, runner, schur
from stochdd.mesh import build_box_mesh, classify_interface, partition_boxes


@pytest.fixture(scope="session")
def small_poisson_ctx():
    """4^3-cell all-Dirichlet Poisson cube, 2x2x2 subdomains, L=2, p_u=2."""
    cfg = runner.RunConfig(
        problem="poisson", nx=4, ny=4, nz=4, px=2, py=2, pz=2,
        num_rvs=2, input_order=2, output_order=2, sigma=0.3,
    )
    mesh = runner.build_mesh(cfg)
    partition = partition_boxes(mesh, 2, 2, 2)
    classification = classify_interface(partition, mesh)
    setup = runner.build_problem(cfg, mesh)
    ctx = schur.build_schur_context(mesh, partition, classification, setup.problem, setup.tensor)
    return cfg, mesh, partition, classification, setup, ctx


@pytest.fixture(scope="session")
def beam_ctx():
    """Small clamped beam, 4x2x2 cells split along the axis (right half floats)."""
    cfg = runner.RunConfig(
        problem="elasticity", nx=4, ny=2, nz=2, px=2, py=1, pz=1,
        num_rvs=2, input_order=2, output_order=2, sigma=0.3,
    )
    mesh = runner.build_mesh(cfg)
    partition = partition_boxes(mesh, 2, 1, 1)
    classification = classify_interface(partition, mesh)
    setup = runner.build_problem(cfg, mesh)
    ctx = schur.build_schur_context(mesh, partition, classification, setup.problem, setup.tensor)
    return cfg, mesh, partition, classification, setup, ctx


def gauss_hermite_expectation(func, dims: int, points: int = 12):
    """Tensor Gauss-Hermite quadrature of E[func(xi)] for standard normal xi."""
    nodes, weights = np.polynomial.hermite_e.hermegauss(points)
    weights = weights / np.sqrt(2.0 * np.pi)
    grids = np.meshgrid(*([nodes] * dims), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wgrid = np.ones(pts.shape[0])
    for axis in range(dims):
        wgrid *= weights[np.unravel_index(np.arange(pts.shape[0]), (points,) * dims)[axis]]
    vals = np.array([func(p) for p in pts])
    return float(np.sum(wgrid * vals))
