import os
import subprocess
import sys

import numpy as np
import pytest

from stochdd import oracle, runner, schur
from stochdd.mesh import classify_interface, partition_boxes


def dense_schur_for(cfg):
    mesh = runner.build_mesh(cfg)
    partition = partition_boxes(mesh, cfg.px, cfg.py, cfg.pz)
    classification = classify_interface(partition, mesh)
    setup = runner.build_problem(cfg, mesh)
    ctx = schur.build_schur_context(mesh, partition, classification, setup.problem, setup.tensor)
    s_dense, g_dense = oracle.dense_schur(
        mesh, partition, classification, setup.problem, setup.tensor
    )
    return ctx, s_dense, g_dense


@pytest.fixture(scope="module")
def tiny_case():
    cfg = runner.RunConfig(
        problem="poisson", nx=2, ny=2, nz=2, px=2, py=2, pz=2,
        num_rvs=2, input_order=2, output_order=2, sigma=0.3,
    )
    return dense_schur_for(cfg)


class TestSchurApply:
    def test_zero_maps_to_zero(self, tiny_case):
        ctx, _, _ = tiny_case
        assert np.all(schur.schur_apply(ctx, np.zeros(ctx.dim)) == 0.0)

    def test_matches_dense_columns(self, tiny_case):
        """Matrix-free action equals the dense elimination column by column."""
        ctx, s_dense, _ = tiny_case
        identity = np.eye(ctx.dim)
        for col in range(ctx.dim):
            action = schur.schur_apply(ctx, identity[:, col])
            assert np.abs(action - s_dense[:, col]).max() < 1e-10

    def test_positive_definite_action(self, tiny_case):
        ctx, _, _ = tiny_case
        rng = np.random.default_rng(0)
        for _ in range(5):
            x = rng.standard_normal(ctx.dim)
            assert x @ schur.schur_apply(ctx, x) > 0

    def test_symmetry(self, tiny_case):
        ctx, _, _ = tiny_case
        rng = np.random.default_rng(1)
        for _ in range(5):
            x = rng.standard_normal(ctx.dim)
            y = rng.standard_normal(ctx.dim)
            sx = schur.schur_apply(ctx, x)
            sy = schur.schur_apply(ctx, y)
            assert sx @ y == pytest.approx(x @ sy, rel=1e-10, abs=1e-12)

    def test_elasticity_matches_dense(self, beam_ctx):
        cfg, mesh, partition, classification, setup, ctx = beam_ctx
        s_dense, g_dense = oracle.dense_schur(
            mesh, partition, classification, setup.problem, setup.tensor
        )
        rng = np.random.default_rng(2)
        for _ in range(3):
            x = rng.standard_normal(ctx.dim)
            assert np.abs(schur.schur_apply(ctx, x) - s_dense @ x).max() < 1e-9
        assert np.abs(schur.schur_rhs(ctx) - g_dense).max() < 1e-10


class TestSchurRhs:
    def test_matches_dense(self, tiny_case):
        ctx, _, g_dense = tiny_case
        g = schur.schur_rhs(ctx)
        assert np.abs(g - g_dense).max() < 1e-12

    def test_deterministic_source_only_block0_loads(self, tiny_case):
        ctx, _, _ = tiny_case
        for sub in ctx.subdomains:
            f_i, f_g = sub.load_split(ctx.p_out)
            assert np.all(f_i[sub.n_interior:] == 0.0)
            assert np.all(f_g[sub.n_gamma:] == 0.0)


class TestRecoverInterior:
    def test_zero_interface_reduces_to_interior_solves(self, small_poisson_ctx):
        cfg, mesh, partition, classification, setup, ctx = small_poisson_ctx
        interiors = schur.recover_interior(ctx, np.zeros(ctx.dim))
        for sub, u_i in zip(ctx.subdomains, interiors):
            f_i, _ = sub.load_split(ctx.p_out)
            expected = sub.interior_lu.solve(f_i)
            assert np.allclose(u_i, expected, atol=1e-13)

    def test_full_solution_matches_dense(self, small_poisson_ctx):
        cfg, mesh, partition, classification, setup, ctx = small_poisson_ctx
        from stochdd import krylov

        rhs = schur.schur_rhs(ctx)
        u_gamma, report = krylov.pcgm(
            lambda x: schur.schur_apply(ctx, x), lambda r: r.copy(), rhs, tol=1e-12, maxit=500
        )
        interiors = schur.recover_interior(ctx, u_gamma)
        ref = oracle.dense_solve(mesh, setup.problem, setup.tensor)
        blocks = np.zeros((ctx.p_out, mesh.num_nodes, 1))
        blocks[:, classification.gamma_nodes, 0] = u_gamma.reshape(ctx.p_out, -1)
        for sub, u_i in zip(ctx.subdomains, interiors):
            blocks[:, sub.interior_nodes, 0] = u_i.reshape(ctx.p_out, -1)
        dd = blocks[:, ref.free_nodes, :].ravel()
        rel = np.linalg.norm(dd - ref.solution) / np.linalg.norm(ref.solution)
        assert rel < 1e-8

    def test_subdomain_equilibrium_residual(self, small_poisson_ctx):
        """Combined (u_I, u_G) satisfies each subdomain system on interior rows."""
        cfg, mesh, partition, classification, setup, ctx = small_poisson_ctx
        from stochdd import krylov

        rhs = schur.schur_rhs(ctx)
        u_gamma, _ = krylov.pcgm(
            lambda x: schur.schur_apply(ctx, x), lambda r: r.copy(), rhs, tol=1e-12, maxit=500
        )
        interiors = schur.recover_interior(ctx, u_gamma)
        for sub, u_i in zip(ctx.subdomains, interiors):
            u_g = ctx.gather(sub, u_gamma)
            f_i, _ = sub.load_split(ctx.p_out)
            residual = sub.blocks["II"] @ u_i + sub.blocks["IG"] @ u_g - f_i
            assert np.linalg.norm(residual) < 1e-8


class TestDeterminism:
    def test_thread_count_invariance(self, tmp_path):
        """Bit-identical Schur solves regardless of the task pool size."""
        script = r"""
import numpy as np
from stochdd import runner, schur
from stochdd.mesh import classify_interface, partition_boxes

cfg = runner.RunConfig(problem="poisson", nx=4, ny=4, nz=4, px=2, py=2, pz=1,
                       num_rvs=2, input_order=2, output_order=2, sigma=0.3)
mesh = runner.build_mesh(cfg)
partition = partition_boxes(mesh, 2, 2, 1)
classification = classify_interface(partition, mesh)
setup = runner.build_problem(cfg, mesh)
ctx = schur.build_schur_context(mesh, partition, classification, setup.problem, setup.tensor)
x = np.random.default_rng(11).standard_normal(ctx.dim)
np.save(OUT, schur.schur_apply(ctx, x))
"""
        results = []
        for threads in ("1", "4"):
            out = tmp_path / f"y{threads}.npy"
            env = dict(os.environ, STOCHDD_THREADS=threads)
            code = script.replace("OUT", repr(str(out)))
            subprocess.run([sys.executable, "-c", code], check=True, env=env)
            results.append(np.load(out))
        assert np.array_equal(results[0], results[1])
