import math

import numpy as np
import pytest

from stochdd import pce

from conftest import gauss_hermite_expectation


def quad_hermite_moment(a, b, c, points=16):
    """1D Gauss-Hermite oracle for E[He_a He_b He_c]."""
    nodes, weights = np.polynomial.hermite_e.hermegauss(points)
    weights = weights / np.sqrt(2.0 * np.pi)
    vals = np.array([pce.hermite_eval(a, x) * pce.hermite_eval(b, x) * pce.hermite_eval(c, x) for x in nodes])
    return float(np.sum(weights * vals))


class TestEnumerateBasis:
    @pytest.mark.parametrize(
        "num_rvs, order, count",
        [(5, 3, 56), (0, 7, 1), (9, 3, 220), (3, 2, 10), (3, 3, 20), (5, 2, 21)],
    )
    def test_counts(self, num_rvs, order, count):
        assert len(pce.enumerate_basis(num_rvs, order)) == count

    def test_binomial_closed_form(self):
        for num_rvs in range(16):
            for order in range(6):
                basis = pce.enumerate_basis(num_rvs, order)
                assert len(basis) == math.comb(num_rvs + order, order)

    def test_graded_order(self):
        basis = pce.enumerate_basis(3, 3)
        degrees = [sum(alpha) for alpha in basis.indices]
        assert degrees == sorted(degrees)
        assert basis.indices[0] == (0, 0, 0)
        # first variable leads within each degree
        assert basis.indices[1] == (1, 0, 0)
        assert len(set(basis.indices)) == len(basis)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            pce.enumerate_basis(-1, 2)


class TestHermite:
    @pytest.mark.parametrize("n, x, value", [(0, 3.7, 1.0), (2, 0.0, -1.0), (3, 2.0, 2.0)])
    def test_values(self, n, x, value):
        assert pce.hermite_eval(n, x) == pytest.approx(value, abs=0)

    def test_recurrence_matches_numpy(self):
        rng = np.random.default_rng(1)
        for n in range(8):
            coeffs = np.zeros(n + 1)
            coeffs[n] = 1.0
            for x in rng.uniform(-3, 3, size=5):
                expected = np.polynomial.hermite_e.hermeval(x, coeffs)
                assert pce.hermite_eval(n, x) == pytest.approx(expected, rel=1e-13)


class TestTripleProducts:
    def test_1d_examples(self):
        basis = pce.enumerate_basis(1, 2)
        tensor = pce.triple_products(basis, basis)
        assert tensor.value(1, 1, 2) == 2.0
        assert tensor.value(1, 1, 1) == 0.0

    def test_psi0_row_is_norms(self):
        basis = pce.enumerate_basis(3, 2)
        tensor = pce.triple_products(basis, basis)
        for j in range(len(basis)):
            for k in range(len(basis)):
                expected = tensor.norms[j] if j == k else 0.0
                assert tensor.value(0, j, k) == expected

    def test_norms_are_factorials(self):
        basis = pce.enumerate_basis(2, 3)
        for alpha, norm in zip(basis.indices, basis.norms):
            assert norm == math.prod(math.factorial(a) for a in alpha)

    def test_permutation_symmetry_exact(self):
        basis = pce.enumerate_basis(2, 3)
        tensor = pce.triple_products(basis, basis)
        for i, j, k, v in zip(tensor.i, tensor.j, tensor.k, tensor.values):
            for perm in [(j, i, k), (k, j, i), (i, k, j), (j, k, i), (k, i, j)]:
                if max(perm[0], perm[1], perm[2]) < len(basis):
                    assert tensor.value(*perm) == v

    def test_against_quadrature(self):
        in_basis = pce.enumerate_basis(2, 2)
        out_basis = pce.enumerate_basis(2, 3)
        tensor = pce.triple_products(in_basis, out_basis)
        rng = np.random.default_rng(0)
        # all stored nonzeros plus random zero triples
        triples = list(zip(tensor.i, tensor.j, tensor.k))
        triples += [tuple(rng.integers(0, [len(in_basis), len(out_basis), len(out_basis)])) for _ in range(30)]
        for i, j, k in triples:
            ai = in_basis.indices[i]
            aj = out_basis.indices[j]
            ak = out_basis.indices[k]
            expected = 1.0
            for m in range(2):
                expected *= quad_hermite_moment(ai[m], aj[m], ak[m])
            assert tensor.value(int(i), int(j), int(k)) == pytest.approx(expected, abs=1e-10)

    def test_orthogonality_quadrature(self):
        basis = pce.enumerate_basis(2, 3)
        nodes, weights = np.polynomial.hermite_e.hermegauss(10)
        weights = weights / np.sqrt(2 * np.pi)
        xs, ys = np.meshgrid(nodes, nodes, indexing="ij")
        pts = np.column_stack([xs.ravel(), ys.ravel()])
        w2 = np.outer(weights, weights).ravel()
        vals = basis.evaluate(pts)
        gram = (vals * w2[:, None]).T @ vals
        expected = np.diag(basis.norms)
        assert np.abs(gram - expected).max() < 1e-10

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            pce.triple_products(pce.enumerate_basis(2, 2), pce.enumerate_basis(3, 2))

    def test_csv_dump(self, tmp_path):
        basis = pce.enumerate_basis(2, 2)
        tensor = pce.triple_products(basis, basis)
        path = tmp_path / "tensor.csv"
        pce.dump_tensor_csv(tensor, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "i,j,k,value"
        assert len(lines) == len(tensor) + 1


class TestLognormalProjection:
    def test_deterministic_limit(self):
        basis = pce.enumerate_basis(2, 2)
        g0 = np.array([0.3, -0.1])
        lp = pce.project_lognormal(g0, np.zeros((2, 2)), basis)
        assert lp.mean_field == pytest.approx(np.exp(g0), abs=0)
        assert np.all(lp.coeffs[1:] == 0.0)

    def test_lognormal_mean_identity(self):
        basis = pce.enumerate_basis(1, 4)
        sigma = 0.4
        lp = pce.project_lognormal(np.zeros(3), np.full((1, 3), sigma), basis)
        assert lp.mean_field[0] == pytest.approx(np.exp(sigma**2 / 2), rel=1e-14)

    def test_against_quadrature_2d(self):
        basis = pce.enumerate_basis(2, 3)
        g0 = np.array([0.2])
        modes = np.array([[0.25], [-0.4]])
        lp = pce.project_lognormal(g0, modes, basis)
        for row, alpha in enumerate(basis.indices):
            def integrand(xi, alpha=alpha):
                g = g0[0] + modes[0, 0] * xi[0] + modes[1, 0] * xi[1]
                psi = pce.hermite_eval(alpha[0], xi[0]) * pce.hermite_eval(alpha[1], xi[1])
                return np.exp(g) * psi
            norm = math.factorial(alpha[0]) * math.factorial(alpha[1])
            expected = gauss_hermite_expectation(integrand, dims=2, points=20) / norm
            assert lp.coeffs[row, 0] == pytest.approx(expected, abs=1e-10)

    def test_second_moment_monotone_in_order(self):
        sigma = 0.5
        exact = np.exp(2 * sigma**2)  # E[exp(g)^2] with g ~ N(0, sigma^2)
        previous = 0.0
        for order in range(1, 7):
            basis = pce.enumerate_basis(1, order)
            lp = pce.project_lognormal(np.zeros(1), np.full((1, 1), sigma), basis)
            moment = float(np.sum(lp.coeffs[:, 0] ** 2 * basis.norms))
            assert moment >= previous - 1e-15
            assert moment <= exact + 1e-12
            previous = moment
        assert previous == pytest.approx(exact, rel=1e-6)

    def test_mode_count_mismatch(self):
        with pytest.raises(ValueError):
            pce.project_lognormal(np.zeros(2), np.zeros((3, 2)), pce.enumerate_basis(2, 1))
