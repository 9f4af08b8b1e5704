import numpy as np
import pytest
import scipy.sparse as sp
from scipy.optimize import Bounds, minimize

from nelp.graph import PositiveNetwork
from nelp.solver import (
    BalanceRegularizer,
    DualOperator,
    KernelSpec,
    Model,
    TrainingProblem,
    ablation_config,
    ablation_grid,
    build_balance_matrix,
    gram,
    kernel_cross,
    solve_dual,
)

from helpers import objective, projected_gradient_qp


def _random_problem(rng, l=12, d=4, c_b=0.0, mu=0, balanced_s=False):
    x = rng.normal(size=(l + mu, d))
    y = np.ones(l)
    y[: l // 2] = -1.0
    rng.shuffle(y)
    if (y > 0).all() or (y < 0).all():
        y[0] *= -1
    s = np.full(l, 1.0) if balanced_s else rng.uniform(0.2, 1.5, size=l)
    return TrainingProblem(x=x, y=y, s=s, c_b=c_b), x


class TestBalanceMatrix:
    def test_no_positive_link_between_sources(self):
        g = PositiveNetwork(4, [])
        reg = build_balance_matrix([(0, 2), (1, 2)], g)
        assert reg.b.nnz == 0
        assert reg.laplacian.nnz == 0

    def test_two_coupled_samples(self):
        g = PositiveNetwork(4, [(0, 1)])
        reg = build_balance_matrix([(0, 2), (1, 2)], g)
        assert reg.b.toarray().tolist() == [[0, 1], [1, 0]]
        assert reg.laplacian.toarray().tolist() == [[1, -1], [-1, 1]]

    def test_positive_link_pairs_not_coupled(self):
        g = PositiveNetwork(4, [(0, 1), (0, 2)])  # (0,2) is itself a link
        reg = build_balance_matrix([(0, 2), (1, 2)], g)
        assert reg.b.nnz == 0

    def test_quadratic_form_identity(self):
        rng = np.random.default_rng(3)
        g = PositiveNetwork(30, [(int(a), int(b)) for a, b in rng.integers(0, 30, size=(90, 2)) if a != b])
        pairs = []
        while len(pairs) < 40:
            i, j = int(rng.integers(30)), int(rng.integers(30))
            if i != j and (i, j) not in pairs:
                pairs.append((i, j))
        reg = build_balance_matrix(pairs, g)
        lap = reg.laplacian.toarray()
        b = reg.b.toarray()
        for _ in range(100):
            v = rng.normal(size=len(pairs))
            direct = v @ lap @ v
            pairwise = 0.5 * sum(
                b[h, k] * (v[h] - v[k]) ** 2
                for h in range(len(pairs)) for k in range(len(pairs))
            )
            assert direct == pytest.approx(pairwise, abs=1e-9)

    def test_laplacian_rows_sum_to_zero_and_psd(self):
        rng = np.random.default_rng(4)
        g = PositiveNetwork(20, [(int(a), int(b)) for a, b in rng.integers(0, 20, size=(60, 2)) if a != b])
        pairs = [(i, (i + 3) % 20) for i in range(20)]
        reg = build_balance_matrix(pairs, g)
        lap = reg.laplacian.toarray()
        assert np.allclose(lap.sum(axis=1), 0.0)
        assert np.linalg.eigvalsh(lap).min() >= -1e-10


class TestGram:
    def test_rbf_diagonal_is_one(self):
        rng = np.random.default_rng(0)
        k = gram(rng.normal(size=(10, 3)), KernelSpec("rbf", 1.5))
        assert np.allclose(np.diag(k), 1.0)

    def test_linear_orthogonal_rows(self):
        x = np.eye(4)
        k = gram(x, KernelSpec("linear"))
        assert np.allclose(k, np.eye(4))

    @pytest.mark.parametrize("kind", ["linear", "rbf"])
    def test_psd(self, kind):
        rng = np.random.default_rng(5)
        k = gram(rng.normal(size=(30, 6)), KernelSpec(kind, 2.0))
        assert np.linalg.eigvalsh(k).min() >= -1e-8

    def test_kernel_cross_consistent_with_gram(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(8, 5))
        for kind in ("linear", "rbf"):
            spec = KernelSpec(kind, 1.3)
            assert np.allclose(kernel_cross(x, x, spec), gram(x, spec), atol=1e-12)

    def test_invalid_kernel_rejected(self):
        with pytest.raises(ValueError):
            KernelSpec("poly")
        with pytest.raises(ValueError):
            KernelSpec("rbf", 0.0)


class TestSolveDualPlain:
    def test_symmetric_two_point_problem(self):
        prob = TrainingProblem(
            x=np.array([[1.0, 0.0], [-1.0, 0.0]]),
            y=np.array([1.0, -1.0]),
            s=np.array([1.0, 1.0]),
        )
        sol = solve_dual(prob)
        assert sol.converged
        assert sol.beta[0] == pytest.approx(sol.beta[1])
        assert sol.b == pytest.approx(0.0, abs=1e-9)

    def test_matches_projected_gradient_oracle(self):
        rng = np.random.default_rng(100)
        for trial in range(10):
            prob, x = _random_problem(rng, l=int(rng.integers(8, 21)), c_b=0.0)
            sol = solve_dual(prob, tol=1e-10, max_sweeps=100_000)
            k = gram(x, prob.kernel)
            q = k * np.outer(prob.y, prob.y)
            ref_beta = projected_gradient_qp(q, prob.y, prob.s)
            mine = objective(q, sol.beta)
            ref = objective(q, ref_beta)
            assert mine == pytest.approx(ref, rel=1e-6, abs=1e-9)
            # Decision values on the training rows must agree.
            w_mine = x.T @ (prob.y * sol.beta)
            w_ref = x.T @ (prob.y * ref_beta)
            assert np.allclose(x @ w_mine, x @ w_ref, atol=1e-6)

    def test_equality_constraint_and_box(self):
        rng = np.random.default_rng(8)
        prob, _ = _random_problem(rng, l=16)
        sol = solve_dual(prob)
        assert abs(sol.beta @ prob.y) < 1e-9
        assert (sol.beta >= -1e-12).all()
        assert (sol.beta <= prob.s + 1e-12).all()

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            solve_dual(
                TrainingProblem(
                    x=np.eye(3), y=np.ones(3), s=np.ones(3)
                )
            )

    def test_complementary_slackness(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            prob, x = _random_problem(rng, l=14)
            sol = solve_dual(prob, tol=1e-8)
            f = x @ (x.T @ (prob.y * sol.beta)) + sol.b
            margins = prob.y * f
            eps = 1e-8
            for i in range(prob.l):
                if sol.beta[i] < eps:
                    assert margins[i] >= 1 - 1e-4
                elif sol.beta[i] > prob.s[i] - eps:
                    assert margins[i] <= 1 + 1e-4
                else:
                    assert margins[i] == pytest.approx(1.0, abs=1e-4)

    def test_large_costs_separate_separable_data(self):
        rng = np.random.default_rng(10)
        x = np.vstack([rng.normal(size=(10, 3)) + 4, rng.normal(size=(10, 3)) - 4])
        y = np.concatenate([np.ones(10), -np.ones(10)])
        prob = TrainingProblem(x=x, y=y, s=np.full(20, 1e4))
        sol = solve_dual(prob, tol=1e-8)
        f = x @ (x.T @ (y * sol.beta)) + sol.b
        assert ((y * f) >= 1 - 1e-3).all()

    def test_row_order_invariance(self):
        rng = np.random.default_rng(11)
        prob, x = _random_problem(rng, l=12, balanced_s=True)
        sol = solve_dual(prob, tol=1e-12, max_sweeps=200_000)
        perm = rng.permutation(12)
        prob2 = TrainingProblem(x=x[perm], y=prob.y[perm], s=prob.s[perm])
        sol2 = solve_dual(prob2, tol=1e-12, max_sweeps=200_000)
        probe = rng.normal(size=(5, x.shape[1]))
        d1 = kernel_cross(probe, x, prob.kernel) @ (
            np.concatenate([prob.y * sol.beta, np.zeros(0)])
        ) + sol.b
        d2 = kernel_cross(probe, x[perm], prob.kernel) @ (
            prob2.y * sol2.beta
        ) + sol2.b
        assert np.allclose(d1, d2, atol=1e-8)


class TestSolveDualRegularized:
    def _coupled_problem(self, rng, l, mu, c_b):
        x = rng.normal(size=(l + mu, 3))
        y = np.ones(l)
        y[: l // 2] = -1.0
        s = rng.uniform(0.3, 1.0, size=l)
        n = l + mu
        b = np.zeros((n, n))
        for _ in range(n):
            h, k = rng.integers(n), rng.integers(n)
            if h != k:
                b[h, k] = b[k, h] = 1.0
        lap = sp.csr_matrix(np.diag(b.sum(axis=1)) - b)
        reg = BalanceRegularizer(b=sp.csr_matrix(b), laplacian=lap,
                                 n_couplings=int(b.sum() // 2))
        return TrainingProblem(x=x, y=y, s=s, c_b=c_b), reg

    @pytest.mark.parametrize("c_b", [0.01, 0.1])
    def test_matches_generic_qp_oracle(self, c_b):
        rng = np.random.default_rng(200)
        for _ in range(4):
            l, mu = int(rng.integers(6, 11)), int(rng.integers(2, 5))
            prob, reg = self._coupled_problem(rng, l, mu, c_b)
            sol = solve_dual(prob, reg, tol=1e-10, max_sweeps=100_000)
            op = DualOperator(prob.x, l, prob.kernel, reg.laplacian)
            g, _ = op.reduced(c_b)
            q = g * np.outer(prob.y, prob.y)
            res = minimize(
                lambda b: 0.5 * b @ q @ b - b.sum(),
                np.zeros(l),
                jac=lambda b: q @ b - 1.0,
                method="SLSQP",
                bounds=Bounds(np.zeros(l), prob.s),
                constraints=[{"type": "eq", "fun": lambda b: b @ prob.y,
                              "jac": lambda b: prob.y}],
                options={"maxiter": 2000, "ftol": 1e-14},
            )
            assert sol.objective >= -res.fun - 1e-4
            assert sol.objective == pytest.approx(-res.fun, abs=1e-4)

    def test_reduced_kernel_psd(self):
        rng = np.random.default_rng(201)
        prob, reg = self._coupled_problem(rng, 12, 6, 0.1)
        op = DualOperator(prob.x, 12, prob.kernel, reg.laplacian)
        g, _ = op.reduced(0.1)
        q = g * np.outer(prob.y, prob.y)
        assert np.linalg.eigvalsh(q).min() >= -1e-8

    def test_alpha_satisfies_stationarity(self):
        # K((I + C_b L K) alpha - J'Y beta) = 0 is the condition the expansion
        # coefficients must satisfy.
        rng = np.random.default_rng(202)
        prob, reg = self._coupled_problem(rng, 10, 4, 0.05)
        sol = solve_dual(prob, reg, tol=1e-10, max_sweeps=100_000)
        n = prob.x.shape[0]
        k = gram(prob.x, prob.kernel)
        lap = reg.laplacian.toarray()
        jty = np.zeros(n)
        jty[: prob.l] = prob.y * sol.beta
        residual = k @ ((np.eye(n) + prob.c_b * lap @ k) @ sol.alpha - jty)
        assert np.abs(residual).max() < 1e-6

    def test_cb_zero_reduces_to_plain_svm(self):
        rng = np.random.default_rng(203)
        prob, reg = self._coupled_problem(rng, 10, 0, 0.0)
        sol = solve_dual(prob, reg, tol=1e-10, max_sweeps=100_000)
        plain = TrainingProblem(x=prob.x, y=prob.y, s=prob.s, c_b=0.0)
        ref = solve_dual(plain, tol=1e-10, max_sweeps=100_000)
        assert sol.objective == pytest.approx(ref.objective, rel=1e-9)
        assert np.allclose(sol.alpha[: prob.l], prob.y * sol.beta)

    def test_objective_monotone_in_iterations(self):
        # The ascent is monotone: a loose run never beats a tight one.
        rng = np.random.default_rng(204)
        prob, reg = self._coupled_problem(rng, 12, 4, 0.05)
        loose = solve_dual(prob, reg, tol=1e-2, max_sweeps=10)
        tight = solve_dual(prob, reg, tol=1e-10, max_sweeps=100_000)
        assert tight.objective >= loose.objective - 1e-9

    def test_strong_duality_with_primal(self):
        # Evaluate the primal objective at the recovered (alpha, b) and check
        # it matches the dual optimum.
        rng = np.random.default_rng(205)
        prob, reg = self._coupled_problem(rng, 10, 3, 0.05)
        sol = solve_dual(prob, reg, tol=1e-12, max_sweeps=200_000)
        n = prob.x.shape[0]
        k = gram(prob.x, prob.kernel)
        lap = reg.laplacian.toarray()
        f = k @ sol.alpha
        slack = np.maximum(0.0, 1.0 - prob.y * (f[: prob.l] + sol.b))
        primal = (
            0.5 * sol.alpha @ k @ sol.alpha
            + 0.5 * prob.c_b * sol.alpha @ k @ lap @ k @ sol.alpha
            + (prob.s * slack).sum()
        )
        assert primal == pytest.approx(sol.objective, rel=1e-4, abs=1e-6)


class TestModel:
    def _toy_model(self):
        rng = np.random.default_rng(30)
        x = np.vstack([rng.normal(size=(8, 45)) + 2, rng.normal(size=(8, 45)) - 2])
        y = np.concatenate([np.ones(8), -np.ones(8)])
        from nelp.features import build_schema, standardize

        xs, mean, div = standardize(x)
        prob = TrainingProblem(x=xs, y=y, s=np.ones(16))
        sol = solve_dual(prob, tol=1e-9)
        schema = build_schema()
        return Model(
            kernel=prob.kernel,
            alpha=sol.alpha,
            b=sol.b,
            rows=xs,
            mean=mean,
            div=div,
            schema_version=schema.version,
            feature_names=schema.names,
            hyperparams={"c_p": 1.0},
            stats={"objective": sol.objective},
        ), x, y

    def test_separable_labels_recovered(self):
        model, x, y = self._toy_model()
        _, labels = model.predict(x)
        assert (labels == y).all()

    def test_constant_positive_decision(self):
        model, x, _ = self._toy_model()
        model.alpha = np.zeros_like(model.alpha)
        model.b = 1.0
        dec, labels = model.predict(x[:3])
        assert np.allclose(dec, 1.0)
        assert (labels == 1).all()

    def test_tie_goes_to_missing_link(self):
        model, x, _ = self._toy_model()
        model.alpha = np.zeros_like(model.alpha)
        model.b = 0.0
        _, labels = model.predict(x[:3])
        assert (labels == 1).all()

    def test_schema_mismatch_rejected(self):
        model, x, _ = self._toy_model()
        with pytest.raises(ValueError):
            model.decision_function(x[:, :10])

    def test_serialization_roundtrip_bit_exact(self, tmp_path):
        model, x, _ = self._toy_model()
        path = tmp_path / "model.json"
        model.save(path)
        back = Model.load(path)
        d1 = model.decision_function(x)
        d2 = back.decision_function(x)
        assert np.array_equal(d1, d2)
        assert back.schema_version == model.schema_version


class TestAblationConfig:
    def test_validates_inputs(self):
        with pytest.raises(ValueError):
            ablation_config(-1.0, "reliability", 0.1)
        with pytest.raises(ValueError):
            ablation_config(0.5, "everything", 0.1)

    def test_plain_svm_variant(self):
        cfg = ablation_config(1.0, "uniform", 0.0)
        assert cfg.c_n == 1.0 and cfg.weight_mode == "uniform" and cfg.c_b == 0.0

    def test_grid_contains_published_settings(self):
        grid = dict(ablation_grid(0.5, 0.1))
        assert grid["full"] == ablation_config(0.5, "reliability", 0.1)
        assert grid["all-off"] == ablation_config(1.0, "uniform", 0.0)
        assert len(grid) == 5

    def test_site_settings_valid(self):
        assert ablation_config(0.5, "reliability", 0.1).c_b == 0.1
        assert ablation_config(0.7, "reliability", 0.01).c_b == 0.01
