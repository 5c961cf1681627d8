import numpy as np
import pytest
import scipy.sparse as sp

from graphcoarsen import (TransientConfig, WeightedGraph, apply_boundary,
                          assemble_signed_laplacian, coarse_initial, errors,
                          galerkin_coarse, galerkin_residual, oversample,
                          partition_balanced, solve_fine, solve_parabolic,
                          solve_steady)
from graphcoarsen.clustering import cluster_partition
from graphcoarsen.interpolation import ColumnInfo, Prolongation, cf_ideal_global, cf_split
from graphcoarsen.experiments import build_prolongation


def identity_prolongation(n):
    cols = tuple(ColumnInfo(0, r, None) for r in range(n))
    return Prolongation(sp.identity(n, format="csr"), "mc-glo", cols)


@pytest.fixture(scope="module")
def spd_system():
    g = WeightedGraph.build(5, [(i, i + 1, 1.0) for i in range(4)],
                            robin=[(0, 2.0, 1.0), (4, 2.0, 0.0)])
    A, f = apply_boundary(assemble_signed_laplacian(g), g)
    return g, A, f


@pytest.fixture(scope="module")
def channel_pipeline(request):
    from graphcoarsen.experiments import build_problem

    prob = build_problem({"family": "fem", "nx": "12", "ny": "12",
                          "contrast": "1e4", "holes": "0.3,0.3,0.1"})
    part = partition_balanced(prob.graph, 4, seed=0)
    part_os = oversample(prob.graph, part, 0.25)
    clusters = cluster_partition(prob.graph, part, 3, seed=0)
    return prob, part, part_os, clusters


class TestGalerkin:
    def test_identity_prolongation_keeps_operator(self, spd_system):
        _, A, f = spd_system
        model = galerkin_coarse(A, f, identity_prolongation(5))
        assert np.array_equal(model.operator.toarray(), A.toarray())
        assert np.array_equal(model.rhs, f)

    def test_single_constant_column(self, spd_system):
        _, A, f = spd_system
        ones = Prolongation(sp.csr_matrix(np.ones((5, 1))), "mc-glo",
                            (ColumnInfo(0, 0, None),))
        model = galerkin_coarse(A, f, ones)
        assert model.operator.toarray()[0, 0] == pytest.approx(A.toarray().sum())
        assert model.rhs[0] == pytest.approx(f.sum())

    def test_cf_global_matches_dense_schur(self, channel_pipeline):
        prob, part, _, clusters = channel_pipeline
        A = prob.operator
        C, F = cf_split(clusters, prob.graph.n_vertices)
        P = cf_ideal_global(A, C, F)
        model = galerkin_coarse(A, prob.rhs, P)
        Ad = A.toarray()
        S = Ad[np.ix_(C.ids, C.ids)] - Ad[np.ix_(C.ids, F.ids)] @ np.linalg.solve(
            Ad[np.ix_(F.ids, F.ids)], Ad[np.ix_(F.ids, C.ids)])
        assert np.linalg.norm(model.operator.toarray() - S) <= 1e-10 * np.linalg.norm(S)


class TestSteady:
    def test_identity_reproduces_fine_solution(self, spd_system):
        _, A, f = spd_system
        u = solve_fine(A, f)
        model = galerkin_coarse(A, f, identity_prolongation(5))
        _, u_ms = solve_steady(model)
        assert np.allclose(u_ms, u, rtol=1e-14)

    def test_zero_rhs_zero_solution(self, spd_system):
        _, A, _ = spd_system
        model = galerkin_coarse(A, np.zeros(5), identity_prolongation(5))
        _, u_ms = solve_steady(model)
        assert np.array_equal(u_ms, np.zeros(5))

    def test_cf_exact_at_coarse_points(self, channel_pipeline):
        prob, part, _, clusters = channel_pipeline
        A, f = prob.operator, prob.rhs
        C, F = cf_split(clusters, prob.graph.n_vertices)
        P = cf_ideal_global(A, C, F)
        model = galerkin_coarse(A, f, P)
        _, u_ms = solve_steady(model)
        u = solve_fine(A, f)
        num = np.linalg.norm(u_ms[C.ids] - u[C.ids])
        assert num <= 1e-9 * np.linalg.norm(u[C.ids])


class TestFineSolve:
    def test_diagonal(self):
        assert solve_fine(sp.diags([2.0]).tocsr(), np.array([4.0])) == pytest.approx([2.0])

    def test_identity(self):
        f = np.array([1.0, -2.0, 3.0])
        assert np.allclose(solve_fine(sp.identity(3, format="csr"), f), f)

    def test_poisson_path(self):
        g = WeightedGraph.build(5, [(i, i + 1, 1.0) for i in range(4)])
        from graphcoarsen import eliminate_dirichlet

        A, f, _ = eliminate_dirichlet(assemble_signed_laplacian(g), np.ones(5),
                                      [(0, 0.0), (4, 0.0)])
        assert np.allclose(solve_fine(A, f), [1.5, 2.0, 1.5])

    def test_cg_fallback_matches_direct(self, spd_system):
        _, A, f = spd_system
        u_direct = solve_fine(A, f)
        u_cg = solve_fine(A, f, direct_limit=1)
        assert np.allclose(u_cg, u_direct, atol=1e-10)


class TestParabolic:
    def test_pure_mass_is_constant(self):
        A = sp.csr_matrix((3, 3))
        u0 = np.array([1.0, 2.0, 3.0])
        res = solve_parabolic(np.ones(3), A, np.zeros(3),
                              TransientConfig(tau=0.5, n_steps=4), u0=u0)
        assert np.allclose(res.states, u0[None, :])

    def test_scalar_decay_closed_form(self):
        c, a, tau = 2.0, 3.0, 0.25
        A = sp.csr_matrix(np.array([[a]]))
        res = solve_parabolic(np.array([c]), A, np.zeros(1),
                              TransientConfig(tau=tau, n_steps=6),
                              u0=np.array([1.0]))
        expected = (1.0 + a * tau / c) ** (-np.arange(7))
        assert np.allclose(res.states.ravel(), expected, rtol=1e-13)

    def test_identity_coarse_matches_fine(self, spd_system):
        _, A, f = spd_system
        cap = np.array([0.5, 1.0, 1.5, 2.0, 2.5])
        cfg = TransientConfig(tau=0.3, n_steps=5)
        u0 = np.linspace(0, 1, 5)
        fine = solve_parabolic(cap, A, f, cfg, u0=u0)
        coarse = solve_parabolic(cap, A, f, cfg, P=identity_prolongation(5), u0=u0)
        scale = np.abs(fine.states).max()
        assert np.abs(coarse.states - fine.states).max() <= 1e-12 * scale

    def test_nonpositive_capacity_rejected(self, spd_system):
        _, A, f = spd_system
        with pytest.raises(ValueError, match="positive"):
            solve_parabolic(np.zeros(5), A, f, TransientConfig(tau=1.0, n_steps=1))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TransientConfig(tau=-1.0, n_steps=2)
        with pytest.raises(ValueError):
            TransientConfig(tau=1.0, n_steps=0)
        cfg = TransientConfig(tau=5.0, n_steps=20)
        assert cfg.total_time == pytest.approx(100.0)

    def test_coarse_initial_least_squares(self, spd_system):
        _, A, _ = spd_system
        P = identity_prolongation(5)
        u0 = np.array([3.0, 1.0, 4.0, 1.0, 5.0])
        assert np.allclose(coarse_initial(P, u0), u0)


class TestErrors:
    def test_exact_reproduction(self, spd_system):
        _, A, _ = spd_system
        u = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        assert errors(u, u, A) == (0.0, 0.0)

    def test_total_loss(self, spd_system):
        _, A, _ = spd_system
        u = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        e1, e2 = errors(u, np.zeros(5), A)
        assert e1 == pytest.approx(100.0) and e2 == pytest.approx(100.0)

    def test_unit_case(self):
        A = sp.identity(2, format="csr")
        e1, e2 = errors(np.array([1.0, 0.0]), np.array([0.0, 0.0]), A)
        assert e1 == pytest.approx(100.0) and e2 == pytest.approx(100.0)

    def test_zero_reference_rejected(self, spd_system):
        _, A, _ = spd_system
        with pytest.raises(ValueError, match="nonzero"):
            errors(np.zeros(5), np.ones(5), A)


class TestGalerkinOrthogonality:
    def test_all_methods(self, channel_pipeline):
        prob, part, part_os, clusters = channel_pipeline
        A, f = prob.operator, prob.rhs
        for method in ("cf-glo", "cf-loc", "mc-glo", "mc-loc"):
            P = build_prolongation(method, prob, clusters, part_os)
            model = galerkin_coarse(A, f, P)
            _, u_ms = solve_steady(model)
            res = galerkin_residual(P, A, f, u_ms)
            assert res <= 1e-9 * np.abs(f).max(), method

    def test_energy_optimality_random_coarse_perturbations(self, channel_pipeline):
        prob, part, part_os, clusters = channel_pipeline
        A, f = prob.operator, prob.rhs
        P = build_prolongation("mc-glo", prob, clusters, part_os)
        model = galerkin_coarse(A, f, P)
        u_c, u_ms = solve_steady(model)
        u = solve_fine(A, f)
        base = (u - u_ms) @ (A @ (u - u_ms))
        rng = np.random.default_rng(1)
        for _ in range(5):
            trial = u - P.matrix @ (u_c + 0.1 * rng.standard_normal(len(u_c)))
            assert trial @ (A @ trial) >= base - 1e-10

    def test_energy_error_shrinks_on_nested_range(self, channel_pipeline):
        prob, part, part_os, clusters = channel_pipeline
        A, f = prob.operator, prob.rhs
        u = solve_fine(A, f)
        P2 = build_prolongation("mc-glo", prob, clusters, part_os)
        keep = np.arange(0, P2.n_coarse, 2)
        P1 = Prolongation(P2.matrix[:, keep].tocsr(), "mc-glo",
                          tuple(P2.columns[int(c)] for c in keep))
        e2_small = errors(u, solve_steady(galerkin_coarse(A, f, P1))[1], A)[1]
        e2_big = errors(u, solve_steady(galerkin_coarse(A, f, P2))[1], A)[1]
        assert e2_big <= e2_small + 1e-8
