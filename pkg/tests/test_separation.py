import numpy as np
import pytest

from cstarmod import (
    AlgebraElement,
    BaseSpace,
    ConvexHull,
    ModuleVector,
    NoCertificateError,
    SeparationProblem,
    StateSpec,
    Submodule,
    conjecture_search,
    convex_inequality_check,
    evaluate_state,
    find_separating_state,
    flattening_combination,
    hat_function,
    inner_product,
    pure_state_counterexample,
    resolving_grid,
)


class TestHatFunction:
    def test_peak_value(self):
        grid = BaseSpace.grid(0.0, 1.0, 41)
        f = hat_function(0.5, 4, grid)
        assert f.values[grid.node_index(0.5)].real == pytest.approx(1.0)

    def test_support_edge(self):
        grid = BaseSpace.grid(0.0, 1.0, 41)
        f = hat_function(0.5, 4, grid)
        assert f.values[grid.node_index(0.25)].real == pytest.approx(0.0)

    def test_linear_interpolation(self):
        grid = BaseSpace.grid(0.0, 1.0, 41)
        f = hat_function(0.5, 4, grid)
        assert f.values[grid.node_index(0.375)].real == pytest.approx(0.5)

    def test_support_must_stay_inside(self):
        grid = BaseSpace.grid(0.0, 1.0, 41)
        with pytest.raises(ValueError):
            hat_function(0.1, 4, grid)        # support reaches below 0


class TestFlattening:
    def test_n10(self):
        comb, rep = flattening_combination(10)
        assert rep["max_value"] <= 1.0 / 10 + 1e-15
        assert rep["max_value"] == pytest.approx(0.1)
        assert rep["all_members_norm_one"]

    def test_n100(self):
        comb, rep = flattening_combination(100)
        assert rep["max_value"] <= 0.01 + 1e-15

    def test_single_hat(self):
        comb, rep = flattening_combination(1)
        assert rep["max_value"] == pytest.approx(1.0)

    def test_disjoint_supports_exact(self):
        # on a resolving grid at most one member is nonzero per node
        N = 7
        grid = resolving_grid(N)
        members = [hat_function(j / (N + 1), 2 * N + 2, grid).values.real
                   for j in range(1, N + 1)]
        hits = sum((m > 1e-14).astype(int) for m in members)
        assert np.max(hits) <= 1

    def test_coarse_grid_rejected(self):
        with pytest.raises(ValueError, match="coarse"):
            flattening_combination(10, BaseSpace.grid(0.0, 1.0, 11))


class TestSubmoduleSeparation:
    def test_two_point_example(self, rng):
        sp = BaseSpace.points(["p1", "p2"])
        g = ModuleVector(sp, [[1, 0], [0, 0]])
        x0 = ModuleVector(sp, [[1, 0], [1, 0]])
        P = SeparationProblem.build(Submodule((g,)), x0, rng=rng)
        cert = find_separating_state(P)
        assert cert.kind == "PureState"
        assert cert.state.p == 1
        assert cert.margin == pytest.approx(1.0)

    def test_vanishing_at_zero_configuration(self, rng):
        # L = {f : f(0) = 0}: the pure state at node 0 separates with margin 1,
        # while a state ignoring node 0 sees no gap at all
        sp = BaseSpace.grid(0.0, 1.0, 41)
        gvals = np.ones((41, 1)); gvals[0] = 0.0
        g = ModuleVector(sp, gvals)
        x0 = ModuleVector(sp, np.ones((41, 1)))
        P = SeparationProblem.build(Submodule((g,)), x0, rng=rng)
        cert = find_separating_state(P)
        assert cert.kind == "PureState" and cert.state.p == 0
        assert cert.margin == pytest.approx(1.0)
        riemann = StateSpec.riemann(sp)
        # the submodule reaches x0 except at node 0, which riemann ignores
        diff = g - x0
        val = evaluate_state(riemann, inner_product(diff, diff))
        assert abs(val) < 1e-14

    def test_member_yields_no_certificate(self, rng):
        sp = BaseSpace.points(["a", "b"])
        g = ModuleVector(sp, [[1, 0], [0, 1]])
        P = SeparationProblem.build(Submodule((g,)), g, rng=rng)
        with pytest.raises(NoCertificateError):
            find_separating_state(P)

    def test_random_problems_match_brute_force(self, rng):
        # 100 random finite-X submodule problems: certificate equals the
        # brute-force argmax of per-node projection distances
        for _ in range(100):
            n = int(rng.integers(2, 6))
            d = int(rng.integers(1, 4))
            k = int(rng.integers(1, min(d, 2) + 1))
            sp = BaseSpace.points([f"p{i}" for i in range(n)])
            gens = tuple(
                ModuleVector(sp, rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d)))
                for _ in range(k))
            x0 = ModuleVector(sp, rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d)))
            P = SeparationProblem.build(Submodule(gens), x0, rng=rng)
            if P.delta <= 1e-12:
                continue
            cert = find_separating_state(P)
            # independent brute force: per node lstsq distance
            best_p, best_val = -1, -1.0
            for p in range(n):
                G = np.stack([g.values[p] for g in gens], axis=1)
                c, *_ = np.linalg.lstsq(G, x0.values[p], rcond=None)
                r = x0.values[p] - G @ c
                v = float(np.sum(np.abs(r) ** 2))
                if v > best_val:
                    best_p, best_val = p, v
            assert cert.state.p == best_p
            assert cert.margin == pytest.approx(best_val, rel=1e-9)

    def test_certificate_soundness(self, rng):
        # omega(a) >= margin for 200 fresh distance elements
        sp = BaseSpace.points([f"p{i}" for i in range(5)])
        gens = (ModuleVector(sp, rng.standard_normal((5, 3))),)
        x0 = ModuleVector(sp, rng.standard_normal((5, 3)) + 2.0)
        P = SeparationProblem.build(Submodule(gens), x0, rng=rng)
        cert = find_separating_state(P)
        for _ in range(200):
            coef = rng.standard_normal(1) + 1j * rng.standard_normal(1)
            y = gens[0] * coef[0]
            a = inner_product(y - x0, y - x0)
            val = evaluate_state(cert.state, a)
            assert val.real >= cert.margin - 1e-9
        assert cert.margin <= P.delta + 1e-12


class TestHullSeparation:
    def test_two_hats_needs_mixed_state(self, rng):
        grid = BaseSpace.grid(0.0, 1.0, 201)
        f1 = hat_function(0.25, 5, grid)
        f2 = hat_function(0.75, 5, grid)
        hull = ConvexHull((ModuleVector(grid, f1.values[:, None]),
                           ModuleVector(grid, f2.values[:, None])))
        x0 = ModuleVector(grid, np.zeros((201, 1)))
        P = SeparationProblem.build(hull, x0, rng=rng)
        cert = find_separating_state(P)
        assert cert.kind == "MixedState"
        assert cert.margin == pytest.approx(0.25, abs=1e-6)
        support = cert.state.support()
        assert set(grid.nodes[support].round(6)) == {0.25, 0.75}
        assert cert.margin <= P.delta + 1e-9

    def test_hull_certificate_soundness(self, rng):
        grid = BaseSpace.grid(0.0, 1.0, 101)
        v1 = ModuleVector(grid, hat_function(0.3, 5, grid).values[:, None])
        v2 = ModuleVector(grid, hat_function(0.6, 5, grid).values[:, None])
        hull = ConvexHull((v1, v2))
        x0 = ModuleVector(grid, np.zeros((101, 1)))
        P = SeparationProblem.build(hull, x0, rng=rng)
        cert = find_separating_state(P)
        assert cert.margin > 0
        for _ in range(200):
            th = rng.random()
            y = v1 * th + v2 * (1 - th)
            val = evaluate_state(cert.state, inner_product(y - x0, y - x0))
            assert val.real >= cert.margin - 1e-9

    def test_delta_gate(self, rng):
        grid = BaseSpace.grid(0.0, 1.0, 51)
        v1 = ModuleVector(grid, np.ones((51, 1)))
        hull = ConvexHull((v1,))
        P = SeparationProblem.build(hull, v1, rng=rng)
        with pytest.raises(NoCertificateError):
            find_separating_state(P)


class TestPureStateCounterexample:
    def test_paper_combination_values(self):
        rep = pure_state_counterexample(0.1)
        assert rep["pure_state_value_bound"] <= rep["eps_squared"] + 1e-15
        assert rep["min_hull_sup_norm"] >= 0.5 - 1e-6
        assert rep["mixed_certificate"]["kind"] == "MixedState"
        assert rep["mixed_certificate"]["margin"] > 0

    def test_explicit_probe_points(self):
        grid = BaseSpace.grid(0.0, 1.0, 201)
        f1 = hat_function(0.25, 5, grid)
        f2 = hat_function(0.75, 5, grid)
        eps = 0.1
        # p = 0.3 <= 1/2: combination eps f1 + (1-eps) f2 is small there
        comb = eps * f1 + (1 - eps) * f2
        p = grid.node_index(0.3)
        val = evaluate_state(StateSpec.pure(grid, p), comb * comb.conj())
        assert val.real <= eps**2 + 1e-15
        # mirrored side
        comb2 = (1 - eps) * f1 + eps * f2
        p2 = grid.node_index(0.7)
        val2 = evaluate_state(StateSpec.pure(grid, p2), comb2 * comb2.conj())
        assert val2.real <= eps**2 + 1e-15

    def test_midpoint_mixture_is_minimum(self):
        rep = pure_state_counterexample(0.5)
        assert rep["min_hull_sup_norm"] == pytest.approx(0.5, abs=1e-9)

    def test_eps_validation(self):
        with pytest.raises(ValueError):
            pure_state_counterexample(0.0)


class TestConvexInequalities:
    def test_single_vector_equality(self, rng):
        sp = BaseSpace.points(["a", "b"])
        y = ModuleVector(sp, rng.standard_normal((2, 2)))
        ok, witness = convex_inequality_check([y], [1.0])
        assert ok and witness is None

    def test_random_pairs(self, rng):
        sp = BaseSpace.points([f"p{i}" for i in range(4)])
        for _ in range(50):
            ys = [ModuleVector(sp, rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3)))
                  for _ in range(2)]
            x0 = ModuleVector(sp, rng.standard_normal((4, 3)))
            ok, _ = convex_inequality_check(ys, [0.5, 0.5], x0=x0)
            assert ok

    def test_identical_vectors(self, rng):
        sp = BaseSpace.points(["a"])
        y = ModuleVector(sp, rng.standard_normal((1, 2)))
        ok, _ = convex_inequality_check([y, y], [0.3, 0.7], x0=y * 0.0)
        assert ok

    def test_nonconvex_weights_rejected(self, rng):
        sp = BaseSpace.points(["a"])
        y = ModuleVector(sp, rng.standard_normal((1, 2)))
        with pytest.raises(ValueError):
            convex_inequality_check([y, y], [0.7, 0.7])


def test_conjecture_search_smoke(rng):
    rep = conjecture_search(rng=rng, trials=5)
    assert rep["violations"] == 0          # no counterexample expected
    assert rep["trials"] == 5
