import numpy as np
import pytest

from cstarmod import (
    AlgebraElement,
    BaseSpace,
    ConstantField,
    FiberOperator,
    FiberSpace,
    HypothesisError,
    MultiplicationField,
    PerturbationProblem,
    StateSpec,
    bounded_transform,
    build_sum_operator,
    build_sum_problem,
    graph_comparison_check,
    grid_pure_states,
    hermite_pair,
    kato_rellich_check,
    module_sum_check,
    relative_bound_estimate,
    strong_vanishing_Rn,
    sum_selfadjoint_regular_check,
    wust_check,
)
from cstarmod.perturbation import localized_inequality_check


def mult_op(model, f):
    vals = np.array([f(t) for t in model.space.nodes], dtype=complex)
    return FiberOperator(model.space, np.diag(vals), meta={"kind": "mult"})


class TestRelativeBound:
    def test_zero(self, model201, rng):
        V = FiberOperator(model201.space, np.zeros((201, 201), dtype=complex))
        a, b = relative_bound_estimate(model201.extension(1.0), V, rng=rng)
        assert a == pytest.approx(0.0, abs=1e-12)
        assert b == pytest.approx(0.0, abs=1e-12)

    def test_half_of_operator(self, model201, rng):
        T = model201.extension(1.0)
        V = FiberOperator(model201.space, T.dense() / 2, T.constraints,
                          adjoint_matrix=T.adjoint().dense() / 2,
                          adjoint_constraints=T.adjoint().constraints)
        a, b = relative_bound_estimate(T, V, rng=rng)
        assert a == pytest.approx(0.5, abs=1e-6)
        assert b == pytest.approx(0.0, abs=1e-9)

    def test_bounded_multiplication(self, model201, rng):
        # sup-norm oracle: ||v||_inf = 0.3 bounds the offset
        T = model201.extension(1.0)
        V = mult_op(model201, lambda t: 0.3 * np.cos(2 * np.pi * t))
        a, b = relative_bound_estimate(T, V, rng=rng)
        assert a <= 0.05
        assert 0.1 <= b <= 0.3 + 1e-9


class TestKatoRellich:
    def test_bounded_perturbation(self, model201, rng):
        T = model201.extension(1.0)
        V = mult_op(model201, lambda t: 0.3 * np.cos(2 * np.pi * t))
        P = PerturbationProblem(T, V, a=0.0, b=0.3)
        rep = kato_rellich_check(P, rng=rng)
        assert rep["verdict"]
        # contraction oracle: ||V (T - i mu)^{-1}|| <= 0.3/mu
        for entry in rep["scan"]:
            assert entry["norm"] <= 0.3 / entry["mu"] + 1e-9

    def test_zero_trivial(self, model201, rng):
        T = model201.extension(1.0)
        V = FiberOperator(model201.space, np.zeros((201, 201), dtype=complex))
        rep = kato_rellich_check(PerturbationProblem(T, V, 0.0, 0.0), rng=rng)
        assert rep["verdict"]

    def test_half_operator(self, model201, rng):
        T = model201.extension(1.0)
        V = FiberOperator(model201.space, T.dense() / 2, T.constraints,
                          adjoint_matrix=T.adjoint().dense() / 2,
                          adjoint_constraints=T.adjoint().constraints)
        rep = kato_rellich_check(PerturbationProblem(T, V, 0.5, 0.0), rng=rng)
        assert rep["verdict"]
        assert rep["scan"]                  # mu scan reported

    def test_refuses_bound_one(self, model201, rng):
        T = model201.extension(1.0)
        V = FiberOperator(model201.space, -T.dense() + bounded_transform(T))
        with pytest.raises(HypothesisError, match="Wuest"):
            kato_rellich_check(PerturbationProblem(T, V, 1.0, 1.0), rng=rng)


class TestWust:
    def test_bounded_multiplication_hypothesis(self, model201, rng):
        T = model201.extension(1.0)
        V = mult_op(model201, lambda t: 0.3 * np.cos(2 * np.pi * t))
        rep = wust_check(PerturbationProblem(T, V, 0.0, 0.09), rng=rng)
        assert rep["verdict"]

    def test_borderline_instance(self, model201, rng):
        # V = -T + sqrt(b) z(T): relative bound exactly one, quadratic
        # inequality holds with offset b, closure bounded and selfadjoint
        T = model201.extension(1.0)
        b0 = 2.0
        V = FiberOperator(model201.space,
                          -T.dense() + np.sqrt(b0) * bounded_transform(T))
        rep = wust_check(PerturbationProblem(T, V, 1.0, b0), rng=rng)
        assert rep["verdict"]
        assert rep["defects"] == [0, 0]
        assert rep["hypothesis_margin"] > 0

    def test_hypothesis_violation_reported(self, model201, rng):
        T = model201.extension(1.0)
        V = FiberOperator(model201.space, -T.dense())      # <Vx,Vx> = <Tx,Tx>
        # claiming b small with an extra bounded part that breaks the bound
        W = FiberOperator(model201.space, 5.0 * np.eye(201) - T.dense())
        with pytest.raises(HypothesisError, match="inequality"):
            wust_check(PerturbationProblem(T, W, 1.0, 0.1), rng=rng)

    def test_agreement_with_kato_below_one(self, model201, rng):
        # 20 random instances with relative bound < 1: both routes pass
        T = model201.extension(1.0)
        Z = bounded_transform(T)
        for _ in range(20):
            a0 = float(rng.uniform(0.0, 0.9))
            c = float(rng.uniform(0.0, 2.0))
            V = FiberOperator(model201.space, a0 * T.dense() + c * Z,
                              T.constraints,
                              adjoint_matrix=a0 * T.adjoint().dense() + c * Z,
                              adjoint_constraints=T.adjoint().constraints)
            b0 = c**2 + (a0 * c) ** 2 / max(1 - a0**2, 1e-6) + 1e-9
            kato = kato_rellich_check(PerturbationProblem(T, V, a0, b0), rng=rng)
            wust = wust_check(PerturbationProblem(T, V, a0, b0), rng=rng)
            assert kato["verdict"] == wust["verdict"] is True

    def test_localized_inequality(self, model101, rng):
        # || V0 i(x) ||^2 <= || T0 i(x) ||^2 + b || i(x) ||^2 per state
        space = BaseSpace.grid(0.0, 1.0, 9)
        Tf = ConstantField(space, model101.extension(1.0))
        b0 = 1.5
        Vf = ConstantField(space, FiberOperator(
            model101.space,
            -model101.extension(1.0).dense()
            + np.sqrt(b0) * bounded_transform(model101.extension(1.0))))
        states = grid_pure_states(space) + [StateSpec.uniform(space)]
        rep = localized_inequality_check(Tf, Vf, b0, states, rng=rng, samples=10)
        assert rep["holds"]


class TestSumProblem:
    def test_commuting_diagonals(self, rng):
        fs = FiberSpace(6)
        s = np.diag(rng.standard_normal(6)).astype(complex)
        t = np.diag(rng.standard_normal(6)).astype(complex)
        S = FiberOperator(fs, s)
        T = FiberOperator(fs, t)
        prob = build_sum_problem(S, T, 6, [1.0, -1.0], rng=rng)
        assert all(v < 1e-12 for v in prob.X_norms.values())
        xi = [prob.core_sample(rng) for _ in range(3)]
        rn = strong_vanishing_Rn(prob, xi, [1, 10])
        assert max(rn["rows"][0]["norms"]) < 1e-12
        gc = graph_comparison_check(prob, xi, C=0.0)
        assert gc["holds"]                  # commuting case works with C = 0
        D = build_sum_operator(prob)
        ev = np.sort(np.linalg.eigvalsh(D.dense()))
        want = np.sort(np.concatenate([np.abs(np.diag(s) + 1j * np.diag(t)),
                                       -np.abs(np.diag(s) + 1j * np.diag(t))]))
        assert np.allclose(ev, want, atol=1e-10)

    def test_hermite_pair_norms(self, rng):
        S, T, _ = hermite_pair(160)
        prob = build_sum_problem(S, T, 80, [20.0, -20.0, 40.0, -40.0],
                                 commutator=-1j * np.eye(160), rng=rng)
        for mu in (20.0, -20.0, 40.0, -40.0):
            assert abs(prob.X_norms[mu] - 1.0 / abs(mu)) < 1e-6
        assert prob.C == pytest.approx(0.5 * (1 + prob.X_norms[-1.0] ** 2))
        assert prob.report["adjoint_identity_residual"] < 1e-8
        assert prob.report["resolvent_commutation_residual"] < 1e-8

    def test_declared_commutator_validated(self, rng):
        S, T, _ = hermite_pair(60)
        with pytest.raises(HypothesisError, match="commutator"):
            build_sum_problem(S, T, 30, [5.0], commutator=2j * np.eye(60), rng=rng)

    def test_mult_commutator_bound(self, model201, rng):
        # S = extension, T = mult by smooth m: the derivation chain
        # ||X_mu|| <= ||[S,T]|| ||(S - i mu)^{-1}|| <= ||[S,T]|| / |mu|,
        # with the computed commutator norm close to the analytic ||m'||_inf
        # (boundary rows and quadrature weights inflate it slightly)
        S = model201.extension(1.0)
        m = lambda t: np.sin(2 * np.pi * t)
        T = mult_op(model201, m)
        prob = build_sum_problem(S, T, 100, [4.0, -4.0], rng=rng)
        sw = model201.space.sqrt_w
        K = prob.commutator
        K_norm = np.linalg.svd((sw[:, None] * K) / sw[None, :], compute_uv=False)[0]
        mprime_sup = 2 * np.pi
        # the discrete commutator symbol is amplified at grid frequencies
        # (factor 5/3 at Nyquist for the interior stencil); the model norm
        # stays within factor 2 of the analytic ||m'||_inf
        assert K_norm <= 2.0 * mprime_sup
        # action on smooth vectors is multiplication by -i m'
        t = model201.space.nodes
        v = np.exp(2j * np.pi * t)
        want = -1j * 2 * np.pi * np.cos(2 * np.pi * t) * v
        got = K @ v
        assert np.max(np.abs(got[4:-4] - want[4:-4])) < 1e-4
        for mu in (4.0, -4.0):
            assert prob.X_norms[mu] <= K_norm / abs(mu) + 1e-12

    def test_strong_vanishing_hermite(self, rng):
        S, T, _ = hermite_pair(160)
        prob = build_sum_problem(S, T, 80, [20.0, -20.0],
                                 commutator=-1j * np.eye(160), rng=rng)
        xi0 = np.zeros(160, dtype=complex); xi0[0] = 1.0    # gaussian-like
        rn = strong_vanishing_Rn(prob, [xi0], [1, 10, 100, 1000])
        norms = [max(r["norms"]) for r in rn["rows"]]
        assert all(norms[i + 1] < norms[i] for i in range(3))
        assert rn["vanishes"] and rn["ratio"] <= 1e-2
        assert rn["envelope_ok"]

    def test_wrong_constant_witnessed(self, rng):
        S, T, _ = hermite_pair(160)
        prob = build_sum_problem(S, T, 80, [20.0],
                                 commutator=-1j * np.eye(160), rng=rng)
        # near-kernel sample of S makes C = 0 fail in the noncommuting case
        ev, U = np.linalg.eigh(S.dense())
        k = int(np.argmin(np.abs(ev)))
        xi = U[:, k]
        gc = graph_comparison_check(prob, [xi], C=0.0)
        assert not gc["holds"]
        gc2 = graph_comparison_check(prob, [xi])
        assert gc2["holds"]

    def test_graph_norm_equivalence_constants(self, rng):
        # Convergence in the sum graph norm controls S and T graph norms:
        # (1/2)||S xi||^2 + ||T xi||^2 <= ||(S +- iT) xi||^2 + C ||xi||^2
        S, T, _ = hermite_pair(120)
        prob = build_sum_problem(S, T, 60, [10.0],
                                 commutator=-1j * np.eye(120), rng=rng)
        for _ in range(20):
            xi = prob.core_sample(rng)
            for sign in (+1, -1):
                v = S.dense() @ xi + sign * 1j * (T.dense() @ xi)
                lhs = 0.5 * np.linalg.norm(S.dense() @ xi) ** 2 \
                    + np.linalg.norm(T.dense() @ xi) ** 2
                rhs = np.linalg.norm(v) ** 2 + prob.C * np.linalg.norm(xi) ** 2
                assert lhs <= rhs + 1e-9

    def test_sum_operator_spectrum_and_verdict(self, rng):
        S, T, _ = hermite_pair(160)
        prob = build_sum_problem(S, T, 80, [20.0, -20.0],
                                 commutator=-1j * np.eye(160), rng=rng)
        D = build_sum_operator(prob)
        rep = sum_selfadjoint_regular_check(prob, D, rng=rng)
        assert rep["verdict"]
        st = rep["per_state"][0]
        assert st["block_identity_residual"] < 1e-12
        assert st["domain_dims_match"]
        ev = np.linalg.eigvalsh(D.dense())
        for k in range(0, 8):
            t = np.sqrt(2 * k)
            assert np.min(np.abs(ev - t)) < 1e-6
            assert np.min(np.abs(ev + t)) < 1e-6

    def test_module_level_commuting_sum(self, model101, rng):
        # S = constant extension field, T = multiplication by cos(2 pi x):
        # verdict selfadjoint + regular at all pure states
        space = BaseSpace.grid(0.0, 1.0, 11)
        S = ConstantField(space, model101.extension(1.0))
        a = AlgebraElement.from_function(space, lambda x: np.cos(2 * np.pi * x))
        T = MultiplicationField(a, model101.space)
        rep = module_sum_check(S, T, grid_pure_states(space))
        assert rep["verdict"]
        blocks = rep["per_state"][0]["blocks"]
        assert blocks[0]["defects"] == [0, 0]
        assert blocks[0]["dims_ok"]
