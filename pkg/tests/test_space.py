import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cstarmod import (
    AlgebraElement,
    BaseSpace,
    PartitionOfUnity,
    StateSpec,
    a_convex_combine,
    evaluate_state,
    is_positive,
    verify_partition_of_unity,
)
from cstarmod.separation import hat_function


def test_space_validation():
    with pytest.raises(ValueError):
        BaseSpace.grid(0.0, 1.0, 1)
    with pytest.raises(ValueError):
        BaseSpace.grid(1.0, 0.0, 10)
    with pytest.raises(ValueError):
        BaseSpace.points(["a", "a"])
    g = BaseSpace.grid(0.0, 1.0, 11)
    assert g.node_count == 11
    assert g.node_index(0.5) == 5


def test_space_json_roundtrip():
    for sp in (BaseSpace.grid(0.0, 1.0, 7), BaseSpace.points(["a", "b"])):
        assert BaseSpace.from_json(sp.to_json()) == sp


def test_evaluate_state_pure_point():
    sp = BaseSpace.points(["a", "b", "c"])
    a = AlgebraElement(sp, [0.1, 0.7, -0.2])
    assert evaluate_state(StateSpec.pure(sp, 1), a) == pytest.approx(0.7)


def test_evaluate_state_unit():
    sp = BaseSpace.points(list("abcd"))
    one = AlgebraElement.one(sp)
    assert evaluate_state(StateSpec.uniform(sp), one) == pytest.approx(1.0)


def test_evaluate_state_riemann_oracle():
    # integral of x over [0,1] via weighted node sums vs the Riemann-sum oracle
    sp = BaseSpace.grid(0.0, 1.0, 2001)
    a = AlgebraElement.from_function(sp, lambda x: x)
    omega = StateSpec.lebesgue(sp)
    oracle = float(np.sum(np.linspace(0, 1, 2001) * omega.weights))
    val = evaluate_state(omega, a)
    assert val.real == pytest.approx(oracle, abs=1e-14)
    assert val.real == pytest.approx(0.5, abs=1e-3)


def test_evaluate_state_errors():
    sp = BaseSpace.points(["a"])
    sp2 = BaseSpace.points(["b"])
    a = AlgebraElement(sp, [1.0])
    with pytest.raises(ValueError, match="mismatch"):
        evaluate_state(StateSpec.pure(sp2, 0), a)
    bad = AlgebraElement(sp, [np.nan])
    with pytest.raises(ValueError, match="NaN"):
        evaluate_state(StateSpec.pure(sp, 0), bad)


def test_state_validation():
    sp = BaseSpace.points(list("ab"))
    with pytest.raises(ValueError):
        StateSpec.measure(sp, [0.5, 0.6])
    with pytest.raises(ValueError):
        StateSpec.measure(sp, [-0.1, 1.1])
    with pytest.raises(ValueError):
        StateSpec.pure(sp, 5)


def test_is_positive():
    sp = BaseSpace.grid(0.0, 1.0, 41)
    zero = AlgebraElement.constant(sp, 0.0)
    assert is_positive(zero)
    f = hat_function(0.5, 4, sp)
    assert is_positive(f)                      # values within [0, 1]
    g = AlgebraElement.from_function(sp, lambda x: x - 0.5)
    assert not is_positive(g)                  # sign change
    h = AlgebraElement.constant(sp, 1j)
    assert not is_positive(h)


def test_partition_identity():
    sp = BaseSpace.grid(0.0, 1.0, 21)
    assert verify_partition_of_unity([AlgebraElement.one(sp)])
    halves = [AlgebraElement.constant(sp, 0.5), AlgebraElement.constant(sp, 0.5)]
    assert not verify_partition_of_unity(halves)   # sums to 1/2, not 1
    with pytest.raises(ValueError):
        verify_partition_of_unity([])


def test_partition_triangular_bumps():
    # sqrt of a nodewise partition built from overlapping triangular bumps
    sp = BaseSpace.grid(0.0, 1.0, 101)
    xs = sp.nodes
    chi1 = np.clip(1 - 2 * xs, 0, None)
    chi3 = np.clip(2 * xs - 1, 0, None)
    chi2 = 1.0 - chi1 - chi3
    parts = [AlgebraElement(sp, np.sqrt(np.clip(c, 0, None)).astype(complex))
             for c in (chi1, chi2, chi3)]
    # nodewise summation oracle
    total = sum(np.abs(p.values) ** 2 for p in parts)
    assert np.max(np.abs(total - 1.0)) < 1e-12
    assert verify_partition_of_unity(parts)


def test_a_convex_combine_identity_partition():
    sp = BaseSpace.grid(0.0, 1.0, 11)
    a = AlgebraElement.from_function(sp, lambda x: np.sin(x) + 2)
    parts = PartitionOfUnity((AlgebraElement.one(sp),))
    out = a_convex_combine(parts, [a])
    assert np.allclose(out.values, a.values)


def test_a_convex_combine_halves():
    sp = BaseSpace.grid(0.0, 1.0, 11)
    r = AlgebraElement.constant(sp, 1 / np.sqrt(2))
    parts = PartitionOfUnity((r, r))
    out = a_convex_combine(parts, [AlgebraElement.constant(sp, 0.0),
                                   AlgebraElement.one(sp)])
    assert np.allclose(out.values, 0.5)


def test_a_convex_combine_cover_refinement():
    # sum chi_j f_{p_j} built through the sqrt-partition members
    sp = BaseSpace.grid(0.0, 1.0, 101)
    xs = sp.nodes
    chi1 = np.clip(1 - 2 * xs, 0, None)
    chi2 = 1 - chi1
    parts = PartitionOfUnity(tuple(
        AlgebraElement(sp, np.sqrt(c).astype(complex)) for c in (chi1, chi2)))
    f1 = AlgebraElement.from_function(sp, lambda x: 1.0)
    f2 = AlgebraElement.from_function(sp, lambda x: x)
    out = a_convex_combine(parts, [f1, f2])
    assert np.allclose(out.values, chi1 * 1.0 + chi2 * xs)


def test_a_convex_combine_length_mismatch():
    sp = BaseSpace.grid(0.0, 1.0, 11)
    parts = PartitionOfUnity((AlgebraElement.one(sp),))
    with pytest.raises(ValueError):
        a_convex_combine(parts, [])


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 8), st.integers(0, 10**6))
def test_state_positivity_property(n, seed):
    rng = np.random.default_rng(seed)
    sp = BaseSpace.points([f"p{i}" for i in range(n)])
    a = AlgebraElement(sp, np.abs(rng.standard_normal(n)).astype(complex))
    w = rng.dirichlet(np.ones(n))
    for omega in (StateSpec.measure(sp, w), StateSpec.pure(sp, int(rng.integers(n)))):
        val = evaluate_state(omega, a)
        assert val.real >= -1e-12
        assert abs(val.imag) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(1, 4), st.integers(0, 10**6))
def test_cauchy_schwarz_at_states(n, d, seed):
    from cstarmod import ModuleVector, inner_product
    rng = np.random.default_rng(seed)
    sp = BaseSpace.points([f"p{i}" for i in range(n)])
    x = ModuleVector(sp, rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d)))
    y = ModuleVector(sp, rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d)))
    omega = StateSpec.measure(sp, rng.dirichlet(np.ones(n)))
    lhs = abs(evaluate_state(omega, inner_product(x, y))) ** 2
    rhs = (evaluate_state(omega, inner_product(x, x)).real
           * evaluate_state(omega, inner_product(y, y)).real)
    assert lhs <= rhs + 1e-9 * max(rhs, 1.0)


def test_order_interval_preserved(rng):
    # 0 <= x_j <= c implies 0 <= combination <= c nodewise
    sp = BaseSpace.points([f"p{i}" for i in range(6)])
    c = 2.5
    xs = [AlgebraElement(sp, (c * rng.random(6)).astype(complex)) for _ in range(3)]
    raw = rng.dirichlet(np.ones(3), size=6).T        # (3, 6) nodewise partition
    parts = PartitionOfUnity(tuple(AlgebraElement(sp, np.sqrt(r).astype(complex))
                                   for r in raw))
    assert verify_partition_of_unity(list(parts.parts))
    out = a_convex_combine(parts, xs)
    assert np.min(out.values.real) >= -1e-12
    assert np.max(out.values.real) <= c + 1e-12


def test_algebra_json_roundtrip():
    sp = BaseSpace.grid(0.0, 1.0, 5)
    a = AlgebraElement(sp, np.array([1, 2j, -1, 0.5, 0.25 + 0.25j]))
    b = AlgebraElement.from_json(a.to_json())
    assert np.allclose(a.values, b.values)
    assert a.space == b.space
