"""Separating states for convex sets in C(X, H)-modules.

For finitely generated submodules the separating state is a pure state at
the node of maximal fiber distance.  For convex hulls, where pure states
can fail, a mixed state is found as the value of the two-player game

    max over states w of  min over hull points y of  sum_p w_p |y(p)-x0(p)|^2

solved by a double oracle: an LP over nodal weights against the finite set
of hull points seen so far, and an exact simplex-constrained quadratic
minimization as the best-response oracle.  This module also builds the two
classical counterexamples showing that plain convexity cannot keep norms
bounded below and that pure states do not suffice for hulls.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .module import ModuleVector, Submodule, inner_product, submodule_distance
from .space import AlgebraElement, BaseSpace, StateSpec, evaluate_state, is_positive


@dataclass(frozen=True)
class ConvexHull:
    """Closed convex hull of finitely many module vectors."""

    vertices: tuple

    def __post_init__(self):
        if len(self.vertices) == 0:
            raise ValueError("hull needs at least one vertex")

    @property
    def space(self):
        return self.vertices[0].space

    def point(self, theta: np.ndarray) -> ModuleVector:
        acc = self.vertices[0] * theta[0]
        for t, v in zip(theta[1:], self.vertices[1:]):
            acc = acc + v * t
        return acc


@dataclass
class SeparationProblem:
    """Data of a separation question: the convex set, the excluded vector,
    sampled distance elements and the squared module distance."""

    L: Submodule | ConvexHull
    x0: ModuleVector
    A_samples: list = field(default_factory=list)
    delta: float = 0.0

    @staticmethod
    def build(L, x0: ModuleVector, rng=None, samples: int = 16) -> "SeparationProblem":
        rng = rng or np.random.default_rng(0)
        prob = SeparationProblem(L, x0)
        if isinstance(L, Submodule):
            prob.delta, _ = submodule_distance(L, x0)
            k = len(L.generators)
            for _ in range(samples):
                coef = rng.standard_normal(k) + 1j * rng.standard_normal(k)
                y = _combine(L.generators, coef)
                prob.A_samples.append(inner_product(y - x0, y - x0))
        else:
            prob.delta = _hull_sup_distance(L, x0)
            m = len(L.vertices)
            for _ in range(samples):
                th = rng.dirichlet(np.ones(m))
                y = L.point(th)
                prob.A_samples.append(inner_product(y - x0, y - x0))
        return prob


def _combine(gens, coef) -> ModuleVector:
    acc = gens[0] * coef[0]
    for c, g in zip(coef[1:], gens[1:]):
        acc = acc + g * c
    return acc


@dataclass
class SeparationCertificate:
    state: StateSpec
    margin: float
    kind: str                        # "PureState" | "MixedState"

    def to_json(self) -> dict:
        return {"state": self.state.to_json(), "margin": self.margin, "kind": self.kind}

    def check_on(self, a: AlgebraElement, slack: float = 1e-9) -> bool:
        val = evaluate_state(self.state, a)
        return val.real >= self.margin - slack and abs(val.imag) <= 1e-9


class NoCertificateError(ValueError):
    """x0 lies in the closure; no separating state exists."""


def _hull_payoff_gram(L: ConvexHull, x0: ModuleVector):
    """per-node payoff data: diff[i] = v_i - x0, c(theta)_p = |sum th_i diff_i(p)|^2."""
    diffs = [v - x0 for v in L.vertices]
    w = x0._w()
    stacked = np.stack([d.values for d in diffs])          # (m, nodes, d)
    return stacked, w


def _hull_cost_per_node(stacked, w, theta) -> np.ndarray:
    y = np.tensordot(theta, stacked, axes=(0, 0))          # (nodes, d)
    return np.sum(w[None, :] * np.abs(y) ** 2, axis=1).real


def _simplex_qp(G: np.ndarray) -> tuple[np.ndarray, float]:
    """Exact minimizer of theta^T G theta over the probability simplex
    (active-set enumeration; G is a small PSD matrix)."""
    m = G.shape[0]
    best = None
    for mask in range(1, 1 << m):
        idx = [i for i in range(m) if mask >> i & 1]
        Gs = G[np.ix_(idx, idx)]
        ones = np.ones(len(idx))
        try:
            sol = np.linalg.lstsq(Gs, ones, rcond=None)[0]
        except np.linalg.LinAlgError:
            continue
        s = sol.sum()
        if abs(s) < 1e-14:
            continue
        th_s = sol / s
        if np.any(th_s < -1e-12):
            continue
        th = np.zeros(m)
        th[idx] = np.clip(th_s, 0.0, None)
        th /= th.sum()
        val = float(th @ G @ th)
        if best is None or val < best[1]:
            best = (th, val)
    return best


def _hull_sup_distance(L: ConvexHull, x0: ModuleVector, grid_step: float = 1e-3) -> float:
    """min over the hull of the squared module (sup) distance to x0."""
    stacked, w = _hull_payoff_gram(L, x0)
    m = stacked.shape[0]
    if m == 1:
        return float(np.max(_hull_cost_per_node(stacked, w, np.ones(1))))
    if m == 2:
        ths = np.arange(0.0, 1.0 + grid_step / 2, grid_step)
        best = np.inf
        for t in ths:
            best = min(best, float(np.max(_hull_cost_per_node(stacked, w, np.array([t, 1 - t])))))
        return best
    rng = np.random.default_rng(7)
    best = np.inf
    for _ in range(400):
        th = rng.dirichlet(np.ones(m))
        best = min(best, float(np.max(_hull_cost_per_node(stacked, w, th))))
    return best


def find_separating_state(P: SeparationProblem, tol: float = 1e-12,
                          gap_tol: float = 1e-9, max_rounds: int = 60) -> SeparationCertificate:
    """A state whose values on the distance elements stay above a positive
    margin, certifying that the localization of x0 leaves the closure of the
    localized set.

    Submodules yield a pure state at the worst node, realizing the
    commutative pure-state refinement; hulls are solved by the LP double
    oracle and may genuinely need a mixed state.
    """
    if P.delta <= tol:
        raise NoCertificateError("x0 is within tolerance of the set; no certificate")
    x0 = P.x0
    if isinstance(P.L, Submodule):
        _, per_node = submodule_distance(P.L, x0)
        p_star = int(np.argmax(per_node))
        margin = float(per_node[p_star])
        return SeparationCertificate(StateSpec.pure(x0.space, p_star), margin, "PureState")

    stacked, w = _hull_payoff_gram(P.L, x0)
    m, n_nodes, _ = stacked.shape
    thetas = [np.eye(m)[i] for i in range(m)]
    w_opt = np.full(n_nodes, 1.0 / n_nodes)
    value = 0.0
    for _round in range(max_rounds):
        rows = np.stack([_hull_cost_per_node(stacked, w, th) for th in thetas])
        cobj = np.zeros(n_nodes + 1)
        cobj[-1] = -1.0
        A_ub = np.hstack([-rows, np.ones((rows.shape[0], 1))])
        b_ub = np.zeros(rows.shape[0])
        A_eq = np.zeros((1, n_nodes + 1))
        A_eq[0, :n_nodes] = 1.0
        res = linprog(cobj, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
                      bounds=[(0, None)] * n_nodes + [(None, None)], method="highs")
        if not res.success:
            raise RuntimeError(f"separating-state LP failed: {res.message}")
        w_opt = res.x[:n_nodes]
        upper = float(res.x[-1])
        # best response: exact simplex QP on the weighted Gram matrix
        th_star, lower = _simplex_qp(G_from_weights(stacked, w, w_opt))
        value = lower
        if upper - lower <= gap_tol + 1e-9 * abs(upper):
            break
        thetas.append(th_star)
    margin = float(value)
    if margin <= tol:
        raise NoCertificateError("game value is zero; no mixed certificate found")
    support = np.nonzero(w_opt > 1e-12)[0]
    if len(support) == 1:
        return SeparationCertificate(StateSpec.pure(x0.space, int(support[0])), margin, "PureState")
    return SeparationCertificate(StateSpec.measure(x0.space, w_opt / w_opt.sum()),
                                 margin, "MixedState")


def G_from_weights(stacked, w, node_weights) -> np.ndarray:
    """Gram matrix of hull differences under the mixed state's weights."""
    m = stacked.shape[0]
    flat = stacked.reshape(m, -1)
    wrep = (node_weights[:, None] * w[None, :]).reshape(-1)
    return np.real((flat * wrep[None, :]) @ flat.conj().T)


# ---------------------------------------------------------------------------
# counterexample constructions
# ---------------------------------------------------------------------------

def hat_function(t: float, n: int, grid: BaseSpace) -> AlgebraElement:
    """Piecewise-linear bump of height one: peak at t, support [t-1/n, t+1/n].

    The support must stay inside the open unit interval.
    """
    if grid.kind != "grid":
        raise ValueError("hat functions live on interval grids")
    if not (0.0 < t - 1.0 / n and t + 1.0 / n < 1.0):
        raise ValueError("hat support leaves (0, 1)")
    xs = grid.nodes
    vals = np.clip(1.0 - n * np.abs(xs - t), 0.0, None).astype(complex)
    return AlgebraElement(grid, vals)


def resolving_grid(N: int) -> BaseSpace:
    """Uniform grid containing all peaks j/(N+1) and support edges of the
    flattening family (spacing divides 1/(2N+2))."""
    return BaseSpace.grid(0.0, 1.0, 20 * (N + 1) + 1)


def flattening_combination(N: int, grid: BaseSpace | None = None):
    """The convex combination (1/N) sum_j f_{t_j, 2N+2} with t_j = j/(N+1).

    All members have sup-norm one while the combination's sup-norm is 1/N:
    plain convexity cannot keep norms bounded below.  Returns the
    combination and a report with the members' norms.
    """
    if N < 1:
        raise ValueError("N must be positive")
    grid = grid or resolving_grid(N)
    n_hat = 2 * N + 2
    spacing = (grid.b - grid.a) / (grid.n - 1)
    if (1.0 / n_hat) / spacing < 1 - 1e-9:
        raise ValueError("grid too coarse to resolve the hat supports")
    members = [hat_function(j / (N + 1.0), n_hat, grid) for j in range(1, N + 1)]
    comb = AlgebraElement(grid, sum(m.values for m in members) / N)
    report = {
        "N": N,
        "max_value": float(np.max(comb.values.real)),
        "member_norms": [m.sup_norm() for m in members],
        "all_members_norm_one": bool(all(abs(m.sup_norm() - 1.0) < 1e-12 for m in members)),
    }
    return comb, report


def pure_state_counterexample(eps: float, grid: BaseSpace | None = None,
                              scan_step: float = 1e-3) -> dict:
    """Two bumps with disjoint supports whose hull stays far from zero in
    norm while every pure state sees some hull point below eps^2.

    For each grid point an explicit eps-weighted combination is produced;
    the hull's minimal sup-norm is certified by a scan over the mixing
    weight.  A mixed-state separating certificate still exists and is
    attached for contrast (the set is convex but not a submodule).
    """
    if not (0.0 < eps <= 1.0):
        raise ValueError("eps must be in (0, 1]")
    grid = grid or BaseSpace.grid(0.0, 1.0, 201)
    f1 = hat_function(0.25, 5, grid)
    f2 = hat_function(0.75, 5, grid)
    xs = grid.nodes
    worst = 0.0
    for p in range(grid.node_count):
        if xs[p] <= 0.5:
            comb = eps * f1 + (1 - eps) * f2
        else:
            comb = (1 - eps) * f1 + eps * f2
        val = evaluate_state(StateSpec.pure(grid, p), comb * comb.conj()).real
        worst = max(worst, val)
    # minimal sup-norm over the hull by scanning the mixing weight
    ths = np.arange(0.0, 1.0 + scan_step / 2, scan_step)
    min_sup = min(float(np.max(np.abs(t * f1.values + (1 - t) * f2.values)))
                  for t in ths)
    hull = ConvexHull((ModuleVector(grid, f1.values[:, None]),
                       ModuleVector(grid, f2.values[:, None])))
    x0 = ModuleVector(grid, np.zeros((grid.node_count, 1)))
    problem = SeparationProblem.build(hull, x0)
    cert = find_separating_state(problem)
    return {
        "eps": eps,
        "pure_state_value_bound": worst,
        "eps_squared": eps * eps,
        "min_hull_sup_norm": min_sup,
        "mixed_certificate": cert.to_json(),
        "note": "hull is convex but not a submodule; pure states cannot separate",
    }


def convex_inequality_check(ys: list[ModuleVector], lams, x0: ModuleVector | None = None,
                            tol: float = 1e-10):
    """Nodewise verification of the convexity inequalities.

    Checks sum_kl l_k l_l <y_k,y_l> <= sum_k l_k <y_k,y_k> and, when x0 is
    given, the chained bound
    sum_j l_j <y_j-x0, y_j-x0> >= <x0 - sum l_j y_j, x0 - sum l_j y_j>.
    Returns (ok, witness_node or None).
    """
    lams = np.asarray(lams, dtype=float)
    if np.any(lams < -1e-15) or abs(lams.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be convex")
    n = len(ys)
    lhs = np.zeros(ys[0].space.node_count, dtype=complex)
    for k in range(n):
        for l in range(n):
            lhs += lams[k] * lams[l] * inner_product(ys[k], ys[l]).values
    rhs = np.zeros_like(lhs)
    for k in range(n):
        rhs += lams[k] * inner_product(ys[k], ys[k]).values
    gap = rhs.real - lhs.real
    if np.min(gap) < -tol:
        return False, int(np.argmin(gap))
    if x0 is not None:
        mean = _combine(ys, lams)
        left = np.zeros_like(lhs)
        for k in range(n):
            d = ys[k] - x0
            left += lams[k] * inner_product(d, d).values
        dm = x0 - mean
        right = inner_product(dm, dm).values
        gap2 = left.real - right.real
        if np.min(gap2) < -tol:
            return False, int(np.argmin(gap2))
    return True, None


def conjecture_search(rng=None, trials: int = 20, nodes: int = 12,
                      set_size: int = 6, rounds: int = 3) -> dict:
    """Randomized hunt for a counterexample to pure-state separation of
    A-convex sets: generate positive families with norms bounded below,
    close them under random partition-of-unity combinations, and compare the
    best pure-state lower bound with the smallest norm produced.

    Reports the worst ratio seen; makes no claim either way.
    """
    rng = rng or np.random.default_rng(0)
    space = BaseSpace.points([f"q{i}" for i in range(nodes)])
    worst = {"ratio": np.inf, "violations": 0, "trials": trials}
    for _ in range(trials):
        fams = [np.abs(rng.standard_normal(nodes)) + 0.2 for _ in range(set_size)]
        fams = [f / np.max(f) for f in fams]         # positive, sup-norm one
        current = [AlgebraElement(space, f.astype(complex)) for f in fams]
        for _round in range(rounds):
            new = []
            for _ in range(set_size):
                k = rng.integers(2, 4)
                picks = [current[i] for i in rng.integers(0, len(current), k)]
                raw = rng.dirichlet(np.ones(k))
                rho = np.sqrt(raw)
                combo = np.zeros(nodes, dtype=complex)
                for r2, x in zip(raw, picks):
                    combo += r2 * x.values
                new.append(AlgebraElement(space, combo))
            current.extend(new)
        min_norm = min(a.sup_norm() for a in current)
        pure_bound = max(min(a.values[p].real for a in current) for p in range(nodes))
        if min_norm > 1e-9:
            ratio = pure_bound / min_norm
            worst["ratio"] = min(worst["ratio"], ratio)
            if pure_bound <= 1e-12 < min_norm:
                worst["violations"] += 1
    if not np.isfinite(worst["ratio"]):
        worst["ratio"] = None
    return worst
