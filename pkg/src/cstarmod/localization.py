"""State localizations of the module and of operators on it.

For a pure state at node p the localized Hilbert space is the fiber at p
with point evaluation as the canonical map.  For a finitely supported
measure the localized space is the weighted direct sum over the
positive-weight nodes; zero-weight nodes span the null space of the state's
scalar product and are dropped.  Both constructions make the isometry
||i(x)||^2 = omega(<x,x>) exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._linalg import graph_orthonormal_residual, hermitize
from .fibers import FiberOperator
from .module import ModuleShape, ModuleVector, Submodule
from .operators import OperatorField
from .space import StateSpec


@dataclass
class LocalizationResult:
    """The localized Hilbert space of a module shape at a state.

    ``blocks`` lists (node index, scale) pairs: the canonical map sends a
    module vector f to the concatenation of scale * f(node) over the blocks.
    ``kernel_nodes`` are the nodes spanning the state's null space.
    """

    state: StateSpec
    shape: ModuleShape
    blocks: list                      # [(node, sqrt-weight scale)]
    kernel_nodes: list

    @property
    def dim(self) -> int:
        return len(self.blocks) * self.shape.fiber_dim

    @property
    def fiber_weights(self) -> np.ndarray:
        if self.shape.fiber_weights is None:
            return np.ones(self.shape.fiber_dim)
        return self.shape.fiber_weights

    def weights_vector(self) -> np.ndarray:
        """Inner-product weights of the localized space (concatenated)."""
        return np.concatenate([self.fiber_weights for _ in self.blocks])

    def apply_map(self, f: ModuleVector) -> np.ndarray:
        """The canonical map i_omega as coordinates of the localized space."""
        if f.space != self.state.space or f.fiber_dim != self.shape.fiber_dim:
            raise ValueError("module vector incompatible with localization")
        return np.concatenate([s * f.values[p] for p, s in self.blocks])

    def basis_map_matrix(self) -> np.ndarray:
        """Dense matrix of i_omega from stacked nodal coordinates."""
        n, d = self.state.space.node_count, self.shape.fiber_dim
        out = np.zeros((self.dim, n * d), dtype=complex)
        for k, (p, s) in enumerate(self.blocks):
            out[k * d:(k + 1) * d, p * d:(p + 1) * d] = s * np.eye(d)
        return out

    def norm(self, v: np.ndarray) -> float:
        return float(np.sqrt(np.sum(self.weights_vector() * np.abs(v) ** 2).real))

    def inner(self, u: np.ndarray, v: np.ndarray) -> complex:
        return complex(np.sum(self.weights_vector() * np.conj(u) * v))

    def kernel_description(self) -> str:
        if not self.kernel_nodes:
            return "trivial null space"
        return f"null space spanned by fibers at zero-weight nodes {self.kernel_nodes}"

    def to_json(self) -> dict:
        return {
            "state": self.state.describe(),
            "dim": self.dim,
            "blocks": [[int(p), float(s)] for p, s in self.blocks],
            "kernel": self.kernel_description(),
        }


def localize_module(shape: ModuleShape, omega: StateSpec) -> LocalizationResult:
    """Build the localized Hilbert space of E at the state omega."""
    if omega.space != shape.space:
        raise ValueError("state and module live over different spaces")
    if omega.kind == "pure":
        return LocalizationResult(omega, shape, [(omega.p, 1.0)], [])
    support = omega.support()
    if len(support) == 0:
        raise ValueError("zero state: all weights vanish")
    blocks = [(int(p), float(np.sqrt(omega.weights[p]))) for p in support]
    kernel = [int(p) for p in range(shape.space.node_count) if p not in set(map(int, support))]
    return LocalizationResult(omega, shape, blocks, kernel)


@dataclass
class LocalOperator:
    """A localized operator: block direct sum of fiber operators.

    For pure states there is a single block.  Defect indices add over
    blocks; matrices are only materialized on demand.
    """

    loc: LocalizationResult
    fibers: list                     # FiberOperator per block (same order)
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.loc.dim

    def single(self) -> FiberOperator:
        if len(self.fibers) != 1:
            raise ValueError("localization has several blocks")
        return self.fibers[0]

    def matrix(self) -> np.ndarray:
        import scipy.linalg
        return scipy.linalg.block_diag(*[op.dense() for op in self.fibers])

    def apply_localized(self, v: np.ndarray, check_domain: bool = True) -> np.ndarray:
        d = self.loc.shape.fiber_dim
        out = np.empty_like(v)
        for k, op in enumerate(self.fibers):
            out[k * d:(k + 1) * d] = op.apply(v[k * d:(k + 1) * d], check_domain)
        return out

    def domain_dim(self) -> int:
        return sum(op.domain_dim() for op in self.fibers)

    def symmetry_defect(self, rng=None, samples: int = 4) -> float:
        rng = rng or np.random.default_rng(0)
        return max(op.symmetry_defect(rng, samples) for op in self.fibers)

    def is_symmetric(self, rng=None, tol: float = 1e-8) -> bool:
        rng = rng or np.random.default_rng(0)
        scale = max(max(op._matrix_scale() for op in self.fibers), 1.0)
        return self.symmetry_defect(rng) <= tol * scale

    def defect_indices(self, tau: float | None = None, with_margins: bool = False):
        """Blockwise deficiency indices (they add over direct sums)."""
        n_plus = n_minus = 0
        margins = {"sigma_min_plus": np.inf, "sigma_min_minus": np.inf, "threshold": 0.0}
        for op in self.fibers:
            (np_, nm_), m = op.defect_indices(tau, with_margins=True)
            n_plus += np_
            n_minus += nm_
            margins["sigma_min_plus"] = min(margins["sigma_min_plus"], m["sigma_min_plus"])
            margins["sigma_min_minus"] = min(margins["sigma_min_minus"], m["sigma_min_minus"])
            margins["threshold"] = max(margins["threshold"], m["threshold"])
        if with_margins:
            return (n_plus, n_minus), margins
        return n_plus, n_minus


def localize_operator(T: OperatorField, loc: LocalizationResult) -> LocalOperator:
    """The localization of a field: its fiber at a pure state's node, the
    block sum of fibers over positive-weight nodes for measure states."""
    if T.space != loc.state.space:
        raise ValueError("operator and localization live over different spaces")
    fs = T.fiber_space()
    if fs.dim != loc.shape.fiber_dim:
        raise ValueError("operator fiber dimension incompatible with localization")
    fibers = [T.localize_pure(p) for p, _ in loc.blocks]
    return LocalOperator(loc, fibers, meta={"operator": type(T).__name__})


def localization_isometry_defect(loc: LocalizationResult, samples, inner_values) -> float:
    """max |   ||i(x)||^2 - omega(<x,x>) | over provided samples; the caller
    supplies omega(<x,x>) values to keep the check independent."""
    worst = 0.0
    for x, target in zip(samples, inner_values):
        worst = max(worst, abs(loc.norm(loc.apply_map(x)) ** 2 - target))
    return worst


# ---------------------------------------------------------------------------
# core criterion
# ---------------------------------------------------------------------------

@dataclass
class CoreReport:
    state: StateSpec
    residual: float
    threshold: float
    is_core: bool

    def to_json(self) -> dict:
        return {
            "state": self.state.describe(),
            "residual": self.residual,
            "threshold": self.threshold,
            "is_core": self.is_core,
        }


def _probe_matrix(op: FiberOperator, rng, count: int) -> np.ndarray:
    """Smooth probe vectors in the domain of a localized block, as
    tilde-coordinate columns.

    Probes are random vectors regularized by a clean second-difference
    filter (interval fibers), then pushed into the domain along smooth
    graph-metric representers of the constraints; orthogonal projections
    are avoided because their corrections concentrate at boundary nodes.
    """
    cols = []
    sm = op.space.smoother()
    for _ in range(count):
        y = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
        y = op.project_to_domain(sm(y))
        cols.append(op.space.to_tilde(y))
    return np.stack(cols, axis=1)


def check_core(T: OperatorField, subdomain: Submodule, states,
               tol: float = 1e-6, rng=None, probes: int = 24) -> list[CoreReport]:
    """Decide per state whether the localized subdomain is graph-dense.

    The density test is probe-based: resolvent-smoothed random domain
    vectors are projected (graph metric) onto the localized subdomain span;
    the reported residual is the worst relative projection error, compared
    against ``tol``.
    """
    if not states:
        raise ValueError("empty state list")
    rng = rng or np.random.default_rng(0)
    shape = T.module_shape
    reports = []
    for omega in states:
        loc = localize_module(shape, omega)
        L = localize_operator(T, loc)
        worst = 0.0
        for (p, _), op in zip(loc.blocks, L.fibers):
            span = subdomain.generator_matrix(p)          # fiber span at node p
            for g in subdomain.generators:
                if not op.in_domain(g.values[p]):
                    raise ValueError("subdomain generator outside recorded operator domain")
            Q, M = op.reduced()
            span_t = op.space.to_tilde(span.T).T if span.ndim == 2 else span
            sub_coords = Q.conj().T @ span_t
            # drop directions that leave the domain (they cannot help density)
            resid = span_t - Q @ sub_coords
            if np.linalg.norm(resid) > 1e-6 * max(np.linalg.norm(span_t), 1e-30):
                raise ValueError("subdomain localization leaves the operator domain")
            probes_t = _probe_matrix(op, rng, probes)
            worst = max(worst, graph_orthonormal_residual(Q, M, sub_coords, probes_t))
        reports.append(CoreReport(omega, worst, tol, worst <= tol))
    return reports
