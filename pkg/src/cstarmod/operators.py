"""Concrete unbounded-operator models: the discretized interval operator
-i d/dx with its extension family, boundary-condition fields over X,
diagonal matrix fields, the bounded transform and functional calculus.

Module-level operators ("fields") act nodewise on C(X, H) vectors and know
how to localize at points of X; boundary-condition fields store their data
symbolically (a declared boundary function plus a shared interval fiber
model) and materialize fiber matrices only per localization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .boundary import LambdaClassification, LambdaSpec, classify_lambda
from .fibers import FiberOperator, FiberSpace, IntervalFiberModel, hat_pair
from .module import ModuleShape, ModuleVector
from .space import AlgebraElement, BaseSpace


# ---------------------------------------------------------------------------
# function symbols for the continuous calculus
# ---------------------------------------------------------------------------

class FunctionSymbol:
    """A function on R with declared limits at +-infinity.

    The compressed form lives on [-1, 1]: tilde_f(x) = f(x / sqrt(1 - x^2))
    in the interior, with the declared limits at the endpoints.
    """

    def __init__(self, f: Callable, limit_neg: complex, limit_pos: complex):
        if limit_neg is None or limit_pos is None:
            raise ValueError("function symbol needs declared limits at both infinities")
        self.f = f
        self.limit_neg = complex(limit_neg)
        self.limit_pos = complex(limit_pos)

    def __call__(self, x):
        return self.f(x)

    def compressed(self, x):
        """The transported function on [-1, 1]."""
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape, dtype=complex)
        interior = np.abs(x) < 1.0
        xi = x[interior]
        out[interior] = np.asarray(self.f(xi / np.sqrt(1.0 - xi**2)), dtype=complex)
        out[x >= 1.0] = self.limit_pos
        out[x <= -1.0] = self.limit_neg
        return out if out.shape else complex(out)

    @staticmethod
    def resolvent_like(n: float = 1.0) -> "FunctionSymbol":
        """x -> (1 + x^2/n^2)^{-1}."""
        return FunctionSymbol(lambda x: 1.0 / (1.0 + (np.asarray(x) / n) ** 2), 0.0, 0.0)

    @staticmethod
    def constant(c: complex) -> "FunctionSymbol":
        return FunctionSymbol(lambda x: np.full_like(np.asarray(x, dtype=float), c, dtype=complex), c, c)


# ---------------------------------------------------------------------------
# the interval pair, deficiency data and extensions (fiber level)
# ---------------------------------------------------------------------------

@dataclass
class DeficiencyData:
    """Graph-normalized deficiency vectors and their boundary functionals."""

    model: IntervalFiberModel
    phi_plus: np.ndarray
    phi_minus: np.ndarray
    alpha_plus: np.ndarray          # functional row: alpha_+(x) = row @ x
    alpha_minus: np.ndarray
    l2_norm_plus: float
    l2_norm_minus: float
    residual_plus: float            # ||(A - i) phi_+|| in the fiber norm
    residual_minus: float

    def alpha(self, sign: int, x: np.ndarray) -> complex:
        row = self.alpha_plus if sign > 0 else self.alpha_minus
        return complex(row @ x)

    def eta_pair(self, lam: complex):
        return self.model.eta_vectors(lam)


def build_dirac_interval(n: int, scheme: str = "sbp42"):
    """Discretize D = -i d/dx on [0,1]: returns (D_min, D_max, model).

    D_max carries no boundary constraint; D_min pins both endpoint values.
    The scheme is recorded on the operators' metadata.
    """
    model = IntervalFiberModel(n, scheme)
    return model.minimal(), model.maximal(), model


def deficiency_data(model: IntervalFiberModel, tau: float | None = None) -> DeficiencyData:
    """Compute ker(D_max -+ i) via smallest singular vectors and normalize.

    Raises if either numerical kernel is not one-dimensional at the
    threshold (bad grid / tolerance).
    """
    op = model.maximal()
    for shift in (1j, -1j):
        cnt, smin, thr = op.kernel_dim(shift, tau)
        if cnt != 1:
            raise RuntimeError(
                f"kernel of (D_max - ({shift})) has numerical dimension {cnt} "
                f"(sigma_min={smin:.3e}, threshold={thr:.3e})")
    phi_p, phi_m = model.deficiency()
    row_p, row_m = model.alpha_rows()
    A = model.A
    sp_ = model.space
    return DeficiencyData(
        model=model,
        phi_plus=phi_p,
        phi_minus=phi_m,
        alpha_plus=row_p,
        alpha_minus=row_m,
        l2_norm_plus=sp_.norm(phi_p),
        l2_norm_minus=sp_.norm(phi_m),
        residual_plus=sp_.norm(A @ phi_p - 1j * phi_p),
        residual_minus=sp_.norm(A @ phi_m + 1j * phi_m),
    )


def build_extension(data: DeficiencyData, lam: complex) -> FiberOperator:
    """Selfadjoint extension: D_max restricted to alpha_+ = lam alpha_-.

    The constraint is realized through the exact discrete boundary relation
    it induces; the alpha-functional identity is kept as a checkable
    invariant on the domain.
    """
    lam = complex(lam)
    if abs(abs(lam) - 1.0) > 1e-12:
        raise ValueError("extension parameter must be unimodular")
    return data.model.extension(lam)


def _require_selfadjoint(T: FiberOperator, tol: float, what: str) -> None:
    scale = max(T._matrix_scale(), 1.0)
    if T.hermiticity_defect() > tol * scale:
        raise ValueError(f"{what} requires a numerically selfadjoint model")
    if T.constraints is not None and T.defect_indices() != (0, 0):
        raise ValueError(f"{what} requires zero defect indices (symmetric is not enough)")


def bounded_transform(T: FiberOperator, tol: float = 1e-8) -> np.ndarray:
    """T (I + T^2)^{-1/2} on the model; requires a numerically selfadjoint T."""
    _require_selfadjoint(T, tol, "bounded transform")
    return T.calculus_matrix(lambda lam: lam / np.sqrt(1.0 + lam**2))


def functional_calculus(T: FiberOperator, f: FunctionSymbol, tol: float = 1e-8) -> np.ndarray:
    """f(T) = tilde_f(bounded transform of T), computed spectrally."""
    if not isinstance(f, FunctionSymbol):
        raise ValueError("functional calculus needs a FunctionSymbol with declared limits")
    _require_selfadjoint(T, tol, "functional calculus")
    return T.calculus_matrix(lambda lam: np.asarray(f(lam), dtype=complex))


def build_hat(T: FiberOperator) -> FiberOperator:
    """The symmetric block reduction [[0, T*], [T, 0]] on the doubled fiber."""
    return T.hat()


def resolvent(T: FiberOperator, mu: float) -> np.ndarray:
    """(T - i mu)^{-1} on the model, mu real nonzero."""
    mu = float(mu)
    if mu == 0.0:
        raise ValueError("mu must be nonzero")
    return T.resolvent_matrix(mu)


def resolvent_norm(T: FiberOperator, mu: float) -> float:
    ev = T.spectrum()
    return float(np.max(1.0 / np.sqrt(ev**2 + mu**2)))


# ---------------------------------------------------------------------------
# module-level operator fields
# ---------------------------------------------------------------------------

class OperatorField:
    """Base class: an operator on E = C(X, H) acting nodewise."""

    is_closed = True

    def __init__(self, space: BaseSpace):
        self.space = space

    # subclasses provide:
    #   fiber_space() -> FiberSpace
    #   localize_pure(p) -> FiberOperator
    #   adjoint() -> OperatorField
    def fiber_space(self) -> FiberSpace:
        raise NotImplementedError

    def localize_pure(self, p: int) -> FiberOperator:
        raise NotImplementedError

    def adjoint(self) -> "OperatorField":
        raise NotImplementedError

    @property
    def module_shape(self) -> ModuleShape:
        fs = self.fiber_space()
        weights = None if not fs.is_interval else fs.weights
        return ModuleShape(self.space, fs.dim, weights)

    def apply(self, f: ModuleVector, check_domain: bool = True) -> ModuleVector:
        vals = np.empty_like(f.values)
        for p in range(self.space.node_count):
            op = self.localize_pure(p)
            vals[p] = op.apply(f.values[p], check_domain=check_domain)
        fs = self.fiber_space()
        return ModuleVector(f.space, vals, fs.weights if fs.is_interval else None)

    def domain_sample(self, rng) -> ModuleVector:
        fs = self.fiber_space()
        vals = np.stack([
            self.localize_pure(p).domain_sample(rng)
            for p in range(self.space.node_count)
        ])
        return ModuleVector(self.space, vals, fs.weights if fs.is_interval else None)

    def symmetry_defect(self, rng, samples: int = 4) -> float:
        """max over nodes and sample pairs of |<Tf,g>(p) - <f,Tg>(p)|."""
        from .module import inner_product
        worst = 0.0
        for _ in range(samples):
            f = self.domain_sample(rng)
            g = self.domain_sample(rng)
            Tf = self.apply(f)
            Tg = self.apply(g)
            lhs = inner_product(Tf, g).values
            rhs = inner_product(f, Tg).values
            nrm = max(np.max(np.abs(f.values)), np.max(np.abs(g.values)), 1e-30)
            worst = max(worst, float(np.max(np.abs(lhs - rhs))) / nrm**2)
        return worst

    def is_symmetric(self, rng=None, tol: float = 1e-6) -> bool:
        rng = rng or np.random.default_rng(0)
        return self.symmetry_defect(rng) <= tol * max(self._scale(), 1.0)

    def _scale(self) -> float:
        return 1.0


class DiagonalField(OperatorField):
    """Node-indexed family of dense fiber matrices (everywhere defined)."""

    def __init__(self, space: BaseSpace, mats):
        super().__init__(space)
        mats = np.asarray(mats, dtype=complex)
        if mats.ndim != 3 or mats.shape[0] != space.node_count or mats.shape[1] != mats.shape[2]:
            raise ValueError("mats must be (node_count, d, d)")
        self.mats = mats
        self._fs = FiberSpace(mats.shape[1])

    @staticmethod
    def random_symmetric(space: BaseSpace, d: int, rng) -> "DiagonalField":
        mats = rng.standard_normal((space.node_count, d, d)) + \
            1j * rng.standard_normal((space.node_count, d, d))
        mats = (mats + np.conj(np.transpose(mats, (0, 2, 1)))) / 2
        return DiagonalField(space, mats)

    def fiber_space(self) -> FiberSpace:
        return self._fs

    def localize_pure(self, p: int) -> FiberOperator:
        return FiberOperator(self._fs, self.mats[p], meta={"kind": "diagonal", "node": p})

    def adjoint(self) -> "DiagonalField":
        return DiagonalField(self.space, np.conj(np.transpose(self.mats, (0, 2, 1))))

    def _scale(self) -> float:
        return float(np.max(np.abs(self.mats)))


class MultiplicationField(OperatorField):
    """Multiplication by an algebra element on C(X, H)."""

    def __init__(self, a: AlgebraElement, fiber: FiberSpace | int):
        super().__init__(a.space)
        self.a = a
        self._fs = fiber if isinstance(fiber, FiberSpace) else FiberSpace(int(fiber))

    def fiber_space(self) -> FiberSpace:
        return self._fs

    def localize_pure(self, p: int) -> FiberOperator:
        d = self._fs.dim
        return FiberOperator(self._fs, self.a.values[p] * np.eye(d),
                             meta={"kind": "multiplication", "node": p})

    def adjoint(self) -> "MultiplicationField":
        return MultiplicationField(self.a.conj(), self._fs)

    def apply(self, f: ModuleVector, check_domain: bool = True) -> ModuleVector:
        return f * self.a

    def domain_sample(self, rng) -> ModuleVector:
        d = self._fs.dim
        vals = rng.standard_normal((self.space.node_count, d)) + \
            1j * rng.standard_normal((self.space.node_count, d))
        return ModuleVector(self.space, vals, self._fs.weights if self._fs.is_interval else None)

    def _scale(self) -> float:
        return self.a.sup_norm()


class ConstantField(OperatorField):
    """The same fiber operator at every node (e.g. a fixed extension)."""

    def __init__(self, space: BaseSpace, op: FiberOperator):
        super().__init__(space)
        self.op = op

    def fiber_space(self) -> FiberSpace:
        return self.op.space

    def localize_pure(self, p: int) -> FiberOperator:
        return self.op

    def adjoint(self) -> "ConstantField":
        return ConstantField(self.space, self.op.adjoint())

    def _scale(self) -> float:
        return self.op._matrix_scale()


class BoundaryField(OperatorField):
    """The boundary-condition field: at each point the interval operator with
    the boundary condition declared by the boundary function.

    ``role="op"`` localizes per the operator's table (extension on reg,
    minimal elsewhere); ``role="adjoint"`` per the adjoint's table (maximal
    on the singular interior, the extended value on removable points,
    minimal on non-removable ones).
    """

    def __init__(self, lam_spec: LambdaSpec, model: IntervalFiberModel,
                 classification: LambdaClassification | None = None, role: str = "op"):
        super().__init__(lam_spec.space)
        if role not in ("op", "adjoint"):
            raise ValueError("role must be 'op' or 'adjoint'")
        self.lam_spec = lam_spec
        self.model = model
        self.classification = classification or classify_lambda(lam_spec)
        self.role = role
        self._cache = {}

    def fiber_space(self) -> FiberSpace:
        return self.model.space

    def fiber_kind(self, x: float):
        """Symbolic fiber at the point x: ("min",), ("max",) or ("ext", lam)."""
        kind = self.classification.point_kind(x)
        if self.role == "op":
            if kind == "reg":
                return ("ext", self.lam_spec.value_at(x))
            return ("min",)
        if kind == "reg":
            return ("ext", self.lam_spec.value_at(x))
        if kind == "reg_inf":
            return ("ext", self.classification.lambda_tilde_at(x))
        if kind == "ssupp_r":
            return ("min",)
        return ("max",)

    def localize_pure(self, p: int) -> FiberOperator:
        x = float(self.space.nodes[p])
        tag = self.fiber_kind(x)
        key = tag if tag[0] != "ext" else ("ext", np.round(tag[1], 14))
        if key not in self._cache:
            if tag[0] == "min":
                self._cache[key] = self.model.minimal()
            elif tag[0] == "max":
                self._cache[key] = self.model.maximal()
            else:
                self._cache[key] = self.model.extension(tag[1])
        return self._cache[key]

    def adjoint(self) -> "BoundaryField":
        if self.role == "op":
            return BoundaryField(self.lam_spec, self.model, self.classification, role="adjoint")
        # adjoint of the adjoint: the closure; over our models this is the
        # operator with the extended boundary function (classification flags
        # carry the T** vs closure distinction, not numerics)
        return BoundaryField(self.lam_spec, self.model, self.classification, role="op")

    def _boundary_weight(self, x: float) -> float:
        """Profile weight for boundary parts of domain sections; vanishes
        toward points where the table forbids them (the compactly supported
        cutoffs of the declared construction)."""
        cls = self.classification
        h = (self.space.b - self.space.a) / (self.space.n - 1)
        d = np.inf
        if self.role == "op":
            for q, _ in cls.reg_inf:
                d = min(d, abs(x - q))
            for q in cls.ssupp_r:
                d = min(d, abs(x - q))
            for lo, hi in cls.ssupp_interior_intervals:
                d = 0.0 if lo <= x <= hi else min(d, abs(x - lo), abs(x - hi))
        else:
            for q in cls.ssupp_r:
                d = min(d, abs(x - q))
        return float(min(d / (4 * h), 1.0))

    def domain_sample(self, rng) -> ModuleVector:
        """Random section of the recorded domain, built per the declaration:
        a minimal-domain part everywhere plus boundary parts with cutoff
        profiles where the fiber table allows them."""
        xs = self.space.nodes
        n = self.space.node_count
        fs = self.model.space
        phi_p, phi_m = self.model.deficiency()
        interior = self.model.minimal().domain_sample(rng)
        vals = _smooth_profile(xs, rng)[:, None] * interior[None, :]
        for p in range(n):
            x = float(xs[p])
            tag = self.fiber_kind(x)
            if tag[0] == "min":
                continue
            wgt = self._boundary_weight(x)
            if wgt == 0.0:
                continue
            if tag[0] == "ext":
                vals[p] = vals[p] + wgt * (tag[1] * phi_p + phi_m)
            else:
                coef = rng.standard_normal(2) + 1j * rng.standard_normal(2)
                vals[p] = vals[p] + wgt * (coef[0] * phi_p + coef[1] * phi_m)
            vals[p] = self.localize_pure(p).project_to_domain(vals[p])
        return ModuleVector(self.space, vals, fs.weights)

    def _scale(self) -> float:
        return self.model.maximal()._matrix_scale()


def _smooth_profile(xs, rng) -> np.ndarray:
    """Random low-order trigonometric profile over the base interval."""
    xs = np.asarray(xs, float)
    span = xs[-1] - xs[0]
    u = (xs - xs[0]) / span if span > 0 else xs * 0
    out = np.zeros(len(xs), dtype=complex)
    for k in range(3):
        out += ((rng.standard_normal() + 1j * rng.standard_normal())
                * np.cos(np.pi * k * u))
    return out


class HatField(OperatorField):
    """Symmetric block reduction of a field: localizes to the hat of the
    localized pair (T^p, (T^*)^p)."""

    def __init__(self, inner: OperatorField):
        super().__init__(inner.space)
        self.inner = inner
        self.inner_adj = inner.adjoint()

    def fiber_space(self) -> FiberSpace:
        fs = self.inner.fiber_space()
        return FiberSpace(2 * fs.dim, np.concatenate([fs.weights] * 2))

    def localize_pure(self, p: int) -> FiberOperator:
        return hat_pair(self.inner.localize_pure(p), self.inner_adj.localize_pure(p))

    def adjoint(self) -> "HatField":
        return self


def build_boundary_field(lam_spec: LambdaSpec, fiber_n: int = 301,
                         scheme: str = "sbp42",
                         model: IntervalFiberModel | None = None):
    """The boundary field T_Lambda with its companions T_min and T_max.

    Returns ``(T_lambda, T_min_field, T_max_field)`` sharing one fiber model.
    """
    model = model or IntervalFiberModel(fiber_n, scheme)
    T = BoundaryField(lam_spec, model)
    Tmin = ConstantField(lam_spec.space, model.minimal())
    Tmax = ConstantField(lam_spec.space, model.maximal())
    return T, Tmin, Tmax
