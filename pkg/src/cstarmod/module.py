"""The standard Hilbert C(X)-module E = C(X, H) with finite-dimensional fibers.

A module vector stores one fiber vector per node of X.  The C(X)-valued inner
product is computed nodewise and is conjugate-linear in the first slot.  When
the fiber models a function space (discretized interval), the fiber inner
product carries quadrature weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .space import AlgebraElement, BaseSpace, _complex_to_pairs, _pairs_to_complex


@dataclass(frozen=True)
class ModuleShape:
    """The shape of E = C(X, H): base space plus fiber dimension/weights."""

    space: BaseSpace
    fiber_dim: int
    fiber_weights: np.ndarray | None = None

    def __post_init__(self):
        if self.fiber_dim < 1:
            raise ValueError("fiber_dim must be positive")
        if self.fiber_weights is not None:
            w = np.asarray(self.fiber_weights, dtype=float)
            if w.shape != (self.fiber_dim,) or np.any(w <= 0):
                raise ValueError("fiber_weights must be positive with length fiber_dim")
            object.__setattr__(self, "fiber_weights", w)


class ModuleVector:
    """Element of C(X, H): ``values[p]`` is the fiber vector at node p."""

    def __init__(self, space: BaseSpace, values, fiber_weights=None):
        values = np.asarray(values, dtype=complex)
        if values.ndim != 2 or values.shape[0] != space.node_count:
            raise ValueError(
                f"values must be (node_count, fiber_dim), got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite entries in module vector")
        self.space = space
        self.values = values
        self.fiber_dim = values.shape[1]
        if fiber_weights is not None:
            fiber_weights = np.asarray(fiber_weights, dtype=float)
            if fiber_weights.shape != (self.fiber_dim,):
                raise ValueError("fiber_weights length mismatch")
        self.fiber_weights = fiber_weights

    @property
    def shape(self) -> ModuleShape:
        return ModuleShape(self.space, self.fiber_dim, self.fiber_weights)

    def _w(self) -> np.ndarray:
        if self.fiber_weights is None:
            return np.ones(self.fiber_dim)
        return self.fiber_weights

    def __add__(self, other: "ModuleVector") -> "ModuleVector":
        _check_shapes(self, other)
        return ModuleVector(self.space, self.values + other.values, self.fiber_weights)

    def __sub__(self, other: "ModuleVector") -> "ModuleVector":
        _check_shapes(self, other)
        return ModuleVector(self.space, self.values - other.values, self.fiber_weights)

    def __mul__(self, other) -> "ModuleVector":
        if isinstance(other, AlgebraElement):
            # right module action f.a : (f a)(x) = f(x) a(x)
            if other.space != self.space:
                raise ValueError("space mismatch")
            return ModuleVector(
                self.space, self.values * other.values[:, None], self.fiber_weights
            )
        return ModuleVector(self.space, self.values * other, self.fiber_weights)

    __rmul__ = __mul__

    def to_json(self) -> dict:
        out = {
            "space": self.space.to_json(),
            "fiber_dim": self.fiber_dim,
            "values": _complex_to_pairs(self.values),
        }
        if self.fiber_weights is not None:
            out["fiber_weights"] = list(map(float, self.fiber_weights))
        return out

    @staticmethod
    def from_json(data: dict) -> "ModuleVector":
        return ModuleVector(
            BaseSpace.from_json(data["space"]),
            _pairs_to_complex(data["values"]),
            data.get("fiber_weights"),
        )


def _check_shapes(f: ModuleVector, g: ModuleVector) -> None:
    if f.space != g.space or f.fiber_dim != g.fiber_dim:
        raise ValueError("module vectors have mismatched space or fiber dimension")


def inner_product(f: ModuleVector, g: ModuleVector) -> AlgebraElement:
    """C(X)-valued inner product <f,g>(x) = <f(x), g(x)>_H, conjugate-linear
    in the first slot."""
    _check_shapes(f, g)
    w = f._w()
    vals = np.sum(w[None, :] * f.values.conj() * g.values, axis=1)
    return AlgebraElement(f.space, vals)


def module_norm(f: ModuleVector) -> float:
    """sup-norm over nodes of the fiber norm: ||<f,f>||^(1/2)."""
    w = f._w()
    per_node = np.sum(w[None, :] * np.abs(f.values) ** 2, axis=1)
    return float(np.sqrt(np.max(per_node)))


@dataclass(frozen=True)
class Submodule:
    """Finitely generated submodule, closed per-point span over our X.

    The module generated by g_1..g_k over C(X) localizes at each node p to
    span{g_1(p), .., g_k(p)}; over finite node sets this span IS the
    submodule's fiber, which is the only closure notion used here.
    """

    generators: tuple

    def __post_init__(self):
        if len(self.generators) == 0:
            raise ValueError("submodule needs at least one generator")
        g0 = self.generators[0]
        for g in self.generators:
            _check_shapes(g0, g)

    @property
    def space(self) -> BaseSpace:
        return self.generators[0].space

    @property
    def fiber_dim(self) -> int:
        return self.generators[0].fiber_dim

    def generator_matrix(self, p: int) -> np.ndarray:
        """Fiber generator matrix at node p, columns = generator values."""
        return np.stack([g.values[p] for g in self.generators], axis=1)

    def to_json(self) -> dict:
        return {"generators": [g.to_json() for g in self.generators]}

    @staticmethod
    def from_json(data: dict) -> "Submodule":
        return Submodule(tuple(ModuleVector.from_json(g) for g in data["generators"]))


def submodule_distance(L: Submodule, x0: ModuleVector) -> tuple[float, np.ndarray]:
    """Squared distance of x0 to the per-point-span submodule L.

    Returns ``(delta, per_node)`` where ``per_node[p]`` is the squared fiber
    distance of ``x0(p)`` to span{g_j(p)} and ``delta = max(per_node)`` is the
    squared module distance (sup-norm semantics).
    """
    _check_shapes(L.generators[0], x0)
    w = x0._w()
    sw = np.sqrt(w)
    # stacked weighted least squares per node
    G = np.stack([g.values for g in L.generators], axis=2)      # (nodes, d, k)
    Gw = G * sw[None, :, None]
    xw = x0.values * sw[None, :]
    coef = np.linalg.pinv(Gw) @ xw[:, :, None]                  # (nodes, k, 1)
    resid = xw - (Gw @ coef)[:, :, 0]
    per_node = np.sum(np.abs(resid) ** 2, axis=1)
    return float(np.max(per_node)), per_node


class GraphModule:
    """dom(T) with the graph inner product <x,y> + <Tx,Ty>.

    ``complete`` records whether the underlying operator model is closed
    (all models in this package are).
    """

    def __init__(self, base):
        self.base = base
        self.complete = bool(getattr(base, "is_closed", True))

    def inner(self, x: ModuleVector, y: ModuleVector) -> AlgebraElement:
        return graph_inner_product(self, x, y)


def graph_inner_product(G: GraphModule, x: ModuleVector, y: ModuleVector) -> AlgebraElement:
    """<x,y> + <Tx,Ty> nodewise; x and y must be in the recorded domain of T."""
    T = G.base
    Tx = T.apply(x)
    Ty = T.apply(y)
    return inner_product(x, y) + inner_product(Tx, Ty)
