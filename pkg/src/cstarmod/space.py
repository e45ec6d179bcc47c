"""Base space X, the commutative algebra C(X), states and partitions of unity.

Elements of C(X) are represented by their samples on the nodes of X.  Whether
a sampled element is "continuous" is never inferred from the samples; where
continuity matters (boundary-condition fields) it is part of the declared
description, see :mod:`cstarmod.regularity`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DEFAULT_TOL = 1e-10


class HypothesisError(RuntimeError):
    """A check was invoked on data violating its mathematical hypotheses."""


@dataclass(frozen=True)
class BaseSpace:
    """The space X: either finitely many labelled points or a uniform grid.

    For ``kind="grid"`` the nodes are ``n`` uniformly spaced points of
    ``[a, b]`` including both endpoints.
    """

    kind: str                      # "points" | "grid"
    labels: tuple = ()
    a: float = 0.0
    b: float = 1.0
    n: int = 0

    def __post_init__(self):
        if self.kind == "points":
            if len(self.labels) == 0:
                raise ValueError("FinitePoints space needs at least one label")
            if len(set(self.labels)) != len(self.labels):
                raise ValueError("labels must be distinct")
        elif self.kind == "grid":
            if self.n < 2:
                raise ValueError("IntervalGrid needs n >= 2 nodes")
            if not self.a < self.b:
                raise ValueError("IntervalGrid needs a < b")
        else:
            raise ValueError(f"unknown space kind {self.kind!r}")

    @staticmethod
    def points(labels: Sequence) -> "BaseSpace":
        return BaseSpace(kind="points", labels=tuple(labels))

    @staticmethod
    def grid(a: float, b: float, n: int) -> "BaseSpace":
        return BaseSpace(kind="grid", a=float(a), b=float(b), n=int(n))

    @property
    def node_count(self) -> int:
        return len(self.labels) if self.kind == "points" else self.n

    @property
    def nodes(self) -> np.ndarray:
        """Node coordinates (grid) or indices (points)."""
        if self.kind == "grid":
            return np.linspace(self.a, self.b, self.n)
        return np.arange(len(self.labels), dtype=float)

    def node_index(self, x: float, tol: float = 1e-9) -> int:
        """Index of the grid node closest to ``x``; error if none is within tol."""
        if self.kind != "grid":
            raise ValueError("node_index by coordinate only applies to grids")
        nodes = self.nodes
        i = int(np.argmin(np.abs(nodes - x)))
        if abs(nodes[i] - x) > tol * max(1.0, abs(self.b - self.a)):
            raise ValueError(f"{x} is not a grid node")
        return i

    def to_json(self) -> dict:
        if self.kind == "grid":
            return {"kind": "grid", "a": self.a, "b": self.b, "n": self.n}
        return {"kind": "points", "labels": list(self.labels)}

    @staticmethod
    def from_json(data: dict) -> "BaseSpace":
        if data["kind"] == "grid":
            return BaseSpace.grid(data["a"], data["b"], data["n"])
        if data["kind"] == "points":
            return BaseSpace.points(data["labels"])
        raise ValueError(f"unknown space kind {data['kind']!r}")


def _pairs_to_complex(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def _complex_to_pairs(values: np.ndarray) -> list:
    return np.stack([values.real, values.imag], axis=-1).tolist()


@dataclass(frozen=True)
class AlgebraElement:
    """A sampled element of C(X): one complex value per node of X."""

    space: BaseSpace
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.space.node_count,):
            raise ValueError(
                f"values shape {v.shape} incompatible with {self.space.node_count} nodes"
            )
        object.__setattr__(self, "values", v)

    @staticmethod
    def constant(space: BaseSpace, value: complex) -> "AlgebraElement":
        return AlgebraElement(space, np.full(space.node_count, value, dtype=complex))

    @staticmethod
    def one(space: BaseSpace) -> "AlgebraElement":
        return AlgebraElement.constant(space, 1.0)

    @staticmethod
    def from_function(space: BaseSpace, f) -> "AlgebraElement":
        if space.kind != "grid":
            raise ValueError("from_function requires a grid space")
        return AlgebraElement(space, np.asarray([f(x) for x in space.nodes], dtype=complex))

    def is_selfadjoint(self, tol: float = DEFAULT_TOL) -> bool:
        return bool(np.max(np.abs(self.values.imag)) <= tol)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def conj(self) -> "AlgebraElement":
        return AlgebraElement(self.space, self.values.conj())

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        _check_space(self, other)
        return AlgebraElement(self.space, self.values + other.values)

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        _check_space(self, other)
        return AlgebraElement(self.space, self.values - other.values)

    def __mul__(self, other) -> "AlgebraElement":
        if isinstance(other, AlgebraElement):
            _check_space(self, other)
            return AlgebraElement(self.space, self.values * other.values)
        return AlgebraElement(self.space, self.values * other)

    __rmul__ = __mul__

    def to_json(self) -> dict:
        return {"space": self.space.to_json(), "values": _complex_to_pairs(self.values)}

    @staticmethod
    def from_json(data: dict) -> "AlgebraElement":
        return AlgebraElement(BaseSpace.from_json(data["space"]), _pairs_to_complex(data["values"]))


def _check_space(a, b) -> None:
    if a.space != b.space:
        raise ValueError("space mismatch")


@dataclass(frozen=True)
class StateSpec:
    """A state on C(X): point evaluation or a finitely supported measure.

    Measure weights must be nonnegative and sum to one (within 1e-12).
    """

    kind: str                      # "pure" | "measure"
    space: BaseSpace
    p: int = -1
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "pure":
            if not (0 <= self.p < self.space.node_count):
                raise ValueError(f"pure-state node {self.p} out of range")
        elif self.kind == "measure":
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (self.space.node_count,):
                raise ValueError("weights length must equal the node count")
            if np.any(w < -1e-15):
                raise ValueError("measure weights must be nonnegative")
            if abs(w.sum() - 1.0) > 1e-12:
                raise ValueError(f"measure weights sum to {w.sum()}, not 1")
            object.__setattr__(self, "weights", np.clip(w, 0.0, None))
        else:
            raise ValueError(f"unknown state kind {self.kind!r}")

    @staticmethod
    def pure(space: BaseSpace, p: int) -> "StateSpec":
        return StateSpec(kind="pure", space=space, p=int(p))

    @staticmethod
    def measure(space: BaseSpace, weights) -> "StateSpec":
        return StateSpec(kind="measure", space=space, weights=np.asarray(weights, float))

    @staticmethod
    def uniform(space: BaseSpace) -> "StateSpec":
        n = space.node_count
        return StateSpec.measure(space, np.full(n, 1.0 / n))

    @staticmethod
    def lebesgue(space: BaseSpace) -> "StateSpec":
        """Trapezoid weights on a grid, normalized: a faithful discrete stand-in
        for integration against dx."""
        if space.kind != "grid":
            raise ValueError("lebesgue weights require a grid")
        w = np.ones(space.n)
        w[0] = w[-1] = 0.5
        return StateSpec.measure(space, w / w.sum())

    @staticmethod
    def riemann(space: BaseSpace) -> "StateSpec":
        """Right-endpoint Riemann weights: node 0 carries weight zero."""
        if space.kind != "grid":
            raise ValueError("riemann weights require a grid")
        w = np.ones(space.n)
        w[0] = 0.0
        return StateSpec.measure(space, w / w.sum())

    def support(self) -> np.ndarray:
        """Indices of nodes carrying positive weight."""
        if self.kind == "pure":
            return np.array([self.p])
        return np.nonzero(self.weights > 0.0)[0]

    def describe(self) -> dict:
        if self.kind == "pure":
            return {"kind": "pure", "node": self.p}
        return {"kind": "measure", "support_size": int(len(self.support()))}

    def to_json(self) -> dict:
        if self.kind == "pure":
            return {"kind": "pure", "space": self.space.to_json(), "p": self.p}
        return {
            "kind": "measure",
            "space": self.space.to_json(),
            "weights": list(map(float, self.weights)),
        }

    @staticmethod
    def from_json(data: dict) -> "StateSpec":
        space = BaseSpace.from_json(data["space"])
        if data["kind"] == "pure":
            return StateSpec.pure(space, data["p"])
        return StateSpec.measure(space, data["weights"])


def evaluate_state(omega: StateSpec, a: AlgebraElement) -> complex:
    """Apply the state: point evaluation for pure states, weighted node sum
    for measure states."""
    if omega.space != a.space:
        raise ValueError("space mismatch between state and algebra element")
    if np.any(~np.isfinite(a.values)):
        raise ValueError("NaN/inf in algebra element values")
    if omega.kind == "pure":
        return complex(a.values[omega.p])
    return complex(np.sum(omega.weights * a.values))


def is_positive(a: AlgebraElement, tol: float = DEFAULT_TOL) -> bool:
    """Nodewise membership test for the positive cone of C(X)."""
    return bool(
        np.max(np.abs(a.values.imag)) <= tol and np.min(a.values.real) >= -tol
    )


@dataclass(frozen=True)
class PartitionOfUnity:
    """Finitely many elements rho_j with sum rho_j* rho_j = 1."""

    parts: tuple

    def __post_init__(self):
        if len(self.parts) == 0:
            raise ValueError("empty partition of unity")
        sp = self.parts[0].space
        for r in self.parts:
            if r.space != sp:
                raise ValueError("partition members live on different spaces")

    @property
    def space(self) -> BaseSpace:
        return self.parts[0].space


def verify_partition_of_unity(parts: Sequence[AlgebraElement], tol: float = DEFAULT_TOL) -> bool:
    """True iff sum |rho_j|^2 deviates from 1 by at most ``tol`` at every node."""
    if len(parts) == 0:
        raise ValueError("empty list")
    sp = parts[0].space
    total = np.zeros(sp.node_count)
    for r in parts:
        if r.space != sp:
            raise ValueError("space mismatch in partition members")
        total = total + np.abs(r.values) ** 2
    return bool(np.max(np.abs(total - 1.0)) <= tol)


def a_convex_combine(parts: PartitionOfUnity, xs: Sequence[AlgebraElement]) -> AlgebraElement:
    """The combination sum rho_j* x_j rho_j, computed nodewise.

    Over commutative C(X) this is sum |rho_j|^2 x_j; positivity of the x_j
    is preserved.
    """
    if len(parts.parts) != len(xs):
        raise ValueError("length mismatch between partition and elements")
    sp = parts.space
    acc = np.zeros(sp.node_count, dtype=complex)
    for r, x in zip(parts.parts, xs):
        if x.space != sp:
            raise ValueError("space mismatch")
        acc = acc + np.abs(r.values) ** 2 * x.values
    return AlgebraElement(sp, acc)
