"""Piecewise boundary-condition functions on an interval and their
continuity classification.

A boundary function Lambda maps X = [a,b] to the unit circle.  It is
described by declaration, not by sampling: open regions between breakpoints
are either continuous (with a closed-form sampler) or singular everywhere,
and each breakpoint carries its value and declared limit behaviour.  The
classification splits X into

    reg            -- open set where Lambda is continuous in a neighborhood,
    ssupp interior -- interior of the closed singular support,
    reg_inf        -- boundary points with a two-sided continuous extension,
    ssupp_r        -- the remaining (non-removable) boundary points,

and records the extension values on reg_inf.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .space import BaseSpace

_UNIMOD_TOL = 1e-9


@dataclass(frozen=True)
class Region:
    """One open region: continuous with a sampler, or singular everywhere."""

    mode: str                 # "expr" | "singular"
    expr: Callable[[float], complex] | None = None

    def __post_init__(self):
        if self.mode not in ("expr", "singular"):
            raise ValueError(f"unknown region mode {self.mode!r}")
        if self.mode == "expr" and self.expr is None:
            raise ValueError("continuous region needs a sampler")


@dataclass(frozen=True)
class BreakpointData:
    """Declared data at a breakpoint: the value and the limit through reg.

    ``limit is None`` declares that the limit of Lambda through the
    continuous part does not exist at this point.
    """

    value: complex
    limit: complex | None

    def __post_init__(self):
        if abs(abs(self.value) - 1) > _UNIMOD_TOL:
            raise ValueError("breakpoint value must be unimodular")
        if self.limit is not None and abs(abs(self.limit) - 1) > _UNIMOD_TOL:
            raise ValueError("declared limit must be unimodular")


class LambdaSpec:
    """Declared piecewise description of a unimodular boundary function."""

    def __init__(self, space: BaseSpace, breakpoints: Sequence[float],
                 regions: Sequence[Region], breakpoint_data: Sequence[BreakpointData]):
        if space.kind != "grid":
            raise ValueError("boundary functions are declared over interval spaces")
        self.space = space
        bps = tuple(float(b) for b in breakpoints)
        if any(bps[i] >= bps[i + 1] for i in range(len(bps) - 1)):
            raise ValueError("breakpoints must be strictly increasing")
        if bps and (bps[0] < space.a - 1e-12 or bps[-1] > space.b + 1e-12):
            raise ValueError("breakpoints must lie in [a, b]")
        self.breakpoints = bps
        divisions = [space.a] + [b for b in bps if space.a < b < space.b] + [space.b]
        # breakpoints at the domain ends do not create extra segments
        self.divisions = divisions
        expected = len(divisions) - 1
        if len(regions) != expected:
            raise ValueError(f"need {expected} regions for these breakpoints, got {len(regions)}")
        self.regions = tuple(regions)
        if len(breakpoint_data) != len(bps):
            raise ValueError("breakpoint_data must match breakpoints")
        self.breakpoint_data = tuple(breakpoint_data)

    # -- lookup helpers ------------------------------------------------------
    def _breakpoint_index(self, p: float, tol: float = 1e-9) -> int | None:
        for i, b in enumerate(self.breakpoints):
            if abs(p - b) <= tol:
                return i
        return None

    def _segment_index(self, p: float) -> int:
        ds = self.divisions
        for i in range(len(ds) - 1):
            if ds[i] <= p <= ds[i + 1]:
                return i
        raise ValueError(f"{p} outside [{self.space.a}, {self.space.b}]")

    def _segments_at_breakpoint(self, i: int) -> list[int]:
        b = self.breakpoints[i]
        out = []
        for j in range(len(self.divisions) - 1):
            if abs(self.divisions[j + 1] - b) <= 1e-12 or abs(self.divisions[j] - b) <= 1e-12:
                out.append(j)
        return out

    def value_at(self, p: float) -> complex:
        """Lambda(p); declared at breakpoints, sampled inside regions."""
        bi = self._breakpoint_index(p)
        if bi is not None:
            return complex(self.breakpoint_data[bi].value)
        seg = self.regions[self._segment_index(p)]
        if seg.mode == "singular":
            # values on singular regions never parametrize a fiber; any
            # unimodular placeholder is consistent with the declaration
            return 1.0
        v = complex(seg.expr(p))
        if abs(abs(v) - 1) > 1e-6:
            raise ValueError(f"region sampler returned non-unimodular value at {p}")
        return v / abs(v)

    def values_on_grid(self) -> np.ndarray:
        return np.array([self.value_at(x) for x in self.space.nodes])

    def validate_declarations(self, delta: float = 1e-4, tol: float = 1e-2) -> list[str]:
        """Cross-check declared limits against region samples near breakpoints."""
        issues = []
        for i, b in enumerate(self.breakpoints):
            data = self.breakpoint_data[i]
            if data.limit is None:
                continue
            for j in self._segments_at_breakpoint(i):
                reg = self.regions[j]
                if reg.mode != "expr":
                    continue
                lo, hi = self.divisions[j], self.divisions[j + 1]
                q = b + delta if abs(lo - b) <= 1e-12 else b - delta
                if not (lo < q < hi):
                    continue
                if abs(complex(reg.expr(q)) - data.limit) > tol:
                    issues.append(
                        f"declared limit {data.limit} at {b} is far from sample at {q}")
        return issues


@dataclass(frozen=True)
class LambdaClassification:
    """Continuity classification of a declared boundary function."""

    spec: LambdaSpec
    reg_intervals: tuple            # maximal intervals of reg, (lo, hi, closed_lo, closed_hi)
    ssupp_intervals: tuple          # closed intervals of positive-length singular runs
    ssupp_points: tuple             # isolated points of ssupp
    ssupp_interior_intervals: tuple
    reg_inf: tuple                  # (point, lambda_tilde value)
    ssupp_r: tuple                  # points

    # -- set queries ---------------------------------------------------------
    def point_kind(self, p: float, tol: float = 1e-9) -> str:
        """One of "reg", "reg_inf", "ssupp_r", "ssupp_interior"."""
        for q, _ in self.reg_inf:
            if abs(p - q) <= tol:
                return "reg_inf"
        for q in self.ssupp_r:
            if abs(p - q) <= tol:
                return "ssupp_r"
        for (lo, hi) in self.ssupp_interior_intervals:
            if lo - tol <= p <= hi + tol:
                # boundary points were caught above
                if not any(abs(p - q) <= tol for q, _ in self.reg_inf):
                    return "ssupp_interior"
        return "reg"

    def in_ssupp(self, p: float, tol: float = 1e-9) -> bool:
        return self.point_kind(p, tol) != "reg"

    def lambda_tilde_at(self, p: float, tol: float = 1e-9) -> complex:
        """Continuous-extension value on reg union reg_inf."""
        for q, v in self.reg_inf:
            if abs(p - q) <= tol:
                return v
        if self.point_kind(p, tol) == "reg":
            return self.spec.value_at(p)
        raise ValueError(f"no continuous extension at {p}")

    # -- summary -------------------------------------------------------------
    @property
    def ssupp_empty(self) -> bool:
        return not (self.ssupp_intervals or self.ssupp_points)

    @property
    def ssupp_equals_interior(self) -> bool:
        return not self.reg_inf and not self.ssupp_r

    @property
    def ssupp_equals_removable(self) -> bool:
        return (not self.ssupp_intervals and not self.ssupp_r
                and not self.ssupp_interior_intervals)

    @property
    def ssupp_equals_nonremovable(self) -> bool:
        return (not self.ssupp_intervals and not self.reg_inf
                and not self.ssupp_interior_intervals)

    def to_json(self) -> dict:
        return {
            "reg": [list(iv[:2]) for iv in self.reg_intervals],
            "ssupp_intervals": [list(iv) for iv in self.ssupp_intervals],
            "ssupp_points": list(self.ssupp_points),
            "ssupp_interior": [list(iv) for iv in self.ssupp_interior_intervals],
            "reg_inf": [[p, [v.real, v.imag]] for p, v in self.reg_inf],
            "ssupp_r": list(self.ssupp_r),
        }


def classify_lambda(spec: LambdaSpec, tol: float = 1e-9) -> LambdaClassification:
    """Compute reg / ssupp / removable-boundary data from the declaration.

    A breakpoint joins reg exactly when no adjacent region is singular, the
    limit through reg exists, and it matches the declared value.  It is
    removable (reg_inf) when the limit exists but continuity fails there.
    """
    ds = spec.divisions
    nseg = len(ds) - 1
    singular = [spec.regions[j].mode == "singular" for j in range(nseg)]

    reg_inf = []
    ssupp_r = []
    interior_points = []
    glued = set()
    for i, b in enumerate(spec.breakpoints):
        data = spec.breakpoint_data[i]
        segs = spec._segments_at_breakpoint(i)
        adj_singular = [j for j in segs if singular[j]]
        if adj_singular:
            if len(adj_singular) == len(segs):
                interior_points.append(b)        # interior of the singular run
            elif data.limit is not None:
                reg_inf.append((b, complex(data.limit) / abs(complex(data.limit))))
            else:
                ssupp_r.append(b)
        else:
            if data.limit is not None and abs(data.limit - data.value) <= 1e-9:
                glued.add(i)                     # continuous across: joins reg
            elif data.limit is not None:
                reg_inf.append((b, complex(data.limit) / abs(complex(data.limit))))
            else:
                ssupp_r.append(b)

    # maximal reg intervals: merge continuous segments across glued breakpoints
    reg_intervals = []
    j = 0
    while j < nseg:
        if singular[j]:
            j += 1
            continue
        lo = ds[j]
        hi = ds[j + 1]
        k = j
        while k + 1 < nseg and not singular[k + 1]:
            bi = spec._breakpoint_index(ds[k + 1])
            if bi is not None and bi in glued:
                k += 1
                hi = ds[k + 1]
            else:
                break
        # closedness at the domain ends (open in X includes the endpoint)
        lo_closed = abs(lo - spec.space.a) <= tol and spec._breakpoint_index(lo) is None
        hi_closed = abs(hi - spec.space.b) <= tol and spec._breakpoint_index(hi) is None
        # a glued breakpoint at a domain end belongs to reg as well
        bi_lo = spec._breakpoint_index(lo)
        if bi_lo is not None and bi_lo in glued:
            lo_closed = True
        bi_hi = spec._breakpoint_index(hi)
        if bi_hi is not None and bi_hi in glued:
            hi_closed = True
        reg_intervals.append((lo, hi, lo_closed, hi_closed))
        j = k + 1

    # singular runs (closed intervals)
    ssupp_intervals = []
    j = 0
    while j < nseg:
        if not singular[j]:
            j += 1
            continue
        lo = ds[j]
        k = j
        while k + 1 < nseg and singular[k + 1]:
            k += 1
        ssupp_intervals.append((lo, ds[k + 1]))
        j = k + 1

    ssupp_points = tuple(sorted(
        [b for b, _ in reg_inf] + list(ssupp_r)
    ))
    # interior of ssupp: open versions of the runs, closed at domain ends
    interior = []
    for (lo, hi) in ssupp_intervals:
        interior.append((lo, hi))
    classification = LambdaClassification(
        spec=spec,
        reg_intervals=tuple(reg_intervals),
        ssupp_intervals=tuple(ssupp_intervals),
        ssupp_points=tuple(p for p in ssupp_points
                           if not any(lo <= p <= hi for lo, hi in ssupp_intervals)),
        ssupp_interior_intervals=tuple(interior),
        reg_inf=tuple(reg_inf),
        ssupp_r=tuple(sorted(ssupp_r)),
    )
    return classification


# -- convenient constructors used across tests and scenarios -----------------

def continuous_lambda(space: BaseSpace, expr: Callable[[float], complex]) -> LambdaSpec:
    """Continuous boundary function given by a closed form on all of X."""
    return LambdaSpec(space, (), (Region("expr", expr),), ())


def jump_at_left_end(space: BaseSpace, expr, value_at_end: complex = 1.0,
                     limit: complex | None = None) -> LambdaSpec:
    """Lambda continuous on (a, b] with a declared jump or no-limit point at a."""
    return LambdaSpec(space, (space.a,), (Region("expr", expr),),
                      (BreakpointData(value=value_at_end, limit=limit),))


def oscillatory_left_end(space: BaseSpace) -> LambdaSpec:
    """The model discontinuity exp(i/x) on (a, b] with no limit at a
    (coordinates shifted so the singular point sits at the left end)."""
    a = space.a
    return jump_at_left_end(space, lambda x: np.exp(1j / (x - a)), 1.0, None)


def removable_jump_left_end(space: BaseSpace, expr, limit: complex,
                            value_at_end: complex) -> LambdaSpec:
    if abs(limit - value_at_end) <= 1e-9:
        raise ValueError("declared value equals the limit; no jump to remove")
    return jump_at_left_end(space, expr, value_at_end, limit)


def singular_patch(space: BaseSpace, lo: float, hi: float,
                   expr: Callable[[float], complex],
                   limit_lo: complex | None = None,
                   limit_hi: complex | None = None) -> LambdaSpec:
    """Continuous outside [lo, hi], singular everywhere on (lo, hi).

    Limits at the patch edges default to the one-sided limits of ``expr``.
    """
    if not (space.a < lo < hi < space.b):
        raise ValueError("singular patch must be strictly inside X")
    llo = complex(expr(lo)) if limit_lo is None else limit_lo
    lhi = complex(expr(hi)) if limit_hi is None else limit_hi
    return LambdaSpec(
        space, (lo, hi),
        (Region("expr", expr), Region("singular"), Region("expr", expr)),
        (BreakpointData(value=llo / abs(llo), limit=llo / abs(llo)),
         BreakpointData(value=lhi / abs(lhi), limit=lhi / abs(lhi))),
    )
