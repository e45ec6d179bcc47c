"""Fiber Hilbert spaces and operators with recorded domains.

The key model is the discretized interval fiber L^2[0,1] carrying a
first-derivative matrix with an exact discrete integration-by-parts identity:
the quadrature matrix H and derivative M satisfy H M + M^T H = diag(-1,0,..,0,1).
That identity makes the boundary form of the model operator A = -i M exact,

    <Au, v> - <u, Av> = i (conj(u_last) v_last - conj(u_0) v_0),

so adjoints of boundary-condition restrictions are computed structurally
instead of through (meaningless) matrix adjoints of non-dense domains.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from ._linalg import (
    DENSE_LIMIT,
    SmallSingularData,
    hermitize,
    nullspace,
    signed_spectrum_from_square,
)

SCHEMES = ("sbp42", "sbp21")

_SBP42_TOP = np.array([
    [-24 / 17, 59 / 34, -4 / 17, -3 / 34, 0, 0],
    [-1 / 2, 0, 1 / 2, 0, 0, 0],
    [4 / 43, -59 / 86, 0, 59 / 86, -4 / 43, 0],
    [3 / 98, 0, -59 / 98, 0, 32 / 49, -4 / 49],
])


def _derivative_matrix(n: int, h: float, scheme: str):
    """Derivative matrix M and quadrature weights w for the named scheme."""
    if scheme == "sbp21":
        w = np.ones(n)
        w[0] = w[-1] = 0.5
        M = sp.diags([-0.5 * np.ones(n - 1), 0.5 * np.ones(n - 1)], [-1, 1]).tolil()
        M[0, 0], M[0, 1] = -1.0, 1.0
        M[-1, -2], M[-1, -1] = -1.0, 1.0
    elif scheme == "sbp42":
        if n < 16:
            raise ValueError("sbp42 needs n >= 16")
        w = np.ones(n)
        w[:4] = [17 / 48, 59 / 48, 43 / 48, 49 / 48]
        w[-4:] = [49 / 48, 43 / 48, 59 / 48, 17 / 48]
        M = sp.lil_matrix((n, n))
        stencil = np.array([1 / 12, -2 / 3, 0, 2 / 3, -1 / 12])
        for off, cval in zip(range(-2, 3), stencil):
            if cval != 0:
                M.setdiag(cval, off)
        M[:4, :6] = _SBP42_TOP
        M[-4:, -6:] = -_SBP42_TOP[::-1, ::-1]
        M[:4, 6:] = 0.0
        M[-4:, :-6] = 0.0
    else:
        raise ValueError(f"unsupported scheme {scheme!r}")
    return (M.tocsr() / h), w * h


class FiberSpace:
    """A weighted finite-dimensional fiber: abstract C^d or an interval grid."""

    def __init__(self, dim: int, weights=None, nodes=None, scheme=None):
        self.dim = int(dim)
        self.weights = np.ones(dim) if weights is None else np.asarray(weights, float)
        if self.weights.shape != (self.dim,) or np.any(self.weights <= 0):
            raise ValueError("weights must be positive of length dim")
        self.sqrt_w = np.sqrt(self.weights)
        self.nodes = None if nodes is None else np.asarray(nodes, float)
        self.scheme = scheme

    @property
    def is_interval(self) -> bool:
        return self.nodes is not None

    def inner(self, u, v) -> complex:
        return complex(np.sum(self.weights * np.conj(u) * v))

    def norm(self, u) -> float:
        return float(np.sqrt(np.sum(self.weights * np.abs(u) ** 2)))

    def to_tilde(self, u):
        return u * self.sqrt_w

    def from_tilde(self, ut):
        return ut / self.sqrt_w

    def row_to_tilde(self, row):
        """Functional row c (acting as c @ u) rewritten to act on tilde coords."""
        return row / self.sqrt_w

    def smoother(self, kappa: float = 0.05):
        """Second-difference regularizer (I + kappa^2 L)^{-1} used to draw
        smooth probe vectors; identity on abstract fibers."""
        if not self.is_interval:
            return lambda y: y
        n = self.dim
        h = self.nodes[1] - self.nodes[0]
        main = np.full(n, 2.0)
        off = np.full(n - 1, -1.0)
        L = sp.diags([off, main, off], [-1, 0, 1]).tocsc() / h**2
        lu = sp.linalg.splu((sp.identity(n, format="csc")
                             + (kappa**2) * L).astype(complex))
        return lambda y: lu.solve(np.asarray(y, dtype=complex))


class FiberOperator:
    """Operator on a fiber with an explicitly recorded domain and adjoint.

    ``matrix`` acts on the whole model space; the domain is ker(constraints)
    (full space when constraints is None).  ``adjoint_matrix`` and
    ``adjoint_constraints`` encode the structural adjoint; by default (dense
    domain) the adjoint is the weighted matrix adjoint on the full space.
    """

    is_closed = True

    def __init__(self, space: FiberSpace, matrix, constraints=None,
                 adjoint_matrix=None, adjoint_constraints=None, meta=None):
        self.space = space
        self.matrix = matrix
        self.constraints = None if constraints is None else np.atleast_2d(np.asarray(constraints, complex))
        self._adjoint_matrix = adjoint_matrix
        self._adjoint_constraints = adjoint_constraints
        self._has_adjoint_rule = adjoint_matrix is not None or constraints is None
        self.meta = dict(meta or {})
        self._tilde_cache = None
        self._small_cache = {}
        self._eig_cache = None
        self._proj_cache = None

    # -- basic structure ---------------------------------------------------
    @property
    def dim(self) -> int:
        return self.space.dim

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if sp.issparse(self.matrix) else np.asarray(self.matrix)

    def tilde_matrix(self):
        if self._tilde_cache is None:
            sw = self.space.sqrt_w
            if sp.issparse(self.matrix):
                D = sp.diags(sw)
                Di = sp.diags(1.0 / sw)
                self._tilde_cache = (D @ self.matrix @ Di).tocsr()
            else:
                self._tilde_cache = (sw[:, None] * self.matrix) / sw[None, :]
        return self._tilde_cache

    def tilde_constraints(self):
        if self.constraints is None:
            return None
        return self.constraints / self.space.sqrt_w[None, :]

    def weighted_adjoint_matrix(self):
        """H-adjoint of the action matrix (ignores domain constraints)."""
        w = self.space.weights
        Ad = self.dense()
        return (Ad.conj().T * w[None, :]) / w[:, None]

    def adjoint(self) -> "FiberOperator":
        """The structural adjoint operator."""
        if self.constraints is None and self._adjoint_matrix is None:
            return FiberOperator(self.space, self.weighted_adjoint_matrix(), None,
                                 meta={"role": "adjoint", **self.meta})
        if not self._has_adjoint_rule:
            raise ValueError(
                "no adjoint rule recorded for this constrained operator; "
                "matrix adjoints of non-dense discrete domains are ill-defined"
            )
        return FiberOperator(self.space, self._adjoint_matrix,
                             self._adjoint_constraints,
                             adjoint_matrix=self.matrix,
                             adjoint_constraints=self.constraints,
                             meta={"role": "adjoint", **self.meta})

    # -- domain handling ----------------------------------------------------
    def domain_dim(self) -> int:
        return self.dim - (0 if self.constraints is None else self.constraints.shape[0])

    def domain_basis(self) -> np.ndarray:
        """Orthonormal (tilde-coordinate) basis of the domain."""
        Ct = self.tilde_constraints()
        if Ct is None:
            return np.eye(self.dim, dtype=complex)
        return nullspace(Ct)

    def in_domain(self, u, tol: float = 1e-6) -> bool:
        if self.constraints is None:
            return True
        resid = np.max(np.abs(self.constraints @ u))
        scale = max(self.space.norm(u), 1e-30)
        return bool(resid <= tol * scale * max(np.max(np.abs(self.constraints)), 1.0))

    def _projector_data(self):
        if getattr(self, "_proj_cache", None) is None:
            At = self.tilde_matrix()
            Ct = self.tilde_constraints()
            if sp.issparse(At):
                G = (sp.identity(self.dim, dtype=complex, format="csc")
                     + (At.getH() @ At).tocsc())
                Psi = sp.linalg.splu(G).solve(np.ascontiguousarray(Ct.conj().T))
            else:
                G = np.eye(self.dim) + At.conj().T @ At
                Psi = np.linalg.solve(G, Ct.conj().T)   # (n, k) smooth representers
            self._proj_cache = (Psi, Ct)
        return self._proj_cache

    def project_to_domain(self, u):
        """Land u in the domain by subtracting smooth representer corrections.

        Uses graph-metric representers of the constraint rows so the
        correction does not inject grid-frequency content.
        """
        if self.constraints is None:
            return u
        Psi, Ct = self._projector_data()
        ut = self.space.to_tilde(u)
        coeff = np.linalg.solve(np.atleast_2d(Ct @ Psi), np.atleast_1d(Ct @ ut))
        ut = ut - Psi @ coeff
        return self.space.from_tilde(ut)

    def domain_sample(self, rng, smooth: bool = True):
        """Random vector in the recorded domain."""
        y = rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim)
        if smooth and self.space.is_interval:
            y = self.space.smoother()(y)
        return self.project_to_domain(y)

    # -- action -------------------------------------------------------------
    def apply(self, u, check_domain: bool = True):
        if check_domain and not self.in_domain(u):
            raise ValueError("vector outside recorded operator domain")
        return self.matrix @ u

    def graph_inner(self, u, v) -> complex:
        return self.space.inner(u, v) + self.space.inner(self.matrix @ u, self.matrix @ v)

    def graph_norm(self, u) -> float:
        return float(np.sqrt(max(self.graph_inner(u, u).real, 0.0)))

    def symmetry_defect(self, rng, samples: int = 8) -> float:
        """max |<Au,v> - <u,Av>| over random normalized domain samples."""
        worst = 0.0
        for _ in range(samples):
            u = self.domain_sample(rng)
            v = self.domain_sample(rng)
            nu, nv = self.space.norm(u), self.space.norm(v)
            if nu == 0 or nv == 0:
                continue
            u, v = u / nu, v / nv
            lhs = self.space.inner(self.matrix @ u, v)
            rhs = self.space.inner(u, self.matrix @ v)
            worst = max(worst, abs(lhs - rhs))
        return worst

    def is_symmetric(self, rng=None, tol: float = 1e-8) -> bool:
        rng = rng or np.random.default_rng(0)
        scale = max(self._matrix_scale(), 1.0)
        return self.symmetry_defect(rng) <= tol * scale

    def _matrix_scale(self) -> float:
        A = self.matrix
        if sp.issparse(A):
            return float(abs(A).sum(axis=1).max())
        return float(np.max(np.sum(np.abs(A), axis=1)))

    # -- kernels and defect indices ------------------------------------------
    def _small_data(self, shift: complex) -> SmallSingularData:
        key = complex(shift)
        if key not in self._small_cache:
            At = self.tilde_matrix()
            if sp.issparse(At):
                K = At - shift * sp.identity(self.dim, format="csr", dtype=complex)
            else:
                K = At - shift * np.eye(self.dim)
            self._small_cache[key] = SmallSingularData(K, count=6)
        return self._small_cache[key]

    def kernel_dim(self, shift: complex, tau: float | None = None):
        """Numerical dim of ker((T - shift)|domain) and the smallest singular
        value; threshold sigma <= tau * sigma_max with tau = 1e-8 * dim by
        default."""
        tau = (1e-8 * self.dim) if tau is None else tau
        data = self._small_data(shift)
        tau_abs = tau * max(data.sigma_max, 1.0)
        cnt, smin = data.kernel_count(self.tilde_constraints(), tau_abs)
        return cnt, smin, tau_abs

    def kernel_vectors(self, shift: complex, tau: float | None = None) -> np.ndarray:
        tau = (1e-8 * self.dim) if tau is None else tau
        data = self._small_data(shift)
        tau_abs = tau * max(data.sigma_max, 1.0)
        vt = data.kernel_vectors(self.tilde_constraints(), tau_abs)
        return vt / self.space.sqrt_w[:, None]

    def defect_indices(self, tau: float | None = None, with_margins: bool = False):
        """Deficiency indices (dim ker(T* -+ i)) of a symmetric operator."""
        adj = self.adjoint()
        n_plus, s_plus, thr = adj.kernel_dim(1j, tau)
        n_minus, s_minus, _ = adj.kernel_dim(-1j, tau)
        if with_margins:
            return (n_plus, n_minus), {
                "sigma_min_plus": s_plus,
                "sigma_min_minus": s_minus,
                "threshold": thr,
            }
        return n_plus, n_minus

    # -- reduced Hermitian model and spectral calculus -------------------------
    def reduced(self):
        """(Q, M) with Q an orthonormal tilde-coordinate domain basis and
        M = Q^H A~ Q the compressed action."""
        if self._eig_cache is not None:
            Q, M, _, _ = self._eig_cache
            return Q, M
        Q = self.domain_basis()
        At = self.tilde_matrix()
        Atd = At.toarray() if sp.issparse(At) else At
        M = Q.conj().T @ Atd @ Q
        self._eig_cache = (Q, M, None, None)
        return Q, M

    def hermiticity_defect(self) -> float:
        _, M = self.reduced()
        return float(np.max(np.abs(M - M.conj().T)))

    def eigensystem(self):
        """Eigen-decomposition of the reduced (Hermitian) model."""
        Q, M = self.reduced()
        _, _, ev, U = self._eig_cache
        if ev is None:
            ev, U = np.linalg.eigh(hermitize(M))
            self._eig_cache = (Q, M, ev, U)
        return Q, ev, U

    def spectrum(self) -> np.ndarray:
        _, ev, _ = self.eigensystem()
        return ev

    def calculus_matrix(self, func) -> np.ndarray:
        """func applied spectrally; returns the full-space (nodal) matrix.

        The result acts as zero on the (tiny) orthogonal complement of the
        discrete domain, mirroring the dense-domain continuum operator.
        """
        Q, ev, U = self.eigensystem()
        core = (U * func(ev)[None, :]) @ U.conj().T
        Ft = Q @ core @ Q.conj().T
        sw = self.space.sqrt_w
        return Ft / sw[:, None] * sw[None, :]

    def resolvent_matrix(self, mu: float) -> np.ndarray:
        """(T - i mu)^{-1} on the model, mu real nonzero."""
        if mu == 0:
            raise ValueError("mu must be nonzero")
        return self.calculus_matrix(lambda lam: 1.0 / (lam - 1j * mu))

    def hat(self) -> "FiberOperator":
        """Block operator [[0, T*],[T, 0]] on the doubled fiber."""
        return hat_pair(self, self.adjoint())


def _stack_rows(left, right, n):
    rows = []
    if left is not None:
        for c in left:
            rows.append(np.concatenate([c, np.zeros(n)]))
    if right is not None:
        for c in right:
            rows.append(np.concatenate([np.zeros(n), c]))
    return np.stack(rows) if rows else None


def hat_pair(S1: FiberOperator, S2: FiberOperator) -> FiberOperator:
    """Block operator B(x,y) = (S2 y, S1 x) on dom(S1) + dom(S2).

    For S2 = S1* this is the symmetric reduction of S1.  The structural
    adjoint is B*(u,v) = (S1* v, S2* u) with domain dom(S2*) + dom(S1*);
    keeping the pair explicit matters for localized operators whose partner
    is not the adjoint of the localization.
    """
    if S1.space.dim != S2.space.dim:
        raise ValueError("hat blocks need a common fiber dimension")
    n = S1.dim
    space2 = FiberSpace(2 * n, np.concatenate([S1.space.weights] * 2))
    block = np.zeros((2 * n, 2 * n), dtype=complex)
    block[:n, n:] = S2.dense()
    block[n:, :n] = S1.dense()
    cons = _stack_rows(S1.constraints, S2.constraints, n)
    a1, a2 = S1.adjoint(), S2.adjoint()
    adj_block = np.zeros((2 * n, 2 * n), dtype=complex)
    adj_block[:n, n:] = a1.dense()
    adj_block[n:, :n] = a2.dense()
    adj_cons = _stack_rows(a2.constraints, a1.constraints, n)
    return FiberOperator(space2, block, cons,
                         adjoint_matrix=adj_block, adjoint_constraints=adj_cons,
                         meta={"role": "hat", "inner": (S1.meta, S2.meta)})


# ---------------------------------------------------------------------------
# The interval model: discretized D = -i d/dx on [0,1]
# ---------------------------------------------------------------------------

class IntervalFiberModel:
    """Shared discretization of -i d/dx on [0,1] with its operator family.

    Boundary conditions encode the family: ``maximal()`` has no constraint,
    ``minimal()`` pins both endpoint values, and ``relation(zeta)`` imposes
    u(1) = zeta u(0).  Adjoints: maximal <-> minimal, relation(zeta) is
    selfadjoint for unimodular zeta; these rules are exact for the discrete
    boundary form.
    """

    def __init__(self, n: int, scheme: str = "sbp42"):
        if n < 16:
            raise ValueError("interval model needs n >= 16 nodes")
        if scheme not in SCHEMES:
            raise ValueError(f"unsupported scheme {scheme!r}")
        self.n = int(n)
        self.scheme = scheme
        h = 1.0 / (n - 1)
        M, w = _derivative_matrix(n, h, scheme)
        self.h = h
        self.space = FiberSpace(n, w, nodes=np.linspace(0.0, 1.0, n), scheme=scheme)
        self.A = (-1j) * M               # sparse maximal action
        self._ops = {}
        self._deficiency = None

    # boundary-value functional rows (nodal coordinates)
    def _row_value(self, node: int) -> np.ndarray:
        r = np.zeros(self.n, dtype=complex)
        r[node] = 1.0
        return r

    def maximal(self) -> FiberOperator:
        if "max" not in self._ops:
            minimal_rows = np.stack([self._row_value(0), self._row_value(-1 % self.n)])
            self._ops["max"] = FiberOperator(
                self.space, self.A, None,
                adjoint_matrix=self.A, adjoint_constraints=minimal_rows,
                meta={"family": "interval", "bc": "max", "scheme": self.scheme, "n": self.n})
        return self._ops["max"]

    def minimal(self) -> FiberOperator:
        if "min" not in self._ops:
            rows = np.stack([self._row_value(0), self._row_value(self.n - 1)])
            self._ops["min"] = FiberOperator(
                self.space, self.A, rows,
                adjoint_matrix=self.A, adjoint_constraints=None,
                meta={"family": "interval", "bc": "min", "scheme": self.scheme, "n": self.n})
        return self._ops["min"]

    def relation(self, zeta: complex) -> FiberOperator:
        """D_max restricted to the boundary relation u(1) = zeta u(0)."""
        zeta = complex(zeta)
        if abs(abs(zeta) - 1.0) > 1e-9:
            raise ValueError("boundary relation parameter must be unimodular")
        zeta /= abs(zeta)
        row = self._row_value(self.n - 1) - zeta * self._row_value(0)
        return FiberOperator(
            self.space, self.A, row[None, :],
            adjoint_matrix=self.A, adjoint_constraints=row[None, :].copy(),
            meta={"family": "interval", "bc": "relation", "zeta": zeta,
                  "scheme": self.scheme, "n": self.n})

    # ---- deficiency machinery --------------------------------------------
    def deficiency(self):
        """Graph-normalized deficiency vectors of the maximal operator.

        Returns (phi_plus, phi_minus) with A phi_+ ~= i phi_+ and
        A phi_- ~= -i phi_-; phi_- is the reflection of phi_+ so that the
        pair shares the grid's t -> 1-t symmetry exactly.
        """
        if self._deficiency is None:
            op = self.maximal()
            cnt, smin, thr = op.kernel_dim(1j)
            if cnt != 1:
                raise RuntimeError(
                    f"deficiency kernel of (T - i) is {cnt}-dimensional at threshold "
                    f"{thr:.3e} (sigma_min {smin:.3e}); refine the grid or tolerance")
            cnt_m, _, _ = op.kernel_dim(-1j)
            if cnt_m != 1:
                raise RuntimeError("deficiency kernel of (T + i) is not 1-dimensional")
            v = op.kernel_vectors(1j)[:, 0]
            k0 = int(np.argmax(np.abs(v)))
            v = v * (np.abs(v[k0]) / v[k0])              # real positive phase
            A = self.A
            gn = np.sqrt(self.space.norm(v) ** 2 + self.space.norm(A @ v) ** 2)
            phi_plus = v / gn
            phi_minus = phi_plus[::-1].copy()
            self._deficiency = (phi_plus, phi_minus)
        return self._deficiency

    def alpha_rows(self):
        """Functional rows of the graph pairings alpha_+- = <phi_+-, .>_graph."""
        phi_p, phi_m = self.deficiency()
        w = self.space.weights
        A = self.A
        Ad = A.toarray() if sp.issparse(A) else A
        row_p = phi_p.conj() * w + ((Ad @ phi_p).conj() * w) @ Ad
        row_m = phi_m.conj() * w + ((Ad @ phi_m).conj() * w) @ Ad
        return row_p, row_m

    def boundary_map(self, lam: complex) -> complex:
        """Unimodular boundary-relation parameter induced by the deficiency
        constraint alpha_+ = lam alpha_-."""
        lam = complex(lam)
        if abs(abs(lam) - 1.0) > 1e-12:
            raise ValueError("extension parameter must be unimodular")
        phi_p, phi_m = self.deficiency()
        y = lam * phi_p + phi_m
        zeta = np.conj(y[0]) / np.conj(y[-1])
        return zeta / abs(zeta)

    def extension(self, lam: complex) -> FiberOperator:
        """Selfadjoint extension for unimodular lam via the induced relation."""
        zeta = self.boundary_map(lam)
        op = self.relation(zeta)
        op.meta.update({"bc": "extension", "lam": complex(lam), "zeta": zeta})
        return op

    def eta_vectors(self, lam: complex):
        """(eta, eta_perp): graph-orthonormal pair spanning the extension
        direction and its graph-complement inside dom(max)/dom(min)."""
        phi_p, phi_m = self.deficiency()
        lam = complex(lam)
        eta = (lam * phi_p + phi_m) / np.sqrt(2)
        eta_perp = (phi_p - np.conj(lam) * phi_m) / np.sqrt(2)
        return eta, eta_perp

    def spectrum_oracle(self, zeta: complex, count: int = 11, n: int | None = None) -> np.ndarray:
        """Independent eigensolve oracle for the relation operator.

        Uses a grid one step finer than the model by default, discretizing the
        squared operator with the plain second-difference stencil under the
        twisted-periodic identification u(t+1) = zeta u(t), then recovering
        signs from the compression of a first-difference matrix.  Clean of
        the collocated-grid parasite branches of first-order stencils.
        """
        zeta = complex(zeta)
        zeta /= abs(zeta)
        nn = self.n if n is None else int(n)
        m = nn - 1
        h = 1.0 / m
        idx = np.arange(m)
        L = np.zeros((m, m), dtype=complex)
        L[idx, idx] = 2.0
        L[idx[1:], idx[1:] - 1] = -1.0
        L[idx[:-1], idx[:-1] + 1] = -1.0
        L[0, m - 1] += -np.conj(zeta)
        L[m - 1, 0] += -zeta
        L /= h * h
        D = np.zeros((m, m), dtype=complex)
        D[idx[1:], idx[1:] - 1] = -1.0
        D[idx[:-1], idx[:-1] + 1] = 1.0
        D[0, m - 1] += -np.conj(zeta)
        D[m - 1, 0] += zeta
        D = -1j * D / (2 * h)
        return signed_spectrum_from_square(L, D, count)
