"""Internal linear-algebra helpers for weighted spaces and constrained kernels.

All routines work in "tilde" coordinates: a vector u in a weighted space
(weights w) is represented as sqrt(w)*u so that the Euclidean inner product
realizes the weighted one.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_LIMIT = 700   # above this, kernel searches use sparse shift-invert


def nullspace(C: np.ndarray, rcond: float = 1e-12) -> np.ndarray:
    """Orthonormal basis of ker(C) for a short-fat constraint matrix."""
    if C.size == 0:
        raise ValueError("empty constraint matrix")
    return scipy.linalg.null_space(C, rcond=rcond)


def hermitize(M: np.ndarray) -> np.ndarray:
    return (M + M.conj().T) / 2


def small_singular_dense(K: np.ndarray, count: int):
    """Smallest ``count`` singular pairs of a dense matrix.

    Returns (sigmas ascending, right vectors as columns, sigma_max).
    """
    U, s, Vh = np.linalg.svd(K)
    take = min(count, len(s))
    sig = s[::-1][:take]
    vecs = Vh.conj().T[:, ::-1][:, :take]
    return sig, vecs, float(s[0])


def small_singular_sparse(K, count: int):
    """Smallest singular pairs via shift-invert Lanczos on K^H K."""
    K = sp.csr_matrix(K)
    N = (K.getH() @ K).tocsc()
    k = min(count, N.shape[0] - 2)
    vals, vecs = spla.eigsh(N, k=k, sigma=0, which="LM")
    sig = np.sqrt(np.clip(vals, 0.0, None))
    order = np.argsort(sig)
    smax = spla.norm(K, np.inf)  # upper bound on sigma_max, adequate for thresholds
    return sig[order], vecs[:, order], float(smax)


class SmallSingularData:
    """Cached near-null data of a (possibly large) matrix K = A - shift*I.

    Supports counting the numerically small singular values of K restricted
    to ker(C) for many different constraint sets without re-factorizing: any
    unit vector of ker(C) on which K is small must lie close to the span of
    the cached smallest right singular vectors.
    """

    def __init__(self, K, count: int = 6):
        n = K.shape[0]
        if n <= DENSE_LIMIT:
            Kd = K.toarray() if sp.issparse(K) else np.asarray(K)
            self.sig, self.vecs, self.sigma_max = small_singular_dense(Kd, count)
            self._K = Kd
        else:
            self.sig, self.vecs, self.sigma_max = small_singular_sparse(K, count)
            self._K = sp.csr_matrix(K)

    def kernel_count(self, constraints: np.ndarray | None, tau_abs: float):
        """Number of singular values of K|ker(constraints) below ``tau_abs``,
        plus the smallest restricted singular value found."""
        if constraints is None or constraints.size == 0:
            cnt = int(np.sum(self.sig <= tau_abs))
            smin = float(self.sig[0]) if len(self.sig) else np.inf
            return cnt, smin
        C = np.atleast_2d(constraints)
        G = C @ self.vecs                       # (k, m) constraint action on candidates
        scale = max(np.linalg.norm(C, ord=np.inf), 1.0)
        _, s, Vh = np.linalg.svd(G)
        m = self.vecs.shape[1]
        keep = [i for i in range(len(s)) if s[i] <= 1e-10 * scale]
        basis = [Vh[i].conj() for i in keep] + [Vh[i].conj() for i in range(len(s), m)]
        if not basis:
            return 0, np.inf
        cand = self.vecs @ np.stack(basis, axis=1)
        B = self._K @ cand
        sv = np.linalg.svd(B, compute_uv=False)
        cnt = int(np.sum(sv <= tau_abs))
        return cnt, float(sv[-1])

    def kernel_vectors(self, constraints: np.ndarray | None, tau_abs: float) -> np.ndarray:
        """Columns spanning the numerical restricted kernel."""
        if constraints is None or constraints.size == 0:
            take = self.sig <= tau_abs
            return self.vecs[:, take]
        C = np.atleast_2d(constraints)
        G = C @ self.vecs
        scale = max(np.linalg.norm(C, ord=np.inf), 1.0)
        _, s, Vh = np.linalg.svd(G)
        m = self.vecs.shape[1]
        keep = [i for i in range(len(s)) if s[i] <= 1e-10 * scale]
        basis = [Vh[i].conj() for i in keep] + [Vh[i].conj() for i in range(len(s), m)]
        if not basis:
            return np.zeros((self.vecs.shape[0], 0), dtype=complex)
        cand = self.vecs @ np.stack(basis, axis=1)
        B = self._K @ cand
        U, sv, Vh2 = np.linalg.svd(B)
        take = sv <= tau_abs
        return cand @ Vh2.conj().T[:, take]


def signed_spectrum_from_square(L: np.ndarray, D: np.ndarray, count: int,
                                degeneracy_rtol: float = 1e-7) -> np.ndarray:
    """Signed eigenvalues of a first-order operator from its clean square.

    ``L`` is a Hermitian discretization of the squared operator and ``D`` of
    the operator itself.  Within each (near-)degenerate eigenspace of L the
    compression of D is diagonalized to split +/- branches.  Returns the
    ``count`` eigenvalues smallest in absolute value, sorted ascending.
    """
    evals, evecs = np.linalg.eigh(hermitize(L))
    scale = max(abs(evals[-1]), 1.0)
    lam = []
    j = 0
    n = len(evals)
    while j < n and len(lam) < 4 * count:
        jj = j + 1
        while jj < n and abs(evals[jj] - evals[j]) <= 1e-9 * scale + degeneracy_rtol * abs(evals[j]):
            jj += 1
        V = evecs[:, j:jj]
        comp = hermitize(V.conj().T @ D @ V)
        mus = np.linalg.eigvalsh(comp)
        r = np.sqrt(max(evals[j], 0.0))
        lam.extend(r if s >= 0 else -r for s in mus)
        j = jj
    lam = np.asarray(lam)
    order = np.argsort(np.abs(lam))[:count]
    return np.sort(lam[order])


def graph_orthonormal_residual(dom_basis: np.ndarray, reduced_matrix: np.ndarray,
                               sub_coords: np.ndarray, probes: np.ndarray) -> float:
    """Largest relative graph-metric distance of probe vectors to a subspace.

    ``dom_basis`` (n, k): orthonormal domain basis; ``reduced_matrix`` (k, k):
    the operator on domain coordinates; ``sub_coords`` (k, s): subspace inside
    the domain, in domain coordinates; ``probes`` (n, q): test vectors lying in
    the domain.  The metric is the graph inner product I + M^H M.
    """
    k = reduced_matrix.shape[0]
    G = np.eye(k) + reduced_matrix.conj().T @ reduced_matrix
    Lch = np.linalg.cholesky(hermitize(G))
    if sub_coords.shape[1] == 0:
        return 1.0
    Sg = Lch.conj().T @ sub_coords
    U, s, _ = np.linalg.svd(Sg, full_matrices=False)
    rank = int(np.sum(s > 1e-12 * max(float(s[0]) if len(s) else 0.0, 1e-300)))
    if rank == 0:
        return 1.0
    Qs = U[:, :rank]
    worst = 0.0
    for i in range(probes.shape[1]):
        xc = dom_basis.conj().T @ probes[:, i]
        xg = Lch.conj().T @ xc
        nrm = np.linalg.norm(xg)
        if nrm == 0:
            continue
        r = xg - Qs @ (Qs.conj().T @ xg)
        worst = max(worst, float(np.linalg.norm(r) / nrm))
    return worst
