"""Dense linear-algebra substrate.

Rank and nullspace detection with explicit relative tolerances, Gram-aware
orthonormalization, inf-sup constants, indices of closed range, generalized
eigenproblems and principal angles between subspaces.  Every orthogonality
notion goes through an explicit Gram matrix; the Euclidean inner product is
only the special case ``gram=None``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import InvalidGram, InvalidMatrix, NotClosedRange, NotNested

RANK_TOL = 1e-10
EIG_TOL = 1e-10


def _as_matrix(M):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise InvalidMatrix("expected a 2-d array, got shape %s" % (M.shape,))
    if not np.all(np.isfinite(M)):
        raise InvalidMatrix("matrix has non-finite entries")
    return M


def check_spd(gram, tol=RANK_TOL):
    """Raise InvalidGram unless ``gram`` is symmetric positive definite."""
    G = _as_matrix(gram)
    if G.shape[0] != G.shape[1]:
        raise InvalidGram("gram matrix must be square")
    scale = max(np.abs(G).max(), 1.0)
    if np.abs(G - G.T).max() > 1e-12 * scale:
        raise InvalidGram("gram matrix is not symmetric")
    w = scipy.linalg.eigvalsh(G)
    if w[0] <= tol * max(w[-1], 1.0):
        raise InvalidGram("gram matrix is not positive definite at tolerance")
    return G


@dataclass
class Subspace:
    """A subspace of R^ambient_dim, columns of ``basis`` spanning it.

    ``gram`` is the ambient Gram matrix defining the inner product the basis
    is orthonormal against (None means Euclidean).
    """

    ambient_dim: int
    basis: np.ndarray
    gram: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self):
        return self.basis.shape[1]

    @classmethod
    def from_span(cls, vectors, gram=None, tol=RANK_TOL):
        """Gram-orthonormalize the columns of ``vectors`` and drop the rank deficit."""
        V = _as_matrix(vectors)
        Q = orthonormalize(V, gram, tol)
        return cls(V.shape[0], Q, gram)

    @classmethod
    def full(cls, n, gram=None):
        Q = orthonormalize(np.eye(n), gram)
        return cls(n, Q, gram)

    @classmethod
    def zero(cls, n, gram=None):
        return cls(n, np.zeros((n, 0)), gram)

    def contains(self, vectors, tol=1e-10):
        """True if every column of ``vectors`` lies in the span at relative tolerance."""
        V = np.atleast_2d(np.asarray(vectors, dtype=float))
        if V.shape[0] != self.ambient_dim:
            V = V.T
        R = V - self.basis @ self._inner(self.basis, V)
        num = np.sqrt(np.abs(np.sum(R * self._apply_gram(R), axis=0)))
        den = np.sqrt(np.abs(np.sum(V * self._apply_gram(V), axis=0)))
        return bool(np.all(num <= tol * np.maximum(den, 1e-300)))

    def _apply_gram(self, V):
        return V if self.gram is None else self.gram @ V

    def _inner(self, A, B):
        return A.T @ self._apply_gram(B)


def orthonormalize(V, gram=None, tol=RANK_TOL):
    """Return a gram-orthonormal basis of span(columns of V), rank-trimmed."""
    V = _as_matrix(V)
    if V.shape[1] == 0:
        return V.copy()
    G = None if gram is None else np.asarray(gram, dtype=float)

    def normalize(W, trim):
        C = W.T @ W if G is None else W.T @ G @ W
        C = 0.5 * (C + C.T)
        w, U = scipy.linalg.eigh(C)
        wmax = max(w[-1], 0.0)
        if wmax <= 0.0:
            return np.zeros((W.shape[0], 0))
        # the eigenvalues scale like squared singular values, so the relative
        # rank threshold applies to w directly, not to its square root
        keep = w > trim * wmax
        if not np.any(keep):
            return np.zeros((W.shape[0], 0))
        return W @ U[:, keep] / np.sqrt(w[keep])

    Q = normalize(V, tol)
    if Q.shape[1]:
        # second pass tightens orthonormality to machine precision
        Q = normalize(Q, 1e-14)
    return Q


def rank(M, tol=RANK_TOL):
    """Numerical rank with a relative singular-value threshold."""
    M = _as_matrix(M)
    if min(M.shape) == 0:
        return 0
    s = scipy.linalg.svdvals(M)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def nullspace(M, tol=RANK_TOL):
    """Euclidean-orthonormal basis of {v : ||Mv|| <= tol ||M|| ||v||} as a Subspace."""
    M = _as_matrix(M)
    n = M.shape[1]
    if n == 0:
        return Subspace.zero(0)
    if M.shape[0] == 0:
        return Subspace(n, np.eye(n))
    _, s, Vt = scipy.linalg.svd(M, full_matrices=True)
    smax = s[0] if s.size else 0.0
    r = int(np.sum(s > tol * smax)) if smax > 0.0 else 0
    return Subspace(n, Vt[r:].T.copy())


def principal_angles(A: Subspace, B: Subspace, gram=None):
    """Principal angles (radians, ascending) between two subspaces w.r.t. ``gram``.

    Uses cosines for large angles and projection-residual sines for tiny ones,
    so angles near 0 are resolved to machine precision.
    """
    if A.ambient_dim != B.ambient_dim:
        raise InvalidMatrix("subspaces live in different ambient dimensions")
    p, q = A.dim, B.dim
    m = min(p, q)
    if m == 0:
        return np.zeros(0)
    Qa = orthonormalize(A.basis, gram)
    Qb = orthonormalize(B.basis, gram)
    G = np.eye(A.ambient_dim) if gram is None else np.asarray(gram, dtype=float)
    cos_vals = scipy.linalg.svdvals(Qa.T @ G @ Qb)  # descending: cos(t_1) >= ...
    cos_vals = np.clip(cos_vals[:m], 0.0, 1.0)
    # sines from the projection residual of the smaller space resolve angles
    # near zero far better than arccos
    small, big = (Qa, Qb) if p <= q else (Qb, Qa)
    R = small - big @ (big.T @ (G @ small))
    sin_vals = np.sort(np.clip(scipy.linalg.svdvals(_gram_sqrt_apply(G, R)), 0.0, 1.0))
    angles = np.where(
        cos_vals > np.sqrt(0.5), np.arcsin(sin_vals[:m]), np.arccos(cos_vals)
    )
    return np.sort(angles)


def _gram_sqrt_apply(G, V):
    w, U = scipy.linalg.eigh(0.5 * (G + G.T))
    w = np.clip(w, 0.0, None)
    return (U * np.sqrt(w)) @ (U.T @ V)


def subspace_equal(A: Subspace, B: Subspace, gram=None, tol=1e-8):
    """(flag, max_angle): equal dimension and all principal angles <= tol."""
    if A.dim != B.dim:
        ang = principal_angles(A, B, gram)
        worst = float(ang[-1]) if ang.size else np.pi / 2
        return False, worst
    if A.dim == 0:
        return True, 0.0
    ang = principal_angles(A, B, gram)
    worst = float(ang[-1])
    return worst <= tol, worst


def infsup(A: Subspace, B: Subspace, gram=None, check=True):
    """inf over a in A of sup over b in B of <a,b>/(|a||b|) in the gram inner product.

    Returns 0.0 when either side is trivial or when dim A exceeds dim B.  When
    the dimensions agree the value is symmetric in A and B.
    """
    if gram is not None and check and np.asarray(gram).shape[0] <= 400:
        check_spd(gram)
    if A.dim == 0 or B.dim == 0:
        return 0.0
    Qa = orthonormalize(A.basis, gram)
    Qb = orthonormalize(B.basis, gram)
    G = np.eye(A.ambient_dim) if gram is None else np.asarray(gram, dtype=float)
    s = scipy.linalg.svdvals(Qa.T @ G @ Qb)
    if A.dim > B.dim:
        return 0.0
    return float(np.clip(s[A.dim - 1], 0.0, 1.0))


def icr_of(T, D: Subspace, gram_x=None, gram_y=None, eig_tol=EIG_TOL):
    """Index of closed range of T restricted to the domain subspace D.

    Computes sup |v|_X / |Tv|_Y over the X-orthogonal complement of the kernel
    inside D; returns 0.0 when that complement is trivial.
    """
    T = _as_matrix(T)
    if D.dim == 0:
        return 0.0
    V = D.basis
    n = D.ambient_dim
    Gx = np.eye(n) if gram_x is None else np.asarray(gram_x, dtype=float)
    Gy = np.eye(T.shape[0]) if gram_y is None else np.asarray(gram_y, dtype=float)
    TV = T @ V
    K = TV.T @ Gy @ TV
    M = V.T @ Gx @ V
    K = 0.5 * (K + K.T)
    M = 0.5 * (M + M.T)
    w, U = scipy.linalg.eigh(K, M)
    wmax = max(w[-1], 0.0)
    if wmax <= 0.0:
        return 0.0
    cut = eig_tol * wmax
    positive = w[w > cut]
    if positive.size == 0:
        return 0.0
    lam_min = float(positive[0])
    if lam_min <= eig_tol:
        raise NotClosedRange(
            "restricted stiffness nearly singular (lambda_min=%.3e)" % lam_min
        )
    return 1.0 / np.sqrt(lam_min)


def gram_complement(A: Subspace, B: Subspace, gram=None, tol=RANK_TOL):
    """Orthogonal complement of A inside B with respect to ``gram``.

    Requires A to be contained in B at tolerance; the result has dimension
    dim B - dim A and is gram-orthogonal to A.
    """
    if A.ambient_dim != B.ambient_dim:
        raise InvalidMatrix("subspaces live in different ambient dimensions")
    n = A.ambient_dim
    G = None if gram is None else np.asarray(gram, dtype=float)
    Qb = orthonormalize(B.basis, G)
    Bsub = Subspace(n, Qb, G)
    if A.dim > 0 and not Bsub.contains(A.basis, tol=max(tol, 1e-9) * 1e3):
        raise NotNested("first subspace is not contained in the second")
    if A.dim == 0:
        return Subspace(n, Qb.copy(), G)
    Qa = orthonormalize(A.basis, G)
    Ggb = Qb if G is None else G @ Qb
    # B-coordinates of the complement: kernel of the (dim A x dim B) cross-Gram,
    # which is well scaled since both bases are orthonormal
    coords = nullspace(Qa.T @ Ggb, tol=1e-8)
    Q = orthonormalize(Qb @ coords.basis, G)
    if Q.shape[1] != B.dim - A.dim:
        raise NotNested(
            "complement dimension %d does not match dim B - dim A = %d"
            % (Q.shape[1], B.dim - A.dim)
        )
    return Subspace(n, Q, G)


@dataclass
class SpectralReport:
    values: np.ndarray
    vectors: np.ndarray
    residual: float


def generalized_eig(K, M, sub: Subspace | None = None, eig_tol=EIG_TOL):
    """Eigenpairs of K v = lambda M v restricted to ``sub`` (ascending).

    M must be positive definite on the subspace.  The returned vectors are
    ambient, M-orthonormal; the residual is max |Kv - lambda Mv| over pairs.
    """
    K = _as_matrix(K)
    M = _as_matrix(M)
    if sub is None:
        sub = Subspace(K.shape[1], np.eye(K.shape[1]))
    V = sub.basis
    Kp = 0.5 * ((V.T @ K @ V) + (V.T @ K @ V).T)
    Mp = 0.5 * ((V.T @ M @ V) + (V.T @ M @ V).T)
    wM = scipy.linalg.eigvalsh(Mp) if Mp.shape[0] else np.array([1.0])
    if Mp.shape[0] and wM[0] <= eig_tol * max(wM[-1], 1.0):
        raise InvalidGram("mass matrix not positive definite on the subspace")
    if Mp.shape[0] == 0:
        return SpectralReport(np.zeros(0), np.zeros((K.shape[1], 0)), 0.0)
    w, U = scipy.linalg.eigh(Kp, Mp)
    vecs = V @ U
    resid = 0.0
    for i in range(w.size):
        r = K @ vecs[:, i] - w[i] * (M @ vecs[:, i])
        resid = max(resid, float(np.linalg.norm(r)))
    return SpectralReport(w, vecs, resid)


def pencil_nonzero_eigs(K, M, rel_tol=1e-9):
    """Finite nonzero eigenvalues of the PSD pencil K v = lambda M v.

    Handles a singular M (and a possible common kernel of K and M) by the
    shifted symmetric reduction M v = theta (K + M) v; finite eigenvalues are
    (1-theta)/theta.  Returns the sorted nonzero eigenvalues and the count of
    zero eigenvalues (theta ~ 1).
    """
    K = _as_matrix(K)
    M = _as_matrix(M)
    n = K.shape[0]
    if n == 0:
        return np.zeros(0), 0
    sK = max(np.abs(K).max(), 1e-300)
    sM = max(np.abs(M).max(), 1e-300)
    common = nullspace(np.vstack([K / sK, M / sM]))
    if common.dim:
        Q = nullspace(common.basis.T).basis
    else:
        Q = np.eye(n)
    Kr = Q.T @ K @ Q
    Mr = Q.T @ M @ Q
    A = 0.5 * (Kr + Kr.T)
    B = 0.5 * (Mr + Mr.T)
    S = A / sK + B / sM
    theta, _ = scipy.linalg.eigh(B / sM, 0.5 * (S + S.T))
    theta = np.clip(theta, 0.0, 1.0)
    lam = np.full_like(theta, np.inf)
    pos = theta > rel_tol
    lam[pos] = (1.0 - theta[pos]) / theta[pos] * (sK / sM)
    finite = lam[np.isfinite(lam)]
    zero_count = int(np.sum(np.abs(finite) <= rel_tol * max(finite.max(initial=1.0), 1.0)))
    nonzero = np.sort(finite[np.abs(finite) > rel_tol * max(finite.max(initial=1.0), 1.0)])
    return nonzero, zero_count


def solve_symmetric(A, b, refine=True):
    """Dense symmetric-indefinite solve with one step of iterative refinement.

    Returns (x, relative_residual, condition_estimate).
    """
    A = _as_matrix(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] == 0:
        return np.zeros(0), 0.0, 1.0
    lu, piv = scipy.linalg.lu_factor(A)
    x = scipy.linalg.lu_solve((lu, piv), b)
    if refine:
        r = b - A @ x
        x = x + scipy.linalg.lu_solve((lu, piv), r)
    bnorm = max(np.linalg.norm(b), 1e-300)
    rel = float(np.linalg.norm(b - A @ x) / bnorm)
    anorm = np.linalg.norm(A, 1)
    gecon = scipy.linalg.get_lapack_funcs("gecon", (A,))
    rcond, _ = gecon(lu, anorm)
    cond = float(1.0 / rcond) if rcond > 0 else np.inf
    return x, rel, cond
