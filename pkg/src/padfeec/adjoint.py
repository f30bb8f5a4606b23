"""Operator pairs on broken spaces and their adjoint-structure checks.

Builds the pairing between broken trimmed k-forms and their conforming
partners, verifies the base-pair hypotheses, computes the structural
constants (two-sided inf-sups, indices of closed range), and certifies the
Helmholtz and Hodge decompositions, the harmonic-space duality as a subspace
identity, and the horizontal slice dualities.  Every theorem-level check
returns a structured verdict naming the first failed hypothesis instead of
assuming it.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import AssemblyError, NotAComplex, NotAdmissible, NotNested
from .linalg import (
    Subspace,
    gram_complement,
    icr_of,
    infsup,
    nullspace,
    subspace_equal,
)
from .local import fast_local_constants
from .spaces import GlobalSpace, ladder


def build_pairing(primal: GlobalSpace, dual: GlobalSpace):
    """Pairing matrix <v_i, delta q_j> - <d v_i, q_j> between two atlases."""
    if dual.k != primal.k + 1 or primal.mesh is not dual.mesh:
        raise AssemblyError("pairing needs degrees k and k+1 on one mesh")
    B = ladder(primal.mesh).pairing(primal.k)
    return primal.atlas.T @ B @ dual.atlas


@dataclass
class OperatorPair:
    """A discrete operator with its domain and the partially adjoint partner."""

    T: np.ndarray
    domain: Subspace
    source_gram: np.ndarray
    range_gram: np.ndarray
    adjoint_T: np.ndarray
    adjoint_domain: Subspace
    adjoint_source_gram: np.ndarray
    adjoint_range_gram: np.ndarray
    pairing: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def pairing_residual(self):
        if self.pairing is None or self.domain.dim == 0 or self.adjoint_domain.dim == 0:
            return 0.0
        M = self.domain.basis.T @ self.pairing @ self.adjoint_domain.basis
        return float(np.abs(M).max())


@dataclass
class BasePairReport:
    uM_dim: int
    uN_dim: int
    MB: Subspace
    NB: Subspace
    alpha: float
    beta: float
    gamma: float
    icr_tilde: float
    icr_tilde_adjoint: float
    icr_under: float
    icr_under_adjoint: float
    alpha_cells: np.ndarray
    beta_cells: np.ndarray
    assumptions_ok: dict


@dataclass
class DecompositionReport:
    name: str
    lhs_dims: dict
    rhs_dims: dict
    orthogonality_residual: float
    identity_angle: float
    verdict: str
    detail: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.verdict == "pass"


@dataclass
class HarmonicSpace:
    subspace: Subspace
    k: int
    flavor: str

    @property
    def dim(self):
        return self.subspace.dim


def _p0_coords(lad, k, broken, vectors, tol=1e-9):
    """Coordinates of broken vectors that are piecewise constant, verified."""
    J = broken.p0_injection(lad.p0(k))
    P = broken.p0_projection(lad.p0(k))
    coords = P @ vectors
    resid = np.abs(vectors - J @ coords).max(initial=0.0)
    scale = max(np.abs(vectors).max(initial=0.0), 1.0)
    if resid > tol * scale:
        raise AssemblyError("vectors are not piecewise constant (residual %.2e)" % resid)
    return coords


def _cell_icr(T_block, M_local, range_gram_scale, eig_tol):
    """Lean per-cell index of closed range for a small stiffness block."""
    K = T_block.T @ T_block * range_gram_scale
    L = np.linalg.cholesky(0.5 * (M_local + M_local.T))
    Kw = np.linalg.solve(L, np.linalg.solve(L, 0.5 * (K + K.T)).T)
    w = np.linalg.eigvalsh(0.5 * (Kw + Kw.T))
    wmax = max(w[-1], 0.0)
    if wmax <= 0.0:
        return 0.0
    positive = w[w > eig_tol * wmax]
    if positive.size == 0:
        return 0.0
    return 1.0 / np.sqrt(float(positive[0]))


def base_pair_report(mesh, k, eig_tol=1e-10):
    """Clears the base-pair hypotheses for the broken (k, k+1) trimmed pair.

    The mutual annihilators are computed from the global pairing; the
    constants are minima of the cell constants, cross-checked against the
    mesh-level inf-sups; indices of closed range reduce to cell suprema.
    """
    lad = ladder(mesh)
    primal, dual = lad.primal(k), lad.dual(k + 1)
    B = lad.pairing(k)
    scale = max(np.abs(B).max(), 1.0)
    # one SVD yields both mutual annihilators
    U, s, Vt = np.linalg.svd(B / scale)
    r = int(np.sum(s > 1e-10 * s[0])) if s.size and s[0] > 0 else 0
    uM = Subspace(primal.dim, U[:, r:])
    uN = Subspace(dual.dim, Vt[r:].T.copy())
    Gp, Gq = primal.gram(), dual.gram()
    alphas, betas, gammas = [], [], []
    Ball = lad.pairing(k)
    for ci in range(mesh.num_cells):
        Bk = Ball[primal.cell_slice(ci), dual.cell_slice(ci)]
        a, b, g = fast_local_constants(primal.locals[ci], dual.locals[ci], Bk)
        alphas.append(a)
        betas.append(b)
        gammas.append(g)
    D = lad.d_matrix(k)
    Delta = lad.delta_matrix(k + 1)
    p0_hi, p0_lo = lad.p0(k + 1), lad.p0(k)
    icr_tilde = max(
        _cell_icr(
            D[_rows(p0_hi, ci)][:, primal.cell_slice(ci)],
            primal.locals[ci].gram(),
            p0_hi.volumes[ci],
            eig_tol,
        )
        for ci in range(mesh.num_cells)
    )
    icr_tilde_adj = max(
        _cell_icr(
            Delta[_rows(p0_lo, ci)][:, dual.cell_slice(ci)],
            dual.locals[ci].gram(),
            p0_lo.volumes[ci],
            eig_tol,
        )
        for ci in range(mesh.num_cells)
    )
    # the annihilator cores are trivial for trimmed pairs; their icr is the
    # convention value 0 whenever that happens
    icr_under = 0.0 if uM.dim == 0 else icr_of(
        D, Subspace.from_span(uM.basis, Gp), Gp, p0_hi.gram
    )
    icr_under_adj = 0.0 if uN.dim == 0 else icr_of(
        Delta, Subspace.from_span(uN.basis, Gq), Gq, p0_lo.gram
    )
    # hypothesis: the twisted kernels pair isomorphically across sides.  With
    # trivial annihilator cores the twisted parts are the whole broken spaces
    # and the dimensions reduce to plain rank counts.
    if uM.dim == 0 and uN.dim == 0:
        MB = Subspace(primal.dim, np.eye(primal.dim), Gp)
        NB = Subspace(dual.dim, np.eye(dual.dim), Gq)
        rank_D = _blockdiag_rank(D, lad.p0(k + 1), primal)
        rank_Delta = _blockdiag_rank(Delta, lad.p0(k), dual)
        dim_NT_MB = primal.dim - rank_D
        dim_RT_NB = rank_Delta
        dim_NT_NB = dual.dim - rank_Delta
        dim_RT_MB = rank_D
    else:
        MB = _twisted_part(primal, D, p0_hi.gram, uM, Gp)
        NB = _twisted_part_dual(dual, Delta, p0_lo.gram, uN, Gq)
        dim_NT_MB = _kernel_in(MB, D, Gp).dim
        dim_RT_NB = Subspace.from_span(Delta @ NB.basis, p0_lo.gram).dim
        dim_NT_NB = _kernel_in(NB, Delta, Gq).dim
        dim_RT_MB = Subspace.from_span(D @ MB.basis, p0_hi.gram).dim
    assumptions = {
        "twisted_kernel_dims_match": dim_NT_MB == dim_RT_NB and dim_NT_NB == dim_RT_MB,
        "alpha_positive": min(alphas) > 0,
        "beta_positive": min(betas) > 0,
    }
    return BasePairReport(
        uM_dim=uM.dim,
        uN_dim=uN.dim,
        MB=MB,
        NB=NB,
        alpha=float(min(alphas)),
        beta=float(min(betas)),
        gamma=float(min(gammas)),
        icr_tilde=float(icr_tilde),
        icr_tilde_adjoint=float(icr_tilde_adj),
        icr_under=float(icr_under),
        icr_under_adjoint=float(icr_under_adj),
        alpha_cells=np.asarray(alphas),
        beta_cells=np.asarray(betas),
        assumptions_ok=assumptions,
    )


def _rows(p0, ci):
    return slice(ci * p0.ncomp, (ci + 1) * p0.ncomp)


def _blockdiag_rank(T, p0, broken):
    """Rank of a cell-block-diagonal operator, summed cell by cell."""
    total = 0
    for ci in range(broken.mesh.num_cells):
        block = T[_rows(p0, ci), broken.cell_slice(ci)]
        if block.size:
            s = np.linalg.svd(block, compute_uv=False)
            if s.size and s[0] > 0:
                total += int(np.sum(s > 1e-12 * s[0]))
    return total


def _cell_p0_gram(p0, ci):
    return np.eye(p0.ncomp) * p0.volumes[ci]


def _kernel_in(sub: Subspace, T, gram):
    if sub.dim == 0:
        return Subspace.zero(sub.ambient_dim, gram)
    TV = T @ sub.basis
    ns = nullspace(TV / max(np.abs(TV).max(initial=0.0), 1e-300))
    return Subspace.from_span(sub.basis @ ns.basis, gram) if ns.dim else Subspace.zero(
        sub.ambient_dim, gram
    )


def _twisted_part(broken, D, range_gram, core: Subspace, gram):
    """Members orthogonal to the core kernel in L2 and to the core in energy."""
    if core.dim == 0:
        return Subspace.full(broken.dim, gram)
    rows = [core.basis.T @ D.T @ range_gram @ D]
    kernel_core = _kernel_in(core, D, gram)
    if kernel_core.dim:
        rows.append(kernel_core.basis.T @ gram)
    ns = nullspace(np.vstack(rows))
    return Subspace.from_span(ns.basis, gram)


def _twisted_part_dual(broken, Delta, range_gram, core: Subspace, gram):
    if core.dim == 0:
        return Subspace.full(broken.dim, gram)
    rows = [core.basis.T @ Delta.T @ range_gram @ Delta]
    kernel_core = _kernel_in(core, Delta, gram)
    if kernel_core.dim:
        rows.append(kernel_core.basis.T @ gram)
    ns = nullspace(np.vstack(rows))
    return Subspace.from_span(ns.basis, gram)


def whitney_pair(mesh, k, bc="none"):
    """The partially adjoint pair: nonconforming k-forms vs conforming duals.

    bc='none' places the boundary condition on the conforming side, and
    conversely.
    """
    lad = ladder(mesh)
    abc, _ = lad.abc(k, bc)
    partner_bc = "homogeneous" if bc == "none" else "none"
    star = lad.whitney_star(k + 1, partner_bc)
    pair = OperatorPair(
        T=lad.d_matrix(k),
        domain=abc.subspace(),
        source_gram=lad.primal(k).gram(),
        range_gram=lad.p0(k + 1).gram,
        adjoint_T=lad.delta_matrix(k + 1),
        adjoint_domain=star.subspace(),
        adjoint_source_gram=lad.dual(k + 1).gram(),
        adjoint_range_gram=lad.p0(k).gram,
        pairing=lad.pairing(k),
        meta={"mesh": mesh, "k": k, "bc": bc},
    )
    resid = pair.pairing_residual()
    if resid > 1e-11:
        raise AssemblyError("pair is not mutually annihilating (residual %.2e)" % resid)
    return pair


def partial_adjoint_of(D: Subspace, mesh, k, check_roundtrip=True):
    """Adjoint domain of a subspace of the broken k-forms, with round trip.

    The domain must contain the mutual-annihilator core of the base pair;
    the adjoint domain is the annihilator of the pairing restricted to it.
    """
    lad = ladder(mesh)
    B = lad.pairing(k)
    scale = max(np.abs(B).max(), 1.0)
    uM = nullspace(B.T / scale)
    Gp, Gq = lad.primal(k).gram(), lad.dual(k + 1).gram()
    Dsub = Subspace.from_span(D.basis, Gp)
    if uM.dim and not Dsub.contains(uM.basis, tol=1e-8):
        raise NotAdmissible("domain does not contain the annihilator core")
    rows = Dsub.basis.T @ B
    adjoint = Subspace.from_span(nullspace(rows / max(np.abs(rows).max(initial=0.0), 1e-300)).basis, Gq)
    pair = OperatorPair(
        T=lad.d_matrix(k),
        domain=Dsub,
        source_gram=Gp,
        range_gram=lad.p0(k + 1).gram,
        adjoint_T=lad.delta_matrix(k + 1),
        adjoint_domain=adjoint,
        adjoint_source_gram=Gq,
        adjoint_range_gram=lad.p0(k).gram,
        pairing=B,
        meta={"mesh": mesh, "k": k},
    )
    if check_roundtrip:
        cols = B @ adjoint.basis
        back = Subspace.from_span(
            nullspace(cols.T / max(np.abs(cols).max(initial=0.0), 1e-300)).basis, Gp
        )
        ok, ang = subspace_equal(Dsub, back, Gp, tol=1e-9)
        pair.meta["roundtrip_angle"] = ang
        if not ok:
            raise NotAdmissible("double annihilator does not return the domain")
    return pair


def quantified_crt_check(pair: OperatorPair, report: BasePairReport, eig_tol=1e-10):
    """Both indices of closed range plus the theorem-level bracket bounds."""
    icr_primal = icr_of(
        pair.T, pair.domain, pair.source_gram, pair.range_gram, eig_tol=eig_tol
    )
    icr_adjoint = icr_of(
        pair.adjoint_T,
        pair.adjoint_domain,
        pair.adjoint_source_gram,
        pair.adjoint_range_gram,
        eig_tol=eig_tol,
    )
    bound_primal = (
        (1.0 + 1.0 / report.alpha) * report.icr_tilde
        + icr_adjoint / report.alpha
        + report.icr_under
    )
    bound_adjoint = (
        (1.0 + 1.0 / report.beta) * report.icr_tilde_adjoint
        + icr_primal / report.beta
        + report.icr_under_adjoint
    )
    bound_ok = icr_primal <= bound_primal * (1 + 1e-10) and icr_adjoint <= bound_adjoint * (
        1 + 1e-10
    )
    return icr_primal, icr_adjoint, bool(bound_ok)


def _assemble_report(name, pieces_lhs, pieces_rhs, gram, ambient_dim=None, extra=None):
    """Compare two orthogonal decompositions of the same space."""
    lhs_dims = {n: s.dim for n, s in pieces_lhs.items()}
    rhs_dims = {n: s.dim for n, s in pieces_rhs.items()}
    resid = 0.0
    for pieces in (pieces_lhs, pieces_rhs):
        parts = list(pieces.values())
        for i in range(len(parts)):
            for j in range(i + 1, len(parts)):
                A, Bp = parts[i], parts[j]
                if A.dim and Bp.dim:
                    M = A.basis.T @ gram @ Bp.basis
                    resid = max(resid, float(np.abs(M).max()))
    span_l = Subspace.from_span(
        np.column_stack([s.basis for s in pieces_lhs.values() if s.dim])
        if any(s.dim for s in pieces_lhs.values())
        else np.zeros((next(iter(pieces_lhs.values())).ambient_dim, 0)),
        gram,
    )
    span_r = Subspace.from_span(
        np.column_stack([s.basis for s in pieces_rhs.values() if s.dim])
        if any(s.dim for s in pieces_rhs.values())
        else np.zeros((next(iter(pieces_rhs.values())).ambient_dim, 0)),
        gram,
    )
    ok, angle = subspace_equal(span_l, span_r, gram, tol=1e-8)
    dims_ok = sum(lhs_dims.values()) == sum(rhs_dims.values())
    if ambient_dim is not None:
        dims_ok = dims_ok and sum(lhs_dims.values()) == ambient_dim
    verdict = "pass" if (dims_ok and resid < 1e-10 and ok) else "fail"
    report = DecompositionReport(
        name=name,
        lhs_dims=lhs_dims,
        rhs_dims=rhs_dims,
        orthogonality_residual=resid,
        identity_angle=angle,
        verdict=verdict,
        detail=extra or {},
    )
    return report


def helmholtz_check(pair: OperatorPair):
    """Both Helmholtz splits induced by a partially adjoint pair.

    Verifies the symmetric twisted-range hypotheses first; on failure the
    verdict names them without asserting the identity.
    """
    mesh, k = pair.meta["mesh"], pair.meta["k"]
    lad = ladder(mesh)
    g_lo = lad.p0(k).gram
    g_hi = lad.p0(k + 1).gram
    # hypotheses: full broken ranges match the opposite kernels
    R_full = Subspace.from_span(pair.T, g_hi)
    N_full_adj = _p0_kernel(lad, k + 1, lad.dual(k + 1), pair.adjoint_T)
    hyp1, _ = subspace_equal(R_full, N_full_adj, g_hi, tol=1e-9)
    R_full_adj = Subspace.from_span(pair.adjoint_T, g_lo)
    N_full = _p0_kernel(lad, k, lad.primal(k), pair.T)
    hyp2, _ = subspace_equal(R_full_adj, N_full, g_lo, tol=1e-9)
    if not (hyp1 and hyp2):
        return DecompositionReport(
            name="helmholtz",
            lhs_dims={},
            rhs_dims={},
            orthogonality_residual=np.inf,
            identity_angle=np.inf,
            verdict="fail",
            detail={"failed_hypothesis": "twisted ranges do not match opposite kernels"},
        )
    # split of the low space: R(adjoint on full) (+) 0  =  R(adjoint on domain) (+) N(T on domain)
    R_dom_adj = Subspace.from_span(pair.adjoint_T @ pair.adjoint_domain.basis, g_lo)
    kernel_dom = _domain_kernel_p0(lad, k, lad.primal(k), pair.T, pair.domain)
    low = _assemble_report(
        "helmholtz-low",
        {"range_adjoint_full": R_full_adj, "kernel_core": Subspace.zero(R_full_adj.ambient_dim, g_lo)},
        {"range_adjoint_domain": R_dom_adj, "kernel_domain": kernel_dom},
        g_lo,
        ambient_dim=lad.p0(k).dim,
    )
    R_dom = Subspace.from_span(pair.T @ pair.domain.basis, g_hi)
    kernel_adj = _domain_kernel_p0(
        lad, k + 1, lad.dual(k + 1), pair.adjoint_T, pair.adjoint_domain
    )
    high = _assemble_report(
        "helmholtz-high",
        {"range_full": R_full, "kernel_core": Subspace.zero(R_full.ambient_dim, g_hi)},
        {"range_domain": R_dom, "kernel_adjoint_domain": kernel_adj},
        g_hi,
        ambient_dim=lad.p0(k + 1).dim,
    )
    verdict = "pass" if low.passed and high.passed else "fail"
    return DecompositionReport(
        name="helmholtz",
        lhs_dims={**{"low_" + n: d for n, d in low.lhs_dims.items()},
                  **{"high_" + n: d for n, d in high.lhs_dims.items()}},
        rhs_dims={**{"low_" + n: d for n, d in low.rhs_dims.items()},
                  **{"high_" + n: d for n, d in high.rhs_dims.items()}},
        orthogonality_residual=max(low.orthogonality_residual, high.orthogonality_residual),
        identity_angle=max(low.identity_angle, high.identity_angle),
        verdict=verdict,
        detail={"low": low, "high": high},
    )


def _p0_kernel(lad, k, broken, T):
    """Kernel of a broken-to-constant operator, as a subspace of constants."""
    ns = nullspace(T / max(np.abs(T).max(initial=0.0), 1e-300))
    if ns.dim == 0:
        return Subspace.zero(lad.p0(k).dim, lad.p0(k).gram)
    coords = _p0_coords(lad, k, broken, ns.basis)
    return Subspace.from_span(coords, lad.p0(k).gram)


def _domain_kernel_p0(lad, k, broken, T, domain: Subspace):
    TV = T @ domain.basis
    ns = nullspace(TV / max(np.abs(TV).max(initial=0.0), 1e-300))
    if ns.dim == 0:
        return Subspace.zero(lad.p0(k).dim, lad.p0(k).gram)
    vecs = domain.basis @ ns.basis
    coords = _p0_coords(lad, k, broken, vecs)
    return Subspace.from_span(coords, lad.p0(k).gram)


def harmonic_space(mesh, k, flavor):
    """Kernel-modulo-range at one ladder level, as constants coordinates.

    Flavors: 'abc'/'abc0' use the nonconforming ladder, 'conforming'/
    'conforming0' the conforming Whitney one, 'star'/'star0' the conjugated
    codifferential ladder.
    """
    lad = ladder(mesh)
    n = mesh.dim
    g = lad.p0(k).gram

    def kernel_abc(kk, bc):
        gs, _ = lad.abc(kk, bc)
        return _domain_kernel_p0(lad, kk, lad.primal(kk), lad.d_matrix(kk), gs.subspace()) \
            if kk < n else Subspace.from_span(gs.atlas, g)

    def range_abc(kk, bc):
        if kk < 0:
            return Subspace.zero(lad.p0(kk + 1).dim, lad.p0(kk + 1).gram)
        gs, _ = lad.abc(kk, bc)
        return Subspace.from_span(lad.d_matrix(kk) @ gs.atlas, lad.p0(kk + 1).gram)

    def kernel_conf(kk, bc):
        gs = lad.whitney(kk, bc)
        return _domain_kernel_p0(lad, kk, lad.primal(kk), lad.d_matrix(kk), gs.subspace()) \
            if kk < n else Subspace.from_span(gs.atlas @ np.eye(gs.dim), g)

    def range_conf(kk, bc):
        if kk < 0:
            return Subspace.zero(lad.p0(kk + 1).dim, lad.p0(kk + 1).gram)
        gs = lad.whitney(kk, bc)
        return Subspace.from_span(lad.d_matrix(kk) @ gs.atlas, lad.p0(kk + 1).gram)

    def kernel_star(kk, bc):
        gs = lad.whitney_star(kk, bc)
        if kk == 0:
            return Subspace.from_span(
                _p0_coords(lad, 0, lad.dual(0), gs.atlas), g
            )
        return _domain_kernel_p0(lad, kk, lad.dual(kk), lad.delta_matrix(kk), gs.subspace())

    def range_star(kk, bc):
        if kk > n:
            return Subspace.zero(lad.p0(kk - 1).dim, lad.p0(kk - 1).gram)
        gs = lad.whitney_star(kk, bc)
        return Subspace.from_span(lad.delta_matrix(kk) @ gs.atlas, lad.p0(kk - 1).gram)

    if flavor in ("abc", "abc0"):
        bc = "none" if flavor == "abc" else "homogeneous"
        N = kernel_abc(k, bc)
        R = range_abc(k - 1, bc) if k >= 1 else Subspace.zero(lad.p0(k).dim, g)
    elif flavor in ("conforming", "conforming0"):
        bc = "none" if flavor == "conforming" else "homogeneous"
        N = kernel_conf(k, bc)
        R = range_conf(k - 1, bc) if k >= 1 else Subspace.zero(lad.p0(k).dim, g)
    elif flavor in ("star", "star0"):
        bc = "none" if flavor == "star" else "homogeneous"
        N = kernel_star(k, bc)
        R = range_star(k + 1, bc) if k + 1 <= n else Subspace.zero(lad.p0(k).dim, g)
    else:
        raise AssemblyError("unknown harmonic flavor %r" % (flavor,))
    if R.dim and not N.contains(R.basis, tol=1e-8):
        raise NotAComplex("range is not contained in the kernel (flavor %s)" % flavor)
    return HarmonicSpace(gram_complement(R, N, g), k, flavor)


def pl_duality_check(mesh, k):
    """Harmonic-space duality as an identity between two constructions."""
    lad = ladder(mesh)
    n = mesh.dim
    g = lad.p0(k).gram
    star = lad.p0(n - k).star_matrix()  # maps (n-k)-constants to k-constants
    out = {}
    for flavor, conf_flavor in (("abc", "conforming0"), ("abc0", "conforming")):
        H_abc = harmonic_space(mesh, k, flavor)
        H_conf = harmonic_space(mesh, n - k, conf_flavor)
        starred = Subspace.from_span(star @ H_conf.subspace.basis, g)
        ok, ang = subspace_equal(H_abc.subspace, starred, g, tol=1e-8)
        out[flavor] = DecompositionReport(
            name="pl-duality-%s" % flavor,
            lhs_dims={"harmonic_abc": H_abc.dim},
            rhs_dims={"star_conforming": starred.dim},
            orthogonality_residual=0.0,
            identity_angle=ang,
            verdict="pass" if ok else "fail",
        )
    verdict = "pass" if all(r.passed for r in out.values()) else "fail"
    return DecompositionReport(
        name="pl-duality",
        lhs_dims={f: r.lhs_dims["harmonic_abc"] for f, r in out.items()},
        rhs_dims={f: r.rhs_dims["star_conforming"] for f, r in out.items()},
        orthogonality_residual=0.0,
        identity_angle=max(r.identity_angle for r in out.values()),
        verdict=verdict,
        detail=out,
    )


def hodge_check(mesh, k):
    """Three-way split of the constant k-forms, for both boundary placements."""
    lad = ladder(mesh)
    g = lad.p0(k).gram
    reports = {}
    for bc, flavor, star_bc in (("none", "abc", "homogeneous"), ("homogeneous", "abc0", "none")):
        gs_lo, _ = lad.abc(k - 1, bc)
        R_lo = Subspace.from_span(lad.d_matrix(k - 1) @ gs_lo.atlas, g)
        H = harmonic_space(mesh, k, flavor)
        star_hi = lad.whitney_star(k + 1, star_bc)
        R_hi = Subspace.from_span(lad.delta_matrix(k + 1) @ star_hi.atlas, g)
        full = Subspace.full(lad.p0(k).dim, g)
        rep = _assemble_report(
            "hodge-%s" % bc,
            {"full": full},
            {"range_below": R_lo, "harmonic": H.subspace, "corange_above": R_hi},
            g,
            ambient_dim=lad.p0(k).dim,
        )
        reports[bc] = rep
    verdict = "pass" if all(r.passed for r in reports.values()) else "fail"
    return DecompositionReport(
        name="hodge",
        lhs_dims={bc: sum(r.lhs_dims.values()) for bc, r in reports.items()},
        rhs_dims={bc: sum(r.rhs_dims.values()) for bc, r in reports.items()},
        orthogonality_residual=max(r.orthogonality_residual for r in reports.values()),
        identity_angle=max(r.identity_angle for r in reports.values()),
        verdict=verdict,
        detail=reports,
    )


def horizontal_duality_check(mesh, k):
    """Range and kernel slices between the two boundary placements agree."""
    lad = ladder(mesh)
    g_hi = lad.p0(k + 1).gram
    g_lo = lad.p0(k).gram
    abc_big, _ = lad.abc(k, "none")
    abc_small, _ = lad.abc(k, "homogeneous")
    star_big = lad.whitney_star(k + 1, "none")
    star_small = lad.whitney_star(k + 1, "homogeneous")
    R_big = Subspace.from_span(lad.d_matrix(k) @ abc_big.atlas, g_hi)
    R_small = Subspace.from_span(lad.d_matrix(k) @ abc_small.atlas, g_hi)
    if not R_big.contains(R_small.basis, tol=1e-8):
        raise NotNested("range slices are not nested")
    dR = gram_complement(R_small, R_big, g_hi)
    N_big = _domain_kernel_p0(lad, k + 1, lad.dual(k + 1), lad.delta_matrix(k + 1), star_big.subspace())
    N_small = _domain_kernel_p0(lad, k + 1, lad.dual(k + 1), lad.delta_matrix(k + 1), star_small.subspace())
    dN = gram_complement(N_small, N_big, g_hi)
    ok1, ang1 = subspace_equal(dR, dN, g_hi, tol=1e-8)
    # mirrored slices one level down
    Rs_big = Subspace.from_span(lad.delta_matrix(k + 1) @ star_big.atlas, g_lo)
    Rs_small = Subspace.from_span(lad.delta_matrix(k + 1) @ star_small.atlas, g_lo)
    dRs = gram_complement(Rs_small, Rs_big, g_lo)
    Nk_big = _domain_kernel_p0(lad, k, lad.primal(k), lad.d_matrix(k), abc_big.subspace())
    Nk_small = _domain_kernel_p0(lad, k, lad.primal(k), lad.d_matrix(k), abc_small.subspace())
    dNk = gram_complement(Nk_small, Nk_big, g_lo)
    ok2, ang2 = subspace_equal(dRs, dNk, g_lo, tol=1e-8)
    report = base_pair_report(mesh, k)
    bound = min(report.alpha, report.beta)
    gamma1 = infsup(dR, dN, g_hi, check=False) if dR.dim and dN.dim else 1.0
    gamma2 = infsup(dRs, dNk, g_lo, check=False) if dRs.dim and dNk.dim else 1.0
    hyp = report.assumptions_ok["twisted_kernel_dims_match"]
    identity_holds = ok1 and ok2
    verdict = "pass" if (identity_holds if hyp else min(gamma1, gamma2) >= bound - 1e-10) else "fail"
    return DecompositionReport(
        name="horizontal-duality",
        lhs_dims={"range_slice_high": dR.dim, "corange_slice_low": dRs.dim},
        rhs_dims={"kernel_slice_high": dN.dim, "kernel_slice_low": dNk.dim},
        orthogonality_residual=0.0,
        identity_angle=max(ang1, ang2),
        verdict=verdict,
        detail={"infsup_high": gamma1, "infsup_low": gamma2, "bound": bound},
    )


def ladder_constants(mesh, k):
    """The vertical-structure constants for the (k, k+1) rung of the ladder.

    For trimmed pairs the harmonic slices are empty cell by cell and the
    convention values 1 apply; the slice dimensions are computed, not assumed.
    """
    lad = ladder(mesh)
    report_low = base_pair_report(mesh, k)
    out = {
        "alpha": report_low.alpha,
        "beta": report_low.beta,
        "gamma": report_low.gamma,
    }
    if k + 1 <= mesh.dim - 1:
        report_high = base_pair_report(mesh, k + 1)
        out["kappa"] = report_high.beta
        out["varpi"] = report_high.alpha
    else:
        out["kappa"] = 1.0
        out["varpi"] = 1.0
    # harmonic slices per cell: kernel of d one level up modulo range of d
    slice_dims = 0
    for ci in range(mesh.num_cells):
        lo = lad.primal(k).locals[ci]
        hi = lad.primal(k + 1).locals[ci]
        D_lo = np.column_stack(
            [hi.expand(lo.op_image(i)) for i in range(lo.dim)]
        ) if lo.dim else np.zeros((hi.dim, 0))
        ker_hi = nullspace(hi.energy_gram() / max(np.abs(hi.energy_gram()).max(), 1e-300))
        R = Subspace.from_span(D_lo, hi.gram())
        N = Subspace.from_span(ker_hi.basis, hi.gram())
        slice_dims += N.dim - R.dim
    out["harmonic_slice_dim"] = int(slice_dims)
    out["chi"] = 1.0 if slice_dims == 0 else np.nan
    out["epsilon"] = 1.0 if slice_dims == 0 else np.nan
    return out
