"""Discretized variational problems on the conforming/nonconforming ladder.

Source problems (coercive nonconforming primal form and conforming mixed
dual form), the eigenvalue pair, and four Hodge-Laplace schemes sharing one
right-hand side; every announced equivalence between them is verified as a
relative residual.  All mass terms use the projection onto piecewise
constants exactly as the schemes are written; only the constant moments of
the load enter any right-hand side.
"""

from dataclasses import dataclass, field

import numpy as np

from .adjoint import harmonic_space
from .errors import AssemblyError, InvalidParameter, SolverFailure
from .forms import PolyForm, cell_quadrature, l2_inner
from .linalg import pencil_nonzero_eigs, solve_symmetric
from .spaces import ladder


@dataclass
class Projector:
    """L2 projection onto piecewise-constant k-forms, in coordinates."""

    matrix: np.ndarray
    k: int


@dataclass
class SchemeSolution:
    scheme: str
    components: dict
    residual: float
    condition: float
    meta: dict = field(default_factory=dict)


@dataclass
class EquivalenceReport:
    residuals: dict
    verdict: str

    @property
    def passed(self):
        return self.verdict == "pass"


def _solve(K, rhs, label):
    x, rel, cond = solve_symmetric(_check_symmetric(K, label), rhs)
    if rel > 1e-10:
        raise SolverFailure(
            "%s solve stalled at relative residual %.2e (condition %.2e)"
            % (label, rel, cond)
        )
    return x, rel, cond


def _check_symmetric(K, label):
    if K.size:
        scale = max(np.abs(K).max(), 1e-300)
        if np.abs(K - K.T).max() > 1e-13 * scale:
            raise AssemblyError("%s system lost symmetry" % label)
    return K


def p0_moments(mesh, k, load):
    """Vector of integrals of the load components over every cell.

    ``load`` is a per-cell list of PolyForm (exact) or a callable point ->
    component array (fixed-degree quadrature).
    """
    lad = ladder(mesh)
    p0 = lad.p0(k)
    F = np.zeros(p0.dim)
    if callable(load):
        for ci in range(mesh.num_cells):
            pts, wts = cell_quadrature(mesh.cell_geometry(ci), degree=7)
            acc = np.zeros(p0.ncomp)
            for p, w in zip(pts, wts):
                acc += w * np.asarray(load(p), dtype=float)
            for mi in range(p0.ncomp):
                F[p0.index(ci, mi)] = acc[mi]
    else:
        for ci, form in enumerate(load):
            cell = mesh.cell_geometry(ci)
            for mi, m in enumerate(p0.midx):
                unit = PolyForm.basis_form(mesh.dim, m)
                F[p0.index(ci, mi)] = l2_inner(form, unit, cell)
    return F


def _p0_coords_of_moments(lad, k, F):
    return F / np.diag(lad.p0(k).gram)


def solve_source_primal(mesh, k, load, bc="none"):
    """Coercive nonconforming scheme with the projected mass term."""
    lad = ladder(mesh)
    gs, _ = lad.abc(k, bc)
    A = gs.atlas
    G_hi = lad.p0(k + 1).gram if k < mesh.dim else None
    P = lad.primal(k).p0_projection(lad.p0(k)) @ A
    K = P.T @ lad.p0(k).gram @ P
    if k < mesh.dim:
        DA = lad.d_matrix(k) @ A
        K = K + DA.T @ G_hi @ DA
    F = load if isinstance(load, np.ndarray) else p0_moments(mesh, k, load)
    rhs = P.T @ F
    x, rel, cond = _solve(K, rhs, "source-primal")
    return SchemeSolution(
        scheme="source-primal",
        components={"omega": x, "omega_broken": A @ x},
        residual=rel,
        condition=cond,
        meta={"k": k, "bc": bc, "moments": F},
    )


def solve_source_dual(mesh, k, load, bc="none"):
    """Conforming mixed scheme: flux in the star space, state in constants."""
    lad = ladder(mesh)
    partner_bc = "homogeneous" if bc == "none" else "none"
    star = lad.whitney_star(k + 1, partner_bc)
    Az = star.atlas
    Pz = lad.dual(k + 1).p0_projection(lad.p0(k + 1)) @ Az
    Mp = Pz.T @ lad.p0(k + 1).gram @ Pz
    C = lad.p0(k).gram @ (lad.delta_matrix(k + 1) @ Az)  # moments of delta zeta
    M0 = lad.p0(k).gram
    nz, n0 = Az.shape[1], lad.p0(k).dim
    K = np.zeros((nz + n0, nz + n0))
    K[:nz, :nz] = Mp
    K[:nz, nz:] = -C.T
    K[nz:, :nz] = -C
    K[nz:, nz:] = -M0
    F = load if isinstance(load, np.ndarray) else p0_moments(mesh, k, load)
    rhs = np.concatenate([np.zeros(nz), -F])
    x, rel, cond = _solve(K, rhs, "source-dual")
    return SchemeSolution(
        scheme="source-dual",
        components={"zeta": x[:nz], "omega_bar": x[nz:]},
        residual=rel,
        condition=cond,
        meta={"k": k, "bc": bc, "moments": F},
    )


def _rel(x, y, gram, floor):
    num = x - y
    nn = float(np.sqrt(max(num @ gram @ num, 0.0)))
    scale = max(
        float(np.sqrt(max(x @ gram @ x, 0.0))),
        float(np.sqrt(max(y @ gram @ y, 0.0))),
        floor,
    )
    if nn == 0.0:
        return 0.0
    return nn / scale


def verify_source_equivalence(mesh, primal_sol, dual_sol):
    """The three cell-by-cell identities linking the two source schemes."""
    k = primal_sol.meta["k"]
    lad = ladder(mesh)
    gs, _ = lad.abc(k, primal_sol.meta["bc"])
    partner_bc = "homogeneous" if primal_sol.meta["bc"] == "none" else "none"
    star = lad.whitney_star(k + 1, partner_bc)
    omega_b = primal_sol.components["omega_broken"]
    zeta_b = star.atlas @ dual_sol.components["zeta"]
    F = primal_sol.meta["moments"]
    floor = max(float(np.linalg.norm(F)), 1e-14)
    P_omega = lad.primal(k).p0_projection(lad.p0(k)) @ omega_b
    g0 = lad.p0(k).gram
    g1 = lad.p0(k + 1).gram
    res = {}
    res["state_projection"] = _rel(dual_sol.components["omega_bar"], P_omega, g0, floor)
    delta_zeta = lad.delta_matrix(k + 1) @ zeta_b
    Pf = _p0_coords_of_moments(lad, k, F)
    res["state_plus_coflux"] = _rel(P_omega + delta_zeta, Pf, g0, floor)
    d_omega = lad.d_matrix(k) @ omega_b
    P_zeta = lad.dual(k + 1).p0_projection(lad.p0(k + 1)) @ zeta_b
    res["flux_projection"] = _rel(d_omega, P_zeta, g1, floor)
    verdict = "pass" if all(v < 1e-9 for v in res.values()) else "fail"
    return EquivalenceReport(res, verdict)


def solve_eigen_pair(mesh, k, bc="none", rel_tol=1e-9):
    """Nonzero spectra of the primal and dual eigenvalue schemes.

    Both pencils carry the projected mass, so infinite eigenvalues (modes
    invisible to the projection) are removed symmetrically before comparing.
    """
    lad = ladder(mesh)
    gs, _ = lad.abc(k, bc)
    A = gs.atlas
    DA = lad.d_matrix(k) @ A
    K1 = DA.T @ lad.p0(k + 1).gram @ DA
    P1 = lad.primal(k).p0_projection(lad.p0(k)) @ A
    M1 = P1.T @ lad.p0(k).gram @ P1
    primal_vals, primal_zero = pencil_nonzero_eigs(K1, M1, rel_tol)
    partner_bc = "homogeneous" if bc == "none" else "none"
    star = lad.whitney_star(k + 1, partner_bc)
    Az = star.atlas
    DZ = lad.delta_matrix(k + 1) @ Az
    K2 = DZ.T @ lad.p0(k).gram @ DZ
    P2 = lad.dual(k + 1).p0_projection(lad.p0(k + 1)) @ Az
    M2 = P2.T @ lad.p0(k + 1).gram @ P2
    dual_vals, dual_zero = pencil_nonzero_eigs(K2, M2, rel_tol)
    m = min(primal_vals.size, dual_vals.size)
    if primal_vals.size != dual_vals.size:
        gap = np.inf
    elif m == 0:
        gap = 0.0
    else:
        gap = float(
            np.max(np.abs(primal_vals - dual_vals) / np.maximum(np.abs(dual_vals), 1e-300))
        )
    report = EquivalenceReport(
        {"nonzero_spectrum_gap": gap, "count_primal": primal_vals.size, "count_dual": dual_vals.size},
        "pass" if gap < rel_tol * 100 else "fail",
    )
    return primal_vals, dual_vals, report, {"primal_zero_multiplicity": primal_zero, "dual_zero_multiplicity": dual_zero}


# -- Hodge-Laplace schemes ---------------------------------------------------------


def _harmonic_basis(mesh, k, flavor):
    H = harmonic_space(mesh, k, flavor)
    return H.subspace.basis


def _mixed_space(mesh, k):
    """One-field space: constants plus both contraction summands, constrained
    by the conforming partner one degree up and the nonconforming space one
    degree down.  Cached per mesh level."""
    lad = ladder(mesh)
    cached = lad._cache.get(("mixed-space", k))
    if cached is not None:
        return cached
    full = lad.full(k)
    from .spaces import d_pairing
    from .linalg import nullspace, orthonormalize

    rows = []
    B_up = d_pairing(full, lad.dual(k + 1))
    star = lad.whitney_star(k + 1, "homogeneous")
    rows.append((B_up @ star.atlas).T)
    abc_lo, _ = lad.abc(k - 1, "none")
    Delta_full = full.codiff_matrix(lad.p0(k - 1))
    term1 = Delta_full.T @ (
        lad.p0(k - 1).gram
        @ (lad.primal(k - 1).p0_projection(lad.p0(k - 1)) @ abc_lo.atlas)
    )
    D_lo = lad.d_matrix(k - 1) @ abc_lo.atlas
    Jk = full.p0_injection(lad.p0(k))
    term2 = full.gram() @ (Jk @ D_lo)
    rows.append((term1 - term2).T)
    C = np.vstack(rows)
    ns = nullspace(C / max(np.abs(C).max(initial=0.0), 1e-300))
    A = orthonormalize(ns.basis, full.gram())
    lad._cache[("mixed-space", k)] = (full, A)
    return full, A


def solve_hodge(mesh, k, load, scheme="complete"):
    """One of the four Hodge-Laplace discretizations at level 1 <= k <= n-1."""
    if not 1 <= k <= mesh.dim - 1:
        raise InvalidParameter("Hodge-Laplace schemes live at 1 <= k <= n-1")
    lad = ladder(mesh)
    F = load if isinstance(load, np.ndarray) else p0_moments(mesh, k, load)
    g0 = lad.p0(k).gram
    if scheme == "complete":
        star = lad.whitney_star(k + 1, "homogeneous")
        abc_lo, _ = lad.abc(k - 1, "none")
        H = _harmonic_basis(mesh, k, "abc")
        n0 = lad.p0(k).dim
        Az, As = star.atlas, abc_lo.atlas
        nz, ns_, nh = Az.shape[1], As.shape[1], H.shape[1]
        Pz = lad.dual(k + 1).p0_projection(lad.p0(k + 1)) @ Az
        Mpz = Pz.T @ lad.p0(k + 1).gram @ Pz
        Cz = g0 @ (lad.delta_matrix(k + 1) @ Az)
        Ps = lad.primal(k - 1).p0_projection(lad.p0(k - 1)) @ As
        Mps = Ps.T @ lad.p0(k - 1).gram @ Ps
        Cs = g0 @ (lad.d_matrix(k - 1) @ As)
        MH = g0 @ H
        dim = n0 + nz + ns_ + nh
        K = np.zeros((dim, dim))
        o = 0
        sl_o = slice(0, n0)
        sl_z = slice(n0, n0 + nz)
        sl_s = slice(n0 + nz, n0 + nz + ns_)
        sl_h = slice(n0 + nz + ns_, dim)
        K[sl_o, sl_z] = Cz
        K[sl_o, sl_s] = Cs
        K[sl_o, sl_h] = MH
        K[sl_z, sl_o] = Cz.T
        K[sl_z, sl_z] = -Mpz
        K[sl_s, sl_o] = Cs.T
        K[sl_s, sl_s] = -Mps
        K[sl_h, sl_o] = MH.T
        rhs = np.zeros(dim)
        rhs[sl_o] = F
        x, rel, cond = _solve(K, rhs, "hodge-complete")
        comps = {
            "omega": x[sl_o],
            "zeta": x[sl_z],
            "sigma": x[sl_s],
            "theta": x[sl_h],
            "zeta_broken": Az @ x[sl_z],
            "sigma_broken": As @ x[sl_s],
            "theta_p0": H @ x[sl_h],
        }
        return SchemeSolution("hodge-complete", comps, rel, cond, {"k": k, "moments": F})
    if scheme == "mixed_primal":
        abc_k, _ = lad.abc(k, "none")
        abc_lo, _ = lad.abc(k - 1, "none")
        H = _harmonic_basis(mesh, k, "abc")
        A, As = abc_k.atlas, abc_lo.atlas
        na, ns_, nh = A.shape[1], As.shape[1], H.shape[1]
        Pk = lad.primal(k).p0_projection(lad.p0(k)) @ A
        DA = lad.d_matrix(k) @ A
        Sk = DA.T @ lad.p0(k + 1).gram @ DA
        Ps = lad.primal(k - 1).p0_projection(lad.p0(k - 1)) @ As
        Mps = Ps.T @ lad.p0(k - 1).gram @ Ps
        Cs = Pk.T @ g0 @ (lad.d_matrix(k - 1) @ As)
        MH = Pk.T @ g0 @ H
        dim = na + ns_ + nh
        K = np.zeros((dim, dim))
        sl_o = slice(0, na)
        sl_s = slice(na, na + ns_)
        sl_h = slice(na + ns_, dim)
        K[sl_o, sl_o] = Sk
        K[sl_o, sl_s] = Cs
        K[sl_o, sl_h] = MH
        K[sl_s, sl_o] = Cs.T
        K[sl_s, sl_s] = -Mps
        K[sl_h, sl_o] = MH.T
        rhs = np.zeros(dim)
        rhs[sl_o] = Pk.T @ F
        x, rel, cond = _solve(K, rhs, "hodge-mixed-primal")
        comps = {
            "omega": x[sl_o],
            "sigma": x[sl_s],
            "theta": x[sl_h],
            "omega_broken": A @ x[sl_o],
            "sigma_broken": As @ x[sl_s],
            "theta_p0": H @ x[sl_h],
        }
        return SchemeSolution("hodge-mixed-primal", comps, rel, cond, {"k": k, "moments": F})
    if scheme == "mixed_dual":
        star_k = lad.whitney_star(k, "homogeneous")
        star_hi = lad.whitney_star(k + 1, "homogeneous")
        H = _harmonic_basis(mesh, k, "star0")
        A, Az = star_k.atlas, star_hi.atlas
        na, nz, nh = A.shape[1], Az.shape[1], H.shape[1]
        Pk = lad.dual(k).p0_projection(lad.p0(k)) @ A
        DeltaA = lad.delta_matrix(k) @ A
        Sk = DeltaA.T @ lad.p0(k - 1).gram @ DeltaA
        Pz = lad.dual(k + 1).p0_projection(lad.p0(k + 1)) @ Az
        Mpz = Pz.T @ lad.p0(k + 1).gram @ Pz
        Cz = Pk.T @ g0 @ (lad.delta_matrix(k + 1) @ Az)
        MH = Pk.T @ g0 @ H
        dim = na + nz + nh
        K = np.zeros((dim, dim))
        sl_o = slice(0, na)
        sl_z = slice(na, na + nz)
        sl_h = slice(na + nz, dim)
        K[sl_o, sl_o] = Sk
        K[sl_o, sl_z] = Cz
        K[sl_o, sl_h] = MH
        K[sl_z, sl_o] = Cz.T
        K[sl_z, sl_z] = -Mpz
        K[sl_h, sl_o] = MH.T
        rhs = np.zeros(dim)
        rhs[sl_o] = Pk.T @ F
        x, rel, cond = _solve(K, rhs, "hodge-mixed-dual")
        comps = {
            "omega": x[sl_o],
            "zeta": x[sl_z],
            "theta": x[sl_h],
            "omega_broken": A @ x[sl_o],
            "zeta_broken": Az @ x[sl_z],
            "theta_p0": H @ x[sl_h],
        }
        return SchemeSolution("hodge-mixed-dual", comps, rel, cond, {"k": k, "moments": F})
    if scheme == "lowest_primal":
        full, A = _mixed_space(mesh, k)
        # the multiplier space is cut out by the two pairing conditions, which
        # the discrete Hodge decomposition identifies with the harmonic space
        # of the nonconforming ladder
        H = _harmonic_basis(mesh, k, "abc")
        na, nh = A.shape[1], H.shape[1]
        DA = full.diff_matrix(lad.p0(k + 1)) @ A
        DeltaA = full.codiff_matrix(lad.p0(k - 1)) @ A
        S = DA.T @ lad.p0(k + 1).gram @ DA + DeltaA.T @ lad.p0(k - 1).gram @ DeltaA
        PV = full.p0_projection(lad.p0(k)) @ A
        MH = PV.T @ g0 @ H
        # harmonic part of the load
        if nh:
            c = np.linalg.solve(H.T @ g0 @ H, H.T @ F)
            F_eff = F - g0 @ (H @ c)
        else:
            F_eff = F
        dim = na + nh
        K = np.zeros((dim, dim))
        K[:na, :na] = S
        K[:na, na:] = MH
        K[na:, :na] = MH.T
        rhs = np.zeros(dim)
        rhs[:na] = PV.T @ F_eff
        x, rel, cond = _solve(K, rhs, "hodge-one-field")
        comps = {
            "omega": x[:na],
            "omega_broken": A @ x[:na],
            "multiplier": x[na:],
        }
        return SchemeSolution("hodge-lowest-primal", comps, rel, cond, {"k": k, "moments": F})
    raise InvalidParameter("unknown scheme %r" % (scheme,))


def verify_hodge_equivalences(mesh, k, sols):
    """Every cross-scheme identity as a relative residual.

    ``sols`` maps scheme tags ('complete', 'mixed_primal', 'mixed_dual',
    'lowest_primal') to their solutions for one common load.
    """
    lad = ladder(mesh)
    g0 = lad.p0(k).gram
    g_lo = lad.p0(k - 1).gram
    g_hi = lad.p0(k + 1).gram
    comp = sols["complete"]
    F = comp.meta["moments"]
    floor = max(float(np.linalg.norm(F)), 1e-14)
    Pf = _p0_coords_of_moments(lad, k, F)
    res = {}
    # dual vs complete
    d = sols["mixed_dual"]
    res["dual_theta"] = _rel(d.components["theta_p0"], comp.components["theta_p0"], g0, floor)
    res["dual_zeta"] = _rel(
        lad.dual(k + 1).p0_projection(lad.p0(k + 1)) @ d.components["zeta_broken"],
        lad.dual(k + 1).p0_projection(lad.p0(k + 1)) @ comp.components["zeta_broken"],
        g_hi,
        floor,
    )
    res["dual_zeta_full"] = _rel(
        d.components["zeta_broken"], comp.components["zeta_broken"],
        lad.dual(k + 1).gram(), floor,
    )
    res["dual_state"] = _rel(
        lad.dual(k).p0_projection(lad.p0(k)) @ d.components["omega_broken"],
        comp.components["omega"],
        g0,
        floor,
    )
    res["dual_costate"] = _rel(
        lad.delta_matrix(k) @ d.components["omega_broken"],
        lad.primal(k - 1).p0_projection(lad.p0(k - 1)) @ comp.components["sigma_broken"],
        g_lo,
        floor,
    )
    res["dual_balance"] = _rel(
        lad.delta_matrix(k + 1) @ d.components["zeta_broken"],
        Pf - lad.d_matrix(k - 1) @ comp.components["sigma_broken"] - comp.components["theta_p0"],
        g0,
        floor,
    )
    # primal vs complete
    p = sols["mixed_primal"]
    res["primal_theta"] = _rel(p.components["theta_p0"], comp.components["theta_p0"], g0, floor)
    res["primal_sigma"] = _rel(
        p.components["sigma_broken"], comp.components["sigma_broken"],
        lad.primal(k - 1).gram(), floor,
    )
    res["primal_state"] = _rel(
        lad.primal(k).p0_projection(lad.p0(k)) @ p.components["omega_broken"],
        comp.components["omega"],
        g0,
        floor,
    )
    res["primal_flux"] = _rel(
        lad.d_matrix(k) @ p.components["omega_broken"],
        lad.dual(k + 1).p0_projection(lad.p0(k + 1)) @ comp.components["zeta_broken"],
        g_hi,
        floor,
    )
    res["primal_balance"] = _rel(
        lad.d_matrix(k - 1) @ p.components["sigma_broken"],
        Pf - lad.delta_matrix(k + 1) @ comp.components["zeta_broken"] - comp.components["theta_p0"],
        g0,
        floor,
    )
    # primal vs dual
    res["cross_theta"] = _rel(d.components["theta_p0"], p.components["theta_p0"], g0, floor)
    res["cross_flux"] = _rel(
        lad.dual(k + 1).p0_projection(lad.p0(k + 1)) @ d.components["zeta_broken"],
        lad.d_matrix(k) @ p.components["omega_broken"],
        g_hi,
        floor,
    )
    res["cross_state"] = _rel(
        lad.dual(k).p0_projection(lad.p0(k)) @ d.components["omega_broken"],
        lad.primal(k).p0_projection(lad.p0(k)) @ p.components["omega_broken"],
        g0,
        floor,
    )
    res["cross_costate"] = _rel(
        lad.delta_matrix(k) @ d.components["omega_broken"],
        lad.primal(k - 1).p0_projection(lad.p0(k - 1)) @ p.components["sigma_broken"],
        g_lo,
        floor,
    )
    res["cross_balance"] = _rel(
        lad.delta_matrix(k + 1) @ d.components["zeta_broken"]
        + lad.d_matrix(k - 1) @ p.components["sigma_broken"],
        Pf - comp.components["theta_p0"],
        g0,
        floor,
    )
    # one-field scheme vs complete, cell by cell
    if "lowest_primal" in sols:
        m = sols["lowest_primal"]
        full, _ = _mixed_space(mesh, k)
        vec = m.components["omega_broken"]
        res["onefield_flux"] = _rel(
            full.diff_matrix(lad.p0(k + 1)) @ vec,
            lad.dual(k + 1).p0_projection(lad.p0(k + 1)) @ comp.components["zeta_broken"],
            g_hi,
            floor,
        )
        res["onefield_costate"] = _rel(
            full.codiff_matrix(lad.p0(k - 1)) @ vec,
            lad.primal(k - 1).p0_projection(lad.p0(k - 1)) @ comp.components["sigma_broken"],
            g_lo,
            floor,
        )
        res["onefield_state"] = _rel(
            full.p0_projection(lad.p0(k)) @ vec, comp.components["omega"], g0, floor
        )
    verdict = "pass" if all(v < 1e-9 for v in res.values()) else "fail"
    return EquivalenceReport(res, verdict)


def random_polynomial_load(mesh, k, degree=2, seed=0):
    """A global random polynomial k-form restricted to every cell."""
    from .forms import random_polyform

    rng = np.random.default_rng(seed)
    form = random_polyform(mesh.dim, k, degree, rng)
    return [form for _ in range(mesh.num_cells)]


def primal_energy_error(mesh, sol: SchemeSolution, exact_value_fn, exact_d_fn, degree=7):
    """Quadrature graph-norm error of a primal source solution vs a smooth field."""
    lad = ladder(mesh)
    k = sol.meta["k"]
    broken = lad.primal(k)
    vec = sol.components["omega_broken"]
    D = lad.d_matrix(k)
    dvec = D @ vec
    p0_hi = lad.p0(k + 1)
    err2 = 0.0
    for ci in range(mesh.num_cells):
        cell = mesh.cell_geometry(ci)
        pts, wts = cell_quadrature(cell, degree)
        form = broken.form_on_cell(vec, ci)
        dconst = np.array(
            [dvec[p0_hi.index(ci, mi)] for mi in range(p0_hi.ncomp)]
        )
        for p, w in zip(pts, wts):
            ev = form.coefficients_at(p) - np.asarray(exact_value_fn(p))
            ed = dconst - np.asarray(exact_d_fn(p))
            err2 += w * (float(ev @ ev) + float(ed @ ed))
    return float(np.sqrt(err2))
