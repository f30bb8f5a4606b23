"""Cell-local shape spaces and their structural decompositions.

Trimmed polynomial k-form spaces for both the differential and the
codifferential, the pairing-relative decomposition of a local space into its
pairing-null part and its twisted part, and the closed-form 2-D families
(lowest-degree H(div) shape functions, Crouzeix-Raviart companions, enriched
quadratics with the cubic edge bubble, enhanced linear fluxes).

Vector fields in the 2-D families are identified with 1-forms through the
flux map (u, v) -> u dy - v dx (normal traces) or the circulation map
(u, v) -> u dx + v dy (tangential traces).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionViolation, DegreeMismatch, InvalidParameter, Unsupported
from .forms import (
    CellGeometry,
    PolyForm,
    codifferential,
    exterior_derivative,
    hodge_star,
    inner_matrix,
    koszul,
    l2_inner,
    multiindices,
)
from .linalg import RANK_TOL, Subspace, gram_complement, infsup, nullspace


@dataclass
class LocalSpace:
    """A finite span of polynomial k-forms on one cell."""

    cell: CellGeometry
    k: int
    basis: list
    tag: str = ""
    op: str = "d"
    named: dict = field(default_factory=dict)

    def __post_init__(self):
        self._gram = None
        self._energy = None
        self._images = None

    @property
    def dim(self):
        return len(self.basis)

    @property
    def n(self):
        return self.cell.n

    def gram(self):
        if self._gram is None:
            self._gram = inner_matrix(self.basis, self.basis, self.cell)
        return self._gram

    def op_image(self, i):
        """d or delta of the i-th basis form (zero form at the chain ends)."""
        if self._images is None:
            self._images = [None] * self.dim
        img = self._images[i]
        if img is None:
            w = self.basis[i]
            if self.op == "d":
                img = (
                    PolyForm(self.n, self.k + 1)
                    if self.k >= self.n
                    else exterior_derivative(w)
                )
            else:
                img = PolyForm(self.n, max(self.k - 1, 0)) if self.k == 0 else codifferential(w)
            self._images[i] = img
        return img

    def energy_gram(self):
        if self._energy is None:
            images = [self.op_image(i) for i in range(self.dim)]
            self._energy = inner_matrix(images, images, self.cell)
        return self._energy

    def form_from_coeffs(self, coeffs):
        out = PolyForm(self.n, self.k)
        for c, w in zip(coeffs, self.basis):
            if c != 0.0:
                out = out + float(c) * w
        return out

    def expand(self, form, tol=1e-9):
        """Coefficients of ``form`` in this basis; error if it is not in the span."""
        if form.k != self.k or form.n != self.n:
            raise DegreeMismatch("form type does not match the local space")
        rhs = np.array([l2_inner(b, form, self.cell) for b in self.basis])
        coeffs = np.linalg.solve(self.gram(), rhs)
        resid2 = l2_inner(form, form, self.cell) - coeffs @ rhs
        scale = max(l2_inner(form, form, self.cell), 1e-30)
        if resid2 > tol * scale:
            raise AssumptionViolation("form lies outside the local space")
        return coeffs

    def is_independent(self, tol=RANK_TOL):
        G = self.gram() + self.energy_gram()
        w = np.linalg.eigvalsh(G)
        return w[0] > tol * max(w[-1], 1e-30)


def whitney_local(cell, k, variant="primal"):
    """Trimmed local space of k-forms.

    The primal variant spans the constants plus the centered Koszul image of
    the constant (k+1)-forms; the dual variant conjugates by the Hodge star
    and pairs with the codifferential.
    """
    n = cell.n
    if not 0 <= k <= n:
        raise InvalidParameter("degree %d outside 0..%d" % (k, n))
    basis = [PolyForm.basis_form(n, m) for m in multiindices(k, n)]
    if variant == "primal":
        for m in multiindices(k + 1, n):
            basis.append(koszul(PolyForm.basis_form(n, m), center=cell.centroid))
        return LocalSpace(cell, k, basis, tag="trimmed-primal", op="d")
    if variant == "dual":
        for m in multiindices(k - 1, n):
            w = hodge_star(PolyForm.basis_form(n, m))
            basis.append(hodge_star(koszul(w, center=cell.centroid)))
        return LocalSpace(cell, k, basis, tag="trimmed-dual", op="delta")
    raise InvalidParameter("variant must be primal or dual")


def mixed_local(cell, k):
    """Constants plus both Koszul summands: the one-field Hodge-Laplace space."""
    n = cell.n
    basis = [PolyForm.basis_form(n, m) for m in multiindices(k, n)]
    for m in multiindices(k + 1, n):
        basis.append(koszul(PolyForm.basis_form(n, m), center=cell.centroid))
    for m in multiindices(k - 1, n):
        w = hodge_star(PolyForm.basis_form(n, m))
        basis.append(hodge_star(koszul(w, center=cell.centroid)))
    return LocalSpace(cell, k, basis, tag="trimmed-mixed", op="d")


def polynomial_space(cell, k, degree):
    """All monomial k-forms of coefficient degree <= degree (coordinate space)."""
    n = cell.n
    basis = []
    from itertools import product

    for midx in multiindices(k, n):
        for expo in product(range(degree + 1), repeat=n):
            if sum(expo) <= degree:
                basis.append(PolyForm.monomial(n, k, expo, midx))
    return LocalSpace(cell, k, basis, tag="monomials-deg%d" % degree)


def star_local(space: LocalSpace):
    """Cellwise Hodge star of a local space; toggles between d and delta."""
    basis = [hodge_star(w) for w in space.basis]
    return LocalSpace(
        space.cell,
        space.n - space.k,
        basis,
        tag="star(%s)" % space.tag,
        op="delta" if space.op == "d" else "d",
        named={k: hodge_star(v) for k, v in space.named.items()},
    )


def local_range_kernel(space: LocalSpace, op=None):
    """Range and kernel of d or delta on a local space.

    The kernel is a subspace of the source coefficient space; the range is a
    subspace of the monomial coordinate space one degree up or down.
    """
    op = op or space.op
    n, k = space.n, space.k
    if op == "d":
        images = [
            PolyForm(n, k + 1) if k >= n else exterior_derivative(w)
            for w in space.basis
        ]
        target = polynomial_space(space.cell, min(k + 1, n), max(space_degree(space) - 1, 0))
    else:
        images = [
            PolyForm(n, max(k - 1, 0)) if k == 0 else codifferential(w)
            for w in space.basis
        ]
        target = polynomial_space(space.cell, max(k - 1, 0), max(space_degree(space) - 1, 0))
    E = inner_matrix(images, images, space.cell)
    kernel = _gram_sub(space.dim, nullspace(E).basis, space.gram())
    cols = []
    for img in images:
        if img.k > n:
            cols.append(np.zeros(target.dim))
        else:
            cols.append(target.expand(img, tol=1e-8))
    T = np.column_stack(cols) if cols else np.zeros((target.dim, 0))
    rng = Subspace.from_span(T, target.gram())
    return rng, kernel, target


def space_degree(space: LocalSpace):
    return max((w.poly_degree() for w in space.basis), default=0)


def pairing_matrix(primal: LocalSpace, dual: LocalSpace):
    """B[i, j] = <v_i, delta q_j> - <d v_i, q_j> on the cell (exact)."""
    if dual.k != primal.k + 1 or primal.cell is not dual.cell:
        raise DegreeMismatch("pairing needs a (k, k+1) pair on one cell")
    cell = primal.cell
    B = np.zeros((primal.dim, dual.dim))
    for j in range(dual.dim):
        dq = dual.op_image(j) if dual.op == "delta" else codifferential(dual.basis[j])
        for i in range(primal.dim):
            dv = primal.op_image(i) if primal.op == "d" else exterior_derivative(primal.basis[i])
            B[i, j] = l2_inner(primal.basis[i], dq, cell) - l2_inner(dv, dual.basis[j], cell)
    return B


@dataclass
class LocalDecomposition:
    """Pairing-relative structural split of a primal/dual local space pair."""

    primal: LocalSpace
    dual: LocalSpace
    pairing: np.ndarray
    P0: Subspace
    ring_P0: Subspace
    P0_perp: Subspace
    PB: Subspace
    ring_PB: Subspace
    PB_perp: Subspace
    dual_P0: Subspace
    dual_ring_P0: Subspace
    dual_P0_perp: Subspace
    dual_PB: Subspace
    dual_ring_PB: Subspace
    dual_PB_perp: Subspace


def _gram_sub(dim, raw_basis, gram):
    if raw_basis.shape[1] == 0:
        return Subspace.zero(dim, gram)
    return Subspace.from_span(raw_basis, gram)


def _side_decomposition(dim, gram, energy, pairing_rows, ambient_gram):
    if dim == 0:
        zero = Subspace.zero(0, ambient_gram)
        return zero, zero, zero, zero, zero, zero
    scale = max(np.abs(pairing_rows).max(initial=0.0), 1.0)
    e_scale = max(np.abs(energy).max(initial=0.0), 1e-30)
    P0 = _gram_sub(dim, nullspace(pairing_rows / scale).basis, ambient_gram)
    ring_rows = np.vstack([pairing_rows / scale, energy / e_scale])
    ring_P0 = _gram_sub(dim, nullspace(ring_rows).basis, ambient_gram)
    P0_perp = gram_complement(ring_P0, P0, ambient_gram)
    rows = []
    if ring_P0.dim:
        rows.append(ring_P0.basis.T @ gram)
    if P0.dim:
        rows.append(P0.basis.T @ energy)
    if rows:
        PB = _gram_sub(dim, nullspace(np.vstack(rows)).basis, ambient_gram)
    else:
        PB = Subspace.full(dim, ambient_gram)
    ring_PB_rows = [energy / e_scale]
    if ring_P0.dim:
        ring_PB_rows.append(ring_P0.basis.T @ gram)
    if P0.dim:
        ring_PB_rows.append(P0.basis.T @ energy)
    ring_PB = _gram_sub(dim, nullspace(np.vstack(ring_PB_rows)).basis, ambient_gram)
    PB_perp = gram_complement(ring_PB, PB, ambient_gram)
    return P0, ring_P0, P0_perp, PB, ring_PB, PB_perp


def decompose_local(primal: LocalSpace, dual: LocalSpace):
    """Split both sides of a local (k, k+1) pair by the adjointness pairing.

    The pairing-null parts collect the members invisible to the other space;
    the twisted parts carry the cross-cell coupling.  Dimensions are additive:
    P = P0 (+) PB on both sides.
    """
    B = pairing_matrix(primal, dual)
    Mp = primal.gram()
    Md = dual.gram()
    p_side = _side_decomposition(primal.dim, Mp, primal.energy_gram(), B.T, Mp)
    d_side = _side_decomposition(dual.dim, Md, dual.energy_gram(), B, Md)
    dec = LocalDecomposition(primal, dual, B, *p_side, *d_side)
    if dec.P0.dim + dec.PB.dim != primal.dim:
        raise AssumptionViolation("primal side does not split into P0 + PB")
    if dec.dual_P0.dim + dec.dual_PB.dim != dual.dim:
        raise AssumptionViolation("dual side does not split into P0 + PB")
    return dec


def local_constants(dec: LocalDecomposition):
    """(alpha_K, beta_K, gamma_K): the twisted-kernel inf-sup constants.

    alpha pairs the d-kernel of the primal twisted part with the delta-range
    of the dual twisted part inside L2 Lambda^k; beta is the mirror image one
    level up; gamma is the full twisted pairing inf-sup in graph norms.
    """
    primal, dual = dec.primal, dec.dual
    cell = primal.cell
    Mp = primal.gram()
    Md = dual.gram()
    # kernel of d inside PB (primal coordinates)
    ringPB = dec.ring_PB
    # delta-range of the dual twisted part, expanded in primal coordinates
    dual_imgs = []
    for j in range(dec.dual_PB.dim):
        form = dual.form_from_coeffs(dec.dual_PB.basis[:, j])
        dq = codifferential(form) if dual.k > 0 else PolyForm(dual.n, 0)
        dual_imgs.append(primal.expand(dq, tol=1e-7))
    R_delta = Subspace.from_span(
        np.column_stack(dual_imgs) if dual_imgs else np.zeros((primal.dim, 0)), Mp
    )
    if ringPB.dim == 0 and R_delta.dim == 0:
        alpha = 1.0
    else:
        alpha = infsup(ringPB, R_delta, Mp, check=False)
    # beta: kernel of delta in the dual twisted part vs d-range of primal PB
    ring_dual = dec.dual_ring_PB
    prim_imgs = []
    for j in range(dec.PB.dim):
        form = primal.form_from_coeffs(dec.PB.basis[:, j])
        dv = exterior_derivative(form) if primal.k < primal.n else PolyForm(primal.n, primal.k + 1)
        prim_imgs.append(dual.expand(dv, tol=1e-7))
    R_d = Subspace.from_span(
        np.column_stack(prim_imgs) if prim_imgs else np.zeros((dual.dim, 0)), Md
    )
    if ring_dual.dim == 0 and R_d.dim == 0:
        beta = 1.0
    else:
        beta = infsup(ring_dual, R_d, Md, check=False)
    gamma = twisted_graph_infsup(dec)
    return alpha, beta, gamma


def fast_local_constants(primal: LocalSpace, dual: LocalSpace, B=None):
    """(alpha_K, beta_K, gamma_K) on one cell, specialized to trivial null parts.

    Falls back to the full decomposition when either pairing-null part is
    nontrivial.  Plain numpy throughout; this runs once per cell on every
    mesh level, so call overhead matters.
    """
    B = pairing_matrix(primal, dual) if B is None else B
    scale = max(np.abs(B).max(), 1e-30)
    sv = np.linalg.svd(B / scale, compute_uv=False)
    p, q = primal.dim, dual.dim
    r = int(np.sum(sv > 1e-10))
    if r < min(p, q) or p != q:
        dec = decompose_local(primal, dual)
        return local_constants(dec)
    Mp, Ep = primal.gram(), primal.energy_gram()
    Md, Ed = dual.gram(), dual.energy_gram()

    def kernel(E):
        w, U = np.linalg.eigh(0.5 * (E + E.T))
        keep = w <= 1e-10 * max(w[-1], 1e-30)
        return U[:, keep]

    def span_cols(cols, M):
        # M-orthonormal basis of the column span
        C = cols.T @ M @ cols
        w, U = np.linalg.eigh(0.5 * (C + C.T))
        keep = w > 1e-10 * max(w[-1], 1e-30)
        return cols @ U[:, keep] / np.sqrt(w[keep])

    def pair_infsup(A, Bc, M):
        if A.shape[1] == 0 and Bc.shape[1] == 0:
            return 1.0
        if A.shape[1] != Bc.shape[1]:
            return 0.0
        s = np.linalg.svd(A.T @ M @ Bc, compute_uv=False)
        return float(np.clip(s[-1], 0.0, 1.0))

    ker_p = kernel(Ep)
    delta_imgs = np.column_stack(
        [primal.expand(dual.op_image(j)) for j in range(q)]
    ) if q else np.zeros((p, 0))
    alpha = pair_infsup(span_cols(ker_p, Mp), span_cols(delta_imgs, Mp), Mp)
    ker_d = kernel(Ed)
    d_imgs = np.column_stack(
        [dual.expand(primal.op_image(i)) for i in range(p)]
    ) if p else np.zeros((q, 0))
    beta = pair_infsup(span_cols(ker_d, Md), span_cols(d_imgs, Md), Md)
    Gp = Mp + Ep
    Gq = Md + Ed
    Lp = np.linalg.cholesky(0.5 * (Gp + Gp.T))
    Lq = np.linalg.cholesky(0.5 * (Gq + Gq.T))
    C = np.linalg.solve(Lp, np.linalg.solve(Lq, B.T).T)
    gamma = float(np.linalg.svd(C, compute_uv=False)[min(p, q) - 1])
    return alpha, beta, gamma


def twisted_graph_infsup(dec: LocalDecomposition):
    """inf-sup of the pairing between the twisted parts in graph norms."""
    P, Q = dec.PB, dec.dual_PB
    if P.dim == 0 or Q.dim == 0:
        return 1.0
    primal, dual = dec.primal, dec.dual
    Gp = primal.gram() + primal.energy_gram()
    Gq = dual.gram() + dual.energy_gram()
    Bt = P.basis.T @ dec.pairing @ Q.basis
    Lp = np.linalg.cholesky(0.5 * ((P.basis.T @ Gp @ P.basis) + (P.basis.T @ Gp @ P.basis).T))
    Lq = np.linalg.cholesky(0.5 * ((Q.basis.T @ Gq @ Q.basis) + (Q.basis.T @ Gq @ Q.basis).T))
    C = np.linalg.solve(Lp, np.linalg.solve(Lq, Bt.T).T)
    s = np.linalg.svd(C, compute_uv=False)
    return float(s[min(P.dim, Q.dim) - 1])


# -- 2-D closed-form families ---------------------------------------------------


def vec_to_flux(u, v):
    """(u, v) -> u dy - v dx: the normal-trace identification."""
    n = u.n
    return u.wedge(PolyForm.basis_form(n, (1,))) - v.wedge(PolyForm.basis_form(n, (0,)))


def vec_to_circulation(u, v):
    """(u, v) -> u dx + v dy: the tangential-trace identification."""
    n = u.n
    return u.wedge(PolyForm.basis_form(n, (0,))) + v.wedge(PolyForm.basis_form(n, (1,)))


def grad_components(f):
    df = exterior_derivative(f)
    return df.coefficient((0,)), df.coefficient((1,))


def curl_components(f):
    """curl of a scalar: (df/dy, -df/dx)."""
    fx, fy = grad_components(f)
    return fy, -1.0 * fx


def div_of(u, v):
    ux, _ = grad_components(u)
    _, vy = grad_components(v)
    return ux + vy


def rot_of(u, v):
    """dv/dx - du/dy."""
    vx, _ = grad_components(v)
    _, uy = grad_components(u)
    return vx - uy


def vec_inner(a, b, cell):
    return l2_inner(a[0], b[0], cell) + l2_inner(a[1], b[1], cell)


def edge_bubble(cell):
    """The cubic bubble sum of lambda_i lambda_j (lambda_i - lambda_j) over cyclic pairs."""
    lam = [cell.barycentric(i) for i in range(3)]
    out = PolyForm(2, 0)
    for i, j in ((0, 1), (1, 2), (2, 0)):
        out = out + lam[i].scale_by_polynomial(lam[j]).scale_by_polynomial(lam[i] - lam[j])
    return out


def interior_quadratic(cell):
    """lambda_1 lambda_2 + lambda_2 lambda_3 + lambda_3 lambda_1 - 1/6."""
    lam = [cell.barycentric(i) for i in range(3)]
    out = PolyForm(2, 0) + (-1.0 / 6.0) * PolyForm.one(2)
    for i, j in ((0, 1), (1, 2), (2, 0)):
        out = out + lam[i].scale_by_polynomial(lam[j])
    return out


def gallery_2d(cell, family):
    """Closed-form local bases of the 2-D example families.

    RT / RTperp carry vector fields as flux / circulation 1-forms; P1 is the
    barycentric basis; P2plus enriches the quadratic Lagrange basis with the
    cubic edge bubble; P1plus enriches the linear fluxes with its curl.
    """
    if cell.n != 2:
        raise Unsupported("the closed-form gallery is two-dimensional")
    lam = [cell.barycentric(i) for i in range(3)]
    if family == "P1":
        return LocalSpace(cell, 0, lam, tag="P1", op="d")
    if family == "RT":
        S = cell.volume
        basis = []
        for i in range(3):
            j, k = [m for m in range(3) if m != i]
            shift = cell.vertices[i] - cell.vertices[j] - cell.vertices[k]
            u = 0.5 / S * (PolyForm.coordinate(2, 0) + shift[0] * PolyForm.one(2))
            v = 0.5 / S * (PolyForm.coordinate(2, 1) + shift[1] * PolyForm.one(2))
            basis.append(vec_to_flux(u, v))
        return LocalSpace(cell, 1, basis, tag="RT", op="d")
    if family == "RTperp":
        basis = []
        for i in range(3):
            area2 = 2.0 * cell.volume
            opposite = [m for m in range(3) if m != i]
            e = cell.vertices[opposite[1]] - cell.vertices[opposite[0]]
            h = area2 / np.linalg.norm(e)
            ai = cell.vertices[i]
            u = (PolyForm.coordinate(2, 0) - ai[0] * PolyForm.one(2)) * (1.0 / h)
            v = (PolyForm.coordinate(2, 1) - ai[1] * PolyForm.one(2)) * (1.0 / h)
            # clockwise rotation makes the companion duality come out +1
            basis.append(vec_to_circulation(v, -1.0 * u))
        return LocalSpace(cell, 1, basis, tag="RTperp", op="d")
    if family == "P2plus":
        basis = [l.scale_by_polynomial(2.0 * l - PolyForm.one(2)) for l in lam]
        for i, j in ((0, 1), (0, 2), (1, 2)):
            basis.append(4.0 * lam[i].scale_by_polynomial(lam[j]))
        bubble = edge_bubble(cell)
        basis.append(bubble)
        named = {"psi_B": bubble, "psi_0": interior_quadratic(cell)}
        return LocalSpace(cell, 0, basis, tag="P2plus", op="d", named=named)
    if family == "P1plus":
        basis = []
        for comp in range(2):
            for l in lam:
                zero = PolyForm(2, 0)
                u, v = (l, zero) if comp == 0 else (zero, l)
                basis.append(vec_to_flux(u, v))
        bubble = edge_bubble(cell)
        cu, cv = curl_components(bubble)
        basis.append(vec_to_flux(cu, cv))
        return LocalSpace(
            cell, 1, basis, tag="P1plus", op="d", named={"curl_bubble": vec_to_flux(cu, cv)}
        )
    raise InvalidParameter("unknown family %r" % (family,))


def whitney_form(cell, local_vertices):
    """The Whitney form of a sub-simplex given by local vertex positions.

    ``local_vertices`` are indices into the cell's vertex list, ascending; the
    form has unit integral over the sub-simplex oriented that way.
    """
    import math as _math

    k = len(local_vertices) - 1
    lam = [cell.barycentric(i) for i in local_vertices]
    dlam = [cell.barycentric_differential(i) for i in local_vertices]
    out = PolyForm(cell.n, k)
    for j in range(k + 1):
        term = PolyForm.one(cell.n)
        wedge = None
        for m in range(k + 1):
            if m == j:
                continue
            wedge = dlam[m] if wedge is None else wedge.wedge(dlam[m])
        piece = lam[j] if wedge is None else wedge.scale_by_polynomial(lam[j])
        out = out + float(_math.factorial(k)) * ((-1) ** j) * piece
    return out
