"""Global finite element spaces over a simplicial mesh.

Everything lives in broken coordinates: a broken space is the block product of
one local space per cell, and every global space (conforming Whitney forms,
their star conjugates, the nonconforming spaces cut out by pairing
constraints against a conforming partner) is an atlas matrix whose columns
are broken coefficient vectors.  Differentials of all the trimmed families
land in piecewise-constant forms, so ranges, kernels and decompositions are
computed inside small piecewise-constant coordinate spaces.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AssemblyError,
    AssumptionViolation,
    InvalidParameter,
    ToleranceFailure,
)
from .forms import PolyForm, hodge_star, l2_inner, multiindices, star_sign
from .linalg import RANK_TOL, Subspace, nullspace, orthonormalize, rank
from .local import (
    decompose_local,
    mixed_local,
    pairing_matrix,
    whitney_local,
    whitney_form,
)


class P0Space:
    """Piecewise-constant k-forms: the coordinate space of all differentials.

    Basis ordering is (cell, multi-index) lexicographic; the L2 Gram is the
    diagonal of cell volumes since the coordinate coframe is orthonormal.
    """

    def __init__(self, mesh, k):
        self.mesh = mesh
        self.k = k
        self.midx = multiindices(k, mesh.dim)
        self.ncomp = len(self.midx)
        self.dim = self.ncomp * mesh.num_cells
        vols = np.array([mesh.cell_geometry(i).volume for i in range(mesh.num_cells)])
        self.volumes = vols
        self.gram = np.diag(np.repeat(vols, self.ncomp))

    def index(self, cell, comp):
        return cell * self.ncomp + comp

    def star_matrix(self):
        """Signed permutation onto the piecewise-constant (n-k)-forms."""
        n = self.mesh.dim
        target = multiindices(n - self.k, n)
        pos = {m: i for i, m in enumerate(target)}
        S = np.zeros((len(target) * self.mesh.num_cells, self.dim))
        for ci in range(self.mesh.num_cells):
            for mi, m in enumerate(self.midx):
                sign, comp = star_sign(m, n)
                S[ci * len(target) + pos[comp], self.index(ci, mi)] = sign
        return S

    def form_on_cell(self, vec, cell):
        out = PolyForm(self.mesh.dim, self.k)
        for mi, m in enumerate(self.midx):
            c = vec[self.index(cell, mi)]
            if c != 0.0:
                out = out + float(c) * PolyForm.basis_form(self.mesh.dim, m)
        return out


class BrokenSpace:
    """Block product of one local space per cell."""

    def __init__(self, mesh, k, factory, name):
        self.mesh = mesh
        self.k = k
        self.name = name
        self.locals = [factory(mesh.cell_geometry(i)) for i in range(mesh.num_cells)]
        self.block_dims = [sp.dim for sp in self.locals]
        self.offsets = np.concatenate([[0], np.cumsum(self.block_dims)])
        self.dim = int(self.offsets[-1])
        self._gram = None

    def cell_slice(self, i):
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))

    def gram(self):
        if self._gram is None:
            G = np.zeros((self.dim, self.dim))
            for i, sp in enumerate(self.locals):
                s = self.cell_slice(i)
                G[s, s] = sp.gram()
            self._gram = G
        return self._gram

    def _cached(self, name, builder):
        store = getattr(self, "_matrix_cache", None)
        if store is None:
            store = {}
            self._matrix_cache = store
        if name not in store:
            store[name] = builder()
        return store[name]

    def form_on_cell(self, vec, i):
        return self.locals[i].form_from_coeffs(vec[self.cell_slice(i)])

    def expand_field(self, forms, tol=1e-9):
        """Broken vector of a per-cell field that lies in the local spaces."""
        vec = np.zeros(self.dim)
        for i, form in enumerate(forms):
            vec[self.cell_slice(i)] = self.locals[i].expand(form, tol=tol)
        return vec

    def p0_injection(self, p0: P0Space):
        """Inclusion of piecewise constants; they are the leading local basis."""

        def build():
            J = np.zeros((self.dim, p0.dim))
            for i in range(self.mesh.num_cells):
                off = int(self.offsets[i])
                for mi in range(p0.ncomp):
                    J[off + mi, p0.index(i, mi)] = 1.0
            return J

        return self._cached("inject", build)

    def p0_projection(self, p0: P0Space):
        """L2 projection onto piecewise constants, in coordinates."""

        def build():
            P = np.zeros((p0.dim, self.dim))
            for i, sp in enumerate(self.locals):
                vol = p0.volumes[i]
                off = int(self.offsets[i])
                for mi, m in enumerate(p0.midx):
                    unit = PolyForm.basis_form(self.mesh.dim, m)
                    for j, w in enumerate(sp.basis):
                        P[p0.index(i, mi), off + j] = l2_inner(unit, w, sp.cell) / vol
            return P

        return self._cached("project", build)

    def diff_matrix(self, target: P0Space):
        """Matrix of the cellwise exterior derivative into constant forms."""
        from .forms import exterior_derivative

        D = np.zeros((target.dim, self.dim))
        n = self.mesh.dim
        for i, sp in enumerate(self.locals):
            off = int(self.offsets[i])
            for j, w in enumerate(sp.basis):
                if sp.k >= n:
                    continue
                dw = exterior_derivative(w)
                if dw.poly_degree() > 0:
                    raise AssemblyError("differential is not piecewise constant")
                for (expo, midx), c in dw.terms.items():
                    D[target.index(i, target.midx.index(midx)), off + j] = c
        return D

    def codiff_matrix(self, target: P0Space):
        """Matrix of the cellwise codifferential into constant forms."""
        from .forms import codifferential

        D = np.zeros((target.dim, self.dim))
        for i, sp in enumerate(self.locals):
            off = int(self.offsets[i])
            for j, w in enumerate(sp.basis):
                if sp.k == 0:
                    continue
                dw = codifferential(w)
                if dw.poly_degree() > 0:
                    raise AssemblyError("codifferential is not piecewise constant")
                for (expo, midx), c in dw.terms.items():
                    D[target.index(i, target.midx.index(midx)), off + j] = c
        return D


def d_pairing(primal: BrokenSpace, dual: BrokenSpace):
    """Block pairing B[i, j] = <v_i, delta q_j> - <d v_i, q_j>, assembled cellwise."""
    if dual.k != primal.k + 1:
        raise AssemblyError("pairing needs degrees k and k+1")
    B = np.zeros((primal.dim, dual.dim))
    for i in range(primal.mesh.num_cells):
        sp, sq = primal.cell_slice(i), dual.cell_slice(i)
        B[sp, sq] = pairing_matrix(primal.locals[i], dual.locals[i])
    return B


def block_d_expand(source: BrokenSpace, target: BrokenSpace):
    """Cellwise exterior derivative from one broken space into another.

    The image of every source basis form must lie in the target local space.
    """
    from .forms import exterior_derivative

    if target.k != source.k + 1:
        raise AssemblyError("derivative must raise the degree by one")
    D = np.zeros((target.dim, source.dim))
    n = source.mesh.dim
    for i in range(source.mesh.num_cells):
        src, tgt = source.locals[i], target.locals[i]
        cols = []
        for w in src.basis:
            if src.k >= n:
                cols.append(np.zeros(tgt.dim))
            else:
                cols.append(tgt.expand(exterior_derivative(w)))
        D[target.cell_slice(i), source.cell_slice(i)] = np.column_stack(cols)
    return D


def star_block_matrix(source: BrokenSpace, target: BrokenSpace):
    """Cellwise Hodge star as a map between broken coordinate spaces."""
    if source.k + target.k != source.mesh.dim:
        raise AssemblyError("star must map degree k to n-k")
    S = np.zeros((target.dim, source.dim))
    for i in range(source.mesh.num_cells):
        src, tgt = source.locals[i], target.locals[i]
        block = np.column_stack([tgt.expand(hodge_star(w)) for w in src.basis])
        S[target.cell_slice(i), source.cell_slice(i)] = block
    return S


@dataclass
class GlobalSpace:
    """A subspace of a broken space given by an atlas of coefficient columns."""

    broken: BrokenSpace
    atlas: np.ndarray
    kind: str
    bc: str = "none"
    anchors: list = field(default_factory=list)
    constraint_rank: int = 0

    @property
    def mesh(self):
        return self.broken.mesh

    @property
    def k(self):
        return self.broken.k

    @property
    def dim(self):
        return self.atlas.shape[1]

    def gram_l2(self):
        return self.atlas.T @ self.broken.gram() @ self.atlas

    def gram_energy(self):
        """Gram of the applicable differential; zero blocks at the chain ends."""
        lad = ladder(self.mesh)
        if self.broken.name in ("primal", "full"):
            if self.k >= self.mesh.dim:
                return np.zeros((self.dim, self.dim))
            D = self.broken.diff_matrix(lad.p0(self.k + 1)) @ self.atlas
            return D.T @ lad.p0(self.k + 1).gram @ D
        if self.k == 0:
            return np.zeros((self.dim, self.dim))
        D = self.broken.codiff_matrix(lad.p0(self.k - 1)) @ self.atlas
        return D.T @ lad.p0(self.k - 1).gram @ D

    def subspace(self):
        cached = getattr(self, "_subspace", None)
        if cached is None:
            cached = Subspace.from_span(self.atlas, self.broken.gram())
            self._subspace = cached
        return cached


@dataclass
class ConstraintSet:
    """Rows are the pairing functionals against a conforming partner basis."""

    matrix: np.ndarray
    partner: GlobalSpace

    @property
    def rank(self):
        return rank(self.matrix)


@dataclass
class BasisFunction:
    category: str  # "type-I" or "type-II"
    anchor: tuple  # ("cell", index) or ("subsimplex", vertices)
    vector: np.ndarray


@dataclass
class BasisAtlas:
    broken: BrokenSpace
    functions: list

    @property
    def dim(self):
        return len(self.functions)

    def matrix(self):
        if not self.functions:
            return np.zeros((self.broken.dim, 0))
        return np.column_stack([f.vector for f in self.functions])

    def count(self, category):
        return sum(1 for f in self.functions if f.category == category)


class DeRhamLadder:
    """Per-mesh cache of broken spaces, conforming atlases and derived maps."""

    def __init__(self, mesh):
        self.mesh = mesh
        self._cache = {}

    def _get(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    def p0(self, k):
        return self._get(("p0", k), lambda: P0Space(self.mesh, k))

    def primal(self, k):
        return self._get(
            ("primal", k),
            lambda: BrokenSpace(
                self.mesh, k, lambda c: whitney_local(c, k, "primal"), "primal"
            ),
        )

    def dual(self, k):
        return self._get(
            ("dual", k),
            lambda: BrokenSpace(
                self.mesh, k, lambda c: whitney_local(c, k, "dual"), "dual"
            ),
        )

    def full(self, k):
        return self._get(
            ("full", k),
            lambda: BrokenSpace(self.mesh, k, lambda c: mixed_local(c, k), "full"),
        )

    def d_matrix(self, k, variant="primal"):
        source = getattr(self, variant)(k)
        return self._get(
            ("d", k, variant), lambda: source.diff_matrix(self.p0(k + 1))
        )

    def delta_matrix(self, k, variant="dual"):
        source = getattr(self, variant)(k)
        return self._get(
            ("delta", k, variant), lambda: source.codiff_matrix(self.p0(k - 1))
        )

    def pairing(self, k):
        """Pairing of broken primal k-forms with broken dual (k+1)-forms."""
        return self._get(
            ("pairing", k), lambda: d_pairing(self.primal(k), self.dual(k + 1))
        )

    def whitney(self, k, bc="none"):
        return self._get(("whitney", k, bc), lambda: conforming_whitney(self.mesh, k, bc, self))

    def whitney_star(self, k, bc="none"):
        return self._get(
            ("whitney-star", k, bc),
            lambda: star_space(self.whitney(self.mesh.dim - k, bc), self),
        )

    def abc(self, k, bc="none"):
        return self._get(
            ("abc", k, bc), lambda: abcfes_by_constraints(self.mesh, k, bc, self)
        )

    def abc_atlas(self, k, bc="none"):
        return self._get(
            ("abc-atlas", k, bc), lambda: abcfes_local_basis(self.mesh, k, bc, self)
        )

    def local_decompositions(self, k):
        def build():
            out = []
            for i in range(self.mesh.num_cells):
                out.append(
                    decompose_local(self.primal(k).locals[i], self.dual(k + 1).locals[i])
                )
            return out

        return self._get(("localdec", k), build)


_LADDERS = {}


def ladder(mesh):
    key = id(mesh)
    entry = _LADDERS.get(key)
    if entry is None or entry.mesh is not mesh:
        entry = DeRhamLadder(mesh)
        _LADDERS[key] = entry
    return entry


# -- space constructors ----------------------------------------------------------


def broken_space(mesh, k, variant="primal"):
    """The whole broken trimmed space as a GlobalSpace (identity atlas)."""
    lad = ladder(mesh)
    broken = getattr(lad, variant)(k)
    return GlobalSpace(broken, np.eye(broken.dim), kind="broken")


def conforming_whitney(mesh, k, bc="none", lad=None):
    """Conforming Whitney k-forms: one degree of freedom per k-sub-simplex.

    With homogeneous boundary conditions the boundary sub-simplices are
    dropped.  Columns are expanded per cell in the trimmed local bases; the
    atlas is deterministic because degrees of freedom are sorted by their
    vertex tuples.
    """
    lad = lad or ladder(mesh)
    broken = lad.primal(k)
    table = mesh.subsimplices(k)
    order = sorted(range(table.count), key=lambda i: table.simplices[i])
    if bc == "homogeneous":
        dofs = [i for i in order if not table.boundary[i]]
    elif bc == "none":
        dofs = order
    else:
        raise InvalidParameter("bc must be 'none' or 'homogeneous'")
    A = np.zeros((broken.dim, len(dofs)))
    anchors = []
    for col, sid in enumerate(dofs):
        sub = table.simplices[sid]
        anchors.append(sub)
        for ci, cell in enumerate(mesh.cells):
            if not set(sub) <= set(cell):
                continue
            local_ids = [cell.index(v) for v in sub]
            w = whitney_form(mesh.cell_geometry(ci), local_ids)
            A[broken.cell_slice(ci), col] = broken.locals[ci].expand(w)
    return GlobalSpace(broken, A, kind="conforming" if bc == "none" else "conforming0",
                       bc=bc, anchors=anchors)


def star_space(space: GlobalSpace, lad=None):
    """Cellwise Hodge star of a conforming space; degree n-k, kind 'star'."""
    lad = lad or ladder(space.mesh)
    n = space.mesh.dim
    target = lad.dual(n - space.k)
    S = star_block_matrix(space.broken, target)
    return GlobalSpace(
        target, S @ space.atlas, kind="star", bc=space.bc, anchors=list(space.anchors)
    )


def abcfes_by_constraints(mesh, k, bc="none", lad=None):
    """Nonconforming space cut out of the broken trimmed k-forms.

    The constraints pair against the star-conjugated conforming space one
    degree up, with the opposite boundary treatment; at the top degree the
    space is the whole broken constant space.
    """
    lad = lad or ladder(mesh)
    broken = lad.primal(k)
    if k == mesh.dim:
        gs = GlobalSpace(broken, np.eye(broken.dim), kind="abc" if bc == "none" else "abc0", bc=bc)
        return gs, ConstraintSet(np.zeros((0, broken.dim)), None)
    partner_bc = "homogeneous" if bc == "none" else "none"
    partner = lad.whitney_star(k + 1, partner_bc)
    B = lad.pairing(k)
    C = (B @ partner.atlas).T
    if C.shape[0]:
        s = np.linalg.svd(C, compute_uv=False)
        r = int(np.sum(s > RANK_TOL * s[0])) if s[0] > 0 else 0
        if 0 < r < len(s) and s[r - 1] / max(s[r], 1e-300) < 1e3:
            raise ToleranceFailure("constraint rank detection is ambiguous")
    else:
        r = 0
    space = nullspace(C)
    A = orthonormalize(space.basis, broken.gram())
    gs = GlobalSpace(
        broken,
        A,
        kind="abc" if bc == "none" else "abc0",
        bc=bc,
        constraint_rank=r,
    )
    gs._subspace = Subspace(broken.dim, A, broken.gram())
    return gs, ConstraintSet(C, partner)


def abcfes_local_basis(mesh, k, bc="none", lad=None):
    """Compactly supported basis of the nonconforming space.

    Type-I functions are single-cell: the local pairing-null members plus the
    members annihilating every overlapping conforming-partner functional.
    Type-II functions chain the dual-paired cell representatives over the
    support of one partner basis function, two adjacent cells at a time, and
    close the single global pairing condition.
    """
    lad = lad or ladder(mesh)
    broken = lad.primal(k)
    if k == mesh.dim:
        funcs = []
        for ci in range(mesh.num_cells):
            s = broken.cell_slice(ci)
            for j in range(broken.block_dims[ci]):
                vec = np.zeros(broken.dim)
                vec[s.start + j] = 1.0
                funcs.append(BasisFunction("type-I", ("cell", ci), vec))
        return BasisAtlas(broken, funcs)
    partner_bc = "homogeneous" if bc == "none" else "none"
    partner = lad.whitney_star(k + 1, partner_bc)
    B = lad.pairing(k)
    decs = lad.local_decompositions(k)
    # cells supporting each partner basis function
    support = [[] for _ in range(partner.dim)]
    for j, sub in enumerate(partner.anchors):
        for ci, cell in enumerate(mesh.cells):
            if set(sub) <= set(cell):
                support[j].append(ci)
    cell_funcs = {ci: [] for ci in range(mesh.num_cells)}
    for j in range(partner.dim):
        for ci in support[j]:
            cell_funcs[ci].append(j)
    funcs = []
    reps = {}
    for ci in range(mesh.num_cells):
        s = broken.cell_slice(ci)
        dec = decs[ci]
        I2 = cell_funcs[ci]
        PB = dec.PB.basis  # local coordinates of the twisted part
        if dec.P0.dim:
            for col in range(dec.P0.dim):
                vec = np.zeros(broken.dim)
                vec[s] = dec.P0.basis[:, col]
                funcs.append(BasisFunction("type-I", ("cell", ci), vec))
        # functionals of the overlapping partner columns, restricted to PB
        L = (B[s, :] @ partner.atlas[:, I2]).T @ PB if I2 else np.zeros((0, PB.shape[1]))
        if I2:
            if rank(L, tol=1e-10) < len(I2):
                raise AssumptionViolation(
                    "partner restrictions dependent on cell %d" % ci
                )
            V = np.linalg.pinv(L)  # columns: local representatives per functional
            for j_local, j in enumerate(I2):
                reps[(ci, j)] = PB @ V[:, j_local]
            null_local = nullspace(L).basis
        else:
            null_local = np.eye(PB.shape[1])
        for col in range(null_local.shape[1]):
            vec = np.zeros(broken.dim)
            vec[s] = PB @ null_local[:, col]
            funcs.append(BasisFunction("type-I", ("cell", ci), vec))
    for j in range(partner.dim):
        cells = support[j]
        if len(cells) < 2:
            continue
        anchor = partner.anchors[j]
        ordered = cells
        if len(anchor) == 1 and mesh.dim == 2:
            patch = mesh.vertex_patch(anchor[0]).cells
            ordered = [c for c in patch if c in cells]
        for a, b in zip(ordered, ordered[1:]):
            vec = np.zeros(broken.dim)
            vec[broken.cell_slice(a)] += reps[(a, j)]
            vec[broken.cell_slice(b)] -= reps[(b, j)]
            funcs.append(BasisFunction("type-II", ("subsimplex", anchor), vec))
    return BasisAtlas(broken, funcs)


# -- verification helpers ---------------------------------------------------------


def verify_trace_continuity(space: GlobalSpace, tol=1e-11):
    """Worst inter-cell trace mismatch of the atlas columns on shared facets.

    The trace of each column is pulled back to every interior sub-simplex of
    dimension >= k from both owner cells with one shared parametrization; the
    mismatch is measured in the parametric L2 norm.
    """
    from .forms import trace_on, reference_simplex

    mesh = space.mesh
    broken = space.broken
    k = space.k
    if k == mesh.dim:
        return 0.0
    facets = mesh.subsimplices(mesh.dim - 1)
    owners = {}
    for ci in range(mesh.num_cells):
        for gid in facets.cell_incidence[ci]:
            owners.setdefault(gid, []).append(ci)
    worst = 0.0
    ref = reference_simplex(mesh.dim - 1)
    for gid, cells in owners.items():
        if len(cells) != 2:
            continue
        sub = facets.simplices[gid]
        coords = mesh.vertices[list(sub)]
        for col in range(space.dim):
            tr = []
            for ci in cells:
                form = broken.form_on_cell(space.atlas[:, col], ci)
                tr.append(trace_on(form, coords))
            diff = tr[0] - tr[1]
            err2 = 0.0
            for (ea, ma), ca in diff.terms.items():
                for (eb, mb), cb in diff.terms.items():
                    if ma == mb:
                        expo = tuple(x + y for x, y in zip(ea, eb))
                        err2 += ca * cb * ref.monomial_integral(expo)
            worst = max(worst, math.sqrt(abs(err2)))
    return worst


def space_summary(space: GlobalSpace, atlas: BasisAtlas = None):
    summary = {
        "kind": space.kind,
        "bc": space.bc,
        "degree": space.k,
        "dim": space.dim,
        "broken_dim": space.broken.dim,
        "constraint_rank": space.constraint_rank,
    }
    if atlas is not None:
        summary["type_I_count"] = atlas.count("type-I")
        summary["type_II_count"] = atlas.count("type-II")
    return summary
