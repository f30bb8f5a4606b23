"""Adjoint structure as matrix identities.

Builds the partially adjoint pair (nonconforming k-forms against the star
conjugate of the conforming forms one degree up), reports the structural
constants, and certifies the Helmholtz split, the three-way Hodge split,
the harmonic-space duality as an identity, and the closed-range index
bracket across refinement.
"""

from padfeec.adjoint import (
    base_pair_report,
    harmonic_space,
    helmholtz_check,
    hodge_check,
    pl_duality_check,
    quantified_crt_check,
    whitney_pair,
)
from padfeec.mesh import generate_structured

box = generate_structured(2, 4)
hole = generate_structured(2, 8, "hole")

print("=== base-pair constants (box, k = 0) ===\n")
rep = base_pair_report(box, 0)
print("two-sided inf-sups    alpha = %.12f, beta = %.12f" % (rep.alpha, rep.beta))
print("graph-pairing inf-sup gamma = %.6f" % rep.gamma)
print("broken-space closed-range index: %.4f (scales with the mesh size)" % rep.icr_tilde)
print("annihilator cores: %d / %d (trivial, as the theory demands)\n" % (rep.uM_dim, rep.uN_dim))

print("=== Helmholtz and Hodge splits ===\n")
pair = whitney_pair(box, 1, "none")
h = helmholtz_check(pair)
print("Helmholtz verdict:", h.verdict, " residual %.1e, angle %.1e" % (
    h.orthogonality_residual, h.identity_angle))
print(" pieces:", h.rhs_dims)
hd = hodge_check(hole, 1)
print("Hodge verdict (hole):", hd.verdict)
for bc, sub in hd.detail.items():
    print("  bc=%-12s %s" % (bc, sub.rhs_dims))

print("\n=== harmonic spaces and their duality as an identity ===\n")
print("box  harmonic dim (k=1):", harmonic_space(box, 1, "abc").dim)
print("hole harmonic dim (k=1):", harmonic_space(hole, 1, "abc").dim, " (the hole)")
pl = pl_duality_check(hole, 1)
print("duality with the starred conforming space:", pl.verdict,
      " angle %.2e" % pl.identity_angle)

print("\n=== quantified closed-range agreement under refinement ===\n")
prev = None
for N in (4, 8, 16):
    mesh = generate_structured(2, N)
    rep = base_pair_report(mesh, 0)
    icr_p, icr_a, ok = quantified_crt_check(whitney_pair(mesh, 0, "none"), rep)
    gap = abs(icr_p - icr_a)
    note = "" if prev is None else "  (decay factor %.2f)" % (prev / gap)
    print("N=%2d  icr = %.8f vs %.8f, gap %.2e, bracket holds: %s%s"
          % (N, icr_p, icr_a, gap, ok, note))
    prev = gap
print("\nboth indices approach 1/pi = 0.31830989 from above")
