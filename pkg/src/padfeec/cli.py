"""Command-line driver: mesh generation, space building, verification suites
and scheme solves, with JSON/CSV reports.

Subcommands: mesh gen|info, space build, verify base-pair|decomposition|
duality|complex|interp, solve source|eigen|hodge, suite all.  Configuration
precedence is CLI flags over a JSON config file over defaults; the worker
cap honours PADFEEC_THREADS.
"""

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import PadfeecError
from .mesh import Mesh, generate_structured, shape_report
from .report import CheckRecord, Report, RunConfig, emit


def worker_count():
    raw = os.environ.get("PADFEEC_THREADS", "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError:
            return 1
    return os.cpu_count() or 1


def parse_mesh(config: RunConfig):
    if config.mesh_file:
        return Mesh.load(config.mesh_file)
    spec = config.mesh
    try:
        kind, _, size = spec.partition(":")
        n = int(size)
    except ValueError:
        raise PadfeecError("mesh spec must look like box:4, hole:8 or tetbox:2")
    if kind == "box":
        return generate_structured(2, n, "box")
    if kind == "hole":
        return generate_structured(2, n, "hole")
    if kind == "tetbox":
        return generate_structured(3, n, "box")
    raise PadfeecError("unknown mesh family %r" % (kind,))


def parse_load(mesh, k, spec):
    from .solve import p0_moments, random_polynomial_load

    if spec == "zero":
        from .spaces import ladder

        return np.zeros(ladder(mesh).p0(k).dim)
    if spec.startswith("poly:"):
        return random_polynomial_load(mesh, k, seed=int(spec.split(":", 1)[1]))
    if spec == "trig":
        from .forms import multiindices

        comps = len(multiindices(k, mesh.dim))

        def fn(p):
            base = math.cos(math.pi * p[0]) * math.cos(math.pi * p[1])
            return [base] * comps

        return p0_moments(mesh, k, fn)
    raise PadfeecError("unknown load %r (use zero, poly:<seed> or trig)" % (spec,))


# -- subcommand implementations ---------------------------------------------------


def cmd_mesh_gen(config, report):
    mesh = parse_mesh(config)
    if config.out:
        mesh.save(config.out)
        config.out = ""  # the report goes to stdout; --out names the mesh file
    report.add(
        CheckRecord(
            "mesh-gen",
            "pass",
            numbers={
                "vertices": mesh.num_vertices,
                "cells": mesh.num_cells,
                "volume": mesh.total_volume(),
            },
            inputs={"mesh": config.mesh},
        )
    )


def cmd_mesh_info(config, report):
    mesh = parse_mesh(config)
    shape = shape_report(mesh)
    tables = {k: mesh.subsimplices(k).count for k in range(mesh.dim + 1)}
    euler = sum(((-1) ** k) * c for k, c in tables.items())
    report.add(
        CheckRecord(
            "mesh-info",
            "pass",
            numbers={
                "dim": mesh.dim,
                "vertices": mesh.num_vertices,
                "cells": mesh.num_cells,
                "volume": mesh.total_volume(),
                "euler_characteristic": euler,
                "min_angle_deg": shape["min_angle_deg"],
                "max_aspect_ratio": shape["max_aspect_ratio"],
                "boundary_vertex_hypothesis": mesh.satisfies_vertex_hypothesis,
                **{"count_dim_%d" % k: c for k, c in tables.items()},
            },
        )
    )


def cmd_space_build(config, report, kind):
    from .spaces import (
        broken_space,
        conforming_whitney,
        ladder,
        space_summary,
        star_space,
        verify_trace_continuity,
    )

    mesh = parse_mesh(config)
    lad = ladder(mesh)
    if kind == "broken":
        gs = broken_space(mesh, config.k, "primal")
        summary = space_summary(gs)
        verdict = "pass"
    elif kind == "conforming":
        gs = conforming_whitney(mesh, config.k, config.bc)
        mismatch = verify_trace_continuity(gs)
        summary = space_summary(gs)
        summary["trace_mismatch"] = mismatch
        verdict = "pass" if mismatch < 1e-11 else "fail"
    elif kind == "star":
        gs = star_space(conforming_whitney(mesh, mesh.dim - config.k, config.bc))
        summary = space_summary(gs)
        verdict = "pass"
    elif kind == "abc":
        gs, cons = lad.abc(config.k, config.bc)
        atlas = lad.abc_atlas(config.k, config.bc)
        summary = space_summary(gs, atlas)
        verdict = "pass" if atlas.dim == gs.dim else "fail"
    else:
        raise PadfeecError("unknown space kind %r" % (kind,))
    report.add(CheckRecord("space-build-%s" % kind, verdict, numbers=summary))


def cmd_verify_base_pair(config, report, levels=None):
    from .adjoint import base_pair_report, quantified_crt_check, whitney_pair

    if levels:
        kind = config.mesh.split(":", 1)[0]
        specs = ["%s:%d" % (kind, n) for n in levels]
    else:
        specs = [config.mesh]
    for spec in specs:
        sub = RunConfig(**{**config.to_dict(), "mesh": spec})
        mesh = parse_mesh(sub)
        rep = base_pair_report(mesh, config.k, eig_tol=config.eig_tol)
        pair = whitney_pair(mesh, config.k, config.bc)
        icr_p, icr_a, bound_ok = quantified_crt_check(pair, rep, eig_tol=config.eig_tol)
        verdict = "pass" if all(rep.assumptions_ok.values()) and bound_ok else "fail"
        report.add(
            CheckRecord(
                "base-pair" if not levels else "base-pair-%s" % spec,
                verdict,
                numbers={
                    "alpha": rep.alpha,
                    "beta": rep.beta,
                    "gamma": rep.gamma,
                    "icr_broken": rep.icr_tilde,
                    "icr_broken_adjoint": rep.icr_tilde_adjoint,
                    "icr_core": rep.icr_under,
                    "icr_domain": icr_p,
                    "icr_adjoint_domain": icr_a,
                    "annihilator_dim": rep.uM_dim,
                    "annihilator_dim_adjoint": rep.uN_dim,
                },
                inputs={"k": config.k, "mesh": spec},
            )
        )


def cmd_verify_decomposition(config, report):
    from .adjoint import helmholtz_check, hodge_check, whitney_pair

    mesh = parse_mesh(config)
    for bc in ("none", "homogeneous"):
        if config.k <= mesh.dim - 1:
            pair = whitney_pair(mesh, config.k, bc)
            rep = helmholtz_check(pair)
            report.add(
                CheckRecord(
                    "helmholtz-%s" % bc,
                    rep.verdict,
                    numbers={
                        "orthogonality_residual": rep.orthogonality_residual,
                        "identity_angle": rep.identity_angle,
                        **{"dim_%s" % n: d for n, d in rep.rhs_dims.items()},
                    },
                    inputs={"k": config.k, "bc": bc},
                )
            )
    if 1 <= config.k <= mesh.dim - 1:
        rep = hodge_check(mesh, config.k)
        report.add(
            CheckRecord(
                "hodge",
                rep.verdict,
                numbers={
                    "orthogonality_residual": rep.orthogonality_residual,
                    "identity_angle": rep.identity_angle,
                },
                inputs={"k": config.k},
            )
        )


def cmd_verify_duality(config, report):
    from .adjoint import horizontal_duality_check, pl_duality_check

    mesh = parse_mesh(config)
    rep = pl_duality_check(mesh, config.k)
    report.add(
        CheckRecord(
            "poincare-lefschetz",
            rep.verdict,
            numbers={
                "identity_angle": rep.identity_angle,
                **{"dim_%s" % n: d for n, d in rep.lhs_dims.items()},
            },
            inputs={"k": config.k},
        )
    )
    if config.k <= mesh.dim - 1:
        rep = horizontal_duality_check(mesh, config.k)
        report.add(
            CheckRecord(
                "horizontal-duality",
                rep.verdict,
                numbers={
                    "identity_angle": rep.identity_angle,
                    **{"dim_%s" % n: d for n, d in rep.lhs_dims.items()},
                },
                inputs={"k": config.k},
            )
        )


def cmd_verify_complex(config, report):
    from .linalg import Subspace, subspace_equal, rank
    from .spaces import ladder

    mesh = parse_mesh(config)
    lad = ladder(mesh)
    for bc in ("none", "homogeneous"):
        worst = 0.0
        dims = {}
        for k in range(mesh.dim):
            gs, _ = lad.abc(k, bc)
            upper, cons = lad.abc(k + 1, bc)
            image = lad.primal(k + 1).p0_injection(lad.p0(k + 1)) @ (
                lad.d_matrix(k) @ gs.atlas
            )
            if cons.matrix.shape[0]:
                worst = max(worst, float(np.abs(cons.matrix @ image).max()))
            dims["kernel_%d" % k] = gs.dim - rank(lad.d_matrix(k) @ gs.atlas)
            dims["range_%d" % (k + 1)] = rank(lad.d_matrix(k) @ gs.atlas)
        report.add(
            CheckRecord(
                "complex-property-%s" % bc,
                "pass" if worst < 1e-11 else "fail",
                numbers={"containment_residual": worst, **dims},
                inputs={"bc": bc},
            )
        )
        angles = []
        for k in range(mesh.dim + 1):
            gs, _ = lad.abc(k, bc)
            atlas = lad.abc_atlas(k, bc)
            A = Subspace.from_span(atlas.matrix(), lad.primal(k).gram())
            ok, ang = subspace_equal(A, gs.subspace(), lad.primal(k).gram(), tol=1e-9)
            angles.append(ang if atlas.dim == gs.dim and ok else np.inf)
        report.add(
            CheckRecord(
                "route-equivalence-%s" % bc,
                "pass" if max(angles) < 1e-9 else "fail",
                numbers={"max_angle": max(angles)},
                inputs={"bc": bc},
            )
        )


def cmd_verify_interp(config, report):
    from .forms import random_polyform
    from .interp import (
        commute_check,
        constraint_residual,
        global_field,
        interpolate_global,
        projectivity_matrix,
        stability_report,
    )

    mesh = parse_mesh(config)
    k = config.k
    J = projectivity_matrix(mesh, k)
    proj = float(np.abs(J @ J - J).max())
    report.add(
        CheckRecord(
            "interp-projectivity",
            "pass" if proj < 1e-12 else "fail",
            numbers={"idempotency_residual": proj},
            inputs={"k": k},
        )
    )
    rng = np.random.default_rng(0)
    worst_commute = 0.0
    worst_domain = 0.0
    fields = []
    for _ in range(20):
        form = random_polyform(mesh.dim, k, 2, rng)
        field = global_field(mesh, form)
        fields.append(field)
        if k < mesh.dim:
            worst_commute = max(worst_commute, commute_check(mesh, k, field))
        vec = interpolate_global(mesh, k, field)
        worst_domain = max(worst_domain, constraint_residual(mesh, k, "none", vec))
    report.add(
        CheckRecord(
            "interp-commutation",
            "pass" if worst_commute < 1e-11 else "fail",
            numbers={"residual": worst_commute},
            inputs={"k": k},
        )
    )
    report.add(
        CheckRecord(
            "interp-domain-preservation",
            "pass" if worst_domain < 1e-11 else "fail",
            numbers={"residual": worst_domain},
            inputs={"k": k},
        )
    )
    stab = stability_report(mesh, k, fields)
    ok = (
        stab["energy_ratio"] <= stab["energy_bound"] + 1e-9
        and stab["graph_ratio"] <= stab["graph_bound"] + 1e-9
    )
    report.add(
        CheckRecord(
            "interp-stability",
            "pass" if ok else "fail",
            numbers=stab,
            inputs={"k": k},
        )
    )


def _export_solutions(path, solutions):
    """Write coefficient vectors keyed by degree-of-freedom id, per scheme."""
    payload = {
        tag: {
            name: {str(i): float(v) for i, v in enumerate(vec)}
            for name, vec in sol.components.items()
            if hasattr(vec, "__len__")
        }
        for tag, sol in solutions.items()
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)


def cmd_solve_source(config, report, export=None):
    from .solve import solve_source_dual, solve_source_primal, verify_source_equivalence

    mesh = parse_mesh(config)
    load = parse_load(mesh, config.k, config.load)
    sp = solve_source_primal(mesh, config.k, load, config.bc)
    sd = solve_source_dual(mesh, config.k, load, config.bc)
    rep = verify_source_equivalence(mesh, sp, sd)
    if export:
        _export_solutions(export, {"primal": sp, "dual": sd})
    report.add(
        CheckRecord(
            "source-equivalence",
            rep.verdict,
            numbers={**rep.residuals, "primal_residual": sp.residual, "dual_residual": sd.residual},
            inputs={"k": config.k, "bc": config.bc, "load": config.load},
        )
    )


def cmd_solve_eigen(config, report):
    from .solve import solve_eigen_pair

    mesh = parse_mesh(config)
    pv, dv, rep, meta = solve_eigen_pair(mesh, config.k, config.bc)
    numbers = {
        "nonzero_spectrum_gap": rep.residuals["nonzero_spectrum_gap"],
        "count_primal": rep.residuals["count_primal"],
        "count_dual": rep.residuals["count_dual"],
        **meta,
    }
    for i, v in enumerate(pv[:5]):
        numbers["lambda_%d" % (i + 1)] = float(v)
    report.add(
        CheckRecord("eigen-equivalence", rep.verdict, numbers=numbers, inputs={"k": config.k})
    )


def cmd_solve_hodge(config, report, check_equivalence=True, export=None):
    from .solve import solve_hodge, verify_hodge_equivalences

    mesh = parse_mesh(config)
    load = parse_load(mesh, config.k, config.load)
    schemes = (
        ("complete", "mixed_primal", "mixed_dual", "lowest_primal")
        if config.scheme == "all"
        else (config.scheme,)
    )
    sols = {}
    for scheme in schemes:
        sols[scheme] = solve_hodge(mesh, config.k, load, scheme)
    if export:
        _export_solutions(export, sols)
    for scheme in schemes:
        report.add(
            CheckRecord(
                "hodge-%s" % scheme,
                "pass" if sols[scheme].residual < 1e-10 else "fail",
                numbers={
                    "solver_residual": sols[scheme].residual,
                    "condition": sols[scheme].condition,
                },
                inputs={"k": config.k, "load": config.load},
            )
        )
    if check_equivalence and len(sols) == 4:
        rep = verify_hodge_equivalences(mesh, config.k, sols)
        report.add(
            CheckRecord(
                "hodge-equivalences",
                rep.verdict,
                numbers=rep.residuals,
                inputs={"k": config.k, "load": config.load},
            )
        )


def cmd_suite_all(config, report, fast=False):
    """The whole verification battery on a fixed mesh matrix."""
    jobs = []

    def sub(command, **kw):
        base = config.to_dict()
        base.pop("command", None)
        base.update(kw)
        return RunConfig(command=command, **base).validate()

    meshes = ["box:2", "box:4", "hole:4"] if fast else ["box:2", "box:4", "box:8", "hole:4", "hole:8"]
    for mesh in meshes:
        for k in (0, 1):
            jobs.append(("verify", cmd_verify_base_pair, sub("verify base-pair", mesh=mesh, k=k)))
            jobs.append(("verify", cmd_verify_decomposition, sub("verify decomposition", mesh=mesh, k=k)))
        jobs.append(("verify", cmd_verify_duality, sub("verify duality", mesh=mesh, k=1)))
        jobs.append(("verify", cmd_verify_complex, sub("verify complex", mesh=mesh)))
        jobs.append(("verify", cmd_verify_interp, sub("verify interp", mesh=mesh, k=0)))
        jobs.append(("solve", cmd_solve_source, sub("solve source", mesh=mesh, k=0)))
        jobs.append(("solve", cmd_solve_eigen, sub("solve eigen", mesh=mesh, k=0)))
        jobs.append(("solve", cmd_solve_hodge, sub("solve hodge", mesh=mesh, k=1)))
    if not fast:
        jobs.append(("verify", cmd_verify_base_pair, sub("verify base-pair", mesh="tetbox:1", k=1)))
        jobs.append(("verify", cmd_verify_complex, sub("verify complex", mesh="tetbox:1")))
    results = [None] * len(jobs)

    def run(idx):
        _, fn, cfg = jobs[idx]
        local = Report(cfg)
        try:
            fn(cfg, local)
        except PadfeecError as exc:
            local.add(
                CheckRecord(
                    cfg.command.replace(" ", "-"),
                    "fail",
                    note="%s: %s" % (type(exc).__name__, exc),
                )
            )
        return local.records

    max_workers = worker_count()
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            for idx, recs in zip(range(len(jobs)), pool.map(run, range(len(jobs)))):
                results[idx] = recs
    else:
        for idx in range(len(jobs)):
            results[idx] = run(idx)
    for (label, fn, cfg), recs in zip(jobs, results):
        for rec in recs:
            rec.inputs = {**rec.inputs, "mesh": cfg.mesh}
            rec.name = "%s/%s" % (cfg.mesh, rec.name)
            report.add(rec)


# -- argument parsing --------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="padfeec",
        description="Partially adjoint discretizations on simplicial meshes",
    )
    parser.add_argument("--config", default=None, help="JSON config file")
    sub = parser.add_subparsers(dest="group", required=True)

    def common(p):
        p.add_argument("--mesh", default=None, help="box:N, hole:N or tetbox:N")
        p.add_argument("--mesh-file", default=None)
        p.add_argument("--k", type=int, default=None)
        p.add_argument("--bc", choices=("none", "homogeneous"), default=None)
        p.add_argument("--load", default=None, help="zero, poly:<seed> or trig")
        p.add_argument("--scheme", default=None)
        p.add_argument("--rank-tol", type=float, default=None)
        p.add_argument("--eig-tol", type=float, default=None)
        p.add_argument("--identity-tol", type=float, default=None)
        p.add_argument("--levels", default=None, help="comma list of mesh sizes")
        p.add_argument("--export-solutions", default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=("json", "csv"), default=None)
        p.add_argument("--timings", action="store_true")

    mesh = sub.add_parser("mesh").add_subparsers(dest="action", required=True)
    for action in ("gen", "info"):
        common(mesh.add_parser(action))
    space = sub.add_parser("space").add_subparsers(dest="action", required=True)
    p = space.add_parser("build")
    p.add_argument("--kind", choices=("broken", "conforming", "star", "abc"), default="abc")
    common(p)
    verify = sub.add_parser("verify").add_subparsers(dest="action", required=True)
    for action in ("base-pair", "decomposition", "duality", "complex", "interp"):
        common(verify.add_parser(action))
    solve = sub.add_parser("solve").add_subparsers(dest="action", required=True)
    for action in ("source", "eigen", "hodge"):
        p = solve.add_parser(action)
        p.add_argument("--check-equivalence", action="store_true")
        common(p)
    suite = sub.add_parser("suite").add_subparsers(dest="action", required=True)
    p = suite.add_parser("all")
    p.add_argument("--fast", action="store_true")
    common(p)
    return parser


def merge_config(args):
    defaults = {
        "mesh": "box:2",
        "mesh_file": "",
        "k": 0,
        "bc": "none",
        "scheme": "all",
        "load": "poly:0",
        "rank_tol": 1e-10,
        "eig_tol": 1e-10,
        "identity_tol": 1e-8,
        "out": "",
        "fmt": "json",
    }
    file_conf = {}
    if args.config:
        with open(args.config) as fh:
            file_conf = json.load(fh)
    merged = dict(defaults)
    for key in defaults:
        if key in file_conf and file_conf[key] is not None:
            merged[key] = file_conf[key]
    cli_map = {
        "mesh": args.mesh,
        "mesh_file": args.mesh_file,
        "k": args.k,
        "bc": args.bc,
        "scheme": getattr(args, "scheme", None),
        "load": args.load,
        "rank_tol": args.rank_tol,
        "eig_tol": args.eig_tol,
        "identity_tol": args.identity_tol,
        "out": args.out,
        "fmt": args.format,
    }
    for key, value in cli_map.items():
        if value is not None:
            merged[key] = value
    command = "%s %s" % (args.group, args.action)
    return RunConfig(command=command, **merged).validate()


def run(config: RunConfig, **options):
    """Execute the pipeline named by config.command and return its Report."""
    report = Report(config)
    t0 = time.time()
    group, _, action = config.command.partition(" ")
    if group == "mesh" and action == "gen":
        cmd_mesh_gen(config, report)
    elif group == "mesh" and action == "info":
        cmd_mesh_info(config, report)
    elif group == "space" and action == "build":
        cmd_space_build(config, report, options.get("kind", "abc"))
    elif group == "verify" and action == "base-pair":
        cmd_verify_base_pair(config, report, levels=options.get("levels"))
    elif group == "verify" and action == "decomposition":
        cmd_verify_decomposition(config, report)
    elif group == "verify" and action == "duality":
        cmd_verify_duality(config, report)
    elif group == "verify" and action == "complex":
        cmd_verify_complex(config, report)
    elif group == "verify" and action == "interp":
        cmd_verify_interp(config, report)
    elif group == "solve" and action == "source":
        cmd_solve_source(config, report, export=options.get("export"))
    elif group == "solve" and action == "eigen":
        cmd_solve_eigen(config, report)
    elif group == "solve" and action == "hodge":
        cmd_solve_hodge(
            config,
            report,
            check_equivalence=options.get("check_equivalence", False)
            or config.scheme == "all",
            export=options.get("export"),
        )
    elif group == "suite" and action == "all":
        cmd_suite_all(config, report, fast=options.get("fast", False))
    else:
        raise PadfeecError("unknown command %r" % (config.command,))
    report.timings["total_seconds"] = time.time() - t0
    return report


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = merge_config(args)
        levels = None
        if getattr(args, "levels", None):
            levels = [int(v) for v in args.levels.split(",") if v.strip()]
        report = run(
            config,
            kind=getattr(args, "kind", "abc"),
            levels=levels,
            export=getattr(args, "export_solutions", None),
            check_equivalence=getattr(args, "check_equivalence", False),
            fast=getattr(args, "fast", False),
        )
        payload = emit(report, config.fmt, include_timings=args.timings)
        if config.out:
            with open(config.out, "wb") as fh:
                fh.write(payload)
        else:
            sys.stdout.buffer.write(payload)
        return 0 if report.all_passed else 1
    except PadfeecError as exc:
        sys.stderr.write("error: %s: %s\n" % (type(exc).__name__, exc))
        return 2
    except OSError as exc:
        sys.stderr.write("error: %s: %s\n" % (type(exc).__name__, exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
