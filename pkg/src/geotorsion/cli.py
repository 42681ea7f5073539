"""Command-line front end.

    geotorsion validate  FILE
    geotorsion invariant FILE (--closed | --level K) [--realization R]
    geotorsion move      FILE SCRIPT [--level K]
    geotorsion glue      (--preset NAME | FILE1 FILE2 IDENT)
    geotorsion report    FILE --out DIR [--level K]
    geotorsion catalog   NAME

FILE is a triangulation JSON file or ``catalog:NAME``.  Output is JSON with
sorted keys; identical arguments give identical bytes.  Exit status is 2
for invalid input and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

import numpy as np

from geotorsion import catalog
from geotorsion.complexes import build_complex, composition_residuals, full_f3, matrix_to_csv
from geotorsion.geometry import DegenerateTetrahedron, Realization
from geotorsion.glueing import (
    BoundaryMismatch,
    ConditionUnsatisfied,
    IncompatibleVectors,
    OrientationMismatch,
    glue,
    identification_from_json,
)
from geotorsion.moves import (
    BOUNDARY_KINDS,
    SiteNotApplicable,
    boundary_move_transform,
    invariant_vector_for_transform,
    load_script,
    run_script,
)
from geotorsion.numeric import use_precision
from geotorsion.torsion import (
    VANISHING_THRESHOLD,
    TorsionError,
    evaluate_closed,
    invariant_vector,
)
from geotorsion.triangulation import Triangulation, TriangulationError, from_gluings

EXIT_INPUT = 2
EXIT_NUMERIC = 3
TRIANGULATION_FIELDS = {"tetrahedra", "gluings", "edge_names", "boundary_order"}


class InputError(ValueError):
    pass


# -- input --------------------------------------------------------------------

def _read_json(path: str):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if text.splitlines() else ""
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {line}") from None


def triangulation_from_json(data) -> Triangulation:
    if not isinstance(data, dict):
        raise InputError("a triangulation file must hold a JSON object")
    extra = set(data) - TRIANGULATION_FIELDS
    if extra:
        raise InputError(f"unknown triangulation field(s): {sorted(extra)}")
    if "tetrahedra" not in data:
        raise InputError("missing field 'tetrahedra'")
    return from_gluings(
        data["tetrahedra"], data.get("gluings", []), data.get("edge_names"), data.get("boundary_order")
    )


def load_triangulation(source: str) -> Triangulation:
    if source.startswith("catalog:"):
        name = source.split(":", 1)[1]
        if name not in catalog.CATALOG:
            raise InputError(f"unknown catalog entry {name!r}; choose from {sorted(catalog.CATALOG)}")
        return catalog.CATALOG[name]().triangulation
    return triangulation_from_json(_read_json(source))


def _realization(args, tri: Triangulation) -> Realization:
    if getattr(args, "realization", None):
        real = Realization.from_json(_read_json(args.realization))
        missing = [v for v in tri.vertices if v not in real]
        if missing:
            raise InputError(f"realization lacks coordinates for {missing}")
        return real
    return Realization.random(tri.vertices, args.seed)


# -- output -------------------------------------------------------------------

def _dump(obj, args) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if getattr(args, "out", None) and args.command != "report":
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _vector_json(vec, threshold: float) -> dict:
    # a component vanishes when its f3 minor is below threshold x the product of its full f3 row norms
    out = vec.to_json()
    out["nonvanishing"] = {
        str(k): [{"C": list(C), "D": list(D)} for C, D in vec.nonvanishing_by_ratio(k, threshold)]
        for k in vec.levels
    }
    out["max_abs"] = {str(k): vec.max_abs(k) for k in vec.levels}
    return out


# -- commands -----------------------------------------------------------------

def cmd_validate(args) -> dict:
    tri = load_triangulation(args.file)
    n0i, n0b, n1i, n1b, n3 = tri.counts()
    report = {
        "tetrahedra": n3,
        "vertices": {"inner": n0i, "boundary": n0b},
        "edges": {"inner": n1i, "boundary": n1b},
        "closed": tri.is_closed,
        "edge_names": list(tri.edge_names),
        "boundary_order": [tri.edges[i].name for i in tri.boundary_order],
    }
    if not tri.is_closed:
        surf = tri.boundary_surface()
        comps = surf.components()
        report["boundary"] = {
            "components": len(comps),
            "euler_characteristic": surf.euler_characteristic,
            "triangles": len(surf.triangles),
        }
        if len(comps) == 1:
            report["boundary"]["genus"] = surf.genus
    summary = f"{n3} tets, " + ("closed" if tri.is_closed else f"genus-{report['boundary'].get('genus', '?')} boundary")
    report["summary"] = summary
    print(summary, file=sys.stderr)
    return report


def cmd_invariant(args) -> dict:
    tri = load_triangulation(args.file)
    real = _realization(args, tri)
    if args.closed:
        res = evaluate_closed(tri, real)
        cx = build_complex(tri, real, "closed")
        return {
            "invariant": float(res.value),
            "tau": float(res.tau),
            "minors": {k: float(v) for k, v in sorted(res.minors.items())},
            "chain": {
                "f1_rows": [f"{v}{a}" for v, a in res.chain.f1_rows],
                "f1_triangle": list(res.chain.triangle),
                "f2_rows": [tri.edges[e].name for e in res.chain.f2.rows],
                "f3_rows": [tri.edges[e].name for e in res.chain.f3_rows],
            },
            "residuals": composition_residuals(cx),
            "precision": args.precision,
            "seed": args.seed,
        }
    levels = list(range(args.level + 1)) if args.all_levels else [args.level]
    vec = invariant_vector(tri, real, levels, parallel=args.parallel)
    out = _vector_json(vec, args.threshold)
    out["precision"] = args.precision
    out["seed"] = args.seed
    return out


def cmd_move(args) -> dict:
    tri = load_triangulation(args.file)
    real = _realization(args, tri)
    steps = load_script(args.script) if args.script != "-" else []
    results = run_script(tri, real, steps, seed=args.seed)
    out = {"moves": [r.record.to_json() for r in results], "transforms": []}
    before = tri
    for r in results:
        if r.record.kind in BOUNDARY_KINDS:
            A = boundary_move_transform(before, r.triangulation, r.record, r.realization, args.level)
            src = invariant_vector_for_transform(before, r.realization, A)
            got = A.apply(src)
            want = invariant_vector(r.triangulation, r.realization, list(range(args.level + 1)))
            scale = max(want.max_abs(), 1e-300)
            err = max(abs(float(got.components[k]) - float(want.components[k])) for k in want.components)
            dump = A.to_json()
            dump["check"] = {"max_abs_error": err, "relative_error": err / scale}
            out["transforms"].append(dump)
        before = r.triangulation
    final = results[-1].triangulation if results else tri
    out["triangulation"] = final.to_json()
    if results:
        out["realization"] = results[-1].realization.to_json()
    return out


def cmd_glue(args) -> dict:
    if args.preset:
        entry = catalog.glued_pair(args.preset)
        glued = entry.meta["glued"]
    else:
        if not (args.file1 and args.file2 and args.identification):
            raise InputError("glue needs --preset or FILE1 FILE2 IDENTIFICATION")
        m1 = load_triangulation(args.file1)
        m2 = load_triangulation(args.file2)
        glued = glue(m1, m2, identification_from_json(_read_json(args.identification)))
    real = _realization(args, glued.closed)
    cmp = glued.compare(real, parallel=args.parallel, threshold=args.threshold)
    cmp["glueing"] = glued.data.to_json()
    cmp["tetrahedra"] = glued.closed.n_tets
    cmp["seed"] = args.seed
    return cmp


def cmd_report(args) -> dict:
    import matplotlib

    matplotlib.use("Agg")
    from geotorsion import plotting

    tri = load_triangulation(args.file)
    real = _realization(args, tri)
    os.makedirs(args.out, exist_ok=True)
    written = []

    full = np.asarray(full_f3(tri, real), dtype=float)
    names = list(tri.edge_names)
    path = os.path.join(args.out, "f3.csv")
    with open(path, "w") as fh:
        fh.write(matrix_to_csv(full, names, names))
    written.append(path)
    if set(catalog.FACTOR_ORDER) <= set(names) and set(tri.vertices) == set("ABCD"):
        table, _ = catalog.factor_table(tri, real)
        order = list(catalog.FACTOR_ORDER)
        path = os.path.join(args.out, "f3_factors.csv")
        with open(path, "w") as fh:
            fh.write(matrix_to_csv(table, order, order))
        written.append(path)
        path = os.path.join(args.out, "f3_factors.png")
        plotting.factor_heatmap(table, order, path)
        written.append(path)

    if not tri.is_closed:
        vec = invariant_vector(tri, real, list(range(args.level + 1)), parallel=args.parallel)
        path = os.path.join(args.out, "invariants.csv")
        with open(path, "w") as fh:
            fh.write(plotting.vector_csv(vec))
        written.append(path)
        path = os.path.join(args.out, f"level{args.level}.png")
        plotting.level_heatmap(vec, args.level, path, args.threshold)
        written.append(path)
    return {"written": written, "seed": args.seed}


def cmd_catalog(args) -> dict:
    if args.name not in catalog.CATALOG:
        raise InputError(f"unknown catalog entry {args.name!r}; choose from {sorted(catalog.CATALOG)}")
    return catalog.CATALOG[args.name]().triangulation.to_json()


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for random vertex coordinates")
    common.add_argument("--precision", choices=("double", "extended"), default="double")
    common.add_argument("--threshold", type=float, default=VANISHING_THRESHOLD,
                        help="vanishing threshold: |minor| over its f3 row-norm bound (vectors), "
                        "absolute |I| (glue)")
    common.add_argument("--out", help="output path (a directory for report)")
    common.add_argument("--parallel", action="store_true",
                        help="parallel batches; reduction order may perturb the last digits")
    common.add_argument("--realization", help="JSON file with vertex coordinates")

    p = argparse.ArgumentParser(prog="geotorsion", description="Geometric torsion invariants of triangulated 3-manifolds.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", parents=[common], help="check a triangulation and report counts")
    s.add_argument("file")

    s = sub.add_parser("invariant", parents=[common], help="closed invariant or invariant vector")
    s.add_argument("file")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--closed", action="store_true")
    g.add_argument("--level", type=int)
    s.add_argument("--all-levels", action="store_true", help="include every level up to --level")

    s = sub.add_parser("move", parents=[common], help="apply a move script")
    s.add_argument("file")
    s.add_argument("script", help="JSON move list, or - for none")
    s.add_argument("--level", type=int, default=2)

    s = sub.add_parser("glue", parents=[common], help="glue two manifolds and compare both routes")
    s.add_argument("file1", nargs="?")
    s.add_argument("file2", nargs="?")
    s.add_argument("identification", nargs="?")
    s.add_argument("--preset", choices=sorted(catalog.GLUED_PRESETS))

    s = sub.add_parser("report", parents=[common], help="CSV tables and heatmaps")
    s.add_argument("file")
    s.add_argument("--level", type=int, default=2)

    s = sub.add_parser("catalog", parents=[common], help="print a catalog triangulation")
    s.add_argument("name")
    return p


COMMANDS = {
    "validate": cmd_validate,
    "invariant": cmd_invariant,
    "move": cmd_move,
    "glue": cmd_glue,
    "report": cmd_report,
    "catalog": cmd_catalog,
}

INPUT_ERRORS = (
    InputError,
    TriangulationError,
    SiteNotApplicable,
    BoundaryMismatch,
    OrientationMismatch,
    ConditionUnsatisfied,
    IncompatibleVectors,
    KeyError,
    ValueError,
)
NUMERIC_ERRORS = (DegenerateTetrahedron, TorsionError, ArithmeticError)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "report" and not args.out:
        args.out = "report"
    try:
        with use_precision(args.precision):
            result = COMMANDS[args.command](args)
    except NUMERIC_ERRORS as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except INPUT_ERRORS as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return EXIT_INPUT
    _dump(result, args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
