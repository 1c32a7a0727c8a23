"""Batch entry point: load definitions, run verification sweeps, emit reports.

Exit status: 0 all checks passed, 1 verification failure, 2 input error.
The human-readable table goes to stdout; ``--json`` writes a machine report
that is byte-stable for fixed inputs, seed and version (wall-clock timing is
only ever printed, never serialized).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import CATALOG
from .charts import (
    CheckResult,
    ContactStructure,
    SampleEvaluationError,
    sample_points,
    sample_points_grouped,
    validate_structure,
)
from .expressions import ExpressionError
from .geometry import classify, covariant_derivative_affinor, normality_tensor
from .manifold_io import ManifoldFileError, file_digest, load_manifold, save_manifold
from .nullity import RAW, check_generalized, fit_nullity, kenmotsu_convention
from .sewing import (
    SewingError,
    build_product,
    extrinsic_report,
    sew,
    verify_f_structure,
    verify_lift_laws,
    verify_sewing_theorems,
)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INPUT = 2

DEFAULT_POINTS = 25
DEFAULT_SEED = 7
DEFAULT_TOL = 1e-8


def _check_dicts(checks) -> list[dict]:
    return [
        {
            "name": c.name,
            "residual": c.residual,
            "tolerance": c.tolerance,
            "passed": c.passed,
            "note": c.note,
        }
        for c in checks
    ]


def _print_checks(checks) -> None:
    for c in checks:
        print("  " + c.line())


def _classification_dict(classification) -> dict:
    return {
        "kind": classification.kind,
        "alpha": classification.alpha,
        "is_cosymplectic": classification.is_cosymplectic,
        "weight_fit_residual_max": classification.fit_residual_max,
        "weights": list(classification.weights),
    }


def _structure_checks(struct: ContactStructure, samples, tol: float) -> list[CheckResult]:
    """Axiom validation plus the Reeb-parallelism facts that hold on any cell."""
    report = validate_structure(struct, samples, tol)
    checks = list(report.checks)
    r_xi = r_phi = 0.0
    for s in samples:
        deriv = covariant_derivative_affinor(struct, s.array())
        r_xi = max(r_xi, deriv.nabla_xi_xi_norm)
        r_phi = max(r_phi, deriv.nabla_xi_phi_norm)
    checks.append(CheckResult("xi_geodesic", r_xi, tol, r_xi <= tol))
    checks.append(CheckResult("phi_parallel_along_xi", r_phi, tol, r_phi <= tol))
    return checks


def _verify_subject(struct: ContactStructure, args) -> dict:
    samples = sample_points(struct.chart, args.points, args.seed)
    checks = _structure_checks(struct, samples, args.tol)
    classification = classify(struct, samples, args.tol)
    if struct.dim == 3:
        res = classification.fit_residual_max
        checks.append(CheckResult("weight_fit_residual", res, args.tol, res <= args.tol))
    normality_max = max(
        float(np.max(np.abs(normality_tensor(struct, s.array())))) for s in samples
    )
    subject = {
        "name": struct.name,
        "dimension": struct.dim,
        "checks": _check_dicts(checks),
        "classification": _classification_dict(classification),
        "normality_max": normality_max,
        "passed": all(c.passed for c in checks),
    }
    print(f"{struct.name}  (dimension {struct.dim}, {len(samples)} samples)")
    _print_checks(checks)
    print(f"  classification: {classification.describe()}")
    print(f"  normality tensor max |N|: {normality_max:.3e}")
    return subject


def cmd_verify(args) -> int:
    report = _base_report("verify", args)
    subjects = []
    for path in args.files:
        struct = load_manifold(path)
        report["inputs"].append({"path": str(path), "sha256": file_digest(path)})
        subjects.append(_verify_subject(struct, args))
    report["subjects"] = subjects
    report["passed"] = all(s["passed"] for s in subjects)
    _finish(report, args)
    return EXIT_PASS if report["passed"] else EXIT_FAIL


def _nullity_samples(struct: ContactStructure, args):
    if struct.chart.adapted_index is None:
        return sample_points(struct.chart, args.points, args.seed), False
    per_group = max(2, args.points // 5)
    return sample_points_grouped(struct.chart, 5, per_group, args.seed), True


def cmd_nullity(args) -> int:
    report = _base_report("nullity", args)
    struct = load_manifold(args.file)
    report["inputs"].append({"path": str(args.file), "sha256": file_digest(args.file)})
    samples, grouped = _nullity_samples(struct, args)

    validation = validate_structure(struct, samples, args.tol)
    if not validation.passed:
        print(validation.format_table())
        print("structure axioms fail; nullity fit skipped")
        report["passed"] = False
        _finish(report, args)
        return EXIT_FAIL

    convention = RAW
    classification = classify(struct, samples, args.tol)
    if args.convention == "kenmotsu":
        if classification.alpha is None:
            print("the normalized h' convention needs an almost alpha-Kenmotsu structure")
            return EXIT_INPUT
        convention = kenmotsu_convention(classification.alpha)
    report["parameters"]["convention"] = convention.label()

    t_axis = struct.chart.adapted_index
    rows = []
    print(f"{struct.name}: per-sample nullity fits ({convention.label()})")
    header = f"  {'t' if t_axis is not None else 'draw':>12}  {'kappa':>14} {'mu':>14} {'muprime':>14} {'residual':>12}"
    print(header)
    if grouped:
        gen = check_generalized(struct, samples, args.tol, convention)
        pairs = list(zip(gen.samples, gen.fits))
        verdicts = {
            "constant_kappa": gen.constant_kappa,
            "constant_mu": gen.constant_mu,
            "constant_muprime": gen.constant_muprime,
            "eta_aligned": gen.eta_aligned,
            "kappa_spread": gen.kappa_spread,
            "group_spread_max": gen.group_spread_max,
        }
    else:
        pairs = [(s, fit_nullity(struct, s.array(), convention)) for s in samples]
        verdicts = {}
    residual_max = 0.0
    for sample, fit in pairs:
        residual_max = max(residual_max, fit.residual)
        label = sample.coords[t_axis] if t_axis is not None else float(sample.draw)
        flag = "" if fit.determinate_mu else "  [mu undetermined: h = 0]"
        print(
            f"  {label:>12.6g}  {fit.kappa:>14.8g} {fit.mu:>14.8g} {fit.muprime:>14.8g}"
            f" {fit.residual:>12.3e}{flag}"
        )
        rows.append(
            {
                "point": list(sample.coords),
                "kappa": fit.kappa,
                "mu": fit.mu,
                "muprime": fit.muprime,
                "residual": fit.residual,
                "h_norm": fit.h_norm,
                "determinate_mu": fit.determinate_mu,
            }
        )
    for key, value in verdicts.items():
        print(f"  {key}: {value}")
    passed = residual_max <= args.tol
    print(f"  max fit residual {residual_max:.3e} (tol {args.tol:.1e}): {'PASS' if passed else 'FAIL'}")
    report["subjects"] = [
        {
            "name": struct.name,
            "dimension": struct.dim,
            "classification": _classification_dict(classification),
            "nullity_table": rows,
            "verdicts": verdicts,
            "residual_max": residual_max,
            "passed": passed,
        }
    ]
    report["passed"] = passed
    _finish(report, args)
    return EXIT_PASS if passed else EXIT_FAIL


def cmd_sew(args) -> int:
    if args.copies < 2:
        print("--copies must be at least 2")
        return EXIT_INPUT
    report = _base_report("sew", args)
    report["parameters"]["copies"] = args.copies
    cell = load_manifold(args.file)
    report["inputs"].append({"path": str(args.file), "sha256": file_digest(args.file)})
    cells = [cell] * args.copies
    sewn = sew(cells)
    save_manifold(sewn, args.out)
    print(f"wrote sewn definition to {args.out}")
    report["output"] = {"path": str(args.out), "sha256": file_digest(args.out)}

    product = build_product(cells)
    sewn_samples = sample_points(sewn.chart, args.points, args.seed)
    product_samples = sample_points(product.chart, args.points, args.seed)

    sections: list[tuple[str, list[CheckResult]]] = []
    checks = _structure_checks(sewn, sewn_samples, max(args.tol, 1e-9))
    sections.append(("induced structure axioms", checks))
    f_report = verify_f_structure(product, product_samples, args.tol)
    sections.append(("product f-structure", list(f_report.checks)))
    lift = verify_lift_laws(product, product_samples, max(args.tol, 1e-9))
    sections.append(("lift laws", list(lift.checks)))
    extrinsic = extrinsic_report(cells, count=args.points, seed=args.seed, tol=args.tol)
    sections.append(("extrinsic geometry", list(extrinsic.checks)))
    theorems = verify_sewing_theorems(
        cells, tol=args.tol, count=args.points, seed=args.seed
    )
    sections.append(("classification and nullity transfer", list(theorems.checks)))

    subject = {"name": sewn.name, "dimension": sewn.dim, "sections": {}}
    all_passed = True
    for title, section_checks in sections:
        print(title)
        _print_checks(section_checks)
        subject["sections"][title] = _check_dicts(section_checks)
        all_passed = all_passed and all(c.passed for c in section_checks)
    print(f"cell classification: {theorems.cell_classification.describe()}")
    print(f"sewn classification: {theorems.sewn_classification.describe()}")
    subject["cell_classification"] = _classification_dict(theorems.cell_classification)
    subject["sewn_classification"] = _classification_dict(theorems.sewn_classification)
    if theorems.convention_comparison is not None:
        comp = theorems.convention_comparison
        subject["convention_comparison"] = {
            "cell_count": comp.cell_count,
            "alpha_cell": comp.alpha_cell,
            "alpha_sewn": comp.alpha_sewn,
            "muprime_ratio_raw": comp.muprime_ratio_raw,
            "muprime_ratio_normalized": comp.muprime_ratio_normalized,
            "reproduces_inverse_k": comp.reproduces_inverse_k,
        }
        print(
            f"h' convention reproducing the 1/k transfer of mu': {comp.reproduces_inverse_k}"
            f" (raw ratio {comp.muprime_ratio_raw:.6f},"
            f" normalized ratio {comp.muprime_ratio_normalized:.6f})"
        )
    subject["passed"] = all_passed
    report["subjects"] = [subject]
    report["passed"] = all_passed
    _finish(report, args)
    return EXIT_PASS if all_passed else EXIT_FAIL


def cmd_catalog(args) -> int:
    entry = CATALOG.get(args.entry)
    if entry is None:
        print(f"unknown catalog entry {args.entry!r}; available: {', '.join(sorted(CATALOG))}")
        return EXIT_INPUT
    params = {}
    for item in args.param or []:
        if "=" not in item:
            print(f"--param expects name=value, got {item!r}")
            return EXIT_INPUT
        key, value = item.split("=", 1)
        try:
            params[key] = float(value)
        except ValueError:
            print(f"--param value for {key!r} must be a number, got {value!r}")
            return EXIT_INPUT
    try:
        cell = entry.build(**params)
    except (TypeError, ValueError) as exc:
        print(f"cannot build {args.entry}: {exc}")
        return EXIT_INPUT
    save_manifold(cell, args.out, provenance={"catalog": entry.name, "parameters": params})
    print(f"wrote {cell.name} to {args.out}")
    return EXIT_PASS


def _base_report(command: str, args) -> dict:
    return {
        "tool": {"name": "sewcells", "version": __version__},
        "command": command,
        "parameters": {"points": args.points, "seed": args.seed, "tol": args.tol},
        "inputs": [],
    }


def _finish(report: dict, args) -> None:
    if getattr(args, "json", None):
        Path(args.json).write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"machine report written to {args.json}")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--points", type=int, default=DEFAULT_POINTS, help="sample count (default 25)")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED, help="sampling seed (default 7)")
    parser.add_argument("--tol", type=float, default=DEFAULT_TOL, help="tolerance (default 1e-8)")
    parser.add_argument("--json", type=Path, default=None, help="write the machine report here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sewcells",
        description="verify almost contact metric cells and their sewn products",
    )
    parser.add_argument("--version", action="version", version=f"sewcells {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="structure axioms, classification, normality")
    p_verify.add_argument("files", nargs="+", type=Path)
    _add_common(p_verify)
    p_verify.set_defaults(func=cmd_verify)

    p_null = sub.add_parser("nullity", help="per-sample nullity fits and constancy verdicts")
    p_null.add_argument("file", type=Path)
    p_null.add_argument("--convention", choices=("raw", "kenmotsu"), default="raw")
    _add_common(p_null)
    p_null.set_defaults(func=cmd_nullity)

    p_sew = sub.add_parser("sew", help="sew copies of a cell and verify the construction")
    p_sew.add_argument("file", type=Path)
    p_sew.add_argument("--copies", type=int, required=True)
    p_sew.add_argument("--out", type=Path, required=True)
    _add_common(p_sew)
    p_sew.set_defaults(func=cmd_sew)

    p_cat = sub.add_parser("catalog", help="export a built-in cell to a definition file")
    p_cat.add_argument("entry")
    p_cat.add_argument("--param", action="append", metavar="NAME=VALUE")
    p_cat.add_argument("--out", type=Path, required=True)
    p_cat.set_defaults(func=cmd_catalog)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        status = args.func(args)
    except (ManifoldFileError, ExpressionError, SewingError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SampleEvaluationError as exc:
        print(f"verification error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"elapsed {time.perf_counter() - start:.2f}s")
    return status


if __name__ == "__main__":
    sys.exit(main())
