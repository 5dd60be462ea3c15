"""Command-line front end: validate / solve / sweep over scenario files.

A scenario is a flat key = value file with sections for the model, the
endpoints, the energy level(s), solver options, and seeding.  Outputs are
plot-ready CSV (17-significant-digit decimals, comma delimited, mandatory
header) plus structured-text records with path sidecar files.  Identical
scenario and seed produce byte-identical CSV.

Exit codes: 0 success, 2 parse error, 3 validation failure, 4 no converged
record.
"""
from __future__ import annotations

import argparse
import configparser
import os
import sys
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ScenarioError
from .models import (
    Point,
    StationaryModel,
    ValidationReport,
    get_model,
    load_custom_model,
    validate_assumptions,
)
from .paths import save_path
from .solve import SolutionRecord, SolverOptions, multi_start, record_to_json

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_NO_CONVERGENCE = 4

OUT_DIR_ENV = "FERMATPATH_OUT"


@dataclass(frozen=True)
class Scenario:
    model: StationaryModel
    p: Point
    q: Point
    kappas: tuple[float, ...]
    seeds: tuple[object, ...]
    opts: SolverOptions
    region: tuple[tuple[float, float], ...]
    samples: int
    out_dir: str


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ScenarioError(f"cannot parse number list {text!r}: {exc}") from exc


def parse_scenario(
    path: str,
    *,
    out_dir: Optional[str] = None,
    segments: Optional[int] = None,
    rng_seed: Optional[int] = None,
) -> Scenario:
    """Read a scenario file; command-line overrides win over file values."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        if not cp.read(path):
            raise ScenarioError(f"cannot read scenario file {path!r}")
    except configparser.Error as exc:
        raise ScenarioError(f"{path}: {exc}") from exc

    def need(section, key):
        if not cp.has_option(section, key):
            raise ScenarioError(f"{path}: missing [{section}] {key}")
        return cp.get(section, key)

    if cp.has_option("model", "file"):
        model = load_custom_model(cp.get("model", "file"))
    else:
        model = get_model(need("model", "spec"))

    p_y = _parse_floats(need("endpoints", "p_y"))
    q_y = _parse_floats(need("endpoints", "q_y"))
    if len(p_y) != model.dim or len(q_y) != model.dim:
        raise ScenarioError(
            f"{path}: endpoint dimension mismatch (model dim {model.dim})"
        )
    p = Point(p_y, cp.getfloat("endpoints", "p_t", fallback=0.0))
    q = Point(q_y, cp.getfloat("endpoints", "q_t", fallback=0.0))

    kappas = tuple(_parse_floats(need("problem", "kappa")))
    if not kappas:
        raise ScenarioError(f"{path}: kappa list is empty")

    opts = SolverOptions(
        max_iters=cp.getint("solver", "max_iters", fallback=5000),
        grad_tol=cp.getfloat("solver", "grad_tol", fallback=1e-7),
        armijo_c=cp.getfloat("solver", "armijo_c", fallback=1e-4),
        backtrack_ratio=cp.getfloat("solver", "backtrack_ratio", fallback=0.5),
        initial_step=cp.getfloat("solver", "initial_step", fallback=1.0),
        N=cp.getint("solver", "segments", fallback=200),
        rng_seed=cp.getint("solver", "rng_seed", fallback=0),
    )
    if segments is not None:
        opts = replace(opts, N=segments)
    if rng_seed is not None:
        opts = replace(opts, rng_seed=rng_seed)

    seeds: list[object] = []
    if cp.has_option("seeds", "windings"):
        seeds.extend(int(k) for k in cp.get("seeds", "windings").replace(",", " ").split())
    n_random = cp.getint("seeds", "random", fallback=0)
    seeds.extend(["random"] * n_random)
    if not seeds:
        seeds = [0]

    if cp.has_option("problem", "region"):
        pieces = cp.get("problem", "region").split(";")
        if len(pieces) != model.dim:
            raise ScenarioError(f"{path}: region needs {model.dim} intervals")
        region = tuple((v[0], v[1]) for v in map(_parse_floats, pieces))
    else:
        lo = np.minimum(p.y, q.y)
        hi = np.maximum(p.y, q.y)
        pad = 1.0 + 0.5 * float(np.linalg.norm(q.y - p.y))
        region = tuple((float(a - pad), float(b + pad)) for a, b in zip(lo, hi))

    out = out_dir or cp.get("output", "dir", fallback=None) or os.environ.get(
        OUT_DIR_ENV, "fermatpath-out"
    )
    return Scenario(
        model=model,
        p=p,
        q=q,
        kappas=kappas,
        seeds=tuple(seeds),
        opts=opts,
        region=region,
        samples=cp.getint("problem", "samples", fallback=500),
        out_dir=out,
    )


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _emit(quiet, *lines):
    if not quiet:
        for line in lines:
            print(line)


def _run_validation(scen: Scenario) -> tuple[ValidationReport, list[str]]:
    report = validate_assumptions(
        scen.model, scen.region, scen.samples, scen.opts.rng_seed
    )
    problems = []
    if report.convexity_margin <= 0.0:
        problems.append(
            f"convexity margin {report.convexity_margin:.3g} is not positive"
        )
    if not report.growth_ok:
        problems.append("growth/lower-bound checks failed on samples")
    if not report.qk_check:
        problems.append("charge of the symmetry field is not -1")
    tol = 1e-12
    for kappa in scen.kappas:
        if kappa > report.kappa_admissible_bound + tol * (
            1.0 + abs(report.kappa_admissible_bound)
        ):
            problems.append(
                f"kappa={kappa:g} exceeds admissible bound "
                f"{report.kappa_admissible_bound:.17g}"
            )
    return report, problems


def _write_validation(scen: Scenario, report: ValidationReport):
    os.makedirs(scen.out_dir, exist_ok=True)
    out = os.path.join(scen.out_dir, "validation.json")
    d = report.as_dict()
    with open(out, "w") as fh:
        fh.write("{\n")
        rows = []
        for key, value in d.items():
            if isinstance(value, bool):
                rows.append(f'  "{key}": {str(value).lower()}')
            elif isinstance(value, float):
                rows.append(f'  "{key}": {_fmt(value)}')
            else:
                rows.append(f'  "{key}": {value}')
        fh.write(",\n".join(rows))
        fh.write("\n}\n")
    return out


def cmd_validate(scen: Scenario, quiet: bool = False) -> int:
    report, problems = _run_validation(scen)
    _write_validation(scen, report)
    _emit(
        quiet,
        f"model            : {scen.model.name or '<custom>'} ({scen.model.topology})",
        f"qk_check         : {report.qk_check}",
        f"convexity_margin : {report.convexity_margin:.6g}",
        f"growth_ok        : {report.growth_ok}",
        f"supL0_at_zero    : {report.supL0_at_zero:.6g}",
        f"kappa bound      : {report.kappa_admissible_bound:.6g}",
        f"cone_samples     : {report.cone_samples}",
    )
    for msg in problems:
        print(f"validation failure: {msg}", file=sys.stderr)
    return EXIT_VALIDATION if problems else EXIT_OK


_SUMMARY_COLUMNS = (
    "branch",
    "t_plus",
    "winding",
    "el_residual",
    "energy_dev",
    "noether_dev",
    "iters",
)


def _summary_row(rec: SolutionRecord) -> list[str]:
    return [
        rec.branch,
        _fmt(rec.t_plus),
        ";".join(str(k) for k in rec.winding),
        _fmt(rec.el_residual),
        _fmt(rec.energy_dev),
        _fmt(rec.noether_dev),
        str(rec.iters),
    ]


def _write_summary(filename: str, rows: list[list[str]], extra_header=()):
    with open(filename, "w", newline="") as fh:
        fh.write(",".join(list(extra_header) + list(_SUMMARY_COLUMNS)) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _solve_one_kappa(scen: Scenario, kappa: float) -> list[SolutionRecord]:
    records = multi_start(
        scen.model, scen.p, scen.q, kappa, scen.seeds, scen.opts
    )
    return [r for r in records if r.converged]


def cmd_solve(scen: Scenario, quiet: bool = False) -> int:
    if len(scen.kappas) != 1:
        raise ScenarioError("solve needs exactly one kappa; use sweep for lists")
    code = cmd_validate(scen, quiet=True)
    if code != EXIT_OK:
        return code
    kappa = scen.kappas[0]
    records = _solve_one_kappa(scen, kappa)
    os.makedirs(scen.out_dir, exist_ok=True)
    rows = []
    for i, rec in enumerate(records):
        path_file = f"path_{i:03d}.txt"
        geo_file = f"geodesic_{i:03d}.txt"
        save_path(rec.z_star, os.path.join(scen.out_dir, path_file))
        save_path(rec.geodesic, os.path.join(scen.out_dir, geo_file))
        with open(os.path.join(scen.out_dir, f"record_{i:03d}.json"), "w") as fh:
            fh.write(record_to_json(rec, path_file, geo_file))
        rows.append(_summary_row(rec))
    _write_summary(os.path.join(scen.out_dir, "summary.csv"), rows)
    _emit(quiet, ",".join(_SUMMARY_COLUMNS), *[",".join(r) for r in rows])
    if not records:
        print("no seed converged", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def cmd_sweep(scen: Scenario, quiet: bool = False) -> int:
    if not scen.kappas:
        raise ScenarioError("sweep needs a non-empty kappa list")
    code = cmd_validate(scen, quiet=True)
    if code != EXIT_OK:
        return code
    os.makedirs(scen.out_dir, exist_ok=True)
    rows = []
    by_class: dict[tuple, list[tuple[float, float]]] = {}
    any_converged = False
    for kappa in sorted(scen.kappas):
        records = _solve_one_kappa(scen, kappa)
        any_converged = any_converged or bool(records)
        for rec in records:
            rows.append([_fmt(kappa)] + _summary_row(rec))
            by_class.setdefault((rec.branch, rec.winding), []).append(
                (kappa, rec.t_plus)
            )
    _write_summary(
        os.path.join(scen.out_dir, "sweep.csv"), rows, extra_header=("kappa",)
    )
    _emit(quiet, ",".join(("kappa",) + _SUMMARY_COLUMNS), *[",".join(r) for r in rows])
    # Larger kappa shrinks the discriminant, so arrival times must not grow.
    for key, pairs in by_class.items():
        pairs.sort()
        for (k0, t0), (k1, t1) in zip(pairs, pairs[1:]):
            if t1 > t0 + 1e-6 * (1.0 + abs(t0)):
                print(
                    f"warning: arrival time not monotone in kappa for {key}: "
                    f"t({k1:g})={t1:.6g} > t({k0:g})={t0:.6g}",
                    file=sys.stderr,
                )
    if not any_converged:
        print("no seed converged for any kappa", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fermatpath",
        description="Fixed-energy connecting trajectories by arrival-time minimization",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("validate", "check model assumptions and kappa admissibility"),
        ("solve", "minimize the arrival time for one kappa"),
        ("sweep", "solve across a kappa list"),
    ):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("scenario", help="scenario configuration file")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--segments", type=int, help="override grid segments")
        sp.add_argument("--seed", type=int, help="override rng seed")
        sp.add_argument("--quiet", action="store_true", help="suppress stdout")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        scen = parse_scenario(
            args.scenario,
            out_dir=args.out,
            segments=args.segments,
            rng_seed=args.seed,
        )
    except (ScenarioError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        if args.command == "validate":
            return cmd_validate(scen, quiet=args.quiet)
        if args.command == "solve":
            return cmd_solve(scen, quiet=args.quiet)
        return cmd_sweep(scen, quiet=args.quiet)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
