"""Batch study runner: configure, solve, tabulate, emit plot data.

A study is a flat JSON config (fields of :class:`StudyConfig`); CLI
flags override file values.  For every (degree, mesh) pair the runner
builds the spaces, assembles, solves and computes error norms, then
writes one CSV row per run plus a log-log plot-data file (relative L2
error against degrees of freedom per wavelength, one series per degree).
Exit codes: 0 success, 2 config error, 3 solver failure.
"""

import argparse
import datetime
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

from .analysis import (
    ConvergenceTable,
    RunRecord,
    compute_errors,
    dofs_per_wavelength,
    eoc_pairs,
)
from .fosls import assemble_classical_fem, assemble_fosls, split_solution
from .mesh import build_interval_mesh, build_square_mesh
from .problems import list_problems, make_problem
from .solver import SolverError, solve_general, solve_hpd
from .spaces import build_h1_space, build_hdiv_space

CSV_COLUMNS = [
    "problem", "method", "d", "k", "p", "n_elems", "h", "DOF", "N_lambda",
    "l2_rel", "h1_err", "bnd_l2", "e1", "e2", "flux_l2", "eoc_l2",
]

MESH_BUILDERS = {
    "piecewise-1d": lambda n: build_interval_mesh(-1.0, 1.0, n),
    "plane-wave-2d": build_square_mesh,
}


class ConfigError(ValueError):
    pass


@dataclass
class StudyConfig:
    problem: str
    k: float
    degrees: list
    mesh_sequence: list
    method: str = "fosls"
    output_dir: str = "study-out"
    avoid_node_at_zero: bool = False
    svg: bool = False

    def validate(self):
        if self.problem not in MESH_BUILDERS:
            raise ConfigError(
                f"unknown problem {self.problem!r}; known: "
                f"{', '.join(sorted(MESH_BUILDERS))}"
            )
        if self.method not in ("fosls", "fem", "both"):
            raise ConfigError("method must be one of fosls, fem, both")
        if not self.k > 0:
            raise ConfigError("k must be positive")
        if not self.degrees or any(
            int(p) != p or p < 1 for p in self.degrees
        ):
            raise ConfigError("degrees must be a nonempty list of integers >= 1")
        ns = self.mesh_sequence
        if not ns or any(int(n) != n or n < 1 for n in ns):
            raise ConfigError("mesh_sequence must be a nonempty list of counts")
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError("mesh_sequence must be strictly refining")
        if self.avoid_node_at_zero and self.problem == "piecewise-1d":
            even = [n for n in ns if n % 2 == 0]
            if even:
                raise ConfigError(
                    f"avoid_node_at_zero requires odd element counts on "
                    f"piecewise-1d; got {even}"
                )
        if not self.output_dir:
            raise ConfigError("output_dir must be set")


def load_config(path, overrides=None):
    """Read a flat JSON config; CLI overrides win over file values."""
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    known = set(StudyConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    missing = {"problem", "k", "degrees", "mesh_sequence"} - set(raw)
    if missing:
        raise ConfigError(f"missing config fields: {', '.join(sorted(missing))}")
    cfg = StudyConfig(**raw)
    cfg.validate()
    return cfg


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.16g}"
    return str(x)


def _solve_one(problem, method, mesh, p):
    w_space = build_h1_space(mesh, p)
    if method == "fosls":
        v_space = (
            build_h1_space(mesh, p) if mesh.dim == 1 else build_hdiv_space(mesh, p)
        )
        system = assemble_fosls(v_space, w_space, problem)
        report = solve_hpd(system)
    else:
        system = assemble_classical_fem(w_space, problem)
        report = solve_general(system)
    return system, split_solution(system, report.solution)


def run_study(config, log=print):
    """Execute a study; returns (ConvergenceTable, output paths)."""
    config.validate()
    problem = make_problem(config.problem, config.k)
    methods = ["fosls", "fem"] if config.method == "both" else [config.method]
    meshes = {n: MESH_BUILDERS[config.problem](n) for n in config.mesh_sequence}

    table = ConvergenceTable()
    for method in methods:
        for p in config.degrees:
            for n in config.mesh_sequence:
                mesh = meshes[n]
                khp = config.k * mesh.h / p
                log(
                    f"run {config.problem} {method} p={p} n={n}: "
                    f"kh/p={khp:.3g}, p/log(k)={p / max(math.log(config.k), 1e-12):.3g}"
                )
                if khp > 1:
                    print(
                        f"warning: kh/p = {khp:.3g} > 1 for p={p}, n={n}; "
                        "the mesh barely resolves the wave scale",
                        file=sys.stderr,
                    )
                system, sol = _solve_one(problem, method, mesh, p)
                errors = compute_errors(sol, problem)
                table.add(RunRecord(
                    problem=config.problem,
                    method=method,
                    d=mesh.dim,
                    k=config.k,
                    p=p,
                    n_elems=len(mesh.elements),
                    h=mesh.h,
                    dof=system.n_total,
                    n_lambda=dofs_per_wavelength(
                        system.n_total, config.k, mesh.domain_measure, mesh.dim
                    ),
                    errors=errors,
                ))

    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / "results.csv"
    plot_path = outdir / "plot_l2_vs_nlambda.csv"
    _write_csv(table, csv_path)
    _write_plot_data(table, plot_path)
    paths = [csv_path, plot_path]
    if config.svg:
        svg_path = outdir / "plot_l2_vs_nlambda.svg"
        _write_svg(table, svg_path)
        paths.append(svg_path)
    return table, paths


def _write_csv(table, path):
    lines = [f"# generated {datetime.datetime.now().isoformat()}"]
    lines.append(",".join(CSV_COLUMNS))
    for (method, p), rows in table.series().items():
        eocs = [""]
        if len(rows) > 1:
            h = [r.h for r in rows]
            e = [r.errors.l2_rel for r in rows]
            eocs += [_fmt(v) for v in eoc_pairs(h, e)]
        for row, eoc in zip(rows, eocs):
            err = row.errors
            lines.append(",".join([
                row.problem, row.method, str(row.d), _fmt(row.k), str(row.p),
                str(row.n_elems), _fmt(row.h), str(row.dof), _fmt(row.n_lambda),
                _fmt(err.l2_rel), _fmt(err.h1_err), _fmt(err.bnd_l2),
                _fmt(err.e1), _fmt(err.e2), _fmt(err.flux_l2), eoc,
            ]))
    Path(path).write_text("\n".join(lines) + "\n")


def _write_plot_data(table, path):
    lines = ["series,N_lambda,l2_rel"]
    for (method, p), rows in table.series().items():
        for row in rows:
            lines.append(
                f"{method}-p{p},{_fmt(row.n_lambda)},{_fmt(row.errors.l2_rel)}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


def _write_svg(table, path, width=640, height=480, margin=60):
    """Minimal log-log SVG rendering of the plot-data series."""
    series = table.series()
    pts_all = [
        (math.log10(r.n_lambda), math.log10(max(r.errors.l2_rel, 1e-300)))
        for rows in series.values() for r in rows
    ]
    if not pts_all:
        Path(path).write_text("<svg xmlns='http://www.w3.org/2000/svg'/>\n")
        return
    xs, ys = zip(*pts_all)
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    x1 += 1e-9
    y1 += 1e-9

    def to_px(lx, ly):
        px = margin + (lx - x0) / (x1 - x0) * (width - 2 * margin)
        py = height - margin - (ly - y0) / (y1 - y0) * (height - 2 * margin)
        return px, py

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [
        f"<svg xmlns='http://www.w3.org/2000/svg' width='{width}' height='{height}'>",
        f"<rect width='{width}' height='{height}' fill='white'/>",
        f"<line x1='{margin}' y1='{height - margin}' x2='{width - margin}' "
        f"y2='{height - margin}' stroke='black'/>",
        f"<line x1='{margin}' y1='{margin}' x2='{margin}' "
        f"y2='{height - margin}' stroke='black'/>",
        f"<text x='{width // 2}' y='{height - margin // 4}' "
        "text-anchor='middle' font-size='12'>log10 N_lambda</text>",
        f"<text x='{margin // 3}' y='{height // 2}' font-size='12' "
        f"transform='rotate(-90 {margin // 3} {height // 2})' "
        "text-anchor='middle'>log10 rel. L2 error</text>",
    ]
    for s, ((method, p), rows) in enumerate(sorted(series.items())):
        color = palette[s % len(palette)]
        coords = " ".join(
            "{:.2f},{:.2f}".format(*to_px(
                math.log10(r.n_lambda), math.log10(max(r.errors.l2_rel, 1e-300))
            ))
            for r in rows
        )
        parts.append(
            f"<polyline points='{coords}' fill='none' stroke='{color}' "
            "stroke-width='1.5'/>"
        )
        parts.append(
            f"<text x='{width - margin + 4}' y='{margin + 14 * s}' "
            f"font-size='11' fill='{color}'>{method}-p{p}</text>"
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="study", description="Helmholtz convergence-study runner"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run a study from a JSON config")
    run_p.add_argument("config")
    run_p.add_argument("--k", type=float, default=None)
    run_p.add_argument("--method", choices=["fosls", "fem", "both"], default=None)
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument("--svg", action="store_true", default=None,
                       help="also render an SVG log-log plot")
    sub.add_parser("list-problems", help="list registered problems")

    args = parser.parse_args(argv)
    if args.command == "list-problems":
        for name in list_problems():
            print(name)
        return 0

    try:
        config = load_config(args.config, overrides={
            "k": args.k, "method": args.method, "output_dir": args.out,
            "svg": args.svg,
        })
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        _, paths = run_study(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    for path in paths:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
