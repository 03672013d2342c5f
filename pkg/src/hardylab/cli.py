"""Command-line entry point, config handling, and report persistence.

Exit codes: 0 certified / all residuals in tolerance, 2 violated,
3 inconclusive, 4 I/O failure writing outputs, 64 usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import forms, hardy, identities
from .grids import LOGARITHMIC, UNIFORM, make_plane_grid, make_radial_grid, make_signed_grid

SCHEMA_VERSION = 1
COMMANDS = ("verify-ab", "verify-confining", "baselines", "sharpness", "identities",
            "weyl", "spectrum-landau")

EXIT_OK = 0
EXIT_VIOLATED = 2
EXIT_INCONCLUSIVE = 3
EXIT_IO = 4
EXIT_USAGE = 64

SEED_ENV = "HARDYLAB_SEED"


class CliError(ValueError):
    """Configuration error; the message names the offending key."""


# ---------------------------------------------------------------------------
# option registry
# ---------------------------------------------------------------------------

def _f_float(key, s):
    try:
        return float(s)
    except (TypeError, ValueError):
        raise CliError(f"invalid value for '{key}': {s!r} is not a number") from None


def _f_int(key, s):
    try:
        return int(str(s), 10)
    except (TypeError, ValueError):
        raise CliError(f"invalid value for '{key}': {s!r} is not an integer") from None


def _f_bool(key, s):
    if isinstance(s, bool):
        return s
    t = str(s).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise CliError(f"invalid value for '{key}': {s!r} is not a boolean")


def _f_str(key, s):
    return str(s)


def _f_floats(key, s):
    if isinstance(s, (list, tuple)):
        return [float(v) for v in s]
    return [_f_float(key, part) for part in str(s).split(",") if part.strip()]


def _f_ints(key, s):
    if isinstance(s, (list, tuple)):
        return [int(v) for v in s]
    return [_f_int(key, part) for part in str(s).split(",") if part.strip()]


def _f_choice(*options):
    def parse(key, s):
        if s not in options:
            raise CliError(f"invalid value for '{key}': {s!r} not in {options}")
        return s
    return parse


def _f_gridspecs(key, s):
    """Comma-separated inner:outer:n triplets."""
    if isinstance(s, list):
        return s
    out = []
    for part in str(s).split(","):
        if not part.strip():
            continue
        bits = part.split(":")
        if len(bits) != 3:
            raise CliError(f"invalid value for '{key}': {part!r} is not inner:outer:n")
        out.append((_f_float(key, bits[0]), _f_float(key, bits[1]), _f_int(key, bits[2])))
    return out


def _positive(key, v):
    if not v > 0:
        raise CliError(f"'{key}' must be positive, got {v}")


def _at_least(bound):
    def check(key, v):
        if v < bound:
            raise CliError(f"'{key}' must be >= {bound}, got {v}")
    return check


@dataclass(frozen=True)
class Opt:
    parse: object
    default: object
    check: object = None
    flag: str | None = None  # CLI flag (without --); defaults to the last key part
    help: str = ""


COMMON_OPTS = {
    "solver.tol": Opt(_f_float, 1e-8, _positive, "tol", "residual tolerance"),
    "solver.max_iter": Opt(_f_int, 5000, _at_least(1), "max-iter", "iteration cap"),
    "solver.seed": Opt(_f_int, 0, None, "seed", "start-vector seed"),
    "sweep.workers": Opt(_f_int, 1, _at_least(1), "workers", "parallel solves"),
    "tolerances.c_disc": Opt(_f_float, hardy.TOL_DISC_COEFF, _positive, "c-disc",
                             "discretization tolerance coefficient (tol_disc = c*h)"),
    "output.path": Opt(_f_str, "report.json", None, "out", "report file"),
    "output.format": Opt(_f_choice("json", "csv"), "json", None, "format", "report format"),
    "output.plot_csv": Opt(_f_str, None, None, "plot-csv", "also emit plot CSV here"),
}

COMMAND_OPTS: dict[str, dict[str, Opt]] = {
    "verify-ab": {
        "ab.alpha": Opt(_f_float, 0.5, None, "alpha", "flux parameter"),
        "ab.dim": Opt(_f_int, 2, _at_least(2), "dim", "ambient dimension"),
        "ab.m_set": Opt(_f_ints, None, None, "m-set", "angular modes (csv)"),
        "ab.rhs_constant": Opt(_f_float, None, None, "rhs-constant",
                               "override the target constant (falsification control)"),
        "grid.outer": Opt(_f_floats, [1e2, 1e4, 1e6], None, "outer", "outer radii (csv)"),
        "grid.inner": Opt(_f_float, None, _positive, "inner",
                          "inner cutoff (default 1/outer per grid)"),
        "grid.n": Opt(_f_ints, None, None, "n", "nodes per axis (csv or single)"),
    },
    "verify-confining": {
        "confining.beta": Opt(_f_float, 1.0, None, "beta", "field strength"),
        "confining.xi_set": Opt(_f_floats, None, None, "xi-set", "fiber values (csv)"),
        "confining.variant": Opt(_f_choice("elementary", "full", "with_xi"), "full",
                                 None, "variant", "subtraction variant"),
        "confining.y2_coefficient": Opt(_f_float, None, None, "y2-coefficient",
                                        "override/inflate the y^2/z^4 coefficient"),
        "confining.best_constant": Opt(_f_bool, False, None, "best-constant",
                                       "report best constants on the largest grid"),
        "grid.sizes": Opt(_f_ints, [160, 240, 300], None, "sizes", "nodes per axis (csv)"),
        "grid.y_extent": Opt(_f_float, 8.0, _positive, "y-extent", "half-width in y"),
        "grid.z_min": Opt(_f_float, 0.25, _positive, "z-min", "inner z cutoff"),
        "grid.z_max": Opt(_f_float, 50.0, _positive, "z-max", "outer z radius"),
    },
    "baselines": {
        "grid.specs": Opt(_f_gridspecs,
                          [(1e-1, 1e1, 10), (1e-2, 1e2, 50), (1e-4, 1e4, 400),
                           (1e-6, 1e6, 2000)],
                          None, "grids", "log grids as inner:outer:n triplets (csv)"),
    },
    "sharpness": {
        "sharpness.n_values": Opt(_f_floats, [float(np.exp(5)), float(np.exp(10)),
                                              float(np.exp(20))],
                                  None, "n-values", "cutoff scales (csv)"),
        "sharpness.rtol": Opt(_f_float, 0.01, _positive, "rtol", "relative tolerance"),
        "sharpness.quad_n": Opt(_f_int, 4001, _at_least(3), "quad-n", "quadrature nodes"),
    },
    "identities": {
        "identities.beta": Opt(_f_float, 1.0, None, "beta", "field strength"),
        "identities.xi": Opt(_f_float, 0.7, None, "xi", "fiber value"),
        "identities.n": Opt(_f_int, 1201, _at_least(64), "n", "fiber grid nodes per axis"),
        "identities.box_n": Opt(_f_int, 64, _at_least(16), "box-n", "3D box nodes per axis"),
        "identities.tol_residual": Opt(_f_float, 1e-6, _positive, "tol-residual",
                                       "acceptance threshold for residuals"),
    },
    "weyl": {
        "weyl.beta": Opt(_f_float, 1.0, None, "beta", "field strength"),
        "weyl.k_set": Opt(_f_floats, [0.0, 1.0], None, "k-set", "wavenumbers (csv)"),
        "weyl.n_set": Opt(_f_floats, [8.0, 16.0, 32.0], None, "n-set", "packet scales (csv)"),
    },
    "spectrum-landau": {
        "landau.beta": Opt(_f_float, 1.0, None, "beta", "field strength"),
        "landau.z": Opt(_f_float, 1.0, None, "z", "distance to the singular plane"),
        "landau.xi": Opt(_f_float, 0.0, None, "xi", "fiber value"),
        "landau.n_levels": Opt(_f_int, 3, _at_least(1), "n-levels", "levels to compare"),
        "landau.y_extent": Opt(_f_float, 10.0, _positive, "y-extent", "half-width in y"),
        "landau.n": Opt(_f_int, 2000, _at_least(16), "n", "grid nodes"),
        "landau.rtol": Opt(_f_float, 1e-3, _positive, "rtol", "relative tolerance"),
    },
}


def _options_for(command: str) -> dict[str, Opt]:
    table = dict(COMMON_OPTS)
    table.update(COMMAND_OPTS[command])
    return table


@dataclass
class RunConfig:
    command: str
    options: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.options[key]


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _read_config_file(path: str) -> dict[str, str]:
    """Line-oriented `key = value` text with # comments and dotted keys."""
    values: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise CliError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
                key, _, value = line.partition("=")
                values[key.strip()] = value.strip()
    except OSError as exc:
        raise CliError(f"cannot read config file {path}: {exc}") from None
    return values


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep exit-code contract; argparse would exit 2
        raise CliError(message)


def parse_config(argv, config_file: str | None = None) -> RunConfig:
    """Resolve a RunConfig: defaults, then config file, then flags, then the
    HARDYLAB_SEED environment override.  Every value is validated against its
    precondition; errors name the offending key."""
    argv = list(argv)
    if not argv:
        raise CliError(f"missing command; choose from {COMMANDS}")
    command = argv[0]
    if command in ("-h", "--help"):
        _top_level_help()
        raise SystemExit(0)
    if command not in COMMANDS:
        raise CliError(f"unknown command {command!r}; choose from {COMMANDS}")
    table = _options_for(command)

    parser = _Parser(prog=f"hardylab {command}", add_help=True)
    parser.add_argument("--config", default=None, help="key = value config file")
    flag_to_key = {}
    for key, opt in table.items():
        flag = opt.flag or key.rsplit(".", 1)[-1].replace("_", "-")
        flag_to_key[flag] = key
        if opt.parse is _f_bool:
            parser.add_argument(f"--{flag}", nargs="?", const="true", default=None,
                                help=opt.help, metavar="BOOL")
        else:
            parser.add_argument(f"--{flag}", default=None, help=opt.help)
    ns = parser.parse_args(argv[1:])

    merged = {key: opt.default for key, opt in table.items()}
    cfg_path = config_file or ns.config
    if cfg_path:
        for key, raw in _read_config_file(cfg_path).items():
            if key not in table:
                raise CliError(f"unknown key '{key}' in {cfg_path}")
            merged[key] = table[key].parse(key, raw)
    for flag, key in flag_to_key.items():
        raw = getattr(ns, flag.replace("-", "_"))
        if raw is not None:
            merged[key] = table[key].parse(key, raw)
    if os.environ.get(SEED_ENV):
        merged["solver.seed"] = _f_int("solver.seed", os.environ[SEED_ENV])
    for key, opt in table.items():
        if opt.check is not None and merged[key] is not None:
            opt.check(key, merged[key])
    return RunConfig(command, merged)


def _top_level_help():
    print("usage: hardylab COMMAND [--config FILE] [flags]\ncommands:")
    for c in COMMANDS:
        print(f"  {c}")
    print("run 'hardylab COMMAND --help' for per-command flags")


# ---------------------------------------------------------------------------
# report file
# ---------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


@dataclass
class ReportFile:
    schema_version: int
    command: str
    parameters: dict
    rows: list
    verdict: str
    timing_ms: float

    @staticmethod
    def build(command: str, parameters: dict, rows: list, verdict: str,
              timing_ms: float) -> "ReportFile":
        return ReportFile(SCHEMA_VERSION, command, _jsonable(parameters), _jsonable(rows),
                          verdict, float(timing_ms))

    def serialize(self) -> str:
        payload = {
            "schema_version": self.schema_version,
            "command": self.command,
            "parameters": self.parameters,
            "rows": self.rows,
            "verdict": self.verdict,
            "timing_ms": self.timing_ms,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @staticmethod
    def parse(text: str) -> "ReportFile":
        data = json.loads(text)
        return ReportFile(data["schema_version"], data["command"], data["parameters"],
                          data["rows"], data["verdict"], data["timing_ms"])


ROW_FIELDS = ("channel_or_xi", "lambda_min", "margin", "residual", "tol_disc", "converged")


def emit_plot_data(report: ReportFile, path: str) -> None:
    """Wide CSV: one row per grid, one column group per channel/xi series;
    values are lambda_min where present, residuals otherwise."""
    if not report.rows:
        raise CliError("cannot emit plot data from an empty report")
    series: list = []
    grids: list[str] = []
    values: dict[tuple[str, str], float] = {}
    for row in report.rows:
        s = str(row.get("channel_or_xi"))
        g = json.dumps(row.get("grid"), sort_keys=True)
        if s not in series:
            series.append(s)
        if g not in grids:
            grids.append(g)
        v = row.get("lambda_min")
        if v is None:
            v = row.get("residual")
        values[(g, s)] = v
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["grid"] + [f"{report.command}:{s}" for s in series])
        for g in grids:
            writer.writerow([g] + [values.get((g, s), "") for s in series])


def _write_rows_csv(report: ReportFile, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("grid",) + ROW_FIELDS)
        for row in report.rows:
            writer.writerow([json.dumps(row.get("grid"), sort_keys=True)]
                            + [row.get(k) for k in ROW_FIELDS])


# ---------------------------------------------------------------------------
# command runners
# ---------------------------------------------------------------------------

def _solver_kwargs(o: dict) -> dict:
    return {"tol": o["solver.tol"], "max_iter": o["solver.max_iter"],
            "seed": o["solver.seed"], "tol_coeff": o["tolerances.c_disc"]}


def _run_verify_ab(o: dict):
    outers = o["grid.outer"]
    d = o["ab.dim"]
    ns = o["grid.n"]
    if ns is None:
        ns = [400] * len(outers) if d == 2 else [200, 260, 300][: len(outers)]
        ns = ns + [ns[-1]] * (len(outers) - len(ns))
    elif len(ns) == 1:
        ns = ns * len(outers)
    grids = hardy.ab_grid_family(d, outers, ns, o["grid.inner"])
    rep = hardy.verify_ab(o["ab.alpha"], d, o["ab.m_set"], grids,
                          rhs_constant=o["ab.rhs_constant"], workers=o["sweep.workers"],
                          **_solver_kwargs(o))
    params = {"workflow": rep.parameters, "convergence": rep.convergence,
              "diagnostics": rep.diagnostics, "target_constant": rep.target_constant}
    return params, [r.as_dict() for r in rep.rows], rep.verdict


def _run_verify_confining(o: dict):
    grids = hardy.confining_grid_family(o["grid.sizes"], o["grid.y_extent"],
                                        (o["grid.z_min"], o["grid.z_max"]))
    rep = hardy.verify_confining(o["confining.beta"], o["confining.xi_set"], grids,
                                 variant=o["confining.variant"],
                                 y2_coefficient=o["confining.y2_coefficient"],
                                 report_best_constant=o["confining.best_constant"],
                                 workers=o["sweep.workers"], **_solver_kwargs(o))
    params = {"workflow": rep.parameters, "convergence": rep.convergence,
              "diagnostics": rep.diagnostics, "target_constant": rep.target_constant}
    return params, [r.as_dict() for r in rep.rows], rep.verdict


def _run_baselines(o: dict):
    grids = [make_radial_grid(LOGARITHMIC, a, b, n) for a, b, n in o["grid.specs"]]
    rep = hardy.hardy_baselines(grids, **_solver_kwargs(o))
    params = {"workflow": rep.parameters, "convergence": rep.convergence,
              "target_constant": rep.target_constant}
    return params, [r.as_dict() for r in rep.rows], rep.verdict


def _run_sharpness(o: dict):
    rows = []
    ok = True
    for n in o["sharpness.n_values"]:
        seq = hardy.sharpness_sequence(n, o["sharpness.quad_n"])
        exact = 1.0 / np.log(n)
        rel = abs(seq.dirichlet_integral - exact) / exact
        ok = ok and rel <= o["sharpness.rtol"]
        rows.append({
            "grid": {"inner": n, "outer": n**2, "n": o["sharpness.quad_n"], "kind": LOGARITHMIC},
            "channel_or_xi": n, "lambda_min": seq.dirichlet_integral,
            "margin": seq.dirichlet_integral - exact, "residual": rel,
            "tol_disc": o["sharpness.rtol"], "converged": True,
        })
    verdict = hardy.VERDICT_OK if ok else hardy.VERDICT_VIOLATED
    return {"n_values": o["sharpness.n_values"], "rtol": o["sharpness.rtol"]}, rows, verdict


def _identity_battery(beta: float, xi: float, n: int, box_n: int):
    """(label, residual) pairs for the substitution, commutator, and
    diamagnetic checks on default analytic test functions."""
    y = make_signed_grid(-10.0, 10.0, n)
    z = make_radial_grid(UNIFORM, 0.4, 8.0, n)
    grid = make_plane_grid(y, z)
    spec = forms.ConfiningSpec(beta, xi)
    bump = identities.gaussian_fiber((0.6, 3.8), (1.1, 0.55), wave=(0.4, 0.3))
    ansatz = identities.closed_form_ansatz()
    out = [("form2:gaussian", identities.substitution_identity_residual("form2", bump, spec, grid))]
    if beta != 0:
        out += [
            ("form3:gaussian",
             identities.substitution_identity_residual("form3", bump, spec, grid)),
            ("form4:gaussian",
             identities.substitution_identity_residual("form4", bump, spec, grid, ansatz)),
        ]
    box = identities.make_box3((0.0, 0.0, 3.0), (2.5, 2.5, 2.5), box_n)
    psi = identities.gaussian3((0.2, -0.1, 3.05), (0.40, 0.42, 0.38), wave=(0.8, 0.4, 0.6),
                               phase_xy=0.3)
    for (j, k) in ((1, 2), (1, 3), (2, 3)):
        for sign in (+1, -1):
            out.append((f"commutator:{j}{k}:{'+' if sign > 0 else '-'}",
                        identities.commutator_identity_residual(psi, j, k, sign, beta, box)))
    margin = identities.diamagnetic_margin(psi, ("confining", beta), box)
    out.append(("diamagnetic:confining", max(0.0, -margin)))
    return out


def _run_identities(o: dict):
    checks = _identity_battery(o["identities.beta"], o["identities.xi"],
                               o["identities.n"], o["identities.box_n"])
    tol = o["identities.tol_residual"]
    rows = [{
        "grid": {"inner": None, "outer": None, "n": o["identities.n"], "kind": "battery"},
        "channel_or_xi": label, "lambda_min": None, "margin": None,
        "residual": res, "tol_disc": tol, "converged": bool(res <= tol),
    } for label, res in checks]
    ok = all(r["converged"] for r in rows)
    verdict = hardy.VERDICT_OK if ok else hardy.VERDICT_VIOLATED
    params = {"beta": o["identities.beta"], "xi": o["identities.xi"],
              "tol_residual": tol}
    return params, rows, verdict


def _run_weyl(o: dict):
    rows = []
    ok = True
    for k in o["weyl.k_set"]:
        residuals = []
        for n in o["weyl.n_set"]:
            r = identities.weyl_residual(o["weyl.beta"], k, n)
            residuals.append(r)
            rows.append({
                "grid": {"inner": None, "outer": None, "n": n, "kind": "packet"},
                "channel_or_xi": f"k={k:g},n={n:g}", "lambda_min": None, "margin": None,
                "residual": r, "tol_disc": None, "converged": True,
            })
        ok = ok and all(b < a for a, b in zip(residuals, residuals[1:]))
    verdict = hardy.VERDICT_OK if ok else hardy.VERDICT_VIOLATED
    return {"beta": o["weyl.beta"], "k_set": o["weyl.k_set"], "n_set": o["weyl.n_set"]}, rows, verdict


def _run_spectrum_landau(o: dict):
    levels, exact = hardy.landau_fiber_levels(
        o["landau.beta"], o["landau.z"], o["landau.xi"], o["landau.n_levels"],
        o["landau.y_extent"], o["landau.n"], tol=o["solver.tol"],
        max_iter=o["solver.max_iter"], seed=o["solver.seed"])
    rows = []
    ok = True
    for i, (lv, ex) in enumerate(zip(levels, exact)):
        rel = abs(lv - ex) / abs(ex)
        ok = ok and rel <= o["landau.rtol"]
        rows.append({
            "grid": {"inner": -o["landau.y_extent"], "outer": o["landau.y_extent"],
                     "n": o["landau.n"], "kind": UNIFORM},
            "channel_or_xi": i, "lambda_min": float(lv), "margin": float(lv - ex),
            "residual": rel, "tol_disc": o["landau.rtol"], "converged": bool(rel <= o["landau.rtol"]),
        })
    verdict = hardy.VERDICT_OK if ok else hardy.VERDICT_VIOLATED
    params = {"beta": o["landau.beta"], "z": o["landau.z"], "xi": o["landau.xi"],
              "closed_form": [float(e) for e in exact]}
    return params, rows, verdict


RUNNERS = {
    "verify-ab": _run_verify_ab,
    "verify-confining": _run_verify_confining,
    "baselines": _run_baselines,
    "sharpness": _run_sharpness,
    "identities": _run_identities,
    "weyl": _run_weyl,
    "spectrum-landau": _run_spectrum_landau,
}


def run(config: RunConfig) -> int:
    """Execute the configured command; the report is always written."""
    t0 = time.perf_counter()
    params, rows, verdict = RUNNERS[config.command](config.options)
    params = dict(params)
    params["solver"] = {"tol": config.options["solver.tol"],
                        "max_iter": config.options["solver.max_iter"],
                        "seed": config.options["solver.seed"]}
    timing_ms = (time.perf_counter() - t0) * 1000.0
    report = ReportFile.build(config.command, params, rows, verdict, timing_ms)
    out = config.options["output.path"]
    try:
        if config.options["output.format"] == "json":
            with open(out, "w", encoding="utf-8") as fh:
                fh.write(report.serialize())
        else:
            _write_rows_csv(report, out)
        if config.options["output.plot_csv"]:
            emit_plot_data(report, config.options["output.plot_csv"])
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    for row in rows:
        print(f"  {row['channel_or_xi']}: margin={row.get('margin')} "
              f"residual={row.get('residual')} converged={row.get('converged')}")
    print(f"verdict: {verdict} (report: {out})")
    if verdict == hardy.VERDICT_OK:
        return EXIT_OK
    if verdict == hardy.VERDICT_VIOLATED:
        return EXIT_VIOLATED
    return EXIT_INCONCLUSIVE


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = parse_config(argv)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
