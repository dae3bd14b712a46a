"""Command line entry point: ``mrconv {estimate,simulate,bench}``.

Settings come from an optional JSON ``--config`` file (a previous run's
``manifest.json`` is accepted too) and are overridden by explicit flags.
Every run writes ``manifest.json`` holding the resolved configuration.

Exit codes: 0 ok, 2 input error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bandwidth import BandwidthRule, bandwidth_conv, bandwidth_rp
from .datagen import PRESETS, AuxiliarySample, CompleteSample, ScenarioSpec, generate_scenario, preset
from .errors import (
    AccuracyError,
    CellError,
    DegenerateDataError,
    MrconvError,
    ParameterError,
    SingularDesignError,
)
from .estimators import Grid, estimate_conv, estimate_rp
from .gausstransform import Backend
from .harness import (
    BENCH_M_VALUES,
    InsufficientDataError,
    mise_study,
    mise_table_csv,
    reference_density,
    slope_in_m,
    slope_in_n,
    timing_bench,
    timing_csv,
)
from .regression import fit_ols

log = logging.getLogger("mrconv")

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3

DEFAULTS = {
    "estimate": {"N": 100, "tau": 16, "V": 128, "backend": "fgt"},
    "simulate": {"N": [50, 100, 200], "tau": [0, 2, 4, 8, 16, 32, 64, 128], "reps": 100, "V": 128, "backend": "fgt"},
    "bench": {"N": 100, "V": 50, "m_values": list(BENCH_M_VALUES), "backends": ["naive", "fft", "fgt"], "repeats": 5},
}
COMMON = {
    "preset": "skewed",
    "scenario": None,
    "normal_param": "sd",
    "seed": 0,
    "out": "out",
    "bandwidth": {"rule": "sj", "fixed_value": None, "select_on": "response"},
    "bins": 4096,
    "eps": 1e-6,
    "source_size": 10**6,
    "workers": 1,
}


class DataFormatError(ParameterError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


def read_data_csv(path):
    """Parse a data file into complete and auxiliary samples.

    The first line is a header. The first column is the response and may be
    empty for auxiliary (covariate-only) rows; the remaining columns are
    covariates. An intercept column is added.
    """
    complete_rows, responses, aux_rows = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(1, "empty file") from None
        width = len(header)
        if width < 2:
            raise DataFormatError(1, "need a response column and at least one covariate")
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != width:
                raise DataFormatError(line, f"expected {width} columns, found {len(row)}")
            try:
                covs = [float(c) for c in row[1:]]
            except ValueError:
                raise DataFormatError(line, "covariate is not a number") from None
            resp = row[0].strip()
            if resp:
                try:
                    responses.append(float(resp))
                except ValueError:
                    raise DataFormatError(line, f"response {resp!r} is not a number") from None
                complete_rows.append(covs)
            else:
                aux_rows.append(covs)
    j = width - 1
    if len(complete_rows) < j + 2:
        raise ParameterError(f"need at least {j + 2} complete rows, found {len(complete_rows)}")
    x = np.asarray(complete_rows, dtype=float)
    complete = CompleteSample(np.asarray(responses), np.column_stack([np.ones(len(x)), x]))
    xa = np.asarray(aux_rows, dtype=float).reshape(-1, j)
    aux = AuxiliarySample(np.column_stack([np.ones(len(xa)), xa]))
    return complete, aux


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def load_config(path):
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ParameterError("config must be a JSON object")
    # a manifest wraps the resolved config
    return doc["config"] if "config" in doc and isinstance(doc["config"], dict) else doc


def resolve_config(command, args):
    cfg = json.loads(json.dumps(COMMON))
    cfg.update(json.loads(json.dumps(DEFAULTS[command])))
    if args.config:
        user = load_config(args.config)
        bw = user.pop("bandwidth", None)
        cfg.update(user)
        if bw:
            cfg["bandwidth"].update(bw)
    overrides = {
        "preset": args.preset,
        "backend": args.backend,
        "seed": args.seed,
        "out": args.out,
        "N": args.N,
        "tau": args.tau,
        "reps": args.reps,
        "V": args.V,
    }
    for extra in ("data", "m_values", "backends", "repeats", "source_size", "workers"):
        if hasattr(args, extra):
            overrides[extra] = getattr(args, extra)
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    if args.preset is not None:
        cfg["scenario"] = None
    if getattr(args, "bandwidth_rule", None):
        cfg["bandwidth"]["rule"] = args.bandwidth_rule
    if getattr(args, "bandwidth_value", None) is not None:
        cfg["bandwidth"]["fixed_value"] = args.bandwidth_value
    cfg["command"] = command
    return cfg


def _scenario(cfg):
    if cfg.get("scenario"):
        return ScenarioSpec.from_dict(cfg["scenario"], cfg["normal_param"])
    return preset(cfg["preset"], cfg["normal_param"])


def _backend(cfg, kind=None):
    kind = kind or cfg["backend"]
    return Backend(kind, bins=int(cfg["bins"]), eps=float(cfg["eps"]))


def _rule(cfg):
    bw = cfg["bandwidth"]
    return BandwidthRule(bw.get("rule", "sj"), bw.get("fixed_value"))


def _scalar(value, name):
    if isinstance(value, list):
        if len(value) != 1:
            raise ParameterError(f"{name} takes a single value for this command")
        value = value[0]
    return value


def _aslist(value):
    return list(value) if isinstance(value, (list, tuple)) else [value]


def _write_manifest(out, cfg, outputs, extra=None):
    manifest = {
        "version": __version__,
        "command": cfg["command"],
        "seeds": {"master": cfg["seed"]},
        "config": cfg,
        "outputs": sorted(outputs),
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_estimate(cfg):
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    seed = int(cfg["seed"])
    if cfg.get("data"):
        complete, aux = read_data_csv(cfg["data"])
    else:
        n = int(_scalar(cfg["N"], "N"))
        tau = _scalar(cfg["tau"], "tau")
        complete, aux = generate_scenario(_scenario(cfg), n, int(round(tau * n)), seed)
    fit = fit_ols(complete)
    rule = _rule(cfg)
    backend = _backend(cfg)

    y = complete.responses
    h_rp = bandwidth_rp(y, rule)
    select_on = cfg["bandwidth"].get("select_on", "response")
    h_base = h_rp if select_on == "response" else bandwidth_rp(fit.residuals, rule)
    l_total = complete.n + aux.m
    h_mr = bandwidth_conv(h_base, l_total)
    grid = Grid.around(y, int(_scalar(cfg["V"], "V")), h_rp)

    rp = estimate_rp(y, grid, h_rp, backend)
    mr = estimate_conv(fit, complete, aux, grid, h_mr, backend)
    rp.write(out / "density_rp.csv", seed)
    mr.write(out / "density_mr.csv", seed)
    outputs = ["density_rp.csv", "density_rp.json", "density_mr.csv", "density_mr.json"]
    _write_manifest(out, cfg, outputs, {"coefficients": fit.coefficients.tolist()})
    log.info("wrote %s", ", ".join(outputs))
    return EXIT_OK


def cmd_simulate(cfg):
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    scenario = _scenario(cfg)
    seed = int(cfg["seed"])
    taus = _aslist(cfg["tau"])
    n_values = sorted(int(n) for n in _aslist(cfg["N"]))
    reps = int(cfg["reps"])
    v = int(_scalar(cfg["V"], "V"))
    reference = reference_density(scenario, seed, v, int(cfg["source_size"]))

    cells, failures = [], []
    for n in n_values:
        try:
            cells += mise_study(
                scenario, [n], taus, reps, seed,
                reference=reference,
                backend=_backend(cfg),
                bandwidth_source=cfg["bandwidth"].get("select_on", "response"),
                workers=int(cfg["workers"]),
            )
        except CellError as exc:
            log.warning("%s", exc)
            failures.append({"N": n, "tau": taus, "error": str(exc.cause)})
    (out / "mise_table.csv").write_text(mise_table_csv(cells))

    slopes = {}
    if len(n_values) >= 4:
        tau0 = min(taus)
        try:
            slopes["slope_in_N"] = slope_in_n(cells, tau0)
        except InsufficientDataError as exc:
            slopes["slope_in_N"] = None
            slopes["slope_in_N_error"] = str(exc)
        slopes["slope_in_N_tau"] = tau0
    if len(set(taus)) >= 4:
        n0 = n_values[0]
        try:
            slopes["slope_in_M"] = slope_in_m(cells, n0)
        except InsufficientDataError as exc:
            slopes["slope_in_M"] = None
            slopes["slope_in_M_error"] = str(exc)
        slopes["slope_in_M_N"] = n0
    (out / "slopes.json").write_text(json.dumps(slopes, indent=2, sort_keys=True) + "\n")
    _write_manifest(
        out, cfg, ["mise_table.csv", "slopes.json"],
        {"failures": failures, "reference_bandwidth": reference.bandwidth},
    )
    return EXIT_OK


def cmd_bench(cfg):
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    backends = [_backend(cfg, kind) for kind in _aslist(cfg["backends"])]
    rows = timing_bench(
        int(_scalar(cfg["N"], "N")),
        int(_scalar(cfg["V"], "V")),
        [int(m) for m in _aslist(cfg["m_values"])],
        backends,
        int(cfg["seed"]),
        scenario=_scenario(cfg),
        repeats=int(cfg["repeats"]),
    )
    (out / "timing.csv").write_text(timing_csv(rows))
    _write_manifest(out, cfg, ["timing.csv"])
    return EXIT_OK


COMMANDS = {"estimate": cmd_estimate, "simulate": cmd_simulate, "bench": cmd_bench}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file or a previous manifest.json")
    common.add_argument("--preset", choices=PRESETS)
    common.add_argument("--backend", choices=("naive", "fft", "fgt"))
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("-N", type=int, nargs="+", help="complete-case sample size(s)")
    common.add_argument("--tau", type=float, nargs="+", help="auxiliary ratio(s) M/N")
    common.add_argument("--reps", type=int, help="Monte Carlo replications")
    common.add_argument("-V", type=int, help="grid size")
    common.add_argument("--bandwidth-rule", choices=("sj", "silverman", "fixed"))
    common.add_argument("--bandwidth-value", type=float, help="bandwidth for --bandwidth-rule fixed")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mrconv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("estimate", parents=[common], help="estimate one density (RP and MR)")
    p.add_argument("--data", help="CSV with response first (empty for auxiliary rows), then covariates")
    p = sub.add_parser("simulate", parents=[common], help="MISE study over (N, tau)")
    p.add_argument("--source-size", type=int, help="reference sample size")
    p.add_argument("--workers", type=int, help="parallel processes for replications")
    p = sub.add_parser("bench", parents=[common], help="timing of the backends")
    p.add_argument("--m-values", type=int, nargs="+")
    p.add_argument("--backends", nargs="+", choices=("naive", "fft", "fgt"))
    p.add_argument("--repeats", type=int)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args.command, args)
        return COMMANDS[args.command](cfg)
    except (SingularDesignError, AccuracyError, DegenerateDataError) as exc:
        print(f"mrconv: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (MrconvError, OSError, KeyError, TypeError, ValueError) as exc:
        print(f"mrconv: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
