"""Command-line entry point: ``localdml {estimate,simulate,bounds,report}``.

Exit status is 0 on success, 1 when a run finished but some cell or estimate
was flagged, and 2 on any error (a JSON error document goes to stderr).
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import platform
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (BoundInputs, bound_report, corollary_checklist, plugin_moments,
                     sigma_h_scaling_probe)
from .config import (BoundsConfig, ConfigError, EstimateConfig, SimulateConfig, dump_config,
                     parse_config)
from .core.data import Dataset
from .core.errors import IngestionError, LocalDMLError, NonConvergenceWarning
from .core.functionals import FunctionalSpec
from .core.kernels import Kernel, LocalWeighting, bandwidth_heuristic
from .engine import DebiasedEstimator
from .learners import DictionaryLasso, DictionaryRegressor, MLPRegressor, RandomForest
from .riesz import RieszLasso

logger = logging.getLogger("localdml")

EXIT_OK, EXIT_FLAGGED, EXIT_ERROR = 0, 1, 2

# learner/regime pairs in the order the coverage tables are reported
REPORT_ORDER = (("nn", "low"), ("forest", "low"), ("lasso", "low"),
                ("nn", "high"), ("forest", "high"), ("lasso", "high"))
LEARNER_LABEL = {"nn": "neural network", "forest": "random forest", "lasso": "lasso", "oracle": "oracle"}


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _manifest(cfg, outputs: list[str], wall_time: float, seeds: dict, extra: dict | None = None) -> dict:
    return {
        "config": dump_config(cfg),
        "seeds": seeds,
        "outputs": sorted(outputs),
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "wall_time_seconds": wall_time,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        **(extra or {}),
    }


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# estimate ---------------------------------------------------------------

def build_functional(cfg: EstimateConfig, data: Dataset) -> FunctionalSpec:
    fc = cfg.functional
    if fc.kind in ("ate", "avg_deriv"):
        return FunctionalSpec(fc.kind)
    kernel = Kernel(fc.kernel_kind)
    if fc.kind == "rdd":
        h = fc.bandwidth if fc.bandwidth is not None else bandwidth_heuristic(fc.c_h, data.d)
        right = LocalWeighting.from_sample(data.d, kernel, fc.point, h, side="right")
        left = LocalWeighting.from_sample(data.d, kernel, fc.point, h, side="left")
        return FunctionalSpec("rdd", right, left)
    if not data.has_v:
        raise ConfigError(f"functional kind {fc.kind!r} needs a 'v' column")
    h = fc.bandwidth if fc.bandwidth is not None else bandwidth_heuristic(fc.c_h, data.v)
    return FunctionalSpec(fc.kind, LocalWeighting.from_sample(data.v, kernel, fc.point, h))


def build_regressor(cfg: EstimateConfig):
    lc = cfg.learner
    params = dict(lc.params)
    if lc.kind == "lasso":
        return DictionaryLasso(dictionary=lc.dictionary, **params)
    params.setdefault("random_state", cfg.seed)
    if lc.kind == "forest":
        return DictionaryRegressor(RandomForest(**params), dictionary=lc.dictionary)
    return DictionaryRegressor(MLPRegressor(**params), dictionary=lc.dictionary)


def build_riesz(cfg: EstimateConfig) -> RieszLasso:
    rc = cfg.riesz
    return RieszLasso(dictionary=rc.dictionary, penalty=rc.penalty, c=rc.c, strategy=rc.strategy,
                      trim=rc.trim, normalize=rc.normalize)


def cmd_estimate(cfg: EstimateConfig) -> int:
    t0 = time.perf_counter()
    data = Dataset.from_csv(cfg.data, cfg.columns.model_dump())
    functional = build_functional(cfg, data)
    est = DebiasedEstimator(functional, build_regressor(cfg), build_riesz(cfg), n_folds=cfg.n_folds,
                            level=cfg.level, random_state=cfg.seed, n_jobs=cfg.n_jobs)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NonConvergenceWarning)
        est.fit(data)
    nonconv = [str(w.message) for w in caught if issubclass(w.category, NonConvergenceWarning)]
    res = est.result_
    diag = plugin_moments(res.psi).as_dict()
    diag["max_abs_alpha"] = float(np.max(np.abs(res.alpha)))
    payload = res.to_dict()
    payload["config"] = dump_config(cfg)
    payload["diagnostics"] = diag
    payload["warnings"] = nonconv
    out = Path(cfg.output_dir)
    _write(out / "result.json", _dump(payload))
    buf = [",".join(res.CSV_FIELDS)]
    row = res.csv_row()
    buf.append(",".join("" if row[k] is None else str(row[k]) for k in res.CSV_FIELDS))
    _write(out / "result.csv", "\n".join(buf) + "\n")
    _write(out / "manifest.json", _dump(_manifest(cfg, ["result.json", "result.csv", "manifest.json"],
                                                 time.perf_counter() - t0, {"seed": cfg.seed})))
    lo, hi = res.ci
    print(f"theta = {res.theta:.6g}")
    print(f"sigma = {res.sigma:.6g}  (se = {res.se:.6g}, n = {res.n})")
    print(f"{100 * (1 - res.level):g}% CI = [{lo:.6g}, {hi:.6g}]")
    print("plug-in diagnostics: " + ", ".join(f"{k}={v:.4g}" for k, v in diag.items()
                                             if isinstance(v, float)))
    for msg in nonconv:
        print(f"warning: {msg}")
    return EXIT_FLAGGED if nonconv else EXIT_OK


# simulate ---------------------------------------------------------------

def coverage_basename(learner: str, regime: str) -> str:
    return f"coverage_{regime}_{learner}"


def table_title(learner: str, regime: str) -> str:
    dim = {"low": "low dimensional", "high": "high dimensional", "interactions": "full interactions"}[regime]
    return f"{LEARNER_LABEL[learner]}, {dim}"


def cmd_simulate(cfg: SimulateConfig) -> int:
    from .simlab import SimulationConfig, assemble_table, run_monte_carlo

    sim_cfg = SimulationConfig(**cfg.simulation_kwargs())
    stream = sys.stderr if sys.stderr.isatty() else None

    def progress(done, total):
        if stream is not None and (done % 10 == 0 or done == total):
            print(f"\r{done}/{total}", end="", file=stream, flush=True)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        res = run_monte_carlo(sim_cfg, progress=progress)
    if stream is not None:
        print(file=stream)
    base = coverage_basename(cfg.learner, cfg.regime)
    config = dump_config(cfg)
    md, csv_text = assemble_table(res.cells, table_title(cfg.learner, cfg.regime), config)
    out = Path(cfg.output_dir)
    _write(out / f"{base}.md", md)
    _write(out / f"{base}.csv", csv_text)
    flagged = [c for c in res.cells if c.flagged]
    _write(out / f"{base}.manifest.json", _dump(_manifest(
        cfg, [f"{base}.md", f"{base}.csv", f"{base}.manifest.json"], res.wall_time,
        {"seed": cfg.seed, "substreams": f"Philox keyed by (seed, replication) for replication in 0..{cfg.replications - 1}"},
        {"flagged_cells": [{"point": c.point, "c_h": c.c_h, "failures": c.failures} for c in flagged]})))
    print(md, end="")
    return EXIT_FLAGGED if flagged else EXIT_OK


# bounds -----------------------------------------------------------------

def cmd_bounds(cfg: BoundsConfig) -> int:
    t0 = time.perf_counter()
    out = Path(cfg.output_dir)
    outputs = []
    report: dict = {"config": dump_config(cfg)}
    if isinstance(cfg.inputs, dict):
        report["bounds"] = bound_report(BoundInputs(**cfg.inputs), cfg.sigma_h)
    elif isinstance(cfg.inputs, list):
        seq = [BoundInputs(**d) for d in cfg.inputs]
        report["bounds"] = [bound_report(b) for b in seq]
        report["checklist"] = corollary_checklist(seq).as_dict()
    if cfg.probe is not None:
        from .simlab import alpha0, dgp_sample, gamma0

        p = cfg.probe
        data = dgp_sample(p.n, p.seed)
        probe = sigma_h_scaling_probe(p.bandwidths, data, gamma0, alpha0, point=p.point, kernel=Kernel(p.kernel))
        report["sigma_h_probe"] = {"bandwidths": probe.bandwidths, "sigmas": probe.sigmas, "slope": probe.slope}
        lines = ["bandwidth,sigma_h"] + [f"{h!r},{s!r}" for h, s in zip(probe.bandwidths, probe.sigmas)]
        _write(out / "sigma_h_probe.csv", f"# config: {json.dumps(dump_config(cfg), sort_keys=True)}\n"
               + "\n".join(lines) + "\n")
        outputs.append("sigma_h_probe.csv")
    if "checklist" in report:
        ck = report["checklist"]
        names = ["moment_ratio", "condition_1", "condition_2", "condition_3"]
        rows = ["n," + ",".join(names)]
        rows += [f"{n}," + ",".join(repr(ck[k][i]) for k in names) for i, n in enumerate(ck["n"])]
        _write(out / "checklist.csv", f"# config: {json.dumps(dump_config(cfg), sort_keys=True)}\n"
               + "\n".join(rows) + "\n")
        outputs.append("checklist.csv")
    _write(out / "bounds.json", _dump(report))
    outputs += ["bounds.json", "manifest.json"]
    _write(out / "manifest.json", _dump(_manifest(cfg, outputs, time.perf_counter() - t0,
                                                 {"seed": cfg.probe.seed if cfg.probe else None})))
    shown = {k: v for k, v in report.items() if k != "config"}
    print(json.dumps(shown, indent=2, sort_keys=True))
    return EXIT_OK


# report -----------------------------------------------------------------

def collect_tables(directory) -> list[tuple[str, str, list, dict | None]]:
    """Coverage CSVs in ``directory`` as ``(learner, regime, cells, config)``, in report order."""
    from .simlab import read_table_csv, table_config

    directory = Path(directory)
    found = {}
    for path in sorted(directory.glob("coverage_*_*.csv")):
        _, regime, learner = path.stem.split("_", 2)
        text = path.read_text(encoding="utf-8")
        found[(learner, regime)] = (read_table_csv(text), table_config(text))
    order = [k for k in REPORT_ORDER if k in found] + sorted(k for k in found if k not in REPORT_ORDER)
    return [(lr, rg, *found[(lr, rg)]) for lr, rg in order]


def render_report(directory) -> str:
    from .simlab import table_markdown

    tables = collect_tables(directory)
    if not tables:
        raise LocalDMLError(f"no coverage_<regime>_<learner>.csv files in {directory}")
    parts = ["# Coverage of localized debiased confidence intervals", ""]
    for learner, regime, cells, config in tables:
        parts.append(table_markdown(cells, table_title(learner, regime), config))
    return "\n".join(parts)


def cmd_report(directory, output=None) -> int:
    text = render_report(directory)
    target = Path(output) if output else Path(directory) / "coverage_report.md"
    _write(target, text)
    print(text, end="")
    return EXIT_OK


# entry point ------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="localdml", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (("estimate", "debiased estimate and interval from a CSV"),
                           ("simulate", "Monte Carlo coverage table on the simulation design"),
                           ("bounds", "finite-sample bound calculators and probes")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="JSON configuration file")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (dotted path, JSON value); repeatable")
        p.add_argument("--output-dir", help="shorthand for --set output_dir=DIR")
    p = sub.add_parser("report", help="collate coverage tables into one markdown document")
    p.add_argument("directory")
    p.add_argument("--output", help="default: DIRECTORY/coverage_report.md")
    return ap


def _error_document(exc: BaseException) -> dict:
    doc = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, IngestionError) and getattr(exc, "row", None) is not None:
        doc["row"] = exc.row
    return doc


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("LOCALDML_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = _parser().parse_args(argv)
    try:
        if args.command == "report":
            return cmd_report(args.directory, args.output)
        overrides = list(args.overrides)
        if args.output_dir:
            overrides.append(f"output_dir={json.dumps(args.output_dir)}")
        cfg = parse_config(args.config, args.command, overrides)
        return {"estimate": cmd_estimate, "simulate": cmd_simulate, "bounds": cmd_bounds}[args.command](cfg)
    except (LocalDMLError, ConfigError, ValueError, OSError) as exc:
        print(json.dumps(_error_document(exc)), file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
