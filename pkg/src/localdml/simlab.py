"""Simulation design for heterogeneous treatment effects and the coverage study runner."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy import integrate
from scipy.special import expit

from .core.data import Dataset
from .core.errors import LocalDMLError
from .core.folds import partition_folds
from .core.functionals import FunctionalSpec, FunctionPredictor
from .core.kernels import Kernel, LocalWeighting, bandwidth_heuristic
from .engine import CrossFit, assemble, crossfit_nuisances, refit_riesz
from .learners import DictionaryLasso, DictionaryRegressor, MLPRegressor, RandomForest
from .riesz import RieszLasso, closed_form_cate_riesz

logger = logging.getLogger(__name__)


def substream(seed, index=None) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by ``(seed, index)``."""
    key = [int(seed)] if index is None else [int(seed), int(index)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, (tuple, list)):
        return substream(*seed)
    return substream(seed)


def dgp_sample(n: int, seed=0) -> Dataset:
    """Draw n observations (Y, D, V, X1, X2, X3).

    V = e1, X1 = 1 + 2V + e2, X2 = 1 + 2V + e3, X3 = (V - 1)^2 + e4 with
    e_j ~ U(-1/2, 1/2); D ~ Bernoulli(logistic((V + X1 + X2 + X3) / 2));
    Y = D * (V X1 X2 X3 + nu), nu ~ N(0, 1/16).
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = _rng(seed)
    eps = rng.uniform(-0.5, 0.5, size=(n, 4))
    v = eps[:, 0]
    x1 = 1.0 + 2.0 * v + eps[:, 1]
    x2 = 1.0 + 2.0 * v + eps[:, 2]
    x3 = (v - 1.0) ** 2 + eps[:, 3]
    pi = expit(0.5 * (v + x1 + x2 + x3))
    d = (rng.uniform(size=n) < pi).astype(float)
    nu = rng.normal(0.0, 0.25, size=n)
    y = d * (v * x1 * x2 * x3 + nu)
    return Dataset(y=y, d=d, v=v, x=np.column_stack([x1, x2, x3]))


def true_cate(v):
    v = np.asarray(v, dtype=float)
    out = v * (1.0 + 2.0 * v) ** 2 * (v - 1.0) ** 2
    return out if out.ndim else float(out)


def true_ate() -> float:
    val, _ = integrate.quad(true_cate, -0.5, 0.5, epsabs=1e-14, epsrel=1e-14)
    return float(val)


def true_propensity(v, x):
    """logistic((v + x1 + x2 + x3) / 2) for scalar ``v`` and length-3 ``x`` (or arrays)."""
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    return expit(0.5 * (v + x.sum(axis=-1)))


def _gamma0(Z):
    return Z[:, 0] * Z[:, 1] * Z[:, 2] * Z[:, 3] * Z[:, 4]


def _gamma0_dd(Z):
    return Z[:, 1] * Z[:, 2] * Z[:, 3] * Z[:, 4]


def _pi0(Z):
    return expit(0.5 * (Z[:, 1] + Z[:, 2] + Z[:, 3] + Z[:, 4]))


gamma0 = FunctionPredictor(_gamma0, dd=_gamma0_dd, name="gamma0")
propensity0 = FunctionPredictor(_pi0, name="pi0")


def alpha0(functional: FunctionalSpec | None = None):
    """True representer for the ATE (no weighting) or a CATE localization."""
    weighting = None if functional is None or not functional.is_local else functional.weighting
    return closed_form_cate_riesz(_pi0, weighting)


LEARNERS = ("lasso", "forest", "nn", "oracle")
REGIMES = ("low", "interactions", "high")


@dataclass(frozen=True)
class SimulationConfig:
    learner: str = "lasso"
    regime: str = "low"
    target: str = "cate"
    points: tuple = (-0.25, 0.0, 0.25)
    c_h: tuple = (0.25, 0.5, 1.0)
    replications: int = 500
    n: int = 100
    n_folds: int = 5
    seed: int = 0
    kernel: str = "gaussian"
    levels: tuple = (0.2, 0.05)
    n_jobs: int = 1
    learner_params: dict = field(default_factory=dict)
    riesz_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.learner not in LEARNERS:
            raise ValueError(f"learner must be one of {LEARNERS}")
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}")
        if self.target not in ("cate", "ate"):
            raise ValueError("target must be 'cate' or 'ate'")
        object.__setattr__(self, "points", tuple(float(p) for p in self.points))
        object.__setattr__(self, "c_h", tuple(float(c) for c in self.c_h))
        object.__setattr__(self, "levels", tuple(float(a) for a in self.levels))

    def as_dict(self) -> dict:
        d = asdict(self)
        for k in ("points", "c_h", "levels"):
            d[k] = list(d[k])
        return d


def make_regressor(cfg: SimulationConfig, seed: int):
    params = dict(cfg.learner_params)
    if cfg.learner == "lasso":
        return DictionaryLasso(dictionary=cfg.regime, **params)
    if cfg.learner == "forest":
        params.setdefault("n_trees", 1000)
        return DictionaryRegressor(RandomForest(random_state=seed, **params), dictionary=cfg.regime)
    if cfg.learner == "nn":
        params.setdefault("hidden", 8)
        return DictionaryRegressor(MLPRegressor(random_state=seed, **params), dictionary=cfg.regime)
    return gamma0


def make_riesz(cfg: SimulationConfig):
    if cfg.learner == "oracle":
        return alpha0
    return RieszLasso(dictionary=cfg.regime, **cfg.riesz_params)


@dataclass(frozen=True)
class Replicate:
    """Outcome of one replication in one cell; ``theta`` is NaN on failure."""

    index: int
    point: float | None
    c_h: float | None
    theta: float
    se: float
    covered: tuple
    error: str | None = None


def _cells(cfg: SimulationConfig):
    if cfg.target == "ate":
        return [(None, None)]
    return [(p, c) for p in cfg.points for c in cfg.c_h]


def run_replication(cfg: SimulationConfig, r: int) -> list[Replicate]:
    """One dataset, one set of cross-fitted nuisances, every (point, c_h) cell."""
    rng = substream(cfg.seed, r)
    data = dgp_sample(cfg.n, rng)
    folds = partition_folds(cfg.n, cfg.n_folds, rng)
    learner_seed = int(rng.integers(2**31 - 1))
    Z, y = data.features(), data.y
    base = FunctionalSpec("ate")
    nan = float("nan")
    try:
        cf = crossfit_nuisances(Z, y, folds, make_regressor(cfg, learner_seed), make_riesz(cfg), base)
    except LocalDMLError as exc:
        return [Replicate(r, p, c, nan, nan, (), f"{type(exc).__name__}: {exc}") for p, c in _cells(cfg)]
    kernel = Kernel(cfg.kernel)
    direct = cfg.learner != "oracle" and cfg.riesz_params.get("strategy", "localize") == "direct"
    out = []
    for point, c_h in _cells(cfg):
        try:
            if point is None:
                functional, truth = base, true_ate()
            else:
                h = bandwidth_heuristic(c_h, data.v, cfg.n)
                w = LocalWeighting.from_sample(data.v, kernel, point, h)
                functional, truth = FunctionalSpec("cate", w), true_cate(point)
            cell_cf = refit_riesz(Z, cf, make_riesz(cfg), functional) if direct and point is not None else cf
            res = assemble(Z, y, cell_cf, functional, level=cfg.levels[-1])
        except LocalDMLError as exc:
            out.append(Replicate(r, point, c_h, nan, nan, (), f"{type(exc).__name__}: {exc}"))
            continue
        covered = tuple(res.interval(a)[0] <= truth <= res.interval(a)[1] for a in cfg.levels)
        out.append(Replicate(r, point, c_h, float(res.theta), float(res.se), covered))
    return out


@dataclass(frozen=True)
class CoverageCell:
    """Aggregate over the successful replications of one (point, c_h) cell."""

    point: float | None
    truth: float
    c_h: float | None
    replications: int
    failures: int
    mean_estimate: float
    mean_se: float
    coverage_80: float
    coverage_95: float

    @property
    def n_ok(self) -> int:
        return self.replications - self.failures

    @property
    def mc_se_80(self) -> float:
        return _binomial_se(self.coverage_80, self.n_ok)

    @property
    def mc_se_95(self) -> float:
        return _binomial_se(self.coverage_95, self.n_ok)

    @property
    def flagged(self) -> bool:
        return self.failures > 0.01 * self.replications


def _binomial_se(p, r):
    return math.sqrt(p * (1.0 - p) / r) if r > 0 else float("nan")


def aggregate(reps: list[Replicate], point, c_h, truth, replications) -> CoverageCell:
    ok = [r for r in reps if r.error is None]
    nan = float("nan")
    if not ok:
        return CoverageCell(point, truth, c_h, replications, replications, nan, nan, nan, nan)
    cov = np.array([r.covered for r in ok], dtype=float)
    return CoverageCell(
        point=point, truth=truth, c_h=c_h, replications=replications, failures=replications - len(ok),
        mean_estimate=float(np.mean([r.theta for r in ok])), mean_se=float(np.mean([r.se for r in ok])),
        coverage_80=float(cov[:, 0].mean()), coverage_95=float(cov[:, -1].mean()),
    )


@dataclass
class SimulationResult:
    config: SimulationConfig
    cells: list
    replicates: list
    wall_time: float

    @property
    def ok(self) -> bool:
        return not any(c.flagged for c in self.cells)


def _run_chunk(cfg, indices):
    return [rep for r in indices for rep in run_replication(cfg, r)]


def run_monte_carlo(cfg: SimulationConfig, progress=None) -> SimulationResult:
    """Run ``cfg.replications`` independent replications and aggregate each cell.

    Replication ``r`` draws everything from the substream ``(cfg.seed, r)``,
    so results do not depend on ``n_jobs`` or execution order.
    """
    t0 = time.perf_counter()
    idx = list(range(cfg.replications))
    n_jobs = cfg.n_jobs if cfg.n_jobs > 0 else (os.cpu_count() or 1)
    if n_jobs == 1:
        reps = []
        for r in idx:
            reps.extend(run_replication(cfg, r))
            if progress is not None:
                progress(r + 1, cfg.replications)
    else:
        chunks = [idx[k::n_jobs] for k in range(n_jobs)]
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            reps = [rep for part in pool.map(_run_chunk, [cfg] * len(chunks), chunks) for rep in part]
    reps.sort(key=lambda rep: (rep.index, _cells(cfg).index((rep.point, rep.c_h))))
    cells = []
    for point, c_h in _cells(cfg):
        truth = true_ate() if point is None else true_cate(point)
        mine = [rep for rep in reps if rep.point == point and rep.c_h == c_h]
        cell = aggregate(mine, point, c_h, truth, cfg.replications)
        if cell.flagged:
            logger.warning("cell v=%s c_h=%s: %d of %d replications failed", point, c_h,
                           cell.failures, cfg.replications)
        cells.append(cell)
    return SimulationResult(cfg, cells, reps, time.perf_counter() - t0)


TABLE_HEADER = ("v", "CATE(v)", "Tuning", "Ave. Est.", "Ave. S.E.", "80% Cov.", "95% Cov.",
                "MC S.E. 80%", "MC S.E. 95%", "Failures")
CSV_FIELDS = ("point", "truth", "c_h", "replications", "failures", "mean_estimate", "mean_se",
              "coverage_80", "coverage_95", "mc_se_80", "mc_se_95")


def _fmt(x, spec):
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else format(x, spec)


def _pct(x):
    return "" if math.isnan(x) else f"{round(100 * x)}%"


def table_markdown(cells, title=None, config: dict | None = None) -> str:
    lines = []
    if title:
        lines += [f"### {title}", ""]
    if config is not None:
        lines += [f"<!-- config: {json.dumps(config, sort_keys=True)} -->", ""]
    lines.append("| " + " | ".join(TABLE_HEADER) + " |")
    lines.append("|" + "|".join(["---"] * len(TABLE_HEADER)) + "|")
    for c in cells:
        row = [_fmt(c.point, ".2f"), _fmt(c.truth, ".2f"), _fmt(c.c_h, ".2f"), _fmt(c.mean_estimate, ".2f"),
               _fmt(c.mean_se, ".2f"), _pct(c.coverage_80), _pct(c.coverage_95), _pct(c.mc_se_80),
               _pct(c.mc_se_95), str(c.failures)]
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def table_csv(cells, config: dict | None = None) -> str:
    """Full-precision CSV; :func:`read_table_csv` restores the cells exactly.

    ``config`` is written as a leading ``# config:`` comment line.
    """
    buf = io.StringIO()
    if config is not None:
        buf.write(f"# config: {json.dumps(config, sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for c in cells:
        w.writerow(["" if getattr(c, f) is None else repr(getattr(c, f)) for f in CSV_FIELDS])
    return buf.getvalue()


def assemble_table(cells, title=None, config: dict | None = None) -> tuple[str, str]:
    """``(markdown, csv)`` renderings of a coverage table."""
    return table_markdown(cells, title, config), table_csv(cells, config)


def table_config(text: str) -> dict | None:
    """The configuration embedded in a table CSV, if any."""
    for line in text.splitlines():
        if line.startswith("# config: "):
            return json.loads(line[len("# config: "):])
    return None


def read_table_csv(text_or_path) -> list[CoverageCell]:
    if isinstance(text_or_path, (str, os.PathLike)) and os.path.exists(str(text_or_path)):
        with open(text_or_path, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = str(text_or_path)
    names = {f.name for f in fields(CoverageCell)}
    cells = []
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    for row in csv.DictReader(io.StringIO(body)):
        kw = {}
        for k, val in row.items():
            if k not in names:
                continue
            if val == "":
                kw[k] = None
            elif k in ("replications", "failures"):
                kw[k] = int(val)
            else:
                kw[k] = float(val)
        cells.append(CoverageCell(**kw))
    return cells
