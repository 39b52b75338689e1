"""Monte Carlo trials, experiment grids and capture classification.

A trial synthesizes one scenario with a seed derived from the master seed
and the trial index, classifies it blind and scores the verdict at the
access-method level. Trials are independent, so a worker pool and a
serial loop give the same counts.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from .class_stats import PSK_ORDERS, NoisyPowerRatio, reference_table, table_csv_rows
from .classifier import AnalysisParams, ClassificationResult, classify
from .errors import ConfigurationError, InsufficientDataError
from .netsim import DEFAULT_USERS, METHODS, ScenarioConfig, read_capture, synthesize_scenario, write_capture

# Table II modulations each access method is averaged over
CLASS_MODULATIONS = {
    "TDMA": ("BPSK", "PSK", "4-PAM", "8-PAM", "16-PAM", "32-PAM", "64-PAM", "16-QAM", "64-QAM", "256-QAM"),
    "CONTENTION": ("BPSK", "PSK", "4-PAM", "8-PAM", "16-PAM", "32-PAM", "64-PAM", "16-QAM", "64-QAM", "256-QAM"),
    "OFDMA": ("QPSK", "16-QAM"),
    "CDMA": ("BPSK", "QPSK", "16-QAM"),
}
AVERAGE = "avg"
CSV_HEADER = ("method", "modulation", "snr_db", "load", "F", "J", "n_trials", "p_correct", "ci_low", "ci_high", "n_insufficient")
GRID_AXES = {"method": "method", "modulation": "modulation", "snr_db": "snr_db", "load": "load", "F": "f", "J": "j"}


def trial_seed(master_seed: int, index: int) -> int:
    """Seed of trial ``index``; depends only on the master seed and the index."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(2, dtype=np.uint64)[0])


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n < 1:
        return 0.0, 1.0
    ci = binomtest(int(k), int(n)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def analysis_params_for(cfg: ScenarioConfig, noise_variance: float) -> AnalysisParams:
    """What the sensor assumes: frame geometry, P_C|T and noise level, never the true method."""
    return AnalysisParams(
        j=cfg.j,
        f=cfg.f,
        noise_variance=noise_variance,
        p_c_given_t=cfg.p_c_given_t,
        squelch=cfg.squelch,
    )


@dataclass(frozen=True)
class TrialOutcome:
    modulation: str
    label: str
    verdict: str | None
    correct: bool
    flagged: bool
    insufficient: bool


def run_trial(cfg: ScenarioConfig) -> TrialOutcome:
    sc = synthesize_scenario(cfg)
    mod = sc.config.modulation
    try:
        res = classify(sc.r, analysis_params_for(cfg, sc.noise_variance))
    except InsufficientDataError:
        return TrialOutcome(mod, sc.label, None, False, False, True)
    return TrialOutcome(mod, sc.label, res.verdict, res.method == cfg.method, res.contention, False)


@dataclass
class Tally:
    n: int = 0
    correct: int = 0
    flagged: int = 0
    insufficient: int = 0

    def add(self, o: TrialOutcome):
        self.n += 1
        self.correct += o.correct
        self.flagged += o.flagged
        self.insufficient += o.insufficient

    @property
    def p_correct(self) -> float:
        return self.correct / self.n if self.n else float("nan")

    @property
    def flag_rate(self) -> float:
        return self.flagged / self.n if self.n else float("nan")

    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.correct, self.n)

    def to_dict(self) -> dict:
        lo, hi = self.interval()
        return {
            "n_trials": self.n,
            "p_correct": self.p_correct,
            "ci_low": lo,
            "ci_high": hi,
            "flag_rate": self.flag_rate,
            "n_insufficient": self.insufficient,
        }


@dataclass
class AccuracyRecord:
    """Overall tally plus one tally per true modulation."""

    overall: Tally = field(default_factory=Tally)
    per_class: dict[str, Tally] = field(default_factory=dict)

    def add(self, o: TrialOutcome):
        self.overall.add(o)
        self.per_class.setdefault(o.modulation, Tally()).add(o)

    def class_averaged(self) -> float:
        """Equal-weight mean of the per-modulation accuracies."""
        vals = [t.p_correct for t in self.per_class.values() if t.n]
        return float(np.mean(vals)) if vals else float("nan")

    def to_dict(self) -> dict:
        return {
            "overall": self.overall.to_dict(),
            "class_averaged": self.class_averaged(),
            "per_class": {k: self.per_class[k].to_dict() for k in sorted(self.per_class)},
        }


def trial_configs(cfg: ScenarioConfig, n_trials: int, master_seed: int, average: bool = False) -> list[ScenarioConfig]:
    """Per-trial configs; with ``average`` the modulation cycles over the method's classes."""
    if n_trials < 1:
        raise ConfigurationError("n_trials must be >= 1")
    mods = CLASS_MODULATIONS[cfg.method] if average else (cfg.modulation,)
    return [replace(cfg, modulation=mods[i % len(mods)], seed=trial_seed(master_seed, i)) for i in range(n_trials)]


def _run_all(cfgs: list[ScenarioConfig], workers: int) -> list[TrialOutcome]:
    if workers <= 1 or len(cfgs) < 2:
        return [run_trial(c) for c in cfgs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_trial, cfgs, chunksize=max(1, len(cfgs) // (4 * workers))))


def run_trials(
    cfg: ScenarioConfig,
    n_trials: int,
    master_seed: int | None = None,
    workers: int = 1,
    average: bool = False,
) -> AccuracyRecord:
    """Monte Carlo accuracy of the classifier on ``cfg``.

    ``master_seed`` defaults to ``cfg.seed``. Insufficient-data trials count
    as incorrect and are reported in ``n_insufficient``.
    """
    seed = cfg.seed if master_seed is None else master_seed
    record = AccuracyRecord()
    for o in _run_all(trial_configs(cfg, n_trials, seed, average), workers):
        record.add(o)
    return record


# -- grids -------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    base: ScenarioConfig
    axes: dict  # CSV column name -> list of values

    def cells(self) -> list[dict]:
        names = [k for k in GRID_AXES if k in self.axes]
        out = []
        for values in itertools.product(*(self.axes[k] for k in names)):
            kw = dict(zip((GRID_AXES[k] for k in names), values))
            method = kw.get("method", self.base.method).upper()
            kw.setdefault("n_total", self.base.n_total if "method" not in kw else _default_users(method, self.base))
            out.append(kw)
        return out


def _default_users(method: str, base: ScenarioConfig) -> int:
    return DEFAULT_USERS.get(method, base.n_total)


def parse_grid(doc: dict) -> Grid:
    """Validate a grid document ``{"base": {...}, "axes": {...}}`` before anything runs."""
    if not isinstance(doc, dict):
        raise ConfigurationError("grid document must be a JSON object")
    unknown = set(doc) - {"base", "axes"}
    if unknown:
        raise ConfigurationError(f"unknown grid keys {sorted(unknown)}")
    try:
        base = ScenarioConfig.from_dict(doc.get("base", {}))
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc
    bad = set(doc.get("base", {})) - set(ScenarioConfig.__dataclass_fields__)
    if bad:
        raise ConfigurationError(f"unknown scenario fields {sorted(bad)}")
    axes = doc.get("axes", {})
    if not isinstance(axes, dict):
        raise ConfigurationError("axes must be an object")
    bad = set(axes) - set(GRID_AXES)
    if bad:
        raise ConfigurationError(f"unknown grid axes {sorted(bad)}; allowed {list(GRID_AXES)}")
    for name, values in axes.items():
        if not isinstance(values, list) or not values:
            raise ConfigurationError(f"axis {name!r} must be a nonempty list")
    grid = Grid(base, {k: list(v) for k, v in axes.items()})
    for kw in grid.cells():
        _cell_config(base, kw)
    return grid


def _cell_config(base: ScenarioConfig, kw: dict) -> tuple[ScenarioConfig, bool]:
    kw = dict(kw)
    average = kw.get("modulation", base.modulation) == AVERAGE
    if average:
        kw["modulation"] = "QPSK"
    try:
        return replace(base, **kw), average
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid grid cell {kw}: {exc}") from exc


def sweep(grid: Grid, n_trials: int, master_seed: int = 0, workers: int = 1, progress=None) -> list[dict]:
    """One row per grid cell, in axis-product order.

    Every cell reuses the same trial seeds, so cells differ only in their
    parameters (common random numbers).
    """
    cells = [_cell_config(grid.base, kw) for kw in grid.cells()]
    rows = []
    for cfg, average in cells:
        rec = run_trials(cfg, n_trials, master_seed, workers, average)
        t = rec.overall
        lo, hi = t.interval()
        p = rec.class_averaged() if average else t.p_correct
        rows.append(
            {
                "method": cfg.method,
                "modulation": AVERAGE if average else cfg.modulation,
                "snr_db": cfg.snr_db,
                "load": cfg.load,
                "F": cfg.f,
                "J": cfg.j,
                "n_trials": t.n,
                "p_correct": round(p, 6),
                "ci_low": round(lo, 6),
                "ci_high": round(hi, 6),
                "n_insufficient": t.insufficient,
            }
        )
        if progress is not None:
            progress(rows[-1])
    return rows


def rows_to_csv(rows: list[dict], header=CSV_HEADER) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(header), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def table_csv(classes: bool = False, snr_db: float = float("inf"), j: int = 1, n_total: int = 4, n_total_cdma: int = 16) -> str:
    """Reference rows (C42, J var) or, with ``classes``, the classifier's class table at ``snr_db``."""
    if classes:
        rows = table_csv_rows(n_total, NoisyPowerRatio.from_snr_db(snr_db).rho, j, n_total_cdma)
    else:
        rows = reference_table(j)
    return rows_to_csv(rows, header=tuple(rows[0]))


# -- captures ----------------------------------------------------------------


def classify_capture(path, noise_variance: float | None = None, j: int | None = None, f: int | None = None) -> ClassificationResult:
    """Classify an exported capture; the sidecar supplies the noise variance and frame geometry."""
    r, meta = read_capture(path)
    cfg = meta.get("config") or {}
    sigma2 = float(meta.get("noise_variance", 0.0)) if noise_variance is None else float(noise_variance)
    params = AnalysisParams(
        j=int(j or cfg.get("j", 500)),
        f=int(f or cfg.get("f", 200)),
        noise_variance=sigma2,
        p_c_given_t=float(cfg.get("p_c_given_t", 0.05)),
    )
    return classify(r, params)


def export_corpus(base: ScenarioConfig, out_dir, n_per_class: int = 1, master_seed: int = 0, methods=METHODS) -> list[Path]:
    """Write ``n_per_class`` captures for every method and class modulation."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for method in methods:
        for mod in CLASS_MODULATIONS[method]:
            for i in range(n_per_class):
                cfg = replace(
                    ScenarioConfig.for_method(method, **{k: v for k, v in base.to_dict().items() if k not in ("method", "n_total")}),
                    modulation=mod,
                    seed=trial_seed(master_seed, len(paths)),
                )
                sc = synthesize_scenario(cfg)
                name = f"{method.lower()}_{mod.lower().replace('-', '')}_{i:03d}.cf32"
                paths.append(write_capture(out_dir / name, sc.r, sc.noise_variance, sc.config, sc.label))
    manifest = [{"file": p.name, **json.loads(Path(str(p) + ".json").read_text())} for p in paths]
    (out_dir / "manifest.json").write_text(json.dumps([{k: m[k] for k in ("file", "label", "noise_variance")} for m in manifest], indent=2))
    return paths


__all__ = [
    "AVERAGE",
    "CLASS_MODULATIONS",
    "CSV_HEADER",
    "PSK_ORDERS",
    "AccuracyRecord",
    "Grid",
    "Tally",
    "TrialOutcome",
    "classify_capture",
    "export_corpus",
    "parse_grid",
    "rows_to_csv",
    "run_trial",
    "run_trials",
    "sweep",
    "table_csv",
    "trial_seed",
    "wilson_interval",
]
