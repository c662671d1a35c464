"""SNR-gap sweep, switchover-threshold extraction, and the adaptive scheme map.

The sweep fixes the MC budget and rescales only the eMBB mean SNR, so the
puncturing metrics stay flat and act as the per-point baseline. A
non-orthogonal scheme remains admissible while its average-AoI loss and
PAoI-violation loss versus puncturing stay within the configured
tolerances; each admissibility frontier yields a switchover threshold and
the binding one is their minimum.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .analytics import scheme_metrics
from .model import OperatingPoint, RsmaSplit, Scheme, SchemeMetrics, SystemConfig, apply_snr_gap
from .optimizer import OptimizerSettings, SplitTable, grid_search, gwo_optimize

__all__ = [
    "SweepPoint",
    "SweepResult",
    "ThresholdReport",
    "sweep",
    "extract_thresholds",
    "threshold_vs_activation",
    "adaptive_rate_curve",
    "select_scheme",
    "write_sweep_csv",
    "write_thresholds_csv",
    "write_adaptive_csv",
    "write_activation_csv",
]

_NONORTHOGONAL = (Scheme.NOMA, Scheme.RSMA)


@dataclass(frozen=True)
class SweepPoint:
    gamma_db: float
    metrics: dict[Scheme, SchemeMetrics]
    split: RsmaSplit


@dataclass(frozen=True)
class SweepResult:
    """Sweep data plus everything needed to re-evaluate points exactly."""

    points: tuple[SweepPoint, ...]
    cfg: SystemConfig
    template: OperatingPoint
    settings: OptimizerSettings
    method: str
    seed: int

    @property
    def gamma_db(self) -> np.ndarray:
        return np.array([p.gamma_db for p in self.points])

    def metric(self, scheme: Scheme, name: str) -> np.ndarray:
        return np.array([getattr(p.metrics[scheme], name) for p in self.points])


def _solve_split(
    gamma_db: float,
    index: int,
    cfg: SystemConfig,
    template: OperatingPoint,
    settings: OptimizerSettings,
    method: str,
    seed: int,
    lookup: SplitTable | None,
) -> RsmaSplit:
    if lookup is not None:
        return lookup.query(gamma_db).split
    op = apply_snr_gap(template, gamma_db)
    if method == "grid":
        return grid_search(op, cfg, settings).split
    point_seed = int(np.random.SeedSequence([seed, index]).generate_state(1)[0])
    return gwo_optimize(op, cfg, settings, seed=point_seed).split


def sweep(
    cfg: SystemConfig,
    template: OperatingPoint,
    gamma_db_grid,
    settings: OptimizerSettings,
    method: str = "grid",
    lookup: SplitTable | None = None,
    seed: int | None = None,
) -> SweepResult:
    """Evaluate all three schemes at every gap of the sorted grid.

    The RSMA split is re-optimized per point (or taken from a precomputed
    lookup table, nearest-neighbor). Points are independent, so callers may
    parallelize across them; this implementation is sequential and relies
    on vectorized evaluation inside the optimizer.
    """
    gammas = [float(g) for g in gamma_db_grid]
    if any(b < a for a, b in zip(gammas, gammas[1:])):
        raise ValueError("gamma_db_grid must be sorted ascending")
    base_seed = settings.rng_seed if seed is None else seed

    points = []
    for idx, gamma in enumerate(gammas):
        op = apply_snr_gap(template, gamma)
        split = _solve_split(gamma, idx, cfg, template, settings, method, base_seed, lookup)
        metrics = {
            Scheme.PUNCTURING: scheme_metrics(Scheme.PUNCTURING, op, cfg),
            Scheme.NOMA: scheme_metrics(Scheme.NOMA, op, cfg),
            Scheme.RSMA: scheme_metrics(Scheme.RSMA, op, cfg, split=split),
        }
        points.append(SweepPoint(gamma_db=gamma, metrics=metrics, split=split))
    return SweepResult(
        points=tuple(points), cfg=cfg, template=template, settings=settings,
        method=method, seed=base_seed,
    )


@dataclass(frozen=True)
class ThresholdReport:
    """Per-scheme switchover thresholds and the resulting scheme map.

    Thresholds are the largest swept gap whose prefix stays within
    tolerance; -inf means the constraint already fails at the lowest grid
    point, +inf (exposed via the map) means it never fails on the grid, in
    which case the reported value is the top of the grid.
    """

    noma_aoi_db: float
    noma_paoi_db: float
    rsma_aoi_db: float
    rsma_paoi_db: float
    noma_combined_db: float
    rsma_combined_db: float
    crossover_db: float          # NaN when the success curves never cross
    crossover_count: int
    scheme_map: tuple[tuple[float, float, Scheme], ...]
    beta: float
    beta_hat: float
    grid_lo_db: float
    grid_hi_db: float
    _noma_bound: float = math.nan  # effective map boundary (+/-inf aware)
    _rsma_bound: float = math.nan

    def combined(self, scheme: Scheme) -> float:
        return {Scheme.NOMA: self.noma_combined_db, Scheme.RSMA: self.rsma_combined_db}[scheme]


def _frontier(gammas: np.ndarray, gaps: np.ndarray, tol: float) -> tuple[float, float]:
    """(reported threshold, effective map boundary) for one gap curve.

    The threshold is the largest grid gap such that every grid point up to
    it satisfies gap <= tol. If later points re-enter tolerance after the
    first violation the curve is not monotone; first-violation semantics
    still apply, with a warning.
    """
    violated = gaps > tol
    if not violated.any():
        return float(gammas[-1]), math.inf
    first = int(np.argmax(violated))
    if (~violated[first:]).any():
        warnings.warn(
            "constraint gap re-enters tolerance after its first violation; "
            "keeping first-violation semantics",
            stacklevel=3,
        )
    if first == 0:
        return -math.inf, -math.inf
    return float(gammas[first - 1]), float(gammas[first - 1])


def _refine(
    lo: float,
    hi: float,
    gap_at: "callable",
    tol: float,
    resolution_db: float,
) -> float:
    """Bisect the feasibility boundary inside (lo, hi] down to resolution_db."""
    while hi - lo > resolution_db:
        mid = 0.5 * (lo + hi)
        if gap_at(mid) <= tol:
            lo = mid
        else:
            hi = mid
    return lo


def _scheme_map(
    lo: float, hi: float, noma_bound: float, rsma_bound: float
) -> tuple[tuple[float, float, Scheme], ...]:
    b1 = min(max(noma_bound, lo), hi)
    b2 = min(max(max(rsma_bound, noma_bound), lo), hi)
    intervals = []
    if b1 > lo:
        intervals.append((lo, b1, Scheme.NOMA))
    if b2 > b1:
        intervals.append((b1, b2, Scheme.RSMA))
    if hi > b2 or not intervals:
        intervals.append((b2, hi, Scheme.PUNCTURING))
    return tuple(intervals)


def select_scheme(report: ThresholdReport, gamma_db: float) -> Scheme:
    """Scheme selected at ``gamma_db``: NOMA below its combined threshold,
    RSMA up to its own, puncturing beyond."""
    if gamma_db < report._noma_bound:
        return Scheme.NOMA
    if gamma_db < report._rsma_bound:
        return Scheme.RSMA
    return Scheme.PUNCTURING


def extract_thresholds(
    result: SweepResult,
    beta: float | None = None,
    beta_hat: float | None = None,
    refine_db: float | None = None,
) -> ThresholdReport:
    """Switchover thresholds from a sweep, optionally bisection-refined.

    ``beta``/``beta_hat`` default to the config tolerances. When
    ``refine_db`` is set, interior thresholds are sharpened by bisecting
    the analytic gap (re-optimizing the RSMA split at every probe).
    """
    if not result.points:
        raise ValueError("sweep result is empty")
    beta = result.cfg.aoi_tolerance if beta is None else beta
    beta_hat = result.cfg.paoi_violation_tolerance if beta_hat is None else beta_hat
    gammas = result.gamma_db
    cfg = result.cfg

    reported: dict[tuple[Scheme, str], float] = {}
    bounds: dict[Scheme, float] = {}
    for scheme in _NONORTHOGONAL:
        gaps = {
            "aoi": result.metric(scheme, "avg_aoi") - result.metric(Scheme.PUNCTURING, "avg_aoi"),
            "paoi": result.metric(scheme, "paoi_violation")
            - result.metric(Scheme.PUNCTURING, "paoi_violation"),
        }
        tols = {"aoi": beta, "paoi": beta_hat}
        eff = {}
        for name in ("aoi", "paoi"):
            thr, bound = _frontier(gammas, gaps[name], tols[name])
            if refine_db is not None and math.isfinite(bound) and bound < gammas[-1]:
                idx = int(np.searchsorted(gammas, bound))
                gap_at = _make_gap_evaluator(result, scheme, name)
                thr = bound = _refine(bound, float(gammas[idx + 1]), gap_at, tols[name], refine_db)
            reported[(scheme, name)] = thr
            eff[name] = bound
        bounds[scheme] = min(eff["aoi"], eff["paoi"])

    noma_combined = min(reported[(Scheme.NOMA, "aoi")], reported[(Scheme.NOMA, "paoi")])
    rsma_combined = min(reported[(Scheme.RSMA, "aoi")], reported[(Scheme.RSMA, "paoi")])

    s_noma = result.metric(Scheme.NOMA, "success_prob")
    s_rsma = result.metric(Scheme.RSMA, "success_prob")
    diff = s_noma - s_rsma
    crossings = np.flatnonzero(diff[:-1] * diff[1:] < 0.0)
    if crossings.size:
        i = int(crossings[0])
        crossover = float(
            gammas[i] + (gammas[i + 1] - gammas[i]) * diff[i] / (diff[i] - diff[i + 1])
        )
    else:
        crossover = math.nan

    return ThresholdReport(
        noma_aoi_db=reported[(Scheme.NOMA, "aoi")],
        noma_paoi_db=reported[(Scheme.NOMA, "paoi")],
        rsma_aoi_db=reported[(Scheme.RSMA, "aoi")],
        rsma_paoi_db=reported[(Scheme.RSMA, "paoi")],
        noma_combined_db=noma_combined,
        rsma_combined_db=rsma_combined,
        crossover_db=crossover,
        crossover_count=int(crossings.size),
        scheme_map=_scheme_map(float(gammas[0]), float(gammas[-1]), bounds[Scheme.NOMA], bounds[Scheme.RSMA]),
        beta=beta,
        beta_hat=beta_hat,
        grid_lo_db=float(gammas[0]),
        grid_hi_db=float(gammas[-1]),
        _noma_bound=bounds[Scheme.NOMA],
        _rsma_bound=max(bounds[Scheme.RSMA], bounds[Scheme.NOMA]),
    )


def _make_gap_evaluator(result: SweepResult, scheme: Scheme, which: str):
    """Analytic gap-vs-puncturing as a function of the gap in dB."""
    cfg, template, settings = result.cfg, result.template, result.settings

    def gap_at(gamma_db: float) -> float:
        op = apply_snr_gap(template, gamma_db)
        if scheme is Scheme.RSMA:
            split = _solve_split(gamma_db, 0, cfg, template, settings, result.method, result.seed, None)
            point = scheme_metrics(scheme, op, cfg, split=split)
        else:
            point = scheme_metrics(scheme, op, cfg)
        base = scheme_metrics(Scheme.PUNCTURING, op, cfg)
        if which == "aoi":
            return point.avg_aoi - base.avg_aoi
        return point.paoi_violation - base.paoi_violation

    return gap_at


def threshold_vs_activation(
    result: SweepResult,
    activation_probs,
    beta: float | None = None,
    beta_hat: float | None = None,
) -> list[dict]:
    """Combined thresholds as a function of the MC activation probability.

    Success probabilities do not depend on the activation probability, so
    the sweep (including its per-point RSMA splits) is reused and only the
    AoI/PAoI gaps are recomputed per activation value. Thresholds are
    grid-resolved.
    """
    beta = result.cfg.aoi_tolerance if beta is None else beta
    beta_hat = result.cfg.paoi_violation_tolerance if beta_hat is None else beta_hat
    gammas = result.gamma_db
    a_floor = math.floor(result.cfg.paoi_threshold)
    s = {scheme: result.metric(scheme, "success_prob") for scheme in Scheme}

    rows = []
    for p in activation_probs:
        if not 0.0 < p <= 1.0:
            raise ValueError(f"activation probability must be in (0, 1], got {p}")
        row = {"mc_activation_prob": float(p)}
        with np.errstate(divide="ignore"):
            aoi = {sch: 1.0 / (p * s[sch]) for sch in Scheme}
        pv = {sch: (1.0 - p * s[sch]) ** a_floor for sch in Scheme}
        for scheme, key in ((Scheme.NOMA, "noma"), (Scheme.RSMA, "rsma")):
            t_aoi, _ = _frontier(gammas, aoi[scheme] - aoi[Scheme.PUNCTURING], beta)
            t_pv, _ = _frontier(gammas, pv[scheme] - pv[Scheme.PUNCTURING], beta_hat)
            row[f"{key}_combined_db"] = min(t_aoi, t_pv)
        rows.append(row)
    return rows


def adaptive_rate_curve(result: SweepResult, report: ThresholdReport) -> list[dict]:
    """Pointwise eMBB rate of the scheme selected by the threshold map."""
    rows = []
    for point in result.points:
        scheme = select_scheme(report, point.gamma_db)
        rows.append(
            {
                "gamma_db": point.gamma_db,
                "scheme": scheme.value,
                "embb_rate": point.metrics[scheme].embb_rate,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# CSV serialization (units recorded in the header row names)
# ---------------------------------------------------------------------------

def _write_csv(path, fieldnames, rows, comments) -> None:
    with open(path, "w", newline="") as fh:
        for line in comments or []:
            fh.write(f"# {line}\n")
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def write_sweep_csv(result: SweepResult, path, comments=None, validation=None) -> None:
    """Sweep table; ``validation`` optionally appends per-scheme simulation
    estimates and a 3-standard-error agreement verdict per point."""
    fields = ["gamma_db"]
    for key in ("punc", "noma", "rsma"):
        fields += [
            f"{key}_success_prob",
            f"{key}_avg_aoi_minislots",
            f"{key}_paoi_violation",
            f"{key}_embb_rate_bps",
        ]
    fields += ["rsma_power_split", "rsma_rate_split"]
    if validation is not None:
        for key in ("punc", "noma", "rsma"):
            fields += [f"{key}_sim_success_prob", f"{key}_sim_avg_aoi_minislots",
                       f"{key}_sim_paoi_violation", f"{key}_sim_embb_rate_bps", f"{key}_sim_agree"]

    rows = []
    for idx, point in enumerate(result.points):
        row: dict = {"gamma_db": point.gamma_db}
        for key, scheme in (("punc", Scheme.PUNCTURING), ("noma", Scheme.NOMA), ("rsma", Scheme.RSMA)):
            m = point.metrics[scheme]
            row[f"{key}_success_prob"] = m.success_prob
            row[f"{key}_avg_aoi_minislots"] = m.avg_aoi
            row[f"{key}_paoi_violation"] = m.paoi_violation
            row[f"{key}_embb_rate_bps"] = m.embb_rate
        row["rsma_power_split"] = point.split.power_split
        row["rsma_rate_split"] = point.split.rate_split
        if validation is not None:
            for key, scheme in (("punc", Scheme.PUNCTURING), ("noma", Scheme.NOMA), ("rsma", Scheme.RSMA)):
                sim = validation[idx][scheme]
                m = point.metrics[scheme]
                agree = _sim_agrees(sim, m)
                row[f"{key}_sim_success_prob"] = _opt(sim.success_prob)
                row[f"{key}_sim_avg_aoi_minislots"] = _opt(sim.avg_aoi)
                row[f"{key}_sim_paoi_violation"] = _opt(sim.paoi_violation)
                row[f"{key}_sim_embb_rate_bps"] = sim.embb_rate
                row[f"{key}_sim_agree"] = agree
        rows.append(row)
    _write_csv(path, fields, rows, comments)


def _opt(value):
    return math.nan if value is None else value


def _sim_agrees(sim, metrics: SchemeMetrics, n_se: float = 3.0) -> str:
    """'pass' when every estimable metric sits within n_se standard errors."""
    checks = [
        (sim.success_prob, sim.success_prob_se, metrics.success_prob),
        (sim.avg_aoi, sim.avg_aoi_se, metrics.avg_aoi),
        (sim.paoi_violation, sim.paoi_violation_se, metrics.paoi_violation),
    ]
    for est, se, truth in checks:
        if est is None or se is None:
            return "censored"
        if abs(est - truth) > n_se * max(se, 1e-15):
            return "fail"
    return "pass"


def write_thresholds_csv(report: ThresholdReport, path, comments=None) -> None:
    fields = [
        "scheme", "aoi_threshold_db", "paoi_threshold_db", "combined_threshold_db",
        "crossover_db", "map_lo_db", "map_hi_db",
    ]
    spans = {scheme: (math.nan, math.nan) for scheme in Scheme}
    for lo, hi, scheme in report.scheme_map:
        spans[scheme] = (lo, hi)
    rows = [
        {
            "scheme": "noma",
            "aoi_threshold_db": report.noma_aoi_db,
            "paoi_threshold_db": report.noma_paoi_db,
            "combined_threshold_db": report.noma_combined_db,
            "crossover_db": report.crossover_db,
            "map_lo_db": spans[Scheme.NOMA][0],
            "map_hi_db": spans[Scheme.NOMA][1],
        },
        {
            "scheme": "rsma",
            "aoi_threshold_db": report.rsma_aoi_db,
            "paoi_threshold_db": report.rsma_paoi_db,
            "combined_threshold_db": report.rsma_combined_db,
            "crossover_db": report.crossover_db,
            "map_lo_db": spans[Scheme.RSMA][0],
            "map_hi_db": spans[Scheme.RSMA][1],
        },
        {
            "scheme": "punc",
            "aoi_threshold_db": math.nan,
            "paoi_threshold_db": math.nan,
            "combined_threshold_db": math.nan,
            "crossover_db": report.crossover_db,
            "map_lo_db": spans[Scheme.PUNCTURING][0],
            "map_hi_db": spans[Scheme.PUNCTURING][1],
        },
    ]
    _write_csv(path, fields, rows, comments)


def write_adaptive_csv(rows, path, comments=None) -> None:
    _write_csv(path, ["gamma_db", "scheme", "embb_rate"], rows, comments)


def write_activation_csv(rows, path, comments=None) -> None:
    _write_csv(path, ["mc_activation_prob", "noma_combined_db", "rsma_combined_db"], rows, comments)
