"""Power/rate split optimization for RSMA.

Maximizes the MC success probability over the (power_split, rate_split)
box via an exhaustive lattice search and, as a cheap alternative, a
canonical grey wolf optimizer. A precomputed lookup table over the SNR gap
supports the adaptive selector and offline deployment.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .analytics import _rsma_success
from .model import InvariantError, OperatingPoint, RsmaSplit, SystemConfig, apply_snr_gap

__all__ = [
    "OptimizerSettings",
    "SplitSolution",
    "grid_search",
    "gwo_optimize",
    "build_lookup",
    "SplitTable",
]


@dataclass(frozen=True)
class OptimizerSettings:
    """Search-space discretization and GWO budget.

    The rate-split floor defaults to 0.01: pushing nearly all of the MC
    rate onto stream 2 is what keeps stream 1 decodable, so the optimum
    sits on this boundary and the floor is part of the search contract.
    """

    grid_points_omega: int = 1000
    grid_points_lambda: int = 1000
    gwo_population: int = 50
    gwo_iterations: int = 200
    omega_bounds: tuple[float, float] = (0.01, 0.99)
    lambda_bounds: tuple[float, float] = (0.01, 0.99)
    rng_seed: int = 1234

    def __post_init__(self) -> None:
        if self.grid_points_omega < 2 or self.grid_points_lambda < 2:
            raise InvariantError("grid_points: need at least 2 points per axis")
        if self.gwo_population < 3:
            raise InvariantError("gwo_population: needs at least the three leader wolves")
        if self.gwo_iterations < 1:
            raise InvariantError("gwo_iterations: must be at least 1")
        for name, (lo, hi) in (("omega_bounds", self.omega_bounds), ("lambda_bounds", self.lambda_bounds)):
            if not (0.0 < lo < hi < 1.0):
                raise InvariantError(f"{name}: must satisfy 0 < lo < hi < 1, got ({lo}, {hi})")


@dataclass(frozen=True)
class SplitSolution:
    split: RsmaSplit
    objective: float     # MC success probability at the split
    method: str          # "grid" or "gwo"
    evaluations: int     # objective evaluations spent
    feasible: bool       # stream 1 decodable at the returned split


def grid_search(op: OperatingPoint, cfg: SystemConfig, settings: OptimizerSettings) -> SplitSolution:
    """Exhaustive search on the inclusive lattice; deterministic tie-breaking.

    Ties resolve to the smallest power split, then the smallest rate split.
    An all-infeasible lattice returns objective 0 at the tie-break corner,
    flagged infeasible.
    """
    omegas = np.linspace(settings.omega_bounds[0], settings.omega_bounds[1], settings.grid_points_omega)
    lams = np.linspace(settings.lambda_bounds[0], settings.lambda_bounds[1], settings.grid_points_lambda)
    values = _rsma_success(op, cfg, omegas[:, None], lams[None, :])
    flat = int(np.argmax(values))  # row-major: smallest omega index first, then lambda
    i, j = divmod(flat, lams.size)
    split = RsmaSplit(power_split=float(omegas[i]), rate_split=float(lams[j]))
    return SplitSolution(
        split=split,
        objective=float(values[i, j]),
        method="grid",
        evaluations=omegas.size * lams.size,
        feasible=split.is_feasible(cfg),
    )


def gwo_optimize(
    op: OperatingPoint,
    cfg: SystemConfig,
    settings: OptimizerSettings,
    seed: int | None = None,
) -> SplitSolution:
    """Canonical grey wolf optimizer over the (power_split, rate_split) box.

    Wolves initialize uniformly in the box; each iteration moves every wolf
    toward the three best positions seen so far using the standard
    encircling coefficients, with the control parameter decaying linearly
    from 2 to 0. Positions are clamped to the box. Deterministic given the
    seed; spends exactly population * (iterations + 1) objective calls.
    """
    rng = np.random.default_rng(settings.rng_seed if seed is None else seed)
    lo = np.array([settings.omega_bounds[0], settings.lambda_bounds[0]])
    hi = np.array([settings.omega_bounds[1], settings.lambda_bounds[1]])
    pop = settings.gwo_population
    iters = settings.gwo_iterations

    positions = rng.uniform(lo, hi, size=(pop, 2))
    fitness = np.asarray(_rsma_success(op, cfg, positions[:, 0], positions[:, 1]))
    evaluations = pop

    order = np.argsort(-fitness, kind="stable")[:3]
    leaders = positions[order].copy()
    leader_fit = fitness[order].copy()

    for t in range(iters):
        a = 2.0 - 2.0 * t / iters
        guided = np.zeros_like(positions)
        for k in range(3):
            coef_a = a * (2.0 * rng.random((pop, 2)) - 1.0)
            coef_c = 2.0 * rng.random((pop, 2))
            guided += leaders[k] - coef_a * np.abs(coef_c * leaders[k] - positions)
        positions = np.clip(guided / 3.0, lo, hi)
        fitness = np.asarray(_rsma_success(op, cfg, positions[:, 0], positions[:, 1]))
        evaluations += pop

        for idx in range(pop):
            f = fitness[idx]
            if f > leader_fit[0]:
                leaders[2], leader_fit[2] = leaders[1], leader_fit[1]
                leaders[1], leader_fit[1] = leaders[0], leader_fit[0]
                leaders[0], leader_fit[0] = positions[idx], f
            elif f > leader_fit[1]:
                leaders[2], leader_fit[2] = leaders[1], leader_fit[1]
                leaders[1], leader_fit[1] = positions[idx], f
            elif f > leader_fit[2]:
                leaders[2], leader_fit[2] = positions[idx], f

    split = RsmaSplit(power_split=float(leaders[0, 0]), rate_split=float(leaders[0, 1]))
    return SplitSolution(
        split=split,
        objective=float(leader_fit[0]),
        method="gwo",
        evaluations=evaluations,
        feasible=split.is_feasible(cfg),
    )


@dataclass(frozen=True)
class SplitTable:
    """Per-SNR-gap optimal splits, with nearest-neighbor lookup."""

    gamma_db: tuple[float, ...]
    solutions: tuple[SplitSolution, ...]
    seed: int = 0

    def query(self, gamma_db: float) -> SplitSolution:
        """Solution stored at the nearest tabulated gap (lower gap wins ties)."""
        idx = int(np.argmin(np.abs(np.asarray(self.gamma_db) - gamma_db)))
        return self.solutions[idx]

    def rows(self):
        for g, sol in zip(self.gamma_db, self.solutions):
            yield {
                "gamma_db": g,
                "power_split": sol.split.power_split,
                "rate_split": sol.split.rate_split,
                "success_prob": sol.objective,
                "method": sol.method,
                "seed": self.seed,
            }

    def write_csv(self, path, comments: list[str] | None = None) -> None:
        fieldnames = ["gamma_db", "power_split", "rate_split", "success_prob", "method", "seed"]
        with open(path, "w", newline="") as fh:
            for line in comments or []:
                fh.write(f"# {line}\n")
            writer = csv.DictWriter(fh, fieldnames=fieldnames)
            writer.writeheader()
            for row in self.rows():
                writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})

    @classmethod
    def read_csv(cls, path, cfg: SystemConfig) -> "SplitTable":
        gammas: list[float] = []
        solutions: list[SplitSolution] = []
        seed = 0
        with open(path, newline="") as fh:
            rows = csv.DictReader(line for line in fh if not line.startswith("#"))
            for row in rows:
                split = RsmaSplit(float(row["power_split"]), float(row["rate_split"]))
                gammas.append(float(row["gamma_db"]))
                seed = int(row["seed"])
                solutions.append(
                    SplitSolution(
                        split=split,
                        objective=float(row["success_prob"]),
                        method=row["method"],
                        evaluations=0,
                        feasible=split.is_feasible(cfg),
                    )
                )
        return cls(gamma_db=tuple(gammas), solutions=tuple(solutions), seed=seed)


def build_lookup(
    op_template: OperatingPoint,
    cfg: SystemConfig,
    gamma_db_list,
    settings: OptimizerSettings,
    method: str = "grid",
    seed: int | None = None,
) -> SplitTable:
    """Solve the split per SNR gap and tabulate the results.

    The gap list must be nonempty, finite, and sorted ascending. GWO seeds
    derive from (seed, point index) so points are independent yet the whole
    table is reproducible.
    """
    gammas = [float(g) for g in gamma_db_list]
    if not gammas:
        raise ValueError("gamma_db_list must not be empty")
    if not all(np.isfinite(gammas)):
        raise ValueError("gamma_db_list must be finite")
    if any(b < a for a, b in zip(gammas, gammas[1:])):
        raise ValueError("gamma_db_list must be sorted ascending")
    if method not in ("grid", "gwo"):
        raise ValueError(f"method must be 'grid' or 'gwo', got {method!r}")

    base_seed = settings.rng_seed if seed is None else seed
    solutions = []
    for idx, gamma in enumerate(gammas):
        op = apply_snr_gap(op_template, gamma)
        if method == "grid":
            solutions.append(grid_search(op, cfg, settings))
        else:
            point_seed = int(np.random.SeedSequence([base_seed, idx]).generate_state(1)[0])
            solutions.append(gwo_optimize(op, cfg, settings, seed=point_seed))
    return SplitTable(gamma_db=tuple(gammas), solutions=tuple(solutions), seed=base_seed)
