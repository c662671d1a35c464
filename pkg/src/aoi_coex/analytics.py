"""Closed-form metric engine for puncturing, NOMA, and RSMA.

All functions are pure: success probabilities and rates are deterministic
functions of the operating point, the system config, and (for RSMA) the
split. Rayleigh fading means every squared gain is exponential, which is
what makes each success probability available in closed form.

Rate expressions follow the mean-gain plug-in convention: the average
squared gain is substituted into each log term. The simulator reports the
ergodic average E[log2(1+SINR)] separately, so the gap between the two
conventions is measurable rather than hidden.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    LN2,
    MissingInputError,
    OperatingPoint,
    RsmaSplit,
    Scheme,
    SchemeMetrics,
    SystemConfig,
    derive_rates,
    pow2m1,
)

__all__ = [
    "average_aoi",
    "paoi_violation",
    "puncturing_success_prob",
    "noma_success_prob",
    "rsma_success_prob",
    "rsma_stage_probs",
    "RsmaStageProbs",
    "puncturing_embb_rate",
    "noma_embb_rate",
    "rsma_embb_rate",
    "scheme_metrics",
]


def average_aoi(mc_activation_prob: float, success_prob: float) -> float:
    """Average AoI in minislots: 1 / (p_m * s_m).

    The AoI chain renews with probability p_m * s_m per minislot and climbs
    by one otherwise, so the stationary mean is the inverse renewal rate.
    Returns +inf when the renewal probability is zero (sweeps never abort).
    """
    if not 0.0 <= mc_activation_prob <= 1.0:
        raise ValueError(f"mc_activation_prob must be in [0, 1], got {mc_activation_prob}")
    if not 0.0 <= success_prob <= 1.0:
        raise ValueError(f"success_prob must be in [0, 1], got {success_prob}")
    q = mc_activation_prob * success_prob
    if q == 0.0:
        return math.inf
    return 1.0 / q


def paoi_violation(mc_activation_prob: float, success_prob: float, paoi_threshold: float) -> float:
    """Probability that the peak AoI exceeds ``paoi_threshold`` minislots.

    Peaks are geometric with parameter p_m * s_m on support >= 1, so the
    exceedance probability is (1 - p_m s_m)**floor(threshold); thresholds
    below one minislot are always exceeded.
    """
    if not 0.0 <= mc_activation_prob <= 1.0:
        raise ValueError(f"mc_activation_prob must be in [0, 1], got {mc_activation_prob}")
    if not 0.0 <= success_prob <= 1.0:
        raise ValueError(f"success_prob must be in [0, 1], got {success_prob}")
    if paoi_threshold < 1.0:
        return 1.0
    q = mc_activation_prob * success_prob
    return (1.0 - q) ** math.floor(paoi_threshold)


def puncturing_success_prob(op: OperatingPoint, cfg: SystemConfig) -> float:
    """MC decode success with an interference-free minislot."""
    rho = derive_rates(cfg).snr_threshold
    return math.exp(-rho * op.noise_var / op.mc.mean_rx_power)


def noma_success_prob(op: OperatingPoint, cfg: SystemConfig) -> float:
    """MC decode success when the eMBB user transmits concurrently.

    The MC user is decoded first, treating the eMBB signal as interference;
    averaging the conditional Rayleigh tail over the exponential eMBB gain
    gives the interference prefactor times the puncturing exponential.
    """
    rho = derive_rates(cfg).snr_threshold
    m = op.mc.mean_rx_power
    e = op.embb.mean_rx_power
    return m / (m + rho * e) * math.exp(-rho * op.noise_var / m)


def _rsma_success(op: OperatingPoint, cfg: SystemConfig, power_split, rate_split):
    """Vectorized RSMA success probability over (power_split, rate_split).

    Infeasible splits (stream 1 SINR can never reach its threshold) yield
    exactly 0. Inputs broadcast; returns an ndarray.
    """
    w = np.asarray(power_split, dtype=float)
    lam = np.asarray(rate_split, dtype=float)
    x = cfg.rate_exponent
    t1 = np.expm1(LN2 * lam * x)
    t2 = np.expm1(LN2 * (1.0 - lam) * x)
    m = op.mc.mean_rx_power
    e = op.embb.mean_rx_power
    s2 = op.noise_var

    margin = w - t1 * (1.0 - w)
    feasible = margin > 0.0
    safe = np.where(feasible, margin, 1.0)
    prefactor = m * safe / (m * safe + t1 * e)
    exponent = -s2 * (t1 * (1.0 - w) + safe * t2) / (m * (1.0 - w) * safe)
    return np.where(feasible, prefactor * np.exp(exponent), 0.0)


def rsma_success_prob(op: OperatingPoint, cfg: SystemConfig, split: RsmaSplit) -> float:
    """MC decode success under RSMA with SIC order stream1 -> eMBB -> stream2.

    The MC transmission fails if stream 1 is not decoded, or stream 1 is
    decoded but stream 2 is not (the eMBB decode in between is assumed to
    always succeed, since no eMBB target rate is imposed). An infeasible
    split is a certain stream-1 outage and returns 0 rather than erroring,
    so optimizers are free to probe the whole unit box.
    """
    return float(_rsma_success(op, cfg, split.power_split, split.rate_split))


@dataclass(frozen=True)
class RsmaStageProbs:
    stage1_outage: float   # stream 1 not decodable against eMBB + stream-2 interference
    stage1_success: float  # complement of stage1_outage
    stage2_outage: float   # stream 2 not decodable after both SIC stages


def rsma_stage_probs(op: OperatingPoint, cfg: SystemConfig, split: RsmaSplit) -> RsmaStageProbs:
    """The per-stage decode probabilities whose product is the RSMA success."""
    w = split.power_split
    t1 = pow2m1(split.rate_split * cfg.rate_exponent)
    t2 = pow2m1((1.0 - split.rate_split) * cfg.rate_exponent)
    m = op.mc.mean_rx_power
    e = op.embb.mean_rx_power
    s2 = op.noise_var

    margin = w - t1 * (1.0 - w)
    if margin <= 0.0:
        s1 = 0.0
    else:
        s1 = m * margin / (m * margin + t1 * e) * math.exp(-t1 * s2 / (m * margin))
    p2 = -math.expm1(-t2 * s2 / (m * (1.0 - w)))
    return RsmaStageProbs(stage1_outage=1.0 - s1, stage1_success=s1, stage2_outage=p2)


def _embb_log_terms(op: OperatingPoint, power_split: float | None = None) -> tuple[float, float, float]:
    """Mean-gain eMBB spectral efficiencies: clean, full MC interference, residual."""
    e = op.embb.mean_rx_power
    m = op.mc.mean_rx_power
    s2 = op.noise_var
    clean = math.log2(1.0 + e / s2)
    interfered = math.log2(1.0 + e / (m + s2))
    if power_split is None:
        residual = clean
    else:
        residual = math.log2(1.0 + e / ((1.0 - power_split) * m + s2))
    return clean, interfered, residual


def puncturing_embb_rate(op: OperatingPoint, cfg: SystemConfig) -> float:
    """eMBB rate in bit/s when every MC-active minislot is preempted."""
    clean, _, _ = _embb_log_terms(op)
    return cfg.total_bandwidth * (1.0 - cfg.mc_activation_prob) * clean


def noma_embb_rate(op: OperatingPoint, cfg: SystemConfig) -> float:
    """eMBB rate in bit/s under NOMA.

    Mixture over the three minislot states: MC idle (clean), MC active but
    not decoded (full interference), MC active and cancelled via SIC (clean).
    """
    p = cfg.mc_activation_prob
    s = noma_success_prob(op, cfg)
    clean, interfered, _ = _embb_log_terms(op)
    return cfg.total_bandwidth * (
        (1.0 - p) * clean + p * (1.0 - s) * interfered + p * s * clean
    )


def rsma_embb_rate(op: OperatingPoint, cfg: SystemConfig, split: RsmaSplit) -> float:
    """eMBB rate in bit/s under RSMA with the given split.

    Same mixture as NOMA except the SIC branch only removes stream 1, so a
    residual (1 - power_split) share of the MC power keeps interfering.
    """
    p = cfg.mc_activation_prob
    s1 = rsma_stage_probs(op, cfg, split).stage1_success
    clean, interfered, residual = _embb_log_terms(op, split.power_split)
    return cfg.total_bandwidth * (
        (1.0 - p) * clean + p * (1.0 - s1) * interfered + p * s1 * residual
    )


def scheme_metrics(
    scheme: Scheme,
    op: OperatingPoint,
    cfg: SystemConfig,
    split: RsmaSplit | None = None,
) -> SchemeMetrics:
    """Evaluate success probability, AoI metrics, and eMBB rate for one scheme."""
    scheme = Scheme(scheme)
    if scheme is Scheme.PUNCTURING:
        s = puncturing_success_prob(op, cfg)
        rate = puncturing_embb_rate(op, cfg)
        used_split = None
    elif scheme is Scheme.NOMA:
        s = noma_success_prob(op, cfg)
        rate = noma_embb_rate(op, cfg)
        used_split = None
    elif scheme is Scheme.RSMA:
        if split is None:
            raise MissingInputError("rsma metrics require a power/rate split")
        s = rsma_success_prob(op, cfg, split)
        rate = rsma_embb_rate(op, cfg, split)
        used_split = split
    else:  # pragma: no cover - exhaustive enum
        raise ValueError(f"unknown scheme {scheme}")
    return SchemeMetrics(
        scheme=scheme,
        success_prob=s,
        avg_aoi=average_aoi(cfg.mc_activation_prob, s),
        paoi_violation=paoi_violation(cfg.mc_activation_prob, s, cfg.paoi_threshold),
        embb_rate=rate,
        rsma_split=used_split,
    )
