"""Domain types and derived radio quantities shared by every other module.

Everything here is an immutable value object: construction validates the
documented invariants, after which instances are safe to share freely
(including across threads). All powers are stored in watts internally;
dBm values are converted at the boundary.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

LN2 = math.log(2.0)

# One-sided thermal noise density at 290 K, used as the documented default
# noise floor when a config does not set the variance explicitly.
THERMAL_NOISE_DBM_PER_HZ = -174.0


class ConfigError(ValueError):
    """Base class for configuration problems."""


class ParseError(ConfigError):
    """A config document is malformed (bad JSON, missing field, wrong type)."""


class InvariantError(ConfigError):
    """A config value violates a documented invariant."""


class MissingInputError(ValueError):
    """A required argument-dependent input was not supplied."""


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    if watt <= 0.0:
        raise ValueError(f"power must be positive to convert to dBm, got {watt}")
    return 30.0 + 10.0 * math.log10(watt)


def thermal_noise_watt(bandwidth_hz: float) -> float:
    """Thermal noise power (-174 dBm/Hz) integrated over ``bandwidth_hz``."""
    return dbm_to_watt(THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(bandwidth_hz))


def pow2m1(x):
    """2**x - 1, accurate for small x, elementwise on arrays."""
    return np.expm1(LN2 * np.asarray(x, dtype=float)) if np.ndim(x) else math.expm1(LN2 * x)


class Scheme(str, enum.Enum):
    PUNCTURING = "punc"
    NOMA = "noma"
    RSMA = "rsma"

    def __str__(self) -> str:  # CSV/CLI friendly
        return self.value


def _require(cond: bool, field: str, msg: str) -> None:
    if not cond:
        raise InvariantError(f"{field}: {msg}")


@dataclass(frozen=True)
class SystemConfig:
    """Time/frequency grid, traffic, and tolerance parameters.

    Defaults are the standard evaluation grid: 1 ms slots split into 7
    minislots of 2 OFDM symbols, four 180 kHz resource blocks (720 kHz
    total), a 256-bit mission-critical payload, and activation probability
    0.8. ``mc_packet_size`` is a real number of bits; fractional values are
    allowed so the decode threshold can be calibrated freely.
    """

    slot_duration: float = 1e-3          # seconds
    num_minislots: int = 7               # S, minislots per slot
    symbols_per_slot: int = 14           # OFDM symbols in one slot
    symbols_per_minislot: int = 2        # OFDM symbols in one minislot
    subcarrier_spacing: float = 15e3     # Hz
    rb_bandwidth: float = 180e3          # Hz per resource block
    num_rbs: int = 4                     # B
    total_bandwidth: float = 720e3       # Hz, must equal rb_bandwidth * num_rbs
    mc_packet_size: float = 256.0        # bits per MC packet
    mc_activation_prob: float = 0.8      # Bernoulli arrival probability per minislot
    paoi_threshold: float = 4.0          # minislots (real; floored where required)
    aoi_tolerance: float = 0.1           # minislots, tolerated average-AoI loss
    paoi_violation_tolerance: float = 0.01  # tolerated PAoI-violation loss
    num_slots: int = 100_000             # simulation horizon in slots
    rng_seed: int = 20240829

    def __post_init__(self) -> None:
        _require(self.slot_duration > 0, "slot_duration", "must be positive")
        _require(self.num_minislots >= 1, "num_minislots", "must be at least 1")
        _require(self.symbols_per_slot >= 1, "symbols_per_slot", "must be at least 1")
        _require(self.symbols_per_minislot >= 1, "symbols_per_minislot", "must be at least 1")
        _require(
            self.num_minislots * self.symbols_per_minislot <= self.symbols_per_slot,
            "num_minislots",
            "minislots do not fit the slot: num_minislots * symbols_per_minislot "
            f"= {self.num_minislots * self.symbols_per_minislot} > "
            f"symbols_per_slot = {self.symbols_per_slot}",
        )
        _require(self.subcarrier_spacing > 0, "subcarrier_spacing", "must be positive")
        _require(self.rb_bandwidth > 0, "rb_bandwidth", "must be positive")
        _require(self.num_rbs >= 1, "num_rbs", "must be at least 1")
        _require(
            self.total_bandwidth == self.rb_bandwidth * self.num_rbs,
            "total_bandwidth",
            f"must equal rb_bandwidth * num_rbs = {self.rb_bandwidth * self.num_rbs}",
        )
        _require(self.mc_packet_size >= 0, "mc_packet_size", "must be nonnegative")
        _require(0.0 < self.mc_activation_prob <= 1.0, "mc_activation_prob", "must be in (0, 1]")
        _require(self.paoi_threshold >= 1.0, "paoi_threshold", "must be at least 1 minislot")
        _require(self.aoi_tolerance >= 0.0, "aoi_tolerance", "must be nonnegative")
        _require(self.paoi_violation_tolerance >= 0.0, "paoi_violation_tolerance", "must be nonnegative")
        _require(self.num_slots >= 1, "num_slots", "must be at least 1")

    @property
    def minislot_duration(self) -> float:
        """Seconds per minislot: slot_duration * symbols_per_minislot / symbols_per_slot."""
        return self.slot_duration * self.symbols_per_minislot / self.symbols_per_slot

    @property
    def mc_rate(self) -> float:
        """MC transmission rate in bit/s: one packet per minislot."""
        return self.mc_packet_size / self.minislot_duration

    @property
    def rate_exponent(self) -> float:
        """Spectral demand mc_rate * num_minislots / total_bandwidth (bit/s/Hz).

        The minislot decode SNR threshold is 2**rate_exponent - 1.
        """
        return self.mc_rate * self.num_minislots / self.total_bandwidth


@dataclass(frozen=True)
class DerivedRates:
    minislot_duration: float  # seconds
    mc_rate: float            # bit/s
    snr_threshold: float      # minimum SNR/SINR for MC decode


def derive_rates(cfg: SystemConfig) -> DerivedRates:
    """Minislot duration, MC rate, and the decode SNR threshold for ``cfg``."""
    return DerivedRates(
        minislot_duration=cfg.minislot_duration,
        mc_rate=cfg.mc_rate,
        snr_threshold=pow2m1(cfg.rate_exponent),
    )


def split_snr_thresholds(cfg: SystemConfig, rate_split) -> tuple:
    """Decode SNR thresholds of the two virtual MC streams for ``rate_split``.

    Stream 1 carries the fraction ``rate_split`` of the MC rate, stream 2
    the remainder. Accepts scalars or arrays; rate_split must lie in (0, 1).
    """
    lam = np.asarray(rate_split, dtype=float)
    if not np.all((lam > 0.0) & (lam < 1.0)):
        raise ValueError(f"rate_split must lie strictly in (0, 1), got {rate_split}")
    x = cfg.rate_exponent
    t1 = pow2m1(lam * x)
    t2 = pow2m1((1.0 - lam) * x)
    if np.ndim(rate_split) == 0:
        return float(t1), float(t2)
    return t1, t2


@dataclass(frozen=True)
class LinkBudget:
    """One user's transmit power, geometry, and mean channel statistics.

    ``mean_gain`` is the mean of the exponentially distributed squared
    channel gain (Rayleigh fading). ``noise_var`` is the receiver noise
    power in watts and is shared system-wide; OperatingPoint enforces that
    both budgets carry the same value.
    """

    tx_power: float        # watts
    distance: float        # meters
    path_loss_exp: float   # unitless
    mean_gain: float = 1.0
    noise_var: float = thermal_noise_watt(720e3)

    def __post_init__(self) -> None:
        _require(self.tx_power > 0, "tx_power", "must be positive")
        _require(self.distance > 0, "distance", "must be positive")
        _require(self.path_loss_exp >= 0, "path_loss_exp", "must be nonnegative")
        _require(self.mean_gain > 0, "mean_gain", "must be positive")
        _require(self.noise_var > 0, "noise_var", "must be positive")

    @classmethod
    def from_dbm(cls, tx_power_dbm: float, **kwargs) -> "LinkBudget":
        return cls(tx_power=dbm_to_watt(tx_power_dbm), **kwargs)

    @property
    def rx_power_coeff(self) -> float:
        """Received power per unit squared channel gain: P * d**-alpha."""
        return self.tx_power * self.distance ** (-self.path_loss_exp)

    @property
    def mean_rx_power(self) -> float:
        return self.rx_power_coeff * self.mean_gain

    @property
    def mean_snr(self) -> float:
        return self.mean_rx_power / self.noise_var


@dataclass(frozen=True)
class OperatingPoint:
    """The MC and eMBB budgets that define one evaluation point."""

    mc: LinkBudget
    embb: LinkBudget

    def __post_init__(self) -> None:
        _require(
            self.mc.noise_var == self.embb.noise_var,
            "noise_var",
            "is shared system-wide and must be identical on both budgets",
        )

    @property
    def noise_var(self) -> float:
        return self.mc.noise_var

    @property
    def snr_gap_db(self) -> float:
        return snr_gap(self)


def snr_gap(op: OperatingPoint) -> float:
    """Mean received-SNR ratio of the eMBB user over the MC user, in dB."""
    return 10.0 * math.log10(op.embb.mean_rx_power / op.mc.mean_rx_power)


def apply_snr_gap(op: OperatingPoint, gamma_db: float) -> OperatingPoint:
    """Rescale the eMBB mean gain so the operating point hits ``gamma_db`` exactly.

    The MC budget is left untouched, so MC-side metrics stay constant along
    a gap sweep.
    """
    scale = 10.0 ** ((gamma_db - snr_gap(op)) / 10.0)
    return OperatingPoint(mc=op.mc, embb=replace(op.embb, mean_gain=op.embb.mean_gain * scale))


@dataclass(frozen=True)
class RsmaSplit:
    """Power/rate split of the MC message into its two virtual streams."""

    power_split: float  # fraction of MC power on stream 1
    rate_split: float   # fraction of MC rate on stream 1

    def __post_init__(self) -> None:
        _require(0.0 < self.power_split < 1.0, "power_split", "must lie strictly in (0, 1)")
        _require(0.0 < self.rate_split < 1.0, "rate_split", "must lie strictly in (0, 1)")

    def is_feasible(self, cfg: SystemConfig) -> bool:
        """Stream 1 is decodable at all only if its SINR can reach its threshold.

        Requires power_split > t1 / (1 + t1) where t1 is stream 1's decode
        threshold; otherwise the self-interference from stream 2 caps the
        SINR below t1 for every channel realization.
        """
        t1, _ = split_snr_thresholds(cfg, self.rate_split)
        return self.power_split - t1 * (1.0 - self.power_split) > 0.0


@dataclass(frozen=True)
class SchemeMetrics:
    """Analytic (or estimated) metrics of one scheme at one operating point."""

    scheme: Scheme
    success_prob: float      # MC decode success probability
    avg_aoi: float           # minislots
    paoi_violation: float    # probability the peak AoI exceeds the threshold
    embb_rate: float         # bit/s
    rsma_split: RsmaSplit | None = None

    def __post_init__(self) -> None:
        _require(0.0 <= self.success_prob <= 1.0, "success_prob", "must be a probability")
        _require(0.0 <= self.paoi_violation <= 1.0, "paoi_violation", "must be a probability")
        _require(self.avg_aoi >= 1.0, "avg_aoi", "cannot fall below one minislot")
        _require(self.embb_rate >= 0.0, "embb_rate", "must be nonnegative")
