"""Hop, cascade and product-process parameterization.

A multihop amplify-and-forward chain with fixed relay gains is described
hop by hop (:class:`HopSpec`). :func:`cascade_to_product` folds the relay
gains into the per-branch powers, giving the parameters of the product of
N independent Rayleigh envelopes (:class:`ProductParams`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence, Union

from nrayleigh.specfun import gamma_upper_zero


class DopplerKind(str, Enum):
    FIXED_TO_MOBILE = "fixed_to_mobile"
    MOBILE_TO_MOBILE = "mobile_to_mobile"


@dataclass(frozen=True)
class DopplerSpec:
    """Maximum Doppler shifts of one hop.

    ``f_prime`` is the transmit-side shift and ``f_double_prime`` the
    receive-side shift. A fixed-to-mobile hop carries the mobile end's
    shift in ``f_prime`` and leaves ``f_double_prime`` at zero.
    """

    kind: DopplerKind
    f_prime: float
    f_double_prime: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", DopplerKind(self.kind))
        if self.f_prime < 0 or self.f_double_prime < 0:
            raise ValueError("Doppler shifts must be nonnegative")
        if self.kind is DopplerKind.FIXED_TO_MOBILE:
            if self.f_double_prime != 0:
                raise ValueError("fixed-to-mobile hop must have f_double_prime = 0")
            if not self.f_prime > 0:
                raise ValueError("fixed-to-mobile hop needs f_prime > 0")

    @classmethod
    def fixed_to_mobile(cls, f_m: float) -> DopplerSpec:
        return cls(DopplerKind.FIXED_TO_MOBILE, f_m)

    @classmethod
    def mobile_to_mobile(cls, f_prime: float, f_double_prime: float) -> DopplerSpec:
        return cls(DopplerKind.MOBILE_TO_MOBILE, f_prime, f_double_prime)

    @property
    def effective(self) -> float:
        return effective_doppler(self)

    @property
    def max_doppler(self) -> float:
        if self.kind is DopplerKind.FIXED_TO_MOBILE:
            return self.f_prime
        return self.f_prime + self.f_double_prime


@dataclass(frozen=True)
class UnitGain:
    pass


@dataclass(frozen=True)
class FixedGain:
    """Fixed gain ``G^2 = 1 / (C W0)``."""

    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"fixed-gain constant must be positive, got {self.c}")


@dataclass(frozen=True)
class SemiBlindGain:
    """Semi-blind gain matched to the incoming hop's mean SNR.

    The SNR is ``mean_power / noise_variance`` of the hop; ``mean_snr_db``,
    when given, must agree with it.
    """

    mean_snr_db: float | None = None


GainMode = Union[UnitGain, FixedGain, SemiBlindGain]

_SNR_CONSISTENCY_RTOL = 1e-6


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class HopSpec:
    """One hop of the chain.

    ``gain_mode`` is the gain of the relay at the receiving end of this hop;
    it scales the *next* hop. The last hop's gain mode is never used.
    """

    mean_power: float
    noise_variance: float
    doppler: DopplerSpec
    gain_mode: GainMode = field(default_factory=UnitGain)

    def __post_init__(self):
        if not self.mean_power > 0:
            raise ValueError(f"mean power must be positive, got {self.mean_power}")
        if not self.noise_variance > 0:
            raise ValueError(f"noise variance must be positive, got {self.noise_variance}")

    @property
    def mean_snr(self) -> float:
        return self.mean_power / self.noise_variance

    def relay_gain_sq(self) -> float:
        mode = self.gain_mode
        if isinstance(mode, UnitGain):
            return 1.0
        if isinstance(mode, FixedGain):
            return fixed_gain_sq(mode.c, self.noise_variance)
        if isinstance(mode, SemiBlindGain):
            snr = self.mean_snr
            if mode.mean_snr_db is not None:
                stated = db_to_linear(mode.mean_snr_db)
                if abs(stated - snr) > _SNR_CONSISTENCY_RTOL * snr:
                    raise ValueError(
                        f"semi-blind gain at {mode.mean_snr_db} dB is inconsistent with "
                        f"mean_power/noise_variance = {snr:.6g}"
                    )
            return semi_blind_gain_sq(snr, self.mean_power)
        raise TypeError(f"unknown gain mode {mode!r}")


@dataclass(frozen=True)
class ProductParams:
    """Per-branch mean powers and effective Doppler shifts of Y = prod X_i."""

    branch_powers: tuple[float, ...]
    branch_dopplers: tuple[float, ...]

    def __post_init__(self):
        powers = tuple(float(p) for p in self.branch_powers)
        dopplers = tuple(float(f) for f in self.branch_dopplers)
        if len(powers) < 1:
            raise ValueError("need at least one branch")
        if len(powers) != len(dopplers):
            raise ValueError("branch_powers and branch_dopplers differ in length")
        if any(not p > 0 for p in powers):
            raise ValueError("branch powers must be positive")
        if any(f < 0 for f in dopplers):
            raise ValueError("branch Doppler shifts must be nonnegative")
        object.__setattr__(self, "branch_powers", powers)
        object.__setattr__(self, "branch_dopplers", dopplers)

    @classmethod
    def iid(cls, n: int, omega: float = 1.0, f: float = 1.0) -> ProductParams:
        return cls((omega,) * n, (f,) * n)

    @property
    def n(self) -> int:
        return len(self.branch_powers)

    def log_phi(self) -> float:
        # fsum makes the result independent of branch order
        return math.fsum(math.log(p) for p in self.branch_powers)

    def total_phi(self) -> float:
        return math.exp(self.log_phi())

    def deriv_variances(self) -> tuple[float, ...]:
        return tuple(
            deriv_variance(p, f) for p, f in zip(self.branch_powers, self.branch_dopplers)
        )

    def permuted(self, order: Sequence[int]) -> ProductParams:
        return ProductParams(
            tuple(self.branch_powers[i] for i in order),
            tuple(self.branch_dopplers[i] for i in order),
        )

    def scaled(self, c: float) -> ProductParams:
        """Branch powers multiplied by c**2 (amplitudes by c)."""
        return ProductParams(tuple(c * c * p for p in self.branch_powers), self.branch_dopplers)


def effective_doppler(d: DopplerSpec) -> float:
    if d.kind is DopplerKind.FIXED_TO_MOBILE:
        return d.f_prime
    return math.hypot(d.f_prime, d.f_double_prime)


def deriv_variance(omega: float, f: float) -> float:
    """Variance of the envelope time derivative, pi^2 * omega * f^2."""
    return math.pi**2 * omega * f * f


def semi_blind_gain_sq(mean_snr: float, hat_omega: float) -> float:
    """Squared semi-blind relay gain for linear mean SNR ``mean_snr``."""
    if not mean_snr > 0:
        raise ValueError(f"mean SNR must be positive, got {mean_snr}")
    if not hat_omega > 0:
        raise ValueError(f"mean power must be positive, got {hat_omega}")
    x = 1.0 / mean_snr
    return math.exp(x) * gamma_upper_zero(x) / hat_omega


def fixed_gain_sq(c: float, noise_variance: float) -> float:
    if not c > 0 or not noise_variance > 0:
        raise ValueError("fixed gain needs c > 0 and noise_variance > 0")
    return 1.0 / (c * noise_variance)


def cascade_to_product(hops: Sequence[HopSpec]) -> ProductParams:
    """Map a hop chain to the product-of-Rayleigh parameters.

    Branch i has power ``mean_power_i * G_{i-1}^2`` with ``G_0 = 1``.
    """
    hops = list(hops)
    if not hops:
        raise ValueError("need at least one hop")
    powers = [hops[0].mean_power]
    for prev, hop in zip(hops[:-1], hops[1:]):
        powers.append(hop.mean_power * prev.relay_gain_sq())
    dopplers = [effective_doppler(h.doppler) for h in hops]
    return ProductParams(tuple(powers), tuple(dopplers))


def doppler_sum_sq(params: ProductParams) -> float:
    return math.fsum(f * f for f in params.branch_dopplers)


def station_doppler_sum_sq(station_shifts: Sequence[float]) -> float:
    """Sum of squared hop Dopplers from per-station shifts.

    ``station_shifts`` lists source, relays, destination. Every relay
    touches two hops, so it counts twice.
    """
    s = [float(f) for f in station_shifts]
    if len(s) < 2:
        raise ValueError("need at least source and destination shifts")
    return math.fsum([s[0] ** 2, s[-1] ** 2] + [2.0 * f * f for f in s[1:-1]])


def hops_from_stations(
    station_shifts: Sequence[float],
    mean_power: float | Sequence[float],
    noise_variance: float | Sequence[float],
    gain_mode: GainMode = UnitGain(),
) -> list[HopSpec]:
    """Build hops from station Doppler shifts (source, relays, destination).

    A hop between two moving stations is mobile-to-mobile; a hop with one
    fixed end is fixed-to-mobile. Two fixed ends are rejected.
    """
    shifts = [float(f) for f in station_shifts]
    n = len(shifts) - 1
    if n < 1:
        raise ValueError("need at least source and destination shifts")
    powers = _broadcast(mean_power, n)
    noises = _broadcast(noise_variance, n)
    hops = []
    for i in range(n):
        tx, rx = shifts[i], shifts[i + 1]
        if tx > 0 and rx > 0:
            doppler = DopplerSpec.mobile_to_mobile(tx, rx)
        elif tx > 0 or rx > 0:
            doppler = DopplerSpec.fixed_to_mobile(max(tx, rx))
        else:
            raise ValueError(f"hop {i + 1} joins two fixed stations")
        hops.append(HopSpec(powers[i], noises[i], doppler, gain_mode))
    return hops


def _broadcast(value, n):
    if isinstance(value, (int, float)):
        return [float(value)] * n
    value = [float(v) for v in value]
    if len(value) != n:
        raise ValueError(f"expected {n} per-hop values, got {len(value)}")
    return value
