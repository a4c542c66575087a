"""Subthreshold MOS current model and DPI time-constant mapping.

Drain current uses the EKV weak-inversion expression

    I_D = I0 * (W/L) * exp(kappa * V_GS / UT) * (1 - exp(-V_DS / UT)) + I_floor(L)

with an additive leakage floor ``I_floor(L) = I_leak0 * exp(-(L - L_min) / L_leak)``
that grows as the channel gets shorter.  PMOS devices take the usual negative
V_GS / V_DS and are evaluated with both signs flipped, so the returned value is
the source-to-drain current magnitude for either polarity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

THERMAL_VOLTAGE_300K = 0.02585
SUPPLY_RAIL = 1.0


class Polarity(str, Enum):
    NMOS = "NMOS"
    PMOS = "PMOS"


class RailError(ValueError):
    pass


@dataclass(frozen=True)
class MosParams:
    polarity: Polarity = Polarity.NMOS
    I0: float = 1.0e-14
    kappa: float = 0.7
    UT: float = THERMAL_VOLTAGE_300K
    W: float = 200e-9
    L: float = 200e-9
    # leakage floor: ~10 pA at minimum length, < 0.1 pA at 200 nm
    I_leak0: float = 10e-12
    L_min: float = 30e-9
    L_leak: float = 30e-9
    vdd: float = SUPPLY_RAIL

    def __post_init__(self) -> None:
        object.__setattr__(self, "polarity", Polarity(self.polarity))
        if not 0.0 < self.kappa < 1.0:
            raise ValueError(f"kappa must lie in (0, 1), got {self.kappa}")
        for name in ("I0", "UT", "W", "L", "I_leak0", "L_leak", "vdd"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.L_min < 0:
            raise ValueError("L_min must be nonnegative")

    def off_floor(self, L: float | None = None) -> float:
        L = self.L if L is None else L
        return self.I_leak0 * math.exp(-max(L - self.L_min, 0.0) / self.L_leak)


def _check_rail(name: str, v, vdd: float) -> None:
    if np.any(np.abs(v) > vdd):
        raise RailError(f"|{name}| exceeds the {vdd:g} V supply rail (got {v})")


def channel_current(p: MosParams, V_GS, V_DS):
    """Channel term only (no leakage floor); accepts scalars or arrays."""
    sign = 1.0 if p.polarity is Polarity.NMOS else -1.0
    vgs = sign * np.asarray(V_GS, dtype=float)
    vds = sign * np.asarray(V_DS, dtype=float)
    out = p.I0 * (p.W / p.L) * np.exp(p.kappa * vgs / p.UT) * -np.expm1(-vds / p.UT)
    return float(out) if out.ndim == 0 else out


def drain_current(p: MosParams, V_GS, V_DS):
    _check_rail("V_GS", V_GS, p.vdd)
    _check_rail("V_DS", V_DS, p.vdd)
    return channel_current(p, V_GS, V_DS) + p.off_floor()


def subthreshold_swing(p: MosParams) -> float:
    """Decades of channel current per volt of gate drive: kappa / (UT ln 10)."""
    return p.kappa / (p.UT * math.log(10.0))


def sweep(p: MosParams, v_gs: np.ndarray, V_DS: float = 0.5, lengths=(30e-9, 100e-9, 200e-9)):
    """I_D over |V_GS| for several channel lengths (same W, fixed |V_DS|).

    Returns a list of ``(L, V_GS array, I_D array)``; PMOS sweeps use negative
    gate and drain voltages.
    """
    sign = 1.0 if p.polarity is Polarity.NMOS else -1.0
    rows = []
    for L in lengths:
        q = MosParams(**{**p.__dict__, "L": L})
        rows.append((L, sign * v_gs, drain_current(q, sign * v_gs, sign * V_DS)))
    return rows


def tau_from_bias(C: float, I_tau: float, kappa: float = 0.7, UT: float = THERMAL_VOLTAGE_300K) -> float:
    """DPI low-pass time constant tau = C * UT / (kappa * I_tau)."""
    for name, val in (("C", C), ("I_tau", I_tau), ("kappa", kappa), ("UT", UT)):
        if not val > 0:
            raise ValueError(f"{name} must be positive, got {val}")
    return C * UT / (kappa * I_tau)


def bias_from_tau(C: float, tau: float, kappa: float = 0.7, UT: float = THERMAL_VOLTAGE_300K) -> float:
    """Inverse of :func:`tau_from_bias`: the bias current giving time constant tau."""
    return tau_from_bias(C, tau, kappa, UT)
