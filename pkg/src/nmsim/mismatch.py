"""Monte Carlo device-mismatch injection and firing-rate statistics.

Every mismatched parameter is scaled by a lognormal factor
``exp(scale * sigma_p * z)``.  The standard-normal ``z`` comes from a Philox
counter-based generator keyed by the seed, with the (parameter id, run index)
pair placed in the high counter words, so a draw depends only on those three
numbers and never on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from .neuron import NeuronParams, RateResult, Stimulus, SynapseParams, firing_rates

PARAM_IDS = {f.name: i for i, f in enumerate(fields(NeuronParams))}

# relative spread of the bias-current-derived parameters; the overall level is
# set by ``scale`` (see calibrate)
DEFAULT_SIGMA_MAP = {"I_dc": 1.0, "g_L": 1.0, "t_rfr": 1.0}


@dataclass(frozen=True)
class MismatchSpec:
    sigma_map: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_SIGMA_MAP))
    n_runs: int = 500
    seed: int = 7
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if self.scale < 0:
            raise ValueError("scale must be nonnegative")
        for name, sigma in self.sigma_map.items():
            if name not in PARAM_IDS:
                raise ValueError(f"unknown neuron parameter {name!r} in sigma_map")
            if sigma < 0:
                raise ValueError(f"sigma for {name} must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")

    def sigma(self, name: str) -> float:
        return self.scale * self.sigma_map.get(name, 0.0)


@dataclass(frozen=True)
class RateStats:
    mean: float
    std_dev: float
    relative_error: float
    samples: tuple[float, ...]
    silent_runs: tuple[int, ...] = ()

    @classmethod
    def from_samples(cls, samples: Sequence[float], silent_runs: Sequence[int] = ()) -> "RateStats":
        # sorted so the statistics do not depend on run order
        xs = np.sort(np.asarray(samples, dtype=float))
        mean = math.fsum(xs) / len(xs)
        if len(xs) > 1:
            std = math.sqrt(math.fsum((xs - mean) ** 2) / (len(xs) - 1))
        else:
            std = 0.0
        rel = std / mean if mean > 0 else math.nan
        return cls(mean, std, rel, tuple(float(x) for x in samples), tuple(silent_runs))


def standard_normal(seed: int, run: int, param_id: int) -> float:
    bitgen = np.random.Philox(key=seed, counter=[0, 0, param_id, run])
    return float(np.random.Generator(bitgen).standard_normal())


def sample_params(nominal: NeuronParams, spec: MismatchSpec, run: int) -> NeuronParams:
    changes = {}
    for name in sorted(spec.sigma_map):
        sigma = spec.sigma(name)
        if sigma == 0.0:
            continue
        z = standard_normal(spec.seed, run, PARAM_IDS[name])
        changes[name] = getattr(nominal, name) * math.exp(sigma * z)
    return replace(nominal, **changes) if changes else nominal


def monte_carlo_rates(
    nominal: NeuronParams,
    spec: MismatchSpec,
    stimulus: Stimulus,
    T: float,
    syn: SynapseParams | None = None,
    dt: float = 20e-6,
    warmup: float = 0.1,
    runs: Sequence[int] | None = None,
) -> RateStats:
    """Firing-rate statistics over ``spec.n_runs`` mismatched neurons.

    Silent runs count as 0 Hz and are listed in ``silent_runs``.
    """
    if spec.n_runs < 2 and runs is None:
        raise ValueError("monte_carlo_rates needs n_runs >= 2")
    runs = list(range(spec.n_runs)) if runs is None else list(runs)
    params = [sample_params(nominal, spec, r) for r in runs]
    results: list[RateResult] = firing_rates(params, stimulus, T, syn=syn, dt=dt, warmup=warmup)
    silent = [r for r, res in zip(runs, results) if res.silent]
    return RateStats.from_samples([res.rate_hz for res in results], silent)


def histogram(stats: RateStats, bin_width: float = 2.0) -> list[tuple[float, float, int]]:
    """(bin_low_hz, bin_high_hz, count) rows on a grid aligned to bin_width."""
    xs = np.asarray(stats.samples)
    lo = math.floor(xs.min() / bin_width) * bin_width
    hi = (math.floor(xs.max() / bin_width) + 1) * bin_width
    edges = np.arange(lo, hi + bin_width / 2, bin_width)
    counts, edges = np.histogram(xs, bins=edges)
    return [(float(a), float(b), int(c)) for a, b, c in zip(edges[:-1], edges[1:], counts)]


@dataclass(frozen=True)
class Calibration:
    I_dc: float
    scale: float
    stats: RateStats


def calibrate(
    nominal: NeuronParams,
    spec: MismatchSpec,
    target_mean: float,
    target_rel: float,
    T: float,
    dt: float = 20e-6,
    warmup: float = 0.1,
    rounds: int = 3,
    I_bracket: tuple[float, float] | None = None,
    scale_bracket: tuple[float, float] = (0.005, 0.3),
) -> Calibration:
    """Fit the DC drive and the global sigma scale to a target rate distribution.

    Alternates two 1-D root finds (DC drive for the Monte Carlo mean, sigma
    scale for the relative spread); both objectives are smooth because the
    normal draws are fixed by the seed.
    """
    stim = Stimulus.dc()
    I_dc, scale = nominal.I_dc, spec.scale
    I_bracket = I_bracket or (0.3 * I_dc, 3.0 * I_dc)

    def run(I, s):
        return monte_carlo_rates(replace(nominal, I_dc=I), replace(spec, scale=s), stim, T, dt=dt, warmup=warmup)

    for _ in range(rounds):
        I_dc = brentq(lambda I: run(I, scale).mean - target_mean, *I_bracket, xtol=1e-17, rtol=1e-6)
        scale = brentq(lambda s: run(I_dc, s).relative_error - target_rel, *scale_bracket, rtol=1e-5)
    return Calibration(I_dc, scale, run(I_dc, scale))


# Result of calibrate(NeuronParams(I_dc=1.35e-12), MismatchSpec(scale=0.058),
# 92.74, 0.0586, T=1.1) with the default seed; frozen so a default Monte Carlo
# run does not repeat the fit.
CALIBRATED_I_DC = 1.3492114613974075e-12
CALIBRATED_SCALE = 0.058803320301328656
MC_DURATION = 1.1
MC_WARMUP = 0.1


def calibrated_defaults(n_runs: int = 500, seed: int = 7) -> tuple[NeuronParams, MismatchSpec]:
    return NeuronParams(I_dc=CALIBRATED_I_DC), MismatchSpec(n_runs=n_runs, seed=seed, scale=CALIBRATED_SCALE)
