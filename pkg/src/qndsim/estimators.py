"""Published-quantity estimators: click curves, correlations, OR/AND, SNR, g2."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

from .errors import ZeroProbabilityError
from .fock import ModeState, moments
from .protocol import (
    ExperimentConfig,
    JointDistribution,
    conditioned_photon_state,
    run_cascade,
)

# Canonical cell order shared by the exact engine, the Monte Carlo oracle and
# the CSV writers.
CELLS = (
    "p_up1",
    "p_up2",
    "p_up1_given_up2",
    "p_up2_given_up1",
    "p_up1_given_click",
    "p_up2_given_click",
    "p_or_given_click",
    "p_and_given_click",
    "p_up2_given_up1_and_click",
)

_click = lambda o: o.da or o.db

CELL_PREDICATES: dict[str, tuple[Callable, Callable | None]] = {
    # cell -> (event, conditioning event or None)
    "p_up1": (lambda o: o.s1, None),
    "p_up2": (lambda o: o.s2, None),
    "p_up1_given_up2": (lambda o: o.s1, lambda o: o.s2),
    "p_up2_given_up1": (lambda o: o.s2, lambda o: o.s1),
    "p_up1_given_click": (lambda o: o.s1, _click),
    "p_up2_given_click": (lambda o: o.s2, _click),
    "p_or_given_click": (lambda o: o.s1 or o.s2, _click),
    "p_and_given_click": (lambda o: o.s1 and o.s2, _click),
    "p_up2_given_up1_and_click": (lambda o: o.s2, lambda o: o.s1 and (o.da or o.db)),
}


@dataclass(frozen=True)
class EstimateRow:
    mean_photon: float
    values: dict[str, float | None]
    stderrs: dict[str, float | None]
    counts: dict[str, int] | None = None


@dataclass(frozen=True)
class EstimateTable:
    rows: tuple[EstimateRow, ...]

    def column(self, cell: str) -> list[float | None]:
        return [row.values[cell] for row in self.rows]

    def max_cell(self, cell: str) -> tuple[float, float]:
        """(mean_photon, value) of the largest present entry in a column."""
        best = None
        for row in self.rows:
            v = row.values[cell]
            if v is not None and (best is None or v > best[1]):
                best = (row.mean_photon, v)
        if best is None:
            raise ZeroProbabilityError(f"column {cell!r} has no defined entries")
        return best


def cells_from_distribution(dist: JointDistribution) -> dict[str, float | None]:
    """Evaluate every table cell on one exact joint distribution."""
    out: dict[str, float | None] = {}
    for cell, (event, given) in CELL_PREDICATES.items():
        if given is None:
            out[cell] = dist.prob(event)
            continue
        denom = dist.prob(given)
        if denom <= 0.0:
            out[cell] = None  # absent: conditioning event has zero probability
        else:
            out[cell] = dist.prob(lambda o: event(o) and given(o)) / denom
    return out


def sweep_estimates(config: ExperimentConfig, max_workers: int = 1) -> EstimateTable:
    """One row per mean photon number; exact probabilities or Monte Carlo estimates."""
    if config.mode == "monte_carlo":
        from . import montecarlo

        rows = []
        for mu in config.mean_photon_sweep:
            est = montecarlo.estimate(config, mu, config.trials)
            rows.append(EstimateRow(mu, est.values, est.stderrs, est.counts))
        return EstimateTable(tuple(rows))

    def one(mu: float) -> EstimateRow:
        cells = cells_from_distribution(run_cascade(config, mu))
        zeros = {c: 0.0 for c in cells}
        return EstimateRow(mu, cells, zeros)

    if max_workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(one, config.mean_photon_sweep))
    else:
        rows = [one(mu) for mu in config.mean_photon_sweep]
    return EstimateTable(tuple(rows))


@dataclass(frozen=True)
class SnrReport:
    snr1: float
    snr2: float
    snr_and: float
    dc1: float
    dc2: float
    dc_and: float
    mean_photon_signal: float
    p_up1_given_click: float
    p_up2_given_click: float
    p_and_given_click: float


def _no_light_dark_counts(config: ExperimentConfig) -> tuple[float, float, float]:
    """Pipeline at zero input with the absorbing detectors' dark counts disabled."""
    quiet = replace(
        config,
        detector_a=replace(config.detector_a, dark_rate=0.0),
        detector_b=replace(config.detector_b, dark_rate=0.0),
        input_kind="coherent",
    )
    dist = run_cascade(quiet, 0.0)
    return (
        dist.prob(lambda o: o.s1),
        dist.prob(lambda o: o.s2),
        dist.prob(lambda o: o.s1 and o.s2),
    )


def _ratio(num: float, den: float) -> float:
    if den <= 0.0:
        return math.inf  # zero dark counts: infinite signal-to-noise, reported explicitly
    return num / den


def snr(config: ExperimentConfig) -> SnrReport:
    """Signal-to-noise at the smallest sweep point (the small-mean-photon limit)."""
    mu = min(config.mean_photon_sweep)
    cells = cells_from_distribution(run_cascade(config, mu))
    p1 = cells["p_up1_given_click"]
    p2 = cells["p_up2_given_click"]
    p_and = cells["p_and_given_click"]
    if p1 is None or p2 is None or p_and is None:
        raise ZeroProbabilityError(
            f"no clicks at the signal point mean_photon={mu}; cannot form an SNR"
        )
    dc1, dc2, dc_and = _no_light_dark_counts(config)
    return SnrReport(
        snr1=_ratio(p1, dc1),
        snr2=_ratio(p2, dc2),
        snr_and=_ratio(p_and, dc_and),
        dc1=dc1,
        dc2=dc2,
        dc_and=dc_and,
        mean_photon_signal=mu,
        p_up1_given_click=p1,
        p_up2_given_click=p2,
        p_and_given_click=p_and,
    )


def g2_from_state(state: ModeState) -> float:
    """g2(0) = <n(n-1)> / <n>^2 of a single-mode state."""
    joint = state.to_joint("m")
    n_mean, n_fac2 = moments(joint, "m")
    if n_mean <= 0.0:
        raise ZeroProbabilityError("g2 undefined for a state with zero mean photon number")
    return n_fac2 / n_mean**2


G2_CONDITIONS: dict[str, Callable] = {
    "none": lambda o: True,
    "up1": lambda o: o.s1,
    "up2": lambda o: o.s2,
    "up1_and_up2": lambda o: o.s1 and o.s2,
}


@dataclass(frozen=True)
class G2Row:
    condition: str
    g2_zero: float | None
    g2_zero_stderr: float | None
    g2_tau: float | None
    g2_tau_stderr: float | None
    tau_mode: str  # 'analytic' (exact engine: independent trials) or 'sampled'


def g2_table(
    config: ExperimentConfig,
    mean_photon: float = 0.45,
    conditions: Sequence[str] = ("none", "up1", "up2", "up1_and_up2"),
) -> tuple[G2Row, ...]:
    """Second-order correlation at zero delay, conditioned on node outcomes.

    In exact mode the cross-trial value g2(tau != 0) is 1 by construction
    (independent identically prepared pulses) and is flagged 'analytic'; in
    monte_carlo mode both entries are estimated from sampled clicks.
    """
    if config.mode == "monte_carlo":
        from . import montecarlo

        return montecarlo.g2_estimate(config, mean_photon, config.trials, conditions)

    rows = []
    for name in conditions:
        predicate = G2_CONDITIONS[name]
        try:
            state = conditioned_photon_state(config, mean_photon, predicate)
            value = g2_from_state(state)
        except ZeroProbabilityError:
            value = None
        rows.append(G2Row(name, value, 0.0 if value is not None else None, 1.0, 0.0, "analytic"))
    return tuple(rows)
