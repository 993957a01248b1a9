"""Full two-detector cascade and single-detector characterization pipelines.

Produces exact joint outcome distributions over the two atomic readouts and
the two absorbing detectors. Atomic readout is applied before the photon
counting; all measurement channels act on disjoint subsystems, so this
ordering does not affect the joint table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple

import numpy as np

from .channel import ChannelParams, detection_path, fiber_channel
from .detectors import DetectorParams, either_click_weights, hbt_split_and_count
from .errors import ConfigError, ZeroProbabilityError
from .fock import (
    FockSpace,
    JointState,
    ModeState,
    coherent_state,
    fock_state,
)
from .node import (
    CqedParams,
    NodeImperfections,
    ReflectionPair,
    detect_state,
    dephase,
    prepare,
    reflect,
    reflection_pair,
    rotate,
)

HALF_PI = math.pi / 2.0


@dataclass(frozen=True)
class NodeConfig:
    cqed: CqedParams
    imperfections: NodeImperfections = NodeImperfections()
    # explicit (r_coupled, r_uncoupled) override, e.g. (+1, -1) for an ideal gate
    reflection_override: tuple[complex, complex] | None = None

    def pair(self) -> ReflectionPair:
        if self.reflection_override is not None:
            return ReflectionPair(*self.reflection_override)
        return reflection_pair(self.cqed)

    def empty_pair(self) -> ReflectionPair:
        """Reflection seen by a pulse that no longer couples to the atom."""
        p = self.pair()
        return ReflectionPair(p.r_uncoupled, p.r_uncoupled)


@dataclass(frozen=True)
class ExperimentConfig:
    node1: NodeConfig
    node2: NodeConfig
    channel: ChannelParams
    detection_efficiency: float
    detector_a: DetectorParams
    detector_b: DetectorParams
    mean_photon_sweep: tuple[float, ...]
    input_kind: str = "coherent"  # 'coherent' or 'fock'
    fock_n: int = 1
    mode: str = "exact"  # 'exact' or 'monte_carlo'
    trials: int = 100_000
    seed: int = 12345

    def __post_init__(self) -> None:
        if not self.mean_photon_sweep:
            raise ConfigError("mean photon sweep must be nonempty")
        if any(m < 0 for m in self.mean_photon_sweep):
            raise ConfigError("mean photon numbers must be >= 0")
        if not 0.0 <= self.detection_efficiency <= 1.0:
            raise ConfigError(
                f"detection_efficiency must be in [0, 1], got {self.detection_efficiency}"
            )
        if self.input_kind not in ("coherent", "fock"):
            raise ConfigError(f"input_kind must be 'coherent' or 'fock', got {self.input_kind!r}")
        if self.fock_n < 0:
            raise ConfigError(f"fock_n must be >= 0, got {self.fock_n}")
        if self.mode not in ("exact", "monte_carlo"):
            raise ConfigError(f"mode must be 'exact' or 'monte_carlo', got {self.mode!r}")
        if self.mode == "monte_carlo" and self.trials < 1:
            raise ConfigError(f"trials must be >= 1 in monte_carlo mode, got {self.trials}")
        self.fock_space()  # fail fast on truncation-infeasible sweeps

    def fock_space(self) -> FockSpace:
        """Cutoff adapted to the run's largest mean photon number (or Fock input)."""
        if self.input_kind == "fock":
            return FockSpace(max(1, self.fock_n))
        return FockSpace.for_mean_photon(max(self.mean_photon_sweep))

    def input_state(self, mean_photon: float, space: FockSpace) -> ModeState:
        if self.input_kind == "fock":
            return fock_state(self.fock_n, space)
        return coherent_state(mean_photon, space)


class Outcome(NamedTuple):
    """One joint outcome; atom fields are True for 'up', detectors for 'click'."""

    s1: bool
    s2: bool
    da: bool
    db: bool


class SingleOutcome(NamedTuple):
    s: bool
    da: bool
    db: bool


_OUTCOME_TYPES = {("s1", "s2", "da", "db"): Outcome, ("s", "da", "db"): SingleOutcome}


@dataclass(frozen=True)
class JointDistribution:
    """Probability table over binary outcome axes (index 1 = up / click)."""

    axes: tuple[str, ...]
    table: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.table, dtype=float)
        if t.shape != (2,) * len(self.axes):
            raise ValueError(f"table shape {t.shape} does not match axes {self.axes}")
        if np.any(t < -1e-12):
            raise ValueError(f"negative probability {t.min():.3e}")
        total = float(t.sum())
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        t = np.clip(t, 0.0, None)
        t.flags.writeable = False
        object.__setattr__(self, "table", t)

    def _outcome_type(self):
        return _OUTCOME_TYPES.get(self.axes, None) or NamedTuple(
            "AdHocOutcome", [(a, bool) for a in self.axes]
        )

    def outcomes(self) -> Iterator[tuple[tuple, float]]:
        otype = self._outcome_type()
        for idx in np.ndindex(*self.table.shape):
            yield otype(*(bool(i) for i in idx)), float(self.table[idx])

    def prob(self, predicate: Callable) -> float:
        return float(sum(p for o, p in self.outcomes() if predicate(o)))

    def condition(self, predicate: Callable) -> tuple["JointDistribution", float]:
        """Bayes renormalization onto outcomes satisfying the predicate."""
        mask = np.zeros(self.table.shape)
        otype = self._outcome_type()
        for idx in np.ndindex(*self.table.shape):
            if predicate(otype(*(bool(i) for i in idx))):
                mask[idx] = 1.0
        total = float((self.table * mask).sum())
        if total <= 0.0:
            raise ZeroProbabilityError("conditioning on a zero-probability predicate")
        return JointDistribution(self.axes, self.table * mask / total), total


def condition(dist: JointDistribution, predicate: Callable) -> tuple[JointDistribution, float]:
    return dist.condition(predicate)


def _pulse_area_rotation(state: JointState, qubit: str, imp: NodeImperfections) -> JointState:
    return rotate(state, qubit, "y", HALF_PI, imp.over_rotation())


def _downstream_reflection(
    state: JointState, qubit: str, node: NodeConfig, channel: ChannelParams
) -> JointState:
    """Reflection off the node downstream of the connecting fiber.

    With probability p + eps the pulse's polarization has scrambled in the
    fiber (collectively, per pulse): the scrambled component reflects off the
    bare resonator on both branches and no longer drives this node's atom, so
    its record decouples the downstream readout from everything upstream.
    """
    q = channel.scramble_probability
    coupled = reflect(state, qubit, "ph", node.pair(), node.imperfections.reflection_contrast)
    if q == 0.0:
        return coupled
    decoupled = reflect(state, qubit, "ph", node.empty_pair())
    return coupled._replace_matrix((1.0 - q) * coupled.matrix + q * decoupled.matrix)


def _propagate_cascade(config: ExperimentConfig, mean_photon: float) -> JointState:
    """Optical pipeline up to (and including) the final pi/2 pulses."""
    space = config.fock_space()
    imp1, imp2 = config.node1.imperfections, config.node2.imperfections
    state = JointState.from_parts(
        [
            ("a1", prepare(imp1.prep_fidelity)),
            ("a2", prepare(imp2.prep_fidelity)),
            ("ph", config.input_state(mean_photon, space)),
        ]
    )
    state = _pulse_area_rotation(state, "a1", imp1)
    state = _pulse_area_rotation(state, "a2", imp2)
    state = reflect(state, "a1", "ph", config.node1.pair(), imp1.reflection_contrast)
    state = fiber_channel(state, "ph", config.channel)
    state = _downstream_reflection(state, "a2", config.node2, config.channel)
    state = detection_path(state, "ph", config.detection_efficiency)
    state = dephase(state, "a1", imp1.protocol_window, imp1.t_coherence)
    state = dephase(state, "a2", imp2.protocol_window, imp2.t_coherence)
    state = _pulse_area_rotation(state, "a1", imp1)
    state = _pulse_area_rotation(state, "a2", imp2)
    return state


def _readout_branches(
    state: JointState, config: ExperimentConfig
) -> list[tuple[bool, bool, float, JointState | None]]:
    """(s1, s2, joint probability, conditional photon-mode state) per branch."""
    f1 = config.node1.imperfections.readout_fidelity
    f2 = config.node2.imperfections.readout_fidelity
    branches = []
    read1 = detect_state(state, "a1", f1)
    for s1 in (False, True):
        p1 = read1.probability(s1)
        after1 = read1.conditional_or_none(s1)
        if p1 <= 0.0 or after1 is None:
            for s2 in (False, True):
                branches.append((s1, s2, 0.0, None))
            continue
        read2 = detect_state(after1, "a2", f2)
        for s2 in (False, True):
            joint = p1 * read2.probability(s2)
            branches.append((s1, s2, joint, read2.conditional_or_none(s2)))
    return branches


def run_cascade(config: ExperimentConfig, mean_photon: float) -> JointDistribution:
    """Exact 16-outcome table over (s1, s2, detector a, detector b)."""
    state = _propagate_cascade(config, mean_photon)
    table = np.zeros((2, 2, 2, 2))
    for s1, s2, p, cond in _readout_branches(state, config):
        if p <= 0.0 or cond is None:
            continue
        clicks = hbt_split_and_count(cond, "ph", config.detector_a, config.detector_b)
        for (da, db), pc in clicks.items():
            table[int(s1), int(s2), int(da), int(db)] += p * pc
    return JointDistribution(("s1", "s2", "da", "db"), table)


def run_single(config: ExperimentConfig, node_index: int, mean_photon: float) -> JointDistribution:
    """Characterization run with the other node replaced by a unit-reflectivity mirror."""
    if node_index not in (1, 2):
        raise ConfigError(f"node_index must be 1 or 2, got {node_index}")
    space = config.fock_space()
    node = config.node1 if node_index == 1 else config.node2
    imp = node.imperfections
    state = JointState.from_parts(
        [("a", prepare(imp.prep_fidelity)), ("ph", config.input_state(mean_photon, space))]
    )
    state = _pulse_area_rotation(state, "a", imp)
    if node_index == 1:
        state = reflect(state, "a", "ph", node.pair(), imp.reflection_contrast)
        state = fiber_channel(state, "ph", config.channel)
    else:
        state = fiber_channel(state, "ph", config.channel)
        state = _downstream_reflection(state, "a", node, config.channel)
    state = detection_path(state, "ph", config.detection_efficiency)
    state = dephase(state, "a", imp.protocol_window, imp.t_coherence)
    state = _pulse_area_rotation(state, "a", imp)

    read = detect_state(state, "a", imp.readout_fidelity)
    table = np.zeros((2, 2, 2))
    for s in (False, True):
        p = read.probability(s)
        cond = read.conditional_or_none(s)
        if p <= 0.0 or cond is None:
            continue
        clicks = hbt_split_and_count(cond, "ph", config.detector_a, config.detector_b)
        for (da, db), pc in clicks.items():
            table[int(s), int(da), int(db)] += p * pc
    return JointDistribution(("s", "da", "db"), table)


def conditioned_photon_state(
    config: ExperimentConfig,
    mean_photon: float,
    predicate: Callable,
    require_click: bool = False,
) -> ModeState:
    """Photon state just before the 50:50 split, conditioned on atomic outcomes.

    The predicate sees an object with boolean fields s1 and s2. With
    require_click the state is additionally conditioned on at least one
    absorbing detector firing afterwards (vacuum removal).
    """
    state = _propagate_cascade(config, mean_photon)
    space = config.fock_space()
    total = 0.0
    accum = np.zeros((space.dim, space.dim), dtype=complex)
    click_w = either_click_weights(space.dim, config.detector_a, config.detector_b)
    sqrt_w = np.sqrt(np.clip(click_w, 0.0, 1.0))
    for s1, s2, p, cond in _readout_branches(state, config):
        if p <= 0.0 or cond is None:
            continue
        if not predicate(Outcome(s1, s2, False, False)):
            continue
        mode = cond.mode_state("ph")
        mat = mode.matrix
        if require_click:
            mat = sqrt_w[:, None] * mat * sqrt_w[None, :]
            weight = float(np.real(np.trace(mat)))
            if weight <= 0.0:
                continue
            accum += p * mat
            total += p * weight
        else:
            accum += p * mat
            total += p
    if total <= 0.0:
        raise ZeroProbabilityError("conditioning on a zero-probability atomic predicate")
    return ModeState(space, accum / total)
