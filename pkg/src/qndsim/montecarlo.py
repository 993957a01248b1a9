"""Independent stochastic sampler of the cascade, cross-validating the exact engine.

Each trial draws a photon number, classical per-photon fates through every
loss stage, and the resulting pure two-atom amplitude over the four branch
combinations; atomic outcomes and detector clicks are then sampled. This
per-photon unraveling is exact here because the input is Poissonian (or Fock)
and all optics are linear with branch-conditioned amplitudes; the test suite
asserts agreement with the exact engine instead of assuming it.

Randomness comes from counter-based Philox streams keyed by
(seed, stage, sweep point), so results are reproducible independent of
scheduling and identical for identical (config, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .estimators import CELLS, G2Row
from .node import rotation_matrix
from .protocol import ExperimentConfig

HALF_PI = math.pi / 2.0

# Per-photon fate categories through the cascade.
FATES = (
    "lost_node1",
    "lost_fiber",
    "lost_node2",
    "lost_detection",
    "reach_a_miss",
    "detected_a",
    "reach_b_miss",
    "detected_b",
)
_F_LOST1, _F_FIBER, _F_LOST2, _F_LOSTD, _F_AMISS, _F_AHIT, _F_BMISS, _F_BHIT = range(8)

_STAGES = {
    "prep1": 0,
    "prep2": 1,
    "photon_number": 2,
    "depolarization": 3,
    "branch_label": 4,
    "fates": 5,
    "atom_outcome": 6,
    "readout1": 7,
    "readout2": 8,
    "dark_a": 9,
    "dark_b": 10,
}


def _mu_tag(mean_photon: float) -> int:
    return int(np.float64(mean_photon).view(np.uint64))


class TrialStream:
    """Counter-based per-trial randomness: deterministic in (seed, trial, stage)."""

    def __init__(self, seed: int, trial_index: int, mean_photon: float = 0.0):
        self.seed = int(seed)
        self.trial_index = int(trial_index)
        self.mean_photon = float(mean_photon)

    def stage(self, name: str) -> np.random.Generator:
        counter = [self.trial_index, _STAGES[name], _mu_tag(self.mean_photon), 1]
        return np.random.Generator(
            np.random.Philox(key=self.seed & (2**64 - 1), counter=counter)
        )


def _sweep_stream(seed: int, mean_photon: float, name: str) -> np.random.Generator:
    counter = [0, _STAGES[name], _mu_tag(mean_photon), 2]
    return np.random.Generator(np.random.Philox(key=seed & (2**64 - 1), counter=counter))


@dataclass(frozen=True)
class _Model:
    """Per-photon amplitude tables and atomic parameters derived from a config."""

    amp: np.ndarray  # (2 depol, 2 x, 2 y, 8 fates) complex amplitudes
    prob: np.ndarray  # |amp|^2
    c_good: tuple[np.ndarray, np.ndarray]  # post-first-pulse amplitudes per atom
    c_bad: tuple[np.ndarray, np.ndarray]
    visibility: tuple[float, float]
    contrast: tuple[float, float]
    rotation: tuple[np.ndarray, np.ndarray]
    readout: tuple[float, float]
    prep: tuple[float, float]
    scramble: float
    p_dark: tuple[float, float]

    @classmethod
    def from_config(cls, config: ExperimentConfig) -> "_Model":
        pair1 = config.node1.pair()
        pair2 = config.node2.pair()
        imp1, imp2 = config.node1.imperfections, config.node2.imperfections
        r1 = np.array([pair1.r_coupled, pair1.r_uncoupled])
        r2_by_depol = (
            np.array([pair2.r_coupled, pair2.r_uncoupled]),
            np.array([pair2.r_uncoupled, pair2.r_uncoupled]),
        )
        t_fiber = config.channel.transmission
        t_det = config.detection_efficiency
        eta_a = config.detector_a.efficiency
        eta_b = config.detector_b.efficiency
        amp = np.zeros((2, 2, 2, 8), dtype=complex)
        for d in (0, 1):
            r2 = r2_by_depol[d]
            for x in (0, 1):
                for y in (0, 1):
                    kept1 = r1[x]
                    kept2 = kept1 * math.sqrt(t_fiber) * r2[y]
                    at_det = kept2 * math.sqrt(t_det)
                    amp[d, x, y] = [
                        math.sqrt(max(0.0, 1.0 - abs(r1[x]) ** 2)),
                        kept1 * math.sqrt(1.0 - t_fiber),
                        kept1 * math.sqrt(t_fiber) * math.sqrt(max(0.0, 1.0 - abs(r2[y]) ** 2)),
                        kept2 * math.sqrt(1.0 - t_det),
                        at_det * math.sqrt((1.0 - eta_a) / 2.0),
                        at_det * math.sqrt(eta_a / 2.0),
                        at_det * math.sqrt((1.0 - eta_b) / 2.0),
                        at_det * math.sqrt(eta_b / 2.0),
                    ]
        prob = np.abs(amp) ** 2
        if not np.allclose(prob.sum(axis=-1), 1.0, atol=1e-12):
            raise ConfigError("per-photon fate probabilities do not sum to 1")

        def pulse_amplitudes(delta: float) -> tuple[np.ndarray, np.ndarray]:
            half = (HALF_PI + delta) / 2.0
            good = np.array([math.cos(half), math.sin(half)], dtype=complex)
            bad = np.array([-math.sin(half), math.cos(half)], dtype=complex)
            return good, bad

        g1, b1 = pulse_amplitudes(imp1.over_rotation())
        g2, b2 = pulse_amplitudes(imp2.over_rotation())
        return cls(
            amp=amp,
            prob=prob,
            c_good=(g1, g2),
            c_bad=(b1, b2),
            visibility=(imp1.visibility(), imp2.visibility()),
            contrast=(imp1.reflection_contrast, imp2.reflection_contrast),
            rotation=(
                rotation_matrix(HALF_PI, HALF_PI + imp1.over_rotation()),
                rotation_matrix(HALF_PI, HALF_PI + imp2.over_rotation()),
            ),
            readout=(imp1.readout_fidelity, imp2.readout_fidelity),
            prep=(imp1.prep_fidelity, imp2.prep_fidelity),
            scramble=config.channel.scramble_probability,
            p_dark=(config.detector_a.p_dark, config.detector_b.p_dark),
        )


@dataclass(frozen=True)
class TrialRecord:
    photon_number: int
    fate_counts: tuple[int, ...]  # per FATES category
    depolarized: bool
    prep_good: tuple[bool, bool]
    atom_up: tuple[bool, bool]
    clicks: tuple[bool, bool]

    def surviving_after(self, stage: int) -> int:
        """Photons still in the main mode after loss stage 0..3."""
        return self.photon_number - sum(self.fate_counts[: stage + 1])


def _atom_probabilities(
    model: _Model,
    fate_counts: np.ndarray,
    depolarized: np.ndarray,
    c1: np.ndarray,
    c2: np.ndarray,
) -> np.ndarray:
    """Joint (z1, z2) outcome probabilities for a batch of fate records.

    fate_counts: (N, 8); depolarized: (N,) bool; c1, c2: (N, 2) complex.
    Returns (N, 2, 2) probabilities (index 0 = up).
    """
    n_trials = fate_counts.shape[0]
    amp = model.amp[depolarized.astype(int)]  # (N, 2, 2, 8)
    factors = np.power(amp, fate_counts[:, None, None, :]).prod(axis=-1)  # (N, 2, 2)
    psi = c1[:, :, None] * c2[:, None, :] * factors

    kept1 = fate_counts.sum(axis=1) - fate_counts[:, _F_LOST1]
    kept2 = kept1 - fate_counts[:, _F_FIBER] - fate_counts[:, _F_LOST2]
    v1 = model.visibility[0] * model.contrast[0] ** kept1
    v2 = model.visibility[1] * np.where(
        depolarized, 1.0, model.contrast[1] ** kept2
    )

    u1, u2 = model.rotation
    probs = np.zeros((n_trials, 2, 2))
    for a in (0, 1):
        wa = (1.0 + v1) / 2.0 if a == 0 else (1.0 - v1) / 2.0
        for b in (0, 1):
            wb = (1.0 + v2) / 2.0 if b == 0 else (1.0 - v2) / 2.0
            psi_ab = psi.copy()
            if a:
                psi_ab[:, 1, :] *= -1.0
            if b:
                psi_ab[:, :, 1] *= -1.0
            rotated = np.einsum("ij,njk,lk->nil", u1, psi_ab, u2)
            probs += (wa * wb)[:, None, None] * np.abs(rotated) ** 2
    norm = probs.sum(axis=(1, 2))
    return probs / norm[:, None, None]


def sample_trial(config: ExperimentConfig, mean_photon: float, rng_stream: TrialStream) -> TrialRecord:
    """One experimental run; deterministic given (seed, trial index)."""
    model = _Model.from_config(config)
    prep_good = tuple(
        bool(rng_stream.stage(f"prep{j + 1}").random() < model.prep[j]) for j in (0, 1)
    )
    if config.input_kind == "fock":
        n = config.fock_n
    else:
        n = int(rng_stream.stage("photon_number").poisson(mean_photon))
    depolarized = bool(rng_stream.stage("depolarization").random() < model.scramble)

    c1 = model.c_good[0] if prep_good[0] else model.c_bad[0]
    c2 = model.c_good[1] if prep_good[1] else model.c_bad[1]
    weights = np.outer(np.abs(c1) ** 2, np.abs(c2) ** 2).ravel()
    label = int(rng_stream.stage("branch_label").choice(4, p=weights / weights.sum()))
    x0, y0 = divmod(label, 2)
    fate_counts = rng_stream.stage("fates").multinomial(n, model.prob[int(depolarized), x0, y0])

    probs = _atom_probabilities(
        model,
        fate_counts[None, :],
        np.array([depolarized]),
        c1[None, :],
        c2[None, :],
    )[0]
    r = rng_stream.stage("atom_outcome").random()
    flat = probs.ravel().cumsum()
    z = int(np.searchsorted(flat, r * flat[-1], side="right"))
    z1, z2 = divmod(min(z, 3), 2)
    s1 = (z1 == 0) ^ (rng_stream.stage("readout1").random() < 1.0 - model.readout[0])
    s2 = (z2 == 0) ^ (rng_stream.stage("readout2").random() < 1.0 - model.readout[1])
    click_a = fate_counts[_F_AHIT] > 0 or rng_stream.stage("dark_a").random() < model.p_dark[0]
    click_b = fate_counts[_F_BHIT] > 0 or rng_stream.stage("dark_b").random() < model.p_dark[1]
    return TrialRecord(
        photon_number=n,
        fate_counts=tuple(int(v) for v in fate_counts),
        depolarized=depolarized,
        prep_good=prep_good,
        atom_up=(bool(s1), bool(s2)),
        clicks=(bool(click_a), bool(click_b)),
    )


def _simulate_arrays(config: ExperimentConfig, mean_photon: float, trials: int) -> dict:
    """Vectorized sampler; same model and distribution as sample_trial."""
    model = _Model.from_config(config)
    seed = config.seed
    stream = lambda name: _sweep_stream(seed, mean_photon, name)

    prep1 = stream("prep1").random(trials) < model.prep[0]
    prep2 = stream("prep2").random(trials) < model.prep[1]
    if config.input_kind == "fock":
        n = np.full(trials, config.fock_n, dtype=np.int64)
    else:
        n = stream("photon_number").poisson(mean_photon, size=trials)
    depolarized = stream("depolarization").random(trials) < model.scramble

    c1 = np.where(prep1[:, None], model.c_good[0][None, :], model.c_bad[0][None, :])
    c2 = np.where(prep2[:, None], model.c_good[1][None, :], model.c_bad[1][None, :])
    w = np.abs(c1[:, :, None] * c2[:, None, :]) ** 2
    w = w.reshape(trials, 4)
    w_cum = np.cumsum(w, axis=1)
    u = stream("branch_label").random(trials) * w_cum[:, -1]
    label = (u[:, None] >= w_cum).sum(axis=1)
    x0, y0 = label // 2, label % 2

    fate_counts = np.zeros((trials, 8), dtype=np.int64)
    fate_rng = stream("fates")
    for d in (0, 1):
        for xx in (0, 1):
            for yy in (0, 1):
                sel = (depolarized.astype(int) == d) & (x0 == xx) & (y0 == yy)
                if not np.any(sel):
                    continue
                fate_counts[sel] = fate_rng.multinomial(n[sel], model.prob[d, xx, yy])

    probs = _atom_probabilities(model, fate_counts, depolarized, c1, c2)
    flat = probs.reshape(trials, 4).cumsum(axis=1)
    r = stream("atom_outcome").random(trials) * flat[:, -1]
    z = np.minimum((r[:, None] >= flat).sum(axis=1), 3)
    z1, z2 = z // 2, z % 2
    s1_up = (z1 == 0) ^ (stream("readout1").random(trials) < 1.0 - model.readout[0])
    s2_up = (z2 == 0) ^ (stream("readout2").random(trials) < 1.0 - model.readout[1])
    click_a = (fate_counts[:, _F_AHIT] > 0) | (stream("dark_a").random(trials) < model.p_dark[0])
    click_b = (fate_counts[:, _F_BHIT] > 0) | (stream("dark_b").random(trials) < model.p_dark[1])
    return {
        "n": n,
        "fate_counts": fate_counts,
        "depolarized": depolarized,
        "s1": s1_up,
        "s2": s2_up,
        "click_a": click_a,
        "click_b": click_b,
    }


@dataclass(frozen=True)
class McEstimate:
    mean_photon: float
    trials: int
    values: dict[str, float | None]
    stderrs: dict[str, float | None]
    counts: dict[str, int]


def _cell_estimate(event: np.ndarray, given: np.ndarray | None) -> tuple[float | None, float | None, int]:
    if given is None:
        n_eff = event.size
        k = int(event.sum())
    else:
        n_eff = int(given.sum())
        if n_eff == 0:
            return None, None, 0  # absent cell: no accepted trials
        k = int((event & given).sum())
    p = k / n_eff
    return p, math.sqrt(p * (1.0 - p) / n_eff), n_eff


def estimate(config: ExperimentConfig, mean_photon: float, trials: int) -> McEstimate:
    """Monte Carlo estimates with binomial standard errors for every table cell."""
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    arrays = _simulate_arrays(config, mean_photon, trials)
    s1, s2 = arrays["s1"], arrays["s2"]
    click = arrays["click_a"] | arrays["click_b"]
    events: dict[str, tuple[np.ndarray, np.ndarray | None]] = {
        "p_up1": (s1, None),
        "p_up2": (s2, None),
        "p_up1_given_up2": (s1, s2),
        "p_up2_given_up1": (s2, s1),
        "p_up1_given_click": (s1, click),
        "p_up2_given_click": (s2, click),
        "p_or_given_click": (s1 | s2, click),
        "p_and_given_click": (s1 & s2, click),
        "p_up2_given_up1_and_click": (s2, s1 & click),
    }
    values: dict[str, float | None] = {}
    stderrs: dict[str, float | None] = {}
    counts: dict[str, int] = {}
    for cell in CELLS:
        event, given = events[cell]
        values[cell], stderrs[cell], counts[cell] = _cell_estimate(event, given)
    return McEstimate(mean_photon, trials, values, stderrs, counts)


def g2_estimate(
    config: ExperimentConfig,
    mean_photon: float,
    trials: int,
    conditions=("none", "up1", "up2", "up1_and_up2"),
) -> tuple[G2Row, ...]:
    """Click-coincidence estimate of g2(0) and the cross-trial g2(tau != 0)."""
    arrays = _simulate_arrays(config, mean_photon, trials)
    s1, s2 = arrays["s1"], arrays["s2"]
    masks = {
        "none": np.ones_like(s1, dtype=bool),
        "up1": s1,
        "up2": s2,
        "up1_and_up2": s1 & s2,
    }
    rows = []
    for name in conditions:
        mask = masks[name]
        a = arrays["click_a"][mask]
        b = arrays["click_b"][mask]
        n_eff, na, nb = a.size, int(a.sum()), int(b.sum())
        nab = int((a & b).sum())
        if n_eff < 2 or na == 0 or nb == 0:
            rows.append(G2Row(name, None, None, None, None, "sampled"))
            continue
        g2_zero = (nab * n_eff) / (na * nb) if nab else 0.0
        g2_zero_err = (
            g2_zero * math.sqrt(1.0 / nab + 1.0 / na + 1.0 / nb) if nab else None
        )
        cross = int((a[:-1] & b[1:]).sum())
        denom = (na / n_eff) * (nb / n_eff) * (n_eff - 1)
        g2_tau = cross / denom if denom > 0 else None
        g2_tau_err = g2_tau * math.sqrt(1.0 / cross) if cross else None
        rows.append(G2Row(name, g2_zero, g2_zero_err, g2_tau, g2_tau_err, "sampled"))
    return tuple(rows)
