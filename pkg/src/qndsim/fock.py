"""Truncated Fock-space linear algebra for a few bosonic modes tensored with qubits.

States are dense complex density matrices. All channel operations are pure
functions returning new, immutable states; trace is preserved to 1e-12 and
positivity to an eigenvalue floor of -1e-10 (floating-point channels).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.stats import poisson

from .errors import SubsystemError, TruncationError

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
EIGENVALUE_FLOOR = -1e-10
TRUNCATION_TAIL_TOL = 1e-9
N_MAX_CAP = 24

# Positivity checks cost O(dim^3); skip them above this dimension (transient
# two-mode states inside detector models). Protocol states stay well below it.
_POSITIVITY_DIM_LIMIT = 128


def _check_density(matrix: np.ndarray, what: str) -> None:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"{what}: density matrix must be square, got {matrix.shape}")
    herm = np.max(np.abs(matrix - matrix.conj().T))
    if herm > HERMITICITY_TOL:
        raise ValueError(f"{what}: not Hermitian (max deviation {herm:.3e})")
    tr = np.trace(matrix).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"{what}: trace {tr!r} differs from 1 beyond {TRACE_TOL}")
    if matrix.shape[0] <= _POSITIVITY_DIM_LIMIT:
        lo = float(np.linalg.eigvalsh(matrix)[0])
        if lo < EIGENVALUE_FLOOR:
            raise ValueError(f"{what}: negative eigenvalue {lo:.3e} below floor")


def _freeze(matrix: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(matrix, dtype=complex)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class FockSpace:
    """Single-mode Fock space truncated at photon number n_max."""

    n_max: int

    def __post_init__(self) -> None:
        if self.n_max < 1:
            raise TruncationError(f"n_max must be >= 1, got {self.n_max}")

    @property
    def dim(self) -> int:
        return self.n_max + 1

    def tail_probability(self, mean_photon: float) -> float:
        """Poisson weight beyond the cutoff for a coherent state of this mean."""
        if mean_photon == 0.0:
            return 0.0
        return float(poisson.sf(self.n_max, mean_photon))

    def validate_mean_photon(self, mean_photon: float, tol: float = TRUNCATION_TAIL_TOL) -> None:
        tail = self.tail_probability(mean_photon)
        if tail >= tol:
            needed = FockSpace.required_cutoff(mean_photon, tol)
            raise TruncationError(
                f"mean photon number {mean_photon} has truncated tail {tail:.3e} >= {tol} "
                f"at n_max={self.n_max}; requires n_max={needed}"
            )

    @staticmethod
    def required_cutoff(mean_photon: float, tol: float = TRUNCATION_TAIL_TOL) -> int:
        if mean_photon == 0.0:
            return 1
        for n in range(1, N_MAX_CAP + 1):
            if poisson.sf(n, mean_photon) < tol:
                return n
        raise TruncationError(
            f"mean photon number {mean_photon} needs n_max > cap {N_MAX_CAP} "
            f"for tail < {tol}"
        )

    @classmethod
    def for_mean_photon(cls, mean_photon: float, tol: float = TRUNCATION_TAIL_TOL) -> "FockSpace":
        """Smallest cutoff whose Poisson tail is below tol, capped at N_MAX_CAP."""
        return cls(cls.required_cutoff(mean_photon, tol))


@dataclass(frozen=True)
class ModeState:
    """Density matrix of a single bosonic mode."""

    space: FockSpace
    matrix: np.ndarray

    def __post_init__(self) -> None:
        if self.matrix.shape != (self.space.dim, self.space.dim):
            raise ValueError(
                f"matrix shape {self.matrix.shape} does not match dim {self.space.dim}"
            )
        _check_density(self.matrix, "ModeState")
        object.__setattr__(self, "matrix", _freeze(self.matrix))

    def number_distribution(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).copy()

    def mean_photon(self) -> float:
        n = np.arange(self.space.dim)
        return float(np.real(np.sum(n * np.diag(self.matrix))))

    def to_joint(self, label: str = "m0") -> "JointState":
        return JointState.from_parts([(label, self)])


def coherent_state(
    mean_photon: float, space: FockSpace, check_truncation: bool = True
) -> ModeState:
    """Truncated coherent state with amplitude sqrt(mean_photon) (real phase).

    check_truncation=False permits deliberately hard-truncated inputs (the
    renormalized few-photon pulses fed to the number sorter).
    """
    if mean_photon < 0:
        raise ValueError(f"mean photon number must be >= 0, got {mean_photon}")
    if check_truncation:
        space.validate_mean_photon(mean_photon)
    if mean_photon == 0.0:
        return fock_state(0, space)
    alpha = math.sqrt(mean_photon)
    n = np.arange(space.dim)
    log_amp = n * math.log(alpha) - 0.5 * np.array([math.lgamma(k + 1) for k in n])
    amp = np.exp(log_amp)
    amp /= np.linalg.norm(amp)
    return ModeState(space, np.outer(amp, amp.conj()))


def fock_state(n: int, space: FockSpace) -> ModeState:
    if not 0 <= n <= space.n_max:
        raise TruncationError(f"Fock index {n} outside [0, {space.n_max}]")
    mat = np.zeros((space.dim, space.dim), dtype=complex)
    mat[n, n] = 1.0
    return ModeState(space, mat)


def vacuum_state(space: FockSpace) -> ModeState:
    return fock_state(0, space)


def thermal_state(mean_occupancy: float, space: FockSpace) -> ModeState:
    """Truncated, renormalized thermal state of the given mean occupancy."""
    if mean_occupancy < 0:
        raise ValueError("mean occupancy must be >= 0")
    if mean_occupancy == 0.0:
        return vacuum_state(space)
    n = np.arange(space.dim)
    p = np.exp(n * math.log(mean_occupancy / (1.0 + mean_occupancy)))
    p /= p.sum()
    return ModeState(space, np.diag(p.astype(complex)))


def parity_probabilities(state: ModeState) -> tuple[float, float]:
    """(p_even, p_odd) of the photon number."""
    pops = state.number_distribution()
    p_odd = float(pops[1::2].sum())
    p_even = float(pops[0::2].sum())
    return p_even, p_odd


@dataclass(frozen=True)
class JointState:
    """Density operator on an ordered collection of qubits and truncated modes.

    Subsystems are addressed by label; qubit basis index 0 is the 'up' (z+)
    state and mode indices are photon numbers.
    """

    labels: tuple[str, ...]
    kinds: tuple[str, ...]  # 'q' or 'm' per subsystem
    spaces: tuple[FockSpace | None, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        if not (len(self.labels) == len(self.kinds) == len(self.spaces)):
            raise ValueError("label/kind/space bookkeeping mismatch")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"duplicate subsystem labels: {self.labels}")
        dim = int(np.prod(self.dims))
        if self.matrix.shape != (dim, dim):
            raise ValueError(
                f"matrix shape {self.matrix.shape} inconsistent with dims {self.dims}"
            )
        _check_density(self.matrix, "JointState")
        object.__setattr__(self, "matrix", _freeze(self.matrix))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(2 if k == "q" else s.dim for k, s in zip(self.kinds, self.spaces))

    @property
    def qubit_count(self) -> int:
        return self.kinds.count("q")

    @property
    def mode_spaces(self) -> tuple[FockSpace, ...]:
        return tuple(s for s in self.spaces if s is not None)

    def position(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise SubsystemError(f"unknown subsystem {label!r}; have {self.labels}") from None

    def space(self, label: str) -> FockSpace:
        pos = self.position(label)
        if self.kinds[pos] != "m":
            raise SubsystemError(f"subsystem {label!r} is not a mode")
        return self.spaces[pos]

    @classmethod
    def from_parts(cls, parts: Sequence[tuple[str, "ModeState | np.ndarray"]]) -> "JointState":
        """Tensor product of labeled parts: 2x2 arrays (qubits) or ModeStates."""
        labels, kinds, spaces, mats = [], [], [], []
        for label, part in parts:
            if isinstance(part, ModeState):
                kinds.append("m")
                spaces.append(part.space)
                mats.append(part.matrix)
            else:
                arr = np.asarray(part, dtype=complex)
                if arr.shape != (2, 2):
                    raise ValueError(f"qubit part {label!r} must be 2x2, got {arr.shape}")
                kinds.append("q")
                spaces.append(None)
                mats.append(arr)
            labels.append(label)
        full = mats[0]
        for m in mats[1:]:
            full = np.kron(full, m)
        return cls(tuple(labels), tuple(kinds), tuple(spaces), full)

    def with_vacuum_ancilla(self, space: FockSpace, label: str) -> "JointState":
        anc = np.zeros((space.dim, space.dim), dtype=complex)
        anc[0, 0] = 1.0
        return JointState(
            self.labels + (label,),
            self.kinds + ("m",),
            self.spaces + (space,),
            np.kron(self.matrix, anc),
        )

    def mode_state(self, label: str) -> ModeState:
        reduced = partial_trace(self, [label])
        return ModeState(reduced.spaces[0], reduced.matrix)

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def _replace_matrix(self, matrix: np.ndarray) -> "JointState":
        return JointState(self.labels, self.kinds, self.spaces, matrix)


def _apply_channel(
    matrix: np.ndarray,
    dims: Sequence[int],
    kraus_ops: Iterable[np.ndarray],
    targets: Sequence[int],
) -> np.ndarray:
    """Apply sum_k K rho K^dagger where each K acts on the given subsystems."""
    k = len(dims)
    targets = list(targets)
    others = [i for i in range(k) if i not in targets]
    perm = targets + others
    dt = int(np.prod([dims[i] for i in targets]))
    dr = int(np.prod([dims[i] for i in others])) if others else 1
    t = matrix.reshape(tuple(dims) * 2)
    t = np.transpose(t, axes=[*perm, *[k + p for p in perm]])
    t = np.ascontiguousarray(t).reshape(dt, dr, dt, dr)
    out = np.zeros_like(t)
    for kop in kraus_ops:
        # out[a,r,d,s] = sum_{b,c} K[a,b] T[b,r,c,s] conj(K[d,c]), via BLAS
        m = np.tensordot(kop, t, axes=(1, 0))  # (a, r, c, s)
        m = np.tensordot(m, kop.conj(), axes=([2], [1]))  # (a, r, s, d)
        out += np.transpose(m, (0, 1, 3, 2))
    out = out.reshape([dims[i] for i in perm] * 2)
    inv = list(np.argsort(perm))
    out = np.transpose(out, axes=[*inv, *[k + int(p) for p in inv]])
    dim = int(np.prod(dims))
    return np.ascontiguousarray(out).reshape(dim, dim)


def apply_channel(state: JointState, kraus_ops: Sequence[np.ndarray], labels: Sequence[str]) -> JointState:
    positions = [state.position(lbl) for lbl in labels]
    return state._replace_matrix(_apply_channel(state.matrix, state.dims, kraus_ops, positions))


@lru_cache(maxsize=None)
def _annihilation(dim: int) -> np.ndarray:
    a = np.zeros((dim, dim), dtype=complex)
    n = np.arange(1, dim)
    a[n - 1, n] = np.sqrt(n)
    return a


@lru_cache(maxsize=None)
def _beam_splitter_unitary(dim_a: int, dim_b: int, transmissivity: float, phase: float) -> np.ndarray:
    """Two-mode mixing a -> sqrt(T) a + ... with the reflected port phased by `phase`."""
    theta = math.acos(math.sqrt(transmissivity))
    a = np.kron(_annihilation(dim_a), np.eye(dim_b))
    b = np.kron(np.eye(dim_a), _annihilation(dim_b))
    gen = theta * (np.exp(1j * phase) * a.conj().T @ b - np.exp(-1j * phase) * a @ b.conj().T)
    return expm(gen)


@lru_cache(maxsize=None)
def _loss_kraus(dim: int, transmissivity: float) -> tuple[np.ndarray, ...]:
    """Kraus operators of the pure-loss channel (beam splitter on vacuum, traced)."""
    ops = []
    for k in range(dim):
        kop = np.zeros((dim, dim), dtype=complex)
        for n in range(k, dim):
            kop[n - k, n] = math.sqrt(
                math.comb(n, k)
                * transmissivity ** (n - k)
                * (1.0 - transmissivity) ** k
            )
        if np.any(kop):
            ops.append(kop)
    return tuple(ops)


@lru_cache(maxsize=None)
def _reflection_kraus(dim: int, amplitude: complex) -> tuple[np.ndarray, ...]:
    """Loss at |r|^2 composed with a per-photon phase arg(r), as one Kraus family.

    The k-th operator is the k-photons-lost branch; zero operators are kept so
    that two families (e.g. the two atomic branches of a reflection) stay
    aligned on the shared loss ancilla index.
    """
    mag2 = abs(amplitude) ** 2
    s = math.sqrt(max(0.0, 1.0 - mag2))
    ops = []
    for k in range(dim):
        kop = np.zeros((dim, dim), dtype=complex)
        for n in range(k, dim):
            kop[n - k, n] = math.sqrt(math.comb(n, k)) * amplitude ** (n - k) * s**k
        ops.append(kop)
    return tuple(ops)


def beam_splitter(
    state: JointState,
    mode_a: str,
    mode_b: str,
    transmissivity: float,
    phase: float = 0.0,
) -> JointState:
    """Unitary two-mode mixing of the labeled modes."""
    if not 0.0 <= transmissivity <= 1.0:
        raise ValueError(f"transmissivity {transmissivity} outside [0, 1]")
    pa, pb = state.position(mode_a), state.position(mode_b)
    if state.kinds[pa] != "m" or state.kinds[pb] != "m":
        raise SubsystemError("beam_splitter targets must be modes")
    u = _beam_splitter_unitary(state.dims[pa], state.dims[pb], float(transmissivity), float(phase))
    return apply_channel(state, [u], [mode_a, mode_b])


def loss_channel(state: JointState, mode: str, transmissivity: float) -> JointState:
    """Pure loss: beam splitter against a fresh vacuum ancilla, ancilla traced out."""
    if not 0.0 <= transmissivity <= 1.0:
        raise ValueError(f"transmissivity {transmissivity} outside [0, 1]")
    pos = state.position(mode)
    if state.kinds[pos] != "m":
        raise SubsystemError(f"{mode!r} is not a mode")
    if transmissivity == 1.0:
        return state
    kraus = _loss_kraus(state.dims[pos], float(transmissivity))
    return apply_channel(state, kraus, [mode])


def phase_shift(state: JointState, mode: str, theta: float) -> JointState:
    """Per-photon phase exp(i theta n) on a mode."""
    pos = state.position(mode)
    u = np.diag(np.exp(1j * theta * np.arange(state.dims[pos])))
    return apply_channel(state, [u], [mode])


def conditional_phase(
    state: JointState,
    qubit: str,
    mode: str,
    theta_per_photon: float,
    on_branch: str = "down",
) -> JointState:
    """exp(i theta n) on the mode, restricted to one z branch of the qubit."""
    pq = state.position(qubit)
    if state.kinds[pq] != "q":
        raise SubsystemError(f"{qubit!r} is not a qubit")
    pm = state.position(mode)
    if state.kinds[pm] != "m":
        raise SubsystemError(f"{mode!r} is not a mode")
    if on_branch not in ("up", "down"):
        raise ValueError(f"on_branch must be 'up' or 'down', got {on_branch!r}")
    dim = state.dims[pm]
    ph = np.diag(np.exp(1j * theta_per_photon * np.arange(dim)))
    eye = np.eye(dim)
    p_up = np.diag([1.0, 0.0]).astype(complex)
    p_dn = np.diag([0.0, 1.0]).astype(complex)
    if on_branch == "up":
        u = np.kron(p_up, ph) + np.kron(p_dn, eye)
    else:
        u = np.kron(p_up, eye) + np.kron(p_dn, ph)
    return apply_channel(state, [u], [qubit, mode])


def moments(state: JointState, mode: str) -> tuple[float, float]:
    """(<n>, <n(n-1)>) of the labeled mode."""
    dist = state.mode_state(mode).number_distribution()
    n = np.arange(len(dist))
    return float(np.sum(n * dist)), float(np.sum(n * (n - 1) * dist))


def partial_trace(state: JointState, keep: Sequence[str]) -> JointState:
    """Reduced state on the kept subsystems (in their original order)."""
    if not keep:
        raise SubsystemError("keep set must be nonempty")
    keep_pos = sorted(state.position(lbl) for lbl in keep)
    dims = state.dims
    k = len(dims)
    t = state.matrix.reshape(tuple(dims) * 2)
    # Trace out the complement, highest position first so earlier axes stay put.
    traced = 0
    for pos in sorted((i for i in range(k) if i not in keep_pos), reverse=True):
        t = np.trace(t, axis1=pos, axis2=pos + (k - traced))
        traced += 1
    dim = int(np.prod([dims[i] for i in keep_pos]))
    labels = tuple(state.labels[i] for i in keep_pos)
    kinds = tuple(state.kinds[i] for i in keep_pos)
    spaces = tuple(state.spaces[i] for i in keep_pos)
    return JointState(labels, kinds, spaces, np.ascontiguousarray(t).reshape(dim, dim))


def measure_diagonal(
    state: JointState, label: str, weights: np.ndarray, min_probability: float = 1e-12
) -> tuple[float, JointState | None]:
    """Probability and conditional state for a diagonal POVM element on one subsystem.

    The measured subsystem is consumed. Probabilities below min_probability are
    numerically indistinguishable from zero, so (p, None) is returned and the
    conditional is undefined.
    """
    pos = state.position(label)
    dims = state.dims
    k = len(dims)
    t = state.matrix.reshape(tuple(dims) * 2)
    w = np.asarray(weights, dtype=float)
    if w.shape != (dims[pos],):
        raise ValueError(f"weights shape {w.shape} does not match dim {dims[pos]}")
    shape = [1] * (2 * k)
    shape[pos] = dims[pos]
    weighted = t * w.reshape(shape)
    reduced = np.trace(weighted, axis1=pos, axis2=pos + k)
    rest = int(np.prod([d for i, d in enumerate(dims) if i != pos])) or 1
    reduced = np.ascontiguousarray(reduced).reshape(rest, rest)
    reduced = (reduced + reduced.conj().T) / 2.0  # exact result is Hermitian
    p = float(np.real(np.trace(reduced)))
    if p < min_probability:
        return max(p, 0.0), None
    labels = tuple(l for i, l in enumerate(state.labels) if i != pos)
    kinds = tuple(x for i, x in enumerate(state.kinds) if i != pos)
    spaces = tuple(s for i, s in enumerate(state.spaces) if i != pos)
    return p, JointState(labels, kinds, spaces, reduced / p)
