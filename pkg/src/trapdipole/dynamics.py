"""Piecewise-constant evolution of two molecules with quantized relative motion.

Single-molecule levels are ordered ``(up, down, e)``; the two-molecule internal
basis is their 9-state product with flat index ``3 * i + j``. All drives are
resonant in the rotating frame. The trap term keeps its zero-point energy in
both the real and the ideal evolution so that it cancels in overlaps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from .fock_algebra import HilbertSpace, OperatorMatrix, hermiticity_error
from .molecule_model import AXES, ConfigError, PhysicalConfig, ddi_operator

LEVELS = ("u", "d", "e")
INTERNAL_LABELS = tuple(a + b for a in LEVELS for b in LEVELS)
COMPUTATIONAL = ("uu", "ud", "du", "dd")
DRIVE_TARGETS = {"down-e": 1, "up-e": 0}
PROTOCOLS = ("blockade-cz", "iswap-pi-wait-pi", "iswap-one-pulse", "pi-pi-phase", "quasi-blockade")


class ProtocolError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


def internal_index(label: str) -> int:
    return INTERNAL_LABELS.index(label)


@dataclass(frozen=True)
class ProtocolSpace:
    """Internal basis plus the motional modes that take part in a protocol.

    Parameters
    ----------
    protocol : str
        One of :data:`PROTOCOLS`.
    active_modes : dict
        Axis name to Fock dimension, e.g. ``{"z": 41}``. Empty for motion-free runs.
    """

    protocol: str = "blockade-cz"
    active_modes: dict = field(default_factory=dict)
    internal_basis: tuple = INTERNAL_LABELS
    computational_subspace: tuple = COMPUTATIONAL

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ProtocolError(f"unknown protocol {self.protocol!r}; valid: {', '.join(PROTOCOLS)}")
        for ax in self.active_modes:
            if ax not in AXES:
                raise ProtocolError(f"unknown mode {ax!r}")
        if not set(self.computational_subspace) <= set(self.internal_basis):
            raise ProtocolError("computational subspace must lie inside the internal basis")
        object.__setattr__(self, "active_modes", {ax: int(self.active_modes[ax])
                                                  for ax in AXES if ax in self.active_modes})

    @property
    def hilbert_space(self) -> HilbertSpace:
        return HilbertSpace(len(self.internal_basis), tuple(self.active_modes.values()),
                            tuple(self.active_modes))

    @property
    def mode_names(self):
        return tuple(self.active_modes)

    def comp_indices(self):
        return [self.internal_basis.index(lb) for lb in self.computational_subspace]


@dataclass(frozen=True)
class PulseSegment:
    """Square microwave pulse (or a wait when ``rabi_amplitude == 0``).

    ``H = (Omega/2)|e><l| + h.c. - detuning |e><e|`` on each molecule, where
    ``l`` is the lower level named by ``drive_target``. A pulse with
    ``|Omega| * duration = pi`` is a pi pulse.
    """

    duration: float
    rabi_amplitude: complex = 0.0
    drive_target: str = "down-e"
    detuning: float = 0.0

    def __post_init__(self):
        if not self.duration >= 0:
            raise ConfigError("segment duration must be non-negative")
        if self.drive_target not in DRIVE_TARGETS:
            raise ProtocolError(f"unknown drive target {self.drive_target!r}")

    @property
    def area(self) -> float:
        return abs(self.rabi_amplitude) * self.duration


@dataclass(frozen=True)
class PulseSequence:
    segments: tuple

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise ConfigError("pulse sequence is empty")

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    def __iter__(self):
        return iter(self.segments)

    def __len__(self):
        return len(self.segments)


@dataclass(frozen=True)
class MotionalEnsemble:
    """Classical mixture of Fock states of the active modes.

    ``weights`` holds ``(quanta, probability)`` pairs; ``quanta`` is a tuple with
    one occupation per active mode.
    """

    kind: str
    weights: tuple
    nbar: float = None

    def __post_init__(self):
        total = sum(p for _, p in self.weights)
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"ensemble probabilities sum to {total}")

    @classmethod
    def pure_fock(cls, n=0, n_modes=1):
        q = tuple(n) if isinstance(n, (tuple, list)) else (int(n),) * n_modes
        return cls("pure-fock", ((q, 1.0),))

    @classmethod
    def thermal(cls, nbar, cutoff, n_modes=1, min_weight=0.0):
        """Geometric distribution ``p_n = nbar^n / (1 + nbar)^(n+1)`` per mode.

        Truncated at ``cutoff`` levels and renormalized.
        """
        ns = np.arange(int(cutoff))
        p = float(nbar) ** ns / (1.0 + nbar) ** (ns + 1)
        p /= p.sum()
        if n_modes == 0:
            return cls("thermal", (((), 1.0),), float(nbar))
        grids = np.meshgrid(*[ns] * n_modes, indexing="ij")
        probs = np.ones_like(grids[0], dtype=float)
        for g in grids:
            probs = probs * p[g]
        pairs = [(tuple(int(g.flat[i]) for g in grids), float(probs.flat[i]))
                 for i in range(probs.size) if probs.flat[i] > min_weight]
        s = sum(w for _, w in pairs)
        return cls("thermal", tuple((q, w / s) for q, w in pairs), float(nbar))

    @classmethod
    def parse(cls, text: str, cutoff: int, n_modes=1):
        """Parse ``"fock:N"`` or ``"thermal:NBAR"``."""
        kind, _, val = text.partition(":")
        try:
            if kind == "fock":
                n = int(val)
                if n < 0 or (n_modes and n >= cutoff):
                    raise ValueError
                return cls.pure_fock(n, n_modes)
            if kind == "thermal":
                nb = float(val)
                if nb < 0:
                    raise ValueError
                return cls.thermal(nb, cutoff, n_modes)
        except ValueError:
            pass
        raise ValueError(f"malformed ensemble {text!r}; expected fock:N or thermal:NBAR")

    @property
    def members(self):
        return [q for q, _ in self.weights]

    @property
    def probabilities(self):
        return np.array([p for _, p in self.weights])


def _single_drive(segment: PulseSegment) -> np.ndarray:
    h = np.zeros((3, 3), dtype=complex)
    lvl = DRIVE_TARGETS[segment.drive_target]
    h[2, lvl] = 0.5 * segment.rabi_amplitude
    h[lvl, 2] = 0.5 * np.conj(segment.rabi_amplitude)
    h[2, 2] = -segment.detuning
    return h


def exchange_projector() -> np.ndarray:
    """``|up,e><e,up| + |e,up><up,e|`` on the 9-state basis."""
    P = np.zeros((9, 9))
    i, j = internal_index("ue"), internal_index("eu")
    P[i, j] = P[j, i] = 1.0
    return P


def trap_hamiltonian(pspace: ProtocolSpace, cfg: PhysicalConfig) -> np.ndarray:
    """Diagonal of ``sum_xi omega_xi (N_xi + 1/2)`` on the motional factor."""
    space = pspace.hilbert_space
    diag = np.zeros(space.motional_dim)
    for pos, ax in enumerate(space.mode_names):
        dims = space.mode_dims
        n = np.arange(dims[pos]) + 0.5
        left, right = int(np.prod(dims[:pos])), int(np.prod(dims[pos + 1:]))
        diag += cfg.omega[ax] * np.kron(np.kron(np.ones(left), n), np.ones(right))
    return diag


class HamiltonianBuilder:
    """Caches the drive-independent parts of the gate Hamiltonian."""

    def __init__(self, pspace: ProtocolSpace, cfg: PhysicalConfig, order="quadratic"):
        self.pspace = pspace
        self.cfg = cfg
        space = pspace.hilbert_space
        mot_space = HilbertSpace(1, space.mode_dims, space.mode_names)
        J = ddi_operator(mot_space, cfg, order).elements
        trap = trap_hamiltonian(pspace, cfg)
        nm = space.motional_dim
        self.static = np.kron(exchange_projector(), J) + np.kron(np.eye(9), np.diag(trap))
        self.n_motional = nm
        self.space = space

    def __call__(self, segment: PulseSegment) -> OperatorMatrix:
        for lvl in ("e", "ud"[DRIVE_TARGETS[segment.drive_target]]):
            if not any(lvl in lb for lb in self.pspace.internal_basis):
                raise ProtocolError(f"level {lvl!r} missing from internal basis")
        h = _single_drive(segment)
        I3 = np.eye(3)
        Hint = np.kron(h, I3) + np.kron(I3, h)
        H = self.static + np.kron(Hint, np.eye(self.n_motional))
        return OperatorMatrix(self.space, H, hermitian=True)


def assemble_gate_hamiltonian(pspace: ProtocolSpace, cfg: PhysicalConfig,
                              segment: PulseSegment, order="quadratic") -> OperatorMatrix:
    """Full Hamiltonian for one segment on internal (x) motional space."""
    return HamiltonianBuilder(pspace, cfg, order)(segment)


@dataclass(frozen=True)
class SpectralPropagator:
    """``exp(-i H t)`` for any ``t`` from a single diagonalization."""

    energies: np.ndarray
    vectors: np.ndarray

    @classmethod
    def of(cls, H):
        m = H.elements if isinstance(H, OperatorMatrix) else np.asarray(H)
        if not (isinstance(H, OperatorMatrix) and H.hermitian):
            if hermiticity_error(m) > 1e-10 * max(1.0, np.abs(m).max()):
                raise PreconditionError("Hamiltonian is not Hermitian")
        e, v = eigh(m)
        return cls(e, v)

    def apply(self, t, states):
        v = self.vectors
        return v @ (np.exp(-1j * self.energies * t)[:, None] * (v.conj().T @ states)) \
            if np.ndim(states) == 2 else v @ (np.exp(-1j * self.energies * t) * (v.conj().T @ states))

    def matrix(self, t):
        v = self.vectors
        return (v * np.exp(-1j * self.energies * t)) @ v.conj().T


def propagate(H, duration, state):
    """Evolve ``state`` (vector or matrix of column states) for ``duration``."""
    return SpectralPropagator.of(H).apply(duration, np.asarray(state, dtype=complex))


def propagator(H, duration):
    return SpectralPropagator.of(H).matrix(duration)


@dataclass
class EvolvedEnsemble:
    """Final states per (ensemble member, input).

    ``states`` has shape ``(n_members, n_inputs, dim)``.
    """

    space: HilbertSpace
    inputs: tuple
    members: tuple
    probabilities: np.ndarray
    states: np.ndarray
    duration: float
    trajectory: list = None

    def state(self, member, inp):
        return self.states[member, self.inputs.index(inp) if isinstance(inp, str) else inp]


def _initial_states(space, inputs, members):
    out = np.zeros((len(members), len(inputs), space.total_dim), dtype=complex)
    for m, q in enumerate(members):
        for k, lab in enumerate(inputs):
            out[m, k, space.encode(internal_index(lab), q)] = 1.0
    return out


def sequence_unitary(seq: PulseSequence, pspace: ProtocolSpace, cfg: PhysicalConfig,
                     order="quadratic") -> np.ndarray:
    """Total propagator of a pulse sequence."""
    build = HamiltonianBuilder(pspace, cfg, order)
    U = None
    cache = {}
    for seg in seq:
        key = (seg.rabi_amplitude, seg.drive_target, seg.detuning)
        if key not in cache:
            cache[key] = SpectralPropagator.of(build(seg))
        Us = cache[key].matrix(seg.duration)
        U = Us if U is None else Us @ U
    return U


def run_sequence(seq: PulseSequence, initial_internal, ensemble: MotionalEnsemble,
                 cfg: PhysicalConfig, pspace: ProtocolSpace = None, sample_dt=None,
                 order="quadratic") -> EvolvedEnsemble:
    """Evolve every (Fock member, internal input) pair through ``seq``.

    Parameters
    ----------
    initial_internal : str or sequence of str
        Internal basis label(s), e.g. ``"dd"`` or the computational labels.
    sample_dt : float, optional
        If given, record states on a uniform time grid (segment ends included).
    """
    if pspace is None:
        pspace = ProtocolSpace()
    inputs = (initial_internal,) if isinstance(initial_internal, str) else tuple(initial_internal)
    space = pspace.hilbert_space
    members = tuple(ensemble.members)
    psi = _initial_states(space, inputs, members)
    flat = psi.reshape(-1, space.total_dim).T
    build = HamiltonianBuilder(pspace, cfg, order)
    traj = [(0.0, flat.T.copy())] if sample_dt else None
    t0 = 0.0
    for seg in seq:
        prop = SpectralPropagator.of(build(seg))
        if sample_dt:
            n = int(np.floor(seg.duration / sample_dt + 1e-9))
            for i in range(1, n + 1):
                traj.append((t0 + i * sample_dt, prop.apply(i * sample_dt, flat).T))
        flat = prop.apply(seg.duration, flat)
        t0 += seg.duration
        if sample_dt and (not traj or abs(traj[-1][0] - t0) > 1e-12):
            traj.append((t0, flat.T.copy()))
    states = flat.T.reshape(psi.shape)
    if traj is not None:
        traj = [(t, s.reshape(psi.shape)) for t, s in traj]
    return EvolvedEnsemble(space, inputs, members, ensemble.probabilities, states,
                           seq.duration, traj)


def ideal_reference(target, ensemble: MotionalEnsemble, duration_total, cfg: PhysicalConfig,
                    pspace: ProtocolSpace = None, inputs=COMPUTATIONAL) -> EvolvedEnsemble:
    """Target map on the internal space times free trap evolution.

    Parameters
    ----------
    target : ndarray, shape (k, k)
        Unitary on the labels ``inputs`` (columns are images of inputs).
    """
    if pspace is None:
        pspace = ProtocolSpace()
    space = pspace.hilbert_space
    target = np.asarray(target, dtype=complex)
    trap = trap_hamiltonian(pspace, cfg)
    members = tuple(ensemble.members)
    out = np.zeros((len(members), len(inputs), space.total_dim), dtype=complex)
    idx = [internal_index(lb) for lb in inputs]
    for m, q in enumerate(members):
        r = space.encode(0, q)  # motional row-major offset
        phase = np.exp(-1j * trap[r] * duration_total)
        for k in range(len(inputs)):
            for j, ij in enumerate(idx):
                out[m, k, ij * space.motional_dim + r] = target[j, k] * phase
    return EvolvedEnsemble(space, tuple(inputs), members, ensemble.probabilities, out,
                           float(duration_total))


def trajectory_rows(evolved: EvolvedEnsemble, inp, member=0, trace_motion=True):
    """Rows ``(time, basis_label, population, phase)`` from a sampled run.

    With ``trace_motion`` the population is summed over Fock states and the
    phase is that of the largest-weight amplitude in the internal block.
    """
    if evolved.trajectory is None:
        raise ValueError("run_sequence was called without sample_dt")
    k = evolved.inputs.index(inp) if isinstance(inp, str) else inp
    space = evolved.space
    nm = space.motional_dim
    rows = []
    for t, st in evolved.trajectory:
        psi = st[member, k].reshape(space.internal_dim, nm)
        for i, lab in enumerate(INTERNAL_LABELS):
            if trace_motion:
                pop = float(np.sum(np.abs(psi[i]) ** 2))
                j = int(np.argmax(np.abs(psi[i])))
                rows.append((t, lab, pop, float(np.angle(psi[i, j])) if pop > 1e-20 else 0.0))
            else:
                for r in range(nm):
                    q = space.decode(r)[1] if nm > 1 else ()
                    pop = float(abs(psi[i, r]) ** 2)
                    rows.append((t, f"{lab}|{','.join(map(str, q))}", pop,
                                 float(np.angle(psi[i, r])) if pop > 1e-20 else 0.0))
    return rows
