"""Two-qubit gate protocols, their target maps, and fidelity evaluation.

Qubit states are ``|up>`` and ``|down>``; ``|e>`` is the auxiliary rotational
level. Computational inputs are ordered ``uu, ud, du, dd``.

Two figures of merit are computed for every overlap matrix ``M``:

* the average gate fidelity with leakage, ``[Tr(M M^dag) + |Tr M|^2] / (d (d + 1))``;
* the trace overlap ``|Tr M|^2 / d^2``.

:class:`GateResult` always carries both; ``metric`` selects which one
``GateResult.value`` and the estimators' ``score`` return.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .dynamics import (COMPUTATIONAL, INTERNAL_LABELS, EvolvedEnsemble, MotionalEnsemble,
                       ProtocolSpace, PulseSegment, PulseSequence, ideal_reference,
                       internal_index, run_sequence, sequence_unitary)
from .molecule_model import PhysicalConfig, derive_couplings

METRICS = ("pedersen", "overlap")

_S = 1.0 / np.sqrt(2.0)
# rows: |uu>, |B+>, |B->, |dd> expressed in the computational basis
BELL_BASIS = np.array([[1, 0, 0, 0], [0, _S, _S, 0], [0, _S, -_S, 0], [0, 0, 0, 1]])


# -- figures of merit ---------------------------------------------------------

def _check4(M):
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"overlap matrix must be square, got shape {M.shape}")
    return M


def pedersen_fidelity(M, d=4) -> float:
    """Average gate fidelity of a (possibly non-unitary) overlap matrix."""
    M = _check4(M)
    if M.shape != (d, d):
        raise ValueError(f"expected a {d}x{d} matrix, got {M.shape}")
    return float((np.vdot(M, M).real + abs(np.trace(M)) ** 2) / (d * (d + 1)))


def trace_fidelity(M, d=4) -> float:
    """``|Tr M|^2 / d^2``."""
    M = _check4(M)
    if M.shape != (d, d):
        raise ValueError(f"expected a {d}x{d} matrix, got {M.shape}")
    return float(abs(np.trace(M)) ** 2 / d ** 2)


FIDELITY_FUNCS = {"pedersen": pedersen_fidelity, "overlap": trace_fidelity}


def local_phase_matrix(a, b):
    """``diag(1, e^{ib}, e^{ia}, e^{i(a+b)})``: z rotations on each qubit."""
    return np.diag([1.0, np.exp(1j * b), np.exp(1j * a), np.exp(1j * (a + b))])


def optimize_local_phases(Ms, weights, metric="pedersen"):
    """Best single-qubit z phases applied after the gate, shared by all members."""
    f = FIDELITY_FUNCS[metric]

    def cost(x):
        D = local_phase_matrix(*x)
        return -sum(w * f(D @ M) for M, w in zip(Ms, weights))

    Mavg = sum(w * M for M, w in zip(Ms, weights))
    d = np.angle(np.diag(Mavg))
    starts = [np.zeros(2), np.array([d[0] - d[2], d[0] - d[1]])]
    best = min((minimize(cost, s, method="Nelder-Mead",
                         options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 2000}) for s in starts),
               key=lambda r: r.fun)
    return -best.fun, best.x


# -- targets --------------------------------------------------------------------

def target_blockade_cz():
    return np.diag([1, 1, 1, -1]).astype(complex)


def target_iswap():
    """``diag(1, -i, i, 1)`` in the ``{uu, B+, B-, dd}`` basis.

    In the computational basis this is ``ud -> -i du`` and ``du -> -i ud``.
    """
    return BELL_BASIS.T @ np.diag([1, -1j, 1j, 1]) @ BELL_BASIS


def target_pi_pi():
    return np.diag([1, 1j, 1j, 1])


def target_quasi_blockade(phi, theta):
    """Raw map of the eight-pulse gate including its single-qubit phases."""
    c = -np.exp(-0.5j * phi) * np.exp(2j * theta)
    return np.diag([np.exp(4j * theta), c, c, 1.0])


# -- pulse sequences ------------------------------------------------------------

def sequence_blockade_cz(cfg: PhysicalConfig) -> PulseSequence:
    """Two pi pulses on down-e, the second with a pi/2 phase advance."""
    Om = cfg.Omega_mu
    t = np.pi / Om
    return PulseSequence([PulseSegment(t, Om, "down-e"), PulseSegment(t, 1j * Om, "down-e")])


def sequence_iswap(cfg: PhysicalConfig, t_mu, t_wait, second_phase=1.0) -> PulseSequence:
    """Pulse, wait, pulse on down-e.

    Both pulses carry the same drive phase by default, so that ``t_wait = 0``
    collapses to a single pulse of duration ``2 t_mu``.
    """
    if t_mu < 0 or t_wait < 0:
        raise ValueError("durations must be non-negative")
    Om = cfg.Omega_mu
    return PulseSequence([PulseSegment(t_mu, Om, "down-e"),
                          PulseSegment(t_wait, 0.0, "down-e"),
                          PulseSegment(t_mu, second_phase * Om, "down-e")])


def iswap_wait_unit(cfg: PhysicalConfig) -> float:
    """``pi / (2 J0)``: the exchange time unit used for wait fractions."""
    return np.pi / (2.0 * cfg.J0)


def iswap_preset(cfg: PhysicalConfig, mode="standard", wait_fraction=None, area=None):
    """Sequences for the named iSWAP variants.

    ``area`` is the pulse area of each of the two pulses in units of pi; the
    one-pulse variant uses ``area = 0.866`` (total 1.732 pi) and no wait.
    """
    defaults = {"standard": (1.0, 0.537), "modified": (0.906, 0.581), "one-pulse": (0.866, 0.0)}
    if mode not in defaults:
        raise ValueError(f"unknown iSWAP mode {mode!r}; valid: {', '.join(defaults)}")
    a0, w0 = defaults[mode]
    area = a0 if area is None else area
    wait_fraction = w0 if wait_fraction is None else wait_fraction
    return sequence_iswap(cfg, area * np.pi / cfg.Omega_mu, wait_fraction * iswap_wait_unit(cfg))


def quasi_blockade_phases(phi, theta):
    base = np.array([0.0, np.pi / 2, -np.pi / 2, 0.0])
    return np.concatenate([base, base - 2.0 * theta + phi / 2.0])


def sequence_quasi_blockade(cfg: PhysicalConfig, phi, theta) -> PulseSequence:
    """Eight pi/2 pulses on up-e with the phase schedule that programs ``C(phi)``."""
    Om = cfg.Omega_mu
    t = np.pi / (2.0 * Om)
    return PulseSequence([PulseSegment(t, Om * np.exp(1j * p), "up-e")
                          for p in quasi_blockade_phases(phi, theta)])


def sequence_pi_pi(cfg: PhysicalConfig) -> PulseSequence:
    Om = cfg.Omega_mu
    t = np.pi / Om
    return PulseSequence([PulseSegment(t, Om, "up-e"), PulseSegment(t, 1j * Om, "up-e")])


def pair_phase(cfg: PhysicalConfig, pspace: ProtocolSpace = None):
    """Phase and return probability of ``|uu>`` after one ``(Omega, i Omega)`` pi/2 pair.

    Returns
    -------
    theta : float
        ``arg <uu|U|uu>``.
    population : float
        ``|<uu|U|uu>|^2``; 1 for a perfect spin echo.
    """
    pspace = pspace or ProtocolSpace("quasi-blockade")
    Om = cfg.Omega_mu
    t = np.pi / (2.0 * Om)
    seq = PulseSequence([PulseSegment(t, Om, "up-e"), PulseSegment(t, 1j * Om, "up-e")])
    ev = run_sequence(seq, "uu", MotionalEnsemble.pure_fock(0, len(pspace.active_modes)), cfg, pspace)
    amp = ev.states[0, 0, pspace.hilbert_space.encode(internal_index("uu"),
                                                      (0,) * len(pspace.active_modes))]
    return float(np.angle(amp)), float(abs(amp) ** 2)


def effective_rates(cfg: PhysicalConfig, J=None):
    """Perturbative rates for the far-detuned drive.

    Parameters
    ----------
    J : float, optional
        Pair interaction energy; defaults to ``eta = -J0``.

    Returns
    -------
    dict
        ``omega_eff = -Omega^2/(2J)``, ``ac_stark = -Omega^2/(4J)`` and the two
        motional two-photon rates ``sqrt(2) g Omega/(eta + 3 zeta_z)`` and
        ``sqrt(6) zeta_z Omega/(eta + 3 zeta_z)``.
    """
    c = derive_couplings(cfg)
    J = c.eta if J is None else J
    if J == 0:
        raise ZeroDivisionError("effective rates need a nonzero interaction")
    Om = abs(cfg.Omega_mu)
    den = c.eta + 3.0 * c.zeta["z"]
    return {
        "omega_eff": -Om ** 2 / (2.0 * J),
        "ac_stark": -Om ** 2 / (4.0 * J),
        "two_photon_rates": (np.sqrt(2.0) * c.g * Om / den, np.sqrt(6.0) * c.zeta["z"] * Om / den),
    }


# -- fidelity evaluation --------------------------------------------------------

@dataclass
class GateResult:
    """Outcome of a gate simulation.

    Attributes
    ----------
    fidelity : float
        Ensemble-averaged average gate fidelity (Pedersen form).
    overlap_fidelity : float
        Ensemble-averaged ``|Tr M|^2 / 16``.
    local_fidelity : float
        ``fidelity`` after the best single-qubit z phases.
    per_input_overlaps : dict
        Label to ensemble-averaged ``M_kk``.
    motional_populations : dict
        Label to Fock-number histogram of the first active mode.
    output_phases : dict
        Label to ``arg`` of the raw diagonal map entry ``<k, ref|U|k>``.
    """

    fidelity: float
    overlap_fidelity: float
    local_fidelity: float = float("nan")
    local_overlap_fidelity: float = float("nan")
    per_input_overlaps: dict = field(default_factory=dict)
    motional_populations: dict = field(default_factory=dict)
    internal_populations: dict = field(default_factory=dict)
    output_phases: dict = field(default_factory=dict)
    member_fidelities: np.ndarray = None
    member_overlap_fidelities: np.ndarray = None
    metric: str = "pedersen"
    params: dict = field(default_factory=dict)

    @property
    def value(self) -> float:
        return self.fidelity if self.metric == "pedersen" else self.overlap_fidelity

    def to_dict(self):
        per = []
        for lab, ov in self.per_input_overlaps.items():
            per.append({"label": lab, "overlap_re": float(ov.real), "overlap_im": float(ov.imag),
                        "phase_over_pi": float(self.output_phases.get(lab, np.nan) / np.pi),
                        "populations": [float(p) for p in self.motional_populations.get(lab, [])]})
        return {"fidelity": self.fidelity, "overlap_fidelity": self.overlap_fidelity,
                "local_fidelity": self.local_fidelity,
                "local_overlap_fidelity": self.local_overlap_fidelity,
                "metric": self.metric, "value": self.value, "per_input": per,
                "params": _jsonable(self.params)}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def overlap_matrices(evolved: EvolvedEnsemble, ideal: EvolvedEnsemble, spectators=()):
    """Per-member ``M_jk = <ideal_j | actual_k>`` over the full space.

    Inputs listed in ``spectators`` are not simulated: their column is set to
    the ideal one (``M_jk = delta_jk``).
    """
    if (evolved.members != ideal.members or evolved.inputs != ideal.inputs
            or not np.allclose(evolved.probabilities, ideal.probabilities)):
        raise ValueError("evolved and ideal ensembles do not match")
    Ms = np.einsum("mjd,mkd->mjk", ideal.states.conj(), evolved.states)
    for lab in spectators:
        k = evolved.inputs.index(lab)
        Ms[:, :, k] = 0.0
        Ms[:, k, k] = 1.0
    return Ms


def ensemble_fidelity(evolved: EvolvedEnsemble, ideal: EvolvedEnsemble, spectators=(),
                      metric="pedersen", local=True, cfg=None, pspace=None) -> GateResult:
    """Weighted fidelity over ensemble members plus population diagnostics."""
    Ms = overlap_matrices(evolved, ideal, spectators)
    p = np.asarray(evolved.probabilities)
    fp = np.array([pedersen_fidelity(M) for M in Ms])
    fo = np.array([trace_fidelity(M) for M in Ms])
    res = GateResult(float(p @ fp), float(p @ fo), metric=metric,
                     member_fidelities=fp, member_overlap_fidelities=fo)
    if local:
        res.local_fidelity = optimize_local_phases(Ms, p, "pedersen")[0]
        res.local_overlap_fidelity = optimize_local_phases(Ms, p, "overlap")[0]
    Mavg = np.tensordot(p, Ms, axes=1)
    space = evolved.space
    nm = space.motional_dim
    # raw diagonal map entries against the untransformed input with free motion
    raw = None
    if pspace is not None and cfg is not None:
        ens = MotionalEnsemble("custom", tuple(zip(evolved.members, p)))
        ref = ideal_reference(np.eye(len(evolved.inputs)), ens, evolved.duration, cfg, pspace,
                              evolved.inputs)
        raw = np.tensordot(p, np.einsum("mkd,mkd->mk", ref.states.conj(), evolved.states), axes=1)
    for k, lab in enumerate(evolved.inputs):
        if lab in spectators:
            continue
        res.per_input_overlaps[lab] = complex(Mavg[k, k])
        psi = evolved.states[:, k, :].reshape(len(p), space.internal_dim, nm)
        pops_int = np.tensordot(p, np.sum(np.abs(psi) ** 2, axis=2), axes=1)
        res.internal_populations[lab] = dict(zip(INTERNAL_LABELS, map(float, pops_int)))
        if space.mode_dims:
            d0 = space.mode_dims[0]
            mot = np.abs(psi) ** 2
            mot = mot.reshape(len(p), space.internal_dim, d0, -1).sum(axis=(1, 3))
            res.motional_populations[lab] = p @ mot
        if raw is not None:
            res.output_phases[lab] = float(np.angle(raw[k]))
    return res


def simulate_gate(seq: PulseSequence, target, cfg: PhysicalConfig, pspace: ProtocolSpace,
                  ensemble: MotionalEnsemble = None, spectators=(), metric="pedersen",
                  local=True, order="quadratic") -> GateResult:
    """Run ``seq`` on all computational inputs and compare with ``target``."""
    if ensemble is None:
        ensemble = MotionalEnsemble.pure_fock(0, len(pspace.active_modes))
    ev = run_sequence(seq, COMPUTATIONAL, ensemble, cfg, pspace, order=order)
    ideal = ideal_reference(target, ensemble, seq.duration, cfg, pspace, COMPUTATIONAL)
    res = ensemble_fidelity(ev, ideal, spectators, metric, local, cfg, pspace)
    res.params.update({"protocol": pspace.protocol, "ensemble": ensemble.kind,
                       "nbar": ensemble.nbar, "spectators": list(spectators),
                       "active_modes": dict(pspace.active_modes), **cfg.to_dict()})
    return res


def comp_block(seq: PulseSequence, cfg: PhysicalConfig, pspace: ProtocolSpace = None):
    """4x4 block of the sequence unitary on computational states (motional vacuum)."""
    pspace = pspace or ProtocolSpace()
    U = sequence_unitary(seq, pspace, cfg)
    space = pspace.hilbert_space
    idx = [space.encode(internal_index(lb), (0,) * len(space.mode_dims)) for lb in COMPUTATIONAL]
    return U[np.ix_(idx, idx)]


# -- estimator front ends -------------------------------------------------------

class _GateEstimator(BaseEstimator):
    """Common plumbing: ``fit`` calibrates and builds the sequence, ``score`` is fidelity.

    ``X`` and ``y`` are accepted for API compatibility and ignored.
    """

    _protocol = None
    _spectators = ()

    def _ensemble(self, n_modes):
        ens = self.ensemble
        if isinstance(ens, MotionalEnsemble):
            return ens
        cut = self.fock_cutoff if n_modes else 1
        return MotionalEnsemble.parse(ens, cut, n_modes)

    def _pspace(self):
        modes = {self.mode_axis: self.fock_cutoff} if self.mode_axis else {}
        return ProtocolSpace(self._protocol, modes)

    def _check(self):
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")

    def evaluate(self, ensemble=None) -> GateResult:
        check_is_fitted(self, "sequence_")
        pspace = self.protocol_space_
        ens = self._ensemble(len(pspace.active_modes)) if ensemble is None else ensemble
        if isinstance(ens, str):
            ens = MotionalEnsemble.parse(ens, self.fock_cutoff, len(pspace.active_modes))
        res = simulate_gate(self.sequence_, self.target_, self.config_, pspace, ens,
                            self._spectators, self.metric, self.local)
        res.params.update(self.calibration_)
        return res

    def score(self, X=None, y=None):
        return self.evaluate().value

    def predict(self, X=None):
        """Overlap matrix of the motion-free gate on the computational block."""
        check_is_fitted(self, "sequence_")
        return np.asarray(self.target_).conj().T @ comp_block(self.sequence_, self.config_)


def _motion_cfg(est, J0):
    ax = est.mode_axis
    omega = {"x": 1.0, "y": 1.0, "z": 1.0}
    ell = {"x": 0.0, "y": 0.0, "z": 0.0}
    if ax:
        omega[ax] = est.omega_mode
        ell[ax] = est.ell_ratio
    return PhysicalConfig(J0=J0, omega=omega, ell_ratio=ell, Omega_mu=est.Omega_mu)


class BlockadeCZ(_GateEstimator):
    """Blockade controlled-Z: two pi pulses on down-e, phases 0 then pi/2.

    Parameters
    ----------
    Omega_mu : float
        Rabi frequency (rad/ms).
    J_ratio : float
        ``J0 / Omega_mu``.
    mode_axis : {None, "x", "y", "z"}
    omega_mode : float
        Trap frequency of the active mode (rad/ms).
    ell_ratio : float
        ``ell / L`` of the active mode.
    fock_cutoff : int
    ensemble : str or MotionalEnsemble
        ``"fock:N"`` or ``"thermal:NBAR"``.
    metric : {"pedersen", "overlap"}
    local : bool
        Also compute local-phase-optimized fidelities.
    """

    _protocol = "blockade-cz"

    def __init__(self, Omega_mu=1.0, J_ratio=20.0, mode_axis=None, omega_mode=1.0,
                 ell_ratio=0.0, fock_cutoff=41, ensemble="fock:0", metric="pedersen", local=True):
        self.Omega_mu = Omega_mu
        self.J_ratio = J_ratio
        self.mode_axis = mode_axis
        self.omega_mode = omega_mode
        self.ell_ratio = ell_ratio
        self.fock_cutoff = fock_cutoff
        self.ensemble = ensemble
        self.metric = metric
        self.local = local

    def fit(self, X=None, y=None):
        self._check()
        self.config_ = _motion_cfg(self, self.J_ratio * self.Omega_mu)
        self.protocol_space_ = self._pspace()
        self.sequence_ = sequence_blockade_cz(self.config_)
        self.target_ = target_blockade_cz()
        self.calibration_ = {}
        return self


class ISwapGate(_GateEstimator):
    """Pulse-wait-pulse iSWAP on down-e.

    Parameters
    ----------
    mode : {"standard", "modified", "one-pulse"}
        Preset pulse area and wait fraction.
    area : float, optional
        Area per pulse in units of pi (overrides the preset).
    wait_fraction : float, optional
        Wait in units of ``pi / (2 J0)`` (overrides the preset).
    calibrate : {None, "wait-only", "pulse-and-wait"}
        Optimize the sequence during ``fit`` on the motion-free model.
    simulate_all : bool
        By default ``uu`` and ``dd`` are spectators whose ideal evolution is
        assumed; set to True to propagate all four inputs.
    """

    def __init__(self, mode="standard", Omega_mu=2 * np.pi * 1.6, J0=2 * np.pi * 0.37,
                 area=None, wait_fraction=None, calibrate=None, simulate_all=False,
                 mode_axis=None, omega_mode=1.0, ell_ratio=0.0, fock_cutoff=41,
                 ensemble="fock:0", metric="pedersen", local=True):
        self.mode = mode
        self.Omega_mu = Omega_mu
        self.J0 = J0
        self.area = area
        self.wait_fraction = wait_fraction
        self.calibrate = calibrate
        self.simulate_all = simulate_all
        self.mode_axis = mode_axis
        self.omega_mode = omega_mode
        self.ell_ratio = ell_ratio
        self.fock_cutoff = fock_cutoff
        self.ensemble = ensemble
        self.metric = metric
        self.local = local

    @property
    def _protocol(self):
        return "iswap-one-pulse" if self.mode == "one-pulse" else "iswap-pi-wait-pi"

    @property
    def _spectators(self):
        return () if self.simulate_all else ("uu", "dd")

    def fit(self, X=None, y=None):
        self._check()
        self.config_ = _motion_cfg(self, self.J0)
        self.protocol_space_ = self._pspace()
        self.target_ = target_iswap()
        area, wait = self.area, self.wait_fraction
        self.calibration_ = {}
        if self.calibrate:
            from .sweeps import optimize_iswap

            rep = optimize_iswap(self.config_, self.calibrate, metric=self.metric,
                                 spectators=self._spectators,
                                 area=area if self.calibrate == "wait-only" else None)
            area = rep.best_params["area"]
            wait = rep.best_params["wait_fraction"]
            self.optimum_ = rep
        seq = iswap_preset(self.config_, self.mode, wait, area)
        self.area_ = seq.segments[0].area / np.pi
        self.wait_fraction_ = seq.segments[1].duration / iswap_wait_unit(self.config_)
        self.sequence_ = seq
        self.calibration_ = {"area_over_pi": self.area_, "wait_fraction": self.wait_fraction_,
                             "t_wait_ms": seq.segments[1].duration}
        return self


class PiPiGate(_GateEstimator):
    """Two pi pulses on up-e (phases 0 and pi/2); target ``diag(1, i, i, 1)``."""

    _protocol = "pi-pi-phase"

    def __init__(self, Omega_mu=1.0, J_ratio=10.0, mode_axis=None, omega_mode=1.0,
                 ell_ratio=0.0, fock_cutoff=41, ensemble="fock:0", metric="pedersen", local=True):
        self.Omega_mu = Omega_mu
        self.J_ratio = J_ratio
        self.mode_axis = mode_axis
        self.omega_mode = omega_mode
        self.ell_ratio = ell_ratio
        self.fock_cutoff = fock_cutoff
        self.ensemble = ensemble
        self.metric = metric
        self.local = local

    def fit(self, X=None, y=None):
        self._check()
        self.config_ = _motion_cfg(self, self.J_ratio * self.Omega_mu)
        self.protocol_space_ = self._pspace()
        self.sequence_ = sequence_pi_pi(self.config_)
        self.target_ = target_pi_pi()
        self.calibration_ = {}
        return self

    def restoration(self):
        """``|<uu|U|uu>|^2`` after the two pulses (motion-free)."""
        check_is_fitted(self, "sequence_")
        return float(abs(comp_block(self.sequence_, self.config_)[0, 0]) ** 2)


class QuasiBlockadeGate(_GateEstimator):
    """Eight-pulse controlled-phase gate ``C(phi)`` on up-e.

    Parameters
    ----------
    phi : float
        Conditional phase.
    theta : "auto" or float
        Phase acquired by ``|uu>`` per pulse pair. ``"auto"`` extracts it from a
        motion-free single-pair simulation during ``fit``.
    J_ratio : float
        ``J0 / Omega_mu``.
    """

    _protocol = "quasi-blockade"

    def __init__(self, phi=np.pi, theta="auto", Omega_mu=1.0, J_ratio=11.832, mode_axis=None,
                 omega_mode=1.0, ell_ratio=0.0, fock_cutoff=41, ensemble="fock:0",
                 metric="pedersen", local=True):
        self.phi = phi
        self.theta = theta
        self.Omega_mu = Omega_mu
        self.J_ratio = J_ratio
        self.mode_axis = mode_axis
        self.omega_mode = omega_mode
        self.ell_ratio = ell_ratio
        self.fock_cutoff = fock_cutoff
        self.ensemble = ensemble
        self.metric = metric
        self.local = local

    def fit(self, X=None, y=None):
        self._check()
        self.config_ = _motion_cfg(self, self.J_ratio * self.Omega_mu)
        self.protocol_space_ = self._pspace()
        free = self.config_.with_(ell_ratio={"x": 0.0, "y": 0.0, "z": 0.0})
        theta_pair, pop = pair_phase(free)
        self.echo_population_ = pop
        if isinstance(self.theta, str):
            if self.theta != "auto":
                raise ValueError("theta must be 'auto' or a number")
            self.theta_ = theta_pair
        else:
            self.theta_ = float(self.theta)
        self.sequence_ = sequence_quasi_blockade(self.config_, self.phi, self.theta_)
        self.target_ = target_quasi_blockade(self.phi, self.theta_)
        self.calibration_ = {"theta_over_pi": self.theta_ / np.pi, "phi": self.phi,
                             "J_ratio": self.J_ratio, "pair_echo_population": pop}
        return self

    def conditional_phase(self):
        """``arg(M_11 M_44 / (M_22 M_33))`` of the raw motion-free map."""
        check_is_fitted(self, "sequence_")
        U = comp_block(self.sequence_, self.config_)
        d = np.diag(U)
        return float(np.angle(d[0] * d[3] / (d[1] * d[2])))
