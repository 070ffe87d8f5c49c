import numpy as np
import pytest

from trapdipole.dynamics import (COMPUTATIONAL, MotionalEnsemble, PreconditionError,
                                 ProtocolError, ProtocolSpace, PulseSegment, PulseSequence,
                                 assemble_gate_hamiltonian, ideal_reference, internal_index,
                                 propagate, propagator, run_sequence, trajectory_rows)
from trapdipole.gates import ensemble_fidelity, sequence_blockade_cz, target_blockade_cz
from trapdipole.molecule_model import ConfigError, PhysicalConfig, derive_couplings


def rk4(H, psi, t):
    h = 1e-4 / np.linalg.norm(H, 2)
    n = int(np.ceil(t / h))
    h = t / n
    f = lambda v: -1j * (H @ v)
    for _ in range(n):
        k1 = f(psi)
        k2 = f(psi + 0.5 * h * k1)
        k3 = f(psi + 0.5 * h * k2)
        k4 = f(psi + h * k3)
        psi = psi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return psi


def test_block_structure_without_drive():
    cfg = PhysicalConfig(J0=3.0)
    H = assemble_gate_hamiltonian(ProtocolSpace(), cfg, PulseSegment(1.0, 0.0)).elements
    i, j = internal_index("ue"), internal_index("eu")
    assert np.allclose(H[np.ix_([i, j], [i, j])], -3.0 * np.array([[0, 1], [1, 0]]))
    off = H.copy()
    off[i, j] = off[j, i] = 0
    assert np.allclose(off, 0)


def test_restricted_five_state_block():
    w, J0, Om = 0.9, 1.0, 0.2
    cfg = PhysicalConfig(J0=J0, omega={"x": 1, "y": 1, "z": w}, ell_ratio=(0, 0, 0.04), Omega_mu=Om)
    c = derive_couplings(cfg)
    ps = ProtocolSpace("blockade-cz", {"z": 8})
    sp = ps.hilbert_space
    H = assemble_gate_hamiltonian(ps, cfg, PulseSegment(1.0, Om, "down-e")).elements

    def vec(pairs, n):
        v = np.zeros(sp.total_dim)
        for lab, amp in pairs:
            v[sp.encode(internal_index(lab), (n,))] = amp
        return v

    s = 1 / np.sqrt(2)
    plus = [("ue", s), ("eu", s)]
    bplus = [("ud", s), ("du", s)]
    basis = [vec(plus, 0), vec(plus, 3), vec(plus, 2), vec(plus, 1), vec(bplus, 1)]
    B = np.array(basis).T
    Hr = B.T @ H @ B - 1.5 * w * np.eye(5)
    g, eta, zz = c.g, c.eta, c.zeta["z"]
    r2, r3, r6 = np.sqrt(2), np.sqrt(3), np.sqrt(6)
    expected = np.array([
        [eta - w, 0, r2 * zz, g, 0],
        [0, eta + 2 * w, r3 * g, r6 * zz, 0],
        [r2 * zz, r3 * g, eta + w, r2 * g, 0],
        [g, r6 * zz, r2 * g, eta, Om / 2],
        [0, 0, 0, Om / 2, 0]]) + np.diag([1, 7, 5, 3, 0]) * zz
    assert np.allclose(Hr, expected, atol=1e-12)
    # plus-branch coupling between neighbouring Fock states is g
    assert np.isclose(basis[0] @ H @ basis[3], g)


def test_protocol_errors():
    with pytest.raises(ProtocolError):
        ProtocolSpace("teleport")
    with pytest.raises(ProtocolError):
        PulseSegment(1.0, 1.0, "e-e")
    with pytest.raises(ConfigError):
        PulseSegment(-1.0)
    with pytest.raises(ConfigError):
        PulseSequence([])
    with pytest.raises(ProtocolError):
        assemble_gate_hamiltonian(ProtocolSpace(internal_basis=("uu", "ud", "du", "dd")),
                                  PhysicalConfig(), PulseSegment(1.0, 1.0))


def test_propagate_zero_and_pi_pulse():
    psi = np.arange(9) + 1j
    assert np.allclose(propagate(np.zeros((9, 9)), 3.0, psi), psi)
    Om = 2.0
    H = assemble_gate_hamiltonian(ProtocolSpace(), PhysicalConfig(J0=0.0, Omega_mu=Om),
                                  PulseSegment(1.0, Om, "down-e")).elements
    # restrict to the first molecule by starting in |u d>: only the second flips
    out = propagate(H, np.pi / Om, np.eye(9)[internal_index("ud")])
    assert np.isclose(out[internal_index("ue")], -1j)


def test_non_hermitian_rejected():
    with pytest.raises(PreconditionError):
        propagate(np.array([[0, 1], [0, 0]]), 1.0, np.array([1, 0]))


def test_norm_preserved_over_many_segments():
    rng = np.random.default_rng(7)
    pool = []
    for _ in range(20):
        A = rng.normal(size=(100, 100)) + 1j * rng.normal(size=(100, 100))
        pool.append(A + A.conj().T)
    from trapdipole.dynamics import SpectralPropagator
    props = [SpectralPropagator.of(H) for H in pool]
    psi = rng.normal(size=100) + 1j * rng.normal(size=100)
    psi /= np.linalg.norm(psi)
    for k in range(10_000):
        psi = props[k % 20].apply(rng.uniform(0, 1), psi)
    assert abs(np.linalg.norm(psi) - 1) <= 1e-10


def test_composability_and_unitarity():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    H = A + A.conj().T
    v = rng.normal(size=12) + 0j
    a = propagate(H, 0.7, propagate(H, 0.4, v))
    b = propagate(H, 1.1, v)
    assert np.abs(a - b).max() <= 1e-10
    U = propagator(H, 0.9)
    assert np.allclose(U.conj().T @ U, np.eye(12), atol=1e-12)


def test_rk4_oracle_on_gate_hamiltonian():
    cfg = PhysicalConfig(J0=5.0, Omega_mu=1.3)
    H = assemble_gate_hamiltonian(ProtocolSpace(), cfg, PulseSegment(1.0, 1.3 * np.exp(0.4j))).elements
    psi = np.ones(9, dtype=complex) / 3
    t = 0.5
    assert np.linalg.norm(propagate(H, t, psi) - rk4(H, psi, t)) <= 1e-6


def test_empty_drive_keeps_state():
    cfg = PhysicalConfig(J0=2.0)
    seq = PulseSequence([PulseSegment(1.3, 0.0), PulseSegment(0.4, 0.0, "up-e")])
    ev = run_sequence(seq, "dd", MotionalEnsemble.pure_fock(0, 0), cfg)
    assert np.isclose(abs(ev.states[0, 0, internal_index("dd")]), 1.0)


def test_blockade_pulses_return_dd_with_sign():
    cfg = PhysicalConfig(J0=1e4, Omega_mu=1.0)
    ev = run_sequence(sequence_blockade_cz(cfg), "dd", MotionalEnsemble.pure_fock(0, 0), cfg,
                      sample_dt=np.pi / 2)
    assert np.isclose(ev.states[0, 0, internal_index("dd")], -1.0)
    mid = [s for t, s in ev.trajectory if np.isclose(t, np.pi)][0]
    assert np.isclose(mid[0, 0, internal_index("ee")], -1.0)


def test_thermal_weights():
    ens = MotionalEnsemble.thermal(2.0, 200)
    p = dict(ens.weights)
    assert np.isclose(p[(0,)], 1 / 3) and np.isclose(p[(1,)], 2 / 9) and np.isclose(p[(2,)], 4 / 27)
    short = MotionalEnsemble.thermal(3.0, 5)
    assert abs(short.probabilities.sum() - 1) <= 1e-10
    with pytest.raises(ValueError):
        MotionalEnsemble.parse("thermal:x", 10)
    with pytest.raises(ValueError):
        MotionalEnsemble.parse("fock:12", 10)


def test_ideal_reference_phases():
    cfg = PhysicalConfig(omega={"x": 1, "y": 1, "z": 2.0})
    ps = ProtocolSpace("blockade-cz", {"z": 4})
    T = target_blockade_cz()
    r0 = ideal_reference(T, MotionalEnsemble.pure_fock(1), 0.0, cfg, ps)
    sp = ps.hilbert_space
    assert np.isclose(r0.states[0, 3, sp.encode(internal_index("dd"), (1,))], -1.0)
    r1 = ideal_reference(np.eye(4), MotionalEnsemble.pure_fock(1), 2 * np.pi / 2.0, cfg, ps)
    assert np.isclose(r1.states[0, 0, sp.encode(internal_index("uu"), (1,))], -1.0)


def test_thermal_reference_phase_cancels():
    cfg = PhysicalConfig(J0=20.0, omega={"x": 1, "y": 1, "z": 21.0}, ell_ratio=(0, 0, 0.045))
    ps = ProtocolSpace("blockade-cz", {"z": 12})
    ens = MotionalEnsemble.thermal(1.0, 12)
    seq = sequence_blockade_cz(cfg)
    ev = run_sequence(seq, COMPUTATIONAL, ens, cfg, ps)
    with_phase = ensemble_fidelity(ev, ideal_reference(target_blockade_cz(), ens, seq.duration, cfg, ps),
                                   local=False)
    without = ensemble_fidelity(ev, ideal_reference(target_blockade_cz(), ens, 0.0, cfg, ps), local=False)
    assert abs(with_phase.fidelity - without.fidelity) <= 1e-12


def test_trajectory_rows_shape():
    cfg = PhysicalConfig(J0=10.0)
    ev = run_sequence(sequence_blockade_cz(cfg), "ud", MotionalEnsemble.pure_fock(0, 0), cfg,
                      sample_dt=0.5)
    rows = trajectory_rows(ev, "ud")
    assert len(rows) == 9 * len(ev.trajectory)
    assert rows[0][:3] == (0.0, "uu", 0.0)
