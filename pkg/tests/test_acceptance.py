"""Acceptance criteria, each at its stated tolerance.

Fidelities use the ``|Tr M|^2 / 16`` overlap metric; the Pedersen value is
reported alongside. Run ``pytest tests/test_acceptance.py -rA`` (or this file
directly) for the PASS/FAIL summary.
"""

import numpy as np
import pytest

from trapdipole.aqrm import (AqrmSpec, analytic_spectrum_1d, analytic_spectrum_3d,
                             build_aqrm_1d, build_aqrm_3d, numeric_spectrum)
from trapdipole.dynamics import ProtocolSpace, PulseSegment, assemble_gate_hamiltonian, propagate
from trapdipole.gates import (BlockadeCZ, ISwapGate, PiPiGate, QuasiBlockadeGate, pair_phase,
                              pedersen_fidelity)
from trapdipole.molecule_model import CouplingConstants, PhysicalConfig, khz
from trapdipole.sweeps import (find_minima, iswap_fidelity, motion_infidelity_curve,
                               optimize_iswap, resonance_predictions, resonance_scan)

METRIC = "overlap"
ZERO = {"x": 0.0, "y": 0.0, "z": 0.0}


def note(record_property, **kw):
    record_property("detail", ", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                                        for k, v in kw.items()))


def within(x, target, tol):
    return abs(x - target) <= tol


@pytest.mark.criterion(1, "1D AQRM spectrum")
def test_aqrm_1d_spectrum(record_property):
    worst = 0.0
    for g in np.linspace(-1.5, 0.0, 31):
        s = AqrmSpec("1D", CouplingConstants(g, -10.0, ZERO), {"z": 1.0}, 0.0, 61)
        num = numeric_spectrum(build_aqrm_1d(s), 10)
        ana = [x.energy for x in analytic_spectrum_1d(s, 10)[:10]]
        worst = max(worst, float(np.abs(num - ana).max()))
    note(record_property, max_err=worst)
    assert worst <= 1e-6


@pytest.mark.criterion(2, "3D AQRM analytic vs numeric")
def test_aqrm_3d_spectrum(record_property):
    cfg = PhysicalConfig(J0=1.0, omega=(0.9, 0.95, 1.0), ell_ratio=(0.05, 0.05, 0.05))
    s = AqrmSpec.from_config(cfg, "3D", truncation=15)
    num = numeric_spectrum(build_aqrm_3d(s), 5)
    ana = [x.energy for x in analytic_spectrum_3d(s, 4)[:5]]
    err = float(np.abs(num - ana).max())
    note(record_property, max_err=err, dim=2 * 15 ** 3)
    assert err <= 1e-4


@pytest.mark.criterion(3, "blockade CZ baseline")
def test_blockade_baseline(record_property):
    res = BlockadeCZ(J_ratio=20.0, metric=METRIC).fit().evaluate()
    note(record_property, F=res.value, pedersen=res.fidelity)
    assert within(res.value, 0.9969, 5e-4)


@pytest.mark.criterion(4, "trap-dipole resonance minima and populations")
def test_resonance(record_property):
    ratios = np.round(np.arange(0.85, 1.3 + 1e-9, 0.0025), 6)
    out = resonance_scan(ratios, ("fock:1",), 20.0, 0.045, 41, "ud", 4, METRIC)
    d = out["fock:1"]
    mins = [m for m, _ in find_minima(ratios, d["fidelity"])]
    pred = resonance_predictions(20.0, 0.045)
    near = [min(abs(m - p) / p for m in mins) for p in pred]
    i = int(np.argmin(abs(ratios - 1.08)))
    pops = d["populations"][i]
    pop_err = float(np.abs(pops - [0.002, 0.856, 0.134, 0.007]).max())
    note(record_property, minima=[round(m, 4) for m in mins], predicted=[round(p, 5) for p in pred],
         rel_dev=[round(v, 4) for v in near], pops_at_1p08=[round(float(p), 4) for p in pops],
         pop_err=pop_err)
    assert all(v <= 0.03 for v in near)
    assert pop_err <= 0.01


def _iswap_cfg(om_khz):
    return PhysicalConfig(J0=khz(0.37), Omega_mu=khz(om_khz))


@pytest.mark.criterion(5, "standard iSWAP optimal wait")
def test_standard_iswap(record_property):
    rep = optimize_iswap(_iswap_cfg(1.6), "wait-only", METRIC, grid_points=200)
    w = rep.best_params["wait_fraction"]
    ped = iswap_fidelity(_iswap_cfg(1.6), 1.0, w, "pedersen")
    note(record_property, wait_fraction=w, F=rep.best_value, pedersen=ped)
    assert within(w, 0.537, 5e-3)
    assert within(rep.best_value, 0.9665, 5e-4)


@pytest.mark.criterion(6, "modified iSWAP")
def test_modified_iswap(record_property):
    res = ISwapGate("modified", metric=METRIC).fit().evaluate()
    note(record_property, F=res.value, pedersen=res.fidelity)
    assert res.value >= 0.9999


@pytest.mark.criterion(7, "one-pulse iSWAP and Omega scan")
def test_one_pulse_iswap(record_property):
    res = ISwapGate("one-pulse", Omega_mu=khz(0.641), metric=METRIC).fit().evaluate()
    rep = optimize_iswap(_iswap_cfg(1.6), "omega-scan", METRIC, grid_points=41,
                         ratios=np.linspace(0.05, 0.65, 241))
    lo, hi = rep.extra["unit_window"]
    wz = rep.extra["wait_zero_ratio"]
    note(record_property, F=res.value, pedersen=res.fidelity, window=(round(lo, 4), round(hi, 4)),
         wait_zero=wz)
    assert res.value >= 0.9999
    assert within(lo, 0.05, 0.01) and within(hi, 0.58, 0.01)
    assert within(wz, 0.573, 5e-3)


def _motion_at(protocol, ell, nbars=(1, 2, 3)):
    return motion_infidelity_curve(protocol, [ell], nbars, 41, METRIC)


@pytest.mark.criterion(8, "one-pulse iSWAP motional fidelity")
def test_motion_iswap(record_property):
    rows = _motion_at("one-pulse-iswap", 0.05)
    F = [r[2] for r in rows]
    note(record_property, F=[round(v, 5) for v in F], pedersen=[round(r[4], 5) for r in rows])
    assert all(within(f, t, 3e-4) for f, t in zip(F, (0.9998, 0.9994, 0.9988)))


@pytest.mark.criterion(9, "pi-pi gate")
def test_pi_pi(record_property):
    a = PiPiGate(J_ratio=10.0, metric=METRIC).fit()
    b = PiPiGate(J_ratio=9.798, metric=METRIC).fit()
    ra, rb = a.evaluate(), b.evaluate()
    note(record_property, F10=ra.value, F9798=rb.value, pedersen10=ra.fidelity,
         pedersen9798=rb.fidelity, restoration9798=b.restoration())
    assert b.restoration() >= 1 - 1e-4
    assert within(ra.value, 0.9903, 5e-4)
    assert within(rb.value, 0.9900, 5e-4)


@pytest.mark.criterion(10, "quasi-blockade gate")
def test_quasi_blockade(record_property):
    echo = {jr: pair_phase(PhysicalConfig(J0=jr, Omega_mu=1.0))[1] for jr in (11.382, 11.832)}
    jr = max(echo, key=echo.get)
    est = QuasiBlockadeGate(phi=np.pi, J_ratio=jr, metric=METRIC).fit()
    res = est.evaluate()
    th = est.theta_ / np.pi
    puu = res.output_phases["uu"] / np.pi
    pud = res.output_phases["ud"] / np.pi
    note(record_property, J_ratio=jr, echo=echo[jr], theta_over_pi=th, phase_uu=puu, phase_ud=pud,
         F=res.value, pedersen=res.fidelity)
    assert within(th, -0.04196, 5e-4)
    assert within(puu, -0.16785, 1e-3) and within(pud, 0.41608, 1e-3)
    assert res.value >= 0.9999


@pytest.mark.criterion(11, "quasi-blockade motional fidelity and oscillation")
def test_motion_quasi_blockade(record_property):
    ells = np.linspace(0.0, 0.12, 49)
    rows = motion_infidelity_curve("quasi-blockade", ells, (1, 2, 3), 41, METRIC, max_parallel=4)
    at = [r for r in rows if np.isclose(r[0], 0.05)]
    F = [r[2] for r in at]
    osc = {}
    for nb in (1, 2, 3):
        inf = np.array([r[3] for r in rows if r[1] == nb])
        maxima = find_minima(ells, -inf)
        minima = find_minima(ells, inf)
        osc[nb] = bool(maxima and any(m > maxima[0][0] for m, _ in minima))
    note(record_property, F=[round(v, 5) for v in F], pedersen=[round(r[4], 5) for r in at],
         oscillation=osc)
    assert all(osc.values())
    assert all(within(f, t, 3e-4) for f, t in zip(F, (0.9998, 0.9995, 0.9990)))


def _rk4(H, psi, t):
    n = int(np.ceil(t * np.linalg.norm(H, 2) / 1e-4))
    h = t / n
    for _ in range(n):
        k1 = -1j * H @ psi
        k2 = -1j * H @ (psi + h / 2 * k1)
        k3 = -1j * H @ (psi + h / 2 * k2)
        k4 = -1j * H @ (psi + h * k3)
        psi = psi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return psi


@pytest.mark.criterion(12, "property suite")
def test_properties(record_property):
    rng = np.random.default_rng(12)
    # unitarity of a motional gate propagator
    from trapdipole.dynamics import sequence_unitary
    from trapdipole.sweeps import _member_fidelities, motion_protocol
    cfg, seq, _, ps, _ = motion_protocol("quasi-blockade", 0.05, 20)
    U = sequence_unitary(seq, ps, cfg)
    unit_err = float(np.abs(U.conj().T @ U - np.eye(len(U))).max())
    # truncation convergence: per-Fock-member fidelities and the n=1 thermal ensemble;
    # the nbar=3 ensemble also loses ~1e-5 of tail weight at 41 states (reported only)
    m41 = _member_fidelities(("quasi-blockade", 0.05, 41))[1][:10]
    m81 = _member_fidelities(("quasi-blockade", 0.05, 81))[1][:10]
    f41 = [r[2] for r in motion_infidelity_curve("quasi-blockade", [0.05], (1, 3), 41, METRIC)]
    f81 = [r[2] for r in motion_infidelity_curve("quasi-blockade", [0.05], (1, 3), 81, METRIC)]
    trunc = max(float(np.abs(m41 - m81).max()), abs(f41[0] - f81[0]))
    trunc_nbar3 = abs(f41[1] - f81[1])
    # propagator vs fixed-step integrator
    H = assemble_gate_hamiltonian(ProtocolSpace(), PhysicalConfig(J0=4.0, Omega_mu=1.5),
                                  PulseSegment(1.0, 1.5 * np.exp(0.3j), "up-e")).elements
    psi = rng.normal(size=9) + 1j * rng.normal(size=9)
    psi /= np.linalg.norm(psi)
    oracle = float(np.linalg.norm(propagate(H, 0.8, psi) - _rk4(H, psi, 0.8)))
    # Pedersen invariance under conjugation
    inv = 0.0
    for _ in range(50):
        q = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))[0]
        v = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))[0]
        inv = max(inv, abs(pedersen_fidelity(v @ q @ v.conj().T) - pedersen_fidelity(q)))
    # conditional phase linear in phi
    lin = 0.0
    for phi in (np.pi / 4, np.pi / 2, np.pi, 3 * np.pi / 2):
        got = QuasiBlockadeGate(phi=phi).fit().conditional_phase()
        lin = max(lin, abs(float(np.angle(np.exp(1j * (got - phi))))))
    note(record_property, unitarity=unit_err, truncation=trunc, truncation_nbar3=trunc_nbar3, oracle=oracle, pedersen_inv=inv,
         phi_linearity=lin)
    assert unit_err <= 1e-10
    assert trunc < 1e-6
    assert oracle <= 1e-6
    assert inv <= 1e-12
    assert lin <= 1e-3


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
