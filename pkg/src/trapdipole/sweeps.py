"""Parameter scans, optimizers and minimum finding.

Scan points are independent; with ``max_parallel > 1`` they are farmed out to a
process pool and gathered back in index order, so output never depends on
scheduling.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .dynamics import (COMPUTATIONAL, HamiltonianBuilder, MotionalEnsemble, ProtocolSpace,
                       SpectralPropagator, internal_index, sequence_unitary)
from .gates import (FIDELITY_FUNCS, METRICS, comp_block, iswap_wait_unit, pair_phase,
                    pedersen_fidelity, sequence_blockade_cz, sequence_iswap,
                    sequence_quasi_blockade, target_blockade_cz, target_iswap,
                    target_quasi_blockade, trace_fidelity)
from .molecule_model import PhysicalConfig, khz

TARGETS = ("aqrm-spectrum", "resonance", "iswap-wait", "iswap-2d-opt", "iswap-omega-scan",
           "motion-infidelity")


@dataclass(frozen=True)
class SweepSpec:
    """One scanned axis plus fixed overrides.

    Parameters
    ----------
    target : str
        One of :data:`TARGETS`.
    axis : str
        Name of the scanned parameter.
    start, stop : float
    points : int
        At least 2.
    spacing : {"linear", "log"}
    fixed : dict
        Extra settings for the experiment.
    ensemble : str
        ``"fock:N"`` or ``"thermal:NBAR"``.
    """

    target: str
    axis: str
    start: float
    stop: float
    points: int
    spacing: str = "linear"
    fixed: dict = field(default_factory=dict)
    ensemble: str = "fock:0"

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ValueError(f"unknown sweep target {self.target!r}")
        if not (np.isfinite(self.start) and np.isfinite(self.stop)):
            raise ValueError("scan bounds must be finite")
        if int(self.points) < 2:
            raise ValueError("a scan needs at least 2 points")
        if self.spacing not in ("linear", "log"):
            raise ValueError("spacing must be 'linear' or 'log'")
        if self.spacing == "log" and min(self.start, self.stop) <= 0:
            raise ValueError("log spacing needs positive bounds")

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, int(self.points))
        return np.linspace(self.start, self.stop, int(self.points))


@dataclass
class OptimumReport:
    best_params: dict
    best_value: float
    scan_trace: list
    refinement_iterations: int
    converged: bool = True
    warning: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {"best_params": self.best_params, "best_value": self.best_value,
                "refinement_iterations": self.refinement_iterations,
                "converged": self.converged, "warning": self.warning,
                "extra": self.extra, "scan_trace": self.scan_trace}


def parallel_map(fn, items, max_parallel=1):
    """Ordered map, optionally over a process pool."""
    items = list(items)
    if max_parallel is None or max_parallel <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=int(max_parallel)) as ex:
        return list(ex.map(fn, items))


# -- minima ----------------------------------------------------------------------

def find_minima(x, y=None):
    """Strict interior local minima with three-point parabolic refinement.

    Parameters
    ----------
    x : array_like
        Monotone abscissae, or a sequence of ``(x, y)`` pairs when ``y`` is None.

    Returns
    -------
    list of (location, value)
    """
    if y is None:
        arr = np.asarray(x, dtype=float)
        x, y = arr[:, 0], arr[:, 1]
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3 or len(x) != len(y):
        raise ValueError("need at least 3 matching points")
    dx = np.diff(x)
    if not (np.all(dx > 0) or np.all(dx < 0)):
        raise ValueError("abscissae must be strictly monotone")
    out = []
    for i in range(1, len(x) - 1):
        if y[i] < y[i - 1] and y[i] < y[i + 1]:
            x0, x1, x2 = x[i - 1:i + 2]
            y0, y1, y2 = y[i - 1:i + 2]
            # vertex of the parabola through the three samples
            num = (x1 - x0) ** 2 * (y1 - y2) - (x1 - x2) ** 2 * (y1 - y0)
            den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0)
            xm = x1 - 0.5 * num / den if den != 0 else x1
            c = np.polyfit([x0, x1, x2], [y0, y1, y2], 2)
            out.append((float(xm), float(np.polyval(c, xm))))
    return out


# -- resonance scan ----------------------------------------------------------------

def _resonance_point(args):
    ratio, J_ratio, ell_z, cutoff, pop_input, n_pops = args
    Om = 1.0
    J0 = J_ratio * Om
    cfg = PhysicalConfig(J0=J0, omega={"x": 1.0, "y": 1.0, "z": ratio * J0},
                         ell_ratio={"x": 0.0, "y": 0.0, "z": ell_z}, Omega_mu=Om)
    pspace = ProtocolSpace("blockade-cz", {"z": cutoff})
    seq = sequence_blockade_cz(cfg)
    U = sequence_unitary(seq, pspace, cfg)
    space = pspace.hilbert_space
    T = seq.duration
    trap = cfg.omega["z"] * (np.arange(cutoff) + 0.5)
    tgt = target_blockade_cz()
    cidx = [internal_index(lb) for lb in COMPUTATIONAL]
    Fp, Fo, pops = [], [], []
    k_pop = COMPUTATIONAL.index(pop_input)
    for n in range(cutoff):
        cols = [space.encode(i, (n,)) for i in cidx]
        block = U[np.ix_(cols, cols)] * np.exp(1j * trap[n] * T)
        M = tgt.conj().T @ block
        Fp.append(pedersen_fidelity(M))
        Fo.append(trace_fidelity(M))
        psi = U[:, cols[k_pop]].reshape(space.internal_dim, cutoff)
        pops.append(np.sum(np.abs(psi) ** 2, axis=0)[:n_pops])
    return np.array(Fp), np.array(Fo), np.array(pops)


def resonance_scan(ratios, ensembles=("fock:1",), J_ratio=20.0, ell_z=0.045, cutoff=41,
                   pop_input="ud", n_pops=4, metric="overlap", max_parallel=1):
    """Blockade-CZ fidelity versus ``omega_z / J0`` with z-motion coupling.

    Each scan point propagates once; every ensemble is a reweighting of the
    per-Fock-state results.

    Returns
    -------
    dict
        ``ratio`` (array), and per ensemble string: ``fidelity``,
        ``pedersen``, ``overlap`` and ``populations`` (``points x n_pops``,
        Fock-number distribution of ``pop_input`` after the gate).
    """
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    ratios = np.asarray(ratios, dtype=float)
    res = parallel_map(_resonance_point,
                       [(r, J_ratio, ell_z, cutoff, pop_input, n_pops) for r in ratios],
                       max_parallel)
    out = {"ratio": ratios}
    for ens in ensembles:
        w = MotionalEnsemble.parse(ens, cutoff)
        p = np.zeros(cutoff)
        for (n,), pn in w.weights:
            p[n] = pn
        fp = np.array([p @ r[0] for r in res])
        fo = np.array([p @ r[1] for r in res])
        pops = np.array([p @ r[2] for r in res])
        out[ens] = {"pedersen": fp, "overlap": fo,
                    "fidelity": fp if metric == "pedersen" else fo, "populations": pops}
    return out


def resonance_predictions(J_ratio=20.0, ell_z=0.045):
    """Analytic resonance positions in units of ``J0``.

    The first is ``-eta + zeta_z``; the second solves
    ``w = -eta - 5 zeta_z + 3 g^2 / (w + 2 zeta_z)`` self-consistently.
    """
    J0 = 1.0
    eta, g, zz = -J0, -3 * J0 * ell_z, -6 * J0 * ell_z ** 2
    first = -eta + zz
    w = -eta - 5 * zz
    for _ in range(200):
        w = -eta - 5 * zz + 3 * g ** 2 / (w + 2 * zz)
    return first, w


# -- iSWAP optimization --------------------------------------------------------------

class IswapModel:
    """Motion-free pulse-wait-pulse map with cached spectral decompositions.

    The drive and wait Hamiltonians do not depend on the durations, so one
    diagonalization of each serves every ``(area, wait)`` pair.
    """

    def __init__(self, cfg: PhysicalConfig, metric="overlap", spectators=("uu", "dd")):
        if metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        self.cfg = cfg
        self.metric = metric
        self.spectators = tuple(spectators)
        pspace = ProtocolSpace("iswap-pi-wait-pi")
        build = HamiltonianBuilder(pspace, cfg)
        seq = sequence_iswap(cfg, 1.0, 1.0)
        self._pulse = SpectralPropagator.of(build(seq.segments[0]))
        self._wait = SpectralPropagator.of(build(seq.segments[1]))
        idx = [internal_index(lb) for lb in COMPUTATIONAL]
        self._idx = idx
        self._tdag = target_iswap().conj().T
        self._unit = iswap_wait_unit(cfg)

    def block(self, area, wait_fraction):
        P = self._pulse.matrix(area * np.pi / self.cfg.Omega_mu)
        W = self._wait.matrix(max(wait_fraction, 0.0) * self._unit)
        U = P @ W @ P
        return U[np.ix_(self._idx, self._idx)]

    def overlap(self, area, wait_fraction):
        M = self._tdag @ self.block(area, wait_fraction)
        for lab in self.spectators:
            k = COMPUTATIONAL.index(lab)
            M[:, k] = 0.0
            M[k, k] = 1.0
        return M

    def __call__(self, area, wait_fraction):
        return FIDELITY_FUNCS[self.metric](self.overlap(area, wait_fraction))


def iswap_fidelity(cfg, area, wait_fraction, metric="overlap", spectators=("uu", "dd")):
    """Motion-free fidelity of the pulse-wait-pulse iSWAP.

    ``area`` is per pulse in units of pi; ``wait_fraction`` in units of ``pi/(2 J0)``.
    """
    return IswapModel(cfg, metric, spectators)(area, wait_fraction)


def _refine_2d(f, x0, xtol, maxiter=500):
    """Bounded Nelder-Mead with one restart from the first result."""
    nit = 0
    x = np.asarray(x0, float)
    r = None
    for step in (0.02, 0.002):
        simplex = [x, x + [step, 0.0], x + [0.0, step]]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            r2 = minimize(lambda p: -f(p[0], p[1]), x, method="Nelder-Mead",
                          bounds=[(1e-6, 2.0), (0.0, None)],
                          options={"xatol": xtol, "fatol": 1e-15, "maxiter": maxiter,
                                   "initial_simplex": simplex})
        nit += int(r2.nit)
        if r is None or r2.fun <= r.fun:
            r = r2
        x = r.x
    r.nit = nit
    return r


def optimize_iswap(cfg: PhysicalConfig, mode="wait-only", metric="overlap",
                   spectators=("uu", "dd"), grid_points=200, area=None,
                   area_range=(0.5, 1.2), wait_range=(0.0, 1.2), ratios=None,
                   unit_tol=1e-4, wait_tol=1e-3, xtol=1e-4, max_parallel=1):
    """Coarse grid then local refinement of the iSWAP sequence.

    Parameters
    ----------
    mode : {"wait-only", "pulse-and-wait", "omega-scan"}
        ``wait-only`` scans the wait at fixed area (1.0 unless given) with a
        golden-section refinement; ``pulse-and-wait`` scans both on a grid and
        refines with a bounded Nelder-Mead simplex; ``omega-scan`` repeats the
        2D optimization at fixed ``J0`` for each ``J0/Omega`` in ``ratios``.
    unit_tol : float
        ``omega-scan`` only: fidelity counted as unit when ``>= 1 - unit_tol``.
    wait_tol : float
        ``omega-scan`` only: wait fraction counted as zero below this.
    """
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    if mode == "wait-only":
        a = 1.0 if area is None else float(area)
        model = IswapModel(cfg, metric, spectators)
        ws = np.linspace(*wait_range, max(int(grid_points), 3))
        vals = np.array([model(a, w) for w in ws])
        trace = [[float(w), float(v)] for w, v in zip(ws, vals)]
        i = int(np.argmax(vals))
        best = (float(ws[i]), float(vals[i]))
        nit, ok = 0, True
        if 0 < i < len(ws) - 1:
            r = minimize_scalar(lambda w: -model(a, w),
                                bracket=(ws[i - 1], ws[i], ws[i + 1]), method="golden",
                                tol=xtol * 1e-1, options={"maxiter": 500})
            nit, ok = int(r.nit), bool(r.success)
            if -r.fun >= best[1]:
                best = (float(r.x), float(-r.fun))
        return OptimumReport({"area": a, "wait_fraction": best[0],
                              "t_wait_ms": best[0] * iswap_wait_unit(cfg)},
                             best[1], trace, nit, ok, "" if ok else "refinement did not converge")
    if mode == "pulse-and-wait":
        return _opt2d(cfg, metric, spectators, grid_points, area_range, wait_range, xtol)
    if mode == "omega-scan":
        if ratios is None:
            ratios = np.linspace(0.05, 0.7, 131)
        return _omega_scan(cfg, np.asarray(ratios, float), metric, spectators, grid_points,
                           area_range, wait_range, unit_tol, wait_tol, xtol, max_parallel)
    raise ValueError(f"unknown optimization mode {mode!r}")


def _opt2d(cfg, metric, spectators, grid_points, area_range, wait_range, xtol, seeds=()):
    f = IswapModel(cfg, metric, spectators)
    As = np.linspace(*area_range, int(grid_points))
    Ws = np.linspace(*wait_range, int(grid_points))
    grid = np.array([[f(a, w) for w in Ws] for a in As])
    i, j = np.unravel_index(np.argmax(grid), grid.shape)
    trace = [[float(As[i]), float(Ws[j]), float(grid[i, j])]]
    starts = [np.array([As[i], Ws[j]])] + [np.asarray(s, float) for s in seeds]
    best = None
    nit = 0
    for s in starts:
        r = _refine_2d(f, s, xtol)
        nit += int(r.nit)
        if best is None or r.fun < best.fun:
            best = r
    a, w = float(best.x[0]), float(max(best.x[1], 0.0))
    val = -float(best.fun)
    ok = bool(best.success)
    if val < grid[i, j]:
        a, w, val = float(As[i]), float(Ws[j]), float(grid[i, j])
    return OptimumReport({"area": a, "wait_fraction": w, "t_wait_ms": w * iswap_wait_unit(cfg)},
                         val, trace, nit, ok, "" if ok else "refinement did not converge")


def _omega_point(args):
    cfg, r, metric, spectators, grid_points, area_range, wait_range, xtol = args
    c = cfg.with_(Omega_mu=cfg.J0 / r)
    rep = _opt2d(c, metric, spectators, grid_points, area_range, wait_range, xtol)
    return [float(r), rep.best_value, rep.best_params["area"], rep.best_params["wait_fraction"]]


def _omega_scan(cfg, ratios, metric, spectators, grid_points, area_range, wait_range,
                unit_tol, wait_tol, xtol, max_parallel):
    rows = parallel_map(_omega_point, [(cfg, r, metric, spectators, grid_points, area_range,
                                        wait_range, xtol) for r in ratios], max_parallel)
    arr = np.array(rows)
    unit = arr[:, 1] >= 1.0 - unit_tol
    window = (float(arr[unit, 0].min()), float(arr[unit, 0].max())) if unit.any() else None
    # first ratio (scanning upward) at which the optimal wait has reached zero
    zero = np.nonzero(arr[:, 3] <= wait_tol)[0]
    wait_zero = float(arr[zero[0], 0]) if len(zero) else None
    k = int(np.argmax(arr[:, 1]))
    return OptimumReport({"ratio": float(arr[k, 0]), "area": float(arr[k, 2]),
                          "wait_fraction": float(arr[k, 3])}, float(arr[k, 1]),
                         [list(map(float, r)) for r in rows], 0,
                         extra={"unit_window": window, "wait_zero_ratio": wait_zero,
                                "unit_tol": unit_tol, "wait_tol": wait_tol})


# -- motional infidelity ---------------------------------------------------------------

MOTION_PROTOCOLS = ("one-pulse-iswap", "quasi-blockade")


def motion_protocol(protocol, ell, cutoff=41, J_ratio=11.832, phi=np.pi):
    """Configuration, sequence, target, protocol space and spectators for a motion run."""
    if protocol == "one-pulse-iswap":
        Om = khz(0.641)
        J0 = khz(0.37)
        cfg = PhysicalConfig(J0=J0, omega={"x": 2 * Om, "y": 1.0, "z": 1.0},
                             ell_ratio={"x": ell, "y": 0.0, "z": 0.0}, Omega_mu=Om)
        seq = sequence_iswap(cfg, 0.866 * np.pi / Om, 0.0)
        return cfg, seq, target_iswap(), ProtocolSpace("iswap-one-pulse", {"x": cutoff}), ("uu", "dd")
    if protocol == "quasi-blockade":
        Om = 1.0
        cfg = PhysicalConfig(J0=J_ratio * Om, omega={"x": 0.3 * Om, "y": 1.0, "z": 1.0},
                             ell_ratio={"x": ell, "y": 0.0, "z": 0.0}, Omega_mu=Om)
        theta, _ = pair_phase(cfg.with_(ell_ratio=(0.0, 0.0, 0.0)))
        seq = sequence_quasi_blockade(cfg, phi, theta)
        return (cfg, seq, target_quasi_blockade(phi, theta),
                ProtocolSpace("quasi-blockade", {"x": cutoff}), ())
    raise ValueError(f"unknown protocol {protocol!r}; valid: {', '.join(MOTION_PROTOCOLS)}")


def _member_fidelities(args):
    protocol, ell, cutoff = args
    cfg, seq, tgt, pspace, spect = motion_protocol(protocol, ell, cutoff)
    U = sequence_unitary(seq, pspace, cfg)
    space = pspace.hilbert_space
    T = seq.duration
    trap = cfg.omega["x"] * (np.arange(cutoff) + 0.5)
    cidx = [internal_index(lb) for lb in COMPUTATIONAL]
    fp, fo = [], []
    for n in range(cutoff):
        cols = [space.encode(i, (n,)) for i in cidx]
        M = tgt.conj().T @ (U[np.ix_(cols, cols)] * np.exp(1j * trap[n] * T))
        for lab in spect:
            k = COMPUTATIONAL.index(lab)
            M[:, k] = 0.0
            M[k, k] = 1.0
        fp.append(pedersen_fidelity(M))
        fo.append(trace_fidelity(M))
    return np.array(fp), np.array(fo)


def motion_infidelity_curve(protocol, ells, nbars=(1, 2, 3), cutoff=41, metric="overlap",
                            max_parallel=1):
    """Thermal-ensemble infidelity versus ``ell_x / L``.

    Returns
    -------
    list of tuple
        ``(ell, nbar, fidelity, infidelity, pedersen, overlap)`` rows ordered by
        ``ell`` then ``nbar``.
    """
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    if protocol not in MOTION_PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}; valid: {', '.join(MOTION_PROTOCOLS)}")
    ells = [float(e) for e in ells]
    per = parallel_map(_member_fidelities, [(protocol, e, cutoff) for e in ells], max_parallel)
    rows = []
    for e, (fp, fo) in zip(ells, per):
        for nb in nbars:
            p = np.array([w for _, w in MotionalEnsemble.thermal(nb, cutoff).weights])
            vp, vo = float(p @ fp), float(p @ fo)
            v = vp if metric == "pedersen" else vo
            rows.append((e, float(nb), v, 1.0 - v, vp, vo))
    return rows
