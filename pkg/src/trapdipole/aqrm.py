"""Asymmetric quantum Rabi models in one and three motional dimensions.

The internal space is the DDI-coupled pair ``{|up,e>, |e,up>}`` on which the
spin-exchange interaction acts as ``sigma_1``. Numeric spectra come from dense
Hermitian diagonalization; analytic spectra from the displacement (1D) and
Bogoliubov plus displacement (3D) transforms.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .fock_algebra import HilbertSpace, OperatorMatrix
from .molecule_model import AXES, CouplingConstants, PhysicalConfig, derive_couplings


class AnalyticUnsupported(ValueError):
    """No closed-form spectrum for this model (e.g. nonzero sigma_3 term)."""


class SqueezingRegimeError(ValueError):
    """Bogoliubov transform undefined: some ``1 +/- 4 zeta/omega <= 0``."""


SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA3 = np.diag([1.0, -1.0])


@dataclass(frozen=True)
class AqrmSpec:
    """Model definition.

    Parameters
    ----------
    dims : {"1D", "3D"}
    constants : CouplingConstants
    omega : dict
        Trap angular frequencies per axis.
    delta : float
        Coefficient of ``sigma_3 / 2``.
    truncation : int or dict
        Fock dimension per mode (``n_max + 1``).
    """

    dims: str
    constants: CouplingConstants
    omega: dict
    delta: float = 0.0
    truncation: object = 61

    def __post_init__(self):
        if self.dims not in ("1D", "3D"):
            raise ValueError("dims must be '1D' or '3D'")
        object.__setattr__(self, "omega", {k: float(self.omega.get(k, 0.0)) for k in AXES})

    @classmethod
    def from_config(cls, cfg: PhysicalConfig, dims="1D", truncation=None):
        if truncation is None:
            truncation = 61 if dims == "1D" else 15
        return cls(dims, derive_couplings(cfg), cfg.omega, cfg.Delta, truncation)

    @property
    def modes(self):
        return ("z",) if self.dims == "1D" else AXES

    def cutoff(self, axis) -> int:
        t = self.truncation
        return int(t[axis]) if isinstance(t, dict) else int(t)

    def space(self) -> HilbertSpace:
        return HilbertSpace(2, tuple(self.cutoff(a) for a in self.modes), self.modes)

    def squeezing_ok(self, axis, sign) -> bool:
        return 1.0 + sign * 4.0 * self.constants.zeta[axis] / self.omega[axis] > 0.0


@dataclass(frozen=True)
class AnalyticLevel:
    branch: str
    quanta: tuple
    energy: float


def _assemble(spec, trap_diag, coupling):
    n = len(trap_diag)
    H = np.zeros((2 * n, 2 * n))
    idx = np.arange(n)
    H[idx, idx] = trap_diag + 0.5 * spec.delta
    H[n + idx, n + idx] = trap_diag - 0.5 * spec.delta
    H[:n, n:] = coupling
    H[n:, :n] = coupling
    return OperatorMatrix(spec.space(), H, hermitian=True)


def build_aqrm_1d(spec: AqrmSpec) -> OperatorMatrix:
    """``w a^dag a + (g X + eta) sigma_1 + (Delta/2) sigma_3``, zero-point dropped."""
    if spec.dims != "1D":
        raise ValueError("spec is not 1D")
    d = spec.cutoff("z")
    a = np.diag(np.sqrt(np.arange(1, d)), 1)
    X = a + a.T
    c = spec.constants
    return _assemble(spec, spec.omega["z"] * np.arange(d, dtype=float),
                     c.g * X + c.eta * np.eye(d))


def build_aqrm_3d(spec: AqrmSpec) -> OperatorMatrix:
    """Three-mode model: ``sum_xi w_xi N_xi + (sum_xi h_xi + eta) sigma_1``.

    ``h_x = zeta_x X_x^2``, ``h_y = zeta_y X_y^2``, ``h_z = g X_z + zeta_z X_z^2``.
    """
    if spec.dims != "3D":
        raise ValueError("spec is not 3D")
    dims = [spec.cutoff(ax) for ax in AXES]
    c = spec.constants
    ntot = int(np.prod(dims))
    trap = np.zeros(ntot)
    coupling = c.eta * np.eye(ntot)
    for pos, ax in enumerate(AXES):
        d = dims[pos]
        a = np.diag(np.sqrt(np.arange(1, d)), 1)
        X = a + a.T
        h = c.zeta[ax] * X @ X + (c.g * X if ax == "z" else 0.0)
        left, right = int(np.prod(dims[:pos])), int(np.prod(dims[pos + 1:]))
        trap += np.kron(np.kron(np.ones(left), spec.omega[ax] * np.arange(d)), np.ones(right))
        coupling += np.kron(np.kron(np.eye(left), h), np.eye(right))
    return _assemble(spec, trap, coupling)


def numeric_spectrum(H, n_levels=None) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian operator (optionally the lowest few)."""
    m = H.elements if isinstance(H, OperatorMatrix) else np.asarray(H)
    if n_levels is None or n_levels >= len(m):
        return eigvalsh(m)
    return eigvalsh(m, subset_by_index=[0, int(n_levels) - 1])


def _branches():
    return (("+", 1.0), ("-", -1.0))


def analytic_spectrum_1d(spec: AqrmSpec, max_quanta: int):
    """Levels ``w N - g^2/w +/- eta`` for ``N = 0..max_quanta``, sorted by energy.

    The ``+`` branch is the ``sigma_1 = +1`` eigenvector, displaced by ``-g/w``.
    """
    if spec.delta != 0.0:
        raise AnalyticUnsupported("no closed form with a sigma_3 term")
    c, w = spec.constants, spec.omega["z"]
    levels = [AnalyticLevel(b, (n,), w * n - c.g ** 2 / w + s * c.eta)
              for b, s in _branches() for n in range(max_quanta + 1)]
    return sorted(levels, key=lambda lv: lv.energy)


def analytic_spectrum_3d(spec: AqrmSpec, max_quanta):
    """Levels of the three-mode model from Bogoliubov squeezing plus displacement.

    ``E = sum_xi [(N_xi + 1/2) w_xi sqrt(1 +/- 4 zeta_xi / w_xi) - w_xi / 2]
    +/- eta - g^2 / (w_z +/- 4 zeta_z)``.

    Parameters
    ----------
    max_quanta : int or tuple of int
        Largest occupation enumerated per mode.
    """
    if spec.delta != 0.0:
        raise AnalyticUnsupported("no closed form with a sigma_3 term")
    c = spec.constants
    mq = (max_quanta,) * 3 if np.isscalar(max_quanta) else tuple(max_quanta)
    levels = []
    for b, s in _branches():
        for ax in AXES:
            if spec.omega[ax] <= 0 or not spec.squeezing_ok(ax, s):
                raise SqueezingRegimeError(f"1 {b} 4 zeta_{ax}/omega_{ax} <= 0")
        wq = {ax: spec.omega[ax] * np.sqrt(1.0 + s * 4.0 * c.zeta[ax] / spec.omega[ax]) for ax in AXES}
        shift = s * c.eta - c.g ** 2 / (spec.omega["z"] + s * 4.0 * c.zeta["z"])
        for q in itertools.product(*[range(m + 1) for m in mq]):
            e = sum((n + 0.5) * wq[ax] - 0.5 * spec.omega[ax] for n, ax in zip(q, AXES))
            levels.append(AnalyticLevel(b, tuple(q), e + shift))
    return sorted(levels, key=lambda lv: lv.energy)


def displaced_eigenvector(spec: AqrmSpec, n: int, branch: str) -> np.ndarray:
    """Analytic 1D eigenvector ``|+/-> (x) D(-/+ g/w)|n>`` on the truncated space."""
    from scipy.linalg import expm

    d = spec.cutoff("z")
    a = np.diag(np.sqrt(np.arange(1, d)), 1)
    s = 1.0 if branch == "+" else -1.0
    alpha = -s * spec.constants.g / spec.omega["z"]
    D = expm(alpha * (a.T - a))
    fock = np.zeros(d)
    fock[n] = 1.0
    spin = np.array([1.0, s]) / np.sqrt(2.0)
    return np.kron(spin, D @ fock)


class AqrmSpectrum(TransformerMixin, BaseEstimator):
    """Map AQRM coupling values ``g`` to the lowest eigenvalues.

    ``transform`` takes a column of ``g`` values (in units of ``omega_z``) and
    returns an array of shape ``(n_samples, n_levels)``.

    Parameters
    ----------
    J0 : float
        DDI magnitude; ``eta = -J0``.
    omega_z : float
    truncation : int
    n_levels : int
    method : {"numeric", "analytic"}
    delta : float
    """

    def __init__(self, J0=10.0, omega_z=1.0, truncation=61, n_levels=10,
                 method="numeric", delta=0.0):
        self.J0 = J0
        self.omega_z = omega_z
        self.truncation = truncation
        self.n_levels = n_levels
        self.method = method
        self.delta = delta

    def fit(self, X=None, y=None):
        if self.method not in ("numeric", "analytic"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.truncation < 2 or self.n_levels < 1:
            raise ValueError("truncation must be >= 2 and n_levels >= 1")
        self.n_levels_ = min(self.n_levels, 2 * self.truncation)
        return self

    def _spec(self, g):
        c = CouplingConstants(g=float(g), eta=-self.J0, zeta={"x": 0.0, "y": 0.0, "z": 0.0})
        return AqrmSpec("1D", c, {"z": self.omega_z}, self.delta, self.truncation)

    def transform(self, X):
        check_is_fitted(self, "n_levels_")
        g = np.asarray(X, dtype=float).reshape(-1)
        out = np.empty((len(g), self.n_levels_))
        for i, gi in enumerate(g):
            spec = self._spec(gi)
            if self.method == "numeric":
                out[i] = numeric_spectrum(build_aqrm_1d(spec), self.n_levels_)
            else:
                lv = analytic_spectrum_1d(spec, self.n_levels_)
                out[i] = [x.energy for x in lv[: self.n_levels_]]
        return out

    def branches(self, X):
        """Branch labels of the analytic levels, aligned with ``transform``."""
        g = np.asarray(X, dtype=float).reshape(-1)
        return [[x.branch for x in analytic_spectrum_1d(self._spec(gi), self.n_levels)[: self.n_levels]]
                for gi in g]
