"""Trap and molecule parameters, derived couplings, and the DDI operator.

Units: hbar = 1, energies are angular frequencies in rad/ms (i.e. 2*pi*kHz),
times are in ms. Use :func:`khz` to convert a plain frequency in kHz.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .fock_algebra import HilbertSpace, OperatorMatrix, tensor

AXES = ("x", "y", "z")


class ConfigError(ValueError):
    """Invalid physical or protocol configuration."""


class SingularityError(ZeroDivisionError):
    """The two dipoles coincide."""


def khz(f):
    """Angular frequency (rad/ms) of a frequency given in kHz."""
    return 2.0 * np.pi * f


def _axis_dict(v, name):
    if isinstance(v, dict):
        d = {k: float(v.get(k, 0.0)) for k in AXES}
        extra = set(v) - set(AXES)
        if extra:
            raise ConfigError(f"{name}: unknown axes {sorted(extra)}")
        return d
    v = np.broadcast_to(np.asarray(v, dtype=float), (3,))
    return dict(zip(AXES, map(float, v)))


@dataclass(frozen=True)
class PhysicalConfig:
    """Parameters of the two-trap, two-molecule system.

    Parameters
    ----------
    J0 : float
        DDI magnitude at the trap centres (rad/ms).
    omega : dict or sequence
        Trap angular frequencies per axis (rad/ms).
    ell_ratio : dict or sequence
        Oscillator length over trap separation, ``ell_xi / L``.
    Omega_mu : float
        Microwave Rabi frequency (rad/ms).
    Delta : float
        sigma_3 asymmetry energy (rad/ms).
    L : float
        Trap separation in micrometres. Only needed by :meth:`from_lengths`.
    max_ell_ratio : float
        Guard on ``ell_xi / L``.
    """

    J0: float = 1.0
    omega: dict = field(default_factory=lambda: {"x": 1.0, "y": 1.0, "z": 1.0})
    ell_ratio: dict = field(default_factory=lambda: {"x": 0.0, "y": 0.0, "z": 0.0})
    Omega_mu: float = 1.0
    Delta: float = 0.0
    L: float = 1.0
    max_ell_ratio: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "omega", _axis_dict(self.omega, "omega"))
        object.__setattr__(self, "ell_ratio", _axis_dict(self.ell_ratio, "ell_ratio"))
        if self.L <= 0:
            raise ConfigError("trap separation must be positive")
        if any(w < 0 for w in self.omega.values()) or self.Omega_mu < 0:
            raise ConfigError("frequencies must be non-negative")
        for k, r in self.ell_ratio.items():
            if not 0.0 <= r <= self.max_ell_ratio:
                raise ConfigError(f"ell_{k}/L = {r} outside [0, {self.max_ell_ratio}]")

    @classmethod
    def from_lengths(cls, J0, L, omega, ell, **kw):
        """Build from oscillator lengths ``ell`` and separation ``L`` in micrometres."""
        ell = _axis_dict(ell, "ell")
        return cls(J0=J0, L=L, omega=omega,
                   ell_ratio={k: v / L for k, v in ell.items()}, **kw)

    def with_(self, **changes) -> "PhysicalConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {"J0": self.J0, "omega": dict(self.omega), "ell_ratio": dict(self.ell_ratio),
                "Omega_mu": self.Omega_mu, "Delta": self.Delta, "L": self.L}


@dataclass(frozen=True)
class CouplingConstants:
    g: float
    eta: float
    zeta: dict

    def scaled(self, s) -> "CouplingConstants":
        return CouplingConstants(s * self.g, s * self.eta, {k: s * v for k, v in self.zeta.items()})


def derive_couplings(cfg: PhysicalConfig) -> CouplingConstants:
    """Linear, constant and quadratic DDI couplings."""
    r = cfg.ell_ratio
    J0 = cfg.J0
    return CouplingConstants(
        g=-3.0 * J0 * r["z"],
        eta=-J0,
        zeta={"x": 3.0 * J0 * r["x"] ** 2,
              "y": 3.0 * J0 * r["y"] ** 2,
              "z": -6.0 * J0 * r["z"] ** 2},
    )


def ddi_exact(eps, J0=1.0):
    """DDI energy for dimensionless relative displacement ``eps``.

    ``eps = (eps_x, eps_y, eps_z)``, the separation along z being ``L (1 - eps_z)``.
    """
    ex, ey, ez = (float(e) for e in eps)
    rho2 = ex * ex + ey * ey
    dz2 = (1.0 - ez) ** 2
    den = rho2 + dz2
    if den == 0.0:
        raise SingularityError("molecules coincide")
    return -0.5 * J0 * (2.0 * dz2 - rho2) / den ** 2.5


def ddi_quadratic(eps, J0=1.0):
    ex, ey, ez = eps
    return -J0 * (1 + 3 * ez + 6 * ez ** 2 - 3 * (ex ** 2 + ey ** 2))


# -- truncated multivariate power series in (eps_x, eps_y, eps_z) ------------

def _ps_mul(a, b, k):
    out = np.zeros_like(a)
    for i, j, l in zip(*np.nonzero(a)):
        if i + j + l > k:
            continue
        for p, q, s in zip(*np.nonzero(b)):
            if i + j + l + p + q + s <= k:
                out[i + p, j + q, l + s] += a[i, j, l] * b[p, q, s]
    return out


def ddi_taylor_coefficients(k: int) -> np.ndarray:
    """Coefficients ``c[a, b, c]`` of ``eps_x^a eps_y^b eps_z^c`` in ``ddi_exact/J0``.

    Truncated at total degree ``k``; exact rational arithmetic in float.
    """
    if k < 0:
        raise ConfigError("Taylor order must be non-negative")
    shape = (k + 3,) * 3  # room for the degree-2 pieces before truncation
    one = np.zeros(shape)
    one[0, 0, 0] = 1.0
    # u = rho^2 + (1 - ez)^2 - 1 = ex^2 + ey^2 - 2 ez + ez^2
    u = np.zeros(shape)
    u[2, 0, 0] = u[0, 2, 0] = u[0, 0, 2] = 1.0
    u[0, 0, 1] = -2.0
    num = np.zeros(shape)  # 2 (1 - ez)^2 - rho^2
    num[0, 0, 0], num[0, 0, 1], num[0, 0, 2] = 2.0, -4.0, 2.0
    num[2, 0, 0] = num[0, 2, 0] = -1.0
    # (1 + u)^(-5/2) = sum_m binom(-5/2, m) u^m, u has no constant term
    inv = one.copy()
    um = one.copy()
    coef = 1.0
    for m in range(1, k + 1):
        coef *= (-2.5 - (m - 1)) / m
        um = _ps_mul(um, u, k)
        inv = inv + coef * um
    out = -0.5 * _ps_mul(num, inv, k)
    return out[: k + 1, : k + 1, : k + 1]


def _normalize_order(order):
    if order in ("quadratic", None):
        return 2
    if isinstance(order, str) and order.startswith("exact-taylor"):
        try:
            k = int(order.split(":")[1]) if ":" in order else int(order[len("exact-taylor("):-1])
        except (ValueError, IndexError):
            raise ConfigError(f"cannot parse DDI order {order!r}") from None
        return k
    if isinstance(order, tuple) and len(order) == 2 and order[0] == "exact-taylor":
        return int(order[1])
    raise ConfigError(f"unsupported DDI order {order!r}; use 'quadratic' or 'exact-taylor:k'")


def ddi_operator(space: HilbertSpace, cfg: PhysicalConfig, order="quadratic") -> OperatorMatrix:
    """DDI coupling J as an operator on the motional modes of ``space``.

    Each displacement ``eps_xi`` is replaced by ``(ell_xi/L) X_xi`` with
    ``X = a + a^dagger``. Axes absent from ``space`` are frozen at ``eps = 0``.
    The result acts as identity on the internal factor.

    Parameters
    ----------
    order : {"quadratic", "exact-taylor:k"}
        ``quadratic`` keeps terms up to second order in the small lengths and is
        identical to ``exact-taylor:2``.
    """
    k = _normalize_order(order)
    names = space.mode_names
    for n in names:
        if n not in AXES:
            raise ConfigError(f"mode {n!r} is not one of {AXES}")
    if k == 2:
        c = derive_couplings(cfg)
        mot = c.eta * np.eye(space.motional_dim)
        for pos, ax in enumerate(names):
            X = quadrature_matrix(space.mode_dims[pos])
            h = c.zeta[ax] * (X @ X)
            if ax == "z":
                h = h + c.g * X
            mot += _embed_motional(h, pos, space)
    else:
        coeffs = ddi_taylor_coefficients(k)
        powers = {}
        for pos, ax in enumerate(names):
            X = cfg.ell_ratio[ax] * quadrature_matrix(space.mode_dims[pos])
            P = [np.eye(len(X))]
            for _ in range(k):
                P.append(P[-1] @ X)
            powers[ax] = P
        mot = np.zeros((space.motional_dim,) * 2)
        for a, b, cc in zip(*np.nonzero(coeffs)):
            exps = {"x": a, "y": b, "z": cc}
            if any(exps[ax] and ax not in names for ax in AXES):
                continue
            mot += cfg.J0 * coeffs[a, b, cc] * tensor(*[powers[ax][exps[ax]] for ax in names]) \
                if names else cfg.J0 * coeffs[a, b, cc] * np.eye(1)
    full = np.kron(np.eye(space.internal_dim), mot)
    full = 0.5 * (full + full.T)
    return OperatorMatrix(space, full, hermitian=True)


def quadrature_matrix(dim: int) -> np.ndarray:
    """``a + a^dagger`` as a plain array; a one-level mode gives ``[[0]]``."""
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1)
    return a + a.T


def _embed_motional(h, pos, space):
    dims = space.mode_dims
    left = int(np.prod(dims[:pos], dtype=np.int64))
    right = int(np.prod(dims[pos + 1:], dtype=np.int64))
    return np.kron(np.kron(np.eye(left), h), np.eye(right))
