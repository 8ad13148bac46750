"""Magnetization laws and the algebra built on them.

A law ``chi`` maps field intensity ``s = |H| >= 0`` to a dimensionless
susceptibility-like factor with ``chi(0) = 0``, ``0 <= chi <= chi0`` and
``0 <= chi' <= chi1``. From it we derive

* ``kappa(s) = int_0^s chi``, convex and ``chi0``-Lipschitz,
* the flux ``a(xi) = chi(|xi|) xi / |xi|`` (gradient of ``kappa(|xi|)``),
* its Hessian, and the magnetization ``M = M_S (tau_star - tau) a(H)``.

All functions accept scalars or numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.interpolate import PchipInterpolator

#: below this |xi| the flux is replaced by its linearization chi'(0) xi
DELTA_A = 1e-12
#: below this argument the Langevin law is summed from its Taylor series
#: (the closed form loses ~3 eps / s^2 relative accuracy to cancellation)
LANGEVIN_SERIES_CUTOFF = 1.0
_N_SERIES = 18


def _bernoulli(m):
    """Exact ``B_0 .. B_m`` (Akiyama-Tanigawa)."""
    out, a = [], [Fraction(0)] * (m + 1)
    for n in range(m + 1):
        a[n] = Fraction(1, n + 1)
        for j in range(n, 0, -1):
            a[j - 1] = j * (a[j - 1] - a[j])
        out.append(a[0])
    out[1] = -out[1]
    return out


def _langevin_coefficients(n=_N_SERIES):
    """``L(s) = sum_k c_k s^(2k - 1)`` with ``c_k = 4^k B_2k / (2k)!``."""
    b = _bernoulli(2 * n)
    return np.array([float(4 ** k * b[2 * k] / math.factorial(2 * k)) for k in range(1, n + 1)])


_LC = _langevin_coefficients()


def _poly_s2(coef, x2):
    """Horner evaluation of ``sum_k coef[k] x2^k``."""
    acc = np.zeros_like(x2)
    for c in coef[::-1]:
        acc = acc * x2 + c
    return acc


class ChiLaw:
    """Base class; subclasses implement ``_chi``, ``_dchi`` and ``_kappa``
    on nonnegative float arrays."""

    kind = "abstract"
    chi0: float
    chi1: float

    @property
    def chi_prime_at_zero(self) -> float:
        return float(self._dchi(np.zeros(1))[0])

    def chi(self, s):
        return _apply(self._chi, s)

    def chi_prime(self, s):
        return _apply(self._dchi, s)

    def kappa(self, s):
        return _apply(self._kappa, s)


def _apply(fn, s):
    arr = np.asarray(s, dtype=float)
    if np.any(arr < 0):
        raise ValueError("magnetization law evaluated at negative field intensity")
    out = fn(np.atleast_1d(arr))
    return out.reshape(arr.shape) if arr.shape else float(out[0])


@dataclass(frozen=True)
class LangevinLaw(ChiLaw):
    """``chi(s) = coth(s) - 1/s``."""

    kind = "langevin"
    chi0: float = 1.0
    chi1: float = 1.0 / 3.0

    def _chi(self, s):
        out = np.empty_like(s)
        small = s < LANGEVIN_SERIES_CUTOFF
        x = s[small]
        out[small] = x * _poly_s2(_LC, x * x)
        y = s[~small]
        out[~small] = 1.0 / np.tanh(y) - 1.0 / y
        return out

    def _dchi(self, s):
        out = np.empty_like(s)
        small = s < LANGEVIN_SERIES_CUTOFF
        x2 = s[small] ** 2
        out[small] = _poly_s2(_LC * (2 * np.arange(1, _N_SERIES + 1) - 1), x2)
        y = s[~small]
        with np.errstate(over="ignore"):
            out[~small] = 1.0 / y ** 2 - 1.0 / np.sinh(y) ** 2
        return out

    def _kappa(self, s):
        # ln(sinh s / s), written to avoid overflow for large s
        out = np.empty_like(s)
        small = s < LANGEVIN_SERIES_CUTOFF
        x2 = s[small] ** 2
        out[small] = x2 * _poly_s2(_LC / (2 * np.arange(1, _N_SERIES + 1)), x2)
        y = s[~small]
        out[~small] = y + np.log1p(-np.exp(-2.0 * y)) - math.log(2.0) - np.log(y)
        return out


@dataclass(frozen=True)
class ArctanLaw(ChiLaw):
    """``chi(s) = arctan(slope * s)``."""

    slope: float = 1.0
    kind = "arctan"

    def __post_init__(self):
        if not self.slope > 0:
            raise ValueError("arctan law needs slope > 0")

    @property
    def chi0(self):
        return math.pi / 2.0

    @property
    def chi1(self):
        return self.slope

    def _chi(self, s):
        return np.arctan(self.slope * s)

    def _dchi(self, s):
        return self.slope / (1.0 + (self.slope * s) ** 2)

    def _kappa(self, s):
        b = self.slope
        return s * np.arctan(b * s) - np.log1p((b * s) ** 2) / (2.0 * b)


@dataclass(frozen=True, eq=False)
class TabulatedLaw(ChiLaw):
    """Monotone C1 (PCHIP) interpolant through ``(s, chi)`` samples, held
    constant past the last sample. The bounds must be supplied."""

    s: tuple
    values: tuple
    chi0: float = None
    chi1: float = None
    kind = "tabulated"
    _interp: PchipInterpolator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if self.chi0 is None or self.chi1 is None:
            raise ValueError("tabulated law requires explicit chi0 and chi1 bounds")
        if s.ndim != 1 or s.size < 2 or s[0] != 0.0 or np.any(np.diff(s) <= 0):
            raise ValueError("tabulated s must start at 0 and increase strictly")
        if v[0] != 0.0:
            raise ValueError("tabulated law needs chi(0) = 0")
        if np.any(np.diff(v) < 0) or v.max() > self.chi0:
            raise ValueError("tabulated chi must be nondecreasing and bounded by chi0")
        interp = PchipInterpolator(s, v, extrapolate=False)
        fine = np.linspace(0.0, 1.0, 9)[:-1]
        probe = np.append((s[:-1, None] + np.diff(s)[:, None] * fine).ravel(), s[-1])
        if np.max(interp.derivative()(probe)) > self.chi1 * (1 + 1e-12):
            raise ValueError("tabulated chi' exceeds the declared chi1")
        object.__setattr__(self, "_interp", interp)

    def _chi(self, s):
        smax = self.s[-1]
        return np.where(s >= smax, self.values[-1], self._interp(np.minimum(s, smax)))

    def _dchi(self, s):
        smax = self.s[-1]
        return np.where(s >= smax, 0.0, self._interp.derivative()(np.minimum(s, smax)))

    def _kappa(self, s):
        smax = self.s[-1]
        anti = self._interp.antiderivative()
        base = anti(np.minimum(s, smax))
        return base + np.maximum(s - smax, 0.0) * self.values[-1]


def make_law(name: str, **kwargs) -> ChiLaw:
    """Build a law from its config name."""
    name = name.lower()
    if name == "langevin":
        return LangevinLaw()
    if name == "arctan":
        return ArctanLaw(slope=float(kwargs.get("slope", 1.0)))
    if name == "tabulated":
        return TabulatedLaw(tuple(kwargs["s"]), tuple(kwargs["values"]),
                            chi0=kwargs.get("chi0"), chi1=kwargs.get("chi1"))
    raise ValueError(f"unknown magnetization law {name!r}")


# thin functional surface -----------------------------------------------------

def chi(law: ChiLaw, s):
    return law.chi(s)


def chi_prime(law: ChiLaw, s):
    return law.chi_prime(s)


def kappa(law: ChiLaw, s):
    return law.kappa(s)


def flux_a(law: ChiLaw, xi):
    """``a(xi) = chi(|xi|) xi/|xi|``; the last axis of ``xi`` is the vector axis."""
    xi = np.asarray(xi, dtype=float)
    r = np.linalg.norm(xi, axis=-1)
    small = r < DELTA_A
    rs = np.where(small, 1.0, r)
    coef = np.where(small, law.chi_prime_at_zero, law.chi(r) / rs)
    return coef[..., None] * xi


def flux_hessian(law: ChiLaw, xi):
    """Jacobian of :func:`flux_a` (Hessian of ``kappa(|xi|)``)."""
    xi = np.asarray(xi, dtype=float)
    n = xi.shape[-1]
    r = np.linalg.norm(xi, axis=-1)
    small = r < DELTA_A
    rs = np.where(small, 1.0, r)
    omega = xi / rs[..., None]
    c0 = law.chi_prime_at_zero
    radial = np.where(small, c0, law.chi_prime(r))
    tangential = np.where(small, c0, law.chi(r) / rs)
    eye = np.eye(n)
    oo = omega[..., :, None] * omega[..., None, :]
    return (radial - tangential)[..., None, None] * oo + tangential[..., None, None] * eye


def tol_clamp(tau_star: float) -> float:
    return 1e-10 * tau_star


def thermal_factor_b(tau_star, zeta_value, tau_tilde_value):
    """``b = tau_star - zeta - tau_tilde``, clamped at zero within round-off.

    Raises :class:`~ferroperiod.errors.MaxPrincipleError` when the value is
    negative beyond ``1e-10 * tau_star``.
    """
    from .errors import MaxPrincipleError

    b = tau_star - np.asarray(zeta_value, dtype=float) - np.asarray(tau_tilde_value, dtype=float)
    tol = tol_clamp(tau_star)
    if np.any(b < -tol):
        raise MaxPrincipleError(f"b = tau_star - zeta - tau_tilde reaches {float(np.min(b)):.3e} < 0")
    b = np.maximum(b, 0.0)
    return float(b) if b.ndim == 0 else b


def magnetization(law: ChiLaw, M_S, tau_star, tau, H):
    """``M = M_S (tau_star - tau) a(H)``, defined for ``0 <= tau <= tau_star``."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0) or np.any(tau > tau_star):
        raise ValueError("temperature outside [0, tau_star] in magnetization law")
    return M_S * (tau_star - tau)[..., None] * flux_a(law, H)


@dataclass(frozen=True)
class PhysParams:
    """Physical constants (SI-like units, all user supplied)."""

    rho0: float = 1.0
    mu: float = 1.0
    eta: float = 1.0
    cp: float = 1.0
    mu0: float = 1.0
    M_S: float = 1.0
    alpha: float = 0.0
    g_mag: float = 0.0
    tau_star: float = 1.0

    def __post_init__(self):
        for name in ("rho0", "mu", "eta", "cp", "mu0", "M_S"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("alpha", "g_mag", "tau_star"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be nonnegative")
