"""Analytical MOSFET model for the 6T cell.

Below threshold the drain current follows the classic subthreshold law

    I = (W/L) * muCsth * Vt^2 * exp((Vgs - Vt0 + eta*Vds) / (n*Vt)) * (1 - exp(-Vds/Vt))

with ``Vt = kT/q``.  Above threshold an alpha-power-law term with
channel-length modulation is added on top of a saturating continuation of
the subthreshold term, so the current is C1 in Vgs across the stitch point
``Vgs = Vt0 - eta*Vds``.

Voltages passed to :func:`drain_current` are polarity normalized: for a
pMOS device pass ``Vsg`` and ``Vsd``.  Circuit code should use :func:`ids`,
which takes absolute node voltages and returns the signed current flowing
into the drain terminal.

The DIBL term enters with a ``+eta*Vds`` sign so that a larger drain bias
raises the off current.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit, vectorize

BOLTZMANN = 1.380649e-23
ELEMENTARY_CHARGE = 1.602176634e-19

# Lipschitz bound used by the continuity check, in A/V per square at 300 K.
# The model is C1 in Vgs; in Vds the only kink is the dVds/dVdsat corner,
# bounded by the saturation current slope.
CONTINUITY_K = 1e-2


def thermal_voltage(temperature):
    """kT/q in volts."""
    return BOLTZMANN * temperature / ELEMENTARY_CHARGE


@dataclass(frozen=True)
class MosParams:
    """Compact-model parameters for one transistor.

    ``Vt0`` is the threshold magnitude for both polarities. Any field may be
    a numpy array, which is how Monte Carlo trials are batched.
    """

    polarity: str = "n"
    W: float = 0.12            # um
    L: float = 0.065           # um
    Vt0: float = 0.40          # V
    mu_Csth: float = 200e-6    # A/V^2 per square (subthreshold prefactor)
    n_slope: float = 1.4
    eta_dibl: float = 0.08
    temperature: float = 300.0  # K
    k_sat: float = 35e-6       # A/V^alpha per square
    alpha: float = 1.3
    k_vdsat: float = 0.45      # Vdsat = k_vdsat * Vov**(alpha/2)
    lambda_clm: float = 0.1    # 1/V

    def __post_init__(self):
        if self.polarity not in ("n", "p"):
            raise ValueError(f"polarity must be 'n' or 'p', got {self.polarity!r}")
        if np.any(np.asarray(self.W) <= 0) or np.any(np.asarray(self.L) <= 0):
            raise ValueError("W and L must be positive")
        if np.any(np.asarray(self.n_slope) < 1):
            raise ValueError("n_slope must be >= 1")
        if np.any(np.asarray(self.temperature) <= 0):
            raise ValueError("temperature must be positive")

    @property
    def thermal_voltage(self):
        return thermal_voltage(self.temperature)

    def with_width(self, W):
        return replace(self, W=W)

    def model_args(self):
        """Numeric parameters in the order expected by the compiled kernel."""
        return (self.W, self.L, self.Vt0, self.mu_Csth, self.n_slope,
                self.eta_dibl, self.temperature, self.k_sat, self.alpha,
                self.k_vdsat, self.lambda_clm)


@dataclass(frozen=True)
class BiasPoint:
    """Polarity-normalized bias (Vsg/Vsd for pMOS)."""

    Vgs: float
    Vds: float


@njit(cache=True)
def _ids_forward(vgs, vds, w, l, vt0, mu_csth, n, eta, temp, k_sat, alpha,
                 k_vdsat, lam):
    vt = 1.380649e-23 * temp / 1.602176634e-19
    nvt = n * vt
    x = vgs - vt0 + eta * vds
    i0 = (w / l) * mu_csth * vt * vt * (1.0 - math.exp(-vds / vt))
    if x <= 0.0:
        return i0 * math.exp(x / nvt)
    i = i0 * (2.0 - math.exp(-x / nvt))
    isat = (w / l) * k_sat * x ** alpha
    vdsat = k_vdsat * x ** (0.5 * alpha)
    r = vds / vdsat
    if r < 1.0:
        i += isat * (2.0 - r) * r * (1.0 + lam * vds)
    else:
        i += isat * (1.0 + lam * vds)
    return i


@njit(cache=True)
def ids_scalar(vgs, vds, w, l, vt0, mu_csth, n, eta, temp, k_sat, alpha,
               k_vdsat, lam):
    """Normalized drain current; the device is source/drain symmetric."""
    if vds >= 0.0:
        return _ids_forward(vgs, vds, w, l, vt0, mu_csth, n, eta, temp,
                            k_sat, alpha, k_vdsat, lam)
    return -_ids_forward(vgs - vds, -vds, w, l, vt0, mu_csth, n, eta, temp,
                         k_sat, alpha, k_vdsat, lam)


@vectorize(["float64(float64, float64, float64, float64, float64, float64, "
            "float64, float64, float64, float64, float64, float64, float64)"],
           cache=True)
def _ids_ufunc(vgs, vds, w, l, vt0, mu_csth, n, eta, temp, k_sat, alpha,
               k_vdsat, lam):
    return ids_scalar(vgs, vds, w, l, vt0, mu_csth, n, eta, temp, k_sat,
                      alpha, k_vdsat, lam)


def subthreshold_current(p: MosParams, b: BiasPoint):
    """Subthreshold channel current, evaluated exactly as the closed form."""
    vt = p.thermal_voltage
    vgs = np.asarray(b.Vgs, dtype=float)
    vds = np.asarray(b.Vds, dtype=float)
    expo = (vgs - p.Vt0 + p.eta_dibl * vds) / (p.n_slope * vt)
    return (p.W / p.L) * p.mu_Csth * vt**2 * np.exp(expo) * (-np.expm1(-vds / vt))


def drain_current(p: MosParams, b: BiasPoint):
    """Full-range normalized drain current (A), broadcasting over arrays."""
    return _ids_ufunc(np.asarray(b.Vgs, dtype=float), np.asarray(b.Vds, dtype=float),
                      *p.model_args())


def ids(p: MosParams, vg, vd, vs):
    """Signed current into the drain terminal for absolute node voltages."""
    vg = np.asarray(vg, dtype=float)
    vd = np.asarray(vd, dtype=float)
    vs = np.asarray(vs, dtype=float)
    if p.polarity == "n":
        return _ids_ufunc(vg - vs, vd - vs, *p.model_args())
    return -_ids_ufunc(vs - vg, vs - vd, *p.model_args())


# --- flat parameter vectors for compiled circuit kernels --------------------

NPAR = 11


def pack_devices(devices):
    """Stack ``model_args`` of several devices into ``(..., len(devices) * NPAR)``.

    Array-valued parameters broadcast, giving one row per Monte Carlo trial.
    """
    cols = [np.asarray(a, dtype=float) for m in devices for a in m.model_args()]
    shape = np.broadcast_shapes(*(c.shape for c in cols))
    return np.stack([np.broadcast_to(c, shape) for c in cols], axis=-1)


@njit(cache=True)
def nmos_i(p, k, vg, vd, vs):
    """Drain current of nMOS number ``k`` in the flat vector ``p``."""
    b = k * NPAR
    return ids_scalar(vg - vs, vd - vs, p[b], p[b + 1], p[b + 2], p[b + 3],
                      p[b + 4], p[b + 5], p[b + 6], p[b + 7], p[b + 8],
                      p[b + 9], p[b + 10])


@njit(cache=True)
def pmos_i(p, k, vg, vd, vs):
    b = k * NPAR
    return -ids_scalar(vs - vg, vs - vd, p[b], p[b + 1], p[b + 2], p[b + 3],
                       p[b + 4], p[b + 5], p[b + 6], p[b + 7], p[b + 8],
                       p[b + 9], p[b + 10])
