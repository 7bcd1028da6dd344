"""Threshold-voltage mismatch and seeded Monte Carlo.

Each transistor gets an independent Gaussian Vt0 shift with Pelgrom scaling,
sigma = a_vt / sqrt(W * L). Trial ``i`` draws its shifts from a Philox
stream keyed by the master seed with ``i`` in the counter, so a trial's
sample does not depend on which chunk or thread evaluates it.

Trials are evaluated in chunks as one batched design whose Vt0 fields have
shape ``(chunk, 1)``; the DC metrics broadcast over that axis. Metrics
without a batched form fall back to a per-trial loop.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import erfc

from . import dc, power
from .cell import TRANSISTORS, CellDesign

READ_ASSIST_VWL = 1.0    # V, word-line level for the assisted SRRV metric


@dataclass(frozen=True)
class PelgromModel:
    a_vt: float      # mV*um

    def __post_init__(self):
        if self.a_vt < 0:
            raise ValueError("a_vt must be >= 0")

    def sigma_vt(self, W, L):
        """Vt0 standard deviation (V) of a W x L (um) device."""
        return self.a_vt * 1e-3 / np.sqrt(np.asarray(W) * np.asarray(L))


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Counter-based stream for one trial: key = seed, counter word 2 = trial."""
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, int(trial), 0]))


def trial_normals(seed: int, trials) -> np.ndarray:
    """Standard normals of shape ``(len(trials), 6)``, one row per trial."""
    return np.array([trial_rng(seed, t).standard_normal(len(TRANSISTORS)) for t in trials]).reshape(-1, len(TRANSISTORS))


def perturb(d: CellDesign, m: PelgromModel, rng: np.random.Generator | None = None,
            z=None) -> CellDesign:
    """Copy of ``d`` with Vt0 shifts ``sigma * z`` on all six devices.

    ``z`` is either drawn from ``rng`` (six values, one design) or given as
    an ``(k, 6)`` array, which yields a batched design with ``(k, 1)`` Vt0.
    """
    if z is None:
        z = rng.standard_normal(len(TRANSISTORS))
    z = np.asarray(z, dtype=float)
    batched = z.ndim == 2
    mos = {}
    for j, name in enumerate(TRANSISTORS):
        p = getattr(d, name)
        dz = z[:, j:j + 1] if batched else float(z[j])
        mos[name] = replace(p, Vt0=p.Vt0 + m.sigma_vt(p.W, p.L) * dz)
    return d.replace_transistors(**mos)


def split(d: CellDesign, i: int) -> CellDesign:
    """Trial ``i`` of a batched design as a scalar design."""
    def pick(p):
        kw = {}
        for f in ("W", "L", "Vt0", "mu_Csth", "n_slope", "eta_dibl", "temperature",
                  "k_sat", "alpha", "k_vdsat", "lambda_clm"):
            v = np.asarray(getattr(p, f))
            kw[f] = float(v.reshape(-1)[i] if v.size > 1 else v)
        return replace(p, **kw)

    return d.replace_transistors(**{n: pick(getattr(d, n)) for n in TRANSISTORS})


# --- metrics ----------------------------------------------------------------

def _leak(field):
    def f(d):
        return getattr(power.leakage(d), field)
    return f


BATCHED = {
    "v_trip": dc.trip_point,
    "v_read": dc.v_read,
    "wlvm": dc.wlvm,
    "srrv": dc.srrv,
    "srrv_assist": lambda d: dc.srrv(d, READ_ASSIST_VWL),
    "i_s1": _leak("i_s1"),
    "i_s2": _leak("i_s2"),
    "i_s3": _leak("i_s3"),
    "supply_leakage": _leak("supply_total"),
}


def _scalar_metrics():
    from . import transient
    return {
        "rsnm": dc.rsnm,
        "hold_snm": dc.hold_snm,
        "wnm": dc.wnm,
        "read_delay": transient.read_delay,
        "write_delay": transient.write_delay,
    }


METRICS = tuple(BATCHED) + ("rsnm", "hold_snm", "wnm", "read_delay", "write_delay")


@dataclass(frozen=True)
class McConfig:
    trials: int
    seed: int
    metric: str = "v_trip"
    threads: int = 1
    chunk: int = 256
    bins: int = 30

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.threads < 1 or self.chunk < 1 or self.bins < 1:
            raise ValueError("threads, chunk and bins must be >= 1")


@dataclass(frozen=True)
class Distribution:
    values: np.ndarray      # per trial, NaN where censored
    edges: np.ndarray
    counts: np.ndarray

    @classmethod
    def from_values(cls, values, bins=30):
        values = np.asarray(values, dtype=float)
        ok = values[np.isfinite(values)]
        if ok.size:
            counts, edges = np.histogram(ok, bins=bins)
        else:
            counts, edges = np.zeros(0, dtype=int), np.zeros(0)
        return cls(values, edges, counts)

    @property
    def trials(self) -> int:
        return int(self.values.size)

    @property
    def n(self) -> int:
        return int(np.isfinite(self.values).sum())

    @property
    def censored(self) -> int:
        return self.trials - self.n

    @property
    def unreliable(self) -> bool:
        return self.censored > 0.05 * self.trials

    def _ok(self):
        return self.values[np.isfinite(self.values)]

    @property
    def mean(self) -> float:
        return float(np.mean(self._ok())) if self.n else math.nan

    @property
    def std(self) -> float:
        return float(np.std(self._ok(), ddof=1)) if self.n > 1 else 0.0

    @property
    def min(self) -> float:
        return float(np.min(self._ok())) if self.n else math.nan

    @property
    def max(self) -> float:
        return float(np.max(self._ok())) if self.n else math.nan

    def fail_prob(self, threshold=0.0) -> float:
        return gaussian_fail_prob(self.mean, self.std, threshold)

    def __eq__(self, other):
        if not isinstance(other, Distribution):
            return NotImplemented
        return (np.array_equal(self.values, other.values, equal_nan=True)
                and np.array_equal(self.edges, other.edges)
                and np.array_equal(self.counts, other.counts))

    __hash__ = None


def _eval_chunk(d, m, seed, idx, metric):
    z = trial_normals(seed, idx)
    if callable(metric) or metric not in BATCHED:
        f = metric if callable(metric) else _scalar_metrics()[metric]
        return _per_trial(perturb(d, m, z=z), len(idx), f)
    try:
        out = np.asarray(BATCHED[metric](perturb(d, m, z=z)), dtype=float)
        return np.broadcast_to(out.reshape(-1), (len(idx),)).copy()
    except (dc.SolverError, ArithmeticError):
        return _per_trial(perturb(d, m, z=z), len(idx), BATCHED[metric])


def _per_trial(db, k, f):
    out = np.empty(k)
    for i in range(k):
        try:
            out[i] = float(f(split(db, i)))
        except (dc.SolverError, ArithmeticError, RuntimeError):
            out[i] = math.nan
    return out


def monte_carlo(d: CellDesign, m: PelgromModel, cfg: McConfig, metric=None) -> Distribution:
    """Distribution of ``metric`` over ``cfg.trials`` mismatch samples.

    ``metric`` is a name from :data:`METRICS` (default ``cfg.metric``) or a
    callable taking a scalar design. Failed trials are kept as NaN and
    counted as censored.
    """
    metric = cfg.metric if metric is None else metric
    if not callable(metric) and metric not in METRICS:
        raise KeyError(f"unknown metric {metric!r}")
    starts = range(0, cfg.trials, cfg.chunk)
    chunks = [np.arange(s, min(s + cfg.chunk, cfg.trials)) for s in starts]
    if cfg.threads == 1:
        parts = [_eval_chunk(d, m, cfg.seed, idx, metric) for idx in chunks]
    else:
        with ThreadPoolExecutor(cfg.threads) as ex:
            parts = list(ex.map(lambda idx: _eval_chunk(d, m, cfg.seed, idx, metric), chunks))
    return Distribution.from_values(np.concatenate(parts), cfg.bins)


def gaussian_fail_prob(mean, std, threshold=0.0):
    """P(X < threshold) for X ~ N(mean, std), via erfc so far tails keep precision."""
    if np.any(np.asarray(std) <= 0):
        raise ValueError("std must be positive")
    z = (np.asarray(mean, dtype=float) - threshold) / (np.asarray(std, dtype=float) * math.sqrt(2.0))
    out = 0.5 * erfc(z)
    return float(out) if np.ndim(out) == 0 else out
