"""Time-domain simulation of the 6T cell.

Unknowns are the two storage nodes and the two bit-lines. A bit-line is
either a lumped floating capacitor (read) or an ideal source (write, read
disturb). Integration is the implicit trapezoidal rule at a fixed step with
a Newton solve per step; a step that fails to converge is retried with
backward Euler and then with sub-steps.

The integrator is generic: it takes a compiled right-hand side, which is
how the closed-form RC check exercises the same code path as the cell.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .cell import BiasCondition, CellDesign, CellState, S1, bitline_capacitance, node_capacitance
from .device import NPAR, nmos_i, pack_devices, pmos_i
from . import dc

P_LEAK = 6 * NPAR
P_INJ_NODE = P_LEAK + 1
P_INJ_Q = P_LEAK + 2
P_INJ_TR = P_LEAK + 3
P_INJ_TF = P_LEAK + 4
P_INJ_T0 = P_LEAK + 5
P_SIZE = P_LEAK + 6

SRC_WL, SRC_BLA, SRC_BLB, SRC_CELL = range(4)
FEMTO = 1e-15


class SimulationError(RuntimeError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class ReadTimeout(SimulationError):
    pass


class WriteFailure(SimulationError):
    pass


class BracketError(SimulationError):
    pass


# --- compiled kernels -----------------------------------------------------

@njit(cache=True)
def _pwl(src, t):
    n = src.shape[0]
    if t <= src[0, 0]:
        return src[0, 1]
    for k in range(1, n):
        if t <= src[k, 0]:
            t0 = src[k - 1, 0]
            t1 = src[k, 0]
            if t1 <= t0:
                return src[k, 1]
            return src[k - 1, 1] + (src[k, 1] - src[k - 1, 1]) * (t - t0) / (t1 - t0)
    return src[n - 1, 1]


@njit(cache=True)
def pulse_current(q, tau_r, tau_f, t):
    """Double-exponential collection current; integrates to ``q``."""
    if t <= 0.0:
        return 0.0
    return q / (tau_f - tau_r) * (math.exp(-t / tau_f) - math.exp(-t / tau_r))


@njit(cache=True)
def cell_rhs(t, v, p, sched, out):
    """Currents into [A, B, BL_A, BL_B]; driven bit-lines report their target."""
    vwl = _pwl(sched[SRC_WL], t)
    vcell = _pwl(sched[SRC_CELL], t)
    va = v[0]
    vb = v[1]
    # device order: n_a, n_b, p_a, p_b, acc_a, acc_b
    i_acc_a = nmos_i(p, 4, vwl, v[2], va)
    i_acc_b = nmos_i(p, 5, vwl, v[3], vb)
    out[0] = -pmos_i(p, 2, vb, va, vcell) - nmos_i(p, 0, vb, va, 0.0) + i_acc_a
    out[1] = -pmos_i(p, 3, va, vb, vcell) - nmos_i(p, 1, va, vb, 0.0) + i_acc_b
    out[2] = -i_acc_a - p[P_LEAK]
    out[3] = -i_acc_b - p[P_LEAK]
    node = int(p[P_INJ_NODE])
    if node >= 0:
        out[node] += pulse_current(p[P_INJ_Q], p[P_INJ_TR], p[P_INJ_TF],
                                   t - p[P_INJ_T0])
    # driven bit-lines: the value is a target voltage, not a current
    out[2] = _pwl(sched[SRC_BLA], t) if sched[SRC_BLA, 0, 0] >= 0.0 else out[2]
    out[3] = _pwl(sched[SRC_BLB], t) if sched[SRC_BLB, 0, 0] >= 0.0 else out[3]


@njit(cache=True)
def cell_supply(t, v, p, sched):
    """Current drawn from the cell supply (A)."""
    vcell = _pwl(sched[SRC_CELL], t)
    return -(pmos_i(p, 2, v[1], v[0], vcell) + pmos_i(p, 3, v[0], v[1], vcell))


@njit
def _newton(rhs, vn, i_n, cap, p, sched, t1, h, theta, tol, maxit):
    n = vn.size
    v = vn.copy()
    cur = np.empty(n)
    pert = np.empty(n)
    jac = np.empty((n, n))
    g = np.empty(n)
    eps = 1e-7
    for _ in range(maxit):
        rhs(t1, v, p, sched, cur)
        for k in range(n):
            if cap[k] > 0.0:
                g[k] = cap[k] * (v[k] - vn[k]) / h - theta * cur[k] - (1.0 - theta) * i_n[k]
            else:
                g[k] = v[k] - cur[k]
        for j in range(n):
            vj = v[j]
            v[j] = vj + eps
            rhs(t1, v, p, sched, pert)
            v[j] = vj
            for k in range(n):
                if cap[k] > 0.0:
                    jac[k, j] = -theta * (pert[k] - cur[k]) / eps
                else:
                    jac[k, j] = 0.0
        for k in range(n):
            if cap[k] > 0.0:
                jac[k, k] += cap[k] / h
            else:
                jac[k, k] = 1.0
        dv = np.linalg.solve(jac, -g)
        big = 0.0
        for k in range(n):
            v[k] += dv[k]
            if abs(dv[k]) > big:
                big = abs(dv[k])
        if not np.all(np.isfinite(v)):
            return False, vn
        if big < tol:
            return True, v
    return False, v


@njit
def integrate(rhs, aux, v0, cap, p, sched, t_stop, dt, tol, maxit):
    """Fixed-step trapezoidal integration of ``cap * dv/dt = rhs(t, v)``.

    Returns ``(status, t, v, aux_values, fail_time)``; status 0 on success.
    """
    nsteps = int(math.ceil(t_stop / dt - 1e-9))
    n = v0.size
    ts = np.empty(nsteps + 1)
    vs = np.empty((nsteps + 1, n))
    ax = np.empty(nsteps + 1)
    v = v0.copy()
    i_n = np.empty(n)
    rhs(0.0, v, p, sched, i_n)
    for k in range(n):
        if cap[k] <= 0.0:
            v[k] = i_n[k]
    rhs(0.0, v, p, sched, i_n)
    ts[0] = 0.0
    vs[0] = v
    ax[0] = aux(0.0, v, p, sched)
    for s in range(nsteps):
        t0 = s * dt
        t1 = (s + 1) * dt
        ok, vnew = _newton(rhs, v, i_n, cap, p, sched, t1, dt, 0.5, tol, maxit)
        if not ok:
            ok, vnew = _newton(rhs, v, i_n, cap, p, sched, t1, dt, 1.0, tol, maxit)
        if not ok:
            # backward-Euler sub-steps, halving down to dt / 64
            for depth in range(1, 7):
                m = 2 ** depth
                hs = dt / m
                vt = v.copy()
                it = np.zeros(n)
                ok = True
                for q in range(m):
                    ok, vt = _newton(rhs, vt, it, cap, p, sched, t0 + (q + 1) * hs,
                                     hs, 1.0, tol, maxit)
                    if not ok:
                        break
                if ok:
                    vnew = vt
                    break
        if not ok:
            return 1, ts[: s + 1], vs[: s + 1], ax[: s + 1], t1
        v = vnew
        rhs(t1, v, p, sched, i_n)
        ts[s + 1] = t1
        vs[s + 1] = v
        ax[s + 1] = aux(t1, v, p, sched)
    return 0, ts, vs, ax, t_stop


# --- Python layer -----------------------------------------------------------

@dataclass(frozen=True)
class Pwl:
    """Piecewise-linear source; ``points`` are (time_s, volts) pairs."""

    points: tuple

    @classmethod
    def const(cls, v):
        return cls(((0.0, float(v)),))

    def __post_init__(self):
        ts = [t for t, _ in self.points]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError("PWL times must be non-decreasing")

    def __call__(self, t):
        ts, vs = zip(*self.points)
        out = np.interp(t, ts, vs)
        return float(out) if np.ndim(out) == 0 else out


def wordline_pulse(level, t_start=10e-12, slew=10e-12, width=None, fall=10e-12):
    """0 -> level ramp starting at ``t_start``; optional fall after ``width``."""
    pts = [(0.0, 0.0), (t_start, 0.0), (t_start + slew, level)]
    if width is not None:
        t_fall = t_start + slew + width
        pts += [(t_fall, level), (t_fall + fall, 0.0)]
    return Pwl(tuple(pts))


@dataclass(frozen=True)
class PulseSpec:
    """Collected charge injected at a storage node."""

    charge: float                 # C, magnitude
    tau_r: float = 5e-12
    tau_f: float = 150e-12
    node: str = "A"
    polarity: str = "electron"    # electrons discharge the node, holes charge it
    t0: float = 10e-12

    def __post_init__(self):
        if not self.tau_f > self.tau_r > 0:
            raise ValueError("need tau_f > tau_r > 0")
        if self.node not in ("A", "B"):
            raise ValueError("node must be 'A' or 'B'")
        if self.polarity not in ("electron", "hole"):
            raise ValueError("polarity must be 'electron' or 'hole'")

    @property
    def signed_charge(self):
        return -self.charge if self.polarity == "electron" else self.charge

    def current(self, t):
        t = np.asarray(t, dtype=float) - self.t0
        tt = np.maximum(t, 0.0)
        i = self.signed_charge / (self.tau_f - self.tau_r) * (np.exp(-tt / self.tau_f) - np.exp(-tt / self.tau_r))
        return np.where(t > 0, i, 0.0)


@dataclass(frozen=True)
class TransientConfig:
    stop_time: float = 1e-9
    max_step: float = 0.1e-12
    tol: float = 1e-9                # V, Newton update norm
    maxit: int = 50
    vwl: Pwl | None = None           # default: word-line held at 0
    vbl_a: Pwl | None = None         # None: driven at vdd unless floating
    vbl_b: Pwl | None = None
    vcell: Pwl | None = None
    floating_bitlines: bool = False
    bitline_cap: float | None = None  # F; default from the cell's array model
    bitline_leak: float = 0.0        # A drawn from each floating bit-line
    pulse: PulseSpec | None = None

    def __post_init__(self):
        if self.max_step <= 0:
            raise ValueError("max_step must be positive")


@dataclass
class Waveform:
    t: np.ndarray
    v_a: np.ndarray
    v_b: np.ndarray
    v_bl_a: np.ndarray
    v_bl_b: np.ndarray
    i_vdd: np.ndarray
    vwl: np.ndarray = field(repr=False)

    def to_csv(self, path):
        data = np.column_stack([self.t, self.v_a, self.v_b, self.v_bl_a,
                                self.v_bl_b, self.i_vdd])
        np.savetxt(path, data, delimiter=",", fmt="%.9g", comments="",
                   header="t_s,v_a_V,v_b_V,v_bl_a_V,v_bl_b_V,i_vdd_A")

    def crossing(self, signal, level, rising=True, after=0.0):
        """First interpolated time ``signal`` crosses ``level`` after ``after``."""
        x = getattr(self, signal) if isinstance(signal, str) else signal
        m = self.t >= after
        t, x = self.t[m], x[m]
        above = x >= level if rising else x <= level
        idx = np.flatnonzero(above)
        if idx.size == 0:
            return None
        i = idx[0]
        if i == 0:
            return float(t[0])
        return float(t[i - 1] + (level - x[i - 1]) * (t[i] - t[i - 1]) / (x[i] - x[i - 1]))


def pack_params(d: CellDesign, bitline_leak=0.0, pulse: PulseSpec | None = None):
    p = np.zeros(P_SIZE)
    p[:P_LEAK] = pack_devices([d.n_a, d.n_b, d.p_a, d.p_b, d.acc_a, d.acc_b])
    p[P_LEAK] = bitline_leak
    p[P_INJ_NODE] = -1
    if pulse is not None:
        p[P_INJ_NODE] = 0 if pulse.node == "A" else 1
        p[P_INJ_Q] = pulse.signed_charge
        p[P_INJ_TR] = pulse.tau_r
        p[P_INJ_TF] = pulse.tau_f
        p[P_INJ_T0] = pulse.t0
    return p


def _sched(srcs):
    k = max(len(s.points) for s in srcs if s is not None)
    out = np.full((4, k, 2), -1.0)
    for i, s in enumerate(srcs):
        if s is None:
            continue
        pts = list(s.points) + [s.points[-1]] * (k - len(s.points))
        out[i] = np.array(pts, dtype=float)
    return out


def _bias_at(d, cfg, t):
    f = lambda src, dflt: dflt if src is None else src(t)
    vdd = d.vdd
    return BiasCondition(vdd, f(cfg.vcell, vdd), f(cfg.vwl, 0.0),
                         f(cfg.vbl_a, vdd), f(cfg.vbl_b, vdd))


def initial_voltages(d: CellDesign, state: CellState, bias: BiasCondition):
    """DC equilibrium of ``state`` under the t=0 bias."""
    guess = state.voltages(bias.vcell)
    return dc.solve_node(d, bias, guess=guess)


def simulate(d: CellDesign, init: CellState | tuple = S1,
             cfg: TransientConfig = TransientConfig()) -> Waveform:
    vdd = d.vdd
    bias0 = _bias_at(d, cfg, 0.0)
    if isinstance(init, CellState):
        va0, vb0 = initial_voltages(d, init, bias0)
    else:
        va0, vb0 = init
    c_node = node_capacitance(d)
    if cfg.floating_bitlines:
        c_bl = bitline_capacitance(d) if cfg.bitline_cap is None else cfg.bitline_cap
        bla0 = vdd if cfg.vbl_a is None else cfg.vbl_a(0.0)
        blb0 = vdd if cfg.vbl_b is None else cfg.vbl_b(0.0)
        srcs = [cfg.vwl or Pwl.const(0.0), None, None, cfg.vcell or Pwl.const(vdd)]
        cap = np.array([c_node, c_node, c_bl, c_bl])
    else:
        bla0, blb0 = bias0.vbl_a, bias0.vbl_b
        srcs = [cfg.vwl or Pwl.const(0.0), cfg.vbl_a or Pwl.const(vdd),
                cfg.vbl_b or Pwl.const(vdd), cfg.vcell or Pwl.const(vdd)]
        cap = np.array([c_node, c_node, 0.0, 0.0])
    sched = _sched(srcs)
    p = pack_params(d, cfg.bitline_leak if cfg.floating_bitlines else 0.0, cfg.pulse)
    v0 = np.array([va0, vb0, bla0, blb0], dtype=float)
    status, t, v, ivdd, tfail = integrate(cell_rhs, cell_supply, v0, cap, p, sched,
                                          cfg.stop_time, cfg.max_step, cfg.tol, cfg.maxit)
    if status != 0:
        raise SimulationError(f"Newton failed at minimum step, t = {tfail:.4e} s", time=tfail)
    wl = (cfg.vwl or Pwl.const(0.0))(t)
    return Waveform(t, v[:, 0], v[:, 1], v[:, 2], v[:, 3], ivdd, wl)


# --- measurement protocols --------------------------------------------------

T_WL = 10e-12       # word-line ramp start
WL_SLEW = 10e-12


def _wl_mid():
    return T_WL + 0.5 * WL_SLEW


def read_delay(d: CellDesign, vwl: float | None = None, cells: int | None = None,
               sense_dv: float | None = None, max_step: float = 0.1e-12,
               stop_time: float = 2e-9) -> float:
    """Word-line 50% point to the first bit-line drooping by ``sense_dv``.

    The cell holds S1, both bit-lines float from a full precharge, and the
    other ``cells - 1`` cells on the column leak from each bit-line.
    """
    from .power import leakage

    vdd = d.vdd
    vwl = vdd if vwl is None else vwl
    cells = d.tech.cells_per_bitline if cells is None else cells
    sense_dv = d.tech.sense_dv if sense_dv is None else sense_dv
    c_bl = cells * d.tech.cj_bl * d.Wacc + d.tech.c_bl_wire
    leak = (cells - 1) * leakage(d).i_s3
    cfg = TransientConfig(stop_time=stop_time, max_step=max_step,
                          vwl=wordline_pulse(vwl, T_WL, WL_SLEW),
                          floating_bitlines=True, bitline_cap=c_bl, bitline_leak=leak)
    w = simulate(d, S1, cfg)
    level = vdd - sense_dv
    hits = [w.crossing(s, level, rising=False) for s in ("v_bl_a", "v_bl_b")]
    hits = [h for h in hits if h is not None]
    if not hits:
        raise ReadTimeout(f"bit-line did not reach the sense threshold in {stop_time:.2e} s",
                          time=stop_time)
    return min(hits) - _wl_mid()


def _write_cfg(d, stop_time, max_step, width=None):
    vdd = d.vdd
    return TransientConfig(stop_time=stop_time, max_step=max_step,
                           vwl=wordline_pulse(vdd, T_WL, WL_SLEW, width=width),
                           vbl_a=Pwl.const(0.0), vbl_b=Pwl.const(vdd))


def write_delay(d: CellDesign, max_step: float = 0.1e-12, stop_time: float = 0.5e-9) -> float:
    """Word-line 50% point to the rising node (B, from 0) crossing vdd/2."""
    w = simulate(d, S1, _write_cfg(d, stop_time, max_step))
    t = w.crossing("v_b", 0.5 * d.vdd, rising=True, after=T_WL)
    if t is None:
        raise WriteFailure("storage node never reached vdd/2", time=stop_time)
    return t - _wl_mid()


def write_energy(d: CellDesign, width: float = 100e-12, max_step: float = 0.1e-12,
                 settle_tol: float = 1e-3) -> float:
    """Supply energy (J) over a full write: pulse plus settling to 1 mV."""
    vdd = d.vdd
    stop = T_WL + WL_SLEW + width + 1e-9
    w = simulate(d, S1, _write_cfg(d, stop, max_step, width=width))
    if not (w.v_a[-1] < 0.5 * vdd < w.v_b[-1]):
        raise WriteFailure("cell did not flip", time=stop)
    err = np.maximum(np.abs(w.v_a - w.v_a[-1]), np.abs(w.v_b - w.v_b[-1]))
    t_end = T_WL + WL_SLEW + width + 10e-12
    unsettled = np.flatnonzero(err > settle_tol)
    if unsettled.size:
        t_end = max(t_end, w.t[min(unsettled[-1] + 1, len(w.t) - 1)])
    m = w.t <= t_end
    return float(np.trapezoid(vdd * w.i_vdd[m], w.t[m]))


@dataclass(frozen=True)
class ReadDisturb:
    peak: float       # V, highest excursion of the '0' node
    settled: float    # V, '0' node just before the word-line falls
    flipped: bool


def read_disturb(d: CellDesign, vwl: float | None = None, width: float = 1e-9,
                 max_step: float = 0.1e-12) -> ReadDisturb:
    """'0'-node excursion during a read with bit-lines held at vdd."""
    vdd = d.vdd
    vwl = vdd if vwl is None else vwl
    t_fall = T_WL + WL_SLEW + width
    cfg = TransientConfig(stop_time=t_fall + WL_SLEW + 1e-9, max_step=max_step,
                          vwl=wordline_pulse(vwl, T_WL, WL_SLEW, width=width))
    w = simulate(d, S1, cfg)
    on = w.t <= t_fall
    peak = float(np.max(w.v_b[on])) if vwl > 0 else 0.0
    settled = float(w.v_b[on][-1])
    return ReadDisturb(peak, settled, bool(w.v_a[-1] < w.v_b[-1]))


def flips(d: CellDesign, pulse: PulseSpec, max_step: float = 0.1e-12) -> bool:
    """Whether a charge strike on a holding cell upsets it."""
    state = _struck_state(pulse)
    stop = pulse.t0 + 8 * pulse.tau_f + 0.3e-9
    w = simulate(d, state, TransientConfig(stop_time=stop, max_step=max_step, pulse=pulse))
    a_high = w.v_a[-1] > w.v_b[-1]
    return a_high != (state.label == "S1")


def _struck_state(pulse: PulseSpec) -> CellState:
    # electrons upset a node holding '1' (off n-drain), holes a node holding '0'
    node_high = pulse.polarity == "electron"
    a_high = node_high if pulse.node == "A" else not node_high
    return S1 if a_high else CellState("S0")


QCRIT_STEP = 0.01 * FEMTO


def critical_charge(d: CellDesign, node: str = "A", tau_r: float = 5e-12,
                    tau_f: float = 150e-12, polarity: str = "electron",
                    q_max: float = 100 * FEMTO, max_step: float = 0.1e-12) -> float:
    """Smallest collected charge (C) that flips the cell, on a 0.01 fC grid.

    Bisection over integer multiples of 0.01 fC between no charge (no flip)
    and ``q_max``.
    """
    def upset(k):
        return flips(d, PulseSpec(k * QCRIT_STEP, tau_r, tau_f, node, polarity),
                     max_step)

    lo, hi = 0, int(round(q_max / QCRIT_STEP))
    if not upset(hi):
        raise BracketError(f"no upset at the {q_max / FEMTO:g} fC upper bracket")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if upset(mid):
            hi = mid
        else:
            lo = mid
    return hi * QCRIT_STEP
