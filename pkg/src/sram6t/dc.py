"""Static analysis of the cross-coupled latch.

Every quantity here is built on one primitive: solving the KCL of a single
storage node for a given voltage on the opposite node (an inverter output,
optionally loaded by its access device). The node current is monotone
decreasing in the node voltage, so a bracketed Newton iteration always
converges. All routines broadcast, so device parameters may carry a leading
Monte Carlo axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .cell import BiasCondition, CellDesign
from .device import ids, nmos_i, pack_devices, pmos_i

SQRT2 = math.sqrt(2.0)
GRID_STEP = 1e-3      # V
MV = 1e-3


class SolverError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


def _side(d: CellDesign, side: str, bias: BiasCondition):
    if side == "A":
        return d.n_a, d.p_a, d.acc_a, bias.vbl_a
    if side == "B":
        return d.n_b, d.p_b, d.acc_b, bias.vbl_b
    raise ValueError("side must be 'A' or 'B'")


def node_current(d: CellDesign, side: str, v_out, v_in, bias: BiasCondition,
                 loaded: bool = True):
    """Net current (A) flowing into storage node ``side``."""
    pd, pu, acc, vbl = _side(d, side, bias)
    i = -ids(pu, v_in, v_out, bias.vcell) - ids(pd, v_in, v_out, 0.0)
    if loaded:
        i = i + ids(acc, bias.vwl, vbl, v_out)
    return i


def _is_loaded(bias: BiasCondition) -> bool:
    # hold-mode curves are the bare inverter characteristic
    return bool(np.any(np.asarray(bias.vwl) > 0.0))


def solve_decreasing(f, lo, hi, itol=1e-14, vtol=1e-13, maxiter=200):
    """Vectorized root of a monotone decreasing function on [lo, hi].

    Newton steps with a finite-difference slope, falling back to bisection
    whenever a step leaves the current bracket.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    fx = f(0.5 * (lo + hi))
    shape = fx.shape
    lo = np.broadcast_to(lo, shape).copy()
    hi = np.broadcast_to(hi, shape).copy()
    x = 0.5 * (lo + hi)
    h = 1e-7
    for _ in range(maxiter):
        done = (np.abs(fx) < itol) | (hi - lo < vtol)
        if done.all():
            return x
        lo = np.where(fx > 0, x, lo)
        hi = np.where(fx < 0, x, hi)
        slope = (f(x + h) - fx) / h
        with np.errstate(divide="ignore", invalid="ignore"):
            step = x - fx / slope
        bad = ~((step > lo) & (step < hi))
        xn = np.where(bad, 0.5 * (lo + hi), step)
        x = np.where(done, x, xn)
        fx = f(x)
    resid = float(np.max(np.abs(fx)))
    raise SolverError(f"node solve did not converge (max residual {resid:.3e} A)",
                      residual=resid)


def inverter_output(d: CellDesign, side: str, v_in, bias: BiasCondition,
                    loaded: bool | None = None):
    """Output voltage of inverter ``side`` for input (opposite node) ``v_in``."""
    loaded = _is_loaded(bias) if loaded is None else loaded
    vbl = bias.vbl_a if side == "A" else bias.vbl_b
    hi = np.maximum(bias.vcell, vbl if loaded else 0.0)
    v_in = np.asarray(v_in, dtype=float)

    def f(v):
        return node_current(d, side, v, v_in, bias, loaded)

    return solve_decreasing(f, 0.0, hi)


def solve_node(d: CellDesign, bias: BiasCondition, forced: dict | None = None,
               guess=None):
    """Node voltages (V_A, V_B) with optional clamped nodes.

    With one node clamped the other is a single monotone solve. With no
    clamp the stable equilibrium nearest ``guess`` (default: state S1) is
    returned.
    """
    forced = forced or {}
    bad = set(forced) - {"A", "B"}
    if bad:
        raise ValueError(f"unknown node(s) {sorted(bad)}")
    loaded = _is_loaded(bias)
    if "A" in forced and "B" in forced:
        return float(forced["A"]), float(forced["B"])
    if "A" in forced:
        va = forced["A"]
        return va, inverter_output(d, "B", va, bias, loaded)
    if "B" in forced:
        vb = forced["B"]
        return inverter_output(d, "A", vb, bias, loaded), vb
    states = stable_states(d, bias)
    if guess is None:
        guess = (bias.vcell, 0.0)
    pts = np.array([(s[0], s[1]) for s in states])
    k = int(np.argmin(np.hypot(pts[:, 0] - guess[0], pts[:, 1] - guess[1])))
    return tuple(pts[k])


def grid(vmax: float, step: float = GRID_STEP) -> np.ndarray:
    n = int(round(vmax / step))
    return np.linspace(0.0, n * step, n + 1)


@dataclass(frozen=True)
class Vtc:
    """Transfer curve of one inverter: ``vout`` as a function of ``vin``."""

    vin: np.ndarray
    vout: np.ndarray
    inverter: str
    bias: BiasCondition
    mode: str

    def to_csv(self, path):
        np.savetxt(path, np.column_stack([self.vin, self.vout]), delimiter=",",
                   header="vin_V,vout_V", comments="", fmt="%.9g")


@dataclass(frozen=True)
class ButterflyCurve:
    a: Vtc   # V_A = f_A(V_B)
    b: Vtc   # V_B = f_B(V_A)

    def xy(self):
        """Both curves in the (V_B, V_A) plane."""
        return (self.a.vin, self.a.vout), (self.b.vout, self.b.vin)


def _mode(bias: BiasCondition) -> str:
    if bias.vwl == 0.0:
        return "hold"
    return "write" if min(bias.vbl_a, bias.vbl_b) < bias.vdd else "read"


def vtc(d: CellDesign, bias: BiasCondition, inverter: str = "A",
        mode: str | None = None, step: float = GRID_STEP) -> Vtc:
    mode = _mode(bias) if mode is None else mode
    vin = grid(bias.vcell, step)
    vout = inverter_output(d, inverter, vin, bias, loaded=(mode != "hold"))
    return Vtc(vin, vout, inverter, bias, mode)


def butterfly(d: CellDesign, bias: BiasCondition, step: float = GRID_STEP) -> ButterflyCurve:
    return ButterflyCurve(vtc(d, bias, "A", step=step), vtc(d, bias, "B", step=step))


# --- equilibria -----------------------------------------------------------

def latch_map(d: CellDesign, bias: BiasCondition, va, loaded=None):
    """One trip around the loop: V_A -> V_B = f_B(V_A) -> f_A(V_B)."""
    vb = inverter_output(d, "B", va, bias, loaded)
    return inverter_output(d, "A", vb, bias, loaded), vb


def _span(bias):
    return float(np.max(np.maximum(bias.vcell, bias.vbl_a)))


def _crossings(g):
    """Indices i with a stable (+ to -) and unstable (- to +) sign change of g."""
    stable = (g[..., :-1] > 0) & (g[..., 1:] <= 0)
    unstable = (g[..., :-1] <= 0) & (g[..., 1:] > 0)
    return stable, unstable


# Compiled scan of the latch map. Device order in the flat vector follows
# the transient kernel: n_a, n_b, p_a, p_b, acc_a, acc_b.

@njit(cache=True)
def _node_i(p, side, v, vin, vcell, vwl, vbl, loaded):
    i = -pmos_i(p, 2 + side, vin, v, vcell) - nmos_i(p, side, vin, v, 0.0)
    if loaded:
        i += nmos_i(p, 4 + side, vwl, vbl, v)
    return i


@njit(cache=True)
def _solve_out(p, side, vin, vcell, vwl, vbl, loaded, x):
    lo = 0.0
    hi = max(vcell, vbl) if loaded else vcell
    if not (lo < x < hi):
        x = 0.5 * (lo + hi)
    fx = _node_i(p, side, x, vin, vcell, vwl, vbl, loaded)
    for _ in range(200):
        if abs(fx) < 1e-14 or hi - lo < 1e-13:
            return x
        if fx > 0.0:
            lo = x
        else:
            hi = x
        slope = (_node_i(p, side, x + 1e-7, vin, vcell, vwl, vbl, loaded) - fx) / 1e-7
        step = x - fx / slope if slope != 0.0 else lo
        if not (lo < step < hi):
            step = 0.5 * (lo + hi)
        x = step
        fx = _node_i(p, side, x, vin, vcell, vwl, vbl, loaded)
    return np.nan


@njit(cache=True, nogil=True)
def _latch_residual(P, vcell, vwl, vbla, vblb, loaded, va):
    """``f_A(f_B(va)) - va`` and ``f_B(va)`` per trial row of ``P``.

    Warm-started along va.
    """
    k = P.shape[0]
    n = va.size
    g = np.empty((k, n))
    vb = np.empty((k, n))
    for t in range(k):
        p = P[t]
        xa = -1.0
        xb = -1.0
        for i in range(n):
            xb = _solve_out(p, 1, va[i], vcell[t], vwl[t], vblb[t], loaded, xb)
            xa = _solve_out(p, 0, xb, vcell[t], vwl[t], vbla[t], loaded, xa)
            g[t, i] = xa - va[i]
            vb[t, i] = xb
    return g, vb


def _trial_shape(d: CellDesign):
    """Monte Carlo shape of a batched design (parameters shaped ``(k, 1)``)."""
    shape = np.broadcast_shapes(*(np.shape(a) for m in d.transistors().values()
                                  for a in m.model_args()))
    if len(shape) > 2 or (len(shape) == 2 and shape[1] != 1):
        raise ValueError("batched parameters must have shape (trials, 1)")
    return shape[:1]


def latch_scan(d: CellDesign, bias: BiasCondition, va):
    """Return-map residual and V_B on the grid ``va``, shaped ``trials + va.shape``."""
    tshape = _trial_shape(d)
    k = tshape[0] if tshape else 1
    P = pack_devices([d.n_a, d.n_b, d.p_a, d.p_b, d.acc_a, d.acc_b]).reshape(-1, 66)
    P = np.ascontiguousarray(np.broadcast_to(P, (k, 66)))
    b = [np.ascontiguousarray(np.broadcast_to(np.ravel(np.asarray(x, dtype=float)), (k,)))
         if np.size(x) in (1, k) else None
         for x in (bias.vcell, bias.vwl, bias.vbl_a, bias.vbl_b)]
    if any(x is None for x in b):
        raise ValueError("bias arrays must match the trial count")
    g, vb = _latch_residual(P, *b, _is_loaded(bias), np.asarray(va, dtype=float))
    if np.isnan(g).any():
        raise SolverError("node solve did not converge during the latch scan")
    shape = tshape + np.shape(va)
    return g.reshape(shape), vb.reshape(shape)


def latch_residual(d: CellDesign, bias: BiasCondition, va):
    """Return-map residual on the grid ``va``, shaped ``trials + va.shape``."""
    return latch_scan(d, bias, va)[0]


def stable_state_count(d: CellDesign, bias: BiasCondition, step: float = GRID_STEP):
    """Number of stable equilibria; one count per Monte Carlo trial."""
    va = grid(_span(bias), step)
    stable, _ = _crossings(latch_residual(d, bias, va))
    return stable.sum(axis=-1)


def equilibria(d: CellDesign, bias: BiasCondition, step: float = GRID_STEP):
    """All equilibria as a list of (V_A, V_B, is_stable), sorted by V_A."""
    va = grid(_span(bias), step)
    g = latch_residual(d, bias, va)
    if g.ndim != 1:
        raise ValueError("equilibria() works on a single design")
    stable, unstable = _crossings(g)
    out = []
    for i in np.flatnonzero(stable | unstable):
        lo, hi = va[i], va[i + 1]

        def gf(x):
            return latch_map(d, bias, x)[0] - x

        if unstable[i]:
            root = solve_decreasing(lambda x: -gf(x), lo, hi)
        else:
            root = solve_decreasing(gf, lo, hi)
        root = float(root)
        vb = float(inverter_output(d, "B", root, bias))
        out.append((root, vb, bool(stable[i])))
    return out


def stable_states(d: CellDesign, bias: BiasCondition):
    return [(a, b) for a, b, s in equilibria(d, bias) if s]


# --- noise margins --------------------------------------------------------

def _rotated(x, y):
    return (x + y) / SQRT2, (y - x) / SQRT2


def lobe_separation(bf_xy, wstep: float = 1e-4):
    """Diagonal separation between the two curves as a function of w.

    Returns ``(w, diff)`` where ``diff = u_b(w) - u_a(w)`` on the common w
    range, with u along (1, 1) and w along (-1, 1). A square with sides
    parallel to the axes and its diagonal on a (1, 1) chord between the
    curves has side ``|diff| / sqrt(2)``.
    """
    (xa, ya), (xb, yb) = bf_xy
    ua, wa = _rotated(np.asarray(xa), np.asarray(ya))
    ub, wb = _rotated(np.asarray(xb), np.asarray(yb))
    ia, ib = np.argsort(wa), np.argsort(wb)
    ua, wa, ub, wb = ua[ia], wa[ia], ub[ib], wb[ib]
    w0, w1 = max(wa[0], wb[0]), min(wa[-1], wb[-1])
    n = max(int(np.ceil((w1 - w0) / wstep)), 1)
    w = np.linspace(w0, w1, n + 1)
    return w, np.interp(w, wb, ub) - np.interp(w, wa, ua)


def lobe_squares(bf_xy, w_split: float, wstep: float = 1e-4):
    """Largest inscribed square on each side of the metastable point.

    Each lobe is the sign-consistent run of the separation adjacent to
    ``w_split``; returns ``(side_low_w, side_high_w)``.
    """
    w, diff = lobe_separation(bf_xy, wstep)
    k = int(np.clip(np.searchsorted(w, w_split), 1, len(w) - 1))
    sides = []
    for run in (diff[:k][::-1], diff[k:]):
        if run.size == 0:
            sides.append(0.0)
            continue
        # lobe sign is set by the first sample clear of the crossing
        clear = np.flatnonzero(np.abs(run) > 1e-6)
        if clear.size == 0:
            sides.append(0.0)
            continue
        sign = np.sign(run[clear[0]])
        flips = np.flatnonzero(np.sign(run) == -sign)
        seg = run[: flips[0]] if flips.size else run
        sides.append(float(np.max(np.abs(seg))) / SQRT2 if seg.size else 0.0)
    return tuple(sides)


def rsnm(d: CellDesign, bias: BiasCondition | None = None, step: float = GRID_STEP):
    """Read static noise margin (V); 0 when the read butterfly is monostable."""
    bias = BiasCondition.read(d.vdd) if bias is None else bias
    return snm_report(d, bias, step)[0]


def hold_snm(d: CellDesign, bias: BiasCondition | None = None, step: float = GRID_STEP):
    bias = BiasCondition.hold(d.vdd) if bias is None else bias
    return rsnm(d, bias, step)


def snm_report(d: CellDesign, bias: BiasCondition, step: float = GRID_STEP):
    """``(snm, lobe_sides, butterfly)`` for one design."""
    eq = equilibria(d, bias, step)
    bf = butterfly(d, bias, step)
    if sum(s for *_, s in eq) < 2:
        return 0.0, (0.0, 0.0), bf
    unstable = [(a, b) for a, b, s in eq if not s]
    va_m, vb_m = unstable[len(unstable) // 2]
    sides = lobe_squares(bf.xy(), (va_m - vb_m) / SQRT2)
    return min(sides), sides, bf


def wnm(d: CellDesign, bias: BiasCondition | None = None, step: float = GRID_STEP,
        wstep: float = 1e-4) -> float:
    """Write noise margin (V) for writing S0 (bit-line A low).

    The two write-mode curves are compared along the anti-diagonal. Past the
    lobe around the written state the separation narrows to a neck; its
    width, as a square side, is the margin. Any further crossing of the
    curves means the old state survives and the margin is 0.
    """
    bias = BiasCondition.write_s0(d.vdd) if bias is None else bias
    if bias.vwl <= 0.0 or stable_state_count(d, bias, step) != 1:
        return 0.0
    bf = butterfly(d, bias, step)
    w, diff = lobe_separation(bf.xy(), wstep)
    (va, vb, _), = [e for e in equilibria(d, bias, step) if e[2]]
    k = int(np.clip(np.searchsorted(w, (va - vb) / SQRT2), 0, len(w) - 1))
    # walk away from the written state, toward the side the old state held
    run = diff[k:] if va < bias.vcell / 2 else diff[: k + 1][::-1]
    clear = np.flatnonzero(np.abs(run) > 1e-6)
    if clear.size == 0:
        return 0.0
    run = run * np.sign(run[clear[0]])
    if np.any(run[clear[0]:] < -1e-6):
        return 0.0
    win = max(int(round(MV / wstep)), 1)
    peak = 0
    for i in range(run.size):
        if run[i] >= run[i: i + win + 1].max():
            peak = i
            break
    return float(run[peak:].min()) / SQRT2


def _write_ok(d, vwl, step=GRID_STEP):
    """Monostable at S0 under write bias (A pulled low)."""
    vdd = d.vdd
    bias = BiasCondition.write_s0(vdd, vwl)
    va = grid(vdd, step)
    stable, _ = _crossings(latch_residual(d, bias, va))
    low = va[:-1] < 0.5 * vdd
    return (stable.sum(axis=-1) == 1) & ((stable & low).sum(axis=-1) == 1)


def _retains(d, vwl, vcell, step=GRID_STEP):
    """Both data states survive: a stable point on each side of V_A = V_B."""
    vdd = d.vdd
    bias = BiasCondition(vdd, vcell, vwl, vdd, vdd)
    va = grid(_span(bias), step)
    g, vb = latch_scan(d, bias, va)
    stable, _ = _crossings(g)
    above = va[:-1] > vb[..., :-1]
    return (stable & above).any(axis=-1) & (stable & ~above).any(axis=-1)


def _int_bisect(ok, lo, hi):
    """Vectorized bisection on integers: ``ok(lo)`` true, ``ok(hi)`` false."""
    lo = np.array(lo, dtype=np.int64)
    hi = np.array(hi, dtype=np.int64)
    while np.any(hi - lo > 1):
        mid = (lo + hi) // 2
        good = ok(mid)
        active = hi - lo > 1
        lo = np.where(active & good, mid, lo)
        hi = np.where(active & ~good, mid, hi)
    return lo


def wlvm(d: CellDesign, step: float = GRID_STEP):
    """Largest word-line drop (V, on a 1 mV grid) that still writes S0.

    Write success is DC monostability at the target state. Returns 0 when
    the cell is not writeable even with the full word-line.
    """
    vdd = d.vdd
    n = int(round(vdd / MV))
    shape = _trial_shape(d)

    def ok(mv):
        return _write_ok(d, (n - np.asarray(mv)) * MV, step)

    base = ok(np.zeros(shape, dtype=np.int64))
    full = ok(np.full(shape, n))
    top = np.where(full, n, _int_bisect(ok, np.zeros(shape), np.full(shape, n)))
    out = np.where(base, top, 0) * MV
    return float(out) if out.ndim == 0 else out


def srrv(d: CellDesign, vwl: float | None = None, step: float = GRID_STEP):
    """Supply read retention voltage: vdd minus the lowest retaining Vcell.

    Bisection over Vcell on a 1 mV grid, word-line at ``vwl`` and both
    bit-lines at vdd. Retention means a stable state survives on each side
    of V_A = V_B; two stable points holding the same datum do not count.
    Returns 0 when the cell is read-unstable at vdd.
    """
    vdd = d.vdd
    vwl = vdd if vwl is None else vwl
    n = int(round(vdd / MV))
    shape = _trial_shape(d)

    def bad(mv):
        return ~_retains(d, vwl, np.asarray(mv) * MV, step)

    nominal = ~bad(np.full(shape, n))
    at_zero = ~bad(np.ones(shape, dtype=np.int64))
    lowest = np.where(at_zero, 1, _int_bisect(bad, np.zeros(shape), np.full(shape, n)) + 1)
    out = np.where(nominal, n - lowest, 0) * MV
    return float(out) if out.ndim == 0 else out


def trip_point(d: CellDesign, inverter: str = "A", vcell: float | None = None):
    """Input level where the unloaded inverter's output equals its input."""
    vcell = d.vdd if vcell is None else vcell
    bias = BiasCondition.hold(d.vdd, vcell)

    def f(v):
        return inverter_output(d, inverter, v, bias, loaded=False) - v

    out = solve_decreasing(f, 0.0, vcell, itol=1e-9, vtol=1e-9)
    return float(out) if np.ndim(out) == 0 else out


def v_read(d: CellDesign, bias: BiasCondition | None = None):
    """'0'-node level under read bias with the '1' node clamped at Vcell."""
    bias = BiasCondition.read(d.vdd) if bias is None else bias
    out = inverter_output(d, "B", bias.vcell, bias, loaded=True)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class StabilityReport:
    rsnm: float
    hold_snm: float
    wnm: float
    wlvm: float
    srrv: float
    v_trip: float
    v_read: float

    @property
    def read_unstable(self) -> bool:
        return self.rsnm <= 0.0

    @property
    def write_failure(self) -> bool:
        return self.wnm <= 0.0 or self.wlvm <= 0.0

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def characterize(d: CellDesign, vwl: float | None = None) -> StabilityReport:
    vdd = d.vdd
    vwl = vdd if vwl is None else vwl
    return StabilityReport(
        rsnm=rsnm(d, BiasCondition.read(vdd, vwl)),
        hold_snm=hold_snm(d),
        wnm=wnm(d),
        wlvm=wlvm(d),
        srrv=srrv(d, vwl),
        v_trip=trip_point(d),
        v_read=v_read(d, BiasCondition.read(vdd, vwl)),
    )
