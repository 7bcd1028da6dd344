from dataclasses import replace

import numpy as np
import pytest
from scipy import ndimage

from sram6t import dc
from sram6t.cell import TRANSISTORS, BiasCondition, make_cell
from sram6t.variability import PelgromModel, perturb

VDD = 1.2


def random_design(rng, tech, sigma=0.02):
    d = make_cell(rng.uniform(1, 2.5), rng.uniform(1, 1.5), tech=tech)
    mos = {n: replace(getattr(d, n), Vt0=getattr(d, n).Vt0 + rng.normal(0, sigma))
           for n in TRANSISTORS}
    return d.replace_transistors(**mos)


def random_bias(rng, i):
    return BiasCondition.read(VDD, rng.uniform(0.6, VDD)) if i % 2 else BiasCondition.hold(VDD)


# --- oracles ---------------------------------------------------------------

def raster_squares(bf, vmax, h=0.25e-3):
    """Largest axis-aligned square per lobe, by chessboard distance on a raster.

    A pixel is inside a lobe when it lies on opposite sides of the two
    curves; no rotation or diagonal chords involved.
    """
    (xa, ya), (xb, yb) = bf.xy()
    g = np.arange(0, vmax + h / 2, h)
    above_a = g[:, None] - np.interp(g, xa, ya)[None, :]
    right_b = g[None, :] - np.interp(g, yb, xb)[:, None]
    sides = []
    for mask in ((above_a < 0) & (right_b > 0), (above_a > 0) & (right_b < 0)):
        r = ndimage.distance_transform_cdt(mask, metric="chessboard").max()
        sides.append((2 * r - 1) * h if r else 0.0)
    return sorted(sides)


def grid_equilibria(d, bias, h=1e-3):
    """Equilibria as clusters of grid cells where both KCL residuals change sign."""
    v = dc.grid(bias.vcell, h)
    loaded = bias.vwl > 0
    ia = dc.node_current(d, "A", v[:, None], v[None, :], bias, loaded)
    ib = dc.node_current(d, "B", v[None, :], v[:, None], bias, loaded)

    def change(s):
        c = s[:-1, :-1]
        return (c != s[1:, :-1]) | (c != s[:-1, 1:]) | (c != s[1:, 1:])

    cells = change(np.sign(ia)) & change(np.sign(ib))
    lab, n = ndimage.label(cells, structure=np.ones((3, 3)))
    return [((a + 0.5) * h, (b + 0.5) * h)
            for a, b in ndimage.center_of_mass(cells, lab, range(1, n + 1))]


def _sweep(d, make_bias, levels_mv):
    db = perturb(d, PelgromModel(0.0), z=np.zeros((levels_mv.size, 6)))
    va = dc.grid(VDD)
    g, vb = dc.latch_scan(db, make_bias(levels_mv * dc.MV), va)
    stable, _ = dc._crossings(g)
    return stable, va, vb


def wlvm_sweep(d):
    drops = np.arange(1201)
    stable, va, _ = _sweep(d, lambda v: BiasCondition(VDD, VDD, VDD - v, 0.0, VDD), drops)
    ok = (stable.sum(1) == 1) & ((stable & (va[:-1] < VDD / 2)).sum(1) == 1)
    if not ok[0]:
        return 0.0
    bad = np.flatnonzero(~ok)
    return (bad[0] - 1 if bad.size else 1200) * dc.MV


def srrv_sweep(d, vwl=VDD):
    levels = np.arange(1200, 0, -1)
    stable, va, vb = _sweep(d, lambda v: BiasCondition(VDD, v, vwl, VDD, VDD), levels)
    one = stable & (va[:-1] > vb[:, :-1])
    zero = stable & (va[:-1] < vb[:, :-1])
    ok = one.any(1) & zero.any(1)
    if not ok[0]:
        return 0.0
    bad = np.flatnonzero(~ok)
    lowest = levels[bad[0] - 1] if bad.size else 1
    return (1200 - lowest) * dc.MV


# --- node solves and curves ------------------------------------------------

def test_node_residual_below_1pA(tech):
    rng = np.random.default_rng(11)
    worst = 0.0
    for i in range(100):
        d = random_design(rng, tech, 0.03)
        bias = random_bias(rng, i)
        va = rng.uniform(0, VDD)
        _, vb = dc.solve_node(d, bias, {"A": va})
        worst = max(worst, abs(float(dc.node_current(d, "B", vb, va, bias, bias.vwl > 0))))
    assert worst < 1e-12


def test_solve_node_rejects_unknown_node(cc):
    with pytest.raises(ValueError):
        dc.solve_node(cc, BiasCondition.hold(VDD), {"C": 0.1})


def test_hold_vtc_rails_and_monotone(cc):
    v = dc.vtc(cc, BiasCondition.hold(VDD))
    assert v.mode == "hold"
    assert v.vout[0] == pytest.approx(VDD, abs=1e-4)
    assert v.vout[-1] == pytest.approx(0.0, abs=1e-4)
    assert np.all(np.diff(v.vout) <= 1e-12)


def test_read_vtc_low_level_is_v_read(cc):
    v = dc.vtc(cc, BiasCondition.read(VDD), "B")
    assert v.mode == "read"
    assert v.vout[-1] == pytest.approx(dc.v_read(cc), abs=1e-9)
    assert 0 < dc.v_read(cc) < dc.trip_point(cc)


def test_butterfly_mirror_symmetry(cc):
    bf = dc.butterfly(cc, BiasCondition.read(VDD))
    np.testing.assert_allclose(bf.a.vout, bf.b.vout, atol=1e-12)


def test_vtc_csv_roundtrip(tmp_path, msc):
    v = dc.vtc(msc, BiasCondition.hold(VDD))
    v.to_csv(tmp_path / "v.csv")
    back = np.loadtxt(tmp_path / "v.csv", delimiter=",", skiprows=1)
    np.testing.assert_allclose(back[:, 1], v.vout, rtol=1e-8, atol=1e-12)


# --- equilibria --------------------------------------------------------------

def test_equilibria_match_grid_sign_oracle(tech):
    rng = np.random.default_rng(3)
    for i in range(10):
        d = random_design(rng, tech, 0.05 if i >= 8 else 0.02)
        bias = random_bias(rng, i)
        eq = dc.equilibria(d, bias)
        ref = grid_equilibria(d, bias)
        assert len(eq) == len(ref)
        for (a, b, _), (ra, rb) in zip(eq, sorted(ref)):
            assert abs(a - ra) < 2e-3 and abs(b - rb) < 2e-3
        n_stable = sum(s for *_, s in eq)
        assert n_stable == (len(eq) + 1) // 2


def test_hold_is_bistable_and_symmetric(cc):
    eq = dc.equilibria(cc, BiasCondition.hold(VDD))
    assert [s for *_, s in eq] == [True, False, True]
    va, vb, _ = eq[1]
    assert va == pytest.approx(vb, abs=1e-6)


def test_stable_state_count_monostable_write(cc):
    assert dc.stable_state_count(cc, BiasCondition.write_s0(VDD)) == 1
    (va, vb), = dc.stable_states(cc, BiasCondition.write_s0(VDD))
    assert va < VDD / 2 < vb


# --- static noise margins ------------------------------------------------------

def test_rsnm_matches_raster_square_oracle(tech):
    rng = np.random.default_rng(7)
    for i in range(20):
        d = random_design(rng, tech)
        bias = random_bias(rng, i)
        snm, sides, bf = dc.snm_report(d, bias)
        if snm == 0.0:
            continue
        ref = raster_squares(bf, bias.vcell)
        np.testing.assert_allclose(sorted(sides), ref, atol=1e-3)


def test_rsnm_at_zero_wordline_equals_hold(cc, msc):
    for d in (cc, msc):
        assert dc.rsnm(d, BiasCondition.read(VDD, 0.0)) == dc.hold_snm(d)


def test_symmetric_cell_has_equal_lobes(cc):
    _, (a, b), _ = dc.snm_report(cc, BiasCondition.read(VDD))
    assert a == pytest.approx(b, abs=2e-3)


def test_rsnm_decreases_with_wordline(msc):
    levels = np.linspace(0.0, VDD, 7)
    vals = [dc.rsnm(msc, BiasCondition.read(VDD, v)) for v in levels]
    assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))


def test_rsnm_increases_with_cr(tech):
    vals = [dc.rsnm(make_cell(cr, 1, tech=tech)) for cr in (1, 1.5, 2, 2.5)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_hold_snm_exceeds_rsnm(msc):
    assert dc.hold_snm(msc) > dc.rsnm(msc)


def test_monostable_read_gives_zero(tech):
    d = make_cell(1, 1, tech=tech)
    weak = d.replace_transistors(n_b=replace(d.n_b, Vt0=d.n_b.Vt0 + 0.45))
    assert dc.stable_state_count(weak, BiasCondition.read(VDD)) == 1
    assert dc.rsnm(weak) == 0.0


# --- write margins -------------------------------------------------------------

def test_wnm_positive_and_ordered(msc, cc):
    assert dc.wnm(msc) > dc.wnm(cc) > 0


def test_wnm_zero_without_wordline(cc):
    assert dc.wnm(cc, BiasCondition.write_s0(VDD, 0.0)) == 0.0


def test_wnm_bounded_by_wordline(cc):
    assert dc.wnm(cc) <= VDD / 2


@pytest.mark.xfail(strict=True, reason="write margin falls about 40% from CR 1 to 2.5 in this "
                   "device model; see the decision ledger")
def test_wnm_weakly_dependent_on_cr(tech):
    vals = [dc.wnm(make_cell(cr, 1, tech=tech)) for cr in (1, 1.5, 2, 2.5)]
    assert (max(vals) - min(vals)) / max(vals) < 0.15


def test_wlvm_matches_linear_sweep(tech):
    rng = np.random.default_rng(5)
    for _ in range(10):
        d = random_design(rng, tech)
        assert dc.wlvm(d) == pytest.approx(wlvm_sweep(d), abs=1e-12)


def test_wlvm_boundary_is_monostability(tech):
    rng = np.random.default_rng(8)
    for _ in range(10):
        d = random_design(rng, tech)
        w = dc.wlvm(d)
        if w == 0.0 or w >= VDD:
            continue
        below = BiasCondition.write_s0(VDD, VDD - (w - 0.01))
        above = BiasCondition.write_s0(VDD, VDD - (w + 0.002))
        assert dc.stable_state_count(d, below) == 1
        assert not dc._write_ok(d, above.vwl)


def test_wlvm_larger_for_smaller_cr(msc, cc):
    assert dc.wlvm(msc) > dc.wlvm(cc) > 0


def test_wlvm_nominal(msc):
    assert dc.wlvm(msc) == pytest.approx(0.405, rel=0.25)


def test_srrv_matches_linear_sweep(tech):
    rng = np.random.default_rng(6)
    for i in range(10):
        d = random_design(rng, tech)
        vwl = 1.0 if i % 2 else VDD
        assert dc.srrv(d, vwl) == pytest.approx(srrv_sweep(d, vwl), abs=1e-12)


def test_srrv_nominal(msc):
    assert dc.srrv(msc) == pytest.approx(0.3098, rel=0.25)


def test_srrv_zero_when_read_unstable(tech):
    d = make_cell(1, 1, tech=tech)
    weak = d.replace_transistors(n_b=replace(d.n_b, Vt0=d.n_b.Vt0 + 0.45))
    assert dc.srrv(weak) == 0.0


def test_read_flip_condition(tech):
    """V_READ above the opposite trip point always means a destructive read.

    The converse is not exact: the '1' node droops under read, so the cell
    upsets a little before the clamped V_READ reaches the trip point.
    """
    d = make_cell(1, 1, tech=tech)
    seen = set()
    for shift in np.linspace(0.0, 0.8, 17):
        w = d.replace_transistors(n_b=replace(d.n_b, Vt0=d.n_b.Vt0 + shift))
        unstable = dc.stable_state_count(w, BiasCondition.read(VDD)) < 2
        if dc.v_read(w) > dc.trip_point(w, "A"):
            assert unstable
            seen.add("above")
        elif dc.v_read(w) < dc.trip_point(w, "A") - 0.2:
            assert not unstable
            seen.add("below")
    assert seen == {"above", "below"}


def test_trip_point_symmetric(cc):
    assert dc.trip_point(cc, "A") == pytest.approx(dc.trip_point(cc, "B"), abs=1e-9)


def test_characterize_report(msc):
    r = dc.characterize(msc)
    assert not r.read_unstable and not r.write_failure
    assert set(r.as_dict()) == {"rsnm", "hold_snm", "wnm", "wlvm", "srrv", "v_trip", "v_read"}


def test_batched_metrics_match_scalar(msc, tech):
    rng = np.random.default_rng(2)
    z = rng.standard_normal((3, 6))
    m = PelgromModel(tech.a_vt)
    db = perturb(msc, m, z=z)
    for f in (dc.wlvm, dc.srrv):
        batch = f(db)
        single = [f(perturb(msc, m, z=row)) for row in z]
        np.testing.assert_array_equal(batch, single)
