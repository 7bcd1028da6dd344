import math

import mpmath as mp
import numpy as np
import pytest

from sram6t import dc
from sram6t.cell import TRANSISTORS
from sram6t.variability import (METRICS, Distribution, McConfig, PelgromModel,
                                gaussian_fail_prob, monte_carlo, perturb, split,
                                trial_normals)

mp.mp.dps = 40


# --- Gaussian tails --------------------------------------------------------------

@pytest.mark.parametrize("z", [0.0, 1.0, 3.0, 6.0, 9.5, 15.0, 30.0])
def test_tail_matches_mpmath(z):
    want = float(mp.ncdf(-z))
    assert gaussian_fail_prob(z, 1.0) == pytest.approx(want, rel=1e-12)


@pytest.mark.parametrize("mean,std,want", [
    (309.8, 51.6, 1.00e-9), (189.8, 51.6, 1.19e-4),
    (451.4, 47.8, 1.893e-21), (331.4, 47.8, 2.1e-12)])
def test_tail_anchors(mean, std, want):
    assert gaussian_fail_prob(mean, std) == pytest.approx(want, rel=0.15)


def test_tail_symmetry():
    for m, s, t in ((0.3, 0.05, 0.1), (-1.0, 2.0, 0.5), (0.0, 1.0, 0.0)):
        assert gaussian_fail_prob(m, s, t) + gaussian_fail_prob(-m, s, -t) == pytest.approx(1.0)


def test_tail_vectorized_and_validated():
    out = gaussian_fail_prob(np.array([0.0, 1.0]), 1.0)
    assert out.shape == (2,) and out[0] == 0.5
    with pytest.raises(ValueError):
        gaussian_fail_prob(0.3, 0.0)


# --- mismatch sampling --------------------------------------------------------------

def test_pelgrom_scaling():
    m = PelgromModel(3.0)
    assert m.sigma_vt(0.12, 0.065) == pytest.approx(3e-3 / math.sqrt(0.12 * 0.065), rel=1e-15)
    assert m.sigma_vt(0.48, 0.065) == pytest.approx(m.sigma_vt(0.12, 0.065) / 2, rel=1e-14)
    with pytest.raises(ValueError):
        PelgromModel(-1.0)


def test_pelgrom_sample_sigma(msc, tech):
    m = PelgromModel(tech.a_vt)
    z = trial_normals(9, range(100_000))
    db = perturb(msc, m, z=z)
    for name in TRANSISTORS:
        p0, p = getattr(msc, name), getattr(db, name)
        shift = np.asarray(p.Vt0).ravel() - p0.Vt0
        assert np.std(shift) == pytest.approx(m.sigma_vt(p0.W, p0.L), rel=0.01)
        assert abs(np.mean(shift)) < 4 * m.sigma_vt(p0.W, p0.L) / math.sqrt(z.shape[0])
    # the six devices draw independent shifts
    c = np.corrcoef(z.T)
    assert np.max(np.abs(c - np.eye(6))) < 0.02


def test_trial_stream_independent_of_batch():
    full = trial_normals(42, range(20))
    assert np.array_equal(trial_normals(42, [7]), full[7:8])
    assert not np.array_equal(trial_normals(43, [7]), full[7:8])


def test_split_recovers_trial(msc, tech):
    z = trial_normals(1, range(4))
    m = PelgromModel(tech.a_vt)
    assert split(perturb(msc, m, z=z), 2) == perturb(msc, m, z=z[2])


# --- Monte Carlo driver --------------------------------------------------------------

def test_thread_count_bit_identical(msc, tech):
    m = PelgromModel(tech.a_vt)
    for metric in ("v_trip", "wlvm"):
        one = monte_carlo(msc, m, McConfig(150, 5, metric, threads=1, chunk=32))
        four = monte_carlo(msc, m, McConfig(150, 5, metric, threads=4, chunk=32))
        assert one == four


def test_chunking_does_not_change_values(msc, tech):
    m = PelgromModel(tech.a_vt)
    a = monte_carlo(msc, m, McConfig(200, 3, "v_read", chunk=200))
    b = monte_carlo(msc, m, McConfig(200, 3, "v_read", chunk=17))
    assert a == b


def test_batched_matches_per_trial(msc, tech):
    m = PelgromModel(tech.a_vt)
    z = trial_normals(8, range(6))
    dist = monte_carlo(msc, m, McConfig(6, 8, "srrv"))
    single = [dc.srrv(perturb(msc, m, z=row)) for row in z]
    np.testing.assert_array_equal(dist.values, single)


def test_scalar_metric_path(msc, tech):
    dist = monte_carlo(msc, PelgromModel(tech.a_vt), McConfig(4, 2, "rsnm"))
    assert dist.n == 4 and 0 < dist.mean < dc.hold_snm(msc)


def test_censored_trials(msc):
    calls = iter(range(100))

    def flaky(d):
        if next(calls) % 3 == 0:
            raise dc.SolverError("no convergence")
        return 1.0

    dist = monte_carlo(msc, PelgromModel(1.0), McConfig(9, 0), metric=flaky)
    assert dist.censored == 3 and dist.n == 6
    assert dist.unreliable
    assert dist.counts.sum() == dist.n
    assert dist.mean == 1.0


def test_distribution_stats():
    d = Distribution.from_values([1.0, 2.0, 3.0, np.nan], bins=3)
    assert (d.trials, d.n, d.censored) == (4, 3, 1)
    assert d.mean == 2.0 and d.std == 1.0 and d.min == 1.0 and d.max == 3.0
    assert d.fail_prob(2.0) == pytest.approx(0.5)
    assert list(d.counts) == [1, 1, 1]


def test_zero_mismatch_gives_nominal(msc):
    dist = monte_carlo(msc, PelgromModel(0.0), McConfig(3, 1, "v_trip"))
    np.testing.assert_allclose(dist.values, dc.trip_point(msc), rtol=1e-12)


def test_unknown_metric(msc):
    with pytest.raises(KeyError):
        monte_carlo(msc, PelgromModel(1.0), McConfig(2, 0, "bogus"))
    assert "v_trip" in METRICS and "write_delay" in METRICS


@pytest.mark.parametrize("kw", [{"trials": 0}, {"seed": -1}, {"threads": 0}, {"chunk": 0}])
def test_config_validation(kw):
    base = {"trials": 10, "seed": 1}
    base.update(kw)
    with pytest.raises(ValueError):
        McConfig(**base)
