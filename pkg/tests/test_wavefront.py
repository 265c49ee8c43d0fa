import numpy as np
import pytest

from gaborwf.acceptance import expected_ok, sigma_weight
from gaborwf.exceptions import DomainError
from gaborwf.grid import (
    Chirp,
    Const,
    Delta,
    Gaussian,
    GevreyBump,
    PlaneWave,
    SampledSignal,
    UniformGrid,
    sample,
)
from gaborwf.wavefront import (
    ConePartition,
    compare_cone_lattice,
    decay_profile,
    fourier_decay_exponent,
    invariance_check,
    is_schwartz_omega,
    numeric_source,
    wfs_cone,
    wfs_lattice,
    window_independence_check,
    write_estimate_json,
    write_polar_csv,
)
from gaborwf.weights import WeightFunction
from gaborwf.windows import GaussWindow

PHI = GaussWindow()
W05 = WeightFunction.power(0.5)
FREQ_AXIS = (np.pi / 2, 3 * np.pi / 2)
SPACE_AXIS = (0.0, np.pi)
DIAGONAL = (np.pi / 4, 5 * np.pi / 4)


def _circ_dist(k, centre, nb=180):
    d = np.abs(k - centre) % nb
    return np.minimum(d, nb - d)


def test_partition_geometry():
    p = ConePartition()
    assert p.width == pytest.approx(2 * np.pi / 180)
    assert p.centers[45] == pytest.approx(np.pi / 2)
    # every direction lies in at least two overlapping bins
    k = np.arange(180)
    for th in np.linspace(0, 2 * np.pi, 361)[:-1] + 1e-3:
        got = p.bins_containing(th)
        brute = [int(j) for j in k[p.angular_distance(th, k) <= p.half_aperture]]
        assert got == brute and len(got) >= 2
    assert p.bin_distance(1, 179) == 2
    with pytest.raises(DomainError):
        ConePartition(nbins=2)


def test_zero_signal_all_regular():
    z = SampledSignal(UniformGrid.square(1024), np.zeros(1024))
    est = wfs_cone(z, PHI, W05)
    assert est.singular_bins == ()
    assert np.all(est.profile.floored.all(axis=-1) if est.profile.floored.ndim > 1 else est.profile.floored)


def test_chirp_profile_rates():
    est = wfs_cone(Chirp(1.0), PHI, W05)
    rates, status = est.rates, est.profile.status
    k = np.arange(180)
    assert rates[22] < 5 and rates[23] < 5
    far = np.minimum(_circ_dist(k, 22.5), _circ_dist(k, 112.5)) > 3
    assert np.all((rates[far] > 50) | (status[far] != "fitted"))


def test_gaussian_every_bin_regular():
    est = wfs_cone(Gaussian(), PHI, W05)
    assert np.all(est.rates > est.threshold)
    assert est.singular_bins == ()


def test_cone_estimates_closed_form():
    assert expected_ok(wfs_cone(Delta(), PHI, W05).singular_bins, FREQ_AXIS)
    assert expected_ok(wfs_cone(Const(), PHI, W05).singular_bins, SPACE_AXIS)
    assert expected_ok(wfs_cone(Chirp(1.0), PHI, W05).singular_bins, DIAGONAL)


def test_delta_numeric_large_grid():
    f = sample(Delta(), UniformGrid.square(4096), regularize=True)
    assert expected_ok(wfs_cone(f, PHI, W05).singular_bins, FREQ_AXIS)


def test_lattice_matches_cone():
    for u, axis in ((Delta(), FREQ_AXIS), (Chirp(1.0), DIAGONAL)):
        diff, a, b = compare_cone_lattice(u, PHI, (1.0, 1.0), W05)
        assert diff <= 2
        assert expected_ok(b.singular_bins, axis)
    assert compare_cone_lattice(Gaussian(), PHI, (1.0, 1.0), W05)[0] == 0
    z = SampledSignal(UniformGrid.square(1024), np.zeros(1024))
    assert wfs_lattice(z, PHI, (1.0, 1.0), W05).singular_bins == ()


def test_schwartz_classification():
    assert is_schwartz_omega(Gaussian(), PHI, W05)[0]
    assert not is_schwartz_omega(Delta(), PHI, W05)[0]


def test_gevrey_bump_depends_on_weight():
    # |bump^(xi)| ~ exp(-c xi^p) with p = s / (s + 1) = 2/3
    p, c = fourier_decay_exponent(sample(GevreyBump(1.0, 2.0), UniformGrid(1 << 16, 8.0)))
    assert 0.6 < p < 0.7
    f = sample(GevreyBump(1.0, 2.0), UniformGrid.square(4096))
    assert is_schwartz_omega(f, PHI, W05)[0]
    steep = wfs_cone(f, PHI, sigma_weight())
    assert steep.singular_bins and expected_ok(steep.singular_bins, FREQ_AXIS)


def test_fourier_decay_exponent_gaussian():
    p, c = fourier_decay_exponent(sample(Gaussian(), UniformGrid(4096, 40.0)))
    assert p == pytest.approx(2.0, abs=1e-3)
    assert c == pytest.approx(0.5, abs=1e-3)


def test_invariance():
    assert invariance_check(Delta(), PHI, (2.5, 0.0), W05)[0] == 0
    assert invariance_check(Const(), PHI, (0.0, 2.0), W05)[0] == 0
    assert invariance_check(Gaussian(), PHI, (1.0, -3.0), W05)[0] == 0


def test_window_independence():
    psi = GaussWindow(1.5)
    assert window_independence_check(Delta(), PHI, psi, W05)[0] <= 2
    assert window_independence_check(Chirp(1.0), PHI, psi, W05)[0] <= 2
    z = SampledSignal(UniformGrid.square(1024), np.zeros(1024))
    assert window_independence_check(z, PHI, psi, W05)[0] == 0


def test_threads_do_not_change_estimate():
    f = sample(Chirp(0.5), UniformGrid.square(2048))
    a = wfs_cone(f, PHI, W05, threads=1)
    b = wfs_cone(f, PHI, W05, threads=3)
    assert a.singular_bins == b.singular_bins
    assert np.array_equal(a.rates, b.rates)


def test_decay_profile_on_precomputed_source():
    F = numeric_source(sample(Gaussian(), UniformGrid.square(1024)), PHI)
    prof = decay_profile(F, ConePartition(90), W05)
    assert prof.sup_log.shape == (90, 12)
    assert prof.singular_bins(prof.default_threshold()) == ()


def test_writers(tmp_path):
    est = wfs_cone(Delta(), PHI, W05)
    write_estimate_json(est, tmp_path / "e.json")
    write_polar_csv(est, tmp_path / "p.csv")
    rows = (tmp_path / "p.csv").read_text().splitlines()
    assert rows[0] == "angle,rate,singular_flag" and len(rows) == 181
    flagged = [i for i, r in enumerate(rows[1:]) if r.endswith(",1")]
    assert tuple(flagged) == est.singular_bins
