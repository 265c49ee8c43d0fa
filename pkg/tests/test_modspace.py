import numpy as np
import pytest
from numpy.polynomial import hermite_e

from gaborwf.exceptions import ConfigError
from gaborwf.frames import Lattice, LatticeCoeffs
from gaborwf.grid import Gaussian, SampledSignal, UniformGrid, sample
from gaborwf.modspace import (
    MixedNormSpec,
    PhaseSamples,
    amalgam_norm,
    holder_check,
    lpq_norm,
    lpq_seq_norm,
    modulation_norm,
    restriction_constant,
    seminorm_q,
    seminorm_stft,
    window_equivalence,
    young_check,
)
from gaborwf.weights import WeightFunction
from gaborwf.windows import GaussWindow

W05 = WeightFunction.power(0.5)
# 2 pi int_0^inf r exp(-r^2 + sqrt(r)) dr by adaptive quadrature (scipy quad, abs err 1e-13)
L1_GAUSS_ORACLE = 8.029987730750957


def _gauss_samples(h, R=5.5):
    x = np.arange(-R, R + h / 2, h)
    return PhaseSamples.from_function(lambda X, XI: np.exp(-(X**2 + XI**2)), x, x)


def test_zero_norms():
    spec = MixedNormSpec.make(2, 2, 1.0)
    x = np.linspace(-2, 2, 9)
    z = PhaseSamples(x, x, np.zeros((9, 9)))
    assert lpq_norm(z, spec) == 0.0
    assert amalgam_norm(PhaseSamples(x, x, np.zeros((9, 9))), spec) == 0.0
    lat = Lattice(1.0, 1.0, 2, 2)
    assert lpq_seq_norm(LatticeCoeffs(lat, np.zeros(lat.shape)), spec) == 0.0


def test_unweighted_limit():
    x = np.linspace(-6, 6, 241)
    ps = PhaseSamples.from_function(lambda X, XI: np.exp(-(X**2 + 2 * XI**2) / 2), x, x)
    h = x[1] - x[0]
    plain = np.sqrt(np.sum(np.abs(ps.values) ** 2) * h * h)
    val = lpq_norm(ps, MixedNormSpec.make(2, 2, 1e-9))
    assert val == pytest.approx(plain, rel=1e-6)


def test_weighted_l1_against_quadrature():
    # |z|^(1/2) is not smooth at the origin, so the Riemann sum converges like h^2.5
    spec = MixedNormSpec.make(1, 1, 1.0)
    e1 = abs(lpq_norm(_gauss_samples(0.01), spec) - L1_GAUSS_ORACLE)
    e2 = abs(lpq_norm(_gauss_samples(0.005), spec) - L1_GAUSS_ORACLE)
    assert e2 / L1_GAUSS_ORACLE < 2e-7
    assert np.log2(e1 / e2) > 2.4


def test_sequence_norm_single_entry_and_sup():
    lat = Lattice(0.5, 0.5, 3, 3)
    c = np.zeros(lat.shape, dtype=complex)
    c[3, 3] = 1.0
    spec = MixedNormSpec.make(1, 2, 1.5)
    assert lpq_seq_norm(LatticeCoeffs(lat, c), spec) == pytest.approx(1.0)
    rng = np.random.default_rng(1)
    c = rng.normal(size=lat.shape)
    sup = MixedNormSpec.make(np.inf, np.inf, 0.7)
    k, n = np.meshgrid(0.5 * lat.k, 0.5 * lat.n, indexing="ij")
    ref = np.max(np.abs(c) * np.exp(0.7 * np.hypot(k, n) ** 0.5))
    assert lpq_seq_norm(LatticeCoeffs(lat, c), sup) == pytest.approx(ref, rel=1e-13)


def test_amalgam_single_cell():
    x = np.arange(-3, 3, 0.25)
    v = np.zeros((x.size, x.size))
    i = np.nonzero((x >= 1) & (x < 2))[0]
    j = np.nonzero((x >= -2) & (x < -1))[0]
    v[np.ix_(i, j)] = 0.5
    v[i[1], j[2]] = 1.0
    spec = MixedNormSpec.make(1, 1, 1.0)
    ref = np.exp(np.hypot(1.0, -2.0) ** 0.5)
    assert amalgam_norm(PhaseSamples(x, x, v), spec) == pytest.approx(ref, rel=1e-13)


def test_restriction_bounded_by_amalgam():
    x = np.arange(-6, 6 + 1e-9, 0.125)
    ps = PhaseSamples.from_function(lambda X, XI: np.exp(-((X - 0.3) ** 2 + XI**2) / 3), x, x)
    assert restriction_constant(ps, MixedNormSpec.make(2, 1, 0.5)) <= 1.0 + 1e-12


def test_young_and_holder():
    x = np.linspace(-8, 8, 129)
    F = PhaseSamples.from_function(lambda X, XI: np.exp(-(X**2 + XI**2)), x, x)
    G = PhaseSamples.from_function(lambda X, XI: np.exp(-((X - 1) ** 2 + XI**2) / 2), x, x)
    spec = MixedNormSpec.make(2, 2, 0.5)
    assert young_check(F, G, spec)["passed"]
    zero = young_check(F, PhaseSamples(x, x, np.zeros((129, 129))), spec)
    assert zero["lhs"] == 0.0 and zero["rhs"] == 0.0
    assert holder_check(F, G, spec)["passed"]
    with pytest.raises(ConfigError):
        MixedNormSpec.make(0.5, 2, 1.0)


def test_young_point_mass():
    # a single-cell mass of one reproduces F times the cell volume
    x = np.linspace(-4, 4, 65)
    h = x[1] - x[0]
    F = PhaseSamples.from_function(lambda X, XI: np.exp(-(X**2 + XI**2)), x, x)
    d = np.zeros((65, 65))
    d[32, 32] = 1.0
    res = young_check(F, PhaseSamples(x, x, d), MixedNormSpec.make(2, 2, 0.5))
    conv = res["convolution"]
    # the full convolution starts at x = -8; the spike sits at x = 0
    assert conv.x[32] == pytest.approx(-4.0)
    assert np.allclose(conv.values[32:97, 32:97], F.values * h * h, atol=1e-15)
    assert res["passed"]


def _seminorm_oracle(x, lam, mu, K):
    # Hermite closed form f^(k) = (-1)^k He_k(x) exp(-x^2/2) and
    # phi*(s) = 2 s log(2 s) - 2 s for s >= 1/2, -1 below
    best = -np.inf
    for k in range(K + 1):
        dk = np.abs(hermite_e.hermeval(x, [0] * k + [1])) * np.exp(-x * x / 2)
        s = k / lam
        conj = 2 * s * np.log(2 * s) - 2 * s if s >= 0.5 else -1.0
        with np.errstate(divide="ignore"):
            v = np.log(dk) - lam * conj + mu * np.sqrt(np.abs(x))
        best = max(best, float(np.max(v)))
    return np.exp(best)


def test_seminorm_q_against_hermite_oracle():
    g = UniformGrid(512, 16.0)
    f = sample(Gaussian(), g)
    ref = _seminorm_oracle(g.points, 1.0, 1.0, 8)
    assert seminorm_q(f, 1.0, 1.0, W05, 8) == pytest.approx(ref, rel=1e-4)
    assert seminorm_q(SampledSignal(g, np.zeros(g.n)), 1.0, 1.0, W05, 4) == 0.0
    vals = [seminorm_q(f, 1.0, mu, W05, 6) for mu in (0.0, 0.5, 1.0, 2.0)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_seminorm_stft_closed_form():
    g = UniformGrid(256, 12.0)
    f = GaussWindow().sample(g)
    from gaborwf.stft import stft

    V = stft(f, GaussWindow(), method="numeric")
    X, XI = np.meshgrid(V.shifts, V.freqs, indexing="ij")
    R = np.hypot(X, XI)
    ref = np.max(np.sqrt(np.pi) * np.exp(-R**2 / 4) * np.exp(np.sqrt(R)))
    val = seminorm_stft(f, GaussWindow(), 1.0, W05)
    assert val == pytest.approx(ref, rel=1e-8)
    assert seminorm_stft(f * 2.0, GaussWindow(), 1.0, W05) == pytest.approx(2 * val, rel=1e-13)
    assert seminorm_stft(SampledSignal(g, np.zeros(g.n)), GaussWindow(), 1.0, W05) == 0.0


def test_modulation_norms():
    g = UniformGrid(256, 12.0)
    f = sample(Gaussian(0.5, 1.1), g)
    assert modulation_norm(SampledSignal(g, np.zeros(g.n)), 2, 2, 1.0, GaussWindow()) == 0.0
    big = modulation_norm(f, np.inf, np.inf, 8.0, GaussWindow())
    assert np.isfinite(big) and big > 0
    eq = window_equivalence(f, GaussWindow(1.0), GaussWindow(1.5), 2, 2, 1.0)
    assert eq["passed"]
