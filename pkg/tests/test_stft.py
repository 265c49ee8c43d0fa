import numpy as np
import pytest

from gaborwf.acceptance import chirp_modulus_error
from gaborwf.exceptions import ConditioningError
from gaborwf.grid import Const, Delta, Gaussian, SampledSignal, UniformGrid, sample
from gaborwf.stft import (
    AnalyticStft,
    PhasePoint,
    invert,
    phase_shift,
    read_stft_binary,
    stft,
    stft_adjoint,
    stft_at,
    stft_fourier_identity_check,
    window_change_bound_check,
    write_heatmap,
    write_stft_binary,
    write_stft_csv,
)
from gaborwf.windows import GaussWindow

PHI = GaussWindow(1.0)
G = UniformGrid(512, 16.0)


def _gauss_gauss(x, xi):
    # |V_phi phi| for phi = exp(-y^2/2): direct Gaussian integral
    return np.sqrt(np.pi) * np.exp(-(x**2 + xi**2) / 4)


def test_phase_shift_identities():
    phi = PHI.sample(G)
    same = phase_shift(phi, PhasePoint(0.0, 0.0))
    assert np.array_equal(same.values, phi.values)
    moved = phase_shift(phi, PhasePoint(2.0, 1.3))
    plain = phase_shift(phi, PhasePoint(2.0, 0.0))
    assert np.allclose(np.abs(moved.values), np.abs(plain.values), atol=1e-15)
    back = phase_shift(phase_shift(phi, PhasePoint(2.0, 0.0)), PhasePoint(-2.0, 0.0))
    assert np.max(np.abs(back.values - phi.values)) < 1e-14


def test_delta_modulus_is_window_at_origin():
    xi = np.linspace(-30, 30, 13)
    V = AnalyticStft(Delta(), PHI).values(np.zeros(1)[:, None], xi[None, :])
    assert np.allclose(np.abs(V), 1.0, atol=1e-15)


def test_const_modulus_independent_of_shift():
    x = np.array([-5.0, 0.0, 7.0])
    xi = np.linspace(-4, 4, 9)
    V = AnalyticStft(Const(), PHI).values(x[:, None], xi[None, :])
    ref = np.sqrt(2 * np.pi) * np.exp(-xi**2 / 2)
    assert np.allclose(np.abs(V), ref[None, :], rtol=1e-13)


def test_gaussian_closed_form_both_paths():
    x = np.linspace(-6, 6, 7)
    xi = np.linspace(-5, 5, 11)
    exact = _gauss_gauss(x[:, None], xi[None, :])
    va = np.abs(stft_at(Gaussian(), PHI, x, xi))
    vn = np.abs(stft_at(Gaussian(), PHI, x, xi, grid=G))
    assert np.max(np.abs(va - exact)) < 1e-13
    assert np.max(np.abs(vn - exact)) < 1e-8
    F = stft(sample(Gaussian(), G), PHI, method="numeric")
    X, XI = np.meshgrid(F.shifts, F.freqs, indexing="ij")
    assert np.max(np.abs(np.abs(F.values) - _gauss_gauss(X, XI))) < 1e-8


def test_chirp_modulus_shape():
    for c in (0.5, 1.0):
        err, C = chirp_modulus_error(c)
        assert err < 1e-8
        # fitted amplitude against sqrt(2 pi) (1 + c^2)^(-1/4)
        assert C == pytest.approx(np.sqrt(2 * np.pi) / (1 + c * c) ** 0.25, rel=1e-8)


def test_threads_do_not_change_values():
    f = sample(Gaussian(0.5, 0.8), G)
    a = stft(f, PHI, method="numeric", threads=1).values
    b = stft(f, PHI, method="numeric", threads=4).values
    assert np.array_equal(a, b)


def test_adjoint_of_zero_and_inversion():
    f = sample(Gaussian(1.0, 1.2), G)
    F = stft(f, PHI, method="numeric")
    z = stft_adjoint(F.with_values(np.zeros_like(F.values)))
    assert np.all(z.values == 0)
    rec = invert(F)
    assert np.linalg.norm(rec.values - f.values) / np.linalg.norm(f.values) < 1e-8


def test_two_window_inversion():
    f = sample(Gaussian(-1.0, 0.9), G)
    psi, gam = GaussWindow(1.0), GaussWindow(1.5, 0.3)
    rec = invert(stft(f, psi, method="numeric"), psi, gam)
    assert np.linalg.norm(rec.values - f.values) / np.linalg.norm(f.values) < 1e-8


def test_orthogonal_windows_rejected():
    f = sample(Gaussian(), G)
    with pytest.raises(ConditioningError):
        invert(stft(f, PHI, method="numeric"), PHI, GaussWindow(1.0, 0.0, 12.0))


def test_fourier_identity():
    f = sample(Gaussian(), G)
    dev = stft_fourier_identity_check(f, PHI)
    assert dev <= 1e-6
    zero = SampledSignal(G, np.zeros(G.n))
    assert stft_fourier_identity_check(zero, PHI) == 0.0
    rot = f * np.exp(0.7j)
    assert stft_fourier_identity_check(rot, PHI) == pytest.approx(dev, abs=1e-12)


def test_window_change_bound():
    f = sample(Gaussian(), G)
    assert window_change_bound_check(f, PHI, PHI, PHI)["passed"]
    shifted = window_change_bound_check(f, PHI, GaussWindow(1.0, 0.5), GaussWindow(1.2, -0.3))
    assert shifted["passed"]
    zero = window_change_bound_check(SampledSignal(G, np.zeros(G.n)), PHI, PHI, PHI)
    assert zero["passed"] and np.all(zero["lhs"] == 0) and np.all(zero["rhs"] == 0)


def test_io(tmp_path):
    g = UniformGrid(64, 6.0)
    F = stft(sample(Gaussian(), g), PHI, method="numeric")
    write_stft_binary(F, tmp_path / "a.bin")
    shifts, freqs, values = read_stft_binary(tmp_path / "a.bin")
    assert np.array_equal(values, F.values) and np.array_equal(freqs, F.freqs)
    assert np.array_equal(shifts, F.shifts)
    write_stft_csv(F, tmp_path / "a.csv", log_modulus=True)
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "x,xi,log_modulus" and len(lines) == F.values.size + 1
    write_heatmap(F.with_values(np.zeros_like(F.values)), tmp_path / "z.pgm")
    raw = (tmp_path / "z.pgm").read_bytes()
    assert raw.startswith(b"P5") and set(raw.split(b"255\n", 1)[1]) == {0}
