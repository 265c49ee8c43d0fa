import numpy as np
import pytest

from gaborwf.exceptions import AliasingError, ConfigError, DomainError, NotSampleableError
from gaborwf.grid import (
    Chirp,
    Const,
    Delta,
    Gaussian,
    GevreyBump,
    PlaneWave,
    SampledSignal,
    UniformGrid,
    distribution_from_dict,
    fourier,
    inverse_fourier,
    read_signal_binary,
    read_signal_csv,
    sample,
    write_signal_binary,
    write_signal_csv,
)


def test_grid_basics():
    g = UniformGrid(1024, 20.0)
    assert g.dx == pytest.approx(40.0 / 1024)
    assert g.points[g.n // 2] == 0.0
    sq = UniformGrid.square(1024)
    assert sq.half_extent == pytest.approx(np.sqrt(np.pi * 1024 / 2))
    # on the square grid the frequency and space axes coincide
    assert sq.nyquist == pytest.approx(sq.half_extent)
    with pytest.raises(DomainError):
        UniformGrid(1000, 10.0)
    with pytest.raises(DomainError):
        UniformGrid(64, -1.0)


def test_sample_point_values():
    g = UniformGrid(256, 10.0)
    i0 = g.n // 2
    assert sample(Gaussian(0.0, 1.0), g).values[i0] == pytest.approx(1.0)
    assert sample(Chirp(1.0), g).values[i0] == pytest.approx(1.0)
    assert np.all(sample(Const(), g).values == 1.0)


def test_delta_needs_regularization():
    g = UniformGrid(64, 4.0)
    with pytest.raises(NotSampleableError):
        sample(Delta(), g)
    f = sample(Delta(), g, regularize=True)
    # unit mass on the grid
    assert np.sum(f.values) * g.dx == pytest.approx(1.0)


def test_aliasing_guard():
    g = UniformGrid(64, 10.0)
    with pytest.raises(AliasingError):
        sample(Chirp(2.0), g)
    with pytest.raises(AliasingError):
        sample(PlaneWave(100.0), g)


def test_fourier_gaussian_closed_form():
    # int exp(-x^2/2) exp(-i x xi) dx = sqrt(2 pi) exp(-xi^2/2)
    g = UniformGrid(1024, 20.0)
    F = fourier(sample(Gaussian(0.0, 1.0), g))
    xi = g.frequencies
    j0 = int(np.argmin(np.abs(xi)))
    j1 = int(np.argmin(np.abs(xi - 1.0)))
    assert F.values[j0] == pytest.approx(np.sqrt(2 * np.pi), abs=1e-10)
    assert xi[j1] == pytest.approx(1.0, abs=g.dxi / 2)
    assert abs(F.values[j1] - np.sqrt(2 * np.pi) * np.exp(-xi[j1] ** 2 / 2)) < 1e-10
    assert np.max(np.abs(F.values - np.sqrt(2 * np.pi) * np.exp(-xi**2 / 2))) < 1e-10


def test_fourier_round_trip():
    g = UniformGrid(512, 16.0)
    rng = np.random.default_rng(0)
    f = SampledSignal(g, rng.normal(size=g.n) + 1j * rng.normal(size=g.n))
    back = inverse_fourier(fourier(f), g)
    assert np.linalg.norm(back.values - f.values) / np.linalg.norm(f.values) < 1e-12


def test_fourier_2d_separable():
    g = UniformGrid(64, 8.0, d=2)
    X = g.mesh()
    f = SampledSignal(g, np.exp(-np.sum(X**2, axis=-1) / 2))
    F = fourier(f)
    assert F.values.shape == (64, 64)
    assert F.values[32, 32] == pytest.approx(2 * np.pi, abs=1e-10)


def test_gevrey_bump_support():
    b = GevreyBump(1.0, 2.0)
    x = np.array([-1.5, -1.0, 0.0, 0.5, 1.0, 2.0])
    v = b.evaluate(x)
    assert np.all(v[[0, 1, 4, 5]] == 0)
    assert v[2] == pytest.approx(np.exp(-1.0))
    assert v[3] == pytest.approx(np.exp(-(0.75 ** -2.0)))


def test_signal_io_round_trip(tmp_path):
    g = UniformGrid(64, 5.0)
    f = sample(Chirp(0.5), g)
    write_signal_csv(f, tmp_path / "f.csv")
    h = read_signal_csv(tmp_path / "f.csv")
    assert h.grid == g
    assert np.array_equal(h.values, f.values)
    write_signal_binary(f, tmp_path / "f.bin")
    assert np.array_equal(read_signal_binary(tmp_path / "f.bin").values, f.values)


def test_distribution_from_dict():
    assert distribution_from_dict({"kind": "chirp", "c": 2.0}) == Chirp(2.0)
    with pytest.raises(ConfigError) as exc:
        distribution_from_dict({"kind": "planewave"})
    assert exc.value.field == "input.xi"
    with pytest.raises(ConfigError):
        distribution_from_dict({"kind": "nope"})
