import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from gaborwf.estimators import GaborFrameTransformer, STFTTransformer, WaveFrontSetEstimator
from gaborwf.exceptions import DomainError
from gaborwf.grid import Chirp, Delta, Gaussian, UniformGrid, sample
from gaborwf.stft import stft
from gaborwf.windows import GaussWindow


def _rows(grid, *specs, regularize=False):
    return np.stack([sample(s, grid, regularize=regularize).values for s in specs])


def test_stft_transformer_matches_function():
    est = STFTTransformer(grid_n=128, hop=4, output="complex")
    g = UniformGrid.square(128)
    X = _rows(g, Gaussian(), Chirp(0.5))
    Z = est.fit_transform(X)
    ref = stft(sample(Chirp(0.5), g), GaussWindow(), method="numeric", hop=4).values.ravel()
    assert np.array_equal(Z[1], ref)
    assert Z.shape == (2, est.shifts_.size * est.freqs_.size)


def test_stft_transformer_validation_and_clone():
    est = STFTTransformer(grid_n=64)
    with pytest.raises(NotFittedError):
        est.transform(np.zeros((1, 64)))
    est.fit(np.zeros((1, 64)))
    with pytest.raises(DomainError):
        est.transform(np.zeros((1, 32)))
    c = clone(est)
    assert c.get_params() == est.get_params()
    # log features of a zero row sit at the floor, not at -inf
    assert np.all(np.isfinite(est.transform(np.zeros((1, 64)))))


def test_gabor_frame_round_trip():
    gf = GaborFrameTransformer(grid_n=512, half_extent=16.0, a0=1.0, b0=1.0).fit()
    g = UniformGrid(512, 16.0)
    X = _rows(g, Gaussian(0.5, 1.0), Gaussian(-1.0, 0.8))
    back = gf.inverse_transform(gf.transform(X))
    inner = np.abs(g.points) <= 8
    assert np.max(np.abs(back - X)[:, inner]) < 1e-8
    assert gf.bounds_.A > 0


def test_wavefront_estimator_delta():
    est = WaveFrontSetEstimator(grid_n=4096).fit()
    g = UniformGrid.square(4096)
    X = _rows(g, Delta(), Gaussian(), regularize=True)
    P = est.predict(X)
    assert P.shape == (2, 180)
    assert not P[1].any()
    on = set(np.nonzero(P[0])[0])
    assert {44, 45, 46, 134, 135, 136} <= on
    D = est.decision_function(X)
    assert np.array_equal(D < 0, P)


def test_pipeline_composition():
    pipe = make_pipeline(STFTTransformer(grid_n=64, hop=8, output="abs"))
    out = pipe.fit_transform(_rows(UniformGrid.square(64), Gaussian()))
    assert out.shape[0] == 1 and np.all(out >= 0)
