"""scikit-learn style wrappers around the STFT, Gabor frames and WF estimation.

Each estimator treats a row of ``X`` as one signal sampled on the grid
``UniformGrid(grid_n, half_extent)``.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_grid_size, check_signals
from .frames import GaborSystem, Lattice, dual_window, frame_bounds
from .grid import SampledSignal, UniformGrid
from .stft import stft
from .wavefront import ConePartition, wfs_cone, wfs_lattice
from .weights import WeightFunction
from .windows import GaussWindow

__all__ = ["STFTTransformer", "GaborFrameTransformer", "WaveFrontSetEstimator"]


def _grid(est):
    n = check_grid_size(est.grid_n)
    L = est.half_extent if est.half_extent is not None else float(np.sqrt(np.pi * n / 2))
    return UniformGrid(n, L)


class STFTTransformer(TransformerMixin, BaseEstimator):
    """Map signals to flattened STFT features.

    Parameters
    ----------
    grid_n : int
        Samples per signal (power of two).
    half_extent : float, optional
        Grid half width; the square grid ``sqrt(pi n / 2)`` when omitted.
    sigma : float
        Width of the Gaussian window.
    hop : int
        Shift step in grid points.
    output : {'log_abs', 'abs', 'complex'}
    floor : float
        Added before the logarithm for ``'log_abs'``.
    threads : int
    """

    def __init__(self, grid_n=256, half_extent=None, sigma=1.0, hop=4, output="log_abs",
                 floor=1e-300, threads=1):
        self.grid_n = grid_n
        self.half_extent = half_extent
        self.sigma = sigma
        self.hop = hop
        self.output = output
        self.floor = floor
        self.threads = threads

    def fit(self, X, y=None):
        if self.output not in ("log_abs", "abs", "complex"):
            raise ValueError(f"unknown output {self.output!r}")
        self.grid_ = _grid(self)
        check_signals(X, self.grid_.n)
        self.window_ = GaussWindow(float(self.sigma))
        F = self._one(np.zeros(self.grid_.n, dtype=complex))
        self.shifts_, self.freqs_ = F.shifts, F.freqs
        self.n_features_in_ = self.grid_.n
        return self

    def _one(self, row):
        return stft(SampledSignal(self.grid_, row), self.window_, hop=int(self.hop),
                    method="numeric", threads=self.threads)

    def transform(self, X):
        check_is_fitted(self, "grid_")
        X = check_signals(X, self.grid_.n)
        out = []
        for row in X:
            v = self._one(row).values
            if self.output == "log_abs":
                v = np.log(np.abs(v) + self.floor)
            elif self.output == "abs":
                v = np.abs(v)
            out.append(v.ravel())
        return np.array(out)


class GaborFrameTransformer(TransformerMixin, BaseEstimator):
    """Lattice coefficients with the canonical dual for reconstruction.

    ``fit`` estimates the frame bounds and computes the dual window; the
    coefficients of ``transform`` are inverted by ``inverse_transform``.

    Parameters
    ----------
    grid_n, half_extent : see :class:`STFTTransformer`
    a0, b0 : float
        Lattice steps.
    sigma : float
    tol : float
        Conjugate-gradient tolerance for the dual window.
    """

    def __init__(self, grid_n=512, half_extent=16.0, a0=0.5, b0=0.5, sigma=1.0, tol=1e-10):
        self.grid_n = grid_n
        self.half_extent = half_extent
        self.a0 = a0
        self.b0 = b0
        self.sigma = sigma
        self.tol = tol

    def fit(self, X=None, y=None):
        self.grid_ = _grid(self)
        if X is not None:
            check_signals(X, self.grid_.n)
        window = GaussWindow(float(self.sigma))
        lat = Lattice.for_grid(self.a0, self.b0, self.grid_, window.sigma)
        self.system_ = GaborSystem(window, lat, self.grid_)
        self.bounds_ = frame_bounds(self.system_)
        self.dual_ = dual_window(self.system_, tol=self.tol)
        self.dual_system_ = self.system_.with_window(self.dual_)
        self.lattice_shape_ = lat.shape
        self.n_features_in_ = self.grid_.n
        return self

    def transform(self, X):
        check_is_fitted(self, "system_")
        X = check_signals(X, self.grid_.n)
        return np.array([self.system_._analysis(row).ravel() for row in X])

    def inverse_transform(self, C):
        check_is_fitted(self, "system_")
        C = np.asarray(C, dtype=complex).reshape((-1,) + self.lattice_shape_)
        return np.array([self.dual_system_._synthesis(c) for c in C])


class WaveFrontSetEstimator(BaseEstimator):
    """Per-signal wave front set estimates.

    ``fit`` stores the configuration; ``predict`` returns a boolean matrix
    ``(n_samples, nbins)`` of singular bins and ``decision_function`` the
    fitted rates minus the threshold (negative means singular).

    Parameters
    ----------
    grid_n, half_extent, sigma : see :class:`STFTTransformer`
    weight : dict or WeightFunction
        Weight descriptor; ``Power(0.5)`` by default.
    nbins : int
    lambda_reg : float, optional
        Threshold; half the largest observable rate when omitted.
    method : {'cone', 'lattice'}
    a0, b0 : float
        Lattice steps for ``method='lattice'``.
    """

    def __init__(self, grid_n=1024, half_extent=None, sigma=1.0, weight=None, nbins=180,
                 lambda_reg=None, method="cone", a0=1.0, b0=1.0):
        self.grid_n = grid_n
        self.half_extent = half_extent
        self.sigma = sigma
        self.weight = weight
        self.nbins = nbins
        self.lambda_reg = lambda_reg
        self.method = method
        self.a0 = a0
        self.b0 = b0

    def fit(self, X=None, y=None):
        if self.method not in ("cone", "lattice"):
            raise ValueError(f"unknown method {self.method!r}")
        self.grid_ = _grid(self)
        if X is not None:
            check_signals(X, self.grid_.n)
        w = self.weight
        if w is None:
            w = WeightFunction.power(0.5)
        elif isinstance(w, dict):
            w = WeightFunction.from_dict(w)
        self.weight_ = w
        self.window_ = GaussWindow(float(self.sigma))
        self.partition_ = ConePartition(int(self.nbins))
        self.n_features_in_ = self.grid_.n
        return self

    def estimate(self, X):
        """List of :class:`WfsEstimate`, one per row."""
        check_is_fitted(self, "grid_")
        X = check_signals(X, self.grid_.n)
        out = []
        for row in X:
            f = SampledSignal(self.grid_, row)
            if self.method == "cone":
                e = wfs_cone(f, self.window_, self.weight_, self.partition_, self.lambda_reg)
            else:
                e = wfs_lattice(f, self.window_, Lattice(self.a0, self.b0), self.weight_,
                                self.partition_, self.lambda_reg)
            out.append(e)
        return out

    def predict(self, X):
        ests = self.estimate(X)
        res = np.zeros((len(ests), self.partition_.nbins), dtype=bool)
        for i, e in enumerate(ests):
            res[i, list(e.singular_bins)] = True
        return res

    def decision_function(self, X):
        return np.array([e.profile.rates - e.threshold for e in self.estimate(X)])
