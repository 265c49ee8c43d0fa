"""Weighted mixed norms on phase space and seminorms of ``S_omega``.

Norms are evaluated in log space so that exponential weights of size
``exp(700)`` and beyond do not overflow before the reduction.  Essential
suprema become grid maxima.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import logsumexp

from .exceptions import ConfigError, DomainError
from .frames import Lattice, LatticeCoeffs
from .grid import SampledSignal, UniformGrid, fourier, inverse_fourier
from .stft import StftMatrix, stft
from .weights import ExpWeight, WeightFunction, eval_omega, young_conjugate
from .windows import GaussWindow

__all__ = [
    "MixedNormSpec",
    "PhaseSamples",
    "lpq_norm",
    "lpq_seq_norm",
    "amalgam_norm",
    "amalgam_coeffs",
    "restriction_constant",
    "young_check",
    "holder_check",
    "derivatives",
    "seminorm_q",
    "seminorm_stft",
    "modulation_norm",
    "window_equivalence",
    "analysis_constant",
    "norm_report",
]


def _exponent(v, name):
    v = float(v)
    if not (v >= 1):
        raise ConfigError(f"{name} must lie in [1, inf], got {v}", name)
    return v


@dataclass(frozen=True)
class MixedNormSpec:
    """Exponents ``p``, ``q`` in ``[1, inf]`` and the weight ``m_lambda``.

    ``p`` acts on the shift variable (inner integral), ``q`` on frequency.
    """

    p: float
    q: float
    weight: ExpWeight

    def __post_init__(self):
        object.__setattr__(self, "p", _exponent(self.p, "p"))
        object.__setattr__(self, "q", _exponent(self.q, "q"))

    @classmethod
    def make(cls, p, q, lam, weight=None):
        base = WeightFunction.power(0.5) if weight is None else weight
        return cls(p, q, ExpWeight(float(lam), base))

    def dual(self):
        """Hölder dual exponents with the reciprocal weight ``1/m_lambda``."""
        return MixedNormSpec(_conj_exp(self.p), _conj_exp(self.q),
                             ExpWeight(-self.weight.lam, self.weight.base))

    def moderate(self):
        """``L^1`` spec with the moderating weight ``v_lambda``."""
        return MixedNormSpec(1, 1, ExpWeight(abs(self.weight.lam), self.weight.base))

    def to_dict(self):
        return {"p": self.p, "q": self.q, "lambda": self.weight.lam,
                "weight": self.weight.base.label}


def _conj_exp(p):
    if p == 1:
        return np.inf
    if np.isinf(p):
        return 1.0
    return p / (p - 1)


@dataclass
class PhaseSamples:
    """Samples ``values[i, j] = F(x[i], xi[j])`` on a uniform product grid."""

    x: np.ndarray
    xi: np.ndarray
    values: np.ndarray
    spacing: tuple = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.xi = np.asarray(self.xi, dtype=float)
        self.values = np.asarray(self.values)
        if self.values.shape != (self.x.size, self.xi.size):
            raise DomainError("phase samples do not match their axes")

    @property
    def dx(self):
        if self.spacing is not None:
            return float(self.spacing[0])
        return float(self.x[1] - self.x[0]) if self.x.size > 1 else 1.0

    @property
    def dxi(self):
        if self.spacing is not None:
            return float(self.spacing[1])
        return float(self.xi[1] - self.xi[0]) if self.xi.size > 1 else 1.0

    @classmethod
    def from_function(cls, fn, x, xi):
        X, XI = np.meshgrid(x, xi, indexing="ij")
        return cls(x, xi, fn(X, XI))


def _as_phase(F):
    if isinstance(F, PhaseSamples):
        return F
    if isinstance(F, StftMatrix):
        return PhaseSamples(F.shifts, F.freqs, F.values, (F.dshift, F.dxi))
    raise DomainError(f"cannot take a phase-space norm of {type(F).__name__}")


def _spacing(ps):
    return ps.dx, ps.dxi


def _weight_log(ew, x, xi):
    X, XI = np.meshgrid(x, xi, indexing="ij")
    return ew.lam * eval_omega(ew.base, np.hypot(X, XI))


def _reduce(logabs, p, cell, axis):
    """``log (sum |.|^p cell)^(1/p)`` along ``axis``; max for ``p = inf``."""
    if np.isinf(p):
        return np.max(logabs, axis=axis)
    with np.errstate(invalid="ignore"):
        out = logsumexp(p * logabs, axis=axis) / p
    return out + np.log(cell) / p


def _log_mixed(logabs, p, q, dx, dxi):
    inner = _reduce(logabs, p, dx, axis=0)
    return float(_reduce(inner, q, dxi, axis=0))


def _log_abs(values):
    with np.errstate(divide="ignore"):
        return np.log(np.abs(values))


def lpq_norm(F, spec, log=False):
    """Weighted mixed norm ``(int (int |F m|^p dx)^(q/p) dxi)^(1/q)``.

    Parameters
    ----------
    F : StftMatrix or PhaseSamples
    spec : MixedNormSpec
    log : bool
        Return the natural log of the norm (``-inf`` for ``F = 0``).
    """
    ps = _as_phase(F)
    if not np.all(np.isfinite(ps.values)):
        raise DomainError("mixed norm of non-finite samples")
    dx, dxi = _spacing(ps)
    la = _log_abs(ps.values) + _weight_log(spec.weight, ps.x, ps.xi)
    val = _log_mixed(la, spec.p, spec.q, dx, dxi)
    return val if log else float(np.exp(val))


def _seq_weight_log(ew, lat):
    return _weight_log(ew, lat.a0 * lat.k, lat.b0 * lat.n)


def lpq_seq_norm(c, spec, log=False):
    """Discrete mixed norm of lattice coefficients with ``m(a0 k, b0 n)``."""
    la = _log_abs(c.values) + _seq_weight_log(spec.weight, c.lattice)
    val = _log_mixed(la, spec.p, spec.q, 1.0, 1.0)
    return val if log else float(np.exp(val))


def _unit_cells(axis, name):
    h = axis[1] - axis[0]
    per = 1.0 / h
    if abs(per - round(per)) > 1e-9 * per:
        raise DomainError(f"{name} spacing {h:g} does not divide 1")
    # cell index of each sample; nudge so that knots on integers open a cell
    return np.floor(axis + 1e-9 * h).astype(int)


def amalgam_coeffs(F):
    """Unit-cube suprema ``a_kn = max |F|`` over ``[k, k+1) x [n, n+1)``."""
    ps = _as_phase(F)
    ki = _unit_cells(ps.x, "shift")
    ni = _unit_cells(ps.xi, "frequency")
    kmax = int(max(abs(ki.min()), abs(ki.max())))
    nmax = int(max(abs(ni.min()), abs(ni.max())))
    lat = Lattice(1.0, 1.0, kmax, nmax)
    a = np.zeros(lat.shape)
    rows = np.zeros((lat.shape[0], ps.xi.size))
    np.maximum.at(rows, ki + kmax, np.abs(ps.values))
    np.maximum.at(a.T, ni + nmax, rows.T)
    return LatticeCoeffs(lat, a.astype(complex))


def amalgam_norm(F, spec, log=False):
    """Amalgam norm: per-unit-cube maxima measured in the sequence norm."""
    return lpq_seq_norm(amalgam_coeffs(F), spec, log=log)


def restriction_constant(F, spec, a0=1.0, b0=1.0):
    """Ratio of the lattice-restriction norm to the amalgam norm.

    ``F`` is sampled at the nodes ``(a0 k, b0 n)`` that lie on its grid.
    """
    ps = _as_phase(F)
    dx, dxi = _spacing(ps)
    sx, sxi = a0 / dx, b0 / dxi
    if abs(sx - round(sx)) > 1e-9 or abs(sxi - round(sxi)) > 1e-9:
        raise DomainError("lattice nodes must lie on the phase grid")
    ix = np.nonzero(np.abs(ps.x / a0 - np.round(ps.x / a0)) < 1e-9)[0]
    ixi = np.nonzero(np.abs(ps.xi / b0 - np.round(ps.xi / b0)) < 1e-9)[0]
    k = np.round(ps.x[ix] / a0).astype(int)
    n = np.round(ps.xi[ixi] / b0).astype(int)
    kmax, nmax = int(np.abs(k).max()), int(np.abs(n).max())
    lat = Lattice(a0, b0, kmax, nmax)
    vals = np.zeros(lat.shape, dtype=complex)
    vals[np.ix_(k + kmax, n + nmax)] = ps.values[np.ix_(ix, ixi)]
    num = lpq_seq_norm(LatticeCoeffs(lat, vals), spec, log=True)
    den = amalgam_norm(ps, spec, log=True)
    return float(np.exp(num - den)) if np.isfinite(den) else 0.0


def _conv_full(F, G):
    """Discrete convolution ``sum F(z - w) G(w) dx dxi`` on its natural grid."""
    f, g = _as_phase(F), _as_phase(G)
    dx, dxi = _spacing(f)
    gdx, gdxi = _spacing(g)
    if not (np.isclose(dx, gdx) and np.isclose(dxi, gdxi)):
        raise DomainError("convolution factors need the same phase spacing")
    vals = fftconvolve(f.values, g.values, mode="full") * dx * dxi
    x = f.x[0] + g.x[0] + dx * np.arange(vals.shape[0])
    xi = f.xi[0] + g.xi[0] + dxi * np.arange(vals.shape[1])
    return PhaseSamples(x, xi, vals, (dx, dxi))


def young_check(F, G, spec, rtol=1e-10):
    """Check ``|F * G|_{L^pq_m} <= C |F|_{L^pq_m} |G|_{L^1_v}`` with ``C = 1``.

    Returns
    -------
    dict
        ``lhs``, ``rhs`` (without constant), the fitted ``constant``
        ``lhs / rhs``, ``passed`` and the convolution itself.
    """
    conv = _conv_full(F, G)
    lhs = lpq_norm(conv, spec, log=True)
    rhs = lpq_norm(F, spec, log=True) + lpq_norm(G, spec.moderate(), log=True)
    if np.isneginf(rhs):
        const = 0.0
    else:
        const = float(np.exp(lhs - rhs))
    return {"lhs": float(np.exp(lhs)), "rhs": float(np.exp(rhs)), "constant": const,
            "passed": bool(const <= 1 + rtol), "convolution": conv}


def holder_check(F, H, spec, rtol=1e-10):
    """Check ``|sum F conj(H) dx dxi| <= |F|_{L^pq_m} |H|_{L^p'q'_{1/m}}``."""
    f, h = _as_phase(F), _as_phase(H)
    dx, dxi = _spacing(f)
    lhs = abs(np.sum(f.values * np.conj(h.values))) * dx * dxi
    rhs = lpq_norm(f, spec) * lpq_norm(h, spec.dual())
    return {"lhs": float(lhs), "rhs": float(rhs),
            "passed": bool(lhs <= rhs * (1 + rtol))}


# seminorms ----------------------------------------------------------------------


def _fornberg(offsets, k):
    """Finite-difference weights of order ``k`` on integer ``offsets``."""
    m = len(offsets)
    A = np.vander(np.asarray(offsets, float), m, increasing=True).T
    rhs = np.zeros(m)
    rhs[k] = float(np.prod(np.arange(1, k + 1)))
    return np.linalg.solve(A, rhs)


def derivatives(f, K, method="spectral", resolve_tol=1e-3):
    """Derivatives ``d^k f / dx^k`` for ``k = 0..K`` on the grid.

    Parameters
    ----------
    f : SampledSignal
    K : int
        Highest order, at most 20.
    method : {'spectral', 'fd'}
        Spectral differentiation acts on the band above the roundoff floor
        (``1e-13`` of the spectral peak).  ``'fd'`` uses centered stencils
        of half width ``K // 2 + 4`` as a cross-check.
    resolve_tol : float
        Largest accepted estimate of the relative roundoff error of the
        ``K``-th derivative.

    Returns
    -------
    ndarray, shape (K + 1, n)

    Raises
    ------
    DomainError
        If ``K > 20`` or the grid does not resolve the ``K``-th derivative.
    """
    K = int(K)
    if K < 0 or K > 20:
        raise DomainError("derivative order must lie in 0..20")
    g = f.grid
    if g.d != 1:
        raise DomainError("derivatives are implemented for d = 1")
    if method == "fd":
        h = K // 2 + 4
        off = np.arange(-h, h + 1)
        pad = np.concatenate([np.zeros(h, complex), f.values, np.zeros(h, complex)])
        out = np.empty((K + 1, g.n), dtype=complex)
        for k in range(K + 1):
            wts = _fornberg(off, k) / g.dx**k
            out[k] = np.convolve(pad, wts[::-1], mode="valid")
        return out
    if method != "spectral":
        raise DomainError(f"unknown derivative method {method!r}")
    F = fourier(f)
    xi = g.frequencies
    amp = np.abs(F.values)
    keep = amp > 1e-13 * amp.max() if amp.max() > 0 else np.zeros(g.n, bool)
    if not keep.any():
        return np.zeros((K + 1, g.n), dtype=complex)
    band = np.abs(xi[keep]).max()
    if band >= 0.9 * g.nyquist:
        raise DomainError("signal spectrum reaches the Nyquist limit; refine the grid")
    Fk = np.where(keep, F.values, 0.0)
    out = np.empty((K + 1, g.n), dtype=complex)
    for k in range(K + 1):
        out[k] = inverse_fourier(F.with_values((1j * xi) ** k * Fk), g).values
    # roundoff floor of the spectrum amplified by |xi|^K over the band
    est = 1e-13 * amp.max() * band**K * band / np.pi
    peak = np.abs(out[K]).max()
    if K > 0 and est > resolve_tol * peak:
        raise DomainError(f"K={K} too large for the grid resolution "
                          f"(estimated relative error {est / max(peak, 1e-300):.1e})")
    return out


def seminorm_q(f, lam, mu, w, K, method="spectral", log=False):
    """``max_{k<=K, x} |f^(k)(x)| exp(-lam phi*(k / lam) + mu omega(|x|))``.

    Parameters
    ----------
    f : SampledSignal
    lam, mu : float
        ``lam > 0``.
    w : WeightFunction
    K : int
    method : {'spectral', 'fd'}
    log : bool
        Return the logarithm of the seminorm.
    """
    if not lam > 0:
        raise DomainError("lambda must be positive")
    D = derivatives(f, K, method=method)
    x = f.grid.points
    conj = np.array([young_conjugate(w, k / lam) for k in range(K + 1)])
    la = _log_abs(D) - lam * conj[:, None] + mu * eval_omega(w, np.abs(x))[None, :]
    val = float(np.max(la))
    return val if log else float(np.exp(val))


def _stft_of(f, window, grid):
    if isinstance(f, StftMatrix):
        return f
    if isinstance(f, SampledSignal):
        return stft(f, window, method="numeric")
    grid = UniformGrid.default() if grid is None else grid
    return stft(f, window, grid)


def seminorm_stft(f, window, lam, w, grid=None, log=False):
    """``max |V_phi f(z)| exp(lam omega(|z|))`` over the phase grid."""
    V = _stft_of(f, window, grid)
    la = _log_abs(V.values) + lam * eval_omega(w, np.hypot(*np.meshgrid(V.shifts, V.freqs,
                                                                         indexing="ij")))
    val = float(np.max(la))
    return val if log else float(np.exp(val))


def modulation_norm(f, p, q, lam, window, weight=None, grid=None, log=False):
    """``|V_phi f|_{L^pq_m}`` with ``m = exp(lam omega)``.

    ``weight`` defaults to ``omega(t) = t**0.5``.
    """
    spec = MixedNormSpec.make(p, q, lam, weight)
    return lpq_norm(_stft_of(f, window, grid), spec, log=log)


def window_equivalence(f, phi1, phi2, p, q, lam, weight=None):
    """Modulation norms under two windows and the change-of-window constants.

    With ``C_ab = |V_a b|_{L^1_v} / (2 pi |b|^2)`` one has
    ``|V_a f| <= C_ab |V_b f|`` in every weighted mixed norm.

    Returns
    -------
    dict
        ``n1``, ``n2``, ``ratio = n2 / n1``, ``C12``, ``C21`` and ``passed``
        when ``1 / C21 <= ratio <= C12``.
    """
    spec = MixedNormSpec.make(p, q, lam, weight)
    g = f.grid
    n1 = lpq_norm(stft(f, phi1, method="numeric"), spec, log=True)
    n2 = lpq_norm(stft(f, phi2, method="numeric"), spec, log=True)

    def const(a, b):
        bs = b.sample(g) if isinstance(b, GaussWindow) else b
        V = stft(bs, a, method="numeric")
        return lpq_norm(V, spec.moderate()) / (2 * np.pi * bs.norm() ** 2)

    c12, c21 = const(phi2, phi1), const(phi1, phi2)
    ratio = float(np.exp(n2 - n1))
    return {"n1": float(np.exp(n1)), "n2": float(np.exp(n2)), "ratio": ratio,
            "C12": c12, "C21": c21,
            "passed": bool(1 / c21 * (1 - 1e-9) <= ratio <= c12 * (1 + 1e-9))}


def analysis_constant(f, system, spec):
    """``|C_phi f|_{l^pq_m~} / |V_phi f|_{L^pq_m}`` for one signal."""
    from .frames import analysis

    c = analysis(system, f)
    num = lpq_seq_norm(c, spec, log=True)
    den = lpq_norm(stft(f, system.window, method="numeric"), spec, log=True)
    return float(np.exp(num - den))


def norm_report(value, spec, grid=None):
    """JSON record ``{norm, p, q, lambda, weight, grid}``."""
    rec = {"norm": float(value)}
    rec.update(spec.to_dict())
    rec["grid"] = grid.to_dict() if grid is not None else None
    return rec
