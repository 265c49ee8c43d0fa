"""Analytic windows: a polynomial times a modulated Gaussian.

The family ``P(y - c) exp(-(y - c)**2 / (2 sigma**2)) exp(i eta y)`` is closed
under multiplication by ``y`` and under ``D = -i d/dy``, which is what the
polynomial-operator expansion needs.  All integrals against Gaussian-type
functions reduce to :func:`gauss_poly_integral`.
"""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.hermite import hermgauss

from .exceptions import DomainError
from .grid import SampledSignal

__all__ = ["GaussWindow", "gauss_poly_integral", "gaussian_moments"]


def gaussian_moments(a, b, kmax):
    """Normalized moments ``m_k`` of ``exp(-a u**2 + b u)``.

    ``m_k = int u**k e^{-a u^2 + b u} du / int e^{-a u^2 + b u} du`` obeys
    ``m_{k+1} = mu m_k + k/(2a) m_{k-1}`` with ``mu = b / (2a)``.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    mu = b / (2 * a)
    v = 1 / (2 * a)
    shape = np.broadcast(a, b).shape
    m = [np.ones(shape, dtype=complex)]
    if kmax >= 1:
        m.append(mu * np.ones(shape))
    for k in range(1, kmax):
        m.append(mu * m[k] + k * v * m[k - 1])
    return m


def gauss_poly_integral(a, b, c0, coeffs):
    """``int Q(u) exp(-a u^2 + b u + c0) du`` split as ``exp(log_core) * factor``.

    Parameters
    ----------
    a, b, c0 : array_like of complex
        Broadcastable parameters with ``Re(a) > 0``.
    coeffs : sequence of complex
        Ascending coefficients of ``Q``.

    Returns
    -------
    log_core : ndarray of complex
        ``log(sqrt(pi / a)) + b^2 / (4a) + c0``.
    factor : ndarray of complex
        ``sum_k q_k m_k``, of moderate size.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    log_core = 0.5 * np.log(np.pi / a) + b * b / (4 * a) + c0
    q = np.asarray(coeffs, dtype=complex)
    m = gaussian_moments(a, b, len(q) - 1)
    factor = sum(qk * mk for qk, mk in zip(q, m))
    return log_core, np.broadcast_to(factor, np.shape(log_core)).astype(complex)


@dataclass(frozen=True)
class GaussWindow:
    """Window ``P(y - center) g(y - center) exp(i freq y)``.

    Parameters
    ----------
    sigma : float
        Gaussian width, ``g(u) = exp(-u**2 / (2 sigma**2))``.
    center : float
    freq : float
    coeffs : tuple of complex
        Ascending coefficients of ``P``; ``(1,)`` is a plain Gaussian.

    Examples
    --------
    >>> w = GaussWindow(1.0)
    >>> round(w.norm() ** 2, 12) == round(np.sqrt(np.pi), 12)
    True
    """

    sigma: float = 1.0
    center: float = 0.0
    freq: float = 0.0
    coeffs: tuple = (1.0,)

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("window width must be positive")
        c = tuple(complex(x) for x in np.atleast_1d(self.coeffs))
        # trim trailing zeros but keep at least one coefficient
        while len(c) > 1 and c[-1] == 0:
            c = c[:-1]
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def normalized(cls, sigma=1.0, norm=1.0):
        """Gaussian with the requested L2 norm."""
        amp = norm / np.sqrt(sigma * np.sqrt(np.pi))
        return cls(sigma, 0.0, 0.0, (amp,))

    @property
    def is_gaussian(self):
        return len(self.coeffs) == 1

    @property
    def poly(self):
        return Polynomial(np.array(self.coeffs))

    @property
    def window_id(self):
        deg = len(self.coeffs) - 1
        return f"gauss(sigma={self.sigma:g},c={self.center:g},eta={self.freq:g},deg={deg})"

    def __call__(self, y):
        u = np.asarray(y, dtype=float) - self.center
        return (
            self.poly(u)
            * np.exp(-u * u / (2 * self.sigma**2))
            * np.exp(1j * self.freq * np.asarray(y, dtype=float))
        )

    def sample(self, grid):
        return SampledSignal(grid, self(grid.points))

    def scaled(self, c):
        return GaussWindow(self.sigma, self.center, self.freq, tuple(np.array(self.coeffs) * c))

    def times_x(self, k=1):
        """``y**k`` times the window."""
        p = self.poly * Polynomial([self.center, 1.0]) ** k
        return GaussWindow(self.sigma, self.center, self.freq, tuple(p.coef))

    def derivative(self, k=1):
        """``D**k`` of the window with ``D = -i d/dy``."""
        p = self.poly
        u = Polynomial([0.0, 1.0])
        for _ in range(k):
            p = -1j * (p.deriv() - u * p / self.sigma**2 + 1j * self.freq * p)
        return GaussWindow(self.sigma, self.center, self.freq, tuple(p.coef))

    def shifted(self, x, xi):
        """Phase-space shift ``exp(i xi y) w(y - x)``."""
        c = np.array(self.coeffs) * np.exp(-1j * self.freq * x)
        return GaussWindow(self.sigma, self.center + x, self.freq + xi, tuple(c))

    def norm2(self):
        """Squared L2 norm, exact via Gauss-Hermite quadrature."""
        deg = len(self.coeffs) - 1
        t, wts = hermgauss(deg + 2)
        vals = np.abs(self.poly(self.sigma * t)) ** 2
        return float(self.sigma * np.sum(wts * vals))

    def norm(self):
        return float(np.sqrt(self.norm2()))

    def inner(self, other):
        """``int self * conj(other)``, exact."""
        s1, s2 = self.sigma, other.sigma
        a = 1 / (2 * s1**2) + 1 / (2 * s2**2)
        b = self.center / s1**2 + other.center / s2**2 + 1j * (self.freq - other.freq)
        c0 = -self.center**2 / (2 * s1**2) - other.center**2 / (2 * s2**2)
        shift1 = Polynomial([-self.center, 1.0])
        shift2 = Polynomial([-other.center, 1.0])
        q = self.poly(shift1) * Polynomial(np.conj(other.coeffs))(shift2)
        lc, f = gauss_poly_integral(a, b, c0, q.coef)
        return complex(np.exp(lc) * f)

    def fourier(self, xi):
        """Fourier transform ``int w(y) exp(-i y xi) dy``."""
        xi = np.asarray(xi, dtype=float)
        # y = c + u
        a = 1 / (2 * self.sigma**2)
        b = 1j * (self.freq - xi)
        c0 = 1j * (self.freq - xi) * self.center
        lc, f = gauss_poly_integral(a, b, c0, self.coeffs)
        return np.exp(lc) * f

    def radius(self, eps=1e-16):
        """Half width outside which ``|w| < eps * max|w|``."""
        u = np.linspace(0, 40 * self.sigma, 8001)
        env = np.maximum(np.abs(self.poly(u)), np.abs(self.poly(-u)))
        env = env * np.exp(-u * u / (2 * self.sigma**2))
        big = np.nonzero(env >= eps * env.max())[0]
        return float(u[big[-1]] + abs(self.center)) if big.size else abs(self.center)

    def to_dict(self):
        return {
            "sigma": self.sigma,
            "center": self.center,
            "freq": self.freq,
            "coeffs": [[c.real, c.imag] for c in self.coeffs],
        }

    @classmethod
    def from_dict(cls, d):
        coeffs = d.get("coeffs", [[1.0, 0.0]])
        coeffs = tuple(complex(*c) if isinstance(c, (list, tuple)) else complex(c) for c in coeffs)
        return cls(float(d.get("sigma", 1.0)), float(d.get("center", 0.0)),
                   float(d.get("freq", 0.0)), coeffs)
