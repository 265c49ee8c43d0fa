"""Uniform grids, sampled signals, the Fourier transform and test distributions.

Fourier convention: ``f_hat(xi) = int exp(-i x.xi) f(x) dx`` with no 2*pi in
the forward transform; the inverse carries ``(2*pi)**-d``.
"""

import io
import struct
from dataclasses import dataclass, field

import numpy as np

from .exceptions import AliasingError, ConfigError, DomainError, NotSampleableError

__all__ = [
    "UniformGrid",
    "SampledSignal",
    "Delta",
    "Const",
    "PlaneWave",
    "Chirp",
    "Gaussian",
    "GaussType",
    "GevreyBump",
    "Sampled",
    "sample",
    "fourier",
    "inverse_fourier",
    "distribution_from_dict",
    "write_signal_csv",
    "read_signal_csv",
    "write_signal_binary",
    "read_signal_binary",
]


@dataclass(frozen=True)
class UniformGrid:
    """Symmetric grid ``x_j = -L + j dx`` with ``dx = 2 L / n`` per axis.

    Parameters
    ----------
    n : int
        Points per axis, a power of two.
    half_extent : float
        ``L``.
    d : {1, 2}
        Dimension.
    """

    n: int
    half_extent: float
    d: int = 1

    def __post_init__(self):
        n = int(self.n)
        if n < 4 or n & (n - 1):
            raise DomainError(f"grid size must be a power of two >= 4, got {self.n}")
        if not (self.half_extent > 0 and np.isfinite(self.half_extent)):
            raise DomainError("half extent must be positive")
        if self.d not in (1, 2):
            raise DomainError("only d = 1 and d = 2 are supported")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "half_extent", float(self.half_extent))

    @classmethod
    def square(cls, n, d=1):
        """Grid whose dual reaches as far in frequency as the grid in space."""
        return cls(n, float(np.sqrt(np.pi * n / 2.0)), d)

    @classmethod
    def default(cls, d=1):
        return cls(1024, 20.0, 1) if d == 1 else cls(256, 12.0, 2)

    @property
    def dx(self):
        return 2.0 * self.half_extent / self.n

    @property
    def dxi(self):
        return np.pi / self.half_extent

    @property
    def nyquist(self):
        """Frequency half extent ``pi n / (2 L)``."""
        return np.pi * self.n / (2.0 * self.half_extent)

    @property
    def points(self):
        return -self.half_extent + self.dx * np.arange(self.n)

    @property
    def frequencies(self):
        return self.dxi * np.arange(-self.n // 2, self.n // 2)

    @property
    def shape(self):
        return (self.n,) * self.d

    def mesh(self):
        """Coordinates with a trailing vector axis, shape ``shape + (d,)``."""
        if self.d == 1:
            return self.points[:, None]
        x = self.points
        return np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1)

    def dual(self):
        """Grid carrying the frequencies of :func:`fourier`."""
        return UniformGrid(self.n, self.nyquist, self.d)

    def index_of(self, x):
        """Nearest node index and the snap offset ``x - x_j``."""
        j = int(np.rint((x + self.half_extent) / self.dx))
        return j, x - (-self.half_extent + j * self.dx)

    def to_dict(self):
        return {"n": self.n, "half_extent": self.half_extent, "d": self.d}


@dataclass(frozen=True, eq=False)
class SampledSignal:
    """Complex samples on a :class:`UniformGrid`.

    ``meta`` carries bookkeeping such as snap offsets or truncation flags.
    """

    grid: UniformGrid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            v = v.reshape(self.grid.shape) if v.size == self.n_total else None
            if v is None:
                raise DomainError("signal length does not match the grid")
        if not np.all(np.isfinite(v)):
            raise DomainError("signal values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_total(self):
        return self.grid.n ** self.grid.d

    @property
    def cell(self):
        return self.grid.dx ** self.grid.d

    def inner(self, other):
        """Quadrature inner product, second argument conjugated."""
        return complex(np.sum(self.values * np.conj(other.values)) * self.cell)

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.cell))

    def with_values(self, values, **meta):
        return SampledSignal(self.grid, values, {**self.meta, **meta})

    def __add__(self, other):
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        return self.with_values(self.values - other.values)

    def __mul__(self, c):
        return self.with_values(self.values * c)

    __rmul__ = __mul__


# catalog of test distributions ---------------------------------------------


def _vec(v, d):
    a = np.atleast_1d(np.asarray(v, dtype=float))
    if a.size == 1 and d > 1:
        a = np.repeat(a, d)
    if a.size != d:
        raise DomainError(f"expected a {d}-vector")
    return a


@dataclass(frozen=True)
class Delta:
    """Dirac mass ``amplitude * delta(x - center)``."""

    center: float = 0.0
    amplitude: complex = 1.0
    sampleable = False

    def shifted(self, x0, xi0):
        # M_xi0 T_x0 delta_c = e^{i xi0 (c + x0)} delta_{c + x0}
        c = self.center + x0
        return Delta(c, self.amplitude * np.exp(1j * xi0 * c))

    def to_dict(self):
        return {"kind": "delta", "center": self.center}


@dataclass(frozen=True)
class GaussType:
    """``exp(-alpha y**2 + beta y + gamma)`` with complex parameters, Re alpha >= 0.

    Every bounded catalog function in one dimension has this form, and the
    family is closed under phase-space shifts.
    """

    alpha: complex
    beta: complex
    gamma: complex = 0.0
    sampleable = True

    def __post_init__(self):
        if np.real(self.alpha) < 0:
            raise DomainError("GaussType needs Re(alpha) >= 0")
        if np.real(self.alpha) == 0 and np.real(self.beta) != 0:
            raise DomainError("exponential growth is not tempered")

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-self.alpha * x * x + self.beta * x + self.gamma)

    def shifted(self, x0, xi0):
        a, b, g = self.alpha, self.beta, self.gamma
        return GaussType(a, b + 2 * a * x0 + 1j * xi0, g - a * x0 * x0 - b * x0)

    def local_frequency_bound(self, L):
        return 2 * abs(np.imag(self.alpha)) * L + abs(np.imag(self.beta))

    def gauss_type(self):
        return self

    def to_dict(self):
        c = [complex(self.alpha), complex(self.beta), complex(self.gamma)]
        return {"kind": "gausstype", "params": [[z.real, z.imag] for z in c]}


@dataclass(frozen=True)
class Const:
    """The constant function 1."""

    sampleable = True

    def evaluate(self, x):
        return np.ones(np.shape(x)[:-1] if np.ndim(x) > 1 else np.shape(x), dtype=complex)

    def gauss_type(self):
        return GaussType(0.0, 0.0, 0.0)

    def shifted(self, x0, xi0):
        return self.gauss_type().shifted(x0, xi0)

    def to_dict(self):
        return {"kind": "const"}


@dataclass(frozen=True)
class PlaneWave:
    """``exp(i xi_bar x)``."""

    xi: float = 0.0
    sampleable = True

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim > 1:
            return np.exp(1j * (x @ _vec(self.xi, x.shape[-1])))
        return np.exp(1j * self.xi * x)

    def gauss_type(self):
        return GaussType(0.0, 1j * self.xi, 0.0)

    def shifted(self, x0, xi0):
        return self.gauss_type().shifted(x0, xi0)

    def to_dict(self):
        return {"kind": "planewave", "xi": self.xi}


@dataclass(frozen=True)
class Chirp:
    """``exp(i c x**2 / 2)``, one dimension only."""

    c: float = 1.0
    sampleable = True

    def __post_init__(self):
        if self.c == 0:
            raise DomainError("chirp rate must be nonzero")

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(0.5j * self.c * x * x)

    def gauss_type(self):
        return GaussType(-0.5j * self.c, 0.0, 0.0)

    def shifted(self, x0, xi0):
        return self.gauss_type().shifted(x0, xi0)

    def to_dict(self):
        return {"kind": "chirp", "c": self.c}


@dataclass(frozen=True)
class Gaussian:
    """``exp(-|x - center|**2 / (2 width**2))``."""

    center: float = 0.0
    width: float = 1.0
    sampleable = True

    def __post_init__(self):
        if not self.width > 0:
            raise DomainError("Gaussian width must be positive")

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim > 1:
            c = _vec(self.center, x.shape[-1])
            r2 = np.sum((x - c) ** 2, axis=-1)
        else:
            r2 = (x - self.center) ** 2
        return np.exp(-r2 / (2 * self.width**2)).astype(complex)

    def gauss_type(self):
        s2 = self.width**2
        c = float(self.center)
        return GaussType(1 / (2 * s2), c / s2, -c * c / (2 * s2))

    def shifted(self, x0, xi0):
        return self.gauss_type().shifted(x0, xi0)

    def to_dict(self):
        return {"kind": "gaussian", "center": self.center, "width": self.width}


@dataclass(frozen=True)
class GevreyBump:
    """``exp(-(1 - (x/radius)**2)**(-s))`` on ``|x| < radius``, zero outside.

    Smooth and compactly supported; its Fourier transform decays like
    ``exp(-c |xi|**(s/(s+1)))``, so it is Gevrey regular of order
    ``1 + 1/s`` but not analytic.
    """

    radius: float = 1.0
    s: float = 2.0
    sampleable = True

    def __post_init__(self):
        if not (self.radius > 0 and self.s > 0):
            raise DomainError("bump radius and exponent must be positive")

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim > 1:
            x = np.sqrt(np.sum(x * x, axis=-1))
        t = (x / self.radius) ** 2
        out = np.zeros(t.shape, dtype=complex)
        m = t < 1
        out[m] = np.exp(-((1 - t[m]) ** (-self.s)))
        return out

    def to_dict(self):
        return {"kind": "gevrey_bump", "radius": self.radius, "s": self.s}


@dataclass(frozen=True, eq=False)
class Sampled:
    """A distribution given by samples."""

    signal: SampledSignal
    sampleable = True

    def to_dict(self):
        return {"kind": "sampled", "n": self.signal.grid.n}


def distribution_from_dict(d):
    """Build a catalog distribution from a JSON-style dict."""
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError("input needs a 'kind' field", "input.kind")
    kind = d["kind"]
    try:
        if kind == "delta":
            return Delta(float(d.get("center", 0.0)))
        if kind == "const":
            return Const()
        if kind == "planewave":
            return PlaneWave(float(d["xi"]))
        if kind == "chirp":
            return Chirp(float(d["c"]))
        if kind == "gaussian":
            return Gaussian(float(d.get("center", 0.0)), float(d.get("width", 1.0)))
        if kind == "gevrey_bump":
            return GevreyBump(float(d.get("radius", 1.0)), float(d.get("s", 2.0)))
        if kind == "zero":
            return GaussType(0.0, 0.0, -np.inf)
    except KeyError as exc:
        raise ConfigError(f"input misses {exc}", f"input.{exc.args[0]}")
    except DomainError as exc:
        raise ConfigError(str(exc), "input")
    raise ConfigError(f"unknown input kind {kind!r}", "input.kind")


def sample(spec, grid, regularize=False, width=0.0):
    """Evaluate a distribution on the nodes of ``grid``.

    Parameters
    ----------
    spec : catalog distribution
    grid : UniformGrid
    regularize : bool
        Allow Dirac masses; they become a grid spike of mass ``amplitude``
        (``width == 0``) or a normalized Gaussian of the given width.
    width : float
        Regularization width, recorded in ``meta``.

    Raises
    ------
    NotSampleableError
        For a Dirac mass without ``regularize``.
    AliasingError
        When a chirp or plane wave exceeds the Nyquist frequency.
    """
    if isinstance(spec, Sampled):
        if spec.signal.grid != grid:
            raise DomainError("sampled distribution lives on another grid")
        return spec.signal
    if isinstance(spec, SampledSignal):
        return spec
    nyq = grid.nyquist
    L = grid.half_extent
    if isinstance(spec, Delta):
        if not regularize:
            raise NotSampleableError(
                "Dirac mass has no point values; use the analytic STFT path "
                "or sample(..., regularize=True)"
            )
        c = _vec(spec.center, grid.d)
        if width <= 0:
            vals = np.zeros(grid.shape, dtype=complex)
            idx = []
            for ci in c:
                j, _ = grid.index_of(float(ci))
                if not 0 <= j < grid.n:
                    raise DomainError("delta center outside the grid")
                idx.append(j)
            vals[tuple(idx)] = spec.amplitude / grid.dx**grid.d
        else:
            X = grid.mesh()
            r2 = np.sum((X - c) ** 2, axis=-1)
            vals = spec.amplitude * np.exp(-r2 / (2 * width**2)) / (
                np.sqrt(2 * np.pi) * width
            ) ** grid.d
        return SampledSignal(grid, vals, {"regularized_delta_width": float(width)})
    if isinstance(spec, Chirp):
        if grid.d != 1:
            raise DomainError("chirps are one-dimensional")
        if abs(spec.c) * L >= nyq:
            raise AliasingError(
                f"chirp c={spec.c} on L={L:g} needs |c| L < pi n/(2L) = {nyq:g}"
            )
    if isinstance(spec, PlaneWave) and np.max(np.abs(_vec(spec.xi, grid.d))) >= nyq:
        raise AliasingError(f"plane wave frequency beyond Nyquist {nyq:g}")
    if isinstance(spec, GaussType):
        if grid.d != 1:
            raise DomainError("GaussType is one-dimensional")
        if spec.local_frequency_bound(L) >= nyq:
            raise AliasingError("local frequency exceeds the Nyquist limit")
        return SampledSignal(grid, spec.evaluate(grid.points))
    X = grid.points if grid.d == 1 else grid.mesh()
    return SampledSignal(grid, spec.evaluate(X))


# Fourier transform ---------------------------------------------------------


def _sign(n):
    return (-1.0) ** np.arange(-n // 2, n // 2)


def _fwd_axis(v, axis, dx):
    n = v.shape[axis]
    shape = [1] * v.ndim
    shape[axis] = n
    s = _sign(n).reshape(shape)
    # x_j = -L + j dx  gives  exp(i L xi_k) = (-1)^k
    return dx * s * np.fft.fftshift(np.fft.fft(v, axis=axis), axes=axis)


def _inv_axis(F, axis, dx):
    n = F.shape[axis]
    shape = [1] * F.ndim
    shape[axis] = n
    s = _sign(n).reshape(shape)
    return np.fft.ifft(np.fft.ifftshift(F * s, axes=axis), axis=axis) / dx


def fourier(f):
    """Continuous-convention Fourier transform on the dual grid."""
    v = f.values
    for ax in range(f.grid.d):
        v = _fwd_axis(v, ax, f.grid.dx)
    return SampledSignal(f.grid.dual(), v)


def inverse_fourier(F, grid=None):
    """Inverse of :func:`fourier`.

    ``F`` lives on a dual grid; the spatial grid is reconstructed unless given.
    """
    g = grid or UniformGrid(F.grid.n, np.pi * F.grid.n / (2 * F.grid.half_extent), F.grid.d)
    v = F.values
    for ax in range(g.d):
        v = _inv_axis(v, ax, g.dx)
    return SampledSignal(g, v)


# signal IO -----------------------------------------------------------------

_HEADER = struct.Struct("<qqd")


def _fmt(x):
    return format(float(x), ".17g")


def write_signal_csv(f, path):
    """Write ``x, re, im`` rows (``x1, x2, re, im`` for d = 2)."""
    g = f.grid
    buf = io.StringIO()
    if g.d == 1:
        buf.write("x,re,im\n")
        for x, v in zip(g.points, f.values):
            buf.write(f"{_fmt(x)},{_fmt(v.real)},{_fmt(v.imag)}\n")
    else:
        buf.write("x1,x2,re,im\n")
        X = g.mesh()
        for (x1, x2), v in zip(X.reshape(-1, 2), f.values.ravel()):
            buf.write(f"{_fmt(x1)},{_fmt(x2)},{_fmt(v.real)},{_fmt(v.imag)}\n")
    with open(path, "w", newline="\n") as fh:
        fh.write(buf.getvalue())


def read_signal_csv(path):
    with open(path) as fh:
        head = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    d = len(head) - 2
    n = int(round(data.shape[0] ** (1.0 / d)))
    x = data[:n**d:n ** (d - 1), 0]
    L = -x[0]
    grid = UniformGrid(n, L, d)
    if not np.allclose(x, grid.points, rtol=0, atol=1e-9 * L):
        raise DomainError("CSV abscissae are not a symmetric uniform grid")
    return SampledSignal(grid, (data[:, d] + 1j * data[:, d + 1]).reshape(grid.shape))


def write_signal_binary(f, path):
    """Header ``<qqd`` (d, n, L) then little-endian float64 (re, im) pairs."""
    g = f.grid
    body = np.empty(f.values.size * 2, dtype="<f8")
    body[0::2] = f.values.real.ravel()
    body[1::2] = f.values.imag.ravel()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(g.d, g.n, g.half_extent))
        fh.write(body.tobytes())


def read_signal_binary(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    d, n, L = _HEADER.unpack_from(raw, 0)
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    grid = UniformGrid(int(n), float(L), int(d))
    if body.size != 2 * n**d:
        raise DomainError("binary signal body has the wrong length")
    return SampledSignal(grid, (body[0::2] + 1j * body[1::2]).reshape(grid.shape))
