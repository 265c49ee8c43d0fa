"""Kohn-Nirenberg operators, their STFT kernels, polynomial operators and
localization operators, with wave-front containment checks.
"""

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import linprog

from .exceptions import ConfigError, CostError, DomainError, GrowthError, RangeError
from .grid import (
    Delta,
    GaussType,
    Sampled,
    SampledSignal,
    UniformGrid,
    fourier,
    inverse_fourier,
    sample,
)
from .modspace import _fornberg
from .stft import DEFAULT_REACH, AnalyticStft, StftMatrix, stft, stft_adjoint
from .wavefront import ConePartition, numeric_source, wfs_cone
from .weights import eval_omega, young_conjugate
from .windows import GaussWindow

__all__ = [
    "smooth_step",
    "Symbol",
    "ConstSymbol",
    "PolynomialSymbol",
    "ConeCutoff",
    "Bump",
    "GaussBump",
    "SampledSymbol",
    "FunctionSymbol",
    "symbol_from_dict",
    "kn_apply",
    "SymbolClassReport",
    "symbol_class_check",
    "conesupp",
    "KernelTensor",
    "kn_kernel",
    "fit_kernel_decay",
    "write_kernel_binary",
    "read_kernel_binary",
    "wf_containment_check",
    "poly_apply",
    "PolyStft",
    "stft_poly_expand",
    "poly_path_agreement",
    "poly_wf_check",
    "fit_growth",
    "localization_apply",
    "localization_wf_check",
]

MAX_POLY_ORDER = 6
MAX_KERNEL_POINTS = 32**4


def smooth_step(t):
    """Gevrey-smooth step: 0 for ``t <= 0``, 1 for ``t >= 1``."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1 / np.where(t > 0, t, 1)), 0.0)
        b = np.where(t < 1, np.exp(-1 / np.where(t < 1, 1 - t, 1)), 0.0)
    return a / (a + b)


# symbols ------------------------------------------------------------------------


class Symbol:
    """Base class: ``evaluate(x, xi)`` broadcasts over arrays."""

    order = 0.0
    kind = "symbol"

    def evaluate(self, x, xi):
        raise NotImplementedError

    def __call__(self, x, xi):
        return self.evaluate(x, xi)

    def conj(self):
        return FunctionSymbol(lambda x, xi: np.conj(self.evaluate(x, xi)), self.order,
                              f"conj({self.kind})")

    def to_dict(self):
        raise DomainError(f"{self.kind} symbols are not serializable")

    def check_grid(self, grid):
        """Validate resolution requirements against a signal grid."""


@dataclass(frozen=True)
class PolynomialSymbol(Symbol):
    """``a(x, xi) = sum c[alpha, beta] x**alpha xi**beta``.

    ``coeffs`` maps ``(alpha, beta)`` to a complex coefficient.  The
    quantization is the operator ``sum c x**alpha D**beta``.
    """

    coeffs: tuple = ((0, 0, 1.0),)
    kind = "polynomial"

    def __post_init__(self):
        items = self.coeffs.items() if isinstance(self.coeffs, dict) else [
            ((int(c[0]), int(c[1])), c[2]) for c in self.coeffs]
        norm = tuple(sorted((int(a), int(b), complex(c)) for (a, b), c in items))
        if any(a < 0 or b < 0 for a, b, _ in norm):
            raise ConfigError("polynomial exponents must be nonnegative", "coeffs")
        object.__setattr__(self, "coeffs", norm)

    @property
    def degree(self):
        return max((a + b for a, b, c in self.coeffs if c != 0), default=0)

    @property
    def order(self):
        return float(max((b for a, b, c in self.coeffs if c != 0), default=0))

    def evaluate(self, x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(np.broadcast(x, xi).shape, dtype=complex)
        for a, b, c in self.coeffs:
            out = out + c * x**a * xi**b
        return out

    def to_dict(self):
        return {"kind": "polynomial",
                "coeffs": [[a, b, c.real, c.imag] for a, b, c in self.coeffs]}


def ConstSymbol(value=1.0):
    """The constant symbol, i.e. a multiple of the identity."""
    return PolynomialSymbol(((0, 0, value),))


def _unit(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise ConfigError("cone direction must be nonzero", "directions")
    return tuple(v / n)


@dataclass(frozen=True)
class ConeCutoff(Symbol):
    """Smooth cutoff to a union of phase-space cones outside a ball.

    ``a = S_ang(theta) S_rad(r)``: the angular factor is 1 within
    ``half_angle`` of a cone axis and 0 beyond ``half_angle + angular_width``;
    the radial factor rises from 0 at ``radius`` to 1 at ``radius + width``.

    Parameters
    ----------
    directions : sequence of (x, xi) vectors
        Cone axes; include both signs for a two-sided cone.
    half_angle, angular_width : float
        Radians.
    radius, width : float
        Radial transition; ``width`` must exceed twice the grid spacing.
    """

    directions: tuple = ((0.0, 1.0), (0.0, -1.0))
    half_angle: float = 0.05
    angular_width: float = 0.05
    radius: float = 2.0
    width: float = 2.0
    kind = "cone_cutoff"

    def __post_init__(self):
        object.__setattr__(self, "directions", tuple(_unit(d) for d in self.directions))
        if not self.width > 0 or not self.angular_width > 0:
            raise ConfigError("transition widths must be positive", "width")

    @property
    def angles(self):
        return np.array([np.arctan2(d[1], d[0]) for d in self.directions])

    def evaluate(self, x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        r = np.hypot(x, xi)
        th = np.arctan2(xi, x)
        ang = np.zeros(np.shape(r))
        for c in self.angles:
            dist = np.abs((th - c + np.pi) % (2 * np.pi) - np.pi)
            ang = np.maximum(ang, smooth_step((self.half_angle + self.angular_width - dist)
                                              / self.angular_width))
        return (ang * smooth_step((r - self.radius) / self.width)).astype(complex)

    def check_grid(self, grid):
        if self.width <= 2 * grid.dx:
            raise ConfigError(f"cone cutoff transition width {self.width:g} must exceed "
                              f"2 dx = {2 * grid.dx:g}", "width")

    def to_dict(self):
        return {"kind": "cone_cutoff", "directions": [list(d) for d in self.directions],
                "half_angle": self.half_angle, "angular_width": self.angular_width,
                "radius": self.radius, "width": self.width}


@dataclass(frozen=True)
class Bump(Symbol):
    """Compactly supported smooth bump: 1 on ``|z - c| <= plateau``, 0 beyond ``radius``."""

    center: tuple = (0.0, 0.0)
    radius: float = 4.0
    plateau: float = 0.0
    kind = "bump"

    def __post_init__(self):
        if not 0 <= self.plateau < self.radius:
            raise ConfigError("need 0 <= plateau < radius", "plateau")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def evaluate(self, x, xi):
        r = np.hypot(np.asarray(x, float) - self.center[0], np.asarray(xi, float) - self.center[1])
        t = (r - self.plateau) / (self.radius - self.plateau)
        return (1 - smooth_step(t)).astype(complex)

    def to_dict(self):
        return {"kind": "bump", "center": list(self.center), "radius": self.radius,
                "plateau": self.plateau}


@dataclass(frozen=True)
class GaussBump(Symbol):
    """``exp(-|z - c|**2 / (2 width**2))`` on phase space."""

    center: tuple = (0.0, 0.0)
    width: float = 2.0
    kind = "gauss_bump"

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.width > 0:
            raise ConfigError("width must be positive", "width")

    def evaluate(self, x, xi):
        r2 = (np.asarray(x, float) - self.center[0]) ** 2 + (np.asarray(xi, float) - self.center[1]) ** 2
        return np.exp(-r2 / (2 * self.width**2)).astype(complex)

    def to_dict(self):
        return {"kind": "gauss_bump", "center": list(self.center), "width": self.width}


@dataclass(frozen=True, eq=False)
class SampledSymbol(Symbol):
    """Symbol tabulated on a product grid, bilinear in between, zero outside."""

    x: np.ndarray
    xi: np.ndarray
    values: np.ndarray
    order: float = 0.0
    kind = "sampled"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if not np.all(np.isfinite(v)):
            raise DomainError("sampled symbol has non-finite values")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "x", np.asarray(self.x, float))
        object.__setattr__(self, "xi", np.asarray(self.xi, float))

    def evaluate(self, x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
        pts = np.stack([x.ravel(), xi.ravel()], axis=1)
        kw = {"bounds_error": False, "fill_value": 0.0}
        re = RegularGridInterpolator((self.x, self.xi), self.values.real, **kw)(pts)
        im = RegularGridInterpolator((self.x, self.xi), self.values.imag, **kw)(pts)
        return (re + 1j * im).reshape(x.shape)

    @classmethod
    def from_symbol(cls, a, x, xi):
        X, XI = np.meshgrid(x, xi, indexing="ij")
        return cls(x, xi, a.evaluate(X, XI), getattr(a, "order", 0.0))


@dataclass(frozen=True, eq=False)
class FunctionSymbol(Symbol):
    """Arbitrary callable symbol (not serializable)."""

    fn: object
    order: float = 0.0
    label: str = "function"
    kind = "function"

    def evaluate(self, x, xi):
        with np.errstate(over="ignore", invalid="ignore"):
            return np.asarray(self.fn(np.asarray(x, float), np.asarray(xi, float)), dtype=complex)


def symbol_from_dict(d):
    """Build a symbol from a JSON descriptor (``kind`` plus fields)."""
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError("symbol descriptor needs a 'kind'", "symbol.kind")
    kind = d["kind"]
    try:
        if kind == "identity":
            return ConstSymbol(1.0)
        if kind == "polynomial":
            return PolynomialSymbol(tuple((c[0], c[1], complex(c[2], c[3] if len(c) > 3 else 0.0))
                                          for c in d["coeffs"]))
        if kind == "cone_cutoff":
            kw = {k: d[k] for k in ("half_angle", "angular_width", "radius", "width") if k in d}
            if "directions" in d:
                kw["directions"] = tuple(tuple(v) for v in d["directions"])
            return ConeCutoff(**kw)
        if kind == "bump":
            return Bump(tuple(d.get("center", (0.0, 0.0))), float(d["radius"]),
                        float(d.get("plateau", 0.0)))
        if kind == "gauss_bump":
            return GaussBump(tuple(d.get("center", (0.0, 0.0))), float(d["width"]))
    except KeyError as exc:
        raise ConfigError(f"symbol field {exc.args[0]!r} missing", f"symbol.{exc.args[0]}")
    raise ConfigError(f"unknown symbol kind {kind!r}", "symbol.kind")


# Kohn-Nirenberg quantization -------------------------------------------------------


def _blocks(total, size):
    edges = list(range(0, total, size)) + [total]
    return list(zip(edges[:-1], edges[1:]))


def _map(fn, pairs, threads):
    if threads <= 1:
        return [fn(*p) for p in pairs]
    with ThreadPoolExecutor(threads) as ex:
        return list(ex.map(lambda p: fn(*p), pairs))


def _symbol_block(a, x, xi):
    with np.errstate(over="ignore", invalid="ignore"):
        v = a.evaluate(x[:, None], xi[None, :])
    if not np.all(np.isfinite(v)):
        raise RangeError("symbol overflows on the grid; rescale it or evaluate "
                         "its logarithm instead", max_usable=np.inf)
    return v


def kn_apply(a, f, threads=1, block=256):
    """``a(x, D) f (x) = (2 pi)^-1 sum e^{i x xi} a(x, xi) f^(xi) dxi``.

    Rows are computed in blocks over ``x``; the result does not depend on
    ``threads``.

    Raises
    ------
    RangeError
        If the symbol overflows on the phase grid.
    """
    g = f.grid
    if g.d != 1:
        raise DomainError("operators are implemented for d = 1")
    a.check_grid(g)
    x, xi = g.points, g.frequencies
    F = fourier(f).values
    out = np.empty(g.n, dtype=complex)
    scale = g.dxi / (2 * np.pi)

    def work(lo, hi):
        A = _symbol_block(a, x[lo:hi], xi)
        E = np.exp(1j * np.outer(x[lo:hi], xi))
        out[lo:hi] = (E * A) @ F * scale

    _map(work, _blocks(g.n, block), threads)
    if not np.all(np.isfinite(out)):
        raise RangeError("operator output overflowed", max_usable=np.inf)
    return SampledSignal(g, out, {"operator": a.kind})


# symbol classes ------------------------------------------------------------------------


@dataclass
class SymbolClassReport:
    """Least constants ``C[i, j]`` for ``(lams[i], mus[j])`` at two box sizes."""

    lams: tuple
    mus: tuple
    constants: np.ndarray
    constants_half: np.ndarray
    extent: float
    K: int
    passed: bool
    growth: float

    def to_dict(self):
        return {"lambdas": list(self.lams), "mus": list(self.mus),
                "constants": self.constants.tolist(),
                "constants_half_extent": self.constants_half.tolist(),
                "extent": self.extent, "K": self.K, "passed": self.passed,
                "growth": self.growth}


def _fd_axis(v, k, h, axis, half):
    if k == 0:
        return v
    wts = _fornberg(np.arange(-half, half + 1), k) / h**k
    return np.apply_along_axis(lambda r: np.convolve(r, wts[::-1], mode="same"), axis, v)


def _log_constants(a, m, w, K, E, h, lams, mus):
    half = K // 2 + 4
    x = np.arange(-E, E + h / 2, h)
    X, XI = np.meshgrid(x, x, indexing="ij")
    with np.errstate(over="ignore", invalid="ignore"):
        A = a.evaluate(X, XI)
    if not np.all(np.isfinite(A)):
        return np.full((len(lams), len(mus)), np.inf)
    cut = slice(half * 2, -half * 2)
    mw = m * eval_omega(w, np.abs(x[cut]))[None, :]
    best = np.full((len(lams), len(mus)), -np.inf)
    for al in range(K + 1):
        Ax = _fd_axis(A, al, h, 0, half)
        for be in range(K + 1 - al):
            D = _fd_axis(Ax, be, h, 1, half)[cut, cut]
            with np.errstate(divide="ignore"):
                top = float(np.max(np.log(np.abs(D)) - mw))
            for i, lam in enumerate(lams):
                for j, mu in enumerate(mus):
                    c = top - lam * young_conjugate(w, al / lam) - mu * young_conjugate(w, be / mu)
                    best[i, j] = max(best[i, j], c)
    return best


def symbol_class_check(a, m, w, K=4, extent=8.0, h=0.1, lams=(0.5, 1.0, 2.0),
                       mus=(0.5, 1.0, 2.0), growth_tol=0.05):
    """Least constants in the symbol estimates, fitted on two box sizes.

    Derivatives come from centred finite differences on the box
    ``[-E, E]^2``; the least constant is the maximum of
    ``|d_x^alpha d_xi^beta a| exp(-lam phi*(alpha/lam) - mu phi*(beta/mu) - m omega(xi))``.
    The check passes when every constant is finite and doubling ``E``
    changes none of them by more than ``growth_tol`` (relative).

    Returns
    -------
    SymbolClassReport
        ``constants`` are those on the larger box.
    """
    lams, mus = tuple(lams), tuple(mus)
    small = _log_constants(a, m, w, K, extent, h, lams, mus)
    large = _log_constants(a, m, w, K, 2 * extent, h, lams, mus)
    finite = bool(np.all(np.isfinite(large)) and np.all(np.isfinite(small)))
    growth = float(np.max(large - small)) if finite else np.inf
    passed = finite and growth <= np.log1p(growth_tol)
    return SymbolClassReport(lams, mus, np.exp(large), np.exp(small), float(extent), int(K),
                             bool(passed), growth)


# conic support --------------------------------------------------------------------------


def conesupp(a, partition=None, reach=None, grid=None, r_min=4.0, n_annuli=12,
             per_bin=32, per_annulus=16, eps=1e-12):
    """Direction bins where ``|a| > eps max|a|`` meets the outermost annulus.

    The annuli are those of the wave-front profile; ``reach`` defaults to
    the square phase box of ``grid`` (or ``DEFAULT_REACH`` without a grid).

    Returns
    -------
    set of int
    """
    partition = partition or ConePartition()
    if reach is None:
        reach = min(grid.half_extent, grid.nyquist) if grid is not None else DEFAULT_REACH
    edges = np.geomspace(r_min, 0.9 * reach, n_annuli + 1)
    th = (np.arange(partition.nbins * per_bin) + 0.5) * (2 * np.pi / (partition.nbins * per_bin))
    r = np.linspace(edges[-2], edges[-1], per_annulus)
    R, T = np.meshgrid(r, th, indexing="ij")
    with np.errstate(over="ignore", invalid="ignore"):
        outer = np.abs(a.evaluate(R * np.cos(T), R * np.sin(T)))
    # reference maximum over the whole disc
    rr = np.linspace(0, edges[-1], 4 * per_annulus)
    R2, T2 = np.meshgrid(rr, th[::per_bin // 4 or 1], indexing="ij")
    with np.errstate(over="ignore", invalid="ignore"):
        ref = np.abs(a.evaluate(R2 * np.cos(T2), R2 * np.sin(T2)))
    top = max(float(np.nanmax(ref)), float(np.nanmax(outer)))
    if top == 0:
        return set()
    hit = np.any(outer > eps * top, axis=0)
    bins = set()
    for k, ok in partition.memberships(th[hit]):
        bins.update(int(b) for b in k[ok])
    return bins


# STFT kernel ------------------------------------------------------------------------------


@dataclass
class KernelTensor:
    """``K(y', eta', y, eta)`` on four coarse axes."""

    y_out: np.ndarray
    eta_out: np.ndarray
    y_in: np.ndarray
    eta_in: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def cell_in(self):
        dy = self.y_in[1] - self.y_in[0] if self.y_in.size > 1 else 1.0
        de = self.eta_in[1] - self.eta_in[0] if self.eta_in.size > 1 else 1.0
        return float(dy * de)

    def apply(self, V):
        """``int K(z', z) V(z) dz`` by the rectangle rule on the input axes."""
        return np.einsum("abcd,cd->ab", self.values, V) * self.cell_in

    def __add__(self, other):
        return KernelTensor(self.y_out, self.eta_out, self.y_in, self.eta_in,
                            self.values + other.values, dict(self.meta))


def kn_kernel(a, window, y_out, eta_out, y_in, eta_in, grid=None, threads=1):
    """STFT matrix kernel of ``a(x, D)`` by direct quadrature on the fine grid.

    ``K(z', z) = (2 pi)^-2 e^{i y eta} sum_x sum_xi e^{i(x xi - y xi - x eta')}
    a(x, xi) phi^(xi - eta) conj(phi(x - y')) dx dxi``; for a unit-norm
    window ``V_phi(a(x,D) u)(z') = int K(z', z) V_phi u(z) dz``.

    Raises
    ------
    CostError
        If the output would exceed ``32**4`` points.
    """
    axes = [np.atleast_1d(np.asarray(v, float)) for v in (y_out, eta_out, y_in, eta_in)]
    total = int(np.prod([v.size for v in axes]))
    if total > MAX_KERNEL_POINTS:
        raise CostError(f"kernel with {total} points exceeds the limit of {MAX_KERNEL_POINTS}")
    if not isinstance(window, GaussWindow):
        raise DomainError("the kernel needs an analytic window")
    grid = UniformGrid.default() if grid is None else grid
    a.check_grid(grid)
    yo, eo, yi, ei = axes
    x, xi = grid.points, grid.frequencies
    A = _symbol_block(a, x, xi) * np.exp(1j * np.outer(x, xi))
    Y, E = np.meshgrid(yi, ei, indexing="ij")
    Y, E = Y.ravel(), E.ravel()
    B = np.exp(-1j * np.outer(xi, Y)) * window.fourier(xi[:, None] - E[None, :]) * grid.dxi
    AB = A @ B  # (n_x, N_in)
    Yo, Eo = np.meshgrid(yo, eo, indexing="ij")
    Yo, Eo = Yo.ravel(), Eo.ravel()
    out = np.empty((Yo.size, Y.size), dtype=complex)

    def work(lo, hi):
        C = np.conj(window(x[None, :] - Yo[lo:hi, None])) * np.exp(
            -1j * np.outer(Eo[lo:hi], x)) * grid.dx
        out[lo:hi] = C @ AB

    _map(work, _blocks(Yo.size, 128), threads)
    out *= np.exp(1j * Y * E)[None, :] / (2 * np.pi) ** 2
    vals = out.reshape(yo.size, eo.size, yi.size, ei.size)
    return KernelTensor(yo, eo, yi, ei, vals, {"grid": grid.to_dict(), "window": window.window_id,
                                               "symbol": a.kind})


_KERNEL_MAGIC = b"KNKERNL1"


def write_kernel_binary(KT, path):
    """Binary: magic, four int64 sizes, the four axes, then interleaved values."""
    with open(path, "wb") as fh:
        fh.write(_KERNEL_MAGIC)
        axes = (KT.y_out, KT.eta_out, KT.y_in, KT.eta_in)
        fh.write(struct.pack("<4q", *(v.size for v in axes)))
        for v in axes:
            fh.write(np.asarray(v, "<f8").tobytes())
        fh.write(np.ascontiguousarray(KT.values).astype("<c16").tobytes())


def read_kernel_binary(path):
    with open(path, "rb") as fh:
        if fh.read(8) != _KERNEL_MAGIC:
            raise DomainError("not a kernel file")
        sizes = struct.unpack("<4q", fh.read(32))
        axes = [np.frombuffer(fh.read(8 * s), "<f8").copy() for s in sizes]
        vals = np.frombuffer(fh.read(), "<c16").reshape(sizes).copy()
    return KernelTensor(*axes, vals)


def _envelope_fit(t, feats):
    """Least upper bound ``t <= c - sum lam_j f_j`` minimising the total gap."""
    n, k = feats.shape
    # variables: c, lam_1..lam_k; constraint -c + sum lam_j f_ij <= -t_i
    A = np.hstack([-np.ones((n, 1)), feats])
    cost = np.concatenate([[n], -feats.sum(axis=0)])
    res = linprog(cost, A_ub=A, b_ub=-t, bounds=[(None, None)] * (k + 1), method="highs")
    if res.status != 0:
        return np.nan, np.full(k, np.nan)
    return float(res.x[0]), res.x[1:]


def fit_kernel_decay(KT, w, m=0.0, cone=None, rel_floor=1e-13):
    """Fit decay exponents of ``|K|`` as an upper envelope (linear program).

    Without ``cone`` the model is
    ``log|K| <= log C - l1 w(|y - y'|) - l2 w(|eta - eta'|) + m w(|eta'|)``.
    With ``cone = (partition, bins)`` only outputs ``z'`` in those bins are
    used and two more terms ``- l3 w(|y'|) - l4 w(|eta'|)`` are fitted.

    Returns
    -------
    dict
        ``log_C`` and ``exponents`` (2 or 4 values).
    """
    V = np.abs(KT.values)
    top = V.max()
    if top == 0:
        return {"log_C": -np.inf, "exponents": [np.inf, np.inf]}
    YO, EO, YI, EI = np.meshgrid(KT.y_out, KT.eta_out, KT.y_in, KT.eta_in, indexing="ij")
    keep = V > rel_floor * top
    if cone is not None:
        part, bins = cone
        th = np.arctan2(EO, YO)
        inside = np.zeros(V.shape, bool)
        for k, ok in part.memberships(th):
            inside |= ok & np.isin(k, list(bins))
        keep &= inside & (np.hypot(YO, EO) > 0)
    t = np.log(V[keep]) - m * eval_omega(w, np.abs(EO[keep]))
    f = [eval_omega(w, np.abs(YI - YO)[keep]), eval_omega(w, np.abs(EI - EO)[keep])]
    if cone is not None:
        f += [eval_omega(w, np.abs(YO[keep])), eval_omega(w, np.abs(EO[keep]))]
    F = np.stack(f, axis=1)
    # only the largest value per distinct feature row matters for the envelope
    key, inv = np.unique(np.round(F, 10), axis=0, return_inverse=True)
    tm = np.full(key.shape[0], -np.inf)
    np.maximum.at(tm, inv.ravel(), t)
    c, lam = _envelope_fit(tm, key)
    return {"log_C": c, "exponents": [float(v) for v in lam], "points": int(key.shape[0])}


# containment checks --------------------------------------------------------------------------


def _sampled(u, grid):
    if isinstance(u, SampledSignal):
        return u
    return sample(u, grid, regularize=True)


def _dilated_subset(est_bins, allowed, partition, k=2):
    dil = partition.dilate(allowed, k)
    off = sorted(set(est_bins) - dil)
    return not off, off


def wf_containment_check(a, u, window, w, partition=None, grid=None, lambda_reg=None,
                         threads=1):
    """Check that the WF estimate of ``a(x, D) u`` lies in ``conesupp(a)`` dilated by 2.

    Returns
    -------
    dict
        ``contained``, ``offending`` bins, ``singular`` bins of the output
        and the ``conesupp`` bins.
    """
    partition = partition or ConePartition()
    grid = UniformGrid.square(4096) if grid is None else grid
    v = kn_apply(a, _sampled(u, grid), threads=threads)
    est = wfs_cone(v, window, w, partition, lambda_reg, threads=threads)
    cs = conesupp(a, partition, grid=grid)
    ok, off = _dilated_subset(est.singular_bins, cs, partition)
    return {"contained": ok, "offending": off, "singular": sorted(est.singular_bins),
            "conesupp": sorted(cs), "estimate": est}


# polynomial operators ------------------------------------------------------------------------


def _as_poly(A):
    P = A if isinstance(A, PolynomialSymbol) else PolynomialSymbol(A)
    if P.degree > MAX_POLY_ORDER:
        raise DomainError(f"polynomial order {P.degree} exceeds {MAX_POLY_ORDER}")
    return P


def _gauss_derivative_polys(u, bmax):
    """``D^b exp(q) = P_b(y) exp(q)`` with ``q = -alpha y^2 + beta y + gamma``."""
    from numpy.polynomial import Polynomial

    dq = Polynomial([u.beta, -2 * u.alpha])
    P = [Polynomial([1.0 + 0j])]
    for _ in range(bmax):
        p = P[-1]
        P.append(-1j * (p.deriv() + p * dq))
    return P


def poly_apply(A, u, grid=None):
    """``sum c x^alpha D^beta u`` on the grid.

    Catalog Gaussian-type inputs are differentiated in closed form; sampled
    inputs (and regularized Dirac masses) spectrally.
    """
    P = _as_poly(A)
    if isinstance(u, SampledSignal) or isinstance(u, (Sampled, Delta)):
        f = _sampled(u, grid) if not isinstance(u, Sampled) else u.signal
        g = f.grid
        F = fourier(f)
        x, xi = g.points, g.frequencies
        out = np.zeros(g.n, dtype=complex)
        for a, b, c in P.coeffs:
            db = f.values if b == 0 else inverse_fourier(F.with_values(xi**b * F.values), g).values
            out += c * x**a * db
        return SampledSignal(g, out, dict(f.meta))
    if grid is None:
        raise DomainError("a grid is needed to sample the result")
    gt = u if isinstance(u, GaussType) else u.gauss_type()
    base = sample(gt, grid).values
    x = grid.points
    polys = _gauss_derivative_polys(gt, max(b for _, b, _ in P.coeffs))
    out = np.zeros(grid.n, dtype=complex)
    for a, b, c in P.coeffs:
        out += c * x**a * polys[b](x) * base
    return SampledSignal(grid, out)


def _expansion_terms(P, window):
    """``(c', p, q, window')`` with ``V_phi(A u) = sum c' y^p eta^q V_{window'} u``."""
    terms = []
    for a, b, c in P.coeffs:
        for nu in range(a + 1):
            wn = window.times_x(nu)
            for mu in range(b + 1):
                terms.append((c * comb(a, nu) * comb(b, mu), a - nu, b - mu, wn.derivative(mu)))
    return terms


class PolyStft:
    """Closed-form ``V_phi(A u)`` for a polynomial operator and a catalog input.

    All derived windows share the Gaussian of ``phi`` and hence the log core
    of the closed form; only the polynomial factors are combined.  Where the
    combination cancels below ``1e-12`` of the sum of term moduli the value
    is set to zero.
    """

    source = "analytic"
    CANCEL = 1e-12

    def __init__(self, A, u, window, reach=None):
        reach = DEFAULT_REACH if reach is None else reach
        self.P = _as_poly(A)
        self.window = window
        self.reach = float(reach)
        self.terms = [(c, p, q, AnalyticStft(u, wv)) for c, p, q, wv in
                      _expansion_terms(self.P, window)]
        self.base = AnalyticStft(u, window)

    @property
    def window_id(self):
        return self.window.window_id

    def log_parts(self, x, xi):
        x = np.asarray(x, float)
        xi = np.asarray(xi, float)
        core, _ = self.base.log_parts(x, xi)
        tot = np.zeros(np.broadcast(x, xi).shape, dtype=complex)
        mag = np.zeros(tot.shape)
        for c, p, q, ev in self.terms:
            _, fac = ev.log_parts(x, xi)
            term = c * x**p * xi**q * fac
            tot = tot + term
            mag = mag + np.abs(term)
        tot = np.where(np.abs(tot) <= self.CANCEL * mag, 0.0, tot)
        return np.broadcast_to(core, tot.shape), tot

    def values(self, x, xi):
        lc, f = self.log_parts(x, xi)
        with np.errstate(under="ignore"):
            return np.exp(lc) * f

    def log_abs(self, x, xi):
        lc, f = self.log_parts(x, xi)
        with np.errstate(divide="ignore"):
            return lc.real + np.log(np.abs(f))


def stft_poly_expand(A, u, window, grid=None, **stft_kw):
    """``V_phi(A u)`` from the expansion over derived windows.

    With a catalog input and an analytic window the closed form is
    evaluated on the phase grid of ``stft(..., grid)``; otherwise each
    ``V_{D^mu phi_nu} u`` is computed numerically with the same layout.

    Returns
    -------
    StftMatrix
    """
    P = _as_poly(A)
    if not isinstance(window, GaussWindow):
        raise DomainError("derived windows need an analytic window")
    catalog = not isinstance(u, (SampledSignal, Sampled))
    if catalog and not isinstance(u, Delta) and grid is not None and not stft_kw.get("numeric"):
        ref = stft(u, window, grid, method="analytic", **stft_kw)
        vals = PolyStft(P, u, window).values(ref.shifts[:, None], ref.freqs[None, :])
        return ref.with_values(vals)
    stft_kw.pop("numeric", None)
    f = _sampled(u, grid) if not isinstance(u, Sampled) else u.signal
    total = None
    for c, p, q, wv in _expansion_terms(P, window):
        V = stft(f, wv, method="numeric", **stft_kw)
        term = c * V.shifts[:, None] ** p * V.freqs[None, :] ** q * V.values
        total = term if total is None else total + term
        ref = V
    out = stft(f, window, method="numeric", **stft_kw)
    return out.with_values(total)


def poly_path_agreement(A, u, window, grid):
    """Sup deviations between ``stft(poly_apply(A, u))`` and the expansion.

    Both the closed-form and the numeric expansion are compared on the box
    ``|x| <= L - k sigma``, ``|xi| <= Xi - k / sigma`` (``k`` from a 1e-12
    window floor) where grid truncation cannot reach.  Deviations are
    relative to the largest modulus of ``V(A u)`` there, or of ``V u`` when
    ``A u`` vanishes.

    Returns
    -------
    dict
        ``analytic`` and ``numeric`` relative deviations (``analytic`` is
        ``None`` for sampled inputs or Dirac masses).
    """
    P = _as_poly(A)
    ref = stft(poly_apply(P, u, grid), window, method="numeric")
    k = np.sqrt(2 * np.log(1e12))
    s = window.sigma
    box = ((np.abs(ref.shifts)[:, None] <= grid.half_extent - k * s)
           & (np.abs(ref.freqs)[None, :] <= grid.nyquist - k / s))
    scale = np.max(np.abs(ref.values[box]))
    f = _sampled(u, grid) if not isinstance(u, Sampled) else u.signal
    if scale == 0:
        scale = np.max(np.abs(stft(f, window, method="numeric").values[box]))
    out = {"analytic": None}
    if not isinstance(u, (SampledSignal, Sampled, Delta)):
        an = stft_poly_expand(P, u, window, grid)
        out["analytic"] = float(np.max(np.abs(an.values - ref.values)[box]) / scale)
    nu = stft_poly_expand(P, f, window)
    out["numeric"] = float(np.max(np.abs(nu.values - ref.values)[box]) / scale)
    return out


def poly_wf_check(A, u, window, w, partition=None, grid=None, lambda_reg=None):
    """Check ``WF(A u)`` within ``WF(u)`` dilated by 2 bins.

    Catalog inputs with ``grid=None`` use the closed forms at ``DEFAULT_REACH``;
    otherwise both estimates come from sampled signals on ``grid``.
    """
    partition = partition or ConePartition()
    P = _as_poly(A)
    if grid is None and not isinstance(u, (SampledSignal, Sampled)):
        est_u = wfs_cone(u, window, w, partition, lambda_reg)
        est_a = wfs_cone(PolyStft(P, u, window), window, w, partition, lambda_reg)
    else:
        f = _sampled(u, grid) if not isinstance(u, Sampled) else u.signal
        est_u = wfs_cone(f, window, w, partition, lambda_reg)
        est_a = wfs_cone(poly_apply(P, f), window, w, partition, lambda_reg)
    ok, off = _dilated_subset(est_a.singular_bins, est_u.singular_bins, partition)
    return {"contained": ok, "offending": off, "singular_u": sorted(est_u.singular_bins),
            "singular_Au": sorted(est_a.singular_bins)}


# localization operators -----------------------------------------------------------------------


def fit_growth(a, w, shifts, freqs, r_min=1.0):
    """Smallest ``tau`` with ``|a(z)| <= C exp(tau omega(|z|))`` on the phase grid,
    ``C = max_{|z| <= r_min} |a|``; ``-inf`` when ``a`` vanishes outside that disc."""
    X, XI = np.meshgrid(shifts, freqs, indexing="ij")
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        la = np.log(np.abs(a.evaluate(X, XI)))
    if np.any(np.isnan(la)) or np.any(np.isposinf(la)):
        return np.inf
    R = np.hypot(X, XI)
    inner = R <= r_min
    c = float(np.max(la[inner])) if inner.any() else 0.0
    c = max(c, 0.0)
    outer = ~inner
    if not outer.any():
        return -np.inf
    om = eval_omega(w, R[outer])
    with np.errstate(invalid="ignore"):
        slopes = (la[outer] - c) / om
    return float(np.max(slopes))


def _loc_layout(f, psi, gamma):
    rad = max(psi.radius(1e-16), gamma.radius(1e-16))
    g = f.grid
    J = min(int(np.ceil(rad / g.dx)), g.n // 2)
    nfft = 1 << int(np.ceil(np.log2(2 * J)))
    hop = max(1, int(round(2 * np.pi / (nfft * g.dx) / g.dx)))
    return {"hop": hop, "support": J * g.dx, "nfft": nfft}


def localization_apply(a, psi, gamma, f, w=None, tau=1.0, threads=1):
    """``L f = V*_gamma (a V_psi f)``.

    Parameters
    ----------
    a : Symbol
        Phase-space symbol.
    psi, gamma : GaussWindow
    f : SampledSignal
    w : WeightFunction, optional
        With a weight the growth ``|a| <= C exp(tau omega)`` is checked.
    tau : float
        Largest accepted growth exponent.

    Raises
    ------
    GrowthError
        When the fitted growth exponent exceeds ``tau``.
    """
    lay = _loc_layout(f, psi, gamma)
    V = stft(f, psi, method="numeric", threads=threads, **lay)
    if w is not None:
        t = fit_growth(a, w, V.shifts, V.freqs)
        if not t <= tau + 1e-12:
            raise GrowthError(f"symbol grows with fitted exponent {t:g} > {tau:g}", t)
    A = _symbol_block(a, V.shifts, V.freqs)
    out = stft_adjoint(V.with_values(A * V.values), gamma, threads=threads)
    out.meta.update(f.meta)
    return out


def localization_wf_check(a, psi, gamma, u, w, partition=None, grid=None, window=None,
                          lambda_reg=None, tau=1.0):
    """Check ``WF(L u)`` within ``WF(u)`` dilated by 2 bins (numeric path)."""
    partition = partition or ConePartition()
    grid = UniformGrid.square(4096) if grid is None else grid
    window = psi if window is None else window
    f = _sampled(u, grid)
    out = localization_apply(a, psi, gamma, f, w=w, tau=tau)
    est_u = wfs_cone(f, window, w, partition, lambda_reg)
    est_l = wfs_cone(out, window, w, partition, lambda_reg)
    ok, off = _dilated_subset(est_l.singular_bins, est_u.singular_bins, partition)
    return {"contained": ok, "offending": off, "singular_u": sorted(est_u.singular_bins),
            "singular_Lu": sorted(est_l.singular_bins)}
