"""Short-time Fourier transform, its adjoint and pointwise identities.

``V_phi u(x, xi) = int u(y) conj(phi(y - x)) exp(-i y xi) dy``.

Two evaluation paths exist.  The numeric path cuts the sampled signal into
windowed segments around each shift and applies one FFT per segment.  The
analytic path evaluates closed forms for the catalog distributions with
polynomial-Gaussian windows and works in log space, so phase-space points
far beyond any sampling grid are reachable.
"""

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal as sps

from .exceptions import ConditioningError, DomainError, NotSampleableError
from .grid import (
    Delta,
    GaussType,
    Sampled,
    SampledSignal,
    UniformGrid,
    _fwd_axis,
    fourier,
    sample,
)
from .windows import GaussWindow, gauss_poly_integral

__all__ = [
    "PhasePoint",
    "StftMatrix",
    "AnalyticStft",
    "analytic_stft",
    "phase_shift",
    "stft",
    "stft_at",
    "stft_adjoint",
    "invert",
    "stft_fourier_identity_check",
    "window_change_bound_check",
    "write_stft_binary",
    "read_stft_binary",
    "write_stft_csv",
    "write_heatmap",
    "DEFAULT_REACH",
]

# phase-space radius profiled on the closed-form path
DEFAULT_REACH = 3000.0


@dataclass(frozen=True)
class PhasePoint:
    """Point ``z = (x, xi)`` of phase space."""

    x: float
    xi: float


def phase_shift(phi, z):
    """``exp(i xi y) phi(y - x)`` on the grid of ``phi``.

    The shift snaps to the nearest node; ``meta['snap_offset']`` records the
    residual and ``meta['truncated']`` flags mass pushed off the grid.
    """
    if isinstance(phi, GaussWindow):
        return phi.shifted(z.x, z.xi)
    g = phi.grid
    if g.d != 1:
        raise DomainError("phase_shift is one-dimensional")
    s = int(np.rint(z.x / g.dx))
    offset = z.x - s * g.dx
    v = phi.values
    out = np.zeros_like(v)
    lost = 0.0
    if s >= 0:
        out[s:] = v[: g.n - s] if s < g.n else out[s:]
        lost = np.max(np.abs(v[g.n - s:]), initial=0.0) if s > 0 else 0.0
    else:
        out[:s] = v[-s:]
        lost = np.max(np.abs(v[:-s]), initial=0.0)
    out = out * np.exp(1j * z.xi * g.points)
    truncated = bool(lost > 1e-14 * max(np.max(np.abs(v)), 1e-300))
    return SampledSignal(g, out, {"snap_offset": float(offset), "truncated": truncated})


# analytic evaluator ----------------------------------------------------------


class AnalyticStft:
    """Closed-form STFT of a catalog distribution against a :class:`GaussWindow`.

    Values are returned split as ``exp(log_core) * factor`` where ``factor``
    is the polynomial part; :meth:`log_abs` never overflows.

    Parameters
    ----------
    u : Delta, GaussType or a catalog member with ``gauss_type()``
    window : GaussWindow
    reach : float
        Default phase-space radius for conic profiling.
    """

    source = "analytic"

    def __init__(self, u, window, reach=None):
        reach = DEFAULT_REACH if reach is None else reach
        if isinstance(u, (Sampled, SampledSignal)):
            raise DomainError("analytic path needs a catalog distribution")
        if not isinstance(window, GaussWindow):
            raise DomainError("analytic path needs an analytic window")
        self.u = u if isinstance(u, (Delta, GaussType)) else u.gauss_type()
        self.window = window
        self.reach = float(reach)

    @property
    def window_id(self):
        return self.window.window_id

    def with_window(self, window):
        return AnalyticStft(self.u, window, self.reach)

    def log_parts(self, x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        w = self.window
        s2 = w.sigma**2
        if isinstance(self.u, Delta):
            # V = A conj(phi(xbar - x)) exp(-i xbar xi)
            xb = self.u.center
            t = xb - x - w.center
            log_core = (
                np.log(complex(self.u.amplitude)) - t * t / (2 * s2)
                - 1j * w.freq * (xb - x) - 1j * xb * xi
            )
            factor = np.conj(w.poly(t))
            return np.broadcast_arrays(log_core, factor)
        al, be, ga = self.u.alpha, self.u.beta, self.u.gamma
        s = x + w.center
        a = al + 1 / (2 * s2)
        b = be - 2 * al * s - 1j * (w.freq + xi)
        c0 = -al * s * s + be * s + ga - 1j * w.freq * w.center - 1j * s * xi
        return gauss_poly_integral(a, b, c0, np.conj(w.coeffs))

    def values(self, x, xi):
        lc, f = self.log_parts(x, xi)
        with np.errstate(under="ignore"):
            return np.exp(lc) * f

    def log_abs(self, x, xi):
        lc, f = self.log_parts(x, xi)
        with np.errstate(divide="ignore"):
            return lc.real + np.log(np.abs(f))


def analytic_stft(u, window, reach=None):
    return AnalyticStft(u, window, reach)


# numeric STFT -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StftMatrix:
    """STFT samples on a product phase grid.

    Attributes
    ----------
    shifts, freqs : ndarray
        Phase-grid axes.
    values : ndarray, shape (len(shifts), len(freqs))
    grid : UniformGrid
        Grid of the analysed signal.
    window : GaussWindow or SampledSignal
    hop, half_support, nfft : int
        Segment layout used by the numeric path and its adjoint.
    source : {'numeric', 'analytic'}
    """

    shifts: np.ndarray
    freqs: np.ndarray
    values: np.ndarray
    grid: UniformGrid
    window: object
    hop: int = 1
    half_support: int = 0
    nfft: int = 0
    source: str = "numeric"
    meta: dict = field(default_factory=dict)

    @property
    def dshift(self):
        return self.hop * self.grid.dx

    @property
    def dxi(self):
        return 2 * np.pi / (self.nfft * self.grid.dx)

    @property
    def window_id(self):
        return _window_id(self.window)

    @property
    def cell(self):
        return self.dshift * self.dxi

    def log_abs(self):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.values))

    def with_values(self, values):
        return StftMatrix(self.shifts, self.freqs, np.asarray(values, dtype=complex),
                          self.grid, self.window, self.hop, self.half_support,
                          self.nfft, self.source, dict(self.meta))


def _window_id(window):
    if isinstance(window, GaussWindow):
        return window.window_id
    return f"sampled(n={window.grid.n},L={window.grid.half_extent:g})"


def _window_offsets(window, grid, J):
    t = (np.arange(2 * J) - J) * grid.dx
    if isinstance(window, GaussWindow):
        return window(t)
    if window.grid != grid:
        raise DomainError("sampled window must live on the signal grid")
    if J > grid.n // 2:
        raise DomainError("segment longer than the grid")
    c = grid.n // 2
    return window.values[c - J: c + J]


def _layout(grid, support, nfft, window):
    n = grid.n
    if support is None:
        J = n // 2
    else:
        J = min(int(np.ceil(support / grid.dx)), n // 2)
    M = 2 * J
    if nfft is None:
        nfft = 1 << int(np.ceil(np.log2(M)))
    if nfft < M:
        raise DomainError("nfft must cover the segment length")
    return J, int(nfft)


def _as_signal(u, grid, regularize=False):
    if isinstance(u, SampledSignal):
        return u
    if isinstance(u, Sampled):
        return u.signal
    if grid is None:
        raise DomainError("a grid is needed to sample a catalog distribution")
    return sample(u, grid, regularize=regularize)


def stft(u, window, grid=None, *, hop=1, support=None, nfft=None, method="auto",
         threads=1, regularize=False):
    """STFT on the phase grid (signal grid subsampled by ``hop``) x (FFT grid).

    Parameters
    ----------
    u : SampledSignal or catalog distribution
    window : GaussWindow or SampledSignal
        A sampled window is indexed with the origin at node ``n // 2``.
    grid : UniformGrid, optional
        Needed for catalog inputs.
    hop : int
        Shift step in grid nodes.
    support : float, optional
        Segment half length in x units; defaults to the whole grid, which
        makes the frequency axis the dual grid.
    nfft : int, optional
        FFT length, at least the segment length.
    method : {'auto', 'numeric', 'analytic'}
        ``'auto'`` takes the closed form for catalog inputs with an analytic
        window and samples otherwise.
    threads : int
        Worker threads over shift blocks; the output does not depend on it.

    Returns
    -------
    StftMatrix
    """
    sampled_input = isinstance(u, (SampledSignal, Sampled))
    if method == "auto":
        method = "numeric" if sampled_input or not isinstance(window, GaussWindow) else "analytic"
    if method == "analytic":
        if grid is None:
            raise DomainError("analytic STFT needs a grid to define the phase grid")
        J, nfft = _layout(grid, support, nfft, window)
        shifts = grid.points[::hop]
        freqs = 2 * np.pi / (nfft * grid.dx) * np.arange(-nfft // 2, nfft // 2)
        ev = AnalyticStft(u, window)
        vals = ev.values(shifts[:, None], freqs[None, :])
        return StftMatrix(shifts, freqs, vals, grid, window, hop, J, nfft, "analytic")
    if isinstance(u, Delta) and not regularize:
        raise NotSampleableError("Dirac mass on the numeric STFT path; use the analytic path")
    f = _as_signal(u, grid, regularize)
    g = f.grid
    if g.d != 1:
        raise DomainError("STFT is implemented for d = 1")
    J, nfft = _layout(g, support, nfft, window)
    M = 2 * J
    win = np.conj(_window_offsets(window, g, J))
    padded = np.concatenate([np.zeros(J, complex), f.values, np.zeros(J, complex)])
    segs = sliding_window_view(padded, M)[: g.n: hop]
    shifts = g.points[::hop]
    k = np.arange(-nfft // 2, nfft // 2)
    freqs = 2 * np.pi / (nfft * g.dx) * k
    ramp = np.exp(2j * np.pi * J * k / nfft)
    out = np.empty((segs.shape[0], nfft), dtype=complex)

    def work(lo, hi):
        spec = np.fft.fftshift(np.fft.fft(segs[lo:hi] * win, n=nfft, axis=1), axes=1)
        out[lo:hi] = g.dx * spec * ramp * np.exp(-1j * np.outer(shifts[lo:hi], freqs))

    _run_blocks(work, segs.shape[0], threads)
    return StftMatrix(shifts, freqs, out, g, window, hop, J, nfft, "numeric")


def _run_blocks(work, total, threads, block=256):
    edges = list(range(0, total, block)) + [total]
    pairs = list(zip(edges[:-1], edges[1:]))
    if threads <= 1:
        for lo, hi in pairs:
            work(lo, hi)
    else:
        with ThreadPoolExecutor(threads) as ex:
            list(ex.map(lambda p: work(*p), pairs))


def stft_at(u, window, x, xi, grid=None, regularize=False):
    """STFT on the product ``x`` times ``xi`` by direct quadrature.

    Analytic windows are evaluated at exact shifts; a sampled window needs
    shifts on grid nodes (snapped, offset recorded in the returned dict).

    Returns
    -------
    values : ndarray, shape (len(x), len(xi))
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if not isinstance(u, (SampledSignal, Sampled)) and isinstance(window, GaussWindow) \
            and (grid is None or isinstance(u, Delta) and not regularize):
        return AnalyticStft(u, window).values(x[:, None], xi[None, :])
    f = _as_signal(u, grid, regularize)
    g = f.grid
    y = g.points
    if isinstance(window, GaussWindow):
        W = np.conj(window(y[None, :] - x[:, None]))
    else:
        if window.grid != g:
            raise DomainError("sampled window must live on the signal grid")
        s = np.rint(x / g.dx).astype(int)
        if np.max(np.abs(x - s * g.dx), initial=0.0) > 1e-9 * g.dx:
            raise DomainError("sampled windows need shifts on grid nodes")
        c = g.n // 2
        idx = np.arange(g.n)[None, :] - s[:, None] + c
        ok = (idx >= 0) & (idx < g.n)
        W = np.where(ok, np.conj(window.values[np.clip(idx, 0, g.n - 1)]), 0.0)
    E = np.exp(-1j * np.outer(y, xi))
    return g.dx * ((W * f.values[None, :]) @ E)


def stft_adjoint(F, window=None, threads=1):
    """Adjoint ``V*_phi F(t) = sum F(x, xi) exp(i t xi) phi(t - x) dx dxi``.

    ``F`` must carry the segment layout of a numeric :class:`StftMatrix`;
    the adjoint is exact with respect to the quadrature inner products.
    """
    window = F.window if window is None else window
    g = F.grid
    J, nfft, hop = F.half_support, F.nfft, F.hop
    M = 2 * J
    win = _window_offsets(window, g, J)
    k = np.arange(-nfft // 2, nfft // 2)
    freqs = F.freqs
    ramp = np.exp(-2j * np.pi * J * k / nfft)
    shifts = F.shifts
    nsh = shifts.size
    out = np.zeros(g.n + M, dtype=complex)
    starts = np.arange(nsh) * hop  # index into padded signal

    def work(lo, hi):
        G = F.values[lo:hi] * np.exp(1j * np.outer(shifts[lo:hi], freqs)) * ramp
        seg = np.fft.ifft(np.fft.ifftshift(G, axes=1), axis=1)[:, :M] * nfft
        return lo, hi, seg * win[None, :]

    edges = list(range(0, nsh, 256)) + [nsh]
    for lo, hi in zip(edges[:-1], edges[1:]):
        _, _, seg = work(lo, hi)
        idx = (starts[lo:hi, None] + np.arange(M)[None, :]).ravel()
        vals = seg.ravel()
        out += np.bincount(idx, weights=vals.real, minlength=out.size) + 1j * np.bincount(
            idx, weights=vals.imag, minlength=out.size
        )
    res = out[J: J + g.n] * F.dshift * F.dxi
    return SampledSignal(g, res)


def invert(F, window=None, dual=None):
    """Reconstruct ``f`` from ``F = V_psi f`` via ``V*_gamma``.

    With ``dual=None`` the same window is used.  The normalization divides
    by ``2 pi <gamma, psi>`` where both windows are sampled on the segment.

    Raises
    ------
    ConditioningError
        If ``|<gamma, psi>|`` is below ``1e-8 |gamma| |psi|``.
    """
    psi = F.window if window is None else window
    gam = psi if dual is None else dual
    g = F.grid
    J = F.half_support
    a = _window_offsets(gam, g, J)
    b = _window_offsets(psi, g, J)
    ip = np.sum(a * np.conj(b)) * g.dx
    scale = np.sqrt(np.sum(np.abs(a) ** 2) * np.sum(np.abs(b) ** 2)) * g.dx
    if abs(ip) < 1e-8 * scale:
        raise ConditioningError("windows are numerically orthogonal")
    return stft_adjoint(F, gam) * (1 / (2 * np.pi * ip))


# identities -------------------------------------------------------------------


def stft_fourier_identity_check(f, window):
    """Max deviation between the 2-d Fourier transform of ``V_phi f`` and
    ``2 pi exp(i eta y) f(-y) conj(phi_hat(eta))`` on the grid."""
    g = f.grid
    V = stft(f, window, method="numeric")
    lhs = _fwd_axis(_fwd_axis(V.values, 0, g.dx), 1, V.dxi)
    eta = g.frequencies
    y = g.points
    fm = np.zeros(g.n, dtype=complex)
    fm[1:] = f.values[::-1][:-1]  # f(-y_j) = f(y_{n-j})
    if isinstance(window, GaussWindow):
        ph = window.fourier(eta)
    else:
        ph = fourier(window).values
    rhs = 2 * np.pi * np.exp(1j * np.outer(eta, y)) * np.conj(ph)[:, None] * fm[None, :]
    return float(np.max(np.abs(lhs - rhs)))


def _same_conv(A, K):
    # kernel origin sits at index (n//2, n//2)
    full = sps.fftconvolve(A, K, mode="full")
    i0, j0 = K.shape[0] // 2, K.shape[1] // 2
    return full[i0: i0 + A.shape[0], j0: j0 + A.shape[1]]


def window_change_bound_check(f, phi, psi, gamma, tol=1e-6, kernel_floor=1e-10):
    """Check ``|V_phi f| <= |<gamma, psi>|^-1 (2 pi)^-1 (|V_psi f| * |V_phi gamma|)``.

    The discrete convolution only sees the computed phase grid, so near its
    border the right side misses mass.  The comparison therefore runs on the
    interior, where the footprint of ``|V_phi gamma|`` above
    ``kernel_floor`` times its peak stays inside the grid.

    Returns
    -------
    dict
        ``lhs``, ``rhs`` arrays, the boolean ``interior`` mask, ``passed``
        flag and ``excess`` (largest interior ``lhs - rhs`` relative to
        ``max rhs``).
    """
    g = f.grid
    ga = gamma.sample(g) if isinstance(gamma, GaussWindow) else gamma
    ps = psi.sample(g) if isinstance(psi, GaussWindow) else psi
    ip = ga.inner(ps)
    if abs(ip) < 1e-8 * ga.norm() * ps.norm():
        raise ConditioningError("<gamma, psi> is numerically zero")
    Vf = stft(f, phi, method="numeric")
    Vpsi = stft(f, psi, method="numeric")
    Vg = stft(ga, phi, method="numeric")
    lhs = np.abs(Vf.values)
    kern = np.abs(Vg.values)
    rhs = _same_conv(np.abs(Vpsi.values), kern) * Vf.cell / (2 * np.pi * abs(ip))
    rhs = np.maximum(rhs, 0.0)  # FFT convolution roundoff
    big = kern >= kernel_floor * kern.max()
    X, XI = np.meshgrid(Vg.shifts, Vg.freqs, indexing="ij")
    rx = float(np.max(np.abs(X[big])))
    rxi = float(np.max(np.abs(XI[big])))
    xs, fs = Vf.shifts, Vf.freqs
    inner_x = (xs >= xs.min() + rx) & (xs <= xs.max() - rx)
    inner_f = (fs >= fs.min() + rxi) & (fs <= fs.max() - rxi)
    interior = inner_x[:, None] & inner_f[None, :]
    scale = max(float(rhs.max()), 1e-300)
    excess = float(np.max((lhs - rhs)[interior]) / scale) if interior.any() else -np.inf
    return {"lhs": lhs, "rhs": rhs, "interior": interior, "passed": bool(excess <= tol),
            "excess": excess}


# IO ---------------------------------------------------------------------------

_STFT_MAGIC = b"STFTMAT1"


def write_stft_binary(F, path):
    """Binary layout: magic, ``<qq`` sizes, shift axis, frequency axis, then
    interleaved little-endian float64 (re, im) values row by row."""
    body = np.empty(F.values.size * 2, dtype="<f8")
    body[0::2] = F.values.real.ravel()
    body[1::2] = F.values.imag.ravel()
    with open(path, "wb") as fh:
        fh.write(_STFT_MAGIC)
        fh.write(struct.pack("<qq", F.shifts.size, F.freqs.size))
        fh.write(np.asarray(F.shifts, dtype="<f8").tobytes())
        fh.write(np.asarray(F.freqs, dtype="<f8").tobytes())
        fh.write(body.tobytes())


def read_stft_binary(path):
    """Return ``(shifts, freqs, values)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != _STFT_MAGIC:
        raise DomainError("not an STFT matrix file")
    ns, nf = struct.unpack_from("<qq", raw, 8)
    off = 24
    shifts = np.frombuffer(raw, "<f8", ns, off)
    off += 8 * ns
    freqs = np.frombuffer(raw, "<f8", nf, off)
    off += 8 * nf
    body = np.frombuffer(raw, "<f8", 2 * ns * nf, off)
    return shifts.copy(), freqs.copy(), (body[0::2] + 1j * body[1::2]).reshape(ns, nf)


def _g17(x):
    return format(float(x), ".17g")


def write_stft_csv(F, path, log_modulus=False, floor=None):
    """Rows ``x, xi, re, im`` or ``x, xi, log_modulus``."""
    X, XI = np.meshgrid(F.shifts, F.freqs, indexing="ij")
    with open(path, "w", newline="\n") as fh:
        if log_modulus:
            lm = _floored_log(F, floor)
            fh.write("x,xi,log_modulus\n")
            for a, b, c in zip(X.ravel(), XI.ravel(), lm.ravel()):
                fh.write(f"{_g17(a)},{_g17(b)},{_g17(c)}\n")
        else:
            fh.write("x,xi,re,im\n")
            for a, b, v in zip(X.ravel(), XI.ravel(), F.values.ravel()):
                fh.write(f"{_g17(a)},{_g17(b)},{_g17(v.real)},{_g17(v.imag)}\n")


def _floored_log(F, floor=None):
    if floor is None:
        floor = 1e-280
    with np.errstate(divide="ignore"):
        return np.log(np.maximum(np.abs(F.values), floor))


def write_heatmap(F, path, floor=None):
    """8-bit PGM of the floored log modulus; rows are frequencies, top = max xi."""
    lm = _floored_log(F, floor)
    lo = np.log(1e-280 if floor is None else floor)
    hi = float(lm.max())
    if hi <= lo:
        img = np.zeros(lm.T.shape, dtype=np.uint8)
    else:
        img = np.rint(255 * (lm.T - lo) / (hi - lo)).clip(0, 255).astype(np.uint8)
    img = img[::-1]
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(img.tobytes())
