"""Gabor systems on separable lattices.

Analysis ``C_phi f = (<f, Pi(a0 k, b0 n) phi>)_{k,n}``, synthesis
``D_psi c = sum c_{kn} Pi(a0 k, b0 n) psi`` and the frame operator
``S = D_psi C_phi`` are evaluated as dense products of a shift block
``phi(y - a0 k)`` with a Fourier block ``exp(i y b0 n)``.  Sampled windows
(such as a computed dual) need ``a0`` to be a multiple of the grid spacing.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConvergenceError, DomainError
from .grid import Delta, SampledSignal, UniformGrid, sample
from .stft import AnalyticStft
from .windows import GaussWindow

__all__ = [
    "Lattice",
    "LatticeCoeffs",
    "GaborSystem",
    "FrameBounds",
    "analysis",
    "synthesis",
    "frame_operator",
    "frame_bounds",
    "dual_window",
    "reconstruction_error",
    "expand_distribution",
    "hermite_basis",
    "conjugate_gradient",
    "default_test_functions",
    "write_coeffs_csv",
]


@dataclass(frozen=True)
class Lattice:
    """Truncated separable lattice ``{(a0 k, b0 n): |k| <= kmax, |n| <= nmax}``."""

    a0: float = 1.0
    b0: float = 1.0
    kmax: int = 0
    nmax: int = 0

    def __post_init__(self):
        if not (self.a0 > 0 and self.b0 > 0):
            raise DomainError("lattice steps must be positive")
        if self.kmax < 0 or self.nmax < 0:
            raise DomainError("truncation bounds must be nonnegative")

    @classmethod
    def for_grid(cls, a0, b0, grid, window_radius=1.0):
        """Truncation ``|a0 k| <= L - 5 r`` and ``|b0 n| <= Xi - 5 / r``."""
        kx = int(np.floor((grid.half_extent - 5 * window_radius) / a0 + 1e-9))
        kn = int(np.floor((grid.nyquist - 5 / window_radius) / b0 + 1e-9))
        if kx < 0 or kn < 0:
            raise DomainError("grid too small for the window")
        return cls(float(a0), float(b0), kx, kn)

    @property
    def k(self):
        return np.arange(-self.kmax, self.kmax + 1)

    @property
    def n(self):
        return np.arange(-self.nmax, self.nmax + 1)

    @property
    def shape(self):
        return (2 * self.kmax + 1, 2 * self.nmax + 1)

    @property
    def density(self):
        return self.a0 * self.b0

    def to_dict(self):
        return {"a0": self.a0, "b0": self.b0, "kmax": self.kmax, "nmax": self.nmax}


@dataclass(frozen=True, eq=False)
class LatticeCoeffs:
    """Coefficients indexed ``(k + kmax, n + nmax)``."""

    lattice: Lattice
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.lattice.shape:
            raise DomainError("coefficient array does not match the lattice")
        object.__setattr__(self, "values", v)

    def at(self, k, n):
        return self.values[k + self.lattice.kmax, n + self.lattice.nmax]

    def norm2(self):
        return float(np.sum(np.abs(self.values) ** 2))


@dataclass(frozen=True)
class FrameBounds:
    """Extremal frame-operator eigenvalue estimates on a test subspace."""

    A: float
    B: float
    iterations: int
    residual: float
    status: str
    dim: int

    @property
    def ratio(self):
        return self.B / self.A if self.A > 0 else np.inf

    def to_dict(self):
        return {"A": self.A, "B": self.B, "ratio": self.ratio, "iterations": self.iterations,
                "residual": self.residual, "status": self.status, "subspace_dim": self.dim}


class GaborSystem:
    """Window, lattice and grid with cached shift and Fourier blocks.

    Parameters
    ----------
    window : GaussWindow or SampledSignal
    lattice : Lattice
    grid : UniformGrid
    """

    def __init__(self, window, lattice, grid):
        if grid.d != 1:
            raise DomainError("Gabor systems are implemented for d = 1")
        L, nyq = grid.half_extent, grid.nyquist
        if lattice.a0 * lattice.kmax > L * (1 + 1e-12) or lattice.b0 * lattice.nmax > nyq * (1 + 1e-12):
            raise DomainError("lattice exceeds the grid")
        self.window = window
        self.lattice = lattice
        self.grid = grid
        y = grid.points
        xk = lattice.a0 * lattice.k
        if isinstance(window, GaussWindow):
            self._W = window(y[None, :] - xk[:, None])
        else:
            if window.grid != grid:
                raise DomainError("sampled window must live on the system grid")
            step = lattice.a0 / grid.dx
            if abs(step - round(step)) > 1e-9:
                raise DomainError("sampled windows need a0 to be a multiple of the grid spacing")
            s = int(round(step)) * lattice.k
            idx = np.arange(grid.n)[None, :] - s[:, None]
            ok = (idx >= 0) & (idx < grid.n)
            self._W = np.where(ok, window.values[np.clip(idx, 0, grid.n - 1)], 0.0)
        self._E = np.exp(1j * np.outer(y, lattice.b0 * lattice.n))  # (n_grid, N)
        self.bounds = None

    def with_window(self, window):
        return GaborSystem(window, self.lattice, self.grid)

    def scaled(self, c):
        win = self.window.scaled(c) if isinstance(self.window, GaussWindow) else self.window * c
        return GaborSystem(win, self.lattice, self.grid)

    def window_norm2(self):
        if isinstance(self.window, GaussWindow):
            return self.window.norm2()
        return self.window.norm() ** 2

    # raw operators on arrays
    def _analysis(self, f):
        return self.grid.dx * ((np.conj(self._W) * f[None, :]) @ np.conj(self._E))

    def _synthesis(self, c):
        return np.sum(self._W * (c @ self._E.T), axis=0)


def analysis(g, f):
    """Coefficients ``<f, Pi(sigma) phi>`` by quadrature."""
    if f.grid != g.grid:
        raise DomainError("signal and system grids differ")
    return LatticeCoeffs(g.lattice, g._analysis(f.values))


def synthesis(g, c):
    """``sum_sigma c_sigma Pi(sigma) phi``."""
    return SampledSignal(g.grid, g._synthesis(c.values))


def frame_operator(g, f, dual=None):
    """``S f = D_dual C_phi f`` (``dual`` defaults to the system itself)."""
    h = g if dual is None else dual
    return SampledSignal(g.grid, h._synthesis(g._analysis(f.values)))


def hermite_basis(grid, dim, scale=1.0):
    """Orthonormal (grid inner product) Hermite functions ``h_0 .. h_{dim-1}``."""
    x = grid.points / scale
    H = np.empty((dim, grid.n))
    H[0] = np.pi ** -0.25 * np.exp(-x * x / 2)
    if dim > 1:
        H[1] = np.sqrt(2.0) * x * H[0]
    for k in range(2, dim):
        H[k] = np.sqrt(2.0 / k) * x * H[k - 1] - np.sqrt((k - 1) / k) * H[k - 2]
    Q, _ = np.linalg.qr(H.T * np.sqrt(grid.dx))
    return Q.T / np.sqrt(grid.dx)  # rows orthonormal w.r.t. dx * sum


def conjugate_gradient(apply, b, tol=1e-10, maxiter=1000, inner=np.vdot, x0=None):
    """Plain conjugate gradients for a Hermitian positive operator.

    Returns
    -------
    x : ndarray
    history : list of float
        Relative residual after each iteration.

    Raises
    ------
    ConvergenceError
        If the tolerance is not met, carrying the residual history.
    """
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - apply(x) if x0 is not None else b.copy()
    p = r.copy()
    rr = inner(r, r).real
    bn = np.sqrt(inner(b, b).real)
    hist = []
    if bn == 0:
        return x, [0.0]
    for _ in range(maxiter):
        Ap = apply(p)
        alpha = rr / inner(p, Ap).real
        x = x + alpha * p
        r = r - alpha * Ap
        rr_new = inner(r, r).real
        hist.append(float(np.sqrt(rr_new) / bn))
        if hist[-1] <= tol:
            return x, hist
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise ConvergenceError(f"CG stalled at relative residual {hist[-1]:.3e}", hist)


def _subspace_dim(g):
    lat = g.lattice
    rad = 1.0 if not isinstance(g.window, GaussWindow) else g.window.sigma
    ext = min(lat.a0 * lat.kmax - 4 * rad, lat.b0 * lat.nmax - 4 / rad)
    dim = int(((0.6 * ext) ** 2 - 1) / 2)
    return int(np.clip(dim, 4, 40))


def frame_bounds(g, dim=None, tol=1e-10, maxiter=2000, method="lanczos", store=True):
    """Estimate ``A`` and ``B`` as extremal eigenvalues of the compressed frame operator.

    The frame operator is compressed to the span of the first ``dim``
    Hermite functions, a phase-space disc well inside the truncated lattice,
    so grid-edge and lattice-edge effects cannot drive ``A`` to zero.

    Parameters
    ----------
    g : GaborSystem
    dim : int, optional
        Subspace dimension; chosen from the lattice extent by default.
    tol : float
        Relative eigenvalue tolerance.
    maxiter : int
    method : {'lanczos', 'power'}
        ``'lanczos'`` runs restarted Lanczos (ARPACK) on the matrix-free
        operator.  ``'power'`` runs plain power and inverse-power iteration,
        which stagnates on nearly tight frames.

    Returns
    -------
    FrameBounds
        ``status`` is ``'frame'`` or ``'not a frame (numerically)'`` when
        ``A < 1e-10 B``.

    Raises
    ------
    ConvergenceError
        If an iteration does not settle within ``maxiter`` steps.
    """
    dim = _subspace_dim(g) if dim is None else int(dim)
    Q = hermite_basis(g.grid, dim)
    dx = g.grid.dx

    def T(v):
        return dx * (Q @ g._synthesis(g._analysis(np.ravel(v) @ Q)))

    if method == "lanczos":
        lam_min, lam_max, its, res = _lanczos_extremes(T, dim, tol, maxiter)
    elif method == "power":
        lam_min, lam_max, its, res = _power_extremes(T, dim, tol, maxiter)
    else:
        raise DomainError(f"unknown eigenvalue method {method!r}")
    status = "frame" if lam_min >= 1e-10 * lam_max else "not a frame (numerically)"
    fb = FrameBounds(float(lam_min), float(lam_max), int(its), float(res), status, dim)
    if store:
        g.bounds = fb
    return fb


def _lanczos_extremes(T, dim, tol, maxiter):
    from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

    if dim <= 3:
        M = np.column_stack([T(e) for e in np.eye(dim)])
        ev, vecs = np.linalg.eigh(M)
        return ev[0], ev[-1], dim, 0.0
    count = [0]

    def mv(v):
        count[0] += 1
        return T(v)

    op = LinearOperator((dim, dim), matvec=mv, dtype=complex)
    v0 = np.ones(dim, dtype=complex) / np.sqrt(dim)
    out = []
    try:
        for which in ("SA", "LA"):
            w, V = eigsh(op, k=1, which=which, tol=tol, maxiter=maxiter, v0=v0)
            r = np.linalg.norm(T(V[:, 0]) - w[0] * V[:, 0]) / abs(w[0])
            out.append((w[0], r))
    except ArpackNoConvergence as exc:
        raise ConvergenceError(f"Lanczos did not converge: {exc}")
    (lo, r1), (hi, r2) = out
    return lo, hi, count[0], max(r1, r2)


def _power_extremes(T, dim, tol, maxiter):
    rng = np.random.default_rng(0)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    lam_old = np.inf
    hist = []
    for it in range(1, maxiter + 1):
        w = T(v)
        lam = np.vdot(v, w).real
        v = w / np.linalg.norm(w)
        hist.append(abs(lam - lam_old) / abs(lam))
        if hist[-1] <= tol:
            break
        lam_old = lam
    else:
        raise ConvergenceError("power iteration did not converge", hist)
    lam_max, its = lam, it
    res = np.linalg.norm(T(v) - lam_max * v) / lam_max
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    mu_old = np.inf
    hist = []
    for it in range(1, maxiter + 1):
        w, _ = conjugate_gradient(T, v, tol=1e-13, maxiter=50 * dim)
        mu = np.vdot(v, w).real
        v = w / np.linalg.norm(w)
        hist.append(abs(mu - mu_old) / abs(mu))
        if hist[-1] <= tol:
            break
        mu_old = mu
    else:
        raise ConvergenceError("inverse power iteration did not converge", hist)
    lam_min = 1.0 / mu
    res = max(res, np.linalg.norm(T(v) - lam_min * v) / lam_min)
    return lam_min, lam_max, its + it, res


def dual_window(g, tol=1e-10, maxiter=2000):
    """Canonical dual ``psi = S^-1 phi`` by conjugate gradients on the grid.

    Returns
    -------
    psi : SampledSignal
        ``meta['history']`` holds the residual history.
    """
    if g.bounds is not None and g.bounds.ratio >= 1e8:
        raise DomainError("frame too ill-conditioned for a dual window")
    phi = g.window.sample(g.grid) if isinstance(g.window, GaussWindow) else g.window
    # finite section on the lattice-covered region; outside it S is nearly singular
    mask = np.abs(g.grid.points) <= g.lattice.a0 * g.lattice.kmax + 1e-12
    S = lambda v: mask * g._synthesis(g._analysis(mask * v))
    psi, hist = conjugate_gradient(S, mask * phi.values.astype(complex), tol=tol, maxiter=maxiter)
    return SampledSignal(g.grid, psi, {"history": hist, "iterations": len(hist)})


def reconstruction_error(g, dual, f, symmetric=False):
    """Relative L2 error of ``D_dual C_phi f`` (or ``D_phi C_dual f``) on the inner half grid."""
    h = g.with_window(dual)
    if symmetric:
        rec = g._synthesis(h._analysis(f.values))
    else:
        rec = h._synthesis(g._analysis(f.values))
    y = g.grid.points
    inner = np.abs(y) <= g.grid.half_extent / 2
    den = np.linalg.norm(f.values[inner])
    return float(np.linalg.norm((rec - f.values)[inner]) / den) if den > 0 else 0.0


def default_test_functions(grid):
    """Five Gaussian test functions with varied centre, width and modulation."""
    specs = [(0.0, 0.0, 1.0), (1.0, 0.0, 1.0), (-0.5, 1.0, 0.8), (0.3, -1.5, 1.2), (0.0, 2.0, 1.0)]
    y = grid.points
    return [SampledSignal(grid, np.exp(-(y - c) ** 2 / (2 * s * s) + 1j * m * y))
            for c, m, s in specs]


def expand_distribution(u, g, dual, thetas=None, radius=15.0, tol=1e-5):
    """Check ``<u, theta> = sum_sigma <u, Pi(sigma) phi> <Pi(sigma) psi, theta>``.

    The lattice sum runs over ``|sigma| <= radius``; the coefficients of
    ``u`` come from the closed-form STFT when ``u`` is a catalog member.

    Returns
    -------
    dict
        ``coeffs`` (LatticeCoeffs of the disc, zero outside), ``lhs``,
        ``rhs``, ``deviation`` and the ``flagged`` truncation status.
    """
    grid = g.grid
    thetas = default_test_functions(grid) if thetas is None else thetas
    a0, b0 = g.lattice.a0, g.lattice.b0
    lat = Lattice(a0, b0, int(np.floor(radius / a0)), int(np.floor(radius / b0)))
    if lat.kmax * a0 > grid.half_extent or lat.nmax * b0 > grid.nyquist:
        raise DomainError("truncation radius exceeds the grid")
    X, XI = np.meshgrid(a0 * lat.k, b0 * lat.n, indexing="ij")
    disc = X * X + XI * XI <= radius * radius
    if isinstance(g.window, GaussWindow) and not isinstance(u, SampledSignal):
        c = AnalyticStft(u, g.window).values(X, XI)
    else:
        f = u if isinstance(u, SampledSignal) else sample(u, grid)
        c = GaborSystem(g.window, lat, grid)._analysis(f.values)
    c = np.where(disc, c, 0.0)
    hd = GaborSystem(dual, lat, grid)
    lhs, rhs = [], []
    for th in thetas:
        vt = hd._analysis(th.values)  # V_psi theta(sigma)
        rhs.append(complex(np.sum(c * np.conj(vt))))
        if isinstance(u, Delta):
            j, off = grid.index_of(u.center)
            val = np.conj(np.interp(u.center, grid.points, th.values.real)
                          + 1j * np.interp(u.center, grid.points, th.values.imag))
            lhs.append(complex(u.amplitude * val))
        else:
            f = u if isinstance(u, SampledSignal) else sample(u, grid)
            lhs.append(f.inner(th))
    lhs, rhs = np.array(lhs), np.array(rhs)
    dev = float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0
    return {"coeffs": LatticeCoeffs(lat, c), "lhs": lhs, "rhs": rhs, "deviation": dev,
            "flagged": dev > tol}


def write_coeffs_csv(c, path):
    from ._io import g17

    lat = c.lattice
    with open(path, "w", newline="\n") as fh:
        fh.write("k,n,re,im\n")
        for i, k in enumerate(lat.k):
            for j, n in enumerate(lat.n):
                v = c.values[i, j]
                fh.write(f"{k},{n},{g17(v.real)},{g17(v.imag)}\n")
