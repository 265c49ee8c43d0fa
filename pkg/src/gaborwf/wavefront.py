"""Wave front set estimation by conic and lattice-restricted decay profiling.

Phase space (d = 1) is cut into ``nbins`` equiangular direction bins with
overlapping apertures and into geometric annuli.  For every bin the maximal
``log|V_phi u|`` per annulus is regressed against ``omega(r)``; the negated
slope is the fitted decay rate.  Bins whose rate stays below ``lambda_reg``
are singular.

On a finite grid only rates up to ``log(1/floor) / omega(R_max)`` can be
observed, so ``lambda_reg`` is a policy threshold (half of that maximum by
default), not a quantity fixed by the theory.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError
from .grid import Delta, GaussType, Sampled, SampledSignal, UniformGrid
from .stft import AnalyticStft, PhasePoint, StftMatrix, phase_shift, stft, stft_at
from .weights import eval_omega
from .windows import GaussWindow

__all__ = [
    "ConePartition",
    "DecayProfile",
    "WfsEstimate",
    "decay_profile",
    "wfs_cone",
    "wfs_lattice",
    "compare_cone_lattice",
    "is_schwartz_omega",
    "invariance_check",
    "window_independence_check",
    "numeric_source",
    "fourier_decay_exponent",
    "THRESHOLD_POLICY",
]

THRESHOLD_POLICY = "lambda_reg is an artifact policy: half the largest rate observable on the grid"

ANALYTIC_FLOOR = 1e-280
NUMERIC_REL_FLOOR = 1e-12


@dataclass(frozen=True)
class ConePartition:
    """Equiangular direction bins on the unit circle of phase space.

    Bin ``k`` is centred at ``2 pi k / nbins`` and contains every direction
    within ``(0.5 + overlap)`` bin widths of its centre.
    """

    nbins: int = 180
    overlap: float = 0.5
    d: int = 1

    def __post_init__(self):
        if self.d != 1:
            raise DomainError("cone partitions are implemented for d = 1")
        if int(self.nbins) < 4:
            raise DomainError("need at least 4 bins")
        if not 0 <= self.overlap < 2:
            raise DomainError("overlap must lie in [0, 2)")

    @property
    def width(self):
        return 2 * np.pi / self.nbins

    @property
    def half_aperture(self):
        return (0.5 + self.overlap) * self.width

    @property
    def centers(self):
        return self.width * np.arange(self.nbins)

    def directions(self):
        c = self.centers
        return np.stack([np.cos(c), np.sin(c)], axis=1)

    def angular_distance(self, theta, k):
        diff = np.asarray(theta) - self.width * np.asarray(k)
        return np.abs((diff + np.pi) % (2 * np.pi) - np.pi)

    def memberships(self, theta):
        """Yield ``(bin_index_array, mask)`` pairs covering every membership."""
        theta = np.asarray(theta, dtype=float)
        w = self.width
        tol = self.half_aperture * (1 + 1e-12)
        # apertures are arcs, so each direction lies in a contiguous run of bins
        lo = np.ceil((theta - tol) / w)
        hi = np.floor((theta + tol) / w)
        k0 = np.rint(theta / w)
        m = int(np.ceil(self.half_aperture / w))
        for j in range(-m, m + 1):
            k = k0 + j
            yield k.astype(np.int64) % self.nbins, (k >= lo) & (k <= hi)

    def bins_containing(self, direction):
        """Bins whose aperture contains a direction (vector or angle)."""
        th = float(np.arctan2(direction[1], direction[0])) if np.ndim(direction) else float(direction)
        return sorted({int(k[()]) for k, ok in self.memberships(np.array(th)) if ok})

    def dilate(self, bins, k):
        out = set()
        for b in bins:
            out.update((b + j) % self.nbins for j in range(-k, k + 1))
        return out

    def bin_distance(self, a, b):
        d = abs(int(a) - int(b)) % self.nbins
        return min(d, self.nbins - d)

    def to_dict(self):
        return {"nbins": self.nbins, "overlap": self.overlap, "d": self.d}


@dataclass(frozen=True, eq=False)
class DecayProfile:
    """Per bin and annulus suprema of ``log|V|`` with fitted decay rates.

    Attributes
    ----------
    edges : ndarray
        Annulus edges (``n_annuli + 1`` values).
    sup_log : ndarray, shape (nbins, n_annuli)
        ``-inf`` where a cell holds no sample.
    counts : ndarray of int
    floored : ndarray of bool
        Cell maximum below the floor.
    rates : ndarray
        Negated slope of ``sup_log`` against ``omega(r_inner)`` over the
        outer ``n_fit`` annuli; ``inf`` when indeterminate.
    status : ndarray of str
        ``'fitted'`` or ``'indeterminate-fast-decay'``.
    undersampled : ndarray of bool
        Some outer cell holds fewer than ``min_count`` samples.
    """

    partition: ConePartition
    weight: object
    edges: np.ndarray
    sup_log: np.ndarray
    counts: np.ndarray
    floored: np.ndarray
    rates: np.ndarray
    status: np.ndarray
    undersampled: np.ndarray
    reach: float
    floor_log: float
    log_max: float
    n_fit: int
    meta: dict = field(default_factory=dict)

    @property
    def radii(self):
        return self.edges[:-1]

    @property
    def max_rate(self):
        """Largest rate observable: dynamic range over ``omega(reach)``."""
        om = float(eval_omega(self.weight, self.reach))
        return (self.log_max - self.floor_log) / om if om > 0 else np.inf

    def default_threshold(self):
        return 0.5 * self.max_rate

    def singular_bins(self, lambda_reg):
        fitted = self.status == "fitted"
        return tuple(int(k) for k in np.nonzero(fitted & (self.rates < lambda_reg))[0])


class _Accumulator:
    def __init__(self, partition, edges):
        self.p = partition
        self.edges = edges
        na = edges.size - 1
        self.sup = np.full(partition.nbins * na, -np.inf)
        self.cnt = np.zeros(partition.nbins * na, dtype=np.int64)
        self.log_max = -np.inf

    def add(self, x, xi, logv):
        x = np.ravel(x)
        xi = np.ravel(xi)
        logv = np.ravel(logv)
        if logv.size:
            self.log_max = max(self.log_max, float(np.max(logv)))
        r = np.hypot(x, xi)
        a = np.searchsorted(self.edges, r, side="right") - 1
        na = self.edges.size - 1
        keep = (a >= 0) & (a < na)
        # the outer edge itself belongs to the last annulus
        keep |= r == self.edges[-1]
        a = np.minimum(a, na - 1)
        th = np.arctan2(xi[keep], x[keep])
        a, lv = a[keep], logv[keep]
        # points sharing (first bin, run length, annulus) share all memberships:
        # reduce over those keys once, then spread to the bins
        p = self.p
        nb = p.nbins
        tol = p.half_aperture * (1 + 1e-12)
        lo = np.ceil((th - tol) / p.width).astype(np.int64)
        span = np.floor((th + tol) / p.width).astype(np.int64) - lo
        ns = int(span.max()) + 1 if span.size else 1
        key = ((lo % nb) * ns + span) * na + a
        size = nb * ns * na
        sup = np.full(size, -np.inf)
        np.maximum.at(sup, key, lv)
        cnt = np.bincount(key, minlength=size)
        used = np.nonzero(cnt)[0]
        ua = used % na
        us = (used // na) % ns
        ul = used // (na * ns)
        for j in range(ns):
            m = us >= j
            idx = ((ul[m] + j) % nb) * na + ua[m]
            np.maximum.at(self.sup, idx, sup[used[m]])
            np.add.at(self.cnt, idx, cnt[used[m]])


def _finish(acc, weight, reach, floor_log, n_fit, min_count, meta):
    p = acc.p
    na = acc.edges.size - 1
    sup = acc.sup.reshape(p.nbins, na)
    cnt = acc.cnt.reshape(p.nbins, na)
    floored = (cnt > 0) & (sup < floor_log)
    om = np.asarray(eval_omega(weight, acc.edges[:-1]))
    rates = np.full(p.nbins, np.inf)
    status = np.full(p.nbins, "indeterminate-fast-decay", dtype=object)
    outer = slice(na - n_fit, na)
    usable = (cnt[:, outer] > 0) & ~floored[:, outer]
    under = np.any(cnt[:, outer] < min_count, axis=1)
    xo = om[outer]
    for k in range(p.nbins):
        u = usable[k]
        if u.sum() < 4:
            continue
        xs, ys = xo[u], sup[k, outer][u]
        slope = np.polyfit(xs, ys, 1)[0]
        rates[k] = -slope
        status[k] = "fitted"
    return DecayProfile(p, weight, acc.edges, sup, cnt, floored, rates, status.astype(str),
                        under, float(reach), float(floor_log), float(acc.log_max), n_fit, meta)


def _edges(reach, r_min, n_annuli):
    r_out = 0.9 * reach
    if r_out <= r_min * 1.5:
        raise DomainError(f"phase-space reach {reach:g} too small for annuli from r={r_min:g}")
    return np.geomspace(r_min, r_out, n_annuli + 1)


def _window_sigma(window):
    if isinstance(window, GaussWindow):
        return window.sigma
    g = window.grid
    p = np.abs(window.values) ** 2
    c = np.sum(g.points * p) / np.sum(p)
    return float(np.sqrt(2 * np.sum((g.points - c) ** 2 * p) / np.sum(p)))


def numeric_reach(F, rel_floor=NUMERIC_REL_FLOOR):
    """Usable phase-space radius of a numeric STFT matrix.

    The window's footprint at the floor level is removed from both the
    shift range and the frequency range, so truncation at the grid edge
    cannot masquerade as a singularity.
    """
    s = _window_sigma(F.window)
    k = np.sqrt(2 * np.log(1 / rel_floor))
    xr = min(-F.shifts.min(), F.shifts.max()) - k * s
    fr = min(-F.freqs.min(), F.freqs.max()) - k / s
    return float(min(xr, fr))


def numeric_source(f, window, hop=None, threads=1):
    """STFT of a sampled signal with segment length fitted to the window.

    The hop is chosen so that shift and frequency spacings are about equal.
    """
    g = f.grid
    if isinstance(window, GaussWindow):
        rad = window.radius(1e-16)
    else:
        rad = 9 * _window_sigma(window)
    J = min(int(np.ceil(rad / g.dx)), g.n // 2)
    nfft = 1 << int(np.ceil(np.log2(2 * J)))
    if hop is None:
        dxi = 2 * np.pi / (nfft * g.dx)
        hop = max(1, int(round(dxi / g.dx)))
    return stft(f, window, hop=hop, support=J * g.dx, nfft=nfft, method="numeric",
                threads=threads)


def _profile_matrix(F, partition, weight, r_min, n_annuli, n_fit, floor, reach):
    if F.source == "numeric":
        reach = numeric_reach(F) if reach is None else reach
    else:
        reach = min(-F.shifts.min(), F.freqs.max()) if reach is None else reach
    edges = _edges(reach, r_min, n_annuli)
    lv = F.log_abs()
    log_max = float(np.max(lv))
    if floor is None:
        if F.source == "numeric":
            floor_log = log_max + np.log(NUMERIC_REL_FLOOR) if np.isfinite(log_max) else 0.0
        else:
            floor_log = np.log(ANALYTIC_FLOOR)
    else:
        floor_log = np.log(floor)
    acc = _Accumulator(partition, edges)
    X, XI = np.meshgrid(F.shifts, F.freqs, indexing="ij")
    acc.add(X, XI, lv)
    acc.log_max = log_max
    meta = {"source": F.source, "window": F.window_id, "floor_kind": "relative" if F.source == "numeric" and floor is None else "absolute"}
    return _finish(acc, weight, reach, floor_log, n_fit, 1, meta)


def _profile_analytic(ev, partition, weight, r_min, n_annuli, n_fit, floor, reach,
                      per_bin=32, per_annulus=16):
    reach = ev.reach if reach is None else reach
    edges = _edges(reach, r_min, n_annuli)
    th = np.arange(partition.nbins * per_bin) * (2 * np.pi / (partition.nbins * per_bin))
    acc = _Accumulator(partition, edges)
    for j in range(n_annuli):
        r = np.geomspace(edges[j], edges[j + 1], per_annulus + 1)[:-1]
        R, T = np.meshgrid(r, th, indexing="ij")
        lv = ev.log_abs(R * np.cos(T), R * np.sin(T))
        acc.add(R * np.cos(T), R * np.sin(T), lv)
    floor_log = np.log(ANALYTIC_FLOOR if floor is None else floor)
    # dynamic range is measured from the largest modulus on the whole plane
    acc.log_max = max(acc.log_max, _analytic_peak(ev))
    meta = {"source": "analytic", "window": ev.window_id, "floor_kind": "absolute"}
    return _finish(acc, weight, reach, floor_log, n_fit, 1, meta)


def _analytic_peak(ev, r=12.0, num=241):
    x = np.linspace(-r, r, num)
    X, XI = np.meshgrid(x, x, indexing="ij")
    return float(np.max(ev.log_abs(X, XI)))


def decay_profile(source, partition=None, weight=None, *, r_min=4.0, n_annuli=12,
                  n_fit=6, floor=None, reach=None):
    """Conic decay profile of an STFT.

    Parameters
    ----------
    source : StftMatrix or AnalyticStft
        A numeric matrix is profiled on its own samples with a floor relative
        to its maximum (``1e-12``); an analytic evaluator is sampled on a polar
        grid with an absolute floor (``1e-280``).
    partition : ConePartition
    weight : WeightFunction
    r_min : float
        Inner radius of the first annulus.
    n_annuli, n_fit : int
        Number of geometric annuli up to ``0.9 reach`` and of outer annuli
        used in the regression.
    floor : float, optional
        Absolute floor overriding the defaults.
    reach : float, optional
        Phase-space radius ``R_max``.

    Returns
    -------
    DecayProfile
    """
    partition = partition or ConePartition()
    if weight is None:
        raise DomainError("a weight function is required")
    if n_fit > n_annuli or n_fit < 4:
        raise DomainError("need 4 <= n_fit <= n_annuli")
    if isinstance(source, StftMatrix):
        return _profile_matrix(source, partition, weight, r_min, n_annuli, n_fit, floor, reach)
    return _profile_analytic(source, partition, weight, r_min, n_annuli, n_fit, floor, reach)


@dataclass(frozen=True, eq=False)
class WfsEstimate:
    """Estimated singular direction bins."""

    singular_bins: tuple
    nbins: int
    threshold: float
    method: str
    weight: str
    window_id: str
    profile: DecayProfile

    @property
    def rates(self):
        return self.profile.rates

    def as_set(self):
        return set(self.singular_bins)

    def to_dict(self):
        rates = [None if not np.isfinite(r) else float(r) for r in self.profile.rates]
        return {
            "bins": [int(b) for b in self.singular_bins],
            "nbins": int(self.nbins),
            "threshold": float(self.threshold),
            "rates": rates,
            "status": [str(s) for s in self.profile.status],
            "method": self.method,
            "weight": self.weight,
            "window": self.window_id,
            "reach": self.profile.reach,
            "max_rate": self.profile.max_rate,
            "threshold_policy": THRESHOLD_POLICY,
        }

    def polar_rows(self):
        sing = self.as_set()
        c = self.profile.partition.centers
        return [(float(c[k]), float(self.profile.rates[k]), int(k in sing))
                for k in range(self.nbins)]


def _source(u, window, grid=None, reach=None, regularize=True, threads=1):
    if isinstance(u, StftMatrix) or (hasattr(u, "log_abs") and hasattr(u, "reach")):
        return u  # precomputed matrix or closed-form evaluator
    if isinstance(u, (SampledSignal, Sampled)):
        f = u if isinstance(u, SampledSignal) else u.signal
        return numeric_source(f, window, threads=threads)
    analytic = isinstance(u, Delta) or hasattr(u, "gauss_type")
    if isinstance(window, GaussWindow) and grid is None and analytic:
        return AnalyticStft(u, window, reach)
    if grid is None:
        if analytic:
            raise DomainError("sampled windows need a grid for catalog inputs")
        grid = UniformGrid.square(4096)
    from .grid import sample

    return numeric_source(sample(u, grid, regularize=regularize), window, threads=threads)


def _estimate(profile, lambda_reg, method, weight, window_id):
    lam = profile.default_threshold() if lambda_reg is None else float(lambda_reg)
    return WfsEstimate(profile.singular_bins(lam), profile.partition.nbins, lam, method,
                       weight.label, window_id, profile)


def wfs_cone(u, window, weight, partition=None, lambda_reg=None, *, grid=None, reach=None,
             floor=None, n_annuli=12, n_fit=6, r_min=4.0, threads=1):
    """Conic estimate of the wave front set.

    ``u`` may be a sampled signal (numeric path), a catalog distribution with
    an analytic window (closed-form path, ``reach`` defaults to 3000) or a
    precomputed STFT source.
    """
    src = _source(u, window, grid, reach, threads=threads)
    prof = decay_profile(src, partition, weight, r_min=r_min, n_annuli=n_annuli, n_fit=n_fit,
                         floor=floor, reach=reach if isinstance(src, StftMatrix) else None)
    return _estimate(prof, lambda_reg, "cone", weight, src.window_id)


def _lattice_steps(lattice):
    if isinstance(lattice, (tuple, list)):
        return float(lattice[0]), float(lattice[1])
    return float(lattice.a0), float(lattice.b0)


def wfs_lattice(u, window, lattice, weight, partition=None, lambda_reg=None, *, grid=None,
                reach=None, floor=None, n_annuli=12, n_fit=6, r_min=4.0, min_count=3):
    """Lattice-restricted estimate: the same classifier on ``V(a0 k, b0 n)``.

    Bins whose outer cells hold fewer than ``min_count`` lattice points are
    flagged in ``profile.undersampled``.
    """
    partition = partition or ConePartition()
    a0, b0 = _lattice_steps(lattice)
    src = _source(u, window, grid, reach)
    if not isinstance(src, StftMatrix):
        R = src.reach if reach is None else reach
        edges = _edges(R, r_min, n_annuli)
        acc = _Accumulator(partition, edges)
        r_out = edges[-1]
        K = int(np.floor(r_out / a0))
        N = int(np.floor(r_out / b0))
        xi = b0 * np.arange(-N, N + 1)
        for k0 in range(-K, K + 1, 64):
            x = a0 * np.arange(k0, min(k0 + 64, K + 1))
            X, XI = np.meshgrid(x, xi, indexing="ij")
            m = (X * X + XI * XI <= r_out * r_out) & (X * X + XI * XI >= r_min * r_min)
            acc.add(X[m], XI[m], src.log_abs(X[m], XI[m]))
        acc.log_max = max(acc.log_max, _analytic_peak(src))
        floor_log = np.log(ANALYTIC_FLOOR if floor is None else floor)
        meta = {"source": "analytic", "lattice": [a0, b0]}
    else:
        F = src
        R = numeric_reach(F) if reach is None else reach
        edges = _edges(R, r_min, n_annuli)
        r_out = edges[-1]
        K = int(np.floor(r_out / a0))
        N = int(np.floor(r_out / b0))
        x = a0 * np.arange(-K, K + 1)
        xi = b0 * np.arange(-N, N + 1)
        f = u if isinstance(u, SampledSignal) else u.signal if isinstance(u, Sampled) else None
        if f is None:
            from .grid import sample

            f = sample(u, grid, regularize=True)
        V = stft_at(f, window, x, xi)
        with np.errstate(divide="ignore"):
            lv = np.log(np.abs(V))
        X, XI = np.meshgrid(x, xi, indexing="ij")
        acc = _Accumulator(partition, edges)
        acc.add(X, XI, lv)
        # floor relative to the same maximum as the cone path
        log_max = float(np.max(F.log_abs()))
        acc.log_max = log_max
        floor_log = log_max + np.log(NUMERIC_REL_FLOOR) if floor is None else np.log(floor)
        meta = {"source": "numeric", "lattice": [a0, b0]}
    prof = _finish(acc, weight, R, floor_log, n_fit, min_count, meta)
    return _estimate(prof, lambda_reg, "lattice", weight, src.window_id)


def compare_cone_lattice(u, window, lattice, weight, partition=None, lambda_reg=None, **kw):
    """Size of the symmetric difference between cone and lattice estimates.

    Both estimates use the same reach, floor and threshold.
    """
    a = wfs_cone(u, window, weight, partition, lambda_reg, **kw)
    lam = a.threshold if lambda_reg is None else lambda_reg
    b = wfs_lattice(u, window, lattice, weight, partition, lam, **kw)
    return len(a.as_set() ^ b.as_set()), a, b


def is_schwartz_omega(u, window, weight, lambda_reg=None, partition=None, **kw):
    """``(in_class, global_rate)`` from the conic profile.

    ``in_class`` is true exactly when the conic estimate has no singular
    bin; ``global_rate`` is the smallest fitted rate (``inf`` if every bin
    decays beyond the floor).
    """
    est = wfs_cone(u, window, weight, partition, lambda_reg, **kw)
    rates = est.profile.rates
    return len(est.singular_bins) == 0, float(np.min(rates)), est


def invariance_check(u, window, z0, weight, partition=None, lambda_reg=None, **kw):
    """Symmetric difference between estimates for ``u`` and ``Pi(z0) u``."""
    z0 = z0 if isinstance(z0, PhasePoint) else PhasePoint(*z0)
    if isinstance(u, SampledSignal):
        v = phase_shift(u, z0)
    elif isinstance(u, Sampled):
        v = phase_shift(u.signal, z0)
    else:
        v = u.shifted(z0.x, z0.xi)
    a = wfs_cone(u, window, weight, partition, lambda_reg, **kw)
    lam = a.threshold if lambda_reg is None else lambda_reg
    b = wfs_cone(v, window, weight, partition, lam, **kw)
    return len(a.as_set() ^ b.as_set()), a, b


def window_independence_check(u, phi, psi, weight, partition=None, lambda_reg=None, **kw):
    """Symmetric difference between estimates with two windows."""
    a = wfs_cone(u, phi, weight, partition, lambda_reg, **kw)
    b = wfs_cone(u, psi, weight, partition, lambda_reg, **kw)
    return len(a.as_set() ^ b.as_set()), a, b


def write_estimate_json(est, path):
    from ._io import dumps

    with open(path, "w") as fh:
        fh.write(dumps(est.to_dict()))


def write_polar_csv(est, path):
    from ._io import g17

    with open(path, "w", newline="\n") as fh:
        fh.write("angle,rate,singular_flag\n")
        for a, r, s in est.polar_rows():
            fh.write(f"{g17(a)},{g17(r) if np.isfinite(r) else 'inf'},{s}\n")


def fourier_decay_exponent(f, xi_min=5.0, rel_floor=1e-12):
    """Fit ``|f_hat(xi)| ~ exp(-c |xi|**p)`` on the envelope of the spectrum.

    The envelope at ``xi`` is ``max |f_hat|`` over ``|xi'| >= xi``; samples
    with ``|xi| > xi_min`` where the envelope is attained and lies above
    ``rel_floor`` times the peak are regressed as
    ``log(-log(env/max)) = log c + p log|xi|``.  Use a finely sampled
    signal; the roundoff floor limits the usable range.

    Returns
    -------
    p, c : float
    """
    from .grid import fourier

    F = fourier(f)
    xi = f.grid.frequencies
    a = np.abs(F.values)
    a = a / a.max()
    pos = xi > 0
    r = xi[pos]
    e = a[pos].copy()
    neg = a[xi < 0][::-1]  # fold -xi onto xi
    m = min(neg.size, e.size)
    e[:m] = np.maximum(e[:m], neg[:m])
    env = np.maximum.accumulate(e[::-1])[::-1]
    sel = (r > xi_min) & (e == env) & (env > rel_floor) & (env < 1)
    if sel.sum() < 3:
        raise DomainError("too few spectral samples above the floor")
    p, lc = np.polyfit(np.log(r[sel]), np.log(-np.log(env[sel])), 1)
    return float(p), float(np.exp(lc))
