"""Weight functions, Young conjugates and exponential weights.

A weight function ``omega`` is a continuous increasing subadditive map of
``[0, inf)`` into itself.  Three families are built in:

* ``Power(a)``        omega(t) = t**a,              0 < a < 1
* ``LogPower(s)``     omega(t) = log(1 + t)**s,     s > 1
* ``Tabulated``       piecewise linear through knots, extended by the last slope

The associated convex function is ``phi(t) = omega(exp(t))`` and its Young
conjugate ``phi*(s) = sup_{t >= 0} (t s - phi(t))`` controls the derivative
bounds in the seminorms of the ultradifferentiable Schwartz class.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from .exceptions import ConfigError, DomainError, RangeError

__all__ = [
    "Power",
    "LogPower",
    "Tabulated",
    "WeightFunction",
    "ExpWeight",
    "eval_omega",
    "omega_point",
    "young_conjugate",
    "exp_weight_eval",
    "double_conjugate",
    "log_lattice_infimum",
    "fit_47ii_constant",
    "partial_integrals",
    "log_ratio",
    "property_suite",
]

# numeric conjugate grid
_T_MIN = 1e-6
_T_MAX = 200.0
_T_NUM = 200_000


@dataclass(frozen=True)
class Power:
    """omega(t) = t**a with 0 < a < 1."""

    a: float

    def __post_init__(self):
        if not 0.0 < float(self.a) < 1.0:
            raise DomainError(f"Power weight needs 0 < a < 1, got {self.a}")


@dataclass(frozen=True)
class LogPower:
    """omega(t) = log(1 + t)**s with s > 1."""

    s: float

    def __post_init__(self):
        if not float(self.s) > 1.0:
            raise DomainError(f"LogPower weight needs s > 1, got {self.s}")


@dataclass(frozen=True)
class Tabulated:
    """Piecewise linear weight through ``(knots, values)``.

    Knots must be strictly increasing and nonnegative, values nonnegative.
    Outside the table the first and last segments are extended linearly
    (clamped at zero on the left).
    """

    knots: tuple
    values: tuple

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if k.ndim != 1 or k.shape != v.shape or k.size < 2:
            raise DomainError("tabulated weight needs two equal-length 1-d tables")
        if np.any(k < 0) or np.any(np.diff(k) <= 0):
            raise DomainError("knots must be nonnegative and strictly increasing")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise DomainError("values must be finite and nonnegative")
        object.__setattr__(self, "knots", tuple(float(x) for x in k))
        object.__setattr__(self, "values", tuple(float(x) for x in v))

    @property
    def last_slope(self):
        k, v = self.knots, self.values
        return (v[-1] - v[-2]) / (k[-1] - k[-2])


_NORMALIZATIONS = ("raw", "clamped")


@dataclass(frozen=True)
class WeightFunction:
    """Weight descriptor: a kind plus a normalization.

    Parameters
    ----------
    kind : Power, LogPower or Tabulated
        The underlying family.
    normalization : {'raw', 'clamped'}
        ``'clamped'`` returns ``max(omega(t) - omega(1), 0)``, which vanishes
        on ``[0, 1]`` but is no longer exactly subadditive.

    Examples
    --------
    >>> w = WeightFunction.power(0.5)
    >>> float(w(4.0))
    2.0
    """

    kind: object
    normalization: str = field(default="raw")

    def __post_init__(self):
        if not isinstance(self.kind, (Power, LogPower, Tabulated)):
            raise DomainError(f"unknown weight kind {self.kind!r}")
        if self.normalization not in _NORMALIZATIONS:
            raise DomainError(f"normalization must be one of {_NORMALIZATIONS}")

    # constructors
    @classmethod
    def power(cls, a, normalization="raw"):
        return cls(Power(float(a)), normalization)

    @classmethod
    def logpower(cls, s, normalization="raw"):
        return cls(LogPower(float(s)), normalization)

    @classmethod
    def tabulated(cls, knots, values, normalization="raw"):
        return cls(Tabulated(tuple(knots), tuple(values)), normalization)

    @property
    def label(self):
        k = self.kind
        if isinstance(k, Power):
            core = f"power(a={k.a:g})"
        elif isinstance(k, LogPower):
            core = f"logpower(s={k.s:g})"
        else:
            core = f"tabulated({len(k.knots)} knots)"
        return core if self.normalization == "raw" else core + "/clamped"

    def __call__(self, t):
        return eval_omega(self, t)

    def phi(self, t):
        """phi(t) = omega(exp(t)) for real ``t`` (any sign)."""
        return _phi(self, np.asarray(t, dtype=float))

    def conjugate(self, s):
        return young_conjugate(self, s)

    # serialization
    def to_dict(self):
        k = self.kind
        if isinstance(k, Power):
            d = {"kind": "power", "a": k.a}
        elif isinstance(k, LogPower):
            d = {"kind": "logpower", "s": k.s}
        else:
            d = {"kind": "tabulated", "knots": list(k.knots), "values": list(k.values)}
        d["normalization"] = self.normalization
        return d

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or "kind" not in d:
            raise ConfigError("weight descriptor needs a 'kind' field", "weight.kind")
        norm = d.get("normalization", "raw")
        kind = d["kind"]
        try:
            if kind == "power":
                return cls.power(d["a"], norm)
            if kind == "logpower":
                return cls.logpower(d["s"], norm)
            if kind == "tabulated":
                return cls.tabulated(d["knots"], d["values"], norm)
        except KeyError as exc:
            raise ConfigError(f"weight descriptor misses {exc}", f"weight.{exc.args[0]}")
        except DomainError as exc:
            raise ConfigError(str(exc), "weight")
        raise ConfigError(f"unknown weight kind {kind!r}", "weight.kind")


def _raw(kind, t):
    if isinstance(kind, Power):
        return t ** kind.a
    if isinstance(kind, LogPower):
        return np.log1p(t) ** kind.s
    k = np.asarray(kind.knots)
    v = np.asarray(kind.values)
    out = np.interp(t, k, v)
    hi = t > k[-1]
    out = np.where(hi, v[-1] + kind.last_slope * (t - k[-1]), out)
    lo = t < k[0]
    s0 = (v[1] - v[0]) / (k[1] - k[0])
    return np.where(lo, np.maximum(v[0] - s0 * (k[0] - t), 0.0), out)


def eval_omega(w, t):
    """Evaluate the weight at nonnegative ``t`` (scalar or array).

    Raises
    ------
    DomainError
        If any ``t`` is negative or not finite.
    """
    arr = np.asarray(t, dtype=float)
    if np.any(~(arr >= 0)):
        raise DomainError("weight argument must be nonnegative")
    out = _raw(w.kind, arr)
    if w.normalization == "clamped":
        out = np.maximum(out - _raw(w.kind, np.float64(1.0)), 0.0)
    return out if out.ndim else float(out)


def omega_point(w, z):
    """Weight of the Euclidean norm of ``z`` (last axis is the vector axis)."""
    z = np.asarray(z, dtype=float)
    r = np.sqrt(np.sum(z * z, axis=-1)) if z.ndim else abs(z)
    return eval_omega(w, r)


def _phi(w, t):
    k = w.kind
    if isinstance(k, Power):
        out = np.exp(k.a * t)
    elif isinstance(k, LogPower):
        # log(1 + e^t) without overflow
        out = np.logaddexp(0.0, t) ** k.s
    else:
        out = _raw(k, np.exp(t))
    if w.normalization == "clamped":
        out = np.maximum(out - _raw(k, np.float64(1.0)), 0.0)
    return out


@lru_cache(maxsize=16)
def _phi_table(w):
    t = np.concatenate(([0.0], np.geomspace(_T_MIN, _T_MAX, _T_NUM)))
    return t, _phi(w, t)


def _conj_numeric(w, s):
    t, ph = _phi_table(w)
    vals = t * s - ph
    i = int(np.argmax(vals))
    if isinstance(w.kind, Tabulated):
        tlast = np.log(w.kind.knots[-1]) if w.kind.knots[-1] > 0 else -np.inf
        if t[i] > tlast:
            smax = w.kind.knots[-1] * w.kind.last_slope
            raise RangeError(
                f"tabulated weight too short for s={s}; max usable s={smax:.6g}", smax
            )
    if i == t.size - 1:
        slope = (ph[-1] - ph[-2]) / (t[-1] - t[-2])
        raise RangeError(f"conjugate grid exhausted for s={s}", slope)
    best = vals[i]
    lo, hi = t[max(i - 1, 0)], t[min(i + 1, t.size - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(
            lambda x: -(x * s - float(_phi(w, np.float64(x)))),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-13 * max(1.0, hi)},
        )
        best = max(best, -res.fun)
    return best


def young_conjugate(w, s, method="auto"):
    """Young conjugate ``phi*(s) = sup_{t>=0} (t s - omega(e^t))``.

    Parameters
    ----------
    w : WeightFunction
    s : float or array_like
        Nonnegative arguments.
    method : {'auto', 'closed', 'numeric'}
        ``'auto'`` uses the closed form for raw power weights and the
        log-grid supremum with golden refinement otherwise.

    Returns
    -------
    float or ndarray

    Raises
    ------
    DomainError
        For negative ``s``.
    RangeError
        When the maximizer leaves the usable range of a tabulated weight.
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(~(s_arr >= 0)):
        raise DomainError("conjugate argument must be nonnegative")
    closed = isinstance(w.kind, Power) and w.normalization == "raw"
    if method == "closed" and not closed:
        raise DomainError("closed form only for raw power weights")
    if closed and method != "numeric":
        a = w.kind.a
        r = s_arr / a
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(s_arr >= a, r * (np.log(np.where(r > 0, r, 1.0)) - 1.0), -1.0)
        return val if val.ndim else float(val)
    flat = np.array([_conj_numeric(w, float(x)) for x in s_arr.ravel()])
    out = flat.reshape(s_arr.shape)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ExpWeight:
    """Exponential weight ``m_lambda(z) = exp(lambda * omega(|z|))``.

    ``v_lambda`` uses ``|lambda|`` and is the moderating weight of ``m_lambda``.
    """

    lam: float
    base: WeightFunction

    def __post_init__(self):
        if float(self.lam) == 0.0 or not np.isfinite(self.lam):
            raise DomainError("exponential weight needs a finite nonzero lambda")

    def m(self, z, log=False):
        return exp_weight_eval(self, z, log=log)

    def v(self, z, log=False):
        return exp_weight_eval(ExpWeight(abs(self.lam), self.base), z, log=log)


def exp_weight_eval(ew, z, log=False):
    """Evaluate ``exp(lam * omega(|z|))``; ``log=True`` returns the exponent.

    ``z`` is a point (last axis) or a batch of points.  Scalars are treated
    as one-dimensional points.
    """
    val = ew.lam * omega_point(ew.base, z)
    return val if log else np.exp(val)


def double_conjugate(w, t, s_max=None, num=4001):
    """Recompute ``phi(t)`` as ``sup_s (t s - phi*(s))`` numerically.

    The inner conjugate uses :func:`young_conjugate`; the outer supremum is a
    uniform grid on ``[0, s_max]`` followed by bounded scalar refinement.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if s_max is None:
        h = 1e-4
        tm = float(t_arr.max())
        slope = (float(w.phi(tm + h)) - float(w.phi(tm - h))) / (2 * h)
        s_max = 1.5 * slope + 1.0
    s = np.linspace(0.0, s_max, num)
    cs = young_conjugate(w, s)
    out = np.empty_like(t_arr)
    for j, tj in enumerate(t_arr):
        vals = tj * s - cs
        i = int(np.argmax(vals))
        lo, hi = s[max(i - 1, 0)], s[min(i + 1, num - 1)]
        res = optimize.minimize_scalar(
            lambda x: -(tj * x - float(young_conjugate(w, x))),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-12 * max(1.0, hi)},
        )
        out[j] = max(vals[i], -res.fun)
    return out if np.ndim(t) else float(out[0])


def log_lattice_infimum(w, mu, t, beta_max=200):
    """log of ``inf_{beta in 0..beta_max} t**(-beta) exp(mu phi*(beta / mu))``."""
    beta = np.arange(beta_max + 1, dtype=float)
    cs = young_conjugate(w, beta / mu)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    vals = -np.outer(np.log(t_arr), beta) + mu * cs[None, :]
    out = vals.min(axis=1)
    return out if np.ndim(t) else float(out[0])


def fit_47ii_constant(w, mus, ts, b=1.0, beta_max=200, margin=1e-9):
    """Largest ``a`` with ``log inf <= -(mu - 1/b) omega(t) - a/b`` on a sample set.

    ``b`` is fixed by the caller; the returned ``a`` is reduced by ``margin``
    so that the recorded pair is strictly feasible on the fitting set.
    """
    best = np.inf
    ts = np.asarray(ts, dtype=float)
    for mu in np.atleast_1d(mus):
        lhs = log_lattice_infimum(w, float(mu), ts, beta_max)
        om = eval_omega(w, ts)
        # lhs <= -(mu - 1/b) om - a/b   <=>   a <= -b lhs - (b mu - 1) om
        best = min(best, float(np.min(-b * lhs - (b * mu - 1.0) * om)))
    return best - margin, float(b)


def partial_integrals(w, T):
    """Partial integrals of ``omega(t)/t**2`` over ``[1, T]`` for each ``T``."""
    out = []
    for Tk in np.atleast_1d(T):
        # substitute t = e^u to tame the long tail
        val, _ = integrate.quad(
            lambda u: float(eval_omega(w, np.exp(u))) * np.exp(-u),
            0.0,
            np.log(Tk),
            limit=200,
            epsabs=1e-13,
            epsrel=1e-12,
        )
        out.append(val)
    return np.array(out)


def log_ratio(w, t):
    """``log(t) / omega(t)``; tends to zero for admissible weights."""
    t = np.asarray(t, dtype=float)
    return np.log(t) / eval_omega(w, t)


def property_suite(w, lams=(-2.0, -0.5, 0.5, 2.0), const_47ii=None, seed=0):
    """Run the structural checks on a weight and report each one.

    Parameters
    ----------
    w : WeightFunction
    lams : sequence of float
        Exponents for the moderateness check of ``m_lambda``.
    const_47ii : (a, b), optional
        Recorded constants for property (47ii) at ``mu = 1``; checked at
        ``t in {2, 10, 100}``.  Skipped when ``None``.
    seed : int

    Returns
    -------
    dict
        ``name -> (passed, metric)``; the metric is the worst violation
        (``<= 0`` means satisfied) or the observed ratio.
    """
    rng = np.random.default_rng(seed)
    out = {}
    if w.normalization == "raw":
        t1, t2 = rng.uniform(0, 100, (2, 1000))
        viol = eval_omega(w, t1 + t2) - eval_omega(w, t1) - eval_omega(w, t2)
        out["subadditive"] = (bool(np.all(viol <= 1e-12)), float(viol.max()))
    s = np.linspace(0.0, 50.0, 500)
    c = np.asarray(young_conjugate(w, s))
    mid = 2 * c[1:-1] - c[:-2] - c[2:]
    out["conjugate_convex"] = (bool(mid.max() <= 1e-9), float(mid.max()))
    dec = -np.diff(c)
    out["conjugate_nondecreasing"] = (bool(dec.max() <= 1e-9), float(dec.max()))
    t = np.linspace(0.5, 8.0, 50)
    ph = w.phi(t)
    rel = np.abs(double_conjugate(w, t) - ph) / np.maximum(np.abs(ph), 1e-300)
    out["fenchel"] = (bool(rel.max() <= 1e-6), float(rel.max()))
    if const_47ii is not None:
        a, b = const_47ii
        ts = np.array([2.0, 10.0, 100.0])
        lhs = log_lattice_infimum(w, 1.0, ts)
        viol = lhs + (1.0 - 1.0 / b) * eval_omega(w, ts) + a / b
        out["property_47ii"] = (bool(viol.max() <= 0), float(viol.max()))
    z1, z2 = rng.normal(scale=30.0, size=(2, 1000, 2))
    worst = -np.inf
    for lam in lams:
        ew = ExpWeight(lam, w)
        viol = ew.m(z1 + z2, log=True) - ew.v(z1, log=True) - ew.m(z2, log=True)
        worst = max(worst, float(viol.max()))
    out["moderate"] = (worst <= 1e-12, worst)
    pi = partial_integrals(w, [1e3, 1e4, 1e5, 1e6])
    d = np.diff(pi)
    out["cauchy"] = (bool(np.all(d > -1e-12) and d[-1] < d[0]), float(d[-1]))
    ratio = float(log_ratio(w, 1e3) / log_ratio(w, 1e6))
    out["log_ratio"] = (ratio >= 2.0, ratio)
    return out
