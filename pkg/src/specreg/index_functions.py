"""Index-function calculus for smoothness classes in the diagonal model.

An index function ``kappa`` is a continuous, nondecreasing function on
``[0, domain_max]`` with ``kappa(0) = 0`` and ``kappa > 0`` on the open
interval.  The calculus built on top of it is

* ``Theta(lam) = sqrt(lam) * kappa(lam)``, always strictly increasing,
* ``psi_kappa(t) = kappa(Theta^{-1}(sqrt(t)))**2``, the induced
  smoothness-to-data transfer function,
* ``psi_kappa_v``, the variant where the noise weight ``1/sqrt(lam)`` is
  replaced by a general strictly decreasing variance envelope ``v``.

Inverses are computed by bisection on certified brackets; ``PsiProfile``
caches a log-spaced inversion table so that large probe batches can be
evaluated vectorized.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, OutOfRangeError

__all__ = [
    "IndexFunction",
    "PowerIndex",
    "LogPowerIndex",
    "TabulatedIndex",
    "ComposedIndex",
    "CappedIndex",
    "theta",
    "theta_inverse",
    "psi_kappa",
    "psi_kappa_v",
    "PsiProfile",
    "StructureReport",
    "check_structure",
    "index_function_from_dict",
]

# Smallest argument considered resolvable when hunting for inversion brackets.
_LAM_FLOOR = 1e-300


class IndexFunction:
    """Base class: nondecreasing, continuous, zero at zero, positive beyond."""

    domain_max: float
    mu: float | None
    growth_p: float | None

    def _eval_positive(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def strictly_increasing(self) -> bool:
        return True

    def _check_domain(self, t: np.ndarray) -> None:
        if np.any(t < 0):
            raise DomainError("index function argument must be >= 0")
        if np.any(t > self.domain_max * (1 + 1e-12)):
            raise DomainError(
                f"argument exceeds certified domain_max={self.domain_max!r}"
            )

    def __call__(self, t):
        arr = np.asarray(t, dtype=float)
        scalar = arr.ndim == 0
        arr = np.atleast_1d(arr)
        self._check_domain(arr)
        out = np.zeros_like(arr)
        pos = arr > 0
        if np.any(pos):
            out[pos] = self._eval_positive(arr[pos])
        return float(out[0]) if scalar else out

    def to_dict(self) -> dict:
        raise NotImplementedError


def _validate_metadata(f: IndexFunction) -> None:
    """Spot-check declared mu / growth_p tags on a coarse log grid."""
    hi = min(f.domain_max, 1.0)
    grid = np.geomspace(hi * 1e-12, hi * (1 - 1e-9), 64)
    vals = f(grid)
    if f.mu is not None:
        if not 0 < f.mu < 1:
            raise ValueError("mu must lie in (0, 1)")
        ratio = vals**2 / grid ** (1 - f.mu)
        if np.any(np.diff(ratio) > 1e-9 * ratio[:-1]):
            raise ValueError("declared mu fails the sampled decay check")
    if f.growth_p is not None:
        slopes = np.diff(np.log(vals)) / np.diff(np.log(grid))
        if np.any(slopes > f.growth_p + 1e-9):
            raise ValueError("declared growth_p fails the sampled check")


@dataclasses.dataclass(frozen=True)
class PowerIndex(IndexFunction):
    """kappa(t) = t**nu with nu > 0."""

    nu: float
    domain_max: float = math.inf
    mu: float | None = None
    growth_p: float | None = None

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if self.mu is not None or self.growth_p is not None:
            _validate_metadata(self)

    def _eval_positive(self, t):
        return t**self.nu

    def to_dict(self):
        return {"kind": "power", "nu": self.nu}


@dataclasses.dataclass(frozen=True)
class LogPowerIndex(IndexFunction):
    """kappa(t) = (shift - ln t)**(-p) with p > 0, defined for t < e**shift."""

    p: float
    shift: float = 0.0
    domain_max: float = dataclasses.field(default=math.nan)
    mu: float | None = None
    growth_p: float | None = None

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError("p must be positive")
        if self.shift < 0:
            raise ValueError("shift must be >= 0")
        limit = math.exp(self.shift)
        if math.isnan(self.domain_max):
            object.__setattr__(self, "domain_max", limit * (1 - 1e-12))
        if self.domain_max >= limit:
            raise ValueError("domain_max must be < exp(shift)")
        if self.mu is not None or self.growth_p is not None:
            _validate_metadata(self)

    def _check_domain(self, t):
        super()._check_domain(t)
        if np.any(t >= math.exp(self.shift)):
            raise DomainError("log-power index undefined at t >= exp(shift)")

    def _eval_positive(self, t):
        return (self.shift - np.log(t)) ** (-self.p)

    def to_dict(self):
        return {"kind": "logpower", "p": self.p, "shift": self.shift}


@dataclasses.dataclass(frozen=True)
class TabulatedIndex(IndexFunction):
    """Piecewise log-log linear interpolant of monotone (t, value) samples.

    Ties in the values are allowed (plateaus); extrapolation is refused.
    """

    points: np.ndarray
    mu: float | None = None
    growth_p: float | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError("points must be an (n, 2) array with n >= 2")
        if np.any(pts <= 0):
            raise ValueError("tabulated samples must be strictly positive")
        if np.any(np.diff(pts[:, 0]) <= 0):
            raise ValueError("sample arguments must be strictly increasing")
        if np.any(np.diff(pts[:, 1]) < 0):
            raise ValueError("sample values must be nondecreasing")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "domain_max", float(pts[-1, 0]))
        if self.mu is not None or self.growth_p is not None:
            _validate_metadata(self)

    @property
    def domain_min(self) -> float:
        return float(self.points[0, 0])

    @property
    def strictly_increasing(self) -> bool:
        return bool(np.all(np.diff(self.points[:, 1]) > 0))

    def _check_domain(self, t):
        super()._check_domain(t)
        pos = t[t > 0]
        if pos.size and np.any(pos < self.domain_min * (1 - 1e-12)):
            raise DomainError("argument below the tabulated range")

    def _eval_positive(self, t):
        logt = np.log(np.clip(t, self.domain_min, self.domain_max))
        return np.exp(
            np.interp(logt, np.log(self.points[:, 0]), np.log(self.points[:, 1]))
        )

    def to_dict(self):
        return {"kind": "table", "points": self.points.tolist()}


@dataclasses.dataclass(frozen=True)
class ComposedIndex(IndexFunction):
    """scale * base(arg_scale * t)**power; covers rescaled and powered kappas."""

    base: IndexFunction
    scale: float = 1.0
    power: float = 1.0
    arg_scale: float = 1.0
    mu: float | None = None
    growth_p: float | None = None

    def __post_init__(self):
        if self.scale <= 0 or self.power <= 0 or self.arg_scale <= 0:
            raise ValueError("scale, power and arg_scale must be positive")
        object.__setattr__(
            self, "domain_max", self.base.domain_max / self.arg_scale
        )
        if self.mu is not None or self.growth_p is not None:
            _validate_metadata(self)

    @property
    def strictly_increasing(self) -> bool:
        return self.base.strictly_increasing

    def _eval_positive(self, t):
        return self.scale * np.asarray(self.base(self.arg_scale * t)) ** self.power

    def to_dict(self):
        return {
            "kind": "composition",
            "base": self.base.to_dict(),
            "scale": self.scale,
            "power": self.power,
            "arg_scale": self.arg_scale,
        }


@dataclasses.dataclass(frozen=True)
class CappedIndex(IndexFunction):
    """base(min(t, cap_at)): constant beyond cap_at.

    This is the plateau produced when a smoothness scale is read off a
    spectral decay law that is only informative below some frequency; the
    function stays a valid (nondecreasing) index function.
    """

    base: IndexFunction
    cap_at: float
    domain_max: float = math.inf
    mu: float | None = None
    growth_p: float | None = None

    def __post_init__(self):
        if not 0 < self.cap_at <= self.base.domain_max:
            raise ValueError("cap_at must lie inside the base domain")
        if self.mu is not None or self.growth_p is not None:
            _validate_metadata(self)

    @property
    def strictly_increasing(self) -> bool:
        return False

    def _eval_positive(self, t):
        return np.asarray(self.base(np.minimum(t, self.cap_at)))

    def to_dict(self):
        return {
            "kind": "capped",
            "base": self.base.to_dict(),
            "cap_at": self.cap_at,
        }


def index_function_from_dict(d: dict) -> IndexFunction:
    """Inverse of ``to_dict`` for every supported kind."""
    kind = d.get("kind")
    if kind == "power":
        return PowerIndex(nu=float(d["nu"]))
    if kind == "logpower":
        return LogPowerIndex(p=float(d["p"]), shift=float(d.get("shift", 0.0)))
    if kind == "table":
        return TabulatedIndex(points=np.asarray(d["points"], dtype=float))
    if kind == "composition":
        return ComposedIndex(
            base=index_function_from_dict(d["base"]),
            scale=float(d.get("scale", 1.0)),
            power=float(d.get("power", 1.0)),
            arg_scale=float(d.get("arg_scale", 1.0)),
        )
    if kind == "capped":
        return CappedIndex(
            base=index_function_from_dict(d["base"]), cap_at=float(d["cap_at"])
        )
    raise ValueError(f"unknown index function kind: {kind!r}")


def theta(f: IndexFunction, lam):
    """Theta(lam) = sqrt(lam) * kappa(lam), strictly increasing."""
    arr = np.asarray(lam, dtype=float)
    vals = np.sqrt(arr) * np.asarray(f(arr))
    return float(vals) if arr.ndim == 0 else vals


def _table_domain(f: IndexFunction) -> float:
    return f.domain_min if isinstance(f, TabulatedIndex) else _LAM_FLOOR


def theta_inverse(f: IndexFunction, y: float, tol: float = 1e-12) -> float:
    """Solve Theta(lam) = y by bisection on a certified bracket.

    Parameters
    ----------
    f : IndexFunction
    y : positive target value; must lie in the range of Theta on
        ``(0, domain_max]``.
    tol : relative tolerance on the defect ``|Theta(lam) - y| <= tol * y``.
    """
    if not y > 0:
        raise OutOfRangeError("inversion target must be positive")
    hi = min(f.domain_max, 1e280)
    floor = _table_domain(f)
    with np.errstate(over="ignore"):
        while not math.isfinite(theta(f, hi)):
            hi *= 0.125
    if y > theta(f, hi) * (1 + tol):
        raise OutOfRangeError("target above the range of Theta on the domain")
    lo = hi
    while theta(f, lo) > y:
        lo *= 0.25
        if lo < floor:
            lo = floor
            if theta(f, lo) > y * (1 + tol):
                raise OutOfRangeError("target below the resolvable range")
            break
    # log-space bisection: remaining bracket is [lo, hi]; midpoints are
    # formed from logs, never from lo * hi, which underflows near 1e-300
    llo, lhi = math.log(lo), math.log(hi)
    for _ in range(220):
        mid = math.exp(0.5 * (llo + lhi))
        val = theta(f, mid)
        if abs(val - y) <= tol * y:
            return mid
        if val > y:
            lhi = math.log(mid)
        else:
            llo = math.log(mid)
        if lhi - llo <= 1e-16:
            break
    return math.exp(0.5 * (llo + lhi))


def _theta_inverse_bulk(f: IndexFunction, y: np.ndarray, tol: float) -> np.ndarray:
    """Vectorized ``theta_inverse`` for positive targets.

    Same defect contract as the scalar version: each returned lam
    satisfies ``|Theta(lam) - y| <= tol * y`` or exhausts the bracket.
    """
    hi = min(f.domain_max, 1e280)
    floor = _table_domain(f)
    with np.errstate(over="ignore"):
        while not math.isfinite(theta(f, hi)):
            hi *= 0.125
    if np.any(y > theta(f, hi) * (1 + tol)):
        raise OutOfRangeError("target above the range of Theta on the domain")
    if np.any(y * (1 + tol) < theta(f, floor)):
        raise OutOfRangeError("target below the resolvable range")
    llo = np.full(y.shape, math.log(floor))
    lhi = np.full(y.shape, math.log(hi))
    res = np.empty_like(y)
    done = np.zeros(y.shape, dtype=bool)
    with np.errstate(under="ignore"):
        for _ in range(220):
            lmid = 0.5 * (llo + lhi)
            mid = np.exp(lmid)
            val = theta(f, mid)
            hit = (np.abs(val - y) <= tol * y) & ~done
            res[hit] = mid[hit]
            done |= hit
            go_hi = (val > y) & ~done
            lhi = np.where(go_hi, lmid, lhi)
            llo = np.where(~go_hi & ~done, lmid, llo)
            if done.all() or np.all(lhi - llo <= 1e-16):
                break
    res[~done] = np.exp(0.5 * (llo + lhi))[~done]
    return res


def psi_kappa(f: IndexFunction, t, tol: float = 1e-12):
    """psi(t) = kappa(Theta^{-1}(sqrt(t)))**2, elementwise over ``t``."""
    arr = np.asarray(t, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(arr < 0):
        raise DomainError("psi argument must be >= 0")
    out = np.zeros_like(arr, dtype=float)
    pos = arr > 0
    if np.any(pos):
        lam = _theta_inverse_bulk(f, np.sqrt(arr[pos]), tol)
        out[pos] = np.asarray(f(lam), dtype=float) ** 2
    return float(out[0]) if scalar else out


def psi_kappa_v(
    f: IndexFunction,
    v: Callable[[float], float],
    eps_sq: float,
    tol: float = 1e-12,
    alpha_hi: float | None = None,
) -> float:
    """psi for a general variance envelope: kappa(G^{-1}(eps))**2 where
    G(alpha) = kappa(alpha)/v(alpha) and eps = sqrt(eps_sq).

    ``v`` must be strictly decreasing on the bracket; a constant or
    increasing ``v`` is rejected as degenerate.
    """
    if eps_sq == 0:
        return 0.0
    if eps_sq < 0:
        raise DomainError("eps_sq must be >= 0")
    eps = math.sqrt(eps_sq)
    hi = min(f.domain_max, 1e280 if alpha_hi is None else alpha_hi)
    floor = _table_domain(f)

    def g(a: float) -> float:
        return float(f(a)) / float(v(a))

    with np.errstate(over="ignore"):
        while not math.isfinite(g(hi)):
            hi *= 0.125
    if float(v(hi)) <= 0:
        raise DomainError("v must be positive")
    if g(hi) * (1 + tol) < eps:
        raise OutOfRangeError("target above the range of kappa/v")
    lo = hi
    while g(lo) > eps:
        lo *= 0.25
        if lo < floor:
            lo = floor
            if g(lo) > eps * (1 + tol):
                raise OutOfRangeError("target below the resolvable range")
            break
    if lo < hi and not float(v(lo)) > float(v(hi)):
        raise DomainError("v must be strictly decreasing (degenerate envelope)")
    llo, lhi = math.log(lo), math.log(hi)
    alpha = math.exp(0.5 * (llo + lhi))
    for _ in range(220):
        alpha = math.exp(0.5 * (llo + lhi))
        val = g(alpha)
        if abs(val - eps) <= tol * eps:
            break
        if val > eps:
            lhi = math.log(alpha)
        else:
            llo = math.log(alpha)
        if lhi - llo <= 1e-16:
            break
    return float(f(alpha)) ** 2


@dataclasses.dataclass(frozen=True)
class PsiProfile:
    """Cached evaluator for psi_kappa with a log-spaced inversion table.

    The table only initializes brackets; every evaluation is refined by
    bisection to ``tolerance``, so cached and direct paths agree to that
    tolerance.
    """

    kappa: IndexFunction
    lam_table: np.ndarray
    theta_table: np.ndarray
    tolerance: float = 1e-12

    @classmethod
    def build(
        cls,
        kappa: IndexFunction,
        lam_min: float | None = None,
        lam_max: float | None = None,
        size: int = 1024,
        tolerance: float = 1e-12,
    ) -> "PsiProfile":
        hi = min(kappa.domain_max, 1e280) if lam_max is None else lam_max
        if lam_max is None:
            with np.errstate(over="ignore"):
                while not math.isfinite(float(np.sqrt(hi) * np.asarray(kappa(hi)))):
                    hi *= 0.125
        lo = max(_table_domain(kappa), _LAM_FLOOR) if lam_min is None else lam_min
        lam = np.geomspace(lo, hi, size)
        th = np.sqrt(lam) * np.asarray(kappa(lam))
        lam.setflags(write=False)
        th.setflags(write=False)
        return cls(kappa=kappa, lam_table=lam, theta_table=th, tolerance=tolerance)

    @property
    def t_max(self) -> float:
        """Largest certified psi argument (range of Theta squared)."""
        top = float(self.theta_table[-1])
        return top * top  # may be inf for unbounded kappa; clamping stays a no-op

    def theta_inverse_many(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if np.any(y > self.theta_table[-1] * (1 + self.tolerance)):
            raise OutOfRangeError("target above the cached Theta range")
        if np.any(y < self.theta_table[0] * (1 - self.tolerance)) and np.any(y > 0):
            below = y[(y > 0) & (y < self.theta_table[0])]
            if below.size:
                raise OutOfRangeError("target below the cached Theta range")
        idx = np.clip(np.searchsorted(self.theta_table, y), 1, len(self.lam_table) - 1)
        # bisect in log space; products of bracket ends underflow near 1e-300
        llo = np.log(self.lam_table[idx - 1])
        lhi = np.log(self.lam_table[idx])
        kap = self.kappa
        for _ in range(80):
            mid = np.exp(0.5 * (llo + lhi))
            val = np.sqrt(mid) * np.asarray(kap(mid))
            take_hi = val > y
            lmid = np.log(mid)
            lhi = np.where(take_hi, lmid, lhi)
            llo = np.where(take_hi, llo, lmid)
            if np.all(lhi - llo <= 1e-15):
                break
        return np.exp(0.5 * (llo + lhi))

    def eval_many(self, t: np.ndarray, clamp: bool = False) -> np.ndarray:
        """Vectorized psi.  With ``clamp=True`` arguments beyond the certified
        range evaluate at the range edge; since psi is nondecreasing that is a
        lower bound, which keeps downstream inequality checks conservative."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("psi argument must be >= 0")
        if clamp:
            t = np.minimum(t, self.t_max)
        out = np.zeros_like(t)
        pos = t > 0
        if np.any(pos):
            lam = self.theta_inverse_many(np.sqrt(t[pos]))
            out[pos] = np.asarray(self.kappa(lam)) ** 2
        return out

    def eval(self, t: float, clamp: bool = False) -> float:
        return float(self.eval_many(np.atleast_1d(float(t)), clamp=clamp)[0])


_MU_CANDIDATES = np.round(np.arange(0.05, 0.951, 0.05), 2)


@dataclasses.dataclass(frozen=True)
class StructureReport:
    """Grid-certified structure facts about an index function."""

    grid: np.ndarray
    strictly_increasing: bool
    kk_concave: bool
    mu_hat: float | None
    growth_p_hat: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "strictly_increasing": self.strictly_increasing,
            "kk_concave": self.kk_concave,
            "mu_hat": self.mu_hat,
            "growth_p_hat": self.growth_p_hat,
            "passed": self.passed,
            "grid_min": float(self.grid[0]),
            "grid_max": float(self.grid[-1]),
        }


def mu_holds_on_grid(f: IndexFunction, mu: float, grid: np.ndarray) -> bool:
    """Check that t -> kappa(t)^2 / t^(1-mu) is nonincreasing on the grid."""
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.asarray(f(grid)) ** 2 / grid ** (1 - mu)
        return bool(np.all(np.diff(vals) <= 1e-9 * np.abs(vals[:-1])))


def check_structure(f: IndexFunction, grid: Sequence[float]) -> StructureReport:
    """Certify monotonicity, concavity of kappa*kappa, the largest decay
    exponent mu from a fixed candidate list, and the measured growth exponent.

    All checks are grid checks: they certify the sampled points only.
    """
    grid = np.asarray(sorted(grid), dtype=float)
    if grid.ndim != 1 or grid.size < 3:
        raise ValueError("grid must contain at least three points")
    if grid[0] <= 0:
        raise DomainError("grid must be strictly positive")
    vals = np.asarray(f(grid))
    inc = bool(np.all(np.diff(vals) > 0))

    with np.errstate(over="ignore", invalid="ignore"):
        kk = vals**2
        slopes = np.diff(kk) / np.diff(grid)
        # nonincreasing chord slopes <=> concave piecewise-linear interpolant
        concave = bool(np.all(np.diff(slopes) <= 1e-9 * np.abs(slopes[:-1]) + 1e-300))

    mu_hat = None
    for mu in _MU_CANDIDATES[::-1]:
        if mu_holds_on_grid(f, float(mu), grid):
            mu_hat = float(mu)
            break

    logv = np.log(vals)
    logt = np.log(grid)
    dv = logv[None, :] - logv[:, None]
    dt = logt[None, :] - logt[:, None]
    iu = np.triu_indices(len(grid), k=1)
    growth_p = float(np.max(dv[iu] / dt[iu]))

    return StructureReport(
        grid=grid,
        strictly_increasing=inc,
        kk_concave=concave,
        mu_hat=mu_hat,
        growth_p_hat=growth_p,
        passed=inc and concave,
    )
