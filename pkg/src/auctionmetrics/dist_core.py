"""Distribution representations on [0,1], sampling, and statistical distances.

Everything downstream works with monotone piecewise functions on the unit
interval: full CDFs, sub-CDFs (terminal value below one), and bounded
piecewise-linear densities for ground-truth models. Estimators produce step
functions; linear interpolation exists only so that smooth ground truths can
be represented and compared against.

Three distances are provided: Kolmogorov (sup norm), Wasserstein-1 (L1 norm of
the CDF difference, by the one-dimensional Kantorovich identity), and Levy
(band distance, by bisection on the band width). They satisfy
``levy <= kolmogorov`` and ``levy <= sqrt(wasserstein1)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

STEP = "step"
LINEAR = "linear"

_MONOTONE_TOL = 1e-12


def _as_array(x):
    return np.ascontiguousarray(x, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class PiecewiseCdf:
    """A monotone piecewise function on [0,1].

    With ``interpolation="step"`` the function is right-continuous and equals
    ``values[i]`` on ``[breakpoints[i], breakpoints[i+1])``, and 0 below the
    first breakpoint. With ``interpolation="linear"`` it interpolates the
    knot sequence. ``eval(x) = 0`` for x < 0 and ``eval(x) = eval(1)`` for
    x > 1 by convention.

    ``is_full_cdf=False`` marks a sub-CDF whose terminal value may be < 1.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    interpolation: str = STEP
    is_full_cdf: bool = True

    def __post_init__(self):
        bp = _as_array(self.breakpoints)
        vals = _as_array(self.values)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if bp.ndim != 1 or vals.ndim != 1 or bp.shape != vals.shape:
            raise ValidationError("breakpoints and values must be 1-D arrays of equal length")
        if bp.size == 0:
            raise ValidationError("at least one breakpoint is required")
        if np.any(np.diff(bp) <= 0):
            raise ValidationError("breakpoints must be strictly ascending")
        if bp[0] < -_MONOTONE_TOL or bp[-1] > 1 + _MONOTONE_TOL:
            raise ValidationError("breakpoints must lie in [0,1]")
        if np.any(np.diff(vals) < -_MONOTONE_TOL):
            raise ValidationError("values must be nondecreasing")
        if vals[0] < -_MONOTONE_TOL or vals[-1] > 1 + _MONOTONE_TOL:
            raise ValidationError("values must lie in [0,1]")
        if self.interpolation not in (STEP, LINEAR):
            raise ValidationError(f"unknown interpolation {self.interpolation!r}")
        if self.is_full_cdf and abs(vals[-1] - 1.0) > 1e-9:
            raise ValidationError("a full CDF must reach 1 at its last breakpoint")

    # -- evaluation ---------------------------------------------------------

    def eval(self, x):
        """Evaluate the function at scalar or array ``x`` (right-continuous)."""
        x = np.asarray(x, dtype=np.float64)
        scalar = x.ndim == 0
        xq = np.minimum(np.atleast_1d(x), 1.0)
        if self.interpolation == STEP:
            idx = np.searchsorted(self.breakpoints, xq, side="right") - 1
            out = np.where(idx >= 0, self.values[np.maximum(idx, 0)], 0.0)
        else:
            out = np.interp(xq, self.breakpoints, self.values,
                            left=self.values[0], right=self.values[-1])
        out = np.where(np.atleast_1d(x) < 0.0, 0.0, out)
        return float(out[0]) if scalar else out

    def eval_left(self, x):
        """Left limit F(x-) at scalar or array ``x``."""
        x = np.asarray(x, dtype=np.float64)
        scalar = x.ndim == 0
        xq = np.minimum(np.atleast_1d(x), 1.0)
        if self.interpolation == STEP:
            idx = np.searchsorted(self.breakpoints, xq, side="left") - 1
            out = np.where(idx >= 0, self.values[np.maximum(idx, 0)], 0.0)
            out = np.where(np.atleast_1d(x) <= 0.0, 0.0, out)
        else:
            out = np.interp(xq, self.breakpoints, self.values,
                            left=self.values[0], right=self.values[-1])
            out = np.where(np.atleast_1d(x) < 0.0, 0.0, out)
        return float(out[0]) if scalar else out

    def ppf(self, q):
        """Generalized inverse inf{x : F(x) >= q}, vectorized."""
        q = np.asarray(q, dtype=np.float64)
        scalar = q.ndim == 0
        qv = np.atleast_1d(q)
        if np.any(qv < 0) or np.any(qv > 1):
            raise ValidationError("quantile levels must lie in [0,1]")
        bp, vals = self.breakpoints, self.values
        if self.interpolation == STEP:
            idx = np.searchsorted(vals, qv, side="left")
            idx = np.minimum(idx, vals.size - 1)
            out = bp[idx]
            # levels above the terminal value have an empty level set; clamp to 1
            out = np.where(qv > vals[-1] + _MONOTONE_TOL, 1.0, out)
            out = np.where(qv <= 0.0, 0.0, out)
        else:
            idx = np.searchsorted(vals, qv, side="left")
            idx = np.clip(idx, 0, vals.size - 1)
            lo = np.maximum(idx - 1, 0)
            v0, v1 = vals[lo], vals[idx]
            x0, x1 = bp[lo], bp[idx]
            dv = v1 - v0
            t = np.where(dv > 0, (qv - v0) / np.where(dv > 0, dv, 1.0), 0.0)
            out = np.where(idx == 0, bp[0], x0 + np.clip(t, 0.0, 1.0) * (x1 - x0))
            out = np.where(qv > vals[-1] + _MONOTONE_TOL, 1.0, out)
            out = np.where(qv <= vals[0], bp[0] if vals[0] > 0 else 0.0, out)
            out = np.where(qv <= 0.0, 0.0, out)
        return float(out[0]) if scalar else out

    # -- serialization ------------------------------------------------------

    def to_dict(self):
        return {
            "interpolation": self.interpolation,
            "breakpoints": [float(repr_round(v)) for v in self.breakpoints],
            "values": [float(repr_round(v)) for v in self.values],
            "is_full_cdf": bool(self.is_full_cdf),
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                breakpoints=d["breakpoints"],
                values=d["values"],
                interpolation=d.get("interpolation", STEP),
                is_full_cdf=d.get("is_full_cdf", True),
            )
        except KeyError as exc:
            raise ValidationError(f"CDF object missing field {exc}") from exc

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s):
        return cls.from_dict(json.loads(s))


def repr_round(v):
    """Round-trip a float through a 17-significant-digit decimal."""
    return float(f"{float(v):.17g}")


# A sub-CDF is structurally a PiecewiseCdf whose terminal value may be < 1.
SubCdf = PiecewiseCdf


def sub_cdf(breakpoints, values, interpolation=STEP):
    return PiecewiseCdf(breakpoints, values, interpolation, is_full_cdf=False)


@dataclass(frozen=True, eq=False)
class BoundedDensityModel:
    """Piecewise-linear density on [0,1] with declared bounds.

    ``knots``/``density`` describe f by linear interpolation. The density must
    integrate to one, stay within [alpha_lo, eta_hi] at every knot, and, if a
    Lipschitz constant is declared, every linear piece's slope must respect it.
    The CDF is piecewise quadratic and evaluated exactly.
    """

    knots: np.ndarray
    density: np.ndarray
    alpha_lo: float
    eta_hi: float
    lipschitz: float | None = None
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        kn = _as_array(self.knots)
        de = _as_array(self.density)
        object.__setattr__(self, "knots", kn)
        object.__setattr__(self, "density", de)
        if kn.ndim != 1 or de.ndim != 1 or kn.shape != de.shape or kn.size < 2:
            raise ValidationError("knots and density must be 1-D arrays of equal length >= 2")
        if abs(kn[0]) > 1e-12 or abs(kn[-1] - 1.0) > 1e-12:
            raise ValidationError("density knots must span [0,1]")
        if np.any(np.diff(kn) <= 0):
            raise ValidationError("knots must be strictly ascending")
        if np.any(de < self.alpha_lo - 1e-9) or np.any(de > self.eta_hi + 1e-9):
            raise ValidationError("density must respect [alpha_lo, eta_hi] at every knot")
        if self.lipschitz is not None:
            slopes = np.diff(de) / np.diff(kn)
            if np.any(np.abs(slopes) > self.lipschitz + 1e-9):
                raise ValidationError("density slope exceeds the declared Lipschitz constant")
        seg = 0.5 * (de[:-1] + de[1:]) * np.diff(kn)  # exact for linear pieces
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        if abs(cum[-1] - 1.0) > 1e-9:
            raise ValidationError(f"density integrates to {cum[-1]:.12g}, not 1")
        object.__setattr__(self, "_cum", cum)

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.interp(np.clip(x, 0.0, 1.0), self.knots, self.density)
        return float(out) if x.ndim == 0 else out

    def cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        scalar = x.ndim == 0
        xq = np.clip(np.atleast_1d(x), 0.0, 1.0)
        idx = np.clip(np.searchsorted(self.knots, xq, side="right") - 1, 0, self.knots.size - 2)
        x0 = self.knots[idx]
        f0 = self.density[idx]
        slope = (self.density[idx + 1] - f0) / (self.knots[idx + 1] - x0)
        dx = xq - x0
        out = self._cum[idx] + f0 * dx + 0.5 * slope * dx * dx
        out = np.where(np.atleast_1d(x) < 0.0, 0.0, np.clip(out, 0.0, 1.0))
        return float(out[0]) if scalar else out

    def ppf(self, q):
        q = np.asarray(q, dtype=np.float64)
        scalar = q.ndim == 0
        qv = np.atleast_1d(q)
        if np.any(qv < 0) or np.any(qv > 1):
            raise ValidationError("quantile levels must lie in [0,1]")
        idx = np.clip(np.searchsorted(self._cum, qv, side="right") - 1, 0, self.knots.size - 2)
        x0 = self.knots[idx]
        f0 = self.density[idx]
        slope = (self.density[idx + 1] - f0) / (self.knots[idx + 1] - x0)
        rem = qv - self._cum[idx]
        # solve 0.5*s*t^2 + f0*t = rem for t on the piece
        disc = np.maximum(f0 * f0 + 2.0 * slope * rem, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_quad = (np.sqrt(disc) - f0) / slope
            t_lin = rem / f0
        t = np.where(np.abs(slope) > 1e-14, t_quad, t_lin)
        out = np.clip(x0 + t, 0.0, 1.0)
        return float(out[0]) if scalar else out

    def to_cdf(self, n_grid=4097):
        """A piecewise-linear PiecewiseCdf approximation on a fine grid."""
        xs = np.union1d(np.linspace(0.0, 1.0, n_grid), self.knots)
        vals = self.cdf(xs)
        vals[-1] = 1.0
        return PiecewiseCdf(xs, vals, interpolation=LINEAR, is_full_cdf=True)

    def to_dict(self):
        return {
            "kind": "density",
            "knots": [float(repr_round(v)) for v in self.knots],
            "density": [float(repr_round(v)) for v in self.density],
            "alpha_lo": repr_round(self.alpha_lo),
            "eta_hi": repr_round(self.eta_hi),
            "lipschitz": None if self.lipschitz is None else repr_round(self.lipschitz),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            knots=d["knots"],
            density=d["density"],
            alpha_lo=d["alpha_lo"],
            eta_hi=d["eta_hi"],
            lipschitz=d.get("lipschitz"),
        )


def cdf_eval(F, x):
    """Evaluate a CDF-like object at x (module-level convenience)."""
    return F.eval(x) if isinstance(F, PiecewiseCdf) else F.cdf(x)


def cdf_inverse(F, q):
    """Generalized inverse inf{x : F(x) >= q}."""
    return F.ppf(q)


def sample(F, rng, size=None):
    """Inverse-transform samples from a full CDF."""
    if isinstance(F, PiecewiseCdf) and not F.is_full_cdf:
        raise ValidationError("sampling requires a full CDF")
    u = rng.random() if size is None else rng.random(size)
    return F.ppf(u)


# -- distances --------------------------------------------------------------


def _union_breakpoints(F, G, lo=0.0, hi=1.0):
    pts = np.union1d(F.breakpoints, G.breakpoints)
    pts = pts[(pts >= lo) & (pts <= hi)]
    return np.union1d(pts, [lo, hi])


def kolmogorov(F, G, lo=0.0, hi=1.0):
    """sup_{x in [lo,hi]} |F(x) - G(x)|, exact over breakpoint unions."""
    pts = _union_breakpoints(F, G, lo, hi)
    d_right = np.abs(F.eval(pts) - G.eval(pts))
    # left limits at the window's lower endpoint would measure values below lo
    inner = pts[pts > lo]
    d_left = np.abs(F.eval_left(inner) - G.eval_left(inner))
    return float(max(d_right.max(), d_left.max() if d_left.size else 0.0))


def wasserstein1(F, G, lo=0.0, hi=1.0):
    """Integral of |F - G| over [lo,hi], closed form per linear segment."""
    pts = _union_breakpoints(F, G, lo, hi)
    a, b = pts[:-1], pts[1:]
    w = b - a
    da = F.eval(a) - G.eval(a)
    db = F.eval_left(b) - G.eval_left(b)
    same = da * db >= 0
    area_same = 0.5 * w * (np.abs(da) + np.abs(db))
    denom = np.abs(da) + np.abs(db)
    with np.errstate(divide="ignore", invalid="ignore"):
        area_cross = 0.5 * w * (da * da + db * db) / np.where(denom > 0, denom, 1.0)
    return float(np.sum(np.where(same, area_same, area_cross)))


def _sup_shift_diff(A, B, e):
    """sup_x [A(x) - B(x + e)] over x in [0, 1], both caddlag on [0,1]."""
    cand = np.concatenate([A.breakpoints, B.breakpoints - e, [0.0, 1.0]])
    cand = np.unique(np.clip(cand, 0.0, 1.0))
    right = A.eval(cand) - B.eval(cand + e)
    left = A.eval_left(cand) - B.eval_left(cand + e)
    return float(max(right.max(), left.max()))


def _levy_feasible(F, G, e):
    return (_sup_shift_diff(G, F, e) <= e + 1e-15
            and _sup_shift_diff(F, G, e) <= e + 1e-15)


def levy(F, G):
    """Levy band distance: min e with F(x-e)-e <= G(x) <= F(x+e)+e for all x.

    Bisection on e; the Kolmogorov distance is always feasible, so the search
    brackets from the feasible side and the result never exceeds it.
    """
    hi = kolmogorov(F, G)
    if hi <= 1e-15 or _levy_feasible(F, G, 0.0):
        return 0.0
    lo = 0.0
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if _levy_feasible(F, G, mid):
            hi = mid
        else:
            lo = mid
    return float(hi)


def dkw_band(n, delta):
    """Uniform empirical-CDF deviation bound sqrt(ln(2/delta)/(2n))."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    if not 0.0 < delta < 1.0:
        raise ValidationError("delta must lie in (0,1)")
    return math.sqrt(math.log(2.0 / delta) / (2.0 * n))


def empirical_cdf(xs):
    """Step CDF of a 1-D sample."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.size == 0:
        raise ValidationError("empty sample")
    uniq, counts = np.unique(xs, return_counts=True)
    vals = np.cumsum(counts) / xs.size
    vals[-1] = 1.0
    return PiecewiseCdf(uniq, vals, interpolation=STEP, is_full_cdf=True)


def uniform_cdf():
    """The identity CDF on [0,1]."""
    return PiecewiseCdf([0.0, 1.0], [0.0, 1.0], interpolation=LINEAR, is_full_cdf=True)
