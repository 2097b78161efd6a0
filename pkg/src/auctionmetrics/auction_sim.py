"""Auction data generation and equilibrium bidding strategies.

Covers the four observation models (first-price, second-price, and the two
reserve-price probe variants), symmetric and asymmetric Bayes-Nash
equilibrium computation, and the hard-instance fixture pair used by the
lower-bound experiments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dist_core import LINEAR, BoundedDensityModel, PiecewiseCdf
from .errors import EstimationError, ValidationError


@dataclass(eq=False)
class AuctionModel:
    """k independent bidders with bid distributions on [0,1].

    ``bid_dists`` entries are PiecewiseCdf or BoundedDensityModel. Optional
    ``value_dists`` (BoundedDensityModel) feed the equilibrium solver.
    Metadata fields are declared bounds used by estimator configs, not
    verified against the distributions beyond construction checks.
    """

    bid_dists: list
    value_dists: list | None = None
    lam: float | None = None
    alpha: float | None = None
    eta: float | None = None
    lipschitz: float | None = None
    zeta: float | None = None
    model_id: str | None = None

    def __post_init__(self):
        if len(self.bid_dists) < 2:
            raise ValidationError("an auction needs k >= 2 bidders")
        for d in self.bid_dists:
            if not isinstance(d, (PiecewiseCdf, BoundedDensityModel)):
                raise ValidationError("bid_dists entries must be CDFs or density models")
        if self.value_dists is not None and len(self.value_dists) != len(self.bid_dists):
            raise ValidationError("value_dists must have one entry per bidder")

    @property
    def k(self):
        return len(self.bid_dists)

    def bid_cdf(self, i):
        """Ground-truth bid CDF of bidder i (1-based) as a PiecewiseCdf."""
        d = self.bid_dists[i - 1]
        return d if isinstance(d, PiecewiseCdf) else d.to_cdf()

    def bid_cdf_eval(self, i, x):
        d = self.bid_dists[i - 1]
        return d.eval(x) if isinstance(d, PiecewiseCdf) else d.cdf(x)

    def to_dict(self):
        def enc(d):
            out = d.to_dict()
            if isinstance(d, PiecewiseCdf):
                out["kind"] = "cdf"
            return out

        return {
            "bid_dists": [enc(d) for d in self.bid_dists],
            "value_dists": None if self.value_dists is None
            else [d.to_dict() for d in self.value_dists],
            "metadata": {
                "lambda": self.lam, "alpha": self.alpha, "eta": self.eta,
                "lipschitz": self.lipschitz, "zeta": self.zeta,
                "model_id": self.model_id,
            },
        }

    @classmethod
    def from_dict(cls, d):
        def dec(obj):
            kind = obj.get("kind", "cdf")
            if kind == "density":
                return BoundedDensityModel.from_dict(obj)
            return PiecewiseCdf.from_dict(obj)

        meta = d.get("metadata", {})
        vds = d.get("value_dists")
        return cls(
            bid_dists=[dec(o) for o in d["bid_dists"]],
            value_dists=None if vds is None else [BoundedDensityModel.from_dict(o) for o in vds],
            lam=meta.get("lambda"), alpha=meta.get("alpha"), eta=meta.get("eta"),
            lipschitz=meta.get("lipschitz"), zeta=meta.get("zeta"),
            model_id=meta.get("model_id"),
        )


@dataclass(frozen=True)
class FpObservation:
    y: float
    z: int


@dataclass(frozen=True)
class SpObservation:
    y: float
    w: int


@dataclass(frozen=True)
class PartialFpObservation:
    r: float
    z: int


@dataclass(frozen=True)
class PartialSpObservation:
    r: float
    z: int
    q: bool


@dataclass(eq=False)
class FpSampleSet:
    """First-price observation log: winning bid y and winner index z (1-based)."""

    y: np.ndarray
    z: np.ndarray
    k: int
    seed: int | None = None
    model_id: str | None = None

    def __post_init__(self):
        self.y = np.ascontiguousarray(self.y, dtype=np.float64)
        self.z = np.ascontiguousarray(self.z, dtype=np.int64)
        if self.y.shape != self.z.shape or self.y.ndim != 1:
            raise ValidationError("y and z must be 1-D arrays of equal length")
        if self.y.size and (self.y.min() < 0 or self.y.max() > 1):
            raise ValidationError("prices must lie in [0,1]")
        if self.z.size and (self.z.min() < 1 or self.z.max() > self.k):
            raise ValidationError("winner indices must lie in 1..k")

    @property
    def n(self):
        return self.y.size


@dataclass(eq=False)
class SpSampleSet:
    """Second-price observation log: price y (second-highest bid) and winner w."""

    y: np.ndarray
    w: np.ndarray
    k: int
    seed: int | None = None
    model_id: str | None = None

    def __post_init__(self):
        self.y = np.ascontiguousarray(self.y, dtype=np.float64)
        self.w = np.ascontiguousarray(self.w, dtype=np.int64)
        if self.y.shape != self.w.shape or self.y.ndim != 1:
            raise ValidationError("y and w must be 1-D arrays of equal length")
        if self.y.size and (self.y.min() < 0 or self.y.max() > 1):
            raise ValidationError("prices must lie in [0,1]")
        if self.w.size and (self.w.min() < 1 or self.w.max() > self.k):
            raise ValidationError("winner indices must lie in 1..k")

    @property
    def n(self):
        return self.y.size


def _bid_matrix(model, n, rng_or_seed):
    """k x n matrix of independent bids, one substream per bidder."""
    if isinstance(rng_or_seed, np.random.Generator):
        streams = rng_or_seed.spawn(model.k)
    else:
        streams = [np.random.default_rng(s)
                   for s in np.random.SeedSequence(rng_or_seed).spawn(model.k)]
    cols = []
    for d, rng in zip(model.bid_dists, streams):
        u = rng.random(n)
        cols.append(d.ppf(u))
    return np.vstack(cols)


def simulate_fp(model, n, seed):
    """n draws of (max bid, argmax bidder); ties go to the lowest index."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    x = _bid_matrix(model, n, seed)
    z = np.argmax(x, axis=0) + 1
    y = x[z - 1, np.arange(n)]
    return FpSampleSet(y=y, z=z, k=model.k, seed=_seed_int(seed), model_id=model.model_id)


def simulate_sp(model, n, seed):
    """n draws of (second-highest bid, argmax bidder)."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    x = _bid_matrix(model, n, seed)
    w = np.argmax(x, axis=0) + 1
    y = np.partition(x, -2, axis=0)[-2]
    return SpSampleSet(y=y, w=w, k=model.k, seed=_seed_int(seed), model_id=model.model_id)


def _seed_int(seed):
    return int(seed) if isinstance(seed, (int, np.integer)) else None


def fp_partial_winners(model, r, n, rng):
    """Vectorized reserve-price probe: winner indices in 1..k+1 (k+1 = reserve).

    The planted bid wins ties, so Pr(winner = k+1) = prod_j F_j(r) exactly.
    """
    if not 0.0 <= r <= 1.0:
        raise ValidationError("reserve must lie in [0,1]")
    x = _bid_matrix(model, n, rng)
    top = x.max(axis=0)
    winners = np.where(r >= top, model.k + 1, np.argmax(x, axis=0) + 1)
    return winners


def fp_partial_oracle(model, r, rng):
    """Single reserve-price probe for the first-price partial model."""
    return int(fp_partial_winners(model, r, 1, rng)[0])


def sp_partial_outcomes(model, r, n, rng):
    """Vectorized second-price probe: (winners in 1..k+1, reserve-triggered flags).

    The flag is true iff the reserve binds the transaction, i.e. the
    second-highest of the k bids is <= r (either some bidder beats r while all
    others are below it, or all bids fall below r and the reserve wins).
    """
    if not 0.0 <= r <= 1.0:
        raise ValidationError("reserve must lie in [0,1]")
    x = _bid_matrix(model, n, rng)
    top = x.max(axis=0)
    second = np.partition(x, -2, axis=0)[-2]
    winners = np.where(r >= top, model.k + 1, np.argmax(x, axis=0) + 1)
    q = second <= r
    return winners, q


def sp_partial_oracle(model, r, rng):
    """Single second-price reserve probe: (winner in 1..k+1, q flag)."""
    winners, q = sp_partial_outcomes(model, r, 1, rng)
    return int(winners[0]), bool(q[0])


def make_fp_partial_oracle(model):
    """Batch oracle handle ``oracle(r, n, rng) -> winners`` for estimators."""

    def oracle(r, n, rng):
        return fp_partial_winners(model, r, n, rng)

    oracle.k = model.k
    return oracle


def make_sp_partial_oracle(model):
    """Batch oracle handle ``oracle(r, n, rng) -> (winners, q)`` for estimators."""

    def oracle(r, n, rng):
        return sp_partial_outcomes(model, r, n, rng)

    oracle.k = model.k
    return oracle


# -- equilibrium -----------------------------------------------------------


def symmetric_equilibrium_bid(value_cdf, k, v, quad_points=4097):
    """Symmetric first-price equilibrium bid for value v among k bidders.

    beta(v) = v - (integral_0^v F(x)^{k-1} dx) / F(v)^{k-1}, with beta(0)=0.
    """
    if not 0.0 <= v <= 1.0:
        raise ValidationError("v must lie in [0,1]")
    fv = float(value_cdf.eval(v)) if isinstance(value_cdf, PiecewiseCdf) else float(value_cdf.cdf(v))
    denom = fv ** (k - 1)
    if denom <= 0.0 or v == 0.0:
        return 0.0
    xs = np.linspace(0.0, v, quad_points)
    vals = value_cdf.eval(xs) if isinstance(value_cdf, PiecewiseCdf) else value_cdf.cdf(xs)
    trapz = getattr(np, "trapezoid", None) or np.trapz
    integral = float(trapz(vals ** (k - 1), xs))
    return v - integral / denom


@dataclass(eq=False)
class InverseBidProfile:
    """Inverse equilibrium bid functions alpha_i on a shared bid grid.

    ``grid`` is ascending in (0, eta_eq]; ``alphas`` is a k x m matrix with
    alpha_i(grid) rows; alpha_i(eta_eq) = 1 and alpha_i(0+) ~ 0.
    """

    grid: np.ndarray
    alphas: np.ndarray
    eta_eq: float
    defect: float = 0.0

    def __post_init__(self):
        self.grid = np.ascontiguousarray(self.grid, dtype=np.float64)
        self.alphas = np.ascontiguousarray(self.alphas, dtype=np.float64)
        if self.alphas.ndim != 2 or self.alphas.shape[1] != self.grid.size:
            raise ValidationError("alphas must be k x len(grid)")
        if np.any(np.diff(self.grid) <= 0):
            raise ValidationError("bid grid must be strictly ascending")
        if np.any(self.alphas < self.grid - 1e-9):
            raise ValidationError("inverse bids must satisfy alpha_i(b) >= b")

    def alpha(self, i, b):
        """Interpolated alpha_i(b) (1-based bidder index)."""
        return np.interp(b, self.grid, self.alphas[i - 1])


def _value_cdf_pdf(dist):
    if isinstance(dist, BoundedDensityModel):
        return dist.cdf, dist.pdf
    if isinstance(dist, PiecewiseCdf) and dist.interpolation == LINEAR:
        bp, vals = dist.breakpoints, dist.values
        slopes = np.diff(vals) / np.diff(bp)

        def pdf(x):
            idx = np.clip(np.searchsorted(bp, x, side="right") - 1, 0, slopes.size - 1)
            return slopes[idx]

        return dist.eval, pdf
    raise ValidationError("equilibrium solving needs value distributions with densities")


def _fast_scalar_cdf_pdf(dist):
    """Plain-float (cdf, pdf) closures for the ODE integrator's hot loop."""
    from bisect import bisect_right

    if isinstance(dist, BoundedDensityModel):
        kn = dist.knots.tolist()
        de = dist.density.tolist()
        cu = dist._cum.tolist()
        last = len(kn) - 2

        def cdf(x):
            if x <= 0.0:
                return 0.0
            if x >= 1.0:
                return 1.0
            j = min(bisect_right(kn, x) - 1, last)
            dx = x - kn[j]
            s = (de[j + 1] - de[j]) / (kn[j + 1] - kn[j])
            return cu[j] + de[j] * dx + 0.5 * s * dx * dx

        def pdf(x):
            if x <= 0.0:
                return de[0]
            if x >= 1.0:
                return de[-1]
            j = min(bisect_right(kn, x) - 1, last)
            s = (de[j + 1] - de[j]) / (kn[j + 1] - kn[j])
            return de[j] + s * (x - kn[j])

        return cdf, pdf
    if isinstance(dist, PiecewiseCdf) and dist.interpolation == LINEAR:
        bp = dist.breakpoints.tolist()
        vals = dist.values.tolist()
        last = len(bp) - 2

        def cdf(x):
            if x <= bp[0]:
                return 0.0 if x < bp[0] else vals[0]
            if x >= bp[-1]:
                return vals[-1]
            j = min(bisect_right(bp, x) - 1, last)
            t = (x - bp[j]) / (bp[j + 1] - bp[j])
            return vals[j] + t * (vals[j + 1] - vals[j])

        def pdf(x):
            j = min(max(bisect_right(bp, x) - 1, 0), last)
            return (vals[j + 1] - vals[j]) / (bp[j + 1] - bp[j])

        return cdf, pdf
    raise ValidationError("equilibrium solving needs value distributions with densities")


def _integrate_backward(G, g, k, eta, grid_size):
    """RK4 for the inverse-bid ODE system from (eta, 1) down toward b=0.

    Returns (grid ascending, alphas k x m, crashed flag). A crash means some
    alpha_i(b) collapsed onto b (terminal bid too high). G and g are
    plain-float callables; the loop stays in Python floats for speed.
    """
    bs = np.linspace(eta, eta * 1e-4, grid_size)
    a = [1.0] * k
    out = np.empty((k, grid_size))
    out[:, 0] = 1.0
    idx = range(k)

    def deriv(b, a):
        for ai in a:
            if ai - b < 1e-12 or ai > 1.0 + 1e-9 or ai < 0.0:
                return None
        inv = [1.0 / (a[i] - b) for i in idx]
        s = sum(inv)
        return [
            (G[i](a[i]) / max(g[i](a[i]), 1e-12))
            * ((s - (k - 1) * inv[i]) / (k - 1))
            for i in idx
        ]

    crashed = False
    for m in range(1, grid_size):
        h = bs[m] - bs[m - 1]  # negative
        b0 = bs[m - 1]
        half = h / 2.0
        k1 = deriv(b0, a)
        k2 = deriv(b0 + half, [a[i] + half * k1[i] for i in idx]) if k1 else None
        k3 = deriv(b0 + half, [a[i] + half * k2[i] for i in idx]) if k2 else None
        k4 = deriv(b0 + h, [a[i] + h * k3[i] for i in idx]) if k3 else None
        if k4 is None:
            crashed = True
            out[:, m:] = np.nan
            break
        a = [min(a[i] + (h / 6.0) * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]), 1.0)
             for i in idx]
        if any(a[i] - bs[m] < 1e-12 for i in idx):
            crashed = True
            out[:, m:] = np.nan
            break
        out[:, m] = a
    return bs[::-1], out[:, ::-1], crashed


def solve_asymmetric_equilibrium(model, grid_size=400, tol=1e-3, max_bisect=60):
    """Inverse equilibrium bid functions by shooting on the terminal bid.

    Integrates the inverse-bid ODE system backward from alpha_i(eta)=1 on a
    fixed grid and bisects eta: a trajectory that collapses onto the diagonal
    means eta is too high; a positive boundary defect at the smallest grid
    cell means eta is too low.
    """
    if model.value_dists is None:
        raise ValidationError("model has no value distributions")
    k = model.k
    G, g = [], []
    for d in model.value_dists:
        cdf, pdf = _fast_scalar_cdf_pdf(d)
        G.append(cdf)
        g.append(pdf)

    lo, hi = 1e-6, 1.0
    best = None
    for _ in range(max_bisect):
        eta = 0.5 * (lo + hi)
        grid, alphas, crashed = _integrate_backward(G, g, k, eta, grid_size)
        if crashed:
            hi = eta
            continue
        defect = float(np.max(alphas[:, 0]))
        if defect <= tol:
            cand = InverseBidProfile(grid=grid, alphas=alphas, eta_eq=eta, defect=defect)
            if best is None or defect < best.defect:
                best = cand
            if defect <= 0.1 * tol:
                break
        # smaller eta inflates the defect; push eta upward until it crashes
        lo = eta
        if hi - lo < 1e-14:
            break
    if best is None:
        raise EstimationError(
            "equilibrium shooting did not converge",
            diagnostics={"grid_size": grid_size, "tol": tol},
        )
    return best


def equilibrium_residual(profile, model, i, b_points):
    """Residual of the cross-bidder identity at interior bid points.

    Checks sum_{j != i} d/db log G_j(alpha_j(b)) - 1/(alpha_i(b) - b) by
    central finite differences on the solved grid.
    """
    G = [_value_cdf_pdf(d)[0] for d in model.value_dists]
    bs = profile.grid
    res = []
    for b in np.atleast_1d(b_points):
        m = int(np.clip(np.searchsorted(bs, b), 1, bs.size - 2))
        db = bs[m + 1] - bs[m - 1]
        total = 0.0
        for j in range(model.k):
            if j == i - 1:
                continue
            hi_val = G[j](profile.alphas[j, m + 1])
            lo_val = G[j](profile.alphas[j, m - 1])
            total += (np.log(max(hi_val, 1e-300)) - np.log(max(lo_val, 1e-300))) / db
        gap = profile.alphas[i - 1, m] - bs[m]
        res.append(total - 1.0 / gap)
    return np.asarray(res)


# -- lower-bound fixtures ---------------------------------------------------


def lower_bound_fixture(k, eps, lam):
    """The hard instance pair (D, D').

    All bidders except the first share a mixture of Unif[0,1] (weight lam) and
    Unif[3/4,1]; the first bidder's distribution hides (1-lam) mass either in
    [0, eps/4] (D) or [3*eps/4, eps] (D'). Both CDFs are piecewise linear.
    """
    if not (0.0 < eps < 0.5 and 0.0 < lam < 0.5):
        raise ValidationError("eps and lambda must lie in (0, 1/2)")
    base = PiecewiseCdf(
        [0.0, 0.75, 1.0], [0.0, 0.75 * lam, 1.0],
        interpolation=LINEAR, is_full_cdf=True,
    )
    f1 = PiecewiseCdf(
        [0.0, eps / 4.0, 1.0],
        [0.0, lam * eps / 4.0 + (1.0 - lam), 1.0],
        interpolation=LINEAR, is_full_cdf=True,
    )
    f1p = PiecewiseCdf(
        [0.0, 3.0 * eps / 4.0, eps, 1.0],
        [0.0, lam * 3.0 * eps / 4.0, lam * eps + (1.0 - lam), 1.0],
        interpolation=LINEAR, is_full_cdf=True,
    )
    rest = [base] * (k - 1)
    d = AuctionModel(bid_dists=[f1] + rest, lam=lam, model_id="lower-bound-D")
    dp = AuctionModel(bid_dists=[f1p] + rest, lam=lam, model_id="lower-bound-Dprime")
    return d, dp
