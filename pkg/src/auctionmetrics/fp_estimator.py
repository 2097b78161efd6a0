"""First-price bid-distribution estimators.

From full observations (winning bid, winner) the bid CDFs are identified by
F_i(x) = exp(-integral_x^1 dH_i / H), where H is the CDF of the winning bid
and H_i its winner-i sub-CDF. The plug-in estimator replaces H, H_i with
empirical counterparts, giving F-hat_i = exp(-G-hat_i) with

    G-hat_i(x) = (1/n) sum_j 1{Y_j >= x, Z_j = i} / max(H-hat(Y_j), h_floor).

The module also provides the forward-difference density estimator and the
adaptive reserve-price estimator that works from winner identities alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad

from .dist_core import STEP, PiecewiseCdf, empirical_cdf, sub_cdf
from .errors import EstimationError, ValidationError


@dataclass(frozen=True)
class FpEstimatorConfig:
    """Effective-support estimation parameters.

    (p, gamma) declare Pr(Y <= p) >= gamma; eps is the target sup accuracy on
    [p, 1] (valid range (0, gamma/2]); delta the failure probability; h_floor
    clips the empirical denominator (default gamma/2).
    """

    p: float
    gamma: float
    eps: float
    delta: float = 0.05
    h_floor: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValidationError("p must lie in [0,1]")
        if not 0.0 < self.gamma <= 1.0:
            raise ValidationError("gamma must lie in (0,1]")
        if not 0.0 < self.eps <= self.gamma / 2.0 + 1e-12:
            raise ValidationError("eps must lie in (0, gamma/2]")
        if not 0.0 < self.delta < 1.0:
            raise ValidationError("delta must lie in (0,1)")
        if self.h_floor is not None and self.h_floor <= 0.0:
            raise ValidationError("h_floor must be positive")

    @property
    def floor(self):
        return self.h_floor if self.h_floor is not None else self.gamma / 2.0


def empirical_H(samples):
    """Empirical CDF of the winning bid."""
    if samples.n == 0:
        raise ValidationError("empty sample")
    return empirical_cdf(samples.y)


def empirical_Hi(samples, i):
    """Winner-i sub-CDF: (1/n) #{j : Y_j <= x, Z_j = i}."""
    if not 1 <= i <= samples.k:
        raise ValidationError("bidder index out of range")
    mask = samples.z == i
    ys = np.sort(samples.y[mask])
    if ys.size == 0:
        return sub_cdf([0.0], [0.0])
    uniq, counts = np.unique(ys, return_counts=True)
    vals = np.cumsum(counts) / samples.n
    return sub_cdf(uniq, vals)


@dataclass(eq=False)
class GHat:
    """Nonincreasing step function G-hat_i, evaluated lazily.

    ``ys`` are the sorted prices won by bidder i, ``suffix[m]`` the summed
    weights of samples with price >= ys[m] (so eval includes equality).
    """

    ys: np.ndarray
    suffix: np.ndarray

    def eval(self, x):
        x = np.asarray(x, dtype=np.float64)
        scalar = x.ndim == 0
        idx = np.searchsorted(self.ys, np.atleast_1d(x), side="left")
        ext = np.concatenate([self.suffix, [0.0]])
        out = ext[idx]
        return float(out[0]) if scalar else out

    @property
    def total(self):
        return float(self.suffix[0]) if self.suffix.size else 0.0


def estimate_ghat(samples, i, config):
    """The weighted tail sum G-hat_i from a first-price sample set."""
    if not 1 <= i <= samples.k:
        raise ValidationError("bidder index out of range")
    n = samples.n
    if n == 0:
        raise ValidationError("empty sample")
    order = np.sort(samples.y)
    hhat_at_y = np.searchsorted(order, samples.y, side="right") / n
    weights = 1.0 / (n * np.maximum(hhat_at_y, config.floor))
    mask = samples.z == i
    ys = samples.y[mask]
    w = weights[mask]
    srt = np.argsort(ys, kind="stable")
    ys = ys[srt]
    w = w[srt]
    # collapse duplicates so the step representation stays canonical
    uniq, start = np.unique(ys, return_index=True)
    sums = np.add.reduceat(w, start) if w.size else w
    suffix = np.cumsum(sums[::-1])[::-1] if sums.size else sums
    return GHat(ys=uniq, suffix=suffix)


def _ghat_to_cdf(ghat):
    """Materialize F-hat = exp(-G-hat) as a right-continuous staircase."""
    if ghat.ys.size == 0:
        return PiecewiseCdf([0.0], [1.0], interpolation=STEP, is_full_cdf=True)
    # value on [ys[m], ys[m+1}) is exp(-sum of weights strictly above ys[m])
    above = np.concatenate([ghat.suffix[1:], [0.0]])
    bp = np.concatenate([[0.0], ghat.ys]) if ghat.ys[0] > 0.0 else ghat.ys
    vals = np.concatenate([[math.exp(-ghat.total)], np.exp(-above)]) \
        if ghat.ys[0] > 0.0 else np.exp(-above)
    vals = np.minimum.accumulate(vals[::-1])[::-1]  # guard rounding
    vals = np.clip(vals, 0.0, 1.0)
    vals[-1] = 1.0
    return PiecewiseCdf(bp, vals, interpolation=STEP, is_full_cdf=True)


def estimate_bid_cdf_effective(samples, config):
    """Per-bidder staircase estimates F-hat_i = exp(-G-hat_i)."""
    return [_ghat_to_cdf(estimate_ghat(samples, i, config)) for i in range(1, samples.k + 1)]


def full_support_params(k, lam, eps):
    """Plug-in (eta, p, gamma) for the full-support reduction."""
    if lam <= 0.0:
        raise ValidationError("lambda must be positive")
    if not 0.0 < eps < 1.0:
        raise ValidationError("eps must lie in (0,1)")
    eta = eps / 2.0
    gamma = (lam * eta) ** k
    if gamma < 1e-300 or gamma == 0.0:
        raise ValidationError(
            "effective-support mass (lambda*eps/2)^k underflows; "
            "increase eps or reduce the number of bidders"
        )
    return eta, eta, gamma


def _zero_below(F, cut):
    """Restrict a staircase to 0 on [0, cut)."""
    keep = F.breakpoints >= cut
    bp = np.concatenate([[cut], F.breakpoints[keep]])
    vals = np.concatenate([[F.eval(cut)], F.values[keep]])
    bp, idx = np.unique(bp, return_index=True)
    return PiecewiseCdf(bp, vals[idx], interpolation=STEP, is_full_cdf=F.is_full_cdf)


def estimate_bid_cdf_full(samples, lam, eps, delta=0.05):
    """Full-support estimation: effective-support run plus a zero extension.

    Uses eta = eps/2, p = eta, gamma = (lam*eta)^k; the returned staircases
    are zeroed below eta, targeting Wasserstein error <= eps.
    """
    eta, p, gamma = full_support_params(samples.k, lam, eps)
    config = FpEstimatorConfig(p=p, gamma=gamma, eps=gamma / 2.0, delta=delta)
    return [_zero_below(F, eta) for F in estimate_bid_cdf_effective(samples, config)]


@dataclass(eq=False)
class DensityEstimate:
    """Forward-difference density (F(x+h) - F(x))/h on [p, 1].

    Piecewise constant whenever the input CDF is a staircase.
    """

    cdf: PiecewiseCdf
    h: float
    p: float

    def eval(self, x):
        x = np.asarray(x, dtype=np.float64)
        hi = self.cdf.eval(np.minimum(x + self.h, 1.0))
        lo = self.cdf.eval(x)
        out = (hi - lo) / self.h
        return float(out) if x.ndim == 0 else out

    def breakpoints(self):
        bp = np.concatenate([self.cdf.breakpoints, self.cdf.breakpoints - self.h])
        bp = np.unique(np.clip(bp, self.p, 1.0))
        return np.union1d(bp, [self.p, 1.0])


def estimate_density(fhat_cdf, h, p):
    """Forward-difference density estimator with bandwidth h."""
    if h <= 0.0:
        raise ValidationError("bandwidth must be positive")
    return DensityEstimate(cdf=fhat_cdf, h=h, p=p)


def density_bandwidth(eps0, lipschitz_L):
    """The L1-optimal bandwidth sqrt(eps0 / L) for a sup-error-eps0 CDF."""
    if eps0 <= 0 or lipschitz_L <= 0:
        raise ValidationError("eps0 and L must be positive")
    return math.sqrt(eps0 / lipschitz_L)


def population_bid_cdf(H, hi_density, x, tol=1e-9):
    """Identification identity with exact callbacks: exp(-int_x^1 h_i/H dz)."""
    val, _ = quad(lambda z: hi_density(z) / H(z), x, 1.0, epsabs=tol, epsrel=tol, limit=200)
    return math.exp(-val)


# -- partial observations ---------------------------------------------------


@dataclass(eq=False)
class _OracleBudget:
    calls: int = 0

    def draw(self, oracle, r, n, rng):
        self.calls += n
        return oracle(r, n, rng)


def noisy_quantile_search(estimate, target, T, eps1, lo=0.0, hi=1.0):
    """Bisection against a noisy monotone function.

    ``estimate(x)`` returns a fresh noisy evaluation; the search terminates
    early when the estimate lands within eps1/2 of the target and otherwise
    narrows the interval T times.
    """
    mid = 0.5 * (lo + hi)
    for _ in range(T):
        mid = 0.5 * (lo + hi)
        val = estimate(mid)
        if abs(val - target) <= eps1 / 2.0:
            return mid
        if val > target:
            hi = mid
        else:
            lo = mid
    return mid


def fp_partial_estimate(oracle, k, p, gamma, eps, delta=0.05, lipschitz_L=1.0,
                        seed=0, n_search=2000, n_point=30000, n_base=200000):
    """Bid-CDF estimation from adaptive reserve-price probes.

    The observer plants reserves and sees only who won. The winning-bid CDF at
    reserve x is the planted-win frequency; the winner-i sub-CDF is the win
    frequency of i at reserve 0 minus at reserve x. Quantile grids of both are
    located by noisy binary search, and the tail sum G-hat_i is assembled on
    the merged grid.

    Returns (list of staircases, diagnostics with the oracle-call budget).
    """
    if not (0.0 < gamma <= 1.0 and 0.0 <= p <= 1.0):
        raise ValidationError("invalid effective-support pair")
    if not 0.0 < eps < 1.0:
        raise ValidationError("eps must lie in (0,1)")
    rng = np.random.default_rng(seed)
    budget = _OracleBudget()

    delta_grid = gamma * gamma * eps / 6.0
    eps1 = gamma * gamma * eps / 24.0
    beta = gamma * eps * eps / (24.0 * (k + 1))
    T = max(1, math.ceil(math.log2(max(2.0 * lipschitz_L / eps1, 2.0))))

    levels = np.arange(gamma, 1.0, delta_grid)
    levels = np.unique(np.append(levels, 1.0))

    base_winners = budget.draw(oracle, 0.0, n_base, rng)
    base_freq = np.array([(base_winners == i).mean() for i in range(1, k + 1)])

    def h_at(x):
        return float((budget.draw(oracle, x, n_search, rng) == k + 1).mean())

    vhat = np.array([noisy_quantile_search(h_at, u, T, eps1) for u in levels])

    cdfs = []
    for i in range(1, k + 1):
        def hi_at(x, i=i):
            winners = budget.draw(oracle, x, n_search, rng)
            return float(base_freq[i - 1] - (winners == i).mean())

        what = np.array([noisy_quantile_search(hi_at, u, T, eps1) for u in levels])
        xs = np.unique(np.concatenate([vhat, what]))
        xs = xs[(xs >= p - 1e-12) & (xs <= 1.0)]
        if xs.size < 2:
            raise EstimationError("degenerate probe grid", {"oracle_calls": budget.calls})

        h_vals = np.empty(xs.size)
        hi_vals = np.empty(xs.size)
        for s, x in enumerate(xs):
            winners = budget.draw(oracle, float(x), n_point, rng)
            h_vals[s] = (winners == k + 1).mean()
            hi_vals[s] = base_freq[i - 1] - (winners == i).mean()
        hi_vals = np.maximum.accumulate(hi_vals)  # monotone repair of the sub-CDF

        increments = np.diff(hi_vals)
        denom = np.maximum(h_vals[:-1], gamma / 2.0)
        tail = np.concatenate([np.cumsum((increments / denom)[::-1])[::-1], [0.0]])
        fvals = np.clip(np.exp(-tail), 0.0, 1.0)
        fvals = np.maximum.accumulate(fvals)
        bp = np.concatenate([[min(p, xs[0])], xs]) if xs[0] > p else xs
        vals = np.concatenate([[fvals[0]], fvals]) if xs[0] > p else fvals
        bp, idx = np.unique(bp, return_index=True)
        vals = vals[idx]
        vals[-1] = max(vals[-1], 1.0) if xs[-1] >= 1.0 - 1e-9 else vals[-1]
        cdfs.append(PiecewiseCdf(bp, np.clip(vals, 0.0, 1.0), interpolation=STEP,
                                 is_full_cdf=bool(vals[-1] >= 1.0 - 1e-12)))

    diagnostics = {
        "oracle_calls": budget.calls,
        "T": T,
        "delta_grid": delta_grid,
        "eps1": eps1,
        "beta": beta,
        "levels": int(levels.size),
        "n_search": n_search,
        "n_point": n_point,
    }
    return cdfs, diagnostics
