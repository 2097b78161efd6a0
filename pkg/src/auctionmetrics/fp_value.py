"""Value-distribution recovery from first-price bid estimates.

Under equilibrium bidding, a bidder with value v best-responds with
b*(v) = argmax_b (v - b) * prod_{j != i} F_j(b), and the value CDF satisfies
G_i(v) = F_i(b*(v)). The estimator plugs staircase bid-CDF estimates into the
empirical utility, maximizes it exactly over the staircase breakpoints, and
composes G-hat_i(v) = F-hat_i(b-hat(v)) on a value grid.

The product prod_{j != i} F_j is estimated in one shot by relabeling each
observation (Y, Z) as the two-agent observation (Y, 1{Z = i}), which avoids
compounding k-1 separate CDF errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dist_core import STEP, PiecewiseCdf
from .errors import ValidationError
from .fp_estimator import FpEstimatorConfig, estimate_ghat, _ghat_to_cdf, full_support_params
from .isotonic import pav_nondecreasing


@dataclass(frozen=True)
class ValueEstimatorConfig:
    """Parameters for value-CDF estimation on an effective support.

    (p, gamma) declare prod_i F_i(p) >= gamma; zeta caps the value densities;
    lipschitz_L, when present, selects the Lipschitz-case guarantee (sup
    error); otherwise the general case targets Levy error with interior
    margin d. ``search_lo`` is the lower end of the best-response search
    interval (the guarantee region is [p,1] either way).
    """

    p: float
    gamma: float
    eps: float
    zeta: float
    delta: float = 0.05
    lipschitz_L: float | None = None
    d: float | None = None
    search_lo: float = 0.0
    grid_step: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValidationError("p must lie in [0,1]")
        if not 0.0 < self.gamma <= 1.0:
            raise ValidationError("gamma must lie in (0,1]")
        if not 0.0 < self.eps < 1.0:
            raise ValidationError("eps must lie in (0,1)")
        if self.zeta <= 0.0:
            raise ValidationError("zeta must be positive")

    @property
    def v_grid_step(self):
        return self.grid_step if self.grid_step is not None else min(self.eps / 4.0, 0.005)


def calibration_constants(config, k):
    """(eps1, eps0): the inner accuracy targets implied by the proof chain.

    eps1 is the bid-space resolution (eps/(2L) in the Lipschitz case, the
    interior margin d otherwise); eps0 = eps1^3 gamma^3 / (32 k^2 zeta^2) is
    the bid-CDF sup accuracy that guarantees it.
    """
    if config.lipschitz_L is not None:
        eps1 = config.eps / (2.0 * config.lipschitz_L)
    else:
        eps1 = config.d if config.d is not None else config.eps
    eps0 = (eps1 ** 3) * (config.gamma ** 3) / (32.0 * k * k * config.zeta ** 2)
    return eps1, eps0


def product_staircase(fhats, i):
    """prod_{j != i} F-hat_j as a single staircase (may terminate below 1)."""
    others = [F for j, F in enumerate(fhats, start=1) if j != i]
    bp = np.unique(np.concatenate([F.breakpoints for F in others]))
    vals = np.ones_like(bp)
    for F in others:
        vals = vals * F.eval(bp)
    return PiecewiseCdf(bp, np.maximum.accumulate(np.clip(vals, 0.0, 1.0)),
                        interpolation=STEP, is_full_cdf=False)


def empirical_utility(fhats, i, v, b):
    """u-hat_i(b; v) = (v - b) * prod_{j != i} F-hat_j(b)."""
    prod = 1.0
    for j, F in enumerate(fhats, start=1):
        if j != i:
            prod *= F.eval(b)
    return (v - b) * prod


def best_response(fhats, i, v, lo=0.0, hi=1.0):
    """Exact maximizer of the staircase utility over [lo, hi].

    Candidates are the product staircase's breakpoints plus the interval ends;
    ties go to the smallest bid.
    """
    prod = product_staircase(fhats, i)
    cand = prod.breakpoints[(prod.breakpoints >= lo) & (prod.breakpoints <= hi)]
    cand = np.union1d(cand, [lo, hi])
    util = (v - cand) * prod.eval(cand)
    return float(cand[int(np.argmax(util))])


def _compose_value_cdf(fhat_i, prod_i, config):
    """G-hat_i staircase on the value grid via best-response inversion."""
    dv = config.v_grid_step
    grid = np.arange(config.p, 1.0 + dv / 2.0, dv)
    grid = np.minimum(grid, 1.0)
    lo, hi = config.search_lo, 1.0
    cand = prod_i.breakpoints[(prod_i.breakpoints >= lo) & (prod_i.breakpoints <= hi)]
    cand = np.union1d(cand, [lo, hi])
    pv = prod_i.eval(cand)
    gvals = np.empty(grid.size)
    for m, v in enumerate(grid):
        util = (v - cand) * pv
        gvals[m] = fhat_i.eval(cand[int(np.argmax(util))])
    repaired, adjustment = pav_nondecreasing(gvals)
    repaired = np.clip(repaired, 0.0, 1.0)
    cdf = PiecewiseCdf(grid, repaired, interpolation=STEP, is_full_cdf=False)
    return cdf, adjustment


def estimate_value_cdf_effective(samples, config):
    """Per-bidder value-CDF estimates from first-price observations.

    Returns (list of staircases, diagnostics). Each staircase is 0 below p.
    """
    k = samples.k
    eps1, eps0 = calibration_constants(config, k)
    fp_config = FpEstimatorConfig(
        p=config.p, gamma=config.gamma, eps=config.gamma / 2.0, delta=config.delta
    )
    cdfs = []
    repairs = []
    for i in range(1, k + 1):
        ghat_i = estimate_ghat(samples, i, fp_config)
        fhat_i = _ghat_to_cdf(ghat_i)
        # two-agent relabeling: the "rest" pseudo-bidder wins when Z != i
        relabeled = _relabel_rest(samples, i)
        ghat_rest = estimate_ghat(relabeled, 2, fp_config)
        prod_i = _ghat_to_cdf(ghat_rest)
        cdf, adjustment = _compose_value_cdf(fhat_i, prod_i, config)
        cdfs.append(cdf)
        repairs.append(adjustment)
    diagnostics = {
        "eps0_used": eps0,
        "eps1_used": eps1,
        "isotonic_repairs": repairs,
        "grid_step": config.v_grid_step,
    }
    return cdfs, diagnostics


def _relabel_rest(samples, i):
    """View the sample as a two-agent auction: agent 1 = bidder i, agent 2 = rest."""
    from .auction_sim import FpSampleSet

    z2 = np.where(samples.z == i, 1, 2)
    return FpSampleSet(y=samples.y, z=z2, k=2, seed=samples.seed, model_id=samples.model_id)


def estimate_value_cdf_full(samples, lam, eps, zeta, lipschitz_L=None, delta=0.05):
    """Full-support value estimation via the effective-support reduction.

    Lipschitz case: eta = eps/2, p = eta, gamma = (lam*eta)^k, Wasserstein
    target eps. General case: p = 8*eta/11, d = 3*eta/11,
    gamma = (8*lam*eta/11)^k, Levy target eps.
    """
    k = samples.k
    eta = eps / 2.0
    if lipschitz_L is not None:
        _, p, gamma = full_support_params(k, lam, eps)
        d = None
    else:
        p = 8.0 * eta / 11.0
        d = 3.0 * eta / 11.0
        gamma = (8.0 * lam * eta / 11.0) ** k
        if gamma < 1e-300 or gamma == 0.0:
            raise ValidationError(
                "effective-support mass underflows; increase eps or reduce k"
            )
    config = ValueEstimatorConfig(
        p=p, gamma=gamma, eps=eps, zeta=zeta, delta=delta,
        lipschitz_L=lipschitz_L, d=d,
    )
    return estimate_value_cdf_effective(samples, config)


def lipschitz_estimate(fhat, eps0, eps):
    """Data-driven Lipschitz upper bound at separation eps0.

    L-hat = (max_x [F-hat(x+eps0) - F-hat(x)] + 2*eps) / eps0, where the max
    runs over the staircase's constancy intervals (including left limits).
    Whenever sup|F-hat - F| <= eps, L-hat dominates every true secant of F at
    separation eps0.
    """
    if eps0 <= 0.0:
        raise ValidationError("eps0 must be positive")
    bp = fhat.breakpoints
    cand = np.unique(np.clip(np.concatenate([bp, bp - eps0]), 0.0, 1.0))
    upper = np.maximum(fhat.eval(cand + eps0), fhat.eval_left(cand + eps0))
    lower = np.minimum(fhat.eval(cand), fhat.eval_left(cand))
    gap = float(np.max(upper - lower))
    return (gap + 2.0 * eps) / eps0
