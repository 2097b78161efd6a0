"""Second-price bid-distribution estimation.

With observations (Y, W) = (price, winner), the winner-i sub-CDF
G_i(x) = Pr(W = i, Y <= x) identifies U*_i(x) = prod_{j != i} F_j(x) through
a fixed-point relation: U*_i(x) = U*_i(nu) + int_nu^x g_i(z) / (1 - H_i(z)) dz
where H_i is a power-product of the U*_j. The pipeline discretizes [nu, 1-theta]
into macro-intervals on which the discretized map is a 1/4-contraction,
iterates it to a fixed point per interval, and converts the resulting U
estimates back into per-bidder CDFs.

The theoretical parameter choices are astronomically small; the pipeline runs
with overridable desk defaults and verifies the contraction and residual
properties at run time instead (see diagnostics).

A separate reserve-price probe path recovers F_j(x) pointwise from the
identity Pr(reserve binds with j winning or unsold) = prod_{l != j} F_l(x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dist_core import STEP, PiecewiseCdf, dkw_band, empirical_cdf, sub_cdf
from .errors import EstimationError, ValidationError
from .fp_estimator import noisy_quantile_search
from .isotonic import pav_nondecreasing

RULE_JACOBIAN = "jacobian"
RULE_PAPER = "paper"


@dataclass(frozen=True)
class SpParams:
    """Pipeline parameters.

    alpha/eta bound the bid densities; eps is the target sup accuracy;
    theta trims the edges (estimates are pinned to 0/1 outside [theta, 1-theta]);
    nu is the grid start; micro_delta the micro-cell width; eps_g the uniform
    empirical-CDF tolerance; fp_iters the iteration count per macro-interval.
    ``interval_rule`` selects the macro-interval budget: "jacobian" uses the
    direct operator-norm bound of the discretized map over the state box (the
    default; feasible at desk scale), "paper" the original conservative form.
    """

    alpha: float
    eta: float
    eps: float
    theta: float
    nu: float
    micro_delta: float
    eps_g: float
    fp_iters: int
    contractivity_cap: float = 0.25
    interval_rule: str = RULE_JACOBIAN

    def __post_init__(self):
        if not 0.0 < self.alpha <= self.eta:
            raise ValidationError("need 0 < alpha <= eta")
        if not 0.0 < self.eps < 1.0:
            raise ValidationError("eps must lie in (0,1)")
        if not 0.0 < self.theta < 0.5:
            raise ValidationError("theta must lie in (0, 0.5)")
        if not 0.0 < self.nu < 1.0 - self.theta:
            raise ValidationError("nu must lie in (0, 1-theta)")
        if not 0.0 < self.micro_delta < self.nu:
            raise ValidationError("micro_delta must lie in (0, nu)")
        if self.eps_g <= 0.0:
            raise ValidationError("eps_g must be positive")
        if self.fp_iters < 0:
            raise ValidationError("fp_iters must be >= 0")
        if self.interval_rule not in (RULE_JACOBIAN, RULE_PAPER):
            raise ValidationError(f"unknown interval rule {self.interval_rule!r}")

    @classmethod
    def desk(cls, alpha, eta, eps, n, **overrides):
        """Desk-scale defaults sized for finite machines (all overridable)."""
        theta = overrides.pop("theta", max(eps / (16.0 * eta), 0.02))
        nu = overrides.pop("nu", min(0.05, theta / 2.0))
        eps_g = overrides.pop("eps_g", dkw_band(n, 0.05))
        fp_iters = overrides.pop(
            "fp_iters", math.ceil(math.log(4.0 / max(eps_g, 1e-9), 4.0))
        )
        # near x = 1-theta a single micro cell contributes about
        # eta^2*delta/(alpha^2*theta) to the contraction budget; keep that
        # under ~1/8 so the greedy construction can always reach 1-theta
        cap = overrides.get("contractivity_cap", 0.25)
        micro_delta = overrides.pop(
            "micro_delta",
            min(1e-3, cap * alpha * alpha * theta / (2.0 * eta * eta)),
        )
        if micro_delta >= nu:
            micro_delta = nu / 10.0
        return cls(alpha=alpha, eta=eta, eps=eps, theta=theta, nu=nu,
                   micro_delta=micro_delta, eps_g=eps_g, fp_iters=fp_iters,
                   **overrides)


@dataclass(eq=False)
class SpGrid:
    """Macro/micro interval layout on [nu, 1-theta].

    ``endpoints[0] = nu`` and ``endpoints[tau]`` closes macro-interval tau,
    which holds ``micro_counts[tau-1]`` micro cells of width micro_delta.
    """

    endpoints: np.ndarray
    micro_counts: list
    micro_delta: float

    def __post_init__(self):
        self.endpoints = np.ascontiguousarray(self.endpoints, dtype=np.float64)
        if len(self.micro_counts) != self.endpoints.size - 1:
            raise ValidationError("micro_counts must have one entry per macro-interval")
        if any(c < 1 for c in self.micro_counts):
            raise ValidationError("every macro-interval must contain a micro cell")

    @property
    def T(self):
        return len(self.micro_counts)

    def micro_points(self, tau):
        """Micro endpoints x_{tau,1..l} (1-based tau)."""
        x0 = self.endpoints[tau - 1]
        return x0 + self.micro_delta * np.arange(1, self.micro_counts[tau - 1] + 1)

    def all_points(self):
        return np.concatenate([self.micro_points(t) for t in range(1, self.T + 1)])


@dataclass(eq=False)
class FixedPointState:
    """Per-macro-interval state: U is k x l, V the left-boundary k-vector."""

    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        self.U = np.ascontiguousarray(self.U, dtype=np.float64)
        self.V = np.ascontiguousarray(self.V, dtype=np.float64)
        if self.U.ndim != 2 or self.V.shape != (self.U.shape[0],):
            raise ValidationError("U must be k x l with a matching V vector")


@dataclass(eq=False)
class CoarseU:
    """Monotone step function: (1/n) sum 1/(1 - Y_j) over wins by bidder i."""

    ys: np.ndarray
    cum: np.ndarray

    def eval(self, x):
        x = np.asarray(x, dtype=np.float64)
        scalar = x.ndim == 0
        idx = np.searchsorted(self.ys, np.atleast_1d(x), side="right")
        ext = np.concatenate([[0.0], self.cum])
        out = ext[idx]
        return float(out[0]) if scalar else out


class CallableEval:
    """Adapter exposing .eval for closed-form population callbacks."""

    def __init__(self, fn):
        self._fn = fn

    def eval(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.asarray(self._fn(x), dtype=np.float64)
        if out.shape != x.shape:
            out = np.broadcast_to(out, x.shape).copy()
        return float(out) if x.ndim == 0 else out


def empirical_G_sp(samples, i):
    """Winner-i empirical sub-CDF of the price."""
    if samples.n == 0:
        raise ValidationError("empty sample")
    if not 1 <= i <= samples.k:
        raise ValidationError("bidder index out of range")
    ys = np.sort(samples.y[samples.w == i])
    if ys.size == 0:
        return sub_cdf([0.0], [0.0])
    uniq, counts = np.unique(ys, return_counts=True)
    vals = np.cumsum(counts) / samples.n
    return sub_cdf(uniq, vals)


def coarse_U(samples, i, theta):
    """Weighted empirical proxy for U*_i, valid on [0, 1 - theta/4]."""
    if samples.n == 0:
        raise ValidationError("empty sample")
    mask = samples.w == i
    ys = samples.y[mask]
    weights = 1.0 / (samples.n * np.maximum(1.0 - ys, theta / 8.0))
    srt = np.argsort(ys, kind="stable")
    return CoarseU(ys=ys[srt], cum=np.cumsum(weights[srt]))


def _h_clip_bounds(params, xs):
    lo = params.alpha * xs
    hi = np.minimum(1.0 - params.alpha * (1.0 - xs), params.eta * xs)
    return lo, np.maximum(hi, lo)


def _state_box(coarse_list, params, xs):
    """Elementwise S^(tau) bounds (lower, upper), each k x len(xs)."""
    lower = np.vstack([c.eval(xs) for c in coarse_list]) / (2.0 * params.eta)
    upper = np.vstack([c.eval(xs) for c in coarse_list]) * (2.0 / params.alpha)
    return lower, upper


def build_macro_intervals(samples, params):
    """Greedy macro/micro construction from a second-price sample set."""
    ghat_list = [empirical_G_sp(samples, i) for i in range(1, samples.k + 1)]
    coarse_list = [coarse_U(samples, i, params.theta) for i in range(1, samples.k + 1)]
    grid, _ = _build_grid(ghat_list, coarse_list, params, samples.k)
    return grid


def _jacobian_rowsum(params, xs, coarse_vals, k):
    """Columnwise bound on the max row sum of dH/dU over the state box.

    H_i is the clipped power product prod_{j != i} U_j^{1/(k-1)} / U_i^{(k-2)/(k-1)};
    each partial derivative H_i/((k-1)U_j) is maximized over the box
    [coarse/(2 eta), 2 coarse/alpha] in closed form (the exponents have fixed
    signs) and additionally capped by hbar/U_j^min, since the clip zeroes the
    derivative wherever the product exceeds hbar. For k = 2 the bound is
    exactly 1: H_1 = U_2 there.
    """
    _, hbar = _h_clip_bounds(params, xs)
    box_lo = np.maximum(coarse_vals / (2.0 * params.eta), 1e-12)
    box_hi = np.maximum(coarse_vals * (2.0 / params.alpha), box_lo)
    log_lo = np.log(box_lo)
    log_hi = np.log(box_hi)
    hi_sum = log_hi.sum(axis=0)
    rows = np.empty_like(coarse_vals)
    for i in range(k):
        total = np.zeros(xs.size)
        for j in range(k):
            if j == i:
                continue
            log_b = ((hi_sum - log_hi[i] - log_hi[j]) / (k - 1.0)
                     + (2.0 - k) / (k - 1.0) * log_lo[j]
                     - (k - 2.0) / (k - 1.0) * log_lo[i])
            total += np.minimum(np.exp(log_b), hbar / box_lo[j]) / (k - 1.0)
        if k > 2:
            log_bii = ((hi_sum - log_hi[i]) / (k - 1.0)
                       - ((k - 2.0) / (k - 1.0) + 1.0) * log_lo[i])
            total += ((k - 2.0) / (k - 1.0)
                      * np.minimum(np.exp(log_bii), hbar / box_lo[i]))
        rows[i] = total
    return rows, hbar


def _jacobian_budget(deltas, xs, coarse_vals, params, k):
    """Cumulative contraction budget max_i sum_m Delta_{i,m} row_{i,m}/(1-hbar_m)^2."""
    rows, hbar = _jacobian_rowsum(params, xs, coarse_vals, k)
    per_cell = deltas * rows / (1.0 - hbar)[None, :] ** 2
    return np.cumsum(per_cell, axis=1).max(axis=0)


def _build_grid(ghat_list, coarse_list, params, k):
    """Greedy construction; returns (SpGrid, per-interval budget values)."""
    delta = params.micro_delta
    x_prev = params.nu
    endpoints = [x_prev]
    micro_counts = []
    gammas = []
    target = 1.0 - params.theta
    while x_prev < target - 1e-12:
        cap = min(2.0 * x_prev, 1.0 - params.theta / 2.0)
        l_max = int(math.floor((cap - x_prev) / delta + 1e-9))
        if l_max < 1:
            raise EstimationError(
                f"macro-interval construction stalled at x={x_prev:.6g}",
                diagnostics={"endpoints": endpoints},
            )
        xs = x_prev + delta * np.arange(1, l_max + 1)
        prev = np.concatenate([[x_prev], xs[:-1]])
        deltas = np.vstack([g.eval(xs) - g.eval(prev) for g in ghat_list])
        deltas = np.maximum(deltas, 0.0)
        if params.interval_rule == RULE_JACOBIAN:
            coarse_vals = np.vstack([c.eval(xs) for c in coarse_list])
            budget = _jacobian_budget(deltas, xs, coarse_vals, params, k)
        else:
            wt = xs / (1.0 - xs) ** 2
            u_at_start = np.array([max(c.eval(x_prev), 1e-12) for c in coarse_list])
            slack = 16.0 * (params.eta / params.alpha) ** 6
            budget = (slack / u_at_start[:, None]
                      * np.cumsum(deltas * wt[None, :], axis=1)).max(axis=0)
        ok = np.nonzero(budget <= params.contractivity_cap)[0]
        if ok.size == 0:
            raise EstimationError(
                f"no admissible micro cell at x={x_prev:.6g} "
                f"(first budget value {budget[0]:.6g} > {params.contractivity_cap})",
                diagnostics={"endpoints": endpoints, "rule": params.interval_rule},
            )
        l = int(ok[-1] + 1)
        x_prev = x_prev + l * delta
        endpoints.append(x_prev)
        micro_counts.append(l)
        gammas.append(float(budget[l - 1]))
    return SpGrid(endpoints=np.asarray(endpoints), micro_counts=micro_counts,
                  micro_delta=delta), gammas


@dataclass(eq=False)
class _MacroContext:
    """Precomputed per-macro-interval quantities for the fixed-point map."""

    xs: np.ndarray
    deltas: np.ndarray      # k x l nonnegative increments of G-hat
    h_lo: np.ndarray
    h_hi: np.ndarray
    box_lo: np.ndarray      # k x l state bounds
    box_hi: np.ndarray


def _make_context(tau, grid, ghat_list, coarse_list, params):
    xs = grid.micro_points(tau)
    prev = np.concatenate([[grid.endpoints[tau - 1]], xs[:-1]])
    deltas = np.vstack([g.eval(xs) - g.eval(prev) for g in ghat_list])
    deltas = np.maximum(deltas, 0.0)
    h_lo, h_hi = _h_clip_bounds(params, xs)
    box_lo, box_hi = _state_box(coarse_list, params, xs)
    box_hi = np.maximum(box_hi, box_lo)
    return _MacroContext(xs=xs, deltas=deltas, h_lo=h_lo, h_hi=h_hi,
                         box_lo=box_lo, box_hi=box_hi)


def _power_product(U, k):
    """Row i: prod_{j != i} U_j^{1/(k-1)} / U_i^{(k-2)/(k-1)}, columnwise."""
    logU = np.log(U)
    total = logU.sum(axis=0)
    return np.exp((total - logU) / (k - 1.0) - ((k - 2.0) / (k - 1.0)) * logU)


def fixed_point_map(state, tau, grid, ghat_list, coarse_list, params, ctx=None):
    """One application of the discretized map phi^(tau)."""
    if ctx is None:
        ctx = _make_context(tau, grid, ghat_list, coarse_list, params)
    U = state.U
    if U.shape != ctx.deltas.shape:
        raise ValidationError("state dimensions do not match the grid")
    if np.any(U <= 0.0):
        raise ValidationError("state entries must be positive")
    k = U.shape[0]
    H = np.clip(_power_product(U, k), ctx.h_lo[None, :], ctx.h_hi[None, :])
    integ = np.cumsum(ctx.deltas / (1.0 - H), axis=1)
    phi = np.clip(state.V[:, None] + integ, ctx.box_lo, ctx.box_hi)
    return FixedPointState(U=phi, V=state.V.copy())


@dataclass(eq=False)
class StepFunction:
    """Right-continuous step function without the [0,1] value constraint."""

    breakpoints: np.ndarray
    values: np.ndarray
    left_value: float = 0.0

    def eval(self, x):
        x = np.asarray(x, dtype=np.float64)
        scalar = x.ndim == 0
        idx = np.searchsorted(self.breakpoints, np.atleast_1d(x), side="right") - 1
        out = np.where(idx >= 0, self.values[np.maximum(idx, 0)], self.left_value)
        return float(out[0]) if scalar else out


def _random_box_state(box_lo, box_hi, V, rng):
    """A random monotone-row element of S^(tau)."""
    u = rng.random(box_lo.shape)
    cand = box_lo + u * (box_hi - box_lo)
    cand = np.maximum.accumulate(cand, axis=1)
    cand = np.minimum(cand, box_hi)  # bounds are monotone, so this stays valid
    return FixedPointState(U=np.maximum(cand, 1e-300), V=V)


def run_fixed_point(grid, ghat_list, coarse_list, params,
                    measure_contraction=0, seed=0):
    """Iterate the discretized map across all macro-intervals.

    Returns (utilde, diagnostics): ``utilde`` holds the merged micro grid and
    the k x total matrix of U estimates; diagnostics include per-interval
    fixed-point gaps, clip activation rates, box violations, and optional
    measured contraction ratios.
    """
    k = len(ghat_list)
    rng = np.random.default_rng(seed)
    V = np.array([g.eval(grid.endpoints[0]) for g in ghat_list], dtype=np.float64)
    v0 = V.copy()
    all_xs = []
    all_U = []
    gaps = []
    clip_rates = []
    box_violations = 0
    contraction = []
    degenerate = 0
    for tau in range(1, grid.T + 1):
        ctx = _make_context(tau, grid, ghat_list, coarse_list, params)
        if np.any(ctx.box_lo <= 0.0):
            degenerate += int(np.sum(ctx.box_lo <= 0.0))
        init = np.vstack([c.eval(ctx.xs) for c in coarse_list])
        init = np.clip(init, np.maximum(ctx.box_lo, 1e-300), ctx.box_hi)
        state = FixedPointState(U=np.maximum.accumulate(init, axis=1), V=V)
        gap = 0.0
        for _ in range(params.fp_iters):
            new = fixed_point_map(state, tau, grid, ghat_list, coarse_list, params, ctx)
            gap = float(np.max(np.abs(new.U - state.U)))
            state = new
        gaps.append(gap)
        at_bound = (np.isclose(state.U, ctx.box_lo) | np.isclose(state.U, ctx.box_hi))
        clip_rates.append(float(at_bound.mean()))
        box_violations += int(np.sum((state.U < ctx.box_lo - 1e-9)
                                     | (state.U > ctx.box_hi + 1e-9)))
        box_violations += int(np.sum(np.diff(state.U, axis=1) < -1e-9))
        if measure_contraction:
            ratios = []
            for _ in range(measure_contraction):
                a = _random_box_state(ctx.box_lo, ctx.box_hi, V, rng)
                b = _random_box_state(ctx.box_lo, ctx.box_hi, V, rng)
                dist = float(np.max(np.abs(a.U - b.U)))
                if dist < 1e-12:
                    continue
                fa = fixed_point_map(a, tau, grid, ghat_list, coarse_list, params, ctx)
                fb = fixed_point_map(b, tau, grid, ghat_list, coarse_list, params, ctx)
                ratios.append(float(np.max(np.abs(fa.U - fb.U))) / dist)
            contraction.append(max(ratios) if ratios else 0.0)
        all_xs.append(ctx.xs)
        all_U.append(state.U)
        V = state.U[:, -1].copy()
    utilde = {
        "xs": np.concatenate(all_xs),
        "U": np.hstack(all_U),
        "V0": v0,
        "k": k,
    }
    diagnostics = {
        "T": grid.T,
        "macro_endpoints": grid.endpoints.tolist(),
        "total_micro_points": int(utilde["xs"].size),
        "fp_gaps": gaps,
        "clip_rates": clip_rates,
        "box_violations": box_violations,
        "degenerate_lower_clips": degenerate,
        "contraction_samples": contraction,
    }
    return utilde, diagnostics


def recover_F(utilde, grid, params):
    """Convert U estimates into per-bidder CDFs pinned to 0/1 at the edges."""
    xs = utilde["xs"]
    U = utilde["U"]
    k = utilde["k"]
    keep = (xs >= params.theta - 1e-12) & (xs <= 1.0 - params.theta + 1e-12)
    if not np.any(keep):
        raise EstimationError(
            "no grid points inside [theta, 1-theta]",
            diagnostics={"theta": params.theta, "grid_points": int(xs.size)},
        )
    ratios = np.clip(_power_product(np.maximum(U, 1e-300), k), 0.0, 1.0)
    cdfs = []
    repairs = []
    for i in range(k):
        vals = ratios[i, keep]
        fitted, adjustment = pav_nondecreasing(vals)
        repairs.append(adjustment)
        fitted = np.clip(fitted, 0.0, 1.0)
        # pinned to 0 strictly below theta and to 1 strictly above 1-theta;
        # on the boundary the nearest interior estimate applies
        top = max(1.0 - params.theta, float(xs[keep][-1]))
        bp = np.concatenate([[params.theta], xs[keep], [np.nextafter(top, 1.0)]])
        fv = np.concatenate([[fitted[0]], fitted, [1.0]])
        bp, idx = np.unique(bp, return_index=True)
        cdfs.append(PiecewiseCdf(bp, np.maximum.accumulate(fv[idx]),
                                 interpolation=STEP, is_full_cdf=True))
    diagnostics = {
        "isotonic_repairs": repairs,
        "isotonic_repair_total": max(repairs) if repairs else 0.0,
    }
    return cdfs, diagnostics


def run_pipeline(ghat_list, coarse_list, params, k,
                 measure_contraction=0, seed=0):
    """Grid construction + fixed point + CDF recovery from eval-ables."""
    grid, gammas = _build_grid(ghat_list, coarse_list, params, k)
    utilde, fp_diag = run_fixed_point(grid, ghat_list, coarse_list, params,
                                      measure_contraction=measure_contraction,
                                      seed=seed)
    cdfs, rec_diag = recover_F(utilde, grid, params)
    diagnostics = {**fp_diag, **rec_diag,
                   "gamma_per_interval": gammas,
                   "params": {
                       "alpha": params.alpha, "eta": params.eta, "eps": params.eps,
                       "theta": params.theta, "nu": params.nu,
                       "micro_delta": params.micro_delta, "eps_g": params.eps_g,
                       "fp_iters": params.fp_iters,
                       "interval_rule": params.interval_rule,
                   }}
    return cdfs, utilde, diagnostics


def estimate_sp(samples, alpha, eta, eps, overrides=None,
                measure_contraction=0, seed=0):
    """End-to-end second-price estimation with desk defaults.

    Returns (list of PiecewiseCdf, diagnostics).
    """
    overrides = dict(overrides or {})
    params = SpParams.desk(alpha, eta, eps, n=samples.n, **overrides)
    ghat_list = [empirical_G_sp(samples, i) for i in range(1, samples.k + 1)]
    coarse_list = [coarse_U(samples, i, params.theta) for i in range(1, samples.k + 1)]
    cdfs, _, diagnostics = run_pipeline(ghat_list, coarse_list, params, samples.k,
                                        measure_contraction=measure_contraction,
                                        seed=seed)
    return cdfs, diagnostics


# -- reserve-price probes ----------------------------------------------------


def sp_partial_pointwise(oracle, x, n, rng=None, k=None):
    """Pointwise recovery of all F_j(x) from n probes at reserve x.

    Z_j indicates "bidder j won and the reserve bound the price, or the
    reserve won outright"; its mean estimates prod_{l != j} F_l(x), and the
    power-product combination returns each F_j(x).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    k = k if k is not None else oracle.k
    winners, q = oracle(x, n, rng)
    means = np.array([
        float(np.mean(((winners == j) & q) | ((winners == k + 1) & q)))
        for j in range(1, k + 1)
    ])
    if np.any(means <= 0.0):
        raise EstimationError(
            f"degenerate probe at reserve {x:.6g}: some win frequency is zero",
            diagnostics={"means": means.tolist(), "n": n},
        )
    log_m = np.log(means)
    fhat = np.exp(log_m.sum() / (k - 1.0) - log_m)
    return np.clip(fhat, 0.0, 1.0), means


def sp_partial_estimate(oracle, p, gamma, eps, delta=0.05, lipschitz_L=1.0,
                        seed=0, n_point=20000, k=None):
    """Staircase estimation of all F_j on [p,1] from reserve-price probes.

    Quantile levels w_a = gamma + a*eps/2 (plus 1) are located by noisy binary
    search against the pointwise estimator; each F-hat_j equals w_a on
    [z_{j,a}, z_{j,a+1}) and gamma on [p, z_{j,0}).
    """
    if not (0.0 < gamma <= 1.0 and 0.0 <= p <= 1.0):
        raise ValidationError("invalid effective-support pair")
    if not 0.0 < eps < 1.0:
        raise ValidationError("eps must lie in (0,1)")
    k = k if k is not None else oracle.k
    rng = np.random.default_rng(seed)
    calls = 0
    levels = np.unique(np.append(np.arange(gamma, 1.0, eps / 2.0), 1.0))
    T = max(1, math.ceil(math.log2(max(4.0 * lipschitz_L / eps, 2.0))))

    cdfs = []
    for j in range(1, k + 1):
        def f_at(x, j=j):
            nonlocal calls
            calls += n_point
            fhat, _ = sp_partial_pointwise(oracle, float(x), n_point, rng, k=k)
            return float(fhat[j - 1])

        # termination band eps/4 keeps |F(z_a) - w_a| <= eps/2 with margin
        zs = np.array([
            noisy_quantile_search(f_at, w, T, eps / 2.0, lo=p, hi=1.0) for w in levels
        ])
        zs = np.maximum.accumulate(zs)
        bp = np.concatenate([[p], zs])
        vals = np.concatenate([[gamma], levels])
        # collapse duplicate locations, keeping the highest level
        bp_rev = bp[::-1]
        uniq, idx = np.unique(bp_rev, return_index=True)
        vals_u = vals[::-1][idx]
        cdfs.append(PiecewiseCdf(uniq, np.maximum.accumulate(np.clip(vals_u, 0.0, 1.0)),
                                 interpolation=STEP, is_full_cdf=True))

    diagnostics = {
        "oracle_calls": calls,
        "T": T,
        "levels": int(levels.size),
        "n_point": n_point,
    }
    return cdfs, diagnostics
