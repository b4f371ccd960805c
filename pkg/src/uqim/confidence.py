"""Finite-sample confidence statements for quantiles and densities.

Both constructions combine a Monte Carlo sample of N surrogate outputs with
an experimental worst-case surrogate error bound

    beta_hat = max_i |Y_i - m_hat(X_i)|.

The quantile interval widens two order statistics of the output sample by
beta_hat; the admissible order-statistic levels involve an epsilon/gamma
pair chosen to minimize eps + gamma subject to (1 - eps)^n < delta - ddelta
with gamma = sqrt(-log(delta - ddelta - (1-eps)^n) / (2N)).  The density
band inflates/deflates a naive-kernel KDE by a correction term plus the
worst mismatch between the empirical output measure and the KDE integral
over intervals J containing the evaluation point with length > kappa,
with J expanded (upper) or shrunk (lower) by beta_hat.

The sup over intervals is approximated over a finite candidate family whose
endpoints are the sample values, the sample values +/- beta_hat and the
evaluation grid; a separable prefix/suffix-maximum decomposition makes the
whole band cost O((N + G) log N) per bandwidth.  Boundary conventions are
conservative: expanded intervals count their endpoints, shrunk intervals do
not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .data import PairedDataset
from .density import KdeModel, kde_cdf, kde_evaluate, mc_quantile
from .errors import DomainError, InfeasibleError


# ---------------------------------------------------------------------------
# epsilon/gamma machinery


def _check_core(n: int, delta: float, d_delta: float) -> float:
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    if not 0.0 < d_delta < delta:
        raise DomainError(
            f"ddelta must lie in (0, delta)=(0, {delta}), got {d_delta}"
        )
    return delta - d_delta


def gamma_term(n: int, big_n: float, delta: float, d_delta: float, eps: float) -> float:
    """gamma = sqrt(-log(delta - ddelta - (1-eps)^n) / (2N)).

    Raises :class:`DomainError` when eps violates the strict feasibility
    constraint (1-eps)^n < delta - ddelta.
    """
    rem = _check_core(n, delta, d_delta)
    if not (np.isfinite(big_n) and big_n >= 1):
        raise DomainError(f"N must be finite and >= 1, got {big_n}")
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    arg = rem - (1.0 - eps) ** n
    if arg <= 0.0:
        raise DomainError(
            f"eps={eps} infeasible: (1-eps)^n = {(1.0 - eps) ** n:.6g} "
            f">= delta - ddelta = {rem:.6g}"
        )
    return math.sqrt(-math.log(arg) / (2.0 * big_n))


@dataclass(frozen=True)
class EpsGamma:
    eps: float
    gamma: float
    objective: float


def minimize_eps_gamma(n: int, big_n: float, delta: float, d_delta: float) -> EpsGamma:
    """Minimize eps + gamma over the feasible eps in (1-(delta-ddelta)^(1/n), 1).

    Vectorized hybrid grid (log-spaced near the lower boundary, uniform
    elsewhere) followed by a bounded scalar refinement between the best
    grid neighbors.
    """
    rem = _check_core(n, delta, d_delta)
    if not (np.isfinite(big_n) and big_n >= 1):
        raise DomainError(f"N must be finite and >= 1, got {big_n}")
    lb = 1.0 - rem ** (1.0 / n)
    span = 1.0 - lb

    def objective(eps):
        eps = np.asarray(eps, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            arg = rem - (1.0 - eps) ** n
            gam = np.sqrt(-np.log(arg) / (2.0 * big_n))
        return np.where(arg > 0.0, eps + gam, np.inf)

    t = np.unique(
        np.concatenate(
            [np.logspace(-14.0, 0.0, 400), np.linspace(0.0, 1.0, 1200)]
        )
    )
    t = t[(t > 0.0) & (t < 1.0)]
    cand = lb + span * t
    vals = objective(cand)
    i = int(np.argmin(vals))
    lo = cand[i - 1] if i > 0 else lb + span * 1e-16
    hi = cand[i + 1] if i + 1 < cand.size else cand[-1]
    best_eps, best_val = float(cand[i]), float(vals[i])
    if hi > lo:
        res = minimize_scalar(
            lambda e: float(objective(e)),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": max(span * 1e-15, 1e-300)},
        )
        if np.isfinite(res.fun) and res.fun < best_val:
            best_eps, best_val = float(res.x), float(res.fun)
    gam = gamma_term(n, big_n, delta, d_delta, best_eps)
    return EpsGamma(eps=best_eps, gamma=gam, objective=best_eps + gam)


# ---------------------------------------------------------------------------
# feasibility screening


def default_d_delta_grid(delta: float) -> np.ndarray:
    return delta * np.linspace(0.1, 0.9, 9)


@dataclass(frozen=True)
class FeasibilityEntry:
    d_delta: float
    feasible: bool
    objective: float
    hoeffding: float


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    n: int
    alpha: float
    delta: float
    big_n: float | None
    best_d_delta: float | None
    best_objective: float | None
    entries: tuple


def ci_feasibility(
    n: int,
    alpha: float,
    delta: float,
    d_delta_grid=None,
    big_n: float | None = None,
) -> FeasibilityReport:
    """Can the quantile interval exist at these levels?

    For each ddelta in the sweep the minimal achievable eps + gamma (plus
    the Hoeffding level shift) must keep both order-statistic levels inside
    (0, 1).  ``big_n=None`` screens in the N -> infinity limit, where the
    shift vanishes and the infimum objective is 1 - (delta-ddelta)^(1/n).
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if d_delta_grid is None:
        d_delta_grid = default_d_delta_grid(delta)
    head = min(alpha, 1.0 - alpha)
    entries = []
    best = None
    for dd in sorted(float(v) for v in np.atleast_1d(d_delta_grid)):
        rem = _check_core(n, delta, dd)
        if big_n is None:
            obj = 1.0 - rem ** (1.0 / n)
            hoeff = 0.0
        else:
            hoeff = math.sqrt(-math.log(dd / 2.0) / (2.0 * big_n))
            obj = minimize_eps_gamma(n, big_n, delta, dd).objective
        ok = obj + hoeff < head
        entries.append(
            FeasibilityEntry(d_delta=dd, feasible=ok, objective=obj, hoeffding=hoeff)
        )
        if best is None or obj + hoeff < best[0]:
            best = (obj + hoeff, dd)
    return FeasibilityReport(
        feasible=any(e.feasible for e in entries),
        n=int(n),
        alpha=float(alpha),
        delta=float(delta),
        big_n=big_n,
        best_d_delta=best[1] if best else None,
        best_objective=best[0] if best else None,
        entries=tuple(entries),
    )


def minimal_feasible_n(
    alpha: float, delta: float, d_delta_grid=None, big_n=None, n_max: int = 100_000
) -> int:
    """Smallest n for which :func:`ci_feasibility` succeeds."""
    for n in range(1, n_max + 1):
        if ci_feasibility(n, alpha, delta, d_delta_grid, big_n).feasible:
            return n
    raise InfeasibleError(f"no feasible n up to {n_max}")


def minimal_feasible_delta(
    n: int, alpha: float, ratio_grid=None, big_n=None, tol: float = 1e-9
) -> float:
    """Smallest delta at which the construction becomes feasible.

    ``ratio_grid`` holds ddelta/delta ratios (default 0.1 .. 0.9) so the
    sweep scales with the trial delta during the bisection.
    """
    ratios = np.linspace(0.1, 0.9, 9) if ratio_grid is None else np.atleast_1d(ratio_grid)

    def ok(d: float) -> bool:
        try:
            return ci_feasibility(n, alpha, d, d * ratios, big_n).feasible
        except DomainError:
            return False

    hi = 1.0 - 1e-12
    if not ok(hi):
        raise InfeasibleError(f"no feasible delta below 1 for n={n}, alpha={alpha}")
    lo = tol
    if ok(lo):
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# quantile confidence interval


@dataclass(frozen=True)
class QuantileCi:
    lower: float
    upper: float
    alpha: float
    delta: float
    d_delta: float
    n: int
    big_n: int
    beta_hat: float
    eps: float
    gamma: float
    level_low: float
    level_high: float

    @property
    def width(self) -> float:
        return self.upper - self.lower


def surrogate_error_bound(experimental: PairedDataset, model) -> float:
    """beta_hat = max_i |Y_i - m_hat(X_i)| on the experimental data."""
    return float(np.max(np.abs(experimental.outputs - model(experimental.inputs))))


def quantile_ci(
    experimental: PairedDataset,
    model,
    outputs,
    alpha: float,
    delta: float,
    d_delta: float | None = None,
    sweep: bool = False,
) -> QuantileCi:
    """Quantile confidence interval from N surrogate outputs.

    The interval is [q(level_low) - beta_hat, q(level_high) + beta_hat]
    with levels alpha -/+ (hoeffding + eps + gamma).  ``d_delta=None``
    uses delta/2; ``sweep=True`` tries the 0.1..0.9 delta grid and keeps
    the narrowest valid interval (ties toward smaller ddelta).
    """
    outputs = np.asarray(outputs, dtype=float).ravel()
    if outputs.size < 1:
        raise DomainError("need at least one surrogate output")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    n, big_n = experimental.n, outputs.size
    beta_hat = surrogate_error_bound(experimental, model)
    if sweep:
        candidates = list(default_d_delta_grid(delta))
    else:
        candidates = [delta / 2.0 if d_delta is None else float(d_delta)]
    best = None
    for dd in candidates:
        _check_core(n, delta, dd)
        hoeff = math.sqrt(-math.log(dd / 2.0) / (2.0 * big_n))
        eg = minimize_eps_gamma(n, big_n, delta, dd)
        low = alpha - hoeff - eg.eps - eg.gamma
        high = alpha + hoeff + eg.eps + eg.gamma
        if not (0.0 < low and high < 1.0):
            continue
        lo_q = mc_quantile(outputs, low).value - beta_hat
        hi_q = mc_quantile(outputs, high).value + beta_hat
        ci = QuantileCi(
            lower=lo_q, upper=hi_q, alpha=float(alpha), delta=float(delta),
            d_delta=dd, n=n, big_n=big_n, beta_hat=beta_hat,
            eps=eg.eps, gamma=eg.gamma, level_low=low, level_high=high,
        )
        if best is None or ci.width < best.width:
            best = ci
    if best is None:
        if sweep:
            ratios = None
        elif d_delta is None:
            ratios = [0.5]
        else:
            ratios = [d_delta / delta]
        try:
            min_delta = minimal_feasible_delta(n, alpha, ratio_grid=ratios, big_n=big_n)
        except InfeasibleError:
            min_delta = None
        raise InfeasibleError(
            f"no valid quantile levels at alpha={alpha}, delta={delta} with "
            f"n={n}, N={big_n}"
            + (f"; smallest workable delta is about {min_delta:.4g}" if min_delta else ""),
            min_delta=min_delta,
        )
    return best


# ---------------------------------------------------------------------------
# density band


def _ecdf_right(sorted_vals: np.ndarray, t: np.ndarray) -> np.ndarray:
    return np.searchsorted(sorted_vals, t, side="right") / sorted_vals.size


def _ecdf_left(sorted_vals: np.ndarray, t: np.ndarray) -> np.ndarray:
    return np.searchsorted(sorted_vals, t, side="left") / sorted_vals.size


def _sup_separable(cand, u, w, y_grid, length):
    """For each y: sup{u[k] + w[j] : cand[j] <= y <= cand[k],
    cand[k] - cand[j] > length}."""
    w_pref = np.maximum.accumulate(w)
    u_suf = np.maximum.accumulate(u[::-1])[::-1]
    # last j with cand[j] < cand[k] - length, else -1
    i_bk = np.searchsorted(cand, cand - length, side="left") - 1
    s = np.where(i_bk >= 0, u + w_pref[np.clip(i_bk, 0, None)], -np.inf)
    out = np.empty(len(y_grid))
    for q, y in enumerate(y_grid):
        j_y = np.searchsorted(cand, y, side="right") - 1
        k_y = np.searchsorted(cand, y, side="left")
        k_split = np.searchsorted(cand, y + length, side="right")
        val = -np.inf
        if j_y >= 0 and k_split < cand.size:
            val = w_pref[j_y] + u_suf[k_split]
        if k_y < k_split:
            win = s[k_y:k_split]
            if win.size:
                val = max(val, float(np.max(win)))
        out[q] = val
    return out


def _sup_short_intervals(cand, cdf, y_grid, kappa, beta):
    """Lower-direction pairs with kappa < b - a <= 2 beta (empty inner
    interval): sup of cdf[b] - cdf[a]; best a is the smallest allowed."""
    out = np.full(len(y_grid), -np.inf)
    if 2.0 * beta <= kappa:
        return out
    a_idx = np.searchsorted(cand, cand - 2.0 * beta, side="left")
    a_cap = np.searchsorted(cand, cand - kappa, side="left") - 1
    valid = a_idx <= a_cap
    a_idx_c = np.clip(a_idx, 0, cand.size - 1)
    s = np.where(valid, cdf - cdf[a_idx_c], -np.inf)
    a_val = np.where(valid, cand[a_idx_c], np.inf)
    for q, y in enumerate(y_grid):
        k_y = np.searchsorted(cand, y, side="left")
        k_hi = np.searchsorted(cand, y + 2.0 * beta, side="right")
        if k_y >= k_hi:
            continue
        mask = a_val[k_y:k_hi] <= y
        if mask.any():
            out[q] = float(np.max(np.where(mask, s[k_y:k_hi], -np.inf)))
    return out


def _band_sups(kde, sorted_outputs, cand, y_grid, kappa, beta):
    """(sup_upper, sup_lower) arrays over the evaluation points."""
    cdf = kde_cdf(kde, cand)
    up_u = _ecdf_right(sorted_outputs, cand + beta) - cdf
    up_w = cdf - _ecdf_left(sorted_outputs, cand - beta)
    sup_up = _sup_separable(cand, up_u, up_w, y_grid, kappa)
    lo_u = cdf - _ecdf_left(sorted_outputs, cand - beta)
    lo_w = _ecdf_right(sorted_outputs, cand + beta) - cdf
    sup_lo = _sup_separable(cand, lo_u, lo_w, y_grid, max(kappa, 2.0 * beta))
    short = _sup_short_intervals(cand, cdf, y_grid, kappa, beta)
    return sup_up, np.maximum(sup_lo, short)


def sup_interval_mismatch(
    direction: str,
    y: float,
    kappa: float,
    beta_hat: float,
    kde: KdeModel,
    outputs=None,
    grid=None,
) -> float:
    """Worst measure/KDE mismatch over intervals containing ``y``.

    ``direction="upper"`` takes sup of mu(J^beta) - integral of the KDE
    over J; ``"lower"`` takes sup of the KDE integral minus mu(J_beta).
    Candidate endpoints are the sample values, the sample values
    +/- beta_hat, the optional extra ``grid`` and ``y`` itself.
    """
    if direction not in ("upper", "lower"):
        raise DomainError(f"direction must be 'upper' or 'lower', got {direction!r}")
    if not (np.isfinite(kappa) and kappa > 0):
        raise DomainError(f"kappa must be positive, got {kappa}")
    if not (np.isfinite(beta_hat) and beta_hat >= 0):
        raise DomainError(f"beta_hat must be >= 0, got {beta_hat}")
    vals = kde.values if outputs is None else np.sort(
        np.asarray(outputs, dtype=float).ravel()
    )
    pieces = [vals, vals - beta_hat, vals + beta_hat, [float(y)]]
    if grid is not None:
        pieces.append(np.asarray(grid, dtype=float).ravel())
    cand = np.unique(np.concatenate(pieces))
    sup_up, sup_lo = _band_sups(kde, vals, cand, np.array([float(y)]), kappa, beta_hat)
    return float(sup_up[0] if direction == "upper" else sup_lo[0])


@dataclass(frozen=True)
class DensityBand:
    """Pointwise band for the output density on an evaluation grid."""

    grid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    kappa: float
    delta: float
    bandwidths: tuple
    beta_hat: float
    eps: float
    gamma: float
    correction: float
    n: int
    big_n: int

    def __post_init__(self):
        for name in ("grid", "lower", "upper"):
            a = np.asarray(getattr(self, name), dtype=float)
            a.flags.writeable = False
            object.__setattr__(self, name, a)


def density_band(
    outputs,
    experimental: PairedDataset,
    model,
    kappa: float,
    delta: float,
    bandwidths,
    interval: tuple[float, float],
    grid_steps: int = 200,
) -> DensityBand:
    """Simultaneous confidence band for the density of the true output.

    Guarantees hold for integrals over intervals of length >= kappa inside
    ``interval``.  Multiple bandwidths combine by pointwise min of uppers
    and max of lowers.  Requires 2/N^2 < delta.
    """
    outputs = np.sort(np.asarray(outputs, dtype=float).ravel())
    big_n = outputs.size
    lo, hi = float(interval[0]), float(interval[1])
    if not hi > lo:
        raise DomainError(f"empty evaluation interval ({lo}, {hi})")
    if not (np.isfinite(kappa) and 0.0 < kappa < hi - lo):
        raise DomainError(
            f"kappa must lie in (0, interval length={hi - lo:.6g}), got {kappa}"
        )
    if grid_steps < 2:
        raise DomainError(f"grid_steps must be >= 2, got {grid_steps}")
    bandwidths = tuple(float(h) for h in np.atleast_1d(bandwidths))
    if not bandwidths or any(h <= 0 for h in bandwidths):
        raise DomainError("bandwidths must be a nonempty list of positive values")
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    slack = 2.0 / big_n**2
    if slack >= delta:
        raise InfeasibleError(
            f"need 2/N^2 < delta: N={big_n} gives {slack:.3g} >= {delta}"
        )
    n = experimental.n
    beta_hat = surrogate_error_bound(experimental, model)
    eg = minimize_eps_gamma(n, big_n, delta, slack)
    corr = (eg.eps + eg.gamma + 2.0 * math.sqrt(math.log(big_n)) / math.sqrt(big_n)) / kappa

    grid = np.linspace(lo, hi, grid_steps)
    cand = np.unique(
        np.concatenate([outputs, outputs - beta_hat, outputs + beta_hat, grid])
    )
    upper = np.full(grid.size, np.inf)
    lower = np.full(grid.size, -np.inf)
    for h in bandwidths:
        kde = KdeModel(values=outputs, bandwidth=h, kernel="naive")
        fhat = kde_evaluate(kde, grid)
        sup_up, sup_lo = _band_sups(kde, outputs, cand, grid, kappa, beta_hat)
        upper = np.minimum(upper, fhat + corr + sup_up / kappa)
        lower = np.maximum(lower, fhat - corr - sup_lo / kappa)
    lower = np.clip(lower, 0.0, None)
    return DensityBand(
        grid=grid,
        lower=lower,
        upper=upper,
        kappa=float(kappa),
        delta=float(delta),
        bandwidths=bandwidths,
        beta_hat=beta_hat,
        eps=eg.eps,
        gamma=eg.gamma,
        correction=corr,
        n=n,
        big_n=big_n,
    )
