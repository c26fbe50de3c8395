"""Random-utility choice model over play/fold gambles with CRRA payoffs.

An agent faces a two-option gamble: ``play`` carries two (probability,
payoff) outcomes, ``fold`` one certain payoff. Payoff utility at
risk-aversion ``omega`` is v**(1-omega)/(1-omega), with the log(v) limit at
omega = 1. Choice is logistic in the expected-utility gap scaled by a
precision parameter ``lam`` >= 0: lam = 0 is coin-flip choice, large lam
approaches deterministic utility maximization.

Maximum-likelihood fitting runs a bounded quasi-Newton search in
(omega, log lam) from many random starts and summarizes a random sample of
the valid interior convergences.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

__all__ = [
    "Gamble",
    "RumParams",
    "ScanGrid",
    "DEFAULT_SCAN",
    "GAMBLE_CLASSES",
    "OmegaValidity",
    "FitConfig",
    "StartResult",
    "RumFit",
    "RumFitError",
    "crra_utility",
    "option_utility",
    "utility_gap",
    "choice_probability",
    "classify_gamble",
    "monotonic_domain",
    "diagnose_omega_validity",
    "log_likelihood",
    "log_likelihood_grad",
    "fit_rum",
]

# |1 - omega| at or below this returns the log limit from crra_utility. The
# bare form has an option-independent 1/(1-omega) pole that cancels in every
# utility difference, so the window never changes a choice probability.
_LOG_WINDOW = 1e-6

GAMBLE_CLASSES = ("risk_dominant", "safe_dominant", "mixed")


@dataclass(frozen=True)
class Gamble:
    """One pre-flop choice situation: a risky option against a certain one.

    ``play`` holds exactly two (probability, payoff) outcomes, ``fold`` one.
    Probabilities sum to 1 per option and payoffs are strictly positive.
    """

    play: tuple[tuple[float, float], ...]
    fold: tuple[tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "play", tuple((float(p), float(v)) for p, v in self.play)
        )
        object.__setattr__(
            self, "fold", tuple((float(p), float(v)) for p, v in self.fold)
        )
        if len(self.play) != 2:
            raise ValueError("play option must have exactly two outcomes")
        if len(self.fold) != 1:
            raise ValueError("fold option must have exactly one outcome")
        for name, option in (("play", self.play), ("fold", self.fold)):
            total = 0.0
            for p, v in option:
                if not (0.0 <= p <= 1.0):
                    raise ValueError(f"{name} probability {p} outside [0, 1]")
                if not (v > 0.0) or not math.isfinite(v):
                    raise ValueError(f"{name} payoff {v} must be positive and finite")
                total += p
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"{name} probabilities sum to {total}, expected 1")


@dataclass(frozen=True)
class RumParams:
    """Risk-aversion and choice-precision pair."""

    omega: float
    lam: float

    def __post_init__(self):
        if not math.isfinite(self.omega):
            raise ValueError("omega must be finite")
        if not (self.lam >= 0.0):
            raise ValueError("lam must be nonnegative")


@dataclass(frozen=True)
class ScanGrid:
    """Omega grid used for gamble classification and monotonicity checks."""

    lo: float = -10.0
    hi: float = 10.0
    step: float = 0.01

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise ValueError("scan lower bound must be below upper bound")
        if not (self.step > 0.0):
            raise ValueError("scan step must be positive")

    def points(self) -> np.ndarray:
        n_cells = int(math.floor((self.hi - self.lo) / self.step + 1e-9))
        pts = self.lo + self.step * np.arange(n_cells + 1)
        if pts[-1] < self.hi - 1e-9:
            pts = np.append(pts, self.hi)
        pts[-1] = self.hi
        return pts


DEFAULT_SCAN = ScanGrid()


def crra_utility(payoff, omega):
    """Constant-relative-risk-aversion utility of positive payoffs.

    Accepts a scalar or array payoff; ``omega`` is scalar. Values of omega
    within 1e-6 of 1 return the log limit.
    """
    v = np.asarray(payoff, dtype=float)
    if np.any(v <= 0.0) or not np.all(np.isfinite(v)):
        raise ValueError("payoffs must be positive and finite")
    eps = 1.0 - float(omega)
    if abs(eps) <= _LOG_WINDOW:
        out = np.log(v)
    else:
        with np.errstate(over="ignore"):
            out = v**eps / eps
    if np.ndim(payoff) == 0:
        return float(out)
    return out


def option_utility(option, omega) -> float:
    """Probability-weighted CRRA utility of one option's outcome list."""
    return float(sum(p * crra_utility(v, omega) for p, v in option))


def _phi(eps, logv):
    """(v**eps - 1) / eps evaluated as expm1(eps*logv)/eps.

    Smooth through eps = 0 (limit logv), which the bare v**eps/eps form is
    not; the difference is a constant shift per omega that cancels in gaps.
    """
    eps = np.asarray(eps, dtype=float)
    logv = np.asarray(logv, dtype=float)
    safe = np.where(eps == 0.0, 1.0, eps)
    with np.errstate(over="ignore"):
        out = np.where(eps == 0.0, logv, np.expm1(eps * logv) / safe)
    return out


def _dphi_deps(eps, logv):
    """Derivative of _phi in eps, with a series fallback near eps = 0."""
    eps = np.asarray(eps, dtype=float)
    logv = np.asarray(logv, dtype=float)
    small = np.abs(eps) < 1e-4
    safe = np.where(small, 1.0, eps)
    with np.errstate(over="ignore"):
        direct = (np.exp(safe * logv) * (safe * logv - 1.0) + 1.0) / (safe * safe)
    l2 = logv * logv
    series = l2 / 2.0 + eps * l2 * logv / 3.0 + eps * eps * l2 * l2 / 8.0
    return np.where(small, series, direct)


def _gap_curve(gamble: Gamble, omegas) -> np.ndarray:
    """Play-minus-fold expected utility over an array of omega values."""
    eps = 1.0 - np.asarray(omegas, dtype=float)
    total = np.zeros_like(eps)
    for p, v in gamble.play:
        total = total + p * _phi(eps, math.log(v))
    for p, v in gamble.fold:
        total = total - p * _phi(eps, math.log(v))
    return total


def _dgap_curve(gamble: Gamble, omegas) -> np.ndarray:
    """d/d omega of the utility gap (note d eps = -d omega)."""
    eps = 1.0 - np.asarray(omegas, dtype=float)
    total = np.zeros_like(eps)
    for p, v in gamble.play:
        total = total + p * _dphi_deps(eps, math.log(v))
    for p, v in gamble.fold:
        total = total - p * _dphi_deps(eps, math.log(v))
    return -total


def utility_gap(gamble: Gamble, omega) -> float:
    """Expected-utility difference play minus fold at one omega.

    Computed in a shift-invariant form that stays accurate through
    omega = 1; away from 1 it equals the difference of bare option
    utilities to float precision.
    """
    return float(_gap_curve(gamble, np.asarray(float(omega)))[()])


def choice_probability(gamble: Gamble, params: RumParams) -> tuple[float, float]:
    """Logit play/fold probabilities; overflow-safe at any precision."""
    if params.lam == 0.0:
        return 0.5, 0.5
    z = params.lam * utility_gap(gamble, params.omega)
    return float(expit(z)), float(expit(-z))


def classify_gamble(gamble: Gamble, scan: ScanGrid = DEFAULT_SCAN, tie_tol: float = 1e-9) -> str:
    """Label a gamble risk_dominant, safe_dominant, or mixed over the scan.

    The coarse grid is augmented with the gap values at interior extrema
    (bracketed by derivative sign changes), so a sign excursion narrower
    than one grid step still flips a dominant label to mixed. Grid points
    within ``tie_tol`` of equality count toward neither direction.
    """
    pts = scan.points()
    gaps = _gap_curve(gamble, pts)
    dgaps = _dgap_curve(gamble, pts)
    extrema = []
    sign_flip = dgaps[:-1] * dgaps[1:] < 0.0
    for i in np.nonzero(sign_flip)[0]:
        extrema.append(_extremum_gap(gamble, pts[i], pts[i + 1], dgaps[i]))
    all_gaps = np.concatenate([gaps, np.asarray(extrema)]) if extrema else gaps
    pos = bool(np.any(all_gaps > tie_tol))
    neg = bool(np.any(all_gaps < -tie_tol))
    if pos and not neg:
        return "risk_dominant"
    if neg and not pos:
        return "safe_dominant"
    return "mixed"


def _extremum_gap(gamble: Gamble, a: float, b: float, da: float) -> float:
    """Gap value at the gap extremum inside (a, b), found by bisection."""
    for _ in range(60):
        mid = 0.5 * (a + b)
        dm = float(_dgap_curve(gamble, np.asarray(mid))[()])
        if dm == 0.0:
            a = b = mid
            break
        if (dm > 0.0) == (da > 0.0):
            a, da = mid, dm
        else:
            b = mid
    return float(_gap_curve(gamble, np.asarray(0.5 * (a + b)))[()])


def monotonic_domain(
    gamble: Gamble, lam: float, scan: ScanGrid = DEFAULT_SCAN
) -> list[tuple[float, float]]:
    """Omega intervals where grid-sampled P(play) is non-increasing.

    Adjacent grid cells with non-increasing play probability are merged
    into closed intervals, returned in ascending order.
    """
    if lam < 0.0:
        raise ValueError("lam must be nonnegative")
    pts = scan.points()
    probs = expit(lam * _gap_curve(gamble, pts))
    noninc = np.diff(probs) <= 1e-12
    intervals: list[tuple[float, float]] = []
    i = 0
    m = noninc.size
    while i < m:
        if not noninc[i]:
            i += 1
            continue
        j = i
        while j + 1 < m and noninc[j + 1]:
            j += 1
        intervals.append((float(pts[i]), float(pts[j + 1])))
        i = j + 1
    return intervals


@dataclass(frozen=True)
class OmegaValidity:
    """Share of choice situations whose fitted omega falls where P(play)
    is locally increasing in omega (the regime without a clean
    risk-aversion interpretation)."""

    fraction_outside: float
    outside: list[bool]
    n: int


def diagnose_omega_validity(
    gambles, params: RumParams, scan: ScanGrid = DEFAULT_SCAN
) -> OmegaValidity:
    """Check, per gamble, whether params.omega lies in the non-increasing
    P(play) domain of that gamble."""
    outside: list[bool] = []
    for gamble in gambles:
        intervals = monotonic_domain(gamble, params.lam, scan)
        inside = any(lo <= params.omega <= hi for lo, hi in intervals)
        outside.append(not inside)
    n = len(outside)
    frac = float(sum(outside)) / n if n else 0.0
    return OmegaValidity(fraction_outside=frac, outside=outside, n=n)


# ---------------------------------------------------------------------------
# likelihood and fitting
# ---------------------------------------------------------------------------


@dataclass
class _Packed:
    """Column arrays for one decision set: play outcome pair, fold payoff,
    observed choice (1 = play)."""

    p1: np.ndarray
    l1: np.ndarray
    p2: np.ndarray
    l2: np.ndarray
    lf: np.ndarray
    y: np.ndarray


def _pack(gambles, ys) -> _Packed:
    n = len(gambles)
    if n == 0:
        raise ValueError("no decisions to fit")
    if len(ys) != n:
        raise ValueError("gambles and choices differ in length")
    p1 = np.empty(n)
    l1 = np.empty(n)
    p2 = np.empty(n)
    l2 = np.empty(n)
    lf = np.empty(n)
    for i, g in enumerate(gambles):
        (a, va), (b, vb) = g.play
        ((_, vf),) = g.fold
        p1[i] = a
        l1[i] = math.log(va)
        p2[i] = b
        l2[i] = math.log(vb)
        lf[i] = math.log(vf)
    y = np.asarray(ys, dtype=float)
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("choices must be 0 (fold) or 1 (play)")
    return _Packed(p1, l1, p2, l2, lf, y)


def _gaps_packed(data: _Packed, omega: float) -> np.ndarray:
    eps = 1.0 - omega
    return (
        data.p1 * _phi(eps, data.l1)
        + data.p2 * _phi(eps, data.l2)
        - _phi(eps, data.lf)
    )


def _loglik_packed(data: _Packed, omega: float, lam: float) -> float:
    z = lam * _gaps_packed(data, omega)
    terms = data.y * np.logaddexp(0.0, -z) + (1.0 - data.y) * np.logaddexp(0.0, z)
    return -float(np.sum(terms))


def log_likelihood(params: RumParams, gambles, ys) -> float:
    """Total Bernoulli log-likelihood of the observed play/fold choices."""
    data = _pack(gambles, ys)
    return _loglik_packed(data, params.omega, params.lam)


def log_likelihood_grad(params: RumParams, gambles, ys) -> np.ndarray:
    """Gradient of log_likelihood in (omega, log lam)."""
    data = _pack(gambles, ys)
    eps = 1.0 - params.omega
    gaps = _gaps_packed(data, params.omega)
    z = params.lam * gaps
    resid = data.y - expit(z)
    dgap = -(
        data.p1 * _dphi_deps(eps, data.l1)
        + data.p2 * _dphi_deps(eps, data.l2)
        - _dphi_deps(eps, data.lf)
    )
    d_omega = float(np.sum(resid * params.lam * dgap))
    d_loglam = float(np.sum(resid * z))
    return np.array([d_omega, d_loglam])


def _nll_and_grad(x: np.ndarray, data: _Packed) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood and gradient at x = (omega, log lam)."""
    omega, s = float(x[0]), float(x[1])
    lam = math.exp(s)
    eps = 1.0 - omega
    gaps = _gaps_packed(data, omega)
    z = lam * gaps
    terms = data.y * np.logaddexp(0.0, -z) + (1.0 - data.y) * np.logaddexp(0.0, z)
    resid = data.y - expit(z)
    dgap = -(
        data.p1 * _dphi_deps(eps, data.l1)
        + data.p2 * _dphi_deps(eps, data.l2)
        - _dphi_deps(eps, data.lf)
    )
    n = data.y.size
    f = float(np.sum(terms)) / n
    g = -np.array([float(np.sum(resid * lam * dgap)), float(np.sum(resid * z))]) / n
    return f, g


@dataclass(frozen=True)
class FitConfig:
    """Multi-start settings for fit_rum.

    ``sample_size`` valid convergences are drawn at random (without
    replacement) to form the reported expectation and spread; lam is
    searched on a log scale inside ``lam_bounds``.
    """

    n_starts: int = 200
    sample_size: int = 35
    omega_bounds: tuple[float, float] = (-5.0, 5.0)
    lam_bounds: tuple[float, float] = (0.01, 1000.0)
    grad_tol: float = 1e-6
    max_iter: int = 500
    seed: int = 0


@dataclass(frozen=True)
class StartResult:
    """Terminal state of one optimizer start."""

    index: int
    omega0: float
    lam0: float
    omega: float
    lam: float
    nll: float
    grad_norm: float
    n_iter: int
    status: str  # valid | boundary | no_convergence | degenerate | non_finite


@dataclass(frozen=True)
class RumFit:
    """Sampled-convergence summary of a multi-start likelihood fit."""

    omega: float
    lam: float
    omega_std: float
    lam_std: float
    n_decisions: int
    n_valid: int
    sampled_indices: tuple[int, ...]
    starts: tuple[StartResult, ...]
    config: FitConfig

    @property
    def params(self) -> RumParams:
        return RumParams(omega=self.omega, lam=self.lam)


class RumFitError(RuntimeError):
    """No optimizer start reached a valid interior convergence."""

    def __init__(self, message: str, starts: tuple[StartResult, ...]):
        super().__init__(message)
        self.starts = starts


def _fd_hessian(x, data) -> np.ndarray | None:
    """2x2 Hessian of the mean objective from central differences of the
    analytic gradient; None when any entry is non-finite."""
    hess = np.empty((2, 2))
    for j in range(2):
        h = 1e-6 * max(1.0, abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        _, gp = _nll_and_grad(xp, data)
        _, gm = _nll_and_grad(xm, data)
        col = (gp - gm) / (2.0 * h)
        if not np.all(np.isfinite(col)):
            return None
        hess[:, j] = col
    return 0.5 * (hess + hess.T)


def _newton_polish(x, f, g, data, bounds, grad_tol):
    """Drive an interior quasi-Newton solution to a small gradient norm.

    The 2x2 Hessian comes from central differences of the analytic
    gradient; steps are clipped to the box and only accepted when the
    objective does not increase.
    """
    (lo0, hi0), (lo1, hi1) = bounds
    extra_iters = 0
    for _ in range(12):
        if np.linalg.norm(g) <= 0.25 * grad_tol:
            break
        hess = _fd_hessian(x, data)
        if hess is None:
            break
        try:
            step = np.linalg.solve(hess, -g)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        t = 1.0
        accepted = False
        while t >= 1e-6:
            xn = np.clip(x + t * step, [lo0, lo1], [hi0, hi1])
            fn, gn = _nll_and_grad(xn, data)
            if math.isfinite(fn) and fn <= f + 1e-12:
                x, f, g = xn, fn, gn
                accepted = True
                break
            t *= 0.5
        extra_iters += 1
        if not accepted:
            break
    return x, f, g, extra_iters


def _locally_identified(x, data, min_curvature: float = 1e-8) -> bool:
    """True when the objective has strictly positive curvature at x.

    Mean-NLL curvature at any identified optimum sits orders of magnitude
    above the floor; on a saturation plateau it underflows toward zero.
    """
    hess = _fd_hessian(x, data)
    if hess is None:
        return False
    eigvals = np.linalg.eigvalsh(hess)
    return bool(np.all(eigvals >= min_curvature))


def _fit_single_start(task) -> StartResult:
    index, x0, data, config = task
    lo_w, hi_w = config.omega_bounds
    s_lo = math.log(config.lam_bounds[0])
    s_hi = math.log(config.lam_bounds[1])
    bounds = ((lo_w, hi_w), (s_lo, s_hi))
    res = minimize(
        _nll_and_grad,
        x0,
        args=(data,),
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={
            "maxiter": config.max_iter,
            "ftol": 1e-15,
            "gtol": min(1e-8, 0.1 * config.grad_tol),
        },
    )
    x = np.asarray(res.x, dtype=float)
    f, g = _nll_and_grad(x, data)
    n_iter = int(res.nit)
    margin_w = 1e-6 * (hi_w - lo_w)
    margin_s = 1e-6 * (s_hi - s_lo)
    interior = (
        lo_w + margin_w < x[0] < hi_w - margin_w
        and s_lo + margin_s < x[1] < s_hi - margin_s
    )
    if interior and np.all(np.isfinite(g)) and math.isfinite(f):
        x, f, g, extra = _newton_polish(x, f, g, data, bounds, config.grad_tol)
        n_iter += extra
        interior = (
            lo_w + margin_w < x[0] < hi_w - margin_w
            and s_lo + margin_s < x[1] < s_hi - margin_s
        )
    grad_norm = float(np.linalg.norm(g))
    if not (math.isfinite(f) and np.all(np.isfinite(g)) and np.all(np.isfinite(x))):
        status = "non_finite"
    elif not interior:
        status = "boundary"
    elif grad_norm > config.grad_tol:
        status = "no_convergence"
    elif not _locally_identified(x, data):
        # a saturated likelihood plateau (e.g. every choice fit with
        # probability ~1, the omega -> -inf pathology) underflows the
        # gradient below tolerance without being a real optimum
        status = "degenerate"
    else:
        status = "valid"
    return StartResult(
        index=index,
        omega0=float(x0[0]),
        lam0=float(math.exp(x0[1])),
        omega=float(x[0]),
        lam=float(math.exp(x[1])),
        nll=float(f),
        grad_norm=grad_norm,
        n_iter=n_iter,
        status=status,
    )


def fit_rum(gambles, ys, config: FitConfig | None = None, n_jobs: int = 1) -> RumFit:
    """Multi-start maximum-likelihood fit of (omega, lam).

    Starts are drawn uniformly over the search box from the configured
    seed, run independently (optionally across processes), and reduced in
    start-index order, so results do not depend on worker count. A start
    counts as a valid convergence only if it ends strictly inside the
    bounds with gradient norm at most ``grad_tol`` and a finite objective.

    Raises RumFitError (with per-start diagnostics) when no start is valid.
    """
    if config is None:
        config = FitConfig()
    data = _pack(gambles, ys)
    if config.n_starts < 1:
        raise ValueError("need at least one start")
    rng = np.random.default_rng(config.seed)
    lo_w, hi_w = config.omega_bounds
    s_lo = math.log(config.lam_bounds[0])
    s_hi = math.log(config.lam_bounds[1])
    omega0 = rng.uniform(lo_w, hi_w, config.n_starts)
    s0 = rng.uniform(s_lo, s_hi, config.n_starts)
    tasks = [
        (i, np.array([omega0[i], s0[i]]), data, config)
        for i in range(config.n_starts)
    ]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            starts = list(pool.map(_fit_single_start, tasks))
    else:
        starts = [_fit_single_start(t) for t in tasks]
    valid = [s for s in starts if s.status == "valid"]
    if not valid:
        raise RumFitError(
            "no start reached a valid interior convergence "
            f"({len(starts)} starts: "
            + ", ".join(f"{s.status}" for s in starts)
            + ")",
            tuple(starts),
        )
    k = min(config.sample_size, len(valid))
    chosen = sorted(rng.choice(len(valid), size=k, replace=False).tolist())
    sampled = [valid[i] for i in chosen]
    om = np.array([s.omega for s in sampled])
    lm = np.array([s.lam for s in sampled])
    return RumFit(
        omega=float(np.mean(om)),
        lam=float(np.mean(lm)),
        omega_std=float(np.std(om, ddof=1)) if k > 1 else 0.0,
        lam_std=float(np.std(lm, ddof=1)) if k > 1 else 0.0,
        n_decisions=int(data.y.size),
        n_valid=len(valid),
        sampled_indices=tuple(s.index for s in sampled),
        starts=tuple(starts),
        config=config,
    )
