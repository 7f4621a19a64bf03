"""ARIMA(p,d,q) estimation by exact Gaussian likelihood, order search, and
forecasting with integration back to the original scale.

The likelihood is evaluated through the innovations form of the Kalman
filter on the ARMA state space (state dimension max(p, q+1)), with the
exact stationary initial state covariance, and the innovation variance
concentrated out during optimization. Stationarity and invertibility are
enforced by optimizing in partial-autocorrelation coordinates, so the
derivative-free search can never wander into explosive regions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, signal

from .diagnostics import adf_test
from .errors import (
    ConditioningError,
    ConstraintError,
    ConvergenceError,
    DegenerateSeriesError,
    SearchExhaustedError,
    SeriesLengthError,
)
from .series import DifferencedSeries, Forecast, TimeSeries, difference, integrate

MAX_ORDER = 5
_STEADY_TOL = 1e-13
_BOUNDARY_TOL = 5e-4


@dataclass(frozen=True)
class ArimaOrder:
    """(p, d, q): AR order, differencing degree, MA order."""

    p: int
    d: int
    q: int

    def __post_init__(self):
        for name in ("p", "d", "q"):
            v = int(getattr(self, name))
            object.__setattr__(self, name, v)
            if v < 0 or v > MAX_ORDER:
                raise ValueError(f"{name}={v} outside 0..{MAX_ORDER}")

    def label(self) -> str:
        return f"({self.p},{self.d},{self.q})"


@dataclass(frozen=True)
class ArimaFit:
    """A fitted ARIMA model on the differenced scale.

    ``residuals`` are the one-step innovations of the Kalman recursion over
    the differenced training series (length = training length - d).
    ``constant`` is the regression constant; it is identically 0 when d >= 1
    or when no constant was requested. ``ma_boundary`` flags an MA root on
    (or numerically at) the unit circle: the fit is usable but sits on the
    edge of invertibility.
    """

    order: ArimaOrder
    constant: float
    ar_coeffs: tuple[float, ...]
    ma_coeffs: tuple[float, ...]
    sigma2: float
    log_likelihood: float
    aic: float
    residuals: tuple[float, ...]
    train_end_year: int
    constant_included: bool = False
    ma_boundary: bool = False

    def __post_init__(self):
        if len(self.ar_coeffs) != self.order.p or len(self.ma_coeffs) != self.order.q:
            raise ValueError("coefficient lengths do not match the order")
        if self.sigma2 <= 0.0:
            raise ValueError("innovation variance must be positive")

    @property
    def n_params(self) -> int:
        return self.order.p + self.order.q + (1 if self.constant_included else 0) + 1

    @property
    def mean(self) -> float:
        """Mean of the differenced process implied by the constant."""
        denom = 1.0 - sum(self.ar_coeffs)
        return self.constant / denom if self.constant else 0.0


# ------------------------------------------------------ parameter transforms


def pacf_to_ar(r) -> np.ndarray:
    """Map partial autocorrelations in (-1,1)^p to stationary AR coefficients."""
    phi = np.empty(0)
    for k, rk in enumerate(np.asarray(r, dtype=float)):
        if not -1.0 < rk < 1.0:
            raise ConstraintError(f"partial autocorrelation {rk} outside (-1, 1)")
        if k == 0:
            phi = np.array([rk])
        else:
            phi = np.append(phi - rk * phi[::-1], rk)
    return phi


def ar_to_pacf(phi) -> np.ndarray:
    """Inverse of :func:`pacf_to_ar`; fails on non-stationary coefficients."""
    phi = np.asarray(phi, dtype=float).copy()
    out = []
    while phi.size:
        rk = float(phi[-1])
        if not -1.0 < rk < 1.0:
            raise ConstraintError("coefficients are not stationary")
        out.append(rk)
        head = phi[:-1]
        phi = (head + rk * head[::-1]) / (1.0 - rk * rk)
    return np.array(out[::-1])


def _unconstrained_to_pacf(u: np.ndarray) -> np.ndarray:
    return u / np.sqrt(1.0 + u * u)

def _pacf_to_unconstrained(r: np.ndarray) -> np.ndarray:
    return r / np.sqrt(1.0 - r * r)


def _decode_params(u: np.ndarray, p: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Unconstrained vector -> (stationary AR, invertible MA) coefficients."""
    ar = pacf_to_ar(_unconstrained_to_pacf(u[:p])) if p else np.empty(0)
    ma = -pacf_to_ar(_unconstrained_to_pacf(u[p : p + q])) if q else np.empty(0)
    return ar, ma


def _encode_params(ar, ma) -> np.ndarray:
    p_part = _pacf_to_unconstrained(ar_to_pacf(ar)) if len(ar) else np.empty(0)
    q_part = _pacf_to_unconstrained(ar_to_pacf(-np.asarray(ma, dtype=float))) if len(ma) else np.empty(0)
    return np.concatenate([p_part, q_part])


def ar_is_stationary(ar) -> bool:
    ar = np.asarray(ar, dtype=float)
    if ar.size == 0:
        return True
    roots = np.roots(np.r_[1.0, -ar])
    return bool(np.max(np.abs(roots)) < 1.0)


def ma_boundary_distance(ma) -> float:
    """Largest characteristic-root modulus of the MA polynomial (0 if q=0)."""
    ma = np.asarray(ma, dtype=float)
    if ma.size == 0 or not np.any(ma):
        return 0.0
    return float(np.max(np.abs(np.roots(np.r_[1.0, ma]))))


# --------------------------------------------------------- likelihood kernel


def _state_matrices(ar: np.ndarray, ma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p, q = ar.size, ma.size
    m = max(p, q + 1)
    T = np.zeros((m, m))
    T[:p, 0] = ar
    for i in range(m - 1):
        T[i, i + 1] = 1.0
    R = np.zeros(m)
    R[0] = 1.0
    R[1 : q + 1] = ma
    return T, R


def _stationary_cov(T: np.ndarray, R: np.ndarray) -> np.ndarray:
    m = T.shape[0]
    rhs = np.outer(R, R).ravel()
    A = np.eye(m * m) - np.kron(T, T)
    return np.linalg.solve(A, rhs).reshape(m, m)


def _filter_innovations(z: np.ndarray, ar: np.ndarray, ma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Innovations v_t and their variances F_t (at unit innovation variance).

    Switches to the steady-state gain once the covariance recursion stops
    moving, which cuts the per-observation cost to a couple of dot products.
    """
    if not ar_is_stationary(ar):
        raise ConstraintError("AR coefficients are not stationary")
    T, R = _state_matrices(ar, ma)
    RRt = np.outer(R, R)
    P = _stationary_cov(T, R)
    m = T.shape[0]
    a = np.zeros(m)
    n = z.size
    v = np.empty(n)
    F = np.empty(n)
    K = np.zeros(m)
    steady = False
    f_cur = 0.0
    for t in range(n):
        if not steady:
            f_cur = P[0, 0]
            if f_cur <= 0.0 or not math.isfinite(f_cur):
                raise ConditioningError(
                    f"prediction variance {f_cur} at step {t} is not positive"
                )
            K = (T @ P[:, 0]) / f_cur
            P_next = T @ P @ T.T + RRt - np.outer(K, K) * f_cur
            if np.max(np.abs(P_next - P)) < _STEADY_TOL:
                steady = True
            P = P_next
        v[t] = z[t] - a[0]
        F[t] = f_cur
        a = T @ a + K * v[t]
    return v, F


def arima_loglik(diff_values, ar_coeffs=(), ma_coeffs=(), sigma2: float = 1.0, mean: float = 0.0) -> float:
    """Exact Gaussian log-likelihood of ARMA(p,q) data at fixed parameters.

    ``diff_values`` is the (already differenced) series; ``mean`` is its
    process mean. Deterministic for fixed inputs.
    """
    z = np.asarray(diff_values, dtype=float) - float(mean)
    if sigma2 <= 0.0:
        raise ValueError("sigma2 must be positive")
    ar = np.asarray(ar_coeffs, dtype=float)
    ma = np.asarray(ma_coeffs, dtype=float)
    v, F = _filter_innovations(z, ar, ma)
    n = z.size
    return float(
        -0.5 * n * math.log(2.0 * math.pi * sigma2)
        - 0.5 * float(np.sum(np.log(F)))
        - 0.5 * float(np.sum(v * v / F)) / sigma2
    )


def _concentrated_loglik(z: np.ndarray, ar: np.ndarray, ma: np.ndarray) -> tuple[float, float]:
    """(log-likelihood at the MLE variance, that variance)."""
    v, F = _filter_innovations(z, ar, ma)
    n = z.size
    sigma2 = float(np.sum(v * v / F)) / n
    if sigma2 <= 0.0:
        raise ConditioningError("degenerate innovation variance")
    ll = -0.5 * n * (math.log(2.0 * math.pi * sigma2) + 1.0) - 0.5 * float(
        np.sum(np.log(F))
    )
    return ll, sigma2


# ------------------------------------------------------------ starting values


def _hannan_rissanen_start(z: np.ndarray, p: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Regression-based (conditional sum of squares flavored) starting values."""
    n = z.size

    def lagmat(x: np.ndarray, k: int, start: int) -> np.ndarray:
        rows = np.arange(start, x.size)
        return np.column_stack([x[rows - i] for i in range(1, k + 1)])

    try:
        if q == 0:
            X = lagmat(z, p, p)
            beta, *_ = np.linalg.lstsq(X, z[p:], rcond=None)
            ar, ma = beta[:p], np.empty(0)
        else:
            k_long = min(max(10, p + q + 2), max(p + q + 2, n // 3))
            if n - k_long < p + q + 4:
                raise np.linalg.LinAlgError
            Xl = lagmat(z, k_long, k_long)
            phi_long, *_ = np.linalg.lstsq(Xl, z[k_long:], rcond=None)
            e = np.zeros(n)
            e[k_long:] = z[k_long:] - Xl @ phi_long
            start = k_long + q
            cols = []
            if p:
                cols.append(lagmat(z, p, start))
            cols.append(lagmat(e, q, start))
            X = np.column_stack(cols)
            beta, *_ = np.linalg.lstsq(X, z[start:], rcond=None)
            ar, ma = beta[:p], beta[p : p + q]
    except np.linalg.LinAlgError:
        ar, ma = np.zeros(p), np.zeros(q)

    return _shrink_to_valid(ar, p), -_shrink_to_valid(-np.asarray(ma, float), q)


def _shrink_to_valid(coeffs: np.ndarray, k: int) -> np.ndarray:
    """Project coefficients into the open stationarity region."""
    coeffs = np.asarray(coeffs, dtype=float)
    if k == 0:
        return np.empty(0)
    if coeffs.size != k or not np.all(np.isfinite(coeffs)):
        return np.zeros(k)
    for scale in (1.0, 0.9, 0.7, 0.5, 0.25, 0.0):
        cand = coeffs * scale
        try:
            r = ar_to_pacf(cand)
        except ConstraintError:
            continue
        if np.all(np.abs(r) < 0.98):
            return cand
    return np.zeros(k)


def _css_objective(z: np.ndarray, p: int, q: int):
    """Conditional sum of squares with zero pre-sample values.

    The residual recursion theta(L) e = phi(L) z is a rational filter, so
    one lfilter call evaluates it; the decoded parameters keep theta(L)
    invertible and the filter stable.
    """

    def objective(u: np.ndarray) -> float:
        ar, ma = _decode_params(u, p, q)
        e = signal.lfilter(np.r_[1.0, -ar], np.r_[1.0, ma], z)
        tail = e[p:]
        return float(np.dot(tail, tail))

    return objective


# -------------------------------------------------------------------- fitting

_RESTART_JITTERS = (0.5, -0.5, 1.0)


def arima_fit(train: TimeSeries, order: ArimaOrder, include_constant: bool = False) -> ArimaFit:
    """Fit ARIMA(p,d,q) to a training series by exact maximum likelihood.

    The series is differenced d times, then ARMA(p,q) parameters maximize
    the exact likelihood via Nelder-Mead in partial-autocorrelation
    coordinates, started from regression-based estimates polished by a
    conditional-sum-of-squares pass. ``include_constant`` only applies at
    d = 0; differencing removes the constant otherwise.
    """
    p, d, q = order.p, order.d, order.q
    if len(train) <= d + p + q + 2:
        raise SeriesLengthError(
            f"order {order.label()} needs more than {d + p + q + 2} observations, "
            f"got {len(train)}"
        )
    with_const = bool(include_constant) and d == 0
    z_full = difference(train, d).values if d else train.values
    z = np.asarray(z_full, dtype=float)
    n = z.size

    if np.all(z == 0.0):
        # Differencing annihilated the series (constant or exactly linear
        # input): every ARMA completion fits perfectly and the likelihood
        # surface is flat, so return the zero-coefficient fit with the
        # smallest positive variance instead of optimizing. AIC then ranks
        # these fits purely by parameter count.
        sigma2 = float(np.finfo(float).tiny)
        ll = -0.5 * n * (math.log(2.0 * math.pi * sigma2) + 1.0)
        return _build_fit(
            order, 0.0, np.zeros(p), np.zeros(q), sigma2, ll, z.copy(), train, with_const
        )

    if p == 0 and q == 0:
        mu = float(z.mean()) if with_const else 0.0
        resid = z - mu
        sigma2 = float(np.dot(resid, resid)) / n
        if sigma2 <= 0.0:
            if np.all(resid == 0.0):
                # Perfectly predictable (e.g. a constant series after one
                # difference): represent the fit with the smallest positive
                # variance instead of failing, so a pure-difference model
                # can still win an order search.
                sigma2 = float(np.finfo(float).tiny)
            else:
                raise ConditioningError("degenerate series: zero innovation variance")
        ll = -0.5 * n * (math.log(2.0 * math.pi * sigma2) + 1.0)
        return _build_fit(order, mu, np.empty(0), np.empty(0), sigma2, ll, resid, train, with_const)

    ar0, ma0 = _hannan_rissanen_start(z - (z.mean() if with_const else 0.0), p, q)
    u0 = _encode_params(ar0, ma0)

    css = _css_objective(z - (z.mean() if with_const else 0.0), p, q)
    css_res = optimize.minimize(
        css, u0, method="Nelder-Mead",
        options={"xatol": 1e-6, "fatol": 1e-9, "maxiter": 300, "maxfev": 600},
    )
    u_start = css_res.x if np.all(np.isfinite(css_res.x)) else u0
    if with_const:
        u_start = np.append(u_start, z.mean())

    def negloglik(u: np.ndarray) -> float:
        try:
            ar, ma = _decode_params(u, p, q)
            mu = u[p + q] if with_const else 0.0
            ll, _ = _concentrated_loglik(z - mu, ar, ma)
        except (ConstraintError, ConditioningError, np.linalg.LinAlgError):
            return math.inf
        return -ll

    def run_nm(u_init: np.ndarray):
        # an all-infinite simplex (degenerate data) makes Nelder-Mead
        # compare inf-inf internally; that is expected, not an error
        with np.errstate(invalid="ignore", over="ignore"):
            return optimize.minimize(
                negloglik, u_init, method="Nelder-Mead",
                options={"xatol": 1e-7, "fatol": 1e-9, "maxiter": 2000, "maxfev": 4000},
            )

    # A finite objective is accepted even when the iteration budget ran out:
    # on a likelihood ridge the extra restarts only re-exhaust the budget.
    # Restarts are for a start point whose whole neighborhood is infeasible.
    best = run_nm(u_start)
    if not math.isfinite(best.fun):
        for jitter in _RESTART_JITTERS:
            attempt = run_nm(u_start + jitter)
            if math.isfinite(attempt.fun) and not (
                math.isfinite(best.fun) and best.fun <= attempt.fun
            ):
                best = attempt
            if math.isfinite(best.fun):
                break
    if not math.isfinite(best.fun):
        raise ConvergenceError(
            f"likelihood optimization failed for order {order.label()}",
            best_params=tuple(best.x),
            best_objective=float(best.fun),
        )

    ar, ma = _decode_params(best.x, p, q)
    mu = float(best.x[p + q]) if with_const else 0.0
    ll, sigma2 = _concentrated_loglik(z - mu, ar, ma)
    v, _ = _filter_innovations(z - mu, ar, ma)
    return _build_fit(order, mu, ar, ma, sigma2, ll, v, train, with_const)


def _build_fit(
    order: ArimaOrder,
    mu: float,
    ar: np.ndarray,
    ma: np.ndarray,
    sigma2: float,
    ll: float,
    residuals: np.ndarray,
    train: TimeSeries,
    with_const: bool,
) -> ArimaFit:
    constant = mu * (1.0 - float(np.sum(ar))) if with_const else 0.0
    k = order.p + order.q + (1 if with_const else 0) + 1
    return ArimaFit(
        order=order,
        constant=float(constant),
        ar_coeffs=tuple(float(c) for c in ar),
        ma_coeffs=tuple(float(c) for c in ma),
        sigma2=float(sigma2),
        log_likelihood=float(ll),
        aic=float(-2.0 * ll + 2.0 * k),
        residuals=tuple(float(r) for r in residuals),
        train_end_year=train.end_year,
        constant_included=with_const,
        ma_boundary=ma_boundary_distance(ma) > 1.0 - _BOUNDARY_TOL,
    )


# --------------------------------------------------- differencing selection


@dataclass(frozen=True)
class DifferencingDecision:
    """The chosen differencing degree and the ADF trail that led to it.

    ``adf_trail`` holds (degree, unit-root test) pairs in the order tried;
    degenerate degrees that could not be tested are absent. ``forced`` is
    True when the maximum degree was taken without the test rejecting
    (fallback), or when degeneracy decided instead of the test.
    """

    d: int
    adf_trail: tuple
    forced: bool = False


def select_differencing(train: TimeSeries, d_max: int = 2, alpha: float = 0.05) -> DifferencingDecision:
    """Smallest d in 0..d_max whose d-differenced series passes the ADF test.

    A series that is exactly constant at some degree is perfectly
    predictable by one more difference (a pure-difference model), so that
    degree + 1 is returned without further testing. If no degree rejects
    the unit-root null, d_max is returned with ``forced`` set.
    """
    if d_max < 0:
        raise ValueError("d_max must be non-negative")
    trail = []
    for d in range(d_max + 1):
        values = difference(train, d).values if d else train.values
        z = np.asarray(values, dtype=float)
        if np.ptp(z) == 0.0:
            if np.all(z == 0.0):
                return DifferencingDecision(d=d, adf_trail=tuple(trail), forced=True)
            return DifferencingDecision(
                d=min(d + 1, d_max), adf_trail=tuple(trail), forced=True
            )
        try:
            result = adf_test(z)
        except DegenerateSeriesError:
            # Deterministic at this level (e.g. an exact polynomial trend):
            # one more difference removes it.
            continue
        trail.append((d, result))
        if result.p_value < alpha:
            return DifferencingDecision(d=d, adf_trail=tuple(trail))
    return DifferencingDecision(d=d_max, adf_trail=tuple(trail), forced=True)


# --------------------------------------------------------------- order search


@dataclass(frozen=True)
class SearchEntry:
    order: ArimaOrder
    aic: float
    fit: ArimaFit


@dataclass(frozen=True)
class SkippedOrder:
    order: ArimaOrder
    reason: str


@dataclass(frozen=True)
class OrderSearchResult:
    """AIC ranking over the (p, q) grid at fixed d.

    ``ranked`` is ascending by AIC (ties broken by (p, q)); ``skipped``
    records every candidate that failed to fit and why.
    """

    ranked: tuple[SearchEntry, ...]
    skipped: tuple[SkippedOrder, ...]

    @property
    def best(self) -> SearchEntry:
        return self.ranked[0]


def arima_order_search(
    train: TimeSeries,
    d: int,
    p_max: int = 3,
    q_max: int = 3,
    include_constant: bool = False,
) -> OrderSearchResult:
    """Fit every (p, d, q) with p <= p_max, q <= q_max and rank by AIC."""
    if not 0 <= p_max <= MAX_ORDER or not 0 <= q_max <= MAX_ORDER:
        raise ValueError(f"p_max and q_max must lie in 0..{MAX_ORDER}")
    entries: list[SearchEntry] = []
    skipped: list[SkippedOrder] = []
    for p in range(p_max + 1):
        for q in range(q_max + 1):
            order = ArimaOrder(p, d, q)
            try:
                fit = arima_fit(train, order, include_constant=include_constant)
            except Exception as exc:  # noqa: BLE001 - reason is reported, never dropped
                skipped.append(SkippedOrder(order, f"{type(exc).__name__}: {exc}"))
                continue
            entries.append(SearchEntry(order, fit.aic, fit))
    if not entries:
        reasons = "; ".join(f"{s.order.label()}: {s.reason}" for s in skipped)
        raise SearchExhaustedError(f"every candidate order failed to fit ({reasons})")
    entries.sort(key=lambda e: (e.aic, e.order.p, e.order.q))
    return OrderSearchResult(ranked=tuple(entries), skipped=tuple(skipped))


# ----------------------------------------------------------------- forecasting


def arima_forecast(fit: ArimaFit, train: TimeSeries, horizon: int) -> Forecast:
    """h-step forecasts on the original scale.

    Runs the filter over the differenced training series to the end-of-sample
    state, iterates the transition for each step ahead, then integrates the
    differenced forecasts back through the stored initial values.
    """
    horizon = int(horizon)
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    d = fit.order.d
    diff = difference(train, d)
    mu = fit.mean
    z = np.asarray(diff.values, dtype=float) - mu
    ar = np.asarray(fit.ar_coeffs, dtype=float)
    ma = np.asarray(fit.ma_coeffs, dtype=float)

    T, R = _state_matrices(ar, ma)
    RRt = np.outer(R, R)
    P = _stationary_cov(T, R)
    m = T.shape[0]
    a = np.zeros(m)
    steady = False
    K = np.zeros(m)
    f_cur = 0.0
    for t in range(z.size):
        if not steady:
            f_cur = P[0, 0]
            if f_cur <= 0.0:
                raise ConditioningError(f"prediction variance {f_cur} is not positive")
            K = (T @ P[:, 0]) / f_cur
            P_next = T @ P @ T.T + RRt - np.outer(K, K) * f_cur
            if np.max(np.abs(P_next - P)) < _STEADY_TOL:
                steady = True
            P = P_next
        a = T @ a + K * (z[t] - a[0])

    diff_preds = []
    for _ in range(horizon):
        diff_preds.append(float(a[0]) + mu)
        a = T @ a
    extended = DifferencedSeries(
        start_year=diff.start_year,
        order=d,
        values=tuple(diff.values) + tuple(diff_preds),
        initial_values=diff.initial_values,
    )
    full = integrate(extended)
    return Forecast(
        first_year=train.end_year + 1,
        values=full.values[-horizon:],
        source=("arima",),
    )
