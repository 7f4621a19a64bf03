"""Stationarity tests, correlograms, and residual tests, all with p-values.

Implements the augmented Dickey-Fuller and KPSS stationarity tests, sample
ACF/PACF, the Ljung-Box portmanteau test, and the Shapiro-Wilk normality
test (Royston's AS R94 approximation). Only generic numerics come from
scipy (normal and chi-squared distribution functions, linear algebra).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import (
    DegenerateSeriesError,
    InvalidDfError,
    SeriesLengthError,
)


class TestName(str, enum.Enum):
    ADF = "adf"
    KPSS = "kpss"
    LJUNG_BOX = "ljung_box"
    SHAPIRO_WILK = "shapiro_wilk"


@dataclass(frozen=True)
class TestResult:
    """Outcome of a hypothesis test at the 5% level.

    ``p_bound`` is None for an interior p-value, or "ge"/"le" when the
    p-value sits at the edge of the tabulated range and is only known as a
    bound ("p >= 0.10" / "p <= 0.01" style reporting).
    """

    test_name: TestName
    statistic: float
    p_value: float
    lags_used: int
    df: int | None = None
    p_bound: str | None = None

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")
        if self.p_bound not in (None, "ge", "le"):
            raise ValueError(f"unknown p-value bound kind {self.p_bound!r}")

    @property
    def reject_at_005(self) -> bool:
        return self.p_value < 0.05

    def describe_p(self) -> str:
        if self.p_bound == "ge":
            return f">= {self.p_value:.4g}"
        if self.p_bound == "le":
            return f"<= {self.p_value:.4g}"
        return f"{self.p_value:.4g}"


@dataclass(frozen=True)
class CorrelogramPoint:
    """One bar of an ACF or PACF plot with its white-noise band half-width."""

    lag: int
    value: float
    conf_bound: float


def _demeaned(series) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValueError("series must be one-dimensional")
    return x - x.mean()


def acf_values(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelations r_1..r_max_lag (biased normalization).

    r_k = sum_t (y_t - ybar)(y_{t+k} - ybar) / sum_t (y_t - ybar)^2.
    """
    x = _demeaned(series)
    n = x.size
    max_lag = int(max_lag)
    if max_lag < 1:
        raise ValueError("max_lag must be a positive integer")
    if max_lag >= n:
        raise SeriesLengthError(f"max_lag {max_lag} must be < series length {n}")
    denom = float(np.dot(x, x))
    if denom <= 0.0:
        raise DegenerateSeriesError("autocorrelation of a constant series is undefined")
    return np.array([float(np.dot(x[:-k], x[k:])) / denom for k in range(1, max_lag + 1)])


def acf(series, max_lag: int) -> list[CorrelogramPoint]:
    """Sample ACF with the +-1.96/sqrt(n) white-noise band."""
    r = acf_values(series, max_lag)
    band = 1.96 / math.sqrt(len(np.asarray(series)))
    return [CorrelogramPoint(k + 1, float(v), band) for k, v in enumerate(r)]


def pacf_values(series, max_lag: int) -> np.ndarray:
    """Partial autocorrelations via the Durbin-Levinson recursion."""
    r = acf_values(series, max_lag)
    pacf = np.empty(max_lag)
    phi_prev = np.empty(0)
    for k in range(1, max_lag + 1):
        if k == 1:
            phi_kk = r[0]
            phi_cur = np.array([phi_kk])
        else:
            num = r[k - 1] - float(np.dot(phi_prev, r[k - 2 :: -1][: k - 1]))
            den = 1.0 - float(np.dot(phi_prev, r[: k - 1]))
            if abs(den) < 1e-12:
                raise DegenerateSeriesError(
                    f"partial autocorrelation recursion singular at lag {k}"
                )
            phi_kk = num / den
            phi_cur = np.empty(k)
            phi_cur[: k - 1] = phi_prev - phi_kk * phi_prev[::-1]
            phi_cur[k - 1] = phi_kk
        pacf[k - 1] = phi_kk
        phi_prev = phi_cur
    return pacf


def pacf(series, max_lag: int) -> list[CorrelogramPoint]:
    """Sample PACF with the +-1.96/sqrt(n) white-noise band."""
    v = pacf_values(series, max_lag)
    band = 1.96 / math.sqrt(len(np.asarray(series)))
    return [CorrelogramPoint(k + 1, float(x), band) for k, x in enumerate(v)]


# MacKinnon (1994) response-surface coefficients for Dickey-Fuller p-values,
# single-variable case. The test statistic feeds a polynomial whose value is
# a standard-normal deviate; separate fits cover the small-p (very negative
# statistic) and large-p regions.
_MACKINNON = {
    "c": {
        "star": -1.61,
        "min": -18.83,
        "max": 2.74,
        "smallp": (2.1659, 1.4412, 0.038269),
        "largep": (1.7339, 0.93202, -0.12745, -0.010368),
    },
    "ct": {
        "star": -2.89,
        "min": -16.18,
        "max": 0.70,
        "smallp": (3.2512, 1.6047, 0.049588),
        "largep": (2.5261, 0.61654, -0.37956, -0.060285),
    },
}


def mackinnon_pvalue(stat: float, regression: str = "c") -> tuple[float, str | None]:
    """Dickey-Fuller p-value from the MacKinnon response-surface fit.

    Returns ``(p, bound)`` where bound is "le"/"ge" when the statistic falls
    outside the fitted range and the p-value is clamped.
    """
    tab = _MACKINNON[regression]
    if stat <= tab["min"]:
        return 1e-4, "le"
    if stat >= tab["max"]:
        return 0.9999, "ge"
    coeffs = tab["smallp"] if stat <= tab["star"] else tab["largep"]
    z = sum(c * stat**i for i, c in enumerate(coeffs))
    p = float(stats.norm.cdf(z))
    return min(max(p, 0.0), 1.0), None


def _ols(y: np.ndarray, X: np.ndarray) -> tuple[np.ndarray, float, np.ndarray]:
    """OLS fit returning (beta, ssr, standard errors)."""
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    ssr = float(resid @ resid)
    dof = y.size - X.shape[1]
    if dof <= 0:
        raise SeriesLengthError("not enough observations for the regression")
    if rank < X.shape[1]:
        raise DegenerateSeriesError("regressors are collinear")
    sigma2 = ssr / dof
    xtx_inv = np.linalg.inv(X.T @ X)
    se = np.sqrt(sigma2 * np.diag(xtx_inv))
    return beta, ssr, se


def default_adf_max_lag(n: int, regression: str = "c") -> int:
    """Schwert's rule of thumb, capped so the regression stays estimable."""
    lag = int(math.floor(12.0 * (n / 100.0) ** 0.25))
    extra = 1 if regression == "ct" else 0
    return max(0, min(lag, (n - 4 - extra) // 2))


def adf_test(series, max_lag: int | None = None, regression: str = "c") -> TestResult:
    """Augmented Dickey-Fuller unit-root test.

    H0: the series has a unit root (is not stationary); small p-values
    favor stationarity. The regression includes a constant by default
    ("c"), or a constant plus linear trend with regression="ct". The lag
    order is chosen by AIC over 0..max_lag on a common sample, then the
    statistic comes from a refit on all usable observations.
    """
    y = np.asarray(series, dtype=float)
    n = y.size
    if n < 10:
        raise SeriesLengthError(f"adf test needs at least 10 observations, got {n}")
    if regression not in ("c", "ct"):
        raise ValueError("regression must be 'c' or 'ct'")
    if np.ptp(y) == 0.0:
        raise DegenerateSeriesError("adf test of a constant series is undefined")
    # Largest k leaving at least one residual degree of freedom at the
    # lag-selection stage, where every candidate shares the max_lag sample.
    cap = (n - 4 - (1 if regression == "ct" else 0)) // 2
    if max_lag is None:
        max_lag = min(default_adf_max_lag(n, regression), cap)
    max_lag = int(max_lag)
    if max_lag < 0:
        raise ValueError("max_lag must be non-negative")
    if max_lag > cap:
        raise SeriesLengthError(
            f"series of length {n} too short for adf with {max_lag} augmenting lags"
        )
    dy = np.diff(y)

    def design(k: int, start: int) -> tuple[np.ndarray, np.ndarray]:
        # Rows are t = start..n-2 on the 0-based diff index.
        rows = np.arange(start, n - 1)
        cols = [np.ones(rows.size), y[rows]]
        if regression == "ct":
            cols.append(rows.astype(float))
        for i in range(1, k + 1):
            cols.append(dy[rows - i])
        return dy[rows], np.column_stack(cols)

    # Lag order by AIC on the sample truncated to the largest candidate.
    best_k, best_aic = None, np.inf
    for k in range(0, max_lag + 1):
        yk, Xk = design(k, start=max_lag)
        try:
            _, ssr, _ = _ols(yk, Xk)
        except DegenerateSeriesError:
            continue
        n_eff = yk.size
        aic = -np.inf if ssr <= 0.0 else n_eff * math.log(ssr / n_eff) + 2.0 * Xk.shape[1]
        if aic < best_aic - 1e-12 or best_k is None:
            best_aic, best_k = aic, k
    if best_k is None:
        raise DegenerateSeriesError("adf regression is degenerate at every lag order")
    yk, Xk = design(best_k, start=best_k)
    beta, _, se = _ols(yk, Xk)
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = float(beta[1] / se[1])
    if not math.isfinite(stat):
        raise DegenerateSeriesError(
            "adf regression is deterministic (zero residual variance)"
        )
    p, bound = mackinnon_pvalue(stat, regression)
    return TestResult(TestName.ADF, stat, p, lags_used=best_k, df=None, p_bound=bound)


# Level-stationarity critical values (stat, upper-tail p).
_KPSS_TABLE = ((0.347, 0.10), (0.463, 0.05), (0.574, 0.025), (0.739, 0.01))


def kpss_bandwidth(n: int) -> int:
    return int(math.floor(4.0 * (n / 100.0) ** 0.25))


def kpss_test(series) -> TestResult:
    """KPSS test of level stationarity.

    H0: the series is stationary around a constant; large statistics reject.
    Long-run variance uses a Bartlett kernel with the conventional
    floor(4*(n/100)^0.25) bandwidth. P-values are interpolated in the
    standard critical-value table and clamped to [0.01, 0.10] outside it,
    flagged as a bound.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 10:
        raise SeriesLengthError(f"kpss test needs at least 10 observations, got {n}")
    e = x - x.mean()
    if float(np.dot(e, e)) <= 0.0:
        raise DegenerateSeriesError("kpss test of a constant series is undefined")
    lags = kpss_bandwidth(n)
    lrv = float(np.dot(e, e)) / n
    for j in range(1, lags + 1):
        gamma_j = float(np.dot(e[j:], e[:-j])) / n
        lrv += 2.0 * (1.0 - j / (lags + 1.0)) * gamma_j
    if lrv <= 0.0:
        raise DegenerateSeriesError("kpss long-run variance is not positive")
    s = np.cumsum(e)
    stat = float(np.dot(s, s)) / (n * n * lrv)

    crit = np.array([row[0] for row in _KPSS_TABLE])
    pvals = np.array([row[1] for row in _KPSS_TABLE])
    if stat < crit[0]:
        p, bound = 0.10, "ge"
    elif stat > crit[-1]:
        p, bound = 0.01, "le"
    else:
        p, bound = float(np.interp(stat, crit, pvals)), None
    return TestResult(TestName.KPSS, stat, p, lags_used=lags, df=None, p_bound=bound)


def default_ljung_box_lags(n: int) -> int:
    return min(10, n // 5)


def ljung_box(residuals, lags: int | None = None, fitted_params: int = 0) -> TestResult:
    """Ljung-Box portmanteau test that residuals are white noise.

    Q = n(n+2) * sum_{k=1..h} r_k^2/(n-k), compared against chi-squared
    with h - fitted_params degrees of freedom. ``fitted_params`` is the
    number of estimated ARMA coefficients behind the residuals (0 for
    smoothing models).
    """
    x = np.asarray(residuals, dtype=float)
    n = x.size
    if lags is None:
        lags = default_ljung_box_lags(n)
    lags = int(lags)
    fitted_params = int(fitted_params)
    if fitted_params < 0:
        raise ValueError("fitted_params must be non-negative")
    if lags <= fitted_params:
        raise InvalidDfError(
            f"ljung-box needs lags > fitted_params, got lags={lags} and "
            f"fitted_params={fitted_params}"
        )
    if lags >= n:
        raise SeriesLengthError(f"ljung-box lags {lags} must be < sample size {n}")
    r = acf_values(x, lags)
    k = np.arange(1, lags + 1)
    q = float(n * (n + 2.0) * np.sum(r**2 / (n - k)))
    df = lags - fitted_params
    p = float(stats.chi2.sf(q, df))
    return TestResult(TestName.LJUNG_BOX, q, p, lags_used=lags, df=df)


# Royston (1995) AS R94 polynomial coefficients.
_SW_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_SW_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_SW_SMALL_MU = (0.5440, -0.39978, 0.025054, -6.714e-4)
_SW_SMALL_SIG = (1.3822, -0.77857, 0.062767, -2.0322e-3)
_SW_LARGE_MU = (-1.5861, -0.31082, -0.083751, 3.8915e-3)
_SW_LARGE_SIG = (-0.4803, -0.082676, 3.0302e-3)


def _poly(coeffs, x: float) -> float:
    return float(sum(c * x**i for i, c in enumerate(coeffs)))


def shapiro_wilk(sample) -> TestResult:
    """Shapiro-Wilk normality test via Royston's AS R94 approximation.

    H0: the sample is drawn from a normal distribution. Valid for
    3 <= n <= 5000.
    """
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n < 3 or n > 5000:
        raise SeriesLengthError(f"shapiro-wilk requires 3 <= n <= 5000, got {n}")
    if x[0] == x[-1]:
        raise DegenerateSeriesError("shapiro-wilk of identical values is undefined")

    # Blom approximation to expected normal order statistics.
    m = stats.norm.ppf((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    msq = float(np.dot(m, m))
    if n == 3:
        a = np.array([-math.sqrt(0.5), 0.0, math.sqrt(0.5)])
    else:
        c = m / math.sqrt(msq)
        u = 1.0 / math.sqrt(n)
        a = np.empty(n)
        a_n = _poly(_SW_C1, u) + c[-1]
        if n > 5:
            a_n1 = _poly(_SW_C2, u) + c[-2]
            phi = (msq - 2.0 * m[-1] ** 2 - 2.0 * m[-2] ** 2) / (
                1.0 - 2.0 * a_n**2 - 2.0 * a_n1**2
            )
            a[2:-2] = m[2:-2] / math.sqrt(phi)
            a[-2], a[1] = a_n1, -a_n1
        else:
            phi = (msq - 2.0 * m[-1] ** 2) / (1.0 - 2.0 * a_n**2)
            a[1:-1] = m[1:-1] / math.sqrt(phi)
        a[-1], a[0] = a_n, -a_n

    centered = x - x.mean()
    ss = float(np.dot(centered, centered))
    if ss <= 0.0:
        raise DegenerateSeriesError("shapiro-wilk of identical values is undefined")
    w = float(np.dot(a, x)) ** 2 / ss
    w = min(w, 1.0)

    if n == 3:
        p = (6.0 / math.pi) * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        p = min(max(p, 0.0), 1.0)
    else:
        if n <= 11:
            g = -2.273 + 0.459 * n
            if 1.0 - w >= math.exp(g):
                # W too small for the log-log transform; overwhelming evidence.
                return TestResult(TestName.SHAPIRO_WILK, w, 0.0, lags_used=0)
            z_w = -math.log(g - math.log(1.0 - w))
            mu = _poly(_SW_SMALL_MU, float(n))
            sigma = math.exp(_poly(_SW_SMALL_SIG, float(n)))
        else:
            ln_n = math.log(n)
            z_w = math.log(1.0 - w)
            mu = _poly(_SW_LARGE_MU, ln_n)
            sigma = math.exp(_poly(_SW_LARGE_SIG, ln_n))
        p = float(stats.norm.sf((z_w - mu) / sigma))
    return TestResult(TestName.SHAPIRO_WILK, w, p, lags_used=0, df=None)
