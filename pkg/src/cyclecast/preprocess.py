"""Raw-series preprocessing: stationarity transforms, Z-scores, long-run
variance weighting, and panel alignment.

The pipeline order is fixed: stationarity transform first, then Z-score
standardization, then Newey-West long-run variance (computed on a subsampled
copy) used to rescale each series before index construction. Z-scores use the
population (divisor n) standard deviation throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .dataset import Category, MonthStamp, RawSeries, Region, Transform
from .errors import (
    EmptyOverlapError,
    NonPositiveForLogError,
    TooShortError,
    ZeroVarianceError,
)

__all__ = [
    "StandardizedSeries",
    "Provenance",
    "Panel",
    "AdfResult",
    "difference_transform",
    "adf_statistic",
    "schwert_lag",
    "newey_west_lag",
    "zscore",
    "newey_west_variance",
    "subsample",
    "nw_rescale",
    "ensure_stationary",
    "standardize_series",
    "align_panel",
]

# Large-sample Dickey-Fuller critical values, constant-only specification.
ADF_CRITICAL = {0.01: -3.43, 0.05: -2.86, 0.10: -2.57}


@dataclass(frozen=True)
class Provenance:
    """How a standardized series was produced."""

    transform: Transform = Transform.NONE
    zscore_mode: str = "full"
    nw_lag: int | None = None
    subsample_stride: int | None = None


@dataclass(frozen=True)
class StandardizedSeries:
    """Unitless standardized series, ready for panel alignment."""

    series_id: str
    region: Region
    category: Category
    months: tuple[MonthStamp, ...]
    values: tuple[float, ...]
    provenance: Provenance

    def __len__(self) -> int:
        return len(self.months)


@dataclass(frozen=True)
class AdfResult:
    statistic: float
    is_stationary: bool
    lag: int
    critical_value: float


@dataclass(frozen=True)
class Panel:
    """Rectangular months-by-series matrix with per-column availability.

    ``values[i, j]`` is NaN before column j's first observation; from that
    month on, unobserved months are forward-filled (fill counts per column in
    ``fills``). Rows cover the requested range contiguously.
    """

    months: tuple[MonthStamp, ...]
    series_ids: tuple[str, ...]
    categories: tuple[Category, ...]
    values: np.ndarray
    fills: tuple[int, ...]
    region: Region | None = None

    @property
    def n_months(self) -> int:
        return len(self.months)

    @property
    def n_series(self) -> int:
        return len(self.series_ids)

    def first_available_row(self) -> int:
        """Index of the first row where every column has a value."""
        ok = ~np.isnan(self.values).any(axis=1)
        idx = np.nonzero(ok)[0]
        if idx.size == 0:
            raise EmptyOverlapError("no month has all series available")
        return int(idx[0])

    def complete(self) -> "Panel":
        """Sub-panel trimmed to the rows where every column is available."""
        start = self.first_available_row()
        return Panel(
            months=self.months[start:],
            series_ids=self.series_ids,
            categories=self.categories,
            values=self.values[start:].copy(),
            fills=self.fills,
            region=self.region,
        )

    def select_categories(self, keep: Iterable[Category]) -> "Panel":
        keep = set(keep)
        cols = [j for j, c in enumerate(self.categories) if c in keep]
        return Panel(
            months=self.months,
            series_ids=tuple(self.series_ids[j] for j in cols),
            categories=tuple(self.categories[j] for j in cols),
            values=self.values[:, cols].copy(),
            fills=tuple(self.fills[j] for j in cols),
            region=self.region,
        )


def difference_transform(series: RawSeries, kind: Transform | str) -> RawSeries:
    """First difference (or log difference) of a raw series.

    Output is one observation shorter; ``transform_applied`` records the kind.
    """
    kind = Transform(kind) if not isinstance(kind, Transform) else kind
    if kind not in (Transform.DIFF, Transform.LOG_DIFF):
        raise ValueError(f"unsupported transform {kind}")
    if len(series) < 2:
        raise TooShortError(f"series {series.series_id!r} needs >= 2 observations to difference")
    x = np.asarray(series.values, dtype=float)
    if kind is Transform.LOG_DIFF:
        if np.any(x <= 0):
            raise NonPositiveForLogError(
                f"series {series.series_id!r} has non-positive values, cannot log-difference"
            )
        y = np.diff(np.log(x))
    else:
        y = np.diff(x)
    return RawSeries(
        series_id=series.series_id,
        region=series.region,
        category=series.category,
        months=series.months[1:],
        values=tuple(float(v) for v in y),
        transform_applied=kind,
    )


def schwert_lag(n: int) -> int:
    """Schwert rule-of-thumb ADF lag: floor(12 * (n/100)^(1/4))."""
    return int(math.floor(12.0 * (n / 100.0) ** 0.25))


def newey_west_lag(n: int) -> int:
    """Standard Newey-West truncation lag: floor(4 * (n/100)^(2/9))."""
    return int(math.floor(4.0 * (n / 100.0) ** (2.0 / 9.0)))


def adf_statistic(
    series: RawSeries | Sequence[float],
    max_lag: int | None = None,
    alpha: float = 0.05,
) -> AdfResult:
    """Augmented Dickey-Fuller t-statistic, constant-only specification.

    Regresses the first difference on a constant, the lagged level, and
    ``max_lag`` lagged differences; the unit root is rejected (series deemed
    stationary) when the t-ratio on the lagged level falls below the
    large-sample critical value for ``alpha``.
    """
    values = np.asarray(
        series.values if isinstance(series, RawSeries) else series, dtype=float
    )
    n = values.size
    lag = schwert_lag(n) if max_lag is None else int(max_lag)
    if lag < 0:
        raise ValueError("max_lag must be >= 0")
    if alpha not in ADF_CRITICAL:
        raise ValueError(f"alpha must be one of {sorted(ADF_CRITICAL)}")
    if n < lag + 10:
        raise TooShortError(f"need >= {lag + 10} observations for ADF with lag {lag}, got {n}")

    dy = np.diff(values)
    # Rows t = lag .. n-2 of dy; regressors: const, y_{t-1}, dy_{t-1..t-lag}
    rows = dy[lag:]
    level = values[lag:-1]
    cols = [np.ones_like(rows), level]
    for i in range(1, lag + 1):
        cols.append(dy[lag - i : dy.size - i])
    X = np.column_stack(cols)
    beta, _, _, _ = np.linalg.lstsq(X, rows, rcond=None)
    resid = rows - X @ beta
    dof = rows.size - X.shape[1]
    if dof <= 0:
        raise TooShortError("not enough observations for ADF degrees of freedom")
    s2 = float(resid @ resid) / dof
    xtx_inv = np.linalg.inv(X.T @ X)
    se_rho = math.sqrt(s2 * xtx_inv[1, 1])
    if se_rho == 0.0:
        raise ZeroVarianceError("degenerate ADF regression")
    stat = float(beta[1] / se_rho)
    crit = ADF_CRITICAL[alpha]
    return AdfResult(statistic=stat, is_stationary=stat < crit, lag=lag, critical_value=crit)


def zscore(
    series: RawSeries,
    mode: str = "full",
    min_window: int = 12,
) -> StandardizedSeries:
    """Standardize a series to zero mean and unit population variance.

    ``mode="full"`` uses whole-sample moments. ``mode="expanding"`` uses only
    observations up to each month, emitting values once ``min_window`` points
    have accumulated, so no future data leaks into any z-score.
    """
    if mode not in ("full", "expanding"):
        raise ValueError(f"zscore mode must be 'full' or 'expanding', got {mode!r}")
    x = np.asarray(series.values, dtype=float)
    if x.size < 2:
        raise TooShortError(f"series {series.series_id!r} needs >= 2 observations to standardize")
    if mode == "full":
        std = float(x.std())
        if std == 0.0:
            raise ZeroVarianceError(f"series {series.series_id!r} is constant")
        z = (x - x.mean()) / std
        months = series.months
    else:
        if min_window < 2:
            raise ValueError("min_window must be >= 2")
        if x.size < min_window:
            raise TooShortError(
                f"series {series.series_id!r} shorter than expanding min_window {min_window}"
            )
        out = []
        for t in range(min_window - 1, x.size):
            window = x[: t + 1]
            std = float(window.std())
            if std == 0.0:
                raise ZeroVarianceError(
                    f"series {series.series_id!r} constant through {series.months[t]}"
                )
            out.append((x[t] - float(window.mean())) / std)
        z = np.asarray(out)
        months = series.months[min_window - 1 :]
    return StandardizedSeries(
        series_id=series.series_id,
        region=series.region,
        category=series.category,
        months=months,
        values=tuple(float(v) for v in z),
        provenance=Provenance(transform=series.transform_applied, zscore_mode=mode),
    )


def newey_west_variance(values: Sequence[float] | np.ndarray, lag: int) -> float:
    """Bartlett-kernel long-run variance estimate.

    gamma_0 + 2 * sum_{k=1..lag} (1 - k/(lag+1)) * gamma_k, with gamma_k the
    lag-k autocovariance using divisor n. Non-negative by construction of the
    Bartlett weights. At lag 0 this reduces to the population variance.
    """
    if lag < 0:
        raise ValueError("lag must be >= 0")
    x = np.asarray(values, dtype=float)
    n = x.size
    if n <= lag:
        raise TooShortError(f"need more than lag={lag} observations, got {n}")
    xc = x - x.mean()
    total = float(xc @ xc) / n
    for k in range(1, lag + 1):
        gamma_k = float(xc[k:] @ xc[:-k]) / n
        total += 2.0 * (1.0 - k / (lag + 1.0)) * gamma_k
    return total


def subsample(values: Sequence[float], stride: int) -> list[float]:
    """Keep indices 0, stride, 2*stride, ..."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return list(values[::stride])


def nw_rescale(
    series: StandardizedSeries,
    lag: int | None = None,
    stride: int = 3,
) -> StandardizedSeries:
    """Rescale a standardized series by its long-run standard deviation.

    The Newey-West variance is estimated on a subsampled copy (default stride
    3, quarterly thinning of monthly data) and each value is divided by its
    square root, downweighting strongly autocorrelated series before PCA.
    The estimator-to-weight mapping is one defensible choice among several;
    both the lag and the stride are config-exposed.
    """
    thinned = subsample(series.values, stride)
    eff_lag = newey_west_lag(len(thinned)) if lag is None else int(lag)
    eff_lag = min(eff_lag, len(thinned) - 1)
    sigma2 = newey_west_variance(thinned, eff_lag)
    if sigma2 <= 0.0:
        raise ZeroVarianceError(f"series {series.series_id!r} has zero long-run variance")
    weight = 1.0 / math.sqrt(sigma2)
    return StandardizedSeries(
        series_id=series.series_id,
        region=series.region,
        category=series.category,
        months=series.months,
        values=tuple(v * weight for v in series.values),
        provenance=replace(series.provenance, nw_lag=eff_lag, subsample_stride=stride),
    )


def ensure_stationary(
    series: RawSeries,
    alpha: float = 0.05,
    max_lag: int | None = None,
    max_rounds: int = 2,
) -> tuple[RawSeries, AdfResult]:
    """Difference a series until the ADF test rejects a unit root.

    Log differences are used when the level series is strictly positive,
    plain differences otherwise. Gives up after ``max_rounds`` transforms and
    returns the last attempt together with its test result.
    """
    current = series
    result = adf_statistic(current, max_lag=max_lag, alpha=alpha)
    rounds = 0
    while not result.is_stationary and rounds < max_rounds:
        kind = (
            Transform.LOG_DIFF
            if all(v > 0 for v in current.values)
            else Transform.DIFF
        )
        current = difference_transform(current, kind)
        result = adf_statistic(current, max_lag=max_lag, alpha=alpha)
        rounds += 1
    return current, result


def standardize_series(
    series: RawSeries,
    stationarity: str = "auto",
    zscore_mode: str = "expanding",
    min_window: int = 12,
    nw_lag: int | None = None,
    subsample_stride: int = 3,
    adf_alpha: float = 0.05,
    adf_max_lag: int | None = None,
) -> StandardizedSeries:
    """Full per-series pipeline: stationarity, Z-score, Newey-West weighting.

    ``stationarity`` is ``"auto"`` (ADF-tested, differenced when needed),
    ``"none"``, ``"diff"`` or ``"log_diff"``.
    """
    if stationarity == "auto":
        series, _ = ensure_stationary(series, alpha=adf_alpha, max_lag=adf_max_lag)
    elif stationarity in ("diff", "log_diff"):
        series = difference_transform(series, Transform(stationarity))
    elif stationarity != "none":
        raise ValueError(f"unknown stationarity mode {stationarity!r}")
    standardized = zscore(series, mode=zscore_mode, min_window=min_window)
    return nw_rescale(standardized, lag=nw_lag, stride=subsample_stride)


def align_panel(
    series: Sequence[StandardizedSeries],
    start: MonthStamp,
    end: MonthStamp,
) -> Panel:
    """Align series onto a contiguous monthly grid over [start, end].

    Interior and trailing gaps are forward-filled from the most recent prior
    observation (never back-filled); months before a series' first observation
    stay NaN, marking the column unavailable there.
    """
    if not series:
        raise EmptyOverlapError("no series to align")
    if end < start:
        raise ValueError("end month before start month")
    n_months = start.months_until(end) + 1
    months = tuple(start.add_months(i) for i in range(n_months))
    values = np.full((n_months, len(series)), np.nan)
    fills = []
    regions = {s.region for s in series}
    for j, s in enumerate(series):
        obs = dict(zip(s.months, s.values))
        if not any(start <= m <= end for m in s.months):
            raise EmptyOverlapError(f"series {s.series_id!r} has no observation in {start}..{end}")
        last = None
        # Seed the carry-forward value from observations before the range.
        for m, v in zip(s.months, s.values):
            if m < start:
                last = v
        fill_count = 0
        for i, m in enumerate(months):
            if m in obs:
                last = obs[m]
                values[i, j] = last
            elif last is not None:
                values[i, j] = last
                fill_count += 1
        fills.append(fill_count)
    return Panel(
        months=months,
        series_ids=tuple(s.series_id for s in series),
        categories=tuple(s.category for s in series),
        values=values,
        fills=tuple(fills),
        region=regions.pop() if len(regions) == 1 else None,
    )
