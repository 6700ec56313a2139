"""Composite growth/inflation indices: first principal component of a
standardized panel, re-estimated on an expanding window.

The eigenvector is found by power iteration on the sample covariance matrix
(tolerance 1e-12, at most 10000 iterations) — dependency-free and adequate for
panels of up to a few hundred series. PCA leaves the component sign
ambiguous, so loadings are normalized against a designated reference column.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dataset import MonthStamp, Region
from .errors import (
    DegenerateCovarianceError,
    InsufficientHistoryError,
    PanelTooShortError,
    ZeroReferenceLoadingError,
)
from .preprocess import Panel

__all__ = [
    "IndexKind",
    "PcaResult",
    "CompositeIndex",
    "pca_first_component",
    "sign_normalize",
    "expanding_pca_index",
]

POWER_ITERATION_TOL = 1e-12
POWER_ITERATION_MAX_STEPS = 10_000


class IndexKind(Enum):
    GROWTH = "growth"
    INFLATION = "inflation"


@dataclass(frozen=True)
class PcaResult:
    """First principal component: unit loadings, per-month scores, and the
    share of total variance it explains."""

    loadings: np.ndarray
    scores: np.ndarray
    explained_variance_ratio: float


@dataclass(frozen=True)
class CompositeIndex:
    """Monthly composite index emitted once the expanding window is filled."""

    kind: IndexKind
    months: tuple[MonthStamp, ...]
    values: tuple[float, ...]
    min_window_months: int
    region: Region | None = None

    def __len__(self) -> int:
        return len(self.months)

    def value_at(self, month: MonthStamp) -> float:
        try:
            return self.values[self.months.index(month)]
        except ValueError:
            raise KeyError(str(month)) from None

    def window_ending_at(self, month: MonthStamp, window: int) -> tuple[float, ...]:
        """The last ``window`` values ending at ``month`` (inclusive)."""
        try:
            pos = self.months.index(month)
        except ValueError:
            raise InsufficientHistoryError(f"index has no value at {month}") from None
        if pos + 1 < window:
            raise InsufficientHistoryError(
                f"index has only {pos + 1} values through {month}, window {window} requested"
            )
        return self.values[pos + 1 - window : pos + 1]


def _top_eigenvector(cov: np.ndarray) -> tuple[np.ndarray, float]:
    """Power iteration for the dominant eigenpair of a PSD matrix.

    Tries deterministic starts first; a start lying in the nullspace (or
    orthogonal to the dominant eigenvector) is abandoned for the next one.
    """
    d = cov.shape[0]
    starts = [np.ones(d), np.eye(d)[0], np.random.default_rng(0).standard_normal(d)]
    for start in starts:
        v = start / np.linalg.norm(start)
        converged = False
        for _ in range(POWER_ITERATION_MAX_STEPS):
            w = cov @ v
            norm = np.linalg.norm(w)
            if norm <= POWER_ITERATION_TOL:
                break  # start vector is in the nullspace
            w /= norm
            if w @ v < 0:
                w = -w
            if np.linalg.norm(w - v) < POWER_ITERATION_TOL:
                v = w
                converged = True
                break
            v = w
        if converged:
            eigenvalue = float(v @ cov @ v)
            return v, eigenvalue
    # Max iterations without meeting the tolerance: return the best iterate.
    eigenvalue = float(v @ cov @ v)
    return v, eigenvalue


def pca_first_component(panel: np.ndarray) -> PcaResult:
    """First principal component of a months-by-series matrix.

    Columns are centered internally; loadings are the unit eigenvector of the
    (divisor n) covariance matrix with the largest eigenvalue and scores are
    the centered panel projected onto them.
    """
    X = np.asarray(panel, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 2:
        raise PanelTooShortError("PCA needs at least 2 months")
    if X.shape[1] < 1:
        raise ValueError("PCA needs at least 1 series")
    if np.isnan(X).any():
        raise ValueError("panel has unavailable cells; align and trim it first")
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / X.shape[0]
    trace = float(np.trace(cov))
    if trace <= 0.0:
        raise DegenerateCovarianceError("panel carries no variance")
    loadings, eigenvalue = _top_eigenvector(cov)
    scores = centered @ loadings
    return PcaResult(
        loadings=loadings,
        scores=scores,
        explained_variance_ratio=min(max(eigenvalue / trace, 0.0), 1.0),
    )


def sign_normalize(result: PcaResult, reference_column: int) -> PcaResult:
    """Flip the component, if needed, so the reference loading is positive."""
    loading = result.loadings[reference_column]
    if abs(loading) < 1e-12:
        raise ZeroReferenceLoadingError(
            f"reference column {reference_column} has a zero loading"
        )
    if loading > 0:
        return result
    return PcaResult(
        loadings=-result.loadings,
        scores=-result.scores,
        explained_variance_ratio=result.explained_variance_ratio,
    )


def expanding_pca_index(
    panel: Panel,
    kind: IndexKind | str,
    min_window_months: int = 60,
    reference_series: str | None = None,
) -> CompositeIndex:
    """Composite index re-estimating the first PC each month.

    The value at month t is the last score of a PCA fitted on all panel rows
    through t, so the index is causal: appending later months never changes
    an already-emitted value. Nothing is emitted before ``min_window_months``
    rows have accumulated.
    """
    kind = IndexKind(kind) if not isinstance(kind, IndexKind) else kind
    if min_window_months < 2:
        raise ValueError("min_window_months must be >= 2")
    values = panel.values
    if np.isnan(values).any():
        raise ValueError("panel has unavailable cells; call Panel.complete() first")
    n = values.shape[0]
    if n < min_window_months:
        raise PanelTooShortError(
            f"panel has {n} months, expanding index needs >= {min_window_months}"
        )
    if reference_series is None:
        ref_col = 0
    else:
        try:
            ref_col = panel.series_ids.index(reference_series)
        except ValueError:
            raise ValueError(f"reference series {reference_series!r} not in panel") from None
    out = []
    for t in range(min_window_months, n + 1):
        result = sign_normalize(pca_first_component(values[:t]), ref_col)
        out.append(float(result.scores[-1]))
    return CompositeIndex(
        kind=kind,
        months=panel.months[min_window_months - 1 :],
        values=tuple(out),
        min_window_months=min_window_months,
        region=panel.region,
    )
