import numpy as np
import pytest

from cyclecast.dataset import Category, MonthStamp, RawSeries, Region
from cyclecast.preprocess import Panel, Provenance, StandardizedSeries


def month_range(start: MonthStamp, n: int) -> tuple[MonthStamp, ...]:
    return tuple(start.add_months(i) for i in range(n))


def make_series(
    values,
    series_id: str = "s",
    start: MonthStamp = MonthStamp(2000, 1),
    region: Region = Region.US,
    category: Category = Category.GROWTH,
) -> RawSeries:
    values = tuple(float(v) for v in values)
    return RawSeries(
        series_id=series_id,
        region=region,
        category=category,
        months=month_range(start, len(values)),
        values=values,
    )


def make_std(
    values,
    series_id: str = "s",
    start: MonthStamp = MonthStamp(2000, 1),
    category: Category = Category.GROWTH,
) -> StandardizedSeries:
    values = tuple(float(v) for v in values)
    return StandardizedSeries(
        series_id=series_id,
        region=Region.US,
        category=category,
        months=month_range(start, len(values)),
        values=values,
        provenance=Provenance(),
    )


def make_panel(
    columns: dict[str, list[float]],
    categories: dict[str, Category] | None = None,
    start: MonthStamp = MonthStamp(2000, 1),
) -> Panel:
    ids = tuple(columns)
    n = len(next(iter(columns.values())))
    cats = categories or {}
    return Panel(
        months=month_range(start, n),
        series_ids=ids,
        categories=tuple(cats.get(i, Category.GROWTH) for i in ids),
        values=np.column_stack([np.asarray(columns[i], dtype=float) for i in ids]),
        fills=tuple(0 for _ in ids),
        region=Region.US,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
