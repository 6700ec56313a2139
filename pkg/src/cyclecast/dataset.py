"""Labeled monthly datasets: domain types, CSV loading, and chronological splits.

Phase labels use the integer encoding 1=recovery, 2=expansion, 3=slowdown,
4=recession. Label files are CSV with a ``year,month,phase`` header; series
files are CSV with a ``year,month,value`` header. Months inside a dataset must
be contiguous: gaps are data errors, never silently filled.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum, IntEnum
from pathlib import Path
from typing import Iterator

from .errors import (
    BoundaryOutsideDatasetError,
    InvalidPhaseCodeError,
    MalformedRowError,
    NonContiguousMonthsError,
)

__all__ = [
    "MonthStamp",
    "PhaseLabel",
    "Region",
    "Category",
    "Transform",
    "RawSeries",
    "LabeledDataset",
    "SplitSpec",
    "DatasetSplit",
    "load_labels",
    "write_labels",
    "load_series_csv",
    "split_dataset",
    "phase_counts",
]


@dataclass(frozen=True, order=True)
class MonthStamp:
    """One Gregorian calendar month, totally ordered by (year, month)."""

    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month {self.month} not in 1..12")

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"

    @classmethod
    def parse(cls, text: str) -> "MonthStamp":
        """Parse ``YYYY-MM``."""
        try:
            year_s, month_s = text.strip().split("-")
            return cls(int(year_s), int(month_s))
        except (ValueError, TypeError) as exc:
            raise ValueError(f"cannot parse month stamp {text!r}, expected YYYY-MM") from exc

    def next(self) -> "MonthStamp":
        if self.month == 12:
            return MonthStamp(self.year + 1, 1)
        return MonthStamp(self.year, self.month + 1)

    def add_months(self, n: int) -> "MonthStamp":
        total = self.year * 12 + (self.month - 1) + n
        return MonthStamp(total // 12, total % 12 + 1)

    def months_until(self, other: "MonthStamp") -> int:
        """Signed month count from self to other (0 for the same month)."""
        return (other.year - self.year) * 12 + (other.month - self.month)


class PhaseLabel(IntEnum):
    """Business-cycle phase with its integer wire encoding."""

    RECOVERY = 1
    EXPANSION = 2
    SLOWDOWN = 3
    RECESSION = 4


class Region(Enum):
    US = "us"
    EZ = "ez"


class Category(Enum):
    GROWTH = "growth"
    INFLATION = "inflation"
    COMMODITY = "commodity"
    STOCK_INDEX = "stock_index"
    RATES = "rates"
    OTHER = "other"


class Transform(Enum):
    NONE = "none"
    DIFF = "diff"
    LOG_DIFF = "log_diff"


def _check_strictly_increasing(months: tuple[MonthStamp, ...], what: str) -> None:
    for prev, cur in zip(months, months[1:]):
        if cur <= prev:
            raise ValueError(f"{what} months not strictly increasing at {cur}")


@dataclass(frozen=True)
class RawSeries:
    """One named monthly macroeconomic series in native units.

    ``months`` and ``values`` are parallel tuples; months must be strictly
    increasing (gaps are allowed here and handled downstream by the panel
    aligner). An empty series is legal for export but rejected by every
    numeric operation that needs history.
    """

    series_id: str
    region: Region
    category: Category
    months: tuple[MonthStamp, ...]
    values: tuple[float, ...]
    transform_applied: Transform = Transform.NONE

    def __post_init__(self):
        if len(self.months) != len(self.values):
            raise ValueError("months and values length mismatch")
        _check_strictly_increasing(self.months, f"series {self.series_id!r}")
        for v in self.values:
            if not math.isfinite(v):
                raise ValueError(f"series {self.series_id!r} has a non-finite value")

    def __len__(self) -> int:
        return len(self.months)

    def observations(self) -> Iterator[tuple[MonthStamp, float]]:
        return zip(self.months, self.values)

    def value_at(self, month: MonthStamp) -> float:
        try:
            return self.values[self.months.index(month)]
        except ValueError:
            raise KeyError(str(month)) from None


@dataclass(frozen=True)
class LabeledDataset:
    """Contiguous ordered months, each annotated with one phase label."""

    months: tuple[MonthStamp, ...]
    labels: tuple[PhaseLabel, ...]
    region: Region | None = None

    def __post_init__(self):
        if len(self.months) != len(self.labels):
            raise ValueError("months and labels length mismatch")
        for prev, cur in zip(self.months, self.months[1:]):
            expected = prev.next()
            if cur != expected:
                raise NonContiguousMonthsError(expected)

    def __len__(self) -> int:
        return len(self.months)

    def label_at(self, month: MonthStamp) -> PhaseLabel:
        try:
            return self.labels[self.months.index(month)]
        except ValueError:
            raise KeyError(str(month)) from None

    def view(self, start: MonthStamp, end: MonthStamp) -> "LabeledDataset":
        """Sub-dataset covering months in [start, end]."""
        keep = [i for i, m in enumerate(self.months) if start <= m <= end]
        return LabeledDataset(
            months=tuple(self.months[i] for i in keep),
            labels=tuple(self.labels[i] for i in keep),
            region=self.region,
        )


@dataclass(frozen=True)
class SplitSpec:
    """Inclusive month-end boundaries of the train/validation/test split."""

    train_end: MonthStamp
    validation_end: MonthStamp
    test_end: MonthStamp

    def __post_init__(self):
        if not self.train_end < self.validation_end < self.test_end:
            raise ValueError("split boundaries must satisfy train_end < validation_end < test_end")


@dataclass(frozen=True)
class DatasetSplit:
    train: LabeledDataset
    validation: LabeledDataset
    test: LabeledDataset


def load_labels(path: str | Path, region: Region | None = None) -> LabeledDataset:
    """Read a ``year,month,phase`` CSV into a :class:`LabeledDataset`.

    Rejects missing files, malformed rows, phase codes outside 1..4, and any
    gap in the month sequence.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    months: list[MonthStamp] = []
    labels: list[PhaseLabel] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRowError(1, "empty file, expected header year,month,phase") from None
        if [h.strip().lower() for h in header] != ["year", "month", "phase"]:
            raise MalformedRowError(1, f"bad header {header!r}, expected year,month,phase")
        for line_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise MalformedRowError(line_number, f"expected 3 fields, got {len(row)}")
            try:
                year, month, phase = (int(f) for f in row)
            except ValueError:
                raise MalformedRowError(line_number, f"non-integer field in {row!r}") from None
            try:
                stamp = MonthStamp(year, month)
            except ValueError as exc:
                raise MalformedRowError(line_number, str(exc)) from None
            if phase not in (1, 2, 3, 4):
                raise InvalidPhaseCodeError(phase)
            if months and stamp != months[-1].next():
                raise NonContiguousMonthsError(months[-1].next())
            months.append(stamp)
            labels.append(PhaseLabel(phase))
    return LabeledDataset(months=tuple(months), labels=tuple(labels), region=region)


def write_labels(ds: LabeledDataset, path: str | Path) -> None:
    """Write ``year,month,phase`` CSV: LF line endings, no trailing blank line."""
    lines = ["year,month,phase"]
    lines.extend(f"{m.year},{m.month},{int(l)}" for m, l in zip(ds.months, ds.labels))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def load_series_csv(
    path: str | Path,
    series_id: str,
    region: Region,
    category: Category,
    transform_applied: Transform = Transform.NONE,
) -> RawSeries:
    """Read a ``year,month,value`` CSV into a :class:`RawSeries`."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    months: list[MonthStamp] = []
    values: list[float] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRowError(1, "empty file, expected header year,month,value") from None
        if [h.strip().lower() for h in header] != ["year", "month", "value"]:
            raise MalformedRowError(1, f"bad header {header!r}, expected year,month,value")
        for line_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise MalformedRowError(line_number, f"expected 3 fields, got {len(row)}")
            try:
                months.append(MonthStamp(int(row[0]), int(row[1])))
                values.append(float(row[2]))
            except ValueError as exc:
                raise MalformedRowError(line_number, f"{row!r}: {exc}") from None
    return RawSeries(
        series_id=series_id,
        region=region,
        category=category,
        months=tuple(months),
        values=tuple(values),
        transform_applied=transform_applied,
    )


def split_dataset(ds: LabeledDataset, spec: SplitSpec) -> DatasetSplit:
    """Partition by inclusive month-end boundaries.

    Month m lands in train iff m <= train_end, in validation iff
    train_end < m <= validation_end, in test iff validation_end < m <= test_end.
    All three boundaries must lie inside the dataset's month range.
    """
    if not ds.months:
        raise BoundaryOutsideDatasetError("cannot split an empty dataset")
    first, last = ds.months[0], ds.months[-1]
    for name, boundary in (
        ("train_end", spec.train_end),
        ("validation_end", spec.validation_end),
        ("test_end", spec.test_end),
    ):
        if not first <= boundary <= last:
            raise BoundaryOutsideDatasetError(
                f"{name} {boundary} outside dataset range {first}..{last}"
            )
    return DatasetSplit(
        train=ds.view(first, spec.train_end),
        validation=ds.view(spec.train_end.next(), spec.validation_end),
        test=ds.view(spec.validation_end.next(), spec.test_end),
    )


def phase_counts(ds: LabeledDataset) -> dict[PhaseLabel, int]:
    """Per-phase sample counts; every phase key is present, zeros included."""
    counts = {phase: 0 for phase in PhaseLabel}
    for label in ds.labels:
        counts[label] += 1
    return counts
