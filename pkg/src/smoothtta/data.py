"""Dataset ingestion and chronological splitting.

CSV layout follows the usual long-horizon benchmark convention: an optional
leading timestamp column, then one numeric column per channel. Missing or
non-numeric cells are handled by an explicit policy (drop the row or carry
the previous value forward) so ingestion stays deterministic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


class DataError(RuntimeError):
    """Unreadable, malformed, or insufficient data (CLI exit code 3)."""


@dataclass
class Split:
    train_end: int
    val_end: int

    def ranges(self, total: int) -> dict[str, tuple[int, int]]:
        return {
            "train": (0, self.train_end),
            "val": (self.train_end, self.val_end),
            "test": (self.val_end, total),
        }


@dataclass
class Dataset:
    name: str
    values: np.ndarray                  # (T, d)
    channel_names: list[str]
    timestamps: list[str] | None = None
    split: Split | None = None

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[1]

    def part(self, which: str) -> np.ndarray:
        if self.split is None:
            raise DataError("dataset has no split boundaries yet")
        lo, hi = self.split.ranges(self.length)[which]
        return self.values[lo:hi]

    def range_of(self, which: str) -> tuple[int, int]:
        if self.split is None:
            raise DataError("dataset has no split boundaries yet")
        return self.split.ranges(self.length)[which]

    def train_std(self) -> np.ndarray:
        """Per-channel standard deviation of the training split."""
        return self.part("train").std(axis=0)

    def standardized(self) -> "Dataset":
        """Z-score every channel by train-split statistics (floored std)."""
        train = self.part("train")
        mu = train.mean(axis=0)
        sd = np.maximum(train.std(axis=0), 1e-8)
        return Dataset(
            name=self.name,
            values=(self.values - mu) / sd,
            channel_names=self.channel_names,
            timestamps=self.timestamps,
            split=self.split,
        )


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def load_csv(path, policy: str = "drop-row", name: str | None = None) -> Dataset:
    """Parse a channels-in-columns CSV with an optional timestamp column.

    policy handles rows with missing/non-numeric cells: "drop-row" removes
    them with a logged warning, "forward-fill" copies the previous row's
    value (leading gaps are dropped). Rows with the wrong field count are a
    hard parse error carrying the line number.
    """
    if policy not in ("drop-row", "forward-fill"):
        raise DataError(f"unknown missing-value policy {policy!r}")
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = [line for line in lines if line.strip()]
    if not rows:
        raise DataError(f"{path}: empty file")

    first = [cell.strip() for cell in rows[0].split(",")]
    has_header = not all(_is_number(c) or c == "" for c in first[1:]) or (
        first and not _is_number(first[0]) and len(first) == 1
    )
    header = first if has_header else None
    body = rows[1:] if has_header else rows
    if not body:
        raise DataError(f"{path}: no data rows")

    probe = [c.strip() for c in body[0].split(",")]
    has_timestamp = not _is_number(probe[0])
    n_fields = len(probe)
    n_channels = n_fields - (1 if has_timestamp else 0)
    if n_channels < 1:
        raise DataError(f"{path}: no numeric channels found")

    parsed: list[np.ndarray] = []
    stamps: list[str] = []
    dropped = 0
    for offset, line in enumerate(body):
        lineno = offset + (2 if has_header else 1)
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != n_fields:
            raise DataError(
                f"{path}:{lineno}: expected {n_fields} fields, found {len(cells)}"
            )
        data_cells = cells[1:] if has_timestamp else cells
        row = np.full(n_channels, np.nan)
        for j, cell in enumerate(data_cells):
            if cell and _is_number(cell):
                row[j] = float(cell)
        if np.isnan(row).any():
            if policy == "drop-row":
                dropped += 1
                logger.warning("%s:%d: dropping row with missing values", path, lineno)
                continue
            if not parsed:
                dropped += 1
                logger.warning("%s:%d: dropping leading row, nothing to fill from", path, lineno)
                continue
            gaps = np.isnan(row)
            row[gaps] = parsed[-1][gaps]
        parsed.append(row)
        if has_timestamp:
            stamps.append(cells[0])
    if not parsed:
        raise DataError(f"{path}: every row was dropped")
    names = (
        header[1:] if (header and has_timestamp) else header
    ) or [f"ch{j}" for j in range(n_channels)]
    return Dataset(
        name=name or str(path),
        values=np.array(parsed),
        channel_names=list(names),
        timestamps=stamps if has_timestamp else None,
    )


SPLIT_PRESETS = {
    # 12/4/4-month style chronological proportions
    "ett": (0.6, 0.2, 0.2),
    "standard": (0.7, 0.1, 0.2),
}


def split_dataset(
    dataset: Dataset,
    ratios: tuple[float, float, float] | str = "standard",
    min_span: int = 0,
) -> Dataset:
    """Attach chronological train/val/test boundaries.

    min_span guards each split against being too short to hold a single
    lookback + horizon window.
    """
    if isinstance(ratios, str):
        try:
            ratios = SPLIT_PRESETS[ratios]
        except KeyError:
            raise DataError(f"unknown split preset {ratios!r}") from None
    if any(r <= 0 for r in ratios) or sum(ratios) > 1.0 + 1e-9:
        raise DataError(f"split ratios must be positive and sum to <= 1, got {ratios}")
    T = dataset.length
    train_end = int(T * ratios[0])
    val_end = train_end + int(T * ratios[1])
    test_end = T
    spans = (train_end, val_end - train_end, test_end - val_end)
    if min_span and min(spans) < min_span:
        raise DataError(
            f"split spans {spans} too small for a window of {min_span} points"
        )
    dataset.split = Split(train_end=train_end, val_end=val_end)
    return dataset
