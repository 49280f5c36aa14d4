"""Price ingestion, return files and run configurations."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .simulate import ROLE_TICK, rng_for


class InputError(ValueError):
    """Malformed input file; ``errors`` lists every problem found with its line number."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass
class PriceSeries:
    timestamps: np.ndarray
    close: np.ndarray
    tick_size: float
    asset_id: str = ""


def _parse_time(text: str):
    try:
        return float(text)
    except ValueError:
        return np.datetime64(text.strip())


def read_prices(source, tick_size: float, asset_id: str = "") -> PriceSeries:
    """Two-column ``timestamp,close`` CSV; a non-numeric first row is taken as a header.

    Timestamps may be numbers or ISO dates and must increase strictly; closes must be
    positive.
    """
    if not tick_size > 0:
        raise ValueError("tick_size must be positive")
    text = Path(source).read_text() if isinstance(source, (str, Path)) else source.read()
    errors, times, closes = [], [], []
    first = True
    for lineno, row in enumerate(csv.reader(text.splitlines()), start=1):
        if not row or row[0].startswith("#"):
            continue
        is_first, first = first, False
        if len(row) != 2:
            errors.append(f"line {lineno}: expected 2 columns, got {len(row)}")
            continue
        try:
            price = float(row[1])
            stamp = _parse_time(row[0])
        except ValueError:
            if is_first:
                continue  # header
            errors.append(f"line {lineno}: cannot parse {row!r}")
            continue
        if not (math.isfinite(price) and price > 0):
            errors.append(f"line {lineno}: non-positive price {row[1]!r}")
        if times and not stamp > times[-1][1]:
            errors.append(f"line {lineno}: timestamp {row[0]!r} does not increase")
        times.append((lineno, stamp))
        closes.append(price)
    if len(closes) < 2 and not errors:
        errors.append("need at least two prices")
    if errors:
        raise InputError(errors)
    stamps = np.array([t for _, t in times])
    return PriceSeries(stamps, np.asarray(closes), tick_size, asset_id)


def tick_adjust(close, tick_size: float, seed: int) -> np.ndarray:
    """Move a price one tick up or down (fair coin) whenever it equals the previous
    adjusted price, so that no log-return is exactly zero."""
    prices = np.asarray(close, dtype=float).copy()
    rng = rng_for(seed, 0, ROLE_TICK)
    for i in range(1, prices.size):
        if prices[i] == prices[i - 1]:
            step = tick_size if rng.random() < 0.5 else -tick_size
            prices[i] = prices[i] + step
            if prices[i] <= 0:
                prices[i] = prices[i - 1] + tick_size
    return prices


def ingest_prices(source, tick_size: float, seed: int) -> np.ndarray:
    """Log-returns of a price CSV after the tick rule."""
    series = read_prices(source, tick_size)
    return np.diff(np.log(tick_adjust(series.close, tick_size, seed)))


def read_returns(source, column: int = 0) -> tuple[np.ndarray, dict]:
    """One column of a numeric CSV (``#`` metadata line and header row optional)."""
    text = Path(source).read_text() if isinstance(source, (str, Path)) else source.read()
    lines = text.splitlines()
    meta = {}
    if lines and lines[0].startswith("#"):
        meta = json.loads(lines[0][1:])
        lines = lines[1:]
    values, errors = [], []
    for lineno, row in enumerate(csv.reader(lines), start=2 if meta else 1):
        if not row:
            continue
        try:
            values.append(float(row[column]))
        except (ValueError, IndexError):
            if lineno == (2 if meta else 1):
                continue  # header
            errors.append(f"line {lineno}: cannot read column {column} from {row!r}")
    if errors:
        raise InputError(errors)
    return np.asarray(values), meta


@dataclass
class RunConfig:
    """Fully resolved command configuration; serialized into every output."""

    command: str
    seed: int | None = None
    params: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls(**json.loads(text))
