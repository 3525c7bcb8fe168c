"""CSV ingestion/emission and the synthetic location generator.

Numbers are written with 12 significant digits, booleans as ``true``/``false``;
parsing an emitted file and writing it back reproduces it byte for byte.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import AccessAllocError, ValidationError
from .model import LocationProfile

SYNTH_RNG_ALGORITHM = "PCG64"
COMPONENT_COLUMNS = ("beta_low", "beta_moderate", "beta_high", "beta_very_high")


class DataError(AccessAllocError):
    """Malformed input file; message carries row/column context."""


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if value == 0.0:
            return "0"
        return format(value, ".12g")
    return str(value)


def parse_value(text: str):
    """Inverse of :func:`fmt` for the value types it emits."""
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def render_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path: Path | str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    Path(path).write_text(render_csv(header, rows), encoding="utf-8")


def read_table(path: Path | str) -> tuple[list[str], list[dict[str, str]]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: cannot read ({exc.strerror})") from exc
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in reader.fieldnames]
    rows = []
    for line_no, raw in enumerate(reader, start=2):
        if None in raw or any(v is None for v in raw.values()):
            raise DataError(f"{path}: row {line_no}: wrong number of fields")
        rows.append({k.strip(): v.strip() for k, v in raw.items()})
    return header, rows


def _number(path, line_no, column, text, kind=float):
    try:
        value = kind(text)
    except ValueError:
        raise DataError(f"{path}: row {line_no}, column {column!r}: not a number: {text!r}") from None
    if kind is float and not math.isfinite(value):
        raise DataError(f"{path}: row {line_no}, column {column!r}: not finite")
    return value


def compose_beta(moderate: float, high: float, very_high: float) -> float:
    """Disadvantaged share from vulnerability categories; very high counts half."""
    return min(1.0, max(0.0, moderate + high + 0.5 * very_high))


def read_locations(path: Path | str) -> list[LocationProfile]:
    """Parse ``id,population,beta``; ``beta`` may instead be composed from
    ``beta_moderate``, ``beta_high`` and ``beta_very_high`` when left blank."""
    header, rows = read_table(path)
    for column in ("id", "population"):
        if column not in header:
            raise DataError(f"{path}: missing column {column!r}")
    has_components = all(c in header for c in COMPONENT_COLUMNS[1:])
    if "beta" not in header and not has_components:
        raise DataError(f"{path}: need a 'beta' column or the beta_* component columns")
    if not rows:
        raise DataError(f"{path}: no data rows")

    locations = []
    seen: set[str] = set()
    for line_no, row in enumerate(rows, start=2):
        loc_id = row["id"]
        if not loc_id:
            raise DataError(f"{path}: row {line_no}, column 'id': empty")
        if loc_id in seen:
            raise DataError(f"{path}: row {line_no}, column 'id': duplicate id {loc_id!r}")
        seen.add(loc_id)
        population = _number(path, line_no, "population", row["population"], float)
        if population != int(population) or population < 1:
            raise DataError(f"{path}: row {line_no}, column 'population': must be a positive integer")
        if row.get("beta", ""):
            beta = _number(path, line_no, "beta", row["beta"])
        elif has_components:
            parts = [_number(path, line_no, c, row[c] or "0") for c in COMPONENT_COLUMNS[1:]]
            beta = compose_beta(*parts)
        else:
            raise DataError(f"{path}: row {line_no}, column 'beta': empty")
        if not (0.0 <= beta <= 1.0):
            raise DataError(f"{path}: row {line_no}, column 'beta': {beta} outside [0, 1]")
        try:
            locations.append(LocationProfile(loc_id, int(population), beta))
        except ValidationError as exc:
            raise DataError(f"{path}: row {line_no}: {exc}") from None
    return locations


def write_locations(path: Path | str, locations: Sequence[LocationProfile]) -> None:
    write_csv(path, ("id", "population", "beta"), ((l.id, l.population, l.beta) for l in locations))


def read_observations(path: Path | str) -> list[tuple[float, float, float]]:
    """``beta,y[,weight]`` rows for smoothing."""
    header, rows = read_table(path)
    for column in ("beta", "y"):
        if column not in header:
            raise DataError(f"{path}: missing column {column!r}")
    if not rows:
        raise DataError(f"{path}: no data rows")
    out = []
    for line_no, row in enumerate(rows, start=2):
        beta = _number(path, line_no, "beta", row["beta"])
        y = _number(path, line_no, "y", row["y"])
        weight = _number(path, line_no, "weight", row["weight"]) if row.get("weight") else 1.0
        if weight < 0:
            raise DataError(f"{path}: row {line_no}, column 'weight': negative")
        out.append((beta, y, weight))
    return out


def synthesize_locations(k: int, seed: int, profile: str = "uniform") -> list[LocationProfile]:
    """Random locations for experiments.

    Populations are log-uniform on [1e3, 1e6].  ``uniform`` draws beta from
    U(0, 1); ``clustered`` assigns each location to a low-vulnerability
    cluster (Beta(4, 12), mean 0.25) or a high one (Beta(12, 5), mean ~0.71)
    with equal probability.  The generator is PCG64 seeded with ``seed``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    populations = np.rint(np.exp(rng.uniform(math.log(1e3), math.log(1e6), size=k))).astype(int)
    if profile == "uniform":
        betas = rng.uniform(0.0, 1.0, size=k)
    elif profile == "clustered":
        high = rng.random(k) < 0.5
        betas = np.where(high, rng.beta(12.0, 5.0, size=k), rng.beta(4.0, 12.0, size=k))
    else:
        raise ValueError(f"unknown profile {profile!r}")
    # Round to the emitted precision so files and in-memory scenarios agree.
    betas = np.array([float(fmt(float(b))) for b in betas])
    width = len(str(k))
    return [LocationProfile(f"loc{j + 1:0{width}d}", int(P), float(b)) for j, (P, b) in enumerate(zip(populations, betas))]
