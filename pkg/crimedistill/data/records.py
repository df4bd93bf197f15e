import logging
from collections import defaultdict
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..errors import DataError, InvalidRecordError, SchemaError
from .types import SLOT_HOURS, DataConfig, EventClass, EventRecord, SpotKey, SpotSequence, Vocabulary

_LOG = logging.getLogger("crimedistill.data")

REQUIRED_FIELDS = ("precinct", "premises", "timestamp", "category")
DEFAULT_TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M"


def slot_of_timestamp(ts: Union[datetime, pd.Timestamp, str], fmt: Optional[str] = None) -> int:
    if isinstance(ts, str):
        try:
            ts = datetime.strptime(ts.strip(), fmt) if fmt else pd.Timestamp(ts.strip()).to_pydatetime()
        except (ValueError, TypeError) as exc:
            raise InvalidRecordError(f"unparseable timestamp {ts!r}") from exc
    if ts is None or pd.isna(ts):
        raise InvalidRecordError("missing timestamp")
    return ts.hour // SLOT_HOURS


def event_class_of(record: EventRecord) -> EventClass:
    return EventClass(slot=slot_of_timestamp(record.timestamp), category=record.category)


def _resolve_columns(frame: pd.DataFrame, mapping: Dict[str, object]) -> Dict[str, List[str]]:
    missing_fields = [name for name in REQUIRED_FIELDS if name not in mapping]
    if missing_fields:
        raise SchemaError(f"column mapping lacks fields: {', '.join(missing_fields)}")

    resolved: Dict[str, List[str]] = {}
    for name in REQUIRED_FIELDS:
        source = mapping[name]
        columns = [source] if isinstance(source, str) else [str(col) for col in source]  # type: ignore[union-attr]
        absent = [col for col in columns if col not in frame.columns]
        if absent:
            raise SchemaError(
                f"field {name!r} maps to missing column(s) {absent}; header has {list(frame.columns)}"
            )
        resolved[name] = columns
    return resolved


def _joined(frame: pd.DataFrame, columns: List[str]) -> pd.Series:
    joined = frame[columns[0]].astype(str).str.strip()
    for col in columns[1:]:
        joined = joined + " " + frame[col].astype(str).str.strip()
    return joined


def read_records(path: Union[str, Path], config: Optional[DataConfig] = None) -> List[EventRecord]:
    """Load raw events from delimited text, dropping rows that fail validation."""
    config = config or DataConfig()
    try:
        frame = pd.read_csv(path, sep=config.delimiter, dtype=str, keep_default_na=False)
    except FileNotFoundError as exc:
        raise DataError(f"raw file not found: {path}") from exc
    except pd.errors.ParserError as exc:
        raise DataError(f"could not parse {path}: {exc}") from exc

    columns = _resolve_columns(frame, config.columns)
    fields = {name: _joined(frame, cols) for name, cols in columns.items()}
    timestamps = pd.to_datetime(fields["timestamp"], format=config.timestamp_format, errors="coerce")

    valid = timestamps.notna()
    for name in ("precinct", "premises", "category"):
        valid &= fields[name].str.len() > 0

    rejected = int((~valid).sum())
    if rejected:
        for row in np.flatnonzero(~valid.to_numpy())[:20]:
            _LOG.debug(
                "Rejected row %d: precinct=%r premises=%r timestamp=%r category=%r",
                row + 2,
                fields["precinct"].iat[row],
                fields["premises"].iat[row],
                fields["timestamp"].iat[row],
                fields["category"].iat[row],
            )
        _LOG.warning("Rejected %d of %d rows from %s (bad timestamp or empty field)", rejected, len(frame), path)

    keep = valid.to_numpy()
    records = [
        EventRecord(precinct=p, premises=s, timestamp=ts.to_pydatetime(), category=c)
        for p, s, ts, c in zip(
            fields["precinct"][keep],
            fields["premises"][keep],
            timestamps[keep],
            fields["category"][keep],
        )
    ]
    _LOG.info("Loaded %d records from %s", len(records), path)
    return records


def write_records(records: Iterable[EventRecord], path: Union[str, Path], delimiter: str = ",") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        [
            {
                "precinct": rec.precinct,
                "premises": rec.premises,
                "timestamp": rec.timestamp.strftime(DEFAULT_TIMESTAMP_FORMAT),
                "category": rec.category,
            }
            for rec in records
        ],
        columns=list(REQUIRED_FIELDS),
    )
    frame.to_csv(path, sep=delimiter, index=False, lineterminator="\n")
    return path


def build_vocabulary(records: Sequence[EventRecord]) -> Vocabulary:
    if not records:
        raise DataError("cannot build a vocabulary from zero records")
    classes = sorted({event_class_of(rec) for rec in records})
    return Vocabulary(classes=classes)


def group_by_spot(records: Sequence[EventRecord], vocab: Vocabulary) -> Dict[SpotKey, List[int]]:
    """Chronological class ids per spot; timestamp ties keep input order."""
    grouped: Dict[SpotKey, List[EventRecord]] = defaultdict(list)
    for rec in records:
        grouped[rec.spot_key].append(rec)

    sequences: Dict[SpotKey, List[int]] = {}
    for key in sorted(grouped):
        ordered = sorted(grouped[key], key=lambda rec: rec.timestamp)  # stable
        sequences[key] = [vocab.id_of(event_class_of(rec)) for rec in ordered]
    return sequences


def _thin(events: List[int], drop_rate: float, rng: np.random.Generator) -> List[int]:
    keep = int(round(len(events) * (1.0 - drop_rate)))
    chosen = np.sort(rng.choice(len(events), size=keep, replace=False))
    return [events[idx] for idx in chosen]


def build_sequences(
    records: Sequence[EventRecord],
    vocab: Vocabulary,
    min_events: int = 5,
    drop_rate: float = 0.0,
    seed: int = 0,
) -> List[SpotSequence]:
    if not 0.0 <= drop_rate < 1.0:
        raise DataError(f"drop_rate must lie in [0, 1), got {drop_rate}")

    grouped = group_by_spot(records, vocab)
    seeds = np.random.SeedSequence(seed).spawn(len(grouped)) if drop_rate > 0 else None

    sequences: List[SpotSequence] = []
    dropped = 0
    for idx, (key, events) in enumerate(grouped.items()):
        if seeds is not None:
            events = _thin(events, drop_rate, np.random.default_rng(seeds[idx]))
        if len(events) < min_events:
            dropped += 1
            continue
        sequences.append(SpotSequence(spot_key=key, events=events))

    if dropped:
        _LOG.info("Dropped %d spots with fewer than %d events", dropped, min_events)
    return sequences


def _per_spot_summary(per_spot: np.ndarray) -> dict:
    if not per_spot.size:
        return {"max_per_spot": 0, "min_per_spot": 0, "avg_per_spot": 0.0, "std_per_spot": 0.0}
    return {
        "max_per_spot": int(per_spot.max()),
        "min_per_spot": int(per_spot.min()),
        "avg_per_spot": round(float(per_spot.mean()), 2),
        "std_per_spot": round(float(per_spot.std()), 2),
    }


def dataset_statistics(
    records: Sequence[EventRecord],
    vocab: Vocabulary,
    retained_spots: int,
    sequences: Optional[Sequence[SpotSequence]] = None,
) -> dict:
    """Per-spot record counts in the layout of a dataset statistics table.

    Given the built `sequences`, the counts after the minimum-length filter and
    `drop_rate` thinning are reported under `trained`.
    """
    counts: Dict[SpotKey, int] = defaultdict(int)
    for rec in records:
        counts[rec.spot_key] += 1
    stats = {
        "spots": len(counts),
        "records": len(records),
        **_per_spot_summary(np.asarray(list(counts.values()), dtype=np.float64)),
        "event_classes": vocab.size,
        "retained_spots": retained_spots,
    }
    if sequences is not None:
        lengths = np.asarray([len(seq) for seq in sequences], dtype=np.float64)
        stats["trained"] = {"spots": len(sequences), "records": int(lengths.sum()), **_per_spot_summary(lengths)}
    return stats


def format_statistics(stats: dict) -> str:
    line = (
        f"{stats['spots']:,} spots / {stats['records']:,} records / {stats['event_classes']:,} classes "
        f"(per spot max {stats['max_per_spot']}, min {stats['min_per_spot']}, "
        f"avg {stats['avg_per_spot']:.2f}, std {stats['std_per_spot']:.2f}; "
        f"{stats['retained_spots']:,} spots with enough events)"
    )
    trained = stats.get("trained")
    if trained and trained["records"] != stats["records"]:
        line += (
            f"\ntrained on {trained['spots']:,} spots / {trained['records']:,} records "
            f"(per spot avg {trained['avg_per_spot']:.2f}, std {trained['std_per_spot']:.2f})"
        )
    return line
