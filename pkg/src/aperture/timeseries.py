"""Time-series ingestion, joining, resampling, imputation and sample building.

Tables are immutable: every operation returns a new table and leaves its
inputs untouched, so per-office processing can run in parallel without
shared mutable state. Missing values are NaN. Gap-free segments are runs
of records whose timestamp deltas never exceed twice the nominal cadence;
lags and sequence durations never cross segment boundaries.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from zoneinfo import ZoneInfo

import numpy as np

from .errors import DataError
from .profiles import OfficeProfile
from .schema import (
    DERIVED_CHANNELS,
    INDOOR_CHANNELS,
    LABEL_CHANNEL,
    WEATHER_CHANNELS,
    FeatureSchema,
)
from . import metrics

INDOOR_HEADER = ("timestamp", "office_id") + INDOOR_CHANNELS + (LABEL_CHANNEL,)
WEATHER_HEADER = ("timestamp",) + WEATHER_CHANNELS

# Channels that hold 0/1 states; resampling snaps them to the nearest record.
BINARY_CHANNELS = ("presence", LABEL_CHANNEL)

WEATHER_KEY = ""


@dataclass
class Stream:
    """One office's records: sorted unique timestamps plus value columns."""

    timestamps: np.ndarray
    columns: dict[str, np.ndarray]

    def __len__(self) -> int:
        return len(self.timestamps)

    def copy_shallow(self) -> "Stream":
        return Stream(self.timestamps, dict(self.columns))


@dataclass
class TimeSeriesTable:
    kind: str
    streams: dict[str, Stream]
    meta: dict = field(default_factory=dict)

    @property
    def office_ids(self) -> list[str]:
        return [k for k in self.streams if k != WEATHER_KEY]

    def column_names(self) -> list[str]:
        names: list[str] = []
        for stream in self.streams.values():
            for name in stream.columns:
                if name not in names:
                    names.append(name)
        return names

    def single_stream(self) -> Stream:
        if len(self.streams) != 1:
            raise DataError(f"expected a single stream, table has {len(self.streams)}")
        return next(iter(self.streams.values()))

    def total_records(self) -> int:
        return sum(len(s) for s in self.streams.values())


def _hour_and_weekday(timestamps: np.ndarray, tz: str) -> tuple[np.ndarray, np.ndarray]:
    """Local hour of day and weekday (Monday = 0) for unix timestamps."""
    if tz in ("UTC", "utc"):
        hour = (timestamps // 3600) % 24
        # 1970-01-01 was a Thursday (weekday 3).
        dow = (timestamps // 86400 + 3) % 7
        return hour.astype(np.float64), dow.astype(np.float64)
    zone = ZoneInfo(tz)
    hour = np.empty(len(timestamps), dtype=np.float64)
    dow = np.empty(len(timestamps), dtype=np.float64)
    for i, ts in enumerate(timestamps):
        local = datetime.fromtimestamp(int(ts), tz=timezone.utc).astimezone(zone)
        hour[i] = local.hour
        dow[i] = local.weekday()
    return hour, dow


def _parse_cell(raw: str) -> float:
    raw = raw.strip()
    if raw == "" or raw.lower() == "nan":
        return math.nan
    return float(raw)


def _finalize_stream(timestamps: list[int], rows: list[list[float]], channels) -> Stream:
    ts = np.asarray(timestamps, dtype=np.int64)
    vals = np.asarray(rows, dtype=np.float64)
    order = np.argsort(ts, kind="stable")
    ts = ts[order]
    vals = vals[order]
    # Collapse duplicate timestamps to the last occurrence in file order.
    keep = np.r_[ts[1:] != ts[:-1], True] if len(ts) else np.array([], dtype=bool)
    ts = ts[keep]
    vals = vals[keep]
    columns = {name: np.ascontiguousarray(vals[:, j]) for j, name in enumerate(channels)}
    return Stream(timestamps=ts, columns=columns)


def ingest_csv(path, kind: str, tz: str = "UTC") -> TimeSeriesTable:
    """Read an indoor or weather CSV into a sorted, validated table.

    Indoor tables get derived ``hour`` and ``day_of_week`` columns computed
    in the building's civil time zone. Rows with a missing window state are
    retained (they are excluded later when samples are built).
    """
    if kind not in ("indoor", "weather"):
        raise ValueError(f"kind must be 'indoor' or 'weather', got {kind!r}")
    expected = INDOOR_HEADER if kind == "indoor" else WEATHER_HEADER

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        if tuple(h.strip() for h in header) != expected:
            raise DataError(
                f"{path}: unexpected header {header!r}; expected columns "
                f"{','.join(expected)}"
            )

        per_office_ts: dict[str, list[int]] = {}
        per_office_rows: dict[str, list[list[float]]] = {}
        channels = expected[2:] if kind == "indoor" else expected[1:]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                raise DataError(
                    f"{path}: line {lineno}: expected {len(expected)} cells, got {len(row)}"
                )
            try:
                ts = int(float(row[0]))
                if kind == "indoor":
                    office = row[1].strip()
                    values = [_parse_cell(c) for c in row[2:]]
                else:
                    office = WEATHER_KEY
                    values = [_parse_cell(c) for c in row[1:]]
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
            if kind == "indoor" and not office:
                raise DataError(f"{path}: line {lineno}: empty office_id")
            for name, v in zip(channels, values):
                if name in ("presence", LABEL_CHANNEL) and not math.isnan(v) and v not in (0.0, 1.0):
                    raise DataError(
                        f"{path}: line {lineno}: {name} must be 0 or 1, got {v}"
                    )
                if name == "wind_direction" and not math.isnan(v) and not 0 <= v <= 360:
                    raise DataError(
                        f"{path}: line {lineno}: wind_direction out of [0, 360]: {v}"
                    )
            per_office_ts.setdefault(office, []).append(ts)
            per_office_rows.setdefault(office, []).append(values)

    streams = {}
    for office in sorted(per_office_ts):
        stream = _finalize_stream(per_office_ts[office], per_office_rows[office], channels)
        if "wind_direction" in stream.columns:
            wd = stream.columns["wind_direction"]
            stream.columns["wind_direction"] = np.where(wd == 360.0, 0.0, wd)
        if kind == "indoor":
            hour, dow = _hour_and_weekday(stream.timestamps, tz)
            stream.columns["hour"] = hour
            stream.columns["day_of_week"] = dow
        streams[office] = stream

    if not streams:
        raise DataError(f"{path}: no data rows")
    return TimeSeriesTable(kind=kind, streams=streams, meta={"tz": tz, "source": str(path)})


def join_weather(indoor: TimeSeriesTable, weather: TimeSeriesTable) -> TimeSeriesTable:
    """Attach to each indoor record the nearest weather record within 5 minutes.

    A tie at exactly 5 minutes resolves to the later weather stamp, so each
    indoor minute maps to exactly one stamp of a 10-minute weather grid.
    Indoor records with no weather within 5 minutes are dropped and counted.
    """
    if not indoor.streams or not weather.streams:
        raise DataError("join_weather: both tables must be non-empty")
    wstream = weather.single_stream()
    wts = wstream.timestamps
    if len(wts) == 0:
        raise DataError("join_weather: weather table has no records")

    streams: dict[str, Stream] = {}
    dropped: dict[str, int] = {}
    for office, stream in indoor.streams.items():
        its = stream.timestamps
        if len(its) == 0:
            continue
        right = np.searchsorted(wts, its)
        left = right - 1
        dist_left = np.where(left >= 0, its - wts[np.clip(left, 0, None)], np.iinfo(np.int64).max)
        dist_right = np.where(
            right < len(wts), wts[np.clip(right, None, len(wts) - 1)] - its, np.iinfo(np.int64).max
        )
        take_right = dist_right <= dist_left
        chosen = np.where(take_right, np.clip(right, None, len(wts) - 1), np.clip(left, 0, None))
        best = np.where(take_right, dist_right, dist_left)
        ok = best <= 300
        dropped[office] = int(np.sum(~ok))
        if not np.any(ok):
            continue
        sel = chosen[ok]
        columns = {name: col[ok] for name, col in stream.columns.items()}
        for name, col in wstream.columns.items():
            columns[name] = col[sel]
        streams[office] = Stream(timestamps=its[ok], columns=columns)

    if not streams:
        ind_ts = np.concatenate([s.timestamps for s in indoor.streams.values()])
        raise DataError(
            "join_weather: no overlap; indoor spans "
            f"[{ind_ts.min()}, {ind_ts.max()}], weather spans [{wts.min()}, {wts.max()}]"
        )
    meta = dict(indoor.meta)
    meta["join_dropped"] = dropped
    return TimeSeriesTable(kind="joined", streams=streams, meta=meta)


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Proportional:
    source: str
    factor: float


ImputationRule = Constant | Proportional


def default_imputation_rules() -> dict[str, ImputationRule]:
    """Stand-in values for channels a sparse monitoring setup cannot supply."""
    return {
        "rain_droplets_total": Constant(0.5),
        "ground_temp_minus100cm": Proportional("avg_temp", 0.8),
        "rel_humidity": Constant(30.0),
        "set_temp_t1": Constant(23.0),
        "set_temp_t2": Constant(23.0),
        "max_wind_speed": Proportional("wind_speed", 1.6),
        "avg_pressure": Constant(1000.0),
        "diffuse_radiation": Proportional("global_radiation", 0.3),
    }


def impute(
    table: TimeSeriesTable,
    rules: dict[str, ImputationRule],
    required: list[str],
) -> TimeSeriesTable:
    """Create every ``required`` channel missing from the table via its rule.

    Channels already present are never touched. Derived channels (hour,
    day of week, timestamp) need no rule. Imputed channel names are listed
    under ``meta['imputed']``.
    """
    existing = set(table.column_names())
    to_fill = [
        name
        for name in required
        if name not in existing and name not in DERIVED_CHANNELS
    ]
    for name in to_fill:
        if name not in rules:
            raise DataError(f"missing feature {name!r} has no imputation rule")
        rule = rules[name]
        if isinstance(rule, Proportional) and rule.source not in existing:
            raise DataError(
                f"imputation rule for {name!r} needs source {rule.source!r}, "
                "which is absent from the table"
            )

    streams = {}
    for office, stream in table.streams.items():
        new = stream.copy_shallow()
        for name in to_fill:
            rule = rules[name]
            if isinstance(rule, Constant):
                new.columns[name] = np.full(len(stream), rule.value)
            else:
                new.columns[name] = stream.columns[rule.source] * rule.factor
        streams[office] = new
    meta = dict(table.meta)
    meta["imputed"] = sorted(set(meta.get("imputed", [])) | set(to_fill))
    return TimeSeriesTable(kind=table.kind, streams=streams, meta=meta)


def _segment_ids(ts: np.ndarray, cadence_s: float) -> np.ndarray:
    if len(ts) == 0:
        return np.array([], dtype=np.int64)
    return np.r_[0, np.cumsum(np.diff(ts) > 2 * cadence_s)]


def _nearest_valid(
    grid: np.ndarray, ts: np.ndarray, values: np.ndarray, max_dist_s: float
) -> np.ndarray:
    """Nearest non-NaN value for each grid point; ties go to the later record."""
    valid = ~np.isnan(values)
    vts, vv = ts[valid], values[valid]
    out = np.full(len(grid), np.nan)
    if len(vts) == 0:
        return out
    right = np.searchsorted(vts, grid)
    left = right - 1
    dist_left = np.where(left >= 0, grid - vts[np.clip(left, 0, None)], np.iinfo(np.int64).max)
    dist_right = np.where(
        right < len(vts), vts[np.clip(right, None, len(vts) - 1)] - grid, np.iinfo(np.int64).max
    )
    take_right = dist_right <= dist_left
    chosen = np.where(take_right, np.clip(right, None, len(vts) - 1), np.clip(left, 0, None))
    best = np.where(take_right, dist_right, dist_left)
    ok = best <= max_dist_s
    out[ok] = vv[chosen[ok]]
    return out


def _interp_within_gaps(
    grid: np.ndarray, ts: np.ndarray, values: np.ndarray, max_gap_s: float
) -> np.ndarray:
    """Linear interpolation restricted to runs of valid points without gaps."""
    valid = ~np.isnan(values)
    vts, vv = ts[valid], values[valid]
    out = np.full(len(grid), np.nan)
    if len(vts) == 0:
        return out
    seg = _segment_ids(vts, max_gap_s / 2.0)
    for sid in np.unique(seg):
        mask = seg == sid
        t0, t1 = vts[mask][0], vts[mask][-1]
        g = (grid >= t0) & (grid <= t1)
        if np.any(g):
            out[g] = np.interp(grid[g], vts[mask], vv[mask])
    return out


def resample_linear(
    table: TimeSeriesTable, source_cadence_min: float, target_cadence_min: float
) -> TimeSeriesTable:
    """Re-grid all streams onto a uniform target cadence.

    Numeric channels are linearly interpolated; 0/1 channels take the value
    of the nearest record (never fractional); derived hour/day-of-week are
    recomputed from the grid timestamps. Nothing is interpolated across a
    gap larger than twice the source cadence.
    """
    src_s = source_cadence_min * 60.0
    step = int(round(target_cadence_min * 60))
    tz = table.meta.get("tz", "UTC")

    streams = {}
    for office, stream in table.streams.items():
        ts = stream.timestamps
        if len(ts) == 0:
            continue
        seg = _segment_ids(ts, src_s)
        grids = []
        for sid in np.unique(seg):
            mask = seg == sid
            t0, t1 = ts[mask][0], ts[mask][-1]
            start = int(math.ceil(t0 / step)) * step
            stop = int(math.floor(t1 / step)) * step
            if stop >= start:
                grids.append(np.arange(start, stop + 1, step, dtype=np.int64))
        if not grids:
            continue
        grid = np.concatenate(grids)

        columns: dict[str, np.ndarray] = {}
        for name, col in stream.columns.items():
            if col.dtype.kind not in "fiu":
                raise DataError(f"channel {name!r} is not numeric; cannot resample")
            if name in ("hour", "day_of_week"):
                continue
            if name in BINARY_CHANNELS:
                columns[name] = _nearest_valid(grid, ts, col, max_dist_s=src_s)
            else:
                columns[name] = _interp_within_gaps(grid, ts, col, max_gap_s=2 * src_s)
        if "hour" in stream.columns:
            hour, dow = _hour_and_weekday(grid, tz)
            columns["hour"] = hour
            columns["day_of_week"] = dow
        streams[office] = Stream(timestamps=grid, columns=columns)

    meta = dict(table.meta)
    meta["cadence_min"] = target_cadence_min
    return TimeSeriesTable(kind=table.kind, streams=streams, meta=meta)


@dataclass
class SampleSet:
    """Scaled feature vectors with binary labels and provenance."""

    X: np.ndarray
    y: np.ndarray
    timestamps: np.ndarray
    office_ids: np.ndarray
    vector_names: list[str]
    label_name: str = LABEL_CHANNEL
    counts: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, mask) -> "SampleSet":
        return SampleSet(
            X=self.X[mask],
            y=self.y[mask],
            timestamps=self.timestamps[mask],
            office_ids=self.office_ids[mask],
            vector_names=self.vector_names,
            label_name=self.label_name,
            counts={},
        )

    def offices(self) -> list[str]:
        seen: list[str] = []
        for o in self.office_ids:
            if o not in seen:
                seen.append(str(o))
        return seen


def _infer_cadence_min(ts: np.ndarray) -> float:
    if len(ts) < 2:
        return 10.0
    return float(np.median(np.diff(ts))) / 60.0


def _channel_values(stream: Stream, name: str) -> np.ndarray:
    if name == "timestamp":
        return stream.timestamps.astype(np.float64)
    if name in stream.columns:
        return stream.columns[name]
    raise DataError(f"table lacks channel {name!r} needed by the schema")


def build_samples(
    table: TimeSeriesTable, schema: FeatureSchema, cadence_min: float | None = None
) -> SampleSet:
    """Emit one scaled sample per record with a label, full features and lags.

    A record yields a sample only when its window-state label is present,
    every current feature is present, and every lagged feature has a record
    exactly ``lag_minutes`` earlier inside the same gap-free segment.
    Everything else is skipped and counted.
    """
    current = schema.current_features()
    lagged = schema.lagged_features()

    xs, ys, tss, offs = [], [], [], []
    n_labeled = 0
    n_skipped = 0
    for office in table.office_ids:
        stream = table.streams[office]
        ts = stream.timestamps
        n = len(ts)
        if n == 0:
            continue
        if schema.label_name not in stream.columns:
            raise DataError(f"office {office!r} has no {schema.label_name!r} channel")
        label = stream.columns[schema.label_name]
        cad = cadence_min if cadence_min is not None else _infer_cadence_min(ts)
        seg = _segment_ids(ts, cad * 60.0)

        raw = np.empty((n, schema.input_width))
        ok = ~np.isnan(label)
        n_labeled += int(np.sum(ok))
        col_index = {f.vector_name: i for i, f in enumerate(schema.features)}
        for f in current:
            vals = _channel_values(stream, f.name)
            raw[:, col_index[f.vector_name]] = vals
            ok &= ~np.isnan(vals)
        for f in lagged:
            vals = _channel_values(stream, f.name)
            lag_s = f.lag_minutes * 60
            pos = np.searchsorted(ts, ts - lag_s)
            pos_c = np.clip(pos, 0, n - 1)
            hit = (ts[pos_c] == ts - lag_s) & (seg[pos_c] == seg)
            lagvals = np.where(hit, vals[pos_c], np.nan)
            raw[:, col_index[f.vector_name]] = lagvals
            ok &= ~np.isnan(lagvals)

        n_skipped += int(np.sum(~np.isnan(label) & ~ok))
        if not np.any(ok):
            continue
        mins = np.array([f.scale_min for f in schema.features])
        maxs = np.array([f.scale_max for f in schema.features])
        scaled = np.clip((raw[ok] - mins) / (maxs - mins), 0.0, 1.0)
        xs.append(scaled)
        ys.append(label[ok].astype(np.int8))
        tss.append(ts[ok])
        offs.append(np.full(int(np.sum(ok)), office, dtype=object))

    if xs:
        X = np.vstack(xs)
        y = np.concatenate(ys)
        t = np.concatenate(tss)
        o = np.concatenate(offs)
    else:
        X = np.empty((0, schema.input_width))
        y = np.array([], dtype=np.int8)
        t = np.array([], dtype=np.int64)
        o = np.array([], dtype=object)
    return SampleSet(
        X=X,
        y=y,
        timestamps=t,
        office_ids=o,
        vector_names=schema.vector_names(),
        label_name=schema.label_name,
        counts={"labeled": n_labeled, "samples": len(y), "skipped": n_skipped},
    )


def office_stats(
    table: TimeSeriesTable,
    office_id: str,
    cold_threshold_c: float = 12.0,
    cadence_min: float | None = None,
) -> OfficeProfile:
    """Behavioral profile of one office: indoor temps split at the outdoor
    cold threshold, mean CO2, fraction of labeled time open, actions per day.
    """
    if office_id not in table.streams:
        raise DataError(f"unknown office {office_id!r}")
    stream = table.streams[office_id]
    if len(stream) == 0:
        raise DataError(f"office {office_id!r} has no records")
    label = stream.columns.get(LABEL_CHANNEL)
    if label is None or not np.any(~np.isnan(label)):
        raise DataError(f"office {office_id!r} has no window-state labels")

    if "avg_temp" in stream.columns:
        outdoor = stream.columns["avg_temp"]
    elif "facade_outdoor_temp" in stream.columns:
        outdoor = stream.columns["facade_outdoor_temp"]
    else:
        raise DataError(f"office {office_id!r} has no outdoor temperature channel")
    indoor = stream.columns["indoor_temp"]

    have = ~np.isnan(outdoor) & ~np.isnan(indoor)
    cold = have & (outdoor < cold_threshold_c)
    warm = have & (outdoor >= cold_threshold_c)
    mean_cold = float(np.mean(indoor[cold])) if np.any(cold) else math.nan
    mean_warm = float(np.mean(indoor[warm])) if np.any(warm) else math.nan

    co2 = stream.columns["co2"]
    mean_co2 = float(np.nanmean(co2)) if np.any(~np.isnan(co2)) else math.nan

    labeled = ~np.isnan(label)
    cad = cadence_min if cadence_min is not None else _infer_cadence_min(stream.timestamps)
    behavior = metrics.behavior_summary(
        label[labeled], stream.timestamps[labeled], cadence_min=cad
    )
    return OfficeProfile(
        office_id=office_id,
        mean_temp_cold=mean_cold,
        mean_temp_warm=mean_warm,
        mean_co2=mean_co2,
        fraction_open=behavior.fraction_open,
        actions_per_day=behavior.actions_per_day,
    )


def save_samples(samples: SampleSet, path) -> None:
    """Write a sample set as CSV: office_id, timestamp, features..., label."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["office_id", "timestamp", *samples.vector_names, samples.label_name])
        for i in range(len(samples)):
            writer.writerow(
                [
                    samples.office_ids[i],
                    int(samples.timestamps[i]),
                    *(repr(float(v)) for v in samples.X[i]),
                    int(samples.y[i]),
                ]
            )


def load_samples(path, schema: FeatureSchema | None = None) -> SampleSet:
    """Read a sample CSV; validates column order against ``schema`` if given."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        if len(header) < 4 or header[0] != "office_id" or header[1] != "timestamp":
            raise DataError(f"{path}: not a sample file (header {header[:3]}...)")
        vector_names = header[2:-1]
        label_name = header[-1]
        if schema is not None and vector_names != schema.vector_names():
            raise DataError(
                f"{path}: sample columns do not match the schema "
                f"(width {len(vector_names)} vs {schema.input_width})"
            )
        offs, tss, xs, ys = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: line {lineno}: wrong cell count")
            try:
                offs.append(row[0])
                tss.append(int(row[1]))
                xs.append([float(c) for c in row[2:-1]])
                ys.append(int(float(row[-1])))
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
    if not ys:
        raise DataError(f"{path}: no samples")
    return SampleSet(
        X=np.asarray(xs, dtype=np.float64),
        y=np.asarray(ys, dtype=np.int8),
        timestamps=np.asarray(tss, dtype=np.int64),
        office_ids=np.asarray(offs, dtype=object),
        vector_names=vector_names,
        label_name=label_name,
    )
