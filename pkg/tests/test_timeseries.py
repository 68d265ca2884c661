import math

import numpy as np
import pytest

from aperture.errors import DataError
from aperture.schema import FeatureDef, FeatureSchema
from aperture.timeseries import (
    Constant,
    Proportional,
    Stream,
    TimeSeriesTable,
    build_samples,
    default_imputation_rules,
    impute,
    ingest_csv,
    join_weather,
    load_samples,
    office_stats,
    resample_linear,
    save_samples,
)

BASE = 1_400_000_000 - 1_400_000_000 % 86400  # midnight UTC

INDOOR_HEADER = (
    "timestamp,office_id,presence,co2,rel_humidity,set_temp_t1,set_temp_t2,"
    "indoor_temp,facade_outdoor_temp,window_state"
)
WEATHER_HEADER = (
    "timestamp,avg_temp,avg_rel_humidity,ground_temp_minus100cm,rain_droplets_total,"
    "rain_droplets_volume,max_wind_speed,wind_direction,wind_speed,avg_pressure,"
    "global_radiation,diffuse_radiation"
)


def write_indoor(path, rows):
    lines = [INDOOR_HEADER] + rows
    path.write_text("\n".join(lines) + "\n")
    return path


def indoor_row(ts, office="A", presence=1, co2=600, hum=40, t1=21, t2=21, tin=22, tfac=10, win=0):
    return f"{ts},{office},{presence},{co2},{hum},{t1},{t2},{tin},{tfac},{win}"


def write_weather(path, rows):
    lines = [WEATHER_HEADER] + rows
    path.write_text("\n".join(lines) + "\n")
    return path


def weather_row(ts, temp=10.0):
    return f"{ts},{temp},60,8,0,0,4,180,2.5,1000,300,100"


def make_stream(ts, **columns):
    ts = np.asarray(ts, dtype=np.int64)
    cols = {k: np.asarray(v, dtype=np.float64) for k, v in columns.items()}
    return Stream(timestamps=ts, columns=cols)


def make_table(kind="indoor", **streams):
    return TimeSeriesTable(kind=kind, streams=streams, meta={"tz": "UTC"})


# ---------------------------------------------------------------------------
# ingestion


def test_ingest_well_formed(tmp_path):
    p = write_indoor(tmp_path / "in.csv", [indoor_row(BASE + i * 60) for i in range(3)])
    table = ingest_csv(p, "indoor")
    assert table.office_ids == ["A"]
    assert len(table.streams["A"]) == 3
    assert np.all(np.diff(table.streams["A"].timestamps) > 0)


def test_ingest_sorts_out_of_order_rows(tmp_path):
    rows = [indoor_row(BASE + 120), indoor_row(BASE), indoor_row(BASE + 60)]
    table = ingest_csv(write_indoor(tmp_path / "in.csv", rows), "indoor")
    assert list(table.streams["A"].timestamps) == [BASE, BASE + 60, BASE + 120]


def test_ingest_duplicate_timestamp_keeps_last(tmp_path):
    rows = [indoor_row(BASE, co2=500), indoor_row(BASE, co2=900)]
    table = ingest_csv(write_indoor(tmp_path / "in.csv", rows), "indoor")
    assert table.streams["A"].columns["co2"][0] == 900


def test_ingest_nan_window_state_retained(tmp_path):
    rows = [indoor_row(BASE), f"{BASE + 60},A,1,600,40,21,21,22,10,NaN"]
    table = ingest_csv(write_indoor(tmp_path / "in.csv", rows), "indoor")
    win = table.streams["A"].columns["window_state"]
    assert len(win) == 2
    assert math.isnan(win[1])


def test_ingest_malformed_row_reports_line(tmp_path):
    rows = [indoor_row(BASE), f"{BASE + 60},A,1,notanumber,40,21,21,22,10,0"]
    with pytest.raises(DataError, match="line 3"):
        ingest_csv(write_indoor(tmp_path / "in.csv", rows), "indoor")


def test_ingest_unknown_header_lists_expected(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("timestamp,office_id,nonsense\n1,A,2\n")
    with pytest.raises(DataError, match="expected columns timestamp,office_id,presence"):
        ingest_csv(p, "indoor")


def test_ingest_derives_hour_and_weekday(tmp_path):
    # BASE is midnight UTC; +3h -> hour 3.
    p = write_indoor(tmp_path / "in.csv", [indoor_row(BASE + 3 * 3600)])
    table = ingest_csv(p, "indoor")
    assert table.streams["A"].columns["hour"][0] == 3
    assert table.streams["A"].columns["day_of_week"][0] in range(7)


def test_ingest_rejects_bad_binary(tmp_path):
    rows = [f"{BASE},A,2,600,40,21,21,22,10,0"]
    with pytest.raises(DataError, match="presence must be 0 or 1"):
        ingest_csv(write_indoor(tmp_path / "in.csv", rows), "indoor")


def test_ingest_weather(tmp_path):
    p = write_weather(tmp_path / "w.csv", [weather_row(BASE + i * 600) for i in range(4)])
    table = ingest_csv(p, "weather")
    stream = table.single_stream()
    assert len(stream) == 4
    assert stream.columns["avg_temp"][0] == 10.0


# ---------------------------------------------------------------------------
# weather join


def join_fixture(tmp_path, indoor_offsets_s):
    indoor = ingest_csv(
        write_indoor(
            tmp_path / "in.csv", [indoor_row(BASE + off) for off in indoor_offsets_s]
        ),
        "indoor",
    )
    weather = ingest_csv(
        write_weather(
            tmp_path / "w.csv",
            [weather_row(BASE + i * 600, temp=float(i)) for i in range(3)],
        ),
        "weather",
    )
    return indoor, weather


def test_join_assigns_nearest(tmp_path):
    indoor, weather = join_fixture(tmp_path, [180])  # 10:03 against 10:00/10:10
    joined = join_weather(indoor, weather)
    assert joined.streams["A"].columns["avg_temp"][0] == 0.0


def test_join_tie_goes_to_later_stamp(tmp_path):
    indoor, weather = join_fixture(tmp_path, [300])  # exactly 5 min
    joined = join_weather(indoor, weather)
    assert joined.streams["A"].columns["avg_temp"][0] == 1.0


def test_join_drops_unmatched_and_counts(tmp_path):
    indoor, weather = join_fixture(tmp_path, [180, 5000])
    joined = join_weather(indoor, weather)
    assert len(joined.streams["A"]) == 1
    assert joined.meta["join_dropped"]["A"] == 1


def test_join_partition_every_minute_offset(tmp_path):
    # Every indoor minute inside the overlap maps to exactly one weather stamp.
    indoor, weather = join_fixture(tmp_path, [600 + m * 60 for m in range(10)])
    joined = join_weather(indoor, weather)
    temps = joined.streams["A"].columns["avg_temp"]
    assert len(temps) == 10
    # offsets 0..4 from 10:10 -> stamp 1; offsets 5..9 -> nearer/tied to 10:20.
    assert list(temps) == [1, 1, 1, 1, 1, 2, 2, 2, 2, 2]


def test_join_empty_overlap_reports_ranges(tmp_path):
    indoor, weather = join_fixture(tmp_path, [90000])
    with pytest.raises(DataError, match="no overlap"):
        join_weather(indoor, weather)


# ---------------------------------------------------------------------------
# resampling


def test_resample_linear_interpolation():
    table = make_table(A=make_stream([0, 900], indoor_temp=[20.0, 22.0]))
    out = resample_linear(table, source_cadence_min=15, target_cadence_min=10)
    stream = out.streams["A"]
    assert list(stream.timestamps) == [0, 600]
    assert stream.columns["indoor_temp"][1] == pytest.approx(20 + 2 * 600 / 900)


def test_resample_binary_takes_nearest():
    table = make_table(A=make_stream([0, 900], window_state=[0.0, 1.0]))
    out = resample_linear(table, 15, 10)
    assert out.streams["A"].columns["window_state"][1] == 1.0


def test_resample_does_not_cross_gaps():
    ts = [0, 900, 1800, 4500, 5400]  # 45-min hole between 30 and 75 min
    table = make_table(A=make_stream(ts, indoor_temp=[20, 21, 22, 25, 26]))
    out = resample_linear(table, 15, 10)
    got = list(out.streams["A"].timestamps)
    assert got == [0, 600, 1200, 1800, 4800, 5400]
    assert not any(1800 < t < 4500 for t in got)


def test_resample_recomputes_hour():
    ts = [BASE, BASE + 900]
    table = make_table(A=make_stream(ts, indoor_temp=[20, 21], hour=[0, 0], day_of_week=[0, 0]))
    out = resample_linear(table, 15, 10)
    assert out.streams["A"].columns["hour"][0] == 0.0


# ---------------------------------------------------------------------------
# imputation


def sparse_table():
    return make_table(
        kind="joined",
        A=make_stream(
            [0, 600],
            avg_temp=[10.0, 12.0],
            wind_speed=[5.0, 2.0],
            global_radiation=[200.0, 100.0],
            indoor_temp=[22.0, 22.5],
            co2=[600.0, 700.0],
        ),
    )


def test_impute_proportional_ground_temp():
    out = impute(sparse_table(), default_imputation_rules(), ["ground_temp_minus100cm"])
    assert out.streams["A"].columns["ground_temp_minus100cm"][0] == pytest.approx(8.0)


def test_impute_proportional_max_wind():
    out = impute(sparse_table(), default_imputation_rules(), ["max_wind_speed"])
    assert out.streams["A"].columns["max_wind_speed"][0] == pytest.approx(8.0)


def test_impute_constant_humidity():
    out = impute(sparse_table(), default_imputation_rules(), ["rel_humidity"])
    assert np.all(out.streams["A"].columns["rel_humidity"] == 30.0)


def test_impute_all_default_rules():
    required = [
        "rain_droplets_total",
        "ground_temp_minus100cm",
        "rel_humidity",
        "set_temp_t1",
        "set_temp_t2",
        "max_wind_speed",
        "avg_pressure",
        "diffuse_radiation",
    ]
    out = impute(sparse_table(), default_imputation_rules(), required)
    assert out.meta["imputed"] == sorted(required)
    assert out.streams["A"].columns["set_temp_t1"][0] == 23.0
    assert out.streams["A"].columns["avg_pressure"][0] == 1000.0
    assert out.streams["A"].columns["diffuse_radiation"][0] == pytest.approx(60.0)
    assert out.streams["A"].columns["rain_droplets_total"][0] == 0.5


def test_impute_never_touches_present_columns():
    table = sparse_table()
    before = table.streams["A"].columns["indoor_temp"].copy()
    out = impute(table, default_imputation_rules(), ["rel_humidity", "indoor_temp"])
    assert np.array_equal(out.streams["A"].columns["indoor_temp"], before)
    assert out.streams["A"].columns["indoor_temp"].tobytes() == before.tobytes()


def test_impute_missing_rule_names_feature():
    with pytest.raises(DataError, match="'co2_special'"):
        impute(sparse_table(), default_imputation_rules(), ["co2_special"])


def test_impute_rule_types():
    table = sparse_table()
    rules = {"extra": Constant(7.0), "scaled_wind": Proportional("wind_speed", 2.0)}
    out = impute(table, rules, ["extra", "scaled_wind"])
    assert out.streams["A"].columns["extra"][1] == 7.0
    assert out.streams["A"].columns["scaled_wind"][1] == 4.0


# ---------------------------------------------------------------------------
# sample building

MINI_SCHEMA = FeatureSchema(
    features=(
        FeatureDef("indoor_temp", "degC", -10, 40),
        FeatureDef("co2", "ppm", 0, 2500),
        FeatureDef("indoor_temp", "degC", -10, 40, lag_minutes=10),
    ),
    label_name="window_state",
)


def test_build_samples_lag_boundary():
    table = make_table(
        A=make_stream(
            [0, 600, 1200],
            indoor_temp=[20.0, 21.0, 22.0],
            co2=[500.0, 600.0, 700.0],
            window_state=[0.0, 0.0, 1.0],
        )
    )
    samples = build_samples(table, MINI_SCHEMA)
    assert len(samples) == 2  # first record lacks its lag
    assert samples.counts == {"labeled": 3, "samples": 2, "skipped": 1}
    # lagged indoor temp of the second sample is the first record's value
    lag_col = samples.vector_names.index("indoor_temp_lag10")
    assert samples.X[0, lag_col] == pytest.approx((20.0 + 10) / 50)


def test_build_samples_missing_label_skipped():
    table = make_table(
        A=make_stream(
            [0, 600, 1200],
            indoor_temp=[20.0, 21.0, 22.0],
            co2=[500.0, 600.0, 700.0],
            window_state=[0.0, math.nan, 1.0],
        )
    )
    samples = build_samples(table, MINI_SCHEMA)
    assert samples.counts["labeled"] == 2
    assert len(samples) == 1


def test_build_samples_lag_never_crosses_gap():
    # 30-minute hole between records 1 and 2 at 10-min cadence.
    table = make_table(
        A=make_stream(
            [0, 600, 2400, 3000],
            indoor_temp=[20.0, 21.0, 22.0, 23.0],
            co2=[500.0] * 4,
            window_state=[0.0] * 4,
        )
    )
    samples = build_samples(table, MINI_SCHEMA, cadence_min=10)
    # record 2 has no t-10min predecessor; record 1 and 3 do.
    assert list(samples.timestamps) == [600, 3000]


def test_build_samples_never_emits_nan_and_counts_add_up():
    rng = np.random.default_rng(0)
    n = 50
    temp = rng.uniform(15, 30, n)
    temp[rng.integers(0, n, 5)] = math.nan
    win = rng.integers(0, 2, n).astype(float)
    win[rng.integers(0, n, 5)] = math.nan
    table = make_table(
        A=make_stream(np.arange(n) * 600, indoor_temp=temp, co2=rng.uniform(400, 900, n), window_state=win)
    )
    samples = build_samples(table, MINI_SCHEMA)
    assert np.all(np.isfinite(samples.X))
    assert samples.counts["samples"] + samples.counts["skipped"] == samples.counts["labeled"]


def test_build_samples_values_scaled_to_unit_interval():
    table = make_table(
        A=make_stream(
            [0, 600],
            indoor_temp=[15.0, 15.0],
            co2=[1250.0, 1250.0],
            window_state=[1.0, 0.0],
        )
    )
    samples = build_samples(table, MINI_SCHEMA)
    assert samples.X[0, 0] == pytest.approx(0.5)
    assert samples.X[0, 1] == pytest.approx(0.5)


def test_samples_csv_roundtrip(tmp_path):
    table = make_table(
        A=make_stream(
            [0, 600, 1200],
            indoor_temp=[20.0, 21.0, 22.0],
            co2=[500.0, 600.0, 700.0],
            window_state=[0.0, 1.0, 1.0],
        )
    )
    samples = build_samples(table, MINI_SCHEMA)
    path = tmp_path / "samples.csv"
    save_samples(samples, path)
    loaded = load_samples(path, MINI_SCHEMA)
    assert np.array_equal(loaded.X, samples.X)
    assert np.array_equal(loaded.y, samples.y)
    assert list(loaded.office_ids) == list(samples.office_ids)


# ---------------------------------------------------------------------------
# office stats


def stats_table(outdoor, indoor, window):
    n = len(outdoor)
    return make_table(
        A=make_stream(
            np.arange(n) * 600,
            avg_temp=np.asarray(outdoor, dtype=float),
            indoor_temp=np.asarray(indoor, dtype=float),
            co2=np.full(n, 600.0),
            window_state=np.asarray(window, dtype=float),
        )
    )


def test_office_stats_constant_cold_stream():
    table = stats_table([5] * 4, [21] * 4, [0] * 4)
    p = office_stats(table, "A")
    assert p.mean_temp_cold == pytest.approx(21)
    assert not p.has_warm
    assert p.fraction_open == 0.0


def test_office_stats_fraction_open():
    table = stats_table([5] * 4, [21] * 4, [0, 0, 1, 1])
    assert office_stats(table, "A").fraction_open == pytest.approx(0.5)


def test_office_stats_threshold_partition():
    table = stats_table([10, 14, 10, 14], [20, 24, 20, 24], [0, 0, 0, 0])
    p = office_stats(table, "A")
    assert p.mean_temp_cold == pytest.approx(20)
    assert p.mean_temp_warm == pytest.approx(24)


def test_office_stats_requires_labels():
    table = stats_table([10] * 3, [20] * 3, [math.nan] * 3)
    with pytest.raises(DataError, match="labels"):
        office_stats(table, "A")
