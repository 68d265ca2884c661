"""Feature schema: ordered feature definitions with fixed scaling bounds.

A schema lists every model input in order. Each feature carries min/max
bounds for linear scaling to [0, 1] and an optional lag in minutes; a
feature with ``lag_minutes > 0`` is a separate input that takes the value
of the same-named channel that many minutes earlier. The shipped default
schema has 21 current inputs plus indoor temperature, indoor humidity and
CO2 lagged by 10 minutes (24 inputs total).
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

from .errors import SchemaError


@dataclass(frozen=True)
class FeatureDef:
    """One model input: name, unit, scaling bounds, optional lag."""

    name: str
    unit: str
    scale_min: float
    scale_max: float
    lag_minutes: int = 0

    def __post_init__(self):
        if not math.isfinite(self.scale_min) or not math.isfinite(self.scale_max):
            raise SchemaError(f"feature {self.name!r}: bounds must be finite")
        if self.scale_min >= self.scale_max:
            raise SchemaError(
                f"feature {self.name!r}: scale_min {self.scale_min} must be "
                f"< scale_max {self.scale_max}"
            )
        if self.lag_minutes < 0:
            raise SchemaError(f"feature {self.name!r}: lag_minutes must be >= 0")

    @property
    def lagged(self) -> bool:
        return self.lag_minutes > 0

    @property
    def vector_name(self) -> str:
        """Column name of this feature in a sample vector."""
        if self.lagged:
            return f"{self.name}_lag{self.lag_minutes}"
        return self.name


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature definitions plus the label channel name."""

    features: tuple[FeatureDef, ...]
    label_name: str = "window_state"

    def __post_init__(self):
        seen = set()
        for f in self.features:
            key = (f.name, f.lag_minutes)
            if key in seen:
                raise SchemaError(f"duplicate feature {f.vector_name!r} in schema")
            seen.add(key)

    @property
    def input_width(self) -> int:
        return len(self.features)

    def vector_names(self) -> list[str]:
        return [f.vector_name for f in self.features]

    def current_features(self) -> list[FeatureDef]:
        return [f for f in self.features if not f.lagged]

    def lagged_features(self) -> list[FeatureDef]:
        return [f for f in self.features if f.lagged]

    def feature(self, vector_name: str) -> FeatureDef:
        for f in self.features:
            if f.vector_name == vector_name:
                return f
        raise SchemaError(f"no feature named {vector_name!r} in schema")


def scale(value: float, feature: FeatureDef) -> float:
    """Linearly map ``value`` onto [0, 1] using the feature bounds.

    Values outside the bounds are clamped, so evaluation data may exceed
    the declared ranges without producing out-of-range inputs.
    """
    if not math.isfinite(value):
        raise ValueError(f"cannot scale non-finite value for {feature.name!r}")
    span = feature.scale_max - feature.scale_min
    scaled = (value - feature.scale_min) / span
    return min(1.0, max(0.0, scaled))


def unscale(scaled: float, feature: FeatureDef) -> float:
    """Inverse of :func:`scale` for in-range values."""
    return feature.scale_min + scaled * (feature.scale_max - feature.scale_min)


# Channels expected in indoor CSV files (beyond timestamp/office_id).
INDOOR_CHANNELS = (
    "presence",
    "co2",
    "rel_humidity",
    "set_temp_t1",
    "set_temp_t2",
    "indoor_temp",
    "facade_outdoor_temp",
)

# Channels expected in weather CSV files (beyond timestamp).
WEATHER_CHANNELS = (
    "avg_temp",
    "avg_rel_humidity",
    "ground_temp_minus100cm",
    "rain_droplets_total",
    "rain_droplets_volume",
    "max_wind_speed",
    "wind_direction",
    "wind_speed",
    "avg_pressure",
    "global_radiation",
    "diffuse_radiation",
)

# Channels derived from the record timestamp rather than measured.
DERIVED_CHANNELS = ("hour", "day_of_week", "timestamp")

LABEL_CHANNEL = "window_state"


def canonical_schema() -> FeatureSchema:
    """The shipped default schema: 21 current inputs plus 3 lagged inputs."""
    f = FeatureDef
    return FeatureSchema(
        features=(
            f("hour", "-", 0, 23),
            f("day_of_week", "-", 0, 6),
            f("presence", "-", 0, 1),
            f("co2", "ppm", 0, 2500),
            f("rel_humidity", "%", 0, 100),
            f("set_temp_t1", "degC", 18, 26),
            f("set_temp_t2", "degC", 18, 26),
            f("indoor_temp", "degC", -10, 40),
            f("facade_outdoor_temp", "degC", -10, 50),
            f("timestamp", "s", 1.10e9, 1.58e9),
            f("avg_temp", "degC", -10, 40),
            f("avg_rel_humidity", "%", 0, 100),
            f("ground_temp_minus100cm", "degC", -10, 40),
            f("rain_droplets_total", "-", 0, 15),
            f("rain_droplets_volume", "-", 0, 0.5),
            f("max_wind_speed", "m/s", 0, 28.61),
            f("wind_direction", "deg", 0, 360),
            f("wind_speed", "m/s", 0, 28.61),
            f("avg_pressure", "mbar", 900, 1100),
            f("global_radiation", "W/m2", 0, 1362),
            f("diffuse_radiation", "W/m2", 0, 800),
            f("indoor_temp", "degC", -10, 40, lag_minutes=10),
            f("rel_humidity", "%", 0, 100, lag_minutes=10),
            f("co2", "ppm", 0, 2500, lag_minutes=10),
        ),
        label_name=LABEL_CHANNEL,
    )


def _format_number(x: float) -> str:
    if float(x) == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def dump_schema(schema: FeatureSchema) -> str:
    """Serialize a schema to the human-editable key/value text form."""
    lines = ["# feature schema", f"label = {schema.label_name}", ""]
    for f in schema.features:
        lines.append("[feature]")
        lines.append(f"name = {f.name}")
        lines.append(f"unit = {f.unit}")
        lines.append(f"min = {_format_number(f.scale_min)}")
        lines.append(f"max = {_format_number(f.scale_max)}")
        if f.lag_minutes:
            lines.append(f"lag_minutes = {f.lag_minutes}")
        lines.append("")
    return "\n".join(lines)


def save_schema(schema: FeatureSchema, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_schema(schema))


def parse_schema(text: str, source: str = "<schema>") -> FeatureSchema:
    """Parse the key/value schema text form, reporting line numbers on errors."""
    label = LABEL_CHANNEL
    blocks: list[dict] = []
    current: dict | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "[feature]":
            current = {}
            blocks.append(current)
            continue
        if "=" not in line:
            raise SchemaError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if current is None:
            if key != "label":
                raise SchemaError(
                    f"{source}:{lineno}: only 'label' may appear before [feature] blocks"
                )
            label = value
            continue
        current[key] = (lineno, value)

    features = []
    for block in blocks:
        def take(key: str, default=None):
            if key in block:
                return block[key][1]
            if default is not None:
                return default
            lineno = min(v[0] for v in block.values()) if block else 0
            raise SchemaError(f"{source}:{lineno}: feature block missing {key!r}")

        name = take("name")
        unit = take("unit", "-")
        try:
            fmin = float(take("min"))
            fmax = float(take("max"))
            lag = int(take("lag_minutes", "0"))
        except ValueError as exc:
            raise SchemaError(f"{source}: feature {name!r}: {exc}") from exc
        features.append(FeatureDef(name, unit, fmin, fmax, lag_minutes=lag))
    if not features:
        raise SchemaError(f"{source}: schema declares no features")
    return FeatureSchema(features=tuple(features), label_name=label)


def load_schema(path) -> FeatureSchema:
    with open(path, encoding="utf-8") as fh:
        return parse_schema(fh.read(), source=str(path))


def schema_hash(schema: FeatureSchema) -> str:
    """Stable short hash of a schema, used by checkpoints and the protocol."""
    digest = hashlib.sha256(dump_schema(schema).encode("utf-8")).hexdigest()
    return digest[:16]
