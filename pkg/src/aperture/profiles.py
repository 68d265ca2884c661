"""Per-office behavioral profiles and their CSV form."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from .errors import DataError


@dataclass(frozen=True)
class OfficeProfile:
    """4-dimensional behavioral summary of one office.

    An absent cold- or warm-day mean (the office never saw that regime) is
    stored as NaN. ``actions_per_day`` is carried for reporting but is not
    one of the clustered features.
    """

    office_id: str
    mean_temp_cold: float
    mean_temp_warm: float
    mean_co2: float
    fraction_open: float
    actions_per_day: float

    @property
    def has_cold(self) -> bool:
        return not math.isnan(self.mean_temp_cold)

    @property
    def has_warm(self) -> bool:
        return not math.isnan(self.mean_temp_warm)


PROFILE_HEADER = (
    "office_id",
    "mean_temp_cold",
    "mean_temp_warm",
    "mean_co2",
    "fraction_open",
    "actions_per_day",
)


def _cell(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def save_profiles(profiles: list[OfficeProfile], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PROFILE_HEADER)
        for p in profiles:
            writer.writerow(
                [
                    p.office_id,
                    _cell(p.mean_temp_cold),
                    _cell(p.mean_temp_warm),
                    _cell(p.mean_co2),
                    _cell(p.fraction_open),
                    _cell(p.actions_per_day),
                ]
            )


def load_profiles(path) -> list[OfficeProfile]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != PROFILE_HEADER:
            raise DataError(f"{path}: expected header {','.join(PROFILE_HEADER)}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(PROFILE_HEADER):
                raise DataError(f"{path}: line {lineno}: wrong cell count")
            try:
                vals = [float(c) if c.strip() else math.nan for c in row[1:]]
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
            out.append(OfficeProfile(row[0], *vals))
    if not out:
        raise DataError(f"{path}: no profiles")
    return out
