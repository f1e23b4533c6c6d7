"""Observation ingestion, wind-vector conversion and rescaling.

Two CSV layouts are accepted, selected by the header line:

* raw:       ``station_id,time,lat_deg,lon_deg,alt_m,speed_ms,dir_deg``
* projected: ``station_id,time,x_m,y_m,alt_m,u_ms,v_ms``

Times are ISO-8601 in UTC.  Missing values are empty fields.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .errors import DomainError, DuplicateObservationError, EmptyDatasetError, ParseError
from .projection import SWEREF99TM, ProjectionParams, project_to_plane

RAW_HEADER = ("station_id", "time", "lat_deg", "lon_deg", "alt_m", "speed_ms", "dir_deg")
PROJECTED_HEADER = ("station_id", "time", "x_m", "y_m", "alt_m", "u_ms", "v_ms")

HEADING_CCW = "heading-ccw"
METEO = "meteo"
WIND_CONVENTIONS = (HEADING_CCW, METEO)


@dataclass(frozen=True)
class Station:
    id: str
    x: float
    y: float
    altitude: float
    lat: float = math.nan
    lon: float = math.nan


@dataclass(frozen=True, eq=False)
class TimeSlice:
    """All observations made at one instant.

    ``points`` is (N, 3) with columns x, y (metres east/north) and altitude;
    ``velocities`` is (N, 2) with columns u (east) and v (north) in m/s.
    """

    time: datetime
    points: np.ndarray
    velocities: np.ndarray
    station_ids: tuple = field(default=())

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        vel = np.array(self.velocities, dtype=float)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise ValueError(f"points must be (N, 2) or (N, 3), got {pts.shape}")
        if pts.shape[1] == 2:
            pts = np.column_stack([pts, np.zeros(len(pts))])
        vel = vel.reshape(-1, 2)
        if len(pts) != len(vel) or len(pts) == 0:
            raise ValueError("points and velocities must have equal non-zero length")
        ids = tuple(self.station_ids) or tuple(f"s{i}" for i in range(len(pts)))
        if len(ids) != len(pts):
            raise ValueError("station_ids length does not match points")
        if len(set(ids)) != len(ids):
            raise DuplicateObservationError(f"duplicate station id in slice at {self.time}")
        xy = {(float(x), float(y)) for x, y in pts[:, :2]}
        if len(xy) != len(pts):
            raise DuplicateObservationError(f"duplicate station position in slice at {self.time}")
        pts.setflags(write=False)
        vel.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "velocities", vel)
        object.__setattr__(self, "station_ids", ids)

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        if not isinstance(other, TimeSlice):
            return NotImplemented
        return (
            self.time == other.time
            and self.station_ids == other.station_ids
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.velocities, other.velocities)
        )

    def subset(self, mask):
        mask = np.asarray(mask)
        ids = tuple(np.asarray(self.station_ids, dtype=object)[mask])
        return TimeSlice(self.time, self.points[mask], self.velocities[mask], ids)


def wind_polar_to_cartesian(speed, angle, convention=HEADING_CCW):
    """Convert wind speed and angle in degrees to (u east, v north).

    ``heading-ccw``: the angle is the direction the wind vector points,
    counter-clockwise from north, so (u, v) = speed * (-sin a, cos a).
    ``meteo``: the angle is where the wind blows *from*, clockwise from north.
    """
    if speed < 0:
        raise DomainError(f"negative wind speed {speed}")
    a = math.radians(angle)
    if convention == HEADING_CCW:
        return -speed * math.sin(a), speed * math.cos(a)
    if convention == METEO:
        return -speed * math.sin(a), -speed * math.cos(a)
    raise ValueError(f"unknown wind convention {convention!r}")


def rescale_to_unit(points, tau, origin):
    """Affine map of planar points in metres onto the unit square."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    tau = np.asarray(tau, dtype=float)
    origin = np.asarray(origin, dtype=float)
    if np.any(tau <= 0):
        raise DomainError(f"tau must be positive, got {tau}")
    out = (pts - origin) / tau
    slack = 1e-12
    if np.any(out < -slack) or np.any(out > 1 + slack):
        bad = pts[np.any((out < -slack) | (out > 1 + slack), axis=1)][0]
        raise DomainError(f"point {tuple(bad)} outside [origin, origin + tau]")
    return np.clip(out, 0.0, 1.0)


def unit_to_physical(points, tau, origin):
    return np.asarray(origin, dtype=float) + np.asarray(points, dtype=float) * np.asarray(tau, dtype=float)


def parse_time(text):
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    t = datetime.fromisoformat(text)
    if t.tzinfo is None:
        return t.replace(tzinfo=timezone.utc)
    return t.astimezone(timezone.utc)


def format_time(t):
    return t.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _float(value, name, line, required=True):
    value = value.strip()
    if value == "":
        if required:
            raise ParseError(f"missing {name}", line)
        return None
    try:
        out = float(value)
    except ValueError:
        raise ParseError(f"cannot parse {name}={value!r}", line) from None
    if not math.isfinite(out):
        raise ParseError(f"non-finite {name}", line)
    return out


def parse_observations(data, projection=SWEREF99TM, convention=HEADING_CCW):
    """Parse an observation CSV into stations and time slices.

    ``data`` may be bytes, str or a binary/text file object.  Rows with a
    missing wind component are dropped.  Returns ``(stations, slices)`` with
    stations sorted by id and slices sorted by time.
    """
    if hasattr(data, "read"):
        data = data.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    reader = csv.reader(io.StringIO(data))
    try:
        header = tuple(h.strip() for h in next(reader))
    except StopIteration:
        raise EmptyDatasetError("empty observation file") from None
    if header == RAW_HEADER:
        raw = True
    elif header == PROJECTED_HEADER:
        raw = False
    else:
        raise ParseError(f"unrecognised header {','.join(header)}", 1)

    stations = {}
    rows = {}
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", line)
        sid = row[0].strip()
        if not sid:
            raise ParseError("missing station_id", line)
        try:
            t = parse_time(row[1])
        except ValueError:
            raise ParseError(f"bad timestamp {row[1]!r}", line) from None
        alt = _float(row[4], "alt_m", line)
        if raw:
            lat = _float(row[2], "lat_deg", line)
            lon = _float(row[3], "lon_deg", line)
            try:
                x, y = project_to_plane(lat, lon, projection)
            except DomainError as exc:
                raise ParseError(str(exc), line) from None
            speed = _float(row[5], "speed_ms", line, required=False)
            angle = _float(row[6], "dir_deg", line, required=False)
            if speed is None or angle is None:
                vel = None
            else:
                try:
                    vel = wind_polar_to_cartesian(speed, angle, convention)
                except DomainError as exc:
                    raise ParseError(str(exc), line) from None
            station = Station(sid, x, y, alt, lat, lon)
        else:
            x = _float(row[2], "x_m", line)
            y = _float(row[3], "y_m", line)
            u = _float(row[5], "u_ms", line, required=False)
            v = _float(row[6], "v_ms", line, required=False)
            vel = None if u is None or v is None else (u, v)
            station = Station(sid, x, y, alt)

        known = stations.get(sid)
        if known is None:
            stations[sid] = station
        elif (known.x, known.y, known.altitude) != (station.x, station.y, station.altitude):
            raise ParseError(f"station {sid} reported at inconsistent positions", line)
        if vel is None:
            continue
        bucket = rows.setdefault(t, {})
        if sid in bucket:
            raise DuplicateObservationError(f"line {line}: duplicate observation for {sid} at {format_time(t)}")
        bucket[sid] = vel

    if not stations:
        raise EmptyDatasetError("observation file contains no rows")

    slices = []
    for t in sorted(rows):
        ids = sorted(rows[t])
        pts = [(stations[s].x, stations[s].y, stations[s].altitude) for s in ids]
        vel = [rows[t][s] for s in ids]
        slices.append(TimeSlice(t, pts, vel, tuple(ids)))
    return [stations[s] for s in sorted(stations)], slices


def serialize_observations(slices):
    """Write slices as a projected-layout CSV string."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PROJECTED_HEADER)
    for sl in slices:
        ts = format_time(sl.time)
        for sid, p, u in zip(sl.station_ids, sl.points, sl.velocities):
            w.writerow([sid, ts, repr(float(p[0])), repr(float(p[1])), repr(float(p[2])),
                        repr(float(u[0])), repr(float(u[1]))])
    return buf.getvalue()


def stations_bbox(slices):
    pts = np.vstack([sl.points[:, :2] for sl in slices])
    return pts.min(axis=0), pts.max(axis=0)


def centered_origin(lo, hi, tau):
    """Origin placing the box [origin, origin + tau] centred on [lo, hi]."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(hi - lo > tau):
        raise DomainError(f"data extent {hi - lo} exceeds period {tau}")
    return 0.5 * (lo + hi) - 0.5 * tau
