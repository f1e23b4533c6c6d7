"""Transverse Mercator (Gauss-Krueger) projection.

Forward projection using Krueger's n-series truncated at fourth order,
which is accurate to well below a millimetre within a few degrees of the
central meridian.  Defaults are SWEREF 99 TM on the GRS80 ellipsoid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

GRS80_A = 6378137.0
GRS80_F = 1.0 / 298.257222101


@dataclass(frozen=True)
class ProjectionParams:
    central_meridian: float = 15.0
    scale_factor: float = 0.9996
    false_easting: float = 500000.0
    false_northing: float = 0.0
    semi_major_axis: float = GRS80_A
    flattening: float = GRS80_F

    def __post_init__(self):
        if not (0.9 < self.scale_factor <= 1.1):
            raise DomainError(f"scale_factor {self.scale_factor} outside (0.9, 1.1]")
        if not (0.0 < self.flattening < 0.01):
            raise DomainError(f"flattening {self.flattening} outside (0, 0.01)")
        if not self.semi_major_axis > 0:
            raise DomainError("semi-major axis must be positive")


SWEREF99TM = ProjectionParams()


def project_to_plane(lat, lon, params=SWEREF99TM):
    """Project geodetic (lat, lon) in degrees to planar (x east, y north) in metres."""
    if not abs(lat) < 84.0:
        raise DomainError(f"latitude {lat} outside |lat| < 84")
    dlon_deg = lon - params.central_meridian
    if not abs(dlon_deg) < 10.0:
        raise DomainError(
            f"longitude {lon} is {dlon_deg:.3f} deg from the central meridian (limit 10)"
        )

    f = params.flattening
    e2 = f * (2.0 - f)
    n = f / (2.0 - f)
    a_hat = params.semi_major_axis / (1.0 + n) * (1.0 + n**2 / 4.0 + n**4 / 64.0)

    # conformal latitude
    A = e2
    B = (5.0 * e2**2 - e2**3) / 6.0
    C = (104.0 * e2**3 - 45.0 * e2**4) / 120.0
    D = 1237.0 * e2**4 / 1260.0

    phi = math.radians(lat)
    dlam = math.radians(dlon_deg)
    s = math.sin(phi)
    s2 = s * s
    phi_c = phi - s * math.cos(phi) * (A + B * s2 + C * s2**2 + D * s2**3)

    xi = math.atan2(math.tan(phi_c), math.cos(dlam))
    eta = math.atanh(math.cos(phi_c) * math.sin(dlam))

    b1 = n / 2.0 - 2.0 * n**2 / 3.0 + 5.0 * n**3 / 16.0 + 41.0 * n**4 / 180.0
    b2 = 13.0 * n**2 / 48.0 - 3.0 * n**3 / 5.0 + 557.0 * n**4 / 1440.0
    b3 = 61.0 * n**3 / 240.0 - 103.0 * n**4 / 140.0
    b4 = 49561.0 * n**4 / 161280.0

    north = xi
    east = eta
    for j, b in enumerate((b1, b2, b3, b4), start=1):
        north += b * math.sin(2 * j * xi) * math.cosh(2 * j * eta)
        east += b * math.cos(2 * j * xi) * math.sinh(2 * j * eta)

    k = params.scale_factor * a_hat
    x = params.false_easting + k * east
    y = params.false_northing + k * north
    return x, y
