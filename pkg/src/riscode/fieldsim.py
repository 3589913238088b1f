"""Received-power simulation for a fixed Tx-RIS geometry.

Channel model: narrowband spherical-wave double path.  Element (m, n) at
position p contributes

    h = amplitude_scale / (d1 * d2) * exp(-i * 2*pi * (d1 + d2) / wavelength)

with d1 = |tx - p| and d2 = |rx - p|.  No line-of-sight term (the direct
path is assumed blocked), no element radiation pattern, no mutual
coupling.  A 1-bit element multiplies its gain by the codebook entry
(+1/-1, i.e. a 0 or pi phase shift); the received field is the complex sum
over elements and the linear power its squared magnitude.  The milliwatt
reference of the dBm scale is folded into ``amplitude_scale``.

All functions are pure: identical inputs give bit-identical outputs.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .codebook import Codebook
from .errors import DegenerateGeometry, DimensionMismatch, ParseError

__all__ = [
    "ScenarioGeometry",
    "GainMatrix",
    "element_positions",
    "channel_gains",
    "received_power",
    "received_power_linear",
    "power_from_gains",
    "MIN_DISTANCE_M",
]

# Distances below this are treated as "receiver/transmitter on the panel".
MIN_DISTANCE_M = 1e-6

# Complex per-element field contributions for one receiver position, shape (M, N).
GainMatrix = np.ndarray

_UNIT_TOL = 1e-9


def _vec3(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise DimensionMismatch(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass(eq=False)
class ScenarioGeometry:
    """Transmitter/RIS geometry and radio parameters of the simulated link.

    All lengths in meters, right-handed coordinates.  ``row_axis`` and
    ``col_axis`` are the orthonormal in-plane directions along which the
    element row and column indices advance; the panel normal is their
    cross product.  ``amplitude_scale`` is the dimensionless calibration
    constant mapping the field sum to power units (dBm zero point).
    """

    tx_position: np.ndarray
    ris_center: np.ndarray
    row_axis: np.ndarray
    col_axis: np.ndarray
    rows: int
    cols: int
    element_spacing: float
    wavelength: float
    amplitude_scale: float = 1.0

    def __post_init__(self):
        self.tx_position = _vec3(self.tx_position, "tx_position")
        self.ris_center = _vec3(self.ris_center, "ris_center")
        self.row_axis = _vec3(self.row_axis, "row_axis")
        self.col_axis = _vec3(self.col_axis, "col_axis")
        self.rows = int(self.rows)
        self.cols = int(self.cols)
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"panel dims must be >= 1, got {self.rows}x{self.cols}")
        if not self.element_spacing > 0:
            raise ValueError("element_spacing must be > 0")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be > 0")
        if not self.amplitude_scale > 0:
            raise ValueError("amplitude_scale must be > 0")
        if abs(np.linalg.norm(self.row_axis) - 1.0) > _UNIT_TOL:
            raise ValueError("row_axis must be unit length")
        if abs(np.linalg.norm(self.col_axis) - 1.0) > _UNIT_TOL:
            raise ValueError("col_axis must be unit length")
        if abs(float(self.row_axis @ self.col_axis)) > _UNIT_TOL:
            raise ValueError("row_axis and col_axis must be orthogonal")
        normal = np.cross(self.row_axis, self.col_axis)
        if abs(float((self.tx_position - self.ris_center) @ normal)) <= 0.0:
            raise DegenerateGeometry("tx_position lies in the RIS panel plane")
        for v in (self.tx_position, self.ris_center, self.row_axis, self.col_axis):
            v.setflags(write=False)

    @property
    def normal(self) -> np.ndarray:
        return np.cross(self.row_axis, self.col_axis)

    def to_dict(self) -> dict:
        return {
            "tx_position": [float(v) for v in self.tx_position],
            "ris_center": [float(v) for v in self.ris_center],
            "row_axis": [float(v) for v in self.row_axis],
            "col_axis": [float(v) for v in self.col_axis],
            "rows": self.rows,
            "cols": self.cols,
            "element_spacing": float(self.element_spacing),
            "wavelength": float(self.wavelength),
            "amplitude_scale": float(self.amplitude_scale),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioGeometry":
        try:
            return cls(
                tx_position=data["tx_position"],
                ris_center=data["ris_center"],
                row_axis=data["row_axis"],
                col_axis=data["col_axis"],
                rows=data["rows"],
                cols=data["cols"],
                element_spacing=data["element_spacing"],
                wavelength=data["wavelength"],
                amplitude_scale=data.get("amplitude_scale", 1.0),
            )
        except KeyError as exc:
            raise ParseError(f"geometry config missing key {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioGeometry":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid geometry JSON: {exc}") from exc
        return cls.from_dict(data)

    def __eq__(self, other) -> bool:
        return isinstance(other, ScenarioGeometry) and self.to_dict() == other.to_dict()


def element_positions(geom: ScenarioGeometry) -> np.ndarray:
    """3-D center positions of all elements, shape (M, N, 3).

    Element (m, n), 1-indexed, sits at
    ``ris_center + (m - (M+1)/2) * spacing * row_axis
                 + (n - (N+1)/2) * spacing * col_axis``,
    so the panel is centered on ``ris_center``.
    """
    m_off = (np.arange(1, geom.rows + 1) - (geom.rows + 1) / 2.0) * geom.element_spacing
    n_off = (np.arange(1, geom.cols + 1) - (geom.cols + 1) / 2.0) * geom.element_spacing
    return (
        geom.ris_center[None, None, :]
        + m_off[:, None, None] * geom.row_axis[None, None, :]
        + n_off[None, :, None] * geom.col_axis[None, None, :]
    )


def channel_gains(
    geom: ScenarioGeometry, v, min_distance: float = MIN_DISTANCE_M
) -> GainMatrix:
    """Per-element complex channel gains for receiver position ``v``.

    Raises DegenerateGeometry when any Tx-element or element-receiver
    distance falls below ``min_distance``.
    """
    rx = _vec3(v, "receiver position")
    pos = element_positions(geom)
    d1 = np.linalg.norm(geom.tx_position[None, None, :] - pos, axis=-1)
    d2 = np.linalg.norm(rx[None, None, :] - pos, axis=-1)
    dmin = min(float(d1.min()), float(d2.min()))
    if dmin < min_distance:
        raise DegenerateGeometry(
            f"path distance {dmin:.3e} m below minimum {min_distance:.3e} m"
        )
    total = d1 + d2
    return (geom.amplitude_scale / (d1 * d2)) * np.exp(
        -2j * np.pi * total / geom.wavelength
    )


def power_from_gains(gains: GainMatrix, cb: Codebook) -> float:
    """Linear received power |sum(cb * h)|^2 for precomputed gains."""
    if cb.entries.shape != gains.shape:
        raise DimensionMismatch(
            f"codebook shape {cb.entries.shape} != gain shape {gains.shape}"
        )
    e = np.sum(gains * cb.entries)
    return float(e.real * e.real + e.imag * e.imag)


def received_power_linear(geom: ScenarioGeometry, v, cb: Codebook) -> float:
    """Linear-scale received power at ``v`` under codebook ``cb``."""
    if cb.entries.shape != (geom.rows, geom.cols):
        raise DimensionMismatch(
            f"codebook shape {cb.entries.shape} != panel {geom.rows}x{geom.cols}"
        )
    return power_from_gains(channel_gains(geom, v), cb)


def received_power(geom: ScenarioGeometry, v, cb: Codebook) -> float:
    """Received power in dBm (10*log10 of the linear power).

    Returns -inf for an exactly cancelled field.
    """
    return linear_to_dbm(received_power_linear(geom, v, cb))


def linear_to_dbm(power_linear: float) -> float:
    if power_linear == 0.0:
        return float("-inf")
    return 10.0 * float(np.log10(power_linear))
