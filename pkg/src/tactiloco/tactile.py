"""Tactile array model: pressure grids, contact descriptors, forward contact synthesis.

The sensing array is 32 taxels along the long (66 mm) axis and 12 taxels
along the short (25 mm) axis.  Grids are stored as numpy arrays of shape
(12, 32), i.e. ``cells[row, col]`` with columns along the long axis.
All descriptor geometry is expressed in millimetres in the sensing plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

N_COLS = 32                      # long axis
N_ROWS = 12                      # short axis
SENSOR_WIDTH_MM = 66.0           # along columns
SENSOR_HEIGHT_MM = 25.0          # along rows
PITCH_U_MM = SENSOR_WIDTH_MM / N_COLS
PITCH_V_MM = SENSOR_HEIGHT_MM / N_ROWS
TAXEL_AREA_MM2 = PITCH_U_MM * PITCH_V_MM
MAX_AREA_MM2 = SENSOR_WIDTH_MM * SENSOR_HEIGHT_MM
SENSOR_CENTER_MM = (SENSOR_WIDTH_MM / 2.0, SENSOR_HEIGHT_MM / 2.0)

DEFAULT_THRESHOLD = 0.1

# Forward model calibration for a compliant sensor pad: even light grips
# (normalized force ~0.1, sub-millimetre closure overlap) must produce a
# patch spanning a few taxels, otherwise gentle contacts are invisible to
# the 12x24 array and the tactile channel carries no signal exactly where
# it matters most (fragile-object handling).
_CONTACT_AREA_GAIN = 150.0       # mm^2 per (mm overlap * unit force)
_PATCH_ASPECT = 2.0              # major/minor axis ratio of synthetic patches


@dataclass
class TactileFrame:
    """One pressure image from the array, values normalized to [0, 1]."""

    cells: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.float64)
        if self.cells.shape != (N_ROWS, N_COLS):
            raise ValueError(f"tactile grid must be {N_ROWS}x{N_COLS}, got {self.cells.shape}")
        if np.any(self.cells < 0.0) or np.any(self.cells > 1.0):
            raise ValueError("tactile cell values must lie in [0, 1]")

    @classmethod
    def zeros(cls, timestamp: float = 0.0) -> "TactileFrame":
        return cls(np.zeros((N_ROWS, N_COLS)), timestamp)

    def to_csv_row(self) -> str:
        # timestamp followed by 384 values, row-major (row 0 col 0 ... row 11 col 31)
        vals = ",".join(repr(float(v)) for v in self.cells.reshape(-1))
        return f"{float(self.timestamp)!r},{vals}"

    @classmethod
    def from_csv_row(cls, row: str) -> "TactileFrame":
        parts = row.strip().split(",")
        if len(parts) != 1 + N_ROWS * N_COLS:
            raise ValueError(f"expected {1 + N_ROWS * N_COLS} fields, got {len(parts)}")
        ts = float(parts[0])
        cells = np.array([float(p) for p in parts[1:]]).reshape(N_ROWS, N_COLS)
        return cls(cells, ts)


@dataclass
class ContactDescriptor:
    """Low-dimensional contact summary: area (mm^2), orientation (rad), center (mm)."""

    area_mm2: float
    theta_rad: float
    center_mm: tuple[float, float]

    @classmethod
    def null(cls) -> "ContactDescriptor":
        return cls(0.0, 0.0, SENSOR_CENTER_MM)

    def as_array(self) -> np.ndarray:
        return np.array([self.area_mm2, self.theta_rad, self.center_mm[0], self.center_mm[1]])


@dataclass
class TactileCommand:
    """Descriptor packed into R^4 with every channel min-max normalized to [0, 1]."""

    values: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.5, 0.5, 0.5]))

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (4,):
            raise ValueError("tactile command must have exactly 4 channels")


def _cell_centers_mm() -> tuple[np.ndarray, np.ndarray]:
    u = (np.arange(N_COLS) + 0.5) * PITCH_U_MM
    v = (np.arange(N_ROWS) + 0.5) * PITCH_V_MM
    return np.meshgrid(u, v)   # each (N_ROWS, N_COLS)


_UU, _VV = _cell_centers_mm()


def extract_descriptor(frame: TactileFrame, threshold: float = DEFAULT_THRESHOLD) -> ContactDescriptor:
    """Area / orientation / center of the super-threshold contact patch.

    Returns the null descriptor (area 0, theta 0, center = sensor center)
    when no cell reaches the threshold.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    active = frame.cells >= threshold
    n_active = int(np.count_nonzero(active))
    if n_active == 0:
        return ContactDescriptor.null()

    w = np.where(active, frame.cells, 0.0)
    total = w.sum()
    cu = float((w * _UU).sum() / total)
    cv = float((w * _VV).sum() / total)

    du = _UU - cu
    dv = _VV - cv
    # pressure-weighted second central moments
    muu = float((w * du * du).sum() / total)
    mvv = float((w * dv * dv).sum() / total)
    muv = float((w * du * dv).sum() / total)
    theta = _principal_angle(muu, mvv, muv)

    return ContactDescriptor(n_active * TAXEL_AREA_MM2, theta, (cu, cv))


def _principal_angle(muu: float, mvv: float, muv: float) -> float:
    """Angle of the largest principal axis of [[muu, muv], [muv, mvv]], in [-pi/2, pi/2)."""
    m = np.array([[muu, muv], [muv, mvv]])
    evals, evecs = np.linalg.eigh(m)
    if abs(evals[1] - evals[0]) < 1e-9:
        return 0.0          # degenerate (circular) patch: deterministic tie-break
    major = evecs[:, 1]     # eigh sorts ascending
    theta = math.atan2(major[1], major[0])
    return wrap_half_pi(theta)


def wrap_half_pi(theta: float) -> float:
    """Wrap an angle into [-pi/2, pi/2); a contact line has no head or tail."""
    t = (theta + math.pi / 2.0) % math.pi - math.pi / 2.0
    if t >= math.pi / 2.0:   # guard fp edge
        t -= math.pi
    return t


def render_contact(
    object_width_mm: float,
    gripper_width_mm: float,
    grip_force: float,
    offset_mm: tuple[float, float] = SENSOR_CENTER_MM,
    patch_orientation: float = 0.0,
    timestamp: float = 0.0,
) -> TactileFrame:
    """Synthesize the pressure image of gripping an object.

    Contact patch is an ellipse centered at ``offset_mm`` with its major
    axis at ``patch_orientation``.  Patch area grows linearly with grip
    force and with the closure overlap (how far the gripper aperture has
    closed past the object width).  Zero force gives a blank frame.
    """
    if not 0.0 <= grip_force <= 1.0:
        raise ValueError("grip_force must lie in [0, 1]")
    overlap = max(0.0, object_width_mm - gripper_width_mm)
    area = _CONTACT_AREA_GAIN * grip_force * overlap
    if grip_force == 0.0 or area <= 0.0:
        return TactileFrame.zeros(timestamp)
    area = min(area, 0.8 * MAX_AREA_MM2)

    # ellipse semi-axes: a*b*pi = area, a = _PATCH_ASPECT * b
    b = math.sqrt(area / (math.pi * _PATCH_ASPECT))
    a = _PATCH_ASPECT * b

    ct, st = math.cos(patch_orientation), math.sin(patch_orientation)
    du = _UU - offset_mm[0]
    dv = _VV - offset_mm[1]
    xr = ct * du + st * dv
    yr = -st * du + ct * dv
    r2 = (xr / a) ** 2 + (yr / b) ** 2

    peak = 0.3 + 0.7 * grip_force
    # flat-topped profile: everything inside the ellipse stays well above the
    # activation threshold so the extracted area matches the geometric area
    cells = np.where(r2 <= 1.0, peak * (1.0 - 0.25 * r2), 0.0)
    return TactileFrame(np.clip(cells, 0.0, 1.0), timestamp)


# --- normalization: fixed affine maps per channel -------------------------

_AREA_RANGE = (0.0, MAX_AREA_MM2)
_THETA_RANGE = (-math.pi / 2.0, math.pi / 2.0)
_CU_RANGE = (0.0, SENSOR_WIDTH_MM)
_CV_RANGE = (0.0, SENSOR_HEIGHT_MM)
_RANGES = (_AREA_RANGE, _THETA_RANGE, _CU_RANGE, _CV_RANGE)


def normalize_command(d: ContactDescriptor) -> TactileCommand:
    raw = d.as_array()
    vals = np.array([(raw[i] - lo) / (hi - lo) for i, (lo, hi) in enumerate(_RANGES)])
    return TactileCommand(vals)


def denormalize_command(s: TactileCommand) -> ContactDescriptor:
    raw = np.array([lo + s.values[i] * (hi - lo) for i, (lo, hi) in enumerate(_RANGES)])
    return ContactDescriptor(float(raw[0]), float(raw[1]), (float(raw[2]), float(raw[3])))


def descriptor_error(s_cmd: TactileCommand, s: TactileCommand) -> float:
    """Squared norm of the normalized command/measurement difference."""
    d = s_cmd.values - s.values
    return float(d @ d)


def descriptor_csv_header() -> str:
    return "t,m_mm2,theta_rad,cu_mm,cv_mm"


def descriptor_csv_row(t: float, d: ContactDescriptor) -> str:
    return f"{t!r},{d.area_mm2!r},{d.theta_rad!r},{d.center_mm[0]!r},{d.center_mm[1]!r}"
