"""Demonstration dataset container and on-disk formats.

Binary format (little-endian):
  header:  magic b"TLDM", version uint32, tick_rate float32, demo_count uint32
  per demo: record_count uint32, then record_count records of
            13 float32: t, EE pose (px,py,pz,qw,qx,qy,qz), gripper width,
            tactile descriptor (4 normalized channels)

The same records round-trip through CSV (one row per record, demo id in the
first column) for inspection with standard tools.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"TLDM"
VERSION = 1
RECORD_FIELDS = 13   # t + pose(7) + width + tactile(4)

CSV_HEADER = "demo,t,px,py,pz,qw,qx,qy,qz,width,s0,s1,s2,s3"


@dataclass
class Demo:
    """One demonstration: rows of (t, pose7, width, tactile4)."""

    records: np.ndarray          # (n, 13) float64

    def __post_init__(self):
        self.records = np.asarray(self.records, dtype=np.float64)
        if self.records.ndim != 2 or self.records.shape[1] != RECORD_FIELDS:
            raise ValueError(f"demo records must be (n, {RECORD_FIELDS})")

    @property
    def t(self) -> np.ndarray:
        return self.records[:, 0]

    @property
    def poses(self) -> np.ndarray:
        return self.records[:, 1:8]

    @property
    def widths(self) -> np.ndarray:
        return self.records[:, 8]

    @property
    def tactile(self) -> np.ndarray:
        return self.records[:, 9:13]

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0]) if len(self.records) else 0.0


@dataclass
class DemoDataset:
    tick_rate_hz: float
    demos: list[Demo] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.demos)

    def save(self, path: str | Path) -> None:
        path = Path(path)
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<IfI", VERSION, self.tick_rate_hz, len(self.demos)))
            for demo in self.demos:
                fh.write(struct.pack("<I", len(demo.records)))
                fh.write(demo.records.astype("<f4").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "DemoDataset":
        path = Path(path)
        with open(path, "rb") as fh:
            if fh.read(4) != MAGIC:
                raise ValueError(f"{path}: not a demo dataset file")
            version, tick_rate, count = struct.unpack("<IfI", fh.read(12))
            if version != VERSION:
                raise ValueError(f"{path}: unsupported dataset version {version}")
            demos = []
            for _ in range(count):
                (n,) = struct.unpack("<I", fh.read(4))
                buf = fh.read(n * RECORD_FIELDS * 4)
                rec = np.frombuffer(buf, dtype="<f4").reshape(n, RECORD_FIELDS).astype(np.float64)
                demos.append(Demo(rec))
        return cls(tick_rate, demos)

    def save_csv(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            fh.write(f"# tick_rate_hz={self.tick_rate_hz!r}\n")
            fh.write(CSV_HEADER + "\n")
            for k, demo in enumerate(self.demos):
                for row in demo.records:
                    fh.write(f"{k}," + ",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def load_csv(cls, path: str | Path) -> "DemoDataset":
        with open(path) as fh:
            first = fh.readline().strip()
            if not first.startswith("# tick_rate_hz="):
                raise ValueError("missing tick_rate header comment")
            tick_rate = float(first.split("=", 1)[1])
            header = fh.readline().strip()
            if header != CSV_HEADER:
                raise ValueError("unexpected CSV header")
            by_demo: dict[int, list[list[float]]] = {}
            for line in fh:
                parts = line.strip().split(",")
                by_demo.setdefault(int(parts[0]), []).append([float(p) for p in parts[1:]])
        demos = [Demo(np.array(by_demo[k])) for k in sorted(by_demo)]
        return cls(tick_rate, demos)
