"""Dataset manifest records, the reference recording table and the fixed split."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from ..errors import ConfigError
from ..kvfile import header_lines

MANIFEST_KIND = "manifest"

TRAIN_IDS = (1, 4, 10, 11, 16, 19, 20, 30)
TEST_IDS = (6, 8, 14, 15, 21, 22, 24, 26)
APPLICATION_IDS = (2, 3, 5, 7, 9, 12, 13, 17, 18, 23, 25, 27, 28, 29, 31)
SPLITS = {"train": TRAIN_IDS, "test": TEST_IDS, "application": APPLICATION_IDS}


def split_of(dataset_id: int) -> str:
    for name, ids in SPLITS.items():
        if dataset_id in ids:
            return name
    raise ConfigError(f"dataset id {dataset_id} is not part of the split lists")


@dataclass(frozen=True)
class DatasetManifest:
    dataset_id: int
    day: int
    start_time: str
    duration: float  # s
    passing_n: int
    passing_speed: float  # km/h
    entering_n: int
    entering_speed: float  # km/h
    split: str
    tau2: float
    tau3: float


# (id, day, start, duration s, passing n, passing km/h, entering n, entering km/h, tau2, tau3)
_REFERENCE_ROWS = (
    (1, 1, "5:10:30", 325, 281, 74.9, 52, 66.1, 0.75, 7.00),
    (2, 1, "5:15:57", 326, 301, 74.3, 71, 63.5, -0.25, 6.00),
    (3, 1, "5:21:24", 332, 298, 71.0, 71, 62.3, -0.25, 6.75),
    (4, 1, "5:43:57", 326, 312, 67.3, 73, 56.3, 0.50, 9.75),
    (5, 1, "5:49:25", 326, 288, 65.0, 76, 53.3, 0.00, 9.25),
    (6, 1, "5:54:52", 327, 286, 67.3, 68, 56.2, 0.00, 8.75),
    (7, 1, "6:00:22", 98, 28, 68.2, 3, 49.4, 4.50, 13.50),
    (8, 1, "6:04:34", 326, 282, 67.7, 89, 56.3, 1.25, 9.50),
    (9, 1, "6:38:58", 326, 269, 67.4, 64, 56.9, 0.00, 9.00),
    (10, 1, "6:44:26", 85, 63, 48.8, 11, 32.2, -5.00, 9.75),
    (11, 2, "15:10:37", 165, 85, 74.4, 18, 61.7, -0.50, 7.25),
    (12, 2, "15:26:35", 327, 215, 39.2, 33, 33.3, 5.00, 17.25),
    (13, 2, "15:44:39", 327, 233, 66.3, 50, 54.7, 0.00, 9.00),
    (14, 2, "15:50:07", 327, 235, 73.0, 54, 61.0, 0.00, 8.50),
    (15, 2, "15:55:34", 142, 107, 73.3, 29, 63.8, -0.25, 8.25),
    (16, 2, "16:02:44", 327, 250, 73.5, 69, 62.6, -0.25, 7.50),
    (17, 2, "16:08:13", 326, 244, 74.2, 59, 61.4, -0.25, 7.75),
    (18, 2, "16:19:24", 186, 149, 67.3, 37, 61.4, -0.25, 7.75),
    (19, 3, "6:07:22", 327, 300, 65.2, 89, 54.4, -0.75, 9.00),
    (20, 3, "6:12:51", 326, 278, 63.8, 83, 52.2, 4.50, 13.25),
    (21, 3, "7:26:13", 159, 66, 67.4, 7, 58.7, 0.75, 9.75),
    (22, 4, "15:28:14", 326, 221, 72.5, 27, 60.5, 0.00, 8.50),
    (23, 4, "15:33:42", 326, 247, 72.3, 20, 61.9, 0.00, 8.50),
    (24, 4, "15:39:09", 326, 230, 73.7, 15, 62.5, 0.00, 8.25),
    (25, 4, "15:44:36", 168, 76, 67.8, 4, 58.9, -4.50, 4.75),
    (26, 4, "16:06:02", 179, 79, 68.6, 9, 63.23, 0.00, 8.50),
    (27, 4, "16:11:53", 326, 231, 77.3, 31, 62.3, -5.00, 2.75),
    (28, 4, "16:33:19", 327, 231, 74.3, 29, 62.2, 0.00, 7.75),
    (29, 4, "16:38:47", 327, 244, 68.2, 38, 57.1, 0.00, 8.00),
    (30, 4, "16:44:15", 327, 248, 73.0, 34, 62.0, -3.00, 5.00),
    (31, 4, "16:49:45", 274, 171, 68.6, 14, 54.7, 0.00, 8.50),
)

REFERENCE_MANIFEST = tuple(
    DatasetManifest(r[0], r[1], r[2], float(r[3]), r[4], r[5], r[6], r[7], split_of(r[0]), r[8], r[9])
    for r in _REFERENCE_ROWS
)


def split_datasets(manifests) -> dict:
    """Partition manifests into train / test / application by the fixed id lists."""
    manifests = list(manifests)
    ids = [m.dataset_id for m in manifests]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate dataset ids in manifest")
    out = {name: [] for name in SPLITS}
    for m in manifests:
        out[split_of(m.dataset_id)].append(m)
    return out


_FIELDS = [f.name for f in fields(DatasetManifest)]
_TYPES = {f.name: f.type for f in fields(DatasetManifest)}


def write_manifest(path, manifests, meta=None) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines(MANIFEST_KIND, meta=meta):
            fh.write(line + "\n")
        w = csv.DictWriter(fh, fieldnames=_FIELDS)
        w.writeheader()
        for m in manifests:
            w.writerow(asdict(m))


def read_manifest(path) -> list:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"manifest not found: {path}")
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(f"# junctionflow {MANIFEST_KIND} "):
        raise ConfigError(f"{path}: not a manifest file")
    body = [line for line in lines if not line.startswith("#")]
    out = []
    for row in csv.DictReader(body):
        try:
            vals = {
                k: (int(v) if _TYPES[k] == "int" else float(v) if _TYPES[k] == "float" else v)
                for k, v in row.items()
            }
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"{path}: bad manifest row {row}: {exc}") from None
        out.append(DatasetManifest(**vals))
    return out
