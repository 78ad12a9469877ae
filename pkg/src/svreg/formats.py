"""File formats: the .svraw raster pair, manifests, and result exports.

A volume or slice is stored as two files:

* ``name.svraw`` -- the intensity raster, little-endian float32, C order
  with index order [x, y(, z)].
* ``name.json`` -- the sidecar: dims, spacing_mm, origin_mm, axes, and the
  mask file name (little-endian uint8 raster, 1 = valid, same index order).

All JSON written here uses sorted keys and a compact float representation,
so identical inputs always serialize to identical bytes. The full byte
layout is documented in docs/formats.md.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .geometry import RigidTransform
from .imaging import Image2D, Volume3D
from .workflow import FrameInput

SCHEMA_VERSION = 1

RESULTS_CSV_COLUMNS = [
    "frame", "tx", "ty", "tz", "euclidean", "rx", "ry", "rz", "geodesic",
    "tre_mean", "tre_sd", "success", "runtime_ms",
]


def dump_json(data, path):
    """Deterministic JSON write: sorted keys, newline-terminated."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _mask_path(raster_path):
    stem, _ = os.path.splitext(raster_path)
    return stem + ".mask.svraw"


def _sidecar_path(raster_path):
    stem, _ = os.path.splitext(raster_path)
    return stem + ".json"


def write_svraw(img, path):
    """Persist a Volume3D or Image2D as raster + mask + JSON sidecar."""
    raster = np.ascontiguousarray(img.intensities, dtype="<f4")
    raster.tofile(path)
    mask = np.ascontiguousarray(img.mask, dtype="<u1")
    mask_file = _mask_path(path)
    mask.tofile(mask_file)

    if isinstance(img, Volume3D):
        axes = np.eye(3)
    else:
        axes = img.axes
    sidecar = {
        "schema_version": SCHEMA_VERSION,
        "dims": [int(n) for n in img.dims],
        "spacing_mm": img.spacing,
        "origin_mm": [float(x) for x in img.origin],
        "axes": [[float(x) for x in row] for row in axes],
        "mask_file": os.path.basename(mask_file),
    }
    dump_json(sidecar, _sidecar_path(path))


def read_svraw(path):
    """Load a raster pair back into a Volume3D or Image2D."""
    sidecar = load_json(_sidecar_path(path))
    dims = tuple(int(n) for n in sidecar["dims"])
    inten = np.fromfile(path, dtype="<f4").reshape(dims).astype(float)
    mask_file = os.path.join(os.path.dirname(path) or ".", sidecar["mask_file"])
    mask = np.fromfile(mask_file, dtype="<u1").reshape(dims).astype(bool)
    origin = np.asarray(sidecar["origin_mm"], dtype=float)
    spacing = float(sidecar["spacing_mm"])
    if len(dims) == 3:
        return Volume3D(inten, spacing, origin, mask)
    axes = np.asarray(sidecar["axes"], dtype=float)[:2]
    return Image2D(inten, spacing, origin, axes, mask)


def write_landmarks(landmarks, path):
    data = {
        "schema_version": SCHEMA_VERSION,
        "landmarks": {k: [float(x) for x in v] for k, v in landmarks.items()},
    }
    dump_json(data, path)


def read_landmarks(path):
    data = load_json(path)
    return {k: np.asarray(v, dtype=float) for k, v in data["landmarks"].items()}


def write_transform(t, path):
    data = dict(t.to_dict(), schema_version=SCHEMA_VERSION)
    dump_json(data, path)


def read_transform(path):
    return RigidTransform.from_dict(load_json(path))


def write_manifest(entries, path):
    """Frame-sequence manifest: per-frame image path + tracked transform."""
    data = {
        "schema_version": SCHEMA_VERSION,
        "frames": [
            {
                "timestamp": float(e["timestamp"]),
                "image": e["image"],
                "tracked": e["tracked"].to_dict()
                if isinstance(e["tracked"], RigidTransform) else e["tracked"],
            }
            for e in entries
        ],
    }
    dump_json(data, path)


def read_manifest(path):
    """Load a manifest into FrameInput objects (images read relative to it)."""
    data = load_json(path)
    base = os.path.dirname(path) or "."
    frames = []
    for entry in data["frames"]:
        image = read_svraw(os.path.join(base, entry["image"]))
        frames.append(
            FrameInput(
                timestamp=float(entry["timestamp"]),
                image=image,
                tracked=RigidTransform.from_dict(entry["tracked"]),
            )
        )
    return frames


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_results_csv(rows, path):
    """Write evaluation rows with the fixed results schema.

    Rows are dicts keyed by RESULTS_CSV_COLUMNS; missing values become
    empty fields. A leading comment line carries the schema version.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        writer = csv.writer(fh)
        writer.writerow(RESULTS_CSV_COLUMNS)
        for row in rows:
            writer.writerow(
                ["" if row.get(c) is None else _format_value(row.get(c))
                 for c in RESULTS_CSV_COLUMNS]
            )


def read_results_csv(path):
    rows = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    for raw in reader:
        row = {}
        for key, val in raw.items():
            if val == "" or val is None:
                row[key] = None
            elif key == "frame":
                row[key] = int(val)
            elif key == "success":
                row[key] = val == "true"
            else:
                row[key] = float(val)
        rows.append(row)
    return rows


def write_cdf_csv(cdf_pairs, path):
    """Two-column CDF export: threshold_mm, fraction."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        writer = csv.writer(fh)
        writer.writerow(["threshold_mm", "fraction"])
        for threshold, fraction in cdf_pairs:
            writer.writerow([repr(float(threshold)), repr(float(fraction))])
