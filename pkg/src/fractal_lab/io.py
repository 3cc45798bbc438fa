"""Plain-text artifact formats: CSV tables, PGM rasters, JSON records.

Floats are written with 17 significant digits so a read-back reproduces
the stored doubles exactly, and every writer emits bytes that depend only
on its inputs.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import InvalidArgument


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidArgument(f"{path}: empty CSV")
    return rows[0], rows[1:]


def write_points_csv(path, points, times=None) -> Path:
    """Curve samples as columns x0, x1, ... plus t when times are given."""
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    header = [f"x{i}" for i in range(P.shape[1])]
    cols = [P]
    if times is not None:
        header.append("t")
        cols.append(np.asarray(times, dtype=float)[:, None])
    return write_csv(path, header, np.hstack(cols).tolist())


def read_points_csv(path) -> tuple[np.ndarray, np.ndarray | None]:
    header, rows = read_csv(path)
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    if header and header[-1] == "t":
        return data[:, :-1], data[:, -1]
    return data, None


def write_driver_csv(path, driver) -> Path:
    t = driver.times
    V = driver.V if driver.V is not None else np.full(t.shape, math.nan)
    return write_csv(path, ["t", "W", "V"], zip(t.tolist(), driver.W.tolist(), V.tolist()))


def write_polylines_csv(path, polylines, id_name: str = "loop_id") -> Path:
    """Several polylines in one long table: id, vertex_index, x, y."""

    def rows():
        for i, poly in enumerate(polylines):
            P = np.asarray(poly, dtype=float)
            for j, (x, y) in enumerate(P.tolist()):
                yield i, j, x, y

    return write_csv(path, [id_name, "vertex_index", "x", "y"], rows())


def read_polylines_csv(path) -> list[np.ndarray]:
    _, rows = read_csv(path)
    out: dict[int, list] = {}
    for r in rows:
        out.setdefault(int(r[0]), []).append((float(r[2]), float(r[3])))
    return [np.array(out[k]) for k in sorted(out)]


def write_pgm(path, image, binary: bool = True) -> Path:
    """8-bit greyscale PGM, P5 (binary) or P2 (ASCII); row 0 is the top row."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise InvalidArgument("PGM export needs a 2-d raster")
    img = np.clip(img, 0, 255).astype(np.uint8)
    h, w = img.shape
    path = Path(path)
    if binary:
        path.write_bytes(b"P5\n%d %d\n255\n" % (w, h) + img.tobytes())
    else:
        lines = [f"P2\n{w} {h}\n255"] + [" ".join(map(str, row)) for row in img.tolist()]
        path.write_text("\n".join(lines) + "\n")
    return path


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    fields = []
    pos = 0
    while len(fields) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end : end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if maxval > 255:
        raise InvalidArgument("only 8-bit PGM is supported")
    if magic == b"P5":
        return np.frombuffer(data[pos + 1 : pos + 1 + w * h], dtype=np.uint8).reshape(h, w).copy()
    if magic == b"P2":
        return np.array(data[pos:].split(), dtype=np.uint8).reshape(h, w)
    raise InvalidArgument(f"not a PGM file: magic {magic!r}")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return obj


def write_json(path, record) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(record), indent=2, sort_keys=True) + "\n")
    return path


def read_json(path):
    return json.loads(Path(path).read_text())
