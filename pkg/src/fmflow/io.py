"""CSV series and JSON manifest emission.

Every numeric series goes to CSV with a header row and 17-significant-
digit floats so that reruns reproduce files byte for byte; every run
directory gets a JSON manifest listing the outputs with content hashes.
"""

import hashlib
import importlib.metadata
import json
import platform

import numpy as np

from .flux_solver import FluxHistory

FLOAT_FMT = "%.17g"


def write_columns(path, names, columns):
    """Write equal-length 1-D arrays as CSV columns."""
    cols = [np.asarray(c, dtype=float) for c in columns]
    if len(cols) != len(names):
        raise ValueError("one name per column required")
    arr = np.column_stack(cols)
    np.savetxt(path, arr, fmt=FLOAT_FMT, delimiter=",",
               header=",".join(names), comments="")


def read_columns(path):
    """Read a CSV written by write_columns; returns (names, array)."""
    with open(path, "r", encoding="utf-8") as fh:
        names = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return names, data


def write_flux_csv(path, times, boundary, values, stderr=None):
    """Long-format flux series: one row per (time, boundary point).

    The boundary column holds the wall index (d=1) or the polar angle
    (d=2).  An optional standard-error column serves Monte Carlo
    tallies.
    """
    times = np.asarray(times, dtype=float)
    boundary = np.asarray(boundary, dtype=float)
    values = np.asarray(values, dtype=float)
    nt, nb = values.shape
    tcol = np.repeat(times, nb)
    bcol = np.tile(boundary, nt)
    cols = [tcol, bcol, values.reshape(-1)]
    names = ["t", "boundary", "value"]
    if stderr is not None:
        cols.append(np.asarray(stderr, dtype=float).reshape(-1))
        names.append("stderr")
    write_columns(path, names, cols)


def read_flux_csv(path):
    """Inverse of write_flux_csv.

    Returns (times, boundary, values, stderr) with values shaped
    (n_times, n_boundary); stderr is None when the file has no such
    column.
    """
    names, data = read_columns(path)
    if names[:3] != ["t", "boundary", "value"]:
        raise ValueError(f"{path}: not a flux CSV")
    nb = int(np.count_nonzero(data[:, 0] == data[0, 0]))
    nt = data.shape[0] // nb
    times = data[::nb, 0].copy()
    boundary = data[:nb, 1].copy()
    values = data[:, 2].reshape(nt, nb)
    stderr = data[:, 3].reshape(nt, nb) if "stderr" in names else None
    return times, boundary, values, stderr


def history_from_csv(path, d, meta=None):
    """Rebuild a FluxHistory from a flux CSV written by write_flux_csv."""
    times, boundary, values, _ = read_flux_csv(path)
    theta = boundary if d == 2 else None
    return FluxHistory(d, times, values, theta=theta,
                       meta=dict(meta or {}))


def write_snapshot_csv(path, snapshots):
    """Field moments at one or more times, long format over positions."""
    snaps = list(snapshots)
    d = snaps[0].d
    rows = []
    for snap in snaps:
        pts = np.asarray(snap.points, dtype=float)
        n = len(snap.density)
        xy = pts.reshape(n, -1)
        block = [np.full(n, snap.time)] + [xy[:, j] for j in range(d)]
        block += [snap.density, snap.velocity[:, 0], snap.velocity[:, 1],
                  snap.velocity[:, 2], snap.temperature]
        rows.append(np.column_stack(block))
    names = ["t"] + (["x"] if d == 1 else ["x", "y"])
    names += ["density", "ux", "uy", "uz", "temperature"]
    arr = np.vstack(rows)
    np.savetxt(path, arr, fmt=FLOAT_FMT, delimiter=",",
               header=",".join(names), comments="")


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def text_sha256(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _versions():
    out = {"python": platform.python_version()}
    for name in ("fmflow", "numpy", "scipy", "numba"):
        try:
            out[name] = importlib.metadata.version(name)
        except importlib.metadata.PackageNotFoundError:
            out[name] = None
    return out


def build_manifest(command, config_echo, seed, out_paths, wall_clock,
                   extra=None, status="complete"):
    """Assemble the run manifest: config echo, versions, seeds, output
    hashes, wall-clock."""
    outputs = {}
    for p in out_paths:
        outputs[p.name] = {"sha256": file_sha256(p),
                           "bytes": p.stat().st_size}
    manifest = {"command": command, "config": config_echo, "seed": seed,
                "versions": _versions(), "outputs": outputs,
                "wall_clock_seconds": round(wall_clock, 3),
                "status": status}
    if extra:
        manifest.update(extra)
    return manifest


def write_manifest(path, manifest):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
