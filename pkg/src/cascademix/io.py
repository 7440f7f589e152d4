"""On-disk formats.

* cascades: CSV ``cascade_id,node_id,time`` with one row per activated node;
  censored nodes are implicit. ``N``, ``T`` and the cascade count live in the
  JSON sidecar.
* networks: CSV edge list ``src,dst,weight`` (nonzero entries only).
* pi: CSV ``node_id,pi``.
* indicators: CSV ``cascade_id,z_0,...,z_{N-1}``.

Floats are written with 17 significant digits so reading back is exact.
Every data file ``x.csv`` gets a sidecar ``x.csv.json`` holding its shape,
the tool version and the hash of the producing configuration.
"""

from __future__ import annotations

import csv
import hashlib
import json
from importlib import metadata
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .likelihood import CascadeSet

FLOAT_FMT = ".17g"


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:  # pragma: no cover - source checkout
        return "0+unknown"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def file_digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _fmt(x: float) -> str:
    return format(float(x), FLOAT_FMT)


def sidecar_path(path: Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_sidecar(path: Path, kind: str, chash: str, **fields) -> None:
    meta = {"kind": kind, "tool_version": tool_version(), "config_hash": chash, **fields}
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_sidecar(path: Path, kind: str) -> dict:
    if not Path(path).is_file():
        raise ValidationError(f"no such file: {path}")
    side = sidecar_path(path)
    if not side.is_file():
        raise ValidationError(f"missing sidecar {side}")
    try:
        meta = json.loads(side.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"bad sidecar {side}: {exc}") from exc
    if meta.get("kind") != kind:
        raise ValidationError(f"{path} holds {meta.get('kind')!r} data, expected {kind!r}")
    return meta


def _rows(path: Path, header: list[str]) -> list[list[str]]:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first != header:
            raise ValidationError(f"{path}: expected header {','.join(header)}")
        return [row for row in reader if row]


def _write_rows(path: Path, header: list[str], rows) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


# --- cascades ---------------------------------------------------------------

CASCADE_HEADER = ["cascade_id", "node_id", "time"]


def write_cascades(path: Path, cascades: CascadeSet, chash: str = "") -> None:
    t = cascades.times
    rows = []
    for c in range(cascades.n_cascades):
        active = np.flatnonzero(t[c] < cascades.window)
        for i in active[np.lexsort((active, t[c, active]))]:
            rows.append([c, int(i), _fmt(t[c, i])])
    _write_rows(path, CASCADE_HEADER, rows)
    write_sidecar(path, "cascades", chash, n_nodes=cascades.n_nodes,
                  window=cascades.window, n_cascades=cascades.n_cascades)


def read_cascades(path: Path) -> CascadeSet:
    meta = read_sidecar(path, "cascades")
    try:
        n, c, window = int(meta["n_nodes"]), int(meta["n_cascades"]), float(meta["window"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"cascade sidecar is incomplete: {exc}") from exc
    times = np.full((c, n), window)
    seen = np.zeros((c, n), dtype=bool)
    for row in _rows(path, CASCADE_HEADER):
        try:
            cid, node, t = int(row[0]), int(row[1]), float(row[2])
        except (IndexError, ValueError) as exc:
            raise ValidationError(f"{path}: malformed row {row}") from exc
        if not (0 <= cid < c and 0 <= node < n):
            raise ValidationError(f"{path}: row {row} is out of range")
        if seen[cid, node]:
            raise ValidationError(f"{path}: node {node} appears twice in cascade {cid}")
        if not t < window:
            raise ValidationError(f"{path}: activation time {t} is not inside the window")
        seen[cid, node] = True
        times[cid, node] = t
    return CascadeSet(times.reshape(c, n), window)


# --- networks, pi, indicators ---------------------------------------------------

NETWORK_HEADER = ["src", "dst", "weight"]


def write_network(path: Path, net: np.ndarray, chash: str = "") -> None:
    net = np.asarray(net, dtype=float)
    src, dst = np.nonzero(net)
    _write_rows(path, NETWORK_HEADER, ([int(j), int(i), _fmt(net[j, i])] for j, i in zip(src, dst)))
    write_sidecar(path, "network", chash, n_nodes=int(net.shape[0]))


def read_network(path: Path) -> np.ndarray:
    meta = read_sidecar(path, "network")
    n = int(meta["n_nodes"])
    net = np.zeros((n, n))
    for row in _rows(path, NETWORK_HEADER):
        try:
            j, i, w = int(row[0]), int(row[1]), float(row[2])
        except (IndexError, ValueError) as exc:
            raise ValidationError(f"{path}: malformed row {row}") from exc
        if not (0 <= j < n and 0 <= i < n):
            raise ValidationError(f"{path}: edge {row} is out of range")
        net[j, i] = w
    return net


PI_HEADER = ["node_id", "pi"]


def write_pi(path: Path, pi: np.ndarray, chash: str = "") -> None:
    pi = np.asarray(pi, dtype=float)
    _write_rows(path, PI_HEADER, ([i, _fmt(p)] for i, p in enumerate(pi)))
    write_sidecar(path, "pi", chash, n_nodes=int(pi.size))


def read_pi(path: Path) -> np.ndarray:
    meta = read_sidecar(path, "pi")
    n = int(meta["n_nodes"])
    pi = np.full(n, np.nan)
    for row in _rows(path, PI_HEADER):
        try:
            i, p = int(row[0]), float(row[1])
        except (IndexError, ValueError) as exc:
            raise ValidationError(f"{path}: malformed row {row}") from exc
        if not 0 <= i < n:
            raise ValidationError(f"{path}: node {i} is out of range")
        pi[i] = p
    if np.isnan(pi).any():
        raise ValidationError(f"{path}: missing pi values")
    return pi


def write_indicators(path: Path, z: np.ndarray, chash: str = "") -> None:
    z = np.asarray(z, dtype=bool)
    n = z.shape[1] if z.ndim == 2 else 0
    header = ["cascade_id"] + [f"z_{i}" for i in range(n)]
    _write_rows(path, header, ([c, *row.astype(int).tolist()] for c, row in enumerate(z)))
    write_sidecar(path, "indicators", chash, n_nodes=n, n_cascades=int(z.shape[0]))


def read_indicators(path: Path) -> np.ndarray:
    meta = read_sidecar(path, "indicators")
    n, c = int(meta["n_nodes"]), int(meta["n_cascades"])
    rows = _rows(path, ["cascade_id"] + [f"z_{i}" for i in range(n)])
    z = np.zeros((c, n), dtype=bool)
    for row in rows:
        z[int(row[0])] = [v == "1" for v in row[1:]]
    return z


def write_table(path: Path, header: list[str], rows, kind: str, chash: str = "", **fields) -> None:
    """Generic numeric table (traces, tuning scores) with a sidecar."""
    _write_rows(path, header, ([_fmt(v) if isinstance(v, float) else v for v in row] for row in rows))
    write_sidecar(path, kind, chash, **fields)


def write_manifest(out_dir: Path, command: str, config: dict, files: list[Path]) -> Path:
    """``manifest.json`` listing the run configuration and a digest of every output file."""
    out_dir = Path(out_dir)
    manifest = {
        "command": command,
        "tool_version": tool_version(),
        "config": config,
        "config_hash": config_hash(config),
        "files": {Path(f).name: file_digest(f) for f in sorted(files, key=lambda p: Path(p).name)},
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
