"""File formats. Everything on disk is 1-based (vertices and contexts)."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .bits import iter_bits, to_mask
from .errors import DataError, MalformedGraphError
from .graph import Dag
from .intervention import ContextIntervention, InterventionCollection
from .score import MultiEnvDataset


def git_blob_hash(data: bytes) -> str:
    """Content hash in the same form git uses for blobs."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def file_hash(path) -> str:
    return git_blob_hash(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# edge lists

def format_edges(pairs, q: int | None = None) -> str:
    lines = [] if q is None else [f"# q {q}"]
    lines += [f"{u + 1} {v + 1}" for u, v in pairs]
    return "\n".join(lines) + "\n"


def edges_from_adjacency(adj) -> list[tuple[int, int]]:
    a = np.asarray(adj)
    return [(int(u), int(v)) for u, v in zip(*np.nonzero(a))]


def parse_edges(text: str) -> tuple[int | None, list[tuple[int, int]]]:
    q = None
    edges = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "q":
                q = int(parts[1])
            continue
        parts = line.split()
        if len(parts) != 2:
            raise MalformedGraphError(f"line {n}: expected 'u v', got {raw!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise MalformedGraphError(f"line {n}: vertices must be integers") from None
        if u < 1 or v < 1:
            raise MalformedGraphError(f"line {n}: vertices are 1-based")
        edges.append((u - 1, v - 1))
    return q, edges


def read_edges(path) -> tuple[int | None, list[tuple[int, int]]]:
    return parse_edges(Path(path).read_text())


# ---------------------------------------------------------------------------
# interventions

def interventions_to_json(I: InterventionCollection) -> dict:
    ctx = []
    for c in I:
        ctx.append({
            "k": c.k + 1,
            "targets": [j + 1 for j in sorted(c.targets)],
            "parents": {str(j + 1): [i + 1 for i in iter_bits(m)] for j, m in c.items},
        })
    return {"K": len(I), "contexts": ctx}


def interventions_from_json(obj: dict) -> InterventionCollection:
    try:
        K = int(obj["K"])
        items = obj.get("contexts", [])
    except (KeyError, TypeError, ValueError):
        raise DataError("intervention JSON needs an integer 'K' and a 'contexts' list") from None
    if K < 1:
        raise DataError("K must be at least 1")
    per = [dict() for _ in range(K)]
    seen = set()
    for c in items:
        k = int(c["k"]) - 1
        if not 0 <= k < K or k in seen:
            raise DataError(f"context index {k + 1} out of range or repeated")
        seen.add(k)
        targets = {int(t) - 1 for t in c.get("targets", [])}
        parents = {int(j) - 1: [int(i) - 1 for i in ps] for j, ps in c.get("parents", {}).items()}
        if set(parents) - targets:
            raise DataError(f"context {k + 1}: parents given for non-targets")
        if k == 0 and targets:
            raise DataError("context 1 is observational and cannot have targets")
        per[k] = {j: parents.get(j, []) for j in targets}
    return InterventionCollection([ContextIntervention(k, per[k]) for k in range(K)])


def read_interventions(path) -> InterventionCollection:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: invalid JSON ({e})") from None
    return interventions_from_json(obj)


def state_to_json(d: Dag, I: InterventionCollection) -> dict:
    return {"edges": [[u + 1, v + 1] for u, v in d.edges()], **interventions_to_json(I)}


# ---------------------------------------------------------------------------
# data

def ingest(path) -> tuple[MultiEnvDataset, list[str]]:
    """Read a CSV whose first column is ``context`` (1..K) followed by numeric columns.

    Returns the dataset and a list of warnings (contexts without rows).
    """
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as e:
        raise DataError(f"cannot read {path}: {e.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if not header or header[0].strip() != "context":
            raise DataError(f"{path}: first header column must be 'context'")
        q = len(header) - 1
        if q < 1:
            raise DataError(f"{path}: no variable columns")
        rows: dict[int, list[list[float]]] = {}
        for r, row in enumerate(reader, start=2):
            if not row or all(not x.strip() for x in row):
                continue
            if len(row) != q + 1:
                raise DataError(f"{path}: row {r} has {len(row)} fields, expected {q + 1}")
            try:
                k = int(row[0])
            except ValueError:
                raise DataError(f"{path}: row {r}, column 1 (context): {row[0]!r} is not an integer") from None
            if k < 1:
                raise DataError(f"{path}: row {r}: context labels start at 1")
            vals = []
            for c, x in enumerate(row[1:], start=2):
                try:
                    v = float(x)
                except ValueError:
                    raise DataError(f"{path}: row {r}, column {c} ({header[c - 1]}): {x!r} is not numeric") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}: row {r}, column {c} ({header[c - 1]}): value is not finite")
                vals.append(v)
            rows.setdefault(k, []).append(vals)
    if 1 not in rows:
        raise DataError(f"{path}: context 1 (observational) has no rows; it must be present")
    K = max(rows)
    warnings = [f"context {k} has no rows" for k in range(1, K + 1) if k not in rows]
    blocks = [np.array(rows.get(k, []), dtype=float).reshape(-1, q) for k in range(1, K + 1)]
    return MultiEnvDataset(blocks), warnings


def write_data_csv(path, blocks) -> None:
    q = blocks[0].shape[1]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["context"] + [f"X{j + 1}" for j in range(q)])
        for k, b in enumerate(blocks, start=1):
            for row in b:
                w.writerow([k] + [repr(float(x)) for x in row])


def write_matrix_csv(path, M, fmt: str = "{:.6f}") -> None:
    with Path(path).open("w", newline="") as fh:
        for row in np.asarray(M):
            fh.write(",".join(fmt.format(x) for x in row) + "\n")


def dump_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def dag_from_edges(q: int, edges) -> Dag:
    pa = [0] * q
    for u, v in edges:
        if u >= q or v >= q:
            raise MalformedGraphError(f"edge ({u + 1}, {v + 1}) out of range for q={q}")
        pa[v] |= 1 << u
    return Dag(pa)


def mask_list(mask: int) -> list[int]:
    return [j + 1 for j in iter_bits(mask)]


def list_mask(xs) -> int:
    return to_mask(int(x) - 1 for x in xs)
