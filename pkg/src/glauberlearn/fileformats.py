"""Text formats for models, estimates, trajectories, node samples and reports.

Model file::

    ising 3
    # comment
    J 1 2 0.25
    h 3 -0.5

Indices are 1-based with ``i < j``; unlisted entries are zero.  Values are
written in shortest round-trip form, so a write/read round trip is bit-exact.
Estimates use the same body under the header ``ising-estimate <n>``.

Trajectory file::

    traj <n> <T> <schedule-descriptor> <seed or ->
    0 +-+-
    1 3 | +-++
    ...

Node sample file (M-regime output), one per node::

    samples <n> <node> <count> <source>
    <context as +- string> <label +/->
"""

from __future__ import annotations

import csv
import io
import os
from pathlib import Path

import numpy as np

from .dynamics import NodeSampleSet, Trajectory
from .ising import IsingModel


class FormatError(ValueError):
    """A file does not follow the expected text format."""


def _fmt(x: float) -> str:
    # shortest string that parses back to the same double
    return repr(float(x))


def spins_to_str(x) -> str:
    return "".join("+" if v > 0 else "-" for v in np.asarray(x).tolist())


def str_to_spins(s: str) -> np.ndarray:
    if not s or set(s) - {"+", "-"}:
        raise FormatError(f"bad spin string {s!r}")
    return np.where(np.frombuffer(s.encode(), dtype=np.uint8) == ord("+"), 1, -1).astype(np.int8)


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


# -- models ----------------------------------------------------------------------------------

def format_model(model: IsingModel, header: str = "ising", comments=()) -> str:
    n = model.n
    out = [f"{header} {n}"]
    out += [f"# {c}" for c in comments]
    iu, ju = np.nonzero(np.triu(model.couplings, 1))
    for i, j in zip(iu.tolist(), ju.tolist()):
        out.append(f"J {i + 1} {j + 1} {_fmt(model.couplings[i, j])}")
    for i in np.flatnonzero(model.fields).tolist():
        out.append(f"h {i + 1} {_fmt(model.fields[i])}")
    return "\n".join(out) + "\n"


def parse_model(text: str, header: str | tuple[str, ...] = ("ising", "ising-estimate")) -> IsingModel:
    headers = (header,) if isinstance(header, str) else header
    lines = _content_lines(text)
    try:
        lineno, first = next(lines)
    except StopIteration:
        raise FormatError("empty model file") from None
    parts = first.split()
    if len(parts) != 2 or parts[0] not in headers:
        raise FormatError(f"line {lineno}: expected '{headers[0]} <n>', got {first!r}")
    try:
        n = int(parts[1])
    except ValueError:
        raise FormatError(f"line {lineno}: bad size {parts[1]!r}") from None
    if n < 1:
        raise FormatError(f"line {lineno}: n must be positive")
    A = np.zeros((n, n))
    h = np.zeros(n)
    for lineno, line in lines:
        parts = line.split()
        try:
            if parts[0] == "J" and len(parts) == 4:
                i, j, v = int(parts[1]) - 1, int(parts[2]) - 1, float(parts[3])
                if not (0 <= i < j < n):
                    raise FormatError(f"line {lineno}: need 1 <= i < j <= {n}")
                A[i, j] = A[j, i] = v
            elif parts[0] == "h" and len(parts) == 3:
                i, v = int(parts[1]) - 1, float(parts[2])
                if not 0 <= i < n:
                    raise FormatError(f"line {lineno}: site out of range")
                h[i] = v
            else:
                raise FormatError(f"line {lineno}: unrecognized entry {line!r}")
        except ValueError as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"line {lineno}: {exc}") from None
    return IsingModel(A, h)


def write_model(path, model: IsingModel, header: str = "ising", comments=()) -> None:
    Path(path).write_text(format_model(model, header, comments))


def read_model(path) -> IsingModel:
    return parse_model(Path(path).read_text())


def write_estimate(path, estimate) -> None:
    prov = getattr(estimate, "provenance", {}) or {}
    comments = [f"{k}={prov[k]}" for k in sorted(prov)]
    write_model(path, estimate.to_model(), "ising-estimate", comments)


# -- trajectories ----------------------------------------------------------------------------

def format_trajectory(traj: Trajectory) -> str:
    buf = io.StringIO()
    seed = "-" if traj.seed is None else str(traj.seed)
    buf.write(f"traj {traj.n} {len(traj)} {traj.schedule} {seed}\n")
    buf.write(f"0 {spins_to_str(traj.initial)}\n")
    plus = np.where(traj.configs > 0, ord("+"), ord("-")).astype(np.uint8)
    for t in range(len(traj)):
        members = " ".join(str(i + 1) for i in np.flatnonzero(traj.blocks[t]).tolist())
        buf.write(f"{t + 1} {members} | {plus[t].tobytes().decode()}\n")
    return buf.getvalue()


def parse_trajectory(text: str) -> Trajectory:
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty trajectory file")
    head = lines[0].split()
    if len(head) != 5 or head[0] != "traj":
        raise FormatError("expected header 'traj <n> <T> <schedule> <seed>'")
    n, T = int(head[1]), int(head[2])
    seed = None if head[4] == "-" else int(head[4])
    if len(lines) < T + 2:
        raise FormatError(f"header announces {T} steps but file has {len(lines) - 2}")
    t0, _, init = lines[1].partition(" ")
    if t0 != "0":
        raise FormatError("line 2 must hold the initial configuration")
    initial = str_to_spins(init.strip())
    blocks = np.zeros((T, n), dtype=bool)
    configs = np.empty((T, n), dtype=np.int8)
    for t in range(T):
        left, sep, cfg = lines[t + 2].partition("|")
        parts = left.split()
        if not sep or not parts or int(parts[0]) != t + 1:
            raise FormatError(f"malformed step line {t + 1}")
        members = [int(k) - 1 for k in parts[1:]]
        if not members or min(members) < 0 or max(members) >= n:
            raise FormatError(f"step {t + 1}: block members out of range")
        blocks[t, members] = True
        x = str_to_spins(cfg.strip())
        if x.shape != (n,):
            raise FormatError(f"step {t + 1}: configuration has wrong length")
        configs[t] = x
    if initial.shape != (n,):
        raise FormatError("initial configuration has wrong length")
    return Trajectory(initial, blocks, configs, head[3], seed)


def write_trajectory(path, traj: Trajectory) -> None:
    Path(path).write_text(format_trajectory(traj))


def read_trajectory(path) -> Trajectory:
    return parse_trajectory(Path(path).read_text())


# -- node samples ----------------------------------------------------------------------------

def format_node_samples(s: NodeSampleSet) -> str:
    lines = [f"samples {s.n} {s.node + 1} {len(s)} {s.source or '-'}"]
    for ctx, y in zip(s.contexts, s.labels):
        lines.append(f"{spins_to_str(ctx)} {'+' if y > 0 else '-'}")
    return "\n".join(lines) + "\n"


def parse_node_samples(text: str) -> NodeSampleSet:
    lines = text.splitlines()
    head = lines[0].split() if lines else []
    if len(head) != 5 or head[0] != "samples":
        raise FormatError("expected header 'samples <n> <node> <count> <source>'")
    n, node, count = int(head[1]), int(head[2]) - 1, int(head[3])
    if len(lines) < count + 1:
        raise FormatError(f"header announces {count} samples but file has {len(lines) - 1}")
    ctx = np.empty((count, n - 1), dtype=np.int8)
    y = np.empty(count, dtype=np.int8)
    for k in range(count):
        c, _, lab = lines[k + 1].partition(" ")
        ctx[k] = str_to_spins(c)
        y[k] = str_to_spins(lab.strip())[0]
    return NodeSampleSet(node, ctx, y, "" if head[4] == "-" else head[4])


def write_node_samples(directory, sample_sets) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for s in sample_sets:
        p = d / f"node{s.node + 1:04d}.samples"
        p.write_text(format_node_samples(s))
        paths.append(p)
    return paths


def read_node_samples(directory) -> list[NodeSampleSet]:
    paths = sorted(Path(directory).glob("node*.samples"))
    if not paths:
        raise FormatError(f"no node*.samples files in {directory}")
    sets = sorted((parse_node_samples(p.read_text()) for p in paths), key=lambda s: s.node)
    if [s.node for s in sets] != list(range(len(sets))):
        raise FormatError("node sample files do not cover nodes 1..n")
    return sets


# -- CSV -------------------------------------------------------------------------------------

def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else v


def write_csv(path, columns, rows) -> None:
    """Write ``rows`` (dicts) under a fixed header; missing keys become empty cells."""
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in columns])
    os.replace(tmp, path)


def read_csv(path) -> tuple[list[str], list[dict]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return list(reader.fieldnames or []), list(reader)
