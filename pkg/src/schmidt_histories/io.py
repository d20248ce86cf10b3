"""Plain-text artifact files for selection runs and percentile tables.

Every format is line oriented: a magic first line, a `# config=<hash>` line
tying the file to the producing configuration, an optional metadata comment,
a column header, then data rows.  Numbers use "%.12g" with "." decimals
regardless of locale, so a rerun under the same config and seed reproduces
each file byte for byte, and render(parse(text)) == text holds exactly.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from . import __version__
from .histories import HistoryTree
from .selection import RunRecord, StepRecord
from .stats import PercentileTable

TREE_MAGIC = "# schmidt-histories tree v1"
CONSISTENCY_MAGIC = "# schmidt-histories consistency v1"
PROJECTIONS_MAGIC = "# schmidt-histories projections v1"
PERCENTILES_MAGIC = "# schmidt-histories percentiles v1"

TREE_HEADER = "id,parent,time,partition,probability"
CONSISTENCY_HEADER = "t,min_dhp,epsilon,leaf_count,projection"
PROJECTIONS_HEADER = "t,leaf,partition,dhp,epsilon,child_s,child_c,prob_s,prob_c"
PERCENTILES_HEADER = "k,p,epsilon,samples,seed"

TREE_FILE = "tree.txt"
CONSISTENCY_FILE = "consistency.csv"
PROJECTIONS_FILE = "projections.csv"
PERCENTILES_FILE = "percentiles.csv"
METADATA_FILE = "run.json"


def fmt(x: float) -> str:
    """Serialized numeric form: 12 significant digits, locale independent."""
    x = float(x)
    if not np.isfinite(x):
        raise ValueError(f"refusing to serialize non-finite value {x!r}")
    return "%.12g" % x


def _canon(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return fmt(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    if isinstance(value, (tuple, list)):
        return ",".join(_canon(v) for v in value)
    raise TypeError(f"cannot canonicalize {type(value).__name__} for hashing")


def config_hash(config) -> str:
    """12-hex digest of the sorted key=value rendering of a config mapping."""
    if dataclasses.is_dataclass(config) and not isinstance(config, type):
        config = dataclasses.asdict(config)
    lines = [f"{key}={_canon(config[key])}" for key in sorted(config)]
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:12]


def _write(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _read(path) -> str:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return fh.read()


def _expect(lines: list[str], index: int, expected: str, what: str) -> None:
    if index >= len(lines) or lines[index] != expected:
        got = lines[index] if index < len(lines) else "<end of file>"
        raise ValueError(f"{what}: expected {expected!r}, got {got!r}")


def _comment_value(lines: list[str], index: int, key: str) -> str:
    prefix = f"# {key}="
    if index >= len(lines) or not lines[index].startswith(prefix):
        raise ValueError(f"line {index + 1} must start with {prefix!r}")
    return lines[index][len(prefix):]


def _meta_pairs(lines: list[str], index: int, keys: tuple[str, ...]) -> dict[str, str]:
    if index >= len(lines) or not lines[index].startswith("# "):
        raise ValueError(f"line {index + 1} must be a metadata comment")
    pairs = {}
    for item in lines[index][2:].split(" "):
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"bad metadata item {item!r}")
        pairs[key] = value
    if tuple(pairs) != keys:
        raise ValueError(f"metadata keys must be {keys}, got {tuple(pairs)}")
    return pairs


def _fields(line: str, count: int, what: str) -> list[str]:
    parts = line.split(",")
    if len(parts) != count:
        raise ValueError(f"{what} needs {count} comma-separated fields: {line!r}")
    return parts


# ---------------------------------------------------------------------------
# probability tree


@dataclass(frozen=True)
class TreeNodeRow:
    id: int
    parent: int | None          # None only for the root
    time: float                 # branching time that created the node
    partition: tuple[int, ...] | None  # Schmidt index set selecting the branch
    probability: float


@dataclass(frozen=True)
class TreeDocument:
    config_hash: str
    d1: int
    d2: int
    final_time: float
    nodes: tuple[TreeNodeRow, ...]


def tree_document(tree: HistoryTree, hash_value: str) -> TreeDocument:
    """Snapshot a history tree, nodes in creation order (root first)."""
    rows = []
    for node_id in sorted(tree.nodes):
        node = tree.nodes[node_id]
        partition = None if node.side is None else tuple(sorted(node.side))
        rows.append(TreeNodeRow(node.id, node.parent, node.born, partition, node.probability))
    return TreeDocument(hash_value, tree.d1, tree.d2, tree.time, tuple(rows))


def render_tree(doc: TreeDocument) -> str:
    lines = [
        TREE_MAGIC,
        f"# config={doc.config_hash}",
        f"# d1={doc.d1} d2={doc.d2} time={fmt(doc.final_time)}",
        TREE_HEADER,
    ]
    for row in doc.nodes:
        parent = "" if row.parent is None else str(row.parent)
        part = "" if row.partition is None else "+".join(str(i) for i in row.partition)
        lines.append(f"{row.id},{parent},{fmt(row.time)},{part},{fmt(row.probability)}")
    return "\n".join(lines) + "\n"


def parse_tree(text: str) -> TreeDocument:
    lines = text.splitlines()
    _expect(lines, 0, TREE_MAGIC, "tree document")
    hash_value = _comment_value(lines, 1, "config")
    meta = _meta_pairs(lines, 2, ("d1", "d2", "time"))
    _expect(lines, 3, TREE_HEADER, "tree header")
    rows = []
    for line in lines[4:]:
        parts = _fields(line, 5, "tree row")
        parent = None if parts[1] == "" else int(parts[1])
        partition = None if parts[3] == "" else tuple(int(i) for i in parts[3].split("+"))
        rows.append(TreeNodeRow(int(parts[0]), parent, float(parts[2]), partition, float(parts[4])))
    if not rows or rows[0].parent is not None:
        raise ValueError("first tree row must be the parentless root")
    known = {rows[0].id}
    for row in rows[1:]:
        if row.parent not in known or row.partition is None:
            raise ValueError(f"node {row.id} must name an earlier parent and a partition")
        known.add(row.id)
    return TreeDocument(hash_value, int(meta["d1"]), int(meta["d2"]), float(meta["time"]), tuple(rows))


def write_tree(tree: HistoryTree, path, hash_value: str) -> None:
    _write(path, render_tree(tree_document(tree, hash_value)))


# ---------------------------------------------------------------------------
# per-step consistency statistics


@dataclass(frozen=True)
class ConsistencyDocument:
    config_hash: str
    steps: tuple[StepRecord, ...]


def render_consistency(doc: ConsistencyDocument) -> str:
    lines = [CONSISTENCY_MAGIC, f"# config={doc.config_hash}", CONSISTENCY_HEADER]
    for step in doc.steps:
        min_dhp = "" if step.min_dhp is None else fmt(step.min_dhp)
        flag = "1" if step.projected else "0"
        lines.append(f"{fmt(step.t)},{min_dhp},{fmt(step.epsilon)},{step.leaf_count},{flag}")
    return "\n".join(lines) + "\n"


def parse_consistency(text: str) -> ConsistencyDocument:
    lines = text.splitlines()
    _expect(lines, 0, CONSISTENCY_MAGIC, "consistency document")
    hash_value = _comment_value(lines, 1, "config")
    _expect(lines, 2, CONSISTENCY_HEADER, "consistency header")
    steps = []
    for line in lines[3:]:
        parts = _fields(line, 5, "consistency row")
        if parts[4] not in ("0", "1"):
            raise ValueError(f"projection flag must be 0 or 1: {line!r}")
        min_dhp = None if parts[1] == "" else float(parts[1])
        steps.append(StepRecord(float(parts[0]), min_dhp, float(parts[2]), int(parts[3]), parts[4] == "1"))
    return ConsistencyDocument(hash_value, tuple(steps))


def write_consistency_stats(record: RunRecord, path, hash_value: str) -> None:
    _write(path, render_consistency(ConsistencyDocument(hash_value, tuple(record.steps))))


# ---------------------------------------------------------------------------
# projection times


@dataclass(frozen=True)
class ProjectionRow:
    t: float
    leaf: int
    partition: tuple[int, ...]
    dhp: float
    epsilon: float
    child_s: int                # branch selected by the partition index set
    child_c: int                # complement branch
    prob_s: float
    prob_c: float


@dataclass(frozen=True)
class ProjectionDocument:
    config_hash: str
    rows: tuple[ProjectionRow, ...]


def projection_document(record: RunRecord, hash_value: str) -> ProjectionDocument:
    rows = [
        ProjectionRow(
            t=event.t,
            leaf=event.leaf_id,
            partition=event.side,
            dhp=event.dhp,
            epsilon=event.epsilon,
            child_s=event.children[0],
            child_c=event.children[1],
            prob_s=event.child_probabilities[0],
            prob_c=event.child_probabilities[1],
        )
        for event in record.events
    ]
    return ProjectionDocument(hash_value, tuple(rows))


def render_projections(doc: ProjectionDocument) -> str:
    lines = [PROJECTIONS_MAGIC, f"# config={doc.config_hash}", PROJECTIONS_HEADER]
    for row in doc.rows:
        part = "+".join(str(i) for i in row.partition)
        lines.append(
            f"{fmt(row.t)},{row.leaf},{part},{fmt(row.dhp)},{fmt(row.epsilon)},"
            f"{row.child_s},{row.child_c},{fmt(row.prob_s)},{fmt(row.prob_c)}"
        )
    return "\n".join(lines) + "\n"


def parse_projections(text: str) -> ProjectionDocument:
    lines = text.splitlines()
    _expect(lines, 0, PROJECTIONS_MAGIC, "projections document")
    hash_value = _comment_value(lines, 1, "config")
    _expect(lines, 2, PROJECTIONS_HEADER, "projections header")
    rows = []
    for line in lines[3:]:
        parts = _fields(line, 9, "projection row")
        rows.append(
            ProjectionRow(
                t=float(parts[0]),
                leaf=int(parts[1]),
                partition=tuple(int(i) for i in parts[2].split("+")),
                dhp=float(parts[3]),
                epsilon=float(parts[4]),
                child_s=int(parts[5]),
                child_c=int(parts[6]),
                prob_s=float(parts[7]),
                prob_c=float(parts[8]),
            )
        )
    return ProjectionDocument(hash_value, tuple(rows))


def write_projection_times(record: RunRecord, path, hash_value: str) -> None:
    _write(path, render_projections(projection_document(record, hash_value)))


# ---------------------------------------------------------------------------
# percentile tables


@dataclass(frozen=True)
class PercentileDocument:
    config_hash: str
    table: PercentileTable


def percentile_hash(table: PercentileTable) -> str:
    """Hash of the estimation inputs, not the sampled values."""
    return config_hash(
        {
            "d1": table.d1,
            "d2": table.d2,
            "k": table.k_values,
            "p": table.p_values,
            "samples": table.samples,
            "seed": table.seed,
            "kind": table.kind,
        }
    )


def render_percentiles(doc: PercentileDocument) -> str:
    table = doc.table
    lines = [
        PERCENTILES_MAGIC,
        f"# config={doc.config_hash}",
        f"# d1={table.d1} d2={table.d2} kind={table.kind}",
        PERCENTILES_HEADER,
    ]
    for row, k in enumerate(table.k_values):
        for col, p in enumerate(table.p_values):
            lines.append(f"{k},{fmt(p)},{fmt(table.epsilon[row, col])},{table.samples},{table.seed}")
    return "\n".join(lines) + "\n"


def parse_percentiles(text: str) -> PercentileDocument:
    lines = text.splitlines()
    _expect(lines, 0, PERCENTILES_MAGIC, "percentile document")
    hash_value = _comment_value(lines, 1, "config")
    meta = _meta_pairs(lines, 2, ("d1", "d2", "kind"))
    _expect(lines, 3, PERCENTILES_HEADER, "percentile header")
    cells = []
    for line in lines[4:]:
        parts = _fields(line, 5, "percentile row")
        cells.append((int(parts[0]), float(parts[1]), float(parts[2]), int(parts[3]), int(parts[4])))
    if not cells:
        raise ValueError("percentile table has no rows")
    if len({(samples, seed) for _, _, _, samples, seed in cells}) != 1:
        raise ValueError("samples and seed must be constant across the table")
    p_values = []
    for _, p, _, _, _ in cells:
        if p in p_values:
            break
        p_values.append(p)
    width = len(p_values)
    if len(cells) % width != 0:
        raise ValueError("rows do not form a full (k, p) grid")
    k_values = []
    grid = []
    for start in range(0, len(cells), width):
        block = cells[start : start + width]
        if [p for _, p, _, _, _ in block] != p_values or len({k for k, _, _, _, _ in block}) != 1:
            raise ValueError("rows do not form a full (k, p) grid in k-major order")
        k_values.append(block[0][0])
        grid.append([eps for _, _, eps, _, _ in block])
    if any(b <= a for a, b in zip(k_values, k_values[1:])):
        raise ValueError("k must be strictly increasing")
    table = PercentileTable(
        d1=int(meta["d1"]),
        d2=int(meta["d2"]),
        k_values=tuple(k_values),
        p_values=tuple(p_values),
        epsilon=np.array(grid),
        samples=cells[0][3],
        seed=cells[0][4],
        kind=meta["kind"],
    )
    return PercentileDocument(hash_value, table)


def write_percentile_document(doc: PercentileDocument, path) -> None:
    _write(path, render_percentiles(doc))


def write_percentile_table(table: PercentileTable, path) -> None:
    write_percentile_document(PercentileDocument(percentile_hash(table), table), path)


def load_percentile_table(path) -> PercentileDocument:
    return parse_percentiles(_read(path))


# ---------------------------------------------------------------------------
# run metadata


def run_metadata(
    record: RunRecord,
    hash_value: str,
    percentile_table_hash: str | None = None,
) -> dict:
    return {
        "code_version": __version__,
        "config": dataclasses.asdict(record.config),
        "config_hash": hash_value,
        "percentile_table": percentile_table_hash,
        "stop_reason": record.stop_reason,
        "final_time": record.final_time,
        "steps": len(record.steps),
        "projections": len(record.events),
        "leaves": len(record.tree.leaf_ids()),
        "live_leaves": len(record.tree.live_leaf_ids()),
    }


def write_run_metadata(metadata: dict, path) -> None:
    _write(path, json.dumps(metadata, indent=2, sort_keys=True) + "\n")


def read_run_metadata(path) -> dict:
    return json.loads(_read(path))
