"""Per-trial experiment records and their CSV/JSON forms."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field, fields

SCHEMA_VERSION = 1


def config_hash(config):
    """Stable short hash of a JSON-serialisable config mapping."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class ExperimentRecord:
    config_hash: str
    algorithm: str
    n: int
    seed: int
    cluster_sizes: str = ""
    flip_prob: float | None = None
    epsilon: float | None = None
    delta: float | None = None
    dis_output: float | None = None
    dis_truth: float | None = None
    dis_oracle: float | None = None
    dis_release: float | None = None
    excess: float | None = None
    additive_budget: float | None = None
    true_max_degree: int | None = None
    c_l: int | None = None
    eps_total: float | None = None
    delta_total: float | None = None
    budget_ok: bool | None = None
    wall_ms: float | None = None
    schema_version: int = SCHEMA_VERSION
    ledger: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return asdict(self)


CSV_FIELDS = [f.name for f in fields(ExperimentRecord) if f.name != "ledger"]
VOLATILE_FIELDS = ("wall_ms",)


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def record_row(rec):
    d = rec.to_dict()
    return [_cell(d[k]) for k in CSV_FIELDS]


def write_csv(records, stream, header=True):
    writer = csv.writer(stream, lineterminator="\n")
    if header:
        writer.writerow(CSV_FIELDS)
    for rec in records:
        writer.writerow(record_row(rec))


def records_to_csv(records):
    buf = io.StringIO()
    write_csv(records, buf)
    return buf.getvalue()


def read_csv(stream):
    return list(csv.DictReader(stream))
