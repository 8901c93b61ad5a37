"""Long-format run records and their CSV / metadata serialization."""
import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

HEADER = ("step", "metric", "value", "seed", "estimator")


def format_float(x):
    return f"{float(x):.17g}"


@dataclass
class RunRecord:
    estimator: str
    seed: int
    rows: list = field(default_factory=list)  # (step, metric, value)
    meta: dict = field(default_factory=dict)
    final: dict = field(default=None, repr=False)  # in-memory end state, never serialized

    def add(self, step, metric, value):
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"non-finite {metric} at step {step}")
        if self.rows and step < self.rows[-1][0]:
            raise ValueError("steps must be non-decreasing")
        self.rows.append((int(step), metric, value))

    def series(self, metric):
        pts = [(s, v) for s, m, v in self.rows if m == metric]
        return [p[0] for p in pts], [p[1] for p in pts]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HEADER)
        for step, metric, value in self.rows:
            w.writerow((step, metric, format_float(value), self.seed, self.estimator))
        return buf.getvalue()

    def write(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_csv().encode("utf-8"))
        if self.meta:
            meta_path = path.with_suffix(".meta.json")
            meta_path.write_text(json.dumps(self.meta, indent=2, sort_keys=True, default=str) + "\n",
                                 encoding="utf-8")
        return path


def read_csv(path):
    """Read one or more records back; returns a list of RunRecord (one per seed/estimator)."""
    records = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for step, metric, value, seed, est in reader:
            key = (est, int(seed))
            rec = records.setdefault(key, RunRecord(est, int(seed)))
            rec.rows.append((int(step), metric, float(value)))
    return list(records.values())
