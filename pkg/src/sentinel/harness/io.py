from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

HEADER = ("experiment", "seed", "step", "metric", "value")


def git_blob_hash(data: bytes) -> str:
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def format_value(v) -> str:
    return repr(float(v)) if not isinstance(v, (bool, int)) else str(int(v))


def render_csv(rows) -> bytes:
    """Rows sorted by (seed, step, metric) so steps are monotone within a seed."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for exp, seed, step, metric, value in sorted(rows, key=lambda r: (r[1], r[2], r[3])):
        w.writerow((exp, seed, step, metric, format_value(value)))
    return buf.getvalue().encode("utf-8")


def read_metrics(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [dict(r, seed=int(r["seed"]), step=int(r["step"]), value=float(r["value"]))
                for r in csv.DictReader(fh)]


def write_outputs(out_dir, rows, summary: dict, config: dict, extra_files: dict | None = None) -> Path:
    """Write metrics.csv, summary.json, any extra files, then a manifest hashing them all."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"metrics.csv": render_csv(rows),
             "summary.json": (json.dumps(summary, indent=2, sort_keys=True) + "\n").encode()}
    for name, obj in (extra_files or {}).items():
        files[name] = (json.dumps(obj, sort_keys=True) + "\n").encode()
    for name, data in files.items():
        path = out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    manifest = {"config": config,
                "outputs": {name: {"bytes": len(data), "git_blob_sha1": git_blob_hash(data),
                                   "sha256": hashlib.sha256(data).hexdigest()}
                            for name, data in sorted(files.items())}}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out
