"""CSV, manifest and JSON output of experiment results."""

import json
import math
import os
import time

import numpy as np

from .config import emit_config

__all__ = ["format_value", "format_csv", "format_manifest", "write_result", "VOLATILE_KEYS"]

# manifest lines that legitimately differ between identical runs
VOLATILE_KEYS = ("elapsed_seconds", "finished_at")


def format_value(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else "%.17g" % v
    return str(v)


def format_csv(columns, rows):
    lines = [",".join(columns)]
    lines += [",".join(format_value(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def format_manifest(result, cfg, elapsed, version):
    lines = [
        f"experiment = {result.experiment}",
        f"version = {version}",
        f"passed = {int(result.passed)}",
        f"elapsed_seconds = {elapsed:.3f}",
        f"finished_at = {time.strftime('%Y-%m-%dT%H:%M:%S')}",
        "",
        "[checks]",
    ]
    lines += [f"{'PASS' if ok else 'FAIL'}  {name}" for name, ok in result.checks.items()]
    lines += ["", "[config]", emit_config(cfg).rstrip("\n")]
    if result.summary:
        lines += ["", "[summary]", json.dumps(result.summary, sort_keys=True, default=float)]
    return "\n".join(lines) + "\n"


def write_result(result, cfg, out_dir, elapsed, version):
    """Write ``<experiment>.csv``, ``manifest.txt`` and the JSON artifacts; return paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []

    def put(name, text):
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        paths.append(path)

    put(f"{result.experiment}.csv", format_csv(result.columns, result.rows))
    put("manifest.txt", format_manifest(result, cfg, elapsed, version))
    for name, text in sorted(result.artifacts.items()):
        put(name, text + "\n")
    return paths
