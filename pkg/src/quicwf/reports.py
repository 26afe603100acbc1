"""Report writers. Every file carries the run manifest on its first line."""
from __future__ import annotations

import hashlib
import json
from typing import Optional

from . import __version__
from .evaluate import SweepResult, TopAResult, importance_stability

CSV_MANIFEST_PREFIX = "# manifest: "


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def make_manifest(command: str, argv: list[str], **fields) -> dict:
    return {"command": command, "argv": list(argv), "version": __version__, **fields}


def _manifest_json(manifest: dict) -> str:
    return json.dumps(manifest, sort_keys=True, separators=(",", ":"))


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def write_sweep_csv(result: SweepResult, path, manifest: dict) -> None:
    nf = result.folds
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_MANIFEST_PREFIX + _manifest_json(manifest) + "\n")
        fh.write(",".join(["k", "algorithm", "feature_set", "early", "mean_accuracy"]
                          + [f"fold_{i + 1}" for i in range(nf)]) + "\n")
        for r in result.rows:
            cells = [str(r.k), r.algorithm, r.feature_set, str(int(r.early)),
                     _fmt(r.mean_accuracy)] + [_fmt(a) for a in r.fold_accuracies]
            fh.write(",".join(cells) + "\n")


def write_sweep_jsonl(result: SweepResult, path, manifest: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps({"manifest": manifest}, sort_keys=True) + "\n")
        for r in result.rows:
            fh.write(json.dumps({
                "k": r.k, "algorithm": r.algorithm, "feature_set": r.feature_set,
                "early": r.early, "mean_accuracy": r.mean_accuracy,
                "fold_accuracies": list(r.fold_accuracies),
            }, sort_keys=True) + "\n")
        for algo in dict.fromkeys(r.algorithm for r in result.rows):
            rows = [r for r in result.rows if r.algorithm == algo]
            if len(rows) < 2 or rows[0].importance is None:
                continue
            var = importance_stability(result, algo)
            fh.write(json.dumps({"importance_stability": var, "algorithm": algo,
                                 "ks": [r.k for r in rows], "variance": "population"},
                                sort_keys=True) + "\n")


def write_topa_csv(result: TopAResult, path, manifest: dict) -> None:
    a_cols = list(range(1, result.a_max + 1))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_MANIFEST_PREFIX + _manifest_json(manifest) + "\n")
        fh.write(",".join(["k"] + [f"a={a}" for a in a_cols]
                          + [f"improve(1->{result.a_max})"]) + "\n")
        for k in result.ks:
            cells = [str(k)] + [_fmt(result.table[k, a]) for a in a_cols] + [_fmt(result.improve(k))]
            fh.write(",".join(cells) + "\n")


def read_manifest(path) -> Optional[dict]:
    """Manifest embedded in a CSV, JSONL or ``.manifest.json`` file."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first.startswith(CSV_MANIFEST_PREFIX):
            return json.loads(first[len(CSV_MANIFEST_PREFIX):])
        try:
            obj = json.loads(first)
        except json.JSONDecodeError:
            fh.seek(0)
            try:
                obj = json.load(fh)
            except json.JSONDecodeError:
                return None
    if isinstance(obj, dict):
        if "manifest" in obj:
            return obj["manifest"]
        if "argv" in obj and "command" in obj:
            return obj
    return None


def write_manifest(manifest: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
