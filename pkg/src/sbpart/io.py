"""File formats: edge/partition TSVs, JSON reports, and run manifests.

On disk node and block ids are 1-based (the common benchmark-data convention);
in memory everything is 0-based. Edge lines are
`source<TAB>target<TAB>weight`; a missing weight column means weight 1.
Lines starting with `#` are ignored.
"""
from __future__ import annotations

import json
import sys
import time

FORMAT_VERSION = "1"


class DataError(ValueError):
    """Malformed input data (CLI exit code 2)."""


def read_edge_tsv(path):
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) == 1:
                parts = line.split()
            if len(parts) not in (2, 3):
                raise DataError(f"{path}:{lineno}: expected 2 or 3 columns, "
                                f"got {len(parts)}")
            try:
                s = int(parts[0])
                t = int(parts[1])
                w = int(parts[2]) if len(parts) == 3 else 1
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-integer field ({exc})")
            if s < 1 or t < 1:
                raise DataError(f"{path}:{lineno}: node ids are 1-based")
            if w < 1:
                raise DataError(f"{path}:{lineno}: weight must be >= 1")
            edges.append((s - 1, t - 1, w))
    return edges


def write_edge_tsv(path, edges):
    with open(path, "w") as fh:
        for s, t, w in edges:
            fh.write(f"{s + 1}\t{t + 1}\t{w}\n")


def read_assignment_tsv(path, num_nodes=None):
    """node<TAB>block file into a dense 0-based assignment list."""
    pairs = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) == 1:
                parts = line.split()
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 columns")
            try:
                node = int(parts[0])
                block = int(parts[1])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-integer field ({exc})")
            if node < 1 or block < 1:
                raise DataError(f"{path}:{lineno}: ids are 1-based")
            pairs[node - 1] = block - 1
    if not pairs:
        raise DataError(f"{path}: empty assignment file")
    n = num_nodes if num_nodes is not None else max(pairs) + 1
    out = []
    for i in range(n):
        if i not in pairs:
            raise DataError(f"{path}: missing assignment for node {i + 1}")
        out.append(pairs[i])
    return out


def write_assignment_tsv(path, assignment):
    with open(path, "w") as fh:
        for i, b in enumerate(assignment):
            fh.write(f"{i + 1}\t{int(b) + 1}\n")


def read_mask_tsv(path, num_nodes):
    """node<TAB>flag file (flag 0/1) into a boolean list."""
    mask = [False] * num_nodes
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 columns")
            node = int(parts[0]) - 1
            if not 0 <= node < num_nodes:
                raise DataError(f"{path}:{lineno}: node id out of range")
            mask[node] = bool(int(parts[1]))
    return mask


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_manifest(path, command, args_dict, inputs, outputs):
    from . import __version__
    manifest = {
        "format_version": FORMAT_VERSION,
        "tool": "sbpart",
        "tool_version": __version__,
        "command": command,
        "config": args_dict,
        "inputs": inputs,
        "outputs": outputs,
        "argv": sys.argv[1:],
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    write_json(path, manifest)
    return manifest
