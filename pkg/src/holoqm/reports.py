"""Deterministic report files: RFC-4180 CSV, JSON summaries and a run manifest.

Every file is written to a temporary sibling and renamed into place, so a
reader never sees a half-written table.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
import tempfile
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(x) -> str:
    """Cell text; floats use ``repr`` so values round-trip exactly."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        return repr(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return str(x)


def write_csv(path: str | Path, header, rows) -> Path:
    path = Path(path)
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(header)
    for row in rows:
        if isinstance(row, dict):
            row = [row.get(h) for h in header]
        w.writerow([fmt(c) for c in row])
    _atomic_write(path, buf.getvalue().encode("utf-8"))
    return path


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, Fraction):
        return str(x)
    return x


def write_json(path: str | Path, obj) -> Path:
    path = Path(path)
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
    _atomic_write(path, text.encode("utf-8"))
    return path


@dataclass
class RunManifest:
    command: str
    config_hash: str
    code_version: str
    seed: int
    status: str = "running"
    failure_stage: str | None = None
    error: str | None = None
    wall_time: float = 0.0
    stages: list[dict] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    python: str = field(default_factory=platform.python_version)


class Run:
    """Collects stage timings and output files; always leaves a manifest behind."""

    def __init__(self, out_dir: str | Path, command: str, config_hash: str, version: str, seed: int):
        self.out = Path(out_dir)
        self.manifest = RunManifest(command, config_hash, version, seed)
        self._t0 = time.perf_counter()
        self._stage: str | None = None

    @contextmanager
    def stage(self, name: str):
        self._stage = name
        t = time.perf_counter()
        try:
            yield
        finally:
            self.manifest.stages.append({"stage": name, "seconds": time.perf_counter() - t})
        self._stage = None

    def csv(self, name: str, header, rows) -> Path:
        p = write_csv(self.out / name, header, rows)
        self.manifest.outputs.append(name)
        return p

    def json(self, name: str, obj) -> Path:
        p = write_json(self.out / name, obj)
        self.manifest.outputs.append(name)
        return p

    def fail(self, exc: BaseException) -> None:
        self.manifest.status = "failed"
        self.manifest.failure_stage = self._stage or "setup"
        self.manifest.error = f"{type(exc).__name__}: {exc}"

    def finish(self) -> Path:
        if self.manifest.status == "running":
            self.manifest.status = "ok"
        self.manifest.wall_time = time.perf_counter() - self._t0
        return write_json(self.out / "manifest.json", asdict(self.manifest))
