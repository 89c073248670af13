"""Run directories: persistence and resumable execution of training runs.

Layout of a run directory::

    manifest.json                 resolved config, hash, version, timestamps
    checkpoints/iter_<k>.json     network after iteration k's gating
    buffer/iter_<k>.examples      training examples generated in iteration k
    log/iterations.csv            one row per completed iteration
    log/switch.json               adaptive switch state

The checkpoint is written last, so the newest checkpoint marks the newest
complete iteration; everything else is rebuilt from it on resume.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import logging
import os
import struct
import subprocess
from dataclasses import asdict, fields
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig
from .network import ReplayBuffer, TrainingExample, load_checkpoint, save_checkpoint
from .selfplay import IterationLog, SwitchState, TrainingState, new_training_state, run_iteration

log = logging.getLogger(__name__)

_LOG_FIELDS = [f.name for f in fields(IterationLog)]


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


# -- example records -------------------------------------------------------
#
# Each record is a little-endian uint32 byte length followed by the payload:
#   uint8 ndim, ndim x uint32 state dims, uint32 policy length,
#   float32 state values, float32 policy values, float32 outcome z.


def encode_examples(examples: Iterable[TrainingExample]) -> bytes:
    out = bytearray()
    for ex in examples:
        x = np.ascontiguousarray(ex.x, dtype="<f4")
        pi = np.ascontiguousarray(ex.pi, dtype="<f4")
        payload = struct.pack(f"<B{x.ndim}II", x.ndim, *x.shape, pi.size) + x.tobytes() + pi.tobytes()
        payload += struct.pack("<f", ex.z)
        out += struct.pack("<I", len(payload)) + payload
    return bytes(out)


def decode_examples(data: bytes) -> list[TrainingExample]:
    examples = []
    pos = 0
    while pos < len(data):
        if pos + 4 > len(data):
            raise ValueError(f"truncated record header at byte {pos}")
        (length,) = struct.unpack_from("<I", data, pos)
        pos += 4
        rec = data[pos : pos + length]
        if len(rec) != length:
            raise ValueError(f"truncated record at byte {pos}")
        pos += length
        ndim = rec[0]
        dims = struct.unpack_from(f"<{ndim}I", rec, 1)
        off = 1 + 4 * ndim
        (plen,) = struct.unpack_from("<I", rec, off)
        off += 4
        size = int(np.prod(dims))
        x = np.frombuffer(rec, dtype="<f4", count=size, offset=off).reshape(dims).astype(np.float32)
        off += 4 * size
        pi = np.frombuffer(rec, dtype="<f4", count=plen, offset=off).astype(np.float32)
        off += 4 * plen
        (z,) = struct.unpack_from("<f", rec, off)
        if off + 4 != length:
            raise ValueError("record length does not match its header")
        examples.append(TrainingExample(x, pi, float(z)))
    return examples


def save_examples(path, examples) -> None:
    _atomic_write(Path(path), encode_examples(examples))


def load_examples(path) -> list[TrainingExample]:
    return decode_examples(Path(path).read_bytes())


# -- iteration logs --------------------------------------------------------


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def logs_to_csv(logs: list) -> bytes:
    lines = [",".join(_LOG_FIELDS)]
    for entry in logs:
        row = asdict(entry)
        lines.append(",".join(_cell(row[k]) for k in _LOG_FIELDS))
    return ("\n".join(lines) + "\n").encode()


def read_logs(path) -> list[IterationLog]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            vals = {}
            for f in fields(IterationLog):
                raw = row[f.name]
                if f.name == "r_mcts":
                    vals[f.name] = int(raw) if raw != "" else None
                elif f.type in ("bool",):
                    vals[f.name] = raw == "True"
                elif f.type in ("int",):
                    vals[f.name] = int(raw)
                elif f.type in ("float",):
                    vals[f.name] = float(raw)
                else:
                    vals[f.name] = raw
            out.append(IterationLog(**vals))
    return out


def switch_from_logs(logs: list) -> SwitchState:
    for entry in logs:
        if entry.switched:
            return SwitchState(True, 0, entry.iteration)
    return SwitchState()


# -- run directory ---------------------------------------------------------


def _code_version() -> str:
    try:
        rev = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=Path(__file__).parent, capture_output=True, text=True, timeout=5,
        )
        if rev.returncode == 0:
            return f"{__version__}+{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def checkpoint_path(run_dir, k: int) -> Path:
    return Path(run_dir) / "checkpoints" / f"iter_{k}.json"


def completed_iterations(run_dir) -> list[int]:
    ck = Path(run_dir) / "checkpoints"
    if not ck.is_dir():
        return []
    its = []
    for p in ck.glob("iter_*.json"):
        try:
            its.append(int(p.stem.split("_", 1)[1]))
        except ValueError:
            continue
    return sorted(its)


def read_manifest(run_dir) -> dict:
    return json.loads((Path(run_dir) / "manifest.json").read_text())


def _write_manifest(run_dir: Path, doc: dict) -> None:
    _atomic_write(run_dir / "manifest.json", json.dumps(doc, indent=2, sort_keys=True).encode())


def load_state(run_dir, cfg: RunConfig) -> TrainingState:
    """Rebuild the training state after the newest complete iteration."""
    run_dir = Path(run_dir)
    done = completed_iterations(run_dir)
    if not done:
        return new_training_state(cfg)
    k = done[-1]
    params, it = load_checkpoint(checkpoint_path(run_dir, k))
    if it != k:
        raise ValueError(f"checkpoint iter_{k}.json records iteration {it}")
    buffer = ReplayBuffer(cfg.rs)
    for j in range(max(1, k - cfg.rs + 1), k + 1):
        buffer.push(j, load_examples(run_dir / "buffer" / f"iter_{j}.examples"))
    logs = [e for e in read_logs(run_dir / "log" / "iterations.csv") if e.iteration <= k]
    return TrainingState(params, buffer, switch_from_logs(logs), k, logs)


def save_iteration(run_dir, state: TrainingState) -> None:
    run_dir = Path(run_dir)
    k = state.iteration
    save_examples(run_dir / "buffer" / f"iter_{k}.examples", state.buffer.items()[-1][1])
    _atomic_write(run_dir / "log" / "iterations.csv", logs_to_csv(state.logs))
    sw = asdict(state.switch)
    sw["iteration"] = k
    _atomic_write(run_dir / "log" / "switch.json", json.dumps(sw, sort_keys=True).encode())
    tmp = checkpoint_path(run_dir, k)
    tmp.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(state.params, tmp.with_name(tmp.name + ".tmp"), iteration=k)
    os.replace(tmp.with_name(tmp.name + ".tmp"), tmp)


def run_training(cfg: RunConfig, run_dir=None, workers: int = 1, stop_after: Optional[int] = None) -> Path:
    """Run (or resume) a training run until ``cfg.I`` iterations are complete.

    ``stop_after`` ends the process early after that many iterations in
    total, leaving a resumable directory behind.
    """
    run_dir = Path(run_dir or cfg.out)
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest_file = run_dir / "manifest.json"
    if manifest_file.exists():
        manifest = read_manifest(run_dir)
        if manifest.get("config_hash") != cfg.digest():
            raise ConfigError(
                f"config: {run_dir} holds a run with a different configuration "
                f"(hash {manifest.get('config_hash')} vs {cfg.digest()}); use a fresh --out directory"
            )
        manifest.setdefault("resumed_at", []).append(_now())
    else:
        manifest = {
            "config": cfg.to_dict(),
            "overrides": cfg.overrides(),
            "config_hash": cfg.digest(),
            "code_version": _code_version(),
            "started_at": _now(),
            "finished_at": None,
            "iterations": [],
        }
    _write_manifest(run_dir, manifest)

    state = load_state(run_dir, cfg)
    target = cfg.I if stop_after is None else min(cfg.I, stop_after)
    while state.iteration < target:
        state = run_iteration(state, cfg, workers)
        save_iteration(run_dir, state)
        manifest["iterations"] = [
            {"iteration": j, "checkpoint": f"checkpoints/iter_{j}.json", "examples": f"buffer/iter_{j}.examples"}
            for j in range(1, state.iteration + 1)
        ]
        _write_manifest(run_dir, manifest)
    if state.iteration >= cfg.I:
        manifest["finished_at"] = _now()
        _write_manifest(run_dir, manifest)
    return run_dir
