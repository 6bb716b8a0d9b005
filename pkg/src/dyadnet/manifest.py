"""Reproducible run manifests: config hash, input digests, seeds, timing.

A manifest records everything needed to re-run a pipeline stage and check
that it reproduced: the tool version, a digest of the effective config, a
digest per input file, the seed, and the thread count.  Outputs produced
under an identical manifest are bit-identical for parsing/graph/feature
stages and agree to 1e-9 for training metrics on one platform.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Mapping

from . import __version__
from .errors import DataError

__all__ = [
    "RunManifest", "canonical_json", "config_digest", "file_digest",
    "read_manifest", "utc_timestamp",
]


def canonical_json(obj) -> str:
    """Key-sorted, whitespace-free JSON; the hashing form of a config."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_digest(config: Mapping) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def file_digest(path) -> str:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"cannot digest missing file: {p}")
    h = hashlib.sha256()
    with open(p, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def utc_timestamp() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


@dataclass
class RunManifest:
    tool_version: str
    command: str
    config_digest: str
    input_digests: Dict[str, str]
    seed: int
    threads: int
    started_at: str
    finished_at: str = ""
    extra: Dict = field(default_factory=dict)

    @classmethod
    def start(cls, command: str, config: Mapping, inputs: Iterable,
              seed: int, threads: int) -> "RunManifest":
        digests = {str(Path(p)): file_digest(p) for p in inputs}
        return cls(tool_version=__version__, command=command,
                   config_digest=config_digest(config),
                   input_digests=dict(sorted(digests.items())),
                   seed=seed, threads=threads, started_at=utc_timestamp())

    def finish(self) -> "RunManifest":
        self.finished_at = utc_timestamp()
        return self

    def to_dict(self) -> Dict:
        return {
            "tool_version": self.tool_version,
            "command": self.command,
            "config_digest": self.config_digest,
            "input_digests": dict(self.input_digests),
            "seed": self.seed,
            "threads": self.threads,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "extra": dict(self.extra),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RunManifest":
        try:
            return cls(tool_version=d["tool_version"], command=d["command"],
                       config_digest=d["config_digest"],
                       input_digests=dict(d["input_digests"]),
                       seed=int(d["seed"]), threads=int(d["threads"]),
                       started_at=d["started_at"],
                       finished_at=d.get("finished_at", ""),
                       extra=dict(d.get("extra", {})))
        except KeyError as exc:
            raise DataError(f"manifest missing field {exc.args[0]!r}") from exc

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    def same_inputs(self, other: "RunManifest") -> bool:
        """True when re-running should reproduce the other run's outputs."""
        return (self.config_digest == other.config_digest
                and self.input_digests == other.input_digests
                and self.seed == other.seed)


def read_manifest(path) -> RunManifest:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return RunManifest.from_dict(json.load(fh))
    except FileNotFoundError as exc:
        raise DataError(f"missing manifest: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid manifest {path}: {exc}") from exc
