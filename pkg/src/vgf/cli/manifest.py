"""Run manifests: one JSON record per output directory.

The manifest ties a directory of outputs to the command, config, and
seed that produced them.  The config is stored verbatim alongside the
manifest so the recorded hash can be re-checked byte-for-byte.  All
outputs are reproducible from (config, seed); the timestamps are the
one exception and are excluded from any reproducibility comparison.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

from .errors import UsageError

__all__ = [
    "MANIFEST_NAME",
    "CONFIG_COPY_NAME",
    "prepare_out_dir",
    "store_config",
    "write_manifest",
    "read_manifest",
]

MANIFEST_NAME = "manifest.json"
CONFIG_COPY_NAME = "config.json"


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def prepare_out_dir(path, force: bool) -> Path:
    """Create the output directory, refusing to reuse a finished one.

    A directory that already holds a manifest is a previous run; it is
    only reused under --force.
    """
    out = Path(path)
    if out.exists() and not out.is_dir():
        raise UsageError(f"output path {out} exists and is not a directory")
    marker = out / MANIFEST_NAME
    if marker.exists() and not force:
        raise UsageError(
            f"{out} already contains a run manifest; pass --force to overwrite"
        )
    out.mkdir(parents=True, exist_ok=True)
    return out


def store_config(out_dir: Path, raw: bytes) -> str:
    """Write the config bytes verbatim and return their sha256 hex digest."""
    (out_dir / CONFIG_COPY_NAME).write_bytes(raw)
    return hashlib.sha256(raw).hexdigest()


def write_manifest(
    out_dir: Path,
    *,
    command: str,
    argv: list[str],
    started: str,
    seed: int | None = None,
    seed_source: str | None = None,
    config_sha256: str | None = None,
    outputs: list[str] | None = None,
    extra: dict | None = None,
) -> Path:
    from .. import __version__

    record = {
        "kind": "vgf-run-manifest",
        "version": __version__,
        "command": command,
        "argv": list(argv),
        "config_sha256": config_sha256,
        "seed": seed,
        "seed_source": seed_source,
        "started": started,
        "finished": utc_now(),
        "outputs": sorted(outputs or []),
    }
    if extra:
        record.update(extra)
    path = out_dir / MANIFEST_NAME
    path.write_text(json.dumps(record, indent=2) + "\n")
    return path


def read_manifest(out_dir) -> dict:
    path = Path(out_dir) / MANIFEST_NAME
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise UsageError(f"no run manifest at {path}: {exc}") from exc
