"""Content-hash stamps that make pipeline commands resumable.

A stage is a no-op when its recorded input digest matches the current inputs
and all of its declared outputs still exist.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path


def _file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def tree_digest(root: Path) -> str:
    """Digest of every file under a directory (path + content)."""
    h = hashlib.sha256()
    for path in sorted(p for p in Path(root).rglob("*") if p.is_file()):
        h.update(str(path.relative_to(root)).encode())
        h.update(_file_digest(path).encode())
    return h.hexdigest()


def inputs_digest(config_view: dict, files: list[Path] = (), trees: list[Path] = ()) -> str:
    payload = {"config": config_view}
    payload["files"] = {str(p): _file_digest(Path(p)) for p in files if Path(p).is_file()}
    payload["trees"] = {str(p): tree_digest(Path(p)) for p in trees if Path(p).is_dir()}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


class StageStamp:
    def __init__(self, out_dir: Path, stage: str):
        self.path = Path(out_dir) / ".stamps" / f"{stage}.json"

    def is_current(self, digest: str, outputs: list[Path]) -> bool:
        if not self.path.is_file():
            return False
        try:
            recorded = json.loads(self.path.read_text())
        except json.JSONDecodeError:
            return False
        if recorded.get("digest") != digest:
            return False
        return all(Path(p).exists() for p in outputs)

    def record(self, digest: str, outputs: list[Path]) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(
            json.dumps({"digest": digest, "outputs": [str(p) for p in outputs]}, indent=2)
            + "\n"
        )
