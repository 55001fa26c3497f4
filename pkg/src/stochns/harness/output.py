"""CSV emission and run manifests."""

import csv
import datetime
import hashlib
import json
import os
import subprocess
from dataclasses import asdict, dataclass, field
from pathlib import Path

MANIFEST_VERSION = 1


def _cell(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def write_csv(path, columns, rows, notes=()):
    """Write rows under a ``# schema:`` header line naming the columns."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write("# schema: " + ",".join(columns) + "\n")
        for note in notes:
            fh.write(f"# {note}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(v) for v in r])
    return path


def read_csv(path):
    """Rows of a file written by :func:`write_csv` as dicts of strings."""
    with open(path, newline="") as fh:
        lines = [l for l in fh if not l.startswith("#")]
    return list(csv.DictReader(lines))


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def build_identity():
    """Package version plus ``git describe`` of the source tree when available."""
    from .. import __version__

    try:
        desc = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        ).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        desc = ""
    return f"{__version__}+{desc}" if desc else __version__


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    threads: int
    format_version: int = MANIFEST_VERSION
    created: str = field(default_factory=lambda: datetime.datetime.now(datetime.timezone.utc).isoformat())
    build: str = field(default_factory=build_identity)
    artifacts: list = field(default_factory=list)
    status: str = "ok"

    def add(self, path, root=None):
        name = relative_to(path, root) if root is not None else str(path)
        self.artifacts.append({"path": name, "sha256": sha256(path)})

    def write(self, out_dir):
        p = Path(out_dir) / "manifest.json"
        with open(p, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return p


def relative_to(path, root):
    try:
        return str(Path(path).relative_to(root))
    except ValueError:
        return str(path)


def out_dir_default():
    return os.environ.get("STOCHNS_OUT_DIR", "stochns_out")
