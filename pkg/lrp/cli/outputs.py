from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import csv
import json
import logging

from pydantic import BaseModel

from .. import __version__


class RunManifest(BaseModel):
    """
    Record of one run.

    Attributes:
        version (str): Package version.
        config_hash (str): SHA-256 of the canonical config text.
        seed (int): Master seed.
        subcommand (str): The command that ran.
        outputs (List[str]): Every file written, relative to the output directory.
        started (str): UTC start time, ISO 8601.
        finished (str): UTC end time, ISO 8601.
    """

    version: str = __version__
    config_hash: str
    seed: int
    subcommand: str
    outputs: List[str]
    started: str
    finished: str

    def to_dict(self) -> Dict:
        return self.model_dump()


def format_cell(value: Any) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


class OutputWriter:
    """Writes result files into one directory and removes them again when the run fails."""

    def __init__(self, directory: Path) -> None:
        self.directory = Path(directory)
        self.written: List[str] = []
        self._created_directory = not self.directory.exists()
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, name: str) -> Path:
        if name not in self.written:
            self.written.append(name)
        return self.directory / name

    def write_bytes(self, name: str, data: bytes) -> Path:
        path = self._path(name)
        path.write_bytes(data)
        return path

    def write_text(self, name: str, text: str) -> Path:
        return self.write_bytes(name, text.encode("utf-8"))

    def write_json(self, name: str, document: Dict) -> Path:
        return self.write_text(name, json.dumps(document, indent=2, sort_keys=True) + "\n")

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        path = self._path(name)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_cell(value) for value in row])
        return path

    def remove_all(self) -> None:
        """Delete every file written so far."""
        for name in self.written:
            path = self.directory / name
            if path.exists():
                path.unlink()
        logging.warning(f"Removed {len(self.written)} partial output(s) from {self.directory}")
        self.written = []
        if self._created_directory and not any(self.directory.iterdir()):
            self.directory.rmdir()
