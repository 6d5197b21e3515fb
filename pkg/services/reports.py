"""Deterministic TSV / CSV / JSON report files with a provenance header."""

import datetime as dt
import hashlib
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel

from core.config import RunConfig, settings
from core.exceptions import ConfigError

logger = logging.getLogger(__name__)


def dataset_fingerprint(paths: Iterable[Path]) -> str:
    """sha256 over the names and bytes of every input file, in order."""
    digest = hashlib.sha256()
    for path in paths:
        path = Path(path)
        digest.update(path.name.encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()


def build_header(config: RunConfig) -> Dict[str, Any]:
    header: Dict[str, Any] = {
        "config_sha256": config.fingerprint(),
        "dataset_sha256": dataset_fingerprint(config.input_paths()),
        "frequency": config.frequency.value,
    }
    header.update(settings.design_switches())
    header["convention"] = config.convention.value
    header["leverage"] = config.leverage.value
    header["gamma"] = config.gamma
    return header


def _jsonable(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, pd.DataFrame):
        frame = value.copy()
        frame.index = [str(i) for i in frame.index]
        return {str(k): _jsonable(v) for k, v in frame.to_dict(orient="index").items()}
    if isinstance(value, pd.Series):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, (pd.Period, Path, dt.date)):
        return str(value)
    return value


class ReportWriter:
    """Writes report files under ``output_dir``, each opening with ``header``."""

    def __init__(self, output_dir: Path, header: Optional[Dict[str, Any]] = None):
        self.output_dir = Path(output_dir)
        self.header = dict(header or {})
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigError(f"cannot create output directory '{self.output_dir}': {e}")
        self.written: List[Path] = []

    def header_lines(self) -> List[str]:
        lines = []
        for key in sorted(self.header):
            value = self.header[key]
            if not isinstance(value, str):
                value = json.dumps(_jsonable(value), sort_keys=True)
            lines.append(f"{key}: {value}")
        return lines

    def track(self, path: Path) -> Path:
        self.written.append(Path(path))
        logger.info("📄 Wrote %s", path)
        return Path(path)

    def _write_frame(self, name: str, frame: pd.DataFrame, sep: str) -> Path:
        path = self.output_dir / name
        out = frame.copy()
        out.index = [str(i) for i in out.index]
        out.index.name = frame.index.name or ""
        with path.open("w", newline="", encoding="utf-8") as fh:
            fh.writelines(f"# {line}\n" for line in self.header_lines())
            out.to_csv(fh, sep=sep, float_format="%.10g", na_rep="NA")
        return self.track(path)

    def write_table(self, name: str, frame: pd.DataFrame) -> Path:
        return self._write_frame(name, frame, "\t")

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        return self._write_frame(name, frame, ",")

    def write_json(self, name: str, payload: Any) -> Path:
        path = self.output_dir / name
        document = {"header": _jsonable(self.header), "data": _jsonable(payload)}
        path.write_text(json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        return self.track(path)
