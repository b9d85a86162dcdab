from __future__ import annotations

import itertools
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

_writer_ids = itertools.count()


def _plain(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def dumps_record(record: Dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, default=_plain, separators=(",", ":"))


class TraceWriter:
    """
    Per-frame JSONL trace. Each writer owns a dedicated, non-propagating logger whose
    only handler writes bare messages to the trace file.
    """

    def __init__(self, path: Path) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.logger = logging.getLogger(f"anchorloop.trace.{next(_writer_ids)}")
        self._handler = logging.FileHandler(self.path, mode="w", encoding="utf-8")
        self._handler.setFormatter(logging.Formatter("%(message)s"))
        self.logger.addHandler(self._handler)
        self.logger.setLevel(logging.INFO)
        self.logger.propagate = False

    def write(self, record: Dict[str, Any]) -> None:
        self.logger.info(dumps_record(record))

    def close(self) -> None:
        self.logger.removeHandler(self._handler)
        self._handler.close()

    def __enter__(self) -> "TraceWriter":
        return self

    def __exit__(self, *exc_info: Optional[object]) -> None:
        self.close()
