from __future__ import annotations

import copy
from typing import Any, Dict

from ..errors import ProgramError
from .bundled import OBJECT_BELIEF, OBJECTS_DRIFTING, OBJECTS_LEFT_OF

BUNDLED_PROGRAMS: Dict[str, Dict[str, Any]] = {
    "example-1": OBJECTS_LEFT_OF,
    "example-2": OBJECTS_DRIFTING,
    "object-belief": OBJECT_BELIEF,
}


def bundled_program(name: str) -> Dict[str, Any]:
    """A fresh copy of a bundled program payload, safe to mutate."""
    try:
        return copy.deepcopy(BUNDLED_PROGRAMS[name])
    except KeyError:
        raise ProgramError(f"no bundled program named '{name}'; choose one of {sorted(BUNDLED_PROGRAMS)}") from None


__all__ = ["BUNDLED_PROGRAMS", "bundled_program", "OBJECT_BELIEF", "OBJECTS_DRIFTING", "OBJECTS_LEFT_OF"]
