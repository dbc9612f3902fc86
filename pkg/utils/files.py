r"""File-related utilities and validations."""

import json
import os
from typing import Any, Final

import numpy as np

from core.errors import ValidationError

# Artifacts are byte-identical across runs: sorted keys, fixed indent, "\n" endings.
_JSON_INDENT: Final[int] = 2


def _to_builtin(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def ensure_parent_dir(path: str) -> None:
    """Create the directory that will hold path; unwritable locations are a validation error."""
    parent = os.path.dirname(os.path.abspath(path))
    ensure_dir(parent)


def ensure_dir(directory: str) -> None:
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as e:
        raise ValidationError(f"cannot create directory: {e.strerror or e}", source=directory) from e
    if not os.access(directory, os.W_OK):
        raise ValidationError("directory is not writable", source=directory)


def dumps_json(payload: Any) -> str:
    return json.dumps(payload, indent=_JSON_INDENT, sort_keys=True, default=_to_builtin) + "\n"


def write_json(path: str, payload: Any) -> None:
    ensure_parent_dir(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(dumps_json(payload))
    except OSError as e:
        raise ValidationError(f"cannot write file: {e.strerror or e}", source=path) from e


def read_json(path: str) -> Any:
    if not os.path.isfile(path):
        raise ValidationError("file not found", source=path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ValidationError(f"invalid JSON: {e.msg}", source=path, row=e.lineno) from e
