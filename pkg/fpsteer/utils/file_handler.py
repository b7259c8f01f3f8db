"""
File handling utilities for solver artifacts.
"""

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


class FileHandler:
    """
    Utility class for artifact files and directories.

    JSON and CSV writers are deterministic: identical data gives identical bytes.
    """

    @staticmethod
    def ensure_directory(path: Union[str, Path]) -> Path:
        """
        Ensure a directory exists, creating it if necessary.

        Args:
            path: Directory path

        Returns:
            Path object for the directory
        """
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        return path

    @staticmethod
    def clean_filename(filename: str) -> str:
        """
        Clean a filename by removing/replacing invalid characters.

        Args:
            filename: Original filename

        Returns:
            Cleaned filename
        """
        invalid_chars = '<>:"/\\|?* '
        for char in invalid_chars:
            filename = filename.replace(char, "_")

        filename = filename.strip("._")

        if len(filename) > 255:
            name, ext = os.path.splitext(filename)
            filename = name[: 255 - len(ext)] + ext

        return filename or "scenario"

    @staticmethod
    def format_file_size(size_bytes: int) -> str:
        """
        Format file size in human-readable format.
        """
        if size_bytes == 0:
            return "0 B"

        size_names = ["B", "KB", "MB", "GB", "TB"]
        i = 0
        size = float(size_bytes)

        while size >= 1024.0 and i < len(size_names) - 1:
            size /= 1024.0
            i += 1

        return f"{size:.1f} {size_names[i]}"

    @staticmethod
    def dumps_json(data: Any) -> str:
        return json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n"

    @staticmethod
    def write_json(path: Union[str, Path], data: Any) -> Path:
        """
        Write a JSON document with sorted keys.

        Args:
            path: Destination file
            data: JSON-serializable data (numpy scalars and arrays allowed)

        Returns:
            Destination path
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(FileHandler.dumps_json(data), encoding="utf-8")
        logger.debug(
            f"Wrote {path} ({FileHandler.format_file_size(path.stat().st_size)})"
        )
        return path

    @staticmethod
    def read_json(path: Union[str, Path]) -> Any:
        """
        Read a JSON document.

        Raises:
            FileNotFoundError: If the file does not exist
        """
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Artifact not found: {path}")
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)

    @staticmethod
    def write_csv(path: Union[str, Path], frame: pd.DataFrame) -> Path:
        """
        Write a data frame as CSV with round-trip float precision.
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        logger.debug(
            f"Wrote {path} ({FileHandler.format_file_size(path.stat().st_size)})"
        )
        return path

    @staticmethod
    def read_csv(path: Union[str, Path]) -> pd.DataFrame:
        """
        Read a CSV artifact.

        Raises:
            FileNotFoundError: If the file does not exist
        """
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Artifact not found: {path}")
        return pd.read_csv(path, float_precision="round_trip")

    @staticmethod
    def file_digest(path: Union[str, Path]) -> str:
        """SHA-256 hex digest of a file's bytes."""
        digest = hashlib.sha256()
        with open(path, "rb") as f:
            for chunk in iter(lambda: f.read(1 << 16), b""):
                digest.update(chunk)
        return digest.hexdigest()

    @staticmethod
    def canonical_digest(data: Any) -> str:
        """SHA-256 hex digest of the canonical JSON encoding of ``data``."""
        return hashlib.sha256(FileHandler.dumps_json(data).encode("utf-8")).hexdigest()
