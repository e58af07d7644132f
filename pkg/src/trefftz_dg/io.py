"""
Utilities for reading configurations and writing result tables on local or
fsspec-supported filesystems.
"""

import logging
import os
import posixpath
import sys

import fsspec
import pandas as pd
from fsspec.implementations.local import LocalFileSystem

log = logging.getLogger(__name__)

FLOAT_FORMAT = "%.5e"


def is_local_path(path: str) -> bool:
    fs, _ = fsspec.core.url_to_fs(path)
    return isinstance(fs, LocalFileSystem)


def join_url(base, *paths) -> str:
    if is_local_path(base):
        return os.path.join(base, *paths)
    else:
        # Ensure urls join correctly
        return posixpath.join(base, *paths)


def get_filesystem(path: str) -> fsspec.AbstractFileSystem:
    fs, _ = fsspec.core.url_to_fs(path)
    return fs


def check_file_exists(path: str) -> bool:
    fs = get_filesystem(path=path)
    if fs.exists(path) and fs.isfile(path):
        return True
    else:
        return False


def check_directory_exists(path: str) -> bool:
    fs = get_filesystem(path=path)
    if fs.exists(path) and fs.isdir(path):
        return True
    else:
        return False


def _prepare_parent(path: str):
    if is_local_path(path):
        parent = os.path.dirname(os.path.abspath(path))
        if not check_directory_exists(parent):
            fs = get_filesystem(path=parent)
            fs.makedirs(parent, exist_ok=True)
            log.info(f"Created directory {parent}")


def read_text(path: str) -> str:
    fs = get_filesystem(path=path)
    with fs.open(path, "r", encoding="utf-8") as f:
        return f.read()


def format_table(table: pd.DataFrame) -> str:
    """CSV text with a header row and scientific notation for floats."""
    return table.to_csv(index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")


def write_table(table: pd.DataFrame, path: str | None = None) -> None:
    """
    Write a result table as CSV to ``path`` (local or remote), or to standard
    output when no path is given.
    """
    text = format_table(table)
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    _prepare_parent(path)
    fs = get_filesystem(path=path)
    with fs.open(path, "w", encoding="utf-8") as f:
        f.write(text)
    log.info(f"Table written to {path}")


def write_mesh_dump(mesh, path: str) -> None:
    """Plain-text mesh listing, one element or face record per line."""
    _prepare_parent(path)
    fs = get_filesystem(path=path)
    with fs.open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(mesh.dump()) + "\n")
    log.info(f"Mesh dump written to {path}")
