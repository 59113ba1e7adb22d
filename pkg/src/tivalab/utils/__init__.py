"""Shared utilities for tivalab.

- file_ops: output directories, text files and path display
"""

from .file_ops import (
    display_path,
    ensure_export_dir,
    format_file_size,
    write_text,
)

__all__ = [
    'display_path',
    'ensure_export_dir',
    'format_file_size',
    'write_text',
]
