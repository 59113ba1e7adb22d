"""Output directory and file helpers."""

import pathlib
from typing import Union

PathLike = Union[str, pathlib.Path]


def ensure_export_dir(export_dir: PathLike) -> pathlib.Path:
    """Create ``export_dir`` (and parents) if needed and return it as a Path."""
    export_path = pathlib.Path(export_dir)
    export_path.mkdir(parents=True, exist_ok=True)
    return export_path


def write_text(path: PathLike, text: str) -> pathlib.Path:
    """Write UTF-8 text with a trailing newline, creating the parent directory."""
    target = pathlib.Path(path)
    ensure_export_dir(target.parent)
    if not text.endswith('\n'):
        text += '\n'
    target.write_text(text, encoding='utf-8')
    return target


def display_path(path: PathLike, base: PathLike = '.') -> str:
    """``path`` relative to ``base`` when possible, else absolute."""
    path_obj = pathlib.Path(path)
    try:
        return str(path_obj.resolve().relative_to(pathlib.Path(base).resolve()))
    except ValueError:
        return str(path_obj.resolve())


def format_file_size(size_bytes: int) -> str:
    if size_bytes < 1024:
        return f"{size_bytes} B"
    size = size_bytes / 1024
    if size < 1024:
        return f"{size:.1f} KB"
    return f"{size / 1024:.1f} MB"
