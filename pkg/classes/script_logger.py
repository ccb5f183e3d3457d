"""
Job Logging Utilities

Append-only job logs for the command-line studies. Every line carries the
level, a timestamp, the message and optional key=value fields such as the
subcommand, the experiment file and the seed.
"""

from datetime import datetime
from pathlib import Path
from typing import Any


def get_log_file_path(base_dir: str, log_folder: str, log_file_name: str) -> Path:
    """
    Get the full path to a log file, creating directory if needed.

    Args:
        base_dir: Base directory
        log_folder: Relative path to log folder (e.g., 'script_logs')
        log_file_name: Name of the log file

    Returns:
        Path object pointing to the log file
    """
    log_path = Path(base_dir) / log_folder / log_file_name
    log_path.parent.mkdir(parents=True, exist_ok=True)
    return log_path


def format_fields(fields: dict) -> str:
    return ' '.join(f'{key}={value}' for key, value in sorted(fields.items()) if value is not None)


def log_message(file_path: Path, level: str, message: str, **fields: Any) -> None:
    """
    Write a timestamped log line to file.

    Args:
        file_path: Path to log file
        level: Log level (START, INFO, END, ERROR)
        message: Log message content
        **fields: Context appended as sorted key=value pairs; None values are skipped
    """
    context = format_fields(fields)
    with open(file_path, 'a', encoding='utf-8') as f:
        f.write(f'[{level:5}] {datetime.now().isoformat(sep=" ")} {message}{" " + context if context else ""}\n')
