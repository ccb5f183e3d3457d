"""File I/O utilities for CSV and JSON outputs."""

import json
from typing import Any, List
from pathlib import Path
import pandas as pd


def save_csv(df: pd.DataFrame, path: str, file_name: str) -> Path:
    """
    Save DataFrame to CSV file.

    Args:
        df: DataFrame to save
        path: Directory path
        file_name: Name of the file including .csv extension

    Returns:
        Path of the written file
    """
    full_path = Path(path) / file_name
    full_path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(full_path, index=False, encoding='utf-8')
    return full_path


def save_json(data: Any, path: str, file_name: str) -> Path:
    """
    Save a JSON-serializable object with sorted keys. Non-finite floats are
    rejected so every written file is standard JSON.

    Args:
        data: Object to save
        path: Directory path
        file_name: Name of the file including .json extension

    Returns:
        Path of the written file
    """
    full_path = Path(path) / file_name
    full_path.parent.mkdir(parents=True, exist_ok=True)
    with open(full_path, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=2, sort_keys=True, allow_nan=False)
        f.write('\n')
    return full_path


def load_json(file_path: str) -> Any:
    with open(file_path, 'r', encoding='utf-8') as f:
        return json.load(f)


def read_file_names_in_path(path: str) -> List[str]:
    """
    Get list of file names (without extensions) in a directory.

    Args:
        path: Directory path to scan

    Returns:
        Sorted list of file names without extensions
    """
    path_obj = Path(path)
    if not path_obj.exists():
        return []

    return sorted(
        file.stem
        for file in path_obj.iterdir()
        if file.is_file() and not file.name.startswith('.')
    )
