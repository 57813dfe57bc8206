"""
I/O utilities for the Counterdiabatic Driving Toolkit
"""

import json
import yaml
import numpy as np
import pandas as pd
from pathlib import Path
from typing import Union

from cdkit.errors import ConfigError


def load_config(config_path: Union[str, Path]) -> dict:
    """
    Load YAML configuration file.

    Parameters
    ----------
    config_path : str or Path
        Path to YAML config file

    Returns
    -------
    dict
        Configuration dictionary (empty if the file is empty)

    Raises
    ------
    ConfigError
        If the file is missing or is not valid YAML; syntax errors report
        the offending line.
    """
    path = Path(config_path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")

    try:
        with open(path, 'r') as f:
            config = yaml.safe_load(f)
    except yaml.YAMLError as e:
        mark = getattr(e, 'problem_mark', None)
        where = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise ConfigError(f"Cannot parse {path}{where}: {getattr(e, 'problem', e)}") from e

    if config is None:
        return {}
    if not isinstance(config, dict):
        raise ConfigError(f"Top level of {path} must be a mapping, got {type(config).__name__}")
    return config


def save_config(config: dict, output_path: Union[str, Path]):
    """
    Save configuration to YAML file.

    Parameters
    ----------
    config : dict
        Configuration dictionary
    output_path : str or Path
        Path to output YAML file
    """
    # tuples, numpy scalars and paths become plain YAML
    config = json.loads(json.dumps(config, default=_to_builtin))
    Path(output_path).parent.mkdir(parents=True, exist_ok=True)
    with open(output_path, 'w') as f:
        yaml.dump(config, f, default_flow_style=False, sort_keys=False)


def _to_builtin(obj):
    """JSON fallback for numpy scalars and arrays."""
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def to_json(data) -> str:
    """Deterministic JSON text (sorted keys, numpy aware)."""
    return json.dumps(data, sort_keys=True, default=_to_builtin)


def write_json(data: dict, output_path: Union[str, Path]):
    """
    Write a dictionary to a JSON file.

    Parameters
    ----------
    data : dict
        JSON-serializable data (numpy scalars allowed)
    output_path : str or Path
        Output file path
    """
    Path(output_path).parent.mkdir(parents=True, exist_ok=True)
    with open(output_path, 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True, default=_to_builtin)
        f.write("\n")


def read_json(input_path: Union[str, Path]) -> dict:
    """Read a JSON file."""
    with open(input_path, 'r') as f:
        return json.load(f)


def write_results_csv(df: pd.DataFrame, output_path: Union[str, Path]):
    """
    Write a results table as CSV with a header row.

    Parameters
    ----------
    df : pd.DataFrame
        Results table
    output_path : str or Path
        Output file path
    """
    Path(output_path).parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(output_path, index=False, float_format="%.12g")


def read_results_csv(input_path: Union[str, Path]) -> pd.DataFrame:
    """
    Read a results CSV written by write_results_csv.

    Raises
    ------
    ConfigError
        If the file does not exist or holds no rows.
    """
    path = Path(input_path)
    if not path.exists():
        raise ConfigError(f"CSV not found: {path}")
    try:
        df = pd.read_csv(path)
    except pd.errors.EmptyDataError as e:
        raise ConfigError(f"CSV is empty: {path}") from e
    if df.empty:
        raise ConfigError(f"CSV has no rows: {path}")
    return df


def ensure_dir(directory: Union[str, Path]):
    """
    Create directory if it doesn't exist.

    Parameters
    ----------
    directory : str or Path
        Directory path
    """
    Path(directory).mkdir(parents=True, exist_ok=True)
