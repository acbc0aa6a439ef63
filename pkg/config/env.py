"""
Environment loader - reads overrides from the process environment
Optional .env file in the working directory is honoured for local runs
"""

import os
from dotenv import load_dotenv

# Load environment variables from .env file (for local runs)
load_dotenv()


def get_env(key: str, default: str = "") -> str:
    """
    Get a configuration value from the environment

    Args:
        key: Variable name (e.g., "SPECTRAL_LAB_THREADS")
        default: Default value if the variable is not set

    Returns:
        Value as string
    """
    return os.getenv(key, default)


def get_env_int(key: str, default: int) -> int:
    """
    Get an integer configuration value, falling back on malformed input

    Args:
        key: Variable name
        default: Default value if unset or not an integer

    Returns:
        Parsed integer
    """
    raw = get_env(key, "")
    try:
        return int(raw) if raw else default
    except ValueError:
        return default


# Thread count handed to scipy.fft as `workers`
FFT_WORKERS = max(1, get_env_int("SPECTRAL_LAB_THREADS", 1))

# Application Settings
LOG_LEVEL = get_env("SPECTRAL_LAB_LOG_LEVEL", "INFO").upper()
OUTPUT_DIR = get_env("SPECTRAL_LAB_OUTPUT_DIR", "data/runs")
