"""Bundled data files: method descriptions and the demo dataset."""

from pathlib import Path

RESOURCE_DIR = Path(__file__).parent
DEMO_DIR = RESOURCE_DIR / "demo"


def demo_path() -> Path:
    """CSV of the bundled demo dataset (label column ``class``)."""
    return DEMO_DIR / "demo.csv"
