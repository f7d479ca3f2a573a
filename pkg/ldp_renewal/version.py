from pathlib import Path

from packaging.version import Version

__version__ = (Path(__file__).resolve().parent.parent / "VERSION").read_text().strip()
version = Version(__version__)
