"""
Project paths for SecretSieve
Bundled catalogs live under config/ at the project root
"""

from pathlib import Path

PROJECT_ROOT = Path(__file__).resolve().parents[2]
CONFIG_DIR = PROJECT_ROOT / 'config'


def config_path(name: str) -> str:
    return str(CONFIG_DIR / name)
