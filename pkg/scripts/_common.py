"""Shared helpers for the experiment scripts."""

import argparse
from pathlib import Path

from nvpair import __version__
from nvpair.io import Table, config_hash, emit


def parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--out-dir", default="results", help="directory for CSV output")
    return p


def save(table: Table, out_dir: str, name: str, config: dict, seed: int = 0) -> Path:
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    target = path / f"{name}.csv"
    provenance = {"tool": "nvpair-script", "version": __version__, "command": name, "seed": seed,
                  "config_hash": config_hash(config)}
    emit(table, "csv", str(target), provenance)
    return target
