"""Writers for the JSON, CSV and YAML artifacts of a run, and the checksum manifest."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
import csv
import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .decay import DecaySeries
from .dynamics import Trajectory
from .semigroup import KernelTable
from .symbol import SpectralData
from .utils import LOGGER

_LOGGER = LOGGER.getChild("results")

CURVE_HEADER = ("k", "re_lc_p", "im_lc_p", "re_lc_m", "im_lc_m", "re_ls", "im_ls")
KERNEL_HEADER = ("z", "t", "component", "i", "j", "value")
NORM_HEADER = ("t", "norm_id", "value")
SERIES_HEADER = ("t", "value")


def _to_builtin(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def _number(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def sha256sum(path: str | Path) -> str:
    sha256_hash = hashlib.sha256()
    with open(path, "rb") as f:
        for byte_block in iter(lambda: f.read(4096), b""):
            sha256_hash.update(byte_block)
    return sha256_hash.hexdigest()


class ResultWriter:
    """Write artifacts below ``out_dir`` and remember them for the manifest.

    Every writer is deterministic: the same inputs give byte-identical files.

    :param out_dir: output directory, created if missing
    """

    def __init__(self, out_dir: str | Path) -> None:
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.artifacts: list[Path] = []

    def _path(self, name: str) -> Path:
        path = self.out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        if path not in self.artifacts:
            self.artifacts.append(path)
        return path

    def write_json(self, name: str, data: Any) -> Path:
        path = self._path(name)
        path.write_text(json.dumps(data, sort_keys=True, indent=2, default=_to_builtin) + "\n")
        _LOGGER.debug(f"wrote {path}")
        return path

    def write_yaml(self, name: str, data: dict[str, Any]) -> Path:
        path = self._path(name)
        path.write_text(yaml.safe_dump(json.loads(json.dumps(data, default=_to_builtin)), sort_keys=True))
        return path

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        path = self._path(name)
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_number(v) for v in row])
        _LOGGER.debug(f"wrote {path}")
        return path

    def write_curves(self, data: SpectralData, name: str = "curves.csv") -> Path:
        c = data.curves

        def rows() -> Iterable[Sequence[Any]]:
            for j, k in enumerate(data.k_grid):
                yield (k, c[j, 0].real, c[j, 0].imag, c[j, 1].real, c[j, 1].imag, c[j, 2].real, c[j, 2].imag)

        return self.write_csv(name, CURVE_HEADER, rows())

    def write_kernel_table(self, table: KernelTable, name: str = "kernel.csv", max_z: int = 1025) -> Path:
        """Write ``G_c`` and ``G_e`` entries; ``z`` is subsampled to at most ``max_z`` points per time."""
        stride = max(1, -(-table.z_grid.size // max_z))
        z_idx = np.arange(0, table.z_grid.size, stride)

        def rows() -> Iterable[Sequence[Any]]:
            for n, t in enumerate(table.times):
                for component, kernel in (("c", table.Gc), ("e", table.Ge)):
                    for i in range(3):
                        for j in range(3):
                            for z in z_idx:
                                yield (table.z_grid[z], t, component, i, j, kernel[n, z, i, j])

        return self.write_csv(name, KERNEL_HEADER, rows())

    def write_norms(self, trajectory: Trajectory, name: str = "norms.csv") -> Path:
        names = sorted(trajectory.norms)

        def rows() -> Iterable[Sequence[Any]]:
            for n, t in enumerate(trajectory.times):
                for norm_id in names:
                    yield (t, norm_id, trajectory.norms[norm_id][n])

        return self.write_csv(name, NORM_HEADER, rows())

    def write_series(self, series: DecaySeries, name: str | None = None) -> Path:
        return self.write_csv(name or f"series_{series.norm_id}.csv", SERIES_HEADER, zip(series.times, series.values))

    def write_snapshots(self, trajectory: Trajectory, seed: int, directory: str = "snapshots") -> Path:
        """One ``x,value`` CSV per field and snapshot, described by ``<directory>/manifest.json``."""
        grid = trajectory.grid
        entries = []
        for n, snap in enumerate(trajectory.snapshots):
            for field_name in sorted(snap.fields):
                file_name = f"{directory}/{n:04d}_{field_name}.csv"
                self.write_csv(file_name, ("x", "value"), zip(grid.x, snap.fields[field_name]))
                entries.append({"index": n, "t": snap.t, "field": field_name, "file": Path(file_name).name})
        return self.write_json(
            f"{directory}/manifest.json",
            {
                "grid": {"L": grid.L, "N": grid.N},
                "params": trajectory.params.as_dict() if trajectory.params is not None else None,
                "seed": seed,
                "scheme": trajectory.scheme,
                "dt": trajectory.dt,
                "snapshots": entries,
            },
        )

    def write_manifest(self, name: str = "manifest.json") -> Path:
        """Checksums of every artifact written so far."""
        path = self.out_dir / name
        listing = {
            str(artifact.relative_to(self.out_dir)): {"sha256": sha256sum(artifact), "bytes": artifact.stat().st_size}
            for artifact in self.artifacts
            if artifact != path
        }
        path.write_text(json.dumps({"artifacts": listing}, sort_keys=True, indent=2) + "\n")
        return path
