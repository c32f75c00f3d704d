"""CSV and manifest writers for experiment reports.

CSVs hold only deterministic content (floats via ``repr``) so two runs with
the same config and seed are byte-identical. Timings live in the manifest.
"""

from __future__ import annotations

import csv
import importlib.metadata
import io
import json
import os
import tempfile
from pathlib import Path

from .config import ScenarioConfig, parse_text
from .experiments import EXPERIMENTS, ExperimentReport, PointResult, Row, expand

CSV_HEADER = ("scenario_id", "slot", "key", "metric", "value", "seed")
MANIFEST = "manifest.json"


class ManifestMismatch(RuntimeError):
    """The output directory already holds results for a different config."""


def package_version() -> str:
    try:
        return "v" + importlib.metadata.version("artifact")
    except importlib.metadata.PackageNotFoundError:
        return "v0+unknown"


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def csv_text(rows: list[Row]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow([_cell(r.scenario_id), _cell(r.slot), _cell(r.key), r.metric, _cell(float(r.value)), r.seed])
    return buf.getvalue()


def atomic_write(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def figures_of(report: ExperimentReport) -> list[str]:
    """Figure names the preset produces, even when no point ran."""
    names = report.figures
    if not names and report.preset in EXPERIMENTS:
        names = []
        for p in expand(report.preset, report.config):
            if p.figure not in names:
                names.append(p.figure)
    return names


def emit_csv(report: ExperimentReport, out_dir: str | Path) -> list[Path]:
    """One CSV per figure; a figure with no rows still gets its header."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for fig in figures_of(report):
        path = out_dir / f"{fig}.csv"
        try:
            atomic_write(path, csv_text(report.rows(fig)))
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror}") from exc
        paths.append(path)
    return paths


def manifest(report: ExperimentReport) -> dict:
    return {
        "preset": report.preset,
        "config_hash": report.config.config_hash(),
        "config_preset": report.config.preset,
        "seed": report.seed,
        "version": package_version(),
        "config": report.config.to_text(),
        "points": [
            {
                "figure": p.figure,
                "scenario_id": p.scenario_id,
                "config_hash": p.config_hash,
                "status": p.status,
                "seconds": round(p.seconds, 3),
                "rows": [[r.scenario_id, r.slot, r.key, r.metric, r.value, r.seed] for r in p.rows],
            }
            for p in report.points
        ],
    }


def check_manifest(out_dir: str | Path, config_hash: str) -> None:
    """Refuse to mix results from different configs in one directory."""
    path = Path(out_dir) / MANIFEST
    if not path.exists():
        return
    try:
        previous = json.loads(path.read_text()).get("config_hash")
    except (json.JSONDecodeError, AttributeError):
        raise ManifestMismatch(f"{path} is not a readable manifest") from None
    if previous != config_hash:
        raise ManifestMismatch(
            f"{path} was written for config {previous[:12] if previous else None}, not {config_hash[:12]}; "
            "choose another --out directory"
        )


def write_report(report: ExperimentReport, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    check_manifest(out_dir, report.config.config_hash())
    paths = emit_csv(report, out_dir)
    path = out_dir / MANIFEST
    atomic_write(path, json.dumps(manifest(report), indent=2, sort_keys=True) + "\n")
    return paths + [path]


def load_report(out_dir: str | Path) -> ExperimentReport:
    """Rebuild a report from a saved manifest (rows, statuses and config)."""
    path = Path(out_dir) / MANIFEST
    data = json.loads(path.read_text())
    config = ScenarioConfig.from_values(parse_text(data["config"]), data["config_preset"])
    if config.config_hash() != data["config_hash"]:
        raise ManifestMismatch(f"{path}: stored config does not match its hash")
    points = [
        PointResult(
            p["figure"], p["scenario_id"], p["config_hash"], p["status"],
            [Row(*r) for r in p["rows"]], p["seconds"],
        )
        for p in data["points"]
    ]
    return ExperimentReport(data["preset"], data["seed"], config, points)
