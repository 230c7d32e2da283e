"""Metrics CSV emission and matplotlib learning-curve figures.

Output files are written atomically (temp file in the target directory,
then rename), so a crashed run never leaves a half-written CSV behind.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
import time

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .errors import ConfigurationError
from .training import MetricsRow

METRICS_FIELDS = (
    "epoch",
    "joint_samples",
    "local_samples",
    "mean_profit",
    "std_profit",
    "elapsed_seconds",
)


def _atomic_write(path, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_metrics_csv(rows: list[MetricsRow], path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(METRICS_FIELDS)
    for r in rows:
        writer.writerow(
            [
                r.epoch,
                r.joint_samples,
                r.local_samples,
                repr(r.mean_profit),
                repr(r.std_profit),
                f"{r.elapsed_seconds:.3f}",
            ]
        )
    _atomic_write(path, buf.getvalue().encode())


def read_metrics_csv(path) -> list[MetricsRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != METRICS_FIELDS:
            raise ConfigurationError(f"{path}: expected header {','.join(METRICS_FIELDS)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append(
                    MetricsRow(
                        epoch=int(row["epoch"]),
                        joint_samples=int(row["joint_samples"]),
                        local_samples=int(row["local_samples"]),
                        mean_profit=float(row["mean_profit"]),
                        std_profit=float(row["std_profit"]),
                        elapsed_seconds=float(row["elapsed_seconds"]),
                    )
                )
            except (KeyError, ValueError):
                raise ConfigurationError(f"{path}:{lineno}: malformed metrics row") from None
    return rows


def plot_learning_curve(rows: list[MetricsRow], out_path, title: str = "learning curve") -> None:
    """Render mean profit against consumed samples; one marker per CSV row.

    The mean-profit line carries gid ``mean-profit`` and keeps every vertex
    (no path simplification), so the figure can be checked structurally.
    """
    samples = [r.joint_samples + r.local_samples for r in rows]
    mean = [r.mean_profit for r in rows]
    std = [r.std_profit for r in rows]
    with plt.rc_context({"path.simplify": False}):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        ax.fill_between(
            samples,
            [m - s for m, s in zip(mean, std)],
            [m + s for m, s in zip(mean, std)],
            alpha=0.25,
            label="±1 std",
        )
        (line,) = ax.plot(samples, mean, marker="o", markersize=3, label="mean profit")
        line.set_gid("mean-profit")
        ax.set_xlabel("environment samples")
        ax.set_ylabel("evaluation profit")
        ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        buf = io.BytesIO()
        fig.savefig(buf, format=str(out_path).rsplit(".", 1)[-1])
        plt.close(fig)
    _atomic_write(out_path, buf.getvalue())


def write_manifest(out_dir, *, config_hash: str, seed: int, command: str, extra: dict | None = None) -> None:
    """Reproducibility record for one run directory."""
    from . import __version__

    payload = {
        "version": f"restock-{__version__}+cfg.{config_hash or 'none'}",
        "config_hash": config_hash,
        "seed": seed,
        "command": command,
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    if extra:
        payload.update(extra)
    _atomic_write(
        os.path.join(out_dir, "manifest.json"),
        json.dumps(payload, indent=2, sort_keys=True).encode() + b"\n",
    )
