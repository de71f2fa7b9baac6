"""Error summaries for learned-vs-reference Green function columns.

Both kernels blow up at the source, so comparisons exclude a small
ball around each source before averaging.  Errors are normalized by
the reference column's peak magnitude on the kept points, which keeps
the number meaningful across operators whose scales differ by orders
of magnitude.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = ["SourceError", "ErrorReport", "error_report", "write_error_csv"]

DEFAULT_EXCLUSION = 0.05


@dataclass(frozen=True)
class SourceError:
    source_index: int
    n_points: int
    mean_abs_error: float
    reference_scale: float

    @property
    def relative(self) -> float:
        return self.mean_abs_error / self.reference_scale


@dataclass(frozen=True)
class ErrorReport:
    per_source: tuple[SourceError, ...]

    @property
    def aggregate(self) -> float:
        """Mean of the per-source relative errors."""
        return float(np.mean([e.relative for e in self.per_source]))

    @property
    def worst(self) -> float:
        return float(np.max([e.relative for e in self.per_source]))


def error_report(
    predicted,
    reference,
    points,
    sources,
    *,
    exclusion_radius: float = DEFAULT_EXCLUSION,
) -> ErrorReport:
    """Per-source mean |error| / max |reference| away from the sources.

    predicted, reference: (n_sources, n_points) column samples.
    points: (n_points, d); sources: (n_sources, d).  Points within
    ``exclusion_radius`` of a column's own source are dropped for that
    column only.
    """
    predicted = np.asarray(predicted, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    sources = np.atleast_2d(np.asarray(sources, dtype=np.float64))
    if predicted.shape != reference.shape:
        raise ValueError("predicted and reference shapes differ")
    if predicted.ndim != 2:
        raise ValueError("expected (n_sources, n_points) arrays")
    if predicted.shape[0] != len(sources) or predicted.shape[1] != len(points):
        raise ValueError("array shapes do not match points/sources")
    if exclusion_radius < 0:
        raise ValueError("exclusion_radius must be nonnegative")

    entries = []
    for idx, src in enumerate(sources):
        keep = np.linalg.norm(points - src, axis=1) > exclusion_radius
        if not keep.any():
            raise ValueError(
                f"exclusion radius {exclusion_radius} removes every point "
                f"for source {idx}"
            )
        ref = reference[idx, keep]
        scale = float(np.max(np.abs(ref)))
        if scale == 0.0:
            raise ValueError(f"reference column {idx} vanishes on the kept points")
        err = float(np.mean(np.abs(predicted[idx, keep] - ref)))
        entries.append(SourceError(idx, int(keep.sum()), err, scale))
    return ErrorReport(tuple(entries))


def write_error_csv(report: ErrorReport, path) -> None:
    """One row per source plus an aggregate footer row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["source", "points", "mean_abs_error", "reference_scale", "relative"]
        )
        for e in report.per_source:
            writer.writerow(
                [
                    e.source_index,
                    e.n_points,
                    f"{e.mean_abs_error:.12g}",
                    f"{e.reference_scale:.12g}",
                    f"{e.relative:.12g}",
                ]
            )
        writer.writerow(["aggregate", "", "", "", f"{report.aggregate:.12g}"])
