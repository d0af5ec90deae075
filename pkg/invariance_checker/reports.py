"""
InvarLab - Verdict Reports
Per-point verdicts, aggregated check reports and their JSON/table forms
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

PASS = 'pass'
FAIL = 'fail'
INCONCLUSIVE = 'inconclusive'


def aggregate_verdict(verdicts) -> str:
    """fail beats inconclusive beats pass; an empty list passes."""
    verdicts = list(verdicts)
    if FAIL in verdicts:
        return FAIL
    if INCONCLUSIVE in verdicts:
        return INCONCLUSIVE
    return PASS


def to_jsonable(value):
    """Convert numpy values (recursively) into plain JSON types."""
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if not np.isfinite(value):
            return None
        return value
    return value


@dataclass
class PointVerdict:
    """Invariance conditions evaluated at a single set point."""

    index: int
    x: np.ndarray
    normals: List[np.ndarray] = field(default_factory=list)
    kernel_residuals: List[float] = field(default_factory=list)
    drift_values: List[float] = field(default_factory=list)
    sigma_drift_values: Optional[List[float]] = None
    curvature_drift_values: Optional[List[float]] = None
    rank: int = 0
    rank_ambiguous: bool = False
    dispersion_norm: float = 0.0
    pass_kernel: bool = True
    pass_drift: bool = True
    drift_tangent: Optional[bool] = None
    verdict: str = PASS
    message: Optional[str] = None

    def to_dict(self) -> Dict:
        data = {
            'index': self.index,
            'x': self.x,
            'normals': self.normals,
            'kernel_residuals': self.kernel_residuals,
            'drift_values': self.drift_values,
            'rank': self.rank,
            'rank_ambiguous': self.rank_ambiguous,
            'dispersion_norm': self.dispersion_norm,
            'pass_kernel': self.pass_kernel,
            'pass_drift': self.pass_drift,
            'verdict': self.verdict,
        }
        if self.sigma_drift_values is not None:
            data['sigma_drift_values'] = self.sigma_drift_values
        if self.curvature_drift_values is not None:
            data['curvature_drift_values'] = self.curvature_drift_values
        if self.drift_tangent is not None:
            data['drift_tangent'] = self.drift_tangent
        if self.message:
            data['message'] = self.message
        return to_jsonable(data)


@dataclass
class CheckReport:
    """Set-level aggregation of point verdicts."""

    model_id: Dict
    set_id: Dict
    points: List[PointVerdict]
    diagnostics: Dict = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return aggregate_verdict(point.verdict for point in self.points)

    def offending_points(self) -> List[PointVerdict]:
        return [point for point in self.points if point.verdict == FAIL]

    def to_dict(self) -> Dict:
        return to_jsonable({
            'model': self.model_id,
            'set': self.set_id,
            'verdict': self.verdict,
            'n_points': len(self.points),
            'offending': [point.to_dict() for point in self.offending_points()],
            'points': [point.to_dict() for point in self.points],
            'diagnostics': self.diagnostics,
            'warnings': self.warnings,
        })

    def to_frame(self) -> pd.DataFrame:
        """One row per point: coordinates, worst residuals and verdict."""
        rows = []
        for point in self.points:
            row = {f"x{i + 1}": float(value) for i, value in enumerate(point.x)}
            row.update({
                'index': point.index,
                'n_normals': len(point.normals),
                'max_kernel_residual': max(point.kernel_residuals, default=0.0),
                'max_drift_value': max(point.drift_values, default=float('-inf')),
                'rank': point.rank,
                'verdict': point.verdict,
            })
            rows.append(row)
        return pd.DataFrame(rows)
