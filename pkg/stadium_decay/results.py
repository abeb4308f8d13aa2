"""
Result persistence: CSV tables, JSON metadata and the per-run summary.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.12g"


@dataclass
class Check:
    """One pass/fail comparison recorded in the run summary."""

    name: str
    value: Optional[float]
    bound: Any
    passed: bool

    def to_dict(self) -> Dict:
        return {"name": self.name, "value": self.value, "bound": self.bound, "pass": bool(self.passed)}


def to_jsonable(value: Any) -> Any:
    """
    Convert numpy scalars/arrays, tuples and non-finite floats to plain JSON.

    NaN and infinities become ``None``; complex numbers become ``[re, im]``.
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [to_jsonable(float(value.real)), to_jsonable(float(value.imag))]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


@dataclass
class ResultWriter:
    """
    Collects the artifacts and checks of one task run under ``out_dir``.

    Args:
        out_dir: Output directory, created on first write
    """

    out_dir: Path
    artifacts: List[str] = field(default_factory=list)
    checks: List[Check] = field(default_factory=list)
    failures: List[Dict] = field(default_factory=list)

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)

    def _path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / name
        if name not in self.artifacts:
            self.artifacts.append(name)
        return path

    def write_table(self, name: str, frame: pd.DataFrame) -> Path:
        path = self._path(name)
        frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
        logger.debug("Wrote %d rows to %s", len(frame), path)
        return path

    def write_json(self, name: str, data: Any) -> Path:
        path = self._path(name)
        with open(path, "w") as f:
            json.dump(to_jsonable(data), f, indent=2, sort_keys=True)
        logger.debug("Wrote %s", path)
        return path

    def write_figure(self, name: str, fig) -> Optional[Path]:
        """Save a plotly figure as SVG; listed as an artifact only when the export worked."""
        from .plots import save_svg

        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / name
        if not save_svg(fig, path):
            return None
        self.artifacts.append(name)
        return path

    def add_check(self, name: str, value: Optional[float], bound: Any, passed: bool) -> Check:
        check = Check(name, to_jsonable(value), to_jsonable(bound), bool(passed))
        self.checks.append(check)
        level = logging.INFO if check.passed else logging.WARNING
        logger.log(level, "Check %s: value=%s bound=%s -> %s", name, check.value, check.bound,
                   "pass" if check.passed else "FAIL")
        return check

    def add_failure(self, record: Dict) -> None:
        """Record a numerical failure that did not abort the task; the run then exits non-zero."""
        self.failures.append(to_jsonable(record))
        logger.error("Numerical failure: %s", record)

    @property
    def all_passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def write_summary(self, task: str, config_hash: str, fits: Optional[Dict] = None) -> Path:
        """Write ``summary.json``; it lists every artifact written before it."""
        summary = {
            "task": task,
            "config_hash": config_hash,
            "checks": [check.to_dict() for check in self.checks],
            "artifacts": list(self.artifacts),
            "fits": fits or {},
            "failures": list(self.failures),
        }
        path = self.write_json("summary.json", summary)
        passed = sum(check.passed for check in self.checks)
        logger.info("%s: %d/%d checks passed, summary at %s", task, passed, len(self.checks), path)
        return path
