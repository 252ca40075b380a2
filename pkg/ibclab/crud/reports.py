import json
import logging
from pathlib import Path
from typing import Iterable, Mapping, Union

import numpy as np
import pandas as pd

from ibclab.schemas.report import VerificationReport

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class ReportCRUD:
    def dumps(self, report: VerificationReport) -> str:
        """Canonical JSON: sorted keys, 2-space indent"""
        return json.dumps(report.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"

    def save_report(self, report: VerificationReport, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.dumps(report))
        logger.info("Wrote report %s (passed=%s) to %s", report.suite, report.passed, path)
        return path

    def load_report(self, path: PathLike) -> VerificationReport:
        data = json.loads(Path(path).read_text())
        data.pop("passed", None)
        return VerificationReport.model_validate(data)

    def save_table(self, rows: Union[pd.DataFrame, Iterable[Mapping]], path: PathLike) -> Path:
        frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows))
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, sep=",", decimal=".")
        logger.info("Wrote %d rows to %s", len(frame), path)
        return path

    def spectrum_frame(self, values: np.ndarray) -> pd.DataFrame:
        """Ascending real eigenvalues, or (re, im) columns when the spectrum is complex"""
        values = np.asarray(values)
        if np.iscomplexobj(values) and np.any(values.imag != 0):
            return pd.DataFrame({"index": np.arange(values.size), "re": values.real, "im": values.imag})
        return pd.DataFrame({"index": np.arange(values.size), "eigenvalue": np.sort(values.real)})


report_crud = ReportCRUD()
