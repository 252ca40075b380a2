"""
Sweeper: evaluates independent parameter points with joblib and returns rows in a
scheduling-independent order (sorted by the parameter tuple).
"""
import itertools
import logging
import math
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from ibclab import config
from ibclab.exceptions import IbcLabError
from ibclab.models.moshinsky_yafaev import my_scalar_suite
from ibclab.services.ibc_core import Setting
from ibclab.services.numkernel import lowest_eigenvalue
from ibclab.services.realization import relative_deviation
from ibclab.services.robin import BoundaryParams, assemble_ibc, check_symmetry_params, ibc_constraint, ibc_resolvent

logger = logging.getLogger(__name__)

Quadruple = Tuple[complex, complex, complex, complex]


def quadruples(
    alphas: Iterable[complex], betas: Iterable[complex], gammas: Iterable[complex], deltas: Iterable[complex]
) -> List[Quadruple]:
    """Cartesian product without the degenerate alpha = beta = 0 points."""
    return [q for q in itertools.product(alphas, betas, gammas, deltas) if not (q[0] == 0 and q[1] == 0)]


def point_key(values: Sequence[complex]) -> Tuple[float, ...]:
    return tuple(x for z in values for x in (complex(z).real, complex(z).imag))


def _flatten(prefix: str, z: complex) -> Dict[str, float]:
    return {f"{prefix}_re": complex(z).real, f"{prefix}_im": complex(z).imag}


def evaluate_scalar_point(point: Quadruple, lam: complex) -> Dict:
    p = BoundaryParams(*point)
    report = my_scalar_suite(p, lam)
    row = {"key": point_key(point + (lam,))}
    for name, z in zip(("alpha", "beta", "gamma", "delta", "lambda"), point + (lam,)):
        row.update(_flatten(name, z))
    row["symmetric"] = check_symmetry_params(p)
    for record in report.checks:
        row[f"{record.name}_residual"] = record.residual
    row["passed"] = report.passed
    return row


def evaluate_setting_point(point: Quadruple, s: Setting, lam: complex, resolvent_tol: float) -> Dict:
    p = BoundaryParams(*point)
    row = {"key": point_key(point + (lam,))}
    for name, z in zip(("alpha", "beta", "gamma", "delta", "lambda"), point + (lam,)):
        row.update(_flatten(name, z))
    row["symmetric"] = check_symmetry_params(p)
    row["hermiticity"] = math.nan
    row["min_eigenvalue"] = math.nan
    row["resolvent_deviation"] = math.nan
    row["error"] = ""
    try:
        realized = assemble_ibc(s, p)
        row["hermiticity"] = realized.hermiticity()
        if row["symmetric"]:
            row["min_eigenvalue"] = lowest_eigenvalue(realized.matrix, tol=1e-6)
            row["resolvent_deviation"] = relative_deviation(
                ibc_resolvent(s, p, lam), ibc_constraint(s, p).resolvent(lam)
            )
    except IbcLabError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    deviation = row["resolvent_deviation"]
    row["passed"] = not row["symmetric"] or (
        row["error"] == "" and np.isfinite(deviation) and deviation <= resolvent_tol
    )
    return row


def run_sweep(points: Sequence, evaluate: Callable[..., Dict], n_jobs: Optional[int] = None, **kwargs) -> List[Dict]:
    n_jobs = config.N_JOBS if n_jobs is None else n_jobs
    logger.info("Sweeping %d points with n_jobs=%d", len(points), n_jobs)
    rows = Parallel(n_jobs=n_jobs)(delayed(evaluate)(point, **kwargs) for point in points)
    rows.sort(key=lambda row: row["key"])
    for row in rows:
        row.pop("key")
    return rows
