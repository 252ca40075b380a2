import logging

import pandas as pd

from ibclab.routers.base import RunContext, SuiteOutcome, SuiteRouter
from ibclab.schemas.report import CheckRecord
from ibclab.schemas.run_config import ModelKind, to_complex
from ibclab.workers.sweeper import evaluate_scalar_point, evaluate_setting_point, quadruples, run_sweep

logger = logging.getLogger(__name__)

router = SuiteRouter(tags=["sweep"])


def _row_name(row: dict) -> str:
    values = [complex(row[f"{k}_re"], row[f"{k}_im"]) for k in ("alpha", "beta", "gamma", "delta")]
    return "sweep(" + ",".join(f"{z.real:g}{z.imag:+g}j" for z in values) + f")@{row['lambda_re']:g}"


@router.suite("sweep")
def sweep_suite(ctx: RunContext) -> SuiteOutcome:
    spec = ctx.config.sweep
    points = quadruples(
        [to_complex(z) for z in spec.alphas],
        [to_complex(z) for z in spec.betas],
        [to_complex(z) for z in spec.gammas],
        [to_complex(z) for z in spec.deltas],
    )
    lambdas = ctx.config.lambda_values() or [-1.0]
    rows = []
    for lam in lambdas:
        if ctx.config.model == ModelKind.moshinsky_yafaev:
            rows.extend(run_sweep(points, evaluate_scalar_point, lam=lam))
        else:
            rows.extend(run_sweep(
                points, evaluate_setting_point, s=ctx.setting, lam=lam,
                resolvent_tol=ctx.config.resolvent_tolerance,
            ))
    logger.info("Sweep produced %d rows", len(rows))
    checks = [
        CheckRecord.from_flag(_row_name(row), "parameter-sweep", row["passed"],
                              detail="symmetric" if row["symmetric"] else "not symmetric")
        for row in rows
    ]
    return SuiteOutcome(checks=checks, table=pd.DataFrame(rows))
