import logging
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ibclab import config
from ibclab.crud.settings import setting_crud
from ibclab.exceptions import ConfigError, IbcLabError
from ibclab.models.polaron import PolaronConfig, PolaronSetting, build_polaron
from ibclab.schemas.report import CheckRecord, VerificationReport
from ibclab.schemas.run_config import BoundaryParamsIn, ModelKind, RunConfig, to_complex
from ibclab.services.ibc_core import Setting, sample_lambdas
from ibclab.services.relations import LinearRelation
from ibclab.services.robin import BoundaryParams
from ibclab.utils.random_settings import make_rng, random_setting

logger = logging.getLogger(__name__)


@dataclass
class SuiteOutcome:
    checks: List[CheckRecord] = field(default_factory=list)
    table: Optional[pd.DataFrame] = None

    def guard(self, name: str, anchor: str, compute: Callable[[], CheckRecord]) -> Optional[CheckRecord]:
        """Runs one check; library errors become failed records instead of aborting the suite."""
        try:
            record = compute()
        except IbcLabError as exc:
            logger.debug("Check %s raised %s", name, exc)
            record = CheckRecord.from_error(name, anchor, exc)
        self.checks.append(record)
        return record


@dataclass
class RunContext:
    config: RunConfig
    tol: float

    @cached_property
    def rng(self) -> np.random.Generator:
        return make_rng(0 if self.config.seed is None else self.config.seed)

    @cached_property
    def polaron(self) -> PolaronSetting:
        if self.config.model != ModelKind.polaron:
            raise ConfigError(f"model {self.config.model.value} has no polaron hierarchy")
        return build_polaron(PolaronConfig(**self.config.polaron.model_dump()))

    @cached_property
    def _loaded(self):
        return setting_crud.load_with_relations(self.config.setting_path)

    @cached_property
    def setting(self) -> Setting:
        cfg = self.config
        if cfg.model == ModelKind.random_setting:
            return random_setting(self.rng, cfg.setting.n, cfg.setting.n_boundary, cfg.setting.weighted)
        if cfg.model == ModelKind.from_file:
            return self._loaded[0]
        if cfg.model == ModelKind.polaron:
            return self.polaron.setting
        raise ConfigError(f"model {cfg.model.value} has no operator setting")

    @property
    def stored_relations(self) -> Dict[str, LinearRelation]:
        return self._loaded[1] if self.config.model == ModelKind.from_file else {}

    def lambdas(self) -> List[complex]:
        return self.config.lambda_values() or list(sample_lambdas(self.setting))

    def boundary_params(self) -> List[BoundaryParams]:
        """Configured quadruples, completed symmetrically when gamma/delta are missing; random otherwise."""
        if self.config.params:
            return [params_from_input(p) for p in self.config.params]
        draws = self.rng.uniform(-2.0, 2.0, size=(self.config.samples, 2))
        return [BoundaryParams.symmetric(a, b) for a, b in draws]


def params_from_input(p: BoundaryParamsIn) -> BoundaryParams:
    alpha, beta = to_complex(p.alpha), to_complex(p.beta)
    if p.completed:
        return BoundaryParams(alpha, beta, to_complex(p.gamma), to_complex(p.delta))
    return BoundaryParams.symmetric(alpha, beta)


SuiteRunner = Callable[[RunContext], SuiteOutcome]


class SuiteRouter:
    def __init__(self, tags: Sequence[str] = ()):
        self.tags = list(tags)
        self.routes: Dict[str, SuiteRunner] = {}

    def suite(self, name: str):
        def register(runner: SuiteRunner) -> SuiteRunner:
            if name in self.routes:
                raise ValueError(f"suite {name!r} registered twice")
            self.routes[name] = runner
            return runner

        return register

    def include_router(self, router: "SuiteRouter"):
        for name, runner in router.routes.items():
            self.suite(name)(runner)

    def names(self) -> List[str]:
        return sorted(self.routes)

    def run(self, ctx: RunContext) -> "SuiteRun":
        name = ctx.config.suite.value
        if name not in self.routes:
            raise ConfigError(f"unknown suite {name!r}; known: {', '.join(self.names())}")
        report = VerificationReport(
            suite=name,
            config=ctx.config.model_dump(mode="json", exclude_none=True) | {"tolerance": ctx.tol},
        )
        logger.info("Running suite %s on model %s", name, ctx.config.model.value)
        started = time.perf_counter()
        table = None
        try:
            outcome = self.routes[name](ctx)
            report.checks.extend(outcome.checks)
            table = outcome.table
        except ConfigError:
            raise
        except IbcLabError as exc:
            report.error = f"{type(exc).__name__}: {exc}"
            logger.error("Suite %s aborted: %s", name, exc)
        report.timing["seconds"] = round(time.perf_counter() - started, 6)
        logger.info("Suite %s finished: %d checks, passed=%s", name, len(report.checks), report.passed)
        return SuiteRun(report, table)


@dataclass
class SuiteRun:
    report: VerificationReport
    table: Optional[pd.DataFrame] = None


def default_tolerance(cli_tol: Optional[float], run_config: RunConfig) -> float:
    if cli_tol is not None:
        return cli_tol
    if run_config.tolerance is not None:
        return run_config.tolerance
    return config.DEFAULT_TOL
