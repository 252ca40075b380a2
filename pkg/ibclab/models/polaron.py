# ibclab/models/polaron.py
"""Discretized one-dimensional polaron hierarchy.

H = sum_{n <= n_max} H^(n), H^(n) = functions of a particle position x and a multiset Y of
n boson positions on a uniform grid of [-R, R]. L = -Delta_x + N with Dirichlet central
differences in x. The boundary space is dH = sum_{n=1}^{n_max} dH^(n) with dH^(n) = H^(n-1),
A is the symmetrised coincidence evaluation f -> sqrt(n) f(x, Y + {x}) and I is the block
identity dH^(n) -> H^(n-1). The creation direction out of the top sector is cut.

Basis order inside a sector: index = multiset_index * n_x + grid_index.
"""
import logging
import math
from collections import Counter
from dataclasses import dataclass, replace
from functools import cached_property
from itertools import combinations_with_replacement
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.linalg as sla

from ibclab import config
from ibclab.exceptions import IbcLabError, ParameterError, SpectrumError
from ibclab.schemas.report import CheckRecord, VerificationReport
from ibclab.services.ibc_core import DomainVector, Setting, build_setting, dirichlet_op, dtn_op, embed
from ibclab.services.numkernel import ComplexMatrix, WeightedSpace, hermitian_eig, lowest_eigenvalue, solve
from ibclab.services.realization import relative_deviation
from ibclab.services.relations import LinearRelation, rel_from_coefficients
from ibclab.services.robin import BoundaryParams, assemble_ibc, gamma_transform, ibc_constraint, ibc_resolvent

logger = logging.getLogger(__name__)

GridFunction = Union[Sequence[complex], np.ndarray, Callable[[np.ndarray], np.ndarray]]

# relative distance of a discrete G block norm from its continuum value
G_CONTINUUM_RTOL = 0.1


@dataclass(frozen=True)
class PolaronConfig:
    n_x: int = 16
    box_halfwidth: float = 4.0
    n_max: int = 2
    lambda0: float = -1.0
    laplacian_bc: str = "dirichlet"

    def __post_init__(self):
        if self.n_x < 4:
            raise ParameterError(f"n_x must be at least 4, got {self.n_x}")
        if self.n_max < 1:
            raise ParameterError(f"n_max must be at least 1, got {self.n_max}")
        if not self.box_halfwidth > 0:
            raise ParameterError(f"box_halfwidth must be positive, got {self.box_halfwidth}")
        if not self.lambda0 < 0:
            raise SpectrumError(f"lambda0 must be negative, got {self.lambda0}")
        if self.laplacian_bc != "dirichlet":
            raise ParameterError(f"unsupported laplacian_bc {self.laplacian_bc!r}")

    @property
    def h(self) -> float:
        return 2 * self.box_halfwidth / (self.n_x - 1)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(-self.box_halfwidth, self.box_halfwidth, self.n_x)

    def sector_dims(self) -> Tuple[int, ...]:
        return tuple(self.n_x * math.comb(self.n_x + n - 1, n) for n in range(self.n_max + 1))

    def refined(self) -> "PolaronConfig":
        """Same box with the grid spacing halved."""
        return replace(self, n_x=2 * self.n_x - 1)


def second_difference(n_x: int, h: float) -> np.ndarray:
    """Dirichlet central-difference Delta on n_x interior points."""
    return (np.diag(-2.0 * np.ones(n_x)) + np.diag(np.ones(n_x - 1), 1) + np.diag(np.ones(n_x - 1), -1)) / h**2


def _multiset_weight(multiset: Tuple[int, ...], h: float) -> float:
    multiplicities = Counter(multiset).values()
    return h ** (len(multiset) + 1) * math.factorial(len(multiset)) / math.prod(math.factorial(m) for m in multiplicities)


@dataclass(frozen=True, eq=False)
class PolaronSetting:
    config: PolaronConfig
    setting: Setting
    multisets: Tuple[Tuple[Tuple[int, ...], ...], ...]

    @property
    def sector_dims(self) -> Tuple[int, ...]:
        return tuple(self.config.n_x * len(m) for m in self.multisets)

    @cached_property
    def sector_offsets(self) -> Tuple[int, ...]:
        return tuple(int(x) for x in np.concatenate([[0], np.cumsum(self.sector_dims)]))

    def sector_slice(self, n: int) -> slice:
        if not 0 <= n <= self.config.n_max:
            raise ParameterError(f"sector {n} outside 0..{self.config.n_max}")
        return slice(self.sector_offsets[n], self.sector_offsets[n + 1])

    def boundary_slice(self, n: int) -> slice:
        """Block dH^(n), n = 1..n_max; it shares coordinates with H^(n-1)."""
        if not 1 <= n <= self.config.n_max:
            raise ParameterError(f"boundary block {n} outside 1..{self.config.n_max}")
        return slice(self.sector_offsets[n - 1], self.sector_offsets[n])

    @cached_property
    def particle_numbers(self) -> np.ndarray:
        return np.repeat(np.arange(self.config.n_max + 1), self.sector_dims).astype(float)

    def number_operator(self) -> ComplexMatrix:
        return ComplexMatrix(np.diag(self.particle_numbers), self.setting.H, self.setting.H)

    @cached_property
    def laplacian_x(self) -> ComplexMatrix:
        cfg = self.config
        D = second_difference(cfg.n_x, cfg.h)
        blocks = [np.kron(np.eye(len(m)), D) for m in self.multisets]
        return ComplexMatrix(sla.block_diag(*blocks), self.setting.H, self.setting.H)

    @cached_property
    def boundary_positions(self) -> np.ndarray:
        """Grid index of the particle coordinate for every boundary coordinate."""
        n_bnd = self.setting.n_boundary
        return np.tile(np.arange(self.config.n_x), n_bnd // self.config.n_x)

    def lift_grid_function(self, values: GridFunction) -> ComplexMatrix:
        """Multiplication by a function of the particle position on dH."""
        if callable(values):
            values = values(self.config.grid)
        values = np.asarray(values, dtype=complex)
        if values.shape != (self.config.n_x,):
            raise ParameterError(f"grid function must have {self.config.n_x} values, got shape {values.shape}")
        dH = self.setting.dH
        return ComplexMatrix(np.diag(values[self.boundary_positions]), dH, dH)

    def block(self, m: ComplexMatrix, rows: slice, cols: slice, name: str = "") -> ComplexMatrix:
        domain = WeightedSpace(m.domain.weights[cols], f"{name}:in")
        codomain = WeightedSpace(m.codomain.weights[rows], f"{name}:out")
        return ComplexMatrix(m.entries[rows, cols], domain, codomain)


def build_polaron(cfg: PolaronConfig) -> PolaronSetting:
    dims = cfg.sector_dims()
    total = sum(dims)
    if total > config.SECTOR_CAP:
        raise ParameterError(f"Fock dimension {total} exceeds the cap {config.SECTOR_CAP} (IBCLAB_SECTOR_CAP)")
    bottom = 4.0 / cfg.h**2 * np.sin(np.pi / (2 * (cfg.n_x + 1))) ** 2
    if not cfg.lambda0 < bottom:
        raise SpectrumError(f"lambda0={cfg.lambda0} is not below spec(L) starting at {bottom:.6g}")

    h, n_x = cfg.h, cfg.n_x
    multisets = tuple(tuple(combinations_with_replacement(range(n_x), n)) for n in range(cfg.n_max + 1))
    index_maps: List[Dict[Tuple[int, ...], int]] = [{m: k for k, m in enumerate(ms)} for ms in multisets]
    weights = np.concatenate([np.repeat([_multiset_weight(m, h) for m in ms], n_x) for ms in multisets])
    offsets = np.concatenate([[0], np.cumsum(dims)])

    H = WeightedSpace(weights, "H_fock")
    n_boundary = int(offsets[cfg.n_max])
    dH = WeightedSpace(weights[:n_boundary], "dH_fock")

    D = second_difference(n_x, h)
    L_blocks = [np.kron(np.eye(len(ms)), -D) + n * np.eye(len(ms) * n_x) for n, ms in enumerate(multisets)]
    L = ComplexMatrix(sla.block_diag(*L_blocks), H, H)

    A = np.zeros((n_boundary, total))
    for n in range(1, cfg.n_max + 1):
        for k, reduced in enumerate(multisets[n - 1]):
            for i in range(n_x):
                full = tuple(sorted(reduced + (i,)))
                row = offsets[n - 1] + k * n_x + i
                col = offsets[n] + index_maps[n][full] * n_x + i
                A[row, col] = np.sqrt(n)
    A = ComplexMatrix(A, H, dH)
    I = ComplexMatrix(np.vstack([np.eye(n_boundary), np.zeros((total - n_boundary, n_boundary))]), dH, H)

    # T = A G0, the canonical extension of A to rg G
    G0 = solve(cfg.lambda0 - L, A.H)
    T = A @ G0
    T = 0.5 * (T + T.H)

    s = build_setting(L, A, I, T, cfg.lambda0)
    logger.info("Built polaron hierarchy: sectors %s, boundary dimension %d, h=%.4f", dims, n_boundary, h)
    return PolaronSetting(cfg, s, multisets)


def _check_off_half_line(lam: complex):
    lam = complex(lam)
    if lam.imag == 0 and lam.real >= 0:
        raise SpectrumError(f"lambda={lam} lies on the positive half-line")


def dtn_continuum_bound(n: int, lam: complex) -> float:
    """(n+1) / (2 |sqrt(n+1-lam)|)."""
    return (n + 1) / (2 * abs(np.sqrt(complex(n + 1 - lam))))


def g_mu_norm(mu: complex) -> float:
    """L2 norm of g_mu(x) = -exp(-sqrt(mu)|x|) / (2 sqrt(mu))."""
    root = np.sqrt(complex(mu))
    return float(1.0 / (2 * np.sqrt(abs(mu) * root.real)))


def g_continuum_norm(n: int, lam: complex) -> float:
    """sqrt(n+1) / (2 |n+1-lam|^{1/2} Re(sqrt(n+1-lam))^{1/2})."""
    return float(np.sqrt(n + 1) * g_mu_norm(n + 1 - lam))


def polaron_sector_dtn(ps: PolaronSetting, lam: complex, n: int) -> ComplexMatrix:
    """Block of T_lam on dH^(n+1) = H^(n), n = 0..n_max-1."""
    _check_off_half_line(lam)
    block = ps.boundary_slice(n + 1)
    return ps.block(dtn_op(ps.setting, lam), block, block, f"T{n}")


def polaron_g_norm(ps: PolaronSetting, lam: complex, n: int) -> float:
    """Weighted norm of G_lam from dH^(n+1) = H^(n) into H^(n+1)."""
    _check_off_half_line(lam)
    G = dirichlet_op(ps.setting, lam)
    return ps.block(G, ps.sector_slice(n + 1), ps.boundary_slice(n + 1), f"G{n}").norm()


def refinement_study(cfg: PolaronConfig, lam: float = -1.0, levels: int = 2, n_max: int = 1) -> pd.DataFrame:
    """Discrete G and T block norms against their continuum values under h-halving."""
    rows = []
    current = replace(cfg, n_max=n_max)
    for _ in range(levels):
        ps = build_polaron(current)
        for n in range(n_max):
            T_block = polaron_sector_dtn(ps, lam, n)
            rows.append({
                "n_x": current.n_x,
                "h": current.h,
                "sector": n,
                "g_norm": polaron_g_norm(ps, lam, n),
                "g_continuum": g_continuum_norm(n, lam),
                "t_norm": T_block.norm(),
                "t_bound": dtn_continuum_bound(n, lam),
                "t_max_eig": float(hermitian_eig(0.5 * (T_block + T_block.H), tol=1e-8)[0][-1]),
            })
        current = current.refined()
    return pd.DataFrame(rows)


def polaron_invariance_report(ps: PolaronSetting, lam: complex, tol: float = None) -> VerificationReport:
    tol = config.DEFAULT_TOL if tol is None else tol
    _check_off_half_line(lam)
    s, n_max = ps.setting, ps.config.n_max
    report = VerificationReport(suite="polaron_invariance", config={"lambda": str(lam), "n_max": n_max})
    G = dirichlet_op(s, lam)
    X = G @ s.i_star

    for n in range(n_max):
        value = ps.block(X, ps.sector_slice(n + 1), ps.sector_slice(n), f"GI{n}").norm()
        continuum = g_continuum_norm(n, lam)
        report.checks.append(CheckRecord.from_residual(
            f"block_norm_{n}", "sector-shift-norms", abs(value - continuum) / continuum, G_CONTINUUM_RTOL,
            detail=f"norm {value:.6f}, continuum {continuum:.6f}",
        ))

    mask = np.zeros(X.shape, dtype=bool)
    for n in range(n_max):
        mask[ps.sector_slice(n + 1), ps.sector_slice(n)] = True
    leak = float(np.max(np.abs(X.entries[~mask]), initial=0.0))
    report.checks.append(CheckRecord.from_residual("lower_shift", "sector-raising-structure", leak, tol))

    # X^(n_max+1) = G (I* G)^n_max I*
    Y = s.i_star @ G
    tail = ComplexMatrix.identity(s.dH)
    for _ in range(n_max):
        tail = tail @ Y
    power = G @ (tail @ s.i_star)
    report.checks.append(CheckRecord.from_residual("nilpotent", "finite-neumann-series", power.frobenius(), tol))

    # N X - X (N + 1) entrywise, N being diagonal
    numbers = ps.particle_numbers
    commutator = ComplexMatrix(X.entries * (numbers[:, None] - numbers[None, :] - 1.0), s.H, s.H)
    report.checks.append(CheckRecord.from_residual(
        "number_commutation", "number-domain-invariance", commutator.norm() / (1.0 + X.norm()), tol,
    ))

    try:
        gamma = gamma_transform(s, BoundaryParams(0.0, 1.0, 1.0, 0.0), lam)
        residual = (gamma - (gamma @ G) @ s.i_star - 1.0).norm()
        report.checks.append(CheckRecord.from_residual("gamma_inverse", "finite-neumann-series", residual, tol))
    except IbcLabError as exc:
        report.checks.append(CheckRecord.from_error("gamma_inverse", "finite-neumann-series", exc))
    return report


def rescale_identification(
    ps: PolaronSetting, alpha_fn: GridFunction, beta_fn: GridFunction
) -> Tuple[PolaronSetting, ComplexMatrix, ComplexMatrix]:
    """Replaces I by I (conj(a) + conj(b))^{-1} and normalizes (a, b) to a + b = 1."""
    alpha = ps.lift_grid_function(alpha_fn)
    beta = ps.lift_grid_function(beta_fn)
    total = np.diag(alpha.entries) + np.diag(beta.entries)
    if np.min(np.abs(total)) < 1e-12:
        raise ParameterError("alpha + beta vanishes on the grid; the identification cannot be rescaled")
    dH = ps.setting.dH
    scale = ComplexMatrix(np.diag(1.0 / np.conj(total)), dH, dH)
    rescaled = PolaronSetting(ps.config, ps.setting.with_identification(ps.setting.I @ scale), ps.multisets)
    normalize = ComplexMatrix(np.diag(1.0 / total), dH, dH)
    return rescaled, alpha @ normalize, beta @ normalize


def pointwise_robin_relation(
    ps: PolaronSetting, alpha_fn: GridFunction, beta_fn: GridFunction
) -> Tuple[LinearRelation, PolaronSetting]:
    """{(a f, -b f)} for multiplication by a(x), b(x); rescales I unless a + b = 1 on the grid.

    The returned setting is the one the relation belongs to.
    """
    alpha = ps.lift_grid_function(alpha_fn)
    beta = ps.lift_grid_function(beta_fn)
    if np.allclose(np.diag(alpha.entries) + np.diag(beta.entries), 1.0, rtol=0, atol=1e-12):
        return rel_from_coefficients(alpha, beta), ps
    rescaled, alpha, beta = rescale_identification(ps, alpha_fn, beta_fn)
    logger.info("Rescaled the identification so that alpha + beta = 1")
    return rel_from_coefficients(alpha, beta), rescaled


def local_b_estimate(ps: PolaronSetting, v: DomainVector, n: int) -> Tuple[np.ndarray, float]:
    """Derivative-jump stencil h sqrt(n) Delta_x f at coincidence points, and its distance to B v on dH^(n)."""
    if not 1 <= n <= ps.config.n_max:
        raise ParameterError(f"sector {n} has no boundary block")
    s = ps.setting
    f = embed(s, v)
    jump = ps.config.h * (s.A @ (ps.laplacian_x @ f))
    block = ps.boundary_slice(n)
    estimate = jump[block]
    weights = s.dH.weights[block]
    deviation = float(np.sqrt(np.sum(weights * np.abs(estimate - v.phi[block]) ** 2)))
    return estimate, deviation


def bounded_below_report(
    ps: PolaronSetting, p: BoundaryParams, tol: float = None, resolvent_tol: float = 1e-8
) -> VerificationReport:
    """Hermiticity, finite bottom of the spectrum and Krein resolvent agreement below it."""
    tol = config.DEFAULT_TOL if tol is None else tol
    s = ps.setting
    report = VerificationReport(suite="polaron_ibc", config={"params": str(p.as_tuple())})
    try:
        realized = assemble_ibc(s, p)
        report.checks.append(CheckRecord.from_residual(
            "ibc_hermitian", "polaron-ibc-self-adjoint", realized.hermiticity(), tol,
        ))
        bottom = lowest_eigenvalue(realized.matrix, tol=1e-6)
        report.config["bottom"] = bottom
        report.checks.append(CheckRecord.from_flag(
            "ibc_bounded_below", "polaron-ibc-self-adjoint", np.isfinite(bottom), detail=f"min eigenvalue {bottom:.6g}",
        ))
        lam = bottom - 1.0
        krein = ibc_resolvent(s, p, lam)
        direct = ibc_constraint(s, p).resolvent(lam)
        report.checks.append(CheckRecord.from_residual(
            "ibc_resolvent", "ibc-krein-resolvent", relative_deviation(krein, direct), resolvent_tol,
            detail=f"lambda={lam:.6g}",
        ))
    except IbcLabError as exc:
        report.error = f"{type(exc).__name__}: {exc}"
    return report


def attractive_experiment(ps: PolaronSetting, c: float, lam: Optional[float] = None) -> VerificationReport:
    """Constant (a, b) = (c, 1 - c) with a conj(b) > 0; every record is informational."""
    if not 0 < c < 1:
        raise ParameterError(f"attractive regime needs 0 < c < 1, got {c}")
    s = ps.setting
    p = BoundaryParams.symmetric(c, 1.0 - c)
    report = VerificationReport(suite="polaron_experiment", config={"c": c})
    try:
        realized = assemble_ibc(s, p)
        report.checks.append(CheckRecord.from_residual(
            "ibc_hermitian", "attractive-regime", realized.hermiticity(), config.DEFAULT_TOL, gated=False,
        ))
        bottom = lowest_eigenvalue(realized.matrix, tol=1e-6)
        report.checks.append(CheckRecord.from_residual(
            "ibc_bottom", "attractive-regime", bottom, 0.0, gated=False, detail="min eigenvalue",
        ))
        point = bottom - 1.0 if lam is None else lam
        deviation = relative_deviation(ibc_resolvent(s, p, point), ibc_constraint(s, p).resolvent(point))
        report.checks.append(CheckRecord.from_residual(
            "ibc_resolvent", "attractive-regime", deviation, 1e-8, gated=False, detail=f"lambda={point:.6g}",
        ))
    except IbcLabError as exc:
        report.checks.append(CheckRecord.from_residual(
            "ibc_failure", "attractive-regime", float("nan"), 0.0, gated=False, detail=f"{type(exc).__name__}: {exc}",
        ))
    logger.info("Attractive experiment c=%g finished", c)
    return report
