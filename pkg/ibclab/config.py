import os

from dotenv import load_dotenv

from ibclab.exceptions import ConfigError

load_dotenv()


def _float_env(name: str, default: str) -> float:
    raw = os.getenv(name, default)
    try:
        value = float(raw)
    except ValueError as exc:
        raise ConfigError(f"{name} must be a float, got {raw!r}") from exc
    if not value > 0:
        raise ConfigError(f"{name} must be positive, got {value}")
    return value


def _int_env(name: str, default: str) -> int:
    raw = os.getenv(name, default)
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{name} must be an integer, got {raw!r}") from exc


DEFAULT_TOL = _float_env("IBCLAB_TOL", "1e-10")
RANK_RTOL = _float_env("IBCLAB_RANK_RTOL", "1e-9")
COND_GUARD = _float_env("IBCLAB_COND_GUARD", "1e12")
SECTOR_CAP = _int_env("IBCLAB_SECTOR_CAP", "20000")
N_JOBS = _int_env("IBCLAB_N_JOBS", "1")
LOG_LEVEL = os.getenv("IBCLAB_LOG_LEVEL", "INFO").upper()

# hermiticity gate for inputs (L, T) and eigensolver preconditions
HERMITIAN_TOL = 1e-12
# minimal distance of lambda0 from spec(L)
SPECTRAL_GAP = 1e-8
# resolvent-set test: sigma_min(lambda - M) > RESOLVENT_RTOL * ||M||
RESOLVENT_RTOL = 1e-9
NEUMANN_TOL = 1e-14
# above this dimension norms and bottom eigenvalues use ARPACK and sparse maps use SuperLU
DENSE_LIMIT = _int_env("IBCLAB_DENSE_LIMIT", "400")
# nonzero fraction below which a large map is factored as sparse
SPARSE_DENSITY = 0.05
# LU factors of lambda - L kept per setting
FACTOR_CACHE = 4
# condition bound for eliminating the boundary block of a constraint or the f-block of a bordered system
ELIMINATION_COND = 1e8
