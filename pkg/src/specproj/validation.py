"""Input validation helpers shared by every module.

They mirror the ``check_array`` family from scikit-learn: each helper takes
user input, coerces it to a complex128 ndarray and raises on contract
violations.
"""

import numpy as np

HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-10


class ShapeError(ValueError):
    """Operands have incompatible dimensions."""


class PreconditionError(ValueError):
    """An input violates a documented precondition."""


class ConfigError(ValueError):
    """A configuration value is invalid or inconsistent."""


def check_state(psi, dim=None, normalized=True, tol=NORM_TOL):
    """Return ``psi`` as a 1-d complex128 array.

    Raises ShapeError for a wrong dimension and PreconditionError when
    ``normalized`` is requested and the norm differs from one by more
    than ``tol``.
    """
    psi = np.asarray(psi, dtype=np.complex128)
    if psi.ndim != 1:
        raise ShapeError(f"state must be 1-d, got shape {psi.shape}")
    if psi.shape[0] < 2:
        raise ShapeError("state dimension must be at least 2")
    if dim is not None and psi.shape[0] != dim:
        raise ShapeError(f"state has dimension {psi.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(psi)):
        raise PreconditionError("state has non-finite entries")
    if normalized:
        norm = np.linalg.norm(psi)
        if abs(norm - 1.0) > tol:
            raise PreconditionError(f"state is not normalized (norm={norm!r})")
    return psi


def normalize(psi):
    psi = np.asarray(psi, dtype=np.complex128)
    norm = np.linalg.norm(psi)
    if not norm > 0.0 or not np.isfinite(norm):
        raise PreconditionError("cannot normalize the zero vector")
    return psi / norm


def check_hermitian(h, tol=HERMITIAN_TOL):
    """Return ``h`` as a square complex128 matrix, checking Hermiticity.

    The tolerance is relative to the largest entry so rescaled operators
    are judged consistently.
    """
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ShapeError(f"operator must be square, got shape {h.shape}")
    if h.shape[0] < 2:
        raise ShapeError("operator dimension must be at least 2")
    if not np.all(np.isfinite(h)):
        raise PreconditionError("operator has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(h))))
    if np.max(np.abs(h - h.conj().T)) > tol * scale:
        raise PreconditionError("operator is not Hermitian within tolerance")
    return h


def check_random_state(seed):
    """Turn ``seed`` into a ``numpy.random.Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
