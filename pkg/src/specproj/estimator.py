"""scikit-learn style wrapper: fit on a Hamiltonian, project rows of states."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .linalg import eigendecompose, to_dense
from .projector import ConvergenceCriteria, cluster_spectrum, make_schedule, run_projection
from .validation import ShapeError, check_hermitian


class SpectralProjector(BaseEstimator, TransformerMixin):
    """Project each input state onto an eigenstate of the fitted Hamiltonian.

    Row ``i`` of every call uses ``default_rng([random_state, i])``, so
    results for a row do not depend on the rest of the batch.
    """

    def __init__(self, schedule="IV", dt=1.0, phi=0.0, variance_threshold=1e-10, max_steps=5000,
                 random_state=0):
        self.schedule = schedule
        self.dt = dt
        self.phi = phi
        self.variance_threshold = variance_threshold
        self.max_steps = max_steps
        self.random_state = random_state

    def fit(self, H, y=None):
        self.spectrum_ = eigendecompose(check_hermitian(to_dense(H)))
        self.clusters_ = cluster_spectrum(self.spectrum_.eigenvalues)
        self.n_features_in_ = self.spectrum_.dim
        return self

    def _run(self, X):
        check_is_fitted(self, "spectrum_")
        X = np.atleast_2d(np.asarray(X, dtype=np.complex128))
        if X.shape[1] != self.n_features_in_:
            raise ShapeError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        sched = make_schedule(self.schedule, dt=self.dt, phi=self.phi)
        crit = ConvergenceCriteria(self.variance_threshold, self.max_steps)
        out = []
        for i, row in enumerate(X):
            rng = np.random.default_rng([self.random_state, i])
            out.append(run_projection(row / np.linalg.norm(row), self.spectrum_, sched, crit, rng,
                                      clusters=self.clusters_))
        return out

    def transform(self, X):
        """Final (projected) states, one row per input row."""
        return np.array([r.trace.final_state for r in self._run(X)])

    def predict(self, X):
        """Eigenvalue reached by each row; NaN-free only for converged rows."""
        return np.array([r.eigen_value for r in self._run(X)])

    def predict_cluster(self, X):
        """Index of the degenerate cluster reached, -1 when unconverged."""
        return np.array([-1 if r.eigen_index is None else r.eigen_index for r in self._run(X)])
