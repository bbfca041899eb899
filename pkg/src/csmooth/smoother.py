"""Penalized least-squares surface fitting over the cell grid.

Given targets h at (a subset of) cell centers, optional covariates W, and a
smoothing weight lam, the fit solves

    min over (c, beta)   weight * sum_j (h_j - w_j' beta - (Psi c)_j)^2
                         + lam * d' M_E d,   with  M_E d = J c,

where c are vertex coefficients of a piecewise-linear surface, J is the
interior-edge jump operator of the mesh (see fem), M_E = diag(edge_length),
and d is the per-length jump density along each edge, so the penalty
equals lam times the integrated squared normal-derivative jump. Eliminating nothing, stationarity gives one sparse symmetric
indefinite block system in (c, d):

    [ weight * Psi'Psi   lam * J' ] [c]   [ weight * Psi'(h - W beta) ]
    [ lam * J           -lam * M_E] [d] = [ 0                         ]

which is factorized once (LU) and reused; covariates are handled by
backfitting ordinary least squares against the current surface until the
coefficients settle. The penalty vanishes exactly on affine surfaces, so
those are reproduced for every lam; ``weight`` scales the data term so
callers embedding this solve in a larger objective can pass their own
multiplier instead of re-deriving lam.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import CovariateMatrix, GridDomain, SpatialField
from .errors import CollinearCovariates, NumericalFailure, ShapeMismatch
from .fem import FemSystem

_BACKFIT_TOL = 1e-10
_BACKFIT_MAX = 1000
_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SsrModel:
    """A fitted surface: coefficients, edge Laplacian, and fitted cell values."""

    fem: FemSystem
    lam: float
    coeffs: np.ndarray      # vertex coefficients c
    laplacian: np.ndarray   # edge density d
    beta: np.ndarray        # covariate coefficients (empty without covariates)
    fitted: np.ndarray      # Psi c + W beta at every active cell
    roughness: float        # d' M_E d
    residual: float         # relative residual of the block solve


class SsrSolver:
    """Pre-factorized penalized least-squares solve for one (lam, weight, subset).

    ``subset`` restricts the data term to those active-cell indices; the
    fitted surface is still evaluated everywhere. Reuse one instance when
    solving many right-hand sides with identical settings.
    """

    def __init__(
        self,
        fem: FemSystem,
        lam: float,
        weight: float = 1.0,
        subset: np.ndarray | None = None,
    ) -> None:
        if not (np.isfinite(lam) and lam > 0):
            raise ShapeMismatch(f"smoothing weight lam must be positive, got {lam}")
        if not (np.isfinite(weight) and weight > 0):
            raise ShapeMismatch(f"data weight must be positive, got {weight}")
        self.fem = fem
        self.lam = float(lam)
        self.weight = float(weight)
        if subset is None:
            self.subset = None
            self.psi_data = fem.basis_eval
        else:
            idx = np.asarray(subset, dtype=np.int64).ravel()
            if idx.size == 0 or np.unique(idx).size != idx.size:
                raise ShapeMismatch("data subset must be nonempty and distinct")
            if idx.min() < 0 or idx.max() >= fem.tri.domain.n:
                raise ShapeMismatch("data subset index out of range")
            self.subset = idx
            self.psi_data = fem.basis_eval[idx]
        n_v, n_e = fem.n_vertices, fem.n_edges
        block = sp.bmat(
            [
                [self.weight * (self.psi_data.T @ self.psi_data), lam * fem.edge_jump.T],
                [lam * fem.edge_jump, -lam * sp.diags(fem.edge_length)],
            ],
            format="csc",
        )
        self._block = block
        self._n_v, self._n_e = n_v, n_e
        self._smoothed_cov: tuple[CovariateMatrix, np.ndarray] | None = None
        try:
            self._lu = spla.splu(block)
        except RuntimeError as exc:
            raise NumericalFailure(
                f"block system factorization failed ({exc}); the data points may "
                "not pin down the affine null space of the penalty"
            ) from exc

    def _solve_block(self, target: np.ndarray) -> np.ndarray:
        rhs = np.concatenate([self.weight * (self.psi_data.T @ target), np.zeros(self._n_e)])
        x = self._lu.solve(rhs)
        if not np.isfinite(x).all():
            raise NumericalFailure("block solve produced non-finite coefficients")
        return x

    def _smoothed_columns(self, covariates: CovariateMatrix, w_data: np.ndarray) -> np.ndarray:
        # fitted surfaces of the covariate columns; cached per covariate
        # matrix so repeated solves against the same covariates pay for the
        # column solves once
        cached = self._smoothed_cov
        if cached is not None and cached[0] is covariates:
            return cached[1]
        cols = np.empty_like(w_data)
        for j in range(w_data.shape[1]):
            xj = self._solve_block(w_data[:, j])
            cols[:, j] = self.psi_data @ xj[: self._n_v]
        self._smoothed_cov = (covariates, cols)
        return cols

    def solve(
        self,
        h: np.ndarray,
        covariates: CovariateMatrix | None = None,
        beta0: np.ndarray | None = None,
    ) -> SsrModel:
        h = np.asarray(h, dtype=float).ravel()
        n_data = self.psi_data.shape[0]
        if h.size != n_data:
            raise ShapeMismatch(f"{h.size} targets for {n_data} data cells")
        if not np.isfinite(h).all():
            raise ShapeMismatch("targets must be finite")

        if covariates is None:
            x = self._solve_block(h)
            beta = np.zeros(0)
            w_data = None
        else:
            if not covariates.domain.same_grid(self.fem.tri.domain):
                raise ShapeMismatch("covariates live on a different domain")
            w_full = covariates.values
            w_data = w_full if self.subset is None else w_full[self.subset]
            gram = w_data.T @ w_data
            try:
                cho = scipy.linalg.cho_factor(gram)
            except scipy.linalg.LinAlgError as exc:
                raise CollinearCovariates(
                    "covariate columns are linearly dependent"
                ) from exc
            if beta0 is None:
                beta = scipy.linalg.cho_solve(cho, w_data.T @ h)
            else:
                beta = np.asarray(beta0, dtype=float).ravel()
                if beta.size != covariates.q:
                    raise ShapeMismatch(
                        f"warm-start beta has {beta.size} entries for {covariates.q} covariates"
                    )
            # each sweep fits the surface to h - W beta and refits beta by
            # OLS against the remainder; by linearity of the block solve the
            # surface is smooth_h - smooth_w beta, so the sweeps cost q-vector
            # algebra instead of one block solve apiece
            smooth_w = self._smoothed_columns(covariates, w_data)
            smooth_h = self.psi_data @ self._solve_block(h)[: self._n_v]
            for _ in range(_BACKFIT_MAX):
                surface = smooth_h - smooth_w @ beta
                new_beta = scipy.linalg.cho_solve(cho, w_data.T @ (h - surface))
                step = np.max(np.abs(new_beta - beta)) if beta.size else 0.0
                beta = new_beta
                if step < _BACKFIT_TOL:
                    break
            else:
                raise NumericalFailure("covariate backfitting did not converge")
            x = self._solve_block(h - w_data @ beta)

        target = h if covariates is None else h - w_data @ beta
        residual = self._relative_residual(x, target)
        if residual > _RESIDUAL_TOL:
            raise NumericalFailure(f"block solve residual {residual:.3e} exceeds {_RESIDUAL_TOL}")

        c = x[: self._n_v]
        d = x[self._n_v:]
        fitted = self.fem.basis_eval @ c
        if covariates is not None:
            fitted = fitted + covariates.values @ beta
        roughness = float(d @ (self.fem.edge_length * d))
        return SsrModel(
            fem=self.fem,
            lam=self.lam,
            coeffs=c,
            laplacian=d,
            beta=np.asarray(beta, dtype=float),
            fitted=fitted,
            roughness=roughness,
            residual=residual,
        )

    def _relative_residual(self, x: np.ndarray, target: np.ndarray) -> float:
        rhs = np.concatenate([self.weight * (self.psi_data.T @ target), np.zeros(self._n_e)])
        r = self._block @ x - rhs
        scale = max(float(np.linalg.norm(rhs)), 1e-30)
        return float(np.linalg.norm(r)) / scale


def ssr_fit(
    fem: FemSystem,
    h: np.ndarray,
    lam: float,
    covariates: CovariateMatrix | None = None,
    weight: float = 1.0,
) -> SsrModel:
    """Fit the penalized surface to targets at every active cell."""
    return SsrSolver(fem, lam, weight=weight).solve(h, covariates)


def ssr_eval(model: SsrModel, domain: GridDomain) -> SpatialField:
    """Fitted values of a model as a field over its own domain."""
    if not model.fem.tri.domain.same_grid(domain):
        raise ShapeMismatch("model was fitted on a different domain")
    return SpatialField(domain, model.fitted)
