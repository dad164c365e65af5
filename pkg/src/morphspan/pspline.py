"""Penalized B-splines: cubic basis on equally spaced knots with a
second-order difference penalty, plus the sum-to-zero reparameterization
that keeps the model intercept identifiable."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline
from scipy.linalg import null_space

from .errors import DegenerateInputError

DEGREE = 3  # cubic


def knot_vector(lo: float, hi: float, n_basis: int):
    """Equally spaced (open-uniform exterior) knots for ``n_basis``
    cubic B-splines covering [lo, hi]."""
    if n_basis < DEGREE + 1:
        raise DegenerateInputError(f"need at least {DEGREE + 1} basis functions")
    if not hi > lo:
        raise DegenerateInputError("domain must have positive width")
    h = (hi - lo) / (n_basis - DEGREE)
    return lo + h * np.arange(-DEGREE, n_basis + 1)


def basis_matrix(x, knots):
    """Dense (n, n_basis) cubic B-spline design matrix."""
    x = np.asarray(x, dtype=float)
    lo, hi = knots[DEGREE], knots[-DEGREE - 1]
    if np.any(x < lo - 1e-9) or np.any(x > hi + 1e-9):
        raise DegenerateInputError(
            f"x outside spline domain [{lo:g}, {hi:g}]; no extrapolation"
        )
    xc = np.clip(x, lo, hi)
    # Evaluate at hi via the left-continuous limit so the last basis is 1.
    eps = (hi - lo) * 1e-12
    xc = np.where(xc >= hi, hi - eps, xc)
    return BSpline.design_matrix(xc, knots, DEGREE).toarray()


def difference_penalty_root(n_basis: int, order: int = 2):
    """Difference matrix D with penalty D'D on adjacent coefficients."""
    if order < 1 or order >= n_basis:
        raise DegenerateInputError("invalid penalty order")
    D = np.eye(n_basis)
    for _ in range(order):
        D = np.diff(D, axis=0)
    return D


@dataclass
class SplineBlock:
    """Sum-to-zero reparameterized P-spline block for one smooth term.

    The raw basis B has the constant function in its span; the
    constraint sum_i f(x_i) = 0 is absorbed so columns of Z = B @ C are
    identifiable next to an intercept. ``coefs_full`` returned by fits
    live in the raw basis (C @ gamma) so evaluation is just B(x) @ coefs.
    """

    knots: np.ndarray
    C: np.ndarray  # (n_basis, n_basis - 1) constraint null-space basis
    Z: np.ndarray  # (n, n_basis - 1) constrained design at training x
    D: np.ndarray  # difference root on raw coefficients
    DC: np.ndarray  # penalty root on constrained coefficients
    domain: tuple

    @property
    def n_coef(self):
        return self.C.shape[1]

    def to_full(self, gamma):
        return self.C @ np.asarray(gamma)

    def evaluate(self, x, coefs_full):
        return basis_matrix(x, self.knots) @ np.asarray(coefs_full)


def make_spline_block(x, n_basis: int = 20, penalty_order: int = 2) -> SplineBlock:
    x = np.asarray(x, dtype=float)
    lo, hi = float(x.min()), float(x.max())
    knots = knot_vector(lo, hi, n_basis)
    B = basis_matrix(x, knots)
    colsum = B.sum(axis=0)
    C = null_space(colsum[None, :])
    D = difference_penalty_root(n_basis, penalty_order)
    return SplineBlock(
        knots=knots, C=C, Z=B @ C, D=D, DC=D @ C, domain=(lo, hi)
    )


def fit_pspline(x, y, n_basis: int = 20, lam: float = 1.0, penalty_order: int = 2,
                weights=None):
    """Gaussian penalized least-squares P-spline fit of y on x.

    Intercept is unpenalized and fit alongside the centered smooth.
    Returns (fitted values at x, intercept, coefs_full, block).
    Solved via an augmented least-squares stack, which stays stable for
    extreme lambda.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    block = make_spline_block(x, n_basis=n_basis, penalty_order=penalty_order)
    n = len(x)
    X = np.column_stack([np.ones(n), block.Z])
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    sw = np.sqrt(w)
    pen = np.sqrt(lam) * block.DC if lam > 0 else np.zeros_like(block.DC)
    A = np.vstack([sw[:, None] * X, np.column_stack([np.zeros(len(pen)), pen])])
    b = np.concatenate([sw * y, np.zeros(len(pen))])
    beta, _, _, _ = np.linalg.lstsq(A, b, rcond=None)
    intercept = float(beta[0])
    coefs_full = block.to_full(beta[1:])
    return X @ beta, intercept, coefs_full, block


def edf_for_lambda(XtWX, pen_root_full, lam, spline_slice):
    """Effective df of the spline block: spline-diagonal of the
    penalized hat matrix (X'WX + lam P)^-1 X'WX."""
    P = pen_root_full.T @ pen_root_full
    H = np.linalg.solve(XtWX + lam * P, XtWX)
    return float(np.trace(H[spline_slice, spline_slice]))


def lambda_for_edf(XtWX, pen_root_full, spline_slice, target_edf,
                   log10_range=(-8.0, 12.0), tol=1e-3, max_iter=80):
    """Bisection on log10(lambda) for a target spline edf (monotone
    decreasing in lambda). Clamps at the range ends."""
    lo, hi = log10_range
    edf_lo = edf_for_lambda(XtWX, pen_root_full, 10.0**lo, spline_slice)
    edf_hi = edf_for_lambda(XtWX, pen_root_full, 10.0**hi, spline_slice)
    if target_edf >= edf_lo:
        return 10.0**lo
    if target_edf <= edf_hi:
        return 10.0**hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        edf = edf_for_lambda(XtWX, pen_root_full, 10.0**mid, spline_slice)
        if abs(edf - target_edf) < tol:
            return 10.0**mid
        if edf > target_edf:
            lo = mid
        else:
            hi = mid
    return 10.0 ** (0.5 * (lo + hi))
