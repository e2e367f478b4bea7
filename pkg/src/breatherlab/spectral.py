"""Dense spectral analysis of the linearized operator.

The operator is discretized as a real symmetric N x N matrix built from
Fourier differentiation matrices, eigendecomposed in full, and its spectrum
classified into the unique negative eigenvalue, the two-dimensional kernel,
and the rest sitting above the continuum edge. Coercivity constants are
computed on constraint complements: nu0 as a projected Rayleigh minimum and
mu0 as a certified positive-semidefiniteness threshold, so the advertised
quadratic-form inequalities hold for every grid field by construction.

The Wronskian of the two kernel directions has a closed form whose sign
structure counts the negative eigenvalues; wronskian_analysis cross-checks
the closed form against spectral derivatives and locates the single root of
the monotone root function.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from . import closed_forms as cf
from .functionals import apply_operator, coefficient_fields
from .grid import GridField, PeriodicGrid

_CONSISTENCY_SEED = 1729
_CONSISTENCY_TOL = 1e-8
_BOUNDARY_TOL = 1e-10


class AssemblyError(RuntimeError):
    """Assembled matrix disagrees with the direct operator action."""


class ClassificationError(RuntimeError):
    """Spectrum does not show the expected negative/kernel/continuum split."""

    def __init__(self, message: str, offending: np.ndarray):
        super().__init__(f"{message}: {np.array2string(offending, precision=6)}")
        self.offending = offending


@dataclass(frozen=True)
class DiscreteOperator:
    """Symmetric discretization of the linearized operator on a grid."""

    grid: PeriodicGrid
    matrix: np.ndarray
    params: cf.BreatherParams
    time_tag: float

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        n = self.grid.n_points
        if m.shape != (n, n):
            raise ValueError(f"matrix shape {m.shape} does not match grid ({n},{n})")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    negative_count: int
    lambda0_sq: float
    kernel_defect: tuple[float, float]
    kernel_angle: float
    continuum_edge: float
    nu0_estimate: float
    mu0_estimate: float

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "negative_count": self.negative_count,
            "lambda0_sq": self.lambda0_sq,
            "kernel_defect": [self.kernel_defect[0], self.kernel_defect[1]],
            "kernel_angle": self.kernel_angle,
            "continuum_edge": self.continuum_edge,
            "nu0_estimate": self.nu0_estimate,
            "mu0_estimate": self.mu0_estimate,
        }


@dataclass(frozen=True)
class WronskianReport:
    root_count: int
    root_location: float
    closed_form_max_err: float

    def to_dict(self) -> dict:
        return {
            "root_count": self.root_count,
            "root_location": self.root_location,
            "closed_form_max_err": self.closed_form_max_err,
        }


def continuum_edge(p: cf.BreatherParams) -> float:
    """Bottom of the essential spectrum: min over real k of the symbol
    k^4 + 2(beta^2-alpha^2)k^2 + (alpha^2+beta^2)^2.

    The interior minimum 4 alpha^2 beta^2 applies when the symbol has one
    (beta < alpha); otherwise the minimum sits at k=0. The two branches
    coincide at alpha = beta.
    """
    a2, b2 = p.alpha**2, p.beta**2
    if p.beta >= p.alpha:
        return (a2 + b2) ** 2
    return 4.0 * a2 * b2


def _derivative_matrices(grid: PeriodicGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fourier differentiation matrices D1, D2, D4 (multiplier on identity)."""
    eye_hat = np.fft.rfft(np.eye(grid.n_points), axis=0)
    out = []
    for order in (1, 2, 4):
        m = grid.multiplier(order)
        out.append(np.fft.irfft(m[:, None] * eye_hat, n=grid.n_points, axis=0))
    return out[0], out[1], out[2]


def assemble(p: cf.BreatherParams, grid: PeriodicGrid, t: float = 0.0) -> DiscreteOperator:
    """Assemble the symmetric matrix of the linearized operator.

    matrix = D4 - 2(beta^2-alpha^2) D2 + (alpha^2+beta^2)^2 I
             + D1 diag(5 B^2) D1 + diag(potential)

    The advection pair enters in divergence form, so the matrix is symmetric
    by construction (D1 is antisymmetric); it is symmetrized once more to
    shave roundoff. Requires the grid to resolve the breather (boundary
    samples below 1e-10) and self-checks against apply_operator on a random
    field before returning.
    """
    b, bx, bxx = coefficient_fields(p, grid, t)
    if max(abs(b[0]), abs(b[-1])) >= _BOUNDARY_TOL:
        raise ValueError(
            f"grid does not resolve the breather: boundary value "
            f"{max(abs(b[0]), abs(b[-1])):.3e} >= {_BOUNDARY_TOL:g}"
        )
    mat = _assemble_from_coefficients(p, grid, b, bx, bxx)
    op = DiscreteOperator(grid, mat, p, t)

    rng = np.random.default_rng(_CONSISTENCY_SEED)
    z = GridField(grid, rng.standard_normal(grid.n_points), time_tag=t)
    direct = apply_operator(z, p, t).values
    via_matrix = op.matrix @ z.values
    rel = np.linalg.norm(via_matrix - direct) / np.linalg.norm(direct)
    if rel > _CONSISTENCY_TOL:
        raise AssemblyError(
            f"matrix application disagrees with operator action: rel err {rel:.3e}"
        )
    return op


def assemble_flat(p: cf.BreatherParams, grid: PeriodicGrid, t: float = 0.0) -> DiscreteOperator:
    """Constant-coefficient part of the operator (breather terms switched off).

    Its spectrum is exactly the symbol evaluated on the grid modes; useful for
    locating the continuum edge and as a discretization sanity check.
    """
    zeros = np.zeros(grid.n_points)
    mat = _assemble_from_coefficients(p, grid, zeros, zeros, zeros)
    return DiscreteOperator(grid, mat, p, t)


def _assemble_from_coefficients(p: cf.BreatherParams, grid: PeriodicGrid, b: np.ndarray,
                                bx: np.ndarray, bxx: np.ndarray) -> np.ndarray:
    a2, b2 = p.alpha**2, p.beta**2
    d1, d2, d4 = _derivative_matrices(grid)
    pot = 5.0 * bx**2 + 10.0 * b * bxx + 7.5 * b**4 - 6.0 * (b2 - a2) * b**2
    mat = d4 - 2.0 * (b2 - a2) * d2 + (d1 * (5.0 * b**2)[None, :]) @ d1
    mat[np.diag_indices_from(mat)] += (a2 + b2) ** 2 + pot
    return 0.5 * (mat + mat.T)


def _gram_matrix(grid: PeriodicGrid) -> np.ndarray:
    """Discrete H^2 Gram: I + D1^T D1 + D2^T D2 = I - D2 + D4 (exact algebra)."""
    d1, d2, d4 = _derivative_matrices(grid)
    g = d4 - d2
    g[np.diag_indices_from(g)] += 1.0
    return 0.5 * (g + g.T)


def _sampled_kernel_directions(op: DiscreteOperator) -> np.ndarray:
    x = op.grid.nodes
    b1 = cf.breather_dx1(op.params, op.time_tag, x)
    b2 = cf.breather_dx2(op.params, op.time_tag, x)
    return np.column_stack([b1, b2])


def eigensystem(op: DiscreteOperator) -> tuple[np.ndarray, np.ndarray]:
    """Full symmetric eigendecomposition; eigenvectors are L2-normalized."""
    evals, evecs = scipy.linalg.eigh(op.matrix)
    return evals, evecs / math.sqrt(op.grid.spacing)


def _classify(evals: np.ndarray, edge: float) -> tuple[int, np.ndarray]:
    """Return (negative_count, kernel indices); raise if the split is wrong."""
    eps_ker = 1e-3 * edge
    eps_neg = eps_ker
    eps_edge = 0.05 * edge
    neg = np.nonzero(evals < -eps_neg)[0]
    ker = np.nonzero((evals > -eps_ker) & (evals < eps_ker))[0]
    rest = np.setdiff1d(np.arange(evals.size), np.concatenate([neg, ker]))
    if neg.size != 1:
        raise ClassificationError(
            f"expected exactly 1 eigenvalue below {-eps_neg:.3e}, found {neg.size}",
            evals[neg] if neg.size else evals[:3],
        )
    if ker.size != 2:
        raise ClassificationError(
            f"expected exactly 2 near-zero eigenvalues within {eps_ker:.3e}, "
            f"found {ker.size}",
            evals[ker] if ker.size else evals[:4],
        )
    low_rest = evals[rest] <= edge - eps_edge
    if np.any(low_rest):
        raise ClassificationError(
            f"eigenvalues between kernel window and continuum edge {edge:.6g}",
            evals[rest][low_rest],
        )
    return int(neg.size), ker


def spectrum(op: DiscreteOperator) -> SpectrumReport:
    """Eigendecompose, classify, and attach coercivity constants."""
    evals, evecs = eigensystem(op)
    edge = continuum_edge(op.params)
    _, ker_idx = _classify(evals, edge)
    kernel_span = _sampled_kernel_directions(op)
    angles = scipy.linalg.subspace_angles(evecs[:, ker_idx], kernel_span)
    nu0, mu0 = _coercivity_from_parts(op, evals, evecs)
    return SpectrumReport(
        eigenvalues=evals,
        negative_count=1,
        lambda0_sq=float(-evals[0]),
        kernel_defect=(float(evals[ker_idx[0]]), float(evals[ker_idx[1]])),
        kernel_angle=float(np.max(angles)),
        continuum_edge=edge,
        nu0_estimate=nu0,
        mu0_estimate=mu0,
    )


def negative_eigenvector(op: DiscreteOperator) -> GridField:
    """L2-normalized eigenvector of the unique negative eigenvalue."""
    evals, evecs = eigensystem(op)
    edge = continuum_edge(op.params)
    _classify(evals, edge)
    return GridField(op.grid, evecs[:, 0], time_tag=op.time_tag)


def coercivity(op: DiscreteOperator) -> tuple[float, float]:
    """(nu0, mu0) on the classified operator.

    nu0: Rayleigh minimum of Q[z]/||z||_H2^2 over the L2-complement of
    span{negative eigenvector, B1, B2}, via the projected generalized
    symmetric pencil with the H^2 Gram matrix.

    mu0: the largest mu (1% safety margin) such that
    Q[z] - mu ||z||_H2^2 + (1/mu)(int z B)^2 >= 0 for every grid field z
    orthogonal to B1 and B2, certified by bisection on the smallest
    eigenvalue of the compensated projected pencil. Unlike a Rayleigh
    quotient over a third constraint, this form makes the advertised
    inequality hold for arbitrary fields, not just sampled ones.
    """
    evals, evecs = eigensystem(op)
    _classify(evals, continuum_edge(op.params))
    return _coercivity_from_parts(op, evals, evecs)


def _coercivity_from_parts(op: DiscreteOperator, evals: np.ndarray,
                           evecs: np.ndarray) -> tuple[float, float]:
    h = op.grid.spacing
    gram = _gram_matrix(op.grid)
    kernel_span = _sampled_kernel_directions(op)
    b_neg = evecs[:, 0]

    constraints3 = np.vstack([b_neg, kernel_span.T])
    z3 = scipy.linalg.null_space(constraints3)
    lam = scipy.linalg.eigh(
        z3.T @ op.matrix @ z3, z3.T @ gram @ z3, eigvals_only=True,
        subset_by_index=(0, 0),
    )[0]
    nu0 = float(lam)

    z2 = scipy.linalg.null_space(kernel_span.T)
    lred = z2.T @ op.matrix @ z2
    gred = z2.T @ gram @ z2
    bred = z2.T @ cf.breather(op.params, op.time_tag, op.grid.nodes)
    rank1 = h * np.outer(bred, bred)

    def smallest(mu: float) -> float:
        m = lred - mu * gred + rank1 / mu
        return float(scipy.linalg.eigh(0.5 * (m + m.T), eigvals_only=True,
                                       subset_by_index=(0, 0))[0])

    lo = 1e-6
    if smallest(lo) < 0.0:
        raise ClassificationError(
            "compensated quadratic form is not positive even for tiny mu",
            np.array([smallest(lo)]),
        )
    hi = 2.0 * lo
    while smallest(hi) >= 0.0 and hi < 1e6:
        lo, hi = hi, 2.0 * hi
    while hi - lo > 0.01 * lo:
        mid = 0.5 * (lo + hi)
        if smallest(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    mu0 = 0.99 * lo
    return nu0, mu0


def sweep_spectra(cases, workers: int | None = None) -> list[SpectrumReport]:
    """Assemble+analyze a sequence of (params, grid, t) cases, optionally in
    parallel threads (eigensolves release the GIL). Worker count falls back to
    the BREATHERLAB_WORKERS environment variable, default 1."""
    items = list(cases)
    if workers is None:
        workers = int(os.environ.get("BREATHERLAB_WORKERS", "1"))
    if workers <= 1:
        return [spectrum(assemble(p, g, t)) for (p, g, t) in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda case: spectrum(assemble(*case)), items))


def root_function(p: cf.BreatherParams, t: float, y2):
    """Monotone function whose single sign change locates det W = 0.

    f(y2) = alpha sinh(2 beta y2) - beta sin(2 alpha y1(y2)), with
    y1 = y2 + (delta-gamma) t + x1 - x2. f' = 2 alpha beta (cosh - cos) >= 0.
    """
    a, b = p.alpha, p.beta
    phase = (p.delta - p.gamma) * t + p.x1 - p.x2
    y2 = np.asarray(y2, dtype=float)
    return a * np.sinh(2.0 * b * y2) - b * np.sin(2.0 * a * (y2 + phase))


def default_scan_range(p: cf.BreatherParams) -> tuple[float, float]:
    """y2 interval certain to contain the root: |sinh(2 beta y2)| > beta/alpha
    excludes roots outside, plus a unit margin."""
    r = math.asinh(p.beta / p.alpha) / (2.0 * p.beta) + 1.0
    return (-r, r)


def wronskian_analysis(p: cf.BreatherParams, t: float,
                       x_range: tuple[float, float] | None = None,
                       n_samples: int = 2048) -> WronskianReport:
    """Count sign changes of the root function and validate the closed form.

    The closed-form determinant is compared against spectral x-derivatives of
    the sampled kernel directions on a grid wide enough for the tails; the
    root scan runs on [x_range] (default: the certified bracket).
    """
    if x_range is None:
        x_range = default_scan_range(p)
    ys = np.linspace(x_range[0], x_range[1], n_samples)
    vals = root_function(p, t, ys)
    signs = np.sign(vals)
    nonzero = signs[signs != 0.0]
    changes = int(np.count_nonzero(nonzero[1:] != nonzero[:-1]))
    root_count = changes if changes else int(np.any(signs == 0.0))

    if changes:
        flips = np.nonzero(np.diff(np.sign(vals)))[0]
        lo, hi = ys[flips[0]], ys[flips[0] + 1]
        location = float(brentq(lambda y: float(root_function(p, t, y)), lo, hi))
    elif root_count:
        location = float(ys[np.nonzero(signs == 0.0)[0][0]])
    else:
        location = math.nan

    grid = PeriodicGrid(44.0 / min(p.beta, 1.0), 2048)
    x = grid.nodes
    b1 = cf.breather_dx1(p, t, x)
    b2 = cf.breather_dx2(p, t, x)
    fh1 = np.fft.rfft(b1)
    fh2 = np.fft.rfft(b2)
    m = grid.multiplier(1)
    d1b1 = np.fft.irfft(m * fh1, n=grid.n_points)
    d1b2 = np.fft.irfft(m * fh2, n=grid.n_points)
    det_numeric = d1b1 * b2 - d1b2 * b1
    det_closed = cf.wronskian_det(p, t, x)
    err = float(np.max(np.abs(det_numeric - det_closed)) / np.max(np.abs(det_closed)))
    return WronskianReport(root_count=root_count, root_location=location,
                           closed_form_max_err=err)
