"""Exploratory analytics: Pearson correlation matrix and PCA via Jacobi
rotations (self-contained eigensolver, adequate for small feature sets)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericalError

JACOBI_TOL = 1e-10
JACOBI_MAX_SWEEPS = 60


def correlation_matrix(X: np.ndarray) -> np.ndarray:
    """Pairwise Pearson r over complete rows.

    Zero-variance columns produce NaN entries (undefined, not 0).  Duplicated
    columns correlate to exactly 1.0: the denominator is computed as
    sqrt(cov_ii * cov_jj), which collapses exactly for identical columns.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise InvalidInputError("need a 2-D matrix with at least 2 rows")
    complete = ~np.isnan(X).any(axis=1)
    Xc = X[complete]
    if Xc.shape[0] < 2:
        raise InvalidInputError("fewer than 2 complete rows")
    centered = Xc - Xc.mean(axis=0)
    cov = centered.T @ centered
    d = np.diag(cov)
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = cov / np.sqrt(np.outer(d, d))
    corr[(d == 0), :] = np.nan
    corr[:, (d == 0)] = np.nan
    valid = d > 0
    corr[np.ix_(valid, valid)] = np.clip(corr[np.ix_(valid, valid)], -1.0, 1.0)
    np.fill_diagonal(corr, np.where(valid, 1.0, np.nan))
    return corr


def jacobi_eigh(A: np.ndarray, tol: float = JACOBI_TOL,
                max_sweeps: int = JACOBI_MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors-as-columns), unsorted.  Iterates until
    the off-diagonal Frobenius norm falls below ``tol``.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or not np.allclose(A, A.T, atol=1e-10):
        raise InvalidInputError("matrix must be symmetric")
    a = A.copy()
    V = np.eye(n)

    def offdiag_norm():
        off = a - np.diag(np.diag(a))
        return float(np.sqrt((off * off).sum()))

    for _ in range(max_sweeps):
        if offdiag_norm() < tol:
            break
        _jacobi_sweep(a, V, n, tol)
    if offdiag_norm() >= tol:
        raise NumericalError(
            f"Jacobi sweeps did not converge below {tol} in {max_sweeps} sweeps")
    return np.diag(a).copy(), V


def _jacobi_sweep(a: np.ndarray, V: np.ndarray, n: int, tol: float) -> None:
    for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < tol / (n * n + 1):
                    continue
                # rotation angle zeroing a[p, q]
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rp, rq = a[p].copy(), a[q].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq


@dataclass
class PcaResult:
    eigenvalues: np.ndarray            # descending
    explained_variance_ratio: np.ndarray
    components: np.ndarray             # rows = components (orthonormal)
    feature_names: list[str] | None = None

    def as_dict(self) -> dict:
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
            "components": self.components.tolist(),
            "feature_names": self.feature_names,
        }


def pca(X: np.ndarray, feature_names: list[str] | None = None) -> PcaResult:
    """PCA of (already standardized) data via the Jacobi eigensolver.

    Eigenpairs of the covariance matrix, sorted descending; each component's
    largest-magnitude loading is flipped positive (the eigenvector sign is
    arbitrary).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise InvalidInputError("PCA needs at least 2 columns")
    if np.isnan(X).any():
        raise InvalidInputError("PCA input must be complete (impute first)")
    n = X.shape[0]
    if n < 2:
        raise InvalidInputError("PCA needs at least 2 rows")
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    eigenvalues, vectors = jacobi_eigh(cov)
    order = np.argsort(-eigenvalues, kind="mergesort")
    eigenvalues = eigenvalues[order]
    components = vectors[:, order].T
    for i in range(components.shape[0]):
        j = int(np.argmax(np.abs(components[i])))
        if components[i, j] < 0:
            components[i] = -components[i]
    total = eigenvalues.sum()
    ratios = eigenvalues / total if total != 0 else np.zeros_like(eigenvalues)
    return PcaResult(eigenvalues, ratios, components, feature_names)


def svg_bar_chart(labels: list[str], values: list[float], title: str,
                  width: int = 640, height: int = 320) -> str:
    """Minimal standalone SVG bar chart (thin renderer over the JSON outputs)."""
    n = max(len(values), 1)
    vmax = max([abs(v) for v in values] + [1e-12])
    margin, plot_h = 40, height - 80
    bar_w = (width - 2 * margin) / n
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
    ]
    for i, (label, value) in enumerate(zip(labels, values)):
        h = plot_h * abs(value) / vmax
        x = margin + i * bar_w
        y = 40 + plot_h - h
        parts.append(
            f'<rect x="{x + 2:.1f}" y="{y:.1f}" width="{bar_w - 4:.1f}" '
            f'height="{h:.1f}" fill="#4878a8"/>')
        parts.append(
            f'<text x="{x + bar_w / 2:.1f}" y="{height - 24}" text-anchor="middle" '
            f'font-size="9" transform="rotate(35 {x + bar_w / 2:.1f} {height - 24})">'
            f'{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts)
