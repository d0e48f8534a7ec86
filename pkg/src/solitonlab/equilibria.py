"""Fixed points of the soliton flow and their linearizations."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import PhasePoint, grad_F, grad_J, jacobian, vector_field
from .dims import Dimensions, SolitonClass


class FixedPointKind(Enum):
    RFC = "RFC"
    GF_ALPHA1 = "GF_alpha1"
    GF_ALPHA2 = "GF_alpha2"
    NON_CONE_CONTINUUM = "NonConeContinuum"
    PRODUCT_CYLINDER = "ProductCylinder"


@dataclass(frozen=True)
class FixedPointRecord:
    kind: FixedPointKind
    point: PhasePoint | None
    notes: str = ""


def ricci_flat_cone(dims: Dimensions) -> PhasePoint:
    """The cone state x1 = x2 = n-1, Gamma = -n, at sigma = 0."""
    n1 = dims.n - 1.0
    return PhasePoint(n1, 0.0, n1, 0.0, -float(dims.n), 0.0)


def good_fill(dims: Dimensions, alpha: int = 2) -> PhasePoint:
    """Fixed point encoding smooth closure of sphere factor alpha at s = 0.

    alpha = 2 (the default used throughout): (p1-1, 0, 0, -1, -p1, 0).
    """
    if alpha == 2:
        return PhasePoint(dims.p1 - 1.0, 0.0, 0.0, -1.0, -float(dims.p1), 0.0)
    if alpha == 1:
        return PhasePoint(0.0, -1.0, dims.p2 - 1.0, 0.0, -float(dims.p2), 0.0)
    raise ValueError("alpha must be 1 or 2")


def non_cone_residual(y1_star: float, y2_star: float, dims: Dimensions) -> float:
    """Constraint residual for the Gamma = -1 continuum of fixed points."""
    return dims.p1 * (1.0 + y1_star) ** 2 + dims.p2 * (1.0 + y2_star) ** 2 - 1.0


def catalog_fixed_points(dims: Dimensions) -> list[FixedPointRecord]:
    records = [
        FixedPointRecord(FixedPointKind.RFC, ricci_flat_cone(dims), "singular cone, both radii"),
        FixedPointRecord(FixedPointKind.GF_ALPHA2, good_fill(dims, 2), "smooth fill of factor 2"),
        FixedPointRecord(FixedPointKind.GF_ALPHA1, good_fill(dims, 1), "smooth fill of factor 1"),
        FixedPointRecord(
            FixedPointKind.NON_CONE_CONTINUUM,
            None,
            "x=0, Gamma=-1, sum p_a (1+y_a*)^2 = 1; use non_cone_residual",
        ),
        FixedPointRecord(
            FixedPointKind.PRODUCT_CYLINDER,
            PhasePoint(0.0, -1.0, 0.0, -1.0, 0.0, 0.0),
            "x=0, y=-1, Gamma=0 family (product cylinders)",
        ),
    ]
    return records


@dataclass
class SpectrumReport:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    stable_dim: int = field(init=False)
    unstable_dim: int = field(init=False)

    def __post_init__(self):
        re = self.eigenvalues.real
        self.stable_dim = int(np.sum(re < -1e-10))
        self.unstable_dim = int(np.sum(re > 1e-10))

    def pair_residuals(self) -> np.ndarray:
        """max-norm residual ||M v - mu v|| per eigenpair."""
        out = np.empty(len(self.eigenvalues))
        for i, mu in enumerate(self.eigenvalues):
            v = self.eigenvectors[:, i]
            out[i] = np.max(np.abs(self.matrix @ v - mu * v))
        return out

    def clustered_eigenvalues(self, cluster_tol: float = 1e-6) -> np.ndarray:
        """Eigenvalues with near-coincident clusters replaced by their mean.

        Multiple eigenvalues of a nonnormal matrix split by O(eps^{1/k});
        the cluster mean cancels the leading splitting and is accurate to
        O(eps), which matters at repeated or defective fixed-point spectra.
        """
        evs = list(self.eigenvalues)
        out: list[complex] = []
        used = [False] * len(evs)
        for i, mu in enumerate(evs):
            if used[i]:
                continue
            cluster = [j for j in range(len(evs)) if not used[j] and abs(evs[j] - mu) < cluster_tol]
            for j in cluster:
                used[j] = True
            mean = np.mean([evs[j] for j in cluster])
            if abs(mean.imag) < cluster_tol:
                mean = complex(mean.real, 0.0)
            out.extend([mean] * len(cluster))
        return np.array(out)


def _normalize_first_nonzero(v: np.ndarray) -> np.ndarray:
    # phase/scale convention: first component above threshold becomes 1
    for c in v:
        if abs(c) > 1e-10:
            return v / c
    return v


def linearize(point, dims: Dimensions, cls: SolitonClass) -> SpectrumReport:
    """Spectrum of the analytic Jacobian at a state (usually a fixed point)."""
    M = jacobian(point, dims, cls)
    evals, evecs = np.linalg.eig(M)
    order = np.argsort(evals.real)
    evals = evals[order]
    evecs = evecs[:, order]
    for i in range(evecs.shape[1]):
        evecs[:, i] = _normalize_first_nonzero(evecs[:, i])
    return SpectrumReport(M, evals, evecs)


def fd_jacobian(point, dims: Dimensions, cls: SolitonClass, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian, the transcription check for jacobian()."""
    y0 = point.as_array() if isinstance(point, PhasePoint) else np.asarray(point, float)
    J = np.empty((6, 6))
    for j in range(6):
        e = np.zeros(6)
        e[j] = h
        J[:, j] = (vector_field(y0 + e, dims, cls) - vector_field(y0 - e, dims, cls)) / (2 * h)
    return J


# ---------------------------------------------------------------------------
# Eigen-structure at the good fill


def gf_unstable_vectors(dims: Dimensions, cls: SolitonClass) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Basis (E1, E2, E_sigma) of the eigenvalue-2 eigenspace at the good fill."""
    p1 = dims.p1
    lam = cls.lam
    E1 = np.array([-(p1 - 1.0), 1.0, 0.0, 0.0, 2.0 * p1, 0.0])
    E2 = np.array([0.0, 0.0, p1 + 1.0, 1.0, 0.0, 0.0])
    Es = np.array([0.0, 0.0, -float(lam), 0.0, 0.0, 1.0])
    return E1, E2, Es


def gf_analytic_eigenvalues(dims: Dimensions) -> list[float]:
    """Six eigenvalues at the good fill: two decoupled 3x3 blocks."""
    p1 = dims.p1
    return sorted([-(p1 - 1.0), 2.0, 2.0, -(p1 - 1.0), -1.0, 2.0])


def rfc_analytic_eigenvalues(dims: Dimensions) -> list[complex]:
    n, A, Om = dims.n, dims.A, dims.Omega
    return [2.0, 2.0, -1.0, -(n - 1.0), complex(-A, Om), complex(-A, -Om)]


def gf_E_tangent_data(dims: Dimensions) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tangent frame of the invariant set {J = F = sigma = 0} at the good fill.

    Returns (unstable vector p2 E1 - 3 p1 E2, stable vector for -(p1-1),
    stable vector for -1). Each lies in ker dJ and ker dF at the fixed point.
    """
    p1, p2 = dims.p1, dims.p2
    E1, E2, _ = gf_unstable_vectors(dims, SolitonClass.STEADY)
    u = p2 * E1 - 3.0 * p1 * E2
    v_slow = np.array([2.0 * p2, float(p2), 0.0, -(p1 - 2.0), -2.0 * p2, 0.0])
    v_minus1 = np.array([2.0 * (p1 - 1.0), 1.0, 0.0, 0.0, -float(p1), 0.0])
    return u, v_slow, v_minus1


def gf_E_kernel_residuals(dims: Dimensions) -> np.ndarray:
    """|dJ . v| and |dF . v| at the good fill for each tangent vector."""
    gf = good_fill(dims)
    vecs = gf_E_tangent_data(dims)
    dJ = grad_J(gf, dims)
    dF = grad_F(gf, dims)
    return np.array([[abs(dJ @ v), abs(dF @ v)] for v in vecs])


# ---------------------------------------------------------------------------
# Eigen-structure at the Ricci-flat cone


def rfc_averaged_block(dims: Dimensions) -> np.ndarray:
    """3x3 linearization in the averaged (xi, y, gamma) coordinates."""
    n = dims.n
    return np.array([[0.0, -2.0 * (n - 1), 0.0], [1.0, -(n - 1.0), 1.0], [0.0, 2.0 * n, 1.0]])


def rfc_difference_block(dims: Dimensions) -> np.ndarray:
    """2x2 linearization in (x12, y12); eigenvalues -A +/- i Omega."""
    n = dims.n
    return np.array([[0.0, -2.0 * (n - 1)], [1.0, -(n - 1.0)]])


def rfc_eigvectors(dims: Dimensions) -> dict:
    """Averaged-block eigenvectors V_2, V_-1, V_-(n-1) and the complex pair."""
    n = dims.n
    V2 = np.array([-(n - 1.0), 1.0, 2.0 * n])
    Vm1 = np.array([2.0 * (n - 1.0), 1.0, -float(n)])
    Vmn1 = np.array([2.0, 1.0, -2.0])
    D = rfc_difference_block(dims)
    mu = complex(-dims.A, dims.Omega)
    # eigenvector of the difference block for -A + i Omega
    w = np.array([dims.A + 1j * dims.Omega, 1.0], dtype=complex)
    w = _normalize_first_nonzero(w)
    return {
        "V2": V2,
        "V-1": Vm1,
        f"V-{n-1}": Vmn1,
        "difference_eigenvalue": mu,
        "difference_eigenvector": w,
        "difference_residual": float(np.max(np.abs(D @ w - mu * w))),
    }
