"""Closed-form structure quantities parametrized by A in sp(R^6).

The invariant coclosed G2-structures on the almost Abelian algebra
correspond to bracket matrices A with A J + J A^t = 0 (equivalently
theta(A) omega = 0, equivalently d psi = 0). Every geometric quantity of
the structure then has a block closed form in A; this module provides
those forms together with their independent derivations from the Koszul
connection, so each one is testable by a dual route.

Conventions: S_A = (A + A^t)/2, K_A = (A - A^t)/2, [J, A] = JA - AJ.
The 7x7 blocks are written blockdiag(6x6 block on the ideal, scalar e7e7
entry). Torsion normalization is nabla_m phi = (T e_m) -| psi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .g2 import G2Data, circ6
from .metric_lie import DIM, covariant_derivative_form, koszul_connection

__all__ = [
    "sp_check",
    "require_sp",
    "random_sp",
    "random_sp_symmetric",
    "random_sp_skew",
    "random_su3",
    "TorsionPackage",
    "torsion_forms",
    "torsion_from_nabla_phi",
    "t_circ_t",
    "SymbolQ",
    "q_matrix",
    "ricci_closed",
    "scalar_diagnostics",
]


def _as_six(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.shape != (6, 6):
        raise ValueError(f"bracket matrix must be 6x6, got {A.shape}")
    return A


def _blockdiag(block: np.ndarray, corner: float) -> np.ndarray:
    out = np.zeros((DIM, DIM))
    out[:6, :6] = block
    out[6, 6] = corner
    return out


def sp_check(A: np.ndarray, data: G2Data, tol: float = 1e-10) -> tuple[bool, float]:
    """Whether A J + J A^t = 0, with the max-abs residual."""
    A = _as_six(A)
    residual = float(np.max(np.abs(A @ data.J + data.J @ A.T)))
    scale = max(1.0, float(np.max(np.abs(A))))
    return residual <= tol * scale, residual


def require_sp(A: np.ndarray, data: G2Data, tol: float = 1e-10) -> np.ndarray:
    A = _as_six(A)
    ok, residual = sp_check(A, data, tol)
    if not ok:
        raise ValueError(f"matrix is not symplectic: |AJ + JA^t| = {residual:.3e}")
    return A


def random_sp(
    rng: np.random.Generator, data: G2Data, scale: float = 1.0
) -> np.ndarray:
    """Random element of sp(R^6): J-anti-commuting symmetric part plus
    J-commuting skew part."""
    return random_sp_symmetric(rng, data, scale) + random_sp_skew(rng, data, scale)


def random_sp_symmetric(
    rng: np.random.Generator, data: G2Data, scale: float = 1.0
) -> np.ndarray:
    J = data.J
    S0 = rng.standard_normal((6, 6)) * scale
    S0 = 0.5 * (S0 + S0.T)
    return 0.5 * (S0 + J @ S0 @ J)


def random_sp_skew(
    rng: np.random.Generator, data: G2Data, scale: float = 1.0
) -> np.ndarray:
    J = data.J
    K0 = rng.standard_normal((6, 6)) * scale
    K0 = 0.5 * (K0 - K0.T)
    return 0.5 * (K0 - J @ K0 @ J)


def random_su3(
    rng: np.random.Generator, data: G2Data, scale: float = 1.0
) -> np.ndarray:
    """Random element of su(3) = {A in sp skew-symmetric, tr(JA) = 0}."""
    J = data.J
    K = random_sp_skew(rng, data, scale)
    return K + np.trace(J @ K) / 6.0 * J


@dataclass(frozen=True)
class TorsionPackage:
    """Coclosed torsion data: scalar part, 27-part, and the full tensor."""

    tau0: float
    tau27: np.ndarray
    T: np.ndarray

    def to_dict(self) -> dict:
        return {
            "tau0": self.tau0,
            "tau27": self.tau27.tolist(),
            "T": self.T.tolist(),
        }


def torsion_forms(A: np.ndarray, data: G2Data) -> TorsionPackage:
    """Block closed forms tau0 = (2/7) tr JA, tau27, T = (tau0/4) g - tau27.

    T = blockdiag((1/2)[J,A], (1/2) tr JA); the dual route through
    nabla phi = T . psi is torsion_from_nabla_phi.
    """
    A = require_sp(A, data)
    J = data.J
    tr_ja = float(np.trace(J @ A))
    comm = J @ A - A @ J
    tau0 = 2.0 / 7.0 * tr_ja
    tau27 = _blockdiag(tr_ja / 14.0 * np.eye(6) - 0.5 * comm, -3.0 / 7.0 * tr_ja)
    T = _blockdiag(0.5 * comm, 0.5 * tr_ja)
    return TorsionPackage(tau0=tau0, tau27=tau27, T=T)


def torsion_from_nabla_phi(
    A: np.ndarray, data: G2Data
) -> tuple[np.ndarray, float]:
    """Solve nabla_m phi = T_m^p (e_p -| psi) for T row by row.

    The psi-contraction psi_{pjkl} psi_{qjkl} = 24 delta_{pq} inverts the
    system exactly; the reported residual is the worst row defect and
    vanishes only when nabla phi lies in the psi-image, i.e. when the
    convention matches.
    """
    A = require_sp(A, data)
    gamma = koszul_connection(A)
    nabla_phi = covariant_derivative_form(data.phi, gamma)
    psi_d = data.psi.dense()
    T = np.empty((DIM, DIM))
    residual = 0.0
    for m in range(DIM):
        rhs = nabla_phi[m].dense()
        T[m] = np.einsum("jkl,qjkl->q", rhs, psi_d) / 24.0
        defect = np.einsum("p,pjkl->jkl", T[m], psi_d) - rhs
        residual = max(residual, float(np.max(np.abs(defect))))
    return T, residual


def t_circ_t(A: np.ndarray, data: G2Data) -> np.ndarray:
    """Block closed form of T o T:
    blockdiag(-(1/2)(tr JA)[J,A] - S o6 S, -tr S^2)."""
    A = require_sp(A, data)
    J = data.J
    S = 0.5 * (A + A.T)
    comm = J @ A - A @ J
    return _blockdiag(
        -0.5 * np.trace(J @ A) * comm - circ6(S, S, data),
        -float(np.trace(S @ S)),
    )


@dataclass(frozen=True)
class SymbolQ:
    """Laplacian symbol: Delta psi = theta(Q) psi with Q = blockdiag(Qh, q)."""

    Qh: np.ndarray
    q: float

    @property
    def Q(self) -> np.ndarray:
        return _blockdiag(self.Qh, self.q)


def q_matrix(A: np.ndarray, data: G2Data) -> SymbolQ:
    """Qh = (1/2)[A,A^t] + (1/2) S o6 S, q = -(1/2) tr S^2 - (1/4)(tr JA)^2."""
    A = require_sp(A, data)
    S = 0.5 * (A + A.T)
    Qh = 0.5 * (A @ A.T - A.T @ A) + 0.5 * circ6(S, S, data)
    q = -0.5 * float(np.trace(S @ S)) - 0.25 * float(np.trace(data.J @ A)) ** 2
    return SymbolQ(Qh=Qh, q=q)


def ricci_closed(A: np.ndarray, data: G2Data) -> tuple[np.ndarray, float]:
    """Ric = blockdiag((1/2)[A,A^t], -tr S^2) and R = -tr S^2."""
    A = require_sp(A, data)
    S = 0.5 * (A + A.T)
    tr_ssq = float(np.trace(S @ S))
    return _blockdiag(0.5 * (A @ A.T - A.T @ A), -tr_ssq), -tr_ssq


def scalar_diagnostics(A: np.ndarray, data: G2Data) -> dict[str, float]:
    """Scalar invariants of the structure at A, cross-checked internally.

    R = -tr S^2 must equal (tr T)^2 - |T|^2 = (1/4)(tr JA)^2 - |T|^2; the
    assembly raises if the torsion bookkeeping ever drifts.
    """
    A = require_sp(A, data)
    S = 0.5 * (A + A.T)
    T = torsion_forms(A, data).T
    tr_ja = float(np.trace(data.J @ A))
    tr_ssq = float(np.trace(S @ S))
    torsion_sq = float(np.sum(T * T))
    R = -tr_ssq
    gap = abs(R - (0.25 * tr_ja**2 - torsion_sq))
    if gap > 1e-9 * max(1.0, abs(R)):
        raise AssertionError(f"scalar curvature bookkeeping drifted by {gap:.3e}")
    return {
        "R": R,
        "torsionNormSq": torsion_sq,
        "trJA": tr_ja,
        "trSSq": tr_ssq,
        "normSq": float(np.sum(A * A)),
    }
