"""Discretization, LQR/LQG synthesis and switched-mode stability algebra.

Matrices are dense float64 numpy arrays throughout.  The exponential and the
eigenvalue solver are delegated to scipy/LAPACK; the Riccati recursion, the
mode construction and the second-moment test are implemented here because
their exact forms are what the rest of the package is built around.

State conventions for the switched closed loop: with static feedback
u = -Kx the augmented state is (x, u_held); with a dynamic controller
(E, F, G) it is (x, z, u_held).  The "closed" mode applies a freshly
computed command and latches it; the "open" mode evolves the plant under
the latched command (or zero, depending on the hold strategy) and leaves
the controller state untouched.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from .errors import ConfigError, NumericalError


def _as_matrix(M, name: str) -> np.ndarray:
    A = np.asarray(M, dtype=float)
    if A.ndim != 2:
        raise ConfigError("%s: expected a 2-d matrix, got shape %s" % (name, A.shape))
    if not np.all(np.isfinite(A)):
        raise ConfigError("%s: entries must be finite" % name)
    return A


def _square(M, name: str) -> np.ndarray:
    A = _as_matrix(M, name)
    if A.shape[0] != A.shape[1]:
        raise ConfigError("%s: expected a square matrix, got shape %s" % (name, A.shape))
    return A


@dataclass
class ContinuousLti:
    """Plant dx/dt = A x + B u, y = C x + D u."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        self.A = _square(self.A, "plant.A")
        self.B = _as_matrix(self.B, "plant.B")
        self.C = _as_matrix(self.C, "plant.C")
        self.D = _as_matrix(self.D, "plant.D")
        n, p, m = self.A.shape[0], self.B.shape[1], self.C.shape[0]
        if self.B.shape[0] != n:
            raise ConfigError("plant.B: row count must match A")
        if self.C.shape[1] != n:
            raise ConfigError("plant.C: column count must match A")
        if self.D.shape != (m, p):
            raise ConfigError("plant.D: shape must be (rows of C, cols of B)")

    @classmethod
    def from_ab(cls, A, B):
        A = _square(A, "plant.A")
        B = _as_matrix(B, "plant.B")
        n = A.shape[0]
        return cls(A, B, np.eye(n), np.zeros((n, B.shape[1])))


@dataclass
class DiscreteLti:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    sample_period: float

    def __post_init__(self):
        self.A = _square(self.A, "plant.A")
        self.B = _as_matrix(self.B, "plant.B")
        self.C = _as_matrix(self.C, "plant.C")
        self.D = _as_matrix(self.D, "plant.D")
        if not self.sample_period > 0:
            raise ConfigError("sample_period: must be > 0")


@dataclass
class ControllerLti:
    """Discrete controller z' = E z + F y, u = G z."""

    E: np.ndarray
    F: np.ndarray
    G: np.ndarray

    def __post_init__(self):
        self.E = _square(self.E, "controller.E")
        self.F = _as_matrix(self.F, "controller.F")
        self.G = _as_matrix(self.G, "controller.G")
        q = self.E.shape[0]
        if self.F.shape[0] != q or self.G.shape[1] != q:
            raise ConfigError("controller.F: state dimensions must agree with E")


@dataclass
class CostWeights:
    Qx: np.ndarray
    Ru: np.ndarray

    def __post_init__(self):
        self.Qx = _square(self.Qx, "weights.Qx")
        self.Ru = _square(self.Ru, "weights.Ru")
        if not np.allclose(self.Qx, self.Qx.T, atol=1e-12):
            raise ConfigError("weights.Qx: must be symmetric")
        if not np.allclose(self.Ru, self.Ru.T, atol=1e-12):
            raise ConfigError("weights.Ru: must be symmetric")
        if np.min(np.linalg.eigvalsh(self.Ru)) <= 0:
            raise ConfigError("weights.Ru: must be positive definite")


@dataclass
class ClosedLoopModes:
    """Switched transition matrices over a common augmented state."""

    labels: List[str]
    matrices: List[np.ndarray]
    probabilities: Optional[List[float]] = None

    def __post_init__(self):
        if not self.matrices:
            raise ConfigError("modes.matrices: at least one mode required")
        self.matrices = [_square(M, "modes.matrices") for M in self.matrices]
        dim = self.matrices[0].shape[0]
        if any(M.shape[0] != dim for M in self.matrices):
            raise ConfigError("modes.matrices: all modes must share one dimension")
        if len(self.labels) != len(self.matrices):
            raise ConfigError("modes.labels: one label per matrix")
        if self.probabilities is not None:
            p = np.asarray(self.probabilities, dtype=float)
            if len(p) != len(self.matrices):
                raise ConfigError("modes.probabilities: one entry per matrix")
            if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-9:
                raise ConfigError("modes.probabilities: must be >= 0 and sum to 1")
            self.probabilities = [float(x) for x in p]

    @property
    def augmented_dim(self) -> int:
        return self.matrices[0].shape[0]

    def with_probabilities(self, probs: Sequence[float]) -> "ClosedLoopModes":
        return ClosedLoopModes(list(self.labels), [M.copy() for M in self.matrices],
                               list(probs))


# ---------------------------------------------------------------------------
# numerics


def matexp(M) -> np.ndarray:
    """Matrix exponential (scaling-and-squaring, Pade core)."""
    return scipy.linalg.expm(_square(M, "matexp.M"))


def c2d(plant: ContinuousLti, T: float) -> DiscreteLti:
    """Zero-order-hold discretization over a sampling period of T seconds.

    Computes [A_d, B_d] from one exponential of the (n+p) augmented matrix
    [[A, B], [0, 0]] * T, which evaluates both e^{AT} and the held-input
    integral at once.
    """
    if not T > 0:
        raise ConfigError("T: sampling period must be > 0")
    n, p = plant.A.shape[0], plant.B.shape[1]
    aug = np.zeros((n + p, n + p))
    aug[:n, :n] = plant.A
    aug[:n, n:] = plant.B
    E = matexp(aug * T)
    return DiscreteLti(E[:n, :n], E[:n, n:], plant.C.copy(), plant.D.copy(), T)


def dlqr(A, B, Qx, Ru, tol=1e-10, max_iter=100_000) -> Tuple[np.ndarray, np.ndarray]:
    """Infinite-horizon discrete LQR gain by Riccati value iteration.

    Iterates P <- Qx + A'PA - A'PB (Ru + B'PB)^-1 B'PA from P0 = Qx until
    the sup-norm update falls below tol.  Returns (K, P) with
    u = -Kx, K = (Ru + B'PB)^-1 B'PA, and verifies the closed loop is
    Schur stable.
    """
    A = _square(A, "dlqr.A")
    B = _as_matrix(B, "dlqr.B")
    w = CostWeights(Qx, Ru)
    Qx, Ru = w.Qx, w.Ru
    if B.shape[0] != A.shape[0]:
        raise ConfigError("dlqr.B: row count must match A")

    P = Qx.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(max_iter):
            BtP = B.T @ P
            K = np.linalg.solve(Ru + BtP @ B, BtP @ A)
            Pn = Qx + A.T @ P @ (A - B @ K)
            Pn = (Pn + Pn.T) / 2
            if not np.all(np.isfinite(Pn)):
                raise NumericalError("dlqr: Riccati iteration diverged; "
                                     "system may be unstabilizable")
            if np.max(np.abs(Pn - P)) < tol:
                P = Pn
                break
            P = Pn
        else:
            raise NumericalError("dlqr: Riccati iteration did not converge "
                                 "within %d steps" % max_iter)

    BtP = B.T @ P
    K = np.linalg.solve(Ru + BtP @ B, BtP @ A)
    if spectral_radius(A - B @ K) >= 1.0:
        raise NumericalError("dlqr: converged gain does not stabilize; "
                             "(A, B) may be unstabilizable")
    return K, P


def kalman_gain(A, C, Wproc=None, Wmeas=None) -> np.ndarray:
    """Steady-state observer gain via LQR duality: L = dlqr(A', C', Wp, Wm)'.

    Noise weights default to identity covariances.
    """
    A = _square(A, "kalman.A")
    C = _as_matrix(C, "kalman.C")
    n, m = A.shape[0], C.shape[0]
    if Wproc is None:
        Wproc = np.eye(n)
    if Wmeas is None:
        Wmeas = np.eye(m)
    K, _ = dlqr(A.T, C.T, Wproc, Wmeas)
    L = K.T
    if spectral_radius(A - L @ C) >= 1.0:
        raise NumericalError("kalman_gain: observer is not stable; "
                             "(A, C) may be undetectable")
    return L


def lqg_assemble(plant_d: DiscreteLti, K, L) -> ControllerLti:
    """Observer-based output-feedback controller from LQR and Kalman gains.

    z' = (A - BK - LC + LDK) z + L y,  u = -K z.  Closed-loop spectrum is
    eig(A-BK) together with eig(A-LC) by separation.
    """
    A, B, C, D = plant_d.A, plant_d.B, plant_d.C, plant_d.D
    K = _as_matrix(K, "lqg.K")
    L = _as_matrix(L, "lqg.L")
    if K.shape != (B.shape[1], A.shape[0]):
        raise ConfigError("lqg.K: shape must be (inputs, states)")
    if L.shape != (A.shape[0], C.shape[0]):
        raise ConfigError("lqg.L: shape must be (states, outputs)")
    E = A - B @ K - L @ C + L @ D @ K
    return ControllerLti(E, L, -K)


def build_modes(plant_d: DiscreteLti, feedback, hold_strategy="hold") -> ClosedLoopModes:
    """Two-mode switched closed loop: fresh command vs command held.

    With a gain matrix K the augmented state is (x, u_held):
        closed: x' = (A - BK) x,        u_held' = -K x
        open:   x' = A x + B u_held,    u_held' = u_held   (or 0)
    With a ControllerLti the augmented state is (x, z, u_held) and the open
    mode freezes z.  Probabilities are left unfilled.
    """
    if hold_strategy not in ("hold", "zero"):
        raise ConfigError("hold_strategy: must be hold or zero")
    A, B = plant_d.A, plant_d.B
    n, p = A.shape[0], B.shape[1]

    if isinstance(feedback, ControllerLti):
        C, D = plant_d.C, plant_d.D
        E, F, G = feedback.E, feedback.F, feedback.G
        q = E.shape[0]
        if F.shape[1] != C.shape[0] or G.shape[0] != p:
            raise ConfigError("controller.F: dimensions must match plant outputs/inputs")
        dim = n + q + p
        Ac = np.zeros((dim, dim))
        Ac[:n, :n] = A
        Ac[:n, n:n + q] = B @ G
        Ac[n:n + q, :n] = F @ C
        Ac[n:n + q, n:n + q] = E + F @ D @ G
        Ac[n + q:, n:n + q] = G
        Ao = np.zeros((dim, dim))
        Ao[:n, :n] = A
        Ao[n:n + q, n:n + q] = np.eye(q)
        if hold_strategy == "hold":
            Ao[:n, n + q:] = B
            Ao[n + q:, n + q:] = np.eye(p)
    else:
        K = _as_matrix(feedback, "modes.K")
        if K.shape != (p, n):
            raise ConfigError("modes.K: shape must be (inputs, states)")
        dim = n + p
        Ac = np.zeros((dim, dim))
        Ac[:n, :n] = A - B @ K
        Ac[n:, :n] = -K
        Ao = np.zeros((dim, dim))
        Ao[:n, :n] = A
        if hold_strategy == "hold":
            Ao[:n, n:] = B
            Ao[n:, n:] = np.eye(p)
    return ClosedLoopModes(["closed", "open"], [Ac, Ao])


def kron(Amat, Bmat) -> np.ndarray:
    return np.kron(_as_matrix(Amat, "kron.A"), _as_matrix(Bmat, "kron.B"))


def stability_matrix(modes: ClosedLoopModes) -> np.ndarray:
    """Second-moment transition matrix sum_i p_i (A_i kron A_i)."""
    if modes.probabilities is None:
        raise ConfigError("modes.probabilities: must be filled for stability analysis")
    dim = modes.augmented_dim ** 2
    out = np.zeros((dim, dim))
    for p, M in zip(modes.probabilities, modes.matrices):
        if p > 0:
            out += p * np.kron(M, M)
    return out


def gelfand_radius(M, squarings=26) -> float:
    """Spectral radius by normalized repeated squaring of the Frobenius norm.

    Independent of eigensolvers; converges like norm(M^(2^k))^(1/2^k).
    """
    X = _square(M, "gelfand.M").astype(float)
    acc = 0.0
    weight = 1.0
    for _ in range(squarings + 1):
        n = float(np.linalg.norm(X))
        if n == 0.0:
            return 0.0
        acc += weight * math.log(n)
        X = (X / n) @ (X / n)
        weight /= 2.0
    return math.exp(acc)


def spectral_radius(M) -> float:
    """Largest eigenvalue modulus.

    Delegates to the LAPACK QR eigensolver; if that fails to converge the
    Gelfand repeated-squaring estimate is returned with a warning.
    """
    A = _square(M, "spectral_radius.M")
    if A.size == 0:
        return 0.0
    try:
        return float(np.max(np.abs(np.linalg.eigvals(A))))
    except np.linalg.LinAlgError:
        warnings.warn("eigenvalue iteration failed; returning approximate "
                      "Gelfand estimate", RuntimeWarning)
        return gelfand_radius(A)


def second_moment_stable(modes: ClosedLoopModes, margin=1e-9) -> bool:
    """True iff the mode-switched second moment contracts: rho(Atilde) < 1 - margin."""
    return spectral_radius(stability_matrix(modes)) < 1.0 - margin
