"""State preparation and time evolution (dense reference and Krylov).

States are plain complex numpy arrays of length 2^(L+1); bit b of the
index is the z-eigenvalue of site b (0 meaning +1).  Dense propagation
goes through a cached eigendecomposition and is exact; Krylov propagation
uses fixed-step Lanczos with a last-component error estimate and adaptive
step halving, so it scales to sizes where the dense route is off limits.
"""

from __future__ import annotations

import logging
import os
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import NumericalError, ResourceCapError
from .model import ModelSpec, HamiltonianOperator, hamiltonian_operator

logger = logging.getLogger("ringstar.dynamics")

DEFAULT_DENSE_DIM = 1 << 12  # full eigendecomposition above this is too slow
DEFAULT_SPECTRUM_CAP = 5000
_NORM_TOL = 1e-9


def max_dense_dim() -> int:
    """Dense-route dimension cap; RINGSTAR_MAX_DENSE_DIM overrides."""
    env = os.environ.get("RINGSTAR_MAX_DENSE_DIM")
    return int(env) if env else DEFAULT_DENSE_DIM


# -- state preparation -------------------------------------------------------

def state_plus_y(n_sites: int) -> np.ndarray:
    """Product state with every qubit in (|0> + i|1>)/sqrt(2)."""
    if n_sites < 1:
        raise ValueError("n_sites must be >= 1")
    idx = np.arange(1 << n_sites)
    ones = np.zeros(len(idx), dtype=np.int64)
    for b in range(n_sites):
        ones += (idx >> b) & 1
    return (1j ** ones) / np.sqrt(2.0) ** n_sites


def state_haar(n_sites: int, seed: int) -> np.ndarray:
    """Haar-random state: normalized i.i.d. complex Gaussian amplitudes."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    dim = 1 << n_sites
    vec = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return vec / np.linalg.norm(vec)


def state_basis(n_sites: int, index: int) -> np.ndarray:
    psi = np.zeros(1 << n_sites, dtype=complex)
    psi[index] = 1.0
    return psi


# -- dense propagation ------------------------------------------------------

@lru_cache(maxsize=2)
def dense_eigensystem(spec: ModelSpec) -> tuple[np.ndarray, np.ndarray]:
    """Cached (eigenvalues, eigenvectors) of the full Hamiltonian."""
    if spec.dim > max_dense_dim():
        raise ResourceCapError(
            f"dim {spec.dim} exceeds the dense cap {max_dense_dim()}; "
            "raise RINGSTAR_MAX_DENSE_DIM to override")
    h = HamiltonianOperator(spec).to_dense()
    evals, evecs = np.linalg.eigh(h)
    return evals, evecs


def evolve_dense(spec: ModelSpec, psi: np.ndarray, t: float) -> np.ndarray:
    """exp(-iHt) psi via full eigendecomposition."""
    if psi.shape[0] != spec.dim:
        raise ValueError(f"state dimension {psi.shape[0]} != {spec.dim}")
    evals, evecs = dense_eigensystem(spec)
    coeffs = evecs.T.conj() @ psi
    return evecs @ (np.exp(-1j * evals * t) * coeffs)


def full_spectrum(matrix: np.ndarray, cap: int = DEFAULT_SPECTRUM_CAP) -> np.ndarray:
    """Ascending eigenvalues of a dense Hermitian matrix."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {matrix.shape}")
    if matrix.shape[0] > cap:
        raise ResourceCapError(
            f"matrix dimension {matrix.shape[0]} exceeds the cap {cap}")
    if np.abs(matrix - matrix.T.conj()).max(initial=0.0) > 1e-10 * max(
            1.0, np.abs(matrix).max(initial=0.0)):
        raise ValueError("matrix is not Hermitian")
    return np.sort(np.linalg.eigvalsh(matrix))


# -- Krylov propagation ------------------------------------------------------

@dataclass(frozen=True)
class KrylovParams:
    """Lanczos stepping parameters (subspace size, step, per-step tolerance)."""

    m: int = 30
    dt: float = 0.05
    local_tolerance: float = 1e-10

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("subspace dimension m must be >= 2")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.local_tolerance > 0:
            raise ValueError("local_tolerance must be positive")


class KrylovPropagator:
    """Fixed-step Lanczos propagator with adaptive halving.

    Each step builds an m-dimensional Krylov basis with full
    reorthogonalization, exponentiates the tridiagonal projection, and
    estimates the local error from the last subspace component.  Steps
    whose estimate exceeds ``params.local_tolerance`` are halved; happy
    breakdown (an invariant subspace) is treated as exact.
    """

    _MAX_HALVINGS = 24
    _REORTH_REPORT = 1e-8

    def __init__(self, operator: HamiltonianOperator | ModelSpec,
                 params: KrylovParams | None = None):
        if isinstance(operator, ModelSpec):
            operator = hamiltonian_operator(operator)
        self.op = operator
        self.params = params or KrylovParams()
        self.steps_taken = 0
        self.halvings = 0
        self.reorth_events = 0
        self.max_step_error = 0.0

    def _lanczos_step(self, psi: np.ndarray, dt: float) -> tuple[np.ndarray, float]:
        m = self.params.m
        dim = psi.shape[0]
        norm0 = np.linalg.norm(psi)
        if norm0 == 0.0:
            raise NumericalError("cannot propagate the zero vector")
        basis = np.empty((dim, m), dtype=complex)
        alphas = np.empty(m)
        betas = np.zeros(m)
        basis[:, 0] = psi / norm0
        k = m
        beta_next = 0.0
        for j in range(m):
            w = self.op.matvec(basis[:, j])
            if j > 0:
                w -= betas[j] * basis[:, j - 1]
            alphas[j] = np.real(np.vdot(basis[:, j], w))
            w -= alphas[j] * basis[:, j]
            # full one-pass reorthogonalization; report when it mattered
            overlap = basis[:, :j + 1].T.conj() @ w
            correction = np.linalg.norm(overlap)
            if correction > self._REORTH_REPORT:
                self.reorth_events += 1
                logger.debug("reorthogonalization correction %.3e at j=%d",
                             correction, j)
            w -= basis[:, :j + 1] @ overlap
            beta_next = np.linalg.norm(w)
            if beta_next < 1e-14 * max(1.0, abs(alphas[j])):
                k = j + 1  # happy breakdown: invariant subspace, exact result
                beta_next = 0.0
                break
            if j + 1 < m:
                betas[j + 1] = beta_next
                basis[:, j + 1] = w / beta_next
        evals, evecs = eigh_tridiagonal(alphas[:k], betas[1:k])
        u = evecs @ (np.exp(-1j * dt * evals) * evecs[0, :].conj())
        out = norm0 * (basis[:, :k] @ u)
        err = abs(beta_next) * abs(dt) * abs(u[-1])
        return out, err

    def _step_adaptive(self, psi: np.ndarray, dt: float, depth: int = 0) -> np.ndarray:
        out, err = self._lanczos_step(psi, dt)
        if err <= self.params.local_tolerance:
            self.steps_taken += 1
            self.max_step_error = max(self.max_step_error, err)
            return out
        if depth >= self._MAX_HALVINGS:
            raise NumericalError(
                f"Krylov step failed to reach tolerance after "
                f"{self._MAX_HALVINGS} halvings (estimate {err:.3e})")
        self.halvings += 1
        half = self._step_adaptive(psi, dt / 2, depth + 1)
        return self._step_adaptive(half, dt / 2, depth + 1)

    def evolve(self, psi: np.ndarray, t: float) -> np.ndarray:
        """exp(-iHt) psi, stepping with params.dt (t may be negative)."""
        if t == 0.0:
            return psi.copy()
        dt = self.params.dt if t > 0 else -self.params.dt
        remaining = t
        out = psi
        while abs(remaining) > 1e-15 * max(1.0, abs(t)):
            step = dt if abs(remaining) >= abs(dt) else remaining
            out = self._step_adaptive(out, step)
            remaining -= step
        norm = np.linalg.norm(out)
        if abs(norm - 1.0) > _NORM_TOL and abs(np.linalg.norm(psi) - 1.0) <= _NORM_TOL:
            logger.warning("norm drift %.3e after evolve; renormalizing", norm - 1.0)
            out = out / norm
        return out


def evolve_krylov(spec: ModelSpec, psi: np.ndarray, t: float,
                  params: KrylovParams | None = None) -> np.ndarray:
    """Lanczos time evolution of `psi` by `t` under the spec Hamiltonian."""
    return KrylovPropagator(spec, params).evolve(psi, t)


# -- checkpoint format -------------------------------------------------------

def save_state(path, psi: np.ndarray) -> None:
    """Binary checkpoint: u64-LE dimension, then (re, im) f64-LE pairs."""
    psi = np.ascontiguousarray(psi, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", psi.shape[0]))
        fh.write(psi.view("<f8").tobytes())


def load_state(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(8)
        if len(header) != 8:
            raise ValueError("truncated checkpoint header")
        (dim,) = struct.unpack("<Q", header)
        payload = fh.read()
    expected = 16 * dim
    if len(payload) != expected:
        raise ValueError(f"checkpoint payload has {len(payload)} bytes, "
                         f"expected {expected}")
    return np.frombuffer(payload, dtype="<f8").astype(np.float64) \
             .view(np.complex128).copy()
