"""Ring-star Ising Hamiltonian and symmetry-reduced sector bases.

The model is a ring of L spins (sites 0..L-1, periodic bond between L-1
and 0) uniformly coupled to one central ancilla qubit at site index L:

    H = sum_i  lam * s^a_i s^a_c  -  J * s^z_i s^z_{i+1}
             + h * s^x_i + g * s^z_i
        + h_c * s^x_c + g_c * s^z_c

with coupling axis a = Z (the standard model) or a = X (the transverse
variant).  Energies are in units of J; times in 1/J.

Basis convention: bit b of a computational index is the z-eigenvalue of
site b (bit 0 means +1), with the c-qubit the most significant bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sparse

from .pauli import PauliString, PauliSum


class ModelError(ValueError):
    """Invalid model parameters or unsupported configuration."""


_CONFIG_KEYS = ("L", "lambda", "J", "h", "g", "h_c", "g_c", "axis", "boundary")


@dataclass(frozen=True)
class ModelSpec:
    """All Hamiltonian parameters; immutable and hashable."""

    L: int
    lam: float = 1.0
    J: float = 1.0
    h: float = 1.05
    g: float = 0.45
    h_c: float = 1.05
    g_c: float = 0.45
    coupling_axis: str = "Z"
    boundary: str = "periodic"

    def __post_init__(self):
        if self.L < 1:
            raise ModelError(f"L must be >= 1, got {self.L}")
        for name in ("lam", "J", "h", "g", "h_c", "g_c"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ModelError(f"{name} must be finite, got {v}")
        if self.coupling_axis not in ("Z", "X"):
            raise ModelError(f"coupling_axis must be Z or X, got {self.coupling_axis!r}")
        if self.boundary not in ("periodic", "open"):
            raise ModelError(f"boundary must be periodic or open, got {self.boundary!r}")

    @property
    def n_sites(self) -> int:
        """Ring plus c-qubit."""
        return self.L + 1

    @property
    def c_site(self) -> int:
        return self.L

    @property
    def dim(self) -> int:
        return 1 << self.n_sites

    def bonds(self) -> list[tuple[int, int]]:
        """Nearest-neighbor ring bonds (i, i+1), wrapping when periodic."""
        if self.L == 1:
            return []
        if self.boundary == "periodic":
            return [(i, (i + 1) % self.L) for i in range(self.L)]
        return [(i, i + 1) for i in range(self.L - 1)]

    def replace(self, **kwargs) -> "ModelSpec":
        return replace(self, **kwargs)

    # -- flat key-value config round trip --------------------------------

    def to_config(self) -> str:
        vals = {
            "L": self.L, "lambda": self.lam, "J": self.J, "h": self.h,
            "g": self.g, "h_c": self.h_c, "g_c": self.g_c,
            "axis": self.coupling_axis, "boundary": self.boundary,
        }
        return "\n".join(f"{k} = {vals[k]!r}" for k in _CONFIG_KEYS) + "\n"

    @classmethod
    def from_config(cls, text: str) -> "ModelSpec":
        raw: dict[str, str] = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ModelError(f"line {lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            raw[key.strip()] = value.strip()
        unknown = set(raw) - set(_CONFIG_KEYS)
        if unknown:
            raise ModelError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(
                L=int(raw["L"]),
                lam=float(raw["lambda"]),
                J=float(raw["J"]),
                h=float(raw["h"]),
                g=float(raw["g"]),
                h_c=float(raw["h_c"]),
                g_c=float(raw["g_c"]),
                coupling_axis=raw["axis"].strip("'\""),
                boundary=raw["boundary"].strip("'\""),
            )
        except KeyError as exc:
            raise ModelError(f"missing config key {exc.args[0]!r}") from None

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        if "axis" in d:
            d["coupling_axis"] = d.pop("axis")
        return cls(**d)


def build_pauli_sum(spec: ModelSpec) -> PauliSum:
    """Hamiltonian as a PauliSum; zero-coefficient terms are omitted."""
    n = spec.n_sites
    c = spec.c_site
    axis = spec.coupling_axis
    terms: list[tuple[PauliString, complex]] = []

    def two_site(site_a: int, axis_a: str, site_b: int, axis_b: str) -> PauliString:
        return PauliString.single(n, site_a, axis_a) * PauliString.single(n, site_b, axis_b)

    if spec.lam != 0.0:
        for i in range(spec.L):
            terms.append((two_site(i, axis, c, axis), spec.lam))
    if spec.J != 0.0:
        for i, j in spec.bonds():
            terms.append((two_site(i, "Z", j, "Z"), -spec.J))
    for i in range(spec.L):
        if spec.h != 0.0:
            terms.append((PauliString.single(n, i, "X"), spec.h))
        if spec.g != 0.0:
            terms.append((PauliString.single(n, i, "Z"), spec.g))
    if spec.h_c != 0.0:
        terms.append((PauliString.single(n, c, "X"), spec.h_c))
    if spec.g_c != 0.0:
        terms.append((PauliString.single(n, c, "Z"), spec.g_c))
    return PauliSum(n, terms)


# -- matrix-free application ----------------------------------------------

def _flipped(arr: np.ndarray, bit: int, n_qubits: int) -> np.ndarray:
    """The array with basis bit `bit` flipped along the state axis (axis 0)."""
    lead = 1 << (n_qubits - 1 - bit)
    shaped = arr.reshape(lead, 2, -1)
    return shaped[:, ::-1, :].reshape(arr.shape)


class HamiltonianOperator:
    """Matrix-free H application on state vectors (or column batches)."""

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self.dim = spec.dim
        n = spec.n_sites
        idx = np.arange(self.dim, dtype=np.int64)
        zvals = [1.0 - 2.0 * ((idx >> b) & 1) for b in range(n)]

        diag = np.zeros(self.dim)
        if spec.g != 0.0:
            diag += spec.g * sum(zvals[i] for i in range(spec.L))
        if spec.g_c != 0.0:
            diag += spec.g_c * zvals[spec.c_site]
        if spec.J != 0.0:
            for i, j in spec.bonds():
                diag -= spec.J * zvals[i] * zvals[j]
        if spec.coupling_axis == "Z" and spec.lam != 0.0:
            diag += spec.lam * zvals[spec.c_site] * sum(zvals[i] for i in range(spec.L))
        self._diag = diag

        self._flips: list[tuple[int, float]] = []
        if spec.h != 0.0:
            self._flips += [(i, spec.h) for i in range(spec.L)]
        if spec.h_c != 0.0:
            self._flips.append((spec.c_site, spec.h_c))
        # X-axis star coupling flips both the ring site and the c-qubit
        self._pair_flips: list[tuple[int, int, float]] = []
        if spec.coupling_axis == "X" and spec.lam != 0.0:
            self._pair_flips = [(i, spec.c_site, spec.lam) for i in range(spec.L)]

    def matvec(self, psi: np.ndarray) -> np.ndarray:
        if psi.shape[0] != self.dim:
            raise ModelError(f"state dimension {psi.shape[0]} != {self.dim}")
        n = self.spec.n_sites
        diag = self._diag if psi.ndim == 1 else self._diag[:, None]
        out = diag * psi
        for bit, coeff in self._flips:
            out += coeff * _flipped(psi, bit, n)
        for bit_a, bit_b, coeff in self._pair_flips:
            out += coeff * _flipped(_flipped(psi, bit_a, n), bit_b, n)
        return out

    __call__ = matvec

    def to_dense(self) -> np.ndarray:
        return self.matvec(np.eye(self.dim, dtype=complex))

    def expectation(self, psi: np.ndarray) -> float:
        return float(np.real(np.vdot(psi, self.matvec(psi))))


@lru_cache(maxsize=32)
def _cached_operator(spec: ModelSpec) -> HamiltonianOperator:
    return HamiltonianOperator(spec)


def hamiltonian_operator(spec: ModelSpec) -> HamiltonianOperator:
    """Shared (cached) matrix-free operator for `spec`."""
    return _cached_operator(spec)


def apply_hamiltonian(spec: ModelSpec, psi: np.ndarray) -> np.ndarray:
    """H @ psi without forming the matrix."""
    return hamiltonian_operator(spec).matvec(psi)


# -- symmetry sectors -------------------------------------------------------

def _translate(config: int, L: int) -> int:
    """Shift every ring site by +1 (periodic)."""
    return ((config << 1) | (config >> (L - 1))) & ((1 << L) - 1)


def _reflect(config: int, L: int) -> int:
    """Spatial reflection i -> (L - i) mod L."""
    out = config & 1
    for i in range(1, L):
        out |= ((config >> i) & 1) << (L - i)
    return out


def _orbit_rep(config: int, L: int) -> tuple[int, int]:
    """Lexicographic minimum of the translation orbit and the orbit period."""
    rep = config
    period = 0
    current = config
    for d in range(1, L + 1):
        current = _translate(current, L)
        if current < rep:
            rep = current
        if current == config and period == 0:
            period = d
    return rep, period


@dataclass(frozen=True)
class SectorBasis:
    """Orthonormal basis of the k=0, fixed-reflection-parity ring subspace.

    `isometry` has shape (2^L, dimension) with the symmetrized states as
    columns; the c-qubit is not included (tensor it in separately).
    """

    L: int
    momentum_k: int
    reflection_parity: int
    representatives: tuple[int, ...]
    weights: tuple[float, ...]
    dimension: int
    includes_cqubit: bool
    isometry: sparse.csc_matrix

    def projector(self) -> np.ndarray:
        v = self.isometry.toarray()
        return v @ v.T.conj()


def build_sector_basis(L: int, reflection_parity: int) -> SectorBasis:
    """Momentum k=0 states of the L-site ring, split by spatial reflection.

    Each translation orbit (necklace) contributes one k=0 state; reflection
    maps orbits onto orbits, pairing chiral necklaces and fixing achiral
    ones.  Achiral necklaces appear only in the +1 sector, chiral pairs
    contribute one state to each sector.
    """
    if reflection_parity not in (+1, -1):
        raise ModelError("reflection_parity must be +1 or -1")
    if L < 1:
        raise ModelError("L must be >= 1")

    size = 1 << L
    seen = np.zeros(size, dtype=bool)
    rows: list[int] = []
    cols: list[int] = []
    data: list[float] = []
    reps: list[int] = []
    weights: list[float] = []
    col = 0

    def orbit_members(rep: int, period: int) -> list[int]:
        members = [rep]
        cur = rep
        for _ in range(period - 1):
            cur = _translate(cur, L)
            members.append(cur)
        return members

    for config in range(size):
        if seen[config]:
            continue
        rep, period = _orbit_rep(config, L)
        if rep != config:
            continue
        members = orbit_members(rep, period)
        for m in members:
            seen[m] = True
        partner, _ = _orbit_rep(_reflect(rep, L), L)
        if partner == rep:
            # achiral: the k=0 state is reflection even
            if reflection_parity == +1:
                amp = 1.0 / math.sqrt(period)
                rows += members
                cols += [col] * period
                data += [amp] * period
                reps.append(rep)
                weights.append(amp)
                col += 1
        elif partner > rep:
            # chiral pair: (|rep,k0> +- |partner,k0>)/sqrt(2)
            partner_members = orbit_members(partner, period)
            for m in partner_members:
                seen[m] = True
            amp = 1.0 / math.sqrt(2 * period)
            rows += members + partner_members
            cols += [col] * (2 * period)
            data += [amp] * period + [reflection_parity * amp] * period
            reps.append(rep)
            weights.append(amp)
            col += 1

    isometry = sparse.csc_matrix(
        (data, (rows, cols)), shape=(size, col), dtype=float)
    return SectorBasis(
        L=L, momentum_k=0, reflection_parity=reflection_parity,
        representatives=tuple(reps), weights=tuple(weights),
        dimension=col, includes_cqubit=False, isometry=isometry)


def sector_hamiltonian(spec: ModelSpec, basis: SectorBasis) -> np.ndarray:
    """Dense Hermitian H in the sector basis, c-qubit tensored in unreduced.

    Valid only for translation-invariant specs (periodic boundary); the
    result is (2*dim_sector) x (2*dim_sector), ordered with the c-qubit
    z-eigenvalue as the slow index.
    """
    if spec.boundary != "periodic":
        raise ModelError("sector reduction requires periodic boundary")
    if basis.L != spec.L:
        raise ModelError(f"basis is for L={basis.L}, spec has L={spec.L}")
    if basis.includes_cqubit:
        raise ModelError("pass the ring-only basis; the c-qubit is tensored here")

    op = hamiltonian_operator(spec)
    lift = sparse.kron(sparse.identity(2, format="csc"), basis.isometry,
                       format="csc").astype(complex)
    d_sec = 2 * basis.dimension
    out = np.empty((d_sec, d_sec), dtype=complex)
    chunk = max(1, (1 << 22) // spec.dim)
    for j0 in range(0, d_sec, chunk):
        j1 = min(j0 + chunk, d_sec)
        cols = lift[:, j0:j1].toarray()
        out[:, j0:j1] = lift.T.conj() @ op.matvec(cols)
    out = 0.5 * (out + out.T.conj())
    return out
