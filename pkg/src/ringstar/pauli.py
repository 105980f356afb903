"""Phase-tracked multi-qubit Pauli operator algebra.

Operators act on ``n_sites`` qubits indexed 0..n_sites-1 (bit b of a basis
index is the z-eigenvalue of site b, 0 meaning +1).  A ``PauliString`` is
stored in symplectic form: an x bitmask, a z bitmask, and a phase from
{+1, +i, -1, -i}.  The bare mask pair (x, z) denotes the product
``prod_b X_b^{x_b} Z_b^{z_b}`` with X left of Z on each site, so a site
with both bits set carries XZ = -iY.  ``PauliSum`` keys are canonicalized
to the Hermitian sigma-string convention Y = i*X*Z, which makes a sum
Hermitian exactly when all its coefficients are real.

Paulis here are the sigma operators with eigenvalues +-1 (not spin-1/2
S = sigma/2); all commutator prefactors follow from that choice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

_AXES = "IXYZ"

# (x_bit, z_bit) per axis label
_AXIS_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}

_SINGLE_QUBIT = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}

_PHASES = (1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j)

DEFAULT_PRUNE_THRESHOLD = 1e-14
DEFAULT_TERM_CAP = 10**6


class PauliError(ValueError):
    """Usage error in the Pauli algebra (mismatched sites, bad labels)."""


class TermCapExceeded(RuntimeError):
    """Nested-commutator expansion hit the term-count cap.

    Attributes
    ----------
    order_reached : int
        Highest commutator order fully computed before truncation.
    """

    def __init__(self, message: str, order_reached: int):
        super().__init__(message)
        self.order_reached = order_reached


def _phase_exponent(x: int, z: int) -> int:
    """Power of i relating the bare mask product to the sigma string."""
    return (x & z).bit_count() % 4


@dataclass(frozen=True)
class PauliString:
    """A single Pauli operator ``i^phase_power * prod_b X^x_b Z^z_b``."""

    n_sites: int
    x_mask: int
    z_mask: int
    phase_power: int = 0  # operator = i**phase_power * bare mask product

    def __post_init__(self):
        if self.n_sites < 1:
            raise PauliError("need at least one site")
        top = 1 << self.n_sites
        if not (0 <= self.x_mask < top and 0 <= self.z_mask < top):
            raise PauliError("mask outside the site range")
        object.__setattr__(self, "phase_power", self.phase_power % 4)

    # -- constructors ---------------------------------------------------

    @classmethod
    def identity(cls, n_sites: int) -> "PauliString":
        return cls(n_sites, 0, 0, 0)

    @classmethod
    def single(cls, n_sites: int, site: int, axis: str) -> "PauliString":
        """Single sigma^axis on `site`, identity elsewhere."""
        if not 0 <= site < n_sites:
            raise PauliError(f"site {site} out of range for {n_sites} sites")
        x, z = _AXIS_BITS[axis.upper()]
        # a lone Y is i*X*Z, so the sigma convention needs phase i
        phase = 1 if axis.upper() == "Y" else 0
        return cls(n_sites, x << site, z << site, phase)

    @classmethod
    def from_label(cls, label: str, phase: complex = 1.0) -> "PauliString":
        """Build from an IXYZ string, site 0 leftmost; `phase` multiplies it."""
        x = z = 0
        n_y = 0
        for site, ch in enumerate(label.upper()):
            if ch not in _AXIS_BITS:
                raise PauliError(f"bad Pauli label character {ch!r}")
            xb, zb = _AXIS_BITS[ch]
            x |= xb << site
            z |= zb << site
            n_y += int(ch == "Y")
        try:
            p = _PHASES.index(complex(phase))
        except ValueError:
            raise PauliError(f"phase must be a fourth root of unity, got {phase!r}")
        return cls(len(label), x, z, (n_y + p) % 4)

    # -- properties -----------------------------------------------------

    @property
    def phase(self) -> complex:
        return _PHASES[self.phase_power]

    @property
    def sigma_phase(self) -> complex:
        """Coefficient against the Hermitian sigma string with the same masks."""
        return _PHASES[(self.phase_power - _phase_exponent(self.x_mask, self.z_mask)) % 4]

    @property
    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0 and self.phase_power == 0

    @property
    def is_hermitian(self) -> bool:
        return self.sigma_phase.imag == 0.0

    def weight(self) -> int:
        """Number of sites acted on nontrivially."""
        return (self.x_mask | self.z_mask).bit_count()

    def label(self) -> str:
        """IXYZ string over sites 0..n_sites-1, phase not included."""
        lookup = ((("I", "Z"), ("X", "Y")))
        chars = []
        for b in range(self.n_sites):
            xb = (self.x_mask >> b) & 1
            zb = (self.z_mask >> b) & 1
            chars.append(lookup[xb][zb])
        return "".join(chars)

    def __repr__(self) -> str:
        signs = {0: "+1", 1: "+i", 2: "-1", 3: "-i"}
        p = (self.phase_power - _phase_exponent(self.x_mask, self.z_mask)) % 4
        return f"({signs[p]})*{self.label()}"

    # -- algebra ----------------------------------------------------------

    def __mul__(self, other: "PauliString") -> "PauliString":
        return multiply(self, other)

    def adjoint(self) -> "PauliString":
        n_y = _phase_exponent(self.x_mask, self.z_mask)
        return PauliString(self.n_sites, self.x_mask, self.z_mask,
                           (2 * n_y - self.phase_power) % 4)

    def commutes_with(self, other: "PauliString") -> bool:
        if self.n_sites != other.n_sites:
            raise PauliError("site counts differ")
        sym = (self.x_mask & other.z_mask).bit_count() \
            + (self.z_mask & other.x_mask).bit_count()
        return sym % 2 == 0

    def to_matrix(self) -> np.ndarray:
        """Dense 2^n matrix; site 0 is the least significant index bit."""
        label = self.label()
        mat = np.array([[self.sigma_phase]])
        for site in reversed(range(self.n_sites)):
            mat = np.kron(mat, _SINGLE_QUBIT[label[site]])
        return mat


def multiply(a: PauliString, b: PauliString) -> PauliString:
    """Exact product a*b with accumulated phase."""
    if a.n_sites != b.n_sites:
        raise PauliError("site counts differ")
    # commuting Z factors of a past X factors of b gives (-1) per overlap
    swaps = (a.z_mask & b.x_mask).bit_count()
    return PauliString(
        a.n_sites,
        a.x_mask ^ b.x_mask,
        a.z_mask ^ b.z_mask,
        (a.phase_power + b.phase_power + 2 * swaps) % 4,
    )


class PauliSum:
    """Linear combination of Pauli strings with canonical sigma-string keys.

    Terms are held as a map (x_mask, z_mask) -> complex coefficient, the
    coefficient multiplying the Hermitian sigma string (Y convention
    Y = i*X*Z folded into the coefficient).  Coefficients with magnitude
    at or below `prune_threshold` are dropped.
    """

    __slots__ = ("n_sites", "prune_threshold", "_terms")

    def __init__(self, n_sites: int,
                 terms: Iterable[tuple[PauliString, complex]] = (),
                 prune_threshold: float = DEFAULT_PRUNE_THRESHOLD):
        self.n_sites = n_sites
        self.prune_threshold = prune_threshold
        self._terms: dict[tuple[int, int], complex] = {}
        for string, coeff in terms:
            self.add_string(string, coeff)

    # -- construction -----------------------------------------------------

    @classmethod
    def from_label_coeffs(cls, pairs: Iterable[tuple[str, complex]],
                          prune_threshold: float = DEFAULT_PRUNE_THRESHOLD) -> "PauliSum":
        pairs = list(pairs)
        if not pairs:
            raise PauliError("cannot infer the site count from an empty term list")
        n = len(pairs[0][0])
        return cls(n, ((PauliString.from_label(lbl), c) for lbl, c in pairs),
                   prune_threshold)

    def add_string(self, string: PauliString, coeff: complex = 1.0) -> None:
        if string.n_sites != self.n_sites:
            raise PauliError("site counts differ")
        key = (string.x_mask, string.z_mask)
        c = self._terms.get(key, 0.0) + coeff * string.sigma_phase
        if abs(c) <= self.prune_threshold:
            self._terms.pop(key, None)
        else:
            self._terms[key] = c

    def copy(self) -> "PauliSum":
        out = PauliSum(self.n_sites, prune_threshold=self.prune_threshold)
        out._terms = dict(self._terms)
        return out

    # -- inspection ---------------------------------------------------------

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[tuple[PauliString, complex]]:
        """Yield (sigma string, coefficient) pairs."""
        for (x, z), c in self._terms.items():
            yield PauliString(self.n_sites, x, z, _phase_exponent(x, z)), c

    def coefficient(self, label: str) -> complex:
        s = PauliString.from_label(label)
        key = (s.x_mask, s.z_mask)
        # from_label folds Y phases, so the stored value is already sigma-keyed
        return self._terms.get(key, 0.0)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return all(abs(c.imag) <= tol for c in self._terms.values())

    def norm2(self) -> float:
        """Frobenius weight: sum of |coefficient|^2."""
        return float(sum(abs(c) ** 2 for c in self._terms.values()))

    def __repr__(self) -> str:
        inner = ", ".join(f"{c:+.3g}*{s.label()}" for s, c in sorted(
            self, key=lambda t: t[0].label())[:8])
        more = "" if len(self) <= 8 else f", ... ({len(self)} terms)"
        return f"PauliSum[{inner}{more}]"

    # -- linear algebra -------------------------------------------------------

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if self.n_sites != other.n_sites:
            raise PauliError("site counts differ")
        out = self.copy()
        for key, c in other._terms.items():
            v = out._terms.get(key, 0.0) + c
            if abs(v) <= out.prune_threshold:
                out._terms.pop(key, None)
            else:
                out._terms[key] = v
        return out

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + (-1.0) * other

    def __rmul__(self, scalar: complex) -> "PauliSum":
        out = PauliSum(self.n_sites, prune_threshold=self.prune_threshold)
        if scalar != 0:
            out._terms = {k: scalar * c for k, c in self._terms.items()
                          if abs(scalar * c) > self.prune_threshold}
        return out

    def __matmul__(self, other: "PauliSum") -> "PauliSum":
        """Operator product, expanded term by term."""
        if self.n_sites != other.n_sites:
            raise PauliError("site counts differ")
        out = PauliSum(self.n_sites, prune_threshold=self.prune_threshold)
        acc = out._terms
        for (xa, za), ca in self._terms.items():
            pa = _phase_exponent(xa, za)
            for (xb, zb), cb in other._terms.items():
                xc, zc = xa ^ xb, za ^ zb
                k = (pa + _phase_exponent(xb, zb)
                     + 2 * (za & xb).bit_count()
                     - _phase_exponent(xc, zc)) % 4
                acc[(xc, zc)] = acc.get((xc, zc), 0.0) + ca * cb * _PHASES[k]
        out._prune_in_place()
        return out

    def adjoint(self) -> "PauliSum":
        out = PauliSum(self.n_sites, prune_threshold=self.prune_threshold)
        out._terms = {k: c.conjugate() for k, c in self._terms.items()}
        return out

    def _prune_in_place(self) -> None:
        drop = [k for k, c in self._terms.items() if abs(c) <= self.prune_threshold]
        for k in drop:
            del self._terms[k]

    def to_matrix(self) -> np.ndarray:
        dim = 1 << self.n_sites
        mat = np.zeros((dim, dim), dtype=complex)
        for string, coeff in self:
            mat += coeff * string.to_matrix()
        return mat


def commutator(a: PauliSum, b: PauliSum) -> PauliSum:
    """[a, b] = ab - ba; commuting term pairs cancel exactly, never numerically."""
    if a.n_sites != b.n_sites:
        raise PauliError("site counts differ")
    out = PauliSum(a.n_sites, prune_threshold=min(a.prune_threshold, b.prune_threshold))
    acc = out._terms
    for (xa, za), ca in a._terms.items():
        pa = _phase_exponent(xa, za)
        for (xb, zb), cb in b._terms.items():
            # anticommuting pairs contribute 2*ab; commuting pairs drop out
            if ((xa & zb).bit_count() + (za & xb).bit_count()) % 2 == 0:
                continue
            xc, zc = xa ^ xb, za ^ zb
            k = (pa + _phase_exponent(xb, zb)
                 + 2 * (za & xb).bit_count()
                 - _phase_exponent(xc, zc)) % 4
            acc[(xc, zc)] = acc.get((xc, zc), 0.0) + 2.0 * ca * cb * _PHASES[k]
    out._prune_in_place()
    return out


def bch_nested(h: PauliSum, op: PauliSum, order: int,
               max_terms: int = DEFAULT_TERM_CAP) -> list[PauliSum]:
    """Nested commutators [h, op]_1 .. [h, op]_order.

    [h, op]_m = [h, [h, op]_{m-1}] with [h, op]_0 = op.  The term count of
    each level is checked against `max_terms`; exceeding it raises
    :class:`TermCapExceeded` carrying the highest fully computed order, so
    truncation is never silent.
    """
    if order < 1:
        raise PauliError("order must be >= 1")
    levels: list[PauliSum] = []
    current = op
    for m in range(1, order + 1):
        current = commutator(h, current)
        if len(current) > max_terms:
            raise TermCapExceeded(
                f"nested commutator order {m} has {len(current)} terms "
                f"(cap {max_terms})", order_reached=m - 1)
        levels.append(current)
    return levels


def support_weight(op: PauliSum, site: int) -> float:
    """Sum of |coefficient|^2 over terms acting nontrivially on `site`."""
    if not 0 <= site < op.n_sites:
        raise PauliError(f"site {site} out of range for {op.n_sites} sites")
    bit = 1 << site
    return float(sum(abs(c) ** 2 for (x, z), c in op._terms.items()
                     if (x | z) & bit))


# -- textual round trip -------------------------------------------------------

def format_pauli_sum(op: PauliSum) -> str:
    """One term per line: ``<coeff_re> <coeff_im> <IXYZ string>``.

    Floats are printed with repr so that parsing reproduces them bit-exactly.
    Terms are ordered by label for stable output.
    """
    lines = []
    for string, coeff in sorted(op, key=lambda t: t[0].label()):
        lines.append(f"{coeff.real!r} {coeff.imag!r} {string.label()}")
    return "\n".join(lines)


def parse_pauli_sum(text: str,
                    prune_threshold: float = DEFAULT_PRUNE_THRESHOLD) -> PauliSum:
    """Inverse of :func:`format_pauli_sum`."""
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 3:
            raise PauliError(f"line {lineno}: expected 're im string', got {raw!r}")
        re_s, im_s, label = fields
        pairs.append((label, complex(float(re_s), float(im_s))))
    if not pairs:
        raise PauliError("no terms to parse")
    n = len(pairs[0][0])
    if any(len(lbl) != n for lbl, _ in pairs):
        raise PauliError("inconsistent string lengths")
    return PauliSum.from_label_coeffs(pairs, prune_threshold)
