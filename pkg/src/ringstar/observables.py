"""Entanglement entropy, OTOCs, and two-time correlators along trajectories.

Infinite-temperature expectation values are taken either as exact
normalized traces (eigenbasis route, small systems) or by Haar-state
typicality with a configurable number of samples.  The OTOC of Hermitian,
initially commuting Paulis V and W is

    C(t) = 1 - Re <W(t) V W(t) V>,      W(t) = exp(iHt) W exp(-iHt).

Below the dense cap the four-fold sandwich is evaluated in the eigenbasis
with all grid times batched into matrix products.  Above the cap the two
auxiliary vectors exp(-iHt)V|psi> and exp(-iHt)|psi> are stepped forward
incrementally with Krylov propagation; the inner Heisenberg dressing of W
still needs per-point reverse evolutions, so that route scales as the
square of the grid length and is reserved for sizes the dense route
cannot reach.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import svdvals

from .dynamics import (KrylovParams, KrylovPropagator, dense_eigensystem,
                       max_dense_dim, state_haar, state_plus_y)
from .errors import ResourceCapError
from .model import ModelSpec, _flipped, hamiltonian_operator

_EIG_CLIP = 1e-12


class ObservableError(ValueError):
    """Invalid observable request (bad partition, operator, or mode)."""


# -- small helpers ------------------------------------------------------------

def apply_site_pauli(psi: np.ndarray, site: int, axis: str, n_sites: int) -> np.ndarray:
    """sigma^axis_site applied to states (or columns of states)."""
    axis = axis.upper()
    if axis not in ("X", "Y", "Z"):
        raise ObservableError(f"operator must be a Pauli axis X/Y/Z, got {axis!r}")
    if not 0 <= site < n_sites:
        raise ObservableError(f"site {site} out of range for {n_sites} sites")
    if axis == "X":
        return _flipped(psi, site, n_sites).copy()
    idx = np.arange(psi.shape[0])
    signs = 1.0 - 2.0 * ((idx >> site) & 1)
    signs = signs if psi.ndim == 1 else signs[:, None]
    if axis == "Z":
        return signs * psi
    return 1j * _flipped(signs * psi, site, n_sites)


# -- time series --------------------------------------------------------------

@dataclass(frozen=True)
class TimeSeries:
    """Sampled real observable with its provenance metadata."""

    times: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape or times.ndim != 1:
            raise ObservableError("times and values must be equal-length 1-d arrays")
        if len(times) > 1 and not np.all(np.diff(times) > 0):
            raise ObservableError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.times)

    def window(self, t_min: float, t_max: float) -> "TimeSeries":
        mask = (self.times >= t_min) & (self.times <= t_max)
        return TimeSeries(self.times[mask], self.values[mask], dict(self.metadata))

    def to_csv(self) -> str:
        lines = [f"# {k}={self.metadata[k]}" for k in sorted(self.metadata)]
        lines += [f"{t:.17g},{v:.17g}" for t, v in zip(self.times, self.values)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "TimeSeries":
        meta: dict = {}
        ts, vs = [], []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value.strip()
                continue
            t_s, _, v_s = line.partition(",")
            ts.append(float(t_s))
            vs.append(float(v_s))
        return cls(np.array(ts), np.array(vs), meta)


def _spec_metadata(spec: ModelSpec) -> dict:
    return {
        "L": spec.L, "lambda": spec.lam, "J": spec.J, "h": spec.h,
        "g": spec.g, "h_c": spec.h_c, "g_c": spec.g_c,
        "axis": spec.coupling_axis, "boundary": spec.boundary,
    }


# -- bipartitions and entropy -----------------------------------------------

@dataclass(frozen=True)
class BipartitionSpec:
    """Subsystem A as ring sites plus an explicit c-qubit assignment."""

    a_sites: tuple[int, ...]
    cqubit_in_a: bool = False

    @classmethod
    def half_chain(cls, L: int) -> "BipartitionSpec":
        """Ring sites 0..ceil(L/2)-1 in A, the c-qubit in B."""
        return cls(tuple(range(math.ceil(L / 2))), cqubit_in_a=False)

    def absolute_sites(self, L: int) -> tuple[int, ...]:
        sites = set(self.a_sites)
        if any(not 0 <= s < L for s in sites):
            raise ObservableError(f"ring sites {sorted(sites)} invalid for L={L}")
        if self.cqubit_in_a:
            sites.add(L)
        if not sites or len(sites) >= L + 1:
            raise ObservableError("subsystem A must be nonempty and proper")
        return tuple(sorted(sites))


def entanglement_entropy(psi: np.ndarray, part: BipartitionSpec) -> float:
    """Von Neumann entropy (nats) across the bipartition, via Schmidt values.

    The state is reshaped into a (2^|A|, 2^|B|) matrix and decomposed with
    an SVD; the reduced density matrix is never formed.
    """
    n_sites = int(round(math.log2(psi.shape[0])))
    if 1 << n_sites != psi.shape[0]:
        raise ObservableError("state length is not a power of two")
    a_abs = part.absolute_sites(n_sites - 1)
    b_abs = tuple(s for s in range(n_sites) if s not in a_abs)
    tensor = psi.reshape([2] * n_sites)
    # numpy axis 0 is the most significant bit, i.e. site n_sites-1
    axes = [n_sites - 1 - s for s in a_abs] + [n_sites - 1 - s for s in b_abs]
    matrix = tensor.transpose(axes).reshape(1 << len(a_abs), 1 << len(b_abs))
    schmidt = svdvals(matrix)
    probs = np.clip(schmidt**2, 0.0, None)
    probs = probs[probs > _EIG_CLIP]
    return max(0.0, float(-np.sum(probs * np.log(probs))))


def page_entropy(dim_a: int, dim_b: int) -> float:
    """Haar-average subsystem entropy (exact finite-size sum, nats)."""
    m, n = (dim_a, dim_b) if dim_a <= dim_b else (dim_b, dim_a)
    return float(sum(1.0 / k for k in range(n + 1, m * n + 1)) - (m - 1) / (2.0 * n))


# -- trajectory sampling ------------------------------------------------------

def _grid_states(spec: ModelSpec, psi0: np.ndarray, t_grid: np.ndarray,
                 params: KrylovParams | None = None):
    """Yield (t, psi(t)) across the grid: dense below the cap, else Krylov."""
    if spec.dim <= max_dense_dim():
        evals, evecs = dense_eigensystem(spec)
        coeffs = evecs.T.conj() @ psi0
        for t in t_grid:
            yield t, evecs @ (np.exp(-1j * evals * t) * coeffs)
        return
    prop = KrylovPropagator(spec, params)
    psi = psi0
    t_prev = 0.0
    for t in t_grid:
        psi = prop.evolve(psi, t - t_prev)
        t_prev = t
        yield t, psi


def quench_entropy_trajectory(spec: ModelSpec, initial: str,
                              part: BipartitionSpec | None = None,
                              t_grid: np.ndarray | None = None,
                              seed: int | None = None,
                              params: KrylovParams | None = None) -> TimeSeries:
    """S_vN(t) across `t_grid` after a quench from |+y> or a Haar state."""
    if t_grid is None or len(t_grid) == 0:
        raise ObservableError("t_grid must be a nonempty ascending array")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid[0] < 0 or (len(t_grid) > 1 and not np.all(np.diff(t_grid) > 0)):
        raise ObservableError("t_grid must ascend from t >= 0")
    part = part or BipartitionSpec.half_chain(spec.L)
    if initial == "plus_y":
        psi0 = state_plus_y(spec.n_sites)
    elif initial == "haar":
        if seed is None:
            raise ObservableError("haar initial state needs a seed")
        psi0 = state_haar(spec.n_sites, seed)
    else:
        raise ObservableError(f"unknown initial state {initial!r}")
    values = np.empty(len(t_grid))
    for k, (_, psi) in enumerate(_grid_states(spec, psi0, t_grid, params)):
        values[k] = entanglement_entropy(psi, part)
    meta = _spec_metadata(spec)
    meta.update(observable="quench_entropy", initial=initial,
                a_sites=":".join(map(str, part.a_sites)),
                cqubit_in_a=part.cqubit_in_a)
    if seed is not None:
        meta["seed"] = seed
    return TimeSeries(t_grid, values, meta)


# -- two-time autocorrelation -------------------------------------------------

def _default_samples(n_sites: int) -> int:
    # typicality error ~2^{-n/2}: one shot is enough at 12+ qubits
    return 1 if n_sites >= 12 else 20


def two_time_autocorrelation(spec: ModelSpec, i: int, axis: str,
                             t_grid: np.ndarray, mode: str = "haar_typicality",
                             seed: int | None = None,
                             samples: int | None = None,
                             params: KrylovParams | None = None) -> TimeSeries:
    """<sigma^axis_i(t) sigma^axis_i> at infinite temperature.

    mode "exact_trace" computes the normalized trace in the eigenbasis
    (requires the dense route); "haar_typicality" averages pure-state
    expectations over `samples` Haar seeds, stepping two auxiliary vectors
    forward across the grid.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    n = spec.n_sites
    meta = _spec_metadata(spec)
    meta.update(observable=f"autocorr_{axis.lower()}{axis.lower()}",
                site=i, op_axis=axis.upper(), mode=mode)

    if mode == "exact_trace":
        if spec.dim > max_dense_dim():
            raise ResourceCapError(
                f"exact_trace needs dim <= {max_dense_dim()}, got {spec.dim}")
        evals, evecs = dense_eigensystem(spec)
        sig = apply_site_pauli(evecs, i, axis, n)
        sig_tilde = evecs.T.conj() @ sig
        weight = np.abs(sig_tilde) ** 2
        values = np.empty(len(t_grid))
        for k, t in enumerate(t_grid):
            v = np.exp(1j * evals * t)
            values[k] = np.real(np.vdot(v, weight @ v)) / spec.dim
        return TimeSeries(t_grid, values, meta)

    if mode != "haar_typicality":
        raise ObservableError(f"unknown mode {mode!r}")
    if seed is None:
        raise ObservableError("haar_typicality needs a seed")
    samples = samples if samples is not None else _default_samples(n)
    acc = np.zeros(len(t_grid))
    for s in range(samples):
        sample_seed = int(np.random.SeedSequence([seed, s]).generate_state(1)[0])
        psi = state_haar(n, sample_seed)
        x = apply_site_pauli(psi, i, axis, n)
        frames = zip(_grid_states(spec, psi, t_grid, params),
                     _grid_states(spec, x, t_grid, params))
        for k, ((_, y_t), (_, x_t)) in enumerate(frames):
            acc[k] += np.real(np.vdot(y_t, apply_site_pauli(x_t, i, axis, n)))
    meta.update(seed=seed, samples=samples)
    return TimeSeries(t_grid, acc / samples, meta)


# -- OTOC ----------------------------------------------------------------------

def _otoc_dense(spec: ModelSpec, psi0: np.ndarray, v_site: int, v_axis: str,
                w_site: int, w_axis: str, t_grid: np.ndarray) -> np.ndarray:
    """Batched eigenbasis evaluation of <W(t) V W(t) V> on one state."""
    evals, evecs = dense_eigensystem(spec)
    n = spec.n_sites
    udag = evecs.T.conj()
    phase_minus = np.exp(-1j * np.outer(evals, t_grid))

    def fwd(mat):  # exp(-iHt) columnwise, batched over the grid
        return evecs @ (phase_minus * (udag @ mat))

    def bwd(mat):
        return evecs @ (phase_minus.conj() * (udag @ mat))

    a = fwd(np.broadcast_to(
        apply_site_pauli(psi0, v_site, v_axis, n)[:, None],
        (spec.dim, len(t_grid))).copy())
    a = bwd(apply_site_pauli(a, w_site, w_axis, n))
    a = fwd(apply_site_pauli(a, v_site, v_axis, n))
    a = apply_site_pauli(a, w_site, w_axis, n)
    b = fwd(np.broadcast_to(psi0[:, None], (spec.dim, len(t_grid))).copy())
    return np.einsum("ik,ik->k", b.conj(), a)


def _otoc_krylov(spec: ModelSpec, psi0: np.ndarray, v_site: int, v_axis: str,
                 w_site: int, w_axis: str, t_grid: np.ndarray,
                 params: KrylovParams | None) -> np.ndarray:
    """Krylov sandwich: forward-stepped auxiliaries, per-point reverse dressing."""
    n = spec.n_sites
    prop = KrylovPropagator(spec, params)
    x = apply_site_pauli(psi0, v_site, v_axis, n)  # exp(-iHt) V psi
    y = psi0.copy()                                # exp(-iHt) psi
    out = np.empty(len(t_grid), dtype=complex)
    t_prev = 0.0
    for k, t in enumerate(t_grid):
        x = prop.evolve(x, t - t_prev)
        y = prop.evolve(y, t - t_prev)
        t_prev = t
        u = prop.evolve(apply_site_pauli(x, w_site, w_axis, n), -t)
        v = prop.evolve(apply_site_pauli(y, w_site, w_axis, n), -t)
        out[k] = np.vdot(v, apply_site_pauli(u, v_site, v_axis, n))
    return out


def otoc(spec: ModelSpec, psi0: np.ndarray | None, v_site: int, v_axis: str,
         w_site: int, w_axis: str, t_grid: np.ndarray,
         mode: str = "state", params: KrylovParams | None = None) -> TimeSeries:
    """C(t) = 1 - Re <W(j,t) V(i) W(j,t) V(i)> for single-site Paulis.

    mode "state" evaluates the sandwich on `psi0` (typically Haar, giving
    the infinite-temperature value up to typicality error); "exact_trace"
    computes the normalized trace exactly and needs the dense route.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    n = spec.n_sites
    for name, ax in (("v_axis", v_axis), ("w_axis", w_axis)):
        if ax.upper() not in ("X", "Y", "Z"):
            raise ObservableError(f"{name} must be a Pauli axis, got {ax!r}")
    meta = _spec_metadata(spec)
    meta.update(observable=f"otoc_{w_axis.lower()}{v_axis.lower()}",
                v_site=v_site, v_axis=v_axis.upper(),
                w_site=w_site, w_axis=w_axis.upper(), mode=mode)

    if mode == "exact_trace":
        if spec.dim > max_dense_dim():
            raise ResourceCapError(
                f"exact_trace needs dim <= {max_dense_dim()}, got {spec.dim}")
        evals, evecs = dense_eigensystem(spec)
        udag = evecs.T.conj()
        v_tilde = udag @ apply_site_pauli(evecs, v_site, v_axis, n)
        w_tilde = udag @ apply_site_pauli(evecs, w_site, w_axis, n)
        gaps = evals[:, None] - evals[None, :]
        values = np.empty(len(t_grid))
        for k, t in enumerate(t_grid):
            w_t = np.exp(1j * gaps * t) * w_tilde
            m = w_t @ v_tilde
            values[k] = 1.0 - np.real(np.einsum("ab,ba->", m, m)) / spec.dim
        return TimeSeries(t_grid, values, meta)

    if mode != "state":
        raise ObservableError(f"unknown mode {mode!r}")
    if psi0 is None:
        raise ObservableError("mode 'state' needs an explicit psi0")
    if psi0.shape[0] != spec.dim:
        raise ObservableError(f"state dimension {psi0.shape[0]} != {spec.dim}")
    if spec.dim <= max_dense_dim():
        f = _otoc_dense(spec, psi0, v_site, v_axis, w_site, w_axis, t_grid)
    else:
        f = _otoc_krylov(spec, psi0, v_site, v_axis, w_site, w_axis, t_grid, params)
    return TimeSeries(t_grid, 1.0 - np.real(f), meta)


# -- long-time average ---------------------------------------------------------

def long_time_average(series: TimeSeries, t0: float) -> float:
    """(1/t0) * integral_0^t0 |value| dt by the trapezoid rule."""
    times, values = series.times, np.abs(series.values)
    if times[0] != 0.0:
        raise ObservableError("series must start at t = 0")
    if not 0.0 < t0 <= times[-1]:
        raise ObservableError(f"t0 = {t0} outside the series range")
    mask = times <= t0
    ts, vs = times[mask], values[mask]
    if ts[-1] < t0:
        v_end = float(np.interp(t0, times, values))
        ts = np.append(ts, t0)
        vs = np.append(vs, v_end)
    return float(np.trapezoid(vs, ts) / t0)
