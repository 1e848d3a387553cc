"""Dense complex linear algebra for observables and quantum channels.

Conventions used throughout the package:

* Kraus operators are stored in the Schrödinger form ``K`` (shape
  ``dim_out x dim_in``) and act as ``rho -> sum K rho K^dagger``.  The
  conjugation map ``A -> X^dagger A X`` is therefore the channel with the single
  Kraus operator ``X^dagger``.
* Vectorization is column stacking, ``vec(A) = A.reshape(-1, order="F")``, so
  that ``vec(K A K^dagger) = (conj(K) kron K) vec(A)``.
* The Choi matrix of ``T: M_in -> M_out`` is
  ``(T ⊗ id)(|Ω><Ω|) = 1/d_in * sum_ab T(|a><b|) ⊗ |a><b|`` with the output
  factor first.  It has unit trace for trace preserving maps.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

EPS_HERM = 1e-9
EPS_TP = 1e-9
EPS_PSD = 1e-9
EPS_NUM = 1e-8
EPS_CLUSTER = 1e-7


class DimensionError(ValueError):
    """Operand shapes do not fit together."""


class NotHermitianError(ValueError):
    pass


def as_matrix(a, *, square: bool = True) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-d array, got shape {m.shape}")
    if square and m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def as_hermitian(a, tol: float = EPS_HERM) -> np.ndarray:
    """Validate ``a`` as Hermitian and return its exactly symmetrized copy."""
    m = as_matrix(a)
    dev = np.abs(m - m.conj().T).max() if m.size else 0.0
    if dev > tol * max(1.0, np.abs(m).max()):
        raise NotHermitianError(f"matrix is not Hermitian (max |H - H^†| = {dev:.3e})")
    return (m + m.conj().T) / 2


def dag(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def vec(a: np.ndarray) -> np.ndarray:
    return np.asarray(a).reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int, cols: int | None = None) -> np.ndarray:
    return np.asarray(v).reshape(rows, rows if cols is None else cols, order="F")


def matrix_unit(dim: int, a: int, b: int) -> np.ndarray:
    e = np.zeros((dim, dim), dtype=complex)
    e[a, b] = 1.0
    return e


def max_entangled(dim: int) -> np.ndarray:
    """Normalized ``|Ω> = d^{-1/2} sum_i |i>|i>``."""
    return np.eye(dim, dtype=complex).reshape(-1) / np.sqrt(dim)


def partial_trace(m, dims: tuple[int, int], which: int) -> np.ndarray:
    """Trace out subsystem ``which`` (0 or 1) of a matrix on ``C^d0 ⊗ C^d1``."""
    m = as_matrix(m)
    d0, d1 = dims
    if m.shape[0] != d0 * d1:
        raise DimensionError(f"matrix side {m.shape[0]} != {d0}*{d1}")
    t = m.reshape(d0, d1, d0, d1)
    if which == 0:
        return np.einsum("iaib->ab", t)
    if which == 1:
        return np.einsum("aibi->ab", t)
    raise ValueError("which must be 0 or 1")


def psd_sqrt_inv(m: np.ndarray, floor: float = 1e-14) -> np.ndarray:
    w, v = np.linalg.eigh((m + dag(m)) / 2)
    w = np.clip(w, floor, None)
    return (v / np.sqrt(w)) @ dag(v)


def orth(vectors: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis (columns) for the column span of ``vectors``."""
    if vectors.size == 0:
        return np.zeros((vectors.shape[0], 0), dtype=complex)
    u, s, _ = np.linalg.svd(vectors, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((vectors.shape[0], 0), dtype=complex)
    return u[:, s > tol * max(1.0, s[0])]


def null_space(m: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis of the kernel; singular values below ``tol*max(1,s0)`` count as zero."""
    _, s, vh = np.linalg.svd(m)
    scale = max(1.0, s[0]) if s.size else 1.0
    rank = int(np.sum(s > tol * scale))
    return dag(vh[rank:])


def random_density_matrix(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Hilbert-Schmidt sampled state ``G G^† / tr(G G^†)``."""
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = g @ dag(g)
    return rho / np.trace(rho).real


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (g + dag(g)) / 2


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@dataclass(frozen=True, eq=False)
class ObservableSet:
    """A finite list of Hermitian operators on ``C^D``.

    ``canonical()`` returns the operator system basis: the identity first,
    followed by a real-linearly independent subset spanning the rest.
    """

    dim: int
    operators: tuple[np.ndarray, ...]
    includes_identity: bool = False

    @classmethod
    def from_matrices(cls, mats: Sequence, tol: float = EPS_HERM) -> "ObservableSet":
        ops = tuple(as_hermitian(m, tol) for m in mats)
        if not ops:
            raise ValueError("observable set is empty")
        dim = ops[0].shape[0]
        if any(o.shape != (dim, dim) for o in ops):
            raise DimensionError("operators do not share a common dimension")
        return cls(dim, ops, False)

    def canonical(self, tol: float = 1e-9) -> "ObservableSet":
        if self.includes_identity:
            return self
        basis = independent_hermitian_basis([np.eye(self.dim), *self.operators], tol)
        # keep the original operators (not the orthonormalized ones) so the
        # reduced blocks stay interpretable; the identity comes first
        return ObservableSet(self.dim, tuple(basis), True)

    def __len__(self) -> int:
        return len(self.operators)


def _hvec(h: np.ndarray) -> np.ndarray:
    return np.concatenate([h.real.ravel(), h.imag.ravel()])


def independent_hermitian_basis(mats: Sequence[np.ndarray], tol: float = 1e-9) -> list[np.ndarray]:
    """Greedy real-linearly independent subset of ``mats``, order preserved."""
    kept: list[np.ndarray] = []
    q = np.zeros((0, 2 * mats[0].size))
    for m in mats:
        v = _hvec(np.asarray(m, dtype=complex))
        nrm = np.linalg.norm(v)
        if nrm == 0:
            continue
        r = v - q.T @ (q @ v) if len(q) else v.copy()
        r = r - q.T @ (q @ r) if len(q) else r
        if np.linalg.norm(r) > tol * nrm:
            q = np.vstack([q, r / np.linalg.norm(r)])
            kept.append(np.asarray(m, dtype=complex))
    return kept


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """A linear map ``M_{dim_in} -> M_{dim_out}``, stored by Kraus operators when CP.

    ``dim_out = quantum_dim * classical_register``; the classical register is
    the outer (block) index, so register value ``j`` occupies rows
    ``j*quantum_dim : (j+1)*quantum_dim``.  Maps that are not completely
    positive (e.g. the transpose) are held through their Choi matrix only.
    """

    dim_in: int
    dim_out: int
    kraus: tuple[np.ndarray, ...] | None = None
    choi: np.ndarray | None = field(default=None, repr=False)
    quantum_dim: int | None = None
    classical_register: int = 1

    def __post_init__(self):
        if self.kraus is None and self.choi is None:
            raise ValueError("channel needs Kraus operators or a Choi matrix")
        if self.kraus is not None:
            ks = tuple(as_matrix(k, square=False) for k in self.kraus)
            for k in ks:
                if k.shape != (self.dim_out, self.dim_in):
                    raise DimensionError(
                        f"Kraus operator shape {k.shape} != ({self.dim_out}, {self.dim_in})")
            object.__setattr__(self, "kraus", ks)
        if self.quantum_dim is None:
            object.__setattr__(self, "quantum_dim", self.dim_out // self.classical_register)
        if self.quantum_dim * self.classical_register != self.dim_out:
            raise DimensionError("quantum_dim * classical_register != dim_out")

    @classmethod
    def from_kraus(cls, kraus: Sequence, classical_register: int = 1) -> "QuantumChannel":
        ks = [as_matrix(k, square=False) for k in kraus]
        return cls(ks[0].shape[1], ks[0].shape[0], tuple(ks),
                   classical_register=classical_register)

    @classmethod
    def from_choi(cls, choi, dim_in: int, dim_out: int, tol: float = EPS_PSD,
                  classical_register: int = 1) -> "QuantumChannel":
        """Build from a Choi matrix; Kraus operators are extracted when it is PSD."""
        c = as_matrix(choi)
        if c.shape[0] != dim_in * dim_out:
            raise DimensionError("Choi side must be dim_in*dim_out")
        c = (c + dag(c)) / 2
        w, v = np.linalg.eigh(c)
        if w.min() < -tol * max(1.0, abs(w).max()):
            return cls(dim_in, dim_out, None, c, classical_register=classical_register)
        ks = []
        for lam, vecs in zip(w, v.T):
            if lam <= tol * 1e-3:
                continue
            # |v> = sum_{o,a} K_{oa}/sqrt(lam*d_in) |o>|a>
            ks.append(np.sqrt(lam * dim_in) * vecs.reshape(dim_out, dim_in))
        if not ks:
            ks = [np.zeros((dim_out, dim_in), dtype=complex)]
        return cls(dim_in, dim_out, tuple(ks), c, classical_register=classical_register)

    @classmethod
    def from_map(cls, fn: Callable[[np.ndarray], np.ndarray], dim_in: int, dim_out: int,
                 tol: float = EPS_PSD, classical_register: int = 1) -> "QuantumChannel":
        """Tabulate a linear map on matrix units and build it from its Choi matrix."""
        choi = np.zeros((dim_out * dim_in, dim_out * dim_in), dtype=complex)
        for a in range(dim_in):
            for b in range(dim_in):
                choi += np.kron(fn(matrix_unit(dim_in, a, b)), matrix_unit(dim_in, a, b))
        return cls.from_choi(choi / dim_in, dim_in, dim_out, tol,
                             classical_register=classical_register)

    @property
    def is_kraus(self) -> bool:
        return self.kraus is not None

    def __call__(self, rho) -> np.ndarray:
        return apply_channel(self, rho)


def identity_channel(dim: int) -> QuantumChannel:
    return QuantumChannel.from_kraus([np.eye(dim)])


def depolarizing_channel(dim: int) -> QuantumChannel:
    """Completely depolarizing channel ``rho -> tr(rho) 1/d``."""
    ks = [matrix_unit(dim, a, b) / np.sqrt(dim) for a in range(dim) for b in range(dim)]
    return QuantumChannel.from_kraus(ks)


def conjugation_channel(x) -> QuantumChannel:
    """The map ``A -> X^† A X``."""
    x = as_matrix(x, square=False)
    return QuantumChannel.from_kraus([dag(x)])


def unitary_channel(u) -> QuantumChannel:
    """``A -> U A U^†``."""
    return QuantumChannel.from_kraus([as_matrix(u)])


def transpose_map(dim: int) -> QuantumChannel:
    swap = np.zeros((dim * dim, dim * dim), dtype=complex)
    for a in range(dim):
        for b in range(dim):
            swap[a * dim + b, b * dim + a] = 1.0
    return QuantumChannel(dim, dim, None, swap / dim)


def apply_channel(ch: QuantumChannel, rho) -> np.ndarray:
    rho = as_matrix(rho)
    if rho.shape[0] != ch.dim_in:
        raise DimensionError(f"input dimension {rho.shape[0]} != channel dim_in {ch.dim_in}")
    if ch.kraus is not None:
        out = np.zeros((ch.dim_out, ch.dim_out), dtype=complex)
        for k in ch.kraus:
            out += k @ rho @ dag(k)
        return out
    return _apply_choi(ch.choi, rho, ch.dim_in, ch.dim_out)


def _apply_choi(choi: np.ndarray, rho: np.ndarray, dim_in: int, dim_out: int) -> np.ndarray:
    t = choi.reshape(dim_out, dim_in, dim_out, dim_in)
    return dim_in * np.einsum("oapb,ab->op", t, rho)


def choi_matrix(ch: QuantumChannel) -> np.ndarray:
    if ch.choi is not None:
        return ch.choi
    d = ch.dim_in
    omega = max_entangled(d).reshape(-1, 1)
    out = np.zeros((ch.dim_out * d, ch.dim_out * d), dtype=complex)
    for k in ch.kraus:
        v = np.kron(k, np.eye(d)) @ omega
        out += v @ dag(v)
    return out


def transfer_matrix(ch: QuantumChannel) -> np.ndarray:
    """Matrix of the channel on column-stacked operators."""
    if ch.kraus is not None:
        return sum(np.kron(k.conj(), k) for k in ch.kraus)
    cols = [vec(apply_channel(ch, matrix_unit(ch.dim_in, a, b)))
            for b in range(ch.dim_in) for a in range(ch.dim_in)]
    return np.stack(cols, axis=1)


def channel_from_transfer(tm: np.ndarray, dim_in: int, dim_out: int,
                          tol: float = EPS_PSD) -> QuantumChannel:
    tm = np.asarray(tm, dtype=complex)
    if tm.shape != (dim_out * dim_out, dim_in * dim_in):
        raise DimensionError("transfer matrix shape does not match the dimensions")
    return QuantumChannel.from_map(lambda a: unvec(tm @ vec(a), dim_out), dim_in, dim_out, tol)


def dual_channel(ch: QuantumChannel) -> QuantumChannel:
    """Hilbert-Schmidt adjoint: ``tr[rho T*(E)] = tr[T(rho) E]``."""
    if ch.kraus is not None:
        return QuantumChannel(ch.dim_out, ch.dim_in, tuple(dag(k) for k in ch.kraus))
    tm = transfer_matrix(ch)
    return channel_from_transfer(dag(tm), ch.dim_out, ch.dim_in)


@dataclass(frozen=True)
class CptpDiagnostics:
    cptp: bool
    choi_min_eig: float
    tp_residual: float

    def __bool__(self) -> bool:
        return self.cptp


def is_cptp(ch: QuantumChannel, tol: float = EPS_TP) -> CptpDiagnostics:
    choi = choi_matrix(ch)
    min_eig = float(np.linalg.eigvalsh((choi + dag(choi)) / 2).min())
    if ch.kraus is not None:
        s = sum(dag(k) @ k for k in ch.kraus)
    else:
        # sum K^†K corresponds to d_in * tr_out(choi)^T
        s = ch.dim_in * partial_trace(choi, (ch.dim_out, ch.dim_in), 0).T
    tp_res = float(np.abs(s - np.eye(ch.dim_in)).max())
    return CptpDiagnostics(min_eig >= -tol and tp_res <= tol, min_eig, tp_res)


def is_unital(ch: QuantumChannel, tol: float = EPS_TP) -> bool:
    if ch.dim_in != ch.dim_out:
        return False
    return bool(np.abs(apply_channel(ch, np.eye(ch.dim_in)) - np.eye(ch.dim_out)).max() <= tol)


class SpectralRadiusError(ValueError):
    pass


def cesaro_mean(tm, tol: float = EPS_CLUSTER) -> np.ndarray:
    """Projection onto the fixed points of a unital positive map's transfer matrix.

    For such maps the peripheral Jordan blocks are one dimensional, so the
    Cesàro mean ``lim 1/N sum_n T^n`` equals ``R (L^† R)^{-1} L^†`` with ``R``
    and ``L`` bases of the right and left eigenvalue-1 eigenspaces.
    """
    t = as_matrix(tm)
    n = t.shape[0]
    rho = np.abs(sla.eigvals(t)).max() if n else 0.0
    if rho > 1 + 1e3 * tol:
        raise SpectralRadiusError(f"spectral radius {rho:.6g} exceeds 1")
    shifted = t - np.eye(n)
    right = null_space(shifted, tol)
    left = null_space(dag(shifted), tol)
    if right.shape[1] != left.shape[1]:
        raise SpectralRadiusError(
            f"left/right fixed-point dimensions differ ({left.shape[1]} vs {right.shape[1]}); "
            "eigenvalue 1 is not semisimple")
    if right.shape[1] == 0:
        return np.zeros_like(t)
    return right @ np.linalg.solve(dag(left) @ right, dag(left))
