"""Explicit compression and decompression channels.

A scheme is a pair of channels ``C: M_D -> M_d ⊗ C^n`` and
``D: M_d ⊗ C^n -> M_D`` such that ``tr[rho E] = tr[D(C(rho)) E]`` for every
observable ``E``.  The classical register is the outer index of the output
space: register value ``j`` occupies rows ``j*d:(j+1)*d``.

Two constructions are provided.  The max-block scheme keeps every block of
the reduced algebra, embedded into the corner of a ``d = max D_j``
dimensional system.  The optimal scheme drops the blocks certified redundant
by the interpolation loop and rebuilds them on decompression through the
interpolation maps.  The module also computes the canonical form of a pair of
orthogonal projections.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .algebra import ReducedObservableSet
from .dimension import (EPS_INTERP, DimensionReport, InterpolationProblem, SdpOutcome,
                        choi_apply, verify_interpolation)
from .matcore import (DimensionError, ObservableSet, QuantumChannel, apply_channel,
                      as_hermitian, dag, dual_channel, is_cptp, random_density_matrix)

log = logging.getLogger(__name__)

EPS_STAT = 1e-8
EPS_PROJ = 1e-8
EPS_ANGLE = 1e-6
EPS_CPTP = 1e-9


class CertificateError(ValueError):
    """An interpolation certificate fails its residual check."""


@dataclass(frozen=True, eq=False)
class CompressionScheme:
    compress: QuantumChannel
    decompress: QuantumChannel
    achieved_dim: int
    classical_register: int
    kept_blocks: tuple[int, ...]

    def __post_init__(self):
        d, n = self.achieved_dim, self.classical_register
        if self.compress.dim_out != d * n or self.decompress.dim_in != d * n:
            raise DimensionError("channel dimensions do not match d * n")
        if self.compress.dim_in != self.decompress.dim_out:
            raise DimensionError("compression input and decompression output differ")

    @property
    def dim(self) -> int:
        return self.compress.dim_in

    def roundtrip(self, rho) -> np.ndarray:
        return apply_channel(self.decompress, apply_channel(self.compress, rho))


def _block_rows(reduced: ReducedObservableSet, j: int, c: int) -> np.ndarray:
    """Rows of ``U`` spanning copy ``c`` of block ``j``: ``(1 ⊗ <c|) V_j^† U``."""
    bs = reduced.structure
    dj, mj = bs.blocks[j]
    off = bs.offsets[j]
    return bs.unitary[[off + a * mj + c for a in range(dj)], :]


def _max_block_kraus(reduced: ReducedObservableSet, keep: list[int], d: int):
    """Compression and decompression Kraus operators over the blocks in ``keep``.

    The Heisenberg decompression is
    ``A -> sum_j |j><j| ⊗ R_j(pi_j(A))`` where ``pi_j`` averages the copies
    of block ``j`` and ``R_j(B) = B ⊕ tr(B)/D_j 1`` pads to dimension ``d``.
    """
    bs = reduced.structure
    big = bs.ambient_dim
    n = len(keep)
    comp, decomp = [], []
    for r, j in enumerate(keep):
        dj, mj = bs.blocks[j]
        for c in range(mj):
            rows = _block_rows(reduced, j, c)
            k = np.zeros((n * d, big), dtype=complex)
            k[r * d:r * d + dj, :] = rows
            comp.append(k)
            # Schrödinger decompression: (1/sqrt m) U^† V_j (1⊗|c>) W_j^† (<j| ⊗ 1)
            decomp.append(dag(k) / np.sqrt(mj))
        for b in range(dj, d):
            for a in range(dj):
                for c in range(mj):
                    k = np.zeros((big, n * d), dtype=complex)
                    k[:, r * d + b] = _block_rows(reduced, j, c)[a].conj() / np.sqrt(mj * dj)
                    decomp.append(k)
    return comp, decomp


def build_max_block_scheme(reduced: ReducedObservableSet) -> CompressionScheme:
    """Keep every block: ``d = max_j D_j`` and ``n = s``."""
    bs = reduced.structure
    keep = list(range(reduced.num_blocks))
    d = max(bs.block_dims)
    comp, decomp = _max_block_kraus(reduced, keep, d)
    n = len(keep)
    return CompressionScheme(QuantumChannel.from_kraus(comp, classical_register=n),
                             QuantumChannel.from_kraus(decomp), d, n, tuple(keep))


def _check_certificates(reduced: ReducedObservableSet, report: DimensionReport,
                        certificates: dict, tol: float) -> None:
    zeroed: set[int] = set()
    for j in sorted(report.redundant_blocks):
        cert = certificates.get(j)
        if cert is None or cert.choi is None:
            raise CertificateError(f"no interpolation certificate for redundant block {j}")
        check = verify_interpolation(InterpolationProblem(reduced, j, frozenset(zeroed)), cert)
        if check.residual > tol:
            raise CertificateError(
                f"certificate for block {j} has residual {check.residual:.3e} > {tol:.1e}")
        zeroed.add(j)


def build_optimal_scheme(reduced: ReducedObservableSet, report: DimensionReport,
                         certificates: dict[int, SdpOutcome] | None = None,
                         tol: float = EPS_INTERP) -> CompressionScheme:
    """Scheme attaining ``report.compression_dimension``.

    Only the non-redundant blocks are transmitted.  On decompression each
    redundant block ``i`` is rebuilt as ``Y_i = Φ_i(⊕_{l > i} Y_l)``, working
    from the last redundant block backwards, so every ``Φ_i`` sees the blocks
    it was certified on.
    """
    certificates = report.certificates if certificates is None else certificates
    bs = reduced.structure
    if tuple(bs.blocks) != tuple(report.blocks):
        raise DimensionError("report and reduced set have different block structures")
    redundant = sorted(report.redundant_blocks)
    if not redundant:
        return build_max_block_scheme(reduced)
    _check_certificates(reduced, report, certificates, tol)
    s = reduced.num_blocks
    keep = [j for j in range(s) if j not in redundant]
    d = max(bs.blocks[j][0] for j in keep)
    if d != report.compression_dimension:
        raise DimensionError(
            f"kept blocks give d = {d}, report says {report.compression_dimension}")
    n = len(keep)

    # Heisenberg picture of the compression, M_d ⊗ C^n -> M_D
    def c_star(x: np.ndarray) -> np.ndarray:
        ys: dict[int, np.ndarray] = {}
        for r, j in enumerate(keep):
            dj = bs.blocks[j][0]
            ys[j] = x[r * d:r * d + dj, r * d:r * d + dj]
        for i in reversed(redundant):
            src = [ys[l] for l in range(i + 1, s)]
            ys[i] = choi_apply(certificates[i].choi, _direct_sum(src))
        parts = [np.kron(ys[i], np.eye(m)) for i, (_, m) in enumerate(bs.blocks)]
        u = bs.unitary
        return dag(u) @ _direct_sum(parts) @ u

    heis = QuantumChannel.from_map(c_star, n * d, bs.ambient_dim)
    if heis.kraus is None:
        raise CertificateError("reconstruction map is not completely positive")
    compress = QuantumChannel(bs.ambient_dim, n * d, dual_channel(heis).kraus,
                              classical_register=n)
    _, decomp = _max_block_kraus(reduced, keep, d)
    return CompressionScheme(compress, QuantumChannel.from_kraus(decomp), d, n, tuple(keep))


def _direct_sum(parts) -> np.ndarray:
    size = sum(p.shape[0] for p in parts)
    out = np.zeros((size, size), dtype=complex)
    pos = 0
    for p in parts:
        k = p.shape[0]
        out[pos:pos + k, pos:pos + k] = p
        pos += k
    return out


def basis_states(dim: int) -> list[np.ndarray]:
    """``dim**2`` density matrices spanning all of ``M_dim``.

    Uses ``|a><a|`` together with ``|a±b>`` and ``|a+ib>`` projectors, which is
    enough to fix a linear map by its action on them.
    """
    eye = np.eye(dim)
    out = [np.outer(eye[a], eye[a]).astype(complex) for a in range(dim)]
    for a in range(dim):
        for b in range(a + 1, dim):
            for phase in (1, 1j):
                v = (eye[a] + phase * eye[b]) / np.sqrt(2)
                out.append(np.outer(v, v.conj()))
    return out


@dataclass(frozen=True)
class SchemeCheck:
    max_residual: float
    random_residual: float
    basis_residual: float
    compress_cptp: bool
    decompress_cptp: bool
    duals_unital: bool
    trials: int
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return (self.max_residual <= EPS_STAT and self.compress_cptp
                and self.decompress_cptp and self.duals_unital)


def verify_scheme(scheme: CompressionScheme, obs: ObservableSet, trials: int = 100,
                  seed: int = 0, tol: float = EPS_CPTP) -> SchemeCheck:
    """Statistics preservation on random and basis states, plus channel checks."""
    if obs.dim != scheme.dim:
        raise DimensionError(f"scheme acts on dimension {scheme.dim}, observables on {obs.dim}")
    rng = np.random.default_rng(seed)
    ops = obs.operators

    def worst(states) -> float:
        res = 0.0
        for rho in states:
            out = scheme.roundtrip(rho)
            for e in ops:
                res = max(res, abs(np.trace(rho @ e) - np.trace(out @ e)))
        return float(res)

    rand = worst(random_density_matrix(obs.dim, rng) for _ in range(trials))
    basis = worst(basis_states(obs.dim))
    c_diag = is_cptp(scheme.compress, tol)
    d_diag = is_cptp(scheme.decompress, tol)
    unital = True
    for ch in (scheme.compress, scheme.decompress):
        du = dual_channel(ch)
        unital &= bool(np.abs(apply_channel(du, np.eye(du.dim_in)) - np.eye(du.dim_out)).max()
                       <= tol)
    details = {"compress_tp_residual": c_diag.tp_residual,
               "decompress_tp_residual": d_diag.tp_residual,
               "compress_choi_min_eig": c_diag.choi_min_eig,
               "decompress_choi_min_eig": d_diag.choi_min_eig}
    return SchemeCheck(max(rand, basis), rand, basis, c_diag.cptp, d_diag.cptp,
                       unital, trials, details)


# -- two projections ---------------------------------------------------------

class NotProjectionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TwoProjectionForm:
    """``V^† P V`` and ``V^† Q V`` in canonical form.

    Columns of ``unitary`` are ordered as the corners ``M∩N``, ``M∩N^⊥``,
    ``M^⊥∩N``, ``M^⊥∩N^⊥`` (``M = ran P``, ``N = ran Q``) followed by the
    pairs ``(e_j, f_j)`` of the generic part, on which
    ``P = [[1, 0], [0, 0]]`` and
    ``Q = [[1-μ, sqrt(μ(1-μ))], [sqrt(μ(1-μ)), μ]]``.
    """

    unitary: np.ndarray
    corner_dims: tuple[int, int, int, int]
    generic_pairs: int
    angles: tuple[float, ...]
    ambiguous: tuple[float, ...] = ()

    @property
    def dim(self) -> int:
        return self.unitary.shape[0]

    def templates(self) -> tuple[np.ndarray, np.ndarray]:
        p_diag = [1.0] * (self.corner_dims[0] + self.corner_dims[1]) + \
                 [0.0] * (self.corner_dims[2] + self.corner_dims[3])
        q_diag = [1.0] * self.corner_dims[0] + [0.0] * self.corner_dims[1] + \
                 [1.0] * self.corner_dims[2] + [0.0] * self.corner_dims[3]
        ps, qs = [np.diag(p_diag)], [np.diag(q_diag)]
        for mu in self.angles:
            ps.append(np.diag([1.0, 0.0]))
            off = np.sqrt(mu * (1 - mu))
            qs.append(np.array([[1 - mu, off], [off, mu]]))
        return _direct_sum(ps).real, _direct_sum(qs).real

    def residuals(self, p, q) -> tuple[float, float]:
        tp, tq = self.templates()
        v = self.unitary
        return (float(np.abs(dag(v) @ p @ v - tp).max()),
                float(np.abs(dag(v) @ q @ v - tq).max()))


def _check_projection(p, name: str, tol: float) -> np.ndarray:
    p = as_hermitian(p, tol)
    if np.abs(p @ p - p).max() > tol:
        raise NotProjectionError(f"{name} is not idempotent")
    return p


def _split(h: np.ndarray, basis: np.ndarray, eps: float):
    """Eigen-split ``basis^† h basis`` into eigenvalue ~1, ~0 and the rest."""
    if basis.shape[1] == 0:
        empty = basis[:, :0]
        return empty, empty, empty, np.zeros(0), []
    w, v = np.linalg.eigh(dag(basis) @ h @ basis)
    vecs = basis @ v
    one = w > 1 - eps
    zero = w < eps
    mid = ~(one | zero)
    flagged = [float(x) for x in w[one | zero] if min(abs(x), abs(1 - x)) > 1e-12]
    return vecs[:, one], vecs[:, zero], vecs[:, mid], w[mid], flagged


def two_projection_form(p, q, eps_angle: float = EPS_ANGLE,
                        tol: float = EPS_PROJ) -> TwoProjectionForm:
    """Canonical simultaneous form of two orthogonal projections."""
    p = _check_projection(p, "P", tol)
    q = _check_projection(q, "Q", tol)
    dim = p.shape[0]
    if q.shape != p.shape:
        raise DimensionError("P and Q have different dimensions")
    w, v = np.linalg.eigh(p)
    ran_p, ker_p = v[:, w > 0.5], v[:, w <= 0.5]
    mn, mnp, e_vecs, e_vals, flag1 = _split(q, ran_p, eps_angle)
    mpn, mpnp, _, _, flag2 = _split(q, ker_p, eps_angle)
    # μ ascending means 1-μ (the eigenvalue of PQP) descending
    order = np.argsort(-e_vals, kind="stable")
    e_vecs, e_vals = e_vecs[:, order], e_vals[order]
    cols_e, cols_f = [], []
    comp = np.eye(dim) - p
    for k in range(e_vecs.shape[1]):
        e = e_vecs[:, k]
        f = comp @ q @ e
        cols_e.append(e)
        cols_f.append(f / np.linalg.norm(f))
    pairs = [c for ef in zip(cols_e, cols_f) for c in ef]
    cols = [mn, mnp, mpn, mpnp]
    if pairs:
        cols.append(np.stack(pairs, axis=1))
    u = np.concatenate(cols, axis=1)
    if u.shape[1] != dim:
        raise NotProjectionError(
            f"canonical basis has {u.shape[1]} vectors for dimension {dim}")
    # snap to the nearest unitary to clean up rounding in the f_j
    a, _, bh = np.linalg.svd(u)
    u = a @ bh
    mus = tuple(float(np.clip(1 - x, 0.0, 1.0)) for x in e_vals)
    corners = (mn.shape[1], mnp.shape[1], mpn.shape[1], mpnp.shape[1])
    flagged = tuple(flag1 + flag2)
    if flagged:
        log.warning("angles within %.1e of a corner assigned to it: %s", eps_angle, flagged)
    return TwoProjectionForm(u, corners, len(mus), mus, flagged)


def identity_scheme(dim: int) -> CompressionScheme:
    eye = QuantumChannel.from_kraus([np.eye(dim)])
    return CompressionScheme(eye, eye, dim, 1, (0,))


__all__ = [
    "CertificateError", "CompressionScheme", "NotProjectionError", "SchemeCheck",
    "TwoProjectionForm", "basis_states", "build_max_block_scheme", "build_optimal_scheme",
    "identity_scheme", "two_projection_form", "verify_scheme", "EPS_STAT",
]
