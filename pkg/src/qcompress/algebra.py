"""Block structure of the C*-algebra generated by a set of Hermitian operators.

The algebra generated by ``O`` and the identity is unitarily equivalent to
``⊕_i M_{D_i} ⊗ 1_{m_i}``.  We find it the standard way: close ``O`` under
the Hermitian products ``(AB+BA)/2`` and ``i(AB-BA)/2`` to get a basis of the
algebra's Hermitian part, diagonalize a random element of it, group its
eigenspaces into isotypic components through the algebra's matrix elements,
and align the repeated copies inside each component by a polar (Procrustes)
step.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from .matcore import EPS_NUM, DimensionError, ObservableSet, as_hermitian, dag

log = logging.getLogger(__name__)

EPS_BLOCK = 1e-8
EPS_RANK = 1e-9
EPS_CLUSTER_REL = 1e-7
EPS_INV = 1e-10
MAX_RETRIES = 8


class BlockDiagonalizationError(RuntimeError):
    pass


class MultiplicityMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BlockStructure:
    """``U A U^† = ⊕_i A^i ⊗ 1_{m_i}`` for every ``A`` in the algebra.

    ``blocks`` lists ``(D_i, m_i)`` sorted by decreasing ``D_i``.  Within block
    ``i`` the row index is ``a * m_i + c`` for matrix index ``a`` and copy ``c``.
    """

    ambient_dim: int
    unitary: np.ndarray
    blocks: tuple[tuple[int, int], ...]
    algebra_dim: int = 0
    attempts: int = 1

    @property
    def offsets(self) -> list[int]:
        out, pos = [], 0
        for d, m in self.blocks:
            out.append(pos)
            pos += d * m
        return out

    @property
    def block_dims(self) -> list[int]:
        return [d for d, _ in self.blocks]

    @property
    def is_full(self) -> bool:
        return self.blocks == ((self.ambient_dim, 1),)

    def block_mask(self) -> np.ndarray:
        """Boolean pattern of the allowed (block diagonal, copy diagonal) entries."""
        mask = np.zeros((self.ambient_dim, self.ambient_dim), dtype=bool)
        for (d, m), off in zip(self.blocks, self.offsets):
            mask[off:off + d * m, off:off + d * m] = np.kron(np.ones((d, d)), np.eye(m)) > 0
        return mask


@dataclass(frozen=True, eq=False)
class ReducedObservableSet:
    """Per-block parts ``E^i`` of each operator after removing multiplicities."""

    structure: BlockStructure
    reduced_operators: tuple[tuple[np.ndarray, ...], ...]

    @property
    def reduced_dim(self) -> int:
        return sum(self.structure.block_dims)

    @property
    def num_blocks(self) -> int:
        return len(self.structure.blocks)

    @property
    def num_operators(self) -> int:
        return len(self.reduced_operators)

    def block(self, op: int, i: int) -> np.ndarray:
        return self.reduced_operators[op][i]

    def direct_sum(self, op: int, keep=None) -> np.ndarray:
        """``⊕_{i in keep} E^i`` for operator ``op`` (all blocks by default)."""
        keep = range(self.num_blocks) if keep is None else keep
        parts = [self.reduced_operators[op][i] for i in keep]
        return _block_diag(parts)

    def reassemble(self, op: int) -> np.ndarray:
        """Inverse of the reduction: ``U^† (⊕ E^i ⊗ 1_{m_i}) U``."""
        bs = self.structure
        parts = [np.kron(self.reduced_operators[op][i], np.eye(m))
                 for i, (_, m) in enumerate(bs.blocks)]
        u = bs.unitary
        return dag(u) @ _block_diag(parts) @ u


def _block_diag(parts) -> np.ndarray:
    n = sum(p.shape[0] for p in parts)
    out = np.zeros((n, n), dtype=complex)
    pos = 0
    for p in parts:
        k = p.shape[0]
        out[pos:pos + k, pos:pos + k] = p
        pos += k
    return out


def _hvec(h: np.ndarray) -> np.ndarray:
    return np.concatenate([h.real.ravel(), h.imag.ravel()])


def algebra_hermitian_basis(ops, tol: float = EPS_RANK) -> list[np.ndarray]:
    """Orthonormal (Hilbert-Schmidt) basis of the Hermitian part of C*(ops, 1).

    Breadth-first closure under ``(AB+BA)/2`` and ``i(AB-BA)/2`` until the real
    span stops growing.
    """
    dim = ops[0].shape[0]
    basis: list[np.ndarray] = []
    q = np.zeros((0, 2 * dim * dim))

    def add(m: np.ndarray) -> bool:
        nonlocal q
        v = _hvec(m)
        n0 = np.linalg.norm(v)
        if n0 == 0:
            return False
        for _ in range(2):
            if len(q):
                v = v - q.T @ (q @ v)
        nv = np.linalg.norm(v)
        if nv <= tol * max(n0, 1.0):
            return False
        v = v / nv
        q = np.vstack([q, v])
        half = dim * dim
        basis.append((v[:half] + 1j * v[half:]).reshape(dim, dim))
        return True

    add(np.eye(dim, dtype=complex))
    for o in ops:
        add(np.asarray(o, dtype=complex))
    frontier = list(basis)
    while frontier:
        new = []
        for a in frontier:
            for b in list(basis):
                ab = a @ b
                for cand in ((ab + dag(ab)) / 2, 1j * (ab - dag(ab)) / 2):
                    if add(cand):
                        new.append(basis[-1])
                if len(basis) == dim * dim:
                    return basis
        frontier = new
    return basis


def _cluster(w: np.ndarray, radius: float) -> list[np.ndarray]:
    groups, start = [], 0
    for i in range(1, len(w) + 1):
        if i == len(w) or w[i] - w[i - 1] > radius:
            groups.append(np.arange(start, i))
            start = i
    return groups


def _polar_unitary(x: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(x)
    return u @ vh


def _attempt(alg: list[np.ndarray], rng: np.random.Generator, tol_block: float):
    dim = alg[0].shape[0]
    k = len(alg)
    r = rng.integers(1, 16 * k * dim + 1, size=k).astype(float)
    r /= np.linalg.norm(r)
    e = sum(c * a for c, a in zip(r, alg))
    w, v = np.linalg.eigh(e)
    scale = max(np.abs(w).max(), 1e-300)
    groups = _cluster(w, EPS_CLUSTER_REL * scale)
    vs = [v[:, g] for g in groups]
    ng = len(groups)

    # isotypic components: eigenspaces linked by some algebra element
    parent = list(range(ng))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    link = np.zeros((ng, ng))
    for a in alg:
        for g in range(ng):
            av = a @ vs[g]
            for h in range(g + 1, ng):
                link[g, h] = max(link[g, h], np.linalg.norm(dag(vs[h]) @ av, 2))
    thresh = 1e-6
    for g in range(ng):
        for h in range(g + 1, ng):
            if link[g, h] > thresh:
                parent[find(h)] = find(g)
    comps: dict[int, list[int]] = {}
    for g in range(ng):
        comps.setdefault(find(g), []).append(g)

    blocks = []
    for members in comps.values():
        mults = {len(groups[g]) for g in members}
        if len(mults) != 1:
            return None, _gap_report(w, groups, "unequal eigenspace dimensions in one component")
        m = mults.pop()
        ref = members[0]
        cols = []
        aligned = {ref: vs[ref]}
        for g in members[1:]:
            best = max(alg, key=lambda a: np.linalg.norm(dag(vs[g]) @ a @ vs[ref], 2))
            x = dag(vs[g]) @ best @ vs[ref]
            aligned[g] = vs[g] @ _polar_unitary(x)
        for g in members:
            cols.append(aligned[g])
        # rows ordered (matrix index a, copy c)
        basis = np.concatenate([c[:, :, None] for c in cols], axis=2)  # dim x m x D_i
        basis = basis.transpose(0, 2, 1).reshape(dim, len(members) * m)
        blocks.append((len(members), m, min(members), basis))

    alg_dim = sum(d * d for d, _, _, _ in blocks)
    if alg_dim != len(alg):
        return None, _gap_report(
            w, groups, f"algebra dimension {len(alg)} != sum D_i^2 = {alg_dim}")
    blocks.sort(key=lambda b: (-b[0], b[2]))
    u = dag(np.concatenate([b[3] for b in blocks], axis=1))
    bs = BlockStructure(dim, u, tuple((d, m) for d, m, _, _ in blocks), len(alg))
    worst = _structure_residual(bs, alg)
    if worst > tol_block:
        return None, f"block residual {worst:.3e} exceeds {tol_block:.1e}"
    return bs, ""


def _gap_report(w, groups, why: str) -> str:
    spreads = [float(w[g[-1]] - w[g[0]]) for g in groups]
    gaps = [float(w[groups[i + 1][0]] - w[groups[i][-1]]) for i in range(len(groups) - 1)]
    return (f"{why}; smallest gap between clusters {min(gaps, default=float('nan')):.3e}, "
            f"largest cluster spread {max(spreads, default=0.0):.3e}")


def _structure_residual(bs: BlockStructure, mats) -> float:
    """Largest deviation of ``U A U^†`` from the ``⊕ A^i ⊗ 1`` pattern."""
    u = bs.unitary
    worst = 0.0
    for a in mats:
        c = u @ a @ dag(u)
        nrm = max(np.abs(a).max(), 1e-300)
        off = np.abs(c[~bs.block_mask()]).max(initial=0.0)
        rep = 0.0
        for (d, m), pos in zip(bs.blocks, bs.offsets):
            sub = c[pos:pos + d * m, pos:pos + d * m].reshape(d, m, d, m)
            diag = np.einsum("acbc->cab", sub)
            rep = max(rep, np.abs(diag - diag.mean(axis=0)).max())
        worst = max(worst, off / nrm, rep / nrm)
    return worst


def block_diagonalize(obs: ObservableSet, seed: int = 0, max_retries: int = MAX_RETRIES,
                      tol_block: float = EPS_BLOCK) -> BlockStructure:
    """Find ``U`` and ``(D_i, m_i)`` with ``U C*(O) U^† = ⊕ M_{D_i} ⊗ 1_{m_i}``.

    The random element is drawn from a seeded generator, so the result is
    deterministic for a fixed seed; the block multiset does not depend on it.
    """
    ops = obs.canonical().operators
    scale = [o / max(np.linalg.norm(o), 1e-300) for o in ops]
    alg = algebra_hermitian_basis(scale)
    reasons = []
    for attempt in range(max_retries):
        rng = np.random.default_rng([seed, attempt])
        bs, why = _attempt(alg, rng, tol_block)
        if bs is not None:
            if attempt:
                log.info("block_diagonalize succeeded after %d retries", attempt)
            return BlockStructure(bs.ambient_dim, bs.unitary, bs.blocks, bs.algebra_dim,
                                  attempt + 1)
        log.debug("attempt %d rejected: %s", attempt, why)
        reasons.append(why)
    raise BlockDiagonalizationError(
        f"no generic element found in {max_retries} attempts; last: {reasons[-1]}")


def reduce_multiplicities(obs: ObservableSet, bs: BlockStructure,
                          tol_block: float = EPS_BLOCK) -> ReducedObservableSet:
    """Strip the ``1_{m_i}`` factors: each operator becomes its list of blocks ``E^i``."""
    ops = obs.operators
    if obs.dim != bs.ambient_dim:
        raise DimensionError("observable set and block structure disagree on dimension")
    u = bs.unitary
    mask = bs.block_mask()
    reduced = []
    for op in ops:
        c = u @ op @ dag(u)
        scale = max(np.abs(op).max(), 1.0)
        off = np.abs(c[~mask]).max(initial=0.0)
        if off > tol_block * scale:
            raise MultiplicityMismatchError(
                f"operator has weight {off:.3e} outside the block pattern")
        parts = []
        for (d, m), pos in zip(bs.blocks, bs.offsets):
            sub = c[pos:pos + d * m, pos:pos + d * m].reshape(d, m, d, m)
            copies = np.einsum("acbc->cab", sub)
            mean = copies.mean(axis=0)
            if np.abs(copies - mean).max() > tol_block * scale:
                raise MultiplicityMismatchError(
                    f"repeated copies of a {d}-dimensional block disagree by "
                    f"{np.abs(copies - mean).max():.3e}")
            parts.append((mean + dag(mean)) / 2)
        reduced.append(tuple(parts))
    return ReducedObservableSet(bs, tuple(reduced))


def reduced_observable_set(obs: ObservableSet, seed: int = 0) -> ReducedObservableSet:
    canon = obs.canonical()
    return reduce_multiplicities(canon, block_diagonalize(canon, seed))


def compound_matrix(a: np.ndarray, k: int) -> np.ndarray:
    """k-th compound: all k x k minors, index sets in lexicographic order."""
    n = a.shape[0]
    subsets = list(itertools.combinations(range(n), k))
    idx = np.array(subsets)
    sub = a[idx[:, None, :, None], idx[None, :, None, :]]
    return np.linalg.det(sub)


@dataclass(frozen=True)
class GenerationVerdict:
    full: bool
    blocks: tuple[tuple[int, int], ...]
    vanishing_k: tuple[int, ...]
    pk_ratio: dict[int, float]
    pk_logdet: dict[int, float]

    @property
    def consistent(self) -> bool:
        """The block-structure verdict and the compound-matrix test agree."""
        if not self.pk_ratio:
            return True
        return self.full == (len(self.vanishing_k) == 0)

    def __bool__(self) -> bool:
        return self.full


def _spectral_projectors(h: np.ndarray) -> list[np.ndarray]:
    """Eigenprojections of a Hermitian matrix, eigenvalues clustered.

    They span the same algebra as the powers ``h^0 .. h^{n-1}`` but stay well
    conditioned where high powers would overflow.
    """
    w, v = np.linalg.eigh((h + dag(h)) / 2)
    spread = max(w.max() - w.min(), 1.0)
    return [v[:, g] @ dag(v[:, g]) for g in _cluster(w, EPS_CLUSTER_REL * spread)]


def compound_invariant(a: np.ndarray, b: np.ndarray, k: int) -> tuple[float, float]:
    """Normalized size of ``sum_ij [P_i, Q_j]^† [P_i, Q_j]``.

    ``P_i`` and ``Q_j`` are the spectral projectors of the ``k``-th compounds
    of ``A`` and ``B``, which span the same algebras as their powers.
    Returns ``(lambda_min / lambda_max, log det)``.  The matrix is singular
    whenever ``A`` and ``B`` share a ``k``-dimensional invariant subspace.
    """
    ca = compound_matrix(_normalize(a), k)
    cb = compound_matrix(_normalize(b), k)
    n = ca.shape[0]
    acc = np.zeros((n, n), dtype=complex)
    for x in _spectral_projectors(ca):
        for y in _spectral_projectors(cb):
            c = x @ y - y @ x
            acc += dag(c) @ c
    w = np.linalg.eigvalsh((acc + dag(acc)) / 2)
    top = w.max()
    # projectors have unit norm, so commuting pairs leave only rounding here
    if top <= 1e-24:
        return 0.0, -np.inf
    return float(max(w.min(), 0.0) / top), float(np.sum(np.log(np.clip(w, 1e-300, None))))


def _normalize(a: np.ndarray) -> np.ndarray:
    dim = a.shape[0]
    # shift to put the spectrum in [1, 2]: compounds of a well-conditioned
    # positive matrix keep every power informative
    w = np.linalg.eigvalsh(a)
    span = w.max() - w.min()
    if span == 0:
        return np.eye(dim, dtype=complex)
    return (a - w.min() * np.eye(dim)) / span + np.eye(dim)


def algebra_generation_test(ops, seed: int = 0, tol: float = EPS_INV) -> GenerationVerdict:
    """Do ``ops`` generate all of ``M_D``?  Block structure plus the compound-matrix check."""
    mats = [as_hermitian(o) for o in ops]
    if len(mats) < 2:
        raise ValueError("need at least two operators")
    dim = mats[0].shape[0]
    if any(m.shape != (dim, dim) for m in mats):
        raise DimensionError("operators do not share a common dimension")
    bs = block_diagonalize(ObservableSet.from_matrices(mats), seed)
    ratios, logdets, vanish = {}, {}, []
    if len(mats) == 2:
        a, b = mats
        for k in range(1, dim):
            ratio, ld = compound_invariant(a, b, k)
            ratios[k], logdets[k] = ratio, ld
            if ratio < tol:
                vanish.append(k)
    return GenerationVerdict(bs.is_full, bs.blocks, tuple(vanish), ratios, logdets)


__all__ = [
    "BlockStructure", "ReducedObservableSet", "GenerationVerdict", "BlockDiagonalizationError",
    "MultiplicityMismatchError", "block_diagonalize", "reduce_multiplicities",
    "reduced_observable_set", "algebra_generation_test", "algebra_hermitian_basis",
    "compound_matrix", "compound_invariant", "EPS_BLOCK", "EPS_NUM",
]
