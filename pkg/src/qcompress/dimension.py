"""Minimal compression dimension via the block-redundancy loop.

A block ``j`` of the reduced algebra is redundant when a unital CP map takes
the remaining kept blocks of every spanning operator onto its ``j``-th block.
We decide this with the dual semidefinite test

    minimize  sum_i tr[(E_i^j)^T H_i]
    s.t.      sum_i (⊕_{l kept} E_i^l) ⊗ H_i  >= 0,   ||(H_1..H_k)||_F <= 1,

whose value is 0 when the interpolation exists and negative otherwise, and
we extract the interpolating map itself from the primal problem over Choi
matrices.  Complex Hermitian constraints are handed to the solver through
the real embedding ``X -> [[Re X, -Im X], [Im X, Re X]]``.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .algebra import ReducedObservableSet, block_diagonalize, reduce_multiplicities
from .matcore import ObservableSet, dag

log = logging.getLogger(__name__)

EPS_SDP = 1e-6
EPS_MARGIN = 1e-4
EPS_INTERP = 1e-7

_SOLVER_SETTINGS = {
    "normal": dict(tol_gap_abs=1e-9, tol_gap_rel=1e-9, tol_feas=1e-9, max_iter=400),
    "tight": dict(tol_gap_abs=1e-11, tol_gap_rel=1e-11, tol_feas=1e-11, max_iter=1000),
}


class SolverError(RuntimeError):
    """The conic solver did not reach an optimal status."""


@dataclass(frozen=True, eq=False)
class InterpolationProblem:
    reduced: ReducedObservableSet
    target_block: int
    zeroed_blocks: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "zeroed_blocks", frozenset(self.zeroed_blocks))
        if self.target_block in self.zeroed_blocks:
            raise ValueError("target block is among the zeroed blocks")
        if not 0 <= self.target_block < self.reduced.num_blocks:
            raise IndexError("target block out of range")

    @property
    def kept_blocks(self) -> list[int]:
        return [l for l in range(self.reduced.num_blocks)
                if l != self.target_block and l not in self.zeroed_blocks]

    @property
    def target_dim(self) -> int:
        return self.reduced.structure.blocks[self.target_block][0]

    def sources(self) -> list[np.ndarray]:
        """``⊕_{l kept} E_i^l`` for every spanning operator."""
        return [self.reduced.direct_sum(i, self.kept_blocks)
                for i in range(self.reduced.num_operators)]

    def targets(self) -> list[np.ndarray]:
        return [self.reduced.block(i, self.target_block)
                for i in range(self.reduced.num_operators)]


@dataclass(frozen=True, eq=False)
class SdpOutcome:
    """Result of one redundancy test.

    ``certificate`` holds the images ``H_i = Φ(⊕_kept E_i)`` of the spanning
    operators under the interpolating CP map ``Φ`` whose (unnormalized,
    output-first) Choi matrix is ``choi``.  When the block is not redundant,
    ``witness`` carries the dual matrices ``H_i`` with a negative objective.
    """

    feasible: bool
    objective_residual: float
    certificate: tuple[np.ndarray, ...] | None = None
    choi: np.ndarray | None = None
    witness: tuple[np.ndarray, ...] | None = None
    primal_residual: float = float("nan")
    marginal: bool = False
    diagnostics: dict = field(default_factory=dict)


def _embed(re, im):
    return cp.bmat([[re, -im], [im, re]])


def _solve(prob: cp.Problem, tightness: str) -> dict:
    try:
        # an inaccurate solve shows up in the status; keep it off stderr
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            prob.solve(solver=cp.CLARABEL, **_SOLVER_SETTINGS[tightness])
    except cp.error.SolverError as exc:
        raise SolverError(f"conic solver failed: {exc}") from exc
    stats = prob.solver_stats
    diag = {"status": prob.status, "iterations": getattr(stats, "num_iters", None),
            "solve_time": getattr(stats, "solve_time", None), "settings": tightness}
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        raise SolverError(f"solver status {prob.status!r} ({diag})")
    return diag


def dual_redundancy_value(problem: InterpolationProblem, tightness: str = "normal"):
    """Optimal value of the normalized dual test and the minimizing ``H_i``."""
    src = problem.sources()
    tgt = problem.targets()
    n = problem.target_dim
    a = [cp.Variable((n, n), symmetric=True) for _ in src]
    b = [cp.Variable((n, n)) for _ in src]
    cons = [bi + bi.T == 0 for bi in b]
    m_re = sum(cp.kron(s.real, ai) - cp.kron(s.imag, bi) for s, ai, bi in zip(src, a, b))
    m_im = sum(cp.kron(s.real, bi) + cp.kron(s.imag, ai) for s, ai, bi in zip(src, a, b))
    big = _embed(m_re, m_im)
    cons.append((big + big.T) / 2 >> 0)
    cons.append(cp.norm(cp.hstack([cp.vec(x, order="F") for x in a + b]), 2) <= 1)
    obj = sum(cp.trace(t.real @ ai) + cp.trace(t.imag @ bi) for t, ai, bi in zip(tgt, a, b))
    prob = cp.Problem(cp.Minimize(obj), cons)
    diag = _solve(prob, tightness)
    hs = tuple(ai.value + 1j * bi.value for ai, bi in zip(a, b))
    return float(prob.value), hs, diag


def _choi_apply(j_re, j_im, x: np.ndarray, d_in: int, n: int):
    """``Φ(X) = sum_ab X_ab J[(:,a),(:,b)]`` for the output-first Choi matrix ``J``."""
    out_re, out_im = 0, 0
    for p in range(d_in):
        for q in range(d_in):
            xv = x[p, q]
            if xv == 0:
                continue
            blk_re = j_re[p::d_in, q::d_in]
            blk_im = j_im[p::d_in, q::d_in]
            out_re = out_re + xv.real * blk_re - xv.imag * blk_im
            out_im = out_im + xv.real * blk_im + xv.imag * blk_re
    if isinstance(out_re, int):
        z = np.zeros((n, n))
        return z, z
    return out_re, out_im


def choi_apply(choi: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Apply the map with unnormalized output-first Choi matrix ``choi`` to ``x``."""
    d_in = x.shape[0]
    n = choi.shape[0] // d_in
    t = choi.reshape(n, d_in, n, d_in)
    return np.einsum("oapb,ab->op", t, x)


def interpolating_map(problem: InterpolationProblem, tightness: str = "normal"):
    """Least-squares CP interpolation: minimize sum_i ||Φ(src_i) - tgt_i||_F over Choi matrices."""
    src = problem.sources()
    tgt = problem.targets()
    n = problem.target_dim
    d_in = src[0].shape[0]
    size = n * d_in
    j_re = cp.Variable((size, size), symmetric=True)
    j_im = cp.Variable((size, size))
    cons = [j_im + j_im.T == 0, _embed(j_re, j_im) >> 0]
    errs = []
    for s, t in zip(src, tgt):
        o_re, o_im = _choi_apply(j_re, j_im, s, d_in, n)
        errs.append(cp.vec(o_re - t.real, order="F"))
        errs.append(cp.vec(o_im - t.imag, order="F"))
    prob = cp.Problem(cp.Minimize(cp.norm(cp.hstack(errs), 2)), cons)
    diag = _solve(prob, tightness)
    choi = j_re.value + 1j * j_im.value
    return (choi + dag(choi)) / 2, diag


def _repair_choi(choi: np.ndarray, d_in: int) -> np.ndarray:
    """Project onto PSD and rescale so the map is exactly unital."""
    w, v = np.linalg.eigh(choi)
    choi = (v * np.clip(w, 0, None)) @ dag(v)
    n = choi.shape[0] // d_in
    s = choi_apply(choi, np.eye(d_in))
    w, v = np.linalg.eigh((s + dag(s)) / 2)
    if w.min() <= 0:
        return choi
    s_inv_half = (v / np.sqrt(w)) @ dag(v)
    k = np.kron(s_inv_half, np.eye(d_in))
    return k @ choi @ dag(k)


def solve_psd_feasibility(problem: InterpolationProblem, eps_sdp: float = EPS_SDP,
                          eps_margin: float = EPS_MARGIN,
                          eps_interp: float = EPS_INTERP) -> SdpOutcome:
    """Decide redundancy of ``problem.target_block``.

    Feasible means a unital CP interpolation exists.  Values in the marginal
    band ``(-eps_margin, -eps_sdp)`` are re-solved once at tighter settings
    and flagged if still marginal.
    """
    ops = problem.reduced.reduced_operators
    if not np.allclose(ops[0][problem.target_block], np.eye(problem.target_dim)):
        raise ValueError("first spanning operator must be the identity")
    if not problem.kept_blocks:
        raise ValueError("no kept blocks to interpolate from")
    value, hs, diag = dual_redundancy_value(problem, "normal")
    marginal = False
    if -eps_margin < value < -eps_sdp:
        value, hs, diag = dual_redundancy_value(problem, "tight")
        marginal = -eps_margin < value < -eps_sdp
    diagnostics = {"dual": diag, "dual_value": value}
    if value < -eps_sdp:
        return SdpOutcome(False, value, witness=hs, marginal=marginal, diagnostics=diagnostics)

    d_in = sum(problem.reduced.structure.blocks[l][0] for l in problem.kept_blocks)
    choi, pdiag = interpolating_map(problem, "normal")
    choi = _repair_choi(choi, d_in)
    images = tuple(choi_apply(choi, s) for s in problem.sources())
    resid = max(np.abs(h - t).max() for h, t in zip(images, problem.targets()))
    if resid > eps_interp:
        choi2, pdiag = interpolating_map(problem, "tight")
        choi2 = _repair_choi(choi2, d_in)
        images2 = tuple(choi_apply(choi2, s) for s in problem.sources())
        resid2 = max(np.abs(h - t).max() for h, t in zip(images2, problem.targets()))
        if resid2 < resid:
            choi, images, resid = choi2, images2, resid2
    diagnostics["primal"] = pdiag
    feasible = resid <= eps_interp
    if not feasible:
        # dual says redundant, but no accurate map was found
        marginal = True
        log.warning("dual value %.2e but primal residual %.2e for block %d",
                    value, resid, problem.target_block)
    return SdpOutcome(feasible, value, images, choi, hs, resid, marginal, diagnostics)


@dataclass(frozen=True)
class InterpolationCheck:
    residual: float
    target_deviation: float
    consistency: float
    unitality: float
    choi_min_eig: float

    @property
    def ok(self) -> bool:
        return self.residual <= EPS_INTERP


def verify_interpolation(problem: InterpolationProblem, cert: SdpOutcome) -> InterpolationCheck:
    """Independent check of a certificate: CP, unital, and hitting every target."""
    if cert.choi is None or cert.certificate is None:
        raise ValueError("outcome carries no interpolation certificate")
    src, tgt = problem.sources(), problem.targets()
    choi = cert.choi
    min_eig = float(np.linalg.eigvalsh((choi + dag(choi)) / 2).min())
    d_in = src[0].shape[0]
    unit = float(np.abs(choi_apply(choi, np.eye(d_in)) - np.eye(problem.target_dim)).max())
    target_dev = max(float(np.abs(h - t).max()) for h, t in zip(cert.certificate, tgt))
    consist = max(float(np.abs(choi_apply(choi, s) - h).max())
                  for s, h in zip(src, cert.certificate))
    scale = max(1.0, float(np.abs(choi).max()))
    residual = max(target_dev, consist, unit, max(0.0, -min_eig) / scale)
    return InterpolationCheck(residual, target_dev, consist, unit, min_eig)


@dataclass(frozen=True, eq=False)
class DimensionReport:
    lower_bound_min_block: int
    upper_bound_max_block: int
    compression_dimension: int
    redundant_blocks: tuple[int, ...]
    classical_register: int
    blocks: tuple[tuple[int, int], ...]
    certificates: dict = field(default_factory=dict)
    outcomes: dict = field(default_factory=dict)
    reduced: ReducedObservableSet | None = field(default=None, repr=False)

    @property
    def kept_blocks(self) -> tuple[int, ...]:
        return tuple(i for i in range(len(self.blocks)) if i not in self.redundant_blocks)

    def to_dict(self) -> dict:
        return {
            "lower_bound_min_block": self.lower_bound_min_block,
            "upper_bound_max_block": self.upper_bound_max_block,
            "compression_dimension": self.compression_dimension,
            "redundant_blocks": list(self.redundant_blocks),
            "classical_register": self.classical_register,
            "blocks": [list(b) for b in self.blocks],
            "sdp": {str(j): {"feasible": o.feasible,
                             "objective_residual": o.objective_residual,
                             "primal_residual": o.primal_residual,
                             "marginal": o.marginal}
                    for j, o in self.outcomes.items()},
        }


def dimension_from_reduced(reduced: ReducedObservableSet, **sdp_kw) -> DimensionReport:
    """Run the redundancy loop on an already reduced set (blocks sorted descending)."""
    dims = reduced.structure.block_dims
    if dims != sorted(dims, reverse=True):
        raise ValueError("blocks must be sorted by decreasing dimension")
    s = len(dims)
    zeroed: set[int] = set()
    certs, outcomes = {}, {}
    j = 0
    d = dims[0]
    while j < s - 1:
        prob = InterpolationProblem(reduced, j, frozenset(zeroed))
        out = solve_psd_feasibility(prob, **sdp_kw)
        outcomes[j] = out
        log.debug("block %d (dim %d): value %.3e feasible=%s",
                  j, dims[j], out.objective_residual, out.feasible)
        if not out.feasible:
            break
        certs[j] = out
        zeroed.add(j)
        j += 1
        d = dims[j]
    redundant = tuple(sorted(zeroed))
    return DimensionReport(min(dims), max(dims), d, redundant, s - len(redundant),
                           reduced.structure.blocks, certs, outcomes, reduced)


def compression_dimension(obs: ObservableSet, seed: int = 0, **sdp_kw) -> DimensionReport:
    """Block structure, reduction, then the redundancy loop.

    The reduced set the loop ran on is kept in ``report.reduced`` for the
    channel construction.
    """
    canon = obs.canonical()
    bs = block_diagonalize(canon, seed)
    reduced = reduce_multiplicities(canon, bs)
    return dimension_from_reduced(reduced, **sdp_kw)
