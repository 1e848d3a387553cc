"""Named example families used as fixtures.

Every generator is deterministic given its arguments.  The planted
instances carry the data needed to check an interpolation certificate
against the map that was used to build them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvebound import gen_irreducible_example
from .matcore import dag, random_hermitian, random_unitary


def degree3_example() -> tuple[np.ndarray, np.ndarray]:
    """``A = diag(-1, -1/2, 1)`` and the real symmetric ``B`` with ``det[x + yA + zB] = (x - y/2)(x^2 - y^2 - z^2)``."""
    a = np.diag([-1.0, -0.5, 1.0])
    s = np.sqrt(3) / 2
    b = np.array([[0.0, -0.5, 0.0],
                  [-0.5, 0.0, -s],
                  [0.0, -s, 0.0]])
    return a.astype(complex), b.astype(complex)


def irreducible_example(dim: int) -> tuple[np.ndarray, np.ndarray]:
    return gen_irreducible_example(dim)


def random_projection(dim: int, rank: int, rng: np.random.Generator) -> np.ndarray:
    u = random_unitary(dim, rng)[:, :rank]
    p = u @ dag(u)
    return (p + dag(p)) / 2


def two_projections(dim: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Two seeded random projections of rank ``dim // 2``."""
    rng = np.random.default_rng(seed)
    k = dim // 2
    return random_projection(dim, k, rng), random_projection(dim, k, rng)


def _pd_pair(dim: int, rng: np.random.Generator, top: float = 0.4, floor: float = 0.05):
    """Two generic positive matrices with spectra in ``[floor, floor + top]``."""
    out = []
    for _ in range(2):
        h = random_hermitian(dim, rng)
        w = np.linalg.eigvalsh(h)
        if dim > 1:
            h = (h - w.min() * np.eye(dim)) / (w.max() - w.min())
        else:
            h = np.ones((1, 1), dtype=complex)
        out.append(top * h + floor * np.eye(dim))
    return out


def _direct_sum(*parts) -> np.ndarray:
    n = sum(p.shape[0] for p in parts)
    out = np.zeros((n, n), dtype=complex)
    pos = 0
    for p in parts:
        k = p.shape[0]
        out[pos:pos + k, pos:pos + k] = p
        pos += k
    return out


@dataclass(frozen=True, eq=False)
class PlantedInstance:
    """Effects ``W_i = U (A_i ⊕ Φ(A_i)) U^†``.

    ``phi(z)`` evaluates the planted unital CP map ``Z -> (1/c) sum tr[A_i Z] B_i``
    on the ``A``-part.  ``source_slice`` and ``image_slice`` locate the two
    summands before the unitary ``U`` is applied.
    """

    variant: str
    operators: tuple[np.ndarray, ...]
    unitary: np.ndarray
    a_ops: tuple[np.ndarray, ...]
    b_ops: tuple[np.ndarray, ...]
    c: float
    source_slice: slice
    image_slice: slice
    expected_dim: int

    def phi(self, z: np.ndarray) -> np.ndarray:
        return sum(np.trace(a @ z) * b for a, b in zip(self.a_ops, self.b_ops)) / self.c


def _trine() -> list[np.ndarray]:
    out = []
    for i in range(1, 4):
        th = 2 * np.pi * i / 3
        v = np.array([np.cos(th), np.sin(th)])
        out.append((2 / 3) * np.outer(v, v).astype(complex))
    return out


def planted_instance(variant: str, seed: int = 0) -> PlantedInstance:
    """Constructions showing which blocks can be redundant.

    ``claim1``: three scalar blocks carry an orthonormal basis ``A_i`` and an
    ``M_2`` block carries positive definite ``B_i``; the ``M_2`` block is
    redundant and ``d = 1``.
    ``claim2``: an ``M_2`` block carries the trine ``A_i = (2/3)|a_i><a_i|`` and
    three scalar blocks carry ``Φ(A_i)``; the ``M_2`` block is not redundant
    and ``d = 2``.
    ``claim3``: ``M_2 ⊕ C ⊕ C`` with generic effects; a commutative remainder
    cannot rebuild a noncommutative block, so ``d = 2``.
    """
    rng = np.random.default_rng(seed)
    if variant == "claim1":
        b1, b2 = _pd_pair(2, rng)
        b_ops = (b1, b2, np.eye(2) - b1 - b2)
        a_ops = tuple(np.diag(np.eye(3)[i]).astype(complex) for i in range(3))
        c = 1.0
        blocks = [_direct_sum(a, b) for a, b in zip(a_ops, b_ops)]
        src, img, expected = slice(0, 3), slice(3, 5), 1
    elif variant == "claim2":
        a_ops = tuple(_trine())
        c = 2 / 3
        x = 0.05 + 0.4 * rng.random(3)
        y = 0.05 + 0.4 * rng.random(3)
        b_ops = (np.diag(x).astype(complex), np.diag(y).astype(complex),
                 np.diag(1 - x - y).astype(complex))
        images = [sum(np.trace(a @ z) * b for a, b in zip(a_ops, b_ops)) / c for z in a_ops]
        blocks = [_direct_sum(a, im) for a, im in zip(a_ops, images)]
        src, img, expected = slice(0, 2), slice(2, 5), 2
    elif variant == "claim3":
        x, y = _pd_pair(2, rng)
        s = 0.05 + 0.4 * rng.random((2, 2))
        blocks = [_direct_sum(x, np.diag(s[0]).astype(complex)),
                  _direct_sum(y, np.diag(s[1]).astype(complex))]
        a_ops, b_ops, c = (), (), 1.0
        src, img, expected = slice(0, 2), slice(2, 4), 2
    else:
        raise ValueError(f"unknown planted variant {variant!r}")
    dim = blocks[0].shape[0]
    u = random_unitary(dim, rng)
    ops = tuple(u @ b @ dag(u) for b in blocks)
    ops = tuple((o + dag(o)) / 2 for o in ops)
    return PlantedInstance(variant, ops, u, a_ops, b_ops, c, src, img, expected)


def generic_pair(dim: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    return random_hermitian(dim, rng), random_hermitian(dim, rng)


def random_block_instance(rng: np.random.Generator, max_dim: int = 6, n_ops: int = 2):
    """Random operators generating a random block structure, hidden by a unitary.

    Returns the operators and the ``(D_i, m_i)`` list used to build them.
    """
    while True:
        blocks = []
        total = 0
        while True:
            d = int(rng.integers(1, 4))
            m = int(rng.integers(1, 3)) if d > 1 else 1
            if total + d * m > max_dim:
                break
            blocks.append((d, m))
            total += d * m
        if blocks:
            break
    ops = []
    for _ in range(n_ops):
        parts = []
        for d, m in blocks:
            h = random_hermitian(d, rng) if d > 1 else rng.standard_normal((1, 1)).astype(complex)
            parts.append(np.kron(h, np.eye(m)))
        ops.append(_direct_sum(*parts))
    u = random_unitary(total, rng)
    return [u @ o @ dag(u) for o in ops], blocks
