"""Lower bound on the compression dimension from a determinantal plane curve.

For Hermitian ``E1, E2`` the polynomial ``p(x, z) = det[x 1 - E1 - z E2]`` is
real, monic in ``x`` and of total degree ``D``.  The smallest degree of a real
irreducible factor of ``p`` bounds the compression dimension from below.

Factor degrees are found numerically.  Above a generic ``z`` the ``D`` roots
in ``x`` split into groups that are permuted among themselves when ``z`` is
carried around the branch points of the curve; each orbit of the resulting
permutation group is the root set of one irreducible factor.  Repeated
factors are stripped first so every branch is simple.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .matcore import DimensionError, ObservableSet, as_hermitian

log = logging.getLogger(__name__)

EPS_COEF = 1e-9
EPS_ROOT = 1e-6
EPS_MULT = 1e-5
EPS_TRIM = 1e-11
EPS_BRANCH = 1e-2


class CurveError(RuntimeError):
    """Interpolation or squarefree preprocessing failed."""


class PathTrackingError(RuntimeError):
    """Root matching stayed ambiguous down to the smallest allowed step."""

    def __init__(self, msg: str, diagnostics: dict | None = None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class OrbitClosureError(RuntimeError):
    """The global loop moved a root out of its orbit."""


@dataclass(frozen=True, eq=False)
class DeterminantalCurve:
    """``p(x, z) = sum_{a,b} c[a, b] x^a z^b`` with ``c[D, 0] = 1``."""

    degree: int
    coefficients: np.ndarray
    source_pair: tuple[np.ndarray, np.ndarray] | None = None

    def x_poly(self, z: complex) -> np.ndarray:
        """Coefficients of ``p(., z)`` in ``x``, highest power first (``np.roots`` order)."""
        zp = z ** np.arange(self.degree + 1)
        return (self.coefficients @ zp)[::-1]

    def __call__(self, x, z):
        return np.polyval(self.x_poly(z), x)

    def roots(self, z: complex) -> np.ndarray:
        if self.source_pair is not None:
            e1, e2 = self.source_pair
            return np.linalg.eigvals(e1 + z * e2)
        return np.roots(self.x_poly(z))

    def hyperbolicity_residual(self, ts) -> float:
        """Largest ``|Im x|`` over the roots of ``p(., t)`` for real ``t``."""
        worst = 0.0
        for t in ts:
            r = np.roots(self.x_poly(complex(t)).real)
            worst = max(worst, float(np.abs(r.imag).max(initial=0.0)))
        return worst


def _charpoly_grid(e1: np.ndarray, e2: np.ndarray, radius: float, phase: float) -> np.ndarray:
    d = e1.shape[0]
    zs = radius * np.exp(1j * (phase + 2 * np.pi * np.arange(d + 1) / (d + 1)))
    # rows: z samples; columns: coefficient of x^a, a = 0..D
    return np.array([np.poly(np.linalg.eigvals(e1 + z * e2))[::-1] for z in zs])


def _interpolate_z(vals: np.ndarray, radius: float, phase: float) -> np.ndarray:
    """Coefficients in ``z`` (row ``b`` for ``z^b``) of samples on a rotated circle.

    Row ``k`` of ``vals`` is the value at ``radius * exp(i(phase + 2πk/m))``.
    """
    m = vals.shape[0]
    scale = (radius * np.exp(1j * phase)) ** np.arange(m)
    coef = np.fft.fft(vals, axis=0) / m
    return coef / scale.reshape((m,) + (1,) * (vals.ndim - 1))


def extract_curve(e1, e2, tol: float = EPS_COEF) -> DeterminantalCurve:
    """Coefficients of ``det[x 1 - E1 - z E2]``.

    The characteristic polynomial in ``x`` is evaluated at ``D + 1`` points
    on a circle in ``z`` and interpolated; the reconstruction is checked at
    an off-grid point and retried once on a rescaled grid.
    """
    e1 = as_hermitian(e1)
    e2 = as_hermitian(e2)
    if e1.shape != e2.shape:
        raise DimensionError("E1 and E2 must have the same dimension")
    d = e1.shape[0]
    scale = max(1.0, float(np.linalg.norm(e2, 2)))
    probe = 0.37 + 0.61j
    last_err = np.inf
    for radius in (1.0 / scale, 1.0):
        phase = 0.0
        vals = _charpoly_grid(e1, e2, radius, phase)
        coef = _interpolate_z(vals, radius, phase)  # coef[b, a]
        c = coef.T.real.copy()
        big = max(1.0, float(np.abs(c).max()))
        c[np.abs(c) < 1e-13 * big] = 0.0
        c = _snap(c)
        c[d, :] = 0.0
        c[d, 0] = 1.0
        direct = np.linalg.det(probe * np.eye(d) - e1 - (probe / 3) * e2)
        curve = DeterminantalCurve(d, c, (e1, e2))
        last_err = abs(curve(probe, probe / 3) - direct) / max(1.0, abs(direct))
        if last_err <= tol * 10 and np.abs(coef.imag).max() <= 1e3 * tol * big:
            return curve
        log.debug("curve interpolation error %.2e at radius %.3g, retrying", last_err, radius)
    raise CurveError(f"bivariate interpolation failed (relative error {last_err:.2e})")


def _snap(c: np.ndarray) -> np.ndarray:
    """Round coefficients that sit within rounding noise of a dyadic rational."""
    out = c.copy()
    for den in (1, 2, 4, 8, 16, 32, 64):
        near = np.abs(out * den - np.round(out * den)) < 1e-12 * max(1.0, np.abs(out).max())
        out[near] = np.round(out[near] * den) / den
    return out


# -- squarefree part ---------------------------------------------------------

def _cluster_roots(roots: np.ndarray, tol: float) -> list[tuple[complex, int]]:
    """Group roots closer than ``tol`` (single linkage); return (mean, count)."""
    n = len(roots)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(roots[i] - roots[j]) < tol:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [(complex(np.mean(roots[g])), len(g)) for g in groups.values()]


@dataclass(frozen=True, eq=False)
class SquarefreePart:
    curve: DeterminantalCurve
    multiplicity_pattern: tuple[int, ...]

    @property
    def reduced_degree(self) -> int:
        return self.curve.degree


def squarefree_part(curve: DeterminantalCurve, seed: int = 0,
                    tol: float = EPS_MULT) -> SquarefreePart:
    """Divide out repeated factors of ``p``.

    At generic ``z`` the roots of ``p_1^{m_1} ... p_s^{m_s}`` come in clusters
    of sizes ``m_i``; the polynomial with one root per cluster, interpolated
    in ``z``, is the squarefree part ``q``.  The multiplicity pattern must be
    the same at every sample, otherwise the sample was not generic.
    """
    d = curve.degree
    rng = np.random.default_rng(seed)
    radius = 0.5 + rng.random()
    phase = 2 * np.pi * rng.random()
    m = d + 1
    zs = radius * np.exp(1j * (phase + 2 * np.pi * np.arange(m) / m))
    patterns, rows = [], []
    for z in zs:
        r = curve.roots(z)
        scale = max(1.0, float(np.abs(r).max()))
        cl = _cluster_roots(r, tol * scale)
        patterns.append(tuple(sorted(c for _, c in cl)))
        rows.append([c for c, _ in cl])
    if len(set(patterns)) != 1:
        raise CurveError(f"multiplicity pattern not stable across samples: {set(patterns)}")
    pattern = patterns[0]
    if all(k == 1 for k in pattern):
        return SquarefreePart(curve, pattern)
    n = len(pattern)
    vals = np.array([np.poly(np.array(r))[::-1] for r in rows])  # q coefficients per z
    coef = _interpolate_z(vals, radius, phase)
    c = coef.T.real[:n + 1, :n + 1].copy()
    if np.abs(coef.T[:, n + 1:]).max(initial=0.0) > 1e-6 * max(1.0, np.abs(c).max()):
        raise CurveError("squarefree part has unexpected degree in z")
    c[np.abs(c) < 1e-13 * max(1.0, np.abs(c).max())] = 0.0
    c[n, :] = 0.0
    c[n, 0] = 1.0
    return SquarefreePart(DeterminantalCurve(n, c, None), pattern)


# -- branch points -----------------------------------------------------------

def _discriminant(curve: DeterminantalCurve, z: complex) -> complex:
    """``prod_{i<j} (r_i - r_j)^2`` over the roots of ``p(., z)``."""
    r = curve.roots(z)
    iu = np.triu_indices(len(r), 1)
    return complex(np.prod((r[:, None] - r[None, :])[iu] ** 2))


def discriminant_coefficients(curve: DeterminantalCurve, radius: float = 1.0,
                              deflate: tuple[tuple[float, int], ...] = ()) -> np.ndarray:
    """Coefficients (lowest power first) of the ``x``-discriminant of ``p`` in ``z``.

    For monic ``p`` the discriminant equals ``prod_{i<j} (r_i - r_j)^2``; it has
    degree at most ``n(n-1)`` in ``z`` and is sampled on a circle and
    interpolated.  The root-product form keeps relative accuracy when the
    discriminant is tiny, which a Sylvester determinant does not.  Known zeros
    ``(z0, order)`` in ``deflate`` are divided out of the samples first.
    """
    n = curve.degree
    if n < 2:
        return np.ones(1, dtype=complex)
    m = n * (n - 1) + 1
    zs = radius * np.exp(2j * np.pi * np.arange(m) / m)
    vals = np.array([_discriminant(curve, z) for z in zs])
    for z0, k in deflate:
        vals = vals / (zs - z0) ** k
    return _interpolate_z(vals, radius, 0.0)


def _crossing_order(curve: DeterminantalCurve, z0: float, near: float) -> int:
    """Order of the discriminant's zero at a real crossing, from its growth off the axis."""
    # probe well inside the gap to the nearest other crossing
    h1 = min(1e-2 * (1 + abs(z0)), 0.05 * near)
    h2 = 0.1 * h1
    d1 = abs(_discriminant(curve, z0 + 1j * h1))
    d2 = abs(_discriminant(curve, z0 + 1j * h2))
    if d1 == 0 or d2 == 0:
        return 0
    return int(round(np.log(d1 / d2) / np.log(h1 / h2)))


def _refine_gap(curve: DeterminantalCurve, k: int | None, a: float, b: float, zmax: float):
    from scipy.optimize import minimize_scalar

    def gap(t: float) -> float:
        d = np.diff(np.sort(curve.roots(t).real))
        return float(d.min() if k is None else d[k])

    res = minimize_scalar(gap, bounds=(a, b), method="bounded",
                          options={"xatol": 1e-13 * max(1.0, zmax)})
    return float(res.x), float(res.fun)


def real_crossings(curve: DeterminantalCurve, zmax: float, samples: int = 2001,
                   tol: float = 1e-7, extra=()) -> list[tuple[float, int]]:
    """Real ``z`` where two roots of ``p(., z)`` meet, with the discriminant's order there.

    On the real axis the roots are real (hyperbolicity) and their gaps are
    computed accurately, so crossings are found as zeros of the gaps between
    neighbouring roots, each gap scanned separately.  ``extra`` holds
    further candidate points to refine.  For a Hermitian pencil these points
    are never branch points, but they are high-order zeros of the
    discriminant that spoil its root finding.
    """
    if curve.degree < 2:
        return []
    ts = np.linspace(-zmax, zmax, samples)
    g = np.array([np.diff(np.sort(curve.roots(t).real)) for t in ts])
    scale = 1.0 + float(np.abs(curve.roots(0.0)).max())
    found: list[float] = []

    def add(x: float, val: float) -> None:
        if val < tol * scale and not any(abs(x - f) < 1e-6 * (1 + abs(x)) for f in found):
            found.append(x)

    for k in range(g.shape[1]):
        col = g[:, k]
        for i in range(1, samples - 1):
            if col[i] <= col[i - 1] and col[i] <= col[i + 1]:
                add(*_refine_gap(curve, k, ts[i - 1], ts[i + 1], zmax))
    for z in extra:
        # a tight window keeps neighbouring crossings out of the search
        x = float(np.real(z))
        w = max(4 * abs(float(np.imag(z))), 1e-3 * (1 + abs(x)))
        for k in range(g.shape[1]):
            add(*_refine_gap(curve, k, x - w, x + w, zmax))
    found.sort()
    out = []
    for z0 in found:
        near = min((abs(z0 - f) for f in found if f != z0), default=np.inf)
        k = _crossing_order(curve, z0, near)
        if k > 0:
            out.append((z0, k))
    return out


def _trim(coef: np.ndarray, trim: float) -> np.ndarray:
    mag = np.abs(coef)
    if mag.max() == 0:
        raise CurveError("discriminant vanishes identically; curve is not squarefree")
    keep = np.nonzero(mag > trim * mag.max())[0]
    return coef[:keep[-1] + 1]


def _balanced_coefficients(curve: DeterminantalCurve, deflate=(), cutoff: float = 1e-6,
                           rounds: int = 4) -> tuple[np.ndarray, bool]:
    """Discriminant (or its deflated quotient) sampled on a well-placed circle.

    A single circle cannot resolve roots of very different sizes, so the
    radius is moved to the geometric mean ``|c_lo / c_hi|^(1/(hi - lo))`` of
    the root moduli until it settles.  The degree is read off the scaled
    coefficients ``c_b rho^b``: everything past the last one above
    ``cutoff`` is dropped.  ``clean`` reports a sharp drop there (exact zeros
    up to rounding); a slowly decaying tail means the samples are not a
    polynomial of lower degree, e.g. after dividing by a wrong factor.
    """
    radius = 1.0
    centers = [abs(z0) for z0, _ in deflate]
    for _ in range(rounds):
        # keep the circle away from the divided-out points
        if any(abs(radius - c) < 0.05 * radius for c in centers):
            radius *= 1.13
        coef = discriminant_coefficients(curve, radius, tuple(deflate))
        scaled = np.abs(coef) * radius ** np.arange(len(coef))
        if scaled.max() == 0:
            raise CurveError("discriminant vanishes identically; curve is not squarefree")
        scaled = scaled / scaled.max()
        big = np.nonzero(scaled > cutoff)[0]
        lo, hi = int(big[0]), int(big[-1])
        tail = scaled[hi + 1:].max(initial=0.0)
        clean = tail <= 1e-3 * scaled[hi]
        if hi == lo:
            break
        new = radius * (scaled[lo] / scaled[hi]) ** (1.0 / (hi - lo))
        new = float(np.clip(new, 1e-3, 1e3))
        if abs(np.log(new / radius)) < np.log(1.5):
            break
        radius = new
    return coef[:hi + 1], clean


def branch_points(curve: DeterminantalCurve, trim: float = EPS_TRIM,
                  hermitian: bool = True) -> tuple[np.ndarray, list[tuple[float, int]]]:
    """Zeros in ``z`` of the ``x``-discriminant, via its companion matrix.

    With ``hermitian`` set, real crossings are located on the real axis and
    divided out first; they are returned separately with their orders.
    ``trim`` is the relative size below which scaled coefficients of the
    discriminant count as zero.
    """
    coef, _ = _balanced_coefficients(curve, cutoff=max(trim, 1e-14))
    if len(coef) <= 1:
        return np.zeros(0, dtype=complex), []
    crossings: list[tuple[float, int]] = []
    if hermitian:
        zmax = 1.5 * float(np.abs(np.roots(coef[::-1])).max()) + 1.0
        full = curve.degree * (curve.degree - 1)
        crossings = real_crossings(curve, zmax)
        base = coef
        for _ in range(2):
            total = sum(k for _, k in crossings)
            if not crossings:
                break
            deflated, clean = _balanced_coefficients(curve, crossings)
            if not (clean and len(deflated) - 1 + total <= full):
                log.debug("deflation by real crossings rejected")
                coef, crossings = base, []
                break
            coef = deflated
            # roots hugging the real axis point at crossings the scan missed
            r = np.roots(coef[::-1]) if len(coef) > 1 else np.zeros(0)
            near = r[np.abs(r.imag) < 0.05 * (1 + np.abs(r))]
            if len(near) == 0:
                break
            more = real_crossings(curve, zmax, extra=near)
            if len(more) == len(crossings):
                break
            crossings = more
    rest = np.roots(coef[::-1]) if len(coef) > 1 else np.zeros(0, dtype=complex)
    rest = np.array([polish_branch_point(curve, z) for z in rest], dtype=complex)
    return rest, crossings


def polish_branch_point(curve: DeterminantalCurve, z0: complex, iters: int = 60) -> complex:
    """Refine a rough discriminant root by a secant iteration in ``z``.

    The closest pair of roots of ``p(., z0)`` is followed and the square of
    its difference, analytic in ``z``, is driven to zero.  At a simple branch
    point that zero is simple and convergence is superlinear; where two
    factors cross it is double and convergence is linear.  Either way the
    point ends far more accurate than a root of the ill-conditioned
    discriminant.  The original point is returned if the iteration wanders off.
    """
    z0 = complex(z0)
    scale = 1.0 + abs(z0)
    r = curve.roots(z0)
    diff = np.abs(r[:, None] - r[None, :]) + np.diag(np.full(len(r), np.inf))
    i, j = np.unravel_index(np.argmin(diff), diff.shape)
    pair = [r[i], r[j]]

    def f(z):
        roots = list(curve.roots(z))
        a = roots.pop(int(np.argmin([abs(x - pair[0]) for x in roots])))
        b = roots[int(np.argmin([abs(x - pair[1]) for x in roots]))]
        pair[:] = [a, b]
        return (a - b) ** 2

    z_prev, z = z0, z0 + 1e-4 * scale
    f_prev, fz = f(z_prev), f(z)
    for _ in range(iters):
        if fz == f_prev:
            break
        step = fz * (z - z_prev) / (fz - f_prev)
        z_prev, f_prev = z, fz
        z = z - step
        if not np.isfinite(z) or abs(z - z0) > 0.1 * scale:
            return z0
        fz = f(z)
        if abs(step) < 1e-14 * scale or fz == 0:
            break
    return complex(z)


def merge_branch_points(bps: np.ndarray, tol: float = EPS_BRANCH) -> np.ndarray:
    """Replace each cluster of discriminant roots by its centroid.

    A branch point where ``k`` sheets meet is a multiple root of the
    discriminant, which ``np.roots`` returns as a ring of radius about
    ``eps**(1/mult)``; the centroid of the ring is accurate to ``O(eps)``.
    """
    if len(bps) == 0:
        return bps
    pts = np.asarray(bps, dtype=complex)
    scale = 1.0 + np.abs(pts)
    n = len(pts)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(pts[i] - pts[j]) < tol * min(scale[i], scale[j]):
                parent[find(i)] = find(j)
    clusters: dict[int, list[int]] = {}
    for i in range(n):
        clusters.setdefault(find(i), []).append(i)
    out = [pts[g].mean() for g in clusters.values()]
    return np.array(sorted(out, key=lambda c: (round(c.real, 12), round(c.imag, 12))),
                    dtype=complex)


# -- path tracking -----------------------------------------------------------

@dataclass
class TrackSettings:
    max_halvings: int = 20
    ratio: float = 0.5
    step_fraction: float = 0.25
    small_loop_fraction: float = 0.25
    loop_points: int = 24
    move_fraction: float = 0.5
    max_steps: int = 200_000


def _nearest_bp_distance(z: complex, bps: np.ndarray) -> float:
    if len(bps) == 0:
        return np.inf
    return float(np.abs(bps - z).min())


class _Tracker:
    def __init__(self, curve: DeterminantalCurve, bps: np.ndarray, settings: TrackSettings):
        self.curve = curve
        self.bps = bps
        self.settings = settings
        self.steps = 0
        self.halvings = 0
        self.min_ratio_margin = np.inf

    def _match(self, pred: np.ndarray, new: np.ndarray):
        n = len(pred)
        dist = np.abs(pred[:, None] - new[None, :])
        order = np.argsort(dist, axis=1)
        idx = order[:, 0]
        if len(set(idx.tolist())) != n:
            return None
        if n > 1:
            rows = np.arange(n)
            ratio = dist[rows, order[:, 0]] / np.maximum(dist[rows, order[:, 1]], 1e-300)
            worst = float(ratio.max())
            if worst >= self.settings.ratio:
                return None
            self.min_ratio_margin = min(self.min_ratio_margin, self.settings.ratio - worst)
        return new[idx]

    def track(self, path: np.ndarray, roots: np.ndarray) -> np.ndarray:
        """Carry ``roots`` (ordered) along the polyline ``path``."""
        cur = roots.copy()
        prev, prev_h = None, None
        floor = 2.0 ** -self.settings.max_halvings
        for z0, z1 in zip(path[:-1], path[1:]):
            t = 0.0
            h = 1.0
            seg = z1 - z0
            while t < 1.0:
                z = z0 + t * seg
                cap = self.settings.step_fraction * _nearest_bp_distance(z, self.bps)
                h_eff = min(h, 1.0 - t)
                if abs(seg) * h_eff > cap:
                    h_eff = cap / abs(seg)
                base = h_eff
                while True:
                    zn = z0 + (t + h_eff) * seg
                    new = self.curve.roots(zn)
                    step = abs(seg) * h_eff
                    if prev is not None and prev_h:
                        pred = cur + (cur - prev) * (step / prev_h)
                    else:
                        pred = cur
                    matched = self._match(pred, new)
                    if matched is not None and len(cur) > 1:
                        # no root may move further than half the smallest gap
                        gaps = np.abs(cur[:, None] - cur[None, :])
                        sep = gaps[~np.eye(len(cur), dtype=bool)].min()
                        if np.abs(matched - cur).max() > self.settings.move_fraction * sep:
                            matched = None
                    if matched is not None:
                        break
                    h_eff /= 2
                    self.halvings += 1
                    if h_eff < floor * base:
                        raise PathTrackingError(
                            "root matching ambiguous at minimal step",
                            {"z": complex(z), "roots": cur.tolist(),
                             "steps": self.steps, "halvings": self.halvings})
                prev, prev_h = cur, abs(seg) * h_eff
                cur = matched
                t += h_eff
                h = min(2 * h_eff, 1.0)
                self.steps += 1
                if self.steps > self.settings.max_steps:
                    raise PathTrackingError(
                        "step budget exhausted", {"z": complex(zn), "steps": self.steps})
        return cur


def _permutation(start: np.ndarray, end: np.ndarray) -> tuple[int, ...]:
    dist = np.abs(end[:, None] - start[None, :])
    perm = tuple(int(i) for i in dist.argmin(axis=1))
    if len(set(perm)) != len(perm):
        raise PathTrackingError("loop did not return to the base fibre")
    return perm


def _circle(center: complex, radius: float, start_angle: float, points: int) -> np.ndarray:
    ang = start_angle + 2 * np.pi * np.arange(points + 1) / points
    return center + radius * np.exp(1j * ang)


def _segment_with_detours(a: complex, b: complex, bps: np.ndarray, radii: np.ndarray,
                          skip: int, points: int) -> list[complex]:
    """Straight path ``a -> b`` that goes around the disks of other branch points."""
    path = [a]
    seg = b - a
    length = abs(seg)
    hits = []
    for k, (e, r) in enumerate(zip(bps, radii)):
        if k == skip:
            continue
        t = ((e - a) * np.conj(seg)).real / length ** 2
        if not 0 < t < 1:
            continue
        if abs(a + t * seg - e) < r:
            hits.append((t, k))
    for _, k in sorted(hits):
        e, r = bps[k], radii[k]
        # entry and exit points of the segment on the circle |z - e| = r
        u = seg / length
        proj = ((e - a) * np.conj(u)).real
        off = np.sqrt(max(r * r - abs(a + proj * u - e) ** 2, 0.0))
        p_in, p_out = a + (proj - off) * u, a + (proj + off) * u
        th_in, th_out = np.angle(p_in - e), np.angle(p_out - e)
        sweep = (th_out - th_in) % (2 * np.pi)
        if sweep > np.pi + 1e-12:
            sweep -= 2 * np.pi
        elif abs(sweep - np.pi) <= 1e-12:
            sweep = np.pi  # exactly collinear: pass counterclockwise
        ang = th_in + sweep * np.arange(points + 1) / points
        path.extend(e + r * np.exp(1j * ang))
    path.append(b)
    return path


@dataclass(frozen=True, eq=False)
class FactorizationResult:
    complex_orbit_sizes: tuple[int, ...]
    real_factor_degrees: tuple[int, ...]
    min_real_degree: int
    branch_points: tuple[complex, ...]
    multiplicities: tuple[int, ...] = ()
    diagnostics: dict = field(default_factory=dict)

    @property
    def degree(self) -> int:
        mult = self.multiplicities or (1,) * len(self.real_factor_degrees)
        return int(sum(d * m for d, m in zip(self.real_factor_degrees, mult)))


def _orbits(n: int, perms) -> list[list[int]]:
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for p in perms:
        for i, j in enumerate(p):
            parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: (len(g), g))


def _compose(first, second) -> tuple[int, ...]:
    return tuple(second[i] for i in first)


def factor_by_monodromy(curve: DeterminantalCurve, settings: TrackSettings | None = None,
                        seed: int = 0) -> FactorizationResult:
    """Real irreducible factor degrees of ``curve`` from its monodromy group."""
    settings = settings or TrackSettings()
    sq = squarefree_part(curve, seed)
    q = sq.curve
    n = q.degree
    if n == 1:
        return FactorizationResult((1,), (1,), 1, (), (curve.degree,),
                                   {"reduced_degree": 1, "loops": 0})
    raw, crossings = branch_points(q)
    bps = merge_branch_points(np.concatenate([raw, [complex(z0) for z0, _ in crossings]]))
    if len(bps) > 1:
        nn = np.array([np.delete(np.abs(bps - b), k).min() for k, b in enumerate(bps)])
    else:
        nn = np.full(len(bps), 1.0)
    small = settings.small_loop_fraction * nn
    obstacle = 2 * small
    big_r = 2.0 * (1.0 + float(np.abs(bps).max(initial=0.0)))
    base = complex(big_r, 0.0)
    tracker = _Tracker(q, bps, settings)
    base_roots = q.roots(base)
    if q.source_pair is None:
        base_roots = np.sort_complex(base_roots)
    # order lassos by the angle of the branch point seen from the base point
    angles = np.angle(base - bps)
    order = np.argsort(angles, kind="stable")
    perms = []
    for k in order:
        c, r = bps[k], small[k]
        u = (base - c) / abs(base - c)
        touch = c + r * u
        tail = _segment_with_detours(base, touch, bps, obstacle, k, settings.loop_points // 2)
        loop = _circle(c, r, float(np.angle(u)), settings.loop_points)
        path = np.array(tail + list(loop[1:]) + tail[::-1][1:], dtype=complex)
        end = tracker.track(path, base_roots)
        perms.append(_permutation(base_roots, end))
    orbit_list = _orbits(n, perms)
    # global loop around all branch points
    big = _circle(0.0, big_r, 0.0, max(64, 8 * len(bps)))
    glob = _permutation(base_roots, tracker.track(big, base_roots))
    label = {i: k for k, g in enumerate(orbit_list) for i in g}
    if any(label[i] != label[glob[i]] for i in range(n)):
        raise OrbitClosureError("global loop does not preserve the lasso orbits")
    prod = tuple(range(n))
    for p in perms:
        prod = _compose(prod, p)
    # real degrees: self-conjugate orbits stand alone, others pair up
    root_sets = [base_roots[g] for g in orbit_list]
    used, real_degs, conj_pairs = set(), [], 0
    for a, ra in enumerate(root_sets):
        if a in used:
            continue
        if _conj_closed(ra, ra):
            real_degs.append(len(ra))
            used.add(a)
            continue
        partner = next((b for b in range(len(root_sets)) if b not in used and b != a
                        and _conj_closed(ra, root_sets[b])), None)
        if partner is None:
            raise OrbitClosureError("orbit without a complex-conjugate partner")
        used.update((a, partner))
        real_degs.append(len(ra) + len(root_sets[partner]))
        conj_pairs += 1
    sizes = tuple(sorted(len(g) for g in orbit_list))
    mults = _orbit_multiplicities(curve, q, base, orbit_list, base_roots, sq.multiplicity_pattern)
    diagnostics = {
        "reduced_degree": n,
        "multiplicity_pattern": list(sq.multiplicity_pattern),
        "loops": len(perms) + 1,
        "steps": tracker.steps,
        "halvings": tracker.halvings,
        "min_ratio_margin": float(tracker.min_ratio_margin),
        "base_point": big_r,
        "global_matches_product": prod == glob,
        "conjugate_pairs": conj_pairs,
    }
    real_sorted = tuple(sorted(real_degs))
    return FactorizationResult(sizes, real_sorted, int(min(real_degs)),
                               tuple(complex(b) for b in bps), mults, diagnostics)


def _conj_closed(a: np.ndarray, b: np.ndarray, tol: float = EPS_ROOT) -> bool:
    if len(a) != len(b):
        return False
    scale = max(1.0, float(np.abs(a).max()))
    left = list(np.conj(a))
    for y in b:
        k = int(np.argmin([abs(y - x) for x in left]))
        if abs(y - left[k]) > tol * scale:
            return False
        left.pop(k)
    return True


def _orbit_multiplicities(curve, q, base, orbits, base_roots, pattern) -> tuple[int, ...]:
    """Multiplicity of each orbit's factor in ``p``, read off the roots at the base point."""
    if all(m == 1 for m in pattern):
        return tuple(1 for _ in orbits)
    full = curve.roots(base)
    scale = max(1.0, float(np.abs(full).max()))
    out = []
    for g in sorted(orbits, key=lambda g: (len(g), g)):
        r = base_roots[g[0]]
        out.append(int(np.sum(np.abs(full - r) < EPS_MULT * scale)))
    return tuple(out)


# -- bound and examples ------------------------------------------------------

def _pair_from_weights(basis: list[np.ndarray], w: np.ndarray):
    e1 = sum(c * b for c, b in zip(w[0], basis))
    e2 = sum(c * b for c, b in zip(w[1], basis))
    return e1, e2


@dataclass(frozen=True, eq=False)
class GeometricBound:
    bound: int
    factorization: FactorizationResult
    pair: tuple[np.ndarray, np.ndarray]
    draws: int


def geometric_lower_bound(obs: ObservableSet, pair_choice: str = "random", seed: int = 0,
                          draws: int = 3, settings: TrackSettings | None = None,
                          ceiling: int | None = None) -> GeometricBound:
    """Best factor-degree bound over a few pencils from the span of ``obs``.

    ``pair_choice="given"`` uses the first two non-identity operators of the
    canonical basis; ``"random"`` draws ``draws`` seeded Gaussian combinations
    and keeps the largest bound.  Drawing stops early once the bound reaches
    ``ceiling`` (default ``D``), e.g. a known compression dimension.
    """
    canon = obs.canonical()
    basis = list(canon.operators[1:])  # identity only shifts x
    dim = obs.dim
    if not basis:
        e1, e2 = np.zeros((dim, dim)), np.zeros((dim, dim))
        fac = factor_by_monodromy(extract_curve(e1, e2), settings)
        return GeometricBound(fac.min_real_degree, fac, (e1, e2), 0)
    basis = [b / np.linalg.norm(b) for b in basis]
    if pair_choice == "given":
        e1 = basis[0]
        e2 = basis[1] if len(basis) > 1 else np.zeros((dim, dim))
        fac = factor_by_monodromy(extract_curve(e1, e2), settings, seed)
        return GeometricBound(fac.min_real_degree, fac, (e1, e2), 1)
    if pair_choice != "random":
        raise ValueError(f"unknown pair choice {pair_choice!r}")
    rng = np.random.default_rng(seed)
    best = None
    failures: list[PathTrackingError] = []
    for k in range(draws):
        w = rng.standard_normal((2, len(basis)))
        e1, e2 = _pair_from_weights(basis, w)
        try:
            fac = factor_by_monodromy(extract_curve(e1, e2), settings, seed + k)
        except PathTrackingError as exc:
            log.warning("draw %d skipped: %s", k, exc)
            failures.append(exc)
            continue
        if best is None or fac.min_real_degree > best.bound:
            best = GeometricBound(fac.min_real_degree, fac, (e1, e2), k + 1)
        if best.bound >= (dim if ceiling is None else min(ceiling, dim)):
            break
    if best is None:
        raise failures[-1]
    return GeometricBound(best.bound, best.factorization, best.pair, draws)


def gen_irreducible_example(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """``A = (J - 1)/2`` and ``B`` with ``i/2`` above and ``-i/2`` below the diagonal.

    ``det[x 1 + A + z B]`` is irreducible for every ``dim``.
    """
    if dim < 1:
        raise ValueError("dimension must be positive")
    a = 0.5 * (np.ones((dim, dim)) - np.eye(dim))
    upper = np.triu(np.ones((dim, dim)), 1)
    b = 0.5j * (upper - upper.T)
    return a.astype(complex), b


def shifted_pencil(x: complex, dim: int) -> np.ndarray:
    """``x 1 + A + i B``: ``x`` on the diagonal, ones below, zeros above."""
    return x * np.eye(dim) + np.tril(np.ones((dim, dim)), -1)


def expansion_first_order(x: complex, dim: int) -> complex:
    """Closed form of ``d/dε det[shifted_pencil(x) + ε B]`` at ``ε = 0``."""
    return -0.5j * (dim * x ** (dim - 1) + (x - 1) ** dim - x ** dim)


@dataclass(frozen=True)
class ExpansionCheck:
    dim: int
    x: complex
    derivative_residual: float
    remainder: tuple[float, float]
    slope: float

    @property
    def ok(self) -> bool:
        return self.derivative_residual <= 1e-6 and (
            max(self.remainder) <= 1e-12 or self.slope > 1.5)


def expansion_self_test(dim: int, x: complex = 0.3, eps=(1e-4, 1e-5)) -> ExpansionCheck:
    """Check the first-order expansion of ``det[Ã(x) + ε B]`` numerically.

    The derivative is estimated by a central difference at the smaller ``ε``;
    the remainder ``det - (x^D + ε c_1)`` must shrink quadratically between
    the two values of ``ε``.
    """
    _, b = gen_irreducible_example(dim)
    base = shifted_pencil(x, dim)
    f = lambda e: np.linalg.det(base + e * b)  # noqa: E731
    c1 = expansion_first_order(x, dim)
    h = min(eps)
    fd = (f(h) - f(-h)) / (2 * h)
    resid = abs(fd - c1)
    rem = tuple(float(abs(f(e) - (x ** dim + e * c1))) for e in eps)
    if min(rem) > 0 and max(rem) > 0:
        slope = float(np.log(rem[0] / rem[1]) / np.log(eps[0] / eps[1]))
    else:
        slope = float("inf")
    return ExpansionCheck(dim, complex(x), float(resid), rem, slope)
