"""Winding-number machinery for umbilical loci.

Zeros of the invariant r (or of any umbilic field such as a covariant
Hessian) are located by per-cell winding numbers on the sample grid, with
adaptive refinement of contour edges through the field's interpolant.
Isolated zeros receive the half-integer index

    iota = -(1/2) * deg(f / |f|)  around a small positively oriented circle,

stored as the exact integer twice_index = 2*iota.  Winding on r itself is
legitimate because multiplying a field by a strictly positive smooth
function (or any constant phase) changes no winding degree, so the branched
square-root representative of the quadratic differential never needs to be
materialized.

Two zero geometries occur in practice.  Generic potentials give isolated
point zeros with nonzero winding.  Potentials with a one-directional
symmetry give an invariant of constant phase vanishing on closed curves;
such zeros carry no winding, so cells are also flagged when edge refinement
runs into an unresolvable phase jump of ~pi (a sign crossing) or into the
zero floor.  Clusters of the second kind are reported with kind "curve" and
winding None.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .cartan import cartan_r, spherical_test
from .errors import (NotPseudoconvex, PhaseStepTooLarge, TotallyDegenerate,
                     TransitionSingular, ZeroOnContour)
from .field import ChartGrid, PeriodicField, TorusLattice

__all__ = [
    "SurfaceSpec",
    "UmbilicRecord",
    "ZeroCluster",
    "QuadraticDifferentialRep",
    "ChartTransition",
    "AuditReport",
    "winding_degree",
    "locate_zero_cells",
    "umbilic_index",
    "poincare_hopf_audit",
    "chart_transition_quadratic",
    "refine_cluster_residual",
    "torus_umbilics",
    "sphere_two_chart_umbilics",
    "SPHERE_HARMONICS",
]

_STEP_LIMIT = 0.5 * np.pi
_CROSSING_STEP = 0.75 * np.pi
DEFAULT_ZERO_FLOOR_REL = 1e-9
DEFAULT_CONTOUR_BUDGET = 2 ** 14


# --------------------------------------------------------------------------
# basic records
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SurfaceSpec:
    kind: str
    genus: int
    lattice: TorusLattice | None = None

    def __post_init__(self):
        if self.kind == "torus":
            if self.genus != 1:
                raise ValueError("a torus has genus 1")
        elif self.kind == "sphere":
            if self.genus != 0:
                raise ValueError("a sphere has genus 0")
        else:
            raise ValueError(f"unknown surface kind {self.kind!r}")

    @property
    def euler(self) -> int:
        return 2 - 2 * self.genus

    @classmethod
    def torus(cls, lattice: TorusLattice) -> "SurfaceSpec":
        return cls("torus", 1, lattice)

    @classmethod
    def sphere(cls) -> "SurfaceSpec":
        return cls("sphere", 0, None)


@dataclass
class UmbilicRecord:
    """One detected umbilical circle (or Hessian umbilic point)."""

    z0: complex
    twice_index: int
    residual: float
    chart_id: str
    contour_radius: float

    @property
    def index_str(self) -> str:
        k = self.twice_index
        if k % 2 == 0:
            return str(k // 2)
        return f"{k}/2"


@dataclass
class ZeroCluster:
    """A merged group of flagged grid cells around one zero component."""

    chart_id: str
    cells: list  # [(i, j, winding-or-None), ...] in grid indices
    winding: int | None
    kind: str  # "point" | "curve"
    center: complex
    center_st: tuple
    min_modulus: float
    crossing_edges: list = dataclass_field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.cells)


@dataclass
class QuadraticDifferentialRep:
    """Chart representative alpha dz (x) dz of the umbilic quadratic
    differential; alpha is proportional to -r by a positive factor, which
    leaves every winding degree unchanged."""

    alpha: object
    chart_id: str

    @classmethod
    def from_invariant(cls, invariant, chart_id: str) -> "QuadraticDifferentialRep":
        return cls(alpha=invariant.r.scale(-1.0), chart_id=chart_id)


@dataclass
class ChartTransition:
    """Holomorphic coordinate change w -> z(w) with its derivative."""

    map: object
    derivative: object
    name: str = "transition"


@dataclass
class AuditReport:
    surface: SurfaceSpec
    records: list
    sum_twice_index: int
    expected_twice_index: int
    passed: bool
    discrepancy: int
    details: dict = dataclass_field(default_factory=dict)


# --------------------------------------------------------------------------
# winding of explicit loops
# --------------------------------------------------------------------------

def _wrap(a):
    """Wrap phase increments to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a), 2.0 * np.pi)


def winding_degree(loop_values, zero_floor: float | None = None) -> int:
    """Topological degree of a closed loop of nonzero complex values.

    The loop is the ordered list of samples; the closing step from the last
    value back to the first is included.  Consecutive wrapped phase steps
    must stay below pi/2 in magnitude (PhaseStepTooLarge otherwise, and the
    caller should refine), and no value may fall below the zero floor
    (default 1e-9 times the largest modulus).
    """
    vals = np.asarray(list(loop_values), dtype=complex)
    if vals.size == 0:
        raise ValueError("winding_degree needs a nonempty loop")
    mods = np.abs(vals)
    if zero_floor is None:
        zero_floor = DEFAULT_ZERO_FLOOR_REL * float(mods.max())
    if float(mods.min()) <= zero_floor:
        raise ZeroOnContour(
            f"loop value with modulus {float(mods.min()):.3e} at/below floor "
            f"{zero_floor:.3e}")
    phases = np.angle(vals)
    steps = _wrap(np.diff(np.concatenate([phases, phases[:1]])))
    worst = float(np.max(np.abs(steps)))
    if worst >= _STEP_LIMIT:
        raise PhaseStepTooLarge(
            f"wrapped phase step {worst:.3f} >= pi/2; refine the contour")
    total = float(steps.sum()) / (2.0 * np.pi)
    deg = int(round(total))
    if abs(total - deg) > 1e-6:
        raise PhaseStepTooLarge(
            f"phase increments sum to {total:.3e} turns, not an integer")
    return deg


# --------------------------------------------------------------------------
# edge refinement
# --------------------------------------------------------------------------

class _EdgeCrossing(Exception):
    """Internal: an edge runs through (or indistinguishably close to) the
    zero set; carries the parameter of the closest approach."""

    def __init__(self, p, modulus):
        self.p = float(p)
        self.modulus = float(modulus)
        super().__init__(f"crossing near p={p:.6f}, |f|={modulus:.3e}")


def _refine_edge(eval_line, v0, v1, floor, max_depth=12):
    """Accumulate wrapped phase increments along one straight edge.

    eval_line maps parameters in [0,1] to field values.  Segments whose
    phase step is pi/2 or larger are bisected; a persistent near-pi jump on
    a tiny segment, or a sample at the zero floor, raises _EdgeCrossing.
    Returns the total phase increment.
    """
    min_len = 0.5 ** max_depth
    total = 0.0
    stack = [(0.0, 1.0, v0, v1)]
    while stack:
        pa, pb, va, vb = stack.pop()
        ma, mb = abs(va), abs(vb)
        if min(ma, mb) <= floor:
            raise _EdgeCrossing(pa if ma <= mb else pb, min(ma, mb))
        step = float(_wrap(np.angle(vb) - np.angle(va)))
        if abs(step) < _STEP_LIMIT:
            total += step
            continue
        if pb - pa <= min_len:
            if abs(step) >= _CROSSING_STEP:
                raise _EdgeCrossing(0.5 * (pa + pb), min(ma, mb))
            raise PhaseStepTooLarge(
                f"edge phase step {step:.3f} unresolved at depth {max_depth}")
        pm = 0.5 * (pa + pb)
        vm = complex(eval_line(np.array([pm]))[0])
        stack.append((pm, pb, vm, vb))
        stack.append((pa, pm, va, vm))
    return total


def _edge_min_modulus(eval_line, lo=0.0, hi=1.0, iters=80):
    """Golden-section minimum of |f| along an edge segment (the modulus is
    V-shaped near a simple crossing)."""
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - gr * (b - a)
    d = a + gr * (b - a)
    fc = abs(complex(eval_line(np.array([c]))[0]))
    fd = abs(complex(eval_line(np.array([d]))[0]))
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = abs(complex(eval_line(np.array([c]))[0]))
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = abs(complex(eval_line(np.array([d]))[0]))
    p = 0.5 * (a + b)
    return p, abs(complex(eval_line(np.array([p]))[0]))


# --------------------------------------------------------------------------
# grid geometry adapters
# --------------------------------------------------------------------------

class _Geometry:
    """Uniform view of a sampled field for the cell-winding pass."""

    def __init__(self, f):
        self.field = f
        if isinstance(f, PeriodicField):
            self.periodic = True
            self.n = f.n
            self.ncells = f.n
            s = np.arange(f.n) / f.n
            self.ax0, self.ax1 = s, s
            self.h0 = self.h1 = 1.0 / f.n
            self.orientation = f.lattice.orientation
            self.chart_id = "torus"
        elif isinstance(f, ChartGrid):
            self.periodic = False
            self.n = f.n
            self.ncells = f.n - 1
            x = f.axis()
            self.ax0, self.ax1 = x, x
            self.h0 = self.h1 = f.spacing
            self.orientation = 1
            self.chart_id = f.chart_id
        else:
            raise TypeError(f"cannot locate zeros on {type(f).__name__}")

    def corner_value(self, i, j):
        return self.field.values[i % self.n, j % self.n]

    def corner_st(self, i, j):
        if self.periodic:
            return i / self.n, j / self.n
        return self.ax0[i], self.ax1[j]

    def st_to_z(self, a, b):
        if self.periodic:
            return self.field.lattice.st_to_z(a, b)
        return a + 1j * b

    def edge_line(self, i, j, kind):
        """Callable p in [0,1] -> field values along the edge starting at
        corner (i, j) toward +axis0 (kind 'h') or +axis1 (kind 'v')."""
        a0, b0 = self.corner_st(i, j)
        if kind == "h":
            a1, b1 = self.corner_st(i + 1, j)
        else:
            a1, b1 = self.corner_st(i, j + 1)
        da, db = a1 - a0, b1 - b0
        f = self.field

        def line(p):
            p = np.asarray(p, dtype=float)
            return f.evaluate_st(a0 + p * da, b0 + p * db)

        return line


# --------------------------------------------------------------------------
# cell winding localization
# --------------------------------------------------------------------------

def locate_zero_cells(f, *, zero_floor_rel: float = DEFAULT_ZERO_FLOOR_REL,
                      region_radius: float | None = None,
                      max_depth: int = 12):
    """Flag grid cells whose boundary winds around a zero (or crosses the
    zero set), merge neighbors, and return the clusters.

    TotallyDegenerate is raised when the field vanishes identically or more
    than a quarter of the considered samples sit below the zero floor; such
    inputs are locally spherical and should be screened with
    :func:`umbilic.cartan.spherical_test` instead.
    """
    geom = _Geometry(f)
    V = f.values
    n = geom.n

    if geom.periodic:
        consider = np.ones((n, n), dtype=bool)
    else:
        consider = f.mask(region_radius)
    sup = float(np.max(np.abs(V[consider]))) if consider.any() else 0.0
    if sup == 0.0:
        raise TotallyDegenerate("field vanishes identically on the region")
    floor = zero_floor_rel * sup
    below = np.abs(V) <= floor
    if float(below[consider].mean()) > 0.25:
        raise TotallyDegenerate(
            f"{float(below[consider].mean()):.0%} of samples below the zero floor")

    P = np.angle(V)
    M = np.abs(V)
    if geom.periodic:
        dH = _wrap(np.roll(P, -1, axis=0) - P)
        dV = _wrap(np.roll(P, -1, axis=1) - P)
        badH = (np.abs(dH) >= _STEP_LIMIT) | (M <= floor) | (np.roll(M, -1, axis=0) <= floor)
        badV = (np.abs(dV) >= _STEP_LIMIT) | (M <= floor) | (np.roll(M, -1, axis=1) <= floor)
    else:
        dH = _wrap(P[1:, :] - P[:-1, :])
        dV = _wrap(P[:, 1:] - P[:, :-1])
        badH = (np.abs(dH) >= _STEP_LIMIT) | (M[1:, :] <= floor) | (M[:-1, :] <= floor)
        badV = (np.abs(dV) >= _STEP_LIMIT) | (M[:, 1:] <= floor) | (M[:, :-1] <= floor)

    nc = geom.ncells
    if geom.periodic:
        cellH0 = dH
        cellH1 = np.roll(dH, -1, axis=1)
        cellV0 = dV
        cellV1 = np.roll(dV, -1, axis=0)
        cbadH0, cbadH1 = badH, np.roll(badH, -1, axis=1)
        cbadV0, cbadV1 = badV, np.roll(badV, -1, axis=0)
        cell_ok = np.ones((nc, nc), dtype=bool)
    else:
        cellH0 = dH[:, :-1]
        cellH1 = dH[:, 1:]
        cellV0 = dV[:-1, :]
        cellV1 = dV[1:, :]
        cbadH0, cbadH1 = badH[:, :-1], badH[:, 1:]
        cbadV0, cbadV1 = badV[:-1, :], badV[1:, :]
        cell_ok = (consider[:-1, :-1] & consider[1:, :-1]
                   & consider[:-1, 1:] & consider[1:, 1:])

    wsum = cellH0 + cellV1 - cellH1 - cellV0
    cell_bad = (cbadH0 | cbadH1 | cbadV0 | cbadV1) & cell_ok
    windings = np.where(cell_ok, np.round(wsum / (2.0 * np.pi)), 0.0).astype(int)
    windings[cell_bad] = 0

    # refine edges of bad cells; share results between adjacent cells
    edge_cache: dict = {}

    def refined_edge(i, j, kind):
        if geom.periodic:
            key = (kind, i % n, j % n)
        else:
            key = (kind, i, j)
        if key in edge_cache:
            return edge_cache[key]
        line = geom.edge_line(*key[1:], kind)
        v0 = complex(line(np.array([0.0]))[0])
        v1 = complex(line(np.array([1.0]))[0])
        try:
            res = ("ok", _refine_edge(line, v0, v1, floor, max_depth=max_depth))
        except _EdgeCrossing as xc:
            res = ("crossing", (xc.p, xc.modulus))
        edge_cache[key] = res
        return res

    crossing_cells: dict = {}
    bad_idx = np.argwhere(cell_bad)
    for i, j in map(tuple, bad_idx):
        edges = [("h", i, j), ("v", i + 1, j), ("h", i, j + 1), ("v", i, j)]
        total = 0.0
        crossing = []
        for kind, ei, ej in edges:
            status, payload = refined_edge(ei, ej, kind)
            if status == "crossing":
                crossing.append(((kind, ei, ej), payload))
            else:
                sign = 1.0 if (kind, ei, ej) in (("h", i, j), ("v", i + 1, j)) else -1.0
                total += sign * payload
        if crossing:
            crossing_cells[(i, j)] = crossing
            windings[i, j] = 0
        else:
            windings[i, j] = int(round(total / (2.0 * np.pi)))

    windings *= geom.orientation

    flagged = {(int(i), int(j)) for i, j in np.argwhere(windings != 0)}
    flagged |= set(crossing_cells)
    if not flagged:
        return []

    clusters_cells = _label_clusters(sorted(flagged), nc, geom.periodic)

    def ring_winding(group):
        """Winding around the one-cell-expanded bounding box of a cluster,
        for clusters whose own cells touch the zero set."""
        i0 = min(i for i, _ in group) - 1
        i1 = max(i for i, _ in group) + 1
        j0 = min(j for _, j in group) - 1
        j1 = max(j for _, j in group) + 1
        if geom.periodic:
            if (i1 - i0 + 2) > nc or (j1 - j0 + 2) > nc:
                return None
        else:
            if i0 < 0 or j0 < 0 or i1 + 1 > nc or j1 + 1 > nc:
                return None
        inside = {(i % nc if geom.periodic else i, j % nc if geom.periodic else j)
                  for i in range(i0, i1 + 1) for j in range(j0, j1 + 1)}
        own = {(i % nc if geom.periodic else i, j % nc if geom.periodic else j)
               for i, j in group}
        if any(c in flagged and c not in own for c in inside):
            return None
        total = 0.0
        try:
            for i in range(i0, i1 + 1):
                st, val = refined_edge(i, j0, "h")
                if st == "crossing":
                    return None
                total += val
                st, val = refined_edge(i, j1 + 1, "h")
                if st == "crossing":
                    return None
                total -= val
            for j in range(j0, j1 + 1):
                st, val = refined_edge(i1 + 1, j, "v")
                if st == "crossing":
                    return None
                total += val
                st, val = refined_edge(i0, j, "v")
                if st == "crossing":
                    return None
                total -= val
        except PhaseStepTooLarge:
            return None
        return geom.orientation * int(round(total / (2.0 * np.pi)))

    clusters = []
    for group in clusters_cells:
        cells = [(i, j, (None if (i % nc, j % nc) in crossing_cells
                         else int(windings[i % nc, j % nc]))) for i, j in group]
        has_crossing = any(w is None for _, _, w in cells)
        wrapping = _cluster_wraps(group, nc) if geom.periodic else False
        winding = None
        if not has_crossing and not wrapping:
            winding = int(sum(w for _, _, w in cells))
        elif not wrapping:
            winding = ring_winding(group)
        kind = "point" if winding is not None else "curve"
        # representative corner: minimum modulus over member cell corners
        best = None
        for i, j in group:
            for ci, cj in ((i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)):
                if geom.periodic:
                    m = float(M[ci % n, cj % n])
                elif 0 <= ci < n and 0 <= cj < n:
                    m = float(M[ci, cj])
                else:
                    continue
                if best is None or m < best[0]:
                    best = (m, ci, cj)
        _, bi, bj = best
        a, b = geom.corner_st(bi, bj)
        if geom.periodic:
            a, b = a % 1.0, b % 1.0
        center = complex(geom.st_to_z(a, b))
        xing = []
        for i, j in group:
            xing.extend(crossing_cells.get((i % nc, j % nc), []))
        clusters.append(ZeroCluster(
            chart_id=geom.chart_id, cells=cells, winding=winding, kind=kind,
            center=center, center_st=(a, b), min_modulus=best[0],
            crossing_edges=xing))
    clusters.sort(key=lambda c: (c.center.real, c.center.imag))
    return clusters


def _label_clusters(cells, nc, periodic):
    """Group flagged cells lying within Chebyshev distance 2 (so separate
    clusters keep at least one clean cell ring between them); periodic
    labeling tracks unwrapped offsets so wrapped clusters stay contiguous."""
    cellset = set(cells)
    seen = set()
    groups = []
    offs = [(di, dj) for di in (-2, -1, 0, 1, 2) for dj in (-2, -1, 0, 1, 2)
            if (di, dj) != (0, 0)]
    for start in cells:
        if start in seen:
            continue
        group = {}
        queue = [(start, start)]
        seen.add(start)
        group[start] = start
        while queue:
            (ci, cj), (ui, uj) = queue.pop()
            for di, dj in offs:
                if periodic:
                    nb = ((ci + di) % nc, (cj + dj) % nc)
                else:
                    nb = (ci + di, cj + dj)
                if nb in cellset and nb not in seen:
                    seen.add(nb)
                    unwrapped = (ui + di, uj + dj)
                    group[nb] = unwrapped
                    queue.append((nb, unwrapped))
        groups.append(sorted(group.values()))
    return groups


def _cluster_wraps(group, nc):
    i0 = min(i for i, _ in group)
    i1 = max(i for i, _ in group)
    j0 = min(j for _, j in group)
    j1 = max(j for _, j in group)
    return (i1 - i0 + 3 >= nc) or (j1 - j0 + 3 >= nc)


# --------------------------------------------------------------------------
# index of an isolated zero
# --------------------------------------------------------------------------

def umbilic_index(f, z0: complex, radius: float, *,
                  n0: int = 64, budget: int = DEFAULT_CONTOUR_BUDGET,
                  zero_floor_rel: float = DEFAULT_ZERO_FLOOR_REL,
                  sup_hint: float | None = None) -> int:
    """twice_index = -(degree of f/|f|) on the positively oriented circle
    of the given radius about z0, doubling the number of contour points
    until every wrapped phase step is below pi/2 (budget 2^14 points)."""
    if radius <= 0.0:
        raise ValueError("contour radius must be positive")
    sup = float(sup_hint) if sup_hint is not None else f.sup_norm()
    floor = zero_floor_rel * sup
    m = int(n0)
    while True:
        theta = 2.0 * np.pi * np.arange(m) / m
        pts = z0 + radius * np.exp(1j * theta)
        vals = np.asarray(f.evaluate_at(pts))
        mods = np.abs(vals)
        if float(mods.min()) <= floor:
            raise ZeroOnContour(
                f"contour value {float(mods.min()):.3e} at/below floor {floor:.3e} "
                f"(radius {radius:.3e} about {z0:.6f})")
        steps = _wrap(np.diff(np.angle(np.concatenate([vals, vals[:1]]))))
        if float(np.max(np.abs(steps))) < _STEP_LIMIT:
            deg = winding_degree(vals, zero_floor=floor)
            return -deg
        if 2 * m > budget:
            raise PhaseStepTooLarge(
                f"contour about {z0:.6f} not resolved within {budget} points")
        m *= 2



# --------------------------------------------------------------------------
# audits and transitions
# --------------------------------------------------------------------------

def poincare_hopf_audit(records, surface: SurfaceSpec) -> AuditReport:
    """Exact integer audit of sum(2 iota) against 2 chi(X)."""
    records = list(records)
    total = int(sum(r.twice_index for r in records))
    expected = 2 * surface.euler
    return AuditReport(
        surface=surface,
        records=records,
        sum_twice_index=total,
        expected_twice_index=expected,
        passed=(total == expected),
        discrepancy=total - expected,
    )


def chart_transition_quadratic(alpha, transition: ChartTransition, *,
                               target_chart_id: str, target_radius: float,
                               target_n: int) -> ChartGrid:
    """Pull a quadratic-differential coefficient back through w -> z(w):
    alpha_tilde(w) = alpha(z(w)) * (dz/dw)^2, resampled on the target grid.

    alpha may be a callable (evaluated exactly) or a sampled ChartGrid
    (bicubic interpolation inside its square; targets mapping outside are
    masked invalid).
    """
    x = np.linspace(-target_radius, target_radius, target_n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = X + 1j * Y
    with np.errstate(divide="ignore", invalid="ignore"):
        Z = np.asarray(transition.map(W), dtype=complex)
        DZ = np.asarray(transition.derivative(W), dtype=complex)
    finite = np.isfinite(Z) & np.isfinite(DZ)
    inside = np.abs(W) <= target_radius
    dzmax = float(np.max(np.abs(DZ[finite]))) if finite.any() else 0.0
    singular = finite & inside & (np.abs(DZ) <= 1e-13 * max(dzmax, 1.0))
    if singular.any():
        raise TransitionSingular(
            f"dz/dw vanishes at {int(singular.sum())} target point(s)")
    valid = finite.copy()
    out = np.zeros_like(W, dtype=complex)
    if callable(alpha):
        out[valid] = np.asarray(alpha(Z[valid]), dtype=complex)
    elif isinstance(alpha, ChartGrid):
        r = alpha.radius
        valid &= (np.abs(Z.real) <= r) & (np.abs(Z.imag) <= r)
        if valid.any():
            out[valid] = alpha.evaluate_at(Z[valid])
    else:
        raise TypeError("alpha must be callable or a ChartGrid")
    out[valid] *= DZ[valid] ** 2
    return ChartGrid(target_chart_id, target_radius, out, valid=valid)


# --------------------------------------------------------------------------
# zero refinement helpers
# --------------------------------------------------------------------------

def refine_cluster_residual(f, cluster: ZeroCluster) -> float:
    """Polished |f| at the cluster's zero, relative to sup|f|.

    Point clusters are polished by the bounded pattern search; curve
    clusters by golden-section along their best sign-crossing edge (the
    modulus is V-shaped across a simple crossing).
    """
    geom = _Geometry(f)
    sup = f.sup_norm()
    if cluster.kind == "point" or not cluster.crossing_edges:
        cell = geom.h0 * (1.0 + (abs(f.lattice.omega) if geom.periodic else 0.0))
        _, best = _refine_zero(f, cluster.center, 0.5 * geom.h0,
                               max_move=_cluster_extent(cluster, cell) + 1.5 * cell)
        return best / sup
    (kind, ei, ej), (p, _) = min(cluster.crossing_edges, key=lambda e: e[1][1])
    if geom.periodic:
        ei, ej = ei % geom.n, ej % geom.n
    line = geom.edge_line(ei, ej, kind)
    lo = max(0.0, p - 2.0 ** -9)
    hi = min(1.0, p + 2.0 ** -9)
    _, best = _edge_min_modulus(line, lo, hi)
    return best / sup


_REFINE_OFFSETS = np.array([complex(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)])


def _refine_zero(f, z_start: complex, step: float, max_move: float):
    """Polish a zero estimate by a bounded 3x3 pattern search on |f| of the
    interpolant.  Deterministic, monotone in |f|, and confined to within
    max_move of the start so neighboring zeros cannot capture it."""
    z = complex(z_start)
    best = float(np.abs(f.evaluate_at(np.array([z]))[0]))
    for _ in range(64):
        pts = z + step * _REFINE_OFFSETS
        mods = np.abs(f.evaluate_at(pts))
        k = int(np.argmin(mods))
        if float(mods[k]) < best and abs(pts[k] - z_start) <= max_move:
            z = complex(pts[k])
            best = float(mods[k])
            if _REFINE_OFFSETS[k] == 0:
                step *= 0.5
        else:
            step *= 0.5
        if step < 1e-14 * max(1.0, abs(z_start)):
            break
    return z, best


def _cluster_extent(cluster: ZeroCluster, cell_dz: float) -> float:
    ii = [i for i, _, _ in cluster.cells]
    jj = [j for _, j, _ in cluster.cells]
    span = max(max(ii) - min(ii), max(jj) - min(jj)) + 1
    return span * cell_dz


# --------------------------------------------------------------------------
# torus pipeline
# --------------------------------------------------------------------------

def torus_umbilics(u: PeriodicField, *, form: str = "p_form",
                   zero_floor_rel: float = DEFAULT_ZERO_FLOOR_REL,
                   spherical_tol: float = 1e-9,
                   check_resolution: bool = True):
    """Locate the umbilical circles of the circle bundle with potential u
    over the torus: compute r, find zero clusters, refine and index each,
    and audit the index sum against 2 chi = 0.

    Returns (records, audit, clusters).
    """
    if spherical_test(u, spherical_tol, check_resolution=check_resolution):
        raise TotallyDegenerate("potential has constant curvature; r vanishes identically")
    r = cartan_r(u, form, check_resolution=check_resolution).r
    clusters = locate_zero_cells(r, zero_floor_rel=zero_floor_rel)
    bad = [c for c in clusters if c.kind != "point"]
    if bad:
        raise TotallyDegenerate(
            f"{len(bad)} zero cluster(s) are not isolated points; "
            "the index audit requires isolated zeros")
    lattice = u.lattice
    n = u.n
    cell_dz = (1.0 + abs(lattice.omega)) / n
    records = []
    sup = r.sup_norm()
    refined = [_refine_zero(r, c.center, 0.5 / n,
                            max_move=0.75 * _cluster_extent(c, cell_dz) + 1.25 * cell_dz)
               for c in clusters]
    for idx, c in enumerate(clusters):
        z0, resid = refined[idx]
        # the cluster's boundary winding is the index (degree additivity);
        # a circle contour cross-checks it whenever the zero is comfortably
        # isolated from its neighbors
        twice = -c.winding
        if twice == 0:
            continue
        base = max(2.5 * cell_dz, 1.25 * _cluster_extent(c, cell_dz))
        sep = min((lattice.torus_distance(z0, refined[k][0])
                   for k in range(len(clusters)) if k != idx), default=np.inf)
        radius = min(base, 0.35 * sep) if np.isfinite(sep) else base
        _cross_check_index(r, z0, radius, twice, zero_floor_rel, sup,
                           isolated=(sep > 3.0 * base))
        records.append(UmbilicRecord(z0=z0, twice_index=twice,
                                     residual=resid / sup,
                                     chart_id="torus", contour_radius=radius))
    audit = poincare_hopf_audit(records, SurfaceSpec.torus(lattice))
    return records, audit, clusters


def _cross_check_index(r, z0, radius, twice, zero_floor_rel, sup, isolated):
    """Circle-contour recomputation of an index; only attempted when the
    zero is comfortably isolated, and loud when it disagrees."""
    if not isolated:
        return None
    try:
        circle = umbilic_index(r, z0, radius, zero_floor_rel=zero_floor_rel,
                               sup_hint=sup)
    except (ZeroOnContour, PhaseStepTooLarge):
        return None
    if circle != twice:
        raise PhaseStepTooLarge(
            f"index cross-check mismatch at {z0:.6f}: cells give {twice}, "
            f"circle of radius {radius:.3e} gives {circle}")
    return circle


# --------------------------------------------------------------------------
# sphere pipeline (two stereographic charts)
# --------------------------------------------------------------------------

# Smooth perturbation harmonics given in both stereographic charts
# (w = 1/z); each is a bounded smooth function on the whole sphere.
SPHERE_HARMONICS = {
    "re_z": (lambda z: z.real / (1.0 + np.abs(z) ** 2),
             lambda w: w.real / (1.0 + np.abs(w) ** 2)),
    "im_z": (lambda z: z.imag / (1.0 + np.abs(z) ** 2),
             lambda w: -w.imag / (1.0 + np.abs(w) ** 2)),
    "z_axis": (lambda z: (np.abs(z) ** 2 - 1.0) / (np.abs(z) ** 2 + 1.0),
               lambda w: (1.0 - np.abs(w) ** 2) / (np.abs(w) ** 2 + 1.0)),
    "re_z2": (lambda z: (z ** 2).real / (1.0 + np.abs(z) ** 2) ** 2,
              lambda w: (w ** 2).real / (1.0 + np.abs(w) ** 2) ** 2),
    "im_z2": (lambda z: (z ** 2).imag / (1.0 + np.abs(z) ** 2) ** 2,
              lambda w: -(w ** 2).imag / (1.0 + np.abs(w) ** 2) ** 2),
}


def _sphere_point(chart_id: str, c: complex) -> np.ndarray:
    """Unit vector on S^2 for a chart coordinate (chart 2 covers z = 1/w)."""
    if chart_id == "chart2":
        if c == 0:
            return np.array([0.0, 0.0, 1.0])
        c = 1.0 / c
    d = 1.0 + abs(c) ** 2
    return np.array([2.0 * c.real / d, 2.0 * c.imag / d, (abs(c) ** 2 - 1.0) / d])


def sphere_metric_potentials(degree: int, perturbations, *,
                             chart_radius: float, chart_n: int):
    """Potentials u on both charts for
    e^{u} = degree * (1+|z|^2)^{-2} * (1 + sum eps * p); the chart-2 density
    picks up the |dz/dw|^2 factor, which reproduces the same functional form."""
    if degree < 1:
        raise ValueError("bundle degree must be a positive integer")
    perts = [(str(h), float(e)) for h, e in perturbations]
    for h, _ in perts:
        if h not in SPHERE_HARMONICS:
            raise ValueError(f"unknown harmonic {h!r}; available: {sorted(SPHERE_HARMONICS)}")

    def build(chart_idx, chart_id):
        def u_fn(Z):
            p = np.zeros(Z.shape, dtype=float)
            for h, e in perts:
                p = p + e * SPHERE_HARMONICS[h][chart_idx](Z)
            if np.min(1.0 + p) <= 0.0:
                raise NotPseudoconvex("perturbation makes the metric density nonpositive")
            return np.log(degree) - 2.0 * np.log1p(np.abs(Z) ** 2) + np.log1p(p)
        return ChartGrid.from_function(chart_id, chart_radius, chart_n, u_fn, real_tag=True)

    return build(0, "chart1"), build(1, "chart2")


def sphere_two_chart_umbilics(degree: int, perturbations, *,
                              chart_n: int = 256, chart_radius: float = 1.6,
                              locate_radius: float = 1.25,
                              form: str = "p_form",
                              spherical_tol: float = 1e-6,
                              zero_floor_rel: float = DEFAULT_ZERO_FLOOR_REL,
                              match_distance: float = 0.08):
    """Two-chart sphere pipeline: invariant per chart, zero clusters and
    indices per chart, cross-chart deduplication, and the index audit
    against 2 chi = 4.

    Ownership convention: a zero with |z| <= 1 belongs to chart 1 and one
    with |w| < 1 to chart 2.  A zero seen by both charts (including zeros
    pinned to the overlap circle |z| = 1) is reported exactly once, by the
    owner of its best coordinate estimate, with the other chart's winding
    kept as a stability check.
    """
    u1, u2 = sphere_metric_potentials(degree, perturbations,
                                      chart_radius=chart_radius, chart_n=chart_n)
    if spherical_test(u1, spherical_tol, region_radius=1.0):
        raise TotallyDegenerate(
            "constant-curvature sphere metric: r vanishes identically, "
            "no isolated umbilical circles")
    charts = {}
    for cid, u in (("chart1", u1), ("chart2", u2)):
        r = cartan_r(u, form).r
        clusters = locate_zero_cells(r, zero_floor_rel=zero_floor_rel,
                                     region_radius=locate_radius)
        charts[cid] = (r, clusters)

    # refine and index every cluster in its own chart
    entries = []
    for cid, (r, clusters) in charts.items():
        sup = r.sup_norm(locate_radius)
        h = 2.0 * chart_radius / (chart_n - 1)
        for c in clusters:
            if c.kind != "point":
                raise TotallyDegenerate(
                    f"{cid}: zero cluster near {c.center:.4f} is not isolated")
            z0, resid = _refine_zero(r, c.center, 0.5 * h,
                                     max_move=0.75 * _cluster_extent(c, h) + 1.25 * h)
            twice = -c.winding
            if twice == 0:
                continue
            others = [o for o in clusters if o is not c]
            sep = min((abs(z0 - o.center) for o in others), default=np.inf)
            base = max(3.0 * h, 1.25 * _cluster_extent(c, h))
            radius = min(base, 0.3 * sep) if np.isfinite(sep) else base
            _cross_check_index(r, z0, radius, twice, zero_floor_rel, sup,
                               isolated=(sep > 3.0 * base))
            entries.append({
                "chart": cid, "z": z0, "twice": twice,
                "residual": resid / sup, "radius": radius,
                "sphere_point": _sphere_point(cid, z0),
            })

    # cross-chart merge
    merged = []
    used = [False] * len(entries)
    order = sorted(range(len(entries)), key=lambda k: (entries[k]["chart"],
                                                       entries[k]["z"].real,
                                                       entries[k]["z"].imag))
    for a in order:
        if used[a]:
            continue
        group = [entries[a]]
        used[a] = True
        for b in order:
            if used[b]:
                continue
            d = float(np.linalg.norm(entries[a]["sphere_point"] - entries[b]["sphere_point"]))
            if d <= match_distance:
                group.append(entries[b])
                used[b] = True
        merged.append(group)

    records = []
    stability = []
    for group in merged:
        # best-conditioned estimate: smallest chart coordinate modulus
        best = min(group, key=lambda e: abs(e["z"]))
        if best["chart"] == "chart1":
            z_est = best["z"]
        else:
            z_est = np.inf if best["z"] == 0 else 1.0 / best["z"]
        owner_id = "chart1" if (np.isfinite(z_est) and abs(z_est) <= 1.0) else "chart2"
        owner = next((e for e in group if e["chart"] == owner_id), best)
        twices = {e["twice"] for e in group}
        stability.append({
            "charts": sorted(e["chart"] for e in group),
            "twice_indices": sorted(e["twice"] for e in group),
            "stable": len(twices) == 1,
        })
        records.append(UmbilicRecord(
            z0=owner["z"], twice_index=owner["twice"], residual=owner["residual"],
            chart_id=owner["chart"], contour_radius=owner["radius"]))

    records.sort(key=lambda rec: (rec.chart_id, rec.z0.real, rec.z0.imag))
    audit = poincare_hopf_audit(records, SurfaceSpec.sphere())
    audit.details["chart_stability"] = stability
    audit.details["all_chart_entries"] = [
        {"chart": e["chart"], "z": e["z"], "twice": e["twice"]} for e in entries]
    return records, audit
