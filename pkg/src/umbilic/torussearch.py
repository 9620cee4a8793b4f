"""Torus-specific machinery: the symmetry obstruction, Chern normalization,
and a derivative-free search for potentials with nonvanishing invariant.

Whether a doubly periodic potential u with Pu != 0 everywhere exists is an
open question; this module provides evidence-gathering tools only and never
interprets a search outcome as an answer.  What IS a theorem: if u admits a
constant symmetry direction Y with Yu = 0 (and Y has compact leaves), then
Pu must vanish somewhere.  The proof is constructive enough to audit
numerically: with v = e^{-u} D Dbar u, a transverse constant direction Y'
and psi = e^{-u} Y'v, one has e^{-2u} Pu = b^2 Y'psi for a constant b, and
the periodic function psi attains extrema where Y'psi changes sign.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy.optimize import minimize

from .cartan import cartan_r
from .errors import SymmetryViolated, TotallyDegenerate
from .field import PeriodicField, TorusLattice
from .index import locate_zero_cells, refine_cluster_residual

__all__ = [
    "TrigPotential",
    "SymmetryDirection",
    "SearchConfig",
    "SearchReport",
    "ObstructionReport",
    "min_modulus_objective",
    "symmetric_obstruction_check",
    "torus_search",
    "chern_number",
    "chern_normalize",
]

_HERM_TOL = 1e-12


@dataclass
class TrigPotential:
    """Real trigonometric potential sum c_{jk} exp(2 pi i (j s + k t)) on a
    torus lattice; coefficients must satisfy c_{-j,-k} = conj(c_{jk})."""

    lattice: TorusLattice
    modes: dict

    def __post_init__(self):
        clean = {}
        for (j, k), c in self.modes.items():
            clean[(int(j), int(k))] = complex(c)
        self.modes = clean
        scale = max([abs(c) for c in clean.values()] + [1.0])
        for (j, k), c in clean.items():
            cc = clean.get((-j, -k))
            if cc is None or abs(np.conj(cc) - c) > _HERM_TOL * scale:
                raise ValueError(f"mode ({j},{k}) breaks the reality symmetry")
        dc = clean.get((0, 0), 0.0 + 0.0j)
        if abs(dc.imag) > _HERM_TOL * scale:
            raise ValueError("constant mode must be real")

    @classmethod
    def from_half_modes(cls, lattice: TorusLattice, half: dict) -> "TrigPotential":
        """Build from coefficients on the half-space k > 0 or (k = 0, j > 0),
        plus an optional real (0, 0) entry; conjugates are filled in."""
        modes = {}
        for (j, k), c in half.items():
            c = complex(c)
            if (j, k) == (0, 0):
                modes[(0, 0)] = complex(c.real)
            else:
                modes[(j, k)] = c
                modes[(-j, -k)] = np.conj(c)
        return cls(lattice, modes)

    @property
    def mode_budget(self) -> int:
        return max((max(abs(j), abs(k)) for (j, k) in self.modes), default=0)

    def to_field(self, n: int) -> PeriodicField:
        """Exact band-limited samples through spectral placement."""
        C = np.zeros((n, n), dtype=complex)
        for (j, k), c in sorted(self.modes.items()):
            if abs(j) >= n // 2 or abs(k) >= n // 2:
                raise ValueError(f"mode ({j},{k}) does not fit on an n={n} grid")
            C[j % n, k % n] += c * n * n
        vals = np.fft.ifft2(C)
        return PeriodicField(self.lattice, vals, real_tag=True)

    def shifted(self, c: float) -> "TrigPotential":
        modes = dict(self.modes)
        modes[(0, 0)] = modes.get((0, 0), 0.0) + float(c)
        return TrigPotential(self.lattice, modes)

    def sup_norm(self, n: int = 64) -> float:
        need = 2 * self.mode_budget + 2
        n = max(n, need + need % 2, 8)
        return self.to_field(n).sup_norm()


@dataclass(frozen=True)
class SymmetryDirection:
    """Constant direction Y = alpha d/dx + beta d/dy on the plane."""

    alpha: float
    beta: float

    def __post_init__(self):
        if self.alpha == 0.0 and self.beta == 0.0:
            raise ValueError("symmetry direction must be nonzero")

    def perpendicular(self) -> "SymmetryDirection":
        return SymmetryDirection(-self.beta, self.alpha)


def directional_derivative(f: PeriodicField, alpha: float, beta: float,
                           tail_tol=None) -> PeriodicField:
    """(alpha d/dx + beta d/dy) f via d/dx = D + Dbar, d/dy = i (D - Dbar)."""
    df = f.derivative("D", tail_tol=tail_tol)
    dbf = f.derivative("Dbar", tail_tol=tail_tol)
    fx = df.add(dbf)
    fy = df.add(dbf.scale(-1.0)).scale(1j)
    return fx.scale(alpha).add(fy.scale(beta))


# --------------------------------------------------------------------------
# objective
# --------------------------------------------------------------------------

def min_modulus_objective(u: TrigPotential, grid_n: int, *,
                          degenerate_floor: float = 1e-12,
                          zero_ratio: float = 1e-9,
                          form: str = "p_form") -> float:
    """Scale-free nonvanishing score min|Pu| / max|Pu| in [0, 1].

    The minimum is polished off-grid (the zero set of Pu need not meet the
    sample grid), so potentials whose invariant genuinely vanishes report
    exactly 0; a max below the degenerate floor also reports 0.  The score
    is invariant under u -> u + C.
    """
    if grid_n < 64:
        raise ValueError("objective grid must have at least 64 points per axis")
    field = u.to_field(grid_n)
    r = cartan_r(field, form, check_resolution=False).r
    mx = r.sup_norm()
    if mx < degenerate_floor:
        return 0.0
    A = np.abs(r.values)
    cell = (1.0 + abs(field.lattice.omega)) / grid_n
    # polish from the few lowest well-separated grid samples: a single local
    # search can slide past the global minimum of a multi-valley field
    starts = [field.lattice.st_to_z(i / grid_n, j / grid_n)
              for i, j in _lowest_separated_cells(A, count=4, min_sep=4)]
    mn = min(float(A.min()),
             _pattern_min_multi(r, starts, 0.5 * cell, 2.5 * cell))
    ratio = mn / mx
    return 0.0 if ratio < zero_ratio else float(ratio)


def _lowest_separated_cells(A: np.ndarray, count: int, min_sep: int):
    """Indices of up to `count` smallest samples, pairwise separated by at
    least min_sep in periodic Chebyshev distance."""
    n = A.shape[0]
    order = np.argsort(A, axis=None, kind="stable")
    picked = []
    for flat in order:
        i, j = int(flat) // n, int(flat) % n
        ok = True
        for pi, pj in picked:
            di = min((i - pi) % n, (pi - i) % n)
            dj = min((j - pj) % n, (pj - j) % n)
            if max(di, dj) < min_sep:
                ok = False
                break
        if ok:
            picked.append((i, j))
            if len(picked) >= count:
                break
    return picked


_PATTERN_OFFSETS = np.array([complex(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)])


def _pattern_min_multi(f, starts, step: float, max_move: float, iters: int = 48) -> float:
    """Smallest |f| found by bounded 3x3 pattern searches run from several
    starts at once (one batched interpolant evaluation per sweep)."""
    z = np.asarray(starts, dtype=complex)
    if z.size == 0:
        return np.inf
    m = z.size
    anchors = z.copy()
    steps = np.full(m, float(step))
    best = np.abs(f.evaluate_at(z)).astype(float)
    rows = np.arange(m)
    for _ in range(iters):
        pts = z[:, None] + steps[:, None] * _PATTERN_OFFSETS[None, :]
        mods = np.abs(f.evaluate_at(pts.ravel())).reshape(m, 9)
        k = np.argmin(mods, axis=1)
        cand = pts[rows, k]
        cm = mods[rows, k]
        improve = (cm < best) & (np.abs(cand - anchors) <= max_move)
        z = np.where(improve, cand, z)
        best = np.where(improve, cm, best)
        steps = np.where(improve, steps, 0.5 * steps)
        if float(steps.max()) < 1e-15:
            break
    return float(best.min())


# --------------------------------------------------------------------------
# symmetry obstruction
# --------------------------------------------------------------------------

@dataclass
class ObstructionReport:
    direction: SymmetryDirection
    zero_clusters: list
    zeros_found: bool
    residuals: list
    psi_min: float
    psi_max: float
    psi_argmin: complex
    psi_argmax: complex
    dpsi_sign_change: bool
    proof_identity_residual: float
    grid_n: int


def symmetric_obstruction_check(u: TrigPotential, Y: SymmetryDirection, *,
                                grid_n: int = 128,
                                symmetry_tol: float = 1e-10,
                                form: str = "divergence_form") -> ObstructionReport:
    """Verify that a Y-invariant potential forces zeros of Pu.

    Checks Yu = 0, locates the zero set of Pu (curves as well as points),
    and audits the constructive reduction: psi = e^{-u} Y'v must attain its
    interior extrema where Y'psi changes sign, and e^{-2u} Pu must equal
    b^2 Y'psi for the constant b with D = aY + bY'.
    """
    field = u.to_field(grid_n)
    du = field.derivative("D")
    dbu = field.derivative("Dbar")
    fx = du.add(dbu)
    fy = du.add(dbu.scale(-1.0)).scale(1j)
    yu = fx.scale(Y.alpha).add(fy.scale(Y.beta))
    scale = 1.0 + fx.sup_norm() + fy.sup_norm()
    if yu.sup_norm() > symmetry_tol * scale:
        raise SymmetryViolated(
            f"sup|Yu| = {yu.sup_norm():.3e} exceeds {symmetry_tol:.1e} x scale")

    r = cartan_r(field, form, check_resolution=False).r
    if r.sup_norm() < 1e-12:
        raise TotallyDegenerate("Pu vanishes identically (constant curvature)")

    clusters = locate_zero_cells(r)
    residuals = [refine_cluster_residual(r, c) for c in clusters]

    # constructive proof path
    Yp = Y.perpendicular()
    emu = field.scale(-1.0).exp()
    v = emu.mul(dbu.derivative("D")).real_part(validate=True, tol=1e-7)
    ypv = directional_derivative(v, Yp.alpha, Yp.beta).real_part(validate=True, tol=1e-7)
    psi = emu.mul(ypv).real_part(validate=True, tol=1e-7)
    P = psi.values.real
    imax = np.unravel_index(int(np.argmax(P)), P.shape)
    imin = np.unravel_index(int(np.argmin(P)), P.shape)
    n = field.n
    z_max = field.lattice.st_to_z(imax[0] / n, imax[1] / n)
    z_min = field.lattice.st_to_z(imin[0] / n, imin[1] / n)
    dpsi = directional_derivative(psi, Yp.alpha, Yp.beta).real_part(validate=True, tol=1e-7)
    dscale = dpsi.sup_norm()
    sign_change = bool(np.min(dpsi.values.real) < -1e-9 * dscale
                       and np.max(dpsi.values.real) > 1e-9 * dscale)

    # e^{-2u} Pu = b^2 Y'psi with D = a Y + b Y'
    A = np.array([[Y.alpha, Yp.alpha], [Y.beta, Yp.beta]], dtype=float)
    ab = np.linalg.solve(A, np.array([0.5, -0.5j]))
    b = complex(ab[1])
    lhs = field.scale(-2.0).exp().mul(r)
    rhs = dpsi.scale(b * b)
    ident = float(np.max(np.abs(lhs.values - rhs.values))) / (1.0 + lhs.sup_norm())

    return ObstructionReport(
        direction=Y, zero_clusters=clusters, zeros_found=bool(clusters),
        residuals=residuals, psi_min=float(np.min(P)), psi_max=float(np.max(P)),
        psi_argmin=complex(z_min), psi_argmax=complex(z_max),
        dpsi_sign_change=sign_change, proof_identity_residual=ident,
        grid_n=grid_n)


# --------------------------------------------------------------------------
# Chern normalization
# --------------------------------------------------------------------------

def chern_number(u: TrigPotential, grid_n: int = 256) -> float:
    """(i / 2 pi) integral of e^u dz /\\ dzbar over the fundamental domain,
    i.e. (1/pi) * |Im omega| * mean(e^u); spectrally accurate quadrature for
    smooth u."""
    field = u.to_field(grid_n)
    return float(field.lattice.cell_area * np.mean(np.exp(field.values.real)) / np.pi)


def chern_normalize(u: TrigPotential, c1: int, grid_n: int = 256) -> TrigPotential:
    """Shift u by the constant making the curvature integrate to the first
    Chern number c1.  The shift changes none of the umbilical data."""
    if int(c1) != c1 or c1 < 1:
        raise ValueError("c1 must be a positive integer")
    current = chern_number(u, grid_n)
    C = float(np.log(float(c1)) - np.log(current))
    return u.shifted(C)


# --------------------------------------------------------------------------
# derivative-free search
# --------------------------------------------------------------------------

@dataclass
class SearchConfig:
    lattice: TorusLattice
    mode_budget: int = 3
    trials: int = 4
    evaluations: int = 100
    seed: int = 0
    grid_n: int = 96
    coeff_bound: float = 1.0
    mode_filter: str = "all"  # "all" | "s_only"

    def mode_list(self):
        B = self.mode_budget
        if self.mode_filter == "s_only":
            return [(j, 0) for j in range(1, B + 1)]
        if self.mode_filter != "all":
            raise ValueError(f"unknown mode filter {self.mode_filter!r}")
        out = []
        for k in range(0, B + 1):
            for j in range(-B, B + 1):
                if k == 0 and j <= 0:
                    continue
                out.append((j, k))
        return out


@dataclass
class SearchReport:
    seed: int
    grid_n: int
    best_modes: TrigPotential
    objective: float
    objective_2x: float
    resolution_ok: bool
    history: list
    trials: int
    evaluations: int
    wall_time: float

    def results_payload(self) -> dict:
        """Deterministic results block: identical configs reproduce it
        bit-for-bit.  Wall time lives outside (diagnostics)."""
        return {
            "seed": self.seed,
            "grid_n": self.grid_n,
            "trials": self.trials,
            "evaluations": self.evaluations,
            "objective": self.objective,
            "objective_2x": self.objective_2x,
            "resolution_ok": self.resolution_ok,
            "best_modes": {f"{j},{k}": [c.real, c.imag]
                           for (j, k), c in sorted(self.best_modes.modes.items())},
            "history": [[int(i), float(v)] for i, v in self.history],
        }


def _decode_modes(x: np.ndarray, mode_list, bound: float, lattice) -> TrigPotential:
    half = {}
    for i, (j, k) in enumerate(mode_list):
        c = complex(x[2 * i], x[2 * i + 1])
        m = abs(c)
        if m > bound:
            c *= bound / m
        half[(j, k)] = c
    return TrigPotential.from_half_modes(lattice, half)


def torus_search(config: SearchConfig) -> SearchReport:
    """Multistart simplex maximization of the nonvanishing score over
    bounded Fourier coefficients.  Deterministic for a fixed config; a best
    objective of zero is a valid (and, so far, the expected) finding."""
    mode_list = config.mode_list()
    dim = 2 * len(mode_list)
    history = []
    counter = [0]

    def neg_objective(x):
        pot = _decode_modes(x, mode_list, config.coeff_bound, config.lattice)
        val = min_modulus_objective(pot, config.grid_n)
        history.append((counter[0], val))
        counter[0] += 1
        return -val

    t0 = time.monotonic()
    best = None
    for trial in range(config.trials):
        rng = np.random.default_rng([config.seed, trial])
        x0 = rng.uniform(-0.25, 0.25, dim)
        res = minimize(neg_objective, x0, method="Nelder-Mead",
                       options={"maxfev": config.evaluations,
                                "maxiter": 10 ** 9,
                                "xatol": 1e-6, "fatol": 1e-12,
                                "adaptive": True})
        cand = (-float(res.fun), -trial, res.x.copy())
        if best is None or cand[:2] > best[:2]:
            best = cand
    objective, neg_trial, x_best = best
    best_pot = _decode_modes(x_best, mode_list, config.coeff_bound, config.lattice)
    obj2 = min_modulus_objective(best_pot, 2 * config.grid_n)
    top = max(objective, obj2)
    resolution_ok = bool(top == 0.0 or abs(objective - obj2) <= 0.1 * top)
    wall = time.monotonic() - t0
    return SearchReport(
        seed=config.seed, grid_n=config.grid_n, best_modes=best_pot,
        objective=float(objective), objective_2x=float(obj2),
        resolution_ok=resolution_ok, history=history,
        trials=config.trials, evaluations=config.evaluations,
        wall_time=wall)
