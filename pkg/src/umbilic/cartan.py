"""The invariant pipeline h -> u -> q -> r, curvature, and the rigid front end.

The scalar invariant r detects umbilical circles: the unit circle bundle of
a positively curved metric h is umbilical over exactly the zeros of r.  All
three formulas below are functions of the potential u = log(-D Dbar log h)
alone, so the pipeline converts metric inputs to u once and works with u.

The three equivalent forms of r = Pu:

  q form           r = D^2 Dbar q - 3 q D Dbar q + 2 q^2 Dbar q - (Dq)(Dbar q),
                   with q = Du;
  P form           r = D^3 Dbar u - 3 (Du) D^2 Dbar u + 2 (Du)^2 D Dbar u
                       - (D^2 u)(D Dbar u);
  divergence form  r = e^{2u} D( e^{-u} D( e^{-u} D Dbar u ) ).

All three annihilate constant-curvature potentials and satisfy the
curvature identity Pu = -(e^{2u}/2) K_{;zz} with K the Gauss curvature of
e^{u} |dz|^2 (see :func:`kzz_identity_residual`); those two facts pin the
mixed-derivative factor in the quadratic term, and the suite cross-checks
the forms against each other on every run that asks for it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CrossFormMismatch, NotPseudoconvex
from .field import ChartGrid, PeriodicField, DEFAULT_TAIL_TOL
from .series import PowerSeries2, geometric_inverse

__all__ = [
    "FORMS",
    "MetricInput",
    "InvariantField",
    "potential_from_metric",
    "cartan_r",
    "cartan_r_all_forms",
    "gauss_curvature",
    "covariant_hessian_zz",
    "kzz_identity_residual",
    "spherical_test",
    "rigid_r_from_F",
]

FORMS = ("q_form", "p_form", "divergence_form")


@dataclass
class MetricInput:
    """Declarative metric input: a bundle metric h, a potential u, or a
    rigid defining function F."""

    kind: str  # metric_h | potential_u | rigid_F
    payload: object

    def __post_init__(self):
        if self.kind not in ("metric_h", "potential_u", "rigid_F"):
            raise ValueError(f"unknown metric input kind {self.kind!r}")
        if self.kind == "metric_h":
            f = self.payload
            if not getattr(f, "real_tag", False) or float(np.min(f.values.real)) <= 0.0:
                raise ValueError("metric_h requires strictly positive real samples")
        elif self.kind == "potential_u":
            if not getattr(self.payload, "real_tag", False):
                raise ValueError("potential_u requires a real-tagged field")
        else:
            if not isinstance(self.payload, PowerSeries2) or not self.payload.real_tag:
                raise ValueError("rigid_F requires a real-tagged PowerSeries2")

    def potential(self, tail_tol: float | None = DEFAULT_TAIL_TOL):
        if self.kind == "potential_u":
            return self.payload
        if self.kind == "metric_h":
            return potential_from_metric(self.payload, tail_tol=tail_tol)
        raise ValueError("rigid_F inputs go through rigid_r_from_F, not the field pipeline")


@dataclass
class InvariantField:
    """Output of one formula for r, together with the potential used."""

    r: object
    u_used: object
    form_used: str


def _d(f, tail_tol):
    return f.derivative("D", tail_tol=tail_tol)


def _db(f, tail_tol):
    return f.derivative("Dbar", tail_tol=tail_tol)


def _require_real(u, who: str):
    if not getattr(u, "real_tag", False):
        raise ValueError(f"{who} requires a real-tagged potential field")


def potential_from_metric(h, tail_tol: float | None = DEFAULT_TAIL_TOL):
    """u = log(-D Dbar log h) for a strictly positive bundle metric h.

    Raises NotPseudoconvex when the curvature density -D Dbar log h fails
    to be strictly positive somewhere (the circle bundle is then not
    strictly pseudoconvex).  Note a genuinely periodic positive h cannot be
    pseudoconvex on a torus (the curvature integrates to zero), so torus
    inputs arrive as potentials directly.
    """
    if not getattr(h, "real_tag", False):
        raise ValueError("metric h must be real")
    if float(np.min(h.values.real)) <= 0.0:
        raise NotPseudoconvex("metric h must be strictly positive")
    lh = h.log()
    curv = _db(_d(lh, tail_tol), tail_tol).scale(-1.0)
    curv = curv.real_part(validate=True, tol=1e-8)
    if float(np.min(curv.values.real)) <= 0.0:
        raise NotPseudoconvex(
            f"-D Dbar log h has minimum {float(np.min(curv.values.real)):.6g} <= 0")
    return curv.log()


def cartan_r(u, form: str, check_resolution: bool = True) -> InvariantField:
    """The invariant r = Pu in the requested form (see module docstring).

    check_resolution applies the spectral-tail guard to every derivative
    taken on periodic fields; chart fields rely on the caller's margins.
    """
    _require_real(u, "cartan_r")
    if form not in FORMS:
        raise ValueError(f"form must be one of {FORMS}, got {form!r}")
    tol = DEFAULT_TAIL_TOL if check_resolution else None

    if form == "p_form":
        du = _d(u, tol)
        d2u = _d(du, tol)
        ddbu = _db(du, tol)
        d2dbu = _d(ddbu, tol)
        d3dbu = _d(d2dbu, tol)
        r = (d3dbu
             - du.mul(d2dbu).scale(3.0)
             + du.mul(du).mul(ddbu).scale(2.0)
             - d2u.mul(ddbu))
    elif form == "q_form":
        q = _d(u, tol)
        dq = _d(q, tol)
        dbq = _db(q, tol)
        ddbq = _d(dbq, tol)
        d2dbq = _d(ddbq, tol)
        r = (d2dbq
             - q.mul(ddbq).scale(3.0)
             + q.mul(q).mul(dbq).scale(2.0)
             - dq.mul(dbq))
    else:
        emu = u.scale(-1.0).exp()
        e2u = u.scale(2.0).exp()
        ddbu = _db(_d(u, tol), tol)
        inner = _d(emu.mul(ddbu), tol)
        mid = _d(emu.mul(inner), tol)
        r = e2u.mul(mid)
    return InvariantField(r=r, u_used=u, form_used=form)


def cartan_r_all_forms(u, tol: float = 1e-7, check_resolution: bool = True) -> dict:
    """All three forms, raising CrossFormMismatch when any pair disagrees
    beyond tol relative to the field scale."""
    out = {form: cartan_r(u, form, check_resolution=check_resolution) for form in FORMS}
    fields = [out[form].r for form in FORMS]
    scale = 1.0 + max(f.sup_norm() for f in fields)
    worst = 0.0
    for i in range(len(fields)):
        for j in range(i + 1, len(fields)):
            diff = float(np.max(np.abs(fields[i].values - fields[j].values)))
            worst = max(worst, diff / scale)
    if worst > tol:
        raise CrossFormMismatch(
            f"forms of r disagree with relative sup-error {worst:.3e} > {tol:.1e}")
    return out


def gauss_curvature(u, check_resolution: bool = True):
    """Gauss curvature K = -2 e^{-u} D Dbar u of the metric e^{u} |dz|^2."""
    _require_real(u, "gauss_curvature")
    tol = DEFAULT_TAIL_TOL if check_resolution else None
    ddbu = _db(_d(u, tol), tol)
    K = u.scale(-1.0).exp().mul(ddbu).scale(-2.0)
    return K.real_part(validate=True, tol=1e-7)


def covariant_hessian_zz(f, phi, check_resolution: bool = True):
    """Second covariant z-derivative f_{;zz} = e^{-2 phi}(D^2 f - 2 (D phi)(D f))
    in the metric e^{2 phi} |dz|^2.  With phi = 0 this is plain D^2 f, one
    quarter of (f_11 - f_22 - 2 i f_12)."""
    _require_real(f, "covariant_hessian_zz")
    _require_real(phi, "covariant_hessian_zz")
    tol = DEFAULT_TAIL_TOL if check_resolution else None
    df = _d(f, tol)
    d2f = _d(df, tol)
    dphi = _d(phi, tol)
    em2phi = phi.scale(-2.0).exp()
    return em2phi.mul(d2f - dphi.mul(df).scale(2.0))


def kzz_identity_residual(u, check_resolution: bool = True,
                          region_radius: float | None = None) -> float:
    """Sup-norm of Pu + (e^{2u}/2) K_{;zz}, the two sides computed through
    independent code paths (P form versus curvature and covariant Hessian
    with 2 phi = u).  Identically zero in exact arithmetic.  On charts an
    optional region radius restricts the sup to the trusted interior."""
    _require_real(u, "kzz_identity_residual")
    P = cartan_r(u, "p_form", check_resolution=check_resolution).r
    K = gauss_curvature(u, check_resolution=check_resolution)
    kzz = covariant_hessian_zz(K, u.scale(0.5), check_resolution=check_resolution)
    e2u = u.scale(2.0).exp()
    resid = P + e2u.mul(kzz).scale(0.5)
    if isinstance(u, ChartGrid) and region_radius is not None:
        return resid.sup_norm(region_radius)
    return resid.sup_norm()


def spherical_test(u, tol: float = 1e-6, region_radius: float | None = None,
                   check_resolution: bool = True) -> bool:
    """Locally spherical / totally umbilical test: true iff the covariant
    Hessian of the Gauss curvature vanishes, i.e.
    sup |K_{;zz}| <= tol * (1 + sup |K|).  Constant-curvature metrics are
    exactly the metrics passing this test, and they are the inputs on which
    zero location downstream would be meaningless."""
    _require_real(u, "spherical_test")
    K = gauss_curvature(u, check_resolution=check_resolution)
    kzz = covariant_hessian_zz(K, u.scale(0.5), check_resolution=check_resolution)
    if isinstance(u, ChartGrid) and region_radius is not None:
        ksup = K.sup_norm(region_radius)
        hsup = kzz.sup_norm(region_radius)
    else:
        ksup = K.sup_norm()
        hsup = kzz.sup_norm()
    return bool(hsup <= tol * (1.0 + ksup))


def rigid_r_from_F(F: PowerSeries2) -> PowerSeries2:
    """The invariant of a rigid hypersurface Im w = F(z, zbar) in normal
    form F = |z|^2 + O(|z|^4), as a truncated series of degree
    F.max_degree - 4.

    F is treated as exact polynomial data; q = F_{zz zbar} / F_{z zbar} is
    formed by geometric-series inversion of F_{z zbar} = 1 + (higher order)
    and the third-order q formula is applied formally.
    """
    if not isinstance(F, PowerSeries2):
        raise TypeError("rigid_r_from_F expects a PowerSeries2")
    if not F.real_tag:
        raise ValueError("F must carry the reality tag")
    N = F.max_degree
    if abs(F.coeff(1, 1) - 1.0) > 1e-12:
        raise ValueError("normal form requires coefficient (1,1) == 1")
    for (k, l), c in F.coeffs.items():
        if k + l <= 3 and (k, l) != (1, 1) and abs(c) > 1e-12:
            raise ValueError(f"normal form forbids low-order term ({k},{l})")

    out_degree = max(N - 4, 0)
    work = N  # q is needed complete through degree N - 1
    Fx = F.lift(N + 2)
    Fz = Fx.derivative("D")
    Fzzb = Fz.derivative("Dbar")            # complete through N
    Fzzzb = Fz.derivative("D").derivative("Dbar")  # complete through N - 1
    e = Fzzb - 1.0
    inv = geometric_inverse(e, work)
    q = Fzzzb.mul(inv)                       # complete through N - 1

    dq = q.derivative("D")
    dbq = q.derivative("Dbar")
    ddbq = dbq.derivative("D")
    d2dbq = ddbq.derivative("D")
    r = (d2dbq
         - q.mul(ddbq).scale(3.0)
         + q.mul(q).mul(dbq).scale(2.0)
         - dq.mul(dbq))
    return r.truncate(out_degree)
