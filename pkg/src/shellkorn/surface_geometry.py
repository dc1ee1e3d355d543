"""Differential geometry of a parameterized mid-surface.

A chart maps a planar parameter domain into 3-space.  From its partial
derivatives (up to third order) we evaluate, at any requested points, the
covariant/contravariant bases, the three fundamental forms, the Christoffel
symbols and the covariant derivative of the mixed curvature tensor.  These
are the coefficient fields that the shell strain measures are built from.

Index conventions: Greek indices run over {0, 1} (the two parameter
directions), the surface normal is the third basis vector.  Mixed curvature
components are stored as ``b_mixed[gamma, beta]`` = b^gamma_beta, Christoffel
symbols as ``gamma[g, a, b]`` = Gamma^g_ab (symmetric in a, b), and the
covariant derivative of the mixed curvature as ``db_mixed[g, a, b]`` =
b^g_{a|b} = d_b b^g_a + Gamma^g_{lb} b^l_a - Gamma^l_{ab} b^g_l.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Chart",
    "GeometryError",
    "DegenerateImmersionError",
    "GeometryBatch",
    "GeometryPoint",
    "ElasticTensor",
    "flat_plate",
    "cylinder",
    "sphere_patch",
    "hyperbolic_paraboloid",
    "chart_by_name",
    "rotate_chart",
    "geometry_batch",
    "geometry_point",
    "frames",
    "curvature",
    "christoffel",
    "curvature_covariant_derivative",
    "elastic_tensor",
]

IMMERSION_TOL = 1e-12


class GeometryError(Exception):
    pass


class DegenerateImmersionError(GeometryError):
    """Tangent vectors are (numerically) linearly dependent at a point."""


def _fd_step(x):
    # central-difference step ~ cbrt(eps), scaled by the local coordinate size
    return np.finfo(float).eps ** (1.0 / 3.0) * np.maximum(1.0, np.abs(x))


class Chart:
    """Immersion of a planar parameter domain into 3-space.

    Parameters
    ----------
    position : callable
        ``position(x)`` with ``x`` of shape (..., 2) returning (..., 3).
    first, second, third : callable, optional
        Partial derivatives: ``first(x) -> (..., 2, 3)`` with entry [a]
        = d_a Phi, ``second(x) -> (..., 2, 2, 3)`` with [a, b] = d_a d_b Phi,
        ``third(x) -> (..., 2, 2, 2, 3)``.  Missing orders fall back to
        central differencing of the next lower order (third-order fallback
        accuracy is about 1e-8; a warning is issued once per chart).
    parameter_domain : ndarray, optional
        Polygon (m, 2) restricting where the chart may be queried.  ``None``
        means unrestricted.
    """

    def __init__(self, position, first=None, second=None, third=None, *,
                 name="custom", parameter_domain=None, params=None):
        self.name = name
        self.params = dict(params or {})
        self.parameter_domain = (
            None if parameter_domain is None else np.asarray(parameter_domain, dtype=float)
        )
        self._position = position
        self._first = first
        self._second = second
        self._third = third
        self.has_analytic_third = third is not None
        self._warned_fd = False

    # -- derivative evaluation ------------------------------------------------

    def position(self, x):
        return np.asarray(self._position(np.asarray(x, dtype=float)), dtype=float)

    def first(self, x):
        x = np.asarray(x, dtype=float)
        if self._first is not None:
            return np.asarray(self._first(x), dtype=float)
        return self._diff(self.position, x)

    def second(self, x):
        x = np.asarray(x, dtype=float)
        if self._second is not None:
            return np.asarray(self._second(x), dtype=float)
        return self._diff(self.first, x)

    def third(self, x):
        x = np.asarray(x, dtype=float)
        if self._third is not None:
            return np.asarray(self._third(x), dtype=float)
        if not self._warned_fd:
            warnings.warn(
                f"chart {self.name!r}: third-order partials by central differencing, "
                "accuracy ~1e-8", stacklevel=2)
            self._warned_fd = True
        return self._diff(self.second, x)

    @staticmethod
    def _diff(fn, x):
        # central differences; inserts one differentiation axis after the
        # point axes, matching the analytic closure layout
        outs = []
        for a in range(2):
            h = _fd_step(x[..., a])
            xp = x.copy()
            xm = x.copy()
            xp[..., a] = x[..., a] + h
            xm[..., a] = x[..., a] - h
            d = fn(xp) - fn(xm)
            outs.append(d / (2.0 * h).reshape(h.shape + (1,) * (d.ndim - h.ndim)))
        return np.stack(outs, axis=x.ndim - 1)

    def contains(self, pts, tol=1e-12):
        """Point-in-parameter-domain test (True everywhere if unrestricted)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.parameter_domain is None:
            return np.ones(len(pts), dtype=bool)
        return _points_in_polygon(pts, self.parameter_domain, tol)


def _points_in_polygon(pts, poly, tol):
    # crossing-number test with an on-boundary tolerance
    inside = np.zeros(len(pts), dtype=bool)
    n = len(poly)
    for i, (x, y) in enumerate(pts):
        cross = 0
        on_edge = False
        for k in range(n):
            x0, y0 = poly[k]
            x1, y1 = poly[(k + 1) % n]
            dx, dy = x1 - x0, y1 - y0
            L2 = dx * dx + dy * dy
            t = 0.0 if L2 == 0 else np.clip(((x - x0) * dx + (y - y0) * dy) / L2, 0.0, 1.0)
            if (x - x0 - t * dx) ** 2 + (y - y0 - t * dy) ** 2 <= (tol * max(1.0, np.sqrt(L2))) ** 2:
                on_edge = True
                break
            if (y0 > y) != (y1 > y):
                xi = x0 + (y - y0) / (y1 - y0) * dx
                if xi > x:
                    cross += 1
        inside[i] = on_edge or (cross % 2 == 1)
    return inside


# -- built-in charts ----------------------------------------------------------

def flat_plate():
    """Plane z = 0: zero curvature, zero Christoffel symbols."""

    def pos(x):
        return np.stack([x[..., 0], x[..., 1], np.zeros_like(x[..., 0])], axis=-1)

    def d1(x):
        z = np.zeros_like(x[..., 0])
        o = np.ones_like(z)
        a1 = np.stack([o, z, z], axis=-1)
        a2 = np.stack([z, o, z], axis=-1)
        return np.stack([a1, a2], axis=-2)

    def d2(x):
        return np.zeros(x.shape[:-1] + (2, 2, 3))

    def d3(x):
        return np.zeros(x.shape[:-1] + (2, 2, 2, 3))

    return Chart(pos, d1, d2, d3, name="flat")


def cylinder():
    """Unit cylinder (cos x1, sin x1, x2): parabolic surface, flat metric."""

    def pos(x):
        return np.stack([np.cos(x[..., 0]), np.sin(x[..., 0]), x[..., 1]], axis=-1)

    def d1(x):
        c, s = np.cos(x[..., 0]), np.sin(x[..., 0])
        z = np.zeros_like(c)
        o = np.ones_like(c)
        a1 = np.stack([-s, c, z], axis=-1)
        a2 = np.stack([z, z, o], axis=-1)
        return np.stack([a1, a2], axis=-2)

    def d2(x):
        c, s = np.cos(x[..., 0]), np.sin(x[..., 0])
        z = np.zeros_like(c)
        out = np.zeros(x.shape[:-1] + (2, 2, 3))
        out[..., 0, 0, :] = np.stack([-c, -s, z], axis=-1)
        return out

    def d3(x):
        c, s = np.cos(x[..., 0]), np.sin(x[..., 0])
        z = np.zeros_like(c)
        out = np.zeros(x.shape[:-1] + (2, 2, 2, 3))
        out[..., 0, 0, 0, :] = np.stack([s, -c, z], axis=-1)
        return out

    return Chart(pos, d1, d2, d3, name="cylinder")


def sphere_patch(radius=1.0):
    """Sphere of given radius in longitude/latitude coordinates.

    Umbilic: the mixed curvature is -(1/R) times the identity everywhere,
    so its covariant derivative vanishes identically.
    """
    R = float(radius)
    dom = np.array([[-1.3, -1.3], [1.3, -1.3], [1.3, 1.3], [-1.3, 1.3]])

    def pos(x):
        c1, s1 = np.cos(x[..., 0]), np.sin(x[..., 0])
        c2, s2 = np.cos(x[..., 1]), np.sin(x[..., 1])
        return R * np.stack([c1 * c2, s1 * c2, s2], axis=-1)

    def d1(x):
        c1, s1 = np.cos(x[..., 0]), np.sin(x[..., 0])
        c2, s2 = np.cos(x[..., 1]), np.sin(x[..., 1])
        z = np.zeros_like(c1)
        a1 = R * np.stack([-s1 * c2, c1 * c2, z], axis=-1)
        a2 = R * np.stack([-c1 * s2, -s1 * s2, c2], axis=-1)
        return np.stack([a1, a2], axis=-2)

    def d2(x):
        c1, s1 = np.cos(x[..., 0]), np.sin(x[..., 0])
        c2, s2 = np.cos(x[..., 1]), np.sin(x[..., 1])
        z = np.zeros_like(c1)
        out = np.empty(x.shape[:-1] + (2, 2, 3))
        out[..., 0, 0, :] = R * np.stack([-c1 * c2, -s1 * c2, z], axis=-1)
        out[..., 0, 1, :] = R * np.stack([s1 * s2, -c1 * s2, z], axis=-1)
        out[..., 1, 0, :] = out[..., 0, 1, :]
        out[..., 1, 1, :] = R * np.stack([-c1 * c2, -s1 * c2, -s2], axis=-1)
        return out

    def d3(x):
        c1, s1 = np.cos(x[..., 0]), np.sin(x[..., 0])
        c2, s2 = np.cos(x[..., 1]), np.sin(x[..., 1])
        z = np.zeros_like(c1)
        out = np.empty(x.shape[:-1] + (2, 2, 2, 3))
        out[..., 0, 0, 0, :] = R * np.stack([s1 * c2, -c1 * c2, z], axis=-1)
        out[..., 0, 0, 1, :] = R * np.stack([c1 * s2, s1 * s2, z], axis=-1)
        out[..., 0, 1, 0, :] = out[..., 0, 0, 1, :]
        out[..., 0, 1, 1, :] = R * np.stack([s1 * c2, -c1 * c2, z], axis=-1)
        out[..., 1, 0, 0, :] = out[..., 0, 0, 1, :]
        out[..., 1, 0, 1, :] = out[..., 0, 1, 1, :]
        out[..., 1, 1, 0, :] = out[..., 0, 1, 1, :]
        out[..., 1, 1, 1, :] = R * np.stack([c1 * s2, s1 * s2, -c2], axis=-1)
        return out

    return Chart(pos, d1, d2, d3, name="sphere",
                 parameter_domain=dom, params={"radius": R})


def hyperbolic_paraboloid():
    """Saddle (x1, x2, x1*x2): negative Gauss curvature, nonzero Christoffels."""

    def pos(x):
        return np.stack([x[..., 0], x[..., 1], x[..., 0] * x[..., 1]], axis=-1)

    def d1(x):
        z = np.zeros_like(x[..., 0])
        o = np.ones_like(z)
        a1 = np.stack([o, z, x[..., 1]], axis=-1)
        a2 = np.stack([z, o, x[..., 0]], axis=-1)
        return np.stack([a1, a2], axis=-2)

    def d2(x):
        z = np.zeros_like(x[..., 0])
        o = np.ones_like(z)
        out = np.zeros(x.shape[:-1] + (2, 2, 3))
        cross = np.stack([z, z, o], axis=-1)
        out[..., 0, 1, :] = cross
        out[..., 1, 0, :] = cross
        return out

    def d3(x):
        return np.zeros(x.shape[:-1] + (2, 2, 2, 3))

    return Chart(pos, d1, d2, d3, name="hyperbolic_paraboloid")


_BUILTINS = {
    "flat": flat_plate,
    "plate": flat_plate,
    "cylinder": cylinder,
    "sphere": sphere_patch,
    "hyperbolic_paraboloid": hyperbolic_paraboloid,
    "hypar": hyperbolic_paraboloid,
}


def chart_by_name(name, **params):
    """Look up a built-in chart by name (flat, cylinder, sphere, hypar)."""
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise GeometryError(
            f"unknown chart {name!r}; available: {sorted(set(_BUILTINS))}") from None
    return factory(**params)


def rotate_chart(chart, rot):
    """Compose a chart with a rigid rotation of the ambient space."""
    rot = np.asarray(rot, dtype=float)

    def ap(fn):
        return lambda x: fn(x) @ rot.T

    return Chart(ap(chart.position), ap(chart.first), ap(chart.second),
                 ap(chart.third) if chart.has_analytic_third else None,
                 name=chart.name + "+rot", parameter_domain=chart.parameter_domain,
                 params=chart.params)


# -- pointwise geometry -------------------------------------------------------

@dataclass(frozen=True)
class GeometryBatch:
    """All surface quantities evaluated at a batch of parameter points.

    Arrays are stacked along the leading axis; see the module docstring for
    index conventions.  ``d2`` and ``d_a3`` (derivatives of the tangent
    vectors and of the unit normal) are kept because rigid-motion fields and
    the zero-shear rotation need them.
    """
    points: np.ndarray        # (n, 2)
    a_cov: np.ndarray         # (n, 3, 3)  rows a_1, a_2, a_3
    a_con: np.ndarray         # (n, 3, 3)  rows a^1, a^2, a^3
    a_lower: np.ndarray       # (n, 2, 2)
    a_upper: np.ndarray       # (n, 2, 2)
    det_a: np.ndarray         # (n,)
    b_lower: np.ndarray       # (n, 2, 2)
    b_mixed: np.ndarray       # (n, 2, 2)   [g, b] = b^g_b
    c_lower: np.ndarray       # (n, 2, 2)
    gamma: np.ndarray         # (n, 2, 2, 2) [g, a, b] = Gamma^g_ab
    db_mixed: np.ndarray      # (n, 2, 2, 2) [g, a, b] = b^g_{a|b}
    db_partial: np.ndarray    # (n, 2, 2, 2) [g, a, b] = d_b b^g_a
    d2: np.ndarray            # (n, 2, 2, 3) [a, b] = d_b d_a Phi
    d_a3: np.ndarray          # (n, 2, 3)    [b] = d_b a_3

    def __len__(self):
        return len(self.points)

    @property
    def sqrt_a(self):
        return np.sqrt(self.det_a)

    def point(self, i):
        return GeometryPoint(
            a_cov=self.a_cov[i], a_con=self.a_con[i], a_lower=self.a_lower[i],
            a_upper=self.a_upper[i], det_a=float(self.det_a[i]),
            b_lower=self.b_lower[i], b_mixed=self.b_mixed[i],
            c_lower=self.c_lower[i], gamma=self.gamma[i], db_mixed=self.db_mixed[i])


@dataclass(frozen=True)
class GeometryPoint:
    """First/second/third fundamental forms and connection at one point."""
    a_cov: np.ndarray
    a_con: np.ndarray
    a_lower: np.ndarray
    a_upper: np.ndarray
    det_a: float
    b_lower: np.ndarray
    b_mixed: np.ndarray
    c_lower: np.ndarray
    gamma: np.ndarray
    db_mixed: np.ndarray


def geometry_batch(chart, pts, need_third=True):
    """Evaluate the full geometry of ``chart`` at points ``pts`` of shape (n, 2).

    Raises DegenerateImmersionError where |a_1 x a_2| falls below tolerance,
    and GeometryError for points outside the chart's parameter domain.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if chart.parameter_domain is not None:
        ok = chart.contains(pts)
        if not ok.all():
            bad = pts[~ok][0]
            raise GeometryError(
                f"point {tuple(bad)} outside the parameter domain of chart {chart.name!r}")

    d1 = chart.first(pts)                      # (n, 2, 3)
    d2 = chart.second(pts)                     # (n, 2, 2, 3)
    a1, a2 = d1[:, 0], d1[:, 1]
    nvec = np.cross(a1, a2)
    nlen = np.linalg.norm(nvec, axis=-1)
    scale = np.linalg.norm(a1, axis=-1) * np.linalg.norm(a2, axis=-1)
    if np.any(nlen <= IMMERSION_TOL * np.maximum(scale, 1e-300)):
        i = int(np.argmin(nlen / np.maximum(scale, 1e-300)))
        raise DegenerateImmersionError(
            f"tangent vectors linearly dependent at point {tuple(pts[i])} "
            f"of chart {chart.name!r} (|a1 x a2| = {nlen[i]:.3e})")
    a3 = nvec / nlen[:, None]

    a_lower = np.einsum("nad,nbd->nab", d1, d1)
    det_a = a_lower[:, 0, 0] * a_lower[:, 1, 1] - a_lower[:, 0, 1] * a_lower[:, 1, 0]
    a_upper = np.empty_like(a_lower)
    a_upper[:, 0, 0] = a_lower[:, 1, 1] / det_a
    a_upper[:, 1, 1] = a_lower[:, 0, 0] / det_a
    a_upper[:, 0, 1] = -a_lower[:, 0, 1] / det_a
    a_upper[:, 1, 0] = -a_lower[:, 1, 0] / det_a

    a_cov = np.stack([a1, a2, a3], axis=1)
    a_con_t = np.einsum("nab,nbd->nad", a_upper, d1)     # a^alpha
    a_con = np.concatenate([a_con_t, a3[:, None, :]], axis=1)

    # b_ab = a3 . d_b a_a ; d2[a, b] = d_b d_a Phi by symmetry of mixed partials
    b_lower = np.einsum("nd,nabd->nab", a3, d2)
    b_mixed = np.einsum("nag,ngb->nab", a_upper, b_lower)
    c_lower = np.einsum("nga,ngb->nab", b_mixed, b_lower)

    # Gamma^g_ab = a^g . d_b a_a
    gamma = np.einsum("ngd,nabd->ngab", a_con_t, d2)

    if not need_third:
        zero = np.zeros_like(gamma)
        return GeometryBatch(pts, a_cov, a_con, a_lower, a_upper, det_a,
                             b_lower, b_mixed, c_lower, gamma, zero, zero, d2,
                             _normal_derivative(d1, d2, a3, nlen))

    d3 = chart.third(pts)                      # (n, 2, 2, 2, 3)
    d_a3 = _normal_derivative(d1, d2, a3, nlen)

    # d_b a_lg = d_b a_l . a_g + a_l . d_b a_g
    d_alower = (np.einsum("nlbd,ngd->nlgb", d2, d1)
                + np.einsum("nld,ngbd->nlgb", d1, d2))
    # d_b a^{gl} = -a^{gm} (d_b a_mn) a^{nl}
    d_aupper = -np.einsum("ngm,nmlb,nlk->ngkb", a_upper, d_alower, a_upper)
    # d_b b_la = (d_b a3) . d_a a_l + a3 . d_b d_a a_l
    d_blower = (np.einsum("nbd,nlad->nlab", d_a3, d2)
                + np.einsum("nd,nlabd->nlab", a3, d3))
    db_partial = (np.einsum("nglb,nla->ngab", d_aupper, b_lower)
                  + np.einsum("ngl,nlab->ngab", a_upper, d_blower))
    db_mixed = (db_partial
                + np.einsum("nglb,nla->ngab", gamma, b_mixed)
                - np.einsum("nlab,ngl->ngab", gamma, b_mixed))

    return GeometryBatch(pts, a_cov, a_con, a_lower, a_upper, det_a,
                         b_lower, b_mixed, c_lower, gamma, db_mixed,
                         db_partial, d2, d_a3)


def _normal_derivative(d1, d2, a3, nlen):
    # d_b (n/|n|) = (I - a3 a3^T) d_b n / |n|,  n = a1 x a2
    dn = (np.cross(d2[:, 0, :, :], d1[:, None, 1, :], axis=-1)
          + np.cross(d1[:, None, 0, :], d2[:, 1, :, :], axis=-1))     # (n, 2, 3)
    proj = dn - np.einsum("nbd,nd->nb", dn, a3)[..., None] * a3[:, None, :]
    return proj / nlen[:, None, None]


def geometry_point(chart, p):
    """Full GeometryPoint at a single parameter point."""
    return geometry_batch(chart, np.asarray(p, dtype=float)[None, :]).point(0)


def frames(chart, p):
    """Covariant/contravariant bases, metric, inverse metric and its determinant."""
    gp = geometry_point(chart, p)
    return gp.a_cov, gp.a_con, gp.a_lower, gp.a_upper, gp.det_a


def curvature(chart, p):
    """Second and third fundamental forms (covariant b, mixed b, covariant c)."""
    gp = geometry_point(chart, p)
    return gp.b_lower, gp.b_mixed, gp.c_lower


def christoffel(chart, p):
    """Christoffel symbols Gamma^g_ab at a point (symmetric in a, b)."""
    return geometry_point(chart, p).gamma


def curvature_covariant_derivative(chart, p):
    """Covariant derivative b^g_{a|b} of the mixed curvature tensor."""
    return geometry_point(chart, p).db_mixed


# -- elastic tensor -----------------------------------------------------------

@dataclass(frozen=True)
class ElasticTensor:
    """Plane-stress-reduced elastic tensor of an isotropic shell material."""
    components: np.ndarray    # (2, 2, 2, 2)
    lame_lambda: float
    lame_mu: float

    def quadratic_form(self, sigma):
        """Contract with a symmetric 2x2 tensor twice."""
        return float(np.einsum("abcd,ab,cd->", self.components, sigma, sigma))

    def positivity_lower_bound(self, a_upper):
        """2*mu*lambda_min(a_upper)^2: a computable coercivity floor."""
        lmin = np.min(np.linalg.eigvalsh(a_upper))
        return 2.0 * self.lame_mu * lmin ** 2


def elastic_tensor(gp, lame_lambda, lame_mu):
    """a^{abgd} = mu (a^{ag}a^{bd} + a^{bg}a^{ad}) + 2*mu*lambda/(2*mu+lambda) a^{ab}a^{gd}.

    Accepts a GeometryPoint (or anything with ``a_upper``).
    """
    if lame_mu <= 0:
        raise ValueError("lame_mu must be positive")
    if lame_lambda < 0:
        raise ValueError("lame_lambda must be nonnegative")
    au = np.asarray(gp.a_upper if hasattr(gp, "a_upper") else gp, dtype=float)
    comp = elastic_components(au[None, :, :], lame_lambda, lame_mu)[0]
    return ElasticTensor(components=comp, lame_lambda=float(lame_lambda),
                         lame_mu=float(lame_mu))


def elastic_components(a_upper, lame_lambda, lame_mu):
    """Batched elastic tensor components for a_upper of shape (n, 2, 2)."""
    mu, lam = float(lame_mu), float(lame_lambda)
    pressure = 2.0 * mu * lam / (2.0 * mu + lam)
    return (mu * (np.einsum("nag,nbd->nabgd", a_upper, a_upper)
                  + np.einsum("nbg,nad->nabgd", a_upper, a_upper))
            + pressure * np.einsum("nab,ngd->nabgd", a_upper, a_upper))
