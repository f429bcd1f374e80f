"""Riemannian primitives in chart coordinates.

Points and tangent vectors are float arrays whose last axis carries chart
components, so the array methods on :class:`Manifold` broadcast over any
leading batch axes.  The small dataclasses :class:`ManifoldPoint`,
:class:`TangentVec` and :class:`Covector` are used at API edges where the
base point matters (inner products, index raising/lowering).

Built-in manifolds:

* :class:`Euclidean` -- flat R^n, optionally restricted to the open upper
  half-plane chart ``x_2 > 0`` (the flat-metric variant of the half-plane).
* :class:`HalfPlane` -- the hyperbolic upper half-plane, ``g = I / x_2^2``.
* :class:`Sphere` -- round 2-sphere of radius R, points stored as unit
  3-vectors in the embedding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RangeError, UsageError

#: Half-plane points with ``x_2`` at or below this are off-chart.
BOUNDARY_EPS = 1e-12
#: Chart-coordinate distance under which two points are the same point.
SAME_POINT_TOL = 1e-12
#: Relative central-difference step, ``h = FD_REL_STEP * max(1, |xi|)``.
FD_REL_STEP = 1e-6


def fd_step(xi):
    """Central-difference step for chart point(s) ``xi``."""
    return FD_REL_STEP * np.maximum(1.0, np.linalg.norm(xi, axis=-1))


class Manifold:
    """Base class: a Riemannian manifold covered by one chart.

    Subclasses implement the unchecked kernels ``_metric``, ``_distance``,
    ``_exp``, ``_log`` and ``_in_chart``; the public methods validate their
    inputs and raise :class:`DomainError` / :class:`RangeError`.  Integrators
    call the kernels directly and mask invalid rows themselves.
    """

    kind = "abstract"
    dimension = 0
    coord_dim = 0

    @property
    def params(self):
        return {}

    @property
    def ident(self):
        extra = ",".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.kind}({extra})" if extra else self.kind

    def __repr__(self):
        return f"<{self.ident}>"

    def __eq__(self, other):
        return type(self) is type(other) and self.params == other.params

    def __hash__(self):
        return hash((type(self), tuple(self.params.items())))

    # -- validation -------------------------------------------------------
    def in_chart(self, x):
        x = np.asarray(x, dtype=float)
        return self._in_chart(x) & np.all(np.isfinite(x), axis=-1)

    def check_point(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.coord_dim:
            raise UsageError(
                f"{self.ident}: expected {self.coord_dim} coordinates, got shape {x.shape}"
            )
        if not np.all(self.in_chart(x)):
            raise DomainError(f"{self.ident}: point outside chart domain")
        return x

    def _check_vector(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 0 or X.shape[-1] != self.coord_dim:
            raise UsageError(
                f"{self.ident}: expected {self.coord_dim} components, got shape {X.shape}"
            )
        return X

    # -- public API -------------------------------------------------------
    def metric_at(self, x):
        return self._metric(self.check_point(x))

    def inner(self, x, X, Y):
        G = self.metric_at(x)
        X, Y = self._check_vector(X), self._check_vector(Y)
        return np.einsum("...i,...ij,...j->...", X, G, Y)

    def norm(self, x, X):
        return np.sqrt(np.maximum(self.inner(x, X, X), 0.0))

    def distance(self, x, y):
        return self._distance(self.check_point(x), self.check_point(y))

    def exp_map(self, x, X):
        x = self.check_point(x)
        y = self._exp(x, self._check_vector(X))
        if not np.all(self.in_chart(y)):
            raise DomainError(f"{self.ident}: exp_map left the chart")
        return y

    def log_map(self, x, y):
        x, y = self.check_point(x), self.check_point(y)
        inj = self.injectivity_radius(x)
        if math.isfinite(inj) and np.any(self._distance(x, y) >= inj):
            raise RangeError(f"{self.ident}: target outside injectivity ball (radius {inj})")
        return self._log(x, y)

    def sectional_curvature(self, x=None):
        raise NotImplementedError

    def injectivity_radius(self, x=None):
        raise NotImplementedError

    def chart_radius(self, x):
        """Largest r with the geodesic ball ``B_x(r)`` inside the chart."""
        return math.inf


class Euclidean(Manifold):
    """Flat R^n; ``half_plane=True`` restricts the chart to ``x_2 > 0``."""

    kind = "euclidean"

    def __init__(self, dimension=2, half_plane=False):
        if dimension < 1:
            raise UsageError("dimension must be >= 1")
        if half_plane and dimension != 2:
            raise UsageError("half_plane chart needs dimension 2")
        self.dimension = self.coord_dim = int(dimension)
        self.half_plane = bool(half_plane)

    @property
    def params(self):
        return {"n": self.dimension, "half_plane": self.half_plane}

    def _in_chart(self, x):
        if self.half_plane:
            return x[..., 1] > BOUNDARY_EPS
        return np.ones(x.shape[:-1], dtype=bool)

    def _metric(self, x):
        return np.broadcast_to(np.eye(self.dimension), x.shape + (self.dimension,)).copy()

    def _distance(self, x, y):
        return np.linalg.norm(y - x, axis=-1)

    def _exp(self, x, X):
        return x + X

    def _log(self, x, y):
        return y - x

    def sectional_curvature(self, x=None):
        return 0.0

    def injectivity_radius(self, x=None):
        # The half-plane is convex, so straight segments never leave it.
        return math.inf

    def chart_radius(self, x):
        if not self.half_plane:
            return math.inf
        return float(self.check_point(x)[1])


class HalfPlane(Manifold):
    """Hyperbolic upper half-plane with metric ``g_ij = delta_ij / x_2^2``."""

    kind = "half_plane_hyperbolic"
    dimension = 2
    coord_dim = 2

    def _in_chart(self, x):
        return x[..., 1] > BOUNDARY_EPS

    def _metric(self, x):
        w = 1.0 / x[..., 1] ** 2
        G = np.zeros(x.shape[:-1] + (2, 2))
        G[..., 0, 0] = w
        G[..., 1, 1] = w
        return G

    def _distance(self, x, y):
        # 2 asinh(|x-y| / (2 sqrt(x2 y2))): the closed-form log-ratio
        # distance rewritten to avoid cancellation for nearby points.
        chord = np.linalg.norm(y - x, axis=-1)
        return 2.0 * np.arcsinh(chord / (2.0 * np.sqrt(x[..., 1] * y[..., 1])))

    def _exp(self, x, X):
        # Move x to i by z -> (z - x1)/x2, rotate about i so the vertical
        # geodesic i e^s points along X, and map back.
        x1, x2 = x[..., 0], x[..., 1]
        speed = np.hypot(X[..., 0], X[..., 1])
        s = speed / x2
        half = 0.5 * (np.arctan2(X[..., 1], X[..., 0]) - 0.5 * np.pi)
        c, sn = np.cos(half), np.sin(half)
        with np.errstate(over="ignore", invalid="ignore"):
            em, ep = np.exp(-s), np.exp(s)
            den = c * c * em + sn * sn * ep
            re = sn * c * (em - ep) / den
            im = 1.0 / den
        return np.stack([x1 + x2 * re, x2 * im], axis=-1)

    def _log(self, x, y):
        # Closed form for the log toward a point on the vertical axis,
        # applied after the horizontal translation moving y1 to 0 (an
        # isometry, so the formula holds for every pair).
        u1 = x[..., 0] - y[..., 0]
        x2, a = x[..., 1], y[..., 1]
        rho = self._distance(x, y)
        den = np.hypot(u1, a + x2) * np.hypot(u1, a - x2)
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(den > 0.0, -rho / den, 0.0)
        return np.stack(
            [scale * 2.0 * u1 * x2**2, scale * x2 * (x2**2 - u1**2 - a**2)], axis=-1
        )

    def sectional_curvature(self, x=None):
        return -1.0

    def injectivity_radius(self, x=None):
        return math.inf


class Sphere(Manifold):
    """Round sphere of radius R embedded in R^3.

    Points are unit 3-vectors ``u``; tangent vectors at ``u`` are ambient
    3-vectors orthogonal to ``u`` with metric ``R^2 I``.  Not used by the
    chart integrators.
    """

    kind = "sphere"
    dimension = 2
    coord_dim = 3

    def __init__(self, radius=1.0):
        if not radius > 0:
            raise UsageError("sphere radius must be positive")
        self.radius = float(radius)

    @property
    def params(self):
        return {"R": self.radius}

    def _in_chart(self, x):
        return np.abs(np.linalg.norm(x, axis=-1) - 1.0) < 1e-9

    def _metric(self, x):
        return np.broadcast_to(self.radius**2 * np.eye(3), x.shape + (3,)).copy()

    def _angle(self, x, y):
        cross = np.linalg.norm(np.cross(x, y), axis=-1)
        return np.arctan2(cross, np.sum(x * y, axis=-1))

    def _distance(self, x, y):
        return self.radius * self._angle(x, y)

    def _exp(self, x, X):
        theta = np.linalg.norm(X, axis=-1)[..., None]
        with np.errstate(invalid="ignore", divide="ignore"):
            direction = np.where(theta > 0.0, X / theta, 0.0)
        y = np.cos(theta) * x + np.sin(theta) * direction
        return y / np.linalg.norm(y, axis=-1, keepdims=True)

    def _log(self, x, y):
        w = y - np.sum(x * y, axis=-1, keepdims=True) * x
        wn = np.linalg.norm(w, axis=-1, keepdims=True)
        theta = self._angle(x, y)[..., None]
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(wn > 0.0, theta * w / wn, 0.0)

    def sectional_curvature(self, x=None):
        return 1.0 / self.radius**2

    def injectivity_radius(self, x=None):
        return math.pi * self.radius


# -- typed wrappers ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ManifoldPoint:
    manifold: Manifold
    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", self.manifold.check_point(self.coords))

    @property
    def manifold_id(self):
        return self.manifold.ident


@dataclass(frozen=True, eq=False)
class TangentVec:
    base: ManifoldPoint
    comps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "comps", self.base.manifold._check_vector(self.comps))

    @property
    def manifold(self):
        return self.base.manifold

    def norm(self):
        return float(self.manifold.norm(self.base.coords, self.comps))


@dataclass(frozen=True, eq=False)
class Covector:
    base: ManifoldPoint
    comps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "comps", self.base.manifold._check_vector(self.comps))

    def __call__(self, Y: TangentVec):
        _same_base(self.base, Y.base)
        return float(self.comps @ Y.comps)


def _same_base(p: ManifoldPoint, q: ManifoldPoint):
    if p.manifold != q.manifold or not np.allclose(p.coords, q.coords, rtol=0, atol=SAME_POINT_TOL):
        raise UsageError("vectors are based at different points")


def point(m: Manifold, coords) -> ManifoldPoint:
    return ManifoldPoint(m, np.asarray(coords, dtype=float))


def tangent(m: Manifold, base, comps) -> TangentVec:
    if not isinstance(base, ManifoldPoint):
        base = point(m, base)
    return TangentVec(base, np.asarray(comps, dtype=float))


def inner(m: Manifold, X: TangentVec, Y: TangentVec) -> float:
    _same_base(X.base, Y.base)
    return float(m.inner(X.base.coords, X.comps, Y.comps))


def norm(m: Manifold, X: TangentVec) -> float:
    return float(m.norm(X.base.coords, X.comps))


def flat(m: Manifold, X: TangentVec) -> Covector:
    """Lower the index: the covector ``Y -> <X, Y>``."""
    G = m.metric_at(X.base.coords)
    return Covector(X.base, G @ X.comps)


def sharp(m: Manifold, eta: Covector) -> TangentVec:
    """Raise the index: the vector ``X`` with ``<X, Y> = eta(Y)``."""
    G = m.metric_at(eta.base.coords)
    try:
        comps = np.linalg.solve(G, eta.comps)
    except np.linalg.LinAlgError as exc:  # cannot happen for built-ins
        raise RuntimeError("singular metric") from exc
    return TangentVec(eta.base, comps)


# -- generic numeric routes ---------------------------------------------------


def log_via_distance_gradient(m: Manifold, x, y):
    """Log map from the gradient of the squared distance.

    ``exp_x^{-1} y = -1/2 G^{-1}(x) a`` with ``a_j`` the partial derivative
    of ``rho^2(., y)`` in chart coordinate j, taken by central differences.
    Independent of the closed-form ``log_map``; broadcasts over batches.
    """
    if isinstance(m, Sphere):
        raise UsageError("gradient log needs a chart manifold, not the embedded sphere")
    x, y = m.check_point(x), m.check_point(y)
    x, y = np.broadcast_arrays(x, y)
    h = fd_step(x)[..., None]
    n = m.coord_dim
    grad = np.empty(x.shape)
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        xp, xm = x + h * e, x - h * e
        if not (np.all(m.in_chart(xp)) and np.all(m.in_chart(xm))):
            raise DomainError("finite-difference step left the chart")
        grad[..., j] = (m._distance(xp, y) ** 2 - m._distance(xm, y) ** 2) / (2.0 * h[..., 0])
    G = m._metric(x)
    return -0.5 * np.linalg.solve(G, grad[..., None])[..., 0]


def christoffel_symbols(m: Manifold, x):
    """``Gamma[k, i, j]`` at a single chart point, metric derivatives by FD."""
    x = m.check_point(x)
    n = m.coord_dim
    h = float(fd_step(x))
    dG = np.empty((n, n, n))  # dG[l] = d g / d xi_l
    for l in range(n):
        e = np.zeros(n)
        e[l] = h
        if not (m.in_chart(x + e) and m.in_chart(x - e)):
            raise DomainError("finite-difference step left the chart")
        dG[l] = (m._metric(x + e) - m._metric(x - e)) / (2.0 * h)
    # term[i, j, l] = d_i g_jl + d_j g_il - d_l g_ij
    term = dG + dG.transpose(1, 0, 2) - dG.transpose(1, 2, 0)
    Ginv = np.linalg.inv(m._metric(x))
    return 0.5 * np.einsum("kl,ijl->kij", Ginv, term)


def geodesic_shoot(m: Manifold, x, X, n_steps=256):
    """Exponential map by RK4 on the geodesic equation over ``s in [0, 1]``.

    Serves as an oracle for the closed-form ``exp_map``.  Raises
    :class:`DomainError` (with the exit parameter in the message) if the
    geodesic leaves the chart.
    """
    if isinstance(m, Sphere):
        raise UsageError("geodesic_shoot needs a chart manifold")
    if n_steps < 16:
        raise UsageError("n_steps must be >= 16")
    x = m.check_point(x)
    X = m._check_vector(X)
    n = m.coord_dim
    h = 1.0 / n_steps

    def rhs(s, state):
        pos, vel = state[:n], state[n:]
        if not m.in_chart(pos):
            raise DomainError(f"geodesic left the chart at s={s:.6g}")
        gamma = christoffel_symbols(m, pos)
        return np.concatenate([vel, -np.einsum("kij,i,j->k", gamma, vel, vel)])

    state = np.concatenate([x, X])
    for k in range(n_steps):
        s = k * h
        k1 = rhs(s, state)
        k2 = rhs(s + h / 2, state + h / 2 * k1)
        k3 = rhs(s + h / 2, state + h / 2 * k2)
        k4 = rhs(s + h, state + h * k3)
        state = state + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not m.in_chart(state[:n]):
        raise DomainError("geodesic left the chart at s=1")
    return state[:n]
