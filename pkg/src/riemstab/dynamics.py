"""Nonautonomous vector fields and three trajectory integrators.

All three integrators use the same fixed-grid RK4 core:

* :func:`integrate_chart` steps the chart coordinates directly (reference);
* :func:`integrate_pullback` steps ``X = exp_{x*}^{-1} x`` in the tangent
  space at the equilibrium under the pulled-back field, then maps back;
* :func:`integrate_compactified` additionally applies the radial map
  ``X -> X / (r0 - |X|)`` taking the ball of radius r0 onto the whole
  tangent space.

Output is always on the grid ``t0 + k h0``.  A step is rejected and
replaced by two half steps when a stage leaves the chart or when the local
Lipschitz estimate puts ``h L`` outside the RK4 stability interval; the
grid itself never changes.  Every integrator is batched: ``x0`` may carry
a leading batch axis and ``t0`` may differ per run.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ChartExitError, DomainError, RangeError, StiffnessError, UsageError
from .manifolds import FD_REL_STEP, Manifold, TangentVec, fd_step, point

#: Times at which the equilibrium property f(t, x*) = 0 is spot-checked.
EQUILIBRIUM_TIMES = (0.0, 0.1, 1.0, 10.0, 100.0)
#: Reject a step when h * (local Lipschitz estimate) exceeds this.
STIFFNESS_LIMIT = 2.0
STIFFNESS_FLOOR = 1e-9
MAX_HALVINGS = 30


@dataclass(frozen=True, eq=False)
class VectorField:
    """``f(t, x)`` in chart components, vectorised over leading axes.

    ``func(t, x)`` receives ``t`` of shape ``x.shape[:-1]`` (or a scalar).
    ``domain_radius`` is r0, the radius of the largest geodesic ball about
    the equilibrium inside the domain (``inf`` for the whole manifold).
    """

    manifold: Manifold
    func: Callable
    equilibrium: np.ndarray
    domain_radius: float = math.inf
    name: str = ""

    def __post_init__(self):
        eq = self.manifold.check_point(self.equilibrium)
        object.__setattr__(self, "equilibrium", eq)
        if not self.domain_radius > 0:
            raise UsageError("domain_radius must be positive")
        resid = max(
            float(np.linalg.norm(self.func(np.float64(t), eq))) for t in EQUILIBRIUM_TIMES
        )
        if resid >= 1e-12:
            raise UsageError(f"f(t, x*) != 0 at the declared equilibrium (|f| = {resid:.3g})")

    def __call__(self, t, x):
        return np.asarray(self.func(t, x), dtype=float)

    def in_domain(self, x):
        m = self.manifold
        ok = m.in_chart(x)
        if math.isfinite(self.domain_radius):
            with np.errstate(invalid="ignore"):
                ok &= m._distance(np.where(ok[..., None], x, self.equilibrium), self.equilibrium) < self.domain_radius
        return ok

    def eval(self, t, x) -> TangentVec:
        if t < 0:
            raise UsageError("t must be >= 0")
        x = self.manifold.check_point(x)
        if not np.all(self.in_domain(x)):
            raise DomainError(f"point outside the domain of {self.name or 'the field'}")
        return TangentVec(point(self.manifold, x), self(np.float64(t), x))


def eval_field(vf: VectorField, t, x) -> TangentVec:
    return vf.eval(t, x)


def lipschitz_quotients(vf: VectorField, t, x, n_probe=8, seed=0):
    """Difference quotients ``|f(t,x+d) - f(t,x)| / |d|`` for random small d.

    A cheap spot-check of local Lipschitz continuity; returns the max.
    """
    x = vf.manifold.check_point(x)
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(n_probe,) + x.shape)
    d *= (1e-4 * np.maximum(1.0, np.linalg.norm(x))) / np.linalg.norm(d, axis=-1, keepdims=True)
    xs = x + d
    num = np.linalg.norm(vf(t, xs) - vf(t, x), axis=-1)
    return float(np.max(num / np.linalg.norm(d, axis=-1)))


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    points: np.ndarray
    t0: float
    integrator_tag: str

    def __len__(self):
        return len(self.times)

    @property
    def final(self):
        return self.points[-1]

    def distances(self, m: Manifold, x_star):
        return m._distance(self.points, np.asarray(x_star, dtype=float))

    def to_csv(self, path=None):
        """Header ``t,coord_0,...``; 17 significant digits.  Returns the text."""
        buf = io.StringIO()
        n = self.points.shape[-1]
        buf.write(",".join(["t"] + [f"coord_{i}" for i in range(n)]) + "\n")
        for t, p in zip(self.times, self.points):
            buf.write(",".join(f"{v:.17g}" for v in (t, *p)) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


# -- RK4 core -----------------------------------------------------------------


def _masked(rhs, valid):
    """Wrap ``rhs`` so rows failing ``valid`` come back as NaN."""

    def wrapped(t, y):
        with np.errstate(invalid="ignore"):
            ok = valid(y)
        if ok.all():
            return rhs(t, y)
        out = np.full(y.shape, np.nan)
        if ok.any():
            out[ok] = rhs(t[ok], y[ok])
        return out

    return wrapped


def _rk4_try(rhs, valid, t, y, h):
    hc = h[:, None]
    k1 = rhs(t, y)
    k2 = rhs(t + h / 2, y + hc / 2 * k1)
    k3 = rhs(t + h / 2, y + hc / 2 * k2)
    k4 = rhs(t + h, y + hc * k3)
    y_new = y + hc / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    stages = np.concatenate([k1, k2, k3, k4, y_new], axis=-1)
    exited = ~np.all(np.isfinite(stages), axis=-1)
    exited[~exited] = ~valid(y_new[~exited])
    with np.errstate(invalid="ignore", divide="ignore"):
        dk = np.linalg.norm(k2 - k1, axis=-1)
        dy = 0.5 * h * np.linalg.norm(k1, axis=-1)
        # Displacements at roundoff level carry no stiffness information.
        resolved = dy > STIFFNESS_FLOOR * np.maximum(1.0, np.linalg.norm(y, axis=-1))
        lip = np.where(resolved, dk / np.where(resolved, dy, 1.0), 0.0)
    stiff = ~exited & (h * lip > STIFFNESS_LIMIT)
    return y_new, exited, stiff


def _advance(rhs, valid, t, y, h, ids, depth=0):
    """One grid step for every row, halving rejected rows recursively."""
    y_new, exited, stiff = _rk4_try(rhs, valid, t, y, h)
    bad = exited | stiff
    if not bad.any():
        return y_new
    if depth >= MAX_HALVINGS:
        i = int(np.flatnonzero(bad)[0])
        err = ChartExitError if exited[i] else StiffnessError
        what = "left the domain" if exited[i] else "step underflow (stiff)"
        raise err(
            f"run {int(ids[i])}: {what} near t={t[i]:.6g}",
            time=float(t[i]), state=y[i].copy(), index=int(ids[i]),
        )
    idx = np.flatnonzero(bad)
    hh = h[idx] / 2
    sub = _advance(rhs, valid, t[idx], y[idx], hh, ids[idx], depth + 1)
    sub = _advance(rhs, valid, t[idx] + hh, sub, hh, ids[idx], depth + 1)
    y_new[idx] = sub
    return y_new


def _n_steps(t0, t_max, h0):
    span = t_max - t0
    if np.any(span <= 0):
        raise UsageError("t_max must exceed t0")
    return np.ceil(span / h0 - 1e-9).astype(int)


def _march(rhs, valid, t0, y0, t_max, h0, every=1):
    """Integrate a batch on the grid ``t0 + k h0`` up to ``t_max``.

    Returns per-run lists of (times, states) recorded every ``every`` steps
    plus the final step.
    """
    if not h0 > 0:
        raise UsageError("h0 must be positive")
    y0 = np.asarray(y0, dtype=float)
    B = y0.shape[0]
    t0 = np.broadcast_to(np.asarray(t0, dtype=float), (B,)).copy()
    n = _n_steps(t0, t_max, h0)
    if not np.all(valid(y0)):
        raise DomainError("initial state outside the integration domain")
    rhs = _masked(rhs, valid)
    y = y0.copy()
    rec_t = [[t0[i]] for i in range(B)]
    rec_y = [[y0[i].copy()] for i in range(B)]
    ids = np.arange(B)
    for k in range(int(n.max())):
        act = ids[k < n]
        t = t0[act] + k * h0
        h = np.where(k == n[act] - 1, t_max - t, h0)
        y[act] = _advance(rhs, valid, t, y[act], h, act)
        due = act if (k + 1) % every == 0 else act[n[act] == k + 1]
        for i in due:
            rec_t[i].append(t0[i] + (k + 1) * h0 if k + 1 < n[i] else t_max)
            rec_y[i].append(y[i].copy())
    return [np.array(r) for r in rec_t], [np.array(r) for r in rec_y]


def _as_batch(m, x0):
    x0 = np.asarray(x0, dtype=float)
    single = x0.ndim == 1
    return single, np.atleast_2d(x0)


def _trajectories(times, states, t0, tag, single):
    t0 = np.broadcast_to(np.asarray(t0, dtype=float), (len(times),))
    out = [Trajectory(tt, ss, float(t), tag) for tt, ss, t in zip(times, states, t0)]
    return out[0] if single else out


# -- chart integrator -------------------------------------------------------


def integrate_chart(vf: VectorField, t0, x0, t_max, h0, every=1):
    """RK4 in chart coordinates.  Returns a Trajectory (or a list for a batch)."""
    m = vf.manifold
    single, x0 = _as_batch(m, x0)
    times, states = _march(vf, m.in_chart, t0, x0, t_max, h0, every)
    return _trajectories(times, states, t0, "chart", single)


# -- pullback integrator ----------------------------------------------------


def _tangent_norm(G, X):
    return np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", X, G, X), 0.0))


def _pullback_kernel(vf: VectorField):
    """``F(t, X)`` as a batched kernel plus a validity mask for X."""
    m = vf.manifold
    xs = vf.equilibrium
    G = m._metric(xs)
    inj = m.injectivity_radius(xs)

    def valid(X):
        ok = _tangent_norm(G, X) < inj
        with np.errstate(all="ignore"):
            y = m._exp(xs, X)
        return ok & m.in_chart(y)

    def F(t, X):
        y = m._exp(xs, X)
        f = vf(t, y)
        fn = np.linalg.norm(f, axis=-1)
        s = np.where(fn > 0, fd_step(y) / np.where(fn > 0, fn, 1.0), 0.0)[..., None]
        yp, ym = y + s * f, y - s * f
        ok = m.in_chart(yp) & m.in_chart(ym)
        with np.errstate(all="ignore"):
            jvp = (m._log(xs, yp) - m._log(xs, ym)) / np.where(s > 0, 2 * s, 1.0)
        jvp = np.where(s > 0, jvp, 0.0)
        return np.where(ok[..., None], jvp, np.nan)

    return F, valid


def pullback_field(vf: VectorField, t, X):
    """``d(exp_{x*}^{-1})_{exp X} f(t, exp_{x*} X)``, a vector at x*."""
    m = vf.manifold
    comps = X.comps if isinstance(X, TangentVec) else np.asarray(X, dtype=float)
    G = m._metric(vf.equilibrium)
    if np.any(_tangent_norm(G, comps) >= m.injectivity_radius(vf.equilibrium)):
        raise RangeError("|X| must be below the injectivity radius at x*")
    F, valid = _pullback_kernel(vf)
    batch = np.atleast_2d(comps)
    if not np.all(valid(batch)):
        raise DomainError("exp_{x*} X lies outside the chart")
    out = F(np.full(batch.shape[0], float(t)), batch)
    out = out[0] if comps.ndim == 1 else out
    if comps.ndim == 1:
        return TangentVec(point(m, vf.equilibrium), out)
    return out


def integrate_pullback(vf: VectorField, t0, x0, t_max, h0, every=1):
    m = vf.manifold
    single, x0 = _as_batch(m, x0)
    xs = vf.equilibrium
    X0 = m.log_map(xs, x0)
    F, valid = _pullback_kernel(vf)
    try:
        times, states = _march(F, valid, t0, X0, t_max, h0, every)
    except ChartExitError as exc:
        raise RangeError(f"pulled-back state escaped the injectivity ball: {exc}") from exc
    points = [m._exp(xs, X) for X in states]
    return _trajectories(times, points, t0, "pullback", single)


# -- compactified integrator -------------------------------------------------


def _compactify_arr(G, X, r0):
    nX = _tangent_norm(G, X)[..., None]
    return X / (r0 - nX)


def _decompactify_arr(G, Y, r0):
    nY = _tangent_norm(G, Y)[..., None]
    return r0 * Y / (1.0 + nY)


def compactify(X: TangentVec, r0: float) -> TangentVec:
    """``X / (r0 - |X|)``: the open r0-ball onto the whole tangent space."""
    if not (0 < r0 < math.inf):
        raise UsageError("r0 must be finite and positive")
    if X.norm() >= r0:
        raise RangeError(f"|X| = {X.norm():.6g} is not below r0 = {r0}")
    G = X.manifold.metric_at(X.base.coords)
    return TangentVec(X.base, _compactify_arr(G, X.comps, r0))


def decompactify(Y: TangentVec, r0: float) -> TangentVec:
    """Inverse of :func:`compactify`: ``r0 Y / (1 + |Y|)``."""
    if not (0 < r0 < math.inf):
        raise UsageError("r0 must be finite and positive")
    G = Y.manifold.metric_at(Y.base.coords)
    return TangentVec(Y.base, _decompactify_arr(G, Y.comps, r0))


def integrate_compactified(vf: VectorField, t0, x0, t_max, h0, r0, every=1):
    """Integrate ``Y = phi(exp_{x*}^{-1} x)`` and map back.

    ``r0`` must be finite and strictly below the injectivity radius at x*;
    every reconstructed point lies in the open geodesic r0-ball.
    """
    m = vf.manifold
    xs = vf.equilibrium
    if not (0 < r0 < math.inf) or r0 >= m.injectivity_radius(xs):
        raise RangeError("r0 must be finite, positive and below the injectivity radius")
    single, x0 = _as_batch(m, x0)
    if np.any(m.distance(xs, x0) >= r0):
        raise RangeError(f"initial state outside the ball of radius r0 = {r0}")
    G = m._metric(xs)
    F, pull_valid = _pullback_kernel(vf)

    def valid(Y):
        return pull_valid(_decompactify_arr(G, Y, r0))

    def Fhat(t, Y):
        X = _decompactify_arr(G, Y, r0)
        FX = F(t, X)
        nF = np.linalg.norm(FX, axis=-1)
        gap = r0 - _tangent_norm(G, X)
        step = np.minimum(FD_REL_STEP * np.maximum(1.0, np.linalg.norm(X, axis=-1)), 0.25 * gap)
        with np.errstate(all="ignore"):
            s = np.where(nF > 0, step / np.where(nF > 0, nF, 1.0), 0.0)[..., None]
            d = (_compactify_arr(G, X + s * FX, r0) - _compactify_arr(G, X - s * FX, r0)) / np.where(
                s > 0, 2 * s, 1.0
            )
        return np.where(s > 0, d, np.where(np.isfinite(FX), 0.0, np.nan))

    Y0 = _compactify_arr(G, m.log_map(xs, x0), r0)
    try:
        times, states = _march(Fhat, valid, t0, Y0, t_max, h0, every)
    except ChartExitError as exc:
        raise RangeError(f"compactified state left the domain: {exc}") from exc
    points = [m._exp(xs, _decompactify_arr(G, Y, r0)) for Y in states]
    return _trajectories(times, points, t0, "compactified", single)
