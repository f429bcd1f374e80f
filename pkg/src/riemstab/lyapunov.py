"""Sampled numeric verification of Lyapunov-type stability conditions.

Every verdict here comes from evaluating the hypotheses on a finite,
deterministic sample; reports say so in their ``details``.  Nothing in this
module is an interval-arithmetic proof.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .dynamics import VectorField, _advance, _masked
from .errors import IntegrationError, PreconditionError, RangeError, UsageError
from .manifolds import FD_REL_STEP, Manifold, fd_step

SANDWICH_TOL = 1e-9
DECREASE_RTOL = 1e-6
DECREASE_ATOL = 1e-9
DOA_SAFETY = 0.99
GROWTH_RATIO = 1e6
MONOTONE_SLACK = 1e-9
EXP_BOUND_SLACK = 1e-6


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"


@dataclass
class CheckReport:
    verdict: Verdict
    n_samples: int
    worst_margin: float
    witness: Optional[tuple] = None  # (t, x) of the worst sample
    details: str = ""

    def __post_init__(self):
        self.verdict = Verdict(self.verdict)
        if self.verdict is Verdict.FAIL and (self.witness is None or not self.worst_margin < 0):
            raise ValueError("a failing report needs a witness with negative margin")

    @property
    def passed(self):
        return self.verdict is Verdict.PASS

    def to_dict(self):
        witness = None
        if self.witness is not None:
            t, x = self.witness
            witness = [float(t)] + [float(v) for v in np.atleast_1d(x)]
        margin = float(self.worst_margin)
        return {
            "verdict": self.verdict.value,
            "n_samples": int(self.n_samples),
            "worst_margin": margin if math.isfinite(margin) else None,
            "witness": witness,
            "details": self.details,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


@dataclass(frozen=True, eq=False)
class LyapunovCandidate:
    """``V(t, x)`` with comparison functions ``W1 <= V <= W2``, ``V' <= -W3``.

    All callables are vectorised: ``x`` has shape ``(..., n)`` and ``t`` the
    matching leading shape.  ``exp_constants`` is ``(k1, k2, k3, a)`` for the
    exponential-rate bounds ``k1 rho^a <= V <= k2 rho^a``.
    """

    V: Callable
    W1: Callable
    W2: Callable
    W3: Callable
    exp_constants: Optional[tuple] = None

    def __post_init__(self):
        if self.exp_constants is not None:
            if len(self.exp_constants) != 4 or not all(c > 0 for c in self.exp_constants):
                raise UsageError("exp_constants must be four positive numbers (k1, k2, k3, a)")


def positive_definite_violations(cand: LyapunovCandidate, vf: VectorField, xs):
    """Names of W_i that are not zero at x* or not positive on ``xs``."""
    bad = []
    xstar = vf.equilibrium
    for name in ("W1", "W2", "W3"):
        W = getattr(cand, name)
        if abs(float(W(xstar))) > 0 or not np.all(W(xs) > 0):
            bad.append(name)
    return bad


# -- sampling -------------------------------------------------------------


def unit_directions(m: Manifold, x, n_dirs):
    """``n_dirs`` unit vectors (in the metric at x) spanning the tangent space."""
    n = m.coord_dim
    if n == 1:
        base = np.array([[1.0], [-1.0]])
    elif n == 2:
        th = 2 * np.pi * np.arange(n_dirs) / n_dirs
        base = np.stack([np.cos(th), np.sin(th)], axis=-1)
    else:
        base = np.random.default_rng(0).normal(size=(n_dirs, n))
    L = np.linalg.cholesky(m.metric_at(x))
    u = np.linalg.solve(L.T, base.T).T
    return u / m.norm(x, u)[:, None]


@dataclass(frozen=True)
class PolarGrid:
    """Geodesic-polar grid: radii x directions x times about x*.

    Radii are ``radius * i / n_radii`` for ``i = 1..n_radii``.  ``radius``
    defaults to ``0.99 r0`` or 5 when r0 is infinite.
    """

    n_radii: int = 32
    n_dirs: int = 64
    n_times: int = 8
    t_max: float = 20.0
    radius: Optional[float] = None

    def sample_radius(self, vf):
        if self.radius is not None:
            return self.radius
        r0 = vf.domain_radius
        return 0.99 * r0 if math.isfinite(r0) else 5.0

    def points(self, vf: VectorField, radius=None):
        m, xs = vf.manifold, vf.equilibrium
        radius = self.sample_radius(vf) if radius is None else radius
        radii = radius * np.arange(1, self.n_radii + 1) / self.n_radii
        u = unit_directions(m, xs, self.n_dirs)
        X = radii[:, None, None] * u[None, :, :]
        return m.exp_map(xs, X.reshape(-1, m.coord_dim))

    def samples(self, vf: VectorField):
        xs = self.points(vf)
        times = np.linspace(0.0, self.t_max, self.n_times)
        t = np.repeat(times, len(xs))
        x = np.tile(xs, (len(times), 1))
        return t, x


def _samples(sampler, vf):
    if hasattr(sampler, "samples"):
        t, x = sampler.samples(vf)
    else:
        t, x = sampler
    t = np.asarray(t, dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.broadcast_to(t, x.shape[:-1]).copy()
    if len(x) == 0:
        raise UsageError("sampler produced no samples")
    return t, x


def _witness(t, x, i):
    return (float(t[i]), x[i].copy())


# -- condition checks ---------------------------------------------------------


def check_sandwich(cand: LyapunovCandidate, vf: VectorField, sampler) -> CheckReport:
    """``W1(x) <= V(t, x) <= W2(x)`` on every sample, tol ``1e-9 (1 + |V|)``."""
    t, x = _samples(sampler, vf)
    V = cand.V(t, x)
    margin = np.minimum(V - cand.W1(x), cand.W2(x) - V)
    tol = SANDWICH_TOL * (1.0 + np.abs(V))
    i = int(np.argmin(margin))
    ok = bool(np.all(margin >= -tol))
    return CheckReport(
        Verdict.PASS if ok else Verdict.FAIL,
        len(t),
        float(margin[i]),
        _witness(t, x, i) if margin[i] < 0 else None,
        f"sampled W1 <= V <= W2 over {len(t)} points; tol 1e-9(1+|V|)",
    )


def _time_derivative(V, t, x):
    h = FD_REL_STEP * np.maximum(1.0, np.abs(t))
    central = (V(t + h, x) - V(t - h, x)) / (2 * h)
    # Second-order one-sided near t = 0 so V is never probed at t < 0.
    # Written with differences so a time-constant V gives exactly zero.
    v0 = V(t, x)
    forward = (4 * (V(t + h, x) - v0) - (V(t + 2 * h, x) - v0)) / (2 * h)
    return np.where(t >= h, central, forward)


def lie_derivative(cand: LyapunovCandidate, vf: VectorField, t, x):
    """``V_t + dV(f)`` by central differences.

    The spatial part is a directional difference along f in chart
    coordinates with displacement ``1e-6 max(1, |x|)``.  Returns
    ``(vdot, ok)``; ``ok`` is False where a probe left the chart.
    """
    m = vf.manifold
    t = np.asarray(t, dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.broadcast_to(t, x.shape[:-1]).copy()
    f = vf(t, x)
    fn = np.linalg.norm(f, axis=-1)
    s = np.where(fn > 0, fd_step(x) / np.where(fn > 0, fn, 1.0), 0.0)
    xp, xm = x + s[:, None] * f, x - s[:, None] * f
    ok = m.in_chart(xp) & m.in_chart(xm)
    xp = np.where(ok[:, None], xp, x)
    xm = np.where(ok[:, None], xm, x)
    spatial = np.where(s > 0, (cand.V(t, xp) - cand.V(t, xm)) / np.where(s > 0, 2 * s, 1.0), 0.0)
    return _time_derivative(cand.V, t, x) + spatial, ok


def check_decrease(cand: LyapunovCandidate, vf: VectorField, sampler) -> CheckReport:
    """``V_t + dV(f) <= -W3`` on every sample.

    Tolerance ``1e-6 max(|Vdot|, |W3|) + 1e-9`` absorbs finite-difference
    error.  Samples whose probes leave the chart are skipped; more than 1%
    skipped makes the report inconclusive.
    """
    t, x = _samples(sampler, vf)
    vdot, ok = lie_derivative(cand, vf, t, x)
    w3 = cand.W3(x)
    margin = -w3 - vdot
    tol = DECREASE_RTOL * np.maximum(np.abs(vdot), np.abs(w3)) + DECREASE_ATOL
    skipped = int(np.sum(~ok))
    margin = np.where(ok, margin, np.inf)
    i = int(np.argmin(margin))
    details = f"sampled V_t + dV(f) <= -W3 over {len(t)} points; {skipped} skipped"
    if skipped > 0.01 * len(t):
        return CheckReport(Verdict.INCONCLUSIVE, len(t) - skipped, float(margin[i]), None, details)
    passed = bool(np.all(margin >= -tol))
    return CheckReport(
        Verdict.PASS if passed else Verdict.FAIL,
        len(t) - skipped,
        float(margin[i]),
        _witness(t, x, i) if margin[i] < 0 else None,
        details,
    )


# -- domain of attraction -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class DoaEstimate:
    """Sublevel estimate ``{x in cl B(r) : W2(x) <= c}`` of the attraction set."""

    r: float
    c: float
    ring_min: float
    argmin_direction: np.ndarray
    member_test: Callable
    sample_points: np.ndarray
    boundary: np.ndarray = field(default=None)


def _ring(m, xs, r, thetas, L_inv_T):
    base = np.stack([np.cos(thetas), np.sin(thetas)], axis=-1)
    u = base @ L_inv_T.T
    u = u / m.norm(xs, u)[:, None]
    return u, m.exp_map(xs, r * u)


def estimate_doa(cand: LyapunovCandidate, vf: VectorField, r: float, n_ring: int = 64,
                 n_fill: int = 16) -> DoaEstimate:
    """Attraction estimate for radius ``r``.

    ``c`` is ``0.99`` times the minimum of W1 over the geodesic sphere of
    radius r, sampled on ``n_ring`` directions and refined by a golden-section
    pass around the best direction (two-dimensional manifolds).
    """
    m, xs = vf.manifold, vf.equilibrium
    r0 = min(vf.domain_radius, m.injectivity_radius(xs))
    if not r > 0:
        raise UsageError("r must be positive")
    if r >= r0:
        raise RangeError(f"r = {r} is not below r0 = {r0:.17g}")
    if n_ring < 64:
        raise UsageError("n_ring must be >= 64")
    u = unit_directions(m, xs, n_ring)
    w = cand.W1(m.exp_map(xs, r * u))
    k = int(np.argmin(w))
    ring_min, best_u = float(w[k]), u[k]
    if m.coord_dim == 2:
        L_inv_T = np.linalg.inv(np.linalg.cholesky(m.metric_at(xs))).T
        step = 2 * np.pi / n_ring
        lo, hi = 2 * np.pi * k / n_ring - step, 2 * np.pi * k / n_ring + step
        g = (math.sqrt(5) - 1) / 2
        for _ in range(60):
            a_, b_ = hi - g * (hi - lo), lo + g * (hi - lo)
            uu, pts = _ring(m, xs, r, np.array([a_, b_]), L_inv_T)
            fa, fb = cand.W1(pts)
            if fa < fb:
                hi = b_
            else:
                lo = a_
        uu, pts = _ring(m, xs, r, np.array([0.5 * (lo + hi)]), L_inv_T)
        wv = float(cand.W1(pts)[0])
        if wv < ring_min:
            ring_min, best_u = wv, uu[0]
    c = DOA_SAFETY * ring_min

    def member(x):
        x = np.asarray(x, dtype=float)
        return (m._distance(x, xs) <= r) & (cand.W2(x) <= c)

    grid = PolarGrid(n_radii=n_fill, n_dirs=n_ring, radius=r).points(vf)
    inside = grid[member(grid)]
    return DoaEstimate(r, c, ring_min, best_u, member, inside, _doa_boundary(cand, vf, r, c, u))


def _doa_boundary(cand, vf, r, c, u, iters=60):
    """Per direction, the largest s <= r with W2(exp(x*, s u)) <= c."""
    m, xs = vf.manifold, vf.equilibrium
    lo = np.zeros(len(u))
    hi = np.full(len(u), float(r))
    full = cand.W2(m.exp_map(xs, r * u)) <= c
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = cand.W2(m.exp_map(xs, mid[:, None] * u)) <= c
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    s = np.where(full, r, lo)
    return m.exp_map(xs, s[:, None] * u)


# -- limit behaviour ----------------------------------------------------------


def _radial_minima(func, vf: VectorField, radii, n_dirs=64):
    """Minimum of ``func`` on each geodesic sphere, stopping where the sphere
    is no longer representable in the chart."""
    m, xs = vf.manifold, vf.equilibrium
    u = unit_directions(m, xs, n_dirs)
    out = []
    for r in radii:
        with np.errstate(all="ignore"):
            pts = m._exp(xs, r * u)
        if not np.all(m.in_chart(pts)):
            break
        with np.errstate(all="ignore"):
            vals = np.asarray(func(pts), dtype=float)
        if not np.all(np.isfinite(vals)):
            break
        k = int(np.argmin(vals))
        out.append((float(r), float(vals[k]), pts[k]))
    return out


def _dyadic_radii(r0, k_max=20):
    ks = np.arange(1, k_max + 1)
    if math.isfinite(r0):
        return r0 * (1.0 - 2.0 ** -ks)
    return 2.0**ks


def check_unbounded(func, vf: VectorField, r0=None, n_dirs=64, label="W") -> CheckReport:
    """Trend test for ``func -> +inf`` as ``rho(x, x*) -> r0``.

    Minima of ``func`` over geodesic spheres at radii ``r0 (1 - 2^-k)`` (or
    ``2^k`` when r0 is infinite), ``k = 1..20``.  Passes when the minima
    increase strictly and either grow by more than 1e6 overall or at least
    double at every radius.  Radii beyond what the chart can represent are
    dropped; fewer than four usable radii is inconclusive.
    """
    r0 = vf.domain_radius if r0 is None else r0
    rows = _radial_minima(func, vf, _dyadic_radii(r0), n_dirs)
    n_eval = len(rows) * n_dirs
    if len(rows) < 4:
        return CheckReport(Verdict.INCONCLUSIVE, n_eval, float("nan"), None,
                           f"{label}: only {len(rows)} radii representable")
    mins = np.array([v for _, v, _ in rows])
    # Strict increase means at least one ulp, so a saturated plateau fails.
    diffs = np.diff(mins) - np.spacing(np.abs(mins[:-1]))
    details = (f"{label} minima over {len(rows)} dyadic radii up to {rows[-1][0]:.6g}: "
               f"first {mins[0]:.6g}, last {mins[-1]:.6g}")
    if len(rows) < 20:
        details += f" (radii beyond {rows[-1][0]:.6g} not representable)"
    if not np.all(diffs >= 0):
        i = int(np.argmin(diffs)) + 1
        return CheckReport(Verdict.FAIL, n_eval, float(diffs[i - 1]), (0.0, rows[i][2]),
                           details + "; not increasing")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = mins[1:] / mins[:-1]
        growth = math.log10(mins[-1] / mins[0]) - math.log10(GROWTH_RATIO) if mins[0] > 0 else math.inf
    doubling = float(np.log2(np.min(ratios)) - 1.0 + 1e-6)
    margin = max(growth, doubling)
    if margin >= 0:
        return CheckReport(Verdict.PASS, n_eval, margin, None, details)
    i = int(np.argmin(ratios)) + 1
    return CheckReport(Verdict.FAIL, n_eval, margin, (0.0, rows[i][2]), details + "; growth stalls")


def check_properness(cand: LyapunovCandidate, vf: VectorField, n_dirs=64) -> CheckReport:
    """``W1(x) -> +inf`` as ``rho(x, x*) -> r0``."""
    return check_unbounded(cand.W1, vf, n_dirs=n_dirs, label="W1")


def barrier_scaled(func, vf: VectorField):
    """``func(x) / (r0^2 - rho^2(x, x*))`` for finite r0."""
    m, xs, r0 = vf.manifold, vf.equilibrium, vf.domain_radius
    return lambda x: func(x) / (r0**2 - m._distance(np.asarray(x, dtype=float), xs) ** 2)


def check_nonexpansion(vf: VectorField, sampler) -> CheckReport:
    """``d rho^2(., x*) (f(t, x)) <= 0`` on every sample."""
    xs = vf.equilibrium
    m = vf.manifold
    sq = LyapunovCandidate(
        V=lambda t, x: m._distance(x, xs) ** 2,
        W1=lambda x: 0 * x[..., 0], W2=lambda x: 0 * x[..., 0], W3=lambda x: 0 * x[..., 0],
    )
    rep = check_decrease(sq, vf, sampler)
    rep.details = rep.details.replace("V_t + dV(f) <= -W3", "d rho^2(f) <= 0")
    return rep


def check_barrier(cand: LyapunovCandidate, vf: VectorField, sampler=None, n_dirs=64) -> CheckReport:
    """Barrier conditions for finite r0.

    ``W1 / (r0^2 - rho^2) -> +inf`` at the boundary (trend test) and
    ``d rho^2(f) <= 0`` on a grid strictly inside ``B(x*, r0)``.
    """
    r0 = vf.domain_radius
    if not math.isfinite(r0):
        raise PreconditionError("check_barrier needs a finite r0")
    sampler = sampler or PolarGrid(radius=0.99 * r0)
    limit = check_unbounded(barrier_scaled(cand.W1, vf), vf, n_dirs=n_dirs, label="W1/(r0^2-rho^2)")
    inward = check_nonexpansion(vf, sampler)
    parts = [limit, inward]
    if any(p.verdict is Verdict.FAIL for p in parts):
        verdict = Verdict.FAIL
    elif all(p.passed for p in parts):
        verdict = Verdict.PASS
    else:
        verdict = Verdict.INCONCLUSIVE
    worst = min(parts, key=lambda p: p.worst_margin if math.isfinite(p.worst_margin) else math.inf)
    if verdict is Verdict.FAIL:
        worst = next(p for p in parts if p.verdict is Verdict.FAIL)
    return CheckReport(
        verdict,
        limit.n_samples + inward.n_samples,
        worst.worst_margin,
        worst.witness,
        f"limit: {limit.verdict.value} ({limit.details}); "
        f"inward: {inward.verdict.value} ({inward.details})",
    )


# -- trajectory-based verification --------------------------------------------


def exponential_envelope(constants, rho0, dt):
    k1, k2, k3, a = constants
    return (k2 / k1) ** (1.0 / a) * rho0 * np.exp(-k3 / (a * k2) * dt)


def verify_exponential_bound(cand: LyapunovCandidate, vf: VectorField,
                             trajectories: Sequence) -> CheckReport:
    """Every sample obeys ``rho(x(t)) <= (k2/k1)^(1/a) rho(x(t0)) e^{-k3 (t-t0)/(a k2)}``
    up to a multiplicative slack ``1 + 1e-6``."""
    if cand.exp_constants is None:
        raise PreconditionError("candidate carries no exponential constants")
    k1, k2, k3, a = cand.exp_constants
    m, xs = vf.manifold, vf.equilibrium
    ball = (k1 / k2) ** (1.0 / a) * vf.domain_radius
    worst, wit, n = math.inf, None, 0
    for tr in trajectories:
        rho = m._distance(tr.points, xs)
        if not rho[0] < ball:
            raise PreconditionError(
                f"initial state at distance {rho[0]:.6g} outside the ball of radius {ball:.6g}"
            )
        bound = exponential_envelope(cand.exp_constants, rho[0], tr.times - tr.times[0])
        margin = bound * (1.0 + EXP_BOUND_SLACK) - rho
        i = int(np.argmin(margin))
        n += len(rho)
        if margin[i] < worst:
            worst, wit = float(margin[i]), (float(tr.times[i]), tr.points[i].copy())
    ok = worst >= 0
    return CheckReport(
        Verdict.PASS if ok else Verdict.FAIL, n, worst, None if ok else wit,
        f"exponential envelope over {len(trajectories)} trajectories, rate {k3 / (a * k2):.6g}",
    )


@dataclass
class AttractionRun:
    t0: float
    x0: np.ndarray
    hit_time: float  # inf when the budget ran out
    monotone: bool


def verify_uniform_attraction(vf: VectorField, x0_list, t0_list, eps=1e-3, t_budget=200.0,
                              h0=1e-3, factor_limit=10.0, runs_out=None) -> CheckReport:
    """Uniform-attraction surrogate.

    Integrates every ``(t0, x0)`` pair until ``rho(x(t), x*) < eps`` or
    ``t_budget`` elapses.  Passes when every run hits, the sampled distance
    never increases (slack 1e-9, so the forward envelope coincides with
    the samples), and for each x0 the hitting times across t0 differ by at
    most ``factor_limit``.
    """
    m, xs = vf.manifold, vf.equilibrium
    x0s = np.atleast_2d(np.asarray(x0_list, dtype=float))
    t0s = np.asarray(t0_list, dtype=float)
    if not eps > 0:
        raise UsageError("eps must be positive")
    T0 = np.repeat(t0s, len(x0s))
    X = np.tile(x0s, (len(t0s), 1))
    B = len(X)
    rho_prev = m.distance(X, xs)
    hit = np.where(rho_prev < eps, 0.0, np.inf)
    monotone = np.ones(B, dtype=bool)
    rhs = _masked(vf, m.in_chart)
    ids = np.arange(B)
    y = X.copy()
    n_max = int(math.ceil(t_budget / h0 - 1e-9))
    failure = None
    for k in range(n_max):
        act = ids[np.isinf(hit)]
        if len(act) == 0:
            break
        t = T0[act] + k * h0
        try:
            y[act] = _advance(rhs, m.in_chart, t, y[act], np.full(len(act), h0), act)
        except IntegrationError as exc:
            failure = exc
            break
        rho = m._distance(y[act], xs)
        monotone[act] &= rho <= rho_prev[act] + MONOTONE_SLACK
        rho_prev[act] = rho
        done = act[rho < eps]
        hit[done] = (k + 1) * h0
    runs = [AttractionRun(T0[i], X[i], hit[i], bool(monotone[i])) for i in range(B)]
    if runs_out is not None:
        runs_out.extend(runs)
    n = B
    if failure is not None:
        i = failure.index
        return CheckReport(Verdict.FAIL, n, -1.0, (T0[i], X[i]),
                           f"integration failed for run t0={T0[i]:.6g}, x0={X[i].tolist()}: {failure}")
    missed = np.flatnonzero(np.isinf(hit))
    if len(missed):
        i = int(missed[0])
        return CheckReport(Verdict.FAIL, n, -float(rho_prev[i]), (T0[i], X[i]),
                           f"{len(missed)} runs did not reach eps={eps} within {t_budget}; "
                           f"first: t0={T0[i]:.6g}, x0={X[i].tolist()}")
    if not monotone.all():
        i = int(np.flatnonzero(~monotone)[0])
        return CheckReport(Verdict.FAIL, n, -MONOTONE_SLACK, (T0[i], X[i]),
                           "distance to x* increased along a trajectory")
    H = hit.reshape(len(t0s), len(x0s))
    factors = []
    for j in range(len(x0s)):
        col = H[:, j]
        if col.max() == 0:
            factors.append(1.0)
        else:
            factors.append(col.max() / max(col.min(), h0))
    worst_factor = max(factors)
    j = int(np.argmax(factors))
    margin = min(t_budget - float(hit.max()), factor_limit - worst_factor)
    details = (f"{B} runs hit eps={eps}; max hitting time {hit.max():.6g} of budget {t_budget}; "
               f"max/min hitting time over t0 at most {worst_factor:.4g} (limit {factor_limit})")
    if worst_factor > factor_limit:
        i = int(np.argmax(H[:, j])) * len(x0s) + j
        return CheckReport(Verdict.FAIL, n, margin, (T0[i], X[i]), details)
    return CheckReport(Verdict.PASS, n, margin, None, details)
