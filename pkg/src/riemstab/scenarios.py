"""Built-in scenarios and strict JSON scenario configs.

A scenario binds a manifold, a vector field, a Lyapunov candidate, run
parameters and the list of claims expected to verify.  Four templates
exist:

``hyperbolic``
    the planar field ``f1 = -2 d x1 x2^2``, ``f2 = d x2 (a^2 + x1^2 - x2^2)``
    on the half-plane with the hyperbolic metric, ``V = rho^2(x, A)``,
    ``A = (0, a)``.
``euclidean``
    the same field with the flat metric on the half-plane chart, so the
    domain radius about A is ``a``; ``V = |x - A|^2``.
``linear``
    ``x' = -lambda x`` on R^n with ``V = |x|^2`` and an exact solution.
``zero``
    ``f = 0`` on R^n.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dynamics import VectorField, integrate_chart
from .errors import ConfigError
from .lyapunov import (
    CheckReport,
    LyapunovCandidate,
    PolarGrid,
    check_barrier,
    check_decrease,
    check_properness,
    check_sandwich,
    verify_exponential_bound,
    verify_uniform_attraction,
)
from .manifolds import Euclidean, HalfPlane, Manifold

TEMPLATES = ("hyperbolic", "euclidean", "linear", "zero")
CLAIMS = ("sandwich", "decrease", "properness", "barrier", "exponential_bound", "uniform_attraction")

RUN_DEFAULTS = {
    "t_max": 50.0,
    "h0": 1e-3,
    "eps": 1e-3,
    "t_budget": 200.0,
    "t0_list": [float(k) for k in range(11)],
}
DEFAULT_CLAIMS = {
    "hyperbolic": ["sandwich", "decrease", "properness", "uniform_attraction"],
    "euclidean": ["sandwich", "decrease", "barrier", "uniform_attraction"],
    "linear": ["sandwich", "decrease", "properness", "exponential_bound"],
    "zero": ["sandwich"],
}
TEMPLATE_PARAMS = {
    "hyperbolic": {"a": 1.0, "d": "two_plus_sin", "w3_scale": 1.0},
    "euclidean": {"a": 1.0, "d": "two_plus_sin", "w3_scale": 1.0},
    "linear": {"n": 1, "lambda": 1.0},
    "zero": {"n": 2},
}
COMMON_KEYS = ("template", "name", "claims", "sample_radius", "run")
RUN_KEYS = ("t_max", "h0", "eps", "t_budget", "t0_list", "x0_list")


@dataclass(frozen=True)
class RunConfig:
    """Run parameters; ``t_max`` is an absolute end time shared by every t0."""

    t_max: float
    h0: float
    eps: float
    t_budget: float
    t0_list: tuple
    x0_list: np.ndarray


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    template: str
    manifold: Manifold
    field: VectorField
    candidate: LyapunovCandidate
    run: RunConfig
    claims: tuple
    sample_radius: Optional[float]
    config: dict
    warnings: tuple = ()
    exact: Optional[Callable] = None  # exact(t0, x0, t) when known

    def grid(self, n_radii=32, n_dirs=64, n_times=8) -> PolarGrid:
        return PolarGrid(n_radii=n_radii, n_dirs=n_dirs, n_times=n_times, radius=self.sample_radius)


# -- the planar example field ---------------------------------------------------


def d_function(d):
    """``d(t)`` for the ``d`` parameter: ``"two_plus_sin"`` or a constant."""
    if d == "two_plus_sin":
        return lambda t: 2.0 + np.sin(t)
    c = float(d)
    return lambda t: c + 0.0 * np.asarray(t, dtype=float)


def d_lower_bound(d):
    return 1.0 if d == "two_plus_sin" else float(d)


def planar_field(a, d):
    dfun = d_function(d)

    def f(t, x):
        x1, x2 = x[..., 0], x[..., 1]
        dd = dfun(np.asarray(t, dtype=float))
        return np.stack([-2.0 * dd * x1 * x2**2, dd * x2 * (a**2 + x1**2 - x2**2)], axis=-1)

    return f


def hyperbolic_vdot(a, d, t, x):
    """Closed-form derivative of ``rho^2(., A)`` along the planar field.

    ``-2 d rho (4 x1^2 x2^2 + (x2^2 - x1^2 - a^2)^2) /
    (sqrt(x1^2 + (a + x2)^2) sqrt(x1^2 + (a - x2)^2))``; undefined at A.
    """
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    rho = HalfPlane()._distance(x, np.array([0.0, a]))
    num = 4 * x1**2 * x2**2 + (x2**2 - x1**2 - a**2) ** 2
    den = np.sqrt(x1**2 + (a + x2) ** 2) * np.sqrt(x1**2 + (a - x2) ** 2)
    return -2.0 * d_function(d)(np.asarray(t, dtype=float)) * rho * num / den


def _hyperbolic_candidate(a, k):
    m = HalfPlane()
    A = np.array([0.0, a])

    def rho2(x):
        return m._distance(np.asarray(x, dtype=float), A) ** 2

    def W3(x):
        # The quotient in hyperbolic_vdot equals |z^2 + a^2| for z = x1 + i x2,
        # i.e. the product of the two square roots, which is finite at A.
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        rho = m._distance(x, A)
        return 2.0 * k * rho * np.sqrt(x1**2 + (a + x2) ** 2) * np.sqrt(x1**2 + (a - x2) ** 2)

    return LyapunovCandidate(V=lambda t, x: rho2(x), W1=rho2, W2=rho2, W3=W3)


def _euclidean_candidate(a, k):
    A = np.array([0.0, a])

    def sq(x):
        return np.sum((np.asarray(x, dtype=float) - A) ** 2, axis=-1)

    def W3(x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        return 2.0 * k * x2 * (x2 + a) * (x1**2 + (x2 - a) ** 2)

    return LyapunovCandidate(V=lambda t, x: sq(x), W1=sq, W2=sq, W3=W3)


def _square_norm(x):
    return np.sum(np.asarray(x, dtype=float) ** 2, axis=-1)


# -- default initial states ------------------------------------------------------


def _default_x0(template, m, x_star, params):
    if template == "hyperbolic":
        radii = (2.5, 5.0)
    elif template == "euclidean":
        radii = (0.5 * params["a"], 0.99 * params["a"])
    else:
        radii = (0.5, 1.0)
    n = m.coord_dim
    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        th = np.pi / 4 + np.pi / 2 * np.arange(4)
        dirs = np.zeros((4, n))
        dirs[:, 0], dirs[:, 1] = np.cos(th), np.sin(th)
    L = np.linalg.cholesky(m.metric_at(x_star))
    dirs = np.linalg.solve(L.T, dirs.T).T
    dirs /= m.norm(x_star, dirs)[:, None]
    pts = [m.exp_map(x_star, r * u) for r in radii for u in dirs]
    return [[float(v) for v in p] for p in pts]


# -- validation helpers -----------------------------------------------------------


def _number(value, path, positive=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", path)
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError("must be finite", path)
    if positive and not v > 0:
        raise ConfigError(f"must be > 0, got {value!r}", path)
    if nonneg and v < 0:
        raise ConfigError(f"must be >= 0, got {value!r}", path)
    return v


def _integer(value, path):
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"expected an integer >= 1, got {value!r}", path)
    return value


def _strict_object(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ConfigError(f"duplicate key {k!r}")
        out[k] = v
    return out


def _parse(text):
    try:
        return json.loads(text, object_pairs_hook=_strict_object)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _check_keys(obj, allowed, prefix=""):
    for k in obj:
        if k not in allowed:
            raise ConfigError("unknown key", f"{prefix}{k}")


def normalize_config(raw):
    """Validate a parsed config and fill defaults.

    Returns ``(config, warnings)``; ``config`` holds every key explicitly, so
    serialising it and loading it again gives the same scenario.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    template = raw.get("template")
    if template is None:
        raise ConfigError("required", "template")
    if template not in TEMPLATES:
        raise ConfigError(f"unknown template {template!r} (expected one of {', '.join(TEMPLATES)})", "template")
    params = TEMPLATE_PARAMS[template]
    _check_keys(raw, COMMON_KEYS + tuple(params))
    cfg = {"template": template}
    name = raw.get("name", template)
    if not isinstance(name, str) or not name:
        raise ConfigError("must be a non-empty string", "name")
    cfg["name"] = name

    for key, default in params.items():
        value = raw.get(key, default)
        if key in ("a", "lambda", "w3_scale"):
            value = _number(value, key, positive=True)
        elif key == "n":
            value = _integer(value, key)
        elif key == "d":
            if value != "two_plus_sin":
                if isinstance(value, str):
                    raise ConfigError(f"expected 'two_plus_sin' or a positive number, got {value!r}", key)
                value = _number(value, key, positive=True)
        cfg[key] = value

    claims = raw.get("claims", DEFAULT_CLAIMS[template])
    if not isinstance(claims, list) or not claims:
        raise ConfigError("must be a non-empty list", "claims")
    for i, c in enumerate(claims):
        if c not in CLAIMS:
            raise ConfigError(f"unknown claim {c!r} (expected one of {', '.join(CLAIMS)})", f"claims[{i}]")
    cfg["claims"] = list(claims)
    sr = raw.get("sample_radius")
    cfg["sample_radius"] = None if sr is None else _number(sr, "sample_radius", positive=True)

    run = raw.get("run", {})
    if not isinstance(run, dict):
        raise ConfigError("must be an object", "run")
    _check_keys(run, RUN_KEYS, "run.")
    warnings = []
    out = {}
    for key in ("t_max", "h0", "eps", "t_budget"):
        if key in run:
            out[key] = _number(run[key], f"run.{key}", positive=True)
        else:
            out[key] = RUN_DEFAULTS[key]
            warnings.append(f"run.{key} missing; defaulted to {RUN_DEFAULTS[key]!r}")
    if "t0_list" in run:
        t0s = run["t0_list"]
        if not isinstance(t0s, list) or not t0s:
            raise ConfigError("must be a non-empty list", "run.t0_list")
        out["t0_list"] = [_number(t, f"run.t0_list[{i}]", nonneg=True) for i, t in enumerate(t0s)]
    else:
        out["t0_list"] = list(RUN_DEFAULTS["t0_list"])
        warnings.append("run.t0_list missing; defaulted to 0, 1, ..., 10")
    if not out["t_max"] > max(out["t0_list"]):
        raise ConfigError("must exceed every initial time", "run.t_max")
    if "x0_list" in run:
        x0s = run["x0_list"]
        if not isinstance(x0s, list) or not x0s:
            raise ConfigError("must be a non-empty list", "run.x0_list")
        rows = []
        for i, p in enumerate(x0s):
            if not isinstance(p, list):
                raise ConfigError("expected a coordinate array", f"run.x0_list[{i}]")
            rows.append([_number(v, f"run.x0_list[{i}][{j}]") for j, v in enumerate(p)])
        out["x0_list"] = rows
    else:
        out["x0_list"] = None
        warnings.append("run.x0_list missing; defaulted to 8 points on two geodesic spheres")
    cfg["run"] = out
    return cfg, warnings


def _bind(cfg, warnings=()):
    template = cfg["template"]
    exact = None
    if template in ("hyperbolic", "euclidean"):
        a, d = cfg["a"], cfg["d"]
        k = cfg["w3_scale"] * d_lower_bound(d)
        x_star = np.array([0.0, a])
        if template == "hyperbolic":
            m = HalfPlane()
            cand = _hyperbolic_candidate(a, k)
            r0 = math.inf
        else:
            m = Euclidean(2, half_plane=True)
            cand = _euclidean_candidate(a, k)
            r0 = m.chart_radius(x_star)
        vf = VectorField(m, planar_field(a, d), x_star, r0, name=cfg["name"])
    elif template == "linear":
        n, lam = cfg["n"], cfg["lambda"]
        m = Euclidean(n)
        vf = VectorField(m, lambda t, x: -lam * np.asarray(x, dtype=float), np.zeros(n), name=cfg["name"])
        cand = LyapunovCandidate(
            V=lambda t, x: _square_norm(x), W1=_square_norm, W2=_square_norm,
            W3=lambda x: 2.0 * lam * _square_norm(x), exp_constants=(1.0, 1.0, 2.0 * lam, 2.0),
        )

        def exact(t0, x0, t):
            dt = np.asarray(t, dtype=float) - t0
            return np.asarray(x0, dtype=float) * np.exp(-lam * dt)[..., None]
    else:
        n = cfg["n"]
        m = Euclidean(n)
        vf = VectorField(m, lambda t, x: np.zeros_like(np.asarray(x, dtype=float)), np.zeros(n), name=cfg["name"])
        cand = LyapunovCandidate(
            V=lambda t, x: _square_norm(x), W1=_square_norm, W2=_square_norm,
            W3=lambda x: 0.0 * _square_norm(x),
        )

        def exact(t0, x0, t):
            return np.broadcast_to(np.asarray(x0, dtype=float), np.shape(t) + np.shape(x0)).copy()

    run = dict(cfg["run"])
    if run["x0_list"] is None:
        run["x0_list"] = _default_x0(template, m, vf.equilibrium, cfg)
    x0 = np.array(run["x0_list"], dtype=float)
    for i, p in enumerate(x0):
        path = f"run.x0_list[{i}]"
        if p.shape != (m.coord_dim,):
            raise ConfigError(f"expected {m.coord_dim} coordinates", path)
        if not vf.in_domain(p):
            raise ConfigError(f"initial state {p.tolist()} outside the domain", path)
    cfg = dict(cfg, run=run)
    rc = RunConfig(run["t_max"], run["h0"], run["eps"], run["t_budget"], tuple(run["t0_list"]), x0)
    return Scenario(
        name=cfg["name"], template=template, manifold=m, field=vf, candidate=cand, run=rc,
        claims=tuple(cfg["claims"]), sample_radius=cfg["sample_radius"], config=cfg,
        warnings=tuple(warnings), exact=exact,
    )


def load_scenario(config_text: str) -> Scenario:
    """Parse and bind a JSON scenario config (strict: unknown keys are errors)."""
    cfg, warnings = normalize_config(_parse(config_text))
    return _bind(cfg, warnings)


def load_scenario_file(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return load_scenario(fh.read())


def serialize_scenario(scn: Scenario) -> str:
    return json.dumps(scn.config, indent=2, sort_keys=True)


def _build(raw):
    cfg, _ = normalize_config(raw)
    return _bind(cfg)


def build_example_hyperbolic(a=1.0, d="two_plus_sin", w3_scale=1.0, **overrides) -> Scenario:
    """Planar example on the hyperbolic half-plane; ``d`` is ``"two_plus_sin"`` or c > 0."""
    return _build({"template": "hyperbolic", "a": a, "d": d, "w3_scale": w3_scale, **overrides})


def build_example_euclidean(a=1.0, d="two_plus_sin", w3_scale=1.0, **overrides) -> Scenario:
    """Planar example with the flat metric on the half-plane chart; r0 = a."""
    return _build({"template": "euclidean", "a": a, "d": d, "w3_scale": w3_scale, **overrides})


def build_linear_oracle(n=1, lam=1.0, **overrides) -> Scenario:
    return _build({"template": "linear", "n": n, "lambda": lam, **overrides})


def build_zero_field(n=2, **overrides) -> Scenario:
    return _build({"template": "zero", "n": n, **overrides})


# -- claims -----------------------------------------------------------------


def simulate(scn: Scenario, every=1):
    """Chart trajectories for every (t0, x0) pair, t0-major order."""
    run = scn.run
    t0 = np.repeat(np.asarray(run.t0_list, dtype=float), len(run.x0_list))
    x0 = np.tile(run.x0_list, (len(run.t0_list), 1))
    return integrate_chart(scn.field, t0, x0, run.t_max, run.h0, every)


def evaluate_claim(scn: Scenario, claim: str, grid: Optional[PolarGrid] = None) -> CheckReport:
    grid = grid or scn.grid()
    cand, vf, run = scn.candidate, scn.field, scn.run
    if claim == "sandwich":
        return check_sandwich(cand, vf, grid)
    if claim == "decrease":
        return check_decrease(cand, vf, grid)
    if claim == "properness":
        return check_properness(cand, vf, n_dirs=grid.n_dirs)
    if claim == "barrier":
        return check_barrier(cand, vf, grid, n_dirs=grid.n_dirs)
    if claim == "exponential_bound":
        return verify_exponential_bound(cand, vf, simulate(scn, every=10))
    if claim == "uniform_attraction":
        return verify_uniform_attraction(vf, run.x0_list, run.t0_list, run.eps, run.t_budget, run.h0)
    raise ConfigError(f"unknown claim {claim!r}", "claims")


def evaluate_claims(scn: Scenario, grid: Optional[PolarGrid] = None) -> dict:
    return {c: evaluate_claim(scn, c, grid) for c in scn.claims}
