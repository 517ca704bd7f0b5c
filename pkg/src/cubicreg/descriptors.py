"""Build problems from JSON descriptors.

Schema (all keys except ``kind`` optional)::

    {"kind": "quadratic" | "powered_norm" | "logsumexp" | "sum",
     "dimension": n,
     "metric": {"type": "identity"} | {"type": "diagonal", "diag": [...]}
               | {"type": "dense", "matrix": [[...], ...]},
     "seed": 0,                          # default seed for random fields below
     "composite": {"type": "zero"} | {"type": "ball", "center": [...], "radius": R},
     "x0": [...] | {"distance": D, "seed": s},   # random point at B-distance D from x*
     "known": {"F_star": .., "minimizer": [..], "sigma": {"2": ..}, "holder": {"1": ..},
               "lipschitz_gradient": .., "strong_convexity": ..},
     # kind-specific
     "A": [[...]] | {"diag": [...]} | {"random_spd": {"cond": c, "seed": s}},
     "b": [...] | {"minimizer": [...]},  # quadratic; b = A x* for the second form
     "p": 3, "center": [...],            # powered_norm
     "a": [[...]] | {"random": {"m": 20, "seed": s, "scale": 1.0}},   # logsumexp rows
     "terms": [descriptor, ...], "weights": [...]                     # sum
    }

Sum terms inherit the parent's dimension and metric unless they set their own.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .normed_space import ContractViolation, MetricOperator
from .oracles import (KnownConstants, Problem, make_logsumexp, make_powered_norm,
                      make_quadratic, make_sum, with_ball)

KINDS = ("quadratic", "powered_norm", "logsumexp", "sum")


class DescriptorError(ValueError):
    pass


def read_json(path) -> dict:
    """Parse a JSON file; DescriptorError names the line and column on failure."""
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DescriptorError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def random_spd(n: int, cond: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    ev = np.logspace(0.0, np.log10(cond), n)
    A = (Q * ev) @ Q.T
    return 0.5 * (A + A.T)


def _vector(v, n, what):
    arr = np.asarray(v, dtype=float)
    if arr.shape != (n,):
        raise DescriptorError(f"{what} must have length {n}, got shape {arr.shape}")
    return arr


def _metric(d: dict, n: int | None) -> MetricOperator:
    spec = d.get("metric", {"type": "identity"})
    kind = spec.get("type", "identity")
    if kind == "identity":
        if n is None:
            raise DescriptorError("an identity metric needs 'dimension'")
        return MetricOperator.identity(n)
    if kind == "diagonal":
        return MetricOperator(np.diag(np.asarray(spec["diag"], dtype=float)))
    if kind == "dense":
        return MetricOperator(np.asarray(spec["matrix"], dtype=float))
    raise DescriptorError(f"unknown metric type {kind!r}")


def _matrix(spec, n, seed):
    if isinstance(spec, dict):
        if "diag" in spec:
            return np.diag(np.asarray(spec["diag"], dtype=float))
        if "random_spd" in spec:
            r = spec["random_spd"]
            return random_spd(n, float(r.get("cond", 10.0)), int(r.get("seed", seed)))
        raise DescriptorError(f"unknown matrix spec {sorted(spec)}")
    A = np.asarray(spec, dtype=float)
    if A.shape != (n, n):
        raise DescriptorError(f"matrix must be {n}x{n}, got {A.shape}")
    return A


def _build(d: dict, inherited_metric: MetricOperator | None = None,
           inherited_n: int | None = None) -> Problem:
    kind = d.get("kind")
    if kind not in KINDS:
        raise DescriptorError(f"'kind' must be one of {KINDS}, got {kind!r}")
    n = d.get("dimension", inherited_n)
    seed = int(d.get("seed", 0))

    if kind == "logsumexp":
        a = d.get("a")
        if isinstance(a, dict):
            r = a["random"]
            if n is None:
                raise DescriptorError("random logsumexp rows need 'dimension'")
            rng = np.random.default_rng(int(r.get("seed", seed)))
            a = float(r.get("scale", 1.0)) * rng.standard_normal((int(r["m"]), n))
        return make_logsumexp(np.asarray(a, dtype=float))

    if "metric" in d or inherited_metric is None:
        metric = _metric(d, n)
    else:
        metric = inherited_metric
    n = metric.dimension

    if kind == "quadratic":
        A = _matrix(d["A"], n, seed)
        b = d.get("b")
        if isinstance(b, dict):
            b = A @ _vector(b["minimizer"], n, "b.minimizer")
        elif b is not None:
            b = _vector(b, n, "b")
        return make_quadratic(A, b, metric)
    if kind == "powered_norm":
        center = _vector(d.get("center", np.zeros(n)), n, "center")
        return make_powered_norm(float(d["p"]), center, metric)
    terms = [_build(t, metric, n) for t in d["terms"]]
    return make_sum(terms, d.get("weights", [1.0] * len(terms)))


def _apply_known(problem: Problem, spec: dict) -> None:
    k = problem.known
    for p, v in spec.get("sigma", {}).items():
        k.sigma[round(float(p), 12)] = float(v)
    for nu, v in spec.get("holder", {}).items():
        k.holder[round(float(nu), 12)] = float(v)
    for name in ("F_star", "lipschitz_gradient", "strong_convexity"):
        if name in spec:
            setattr(k, name, float(spec[name]))
    if "minimizer" in spec:
        k.minimizer = _vector(spec["minimizer"], problem.dimension, "known.minimizer")


def load_problem(d: dict) -> Problem:
    """Problem for a descriptor dict (see module docstring)."""
    try:
        problem = _build(d)
        comp = d.get("composite", {"type": "zero"})
        if comp.get("type", "zero") == "ball":
            problem = with_ball(problem, _vector(comp["center"], problem.dimension, "ball center"),
                                float(comp["radius"]))
        elif comp.get("type", "zero") != "zero":
            raise DescriptorError(f"unknown composite type {comp.get('type')!r}")
        if "known" in d:
            _apply_known(problem, d["known"])
            # re-run the F* consistency check with the overrides in place
            problem = Problem(problem.smooth, problem.h, problem.metric,
                              KnownConstants(**vars(problem.known)), name=problem.name)
        x0 = d.get("x0")
        if isinstance(x0, dict):
            xs = problem.known.minimizer
            if xs is None:
                raise DescriptorError("x0 by distance needs a known minimizer")
            rng = np.random.default_rng(int(x0.get("seed", d.get("seed", 0))))
            u = rng.standard_normal(problem.dimension)
            problem.x0 = xs + float(x0["distance"]) * u / problem.metric.primal_norm(u)
        elif x0 is not None:
            problem.x0 = _vector(x0, problem.dimension, "x0")
    except (KeyError, TypeError) as exc:
        raise DescriptorError(f"malformed problem descriptor: {exc!r}") from exc
    except ContractViolation as exc:
        raise DescriptorError(str(exc)) from exc
    problem.name = problem.name or d["kind"]
    return problem


def load_problem_file(path) -> tuple[Problem, dict]:
    d = read_json(path)
    return load_problem(d), d
