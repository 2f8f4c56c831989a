"""Wasserstein gradient flows of omega-convex energies."""

import json
import os
from pathlib import Path

_pkg_fixtures = Path(__file__).with_name("fixtures")
if "OMEGAFLOW_FIXTURES" not in os.environ and _pkg_fixtures.is_dir():
    os.environ["OMEGAFLOW_FIXTURES"] = str(_pkg_fixtures)

from . import _core  # noqa: E402
from ._core import SchemaError  # noqa: E402

__version__ = _core.__version__

__all__ = [
    "SchemaError",
    "atomic",
    "quantile",
    "lipschitz",
    "polynomial",
    "log_lipschitz",
    "sqrt_psi",
    "w2",
    "energy",
    "proximal_step",
    "flow",
    "flow_map",
    "euler_step",
    "euler_iterate",
    "euler_error_bound",
    "omega",
    "suite_names",
    "run_suite",
    "rate_study",
    "run_config",
]


def _dump(obj):
    return obj if isinstance(obj, str) else json.dumps(obj)


def atomic(points, weights=None):
    """Atomic measure spec; points are floats (1D) or pairs (2D)."""
    spec = {"kind": "atomic", "points": list(points)}
    if weights is not None:
        spec["weights"] = list(weights)
    return spec


def quantile(positions, masses=None):
    spec = {"kind": "quantile", "positions": list(positions)}
    if masses is not None:
        spec["masses"] = list(masses)
    return spec


def lipschitz(lam):
    return {"kind": "lipschitz", "lambda": lam}


def polynomial(p, lam):
    return {"kind": "polynomial", "p": p, "lambda": lam}


def log_lipschitz(lam):
    return {"kind": "log_lipschitz", "lambda": lam}


def sqrt_psi(lam):
    return {"kind": "sqrt_psi", "lambda": lam}


def w2(mu, nu):
    """Exact W2 distance and optimal plan between two measures."""
    return json.loads(_core.w2(_dump(mu), _dump(nu)))


def energy(spec, mu):
    return _core.energy(_dump(spec), _dump(mu))


def proximal_step(spec, mu, tau, cfg=None):
    cfg = dict(cfg or {})
    cfg.setdefault("tau", tau)
    return json.loads(_core.proximal_step(_dump(spec), _dump(mu), tau, _dump(cfg)))


def flow(spec, mu, cfg):
    return json.loads(_core.flow(_dump(spec), _dump(mu), _dump(cfg)))


def flow_map(modulus, t, x):
    return _core.flow_map(_dump(modulus), t, x)


def euler_step(modulus, tau, x):
    return _core.euler_step(_dump(modulus), tau, x)


def euler_iterate(modulus, tau, n, x):
    return _core.euler_iterate(_dump(modulus), tau, n, x)


def euler_error_bound(modulus, t, x, n):
    return _core.euler_error_bound(_dump(modulus), t, x, n)


def omega(modulus, x):
    return _core.omega(_dump(modulus), x)


def suite_names():
    return list(_core.suite_names())


def run_suite(name, quick=True, seed=1, tol=1e-6, threads=1):
    return json.loads(_core.run_suite(name, quick, seed, tol, threads))


def rate_study(spec, mu, t, n_list, n_ref, modulus, cfg=None):
    cfg = dict(cfg or {})
    cfg.setdefault("tau", t / max(n_list))
    return json.loads(
        _core.rate_study(_dump(spec), _dump(mu), t, list(n_list), n_ref, _dump(modulus), _dump(cfg))
    )


def run_config(doc):
    """Executes an experiment document; returns the exit code."""
    return _core.run_config(_dump(doc))
