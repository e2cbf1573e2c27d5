"""Gumbel copula sampling via the Marshall-Olkin frailty construction.

A draw uses one positive-stable frailty ``V`` (Laplace transform
``exp(-t**(1/theta))``) shared by all components and one independent unit
exponential ``E_i`` per component:

    U_i = exp(-(E_i / V) ** (1 / theta))

The frailty is generated with Kanter's representation from two uniforms, so a
full draw of ``n`` components consumes exactly ``n + 2`` uniforms. Keeping the
map from uniforms explicit lets calibration feed quasi-random points through
the same code path as ordinary sampling.
"""

from __future__ import annotations

import numpy as np

from cataclysm.errors import InvalidParameterError

_TINY = np.finfo(float).tiny


def _check_theta(theta: float) -> float:
    theta = float(theta)
    if not np.isfinite(theta) or theta < 1.0:
        raise InvalidParameterError(f"Gumbel parameter theta must be >= 1, got {theta!r}")
    return theta


def positive_stable(alpha: float, u_angle: np.ndarray, u_exp: np.ndarray) -> np.ndarray:
    """Positive stable variates with Laplace transform ``exp(-t**alpha)``.

    ``u_angle`` and ``u_exp`` are uniforms on (0, 1); ``alpha`` in (0, 1].
    """
    if alpha >= 1.0:
        return np.ones_like(np.asarray(u_angle, dtype=float))
    angle = np.pi * np.asarray(u_angle, dtype=float)
    w = -np.log(np.clip(u_exp, _TINY, None))
    a = (np.sin(alpha * angle) / np.sin(angle) ** (1.0 / alpha)) * (
        np.sin((1.0 - alpha) * angle) / w
    ) ** ((1.0 - alpha) / alpha)
    return a


def gumbel_exponents(theta: float, uniforms: np.ndarray) -> np.ndarray:
    """Return ``s`` with ``U = exp(-s)`` for each Gumbel component.

    ``uniforms`` has shape ``(m, n + 2)``: column 0 and 1 drive the frailty,
    the remaining ``n`` columns the component exponentials. Working with ``s``
    keeps ``1 - U = -expm1(-s)`` accurate deep in the upper tail.
    """
    theta = _check_theta(theta)
    w = np.atleast_2d(np.asarray(uniforms, dtype=float))
    if w.shape[1] < 3:
        raise InvalidParameterError("need at least n + 2 = 3 uniform columns")
    alpha = 1.0 / theta
    v = positive_stable(alpha, w[:, 0], w[:, 1])
    e = -np.log(np.clip(w[:, 2:], _TINY, None))
    return (e / v[:, None]) ** alpha


def gumbel_from_uniforms(theta: float, uniforms: np.ndarray) -> np.ndarray:
    """Map ``(m, n + 2)`` independent uniforms to ``m`` Gumbel-copula draws."""
    u = np.exp(-gumbel_exponents(theta, uniforms))
    return np.clip(u, _TINY, 1.0 - np.finfo(float).epsneg)


def sample_copula(theta: float, n: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """One joint draw (or ``size`` draws) from an ``n``-dimensional Gumbel copula.

    Components are uniform on (0, 1) with pairwise Kendall's tau
    ``1 - 1/theta``; ``theta = 1`` gives independent components.

    >>> u = sample_copula(2.0, 3, np.random.default_rng(0))
    >>> u.shape
    (3,)
    """
    theta = _check_theta(theta)
    if n < 1:
        raise InvalidParameterError(f"cell count must be positive, got {n}")
    m = 1 if size is None else int(size)
    w = rng.random((m, n + 2))
    u = gumbel_from_uniforms(theta, w)
    return u[0] if size is None else u


def kendall_tau(theta: float) -> float:
    """Population Kendall's tau of a Gumbel copula."""
    return 1.0 - 1.0 / _check_theta(theta)
