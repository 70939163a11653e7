"""Gyrovector algebra on the stereographic models (Poincare ball and projected sphere).

All functions take the curvature ``k`` as a float or 0-d tensor and work on
batches whose last axis holds the coordinates. They remain valid for tiny
``|k|`` and reduce to ordinary vector algebra at ``k = 0``.
"""
import torch

from ..errors import SingularityError
from .functions import as_tensor, scalar, arctanc_k, safe_norm, safe_sqrt, sqdot

DEN_EPS = 1e-15


def _sgn(k):
    return 1 if scalar(k) >= 0 else -1


def _dot(x, y):
    return (x * y).sum(-1, keepdim=True)


def conformal_factor(k, x, keepdim=True):
    """``lambda_x = 2 / (1 + k |x|^2)``."""
    k = as_tensor(k)
    return 2.0 / (1.0 + k * sqdot(x, keepdim))


def mobius_add(k, x, y):
    k = as_tensor(k)
    x2, y2, xy = sqdot(x), sqdot(y), _dot(x, y)
    num = (1.0 - 2.0 * k * xy - k * y2) * x + (1.0 + k * x2) * y
    den = 1.0 - 2.0 * k * xy + k * k * x2 * y2
    if bool((den.abs() < DEN_EPS).any()):
        raise SingularityError("mobius_add: denominator vanishes (antipodal pair)")
    return num / den


def gyration(k, u, v, w):
    """``gyr[u, v] w`` via its closed polynomial form."""
    k = as_tensor(k)
    u2, v2 = sqdot(u), sqdot(v)
    uv, uw, vw = _dot(u, v), _dot(u, w), _dot(v, w)
    k2 = k * k
    a = -k2 * uw * v2 - k * vw + 2.0 * k2 * uv * vw
    b = -k2 * vw * u2 + k * uw
    d = 1.0 - 2.0 * k * uv + k2 * u2 * v2
    if bool((d.abs() < DEN_EPS).any()):
        raise SingularityError("gyration: denominator vanishes")
    return w + 2.0 * (a * u + b * v) / d


def gyration_literal(k, u, v, w):
    """``gyr[u, v] w = -(u + v) + (u + (v + w))`` with Mobius sums; slow reference."""
    return mobius_add(k, -mobius_add(k, u, v), mobius_add(k, u, mobius_add(k, v, w)))


def stereo_distance(k, x, y):
    """Geodesic distance in the stereographic model, symmetric in its arguments."""
    k = as_tensor(k)
    s = _sgn(k)
    diff = safe_norm(x - y)
    den = safe_sqrt(1.0 + 2.0 * k * _dot(x, y) + k * k * sqdot(x) * sqdot(y))
    sk = k.abs().sqrt()
    if scalar(k) == 0.0:
        return (2.0 * diff).squeeze(-1)
    if s > 0:
        # atan2 keeps the antipodal configuration (den -> 0) finite
        return (2.0 * torch.atan2(sk * diff, den) / sk).squeeze(-1)
    chord = diff / den
    return (2.0 * chord * arctanc_k(sk * chord, s)).squeeze(-1)


def gyro_distance(k, x, y):
    """``(2 / sqrt|k|) arctan_k(sqrt|k| |(-x) + y|)`` evaluated literally."""
    k = as_tensor(k)
    w = safe_norm(mobius_add(k, -x, y))
    a = k.abs().sqrt() * w
    return (2.0 * w * arctanc_k(a, _sgn(k))).squeeze(-1)
