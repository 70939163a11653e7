"""Curvature-aware scalar functions.

Every function takes the sign of the curvature as a plain Python number and
dispatches to the circular branch for positive curvature and the hyperbolic
branch for negative curvature. The ``*c`` ratio helpers (``sinc_k``,
``tanc_k``, ``arctanc_k``) compute ``f(a) / a`` with a Taylor fallback near
zero so that geometry formulas stay finite and differentiable at the origin.
"""
import math

import torch

from ..errors import DomainError

DTYPE = torch.float64

FLAT_THRESHOLD = 1e-7
CLAMP_EPS = 1e-9
SERIES_EPS = 1e-5
LOG_SERIES_EPS = 1e-3
ARTANH_MAX = 1.0 - 1e-15


def as_tensor(x):
    if isinstance(x, torch.Tensor):
        return x if x.dtype == DTYPE else x.to(DTYPE)
    return torch.as_tensor(x, dtype=DTYPE)


def scalar(x):
    """Python float of a number or 0-d tensor, without touching autograd."""
    if isinstance(x, torch.Tensor):
        return float(x.detach())
    return float(x)


def sign_of(k):
    """Sign of a curvature value (``0`` inside the flat threshold)."""
    k = scalar(k)
    if not math.isfinite(k):
        raise DomainError(f"curvature must be finite, got {k}")
    if abs(k) < FLAT_THRESHOLD:
        return 0
    return 1 if k > 0 else -1


def sqdot(x, keepdim=True):
    return (x * x).sum(-1, keepdim=keepdim)


def safe_sqrt(s):
    """``sqrt(max(s, 0))`` with a zero (not infinite) gradient at and below 0."""
    pos = s > 0
    return torch.where(pos, torch.sqrt(torch.where(pos, s, torch.ones_like(s))), torch.zeros_like(s))


def safe_norm(x, keepdim=True):
    # torch's norm backward already returns 0 at the origin
    return torch.linalg.vector_norm(x, dim=-1, keepdim=keepdim)


def _check_finite(x, name):
    if not bool(torch.isfinite(x).all()):
        raise DomainError(f"{name}: non-finite input")


# -- clamped inverse functions -------------------------------------------------
# Inputs outside the domain by at most CLAMP_EPS are snapped onto the boundary;
# the gradient is zero at and beyond the boundary (subgradient convention).


class _ClampedArccos(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x):
        ctx.save_for_backward(x)
        return torch.acos(x.clamp(-1.0, 1.0))

    @staticmethod
    def backward(ctx, g):
        (x,) = ctx.saved_tensors
        inside = x.abs() < 1.0
        safe = torch.where(inside, x, torch.zeros_like(x))
        return torch.where(inside, -g / torch.sqrt(1.0 - safe * safe), torch.zeros_like(g))


class _ClampedArccosh(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x):
        ctx.save_for_backward(x)
        return torch.acosh(x.clamp(min=1.0))

    @staticmethod
    def backward(ctx, g):
        (x,) = ctx.saved_tensors
        inside = x > 1.0
        safe = torch.where(inside, x, torch.full_like(x, 2.0))
        return torch.where(inside, g / torch.sqrt(safe * safe - 1.0), torch.zeros_like(g))


class _ClampedArtanh(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x):
        ctx.save_for_backward(x)
        return torch.atanh(x.clamp(-ARTANH_MAX, ARTANH_MAX))

    @staticmethod
    def backward(ctx, g):
        (x,) = ctx.saved_tensors
        inside = x.abs() < ARTANH_MAX
        safe = torch.where(inside, x, torch.zeros_like(x))
        return torch.where(inside, g / (1.0 - safe * safe), torch.zeros_like(g))


def _domain_check(x, lo, hi, name):
    bad_lo = x < lo - CLAMP_EPS if lo is not None else torch.zeros_like(x, dtype=torch.bool)
    bad_hi = x > hi + CLAMP_EPS if hi is not None else torch.zeros_like(x, dtype=torch.bool)
    bad = bad_lo | bad_hi
    if bool(bad.any()):
        worst = x[bad].detach().flatten()[0].item()
        raise DomainError(
            f"{name}: argument {worst!r} outside [{lo}, {hi}] by more than {CLAMP_EPS}"
        )


def arccos_clamped(x):
    x = as_tensor(x)
    _check_finite(x, "arccos")
    _domain_check(x, -1.0, 1.0, "arccos")
    return _ClampedArccos.apply(x)


def arccosh_clamped(x):
    x = as_tensor(x)
    _check_finite(x, "arccosh")
    _domain_check(x, 1.0, None, "arccosh")
    return _ClampedArccosh.apply(x)


def artanh_clamped(x):
    x = as_tensor(x)
    _check_finite(x, "arctanh")
    _domain_check(x, -1.0, 1.0, "arctanh")
    return _ClampedArtanh.apply(x)


# -- curvature-aware trigonometry ---------------------------------------------

_CIRCULAR = {
    "sin": torch.sin,
    "cos": torch.cos,
    "tan": torch.tan,
    "arcsin": lambda x: torch.asin(x.clamp(-1.0, 1.0)),
    "arccos": arccos_clamped,
    "arctan": torch.atan,
}
_HYPERBOLIC = {
    "sin": torch.sinh,
    "cos": torch.cosh,
    "tan": torch.tanh,
    "arcsin": torch.asinh,
    "arccos": arccosh_clamped,
    "arctan": artanh_clamped,
}


def curv_trig(fn, k, x):
    """Evaluate ``fn_K(x)``: circular branch for K > 0, hyperbolic for K < 0.

    ``fn`` is one of ``sin, cos, tan, arcsin, arccos, arctan``. Curvatures
    inside the flat threshold are rejected; callers must take the Euclidean
    branch themselves.
    """
    x = as_tensor(x)
    _check_finite(x, f"{fn}_K")
    s = sign_of(k)
    if s == 0:
        raise DomainError(f"{fn}_K undefined for |K| < {FLAT_THRESHOLD}; use the flat branch")
    table = _CIRCULAR if s > 0 else _HYPERBOLIC
    try:
        f = table[fn]
    except KeyError:
        raise ValueError(f"unknown function {fn!r}") from None
    if fn == "arcsin" and s > 0:
        _domain_check(x, -1.0, 1.0, "arcsin")
    return f(x)


# -- ratio helpers, a >= 0 ------------------------------------------------------


def _series_split(a):
    small = a < SERIES_EPS
    a_safe = torch.where(small, torch.ones_like(a), a)
    return small, a_safe


def sin_k(a, s):
    return torch.sin(a) if s > 0 else torch.sinh(a)


def cos_k(a, s):
    return torch.cos(a) if s > 0 else torch.cosh(a)


def sinc_k(a, s):
    """``sin_K(a) / a``."""
    small, a_safe = _series_split(a)
    exact = sin_k(a_safe, s) / a_safe
    return torch.where(small, 1.0 - s * a * a / 6.0, exact)


def tanc_k(a, s):
    """``tan_K(a) / a``."""
    small, a_safe = _series_split(a)
    exact = (torch.tan(a_safe) if s > 0 else torch.tanh(a_safe)) / a_safe
    return torch.where(small, 1.0 + s * a * a / 3.0, exact)


def arctanc_k(a, s):
    """``arctan_K(a) / a``; for s < 0 the argument must stay below 1."""
    small, a_safe = _series_split(a)
    if s > 0:
        exact = torch.atan(a_safe) / a_safe
    else:
        exact = _ClampedArtanh.apply(a_safe) / a_safe
    return torch.where(small, 1.0 - s * a * a / 3.0, exact)


def log_sinc_k(a, s):
    """``log |sin_K(a) / a|``, overflow-free for large hyperbolic arguments."""
    # the log of a ratio near 1 loses relative accuracy, so the series runs further out
    small = a < LOG_SERIES_EPS
    a_safe = torch.where(small, torch.ones_like(a), a)
    a2 = a * a
    series = -s * a2 / 6.0 - a2 * a2 / 180.0
    if s > 0:
        exact = torch.log(torch.abs(torch.sin(a_safe)) / a_safe)
    else:
        big = a_safe > 20.0
        mid = torch.where(big, torch.ones_like(a_safe), a_safe)
        direct = torch.log(torch.sinh(mid) / mid)
        asym = a_safe + torch.log1p(-torch.exp(-2.0 * a_safe)) - math.log(2.0) - torch.log(a_safe)
        exact = torch.where(big, asym, direct)
    return torch.where(small, series, exact)
