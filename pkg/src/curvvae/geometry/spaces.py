"""The constant-curvature space models.

Points and tangent vectors are float64 tensors whose last axis holds the
coordinates; any leading axes are batch axes. Hyperboloid and sphere points
carry ``n + 1`` ambient coordinates, every other model carries ``n``.

The curvature may be a plain float or a 0-d tensor that requires grad, in
which case every operation is differentiable with respect to it.
"""
import math

import torch

from ..errors import ContractError, DomainError, SingularityError
from . import gyro
from .functions import (
    FLAT_THRESHOLD,
    arctanc_k,
    as_tensor,
    scalar,
    cos_k,
    safe_norm,
    safe_sqrt,
    sinc_k,
    sqdot,
    tanc_k,
)

POINT_TOL = 1e-9
ANTIPODAL_EPS = 1e-12
BALL_MARGIN = 1e-5


def _same(x, y):
    return (x == y).all(-1, keepdim=True)


class Space:
    """Base class. Subclasses fill in the per-model formulas."""

    kind = ""
    extra = 0  # ambient coordinates beyond the intrinsic dimension

    def __init__(self, dim, k, model=None):
        if int(dim) != dim or dim < 1:
            raise ContractError(f"dimension must be a positive integer, got {dim!r}")
        self.dim = int(dim)
        self.k = as_tensor(k)
        if self.k.dim() != 0:
            raise ContractError("curvature must be a scalar")
        kv = scalar(self.k)
        if not math.isfinite(kv):
            raise DomainError(f"curvature must be finite, got {kv}")
        self.model = model or self.kind
        self.sign = 0 if kv == 0 else (1 if kv > 0 else -1)

    # -- metadata ---------------------------------------------------------

    @property
    def ambient_dim(self):
        return self.dim + self.extra

    @property
    def flat(self):
        return self.kind == "e"

    @property
    def radius(self):
        return 1.0 / self.k.abs().sqrt()

    @property
    def tangent_scale0(self):
        """Riemannian length of a unit intrinsic tangent at the origin."""
        return 1.0

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, k={scalar(self.k):g}, model={self.model!r})"

    def _check_shape(self, *tensors):
        for t in tensors:
            if t.shape[-1] != self.ambient_dim:
                raise ContractError(
                    f"{self.model}{self.dim}: expected {self.ambient_dim} coordinates, got {t.shape[-1]}"
                )

    # -- origin and intrinsic tangents ------------------------------------------

    def origin(self, *batch):
        return torch.zeros(*batch, self.ambient_dim, dtype=torch.float64)

    def embed_tangent0(self, v):
        """Intrinsic ``n``-vector to a tangent vector at the origin."""
        return v

    def extract_tangent0(self, u):
        return u

    def expmap0(self, v):
        return self.expmap(self.origin(*v.shape[:-1]), v)

    def logmap0(self, y):
        return self.logmap(self.origin(*y.shape[:-1]), y)

    def transp0(self, y, v):
        return self.transp(self.origin(*y.shape[:-1]), y, v)

    def transp0back(self, y, v):
        return self.transp(y, self.origin(*y.shape[:-1]), v)

    def norm(self, x, u):
        return safe_sqrt(self.inner(x, u, u))

    # -- constraint checks ---------------------------------------------------

    def point_error(self, x):
        """Relative violation of the manifold constraint, per point."""
        return torch.zeros(x.shape[:-1], dtype=torch.float64)

    def tangent_error(self, x, v):
        return torch.zeros(x.shape[:-1], dtype=torch.float64)

    def check_point(self, x, tol=POINT_TOL):
        self._check_shape(x)
        if not bool(torch.isfinite(x).all()):
            raise ContractError(f"{self.model}: non-finite point")
        err = self.point_error(x)
        if bool((err > tol).any()):
            raise ContractError(f"{self.model}: point off the manifold (error {float(err.max()):.3g})")

    def check_tangent(self, x, v, tol=POINT_TOL):
        self._check_shape(x, v)
        err = self.tangent_error(x, v)
        if bool((err > tol).any()):
            raise ContractError(f"{self.model}: vector not tangent at its base (error {float(err.max()):.3g})")


class Euclidean(Space):
    kind = "e"

    def __init__(self, dim, k=0.0, model=None):
        super().__init__(dim, 0.0 if k is None else k, model)
        self.k = torch.zeros((), dtype=torch.float64)
        self.sign = 0

    @property
    def radius(self):
        return torch.tensor(math.inf, dtype=torch.float64)

    def inner(self, x, u, v):
        return (u * v).sum(-1)

    def norm(self, x, u):
        return safe_norm(u, keepdim=False)

    def distance(self, x, y):
        return safe_norm(x - y, keepdim=False)

    def expmap(self, x, v):
        return x + v

    def logmap(self, x, y):
        return y - x

    def transp(self, x, y, v):
        return v

    def expmap0(self, v):
        return v

    def logmap0(self, y):
        return y

    def transp0(self, y, v):
        return v

    def transp0back(self, y, v):
        return v

    def proj(self, a):
        return a

    def lift(self, xt):
        return xt


class _Radial(Space):
    """Shared code for the hyperboloid and the sphere, embedded in n + 1 dimensions."""

    extra = 1
    required_sign = 0

    def __init__(self, dim, k, model=None):
        super().__init__(dim, k, model)
        kv = scalar(self.k)
        if abs(kv) < FLAT_THRESHOLD:
            raise DomainError(
                f"{self.kind}: |K| = {abs(kv):g} below the flat threshold {FLAT_THRESHOLD:g}; "
                "coordinates would diverge"
            )
        if self.sign != self.required_sign:
            raise ContractError(f"{self.kind} requires K {'<' if self.required_sign < 0 else '>'} 0, got {kv}")

    def _dot(self, x, y, keepdim=True):
        raise NotImplementedError

    def origin(self, *batch):
        o = torch.zeros(*batch, self.ambient_dim, dtype=torch.float64)
        r = self.radius
        if r.requires_grad:
            return torch.cat([r.expand(*batch, 1), o[..., 1:]], -1)
        o[..., 0] = r
        return o

    def embed_tangent0(self, v):
        return torch.cat([torch.zeros_like(v[..., :1]), v], -1)

    def extract_tangent0(self, u):
        return u[..., 1:]

    def inner(self, x, u, v):
        return self._dot(u, v, keepdim=False)

    def point_error(self, x):
        target = 1.0 / self.k
        scale = torch.maximum(target.abs().detach(), sqdot(x, False))
        return (self._dot(x, x, False) - target).abs() / scale

    def tangent_error(self, x, v):
        scale = torch.clamp(safe_norm(x, False) * safe_norm(v, False), min=1.0)
        return self._dot(x, v, False).abs() / scale

    def _reproject(self, y):
        raise NotImplementedError

    def expmap(self, x, v):
        a = self.k.abs().sqrt() * safe_sqrt(self._dot(v, v))
        y = cos_k(a, self.sign) * x + sinc_k(a, self.sign) * v
        return self._reproject(y)

    def _angle(self, alpha, a):
        raise NotImplementedError

    def logmap(self, x, y):
        k = self.k
        alpha = k * self._dot(x, y)
        if self.sign > 0 and bool((1.0 + alpha < ANTIPODAL_EPS).any()):
            raise SingularityError("log map undefined for antipodal points")
        w = y - alpha * x
        w = w - k * self._dot(x, w) * x
        a = k.abs().sqrt() * safe_sqrt(self._dot(w, w))
        theta = self._angle(alpha, a)
        u = w / sinc_k(theta, self.sign)
        return torch.where(_same(x, y), torch.zeros_like(u), u)

    def transp(self, x, y, v):
        k = self.k
        den = 1.0 + k * self._dot(x, y)
        if self.sign > 0 and bool((den < ANTIPODAL_EPS).any()):
            raise SingularityError("parallel transport undefined between antipodal points")
        return v - k * self._dot(y, v) / den * (x + y)


class Hyperboloid(_Radial):
    kind = "h"
    required_sign = -1

    def _dot(self, x, y, keepdim=True):
        p = x * y
        out = p[..., 1:].sum(-1, keepdim=True) - p[..., :1]
        return out if keepdim else out.squeeze(-1)

    def point_error(self, x):
        err = super().point_error(x)
        return torch.where(x[..., 0] > 0, err, torch.full_like(err, math.inf))

    def _reproject(self, y):
        rest = y[..., 1:]
        x0 = torch.sqrt(sqdot(rest) + 1.0 / self.k.abs())
        return torch.cat([x0, rest], -1)

    def _angle(self, alpha, a):
        return torch.asinh(a)

    def distance(self, x, y):
        d = x - y
        chord = safe_sqrt(self._dot(d, d, False))
        sk = self.k.abs().sqrt()
        return 2.0 * torch.asinh(sk * chord / 2.0) / sk

    def proj(self, a):
        q = -self._dot(a, a)
        if bool((q <= 0).any()) or bool((a[..., :1] <= 0).any()):
            raise ContractError("hyperboloid projection needs a future-pointing timelike vector")
        return a / (self.k.abs().sqrt() * torch.sqrt(q))

    def lift(self, xt):
        return torch.cat([torch.sqrt(sqdot(xt) + 1.0 / self.k.abs()), xt], -1)


class Sphere(_Radial):
    kind = "s"
    required_sign = 1

    def _dot(self, x, y, keepdim=True):
        return (x * y).sum(-1, keepdim=keepdim)

    def _reproject(self, y):
        return self.radius * y / safe_norm(y)

    def _angle(self, alpha, a):
        return torch.atan2(a, alpha)

    def distance(self, x, y):
        theta = 2.0 * torch.atan2(safe_norm(x - y, False), safe_norm(x + y, False))
        return self.radius * theta

    def proj(self, a):
        n = safe_norm(a)
        if bool((n == 0).any()):
            raise ContractError("cannot project the zero vector onto the sphere")
        return self.radius * a / n

    def lift(self, xt):
        r2 = 1.0 / self.k
        rad = r2 - sqdot(xt)
        if bool((rad < -POINT_TOL * r2).any()):
            raise DomainError("sphere lift: |x|^2 exceeds R^2")
        return torch.cat([safe_sqrt(rad), xt], -1)


class Stereographic(Space):
    """Poincare ball (K < 0) or projected sphere (K > 0) in chart coordinates."""

    required_sign = 0

    def __init__(self, dim, k, model=None):
        super().__init__(dim, k, model)
        if self.sign == 0:
            raise DomainError(f"{self.kind}: K = 0 has no stereographic model; use the flat space")
        if self.required_sign and self.sign != self.required_sign:
            raise ContractError(
                f"{self.kind} requires K {'<' if self.required_sign < 0 else '>'} 0, got {scalar(self.k)}"
            )
        if not self.required_sign:
            self.kind = "p" if self.sign < 0 else "d"

    @property
    def tangent_scale0(self):
        return 2.0

    def lam(self, x, keepdim=True):
        return gyro.conformal_factor(self.k, x, keepdim)

    def inner(self, x, u, v):
        return self.lam(x, False) ** 2 * (u * v).sum(-1)

    def norm(self, x, u):
        return self.lam(x, False) * safe_norm(u, False)

    def point_error(self, x):
        if self.sign > 0:
            return torch.zeros(x.shape[:-1], dtype=torch.float64)
        # positive once the point leaves the open ball
        inside = 1.0 + self.k * sqdot(x, False)
        return torch.where(inside > 0, torch.zeros_like(inside), torch.full_like(inside, math.inf))

    def distance(self, x, y):
        return gyro.stereo_distance(self.k, x, y)

    def gyro_distance(self, x, y):
        return gyro.gyro_distance(self.k, x, y)

    def mobius_add(self, x, y):
        return gyro.mobius_add(self.k, x, y)

    def expmap(self, x, v):
        lam = self.lam(x)
        a = self.k.abs().sqrt() * lam * safe_norm(v) / 2.0
        step = tanc_k(a, self.sign) * (lam / 2.0) * v
        return self._clip(gyro.mobius_add(self.k, x, step))

    def logmap(self, x, y):
        w = gyro.mobius_add(self.k, -x, y)
        a = self.k.abs().sqrt() * safe_norm(w)
        u = (2.0 / self.lam(x)) * arctanc_k(a, self.sign) * w
        return torch.where(_same(x, y), torch.zeros_like(u), u)

    def transp(self, x, y, v):
        return self.lam(x) / self.lam(y) * gyro.gyration(self.k, y, -x, v)

    def transp0(self, y, v):
        return 2.0 / self.lam(y) * v

    def transp0back(self, y, v):
        return self.lam(y) / 2.0 * v

    def _clip(self, x):
        if self.sign > 0:
            return x
        maxnorm = (1.0 - BALL_MARGIN) * self.radius
        n = safe_norm(x)
        return torch.where(n > maxnorm, x / n * maxnorm, x)

    def proj(self, a):
        return self._clip(a)

    def lift(self, xt):
        return xt


class PoincareBall(Stereographic):
    kind = "p"
    required_sign = -1


class ProjectedSphere(Stereographic):
    kind = "d"
    required_sign = 1


_CLASSES = {"e": Euclidean, "h": Hyperboloid, "s": Sphere, "p": PoincareBall, "d": ProjectedSphere}


def make_space(model, dim, k):
    """Build the space for a model tag, dispatching flat curvatures to Euclidean ops.

    ``u`` picks the projected sphere, Euclidean space or Poincare ball by the sign
    of ``k`` (flat below the threshold). ``p`` and ``d`` at exactly ``k = 0`` (the
    start of a curvature burn-in) also fall back to Euclidean ops.
    """
    model = model.lower()
    kv = scalar(k)
    if model == "u":
        if abs(kv) < FLAT_THRESHOLD:
            return Euclidean(dim, model="u")
        return Stereographic(dim, k, model="u")
    if model in ("p", "d") and kv == 0.0:
        return Euclidean(dim, model=model)
    try:
        cls = _CLASSES[model]
    except KeyError:
        raise ContractError(f"unknown model tag {model!r}") from None
    return cls(dim, k)


def stereo_project(k, p):
    """Hyperboloid/sphere point to the Poincare ball/projected sphere."""
    k = as_tensor(k)
    den = 1.0 + k.abs().sqrt() * p[..., :1]
    if bool((den.abs() < ANTIPODAL_EPS).any()):
        raise SingularityError("stereographic projection undefined at the pole")
    return p[..., 1:] / den


def stereo_unproject(k, y):
    """Inverse of :func:`stereo_project`."""
    k = as_tensor(k)
    ky2 = k * sqdot(y)
    den = 1.0 + ky2
    if bool((den <= 0).any()):
        raise DomainError("stereographic back-projection: point outside the ball")
    x0 = (1.0 - ky2) / (k.abs().sqrt() * den)
    return torch.cat([x0, 2.0 * y / den], -1)
