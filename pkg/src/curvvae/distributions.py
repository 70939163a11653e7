"""Wrapped Normal distributions on single spaces and on products.

The scale is given in intrinsic tangent coordinates at the origin: spatial
coordinates for the hyperboloid and sphere, chart coordinates for the
stereographic models. Sampling draws ``v ~ N(0, diag(sigma^2))`` there,
transports it to the mean and applies the exponential map.

Densities are taken with respect to the Riemannian volume, except on the
stereographic models where the reference measure is ``(lambda_z / 2)^n dz``.
That measure tends to Lebesgue measure as K -> 0, so the density of a ``u``
component is continuous across zero curvature.

On positively curved spaces the exponential map wraps around, so the density
sums the contributions of every tangent preimage (a handful of terms in
practice; far-away terms are negligible).
"""
import math
from dataclasses import dataclass

import torch

from .errors import ContractError
from .geometry.functions import log_sinc_k, safe_norm, scalar
from .product import ProductSpace

LOG_2PI = math.log(2.0 * math.pi)
WRAP_SIGMAS = 8.0
WRAP_CAP = 64


def gaussian_logpdf(v, sigma):
    """``log N(v; 0, diag(sigma^2))`` summed over the last axis."""
    sigma = sigma.expand(v.shape)
    z = v / sigma
    return -0.5 * (z * z).sum(-1) - torch.log(sigma).sum(-1) - 0.5 * v.shape[-1] * LOG_2PI


@dataclass
class DensityEvaluation:
    """Log-density with its parts; ``total = gaussian + logdet + wrap``."""

    total: torch.Tensor
    gaussian: torch.Tensor
    logdet: torch.Tensor
    wrap: torch.Tensor


class WrappedNormal:
    """Wrapped Normal on one space.

    ``mean`` has shape ``(..., ambient_dim)``; ``scale`` is ``(..., n)`` for a
    diagonal covariance or ``(..., 1)`` for a spherical one.
    """

    def __init__(self, space, mean, scale):
        self.space = space
        self.mean = mean
        self.scale = scale
        if bool((scale.detach() <= 0).any()):
            raise ContractError("Wrapped Normal scale must be positive")
        if scale.shape[-1] not in (1, space.dim):
            raise ContractError(f"scale must have 1 or {space.dim} entries, got {scale.shape[-1]}")

    @property
    def wraps(self):
        return self.space.sign > 0 and not self.space.flat

    # -- sampling ----------------------------------------------------------------

    def push(self, v):
        """Map intrinsic tangent vectors at the origin onto the manifold."""
        sp = self.space
        u = sp.transp0(self.mean.expand(*v.shape[:-1], self.mean.shape[-1]), sp.embed_tangent0(v))
        return sp.expmap(self.mean.expand_as(u), u)

    def rsample(self, shape=(), generator=None, eps=None):
        """Reparametrized draw; returns ``(z, v)`` with ``v`` the tangent record."""
        if eps is None:
            full = (*shape, *self.mean.shape[:-1], self.space.dim)
            eps = torch.randn(full, generator=generator, dtype=torch.float64)
        v = self.scale * eps
        return self.push(v), v

    # -- density -------------------------------------------------------------------

    def pull(self, z):
        """Reverse procedure: intrinsic tangent at the origin for a point ``z``."""
        sp = self.space
        mean = self.mean.expand_as(z)
        return sp.extract_tangent0(sp.transp0back(mean, sp.logmap(mean, z)))

    def log_prob(self, z):
        return self.evaluate(self.pull(z)).total

    def log_prob_from_record(self, v):
        """Log-density of ``push(v)`` computed from the stored tangent ``v``."""
        return self.evaluate(self._principal(v)).total

    def evaluate(self, v):
        """Density breakdown at the point with principal tangent preimage ``v``."""
        sp = self.space
        n = sp.dim
        gauss = gaussian_logpdf(v, self.scale)
        if sp.flat:
            zero = torch.zeros_like(gauss)
            return DensityEvaluation(gauss, gauss, zero, zero)
        s0 = sp.tangent_scale0
        sk = sp.k.abs().sqrt()
        t = s0 * safe_norm(v)
        if n > 1:
            logdet = -(n - 1) * log_sinc_k(sk * t, sp.sign).squeeze(-1)
        else:
            logdet = torch.zeros_like(gauss)
        base = gauss + logdet
        if not self.wraps:
            return DensityEvaluation(base, gauss, logdet, torch.zeros_like(gauss))
        total = self._wrapped(v, t, base)
        return DensityEvaluation(total, gauss, logdet, total - base)

    def _window(self):
        sigma_max = scalar(self.scale.max()) * self.space.tangent_scale0
        period = 2.0 * math.pi * scalar(self.space.radius)
        return min(WRAP_CAP, math.ceil(WRAP_SIGMAS * sigma_max / period) + 1)

    def _direction(self, v, t):
        pos = t > 0
        e1 = torch.zeros_like(v)
        e1[..., 0] = 1.0
        vn = torch.where(pos, v, e1)
        return vn / safe_norm(vn), pos

    def _wrapped(self, v, t, base):
        sp = self.space
        n = sp.dim
        s0 = sp.tangent_scale0
        r = sp.radius
        w = self._window()
        ks = torch.tensor([j for j in range(-w, w + 1) if j != 0], dtype=torch.float64)
        lengths = t + 2.0 * math.pi * r * ks  # (..., M) signed lengths along dir
        direction, pos = self._direction(v, t)
        vk = direction.unsqueeze(-2) * (lengths / s0).unsqueeze(-1)
        terms = gaussian_logpdf(vk, self.scale.unsqueeze(-2))
        if n > 1:
            t_safe = torch.where(pos, t, torch.ones_like(t))
            log_sin = torch.log(torch.abs(r * torch.sin(t_safe / r)))
            terms = terms - (n - 1) * (log_sin - torch.log(lengths.abs()))
            # at t = 0 the other preimages form whole spheres; keep the principal term
            terms = torch.where(pos, terms, torch.full_like(terms, -math.inf))
        return torch.logsumexp(torch.cat([base.unsqueeze(-1), terms], -1), -1)

    def _principal(self, v):
        """Representative of ``v`` with Riemannian length in [0, pi R]."""
        if not self.wraps:
            return v
        s0 = self.space.tangent_scale0
        r = self.space.radius
        t = s0 * safe_norm(v)
        period = 2.0 * math.pi * r
        red = torch.remainder(t, period)
        signed = torch.where(red > math.pi * r, red - period, red)
        if bool((signed == t).all()):
            return v
        direction, _ = self._direction(v, t)
        return direction * (signed / s0)


class ProductWrappedNormal:
    """Independent Wrapped Normals on the components of a product space."""

    def __init__(self, pspace, mean, scales):
        if not isinstance(pspace, ProductSpace):
            raise ContractError("expected a ProductSpace")
        self.pspace = pspace
        self.mean = mean
        parts = pspace.split(mean)
        if len(scales) != len(pspace.spaces):
            raise ContractError("one scale tensor per component is required")
        self.components = [WrappedNormal(sp, m, s) for sp, m, s in zip(pspace.spaces, parts, scales)]

    def rsample(self, shape=(), generator=None, eps=None):
        if eps is None:
            full = (*shape, *self.mean.shape[:-1], self.pspace.latent_dim)
            eps = torch.randn(full, generator=generator, dtype=torch.float64)
        epss = self.pspace.split_latent(eps)
        zs, vs = zip(*(c.rsample(eps=e) for c, e in zip(self.components, epss)))
        return torch.cat(zs, -1), torch.cat(vs, -1)

    def component_log_probs(self, z):
        return [c.log_prob(p) for c, p in zip(self.components, self.pspace.split(z))]

    def log_prob(self, z):
        return torch.stack(self.component_log_probs(z), -1).sum(-1)

    def log_prob_from_record(self, v):
        parts = self.pspace.split_latent(v)
        return torch.stack([c.log_prob_from_record(p) for c, p in zip(self.components, parts)], -1).sum(-1)

    def evaluate(self, z):
        return [c.evaluate(c.pull(p)) for c, p in zip(self.components, self.pspace.split(z))]


def prior(pspace, batch_shape=(), scale=1.0):
    """``WN(mu_0, scale^2 I)`` on every component."""
    mean = pspace.origin(*batch_shape)
    scales = [torch.full((*batch_shape, 1), float(scale), dtype=torch.float64) for _ in pspace.spaces]
    return ProductWrappedNormal(pspace, mean, scales)


def kl_monte_carlo(q, p, z, q_record=None):
    """Mean over the leading sample axis of ``log q(z) - log p(z)``."""
    if z.dim() < 1 or z.shape[0] < 1:
        raise ContractError("need at least one sample")
    log_q = q.log_prob_from_record(q_record) if q_record is not None else q.log_prob(z)
    return (log_q - p.log_prob(z)).mean(0)
