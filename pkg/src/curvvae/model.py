"""Mixed-curvature VAE: encoder, decoder, ELBO, IWAE bound and checkpoints.

Every latent component carries a Wrapped Normal posterior whose mean is the
exponential map of an encoder output at the component origin. The decoder
reads the ambient coordinates of the sampled product point.
"""
import json
import math
import struct
from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F

from .distributions import ProductWrappedNormal, prior
from .errors import ContractError, FormatError
from .geometry.functions import scalar
from .product import ProductSpace, parse_signature

RADIUS_FLOOR = 1e-4
SCALE_FLOOR = 1e-5
MAGIC = b"MVAE1"


@dataclass
class VaeConfig:
    signature: str
    input_dim: int
    hidden: int = 400
    covariance: str = "spherical"
    observation: str = "bernoulli"
    prior_scale: float = 1.0

    def __post_init__(self):
        self.signature = str(parse_signature(self.signature))
        if self.covariance not in ("spherical", "diagonal"):
            raise ContractError(f"covariance must be spherical or diagonal, got {self.covariance!r}")
        if self.observation not in ("bernoulli", "gaussian"):
            raise ContractError(f"observation must be bernoulli or gaussian, got {self.observation!r}")
        if self.input_dim < 1 or self.hidden < 1:
            raise ContractError("input_dim and hidden must be positive")
        if not self.prior_scale > 0:
            raise ContractError("prior_scale must be positive")


@dataclass
class ElboStats:
    """Batch means; ``bce`` is the positive reconstruction loss, ``elbo = -bce - kl``."""

    elbo: torch.Tensor
    bce: torch.Tensor
    kl: torch.Tensor
    curvatures: list

    def as_floats(self):
        return float(self.elbo.detach()), float(self.bce.detach()), float(self.kl.detach())


def reconstruction_loss(observation, output, target):
    """Per-example reconstruction loss summed over the data axis."""
    if output.shape[-1] != target.shape[-1]:
        raise ContractError("reconstruction: output and target sizes differ")
    if observation == "bernoulli":
        target = target.expand_as(output)
        return F.binary_cross_entropy_with_logits(output, target, reduction="none").sum(-1)
    if observation == "gaussian":
        d = output - target
        return 0.5 * (d * d).sum(-1)
    raise ContractError(f"unknown observation model {observation!r}")


class CurvatureParam:
    """Curvature of one component: fixed, signed radius, or unconstrained (universal)."""

    def __init__(self, component):
        self.mode = component.mode
        self.model = component.model
        self.init = float(component.k)
        self.sign = 0 if self.init == 0 else (1 if self.init > 0 else -1)
        self.raw = None
        if self.mode == "learnable":
            self.raw = torch.tensor(1.0 / math.sqrt(abs(self.init)), dtype=torch.float64, requires_grad=True)
        elif self.mode == "universal":
            self.raw = torch.tensor(0.0, dtype=torch.float64, requires_grad=True)

    def value(self):
        if self.mode == "fixed":
            return torch.tensor(self.init, dtype=torch.float64)
        if self.mode == "learnable":
            r = torch.where(self.raw > RADIUS_FLOOR, self.raw, torch.full_like(self.raw, RADIUS_FLOOR))
            return self.sign / (r * r)
        return self.raw

    def radius(self):
        k = abs(scalar(self.value()))
        return math.inf if k == 0 else 1.0 / math.sqrt(k)


def _uniform(gen, shape, fan_in):
    bound = 1.0 / math.sqrt(fan_in)
    return ((torch.rand(shape, generator=gen, dtype=torch.float64) * 2.0 - 1.0) * bound).requires_grad_(True)


class MixedCurvatureVAE:
    def __init__(self, config, seed=0):
        self.config = config
        self.signature = parse_signature(config.signature)
        sig = self.signature
        d, h = config.input_dim, config.hidden
        n_scale = len(sig) if config.covariance == "spherical" else sig.latent_dim
        gen = torch.Generator().manual_seed(int(seed))
        shapes = [
            ("enc.w1", (h, d), d),
            ("enc.b1", (h,), d),
            ("enc.wm", (sig.latent_dim, h), h),
            ("enc.bm", (sig.latent_dim,), h),
            ("enc.ws", (n_scale, h), h),
            ("enc.bs", (n_scale,), h),
            ("dec.w1", (h, sig.ambient_dim), sig.ambient_dim),
            ("dec.b1", (h,), sig.ambient_dim),
            ("dec.w2", (d, h), h),
            ("dec.b2", (d,), h),
        ]
        self.weights = {name: _uniform(gen, shape, fan) for name, shape, fan in shapes}
        self.curv = [CurvatureParam(c) for c in sig.components]
        # per-component curvature used instead of the parameter (burn-in, universal stages)
        self.override = [None] * len(self.curv)
        # when a list, hidden pre-activations are appended to it (gradient checks use this)
        self.relu_trace = None

    # -- parameters ----------------------------------------------------------------

    def weight_params(self):
        return list(self.weights.values())

    def curvature_params(self):
        return [c.raw for c in self.curv if c.raw is not None]

    def curvatures(self):
        out = []
        for c, o in zip(self.curv, self.override):
            out.append(torch.tensor(float(o), dtype=torch.float64) if o is not None else c.value())
        return out

    def curvature_snapshot(self):
        return [scalar(k) for k in self.curvatures()]

    def space(self):
        return ProductSpace(self.signature, self.curvatures())

    def state_dict(self):
        state = {k: v.detach().clone() for k, v in self.weights.items()}
        for i, c in enumerate(self.curv):
            if c.raw is not None:
                state[f"curv.{i}"] = c.raw.detach().clone().reshape(1)
        return state

    def load_state_dict(self, state):
        with torch.no_grad():
            for k, v in self.weights.items():
                v.copy_(state[k].reshape(v.shape))
            for i, c in enumerate(self.curv):
                if c.raw is not None:
                    c.raw.copy_(state[f"curv.{i}"].reshape(()))

    # -- networks ---------------------------------------------------------------------

    def _relu(self, pre):
        if self.relu_trace is not None:
            self.relu_trace.append(pre.detach())
        return torch.relu(pre)

    def encode(self, x, pspace=None):
        """Posterior over the product space for a batch ``x``."""
        if x.shape[-1] != self.config.input_dim:
            raise ContractError(f"expected inputs of size {self.config.input_dim}, got {x.shape[-1]}")
        w = self.weights
        ps = pspace or self.space()
        hid = self._relu(x @ w["enc.w1"].T + w["enc.b1"])
        tangent = hid @ w["enc.wm"].T + w["enc.bm"]
        sigma = F.softplus(hid @ w["enc.ws"].T + w["enc.bs"]) + SCALE_FLOOR
        means, scales = [], []
        for i, (sp, part) in enumerate(zip(ps.spaces, ps.split_latent(tangent))):
            means.append(sp.expmap0(sp.embed_tangent0(part)))
            if self.config.covariance == "spherical":
                scales.append(sigma[..., i : i + 1])
            else:
                scales.append(sigma[..., ps.latent_slices[i]])
        return ProductWrappedNormal(ps, torch.cat(means, -1), scales)

    def decode(self, z):
        w = self.weights
        hid = self._relu(z @ w["dec.w1"].T + w["dec.b1"])
        return hid @ w["dec.w2"].T + w["dec.b2"]

    def prior(self, pspace, batch_shape=()):
        return prior(pspace, batch_shape, self.config.prior_scale)

    # -- objectives -------------------------------------------------------------------

    def log_weights(self, x, samples, generator=None):
        """``log p(x|z) + log p(z) - log q(z|x)`` and its parts, shape ``(samples, batch)``."""
        ps = self.space()
        q = self.encode(x, ps)
        z, v = q.rsample((samples,), generator=generator)
        rec = reconstruction_loss(self.config.observation, self.decode(z), x)
        kl = q.log_prob_from_record(v) - self.prior(ps, x.shape[:-1]).log_prob(z)
        return -rec - kl, rec, kl

    def elbo(self, x, generator=None, samples=1):
        """Single-batch ELBO with ``samples`` reparametrized draws per example."""
        _, rec, kl = self.log_weights(x, samples, generator)
        bce = rec.mean()
        klm = kl.mean()
        return ElboStats(-bce - klm, bce, klm, self.curvature_snapshot())

    def iwae(self, x, k, generator=None, chunk=50):
        """Per-example importance-weighted bound ``log mean_i w_i`` with ``k`` samples."""
        if k < 1:
            raise ContractError("iwae needs k >= 1")
        parts = []
        with torch.no_grad():
            done = 0
            while done < k:
                m = min(chunk, k - done)
                logw, _, _ = self.log_weights(x, m, generator)
                parts.append(logw)
                done += m
        logw = torch.cat(parts, 0)
        return torch.logsumexp(logw, 0) - math.log(k)


# -- checkpoints ----------------------------------------------------------------------


def save_checkpoint(path, model, extra=None):
    state = model.state_dict()
    tensors, offset = [], 0
    blobs = []
    for name, t in state.items():
        data = t.detach().contiguous().numpy().astype("<f8").tobytes()
        tensors.append({"name": name, "shape": list(t.shape), "offset": offset})
        blobs.append(data)
        offset += len(data)
    header = {
        "version": 1,
        "config": asdict(model.config),
        "tensors": tensors,
        "override": [None if o is None else float(o) for o in model.override],
        "extra": extra or {},
    }
    hb = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(hb)))
        fh.write(hb)
        for b in blobs:
            fh.write(b)


def load_checkpoint(path):
    """Returns ``(model, extra)``."""
    import numpy as np

    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: bad magic at offset 0 (expected {MAGIC!r})")
    pos = len(MAGIC)
    if len(raw) < pos + 4:
        raise FormatError(f"{path}: truncated header length at offset {pos}")
    (hlen,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    try:
        header = json.loads(raw[pos : pos + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: unreadable header at offset {pos}: {e}") from None
    pos += hlen
    model = MixedCurvatureVAE(VaeConfig(**header["config"]))
    state = {}
    for entry in header["tensors"]:
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        start = pos + entry["offset"]
        end = start + 8 * count
        if end > len(raw):
            raise FormatError(f"{path}: tensor {entry['name']} truncated at offset {start}")
        arr = np.frombuffer(raw[start:end], dtype="<f8").reshape(entry["shape"])
        state[entry["name"]] = torch.from_numpy(arr.astype(np.float64))
    missing = set(model.state_dict()) - set(state)
    if missing:
        raise FormatError(f"{path}: missing tensors {sorted(missing)}")
    model.load_state_dict(state)
    model.override = list(header.get("override", model.override))
    return model, header.get("extra", {})
