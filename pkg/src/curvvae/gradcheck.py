"""Finite-difference verification of ELBO gradients on a tiny model.

The reparametrization noise is frozen by reseeding the generator on every
evaluation, so the ELBO is a deterministic smooth function of the parameters
away from ReLU kinks. Coordinates whose perturbation flips a ReLU are skipped
and listed in the report.
"""
from dataclasses import dataclass

import numpy as np
import torch

from .autodiff import finite_difference_check
from .model import MixedCurvatureVAE, VaeConfig

GROUPS = {
    "enc.wm": "tangent-mean",
    "enc.bm": "tangent-mean",
    "enc.ws": "scale-head",
    "enc.bs": "scale-head",
}


@dataclass
class GradcheckResult:
    signature: str
    report: object
    groups: dict  # group name -> number of checked coordinates

    @property
    def passed(self):
        return self.report.passed

    def summary(self):
        parts = ", ".join(f"{k}={v}" for k, v in sorted(self.groups.items()))
        return f"{self.signature}: {self.report.summary()} [{parts}]"


class _Toy:
    def __init__(self, signature, seed, input_dim, hidden, batch, covariance, curvatures):
        cfg = VaeConfig(signature, input_dim, hidden=hidden, covariance=covariance)
        self.model = MixedCurvatureVAE(cfg, seed=seed)
        m = self.model
        if curvatures is not None:
            with torch.no_grad():
                for c, k in zip(m.curv, curvatures):
                    if k is not None and c.mode == "universal":
                        c.raw.fill_(k)
        gen = torch.Generator().manual_seed(seed + 7)
        self.x = (torch.rand((batch, input_dim), generator=gen, dtype=torch.float64) > 0.5).to(torch.float64)
        self.noise_seed = seed + 11
        self.entries = [(n, t.shape, "weight" if n not in GROUPS else GROUPS[n]) for n, t in m.weights.items()]
        self.entries += [(f"curv.{i}", (), "curvature") for i, c in enumerate(m.curv) if c.raw is not None]
        self.sizes = [int(np.prod(s)) if s else 1 for _, s, _ in self.entries]
        self.point = torch.cat([self._get(n).reshape(-1) for n, _, _ in self.entries]).detach()

    def _get(self, name):
        if name.startswith("curv."):
            return self.model.curv[int(name[5:])].raw
        return self.model.weights[name]

    def _load(self, flat):
        m = self.model
        for (name, shape, _), piece in zip(self.entries, torch.split(flat, self.sizes)):
            piece = piece.reshape(shape)
            if name.startswith("curv."):
                m.curv[int(name[5:])].raw = piece
            else:
                m.weights[name] = piece

    def elbo(self, flat):
        self._load(flat)
        gen = torch.Generator().manual_seed(self.noise_seed)
        return self.model.elbo(self.x, gen).elbo

    def pattern(self, flat):
        self.model.relu_trace = []
        with torch.no_grad():
            self.elbo(flat)
        trace, self.model.relu_trace = self.model.relu_trace, None
        return torch.cat([t.reshape(-1) > 0 for t in trace])

    def group_of(self):
        return np.concatenate([[g] * n for (_, _, g), n in zip(self.entries, self.sizes)])


def model_gradcheck(
    signature,
    seed=0,
    n_coords=200,
    h=1e-4,
    tolerance=1e-4,
    input_dim=6,
    hidden=12,
    batch=8,
    covariance="spherical",
    curvatures=None,
):
    """Check ``n_coords`` sampled coordinates (all curvature coordinates included)."""
    toy = _Toy(signature, seed, input_dim, hidden, batch, covariance, curvatures)
    groups = toy.group_of()
    rng = np.random.default_rng(seed)
    forced = np.flatnonzero(groups == "curvature")
    rest = np.setdiff1d(np.arange(len(groups)), forced)
    take = min(len(rest), max(n_coords - len(forced), 0))
    coords = np.sort(np.concatenate([forced, rng.choice(rest, size=take, replace=False)]))
    base = toy.pattern(toy.point)

    def kink(i):
        for step in (h, -h):
            xp = toy.point.clone()
            xp[i] += step
            if not torch.equal(toy.pattern(xp), base):
                return "relu kink within h"
        return None

    report = finite_difference_check(toy.elbo, toy.point, h=h, tolerance=tolerance, coords=coords, skip=kink)
    counts = {}
    for i in report.coords:
        counts[groups[i]] = counts.get(groups[i], 0) + 1
    return GradcheckResult(str(toy.model.signature), report, counts)
