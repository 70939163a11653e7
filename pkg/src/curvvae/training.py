"""Training loop, curvature schedules and early stopping."""
import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .autodiff import backward
from .datasets import dynamic_binarize
from .errors import ComponentError, ContractError, CurvVaeError, TrainingError
from .model import MixedCurvatureVAE, VaeConfig, reconstruction_loss

STAGES = ("euclidean-half", "split-stabilize", "free-curvature")


@dataclass
class TrainConfig:
    epochs: int = 300
    batch_size: int = 128
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    curvature_lr: float = 1e-4
    burn_in: int = 10
    lookahead: int = 50
    warmup: int = 100
    universal_epsilon: float = 1e-2
    stabilize: int = 10
    kl_samples: int = 1
    eval_every: int = 0
    eval_samples: int = 500
    binarize: str = "none"  # none | dynamic

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.kl_samples < 1:
            raise ContractError("epochs, batch_size and kl_samples must be >= 1")
        if self.binarize not in ("none", "dynamic"):
            raise ContractError(f"binarize must be none or dynamic, got {self.binarize!r}")


# -- optimizers -------------------------------------------------------------------


def make_optimizers(model, cfg):
    adam = torch.optim.Adam(model.weight_params(), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2), eps=cfg.adam_eps)
    curv = model.curvature_params()
    sgd = torch.optim.SGD(curv, lr=cfg.curvature_lr) if curv else None
    return adam, sgd


def adam_step(optimizer, params, grads):
    """Apply one Adam update with externally computed gradients."""
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ContractError("gradient shape does not match its parameter")
        p.grad = g.detach().clone()
    optimizer.step()
    optimizer.zero_grad(set_to_none=True)


# -- curvature schedules ---------------------------------------------------------------


def burn_in_curvature(epoch, target, length=10):
    """Linear ramp from 0 at epoch 0 to ``target`` at ``length``."""
    if epoch < 0:
        raise ContractError("epoch must be >= 0")
    return target * min(epoch, length) / length


def _burn_in_value(model_tag, epoch, target, length):
    k = burn_in_curvature(epoch, target, length)
    if model_tag in "hs":
        # the hyperboloid and sphere have no flat member: start one step into the ramp
        floor = abs(target) / length
        k = math.copysign(max(abs(k), floor), target)
    return k


class UniversalSchedule:
    """Flat first half, three-way sign split, short freeze, then free curvature."""

    def __init__(self, total_epochs, n_components, epsilon=1e-2, stabilize=10):
        if n_components < 1:
            raise ContractError("universal schedule needs at least one component")
        self.total = int(total_epochs)
        self.n = int(n_components)
        self.epsilon = float(epsilon)
        self.split_epoch = self.total // 2
        self.free_epoch = self.split_epoch + int(stabilize)

    def stage(self, epoch):
        if epoch < self.split_epoch:
            return STAGES[0]
        if epoch < self.free_epoch:
            return STAGES[1]
        return STAGES[2]

    def groups(self):
        """Group label per component: ``h`` (negative), ``e`` (flat), ``s`` (positive)."""
        labels = [None] * self.n
        for tag, idx in zip("hes", np.array_split(np.arange(self.n), 3)):
            for i in idx:
                labels[int(i)] = tag
        return labels

    def group_sizes(self):
        g = self.groups()
        return tuple(g.count(t) for t in "hes")

    def split_values(self):
        return [{"h": -self.epsilon, "e": 0.0, "s": self.epsilon}[t] for t in self.groups()]

    def tick(self, epoch):
        """Actions for ``epoch``: stage name, curvatures to assign now, and whether K learns."""
        stage = self.stage(epoch)
        return {
            "stage": stage,
            "assign": self.split_values() if epoch == self.split_epoch else None,
            "learn": stage == STAGES[2],
            "learnable": [t != "e" for t in self.groups()],
        }


def universal_schedule_tick(stage, epoch, total_epochs, components, epsilon=1e-2, stabilize=10):
    """Functional form of :meth:`UniversalSchedule.tick` for a component list."""
    if not all(getattr(c, "mode", "universal") == "universal" for c in components):
        raise ContractError("universal schedule requires universal components")
    sched = UniversalSchedule(total_epochs, len(components), epsilon, stabilize)
    out = sched.tick(epoch)
    if stage is not None and STAGES.index(out["stage"]) < STAGES.index(stage):
        raise ContractError("universal stages only move forward")
    return out


class EarlyStopping:
    def __init__(self, lookahead=50, warmup=100):
        self.lookahead = lookahead
        self.warmup = warmup
        self.best = -math.inf
        self.best_epoch = -1

    def update(self, epoch, value):
        """Record the epoch's train ELBO; returns True when training should stop."""
        if value > self.best:
            self.best, self.best_epoch = value, epoch
        return epoch >= self.warmup and epoch - self.best_epoch >= self.lookahead


# -- the loop ----------------------------------------------------------------------------


@dataclass
class FitResult:
    model: MixedCurvatureVAE
    history: list
    best_epoch: int
    last_epoch: int
    header: list = field(default_factory=list)

    def metrics_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.history:
            w.writerow([_fmt(row[h]) for h in self.header])
        return buf.getvalue()


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


class _Plan:
    """Per-epoch curvature overrides and trainability for a model."""

    def __init__(self, model, cfg):
        self.model = model
        self.cfg = cfg
        comps = model.signature.components
        self.universal = [c.mode == "universal" for c in comps]
        self.sched = None
        if any(self.universal):
            if not all(self.universal):
                raise ContractError("mixing universal and non-universal components is not supported")
            self.sched = UniversalSchedule(cfg.epochs, len(comps), cfg.universal_epsilon, cfg.stabilize)
        self.targets = [c.value().detach() for c in model.curv]

    def apply(self, epoch):
        """Sets overrides; returns (stage label, per-component learn flags)."""
        m = self.model
        if self.sched is not None:
            act = self.sched.tick(epoch)
            if act["assign"] is not None:
                with torch.no_grad():
                    for c, k in zip(m.curv, act["assign"]):
                        c.raw.fill_(k)
            learn = [act["learn"] and ok for ok in act["learnable"]]
            return act["stage"], learn
        in_burn = epoch < self.cfg.burn_in
        for i, c in enumerate(m.curv):
            curved = float(self.targets[i]) != 0.0
            if in_burn and curved:
                m.override[i] = _burn_in_value(c.model, epoch, float(c.value().detach()), self.cfg.burn_in)
            else:
                m.override[i] = None
        learn = [(not in_burn) and c.mode == "learnable" for c in m.curv]
        curved_any = any(float(t) != 0.0 for t in self.targets)
        return ("burn-in" if in_burn and curved_any else "train"), learn


def _diagnose(model, xb, epoch):
    """Locate the first component whose computation goes non-finite."""
    with torch.no_grad():
        try:
            ps = model.space()
            q = model.encode(xb, ps)
            gen = torch.Generator().manual_seed(0)
            z, v = q.rsample((1,), generator=gen)
            prior = model.prior(ps, xb.shape[:-1])
            checks = [
                ("expmap0", lambda i: q.components[i].mean),
                ("scale", lambda i: q.components[i].scale),
                ("rsample", lambda i: ps.split(z)[i]),
                ("log_prob_q", lambda i: q.components[i].log_prob_from_record(ps.split_latent(v)[i])),
                ("log_prob_prior", lambda i: prior.components[i].log_prob(ps.split(z)[i])),
            ]
            for op, get in checks:
                for i in range(len(ps.spaces)):
                    if not bool(torch.isfinite(get(i)).all()):
                        return i, op
            rec = reconstruction_loss(model.config.observation, model.decode(z), xb)
            if not bool(torch.isfinite(rec).all()):
                return None, "decoder"
        except ComponentError as e:
            return e.index, type(e.cause).__name__
    return None, "loss"


def fit(vae_config, train_cfg, data, seed=0, eval_data=None, grad_hook=None, log=None):
    """Train a VAE; returns a :class:`FitResult` holding the best-ELBO model.

    ``data`` is an ``(N, D)`` float64 tensor. ``grad_hook(epoch, model, grads)``
    may edit the gradient dict (keyed by parameter name, curvatures as
    ``curv.<i>``) before the optimizer steps.
    """
    if data.dim() != 2 or data.shape[1] != vae_config.input_dim:
        raise ContractError(f"data must be (N, {vae_config.input_dim}), got {tuple(data.shape)}")
    cfg = train_cfg
    model = MixedCurvatureVAE(vae_config, seed=seed)
    plan = _Plan(model, cfg)
    adam, sgd = make_optimizers(model, cfg)
    gen = torch.Generator().manual_seed(int(seed) + 1)
    stopper = EarlyStopping(cfg.lookahead, cfg.warmup)
    n = data.shape[0]
    header = ["epoch", "elbo", "bce", "kl", "ll_estimate", "stage"] + [f"K_{i}" for i in range(len(model.curv))]
    history = []
    best_state, best_override = model.state_dict(), list(model.override)
    weight_names = list(model.weights)
    curv_names = [f"curv.{i}" for i, c in enumerate(model.curv) if c.raw is not None]
    curv_index = [i for i, c in enumerate(model.curv) if c.raw is not None]
    last_epoch = 0
    free_epoch = plan.sched.free_epoch if plan.sched is not None else 0

    for epoch in range(cfg.epochs):
        last_epoch = epoch
        stage, learn = plan.apply(epoch)
        for c, flag in zip(model.curv, learn):
            if c.raw is not None:
                c.raw.requires_grad_(flag)
        perm = torch.randperm(n, generator=gen)
        sums = np.zeros(3)
        for start in range(0, n, cfg.batch_size):
            xb = data[perm[start : start + cfg.batch_size]]
            if cfg.binarize == "dynamic":
                xb = dynamic_binarize(xb, gen)
            try:
                stats = model.elbo(xb, gen, samples=cfg.kl_samples)
            except ComponentError as e:
                raise TrainingError(
                    f"epoch {epoch}: component {e.index} ({e.model}) failed in {type(e.cause).__name__}: {e.cause}"
                ) from e
            except CurvVaeError as e:
                raise TrainingError(f"epoch {epoch}: {e}") from e
            loss = -stats.elbo
            if not bool(torch.isfinite(loss)):
                comp, op = _diagnose(model, xb, epoch)
                raise TrainingError(f"non-finite loss at epoch {epoch}, component {comp}, op {op}")
            params = model.weight_params()
            active_curv = [model.curv[i].raw for i in curv_index if model.curv[i].raw.requires_grad]
            grads = backward(loss, params + active_curv)
            gdict = dict(zip(weight_names, grads[: len(params)]))
            active_names = [nm for nm, i in zip(curv_names, curv_index) if model.curv[i].raw.requires_grad]
            gdict.update(zip(active_names, grads[len(params) :]))
            if grad_hook is not None:
                grad_hook(epoch, model, gdict)
            adam_step(adam, params, [gdict[k] for k in weight_names])
            if sgd is not None and active_names:
                for nm in curv_names:
                    p = model.curv[int(nm.split(".")[1])].raw
                    p.grad = gdict[nm].detach().clone() if nm in gdict else None
                sgd.step()
                sgd.zero_grad(set_to_none=True)
            sums += np.array(stats.as_floats()) * xb.shape[0]
        elbo, bce, kl = (sums / n).tolist()
        ll = None
        if eval_data is not None and cfg.eval_every and (epoch + 1) % cfg.eval_every == 0:
            ll = float(model.iwae(eval_data, cfg.eval_samples, gen).mean())
        row = {"epoch": epoch, "elbo": elbo, "bce": bce, "kl": kl, "ll_estimate": ll, "stage": stage}
        for i, k in enumerate(model.curvature_snapshot()):
            row[f"K_{i}"] = k
        for i, k in enumerate(row[f"K_{j}"] for j in range(len(model.curv))):
            if not math.isfinite(k):
                raise TrainingError(f"epoch {epoch}: curvature of component {i} is not finite")
        history.append(row)
        if log is not None:
            log(row)
        stop = stopper.update(epoch, elbo)
        if stopper.best_epoch == epoch:
            best_state, best_override = model.state_dict(), list(model.override)
        if stop and epoch >= free_epoch:
            break

    model.load_state_dict(best_state)
    model.override = best_override
    for c in model.curv:
        if c.raw is not None:
            c.raw.requires_grad_(True)
    return FitResult(model, history, stopper.best_epoch, last_epoch, header)


def evaluate(model, data, samples=500, seed=0, batch_size=100, chunk=50):
    """IWAE estimate per example; returns ``(mean, standard error)``."""
    gen = torch.Generator().manual_seed(int(seed))
    vals = []
    for start in range(0, data.shape[0], batch_size):
        vals.append(model.iwae(data[start : start + batch_size], samples, gen, chunk=chunk))
    v = torch.cat(vals).numpy()
    se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
    return float(v.mean()), se


__all__ = [
    "EarlyStopping",
    "FitResult",
    "TrainConfig",
    "UniversalSchedule",
    "VaeConfig",
    "adam_step",
    "burn_in_curvature",
    "evaluate",
    "fit",
    "make_optimizers",
    "universal_schedule_tick",
]
