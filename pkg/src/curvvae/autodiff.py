"""Reverse-mode gradients and finite-difference verification.

Gradients come from torch autograd in float64; this module adds the strict
single-backward contract and a finite-difference checker used by the gradient
acceptance tests and ``curvvae gradcheck``.
"""
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import ContractError


def backward(output, leaves):
    """Gradients of a scalar ``output`` with respect to ``leaves``.

    The graph is released afterwards, so a second call on the same output
    raises :class:`ContractError`. Leaves that do not influence the output get
    zero gradients.
    """
    if not isinstance(output, torch.Tensor) or output.numel() != 1:
        raise ContractError("backward needs a scalar output")
    leaves = list(leaves)
    try:
        grads = torch.autograd.grad(output.reshape(()), leaves, allow_unused=True)
    except RuntimeError as e:
        if "second time" in str(e) or "freed" in str(e):
            raise ContractError("backward already ran on this computation") from e
        raise
    return [torch.zeros_like(p) if g is None else g for p, g in zip(leaves, grads)]


@dataclass
class FiniteDifferenceReport:
    analytic: np.ndarray
    numeric: np.ndarray
    rel_errors: np.ndarray
    tolerance: float
    coords: np.ndarray
    skipped: list = field(default_factory=list)

    @property
    def max_rel_error(self):
        return float(self.rel_errors.max()) if self.rel_errors.size else 0.0

    @property
    def passed(self):
        return bool(self.rel_errors.size) and self.max_rel_error <= self.tolerance

    def summary(self):
        return (
            f"{len(self.coords)} coordinates, max relative error {self.max_rel_error:.3e} "
            f"(tolerance {self.tolerance:g}), {len(self.skipped)} skipped -> "
            f"{'PASS' if self.passed else 'FAIL'}"
        )


def relative_error(a, b, floor=1e-6):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def finite_difference_check(f, point, h=1e-4, tolerance=1e-4, coords=None, analytic=None, floor=1e-6, skip=None):
    """Compare autograd against central differences of ``f`` at ``point``.

    ``f`` maps a flat float64 tensor to a scalar tensor. ``coords`` restricts the
    check to some coordinates; ``skip(i)`` may veto coordinates where ``f`` is
    not smooth at the scale ``h`` (the reason is recorded in the report).
    """
    x = torch.as_tensor(point, dtype=torch.float64).detach().clone().reshape(-1)
    if coords is None:
        coords = np.arange(x.numel())
    coords = np.asarray(coords, dtype=int)
    if analytic is None:
        leaf = x.clone().requires_grad_(True)
        out = f(leaf)
        (g,) = backward(out, [leaf])
        analytic = g.detach().numpy()
    analytic = np.asarray(analytic, dtype=float).reshape(-1)
    used, a_vals, n_vals, skipped = [], [], [], []
    with torch.no_grad():
        for i in coords:
            if skip is not None:
                why = skip(int(i))
                if why:
                    skipped.append((int(i), why))
                    continue
            xp = x.clone()
            xp[i] += h
            xm = x.clone()
            xm[i] -= h
            num = (float(f(xp)) - float(f(xm))) / (2.0 * h)
            used.append(int(i))
            a_vals.append(analytic[i])
            n_vals.append(num)
    a_vals, n_vals = np.array(a_vals), np.array(n_vals)
    return FiniteDifferenceReport(
        analytic=a_vals,
        numeric=n_vals,
        rel_errors=relative_error(a_vals, n_vals, floor),
        tolerance=tolerance,
        coords=np.array(used, dtype=int),
        skipped=skipped,
    )
