import numpy as np
import pytest
import torch
import torch.nn.functional as F

from curvvae.autodiff import backward, finite_difference_check, relative_error
from curvvae.distributions import gaussian_logpdf
from curvvae.errors import ContractError
from curvvae.geometry import curv_trig, make_space, mobius_add
from curvvae.geometry import functions as fn


def leaf(*vals):
    return torch.tensor(vals, dtype=torch.float64, requires_grad=True)


def test_backward_examples():
    a = leaf(3.0)
    (g,) = backward((a * a).sum(), [a])
    assert float(g) == 6.0
    a, b = leaf(2.0), leaf(5.0)
    ga, gb = backward((a * b).sum(), [a, b])
    assert (float(ga), float(gb)) == (5.0, 2.0)


def test_backward_contract():
    a = leaf(1.0, 2.0)
    with pytest.raises(ContractError):
        backward(a * 2, [a])
    out = (a.exp()).sum()
    backward(out, [a])
    with pytest.raises(ContractError):
        backward(out, [a])
    c = leaf(1.0)
    (_, gc) = backward((a * a).sum(), [a, c])
    assert float(gc) == 0.0


def test_fd_examples():
    rep = finite_difference_check(lambda x: (x * x).sum(), [1.0, 1.0], h=1e-4, tolerance=1e-6)
    np.testing.assert_allclose(rep.numeric, [2.0, 2.0], atol=1e-6)
    assert rep.passed
    rep = finite_difference_check(lambda x: x.sum() * 0 + 3.0, [0.3, -0.2], h=1e-4)
    assert np.all(np.abs(rep.analytic) <= 1e-8) and np.all(np.abs(rep.numeric) <= 1e-8)


def test_fd_detects_wrong_gradient():
    class Wrong(torch.autograd.Function):
        @staticmethod
        def forward(ctx, x):
            return x**3

        @staticmethod
        def backward(ctx, g):
            return g * 2.0

    rep = finite_difference_check(lambda x: Wrong.apply(x).sum(), [0.7])
    assert not rep.passed
    assert "FAIL" in rep.summary()


def test_fd_skip_is_recorded():
    rep = finite_difference_check(lambda x: (x * x).sum(), [1.0, 2.0], skip=lambda i: "kink" if i == 0 else None)
    assert rep.skipped == [(0, "kink")] and list(rep.coords) == [1]


def test_relative_error_floor():
    assert relative_error(np.array([0.0]), np.array([1e-9]))[0] == pytest.approx(1e-3)


def test_distance_squared_gradient_in_curvature():
    v1 = torch.tensor([0.4, -0.3], dtype=torch.float64)
    v2 = torch.tensor([-0.2, 0.9], dtype=torch.float64)

    def f(kv):
        sp = make_space("h", 2, kv[0])
        x, y = sp.expmap0(sp.embed_tangent0(v1)), sp.expmap0(sp.embed_tangent0(v2))
        return sp.distance(x, y) ** 2

    rep = finite_difference_check(f, [-0.5], h=1e-4, tolerance=1e-4)
    assert rep.passed, rep.summary()
    assert abs(rep.analytic[0]) > 1e-3


# -- every primitive at 100 random points --------------------------------------------------


def _points(rng, n, lo, hi, size):
    return [rng.uniform(lo, hi, size) for _ in range(n)]


PRIMITIVES = {
    "sin_K": (lambda x: curv_trig("sin", 0.7, x).sum(), (-2, 2)),
    "sinh_K": (lambda x: curv_trig("sin", -0.7, x).sum(), (-2, 2)),
    "cos_K": (lambda x: curv_trig("cos", 1.0, x).sum(), (-2, 2)),
    "tan_K": (lambda x: curv_trig("tan", 1.0, x).sum(), (-1.2, 1.2)),
    "tanh_K": (lambda x: curv_trig("tan", -1.0, x).sum(), (-3, 3)),
    "arccos_clamped": (lambda x: fn.arccos_clamped(x).sum(), (-0.95, 0.95)),
    "arccosh_clamped": (lambda x: fn.arccosh_clamped(x).sum(), (1.05, 4.0)),
    "artanh_clamped": (lambda x: fn.artanh_clamped(x).sum(), (-0.95, 0.95)),
    "arctan_K": (lambda x: curv_trig("arctan", 1.0, x).sum(), (-3, 3)),
    "sinc_K": (lambda x: fn.sinc_k(x.abs(), -1).sum(), (0.01, 3)),
    "tanc_K": (lambda x: fn.tanc_k(x.abs(), 1).sum(), (0.01, 1.2)),
    "arctanc_K": (lambda x: fn.arctanc_k(x.abs(), -1).sum(), (0.01, 0.9)),
    "log_sinc_K": (lambda x: fn.log_sinc_k(x.abs(), 1).sum(), (0.01, 3.0)),
    "softplus": (lambda x: F.softplus(x).sum(), (-5, 5)),
    "logsumexp": (lambda x: torch.logsumexp(x, 0), (-5, 5)),
}


@pytest.mark.parametrize("name", sorted(PRIMITIVES))
def test_scalar_primitive_gradients(name):
    f, (lo, hi) = PRIMITIVES[name]
    rng = np.random.default_rng(7)
    worst = 0.0
    for p in _points(rng, 100, lo, hi, 3):
        rep = finite_difference_check(f, p, h=1e-5, tolerance=1e-4)
        worst = max(worst, rep.max_rel_error)
    assert worst <= 1e-4, f"{name}: {worst}"


def test_lorentz_mobius_gaussian_gradients():
    rng = np.random.default_rng(8)
    h = make_space("h", 2, -0.6)

    def lorentz(z):
        x, y = z[:3], z[3:]
        return h.inner(x, x, y).sum()

    def mobius(z):
        return (mobius_add(-0.8, z[:2], z[2:]) ** 2).sum() + mobius_add(0.5, z[2:], z[:2]).sum()

    def gauss(z):
        return gaussian_logpdf(z[:2], F.softplus(z[2:]) + 0.1)

    cases = [(lorentz, 6, 2.0), (mobius, 4, 0.5), (gauss, 4, 2.0)]
    for f, n, scale in cases:
        for _ in range(100):
            rep = finite_difference_check(f, rng.uniform(-scale, scale, n), h=1e-5, tolerance=1e-4)
            assert rep.passed, rep.summary()


def test_clamp_propagates_zero_gradient():
    x = torch.tensor(-1.0 - 5e-10, dtype=torch.float64, requires_grad=True)
    (g,) = backward(fn.arccos_clamped(x), [x])
    assert float(g) == 0.0
    x = torch.tensor(1.0, dtype=torch.float64, requires_grad=True)
    (g,) = backward(fn.arccosh_clamped(x), [x])
    assert float(g) == 0.0
