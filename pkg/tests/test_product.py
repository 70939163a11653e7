import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import T, close
from curvvae.errors import ComponentError, SignatureError
from curvvae.geometry import make_space
from curvvae.product import ProductSpace, map_componentwise, parse_signature, product_distance


def test_parse_examples():
    sig = parse_signature("e6")
    assert [(c.model, c.dim, c.mode, c.k) for c in sig.components] == [("e", 6, "fixed", 0.0)]
    sig = parse_signature("u2*3")
    assert len(sig) == 3 and all(c.mode == "universal" and c.dim == 2 for c in sig.components)
    sig = parse_signature("h2@-1,s2@1,e2")
    assert [(c.model, c.k) for c in sig.components] == [("h", -1.0), ("s", 1.0), ("e", 0.0)]
    assert sig.latent_dim == 6 and sig.ambient_dim == 8


def test_parse_modes_and_canonical_text():
    assert str(parse_signature("h2,h2,h2")) == "h2@learn*3"
    assert str(parse_signature("h2@-1*3,e2")) == "h2@-1*3,e2"
    assert str(parse_signature("u2@0*3")) == "u2@0*3"
    assert str(parse_signature("u2*3@0")) == "u2@0*3"
    assert parse_signature("s3@learn").components[0].k == 1.0
    assert parse_signature("u2@univ").components[0].mode == "universal"
    assert parse_signature("u2@-0.5").components[0].mode == "fixed"


@pytest.mark.parametrize(
    "text",
    ["", "x2", "h0", "h2@1", "s2@-1", "p2@0.5", "d2@-1", "h2@-2", "s2@0.1", "e2@1", "e2@learn", "u2@learn",
     "h2@univ", "h2*0", "h2*2*3", "h2@abc", "u2@0.1", "h2@nan"],
)
def test_parse_errors(text):
    with pytest.raises(SignatureError):
        parse_signature(text)


def test_product_distance_examples():
    h = make_space("h", 2, -1.0)
    x = T(1, 0, 0)
    y = T(math.cosh(0.7), math.sinh(0.7), 0)
    assert float(product_distance("h2@-1", x, y)) == pytest.approx(float(h.distance(x, y)), rel=1e-15)
    assert float(product_distance("e2,e2", T(0, 0, 0, 0), T(3, 0, 0, 4))) == 5.0
    a = torch.cat([T(1, 0, 0), T(1, 0, 0)])
    b = torch.cat([T(math.cosh(1), math.sinh(1), 0), T(0, 1, 0)])
    assert float(product_distance("h2@-1,s2@1", a, b)) == pytest.approx(math.sqrt(1 + math.pi**2 / 4), rel=1e-14)


def test_componentwise_examples(rng):
    close(map_componentwise("h2@-1,e2", "origin"), T(1, 0, 0, 0, 0), atol=0)
    ps = ProductSpace("h2@-1,s2@1,p2@-0.5,e3")
    o = ps.origin()
    close(map_componentwise(ps, "exp", o, torch.zeros_like(o)), o, atol=0)
    for _ in range(100):
        v = torch.from_numpy(rng.normal(size=ps.latent_dim) * 0.5)
        x = torch.cat([sp.expmap0(sp.embed_tangent0(p)) for sp, p in zip(ps.spaces, ps.split_latent(v))])
        w = ps.split_latent(torch.from_numpy(rng.normal(size=ps.latent_dim)))
        u = torch.cat([sp.transp0(p, sp.embed_tangent0(q)) for sp, p, q in zip(ps.spaces, ps.split(x), w)])
        out = map_componentwise(ps, "exp", x, u)
        for sp, xs, us, os_ in zip(ps.spaces, ps.split(x), ps.split(u), ps.split(out)):
            assert torch.equal(os_, sp.expmap(xs, us))
        back = map_componentwise(ps, "log", x, out)
        for sp, xs, os_, bs in zip(ps.spaces, ps.split(x), ps.split(out), ps.split(back)):
            assert torch.equal(bs, sp.logmap(xs, os_))


def test_component_errors_carry_index():
    ps = ProductSpace("e2,s2@1")
    x = torch.cat([T(0, 0), T(1, 0, 0)])
    y = torch.cat([T(0, 0), T(-1, 0, 0)])
    with pytest.raises(ComponentError) as info:
        ps.logmap(x, y)
    assert info.value.index == 1 and info.value.model == "s"


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=6, max_size=6))
def test_split_concat_bit_exact(vals):
    ps = ProductSpace("e2,h1@-1,e2")
    x = torch.tensor(vals, dtype=torch.float64)
    assert torch.equal(ps.concat(ps.split(x)), x)


def test_euclidean_product_is_euclidean(rng):
    for _ in range(20):
        a, b = (torch.from_numpy(rng.normal(size=4)) for _ in range(2))
        assert float(product_distance("e2,e2", a, b)) == pytest.approx(float((a - b).norm()), rel=1e-14)
        assert float(product_distance("e4", a, b)) == pytest.approx(float((a - b).norm()), rel=1e-14)


def test_hyperbolic_product_is_not_h4():
    # same tangent coordinates at the origin, different metric spaces
    ps = ProductSpace("h2@-1,h2@-1")
    h4 = make_space("h", 4, -1.0)

    def pt_prod(v):
        return torch.cat([sp.expmap0(sp.embed_tangent0(p)) for sp, p in zip(ps.spaces, ps.split_latent(v))])

    def pt_h4(v):
        return h4.expmap0(h4.embed_tangent0(v))

    a, b = T(1.0, 0.0, 0.0, 1.0), T(1.0, 0.0, 1.0, 0.0)
    # distances from the origin agree (both equal the tangent norm) ...
    assert float(ps.distance(ps.origin(), pt_prod(a))) == pytest.approx(math.sqrt(2), rel=1e-12)
    assert float(h4.distance(h4.origin(), pt_h4(a))) == pytest.approx(math.sqrt(2), rel=1e-12)
    # ... but not between two off-origin points
    assert abs(float(ps.distance(pt_prod(a), pt_prod(b))) - float(h4.distance(pt_h4(a), pt_h4(b)))) > 1e-3
