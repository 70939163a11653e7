"""Walk through the five constant-curvature models and their flat limit.

Run: python3 demos/geometry_tour.py
"""
import torch

from curvvae.geometry import make_space, mobius_add
from curvvae.product import ProductSpace


def tensor(*vals):
    return torch.tensor(vals, dtype=torch.float64)


def main():
    v, w = tensor(0.6, -0.2), tensor(-0.3, 0.8)
    print("distance between exp0(v) and exp0(w) as curvature varies")
    for model, ks in (("h", (-1.0, -0.25)), ("p", (-1.0, -0.25)), ("e", (0.0,)), ("d", (0.25, 1.0)), ("s", (0.25, 1.0))):
        for k in ks:
            sp = make_space(model, 2, k)
            # chart tangents at the origin carry the conformal factor, so rescale to unit speed
            s0 = sp.tangent_scale0
            x, y = sp.expmap0(sp.embed_tangent0(v / s0)), sp.expmap0(sp.embed_tangent0(w / s0))
            print(f"  {model} K={k:+.2f}  d={float(sp.distance(x, y)):.6f}")
    # H and P (S and D) are isometric, so their rows agree pairwise

    x, y = tensor(0.3, 0.1), tensor(-0.2, 0.4)
    print("\nMobius addition approaches vector addition as K -> 0")
    for k in (-1.0, -1e-3, -1e-6, 1e-6, 1e-3, 1.0):
        gap = float((mobius_add(k, x, y) - (x + y)).abs().max())
        print(f"  K={k:+.0e}  |x (+)K y - (x + y)| = {gap:.2e}")

    ps = ProductSpace("h2@-1,s2@1,e2")
    parts = ps.split_latent(tensor(0.5, 0.0, 0.0, 1.0, 0.2, 0.2))
    a = torch.cat([sp.expmap0(sp.embed_tangent0(p)) for sp, p in zip(ps.spaces, parts)])
    print(f"\nproduct {ps.signature}: ambient dim {ps.ambient_dim}, d(origin, a) = {float(ps.distance(ps.origin(), a)):.6f}")


if __name__ == "__main__":
    main()
