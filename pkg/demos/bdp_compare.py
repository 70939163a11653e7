"""Train a few latent geometries on the synthetic tree data and compare IWAE estimates.

Run: python3 demos/bdp_compare.py [epochs]
Defaults to 60 epochs, which takes well under a minute on one core.
"""
import sys

from curvvae.datasets import BdpConfig, generate_bdp
from curvvae.model import VaeConfig
from curvvae.training import TrainConfig, evaluate, fit


def main(epochs=60):
    data = generate_bdp(BdpConfig())
    print(f"BDP: {data.train.shape[0]} train / {data.eval.shape[0]} eval rows of dim {data.dim}")
    for sig in ("e6", "h2@-1*3", "s2@1*3", "h2*3"):
        res = fit(
            VaeConfig(sig, data.dim, hidden=200, observation="gaussian"),
            TrainConfig(epochs=epochs, warmup=epochs),
            data.train,
            seed=0,
        )
        ll, se = evaluate(res.model, data.eval, samples=200)
        ks = ", ".join(f"{k:+.3f}" for k in res.model.curvature_snapshot())
        print(f"{sig:>10}  best ELBO {res.history[res.best_epoch]['elbo']:8.3f}  LL {ll:8.3f} +- {se:.3f}  K=({ks})")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 60)
