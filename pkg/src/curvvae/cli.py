"""``curvvae`` command line: self-tests, data generation, training and evaluation.

Exit codes: 0 success, 1 usage or input error, 2 numeric or test failure.
"""
import argparse
import configparser
import dataclasses
import io
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import datasets
from .errors import ConfigError, CurvVaeError, FormatError, SignatureError, TrainingError
from .gradcheck import model_gradcheck
from .model import VaeConfig, load_checkpoint, save_checkpoint
from .product import parse_signature
from .properties import run_suite, to_jsonl
from .training import TrainConfig, evaluate, fit


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    dataset: str = "bdp"
    data: str = ""
    signature: str = "e6"
    covariance: str = "spherical"
    hidden: int = 400
    prior_scale: float = 1.0
    epochs: int = 300
    batch_size: int = 128
    seed: int = 0
    lr: float = 1e-3
    curvature_lr: float = 1e-4
    kl_samples: int = 1
    iwae_samples: int = 500
    eval_every: int = 0
    burn_in: int = 10
    lookahead: int = 50
    warmup: int = 100
    output: str = "run"

    def validate(self):
        if self.dataset not in ("bdp", "mnist"):
            raise ConfigError(f"dataset must be bdp or mnist, got {self.dataset!r}")
        if self.dataset == "mnist" and not self.data:
            raise ConfigError("dataset mnist needs data = <directory with IDX files>")
        parse_signature(self.signature)
        if self.covariance not in ("spherical", "diagonal"):
            raise ConfigError(f"covariance must be spherical or diagonal, got {self.covariance!r}")
        if self.epochs < 1 or self.batch_size < 1 or self.kl_samples < 1 or self.iwae_samples < 1:
            raise ConfigError("epochs, batch_size, kl_samples and iwae_samples must be >= 1")


SECTIONS = {"run": RunConfig, "bdp": datasets.BdpConfig}
BDP_KEYS = [f.name for f in fields(datasets.BdpConfig)]


def _convert(cls, key, text):
    typ = {f.name: f.type for f in fields(cls)}[key]
    typ = {"int": int, "float": float, "str": str}.get(typ, typ) if isinstance(typ, str) else typ
    try:
        return typ(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {text!r} as {typ.__name__}") from None


def read_config(path):
    """Values from an INI file as ``{section: {key: value}}``; unknown keys are errors."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}") from None
    out = {}
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ConfigError(f"{path}: unknown section [{sec}]")
        cls = SECTIONS[sec]
        names = {f.name for f in fields(cls)}
        out[sec] = {}
        for key, text in cp.items(sec):
            if key not in names:
                raise ConfigError(f"{path}: unknown key {key!r} in [{sec}]")
            out[sec][key] = _convert(cls, key, text)
    return out


def write_config(run, bdp):
    cp = configparser.ConfigParser(interpolation=None)
    for sec, obj in (("run", run), ("bdp", bdp)):
        cp[sec] = {k: repr(v) if isinstance(v, float) else str(v) for k, v in dataclasses.asdict(obj).items()}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def effective_config(args):
    """Defaults, then the config file, then explicit flags."""
    file_vals = read_config(args.config) if args.config else {}
    run_vals = dict(file_vals.get("run", {}))
    bdp_vals = dict(file_vals.get("bdp", {}))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            run_vals[f.name] = v
    for name in BDP_KEYS:
        v = getattr(args, f"bdp_{name}", None)
        if v is not None:
            bdp_vals[name] = v
    run = RunConfig(**run_vals)
    run.validate()
    try:
        bdp = datasets.BdpConfig(**bdp_vals)
    except CurvVaeError as e:
        raise ConfigError(str(e)) from None
    return run, bdp


def load_dataset(run, bdp):
    if run.dataset == "mnist":
        return datasets.load_mnist_dir(run.data)
    if run.data:
        m = datasets.read_bdp(run.data)
        return datasets.split_matrix(m, bdp.eval_fraction, bdp.seed)
    return datasets.generate_bdp(bdp)


def _eval_matrix(handle):
    return handle.eval_binary() if handle.observation == "bernoulli" else handle.eval


# -- commands -----------------------------------------------------------------------------


def cmd_geomcheck(args, out):
    models = [m.strip() for m in args.models.split(",")] if args.models else None
    ks = None
    if args.k:
        vals = [float(x) for x in args.k.split(",")]
        # magnitudes apply with each model's own sign
        ks = sorted({v for x in vals for v in (abs(x), -abs(x))} | ({0.0} if 0.0 in vals else set()))
    rows = run_suite(args.pattern, models, ks)
    if not rows:
        raise UsageError("no property matches the given filters")
    if args.jsonl:
        print(to_jsonl(rows), file=out)
    else:
        print(f"{'property':<26} {'max_error':>12} {'threshold':>10} {'cases':>6}  result", file=out)
        for r in rows:
            print(
                f"{r['property']:<26} {r['max_error']:>12.3e} {r['threshold']:>10.1e} {r['cases']:>6}  "
                f"{'PASS' if r['pass'] else 'FAIL'}",
                file=out,
            )
    failed = [r["property"] for r in rows if not r["pass"]]
    if failed:
        print("failed: " + ", ".join(failed), file=sys.stderr)
        return 2
    return 0


def cmd_train(args, out):
    run, bdp = effective_config(args)
    handle = load_dataset(run, bdp)
    outdir = Path(run.output)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.echo").write_text(write_config(run, bdp))
    vae = VaeConfig(
        run.signature,
        handle.dim,
        hidden=run.hidden,
        covariance=run.covariance,
        observation=handle.observation,
        prior_scale=run.prior_scale,
    )
    tcfg = TrainConfig(
        epochs=run.epochs,
        batch_size=run.batch_size,
        lr=run.lr,
        curvature_lr=run.curvature_lr,
        burn_in=run.burn_in,
        lookahead=run.lookahead,
        warmup=run.warmup,
        kl_samples=run.kl_samples,
        eval_every=run.eval_every,
        eval_samples=run.iwae_samples,
        binarize="dynamic" if handle.observation == "bernoulli" else "none",
    )
    ev = _eval_matrix(handle)
    result = fit(vae, tcfg, handle.train, seed=run.seed, eval_data=ev if len(ev) else None)
    (outdir / "metrics.csv").write_text(result.metrics_csv())
    save_checkpoint(outdir / "model.ckpt", result.model, {"run": dataclasses.asdict(run), "bdp": dataclasses.asdict(bdp)})
    best = result.history[result.best_epoch]
    print(f"best epoch {result.best_epoch} of {result.last_epoch + 1}, train ELBO {best['elbo']:.4f}", file=out)
    if len(ev):
        mean, se = evaluate(result.model, ev, run.iwae_samples, seed=run.seed)
        line = f"LL {mean:.4f} +- {se:.4f} (iwae-{run.iwae_samples}, {len(ev)} examples)"
        (outdir / "eval.txt").write_text(line + "\n")
        print(line, file=out)
    return 0


def cmd_eval(args, out):
    try:
        model, extra = load_checkpoint(args.checkpoint)
    except FileNotFoundError:
        raise UsageError(f"checkpoint not found: {args.checkpoint}") from None
    run = RunConfig(**extra.get("run", {}))
    if args.data:
        run.data = args.data
    bdp = datasets.BdpConfig(**extra.get("bdp", {}))
    ev = _eval_matrix(load_dataset(run, bdp))
    if not len(ev):
        raise UsageError("the evaluation split is empty")
    mean, se = evaluate(model, ev, args.iwae_samples, seed=args.seed)
    print(f"LL {mean:.4f} +- {se:.4f} (iwae-{args.iwae_samples}, {len(ev)} examples)", file=out)
    return 0


def cmd_bdp_gen(args, out):
    vals = {k: getattr(args, k) for k in BDP_KEYS if getattr(args, k) is not None}
    cfg = datasets.BdpConfig(**vals)
    obs = datasets.bdp_observations(cfg)
    datasets.write_bdp(args.out, obs)
    print(f"wrote {obs.shape[0]}x{obs.shape[1]} observations ({cfg.n_nodes} nodes) to {args.out}", file=out)
    return 0


def cmd_gradcheck(args, out):
    sig = parse_signature(args.signature)
    curv = [args.universal_k if c.mode == "universal" else None for c in sig.components]
    res = model_gradcheck(str(sig), seed=args.seed, n_coords=args.coords, tolerance=args.tolerance, curvatures=curv)
    print(res.summary(), file=out)
    return 0 if res.passed else 2


# -- parser -----------------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser():
    p = _Parser(prog="curvvae", description="Mixed-curvature VAE toolkit.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("geomcheck", help="run the geometry and density property suite")
    g.add_argument("--models", help="comma-separated subset of e,h,s,p,d")
    g.add_argument("--k", help="comma-separated curvature magnitudes (applied with each model's sign)")
    g.add_argument("--pattern", default="*", help="comma-separated glob(s) over property ids")
    g.add_argument("--jsonl", action="store_true", help="print JSON lines instead of a table")

    t = sub.add_parser("train", help="train a model and write metrics, checkpoint and evaluation")
    t.add_argument("--config", help="INI file with [run] and [bdp] sections")
    for f in fields(RunConfig):
        t.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, type=_flag_type(f), default=None)
    for f in fields(datasets.BdpConfig):
        t.add_argument(f"--bdp-{f.name.replace('_', '-')}", dest=f"bdp_{f.name}", type=_flag_type(f), default=None)

    e = sub.add_parser("eval", help="IWAE log-likelihood estimate for a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--iwae-samples", type=int, default=500)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--data", help="override the data path stored in the checkpoint")

    b = sub.add_parser("bdp-gen", help="write a branching-diffusion dataset file")
    b.add_argument("--out", required=True)
    for f in fields(datasets.BdpConfig):
        if f.name != "eval_fraction":
            b.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, type=_flag_type(f), default=None)
    b.set_defaults(eval_fraction=None)

    c = sub.add_parser("gradcheck", help="finite-difference check of ELBO gradients on a tiny model")
    c.add_argument("--signature", required=True)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--coords", type=int, default=200)
    c.add_argument("--tolerance", type=float, default=1e-4)
    c.add_argument("--universal-k", type=float, default=0.5, help="curvature used for universal components")
    return p


def _flag_type(f):
    return {"int": int, "float": float, "str": str}.get(f.type, f.type) if isinstance(f.type, str) else f.type


COMMANDS = {
    "geomcheck": cmd_geomcheck,
    "train": cmd_train,
    "eval": cmd_eval,
    "bdp-gen": cmd_bdp_gen,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None, out=None):
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, out)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    except (ConfigError, SignatureError, FormatError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (TrainingError, CurvVaeError, FloatingPointError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
