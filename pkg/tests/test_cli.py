import csv
import io
import json

from curvvae import cli
from curvvae.datasets import BdpConfig, bdp_observations, read_bdp
from curvvae.geometry.spaces import Stereographic


def run(*argv):
    out = io.StringIO()
    code = cli.main(list(argv), out=out)
    return code, out.getvalue()


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_geomcheck_passes():
    code, text = run("geomcheck")
    assert code == 0
    assert "FAIL" not in text and "pt-isometry" in text


def test_geomcheck_reports_injected_transport_bug(monkeypatch, capsys):
    orig = Stereographic.transp
    monkeypatch.setattr(Stereographic, "transp", lambda self, x, y, v: -orig(self, x, y, v))
    code, text = run("geomcheck", "--models", "p,d", "--pattern", "pt-*")
    assert code == 2
    assert "pt-identity" in capsys.readouterr().err


def test_geomcheck_limit_subset():
    code, text = run("geomcheck", "--models", "p,d", "--k", "1e-9", "--jsonl")
    assert code == 0
    ids = [json.loads(line)["property"] for line in text.splitlines()]
    assert ids and all(i.startswith("limit-") for i in ids)


def test_geomcheck_rejects_empty_selection():
    assert run("geomcheck", "--pattern", "no-such-property")[0] == 1


def test_usage_errors():
    assert run("train", "--no-such-flag")[0] == 1
    assert run()[0] == 1
    assert run("eval", "--checkpoint", "/nonexistent/m.ckpt")[0] == 1
    assert run("train", "--signature", "q2")[0] == 1


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[run]\nsignature = e2\nlearning_rate = 0.1\n")
    assert run("train", "--config", str(cfg))[0] == 1
    cfg.write_text("[extra]\nx = 1\n")
    assert run("train", "--config", str(cfg))[0] == 1
    cfg.write_text("[run]\nepochs = many\n")
    assert run("train", "--config", str(cfg))[0] == 1


def test_flags_override_file(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[run]\nsignature = h2\nepochs = 7\n[bdp]\ndepth = 3\n")
    args = cli.build_parser().parse_args(["train", "--config", str(cfg), "--epochs", "2", "--bdp-noise", "0.3"])
    run_cfg, bdp = cli.effective_config(args)
    assert (run_cfg.signature, run_cfg.epochs, run_cfg.hidden) == ("h2", 2, 400)
    assert (bdp.depth, bdp.noise) == (3, 0.3)


def _small_train(out, *extra):
    return run(
        "train", "--signature", "h2,e2", "--epochs", "4", "--hidden", "16", "--iwae-samples", "20",
        "--bdp-depth", "4", "--output", str(out), *extra,
    )


def test_train_is_reproducible_from_echo(tmp_path):
    code, text = _small_train(tmp_path / "a")
    assert code == 0 and "best epoch" in text and "LL " in text
    for name in ("config.echo", "metrics.csv", "model.ckpt", "eval.txt"):
        assert (tmp_path / "a" / name).exists()
    code, _ = run("train", "--config", str(tmp_path / "a" / "config.echo"), "--output", str(tmp_path / "b"))
    assert code == 0
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()
    assert (tmp_path / "a" / "eval.txt").read_text() == (tmp_path / "b" / "eval.txt").read_text()
    _small_train(tmp_path / "c", "--seed", "5")
    assert (tmp_path / "a" / "metrics.csv").read_bytes() != (tmp_path / "c" / "metrics.csv").read_bytes()


def test_eval_prints_one_line(tmp_path):
    _small_train(tmp_path / "a")
    code, text = run("eval", "--checkpoint", str(tmp_path / "a" / "model.ckpt"), "--iwae-samples", "30")
    assert code == 0
    lines = text.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith("LL ") and "+-" in lines[0] and "iwae-30" in lines[0]
    assert run("eval", "--checkpoint", str(tmp_path / "a" / "model.ckpt"), "--iwae-samples", "30")[1] == text


def test_universal_train_populates_curvatures(tmp_path):
    code, _ = run("train", "--dataset", "bdp", "--signature", "u2*3", "--epochs", "200", "--seed", "1",
                  "--output", str(tmp_path))
    assert code == 0
    rs = rows(tmp_path / "metrics.csv")
    assert list(rs[0])[-3:] == ["K_0", "K_1", "K_2"]
    assert all(r["K_0"] == "0.0" for r in rs[:100])
    after = rs[100:]
    assert after and all(r[f"K_{i}"] != "" for r in after for i in range(3))
    assert (rs[100]["K_0"], rs[100]["K_2"]) == ("-0.01", "0.01")


def test_bdp_gen_roundtrip(tmp_path):
    out = tmp_path / "t.bdp"
    code, text = run("bdp-gen", "--out", str(out), "--depth", "3", "--dim", "8", "--seed", "2")
    assert code == 0 and "15 nodes" in text
    ref = bdp_observations(BdpConfig(depth=3, dim=8, seed=2))
    assert (read_bdp(out) == ref).all()
    code, text = run("train", "--data", str(out), "--signature", "e2", "--epochs", "2", "--hidden", "8",
                     "--iwae-samples", "5", "--output", str(tmp_path / "r"))
    assert code == 0


def test_gradcheck_command():
    code, text = run("gradcheck", "--signature", "h2@-1,e2")
    assert code == 0
    assert "PASS" in text

