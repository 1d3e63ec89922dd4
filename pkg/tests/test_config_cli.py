import xml.etree.ElementTree as ET

import numpy as np
import pytest

from cirsimplex import (ConfigError, Corpus, RngStream, save_corpus,
                        synthetic_corpus)
from cirsimplex.cli import main
from cirsimplex.config import (dump_config, load_config_file,
                               parse_config_text, resolve_config)


def test_parse_config_text():
    cfg = parse_config_text("a = 1\n# comment\n\nb = two words # trailing\n")
    assert cfg == {"a": "1", "b": "two words"}


@pytest.mark.parametrize("text", ["a 1\n", "= 1\n", "a = 1\na = 2\n"])
def test_parse_config_rejects(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_resolve_precedence_and_coercion():
    defaults = dict(n=5, x=1.5, flag=False, name="base")
    out = resolve_config(defaults, {"n": "7", "flag": "yes"}, {"x": 2.5})
    assert out == dict(n=7, x=2.5, flag=True, name="base")
    # override beats file
    out = resolve_config(defaults, {"n": "7"}, {"n": 9})
    assert out["n"] == 9
    # None override means unset
    out = resolve_config(defaults, None, {"n": None})
    assert out["n"] == 5


def test_resolve_rejects_unknown_keys_and_bad_types():
    with pytest.raises(ConfigError):
        resolve_config({"a": 1}, {"b": "2"}, None)
    with pytest.raises(ConfigError):
        resolve_config({"a": 1}, None, {"b": 2})
    with pytest.raises(ConfigError):
        resolve_config({"a": 1}, {"a": "not-an-int"}, None)
    with pytest.raises(ConfigError):
        resolve_config({"flag": True}, {"flag": "maybe"}, None)


def test_dump_and_load_round_trip(tmp_path):
    cfg = dict(nu=3, h=0.25, kernel="cv-alt")
    p = tmp_path / "run.cfg"
    dump_config(cfg, p)
    back = resolve_config(cfg, load_config_file(p), None)
    assert back == cfg
    with pytest.raises(ConfigError):
        load_config_file(tmp_path / "missing.cfg")


# ---------------------------------------------------------------------------
# command-line end-to-end
# ---------------------------------------------------------------------------

def run_cli(*argv):
    return main(list(argv))


def test_synthetic_run_and_rerun_identical(tmp_path):
    out = str(tmp_path)
    args = ("synthetic", "--iters", "60", "--burn-in", "30", "--seed", "11",
            "--out", out, "--name", "s1", "--n-categories", "5",
            "--totals", "80,10,10")
    assert run_cli(*args) == 0
    first = {p.name: p.read_bytes()
             for p in (tmp_path / "s1").iterdir()}
    assert set(first) == {"config.resolved", "trace.csv", "trace.npz",
                          "report.csv", "omega_box.svg"}
    assert run_cli(*args) == 0
    second = {p.name: p.read_bytes() for p in (tmp_path / "s1").iterdir()}
    assert first == second

    header = (tmp_path / "s1" / "trace.csv").read_text().splitlines()[0]
    assert header == "iter,h,category,theta,omega,a_hat,b_hat,fallback"
    report = (tmp_path / "s1" / "report.csv").read_text().splitlines()
    assert report[0].startswith("category,posterior_mean,")


def test_synthetic_respects_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "base.cfg"
    cfg.write_text("iters = 50\nburn_in = 25\nkernel = scir\n")
    assert run_cli("synthetic", "--config", str(cfg), "--seed", "3",
                   "--out", str(tmp_path), "--name", "s2",
                   "--n-categories", "4", "--totals", "40,5",
                   "--iters", "40") == 0
    resolved = (tmp_path / "s2" / "config.resolved").read_text()
    assert "iters = 40" in resolved       # CLI beats file
    assert "burn_in = 25" in resolved     # file beats default
    assert "kernel = scir" in resolved


def test_cli_exit_codes(tmp_path):
    out = str(tmp_path)
    # unknown config key -> 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("no_such_key = 1\n")
    assert run_cli("synthetic", "--config", str(bad), "--out", out) == 2
    # unknown kernel -> 2
    assert run_cli("synthetic", "--kernel", "bogus", "--out", out) == 2
    # more totals than categories -> 2
    assert run_cli("synthetic", "--n-categories", "2",
                   "--totals", "5,5,5", "--out", out) == 2
    # missing corpus file -> 3
    assert run_cli("lda-train", "--corpus", str(tmp_path / "nope.txt"),
                   "--out", out) == 3
    # moments mgf query outside the domain of finiteness -> 4
    assert run_cli("moments", "--m-list", "3", "--mgf-s", "9999",
                   "--out", out, "--name", "m4") == 4


def test_variance_compare_output(tmp_path):
    out = str(tmp_path)
    assert run_cli("variance-compare", "--m-min", "1", "--m-max", "5",
                   "--mc-draws", "1000", "--out", out, "--name", "vc") == 0
    lines = (tmp_path / "vc" / "report.csv").read_text().splitlines()
    assert lines[0] == "M,exact,cv-alt,cv-main,scir,stationary"
    assert len(lines) == 6
    root = ET.parse(tmp_path / "vc" / "variance_curves.svg").getroot()
    assert root.tag.endswith("svg")


def test_moments_output(tmp_path):
    out = str(tmp_path)
    assert run_cli("moments", "--m-list", "1,20", "--kernel", "cv-alt",
                   "--out", out, "--name", "mm") == 0
    lines = (tmp_path / "mm" / "report.csv").read_text().splitlines()
    assert lines[0] == "quantity,M,value"
    quantities = {ln.split(",")[0] for ln in lines[1:]}
    assert {"mean", "variance", "c3", "asymptotic_bias",
            "exact_variance", "scir_variance"} <= quantities
    # kernels without closed forms are rejected
    assert run_cli("moments", "--kernel", "sgrld", "--out", out) == 2


def test_lda_cli_round_trip(tmp_path):
    corp, _ = synthetic_corpus(RngStream(50), 40, 20, 2, 15)
    save_corpus(corp, tmp_path / "c.txt", tmp_path / "v.txt")
    out = str(tmp_path)
    assert run_cli("lda-train", "--corpus", str(tmp_path / "c.txt"),
                   "--vocab", str(tmp_path / "v.txt"), "--n-topics", "2",
                   "--iters", "6", "--minibatch-docs", "6",
                   "--refresh-docs", "30", "--gibbs-sweeps", "12",
                   "--eval-gibbs-sweeps", "6", "--holdout-docs", "6",
                   "--eval-every", "3", "--seed", "8",
                   "--out", out, "--name", "tr") == 0
    run = tmp_path / "tr"
    perp = run.joinpath("perplexity.csv").read_text().splitlines()
    assert perp[0] == "iter,docs_seen,perplexity,seed"
    assert len(perp) == 3  # evaluations at iterations 3 and 6
    with np.load(run / "state.npz") as z:
        assert int(z["state_version"]) == 1
        assert z["theta"].shape == (2, 20)

    assert run_cli("lda-eval", "--state", str(run / "state.npz"),
                   "--corpus", str(tmp_path / "c.txt"),
                   "--vocab", str(tmp_path / "v.txt"),
                   "--holdout-docs", "6", "--seed", "77",
                   "--out", out, "--name", "ev") == 0
    report = dict(ln.split(",") for ln in
                  (tmp_path / "ev" / "report.csv").read_text().splitlines()[1:])
    assert float(report["perplexity"]) > 0
    assert report["dropped_tokens"] == "0"


def test_lda_eval_maps_vocabularies(tmp_path):
    corp, _ = synthetic_corpus(RngStream(51), 30, 12, 2, 10)
    save_corpus(corp, tmp_path / "c.txt", tmp_path / "v.txt")
    out = str(tmp_path)
    assert run_cli("lda-train", "--corpus", str(tmp_path / "c.txt"),
                   "--vocab", str(tmp_path / "v.txt"), "--n-topics", "2",
                   "--iters", "4", "--minibatch-docs", "5",
                   "--refresh-docs", "20", "--gibbs-sweeps", "10",
                   "--eval-gibbs-sweeps", "6", "--holdout-docs", "5",
                   "--eval-every", "4", "--out", out, "--name", "tr2") == 0

    # eval corpus over a larger vocabulary whose extra token the model has
    # never seen: tokens get mapped by string, the unknown one dropped
    ec, _ = synthetic_corpus(RngStream(52), 25, 13, 2, 10)
    eval_vocab = [f"w{i:04d}" for i in range(12)] + ["unseen-token"]
    save_corpus(Corpus(ec.n_docs, ec.n_words, ec.doc_words, ec.doc_counts,
                       eval_vocab), tmp_path / "e.txt", tmp_path / "ev.txt")
    assert run_cli("lda-eval", "--state", str(tmp_path / "tr2" / "state.npz"),
                   "--corpus", str(tmp_path / "e.txt"),
                   "--vocab", str(tmp_path / "ev.txt"),
                   "--holdout-docs", "5", "--out", out, "--name", "ev2") == 0
    report = dict(ln.split(",") for ln in
                  (tmp_path / "ev2" / "report.csv").read_text().splitlines()[1:])
    assert int(report["dropped_tokens"]) > 0

    # size mismatch with no vocabularies to map by is a data error
    ec13, _ = synthetic_corpus(RngStream(53), 25, 13, 2, 10, vocab=False)
    save_corpus(ec13, tmp_path / "e13.txt")
    assert run_cli("lda-eval", "--state", str(tmp_path / "tr2" / "state.npz"),
                   "--corpus", str(tmp_path / "e13.txt"),
                   "--holdout-docs", "5", "--out", out, "--name", "ev3") == 3
