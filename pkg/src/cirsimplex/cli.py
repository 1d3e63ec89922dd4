"""Command-line interface.

Subcommands: synthetic, variance-compare, lda-train, lda-eval, moments.
Every run writes its resolved configuration plus CSV/SVG outputs into
<out>/<name>/; identical seeds give byte-identical outputs.

Exit codes: 0 success, 2 configuration/usage, 3 data, 4 numerical domain.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import corpus as corpus_mod
from . import lda as lda_mod
from .config import dump_config, load_config_file, resolve_config
from .errors import (CirsimplexError, ConfigError, DataError, DomainError,
                     ParameterError)
from .estimators import FALLBACK_NAMES, one_hot_data
from .kernels import KERNELS, StepsizeSchedule, run_chain
from .moments import (MinibatchLaw, NoiseSequence, asymptotic_bias,
                      cv_chain_moments, exact_chain_moments, law_from_fraction,
                      log_chain_mgf, scir_chain_moments)
from .rng import RngStream
from .svg import box_plot, line_plot


def _parse_int_list(text: str, what: str):
    try:
        return [int(p) for p in text.split(",") if p.strip() != ""]
    except ValueError:
        raise ConfigError(f"cannot parse {what} list {text!r}") from None


def _parse_float_list(text: str, what: str):
    try:
        return [float(p) for p in text.split(",") if p.strip() != ""]
    except ValueError:
        raise ConfigError(f"cannot parse {what} list {text!r}") from None


def _run_dir(args, cfg) -> str:
    path = os.path.join(args.out, cfg["name"])
    os.makedirs(path, exist_ok=True)
    return path


def _resolve(args, schema):
    file_cfg = load_config_file(args.config) if args.config else None
    overrides = {k: getattr(args, k, None) for k in schema}
    if getattr(args, "seed", None) is not None and "seed" in schema:
        overrides["seed"] = args.seed
    if getattr(args, "kernel", None) is not None and "kernel" in schema:
        overrides["kernel"] = args.kernel
    if getattr(args, "threads", None) is not None and "threads" in schema:
        overrides["threads"] = args.threads
    return resolve_config(schema, file_cfg, overrides)


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(x) for x in row) + "\n")


# --------------------------------------------------------------------------
# synthetic: sparse categorical posterior experiment
# --------------------------------------------------------------------------

SYNTHETIC_SCHEMA = dict(
    name="synthetic", seed=0, kernel="cv-main", n_categories=10,
    totals="800,100,100", alpha=0.1, n_sub=10, h=0.5, tau=0.0, kappa=0.0,
    iters=2000, burn_in=1000, thin=1, policy="alt", theta0=1.0,
)


def cmd_synthetic(args) -> int:
    cfg = _resolve(args, SYNTHETIC_SCHEMA)
    if cfg["kernel"] not in KERNELS:
        raise ConfigError(f"unknown kernel {cfg['kernel']!r}")
    totals = _parse_int_list(cfg["totals"], "totals")
    if len(totals) > cfg["n_categories"]:
        raise ConfigError("more totals than categories")
    totals = totals + [0] * (cfg["n_categories"] - len(totals))
    if any(t < 0 for t in totals):
        raise ConfigError("totals must be >= 0")

    run = _run_dir(args, cfg)
    dump_config(cfg, os.path.join(run, "config.resolved"))
    data = one_hot_data(totals, np.full(cfg["n_categories"], cfg["alpha"]))
    stream = RngStream(cfg["seed"])
    schedule = StepsizeSchedule(cfg["h"], cfg["tau"], cfg["kappa"])
    trace = run_chain(stream, data, cfg["kernel"], schedule, cfg["n_sub"],
                      cfg["iters"], burn_in=cfg["burn_in"], thin=cfg["thin"],
                      theta0=np.full(cfg["n_categories"], cfg["theta0"]),
                      policy=cfg["policy"])
    trace.to_csv(os.path.join(run, "trace.csv"))
    trace.to_npz(os.path.join(run, "trace.npz"))

    a = data.full_shape()
    post_mean = a / a.sum()
    rows = []
    for k in range(data.n_categories):
        om = trace.omega[:, k]
        q25, q50, q75 = np.percentile(om, [25, 50, 75])
        fb = float(np.mean(trace.fallback[:, k] != 0))
        rows.append((k, f"{post_mean[k]:.10g}", f"{om.mean():.10g}",
                     f"{q50:.10g}", f"{q25:.10g}", f"{q75:.10g}", f"{fb:.6g}"))
    _write_csv(os.path.join(run, "report.csv"),
               "category,posterior_mean,omega_mean,omega_median,omega_q25,omega_q75,fallback_rate",
               rows)
    n_show = min(4, data.n_categories)
    box_plot(os.path.join(run, "omega_box.svg"),
             [f"cat {k}" for k in range(n_show)],
             {cfg["kernel"]: [trace.omega[:, k] for k in range(n_show)]},
             title="posterior weight samples",
             ylabel="omega",
             marks={f"cat {k}": post_mean[k] for k in range(n_show)})
    print(f"synthetic: kernel={cfg['kernel']} kept={trace.n_kept} -> {run}")
    return 0


# --------------------------------------------------------------------------
# variance-compare: closed-form variance curves over M
# --------------------------------------------------------------------------

VARCMP_SCHEMA = dict(
    name="variance-compare", seed=0, n_population=1000, fraction=0.15,
    n_sub=100, alpha=0.1, theta0=7.67, h=0.1, m_min=1, m_max=100,
    mc_draws=100000,
)


def cmd_variance_compare(args) -> int:
    cfg = _resolve(args, VARCMP_SCHEMA)
    if cfg["m_min"] < 1 or cfg["m_max"] < cfg["m_min"]:
        raise ConfigError("need 1 <= m_min <= m_max")
    law = law_from_fraction(cfg["n_population"], cfg["fraction"], cfg["n_sub"],
                            cfg["alpha"])
    a = law.full_shape()
    run = _run_dir(args, cfg)
    dump_config(cfg, os.path.join(run, "config.resolved"))

    ms = np.arange(cfg["m_min"], cfg["m_max"] + 1)
    stream = RngStream(cfg["seed"])
    curves = {"exact": [], "cv-alt": [], "cv-main": [], "scir": []}
    for M in ms:
        curves["exact"].append(exact_chain_moments(cfg["theta0"], a, cfg["h"], int(M))[1])
        curves["cv-alt"].append(cv_chain_moments(
            law, cfg["theta0"], cfg["h"], int(M), "alt",
            mc_draws=cfg["mc_draws"], stream=stream).variance)
        curves["cv-main"].append(cv_chain_moments(
            law, cfg["theta0"], cfg["h"], int(M), "main",
            mc_draws=cfg["mc_draws"], stream=stream).variance)
        curves["scir"].append(scir_chain_moments(law, cfg["theta0"], cfg["h"], int(M))[1])
    stationary = float(a)

    rows = [(int(M),) + tuple(f"{curves[c][i]:.10g}" for c in
                              ("exact", "cv-alt", "cv-main", "scir"))
            + (f"{stationary:.10g}",) for i, M in enumerate(ms)]
    _write_csv(os.path.join(run, "report.csv"),
               "M,exact,cv-alt,cv-main,scir,stationary", rows)
    line_plot(os.path.join(run, "variance_curves.svg"), ms,
              {c: np.array(curves[c]) for c in ("exact", "cv-alt", "cv-main", "scir")}
              | {"stationary": np.full(len(ms), stationary)},
              title="variance of theta_M by kernel", xlabel="M",
              ylabel="variance")
    last = {c: curves[c][-1] for c in curves}
    print(f"variance-compare: M={cfg['m_max']} " +
          " ".join(f"{c}={v:.4f}" for c, v in last.items()) + f" -> {run}")
    return 0


# --------------------------------------------------------------------------
# moments: closed-form moment/MGF table for one kernel form
# --------------------------------------------------------------------------

MOMENTS_SCHEMA = dict(
    name="moments", seed=0, kernel="cv-main", n_population=1000, fraction=0.15,
    n_sub=100, alpha=0.1, theta0=7.67, h=0.1, m_list="1,5,20,100",
    mc_draws=100000, mgf_s="",
)


def cmd_moments(args) -> int:
    cfg = _resolve(args, MOMENTS_SCHEMA)
    if cfg["kernel"] not in ("cv-main", "cv-alt"):
        raise ConfigError("moments needs kernel cv-main or cv-alt")
    par = cfg["kernel"].removeprefix("cv-")
    law = law_from_fraction(cfg["n_population"], cfg["fraction"], cfg["n_sub"],
                            cfg["alpha"])
    a = law.full_shape()
    ms = _parse_int_list(cfg["m_list"], "M")
    if not ms or any(m < 1 for m in ms):
        raise ConfigError("m_list must hold positive integers")
    run = _run_dir(args, cfg)
    dump_config(cfg, os.path.join(run, "config.resolved"))

    stream = RngStream(cfg["seed"])
    rows = []
    for M in ms:
        rep = cv_chain_moments(law, cfg["theta0"], cfg["h"], M, par,
                               mc_draws=cfg["mc_draws"], stream=stream)
        em, ev = exact_chain_moments(cfg["theta0"], a, cfg["h"], M)
        sm, sv = scir_chain_moments(law, cfg["theta0"], cfg["h"], M)
        for q, v in (("mean", rep.mean), ("variance", rep.variance),
                     ("c1", rep.c1), ("c2", rep.c2), ("c3", rep.c3),
                     ("approx_mean", rep.approx_mean),
                     ("approx_variance", rep.approx_variance),
                     ("mean_se", rep.mean_se), ("variance_se", rep.variance_se),
                     ("n_excluded", rep.n_excluded),
                     ("exact_mean", em), ("exact_variance", ev),
                     ("scir_mean", sm), ("scir_variance", sv)):
            rows.append((q, M, f"{v:.12g}"))
        if cfg["mgf_s"]:
            noise_stream = stream.child(M)
            a_hats = law.sample_a_hat(noise_stream, M)
            b_hats = (a_hats - 1.0) / (a - 1.0)
            noise = NoiseSequence(a_hats, b_hats, cfg["h"], cfg["theta0"])
            for s in _parse_float_list(cfg["mgf_s"], "mgf_s"):
                val = log_chain_mgf(noise, s, par)
                rows.append((f"log_mgf[s={s:g}]", M, f"{val:.12g}"))
    sigma2_a = law.var_a_hat() / (a - 1.0) ** 2
    rows.append(("asymptotic_bias", "inf",
                 f"{asymptotic_bias(sigma2_a, par, cfg['h']):.12g}"))
    _write_csv(os.path.join(run, "report.csv"), "quantity,M,value", rows)
    print(f"moments: {len(rows)} rows ({par} form) -> {run}")
    return 0


# --------------------------------------------------------------------------
# lda-train / lda-eval
# --------------------------------------------------------------------------

LDA_TRAIN_SCHEMA = dict(
    name="lda", seed=0, kernel="cv-alt", corpus="", vocab="", n_topics=5,
    alpha=1.1, beta=0.1, h=1.0, tau=1000.0, kappa=3.32, minibatch_docs=50,
    refresh_every=5, refresh_docs=1000, gibbs_sweeps=200,
    eval_gibbs_sweeps=20, iters=200, eval_every=5, holdout_docs=200,
    test_fraction=0.1, ahat_floor=0.01, policy="alt", threads=1,
)


def _lda_config(cfg) -> lda_mod.LdaConfig:
    return lda_mod.LdaConfig(
        n_topics=cfg["n_topics"], alpha=cfg["alpha"], beta=cfg["beta"],
        h=cfg["h"], tau=cfg["tau"], kappa=cfg["kappa"],
        minibatch_docs=cfg["minibatch_docs"], refresh_every=cfg["refresh_every"],
        refresh_docs=cfg["refresh_docs"], gibbs_sweeps=cfg["gibbs_sweeps"],
        eval_gibbs_sweeps=cfg["eval_gibbs_sweeps"], kernel=cfg["kernel"],
        policy=cfg["policy"], ahat_floor=cfg["ahat_floor"],
        eval_every=cfg["eval_every"], n_threads=cfg["threads"])


def cmd_lda_train(args) -> int:
    cfg = _resolve(args, LDA_TRAIN_SCHEMA)
    if not cfg["corpus"]:
        raise ConfigError("lda-train needs --corpus")
    lcfg = _lda_config(cfg)
    corp = corpus_mod.load_corpus(cfg["corpus"], cfg["vocab"] or None)
    run = _run_dir(args, cfg)
    dump_config(cfg, os.path.join(run, "config.resolved"))

    stream = RngStream(cfg["seed"])
    split = None
    if cfg["holdout_docs"] > 0:
        if cfg["holdout_docs"] >= corp.n_docs:
            raise ConfigError("holdout_docs must be smaller than the corpus")
        split = corpus_mod.split_holdout(stream.child(1), corp,
                                         cfg["holdout_docs"],
                                         cfg["test_fraction"])
        train_corp = split.train
    else:
        train_corp = corp
    result = lda_mod.train_lda(train_corp, lcfg, stream.child(2), cfg["iters"],
                               split=split)

    _write_csv(os.path.join(run, "perplexity.csv"),
               "iter,docs_seen,perplexity,seed",
               [(it, seen, f"{p:.10g}", cfg["seed"])
                for it, seen, p in result.history])
    vocab = np.array(corp.vocab if corp.vocab is not None else [], dtype=str)
    np.savez_compressed(
        os.path.join(run, "state.npz"), state_version=np.int64(1),
        theta=result.state.theta, anchor=result.state.anchor,
        n_topics=np.int64(lcfg.n_topics), alpha=lcfg.alpha, beta=lcfg.beta,
        eval_gibbs_sweeps=np.int64(lcfg.eval_gibbs_sweeps), vocab=vocab)
    rows = [("seed", cfg["seed"]), ("kernel", cfg["kernel"]),
            ("iters", cfg["iters"])]
    if result.history:
        rows.append(("final_perplexity", f"{result.history[-1][2]:.10g}"))
    if split is not None:
        rows.append(("holdout_too_short", split.n_too_short))
    rows += sorted(result.counters.items())
    _write_csv(os.path.join(run, "report.csv"), "key,value", rows)
    if result.history:
        its = np.array([r[0] for r in result.history])
        ps = np.array([r[2] for r in result.history])
        line_plot(os.path.join(run, "perplexity.svg"), its,
                  {cfg["kernel"]: ps}, title="held-out perplexity",
                  xlabel="iteration", ylabel="perplexity")
        print(f"lda-train: kernel={cfg['kernel']} final perplexity "
              f"{ps[-1]:.2f} -> {run}")
    else:
        print(f"lda-train: kernel={cfg['kernel']} (no evaluation) -> {run}")
    return 0


LDA_EVAL_SCHEMA = dict(
    name="lda-eval", seed=0, state="", corpus="", vocab="", holdout_docs=200,
    test_fraction=0.1, eval_gibbs_sweeps=0,
)


def cmd_lda_eval(args) -> int:
    cfg = _resolve(args, LDA_EVAL_SCHEMA)
    if not cfg["state"] or not cfg["corpus"]:
        raise ConfigError("lda-eval needs --state and --corpus")
    try:
        with np.load(cfg["state"], allow_pickle=False) as z:
            if "state_version" not in z or int(z["state_version"]) != 1:
                raise DataError("not a topic-state file (bad or missing version)")
            theta = z["theta"]
            alpha = float(z["alpha"])
            sweeps = cfg["eval_gibbs_sweeps"] or int(z["eval_gibbs_sweeps"])
            model_vocab = [str(t) for t in z["vocab"]] if z["vocab"].size else None
    except OSError as exc:
        raise DataError(f"cannot read state file: {exc}") from exc
    corp = corpus_mod.load_corpus(cfg["corpus"], cfg["vocab"] or None)

    n_dropped = 0
    if corp.n_words != theta.shape[1]:
        if model_vocab is None or corp.vocab is None:
            raise DataError("vocabulary size mismatch and no vocabularies to map by")
        index = {tok: i for i, tok in enumerate(model_vocab)}
        mapping = np.array([index.get(tok, -1) for tok in corp.vocab],
                           dtype=np.int64)
        new_words, new_counts = [], []
        for d in range(corp.n_docs):
            mapped = mapping[corp.doc_words[d]]
            ok = mapped >= 0
            n_dropped += int(corp.doc_counts[d][~ok].sum())
            order = np.argsort(mapped[ok])
            new_words.append(mapped[ok][order])
            new_counts.append(corp.doc_counts[d][ok][order])
        corp = corpus_mod.Corpus(corp.n_docs, theta.shape[1], new_words,
                                 new_counts, model_vocab)

    stream = RngStream(cfg["seed"])
    if cfg["holdout_docs"] >= corp.n_docs:
        raise ConfigError("holdout_docs must be smaller than the corpus")
    split = corpus_mod.split_holdout(stream.child(1), corp,
                                     cfg["holdout_docs"], cfg["test_fraction"])
    lcfg = lda_mod.LdaConfig(n_topics=theta.shape[0], alpha=alpha,
                             eval_gibbs_sweeps=max(2, sweeps))
    acc = lda_mod.PerplexityAccumulator(split, alpha)
    acc.update(theta, lcfg, stream.child(2))
    perp = acc.perplexity()

    run = _run_dir(args, cfg)
    dump_config(cfg, os.path.join(run, "config.resolved"))
    _write_csv(os.path.join(run, "report.csv"), "key,value",
               [("perplexity", f"{perp:.10g}"),
                ("test_tokens", split.n_test_tokens()),
                ("holdout_too_short", split.n_too_short),
                ("dropped_tokens", n_dropped), ("seed", cfg["seed"])])
    print(f"lda-eval: perplexity {perp:.2f} over {split.n_test_tokens()} "
          f"test tokens ({n_dropped} dropped) -> {run}")
    return 0


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, default=None, help="master RNG seed")
    common.add_argument("--out", default="runs", help="parent directory for run output")
    common.add_argument("--kernel", default=None,
                        help="transition kernel (exact|scir|cv-main|cv-alt|sgrld)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads for per-document sampling")

    parser = argparse.ArgumentParser(
        prog="cirsimplex",
        description="Stochastic-gradient MCMC on the simplex via exact "
                    "square-root-diffusion transitions.")
    sub = parser.add_subparsers(dest="command", required=True)

    def register(name, func, schema, help_text):
        sp = sub.add_parser(name, parents=[common], help=help_text)
        for key, default in schema.items():
            if key in ("seed", "kernel", "threads"):
                continue
            flag = "--" + key.replace("_", "-")
            sp.add_argument(flag, dest=key, default=None,
                            type=type(default) if not isinstance(default, str) else str)
        sp.set_defaults(func=func, schema=schema)

    register("synthetic", cmd_synthetic, SYNTHETIC_SCHEMA,
             "sample sparse categorical posterior weights")
    register("variance-compare", cmd_variance_compare, VARCMP_SCHEMA,
             "closed-form variance curves for all kernels")
    register("moments", cmd_moments, MOMENTS_SCHEMA,
             "closed-form moment table for one control-variate form")
    register("lda-train", cmd_lda_train, LDA_TRAIN_SCHEMA,
             "train a topic model with a subsampled kernel")
    register("lda-eval", cmd_lda_eval, LDA_EVAL_SCHEMA,
             "evaluate a saved topic model on a corpus")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except DomainError as exc:
        print(f"numerical domain error: {exc}", file=sys.stderr)
        return 4
    except CirsimplexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
