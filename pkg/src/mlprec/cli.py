"""Command-line interface.

    mlprec {train,gradcheck,tune,recommend,eval} [--config FILE] [options]

Settings come from command-line flags, then the config file, then defaults.
The config file holds ``key = value`` lines (``#`` comments allowed, an
optional ``[run]`` section header); relative paths are resolved against the
file's directory.  Data tables go to stdout, logs to stderr.

Exit codes: 0 success, 1 input/config/training failure, 2 gradient check
failure.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import seeding
from .classical_cf import CfConfig
from .dataset import DataFormatError, default_rating_threshold, load_features, load_ratings, transform, fit_stats, binarize
from .evaluation import evaluate, format_eval
from .perceptron import Activation
from .recommender import (
    ColdUserError,
    ModelFormatError,
    PipelineConfig,
    build_user_examples,
    format_recommendations,
    load_model,
    recommend,
    save_model,
    train_user,
)
from .training import DivergenceError, GradientCheckError, TrainConfig, backprop, gradient_check, numerical_gradient, random_init
from .tuning import SearchSpace, format_trials, grid_search, holdout_split, random_search

log = logging.getLogger("mlprec")

EXIT_OK, EXIT_FAIL, EXIT_CHECK = 0, 1, 2


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in str(text).replace(";", ",").split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in str(text).replace(";", ",").split(",") if v.strip())


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    ratings: Path | None = None
    features: Path | None = None
    model_dir: Path = Path("models")
    output: Path | None = None
    candidates: Path | None = None
    rating_scale: tuple[float, ...] = (1.0, 5.0)
    rating_threshold: float | None = None
    decision_threshold: float | None = None
    topology: tuple[int, ...] | None = None
    hidden: tuple[int, ...] = (4,)
    activation: str = "sigmoid"
    bias: bool = False
    preprocessing: str = "normalize"
    alpha: float = 0.5
    lam: float = 0.0
    mode: str = "batch"
    b: int = 10
    epochs: int = 500
    init_bound: float = 0.12
    gradcheck: str = "off"
    gradcheck_gamma: float = 1e-7
    gradcheck_tolerance: float = 1e-7
    gradcheck_examples: int = 20
    paper_literal_backprop: bool = False
    seed: int = 0
    jobs: int = 1
    tune_alpha: tuple[float, ...] = (0.1, 0.5, 1.0)
    tune_lambda: tuple[float, ...] = (0.0, 1.0, 10.0)
    tune_b: tuple[int, ...] = (10,)
    tune_fraction: float = 0.8
    tune_trials: int = 8
    eval_fraction: float = 0.8
    cf_n: int = 2
    cf_alpha: float = 0.01
    cf_lambda: float = 0.1
    cf_iters: int = 2000

    PARSERS = {
        "rating_scale": _floats, "topology": _ints, "hidden": _ints, "bias": _bool,
        "paper_literal_backprop": _bool, "tune_alpha": _floats, "tune_lambda": _floats, "tune_b": _ints,
    }
    PATHS = ("ratings", "features", "model_dir", "output", "candidates")
    ALIASES = {"lambda": "lam", "learning_rate": "alpha"}

    def set(self, key: str, value, base: Path | None = None) -> None:
        key = key.strip().replace("-", "_")
        key = self.ALIASES.get(key, key)
        names = {f.name: f for f in fields(self)}
        if key not in names:
            raise ConfigError(f"unknown setting {key!r}")
        try:
            if key in self.PATHS:
                p = Path(str(value).strip())
                value = p if base is None or p.is_absolute() else base / p
            elif key in self.PARSERS:
                value = self.PARSERS[key](value)
            elif key in ("rating_threshold", "decision_threshold"):
                value = None if value in (None, "") else float(value)
            else:
                default = getattr(RunConfig, key, None)
                if isinstance(default, bool):
                    value = _bool(value)
                elif isinstance(default, int):
                    value = int(value)
                elif isinstance(default, float):
                    value = float(value)
                else:
                    value = str(value).strip()
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
        setattr(self, key, value)

    @property
    def threshold(self) -> float:
        if self.rating_threshold is not None:
            return self.rating_threshold
        lo, hi = self.rating_scale
        return default_rating_threshold(lo, hi)

    def train_config(self, **overrides) -> TrainConfig:
        try:
            return TrainConfig(
                alpha=self.alpha, lam=self.lam, mode=self.mode, b=self.b, epochs=self.epochs, seed=self.seed,
                init_bound=self.init_bound, gradcheck=self.gradcheck,
                paper_literal_backprop=self.paper_literal_backprop,
                gradcheck_gamma=self.gradcheck_gamma, gradcheck_tolerance=self.gradcheck_tolerance,
            ).replace(**overrides)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def pipeline(self, n_features: int) -> PipelineConfig:
        topology = self.topology or (n_features, *self.hidden, 1)
        if topology[0] != n_features:
            raise ConfigError(f"topology input size {topology[0]} does not match {n_features} features")
        try:
            return PipelineConfig(
                topology, Activation(self.activation), self.bias, self.preprocessing,
                self.threshold, 0.5 if self.decision_threshold is None else self.decision_threshold,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def read_config_file(path: Path, cfg: RunConfig) -> None:
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    for section in parser.sections():
        for key, value in parser.items(section):
            cfg.set(key, value, path.parent)


# flags that map onto RunConfig fields: (flag, dest, kwargs)
_OVERRIDES = [
    ("--ratings", "ratings", {}), ("--features", "features", {}), ("--model-dir", "model_dir", {}),
    ("--output", "output", {}), ("--candidates", "candidates", {}),
    ("--rating-threshold", "rating_threshold", {}), ("--decision-threshold", "decision_threshold", {}),
    ("--topology", "topology", {}), ("--hidden", "hidden", {}), ("--activation", "activation", {"choices": [a.value for a in Activation]}),
    ("--preprocessing", "preprocessing", {"choices": ["scale", "normalize", "standardize"]}),
    ("--alpha", "alpha", {}), ("--lambda", "lam", {}), ("--mode", "mode", {"choices": ["batch", "stochastic", "minibatch"]}),
    ("--b", "b", {}), ("--epochs", "epochs", {}), ("--init-bound", "init_bound", {}),
    ("--gradcheck", "gradcheck", {"choices": ["off", "once"]}),
]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value settings file")
    common.add_argument("--seed", type=int, help="master seed for every random choice")
    common.add_argument("--jobs", type=int, help="parallel workers for users or trials")
    common.add_argument("--quiet", action="store_true", help="only warnings and errors on stderr")
    common.add_argument("--paper-literal-backprop", action="store_true", default=None,
                        help="use a(1-a) as the hidden derivative whatever the activation")
    common.add_argument("--bias", action="store_true", default=None, help="add bias units (off by default)")
    for flag, dest, kw in _OVERRIDES:
        common.add_argument(flag, dest=dest, default=None, **kw)

    parser = argparse.ArgumentParser(prog="mlprec", description="Per-user perceptron recommender")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train one model per user")
    p.add_argument("--user", action="append", help="train only this user (repeatable)")
    p.add_argument("--keep-going", action="store_true", help="continue past failing users")

    p = sub.add_parser("gradcheck", parents=[common], help="compare backpropagation with numerical gradients")
    p.add_argument("--user", help="take sample examples from this user")

    p = sub.add_parser("tune", parents=[common], help="grid or random hyperparameter search")
    p.add_argument("--random", action="store_true", help="random search instead of the full grid")
    p.add_argument("--trials", type=int, help="number of random-search trials")
    p.add_argument("--user", help="tune on this user's examples (default: first user)")

    p = sub.add_parser("recommend", parents=[common], help="rank candidate items for a user")
    p.add_argument("--user", required=True)

    p = sub.add_parser("eval", parents=[common], help="holdout accuracy against baselines")
    p.add_argument("--user", action="append", help="evaluate only this user (repeatable)")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config is not None:
        read_config_file(args.config, cfg)
    for _, dest, _ in _OVERRIDES:
        value = getattr(args, dest, None)
        if value is not None:
            cfg.set(dest, value)
    for name in ("seed", "jobs", "paper_literal_backprop", "bias"):
        value = getattr(args, name, None)
        if value is not None:
            cfg.set(name, value)
    return cfg


def _load_data(cfg: RunConfig):
    for key in ("ratings", "features"):
        path = getattr(cfg, key)
        if path is None:
            raise ConfigError(f"no {key} file configured")
        if not Path(path).is_file():
            raise FileNotFoundError(f"{key} file not found: {path}")
    dataset = load_ratings(cfg.ratings)
    features = load_features(cfg.features, dataset)
    return dataset, features


def _emit(text: str, cfg: RunConfig) -> None:
    if cfg.output is not None:
        Path(cfg.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# -- commands ----------------------------------------------------------------


def _train_one(args):
    j, dataset, features, pipeline, tcfg, model_dir = args
    try:
        model = train_user(j, dataset, features, pipeline, tcfg)
    except (ColdUserError, DivergenceError, GradientCheckError, ValueError) as exc:
        return dataset.user_ids[j], None, str(exc)
    path = Path(model_dir) / f"{model.user_id}.model"
    save_model(model, path)
    return model.user_id, model.training_meta["final_cost"], None


def cmd_train(cfg: RunConfig, users=None, keep_going=False) -> int:
    dataset, features = _load_data(cfg)
    pipeline = cfg.pipeline(features.n)
    if users:
        missing = [u for u in users if u not in dataset.user_ids]
        if missing:
            log.error("unknown user(s): %s", ", ".join(missing))
            return EXIT_FAIL
        indices = [dataset.user_index(u) for u in users]
    else:
        indices = list(range(dataset.n_u))
    base = cfg.train_config()
    Path(cfg.model_dir).mkdir(parents=True, exist_ok=True)
    tasks = [
        (j, dataset, features, pipeline, base.replace(seed=seeding.derive_seed(cfg.seed, seeding.USER, j)), cfg.model_dir)
        for j in indices
    ]
    results = []
    failed = False
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            outcomes = list(pool.map(_train_one, tasks))
    else:
        outcomes = []
        for t in tasks:
            outcomes.append(_train_one(t))
            if outcomes[-1][2] is not None and not keep_going:
                break
    for user_id, cost, err in outcomes:
        if err is not None:
            log.error("user %s: %s", user_id, err)
            failed = True
            if not keep_going:
                break
            continue
        results.append(f"{user_id},{cost!r}")
        log.info("trained %s, final cost %.6f", user_id, cost)
    _emit("user_id,final_cost\n" + "".join(r + "\n" for r in results), cfg)
    return EXIT_FAIL if failed else EXIT_OK


def cmd_gradcheck(cfg: RunConfig, user=None) -> int:
    dataset, features = _load_data(cfg)
    pipeline = cfg.pipeline(features.n)
    j = dataset.user_index(user) if user is not None else 0
    labels = binarize(dataset, pipeline.rating_threshold)
    raw = build_user_examples(j, labels, features)[: cfg.gradcheck_examples]
    stats = fit_stats(np.array([x for x, _ in raw]), pipeline.preprocessing)
    examples = [(transform(x, stats), y) for x, y in raw]
    net = random_init(pipeline.topology, cfg.init_bound, seeding.derive_seed(cfg.seed, seeding.INIT),
                      pipeline.hidden_activation, pipeline.bias)
    analytic = backprop(net, examples, cfg.lam, paper_literal=cfg.paper_literal_backprop)
    numeric = numerical_gradient(net, examples, cfg.lam, cfg.gradcheck_gamma)
    eps = gradient_check(analytic, numeric)
    ok = eps <= cfg.gradcheck_tolerance
    _emit(f"epsilon,{eps!r}\ntolerance,{cfg.gradcheck_tolerance!r}\nresult,{'pass' if ok else 'fail'}\n", cfg)
    return EXIT_OK if ok else EXIT_CHECK


def cmd_tune(cfg: RunConfig, random_mode=False, trials=None, user=None) -> int:
    dataset, features = _load_data(cfg)
    pipeline = cfg.pipeline(features.n)
    j = dataset.user_index(user) if user is not None else 0
    labels = binarize(dataset, pipeline.rating_threshold)
    raw = build_user_examples(j, labels, features)
    stats = fit_stats(np.array([x for x, _ in raw]), pipeline.preprocessing)
    examples = [(transform(x, stats), y) for x, y in raw]
    train, validation = holdout_split(examples, cfg.tune_fraction, seeding.derive_seed(cfg.seed, seeding.SPLIT))
    try:
        space = SearchSpace(cfg.tune_alpha, cfg.tune_lambda, cfg.tune_b, cfg.train_config())
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    kw = dict(hidden_activation=pipeline.hidden_activation, bias=pipeline.bias, jobs=cfg.jobs)
    if random_mode:
        results = random_search(space, trials or cfg.tune_trials, cfg.seed, train, validation, pipeline.topology, **kw)
    else:
        results = grid_search(space, train, validation, pipeline.topology, cfg.seed, **kw)
    _emit(format_trials(results), cfg)
    best = next((r for r in results if not r.diverged), None)
    if best is None:
        log.warning("every trial diverged")
    else:
        c = best.config
        print(f"best: alpha={c.alpha!r} lambda={c.lam!r} b={c.b} seed={c.seed} validation_cost={best.validation_cost!r}",
              file=sys.stderr)
    return EXIT_OK


def cmd_recommend(cfg: RunConfig, user: str) -> int:
    model_path = Path(cfg.model_dir) / f"{user}.model"
    if not model_path.is_file():
        log.error("no model for user %s at %s", user, model_path)
        return EXIT_FAIL
    if cfg.candidates is None or not Path(cfg.candidates).is_file():
        log.error("candidates file not found: %s", cfg.candidates)
        return EXIT_FAIL
    model = load_model(model_path)
    cands = load_features(cfg.candidates)
    recs = recommend(model, zip(cands.item_ids, cands.X), threshold=cfg.decision_threshold)
    _emit(format_recommendations(recs), cfg)
    return EXIT_OK


def cmd_eval(cfg: RunConfig, users=None) -> int:
    dataset, features = _load_data(cfg)
    pipeline = cfg.pipeline(features.n)
    cf_cfg = CfConfig(alpha=cfg.cf_alpha, lam=cfg.cf_lambda, n=cfg.cf_n, iters=cfg.cf_iters, seed=cfg.seed)
    rows = evaluate(dataset, features, pipeline, cfg.train_config(), cf_cfg, cfg.eval_fraction, cfg.seed, users)
    _emit(format_eval(rows), cfg)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    try:
        cfg = resolve_config(args)
        if args.command == "train":
            return cmd_train(cfg, args.user, args.keep_going)
        if args.command == "gradcheck":
            return cmd_gradcheck(cfg, args.user)
        if args.command == "tune":
            return cmd_tune(cfg, args.random, args.trials, args.user)
        if args.command == "recommend":
            return cmd_recommend(cfg, args.user)
        return cmd_eval(cfg, args.user)
    except (OSError, ConfigError, DataFormatError, ModelFormatError, ColdUserError, KeyError, ValueError,
            DivergenceError, GradientCheckError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        log.error("%s", msg)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
