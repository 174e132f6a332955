"""Command-line experiment runner.

Every subcommand builds an :class:`ExperimentConfig`, so flags and JSON config
files go through the same validation.  Outputs are CSV or JSON with floats at
12 significant digits; a fixed config and seed reproduce the same bytes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from typing import Any, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .distributions import DiscreteDistribution, DomainError, ProductDistribution, posted_price_revenue, product_from_spec, single_buyer_opt
from .learning import LearnerConfig, VARIANTS, learn
from .mechanisms import (
    DEFAULT_PROFILE_CAP,
    brute_force_opt,
    build_myerson,
    expected_revenue_exact,
    expected_revenue_mc,
    ORACLE_MAX_BUYERS,
    ORACLE_MAX_PROFILES,
)
from .rng import make_rng
from .signals import (
    lower_bound_instance,
    model_from_spec,
    multi_agent_signal_auction,
    single_agent_signal_price,
)
from . import verification as ver

CSV_HEADER = ("experiment", "m", "trial", "revenue", "opt", "ratio", "stderr", "seed")
SUITES = ("monotonicity", "optdom", "concentration", "discretize", "tail", "oracle", "sequential")
JOBS_ENV = "MYERSON_LAB_JOBS"
MC_TRIALS = 100_000

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_DOMAIN = 0, 1, 2, 3


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    command: Literal["opt", "learn", "signals", "verify", "lowerbound"]
    seed: int = Field(ge=0)
    dist: Optional[dict] = None
    model: Optional[Union[str, dict]] = None
    eps: float = Field(0.1, gt=0, lt=1)
    schedule: list[int] = Field(default_factory=lambda: [100])
    trials: int = Field(1, ge=1)
    constant_scale: float = Field(1.0, gt=0)
    output: Optional[str] = None
    format: Literal["csv", "json"] = "csv"
    jobs: int = Field(1, ge=1)
    atoms: int = Field(50, ge=1)
    # learn
    variant: str = "regular"
    h: Optional[float] = Field(None, gt=0)
    gamma: float = Field(0.1, gt=0, lt=1)
    srev_rows: Optional[int] = Field(None, ge=2)
    vcg_runs: Optional[int] = Field(None, ge=1)
    mechanism_out: Optional[str] = None
    # signals
    mode: Literal["single", "multi"] = "single"
    n: int = Field(1, ge=1)
    ell: Optional[int] = Field(None, ge=1)
    # verify
    suite: Optional[Literal[SUITES]] = None  # type: ignore[valid-type]
    # opt
    brute: bool = False
    # lowerbound
    N: int = Field(4, ge=1)
    bits: Optional[list[int]] = None
    fine_atoms: int = Field(2_000_000, ge=1)

    @field_validator("schedule")
    @classmethod
    def _schedule(cls, v: list[int]) -> list[int]:
        if not v:
            raise ValueError("schedule must be non-empty")
        if any(x < 1 for x in v):
            raise ValueError("schedule entries must be >= 1")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("schedule must be strictly increasing")
        return v

    @field_validator("variant")
    @classmethod
    def _variant(cls, v: str) -> str:
        if v not in VARIANTS:
            raise ValueError(f"variant must be one of {', '.join(VARIANTS)}")
        return v

    @model_validator(mode="after")
    def _needs(self):
        if self.command in ("opt", "learn") and self.dist is None:
            raise ValueError(f"command {self.command!r} needs a 'dist' spec")
        if self.command == "signals" and self.model is None:
            raise ValueError("command 'signals' needs a 'model' spec")
        if self.command == "verify" and self.suite is None:
            raise ValueError("command 'verify' needs a 'suite'")
        return self


def validate_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        msgs = []
        for err in exc.errors():
            path = ".".join(str(p) for p in err["loc"]) or "config"
            msgs.append(f"{path}: {err['msg']}")
        raise UsageError("invalid config: " + "; ".join(msgs)) from None


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def fmt_float(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.12g}"
    return str(x)


def _json_ready(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_json_ready(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return fmt_float(x)
        return float(f"{x:.12g}")
    return obj


def render(report: Any, fmt: str, header: Optional[Sequence[str]] = None) -> str:
    """Serialize a report: an object with ``to_dict``/``rows``, a dict, or a list of row dicts."""
    if fmt == "json":
        data = report.to_dict() if hasattr(report, "to_dict") else report
        return json.dumps(_json_ready(data), indent=2) + "\n"
    if fmt != "csv":
        raise UsageError(f"unknown format {fmt!r}")
    rows = report.rows() if hasattr(report, "rows") else report
    if isinstance(rows, dict):
        rows = [rows]
    cols = list(header) if header is not None else (list(rows[0].keys()) if rows else [])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        writer.writerow([fmt_float(row.get(c, "")) for c in cols])
    return buf.getvalue()


def emit_report(report: Any, fmt: str = "json", path: Optional[str] = None, header: Optional[Sequence[str]] = None) -> None:
    """Write a report to ``path`` (or stdout when ``path`` is ``None`` or ``-``)."""
    text = render(report, fmt, header)
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# Parallel trials
# ---------------------------------------------------------------------------


def resolve_jobs(flag: int) -> int:
    env = os.environ.get(JOBS_ENV)
    if env:
        try:
            jobs = int(env)
        except ValueError:
            raise UsageError(f"{JOBS_ENV} must be an integer, got {env!r}") from None
        if jobs < 1:
            raise UsageError(f"{JOBS_ENV} must be >= 1")
        return jobs
    return flag


def map_ordered(fn, tasks: list, jobs: int) -> list:
    """``map`` that preserves task order; results never depend on ``jobs``."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


@lru_cache(maxsize=8)
def _product(spec_json: str, atoms: int) -> ProductDistribution:
    return product_from_spec(json.loads(spec_json), atoms)


@lru_cache(maxsize=8)
def _model(spec_json: str, atoms: int):
    return model_from_spec(json.loads(spec_json), atoms)


@lru_cache(maxsize=8)
def _opt(spec_json: str, atoms: int) -> float:
    D = _product(spec_json, atoms)
    return expected_revenue_exact(build_myerson(D), D)


def _revenue(mech, D: ProductDistribution, seed: int, tag: str, trial: int) -> tuple[float, float]:
    if D.num_profiles <= DEFAULT_PROFILE_CAP:
        return expected_revenue_exact(mech, D, round_down=True), 0.0
    return expected_revenue_mc(mech, D, MC_TRIALS, make_rng(seed, tag + "/eval", trial), round_down=True)


# ---------------------------------------------------------------------------
# Pipelines
# ---------------------------------------------------------------------------


def _learner_config(cfg: ExperimentConfig) -> LearnerConfig:
    return LearnerConfig(
        eps=cfg.eps,
        variant=cfg.variant,
        h=cfg.h,
        constant_scale=cfg.constant_scale,
        gamma=cfg.gamma,
        srev_rows=cfg.srev_rows,
        vcg_runs=cfg.vcg_runs,
    )


def _learn_task(task: tuple) -> dict:
    cfg_json, m, trial = task
    cfg = ExperimentConfig.model_validate_json(cfg_json)
    spec = json.dumps(cfg.dist, sort_keys=True)
    D = _product(spec, cfg.atoms)
    opt = _opt(spec, cfg.atoms)
    tag = f"learn/{m}"
    samples = D.sample(make_rng(cfg.seed, tag, trial), m)
    res = learn(samples, _learner_config(cfg))
    rev, stderr = _revenue(res.mechanism, D, cfg.seed, tag, trial)
    return {
        "experiment": f"learn-{cfg.variant}",
        "m": m,
        "trial": trial,
        "revenue": rev,
        "opt": opt,
        "ratio": rev / opt if opt > 0 else math.nan,
        "stderr": stderr,
        "seed": cfg.seed,
    }


def run_learn(cfg: ExperimentConfig) -> tuple[list[dict], Any]:
    cfg_json = cfg.model_dump_json()
    tasks = [(cfg_json, m, t) for m in cfg.schedule for t in range(cfg.trials)]
    rows = map_ordered(_learn_task, tasks, resolve_jobs(cfg.jobs))
    mech = None
    if cfg.mechanism_out:
        D = _product(json.dumps(cfg.dist, sort_keys=True), cfg.atoms)
        m = cfg.schedule[-1]
        samples = D.sample(make_rng(cfg.seed, f"learn/{m}", 0), m)
        mech = learn(samples, _learner_config(cfg)).mechanism
    return rows, mech


def _signal_task(task: tuple) -> dict:
    cfg_json, trial = task
    cfg = ExperimentConfig.model_validate_json(cfg_json)
    spec = json.dumps(cfg.model, sort_keys=True)
    model = _model(spec, cfg.atoms)
    m = cfg.schedule[-1]
    tag = f"signals/{cfg.mode}"
    rng = make_rng(cfg.seed, tag, trial)
    samples = model.sample(rng, m)
    n = 1 if cfg.mode == "single" else cfg.n
    sig = model.sample_signals(rng, n)
    opt = model.profile_opt(sig)
    price: Any = ""
    if cfg.mode == "single":
        price = single_agent_signal_price(samples, float(sig[0]), cfg.eps, cfg.ell, cfg.constant_scale)
        rev = posted_price_revenue(price, model.discrete_conditional(float(sig[0])))
    else:
        mech = multi_agent_signal_auction(samples, sig, cfg.eps, cfg.ell, cfg.constant_scale)
        D = ProductDistribution(tuple(model.discrete_conditional(float(s)) for s in sig))
        rev = expected_revenue_exact(mech, D, round_down=True)
    return {
        "experiment": f"signals-{cfg.mode}",
        "m": m,
        "trial": trial,
        "revenue": rev,
        "opt": opt,
        "ratio": rev / opt if opt > 0 else math.nan,
        "stderr": 0.0,
        "seed": cfg.seed,
        "signals": ";".join(fmt_float(float(s)) for s in sig),
        "price": price,
    }


def run_signals(cfg: ExperimentConfig) -> list[dict]:
    cfg_json = cfg.model_dump_json()
    return map_ordered(_signal_task, [(cfg_json, t) for t in range(cfg.trials)], resolve_jobs(cfg.jobs))


def run_verify(cfg: ExperimentConfig) -> tuple[Any, bool]:
    """Run one verification suite; returns ``(report, passed)``."""
    s, t, seed = cfg.suite, cfg.trials, cfg.seed
    if s == "monotonicity":
        rep = ver.monotonicity_suite(3, 4, t, seed)
        return rep, rep.passed
    if s == "optdom":
        rep = ver.opt_dominance_check(t, seed)
        seq = ver.sequential_example()
        rep.details["sequential"] = seq.to_dict()
        if seq.net < -1e-9:
            rep.violations += 1
        return rep, rep.passed
    if s == "concentration":
        if cfg.dist:
            D = product_from_spec(cfg.dist, cfg.atoms)
        else:
            D = ProductDistribution.iid(DiscreteDistribution.uniform_over([0.0, 1.0]), 2)
        rep = ver.concentration_experiment("indicator", D, [20, 50, 100], [0.1, 0.2, 0.3], t, seed)
        return rep, rep.passed
    if s == "discretize":
        rep = ver.discretization_suite(t, seed)
        return rep, rep.passed
    if s == "tail":
        rep = ver.tail_suite(atoms=cfg.atoms)
        return rep, rep.passed
    if s == "oracle":
        rep = ver.oracle_suite(t, seed)
        return rep, rep.passed
    if s == "sequential":
        # only the net change is guaranteed non-negative; rise and fall are reported
        seq = ver.sequential_example()
        return seq, seq.net >= -1e-9
    raise UsageError(f"unknown suite {s!r}")


def run_opt(cfg: ExperimentConfig) -> dict:
    D = product_from_spec(cfg.dist, cfg.atoms)
    mech = build_myerson(D)
    out = {"n": D.n, "profiles": D.num_profiles, "opt": expected_revenue_exact(mech, D)}
    out["single_buyer"] = [dict(zip(("price", "revenue"), single_buyer_opt(d))) for d in D]
    if cfg.brute:
        if D.n > ORACLE_MAX_BUYERS or D.num_profiles > ORACLE_MAX_PROFILES:
            raise DomainError("instance too large for the brute-force oracle")
        out["brute_force"] = brute_force_opt(D)
    out["mechanism"] = mech.to_dict()
    return out


def run_lowerbound(cfg: ExperimentConfig) -> dict:
    inst = lower_bound_instance(cfg.eps, cfg.N, cfg.bits, cfg.atoms)
    signals = []
    for i in range(inst.N + 1):
        fam = inst.family(i)
        fine = fam.discretize(cfg.fine_atoms)
        price, rev = single_buyer_opt(fine)
        exact = inst.optimum(i)
        signals.append(
            {
                "i": i,
                "signal": inst.signal(i),
                "type": 2 if inst.bits[i] else 1,
                "c": float(inst.scales[i]),
                "p": float(inst.weights[i]),
                "opt_closed_form": exact,
                "opt_discretized": rev,
                "rel_error": abs(rev - exact) / exact,
            }
        )
    return {
        "eps": inst.eps,
        "eps0": inst.eps0,
        "N": inst.N,
        "gamma": inst.gamma,
        "weight_sum": float(np.sum(inst.weights)),
        "opt_signals_single_buyer": float(np.sum(inst.weights * [s["opt_closed_form"] for s in signals])),
        "signals": signals,
    }


def run_experiment(cfg: ExperimentConfig) -> int:
    """Execute ``cfg`` and write its report; returns the process exit status."""
    out = cfg.output
    if cfg.command == "learn":
        rows, mech = run_learn(cfg)
        if mech is not None:
            with open(cfg.mechanism_out, "w", encoding="utf-8") as fh:
                fh.write(render(mech, "json"))
        if cfg.format == "json":
            emit_report(rows, "json", out)
        else:
            emit_report(rows, "csv", out, CSV_HEADER)
        return EXIT_OK
    if cfg.command == "signals":
        rows = run_signals(cfg)
        if cfg.format == "json":
            emit_report(rows, "json", out)
        else:
            emit_report(rows, "csv", out, CSV_HEADER + ("signals", "price"))
        return EXIT_OK
    if cfg.command == "verify":
        report, ok = run_verify(cfg)
        fmt = cfg.format if hasattr(report, "rows") else "json"
        emit_report(report, fmt, out)
        return EXIT_OK if ok else EXIT_VIOLATION
    if cfg.command == "opt":
        emit_report(run_opt(cfg), "json", out)
        return EXIT_OK
    emit_report(run_lowerbound(cfg), "json", out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _load_json_arg(text: str) -> Any:
    """Inline JSON, or a path to a JSON file."""
    stripped = text.strip()
    if stripped.startswith(("{", "[")):
        try:
            return json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise UsageError(f"invalid inline JSON: {exc}") from None
    try:
        with open(text, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {text}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{text} is not valid JSON: {exc}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _bits(text: str) -> list[int]:
    if not text or any(ch not in "01" for ch in text):
        raise argparse.ArgumentTypeError(f"bits must be a string of 0/1 characters, got {text!r}")
    return [int(ch) for ch in text]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="myerson-lab", description="Optimal auctions from samples: experiments and checks.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help="output path (default: stdout)"):
        sp.add_argument("--seed", type=int, required=True, help="master seed (non-negative)")
        sp.add_argument("--out", dest="output", help=out_help)
        sp.add_argument("--atoms", type=int, default=50, help="atoms used to discretize continuous families")

    sp = sub.add_parser("opt", help="optimal auction and revenue of a product distribution")
    sp.add_argument("--dist", required=True, help="distribution spec (JSON file or inline JSON)")
    sp.add_argument("--brute", action="store_true", help="also run the brute-force oracle")
    common(sp)

    sp = sub.add_parser("learn", help="learn an empirical Myerson auction from samples")
    sp.add_argument("--dist", required=True, help="distribution spec (JSON file or inline JSON)")
    sp.add_argument("--variant", default="regular", help=f"one of {', '.join(VARIANTS)}")
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--samples", type=_int_list, default=[100], help="sample count or comma-separated schedule")
    sp.add_argument("--trials", type=int, default=1)
    sp.add_argument("--h", type=float, default=None, help="value bound for bounded variants")
    sp.add_argument("--constant-scale", type=float, default=1.0)
    sp.add_argument("--gamma", type=float, default=0.1)
    sp.add_argument("--srev-rows", type=int, default=None)
    sp.add_argument("--vcg-runs", type=int, default=None)
    sp.add_argument("--csv", dest="csv_out", help="CSV path for the per-trial rows (default: stdout)")
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--format", default="csv", choices=("csv", "json"))
    common(sp, "write the mechanism learned at the largest sample count (trial 0) as JSON")

    sp = sub.add_parser("signals", help="signal-model auctions against the clairvoyant optimum")
    sp.add_argument("--model", required=True, help="'lb:eps,N[,bits]', a JSON file, or inline JSON")
    sp.add_argument("--mode", default="single", choices=("single", "multi"))
    sp.add_argument("--eps", type=float, default=0.2)
    sp.add_argument("--m", type=int, default=1000, help="number of (value, signal) samples")
    sp.add_argument("--n", type=int, default=2, help="bidders in multi mode")
    sp.add_argument("--ell", type=int, default=None, help="window size (default: formula x constant scale)")
    sp.add_argument("--trials", type=int, default=10)
    sp.add_argument("--constant-scale", type=float, default=1.0)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--format", default="csv", choices=("csv", "json"))
    common(sp)

    sp = sub.add_parser("verify", help="run a verification suite; exit 1 on any violation")
    sp.add_argument("--suite", required=True, choices=SUITES)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--dist", default=None, help="distribution for the concentration suite")
    sp.add_argument("--format", default="json", choices=("csv", "json"))
    common(sp)

    sp = sub.add_parser("lowerbound", help="inspect the lower-bound signal family")
    sp.add_argument("--eps", type=float, default=0.01)
    sp.add_argument("--N", type=int, default=4)
    sp.add_argument("--bits", type=_bits, default=None, help="N+1 characters of 0/1 (1 = lighter tail)")
    sp.add_argument("--fine-atoms", type=int, default=2_000_000)
    common(sp)

    sp = sub.add_parser("run", help="run an experiment described by a JSON config file")
    sp.add_argument("--config", required=True)
    return p


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    if args.command == "run":
        data = _load_json_arg(args.config)
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
        return validate_config(data)
    data = {k: v for k, v in vars(args).items() if v is not None}
    if "dist" in data:
        data["dist"] = _load_json_arg(data["dist"])
    if "model" in data:
        data["model"] = data["model"] if data["model"].startswith("lb:") else _load_json_arg(data["model"])
    if "samples" in data:
        data["schedule"] = data.pop("samples")
    if "m" in data:
        data["schedule"] = [data.pop("m")]
    if args.command == "learn":
        data["mechanism_out"] = data.pop("output", None)
        data["output"] = data.pop("csv_out", None)
    return validate_config(data)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        return run_experiment(cfg)
    except UsageError as exc:
        print(f"myerson-lab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"myerson-lab {args.command}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"myerson-lab {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
