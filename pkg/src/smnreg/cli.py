"""
Command-line front end.

    smnreg check     --x X.csv --y Y.csv --mixing gamma:5
    smnreg run       --x X.csv --y Y.csv --mixing gamma:5 --iters 10000 --seed 1 --out runs/a
    smnreg summarize runs/a/trace.csv
    smnreg synth     --beta "1,2;0.5,-1" --sigma "1,0.3;0.3,1" --n 100 --mixing gamma:5 --seed 7 --out data

Settings may also come from a flat ``key = value`` file given by
``--config``; command-line flags override it.  Exit status is 0 on success,
1 on a validation failure and 2 on a runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from smnreg.diagnostics import DEFAULT_BATCHES, DEFAULT_LAGS, summarize
from smnreg.errors import SmnregError
from smnreg.ergodicity import drift_function, drift_params, verdict_for
from smnreg.mixing import ConditionM, DegenerateMixing, GammaMixing, check_condition_M, parse_mixing
from smnreg.model import Dataset, PriorSpec, generate_synthetic, validate_propriety
from smnreg.sampler import ChainAborted, initial_state, run_chain, run_chains
from smnreg.trace import ChainTrace

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

# config keys and their types; flags use the same names with dashes
_KEYS = {
    "x": str, "y": str, "header": bool, "a": float, "mixing": str, "origin": str,
    "user_density": str, "user_sampler": str, "user_psi_sampler": str,
    "iters": int, "burnin": int, "thin": int, "seed": int, "out": str, "chains": int,
    "force": bool, "keep_latents": bool,
    "beta": str, "sigma": str, "n": int,
}
_DEFAULTS = {"burnin": 0, "thin": 1, "chains": 1, "header": False,
             "force": False, "keep_latents": False}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _to_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off", ""):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in _KEYS:
            raise UsageError(f"{path}:{lineno}: unrecognised line {raw.strip()!r}")
        conv = _to_bool if _KEYS[key] is bool else _KEYS[key]
        try:
            out[key] = conv(value.strip())
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value for {key}") from None
    return out


def write_config(path, cfg: dict) -> None:
    lines = [f"{k} = {str(v).lower() if isinstance(v, bool) else v}"
             for k, v in sorted(cfg.items()) if v is not None and k in _KEYS]
    Path(path).write_text("\n".join(lines) + "\n")


def resolve(args) -> dict:
    cfg = dict(_DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(read_config(args.config))
    for key in _KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def parse_matrix(text: str) -> np.ndarray:
    """``"1,2;3,4"`` (rows split by ``;``) or a path to a CSV file."""
    path = Path(text)
    if path.exists():
        return np.loadtxt(path, delimiter=",", ndmin=2)
    try:
        return np.array([[float(v) for v in row.split(",")] for row in text.split(";")])
    except ValueError:
        raise UsageError(f"cannot parse matrix {text!r}") from None


# ---------------------------------------------------------------------------

def _load(cfg):
    if not cfg.get("x") or not cfg.get("y"):
        raise UsageError("both --x and --y are required")
    try:
        data = Dataset.from_csv(cfg["x"], cfg["y"], header=cfg["header"])
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read data: {exc}") from None
    a = cfg.get("a")
    prior = PriorSpec.noninformative(data.d) if a is None else PriorSpec(a)
    return data, prior, _mixing(cfg, data.d)


def _mixing(cfg, d):
    if not cfg.get("mixing"):
        raise UsageError("--mixing is required (gamma:<nu>, degenerate or user)")
    try:
        return parse_mixing(cfg["mixing"], d, origin=cfg.get("origin"), density=cfg.get("user_density"),
                            sampler=cfg.get("user_sampler"), psi_sampler=cfg.get("user_psi_sampler"))
    except (ValueError, ImportError, AttributeError) as exc:
        raise UsageError(f"bad mixing specification: {exc}") from None


def check_report(data: Dataset, prior: PriorSpec, mixing) -> dict:
    """Flat key-value report of propriety, tail condition, verdict and certificate."""
    n, p, d = data.dims
    prop = validate_propriety(data, prior)
    cond_m = check_condition_M(mixing)
    verdict = verdict_for(mixing, data.dims, prior.a)
    rep = {
        "n": n, "p": p, "d": d, "a": prior.a, "mixing": mixing.label,
        "propriety.rank_ok": prop.rank_ok, "propriety.sample_size_ok": prop.sample_size_ok,
        "propriety.rank_of_lambda": prop.rank_of_lambda, "propriety.slack": prop.slack,
        "propriety.ok": prop.ok,
        "condition_m": cond_m.value,
        "ge.status": verdict.status.value, "ge.clause": verdict.clause, "ge.reason": verdict.reason,
        "ge.threshold": verdict.threshold, "ge.provenance": verdict.provenance, "ge.note": verdict.note,
    }
    if prop.failures():
        rep["propriety.failures"] = "; ".join(prop.failures())
    if cond_m is not ConditionM.HOLDS:
        rep["ge.caveat"] = f"verdict assumes the tail condition, which {cond_m.value}"
    if isinstance(mixing, (GammaMixing, DegenerateMixing)):
        try:
            dp = drift_params(mixing, data.dims, prior.a)
        except (SmnregError, ValueError) as exc:
            rep["drift.error"] = str(exc)
        else:
            rep.update({f"drift.{k}": v for k, v in dp.to_dict().items() if k != "s_grid"})
            rep["drift.s_grid"] = " ".join(f"{s:g}" for s in dp.s_grid)
            rep["drift.epsilon_l1"] = dp.epsilon(1.0)
            if prop.ok:
                v_init = drift_function(initial_state(data), data)
                rep["drift.v_init"] = v_init
                rep["drift.epsilon_v_init"] = dp.epsilon(v_init)
                rep["drift.log_epsilon_v_init"] = dp.log_epsilon(v_init)
    return rep


def format_report(rep: dict) -> str:
    width = max(len(k) for k in rep)
    lines = []
    for k, v in rep.items():
        if isinstance(v, float):
            v = f"{v:.10g}"
        lines.append(f"{k.ljust(width)}  {v}")
    return "\n".join(lines) + "\n"


def cmd_check(cfg) -> int:
    data, prior, mixing = _load(cfg)
    rep = check_report(data, prior, mixing)
    if cfg.get("format") == "json":
        sys.stdout.write(json.dumps(rep, indent=2) + "\n")
    else:
        sys.stdout.write(format_report(rep))
    return EXIT_OK if rep["propriety.ok"] else EXIT_INVALID


def cmd_run(cfg) -> int:
    iters, burnin, thin = cfg.get("iters"), cfg["burnin"], cfg["thin"]
    if iters is None:
        raise UsageError("--iters is required")
    if not iters > burnin >= 0 or thin < 1:
        raise UsageError(f"need iters > burnin >= 0 and thin >= 1 (iters={iters}, burnin={burnin}, thin={thin})")
    if cfg["chains"] < 1:
        raise UsageError("--chains must be at least 1")
    data, prior, mixing = _load(cfg)
    prop = validate_propriety(data, prior)
    if not prop.ok:
        msg = "; ".join(prop.failures())
        if not cfg["force"]:
            print(f"refusing to run, posterior may be improper: {msg} (use --force to override)", file=sys.stderr)
            return EXIT_INVALID
        print(f"warning: running despite failed propriety checks: {msg}", file=sys.stderr)
    verdict = verdict_for(mixing, data.dims, prior.a)
    if not verdict.guaranteed:
        print(f"warning: geometric ergodicity not guaranteed ({verdict.reason}); {verdict.note}", file=sys.stderr)

    if cfg.get("seed") is None:
        cfg["seed"] = int(np.random.SeedSequence().entropy % (2 ** 63))
    out = Path(cfg.get("out") or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_config(out / "run.cfg", cfg)
    kwargs = dict(burn_in=burnin, thin=thin, keep_latents=cfg["keep_latents"])
    k = cfg["chains"]
    try:
        if k == 1:
            traces = [run_chain(data, prior, mixing, iters, seed=cfg["seed"], **kwargs)]
            paths = [out / "trace.csv"]
        else:
            traces = run_chains(data, prior, mixing, iters, k, cfg["seed"], **kwargs)
            paths = [out / f"trace_chain{j}.csv" for j in range(k)]
    except ChainAborted as exc:
        exc.trace.to_csv(out / "trace.partial.csv")
        print(f"sampling failed: {exc}; partial trace in {out / 'trace.partial.csv'}", file=sys.stderr)
        return EXIT_RUNTIME
    for trace, path in zip(traces, paths):
        trace.to_csv(path)
        print(f"wrote {len(trace)} draws to {path}")
    return EXIT_OK


def cmd_summarize(cfg) -> int:
    lags = tuple(int(v) for v in str(cfg.get("lags") or ",".join(map(str, DEFAULT_LAGS))).split(","))
    for name in cfg["traces"]:
        path = Path(name)
        try:
            trace = ChainTrace.from_csv(path)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read trace {path}: {exc}") from None
        if len(trace) == 0:
            raise UsageError(f"trace {path} is empty")
        table = summarize(trace, batch_count=cfg.get("batches") or DEFAULT_BATCHES, lags=lags)
        out = Path(cfg.get("out") or path.parent)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{path.stem}.summary.csv").write_text(table.to_csv())
        text = table.to_text()
        (out / f"{path.stem}.summary.txt").write_text(text)
        sys.stdout.write(f"# {path}\n{text}")
    return EXIT_OK


def default_design(n: int, p: int, seed: int) -> np.ndarray:
    """Intercept column followed by iid N(0, 1) columns from ``default_rng((seed, 1))``."""
    rng = np.random.default_rng((seed, 1))
    return np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])


def cmd_synth(cfg) -> int:
    if cfg.get("beta") is None or cfg.get("sigma") is None:
        raise UsageError("synth needs --beta and --sigma")
    beta, sigma = parse_matrix(cfg["beta"]), parse_matrix(cfg["sigma"])
    if cfg.get("seed") is None:
        cfg["seed"] = int(np.random.SeedSequence().entropy % (2 ** 63))
    seed = cfg["seed"]
    if cfg.get("x"):
        X = np.loadtxt(cfg["x"], delimiter=",", ndmin=2, skiprows=1 if cfg["header"] else 0)
    else:
        if cfg.get("n") is None:
            raise UsageError("synth needs --n or --x")
        X = default_design(cfg["n"], beta.shape[0], seed)
    mixing = _mixing(cfg, beta.shape[1])
    try:
        data = generate_synthetic(beta, sigma, X, mixing, seed)
    except (ValueError, SmnregError) as exc:
        raise UsageError(str(exc)) from None
    out = Path(cfg.get("out") or ".")
    out.mkdir(parents=True, exist_ok=True)
    data.to_csv(out / "X.csv", out / "Y.csv")
    write_config(out / "synth.cfg", cfg)
    print(f"wrote X.csv ({data.n}x{data.p}) and Y.csv ({data.n}x{data.d}) to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def _common(sp, data=True, sampling=False):
    sp.add_argument("--config", help="flat key = value settings file; flags override it")
    sp.add_argument("--mixing", help="gamma:<nu> | degenerate | user")
    sp.add_argument("--origin", help="user mixing origin tag: zero:<delta> | poly:<c> | faster")
    sp.add_argument("--user-density", help="module:function evaluating h(u)")
    sp.add_argument("--user-sampler", help="module:function(size, rng) drawing from h")
    sp.add_argument("--user-psi-sampler", help="module:function(s, rng) drawing from psi(.; s)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="output directory")
    if data:
        sp.add_argument("--x", help="covariate CSV (n x p)")
        sp.add_argument("--y", help="response CSV (n x d)")
        sp.add_argument("--header", action="store_const", const=True, help="skip the first line of each CSV")
        sp.add_argument("--a", type=float, help="prior exponent (default (d+1)/2)")
    if sampling:
        sp.add_argument("--iters", type=int)
        sp.add_argument("--burnin", type=int)
        sp.add_argument("--thin", type=int)
        sp.add_argument("--chains", type=int, help="independent chains run concurrently")
        sp.add_argument("--force", action="store_const", const=True, help="run even if propriety checks fail")
        sp.add_argument("--keep-latents", action="store_const", const=True, help="record latent draws")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="smnreg", description=__doc__.split("\n\n")[0].strip())
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("check", help="propriety, tail condition, ergodicity verdict and certificate")
    _common(sp)
    sp.add_argument("--format", choices=("text", "json"), default="text")

    sp = sub.add_parser("run", help="run the data augmentation sampler")
    _common(sp, sampling=True)

    sp = sub.add_parser("summarize", help="posterior summaries of trace files")
    sp.add_argument("traces", nargs="+")
    sp.add_argument("--out")
    sp.add_argument("--batches", type=int)
    sp.add_argument("--lags", help="comma-separated ACF lags")

    sp = sub.add_parser("synth", help="simulate a dataset")
    _common(sp, data=False)
    sp.add_argument("--beta", help='coefficient matrix "r1c1,r1c2;r2c1,..." or CSV path')
    sp.add_argument("--sigma", help="scale matrix, same format")
    sp.add_argument("--n", type=int, help="rows of the default design")
    sp.add_argument("--x", help="use this design CSV instead of the default")
    sp.add_argument("--header", action="store_const", const=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"check": cmd_check, "run": cmd_run, "summarize": cmd_summarize, "synth": cmd_synth}
    try:
        cfg = resolve(args)
        if args.command == "check":
            cfg["format"] = args.format
        if args.command == "summarize":
            cfg.update(traces=args.traces, batches=args.batches, lags=args.lags)
        return handlers[args.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SmnregError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
